use nalgebra::{DMatrix, DVector};

/// Columns whose QR pivot falls below this fraction of their own norm are
/// treated as linearly dependent on earlier columns.
const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Singular;

/// Least-squares fit of one or more responses on a shared design matrix.
#[derive(Debug, Clone)]
pub(crate) struct LeastSquares {
    /// k × r coefficients, one column per response.
    pub coef: DMatrix<f64>,
    /// n × r residuals.
    pub residuals: DMatrix<f64>,
    r_inv: DMatrix<f64>,
}

impl LeastSquares {
    pub fn rss(&self, response: usize) -> f64 {
        self.residuals.column(response).norm_squared()
    }

    /// Diagonal element `j` of (XᵀX)⁻¹.
    pub fn xtx_inv_diag(&self, j: usize) -> f64 {
        self.r_inv.row(j).norm_squared()
    }
}

pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<LeastSquares, Singular> {
    let (n, k) = x.shape();
    if n < k || k == 0 {
        return Err(Singular);
    }
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..k {
        let col_norm = x.column(j).norm();
        if col_norm == 0.0 || r[(j, j)].abs() <= RANK_TOLERANCE * col_norm {
            return Err(Singular);
        }
    }
    let q = qr.q();
    let qty = q.transpose() * y;
    let coef = r.solve_upper_triangular(&qty).ok_or(Singular)?;
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(k, k)).ok_or(Singular)?;
    let residuals = y - x * &coef;
    Ok(LeastSquares { coef, residuals, r_inv })
}

pub(crate) fn least_squares_vec(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares, Singular> {
    let y = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
    least_squares(x, &y)
}
