use serde::{Deserialize, Serialize};

use super::{DataError, TimeSeriesFrame};

/// Element-wise `usa - ind` for two panels with identical dates and columns.
pub fn country_delta(usa: &TimeSeriesFrame, ind: &TimeSeriesFrame) -> Result<TimeSeriesFrame, DataError> {
    if usa.dates() != ind.dates() {
        return Err(DataError::DateMismatch);
    }
    if usa.names() != ind.names() {
        return Err(DataError::NameMismatch);
    }
    let values = usa.values().iter().zip(ind.values()).map(|(a, b)| a - b).collect();
    TimeSeriesFrame::new(usa.dates().to_vec(), usa.names().to_vec(), values)
}

/// Chronological train/test boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    /// Index of the first test row.
    pub boundary_index: usize,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, n_rows: usize) -> Result<Self, DataError> {
        if !(train_fraction > 0.0 && train_fraction <= 1.0) {
            return Err(DataError::InvalidArgument(format!(
                "train fraction {train_fraction} outside (0, 1]"
            )));
        }
        // The nudge keeps products like 0.29 * 100 from flooring to 28.
        let boundary_index = ((train_fraction * n_rows as f64) + 1e-9).floor() as usize;
        Ok(Self {
            train_fraction,
            boundary_index: boundary_index.min(n_rows),
        })
    }
}

/// Per-column min/max used for [0, 1] scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub names: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub fitted_rows: usize,
}

impl ScalingParams {
    pub fn scale(&self, col: usize, v: f64) -> f64 {
        (v - self.min[col]) / (self.max[col] - self.min[col])
    }

    pub fn unscale(&self, col: usize, v: f64) -> f64 {
        v * (self.max[col] - self.min[col]) + self.min[col]
    }

    pub fn column_index(&self, name: &str) -> Result<usize, DataError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| DataError::UnknownColumn(name.to_string()))
    }
}

/// Fits min/max on the training rows `0..split.boundary_index` only.
pub fn minmax_fit(frame: &TimeSeriesFrame, split: &SplitSpec) -> Result<ScalingParams, DataError> {
    let rows = split.boundary_index.min(frame.n_rows());
    if rows < 2 {
        return Err(DataError::EmptyPartition {
            train: rows,
            test: frame.n_rows() - rows,
        });
    }
    let k = frame.n_cols();
    let mut min = vec![f64::INFINITY; k];
    let mut max = vec![f64::NEG_INFINITY; k];
    for i in 0..rows {
        for (j, &v) in frame.row(i).iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    if let Some(j) = (0..k).find(|&j| min[j] == max[j]) {
        return Err(DataError::DegenerateColumn(frame.names()[j].clone()));
    }
    Ok(ScalingParams {
        names: frame.names().to_vec(),
        min,
        max,
        fitted_rows: rows,
    })
}

pub fn minmax_transform(frame: &TimeSeriesFrame, params: &ScalingParams) -> Result<TimeSeriesFrame, DataError> {
    if frame.names() != params.names.as_slice() {
        return Err(DataError::NameMismatch);
    }
    Ok(frame.map_cells(|j, v| params.scale(j, v)))
}

pub fn minmax_inverse(frame: &TimeSeriesFrame, params: &ScalingParams) -> Result<TimeSeriesFrame, DataError> {
    if frame.names() != params.names.as_slice() {
        return Err(DataError::NameMismatch);
    }
    Ok(frame.map_cells(|j, v| params.unscale(j, v)))
}

/// `order`-th difference; the output is `order` values shorter than the input.
pub fn difference(series: &[f64], order: usize) -> Result<Vec<f64>, DataError> {
    if order == 0 {
        return Err(DataError::InvalidArgument("difference order must be >= 1".into()));
    }
    if series.len() <= order {
        return Err(DataError::SeriesTooShort {
            needed: order,
            got: series.len(),
        });
    }
    let mut out = series.to_vec();
    for _ in 0..order {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Integrates `diffs` back to levels given the first `order` original values,
/// where `order = initial.len()`. Returns the full level series.
pub fn invert_difference(diffs: &[f64], initial: &[f64]) -> Result<Vec<f64>, DataError> {
    let order = initial.len();
    if order == 0 {
        return Err(DataError::InvalidArgument("at least one initial value required".into()));
    }
    // Leading value of each intermediate difference series, from the initial levels.
    let mut heads = Vec::with_capacity(order);
    let mut level = initial.to_vec();
    for _ in 0..order {
        heads.push(level[0]);
        level = level.windows(2).map(|w| w[1] - w[0]).collect();
    }
    let mut series = diffs.to_vec();
    for head in heads.into_iter().rev() {
        let mut acc = head;
        let mut next = Vec::with_capacity(series.len() + 1);
        next.push(acc);
        for d in series {
            acc += d;
            next.push(acc);
        }
        series = next;
    }
    Ok(series)
}

/// Splits without shuffling: the first `floor(fraction * n)` rows train.
pub fn chronological_split(
    frame: &TimeSeriesFrame,
    train_fraction: f64,
) -> Result<(TimeSeriesFrame, TimeSeriesFrame), DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::InvalidArgument(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n = frame.n_rows();
    let split = SplitSpec::new(train_fraction, n)?;
    let train = split.boundary_index;
    if train < 2 || train >= n {
        return Err(DataError::EmptyPartition { train, test: n - train });
    }
    Ok((frame.slice_rows(0..train)?, frame.slice_rows(train..n)?))
}
