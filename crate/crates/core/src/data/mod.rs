//! Monthly panels: loading, validation and model-ready transforms.

mod transform;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use transform::{
    chronological_split, country_delta, difference, invert_difference, minmax_fit, minmax_inverse, minmax_transform,
    ScalingParams, SplitSpec,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("could not read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("missing or malformed header: {0}")]
    MalformedHeader(String),
    #[error("row {row}: malformed date {value:?}, expected YYYY-MM")]
    MalformedDate { row: usize, value: String },
    #[error("row {row}, column {column:?}: non-numeric or non-finite cell {value:?}")]
    NonNumericCell { row: usize, column: String, value: String },
    #[error("row {row}: expected {expected} cells, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("month gap: expected {expected}, found {found}")]
    MonthGap { expected: YearMonth, found: YearMonth },
    #[error("column mismatch: expected {expected:?}, found {found:?}")]
    ColumnMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("frame has no rows")]
    Empty,
    #[error("frames cover different dates")]
    DateMismatch,
    #[error("frames have different columns")]
    NameMismatch,
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("column {0:?} is constant over the training rows")]
    DegenerateColumn(String),
    #[error("series too short: need more than {needed} values, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("split leaves an empty or undersized partition ({train} train / {test} test rows)")]
    EmptyPartition { train: usize, test: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u8,
}

impl YearMonth {
    pub fn new(year: i32, month: u8) -> Option<Self> {
        (1..=12).contains(&month).then_some(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u8 {
        self.month
    }

    pub fn succ(self) -> Self {
        self.add_months(1)
    }

    pub fn add_months(self, months: usize) -> Self {
        let idx = self.year as i64 * 12 + (self.month as i64 - 1) + months as i64;
        Self {
            year: idx.div_euclid(12) as i32,
            month: (idx.rem_euclid(12) + 1) as u8,
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let (y, m) = s.split_once('-').ok_or(())?;
        if y.len() != 4 || m.len() != 2 || !y.bytes().chain(m.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(());
        }
        let year = y.parse().map_err(|_| ())?;
        let month = m.parse().map_err(|_| ())?;
        YearMonth::new(year, month).ok_or(())
    }
}

impl Serialize for YearMonth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse()
            .map_err(|_| serde::de::Error::custom(format!("malformed month {s:?}")))
    }
}

/// Date-indexed matrix of named monthly series.
///
/// Rows are consecutive calendar months; values are stored row-major and are
/// always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    dates: Vec<YearMonth>,
    names: Vec<String>,
    values: Vec<f64>,
}

impl TimeSeriesFrame {
    /// Builds a frame from row-major values, checking every invariant.
    pub fn new(dates: Vec<YearMonth>, names: Vec<String>, values: Vec<f64>) -> Result<Self, DataError> {
        if dates.is_empty() {
            return Err(DataError::Empty);
        }
        if values.len() != dates.len() * names.len() {
            return Err(DataError::InvalidArgument(format!(
                "{} values for {} rows x {} columns",
                values.len(),
                dates.len(),
                names.len()
            )));
        }
        check_consecutive(&dates)?;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let k = names.len();
            return Err(DataError::NonNumericCell {
                row: pos / k,
                column: names[pos % k].clone(),
                value: values[pos].to_string(),
            });
        }
        Ok(Self { dates, names, values })
    }

    /// Builds a frame from named columns starting at `start`.
    pub fn from_columns(start: YearMonth, columns: Vec<(String, Vec<f64>)>) -> Result<Self, DataError> {
        let n = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
        if columns.iter().any(|(_, c)| c.len() != n) {
            return Err(DataError::InvalidArgument("columns differ in length".into()));
        }
        let dates = (0..n).map(|i| start.add_months(i)).collect();
        let mut values = Vec::with_capacity(n * columns.len());
        for i in 0..n {
            values.extend(columns.iter().map(|(_, c)| c[i]));
        }
        let names = columns.into_iter().map(|(name, _)| name).collect();
        Self::new(dates, names, values)
    }

    pub fn dates(&self) -> &[YearMonth] {
        &self.dates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.n_cols();
        &self.values[i * k..(i + 1) * k]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    pub fn column_index(&self, name: &str) -> Result<usize, DataError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| DataError::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.get(i, j)).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Result<Vec<f64>, DataError> {
        Ok(self.column(self.column_index(name)?))
    }

    /// Rows `range` as a new frame.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Result<Self, DataError> {
        if range.start >= range.end || range.end > self.n_rows() {
            return Err(DataError::Empty);
        }
        let k = self.n_cols();
        Ok(Self {
            dates: self.dates[range.clone()].to_vec(),
            names: self.names.clone(),
            values: self.values[range.start * k..range.end * k].to_vec(),
        })
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self, DataError> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n))
            .collect::<Result<Vec<_>, _>>()?;
        let mut values = Vec::with_capacity(self.n_rows() * idx.len());
        for i in 0..self.n_rows() {
            values.extend(idx.iter().map(|&j| self.get(i, j)));
        }
        Ok(Self {
            dates: self.dates.clone(),
            names: names.iter().map(|s| s.to_string()).collect(),
            values,
        })
    }

    /// Applies `f(column_index, value)` to every cell.
    pub(crate) fn map_cells(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let k = self.n_cols().max(1);
        Self {
            dates: self.dates.clone(),
            names: self.names.clone(),
            values: self.values.iter().enumerate().map(|(p, &v)| f(p % k, v)).collect(),
        }
    }

    /// Renders the frame in the ingestion CSV format.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("date");
        for name in &self.names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (i, date) in self.dates.iter().enumerate() {
            out.push_str(&date.to_string());
            for v in self.row(i) {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Parses CSV text. `row` numbers in errors are 1-based file lines.
    pub fn parse_csv(text: &str, expected_columns: Option<&[&str]>) -> Result<Self, DataError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| DataError::MalformedHeader("empty file".into()))?;
        let mut cols = header.split(',').map(str::trim);
        if cols.next() != Some("date") {
            return Err(DataError::MalformedHeader(format!(
                "first column must be `date`, got {header:?}"
            )));
        }
        let names: Vec<String> = cols.map(str::to_string).collect();
        if names.iter().any(|n| n.is_empty()) {
            return Err(DataError::MalformedHeader(format!("empty column name in {header:?}")));
        }
        if let Some(expected) = expected_columns {
            if expected.len() != names.len() || expected.iter().zip(&names).any(|(e, n)| e != n) {
                return Err(DataError::ColumnMismatch {
                    expected: expected.iter().map(|s| s.to_string()).collect(),
                    found: names,
                });
            }
        }

        let mut dates = Vec::new();
        let mut values = Vec::new();
        for (row, line) in lines {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != names.len() + 1 {
                return Err(DataError::RaggedRow {
                    row,
                    expected: names.len() + 1,
                    found: cells.len(),
                });
            }
            let date: YearMonth = cells[0].parse().map_err(|_| DataError::MalformedDate {
                row,
                value: cells[0].to_string(),
            })?;
            if let Some(&prev) = dates.last() {
                let expected = YearMonth::succ(prev);
                if date != expected {
                    return Err(DataError::MonthGap { expected, found: date });
                }
            }
            dates.push(date);
            for (cell, name) in cells[1..].iter().zip(&names) {
                let v: f64 =
                    cell.parse()
                        .ok()
                        .filter(|v: &f64| v.is_finite())
                        .ok_or_else(|| DataError::NonNumericCell {
                            row,
                            column: name.clone(),
                            value: cell.to_string(),
                        })?;
                values.push(v);
            }
        }
        Self::new(dates, names, values)
    }
}

fn check_consecutive(dates: &[YearMonth]) -> Result<(), DataError> {
    for w in dates.windows(2) {
        if w[1] != w[0].succ() {
            return Err(DataError::MonthGap {
                expected: w[0].succ(),
                found: w[1],
            });
        }
    }
    Ok(())
}

/// Loads and validates a monthly CSV file.
pub fn load_csv(path: impl AsRef<Path>, expected_columns: Option<&[&str]>) -> Result<TimeSeriesFrame, DataError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| DataError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    TimeSeriesFrame::parse_csv(&text, expected_columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn year_month_round_trip_and_arithmetic() {
        let d: YearMonth = "1994-04".parse().unwrap();
        assert_eq!(d.to_string(), "1994-04");
        assert_eq!(d.add_months(296).to_string(), "2018-12");
        assert_eq!("1999-12".parse::<YearMonth>().unwrap().succ().to_string(), "2000-01");
        for bad in ["1994-13", "1994-4", "94-04", "1994/04", "abcd-01", "1994-00"] {
            assert!(bad.parse::<YearMonth>().is_err(), "{bad}");
        }
    }

    #[test]
    fn loads_well_formed_file() {
        let f = TimeSeriesFrame::parse_csv("date,cpi,iip\n2000-01,1,2\n2000-02,3,4\n2000-03,5,6\n", None).unwrap();
        assert_eq!(f.n_rows(), 3);
        assert_eq!(f.names(), ["cpi", "iip"]);
        assert_eq!(f.row(1), [3.0, 4.0]);
        assert_eq!(f.column_by_name("iip").unwrap(), vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn skipped_month_is_a_gap() {
        let err = TimeSeriesFrame::parse_csv("date,cpi\n1997-01,1\n1997-02,2\n1997-04,3\n", None).unwrap_err();
        assert!(matches!(err, DataError::MonthGap { expected, .. } if expected.to_string() == "1997-03"));
    }

    #[test]
    fn non_numeric_cell_is_rejected() {
        let err = TimeSeriesFrame::parse_csv("date,cpi\n1997-01,1\n1997-02,abc\n", None).unwrap_err();
        assert_eq!(
            err,
            DataError::NonNumericCell {
                row: 3,
                column: "cpi".into(),
                value: "abc".into()
            }
        );
        let err = TimeSeriesFrame::parse_csv("date,cpi\n1997-01,NaN\n", None).unwrap_err();
        assert!(matches!(err, DataError::NonNumericCell { .. }));
        let err = TimeSeriesFrame::parse_csv("date,cpi\n1997-01,inf\n", None).unwrap_err();
        assert!(matches!(err, DataError::NonNumericCell { .. }));
    }

    #[test]
    fn malformed_date_and_header() {
        let err = TimeSeriesFrame::parse_csv("date,cpi\n1997-1,1\n", None).unwrap_err();
        assert_eq!(
            err,
            DataError::MalformedDate {
                row: 2,
                value: "1997-1".into()
            }
        );
        let err = TimeSeriesFrame::parse_csv("month,cpi\n1997-01,1\n", None).unwrap_err();
        assert!(matches!(err, DataError::MalformedHeader(_)));
        let err = TimeSeriesFrame::parse_csv("date,cpi\n", None).unwrap_err();
        assert_eq!(err, DataError::Empty);
    }

    #[test]
    fn expected_columns_are_enforced() {
        let text = "date,cpi,iip\n2000-01,1,2\n";
        assert!(TimeSeriesFrame::parse_csv(text, Some(&["cpi", "iip"])).is_ok());
        let err = TimeSeriesFrame::parse_csv(text, Some(&["iip", "cpi"])).unwrap_err();
        assert!(matches!(err, DataError::ColumnMismatch { .. }));
    }

    #[test]
    fn missing_file() {
        let err = load_csv("/definitely/not/here.csv", None).unwrap_err();
        assert!(matches!(err, DataError::MissingFile(_)));
    }

    #[test]
    fn csv_string_round_trips() {
        let f = TimeSeriesFrame::from_columns(
            "2001-11".parse().unwrap(),
            vec![
                ("a".into(), vec![0.1, -2.5e-7, 3.0]),
                ("b".into(), vec![1e300, 0.0, -1.0]),
            ],
        )
        .unwrap();
        assert_eq!(TimeSeriesFrame::parse_csv(&f.to_csv_string(), None).unwrap(), f);
    }
}
