//! CSV ingestion, price-to-return conversion and column standardization.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::ReturnSeries;

/// Parsed numeric table: header names, optional timestamp column, and the
/// count of rows dropped because a cell failed to parse.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub timestamps: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
    pub dropped_rows: usize,
}

impl RawTable {
    pub fn to_series(&self) -> Result<ReturnSeries> {
        if self.rows.is_empty() {
            return Err(Error::TooFewObservations { required: 1, actual: 0 });
        }
        let d = self.columns.len();
        let data = DMatrix::from_fn(self.rows.len(), d, |i, j| self.rows[i][j]);
        match &self.timestamps {
            Some(ts) => ReturnSeries::with_timestamps(data, ts.clone()),
            None => Ok(ReturnSeries::new(data)),
        }
    }
}

const TIMESTAMP_HEADERS: [&str; 5] = ["timestamp", "date", "time", "t", "index"];

/// Loads a headered CSV. The first column is treated as a timestamp when its
/// header matches a conventional name or its first data cell is non-numeric;
/// remaining columns must be decimal numbers. Rows with any unparsable cell
/// are dropped and counted.
pub fn load_csv(path: &Path) -> Result<RawTable> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.display().to_string()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Parse(e.to_string()))?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() {
        return Err(Error::HeaderMismatch("empty header row".into()));
    }

    let raw_rows: Vec<csv::StringRecord> = rdr
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse(e.to_string()))?;
    if raw_rows.is_empty() {
        return Err(Error::EmptyFile(path.display().to_string()));
    }

    let first_header_is_ts = TIMESTAMP_HEADERS
        .iter()
        .any(|t| headers[0].eq_ignore_ascii_case(t));
    let first_cell_numeric = raw_rows[0]
        .get(0)
        .map(|c| c.trim().parse::<f64>().is_ok())
        .unwrap_or(false);
    let has_timestamp = first_header_is_ts || !first_cell_numeric;

    let value_start = usize::from(has_timestamp);
    let columns: Vec<String> = headers[value_start..].to_vec();
    if columns.is_empty() {
        return Err(Error::HeaderMismatch("no numeric columns after the timestamp".into()));
    }

    let mut rows = Vec::with_capacity(raw_rows.len());
    let mut timestamps = has_timestamp.then(Vec::new);
    let mut dropped = 0;
    for rec in &raw_rows {
        if rec.len() != headers.len() {
            dropped += 1;
            continue;
        }
        let parsed: Option<Vec<f64>> = rec
            .iter()
            .skip(value_start)
            .map(|c| c.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        match parsed {
            Some(vals) => {
                if let Some(ts) = timestamps.as_mut() {
                    ts.push(rec.get(0).unwrap_or("").trim().to_string());
                }
                rows.push(vals);
            }
            None => dropped += 1,
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile(path.display().to_string()));
    }
    Ok(RawTable { columns, timestamps, rows, dropped_rows: dropped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReturnKind {
    Log,
    Simple,
}

impl std::str::FromStr for ReturnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "log" => Ok(ReturnKind::Log),
            "simple" => Ok(ReturnKind::Simple),
            other => Err(Error::Parse(format!("unknown return kind {other}"))),
        }
    }
}

pub const DEFAULT_STALE_GAP: usize = 5;

/// Price rows to returns: r_t = log(p_t / p_{t-1}) or p_t / p_{t-1} - 1.
/// Runs of at least `stale_gap` consecutive all-zero return rows are dropped
/// as stale-price gaps; the second element counts the dropped rows.
pub fn to_returns(
    table: &RawTable,
    kind: ReturnKind,
    stale_gap: usize,
) -> Result<(ReturnSeries, usize)> {
    assert!(stale_gap >= 1, "stale gap must be at least 1");
    let n = table.rows.len();
    if n < 2 {
        return Err(Error::TooFewObservations { required: 2, actual: n });
    }
    let d = table.columns.len();
    let mut returns = Vec::with_capacity(n - 1);
    for t in 1..n {
        let mut r = DVector::zeros(d);
        for j in 0..d {
            let (prev, cur) = (table.rows[t - 1][j], table.rows[t][j]);
            r[j] = match kind {
                ReturnKind::Log => {
                    if prev <= 0.0 {
                        return Err(Error::NonPositivePrice(t - 1));
                    }
                    if cur <= 0.0 {
                        return Err(Error::NonPositivePrice(t));
                    }
                    (cur / prev).ln()
                }
                ReturnKind::Simple => cur / prev - 1.0,
            };
        }
        returns.push(r);
    }

    // mark rows inside all-zero runs of length >= stale_gap
    let zero: Vec<bool> = returns.iter().map(|r| r.iter().all(|&v| v == 0.0)).collect();
    let mut keep = vec![true; returns.len()];
    let mut t = 0;
    while t < zero.len() {
        if zero[t] {
            let start = t;
            while t < zero.len() && zero[t] {
                t += 1;
            }
            if t - start >= stale_gap {
                for k in keep.iter_mut().take(t).skip(start) {
                    *k = false;
                }
            }
        } else {
            t += 1;
        }
    }
    let dropped = keep.iter().filter(|&&k| !k).count();
    let kept: Vec<DVector<f64>> = returns
        .into_iter()
        .zip(&keep)
        .filter_map(|(r, &k)| k.then_some(r))
        .collect();
    let series = if kept.is_empty() {
        ReturnSeries::new(DMatrix::zeros(0, d))
    } else {
        ReturnSeries::from_rows(&kept)?
    };
    Ok((series, dropped))
}

/// A named, possibly standardized return series ready for evaluation.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub series: ReturnSeries,
    pub source_path: String,
    pub standardized: bool,
}

/// Column-wise (x - mean) / std with the population std (divisor n).
pub fn standardize(series: &ReturnSeries) -> Result<ReturnSeries> {
    let (n, d) = (series.len(), series.dim());
    if n < 2 {
        return Err(Error::TooFewObservations { required: 2, actual: n });
    }
    let data = series.data();
    let mut out = data.clone();
    for j in 0..d {
        let col = data.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        if var == 0.0 {
            return Err(Error::ZeroVarianceColumn(j));
        }
        let sd = var.sqrt();
        for i in 0..n {
            out[(i, j)] = (data[(i, j)] - mean) / sd;
        }
    }
    match series.timestamps() {
        Some(ts) => ReturnSeries::with_timestamps(out, ts.to_vec()),
        None => Ok(ReturnSeries::new(out)),
    }
}

impl Dataset {
    /// Wraps a series, standardizing unless `skip_standardize` is set.
    pub fn prepare(
        name: &str,
        series: ReturnSeries,
        source_path: &str,
        skip_standardize: bool,
    ) -> Result<Dataset> {
        let (series, standardized) = if skip_standardize {
            (series, false)
        } else {
            (standardize(&series)?, true)
        };
        Ok(Dataset {
            name: name.to_string(),
            series,
            source_path: source_path.to_string(),
            standardized,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    fn table_from(rows: Vec<Vec<f64>>, d: usize) -> RawTable {
        RawTable {
            columns: (0..d).map(|j| format!("c{j}")).collect(),
            timestamps: None,
            rows,
            dropped_rows: 0,
        }
    }

    #[test]
    fn load_csv_well_formed() {
        let f = write_tmp("a,b\n1.0,2.0\n3.0,4.0\n");
        let t = load_csv(f.path()).unwrap();
        assert_eq!(t.columns, vec!["a", "b"]);
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.dropped_rows, 0);
        assert!(t.timestamps.is_none());
        assert_abs_diff_eq!(t.rows[1][1], 4.0, epsilon = 1e-15);
    }

    #[test]
    fn load_csv_timestamp_column_by_header_and_content() {
        let f = write_tmp("date,x\n2020-01-01,1.5\n2020-01-02,2.5\n");
        let t = load_csv(f.path()).unwrap();
        assert_eq!(t.columns, vec!["x"]);
        assert_eq!(t.timestamps.as_ref().unwrap()[0], "2020-01-01");

        // non-numeric first cell triggers timestamp detection even with an
        // unconventional header name
        let f = write_tmp("k,x\nfoo,1.5\nbar,2.5\n");
        let t = load_csv(f.path()).unwrap();
        assert_eq!(t.columns, vec!["x"]);
        assert!(t.timestamps.is_some());
    }

    #[test]
    fn load_csv_corrupt_row_dropped_and_counted() {
        let f = write_tmp("a,b\n1.0,2.0\nbad,oops\n3.0,4.0\n");
        let t = load_csv(f.path()).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.dropped_rows, 1);
    }

    #[test]
    fn load_csv_error_cases() {
        assert!(matches!(
            load_csv(Path::new("/nonexistent/definitely-missing.csv")),
            Err(Error::FileNotFound(_))
        ));
        let f = write_tmp("a,b\n");
        assert!(matches!(load_csv(f.path()), Err(Error::EmptyFile(_))));
    }

    #[test]
    fn to_returns_log_hand_values() {
        let t = table_from(vec![vec![1.0], vec![std::f64::consts::E]], 1);
        let (s, dropped) = to_returns(&t, ReturnKind::Log, DEFAULT_STALE_GAP).unwrap();
        assert_eq!(dropped, 0);
        assert_abs_diff_eq!(s.row(0)[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn to_returns_simple_hand_values() {
        let t = table_from(vec![vec![100.0], vec![110.0]], 1);
        let (s, _) = to_returns(&t, ReturnKind::Simple, DEFAULT_STALE_GAP).unwrap();
        assert_abs_diff_eq!(s.row(0)[0], 0.10, epsilon = 1e-12);
    }

    #[test]
    fn to_returns_stale_gap_dropped() {
        // six constant price rows -> five zero returns -> gap-dropped
        let t = table_from((0..6).map(|_| vec![6.0]).collect(), 1);
        let (s, dropped) = to_returns(&t, ReturnKind::Log, DEFAULT_STALE_GAP).unwrap();
        assert_eq!(s.len(), 0);
        assert_eq!(dropped, 5);

        // a short flat patch below the threshold is kept
        let t = table_from(
            vec![vec![1.0], vec![2.0], vec![2.0], vec![2.0], vec![3.0]],
            1,
        );
        let (s, dropped) = to_returns(&t, ReturnKind::Log, DEFAULT_STALE_GAP).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(dropped, 0);
    }

    #[test]
    fn to_returns_non_positive_price() {
        let t = table_from(vec![vec![1.0], vec![-2.0]], 1);
        assert!(matches!(
            to_returns(&t, ReturnKind::Log, DEFAULT_STALE_GAP),
            Err(Error::NonPositivePrice(1))
        ));
        // simple returns tolerate negatives
        assert!(to_returns(&t, ReturnKind::Simple, DEFAULT_STALE_GAP).is_ok());
    }

    #[test]
    fn standardize_hand_values() {
        let s = ReturnSeries::new(DMatrix::from_column_slice(2, 1, &[0.0, 2.0]));
        let z = standardize(&s).unwrap();
        assert_abs_diff_eq!(z.data()[(0, 0)], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z.data()[(1, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn standardize_moments_and_idempotence() {
        let mut vals = Vec::new();
        for t in 0..50 {
            vals.push((t as f64 * 0.7).sin() + 0.3);
        }
        let s = ReturnSeries::new(DMatrix::from_column_slice(50, 1, &vals));
        let z = standardize(&s).unwrap();
        let col = z.data().column(0);
        let mean = col.sum() / 50.0;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 50.0;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(var.sqrt(), 1.0, epsilon = 1e-10);
        // already-standard input is unchanged
        let z2 = standardize(&z).unwrap();
        for i in 0..50 {
            assert_abs_diff_eq!(z2.data()[(i, 0)], z.data()[(i, 0)], epsilon = 1e-10);
        }
    }

    #[test]
    fn standardize_zero_variance_column() {
        let s = ReturnSeries::new(DMatrix::from_column_slice(3, 1, &[2.0, 2.0, 2.0]));
        assert!(matches!(standardize(&s), Err(Error::ZeroVarianceColumn(0))));
    }

    #[test]
    fn dataset_prepare_flags() {
        let s = ReturnSeries::new(DMatrix::from_column_slice(3, 1, &[1.0, -1.0, 0.5]));
        let d = Dataset::prepare("toy", s.clone(), "mem", false).unwrap();
        assert!(d.standardized);
        let d = Dataset::prepare("toy", s, "mem", true).unwrap();
        assert!(!d.standardized);
    }
}
