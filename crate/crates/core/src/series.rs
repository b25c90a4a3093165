//! Time-series ingestion, validation, transforms and windowing.
//!
//! Time is an integer index internally. Calendar dates are parsed once at
//! ingestion (ISO-8601, mapped to a day number) and kept only through the
//! series label; every downstream formula works on discrete indices.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats;

/// A validated, immutable time series.
///
/// Invariants: timestamps strictly increasing, length >= 2, all values finite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    timestamps: Vec<i64>,
    values: Vec<f64>,
    label: String,
}

/// Return transform applied between consecutive observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReturnKind {
    /// `x_{i+1}/x_i - 1`
    Simple,
    /// `ln(x_{i+1}/x_i)`; requires strictly positive values.
    Log,
    /// `x_{i+1} - x_i`
    RawDifference,
}

/// Per-step returns derived from a [`TimeSeries`]; length = source length - 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnSeries {
    values: Vec<f64>,
    kind: ReturnKind,
}

/// How to treat missing observations (empty/NaN/inf cells, skipped days).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapPolicy {
    /// Refuse the file on any missing or non-finite value. Timestamp gaps
    /// are kept as-is (indices stay strictly increasing, not necessarily
    /// consecutive). This is the default: silent filling distorts scaling
    /// exponents.
    #[default]
    Reject,
    /// Repeat the last seen value over missing cells and skipped integer
    /// timestamps, so the result covers the full calendar span.
    ForwardFill,
}

/// Selects a CSV column by 0-based position or by header name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSel {
    Index(usize),
    Name(String),
}

/// Which columns hold time and value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub time: ColumnSel,
    pub value: ColumnSel,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        ColumnSpec {
            time: ColumnSel::Index(0),
            value: ColumnSel::Index(1),
        }
    }
}

impl TimeSeries {
    /// Builds a series from raw parts, enforcing the type invariants.
    pub fn new(timestamps: Vec<i64>, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: timestamps.len(),
                right: values.len(),
            });
        }
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if values.len() < 2 {
            return Err(Error::SeriesTooShort {
                len: values.len(),
                min: 2,
            });
        }
        for (i, w) in timestamps.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::NonMonotoneTimestamps {
                    row: i + 2,
                    previous: w[0],
                    current: w[1],
                });
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row: i + 1 });
        }
        Ok(TimeSeries {
            timestamps,
            values,
            label: label.into(),
        })
    }

    /// Convenience constructor with timestamps `0..n`.
    pub fn from_values(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let ts = (0..values.len() as i64).collect();
        TimeSeries::new(ts, values, label)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn mean(&self) -> f64 {
        stats::mean(&self.values)
    }

    /// Contiguous sub-series of `length` points starting at `start`.
    ///
    /// The label is annotated with the window bounds so windows compose
    /// traceably: `window(window(s,a,n), b, m) == window(s, a+b, m)`.
    pub fn window(&self, start: usize, length: usize) -> Result<TimeSeries> {
        if start + length > self.len() || length < 2 {
            return Err(Error::WindowOutOfRange {
                start,
                len: length,
                n: self.len(),
            });
        }
        let mut label = String::new();
        let _ = write!(label, "{}[{}..{})", self.base_label(), self.window_offset() + start,
            self.window_offset() + start + length);
        Ok(TimeSeries {
            timestamps: self.timestamps[start..start + length].to_vec(),
            values: self.values[start..start + length].to_vec(),
            label,
        })
    }

    /// All rolling windows of `length` points advancing by `step`.
    ///
    /// With `step == 1` there are `N - length + 1` windows.
    pub fn rolling(&self, length: usize, step: usize) -> Vec<TimeSeries> {
        assert!(step > 0, "rolling step must be positive");
        let mut out = Vec::new();
        let mut start = 0;
        while start + length <= self.len() {
            // In-range by construction.
            out.push(self.window(start, length).expect("window in range"));
            start += step;
        }
        out
    }

    /// Per-step returns of the chosen kind.
    pub fn returns(&self, kind: ReturnKind) -> Result<ReturnSeries> {
        let mut out = Vec::with_capacity(self.len() - 1);
        for i in 0..self.len() - 1 {
            let (a, b) = (self.values[i], self.values[i + 1]);
            let r = match kind {
                ReturnKind::Simple => {
                    if a == 0.0 {
                        return Err(Error::NonPositiveValue { index: i, value: a });
                    }
                    b / a - 1.0
                }
                ReturnKind::Log => {
                    if a <= 0.0 {
                        return Err(Error::NonPositiveValue { index: i, value: a });
                    }
                    if b <= 0.0 {
                        return Err(Error::NonPositiveValue {
                            index: i + 1,
                            value: b,
                        });
                    }
                    (b / a).ln()
                }
                ReturnKind::RawDifference => b - a,
            };
            out.push(r);
        }
        Ok(ReturnSeries { values: out, kind })
    }

    fn base_label(&self) -> &str {
        match self.label.find('[') {
            Some(pos) => &self.label[..pos],
            None => &self.label,
        }
    }

    fn window_offset(&self) -> usize {
        // Extract the start bound of a previous window annotation, if any.
        self.label
            .find('[')
            .and_then(|open| {
                let rest = &self.label[open + 1..];
                rest.find("..").and_then(|dots| rest[..dots].parse().ok())
            })
            .unwrap_or(0)
    }
}

impl ReturnSeries {
    pub fn from_values(values: Vec<f64>, kind: ReturnKind) -> Self {
        ReturnSeries { values, kind }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> ReturnKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        stats::mean(&self.values)
    }

    /// Population variance of the returns.
    pub fn variance(&self) -> f64 {
        stats::variance(&self.values)
    }
}

/// Parses a time cell: a plain integer index, or an ISO-8601 date mapped
/// to a day number (days since 1970-01-01).
pub fn parse_timestamp(cell: &str) -> Option<i64> {
    let cell = cell.trim();
    if let Ok(v) = cell.parse::<i64>() {
        return Some(v);
    }
    parse_iso_date(cell)
}

/// Day number of a `YYYY-MM-DD` date relative to the Unix epoch.
fn parse_iso_date(s: &str) -> Option<i64> {
    let date = chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()?;
    let epoch = chrono::NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
    Some(date.signed_duration_since(epoch).num_days())
}

fn resolve_column(sel: &ColumnSel, headers: &csv::StringRecord) -> Result<usize> {
    match sel {
        ColumnSel::Index(i) => Ok(*i),
        ColumnSel::Name(name) => headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse {
                row: 1,
                message: format!("no column named '{name}' in header"),
            }),
    }
}

/// Loads one series from a CSV file (header row required).
///
/// `delimiter` defaults to a comma. Missing observations are handled per
/// `gap_policy`; see [`GapPolicy`].
pub fn load_csv(
    path: impl AsRef<Path>,
    columns: &ColumnSpec,
    gap_policy: GapPolicy,
    delimiter: Option<u8>,
) -> Result<TimeSeries> {
    let path = path.as_ref();
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".to_string());
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter.unwrap_or(b','))
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(io_from_csv)?;
    let headers = reader.headers().map_err(|e| Error::Parse {
        row: 1,
        message: e.to_string(),
    })?;
    let t_col = resolve_column(&columns.time, headers)?;
    let v_col = resolve_column(&columns.value, headers)?;

    let mut timestamps: Vec<i64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2; // 1-based file line, header is line 1
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let t_cell = record.get(t_col).ok_or_else(|| Error::Parse {
            row,
            message: format!("missing time column {t_col}"),
        })?;
        let v_cell = record.get(v_col).ok_or_else(|| Error::Parse {
            row,
            message: format!("missing value column {v_col}"),
        })?;
        let t = parse_timestamp(t_cell).ok_or_else(|| Error::Parse {
            row,
            message: format!("cannot parse time '{t_cell}'"),
        })?;
        if let Some(&prev) = timestamps.last() {
            if t <= prev {
                return Err(Error::NonMonotoneTimestamps {
                    row,
                    previous: prev,
                    current: t,
                });
            }
        }
        let v_cell = v_cell.trim();
        let missing = v_cell.is_empty()
            || v_cell.eq_ignore_ascii_case("nan")
            || v_cell.eq_ignore_ascii_case("na");
        let parsed = if missing {
            None
        } else {
            let v: f64 = v_cell.parse().map_err(|_| Error::Parse {
                row,
                message: format!("cannot parse value '{v_cell}'"),
            })?;
            v.is_finite().then_some(v)
        };
        match (parsed, gap_policy) {
            (Some(v), _) => {
                if gap_policy == GapPolicy::ForwardFill {
                    // Densify skipped integer timestamps with the last value.
                    if let (Some(&prev_t), Some(&prev_v)) = (timestamps.last(), values.last()) {
                        for missing_t in prev_t + 1..t {
                            timestamps.push(missing_t);
                            values.push(prev_v);
                        }
                    }
                }
                timestamps.push(t);
                values.push(v);
            }
            (None, GapPolicy::Reject) => return Err(Error::NonFiniteValue { row }),
            (None, GapPolicy::ForwardFill) => {
                let &prev_v = values.last().ok_or(Error::NonFiniteValue { row })?;
                let &prev_t = timestamps.last().expect("values and timestamps in step");
                for missing_t in prev_t + 1..=t {
                    timestamps.push(missing_t);
                    values.push(prev_v);
                }
            }
        }
    }
    if values.is_empty() {
        return Err(Error::EmptySeries);
    }
    TimeSeries::new(timestamps, values, label)
}

/// Writes `time,value` rows (with header) so that `load_csv` reproduces the
/// series bit-exactly: floats are printed with Rust's shortest
/// round-trippable representation.
pub fn write_csv(series: &TimeSeries, path: impl AsRef<Path>, delimiter: Option<u8>) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter.unwrap_or(b','))
        .from_path(path.as_ref())
        .map_err(io_from_csv)?;
    writer
        .write_record(["time", "value"])
        .map_err(io_from_csv)?;
    for (t, v) in series.timestamps.iter().zip(&series.values) {
        writer
            .write_record([t.to_string(), v.to_string()])
            .map_err(io_from_csv)?;
    }
    writer.flush()?;
    Ok(())
}

fn io_from_csv(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_three_row_csv() {
        let f = write_temp("t,v\n1,10\n2,11\n3,12\n");
        let s = load_csv(f.path(), &ColumnSpec::default(), GapPolicy::Reject, None).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.values(), &[10.0, 11.0, 12.0]);
        assert_eq!(s.timestamps(), &[1, 2, 3]);
    }

    #[test]
    fn duplicate_timestamp_rejected() {
        let f = write_temp("t,v\n1,10\n1,11\n");
        let err = load_csv(f.path(), &ColumnSpec::default(), GapPolicy::Reject, None).unwrap_err();
        assert!(matches!(err, Error::NonMonotoneTimestamps { row: 3, .. }));
    }

    #[test]
    fn forward_fill_covers_calendar_span() {
        // Hand-built fixture: day 4 missing entirely, day 6 value empty.
        // Expected output written by hand: [10, 11, 12, 12, 13, 13],
        // days 1..=6.
        let f = write_temp("t,v\n1,10\n2,11\n3,12\n5,13\n6,\n");
        let s = load_csv(
            f.path(),
            &ColumnSpec::default(),
            GapPolicy::ForwardFill,
            None,
        )
        .unwrap();
        assert_eq!(s.timestamps(), &[1, 2, 3, 4, 5, 6]);
        assert_eq!(s.values(), &[10.0, 11.0, 12.0, 12.0, 13.0, 13.0]);
    }

    #[test]
    fn reject_policy_errors_on_missing_value() {
        let f = write_temp("t,v\n1,10\n2,\n3,12\n");
        let err = load_csv(f.path(), &ColumnSpec::default(), GapPolicy::Reject, None).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue { row: 3 }));
    }

    #[test]
    fn iso_dates_map_to_day_numbers() {
        let f = write_temp("date,close\n1970-01-01,1\n1970-01-02,2\n1970-01-05,3\n");
        let s = load_csv(f.path(), &ColumnSpec::default(), GapPolicy::Reject, None).unwrap();
        assert_eq!(s.timestamps(), &[0, 1, 4]);
        // Column selection by name works too.
        let spec = ColumnSpec {
            time: ColumnSel::Name("date".into()),
            value: ColumnSel::Name("close".into()),
        };
        let s2 = load_csv(f.path(), &spec, GapPolicy::Reject, None).unwrap();
        assert_eq!(s2.values(), s.values());
    }

    #[test]
    fn empty_file_rejected() {
        let f = write_temp("t,v\n");
        let err = load_csv(f.path(), &ColumnSpec::default(), GapPolicy::Reject, None).unwrap_err();
        assert!(matches!(err, Error::EmptySeries));
    }

    #[test]
    fn returns_simple_log_diff() {
        let s = TimeSeries::from_values(vec![10.0, 11.0], "t").unwrap();
        let r = s.returns(ReturnKind::Simple).unwrap();
        assert!((r.values()[0] - 0.1).abs() < 1e-15);

        let e = std::f64::consts::E;
        let s = TimeSeries::from_values(vec![e, e * e], "t").unwrap();
        let r = s.returns(ReturnKind::Log).unwrap();
        assert!((r.values()[0] - 1.0).abs() < 1e-15);

        let s = TimeSeries::from_values(vec![5.0, 5.0, 5.0], "t").unwrap();
        for kind in [ReturnKind::Simple, ReturnKind::Log, ReturnKind::RawDifference] {
            let r = s.returns(kind).unwrap();
            assert!(r.values().iter().all(|&v| v == 0.0), "{kind:?}");
        }
    }

    #[test]
    fn log_returns_need_positive_values() {
        let s = TimeSeries::from_values(vec![1.0, -2.0, 3.0], "t").unwrap();
        assert!(matches!(
            s.returns(ReturnKind::Log),
            Err(Error::NonPositiveValue { index: 1, .. })
        ));
    }

    #[test]
    fn window_contracts() {
        let s = TimeSeries::from_values((0..10).map(f64::from).collect(), "s").unwrap();
        let full = s.window(0, 10).unwrap();
        assert_eq!(full.values(), s.values());

        let w = s.window(3, 4).unwrap();
        assert_eq!(w.values(), &[3.0, 4.0, 5.0, 6.0]);

        assert!(s.window(8, 4).is_err());

        // Composition: window(window(s,2,6), 1, 3) == window(s, 3, 3)
        let inner = s.window(2, 6).unwrap().window(1, 3).unwrap();
        let direct = s.window(3, 3).unwrap();
        assert_eq!(inner.values(), direct.values());
        assert_eq!(inner.label(), direct.label());
    }

    #[test]
    fn rolling_window_count() {
        let s = TimeSeries::from_values((0..20).map(f64::from).collect(), "s").unwrap();
        assert_eq!(s.rolling(5, 1).len(), 16); // N - w + 1
        assert_eq!(s.rolling(5, 5).len(), 4);
    }

    #[test]
    fn csv_round_trip_bit_exact() {
        let values = vec![0.1, std::f64::consts::PI, 1e-300, 12345.6789, 3.0];
        let s = TimeSeries::from_values(values.clone(), "rt").unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(&s, f.path(), None).unwrap();
        let back = load_csv(f.path(), &ColumnSpec::default(), GapPolicy::Reject, None).unwrap();
        assert_eq!(back.values(), values.as_slice());
        assert_eq!(back.timestamps(), s.timestamps());
    }
}
