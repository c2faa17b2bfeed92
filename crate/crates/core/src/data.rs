//! Dated daily series: CSV ingestion, window alignment, explicit fill
//! policies, and the normalizations applied to observed data.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gapless daily series: `values[k]` belongs to `start + k` days.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    pub start: NaiveDate,
    pub values: Vec<f64>,
    pub label: String,
}

impl DailySeries {
    pub fn new(start: NaiveDate, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data {
                path: label,
                reason: format!("non-finite value {v}"),
            });
        }
        Ok(DailySeries {
            start,
            values,
            label,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn date(&self, k: usize) -> NaiveDate {
        self.start + Days::new(k as u64)
    }

    pub fn end(&self) -> Option<NaiveDate> {
        (!self.is_empty()).then(|| self.date(self.len() - 1))
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        if date < self.start {
            return None;
        }
        let k = (date - self.start).num_days() as usize;
        (k < self.len()).then_some(k)
    }

    /// True when `other` covers the same dates day for day.
    pub fn aligned_with(&self, other: &DailySeries) -> bool {
        self.start == other.start && self.len() == other.len()
    }

    /// Restrict to the inclusive [from, to] overlap; None when empty.
    pub fn restrict(&self, from: NaiveDate, to: NaiveDate) -> Option<DailySeries> {
        let lo = from.max(self.start);
        let hi = to.min(self.end()?);
        if lo > hi {
            return None;
        }
        let a = (lo - self.start).num_days() as usize;
        let b = (hi - self.start).num_days() as usize;
        Some(DailySeries {
            start: lo,
            values: self.values[a..=b].to_vec(),
            label: self.label.clone(),
        })
    }
}

/// How to fill days absent from an input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FillPolicy {
    /// Absent day means zero (no report, no cases).
    Zero,
    /// Carry the last observed value forward.
    Previous,
}

impl FillPolicy {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(FillPolicy::Zero),
            "previous" => Ok(FillPolicy::Previous),
            other => Err(Error::Config(format!(
                "unknown fill policy {other:?} (expected zero or previous)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FillPolicy::Zero => "zero",
            FillPolicy::Previous => "previous",
        }
    }
}

fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| format!("bad date {s:?} (expected YYYY-MM-DD): {e}"))
}

fn csv_rows(
    path: &Path,
    date_column: &str,
    value_column: &str,
) -> Result<Vec<(usize, NaiveDate, f64)>> {
    let p = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Data {
        path: p.clone(),
        reason: e.to_string(),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data {
            path: p.clone(),
            reason: e.to_string(),
        })?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Data {
                path: p.clone(),
                reason: format!("missing column {name:?} (found: {})", headers.iter().collect::<Vec<_>>().join(", ")),
            })
    };
    let date_idx = col(date_column)?;
    let value_idx = col(value_column)?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // 1-based, counting the header line
        let record = record.map_err(|e| Error::DataRow {
            path: p.clone(),
            row,
            reason: e.to_string(),
        })?;
        let date_s = record.get(date_idx).unwrap_or("");
        let value_s = record.get(value_idx).unwrap_or("");
        let date = parse_date(date_s).map_err(|reason| Error::DataRow {
            path: p.clone(),
            row,
            reason,
        })?;
        let value: f64 = value_s.trim().parse().map_err(|e| Error::DataRow {
            path: p.clone(),
            row,
            reason: format!("bad value {value_s:?}: {e}"),
        })?;
        if !value.is_finite() {
            return Err(Error::DataRow {
                path: p.clone(),
                row,
                reason: format!("non-finite value {value}"),
            });
        }
        rows.push((row, date, value));
    }
    Ok(rows)
}

/// Load a daily series from CSV, restricted to `window` when given, with
/// absent days filled per `fill`. Duplicate dates and unparseable rows are
/// errors naming the offending row.
pub fn load_daily_csv(
    path: &Path,
    date_column: &str,
    value_column: &str,
    window: Option<(NaiveDate, NaiveDate)>,
    fill: FillPolicy,
) -> Result<DailySeries> {
    let p = path.display().to_string();
    let rows = csv_rows(path, date_column, value_column)?;
    let mut by_date: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    for (row, date, value) in rows {
        if by_date.insert(date, value).is_some() {
            return Err(Error::DataRow {
                path: p.clone(),
                row,
                reason: format!("duplicate date {date}"),
            });
        }
    }
    if by_date.is_empty() {
        return Err(Error::Data {
            path: p,
            reason: "no data rows".into(),
        });
    }
    let (from, to) = window.unwrap_or_else(|| {
        (
            *by_date.keys().next().unwrap(),
            *by_date.keys().next_back().unwrap(),
        )
    });
    if from > to {
        return Err(Error::Data {
            path: p,
            reason: format!("window start {from} is after window end {to}"),
        });
    }

    let mut values = Vec::new();
    let mut day = from;
    while day <= to {
        match by_date.get(&day) {
            Some(&v) => values.push(v),
            None => match fill {
                FillPolicy::Zero => values.push(0.0),
                FillPolicy::Previous => {
                    // Last observation before this day, window or not.
                    let prev = by_date.range(..day).next_back().map(|(_, &v)| v);
                    match prev {
                        Some(v) => values.push(v),
                        None => {
                            return Err(Error::Data {
                                path: p,
                                reason: format!(
                                    "day {day} missing with fill policy \"previous\" and no earlier observation"
                                ),
                            })
                        }
                    }
                }
            },
        }
        day = day + Days::new(1);
    }
    DailySeries::new(from, values, p)
}

/// Write a series as `date,value` CSV. Values print with Rust's shortest
/// round-trip float format, so reloading reproduces the series exactly.
pub fn write_daily_csv(path: &Path, series: &DailySeries) -> Result<()> {
    let mut out = String::from("date,value\n");
    for (k, v) in series.values.iter().enumerate() {
        out.push_str(&format!("{},{}\n", series.date(k), v));
    }
    let mut f =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(out.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Min-max over a slice; a constant (or single-element) input maps to zeros.
pub fn min_max_vec(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        values.iter().map(|v| (v - min) / (max - min)).collect()
    } else {
        vec![0.0; values.len()]
    }
}

/// A daily series scaled to [0,1]; the hazard input s_t.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalSignal {
    pub series: DailySeries,
}

impl ExternalSignal {
    pub fn new(series: DailySeries) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::Data {
                path: series.label,
                reason: "signal series is empty".into(),
            });
        }
        for (index, &value) in series.values.iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidSignal { index, value });
            }
        }
        Ok(ExternalSignal { series })
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.series.values
    }
}

/// Scale a series to [0,1] by min-max; constant input maps to all zeros.
pub fn min_max_normalize(series: &DailySeries) -> Result<ExternalSignal> {
    if series.is_empty() {
        return Err(Error::Data {
            path: series.label.clone(),
            reason: "cannot normalize an empty series".into(),
        });
    }
    ExternalSignal::new(DailySeries {
        start: series.start,
        values: min_max_vec(&series.values),
        label: series.label.clone(),
    })
}

/// Sparse survey observations: raw percent worried per round, and the
/// log-then-min-max transform used for comparison with the perception band.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveySeries {
    pub points: Vec<(NaiveDate, f64)>,
    pub transformed: Vec<(NaiveDate, f64)>,
}

/// ln(percent), then min-max across the points. Percentages must lie in
/// (0, 100]; a single point transforms to 0.
pub fn transform_survey(points: &[(NaiveDate, f64)]) -> Result<SurveySeries> {
    if points.is_empty() {
        return Err(Error::Data {
            path: "survey".into(),
            reason: "no survey points".into(),
        });
    }
    for w in points.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::Data {
                path: "survey".into(),
                reason: format!("dates not strictly increasing at {}", w[1].0),
            });
        }
    }
    for &(date, pct) in points {
        if !pct.is_finite() || pct <= 0.0 || pct > 100.0 {
            return Err(Error::Data {
                path: "survey".into(),
                reason: format!("percentage {pct} at {date} outside (0, 100]"),
            });
        }
    }
    let logs: Vec<f64> = points.iter().map(|&(_, pct)| pct.ln()).collect();
    let norm = min_max_vec(&logs);
    let transformed = points
        .iter()
        .zip(norm)
        .map(|(&(date, _), v)| (date, v))
        .collect();
    Ok(SurveySeries {
        points: points.to_vec(),
        transformed,
    })
}

/// Load sparse survey rows (date, percent) without gap filling.
pub fn load_survey_csv(path: &Path, date_column: &str, value_column: &str) -> Result<SurveySeries> {
    let p = path.display().to_string();
    let rows = csv_rows(path, date_column, value_column)?;
    let mut points: Vec<(NaiveDate, f64)> = Vec::with_capacity(rows.len());
    for (row, date, value) in rows {
        if points.iter().any(|&(d, _)| d == date) {
            return Err(Error::DataRow {
                path: p.clone(),
                row,
                reason: format!("duplicate date {date}"),
            });
        }
        points.push((date, value));
    }
    points.sort_by_key(|&(d, _)| d);
    transform_survey(&points)
}

/// Real-time reproduction numbers; strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct RtSeries {
    pub series: DailySeries,
}

impl RtSeries {
    pub fn new(series: DailySeries) -> Result<Self> {
        if let Some(v) = series.values.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::Data {
                path: series.label,
                reason: format!("reproduction number {v} must be positive"),
            });
        }
        Ok(RtSeries { series })
    }
}

/// Centered moving average of width `2*half + 1`, truncated at the edges.
pub fn smooth_centered(series: &DailySeries, half: usize) -> DailySeries {
    let n = series.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let lo = k.saturating_sub(half);
        let hi = (k + half).min(n.saturating_sub(1));
        let window = &series.values[lo..=hi];
        out.push(window.iter().sum::<f64>() / window.len() as f64);
    }
    DailySeries {
        start: series.start,
        values: out,
        label: series.label.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn write_file(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn loads_consecutive_rows_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            &dir,
            "a.csv",
            "date,value\n2020-02-01,1\n2020-02-02,2\n2020-02-03,3\n",
        );
        let s = load_daily_csv(&p, "date", "value", None, FillPolicy::Zero).unwrap();
        assert_eq!(s.start, d("2020-02-01"));
        assert_eq!(s.values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn zero_fill_inserts_missing_day() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "a.csv", "date,value\n2020-02-01,1\n2020-02-03,3\n");
        let s = load_daily_csv(&p, "date", "value", None, FillPolicy::Zero).unwrap();
        assert_eq!(s.values, vec![1.0, 0.0, 3.0]);
    }

    #[test]
    fn previous_fill_carries_forward() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "a.csv", "date,value\n2020-02-01,5\n2020-02-04,8\n");
        let s = load_daily_csv(&p, "date", "value", None, FillPolicy::Previous).unwrap();
        assert_eq!(s.values, vec![5.0, 5.0, 5.0, 8.0]);
    }

    #[test]
    fn previous_fill_without_history_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "a.csv", "date,value\n2020-02-02,5\n");
        let window = Some((d("2020-02-01"), d("2020-02-02")));
        assert!(load_daily_csv(&p, "date", "value", window, FillPolicy::Previous).is_err());
    }

    #[test]
    fn duplicate_date_errors_with_row_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            &dir,
            "a.csv",
            "date,value\n2020-02-01,1\n2020-02-01,2\n",
        );
        let err = load_daily_csv(&p, "date", "value", None, FillPolicy::Zero).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":3:"), "unexpected message: {msg}");
        assert!(msg.contains("duplicate date"));
    }

    #[test]
    fn bad_value_errors_with_row_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "a.csv", "date,value\n2020-02-01,oops\n");
        let err = load_daily_csv(&p, "date", "value", None, FillPolicy::Zero).unwrap_err();
        assert!(err.to_string().contains(":2:"));
    }

    #[test]
    fn missing_column_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "a.csv", "day,value\n2020-02-01,1\n");
        let err = load_daily_csv(&p, "date", "value", None, FillPolicy::Zero).unwrap_err();
        assert!(err.to_string().contains("missing column"));
    }

    #[test]
    fn window_restricts_and_fills() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            &dir,
            "a.csv",
            "date,value\n2020-01-30,9\n2020-02-01,1\n2020-02-02,2\n2020-02-05,5\n",
        );
        let window = Some((d("2020-02-01"), d("2020-02-03")));
        let s = load_daily_csv(&p, "date", "value", window, FillPolicy::Zero).unwrap();
        assert_eq!(s.start, d("2020-02-01"));
        assert_eq!(s.values, vec![1.0, 2.0, 0.0]);
    }

    #[test]
    fn round_trip_export_import() {
        let dir = tempfile::tempdir().unwrap();
        let s = DailySeries::new(
            d("2020-03-01"),
            vec![0.0, 1.5, 0.3333333333333333, 7e-12],
            "trip",
        )
        .unwrap();
        let p = dir.path().join("out.csv");
        write_daily_csv(&p, &s).unwrap();
        let back = load_daily_csv(&p, "date", "value", None, FillPolicy::Zero).unwrap();
        assert_eq!(back.start, s.start);
        assert_eq!(back.values, s.values);
    }

    #[test]
    fn min_max_basic_and_constant() {
        assert_eq!(min_max_vec(&[2.0, 4.0, 6.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(min_max_vec(&[5.0, 5.0, 5.0]), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn min_max_is_idempotent_when_nonconstant() {
        let s = DailySeries::new(d("2020-02-01"), vec![2.0, 4.0, 6.0], "x").unwrap();
        let once = min_max_normalize(&s).unwrap();
        let twice = min_max_normalize(&once.series).unwrap();
        assert_eq!(once.series.values, twice.series.values);
    }

    #[test]
    fn min_max_preserves_argmax() {
        let s = DailySeries::new(d("2020-02-01"), vec![3.0, 9.0, 1.0, 4.0], "x").unwrap();
        let n = min_max_normalize(&s).unwrap();
        assert_eq!(n.series.values[1], 1.0);
        assert_eq!(n.series.values[2], 0.0);
    }

    #[test]
    fn survey_transform_hand_example() {
        // pct = {10e, 10e^2}: ln gives {ln10+1, ln10+2}, min-max gives {0, 1}.
        let points = vec![
            (d("2020-02-01"), 10.0 * std::f64::consts::E),
            (d("2020-03-01"), 10.0 * std::f64::consts::E * std::f64::consts::E),
        ];
        let s = transform_survey(&points).unwrap();
        assert!((s.transformed[0].1 - 0.0).abs() < 1e-12);
        assert!((s.transformed[1].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn survey_single_point_is_zero() {
        let s = transform_survey(&[(d("2020-02-01"), 42.0)]).unwrap();
        assert_eq!(s.transformed, vec![(d("2020-02-01"), 0.0)]);
    }

    #[test]
    fn survey_rejects_domain_violations() {
        assert!(transform_survey(&[(d("2020-02-01"), 0.0)]).is_err());
        assert!(transform_survey(&[(d("2020-02-01"), -3.0)]).is_err());
        assert!(transform_survey(&[(d("2020-02-01"), 101.0)]).is_err());
        let out_of_order = [(d("2020-02-02"), 10.0), (d("2020-02-01"), 20.0)];
        assert!(transform_survey(&out_of_order).is_err());
    }

    #[test]
    fn survey_transform_is_monotone_in_pct() {
        let points = vec![
            (d("2020-02-01"), 20.0),
            (d("2020-02-10"), 80.0),
            (d("2020-02-20"), 50.0),
        ];
        let s = transform_survey(&points).unwrap();
        assert!(s.transformed[0].1 < s.transformed[2].1);
        assert!(s.transformed[2].1 < s.transformed[1].1);
    }

    #[test]
    fn rt_series_rejects_nonpositive() {
        let s = DailySeries::new(d("2020-02-01"), vec![1.0, 0.0], "rt").unwrap();
        assert!(RtSeries::new(s).is_err());
    }

    #[test]
    fn smoothing_truncates_at_edges() {
        let s = DailySeries::new(d("2020-02-01"), vec![1.0, 2.0, 3.0, 4.0, 5.0], "x").unwrap();
        let sm = smooth_centered(&s, 1);
        assert_eq!(sm.values, vec![1.5, 2.0, 3.0, 4.0, 4.5]);
        let sm7 = smooth_centered(&s, 3);
        assert_eq!(sm7.values[0], (1.0 + 2.0 + 3.0 + 4.0) / 4.0);
        assert_eq!(sm7.values[2], 3.0);
    }

    #[test]
    fn restrict_takes_overlap() {
        let s = DailySeries::new(d("2020-02-01"), vec![1.0, 2.0, 3.0, 4.0], "x").unwrap();
        let r = s.restrict(d("2020-02-02"), d("2020-02-10")).unwrap();
        assert_eq!(r.start, d("2020-02-02"));
        assert_eq!(r.values, vec![2.0, 3.0, 4.0]);
        assert!(s.restrict(d("2020-03-01"), d("2020-03-02")).is_none());
    }
}
