//! Regime-length estimation from a stress-index time series (e.g. the Ted
//! spread) by threshold segmentation: a single threshold, or a hysteresis
//! pair with a higher entry level and a lower exit level to suppress
//! noise-driven flip-flops.

use crate::error::CoreError;
use crate::Result;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::io::BufRead;

/// Ordered stress-index observations, strictly increasing in date, values in
/// basis points.
#[derive(Debug, Clone, PartialEq)]
pub struct StressSeries {
    pub observations: Vec<(NaiveDate, f64)>,
}

/// Threshold rule used to classify observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ThresholdRule {
    /// Crisis iff the value is strictly above `lower`.
    Single { lower: f64 },
    /// Crisis entered on the first value strictly above `upper`, exited on
    /// the first value strictly below `lower`; values in between preserve
    /// the current regime.
    Hysteresis { lower: f64, upper: f64 },
}

impl ThresholdRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ThresholdRule::Single { lower } => {
                if lower <= 0.0 || lower.is_nan() {
                    return Err(CoreError::InvalidParams(format!(
                        "single threshold must be positive, got {lower}"
                    )));
                }
            }
            ThresholdRule::Hysteresis { lower, upper } => {
                if !(lower > 0.0 && lower < upper) {
                    return Err(CoreError::InvalidParams(format!(
                        "hysteresis thresholds must satisfy 0 < lower < upper, got ({lower}, {upper})"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeLabel {
    Normal,
    Crisis,
}

impl std::fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegimeLabel::Normal => write!(f, "normal"),
            RegimeLabel::Crisis => write!(f, "crisis"),
        }
    }
}

/// One maximal run of same-label observations. `days` is the inclusive
/// calendar-day count between the first and last observation of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub label: RegimeLabel,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub days: i64,
}

/// Contiguous, alternating segmentation of the observation window.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSegments {
    pub segments: Vec<Segment>,
}

/// Per-label segment counts and mean lengths. Means are absent (not zero)
/// when a label never occurs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    pub count_normal: usize,
    pub count_crisis: usize,
    pub mean_normal_days: Option<f64>,
    pub mean_crisis_days: Option<f64>,
    pub mean_normal_years: Option<f64>,
    pub mean_crisis_years: Option<f64>,
}

const DAYS_PER_YEAR: f64 = 365.0;

/// Result of loading a CSV source: the parsed series plus normalization
/// notes (dropped rows, whether the input had to be re-sorted).
#[derive(Debug, Clone)]
pub struct LoadOutcome {
    pub series: StressSeries,
    pub dropped_rows: usize,
    pub was_unsorted: bool,
}

/// Parses a `date,value` CSV (ISO-8601 dates, values in basis points).
/// Rows with an empty value field are dropped and counted; out-of-order
/// rows are sorted with a flag raised.
pub fn load_series<R: BufRead>(reader: R) -> Result<LoadOutcome> {
    let mut observations: Vec<(NaiveDate, f64)> = Vec::new();
    let mut dropped = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if line_no == 1 && trimmed.eq_ignore_ascii_case("date,value") {
            continue;
        }
        let (date_str, value_str) = trimmed.split_once(',').ok_or_else(|| CoreError::Csv {
            line: line_no,
            message: format!("expected `date,value`, got `{trimmed}`"),
        })?;
        let date =
            NaiveDate::parse_from_str(date_str.trim(), "%Y-%m-%d").map_err(|e| CoreError::Csv {
                line: line_no,
                message: format!("bad date `{date_str}`: {e}"),
            })?;
        let value_str = value_str.trim();
        if value_str.is_empty() || value_str == "." || value_str.eq_ignore_ascii_case("na") {
            dropped += 1;
            continue;
        }
        let value: f64 = value_str.parse().map_err(|e| CoreError::Csv {
            line: line_no,
            message: format!("bad value `{value_str}`: {e}"),
        })?;
        if !value.is_finite() {
            return Err(CoreError::Csv {
                line: line_no,
                message: format!("value must be finite, got {value}"),
            });
        }
        observations.push((date, value));
    }
    if observations.is_empty() {
        return Err(CoreError::SeriesTooShort(
            "no observations after parsing".into(),
        ));
    }
    let was_unsorted = observations.windows(2).any(|w| w[0].0 >= w[1].0);
    if was_unsorted {
        observations.sort_by_key(|(d, _)| *d);
        observations.dedup_by_key(|(d, _)| *d);
    }
    Ok(LoadOutcome {
        series: StressSeries { observations },
        dropped_rows: dropped,
        was_unsorted,
    })
}

/// Labels the series under the rule and groups consecutive equal labels into
/// segments. Under hysteresis the initial label defaults to the first
/// observation's position relative to the thresholds (crisis only if it is
/// already above `upper`); pass `initial` to override.
pub fn segment(series: &StressSeries, rule: &ThresholdRule) -> Result<RegimeSegments> {
    segment_with_initial(series, rule, None)
}

pub fn segment_with_initial(
    series: &StressSeries,
    rule: &ThresholdRule,
    initial: Option<RegimeLabel>,
) -> Result<RegimeSegments> {
    rule.validate()?;
    if series.observations.len() < 2 {
        return Err(CoreError::SeriesTooShort(format!(
            "need at least 2 observations, got {}",
            series.observations.len()
        )));
    }

    let labels: Vec<RegimeLabel> = match *rule {
        ThresholdRule::Single { lower } => series
            .observations
            .iter()
            .map(|&(_, v)| {
                if v > lower {
                    RegimeLabel::Crisis
                } else {
                    RegimeLabel::Normal
                }
            })
            .collect(),
        ThresholdRule::Hysteresis { lower, upper } => {
            let first = series.observations[0].1;
            let mut state = initial.unwrap_or(if first > upper {
                RegimeLabel::Crisis
            } else {
                RegimeLabel::Normal
            });
            series
                .observations
                .iter()
                .map(|&(_, v)| {
                    match state {
                        RegimeLabel::Normal if v > upper => state = RegimeLabel::Crisis,
                        RegimeLabel::Crisis if v < lower => state = RegimeLabel::Normal,
                        _ => {}
                    }
                    state
                })
                .collect()
        }
    };

    let mut segments: Vec<Segment> = Vec::new();
    let mut run_start = 0usize;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[run_start] {
            let start = series.observations[run_start].0;
            let end = series.observations[i - 1].0;
            segments.push(Segment {
                label: labels[run_start],
                start,
                end,
                days: (end - start).num_days() + 1,
            });
            run_start = i;
        }
    }
    Ok(RegimeSegments { segments })
}

/// Per-label counts and arithmetic-mean lengths, in days and years
/// (365-day year).
pub fn estimate_means(segments: &RegimeSegments) -> EstimationResult {
    let mut n_normal = 0usize;
    let mut n_crisis = 0usize;
    let mut d_normal = 0i64;
    let mut d_crisis = 0i64;
    for s in &segments.segments {
        match s.label {
            RegimeLabel::Normal => {
                n_normal += 1;
                d_normal += s.days;
            }
            RegimeLabel::Crisis => {
                n_crisis += 1;
                d_crisis += s.days;
            }
        }
    }
    let mean = |total: i64, count: usize| {
        if count == 0 {
            None
        } else {
            Some(total as f64 / count as f64)
        }
    };
    let mean_normal_days = mean(d_normal, n_normal);
    let mean_crisis_days = mean(d_crisis, n_crisis);
    EstimationResult {
        count_normal: n_normal,
        count_crisis: n_crisis,
        mean_normal_days,
        mean_crisis_days,
        mean_normal_years: mean_normal_days.map(|d| d / DAYS_PER_YEAR),
        mean_crisis_years: mean_crisis_days.map(|d| d / DAYS_PER_YEAR),
    }
}

/// Writes segments as CSV rows `label,start,end,days`.
pub fn write_segments_csv<W: std::io::Write>(segments: &RegimeSegments, mut w: W) -> Result<()> {
    writeln!(w, "label,start,end,days")?;
    for s in &segments.segments {
        writeln!(w, "{},{},{},{}", s.label, s.start, s.end, s.days)?;
    }
    Ok(())
}

/// Writes the one-row estimates file. Absent means serialize as empty
/// fields.
pub fn write_estimates_csv<W: std::io::Write>(est: &EstimationResult, mut w: W) -> Result<()> {
    writeln!(
        w,
        "count_normal,count_crisis,mean_normal_days,mean_crisis_days,mean_normal_years,mean_crisis_years"
    )?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    writeln!(
        w,
        "{},{},{},{},{},{}",
        est.count_normal,
        est.count_crisis,
        fmt(est.mean_normal_days),
        fmt(est.mean_crisis_days),
        fmt(est.mean_normal_years),
        fmt(est.mean_crisis_years)
    )?;
    Ok(())
}
