//! Launch-time statistics: moments, gamma fit, histogram, vfstat report.
//!
//! The centerpiece is [`render_vfstat`], an ASCII distribution report for a
//! probe log. It prints the moment summary, the method-of-moments gamma
//! parameters, and a star histogram over fixed-width buckets (3 seconds by
//! default), one star per whole percent of samples:
//!
//! ```text
//! appA Stats for 728 samples in "bench.log"
//! =====
//! Minm:   5.69      Mean:  14.26      Maxm:  773.94      MDev:   4.35
//! Var:   811.65     SDev:  28.49      COV:    2.00
//! GamA:   0.25     GamB:  56.92
//! Secs |           5%  10%  15%  20%  25%  30%  35%  40%  45%  50%
//! -----+-----+-----+-----+-----+-----+-----+-----+-----+-----+-----
//! < 3 |
//! 3- 6 | *
//! ...
//! ```
//!
//! A coefficient of variation above 1 marks a heavy-tailed distribution, and
//! the report says so explicitly — the launch-time signature that separates
//! "sometimes painfully slow" from merely "slow".
//!
//! Also here: [`split_series`], which turns a multi-app probe log into
//! per-app time series ready for external plotting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::probe::{self, ProbeSample};

/// Maximum stars in one histogram row. Rows beyond the axis are capped and
/// marked with a trailing `>`.
pub const STAR_CAP: usize = 50;

/// Percent axis printed above the histogram; one star column per percent,
/// labeled every five points up to the 50% cap.
pub const VFSTAT_AXIS_HEADER: &str =
    "Secs |           5%  10%  15%  20%  25%  30%  35%  40%  45%  50%";
pub const VFSTAT_AXIS_RULE: &str =
    "-----+-----+-----+-----+-----+-----+-----+-----+-----+-----+-----";

/// Flag line appended when the coefficient of variation exceeds 1.
pub const LONG_TAIL_FLAG: &str = "Long tail: COV > 1";

/// Default histogram bucket width in seconds.
pub const DEFAULT_BUCKET_WIDTH: f64 = 3.0;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("empty input")]
    Empty,
    #[error("need at least 2 samples for a variance, got {0}")]
    TooFew(usize),
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("sample {index} is negative ({value})")]
    Negative { index: usize, value: f64 },
    #[error("{what} must be positive and finite, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("summary covers {summary_n} samples but histogram covers {histogram_n}")]
    Mismatch { summary_n: usize, histogram_n: usize },
}

/// Method-of-moments gamma parameters: `shape * scale` reproduces the mean
/// and `shape * scale^2` the variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFit {
    pub shape: f64,
    /// Scale in seconds.
    pub scale: f64,
}

/// Moment summary of a duration sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsSummary {
    pub n: usize,
    pub minm: f64,
    pub mean: f64,
    pub maxm: f64,
    /// Median absolute deviation about the median. Robust against the long
    /// tail that inflates `sdev`.
    pub mdev: f64,
    /// Sample variance (n − 1 denominator).
    pub var: f64,
    pub sdev: f64,
    /// Coefficient of variation, `sdev / mean`; 0 for a zero mean.
    pub cov: f64,
    /// Present when mean and variance are both positive.
    pub gamma: Option<GammaFit>,
}

/// One fixed-width histogram bucket covering `[lower, upper)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bucket {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Fixed-width bucket counts. Bucket `k` covers `[k*width, (k+1)*width)`;
/// bucket 0 renders as the underflow row `< width`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bucket_width: f64,
    pub buckets: Vec<Bucket>,
}

impl Histogram {
    /// Total samples across all buckets.
    pub fn n(&self) -> usize {
        self.buckets.iter().map(|b| b.count).sum()
    }
}

/// Per-app (timestamp, duration) sequence extracted from a probe log.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub app: String,
    pub points: Vec<(DateTime<Utc>, f64)>,
}

/// A skipped log line: its 1-based line number and what was wrong with it.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDiagnostic {
    pub line: usize,
    pub detail: String,
}

impl std::fmt::Display for LogDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.detail)
    }
}

fn validate_samples(samples: &[f64]) -> Result<(), StatsError> {
    for (index, &value) in samples.iter().enumerate() {
        if !value.is_finite() {
            return Err(StatsError::NonFinite { index });
        }
        if value < 0.0 {
            return Err(StatsError::Negative { index, value });
        }
    }
    Ok(())
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Computes the moment summary of a duration set.
///
/// Needs at least two samples (the variance uses the n − 1 denominator).
/// All durations must be finite and nonnegative.
pub fn summarize(samples: &[f64]) -> Result<StatsSummary, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    if samples.len() < 2 {
        return Err(StatsError::TooFew(samples.len()));
    }
    validate_samples(samples)?;

    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sdev = var.sqrt();
    let cov = if mean > 0.0 { sdev / mean } else { 0.0 };

    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = median_of_sorted(&sorted);
    let mut deviations: Vec<f64> = sorted.iter().map(|x| (x - median).abs()).collect();
    deviations.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mdev = median_of_sorted(&deviations);

    Ok(StatsSummary {
        n,
        minm: sorted[0],
        mean,
        maxm: sorted[n - 1],
        mdev,
        var,
        sdev,
        cov,
        gamma: gamma_fit(mean, var).ok(),
    })
}

/// Method-of-moments gamma fit: `shape = mean^2 / var`, `scale = var / mean`.
pub fn gamma_fit(mean: f64, var: f64) -> Result<GammaFit, StatsError> {
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(StatsError::NonPositive {
            what: "mean",
            value: mean,
        });
    }
    if !(var > 0.0 && var.is_finite()) {
        return Err(StatsError::NonPositive {
            what: "variance",
            value: var,
        });
    }
    Ok(GammaFit {
        shape: mean * mean / var,
        scale: var / mean,
    })
}

/// Buckets samples into `[k*width, (k+1)*width)` ranges, lower-inclusive.
/// Every bucket from 0 through the one holding the maximum is present, so
/// empty interior buckets still render as empty rows.
pub fn histogram(samples: &[f64], bucket_width: f64) -> Result<Histogram, StatsError> {
    if !(bucket_width > 0.0 && bucket_width.is_finite()) {
        return Err(StatsError::NonPositive {
            what: "bucket width",
            value: bucket_width,
        });
    }
    validate_samples(samples)?;

    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &value in samples {
        let k = (value / bucket_width).floor() as usize;
        *counts.entry(k).or_default() += 1;
    }
    let top = counts.keys().next_back().copied().unwrap_or(0);
    let buckets = (0..=top)
        .map(|k| Bucket {
            lower: k as f64 * bucket_width,
            upper: (k + 1) as f64 * bucket_width,
            count: counts.get(&k).copied().unwrap_or(0),
        })
        .collect();
    Ok(Histogram {
        bucket_width,
        buckets,
    })
}

/// Bucket row label: `< w` for the underflow bucket, `lo-hi` otherwise,
/// with the upper bound padded to two columns so single digits line up.
fn bucket_label(bucket: &Bucket, width: f64) -> String {
    if bucket.lower == 0.0 {
        format!("< {width}")
    } else {
        format!("{}-{:>2}", bucket.lower, bucket.upper)
    }
}

/// Renders the full vfstat report for one app's samples.
///
/// `summary` and `hist` must describe the same sample set. Stars are one per
/// whole percent of samples (rounded half up), capped at [`STAR_CAP`] with a
/// trailing `>` marker. The gamma line is omitted when no fit exists, and
/// the long-tail flag line is appended whenever COV exceeds 1.
pub fn render_vfstat(
    app: &str,
    source: &str,
    summary: &StatsSummary,
    hist: &Histogram,
) -> Result<String, StatsError> {
    if summary.n != hist.n() {
        return Err(StatsError::Mismatch {
            summary_n: summary.n,
            histogram_n: hist.n(),
        });
    }

    let mut out = String::new();
    writeln!(out, "{} Stats for {} samples in \"{}\"", app, summary.n, source).unwrap();
    writeln!(out, "=====").unwrap();
    writeln!(
        out,
        "Minm: {:6.2}      Mean: {:6.2}      Maxm: {:7.2}      MDev: {:6.2}",
        summary.minm, summary.mean, summary.maxm, summary.mdev
    )
    .unwrap();
    writeln!(
        out,
        "Var: {:8.2}     SDev: {:6.2}      COV: {:7.2}",
        summary.var, summary.sdev, summary.cov
    )
    .unwrap();
    if let Some(gamma) = &summary.gamma {
        writeln!(out, "GamA: {:6.2}     GamB: {:6.2}", gamma.shape, gamma.scale).unwrap();
    }
    writeln!(out, "{VFSTAT_AXIS_HEADER}").unwrap();
    writeln!(out, "{VFSTAT_AXIS_RULE}").unwrap();

    let total = hist.n();
    for bucket in &hist.buckets {
        let percent = if total == 0 {
            0.0
        } else {
            bucket.count as f64 / total as f64 * 100.0
        };
        // Round half up: `f64::round` is half away from zero, and percents
        // are nonnegative here.
        let stars = percent.round() as usize;
        let bar = if stars > STAR_CAP {
            format!("{}>", "*".repeat(STAR_CAP))
        } else {
            "*".repeat(stars)
        };
        let row = format!("{} | {}", bucket_label(bucket, hist.bucket_width), bar);
        writeln!(out, "{}", row.trim_end()).unwrap();
    }

    if summary.cov > 1.0 {
        writeln!(out, "{LONG_TAIL_FLAG}").unwrap();
    }
    Ok(out)
}

/// Parses a probe log leniently: well-formed lines become samples, malformed
/// ones become diagnostics with their line numbers. Blank lines are ignored.
pub fn parse_probe_log(text: &str) -> (Vec<ProbeSample>, Vec<LogDiagnostic>) {
    let mut samples = Vec::new();
    let mut diagnostics = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        match probe::parse_line(line) {
            Ok(sample) => samples.push(sample),
            Err(e) => diagnostics.push(LogDiagnostic {
                line: idx + 1,
                detail: e.to_string(),
            }),
        }
    }
    (samples, diagnostics)
}

/// Splits a probe log into one time series per app, preserving record order.
/// Malformed lines are skipped and reported, not fatal.
pub fn split_series(text: &str) -> (Vec<TimeSeries>, Vec<LogDiagnostic>) {
    let (samples, diagnostics) = parse_probe_log(text);
    let mut order: Vec<String> = Vec::new();
    let mut by_app: BTreeMap<String, Vec<(DateTime<Utc>, f64)>> = BTreeMap::new();
    for sample in samples {
        if !by_app.contains_key(&sample.app) {
            order.push(sample.app.clone());
        }
        by_app
            .entry(sample.app.clone())
            .or_default()
            .push((sample.timestamp, sample.duration));
    }
    let series = order
        .into_iter()
        .map(|app| {
            let points = by_app.remove(&app).unwrap();
            TimeSeries { app, points }
        })
        .collect();
    (series, diagnostics)
}

/// Replaces filename-hostile characters in an app name.
fn sanitize_filename(app: &str) -> String {
    app.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes each series as a two-column plot file `<epoch seconds> <duration>`
/// named `<app>.dat` under `outdir`. Returns the written paths, one per
/// series in input order.
pub fn write_series_files(
    series: &[TimeSeries],
    outdir: &Path,
) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(outdir)?;
    let mut paths = Vec::with_capacity(series.len());
    for ts in series {
        let path = outdir.join(format!("{}.dat", sanitize_filename(&ts.app)));
        let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
        for (stamp, duration) in &ts.points {
            writeln!(file, "{} {}", stamp.timestamp(), duration)?;
        }
        file.flush()?;
        paths.push(path);
    }
    Ok(paths)
}
