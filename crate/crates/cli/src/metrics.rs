//! Metrics CSV reading, writing, aggregation, and curve summarization.
//!
//! Per-seed files carry one row per episode (`episode,return,model_loss,
//! seconds`); the aggregate carries the cross-seed mean and standard
//! deviation per episode (`episode,return_mean,return_std,model_loss,
//! seconds`). The aggregate is always computed from the per-seed files as
//! written, so recomputation from disk reproduces it exactly.

use ata_core::trainer::MetricsRow;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

pub const SEED_HEADER: &str = "episode,return,model_loss,seconds";
pub const AGGREGATE_HEADER: &str = "episode,return_mean,return_std,model_loss,seconds";

#[derive(Debug)]
pub enum MetricsError {
    Io(std::io::Error),
    Format { file: String, message: String },
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::Io(e) => write!(f, "metrics io error: {e}"),
            MetricsError::Format { file, message } => {
                write!(f, "malformed metrics file {file}: {message}")
            }
        }
    }
}

impl std::error::Error for MetricsError {}

impl From<std::io::Error> for MetricsError {
    fn from(e: std::io::Error) -> Self {
        MetricsError::Io(e)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Writes one seed's per-episode metrics.
pub fn write_seed_csv(path: &Path, rows: &[MetricsRow]) -> Result<(), MetricsError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{SEED_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.6},{},{:.3}",
            r.episode,
            r.env_return,
            fmt_opt(r.model_loss),
            r.seconds
        )?;
    }
    Ok(())
}

/// One parsed per-seed row.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedRow {
    pub episode: usize,
    pub env_return: f64,
    pub model_loss: Option<f64>,
    pub seconds: f64,
}

/// One parsed aggregate row.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub episode: usize,
    pub return_mean: f64,
    pub return_std: Option<f64>,
    pub model_loss: Option<f64>,
    pub seconds: f64,
}

fn format_err(path: &Path, message: impl Into<String>) -> MetricsError {
    MetricsError::Format {
        file: path.display().to_string(),
        message: message.into(),
    }
}

fn parse_opt(field: &str) -> Result<Option<f64>, std::num::ParseFloatError> {
    if field.is_empty() {
        Ok(None)
    } else {
        field.parse().map(Some)
    }
}

pub fn read_seed_csv(path: &Path) -> Result<Vec<SeedRow>, MetricsError> {
    let reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| format_err(path, "empty file"))??;
    if header != SEED_HEADER {
        return Err(format_err(path, format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(format_err(path, format!("row {} has {} fields", idx + 2, fields.len())));
        }
        let parse = || -> Result<SeedRow, Box<dyn std::error::Error>> {
            Ok(SeedRow {
                episode: fields[0].parse()?,
                env_return: fields[1].parse()?,
                model_loss: parse_opt(fields[2])?,
                seconds: fields[3].parse()?,
            })
        };
        rows.push(parse().map_err(|e| format_err(path, format!("row {}: {e}", idx + 2)))?);
    }
    Ok(rows)
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>, MetricsError> {
    let reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| format_err(path, "empty file"))??;
    if header != AGGREGATE_HEADER {
        return Err(format_err(path, format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(format_err(path, format!("row {} has {} fields", idx + 2, fields.len())));
        }
        let parse = || -> Result<AggregateRow, Box<dyn std::error::Error>> {
            Ok(AggregateRow {
                episode: fields[0].parse()?,
                return_mean: fields[1].parse()?,
                return_std: parse_opt(fields[2])?,
                model_loss: parse_opt(fields[3])?,
                seconds: fields[4].parse()?,
            })
        };
        rows.push(parse().map_err(|e| format_err(path, format!("row {}: {e}", idx + 2)))?);
    }
    Ok(rows)
}

/// Cross-seed aggregation: per-episode mean and population standard
/// deviation of returns, mean of available model losses, mean seconds.
/// The std column stays empty below two seeds.
pub fn aggregate(per_seed: &[Vec<SeedRow>]) -> Result<Vec<AggregateRow>, MetricsError> {
    let n = per_seed.len();
    assert!(n > 0, "aggregate needs at least one seed");
    let len = per_seed[0].len();
    for rows in per_seed {
        if rows.len() != len {
            return Err(MetricsError::Format {
                file: "<aggregate>".to_string(),
                message: "seeds disagree on episode count".to_string(),
            });
        }
    }
    let mut out = Vec::with_capacity(len);
    for e in 0..len {
        let returns: Vec<f64> = per_seed.iter().map(|rows| rows[e].env_return).collect();
        let mean = returns.iter().sum::<f64>() / n as f64;
        let std = if n >= 2 {
            let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n as f64;
            Some(var.sqrt())
        } else {
            None
        };
        let losses: Vec<f64> = per_seed
            .iter()
            .filter_map(|rows| rows[e].model_loss)
            .collect();
        let loss = if losses.is_empty() {
            None
        } else {
            Some(losses.iter().sum::<f64>() / losses.len() as f64)
        };
        let seconds = per_seed.iter().map(|rows| rows[e].seconds).sum::<f64>() / n as f64;
        out.push(AggregateRow {
            episode: per_seed[0][e].episode,
            return_mean: mean,
            return_std: std,
            model_loss: loss,
            seconds,
        });
    }
    Ok(out)
}

pub fn write_aggregate_csv(path: &Path, rows: &[AggregateRow]) -> Result<(), MetricsError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{AGGREGATE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.6},{},{},{:.3}",
            r.episode,
            r.return_mean,
            fmt_opt(r.return_std),
            fmt_opt(r.model_loss),
            r.seconds
        )?;
    }
    Ok(())
}

/// Learning-curve points: window means every `eval_interval` episodes,
/// smoothed with a trailing moving average over `smooth_window` points.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSummary {
    /// Episode index at the end of each window.
    pub episodes: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Summarizes an aggregate series into plot-ready curve points.
pub fn summarize(
    rows: &[AggregateRow],
    eval_interval: usize,
    smooth_window: usize,
) -> CurveSummary {
    assert!(eval_interval > 0 && smooth_window > 0);
    let mut episodes = Vec::new();
    let mut raw_mean = Vec::new();
    let mut raw_std = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let end = (start + eval_interval).min(rows.len());
        let window = &rows[start..end];
        episodes.push(window.last().unwrap().episode);
        raw_mean.push(window.iter().map(|r| r.return_mean).sum::<f64>() / window.len() as f64);
        raw_std.push(
            window
                .iter()
                .map(|r| r.return_std.unwrap_or(0.0))
                .sum::<f64>()
                / window.len() as f64,
        );
        start = end;
    }
    let smooth = |xs: &[f64]| -> Vec<f64> {
        xs.iter()
            .enumerate()
            .map(|(i, _)| {
                let lo = (i + 1).saturating_sub(smooth_window);
                let window = &xs[lo..=i];
                window.iter().sum::<f64>() / window.len() as f64
            })
            .collect()
    };
    CurveSummary {
        episodes,
        mean: smooth(&raw_mean),
        std: smooth(&raw_std),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed_rows(returns: &[f64]) -> Vec<SeedRow> {
        returns
            .iter()
            .enumerate()
            .map(|(e, &r)| SeedRow {
                episode: e,
                env_return: r,
                model_loss: None,
                seconds: 0.0,
            })
            .collect()
    }

    #[test]
    fn single_seed_aggregate_has_empty_std() {
        let agg = aggregate(&[seed_rows(&[1.0, 2.0])]).unwrap();
        assert_eq!(agg[0].return_mean, 1.0);
        assert_eq!(agg[0].return_std, None);
    }

    #[test]
    fn duplicated_seed_has_zero_std() {
        let rows = seed_rows(&[1.5, 2.5, 0.0]);
        let agg = aggregate(&[rows.clone(), rows]).unwrap();
        for r in agg {
            assert_eq!(r.return_std, Some(0.0));
        }
    }

    #[test]
    fn mean_and_std_hand_case() {
        let agg = aggregate(&[seed_rows(&[1.0]), seed_rows(&[3.0])]).unwrap();
        assert_eq!(agg[0].return_mean, 2.0);
        assert_eq!(agg[0].return_std, Some(1.0));
    }

    #[test]
    fn summarize_windows_and_smooths() {
        let rows: Vec<AggregateRow> = (0..6)
            .map(|e| AggregateRow {
                episode: e,
                return_mean: e as f64,
                return_std: Some(1.0),
                model_loss: None,
                seconds: 0.0,
            })
            .collect();
        let s = summarize(&rows, 2, 2);
        assert_eq!(s.episodes, vec![1, 3, 5]);
        // window means: 0.5, 2.5, 4.5; smoothed (trailing 2): 0.5, 1.5, 3.5
        assert_eq!(s.mean, vec![0.5, 1.5, 3.5]);
    }
}
