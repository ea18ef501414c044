//! On-disk formats: step distributions and mean-position series as CSV,
//! reports as pretty JSON. All text is UTF-8 with LF line endings.

use std::io::{Read, Write};

use qwalk_core::SiteDistribution;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DISTRIBUTIONS_FILE: &str = "distributions.csv";
pub const MEAN_POSITION_FILE: &str = "mean_position.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FIT_REPORT_FILE: &str = "fit_report.json";
pub const ANALYTICS_FILE: &str = "analytics.json";
pub const NOISE_MODEL_FILE: &str = "noise_model.json";
pub const CALIBRATION_REPORT_FILE: &str = "calibration_report.json";

/// Round to 12 significant digits and print the shortest exact form of the
/// rounded value, so writing a parsed value reproduces the same text.
/// Magnitudes outside `[1e-5, 1e15)` use exponent notation.
pub fn format_value(v: f64) -> String {
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    let mag = rounded.abs();
    if mag != 0.0 && !(1e-5..1e15).contains(&mag) {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DistributionRow {
    step: usize,
    site: i64,
    probability: String,
    stderr: String,
}

pub fn write_distributions<W: Write>(out: W, steps: &[SiteDistribution]) -> Result<(), CliError> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for (t, dist) in steps.iter().enumerate() {
        for (i, &site) in dist.sites.iter().enumerate() {
            writer
                .serialize(DistributionRow {
                    step: t,
                    site,
                    probability: format_value(dist.probabilities[i]),
                    stderr: dist
                        .stderr
                        .as_ref()
                        .map(|e| format_value(e[i]))
                        .unwrap_or_default(),
                })
                .map_err(CliError::data)?;
        }
    }
    writer.flush().map_err(CliError::data)
}

fn parse_number(field: &str, what: &str, line: u64) -> Result<f64, CliError> {
    field
        .parse()
        .map_err(|_| CliError::Data(format!("line {line}: bad {what} {field:?}")))
}

/// Steps must appear in order starting at 0; stderr is either present on
/// every row of a step or on none.
pub fn read_distributions<R: Read>(input: R) -> Result<Vec<SiteDistribution>, CliError> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers().map_err(CliError::data)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["step", "site", "probability", "stderr"] {
        return Err(CliError::Data(format!("unexpected header {headers:?}")));
    }
    let mut steps: Vec<(Vec<i64>, Vec<f64>, Vec<Option<f64>>)> = Vec::new();
    for record in reader.deserialize::<DistributionRow>() {
        let row = record.map_err(CliError::data)?;
        let line = steps.iter().map(|s| s.0.len() as u64).sum::<u64>() + 2;
        if row.step == steps.len() {
            steps.push(Default::default());
        } else if row.step + 1 != steps.len() {
            return Err(CliError::Data(format!(
                "line {line}: step {} out of order",
                row.step
            )));
        }
        let entry = steps.last_mut().expect("pushed above");
        entry.0.push(row.site);
        entry.1.push(parse_number(&row.probability, "probability", line)?);
        entry.2.push(if row.stderr.is_empty() {
            None
        } else {
            Some(parse_number(&row.stderr, "stderr", line)?)
        });
    }
    steps
        .into_iter()
        .enumerate()
        .map(|(t, (sites, probs, errs))| {
            let stderr = if errs.iter().all(Option::is_some) {
                Some(errs.into_iter().flatten().collect())
            } else if errs.iter().all(Option::is_none) {
                None
            } else {
                return Err(CliError::Data(format!("step {t}: stderr missing on some sites")));
            };
            SiteDistribution::new(sites, probs, stderr).map_err(CliError::data)
        })
        .collect()
}

/// One row of `mean_position.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanPoint {
    pub step: usize,
    pub mean: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MeanRow {
    step: usize,
    mean: String,
    stderr: String,
}

pub fn mean_series(steps: &[SiteDistribution]) -> Vec<MeanPoint> {
    steps
        .iter()
        .enumerate()
        .map(|(step, d)| MeanPoint {
            step,
            mean: d.mean(),
            stderr: d.mean_stderr(),
        })
        .collect()
}

pub fn write_mean_series<W: Write>(out: W, points: &[MeanPoint]) -> Result<(), CliError> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for p in points {
        writer
            .serialize(MeanRow {
                step: p.step,
                mean: format_value(p.mean),
                stderr: p.stderr.map(format_value).unwrap_or_default(),
            })
            .map_err(CliError::data)?;
    }
    writer.flush().map_err(CliError::data)
}

pub fn read_mean_series<R: Read>(input: R) -> Result<Vec<MeanPoint>, CliError> {
    let mut reader = csv::Reader::from_reader(input);
    reader
        .deserialize::<MeanRow>()
        .enumerate()
        .map(|(i, record)| {
            let row = record.map_err(CliError::data)?;
            let line = i as u64 + 2;
            Ok(MeanPoint {
                step: row.step,
                mean: parse_number(&row.mean, "mean", line)?,
                stderr: if row.stderr.is_empty() {
                    None
                } else {
                    Some(parse_number(&row.stderr, "stderr", line)?)
                },
            })
        })
        .collect()
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::data)?;
    text.push('\n');
    Ok(text)
}
