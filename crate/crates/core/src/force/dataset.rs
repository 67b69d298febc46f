//! Force datasets: a manifest of trials, each a sensor trace with force labels.
//!
//! Manifest CSV columns: `trial_id,tag,trace[,load]`. Paths are relative to
//! the manifest. A trace either carries a `force_n` column, or a separate
//! load-cell CSV (`t,force_n`) is joined on nearest timestamp.

use std::path::{Path, PathBuf};

use super::cv::ForceTrial;
use super::feature::build_feature;
use crate::error::{Error, Result};
use crate::pipeline::{BaselineMode, Pipeline};
use crate::signal::{Baseline, PipelineConfig};
use crate::trace::{read_trace, CsvSink, Trace};

/// Largest sensor/load-cell timestamp difference accepted when joining.
pub const MAX_SKEW_S: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractConfig {
    pub pipeline: PipelineConfig,
    /// Baseline interval at the start of each trial.
    pub init_s: f64,
    /// Feature sampling rate for training.
    pub rate_hz: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            init_s: 1.0,
            rate_hz: 2.0,
        }
    }
}

/// For each sensor timestamp, the load reading nearest in time if within `max_skew`.
/// Both inputs must be sorted by time.
pub fn align_nearest(sensor_t: &[f64], load: &[(f64, f64)], max_skew: f64) -> Vec<Option<f64>> {
    let mut j = 0;
    sensor_t
        .iter()
        .map(|&t| {
            while j + 1 < load.len() && (load[j + 1].0 - t).abs() <= (load[j].0 - t).abs() {
                j += 1;
            }
            load.get(j).filter(|(lt, _)| (lt - t).abs() <= max_skew).map(|&(_, f)| f)
        })
        .collect()
}

/// Run the front end over a labelled trace and sample features at `rate_hz`.
/// Frames without a label are skipped.
pub fn trial_from_trace(
    id: &str,
    tag: &str,
    trace: &Trace,
    labels: &[Option<f64>],
    cfg: &ExtractConfig,
) -> Result<ForceTrial> {
    if labels.len() != trace.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} frames",
            labels.len(),
            trace.len()
        )));
    }
    let every = (cfg.pipeline.sample_rate_hz / cfg.rate_hz).round().max(1.0) as usize;
    let base = Baseline::from_initialization(&trace.frames, cfg.init_s);
    let mut p = Pipeline::new(&cfg.pipeline, BaselineMode::Fixed(base), None)?.without_slip();
    let mut samples = Vec::new();
    for (i, f) in trace.frames.iter().enumerate() {
        p.push(f)?;
        if (i + 1) % every == 0 {
            if let Some(y) = labels[i] {
                samples.push((build_feature(p.ring())?, y));
            }
        }
    }
    Ok(ForceTrial {
        id: id.to_string(),
        tag: tag.to_string(),
        samples,
    })
}

fn read_load(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let num = |i: usize| -> Result<f64> {
            rec.get(i).and_then(|s| s.trim().parse().ok()).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: "expected `t,force_n`".into(),
            })
        };
        out.push((num(0)?, num(1)?));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub trial_id: String,
    pub tag: String,
    pub trace: PathBuf,
    pub load: Option<PathBuf>,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })?;
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header.len() < 3 || header[..3] != ["trial_id", "tag", "trace"] {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "manifest header must be trial_id,tag,trace[,load]".into(),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let load = rec.get(3).map(str::trim).filter(|s| !s.is_empty()).map(|s| dir.join(s));
        out.push(ManifestEntry {
            trial_id: rec[0].trim().to_string(),
            tag: rec[1].trim().to_string(),
            trace: dir.join(rec[2].trim()),
            load,
        });
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let rel = |p: &Path| p.strip_prefix(dir).unwrap_or(p).display().to_string();
    let mut sink = CsvSink::create(path, &["trial_id", "tag", "trace", "load"])?;
    for e in entries {
        sink.line([
            e.trial_id.clone(),
            e.tag.clone(),
            rel(&e.trace),
            e.load.as_deref().map(rel).unwrap_or_default(),
        ])?;
    }
    sink.finish().map(|_| ())
}

/// Load every trial listed in a manifest.
pub fn load_trials(manifest: &Path, cfg: &ExtractConfig) -> Result<Vec<ForceTrial>> {
    let entries = read_manifest(manifest)?;
    if entries.len() < 2 {
        return Err(Error::InsufficientSamples {
            have: entries.len(),
            need: 2,
        });
    }
    entries
        .iter()
        .map(|e| {
            let trace = read_trace(&e.trace)?;
            let labels: Vec<Option<f64>> = match (&e.load, &trace.force_n) {
                (Some(load), _) => {
                    let t: Vec<f64> = trace.frames.iter().map(|f| f.t).collect();
                    align_nearest(&t, &read_load(load)?, MAX_SKEW_S)
                }
                (None, Some(f)) => f.iter().map(|&v| Some(v)).collect(),
                (None, None) => {
                    return Err(Error::Parse {
                        path: e.trace.clone(),
                        line: 1,
                        message: "trace has no force_n column and no load file is given".into(),
                    })
                }
            };
            trial_from_trace(&e.trial_id, &e.tag, &trace, &labels, cfg)
        })
        .collect()
}
