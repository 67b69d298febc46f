//! Turning `key = value` files into core configuration structs.

use std::path::Path;

use forte_core::eval::{EventConfig, ReplayConfig};
use forte_core::force::dataset::ExtractConfig;
use forte_core::force::SvrParams;
use forte_core::kv::KvFile;
use forte_core::pipeline::BaselineMode;
use forte_core::sim::EpisodeConfig;

use crate::fail::Failure;

/// Load the config file, or an empty one. Problems with the file itself are
/// usage errors.
pub fn load(path: Option<&Path>) -> Result<KvFile, Failure> {
    match path {
        Some(p) => KvFile::load(p).map_err(Failure::usage),
        None => Ok(KvFile::default()),
    }
}

/// Run `f` against the config and reject keys nobody read.
pub fn apply<T>(kv: &KvFile, f: impl FnOnce(&KvFile) -> forte_core::Result<T>) -> Result<T, Failure> {
    let out = f(kv).map_err(Failure::usage)?;
    kv.reject_unused().map_err(Failure::usage)?;
    Ok(out)
}

pub fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("cannot create {}: {e}", dir.display())))
}

pub fn events(kv: &KvFile, cfg: &mut EventConfig) -> forte_core::Result<()> {
    kv.set("events.merge_s", &mut cfg.merge_s)?;
    kv.set("events.window_s", &mut cfg.window_s)?;
    kv.set("events.per_finger", &mut cfg.per_finger)
}

/// `baseline_s = 0` treats the input as already baseline-corrected.
pub fn baseline(kv: &KvFile, mode: &mut BaselineMode) -> forte_core::Result<()> {
    if let Some(s) = kv.get::<f64>("baseline_s")? {
        *mode = if s > 0.0 {
            BaselineMode::Initialization { seconds: s }
        } else {
            BaselineMode::None
        };
    }
    Ok(())
}

pub fn replay(kv: &KvFile) -> forte_core::Result<ReplayConfig> {
    let mut cfg = ReplayConfig::default();
    cfg.pipeline.apply_kv(kv)?;
    baseline(kv, &mut cfg.baseline)?;
    events(kv, &mut cfg.events)?;
    Ok(cfg)
}

pub fn svr(kv: &KvFile) -> forte_core::Result<SvrParams> {
    let mut p = SvrParams::default();
    kv.set("svr.c", &mut p.c)?;
    kv.set("svr.epsilon", &mut p.epsilon)?;
    if let Some(g) = kv.get("svr.gamma")? {
        p.gamma = Some(g);
    }
    kv.set("svr.tolerance", &mut p.tolerance)?;
    if let Some(n) = kv.get("svr.max_iter")? {
        p.max_iter = Some(n);
    }
    Ok(p)
}

pub fn extract(kv: &KvFile) -> forte_core::Result<ExtractConfig> {
    let mut cfg = ExtractConfig::default();
    cfg.pipeline.apply_kv(kv)?;
    kv.set("extract.init_s", &mut cfg.init_s)?;
    kv.set("extract.rate_hz", &mut cfg.rate_hz)?;
    Ok(cfg)
}

pub fn episode(kv: &KvFile) -> forte_core::Result<EpisodeConfig> {
    let mut cfg = EpisodeConfig::default();
    cfg.controller.apply_kv(kv)?;
    cfg.pipeline.apply_kv(kv)?;
    cfg.gripper.apply_kv(kv)?;
    cfg.sensor.apply_kv(kv)?;
    kv.set("episode.success_height_m", &mut cfg.success_height_m)?;
    kv.set("episode.max_duration_s", &mut cfg.max_duration_s)?;
    Ok(cfg)
}
