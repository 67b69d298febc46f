use std::path::PathBuf;

use forte_core::eval::{run_bench, BenchConfig};
use forte_core::kv::KvFile;

use super::write_metrics;
use crate::config;
use crate::fail::{Failure, Gate};
use crate::Common;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[command(flatten)]
    pub common: Common,
    /// Seconds of synthetic 2 kHz load.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Support vectors in the synthetic force model.
    #[arg(long)]
    pub support_vectors: Option<usize>,
    /// Feed frames at 2 kHz wall-clock instead of flat out.
    #[arg(long)]
    pub realtime: bool,
    /// Also write the statistics as `metric,value` CSV.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn bench_config(kv: &KvFile) -> forte_core::Result<BenchConfig> {
    let mut cfg = BenchConfig::default();
    kv.set("bench.duration_s", &mut cfg.duration_s)?;
    kv.set("bench.n_support_vectors", &mut cfg.n_support_vectors)?;
    kv.set("bench.slip_budget_ms", &mut cfg.slip_budget_ms)?;
    kv.set("bench.predict_budget_ms", &mut cfg.predict_budget_ms)?;
    Ok(cfg)
}

pub fn run(a: Args, seed: u64) -> Result<(), Failure> {
    let kv = config::load(a.common.config.as_deref())?;
    let mut cfg = config::apply(&kv, bench_config)?;
    if let Some(d) = a.duration {
        cfg.duration_s = d;
    }
    if let Some(n) = a.support_vectors {
        cfg.n_support_vectors = n;
    }
    cfg.seed = seed;
    cfg.realtime = a.realtime;
    let r = run_bench(&cfg)?;

    println!(
        "{} frames in {:.3} s ({:.0} frames/s), {} slip steps, {} predictions",
        r.frames, r.wall_s, r.ingest_hz, r.slip_steps, r.predictions
    );
    println!("slip step  p50 {:.4} ms  p99 {:.4} ms  (budget {} ms)", r.slip_p50_ms, r.slip_p99_ms, r.slip_budget_ms);
    println!(
        "predict    p50 {:.4} ms  p99 {:.4} ms  (budget {} ms, {} SVs)",
        r.predict_p50_ms, r.predict_p99_ms, r.predict_budget_ms, cfg.n_support_vectors
    );
    if let Some(path) = &a.output {
        write_metrics(
            path,
            &[
                ("frames", r.frames.to_string()),
                ("slip_steps", r.slip_steps.to_string()),
                ("predictions", r.predictions.to_string()),
                ("wall_s", r.wall_s.to_string()),
                ("ingest_hz", r.ingest_hz.to_string()),
                ("slip_p50_ms", r.slip_p50_ms.to_string()),
                ("slip_p99_ms", r.slip_p99_ms.to_string()),
                ("predict_p50_ms", r.predict_p50_ms.to_string()),
                ("predict_p99_ms", r.predict_p99_ms.to_string()),
            ],
        )?;
    }

    let mut gate = Gate::default();
    gate.check(r.slip_p99_ms <= r.slip_budget_ms, || {
        format!("slip step p99 {} ms > {} ms", r.slip_p99_ms, r.slip_budget_ms)
    });
    gate.check(r.predict_p99_ms <= r.predict_budget_ms, || {
        format!("predict p99 {} ms > {} ms", r.predict_p99_ms, r.predict_budget_ms)
    });
    if !a.realtime {
        // Batch mode must at least keep up with the sensor.
        gate.check(r.ingest_hz >= 2000.0, || format!("ingest {} frames/s < 2000", r.ingest_hz));
    }
    gate.finish()
}
