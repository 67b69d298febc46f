//! Acceptance criteria. Each test prints one PASS/FAIL line to stderr
//! (bypassing the harness capture) and then asserts.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use forte_core::controller::{ControllerConfig, Policy};
use forte_core::eval::{replay_sim_run, run_bench, BenchConfig, EvalReport, QuiescentSpec, ReplayConfig};
use forte_core::force::dataset::ExtractConfig;
use forte_core::force::{cross_validate, CvConfig, FeatureSet};
use forte_core::signal::{PipelineConfig, VarianceMode};
use forte_core::sim::{
    calibration_model, find_object, force_trials, object_suite, run_episode, run_scenario, EpisodeConfig, GripperModel,
    Outcome, ScenarioConfig, ScenarioKind,
};
use forte_core::slip::{band_max_db, gated_variance, psd_feature, FeatureHistory, Periodogram};

const PSD_REL_TOL: f64 = 1e-6;
const PSD_WINDOWS: usize = 100;
const PSD_MAX_SECONDS: f64 = 10.0;
const ZERO_FLOOR_DB: f64 = -120.0;
const FUZZ_WINDOWS: usize = 10_000;
const VARIANCE_STEPS: usize = 100_000;
const VARIANCE_TOL: f64 = 1e-9;
const A_RUNS: u64 = 50;
const MAX_LATENCY_MS: f64 = 100.0;
const MIN_RECALL: f64 = 0.9;
const QUIET_SECONDS: f64 = 600.0;
const SLIP_P99_MS: f64 = 2.0;
const PREDICT_P99_MS: f64 = 10.0;
const SUPPORT_VECTORS: usize = 5000;
const INGEST_HZ: f64 = 2000.0;
const CV_FOLDS: usize = 10;
const TRIALS_PER_TAG: usize = 40;
const MAX_FORCE_RMSE_N: f64 = 0.25;
const FORCE_SPAN_N: (f64, f64) = (0.0, 8.0);
const POLICY_SEEDS: u64 = 10;
const MIN_FRAGILE: usize = 5;
const MIN_SLIPPERY: usize = 5;
const LABEL_SETS: usize = 1000;

fn report(criterion: u32, ok: bool, detail: String) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{verdict} criterion {criterion}: {detail}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Textbook periodogram: own Hann window, direct DFT, `1/(fs·Σw²)` scaling.
fn dft_periodogram(x: &[f64], fs: f64) -> Vec<f64> {
    let n = x.len();
    let w: Vec<f64> = (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()).collect();
    let energy: f64 = w.iter().map(|v| v * v).sum();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for j in 0..n {
                // Reduce k·j mod n first so the angle stays accurate.
                let phase = 2.0 * PI * ((k * j) % n) as f64 / n as f64;
                let v = x[j] * w[j];
                re += v * phase.cos();
                im -= v * phase.sin();
            }
            (re * re + im * im) / (fs * energy)
        })
        .collect()
}

#[test]
fn criterion_01_psd_matches_dft_oracle() {
    let cfg = PipelineConfig::default();
    let mut pg = Periodogram::for_config(&cfg).unwrap();
    let mut r = rng(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for w in 0..PSD_WINDOWS {
        let scale = 10f64.powf(r.gen_range(-3.0..1.0));
        let tone = r.gen_range(1.0..60.0);
        let x: Vec<f64> = (0..cfg.fft_window)
            .map(|i| {
                let t = i as f64 / cfg.sample_rate_hz;
                scale * (r.gen_range(-1.0..1.0) + if w % 2 == 0 { (2.0 * PI * tone * t).sin() } else { 0.0 })
            })
            .collect();
        let got = pg.compute(&x).unwrap();
        let want = dft_periodogram(&x, cfg.sample_rate_hz);
        assert_eq!(got.len(), want.len());
        for (g, o) in got.iter().zip(&want) {
            worst = worst.max((g - o).abs() / o.abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst <= PSD_REL_TOL && secs < PSD_MAX_SECONDS;
    report(
        1,
        ok,
        format!("{PSD_WINDOWS} windows, worst relative bin error {worst:.2e} (tol {PSD_REL_TOL:e}), {secs:.2} s"),
    );
    assert!(worst <= PSD_REL_TOL, "worst relative error {worst:e}");
    assert!(secs < PSD_MAX_SECONDS, "took {secs} s");
}

#[test]
fn criterion_02_floor_is_exact_and_features_finite() {
    let cfg = PipelineConfig::default();
    let mut pg = Periodogram::for_config(&cfg).unwrap();
    let n = cfg.fft_window;
    let zero = psd_feature(&pg.compute(&vec![0.0; n]).unwrap(), &cfg);
    let direct = band_max_db(&vec![0.0; pg.num_bins()], cfg.band_bins(), cfg.log_eps);

    let mut r = rng(2);
    let mut bad = 0usize;
    for k in 0..FUZZ_WINDOWS {
        let amp = 10f64.powf(r.gen_range(-12.0..3.0));
        let x: Vec<f64> = match k % 4 {
            0 => (0..n).map(|_| amp * r.gen_range(-1.0..1.0)).collect(),
            1 => {
                let mut v = vec![0.0; n];
                v[r.gen_range(0..n)] = amp;
                v
            }
            2 => vec![amp; n],
            _ => (0..n).map(|i| amp * i as f64 - 0.5 * amp * n as f64).collect(),
        };
        let f = psd_feature(&pg.compute(&x).unwrap(), &cfg);
        if !f.is_finite() {
            bad += 1;
        }
    }
    let ok = zero == ZERO_FLOOR_DB && direct == ZERO_FLOOR_DB && bad == 0;
    report(
        2,
        ok,
        format!("zero window {zero} dB (want {ZERO_FLOOR_DB}), {bad} non-finite of {FUZZ_WINDOWS} fuzzed windows"),
    );
    assert_eq!(zero, ZERO_FLOOR_DB);
    assert_eq!(direct, ZERO_FLOOR_DB);
    assert_eq!(bad, 0);
}

/// Gate and variance recomputed from scratch over the last `cap` values.
fn batch_gated_variance(all: &[f64], cap: usize, delta: f64) -> f64 {
    if all.len() < cap {
        return 0.0;
    }
    let w = &all[all.len() - cap..];
    if !w.windows(2).all(|p| p[1] - p[0] > delta) {
        return 0.0;
    }
    let mean = w.iter().sum::<f64>() / cap as f64;
    w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / cap as f64
}

#[test]
fn criterion_03_streaming_variance_matches_batch() {
    let cfg = PipelineConfig::default();
    let (cap, delta) = (cfg.history_len, cfg.delta_db);
    let mut hist = FeatureHistory::new(cap, delta);
    let mut all = Vec::with_capacity(VARIANCE_STEPS);
    let mut r = rng(3);
    let mut v = -60.0;
    let mut rising = 0usize;
    let (mut worst, mut open): (f64, usize) = (0.0, 0);
    for _ in 0..VARIANCE_STEPS {
        if rising == 0 && r.gen_bool(0.02) {
            rising = r.gen_range(cap - 3..cap + 10);
        }
        if rising > 0 {
            rising -= 1;
            // Mostly above δ, sometimes right at it.
            v += if r.gen_bool(0.95) { delta + r.gen_range(1e-6..1.5) } else { delta };
        } else {
            v += r.gen_range(-3.0..3.0);
        }
        v = v.clamp(-120.0, 40.0);
        hist.push(v);
        all.push(v);
        let got = gated_variance(&hist, VarianceMode::Population);
        let want = batch_gated_variance(&all, cap, delta);
        if want > 0.0 {
            open += 1;
        }
        worst = worst.max((got - want).abs());
    }
    let ok = worst <= VARIANCE_TOL && open > 0;
    report(
        3,
        ok,
        format!("{VARIANCE_STEPS} steps, gate open {open} times, worst abs difference {worst:.2e} (tol {VARIANCE_TOL:e})"),
    );
    assert!(open > 100, "gate opened only {open} times");
    assert!(worst <= VARIANCE_TOL, "worst difference {worst:e}");
}

#[test]
fn criterion_04_scenario_a_latency_recall_quiet_precision() {
    let replay = ReplayConfig::default();
    let quiet = QuiescentSpec::default();
    let runs: Vec<_> = (0..A_RUNS)
        .into_par_iter()
        .map(|seed| {
            let mut cfg = ScenarioConfig::new(ScenarioKind::A, seed);
            cfg.object = find_object(if seed % 2 == 0 { "apple" } else { "jar" }).unwrap();
            let run = run_scenario(&cfg, None).unwrap();
            (seed, replay_sim_run(&run, &replay, &quiet).unwrap())
        })
        .collect();

    let (mut events, mut detected, mut max_latency) = (0usize, 0usize, 0.0f64);
    let mut late = Vec::new();
    let mut noisy = Vec::new();
    for (seed, r) in &runs {
        events += r.matching.events.len();
        detected += r.matching.detected();
        for l in r.matching.latencies_ms() {
            max_latency = max_latency.max(l);
            if l > MAX_LATENCY_MS {
                late.push((*seed, l));
            }
        }
        if r.quiescent_precision() < 1.0 {
            noisy.push((*seed, r.quiescent_detections.clone()));
        }
    }
    let recall = detected as f64 / events as f64;
    let ok = late.is_empty() && recall >= MIN_RECALL && noisy.is_empty();
    report(
        4,
        ok,
        format!(
            "{A_RUNS} runs, recall {recall:.3} ({detected}/{events}, min {MIN_RECALL}), max latency {max_latency:.1} ms \
             (max {MAX_LATENCY_MS}), late {late:?}, quiescent firings {noisy:?}"
        ),
    );
    assert!(events > 0);
    assert!(late.is_empty(), "latency over {MAX_LATENCY_MS} ms: {late:?}");
    assert!(recall >= MIN_RECALL, "recall {recall}");
    assert!(noisy.is_empty(), "quiescent precision below 1: {noisy:?}");
}

#[test]
fn criterion_05_quiet_trace_never_fires() {
    let mut cfg = ScenarioConfig::new(ScenarioKind::Q, 0);
    cfg.duration_s = QUIET_SECONDS;
    let run = run_scenario(&cfg, None).unwrap();
    let r = replay_sim_run(&run, &ReplayConfig::default(), &QuiescentSpec::default()).unwrap();
    let span = run.trace.frames.last().unwrap().t - run.trace.frames[0].t;
    let firings = &r.matching.false_positives;
    let ok = run.onsets.is_empty() && firings.is_empty() && span >= QUIET_SECONDS - 1.0;
    report(
        5,
        ok,
        format!("{span:.1} s quiet trace, {} firings at {firings:?}", firings.len()),
    );
    assert!(run.onsets.is_empty());
    assert!(span >= QUIET_SECONDS - 1.0, "trace spans {span} s");
    assert!(firings.is_empty(), "firings at {firings:?}");
}

#[test]
fn criterion_06_throughput_and_step_budgets() {
    let cfg = BenchConfig {
        n_support_vectors: SUPPORT_VECTORS,
        slip_budget_ms: SLIP_P99_MS,
        predict_budget_ms: PREDICT_P99_MS,
        ..BenchConfig::default()
    };
    let r = run_bench(&cfg).unwrap();
    let expected_steps = r.frames / PipelineConfig::default().hop();
    let ok = r.slip_p99_ms <= SLIP_P99_MS
        && r.predict_p99_ms <= PREDICT_P99_MS
        && r.ingest_hz >= INGEST_HZ
        && r.slip_steps + 1 >= expected_steps / 2;
    report(
        6,
        ok,
        format!(
            "{} frames at {:.0} frames/s (min {INGEST_HZ}), {} slip steps p99 {:.4} ms (max {SLIP_P99_MS}), \
             {} predictions with {SUPPORT_VECTORS} SVs p99 {:.4} ms (max {PREDICT_P99_MS})",
            r.frames, r.ingest_hz, r.slip_steps, r.slip_p99_ms, r.predictions, r.predict_p99_ms
        ),
    );
    assert!(r.ingest_hz >= INGEST_HZ);
    assert!(r.slip_steps > 0 && r.predictions > 0);
    assert!(r.slip_p99_ms <= SLIP_P99_MS);
    assert!(r.predict_p99_ms <= PREDICT_P99_MS);
}

#[test]
fn criterion_07_force_cv_and_temporal_features() {
    let extract = ExtractConfig::default();
    let cv = |trials: &[_], feature_set| {
        cross_validate(
            trials,
            &CvConfig {
                folds: CV_FOLDS,
                seed: 0,
                feature_set,
                ..CvConfig::default()
            },
        )
        .unwrap()
    };

    let b = force_trials(ScenarioKind::B, TRIALS_PER_TAG, 0, &extract).unwrap();
    let labels = b.iter().flat_map(|t| t.samples.iter().map(|s| s.1));
    let (lo, hi) = labels.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, z), y| (a.min(y), z.max(y)));
    let tags: std::collections::BTreeSet<_> = b.iter().map(|t| t.tag.as_str()).collect();
    let b_full = cv(&b, FeatureSet::Full);

    let e = force_trials(ScenarioKind::E, TRIALS_PER_TAG, 0, &extract).unwrap();
    let e_full = cv(&e, FeatureSet::Full);
    let e_cur = cv(&e, FeatureSet::CurrentOnly);

    let span_ok = lo <= FORCE_SPAN_N.0 + 0.1 && hi >= FORCE_SPAN_N.1 - 0.5;
    let ok = b_full.mean_rmse <= MAX_FORCE_RMSE_N && e_full.mean_rmse < e_cur.mean_rmse && span_ok && tags.len() == 6;
    report(
        7,
        ok,
        format!(
            "B: {} trials over {} tags, labels {lo:.2}..{hi:.2} N, mean RMSE {:.4} N (max {MAX_FORCE_RMSE_N}); \
             E: full {:.4} N vs current-only {:.4} N",
            b.len(),
            tags.len(),
            b_full.mean_rmse,
            e_full.mean_rmse,
            e_cur.mean_rmse
        ),
    );
    assert_eq!(tags.len(), 6);
    assert_eq!(b.len(), 6 * TRIALS_PER_TAG);
    assert!(span_ok, "labels span {lo}..{hi}");
    assert!(b_full.mean_rmse <= MAX_FORCE_RMSE_N);
    assert!(e_full.mean_rmse < e_cur.mean_rmse);
}

#[test]
fn criterion_08_policy_ordering() {
    let suite = object_suite();
    let gripper = GripperModel::default();
    let f_init = ControllerConfig::default().preload_n;
    let model = calibration_model(0).unwrap();

    let jobs: Vec<_> = suite
        .iter()
        .flat_map(|o| Policy::ALL.into_iter().flat_map(move |p| (0..POLICY_SEEDS).map(move |s| (o, p, s))))
        .collect();
    let results: Vec<_> = jobs
        .into_par_iter()
        .map(|(o, p, s)| {
            let mut cfg = EpisodeConfig::default();
            cfg.controller.policy = p;
            let r = run_episode(o, s, &model, &cfg).unwrap();
            (o.name.clone(), p, r.outcome)
        })
        .collect();

    let mut success: BTreeMap<&str, usize> = BTreeMap::new();
    let mut by_object: BTreeMap<(String, &str), Vec<Outcome>> = BTreeMap::new();
    for (name, p, out) in &results {
        *success.entry(p.name()).or_default() += (*out == Outcome::Success) as usize;
        by_object.entry((name.clone(), p.name())).or_default().push(*out);
    }
    let total = (suite.len() as u64 * POLICY_SEEDS) as f64;
    let rate = |p: Policy| success.get(p.name()).copied().unwrap_or(0) as f64 / total;

    let crushable: Vec<_> = suite.iter().filter(|o| o.fragility_n < gripper.force_at(0.0, o.width_m)).collect();
    let slippery: Vec<_> = suite.iter().filter(|o| o.required_force_n() > f_init).collect();
    let fragile = suite.iter().filter(|o| o.is_fragile()).count();
    let all_are = |name: &str, p: Policy, want: Outcome| by_object[&(name.to_string(), p.name())].iter().all(|&o| o == want);
    let not_crushed: Vec<_> = crushable
        .iter()
        .filter(|o| !all_are(&o.name, Policy::OnOff, Outcome::Crushed))
        .map(|o| o.name.as_str())
        .collect();
    let not_dropped: Vec<_> = slippery
        .iter()
        .filter(|o| !all_are(&o.name, Policy::WoSlip, Outcome::Dropped))
        .map(|o| o.name.as_str())
        .collect();

    let (forte, on_off, wo_slip) = (rate(Policy::Forte), rate(Policy::OnOff), rate(Policy::WoSlip));
    let ok = forte > on_off.max(wo_slip)
        && not_crushed.is_empty()
        && not_dropped.is_empty()
        && fragile >= MIN_FRAGILE
        && slippery.len() >= MIN_SLIPPERY;
    report(
        8,
        ok,
        format!(
            "{} objects ({fragile} fragile, {} slippery) x {POLICY_SEEDS} seeds: success forte {forte:.3}, \
             on_off {on_off:.3}, wo_slip {wo_slip:.3}; ON_OFF spared {not_crushed:?}, WO_SLIP held {not_dropped:?}",
            suite.len(),
            slippery.len()
        ),
    );
    assert!(fragile >= MIN_FRAGILE && slippery.len() >= MIN_SLIPPERY);
    assert!(!crushable.is_empty());
    assert!(forte > on_off.max(wo_slip));
    assert!(not_crushed.is_empty(), "{not_crushed:?}");
    assert!(not_dropped.is_empty(), "{not_dropped:?}");
}

fn forte(args: &[&str], cwd: &Path) {
    let o = Command::new(env!("CARGO_BIN_EXE_forte"))
        .args(args)
        .current_dir(cwd)
        .env("FORTE_SEED", "3")
        .output()
        .unwrap();
    assert!(o.status.success(), "forte {args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn csv_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "json")) {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Every command run into `dir`. Bench timings are wall-clock, so only
/// its counts are kept.
fn run_all(dir: &Path) {
    forte(&["simulate", "--scenario", "A", "--runs", "2", "--score", "--out", "sim"], dir);
    forte(&["simulate", "--scenario", "C", "--out", "simc"], dir);
    forte(&["train-force", "--trials-per-tag", "3", "-o", "model.json"], dir);
    forte(&["replay", "sim/seed_3/trace.csv", "--model", "model.json", "--out", "replay"], dir);
    forte(&["grasp", "--object", "apple", "--object", "raspberry", "--seeds", "2", "--out", "grasp", "--logs"], dir);
    forte(&["eval-force", "--scenario", "E", "--trials-per-tag", "3", "--folds", "3", "--out", "cv"], dir);
    forte(&["sweep", "--runs", "2", "--out", "sweep"], dir);
    std::fs::write(dir.join("sweep.cfg"), "sweep.threshold_db2 = 1, 2\n").unwrap();
    forte(&["sweep", "sim/seed_3/trace.csv", "--config", "sweep.cfg", "--out", "sweep2"], dir);
    forte(&["bench", "--duration", "1", "--support-vectors", "50", "-o", "bench_full.csv"], dir);
    let full = std::fs::read_to_string(dir.join("bench_full.csv")).unwrap();
    let counts: String = full
        .lines()
        .filter(|l| ["metric,", "frames,", "slip_steps,", "predictions,"].iter().any(|k| l.starts_with(k)))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::remove_file(dir.join("bench_full.csv")).unwrap();
    std::fs::write(dir.join("bench.csv"), counts).unwrap();
}

#[test]
fn criterion_09_outputs_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_all(a.path());
    run_all(b.path());
    let (fa, fb) = (csv_files(a.path()), csv_files(b.path()));
    let names: Vec<_> = fa.keys().collect();
    let differing: Vec<_> = fa.iter().filter(|(k, v)| fb.get(*k) != Some(*v)).map(|(k, _)| k.display().to_string()).collect();
    let ok = differing.is_empty() && fa.len() == fb.len() && fa.len() >= 20;
    report(
        9,
        ok,
        format!("{} output files compared across two runs, differing: {differing:?}", fa.len()),
    );
    assert!(fa.len() >= 20, "only {names:?}");
    assert_eq!(fa.len(), fb.len());
    assert!(differing.is_empty(), "{differing:?}");
}

/// Confusion counts and ratios computed independently of the library.
fn oracle(pairs: &[(bool, bool)]) -> (f64, f64, f64, f64) {
    let count = |g: bool, p: bool| pairs.iter().filter(|&&x| x == (g, p)).count() as f64;
    let (tp, fp, tn, fn_) = (count(true, true), count(false, true), count(false, false), count(true, false));
    let precision = if tp + fp == 0.0 { 1.0 } else { tp / (tp + fp) };
    let recall = if tp + fn_ == 0.0 { 1.0 } else { tp / (tp + fn_) };
    let accuracy = if pairs.is_empty() { 1.0 } else { (tp + tn) / pairs.len() as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    (accuracy, precision, recall, f1)
}

#[test]
fn criterion_10_metric_conventions() {
    let abstain = EvalReport::from_trials(vec![(true, false), (false, false), (true, false)]);
    let mut r = rng(10);
    let mut mismatches = 0usize;
    for _ in 0..LABEL_SETS {
        let n = r.gen_range(0..60);
        let bias = r.gen_range(0.0..1.0);
        let pairs: Vec<(bool, bool)> = (0..n).map(|_| (r.gen_bool(bias), r.gen_bool(1.0 - bias))).collect();
        let rep = EvalReport::from_trials(pairs.clone());
        let (acc, p, rc, f1) = oracle(&pairs);
        let same = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        if !(same(rep.accuracy, acc) && same(rep.precision, p) && same(rep.recall, rc) && same(rep.f1, f1)) {
            mismatches += 1;
        }
    }
    let ok = abstain.precision == 1.0 && mismatches == 0;
    report(
        10,
        ok,
        format!(
            "all-abstention precision {}, {mismatches} of {LABEL_SETS} random label sets disagree with the oracle",
            abstain.precision
        ),
    );
    assert_eq!(abstain.precision, 1.0);
    assert_eq!(mismatches, 0);
}
