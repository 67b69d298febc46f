use std::path::Path;
use std::process::{Command, Output};

fn forte(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forte"))
        .args(args)
        .current_dir(cwd)
        .env_remove("FORTE_SEED")
        .output()
        .expect("run forte")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&forte(&["frobnicate"], dir.path())), 1);
    assert_eq!(code(&forte(&["replay"], dir.path())), 1);
    assert_eq!(code(&forte(&["simulate"], dir.path())), 1, "no scenario anywhere");
    assert_eq!(code(&forte(&["simulate", "--scenario", "Z"], dir.path())), 1);
    assert_eq!(code(&forte(&["grasp", "--object", "anvil"], dir.path())), 1);
    assert_eq!(code(&forte(&["bench", "--config", "missing.cfg"], dir.path())), 1);

    std::fs::write(dir.path().join("typo.cfg"), "pipeline.treshold_db2 = 3\n").unwrap();
    let o = forte(&["bench", "--config", "typo.cfg", "--duration", "1"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("treshold"), "{}", stderr(&o));
}

#[test]
fn help_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let o = forte(&["--help"], dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for c in ["replay", "grasp", "simulate", "train-force", "eval-force", "sweep", "bench"] {
        assert!(text.contains(c), "{c} missing from help");
    }
}

#[test]
fn data_errors_exit_2_and_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&forte(&["replay", "absent.csv"], dir.path())), 2);

    let mut csv = String::from("t,ch0,ch1,ch2,ch3,ch4,ch5\n");
    for i in 0..10 {
        csv += &format!("{},0,0,0,0,0,0\n", i as f64 / 2000.0);
    }
    csv += "0.005,0,0,x,0,0,0\n";
    std::fs::write(dir.path().join("bad.csv"), csv).unwrap();
    let o = forte(&["replay", "bad.csv"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains(":12:"), "{}", stderr(&o));

    std::fs::write(dir.path().join("junk.json"), "{ not json").unwrap();
    let o = forte(&["simulate", "--scenario", "A", "--out", "a"], dir.path());
    assert_eq!(code(&o), 0);
    let o = forte(&["replay", "a/trace.csv", "--model", "junk.json"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn thresholds_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&forte(&["simulate", "--scenario", "A", "--out", "a"], p)), 0);

    let ok = forte(&["replay", "a/trace.csv", "--out", "r", "--max-latency-ms", "100"], p);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    let strict = forte(&["replay", "a/trace.csv", "--out", "r", "--max-latency-ms", "1"], p);
    assert_eq!(code(&strict), 3);
    assert!(stderr(&strict).contains("latency"));

    let bench = forte(&["bench", "--duration", "1", "--support-vectors", "20"], p);
    assert_eq!(code(&bench), 0, "{}", stderr(&bench));
    std::fs::write(p.join("tight.cfg"), "bench.slip_budget_ms = 0\n").unwrap();
    let tight = forte(&["bench", "--config", "tight.cfg", "--duration", "1", "--support-vectors", "20"], p);
    assert_eq!(code(&tight), 3);
}

#[test]
fn missing_ground_truth_omits_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let mut csv = String::from("t,ch0,ch1,ch2,ch3,ch4,ch5\n");
    for i in 0..3000 {
        csv += &format!("{},0.1,0.1,0.1,0.2,0.2,0.2\n", i as f64 / 2000.0);
    }
    std::fs::write(p.join("plain.csv"), csv).unwrap();
    let o = forte(&["replay", "plain.csv", "--out", "r"], p);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(p.join("r/timeline.csv").exists());
    assert!(p.join("r/events.csv").exists());
    assert!(!p.join("r/report.csv").exists());
    // Asking for a score without ground truth is a data problem.
    assert_eq!(code(&forte(&["replay", "plain.csv", "--out", "r", "--min-recall", "0.5"], p)), 2);
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = Command::new(env!("CARGO_BIN_EXE_forte"))
        .args(["simulate", "--scenario", "A", "--out", "s"])
        .current_dir(p)
        .env("FORTE_SEED", "17")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let run = std::fs::read_to_string(p.join("s/run.csv")).unwrap();
    assert!(run.lines().nth(1).unwrap().starts_with("A,17,"), "{run}");

    // A seed in the scenario file wins over the default.
    std::fs::write(p.join("a.cfg"), "scenario = A\nseed = 5\nobject = jar\n").unwrap();
    let o = forte(&["simulate", "--config", "a.cfg", "--out", "c", "--seed", "9"], p);
    assert_eq!(code(&o), 0);
    let run = std::fs::read_to_string(p.join("c/run.csv")).unwrap();
    assert!(run.lines().nth(1).unwrap().starts_with("A,5,jar,"), "{run}");

    let o = Command::new(env!("CARGO_BIN_EXE_forte"))
        .args(["bench", "--duration", "1"])
        .current_dir(p)
        .env("FORTE_SEED", "seven")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn simulate_then_replay_scores_against_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = forte(&["simulate", "--scenario", "A", "--runs", "2", "--score", "--out", "s"], p);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["seed_0/trace.csv", "seed_1/ground_truth.csv", "seed_1/onsets.csv", "seed_0/events.csv", "score.csv"] {
        assert!(p.join("s").join(f).exists(), "{f}");
    }
    let o = forte(&["replay", "s/seed_1/trace.csv", "--out", "r"], p);
    assert_eq!(code(&o), 0);
    let report = std::fs::read_to_string(p.join("r/report.csv")).unwrap();
    assert!(report.starts_with("metric,value\naccuracy,"), "{report}");
    let head = std::fs::read_to_string(p.join("r/timeline.csv")).unwrap();
    assert!(head.starts_with("t,sigma_bar_R,sigma_bar_L,pmax_0,"));
}
