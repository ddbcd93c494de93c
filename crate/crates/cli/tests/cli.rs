use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bald(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bald")).args(args).current_dir(cwd).output().unwrap()
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn small_run_config(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("cfg.json");
    write(
        &cfg,
        r#"{"dataset": {"synthetic": {"name": "checkerboard", "n": 80}},
            "kernel": {"lengthscale": 1.0, "signal_variance": 4.0},
            "strategy": ["BALD_closed", "Random"], "seeds": [0, 1, 2], "rounds": 5,
            "output_dir": "results"}"#,
    );
    cfg
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn run_writes_one_log_per_strategy_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_run_config(dir.path());
    let out = bald(&["run", "--config", cfg.to_str().unwrap(), "--jobs", "2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let logs = read_dir_sorted(&dir.path().join("results/logs"));
    assert_eq!(logs.len(), 6);
    assert_eq!(logs[0].0, "bald_closed_seed0.jsonl");
    let text = String::from_utf8(logs[0].1.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(first["round"], 1);
    assert_eq!(first["cumulative_labels"], 3);
    assert!(first.get("wall_ms").is_none());
    let last: serde_json::Value = serde_json::from_str(lines[5]).unwrap();
    assert!(last["summary"]["pool_ceiling_accuracy"].is_number());

    let summary = fs::read_to_string(dir.path().join("results/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    let curve = fs::read_to_string(dir.path().join("results/learning_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 7);
    assert!(curve.starts_with("round,cumulative_labels,bald_closed_mean,bald_closed_sd,random_mean,random_sd"));
}

#[test]
fn reruns_are_byte_identical_regardless_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_run_config(dir.path());
    let c = cfg.to_str().unwrap();
    assert!(bald(&["run", "--config", c, "--jobs", "1", "--out", "a"], dir.path()).status.success());
    assert!(bald(&["run", "--config", c, "--jobs", "4", "--out", "b"], dir.path()).status.success());
    assert_eq!(read_dir_sorted(&dir.path().join("a/logs")), read_dir_sorted(&dir.path().join("b/logs")));
    assert_eq!(
        fs::read(dir.path().join("a/summary.csv")).unwrap(),
        fs::read(dir.path().join("b/summary.csv")).unwrap()
    );
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write(&cfg, r#"{"dataset": {"synthetic": {"name": "checkerboard", "n": 80}}, "rounds": "#);
    let out = bald(&["run", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("o").exists());

    write(&cfg, r#"{"dataset": {"synthetic": {"name": "checkerboard", "n": 80}}, "roundz": 3}"#);
    let out = bald(&["run", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("roundz"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn missing_csv_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, r#"{"dataset": {"csv": {"path": "nope.csv", "label_column": "y", "positive_label": "1"}}}"#);
    let out = bald(&["run", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn csv_dataset_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("a,b,const,class\n");
    for i in 0..60 {
        let x = i as f64 / 10.0;
        let class = if x > 3.0 { "M" } else { "B" };
        text.push_str(&format!("{x},{},7,{class}\n", (i * 13 % 7) as f64));
    }
    write(&dir.path().join("d.csv"), &text);
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        r#"{"dataset": {"csv": {"path": "d.csv", "label_column": "class", "positive_label": "M"}},
            "strategy": "mes", "rounds": 4, "output_dir": "o"}"#,
    );
    let out = bald(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("o/logs/mes_seed0.jsonl").exists());
}

#[test]
fn score_outputs_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, r#"{"kernel": {"lengthscale": 1.0, "signal_variance": 4.0}, "strategy": "bald"}"#);
    let labeled = "x0,x1,label\n0,0,1\n3,3,-1\n";
    write(&dir.path().join("l.csv"), labeled);
    write(&dir.path().join("p.csv"), "x0,x1\n0,0\n3,3\n0,0\n");
    let out = bald(&["score", "--config", "cfg.json", "--labeled", "l.csv", "--pool", "p.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "index,score,chosen");
    assert_eq!(rows.len(), 4);

    write(&cfg, r#"{"strategy": "random"}"#);
    let out = bald(&["score", "--config", "cfg.json", "--labeled", "l.csv", "--pool", "p.csv", "--out", "s.csv"], dir.path());
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| l.ends_with(",1")).count(), 1);

    write(&dir.path().join("empty.csv"), "x0,x1\n");
    let out = bald(&["score", "--config", "cfg.json", "--labeled", "l.csv", "--pool", "empty.csv"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn score_on_labelled_duplicates_is_near_zero() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("cfg.json"), r#"{"kernel": {"lengthscale": 1.0, "signal_variance": 1.0}, "strategy": "bald"}"#);
    let mut labeled = String::from("x0,label\n");
    let mut pool = String::from("x0\n");
    for i in 0..5 {
        let x = i as f64 * 3.0;
        for _ in 0..30 {
            labeled.push_str(&format!("{x},{}\n", if i % 2 == 0 { 1 } else { -1 }));
        }
        pool.push_str(&format!("{x}\n"));
    }
    write(&dir.path().join("l.csv"), &labeled);
    write(&dir.path().join("p.csv"), &pool);
    let out = bald(&["score", "--config", "cfg.json", "--labeled", "l.csv", "--pool", "p.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for line in String::from_utf8(out.stdout).unwrap().lines().skip(1) {
        let score: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(score < 0.05, "{line}");
    }
}

#[test]
fn synth_and_prefgen() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["a.csv", "b.csv"] {
        let out = bald(&["synth", "--name", "checkerboard", "--n", "400", "--seed", "7", "--out", f], dir.path());
        assert!(out.status.success());
    }
    let a = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("b.csv")).unwrap());
    let rows: Vec<&str> = a.lines().skip(1).collect();
    assert_eq!(rows.len(), 400);
    let pos = rows.iter().filter(|r| r.ends_with(",1")).count() as f64 / 400.0;
    assert!((0.45..=0.55).contains(&pos));
    assert_eq!(bald(&["synth", "--name", "spiral", "--n", "400"], dir.path()).status.code(), Some(2));

    write(&dir.path().join("reg.csv"), "f,y\n0.5,3\n1.5,1\n");
    let out = bald(&["prefgen", "--input", "reg.csv", "--n-pairs", "1", "--out", "p.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert_eq!(p.lines().count(), 2);
    assert!(p.starts_with("i,j,u0,v0,label\n"));
    let out = bald(&["prefgen", "--input", "reg.csv", "--n-pairs", "2"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn approx_error_single_point_pool_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir.path().join("cfg.json"),
        r#"{"dataset": {"synthetic": {"name": "block_in_middle", "n": 60}},
            "approx_error": {"trials": 4, "train_points": 10, "pool_size": 1, "gold_samples": 2000}}"#,
    );
    let out = bald(&["approx-error", "--config", "cfg.json", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("o/approx_error.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("ep,4,0,0.000000,0.000000"), "{}", lines[1]);
    assert!(lines[2].starts_with("laplace,4,0,0.000000"), "{}", lines[2]);
}

#[test]
fn help_documents_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["run", "score", "approx-error"] {
        let out = bald(&[cmd, "--help"], dir.path());
        let text = String::from_utf8(out.stdout).unwrap();
        for key in ["dataset", "kernel", "inference", "strategy", "committee_size", "mc_samples", "hyper_samples",
                    "seeds", "rounds", "seed_points", "test_fraction", "eval_every", "timing", "output_dir", "approx_error"] {
            assert!(text.contains(key), "{cmd} --help lacks {key}");
        }
    }
}
