use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nocollide"));
    c.env_remove("NOCOLLIDE_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_run(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run", "--k", "3", "--m", "2", "--t", "500", "--p", "0.2,0.5,0.8", "--eps-scale", "0.05", "--seeds", "2",
        "--out",
    ];
    let out = out.display().to_string();
    args.push(&out);
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn help_lists_every_flag() {
    let o = run(&["run", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for flag in [
        "--k", "--m", "--t", "--p", "--mode", "--eps-scale", "--t0-scale", "--seeds", "--master-seed", "--out",
        "--log-nodes", "--config",
    ] {
        assert!(text.contains(flag), "missing {flag} in\n{text}");
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn enumerate_counts_and_lists() {
    let o = run(&["enumerate", "3", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "nodes=13 leaves=9");

    let o = run(&["enumerate", "3", "2", "--list"]);
    let lines: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(lines.len(), 14);
    assert_eq!(lines[1], "[{1,2,3}]");
}

#[test]
fn verify_exit_codes() {
    let o = run(&["verify", "coloring", "--k", "4", "--m", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("\"violations\":0"));
    assert_eq!(run(&["verify", "feas", "--k", "4", "--m", "2"]).status.code(), Some(0));
    assert_eq!(run(&["verify", "bogus"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    let o = run(&["run", "--k", "3", "--m", "2", "--t", "100"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`p`"), "{}", stderr(&o));
    assert_eq!(run(&["run", "--k", "3", "--m", "4", "--t", "10", "--p", "uniform-spread"]).status.code(), Some(2));
    assert_eq!(run(&["run", "--k", "three"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["slice", "--k", "4"]).status.code(), Some(2));
}

#[test]
fn run_writes_per_seed_files_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let o = small_run(dir.path(), &["--master-seed", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in ["run_seed10.csv", "run_seed10.json", "run_seed11.csv", "run_seed11.json", "aggregate.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let csv = std::fs::read_to_string(dir.path().join("run_seed10.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,regret_cum,collisions_cum,depth_p1,depth_p2,arm_p1,arm_p2");
    assert_eq!(csv.lines().count(), 501);
    let agg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["seeds"], serde_json::json!([10, 11]));
    assert_eq!(agg["config"]["k"], 3);
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert_eq!(small_run(d.path(), &["--mode", "bandit", "--t0-scale", "1e-8", "--log-nodes"]).status.code(), Some(0));
    }
    for name in ["run_seed0.csv", "run_seed1.json", "aggregate.json"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, "# small experiment\nk = 4\nm = 2\nt = 300\np = uniform-spread\nseeds = 3\nmode = bandit\n").unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--seeds",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let agg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["config"]["seeds"], 1);
    assert_eq!(agg["config"]["mode"], "bandit");
    assert_eq!(agg["config"]["k"], 4);
}

#[test]
fn out_dir_defaults_to_env() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--k", "3", "--m", "1", "--t", "50", "--p", "uniform-spread"])
        .env("NOCOLLIDE_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("aggregate.json").exists());
}

#[test]
fn sweep_makes_one_directory_per_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "sweep",
        "--k",
        "3",
        "--m",
        "2",
        "--t",
        "100,200",
        "--p",
        "two-group gap=0.2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("T100/aggregate.json").exists());
    assert!(dir.path().join("T200/run_seed0.csv").exists());
    assert!(dir.path().join("sweep.json").exists());
}

#[test]
fn slice_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["slice", "--level", "1.5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("slice.csv")).unwrap();
    assert_eq!(csv.lines().count(), 40_001);
    assert_eq!(csv.lines().next().unwrap(), "x1,x2,x3,label");

    // Row nearest the centre of the slice sits on the root.
    let centre = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let d: f64 = f[..3].iter().map(|v| (v.parse::<f64>().unwrap() - 0.5).abs()).sum();
            (d, f[3..].join(","))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    assert_eq!(centre.1, "[{1,2,3}]");
}
