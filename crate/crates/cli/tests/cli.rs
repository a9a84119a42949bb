use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &[&str] = &[
    "--steps",
    "300",
    "--set",
    "warmup=100",
    "--set",
    "eval_interval=100",
    "--set",
    "eval_episodes=1",
    "--set",
    "hidden=8",
    "--set",
    "batch_size=16",
];

fn fac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fac"))
        .args(args)
        .env_remove("FAC_RUN_DIR")
        .output()
        .expect("fac runs")
}

fn train_tiny(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--out", out.to_str().unwrap()];
    args.extend_from_slice(TINY);
    args.extend_from_slice(extra);
    fac(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn train_writes_run_directory_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = train_tiny(out, &["--env", "pendulum", "--buffer", "frugal", "--seed", "4"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["run.jsonl", "buffer.facb", "policy.facp", "config.resolved"] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    assert_eq!(fs::read(a.join("run.jsonl")).unwrap(), fs::read(b.join("run.jsonl")).unwrap());
    assert_eq!(fs::read(a.join("buffer.facb")).unwrap(), fs::read(b.join("buffer.facb")).unwrap());
}

#[test]
fn resolved_config_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = train_tiny(&a, &["--env", "mountaincar", "--buffer", "plain", "--seed", "9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cfg = a.join("config.resolved");
    let o = fac(&["train", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read(a.join("run.jsonl")).unwrap(), fs::read(b.join("run.jsonl")).unwrap());
    assert_eq!(fs::read(cfg).unwrap(), fs::read(b.join("config.resolved")).unwrap());
}

#[test]
fn run_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from-env");
    let mut args = vec!["train"];
    args.extend_from_slice(TINY);
    let o = Command::new(env!("CARGO_BIN_EXE_fac"))
        .args(&args)
        .env("FAC_RUN_DIR", &out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("run.jsonl").is_file());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = fac(&["train", "--env", "nosuch", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nosuch"));

    let o = fac(&["train", "--set", "epsilonn=0.1", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("epsilonn"));

    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "nu = 0.5\nbogus = 1\n").unwrap();
    let o = fac(&["train", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));

    let o = fac(&["train"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = train_tiny(dir.path(), &["--set", "lr_critic=1e300", "--set", "optimizer=sgd"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"));
}

#[test]
fn analyze_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("p0");
    assert_eq!(train_tiny(&run, &["--seed", "1"]).status.code(), Some(0));
    let o = fac(&["analyze", run.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "run_id,env,algo,buffer,seed,cp,buffer_size,reward_mean,reward_std,p");
    assert!(lines[1].starts_with("p0,pendulum,td3,frugal,1,"));
}

fn synthetic_run(dir: &Path, cp: u64, buffer: u64, reward: f64) {
    fs::create_dir_all(dir).unwrap();
    let mut text = String::new();
    for step in (1000..cp).step_by(1000) {
        text += &format!("{{\"step\":{step},\"eval_mean\":{},\"eval_std\":1.0}}\n", reward - 5000.0);
    }
    text += &format!("{{\"step\":{cp},\"eval_mean\":{reward},\"eval_std\":1.0}}\n");
    text += &format!(
        "{{\"step\":{cp},\"final_buf\":{buffer},\"inserted\":{buffer},\"rejected\":0}}\n"
    );
    fs::write(dir.join("run.jsonl"), text).unwrap();
}

#[test]
fn analyze_table_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let (b, c) = (dir.path().join("base"), dir.path().join("cand"));
    synthetic_run(&b, 17600, 20000, -143.97);
    synthetic_run(&c, 17600, 11412, -144.66);
    let o = fac(&["analyze", "--baseline", b.to_str().unwrap(), "--candidate", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("baseline,candidate,delta_cp,delta_buf,delta_reward,p"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..2], ["base", "cand"]);
    let delta_buf: f64 = row[3].parse().unwrap();
    let p: f64 = row[5].parse().unwrap();
    assert_eq!((delta_buf * 100.0).round() / 100.0, 42.94);
    assert!((p - 1.75).abs() <= 0.02, "p = {p}");
}

#[test]
fn analyze_rejects_corrupt_or_missing_logs() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("bad");
    fs::create_dir_all(&run).unwrap();
    fs::write(run.join("run.jsonl"), "{\"step\":1,\"reward\":oops}\n").unwrap();
    assert_eq!(fac(&["analyze", run.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("nothing-here");
    assert_eq!(fac(&["analyze", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let o = fac(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
}

#[test]
fn selftest_catches_perturbed_kernel() {
    let o = fac(&["selftest", "--perturb-kernel", "--filter", "rde"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("FAIL rde_quadrature"));
}

#[test]
fn selftest_filter() {
    let o = fac(&["selftest", "--filter", "entropy"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1);
    assert!(text.contains("entropy_brute_force"));
}

#[test]
fn sweep_runs_every_combination() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "sweep",
        "--buffers",
        "frugal,plain",
        "--seeds",
        "0,1",
        "--jobs",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ];
    args.extend_from_slice(TINY);
    let o = fac(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in ["pendulum-frugal-s0", "pendulum-plain-s0", "pendulum-frugal-s1", "pendulum-plain-s1"] {
        assert!(dir.path().join(name).join("run.jsonl").is_file(), "{name}");
    }
    let cfg = fs::read_to_string(dir.path().join("pendulum-plain-s1/config.resolved")).unwrap();
    assert!(cfg.contains("buffer = plain") && cfg.contains("seed = 1"));
}
