use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use brainca::record::RunRecord;
use brainca::topology::{parse_topology, write_topology};

fn brainca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brainca"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn records(dir: &Path) -> Vec<RunRecord> {
    brainca::harness::load_records(&dir.join("runs.jsonl"))
        .unwrap()
        .into_iter()
        .map(|r| r.without_timing())
        .collect()
}

const TINY_MORPH: [&str; 8] = ["--pattern", "toy4", "--max-episodes", "8", "--steps", "4", "--seeds", "1..2"];

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&brainca(&[])), 1);
    assert_eq!(code(&brainca(&["morpho"])), 1);
    assert_eq!(code(&brainca(&["morpho", "--out", out, "--condition", "v9"])), 1);
    assert_eq!(code(&brainca(&["morpho", "--out", out, "--seeds", "9..3"])), 1);
    assert_eq!(code(&brainca(&["morpho", "--out", out, "--steps", "many"])), 1);
    assert_eq!(code(&brainca(&["lander", "--out", out, "--condition", "upside-down"])), 1);
    assert_eq!(code(&brainca(&["topo", "--kind", "ring", "--out", out])), 1);
    assert_eq!(code(&brainca(&["analyze", "--in", out, "--out", out])), 1);
    assert_eq!(code(&brainca(&["--help"])), 0);
}

#[test]
fn config_file_keys_are_checked() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "pattern = toy4\nno_such_key = 1\n").unwrap();
    let out = dir.path().join("out");
    let o = brainca(&["morpho", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_key"));

    fs::write(&cfg, "# tiny run\npattern = toy4\nmax_episodes = 3\nsteps = 2\n").unwrap();
    let o = brainca(&[
        "morpho",
        "--config",
        cfg.to_str().unwrap(),
        "--max-episodes",
        "4",
        "--condition",
        "v3",
        "--seeds",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = records(&out);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].max_episodes, 4);
    assert_eq!(r[0].config["steps"], 2);
}

#[test]
fn morpho_runs_are_reproducible_across_processes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "2")] {
        let mut args = vec!["morpho", "--condition", "all", "--threads", threads, "--out", out.to_str().unwrap()];
        args.extend(TINY_MORPH);
        let o = brainca(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ra = records(&a);
    assert_eq!(ra.len(), 8);
    assert_eq!(ra, records(&b));
    for r in &ra {
        let name = format!("checkpoints/{}_{}.ckpt", r.condition, r.seed);
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name}");
    }

    let report = dir.path().join("report");
    let o = brainca(&["analyze", "--in", a.to_str().unwrap(), "--tau", "8", "--permutations", "199", "--out", report.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["summary.csv", "summary.txt", "pairwise.csv", "distributions.csv"] {
        assert!(report.join(f).exists(), "{f}");
    }
    let pairwise = fs::read_to_string(report.join("pairwise.csv")).unwrap();
    assert_eq!(pairwise.lines().count(), 1 + 12);
}

#[test]
fn morpho_resumes_without_rerunning() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    let mut args = vec!["morpho", "--condition", "v3", "--out", out.to_str().unwrap()];
    args.extend(TINY_MORPH);
    assert_eq!(code(&brainca(&args)), 0);
    let first = fs::read_to_string(out.join("runs.jsonl")).unwrap();
    let o = brainca(&args);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).is_empty());
    assert_eq!(fs::read_to_string(out.join("runs.jsonl")).unwrap(), first);
}

#[test]
fn lander_writes_records_curves_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("l");
    let o = brainca(&[
        "lander",
        "--condition",
        "tshape-lr",
        "--runs",
        "1",
        "--block",
        "4",
        "--max-episodes",
        "2",
        "--eval-interval",
        "1",
        "--calibration-episodes",
        "3",
        "--max-steps",
        "10",
        "--wind-power",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = records(&out);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].condition, "tshape-lr");
    assert!(r[0].best_eval_reward.is_some());
    assert!(r[0].metadata.contains_key("success_threshold"));
    assert_eq!(r[0].config["env"]["wind_power"], 0.0);
    let curve = fs::read_to_string(out.join("curves/tshape-lr_42.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("episode,train_reward,eval_reward,loss,entropy_mean"));
    assert_eq!(curve.lines().count(), 3);
    let traj = fs::read_to_string(out.join("trajectories/tshape-lr_42.csv")).unwrap();
    assert!(traj.starts_with("step,obs0,obs1,obs2,obs3,obs4,obs5,obs6,obs7,action,reward,done,outcome\n"));
    assert!(out.join("checkpoints/tshape-lr_42.ckpt").exists());
}

#[test]
fn topo_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["--kind", "moore", "--radius", "2"],
        &["--kind", "scale-free", "--seed", "7"],
        &["--kind", "tshape", "--block", "4"],
        &["--kind", "patch"],
        &["--kind", "patch", "--tshape"],
    ];
    for (k, extra) in cases.iter().enumerate() {
        let path = dir.path().join(format!("t{k}.txt"));
        let mut args = vec!["topo", "--out", path.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = brainca(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(write_topology(&parse_topology(&text).unwrap()), text);
    }
}

#[test]
fn gradcheck_passes() {
    let o = brainca(&["gradcheck"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 3);
}
