use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use brainca::config::{apply_overrides, parse_kv, to_kv};
use brainca::control::{
    control_topology, train_lander_with, trajectory_rows, write_curve_csv, ControlConfig, LanderCondition,
};
use brainca::diagnostics::{lander_gradient_check, morph_gradient_check, GradCheckReport};
use brainca::env::write_trajectory_csv;
use brainca::harness::{emit_report, load_records, run_sweep, summarize, SweepJob};
use brainca::model::{config_digest, write_checkpoint};
use brainca::morph::{train_morph, MorphCondition, MorphConfig};
use brainca::record::RunRecord;
use brainca::rng::{Rng, STREAM_TOPOLOGY};
use brainca::topology::{
    build_grid, gen_scale_free_longrange, gen_t_shape, validate_topology, write_topology, ScaleFreeConfig, Topology,
};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::overrides::Overrides;
use crate::{AnalyzeArgs, Failure, LanderArgs, MorphoArgs, TopoArgs, TopoKind};

const RECORDS_FILE: &str = "runs.jsonl";
const CONDITION_ORDER: [&str; 8] = ["v3", "lr3", "v5", "lr5", "vanilla", "vanilla-lr", "tshape", "tshape-lr"];

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn run_err(msg: impl std::fmt::Display) -> Failure {
    Failure::Run(msg.to_string())
}

pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, Failure> {
    let bad = || usage(format!("invalid seed range `{spec}`, expected A..B"));
    let (a, b) = match spec.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
        None => {
            let s = spec.trim().parse().map_err(|_| bad())?;
            (s, s)
        }
    };
    if a > b {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

fn resolve_config<C: Serialize + DeserializeOwned>(base: C, file: Option<&Path>, keys: &Overrides) -> Result<C, Failure> {
    let mut cfg = base;
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        cfg = apply_overrides(&cfg, &parse_kv(&text)?)?;
    }
    Ok(apply_overrides(&cfg, keys)?)
}

fn threads(requested: Option<usize>) -> usize {
    requested
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1)
}

fn checkpoint_path(out: &Path, condition: &str, seed: u64) -> PathBuf {
    out.join("checkpoints").join(format!("{condition}_{seed}.ckpt"))
}

fn print_tally(records: &[RunRecord]) {
    let mut conditions: Vec<&str> = records.iter().map(|r| r.condition.as_str()).collect();
    conditions.dedup();
    for c in conditions {
        let runs: Vec<&RunRecord> = records.iter().filter(|r| r.condition == c).collect();
        let wins = runs.iter().filter(|r| r.success).count();
        let mean = runs.iter().map(|r| r.episodes_to_success as f64).sum::<f64>() / runs.len() as f64;
        println!("{c}: {wins}/{} succeeded, mean episodes (censored) {mean:.1}", runs.len());
    }
}

pub fn morpho(args: MorphoArgs, keys: &Overrides) -> Result<(), Failure> {
    let conditions: Vec<MorphCondition> = if args.condition == "all" {
        MorphCondition::ALL.to_vec()
    } else {
        vec![args.condition.parse()?]
    };
    let default_seeds = if args.quick { "42..51" } else { "42..61" };
    let seeds = parse_seeds(args.seeds.as_deref().unwrap_or(default_seeds))?;
    let mut base = MorphConfig::default();
    if args.quick {
        base.pattern = "smiley8".into();
    }
    let base = resolve_config(base, args.config.as_deref(), keys)?;
    base.validate()?;
    brainca::morph::morph_setup(&base)?;
    fs::create_dir_all(args.out.join("checkpoints"))?;
    fs::write(args.out.join("config.txt"), to_kv(&base)?)?;

    let jobs: Vec<SweepJob> = conditions
        .iter()
        .flat_map(|c| seeds.iter().map(|&seed| SweepJob { condition: c.as_str().into(), seed }))
        .collect();
    let out = args.out.clone();
    let records = run_sweep(&jobs, &args.out.join(RECORDS_FILE), threads(args.threads), |job| {
        let cfg = MorphConfig {
            condition: job.condition.parse()?,
            seed: job.seed,
            ..base.clone()
        };
        let outcome = train_morph(&cfg)?;
        let file = File::create(checkpoint_path(&out, &job.condition, job.seed))?;
        write_checkpoint(BufWriter::new(file), &outcome.params, config_digest(&cfg)?)?;
        let r = &outcome.record;
        eprintln!(
            "{} seed {}: {} after {} episodes (accuracy {:.4})",
            r.condition,
            r.seed,
            if r.success { "success" } else { "no success" },
            r.episodes_run,
            r.final_accuracy.unwrap_or(0.0)
        );
        Ok(outcome.record)
    })
    .map_err(run_err)?;
    print_tally(&records);
    Ok(())
}

pub fn lander(args: LanderArgs, keys: &Overrides) -> Result<(), Failure> {
    let conditions: Vec<LanderCondition> = if args.condition == "all" {
        LanderCondition::ALL.to_vec()
    } else {
        vec![args.condition.parse()?]
    };
    if args.runs == 0 {
        return Err(usage("--runs must be >= 1"));
    }
    let base = resolve_config(ControlConfig::default(), args.config.as_deref(), keys)?;
    base.validate()?;
    for dir in ["checkpoints", "curves", "trajectories"] {
        fs::create_dir_all(args.out.join(dir))?;
    }
    fs::write(args.out.join("config.txt"), to_kv(&base)?)?;

    let jobs: Vec<SweepJob> = conditions
        .iter()
        .flat_map(|c| {
            (args.first_seed..args.first_seed + args.runs).map(|seed| SweepJob { condition: c.as_str().into(), seed })
        })
        .collect();
    let out = args.out.clone();
    let records = run_sweep(&jobs, &args.out.join(RECORDS_FILE), threads(args.threads), |job| {
        let cfg = ControlConfig {
            condition: job.condition.parse()?,
            seed: job.seed,
            ..base.clone()
        };
        let curve = Mutex::new(Vec::new());
        let outcome = train_lander_with(&cfg, |s| curve.lock().expect("curve lock").push(s))?;
        let stem = format!("{}_{}", job.condition, job.seed);
        write_curve_csv(
            BufWriter::new(File::create(out.join("curves").join(format!("{stem}.csv")))?),
            &curve.into_inner().expect("curve lock"),
        )?;
        if let Some(trace) = &outcome.best_eval_trace {
            let file = File::create(out.join("trajectories").join(format!("{stem}.csv")))?;
            write_trajectory_csv(BufWriter::new(file), &trajectory_rows(trace))?;
        }
        let file = File::create(checkpoint_path(&out, &job.condition, job.seed))?;
        write_checkpoint(BufWriter::new(file), &outcome.params, config_digest(&cfg)?)?;
        let r = &outcome.record;
        eprintln!(
            "{} seed {}: {} after {} episodes (best eval {:.1})",
            r.condition,
            r.seed,
            if r.success { "success" } else { "no success" },
            r.episodes_run,
            r.best_eval_reward.unwrap_or(f64::NAN)
        );
        Ok(outcome.record)
    })
    .map_err(run_err)?;
    print_tally(&records);
    Ok(())
}

pub fn topo(args: TopoArgs) -> Result<(), Failure> {
    let topology = match args.kind {
        TopoKind::Moore => Topology::moore(build_grid(args.rows, args.cols, None)?, args.radius)?,
        TopoKind::ScaleFree => {
            let grid = build_grid(args.rows, args.cols, None)?;
            let mut sf = ScaleFreeConfig::for_cells(grid.active_count(), args.seed);
            if let Some(h) = args.hubs {
                sf.hub_count = h;
            }
            sf.zipf_exponent = args.zipf_exponent;
            sf.max_out_degree = args.max_out_degree;
            let lr = gen_scale_free_longrange(&grid, &sf, &mut Rng::stream(args.seed, STREAM_TOPOLOGY))?;
            Topology::moore(grid, args.radius)?.with_long_range(lr.lists)
        }
        TopoKind::Tshape => {
            let (grid, zones) = gen_t_shape(args.block)?;
            Topology::moore(grid, 1)?.with_zones(zones)
        }
        TopoKind::Patch => {
            if !args.tshape && args.rows != args.cols {
                return Err(usage("patch wiring on quadrants needs a square grid"));
            }
            let cfg = ControlConfig {
                condition: if args.tshape {
                    LanderCondition::TShapeLr
                } else {
                    LanderCondition::VanillaLr
                },
                seed: args.seed,
                grid_side: args.rows,
                block: args.block,
                patch_targets: args.patch_targets,
                ..ControlConfig::default()
            };
            control_topology(&cfg)?
        }
    };
    let violations = validate_topology(&topology);
    if let Some(v) = violations.first() {
        return Err(run_err(format!("generated topology is invalid: {v:?}")));
    }
    if let Some(parent) = args.out.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&args.out, write_topology(&topology))?;
    let lr: usize = topology.long_range.iter().map(Vec::len).sum();
    println!(
        "wrote {} ({} active cells, {} long-range edges)",
        args.out.display(),
        topology.grid.active_count(),
        lr
    );
    Ok(())
}

pub fn analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let path = if args.input.is_dir() {
        args.input.join(RECORDS_FILE)
    } else {
        args.input.clone()
    };
    if !path.exists() {
        return Err(usage(format!("{} not found", path.display())));
    }
    let records = load_records(&path)?;
    if records.is_empty() {
        return Err(usage(format!("{} holds no records", path.display())));
    }
    let tau = match args.tau {
        Some(t) if t > 0.0 => t,
        Some(_) => return Err(usage("--tau must be > 0")),
        None => records.iter().map(|r| r.max_episodes).max().unwrap_or(1) as f64,
    };
    if args.permutations == 0 {
        return Err(usage("--permutations must be >= 1"));
    }
    let report = summarize(&records, tau, args.permutations, &CONDITION_ORDER, args.seed)?;
    emit_report(&report, &args.out)?;
    print!("{}", brainca::harness::report::summary_text(&report));
    Ok(())
}

fn print_check(r: &GradCheckReport) {
    println!(
        "{}: {} max relative error {:.3e} (tolerance {:.0e}, {} coordinates, {:.1}s)",
        if r.passed() { "PASS" } else { "FAIL" },
        r.name,
        r.comparison.max_rel,
        r.tolerance,
        r.comparison.compared,
        r.seconds
    );
}

pub fn gradcheck() -> Result<(), Failure> {
    let mut reports = morph_gradient_check()?;
    reports.push(lander_gradient_check()?);
    reports.iter().for_each(print_check);
    if reports.iter().all(GradCheckReport::passed) {
        Ok(())
    } else {
        Err(run_err("gradient check failed"))
    }
}
