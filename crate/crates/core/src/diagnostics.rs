//! End-to-end gradient checks of both training paths against central
//! differences on small, fully deterministic problems.

use std::time::Instant;

use crate::control::{
    control_step, discounted_returns, replay_checkpoints, replay_gradient, replay_loss, select_action, ControlConfig,
    ControlSetup, EpisodeTrace,
};
use crate::env::{EnvConfig, Environment, LanderEnv};
use crate::error::Result;
use crate::math::{compare_at, finite_diff_at, sample_coords, GradComparison};
use crate::model::{CellField, ModelConfig, ModelParams};
use crate::morph::{episode_gradient, episode_loss, initial_field, morph_setup, run_episode_cached, MorphCondition, MorphConfig};
use crate::rng::Rng;
use crate::topology::{build_grid, Topology, Zone, ZoneMap};

pub const MORPH_GRADCHECK_TOLERANCE: f64 = 1e-4;
pub const LANDER_GRADCHECK_TOLERANCE: f64 = 1e-3;
const FD_STEP: f64 = 1e-5;
const REL_FLOOR: f64 = 1e-5;
const COORDS_PER_TENSOR: usize = 12;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub name: String,
    pub comparison: GradComparison,
    pub tolerance: f64,
    pub seconds: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.comparison.max_rel < self.tolerance
    }
}

/// 4x4 grid, `C = 9`, 3 update steps, for a vanilla and a long-range model.
pub fn morph_gradient_check() -> Result<Vec<GradCheckReport>> {
    let mut reports = Vec::new();
    for condition in [MorphCondition::V3, MorphCondition::Lr3] {
        let started = Instant::now();
        let cfg = MorphConfig {
            condition,
            pattern: "toy4".into(),
            steps: 3,
            ..MorphConfig::default()
        };
        let setup = morph_setup(&cfg)?;
        let params = ModelParams::<f64>::xavier(&setup.model, &mut Rng::new(31))?;
        let initial = initial_field::<f64>(&setup, 1.0, &mut Rng::new(32));
        let (outcome, caches) = run_episode_cached(&params, &setup, initial.clone(), cfg.steps)?;
        let grads = episode_gradient(&params, &setup, &outcome, &caches)?;
        let coords = sample_coords(&params, COORDS_PER_TENSOR, &mut Rng::new(33));
        let fd = finite_diff_at(|p| episode_loss(p, &setup, &initial, cfg.steps), &params, FD_STEP, &coords)?;
        reports.push(GradCheckReport {
            name: format!("morph {condition} 4x4 T=3"),
            comparison: compare_at(&grads, &fd, &coords, REL_FLOOR),
            tolerance: MORPH_GRADCHECK_TOLERANCE,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(reports)
}

/// 4x4 lander model whose four action regions all read the same zone.
pub fn single_zone_setup() -> Result<ControlSetup> {
    let grid = build_grid(4, 4, None)?;
    let zones = ZoneMap {
        assignment: vec![Some(Zone::Noop); 16],
    };
    let graph = Topology::moore(grid, 1)?.with_zones(zones).compact()?;
    let all: Vec<usize> = (0..16).collect();
    Ok(ControlSetup {
        model: ModelConfig::lander(),
        graph,
        zones: [all.clone(), all.clone(), all.clone(), all],
    })
}

/// Plays `steps` calm-environment steps and records every stochastic draw so
/// the loss can be replayed as a deterministic function of the parameters.
pub fn frozen_trace(
    setup: &ControlSetup,
    params: &ModelParams<f64>,
    cfg: &ControlConfig,
    steps: usize,
    seed: u64,
) -> Result<EpisodeTrace> {
    let mut env = LanderEnv::new(EnvConfig::calm())?;
    let mut rng = Rng::new(seed);
    let mut obs = env.reset(seed);
    let mut field = CellField::zeros(&setup.model, &setup.graph);
    let mut trace = EpisodeTrace::default();
    for _ in 0..steps {
        let u = trace.previous_action(trace.len());
        let (next, region, _) = control_step(params, setup, &field, &obs, &u, cfg.steps_per_action)?;
        let d = select_action(&region, &mut rng, true, cfg.logit_noise_std);
        let r = env.step(d.action)?;
        trace.observations.push(obs);
        trace.region_logits.push(region);
        trace.noise.push(d.noise);
        trace.actions.push(d.action);
        trace.log_probs.push(d.log_prob);
        trace.entropies.push(d.entropy);
        trace.rewards.push(r.reward);
        obs = r.observation;
        field = next;
        if r.done {
            trace.outcome = Some(r.outcome);
            break;
        }
    }
    Ok(trace)
}

/// REINFORCE loss over 5 environment steps with frozen draws.
pub fn lander_gradient_check() -> Result<GradCheckReport> {
    let started = Instant::now();
    let cfg = ControlConfig::default();
    let setup = single_zone_setup()?;
    let params = ModelParams::<f64>::xavier(&setup.model, &mut Rng::new(41))?;
    let trace = frozen_trace(&setup, &params, &cfg, 5, 42)?;
    let returns = discounted_returns(&trace.rewards, cfg.gamma, cfg.normalize_returns);
    let ckpt = replay_checkpoints(&params, &setup, &trace, cfg.steps_per_action)?;
    let grads = replay_gradient(&params, &setup, &trace, &returns, &ckpt, &cfg)?;
    let coords = sample_coords(&params, COORDS_PER_TENSOR, &mut Rng::new(43));
    let fd = finite_diff_at(|p| replay_loss(p, &setup, &trace, &returns, &cfg), &params, FD_STEP, &coords)?;
    Ok(GradCheckReport {
        name: "lander 4x4 single-zone, 5 env steps".into(),
        comparison: compare_at(&grads, &fd, &coords, REL_FLOOR),
        tolerance: LANDER_GRADCHECK_TOLERANCE,
        seconds: started.elapsed().as_secs_f64(),
    })
}
