//! Decentralized lander control: zone-wise action read-out, a stochastic
//! four-way policy and REINFORCE training through the unrolled episode.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::env::{heuristic_action, Action, EnvConfig, Environment, LanderEnv, Outcome, TrajectoryRow};
use crate::error::{check_dim, Error, Result};
use crate::math::activation::{log_sum_exp, sigmoid};
use crate::math::{AdamConfig, AdamState, Tensor};
use crate::model::{
    config_digest, digest_hex, nca_step, nca_step_backward, nca_step_cached, CellField, ModelConfig, ModelParams,
    StepGrad,
};
use crate::record::RunRecord;
use crate::rng::{
    derive_seed, Rng, STREAM_CALIBRATION, STREAM_EPISODES, STREAM_EVAL, STREAM_PARAMS, STREAM_POLICY, STREAM_TOPOLOGY,
};
use crate::scalar::Scalar;
use crate::topology::{build_grid, gen_patch_longrange, gen_t_shape, quadrant_zones, CellGraph, Topology, Zone};


/// Guards the region-logit denominator.
pub const REGION_EPS: f64 = 1e-8;
/// Floor on the return standard deviation when normalizing.
pub const RETURN_STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LanderCondition {
    #[serde(rename = "vanilla")]
    Vanilla,
    #[serde(rename = "vanilla-lr")]
    VanillaLr,
    #[serde(rename = "tshape")]
    TShape,
    #[serde(rename = "tshape-lr")]
    TShapeLr,
}

impl LanderCondition {
    pub const ALL: [LanderCondition; 4] = [
        LanderCondition::Vanilla,
        LanderCondition::VanillaLr,
        LanderCondition::TShape,
        LanderCondition::TShapeLr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LanderCondition::Vanilla => "vanilla",
            LanderCondition::VanillaLr => "vanilla-lr",
            LanderCondition::TShape => "tshape",
            LanderCondition::TShapeLr => "tshape-lr",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LanderCondition::Vanilla => "Vanilla",
            LanderCondition::VanillaLr => "Vanilla+LR",
            LanderCondition::TShape => "T-Shape",
            LanderCondition::TShapeLr => "T-Shape+LR",
        }
    }

    pub fn long_range(self) -> bool {
        matches!(self, LanderCondition::VanillaLr | LanderCondition::TShapeLr)
    }

    pub fn t_shape(self) -> bool {
        matches!(self, LanderCondition::TShape | LanderCondition::TShapeLr)
    }
}

impl fmt::Display for LanderCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LanderCondition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown lander condition `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    pub condition: LanderCondition,
    pub seed: u64,
    /// Internal NCA updates per environment step.
    pub steps_per_action: usize,
    pub gamma: f64,
    pub entropy_coef: f64,
    pub logit_noise_std: f64,
    pub normalize_returns: bool,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub grad_clip: f64,
    pub max_episodes: usize,
    /// Evaluation reward that ends training; `None` calibrates it from the
    /// scripted controller.
    pub success_reward: Option<f64>,
    pub calibration_episodes: usize,
    /// Quantile of scripted-controller rewards used as the threshold.
    pub calibration_quantile: f64,
    pub eval_interval: usize,
    /// Environment steps per gradient segment; `None` backpropagates through
    /// the whole episode.
    pub bptt_truncation: Option<usize>,
    /// Side of the square grid for the vanilla conditions.
    pub grid_side: usize,
    /// Side of each T-shape block.
    pub block: usize,
    /// Cross-zone partners per other motor patch.
    pub patch_targets: usize,
    pub attention_hidden: usize,
    pub msg_hidden: usize,
    pub env: EnvConfig,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            condition: LanderCondition::Vanilla,
            seed: 42,
            steps_per_action: 3,
            gamma: 0.99,
            entropy_coef: 0.01,
            logit_noise_std: 0.125,
            normalize_returns: true,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            grad_clip: 1.0,
            max_episodes: 10_000,
            success_reward: None,
            calibration_episodes: 100,
            calibration_quantile: 0.9,
            eval_interval: 50,
            bptt_truncation: None,
            grid_side: 16,
            block: 8,
            patch_targets: 6,
            attention_hidden: 64,
            msg_hidden: 64,
            env: EnvConfig::default(),
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_action == 0 {
            return Err(Error::InvalidArgument("steps_per_action must be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidArgument("gamma must be in (0, 1]".into()));
        }
        if self.max_episodes == 0 || self.eval_interval == 0 {
            return Err(Error::InvalidArgument("max_episodes and eval_interval must be >= 1".into()));
        }
        if self.bptt_truncation == Some(0) {
            return Err(Error::InvalidArgument("bptt_truncation must be >= 1".into()));
        }
        if !(self.logit_noise_std >= 0.0) || !(self.entropy_coef >= 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "logit_noise_std and entropy_coef must be >= 0, learning_rate > 0".into(),
            ));
        }
        if self.success_reward.is_none() && self.calibration_episodes == 0 {
            return Err(Error::InvalidArgument("calibration needs at least one episode".into()));
        }
        if !(0.0..=1.0).contains(&self.calibration_quantile) {
            return Err(Error::InvalidArgument("calibration_quantile must be in [0, 1]".into()));
        }
        self.env.validate()
    }

    pub fn model_config(&self) -> ModelConfig {
        let mut m = ModelConfig::lander();
        m.attention_hidden = self.attention_hidden;
        m.msg_hidden = self.msg_hidden;
        m
    }
}

/// Model shape, wiring and action zones of one run.
#[derive(Debug, Clone)]
pub struct ControlSetup {
    pub model: ModelConfig,
    pub graph: CellGraph,
    /// Compact cell indices of each action zone, indexed by action.
    pub zones: [Vec<usize>; 4],
}

impl ControlSetup {
    pub fn new(model: ModelConfig, graph: CellGraph) -> Result<Self> {
        model.validate()?;
        let zones = graph
            .zone_members()
            .ok_or_else(|| Error::Topology("control graph has no action zones".into()))?;
        if let Some(z) = Zone::ALL.iter().find(|z| zones[z.index()].is_empty()) {
            return Err(Error::Topology(format!("action zone {z} is empty")));
        }
        Ok(Self { model, graph, zones })
    }
}

/// Grid, zones and optional patch wiring for the configured condition.
pub fn control_topology(cfg: &ControlConfig) -> Result<Topology> {
    let (grid, zones) = if cfg.condition.t_shape() {
        gen_t_shape(cfg.block)?
    } else {
        let grid = build_grid(cfg.grid_side, cfg.grid_side, None)?;
        let zones = quadrant_zones(&grid)?;
        (grid, zones)
    };
    let mut topo = Topology::moore(grid.clone(), 1)?;
    if cfg.condition.long_range() {
        let mut rng = Rng::stream(cfg.seed, STREAM_TOPOLOGY);
        topo = topo.with_long_range(gen_patch_longrange(&grid, &zones, cfg.patch_targets, &mut rng)?);
    }
    Ok(topo.with_zones(zones))
}

pub fn control_setup(cfg: &ControlConfig) -> Result<ControlSetup> {
    cfg.validate()?;
    ControlSetup::new(cfg.model_config(), control_topology(cfg)?.compact()?)
}

/// Softmax-weighted mean of the fire logit within each zone.
///
/// `w_i = softmax(noop_i, fire_i)[fire]`,
/// `L_r = sum_i w_i fire_i / (sum_i w_i + 1e-8)`.
pub fn region_logits<T: Scalar>(cell_logits: &Tensor<T>, zones: &[Vec<usize>; 4]) -> Result<[T; 4]> {
    check_dim("cell logits", 2, cell_logits.cols())?;
    let mut out = [T::zero(); 4];
    for (r, members) in zones.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::InvalidArgument(format!("action zone {r} is empty")));
        }
        let (mut num, mut den) = (T::zero(), T::zero());
        for &i in members {
            let l = cell_logits.row(i);
            let w = sigmoid(l[1] - l[0]);
            num += w * l[1];
            den += w;
        }
        out[r] = num / (den + T::of(REGION_EPS));
    }
    Ok(out)
}

/// Gradient of `sum_r d_region[r] L_r` with respect to the cell logits.
pub fn region_logits_backward<T: Scalar>(
    cell_logits: &Tensor<T>,
    zones: &[Vec<usize>; 4],
    d_region: &[T; 4],
) -> Tensor<T> {
    let mut grad = Tensor::zeros(&[cell_logits.rows(), 2]);
    for (r, members) in zones.iter().enumerate() {
        let (mut num, mut den) = (T::zero(), T::zero());
        for &i in members {
            let l = cell_logits.row(i);
            let w = sigmoid(l[1] - l[0]);
            num += w * l[1];
            den += w;
        }
        let den = den + T::of(REGION_EPS);
        let value = num / den;
        for &i in members {
            let l = cell_logits.row(i);
            let w = sigmoid(l[1] - l[0]);
            let dw = (l[1] - value) / den * w * (T::one() - w) * d_region[r];
            let g = grad.row_mut(i);
            g[0] -= dw;
            g[1] += dw + w / den * d_region[r];
        }
    }
    grad
}

/// Outcome of drawing from the four-way policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionDraw {
    pub action: Action,
    /// Logit perturbation that was added (zero in evaluation mode).
    pub noise: [f64; 4],
    /// Policy the action was drawn from.
    pub probs: [f64; 4],
    pub log_prob: f64,
    pub entropy: f64,
}

/// Policy `softmax(L + xi)` and its log-probabilities.
pub fn policy<T: Scalar>(logits: &[T; 4], noise: &[f64; 4]) -> ([T; 4], [T; 4]) {
    let mut z = [T::zero(); 4];
    for k in 0..4 {
        z[k] = logits[k] + T::of(noise[k]);
    }
    let lse = log_sum_exp(&z);
    let mut logp = [T::zero(); 4];
    let mut p = [T::zero(); 4];
    for k in 0..4 {
        logp[k] = z[k] - lse;
        p[k] = logp[k].exp();
    }
    (p, logp)
}

pub fn policy_entropy<T: Scalar>(probs: &[T; 4], log_probs: &[T; 4]) -> T {
    let mut h = T::zero();
    for k in 0..4 {
        if probs[k] > T::zero() {
            h -= probs[k] * log_probs[k];
        }
    }
    h
}

/// Training mode adds `Normal(0, noise_std)` to every logit and samples;
/// evaluation mode takes the argmax of the unperturbed policy.
pub fn select_action(logits: &[f64; 4], rng: &mut Rng, training: bool, noise_std: f64) -> ActionDraw {
    let mut noise = [0.0; 4];
    if training && noise_std > 0.0 {
        for v in &mut noise {
            *v = noise_std * rng.normal();
        }
    }
    let (probs, logp) = policy(logits, &noise);
    let index = if training {
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut pick = 3;
        for (k, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = k;
                break;
            }
        }
        pick
    } else {
        crate::math::activation::argmax(&probs)
    };
    ActionDraw {
        action: Action::ALL[index],
        noise,
        probs,
        log_prob: logp[index],
        entropy: policy_entropy(&probs, &logp),
    }
}

/// `R_t = sum_{k >= t} gamma^(k-t) r_k`, optionally z-scored over the episode.
pub fn discounted_returns(rewards: &[f64], gamma: f64, normalize: bool) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    if normalize && !out.is_empty() {
        let n = out.len() as f64;
        let mean = out.iter().sum::<f64>() / n;
        let var = out.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        let std = var.sqrt().max(RETURN_STD_FLOOR);
        out.iter_mut().for_each(|r| *r = (*r - mean) / std);
    }
    out
}

/// Per-step record of one episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeTrace {
    /// Observation broadcast before each action.
    pub observations: Vec<Vec<f64>>,
    pub region_logits: Vec<[f64; 4]>,
    pub noise: Vec<[f64; 4]>,
    pub actions: Vec<Action>,
    pub log_probs: Vec<f64>,
    pub entropies: Vec<f64>,
    pub rewards: Vec<f64>,
    pub outcome: Option<Outcome>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn entropy_mean(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.entropies.iter().sum::<f64>() / self.len() as f64
        }
    }

    /// One-hot previous action fed at step `t`; NOOP before the first action.
    pub fn previous_action(&self, t: usize) -> [f64; 4] {
        if t == 0 {
            Action::Noop.one_hot()
        } else {
            self.actions[t - 1].one_hot()
        }
    }
}

/// `-sum_t log pi(a_t) R_t - beta sum_t H(pi_t)`.
pub fn reinforce_loss(trace: &EpisodeTrace, returns: &[f64], beta: f64) -> Result<f64> {
    check_dim("returns", trace.len(), returns.len())?;
    let pg: f64 = trace.log_probs.iter().zip(returns).map(|(lp, r)| lp * r).sum();
    let h: f64 = trace.entropies.iter().sum();
    Ok(-pg - beta * h)
}

/// Gradient of one step's loss term with respect to the region logits.
fn loss_logit_grad<T: Scalar>(logits: &[T; 4], noise: &[f64; 4], action: Action, ret: f64, beta: f64) -> [T; 4] {
    let (p, logp) = policy(logits, noise);
    let h = policy_entropy(&p, &logp);
    let mut g = [T::zero(); 4];
    for k in 0..4 {
        let onehot = if k == action.index() { T::one() } else { T::zero() };
        g[k] = -T::of(ret) * (onehot - p[k]) + T::of(beta) * p[k] * (logp[k] + h);
    }
    g
}

/// `n_steps` updates with the same observation and previous action, then the
/// zone read-out of the last step's per-cell logits.
pub fn control_step<T: Scalar>(
    params: &ModelParams<T>,
    setup: &ControlSetup,
    field: &CellField<T>,
    obs: &[T],
    u_prev: &[T],
    n_steps: usize,
) -> Result<(CellField<T>, [T; 4], Tensor<T>)> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be >= 1".into()));
    }
    let mut field = field.clone();
    let mut logits = None;
    for _ in 0..n_steps {
        let out = nca_step(params, &setup.model, &field, &setup.graph, Some(obs), Some(u_prev))?;
        field = out.field;
        logits = out.logits;
    }
    let logits = logits.ok_or_else(|| Error::InvalidArgument("control step needs the projection profile".into()))?;
    let region = region_logits(&logits, &setup.zones)?;
    Ok((field, region, logits))
}

fn cast_vec<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::of(x)).collect()
}

/// Fields entering every environment step of a recorded episode, replayed
/// with the recorded observations and actions.
pub fn replay_checkpoints<T: Scalar>(
    params: &ModelParams<T>,
    setup: &ControlSetup,
    trace: &EpisodeTrace,
    n_steps: usize,
) -> Result<Vec<CellField<T>>> {
    let mut field = CellField::zeros(&setup.model, &setup.graph);
    let mut out = Vec::with_capacity(trace.len());
    for t in 0..trace.len() {
        out.push(field.clone());
        let obs = cast_vec::<T>(&trace.observations[t]);
        let u = cast_vec::<T>(&trace.previous_action(t));
        field = control_step(params, setup, &field, &obs, &u, n_steps)?.0;
    }
    Ok(out)
}

/// REINFORCE loss of a recorded episode with its draws (noise, actions)
/// frozen, as a function of the parameters.
pub fn replay_loss<T: Scalar>(
    params: &ModelParams<T>,
    setup: &ControlSetup,
    trace: &EpisodeTrace,
    returns: &[f64],
    cfg: &ControlConfig,
) -> Result<T> {
    check_dim("returns", trace.len(), returns.len())?;
    let mut field = CellField::zeros(&setup.model, &setup.graph);
    let mut loss = T::zero();
    for t in 0..trace.len() {
        let obs = cast_vec::<T>(&trace.observations[t]);
        let u = cast_vec::<T>(&trace.previous_action(t));
        let (next, region, _) = control_step(params, setup, &field, &obs, &u, cfg.steps_per_action)?;
        let (p, logp) = policy(&region, &trace.noise[t]);
        loss -= logp[trace.actions[t].index()] * T::of(returns[t]);
        loss -= T::of(cfg.entropy_coef) * policy_entropy(&p, &logp);
        field = next;
    }
    Ok(loss)
}

/// Backpropagation through the unrolled episode. Each environment step is
/// recomputed from its checkpoint, so memory holds one step's caches at a time.
pub fn replay_gradient<T: Scalar>(
    params: &ModelParams<T>,
    setup: &ControlSetup,
    trace: &EpisodeTrace,
    returns: &[f64],
    checkpoints: &[CellField<T>],
    cfg: &ControlConfig,
) -> Result<ModelParams<T>> {
    check_dim("returns", trace.len(), returns.len())?;
    check_dim("checkpoints", trace.len(), checkpoints.len())?;
    let n = setup.graph.len();
    let mut grads = params.zeros_like();
    let mut carry = StepGrad::zeros(&setup.model, n);
    for t in (0..trace.len()).rev() {
        if let Some(k) = cfg.bptt_truncation {
            if (t + 1) % k == 0 {
                carry = StepGrad::zeros(&setup.model, n);
            }
        }
        let obs = cast_vec::<T>(&trace.observations[t]);
        let u = cast_vec::<T>(&trace.previous_action(t));
        let mut field = checkpoints[t].clone();
        let mut caches = Vec::with_capacity(cfg.steps_per_action);
        let mut logits = None;
        for _ in 0..cfg.steps_per_action {
            let (out, cache) = nca_step_cached(params, &setup.model, &field, &setup.graph, Some(&obs), Some(&u))?;
            caches.push(cache);
            field = out.field;
            logits = out.logits;
        }
        let logits = logits.ok_or_else(|| Error::InvalidArgument("control step needs the projection profile".into()))?;
        let region = region_logits(&logits, &setup.zones)?;
        let d_region = loss_logit_grad(&region, &trace.noise[t], trace.actions[t], returns[t], cfg.entropy_coef);
        carry.logits = Some(region_logits_backward(&logits, &setup.zones, &d_region));
        for cache in caches.iter().rev() {
            carry = nca_step_backward(params, &setup.model, cache, &carry, &mut grads)?;
        }
    }
    Ok(grads)
}

/// Plays one episode with the NCA policy. Returns the trace and the field
/// entering each environment step.
pub fn play_episode(
    params: &ModelParams<f64>,
    setup: &ControlSetup,
    env: &mut LanderEnv,
    episode_seed: u64,
    rng: &mut Rng,
    training: bool,
    cfg: &ControlConfig,
) -> Result<(EpisodeTrace, Vec<CellField<f64>>)> {
    let mut obs = env.reset(episode_seed);
    let mut field = CellField::zeros(&setup.model, &setup.graph);
    let mut trace = EpisodeTrace::default();
    let mut checkpoints = Vec::new();
    loop {
        let u = trace.previous_action(trace.len());
        if training {
            checkpoints.push(field.clone());
        }
        let (next, region, _) = control_step(params, setup, &field, &obs, &u, cfg.steps_per_action)?;
        let draw = select_action(&region, rng, training, cfg.logit_noise_std);
        let step = env.step(draw.action)?;
        trace.observations.push(obs);
        trace.region_logits.push(region);
        trace.noise.push(draw.noise);
        trace.actions.push(draw.action);
        trace.log_probs.push(draw.log_prob);
        trace.entropies.push(draw.entropy);
        trace.rewards.push(step.reward);
        field = next;
        obs = step.observation;
        if step.done {
            trace.outcome = Some(step.outcome);
            return Ok((trace, checkpoints));
        }
    }
}

/// Trajectory rows of a recorded episode.
pub fn trajectory_rows(trace: &EpisodeTrace) -> Vec<TrajectoryRow> {
    let last = trace.len().saturating_sub(1);
    (0..trace.len())
        .map(|t| TrajectoryRow {
            step: t,
            observation: trace.observations[t].clone(),
            action: trace.actions[t],
            reward: trace.rewards[t],
            done: t == last,
            outcome: if t == last {
                trace.outcome.unwrap_or(Outcome::Flying)
            } else {
                Outcome::Flying
            },
        })
        .collect()
}

/// Linear-interpolation quantile of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("quantile of no values".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

fn calibration_seed(seed: u64, k: usize) -> u64 {
    derive_seed(derive_seed(seed, STREAM_CALIBRATION), k as u64)
}

/// Episode rewards of the scripted controller on `episodes` seeded episodes.
pub fn scripted_rewards(env_cfg: &EnvConfig, episodes: usize, seed: u64) -> Result<Vec<f64>> {
    let mut env = LanderEnv::new(env_cfg.clone())?;
    (0..episodes)
        .map(|k| {
            let mut obs = env.reset(calibration_seed(seed, k));
            let mut total = 0.0;
            loop {
                let r = env.step(heuristic_action(&obs))?;
                total += r.reward;
                obs = r.observation;
                if r.done {
                    return Ok(total);
                }
            }
        })
        .collect()
}

/// Episode rewards of the uniform random policy.
pub fn random_policy_rewards(env_cfg: &EnvConfig, episodes: usize, seed: u64) -> Result<Vec<f64>> {
    let mut env = LanderEnv::new(env_cfg.clone())?;
    let mut rng = Rng::stream(seed, STREAM_POLICY);
    (0..episodes)
        .map(|k| {
            env.reset(calibration_seed(seed, k));
            let mut total = 0.0;
            loop {
                let r = env.step(Action::ALL[rng.below(4) as usize])?;
                total += r.reward;
                if r.done {
                    return Ok(total);
                }
            }
        })
        .collect()
}

/// Success threshold: the configured reward, or the calibration quantile of
/// scripted-controller rewards.
pub fn success_threshold(cfg: &ControlConfig) -> Result<(f64, &'static str)> {
    match cfg.success_reward {
        Some(r) => Ok((r, "configured")),
        None => {
            let rewards = scripted_rewards(&cfg.env, cfg.calibration_episodes, cfg.seed)?;
            Ok((quantile(&rewards, cfg.calibration_quantile)?, "scripted-controller quantile"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanderEpisodeStats {
    pub episode: usize,
    pub train_reward: f64,
    pub eval_reward: Option<f64>,
    pub loss: f64,
    pub entropy_mean: f64,
}

/// CSV with columns `episode, train_reward, eval_reward, loss, entropy_mean`;
/// `eval_reward` is empty for episodes without evaluation.
pub fn write_curve_csv<W: Write>(mut w: W, rows: &[LanderEpisodeStats]) -> Result<()> {
    writeln!(w, "episode,train_reward,eval_reward,loss,entropy_mean")?;
    for r in rows {
        let eval = r.eval_reward.map(|v| v.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{},{}", r.episode, r.train_reward, eval, r.loss, r.entropy_mean)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct LanderOutcome {
    pub record: RunRecord,
    pub params: ModelParams<f64>,
    /// Trace of the best evaluation episode, if any evaluation ran.
    pub best_eval_trace: Option<EpisodeTrace>,
}

pub fn train_lander(cfg: &ControlConfig) -> Result<LanderOutcome> {
    train_lander_with(cfg, |_| {})
}

/// Trains one run; `observe` sees every episode's statistics.
pub fn train_lander_with<F: FnMut(LanderEpisodeStats)>(cfg: &ControlConfig, mut observe: F) -> Result<LanderOutcome> {
    let started = Instant::now();
    let setup = control_setup(cfg)?;
    let (threshold, threshold_source) = success_threshold(cfg)?;
    let mut params = ModelParams::<f64>::xavier(&setup.model, &mut Rng::stream(cfg.seed, STREAM_PARAMS))?;
    let mut adam = AdamState::new(
        AdamConfig {
            learning_rate: cfg.learning_rate,
            weight_decay: cfg.weight_decay,
            grad_clip_norm: cfg.grad_clip,
            ..AdamConfig::default()
        },
        &params,
    );
    let mut env = LanderEnv::new(cfg.env.clone())?;
    let mut episode_seeds = Rng::stream(cfg.seed, STREAM_EPISODES);
    let mut eval_seeds = Rng::stream(cfg.seed, STREAM_EVAL);
    let mut policy_rng = Rng::stream(cfg.seed, STREAM_POLICY);
    let mut eval_rng = Rng::new(0);

    let mut success_at = None;
    let mut best_eval: Option<f64> = None;
    let mut best_eval_trace = None;
    let mut episodes_run = 0;
    let mut diagnostic = None;
    for episode in 1..=cfg.max_episodes {
        episodes_run = episode;
        let seed = episode_seeds.next_u64();
        let (trace, checkpoints) = play_episode(&params, &setup, &mut env, seed, &mut policy_rng, true, cfg)?;
        let returns = discounted_returns(&trace.rewards, cfg.gamma, cfg.normalize_returns);
        let loss = reinforce_loss(&trace, &returns, cfg.entropy_coef)?;
        if !loss.is_finite() {
            diagnostic = Some(format!("non-finite loss at episode {episode}"));
            break;
        }
        let grads = replay_gradient(&params, &setup, &trace, &returns, &checkpoints, cfg)?;
        drop(checkpoints);
        if let Err(e) = adam.step(&mut params, &grads) {
            diagnostic = Some(format!("episode {episode}: {e}"));
            break;
        }

        let mut eval_reward = None;
        if episode % cfg.eval_interval == 0 {
            let (eval, _) = play_episode(
                &params,
                &setup,
                &mut env,
                eval_seeds.next_u64(),
                &mut eval_rng,
                false,
                cfg,
            )?;
            let r = eval.total_reward();
            eval_reward = Some(r);
            if best_eval.map_or(true, |b| r > b) {
                best_eval = Some(r);
                best_eval_trace = Some(eval);
            }
        }
        observe(LanderEpisodeStats {
            episode,
            train_reward: trace.total_reward(),
            eval_reward,
            loss,
            entropy_mean: trace.entropy_mean(),
        });
        if eval_reward.is_some_and(|r| r >= threshold) {
            success_at = Some(episode);
            break;
        }
    }

    let digest = config_digest(cfg)?;
    let mut metadata = BTreeMap::new();
    metadata.insert("success_threshold".into(), threshold.into());
    metadata.insert("threshold_source".into(), threshold_source.into());
    metadata.insert("condition_label".into(), cfg.condition.label().into());
    metadata.insert("cells".into(), setup.graph.len().into());
    metadata.insert(
        "long_range_edges".into(),
        setup.graph.long_range.iter().map(Vec::len).sum::<usize>().into(),
    );
    let record = RunRecord {
        task: "lander".into(),
        condition: cfg.condition.as_str().into(),
        seed: cfg.seed,
        success: success_at.is_some(),
        episodes_to_success: success_at.unwrap_or(cfg.max_episodes),
        episodes_run,
        max_episodes: cfg.max_episodes,
        final_accuracy: None,
        best_eval_reward: best_eval,
        wall_time_secs: started.elapsed().as_secs_f64(),
        config_digest: digest_hex(&digest),
        diagnostic,
        metadata,
        config: serde_json::to_value(cfg)?,
    };
    Ok(LanderOutcome {
        record,
        params,
        best_eval_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{compare_at, finite_diff_at, sample_coords};
    use crate::topology::ZoneMap;

    fn single_zone_zones(n: usize) -> [Vec<usize>; 4] {
        [(0..n).collect(), (0..n).collect(), (0..n).collect(), (0..n).collect()]
    }

    #[test]
    fn region_logits_constant_cells() {
        let t = Tensor::<f64>::from_vec(&[3, 2], vec![0.4, -1.2, 0.4, -1.2, 0.4, -1.2]).unwrap();
        let zones = [vec![0], vec![1], vec![2], vec![0, 1, 2]];
        let l = region_logits(&t, &zones).unwrap();
        for v in l {
            assert!((v - -1.2).abs() < 1e-7, "{v}");
        }
    }

    #[test]
    fn region_logits_two_cell_zone() {
        // w1 = sigmoid(1), w2 = sigmoid(-1); L = (w1 - w2) / (w1 + w2 + 1e-8).
        let t = Tensor::<f64>::from_vec(&[2, 2], vec![0.0, 1.0, 0.0, -1.0]).unwrap();
        let zones = [vec![0, 1], vec![0], vec![1], vec![0, 1]];
        let l = region_logits(&t, &zones).unwrap();
        let w1 = 0.731_058_578_630_004_9;
        let w2 = 0.268_941_421_369_995_1;
        assert!((l[0] - (w1 - w2) / (w1 + w2 + 1e-8)).abs() < 1e-15);
        let zero = Tensor::from_vec(&[2, 2], vec![3.0, 0.0, -2.0, 0.0]).unwrap();
        assert_eq!(region_logits(&zero, &zones).unwrap(), [0.0; 4]);
    }

    #[test]
    fn region_logits_empty_zone_is_error() {
        let t = Tensor::<f64>::zeros(&[2, 2]);
        assert!(region_logits(&t, &[vec![0], vec![], vec![1], vec![0]]).is_err());
    }

    #[test]
    fn region_logits_permutation_invariant() {
        let t = Tensor::<f64>::from_vec(&[4, 2], vec![0.1, 0.5, -0.3, 0.9, 1.2, -0.4, 0.0, 2.0]).unwrap();
        let a = region_logits(&t, &[vec![0, 1, 2, 3], vec![0], vec![1], vec![2]]).unwrap();
        let b = region_logits(&t, &[vec![3, 1, 0, 2], vec![0], vec![1], vec![2]]).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-15);
    }

    #[test]
    fn region_backward_matches_finite_differences() {
        let t = Tensor::<f64>::from_vec(&[4, 2], vec![0.1, 0.5, -0.3, 0.9, 1.2, -0.4, 0.0, 2.0]).unwrap();
        let zones = [vec![0, 1], vec![2], vec![1, 2, 3], vec![3]];
        let d = [0.7, -1.1, 0.4, 2.0];
        let g = region_logits_backward(&t, &zones, &d);
        for k in 0..8 {
            let mut up = t.clone();
            let mut dn = t.clone();
            up.data_mut()[k] += 1e-6;
            dn.data_mut()[k] -= 1e-6;
            let f = |x: &Tensor<f64>| {
                let l = region_logits(x, &zones).unwrap();
                (0..4).map(|r| l[r] * d[r]).sum::<f64>()
            };
            let fd = (f(&up) - f(&dn)) / 2e-6;
            assert!((fd - g.data()[k]).abs() < 1e-8, "{k}: {fd} vs {}", g.data()[k]);
        }
    }

    #[test]
    fn uniform_policy() {
        let d = select_action(&[0.0; 4], &mut Rng::new(1), false, 0.125);
        assert_eq!(d.probs, [0.25; 4]);
        assert!((d.entropy - 4f64.ln()).abs() < 1e-15);
        assert_eq!(d.noise, [0.0; 4]);
        assert_eq!(d.action, Action::Noop);
    }

    #[test]
    fn peaked_policy() {
        let d = select_action(&[50.0, 0.0, 0.0, 0.0], &mut Rng::new(1), false, 0.0);
        assert_eq!(d.action, Action::Noop);
        assert!(d.probs[0] > 1.0 - 1e-15);
    }

    #[test]
    fn sampling_matches_policy() {
        let logits = [0.3, -0.5, 1.1, 0.0];
        let (p, _) = policy(&logits, &[0.0; 4]);
        let mut rng = Rng::new(5);
        let mut counts = [0usize; 4];
        let n = 100_000;
        for _ in 0..n {
            counts[select_action(&logits, &mut rng, true, 0.0).action.index()] += 1;
        }
        for k in 0..4 {
            assert!((counts[k] as f64 / n as f64 - p[k]).abs() < 0.01);
        }
    }

    #[test]
    fn training_noise_enters_policy() {
        let d = select_action(&[0.0; 4], &mut Rng::new(2), true, 0.125);
        assert!(d.noise.iter().any(|&v| v != 0.0));
        let (p, logp) = policy(&[0.0; 4], &d.noise);
        assert_eq!(d.probs, p);
        assert_eq!(d.log_prob, logp[d.action.index()]);
    }

    #[test]
    fn returns() {
        assert_eq!(discounted_returns(&[1.0, 1.0, 1.0], 1.0, false), vec![3.0, 2.0, 1.0]);
        assert_eq!(discounted_returns(&[1.0, 0.0, 0.0], 0.5, false), vec![1.0, 0.0, 0.0]);
        assert_eq!(discounted_returns(&[5.0], 0.99, true), vec![0.0]);
        let z = discounted_returns(&[1.0, -2.0, 0.5, 3.0], 0.9, true);
        let mean: f64 = z.iter().sum::<f64>() / 4.0;
        let var: f64 = z.iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_hand_sum() {
        let trace = EpisodeTrace {
            log_probs: vec![-0.5, -1.25],
            entropies: vec![1.2, 0.8],
            actions: vec![Action::Main, Action::Left],
            ..Default::default()
        };
        // -(-0.5 * 2 + -1.25 * -1) - 0.1 * 2.0 = -0.25 - 0.2
        let l = reinforce_loss(&trace, &[2.0, -1.0], 0.1).unwrap();
        assert!((l - -0.45).abs() < 1e-15);
        assert_eq!(reinforce_loss(&trace, &[0.0, 0.0], 0.0).unwrap(), 0.0);
    }

    fn tiny_setup() -> (ControlSetup, ModelParams<f64>, ControlConfig) {
        let grid = build_grid(4, 4, None).unwrap();
        let zones = ZoneMap {
            assignment: vec![Some(Zone::Noop); 16],
        };
        let graph = Topology::moore(grid, 1).unwrap().with_zones(zones).compact().unwrap();
        let mut model = ModelConfig::lander();
        model.attention_hidden = 4;
        model.msg_hidden = 5;
        let setup = ControlSetup {
            model,
            graph,
            zones: single_zone_zones(16),
        };
        let params = ModelParams::xavier(&setup.model, &mut Rng::new(8)).unwrap();
        (setup, params, ControlConfig::default())
    }

    #[test]
    fn single_zone_graph_rejected_by_constructor() {
        let (setup, _, _) = tiny_setup();
        assert!(ControlSetup::new(setup.model, setup.graph).is_err());
    }

    #[test]
    fn control_step_composes() {
        let (setup, params, _) = tiny_setup();
        let field = CellField::zeros(&setup.model, &setup.graph);
        let obs = [0.1, 1.2, -0.3, -0.2, 0.05, 0.0, 0.0, 0.0];
        let u = Action::Main.one_hot();
        let (one, _, _) = control_step(&params, &setup, &field, &obs, &u, 1).unwrap();
        let direct = nca_step(&params, &setup.model, &field, &setup.graph, Some(&obs), Some(&u)).unwrap();
        assert_eq!(one, direct.field);
        let (three, region, logits) = control_step(&params, &setup, &field, &obs, &u, 3).unwrap();
        let mut manual = field.clone();
        let mut last = None;
        for _ in 0..3 {
            let o = nca_step(&params, &setup.model, &manual, &setup.graph, Some(&obs), Some(&u)).unwrap();
            manual = o.field;
            last = o.logits;
        }
        assert_eq!(three, manual);
        assert_eq!(Some(logits.clone()), last);
        assert_eq!(region, region_logits(&logits, &setup.zones).unwrap());
        assert!(control_step(&params, &setup, &field, &obs, &u, 0).is_err());
    }

    fn frozen_trace(setup: &ControlSetup, params: &ModelParams<f64>, cfg: &ControlConfig, steps: usize) -> EpisodeTrace {
        let mut env = LanderEnv::new(EnvConfig::calm()).unwrap();
        let mut rng = Rng::new(21);
        let mut obs = env.reset(4);
        let mut field = CellField::zeros(&setup.model, &setup.graph);
        let mut trace = EpisodeTrace::default();
        for _ in 0..steps {
            let u = trace.previous_action(trace.len());
            let (next, region, _) = control_step(params, setup, &field, &obs, &u, cfg.steps_per_action).unwrap();
            let d = select_action(&region, &mut rng, true, cfg.logit_noise_std);
            let r = env.step(d.action).unwrap();
            trace.observations.push(obs);
            trace.region_logits.push(region);
            trace.noise.push(d.noise);
            trace.actions.push(d.action);
            trace.log_probs.push(d.log_prob);
            trace.entropies.push(d.entropy);
            trace.rewards.push(r.reward);
            obs = r.observation;
            field = next;
        }
        trace
    }

    #[test]
    fn replay_loss_matches_recorded_loss() {
        let (setup, params, cfg) = tiny_setup();
        let trace = frozen_trace(&setup, &params, &cfg, 4);
        let returns = discounted_returns(&trace.rewards, cfg.gamma, true);
        let recorded = reinforce_loss(&trace, &returns, cfg.entropy_coef).unwrap();
        let replayed = replay_loss(&params, &setup, &trace, &returns, &cfg).unwrap();
        assert!((recorded - replayed).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (setup, params, cfg) = tiny_setup();
        let trace = frozen_trace(&setup, &params, &cfg, 3);
        let returns = discounted_returns(&trace.rewards, cfg.gamma, true);
        let ckpt = replay_checkpoints(&params, &setup, &trace, cfg.steps_per_action).unwrap();
        let grads = replay_gradient(&params, &setup, &trace, &returns, &ckpt, &cfg).unwrap();
        let coords = sample_coords(&params, 6, &mut Rng::new(3));
        let fd = finite_diff_at(|p| replay_loss(p, &setup, &trace, &returns, &cfg), &params, 1e-5, &coords).unwrap();
        let cmp = compare_at(&grads, &fd, &coords, 1e-5);
        assert!(cmp.max_rel < 1e-4, "{cmp:?}");
    }

    #[test]
    fn truncation_cuts_gradient_flow() {
        let (setup, params, mut cfg) = tiny_setup();
        let trace = frozen_trace(&setup, &params, &cfg, 4);
        let returns = discounted_returns(&trace.rewards, cfg.gamma, true);
        let ckpt = replay_checkpoints(&params, &setup, &trace, cfg.steps_per_action).unwrap();
        let full = replay_gradient(&params, &setup, &trace, &returns, &ckpt, &cfg).unwrap();
        cfg.bptt_truncation = Some(1);
        let cut = replay_gradient(&params, &setup, &trace, &returns, &ckpt, &cfg).unwrap();
        assert_ne!(full.gru.w_z, cut.gru.w_z);
        cfg.bptt_truncation = Some(100);
        let long = replay_gradient(&params, &setup, &trace, &returns, &ckpt, &cfg).unwrap();
        assert_eq!(full.gru.w_z, long.gru.w_z);
    }

    #[test]
    fn conditions_build() {
        for c in LanderCondition::ALL {
            let cfg = ControlConfig {
                condition: c,
                ..ControlConfig::default()
            };
            let s = control_setup(&cfg).unwrap();
            assert_eq!(s.graph.len(), 256);
            assert!(s.zones.iter().all(|z| z.len() == 64));
            let edges: usize = s.graph.long_range.iter().map(Vec::len).sum();
            assert_eq!(edges, if c.long_range() { 27 * 12 } else { 0 });
            assert_eq!(c.as_str().parse::<LanderCondition>().unwrap(), c);
        }
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0, 4.0], 0.5).unwrap(), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0], 0.9).unwrap(), 10.0);
        assert!(quantile(&[], 0.5).is_err());
    }

    #[test]
    fn curve_csv() {
        let rows = [
            LanderEpisodeStats {
                episode: 1,
                train_reward: -120.5,
                eval_reward: None,
                loss: 0.25,
                entropy_mean: 1.375,
            },
            LanderEpisodeStats {
                episode: 2,
                train_reward: 3.0,
                eval_reward: Some(10.5),
                loss: -1.0,
                entropy_mean: 1.0,
            },
        ];
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "episode,train_reward,eval_reward,loss,entropy_mean\n1,-120.5,,0.25,1.375\n2,3,10.5,-1,1\n"
        );
    }

    #[test]
    fn calibration_uses_scripted_controller() {
        let cfg = ControlConfig {
            env: EnvConfig::calm(),
            calibration_episodes: 10,
            ..ControlConfig::default()
        };
        let (t, source) = success_threshold(&cfg).unwrap();
        assert_eq!(source, "scripted-controller quantile");
        let r = scripted_rewards(&cfg.env, 10, cfg.seed).unwrap();
        assert_eq!(t, quantile(&r, 0.9).unwrap());
        assert!(t > 200.0);
        let fixed = ControlConfig {
            success_reward: Some(260.0),
            ..cfg
        };
        assert_eq!(success_threshold(&fixed).unwrap(), (260.0, "configured"));
    }

    #[test]
    fn short_training_run_is_deterministic() {
        let cfg = ControlConfig {
            env: EnvConfig {
                max_steps: 20,
                ..EnvConfig::calm()
            },
            max_episodes: 2,
            eval_interval: 1,
            grid_side: 4,
            patch_targets: 1,
            attention_hidden: 4,
            msg_hidden: 6,
            success_reward: Some(1e9),
            condition: LanderCondition::Vanilla,
            ..ControlConfig::default()
        };
        let a = train_lander(&cfg).unwrap();
        let b = train_lander(&cfg).unwrap();
        assert_eq!(a.record.without_timing(), b.record.without_timing());
        assert_eq!(a.params, b.params);
        assert_eq!(a.record.episodes_run, 2);
        assert!(!a.record.success);
        assert!(a.record.best_eval_reward.is_some());
    }
}
