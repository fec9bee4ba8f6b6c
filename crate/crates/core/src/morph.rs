//! Supervised pattern formation: cells grow from noise into a target pattern.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::activation::{argmax, log_sum_exp, softmax};
use crate::math::{AdamConfig, AdamState, Tensor};
use crate::model::{
    config_digest, digest_hex, nca_step, nca_step_backward, nca_step_cached, CellField, CompositionMode, ModelConfig,
    ModelParams, StepCache, StepGrad,
};
use crate::record::RunRecord;
use crate::rng::{Rng, STREAM_EPISODES, STREAM_PARAMS, STREAM_TOPOLOGY};
use crate::scalar::Scalar;
use crate::topology::{build_grid, gen_scale_free_longrange, CellGraph, ScaleFreeConfig, Topology};

/// Number of phenotype classes read from the first channels of each cell.
pub const CLASSES: usize = 3;
pub const PATTERN_SYMBOLS: [char; CLASSES] = ['.', '#', 'o'];


const SMILEY16: &str = include_str!("../patterns/smiley16.txt");
const SMILEY8: &str = include_str!("../patterns/smiley8.txt");
const TOY4: &str = include_str!("../patterns/toy4.txt");

/// Per-cell class labels: 0 background, 1 boundary, 2 feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetPattern {
    rows: usize,
    cols: usize,
    labels: Vec<usize>,
}

impl TargetPattern {
    /// Parses lines of `.`, `#`, `o`. Every class must occur.
    pub fn parse(text: &str) -> Result<Self> {
        let mut labels = Vec::new();
        let mut cols = None;
        let mut rows = 0;
        for (k, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let row: Vec<usize> = line
                .chars()
                .map(|ch| {
                    PATTERN_SYMBOLS.iter().position(|&s| s == ch).ok_or(Error::Parse {
                        line: k + 1,
                        msg: format!("unexpected pattern symbol `{ch}`"),
                    })
                })
                .collect::<Result<_>>()?;
            match cols {
                None => cols = Some(row.len()),
                Some(c) if c != row.len() => {
                    return Err(Error::Parse {
                        line: k + 1,
                        msg: format!("row has {} cells, expected {c}", row.len()),
                    })
                }
                _ => {}
            }
            labels.extend(row);
            rows += 1;
        }
        let cols = cols.ok_or(Error::Parse {
            line: 1,
            msg: "empty pattern".into(),
        })?;
        let p = Self { rows, cols, labels };
        if p.class_counts().contains(&0) {
            return Err(Error::InvalidArgument("pattern must contain all three classes".into()));
        }
        Ok(p)
    }

    /// Bundled 16x16 smiley.
    pub fn smiley() -> Self {
        Self::parse(SMILEY16).expect("bundled pattern")
    }

    /// Loads a bundled pattern by name (`smiley16`, `smiley8`, `toy4`) or a file path.
    pub fn load(source: &str) -> Result<Self> {
        match source {
            "smiley16" => Self::parse(SMILEY16),
            "smiley8" => Self::parse(SMILEY8),
            "toy4" => Self::parse(TOY4),
            path => Self::parse(&std::fs::read_to_string(Path::new(path))?),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> [usize; CLASSES] {
        let mut c = [0; CLASSES];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.rows * (self.cols + 1));
        for row in self.labels.chunks(self.cols) {
            s.extend(row.iter().map(|&l| PATTERN_SYMBOLS[l]));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphCondition {
    V3,
    Lr3,
    V5,
    Lr5,
}

impl MorphCondition {
    pub const ALL: [MorphCondition; 4] = [MorphCondition::V3, MorphCondition::Lr3, MorphCondition::V5, MorphCondition::Lr5];

    pub fn radius(self) -> usize {
        match self {
            MorphCondition::V3 | MorphCondition::Lr3 => 1,
            MorphCondition::V5 | MorphCondition::Lr5 => 2,
        }
    }

    pub fn long_range(self) -> bool {
        matches!(self, MorphCondition::Lr3 | MorphCondition::Lr5)
    }

    pub fn composition(self) -> CompositionMode {
        if self.long_range() {
            CompositionMode::LocalPlusLrSum
        } else {
            CompositionMode::LocalOnly
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MorphCondition::V3 => "v3",
            MorphCondition::Lr3 => "lr3",
            MorphCondition::V5 => "v5",
            MorphCondition::Lr5 => "lr5",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MorphCondition::V3 => "3x3 Vanilla",
            MorphCondition::Lr3 => "3x3 Long-Range",
            MorphCondition::V5 => "5x5 Vanilla",
            MorphCondition::Lr5 => "5x5 Long-Range",
        }
    }
}

impl fmt::Display for MorphCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MorphCondition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown morphogenesis condition `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphConfig {
    pub condition: MorphCondition,
    pub seed: u64,
    /// Synchronous update steps per episode.
    pub steps: usize,
    pub success_threshold: f64,
    pub max_episodes: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Variance of the i.i.d. Gaussian initial cell states.
    pub init_variance: f64,
    /// Bundled pattern name or path to a pattern file; fixes the grid size.
    pub pattern: String,
    /// Long-range hubs; `None` uses `max(1, N / 25)`.
    pub hub_count: Option<usize>,
    pub zipf_exponent: f64,
    pub max_out_degree: usize,
    pub attention_hidden: usize,
    pub msg_hidden: usize,
}

impl Default for MorphConfig {
    fn default() -> Self {
        Self {
            condition: MorphCondition::V3,
            seed: 42,
            steps: 35,
            success_threshold: 0.98,
            max_episodes: 5000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            init_variance: 0.1,
            pattern: "smiley16".into(),
            hub_count: None,
            zipf_exponent: 2.0,
            max_out_degree: 6,
            attention_hidden: 64,
            msg_hidden: 64,
        }
    }
}

impl MorphConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.success_threshold > 0.0 && self.success_threshold <= 1.0) {
            return Err(Error::InvalidArgument("success_threshold must be in (0, 1]".into()));
        }
        if self.max_episodes == 0 {
            return Err(Error::InvalidArgument("max_episodes must be >= 1".into()));
        }
        if !(self.init_variance >= 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("init_variance must be >= 0 and learning_rate > 0".into()));
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        let mut m = ModelConfig::morph(self.condition.composition());
        m.attention_hidden = self.attention_hidden;
        m.msg_hidden = self.msg_hidden;
        m
    }
}

/// Everything fixed for one run: model shape, wiring and target.
#[derive(Debug, Clone)]
pub struct MorphSetup {
    pub model: ModelConfig,
    pub graph: CellGraph,
    pub target: TargetPattern,
    pub hub_count: usize,
    pub long_range_edges: usize,
}

/// Builds the condition's topology; long-range wiring is drawn once per run.
pub fn morph_setup(cfg: &MorphConfig) -> Result<MorphSetup> {
    cfg.validate()?;
    let target = TargetPattern::load(&cfg.pattern)?;
    let grid = build_grid(target.rows(), target.cols(), None)?;
    let mut topo = Topology::moore(grid.clone(), cfg.condition.radius())?;
    let mut hub_count = 0;
    if cfg.condition.long_range() {
        let mut sf = ScaleFreeConfig::for_cells(grid.active_count(), cfg.seed);
        if let Some(h) = cfg.hub_count {
            sf.hub_count = h;
        }
        sf.zipf_exponent = cfg.zipf_exponent;
        sf.max_out_degree = cfg.max_out_degree;
        hub_count = sf.hub_count;
        let mut rng = Rng::stream(cfg.seed, STREAM_TOPOLOGY);
        topo = topo.with_long_range(gen_scale_free_longrange(&grid, &sf, &mut rng)?.lists);
    }
    let graph = topo.compact()?.with_window_padding(cfg.condition.radius());
    let long_range_edges = graph.long_range.iter().map(Vec::len).sum();
    Ok(MorphSetup {
        model: cfg.model_config(),
        graph,
        target,
        hub_count,
        long_range_edges,
    })
}

/// `N x C` matrix of i.i.d. `Normal(0, variance)` entries.
pub fn init_cell_states<T: Scalar>(rng: &mut Rng, n: usize, c: usize, variance: f64) -> Tensor<T> {
    let std = variance.sqrt();
    let data = (0..n * c).map(|_| T::of(std * rng.normal())).collect();
    Tensor::from_vec(&[n, c], data).expect("n * c entries")
}

/// Class (argmax, lowest index on ties) and probabilities of the first three channels.
pub fn decode_phenotype<T: Scalar>(c: &[T]) -> (usize, [T; CLASSES]) {
    let p = softmax(&c[..CLASSES]).expect("three visible channels");
    (argmax(&c[..CLASSES]), [p[0], p[1], p[2]])
}

/// Mean cross-entropy of the decoded phenotype against the target.
pub fn morph_loss<T: Scalar>(states: &Tensor<T>, target: &TargetPattern) -> Result<T> {
    check_target(states, target)?;
    let n = states.rows();
    let mut total = T::zero();
    for (i, &label) in target.labels().iter().enumerate() {
        let v = &states.row(i)[..CLASSES];
        total += log_sum_exp(v) - v[label];
    }
    Ok(total / T::of(n as f64))
}

/// `dL/dc` of [`morph_loss`]; non-zero only in the three visible channels.
pub fn morph_loss_grad<T: Scalar>(states: &Tensor<T>, target: &TargetPattern) -> Result<Tensor<T>> {
    check_target(states, target)?;
    let n = states.rows();
    let inv_n = T::one() / T::of(n as f64);
    let mut g = Tensor::zeros(states.shape());
    for (i, &label) in target.labels().iter().enumerate() {
        let p = softmax(&states.row(i)[..CLASSES])?;
        let row = g.row_mut(i);
        for k in 0..CLASSES {
            let y = if k == label { T::one() } else { T::zero() };
            row[k] = (p[k] - y) * inv_n;
        }
    }
    Ok(g)
}

/// Fraction of cells whose decoded class equals the target label.
pub fn morph_accuracy<T: Scalar>(states: &Tensor<T>, target: &TargetPattern) -> Result<f64> {
    check_target(states, target)?;
    let hits = target
        .labels()
        .iter()
        .enumerate()
        .filter(|&(i, &l)| argmax(&states.row(i)[..CLASSES]) == l)
        .count();
    Ok(hits as f64 / target.len() as f64)
}

fn check_target<T: Scalar>(states: &Tensor<T>, target: &TargetPattern) -> Result<()> {
    if states.rows() != target.len() || states.cols() < CLASSES {
        return Err(Error::DimMismatch {
            context: "field vs target pattern",
            expected: target.len(),
            got: states.rows(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome<T> {
    pub field: CellField<T>,
    pub loss: T,
    pub accuracy: f64,
}

/// Fresh random states, zero hidden, `steps` synchronous updates.
pub fn run_episode<T: Scalar>(
    params: &ModelParams<T>,
    setup: &MorphSetup,
    steps: usize,
    init_variance: f64,
    rng: &mut Rng,
) -> Result<EpisodeOutcome<T>> {
    let mut field = initial_field(setup, init_variance, rng);
    for _ in 0..steps {
        field = nca_step(params, &setup.model, &field, &setup.graph, None, None)?.field;
    }
    finish(field, &setup.target)
}

/// Zero field with i.i.d. Gaussian cell states.
pub fn initial_field<T: Scalar>(setup: &MorphSetup, variance: f64, rng: &mut Rng) -> CellField<T> {
    let mut field = CellField::zeros(&setup.model, &setup.graph);
    field.states = init_cell_states(rng, setup.graph.len(), setup.model.state_dim, variance);
    field
}

fn finish<T: Scalar>(field: CellField<T>, target: &TargetPattern) -> Result<EpisodeOutcome<T>> {
    let loss = morph_loss(&field.states, target)?;
    let accuracy = morph_accuracy(&field.states, target)?;
    Ok(EpisodeOutcome { field, loss, accuracy })
}

/// Episode rollout keeping every step's cache for backpropagation.
pub fn run_episode_cached<T: Scalar>(
    params: &ModelParams<T>,
    setup: &MorphSetup,
    initial: CellField<T>,
    steps: usize,
) -> Result<(EpisodeOutcome<T>, Vec<StepCache<T>>)> {
    let mut field = initial;
    let mut caches = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (out, cache) = nca_step_cached(params, &setup.model, &field, &setup.graph, None, None)?;
        caches.push(cache);
        field = out.field;
    }
    Ok((finish(field, &setup.target)?, caches))
}

/// Gradient of the final-step loss with respect to all parameters.
pub fn episode_gradient<T: Scalar>(
    params: &ModelParams<T>,
    setup: &MorphSetup,
    outcome: &EpisodeOutcome<T>,
    caches: &[StepCache<T>],
) -> Result<ModelParams<T>> {
    let mut grads = params.zeros_like();
    let mut grad = StepGrad::zeros(&setup.model, setup.graph.len());
    grad.states = morph_loss_grad(&outcome.field.states, &setup.target)?;
    for cache in caches.iter().rev() {
        grad = nca_step_backward(params, &setup.model, cache, &grad, &mut grads)?;
    }
    Ok(grads)
}

/// Loss of the episode started from `initial`, for finite-difference checks.
pub fn episode_loss<T: Scalar>(params: &ModelParams<T>, setup: &MorphSetup, initial: &CellField<T>, steps: usize) -> Result<T> {
    let mut field = initial.clone();
    for _ in 0..steps {
        field = nca_step(params, &setup.model, &field, &setup.graph, None, None)?.field;
    }
    morph_loss(&field.states, &setup.target)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorphEpisodeStats {
    pub episode: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct MorphOutcome {
    pub record: RunRecord,
    pub params: ModelParams<f64>,
}

pub fn train_morph(cfg: &MorphConfig) -> Result<MorphOutcome> {
    train_morph_with(cfg, |_| {})
}

/// Trains one run; `observe` sees every episode's loss and accuracy.
pub fn train_morph_with<F: FnMut(MorphEpisodeStats)>(cfg: &MorphConfig, mut observe: F) -> Result<MorphOutcome> {
    let started = Instant::now();
    let setup = morph_setup(cfg)?;
    let mut params = ModelParams::<f64>::xavier(&setup.model, &mut Rng::stream(cfg.seed, STREAM_PARAMS))?;
    let mut adam = AdamState::new(
        AdamConfig {
            learning_rate: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            weight_decay: 0.0,
            grad_clip_norm: 0.0,
        },
        &params,
    );
    let mut rng = Rng::stream(cfg.seed, STREAM_EPISODES);
    let mut success_at = None;
    let mut final_accuracy = 0.0;
    let mut episodes_run = 0;
    let mut diagnostic = None;
    for episode in 1..=cfg.max_episodes {
        episodes_run = episode;
        let initial = initial_field(&setup, cfg.init_variance, &mut rng);
        let (outcome, caches) = run_episode_cached(&params, &setup, initial, cfg.steps)?;
        final_accuracy = outcome.accuracy;
        observe(MorphEpisodeStats {
            episode,
            loss: outcome.loss,
            accuracy: outcome.accuracy,
        });
        if !outcome.loss.is_finite() {
            diagnostic = Some(format!("non-finite loss at episode {episode}"));
            break;
        }
        if outcome.accuracy >= cfg.success_threshold {
            success_at = Some(episode);
            break;
        }
        let grads = episode_gradient(&params, &setup, &outcome, &caches)?;
        if let Err(e) = adam.step(&mut params, &grads) {
            diagnostic = Some(format!("episode {episode}: {e}"));
            break;
        }
    }
    let digest = config_digest(cfg)?;
    let mut metadata = BTreeMap::new();
    metadata.insert("grid".into(), format!("{}x{}", setup.target.rows(), setup.target.cols()).into());
    metadata.insert("hub_count".into(), setup.hub_count.into());
    metadata.insert("long_range_edges".into(), setup.long_range_edges.into());
    metadata.insert("condition_label".into(), cfg.condition.label().into());
    let record = RunRecord {
        task: "morpho".into(),
        condition: cfg.condition.as_str().into(),
        seed: cfg.seed,
        success: success_at.is_some(),
        episodes_to_success: success_at.unwrap_or(cfg.max_episodes),
        episodes_run,
        max_episodes: cfg.max_episodes,
        final_accuracy: Some(final_accuracy),
        best_eval_reward: None,
        wall_time_secs: started.elapsed().as_secs_f64(),
        config_digest: digest_hex(&digest),
        diagnostic,
        metadata,
        config: serde_json::to_value(cfg)?,
    };
    Ok(MorphOutcome { record, params })
}
