//! Environments for the control task.

mod heuristic;
mod lander;
mod trajectory;

pub use heuristic::heuristic_action;
pub use lander::{EnvConfig, LanderEnv, LanderState, REWARD_BOUND};
pub use trajectory::{write_trajectory_csv, TrajectoryRow};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete thruster command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Noop = 0,
    Left = 1,
    Main = 2,
    Right = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Noop, Action::Left, Action::Main, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("action index {i} out of range")))
    }

    /// LEFT and RIGHT swapped.
    pub fn mirrored(self) -> Self {
        match self {
            Action::Left => Action::Right,
            Action::Right => Action::Left,
            a => a,
        }
    }

    pub fn one_hot(self) -> [f64; 4] {
        let mut u = [0.0; 4];
        u[self.index()] = 1.0;
        u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Flying,
    Landed,
    Crashed,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Flying => "flying",
            Outcome::Landed => "landed",
            Outcome::Crashed => "crashed",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub outcome: Outcome,
}

/// Episodic environment with a flat observation vector and discrete actions.
pub trait Environment {
    fn observation_dim(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// Starts a new episode; the episode is a pure function of `episode_seed`.
    fn reset(&mut self, episode_seed: u64) -> Vec<f64>;
    fn step(&mut self, action: Action) -> Result<StepResult>;
}
