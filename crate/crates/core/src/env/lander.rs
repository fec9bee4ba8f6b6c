//! Planar lander with legs, three engines, wind and turbulence.
//!
//! World units are metres and seconds with the pad centred at `x = 0` on flat
//! ground `y = 0`; `y` is the height of the body centre. Observations use the
//! scaling of the common lander benchmark so that `(0, 0)` means resting on the
//! pad centre:
//!
//! ```text
//! [x / 10, (y - leg_down) / 6.667, 0.2 vx, 0.1333 vy, theta, 0.4 omega, left, right]
//! ```
//!
//! Each step integrates semi-implicit Euler with `dt`. MAIN accelerates the
//! body along `(-sin theta, cos theta)`. LEFT accelerates along
//! `-(cos theta, sin theta)` and spins the body counter-clockwise; RIGHT is its
//! mirror image. Wind and turbulence follow
//! `tanh(sin(0.02 k) + sin(0.01 pi k))` with seeded phase `k` and act only
//! while no leg touches the ground.
//!
//! Reward per step is the change in the shaping potential
//! `-100 |p| - 100 |v| - 100 |theta| + 10 left + 10 right` (observation units)
//! minus `0.3` for MAIN or `0.03` for a side engine, plus `+100` for landing and
//! `-100` for a crash.

use serde::{Deserialize, Serialize};

use super::{Action, Environment, Outcome, StepResult};
use crate::error::{Error, Result};
use crate::rng::Rng;

const OBS_X: f64 = 1.0 / 10.0;
const OBS_Y: f64 = 1.0 / 6.666_666_666_666_667;
const OBS_VX: f64 = 0.2;
const OBS_VY: f64 = 0.133_333_333_333_333_33;
const OBS_OMEGA: f64 = 0.4;
const WIND_PHASE_RANGE: u64 = 19_999;
const REST_SPEED: f64 = 0.1;
const REST_SPIN: f64 = 0.1;

/// Largest possible `|reward|` of a single step under the velocity clamps.
///
/// Shaping moves at most 100 for position, 100 + 100 for velocity and speed
/// lost on impact, 40 for angle and 20 for leg contact; add the terminal
/// bonus and fuel.
pub const REWARD_BOUND: f64 = 460.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub wind_power: f64,
    pub turbulence_power: f64,
    pub gravity: f64,
    pub max_steps: usize,
    pub dt: f64,
    pub main_accel: f64,
    pub side_accel: f64,
    pub side_spin_accel: f64,
    pub mass: f64,
    pub inertia: f64,
    /// Half width of the pad in metres; both feet must rest inside it.
    pub pad_half_width: f64,
    pub leg_spread: f64,
    pub leg_down: f64,
    /// Downward speed above which a touchdown is a crash.
    pub crash_speed: f64,
    /// Tilt above which ground contact is a crash.
    pub crash_tilt: f64,
    pub spawn_height: f64,
    pub spawn_speed: f64,
    pub spawn_tilt: f64,
    pub max_speed: f64,
    pub max_spin: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            wind_power: 5.0,
            turbulence_power: 1.5,
            gravity: 10.0,
            max_steps: 1000,
            dt: 0.02,
            main_accel: 18.0,
            side_accel: 1.5,
            side_spin_accel: 6.0,
            mass: 4.8,
            inertia: 1.0,
            pad_half_width: 2.0,
            leg_spread: 0.6,
            leg_down: 0.6,
            crash_speed: 2.5,
            crash_tilt: 0.6,
            spawn_height: 10.0,
            spawn_speed: 1.5,
            spawn_tilt: 0.05,
            max_speed: 10.0,
            max_spin: 5.0,
        }
    }
}

impl EnvConfig {
    /// Default dynamics with wind and turbulence switched off.
    pub fn calm() -> Self {
        Self {
            wind_power: 0.0,
            turbulence_power: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let magnitudes = [
            ("wind_power", self.wind_power),
            ("turbulence_power", self.turbulence_power),
            ("gravity", self.gravity),
            ("main_accel", self.main_accel),
            ("side_accel", self.side_accel),
            ("side_spin_accel", self.side_spin_accel),
            ("pad_half_width", self.pad_half_width),
            ("leg_spread", self.leg_spread),
            ("leg_down", self.leg_down),
            ("crash_speed", self.crash_speed),
            ("crash_tilt", self.crash_tilt),
            ("spawn_height", self.spawn_height),
            ("spawn_speed", self.spawn_speed),
            ("spawn_tilt", self.spawn_tilt),
        ];
        for (name, v) in magnitudes {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Env(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        for (name, v) in [
            ("dt", self.dt),
            ("mass", self.mass),
            ("inertia", self.inertia),
            ("max_speed", self.max_speed),
            ("max_spin", self.max_spin),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Env(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::Env("max_steps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanderState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub theta: f64,
    pub omega: f64,
    pub left_contact: bool,
    pub right_contact: bool,
    pub steps: usize,
}

impl LanderState {
    pub fn observation(&self, cfg: &EnvConfig) -> Vec<f64> {
        vec![
            self.x * OBS_X,
            (self.y - cfg.leg_down) * OBS_Y,
            self.vx * OBS_VX,
            self.vy * OBS_VY,
            self.theta,
            self.omega * OBS_OMEGA,
            f64::from(u8::from(self.left_contact)),
            f64::from(u8::from(self.right_contact)),
        ]
    }

    /// Reflection through the pad axis.
    pub fn mirrored(&self) -> Self {
        Self {
            x: -self.x,
            vx: -self.vx,
            theta: -self.theta,
            omega: -self.omega,
            left_contact: self.right_contact,
            right_contact: self.left_contact,
            ..*self
        }
    }

    /// World positions of the left and right feet.
    pub fn feet(&self, cfg: &EnvConfig) -> [(f64, f64); 2] {
        let (s, c) = (libm::sin(self.theta), libm::cos(self.theta));
        let foot = |dx: f64| {
            let dy = -cfg.leg_down;
            (self.x + dx * c - dy * s, self.y + dx * s + dy * c)
        };
        [foot(-cfg.leg_spread), foot(cfg.leg_spread)]
    }
}

fn shaping(obs: &[f64]) -> f64 {
    -100.0 * obs[0].hypot(obs[1]) - 100.0 * obs[2].hypot(obs[3]) - 100.0 * obs[4].abs()
        + 10.0 * obs[6]
        + 10.0 * obs[7]
}

fn gust(k: f64) -> f64 {
    libm::tanh(libm::sin(0.02 * k) + libm::sin(0.01 * std::f64::consts::PI * k))
}

#[derive(Debug, Clone)]
pub struct LanderEnv {
    cfg: EnvConfig,
    state: LanderState,
    wind_phase: f64,
    torque_phase: f64,
    prev_shaping: f64,
    done: bool,
}

impl LanderEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let mut env = Self {
            cfg,
            state: LanderState {
                x: 0.0,
                y: 0.0,
                vx: 0.0,
                vy: 0.0,
                theta: 0.0,
                omega: 0.0,
                left_contact: false,
                right_contact: false,
                steps: 0,
            },
            wind_phase: 0.0,
            torque_phase: 0.0,
            prev_shaping: 0.0,
            done: true,
        };
        env.reset(0);
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &LanderState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Starts an episode from an explicit state with the given wind phases.
    pub fn reset_to(&mut self, state: LanderState, wind_phase: f64, torque_phase: f64) -> Vec<f64> {
        self.state = LanderState {
            left_contact: false,
            right_contact: false,
            steps: 0,
            ..state
        };
        self.wind_phase = wind_phase;
        self.torque_phase = torque_phase;
        self.done = false;
        let obs = self.state.observation(&self.cfg);
        self.prev_shaping = shaping(&obs);
        obs
    }

    fn in_pad(&self) -> bool {
        self.state
            .feet(&self.cfg)
            .iter()
            .all(|&(fx, _)| fx.abs() <= self.cfg.pad_half_width)
    }
}

impl Environment for LanderEnv {
    fn observation_dim(&self) -> usize {
        8
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn reset(&mut self, episode_seed: u64) -> Vec<f64> {
        let mut rng = Rng::new(episode_seed);
        let sp = self.cfg.spawn_speed;
        let tilt = self.cfg.spawn_tilt;
        let vx = rng.uniform_range(-sp, sp);
        let vy = rng.uniform_range(-sp, 0.0);
        let theta = rng.uniform_range(-tilt, tilt);
        let omega = rng.uniform_range(-tilt, tilt);
        let wind_phase = rng.below(WIND_PHASE_RANGE) as f64 - 9_999.0;
        let torque_phase = rng.below(WIND_PHASE_RANGE) as f64 - 9_999.0;
        let state = LanderState {
            x: 0.0,
            y: self.cfg.spawn_height + self.cfg.leg_down,
            vx,
            vy,
            theta,
            omega,
            left_contact: false,
            right_contact: false,
            steps: 0,
        };
        self.reset_to(state, wind_phase, torque_phase)
    }

    fn step(&mut self, action: Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::Env("step called on a finished episode".into()));
        }
        let cfg = &self.cfg;
        let dt = cfg.dt;
        let st = &mut self.state;
        let (s, c) = (libm::sin(st.theta), libm::cos(st.theta));

        let mut ax = 0.0;
        let mut ay = -cfg.gravity;
        let mut alpha = 0.0;
        let mut fuel = 0.0;
        match action {
            Action::Noop => {}
            Action::Main => {
                ax -= cfg.main_accel * s;
                ay += cfg.main_accel * c;
                fuel = 0.3;
            }
            Action::Left => {
                ax -= cfg.side_accel * c;
                ay -= cfg.side_accel * s;
                alpha += cfg.side_spin_accel;
                fuel = 0.03;
            }
            Action::Right => {
                ax += cfg.side_accel * c;
                ay += cfg.side_accel * s;
                alpha -= cfg.side_spin_accel;
                fuel = 0.03;
            }
        }
        if !st.left_contact && !st.right_contact {
            if cfg.wind_power > 0.0 {
                ax += gust(self.wind_phase) * cfg.wind_power / cfg.mass;
                self.wind_phase += 1.0;
            }
            if cfg.turbulence_power > 0.0 {
                alpha += gust(self.torque_phase) * cfg.turbulence_power / cfg.inertia;
                self.torque_phase += 1.0;
            }
        }

        st.vx = (st.vx + ax * dt).clamp(-cfg.max_speed, cfg.max_speed);
        st.vy = (st.vy + ay * dt).clamp(-cfg.max_speed, cfg.max_speed);
        st.omega = (st.omega + alpha * dt).clamp(-cfg.max_spin, cfg.max_spin);
        st.x += st.vx * dt;
        st.y += st.vy * dt;
        st.theta += st.omega * dt;
        st.steps += 1;

        let feet = st.feet(cfg);
        let left = feet[0].1 <= 0.0;
        let right = feet[1].1 <= 0.0;
        let mut crashed = false;
        if left || right {
            let depth = -feet[0].1.min(feet[1].1);
            st.y += depth;
            if -st.vy > cfg.crash_speed {
                crashed = true;
            } else if st.vy < 0.0 {
                st.vy = 0.0;
            }
            st.vx *= 0.9;
            st.omega = 0.9 * st.omega - st.theta * dt * 10.0;
            if st.theta.abs() > cfg.crash_tilt {
                crashed = true;
            }
        }
        st.left_contact = left;
        st.right_contact = right;

        let obs = st.observation(cfg);
        if obs[0].abs() >= 1.0 {
            crashed = true;
        }
        let resting = left
            && right
            && st.vx.hypot(st.vy) < REST_SPEED
            && st.omega.abs() < REST_SPIN;

        let shape = shaping(&obs);
        let mut reward = shape - self.prev_shaping - fuel;
        self.prev_shaping = shape;

        let outcome = if crashed {
            reward -= 100.0;
            Outcome::Crashed
        } else if resting && self.in_pad() {
            reward += 100.0;
            Outcome::Landed
        } else if resting || self.state.steps >= self.cfg.max_steps {
            Outcome::Timeout
        } else {
            Outcome::Flying
        };
        self.done = outcome != Outcome::Flying;
        Ok(StepResult {
            observation: obs,
            reward,
            done: self.done,
            outcome,
        })
    }
}
