//! Pendulum and continuous Mountain Car, re-implemented from their standard
//! equations so runs are reproducible bit for bit.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FacError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: &'static str,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: u32,
    pub dt: Option<f64>,
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// The episode ended on its own (goal reached).
    pub terminated: bool,
    /// The episode hit its step limit.
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

pub trait Environment {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode; the initial state depends only on `seed`.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    fn step(&mut self, action: &[f64]) -> Result<StepResult>;

    /// Independent copy, used for evaluation episodes.
    fn boxed_clone(&self) -> Box<dyn Environment + Send>;
}

/// Builds an environment by its command-line name.
pub fn make(name: &str) -> Option<Box<dyn Environment + Send>> {
    match name {
        "pendulum" => Some(Box::new(Pendulum::new())),
        "mountaincar" => Some(Box::new(MountainCarContinuous::new())),
        _ => None,
    }
}

pub const ENV_NAMES: &[&str] = &["pendulum", "mountaincar"];

fn checked_action(action: &[f64], spec: &EnvSpec) -> Result<f64> {
    if action.len() != spec.action_dim {
        return Err(FacError::ShapeMismatch {
            expected: spec.action_dim,
            got: action.len(),
        });
    }
    let a = action[0];
    if !a.is_finite() {
        return Err(FacError::NonFiniteAction);
    }
    Ok(a.clamp(spec.action_low[0], spec.action_high[0]))
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Inverted pendulum swing-up. Observation `(cos th, sin th, th_dot)`.
#[derive(Debug, Clone)]
pub struct Pendulum {
    spec: EnvSpec,
    pub theta: f64,
    pub theta_dot: f64,
    steps: u32,
}

impl Pendulum {
    pub const MAX_SPEED: f64 = 8.0;
    pub const MAX_TORQUE: f64 = 2.0;
    pub const DT: f64 = 0.05;
    pub const G: f64 = 10.0;
    pub const M: f64 = 1.0;
    pub const L: f64 = 1.0;

    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "pendulum",
                obs_dim: 3,
                action_dim: 1,
                action_low: vec![-Self::MAX_TORQUE],
                action_high: vec![Self::MAX_TORQUE],
                max_episode_steps: 200,
                dt: Some(Self::DT),
            },
            theta: 0.0,
            theta_dot: 0.0,
            steps: 0,
        }
    }

    /// Places the pendulum in a given physical state and restarts the step count.
    pub fn set_state(&mut self, theta: f64, theta_dot: f64) {
        self.theta = theta;
        self.theta_dot = theta_dot;
        self.steps = 0;
    }

    pub fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = rng.random_range(-PI..=PI);
        let theta_dot = rng.random_range(-1.0..=1.0);
        self.set_state(theta, theta_dot);
        self.observation()
    }

    fn boxed_clone(&self) -> Box<dyn Environment + Send> {
        Box::new(self.clone())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let u = checked_action(action, &self.spec)?;
        let (th, thdot) = (self.theta, self.theta_dot);
        let cost = wrap_angle(th).powi(2) + 0.1 * thdot * thdot + 0.001 * u * u;

        let accel = 3.0 * Self::G / (2.0 * Self::L) * th.sin() + 3.0 / (Self::M * Self::L * Self::L) * u;
        let new_thdot = (thdot + accel * Self::DT).clamp(-Self::MAX_SPEED, Self::MAX_SPEED);
        self.theta = th + new_thdot * Self::DT;
        self.theta_dot = new_thdot;
        self.steps += 1;

        Ok(StepResult {
            obs: self.observation(),
            reward: -cost,
            terminated: false,
            truncated: self.steps >= self.spec.max_episode_steps,
        })
    }
}

/// Continuous Mountain Car. Observation `(position, velocity)`.
#[derive(Debug, Clone)]
pub struct MountainCarContinuous {
    spec: EnvSpec,
    pub position: f64,
    pub velocity: f64,
    steps: u32,
}

impl MountainCarContinuous {
    pub const MIN_POSITION: f64 = -1.2;
    pub const MAX_POSITION: f64 = 0.6;
    pub const MAX_SPEED: f64 = 0.07;
    pub const GOAL_POSITION: f64 = 0.45;
    pub const POWER: f64 = 0.0015;

    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "mountaincar",
                obs_dim: 2,
                action_dim: 1,
                action_low: vec![-1.0],
                action_high: vec![1.0],
                max_episode_steps: 999,
                dt: None,
            },
            position: -0.5,
            velocity: 0.0,
            steps: 0,
        }
    }

    pub fn set_state(&mut self, position: f64, velocity: f64) {
        self.position = position;
        self.velocity = velocity;
        self.steps = 0;
    }

    pub fn observation(&self) -> Vec<f64> {
        vec![self.position, self.velocity]
    }
}

impl Default for MountainCarContinuous {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for MountainCarContinuous {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let position = rng.random_range(-0.6..=-0.4);
        self.set_state(position, 0.0);
        self.observation()
    }

    fn boxed_clone(&self) -> Box<dyn Environment + Send> {
        Box::new(self.clone())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let force = checked_action(action, &self.spec)?;
        let mut velocity = self.velocity + force * Self::POWER - 0.0025 * (3.0 * self.position).cos();
        velocity = velocity.clamp(-Self::MAX_SPEED, Self::MAX_SPEED);
        let position = (self.position + velocity).clamp(Self::MIN_POSITION, Self::MAX_POSITION);
        if position == Self::MIN_POSITION && velocity < 0.0 {
            velocity = 0.0;
        }
        self.position = position;
        self.velocity = velocity;
        self.steps += 1;

        let terminated = position >= Self::GOAL_POSITION && velocity >= 0.0;
        let mut reward = -0.1 * force * force;
        if terminated {
            reward += 100.0;
        }
        Ok(StepResult {
            obs: self.observation(),
            reward,
            terminated,
            truncated: !terminated && self.steps >= self.spec.max_episode_steps,
        })
    }
}
