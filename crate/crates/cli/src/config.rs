//! Run configuration: flat `key = value` text, overridable from flags.

use std::fmt::Write as _;
use std::str::FromStr;

use fac_core::density::{DensityMode, GateConfig};
use fac_core::envs::ENV_NAMES;
use fac_core::learner::{OptimizerKind, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferKind {
    Frugal,
    Plain,
}

impl BufferKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BufferKind::Frugal => "frugal",
            BufferKind::Plain => "plain",
        }
    }
}

impl FromStr for BufferKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "frugal" => Ok(BufferKind::Frugal),
            "plain" => Ok(BufferKind::Plain),
            other => Err(format!("unknown buffer `{other}` (expected frugal or plain)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: String,
    pub buffer: BufferKind,
    pub capacity: usize,
    pub gate: GateConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: "pendulum".into(),
            buffer: BufferKind::Frugal,
            capacity: 1_000_000,
            gate: GateConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

/// Every accepted key, in the order `config.resolved` lists them.
pub const KEYS: &[&str] = &[
    "env",
    "buffer",
    "capacity",
    "seed",
    "steps",
    "warmup",
    "batch_size",
    "exploration_noise",
    "eval_interval",
    "eval_episodes",
    "nu",
    "mu",
    "epsilon",
    "eta",
    "beta",
    "bandwidth",
    "density_mode",
    "hidden",
    "gamma",
    "lr_actor",
    "lr_critic",
    "tau",
    "policy_delay",
    "target_noise",
    "target_noise_clip",
    "optimizer",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("bad value `{value}` for key `{key}`"))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let t = &mut self.train;
        let a = &mut t.agent;
        let g = &mut self.gate;
        match key {
            "env" => {
                if !ENV_NAMES.contains(&value) {
                    return Err(format!("unknown env `{value}` (known: {})", ENV_NAMES.join(", ")));
                }
                self.env = value.to_string();
            }
            "buffer" => self.buffer = value.parse()?,
            "capacity" => self.capacity = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "steps" => t.total_steps = parse(key, value)?,
            "warmup" => t.warmup_steps = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "exploration_noise" => t.exploration_noise = parse(key, value)?,
            "eval_interval" => t.eval_interval = parse(key, value)?,
            "eval_episodes" => t.eval_episodes = parse(key, value)?,
            "nu" => t.nu = parse(key, value)?,
            "mu" => t.mu = parse_list(key, value)?,
            "epsilon" => g.epsilon = parse(key, value)?,
            "eta" => g.eta = parse(key, value)?,
            "beta" => g.beta = parse(key, value)?,
            "bandwidth" => g.bandwidth = parse(key, value)?,
            "density_mode" => g.mode = value.parse::<DensityMode>().map_err(|e| e.to_string())?,
            "hidden" => a.hidden = parse_list(key, value)?,
            "gamma" => a.gamma = parse(key, value)?,
            "lr_actor" => a.lr_actor = parse(key, value)?,
            "lr_critic" => a.lr_critic = parse(key, value)?,
            "tau" => a.tau = parse(key, value)?,
            "policy_delay" => a.policy_delay = parse(key, value)?,
            "target_noise" => a.target_noise = parse(key, value)?,
            "target_noise_clip" => a.target_noise_clip = parse(key, value)?,
            "optimizer" => a.optimizer = value.parse::<OptimizerKind>()?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.train;
        let a = &t.agent;
        let g = &self.gate;
        Some(match key {
            "env" => self.env.clone(),
            "buffer" => self.buffer.as_str().into(),
            "capacity" => self.capacity.to_string(),
            "seed" => t.seed.to_string(),
            "steps" => t.total_steps.to_string(),
            "warmup" => t.warmup_steps.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "exploration_noise" => t.exploration_noise.to_string(),
            "eval_interval" => t.eval_interval.to_string(),
            "eval_episodes" => t.eval_episodes.to_string(),
            "nu" => t.nu.to_string(),
            "mu" => join(&t.mu),
            "epsilon" => g.epsilon.to_string(),
            "eta" => g.eta.to_string(),
            "beta" => g.beta.to_string(),
            "bandwidth" => g.bandwidth.to_string(),
            "density_mode" => g.mode.as_str().into(),
            "hidden" => join(&a.hidden),
            "gamma" => a.gamma.to_string(),
            "lr_actor" => a.lr_actor.to_string(),
            "lr_critic" => a.lr_critic.to_string(),
            "tau" => a.tau.to_string(),
            "policy_delay" => a.policy_delay.to_string(),
            "target_noise" => a.target_noise.to_string(),
            "target_noise_clip" => a.target_noise_clip.to_string(),
            "optimizer" => a.optimizer.as_str().into(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
            self.set(k.trim(), v.trim()).map_err(|e| format!("line {}: {e}", n + 1))?;
        }
        Ok(())
    }

    /// Applies a `key=value` override given on the command line.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), String> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| format!("override `{kv}` is not key=value"))?;
        self.set(k.trim(), v.trim())
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.capacity == 0 {
            return Err("capacity must be at least 1".into());
        }
        self.gate.validate().map_err(|e| e.to_string())?;
        self.train.validate().map_err(|e| e.to_string())
    }

    /// Every key with its value; parsing this text back gives the same config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("listed key"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_hyperparameter_table() {
        let c = RunConfig::default();
        assert_eq!(c.train.nu, 0.5);
        assert_eq!(c.gate.epsilon, 0.2);
        assert_eq!(c.gate.eta, 1e5);
        assert_eq!(c.gate.beta, 0.2);
        assert_eq!(c.train.mu, vec![50]);
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.apply_text("env = mountaincar\nlr_actor = 0.0003 # comment\nmu = 10,20\n\nbuffer=plain")
            .unwrap();
        c.gate.bandwidth = 0.1 + 0.2;
        let mut back = RunConfig::default();
        back.apply_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.train.mu, vec![10, 20]);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::default().apply_text("epsilonn = 0.1").unwrap_err();
        assert!(err.contains("epsilonn"));
        assert!(RunConfig::default().set("env", "nosuch").unwrap_err().contains("nosuch"));
        assert!(RunConfig::default().set("steps", "-3").is_err());
    }

    #[test]
    fn every_key_settable() {
        let c = RunConfig::default();
        let mut d = RunConfig::default();
        for key in KEYS {
            d.set(key, &c.get(key).unwrap()).unwrap();
        }
        assert_eq!(c, d);
    }
}
