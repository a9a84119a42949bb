use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::agent::{Agent, AgentConfig};
use super::mlp::Mlp;
use crate::analysis::runlog::{EvalRecord, FinalRecord, LogRecord, RunLog, StepRecord};
use crate::envs::Environment;
use crate::error::{FacError, Result};
use crate::linalg::{find_important_dimensions, DimensionSelection, Matrix};
use crate::partition::{build_partition, PartitionSpec};
use crate::replay::{ReplayBuffer, Transition};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub agent: AgentConfig,
    pub batch_size: usize,
    /// Total environment steps, warm-up included.
    pub total_steps: u64,
    /// Random-policy steps collected before learning and used for the
    /// dimension selection and the partition.
    pub warmup_steps: u64,
    /// Exploration noise std as a fraction of the action range.
    pub exploration_noise: f64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    /// Pivot ratio threshold for keeping a state dimension.
    pub nu: f64,
    /// Cells per selected dimension (one value applies to all).
    pub mu: Vec<u32>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            agent: AgentConfig::default(),
            batch_size: 128,
            total_steps: 20_000,
            warmup_steps: 1_000,
            exploration_noise: 0.1,
            eval_interval: 1_000,
            eval_episodes: 10,
            nu: 0.5,
            mu: vec![50],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FacError::InvalidConfig(m));
        let a = &self.agent;
        if !(a.gamma > 0.0 && a.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", a.gamma));
        }
        if !(a.tau > 0.0 && a.tau <= 1.0) {
            return bad(format!("tau must lie in (0, 1], got {}", a.tau));
        }
        if !(a.lr_actor > 0.0 && a.lr_critic > 0.0) {
            return bad("learning rates must be positive".into());
        }
        if a.policy_delay == 0 {
            return bad("policy_delay must be at least 1".into());
        }
        if a.hidden.is_empty() || a.hidden.contains(&0) {
            return bad(format!("bad hidden widths {:?}", a.hidden));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if self.warmup_steps < 2 {
            return bad("warm-up needs at least 2 steps".into());
        }
        if self.warmup_steps > self.total_steps {
            return bad(format!(
                "warm-up ({}) exceeds total steps ({})",
                self.warmup_steps, self.total_steps
            ));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return bad(format!("nu must lie in (0, 1), got {}", self.nu));
        }
        if self.mu.is_empty() || self.mu.contains(&0) {
            return bad(format!("bad mu {:?}", self.mu));
        }
        if self.eval_interval == 0 || self.eval_episodes == 0 {
            return bad("evaluation interval and episode count must be positive".into());
        }
        if self.exploration_noise < 0.0 {
            return bad("exploration noise must be non-negative".into());
        }
        Ok(())
    }
}

/// Independent random streams carved from the run seed.
pub struct SeedStreams {
    pub env: ChaCha8Rng,
    pub init: ChaCha8Rng,
    pub explore: ChaCha8Rng,
    pub sampler: ChaCha8Rng,
    pub eval_seed: u64,
}

impl SeedStreams {
    pub fn new(seed: u64) -> Self {
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(k);
            r
        };
        Self {
            env: stream(1),
            init: stream(2),
            explore: stream(3),
            sampler: stream(4),
            eval_seed: stream(5).next_u64(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// Runs noise-free episodes and summarizes undiscounted returns.
pub fn evaluate(policy: &Mlp, env: &mut dyn Environment, episodes: usize, seed: u64) -> Result<EvalStats> {
    if episodes == 0 {
        return Err(FacError::InvalidConfig("need at least one evaluation episode".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset(rng.next_u64());
        let mut total = 0.0;
        loop {
            let a = policy.forward(&obs)?;
            let out = env.step(&a)?;
            total += out.reward;
            if out.done() {
                break;
            }
            obs = out.obs;
        }
        returns.push(total);
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    Ok(EvalStats {
        mean,
        std: var.sqrt(),
    })
}

pub struct TrainOutcome {
    pub policy: Mlp,
    pub log: RunLog,
    pub selection: DimensionSelection,
    pub partition: PartitionSpec,
}

/// Warm-up with random actions, pick dimensions and build the partition from
/// the warm-up states, then learn for the remaining steps. Every step offers
/// its transition to `buffer`; everything else is independent of the buffer
/// type.
pub fn train<B: ReplayBuffer>(
    env: &mut dyn Environment,
    buffer: &mut B,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let spec = env.spec().clone();
    let mut eval_env = env.boxed_clone();
    let mut streams = SeedStreams::new(cfg.seed);
    let mut agent = Agent::new(
        spec.obs_dim,
        &spec.action_low,
        &spec.action_high,
        cfg.agent.clone(),
        &mut streams.init,
    )?;

    let mut log = RunLog::default();
    let mut rollout: Vec<Vec<f64>> = Vec::with_capacity(cfg.warmup_steps as usize);
    let mut selection = None;
    let mut partition = None;
    let mut obs = env.reset(streams.env.next_u64());

    for t in 0..cfg.total_steps {
        let action = if t < cfg.warmup_steps {
            rollout.push(obs.clone());
            spec.action_low
                .iter()
                .zip(&spec.action_high)
                .map(|(&lo, &hi)| streams.explore.random_range(lo..=hi))
                .collect()
        } else {
            agent.explore(&obs, cfg.exploration_noise, &mut streams.explore)?
        };
        let out = env.step(&action)?;
        let reward = out.reward;
        let outcome = buffer.insert(Transition {
            s: std::mem::take(&mut obs),
            a: action,
            r: reward,
            s_next: out.obs.clone(),
            done: out.terminated,
        })?;
        obs = if out.done() {
            env.reset(streams.env.next_u64())
        } else {
            out.obs
        };
        log.push(LogRecord::Step(StepRecord {
            step: t + 1,
            reward,
            accepted: outcome.accepted,
            rde: outcome.rde_value,
            buf: buffer.len() as u64,
        }));

        if t + 1 == cfg.warmup_steps {
            let omega = Matrix::from_rows(&rollout)?;
            let sel = match find_important_dimensions(&omega, cfg.nu) {
                Ok(sel) => sel,
                Err(FacError::DegenerateRollout(_)) => DimensionSelection::all(spec.obs_dim),
                Err(e) => return Err(e),
            };
            let p = build_partition(&omega, &sel, &cfg.mu)?;
            buffer.install_partition(p.clone())?;
            selection = Some(sel);
            partition = Some(p);
        }

        if t >= cfg.warmup_steps {
            let idx = buffer.sample_indices(cfg.batch_size, &mut streams.sampler)?;
            let batch: Vec<&Transition> = idx.into_iter().map(|i| buffer.get(i)).collect();
            agent.update(&batch, &mut streams.explore).map_err(|e| match e {
                FacError::DivergedTraining { what, .. } => FacError::DivergedTraining { step: t + 1, what },
                other => other,
            })?;
        }

        if (t + 1) % cfg.eval_interval == 0 || t + 1 == cfg.total_steps {
            let stats = evaluate(&agent.actor, eval_env.as_mut(), cfg.eval_episodes, streams.eval_seed)?;
            log.push(LogRecord::Eval(EvalRecord {
                step: t + 1,
                eval_mean: stats.mean,
                eval_std: stats.std,
            }));
        }
    }

    let (inserted, rejected) = buffer.counters();
    log.push(LogRecord::Final(FinalRecord {
        step: cfg.total_steps,
        final_buf: buffer.len() as u64,
        inserted,
        rejected,
    }));
    log.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(TrainOutcome {
        policy: agent.actor,
        log,
        selection: selection.expect("warm-up always completes"),
        partition: partition.expect("warm-up always completes"),
    })
}
