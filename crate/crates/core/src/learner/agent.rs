//! Twin-critic deterministic actor-critic with delayed actor updates and
//! Polyak-averaged targets.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::mlp::{Mlp, OutputActivation};
use super::optim::{Optimizer, OptimizerKind};
use crate::error::{FacError, Result};
use crate::replay::Transition;

/// `r + (1 - done) * gamma * Q'(s', pi'(s')) - Q(s, a)` for one transition.
pub fn td_delta(
    t: &Transition,
    critic_target: &Mlp,
    actor_target: &Mlp,
    critic: &Mlp,
    gamma: f64,
) -> Result<f64> {
    let q = critic.forward(&concat(&t.s, &t.a))?[0];
    if t.done || gamma == 0.0 {
        return Ok(t.r - q);
    }
    let a_next = actor_target.forward(&t.s_next)?;
    let q_next = critic_target.forward(&concat(&t.s_next, &a_next))?[0];
    Ok(t.r + gamma * q_next - q)
}

pub(crate) fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub tau: f64,
    pub policy_delay: u32,
    /// Std of the smoothing noise on target actions, as a fraction of the
    /// half action range.
    pub target_noise: f64,
    pub target_noise_clip: f64,
    pub optimizer: OptimizerKind,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            gamma: 0.99,
            lr_actor: 1e-3,
            lr_critic: 1e-3,
            tau: 0.005,
            policy_delay: 2,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            optimizer: OptimizerKind::Adam,
        }
    }
}

pub struct Agent {
    cfg: AgentConfig,
    action_low: Vec<f64>,
    action_high: Vec<f64>,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critics: [Mlp; 2],
    pub critic_targets: [Mlp; 2],
    actor_opt: Optimizer,
    critic_opts: [Optimizer; 2],
    updates: u64,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        action_low: &[f64],
        action_high: &[f64],
        cfg: AgentConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let act_dim = action_low.len();
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend(&cfg.hidden);
        actor_sizes.push(act_dim);
        let mut critic_sizes = vec![obs_dim + act_dim];
        critic_sizes.extend(&cfg.hidden);
        critic_sizes.push(1);

        let out = OutputActivation::ScaledTanh {
            low: action_low.to_vec(),
            high: action_high.to_vec(),
        };
        let actor = Mlp::new(&actor_sizes, out, rng)?;
        let c1 = Mlp::new(&critic_sizes, OutputActivation::Identity, rng)?;
        let c2 = Mlp::new(&critic_sizes, OutputActivation::Identity, rng)?;
        let actor_opt = Optimizer::new(cfg.optimizer, actor.params().len());
        let critic_opts = [
            Optimizer::new(cfg.optimizer, c1.params().len()),
            Optimizer::new(cfg.optimizer, c2.params().len()),
        ];
        Ok(Self {
            action_low: action_low.to_vec(),
            action_high: action_high.to_vec(),
            actor_target: actor.clone(),
            critic_targets: [c1.clone(), c2.clone()],
            actor,
            critics: [c1, c2],
            actor_opt,
            critic_opts,
            updates: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn act(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.actor.forward(obs)
    }

    /// Greedy action plus Gaussian noise of std `noise * (high - low)`, clipped.
    pub fn explore<R: Rng + ?Sized>(&self, obs: &[f64], noise: f64, rng: &mut R) -> Result<Vec<f64>> {
        let mut a = self.act(obs)?;
        for (i, x) in a.iter_mut().enumerate() {
            let (lo, hi) = (self.action_low[i], self.action_high[i]);
            let std = noise * (hi - lo);
            if std > 0.0 {
                *x += Normal::new(0.0, std).unwrap().sample(rng);
            }
            *x = x.clamp(lo, hi);
        }
        Ok(a)
    }

    /// One critic step on the batch, and every `policy_delay`-th call one actor
    /// step followed by target smoothing. Returns the mean critic loss.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &[&Transition], rng: &mut R) -> Result<f64> {
        let b = batch.len() as f64;
        let gamma = self.cfg.gamma;
        let mut grads = [
            vec![0.0; self.critics[0].params().len()],
            vec![0.0; self.critics[1].params().len()],
        ];
        let mut loss = 0.0;
        let smoothing = Normal::new(0.0, 1.0).unwrap();
        for t in batch {
            let mut y = t.r;
            if !t.done {
                let mut a_next = self.actor_target.forward(&t.s_next)?;
                for (i, x) in a_next.iter_mut().enumerate() {
                    let (lo, hi) = (self.action_low[i], self.action_high[i]);
                    let half = 0.5 * (hi - lo);
                    let clip = self.cfg.target_noise_clip * half;
                    let eps: f64 = smoothing.sample(rng) * self.cfg.target_noise * half;
                    *x = (*x + eps.clamp(-clip, clip)).clamp(lo, hi);
                }
                let input = concat(&t.s_next, &a_next);
                let q1 = self.critic_targets[0].forward(&input)?[0];
                let q2 = self.critic_targets[1].forward(&input)?[0];
                y += gamma * q1.min(q2);
            }
            let input = concat(&t.s, &t.a);
            for (critic, grad) in self.critics.iter().zip(grads.iter_mut()) {
                let trace = critic.forward_trace(&input)?;
                let diff = trace.output()[0] - y;
                loss += diff * diff / b;
                critic.backward(&trace, &[2.0 * diff / b], Some(grad))?;
            }
        }
        for ((critic, opt), grad) in self
            .critics
            .iter_mut()
            .zip(self.critic_opts.iter_mut())
            .zip(&grads)
        {
            opt.step(critic.params_mut(), grad, self.cfg.lr_critic);
            if !critic.is_finite() {
                return Err(FacError::DivergedTraining {
                    step: self.updates,
                    what: "critic parameters",
                });
            }
        }
        self.updates += 1;

        if self.updates % self.cfg.policy_delay as u64 == 0 {
            self.actor_step(batch)?;
            let tau = self.cfg.tau;
            self.actor_target.soft_update_from(&self.actor, tau);
            for (target, online) in self.critic_targets.iter_mut().zip(&self.critics) {
                target.soft_update_from(online, tau);
            }
        }
        Ok(0.5 * loss)
    }

    /// Gradient ascent on `Q1(s, pi(s))` averaged over the batch.
    fn actor_step(&mut self, batch: &[&Transition]) -> Result<()> {
        let b = batch.len() as f64;
        let obs_dim = self.actor.input_dim();
        let mut grad = vec![0.0; self.actor.params().len()];
        for t in batch {
            let a_trace = self.actor.forward_trace(&t.s)?;
            let input = concat(&t.s, a_trace.output());
            let q_trace = self.critics[0].forward_trace(&input)?;
            let dq = self.critics[0].backward(&q_trace, &[-1.0 / b], None)?;
            self.actor.backward(&a_trace, &dq[obs_dim..], Some(&mut grad))?;
        }
        self.actor_opt.step(self.actor.params_mut(), &grad, self.cfg.lr_actor);
        if !self.actor.is_finite() {
            return Err(FacError::DivergedTraining {
                step: self.updates,
                what: "actor parameters",
            });
        }
        Ok(())
    }
}
