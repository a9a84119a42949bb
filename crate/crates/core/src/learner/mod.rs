//! Small deterministic off-policy actor-critic that hosts either buffer.

mod agent;
mod mlp;
mod optim;
mod train;

pub use agent::{td_delta, Agent, AgentConfig};
pub use mlp::{Mlp, OutputActivation, Trace};
pub use optim::{AdamState, Optimizer, OptimizerKind};
pub use train::{evaluate, train, EvalStats, SeedStreams, TrainConfig, TrainOutcome};
