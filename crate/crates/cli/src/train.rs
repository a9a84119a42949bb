use std::fs;
use std::io::BufWriter;
use std::path::Path;

use fac_core::envs::make;
use fac_core::learner::{train, TrainOutcome};
use fac_core::replay::{FrugalBuffer, PlainBuffer, ReplayBuffer};

use crate::config::{BufferKind, RunConfig};
use crate::Failure;

pub const LOG_FILE: &str = "run.jsonl";
pub const BUFFER_FILE: &str = "buffer.facb";
pub const POLICY_FILE: &str = "policy.facp";
pub const CONFIG_FILE: &str = "config.resolved";

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("{}: {e}", path.display()))
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let resolved = out.join(CONFIG_FILE);
    fs::write(&resolved, cfg.to_text()).map_err(|e| io_failure(&resolved, e))?;

    let mut env = make(&cfg.env).ok_or_else(|| Failure::Config(format!("unknown env `{}`", cfg.env)))?;
    let spec = env.spec().clone();
    let (outcome, stored, buffer_path): (TrainOutcome, usize, _) = match cfg.buffer {
        BufferKind::Plain => {
            let mut b = PlainBuffer::new(cfg.capacity, spec.obs_dim, spec.action_dim);
            let o = train(env.as_mut(), &mut b, &cfg.train)?;
            let p = out.join(BUFFER_FILE);
            b.save(&p)?;
            (o, b.len(), p)
        }
        BufferKind::Frugal => {
            let mut b = FrugalBuffer::new(cfg.capacity, spec.obs_dim, spec.action_dim, cfg.gate)?;
            let o = train(env.as_mut(), &mut b, &cfg.train)?;
            let p = out.join(BUFFER_FILE);
            b.save(&p)?;
            (o, b.len(), p)
        }
    };

    let log_path = out.join(LOG_FILE);
    let file = fs::File::create(&log_path).map_err(|e| io_failure(&log_path, e))?;
    outcome.log.write_jsonl(BufWriter::new(file))?;
    outcome.policy.save(&out.join(POLICY_FILE))?;

    let last = outcome.log.evals().last().map(|e| e.eval_mean).unwrap_or(f64::NAN);
    eprintln!(
        "{} {} seed {}: dims {:?}, buffer {} ({}), final eval {:.2}, {:.1}s",
        cfg.env,
        cfg.buffer.as_str(),
        cfg.train.seed,
        outcome.selection.kappa,
        stored,
        buffer_path.display(),
        last,
        outcome.log.wall_time_secs
    );
    Ok(())
}
