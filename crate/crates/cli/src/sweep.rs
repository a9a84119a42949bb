use std::collections::VecDeque;
use std::path::PathBuf;
use std::process::{Child, Command};
use std::thread;
use std::time::Duration;

use clap::Args;

use crate::config::BufferKind;
use crate::{ConfigArgs, Failure};

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Comma-separated buffer kinds.
    #[arg(long, default_value = "frugal,plain")]
    buffers: String,
    /// Comma-separated seeds.
    #[arg(long, default_value = "0")]
    seeds: String,
    /// Parent directory; each run goes to `<env>-<buffer>-s<seed>` inside it.
    #[arg(long, env = "FAC_RUN_DIR")]
    out: Option<PathBuf>,
    /// Concurrent training processes.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

pub fn run(args: &SweepArgs) -> Result<(), Failure> {
    let base = args.common.resolve(&[])?;
    let out = args
        .out
        .clone()
        .ok_or_else(|| Failure::Config("no output directory: pass --out or set FAC_RUN_DIR".into()))?;
    if args.jobs == 0 {
        return Err(Failure::Config("--jobs must be at least 1".into()));
    }
    let buffers = args
        .buffers
        .split(',')
        .map(|b| b.trim().parse::<BufferKind>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::Config)?;
    let seeds = args
        .seeds
        .split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|_| format!("bad seed `{s}`")))
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::Config)?;

    let exe = std::env::current_exe().map_err(|e| Failure::Config(format!("locating fac binary: {e}")))?;
    let mut queue: VecDeque<(String, Command)> = VecDeque::new();
    for &seed in &seeds {
        for &buffer in &buffers {
            let name = format!("{}-{}-s{seed}", base.env, buffer.as_str());
            let mut cmd = Command::new(&exe);
            cmd.arg("train")
                .args(args.common.to_args())
                .args(["--buffer", buffer.as_str(), "--seed", &seed.to_string()])
                .arg("--out")
                .arg(out.join(&name));
            queue.push_back((name, cmd));
        }
    }

    // Exit code priority: a diverged run outranks a config failure.
    let mut worst: u8 = 0;
    let mut running: Vec<(String, Child)> = Vec::new();
    while !queue.is_empty() || !running.is_empty() {
        while running.len() < args.jobs {
            let Some((name, mut cmd)) = queue.pop_front() else {
                break;
            };
            let child = cmd
                .spawn()
                .map_err(|e| Failure::Config(format!("starting {name}: {e}")))?;
            running.push((name, child));
        }
        let mut i = 0;
        while i < running.len() {
            let status = running[i]
                .1
                .try_wait()
                .map_err(|e| Failure::Config(format!("waiting on {}: {e}", running[i].0)))?;
            match status {
                Some(s) => {
                    let (name, _) = running.swap_remove(i);
                    let code = s.code().map_or(2, |c| c.clamp(0, 255) as u8);
                    eprintln!("{name}: exit {code}");
                    worst = worst.max(code);
                }
                None => i += 1,
            }
        }
        thread::sleep(Duration::from_millis(50));
    }
    match worst {
        0 => Ok(()),
        3 => Err(Failure::Diverged("at least one run diverged".into())),
        _ => Err(Failure::Config("at least one run failed".into())),
    }
}
