use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use fac_core::analysis::{metric_deltas, MetricsRow, RunLog};

use crate::config::RunConfig;
use crate::train::{CONFIG_FILE, LOG_FILE};
use crate::Failure;

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Run directories to summarize.
    runs: Vec<PathBuf>,
    /// Baseline run of a comparison pair. Repeatable; paired in order with
    /// `--candidate`.
    #[arg(long)]
    baseline: Vec<PathBuf>,
    #[arg(long)]
    candidate: Vec<PathBuf>,
    /// Write the metrics CSV here instead of stdout.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    /// Write the comparison CSV here instead of stdout.
    #[arg(long)]
    deltas_out: Option<PathBuf>,
}

pub const METRICS_HEADER: [&str; 10] = [
    "run_id",
    "env",
    "algo",
    "buffer",
    "seed",
    "cp",
    "buffer_size",
    "reward_mean",
    "reward_std",
    "p",
];

pub const DELTAS_HEADER: [&str; 6] = ["baseline", "candidate", "delta_cp", "delta_buf", "delta_reward", "p"];

struct Run {
    id: String,
    config: Option<RunConfig>,
    metrics: MetricsRow,
}

fn load(dir: &Path) -> Result<Run, Failure> {
    let log_path = dir.join(LOG_FILE);
    let file = fs::File::open(&log_path).map_err(|e| Failure::Config(format!("{}: {e}", log_path.display())))?;
    let log = RunLog::read_jsonl(BufReader::new(file))
        .and_then(|log| log.check().map(|_| log))
        .map_err(|e| Failure::Config(format!("{}: {e}", log_path.display())))?;
    let metrics = MetricsRow::from_log(&log).map_err(|e| Failure::Config(format!("{}: {e}", log_path.display())))?;
    let cfg_path = dir.join(CONFIG_FILE);
    let config = match fs::read_to_string(&cfg_path) {
        Ok(text) => {
            let mut c = RunConfig::default();
            c.apply_text(&text)
                .map_err(|e| Failure::Config(format!("{}: {e}", cfg_path.display())))?;
            Some(c)
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => None,
        Err(e) => return Err(Failure::Config(format!("{}: {e}", cfg_path.display()))),
    };
    let id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    Ok(Run { id, config, metrics })
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(fs::File::create(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn csv_failure(e: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("writing CSV: {e}"))
}

pub fn run(args: &AnalyzeArgs) -> Result<(), Failure> {
    if args.baseline.len() != args.candidate.len() {
        return Err(Failure::Config(format!(
            "{} --baseline but {} --candidate runs",
            args.baseline.len(),
            args.candidate.len()
        )));
    }
    if args.runs.is_empty() && args.baseline.is_empty() {
        return Err(Failure::Config("nothing to analyze".into()));
    }

    let runs = args.runs.iter().map(|d| load(d)).collect::<Result<Vec<_>, _>>()?;
    let pairs = args
        .baseline
        .iter()
        .zip(&args.candidate)
        .map(|(b, c)| Ok((load(b)?, load(c)?)))
        .collect::<Result<Vec<_>, Failure>>()?;

    if !runs.is_empty() {
        let mut w = csv::Writer::from_writer(sink(&args.metrics_out)?);
        w.write_record(METRICS_HEADER).map_err(csv_failure)?;
        for r in &runs {
            let (env, buffer, seed) = match &r.config {
                Some(c) => (c.env.clone(), c.buffer.as_str().to_string(), c.train.seed.to_string()),
                None => Default::default(),
            };
            let m = &r.metrics;
            w.write_record([
                r.id.clone(),
                env,
                "td3".into(),
                buffer,
                seed,
                m.cp.to_string(),
                m.buffer_size.to_string(),
                m.reward_mean.to_string(),
                m.reward_std.to_string(),
                m.p.to_string(),
            ])
            .map_err(csv_failure)?;
        }
        w.flush().map_err(csv_failure)?;
    }

    if !pairs.is_empty() {
        if !runs.is_empty() && args.metrics_out.is_none() && args.deltas_out.is_none() {
            println!();
        }
        let mut w = csv::Writer::from_writer(sink(&args.deltas_out)?);
        w.write_record(DELTAS_HEADER).map_err(csv_failure)?;
        for (b, c) in &pairs {
            let d = metric_deltas(&b.metrics, &c.metrics).map_err(|e| Failure::Config(e.to_string()))?;
            w.write_record([
                b.id.clone(),
                c.id.clone(),
                d.delta_cp.to_string(),
                d.delta_buf.to_string(),
                d.delta_reward.to_string(),
                d.p.to_string(),
            ])
            .map_err(csv_failure)?;
        }
        w.flush().map_err(csv_failure)?;
    }
    Ok(())
}
