//! Per-step training records, streamed as JSON Lines.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{FacError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub step: u64,
    pub reward: f64,
    pub accepted: bool,
    pub rde: f64,
    pub buf: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRecord {
    pub step: u64,
    pub eval_mean: f64,
    pub eval_std: f64,
}

/// Last line of a run: where the buffer ended up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinalRecord {
    pub step: u64,
    pub final_buf: u64,
    pub inserted: u64,
    pub rejected: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogRecord {
    Step(StepRecord),
    Eval(EvalRecord),
    Final(FinalRecord),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<LogRecord>,
    /// Wall-clock duration of the run in seconds. Not written to the JSONL
    /// stream, which must stay byte-identical across reruns.
    pub wall_time_secs: f64,
}

impl RunLog {
    pub fn push(&mut self, r: LogRecord) {
        self.records.push(r);
    }

    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Step(s) => Some(s),
            _ => None,
        })
    }

    pub fn evals(&self) -> impl Iterator<Item = &EvalRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Eval(e) => Some(e),
            _ => None,
        })
    }

    pub fn final_record(&self) -> Option<&FinalRecord> {
        self.records.iter().rev().find_map(|r| match r {
            LogRecord::Final(f) => Some(f),
            _ => None,
        })
    }

    /// `(step, mean return)` pairs from the evaluation records.
    pub fn eval_curve(&self) -> Vec<(u64, f64)> {
        self.evals().map(|e| (e.step, e.eval_mean)).collect()
    }

    /// Final buffer size, from the closing record or else the last step.
    pub fn final_buffer_size(&self) -> Option<u64> {
        self.final_record()
            .map(|f| f.final_buf)
            .or_else(|| self.steps().last().map(|s| s.buf))
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r).map_err(|e| FacError::Format(e.to_string()))?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut log = RunLog::default();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: LogRecord = serde_json::from_str(&line)
                .map_err(|e| FacError::Format(format!("line {}: {e}", i + 1)))?;
            log.push(rec);
        }
        log.check()?;
        Ok(log)
    }

    /// Step records must have strictly increasing step numbers.
    pub fn check(&self) -> Result<()> {
        let mut last = None;
        for s in self.steps() {
            if last.is_some_and(|l| s.step <= l) {
                return Err(FacError::Format(format!(
                    "step {} does not follow step {}",
                    s.step,
                    last.unwrap()
                )));
            }
            last = Some(s.step);
        }
        Ok(())
    }
}
