//! Convergence point, buffer/reward deltas and per-sample efficiency.

use super::runlog::RunLog;
use crate::error::{FacError, Result};

/// Fraction of the (shifted) best return that defines the convergence band.
pub const CONVERGENCE_BAND: f64 = 0.9;

/// Earliest step after which every evaluation stays within the top band.
///
/// The curve is first shifted by its minimum so the band `[0.9 r'_max,
/// r'_max]` is well ordered for negative returns. Returns the final step when
/// the last point is the only one in the band.
pub fn convergence_point(curve: &[(u64, f64)]) -> Result<u64> {
    let Some(&(last_step, _)) = curve.last() else {
        return Err(FacError::EmptyCurve);
    };
    let lo = curve.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = curve.iter().map(|p| p.1 - lo).fold(0.0_f64, f64::max);
    let floor = CONVERGENCE_BAND * hi;
    // Walk back from the end while the suffix stays in band.
    let mut cp = last_step;
    for &(step, v) in curve.iter().rev() {
        if v - lo >= floor {
            cp = step;
        } else {
            break;
        }
    }
    Ok(cp)
}

/// Summary of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub cp: u64,
    pub buffer_size: u64,
    pub reward_mean: f64,
    pub reward_std: f64,
    /// Per-sample efficiency against a baseline; 1 when compared to itself.
    pub p: f64,
}

impl MetricsRow {
    pub fn from_log(log: &RunLog) -> Result<Self> {
        let curve = log.eval_curve();
        let cp = convergence_point(&curve)?;
        let last = log.evals().last().ok_or(FacError::EmptyCurve)?;
        let buffer_size = log
            .final_buffer_size()
            .ok_or_else(|| FacError::Format("log has no buffer size".into()))?;
        Ok(Self {
            cp,
            buffer_size,
            reward_mean: last.eval_mean,
            reward_std: last.eval_std,
            p: 1.0,
        })
    }
}

/// Comparison of a candidate run against a baseline run, in percent except `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricDeltas {
    pub delta_cp: f64,
    pub delta_buf: f64,
    pub delta_reward: f64,
    pub p: f64,
}

/// Shifts both rewards by `|base| + |fac|` when either is non-positive.
pub fn translate_rewards(base: f64, fac: f64) -> (f64, f64) {
    if base <= 0.0 || fac <= 0.0 {
        let shift = base.abs() + fac.abs();
        (base + shift, fac + shift)
    } else {
        (base, fac)
    }
}

pub fn metric_deltas(base: &MetricsRow, fac: &MetricsRow) -> Result<MetricDeltas> {
    if base.cp == 0 {
        return Err(FacError::DivisionDegenerate("baseline convergence point"));
    }
    if base.buffer_size == 0 || fac.buffer_size == 0 {
        return Err(FacError::DivisionDegenerate("buffer size"));
    }
    let (rb, rf) = translate_rewards(base.reward_mean, fac.reward_mean);
    if rb == 0.0 {
        return Err(FacError::DivisionDegenerate("baseline reward"));
    }
    let (cb, cf) = (base.cp as f64, fac.cp as f64);
    let (bb, bf) = (base.buffer_size as f64, fac.buffer_size as f64);
    Ok(MetricDeltas {
        delta_cp: (cb - cf) / cb * 100.0,
        delta_buf: (bb - bf) / bb * 100.0,
        delta_reward: (rf - rb) / rb * 100.0,
        p: (rf * bb) / (bf * rb),
    })
}
