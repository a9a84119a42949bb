//! Reward density estimate (RDE) and the insertion gate.
//!
//! For a candidate reward `r` landing in cell `c`, the gate integrates a
//! kernel density estimate over the rewards already stored for `c` across the
//! window `[r - beta, r + beta]`. The transition is admitted when that mass is
//! below `epsilon / exp(n / eta)`, `n` being the number of rewards in `c`.
//!
//! All integrals are exact: each Epanechnikov bump integrates to a clipped
//! cubic, so the RDE is a sum of piecewise cubics in the stored rewards.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::error::{FacError, Result};
use crate::partition::AbstractStateId;

/// Epanechnikov kernel `norm / h * (1 - (u/h)^2)` on `|u| <= h`.
///
/// `norm = 0.75` gives unit mass. Other values exist only so that tests can
/// check the oracles notice a wrong constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Epanechnikov {
    pub norm: f64,
}

impl Epanechnikov {
    pub const STANDARD: Epanechnikov = Epanechnikov { norm: 0.75 };

    pub fn eval(&self, u: f64, h: f64) -> f64 {
        let t = u / h;
        if t.abs() <= 1.0 {
            self.norm / h * (1.0 - t * t)
        } else {
            0.0
        }
    }

    /// Antiderivative on `[-h, h]`, zero at the origin, held constant outside.
    fn antiderivative(&self, u: f64, h: f64) -> f64 {
        let t = (u / h).clamp(-1.0, 1.0);
        self.norm * (t - t * t * t / 3.0)
    }

    /// Mass of a bump centered `d` below the window center, i.e. the integral
    /// of `K(y - r_i)` over `[r - beta, r + beta]` with `d = r - r_i`.
    pub fn window_mass(&self, d: f64, h: f64, beta: f64) -> f64 {
        self.antiderivative(d + beta, h) - self.antiderivative(d - beta, h)
    }
}

impl Default for Epanechnikov {
    fn default() -> Self {
        Self::STANDARD
    }
}

/// Standard Epanechnikov kernel value.
pub fn kernel_eval(u: f64, h: f64) -> f64 {
    Epanechnikov::STANDARD.eval(u, h)
}

/// Count-normalized kernel density of `r` under `rewards`; zero when empty.
pub fn kde_density(r: f64, rewards: &[f64], h: f64) -> f64 {
    if rewards.is_empty() {
        return 0.0;
    }
    rewards.iter().map(|&ri| kernel_eval(r - ri, h)).sum::<f64>() / rewards.len() as f64
}

/// How the per-cell kernel sum is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DensityMode {
    /// `(1/n) * sum K`; the RDE is a probability mass in `[0, 1]`.
    #[default]
    Normalized,
    /// Plain `sum K`; the RDE grows with the number of stored rewards.
    Literal,
}

impl DensityMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DensityMode::Normalized => "normalized",
            DensityMode::Literal => "literal",
        }
    }

    pub fn tag(&self) -> u8 {
        match self {
            DensityMode::Normalized => 0,
            DensityMode::Literal => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(DensityMode::Normalized),
            1 => Some(DensityMode::Literal),
            _ => None,
        }
    }
}

impl std::str::FromStr for DensityMode {
    type Err = FacError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(DensityMode::Normalized),
            "literal" => Ok(DensityMode::Literal),
            other => Err(FacError::InvalidConfig(format!("unknown density mode `{other}`"))),
        }
    }
}

/// Gate hyperparameters. Rewards are raw, so `beta` and `bandwidth` are in
/// reward units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateConfig {
    pub epsilon: f64,
    pub eta: f64,
    pub beta: f64,
    pub bandwidth: f64,
    pub mode: DensityMode,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.2,
            eta: 1e5,
            beta: 0.2,
            bandwidth: 0.2,
            mode: DensityMode::Normalized,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(FacError::InvalidConfig(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        for (name, v) in [("eta", self.eta), ("beta", self.beta), ("bandwidth", self.bandwidth)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FacError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn scale(&self, n: usize) -> f64 {
        match self.mode {
            DensityMode::Normalized if n > 0 => 1.0 / n as f64,
            DensityMode::Normalized => 0.0,
            DensityMode::Literal => 1.0,
        }
    }
}

/// RDE of `r` against a plain list of rewards, summed bump by bump.
pub fn rde(r: f64, rewards: &[f64], cfg: &GateConfig) -> f64 {
    rde_with_kernel(r, rewards, cfg, &Epanechnikov::STANDARD)
}

pub fn rde_with_kernel(r: f64, rewards: &[f64], cfg: &GateConfig, kernel: &Epanechnikov) -> f64 {
    let total: f64 = rewards
        .iter()
        .map(|&ri| kernel.window_mass(r - ri, cfg.bandwidth, cfg.beta))
        .sum();
    total * cfg.scale(rewards.len())
}

/// Acceptance threshold `epsilon / exp(n / eta)` for a cell holding `n` rewards.
pub fn dynamic_epsilon(cfg: &GateConfig, n: usize) -> f64 {
    cfg.epsilon / (n as f64 / cfg.eta).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateDecision {
    Accept { rde: f64 },
    Reject { rde: f64 },
}

impl GateDecision {
    pub fn is_accept(&self) -> bool {
        matches!(self, GateDecision::Accept { .. })
    }

    pub fn rde(&self) -> f64 {
        match *self {
            GateDecision::Accept { rde } | GateDecision::Reject { rde } => rde,
        }
    }
}

/// Runs the gate for reward `r` in `cell`. Does not modify the ledger; on
/// `Accept` the caller appends `r` with [`RewardLedger::push`].
pub fn gate_decision(
    r: f64,
    cell: &AbstractStateId,
    ledger: &RewardLedger,
    cfg: &GateConfig,
) -> GateDecision {
    let n = ledger.count(cell);
    let value = ledger.rde(cell, r, cfg);
    if value < dynamic_epsilon(cfg, n) {
        GateDecision::Accept { rde: value }
    } else {
        GateDecision::Reject { rde: value }
    }
}

/// Rewards of one cell, bucketed on the reward axis.
///
/// Members of a bucket are kept sorted with prefix power sums around the
/// bucket midpoint. The window mass is a cubic in the member value between
/// consecutive breakpoints, so each bucket is split at the breakpoints by
/// binary search and every run is summed from its power sums. Query cost is
/// then set by the number of buckets the window touches, not by occupancy.
#[derive(Debug, Clone, Default)]
struct CellRewards {
    fifo: VecDeque<f64>,
    buckets: BTreeMap<i64, Bucket>,
}

#[derive(Debug, Clone)]
struct Bucket {
    center: f64,
    /// Sorted members as `[x, c1, c2, c3]`, where `ck` is the running sum of
    /// `(x - center)^k` up to and including this member.
    entries: Vec<[f64; 4]>,
}

impl Bucket {
    fn new(center: f64) -> Self {
        Self {
            center,
            entries: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.entries.len()
    }

    fn value(&self, i: usize) -> f64 {
        self.entries[i][0]
    }

    fn position(&self, x: f64) -> usize {
        self.entries.partition_point(|e| e[0] < x)
    }

    fn refresh_from(&mut self, pos: usize) {
        let mut acc = if pos == 0 {
            [0.0; 3]
        } else {
            let p = &self.entries[pos - 1];
            [p[1], p[2], p[3]]
        };
        for e in &mut self.entries[pos..] {
            let d = e[0] - self.center;
            acc[0] += d;
            acc[1] += d * d;
            acc[2] += d * d * d;
            e[1] = acc[0];
            e[2] = acc[1];
            e[3] = acc[2];
        }
    }

    fn add(&mut self, x: f64) {
        let pos = self.position(x);
        self.entries.insert(pos, [x, 0.0, 0.0, 0.0]);
        self.refresh_from(pos);
    }

    fn remove(&mut self, x: f64) -> bool {
        let start = self.position(x);
        let Some(off) = self.entries[start..]
            .iter()
            .take_while(|e| e[0] <= x)
            .position(|e| e[0].to_bits() == x.to_bits())
        else {
            return false;
        };
        self.entries.remove(start + off);
        self.refresh_from(start + off);
        true
    }

    /// Sum of window masses of members `lo..hi`, which all lie on one piece.
    fn run_sum(&self, lo: usize, hi: usize, r: f64, pieces: &Pieces) -> f64 {
        if lo >= hi {
            return 0.0;
        }
        let d_probe = r - 0.5 * (self.value(lo) + self.value(hi - 1));
        let [p0, p1, p2, p3] = pieces.derivatives(d_probe, r - self.center);
        if p0 == 0.0 && p1 == 0.0 && p2 == 0.0 && p3 == 0.0 {
            return 0.0;
        }
        let end = &self.entries[hi - 1];
        let s = |k: usize| if lo == 0 { end[k] } else { end[k] - self.entries[lo - 1][k] };
        (hi - lo) as f64 * p0 - p1 * s(1) + 0.5 * p2 * s(2) - p3 * s(3) / 6.0
    }
}

/// First index whose value is not below `x`. Branch-free so the search over a
/// bucket's handful of members does not stall on mispredictions.
fn lower_bound(entries: &[[f64; 4]], x: f64) -> usize {
    if entries.is_empty() {
        return 0;
    }
    let mut base = 0;
    let mut size = entries.len();
    while size > 1 {
        let half = size / 2;
        base = if entries[base + half][0] < x { base + half } else { base };
        size -= half;
    }
    base + usize::from(entries[base][0] < x)
}

/// Per-query constants of the window mass pieces.
struct Pieces {
    h: f64,
    beta: f64,
    norm: f64,
    inv_h: f64,
    inv_h3: f64,
}

impl Pieces {
    fn new(h: f64, beta: f64, norm: f64) -> Self {
        Self {
            h,
            beta,
            norm,
            inv_h: 1.0 / h,
            inv_h3: 1.0 / (h * h * h),
        }
    }

    /// Antiderivative of the kernel and its first three derivatives at `u`.
    fn g(&self, u: f64) -> [f64; 4] {
        let u2 = u * u;
        [
            self.norm * (u * self.inv_h - u2 * u * self.inv_h3 / 3.0),
            self.norm * (self.inv_h - u2 * self.inv_h3),
            -2.0 * self.norm * u * self.inv_h3,
            -2.0 * self.norm * self.inv_h3,
        ]
    }

    /// Value and first three derivatives, at offset `d`, of the cubic piece of
    /// the window mass that contains `d_probe`.
    fn derivatives(&self, d_probe: f64, d: f64) -> [f64; 4] {
        let (h, beta) = (self.h, self.beta);
        if d_probe - beta >= h || d_probe + beta <= -h {
            return [0.0; 4];
        }
        let full = self.norm * 2.0 / 3.0;
        let upper = if d_probe + beta >= h {
            [full, 0.0, 0.0, 0.0]
        } else {
            self.g(d + beta)
        };
        let lower = if d_probe - beta <= -h {
            [-full, 0.0, 0.0, 0.0]
        } else {
            self.g(d - beta)
        };
        [
            upper[0] - lower[0],
            upper[1] - lower[1],
            upper[2] - lower[2],
            upper[3] - lower[3],
        ]
    }
}

impl CellRewards {
    fn key(r: f64, width: f64) -> i64 {
        (r / width).floor() as i64
    }

    fn push(&mut self, r: f64, width: f64) {
        self.fifo.push_back(r);
        let key = Self::key(r, width);
        self.buckets
            .entry(key)
            .or_insert_with(|| Bucket::new((key as f64 + 0.5) * width))
            .add(r);
    }

    fn remove_from_index(&mut self, r: f64, width: f64) -> bool {
        let key = Self::key(r, width);
        let Some(b) = self.buckets.get_mut(&key) else {
            return false;
        };
        let removed = b.remove(r);
        if b.len() == 0 {
            self.buckets.remove(&key);
        }
        removed
    }

    /// Unscaled sum of window masses of all members around `r`.
    fn window_sum(&self, r: f64, h: f64, beta: f64, width: f64) -> f64 {
        let pieces = Pieces::new(h, beta, Epanechnikov::STANDARD.norm);
        let reach = beta + h;
        // Member values where the window mass switches cubic piece.
        let mut breaks = [r - reach, r - beta + h, r + beta - h, r + reach];
        breaks.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for b in self
            .buckets
            .range(Self::key(r - reach, width)..=Self::key(r + reach, width))
            .map(|(_, b)| b)
        {
            let n = b.len();
            let mut lo = 0;
            for &x in &breaks {
                // Most breakpoints miss a given bucket; only search the ones inside it.
                let cut = if lo == n || x <= b.value(lo) {
                    lo
                } else if x > b.value(n - 1) {
                    n
                } else {
                    lo + lower_bound(&b.entries[lo..], x)
                };
                total += b.run_sum(lo, cut, r, &pieces);
                lo = cut;
            }
            total += b.run_sum(lo, n, r, &pieces);
        }
        total
    }
}

/// Abstract cell -> rewards of the transitions currently stored for it.
///
/// Rewards are kept in insertion order per cell. Only visited cells exist.
#[derive(Debug, Clone)]
pub struct RewardLedger {
    cells: HashMap<AbstractStateId, CellRewards>,
    bucket_width: f64,
    total: usize,
}

impl Default for RewardLedger {
    fn default() -> Self {
        Self::for_config(&GateConfig::default())
    }
}

impl RewardLedger {
    /// `bucket_width` only affects speed. About `h + beta` keeps the number of
    /// buckets a query touches small and steady as cells fill up.
    pub fn new(bucket_width: f64) -> Self {
        assert!(bucket_width > 0.0 && bucket_width.is_finite());
        Self {
            cells: HashMap::new(),
            bucket_width,
            total: 0,
        }
    }

    pub fn for_config(cfg: &GateConfig) -> Self {
        Self::new(cfg.bandwidth + cfg.beta)
    }

    pub fn count(&self, cell: &AbstractStateId) -> usize {
        self.cells.get(cell).map_or(0, |c| c.fifo.len())
    }

    /// Total number of rewards over all cells.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Rewards of `cell` in insertion order.
    pub fn rewards(&self, cell: &AbstractStateId) -> Vec<f64> {
        self.cells
            .get(cell)
            .map(|c| c.fifo.iter().copied().collect())
            .unwrap_or_default()
    }

    /// Cells in ascending order with their rewards in insertion order.
    pub fn sorted_cells(&self) -> Vec<(&AbstractStateId, Vec<f64>)> {
        let mut out: Vec<_> = self
            .cells
            .iter()
            .map(|(id, c)| (id, c.fifo.iter().copied().collect::<Vec<_>>()))
            .collect();
        out.sort_by(|a, b| a.0.cmp(b.0));
        out
    }

    pub fn push(&mut self, cell: AbstractStateId, r: f64) {
        self.cells
            .entry(cell)
            .or_default()
            .push(r, self.bucket_width);
        self.total += 1;
    }

    /// Removes one occurrence of `r` from `cell`. Returns whether one was found.
    pub fn remove_one(&mut self, cell: &AbstractStateId, r: f64) -> bool {
        let Some(c) = self.cells.get_mut(cell) else {
            return false;
        };
        let Some(pos) = c.fifo.iter().position(|x| x.to_bits() == r.to_bits()) else {
            return false;
        };
        c.fifo.remove(pos);
        c.remove_from_index(r, self.bucket_width);
        if c.fifo.is_empty() {
            self.cells.remove(cell);
        }
        self.total -= 1;
        true
    }

    /// Removes the oldest reward of `cell`.
    pub fn pop_oldest(&mut self, cell: &AbstractStateId) -> Option<f64> {
        let c = self.cells.get_mut(cell)?;
        let r = c.fifo.pop_front()?;
        c.remove_from_index(r, self.bucket_width);
        if c.fifo.is_empty() {
            self.cells.remove(cell);
        }
        self.total -= 1;
        Some(r)
    }

    /// RDE of `r` against the rewards stored for `cell`.
    pub fn rde(&self, cell: &AbstractStateId, r: f64, cfg: &GateConfig) -> f64 {
        let Some(c) = self.cells.get(cell) else {
            return 0.0;
        };
        let raw = c.window_sum(r, cfg.bandwidth, cfg.beta, self.bucket_width);
        let value = raw * cfg.scale(c.fifo.len());
        match cfg.mode {
            // Rounding in the power sums can push a full window a hair past 1.
            DensityMode::Normalized => value.clamp(0.0, 1.0),
            DensityMode::Literal => value.max(0.0),
        }
    }
}

impl PartialEq for RewardLedger {
    fn eq(&self, other: &Self) -> bool {
        self.total == other.total && self.sorted_cells() == other.sorted_cells()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(i: u32) -> AbstractStateId {
        AbstractStateId(vec![i])
    }

    #[test]
    fn kernel_values() {
        assert!((kernel_eval(0.0, 0.2) - 3.75).abs() < 1e-12);
        assert_eq!(kernel_eval(0.2, 0.2), 0.0);
        assert_eq!(kernel_eval(0.3, 0.2), 0.0);
        let mass = fac_oracles::adaptive_simpson(&|u| kernel_eval(u, 0.2), -0.2, 0.2, 1e-13);
        assert!((mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn kde_examples() {
        assert_eq!(kde_density(0.0, &[], 0.2), 0.0);
        assert!((kde_density(0.0, &[0.0], 0.2) - 3.75).abs() < 1e-12);
        assert_eq!(kde_density(0.2, &[0.0, 0.4], 0.2), 0.0);
    }

    #[test]
    fn rde_examples() {
        let cfg = GateConfig::default();
        assert_eq!(rde(0.0, &[], &cfg), 0.0);
        assert!((rde(0.0, &[0.0], &cfg) - 1.0).abs() < 1e-12);
        assert!((rde(0.3, &[0.0], &cfg) - 0.15625).abs() < 1e-12);
    }

    #[test]
    fn literal_mode_is_unnormalized() {
        let cfg = GateConfig {
            mode: DensityMode::Literal,
            ..GateConfig::default()
        };
        assert!((rde(0.0, &[0.0, 0.0, 0.0], &cfg) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn dynamic_epsilon_examples() {
        let cfg = GateConfig::default();
        assert_eq!(dynamic_epsilon(&cfg, 0), 0.2);
        assert!((dynamic_epsilon(&cfg, 100_000) - 0.073_575_888_234_288_47).abs() < 1e-12);
        assert!((dynamic_epsilon(&cfg, 200_000) - 0.027_067_056_647_322_54).abs() < 1e-12);
    }

    #[test]
    fn gate_examples() {
        let cfg = GateConfig::default();
        let mut ledger = RewardLedger::for_config(&cfg);
        assert_eq!(
            gate_decision(0.0, &cell(0), &ledger, &cfg),
            GateDecision::Accept { rde: 0.0 }
        );
        ledger.push(cell(0), 0.0);
        let d = gate_decision(0.0, &cell(0), &ledger, &cfg);
        assert!(!d.is_accept());
        assert!((d.rde() - 1.0).abs() < 1e-12);
        let d = gate_decision(0.3, &cell(0), &ledger, &cfg);
        assert!(d.is_accept());
        assert!((d.rde() - 0.15625).abs() < 1e-12);
    }

    #[test]
    fn ledger_matches_direct_sum() {
        let cfg = GateConfig::default();
        let mut ledger = RewardLedger::for_config(&cfg);
        let mut list = Vec::new();
        // Deterministic spread with clusters so buckets hold several members.
        for i in 0..400 {
            let x = ((i * 7919) % 1000) as f64 / 1000.0 * 3.0 - 1.5;
            let x = if i % 3 == 0 { (x * 10.0).round() / 10.0 } else { x };
            ledger.push(cell(1), x);
            list.push(x);
        }
        for j in 0..300 {
            let r = -2.0 + j as f64 * 0.0137;
            let a = ledger.rde(&cell(1), r, &cfg);
            let b = rde(r, &list, &cfg);
            assert!((a - b).abs() < 1e-12, "r={r}: {a} vs {b}");
        }
    }

    #[test]
    fn ledger_fifo_and_removal() {
        let mut ledger = RewardLedger::default();
        ledger.push(cell(0), 1.0);
        ledger.push(cell(0), 2.0);
        ledger.push(cell(1), 3.0);
        assert_eq!(ledger.total(), 3);
        assert_eq!(ledger.pop_oldest(&cell(0)), Some(1.0));
        assert!(ledger.remove_one(&cell(1), 3.0));
        assert!(!ledger.remove_one(&cell(1), 3.0));
        assert_eq!(ledger.total(), 1);
        assert_eq!(ledger.cell_count(), 1);
        assert_eq!(ledger.rewards(&cell(0)), vec![2.0]);
    }

    #[test]
    fn config_validation() {
        assert!(GateConfig::default().validate().is_ok());
        let bad = GateConfig {
            epsilon: 1.0,
            ..GateConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = GateConfig {
            bandwidth: 0.0,
            ..GateConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
