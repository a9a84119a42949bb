//! Replay buffers: the gated frugal buffer and the plain FIFO baseline.

mod snapshot;

use std::collections::VecDeque;

use rand::Rng;

use crate::density::{gate_decision, GateConfig, RewardLedger};
use crate::error::{FacError, Result};
use crate::partition::{AbstractStateId, PartitionSpec};

pub use snapshot::{load_snapshot, AnyBuffer};

/// One environment step `(s, a, r, s', done)`. `done` marks a true
/// termination; time-limit truncation is not stored as done.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
}

impl Transition {
    fn check(&self, p: usize, q: usize) -> Result<()> {
        if self.s.len() != p || self.s_next.len() != p {
            return Err(FacError::ShapeMismatch {
                expected: p,
                got: if self.s.len() != p { self.s.len() } else { self.s_next.len() },
            });
        }
        if self.a.len() != q {
            return Err(FacError::ShapeMismatch {
                expected: q,
                got: self.a.len(),
            });
        }
        let finite = self.r.is_finite()
            && self.s.iter().chain(&self.a).chain(&self.s_next).all(|x| x.is_finite());
        if !finite {
            return Err(FacError::NonFiniteTransition);
        }
        Ok(())
    }
}

/// Result of offering a transition to a buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct InsertOutcome {
    pub accepted: bool,
    pub rde_value: f64,
    /// Cell the transition maps to; `None` while no partition is installed.
    pub cell: Option<AbstractStateId>,
}

impl InsertOutcome {
    fn unconditional() -> Self {
        Self {
            accepted: true,
            rde_value: 0.0,
            cell: None,
        }
    }
}

/// What the learner needs from a replay buffer.
pub trait ReplayBuffer {
    fn capacity(&self) -> usize;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `i`-th stored transition, oldest first.
    fn get(&self, i: usize) -> &Transition;

    /// Offers one transition to the buffer.
    fn insert(&mut self, t: Transition) -> Result<InsertOutcome>;

    /// `(stored so far, rejected so far)`.
    fn counters(&self) -> (u64, u64);

    /// Called once the state partition exists. Buffers that do not gate
    /// ignore it.
    fn install_partition(&mut self, _spec: PartitionSpec) -> Result<()> {
        Ok(())
    }

    /// `b` uniformly drawn indices, with replacement.
    fn sample_indices<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> Result<Vec<usize>>
    where
        Self: Sized,
    {
        let n = self.len();
        if n == 0 {
            return Err(FacError::EmptyBuffer);
        }
        Ok((0..b).map(|_| rng.random_range(0..n)).collect())
    }

    fn sample_minibatch<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> Result<Vec<&Transition>>
    where
        Self: Sized,
    {
        Ok(self
            .sample_indices(b, rng)?
            .into_iter()
            .map(|i| self.get(i))
            .collect())
    }
}

/// Unconditional FIFO buffer (the ungated baseline).
#[derive(Debug, Clone, PartialEq)]
pub struct PlainBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    storage: VecDeque<Transition>,
    inserted: u64,
}

impl PlainBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            capacity,
            state_dim,
            action_dim,
            storage: VecDeque::with_capacity(capacity.min(1 << 20)),
            inserted: 0,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }
}

impl ReplayBuffer for PlainBuffer {
    fn capacity(&self) -> usize {
        self.capacity
    }

    fn len(&self) -> usize {
        self.storage.len()
    }

    fn get(&self, i: usize) -> &Transition {
        &self.storage[i]
    }

    fn insert(&mut self, t: Transition) -> Result<InsertOutcome> {
        t.check(self.state_dim, self.action_dim)?;
        if self.storage.len() == self.capacity {
            self.storage.pop_front();
        }
        self.storage.push_back(t);
        self.inserted += 1;
        Ok(InsertOutcome::unconditional())
    }

    fn counters(&self) -> (u64, u64) {
        (self.inserted, 0)
    }
}

/// FIFO buffer whose insert path runs the reward-density gate.
///
/// Until a partition is installed every transition is stored. Installing the
/// partition replays the gate over the stored transitions in arrival order,
/// leaving the buffer as if it had gated from the start.
#[derive(Debug, Clone)]
pub struct FrugalBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    storage: VecDeque<Transition>,
    /// Cell of each stored transition, parallel to `storage` once gated.
    cells: VecDeque<AbstractStateId>,
    ledger: RewardLedger,
    spec: Option<PartitionSpec>,
    cfg: GateConfig,
    inserted: u64,
    rejected: u64,
    evicted: u64,
}

impl FrugalBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize, cfg: GateConfig) -> Result<Self> {
        cfg.validate()?;
        if capacity == 0 {
            return Err(FacError::InvalidConfig("buffer capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            state_dim,
            action_dim,
            storage: VecDeque::with_capacity(capacity.min(1 << 20)),
            cells: VecDeque::with_capacity(capacity.min(1 << 20)),
            ledger: RewardLedger::for_config(&cfg),
            spec: None,
            cfg,
            inserted: 0,
            rejected: 0,
            evicted: 0,
        })
    }

    /// Buffer with the gate already active.
    pub fn with_partition(
        capacity: usize,
        state_dim: usize,
        action_dim: usize,
        cfg: GateConfig,
        spec: PartitionSpec,
    ) -> Result<Self> {
        let mut b = Self::new(capacity, state_dim, action_dim, cfg)?;
        b.install_partition(spec)?;
        Ok(b)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn config(&self) -> &GateConfig {
        &self.cfg
    }

    pub fn partition(&self) -> Option<&PartitionSpec> {
        self.spec.as_ref()
    }

    pub fn ledger(&self) -> &RewardLedger {
        &self.ledger
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    pub fn evicted(&self) -> u64 {
        self.evicted
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }

    fn store(&mut self, t: Transition, cell: Option<AbstractStateId>) {
        if self.storage.len() == self.capacity {
            let old = self.storage.pop_front().expect("capacity is positive");
            if let Some(old_cell) = self.cells.pop_front() {
                let r = self.ledger.pop_oldest(&old_cell);
                debug_assert_eq!(r.map(f64::to_bits), Some(old.r.to_bits()));
            }
            self.evicted += 1;
        }
        if let Some(c) = cell {
            self.ledger.push(c.clone(), t.r);
            self.cells.push_back(c);
        }
        self.storage.push_back(t);
        self.inserted += 1;
    }

    fn gate_and_store(&mut self, t: Transition, spec: &PartitionSpec) -> Result<InsertOutcome> {
        let cell = spec.map_state(&t.s)?;
        let decision = gate_decision(t.r, &cell, &self.ledger, &self.cfg);
        let outcome = InsertOutcome {
            accepted: decision.is_accept(),
            rde_value: decision.rde(),
            cell: Some(cell.clone()),
        };
        if decision.is_accept() {
            self.store(t, Some(cell));
        } else {
            self.rejected += 1;
        }
        Ok(outcome)
    }
}

impl ReplayBuffer for FrugalBuffer {
    fn capacity(&self) -> usize {
        self.capacity
    }

    fn len(&self) -> usize {
        self.storage.len()
    }

    fn get(&self, i: usize) -> &Transition {
        &self.storage[i]
    }

    fn insert(&mut self, t: Transition) -> Result<InsertOutcome> {
        t.check(self.state_dim, self.action_dim)?;
        match self.spec.take() {
            None => {
                self.store(t, None);
                Ok(InsertOutcome::unconditional())
            }
            Some(spec) => {
                let out = self.gate_and_store(t, &spec);
                self.spec = Some(spec);
                out
            }
        }
    }

    fn counters(&self) -> (u64, u64) {
        (self.inserted, self.rejected)
    }

    fn install_partition(&mut self, spec: PartitionSpec) -> Result<()> {
        if let Some(&dim) = spec.kappa().iter().find(|&&d| d >= self.state_dim) {
            return Err(FacError::ShapeMismatch {
                expected: self.state_dim,
                got: dim + 1,
            });
        }
        let pending: Vec<Transition> = self.storage.drain(..).collect();
        self.cells.clear();
        self.ledger = RewardLedger::for_config(&self.cfg);
        self.inserted = 0;
        self.rejected = 0;
        self.evicted = 0;
        for t in pending {
            self.gate_and_store(t, &spec)?;
        }
        self.spec = Some(spec);
        Ok(())
    }
}

impl PartialEq for FrugalBuffer {
    fn eq(&self, other: &Self) -> bool {
        self.capacity == other.capacity
            && self.state_dim == other.state_dim
            && self.action_dim == other.action_dim
            && self.storage == other.storage
            && self.cells == other.cells
            && self.ledger == other.ledger
            && self.spec == other.spec
            && self.cfg == other.cfg
            && self.inserted == other.inserted
            && self.rejected == other.rejected
            && self.evicted == other.evicted
    }
}
