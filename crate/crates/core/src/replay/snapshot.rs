//! Binary buffer snapshots (`.facb`).
//!
//! Layout, all little-endian:
//!
//! ```text
//! "FACB" | version u32 | p u32 | q u32 | capacity u64 | count u64 | k u32
//! kappa u32*k | lower f64*k | upper f64*k | mu u32*k
//! gate tag u8 (0 plain, 1 frugal)
//!   [frugal] epsilon f64 | eta f64 | beta f64 | bandwidth f64 | mode u8
//! inserted u64 | rejected u64 | evicted u64
//! count * (s f64*p | a f64*q | r f64 | s' f64*p | done u8)
//!   [frugal] cells u64, then per cell: id u32*k | n u64 | rewards f64*n
//! crc32 u32 over every preceding byte
//! ```
//!
//! `k = 0` means no partition has been installed yet.

use std::collections::VecDeque;
use std::path::Path;

use super::{FrugalBuffer, PlainBuffer, Transition};
use crate::binio::{read_file, FrameReader, FrameWriter};
use crate::density::{DensityMode, GateConfig, RewardLedger};
use crate::error::{FacError, Result};
use crate::partition::{AbstractStateId, PartitionSpec};

const MAGIC: &[u8; 4] = b"FACB";
const VERSION: u32 = 1;

const TAG_PLAIN: u8 = 0;
const TAG_FRUGAL: u8 = 1;

/// A buffer read back from a snapshot.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyBuffer {
    Plain(PlainBuffer),
    Frugal(FrugalBuffer),
}

impl AnyBuffer {
    pub fn len(&self) -> usize {
        match self {
            AnyBuffer::Plain(b) => b.storage.len(),
            AnyBuffer::Frugal(b) => b.storage.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct Header {
    p: usize,
    q: usize,
    capacity: usize,
    count: usize,
}

fn write_header(w: &mut FrameWriter, h: &Header, spec: Option<&PartitionSpec>) {
    w.u32(h.p as u32);
    w.u32(h.q as u32);
    w.u64(h.capacity as u64);
    w.u64(h.count as u64);
    match spec {
        None => w.u32(0),
        Some(spec) => {
            w.u32(spec.kappa().len() as u32);
            for &k in spec.kappa() {
                w.u32(k as u32);
            }
            w.f64s(spec.lower());
            w.f64s(spec.upper());
            for &m in spec.mu() {
                w.u32(m);
            }
        }
    }
}

fn write_transitions<'a>(w: &mut FrameWriter, ts: impl Iterator<Item = &'a Transition>) {
    for t in ts {
        w.f64s(&t.s);
        w.f64s(&t.a);
        w.f64(t.r);
        w.f64s(&t.s_next);
        w.u8(t.done as u8);
    }
}

fn read_transitions(r: &mut FrameReader, h: &Header) -> Result<VecDeque<Transition>> {
    let record = 8 * (2 * h.p + h.q + 1) + 1;
    r.ensure(h.count, record)?;
    let mut out = VecDeque::with_capacity(h.count);
    for _ in 0..h.count {
        let s = r.f64s(h.p)?;
        let a = r.f64s(h.q)?;
        let reward = r.f64()?;
        let s_next = r.f64s(h.p)?;
        let done = match r.u8()? {
            0 => false,
            1 => true,
            other => return Err(FacError::Format(format!("bad done flag {other}"))),
        };
        out.push_back(Transition {
            s,
            a,
            r: reward,
            s_next,
            done,
        });
    }
    Ok(out)
}

impl PlainBuffer {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = FrameWriter::new(MAGIC, VERSION);
        let h = Header {
            p: self.state_dim,
            q: self.action_dim,
            capacity: self.capacity,
            count: self.storage.len(),
        };
        write_header(&mut w, &h, None);
        w.u8(TAG_PLAIN);
        w.u64(self.inserted);
        w.u64(0);
        w.u64(self.inserted - self.storage.len() as u64);
        write_transitions(&mut w, self.storage.iter());
        w.finish()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

impl FrugalBuffer {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = FrameWriter::new(MAGIC, VERSION);
        let h = Header {
            p: self.state_dim,
            q: self.action_dim,
            capacity: self.capacity,
            count: self.storage.len(),
        };
        write_header(&mut w, &h, self.spec.as_ref());
        w.u8(TAG_FRUGAL);
        w.f64(self.cfg.epsilon);
        w.f64(self.cfg.eta);
        w.f64(self.cfg.beta);
        w.f64(self.cfg.bandwidth);
        w.u8(self.cfg.mode.tag());
        w.u64(self.inserted);
        w.u64(self.rejected);
        w.u64(self.evicted);
        write_transitions(&mut w, self.storage.iter());
        let cells = self.ledger.sorted_cells();
        w.u64(cells.len() as u64);
        for (id, rewards) in cells {
            for &c in id.cell() {
                w.u32(c);
            }
            w.u64(rewards.len() as u64);
            w.f64s(&rewards);
        }
        w.finish()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

pub fn load_snapshot(path: &Path) -> Result<AnyBuffer> {
    from_bytes(&read_file(path)?)
}

pub fn from_bytes(bytes: &[u8]) -> Result<AnyBuffer> {
    let mut r = FrameReader::open(bytes, MAGIC, VERSION)?;
    let p = r.u32()? as usize;
    let q = r.u32()? as usize;
    let capacity = r.u64()? as usize;
    let count = r.u64()? as usize;
    if capacity == 0 || count > capacity {
        return Err(FacError::Format(format!(
            "count {count} does not fit capacity {capacity}"
        )));
    }
    let k = r.u32()? as usize;
    r.ensure(k, 24)?;
    let spec = if k == 0 {
        None
    } else {
        let kappa = (0..k).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let lower = r.f64s(k)?;
        let upper = r.f64s(k)?;
        let mu = (0..k).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        Some(
            PartitionSpec::new(kappa, lower, upper, mu)
                .map_err(|e| FacError::Format(format!("bad partition: {e}")))?,
        )
    };
    let h = Header {
        p,
        q,
        capacity,
        count,
    };
    let tag = r.u8()?;
    let out = match tag {
        TAG_PLAIN => {
            if spec.is_some() {
                return Err(FacError::Format("plain buffer with a partition".into()));
            }
            let inserted = r.u64()?;
            let _rejected = r.u64()?;
            let _evicted = r.u64()?;
            let storage = read_transitions(&mut r, &h)?;
            AnyBuffer::Plain(PlainBuffer {
                capacity,
                state_dim: p,
                action_dim: q,
                storage,
                inserted,
            })
        }
        TAG_FRUGAL => {
            let epsilon = r.f64()?;
            let eta = r.f64()?;
            let beta = r.f64()?;
            let bandwidth = r.f64()?;
            let mode = DensityMode::from_tag(r.u8()?)
                .ok_or_else(|| FacError::Format("unknown density mode".into()))?;
            let cfg = GateConfig {
                epsilon,
                eta,
                beta,
                bandwidth,
                mode,
            };
            cfg.validate()
                .map_err(|e| FacError::Format(format!("bad gate config: {e}")))?;
            let inserted = r.u64()?;
            let rejected = r.u64()?;
            let evicted = r.u64()?;
            let storage = read_transitions(&mut r, &h)?;
            let n_cells = r.u64()? as usize;
            r.ensure(n_cells, 4 * k + 8)?;
            let mut ledger = RewardLedger::for_config(&cfg);
            for _ in 0..n_cells {
                let id = (0..k).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
                let n = r.u64()? as usize;
                let id = AbstractStateId(id);
                for x in r.f64s(n)? {
                    ledger.push(id.clone(), x);
                }
            }
            let cells = match &spec {
                None => VecDeque::new(),
                Some(spec) => storage
                    .iter()
                    .map(|t| spec.map_state(&t.s))
                    .collect::<Result<VecDeque<_>>>()
                    .map_err(|e| FacError::Format(format!("stored state does not map: {e}")))?,
            };
            if spec.is_some() && ledger.total() != storage.len() {
                return Err(FacError::Format(format!(
                    "ledger holds {} rewards for {} transitions",
                    ledger.total(),
                    storage.len()
                )));
            }
            AnyBuffer::Frugal(FrugalBuffer {
                capacity,
                state_dim: p,
                action_dim: q,
                storage,
                cells,
                ledger,
                spec,
                cfg,
                inserted,
                rejected,
                evicted,
            })
        }
        other => return Err(FacError::Format(format!("unknown buffer kind {other}"))),
    };
    r.finish()?;
    Ok(out)
}
