//! Little-endian record framing shared by the buffer snapshot and the policy
//! checkpoint: a 4-byte magic, a `u32` version, the body, and a trailing
//! CRC32 of every preceding byte.

use std::fs;
use std::io::{self, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{FacError, Result};

pub(crate) struct FrameWriter {
    buf: Vec<u8>,
}

impl FrameWriter {
    pub fn new(magic: &[u8; 4], version: u32) -> Self {
        let mut w = Self { buf: Vec::new() };
        w.buf.extend_from_slice(magic);
        w.u32(version);
        w
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.write_u32::<LittleEndian>(v).unwrap();
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.write_u64::<LittleEndian>(v).unwrap();
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.write_f64::<LittleEndian>(v).unwrap();
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }

    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.u32(crc);
        self.buf
    }
}

pub(crate) struct FrameReader<'a> {
    all: &'a [u8],
    rest: &'a [u8],
}

fn truncated(e: io::Error) -> FacError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        FacError::Format("file is truncated".into())
    } else {
        FacError::Io(e)
    }
}

impl<'a> FrameReader<'a> {
    /// Checks magic and version. The checksum is verified by [`Self::finish`]
    /// once the body has been parsed, so truncation reports as a format error.
    pub fn open(bytes: &'a [u8], magic: &[u8; 4], version: u32) -> Result<Self> {
        let mut r = Self {
            all: bytes,
            rest: bytes,
        };
        let mut m = [0u8; 4];
        r.rest.read_exact(&mut m).map_err(truncated)?;
        if &m != magic {
            return Err(FacError::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&m),
                String::from_utf8_lossy(magic)
            )));
        }
        let v = r.u32()?;
        if v != version {
            return Err(FacError::Format(format!(
                "unsupported version {v}, expected {version}"
            )));
        }
        Ok(r)
    }

    pub fn u8(&mut self) -> Result<u8> {
        self.rest.read_u8().map_err(truncated)
    }

    pub fn u32(&mut self) -> Result<u32> {
        self.rest.read_u32::<LittleEndian>().map_err(truncated)
    }

    pub fn u64(&mut self) -> Result<u64> {
        self.rest.read_u64::<LittleEndian>().map_err(truncated)
    }

    pub fn f64(&mut self) -> Result<f64> {
        self.rest.read_f64::<LittleEndian>().map_err(truncated)
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        self.ensure(n, 8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    /// Fails early when `count` records of `size` bytes cannot possibly fit,
    /// so a damaged count never triggers a huge allocation.
    pub fn ensure(&self, count: usize, size: usize) -> Result<()> {
        match count.checked_mul(size) {
            Some(n) if n <= self.rest.len() => Ok(()),
            _ => Err(FacError::Format("file is truncated".into())),
        }
    }

    pub fn finish(mut self) -> Result<()> {
        let body_len = self.all.len() - self.rest.len();
        let stored = self.u32()?;
        if !self.rest.is_empty() {
            return Err(FacError::Format(format!(
                "{} trailing bytes after checksum",
                self.rest.len()
            )));
        }
        let computed = crc32fast::hash(&self.all[..body_len]);
        if stored != computed {
            return Err(FacError::CorruptSnapshot { stored, computed });
        }
        Ok(())
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    Ok(fs::read(path)?)
}
