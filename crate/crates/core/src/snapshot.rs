//! Trained-parameter snapshot container.
//!
//! Byte layout, all little-endian:
//!
//! ```text
//! offset 0   magic   "MPS1" (4 bytes)
//! offset 4   version u16 (currently 1)
//! offset 6   kind    u16 (1 = NN predictor, 2 = CNN estimator)
//! offset 8   m       u32
//! offset 12  k       u32
//! offset 16  n_grid  u32
//! offset 20  four parameter blocks, f64 values, row-major
//! ```
//!
//! Block shapes are implied by the kind and dimensions, so the payload is a
//! plain concatenation. Round-trips are bit-exact.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MPS1";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotKind {
    NnPredictor,
    CnnEstimator,
}

impl SnapshotKind {
    fn tag(self) -> u16 {
        match self {
            SnapshotKind::NnPredictor => 1,
            SnapshotKind::CnnEstimator => 2,
        }
    }

    fn from_tag(tag: u16) -> Option<Self> {
        match tag {
            1 => Some(SnapshotKind::NnPredictor),
            2 => Some(SnapshotKind::CnnEstimator),
            _ => None,
        }
    }

    /// Lengths of the four blocks for the given dimensions.
    pub fn block_lens(self, m: usize, k: usize, n_grid: usize) -> [usize; 4] {
        match self {
            SnapshotKind::NnPredictor => [n_grid * k, n_grid, 2 * m * n_grid, 2 * m],
            SnapshotKind::CnnEstimator => [k, k, k, k],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub kind: SnapshotKind,
    pub m: u32,
    pub k: u32,
    pub n_grid: u32,
    pub blocks: [Vec<f64>; 4],
}

impl Snapshot {
    pub fn write(&self, path: &Path) -> Result<()> {
        let lens = self
            .kind
            .block_lens(self.m as usize, self.k as usize, self.n_grid as usize);
        for (b, &l) in self.blocks.iter().zip(&lens) {
            if b.len() != l {
                return Err(Error::invalid("snapshot block length does not match dims"));
            }
        }
        let total = 20 + 8 * lens.iter().sum::<usize>();
        let mut bytes = Vec::with_capacity(total);
        bytes.extend_from_slice(&MAGIC);
        bytes.extend_from_slice(&VERSION.to_le_bytes());
        bytes.extend_from_slice(&self.kind.tag().to_le_bytes());
        bytes.extend_from_slice(&self.m.to_le_bytes());
        bytes.extend_from_slice(&self.k.to_le_bytes());
        bytes.extend_from_slice(&self.n_grid.to_le_bytes());
        for block in &self.blocks {
            for v in block {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::write(path, bytes)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        if bytes.len() < 20 {
            return Err(Error::decode(bytes.len(), "truncated header"));
        }
        if bytes[0..4] != MAGIC {
            return Err(Error::decode(0, "bad magic"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::decode(4, format!("unsupported version {version}")));
        }
        let tag = u16::from_le_bytes([bytes[6], bytes[7]]);
        let kind = SnapshotKind::from_tag(tag)
            .ok_or_else(|| Error::decode(6, format!("unknown kind tag {tag}")))?;
        let m = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let k = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        let n_grid = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
        let lens = kind.block_lens(m as usize, k as usize, n_grid as usize);
        let expect = 20 + 8 * lens.iter().sum::<usize>();
        if bytes.len() != expect {
            return Err(Error::decode(
                bytes.len().min(expect),
                format!("payload is {} bytes, expected {expect}", bytes.len()),
            ));
        }
        let mut offset = 20;
        let mut blocks: [Vec<f64>; 4] = Default::default();
        for (slot, &len) in blocks.iter_mut().zip(&lens) {
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                data.push(f64::from_le_bytes(
                    bytes[offset..offset + 8].try_into().unwrap(),
                ));
                offset += 8;
            }
            *slot = data;
        }
        Ok(Self {
            kind,
            m,
            k,
            n_grid,
            blocks,
        })
    }
}
