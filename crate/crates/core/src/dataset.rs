//! Channel-vector file ingestion, normalization, windowing and batching.
//!
//! The exchange format is deliberately minimal so exports from external
//! ray-tracing datasets can be converted with a few lines of any language:
//!
//! ```text
//! offset 0   magic   "CHN1" (4 ASCII bytes)
//! offset 4   version u16 LE (currently 1)
//! offset 6   count   u32 LE (number of channel vectors)
//! offset 10  dim     u32 LE (entries per vector)
//! offset 14  payload count*dim complex samples, row-major,
//!            each (re f64 LE, im f64 LE)
//! ```
//!
//! Ingested trajectories are globally rescaled to a target mean power,
//! windowed into non-overlapping observation/target groups, and split into
//! reproducible, disjoint train/test batches.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::seed;
use crate::{CMatrix, CVector, Complex64};

pub const MAGIC: [u8; 4] = *b"CHN1";
pub const VERSION: u16 = 1;

/// Writes a count x dim matrix of channel vectors (rows are realizations).
pub fn save_channels(path: &Path, channels: &CMatrix) -> Result<()> {
    let count = channels.nrows();
    let dim = channels.ncols();
    let mut bytes = Vec::with_capacity(14 + 16 * count * dim);
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(count as u32).to_le_bytes());
    bytes.extend_from_slice(&(dim as u32).to_le_bytes());
    for r in 0..count {
        for c in 0..dim {
            let v = channels[(r, c)];
            bytes.extend_from_slice(&v.re.to_le_bytes());
            bytes.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads a channel file back into a count x dim matrix. Decode failures name
/// the byte offset they were detected at.
pub fn load_channels(path: &Path) -> Result<CMatrix> {
    let bytes = fs::read(path)?;
    if bytes.len() < 14 {
        return Err(Error::decode(bytes.len(), "truncated header"));
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::decode(0, "bad magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::decode(4, format!("unsupported version {version}")));
    }
    let count = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let expect = 14 + 16 * count * dim;
    if bytes.len() != expect {
        return Err(Error::decode(
            bytes.len().min(expect),
            format!("payload is {} bytes, expected {expect}", bytes.len()),
        ));
    }
    let mut offset = 14;
    let mut data = Vec::with_capacity(count * dim);
    for _ in 0..count * dim {
        let re = f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
        let im = f64::from_le_bytes(bytes[offset + 8..offset + 16].try_into().unwrap());
        data.push(Complex64::new(re, im));
        offset += 16;
    }
    Ok(CMatrix::from_fn(count, dim, |r, c| data[r * dim + c]))
}

/// Rescales so the empirical mean of ||h||^2 over rows equals `target`.
pub fn normalize(channels: &CMatrix, target: f64) -> Result<CMatrix> {
    if channels.nrows() == 0 {
        return Err(Error::invalid("cannot normalize an empty dataset"));
    }
    if !(target > 0.0) {
        return Err(Error::invalid("normalization target must be > 0"));
    }
    let mean_power: f64 = (0..channels.nrows())
        .map(|r| channels.row(r).norm_squared())
        .sum::<f64>()
        / channels.nrows() as f64;
    if mean_power <= 0.0 {
        return Err(Error::invalid("dataset has zero power"));
    }
    let scale = (target / mean_power).sqrt();
    Ok(channels * Complex64::new(scale, 0.0))
}

/// One windowed observation/target group.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedItem {
    /// Observation in reversed ordering, [h[M-1], ..., h[0]].
    pub obs: CVector,
    /// The coefficient l steps past the observation window.
    pub target: Complex64,
}

/// Cuts a scalar trajectory into non-overlapping groups of M+l consecutive
/// coefficients; the first M (reversed) form the observation, the last one is
/// the target. Remainder coefficients are dropped.
pub fn window_trajectory(coeffs: &[Complex64], obs_len: usize, step: usize) -> Result<Vec<WindowedItem>> {
    if obs_len == 0 || step == 0 {
        return Err(Error::invalid("need M >= 1 and l >= 1"));
    }
    let group = obs_len + step;
    Ok(coeffs
        .chunks_exact(group)
        .map(|chunk| WindowedItem {
            obs: CVector::from_iterator(obs_len, chunk[..obs_len].iter().rev().copied()),
            target: chunk[group - 1],
        })
        .collect())
}

/// Train/test split sizes and the permutation seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_batches: usize,
    pub train_batch_size: usize,
    pub test_batches: usize,
    pub test_batch_size: usize,
    pub split_seed: u64,
}

impl SplitSpec {
    pub fn train_total(&self) -> usize {
        self.train_batches * self.train_batch_size
    }

    pub fn test_total(&self) -> usize {
        self.test_batches * self.test_batch_size
    }
}

/// The training half of a split. Batches are re-drawn per epoch: the epoch
/// shuffle permutes item order (and therefore batch membership) but always
/// covers exactly the same items.
#[derive(Debug, Clone)]
pub struct TrainStream<T> {
    items: Vec<T>,
    batch_size: usize,
    seed: u64,
}

impl<T> TrainStream<T> {
    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Deterministic per-epoch batching.
    pub fn epoch_batches(&self, epoch: u64) -> Vec<Vec<&T>> {
        let mut order: Vec<usize> = (0..self.items.len()).collect();
        let mut rng = ChaCha12Rng::seed_from_u64(seed::derive(self.seed, 0xE, epoch));
        order.shuffle(&mut rng);
        order
            .chunks(self.batch_size)
            .map(|chunk| chunk.iter().map(|&i| &self.items[i]).collect())
            .collect()
    }
}

/// The fixed test half of a split.
#[derive(Debug, Clone)]
pub struct TestStream<T> {
    batches: Vec<Vec<T>>,
}

impl<T> TestStream<T> {
    pub fn batches(&self) -> &[Vec<T>] {
        &self.batches
    }

    pub fn iter_items(&self) -> impl Iterator<Item = &T> {
        self.batches.iter().flatten()
    }

    pub fn total(&self) -> usize {
        self.batches.iter().map(|b| b.len()).sum()
    }
}

/// Randomly assigns items to disjoint train and test sets under a seeded
/// permutation and chunks the test set into fixed batches.
pub fn split_and_batch<T>(
    items: Vec<T>,
    spec: &SplitSpec,
) -> Result<(TrainStream<T>, TestStream<T>)> {
    let needed = spec.train_total() + spec.test_total();
    if spec.train_total() == 0 || spec.test_total() == 0 {
        return Err(Error::invalid("split needs nonzero train and test sizes"));
    }
    if items.len() < needed {
        return Err(Error::invalid(format!(
            "split needs {needed} items, have {}",
            items.len()
        )));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(spec.split_seed);
    order.shuffle(&mut rng);

    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    let train_items: Vec<T> = order[..spec.train_total()]
        .iter()
        .map(|&i| slots[i].take().unwrap())
        .collect();
    let mut test_batches = Vec::with_capacity(spec.test_batches);
    let mut cursor = spec.train_total();
    for _ in 0..spec.test_batches {
        let batch: Vec<T> = order[cursor..cursor + spec.test_batch_size]
            .iter()
            .map(|&i| slots[i].take().unwrap())
            .collect();
        test_batches.push(batch);
        cursor += spec.test_batch_size;
    }
    Ok((
        TrainStream {
            items: train_items,
            batch_size: spec.train_batch_size,
            seed: spec.split_seed,
        },
        TestStream {
            batches: test_batches,
        },
    ))
}
