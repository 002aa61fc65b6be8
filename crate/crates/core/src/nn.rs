//! Feed-forward neural-network predictor.
//!
//! A real-valued two-layer network with softmax hidden activation,
//!
//!   w_nn(c) = A2 softmax(A1 c + b1) + b2,
//!
//! whose output stacks the real over the imaginary part of a length-M
//! prediction filter. Initializing (A1, b1) from the Structured Predictor and
//! A2 from the stacked real/imaginary parts of its combination matrix (with
//! b2 = 0) reproduces the Structured Predictor exactly; training then
//! compensates the diagonalization and discrete-prior approximations.
//! Networks are trained per SNR point with analytic gradients and
//! adaptive-moment steps.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::channel::add_awgn;
use crate::error::{Error, Result};
use crate::grid::{chat, StructuredParams, TransformQ};
use crate::linalg::softmax;
use crate::opt::Adam;
use crate::seed;
use crate::snapshot::{Snapshot, SnapshotKind};
use crate::{CVector, Complex64, RMatrix, RVector};

/// The four trainable blocks. A1 is N_grid x K, b1 length N_grid, A2 is
/// 2M x N_grid (real part stacked over imaginary part), b2 length 2M.
#[derive(Debug, Clone, PartialEq)]
pub struct NnParams {
    pub a1: RMatrix,
    pub b1: RVector,
    pub a2: RMatrix,
    pub b2: RVector,
}

impl NnParams {
    pub fn n_grid(&self) -> usize {
        self.a1.nrows()
    }

    pub fn k(&self) -> usize {
        self.a1.ncols()
    }

    pub fn m(&self) -> usize {
        self.a2.nrows() / 2
    }

    pub fn all_finite(&self) -> bool {
        self.a1.iter().all(|v| v.is_finite())
            && self.b1.iter().all(|v| v.is_finite())
            && self.a2.iter().all(|v| v.is_finite())
            && self.b2.iter().all(|v| v.is_finite())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let snap = Snapshot {
            kind: SnapshotKind::NnPredictor,
            m: self.m() as u32,
            k: self.k() as u32,
            n_grid: self.n_grid() as u32,
            blocks: [
                row_major(&self.a1),
                self.b1.iter().copied().collect(),
                row_major(&self.a2),
                self.b2.iter().copied().collect(),
            ],
        };
        snap.write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let snap = Snapshot::read(path)?;
        if snap.kind != SnapshotKind::NnPredictor {
            return Err(Error::decode(6, "snapshot is not an NN predictor"));
        }
        let (m, k, n) = (snap.m as usize, snap.k as usize, snap.n_grid as usize);
        Ok(Self {
            a1: from_row_major(n, k, &snap.blocks[0]),
            b1: RVector::from_vec(snap.blocks[1].clone()),
            a2: from_row_major(2 * m, n, &snap.blocks[2]),
            b2: RVector::from_vec(snap.blocks[3].clone()),
        })
    }
}

fn row_major(m: &RMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> RMatrix {
    RMatrix::from_fn(rows, cols, |r, c| data[r * cols + c])
}

/// Gradients, one block per parameter block.
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub a1: RMatrix,
    pub b1: RVector,
    pub a2: RMatrix,
    pub b2: RVector,
}

/// A1 and b1 carry over unchanged; A2 splits into its real and imaginary
/// parts; b2 starts at zero.
pub fn init_from_structured(params: &StructuredParams) -> NnParams {
    let n = params.n_grid();
    let m = params.m();
    let a2 = RMatrix::from_fn(2 * m, n, |r, c| {
        if r < m {
            params.a2[(r, c)].re
        } else {
            params.a2[(r - m, c)].im
        }
    });
    NnParams {
        a1: params.a1.clone(),
        b1: params.b.clone(),
        a2,
        b2: RVector::zeros(2 * m),
    }
}

/// w_nn = A2 softmax(A1 c + b1) + b2.
pub fn forward(p: &NnParams, c: &RVector) -> RVector {
    let gate = softmax(&(&p.a1 * c + &p.b1));
    &p.a2 * gate + &p.b2
}

/// Recombines the forward output into a complex filter and applies it to y
/// with a plain (unconjugated) inner product.
pub fn predict(p: &NnParams, c: &RVector, y: &CVector) -> Complex64 {
    let w = forward(p, c);
    let m = p.m();
    let mut acc = Complex64::default();
    for i in 0..m {
        acc += Complex64::new(w[i], w[m + i]) * y[i];
    }
    acc
}

/// One training sample: network input, noisy observation, clean target.
#[derive(Debug, Clone)]
pub struct Sample {
    pub c: RVector,
    pub y: CVector,
    pub target: Complex64,
}

/// Mean of |target - prediction|^2 over the batch.
pub fn loss(p: &NnParams, batch: &[Sample]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let total: f64 = batch
        .iter()
        .map(|s| (predict(p, &s.c, &s.y) - s.target).norm_sqr())
        .sum();
    Ok(total / batch.len() as f64)
}

/// Batch loss and its analytic gradient, with the softmax Jacobian applied
/// exactly.
pub fn loss_and_gradient(p: &NnParams, batch: &[Sample]) -> Result<(f64, GradientSet)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let m = p.m();
    let mut g = GradientSet {
        a1: RMatrix::zeros(p.n_grid(), p.k()),
        b1: RVector::zeros(p.n_grid()),
        a2: RMatrix::zeros(2 * m, p.n_grid()),
        b2: RVector::zeros(2 * m),
    };
    let mut total_loss = 0.0;
    for s in batch {
        let gate = softmax(&(&p.a1 * &s.c + &p.b1));
        let w = &p.a2 * &gate + &p.b2;
        let mut err = -s.target;
        for i in 0..m {
            err += Complex64::new(w[i], w[m + i]) * s.y[i];
        }
        total_loss += err.norm_sqr();

        // d|err|^2 / dw: real half couples to Re(conj(err) y), imaginary half
        // to -Im(conj(err) y).
        let mut dw = RVector::zeros(2 * m);
        for i in 0..m {
            let ey = err.conj() * s.y[i];
            dw[i] = 2.0 * ey.re;
            dw[m + i] = -2.0 * ey.im;
        }
        g.b2 += &dw;
        g.a2 += &dw * gate.transpose();
        let dgate = p.a2.transpose() * &dw;
        let inner = gate.dot(&dgate);
        let dz = gate.component_mul(&dgate.map(|v| v - inner));
        g.b1 += &dz;
        g.a1 += &dz * s.c.transpose();
    }
    let scale = 1.0 / batch.len() as f64;
    g.a1 *= scale;
    g.b1 *= scale;
    g.a2 *= scale;
    g.b2 *= scale;
    Ok((total_loss * scale, g))
}

/// Analytic batch gradient of [`loss`].
pub fn backward(p: &NnParams, batch: &[Sample]) -> Result<GradientSet> {
    loss_and_gradient(p, batch).map(|(_, g)| g)
}

/// Training schedule and optimizer settings.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub shuffle_seed: u64,
    /// Stop early when the relative epoch-loss change stays below this over
    /// `plateau_window` consecutive epochs. `None` disables the check.
    pub plateau_tol: Option<f64>,
    pub plateau_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 50,
            epochs: 20,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            shuffle_seed: 0,
            plateau_tol: None,
            plateau_window: 3,
        }
    }
}

/// Clean observation/target pairs; noise is drawn fresh per epoch.
#[derive(Debug, Clone)]
pub struct TrainItem {
    /// Clean observation in reversed ordering.
    pub obs: CVector,
    pub target: Complex64,
}

/// A training stream: clean items plus the noise model that turns them into
/// network inputs. Mini-batches are regenerated (new noise, reshuffled order)
/// every epoch, deterministically from the seeds.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub items: Vec<TrainItem>,
    pub q: TransformQ,
    pub noise_var: f64,
    pub noise_seed: u64,
}

impl TrainingData {
    fn sample(&self, epoch: u64, index: usize) -> Result<Sample> {
        let item = &self.items[index];
        let y = add_awgn(
            &item.obs,
            self.noise_var,
            seed::derive(self.noise_seed, epoch, index as u64),
        )?;
        let c = chat(&y, &self.q, self.noise_var)?;
        Ok(Sample {
            c,
            y,
            target: item.target,
        })
    }
}

/// Runs the training loop; returns the trained parameters and the epoch-mean
/// loss trace. Zero epochs return the initialization unchanged.
pub fn train(p0: &NnParams, data: &TrainingData, cfg: &TrainConfig) -> Result<(NnParams, Vec<f64>)> {
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be >= 1"));
    }
    if data.items.is_empty() {
        return Err(Error::invalid("no training items"));
    }
    let mut p = p0.clone();
    let mut adam = Adam::new(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..data.items.len()).collect();
    for epoch in 0..cfg.epochs as u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed::derive(cfg.shuffle_seed, 0x5u64, epoch));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Sample> = chunk
                .iter()
                .map(|&i| data.sample(epoch, i))
                .collect::<Result<_>>()?;
            let (l, g) = loss_and_gradient(&p, &batch)?;
            adam.step(
                &mut [
                    p.a1.as_mut_slice(),
                    p.b1.as_mut_slice(),
                    p.a2.as_mut_slice(),
                    p.b2.as_mut_slice(),
                ],
                &[
                    g.a1.as_slice(),
                    g.b1.as_slice(),
                    g.a2.as_slice(),
                    g.b2.as_slice(),
                ],
            );
            if !p.all_finite() {
                return Err(Error::invalid("training produced non-finite parameters"));
            }
            epoch_loss += l;
            batches += 1;
        }
        trace.push(epoch_loss / batches as f64);
        if let Some(tol) = cfg.plateau_tol {
            let w = cfg.plateau_window;
            if trace.len() > w {
                let old = trace[trace.len() - 1 - w];
                let new = trace[trace.len() - 1];
                if ((old - new) / old.max(f64::MIN_POSITIVE)).abs() < tol {
                    break;
                }
            }
        }
    }
    Ok((p, trace))
}
