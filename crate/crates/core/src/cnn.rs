//! Convolutional channel estimator for uniform linear arrays.
//!
//! Single-cluster ULA covariances are (approximately) diagonalized by the DFT
//! transform Q, and because a DoA shift circularly shifts the spectrum, all
//! per-sample Wiener filters are shifts of one shared atom w0. The
//! assumption-derived estimator is then
//!
//!   w_hat(c) = w0 * softmax(w0~ * c + b),   h_hat = Q^H diag(w_hat) Q y,
//!
//! with `*` circular convolution, w0~ the index-reversal of w0, and
//! c = |Qy|^2 / sigma^2. The trainable variant replaces (w0, w0~, b, 0) by
//! free kernels and biases (a1, a2, b1, b2) and minimizes the MSE of the
//! reconstructed channel by stochastic gradient descent, per SNR point.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::f64::consts::TAU;

use crate::channel::add_awgn;
use crate::error::{Error, Result};
use crate::grid::{chat, decompose_matrix, TransformQ};
use crate::linalg::softmax;
use crate::opt::Adam;
use crate::seed;
use crate::snapshot::{Snapshot, SnapshotKind};
use crate::{CMatrix, CVector, Complex64, RVector};

/// Per-sample spectra and Wiener weights of a single-cluster DoA grid.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    spectra: Vec<RVector>,
    filters: Vec<RVector>,
}

impl SpectralGrid {
    pub fn spectra(&self) -> &[RVector] {
        &self.spectra
    }

    pub fn filters(&self) -> &[RVector] {
        &self.filters
    }

    pub fn k(&self) -> usize {
        self.spectra.len()
    }
}

/// Rank-one steering covariance a(xi) a(xi)^H with a_m = exp(j 2 pi m xi),
/// xi the spatial frequency of a half-wavelength ULA (xi = sin(theta)/2).
pub fn steering_vector(m: usize, xi: f64) -> CVector {
    CVector::from_fn(m, |i, _| Complex64::from_polar(1.0, TAU * i as f64 * xi))
}

/// K single-path ULA covariances with spatial frequencies uniform over one
/// DFT period, decomposed onto the Q family and mapped through the
/// elementwise Wiener weight c / (c + sigma^2). Negative least-squares
/// residue in the spectra is clamped at zero so the weights stay in [0, 1).
pub fn build_spectral_grid(q: &TransformQ, noise_var: f64) -> Result<SpectralGrid> {
    if !(noise_var > 0.0) {
        return Err(Error::invalid("noise variance must be > 0"));
    }
    let m = q.m();
    let k = q.k();
    let mut spectra = Vec::with_capacity(k);
    let mut filters = Vec::with_capacity(k);
    for i in 0..k {
        let a = steering_vector(m, i as f64 / k as f64);
        let cov = &a * a.adjoint();
        let c = decompose_matrix(&cov, q)?.map(|v| v.max(0.0));
        let w = c.map(|v| v / (v + noise_var));
        spectra.push(c);
        filters.push(w);
    }
    Ok(SpectralGrid { spectra, filters })
}

/// Circular convolution (u * v)[n] = sum_k u[k] v[(n - k) mod K].
pub fn circular_conv(u: &RVector, v: &RVector) -> RVector {
    let k = u.len();
    assert_eq!(v.len(), k, "circular convolution needs equal lengths");
    RVector::from_fn(k, |n, _| {
        (0..k).map(|j| u[j] * v[(n + k - j) % k]).sum()
    })
}

/// Index reversal modulo K: out[k] = v[(K - k) mod K].
pub fn reverse_mod(v: &RVector) -> RVector {
    let k = v.len();
    RVector::from_fn(k, |i, _| v[(k - i) % k])
}

/// Shared filter atom and softmax bias of the estimator without learning.
#[derive(Debug, Clone, PartialEq)]
pub struct NoLearnParams {
    pub w0: RVector,
    pub bias: RVector,
}

impl NoLearnParams {
    /// Atom = the zero-frequency sample's filter; bias entries are
    /// sum_k log(1 - w0[k]) for every shift (shifting permutes the product),
    /// with weights clipped just below one to keep the log finite.
    pub fn from_grid(grid: &SpectralGrid) -> Result<Self> {
        if grid.k() == 0 {
            return Err(Error::invalid("empty spectral grid"));
        }
        let w0 = grid.filters()[0].clone();
        let b: f64 = w0
            .iter()
            .map(|&w| (1.0 - w.min(1.0 - 1e-12)).ln())
            .sum();
        Ok(Self {
            w0,
            bias: RVector::from_element(grid.k(), b),
        })
    }
}

/// Reconstructs h_hat = Q^H diag(w) Q y.
fn apply_spectral_filter(w: &RVector, q: &TransformQ, y: &CVector) -> CVector {
    let u = q.matrix() * y;
    let filtered = CVector::from_fn(q.k(), |i, _| u[i] * Complex64::new(w[i], 0.0));
    q.matrix().adjoint() * filtered
}

/// Assumption-derived estimator: c = |Qy|^2/sigma^2, w = w0 * softmax(w0~ * c + b).
pub fn estimate_nolearn(
    p: &NoLearnParams,
    q: &TransformQ,
    y: &CVector,
    noise_var: f64,
) -> Result<CVector> {
    let c = chat(y, q, noise_var)?;
    let gate = softmax(&(circular_conv(&reverse_mod(&p.w0), &c) + &p.bias));
    let w = circular_conv(&p.w0, &gate);
    Ok(apply_spectral_filter(&w, q, y))
}

/// Trainable kernels and biases, all length K.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams {
    pub a1: RVector,
    pub a2: RVector,
    pub b1: RVector,
    pub b2: RVector,
}

impl CnnParams {
    /// Substitutes the no-learn parameters: a1 = w0, a2 = w0~, b1 = b, b2 = 0.
    pub fn from_nolearn(p: &NoLearnParams) -> Self {
        Self {
            a1: p.w0.clone(),
            a2: reverse_mod(&p.w0),
            b1: p.bias.clone(),
            b2: RVector::zeros(p.w0.len()),
        }
    }

    pub fn k(&self) -> usize {
        self.a1.len()
    }

    pub fn all_finite(&self) -> bool {
        self.a1.iter().all(|v| v.is_finite())
            && self.a2.iter().all(|v| v.is_finite())
            && self.b1.iter().all(|v| v.is_finite())
            && self.b2.iter().all(|v| v.is_finite())
    }

    pub fn save(&self, path: &std::path::Path, m: usize) -> Result<()> {
        let snap = Snapshot {
            kind: SnapshotKind::CnnEstimator,
            m: m as u32,
            k: self.k() as u32,
            n_grid: self.k() as u32,
            blocks: [
                self.a1.iter().copied().collect(),
                self.a2.iter().copied().collect(),
                self.b1.iter().copied().collect(),
                self.b2.iter().copied().collect(),
            ],
        };
        snap.write(path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let snap = Snapshot::read(path)?;
        if snap.kind != SnapshotKind::CnnEstimator {
            return Err(Error::decode(6, "snapshot is not a CNN estimator"));
        }
        Ok(Self {
            a1: RVector::from_vec(snap.blocks[0].clone()),
            a2: RVector::from_vec(snap.blocks[1].clone()),
            b1: RVector::from_vec(snap.blocks[2].clone()),
            b2: RVector::from_vec(snap.blocks[3].clone()),
        })
    }
}

/// Spectral filter of the CNN estimator: a1 * softmax(a2 * c + b1) + b2.
pub fn cnn_filter(p: &CnnParams, c: &RVector) -> RVector {
    let gate = softmax(&(circular_conv(&p.a2, c) + &p.b1));
    circular_conv(&p.a1, &gate) + &p.b2
}

/// CNN estimate h_hat = Q^H diag(w_cnn(c)) Q y.
pub fn cnn_estimate(
    p: &CnnParams,
    q: &TransformQ,
    y: &CVector,
    noise_var: f64,
) -> Result<CVector> {
    let c = chat(y, q, noise_var)?;
    Ok(apply_spectral_filter(&cnn_filter(p, &c), q, y))
}

/// Gradients of the batch MSE, same block layout as [`CnnParams`].
#[derive(Debug, Clone)]
pub struct CnnGradient {
    pub a1: RVector,
    pub a2: RVector,
    pub b1: RVector,
    pub b2: RVector,
}

/// One training pair: noisy observation and clean channel.
#[derive(Debug, Clone)]
pub struct CnnSample {
    pub y: CVector,
    pub h: CVector,
}

/// Mean of ||h - h_hat||^2 over the batch (not normalized by M).
pub fn cnn_loss(p: &CnnParams, q: &TransformQ, batch: &[CnnSample], noise_var: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let total: f64 = batch
        .iter()
        .map(|s| {
            cnn_estimate(p, q, &s.y, noise_var).map(|est| (est - &s.h).norm_squared())
        })
        .collect::<Result<Vec<_>>>()?
        .iter()
        .sum();
    Ok(total / batch.len() as f64)
}

/// Batch loss and analytic gradient through the convolutions and softmax.
pub fn cnn_loss_and_gradient(
    p: &CnnParams,
    q: &TransformQ,
    batch: &[CnnSample],
    noise_var: f64,
) -> Result<(f64, CnnGradient)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let k = p.k();
    let mut g = CnnGradient {
        a1: RVector::zeros(k),
        a2: RVector::zeros(k),
        b1: RVector::zeros(k),
        b2: RVector::zeros(k),
    };
    let mut total_loss = 0.0;
    for s in batch {
        let c = chat(&s.y, q, noise_var)?;
        let z = circular_conv(&p.a2, &c) + &p.b1;
        let gate = softmax(&z);
        let w = circular_conv(&p.a1, &gate) + &p.b2;
        let u = q.matrix() * &s.y;
        let filtered = CVector::from_fn(k, |i, _| u[i] * Complex64::new(w[i], 0.0));
        let est = q.matrix().adjoint() * &filtered;
        let err = &est - &s.h;
        total_loss += err.norm_squared();

        // dL/dw_k = 2 Re( conj(u_k) (Q err)_k ).
        let qe = q.matrix() * &err;
        let dw = RVector::from_fn(k, |i, _| 2.0 * (u[i].conj() * qe[i]).re);
        g.b2 += &dw;
        g.a1 += circular_conv(&dw, &reverse_mod(&gate));
        let dgate = circular_conv(&reverse_mod(&p.a1), &dw);
        let inner = gate.dot(&dgate);
        let dz = gate.component_mul(&dgate.map(|v| v - inner));
        g.b1 += &dz;
        g.a2 += circular_conv(&dz, &reverse_mod(&c));
    }
    let scale = 1.0 / batch.len() as f64;
    g.a1 *= scale;
    g.a2 *= scale;
    g.b1 *= scale;
    g.b2 *= scale;
    Ok((total_loss * scale, g))
}

/// Clean channel vectors plus the noise model; batches are regenerated with
/// fresh noise and a reshuffled order every epoch.
#[derive(Debug, Clone)]
pub struct CnnTrainingData {
    pub channels: Vec<CVector>,
    pub q: TransformQ,
    pub noise_var: f64,
    pub noise_seed: u64,
}

/// Trains the CNN estimator with Adam; returns parameters and the epoch-mean
/// loss trace. Reuses the predictor's [`crate::nn::TrainConfig`].
pub fn cnn_train(
    p0: &CnnParams,
    data: &CnnTrainingData,
    cfg: &crate::nn::TrainConfig,
) -> Result<(CnnParams, Vec<f64>)> {
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be >= 1"));
    }
    if data.channels.is_empty() {
        return Err(Error::invalid("no training items"));
    }
    let mut p = p0.clone();
    let mut adam = Adam::new(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..data.channels.len()).collect();
    for epoch in 0..cfg.epochs as u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed::derive(cfg.shuffle_seed, 0xCu64, epoch));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<CnnSample> = chunk
                .iter()
                .map(|&i| {
                    let y = add_awgn(
                        &data.channels[i],
                        data.noise_var,
                        seed::derive(data.noise_seed, epoch, i as u64),
                    )?;
                    Ok(CnnSample {
                        y,
                        h: data.channels[i].clone(),
                    })
                })
                .collect::<Result<_>>()?;
            let (l, g) = cnn_loss_and_gradient(&p, &data.q, &batch, data.noise_var)?;
            adam.step(
                &mut [
                    p.a1.as_mut_slice(),
                    p.a2.as_mut_slice(),
                    p.b1.as_mut_slice(),
                    p.b2.as_mut_slice(),
                ],
                &[
                    g.a1.as_slice(),
                    g.a2.as_slice(),
                    g.b1.as_slice(),
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

/// Expresses the estimator filter as the dense matrix Q^H diag(w) Q, for
/// cross-checking the transform path.
pub fn dense_filter(w: &RVector, q: &TransformQ) -> CMatrix {
    crate::grid::reconstruct_from_spectrum(w, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_q, QMode};
    use rand::Rng;

    fn q16() -> TransformQ {
        make_q(QMode::Circulant, 16).unwrap()
    }

    fn random_rv(k: usize, rng: &mut ChaCha12Rng) -> RVector {
        RVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn spectral_grid_isotropic_limit() {
        // A flat spectrum c = 1 maps to w = 1/2 at sigma^2 = 1. Spectra of the
        // steering grid are impulses, so check the Wiener map directly.
        let c = RVector::from_element(8, 1.0);
        let w = c.map(|v| v / (v + 1.0));
        assert!(w.iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn circulant_grid_filters_are_shifts() {
        let q = q16();
        let grid = build_spectral_grid(&q, 0.5).unwrap();
        let w0 = &grid.filters()[0];
        for (i, wi) in grid.filters().iter().enumerate() {
            for k in 0..16 {
                let shifted = w0[(k + 16 - i) % 16];
                assert!(
                    (wi[k] - shifted).abs() < 1e-10,
                    "sample {i} bin {k}: {} vs {shifted}",
                    wi[k]
                );
            }
        }
    }

    #[test]
    fn grid_weights_in_unit_interval_and_vanish_in_noise() {
        let q = q16();
        let grid = build_spectral_grid(&q, 1.0).unwrap();
        for w in grid.filters() {
            assert!(w.iter().all(|&v| (0.0..1.0).contains(&v)));
        }
        let loud = build_spectral_grid(&q, 1e9).unwrap();
        for w in loud.filters() {
            assert!(w.iter().all(|&v| v < 1e-6));
        }
    }

    #[test]
    fn circular_conv_identity_and_commutativity() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut impulse = RVector::zeros(8);
        impulse[0] = 1.0;
        let v = random_rv(8, &mut rng);
        assert!((circular_conv(&impulse, &v) - &v).norm() < 1e-15);
        let u = random_rv(8, &mut rng);
        assert!((circular_conv(&u, &v) - circular_conv(&v, &u)).norm() < 1e-12);
    }

    #[test]
    fn circular_conv_matches_transform_domain_oracle() {
        // DFT of a circular convolution is the product of DFTs.
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let k = 8;
        let u = random_rv(k, &mut rng);
        let v = random_rv(k, &mut rng);
        let conv = circular_conv(&u, &v);
        let dft = |x: &RVector, bin: usize| -> Complex64 {
            (0..k)
                .map(|n| {
                    Complex64::from_polar(x[n], -TAU * (bin * n) as f64 / k as f64)
                })
                .sum()
        };
        for bin in 0..k {
            let prod = dft(&u, bin) * dft(&v, bin);
            assert!((dft(&conv, bin) - prod).norm() < 1e-10);
        }
    }

    #[test]
    fn reverse_mod_involution() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let v = random_rv(9, &mut rng);
        assert_eq!(reverse_mod(&reverse_mod(&v)), v);
        assert_eq!(reverse_mod(&v)[0], v[0]);
    }

    #[test]
    fn nolearn_zero_atom_gives_zero_estimate() {
        let q = q16();
        let grid = build_spectral_grid(&q, 0.5).unwrap();
        let mut p = NoLearnParams::from_grid(&grid).unwrap();
        p.w0.fill(0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let y = CVector::from_fn(16, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let est = estimate_nolearn(&p, &q, &y, 0.5).unwrap();
        assert!(est.norm() < 1e-14);
    }

    #[test]
    fn nolearn_filter_bounded_by_atom_peak() {
        let q = q16();
        let grid = build_spectral_grid(&q, 0.5).unwrap();
        let p = NoLearnParams::from_grid(&grid).unwrap();
        let peak: f64 = p.w0.iter().cloned().fold(0.0, f64::max);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..10 {
            let y = CVector::from_fn(16, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let c = chat(&y, &q, 0.5).unwrap();
            let gate = softmax(&(circular_conv(&reverse_mod(&p.w0), &c) + &p.bias));
            let w = circular_conv(&p.w0, &gate);
            // Convex combination of circular shifts of a nonnegative atom.
            assert!(w.iter().all(|&v| v >= -1e-12 && v <= peak + 1e-12));
        }
    }

    #[test]
    fn nolearn_recovers_grid_aligned_path() {
        let q = q16();
        let noise_var = 1e-4;
        let grid = build_spectral_grid(&q, noise_var).unwrap();
        let p = NoLearnParams::from_grid(&grid).unwrap();
        let mut err_total = 0.0;
        let draws = 100;
        for s in 0..draws {
            let xi = (s % 16) as f64 / 16.0;
            let h = steering_vector(16, xi)
                * Complex64::from_polar(1.0, 0.37 * s as f64);
            let y = add_awgn(&h, noise_var, 600 + s as u64).unwrap();
            let est = estimate_nolearn(&p, &q, &y, noise_var).unwrap();
            err_total += (est - &h).norm_squared();
        }
        let nmse = err_total / (draws as f64 * 16.0);
        assert!(nmse < 1e-2, "nmse {nmse}");
    }

    #[test]
    fn cnn_with_substituted_parameters_matches_nolearn() {
        let q = q16();
        let noise_var = 0.25;
        let grid = build_spectral_grid(&q, noise_var).unwrap();
        let nl = NoLearnParams::from_grid(&grid).unwrap();
        let p = CnnParams::from_nolearn(&nl);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for _ in 0..50 {
            let y = CVector::from_fn(16, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let a = estimate_nolearn(&nl, &q, &y, noise_var).unwrap();
            let b = cnn_estimate(&p, &q, &y, noise_var).unwrap();
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn cnn_constant_filter_when_a1_zero() {
        let q = make_q(QMode::Circulant, 4).unwrap();
        let p = CnnParams {
            a1: RVector::zeros(4),
            a2: RVector::zeros(4),
            b1: RVector::zeros(4),
            b2: RVector::from_vec(vec![0.1, 0.2, 0.3, 0.4]),
        };
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let y = CVector::from_fn(4, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let est = cnn_estimate(&p, &q, &y, 0.5).unwrap();
        let oracle = dense_filter(&p.b2, &q) * &y;
        assert!((est - oracle).norm() < 1e-12);
    }

    #[test]
    fn estimator_is_q_diagonal_on_basis_vectors() {
        // Reconstruct the diagonal from applications to basis vectors and
        // compare the dense and transform paths.
        let q = make_q(QMode::Circulant, 8).unwrap();
        let w = RVector::from_fn(8, |i, _| 0.1 + 0.05 * i as f64);
        let dense = dense_filter(&w, &q);
        for j in 0..8 {
            let mut e = CVector::zeros(8);
            e[j] = Complex64::new(1.0, 0.0);
            let via_transform = apply_spectral_filter(&w, &q, &e);
            let via_dense = &dense * &e;
            assert!((via_transform - via_dense).norm() < 1e-10);
        }
    }

    #[test]
    fn cnn_gradients_match_central_differences() {
        let q = make_q(QMode::Circulant, 4).unwrap();
        let noise_var = 0.5;
        let grid = build_spectral_grid(&q, noise_var).unwrap();
        let p = CnnParams::from_nolearn(&NoLearnParams::from_grid(&grid).unwrap());
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let batch: Vec<CnnSample> = (0..4)
            .map(|_| {
                let h = CVector::from_fn(4, |_, _| {
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                });
                let y = CVector::from_fn(4, |i, _| {
                    h[i] + Complex64::new(
                        rng.random_range(-0.5..0.5),
                        rng.random_range(-0.5..0.5),
                    )
                });
                CnnSample { y, h }
            })
            .collect();
        let (_, g) = cnn_loss_and_gradient(&p, &q, &batch, noise_var).unwrap();
        let h_step = 1e-5;
        let blocks: [(&dyn Fn(&CnnParams) -> &RVector, &dyn Fn(&mut CnnParams) -> &mut RVector); 4] = [
            (&|p| &p.a1, &|p| &mut p.a1),
            (&|p| &p.a2, &|p| &mut p.a2),
            (&|p| &p.b1, &|p| &mut p.b1),
            (&|p| &p.b2, &|p| &mut p.b2),
        ];
        let grads = [&g.a1, &g.a2, &g.b1, &g.b2];
        for (bi, (get, get_mut)) in blocks.iter().enumerate() {
            for idx in [0usize, 1, 3] {
                let base = get(&p)[idx];
                let mut pp = p.clone();
                get_mut(&mut pp)[idx] = base + h_step;
                let lp = cnn_loss(&pp, &q, &batch, noise_var).unwrap();
                get_mut(&mut pp)[idx] = base - h_step;
                let lm = cnn_loss(&pp, &q, &batch, noise_var).unwrap();
                let fd = (lp - lm) / (2.0 * h_step);
                let analytic = grads[bi][idx];
                let denom = fd.abs().max(analytic.abs()).max(1e-8);
                assert!(
                    (fd - analytic).abs() / denom < 1e-5,
                    "block {bi} entry {idx}: fd {fd} vs analytic {analytic}"
                );
            }
        }
    }

    #[test]
    fn cnn_zero_steps_returns_initialization() {
        let q = make_q(QMode::Circulant, 4).unwrap();
        let grid = build_spectral_grid(&q, 0.5).unwrap();
        let p0 = CnnParams::from_nolearn(&NoLearnParams::from_grid(&grid).unwrap());
        let data = CnnTrainingData {
            channels: (0..8)
                .map(|i| steering_vector(4, i as f64 / 8.0))
                .collect(),
            q: q.clone(),
            noise_var: 0.5,
            noise_seed: 1,
        };
        let cfg = crate::nn::TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let (p, trace) = cnn_train(&p0, &data, &cfg).unwrap();
        assert_eq!(p, p0);
        assert!(trace.is_empty());
    }

    #[test]
    fn cnn_training_improves_on_nolearn() {
        let q = make_q(QMode::Circulant, 8).unwrap();
        let noise_var = 0.1;
        let grid = build_spectral_grid(&q, noise_var).unwrap();
        let nl = NoLearnParams::from_grid(&grid).unwrap();
        let p0 = CnnParams::from_nolearn(&nl);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let channels: Vec<CVector> = (0..512)
            .map(|_| {
                steering_vector(8, rng.random_range(0.0..1.0))
                    * Complex64::from_polar(1.0, rng.random_range(0.0..TAU))
            })
            .collect();
        let data = CnnTrainingData {
            channels,
            q: q.clone(),
            noise_var,
            noise_seed: 11,
        };
        let cfg = crate::nn::TrainConfig {
            epochs: 15,
            batch_size: 32,
            shuffle_seed: 3,
            ..Default::default()
        };
        let (p, trace) = cnn_train(&p0, &data, &cfg).unwrap();
        assert!(trace.last().unwrap() < trace.first().unwrap());

        // Out-of-sample comparison against the untrained estimator.
        let mut nl_err = 0.0;
        let mut cnn_err = 0.0;
        for s in 0..500u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(70_000 + s);
            let h = steering_vector(8, rng.random_range(0.0..1.0))
                * Complex64::from_polar(1.0, rng.random_range(0.0..TAU));
            let y = add_awgn(&h, noise_var, 80_000 + s).unwrap();
            nl_err += (estimate_nolearn(&nl, &q, &y, noise_var).unwrap() - &h).norm_squared();
            cnn_err += (cnn_estimate(&p, &q, &y, noise_var).unwrap() - &h).norm_squared();
        }
        assert!(
            cnn_err <= nl_err,
            "trained {cnn_err} vs untrained {nl_err}"
        );
    }

    #[test]
    fn cnn_snapshot_roundtrip() {
        let q = make_q(QMode::Toeplitz, 4).unwrap();
        let grid = build_spectral_grid(&q, 0.5).unwrap();
        let p = CnnParams::from_nolearn(&NoLearnParams::from_grid(&grid).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cnn.mps");
        p.save(&path, 4).unwrap();
        assert_eq!(CnnParams::load(&path).unwrap(), p);
    }
}
