//! Gridded and Structured predictors.
//!
//! The Gridded Predictor replaces the intractable filter expectation by a
//! discrete uniform prior over N_grid single-path Doppler hypotheses: each
//! grid sample i carries an LMMSE predictor filter W_i and a bias
//! b_i = log |det(I - S^T W_i)|, and the prediction is the softmax-weighted
//! combination of the per-sample prediction rows, with likelihood exponents
//! t_i = Re tr(S^T W_i C_hat), C_hat = y y^H / sigma^2.
//!
//! The Structured Predictor assumes each S^T W_i is diagonalized by a common
//! transform Q (the unitary M-point DFT for the circulant approximation, or
//! the first M columns of the 2M-point DFT for the Toeplitz approximation),
//! S^T W_i ~= Q^H diag(w_i) Q. The exponents collapse to w_i^T c_hat with
//! c_hat = |Qy|^2 / sigma^2, and the whole predictor becomes a two-layer
//! softmax network with weights A1 (rows w_i^T), A2 (columns e1^T W_i) and
//! bias vector b.

use std::f64::consts::{PI, TAU};

use nalgebra::Complex;

use crate::channel::{single_path_covariance, CovarianceFunction, DopplerSpec};
use crate::error::{Error, Result};
use crate::linalg::{log_abs_det, softmax, solve_gram_min_norm};
use crate::lmmse::{extended_covariance, predictor_filter, PredictorFilter};
use crate::{CMatrix, CVector, Complex64, RMatrix, RVector};

/// Transform family for the diagonalization assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QMode {
    /// K = M: full unitary DFT, circulant filter family.
    Circulant,
    /// K = 2M: first M columns of the 2M-point DFT, Toeplitz filter family.
    Toeplitz,
}

impl QMode {
    pub fn k_for(&self, m: usize) -> usize {
        match self {
            QMode::Circulant => m,
            QMode::Toeplitz => 2 * m,
        }
    }
}

/// The common K x M transform Q with unitary scaling exp(-j 2 pi r c / K) / sqrt(K).
#[derive(Debug, Clone, PartialEq)]
pub struct TransformQ {
    mode: QMode,
    matrix: CMatrix,
}

impl TransformQ {
    pub fn mode(&self) -> QMode {
        self.mode
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn k(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn m(&self) -> usize {
        self.matrix.ncols()
    }
}

pub fn make_q(mode: QMode, m: usize) -> Result<TransformQ> {
    if m == 0 {
        return Err(Error::invalid("transform needs M >= 1"));
    }
    let k = mode.k_for(m);
    let scale = 1.0 / (k as f64).sqrt();
    let matrix = CMatrix::from_fn(k, m, |r, c| {
        Complex::from_polar(scale, -TAU * (r * c) as f64 / k as f64)
    });
    Ok(TransformQ { mode, matrix })
}

/// c_hat = |Q y|^2 / sigma^2, the spectral energy snapshot the gates consume.
pub fn chat(y: &CVector, q: &TransformQ, noise_var: f64) -> Result<RVector> {
    if y.len() != q.m() {
        return Err(Error::invalid("observation length does not match Q"));
    }
    if !(noise_var > 0.0) {
        return Err(Error::invalid("noise variance must be > 0"));
    }
    let u = q.matrix() * y;
    Ok(RVector::from_fn(q.k(), |i, _| u[i].norm_sqr() / noise_var))
}

/// The discrete prior: DoA samples and their single-path covariances.
#[derive(Debug, Clone)]
pub struct PriorGrid {
    doas: Vec<f64>,
    covariances: Vec<CovarianceFunction>,
}

impl PriorGrid {
    pub fn doas(&self) -> &[f64] {
        &self.doas
    }

    pub fn covariances(&self) -> &[CovarianceFunction] {
        &self.covariances
    }

    pub fn len(&self) -> usize {
        self.doas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doas.is_empty()
    }
}

/// Per-sample predictor filters and likelihood biases.
#[derive(Debug, Clone)]
pub struct FilterBank {
    filters: Vec<PredictorFilter>,
    biases: Vec<f64>,
}

impl FilterBank {
    /// Builds one predictor filter and bias per covariance function.
    pub fn from_covariances(
        covs: &[CovarianceFunction],
        obs_len: usize,
        step: usize,
        noise_var: f64,
    ) -> Result<Self> {
        if covs.is_empty() {
            return Err(Error::invalid("filter bank needs at least one sample"));
        }
        let mut filters = Vec::with_capacity(covs.len());
        let mut biases = Vec::with_capacity(covs.len());
        for cov in covs {
            let ext = extended_covariance(cov, obs_len, step)?;
            let w = predictor_filter(&ext, noise_var)?;
            biases.push(bias_term(&w)?);
            filters.push(w);
        }
        Ok(Self { filters, biases })
    }

    pub fn filters(&self) -> &[PredictorFilter] {
        &self.filters
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn obs_len(&self) -> usize {
        self.filters[0].obs_len()
    }
}

/// DoA grid uniform on [0, pi] including both endpoints, so cos sweeps each
/// Doppler in [-B_D, B_D] exactly once. A single-sample grid sits at pi/2
/// (zero Doppler).
pub fn grid_doas(n_grid: usize) -> Result<Vec<f64>> {
    if n_grid == 0 {
        return Err(Error::invalid("grid needs at least one sample"));
    }
    if n_grid == 1 {
        return Ok(vec![PI / 2.0]);
    }
    Ok((0..n_grid)
        .map(|i| PI * i as f64 / (n_grid - 1) as f64)
        .collect())
}

/// Builds the prior grid and its filter bank from single-path hypotheses.
pub fn build_prior_grid(
    n_grid: usize,
    spec: &DopplerSpec,
    obs_len: usize,
    step: usize,
    noise_var: f64,
) -> Result<(PriorGrid, FilterBank)> {
    let doas = grid_doas(n_grid)?;
    let bd = spec.doppler_bandwidth();
    let covariances: Vec<CovarianceFunction> = doas
        .iter()
        .map(|&d| single_path_covariance(d.cos() * bd, obs_len + step, spec))
        .collect::<Result<_>>()?;
    let bank = FilterBank::from_covariances(&covariances, obs_len, step, noise_var)?;
    Ok((PriorGrid { doas, covariances }, bank))
}

/// b = log |det(I_M - S^T W)|.
pub fn bias_term(filter: &PredictorFilter) -> Result<f64> {
    let m = filter.obs_len();
    let mut a = filter.estimator_block();
    a.neg_mut();
    for i in 0..m {
        a[(i, i)] += Complex64::new(1.0, 0.0);
    }
    log_abs_det(&a)
}

/// Softmax gate of the Gridded Predictor for a given observation.
pub fn gridded_weights(bank: &FilterBank, y: &CVector, noise_var: f64) -> Result<RVector> {
    if bank.is_empty() {
        return Err(Error::invalid("empty filter bank"));
    }
    if !(noise_var > 0.0) {
        return Err(Error::invalid("noise variance must be > 0"));
    }
    let exponents = RVector::from_fn(bank.len(), |i, _| {
        // tr(S^T W C_hat) = y^H (S^T W) y / sigma^2; the exponent keeps its
        // real part, the imaginary residue being approximation noise.
        let quad = y.adjoint() * bank.filters()[i].estimator_block() * y;
        quad[(0, 0)].re / noise_var + bank.biases()[i]
    });
    Ok(softmax(&exponents))
}

/// Gridded Predictor: softmax-weighted combination of the bank's prediction
/// rows applied to y.
pub fn gridded_predict(bank: &FilterBank, y: &CVector, noise_var: f64) -> Result<Complex64> {
    let weights = gridded_weights(bank, y, noise_var)?;
    let mut acc = Complex64::default();
    for (i, w) in weights.iter().enumerate() {
        acc += Complex64::new(*w, 0.0) * bank.filters()[i].predict(y);
    }
    Ok(acc)
}

/// Least-squares diagonalization of S^T W in the Q family: the real vector w
/// minimizing ||S^T W - Q^H diag(w) Q||_F. Normal equations G w = d with
/// G_kl = |(Q Q^H)_kl|^2 and d_k = Re (Q (S^T W) Q^H)_kk; G is structurally
/// rank-deficient in Toeplitz mode, so the minimum-norm solution is taken.
pub fn decompose_filter(filter: &PredictorFilter, q: &TransformQ) -> Result<RVector> {
    decompose_matrix(&filter.estimator_block(), q)
}

/// Same least-squares fit for an arbitrary M x M matrix (used for filter
/// blocks and for spectral decompositions of covariances).
pub fn decompose_matrix(a: &CMatrix, q: &TransformQ) -> Result<RVector> {
    if a.nrows() != q.m() || a.ncols() != q.m() {
        return Err(Error::invalid("matrix does not match transform size"));
    }
    let k = q.k();
    let projected = q.matrix() * a * q.matrix().adjoint();
    let d = RVector::from_fn(k, |i, _| projected[(i, i)].re);
    if q.mode() == QMode::Circulant {
        // Q Q^H = I, so G = I and w = d directly.
        return Ok(d);
    }
    let gram_base = q.matrix() * q.matrix().adjoint();
    let g = RMatrix::from_fn(k, k, |r, c| gram_base[(r, c)].norm_sqr());
    solve_gram_min_norm(&g, &d)
}

/// Reconstructs Q^H diag(w) Q.
pub fn reconstruct_from_spectrum(w: &RVector, q: &TransformQ) -> CMatrix {
    let d = CMatrix::from_fn(q.k(), q.k(), |r, c| {
        if r == c {
            Complex64::new(w[r], 0.0)
        } else {
            Complex64::default()
        }
    });
    q.matrix().adjoint() * d * q.matrix()
}

/// How the Structured Predictor's bias vector is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BiasMode {
    /// Recompute b from the diagonalized filters Q^H diag(w_i) Q, keeping the
    /// predictor internally consistent with the decomposition.
    #[default]
    Approximated,
    /// Keep the exact per-sample biases of the filter bank.
    Exact,
}

/// The (A1, A2, b) parameterization of the Structured Predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredParams {
    /// N_grid x K, rows are the decomposed spectra w_i^T.
    pub a1: RMatrix,
    /// M x N_grid, columns are the prediction rows (e1^T W_i)^T.
    pub a2: CMatrix,
    /// Length N_grid bias vector.
    pub b: RVector,
}

impl StructuredParams {
    pub fn n_grid(&self) -> usize {
        self.a1.nrows()
    }

    pub fn k(&self) -> usize {
        self.a1.ncols()
    }

    pub fn m(&self) -> usize {
        self.a2.nrows()
    }
}

/// Diagonalizes every bank filter by Q and assembles (A1, A2, b).
pub fn structured_params(
    bank: &FilterBank,
    q: &TransformQ,
    bias_mode: BiasMode,
) -> Result<StructuredParams> {
    if bank.is_empty() {
        return Err(Error::invalid("empty filter bank"));
    }
    let n = bank.len();
    let m = bank.obs_len();
    let k = q.k();
    if q.m() != m {
        return Err(Error::invalid("transform does not match bank dimension"));
    }
    let mut a1 = RMatrix::zeros(n, k);
    let mut a2 = CMatrix::zeros(m, n);
    let mut b = RVector::zeros(n);
    for i in 0..n {
        let w = decompose_filter(&bank.filters()[i], q).map_err(|e| match e {
            Error::SingularMatrix(reason) => Error::DecompositionFailure { index: i, reason },
            other => other,
        })?;
        a1.row_mut(i).copy_from(&w.transpose());
        for r in 0..m {
            a2[(r, i)] = bank.filters()[i].row()[r];
        }
        b[i] = match bias_mode {
            BiasMode::Exact => bank.biases()[i],
            BiasMode::Approximated => {
                let approx = reconstruct_from_spectrum(&w, q);
                let mut eye_minus = -approx;
                for r in 0..m {
                    eye_minus[(r, r)] += Complex64::new(1.0, 0.0);
                }
                log_abs_det(&eye_minus)?
            }
        };
    }
    Ok(StructuredParams { a1, a2, b })
}

/// Structured Predictor: w_hat = A2 softmax(A1 c_hat + b), applied to y by a
/// plain (unconjugated) inner product.
pub fn structured_predict(
    params: &StructuredParams,
    c: &RVector,
    y: &CVector,
) -> Result<Complex64> {
    if c.len() != params.k() || y.len() != params.m() {
        return Err(Error::invalid("dimension mismatch in structured predictor"));
    }
    let gate = softmax(&(&params.a1 * c + &params.b));
    let w = &params.a2 * gate.map(|g| Complex64::new(g, 0.0));
    let mut acc = Complex64::default();
    for i in 0..y.len() {
        acc += w[i] * y[i];
    }
    Ok(acc)
}
