//! LMMSE estimation and l-step prediction.
//!
//! The estimator filter is W = Sigma (Sigma + sigma^2 I)^-1. The direct
//! l-step predictor is h_hat = c^H Sigma_y^-1 y with correlation row
//! c^H = [R[l], ..., R[M-1+l]]. Both are also obtained from the extended
//! (M+l)x(M+l) covariance through the selection operators
//!
//!   e1^T = [1, 0, ..., 0]          (1 x M+l)
//!   S    = [0; I_M]                (M+l x M)
//!
//! which are realized as index operations: e1^T A picks the first row and
//! S^T A S the bottom-right M x M block. The reformulated predictor
//! W_ext = Sigma_ext S (S^T Sigma_ext S + sigma^2 I)^-1 keeps the full
//! (M+l) x M matrix because the gated predictors need its bottom block
//! S^T W (the embedded LMMSE estimator) for their likelihood terms, not just
//! the prediction row e1^T W.

use crate::channel::{build_covariance_matrix, CovarianceFunction};
use crate::error::{Error, Result};
use crate::linalg::{solve_hermitian, solve_hermitian_or_pinv};
use crate::{CMatrix, CVector, Complex64};
use nalgebra::{Complex, RowDVector};

/// W = Sigma (Sigma + sigma^2 I)^-1, solved as a linear system.
pub fn lmmse_estimator_filter(sigma: &CMatrix, noise_var: f64) -> Result<CMatrix> {
    if sigma.nrows() != sigma.ncols() {
        return Err(Error::invalid("covariance matrix must be square"));
    }
    let mut a = sigma.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += Complex::new(noise_var, 0.0);
    }
    // W (Sigma + s2 I) = Sigma, both sides Hermitian: solve A X = Sigma and
    // take the adjoint.
    let x = solve_hermitian(&a, sigma)?;
    Ok(x.adjoint())
}

/// Direct evaluation of the l-step LMMSE predictor for m = M-1+l.
/// `y` is the noisy observation in reversed ordering.
pub fn lmmse_predict_direct(
    cov: &CovarianceFunction,
    obs_len: usize,
    step: usize,
    noise_var: f64,
    y: &CVector,
) -> Result<Complex64> {
    if step == 0 {
        return Err(Error::invalid("prediction step must be >= 1"));
    }
    if cov.len() < obs_len + step {
        return Err(Error::invalid("covariance has too few lags for M + l"));
    }
    if y.len() != obs_len {
        return Err(Error::invalid("observation length mismatch"));
    }
    let mut sigma_y = build_covariance_matrix(cov, obs_len)?;
    for i in 0..obs_len {
        sigma_y[(i, i)] += Complex::new(noise_var, 0.0);
    }
    let rhs = CMatrix::from_fn(obs_len, 1, |r, _| y[r]);
    let x = if noise_var > 0.0 {
        solve_hermitian(&sigma_y, &rhs)?
    } else {
        solve_hermitian_or_pinv(&sigma_y, &rhs)?
    };
    // c^H = [R[l], ..., R[M-1+l]] is given directly in adjoint form.
    let mut acc = Complex64::default();
    for i in 0..obs_len {
        acc += cov.at((step + i) as i64) * x[(i, 0)];
    }
    Ok(acc)
}

/// Hermitian Toeplitz (M+l)x(M+l) covariance built from R_h[0..M+l-1].
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedCovariance {
    matrix: CMatrix,
    obs_len: usize,
    step: usize,
}

impl ExtendedCovariance {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn obs_len(&self) -> usize {
        self.obs_len
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// S^T Sigma_ext S: the embedded M x M observation covariance.
    pub fn observation_block(&self) -> CMatrix {
        let l = self.step;
        let m = self.obs_len;
        self.matrix.view((l, l), (m, m)).into()
    }

    /// Sigma_ext S: the last M columns, (M+l) x M.
    pub fn last_columns(&self) -> CMatrix {
        let l = self.step;
        let m = self.obs_len;
        self.matrix.view((0, l), (m + l, m)).into()
    }

    /// e1^T Sigma_ext S: the correlation row [R[l], ..., R[M-1+l]].
    pub fn correlation_row(&self) -> RowDVector<Complex64> {
        self.matrix.row(0).columns(self.step, self.obs_len).into()
    }
}

/// Builds the extended covariance for observation length M and step l.
pub fn extended_covariance(
    cov: &CovarianceFunction,
    obs_len: usize,
    step: usize,
) -> Result<ExtendedCovariance> {
    if obs_len == 0 || step == 0 {
        return Err(Error::invalid("need M >= 1 and l >= 1"));
    }
    let matrix = build_covariance_matrix(cov, obs_len + step)?;
    Ok(ExtendedCovariance {
        matrix,
        obs_len,
        step,
    })
}

/// The reformulated predictor filter W_ext and its prediction row e1^T W_ext.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorFilter {
    full: CMatrix,
    row: RowDVector<Complex64>,
}

impl PredictorFilter {
    /// The (M+l) x M filter matrix.
    pub fn full(&self) -> &CMatrix {
        &self.full
    }

    /// e1^T W_ext: the length-M prediction row.
    pub fn row(&self) -> &RowDVector<Complex64> {
        &self.row
    }

    pub fn obs_len(&self) -> usize {
        self.full.ncols()
    }

    pub fn step(&self) -> usize {
        self.full.nrows() - self.full.ncols()
    }

    /// S^T W_ext: the bottom M x M block, which equals the LMMSE estimator of
    /// the observation window.
    pub fn estimator_block(&self) -> CMatrix {
        let m = self.obs_len();
        let l = self.step();
        self.full.view((l, 0), (m, m)).into()
    }

    /// Applies the prediction row to an observation in reversed ordering.
    pub fn predict(&self, y: &CVector) -> Complex64 {
        let mut acc = Complex64::default();
        for i in 0..self.row.len() {
            acc += self.row[i] * y[i];
        }
        acc
    }
}

/// W_ext = Sigma_ext S (S^T Sigma_ext S + sigma^2 I)^-1.
pub fn predictor_filter(ext: &ExtendedCovariance, noise_var: f64) -> Result<PredictorFilter> {
    let m = ext.obs_len();
    let mut a = ext.observation_block();
    for i in 0..m {
        a[(i, i)] += Complex::new(noise_var, 0.0);
    }
    let b = ext.last_columns().adjoint();
    let x = if noise_var > 0.0 {
        solve_hermitian(&a, &b)?
    } else {
        solve_hermitian_or_pinv(&a, &b)?
    };
    let full = x.adjoint();
    let row = full.row(0).into();
    Ok(PredictorFilter { full, row })
}

/// NMSE over a batch: mean of ||h_b - h_hat_b||^2 divided by the vector
/// dimension.
pub fn nmse(truth: &[CVector], estimate: &[CVector]) -> Result<f64> {
    if truth.len() != estimate.len() || truth.is_empty() {
        return Err(Error::invalid("batches must be nonempty and equally sized"));
    }
    let dim = truth[0].len();
    let mut total = 0.0;
    for (h, e) in truth.iter().zip(estimate) {
        if h.len() != dim || e.len() != dim {
            return Err(Error::invalid("inconsistent vector dimension in batch"));
        }
        total += (h - e).norm_squared();
    }
    Ok(total / (truth.len() * dim) as f64)
}

/// NMSE for scalar predictions: mean of |h - h_hat|^2.
pub fn nmse_scalar(truth: &[Complex64], estimate: &[Complex64]) -> Result<f64> {
    if truth.len() != estimate.len() || truth.is_empty() {
        return Err(Error::invalid("batches must be nonempty and equally sized"));
    }
    let total: f64 = truth
        .iter()
        .zip(estimate)
        .map(|(h, e)| (h - e).norm_sqr())
        .sum();
    Ok(total / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        covariance_from_paths, jakes_covariance, sample_paths, DopplerSpec,
    };
    use nalgebra::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn spec() -> DopplerSpec {
        DopplerSpec::from_kmh(4.0, 2.4e9, 0.009).unwrap()
    }

    fn random_y(m: usize, rng: &mut ChaCha12Rng) -> CVector {
        CVector::from_fn(m, |_, _| {
            Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn estimator_identity_covariance() {
        let w = lmmse_estimator_filter(&CMatrix::identity(3, 3), 1.0).unwrap();
        let half = CMatrix::identity(3, 3) * Complex64::new(0.5, 0.0);
        assert!((w - half).norm() < 1e-14);
    }

    #[test]
    fn estimator_vanishing_noise_limit() {
        // Well-conditioned full-rank covariance (exponentially decaying lags).
        let cov = CovarianceFunction::new(
            (0..4).map(|k| Complex64::new(0.5f64.powi(k), 0.0)).collect(),
        )
        .unwrap();
        let sigma = build_covariance_matrix(&cov, 4).unwrap();
        let w = lmmse_estimator_filter(&sigma, 1e-12).unwrap();
        assert!((w - CMatrix::identity(4, 4)).norm() < 1e-8);
    }

    #[test]
    fn estimator_rank_one_hand_solve() {
        // Sigma = all-ones 2x2, sigma^2 = 1: W = (1/3) all-ones.
        let sigma = CMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        let w = lmmse_estimator_filter(&sigma, 1.0).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!((w[(r, c)] - Complex64::new(1.0 / 3.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn estimator_singular_noise_free_errors() {
        let sigma = CMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(matches!(
            lmmse_estimator_filter(&sigma, 0.0),
            Err(Error::SingularMatrix(_))
        ));
    }

    #[test]
    fn direct_prediction_constant_channel() {
        // R[k] = 1, sigma^2 = 0, y = 1-vector: prediction is 1 via pinv.
        let cov = CovarianceFunction::new(vec![Complex64::new(1.0, 0.0); 6]).unwrap();
        let y = CVector::from_element(4, Complex64::new(1.0, 0.0));
        let p = lmmse_predict_direct(&cov, 4, 1, 0.0, &y).unwrap();
        assert!((p - Complex64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn direct_prediction_scalar_formula() {
        // M = 1, l = 1: h_hat = R[1] (R[0] + s2)^-1 y0.
        let cov = CovarianceFunction::new(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.3, 0.2),
        ])
        .unwrap();
        let y = CVector::from_element(1, Complex64::new(0.7, -0.4));
        let p = lmmse_predict_direct(&cov, 1, 1, 0.5, &y).unwrap();
        let expect = Complex64::new(0.3, 0.2) / Complex64::new(1.5, 0.0) * y[0];
        assert!((p - expect).norm() < 1e-14);
    }

    #[test]
    fn direct_prediction_matches_dense_inverse_oracle() {
        let s = spec();
        let cov = jakes_covariance(&s, 5).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let y = random_y(4, &mut rng);
        let p = lmmse_predict_direct(&cov, 4, 1, 1.0, &y).unwrap();

        // Oracle: explicit dense inverse of Sigma_y.
        let mut sigma_y = build_covariance_matrix(&cov, 4).unwrap();
        for i in 0..4 {
            sigma_y[(i, i)] += Complex64::new(1.0, 0.0);
        }
        let inv = sigma_y.try_inverse().unwrap();
        let c = RowDVector::from_fn(4, |_, i| cov.at((1 + i) as i64));
        let oracle = (c * inv * &y)[(0, 0)];
        assert!((p - oracle).norm() < 1e-12);
    }

    #[test]
    fn extended_covariance_small_case() {
        let cov = CovarianceFunction::new(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, 0.0),
        ])
        .unwrap();
        let ext = extended_covariance(&cov, 1, 1).unwrap();
        let m = ext.matrix();
        assert!((m[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((m[(0, 1)] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((m[(1, 0)] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((m[(1, 1)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn extended_covariance_blocks_match_slices() {
        let s = spec();
        for seed in 0..5 {
            let ps = sample_paths(4, &s, seed).unwrap();
            let cov = covariance_from_paths(&ps, 8, &s).unwrap();
            let (m, l) = (5, 3);
            let ext = extended_covariance(&cov, m, l).unwrap();
            assert_eq!(ext.observation_block(), build_covariance_matrix(&cov, m).unwrap());
            let row = ext.correlation_row();
            for i in 0..m {
                assert_eq!(row[i], cov.at((l + i) as i64));
            }
        }
    }

    #[test]
    fn predictor_filter_hand_solve() {
        // M = 1, l = 1, R = [1, 0.5], s2 = 1: row = 0.5 / 2 = 0.25.
        let cov = CovarianceFunction::new(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, 0.0),
        ])
        .unwrap();
        let ext = extended_covariance(&cov, 1, 1).unwrap();
        let w = predictor_filter(&ext, 1.0).unwrap();
        assert!((w.row()[0] - Complex64::new(0.25, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn predictor_filter_vanishes_in_pure_noise() {
        let s = spec();
        let cov = jakes_covariance(&s, 5).unwrap();
        let ext = extended_covariance(&cov, 4, 1).unwrap();
        let w = predictor_filter(&ext, 1e9).unwrap();
        for i in 0..4 {
            assert!(w.row()[i].norm() < 1e-8);
        }
    }

    #[test]
    fn reformulation_matches_direct_over_random_draws() {
        let s = spec();
        let mut rng = ChaCha12Rng::seed_from_u64(1234);
        let mut worst = 0.0f64;
        for trial in 0..200 {
            let m = rng.random_range(1..=8usize);
            let l = rng.random_range(1..=3usize);
            let paths = rng.random_range(1..=6usize);
            let noise_var = 10f64.powf(rng.random_range(-3.0..1.0));
            let ps = sample_paths(paths, &s, 10_000 + trial).unwrap();
            let cov = covariance_from_paths(&ps, m + l, &s).unwrap();
            let y = random_y(m, &mut rng);

            let direct = lmmse_predict_direct(&cov, m, l, noise_var, &y).unwrap();
            let ext = extended_covariance(&cov, m, l).unwrap();
            let reform = predictor_filter(&ext, noise_var).unwrap().predict(&y);

            let denom = direct.norm().max(reform.norm()).max(1e-30);
            worst = worst.max((direct - reform).norm() / denom);
        }
        assert!(worst < 1e-10, "max relative deviation {worst}");
    }

    #[test]
    fn estimator_block_equals_estimator_filter_exactly() {
        let s = spec();
        for seed in 0..5 {
            let ps = sample_paths(3, &s, 50 + seed).unwrap();
            let cov = covariance_from_paths(&ps, 6, &s).unwrap();
            let ext = extended_covariance(&cov, 4, 2).unwrap();
            let w = predictor_filter(&ext, 0.8).unwrap();
            let sigma = build_covariance_matrix(&cov, 4).unwrap();
            let west = lmmse_estimator_filter(&sigma, 0.8).unwrap();
            assert_eq!(w.estimator_block(), west);
        }
    }

    #[test]
    fn nmse_basic_values() {
        let a = vec![CVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
        ])];
        assert_eq!(nmse(&a, &a).unwrap(), 0.0);

        let zero = vec![CVector::zeros(2)];
        // diff = [1, j]: ||.||^2 = 2, over dim 2 -> 1.
        assert!((nmse(&a, &zero).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nmse_scalar_matches_vector_form() {
        let t = vec![Complex64::new(1.0, 1.0), Complex64::new(0.0, -2.0)];
        let e = vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
        let tv: Vec<CVector> = t.iter().map(|&c| CVector::from_element(1, c)).collect();
        let ev: Vec<CVector> = e.iter().map(|&c| CVector::from_element(1, c)).collect();
        assert!((nmse_scalar(&t, &e).unwrap() - nmse(&tv, &ev).unwrap()).abs() < 1e-15);
    }
}
