//! Time-variant flat-fading channel model.
//!
//! A block of M+N channel coefficients is the superposition of P plane waves,
//!
//!   h[m] = sum_p a_p exp(j 2 pi f_p Ts m),  a_p = exp(j psi_p) / sqrt(P),
//!
//! with path phases psi_p and directions of arrival delta_p drawn uniformly
//! on [0, 2pi) and per-path Doppler f_p = cos(delta_p) * B_D. The power
//! spectral density is the corresponding weighted sum of Dirac pulses, so the
//! discrete autocovariance is R_h[k] = sum_p |a_p|^2 exp(j 2 pi f_p Ts k),
//! which tends to the Jakes form J0(2 pi k Ts B_D) as P grows.

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use std::f64::consts::TAU;

use crate::bessel::bessel_j0;
use crate::error::{Error, Result};
use crate::{CMatrix, CVector, Complex64};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Carrier, mobility and sampling parameters that fix the Doppler bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerSpec {
    /// User velocity in m/s.
    pub velocity_mps: f64,
    /// Carrier frequency in Hz.
    pub carrier_hz: f64,
    /// Symbol duration in s.
    pub symbol_duration_s: f64,
}

impl DopplerSpec {
    pub fn new(velocity_mps: f64, carrier_hz: f64, symbol_duration_s: f64) -> Result<Self> {
        if !(velocity_mps >= 0.0) {
            return Err(Error::invalid("velocity must be >= 0"));
        }
        if !(carrier_hz > 0.0) {
            return Err(Error::invalid("carrier frequency must be > 0"));
        }
        if !(symbol_duration_s > 0.0) {
            return Err(Error::invalid("symbol duration must be > 0"));
        }
        Ok(Self {
            velocity_mps,
            carrier_hz,
            symbol_duration_s,
        })
    }

    /// Convenience constructor taking the velocity in km/h.
    pub fn from_kmh(velocity_kmh: f64, carrier_hz: f64, symbol_duration_s: f64) -> Result<Self> {
        Self::new(velocity_kmh / 3.6, carrier_hz, symbol_duration_s)
    }

    /// Maximum Doppler shift B_D = v f_c / c in Hz.
    pub fn doppler_bandwidth(&self) -> f64 {
        self.velocity_mps * self.carrier_hz / SPEED_OF_LIGHT
    }

    /// Normalized maximum Doppler B_D * Ts (cycles per symbol).
    pub fn normalized_doppler(&self) -> f64 {
        self.doppler_bandwidth() * self.symbol_duration_s
    }
}

/// One propagation path: phase, direction of arrival, and the derived
/// complex gain and Doppler shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub phase: f64,
    pub doa: f64,
    pub gain: Complex64,
    pub doppler_hz: f64,
}

/// A fixed set of paths; immutable once sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    paths: Vec<Path>,
}

impl PathSet {
    /// Builds paths from explicit phases and DoAs; gains are 1/sqrt(P) each.
    pub fn from_angles(phases: &[f64], doas: &[f64], spec: &DopplerSpec) -> Result<Self> {
        if phases.is_empty() || phases.len() != doas.len() {
            return Err(Error::invalid("need equal, nonzero numbers of phases and DoAs"));
        }
        let p = phases.len();
        let amp = 1.0 / (p as f64).sqrt();
        let bd = spec.doppler_bandwidth();
        let paths = phases
            .iter()
            .zip(doas)
            .map(|(&psi, &doa)| Path {
                phase: psi,
                doa,
                gain: Complex::from_polar(amp, psi),
                doppler_hz: doa.cos() * bd,
            })
            .collect();
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Path with the largest |gain|; ties go to the lowest index.
    pub fn strongest(&self) -> &Path {
        let mut best = &self.paths[0];
        for p in &self.paths[1..] {
            if p.gain.norm() > best.gain.norm() {
                best = p;
            }
        }
        best
    }
}

/// Draws P paths with psi_p, delta_p ~ U[0, 2pi), deterministically per seed.
pub fn sample_paths(p: usize, spec: &DopplerSpec, seed: u64) -> Result<PathSet> {
    if p == 0 {
        return Err(Error::invalid("path count must be >= 1"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut phases = Vec::with_capacity(p);
    let mut doas = Vec::with_capacity(p);
    for _ in 0..p {
        phases.push(rng.random_range(0.0..TAU));
        doas.push(rng.random_range(0.0..TAU));
    }
    PathSet::from_angles(&phases, &doas, spec)
}

/// A length M+N coefficient sequence for one trajectory block: the first M
/// indices are the observation interval, the remaining N the prediction
/// interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBlock {
    coeffs: Vec<Complex64>,
    obs_len: usize,
    pred_len: usize,
}

impl ChannelBlock {
    pub fn new(coeffs: Vec<Complex64>, obs_len: usize, pred_len: usize) -> Result<Self> {
        if obs_len == 0 {
            return Err(Error::invalid("observation length must be >= 1"));
        }
        if coeffs.len() != obs_len + pred_len {
            return Err(Error::invalid("coefficient count must equal M + N"));
        }
        Ok(Self {
            coeffs,
            obs_len,
            pred_len,
        })
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn obs_len(&self) -> usize {
        self.obs_len
    }

    pub fn pred_len(&self) -> usize {
        self.pred_len
    }

    /// Observation vector in filter ordering: [h[M-1], h[M-2], ..., h[0]].
    /// Every filter in this crate consumes this reversed layout; it makes the
    /// Toeplitz indexing of the covariance matrix literal.
    pub fn observation_reversed(&self) -> CVector {
        CVector::from_iterator(self.obs_len, self.coeffs[..self.obs_len].iter().rev().copied())
    }

    /// Coefficient h[M-1+l], the l-step prediction target.
    pub fn target(&self, l: usize) -> Result<Complex64> {
        if l == 0 || l > self.pred_len {
            return Err(Error::invalid(format!(
                "prediction step {l} outside 1..={}",
                self.pred_len
            )));
        }
        Ok(self.coeffs[self.obs_len - 1 + l])
    }
}

/// Evaluates h[m] = sum_p a_p exp(j 2 pi f_p Ts m) for m = 0..M+N-1.
pub fn synthesize_block(
    paths: &PathSet,
    obs_len: usize,
    pred_len: usize,
    spec: &DopplerSpec,
) -> Result<ChannelBlock> {
    if obs_len == 0 {
        return Err(Error::invalid("observation length must be >= 1"));
    }
    let ts = spec.symbol_duration_s;
    let coeffs = (0..obs_len + pred_len)
        .map(|m| {
            paths
                .paths()
                .iter()
                .map(|p| p.gain * Complex::from_polar(1.0, TAU * p.doppler_hz * ts * m as f64))
                .sum()
        })
        .collect();
    ChannelBlock::new(coeffs, obs_len, pred_len)
}

/// Discrete autocovariance samples R_h[0..K-1]. Negative lags are served by
/// conjugation: R_h[-k] = R_h[k]*.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceFunction {
    samples: Vec<Complex64>,
}

impl CovarianceFunction {
    pub fn new(samples: Vec<Complex64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("need at least R_h[0]"));
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// R_h[k] for any lag in -(K-1)..=K-1.
    pub fn at(&self, k: i64) -> Complex64 {
        if k >= 0 {
            self.samples[k as usize]
        } else {
            self.samples[(-k) as usize].conj()
        }
    }
}

/// Exact per-realization covariance R_h[k] = sum_p |a_p|^2 exp(j 2 pi f_p Ts k).
pub fn covariance_from_paths(
    paths: &PathSet,
    lags: usize,
    spec: &DopplerSpec,
) -> Result<CovarianceFunction> {
    if lags == 0 {
        return Err(Error::invalid("need at least one lag"));
    }
    let ts = spec.symbol_duration_s;
    let samples = (0..lags)
        .map(|k| {
            paths
                .paths()
                .iter()
                .map(|p| p.gain.norm_sqr() * Complex::from_polar(1.0, TAU * p.doppler_hz * ts * k as f64))
                .sum()
        })
        .collect();
    CovarianceFunction::new(samples)
}

/// Covariance of one unit-power path at the given Doppler shift.
pub fn single_path_covariance(
    doppler_hz: f64,
    lags: usize,
    spec: &DopplerSpec,
) -> Result<CovarianceFunction> {
    if lags == 0 {
        return Err(Error::invalid("need at least one lag"));
    }
    let ts = spec.symbol_duration_s;
    let samples = (0..lags)
        .map(|k| Complex::from_polar(1.0, TAU * doppler_hz * ts * k as f64))
        .collect();
    CovarianceFunction::new(samples)
}

/// Infinite-path limit of the covariance: R_h[k] = J0(2 pi k Ts B_D).
pub fn jakes_covariance(spec: &DopplerSpec, lags: usize) -> Result<CovarianceFunction> {
    if lags == 0 {
        return Err(Error::invalid("need at least one lag"));
    }
    let x = TAU * spec.normalized_doppler();
    let samples = (0..lags)
        .map(|k| Complex::new(bessel_j0(x * k as f64), 0.0))
        .collect();
    CovarianceFunction::new(samples)
}

/// Hermitian Toeplitz covariance matrix with entry (r, c) = R_h[c - r].
pub fn build_covariance_matrix(cov: &CovarianceFunction, dim: usize) -> Result<CMatrix> {
    if cov.len() < dim {
        return Err(Error::invalid(format!(
            "covariance has {} lags, need >= {dim}",
            cov.len()
        )));
    }
    Ok(CMatrix::from_fn(dim, dim, |r, c| cov.at(c as i64 - r as i64)))
}

/// y = h + n with circularly-symmetric complex Gaussian noise of per-component
/// variance `noise_var` (real and imaginary parts each carry half of it).
pub fn add_awgn(h: &CVector, noise_var: f64, seed: u64) -> Result<CVector> {
    if !(noise_var >= 0.0) {
        return Err(Error::invalid("noise variance must be >= 0"));
    }
    if noise_var == 0.0 {
        return Ok(h.clone());
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let s = (noise_var / 2.0).sqrt();
    Ok(h.map(|v| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        v + Complex::new(s * re, s * im)
    }))
}

/// SNR is defined against a unit-power channel: sigma_n^2 = 10^(-snr_db / 10).
pub fn snr_to_noise_var(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> DopplerSpec {
        // 2.4 GHz, 4 km/h, 9 ms symbols: B_D * Ts = 0.08.
        DopplerSpec::from_kmh(4.0, 2.4e9, 0.009).unwrap()
    }

    #[test]
    fn doppler_bandwidth_value() {
        let s = spec();
        let expected = (4.0 / 3.6) * 2.4e9 / SPEED_OF_LIGHT;
        assert!((s.doppler_bandwidth() - expected).abs() < 1e-9);
        assert!((s.normalized_doppler() - 0.08).abs() < 1e-4);
    }

    #[test]
    fn sample_paths_rejects_zero() {
        assert!(matches!(
            sample_paths(0, &spec(), 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn single_path_has_unit_gain() {
        let ps = sample_paths(1, &spec(), 7).unwrap();
        assert!((ps.paths()[0].gain.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn total_power_is_one() {
        let ps = sample_paths(4, &spec(), 3).unwrap();
        let total: f64 = ps.paths().iter().map(|p| p.gain.norm_sqr()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dopplers_bounded_by_bandwidth() {
        let s = spec();
        let ps = sample_paths(64, &s, 11).unwrap();
        for p in ps.paths() {
            assert!(p.doppler_hz.abs() <= s.doppler_bandwidth() + 1e-12);
        }
    }

    #[test]
    fn mean_doppler_near_zero() {
        // E[cos U[0,2pi)] = 0 with var 1/2; check within 3 standard errors.
        let s = DopplerSpec::from_kmh(4.0, 2.4e9, 1e-3).unwrap();
        let n = 10_000;
        let ps = sample_paths(n, &s, 5).unwrap();
        let mean: f64 = ps.paths().iter().map(|p| p.doppler_hz).sum::<f64>() / n as f64;
        let se = s.doppler_bandwidth() * (0.5f64 / n as f64).sqrt();
        assert!(
            mean.abs() < 3.0 * se,
            "mean doppler {mean} exceeds 3 se {se}"
        );
    }

    #[test]
    fn paths_deterministic_per_seed() {
        assert_eq!(
            sample_paths(8, &spec(), 99).unwrap(),
            sample_paths(8, &spec(), 99).unwrap()
        );
    }

    #[test]
    fn constant_channel_from_zero_doppler() {
        let s = spec();
        // doa = pi/2 gives cos = 0 hence f = 0; phase 0 gives unit gain.
        let ps = PathSet::from_angles(&[0.0], &[std::f64::consts::FRAC_PI_2], &s).unwrap();
        let block = synthesize_block(&ps, 4, 2, &s).unwrap();
        for &c in block.coeffs() {
            assert!((c - Complex::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn quarter_turn_rotation() {
        // One path with f Ts = 0.25 and zero phase steps 1, j, -1, -j.
        let s = DopplerSpec::new(1.0, 1.0, 1.0).unwrap();
        let mut ps = PathSet::from_angles(&[0.0], &[0.0], &s).unwrap();
        ps.paths[0].doppler_hz = 0.25;
        let block = synthesize_block(&ps, 4, 0, &s).unwrap();
        let expect = [
            Complex::new(1.0, 0.0),
            Complex::new(0.0, 1.0),
            Complex::new(-1.0, 0.0),
            Complex::new(0.0, -1.0),
        ];
        for (c, e) in block.coeffs().iter().zip(expect) {
            assert!((c - e).norm() < 1e-12);
        }
    }

    #[test]
    fn block_magnitude_bounded_by_gain_sum() {
        let s = spec();
        for seed in 0..20 {
            let ps = sample_paths(3, &s, seed).unwrap();
            let bound: f64 = ps.paths().iter().map(|p| p.gain.norm()).sum();
            let block = synthesize_block(&ps, 8, 2, &s).unwrap();
            for &c in block.coeffs() {
                assert!(c.norm() <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn observation_is_reversed() {
        let s = spec();
        let ps = sample_paths(2, &s, 1).unwrap();
        let block = synthesize_block(&ps, 4, 1, &s).unwrap();
        let obs = block.observation_reversed();
        for i in 0..4 {
            assert_eq!(obs[i], block.coeffs()[3 - i]);
        }
        assert_eq!(block.target(1).unwrap(), block.coeffs()[4]);
    }

    #[test]
    fn covariance_zero_lag_is_unit() {
        let s = spec();
        for seed in 0..10 {
            let ps = sample_paths(5, &s, seed).unwrap();
            let cov = covariance_from_paths(&ps, 6, &s).unwrap();
            assert!((cov.at(0) - Complex::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn covariance_negative_lag_conjugates() {
        let s = spec();
        let ps = sample_paths(4, &s, 2).unwrap();
        let cov = covariance_from_paths(&ps, 5, &s).unwrap();
        for k in 1..5 {
            assert_eq!(cov.at(-k), cov.at(k).conj());
        }
    }

    #[test]
    fn two_symmetric_paths_give_cosine() {
        // f0 Ts = 0.1 and f1 Ts = -0.1 with equal gains: R[k] = cos(2 pi 0.1 k).
        let s = DopplerSpec::new(1.0, 1.0, 1.0).unwrap();
        let mut ps = PathSet::from_angles(&[0.0, 0.0], &[0.0, 0.0], &s).unwrap();
        ps.paths[0].doppler_hz = 0.1;
        ps.paths[1].doppler_hz = -0.1;
        let cov = covariance_from_paths(&ps, 8, &s).unwrap();
        for k in 0..8 {
            let expect = (TAU * 0.1 * k as f64).cos();
            assert!((cov.at(k as i64) - Complex::new(expect, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn jakes_zero_lag_and_first_zero() {
        let s = spec();
        let cov = jakes_covariance(&s, 4).unwrap();
        assert_eq!(cov.at(0), Complex::new(1.0, 0.0));
        // A spec whose normalized Doppler puts lag 1 on the first J0 zero.
        let x0 = 2.404825557695773;
        let s2 = DopplerSpec::new(1.0, x0 / TAU * SPEED_OF_LIGHT, 1.0).unwrap();
        let cov2 = jakes_covariance(&s2, 2).unwrap();
        assert!(cov2.at(1).norm() < 1e-12);
    }

    #[test]
    fn monte_carlo_covariance_approaches_jakes() {
        let s = spec();
        let draws = 2000;
        let lags = 8;
        let mut acc = vec![Complex64::default(); lags];
        for seed in 0..draws {
            let ps = sample_paths(100, &s, seed).unwrap();
            let cov = covariance_from_paths(&ps, lags, &s).unwrap();
            for (a, &c) in acc.iter_mut().zip(cov.samples()) {
                *a += c;
            }
        }
        let jakes = jakes_covariance(&s, lags).unwrap();
        for k in 0..lags {
            let mc = acc[k] / Complex::new(draws as f64, 0.0);
            assert!(
                (mc - jakes.at(k as i64)).norm() < 3.0 / (draws as f64).sqrt(),
                "lag {k}: {mc} vs {}",
                jakes.at(k as i64)
            );
        }
    }

    #[test]
    fn covariance_matrix_identity_and_ones() {
        let id = CovarianceFunction::new(vec![
            Complex::new(1.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
        ])
        .unwrap();
        let m = build_covariance_matrix(&id, 3).unwrap();
        assert_eq!(m, CMatrix::identity(3, 3));

        let ones = CovarianceFunction::new(vec![Complex::new(1.0, 0.0); 3]).unwrap();
        let m1 = build_covariance_matrix(&ones, 3).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(m1[(r, c)], Complex::new(1.0, 0.0));
            }
        }
    }

    #[test]
    fn covariance_matrix_is_hermitian_exactly() {
        let s = spec();
        let ps = sample_paths(6, &s, 13).unwrap();
        let cov = covariance_from_paths(&ps, 8, &s).unwrap();
        let m = build_covariance_matrix(&cov, 8).unwrap();
        assert_eq!(m, m.adjoint());
    }

    #[test]
    fn covariance_matrix_requires_enough_lags() {
        let s = spec();
        let ps = sample_paths(2, &s, 1).unwrap();
        let cov = covariance_from_paths(&ps, 3, &s).unwrap();
        assert!(build_covariance_matrix(&cov, 4).is_err());
    }

    #[test]
    fn jakes_matrix_positive_semidefinite() {
        let s = spec();
        let cov = jakes_covariance(&s, 4).unwrap();
        let m = build_covariance_matrix(&cov, 4).unwrap();
        let eig = m.symmetric_eigenvalues();
        for &lambda in eig.iter() {
            assert!(lambda >= -1e-12, "eigenvalue {lambda}");
        }
    }

    #[test]
    fn awgn_zero_variance_is_identity() {
        let h = CVector::from_vec(vec![Complex::new(1.0, -2.0), Complex::new(0.5, 0.25)]);
        assert_eq!(add_awgn(&h, 0.0, 3).unwrap(), h);
    }

    #[test]
    fn awgn_deterministic_per_seed() {
        let h = CVector::zeros(16);
        assert_eq!(add_awgn(&h, 1.0, 42).unwrap(), add_awgn(&h, 1.0, 42).unwrap());
    }

    #[test]
    fn awgn_empirical_power() {
        let m = 10usize;
        let draws = 10_000usize;
        let h = CVector::zeros(m);
        let var = 0.5;
        let mut total = 0.0;
        for seed in 0..draws {
            total += add_awgn(&h, var, seed as u64).unwrap().norm_squared();
        }
        let mean = total / (draws * m) as f64;
        // var(|n_i|^2) = sigma^4, so se of the mean is sigma^2 / sqrt(draws * m).
        let se = var / ((draws * m) as f64).sqrt();
        assert!((mean - var).abs() < 3.0 * se, "mean {mean} vs {var}");
    }

    #[test]
    fn snr_conversion() {
        assert!((snr_to_noise_var(0.0) - 1.0).abs() < 1e-15);
        assert!((snr_to_noise_var(10.0) - 0.1).abs() < 1e-15);
        assert!((snr_to_noise_var(-10.0) - 10.0).abs() < 1e-12);
    }
}
