//! Data sources: synthetic generators and file ingestion, behind one item
//! shape per task.

use anyhow::{bail, Context, Result};
use std::f64::consts::TAU;

use chanpred::batch;
use chanpred::channel::{
    covariance_from_paths, sample_paths, single_path_covariance, synthesize_block,
    CovarianceFunction, DopplerSpec,
};
use chanpred::cnn::steering_vector;
use chanpred::dataset::{load_channels, normalize, window_trajectory};
use chanpred::seed;
use chanpred::{CVector, Complex64};

use crate::config::ExperimentConfig;

// Seed streams, one per independent randomness source.
pub const STREAM_DATA: u64 = 1;
pub const STREAM_SPLIT: u64 = 2;
pub const STREAM_TEST_NOISE: u64 = 3;
pub const STREAM_TRAIN_NOISE: u64 = 4;
pub const STREAM_SHUFFLE: u64 = 5;
pub const STREAM_SEEDVAR: u64 = 6;

/// One prediction realization. Synthetic items carry their per-realization
/// exact and strongest-path covariances; file items fall back to empirical
/// statistics computed over the training split.
#[derive(Debug, Clone)]
pub struct PredictItem {
    pub obs: CVector,
    pub target: Complex64,
    pub cov_exact: Option<CovarianceFunction>,
    pub cov_sp: Option<CovarianceFunction>,
}

/// Synthesizes one independent block per item: fresh path phases and DoAs,
/// wide-sense stationary within the block.
pub fn synth_predict_items(
    count: usize,
    cfg: &ExperimentConfig,
    spec: &DopplerSpec,
    base_seed: u64,
) -> Result<Vec<PredictItem>> {
    let m = cfg.model.m;
    let l = cfg.model.l;
    let p = cfg.model.paths;
    let items = batch::map_indexed(count, |i| -> chanpred::Result<PredictItem> {
        let ps = sample_paths(p, spec, seed::derive(base_seed, STREAM_DATA, i as u64))?;
        let block = synthesize_block(&ps, m, l, spec)?;
        let cov_exact = covariance_from_paths(&ps, m + l, spec)?;
        let strongest = ps.strongest();
        let cov_sp = single_path_covariance(strongest.doppler_hz, m + l, spec)?;
        Ok(PredictItem {
            obs: block.observation_reversed(),
            target: block.target(l)?,
            cov_exact: Some(cov_exact),
            cov_sp: Some(cov_sp),
        })
    });
    items.into_iter().collect::<chanpred::Result<_>>().map_err(Into::into)
}

/// Loads a dim-1 trajectory file, normalizes per-coefficient power to one,
/// and windows it into observation/target groups.
pub fn file_predict_items(cfg: &ExperimentConfig) -> Result<Vec<PredictItem>> {
    let path = cfg.source_path().expect("caller checked source");
    let channels = load_channels(path).with_context(|| format!("loading {}", path.display()))?;
    if channels.ncols() != 1 {
        bail!(
            "prediction expects a dim-1 trajectory file, got dim {}",
            channels.ncols()
        );
    }
    let channels = normalize(&channels, 1.0)?;
    let coeffs: Vec<Complex64> = (0..channels.nrows()).map(|r| channels[(r, 0)]).collect();
    let items = window_trajectory(&coeffs, cfg.model.m, cfg.model.l)?;
    Ok(items
        .into_iter()
        .map(|w| PredictItem {
            obs: w.obs,
            target: w.target,
            cov_exact: None,
            cov_sp: None,
        })
        .collect())
}

/// Sample autocovariance R_hat[0..M+l-1] over a set of windowed groups.
/// Lags 0..M-1 come from pairs inside the observation window, lags l..M-1+l
/// from target/observation pairs; together they cover every needed lag for
/// l <= M.
pub fn empirical_covariance(
    items: &[&PredictItem],
    obs_len: usize,
    step: usize,
) -> Result<CovarianceFunction> {
    if items.is_empty() {
        bail!("empirical covariance needs at least one group");
    }
    if step > obs_len {
        bail!("empirical covariance requires l <= M");
    }
    let lags = obs_len + step;
    let mut acc = vec![Complex64::default(); lags];
    let mut counts = vec![0u64; lags];
    for item in items {
        // obs is reversed: obs[i] = h[M-1-i].
        for a in 0..obs_len {
            for b in a..obs_len {
                let k = b - a;
                // h[m+k] h[m]^* with m = M-1-b.
                acc[k] += item.obs[a] * item.obs[b].conj();
                counts[k] += 1;
            }
        }
        // target = h[M-1+l]; pairing with h[M-1-i] gives lag l+i.
        for i in 0..obs_len {
            let k = step + i;
            acc[k] += item.target * item.obs[i].conj();
            counts[k] += 1;
        }
    }
    let samples: Vec<Complex64> = acc
        .iter()
        .zip(&counts)
        .map(|(a, &c)| {
            if c == 0 {
                Complex64::default()
            } else {
                a / Complex64::new(c as f64, 0.0)
            }
        })
        .collect();
    // Enforce a real zero lag.
    let mut samples = samples;
    samples[0] = Complex64::new(samples[0].re, 0.0);
    CovarianceFunction::new(samples).map_err(Into::into)
}

/// Dominant single-path Doppler under the empirical covariance: maximizes the
/// matched-filter response |sum_k R[k] exp(-j 2 pi f Ts k)| over a fine grid
/// of [-B_D, B_D].
pub fn dominant_doppler(cov: &CovarianceFunction, spec: &DopplerSpec) -> f64 {
    let bd = spec.doppler_bandwidth();
    let ts = spec.symbol_duration_s;
    let grid = 2048;
    let mut best_f = 0.0;
    let mut best_score = -1.0;
    for i in 0..=grid {
        let f = -bd + 2.0 * bd * i as f64 / grid as f64;
        let mut acc = Complex64::default();
        for k in 0..cov.len() {
            acc += cov.at(k as i64) * Complex64::from_polar(1.0, -TAU * f * ts * k as f64);
        }
        let score = acc.norm();
        if score > best_score {
            best_score = score;
            best_f = f;
        }
    }
    best_f
}

/// One estimation realization: a clean M-dimensional channel vector.
pub type EstimateItem = CVector;

/// Synthetic single-cluster ULA channels: one path at a uniform spatial
/// frequency with a uniform phase, normalized so E||h||^2 = M exactly.
pub fn synth_estimate_items(
    count: usize,
    antennas: usize,
    base_seed: u64,
) -> Vec<EstimateItem> {
    use rand::{Rng, SeedableRng};
    batch::map_indexed(count, |i| {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed::derive(
            base_seed,
            STREAM_DATA,
            i as u64,
        ));
        let xi: f64 = rng.random_range(0.0..1.0);
        let phase: f64 = rng.random_range(0.0..TAU);
        steering_vector(antennas, xi) * Complex64::from_polar(1.0, phase)
    })
}

/// Loads an estimation file (rows are channel vectors of dim M) and
/// normalizes the mean power to M.
pub fn file_estimate_items(cfg: &ExperimentConfig) -> Result<Vec<EstimateItem>> {
    let path = cfg.source_path().expect("caller checked source");
    let channels = load_channels(path).with_context(|| format!("loading {}", path.display()))?;
    if channels.ncols() != cfg.est_m() {
        bail!(
            "estimation file has dim {}, config expects {} antennas",
            channels.ncols(),
            cfg.est_m()
        );
    }
    let channels = normalize(&channels, cfg.est_m() as f64)?;
    Ok((0..channels.nrows())
        .map(|r| CVector::from_fn(channels.ncols(), |c, _| channels[(r, c)]))
        .collect())
}
