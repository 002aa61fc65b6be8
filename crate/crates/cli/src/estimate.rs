//! The estimation experiment: identity, assumption-derived, trained-CNN and
//! genie-OMP estimators over an SNR sweep.
//!
//! CNN training warm-starts across the sweep: the highest SNR trains from
//! the no-learn initialization, every lower SNR from the previously trained
//! model, with the training set reshuffled before each stage. Evaluation of
//! all methods then runs per SNR point.

use std::collections::HashMap;

use anyhow::{anyhow, Context, Result};

use chanpred::batch;
use chanpred::channel::{add_awgn, snr_to_noise_var};
use chanpred::cnn::{
    build_spectral_grid, cnn_estimate, cnn_train, estimate_nolearn, CnnParams, CnnTrainingData,
    NoLearnParams,
};
use chanpred::dataset::{split_and_batch, SplitSpec, TestStream, TrainStream};
use chanpred::grid::{make_q, TransformQ};
use chanpred::lmmse::nmse;
use chanpred::omp::{genie_omp, Dictionary};
use chanpred::seed;
use chanpred::CVector;

use crate::cache::ModelCache;
use crate::config::ExperimentConfig;
use crate::data::{
    file_estimate_items, synth_estimate_items, EstimateItem, STREAM_SPLIT, STREAM_TEST_NOISE,
    STREAM_TRAIN_NOISE,
};
use crate::predict::train_config;
use crate::results::ResultRow;

struct EstimateContext {
    cfg: ExperimentConfig,
    q: TransformQ,
    train: TrainStream<EstimateItem>,
    test: Vec<EstimateItem>,
}

fn build_context(cfg: &ExperimentConfig) -> Result<EstimateContext> {
    let m = cfg.est_m();
    let q = make_q(cfg.model.mode.qmode(), m)?;
    let needed = cfg.split.train_batches * cfg.split.train_batch_size
        + cfg.split.test_batches * cfg.split.test_batch_size;
    let items = match cfg.source_path() {
        None => synth_estimate_items(needed, m, cfg.seed),
        Some(_) => file_estimate_items(cfg)?,
    };
    let split = SplitSpec {
        train_batches: cfg.split.train_batches,
        train_batch_size: cfg.split.train_batch_size,
        test_batches: cfg.split.test_batches,
        test_batch_size: cfg.split.test_batch_size,
        split_seed: seed::derive(cfg.seed, STREAM_SPLIT, 0),
    };
    let (train, test_stream): (TrainStream<EstimateItem>, TestStream<EstimateItem>) =
        split_and_batch(items, &split).context("splitting dataset")?;
    let test: Vec<EstimateItem> = test_stream.iter_items().cloned().collect();
    Ok(EstimateContext {
        cfg: cfg.clone(),
        q,
        train,
        test,
    })
}

/// Trains (or loads) the per-SNR CNN models, chaining initializations from
/// high SNR to low.
fn cnn_models(
    ctx: &EstimateContext,
    cache: &ModelCache,
    snrs: &[f64],
) -> Result<HashMap<usize, CnnParams>> {
    let mut order: Vec<usize> = (0..snrs.len()).collect();
    order.sort_by(|&a, &b| snrs[b].partial_cmp(&snrs[a]).unwrap());
    let mut models = HashMap::new();
    let mut prev: Option<CnnParams> = None;
    for si in order {
        let snr_db = snrs[si];
        let noise_var = snr_to_noise_var(snr_db);
        let cache_path = cache.path_for(&ctx.cfg, "cnn", snr_db);
        let trained = if let Some(path) = cache.lookup(&cache_path) {
            CnnParams::load(path)?
        } else {
            let p0 = match &prev {
                Some(p) => p.clone(),
                None => {
                    let grid = build_spectral_grid(&ctx.q, noise_var)?;
                    CnnParams::from_nolearn(&NoLearnParams::from_grid(&grid)?)
                }
            };
            let data = CnnTrainingData {
                channels: ctx.train.items().to_vec(),
                q: ctx.q.clone(),
                noise_var,
                noise_seed: seed::derive(ctx.cfg.seed, STREAM_TRAIN_NOISE, si as u64),
            };
            // Stage index feeds the shuffle seed, so each hierarchical stage
            // reshuffles the train set.
            let cfg_train = train_config(&ctx.cfg, si);
            let (p, _trace) = cnn_train(&p0, &data, &cfg_train)?;
            if let Some(path) = &cache_path {
                p.save(path, ctx.q.m())?;
            }
            p
        };
        prev = Some(trained.clone());
        models.insert(si, trained);
    }
    Ok(models)
}

fn eval_snr(
    ctx: &EstimateContext,
    models: &HashMap<usize, CnnParams>,
    snr_idx: usize,
    snr_db: f64,
) -> Result<Vec<ResultRow>> {
    let noise_var = snr_to_noise_var(snr_db);
    let base = seed::derive(ctx.cfg.seed, STREAM_TEST_NOISE, snr_idx as u64);
    let ys: Vec<CVector> = batch::map_indexed(ctx.test.len(), |i| {
        add_awgn(&ctx.test[i], noise_var, seed::derive(base, 0, i as u64))
            .expect("noise variance is nonnegative")
    });

    let mut rows = Vec::with_capacity(ctx.cfg.methods.len());
    for method in &ctx.cfg.methods {
        let estimates: Vec<CVector> = match method.as_str() {
            "identity" => ys.clone(),
            "nolearn" => {
                let grid = build_spectral_grid(&ctx.q, noise_var)?;
                let p = NoLearnParams::from_grid(&grid)?;
                let out = batch::map(&ys, |y| estimate_nolearn(&p, &ctx.q, y, noise_var));
                out.into_iter().collect::<chanpred::Result<_>>()?
            }
            "cnn" => {
                let p = models
                    .get(&snr_idx)
                    .ok_or_else(|| anyhow!("missing CNN model for SNR {snr_db}"))?;
                let out = batch::map(&ys, |y| cnn_estimate(p, &ctx.q, y, noise_var));
                out.into_iter().collect::<chanpred::Result<_>>()?
            }
            "genie_omp" => {
                let dict =
                    Dictionary::steering(ctx.cfg.est_m(), ctx.cfg.estimate.oversample)?;
                let s_max = ctx.cfg.s_max();
                let out = batch::map_indexed(ctx.test.len(), |i| {
                    genie_omp(&ys[i], &dict, &ctx.test[i], s_max)
                });
                out.into_iter().collect::<chanpred::Result<_>>()?
            }
            other => return Err(anyhow!("unknown estimation method '{other}'")),
        };
        rows.push(ResultRow {
            snr_db,
            method: method.clone(),
            nmse: nmse(&ctx.test, &estimates)?,
            seed: ctx.cfg.seed,
        });
    }
    Ok(rows)
}

/// Runs the full estimation experiment; rows ordered by SNR then configured
/// method order.
pub fn run_estimate(cfg: &ExperimentConfig, cache: &ModelCache) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    cache.ensure_dir()?;
    let ctx = build_context(cfg)?;
    let snrs = cfg.snr.points();
    let models = if cfg.methods.iter().any(|m| m == "cnn") {
        cnn_models(&ctx, cache, &snrs)?
    } else {
        HashMap::new()
    };
    let per_snr: Vec<Result<Vec<ResultRow>>> =
        batch::map_indexed(snrs.len(), |si| eval_snr(&ctx, &models, si, snrs[si]));
    let mut rows = Vec::new();
    for r in per_snr {
        rows.extend(r?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Task;

    fn small_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default_for(Task::Estimate);
        cfg.estimate.antennas = 8;
        cfg.split.train_batches = 10;
        cfg.split.train_batch_size = 20;
        cfg.split.test_batches = 5;
        cfg.split.test_batch_size = 40;
        cfg.train.epochs = 2;
        cfg.io.cache_dir = String::new();
        cfg.snr = crate::config::SnrSection {
            start_db: 0.0,
            stop_db: 5.0,
            step_db: 5.0,
        };
        cfg
    }

    #[test]
    fn identity_nmse_tracks_noise_variance() {
        let mut cfg = small_cfg();
        cfg.methods = vec!["identity".into()];
        let rows = run_estimate(&cfg, &ModelCache::disabled()).unwrap();
        for row in rows {
            let sigma2 = snr_to_noise_var(row.snr_db);
            // 200 test vectors of 8 antennas: se = sigma^2 / sqrt(1600).
            let se = sigma2 / 40.0;
            assert!(
                (row.nmse - sigma2).abs() < 3.0 * se,
                "snr {}: nmse {} vs sigma2 {sigma2}",
                row.snr_db,
                row.nmse
            );
        }
    }

    #[test]
    fn all_methods_run_and_are_deterministic() {
        let cfg = small_cfg();
        let a = run_estimate(&cfg, &ModelCache::disabled()).unwrap();
        let b = run_estimate(&cfg, &ModelCache::disabled()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2 * cfg.methods.len());
    }

    #[test]
    fn caching_reproduces_fresh_results() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_cfg();
        cfg.methods = vec!["cnn".into()];
        cfg.io.cache_dir = dir.path().join("cache").to_string_lossy().into_owned();
        let cache = ModelCache::new(&cfg, true);
        let fresh = run_estimate(&cfg, &cache).unwrap();
        // Second run loads from the snapshot files.
        let cached = run_estimate(&cfg, &cache).unwrap();
        assert_eq!(fresh, cached);
    }
}
