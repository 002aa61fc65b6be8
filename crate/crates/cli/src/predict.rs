//! The prediction experiment: per-SNR model construction, training and NMSE
//! evaluation over a shared test set.

use anyhow::{anyhow, Context, Result};

use chanpred::batch;
use chanpred::channel::{add_awgn, jakes_covariance, snr_to_noise_var, CovarianceFunction, DopplerSpec};
use chanpred::dataset::{split_and_batch, SplitSpec, TestStream, TrainStream};
use chanpred::grid::{
    build_prior_grid, chat, gridded_predict, make_q, structured_params, structured_predict,
    BiasMode, FilterBank, TransformQ,
};
use chanpred::lmmse::{extended_covariance, nmse_scalar, predictor_filter, PredictorFilter};
use chanpred::nn::{self, init_from_structured, NnParams, TrainConfig, TrainItem, TrainingData};
use chanpred::seed;
use chanpred::{CVector, Complex64};

use crate::cache::ModelCache;
use crate::config::{ExperimentConfig, Mode};
use crate::data::{
    dominant_doppler, empirical_covariance, file_predict_items, synth_predict_items, PredictItem,
    STREAM_SHUFFLE, STREAM_SPLIT, STREAM_TEST_NOISE, STREAM_TRAIN_NOISE,
};
use crate::results::ResultRow;

/// Everything shared across SNR points.
struct PredictContext {
    cfg: ExperimentConfig,
    spec: DopplerSpec,
    train: TrainStream<PredictItem>,
    test: Vec<PredictItem>,
    /// Fallback statistics for file-sourced data.
    emp_cov: Option<CovarianceFunction>,
    emp_sp_cov: Option<CovarianceFunction>,
}

fn filter_from_cov(
    cov: &CovarianceFunction,
    m: usize,
    l: usize,
    noise_var: f64,
) -> chanpred::Result<PredictorFilter> {
    let ext = extended_covariance(cov, m, l)?;
    predictor_filter(&ext, noise_var)
}

fn build_context(cfg: &ExperimentConfig) -> Result<PredictContext> {
    let spec = cfg.doppler.spec()?;
    let needed = cfg.split.train_batches * cfg.split.train_batch_size
        + cfg.split.test_batches * cfg.split.test_batch_size;
    let items = match cfg.source_path() {
        None => synth_predict_items(needed, cfg, &spec, cfg.seed)?,
        Some(_) => file_predict_items(cfg)?,
    };
    let split = SplitSpec {
        train_batches: cfg.split.train_batches,
        train_batch_size: cfg.split.train_batch_size,
        test_batches: cfg.split.test_batches,
        test_batch_size: cfg.split.test_batch_size,
        split_seed: seed::derive(cfg.seed, STREAM_SPLIT, 0),
    };
    let (train, test_stream): (TrainStream<PredictItem>, TestStream<PredictItem>) =
        split_and_batch(items, &split).context("splitting dataset")?;
    let test: Vec<PredictItem> = test_stream.iter_items().cloned().collect();

    let (emp_cov, emp_sp_cov) = if cfg.source_path().is_some() {
        let refs: Vec<&PredictItem> = train.items().iter().collect();
        let emp = empirical_covariance(&refs, cfg.model.m, cfg.model.l)?;
        let f = dominant_doppler(&emp, &spec);
        let sp = chanpred::channel::single_path_covariance(
            f,
            cfg.model.m + cfg.model.l,
            &spec,
        )?;
        (Some(emp), Some(sp))
    } else {
        (None, None)
    };
    Ok(PredictContext {
        cfg: cfg.clone(),
        spec,
        train,
        test,
        emp_cov,
        emp_sp_cov,
    })
}

fn noisy_observations(ctx: &PredictContext, snr_idx: usize, noise_var: f64) -> Vec<CVector> {
    let base = seed::derive(ctx.cfg.seed, STREAM_TEST_NOISE, snr_idx as u64);
    batch::map_indexed(ctx.test.len(), |i| {
        add_awgn(&ctx.test[i].obs, noise_var, seed::derive(base, 0, i as u64))
            .expect("noise variance is nonnegative")
    })
}

/// Per-item LMMSE prediction from the item's own covariance, falling back to
/// shared empirical statistics for file data.
fn lmmse_per_item(
    ctx: &PredictContext,
    ys: &[CVector],
    noise_var: f64,
    strongest_path: bool,
) -> Result<Vec<Complex64>> {
    let m = ctx.cfg.model.m;
    let l = ctx.cfg.model.l;
    let shared = if strongest_path {
        ctx.emp_sp_cov.as_ref()
    } else {
        ctx.emp_cov.as_ref()
    };
    let shared_filter = match shared {
        Some(cov) => Some(filter_from_cov(cov, m, l, noise_var)?),
        None => None,
    };
    let preds = batch::map_indexed(ctx.test.len(), |i| -> chanpred::Result<Complex64> {
        let item = &ctx.test[i];
        match &shared_filter {
            Some(f) => Ok(f.predict(&ys[i])),
            None => {
                let cov = if strongest_path {
                    item.cov_sp.as_ref().expect("synthetic item")
                } else {
                    item.cov_exact.as_ref().expect("synthetic item")
                };
                Ok(filter_from_cov(cov, m, l, noise_var)?.predict(&ys[i]))
            }
        }
    });
    preds
        .into_iter()
        .collect::<chanpred::Result<_>>()
        .map_err(Into::into)
}

fn structured_pipeline(
    ctx: &PredictContext,
    mode: Mode,
    noise_var: f64,
) -> Result<(FilterBank, TransformQ, chanpred::grid::StructuredParams)> {
    let m = ctx.cfg.model.m;
    let q = make_q(mode.qmode(), m)?;
    let n_grid = ctx.cfg.n_grid_for(mode);
    let (_, bank) = build_prior_grid(n_grid, &ctx.spec, m, ctx.cfg.model.l, noise_var)?;
    let params = structured_params(&bank, &q, BiasMode::Approximated)?;
    Ok((bank, q, params))
}

fn nn_method(
    ctx: &PredictContext,
    cache: &ModelCache,
    method: &str,
    mode: Mode,
    snr_idx: usize,
    snr_db: f64,
    noise_var: f64,
    ys: &[CVector],
) -> Result<Vec<Complex64>> {
    let (_, q, params) = structured_pipeline(ctx, mode, noise_var)?;
    let cache_path = cache.path_for(&ctx.cfg, method, snr_db);
    let trained = if let Some(path) = cache.lookup(&cache_path) {
        NnParams::load(path)?
    } else {
        let p0 = init_from_structured(&params);
        let data = TrainingData {
            items: ctx
                .train
                .items()
                .iter()
                .map(|it| TrainItem {
                    obs: it.obs.clone(),
                    target: it.target,
                })
                .collect(),
            q: q.clone(),
            noise_var,
            noise_seed: seed::derive(ctx.cfg.seed, STREAM_TRAIN_NOISE, snr_idx as u64),
        };
        let cfg_train = train_config(&ctx.cfg, snr_idx);
        let (p, _trace) = nn::train(&p0, &data, &cfg_train)?;
        if let Some(path) = &cache_path {
            p.save(path)?;
        }
        p
    };
    let preds = batch::map_indexed(ctx.test.len(), |i| {
        let c = chat(&ys[i], &q, noise_var).expect("positive noise variance");
        nn::predict(&trained, &c, &ys[i])
    });
    Ok(preds)
}

pub fn train_config(cfg: &ExperimentConfig, snr_idx: usize) -> TrainConfig {
    TrainConfig {
        batch_size: cfg.sgd_batch_size(),
        epochs: cfg.train.epochs,
        learning_rate: cfg.train.learning_rate,
        beta1: cfg.train.beta1,
        beta2: cfg.train.beta2,
        epsilon: cfg.train.epsilon,
        shuffle_seed: seed::derive(cfg.seed, STREAM_SHUFFLE, snr_idx as u64),
        plateau_tol: if cfg.train.plateau_tol > 0.0 {
            Some(cfg.train.plateau_tol)
        } else {
            None
        },
        plateau_window: cfg.train.plateau_window,
    }
}

fn eval_snr(
    ctx: &PredictContext,
    cache: &ModelCache,
    snr_idx: usize,
    snr_db: f64,
) -> Result<Vec<ResultRow>> {
    let noise_var = snr_to_noise_var(snr_db);
    let m = ctx.cfg.model.m;
    let l = ctx.cfg.model.l;
    let ys = noisy_observations(ctx, snr_idx, noise_var);
    let targets: Vec<Complex64> = ctx.test.iter().map(|t| t.target).collect();

    let mut rows = Vec::with_capacity(ctx.cfg.methods.len());
    for method in &ctx.cfg.methods {
        let preds: Vec<Complex64> = match method.as_str() {
            "lmmse_perfect" => lmmse_per_item(ctx, &ys, noise_var, false)?,
            "lmmse_sp" => lmmse_per_item(ctx, &ys, noise_var, true)?,
            "lmmse_jakes" => {
                let cov = jakes_covariance(&ctx.spec, m + l)?;
                let filter = filter_from_cov(&cov, m, l, noise_var)?;
                batch::map(&ys, |y| filter.predict(y))
            }
            "gridded" => {
                let n_grid = ctx.cfg.n_grid_for(ctx.cfg.model.mode);
                let (_, bank) = build_prior_grid(n_grid, &ctx.spec, m, l, noise_var)?;
                let out = batch::map(&ys, |y| gridded_predict(&bank, y, noise_var));
                out.into_iter().collect::<chanpred::Result<_>>()?
            }
            "structured_circ" | "structured_toep" => {
                let mode = if method.ends_with("circ") {
                    Mode::Circulant
                } else {
                    Mode::Toeplitz
                };
                let (_, q, params) = structured_pipeline(ctx, mode, noise_var)?;
                let out = batch::map(&ys, |y| {
                    let c = chat(y, &q, noise_var)?;
                    structured_predict(&params, &c, y)
                });
                out.into_iter().collect::<chanpred::Result<_>>()?
            }
            "nn_circ" | "nn_toep" => {
                let mode = if method.ends_with("circ") {
                    Mode::Circulant
                } else {
                    Mode::Toeplitz
                };
                nn_method(ctx, cache, method, mode, snr_idx, snr_db, noise_var, &ys)?
            }
            other => return Err(anyhow!("unknown prediction method '{other}'")),
        };
        rows.push(ResultRow {
            snr_db,
            method: method.clone(),
            nmse: nmse_scalar(&targets, &preds)?,
            seed: ctx.cfg.seed,
        });
    }
    Ok(rows)
}

/// Runs the full prediction experiment and returns rows ordered by SNR then
/// configured method order.
pub fn run_predict(cfg: &ExperimentConfig, cache: &ModelCache) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    cache.ensure_dir()?;
    let ctx = build_context(cfg)?;
    let snrs = cfg.snr.points();
    let per_snr: Vec<Result<Vec<ResultRow>>> =
        batch::map_indexed(snrs.len(), |si| eval_snr(&ctx, cache, si, snrs[si]));
    let mut rows = Vec::new();
    for r in per_snr {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Convenience accessor used by tests: NMSE of one method at one SNR.
pub fn nmse_of(rows: &[ResultRow], method: &str, snr_db: f64) -> Option<f64> {
    rows.iter()
        .find(|r| r.method == method && (r.snr_db - snr_db).abs() < 1e-9)
        .map(|r| r.nmse)
}
