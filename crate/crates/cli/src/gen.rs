//! Synthetic channel-file generation.

use std::path::Path;

use anyhow::Result;

use chanpred::batch;
use chanpred::channel::{sample_paths, synthesize_block};
use chanpred::dataset::save_channels;
use chanpred::seed;
use chanpred::{CMatrix, Complex64};

use crate::config::{ExperimentConfig, Task};
use crate::data::{synth_estimate_items, STREAM_DATA};

/// Writes a channel file matching the config's task. For prediction the file
/// is a dim-1 trajectory of `count` independent groups of M+l coefficients
/// (stationary within a group), so windowing it reproduces the groups. For
/// estimation it is `count` rows of ULA channel vectors.
pub fn run_gen(cfg: &ExperimentConfig, out: &Path, count: Option<usize>) -> Result<()> {
    let default_count = cfg.split.train_batches * cfg.split.train_batch_size
        + cfg.split.test_batches * cfg.split.test_batch_size;
    let count = count.unwrap_or(default_count);
    let matrix = match cfg.task {
        Task::Predict => {
            let spec = cfg.doppler.spec()?;
            let m = cfg.model.m;
            let l = cfg.model.l;
            let group = m + l;
            let blocks = batch::map_indexed(count, |i| -> chanpred::Result<Vec<Complex64>> {
                let ps = sample_paths(
                    cfg.model.paths,
                    &spec,
                    seed::derive(cfg.seed, STREAM_DATA, i as u64),
                )?;
                Ok(synthesize_block(&ps, m, l, &spec)?.coeffs().to_vec())
            });
            let blocks = blocks.into_iter().collect::<chanpred::Result<Vec<_>>>()?;
            CMatrix::from_fn(count * group, 1, |r, _| blocks[r / group][r % group])
        }
        Task::Estimate => {
            let items = synth_estimate_items(count, cfg.est_m(), cfg.seed);
            CMatrix::from_fn(count, cfg.est_m(), |r, c| items[r][c])
        }
    };
    save_channels(out, &matrix)?;
    Ok(())
}
