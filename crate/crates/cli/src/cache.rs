//! Per-SNR trained-model cache.
//!
//! The cache key hashes every input that shapes a trained model: the
//! serialized effective config (minus the output path), the method name and
//! the SNR point. Snapshots round-trip bit-exactly, so cached and fresh runs
//! produce identical results.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone)]
pub struct ModelCache {
    dir: Option<PathBuf>,
}

impl ModelCache {
    pub fn new(cfg: &ExperimentConfig, enabled: bool) -> Self {
        let dir = if enabled && !cfg.io.cache_dir.is_empty() {
            Some(PathBuf::from(&cfg.io.cache_dir))
        } else {
            None
        };
        Self { dir }
    }

    pub fn disabled() -> Self {
        Self { dir: None }
    }

    pub fn path_for(&self, cfg: &ExperimentConfig, method: &str, snr_db: f64) -> Option<PathBuf> {
        let dir = self.dir.as_ref()?;
        let mut key_cfg = cfg.clone();
        key_cfg.io.out = PathBuf::new();
        key_cfg.io.cache_dir = String::new();
        let mut hasher = Sha256::new();
        hasher.update(key_cfg.to_toml().as_bytes());
        hasher.update(method.as_bytes());
        hasher.update(snr_db.to_le_bytes());
        let digest = hasher.finalize();
        let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        Some(dir.join(format!("{method}_snr{}_{hex}.mps", snr_milli(snr_db))))
    }

    pub fn ensure_dir(&self) -> std::io::Result<()> {
        if let Some(dir) = &self.dir {
            std::fs::create_dir_all(dir)?;
        }
        Ok(())
    }

    pub fn lookup<'a>(&self, path: &'a Option<PathBuf>) -> Option<&'a Path> {
        match path {
            Some(p) if p.exists() => Some(p.as_path()),
            _ => None,
        }
    }
}

fn snr_milli(snr_db: f64) -> i64 {
    (snr_db * 1000.0).round() as i64
}
