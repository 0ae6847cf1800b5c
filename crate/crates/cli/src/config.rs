//! Run configuration: a flat key set shared by every subcommand, loadable
//! from a JSON file with command-line flags taking precedence.

use std::path::Path;

use clap::ValueEnum;
use gtf_core::sa::Schedule;
use gtf_core::spectral::SpectralOpts;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Which solver drives a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Spectral,
    Sa,
}

/// Resolved parameters for a run. Field names mirror the usual symbols
/// (lambda, k_max, sigma2, p, q, sizes, epsilon); each subcommand reads the
/// subset it needs.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // Planted-community generator.
    pub sizes: Vec<usize>,
    pub p: f64,
    pub q: f64,
    /// Per-community ground-truth signal values.
    pub signal_values: Vec<f64>,
    /// Number of independent noisy realizations stacked as columns.
    pub d: usize,
    /// Noise variance per entry.
    pub sigma2: f64,
    /// When set, sigma2 is derived so the input SNR hits this target.
    pub input_snr_db: Option<f64>,

    // Solver.
    pub lambda: f64,
    pub k_max: usize,
    pub method: Method,
    pub restarts: usize,
    pub max_iter: usize,
    pub reweight_passes: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub cool: f64,
    pub sweeps: usize,
    pub sa_restarts: usize,

    // Experiment repetition and sweeps.
    pub seed: u64,
    /// Independent repetitions (graphs / noise draws).
    pub seeds: usize,
    /// Penalty sweep; commands that need one fall back to a built-in grid.
    pub lambda_grid: Option<Vec<f64>>,
    /// Input-SNR grid for the denoising sweep.
    pub snr_grid_db: Vec<f64>,

    // Semi-supervised classification.
    pub trials: usize,
    pub label_fraction: f64,
    pub knn: usize,
    pub epsilon: f64,
    pub num_classes: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sizes: vec![50, 70, 80],
            p: 0.2,
            q: 0.05,
            signal_values: vec![1.0, -1.0, 0.0],
            d: 10,
            sigma2: 0.05,
            input_snr_db: Some(12.0),
            lambda: 0.2,
            k_max: 8,
            method: Method::Spectral,
            restarts: 10,
            max_iter: 300,
            reweight_passes: 1,
            t_start: 100.0,
            t_end: 0.001,
            cool: 0.99,
            sweeps: 1,
            sa_restarts: 1,
            seed: 0,
            seeds: 5,
            lambda_grid: None,
            snr_grid_db: vec![6.0, 9.0, 12.0, 15.0],
            trials: 100,
            label_fraction: 0.2,
            knn: 5,
            epsilon: 0.01,
            num_classes: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|_| HarnessError::DataNotFound(path.display().to_string()))?;
        serde_json::from_str(&text).map_err(HarnessError::from)
    }

    pub fn spectral_opts(&self) -> SpectralOpts {
        SpectralOpts {
            restarts: self.restarts,
            max_iter: self.max_iter,
            reweight_passes: self.reweight_passes,
            seed: self.seed,
        }
    }

    pub fn schedule(&self) -> Schedule {
        Schedule {
            t_start: self.t_start,
            t_end: self.t_end,
            cool: self.cool,
            sweeps_per_temp: self.sweeps,
        }
    }

    /// Default 30-point log-spaced penalty sweep over [1e-3, 1e2].
    pub fn roc_lambda_grid(&self) -> Vec<f64> {
        match &self.lambda_grid {
            Some(g) => g.clone(),
            None => log_grid(1e-3, 1e2, 30),
        }
    }

    /// Penalty candidates for best-of sweeps in the denoising runs.
    pub fn denoise_lambda_grid(&self) -> Vec<f64> {
        match &self.lambda_grid {
            Some(g) => g.clone(),
            None => vec![0.05, 0.1, 0.2, 0.5, 1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(HarnessError::Config("sizes must be nonempty and positive".into()));
        }
        if self.signal_values.len() != self.sizes.len() {
            return Err(HarnessError::Config(format!(
                "signal_values has {} entries for {} communities",
                self.signal_values.len(),
                self.sizes.len()
            )));
        }
        if self.d == 0 || self.k_max == 0 {
            return Err(HarnessError::Config("d and k_max must be positive".into()));
        }
        if !(self.label_fraction > 0.0 && self.label_fraction < 1.0) {
            return Err(HarnessError::Config("label_fraction must lie in (0,1)".into()));
        }
        Ok(())
    }
}

/// Log-spaced grid with `points` entries from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}
