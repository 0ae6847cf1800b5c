//! Experiment metrics: the two SNR conventions and ROC/AUC over edge
//! scores.

use gtf_core::SignalMatrix;
use ndarray::ArrayView2;

use crate::error::{HarnessError, Result};

/// Input SNR in dB: 10 log10(||Y*|| / (sigma^2 n d)). The norm enters
/// unsquared in this convention.
pub fn input_snr_db(y_star: &SignalMatrix, sigma2: f64) -> Result<f64> {
    if sigma2 <= 0.0 {
        return Err(HarnessError::Config("sigma2 must be positive".into()));
    }
    let norm = y_star.frobenius_sq().sqrt();
    if norm == 0.0 {
        return Err(HarnessError::ZeroSignal);
    }
    let nd = (y_star.n() * y_star.d()) as f64;
    Ok(10.0 * (norm / (sigma2 * nd)).log10())
}

/// Noise variance that makes [`input_snr_db`] hit `target_db`.
pub fn sigma2_for_input_snr(y_star: &SignalMatrix, target_db: f64) -> Result<f64> {
    let norm = y_star.frobenius_sq().sqrt();
    if norm == 0.0 {
        return Err(HarnessError::ZeroSignal);
    }
    let nd = (y_star.n() * y_star.d()) as f64;
    Ok(norm / (nd * 10f64.powf(target_db / 10.0)))
}

/// Reconstruction SNR in dB: 10 log10(||Y*||_F / ||B - Y*||_F), +inf on
/// exact recovery.
pub fn recon_snr_db(y_star: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    let num: f64 = y_star.iter().map(|v| v * v).sum::<f64>().sqrt();
    let den: f64 = y_star
        .iter()
        .zip(b.iter())
        .map(|(a, c)| (a - c) * (a - c))
        .sum::<f64>()
        .sqrt();
    if den == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (num / den).log10()
}

/// An ROC curve as (FPR, TPR) points ordered by threshold, plus the
/// trapezoidal area under it.
#[derive(Clone, Debug)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Threshold sweep of real-valued scores against boolean truth. Ties are
/// handled as a single threshold step, which makes the trapezoidal area
/// exact for tied scores as well.
pub fn roc_curve(scores: &[f64], truth: &[bool]) -> Result<RocCurve> {
    assert_eq!(scores.len(), truth.len());
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(HarnessError::DegenerateTruth);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));

    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        // Consume the whole tie group at this threshold.
        let threshold = scores[order[i]];
        let (prev_tp, prev_fp) = (tp, fp);
        while i < order.len() && scores[order[i]] == threshold {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let (x0, y0) = (prev_fp as f64 / neg as f64, prev_tp as f64 / pos as f64);
        let (x1, y1) = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        auc += (x1 - x0) * (y0 + y1) / 2.0;
        points.push((x1, y1));
    }
    Ok(RocCurve { points, auc })
}
