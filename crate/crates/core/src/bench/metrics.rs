//! Error metrics: source-to-truth matching, RMSE and measured SNR.

use nalgebra::DMatrix;

use crate::array_model::NfLocation;
use crate::danm_estimator::max_assignment;
use crate::error::{Error, Result};
use crate::linalg::spherical_unit;
use crate::signal_synthesis::HrisSnapshotBlock;

/// Great-circle angle between two directions.
pub fn angular_distance(a: &NfLocation, b: &NfLocation) -> f64 {
    let u = spherical_unit(a.elevation, a.azimuth);
    let v = spherical_unit(b.elevation, b.azimuth);
    u.dot(&v).clamp(-1.0, 1.0).acos()
}

/// `result[k]` is the estimate assigned to truth `k`, minimising the summed angular distance.
pub fn match_sources(estimates: &[NfLocation], truth: &[NfLocation]) -> Result<Vec<usize>> {
    if estimates.len() != truth.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot match {} estimates to {} sources",
            estimates.len(),
            truth.len()
        )));
    }
    let k = truth.len();
    // rows: estimates, columns: truths
    let w = DMatrix::from_fn(k, k, |i, j| std::f64::consts::PI - angular_distance(&estimates[i], &truth[j]));
    Ok(max_assignment(&w))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmseSummary {
    /// Radians.
    pub elevation: f64,
    /// Radians.
    pub azimuth: f64,
    /// Metres.
    pub range: f64,
    pub used: usize,
    pub excluded: usize,
}

/// `sqrt(mean over trials and sources of squared error)`; failed trials are excluded and counted.
pub fn compute_rmse(trials: &[Option<Vec<NfLocation>>], truth: &[NfLocation]) -> Result<RmseSummary> {
    let mut acc = [0.0; 3];
    let mut used = 0;
    let mut excluded = 0;
    for est in trials {
        let Some(est) = est else {
            excluded += 1;
            continue;
        };
        let assign = match_sources(est, truth)?;
        for (k, t) in truth.iter().enumerate() {
            let e = &est[assign[k]];
            acc[0] += (e.elevation - t.elevation).powi(2);
            acc[1] += (e.azimuth - t.azimuth).powi(2);
            acc[2] += (e.range - t.range).powi(2);
        }
        used += 1;
    }
    let n = (used * truth.len()) as f64;
    let f = |a: f64| if used == 0 { f64::NAN } else { (a / n).sqrt() };
    Ok(RmseSummary { elevation: f(acc[0]), azimuth: f(acc[1]), range: f(acc[2]), used, excluded })
}

/// Root mean square of a list of errors; NaN when empty.
pub fn rms(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        return f64::NAN;
    }
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

/// `10 log10(Σ|y|² / (σ² M T))`; infinite for a noiseless block.
pub fn compute_snr(block: &HrisSnapshotBlock, sigma2: f64) -> Result<f64> {
    if block.samples.is_empty() {
        return Err(Error::InvalidParameter("block is empty".into()));
    }
    if sigma2 == 0.0 {
        return Ok(f64::INFINITY);
    }
    let energy = block.samples.norm_squared();
    Ok(10.0 * (energy / (sigma2 * block.samples.len() as f64)).log10())
}
