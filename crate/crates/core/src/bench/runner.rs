//! Sweep execution and per-point aggregation.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::array_model::NfLocation;
use crate::bench::config::ScenarioConfig;
use crate::bench::metrics::{compute_rmse, match_sources, rms};
use crate::bench::pipeline::{run_trial, Stage2Estimate, TrialContext, TrialEstimates, TrialResult};
use crate::error::{Error, Result};

/// One sweep point. Angles are in degrees, distances in metres, NaN where a stage did not run.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseRow {
    pub sweep_value: f64,
    pub trials: usize,
    pub failed: usize,
    pub danm_phi: f64,
    pub danm_theta: f64,
    pub danm_r: f64,
    pub phi: f64,
    pub theta: f64,
    pub r: f64,
    pub crb_phi: f64,
    pub crb_theta: f64,
    pub crb_r: f64,
    pub bearing_phi: f64,
    pub bearing_theta: f64,
    pub p_r: f64,
    pub peb: f64,
    pub bs_power: f64,
    pub opt_bearing_phi: f64,
    pub opt_bearing_theta: f64,
    pub opt_p_r: f64,
    pub opt_peb: f64,
    pub opt_bs_power: f64,
    pub p_u: f64,
    pub snr_db: f64,
}

impl RmseRow {
    pub fn failure_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.failed as f64 / self.trials as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RmseTable {
    pub rows: Vec<RmseRow>,
}

impl RmseTable {
    pub fn max_failure_rate(&self) -> f64 {
        self.rows.iter().map(RmseRow::failure_rate).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub table: RmseTable,
    pub trials: Vec<TrialResult>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn position_rmse(errors: &[Vector3<f64>]) -> f64 {
    rms(&errors.iter().map(|e| e.norm()).collect::<Vec<_>>())
}

#[derive(Default)]
struct Stage2Columns {
    bearing_phi: f64,
    bearing_theta: f64,
    p_r: f64,
    peb: f64,
    bs_power: f64,
}

fn stage2_columns<'a>(
    results: impl Iterator<Item = &'a Stage2Estimate>,
    ctx: &TrialContext,
) -> Result<Stage2Columns> {
    let truth = ctx.true_bearings()?;
    let mut dphi = Vec::new();
    let mut dtheta = Vec::new();
    let mut dp = Vec::new();
    let mut peb2 = Vec::new();
    let mut power = Vec::new();
    for est in results {
        for (b, t) in est.bearings.iter().zip(&truth) {
            dphi.push(b.elevation - t.elevation);
            dtheta.push(crate::linalg::wrap_angle(b.azimuth - t.azimuth));
        }
        dp.push(est.position - ctx.hris_position);
        peb2.push(est.peb * est.peb);
        power.push(est.bs_power);
    }
    if dp.is_empty() {
        return Ok(Stage2Columns {
            bearing_phi: f64::NAN,
            bearing_theta: f64::NAN,
            p_r: f64::NAN,
            peb: f64::NAN,
            bs_power: f64::NAN,
        });
    }
    Ok(Stage2Columns {
        bearing_phi: rms(&dphi).to_degrees(),
        bearing_theta: rms(&dtheta).to_degrees(),
        p_r: position_rmse(&dp),
        peb: mean(peb2.into_iter()).sqrt(),
        bs_power: mean(power.into_iter()),
    })
}

/// Aggregates the trials of one sweep point.
pub fn aggregate(ctx: &TrialContext, sweep_value: f64, trials: &[TrialResult]) -> Result<RmseRow> {
    let truth = ctx.truth();
    let ok: Vec<&TrialEstimates> = trials.iter().filter_map(|t| t.outcome.as_ref().ok()).collect();
    let failed = trials.len() - ok.len();
    let option = |f: fn(&TrialEstimates) -> &Vec<NfLocation>| -> Vec<Option<Vec<NfLocation>>> {
        trials.iter().map(|t| t.outcome.as_ref().ok().map(|e| f(e).clone())).collect()
    };
    let danm = compute_rmse(&option(|e| &e.danm), &truth)?;
    let fin = compute_rmse(&option(|e| &e.targets), &truth)?;

    // Mean CRB variance over trials and sources, reported as a standard deviation.
    let k = truth.len();
    let mut crb = [f64::NAN; 3];
    let bounds: Vec<&Vec<f64>> = ok.iter().filter_map(|e| e.crb.as_ref()).collect();
    if !bounds.is_empty() {
        for (p, c) in crb.iter_mut().enumerate() {
            *c = mean(bounds.iter().flat_map(|b| (0..k).map(move |s| b[3 * s + p].powi(2)))).sqrt();
        }
    }

    let random = stage2_columns(ok.iter().filter_map(|e| e.random.as_ref()), ctx)?;
    let optimized = stage2_columns(ok.iter().filter_map(|e| e.optimized.as_ref()), ctx)?;

    let p_true = ctx.true_absolute();
    let mut du = Vec::new();
    for e in &ok {
        let assign = match_sources(&e.targets, &truth)?;
        for (s, p) in p_true.iter().enumerate() {
            du.push(e.absolute[assign[s]] - p);
        }
    }

    Ok(RmseRow {
        sweep_value,
        trials: trials.len(),
        failed,
        danm_phi: danm.elevation.to_degrees(),
        danm_theta: danm.azimuth.to_degrees(),
        danm_r: danm.range,
        phi: fin.elevation.to_degrees(),
        theta: fin.azimuth.to_degrees(),
        r: fin.range,
        crb_phi: crb[0].to_degrees(),
        crb_theta: crb[1].to_degrees(),
        crb_r: crb[2],
        bearing_phi: random.bearing_phi,
        bearing_theta: random.bearing_theta,
        p_r: random.p_r,
        peb: random.peb,
        bs_power: random.bs_power,
        opt_bearing_phi: optimized.bearing_phi,
        opt_bearing_theta: optimized.bearing_theta,
        opt_p_r: optimized.p_r,
        opt_peb: optimized.peb,
        opt_bs_power: optimized.bs_power,
        p_u: if du.is_empty() { f64::NAN } else { position_rmse(&du) },
        snr_db: mean(ok.iter().map(|e| e.snr_db)),
    })
}

/// Runs every sweep point and trial on a pool of `workers` threads.
///
/// Trials are collected in (point, trial) order, so the table does not depend on scheduling.
pub fn run_scenario(cfg: &ScenarioConfig, workers: usize) -> Result<ScenarioRun> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for (point, value) in cfg.sweep_values().into_iter().enumerate() {
        let ctx = TrialContext::new(cfg, value)?;
        let trials: Vec<TrialResult> =
            pool.install(|| (0..cfg.run.trials).into_par_iter().map(|t| run_trial(&ctx, point, t, value)).collect());
        let row = aggregate(&ctx, value, &trials)?;
        log::info!(
            "sweep value {value}: {} trials, {} failed, phi {:.4e} deg theta {:.4e} deg",
            row.trials,
            row.failed,
            row.phi,
            row.theta
        );
        rows.push(row);
        all.extend(trials);
    }
    Ok(ScenarioRun { table: RmseTable { rows }, trials: all })
}
