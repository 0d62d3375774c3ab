//! One Monte Carlo trial of the full two-stage pipeline.

use std::time::Instant;

use nalgebra::{DMatrix, Vector3};
use rand::Rng;

use crate::array_model::{Axis, BsGeometry, HrisGeometry, NearFieldSource, NfLocation, SphericalBearing};
use crate::bench::config::{PointSettings, ScenarioConfig};
use crate::bench::metrics::compute_snr;
use crate::bounds::{bs_fim, hris_peb, target_crb, target_fim};
use crate::danm_estimator::{estimate_targets, DanmSettings, Stage1Config};
use crate::error::Result;
use crate::hris_locator::{estimate_bearing, recover_source_signals, steering_matrix, triangulate, Stage2Config};
use crate::linalg::spherical_unit;
use crate::phase_optimizer::optimize_schedule;
use crate::signal_synthesis::{
    bs_channel, random_phase_schedule, reflected_signal, seeded_stream, synthesize_bs_rx, synthesize_hris_rx_with,
    ArmSchedules, ChannelSpec, HrisSnapshotBlock, SourceSignalModel,
};
use crate::tls_refine::{build_design_matrix, refine};
use crate::virtual_coarray::LagSet;
use crate::C64;

/// Independent seeds of one trial. They depend on the trial index only, so every sweep point
/// sees the same signal and noise realisations up to scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub signal: u64,
    pub hris_noise: u64,
    pub schedules: u64,
    pub bs_noise: u64,
    pub randomization: u64,
}

impl TrialSeeds {
    pub fn derive(master: u64, trial: usize) -> Self {
        let mut rng = seeded_stream(master, trial as u64);
        Self {
            signal: rng.gen(),
            hris_noise: rng.gen(),
            schedules: rng.gen(),
            bs_noise: rng.gen(),
            randomization: rng.gen(),
        }
    }
}

/// Stage-2 outcome under one phase schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Estimate {
    pub bearings: Vec<SphericalBearing>,
    pub position: Vector3<f64>,
    /// Noise-free received power per BS antenna and slot, averaged over arms and stations.
    pub bs_power: f64,
    pub peb: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialEstimates {
    pub danm: Vec<NfLocation>,
    /// TLS-refined estimates when enabled, otherwise the DANM ones.
    pub targets: Vec<NfLocation>,
    pub tls_rejected: usize,
    pub under_resolved: bool,
    /// CRB square roots `[φ_1, θ_1, r_1, …]` at the true parameters.
    pub crb: Option<Vec<f64>>,
    pub snr_db: f64,
    pub danm_iterations: usize,
    pub unconverged: usize,
    pub random: Option<Stage2Estimate>,
    pub optimized: Option<Stage2Estimate>,
    /// `p̂_R + r̂ g(φ̂, θ̂)`, aligned with `targets`.
    pub absolute: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub point: usize,
    pub trial: usize,
    pub sweep_value: f64,
    pub outcome: std::result::Result<TrialEstimates, String>,
    pub seconds: f64,
}

/// Everything a trial needs that does not depend on the trial index.
#[derive(Debug, Clone)]
pub struct TrialContext {
    pub geom: HrisGeometry,
    pub sources: Vec<NearFieldSource>,
    pub stations: Vec<BsGeometry>,
    pub hris_position: Vector3<f64>,
    pub channel: ChannelSpec,
    pub point: PointSettings,
    pub danm: DanmSettings,
    pub config: ScenarioConfig,
}

impl TrialContext {
    pub fn new(config: &ScenarioConfig, value: f64) -> Result<Self> {
        let point = config.point(value);
        Ok(Self {
            geom: config.hris()?,
            sources: config.sources()?,
            stations: config.stations()?,
            hris_position: config.hris_position(),
            channel: config.channel(point.noise_variance)?,
            point,
            danm: config.danm_settings(),
            config: config.clone(),
        })
    }

    pub fn truth(&self) -> Vec<NfLocation> {
        self.sources.iter().map(|s| s.location).collect()
    }

    /// True bearings from the surface to each BS.
    pub fn true_bearings(&self) -> Result<Vec<SphericalBearing>> {
        self.stations.iter().map(|s| SphericalBearing::between(&self.hris_position, &s.position)).collect()
    }

    /// True absolute target positions.
    pub fn true_absolute(&self) -> Vec<Vector3<f64>> {
        self.truth().iter().map(|l| self.hris_position + l.offset()).collect()
    }
}

fn absolute(p_r: &Vector3<f64>, loc: &NfLocation) -> Vector3<f64> {
    p_r + spherical_unit(loc.elevation, loc.azimuth) * loc.range
}

/// Mean noise-free power per antenna and slot over both arms of every BS.
fn received_power(
    ctx: &TrialContext,
    bearings: &[SphericalBearing],
    schedules: &[ArmSchedules],
    hris: &DMatrix<C64>,
) -> f64 {
    let mut total = 0.0;
    let mut count = 0;
    for ((bs, b), sched) in ctx.stations.iter().zip(bearings).zip(schedules) {
        for axis in [Axis::X, Axis::Z] {
            let h = bs_channel(bs, &ctx.geom, b, ctx.channel.gamma(axis), axis);
            let y = reflected_signal(&h, sched.arm(axis), hris, ctx.channel.delta);
            total += y.norm_squared() / y.len() as f64;
            count += 1;
        }
    }
    total / count as f64
}

/// Bearings and surface position from BS data generated with `schedules`.
#[allow(clippy::too_many_arguments)]
fn run_stage2(
    ctx: &TrialContext,
    block: &HrisSnapshotBlock,
    truth: &[SphericalBearing],
    schedules: &[ArmSchedules],
    locations: &[NfLocation],
    signals: &DMatrix<C64>,
    noise_seed: u64,
) -> Result<(Stage2Estimate, usize)> {
    let cfg = &ctx.config;
    let s2 = Stage2Config {
        delta: ctx.channel.delta,
        noise_variance: cfg.pipeline.known_noise.then_some(ctx.channel.noise_variance),
        danm: ctx.danm,
        angle_points: cfg.solver.angle_points,
    };
    let mut bearings = Vec::with_capacity(ctx.stations.len());
    let mut unconverged = 0;
    for (i, ((bs, b), sched)) in ctx.stations.iter().zip(truth).zip(schedules).enumerate() {
        if cfg.pipeline.oracle_bearings {
            bearings.push(*b);
            continue;
        }
        let obs = synthesize_bs_rx(bs, &ctx.geom, b, &ctx.channel, sched, block, noise_seed.wrapping_add(i as u64))?;
        let (est, u) = estimate_bearing(&ctx.geom, &obs, sched, locations, signals, &s2)?;
        bearings.push(est.bearing);
        unconverged += u;
    }
    let lines: Vec<_> = ctx.stations.iter().zip(&bearings).map(|(s, b)| (s.position, *b)).collect();
    let position = triangulate(&lines)?.position;
    let bs_power = received_power(ctx, truth, schedules, &block.samples);
    let peb = if cfg.pipeline.bounds && ctx.channel.noise_variance > 0.0 {
        let mut fims = Vec::with_capacity(ctx.stations.len());
        for ((bs, b), sched) in ctx.stations.iter().zip(truth).zip(schedules) {
            let f = bs_fim(bs, &ctx.geom, b, &ctx.channel, sched, &block.samples, ctx.channel.noise_variance)?;
            fims.push((f, bs.position));
        }
        hris_peb(&fims, &ctx.hris_position)?.peb.unwrap_or(f64::INFINITY)
    } else {
        f64::NAN
    };
    Ok((Stage2Estimate { bearings, position, bs_power, peb }, unconverged))
}

fn run_trial_inner(ctx: &TrialContext, seeds: &TrialSeeds) -> Result<TrialEstimates> {
    let cfg = &ctx.config;
    let geom = ctx.geom;
    let truth = ctx.truth();
    let k = truth.len();
    let slots = ctx.point.snapshots;
    let powers: Vec<f64> = ctx.sources.iter().map(|s| s.power).collect();
    let signals = SourceSignalModel::new(cfg.run.signal, seeds.signal).generate(&powers, slots);
    let mut noise_rng = seeded_stream(seeds.hris_noise, 1);
    let block = synthesize_hris_rx_with(&geom, &ctx.sources, &signals, &ctx.channel, &mut noise_rng)?;
    let snr_db = compute_snr(&block, ctx.channel.noise_variance)?;

    let (danm, under_resolved, danm_iterations, mut unconverged) = if cfg.pipeline.oracle_targets {
        (truth.clone(), false, 0, 0)
    } else {
        let s1 = Stage1Config {
            sources: k,
            lags: LagSet::consecutive(ctx.point.pseudo_snapshots, slots)?,
            noise_variance: cfg.pipeline.known_noise.then_some(ctx.channel.noise_variance),
            danm: ctx.danm,
            angle_points: cfg.solver.angle_points,
            range_scan: cfg.range_scan(&geom),
        };
        let out = estimate_targets(&block, &s1)?;
        let locs = out.records.iter().map(|r| r.location).collect();
        (locs, out.under_resolved, out.danm.report.iterations, usize::from(!out.danm.report.converged()))
    };
    let mut tls_rejected = 0;
    let targets: Vec<NfLocation> = if cfg.pipeline.tls && !cfg.pipeline.oracle_targets {
        danm.iter()
            .map(|loc| {
                let r = refine(&build_design_matrix(&geom, loc))?;
                tls_rejected += usize::from(r.rejected);
                Ok(r.location)
            })
            .collect::<Result<_>>()?
    } else {
        danm.clone()
    };

    let crb = if cfg.pipeline.bounds && ctx.channel.noise_variance > 0.0 {
        let f = target_fim(&geom, &truth, &signals, ctx.channel.delta, ctx.channel.noise_variance)?;
        Some(target_crb(&f)?.crb_sqrt)
    } else {
        None
    };

    let mut random = None;
    let mut optimized = None;
    let mut p_r = ctx.hris_position;
    if cfg.pipeline.locate_hris {
        let true_bearings = ctx.true_bearings()?;
        let recovered = recover_source_signals(&block, &targets, ctx.channel.delta)?;
        let m = geom.element_count();
        let schedules: Vec<ArmSchedules> = (0..ctx.stations.len() as u64)
            .map(|i| ArmSchedules {
                x: random_phase_schedule(m, slots, seeds.schedules.wrapping_add(2 * i)),
                z: random_phase_schedule(m, slots, seeds.schedules.wrapping_add(2 * i + 1)),
            })
            .collect();
        let (est, u) = run_stage2(ctx, &block, &true_bearings, &schedules, &targets, &recovered, seeds.bs_noise)?;
        unconverged += u;
        p_r = est.position;
        if cfg.pipeline.phase_optimization {
            let (design_bearings, y_hat) = if cfg.pipeline.oracle_channel {
                let a = steering_matrix(&geom, &truth);
                (true_bearings.clone(), a * &signals * C64::new(ctx.channel.delta.sqrt(), 0.0))
            } else {
                let a = steering_matrix(&geom, &targets);
                (est.bearings.clone(), a * &recovered * C64::new(ctx.channel.delta.sqrt(), 0.0))
            };
            let solver = ctx.danm.solver;
            let mut designed = Vec::with_capacity(ctx.stations.len());
            for (i, (bs, b)) in ctx.stations.iter().zip(&design_bearings).enumerate() {
                let seed = seeds.randomization.wrapping_add(1_000_000 * i as u64);
                let x = optimize_schedule(bs, &geom, b, Axis::X, &y_hat, ctx.channel.delta, cfg.pipeline.randomization_draws, seed, &solver)?;
                let z = optimize_schedule(bs, &geom, b, Axis::Z, &y_hat, ctx.channel.delta, cfg.pipeline.randomization_draws, seed.wrapping_add(500_000), &solver)?;
                designed.push(ArmSchedules { x, z });
            }
            let (opt, u) = run_stage2(
                ctx,
                &block,
                &true_bearings,
                &designed,
                &targets,
                &recovered,
                seeds.bs_noise.wrapping_add(1 << 20),
            )?;
            unconverged += u;
            p_r = opt.position;
            optimized = Some(opt);
        }
        random = Some(est);
    }
    let absolute = targets.iter().map(|l| absolute(&p_r, l)).collect();
    Ok(TrialEstimates {
        danm,
        targets,
        tls_rejected,
        under_resolved,
        crb,
        snr_db,
        danm_iterations,
        unconverged,
        random,
        optimized,
        absolute,
    })
}

/// Runs one trial; module errors are captured in the result rather than propagated.
pub fn run_trial(ctx: &TrialContext, point: usize, trial: usize, sweep_value: f64) -> TrialResult {
    let start = Instant::now();
    let seeds = TrialSeeds::derive(ctx.config.run.seed, trial);
    let outcome = run_trial_inner(ctx, &seeds).map_err(|e| e.to_string());
    if let Err(e) = &outcome {
        log::warn!("trial {trial} at sweep value {sweep_value} failed: {e}");
    }
    TrialResult { point, trial, sweep_value, outcome, seconds: start.elapsed().as_secs_f64() }
}
