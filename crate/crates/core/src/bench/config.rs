//! TOML scenario files. Angles are in degrees here and nowhere else.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::array_model::{BsGeometry, HrisGeometry, NearFieldSource, NfLocation};
use crate::danm_estimator::{DanmSettings, RangeScan};
use crate::error::{Error, Result};
use crate::linalg::spherical_unit;
use crate::sdp_engine::SolverSettings;
use crate::signal_synthesis::{ChannelSpec, SignalKind};
use crate::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub m_x: usize,
    pub n_z: usize,
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
    /// Defaults to a quarter wavelength.
    #[serde(default)]
    pub spacing: Option<f64>,
    /// True surface position; BS positions are given relative to it.
    #[serde(default)]
    pub hris_position: [f64; 3],
}

fn default_wavelength() -> f64 {
    0.01
}

/// BS position relative to the surface, in spherical form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationConfig {
    #[serde(default = "default_arm")]
    pub n_x: usize,
    #[serde(default = "default_arm")]
    pub n_z: usize,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub range: f64,
}

fn default_arm() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub range: f64,
    #[serde(default = "one")]
    pub power: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default = "half")]
    pub delta: f64,
    #[serde(default = "unit_gain")]
    pub gamma_x: [f64; 2],
    #[serde(default = "unit_gain")]
    pub gamma_z: [f64; 2],
    /// Surface SNR in dB; takes precedence over `noise_variance`.
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub noise_variance: Option<f64>,
}

fn half() -> f64 {
    0.5
}

fn unit_gain() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    /// Explicit pseudo-snapshot count; otherwise `pseudo_fraction` of the snapshots.
    #[serde(default)]
    pub pseudo_snapshots: Option<usize>,
    #[serde(default = "quarter")]
    pub pseudo_fraction: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub signal: SignalKind,
    /// Failure rate above which the CLI exits with status 2.
    #[serde(default = "default_failure_rate")]
    pub max_failure_rate: f64,
}

fn default_snapshots() -> usize {
    500
}

fn quarter() -> f64 {
    0.25
}

fn default_trials() -> usize {
    200
}

fn default_failure_rate() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "yes")]
    pub tls: bool,
    /// Run stage 2 (bearings and surface position).
    #[serde(default)]
    pub locate_hris: bool,
    #[serde(default)]
    pub phase_optimization: bool,
    /// Design phases from the true channel and surface output.
    #[serde(default)]
    pub oracle_channel: bool,
    /// Replace stage-1 estimates by the true targets.
    #[serde(default)]
    pub oracle_targets: bool,
    /// Replace estimated bearings by the true ones.
    #[serde(default)]
    pub oracle_bearings: bool,
    /// Give the estimators the true noise variance.
    #[serde(default = "yes")]
    pub known_noise: bool,
    #[serde(default = "default_draws")]
    pub randomization_draws: usize,
    /// Evaluate CRB and PEB columns.
    #[serde(default = "yes")]
    pub bounds: bool,
}

fn yes() -> bool {
    true
}

fn default_draws() -> usize {
    200
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tls: true,
            locate_hris: false,
            phase_optimization: false,
            oracle_channel: false,
            oracle_targets: false,
            oracle_bearings: false,
            known_noise: true,
            randomization_draws: default_draws(),
            bounds: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Snr,
    Snapshots,
    #[default]
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub axis: SweepAxis,
    #[serde(default)]
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "one")]
    pub penalty: f64,
    /// Fixed regularisation weight for every ANM solve.
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default = "one")]
    pub rho_scale: f64,
    #[serde(default = "default_angle_points")]
    pub angle_points: usize,
    #[serde(default = "default_range_points")]
    pub range_points: usize,
}

fn default_iterations() -> usize {
    5000
}

fn default_tolerance() -> f64 {
    1e-6
}

fn default_angle_points() -> usize {
    2048
}

fn default_range_points() -> usize {
    512
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: default_iterations(),
            tolerance: default_tolerance(),
            penalty: 1.0,
            rho: None,
            rho_scale: 1.0,
            angle_points: default_angle_points(),
            range_points: default_range_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub stations: Vec<StationConfig>,
    pub sources: Vec<SourceConfig>,
    pub channel: ChannelConfig,
    #[serde(default = "default_run")]
    pub run: RunConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_run() -> RunConfig {
    toml::from_str("").expect("run defaults")
}

/// Settings of one sweep point after the sweep value is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSettings {
    pub noise_variance: f64,
    pub snapshots: usize,
    pub pseudo_snapshots: usize,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { context: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Switches to the 17 × 17 surface used for full-scale runs.
    pub fn long_run(mut self) -> Self {
        self.geometry.m_x = 8;
        self.geometry.n_z = 8;
        self
    }

    /// Oracle targets and bearings with bounds on: the run only evaluates CRB, PEB and received power.
    pub fn bounds_only(mut self) -> Self {
        let p = &mut self.pipeline;
        p.oracle_targets = true;
        p.oracle_bearings = true;
        p.oracle_channel = true;
        p.tls = false;
        p.bounds = true;
        self
    }

    pub fn hris(&self) -> Result<HrisGeometry> {
        let g = &self.geometry;
        HrisGeometry::new(g.m_x, g.n_z, g.spacing.unwrap_or(g.wavelength / 4.0), g.wavelength)
    }

    pub fn hris_position(&self) -> Vector3<f64> {
        Vector3::from(self.geometry.hris_position)
    }

    pub fn sources(&self) -> Result<Vec<NearFieldSource>> {
        self.sources
            .iter()
            .map(|s| NearFieldSource::new(NfLocation::from_degrees(s.elevation_deg, s.azimuth_deg, s.range)?, s.power))
            .collect()
    }

    pub fn stations(&self) -> Result<Vec<BsGeometry>> {
        let origin = self.hris_position();
        self.stations
            .iter()
            .map(|s| {
                let offset = spherical_unit(s.elevation_deg.to_radians(), s.azimuth_deg.to_radians()) * s.range;
                BsGeometry::new(s.n_x, s.n_z, origin + offset)
            })
            .collect()
    }

    pub fn total_power(&self) -> f64 {
        self.sources.iter().map(|s| s.power).sum()
    }

    pub fn channel(&self, noise_variance: f64) -> Result<ChannelSpec> {
        let c = &self.channel;
        ChannelSpec::new(
            C64::new(c.gamma_x[0], c.gamma_x[1]),
            C64::new(c.gamma_z[0], c.gamma_z[1]),
            c.delta,
            noise_variance,
        )
    }

    /// Sweep values, or a single placeholder point when there is no sweep.
    pub fn sweep_values(&self) -> Vec<f64> {
        match self.sweep.axis {
            SweepAxis::None => vec![f64::NAN],
            _ => self.sweep.values.clone(),
        }
    }

    /// Noise variance for a surface SNR, falling back to `channel.noise_variance`.
    fn noise_for(&self, snr_db: Option<f64>) -> f64 {
        match snr_db {
            Some(snr) => ChannelSpec::noise_for_snr(self.channel.delta, self.total_power(), snr),
            None => self.channel.noise_variance.unwrap_or(0.0),
        }
    }

    pub fn point(&self, value: f64) -> PointSettings {
        let (snr, snapshots) = match self.sweep.axis {
            SweepAxis::Snr => (Some(value), self.run.snapshots),
            SweepAxis::Snapshots => (self.channel.snr_db, value.round() as usize),
            SweepAxis::None => (self.channel.snr_db, self.run.snapshots),
        };
        let noise_variance = self.noise_for(snr);
        let pseudo = match (self.sweep.axis, self.run.pseudo_snapshots) {
            (SweepAxis::Snapshots, _) | (_, None) => ((snapshots as f64) * self.run.pseudo_fraction).round() as usize,
            (_, Some(l)) => l,
        };
        PointSettings { noise_variance, snapshots, pseudo_snapshots: pseudo.max(1) }
    }

    pub fn danm_settings(&self) -> DanmSettings {
        let s = &self.solver;
        DanmSettings {
            solver: SolverSettings {
                max_iterations: s.max_iterations,
                primal_tolerance: s.tolerance,
                dual_tolerance: s.tolerance,
                penalty: s.penalty,
                seed: self.run.seed,
                record_trace: false,
            },
            rho: s.rho,
            rho_scale: s.rho_scale,
        }
    }

    pub fn range_scan(&self, geom: &HrisGeometry) -> RangeScan {
        RangeScan { points: self.solver.range_points, ..RangeScan::for_geometry(geom) }
    }

    /// Checks every value against the domain of the module that consumes it.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let geom = self.hris()?;
        if self.sources.is_empty() {
            return bad("at least one source is required".into());
        }
        let sources = self.sources()?;
        for s in &sources {
            geom.warn_if_outside_near_field(&s.location);
        }
        if self.channel.delta <= 0.0 || self.channel.delta >= 1.0 {
            return bad(format!("delta must lie in (0, 1), got {}", self.channel.delta));
        }
        if self.channel.snr_db.is_none() && self.channel.noise_variance.is_none() && self.sweep.axis != SweepAxis::Snr {
            return bad("set channel.snr_db or channel.noise_variance".into());
        }
        if let Some(v) = self.channel.noise_variance {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("noise variance must be ≥ 0, got {v}"));
            }
        }
        if self.run.trials == 0 {
            return bad("run.trials must be at least 1".into());
        }
        if !(self.run.pseudo_fraction > 0.0 && self.run.pseudo_fraction < 1.0) {
            return bad("run.pseudo_fraction must lie in (0, 1)".into());
        }
        if self.sweep.axis != SweepAxis::None && self.sweep.values.is_empty() {
            return bad("sweep.values must be non-empty".into());
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            return bad("sweep values must be finite".into());
        }
        let points: Vec<f64> = self.sweep_values();
        for v in points {
            let p = self.point(v);
            if p.snapshots < 2 || p.pseudo_snapshots >= p.snapshots {
                return bad(format!("need 1 ≤ pseudo snapshots < snapshots, got {} of {}", p.pseudo_snapshots, p.snapshots));
            }
        }
        if (self.pipeline.locate_hris || self.pipeline.phase_optimization) && self.stations.len() < 2 {
            return bad("stage 2 needs at least two stations".into());
        }
        if self.pipeline.phase_optimization && !self.pipeline.locate_hris {
            return bad("phase optimisation requires locate_hris".into());
        }
        if self.pipeline.randomization_draws == 0 {
            return bad("pipeline.randomization_draws must be at least 1".into());
        }
        self.stations()?;
        let s = &self.solver;
        if s.angle_points < 8 || s.range_points < 8 {
            return bad("scan grids need at least 8 points".into());
        }
        if !(s.rho_scale > 0.0) || s.rho.is_some_and(|r| !(r > 0.0)) {
            return bad("regularisation settings must be positive".into());
        }
        self.danm_settings().solver.validate()
    }
}
