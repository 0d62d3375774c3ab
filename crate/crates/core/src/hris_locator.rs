//! Stage-2 surface localisation: reconstruct what the surface reflected, denoise each
//! BS arm with ANM, read the arm frequencies and triangulate the two bearings.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::array_model::{nf_steering_vector, Axis, BsGeometry, HrisGeometry, NfLocation, PathModel, SphericalBearing};
use crate::danm_estimator::{music_angles, AngleScan, DanmSettings};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_pinv, psd_sqrt};
use crate::sdp_engine::{
    solve_structured_psd, BlockStructure, ConvergenceReport,
    StructuredPsdProblem, ToeplitzGenerator,
};
use crate::signal_synthesis::{estimate_noise_variance, ArmSchedules, BsSnapshotBlock, HrisSnapshotBlock, PhaseSchedule};
use crate::C64;

/// Condition number of the normal matrix above which triangulation is refused.
pub const MAX_TRIANGULATION_CONDITION: f64 = 1e8;

/// Exact-model steering vectors as columns.
pub fn steering_matrix(geom: &HrisGeometry, locations: &[NfLocation]) -> DMatrix<C64> {
    let mut a = DMatrix::zeros(geom.element_count(), locations.len());
    for (k, loc) in locations.iter().enumerate() {
        a.set_column(k, &nf_steering_vector(geom, loc, PathModel::Exact));
    }
    a
}

/// Least-squares source waveforms `(A^H A)^{-1} A^H ȳ / √δ`, one row per location.
pub fn recover_source_signals(block: &HrisSnapshotBlock, locations: &[NfLocation], delta: f64) -> Result<DMatrix<C64>> {
    if locations.is_empty() {
        return Err(Error::InvalidParameter("at least one location is required".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("sensing fraction must lie in (0, 1], got {delta}")));
    }
    let a = steering_matrix(&block.geom, locations);
    let gram_inv = hermitian_pinv(&(a.adjoint() * &a), 1e-12);
    Ok(gram_inv * a.adjoint() * &block.samples / C64::new(delta.sqrt(), 0.0))
}

/// Reconstructed weighted surface output `diag(w_t) ŷ(t)`, one column per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedObservation {
    pub matrix: DMatrix<C64>,
}

/// `ŷ(t) = √δ Â ŝ(t)` weighted by the schedule.
pub fn reconstruct_weighted_obs(
    geom: &HrisGeometry,
    locations: &[NfLocation],
    signals: &DMatrix<C64>,
    schedule: &PhaseSchedule,
    delta: f64,
) -> Result<WeightedObservation> {
    if signals.nrows() != locations.len() {
        return Err(Error::InvalidParameter("signal rows must match the location count".into()));
    }
    if schedule.slots() != signals.ncols() {
        return Err(Error::SlotMismatch { expected: signals.ncols(), actual: schedule.slots() });
    }
    if schedule.elements() != geom.element_count() {
        return Err(Error::InvalidParameter("schedule length must match the element count".into()));
    }
    let y_hat = steering_matrix(geom, locations) * signals * C64::new(delta.sqrt(), 0.0);
    Ok(WeightedObservation { matrix: schedule.weights.component_mul(&y_hat) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsAnmSolution {
    /// Toeplitz block of the BS arm.
    pub t_b: ToeplitzGenerator,
    /// Unstructured block on the surface side of the reduced data.
    pub surface_side: DMatrix<C64>,
    pub rho: f64,
    pub report: ConvergenceReport,
}

/// Reduced `N × N` data `(G C⁺ G^H)^{1/2}` with `G = Y_B Ŷ_w^H`, `C = Ŷ_w Ŷ_w^H`.
///
/// Keeps the column space of the part of `Y_B` explained by the reconstruction.
pub fn reduced_arm_data(arm: &DMatrix<C64>, obs: &WeightedObservation) -> Result<DMatrix<C64>> {
    if arm.ncols() != obs.matrix.ncols() {
        return Err(Error::SlotMismatch { expected: obs.matrix.ncols(), actual: arm.ncols() });
    }
    let g = arm * obs.matrix.adjoint();
    let c = &obs.matrix * obs.matrix.adjoint();
    let q = &g * hermitian_pinv(&c, 1e-10) * g.adjoint();
    Ok(psd_sqrt(&q))
}

/// Single-atom ANM on one BS arm, with `ρ = σ_n sqrt(N M log(N M))`.
pub fn solve_bs_anm(
    arm: &DMatrix<C64>,
    obs: &WeightedObservation,
    noise_std: f64,
    settings: &DanmSettings,
) -> Result<BsAnmSolution> {
    let data = reduced_arm_data(arm, obs)?;
    let n = data.nrows();
    if n < 2 {
        return Err(Error::SubspaceDimension { dimension: n, sources: 1 });
    }
    let rms = data.norm() / n as f64;
    let rho = settings.weight(noise_std, n * obs.matrix.nrows(), rms);
    let problem =
        StructuredPsdProblem::two_block_least_squares(BlockStructure::FreePsd, BlockStructure::Toeplitz, data, rho)?;
    let sol = solve_structured_psd(&problem, &settings.solver)?;
    let t_b = sol.blocks[1].toeplitz().cloned().expect("toeplitz block");
    Ok(BsAnmSolution { t_b, surface_side: sol.blocks[0].matrix(), rho, report: sol.report })
}

/// Arm spatial frequency from the Toeplitz block; BS atoms advance by `−ω` per element.
pub fn arm_frequency(t_b: &ToeplitzGenerator, points: usize) -> Result<f64> {
    let scan = AngleScan { points, ..AngleScan::new(-1.0) };
    let spec = music_angles(t_b, 1, &scan)?;
    Ok(spec.peaks[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BearingEstimate {
    pub bearing: SphericalBearing,
    pub omega_x: f64,
    pub omega_z: f64,
    /// The azimuth cosine fell outside `[−1, 1]` and was clipped.
    pub clipped: bool,
}

/// `φ = arccos ω_z` and `θ = arccos(ω_x / sin φ)`, kept strictly inside `(0, π)`.
pub fn extract_bearing(omega_x: f64, omega_z: f64) -> BearingEstimate {
    let edge = 1e-9;
    let phi = omega_z.clamp(-1.0, 1.0).acos().clamp(edge, PI - edge);
    let c = omega_x / phi.sin();
    let clipped = !(c.abs() <= 1.0);
    let theta = if c.is_finite() { c.clamp(-1.0, 1.0).acos() } else { PI / 2.0 };
    let bearing = SphericalBearing { elevation: phi, azimuth: theta.clamp(edge, PI - edge) };
    BearingEstimate { bearing, omega_x, omega_z, clipped }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrisPositionEstimate {
    pub position: Vector3<f64>,
    /// Condition number of `Σ (I − g gᵀ)`.
    pub condition: f64,
    /// Sum of squared perpendicular distances to the bearing lines.
    pub residual: f64,
}

/// Least-squares intersection of the lines `p_B,i − t g_i`.
pub fn triangulate(lines: &[(Vector3<f64>, SphericalBearing)]) -> Result<HrisPositionEstimate> {
    if lines.len() < 2 {
        return Err(Error::InvalidParameter("at least two bearings are required".into()));
    }
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    let projectors: Vec<Matrix3<f64>> = lines
        .iter()
        .map(|(_, bearing)| {
            let g = bearing.unit_vector();
            Matrix3::identity() - g * g.transpose()
        })
        .collect();
    for ((p, _), gi) in lines.iter().zip(&projectors) {
        a += gi;
        b += gi * p;
    }
    let eig = a.symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_TRIANGULATION_CONDITION) {
        return Err(Error::NearCollinear { condition });
    }
    let position = a.try_inverse().ok_or(Error::NearCollinear { condition })? * b;
    let residual = lines.iter().zip(&projectors).map(|((p, _), gi)| (gi * (position - p)).norm_squared()).sum();
    Ok(HrisPositionEstimate { position, condition, residual })
}

/// Everything stage 2 needs besides the raw observations.
#[derive(Debug, Clone, Copy)]
pub struct Stage2Config {
    pub delta: f64,
    /// Known BS noise variance; estimated per arm when absent.
    pub noise_variance: Option<f64>,
    pub danm: DanmSettings,
    pub angle_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Output {
    pub bearings: Vec<BearingEstimate>,
    pub position: HrisPositionEstimate,
    /// ANM solves that hit the iteration cap.
    pub unconverged: usize,
}

/// Bearing of one BS from its two arms.
pub fn estimate_bearing(
    geom: &HrisGeometry,
    observation: &BsSnapshotBlock,
    schedules: &ArmSchedules,
    locations: &[NfLocation],
    signals: &DMatrix<C64>,
    cfg: &Stage2Config,
) -> Result<(BearingEstimate, usize)> {
    let mut omega = [0.0; 2];
    let mut unconverged = 0;
    for (slot, axis) in [Axis::X, Axis::Z].into_iter().enumerate() {
        let obs = reconstruct_weighted_obs(geom, locations, signals, schedules.arm(axis), cfg.delta)?;
        let arm = observation.arm(axis);
        let noise = cfg.noise_variance.unwrap_or_else(|| estimate_noise_variance(arm));
        let anm = solve_bs_anm(arm, &obs, noise.sqrt(), &cfg.danm)?;
        if !anm.report.converged() {
            unconverged += 1;
        }
        omega[slot] = arm_frequency(&anm.t_b, cfg.angle_points)?;
    }
    Ok((extract_bearing(omega[0], omega[1]), unconverged))
}

/// Surface position from every BS's observations.
pub fn locate_hris(
    geom: &HrisGeometry,
    stations: &[BsGeometry],
    observations: &[BsSnapshotBlock],
    schedules: &[ArmSchedules],
    locations: &[NfLocation],
    signals: &DMatrix<C64>,
    cfg: &Stage2Config,
) -> Result<Stage2Output> {
    if stations.len() != observations.len() || stations.len() != schedules.len() {
        return Err(Error::InvalidParameter("one observation and schedule pair is needed per BS".into()));
    }
    let mut bearings = Vec::with_capacity(stations.len());
    let mut unconverged = 0;
    for (obs, sched) in observations.iter().zip(schedules) {
        let (b, u) = estimate_bearing(geom, obs, sched, locations, signals, cfg)?;
        bearings.push(b);
        unconverged += u;
    }
    let lines: Vec<_> = stations.iter().zip(&bearings).map(|(s, b)| (s.position, b.bearing)).collect();
    let position = triangulate(&lines)?;
    Ok(Stage2Output { bearings, position, unconverged })
}
