//! Stage-1 target estimation: decoupled ANM on the difference co-array, 1-D MUSIC on
//! each recovered Toeplitz block, angle pairing and range MUSIC on the raw data.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use pathfinding::prelude::{kuhn_munkres, Matrix};

use crate::array_model::{nf_steering_vector, HrisGeometry, NfLocation, PathModel};
use crate::error::{Error, Result};
use crate::linalg::{golden_max, hermitian_eigen, parabolic_offset};
use crate::sdp_engine::{
    regularisation_weight, solve_structured_psd, BlockStructure, ConvergenceReport,
    SolverSettings, StructuredPsdProblem, ToeplitzGenerator,
};
use crate::signal_synthesis::{estimate_noise_variance, HrisSnapshotBlock};
use crate::virtual_coarray::{build_pseudo_snapshots, coarray_covariance, CoarrayVector, LagSet};
use crate::C64;

/// Settings of the decoupled ANM solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DanmSettings {
    pub solver: SolverSettings,
    /// Overrides the noise-scaled regularisation weight.
    pub rho: Option<f64>,
    /// Multiplies the noise-scaled weight.
    pub rho_scale: f64,
}

impl Default for DanmSettings {
    fn default() -> Self {
        Self { solver: SolverSettings::default(), rho: None, rho_scale: 1.0 }
    }
}

impl DanmSettings {
    /// `ρ = σ_n sqrt(P log P)` unless overridden, never below `RHO_FLOOR` times the data RMS.
    pub fn weight(&self, noise_std: f64, entries: usize, data_rms: f64) -> f64 {
        let rho = self.rho.unwrap_or_else(|| self.rho_scale * regularisation_weight(noise_std, entries));
        rho.max(RHO_FLOOR * data_rms).max(f64::MIN_POSITIVE)
    }
}

/// Smallest regularisation weight relative to the data RMS; keeps noiseless problems well posed.
pub const RHO_FLOOR: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct DanmSolution {
    /// Toeplitz block along x, `(4 m_x + 1)` square.
    pub t_x: ToeplitzGenerator,
    /// Toeplitz block along z, `(4 n_z + 1)` square.
    pub t_z: ToeplitzGenerator,
    /// Denoised co-array, rows along x.
    pub z_block: DMatrix<C64>,
    pub rho: f64,
    pub report: ConvergenceReport,
}

/// Phase slope of the x-block atoms per unit of `sinφ cosθ`.
pub fn kappa_x(geom: &HrisGeometry) -> f64 {
    -4.0 * PI * geom.spacing / geom.wavelength
}

/// Phase slope of the z-block atoms per unit of `cosφ`.
pub fn kappa_z(geom: &HrisGeometry) -> f64 {
    4.0 * PI * geom.spacing / geom.wavelength
}

/// Solves `min ρ(tr T_z/(2n̄) + tr T_x/(2m̄)) + ½‖Z_co − Z‖²` over `[[T_z, Z^H], [Z, T_x]] ⪰ 0`.
///
/// `noise_std` is the standard deviation `σ_n` of the surface measurement noise.
pub fn solve_danm(z: &CoarrayVector, k: usize, noise_std: f64, settings: &DanmSettings) -> Result<DanmSolution> {
    if k == 0 {
        return Err(Error::InvalidParameter("source count must be at least 1".into()));
    }
    let data = z.difference_coarray();
    let (p, q) = data.shape();
    if data.norm() == 0.0 {
        return Ok(DanmSolution {
            t_x: ToeplitzGenerator::new(DVector::zeros(p))?,
            t_z: ToeplitzGenerator::new(DVector::zeros(q))?,
            z_block: data,
            rho: 0.0,
            report: ConvergenceReport {
                status: crate::sdp_engine::SolveStatus::Converged,
                iterations: 0,
                primal_residual: 0.0,
                dual_residual: 0.0,
                penalty: 0.0,
                min_eigenvalue: 0.0,
                trace: Vec::new(),
            },
        });
    }
    let rms = data.norm() / ((p * q) as f64).sqrt();
    let rho = settings.weight(noise_std, p * q, rms);
    let problem =
        StructuredPsdProblem::two_block_least_squares(BlockStructure::Toeplitz, BlockStructure::Toeplitz, data, rho)?;
    let sol = solve_structured_psd(&problem, &settings.solver)?;
    if !sol.report.converged() {
        log::debug!(
            "DANM stopped after {} iterations (primal {:.2e}, dual {:.2e})",
            sol.report.iterations,
            sol.report.primal_residual,
            sol.report.dual_residual
        );
    }
    let t_z = sol.blocks[0].toeplitz().cloned().expect("toeplitz block");
    let t_x = sol.blocks[1].toeplitz().cloned().expect("toeplitz block");
    Ok(DanmSolution { t_x, t_z, z_block: sol.off_diagonal.expect("two-block problem"), rho, report: sol.report })
}

/// Grid settings of a 1-D MUSIC scan over `ω ∈ (−1, 1)` with atoms `exp(j κ ω i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleScan {
    pub points: usize,
    pub kappa: f64,
    pub min_separation: usize,
}

impl AngleScan {
    pub fn new(kappa: f64) -> Self {
        Self { points: 2048, kappa, min_separation: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleSpectrum {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Refined peak locations, strongest first.
    pub peaks: Vec<f64>,
    /// Fewer than the requested number of peaks were found.
    pub under_resolved: bool,
}

/// Noise subspace for at most `k` sources and the numerical rank used.
fn noise_subspace(t: &DMatrix<C64>, k: usize) -> (DMatrix<C64>, usize) {
    let n = t.nrows();
    let (vals, vecs) = hermitian_eigen(t);
    let top = vals[n - 1].max(0.0);
    let rank = vals.iter().filter(|&&v| v > 1e-6 * top).count().clamp(1, k);
    (vecs.columns(0, n - rank).into_owned(), rank)
}

/// `1 / ‖E_n^H a‖²` for a steering vector `a`.
fn music_value(en: &DMatrix<C64>, a: &DVector<C64>) -> f64 {
    let proj = en.adjoint() * a;
    1.0 / proj.norm_squared().max(1e-300)
}

fn ula_atom(len: usize, phase: f64) -> DVector<C64> {
    DVector::from_iterator(len, (0..len).map(|i| C64::from_polar(1.0, phase * i as f64)))
}

/// Indices of the strongest local maxima, at least `sep` cells apart.
fn select_peaks(values: &[f64], k: usize, sep: usize) -> Vec<usize> {
    let n = values.len();
    let mut cand: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = i == 0 || values[i] > values[i - 1];
            let right = i + 1 == n || values[i] >= values[i + 1];
            left && right
        })
        .collect();
    cand.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = Vec::new();
    for i in cand {
        if chosen.len() == k {
            break;
        }
        if chosen.iter().all(|&j| i.abs_diff(j) >= sep) {
            chosen.push(i);
        }
    }
    chosen
}

/// MUSIC pseudo-spectrum of a Toeplitz block and its `k` strongest peaks.
pub fn music_angles(t: &ToeplitzGenerator, k: usize, scan: &AngleScan) -> Result<AngleSpectrum> {
    let n = t.dim();
    if n <= k {
        return Err(Error::SubspaceDimension { dimension: n, sources: k });
    }
    let (en, rank) = noise_subspace(&t.matrix(), k);
    let step = 2.0 / scan.points as f64;
    let grid: Vec<f64> = (0..scan.points).map(|i| -1.0 + (i as f64 + 0.5) * step).collect();
    let spectrum = |w: f64| music_value(&en, &ula_atom(n, scan.kappa * w));
    let values: Vec<f64> = grid.iter().map(|&w| spectrum(w)).collect();
    let idx = select_peaks(&values, rank, scan.min_separation);
    let peaks = idx
        .iter()
        .map(|&i| {
            if i == 0 || i + 1 == values.len() {
                return grid[i];
            }
            let off = parabolic_offset(values[i - 1].ln(), values[i].ln(), values[i + 1].ln());
            let centre = grid[i] + off * step;
            let lo = (centre - step).max(-1.0);
            let hi = (centre + step).min(1.0);
            golden_max(|w| spectrum(w).ln(), lo, hi, 1e-12).0
        })
        .collect::<Vec<_>>();
    let under_resolved = peaks.len() < k;
    Ok(AngleSpectrum { grid, values, peaks, under_resolved })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedAngles {
    /// `(elevation, azimuth)` per z-block peak.
    pub pairs: Vec<(f64, f64)>,
    /// Ratio of the selected to the runner-up selection magnitude.
    pub confidence: Vec<f64>,
    /// Composite direction cosine fell outside `[−1, 1]` and was clipped.
    pub clipped: Vec<bool>,
    /// Greedy selection produced duplicates and an optimal assignment was used.
    pub assignment_fallback: bool,
}

fn pinv(a: &DMatrix<C64>) -> DMatrix<C64> {
    a.clone().pseudo_inverse(1e-12).expect("pseudo-inverse")
}

/// Optimal assignment maximising the summed magnitudes; `result[col] = row`.
pub fn max_assignment(weights: &DMatrix<f64>) -> Vec<usize> {
    let n = weights.nrows();
    let max = weights.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(f64::MIN_POSITIVE);
    let scale = 1e12 / max;
    // rows of the pathfinding matrix are the columns being assigned
    let m = Matrix::from_fn(n, n, |(i, j)| (weights[(j, i)] * scale).round() as i64);
    kuhn_munkres(&m).1
}

/// Pairs z-block frequencies `cos_z` with x-block composites `cos_x` through the
/// off-diagonal block, then recovers azimuth by `arccos(composite / sinφ)`.
pub fn pair_angles(
    z_block: &DMatrix<C64>,
    cos_z: &[f64],
    cos_x: &[f64],
    kappa_x: f64,
    kappa_z: f64,
) -> Result<PairedAngles> {
    let k = cos_z.len();
    if k == 0 || cos_x.len() != k {
        return Err(Error::InvalidParameter(format!(
            "pairing needs equal non-empty lists, got {} and {}",
            cos_z.len(),
            cos_x.len()
        )));
    }
    let (p, q) = z_block.shape();
    let ax = DMatrix::from_fn(p, k, |i, j| C64::from_polar(1.0, kappa_x * cos_x[j] * i as f64));
    let az = DMatrix::from_fn(q, k, |i, j| C64::from_polar(1.0, kappa_z * cos_z[j] * i as f64));
    // Z = A_x G A_z^H, rows of G index x-peaks, columns z-peaks.
    let g = pinv(&ax) * z_block * pinv(&az.adjoint());
    let mag = g.map(|v| v.norm());
    let mut picks: Vec<usize> = (0..k)
        .map(|i| (0..k).max_by(|&a, &b| mag[(a, i)].total_cmp(&mag[(b, i)]).then(b.cmp(&a))).unwrap())
        .collect();
    let mut seen = vec![false; k];
    let duplicate = picks.iter().any(|&j| std::mem::replace(&mut seen[j], true));
    if duplicate {
        picks = max_assignment(&mag);
    }
    let mut pairs = Vec::with_capacity(k);
    let mut confidence = Vec::with_capacity(k);
    let mut clipped = Vec::with_capacity(k);
    for (i, &j) in picks.iter().enumerate() {
        let phi = cos_z[i].clamp(-1.0, 1.0).acos().clamp(1e-9, PI - 1e-9);
        let arg = cos_x[j] / phi.sin();
        clipped.push(arg.abs() > 1.0);
        let theta = arg.clamp(-1.0, 1.0).acos().clamp(1e-9, PI - 1e-9);
        pairs.push((phi, theta));
        let runner = (0..k).filter(|&r| r != j).map(|r| mag[(r, i)]).fold(0.0f64, f64::max);
        confidence.push(if runner > 0.0 { mag[(j, i)] / runner } else { f64::INFINITY });
    }
    Ok(PairedAngles { pairs, confidence, clipped, assignment_fallback: duplicate })
}

/// Logarithmic range grid for range MUSIC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeScan {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl RangeScan {
    /// 512 points between `0.3 D` and the Rayleigh distance.
    pub fn for_geometry(geom: &HrisGeometry) -> Self {
        Self { min: 0.3 * geom.aperture(), max: geom.rayleigh_distance(), points: 512 }
    }

    pub fn grid(&self) -> Vec<f64> {
        let n = self.points.max(2);
        let ratio = self.max / self.min;
        (0..n).map(|i| self.min * ratio.powf(i as f64 / (n - 1) as f64)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeEstimate {
    pub range: f64,
    /// The spectrum peaked at an end of the grid.
    pub at_boundary: bool,
    /// Peak value over the spectrum median.
    pub sharpness: f64,
}

/// Noise subspace of the sample covariance of the raw block, assuming `k` sources.
pub fn sample_noise_subspace(block: &HrisSnapshotBlock, k: usize) -> Result<DMatrix<C64>> {
    let m = block.geom.element_count();
    if k >= m {
        return Err(Error::SubspaceDimension { dimension: m, sources: k });
    }
    let y = &block.samples;
    let r = y * y.adjoint() / C64::new(block.slots() as f64, 0.0);
    let (vals, vecs) = hermitian_eigen(&r);
    let top = vals[m - 1].max(0.0);
    let rank = vals.iter().filter(|&&v| v > 1e-10 * top).count();
    if top == 0.0 || rank < k {
        return Err(Error::InsufficientSnapshots { rank, required: k });
    }
    Ok(vecs.columns(0, m - k).into_owned())
}

/// Range MUSIC with exact-model steering at each paired direction.
pub fn estimate_ranges(
    block: &HrisSnapshotBlock,
    pairs: &PairedAngles,
    scan: &RangeScan,
) -> Result<Vec<RangeEstimate>> {
    let k = pairs.pairs.len();
    let en = sample_noise_subspace(block, k)?;
    let geom = block.geom;
    let grid = scan.grid();
    pairs
        .pairs
        .iter()
        .map(|&(phi, theta)| {
            let value = |r: f64| {
                let loc = NfLocation { elevation: phi, azimuth: theta, range: r };
                music_value(&en, &nf_steering_vector(&geom, &loc, PathModel::Exact))
            };
            let values: Vec<f64> = grid.iter().map(|&r| value(r)).collect();
            let best = (0..values.len()).max_by(|&a, &b| values[a].total_cmp(&values[b]).then(b.cmp(&a))).unwrap();
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let median = sorted[sorted.len() / 2];
            let at_boundary = best == 0 || best + 1 == grid.len();
            let range = if at_boundary {
                grid[best]
            } else {
                // Refine in log-range where the grid is uniform.
                let (lo, hi) = (grid[best - 1].ln(), grid[best + 1].ln());
                golden_max(|lr| value(lr.exp()).ln(), lo, hi, 1e-12).0.exp()
            };
            Ok(RangeEstimate { range, at_boundary, sharpness: values[best] / median.max(1e-300) })
        })
        .collect()
}

/// Per-source stage-1 output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRecord {
    pub location: NfLocation,
    pub pairing_confidence: f64,
    pub azimuth_clipped: bool,
    pub range_at_boundary: bool,
    pub peak_sharpness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Config {
    pub sources: usize,
    pub lags: LagSet,
    /// Known noise variance; estimated from the sample covariance when absent.
    pub noise_variance: Option<f64>,
    pub danm: DanmSettings,
    pub angle_points: usize,
    pub range_scan: RangeScan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Output {
    pub records: Vec<EstimateRecord>,
    pub danm: DanmSolution,
    pub under_resolved: bool,
    pub assignment_fallback: bool,
}

/// Repeats the strongest peaks when a spectrum yields fewer than `k`.
fn pad_peaks(mut peaks: Vec<f64>, k: usize) -> Vec<f64> {
    if peaks.is_empty() {
        peaks.push(0.0);
    }
    let base = peaks.len();
    let mut i = 0;
    while peaks.len() < k {
        peaks.push(peaks[i % base]);
        i += 1;
    }
    peaks
}

/// Co-array construction, DANM, MUSIC, pairing and range MUSIC.
pub fn estimate_targets(block: &HrisSnapshotBlock, cfg: &Stage1Config) -> Result<Stage1Output> {
    let geom = block.geom;
    let k = cfg.sources;
    let noise = cfg.noise_variance.unwrap_or_else(|| estimate_noise_variance(&block.samples));
    let mut h = build_pseudo_snapshots(block, &cfg.lags)?;
    h.remove_noise_bias(noise);
    let z = coarray_covariance(&h);
    let danm = solve_danm(&z, k, noise.sqrt(), &cfg.danm)?;
    let scan_z = AngleScan { points: cfg.angle_points, ..AngleScan::new(kappa_z(&geom)) };
    let scan_x = AngleScan { points: cfg.angle_points, ..AngleScan::new(kappa_x(&geom)) };
    let sz = music_angles(&danm.t_z, k, &scan_z)?;
    let sx = music_angles(&danm.t_x, k, &scan_x)?;
    let under_resolved = sz.under_resolved || sx.under_resolved;
    let cz = pad_peaks(sz.peaks, k);
    let cx = pad_peaks(sx.peaks, k);
    let pairs = pair_angles(&danm.z_block, &cz, &cx, kappa_x(&geom), kappa_z(&geom))?;
    let ranges = estimate_ranges(block, &pairs, &cfg.range_scan)?;
    let records = pairs
        .pairs
        .iter()
        .zip(ranges.iter())
        .enumerate()
        .map(|(i, (&(phi, theta), r))| EstimateRecord {
            location: NfLocation { elevation: phi, azimuth: theta, range: r.range },
            pairing_confidence: pairs.confidence[i],
            azimuth_clipped: pairs.clipped[i],
            range_at_boundary: r.at_boundary,
            peak_sharpness: r.sharpness,
        })
        .collect();
    Ok(Stage1Output { records, danm, under_resolved, assignment_fallback: pairs.assignment_fallback })
}
