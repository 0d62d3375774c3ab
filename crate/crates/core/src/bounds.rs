//! Cramér-Rao bounds for the target parameters and the position error bound of the surface.
//!
//! Waveforms are treated as known, so the bounds are conditional on `s_k(t)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Matrix3x2, Vector3};

use crate::array_model::{exact_path_delta, Axis, BsGeometry, HrisGeometry, NfLocation, SphericalBearing};
use crate::error::{Error, Result};
use crate::signal_synthesis::{bs_channel, reflected_signal, ArmSchedules, ChannelSpec};
use crate::C64;

/// Real symmetric Fisher information with one label per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FimMatrix {
    pub matrix: DMatrix<f64>,
    pub labels: Vec<String>,
}

impl FimMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// Square roots of the CRB diagonal, in the units of each parameter.
    pub crb_sqrt: Vec<f64>,
    /// Position error bound in metres, when the parameters are a position.
    pub peb: Option<f64>,
    /// Condition number of the scaled information matrix.
    pub condition: f64,
    /// Near-singular information; the inverse is a pseudo-inverse.
    pub pseudo_inverse: bool,
}

fn check_noise(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise variance must be positive, got {sigma2}")));
    }
    Ok(())
}

/// Spatial partials `√δ ∂a/∂(φ, θ, r)` of one exact-model steering vector.
pub fn target_partials(geom: &HrisGeometry, loc: &NfLocation, delta: f64) -> [DVector<C64>; 3] {
    let d = geom.spacing;
    let r = loc.range;
    let k = 2.0 * PI / geom.wavelength;
    let (sp, cp) = loc.elevation.sin_cos();
    let (st, ct) = loc.azimuth.sin_cos();
    let m_len = geom.element_count();
    let mut out = [DVector::zeros(m_len), DVector::zeros(m_len), DVector::zeros(m_len)];
    for (u, (m, n)) in geom.elements().enumerate() {
        let dr = exact_path_delta(geom, loc, m, n);
        let r_mn = r + dr;
        let (m, n) = (m as f64, n as f64);
        let a = C64::from_polar(delta.sqrt(), k * dr);
        let omega = m * sp * ct + n * cp;
        let slopes = [
            d * r * (n * sp - m * cp * ct) / r_mn,
            d * r * m * sp * st / r_mn,
            (r - omega * d) / r_mn - 1.0,
        ];
        for i in 0..3 {
            out[i][u] = C64::new(0.0, k * slopes[i]) * a;
        }
    }
    out
}

/// `F = (2/σ²) Σ_t Re{(∂ȳ/∂μ)^H (∂ȳ/∂μ)}` over `μ = [φ_1, θ_1, r_1, …]`.
pub fn target_fim(
    geom: &HrisGeometry,
    locations: &[NfLocation],
    signals: &DMatrix<C64>,
    delta: f64,
    sigma2: f64,
) -> Result<FimMatrix> {
    check_noise(sigma2)?;
    if locations.is_empty() || signals.nrows() != locations.len() || signals.ncols() == 0 {
        return Err(Error::InvalidParameter("one non-empty signal row is needed per location".into()));
    }
    let kk = locations.len();
    let partials: Vec<[DVector<C64>; 3]> = locations.iter().map(|l| target_partials(geom, l, delta)).collect();
    // Σ_t s_k*(t) s_l(t)
    let gram = signals.conjugate() * signals.transpose();
    let mut f = DMatrix::zeros(3 * kk, 3 * kk);
    for k in 0..kk {
        for i in 0..3 {
            for l in 0..kk {
                for j in 0..3 {
                    let inner = partials[k][i].dotc(&partials[l][j]);
                    f[(3 * k + i, 3 * l + j)] = 2.0 / sigma2 * (inner * gram[(k, l)]).re;
                }
            }
        }
    }
    let f = (&f + f.transpose()) * 0.5;
    let labels = (1..=kk).flat_map(|k| ["phi", "theta", "r"].map(|p| format!("{p}_{k}"))).collect();
    Ok(FimMatrix { matrix: f, labels })
}

/// Inverse of a Jacobi-scaled FIM via eigen-decomposition.
///
/// Returns the inverse, the condition number and whether a pseudo-inverse was needed.
/// Parameters touching the null space get an infinite bound.
fn invert_fim(f: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<bool>, f64, bool)> {
    let n = f.nrows();
    let scale: Vec<f64> = (0..n).map(|i| if f[(i, i)] > 0.0 { f[(i, i)].sqrt() } else { 1.0 }).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| f[(i, j)] / (scale[i] * scale[j]));
    let eig = scaled.symmetric_eigen();
    let max = eig.eigenvalues.max();
    if !(max > 0.0) {
        return Err(Error::SingularFim);
    }
    let cut = 1e-12 * max;
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    let mut inv = DMatrix::zeros(n, n);
    let mut undefined = vec![false; n];
    let mut pseudo = false;
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(j);
        if lam > cut {
            inv += v * v.transpose() / lam;
        } else {
            pseudo = true;
            for i in 0..n {
                if v[i] * v[i] > 1e-6 {
                    undefined[i] = true;
                }
            }
        }
    }
    let inv = DMatrix::from_fn(n, n, |i, j| inv[(i, j)] / (scale[i] * scale[j]));
    Ok((inv, undefined, condition, pseudo))
}

fn sqrt_diagonal(inv: &DMatrix<f64>, undefined: &[bool]) -> Vec<f64> {
    (0..inv.nrows()).map(|i| if undefined[i] { f64::INFINITY } else { inv[(i, i)].max(0.0).sqrt() }).collect()
}

/// Square roots of the CRB diagonal.
pub fn target_crb(f: &FimMatrix) -> Result<BoundReport> {
    let (inv, undefined, condition, pseudo_inverse) = invert_fim(&f.matrix)?;
    Ok(BoundReport { crb_sqrt: sqrt_diagonal(&inv, &undefined), peb: None, condition, pseudo_inverse })
}

fn axis_weights(len: usize) -> impl Iterator<Item = f64> {
    let c = (len as f64 - 1.0) / 2.0;
    (0..len).map(move |i| c - i as f64)
}

/// `∂ỹ_x/∂θ_B` and `∂ỹ_z/∂φ_B` with the surface-side vector held fixed.
pub fn bs_partials(
    bs: &BsGeometry,
    geom: &HrisGeometry,
    bearing: &SphericalBearing,
    channel: &ChannelSpec,
    schedules: &ArmSchedules,
    hris: &DMatrix<C64>,
) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    for axis in [Axis::X, Axis::Z] {
        let s = schedules.arm(axis);
        if s.slots() != hris.ncols() {
            return Err(Error::SlotMismatch { expected: hris.ncols(), actual: s.slots() });
        }
        if s.elements() != hris.nrows() || hris.nrows() != geom.element_count() {
            return Err(Error::InvalidParameter("schedule and surface output sizes must match the geometry".into()));
        }
    }
    let sp = bearing.elevation.sin();
    let st = bearing.azimuth.sin();
    // b_x depends on θ through sinφ cosθ and b_z on φ through cosφ.
    let arm = |axis: Axis, factor: f64| {
        let h = bs_channel(bs, geom, bearing, channel.gamma(axis), axis);
        let mut y = reflected_signal(&h, schedules.arm(axis), hris, channel.delta);
        for (i, u) in axis_weights(h.nrows()).enumerate() {
            y.row_mut(i).iter_mut().for_each(|v| *v *= C64::new(0.0, -factor * u));
        }
        y
    };
    Ok((arm(Axis::X, sp * st), arm(Axis::Z, sp)))
}

/// 2×2 information over `(θ_B, φ_B)`; the x-arm informs θ and the z-arm φ.
pub fn bs_fim(
    bs: &BsGeometry,
    geom: &HrisGeometry,
    bearing: &SphericalBearing,
    channel: &ChannelSpec,
    schedules: &ArmSchedules,
    hris: &DMatrix<C64>,
    sigma2: f64,
) -> Result<FimMatrix> {
    check_noise(sigma2)?;
    let (dx, dz) = bs_partials(bs, geom, bearing, channel, schedules, hris)?;
    let mut f = DMatrix::zeros(2, 2);
    f[(0, 0)] = 2.0 / sigma2 * dx.norm_squared();
    f[(1, 1)] = 2.0 / sigma2 * dz.norm_squared();
    Ok(FimMatrix { matrix: f, labels: vec!["theta_B".into(), "phi_B".into()] })
}

/// `[∂θ_B/∂p_R, ∂φ_B/∂p_R]` for the bearing of `p_B − p_R`.
pub fn bearing_jacobian(p_b: &Vector3<f64>, p_r: &Vector3<f64>) -> Result<Matrix3x2<f64>> {
    let v = p_b - p_r;
    let rho2 = v.x * v.x + v.y * v.y;
    let rho = rho2.sqrt();
    let r2 = v.norm_squared();
    if rho <= 1e-12 * r2.sqrt() {
        return Err(Error::InvalidGeometry("BS lies on the vertical through the surface".into()));
    }
    Ok(Matrix3x2::new(
        v.y / rho2,
        -v.z * v.x / (r2 * rho),
        -v.x / rho2,
        -v.z * v.y / (r2 * rho),
        0.0,
        rho / r2,
    ))
}

/// `PEB = sqrt(tr F(p)^{-1})` with `F(p) = Σ_i J_i F_i J_iᵀ`.
pub fn hris_peb(stations: &[(FimMatrix, Vector3<f64>)], p_r: &Vector3<f64>) -> Result<BoundReport> {
    let mut fp = Matrix3::zeros();
    for (fim, p_b) in stations {
        if fim.dim() != 2 {
            return Err(Error::InvalidParameter("bearing FIMs must be 2×2".into()));
        }
        let j = bearing_jacobian(p_b, p_r)?;
        let f = Matrix2::from_fn(|a, b| fim.matrix[(a, b)]);
        fp += j * f * j.transpose();
    }
    let dynamic = DMatrix::from_fn(3, 3, |i, j| fp[(i, j)]);
    let eig = fp.symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(max > 0.0) || min <= 1e-12 * max {
        return Ok(BoundReport {
            crb_sqrt: vec![f64::INFINITY; 3],
            peb: Some(f64::INFINITY),
            condition,
            pseudo_inverse: false,
        });
    }
    let (inv, undefined, condition, pseudo_inverse) = invert_fim(&dynamic)?;
    let crb_sqrt = sqrt_diagonal(&inv, &undefined);
    let peb = inv.trace().max(0.0).sqrt();
    Ok(BoundReport { crb_sqrt, peb: Some(peb), condition, pseudo_inverse })
}
