//! Array layouts and steering-vector mathematics.
//!
//! HRIS elements are indexed by signed pairs `(m, n)` with `|m| ≤ m_x` along +x and
//! `|n| ≤ n_z` along +z. Vectorisation is column-major over the grid: `m` varies
//! fastest, so element `(m, n)` sits at `(2 m_x + 1)(n + n_z) + (m + m_x)`.

use std::f64::consts::PI;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron_vec, spherical_unit};
use crate::C64;

/// Planar HRIS of `(2 m_x + 1) × (2 n_z + 1)` elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrisGeometry {
    pub m_x: usize,
    pub n_z: usize,
    pub spacing: f64,
    pub wavelength: f64,
}

impl HrisGeometry {
    pub fn new(m_x: usize, n_z: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::InvalidGeometry(format!("wavelength must be positive, got {wavelength}")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidGeometry(format!("spacing must be positive, got {spacing}")));
        }
        Ok(Self { m_x, n_z, spacing, wavelength })
    }

    /// Quarter-wavelength spacing, as used in every replication scenario.
    pub fn quarter_wave(m_x: usize, n_z: usize, wavelength: f64) -> Result<Self> {
        Self::new(m_x, n_z, wavelength / 4.0, wavelength)
    }

    pub fn rows(&self) -> usize {
        2 * self.m_x + 1
    }

    pub fn cols(&self) -> usize {
        2 * self.n_z + 1
    }

    pub fn element_count(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn contains(&self, m: i32, n: i32) -> bool {
        m.unsigned_abs() as usize <= self.m_x && n.unsigned_abs() as usize <= self.n_z
    }

    /// Vector index of element `(m, n)`.
    pub fn index(&self, m: i32, n: i32) -> usize {
        debug_assert!(self.contains(m, n));
        self.rows() * (n + self.n_z as i32) as usize + (m + self.m_x as i32) as usize
    }

    /// Inverse of [`HrisGeometry::index`].
    pub fn element(&self, u: usize) -> (i32, i32) {
        let rows = self.rows();
        ((u % rows) as i32 - self.m_x as i32, (u / rows) as i32 - self.n_z as i32)
    }

    /// All `(m, n)` pairs in vector order.
    pub fn elements(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        (0..self.element_count()).map(move |u| self.element(u))
    }

    /// Physical diagonal of the surface.
    pub fn aperture(&self) -> f64 {
        self.spacing * ((self.rows() as f64).powi(2) + (self.cols() as f64).powi(2)).sqrt()
    }

    /// Far-field boundary `2 D² / λ`.
    pub fn rayleigh_distance(&self) -> f64 {
        2.0 * self.aperture().powi(2) / self.wavelength
    }

    /// Reactive near-field boundary `0.62 sqrt(D³ / λ)`.
    pub fn reactive_limit(&self) -> f64 {
        0.62 * (self.aperture().powi(3) / self.wavelength).sqrt()
    }

    pub fn check_index(&self, m: i32, n: i32) -> Result<()> {
        if self.contains(m, n) {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { m, n })
        }
    }

    /// Logs a warning when a location falls outside the radiating near field.
    pub fn warn_if_outside_near_field(&self, loc: &NfLocation) {
        if loc.range <= self.reactive_limit() || loc.range >= self.rayleigh_distance() {
            log::warn!(
                "source range {:.4} m outside the radiating near field ({:.4} m, {:.4} m)",
                loc.range,
                self.reactive_limit(),
                self.rayleigh_distance()
            );
        }
    }
}

/// Cross-shaped BS array: `n_x` elements along x and `n_z` along z sharing a centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsGeometry {
    pub n_x: usize,
    pub n_z: usize,
    pub position: Vector3<f64>,
}

impl BsGeometry {
    pub fn new(n_x: usize, n_z: usize, position: Vector3<f64>) -> Result<Self> {
        if n_x == 0 || n_z == 0 {
            return Err(Error::InvalidGeometry("BS arms need at least one element".into()));
        }
        Ok(Self { n_x, n_z, position })
    }

    pub fn arm_len(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.n_x,
            Axis::Z => self.n_z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Z,
}

/// Elevation, azimuth and range of a point relative to the surface centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NfLocation {
    pub elevation: f64,
    pub azimuth: f64,
    pub range: f64,
}

impl NfLocation {
    pub fn new(elevation: f64, azimuth: f64, range: f64) -> Result<Self> {
        if !(elevation > 0.0 && elevation < PI) || !(azimuth > 0.0 && azimuth < PI) {
            return Err(Error::InvalidParameter(format!(
                "angles must lie in (0, π), got ({elevation}, {azimuth})"
            )));
        }
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::InvalidParameter(format!("range must be positive, got {range}")));
        }
        Ok(Self { elevation, azimuth, range })
    }

    pub fn from_degrees(elevation_deg: f64, azimuth_deg: f64, range: f64) -> Result<Self> {
        Self::new(elevation_deg.to_radians(), azimuth_deg.to_radians(), range)
    }

    /// `sinφ cosθ`, the direction cosine along x.
    pub fn cos_x(&self) -> f64 {
        self.elevation.sin() * self.azimuth.cos()
    }

    /// `cosφ`, the direction cosine along z.
    pub fn cos_z(&self) -> f64 {
        self.elevation.cos()
    }

    /// Cartesian offset from the surface centre.
    pub fn offset(&self) -> Vector3<f64> {
        spherical_unit(self.elevation, self.azimuth) * self.range
    }
}

/// A near-field emitter with its signal power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NearFieldSource {
    pub location: NfLocation,
    pub power: f64,
}

impl NearFieldSource {
    pub fn new(location: NfLocation, power: f64) -> Result<Self> {
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidParameter(format!("power must be positive, got {power}")));
        }
        Ok(Self { location, power })
    }

    /// Builds the source and warns when it sits outside the radiating near field of `geom`.
    pub fn checked(location: NfLocation, power: f64, geom: &HrisGeometry) -> Result<Self> {
        geom.warn_if_outside_near_field(&location);
        Self::new(location, power)
    }
}

/// Elevation/azimuth pair of the direction from the surface to a BS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalBearing {
    pub elevation: f64,
    pub azimuth: f64,
}

impl SphericalBearing {
    pub fn new(elevation: f64, azimuth: f64) -> Result<Self> {
        if !(elevation > 0.0 && elevation < PI) || !(azimuth > 0.0 && azimuth < PI) {
            return Err(Error::InvalidParameter(format!(
                "bearing angles must lie in (0, π), got ({elevation}, {azimuth})"
            )));
        }
        Ok(Self { elevation, azimuth })
    }

    /// Bearing of `target` seen from `origin`.
    pub fn between(origin: &Vector3<f64>, target: &Vector3<f64>) -> Result<Self> {
        let (phi, theta) = crate::linalg::spherical_angles(&(target - origin));
        Self::new(phi, theta)
    }

    /// Angles `(π − φ, π − θ)` used by the surface-side far-field vector.
    pub fn reciprocal(&self) -> (f64, f64) {
        (PI - self.elevation, PI - self.azimuth)
    }

    pub fn unit_vector(&self) -> Vector3<f64> {
        spherical_unit(self.elevation, self.azimuth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PathModel {
    #[default]
    Exact,
    Fresnel,
}

/// Exact path-length difference `r_{m,n} − r` of element `(m, n)`.
pub fn exact_path_delta(geom: &HrisGeometry, loc: &NfLocation, m: i32, n: i32) -> f64 {
    if m == 0 && n == 0 {
        return 0.0;
    }
    let d = geom.spacing;
    let r = loc.range;
    let (m, n) = (m as f64, n as f64);
    let omega = m * loc.cos_x() + n * loc.cos_z();
    // r_{m,n} − r written to avoid cancellation when r is large.
    let q = -2.0 * d * r * omega + (m * m + n * n) * d * d;
    q / ((r * r + q).sqrt() + r)
}

/// Second-order expansion coefficients of the path-length difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FresnelCoefficients {
    pub g_x: f64,
    pub g_z: f64,
    pub phi_x: f64,
    pub phi_z: f64,
    pub alpha: f64,
}

impl FresnelCoefficients {
    pub fn new(geom: &HrisGeometry, loc: &NfLocation) -> Self {
        let d = geom.spacing;
        let (sp, cp) = loc.elevation.sin_cos();
        let ct = loc.azimuth.cos();
        let r = loc.range;
        Self {
            g_x: -d * sp * ct,
            g_z: -d * cp,
            phi_x: d * d * (1.0 - sp * sp * ct * ct) / (2.0 * r),
            phi_z: d * d * sp * sp / (2.0 * r),
            alpha: -d * d * ct * (2.0 * loc.elevation).sin() / (2.0 * r),
        }
    }

    pub fn delta(&self, m: i32, n: i32) -> f64 {
        let (m, n) = (m as f64, n as f64);
        self.g_x * m + self.g_z * n + self.phi_x * m * m + self.phi_z * n * n + self.alpha * m * n
    }
}

/// Fresnel approximation of [`exact_path_delta`].
pub fn fresnel_path_delta(geom: &HrisGeometry, loc: &NfLocation, m: i32, n: i32) -> f64 {
    FresnelCoefficients::new(geom, loc).delta(m, n)
}

pub fn path_delta(geom: &HrisGeometry, loc: &NfLocation, m: i32, n: i32, model: PathModel) -> f64 {
    match model {
        PathModel::Exact => exact_path_delta(geom, loc, m, n),
        PathModel::Fresnel => fresnel_path_delta(geom, loc, m, n),
    }
}

/// `exp(j 2π/λ Δr_{m,n})`.
pub fn nf_steering_entry(geom: &HrisGeometry, loc: &NfLocation, m: i32, n: i32, model: PathModel) -> C64 {
    C64::from_polar(1.0, 2.0 * PI / geom.wavelength * path_delta(geom, loc, m, n, model))
}

/// Full near-field steering vector in vector order.
pub fn nf_steering_vector(geom: &HrisGeometry, loc: &NfLocation, model: PathModel) -> DVector<C64> {
    DVector::from_iterator(
        geom.element_count(),
        geom.elements().map(|(m, n)| nf_steering_entry(geom, loc, m, n, model)),
    )
}

/// Symmetric ULA steering `exp(j((N−1)/2 − i) ω)` for `i = 0..N−1`.
pub fn ula_steering(len: usize, omega: f64) -> DVector<C64> {
    let c = (len as f64 - 1.0) / 2.0;
    DVector::from_iterator(len, (0..len).map(|i| C64::from_polar(1.0, (c - i as f64) * omega)))
}

/// BS arm steering vector toward the surface.
pub fn bs_steering(bs: &BsGeometry, bearing: &SphericalBearing, axis: Axis) -> DVector<C64> {
    ula_steering(bs.arm_len(axis), bs_arm_frequency(bearing, axis))
}

/// Spatial frequency seen by a BS arm: `sinφ cosθ` on x, `cosφ` on z.
pub fn bs_arm_frequency(bearing: &SphericalBearing, axis: Axis) -> f64 {
    match axis {
        Axis::X => bearing.elevation.sin() * bearing.azimuth.cos(),
        Axis::Z => bearing.elevation.cos(),
    }
}

/// Surface-side far-field vector `b_{R,z} ⊗ b_{R,x}` at angles `(φ_R, θ_R)`.
pub fn hris_ff_steering_at(geom: &HrisGeometry, phi_r: f64, theta_r: f64) -> DVector<C64> {
    let wx = phi_r.sin() * theta_r.cos();
    let wz = phi_r.cos();
    let bx = DVector::from_iterator(
        geom.rows(),
        (-(geom.m_x as i32)..=geom.m_x as i32).map(|m| C64::from_polar(1.0, -(m as f64) * wx)),
    );
    let bz = DVector::from_iterator(
        geom.cols(),
        (-(geom.n_z as i32)..=geom.n_z as i32).map(|n| C64::from_polar(1.0, -(n as f64) * wz)),
    );
    kron_vec(&bz, &bx)
}

/// Surface-side vector for a BS bearing, evaluated at the reciprocal angles.
pub fn hris_ff_steering(geom: &HrisGeometry, bearing: &SphericalBearing) -> DVector<C64> {
    let (phi_r, theta_r) = bearing.reciprocal();
    hris_ff_steering_at(geom, phi_r, theta_r)
}
