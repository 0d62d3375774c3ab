//! Total-least-squares correction of the Fresnel bias using the exact delay relation
//!
//! ```text
//! 2dm·(r sinφ cosθ) + 2dn·(r cosφ) + 2Δr·r + (Δr² − (m² + n²)d²) = 0
//! ```
//!
//! which is linear in `f = [r sinφ cosθ, r cosφ, r, 1]`.

use nalgebra::DMatrix;

use crate::array_model::{fresnel_path_delta, HrisGeometry, NfLocation};
use crate::error::{Error, Result};

/// `M × 4` delay design matrix with the coarse estimate it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayDesignMatrix {
    pub rows: DMatrix<f64>,
    pub coarse: NfLocation,
}

/// Design matrix from explicit per-element delays in vector order.
pub fn design_from_delays(geom: &HrisGeometry, delays: &[f64], coarse: NfLocation) -> DelayDesignMatrix {
    let d = geom.spacing;
    let mut rows = DMatrix::zeros(geom.element_count(), 4);
    for (u, (m, n)) in geom.elements().enumerate() {
        let (mf, nf) = (m as f64, n as f64);
        let dr = delays[u];
        rows[(u, 0)] = 2.0 * d * mf;
        rows[(u, 1)] = 2.0 * d * nf;
        rows[(u, 2)] = 2.0 * dr;
        rows[(u, 3)] = dr * dr - (mf * mf + nf * nf) * d * d;
    }
    DelayDesignMatrix { rows, coarse }
}

/// Design matrix from Fresnel delays evaluated at the coarse estimate.
pub fn build_design_matrix(geom: &HrisGeometry, coarse: &NfLocation) -> DelayDesignMatrix {
    let delays: Vec<f64> = geom.elements().map(|(m, n)| fresnel_path_delta(geom, coarse, m, n)).collect();
    design_from_delays(geom, &delays, *coarse)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinedEstimate {
    pub location: NfLocation,
    pub min_singular_value: f64,
    /// The refined angles were invalid and the coarse estimate is returned.
    pub rejected: bool,
}

/// Parameters from a null vector `f`; `None` when an arccos argument is invalid.
pub fn parameters_from_null_vector(f: &[f64; 4]) -> Option<NfLocation> {
    let r = f[2] / f[3];
    let c_phi = f[1] / f[2];
    if !c_phi.is_finite() || c_phi.abs() > 1.0 || !(r > 0.0) {
        return None;
    }
    let phi = c_phi.acos();
    let c_theta = f[0] / (f[2] * phi.sin());
    if !c_theta.is_finite() || c_theta.abs() > 1.0 {
        return None;
    }
    Some(NfLocation { elevation: phi, azimuth: c_theta.acos(), range: r })
}

/// Right singular vector of the smallest singular value, normalised so `f[3] > 0`.
pub fn null_vector(rows: &DMatrix<f64>) -> ([f64; 4], f64) {
    let svd = rows.clone().svd(false, true);
    let vt = svd.v_t.expect("right singular vectors");
    let s = &svd.singular_values;
    // A tall matrix has four singular values; a short one is padded with zeros.
    let (idx, smin) = if s.len() < 4 {
        (usize::MAX, 0.0)
    } else {
        (0..4).map(|i| (i, s[i])).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap()
    };
    let mut f = [0.0; 4];
    if idx == usize::MAX {
        // Rank-deficient short matrix: take the complement of the row space.
        let full = rows.transpose() * rows;
        let eig = full.symmetric_eigen();
        let j = (0..4).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
        for i in 0..4 {
            f[i] = eig.eigenvectors[(i, j)];
        }
    } else {
        for i in 0..4 {
            f[i] = vt[(idx, i)];
        }
    }
    if f[3] < 0.0 {
        f.iter_mut().for_each(|x| *x = -*x);
    }
    (f, smin)
}

/// One TLS pass; invalid angle arguments fall back to the coarse estimate.
pub fn refine(design: &DelayDesignMatrix) -> Result<RefinedEstimate> {
    let (f, smin) = null_vector(&design.rows);
    let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
    if f[3].abs() <= 1e-12 * norm {
        return Err(Error::Conditioning("last null-vector entry vanishes".into()));
    }
    Ok(match parameters_from_null_vector(&f) {
        Some(location) => RefinedEstimate { location, min_singular_value: smin, rejected: false },
        None => RefinedEstimate { location: design.coarse, min_singular_value: smin, rejected: true },
    })
}
