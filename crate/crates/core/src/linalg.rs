//! Small dense linear-algebra helpers shared across the estimators.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::C64;

/// Eigen-decomposition of a Hermitian matrix with eigenvalues in ascending order.
pub fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Rebuilds `V diag(f(λ)) V^H` from an eigen-decomposition.
pub fn spectral_map(values: &[f64], vectors: &DMatrix<C64>, f: impl Fn(f64) -> f64) -> DMatrix<C64> {
    let n = vectors.nrows();
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let s = f(v);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * vectors.adjoint()
}

/// Projection onto the Hermitian PSD cone. Also returns the smallest eigenvalue of the input.
pub fn project_psd(m: &DMatrix<C64>) -> (DMatrix<C64>, f64) {
    let (values, vectors) = hermitian_eigen(m);
    let min = values.first().copied().unwrap_or(0.0);
    if min >= 0.0 {
        return ((m + m.adjoint()) * C64::new(0.5, 0.0), min);
    }
    // Only the positive part is needed; with few positive eigenvalues this is cheaper.
    let n = m.nrows();
    let positive: Vec<usize> = (0..n).filter(|&j| values[j] > 0.0).collect();
    let mut factor = DMatrix::<C64>::zeros(n, positive.len());
    for (col, &j) in positive.iter().enumerate() {
        let s = values[j].sqrt();
        for i in 0..n {
            factor[(i, col)] = vectors[(i, j)] * s;
        }
    }
    (&factor * factor.adjoint(), min)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// Principal square root of a Hermitian PSD matrix (negative eigenvalues clipped).
pub fn psd_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let (values, vectors) = hermitian_eigen(m);
    spectral_map(&values, &vectors, |v| v.max(0.0).sqrt())
}

/// Pseudo-inverse of a Hermitian matrix, dropping eigenvalues below `rel_tol * max|λ|`.
pub fn hermitian_pinv(m: &DMatrix<C64>, rel_tol: f64) -> DMatrix<C64> {
    let (values, vectors) = hermitian_eigen(m);
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cut = scale * rel_tol;
    spectral_map(&values, &vectors, |v| if v.abs() > cut && v != 0.0 { 1.0 / v } else { 0.0 })
}

/// Kronecker product `a ⊗ b` of two column vectors.
pub fn kron_vec(a: &DVector<C64>, b: &DVector<C64>) -> DVector<C64> {
    let mut out = DVector::zeros(a.len() * b.len());
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// Unit vector of the spherical direction with elevation `phi` (from +z) and azimuth `theta` (from +x).
pub fn spherical_unit(phi: f64, theta: f64) -> Vector3<f64> {
    Vector3::new(phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos())
}

/// Elevation and azimuth of a nonzero vector, azimuth in (-π, π].
pub fn spherical_angles(v: &Vector3<f64>) -> (f64, f64) {
    let r = v.norm();
    ((v.z / r).clamp(-1.0, 1.0).acos(), v.y.atan2(v.x))
}

/// Golden-section maximisation of a unimodal function on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Vertex of the parabola through three equally spaced samples, as an offset in cells.
pub fn parabolic_offset(left: f64, mid: f64, right: f64) -> f64 {
    let denom = left - 2.0 * mid + right;
    if denom.abs() < f64::EPSILON * mid.abs().max(1.0) {
        0.0
    } else {
        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
    }
}

/// Wraps an angle difference into (-π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = x % two_pi;
    if y > std::f64::consts::PI {
        y -= two_pi;
    } else if y <= -std::f64::consts::PI {
        y += two_pi;
    }
    y
}
