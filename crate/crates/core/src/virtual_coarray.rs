//! Delay-based cross-correlation of centrally symmetric element pairs.
//!
//! Pairing element `(m, n)` with `(−m, −n)` cancels the even (range-dependent)
//! Fresnel terms, leaving a plane-wave model whose phase slope is doubled.

use nalgebra::{DMatrix, DVector};

use crate::array_model::HrisGeometry;
use crate::error::{Error, Result};
use crate::signal_synthesis::HrisSnapshotBlock;
use crate::C64;

/// Strictly increasing correlation delays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LagSet {
    lags: Vec<usize>,
}

impl LagSet {
    pub fn new(lags: Vec<usize>, slots: usize) -> Result<Self> {
        if lags.is_empty() {
            return Err(Error::InvalidParameter("lag set must not be empty".into()));
        }
        if lags.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("lags must be strictly increasing".into()));
        }
        let max = *lags.last().unwrap();
        if max >= slots {
            return Err(Error::LagTooLarge { tau: max, slots });
        }
        Ok(Self { lags })
    }

    /// `{0, 1, …, L − 1}`.
    pub fn consecutive(count: usize, slots: usize) -> Result<Self> {
        Self::new((0..count).collect(), slots)
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }
}

/// Vector index of the mirrored element `(−m, −n)`.
fn mirror(u: usize, geom: &HrisGeometry) -> usize {
    geom.element_count() - 1 - u
}

fn correlate_rows(block: &HrisSnapshotBlock, u: usize, v: usize, tau: usize) -> C64 {
    let t = block.slots();
    let y = &block.samples;
    let mut acc = C64::new(0.0, 0.0);
    for s in 0..t - tau {
        acc += y[(u, s + tau)] * y[(v, s)].conj();
    }
    acc / (t - tau) as f64
}

/// Time-average estimate of `E{ȳ_u(t + τ) ȳ_v*(t)}` for `u = (m, n)`, `v = (−m, −n)`.
pub fn cross_correlate_pair(block: &HrisSnapshotBlock, m: i32, n: i32, tau: usize) -> Result<C64> {
    block.geom.check_index(m, n)?;
    if tau >= block.slots() {
        return Err(Error::LagTooLarge { tau, slots: block.slots() });
    }
    let u = block.geom.index(m, n);
    Ok(correlate_rows(block, u, mirror(u, &block.geom), tau))
}

/// `h(τ) = vec(H(τ))` over all centrally symmetric pairs.
pub fn assemble_h_tau(block: &HrisSnapshotBlock, tau: usize) -> Result<DVector<C64>> {
    if tau >= block.slots() {
        return Err(Error::LagTooLarge { tau, slots: block.slots() });
    }
    let m = block.geom.element_count();
    Ok(DVector::from_iterator(m, (0..m).map(|u| correlate_rows(block, u, mirror(u, &block.geom), tau))))
}

/// `M × L` matrix `[h(τ_0), …, h(τ_{L−1})]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSnapshotMatrix {
    pub geom: HrisGeometry,
    pub columns: DMatrix<C64>,
    lags: Vec<usize>,
}

impl PseudoSnapshotMatrix {
    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    /// Removes the noise power from the centre autocorrelation at zero lag.
    pub fn remove_noise_bias(&mut self, noise_variance: f64) {
        let centre = self.geom.index(0, 0);
        if let Some(col) = self.lags.iter().position(|&l| l == 0) {
            self.columns[(centre, col)] -= C64::new(noise_variance, 0.0);
        }
    }
}

pub fn build_pseudo_snapshots(block: &HrisSnapshotBlock, lags: &LagSet) -> Result<PseudoSnapshotMatrix> {
    let max = *lags.lags().last().unwrap();
    if max >= block.slots() {
        return Err(Error::LagTooLarge { tau: max, slots: block.slots() });
    }
    let m = block.geom.element_count();
    let mut columns = DMatrix::zeros(m, lags.len());
    for (l, &tau) in lags.lags().iter().enumerate() {
        for u in 0..m {
            columns[(u, l)] = correlate_rows(block, u, mirror(u, &block.geom), tau);
        }
    }
    Ok(PseudoSnapshotMatrix { geom: block.geom, columns, lags: lags.lags().to_vec() })
}

/// `z̃ = vec(H̃ H̃^H / L)` with its geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarrayVector {
    pub geom: HrisGeometry,
    pub data: DVector<C64>,
}

impl CoarrayVector {
    /// `M × M` reshape of `z̃`.
    pub fn matrix(&self) -> DMatrix<C64> {
        let m = self.geom.element_count();
        DMatrix::from_column_slice(m, m, self.data.as_slice())
    }

    /// Lag-averaged difference co-array, `(4 m_x + 1) × (4 n_z + 1)` with rows along x.
    ///
    /// Entry `(p, q)` averages every `R[u₁, u₂]` whose element offsets are
    /// `(m₁ − m₂, n₁ − n₂) = (p, q)`, with `p, q` starting at `−2 m_x`, `−2 n_z`.
    pub fn difference_coarray(&self) -> DMatrix<C64> {
        let g = &self.geom;
        let (mx, nz) = (g.m_x as i32, g.n_z as i32);
        let rows = (4 * mx + 1) as usize;
        let cols = (4 * nz + 1) as usize;
        let r = self.matrix();
        let mut sum = DMatrix::<C64>::zeros(rows, cols);
        let mut count = DMatrix::<f64>::zeros(rows, cols);
        let m = g.element_count();
        for u2 in 0..m {
            let (m2, n2) = g.element(u2);
            for u1 in 0..m {
                let (m1, n1) = g.element(u1);
                let p = (m1 - m2 + 2 * mx) as usize;
                let q = (n1 - n2 + 2 * nz) as usize;
                sum[(p, q)] += r[(u1, u2)];
                count[(p, q)] += 1.0;
            }
        }
        sum.zip_map(&count, |s, c| s / c)
    }
}

pub fn coarray_covariance(h: &PseudoSnapshotMatrix) -> CoarrayVector {
    let l = h.columns.ncols().max(1) as f64;
    let r = &h.columns * h.columns.adjoint() / C64::new(l, 0.0);
    CoarrayVector { geom: h.geom, data: DVector::from_column_slice(r.as_slice()) }
}
