//! ADMM solver for small structured semidefinite programs.
//!
//! Problems have one or two diagonal blocks, each Toeplitz, free or unit-diagonal,
//! and either a least-squares fidelity on the off-diagonal block or a linear cost
//! on a single block:
//!
//! ```text
//! minimise  ρ Σ_b w_b tr(X_bb) + ½‖D − X_10‖²_F      (least squares)
//! minimise  −Re tr(C X)                               (linear, maximisation of tr(C X))
//! s.t.      X ⪰ 0, block structure
//! ```
//!
//! The iteration alternates an exact step over the structured affine set with a
//! projection onto the PSD cone, with residual-balancing penalty updates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, project_psd, psd_sqrt};
use crate::C64;

/// Over-relaxation factor of the splitting iteration.
const RELAXATION: f64 = 1.6;
/// Weight of the absolute part of the stopping tests, in normalised data units.
const ABS_SCALE: f64 = 1e-3;

/// First column of a Hermitian Toeplitz matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzGenerator {
    u: DVector<C64>,
}

impl ToeplitzGenerator {
    /// The first entry is forced real.
    pub fn new(mut u: DVector<C64>) -> Result<Self> {
        if u.is_empty() {
            return Err(Error::InvalidParameter("Toeplitz generator needs at least one entry".into()));
        }
        u[0] = C64::new(u[0].re, 0.0);
        Ok(Self { u })
    }

    pub fn from_slice(u: &[C64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(u))
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn entries(&self) -> &DVector<C64> {
        &self.u
    }

    pub fn matrix(&self) -> DMatrix<C64> {
        toeplitz_from_generator(self)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { u: &self.u * C64::new(c, 0.0) }
    }
}

/// `T[i, j] = u[i − j]`, Hermitian above the diagonal.
pub fn toeplitz_from_generator(g: &ToeplitzGenerator) -> DMatrix<C64> {
    let n = g.dim();
    DMatrix::from_fn(n, n, |i, j| if i >= j { g.u[i - j] } else { g.u[j - i].conj() })
}

/// Least-squares Hermitian Toeplitz fit by diagonal averaging.
pub fn project_toeplitz(m: &DMatrix<C64>) -> ToeplitzGenerator {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "Toeplitz projection needs a square matrix");
    let mut u = DVector::zeros(n);
    for k in 0..n {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n - k {
            acc += m[(i + k, i)] + m[(i, i + k)].conj();
        }
        u[k] = acc / (2.0 * (n - k) as f64);
    }
    u[0] = C64::new(u[0].re, 0.0);
    ToeplitzGenerator { u }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockStructure {
    Toeplitz,
    FreePsd,
    UnitDiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalBlock {
    pub size: usize,
    pub structure: BlockStructure,
    /// Weight `w_b` of `tr(X_bb)` in the regulariser.
    pub trace_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fidelity {
    /// `½‖D − X_10‖²_F` with `D` of shape `(size_1, size_0)`.
    LeastSquares(DMatrix<C64>),
    /// Maximise `Re tr(C X)` over a single Hermitian block.
    Linear(DMatrix<C64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredPsdProblem {
    pub blocks: Vec<DiagonalBlock>,
    pub fidelity: Fidelity,
    pub rho: f64,
}

impl StructuredPsdProblem {
    pub fn new(blocks: Vec<DiagonalBlock>, fidelity: Fidelity, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("regularisation weight must be positive, got {rho}")));
        }
        if blocks.is_empty() || blocks.len() > 2 || blocks.iter().any(|b| b.size == 0) {
            return Err(Error::InvalidParameter("one or two non-empty diagonal blocks are supported".into()));
        }
        match &fidelity {
            Fidelity::LeastSquares(d) => {
                if blocks.len() != 2 || d.shape() != (blocks[1].size, blocks[0].size) {
                    return Err(Error::InvalidParameter("least-squares target must match the off-diagonal block".into()));
                }
            }
            Fidelity::Linear(c) => {
                if blocks.len() != 1 || c.shape() != (blocks[0].size, blocks[0].size) {
                    return Err(Error::InvalidParameter("linear cost must match the single block".into()));
                }
            }
        }
        Ok(Self { blocks, fidelity, rho })
    }

    /// Two-block problem `[[X_0, Z^H], [Z, X_1]] ⪰ 0` with weights `1/(2 size)`.
    pub fn two_block_least_squares(
        first: BlockStructure,
        second: BlockStructure,
        target: DMatrix<C64>,
        rho: f64,
    ) -> Result<Self> {
        let (p, q) = target.shape();
        Self::new(
            vec![
                DiagonalBlock { size: q, structure: first, trace_weight: 1.0 / (2.0 * q as f64) },
                DiagonalBlock { size: p, structure: second, trace_weight: 1.0 / (2.0 * p as f64) },
            ],
            Fidelity::LeastSquares(target),
            rho,
        )
    }

    /// `max tr(C W) s.t. diag(W) = 1, W ⪰ 0`.
    pub fn unit_diagonal_max(cost: DMatrix<C64>) -> Result<Self> {
        let n = cost.nrows();
        Self::new(
            vec![DiagonalBlock { size: n, structure: BlockStructure::UnitDiagonal, trace_weight: 0.0 }],
            Fidelity::Linear(cost),
            1.0,
        )
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.size).sum()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = vec![0];
        for b in &self.blocks {
            off.push(off.last().unwrap() + b.size);
        }
        off
    }

    /// Objective at `x`: the minimised form, or `tr(C X)` for linear problems.
    pub fn objective(&self, x: &DMatrix<C64>) -> f64 {
        let off = self.offsets();
        match &self.fidelity {
            Fidelity::Linear(c) => (c * x).trace().re,
            Fidelity::LeastSquares(d) => {
                let reg: f64 = self
                    .blocks
                    .iter()
                    .enumerate()
                    .map(|(i, b)| b.trace_weight * x.view((off[i], off[i]), (b.size, b.size)).trace().re)
                    .sum();
                let z = x.view((off[1], 0), (self.blocks[1].size, self.blocks[0].size));
                self.rho * reg + 0.5 * (d - z).norm_squared()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iterations: usize,
    pub primal_tolerance: f64,
    pub dual_tolerance: f64,
    pub penalty: f64,
    /// Kept for reproducible configs; the iteration itself is deterministic.
    pub seed: u64,
    pub record_trace: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            primal_tolerance: 1e-6,
            dual_tolerance: 1e-6,
            penalty: 1.0,
            seed: 0,
            record_trace: false,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || !(self.primal_tolerance > 0.0) || !(self.dual_tolerance > 0.0) || !(self.penalty > 0.0) {
            return Err(Error::InvalidParameter("solver settings need positive tolerances, penalty and iterations".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub penalty: f64,
    /// Most negative eigenvalue of the returned matrix.
    pub min_eigenvalue: f64,
    /// Objective per iteration, in the caller's units, when requested.
    pub trace: Vec<f64>,
}

impl ConvergenceReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockComponent {
    Toeplitz(ToeplitzGenerator),
    Dense(DMatrix<C64>),
}

impl BlockComponent {
    pub fn matrix(&self) -> DMatrix<C64> {
        match self {
            BlockComponent::Toeplitz(g) => g.matrix(),
            BlockComponent::Dense(m) => m.clone(),
        }
    }

    pub fn toeplitz(&self) -> Option<&ToeplitzGenerator> {
        match self {
            BlockComponent::Toeplitz(g) => Some(g),
            BlockComponent::Dense(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdSolution {
    pub matrix: DMatrix<C64>,
    pub blocks: Vec<BlockComponent>,
    pub off_diagonal: Option<DMatrix<C64>>,
    pub objective: f64,
    pub report: ConvergenceReport,
}

struct Workspace<'a> {
    problem: &'a StructuredPsdProblem,
    off: Vec<usize>,
    /// Fidelity data after normalisation.
    data: DMatrix<C64>,
    rho: f64,
}

impl Workspace<'_> {
    /// Exact minimiser of `f(V) + β/2 ‖V − C‖²` over the structured set.
    fn structured_step(&self, c: &DMatrix<C64>, beta: f64) -> DMatrix<C64> {
        let n = c.nrows();
        let mut v = DMatrix::zeros(n, n);
        for (i, b) in self.problem.blocks.iter().enumerate() {
            let o = self.off[i];
            let mut cb = c.view((o, o), (b.size, b.size)).into_owned();
            cb = (&cb + cb.adjoint()) * C64::new(0.5, 0.0);
            if let Fidelity::Linear(_) = self.problem.fidelity {
                cb += &self.data / C64::new(beta, 0.0);
            }
            let shift = C64::new(self.rho * b.trace_weight / beta, 0.0);
            for k in 0..b.size {
                cb[(k, k)] -= shift;
            }
            let block = match b.structure {
                BlockStructure::Toeplitz => project_toeplitz(&cb).matrix(),
                BlockStructure::FreePsd => cb,
                BlockStructure::UnitDiagonal => {
                    for k in 0..b.size {
                        cb[(k, k)] = C64::new(1.0, 0.0);
                    }
                    cb
                }
            };
            v.view_mut((o, o), (b.size, b.size)).copy_from(&block);
        }
        if self.problem.blocks.len() == 2 {
            let (p, q) = (self.problem.blocks[1].size, self.problem.blocks[0].size);
            let lower = c.view((self.off[1], 0), (p, q)).into_owned();
            let upper = c.view((0, self.off[1]), (q, p)).adjoint();
            let avg = (lower + upper) * C64::new(0.5, 0.0);
            let z = match self.problem.fidelity {
                Fidelity::LeastSquares(_) => (&self.data + avg * C64::new(2.0 * beta, 0.0)) / C64::new(1.0 + 2.0 * beta, 0.0),
                Fidelity::Linear(_) => avg,
            };
            v.view_mut((self.off[1], 0), (p, q)).copy_from(&z);
            v.view_mut((0, self.off[1]), (q, p)).copy_from(&z.adjoint());
        }
        v
    }

    /// Structured matrix built from the positive parts of the data, used as a starting point.
    fn warm_start(&self) -> DMatrix<C64> {
        let n = self.problem.dim();
        match self.problem.fidelity {
            Fidelity::Linear(_) => DMatrix::identity(n, n),
            Fidelity::LeastSquares(_) => {
                let (p, q) = self.data.shape();
                let b0 = &self.problem.blocks[0];
                let b1 = &self.problem.blocks[1];
                let s = ((b0.trace_weight * q as f64) / (b1.trace_weight.max(f64::MIN_POSITIVE) * p as f64))
                    .sqrt()
                    .clamp(1e-6, 1e6);
                let ratio = (p as f64 / q as f64).sqrt();
                let x1 = psd_sqrt(&(&self.data * self.data.adjoint())) * C64::new(s * ratio, 0.0);
                let x0 = psd_sqrt(&(self.data.adjoint() * &self.data)) * C64::new(1.0 / (s * ratio), 0.0);
                let mut v = DMatrix::zeros(n, n);
                v.view_mut((0, 0), (q, q)).copy_from(&x0);
                v.view_mut((q, q), (p, p)).copy_from(&x1);
                v.view_mut((q, 0), (p, q)).copy_from(&self.data);
                v.view_mut((0, q), (q, p)).copy_from(&self.data.adjoint());
                // Impose the structure without the regulariser shift.
                let bare = Workspace { problem: self.problem, off: self.off.clone(), data: self.data.clone(), rho: 0.0 };
                let mut structured = v.clone();
                for (i, b) in self.problem.blocks.iter().enumerate() {
                    let o = bare.off[i];
                    let cb = v.view((o, o), (b.size, b.size)).into_owned();
                    let block = match b.structure {
                        BlockStructure::Toeplitz => project_toeplitz(&cb).matrix(),
                        _ => cb,
                    };
                    structured.view_mut((o, o), (b.size, b.size)).copy_from(&block);
                }
                project_psd(&structured).0
            }
        }
    }
}

/// Solves the problem; a non-converged result is returned with its status flag set.
pub fn solve_structured_psd(problem: &StructuredPsdProblem, settings: &SolverSettings) -> Result<PsdSolution> {
    settings.validate()?;
    let n = problem.dim();
    let off = problem.offsets();
    let (data, scale) = match &problem.fidelity {
        Fidelity::LeastSquares(d) => {
            let rms = d.norm() / ((d.nrows() * d.ncols()) as f64).sqrt();
            (d.clone(), rms)
        }
        Fidelity::Linear(c) => (c.clone(), c.norm()),
    };
    if scale == 0.0 {
        return Ok(trivial_solution(problem, &off));
    }
    let ws = Workspace {
        problem,
        off: off.clone(),
        data: &data / C64::new(scale, 0.0),
        rho: match problem.fidelity {
            Fidelity::LeastSquares(_) => problem.rho / scale,
            Fidelity::Linear(_) => problem.rho,
        },
    };

    let mut beta = settings.penalty;
    let mut s = ws.warm_start();
    let mut u = DMatrix::<C64>::zeros(n, n);
    let mut v = s.clone();
    let mut trace = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    let (mut r_norm, mut s_norm) = (f64::INFINITY, f64::INFINITY);
    let unscale = |x: &DMatrix<C64>| match problem.fidelity {
        Fidelity::LeastSquares(_) => x * C64::new(scale, 0.0),
        Fidelity::Linear(_) => x.clone(),
    };

    let n_scale = n as f64;
    for it in 1..=settings.max_iterations {
        iterations = it;
        v = ws.structured_step(&(&s - &u), beta);
        let s_prev = s;
        let relaxed = &v * C64::new(RELAXATION, 0.0) + &s_prev * C64::new(1.0 - RELAXATION, 0.0);
        s = project_psd(&(&relaxed + &u)).0;
        u += &relaxed - &s;

        let r = (&v - &s).norm();
        let d = beta * (&s - &s_prev).norm();
        r_norm = r / (n_scale * ABS_SCALE + v.norm().max(s.norm()));
        s_norm = d / (n_scale * ABS_SCALE + beta * u.norm());
        if settings.record_trace {
            trace.push(problem.objective(&unscale(&v)));
        }
        if it % 100 == 0 {
            log::debug!("admm it {it}: primal {r_norm:.3e} dual {s_norm:.3e} penalty {beta:.3e}");
        }
        if r_norm <= settings.primal_tolerance && s_norm <= settings.dual_tolerance {
            status = SolveStatus::Converged;
            break;
        }
        if it % 10 == 0 && it < settings.max_iterations / 2 {
            if r_norm > 5.0 * s_norm {
                beta *= 2.0;
                u /= C64::new(2.0, 0.0);
            } else if s_norm > 5.0 * r_norm {
                beta /= 2.0;
                u *= C64::new(2.0, 0.0);
            }
        }
    }

    let matrix = unscale(&v);
    let min_eig = min_eigenvalue(&matrix);
    let blocks = problem
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let block = matrix.view((off[i], off[i]), (b.size, b.size)).into_owned();
            match b.structure {
                BlockStructure::Toeplitz => BlockComponent::Toeplitz(project_toeplitz(&block)),
                _ => BlockComponent::Dense(block),
            }
        })
        .collect();
    let off_diagonal = (problem.blocks.len() == 2)
        .then(|| matrix.view((off[1], 0), (problem.blocks[1].size, problem.blocks[0].size)).into_owned());
    let objective = problem.objective(&matrix);
    Ok(PsdSolution {
        matrix,
        blocks,
        off_diagonal,
        objective,
        report: ConvergenceReport {
            status,
            iterations,
            primal_residual: r_norm,
            dual_residual: s_norm,
            penalty: beta,
            min_eigenvalue: min_eig,
            trace,
        },
    })
}

fn trivial_solution(problem: &StructuredPsdProblem, off: &[usize]) -> PsdSolution {
    let n = problem.dim();
    let matrix = match problem.fidelity {
        Fidelity::Linear(_) => DMatrix::identity(n, n),
        Fidelity::LeastSquares(_) => DMatrix::zeros(n, n),
    };
    let blocks = problem
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let block = matrix.view((off[i], off[i]), (b.size, b.size)).into_owned();
            match b.structure {
                BlockStructure::Toeplitz => BlockComponent::Toeplitz(project_toeplitz(&block)),
                _ => BlockComponent::Dense(block),
            }
        })
        .collect();
    let off_diagonal = (problem.blocks.len() == 2)
        .then(|| DMatrix::zeros(problem.blocks[1].size, problem.blocks[0].size));
    PsdSolution {
        objective: problem.objective(&matrix),
        matrix,
        blocks,
        off_diagonal,
        report: ConvergenceReport {
            status: SolveStatus::Converged,
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            penalty: 0.0,
            min_eigenvalue: 0.0,
            trace: Vec::new(),
        },
    }
}

/// Regularisation weight `σ sqrt(P log P)` for a data matrix with `P` entries.
pub fn regularisation_weight(noise_level: f64, entries: usize) -> f64 {
    let p = entries.max(2) as f64;
    noise_level * (p * p.ln()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigen;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn toeplitz_fill_examples() {
        let one = ToeplitzGenerator::from_slice(&[c(1.0, 0.0)]).unwrap();
        assert_eq!(one.matrix(), DMatrix::from_element(1, 1, c(1.0, 0.0)));
        let g = ToeplitzGenerator::from_slice(&[c(2.0, 0.0), c(0.0, 1.0)]).unwrap();
        let t = g.matrix();
        assert_eq!(t, DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(2.0, 0.0)]));
        assert_eq!(project_toeplitz(&t), g);
    }

    #[test]
    fn toeplitz_projection_of_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)]);
        let g = project_toeplitz(&m);
        assert_eq!(g.entries().as_slice(), &[c(2.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn noiseless_sinusoid_gives_rank_one_vandermonde() {
        let (p, q) = (9, 7);
        let fx: f64 = 0.37;
        let fz: f64 = -1.1;
        let d = DMatrix::from_fn(p, q, |i, j| C64::from_polar(1.0, fx * i as f64 - fz * j as f64));
        let problem = StructuredPsdProblem::two_block_least_squares(
            BlockStructure::Toeplitz,
            BlockStructure::Toeplitz,
            d,
            1e-3,
        )
        .unwrap();
        let sol = solve_structured_psd(&problem, &SolverSettings::default()).unwrap();
        let tx = sol.blocks[1].matrix();
        let (vals, vecs) = hermitian_eigen(&tx);
        assert!(vals[p - 2].abs() < 1e-4 * vals[p - 1], "{vals:?}");
        let lead = vecs.column(p - 1);
        let ratio = lead[1] / lead[0];
        assert!((ratio.arg() - fx).abs() < 1e-4, "{}", ratio.arg());
    }

    #[test]
    fn unit_diagonal_identity_cost() {
        let problem = StructuredPsdProblem::unit_diagonal_max(DMatrix::identity(5, 5)).unwrap();
        let sol = solve_structured_psd(&problem, &SolverSettings::default()).unwrap();
        assert!((sol.objective - 5.0).abs() < 1e-6);
        for i in 0..5 {
            assert_eq!(sol.matrix[(i, i)], c(1.0, 0.0));
        }
    }

    #[test]
    fn zero_data_gives_zero_blocks() {
        let problem = StructuredPsdProblem::two_block_least_squares(
            BlockStructure::Toeplitz,
            BlockStructure::Toeplitz,
            DMatrix::zeros(4, 3),
            1.0,
        )
        .unwrap();
        let sol = solve_structured_psd(&problem, &SolverSettings::default()).unwrap();
        assert_eq!(sol.matrix.norm(), 0.0);
    }

    #[test]
    fn malformed_problems_rejected() {
        assert!(StructuredPsdProblem::two_block_least_squares(
            BlockStructure::Toeplitz,
            BlockStructure::Toeplitz,
            DMatrix::zeros(4, 3),
            0.0
        )
        .is_err());
        let blocks = vec![DiagonalBlock { size: 3, structure: BlockStructure::FreePsd, trace_weight: 1.0 }];
        assert!(StructuredPsdProblem::new(blocks, Fidelity::LeastSquares(DMatrix::zeros(3, 3)), 1.0).is_err());
    }

    #[test]
    fn returned_structure_is_exact() {
        let d = DMatrix::from_fn(6, 5, |i, j| c((i * j) as f64 * 0.1, (i as f64 - j as f64) * 0.3));
        let problem = StructuredPsdProblem::two_block_least_squares(
            BlockStructure::Toeplitz,
            BlockStructure::Toeplitz,
            d,
            0.5,
        )
        .unwrap();
        let sol = solve_structured_psd(&problem, &SolverSettings::default()).unwrap();
        for b in &sol.blocks {
            let m = b.matrix();
            assert!((project_toeplitz(&m).matrix() - &m).norm() < 1e-12 * m.norm().max(1.0));
        }
        let trace = sol.matrix.trace().re;
        assert!(sol.report.min_eigenvalue >= -1e-6 * trace);
    }

    proptest! {
        #[test]
        fn toeplitz_round_trip(re in proptest::collection::vec(-2.0f64..2.0, 1..8), im in proptest::collection::vec(-2.0f64..2.0, 8)) {
            let u: Vec<C64> = re.iter().zip(im.iter()).map(|(&a, &b)| c(a, b)).collect();
            let g = ToeplitzGenerator::from_slice(&u).unwrap();
            let back = project_toeplitz(&g.matrix());
            prop_assert!((back.entries() - g.entries()).norm() < 1e-12);
            prop_assert!((g.matrix() - g.matrix().adjoint()).norm() < 1e-15);
        }

        #[test]
        fn toeplitz_projection_non_expansive(n in 2usize..7, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut draw = || DMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let a = draw();
            let b = draw();
            let ha = (&a + a.adjoint()) * c(0.5, 0.0);
            let hb = (&b + b.adjoint()) * c(0.5, 0.0);
            let pa = project_toeplitz(&ha).matrix();
            let pb = project_toeplitz(&hb).matrix();
            prop_assert!((pa - pb).norm() <= (ha - hb).norm() + 1e-12);
        }
    }
}
