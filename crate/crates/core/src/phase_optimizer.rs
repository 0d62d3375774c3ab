//! Surface phase design that maximises the power reflected toward a BS, via the
//! semidefinite relaxation of `max w^H R w` over unit-modulus `w` and Gaussian randomisation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::array_model::{Axis, BsGeometry, HrisGeometry, SphericalBearing};
use crate::error::{Error, Result};
use crate::linalg::hermitian_eigen;
use crate::sdp_engine::{solve_structured_psd, ConvergenceReport, SolveStatus, SolverSettings, StructuredPsdProblem};
use crate::signal_synthesis::{bs_channel, seeded_stream, PhaseSchedule};
use crate::C64;

/// Relative size of the second eigenvalue below which `R` is treated as rank one.
pub const RANK_ONE_TOLERANCE: f64 = 1e-10;

/// `R = C^H C` with `C = √(1−δ) H diag(ŷ)`, so that `‖C w‖² = w^H R w`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub r: DMatrix<C64>,
    /// `C` when known; a short factor makes the rank test cheap.
    pub factor: Option<DMatrix<C64>>,
}

impl QuadraticForm {
    pub fn from_matrix(r: DMatrix<C64>) -> Self {
        Self { r, factor: None }
    }

    pub fn from_factor(c: DMatrix<C64>) -> Self {
        Self { r: c.adjoint() * &c, factor: Some(c) }
    }

    pub fn value(&self, w: &DVector<C64>) -> f64 {
        match &self.factor {
            Some(c) => (c * w).norm_squared(),
            None => (w.adjoint() * &self.r * w)[(0, 0)].re,
        }
    }

    /// Top eigenvector of `R` when it is numerically rank one.
    fn rank_one_direction(&self) -> Option<DVector<C64>> {
        let m = self.r.nrows();
        if let Some(c) = self.factor.as_ref().filter(|c| c.nrows() < m) {
            let (vals, vecs) = hermitian_eigen(&(c * c.adjoint()));
            let n = vals.len();
            let top = vals[n - 1];
            let second = if n > 1 { vals[n - 2] } else { 0.0 };
            if top <= 0.0 {
                return Some(DVector::from_element(m, C64::new(1.0, 0.0)));
            }
            return (second.abs() <= RANK_ONE_TOLERANCE * top).then(|| c.adjoint() * vecs.column(n - 1));
        }
        let (vals, vecs) = hermitian_eigen(&self.r);
        let top = vals[m - 1];
        let second = if m > 1 { vals[m - 2] } else { 0.0 };
        (top <= 0.0 || second.abs() <= RANK_ONE_TOLERANCE * top).then(|| vecs.column(m - 1).into_owned())
    }
}

pub fn build_quadratic(h: &DMatrix<C64>, y_hat: &DVector<C64>, delta: f64) -> Result<QuadraticForm> {
    if h.ncols() != y_hat.len() {
        return Err(Error::InvalidParameter("channel columns must match the surface output length".into()));
    }
    let mut c = h.clone() * C64::new((1.0 - delta).sqrt(), 0.0);
    for (j, y) in y_hat.iter().enumerate() {
        for i in 0..c.nrows() {
            c[(i, j)] *= y;
        }
    }
    Ok(QuadraticForm::from_factor(c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedSolution {
    /// Relaxed `W ⪰ 0` with unit diagonal.
    pub w: DMatrix<C64>,
    /// `tr(R W)`, an upper bound on the unit-modulus optimum.
    pub objective: f64,
    pub report: ConvergenceReport,
    /// Solved in closed form because `R` has rank one.
    pub closed_form: bool,
}

fn closed_form_report() -> ConvergenceReport {
    ConvergenceReport {
        status: SolveStatus::Converged,
        iterations: 0,
        primal_residual: 0.0,
        dual_residual: 0.0,
        penalty: 0.0,
        min_eigenvalue: 0.0,
        trace: Vec::new(),
    }
}

/// Phases of `v` as a unit-modulus vector; zero entries map to 1.
fn phases_of(v: &DVector<C64>) -> DVector<C64> {
    v.map(|x| if x.norm() > 0.0 { x / x.norm() } else { C64::new(1.0, 0.0) })
}

/// `max tr(R W)` over `diag(W) = 1, W ⪰ 0`.
///
/// For `R = v v^H` the relaxation is tight at `w = phase(v)`.
pub fn solve_relaxation(q: &QuadraticForm, settings: &SolverSettings) -> Result<LiftedSolution> {
    let m = q.r.nrows();
    if m == 0 || q.r.ncols() != m {
        return Err(Error::InvalidParameter("quadratic form must be square and non-empty".into()));
    }
    if let Some(v) = q.rank_one_direction() {
        let w = phases_of(&v);
        let objective = q.value(&w);
        return Ok(LiftedSolution { w: &w * w.adjoint(), objective, report: closed_form_report(), closed_form: true });
    }
    let problem = StructuredPsdProblem::unit_diagonal_max(q.r.clone())?;
    let sol = solve_structured_psd(&problem, settings)?;
    Ok(LiftedSolution { objective: sol.objective, w: sol.matrix, report: sol.report, closed_form: false })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    pub w: DVector<C64>,
    pub power: f64,
}

/// Draws `ξ = U Λ^{1/2} n`, projects onto unit modulus and keeps the best of `draws`.
pub fn randomize_and_select(lifted: &DMatrix<C64>, q: &QuadraticForm, draws: usize, seed: u64) -> Result<PhaseVector> {
    if draws == 0 {
        return Err(Error::InvalidParameter("at least one randomisation draw is required".into()));
    }
    let m = lifted.nrows();
    let (vals, vecs) = hermitian_eigen(lifted);
    let mut factor = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        factor.column_mut(j).scale_mut(v.max(0.0).sqrt());
    }
    let mut rng = seeded_stream(seed, 2);
    let mut best: Option<PhaseVector> = None;
    for _ in 0..draws {
        let n = DVector::from_fn(m, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        });
        let w = phases_of(&(&factor * n));
        let power = q.value(&w);
        if best.as_ref().is_none_or(|b| power > b.power) {
            best = Some(PhaseVector { w, power });
        }
    }
    Ok(best.expect("at least one draw"))
}

/// Relaxation followed by randomisation for one slot.
///
/// A rank-one lift is used directly: every draw would project to its phases up to a common rotation.
pub fn optimize_slot(q: &QuadraticForm, draws: usize, seed: u64, settings: &SolverSettings) -> Result<(PhaseVector, LiftedSolution)> {
    if draws == 0 {
        return Err(Error::InvalidParameter("at least one randomisation draw is required".into()));
    }
    let lifted = solve_relaxation(q, settings)?;
    let best = if lifted.closed_form {
        // Column 0 of w w^H is w rotated by the conjugate phase of its first entry.
        let w = lifted.w.column(0).into_owned();
        PhaseVector { power: q.value(&w), w }
    } else {
        randomize_and_select(&lifted.w, q, draws, seed)?
    };
    Ok((best, lifted))
}

/// Optimised schedule for one BS arm from an estimated bearing and reconstructed outputs `ŷ(t)`.
///
/// The channel gain only scales `R`, so a unit gain is used.
#[allow(clippy::too_many_arguments)]
pub fn optimize_schedule(
    bs: &BsGeometry,
    geom: &HrisGeometry,
    bearing: &SphericalBearing,
    axis: Axis,
    y_hat: &DMatrix<C64>,
    delta: f64,
    draws: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<PhaseSchedule> {
    if y_hat.nrows() != geom.element_count() {
        return Err(Error::InvalidParameter("surface outputs must have one row per element".into()));
    }
    let h = bs_channel(bs, geom, bearing, C64::new(1.0, 0.0), axis);
    let mut weights = DMatrix::zeros(geom.element_count(), y_hat.ncols());
    for t in 0..y_hat.ncols() {
        let q = build_quadratic(&h, &y_hat.column(t).into_owned(), delta)?;
        let (best, _) = optimize_slot(&q, draws, seed.wrapping_add(t as u64), settings)?;
        weights.set_column(t, &best.w);
    }
    PhaseSchedule::new(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_eigenvalue;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_form(m: usize, rank: usize, seed: u64) -> QuadraticForm {
        let mut rng = seeded_stream(seed, 7);
        let c = DMatrix::from_fn(rank, m, |_, _| {
            C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        });
        QuadraticForm::from_matrix(c.adjoint() * c)
    }

    #[test]
    fn rank_one_takes_matched_phases() {
        let r = DVector::from_iterator(6, (0..6).map(|i| C64::from_polar(1.0, 0.7 * i as f64 + 0.3)));
        let q = QuadraticForm::from_matrix(&r * r.adjoint());
        let lifted = solve_relaxation(&q, &SolverSettings::default()).unwrap();
        assert!(lifted.closed_form);
        assert!((lifted.objective - 36.0).abs() < 1e-9);
        let best = randomize_and_select(&lifted.w, &q, 20, 3).unwrap();
        assert!((best.power - 36.0).abs() < 1e-9);
        let (fast, _) = optimize_slot(&q, 20, 3, &SolverSettings::default()).unwrap();
        assert!((fast.power - 36.0).abs() < 1e-9);
    }

    #[test]
    fn factor_and_matrix_forms_agree() {
        let mut rng = seeded_stream(8, 7);
        let c = DMatrix::from_fn(1, 7, |_, _| C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)));
        let a = solve_relaxation(&QuadraticForm::from_factor(c.clone()), &SolverSettings::default()).unwrap();
        let b = solve_relaxation(&QuadraticForm::from_matrix(c.adjoint() * &c), &SolverSettings::default()).unwrap();
        assert!(a.closed_form && b.closed_form);
        assert!((a.objective - b.objective).abs() < 1e-9 * a.objective);
        let bound: f64 = c.iter().map(|x| x.norm()).sum::<f64>().powi(2);
        assert!((a.objective - bound).abs() < 1e-9 * bound);
    }

    #[test]
    fn relaxation_is_feasible_and_bounds_the_draws() {
        let q = random_form(6, 6, 11);
        let lifted = solve_relaxation(&q, &SolverSettings::default()).unwrap();
        assert!(!lifted.closed_form);
        assert!(lifted.report.converged());
        for i in 0..6 {
            assert!((lifted.w[(i, i)].re - 1.0).abs() < 1e-9);
        }
        assert!(min_eigenvalue(&lifted.w) > -1e-6);
        let best = randomize_and_select(&lifted.w, &q, 200, 1).unwrap();
        // Random phases achieve tr(R) on average.
        assert!(best.power >= q.r.trace().re);
        assert!(best.power <= lifted.objective * (1.0 + 1e-5));
    }

    #[test]
    fn small_problem_near_exhaustive_optimum() {
        let q = random_form(4, 4, 5);
        let lifted = solve_relaxation(&q, &SolverSettings::default()).unwrap();
        let best = randomize_and_select(&lifted.w, &q, 200, 2).unwrap();
        let alphabet: Vec<C64> = (0..8).map(|k| C64::from_polar(1.0, k as f64 * std::f64::consts::PI / 4.0)).collect();
        let mut exhaustive: f64 = 0.0;
        for code in 0..8usize.pow(4) {
            let w = DVector::from_fn(4, |i, _| alphabet[(code / 8usize.pow(i as u32)) % 8]);
            exhaustive = exhaustive.max(q.value(&w));
        }
        assert!(best.power >= 0.95 * exhaustive, "{} vs {}", best.power, exhaustive);
        assert!(lifted.objective >= exhaustive * (1.0 - 1e-6));
    }

    #[test]
    fn zero_draws_are_rejected() {
        let q = random_form(3, 3, 1);
        assert!(randomize_and_select(&DMatrix::identity(3, 3), &q, 0, 0).is_err());
    }

    #[test]
    fn quadratic_matches_reflected_power() {
        let g = HrisGeometry::quarter_wave(1, 1, 0.01).unwrap();
        let bs = BsGeometry::new(5, 5, nalgebra::Vector3::new(3.0, 4.0, 2.0)).unwrap();
        let bearing = SphericalBearing::between(&nalgebra::Vector3::zeros(), &bs.position).unwrap();
        let h = bs_channel(&bs, &g, &bearing, C64::new(0.8, 0.1), Axis::X);
        let y = DVector::from_fn(9, |i, _| C64::new(i as f64 * 0.1, 1.0 - i as f64 * 0.05));
        let w = DVector::from_fn(9, |i, _| C64::from_polar(1.0, 0.4 * i as f64));
        let q = build_quadratic(&h, &y, 0.3).unwrap();
        let direct = (&h * w.component_mul(&y) * C64::new(0.7f64.sqrt(), 0.0)).norm_squared();
        assert!((q.value(&w) - direct).abs() < 1e-12 * direct);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn sandwich_property(seed in 0u64..1000, rank in 1usize..4) {
            let q = random_form(5, rank, seed);
            let lifted = solve_relaxation(&q, &SolverSettings::default()).unwrap();
            let best = randomize_and_select(&lifted.w, &q, 50, seed).unwrap();
            let trivial = q.value(&DVector::from_element(5, C64::new(1.0, 0.0)));
            prop_assert!(best.power <= lifted.objective * (1.0 + 1e-5));
            prop_assert!(lifted.objective >= trivial * (1.0 - 1e-6));
            prop_assert!(best.w.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
        }
    }
}
