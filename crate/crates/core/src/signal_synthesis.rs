//! HRIS-side and BS-side observation synthesis.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::array_model::{
    bs_steering, hris_ff_steering, nf_steering_vector, Axis, BsGeometry, HrisGeometry, NearFieldSource,
    PathModel, SphericalBearing,
};
use crate::error::{Error, Result};
use crate::C64;

const SIGNAL_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

/// Deterministic RNG for stream `stream` of `seed`.
pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Circular complex Gaussian sample with the given variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SignalKind {
    /// White circular Gaussian samples.
    ComplexGaussian,
    /// Random-phase tones at normalised frequencies `(k + u)/K`, `u ~ U[0, 1)`.
    #[default]
    Narrowband,
}

/// Source waveform generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSignalModel {
    pub kind: SignalKind,
    pub seed: u64,
}

impl SourceSignalModel {
    pub fn new(kind: SignalKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    /// `K × T` matrix of source samples, row `k` with average power `powers[k]`.
    pub fn generate(&self, powers: &[f64], slots: usize) -> DMatrix<C64> {
        let k = powers.len();
        let mut rng = seeded_stream(self.seed, SIGNAL_STREAM);
        let mut s = DMatrix::zeros(k, slots);
        match self.kind {
            SignalKind::ComplexGaussian => {
                for t in 0..slots {
                    for (i, &p) in powers.iter().enumerate() {
                        s[(i, t)] = complex_normal(&mut rng, p);
                    }
                }
            }
            SignalKind::Narrowband => {
                let offset: f64 = rng.gen();
                for (i, &p) in powers.iter().enumerate() {
                    let freq = (i as f64 + offset) / k as f64;
                    let phase: f64 = rng.gen::<f64>() * 2.0 * PI;
                    for t in 0..slots {
                        s[(i, t)] = C64::from_polar(p.sqrt(), 2.0 * PI * freq * t as f64 + phase);
                    }
                }
            }
        }
        s
    }
}

/// Gains, power split and noise level of the links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub gamma_x: C64,
    pub gamma_z: C64,
    pub delta: f64,
    pub noise_variance: f64,
}

impl ChannelSpec {
    pub fn new(gamma_x: C64, gamma_z: C64, delta: f64, noise_variance: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise variance must be ≥ 0, got {noise_variance}")));
        }
        Ok(Self { gamma_x, gamma_z, delta, noise_variance })
    }

    /// Unit gains on both arms.
    pub fn unit_gain(delta: f64, noise_variance: f64) -> Result<Self> {
        Self::new(C64::new(1.0, 0.0), C64::new(1.0, 0.0), delta, noise_variance)
    }

    pub fn gamma(&self, axis: Axis) -> C64 {
        match axis {
            Axis::X => self.gamma_x,
            Axis::Z => self.gamma_z,
        }
    }

    /// Noise variance giving `snr_db` for the per-element sensed signal power `δ Σ P_k`.
    pub fn noise_for_snr(delta: f64, total_power: f64, snr_db: f64) -> f64 {
        delta * total_power / 10f64.powf(snr_db / 10.0)
    }
}

/// HRIS observations, one column `ȳ(t)` per slot in vector order.
#[derive(Debug, Clone, PartialEq)]
pub struct HrisSnapshotBlock {
    pub geom: HrisGeometry,
    pub samples: DMatrix<C64>,
}

impl HrisSnapshotBlock {
    pub fn new(geom: HrisGeometry, samples: DMatrix<C64>) -> Result<Self> {
        if samples.nrows() != geom.element_count() {
            return Err(Error::InvalidParameter(format!(
                "block has {} rows, geometry has {} elements",
                samples.nrows(),
                geom.element_count()
            )));
        }
        Ok(Self { geom, samples })
    }

    pub fn slots(&self) -> usize {
        self.samples.ncols()
    }

    pub fn snapshot(&self, t: usize) -> DVector<C64> {
        self.samples.column(t).into_owned()
    }

    /// Slot `t` as a `(2 m_x + 1) × (2 n_z + 1)` grid, rows along x.
    pub fn grid(&self, t: usize) -> DMatrix<C64> {
        DMatrix::from_column_slice(self.geom.rows(), self.geom.cols(), self.samples.column(t).as_slice())
    }
}

/// Noise variance from the median of the lower half of the sample-covariance eigenvalues.
pub fn estimate_noise_variance(samples: &DMatrix<C64>) -> f64 {
    let t = samples.ncols().max(1) as f64;
    let cov = samples * samples.adjoint() / C64::new(t, 0.0);
    let values = crate::linalg::hermitian_eigen(&cov).0;
    let lower = &values[..(values.len() / 2).max(1)];
    lower[lower.len() / 2].max(0.0)
}

/// Unit-modulus surface weights, one column `w_t` per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule {
    pub weights: DMatrix<C64>,
}

impl PhaseSchedule {
    /// Validates unit modulus to 1e-9 and renormalises each entry exactly.
    pub fn new(weights: DMatrix<C64>) -> Result<Self> {
        if let Some(bad) = weights.iter().find(|w| (w.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::InvalidParameter(format!("schedule entry {bad} is not unit modulus")));
        }
        Ok(Self { weights: weights.map(|w| w / w.norm()) })
    }

    pub fn from_phases(phases: &DMatrix<f64>) -> Self {
        Self { weights: phases.map(|p| C64::from_polar(1.0, p)) }
    }

    pub fn slots(&self) -> usize {
        self.weights.ncols()
    }

    pub fn elements(&self) -> usize {
        self.weights.nrows()
    }
}

/// I.i.d. uniform phases on `[0, 2π)`.
pub fn random_phase_schedule(elements: usize, slots: usize, seed: u64) -> PhaseSchedule {
    let mut rng = seeded_stream(seed, 0);
    let phases = DMatrix::from_fn(elements, slots, |_, _| rng.gen::<f64>() * 2.0 * PI);
    PhaseSchedule::from_phases(&phases)
}

/// Schedules driving the two BS arms.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSchedules {
    pub x: PhaseSchedule,
    pub z: PhaseSchedule,
}

impl ArmSchedules {
    pub fn arm(&self, axis: Axis) -> &PhaseSchedule {
        match axis {
            Axis::X => &self.x,
            Axis::Z => &self.z,
        }
    }
}

/// Observations of the two arms of one BS.
#[derive(Debug, Clone, PartialEq)]
pub struct BsSnapshotBlock {
    pub x_arm: DMatrix<C64>,
    pub z_arm: DMatrix<C64>,
}

impl BsSnapshotBlock {
    pub fn arm(&self, axis: Axis) -> &DMatrix<C64> {
        match axis {
            Axis::X => &self.x_arm,
            Axis::Z => &self.z_arm,
        }
    }

    pub fn slots(&self) -> usize {
        self.x_arm.ncols()
    }
}

/// `K × T` sample matrix plus additive noise into an HRIS block.
pub fn synthesize_hris_rx_with<R: Rng + ?Sized>(
    geom: &HrisGeometry,
    sources: &[NearFieldSource],
    signals: &DMatrix<C64>,
    channel: &ChannelSpec,
    noise_rng: &mut R,
) -> Result<HrisSnapshotBlock> {
    if sources.is_empty() {
        return Err(Error::InvalidParameter("at least one source is required".into()));
    }
    if signals.nrows() != sources.len() {
        return Err(Error::InvalidParameter("signal rows must match the source count".into()));
    }
    let m = geom.element_count();
    let mut steering = DMatrix::zeros(m, sources.len());
    for (k, src) in sources.iter().enumerate() {
        steering.set_column(k, &nf_steering_vector(geom, &src.location, PathModel::Exact));
    }
    let mut samples = steering * signals * C64::new(channel.delta.sqrt(), 0.0);
    if channel.noise_variance > 0.0 {
        for v in samples.iter_mut() {
            *v += complex_normal(noise_rng, channel.noise_variance);
        }
    }
    HrisSnapshotBlock::new(*geom, samples)
}

/// HRIS observations for `slots` samples of the given source model.
pub fn synthesize_hris_rx(
    geom: &HrisGeometry,
    sources: &[NearFieldSource],
    model: &SourceSignalModel,
    channel: &ChannelSpec,
    slots: usize,
) -> Result<HrisSnapshotBlock> {
    if slots == 0 {
        return Err(Error::InvalidParameter("slot count must be at least 1".into()));
    }
    for s in sources {
        geom.warn_if_outside_near_field(&s.location);
    }
    let powers: Vec<f64> = sources.iter().map(|s| s.power).collect();
    let signals = model.generate(&powers, slots);
    let mut rng = seeded_stream(model.seed, NOISE_STREAM);
    synthesize_hris_rx_with(geom, sources, &signals, channel, &mut rng)
}

/// Rank-one surface-to-BS channel `γ b_axis(φ_B, θ_B) b_R^H(π − φ_B, π − θ_B)`.
pub fn bs_channel(bs: &BsGeometry, geom: &HrisGeometry, bearing: &SphericalBearing, gamma: C64, axis: Axis) -> DMatrix<C64> {
    let b = bs_steering(bs, bearing, axis) * gamma;
    let br = hris_ff_steering(geom, bearing);
    b * br.adjoint()
}

/// Noise-free reflected signal `√(1−δ) H diag(w_t) ȳ(t)` for every slot.
pub fn reflected_signal(
    channel_matrix: &DMatrix<C64>,
    schedule: &PhaseSchedule,
    hris: &DMatrix<C64>,
    delta: f64,
) -> DMatrix<C64> {
    let weighted = schedule.weights.component_mul(hris);
    channel_matrix * weighted * C64::new((1.0 - delta).sqrt(), 0.0)
}

/// BS observations for both arms.
pub fn synthesize_bs_rx(
    bs: &BsGeometry,
    geom: &HrisGeometry,
    bearing: &SphericalBearing,
    channel: &ChannelSpec,
    schedules: &ArmSchedules,
    hris_block: &HrisSnapshotBlock,
    noise_seed: u64,
) -> Result<BsSnapshotBlock> {
    let slots = hris_block.slots();
    for axis in [Axis::X, Axis::Z] {
        let s = schedules.arm(axis);
        if s.slots() != slots {
            return Err(Error::SlotMismatch { expected: slots, actual: s.slots() });
        }
        if s.elements() != geom.element_count() {
            return Err(Error::InvalidParameter("schedule length must match the element count".into()));
        }
    }
    let mut rng = seeded_stream(noise_seed, NOISE_STREAM);
    let mut arm = |axis: Axis| {
        let h = bs_channel(bs, geom, bearing, channel.gamma(axis), axis);
        let mut y = reflected_signal(&h, schedules.arm(axis), &hris_block.samples, channel.delta);
        if channel.noise_variance > 0.0 {
            for v in y.iter_mut() {
                *v += complex_normal(&mut rng, channel.noise_variance);
            }
        }
        y
    };
    let x_arm = arm(Axis::X);
    let z_arm = arm(Axis::Z);
    Ok(BsSnapshotBlock { x_arm, z_arm })
}
