//! Near-field target localization through a hybrid reconfigurable surface whose
//! own position is unknown.
//!
//! The crate is organised bottom-up:
//!
//! * [`array_model`] and [`signal_synthesis`] describe the arrays and generate data.
//! * [`virtual_coarray`] builds the single-snapshot virtual far-field data.
//! * [`sdp_engine`] is the ADMM solver used by every semidefinite program.
//! * [`danm_estimator`] and [`tls_refine`] estimate target angles and ranges.
//! * [`hris_locator`] recovers surface-to-BS bearings and triangulates the surface.
//! * [`phase_optimizer`] designs surface phases by semidefinite relaxation.
//! * [`bounds`] evaluates CRB and PEB benchmarks.
//! * [`bench`] runs Monte Carlo scenarios and writes CSV tables.

pub mod array_model;
pub mod bench;
pub mod bounds;
pub mod danm_estimator;
pub mod error;
pub mod hris_locator;
pub mod linalg;
pub mod phase_optimizer;
pub mod sdp_engine;
pub mod signal_synthesis;
pub mod tls_refine;
pub mod virtual_coarray;

pub use error::{Error, Result};

/// Complex sample type used throughout.
pub type C64 = num_complex::Complex64;
