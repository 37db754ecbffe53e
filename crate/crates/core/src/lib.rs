//! Exact Gaussian-state dynamics of quantum Brownian motion — a damped
//! harmonic oscillator coupled through its position to an Ohmic bath with a
//! Lorentz–Drude cutoff — together with the Bures-metric measure of
//! information backflow that quantifies non-Markovianity.
//!
//! The dynamics is solved in closed form: the quantum Langevin equation is
//! inverted in the Laplace domain, the Green's functions follow from the
//! roots of a cubic, and the bath-noise contributions to the covariance
//! matrix are summed as a Matsubara series. No master-equation integration
//! is involved except in the [`mastereq`] module, which provides the
//! Born–Markov limit for comparison.
//!
//! Module map:
//! - [`model`] — physical parameters, Gaussian states, time grids
//! - [`spectral`] — spectral density, damping and noise kernels, resonance curve
//! - [`greens`] — cubic roots, residues, time-domain Green's functions
//! - [`propagation`] — exact moment evolution and the noise Matsubara series
//! - [`mastereq`] — Caldeira–Leggett master-equation limit
//! - [`metrics`] — Gaussian fidelity, Bures distance, trace-distance bounds
//! - [`nonmarkov`] — Bures trajectories, the backflow measure, parameter sweeps
//! - [`driving`] — external forces and the invariance of the measure
//! - [`cli`] — command-line front end (CSV/JSON outputs)
//! - [`quad`] — adaptive quadrature used by the reference oracles

use thiserror::Error;

pub mod cli;
pub mod driving;
mod expdiff;
pub mod greens;
pub mod mastereq;
pub mod metrics;
pub mod model;
pub mod nonmarkov;
pub mod propagation;
pub mod quad;
pub mod spectral;

pub use greens::GreensSolution;
pub use model::{Covariance, GaussianState, PhysParams, TimeGrid};
pub use nonmarkov::{Backend, BuresSeries, SweepResult};
pub use propagation::NoiseMatrix;
pub use spectral::NoiseConfig;

/// Crate-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("the Matsubara series requires kT > 0")]
    ZeroTemperature,

    #[error("Matsubara series did not converge within {n_cap} terms (last increment {last_increment:.3e} at t = {t})")]
    SeriesDiverged {
        n_cap: usize,
        last_increment: f64,
        t: f64,
    },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("Heisenberg bound violated at t = {t}: det sigma = {det:.9e} < 1/4 - {tol:.1e}")]
    HeisenbergViolation { det: f64, t: f64, tol: f64 },

    #[error("imaginary residual {imag:.3e} exceeds tolerance; roots or residues are corrupt")]
    ImaginaryResidual { imag: f64 },

    #[error("repeated roots persist after perturbation")]
    RepeatedRoots,

    #[error("master-equation limit requires gamma < omega0 (gamma = {gamma}, omega0 = {omega0})")]
    Overdamped { gamma: f64, omega0: f64 },

    #[error("undefined sample: {0}")]
    UndefinedSample(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
