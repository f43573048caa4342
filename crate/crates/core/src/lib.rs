//! Phase-adaptive parametric cooling of mechanical resonators.
//!
//! A resonator with natural frequency Ω has its spring constant modulated at
//! 2Ω with depth `b = Γ/Ω` and phase `φ`. Chosen correctly, the phase turns
//! the modulation into an extra damping channel at rate Γ. Re-measuring the
//! quadratures and re-optimising `φ` at regular intervals keeps the resonator
//! on the damped branch indefinitely.
//!
//! The crate is organised as:
//!
//! - [`model`]: shared value types, occupancy conventions, thermal sampling.
//! - [`classical`]: the perturbative Mathieu solution, optimal phase, turning time.
//! - [`quantum`]: noise spectra, susceptibilities and the final-occupancy limit.
//! - [`engine`]: transfer-matrix and rotation-splitting integrators, the RK4
//!   reference, seeded ensembles.
//! - [`feedback`]: single-shot and periodic phase re-optimisation.
//! - [`multimode`]: simultaneous cooling of several resonances with one actuator.
//! - [`analysis`]: envelope fits and late-time averages over trajectories.
//!
//! All quantities are dimensionless. Times are in units of 1/Ω of the
//! reference mode, quadratures in units of the zero-point amplitude.

pub mod analysis;
pub mod classical;
pub mod engine;
mod error;
pub mod feedback;
pub mod model;
pub mod multimode;
pub mod quadrature;
pub mod quantum;

pub use error::{Error, Result};
pub use model::{
    occupancy_of, sample_thermal_state, Convention, Drive, EnsembleStats, OscillatorParams,
    QuadratureState, RunMeta, Sample, TrajectoryRecord,
};
