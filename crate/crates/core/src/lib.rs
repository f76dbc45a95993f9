//! Pseudo-spectral solver for the parabolic-elliptic Patlak-Keller-Segel system
//! coupled to incompressible Navier-Stokes, perturbed around the non-parallel
//! shear flow `(Ay, 0, Ay)` on `T x [-Ly/2, Ly/2) x T`.
//!
//! The shear transport `y(dx + dz)` is removed by working in a shearing frame:
//! every field stores Fourier coefficients indexed by frame wavenumbers
//! `(k1, m, k3)` together with the accumulated frame shear `s`, and the lab
//! y-wavenumber of a mode is `m * 2pi/Ly - (k1 + k3) * s`. Periodic integer
//! relabelling ([`grid::Grid::relabel`]) keeps `|s|` bounded.
//!
//! The crate is `no_std` (it needs `alloc`); file formats, configuration and
//! the command-line driver live in the `pksns` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod dynamics;
pub mod elliptic;
mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod ic;
pub mod lemmas;
pub(crate) mod math;
pub mod run;

pub use error::{Error, Result};

/// Double precision complex number used for all spectral coefficients.
pub type C64 = num_complex::Complex<f64>;

pub use diagnostics::{DiagRecord, EnergyTracker, HypothesisMonitor, Verdict, XaAccumulator};
pub use dynamics::{Forcing, Params, Physics, StepReport, Stepper};
pub use run::{RunContext, RunSettings, Simulation};
pub use field::{FlowState, SpectralField, VectorField};
pub use grid::{make_grid, Axis, Grid, GridSpec, WaveIndex};
