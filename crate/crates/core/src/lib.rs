//! Stability of multiply charged atomic ions in super-intense, high-frequency
//! laser fields.
//!
//! The crate is organised bottom-up:
//!
//! - [`trajectory`]: closed-form quiver trajectories of a free electron.
//! - [`dressed`]: the period-averaged (Kramers–Henneberger) dressed Coulomb
//!   potential and the relativistic mass multiplier.
//! - [`box1d`]: the one-dimensional box potential under the same averaging.
//! - [`dscale`]: D→∞ energy functionals and their multistart minimisation.
//! - [`scf`]: a floating s-Gaussian UHF engine in three dimensions.
//! - [`sweep`]: α₀ sweeps, binding-energy curves and result persistence.
//!
//! Everything is in Hartree atomic units.

pub mod box1d;
pub mod dressed;
pub mod dscale;
pub mod error;
pub mod fmt;
pub mod optimize;
pub mod quadrature;
pub mod scf;
pub mod sweep;
pub mod trajectory;

pub use error::{Error, Result};

/// Fine-structure constant (CODATA 2018).
pub const FINE_STRUCTURE: f64 = 1.0 / 137.035_999;

/// 1 Hartree in electron volts.
pub const HARTREE_EV: f64 = 27.211_386;

pub type Vec3 = nalgebra::Vector3<f64>;
