//! Sharp constants `C_{p,d}` in `||Y||_p <= C_{p,d} ||X||_p` for nonnegative
//! submartingales, conformal martingales and stopped Bessel processes.
//!
//! * [`specfun`] builds the bounded series solution `g_{p,d}` of the governing ODE.
//! * [`constants`] locates its first root `z0` and derives `C_{p,d}`, `c`, `s1`, `z1`.
//! * [`burkfun`] assembles the special functions `W`, `U`, `V` and certifies
//!   their differential inequalities on grids.
//! * [`verify`] bundles all checks for one parameter pair.
//! * [`sde`] simulates coupled Bessel processes to check the martingale
//!   property and the sharpness of the constant, plus a Hardy-space demo.

pub mod burkfun;
pub mod constants;
pub mod error;
pub mod report;
pub mod sde;
pub mod specfun;
pub mod verify;

pub use error::{Error, Result};
