//! Numerical machinery for threshold saturation of extended spatially
//! coupled systems.
//!
//! The library is organised bottom-up:
//!
//! * [`system`]: the (φ, ψ) pair, diagonal reductions and derivatives.
//! * [`de`]: coupled and uncoupled density evolution, fixed points.
//! * [`potential`]: generalized potential, coordinate change, thresholds.
//! * [`continuum`]: integral and differential operators, PDE relaxation,
//!   the stationary boundary value problem.
//! * [`bicm`]: 16-QAM demapper and LDPC decoder EXIT functions, EXIT
//!   charts, rate loss and SNR thresholds for SC BICM-ID.
//! * [`interleaver`]: the spatially coupled interleaver.

pub mod error;
pub mod numeric;
pub mod system;
pub mod de;
pub mod potential;
pub mod continuum;
pub mod bicm;
pub mod interleaver;
pub mod config;

pub use error::{Error, Result};
