//! Slotted random-access simulation for massive IoT cells.
//!
//! The crate models a hybrid access scheme that resolves preamble collisions
//! by timing-advance annulus, shares msg3 resource blocks through
//! power-domain NOMA with successive interference cancellation, and sizes
//! its multi-user detection from an LSTM forecast of the active load. The
//! conventional 4-step contention procedure is implemented alongside as the
//! baseline.
//!
//! Modules, bottom-up:
//!
//! - [`geometry`]: TA annuli and their subcarriers.
//! - [`signal`]: Zadoff-Chu preambles, PRACH synthesis, correlation detection.
//! - [`noma`]: receive-power ladder and SIC decoding.
//! - [`traffic`]: seeded device populations and arrival processes.
//! - [`protocol`]: per-slot engines for both schemes.
//! - [`predictor`]: the two-layer LSTM + attention load forecaster.
//! - [`harness`]: experiment configs, figure sweeps, CSV/SVG output and the CLI.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod noma;
pub mod predictor;
pub mod protocol;
pub mod signal;
pub mod traffic;

pub use error::{Error, Result};
