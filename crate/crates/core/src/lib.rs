//! Uplink DS-CDMA simulation and receiver library.
//!
//! The crate covers the whole chain of a synchronous multipath QPSK
//! DS-CDMA uplink:
//!
//! * [`signal`] generates spreading codes, sparse multipath channels,
//!   log-normal user powers and the chip-rate received vector.
//! * [`ic`] regenerates interfering users and cancels them, either with
//!   scalar amplitude estimates (conventional SIC/PIC) or with a per-user
//!   IC parameter vector.
//! * [`adaptive`] holds the stochastic-gradient estimators for the receive
//!   filter, the IC parameter vector and the channel, and the per-packet
//!   receiver pipelines built on them.
//! * [`mmse`] solves the same three estimation problems in batch form from
//!   sample statistics and is used as a reference for the adaptive code.
//! * [`sim`] runs seeded Monte Carlo experiments and writes CSV results.

pub mod adaptive;
pub mod error;
pub mod ic;
pub mod mmse;
pub mod seed;
pub mod signal;
pub mod sim;

pub use error::{Error, Result};

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;

/// Complex column vector.
pub type CVector = DVector<Complex64>;
/// Complex dense matrix.
pub type CMatrix = DMatrix<Complex64>;
