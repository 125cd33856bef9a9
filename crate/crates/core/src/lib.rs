#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Simulation and processing for an OFDM radar that shares its waveform with
//! a communication link: waveform synthesis, acquisition geometry, echo
//! simulation, range compression, back-projection focusing and link
//! performance analysis.

pub mod analysis;
pub mod channel;
pub mod compression;
pub mod emulation;
pub mod error;
pub mod focusing;
pub mod geometry;
pub mod io;
pub mod rng;
pub mod scenario;
pub mod signal;
pub mod waveform;

pub use error::{Error, Result};
pub use signal::{ComplexSignal, FastTimeMatrix, SpectralSupport, SPEED_OF_LIGHT};
