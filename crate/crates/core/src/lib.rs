//! Simulation and analysis toolkit for single-molecule ESR-STM experiments on
//! a π-radical spin exchange-coupled to a Tb ion.
//!
//! The crate is organised bottom-up:
//!
//! * [`units`] and [`spectrum`]: constants, quantity newtypes, ΔI(f) traces.
//! * [`spinham`]: angular-momentum operators, the radical–Tb Hamiltonian and
//!   its ESR lines, plus the closed-form Zeeman line.
//! * [`spectrometer`]: synthesis of spin-polarized tunneling spectra.
//! * [`rfchain`]: RF-line transmission and the arcsine-rectification
//!   calibration that flattens the junction RF amplitude.
//! * [`fitkit`]: Levenberg–Marquardt and the model fits built on it.
//! * [`pipeline`]: multi-field Zeeman analysis, spatial scans and seeded
//!   end-to-end experiments.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fitkit;
pub mod linalg;
pub mod pipeline;
pub mod rfchain;
mod serde_nan;
pub mod spectrometer;
pub mod spectrum;
pub mod spinham;
pub mod units;

pub use error::{Error, Result};
pub use spectrum::{make_spectrum, FrequencyGrid, Spectrum, SpectrumMeta};
pub use units::{Current, Energy, Frequency, MagneticField, PowerDbm, Voltage};
