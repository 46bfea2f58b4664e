//! Beamforming-feedback (BFI) based Wi-Fi sensing toolkit.
//!
//! The crate covers the full chain from a multipath channel model to
//! sensing-capability analysis:
//!
//! * [`channel`]: per-subcarrier CSI matrices from array geometry and a path
//!   list, plus geometric scenarios that map a user position to paths.
//! * [`bfi`]: the CSI → steering matrix → Givens-angle compression used by
//!   802.11 explicit beamforming, its inverse, the angle quantizer and the
//!   closed form for 2×2 links.
//! * [`crb`]: Gaussian-kernel approximation of the BFI likelihood and the
//!   resulting Cramér–Rao bounds and per-element information scores.
//! * [`select`]: greedy CRB-driven BFI feature selection and an exhaustive
//!   reference.
//! * [`eval`]: validation harness (KS Gaussianity test, MUSIC Monte Carlo,
//!   dataset generation, MLP positioning).

// `!(a > b)` style guards are used on purpose so NaN falls into the error path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bfi;
pub mod channel;
pub mod crb;
pub mod error;
pub mod eval;
pub mod numerics;
pub mod select;

pub use bfi::{Bfi, BfiElementLabel, ElementKind, QuantizedBfi};
pub use channel::{ArrayGeometry, NoiseSpec, Path, Scenario, SubcarrierGrid};
pub use crb::{CrbConfig, GaussianModel, PositionParams};
pub use error::{Error, Result};
pub use numerics::{ComplexMatrix, RealMatrix};
pub use select::{RoiGrid, SelectionMode, SelectionResult};

/// Crate version.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
