//! Molecular communication via diffusion (MCvD) link model.
//!
//! A point transmitter releases messenger molecules that diffuse in 3-D and
//! are absorbed by a spherical receiver. This crate covers the whole link:
//!
//! - [`channel`]: closed-form first-passage statistics of the absorbing
//!   sphere and the slotted hitting probabilities `p_k`.
//! - [`particle`]: a Brownian-motion Monte Carlo simulator used as an
//!   independent oracle for [`channel`].
//! - [`isi`]: Gaussian statistics of the received molecule count under
//!   intersymbol interference, and candidate-history enumeration.
//! - [`threshold`]: MAP thresholds, the shrinking-grid search over the
//!   candidate tree and the power-law extrapolation of the threshold curve.
//! - [`modulation`]: BCSK, BMoSK and MTSK encoders plus power adjustment.
//! - [`detection`]: threshold, comparison, dual-threshold and decision
//!   feedback decoders, and empirical threshold search.
//!
//! Units are fixed throughout: micrometres, seconds and µm²/s.
//!
//! ```
//! use mcvd_core::channel::ChannelParams;
//!
//! let params = ChannelParams::new(5.0, 10.0, 79.4, 0.2).unwrap();
//! let profile = params.hitting_probabilities(2);
//! assert!((profile.p()[0] - 0.1875).abs() < 1e-4);
//! assert!((profile.p()[1] - 0.0777).abs() < 1e-4);
//! ```

// NaN-rejecting guards are written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod detection;
pub mod error;
pub mod isi;
pub mod modulation;
pub mod particle;
pub mod special;
pub mod sum;
pub mod threshold;

pub use channel::{ChannelParams, HittingProfile};
pub use error::{Error, Result};
pub use isi::{GaussianStats, NoiseParams, Prior};
pub use modulation::{Emission, EmissionFrame, Molecule, PaConfig};
pub use threshold::ThresholdSchedule;
