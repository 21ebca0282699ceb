//! Link-level building blocks for an AFDM (affine frequency division
//! multiplexing) transceiver over doubly dispersive channels.
//!
//! The crate is organised in pipeline order:
//!
//! - [`params`]: chirp rates, guard sizing, pilot layout, spectral
//!   efficiency accounting;
//! - [`constellation`]: bit/symbol maps and hard slicing;
//! - [`modem`]: the affine transforms, chirp-periodic prefix, frame
//!   assembly, PAPR measurement;
//! - [`channel`]: delay-Doppler path generation and application, and the
//!   effective channel matrix seen in the transform domain;
//! - [`estimation`]: pilot-aided path acquisition with iterative
//!   interference cancellation, plus the guarded classic estimator;
//! - [`detection`]: LMMSE equalization (dense contract and a banded fast
//!   path), error counting, channel NMSE;
//! - [`reference`]: slow direct-from-definition implementations used by
//!   self-tests and the test suites as independent oracles;
//! - [`linalg`]: the minimal dense complex-matrix support the above need.

pub mod channel;
pub mod constellation;
pub mod detection;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod modem;
pub mod params;
pub mod reference;

pub use channel::{
    generate_channel, loc_of, ChannelPath, ChannelRealization, DelayDopplerTap, PowerProfile,
};
pub use constellation::Constellation;
pub use error::{AfdmError, Result};
pub use estimation::{EstimatedPath, EstimationState, EstimatorOutput};
pub use linalg::Matrix;
pub use modem::{DaftFrame, TimeFrame};
pub use params::{Chirp, ModemParams, PilotConfig, PilotScheme};

/// Complex baseband sample type used throughout.
pub type Complex = num_complex::Complex64;
