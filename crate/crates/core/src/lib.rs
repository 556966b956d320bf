//! Distributional transform expansion (DTE) for information reconciliation
//! in Gaussian-modulated continuous-variable QKD.
//!
//! The crate is organised bottom-up:
//!
//! - [`transform`]: the distributional transform, its quasi-inverse and the
//!   dyadic binary expansion that together form the DTE quantizer.
//! - [`channel`]: reduction of homodyne/heterodyne detection to an equivalent
//!   AWGN channel and seeded raw-key generation.
//! - [`estimators`]: transition probabilities, BSC capacities and the
//!   mutual information of the binary-input sub-channels (kNN estimator and a
//!   deterministic quadrature oracle).
//! - [`recon`]: maximum reconciliation efficiency and SNR sweeps.
//! - [`io`]: CSV / JSON / bit-matrix text formats.
//! - [`validate`]: the cross-module property suite behind `dte validate`.

pub mod channel;
pub mod error;
pub mod estimators;
pub mod io;
pub mod recon;
pub mod seed;
pub mod stats;
pub mod transform;
pub mod validate;

pub use error::{Error, Result};
