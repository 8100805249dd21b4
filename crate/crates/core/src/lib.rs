//! Multi-cell IRS-assisted link simulator.
//!
//! Every cell has one BTS with `M_R` antennas, `K` served users and one
//! intelligent reflecting surface (IRS). The crate implements distributed
//! optimization of the IRS phase shifts jointly with linear receive filters
//! directly from synchronized uplink training, next to channel-estimation
//! based baselines, and a harness that runs paired Monte-Carlo sweeps.
//!
//! Module map:
//!
//! * [`topology`]: channel realizations and composite channels.
//! * [`codebook`]: IRS training codebooks and canonical reconstruction.
//! * [`airlink`]: pilots and synchronized UL/DL training receptions.
//! * [`filters`]: LS/MMSE filters, projection statistics, LS channel estimates.
//! * [`objectives`]: true and sample-estimated SINR / sum-rate objectives.
//! * [`phaseopt`]: greedy + Armijo gradient ascent over unit-modulus weights.
//! * [`schemes`]: the seven compared schemes, Max-SINR and bi-directional training.
//! * [`harness`]: config files, sweeps, CSV output.

pub mod airlink;
pub mod codebook;
pub mod error;
pub mod filters;
pub mod harness;
pub mod linalg;
pub mod objectives;
pub mod phaseopt;
pub mod random;
pub mod schemes;
pub mod topology;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dynamically sized complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dynamically sized complex column vector.
pub type CVec = nalgebra::DVector<C64>;
