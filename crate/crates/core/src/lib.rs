//! Minimum-snap trajectory generation through 2D waypoints, with the
//! time-allocation level replaced by a learned sequence-to-sequence model.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, parallel labeling
//! and the command-line tool live in the `waytime` companion crate.
//!
//! * [`trajopt`]: the per-axis equality-constrained QP for a fixed allocation.
//! * [`timealloc`]: trapezoidal initialization, descent refinement on the
//!   simplex, total-time scaling.
//! * [`dataprep`]: range-angle encoding, curve collocation, synthetic curves
//!   and labeled samples.
//! * [`seqmodel`]: reverse-mode differentiation, the encoder-decoder model,
//!   the fixed-size MLP baseline and training.
//! * [`evalkit`]: cost normalization, relative errors, histograms, attention
//!   statistics and experiment drivers.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dataprep;
pub mod error;
pub mod evalkit;
pub mod linalg;
pub mod seqmodel;
pub mod timealloc;
pub mod trajopt;

pub use error::{Error, Result};
pub use trajopt::{BoundaryConfig, PiecewiseTrajectory, Point2, SnapCost, TimeAllocation, WaypointPath};
