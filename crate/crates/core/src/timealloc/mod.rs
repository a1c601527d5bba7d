//! Time allocation: trapezoidal initialization, descent refinement with the
//! total time held fixed, and total-time scaling against speed and
//! acceleration limits.

mod bgd;
mod gradient;
mod scaling;
mod tvp;

pub use bgd::{project_to_simplex, refine_bgd, refine_bgd_with, BgdConfig, BgdOutcome, IterationRecord};
pub use gradient::{constrained_gradient, constrained_gradient_with, direction, GradientEstimate};
pub use scaling::{max_speed_accel, scale_total_time, FeasibilityLimits, ScaleOutcome, SAMPLES_PER_SEGMENT};
pub use tvp::{tvp_allocate, tvp_segment_time, TvpLimits};
