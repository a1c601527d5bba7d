//! Evaluation: normalized costs, relative errors against the descent
//! baseline, histograms, data-fraction sweeps, out-of-distribution runs and
//! attention statistics.

mod attention;
mod histogram;
mod metrics;
mod report;
mod sweep;

pub use attention::{attention_summary, band_mass, head_average, uniform_band_mass, AttentionSummary, BandMass};
pub use histogram::{error_histograms, Histogram};
pub use metrics::{normalized_cost, relative_error, MethodStats};
pub use report::{
    evaluate_case, evaluate_methods, ood_eval, prepare_case, Allocator, CostReport, EvalCase, Method, MethodResult,
    OodReport, PreparedCase, SampleRecord,
};
pub use sweep::{sample_efficiency_sweep, subset_by_curve, SweepPoint, SweepReport};
