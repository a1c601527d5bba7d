//! Curves to model inputs: range-angle encoding, collocation, synthetic
//! curve families and labeled datasets.

mod collocate;
mod label;
mod range_angle;
mod synth;

pub use collocate::{arc_length, collocate};
pub use label::{build_dataset, label_curve, label_path, split_by_curve, DatasetBuild, LabelConfig, LabeledSample};
pub use range_angle::{to_range_angle, RangeAngleSequence};
pub use synth::{synth_curves, RawCurve, SynthConfig};
