//! On-disk formats: JSONL curves and datasets, CSV reports, SVG figures.

pub mod csvout;
mod jsonl;
pub mod svg;

pub use jsonl::{read_curves, read_dataset, read_jsonl, write_curves, write_dataset, write_jsonl, CurveRow, SampleRow};
