use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::collocate::collocate;
use super::range_angle::{to_range_angle, RangeAngleSequence};
use super::synth::RawCurve;
use crate::error::{Error, Result};
use crate::timealloc::{refine_bgd, tvp_allocate, BgdConfig, TvpLimits};
use crate::trajopt::{BoundaryConfig, WaypointPath};

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct LabelConfig {
    pub tvp: TvpLimits,
    pub bgd: BgdConfig,
    pub bc: BoundaryConfig,
}

/// One curve at one waypoint count, with its BGD-optimal time fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub curve_id: String,
    pub n: usize,
    pub range_angle: RangeAngleSequence,
    pub fractions: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBuild {
    pub samples: Vec<LabeledSample>,
    /// `(curve id, n, reason)` for every pair that produced no sample.
    pub rejected: Vec<(String, usize, Error)>,
}

/// TVP start, BGD refinement; returns `(t*/T, converged)`.
pub fn label_path(path: &WaypointPath, cfg: &LabelConfig) -> Result<(Vec<f64>, bool)> {
    let init = tvp_allocate(path, &cfg.tvp)?;
    let out = refine_bgd(path, &init, &cfg.bgd, &cfg.bc)?;
    Ok((out.allocation.fractions(), out.converged))
}

pub fn label_curve(curve: &RawCurve, n: usize, cfg: &LabelConfig) -> Result<LabeledSample> {
    let path = collocate(&curve.points, n)?;
    let range_angle = to_range_angle(&path)?;
    let (fractions, converged) = label_path(&path, cfg)?;
    Ok(LabeledSample { curve_id: curve.id.clone(), n, range_angle, fractions, converged })
}

/// Every curve at every count in `counts`, ordered by curve then count.
pub fn build_dataset(curves: &[RawCurve], counts: RangeInclusive<usize>, cfg: &LabelConfig) -> DatasetBuild {
    let results = curves
        .iter()
        .flat_map(|c| counts.clone().map(move |n| (c, n)))
        .map(|(c, n)| (c, n, label_curve(c, n, cfg)));
    let mut build = DatasetBuild { samples: Vec::new(), rejected: Vec::new() };
    for (c, n, r) in results {
        match r {
            Ok(s) => build.samples.push(s),
            Err(e) => {
                log::warn!("curve {} at n={n} rejected: {e}", c.id);
                build.rejected.push((c.id.clone(), n, e));
            }
        }
    }
    build
}

/// Train/validation sample indices at 5:1 over curve ids, so every count of
/// one curve lands on the same side.
pub fn split_by_curve(samples: &[LabeledSample], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let ids: BTreeSet<&str> = samples.iter().map(|s| s.curve_id.as_str()).collect();
    let mut ids: Vec<&str> = ids.into_iter().collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let val: BTreeSet<&str> = ids.iter().skip(5).step_by(6).copied().collect();
    let (mut train, mut valid) = (Vec::new(), Vec::new());
    for (i, s) in samples.iter().enumerate() {
        if val.contains(s.curve_id.as_str()) {
            valid.push(i);
        } else {
            train.push(i);
        }
    }
    (train, valid)
}
