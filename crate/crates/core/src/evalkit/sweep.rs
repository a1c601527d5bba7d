use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::report::{evaluate_methods, Allocator, PreparedCase};
use crate::dataprep::LabeledSample;
use crate::error::{Error, Result};
use crate::trajopt::BoundaryConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepPoint {
    pub fraction: f64,
    pub curves: usize,
    pub samples: usize,
    pub mean_e_t: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepReport {
    pub seed: u64,
    pub points: Vec<SweepPoint>,
}

/// Indices of the samples whose curve falls in a seeded `fraction` of the
/// curve ids. Smaller fractions pick a prefix of the same shuffled order, so
/// subsets are nested, and `1.0` keeps every sample in order.
pub fn subset_by_curve(samples: &[LabeledSample], fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!("data fraction {fraction} outside (0, 1]")));
    }
    let ids: BTreeSet<&str> = samples.iter().map(|s| s.curve_id.as_str()).collect();
    let mut ids: Vec<&str> = ids.into_iter().collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let keep = (libm::ceil(fraction * ids.len() as f64) as usize).clamp(1, ids.len().max(1));
    let keep: BTreeSet<&str> = ids[..keep.min(ids.len())].iter().copied().collect();
    Ok((0..samples.len()).filter(|&i| keep.contains(samples[i].curve_id.as_str())).collect())
}

/// Trains one model per data fraction with `train` and scores its mean `E_T`
/// on `test`. Returns the report and the trained models in fraction order.
pub fn sample_efficiency_sweep<A, F>(
    samples: &[LabeledSample],
    fractions: &[f64],
    seed: u64,
    test: &[PreparedCase],
    bc: &BoundaryConfig,
    mut train: F,
) -> Result<(SweepReport, Vec<A>)>
where
    A: Allocator,
    F: FnMut(&[LabeledSample]) -> Result<A>,
{
    if fractions.len() < 3 || fractions.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidConfig(format!("need at least 3 ascending fractions, got {fractions:?}")));
    }
    let mut points = Vec::with_capacity(fractions.len());
    let mut models = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let idx = subset_by_curve(samples, fraction, seed)?;
        let subset: Vec<LabeledSample> = idx.iter().map(|&i| samples[i].clone()).collect();
        let curves = subset.iter().map(|s| s.curve_id.as_str()).collect::<BTreeSet<_>>().len();
        let model = train(&subset)?;
        let report = evaluate_methods(test, Some(&model), None, bc)?;
        let mean_e_t = report.transformer.map(|s| s.mean).ok_or(Error::Empty("no transformer results".into()))?;
        log::info!("fraction {fraction}: {} samples, mean E_T {mean_e_t:.3}", subset.len());
        points.push(SweepPoint { fraction, curves, samples: subset.len(), mean_e_t });
        models.push(model);
    }
    Ok((SweepReport { seed, points }, models))
}
