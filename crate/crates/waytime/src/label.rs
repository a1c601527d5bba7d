use std::ops::RangeInclusive;

use rayon::prelude::*;
use waytime_core::dataprep::{label_curve, DatasetBuild, LabelConfig, RawCurve};

use crate::error::{Error, Result};

/// Same output as [`waytime_core::dataprep::build_dataset`], labeled on a
/// pool of `threads` workers. Pairs are collected in (curve, count) order,
/// so the result does not depend on the worker count.
pub fn build_dataset_par(
    curves: &[RawCurve],
    counts: RangeInclusive<usize>,
    cfg: &LabelConfig,
    threads: usize,
) -> Result<DatasetBuild> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Format(format!("thread pool: {e}")))?;
    let pairs: Vec<(&RawCurve, usize)> = curves.iter().flat_map(|c| counts.clone().map(move |n| (c, n))).collect();
    let results: Vec<_> = pool.install(|| pairs.par_iter().map(|&(c, n)| label_curve(c, n, cfg)).collect());
    let mut build = DatasetBuild { samples: Vec::new(), rejected: Vec::new() };
    for ((c, n), r) in pairs.into_iter().zip(results) {
        match r {
            Ok(s) => build.samples.push(s),
            Err(e) => {
                log::warn!("curve {} at n={n} rejected: {e}", c.id);
                build.rejected.push((c.id.clone(), n, e));
            }
        }
    }
    Ok(build)
}
