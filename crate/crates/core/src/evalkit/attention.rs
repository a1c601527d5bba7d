use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::seqmodel::{AttentionMap, AttentionRecord};

/// Mean over rows of the attention mass with `|i − j| ≤ k`.
pub fn band_mass(map: &AttentionMap, k: usize) -> f64 {
    if map.rows == 0 {
        return 0.0;
    }
    let total: f64 = (0..map.rows)
        .map(|i| {
            let (a, b) = (i.saturating_sub(k), (i + k + 1).min(map.cols));
            if a < b {
                map.row(i)[a..b].iter().sum()
            } else {
                0.0
            }
        })
        .sum();
    total / map.rows as f64
}

/// [`band_mass`] of a map whose rows are uniform.
pub fn uniform_band_mass(rows: usize, cols: usize, k: usize) -> f64 {
    let data = vec![1.0 / cols as f64; rows * cols];
    band_mass(&AttentionMap { rows, cols, data }, k)
}

/// Elementwise mean over heads.
pub fn head_average(heads: &[AttentionMap]) -> Option<AttentionMap> {
    AttentionMap::mean(heads)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BandMass {
    pub k: usize,
    pub observed: f64,
    /// Same statistic for uniform attention over the same map shapes.
    pub uniform: f64,
}

/// Cross-attention statistics over a set of records.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionSummary {
    pub records: usize,
    /// Head-averaged cross-attention per layer, further averaged over all
    /// records of the same `(decoder steps, encoder positions)` shape.
    pub averaged: BTreeMap<(usize, usize), Vec<AttentionMap>>,
    /// Band mass per layer, one entry per `k`.
    pub layers: Vec<Vec<BandMass>>,
    /// Band mass averaged over layers.
    pub overall: Vec<BandMass>,
    /// Largest deviation of any captured row sum from 1.
    pub max_row_error: f64,
}

pub fn attention_summary(records: &[AttentionRecord], ks: &[usize]) -> Result<AttentionSummary> {
    let first = records.first().ok_or(Error::Empty("no attention records".into()))?;
    let layers = first.cross.len();
    if layers == 0 || records.iter().any(|r| r.cross.len() != layers) {
        return Err(Error::Dimension("records differ in cross-attention layer count".into()));
    }
    let mut groups: BTreeMap<(usize, usize), Vec<Vec<AttentionMap>>> = BTreeMap::new();
    let mut sums = vec![vec![(0.0, 0.0); ks.len()]; layers];
    let mut max_row_error: f64 = 0.0;
    for r in records {
        max_row_error = max_row_error.max(r.row_sum_error().0);
        for (l, heads) in r.cross.iter().enumerate() {
            let avg = head_average(heads).ok_or(Error::Empty("layer with no heads".into()))?;
            for (s, &k) in sums[l].iter_mut().zip(ks) {
                s.0 += band_mass(&avg, k);
                s.1 += uniform_band_mass(avg.rows, avg.cols, k);
            }
            let slot = groups.entry((avg.rows, avg.cols)).or_insert_with(|| vec![Vec::new(); layers]);
            slot[l].push(avg);
        }
    }
    let n = records.len() as f64;
    let per_layer: Vec<Vec<BandMass>> = sums
        .iter()
        .map(|row| {
            row.iter().zip(ks).map(|(s, &k)| BandMass { k, observed: s.0 / n, uniform: s.1 / n }).collect()
        })
        .collect();
    let overall = ks
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let l = layers as f64;
            BandMass {
                k,
                observed: per_layer.iter().map(|r| r[j].observed).sum::<f64>() / l,
                uniform: per_layer.iter().map(|r| r[j].uniform).sum::<f64>() / l,
            }
        })
        .collect();
    let mut averaged = BTreeMap::new();
    for (shape, per) in groups {
        let maps: Vec<AttentionMap> = per.iter().filter_map(|m| AttentionMap::mean(m)).collect();
        for m in &maps {
            for i in 0..m.rows {
                max_row_error = max_row_error.max((m.row(i).iter().sum::<f64>() - 1.0).abs());
            }
        }
        averaged.insert(shape, maps);
    }
    Ok(AttentionSummary { records: records.len(), averaged, layers: per_layer, overall, max_row_error })
}
