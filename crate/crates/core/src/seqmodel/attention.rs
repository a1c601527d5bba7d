use alloc::vec;
use alloc::vec::Vec;

/// One attention map, rows = queries, columns = keys.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl AttentionMap {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Elementwise mean of same-shaped maps.
    pub fn mean(maps: &[AttentionMap]) -> Option<AttentionMap> {
        let first = maps.first()?;
        let mut data = vec![0.0; first.data.len()];
        for m in maps {
            assert_eq!((m.rows, m.cols), (first.rows, first.cols), "attention maps differ in shape");
            for (s, v) in data.iter_mut().zip(&m.data) {
                *s += v;
            }
        }
        let k = maps.len() as f64;
        data.iter_mut().for_each(|v| *v /= k);
        Some(AttentionMap { rows: first.rows, cols: first.cols, data })
    }
}

/// Attention weights captured at inference, indexed `[layer][head]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttentionRecord {
    pub encoder: Vec<Vec<AttentionMap>>,
    pub decoder_self: Vec<Vec<AttentionMap>>,
    /// Decoder-to-encoder maps: row = decoder step, column = encoder position.
    pub cross: Vec<Vec<AttentionMap>>,
}

impl AttentionRecord {
    pub fn maps(&self) -> impl Iterator<Item = &AttentionMap> {
        self.encoder.iter().chain(&self.decoder_self).chain(&self.cross).flatten()
    }

    /// Largest deviation of any row sum from 1, and the smallest entry.
    pub fn row_sum_error(&self) -> (f64, f64) {
        let mut err: f64 = 0.0;
        let mut min = f64::INFINITY;
        for m in self.maps() {
            for i in 0..m.rows {
                let r = m.row(i);
                err = err.max((r.iter().sum::<f64>() - 1.0).abs());
                min = r.iter().copied().fold(min, f64::min);
            }
        }
        (err, min)
    }
}
