use alloc::vec;
use alloc::vec::Vec;

use super::Real;

/// Row-major matrix of activations or parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<R> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<R>,
}

impl<R: Real> Tensor<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![R::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<R>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor buffer has wrong length");
        Self { rows, cols, data }
    }

    pub fn from_f64(rows: usize, cols: usize, data: &[f64]) -> Self {
        Self::from_vec(rows, cols, data.iter().map(|&v| R::of(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[R] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> R {
        self.data[i * self.cols + j]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `c += a · b` with `a: n×k`, `b: k×m`, `c: n×m`.
pub(crate) fn matmul_acc<R: Real>(a: &[R], b: &[R], c: &mut [R], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let ci = &mut c[i * m..(i + 1) * m];
        for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aip == R::zero() {
                continue;
            }
            for (cij, &bpj) in ci.iter_mut().zip(&b[p * m..(p + 1) * m]) {
                *cij += aip * bpj;
            }
        }
    }
}

/// `c += a · bᵀ` with `a: n×k`, `b: m×k`, `c: n×m`.
pub(crate) fn matmul_bt_acc<R: Real>(a: &[R], b: &[R], c: &mut [R], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let ai = &a[i * k..(i + 1) * k];
        for j in 0..m {
            let bj = &b[j * k..(j + 1) * k];
            let mut s = R::zero();
            for (x, y) in ai.iter().zip(bj) {
                s += *x * *y;
            }
            c[i * m + j] += s;
        }
    }
}

/// `c += aᵀ · b` with `a: n×k`, `b: n×m`, `c: k×m`.
pub(crate) fn matmul_at_acc<R: Real>(a: &[R], b: &[R], c: &mut [R], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let bi = &b[i * m..(i + 1) * m];
        for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aip == R::zero() {
                continue;
            }
            for (cpj, &bij) in c[p * m..(p + 1) * m].iter_mut().zip(bi) {
                *cpj += aip * bij;
            }
        }
    }
}
