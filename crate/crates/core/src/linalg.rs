//! Small dense linear algebra used by the trajectory QP.
//!
//! Sizes here are a few hundred unknowns at most, so everything is dense and
//! row-major. The KKT matrix is symmetric indefinite, which is why the main
//! factorization is Bunch-Kaufman rather than Cholesky.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer has wrong length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `xᵀ A x` for a square matrix.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        assert_eq!(self.rows, self.cols);
        dot(x, &self.mul_vec(x))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Keep only the listed rows, in the given order.
    pub fn select_rows(&self, keep: &[usize]) -> Self {
        let mut out = Self::zeros(keep.len(), self.cols);
        for (dst, &src) in keep.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.row(src));
        }
        out
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Symmetric Ruiz scaling: returns `s` such that `diag(s) A diag(s)` has rows
/// of roughly unit infinity norm. `a` is scaled in place.
pub fn equilibrate_symmetric(a: &mut DenseMatrix, passes: usize) -> Vec<f64> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut s = vec![1.0; n];
    let mut r = vec![1.0; n];
    for _ in 0..passes {
        let mut spread: f64 = 0.0;
        for i in 0..n {
            let m = norm_inf(a.row(i));
            r[i] = if m > 0.0 { 1.0 / libm::sqrt(m) } else { 1.0 };
            spread = spread.max((1.0 - m).abs());
        }
        if spread < 1e-2 {
            break;
        }
        for i in 0..n {
            let ri = r[i];
            let row = a.row_mut(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v *= ri * r[j];
            }
            s[i] *= ri;
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Pivot {
    One(f64),
    Two { d11: f64, d21: f64, d22: f64 },
}

/// Pivot magnitudes collapsed relative to the largest one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPivot {
    pub step: usize,
    pub ratio: f64,
}

/// `P A Pᵀ = L D Lᵀ` with 1x1 and 2x2 diagonal blocks (Bunch-Kaufman pivoting).
#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    /// Unit lower factor in the strict lower triangle (row-major, n x n).
    l: Vec<f64>,
    /// First nonzero column of each row of `l`.
    lo: Vec<usize>,
    pivots: Vec<(usize, Pivot)>,
    perm: Vec<usize>,
    pivot_min: f64,
    pivot_max: f64,
}

const BK_ALPHA: f64 = 0.640_388_203_202_208_4; // (1 + sqrt(17)) / 8

impl LdlFactor {
    /// Factor a symmetric matrix. Only the lower triangle is read.
    ///
    /// Fails when a pivot drops below `rel_tol` times the largest entry of `a`.
    pub fn factor(a: &DenseMatrix, rel_tol: f64) -> Result<Self, SingularPivot> {
        Self::factor_owned(a.clone(), rel_tol)
    }

    /// Same as [`LdlFactor::factor`], reusing the matrix storage.
    pub fn factor_owned(a: DenseMatrix, rel_tol: f64) -> Result<Self, SingularPivot> {
        let n = a.rows();
        assert_eq!(n, a.cols(), "LDLᵀ needs a square matrix");
        let mut reach: Vec<usize> = (0..n).collect();
        let mut scale: f64 = 0.0;
        for i in 0..n {
            for (j, &v) in a.row(i)[..=i].iter().enumerate() {
                if v != 0.0 {
                    reach[j] = reach[j].max(i);
                    scale = scale.max(v.abs());
                }
            }
        }
        Self::factor_with_reach(n, a.data, reach, scale, rel_tol)
    }

    /// Factor from the lower-triangle entries `(i, j, v)`, `i ≥ j`, of a
    /// symmetric `n x n` matrix.
    pub fn factor_entries(n: usize, entries: &[(usize, usize, f64)], rel_tol: f64) -> Result<Self, SingularPivot> {
        let mut w = vec![0.0; n * n];
        let mut reach: Vec<usize> = (0..n).collect();
        let mut scale: f64 = 0.0;
        for &(i, j, v) in entries {
            debug_assert!(i >= j, "entry ({i}, {j}) above the diagonal");
            w[i * n + j] = v;
            if v != 0.0 {
                reach[j] = reach[j].max(i);
                scale = scale.max(v.abs());
            }
        }
        Self::factor_with_reach(n, w, reach, scale, rel_tol)
    }

    /// `reach[j]` bounds the last nonzero row of column `j` and is kept an
    /// upper bound through fill and interchanges, so every scan stays inside
    /// the envelope.
    fn factor_with_reach(
        n: usize,
        mut w: Vec<f64>,
        mut reach: Vec<usize>,
        scale: f64,
        rel_tol: f64,
    ) -> Result<Self, SingularPivot> {
        let scale = scale.max(f64::MIN_POSITIVE);
        let at = |w: &Vec<f64>, i: usize, j: usize| w[i * n + j];
        let tiny = rel_tol * scale;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut pivots = Vec::with_capacity(n);
        let mut pivot_min = f64::INFINITY;
        let mut pivot_max: f64 = 0.0;
        let mut col_k = vec![0.0; n];
        let mut col_k1 = vec![0.0; n];
        // first nonzero column of each row of L
        let mut first: Vec<usize> = (0..n).collect();

        let mut k = 0;
        while k < n {
            let absakk = at(&w, k, k).abs();
            let (mut imax, mut colmax) = (k, 0.0);
            for i in k + 1..=reach[k] {
                let v = at(&w, i, k).abs();
                if v > colmax {
                    colmax = v;
                    imax = i;
                }
            }
            if absakk.max(colmax) <= tiny {
                return Err(SingularPivot { step: k, ratio: absakk.max(colmax) / scale });
            }
            let (kp, kstep) = if absakk >= BK_ALPHA * colmax {
                (k, 1)
            } else {
                let mut rowmax: f64 = 0.0;
                for j in k..imax {
                    rowmax = rowmax.max(at(&w, imax, j).abs());
                }
                for j in imax + 1..=reach[imax] {
                    rowmax = rowmax.max(at(&w, j, imax).abs());
                }
                if absakk >= BK_ALPHA * colmax * (colmax / rowmax) {
                    (k, 1)
                } else if at(&w, imax, imax).abs() >= BK_ALPHA * rowmax {
                    (imax, 1)
                } else {
                    (imax, 2)
                }
            };

            let kk = k + kstep - 1;
            if kp != kk {
                let r = reach[kk].max(reach[kp]);
                for i in kp + 1..=r {
                    w.swap(i * n + kk, i * n + kp);
                }
                for j in kk + 1..kp {
                    w.swap(j * n + kk, kp * n + j);
                    reach[j] = reach[j].max(kp);
                }
                w.swap(kk * n + kk, kp * n + kp);
                reach[kk] = r.max(kp);
                reach[kp] = r;
                // Row interchange in the columns left of kk (L so far, plus
                // column k of a 2x2 block).
                for j in first[kk].min(first[kp]).min(k)..kk {
                    w.swap(kk * n + j, kp * n + j);
                }
                first.swap(kk, kp);
                perm.swap(kk, kp);
            }

            if kstep == 1 {
                let d = at(&w, k, k);
                if d.abs() <= tiny {
                    return Err(SingularPivot { step: k, ratio: d.abs() / scale });
                }
                pivot_min = pivot_min.min(d.abs());
                pivot_max = pivot_max.max(d.abs());
                let (mut lo, mut hi) = (n, k);
                for i in k + 1..=reach[k] {
                    col_k[i] = at(&w, i, k);
                    if col_k[i] != 0.0 {
                        lo = lo.min(i);
                        hi = i;
                    }
                }
                // only rows and columns inside the nonzero span of column k change
                for i in lo..=hi {
                    let li = col_k[i] / d;
                    if li != 0.0 {
                        let row = &mut w[i * n + lo..i * n + i + 1];
                        for (v, c) in row.iter_mut().zip(&col_k[lo..=i]) {
                            *v -= li * c;
                        }
                        first[i] = first[i].min(k);
                    }
                    w[i * n + k] = li;
                    reach[i] = reach[i].max(hi);
                }
                pivots.push((k, Pivot::One(d)));
            } else {
                let d11 = at(&w, k, k);
                let d21 = at(&w, k + 1, k);
                let d22 = at(&w, k + 1, k + 1);
                let det = d11 * d22 - d21 * d21;
                let big = d11.abs().max(d21.abs()).max(d22.abs());
                let small = det.abs() / big;
                if small <= tiny {
                    return Err(SingularPivot { step: k, ratio: small / scale });
                }
                pivot_min = pivot_min.min(small);
                pivot_max = pivot_max.max(big);
                let (mut lo, mut hi) = (n, k + 1);
                for i in k + 2..=reach[k].max(reach[k + 1]) {
                    col_k[i] = at(&w, i, k);
                    col_k1[i] = at(&w, i, k + 1);
                    if col_k[i] != 0.0 || col_k1[i] != 0.0 {
                        lo = lo.min(i);
                        hi = i;
                    }
                }
                for i in lo..=hi {
                    let (w1, w2) = (col_k[i], col_k1[i]);
                    let l1 = (w1 * d22 - w2 * d21) / det;
                    let l2 = (w2 * d11 - w1 * d21) / det;
                    if l1 != 0.0 || l2 != 0.0 {
                        let row = &mut w[i * n + lo..i * n + i + 1];
                        for ((v, c1), c2) in row.iter_mut().zip(&col_k[lo..=i]).zip(&col_k1[lo..=i]) {
                            *v -= l1 * c1 + l2 * c2;
                        }
                        first[i] = first[i].min(k);
                    }
                    w[i * n + k] = l1;
                    w[i * n + k + 1] = l2;
                    reach[i] = reach[i].max(hi);
                }
                w[(k + 1) * n + k] = 0.0;
                pivots.push((k, Pivot::Two { d11, d21, d22 }));
            }
            k += kstep;
        }

        let lo = first.iter().enumerate().map(|(i, &f)| f.min(i)).collect();
        Ok(Self { n, l: w, lo, pivots, perm, pivot_min, pivot_max })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Ratio of the largest to the smallest pivot magnitude; a cheap
    /// conditioning indicator.
    pub fn pivot_ratio(&self) -> f64 {
        if self.pivot_min > 0.0 {
            self.pivot_max / self.pivot_min
        } else {
            f64::INFINITY
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // L y' = y
        for i in 0..n {
            let lo = self.lo[i];
            let row = &self.l[i * n + lo..i * n + i];
            let mut s = y[i];
            for (lij, yj) in row.iter().zip(&y[lo..i]) {
                s -= lij * yj;
            }
            y[i] = s;
        }
        for &(k, p) in &self.pivots {
            match p {
                Pivot::One(d) => y[k] /= d,
                Pivot::Two { d11, d21, d22 } => {
                    let det = d11 * d22 - d21 * d21;
                    let (a, b) = (y[k], y[k + 1]);
                    y[k] = (d22 * a - d21 * b) / det;
                    y[k + 1] = (d11 * b - d21 * a) / det;
                }
            }
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let yi = y[i];
            if yi != 0.0 {
                let lo = self.lo[i];
                let row = &self.l[i * n + lo..i * n + i];
                for (yj, lij) in y[lo..i].iter_mut().zip(row) {
                    *yj -= lij * yi;
                }
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }
}

/// Least-squares solution of `A x ≈ b` via Householder QR with column
/// pivoting. Columns whose pivot falls below `rel_tol·|R₀₀|` are dropped
/// (their unknowns set to zero). Returns the solution and the numerical rank.
pub fn lstsq_pivoted(a: &DenseMatrix, b: &[f64], rel_tol: f64) -> (Vec<f64>, usize) {
    let (m, n) = (a.rows(), a.cols());
    assert_eq!(b.len(), m);
    let mut r = a.clone();
    let mut rhs = b.to_vec();
    let mut cols: Vec<usize> = (0..n).collect();
    let mut norms: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| r[(i, j)] * r[(i, j)]).sum())
        .collect();
    let steps = m.min(n);
    let mut rank = 0;
    let mut r00: f64 = 0.0;
    for k in 0..steps {
        let (mut best, mut best_norm) = (k, -1.0);
        for (j, &nj) in norms.iter().enumerate().skip(k) {
            if nj > best_norm {
                best_norm = nj;
                best = j;
            }
        }
        if best != k {
            for i in 0..m {
                let tmp = r[(i, k)];
                r[(i, k)] = r[(i, best)];
                r[(i, best)] = tmp;
            }
            norms.swap(k, best);
            cols.swap(k, best);
        }
        let alpha: f64 = libm::sqrt((k..m).map(|i| r[(i, k)] * r[(i, k)]).sum::<f64>());
        if k == 0 {
            r00 = alpha;
        }
        if alpha <= rel_tol * r00 || alpha == 0.0 {
            break;
        }
        let sign = if r[(k, k)] >= 0.0 { 1.0 } else { -1.0 };
        let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] += sign * alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in k..n {
                let s: f64 = v.iter().enumerate().map(|(t, vi)| vi * r[(k + t, j)]).sum();
                let f = 2.0 * s / vnorm2;
                for (t, vi) in v.iter().enumerate() {
                    r[(k + t, j)] -= f * vi;
                }
            }
            let s: f64 = v.iter().enumerate().map(|(t, vi)| vi * rhs[k + t]).sum();
            let f = 2.0 * s / vnorm2;
            for (t, vi) in v.iter().enumerate() {
                rhs[k + t] -= f * vi;
            }
        }
        for (j, nj) in norms.iter_mut().enumerate().skip(k + 1) {
            *nj -= r[(k, j)] * r[(k, j)];
            if *nj < 0.0 {
                *nj = (k + 1..m).map(|i| r[(i, j)] * r[(i, j)]).sum();
            }
        }
        rank = k + 1;
    }
    let mut z = vec![0.0; n];
    for k in (0..rank).rev() {
        let mut s = rhs[k];
        for j in k + 1..rank {
            s -= r[(k, j)] * z[j];
        }
        z[k] = s / r[(k, k)];
    }
    let mut x = vec![0.0; n];
    for (k, &c) in cols.iter().enumerate() {
        x[c] = z[k];
    }
    (x, rank)
}

/// Indices of a maximal linearly independent subset of the rows of `a`,
/// scanned in order. A row is dropped when its component orthogonal to the
/// rows kept so far is below `rel_tol` times its own norm.
pub fn independent_rows(a: &DenseMatrix, rel_tol: f64) -> Vec<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keep = Vec::new();
    for i in 0..a.rows() {
        let row = a.row(i);
        let norm0 = libm::sqrt(dot(row, row));
        if norm0 == 0.0 {
            continue;
        }
        let mut v: Vec<f64> = row.iter().map(|x| x / norm0).collect();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&v, q);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let rn = libm::sqrt(dot(&v, &v));
        if rn > rel_tol {
            for vi in &mut v {
                *vi /= rn;
            }
            basis.push(v);
            keep.push(i);
        }
    }
    keep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kkt_like() -> DenseMatrix {
        // [[Q, Aᵀ], [A, 0]] with Q singular on its own
        DenseMatrix::from_row_major(
            4,
            4,
            vec![
                2.0, 0.0, 1.0, 1.0, //
                0.0, 0.0, 1.0, -1.0, //
                1.0, 1.0, 0.0, 0.0, //
                1.0, -1.0, 0.0, 0.0,
            ],
        )
    }

    #[test]
    fn ldl_solves_indefinite_system() {
        let a = kkt_like();
        let f = LdlFactor::factor(&a, 1e-14).unwrap();
        let b = [1.0, 2.0, 3.0, 4.0];
        let x = f.solve(&b);
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn ldl_uses_two_by_two_pivots_on_zero_diagonal() {
        let a = DenseMatrix::from_row_major(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        let f = LdlFactor::factor(&a, 1e-14).unwrap();
        assert_eq!(f.solve(&[3.0, 5.0]), vec![5.0, 3.0]);
    }

    #[test]
    fn ldl_reports_singular() {
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 1.0, 1.0, 1.0]);
        assert!(LdlFactor::factor(&a, 1e-12).is_err());
    }

    #[test]
    fn lstsq_handles_rank_deficiency() {
        let a = DenseMatrix::from_row_major(3, 2, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let (x, rank) = lstsq_pivoted(&a, &[1.0, 2.0, 3.0], 1e-12);
        assert_eq!(rank, 1);
        let r = a.mul_vec(&x);
        assert!((r[0] - 1.0).abs() < 1e-12 && (r[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_rows_are_dropped() {
        let a = DenseMatrix::from_row_major(3, 2, vec![1.0, 0.0, 2.0, 0.0, 0.0, 1.0]);
        assert_eq!(independent_rows(&a, 1e-10), vec![0, 2]);
    }

    #[test]
    fn equilibration_is_symmetric() {
        let mut a = DenseMatrix::from_row_major(2, 2, vec![1e6, 1.0, 1.0, 0.0]);
        let s = equilibrate_symmetric(&mut a, 20);
        assert!((a[(0, 1)] - a[(1, 0)]).abs() < 1e-15);
        assert!((a[(0, 0)] - 1e6 * s[0] * s[0]).abs() < 1e-9);
    }
}
