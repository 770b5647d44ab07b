//! Compressed sparse rows and a banded LU with partial pivoting.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Square or rectangular matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_triplets(n, n, Vec::new())
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_triplets(n, n, values.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, &v)| (i, i, v)).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.data[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    /// `out += alpha * M x`
    pub fn mul_acc(&self, alpha: f64, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(out.len(), self.nrows);
        for (r, o) in out.iter_mut().enumerate() {
            let s: f64 = self.row(r).map(|(c, v)| v * x[c]).sum();
            *o += alpha * s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        self.mul_acc(1.0, x, &mut out);
        out
    }

    /// `xᵀ M x`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        (0..self.nrows).map(|r| x[r] * self.row(r).map(|(c, v)| v * x[c]).sum::<f64>()).sum()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    pub fn add(&self, other: &CsrMatrix) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Self::from_triplets(self.nrows, self.ncols, self.triplets().chain(other.triplets()).collect())
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(r, c, v)| (c, r, v)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols && self.triplets().all(|(r, c, v)| (v - self.get(c, r)).abs() <= tol * v.abs().max(1.0))
    }

    /// Largest `|row - col|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.triplets().map(|(r, c, _)| r.abs_diff(c)).max().unwrap_or(0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// Writes one `row col value` line per stored entry (0-based indices).
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {v:e}")?;
        }
        Ok(())
    }
}

/// Square banded matrix with room for the fill produced by row pivoting.
///
/// Row `r` stores columns `r - kl ..= r + kl + ku`.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    rows: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandedMatrix {
            n,
            kl,
            ku,
            width,
            rows: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        // c - (r - kl), computed without underflow
        r * self.width + (c + self.kl - r)
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(
            c + self.kl >= r && c <= r + self.ku,
            "entry ({r}, {c}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(r, c);
        self.rows[s] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.kl < r || c > r + self.ku || c >= self.n {
            return 0.0;
        }
        self.rows[self.slot(r, c)]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                let lo = r.saturating_sub(self.kl);
                let hi = (r + self.ku).min(self.n - 1);
                (lo..=hi).map(|c| self.rows[self.slot(r, c)] * x[c]).sum()
            })
            .collect()
    }

    /// `Mᵀ x`
    pub fn mul_vec_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (r, &xr) in x.iter().enumerate() {
            let lo = r.saturating_sub(self.kl);
            let hi = (r + self.ku).min(self.n - 1);
            for c in lo..=hi {
                out[c] += self.rows[self.slot(r, c)] * xr;
            }
        }
        out
    }

    /// Largest absolute row sum; with `transpose`, the largest column sum.
    pub fn norm_inf(&self, transpose: bool) -> f64 {
        let mut sums = vec![0.0; self.n];
        for r in 0..self.n {
            let lo = r.saturating_sub(self.kl);
            let hi = (r + self.ku).min(self.n - 1);
            for c in lo..=hi {
                sums[if transpose { c } else { r }] += self.rows[self.slot(r, c)].abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    fn max_abs(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Gaussian elimination with partial pivoting inside the band.
    pub fn factor(mut self) -> Result<BandedLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let scale = self.max_abs();
        let mut pivots = vec![0usize; n];
        let mut lower = vec![0.0; n * kl.max(1)];
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot: f64 = 0.0;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.rows[self.slot(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.rows[self.slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    let (a, b) = (self.slot(k, c), self.slot(p, c));
                    self.rows.swap(a, b);
                }
            }
            let pivot = self.rows[self.slot(k, k)];
            min_pivot = min_pivot.min(pivot.abs());
            max_pivot = max_pivot.max(pivot.abs());
            if pivot == 0.0 {
                return Err(Error::Singular { pivot_ratio: 0.0 });
            }
            let kstart = self.slot(k, k);
            for i in k + 1..=last_row {
                let si = self.slot(i, k);
                let m = self.rows[si] / pivot;
                lower[k * kl + (i - k - 1)] = m;
                if m == 0.0 {
                    continue;
                }
                self.rows[si] = 0.0;
                let len = last_col - k;
                // row k lies entirely before row i in storage
                let (head, tail) = self.rows.split_at_mut(si);
                let src = &head[kstart + 1..kstart + 1 + len];
                let dst = &mut tail[1..1 + len];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= m * s;
                }
            }
        }
        let pivot_ratio = if max_pivot > 0.0 { min_pivot / max_pivot } else { 0.0 };
        if min_pivot <= 64.0 * f64::EPSILON * scale {
            return Err(Error::Singular { pivot_ratio });
        }
        Ok(BandedLu {
            factors: self,
            lower,
            pivots,
            pivot_ratio,
        })
    }
}

/// LU factors of a [`BandedMatrix`]; supports `A x = b` and `Aᵀ x = b`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    factors: BandedMatrix,
    lower: Vec<f64>,
    pivots: Vec<usize>,
    pivot_ratio: f64,
}

impl BandedLu {
    pub fn dim(&self) -> usize {
        self.factors.n
    }

    /// `min |u_kk| / max |u_kk|`, a cheap conditioning indicator.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let f = &self.factors;
        let (n, kl, ku) = (f.n, f.kl, f.ku);
        assert_eq!(b.len(), n);
        for k in 0..n {
            b.swap(k, self.pivots[k]);
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    b[i] -= self.lower[k * kl + (i - k - 1)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let last = (k + kl + ku).min(n - 1);
            let row = &f.rows[f.slot(k, k)..=f.slot(k, last)];
            let s: f64 = row[1..].iter().zip(&b[k + 1..=last]).map(|(u, x)| u * x).sum();
            b[k] = (b[k] - s) / row[0];
        }
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose_in_place(&self, b: &mut [f64]) {
        let f = &self.factors;
        let (n, kl, ku) = (f.n, f.kl, f.ku);
        assert_eq!(b.len(), n);
        // Uᵀ y = b
        for k in 0..n {
            let last = (k + kl + ku).min(n - 1);
            b[k] /= f.rows[f.slot(k, k)];
            let bk = b[k];
            if bk != 0.0 {
                for c in k + 1..=last {
                    b[c] -= f.rows[f.slot(k, c)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let s: f64 = (k + 1..=(k + kl).min(n - 1)).map(|i| self.lower[k * kl + (i - k - 1)] * b[i]).sum();
            b[k] -= s;
            b.swap(k, self.pivots[k]);
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_transpose_in_place(&mut x);
        x
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_max(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, kl: usize, ku: usize, seed: u64) -> (BandedMatrix, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = BandedMatrix::zeros(n, kl, ku);
        let mut d = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in r.saturating_sub(kl)..=(r + ku).min(n - 1) {
                // small diagonal forces pivoting
                let v: f64 = if r == c { 0.01 * rng.gen::<f64>() } else { rng.gen_range(-1.0..1.0) };
                b.add(r, c, v);
                d[(r, c)] = v;
            }
        }
        (b, d)
    }

    #[test]
    fn csr_sums_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0)]);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![4.0, 2.0]);
        assert!(!m.is_symmetric(0.0));
    }

    #[test]
    fn coordinate_export() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, -1.0), (1, 0, -1.0)]);
        let mut buf = Vec::new();
        m.write_coordinate(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0 1 -1e0\n1 0 -1e0\n");
    }

    #[test]
    fn banded_solves_match_dense() {
        for (n, kl, ku, seed) in [(1, 0, 0, 1), (7, 2, 1, 2), (40, 3, 5, 3), (60, 9, 9, 4)] {
            let (b, d) = random_banded(n, kl, ku, seed);
            let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let lu = b.clone().factor().unwrap();
            let x = lu.solve(&rhs);
            let r = &d * nalgebra::DVector::from_vec(x.clone()) - nalgebra::DVector::from_vec(rhs.clone());
            assert!(r.norm() < 1e-10 * (1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max)), "n={n} res={}", r.norm());
            let xt = lu.solve_transpose(&rhs);
            let rt = d.transpose() * nalgebra::DVector::from_vec(xt) - nalgebra::DVector::from_vec(rhs);
            assert!(rt.norm() < 1e-9, "transpose n={n} res={}", rt.norm());
        }
    }

    #[test]
    fn singular_detected() {
        let mut b = BandedMatrix::zeros(3, 1, 1);
        b.add(0, 0, 1.0);
        b.add(0, 1, 1.0);
        b.add(1, 0, 1.0);
        b.add(1, 1, 1.0);
        b.add(2, 2, 1.0);
        assert!(matches!(b.factor(), Err(Error::Singular { .. })));
    }
}
