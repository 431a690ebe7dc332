//! Dense kernels: restricted least squares, Gram matrices and the extreme
//! eigenvalues of small symmetric matrices.
//!
//! Everything here is sized for desk-scale work (a few thousand columns at
//! most, restricted systems of a few dozen columns), so the routines favour
//! robustness over asymptotic speed: Householder QR with column pivoting for
//! least squares and cyclic Jacobi for eigenvalues.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::sqrt;

/// Relative pivot threshold below which a column of a restricted system is
/// treated as linearly dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Off-diagonal Frobenius mass, relative to the full Frobenius norm, at which
/// a Jacobi sweep is considered converged.
pub const JACOBI_TOLERANCE: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Tolerance used when validating symmetry of an input matrix.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Row-major dense matrix with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix entries",
                expected: rows * cols,
                found: data.len(),
            });
        }
        check_finite(&data, "matrix")?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        check_finite(values, "diagonal")?;
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        Ok(m)
    }

    /// Builds a matrix from a closure over `(row, col)`.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    what: "row length",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn column_norm_sq(&self, j: usize) -> f64 {
        (0..self.rows)
            .map(|i| self.get(i, j) * self.get(i, j))
            .sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[f64]) -> Result<DenseVector> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                what: "vector length for A x",
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok(DenseVector(
            (0..self.rows).map(|i| dot(self.row(i), x)).collect(),
        ))
    }

    /// `Aᵀ v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Result<DenseVector> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch {
                what: "vector length for Aᵀ v",
                expected: self.rows,
                found: v.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (i, vi) in v.iter().enumerate() {
            if *vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(DenseVector(out))
    }

    /// `A x` where `x` is only nonzero on `support`.
    pub fn mul_sparse(&self, support: &SupportSet, x: &[f64]) -> DenseVector {
        DenseVector(
            (0..self.rows)
                .map(|i| {
                    let row = self.row(i);
                    support.iter().map(|j| row[j] * x[j]).sum()
                })
                .collect(),
        )
    }

    /// Full Gram matrix `AᵀA` (cols × cols), symmetric by construction.
    pub fn gram(&self) -> Self {
        let d = self.cols;
        let mut g = Self::zeros(d, d);
        for i in 0..self.rows {
            let row = self.row(i);
            for p in 0..d {
                let rp = row[p];
                if rp == 0.0 {
                    continue;
                }
                for q in p..d {
                    g.data[p * d + q] += rp * row[q];
                }
            }
        }
        for p in 0..d {
            for q in 0..p {
                g.data[p * d + q] = g.data[q * d + p];
            }
        }
        g
    }

    /// Gram matrix of the column submatrix, `A_Sᵀ A_S`.
    pub fn restricted_gram(&self, support: &SupportSet) -> Self {
        let idx = support.as_slice();
        let k = idx.len();
        let mut g = Self::zeros(k, k);
        for i in 0..self.rows {
            let row = self.row(i);
            for (p, &jp) in idx.iter().enumerate() {
                let rp = row[jp];
                for (q, &jq) in idx.iter().enumerate().skip(p) {
                    g.data[p * k + q] += rp * row[jq];
                }
            }
        }
        for p in 0..k {
            for q in 0..p {
                g.data[p * k + q] = g.data[q * k + p];
            }
        }
        g
    }

    /// Principal submatrix on `indices` of a square matrix, written into `out`
    /// (row-major, `indices.len()²` entries).
    pub fn principal_into(&self, indices: &[usize], out: &mut Vec<f64>) {
        out.clear();
        for &i in indices {
            let row = self.row(i);
            out.extend(indices.iter().map(|&j| row[j]));
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }
}

/// Dense vector with finite entries.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite(&values, "vector")?;
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// The `i`-th standard basis vector of length `n`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = 1.0;
        v
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm2(&self) -> f64 {
        norm2(&self.0)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn norm_inf(&self) -> f64 {
        norm_inf(&self.0)
    }

    pub fn support(&self) -> SupportSet {
        SupportSet {
            indices: self
                .0
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, _)| i)
                .collect(),
        }
    }
}

impl From<Vec<f64>> for DenseVector {
    /// Unchecked conversion; use [`DenseVector::new`] for external data.
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for DenseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

#[inline]
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
}

/// `‖a − b‖₂`
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Sorted set of coordinate indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportSet {
    indices: Vec<usize>,
}

impl SupportSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Every coordinate of a `d`-dimensional space.
    pub fn full(d: usize) -> Self {
        Self {
            indices: (0..d).collect(),
        }
    }

    /// Sorts and deduplicates `indices`, rejecting any index `>= dimension`.
    pub fn new(indices: impl IntoIterator<Item = usize>, dimension: usize) -> Result<Self> {
        let mut indices: Vec<usize> = indices.into_iter().collect();
        if let Some(&index) = indices.iter().find(|&&i| i >= dimension) {
            return Err(Error::IndexOutOfRange { index, dimension });
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(Self { indices })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Largest index plus one, or zero when empty.
    pub fn bound(&self) -> usize {
        self.indices.last().map_or(0, |i| i + 1)
    }

    /// Inserts `i`; returns false if it was already present.
    pub fn insert(&mut self, i: usize) -> bool {
        match self.indices.binary_search(&i) {
            Ok(_) => false,
            Err(pos) => {
                self.indices.insert(pos, i);
                true
            }
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (
            self.indices.iter().peekable(),
            other.indices.iter().peekable(),
        );
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&x), Some(&&y)) => {
                    if x < y {
                        out.push(x);
                        a.next();
                    } else if y < x {
                        out.push(y);
                        b.next();
                    } else {
                        out.push(x);
                        a.next();
                        b.next();
                    }
                }
                (Some(&&x), None) => {
                    out.push(x);
                    a.next();
                }
                (None, Some(&&y)) => {
                    out.push(y);
                    b.next();
                }
                (None, None) => break,
            }
        }
        Self { indices: out }
    }

    /// `self ∖ other`
    pub fn difference(&self, other: &Self) -> Self {
        Self {
            indices: self.iter().filter(|&i| !other.contains(i)).collect(),
        }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.iter().all(|i| other.contains(i))
    }
}

/// Scatters restricted coefficients back into a length-`d` vector.
fn scatter(d: usize, support: &SupportSet, coef: &[f64]) -> DenseVector {
    let mut z = vec![0.0; d];
    for (k, j) in support.iter().enumerate() {
        z[j] = coef[k];
    }
    DenseVector(z)
}

/// Least squares restricted to a support.
///
/// Returns `z` with `supp(z) ⊆ support` minimizing `‖A z − y‖₂`. When the
/// column submatrix is rank deficient (pivot below [`RANK_TOLERANCE`] times
/// the largest pivot) the minimum-norm minimizer is returned.
pub fn restricted_least_squares(
    a: &DenseMatrix,
    y: &[f64],
    support: &SupportSet,
) -> Result<DenseVector> {
    if y.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            what: "observation length",
            expected: a.rows(),
            found: y.len(),
        });
    }
    check_finite(y, "observation")?;
    if support.bound() > a.cols() {
        return Err(Error::IndexOutOfRange {
            index: support.bound() - 1,
            dimension: a.cols(),
        });
    }
    if support.is_empty() {
        return Ok(DenseVector::zeros(a.cols()));
    }
    let columns: Vec<Vec<f64>> = support.iter().map(|j| a.column(j)).collect();
    let coef = min_norm_least_squares(columns, y);
    Ok(scatter(a.cols(), support, &coef))
}

/// Minimum-norm least-squares solution of `B w ≈ rhs`, `B` given by columns.
pub(crate) fn min_norm_least_squares(columns: Vec<Vec<f64>>, rhs: &[f64]) -> Vec<f64> {
    let n = columns.len();
    let qr = PivotedQr::factor(columns);
    let rank = qr.rank();
    if rank == 0 {
        return vec![0.0; n];
    }
    let c = qr.apply_qt(rhs);
    let w = if rank == n {
        qr.back_solve(&c[..n])
    } else {
        // Complete orthogonal decomposition: min ‖w‖ s.t. [R11 R12] w = c1.
        let wt_cols: Vec<Vec<f64>> = (0..rank)
            .map(|i| {
                (0..n)
                    .map(|j| if j >= i { qr.r(i, j) } else { 0.0 })
                    .collect()
            })
            .collect();
        let second = PivotedQr::factor_unpivoted(wt_cols);
        // R2ᵀ t = c1, forward substitution.
        let mut t = vec![0.0; rank];
        for i in 0..rank {
            let mut acc = c[i];
            for k in 0..i {
                acc -= second.r(k, i) * t[k];
            }
            t[i] = acc / second.r(i, i);
        }
        let mut full = vec![0.0; n];
        full[..rank].copy_from_slice(&t);
        second.apply_q(&full)
    };
    let mut out = vec![0.0; n];
    for (k, &p) in qr.perm.iter().enumerate() {
        out[p] = w[k];
    }
    out
}

/// Householder QR, optionally with column pivoting. Columns are stored
/// separately; after factoring, `cols[j][..=j]` holds column `j` of R.
struct PivotedQr {
    m: usize,
    cols: Vec<Vec<f64>>,
    reflectors: Vec<(Vec<f64>, f64)>,
    perm: Vec<usize>,
}

impl PivotedQr {
    fn factor(cols: Vec<Vec<f64>>) -> Self {
        Self::factor_impl(cols, true)
    }

    fn factor_unpivoted(cols: Vec<Vec<f64>>) -> Self {
        Self::factor_impl(cols, false)
    }

    fn factor_impl(mut cols: Vec<Vec<f64>>, pivot: bool) -> Self {
        let n = cols.len();
        let m = cols.first().map_or(0, |c| c.len());
        let mut perm: Vec<usize> = (0..n).collect();
        let mut reflectors = Vec::with_capacity(n.min(m));
        for k in 0..n.min(m) {
            if pivot {
                let (best, _) = (k..n)
                    .map(|j| (j, cols[j][k..].iter().map(|v| v * v).sum::<f64>()))
                    .fold(
                        (k, -1.0),
                        |acc, (j, s)| if s > acc.1 { (j, s) } else { acc },
                    );
                cols.swap(k, best);
                perm.swap(k, best);
            }
            let x = &cols[k][k..];
            let norm = norm2(x);
            if norm == 0.0 {
                reflectors.push((Vec::new(), 0.0));
                continue;
            }
            let alpha = if x[0] >= 0.0 { -norm } else { norm };
            let mut v: Vec<f64> = x.to_vec();
            v[0] -= alpha;
            let vtv = dot(&v, &v);
            let beta = if vtv == 0.0 { 0.0 } else { 2.0 / vtv };
            for col in cols.iter_mut().skip(k + 1) {
                let s = beta * dot(&v, &col[k..]);
                for (c, vi) in col[k..].iter_mut().zip(&v) {
                    *c -= s * vi;
                }
            }
            cols[k][k] = alpha;
            for c in cols[k][k + 1..].iter_mut() {
                *c = 0.0;
            }
            reflectors.push((v, beta));
        }
        Self {
            m,
            cols,
            reflectors,
            perm,
        }
    }

    #[inline]
    fn r(&self, i: usize, j: usize) -> f64 {
        self.cols[j][i]
    }

    /// Numerical rank from the (non-increasing) pivot magnitudes.
    fn rank(&self) -> usize {
        let k = self.reflectors.len();
        if k == 0 {
            return 0;
        }
        let largest = self.r(0, 0).abs();
        if largest == 0.0 {
            return 0;
        }
        (0..k)
            .take_while(|&i| self.r(i, i).abs() > RANK_TOLERANCE * largest)
            .count()
    }

    fn apply_qt(&self, b: &[f64]) -> Vec<f64> {
        let mut out = b.to_vec();
        for (k, (v, beta)) in self.reflectors.iter().enumerate() {
            if *beta == 0.0 {
                continue;
            }
            let s = beta * dot(v, &out[k..]);
            for (o, vi) in out[k..].iter_mut().zip(v) {
                *o -= s * vi;
            }
        }
        out
    }

    fn apply_q(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.m);
        let mut out = b.to_vec();
        for (k, (v, beta)) in self.reflectors.iter().enumerate().rev() {
            if *beta == 0.0 {
                continue;
            }
            let s = beta * dot(v, &out[k..]);
            for (o, vi) in out[k..].iter_mut().zip(v) {
                *o -= s * vi;
            }
        }
        out
    }

    fn back_solve(&self, c: &[f64]) -> Vec<f64> {
        let n = c.len();
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = c[i];
            for j in i + 1..n {
                acc -= self.r(i, j) * x[j];
            }
            x[i] = acc / self.r(i, i);
        }
        x
    }
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn symmetric_eig_extremes(m: &DenseMatrix) -> Result<(f64, f64)> {
    if m.rows() != m.cols() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if m.rows() == 0 {
        return Err(Error::Empty("matrix"));
    }
    let n = m.rows();
    let scale = m.max_abs().max(1.0);
    let mut asymmetry: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            asymmetry = asymmetry.max((m.get(i, j) - m.get(j, i)).abs());
        }
    }
    if asymmetry > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotSymmetric { asymmetry });
    }
    let mut work = m.as_slice().to_vec();
    Ok(jacobi_extremes_in_place(&mut work, n))
}

/// Cyclic Jacobi on a row-major symmetric `n×n` buffer, destroying it.
/// Returns `(λ_min, λ_max)`.
pub(crate) fn jacobi_extremes_in_place(a: &mut [f64], n: usize) -> (f64, f64) {
    debug_assert_eq!(a.len(), n * n);
    if n == 1 {
        return (a[0], a[0]);
    }
    if n == 2 {
        // Closed form keeps the hot s = 2 enumeration path cheap.
        let (p, q, r) = (a[0], a[1], a[3]);
        let mean = 0.5 * (p + r);
        let half_gap = sqrt(0.25 * (p - r) * (p - r) + q * q);
        return (mean - half_gap, mean + half_gap);
    }
    let frob_sq: f64 = a.iter().map(|v| v * v).sum();
    let threshold = JACOBI_TOLERANCE * JACOBI_TOLERANCE * frob_sq;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += 2.0 * a[p * n + q] * a[p * n + q];
            }
        }
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + sqrt(theta * theta + 1.0));
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        lo = lo.min(a[i * n + i]);
        hi = hi.max(a[i * n + i]);
    }
    (lo, hi)
}
