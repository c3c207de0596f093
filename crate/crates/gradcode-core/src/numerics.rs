//! Dense real linear algebra for the small systems that show up in code
//! construction and decoding, plus the seeded random generator.
//!
//! Everything here is sized for matrices of at most a few hundred rows.
//! Least squares goes through Householder QR with column pivoting, which
//! also gives a numerical rank for rank-deficient inputs (replicated rows of
//! a fractional repetition code are the common case).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default absolute tolerance on the ∞-norm of a solve residual.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Diagonal entries of the pivoted `R` factor below this fraction of the
/// leading one are treated as zero.
const RANK_RTOL: f64 = 1e-12;

/// Row-major dense matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
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

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
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
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, rows: &[usize]) -> Mat {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Mat {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn select_cols(&self, cols: &[usize]) -> Mat {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            data.extend(cols.iter().map(|&c| self.get(i, c)));
        }
        Mat {
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    /// `M · y` for a column vector `y`.
    pub fn mul_vec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), y)).collect()
    }

    /// `x · M` for a row vector `x`.
    pub fn vec_mul(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(xi, self.row(i), &mut out);
            }
        }
        out
    }

    pub fn mul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let row = self.row(i);
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    axpy(a, other.row(k), dst);
                }
            }
        }
        Ok(out)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a · x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(dot(v, v))
}

/// Result of a least-squares solve.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    /// ∞-norm of the residual, recomputed from the original system.
    pub residual: f64,
    /// Numerical rank of the system matrix.
    pub rank: usize,
}

impl Solution {
    pub fn within(&self, tol: f64) -> bool {
        self.residual <= tol
    }
}

/// Finds the row vector `x` minimising `‖x·M − target‖₂`.
///
/// The residual is reported, not judged: callers compare it to their own
/// tolerance.
pub fn solve_right(m: &Mat, target: &[f64]) -> Result<Solution> {
    if m.rows == 0 || target.len() != m.cols {
        return Err(Error::DimensionMismatch(format!(
            "solve_right: {}x{} matrix, target of length {}",
            m.rows,
            m.cols,
            target.len()
        )));
    }
    check_finite(m, target)?;
    let (x, rank) = lstsq(&m.transpose(), target);
    let fitted = m.vec_mul(&x);
    let residual = residual_inf(&fitted, target);
    Ok(Solution { x, residual, rank })
}

/// Finds the column vector `y` minimising `‖M·y − target‖₂` for a square or
/// overdetermined `M`. A square system whose residual exceeds `tol` is
/// reported as singular.
pub fn solve_left(m: &Mat, target: &[f64], tol: f64) -> Result<Solution> {
    if m.rows != target.len() || m.rows < m.cols || m.cols == 0 {
        return Err(Error::DimensionMismatch(format!(
            "solve_left: {}x{} matrix, target of length {}",
            m.rows,
            m.cols,
            target.len()
        )));
    }
    check_finite(m, target)?;
    let (y, rank) = lstsq(m, target);
    let fitted = m.mul_vec(&y);
    let residual = residual_inf(&fitted, target);
    if m.rows == m.cols && residual > tol {
        return Err(Error::SingularSystem { residual, tol });
    }
    Ok(Solution {
        x: y,
        residual,
        rank,
    })
}

/// Numerical rank from pivoted QR.
pub fn rank(m: &Mat) -> usize {
    if m.rows == 0 || m.cols == 0 {
        return 0;
    }
    let b = vec![0.0; m.rows];
    lstsq(m, &b).1
}

/// `rows × cols` matrix of i.i.d. standard normal draws, filled row by row.
pub fn gaussian_mat(rng: &mut Rng, rows: usize, cols: usize) -> Mat {
    let data = (0..rows * cols).map(|_| rng.normal()).collect();
    Mat { rows, cols, data }
}

fn check_finite(m: &Mat, target: &[f64]) -> Result<()> {
    if m.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("target"));
    }
    Ok(())
}

fn residual_inf(fitted: &[f64], target: &[f64]) -> f64 {
    fitted
        .iter()
        .zip(target)
        .fold(0.0, |m, (f, t)| m.max((f - t).abs()))
}

/// Basic least-squares solution of `A·x ≈ b` through Householder QR with
/// column pivoting. Columns past the numerical rank get zero coefficients.
fn lstsq(a: &Mat, b: &[f64]) -> (Vec<f64>, usize) {
    let (m, n) = (a.rows, a.cols);
    let mut r = a.data.clone();
    let mut qtb = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let at = |r: &[f64], i: usize, j: usize| r[i * n + j];

    let mut rank = 0;
    let mut lead = 0.0;
    for j in 0..m.min(n) {
        let (pivot, norm) = (j..n)
            .map(|c| {
                let sq: f64 = (j..m).map(|i| at(&r, i, c) * at(&r, i, c)).sum();
                (c, libm::sqrt(sq))
            })
            .fold(
                (j, -1.0),
                |best, cand| if cand.1 > best.1 { cand } else { best },
            );
        if j == 0 {
            lead = norm;
        }
        if norm == 0.0 || norm <= RANK_RTOL * lead {
            break;
        }
        if pivot != j {
            for i in 0..m {
                r.swap(i * n + j, i * n + pivot);
            }
            perm.swap(j, pivot);
        }

        let alpha = if at(&r, j, j) >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..m).map(|i| at(&r, i, j)).collect();
        v[0] -= alpha;
        let vv = dot(&v, &v);
        if vv > 0.0 {
            for c in j..n {
                let s: f64 = v
                    .iter()
                    .enumerate()
                    .map(|(t, vt)| vt * at(&r, j + t, c))
                    .sum();
                let f = 2.0 * s / vv;
                for (t, vt) in v.iter().enumerate() {
                    r[(j + t) * n + c] -= f * vt;
                }
            }
            let s: f64 = v.iter().enumerate().map(|(t, vt)| vt * qtb[j + t]).sum();
            let f = 2.0 * s / vv;
            for (t, vt) in v.iter().enumerate() {
                qtb[j + t] -= f * vt;
            }
        }
        rank += 1;
    }

    let mut z = vec![0.0; rank];
    for i in (0..rank).rev() {
        let mut acc = qtb[i];
        for (c, zc) in z.iter().enumerate().take(rank).skip(i + 1) {
            acc -= at(&r, i, c) * zc;
        }
        z[i] = acc / at(&r, i, i);
    }
    let mut x = vec![0.0; n];
    for (i, zi) in z.into_iter().enumerate() {
        x[perm[i]] = zi;
    }
    (x, rank)
}

/// Seeded generator: ChaCha8 keyed from a `u64` seed, with uniforms built from
/// the top 53 bits of each 64-bit word and normals from the Box–Muller
/// transform (both outputs of a pair are used).
#[derive(Clone, Debug)]
pub struct Rng {
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl Rng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        self.spare = Some(radius * libm::sin(theta));
        radius * libm::cos(theta)
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> core::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}
