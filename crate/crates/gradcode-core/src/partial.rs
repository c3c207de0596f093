//! Two-stage plans for α-partial stragglers.
//!
//! The data is cut into `n + n·m` equal partitions, `m` being the per-worker
//! naive count. Partitions `0 .. n·m` are naive: worker `w` owns
//! `w·m .. (w+1)·m` and nobody else does. Partitions `n·m .. n·m + n` are
//! coded: coded partition `j` sits at global index `n·m + j` and is spread by
//! an ordinary fractional or cyclic code. Every worker first sends the sum
//! over its naive partitions, then its coded combination.
//!
//! With `m = (s+1)/(α−1)` a straggler running α times slower finishes its
//! naive work (`α·m` time units) exactly when a normal worker finishes both
//! stages (`m + s + 1` units).

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use crate::codec::{CodeKind, GradientCode};
use crate::error::{Error, Result};

/// A ratio within this relative distance of an integer is taken to be that
/// integer, so that e.g. `3 / (1.2 − 1)` gives 15 rather than 16.
const INTEGRAL_RTOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct TwoStagePlan {
    n: usize,
    s: usize,
    alpha: f64,
    naive_per_worker: usize,
    coded: GradientCode,
}

impl TwoStagePlan {
    /// Plans the split. `kind` picks the coded stage's construction; `seed`
    /// only matters for the cyclic one.
    pub fn new(n: usize, s: usize, alpha: f64, kind: CodeKind, seed: u64) -> Result<Self> {
        check_alpha(alpha)?;
        if n < 2 || s == 0 || s >= n {
            return Err(Error::InvalidParameter(format!(
                "partial plan needs n >= 2 and 1 <= s < n, got n = {n}, s = {s}"
            )));
        }
        let coded = match kind {
            CodeKind::FracRep => GradientCode::frac(n, s)?,
            CodeKind::CycRep => GradientCode::cyclic(n, s, seed)?,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "coded stage must be frac or cyc, got {other}"
                )))
            }
        };
        Ok(Self {
            n,
            s,
            alpha,
            naive_per_worker: naive_per_worker(s, alpha)?,
            coded,
        })
    }

    /// Reassembles a plan from stored parts, checking that they agree.
    pub fn from_parts(alpha: f64, naive_per_worker: usize, coded: GradientCode) -> Result<Self> {
        check_alpha(alpha)?;
        let (n, s) = (coded.n(), coded.s());
        if !matches!(coded.kind(), CodeKind::FracRep | CodeKind::CycRep) || s == 0 {
            return Err(Error::InvalidParameter(
                "coded stage must be a frac or cyc code with s >= 1".into(),
            ));
        }
        let expected = naive_per_worker_for(s, alpha)?;
        if expected != naive_per_worker {
            return Err(Error::InvalidParameter(format!(
                "naive_per_worker = {naive_per_worker}, but s = {s}, alpha = {alpha} give {expected}"
            )));
        }
        Ok(Self {
            n,
            s,
            alpha,
            naive_per_worker,
            coded,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn naive_per_worker(&self) -> usize {
        self.naive_per_worker
    }

    pub fn naive_partitions_total(&self) -> usize {
        self.n * self.naive_per_worker
    }

    pub fn coded_partitions_total(&self) -> usize {
        self.n
    }

    pub fn total_partitions(&self) -> usize {
        self.naive_partitions_total() + self.coded_partitions_total()
    }

    pub fn coded(&self) -> &GradientCode {
        &self.coded
    }

    /// Naive partitions of `worker` (global indices).
    pub fn naive_assignment(&self, worker: usize) -> Result<Range<usize>> {
        if worker >= self.n {
            return Err(Error::IndexOutOfRange {
                index: worker,
                len: self.n,
            });
        }
        let m = self.naive_per_worker;
        Ok(worker * m..(worker + 1) * m)
    }

    /// Coded partitions of `worker` (global indices).
    pub fn coded_assignment(&self, worker: usize) -> Result<Vec<usize>> {
        let offset = self.naive_partitions_total();
        Ok(self
            .coded
            .assignment(worker)?
            .into_iter()
            .map(|j| offset + j)
            .collect())
    }

    /// Global index of coded partition `j`.
    pub fn coded_partition(&self, j: usize) -> usize {
        self.naive_partitions_total() + j
    }

    /// Fraction of the data each worker processes under this plan. Equals
    /// [`load_fraction`] when `(s+1)/(α−1)` is an integer.
    pub fn per_worker_fraction(&self) -> f64 {
        let m = self.naive_per_worker as f64;
        (m + (self.s + 1) as f64) / (self.n as f64 * (1.0 + m))
    }

    /// `α·m − (m + s + 1)` in units of one partition's processing time: how
    /// much later a straggler finishes its naive stage than a normal worker
    /// finishes everything. Zero when the ratio is integral, positive when
    /// the naive count was rounded up.
    pub fn timing_slack(&self) -> f64 {
        let m = self.naive_per_worker as f64;
        self.alpha * m - (m + (self.s + 1) as f64)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 1.0 {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(())
}

fn naive_per_worker_for(s: usize, alpha: f64) -> Result<usize> {
    check_alpha(alpha)?;
    let ratio = (s + 1) as f64 / (alpha - 1.0);
    let nearest = libm::round(ratio);
    let m = if (ratio - nearest).abs() <= INTEGRAL_RTOL * ratio.max(1.0) {
        nearest
    } else {
        libm::ceil(ratio)
    };
    if m > (usize::MAX / 4) as f64 {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(m as usize)
}

/// `⌈(s+1)/(α−1)⌉` naive partitions per worker, exact when the ratio is
/// (numerically) integral.
pub fn naive_per_worker(s: usize, alpha: f64) -> Result<usize> {
    naive_per_worker_for(s, alpha)
}

/// Share of the data a non-straggler processes: `(s+1)·α / (n·(s+α))`.
pub fn load_fraction(n: usize, s: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let (n, s) = (n as f64, s as f64);
    Ok((s + 1.0) * alpha / (n * (s + alpha)))
}
