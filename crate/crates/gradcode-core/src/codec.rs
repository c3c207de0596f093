//! Gradient codes: the encoding matrix `B`, its decoding rows, and checks.
//!
//! Worker `i` holds the partitions in `supp(b_i)` and transmits
//! `b_i · ḡ = Σ_j B[i][j] · g_j`. For a set `I` of surviving workers the
//! aggregator needs a row vector `x` with `x · B(I,:) = 1`; then
//! `Σ_t x_t (b_{I_t} · ḡ) = Σ_j g_j`, the full gradient.
//!
//! Decoding rows are never materialized for all `C(n, s)` survivor sets.
//! They are solved on demand and memoized in a [`DecodeCache`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::numerics::{self, gaussian_mat, solve_left, solve_right, Mat, Rng, DEFAULT_TOL};

/// Default cap on the number of survivor sets [`verify_bspan`] enumerates.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 1_000_000;

/// Number of times the cyclic construction redraws `H` (seed + 1 each time)
/// after the first draw fails its self-check.
pub const CYC_MAX_REDRAWS: u64 = 5;

/// The cyclic construction runs a full B-Span check on itself when there are
/// at most this many survivor sets.
pub const CYC_SELF_CHECK_BUDGET: u128 = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CodeKind {
    /// No replication: `B = I`, `s = 0`.
    Naive,
    /// Fractional repetition: `s + 1` replicated groups.
    FracRep,
    /// Cyclic repetition with coefficients from the null space of `H`.
    CycRep,
    /// Any other matrix, typically imported for inspection.
    Custom,
}

impl CodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CodeKind::Naive => "naive",
            CodeKind::FracRep => "frac",
            CodeKind::CycRep => "cyc",
            CodeKind::Custom => "custom",
        }
    }
}

impl fmt::Display for CodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(CodeKind::Naive),
            "frac" | "fracrep" => Ok(CodeKind::FracRep),
            "cyc" | "cycrep" => Ok(CodeKind::CycRep),
            "custom" => Ok(CodeKind::Custom),
            other => Err(Error::InvalidParameter(format!(
                "unknown code kind `{other}`"
            ))),
        }
    }
}

/// An encoding matrix together with its parameters. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientCode {
    n: usize,
    k: usize,
    s: usize,
    kind: CodeKind,
    b: Mat,
    h_seed: Option<u64>,
}

impl GradientCode {
    /// `B = I_n`, tolerating no stragglers.
    pub fn naive(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "naive code needs n >= 1".to_string(),
            ));
        }
        Ok(Self {
            n,
            k: n,
            s: 0,
            kind: CodeKind::Naive,
            b: Mat::identity(n),
            h_seed: None,
        })
    }

    /// Fractional repetition: the workers form `s + 1` identical groups of
    /// `n / (s + 1)`; within a group worker `j` owns partitions
    /// `j(s+1) .. (j+1)(s+1)` with unit coefficients.
    pub fn frac(n: usize, s: usize) -> Result<Self> {
        check_ns(n, s)?;
        if !n.is_multiple_of(s + 1) {
            return Err(Error::Divisibility { n, s });
        }
        let mut b = Mat::zeros(n, n);
        for row in 0..n {
            for col in frac_support(n, s, row) {
                b.set(row, col, 1.0);
            }
        }
        Ok(Self {
            n,
            k: n,
            s,
            kind: CodeKind::FracRep,
            b,
            h_seed: None,
        })
    }

    /// Cyclic repetition. Draws `H` (`s × n`, standard normal, last column
    /// balancing the rest so `H·1 = 0`) from `seed`, then fills row `i` on
    /// the support `{i, …, i+s} mod n` with a leading 1 and the remaining
    /// coefficients chosen so that `H · b_iᵀ = 0`.
    ///
    /// A draw that fails its self-check is replaced by the draw for
    /// `seed + 1`, up to [`CYC_MAX_REDRAWS`] times. The seed that succeeded
    /// is kept in [`GradientCode::h_seed`].
    pub fn cyclic(n: usize, s: usize, seed: u64) -> Result<Self> {
        if n < 2 || s == 0 || s >= n {
            return Err(Error::InvalidParameter(format!(
                "cyclic code needs n >= 2 and 1 <= s < n, got n = {n}, s = {s}"
            )));
        }
        for attempt in 0..=CYC_MAX_REDRAWS {
            if let Ok(code) = Self::try_cyclic(n, s, seed.wrapping_add(attempt)) {
                return Ok(code);
            }
        }
        Err(Error::RetryExhausted {
            attempts: CYC_MAX_REDRAWS as usize + 1,
            seed,
        })
    }

    fn try_cyclic(n: usize, s: usize, seed: u64) -> Result<Self> {
        let h = cyclic_h(n, s, seed);
        let mut b = Mat::zeros(n, n);
        for i in 0..n {
            let support = cyclic_support(n, s, i);
            let rest = h.select_cols(&support[1..]);
            let target: Vec<f64> = h.col(support[0]).into_iter().map(|v| -v).collect();
            let sol = solve_left(&rest, &target, DEFAULT_TOL)?;
            b.set(i, support[0], 1.0);
            for (&col, &v) in support[1..].iter().zip(&sol.x) {
                if v == 0.0 || !v.is_finite() {
                    return Err(Error::SpanFailure {
                        survivors: support.clone(),
                        residual: f64::INFINITY,
                    });
                }
                b.set(i, col, v);
            }
            let null_residual = numerics::norm_inf(&h.mul_vec(b.row(i)));
            if null_residual > DEFAULT_TOL {
                return Err(Error::SpanFailure {
                    survivors: support,
                    residual: null_residual,
                });
            }
        }
        let code = Self {
            n,
            k: n,
            s,
            kind: CodeKind::CycRep,
            b,
            h_seed: Some(seed),
        };
        if binomial(n, s) <= CYC_SELF_CHECK_BUDGET {
            let report = verify_bspan(&code, DEFAULT_TOL)?;
            if let Some(first) = report.failures.first() {
                return Err(Error::SpanFailure {
                    survivors: first.indices().to_vec(),
                    residual: report.max_residual,
                });
            }
        }
        Ok(code)
    }

    /// Assembles a code from its parts and checks the structural invariants
    /// of the declared kind. Used when importing scheme files.
    pub fn from_parts(
        kind: CodeKind,
        n: usize,
        k: usize,
        s: usize,
        b: Mat,
        h_seed: Option<u64>,
    ) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidParameter(
                "n and k must be positive".to_string(),
            ));
        }
        if s >= n {
            return Err(Error::InvalidParameter(format!(
                "s = {s} must be below n = {n}"
            )));
        }
        if b.rows() != n || b.cols() != k {
            return Err(Error::DimensionMismatch(format!(
                "B is {}x{}, expected {n}x{k}",
                b.rows(),
                b.cols()
            )));
        }
        if h_seed.is_some() && kind != CodeKind::CycRep {
            return Err(Error::InvalidParameter(format!(
                "h_seed only applies to cyc codes, not {kind}"
            )));
        }
        let expected_density = match kind {
            CodeKind::Naive => {
                if s != 0 {
                    return Err(Error::InvalidParameter(format!(
                        "naive code must have s = 0, got {s}"
                    )));
                }
                Some(1)
            }
            CodeKind::FracRep | CodeKind::CycRep => {
                if k != n {
                    return Err(Error::InvalidParameter(format!(
                        "{kind} code needs k = n, got k = {k}, n = {n}"
                    )));
                }
                if kind == CodeKind::FracRep && !n.is_multiple_of(s + 1) {
                    return Err(Error::Divisibility { n, s });
                }
                Some(s + 1)
            }
            CodeKind::Custom => None,
        };
        if let Some(want) = expected_density {
            for row in 0..n {
                let support = row_support(&b, row);
                if support.len() != want {
                    return Err(Error::InvalidParameter(format!(
                        "B row {row} has {} non-zeros, {kind} with s = {s} needs {want}",
                        support.len()
                    )));
                }
                let pattern = match kind {
                    CodeKind::FracRep => Some(frac_support(n, s, row).collect::<Vec<_>>()),
                    CodeKind::CycRep => {
                        let mut p = cyclic_support(n, s, row);
                        p.sort_unstable();
                        Some(p)
                    }
                    _ => None,
                };
                if let Some(pattern) = pattern {
                    if pattern != support {
                        return Err(Error::InvalidParameter(format!(
                            "B row {row} has support {support:?}, {kind} layout needs {pattern:?}"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            n,
            k,
            s,
            kind,
            b,
            h_seed,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn h_seed(&self) -> Option<u64> {
        self.h_seed
    }

    /// Regenerates `H` for a cyclic code from its recorded seed.
    pub fn h(&self) -> Option<Mat> {
        self.h_seed.map(|seed| cyclic_h(self.n, self.s, seed))
    }

    /// Partitions held by `worker`, ascending.
    pub fn assignment(&self, worker: usize) -> Result<Vec<usize>> {
        if worker >= self.n {
            return Err(Error::IndexOutOfRange {
                index: worker,
                len: self.n,
            });
        }
        Ok(row_support(&self.b, worker))
    }

    /// The message worker `worker` sends: `Σ_j B[worker][j] · g_j`.
    pub fn encode(&self, worker: usize, partials: &[Vec<f64>]) -> Result<Vec<f64>> {
        if partials.len() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "{} partial gradients for k = {}",
                partials.len(),
                self.k
            )));
        }
        let dim = partials.first().map_or(0, Vec::len);
        let mut out = vec![0.0; dim];
        for j in self.assignment(worker)? {
            numerics::axpy(self.b.get(worker, j), &partials[j], &mut out);
        }
        Ok(out)
    }
}

fn check_ns(n: usize, s: usize) -> Result<()> {
    if n == 0 || s >= n {
        return Err(Error::InvalidParameter(format!(
            "need n >= 1 and 0 <= s < n, got n = {n}, s = {s}"
        )));
    }
    Ok(())
}

fn frac_support(n: usize, s: usize, row: usize) -> core::ops::Range<usize> {
    let group = n / (s + 1);
    let j = row % group;
    j * (s + 1)..(j + 1) * (s + 1)
}

/// Support of row `i` of a cyclic code, in construction order
/// `i, i+1, …, i+s (mod n)`.
pub fn cyclic_support(n: usize, s: usize, i: usize) -> Vec<usize> {
    (0..=s).map(|t| (i + t) % n).collect()
}

/// The `s × n` matrix `H` behind a cyclic code: i.i.d. standard normal entries
/// in the first `n − 1` columns, and a last column equal to minus their row
/// sums.
pub fn cyclic_h(n: usize, s: usize, seed: u64) -> Mat {
    let mut rng = Rng::seed_from_u64(seed);
    let mut h = gaussian_mat(&mut rng, s, n);
    for i in 0..s {
        let sum: f64 = h.row(i)[..n - 1].iter().sum();
        h.set(i, n - 1, -sum);
    }
    h
}

fn row_support(b: &Mat, row: usize) -> Vec<usize> {
    b.row(row)
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, _)| j)
        .collect()
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Sorted set of distinct worker indices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SurvivorSet(Vec<usize>);

impl SurvivorSet {
    pub fn new(indices: impl IntoIterator<Item = usize>, n: usize) -> Result<Self> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        if let Some(&bad) = v.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, len: n });
        }
        if v.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(format!(
                "duplicate workers in {v:?}"
            )));
        }
        Ok(Self(v))
    }

    pub fn all(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// The first `count` workers of a completion order; ties are already
    /// resolved by the order itself.
    pub fn earliest(order: &[usize], count: usize, n: usize) -> Result<Self> {
        if order.len() < count {
            return Err(Error::InvalidParameter(format!(
                "{} finishers, {count} needed",
                order.len()
            )));
        }
        Self::new(order[..count].iter().copied(), n)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, worker: usize) -> bool {
        self.0.binary_search(&worker).is_ok()
    }
}

/// Decoding coefficients for one survivor set, aligned with its sorted
/// worker indices.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodeRow {
    pub survivors: SurvivorSet,
    pub coeffs: Vec<f64>,
    pub residual: f64,
}

impl DecodeRow {
    /// Combines the survivors' messages (same order as `survivors`).
    pub fn combine<M: AsRef<[f64]>>(&self, messages: &[M]) -> Result<Vec<f64>> {
        if messages.len() != self.coeffs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} messages for {} survivors",
                messages.len(),
                self.coeffs.len()
            )));
        }
        let dim = messages.first().map_or(0, |m| m.as_ref().len());
        let mut out = vec![0.0; dim];
        for (c, m) in self.coeffs.iter().zip(messages) {
            numerics::axpy(*c, m.as_ref(), &mut out);
        }
        Ok(out)
    }
}

/// Memoized decoding rows of a single code, keyed by survivor set.
///
/// Rows are only inserted after their residual check passes, so every cached
/// row satisfies `coeffs · B(I,:) = 1` within the tolerance it was built
/// with. A cache must not be shared between different codes.
#[derive(Clone, Debug, Default)]
pub struct DecodeCache {
    rows: BTreeMap<SurvivorSet, DecodeRow>,
}

impl DecodeCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, survivors: &SurvivorSet) -> Option<&DecodeRow> {
        self.rows.get(survivors)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get_or_decode(
        &mut self,
        code: &GradientCode,
        survivors: &SurvivorSet,
        tol: f64,
    ) -> Result<&DecodeRow> {
        if !self.rows.contains_key(survivors) {
            let row = solve_decode_row(code, survivors, tol)?;
            self.rows.insert(survivors.clone(), row);
        }
        Ok(&self.rows[survivors])
    }
}

/// Decoding row for `survivors` (exactly `n − s` workers), memoized in `cache`.
pub fn decode_row(
    code: &GradientCode,
    survivors: &SurvivorSet,
    cache: &mut DecodeCache,
    tol: f64,
) -> Result<DecodeRow> {
    cache.get_or_decode(code, survivors, tol).cloned()
}

/// Uncached decoding: solves `x · B(I,:) = 1_k`.
pub fn solve_decode_row(
    code: &GradientCode,
    survivors: &SurvivorSet,
    tol: f64,
) -> Result<DecodeRow> {
    let want = code.n - code.s;
    if survivors.len() != want {
        return Err(Error::InvalidParameter(format!(
            "survivor set has {} workers, decoding needs n - s = {want}",
            survivors.len()
        )));
    }
    if let Some(&bad) = survivors.indices().iter().find(|&&i| i >= code.n) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: code.n,
        });
    }
    let sub = code.b.select_rows(survivors.indices());
    let sol = solve_right(&sub, &vec![1.0; code.k])?;
    if !sol.within(tol) {
        return Err(Error::SpanFailure {
            survivors: survivors.indices().to_vec(),
            residual: sol.residual,
        });
    }
    Ok(DecodeRow {
        survivors: survivors.clone(),
        coeffs: sol.x,
        residual: sol.residual,
    })
}

/// Outcome of an exhaustive B-Span check.
#[derive(Clone, Debug, PartialEq)]
pub struct BSpanReport {
    pub ok: bool,
    pub checked: usize,
    pub failures: Vec<SurvivorSet>,
    /// Largest residual among the sets that decoded.
    pub max_residual: f64,
}

/// Checks every survivor set of size `n − s` for decodability.
pub fn verify_bspan(code: &GradientCode, tol: f64) -> Result<BSpanReport> {
    verify_bspan_with_budget(code, tol, DEFAULT_ENUMERATION_BUDGET)
}

pub fn verify_bspan_with_budget(
    code: &GradientCode,
    tol: f64,
    budget: u128,
) -> Result<BSpanReport> {
    let subsets = binomial(code.n, code.s);
    if subsets > budget {
        return Err(Error::BudgetExceeded { subsets, budget });
    }
    let mut report = BSpanReport {
        ok: true,
        checked: 0,
        failures: Vec::new(),
        max_residual: 0.0,
    };
    for combo in (0..code.n).combinations(code.n - code.s) {
        let survivors = SurvivorSet(combo);
        report.checked += 1;
        match solve_decode_row(code, &survivors, tol) {
            Ok(row) => report.max_residual = report.max_residual.max(row.residual),
            Err(Error::SpanFailure { .. }) => {
                report.ok = false;
                report.failures.push(survivors);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

/// Per-row and per-column ℓ₀ counts against the lower bound `⌈k(s+1)/n⌉`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityReport {
    pub row_densities: Vec<usize>,
    pub column_densities: Vec<usize>,
    pub min_row_density: usize,
    pub max_row_density: usize,
    pub bound: usize,
    pub meets_bound_with_equality: bool,
}

pub fn density_check(code: &GradientCode) -> DensityReport {
    let row_densities: Vec<usize> = (0..code.n).map(|i| row_support(&code.b, i).len()).collect();
    let column_densities: Vec<usize> = (0..code.k)
        .map(|j| (0..code.n).filter(|&i| code.b.get(i, j) != 0.0).count())
        .collect();
    let bound = (code.k * (code.s + 1)).div_ceil(code.n);
    let min_row_density = row_densities.iter().copied().min().unwrap_or(0);
    let max_row_density = row_densities.iter().copied().max().unwrap_or(0);
    DensityReport {
        meets_bound_with_equality: row_densities.iter().all(|&d| d == bound),
        row_densities,
        column_densities,
        min_row_density,
        max_row_density,
        bound,
    }
}

/// Outcome of checking that every `s`-column submatrix of `H` is invertible.
#[derive(Clone, Debug, PartialEq)]
pub struct MdsReport {
    pub ok: bool,
    pub checked: usize,
    pub failures: Vec<Vec<usize>>,
}

pub fn check_mds(h: &Mat, budget: u128) -> Result<MdsReport> {
    let (s, n) = (h.rows(), h.cols());
    let subsets = binomial(n, s);
    if subsets > budget {
        return Err(Error::BudgetExceeded { subsets, budget });
    }
    let mut report = MdsReport {
        ok: true,
        checked: 0,
        failures: Vec::new(),
    };
    for cols in (0..n).combinations(s) {
        report.checked += 1;
        if numerics::rank(&h.select_cols(&cols)) != s {
            report.ok = false;
            report.failures.push(cols);
        }
    }
    Ok(report)
}
