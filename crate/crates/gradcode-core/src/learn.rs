//! Unregularized logistic regression.
//!
//! The loss is the summed negative log-likelihood
//! `Σ_i log(1 + exp(x_iᵀβ)) − y_i·x_iᵀβ` and gradients are sums over rows,
//! not means, so the partial gradients of disjoint partitions add up to the
//! full gradient exactly. Optimizer step sizes are given per sample and
//! multiplied by a caller-supplied scale (normally `1 / rows`).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::numerics::{self, Mat, Rng};

/// Features, binary labels and a contiguous split of rows into partitions.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: Mat,
    y: Vec<u8>,
    partitions: Vec<Range<usize>>,
}

impl Dataset {
    /// One partition covering every row.
    pub fn new(x: Mat, y: Vec<u8>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows, {} labels",
                x.rows(),
                y.len()
            )));
        }
        if y.iter().any(|&l| l > 1) {
            return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
        }
        let d = x.rows();
        Ok(Self {
            x,
            y,
            partitions: core::iter::once(0..d).collect(),
        })
    }

    /// Re-partitions into `k` contiguous blocks of `⌊d/k⌋` rows, the last
    /// block taking the remainder.
    pub fn with_partitions(mut self, k: usize) -> Result<Self> {
        let d = self.rows();
        if k == 0 || k > d {
            return Err(Error::InvalidParameter(format!(
                "cannot split {d} rows into {k} partitions"
            )));
        }
        let size = d / k;
        self.partitions = (0..k)
            .map(|j| j * size..if j + 1 == k { d } else { (j + 1) * size })
            .collect();
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.x.rows()
    }

    pub fn features(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Mat {
        &self.x
    }

    pub fn labels(&self) -> &[u8] {
        &self.y
    }

    pub fn partitions(&self) -> &[Range<usize>] {
        &self.partitions
    }

    pub fn partition_count(&self) -> usize {
        self.partitions.len()
    }

    /// Rows at `indices`, as a single-partition dataset.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            partitions: core::iter::once(0..indices.len()).collect(),
        }
    }

    /// Deterministic shuffle, then the first `train_fraction` of rows become
    /// the training set and the rest the holdout.
    pub fn split_holdout(&self, rng: &mut Rng, train_fraction: f64) -> Result<(Dataset, Dataset)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "train fraction {train_fraction} outside (0, 1)"
            )));
        }
        let mut order: Vec<usize> = (0..self.rows()).collect();
        order.shuffle(rng);
        let cut = libm::round(self.rows() as f64 * train_fraction) as usize;
        if cut == 0 || cut == self.rows() {
            return Err(Error::InvalidParameter(format!(
                "{} rows are too few for a holdout split",
                self.rows()
            )));
        }
        Ok((self.select(&order[..cut]), self.select(&order[cut..])))
    }
}

/// Logistic function without overflow for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))`
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

fn check_beta(data: &Dataset, beta: &[f64]) -> Result<()> {
    if beta.len() != data.features() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} coefficients, data has {} features",
            beta.len(),
            data.features()
        )));
    }
    Ok(())
}

fn gradient_rows(data: &Dataset, rows: Range<usize>, beta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; data.features()];
    for i in rows {
        let xi = data.x.row(i);
        let r = sigmoid(numerics::dot(xi, beta)) - f64::from(data.y[i]);
        numerics::axpy(r, xi, &mut g);
    }
    g
}

/// `Σ_{i ∈ part} (σ(x_iᵀβ) − y_i) · x_i`
pub fn partial_gradient(data: &Dataset, part: usize, beta: &[f64]) -> Result<Vec<f64>> {
    check_beta(data, beta)?;
    let rows = data
        .partitions
        .get(part)
        .cloned()
        .ok_or(Error::IndexOutOfRange {
            index: part,
            len: data.partitions.len(),
        })?;
    Ok(gradient_rows(data, rows, beta))
}

/// Gradient over every row in one pass.
pub fn full_gradient(data: &Dataset, beta: &[f64]) -> Result<Vec<f64>> {
    check_beta(data, beta)?;
    Ok(gradient_rows(data, 0..data.rows(), beta))
}

/// Summed negative log-likelihood over `rows`.
pub fn loss_rows(data: &Dataset, rows: Range<usize>, beta: &[f64]) -> Result<f64> {
    check_beta(data, beta)?;
    Ok(rows
        .map(|i| {
            let z = numerics::dot(data.x.row(i), beta);
            softplus(z) - f64::from(data.y[i]) * z
        })
        .sum())
}

pub fn loss(data: &Dataset, beta: &[f64]) -> Result<f64> {
    loss_rows(data, 0..data.rows(), beta)
}

/// Linear scores `x_iᵀβ` for every row.
pub fn scores(data: &Dataset, beta: &[f64]) -> Result<Vec<f64>> {
    check_beta(data, beta)?;
    Ok(data.x.mul_vec(beta))
}

/// Synthetic data: `x ~ ½N(μ₁, I) + ½N(μ₂, I)`, `y ~ Bernoulli(κ)` with
/// `κ = 1 / (exp(2xᵀβ*) + 1)`.
///
/// Draw order from `rng`: `μ₁`, `μ₂`, `β*` (each `p` normals), then per row
/// the mixture component (one uniform), `p` normals, and the label uniform.
/// The means have unit-variance entries; `β*` has variance `1/p` so that
/// `xᵀβ*` stays O(1) and the classes overlap.
pub fn gen_synthetic(rng: &mut Rng, d: usize, p: usize) -> Result<(Dataset, Vec<f64>)> {
    if d == 0 || p == 0 {
        return Err(Error::InvalidParameter(
            "synthetic data needs d, p >= 1".into(),
        ));
    }
    let mu: [Vec<f64>; 2] = [
        (0..p).map(|_| rng.normal()).collect(),
        (0..p).map(|_| rng.normal()).collect(),
    ];
    let scale = 1.0 / libm::sqrt(p as f64);
    let beta_star: Vec<f64> = (0..p).map(|_| rng.normal() * scale).collect();
    let data = sample_rows(rng, d, &mu, &beta_star)?;
    Ok((data, beta_star))
}

/// Same mixture with a caller-chosen regressor.
pub fn gen_synthetic_with_beta(rng: &mut Rng, d: usize, beta_star: &[f64]) -> Result<Dataset> {
    let p = beta_star.len();
    if d == 0 || p == 0 {
        return Err(Error::InvalidParameter(
            "synthetic data needs d, p >= 1".into(),
        ));
    }
    let mu: [Vec<f64>; 2] = [
        (0..p).map(|_| rng.normal()).collect(),
        (0..p).map(|_| rng.normal()).collect(),
    ];
    sample_rows(rng, d, &mu, beta_star)
}

fn sample_rows(rng: &mut Rng, d: usize, mu: &[Vec<f64>; 2], beta_star: &[f64]) -> Result<Dataset> {
    let p = beta_star.len();
    let mut xs = Vec::with_capacity(d * p);
    let mut ys = Vec::with_capacity(d);
    for _ in 0..d {
        let component = &mu[usize::from(rng.uniform() >= 0.5)];
        let start = xs.len();
        xs.extend(component.iter().map(|m| m + rng.normal()));
        let z = numerics::dot(&xs[start..], beta_star);
        let kappa = 1.0 / (libm::exp(2.0 * z) + 1.0);
        ys.push(u8::from(rng.uniform() < kappa));
    }
    Dataset::new(Mat::new(d, p, xs)?, ys)
}

/// Area under the ROC curve as the Mann–Whitney statistic:
/// `P(score⁺ > score⁻) + ½·P(score⁺ = score⁻)`.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores, {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores"));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of midranks of the positives
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += midrank * order[i..=j].iter().filter(|&&t| labels[t] == 1).count() as f64;
        i = j + 1;
    }
    let (pos, neg) = (positives as f64, negatives as f64);
    Ok((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Nesterov's accelerated gradient, constant step.
    Nag,
    /// Plain gradient descent with step `c1 / (t + c2)`, `t` counting from 1.
    DecayingGd,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub method: Method,
    pub eta: f64,
    pub c1: f64,
    pub c2: f64,
}

impl OptimizerConfig {
    pub fn nag(eta: f64) -> Self {
        Self {
            method: Method::Nag,
            eta,
            c1: 1.0,
            c2: 1.0,
        }
    }

    pub fn decaying(c1: f64, c2: f64) -> Self {
        Self {
            method: Method::DecayingGd,
            eta: 1.0,
            c1,
            c2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.method {
            Method::Nag => self.eta.is_finite() && self.eta > 0.0,
            Method::DecayingGd => {
                self.c1.is_finite() && self.c1 > 0.0 && self.c2.is_finite() && self.c2 >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "bad optimizer settings {self:?}"
            )))
        }
    }
}

/// Optimizer state over the model `β`.
///
/// Nesterov uses the two-sequence form: the gradient is taken at the
/// look-ahead point `y_t = β_t + (t−1)/(t+2)·(β_t − β_{t−1})`, `t` being
/// the number of steps taken, then `β_{t+1} = y_t − η·g`.
/// Decaying-step descent takes the gradient at `β_t` and applies
/// `β_{t+1} = β_t − c1/(t + 1 + c2)·g`.
#[derive(Clone, Debug)]
pub struct Optimizer {
    config: OptimizerConfig,
    scale: f64,
    beta: Vec<f64>,
    prev: Vec<f64>,
    query: Vec<f64>,
    t: usize,
}

impl Optimizer {
    /// `scale` multiplies every step size (use `1 / rows` for per-sample
    /// step sizes on summed gradients, 1 for raw ones).
    pub fn new(config: OptimizerConfig, scale: f64, beta0: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!("step scale {scale}")));
        }
        if beta0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial model"));
        }
        Ok(Self {
            config,
            scale,
            prev: beta0.clone(),
            query: beta0.clone(),
            beta: beta0,
            t: 0,
        })
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Point at which the next gradient must be evaluated.
    pub fn query_point(&self) -> &[f64] {
        &self.query
    }

    /// Number of steps taken.
    pub fn iteration(&self) -> usize {
        self.t
    }

    /// Current step size, already scaled.
    pub fn step_size(&self) -> f64 {
        match self.config.method {
            Method::Nag => self.config.eta * self.scale,
            Method::DecayingGd => {
                self.config.c1 / ((self.t + 1) as f64 + self.config.c2) * self.scale
            }
        }
    }

    /// Applies a gradient evaluated at [`Optimizer::query_point`].
    pub fn step(&mut self, g: &[f64]) -> Result<()> {
        if g.len() != self.beta.len() {
            return Err(Error::DimensionMismatch(format!(
                "gradient of length {} for {} coefficients",
                g.len(),
                self.beta.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration: self.t });
        }
        let step = self.step_size();
        let next: Vec<f64> = self
            .query
            .iter()
            .zip(g)
            .map(|(q, gi)| q - step * gi)
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration: self.t });
        }
        self.prev = core::mem::replace(&mut self.beta, next);
        self.t += 1;
        self.query = match self.config.method {
            Method::Nag => {
                let momentum = (self.t as f64 - 1.0) / (self.t as f64 + 2.0);
                self.beta
                    .iter()
                    .zip(&self.prev)
                    .map(|(b, p)| b + momentum * (b - p))
                    .collect()
            }
            Method::DecayingGd => self.beta.clone(),
        };
        Ok(())
    }
}
