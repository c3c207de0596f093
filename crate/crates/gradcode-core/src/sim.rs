//! Deterministic simulation of synchronous distributed gradient descent.
//!
//! One aggregator, `n` workers, simulated seconds instead of wall clock.
//! In every iteration each worker starts at time 0 of the round (plus any
//! injected delay), processes its partitions at a cost proportional to their
//! row count, and pays a fixed `comm_time` per message. The aggregator
//! consumes arrivals in `(time, worker, message kind)` order and closes the
//! round as soon as its strategy's condition is met:
//!
//! | strategy       | waits for                                        | gradient      |
//! |----------------|--------------------------------------------------|---------------|
//! | `Naive`        | all `n` workers                                  | exact         |
//! | `IgnoreS(s)`   | the first `n − s` workers                        | partial sum   |
//! | `Coded`        | the first `n − s` coded messages                 | exact, decoded|
//! | `PartialCoded` | all `n` naive sums and any `n − s` coded messages| exact         |
//!
//! Partial gradients are computed on the real data, so the gradient handed
//! to the optimizer is whatever the aggregator could actually assemble.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::codec::{CodeKind, DecodeCache, GradientCode, SurvivorSet};
use crate::error::{Error, Result};
use crate::learn::{self, Dataset, Optimizer, OptimizerConfig};
use crate::numerics::{self, Rng, DEFAULT_TOL};
use crate::partial::TwoStagePlan;

/// Relative tolerance for the exact-gradient self-check.
pub const EXACTNESS_RTOL: f64 = 1e-6;

/// Lognormal σ for which 5% of draws exceed five times the median
/// (`ln 5 / z_0.95`).
pub const DEFAULT_JITTER_SIGMA: f64 = 0.978_4;

/// How the aggregator turns worker messages into a gradient.
#[derive(Clone, Debug, PartialEq)]
pub enum Strategy {
    Naive { n: usize },
    IgnoreStragglers { n: usize, s: usize },
    Coded(GradientCode),
    PartialCoded(TwoStagePlan),
}

impl Strategy {
    pub fn n(&self) -> usize {
        match self {
            Strategy::Naive { n } | Strategy::IgnoreStragglers { n, .. } => *n,
            Strategy::Coded(code) => code.n(),
            Strategy::PartialCoded(plan) => plan.n(),
        }
    }

    /// Stragglers tolerated by the strategy.
    pub fn s(&self) -> usize {
        match self {
            Strategy::Naive { .. } => 0,
            Strategy::IgnoreStragglers { s, .. } => *s,
            Strategy::Coded(code) => code.s(),
            Strategy::PartialCoded(plan) => plan.s(),
        }
    }

    pub fn partition_count(&self) -> usize {
        match self {
            Strategy::Naive { n } | Strategy::IgnoreStragglers { n, .. } => *n,
            Strategy::Coded(code) => code.k(),
            Strategy::PartialCoded(plan) => plan.total_partitions(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Strategy::Naive { .. } => "naive".to_string(),
            Strategy::IgnoreStragglers { s, .. } => format!("ignore-s{s}"),
            Strategy::Coded(code) => format!("{}-s{}", code.kind(), code.s()),
            Strategy::PartialCoded(plan) => format!(
                "partial-{}-s{}-a{}",
                plan.coded().kind(),
                plan.s(),
                plan.alpha()
            ),
        }
    }

    /// Extra data processed relative to an unreplicated split:
    /// `n × (per-worker share) − 1`.
    pub fn replication_overhead(&self) -> f64 {
        match self {
            Strategy::Naive { .. } | Strategy::IgnoreStragglers { .. } => 0.0,
            Strategy::Coded(code) => {
                let held: usize = crate::codec::density_check(code)
                    .column_densities
                    .iter()
                    .sum();
                held as f64 / code.k() as f64 - 1.0
            }
            Strategy::PartialCoded(plan) => plan.per_worker_fraction() * plan.n() as f64 - 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Strategy::Naive { n } if *n == 0 => Err(Error::InvalidParameter(
                "naive strategy needs n >= 1".into(),
            )),
            Strategy::IgnoreStragglers { n, s } if *n == 0 || s >= n => {
                Err(Error::InvalidParameter(format!(
                    "ignore strategy needs 0 <= s < n, got n = {n}, s = {s}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Partitions each worker processes in its first and second stage.
    fn stages(&self) -> Result<Vec<[Vec<usize>; 2]>> {
        (0..self.n())
            .map(|w| match self {
                Strategy::Naive { .. } | Strategy::IgnoreStragglers { .. } => Ok([vec![w], vec![]]),
                Strategy::Coded(code) => Ok([code.assignment(w)?, vec![]]),
                Strategy::PartialCoded(plan) => Ok([
                    plan.naive_assignment(w)?.collect(),
                    plan.coded_assignment(w)?,
                ]),
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Jitter {
    None,
    /// Multiplicative factor `exp(σ·z)`, `z` standard normal, on compute time.
    LogNormal {
        sigma: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatencyModel {
    /// Seconds for one worker to process `1/n` of the training rows, i.e. the
    /// per-worker compute time of the naive split.
    pub compute_time_per_partition: f64,
    /// Seconds per message.
    pub comm_time: f64,
    pub jitter: Jitter,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            compute_time_per_partition: 1.0,
            comm_time: 0.1,
            jitter: Jitter::LogNormal {
                sigma: DEFAULT_JITTER_SIGMA,
            },
        }
    }
}

impl LatencyModel {
    fn validate(&self) -> Result<()> {
        let sigma_ok = match self.jitter {
            Jitter::None => true,
            Jitter::LogNormal { sigma } => sigma.is_finite() && sigma >= 0.0,
        };
        if !(self.compute_time_per_partition.is_finite()
            && self.compute_time_per_partition >= 0.0
            && self.comm_time.is_finite()
            && self.comm_time >= 0.0
            && sigma_ok)
        {
            return Err(Error::InvalidParameter(format!(
                "bad latency model {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StragglerMode {
    None,
    FixedSet(Vec<usize>),
    /// `count` workers drawn uniformly without replacement every iteration.
    RandomPerIteration(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StragglerKind {
    /// Extra seconds before the worker starts; `f64::INFINITY` never answers.
    FullDelay(f64),
    /// Compute runs `alpha` times slower.
    PartialSlowdown(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StragglerPolicy {
    pub mode: StragglerMode,
    pub kind: StragglerKind,
}

impl StragglerPolicy {
    pub fn none() -> Self {
        Self {
            mode: StragglerMode::None,
            kind: StragglerKind::FullDelay(0.0),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match &self.mode {
            StragglerMode::None => {}
            StragglerMode::FixedSet(ws) => {
                SurvivorSet::new(ws.iter().copied(), n)?;
            }
            StragglerMode::RandomPerIteration(c) if *c > n => {
                return Err(Error::InvalidParameter(format!(
                    "{c} random stragglers among {n} workers"
                )))
            }
            StragglerMode::RandomPerIteration(_) => {}
        }
        match self.kind {
            StragglerKind::FullDelay(extra) if extra.is_nan() || extra < 0.0 => Err(
                Error::InvalidParameter(format!("straggler delay must be >= 0, got {extra}")),
            ),
            StragglerKind::PartialSlowdown(alpha) if !(alpha.is_finite() && alpha > 1.0) => {
                Err(Error::InvalidAlpha(alpha))
            }
            _ => Ok(()),
        }
    }

    fn select(&self, n: usize, rng: &mut Rng) -> Vec<usize> {
        match &self.mode {
            StragglerMode::None => Vec::new(),
            StragglerMode::FixedSet(ws) => {
                let mut ws = ws.clone();
                ws.sort_unstable();
                ws
            }
            StragglerMode::RandomPerIteration(c) => {
                let mut ws = rand::seq::index::sample(rng, n, *c).into_vec();
                ws.sort_unstable();
                ws
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum MessageKind {
    /// The only message of single-stage strategies.
    Gradient,
    /// First-stage sum over naive partitions.
    Naive,
    /// Second-stage coded combination.
    Coded,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arrival {
    /// Seconds after the round started; infinite when it never arrives.
    pub time: f64,
    pub worker: usize,
    pub kind: MessageKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientKind {
    Exact,
    PartialSum,
}

/// What happened in one simulated round.
#[derive(Clone, Debug, PartialEq)]
pub struct Round {
    pub gradient: Vec<f64>,
    /// Seconds from round start until the aggregator had what it needed.
    pub duration: f64,
    pub stragglers: Vec<usize>,
    /// Workers whose single or coded message was used; `None` means all.
    pub survivors: Option<SurvivorSet>,
    pub gradient_kind: GradientKind,
    /// Every scheduled arrival, in processing order.
    pub arrivals: Vec<Arrival>,
}

/// Independent seeds for every random stream of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedBundle {
    pub scheme: u64,
    pub data: u64,
    pub latency: u64,
    pub straggler: u64,
}

impl SeedBundle {
    /// Sub-seeds at fixed offsets 0..=3 from `base`.
    pub fn from_base(base: u64) -> Self {
        Self {
            scheme: base,
            data: base.wrapping_add(1),
            latency: base.wrapping_add(2),
            straggler: base.wrapping_add(3),
        }
    }
}

/// Stateful simulator of one run's rounds.
#[derive(Clone, Debug)]
pub struct Simulator {
    strategy: Strategy,
    latency: LatencyModel,
    policy: StragglerPolicy,
    data: Dataset,
    stages: Vec<[Vec<usize>; 2]>,
    stage_rows: Vec<[usize; 2]>,
    latency_rng: Rng,
    straggler_rng: Rng,
    cache: DecodeCache,
    check_exact: bool,
    iteration: usize,
}

impl Simulator {
    /// `data` is re-partitioned into the strategy's partition count.
    pub fn new(
        strategy: Strategy,
        latency: LatencyModel,
        policy: StragglerPolicy,
        data: Dataset,
        latency_seed: u64,
        straggler_seed: u64,
    ) -> Result<Self> {
        strategy.validate()?;
        latency.validate()?;
        policy.validate(strategy.n())?;
        let data = data.with_partitions(strategy.partition_count())?;
        let stages = strategy.stages()?;
        let rows_of = |parts: &Vec<usize>| -> usize {
            parts.iter().map(|&p| data.partitions()[p].len()).sum()
        };
        let stage_rows = stages
            .iter()
            .map(|[a, b]| [rows_of(a), rows_of(b)])
            .collect();
        Ok(Self {
            strategy,
            latency,
            policy,
            data,
            stages,
            stage_rows,
            latency_rng: Rng::seed_from_u64(latency_seed),
            straggler_rng: Rng::seed_from_u64(straggler_seed),
            cache: DecodeCache::new(),
            check_exact: false,
            iteration: 0,
        })
    }

    /// Verify every exact round against a single-pass full gradient.
    pub fn with_exactness_check(mut self, on: bool) -> Self {
        self.check_exact = on;
        self
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn decode_cache(&self) -> &DecodeCache {
        &self.cache
    }

    /// Arrival schedule for one round. Draws the stragglers, then one jitter
    /// factor per worker.
    fn schedule(&mut self) -> (Vec<usize>, Vec<Arrival>) {
        let n = self.strategy.n();
        let stragglers = self.policy.select(n, &mut self.straggler_rng);
        let jitter: Vec<f64> = match self.latency.jitter {
            Jitter::None => vec![1.0; n],
            Jitter::LogNormal { sigma } => (0..n)
                .map(|_| libm::exp(sigma * self.latency_rng.normal()))
                .collect(),
        };
        let per_row = self.latency.compute_time_per_partition * n as f64 / self.data.rows() as f64;
        let two_stage = matches!(self.strategy, Strategy::PartialCoded(_));

        let mut arrivals = Vec::with_capacity(2 * n);
        for (w, &factor) in jitter.iter().enumerate() {
            let straggling = stragglers.binary_search(&w).is_ok();
            let (start, slow) = match (straggling, self.policy.kind) {
                (true, StragglerKind::FullDelay(extra)) => (extra, 1.0),
                (true, StragglerKind::PartialSlowdown(alpha)) => (0.0, alpha),
                (false, _) => (0.0, 1.0),
            };
            let rate = per_row * factor * slow;
            let [r1, r2] = self.stage_rows[w];
            let first = start + r1 as f64 * rate + self.latency.comm_time;
            if two_stage {
                let second = start + (r1 + r2) as f64 * rate + self.latency.comm_time;
                arrivals.push(Arrival {
                    time: first,
                    worker: w,
                    kind: MessageKind::Naive,
                });
                arrivals.push(Arrival {
                    time: second,
                    worker: w,
                    kind: MessageKind::Coded,
                });
            } else {
                arrivals.push(Arrival {
                    time: first,
                    worker: w,
                    kind: MessageKind::Gradient,
                });
            }
        }
        arrivals.sort_by(|a, b| {
            a.time
                .total_cmp(&b.time)
                .then(a.worker.cmp(&b.worker))
                .then(a.kind.cmp(&b.kind))
        });
        (stragglers, arrivals)
    }

    /// Runs one round with the model at `beta`.
    pub fn run_iteration(&mut self, beta: &[f64]) -> Result<Round> {
        let iteration = self.iteration;
        let n = self.strategy.n();
        let s = self.strategy.s();
        let (stragglers, arrivals) = self.schedule();

        // which messages the aggregator consumes, and when it is done
        let (needed_first, needed_coded) = match self.strategy {
            Strategy::Naive { .. } => (n, 0),
            Strategy::IgnoreStragglers { .. } | Strategy::Coded(_) => (n - s, 0),
            Strategy::PartialCoded(_) => (n, n - s),
        };
        let mut used_first = Vec::new();
        let mut used_coded = Vec::new();
        let mut duration = None;
        for a in arrivals.iter().filter(|a| a.time.is_finite()) {
            match a.kind {
                MessageKind::Gradient | MessageKind::Naive if used_first.len() < needed_first => {
                    used_first.push(a.worker)
                }
                MessageKind::Coded if used_coded.len() < needed_coded => used_coded.push(a.worker),
                _ => {}
            }
            if used_first.len() == needed_first && used_coded.len() == needed_coded {
                duration = Some(a.time);
                break;
            }
        }
        let Some(duration) = duration else {
            return Err(Error::StarvedIteration {
                iteration,
                arrived: used_first.len() + used_coded.len(),
                needed: needed_first + needed_coded,
            });
        };

        let partials: Vec<Vec<f64>> = (0..self.data.partition_count())
            .map(|j| learn::partial_gradient(&self.data, j, beta))
            .collect::<Result<_>>()?;
        let p = beta.len();

        let (gradient, survivors, gradient_kind) = match &self.strategy {
            Strategy::Naive { .. } => {
                let mut g = vec![0.0; p];
                for part in &partials[..n] {
                    numerics::axpy(1.0, part, &mut g);
                }
                (g, None, GradientKind::Exact)
            }
            Strategy::IgnoreStragglers { .. } => {
                let survivors = SurvivorSet::new(used_first, n)?;
                let mut g = vec![0.0; p];
                for &w in survivors.indices() {
                    numerics::axpy(1.0, &partials[w], &mut g);
                }
                (g, Some(survivors), GradientKind::PartialSum)
            }
            Strategy::Coded(code) => {
                let survivors = SurvivorSet::new(used_first, n)?;
                let row = self.cache.get_or_decode(code, &survivors, DEFAULT_TOL)?;
                let messages = survivors
                    .indices()
                    .iter()
                    .map(|&w| code.encode(w, &partials))
                    .collect::<Result<Vec<_>>>()?;
                (
                    row.combine(&messages)?,
                    Some(survivors),
                    GradientKind::Exact,
                )
            }
            Strategy::PartialCoded(plan) => {
                let code = plan.coded();
                let mut g = vec![0.0; p];
                for w in 0..n {
                    for &part in &self.stages[w][0] {
                        numerics::axpy(1.0, &partials[part], &mut g);
                    }
                }
                let offset = plan.naive_partitions_total();
                let coded_partials = &partials[offset..offset + code.k()];
                let survivors = SurvivorSet::new(used_coded, n)?;
                let row = self.cache.get_or_decode(code, &survivors, DEFAULT_TOL)?;
                let messages = survivors
                    .indices()
                    .iter()
                    .map(|&w| code.encode(w, coded_partials))
                    .collect::<Result<Vec<_>>>()?;
                numerics::axpy(1.0, &row.combine(&messages)?, &mut g);
                (g, Some(survivors), GradientKind::Exact)
            }
        };

        if self.check_exact && gradient_kind == GradientKind::Exact {
            let full = learn::full_gradient(&self.data, beta)?;
            let relative_error = relative_error(&gradient, &full);
            if relative_error > EXACTNESS_RTOL {
                return Err(Error::ExactnessViolation {
                    iteration,
                    relative_error,
                });
            }
        }

        self.iteration += 1;
        Ok(Round {
            gradient,
            duration,
            stragglers,
            survivors,
            gradient_kind,
            arrivals,
        })
    }
}

/// `‖a − b‖₂ / ‖b‖₂` (absolute when `b = 0`).
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = numerics::norm2(b);
    let err = numerics::norm2(&diff);
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// Strategy description resolved into a [`Strategy`] once `n` and the scheme
/// seed are known.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StrategySpec {
    Naive,
    IgnoreStragglers {
        s: usize,
    },
    Coded {
        kind: CodeKind,
        s: usize,
    },
    PartialCoded {
        kind: CodeKind,
        s: usize,
        alpha: f64,
    },
}

impl StrategySpec {
    pub fn build(&self, n: usize, scheme_seed: u64) -> Result<Strategy> {
        Ok(match *self {
            StrategySpec::Naive => Strategy::Naive { n },
            StrategySpec::IgnoreStragglers { s } => Strategy::IgnoreStragglers { n, s },
            StrategySpec::Coded { kind, s } => Strategy::Coded(match kind {
                CodeKind::FracRep => GradientCode::frac(n, s)?,
                CodeKind::CycRep => GradientCode::cyclic(n, s, scheme_seed)?,
                CodeKind::Naive => GradientCode::naive(n)?,
                CodeKind::Custom => {
                    return Err(Error::InvalidParameter(
                        "custom codes must be supplied as a built strategy".into(),
                    ))
                }
            }),
            StrategySpec::PartialCoded { kind, s, alpha } => {
                Strategy::PartialCoded(TwoStagePlan::new(n, s, alpha, kind, scheme_seed)?)
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataSpec {
    pub d: usize,
    pub p: usize,
    pub train_fraction: f64,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            d: 10_000,
            p: 100,
            train_fraction: 0.8,
        }
    }
}

/// Synthetic data split into training and holdout rows.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedData {
    pub train: Dataset,
    pub holdout: Dataset,
    pub beta_star: Vec<f64>,
}

/// Generates the dataset and the holdout split from one seeded stream.
pub fn prepare_data(spec: &DataSpec, seed: u64) -> Result<PreparedData> {
    let mut rng = Rng::seed_from_u64(seed);
    let (data, beta_star) = learn::gen_synthetic(&mut rng, spec.d, spec.p)?;
    let (train, holdout) = data.split_holdout(&mut rng, spec.train_fraction)?;
    Ok(PreparedData {
        train,
        holdout,
        beta_star,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub label: Option<String>,
    pub n: usize,
    pub strategy: StrategySpec,
    pub latency: LatencyModel,
    pub policy: StragglerPolicy,
    /// Step sizes per sample; the trainer divides by the training row count.
    pub optimizer: OptimizerConfig,
    pub data: DataSpec,
    pub iterations: usize,
    /// Holdout AUC every this many iterations (and after the last); 0 = only
    /// after the last.
    pub auc_every: usize,
    pub seeds: SeedBundle,
    /// Recompute the full gradient every exact round and fail on mismatch.
    pub check_exact: bool,
    /// Keep `β` after every iteration in the result.
    pub keep_iterates: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationTrace {
    /// 1-based.
    pub iteration: usize,
    /// Round length in simulated seconds.
    pub duration: f64,
    /// Cumulative simulated clock at the end of the round.
    pub clock: f64,
    pub stragglers: Vec<usize>,
    pub survivors: Option<SurvivorSet>,
    pub gradient_kind: GradientKind,
    /// Training loss after the update.
    pub loss: f64,
    pub auc: Option<f64>,
    pub arrivals: Vec<Arrival>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub label: String,
    pub strategy: String,
    pub n: usize,
    pub seeds: SeedBundle,
    pub data: DataSpec,
    pub replication_overhead: f64,
    pub traces: Vec<IterationTrace>,
    pub iterates: Vec<Vec<f64>>,
    pub final_beta: Vec<f64>,
    pub final_auc: f64,
}

impl RunResult {
    pub fn total_time(&self) -> f64 {
        self.traces.last().map_or(0.0, |t| t.clock)
    }

    pub fn final_loss(&self) -> f64 {
        self.traces.last().map_or(f64::NAN, |t| t.loss)
    }

    /// First 1-based iteration whose loss is at or below `threshold`.
    pub fn iterations_to(&self, threshold: f64) -> Option<usize> {
        self.traces
            .iter()
            .find(|t| t.loss <= threshold)
            .map(|t| t.iteration)
    }

    pub fn time_to(&self, threshold: f64) -> Option<f64> {
        self.traces
            .iter()
            .find(|t| t.loss <= threshold)
            .map(|t| t.clock)
    }
}

pub fn run_training(config: &TrainingConfig) -> Result<RunResult> {
    let prepared = prepare_data(&config.data, config.seeds.data)?;
    run_training_on(config, &prepared)
}

/// Like [`run_training`] on already generated data (which must come from
/// `config.data` and `config.seeds.data`).
pub fn run_training_on(config: &TrainingConfig, prepared: &PreparedData) -> Result<RunResult> {
    let strategy = config.strategy.build(config.n, config.seeds.scheme)?;
    let strategy_label = strategy.label();
    let replication_overhead = strategy.replication_overhead();
    let mut sim = Simulator::new(
        strategy,
        config.latency,
        config.policy.clone(),
        prepared.train.clone(),
        config.seeds.latency,
        config.seeds.straggler,
    )?
    .with_exactness_check(config.check_exact);

    let rows = prepared.train.rows() as f64;
    let mut opt = Optimizer::new(
        config.optimizer,
        1.0 / rows,
        vec![0.0; prepared.train.features()],
    )?;
    let holdout_auc = |beta: &[f64]| -> Result<f64> {
        learn::auc(
            &learn::scores(&prepared.holdout, beta)?,
            prepared.holdout.labels(),
        )
    };

    let mut clock = 0.0;
    let mut traces = Vec::with_capacity(config.iterations);
    let mut iterates = Vec::new();
    for t in 0..config.iterations {
        let round = sim.run_iteration(opt.query_point())?;
        opt.step(&round.gradient)
            .map_err(|_| Error::Diverged { iteration: t + 1 })?;
        clock += round.duration;
        let loss = learn::loss(sim.data(), opt.beta())?;
        if !loss.is_finite() {
            return Err(Error::Diverged { iteration: t + 1 });
        }
        let last = t + 1 == config.iterations;
        let auc = if last || (config.auc_every > 0 && (t + 1) % config.auc_every == 0) {
            Some(holdout_auc(opt.beta())?)
        } else {
            None
        };
        if config.keep_iterates {
            iterates.push(opt.beta().to_vec());
        }
        traces.push(IterationTrace {
            iteration: t + 1,
            duration: round.duration,
            clock,
            stragglers: round.stragglers,
            survivors: round.survivors,
            gradient_kind: round.gradient_kind,
            loss,
            auc,
            arrivals: round.arrivals,
        });
    }
    let final_auc = holdout_auc(opt.beta())?;
    Ok(RunResult {
        label: config
            .label
            .clone()
            .unwrap_or_else(|| strategy_label.clone()),
        strategy: strategy_label,
        n: config.n,
        seeds: config.seeds,
        data: config.data,
        replication_overhead,
        traces,
        iterates,
        final_beta: opt.beta().to_vec(),
        final_auc,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub strategy: String,
    pub iterations: usize,
    pub total_time: f64,
    pub mean_iteration_time: f64,
    pub final_loss: f64,
    pub final_auc: f64,
    pub replication_overhead: f64,
    pub loss_threshold: f64,
    pub iterations_to_threshold: Option<usize>,
    pub time_to_threshold: Option<f64>,
}

/// One run's state at an iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesRow {
    pub iteration: usize,
    pub label: String,
    pub duration: f64,
    pub clock: f64,
    pub loss: f64,
    pub auc: Option<f64>,
}

/// One run's latest completed iteration at a point of a shared time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeRow {
    pub time: f64,
    pub label: String,
    pub iterations_done: usize,
    pub loss: Option<f64>,
    pub auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub summary: Vec<SummaryRow>,
    pub series: Vec<SeriesRow>,
    pub time_grid: Vec<TimeRow>,
}

/// Points in the shared time grid, including zero.
pub const TIME_GRID_POINTS: usize = 101;

/// Lines up runs that share a dataset. The loss threshold is the worst of
/// the runs' best losses, i.e. the lowest level every run reaches.
pub fn compare_runs(runs: &[RunResult]) -> Result<Comparison> {
    let first = runs
        .first()
        .ok_or_else(|| Error::MismatchedConfigs("no runs to compare".into()))?;
    for r in runs {
        if r.data != first.data || r.seeds.data != first.seeds.data {
            return Err(Error::MismatchedConfigs(format!(
                "`{}` and `{}` use different datasets",
                first.label, r.label
            )));
        }
    }
    let threshold = runs
        .iter()
        .map(|r| {
            r.traces
                .iter()
                .map(|t| t.loss)
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::NEG_INFINITY, f64::max);

    let summary = runs
        .iter()
        .map(|r| SummaryRow {
            label: r.label.clone(),
            strategy: r.strategy.clone(),
            iterations: r.traces.len(),
            total_time: r.total_time(),
            mean_iteration_time: if r.traces.is_empty() {
                0.0
            } else {
                r.total_time() / r.traces.len() as f64
            },
            final_loss: r.final_loss(),
            final_auc: r.final_auc,
            replication_overhead: r.replication_overhead,
            loss_threshold: threshold,
            iterations_to_threshold: r.iterations_to(threshold),
            time_to_threshold: r.time_to(threshold),
        })
        .collect();

    let series = runs
        .iter()
        .flat_map(|r| {
            r.traces.iter().map(|t| SeriesRow {
                iteration: t.iteration,
                label: r.label.clone(),
                duration: t.duration,
                clock: t.clock,
                loss: t.loss,
                auc: t.auc,
            })
        })
        .collect();

    let horizon = runs.iter().map(RunResult::total_time).fold(0.0, f64::max);
    let mut time_grid = Vec::with_capacity(TIME_GRID_POINTS * runs.len());
    for g in 0..TIME_GRID_POINTS {
        let time = horizon * g as f64 / (TIME_GRID_POINTS - 1) as f64;
        for r in runs {
            let done = r.traces.partition_point(|t| t.clock <= time);
            let latest = done.checked_sub(1).map(|i| &r.traces[i]);
            let auc = r.traces[..done].iter().rev().find_map(|t| t.auc);
            time_grid.push(TimeRow {
                time,
                label: r.label.clone(),
                iterations_done: done,
                loss: latest.map(|t| t.loss),
                auc,
            });
        }
    }
    Ok(Comparison {
        summary,
        series,
        time_grid,
    })
}
