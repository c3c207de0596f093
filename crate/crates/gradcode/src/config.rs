//! Run configuration files and their merge with command-line flags.
//!
//! Every field is optional in the file; flags override file values and
//! defaults fill whatever is left, except seeds, which must be given.

use gradcode_core::codec::CodeKind;
use gradcode_core::learn::OptimizerConfig;
use gradcode_core::sim::{
    DataSpec, Jitter, LatencyModel, SeedBundle, StragglerKind, StragglerMode, StragglerPolicy,
    StrategySpec, TrainingConfig, DEFAULT_JITTER_SIGMA,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Default NAG step (per sample).
pub const DEFAULT_ETA: f64 = 0.1;
/// Default decaying-step constants (per sample).
pub const DEFAULT_C1: f64 = 200.0;
pub const DEFAULT_C2: f64 = 1000.0;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub straggler: Option<u64>,
}

impl Seeds {
    pub fn from_base(base: u64) -> Self {
        let b = SeedBundle::from_base(base);
        Seeds {
            scheme: Some(b.scheme),
            data: Some(b.data),
            latency: Some(b.latency),
            straggler: Some(b.straggler),
        }
    }

    fn overlay(self, top: Seeds) -> Seeds {
        Seeds {
            scheme: top.scheme.or(self.scheme),
            data: top.data.or(self.data),
            latency: top.latency.or(self.latency),
            straggler: top.straggler.or(self.straggler),
        }
    }
}

macro_rules! run_config {
    ($($(#[$doc:meta])* $field:ident: $ty:ty,)*) => {
        #[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct RunConfig {
            $(
                $(#[$doc])*
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
            #[serde(default)]
            pub seeds: Seeds,
        }

        impl RunConfig {
            /// Fields set in `top` win.
            pub fn overlay(self, top: RunConfig) -> RunConfig {
                RunConfig {
                    $($field: top.$field.or(self.$field),)*
                    seeds: self.seeds.overlay(top.seeds),
                }
            }
        }
    };
}

run_config! {
    label: String,
    n: usize,
    /// `naive`, `ignore`, `frac`, `cyc`, `partial-frac` or `partial-cyc`.
    strategy: String,
    s: usize,
    /// Slowdown bound the partial plan is designed for.
    alpha: f64,
    /// `nag` or `decaying`.
    method: String,
    eta: f64,
    c1: f64,
    c2: f64,
    compute_time: f64,
    comm_time: f64,
    /// Lognormal jitter σ; 0 disables jitter.
    jitter_sigma: f64,
    /// `none`, `fixed` or `random`.
    straggler_mode: String,
    straggler_workers: Vec<usize>,
    straggler_count: usize,
    /// `delay` or `slowdown`.
    straggler_kind: String,
    delay: f64,
    slowdown: f64,
    d: usize,
    p: usize,
    train_fraction: f64,
    iterations: usize,
    auc_every: usize,
    check_exact: bool,
}

/// A config with every field filled, plus what it resolves to.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub effective: RunConfig,
    pub training: TrainingConfig,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Fills defaults and checks cross-field constraints.
    pub fn resolve(&self) -> CliResult<Resolved> {
        let missing: Vec<&str> = [
            ("scheme", self.seeds.scheme),
            ("data", self.seeds.data),
            ("latency", self.seeds.latency),
            ("straggler", self.seeds.straggler),
        ]
        .iter()
        .filter(|(_, v)| v.is_none())
        .map(|(name, _)| *name)
        .collect();
        if !missing.is_empty() {
            return Err(invalid(format!(
                "missing seeds: {}; pass --seed-all N or set them explicitly",
                missing.join(", ")
            )));
        }
        let seeds = SeedBundle {
            scheme: self.seeds.scheme.unwrap(),
            data: self.seeds.data.unwrap(),
            latency: self.seeds.latency.unwrap(),
            straggler: self.seeds.straggler.unwrap(),
        };

        let n = self.n.unwrap_or(10);
        let s = self.s.unwrap_or(1);
        let strategy_name = self.strategy.clone().unwrap_or_else(|| "cyc".into());
        let strategy = match strategy_name.as_str() {
            "naive" => StrategySpec::Naive,
            "ignore" => StrategySpec::IgnoreStragglers { s },
            "frac" => StrategySpec::Coded {
                kind: CodeKind::FracRep,
                s,
            },
            "cyc" => StrategySpec::Coded {
                kind: CodeKind::CycRep,
                s,
            },
            "partial-frac" | "partial-cyc" => {
                let alpha = self
                    .alpha
                    .ok_or_else(|| invalid(format!("strategy `{strategy_name}` needs alpha")))?;
                let kind = if strategy_name == "partial-frac" {
                    CodeKind::FracRep
                } else {
                    CodeKind::CycRep
                };
                StrategySpec::PartialCoded { kind, s, alpha }
            }
            other => {
                return Err(invalid(format!(
                "unknown strategy `{other}` (naive, ignore, frac, cyc, partial-frac, partial-cyc)"
            )))
            }
        };

        let method_name = self.method.clone().unwrap_or_else(|| {
            if strategy_name == "ignore" {
                "decaying"
            } else {
                "nag"
            }
            .into()
        });
        let eta = self.eta.unwrap_or(DEFAULT_ETA);
        let c1 = self.c1.unwrap_or(DEFAULT_C1);
        let c2 = self.c2.unwrap_or(DEFAULT_C2);
        let optimizer = match method_name.as_str() {
            "nag" => OptimizerConfig::nag(eta),
            "decaying" => OptimizerConfig::decaying(c1, c2),
            other => return Err(invalid(format!("unknown method `{other}` (nag, decaying)"))),
        };
        optimizer.validate()?;

        let compute_time = self.compute_time.unwrap_or(1.0);
        let comm_time = self.comm_time.unwrap_or(0.1);
        let jitter_sigma = self.jitter_sigma.unwrap_or(DEFAULT_JITTER_SIGMA);
        let jitter = if jitter_sigma == 0.0 {
            Jitter::None
        } else {
            Jitter::LogNormal {
                sigma: jitter_sigma,
            }
        };

        let mode_name = self.straggler_mode.clone().unwrap_or_else(|| "none".into());
        let workers = self.straggler_workers.clone();
        let count = self.straggler_count.unwrap_or(s);
        let mode = match mode_name.as_str() {
            "none" => StragglerMode::None,
            "fixed" => match &workers {
                Some(ws) if !ws.is_empty() => StragglerMode::FixedSet(ws.clone()),
                _ => return Err(invalid("straggler_mode `fixed` needs straggler_workers")),
            },
            "random" => StragglerMode::RandomPerIteration(count),
            other => {
                return Err(invalid(format!(
                    "unknown straggler_mode `{other}` (none, fixed, random)"
                )))
            }
        };
        let kind_name = self
            .straggler_kind
            .clone()
            .unwrap_or_else(|| "delay".into());
        let delay = self.delay.unwrap_or(2.0 * compute_time);
        let slowdown = self.slowdown.or(self.alpha);
        let kind = match kind_name.as_str() {
            "delay" => StragglerKind::FullDelay(delay),
            "slowdown" => StragglerKind::PartialSlowdown(
                slowdown.ok_or_else(|| invalid("straggler_kind `slowdown` needs slowdown"))?,
            ),
            other => {
                return Err(invalid(format!(
                    "unknown straggler_kind `{other}` (delay, slowdown)"
                )))
            }
        };

        let data = DataSpec {
            d: self.d.unwrap_or(10_000),
            p: self.p.unwrap_or(100),
            train_fraction: self.train_fraction.unwrap_or(0.8),
        };
        let iterations = self.iterations.unwrap_or(100);
        let auc_every = self.auc_every.unwrap_or(10);
        let check_exact = self.check_exact.unwrap_or(false);

        let training = TrainingConfig {
            label: self.label.clone(),
            n,
            strategy,
            latency: LatencyModel {
                compute_time_per_partition: compute_time,
                comm_time,
                jitter,
            },
            policy: StragglerPolicy { mode, kind },
            optimizer,
            data,
            iterations,
            auc_every,
            seeds,
            check_exact,
            keep_iterates: false,
        };

        let nag = method_name == "nag";
        let effective = RunConfig {
            label: self.label.clone(),
            n: Some(n),
            strategy: Some(strategy_name.clone()),
            s: Some(s),
            alpha: self.alpha,
            method: Some(method_name),
            eta: nag.then_some(eta),
            c1: (!nag).then_some(c1),
            c2: (!nag).then_some(c2),
            compute_time: Some(compute_time),
            comm_time: Some(comm_time),
            jitter_sigma: Some(jitter_sigma),
            straggler_mode: Some(mode_name.clone()),
            straggler_workers: if mode_name == "fixed" { workers } else { None },
            straggler_count: (mode_name == "random").then_some(count),
            straggler_kind: (mode_name != "none").then_some(kind_name.clone()),
            delay: (mode_name != "none" && kind_name == "delay").then_some(delay),
            slowdown: (mode_name != "none" && kind_name == "slowdown").then(|| slowdown.unwrap()),
            d: Some(data.d),
            p: Some(data.p),
            train_fraction: Some(data.train_fraction),
            iterations: Some(iterations),
            auc_every: Some(auc_every),
            check_exact: Some(check_exact),
            seeds: self.seeds.clone(),
        };
        Ok(Resolved {
            effective,
            training,
        })
    }
}
