use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gradcode_core::codec::{self, CodeKind, DEFAULT_ENUMERATION_BUDGET};
use gradcode_core::numerics::DEFAULT_TOL;
use gradcode_core::partial::{self, TwoStagePlan};
use gradcode_core::sim::{self, RunResult};
use gradcode_core::GradientCode;

use crate::config::{RunConfig, Seeds};
use crate::error::{CliError, CliResult};
use crate::{report, scheme};

#[derive(Parser, Debug)]
#[command(
    name = "gradcode",
    version,
    about = "Gradient coding schemes and straggler simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build, verify or inspect scheme files.
    Scheme {
        #[command(subcommand)]
        action: SchemeCommand,
    },
    /// Plan a two-stage scheme for stragglers at most `alpha` times slower.
    Plan(PlanArgs),
    /// Simulate one training run and write its per-iteration CSV.
    Simulate(SimulateArgs),
    /// Simulate several runs on the same data and write comparison tables.
    Compare(CompareArgs),
}

#[derive(Subcommand, Debug)]
enum SchemeCommand {
    /// Construct a scheme and write it as a scheme file.
    Build {
        #[arg(long)]
        kind: CodeKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        s: usize,
        /// Seed for the random matrix of cyclic schemes.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the span condition, row/column densities and, for cyclic
    /// schemes, the MDS property of the generating matrix.
    Verify {
        file: PathBuf,
        /// Maximum number of survivor sets to enumerate.
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u128,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Print a scheme's parameters, assignments and densities.
    Inspect { file: PathBuf },
}

#[derive(Args, Debug)]
struct PlanArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    s: usize,
    #[arg(long)]
    alpha: f64,
    /// Coded stage construction: frac or cyc.
    #[arg(long, default_value = "cyc")]
    kind: CodeKind,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Run parameters; each overrides the same field of a config file.
#[derive(Args, Debug, Default)]
struct RunFlags {
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// naive, ignore, frac, cyc, partial-frac or partial-cyc.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// nag or decaying.
    #[arg(long)]
    method: Option<String>,
    /// NAG step per sample.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    /// Seconds for one worker to process 1/n of the training rows.
    #[arg(long)]
    compute_time: Option<f64>,
    /// Seconds per message.
    #[arg(long)]
    comm_time: Option<f64>,
    /// Lognormal jitter on compute time; 0 disables it.
    #[arg(long)]
    jitter_sigma: Option<f64>,
    /// none, fixed or random.
    #[arg(long)]
    straggler_mode: Option<String>,
    #[arg(long, value_delimiter = ',')]
    straggler_workers: Option<Vec<usize>>,
    #[arg(long)]
    straggler_count: Option<usize>,
    /// delay or slowdown.
    #[arg(long)]
    straggler_kind: Option<String>,
    /// Extra start delay of a straggler, in seconds.
    #[arg(long)]
    delay: Option<f64>,
    /// Compute slowdown factor of a straggler.
    #[arg(long)]
    slowdown: Option<f64>,
    /// Number of generated samples.
    #[arg(long)]
    d: Option<usize>,
    /// Number of features.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    auc_every: Option<usize>,
    /// Recompute the full gradient each exact round and fail on mismatch.
    #[arg(long)]
    check_exact: bool,
    /// Derive all four seeds from N (scheme N, data N+1, latency N+2,
    /// straggler N+3).
    #[arg(long, value_name = "N")]
    seed_all: Option<u64>,
    #[arg(long)]
    seed_scheme: Option<u64>,
    #[arg(long)]
    seed_data: Option<u64>,
    #[arg(long)]
    seed_latency: Option<u64>,
    #[arg(long)]
    seed_straggler: Option<u64>,
}

impl RunFlags {
    fn to_config(&self) -> RunConfig {
        let derived = self.seed_all.map(Seeds::from_base).unwrap_or_default();
        let explicit = Seeds {
            scheme: self.seed_scheme,
            data: self.seed_data,
            latency: self.seed_latency,
            straggler: self.seed_straggler,
        };
        let base = RunConfig {
            seeds: derived,
            ..Default::default()
        };
        base.overlay(RunConfig {
            label: self.label.clone(),
            n: self.n,
            strategy: self.strategy.clone(),
            s: self.s,
            alpha: self.alpha,
            method: self.method.clone(),
            eta: self.eta,
            c1: self.c1,
            c2: self.c2,
            compute_time: self.compute_time,
            comm_time: self.comm_time,
            jitter_sigma: self.jitter_sigma,
            straggler_mode: self.straggler_mode.clone(),
            straggler_workers: self.straggler_workers.clone(),
            straggler_count: self.straggler_count,
            straggler_kind: self.straggler_kind.clone(),
            delay: self.delay,
            slowdown: self.slowdown,
            d: self.d,
            p: self.p,
            train_fraction: self.train_fraction,
            iterations: self.iterations,
            auc_every: self.auc_every,
            check_exact: self.check_exact.then_some(true),
            seeds: explicit,
        })
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Run config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: RunFlags,
    /// Output directory for run.csv and config.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Member run configs (repeatable). Without any, compares frac, cyc,
    /// ignore and naive under the shared flags.
    #[arg(long)]
    config: Vec<PathBuf>,
    #[command(flatten)]
    flags: RunFlags,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `args` (including the program name) and runs the command,
/// writing reports to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            write!(out, "{e}")?;
            return Ok(());
        }
        Err(e) => {
            let text = e.render().to_string();
            let text = text.strip_prefix("error: ").unwrap_or(&text);
            return Err(CliError::Usage(text.to_string()));
        }
    };
    match cli.command {
        Command::Scheme { action } => match action {
            SchemeCommand::Build {
                kind,
                n,
                s,
                seed,
                out: path,
            } => scheme_build(kind, n, s, seed, path.as_deref(), out),
            SchemeCommand::Verify { file, budget, tol } => scheme_verify(&file, budget, tol, out),
            SchemeCommand::Inspect { file } => scheme_inspect(&file, out),
        },
        Command::Plan(args) => plan(&args, out),
        Command::Simulate(args) => simulate(&args, out),
        Command::Compare(args) => compare(&args, out),
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<fs::File> {
    fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_code(path: &Path) -> CliResult<GradientCode> {
    scheme::import_code(&read(path)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn scheme_build(
    kind: CodeKind,
    n: usize,
    s: usize,
    seed: Option<u64>,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let code = match kind {
        CodeKind::Naive if s != 0 => {
            return Err(CliError::Usage("naive schemes take --s 0".into()));
        }
        CodeKind::Naive => GradientCode::naive(n)?,
        CodeKind::FracRep => GradientCode::frac(n, s)?,
        CodeKind::CycRep => {
            let seed = seed.ok_or_else(|| CliError::Usage("cyc schemes need --seed".into()))?;
            GradientCode::cyclic(n, s, seed)?
        }
        CodeKind::Custom => {
            return Err(CliError::Usage(
                "custom schemes are imported from files, not built".into(),
            ))
        }
    };
    let text = scheme::export_code(&code);
    match path {
        Some(p) => {
            write_file(p, &text)?;
            let density = codec::density_check(&code);
            writeln!(
                out,
                "{kind} scheme n={n} s={s}: row density {}..{}, bound {}; written to {}",
                density.min_row_density,
                density.max_row_density,
                density.bound,
                p.display()
            )?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn scheme_verify(path: &Path, budget: u128, tol: f64, out: &mut dyn Write) -> CliResult<()> {
    let code = load_code(path)?;
    writeln!(
        out,
        "scheme: {} n={} k={} s={}",
        code.kind(),
        code.n(),
        code.k(),
        code.s()
    )?;
    let span = codec::verify_bspan_with_budget(&code, tol, budget)?;
    let density = codec::density_check(&code);
    writeln!(
        out,
        "b-span: {} ({} survivor sets checked, {} failures, max residual {:.3e})",
        if span.ok { "ok" } else { "FAILED" },
        span.checked,
        span.failures.len(),
        span.max_residual
    )?;
    writeln!(
        out,
        "density: rows {}..{}, columns {}..{}, bound {}, equality {}",
        density.min_row_density,
        density.max_row_density,
        density.column_densities.iter().min().copied().unwrap_or(0),
        density.column_densities.iter().max().copied().unwrap_or(0),
        density.bound,
        if density.meets_bound_with_equality {
            "yes"
        } else {
            "no"
        }
    )?;
    let mut mds_ok = true;
    if code.kind() == CodeKind::CycRep {
        match code.h() {
            Some(h) => {
                let mds = codec::check_mds(&h, budget)?;
                mds_ok = mds.ok;
                writeln!(
                    out,
                    "h mds: {} ({} column sets checked, {} failures)",
                    if mds.ok { "ok" } else { "FAILED" },
                    mds.checked,
                    mds.failures.len()
                )?;
            }
            None => writeln!(out, "h mds: not checked (no h_seed recorded)")?,
        }
    }
    if !span.ok {
        let first = &span.failures[0];
        return Err(CliError::Numerical(format!(
            "span condition fails for {} of {} survivor sets, first {:?}",
            span.failures.len(),
            span.checked,
            first
        )));
    }
    if !mds_ok {
        return Err(CliError::Numerical("generating matrix is not MDS".into()));
    }
    writeln!(out, "robust to any {} straggler(s)", code.s())?;
    Ok(())
}

fn scheme_inspect(path: &Path, out: &mut dyn Write) -> CliResult<()> {
    let code = load_code(path)?;
    writeln!(
        out,
        "kind {}  n {}  k {}  s {}{}",
        code.kind(),
        code.n(),
        code.k(),
        code.s(),
        code.h_seed()
            .map(|s| format!("  h_seed {s}"))
            .unwrap_or_default()
    )?;
    for w in 0..code.n() {
        let parts = code.assignment(w)?;
        let coeffs: Vec<String> = parts
            .iter()
            .map(|&j| format!("{}", code.b().get(w, j)))
            .collect();
        writeln!(
            out,
            "worker {w}: partitions {parts:?} coefficients [{}]",
            coeffs.join(", ")
        )?;
    }
    let density = codec::density_check(&code);
    writeln!(
        out,
        "column densities {:?}; lower bound {}",
        density.column_densities, density.bound
    )?;
    Ok(())
}

fn plan(args: &PlanArgs, out: &mut dyn Write) -> CliResult<()> {
    if args.kind == CodeKind::CycRep && args.seed.is_none() {
        return Err(CliError::Usage("a cyc coded stage needs --seed".into()));
    }
    let plan = TwoStagePlan::new(
        args.n,
        args.s,
        args.alpha,
        args.kind,
        args.seed.unwrap_or(0),
    )?;
    let formula = partial::load_fraction(args.n, args.s, args.alpha)?;
    writeln!(
        out,
        "n {}  s {}  alpha {}",
        plan.n(),
        plan.s(),
        plan.alpha()
    )?;
    writeln!(
        out,
        "naive partitions per worker: {}",
        plan.naive_per_worker()
    )?;
    writeln!(
        out,
        "partitions: {} ({} naive + {} coded)",
        plan.total_partitions(),
        plan.naive_partitions_total(),
        plan.coded_partitions_total()
    )?;
    writeln!(
        out,
        "per-worker fraction: {:.6}",
        plan.per_worker_fraction()
    )?;
    writeln!(out, "load fraction (continuous): {formula:.6}")?;
    writeln!(
        out,
        "replication overhead: {:.6}",
        plan.per_worker_fraction() * plan.n() as f64 - 1.0
    )?;
    writeln!(out, "timing slack: {}", plan.timing_slack())?;
    if let Some(p) = &args.out {
        write_file(p, &scheme::export_plan(&plan))?;
        writeln!(out, "written to {}", p.display())?;
    }
    Ok(())
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => RunConfig::from_json(&read(p)?)
            .map_err(|e| CliError::Validation(format!("{}: {e}", p.display()))),
        None => Ok(RunConfig::default()),
    }
}

fn summary_line(run: &RunResult) -> String {
    format!(
        "{}: total sim time {:.4} s, final loss {:.6}, final AUC {:.4}",
        run.label,
        run.total_time(),
        run.final_loss(),
        run.final_auc
    )
}

fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(args.config.as_deref())?.overlay(args.flags.to_config());
    let resolved = cfg.resolve()?;
    create_dir(&args.out)?;
    write_file(&args.out.join("config.json"), &resolved.effective.to_json())?;
    let run = sim::run_training(&resolved.training)?;
    report::write_run_csv(create(&args.out.join("run.csv"))?, &run)?;
    writeln!(out, "{}", summary_line(&run))?;
    Ok(())
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// The four-way comparison: both coded schemes and naive with NAG, the
/// ignore baseline with decaying steps.
const BUNDLE: [(&str, &str); 4] = [
    ("frac", "nag"),
    ("cyc", "nag"),
    ("ignore", "decaying"),
    ("naive", "nag"),
];

fn compare(args: &CompareArgs, out: &mut dyn Write) -> CliResult<()> {
    let flags = args.flags.to_config();
    let members: Vec<RunConfig> = if args.config.is_empty() {
        if flags.strategy.is_some() || flags.method.is_some() || flags.label.is_some() {
            return Err(CliError::Usage(
                "--strategy, --method and --label apply to single runs; \
                 pass member configs with --config to customize them"
                    .into(),
            ));
        }
        BUNDLE
            .iter()
            .map(|(strategy, method)| {
                flags.clone().overlay(RunConfig {
                    label: Some(strategy.to_string()),
                    strategy: Some(strategy.to_string()),
                    method: Some(method.to_string()),
                    ..Default::default()
                })
            })
            .collect()
    } else {
        args.config
            .iter()
            .map(|p| Ok(load_config(Some(p))?.overlay(flags.clone())))
            .collect::<CliResult<_>>()?
    };
    let mut resolved = members
        .iter()
        .map(RunConfig::resolve)
        .collect::<CliResult<Vec<_>>>()?;

    // unique labels, so that per-run files do not collide
    let mut seen = std::collections::BTreeMap::<String, usize>::new();
    for r in &mut resolved {
        let base = r.training.label.clone().unwrap_or_else(|| {
            r.training
                .strategy
                .build(r.training.n, r.training.seeds.scheme)
                .map(|s| s.label())
                .unwrap_or_else(|_| "run".into())
        });
        let count = seen.entry(base.clone()).or_insert(0);
        *count += 1;
        let label = if *count == 1 {
            base
        } else {
            format!("{base}-{count}")
        };
        r.training.label = Some(label.clone());
        r.effective.label = Some(label);
    }

    let first = &resolved[0].training;
    if let Some(other) = resolved
        .iter()
        .find(|r| r.training.data != first.data || r.training.seeds.data != first.seeds.data)
    {
        return Err(CliError::Validation(format!(
            "`{}` and `{}` use different datasets",
            first.label.as_deref().unwrap_or_default(),
            other.training.label.as_deref().unwrap_or_default()
        )));
    }
    let prepared = sim::prepare_data(&first.data, first.seeds.data)?;
    let runs: Vec<RunResult> = std::thread::scope(|scope| {
        let handles: Vec<_> = resolved
            .iter()
            .map(|r| scope.spawn(|| sim::run_training_on(&r.training, &prepared)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect::<Result<_, _>>()
    })?;
    let cmp = sim::compare_runs(&runs)?;

    create_dir(&args.out.join("runs"))?;
    create_dir(&args.out.join("configs"))?;
    for (r, run) in resolved.iter().zip(&runs) {
        let stem = file_stem(&run.label);
        write_file(
            &args.out.join("configs").join(format!("{stem}.json")),
            &r.effective.to_json(),
        )?;
        report::write_run_csv(
            create(&args.out.join("runs").join(format!("{stem}.csv")))?,
            run,
        )?;
    }
    report::write_summary_csv(create(&args.out.join("summary.csv"))?, &cmp)?;
    report::write_series_csv(create(&args.out.join("series.csv"))?, &cmp)?;
    report::write_time_grid_csv(create(&args.out.join("auc_vs_time.csv"))?, &cmp)?;

    writeln!(
        out,
        "{:<16} {:>12} {:>12} {:>14} {:>8} {:>10} {:>10}",
        "label", "total_s", "s/iter", "final_loss", "auc", "overhead", "iters@thr"
    )?;
    for row in &cmp.summary {
        writeln!(
            out,
            "{:<16} {:>12.3} {:>12.4} {:>14.6} {:>8.4} {:>10.4} {:>10}",
            row.label,
            row.total_time,
            row.mean_iteration_time,
            row.final_loss,
            row.final_auc,
            row.replication_overhead,
            row.iterations_to_threshold
                .map(|i| i.to_string())
                .unwrap_or_else(|| "-".into())
        )?;
    }
    Ok(())
}
