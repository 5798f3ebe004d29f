//! `floquet-lie`: Floquet analysis of periodic Lie systems from JSON configs.

mod config;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use floquet_lie::euler::{reconstruction_phases, rigid_body_family};
use floquet_lie::floquet::monodromy;
use floquet_lie::integrator::solve_fundamental_with;
use floquet_lie::lie::LogStatus;
use floquet_lie::parallel::Execution;
use floquet_lie::phases::{split_phases, PhaseConfig};
use floquet_lie::selftest::{format_table, run_selftest, SelftestOptions};
use floquet_lie::FloquetError;

use config::{AnalysisConfig, ConfigError, Requirement};
use report::{
    AnalyzeReport, Check, ErrorBody, ErrorRecord, MonodromyDoc, PhasesDoc, Provenance,
    RigidBodyReport, SweepDoc,
};

#[derive(Debug, Parser)]
#[command(
    name = "floquet-lie",
    version,
    about = "Floquet analysis of periodic Lie systems on SO(3) and SL(2,R)"
)]
struct Cli {
    /// Worker threads for the data-parallel stages (0 = one per core).
    #[arg(long, global = true, env = "FLOQUET_LIE_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monodromy, log phase and its dynamic/geometric splitting.
    Analyze(RunArgs),
    /// Per-s table of k, k_dyn and k_geom as CSV.
    Sweep(RunArgs),
    /// Reconstruction phases of the free rigid body.
    Rigidbody(RunArgs),
    /// Built-in invariant suite; prints a pass/fail table.
    Selftest {
        /// Flip the sign of ad* inside the suite (mutation canary).
        #[arg(long, hide = true)]
        inject_ad_star_flip: bool,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override a tolerance, e.g. `splitting=1e-7`. Repeatable.
    #[arg(long = "tolerance-override", value_name = "KEY=VAL")]
    tolerance_override: Vec<String>,
}

enum Failure {
    Config(ConfigError),
    Pipeline {
        error: FloquetError,
        monodromy: Option<MonodromyDoc>,
    },
    Checks(Vec<Check>),
    Io(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<FloquetError> for Failure {
    fn from(error: FloquetError) -> Self {
        Failure::Pipeline {
            error,
            monodromy: None,
        }
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Pipeline { .. } | Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Checks(_) => 3,
        }
    }

    fn record(self, command: &str) -> ErrorRecord {
        let mut rec = ErrorRecord {
            command: command.into(),
            error: ErrorBody {
                kind: String::new(),
                message: String::new(),
                field: None,
                s: None,
            },
            monodromy: None,
            failed_checks: Vec::new(),
        };
        match self {
            Failure::Config(e) => rec.error = ErrorBody::config(&e),
            Failure::Pipeline { error, monodromy } => {
                rec.error = ErrorBody::pipeline(&error);
                rec.monodromy = monodromy;
            }
            Failure::Checks(checks) => {
                rec.error.kind = "ToleranceExceeded".into();
                rec.error.message = checks
                    .iter()
                    .map(|c| format!("{}: {:.3e} > {:.3e}", c.name, c.residual, c.tolerance))
                    .collect::<Vec<_>>()
                    .join("; ");
                rec.failed_checks = checks;
            }
            Failure::Io(e) => {
                rec.error.kind = "IoError".into();
                rec.error.message = format!("{e:#}");
            }
        }
        rec
    }
}

fn configure_threads(threads: usize) -> Execution {
    #[cfg(feature = "parallel")]
    {
        if threads == 1 {
            return Execution::Sequential;
        }
        if threads > 1 {
            // Only fails if a pool already exists, which cannot happen here.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
        Execution::Parallel
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Execution::Sequential
    }
}

fn load(args: &RunArgs, need: Requirement) -> Result<AnalysisConfig, ConfigError> {
    let mut cfg = config::load(&args.config)?;
    config::apply_overrides(&mut cfg, &args.tolerance_override)?;
    cfg.validate(need)?;
    Ok(cfg)
}

fn phase_config(cfg: &AnalysisConfig, exec: Execution) -> PhaseConfig {
    PhaseConfig {
        n_t: cfg.grid.n_t,
        n_s: cfg.grid.n_s,
        homotopy: cfg.homotopy,
        tolerances: cfg.tolerances.resolve(),
        exec,
    }
}

/// Creates the output directory and clears the error record of an earlier run.
fn create_out(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| anyhow::anyhow!("cannot create {}: {e}", dir.display()))?;
    let stale = dir.join("error.json");
    if stale.exists() {
        std::fs::remove_file(&stale)?;
    }
    Ok(())
}

fn failed(checks: &[Check]) -> Option<Failure> {
    let bad: Vec<Check> = checks.iter().filter(|c| !c.passed).cloned().collect();
    (!bad.is_empty()).then_some(Failure::Checks(bad))
}

/// Shared front half of `analyze` and `sweep`.
fn run_pipeline(
    cfg: &AnalysisConfig,
    exec: Execution,
) -> Result<floquet_lie::phases::PhaseAnalysis, Failure> {
    let curve = cfg.curve()?;
    let tol = cfg.tolerances.resolve();
    // Classify the monodromy on its own first so that it is part of the
    // error record when the splitting cannot be carried out.
    let single = solve_fundamental_with(&curve, cfg.grid.n_t, tol.drift)?;
    let classified = monodromy(&single)?;
    let mono = MonodromyDoc::new(&classified);
    if classified.log.status == LogStatus::NotInImage {
        return Err(Failure::Pipeline {
            error: FloquetError::UniformReducibilityViolated { s: 1.0 },
            monodromy: Some(mono),
        });
    }
    match split_phases(&curve, &phase_config(cfg, exec)) {
        Ok(a) => Ok(a),
        Err(error) => Err(Failure::Pipeline {
            error,
            monodromy: Some(mono),
        }),
    }
}

fn analyze(args: &RunArgs, exec: Execution) -> Result<(), Failure> {
    let cfg = load(args, Requirement::Curve)?;
    let analysis = run_pipeline(&cfg, exec)?;
    let r = &analysis.report;
    let tol = cfg.tolerances.resolve();
    let checks = vec![Check::new(
        "splitting k = k_dyn + k_geom",
        r.splitting_residual,
        tol.splitting,
    )];
    let group = analysis.factor.group();
    let doc = AnalyzeReport {
        command: "analyze",
        monodromy: MonodromyDoc::new(&analysis.monodromy),
        phases: PhasesDoc::new(r),
        checks: checks.clone(),
        sweep: r.rows.iter().map(SweepDoc::new).collect(),
        provenance: Provenance::new(group, r),
        config: cfg.clone(),
    };
    report::write_json(&args.out.join(&cfg.output.report), &doc)?;
    failed(&checks).map_or(Ok(()), Err)
}

fn sweep(args: &RunArgs, exec: Execution) -> Result<(), Failure> {
    let cfg = load(args, Requirement::Curve)?;
    let analysis = run_pipeline(&cfg, exec)?;
    let rows = &analysis.report.rows;
    report::write_sweep_csv(&args.out.join(&cfg.output.sweep_csv), rows)?;
    let tol = cfg.tolerances.resolve().splitting;
    let worst = rows
        .iter()
        .map(|r| r.splitting_residual)
        .fold(0.0, f64::max);
    failed(&[Check::new("splitting on every row", worst, tol)]).map_or(Ok(()), Err)
}

fn rigidbody(args: &RunArgs, exec: Execution) -> Result<(), Failure> {
    let cfg = load(args, Requirement::RigidBody)?;
    let rb = cfg.rigid_body.expect("validated");
    let tol = cfg.tolerances.resolve();
    let fam = rigid_body_family(
        rb.inertia,
        rb.radius,
        rb.theta_max,
        cfg.grid.n_s,
        cfg.grid.n_t,
        exec,
    )?;
    let analysis = reconstruction_phases(&fam, tol, exec)?;
    report::write_orbit_csv(&args.out.join(&cfg.output.orbit_csv), &fam)?;
    let doc = RigidBodyReport::new(cfg.clone(), &fam, &analysis, tol.splitting);
    report::write_json(&args.out.join(&cfg.output.report), &doc)?;
    failed(&doc.checks).map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = configure_threads(cli.threads);
    let (name, args, result) = match &cli.command {
        Command::Selftest {
            inject_ad_star_flip,
        } => {
            let checks = run_selftest(SelftestOptions {
                flip_ad_star_sign: *inject_ad_star_flip,
            });
            print!("{}", format_table(&checks));
            let failures = checks.iter().filter(|c| !c.passed).count();
            if failures == 0 {
                println!("all {} checks passed", checks.len());
                return ExitCode::SUCCESS;
            }
            println!("{failures} of {} checks failed", checks.len());
            return ExitCode::from(1);
        }
        Command::Analyze(a) => (
            "analyze",
            a,
            create_out(&a.out)
                .map_err(Failure::from)
                .and_then(|_| analyze(a, exec)),
        ),
        Command::Sweep(a) => (
            "sweep",
            a,
            create_out(&a.out)
                .map_err(Failure::from)
                .and_then(|_| sweep(a, exec)),
        ),
        Command::Rigidbody(a) => (
            "rigidbody",
            a,
            create_out(&a.out)
                .map_err(Failure::from)
                .and_then(|_| rigidbody(a, exec)),
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let code = failure.exit_code();
            let record = failure.record(name);
            eprintln!("error: {}", record.error.message);
            let path = args.out.join("error.json");
            if let Err(e) = report::write_json(&path, &record) {
                eprintln!("error: could not write {}: {e:#}", path.display());
            }
            ExitCode::from(code)
        }
    }
}
