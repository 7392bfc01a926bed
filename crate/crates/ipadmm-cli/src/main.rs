//! Command-line front end: generate benchmark instances, solve problem
//! files, and run the baseline-vs-indefinite-proximal comparison grid.
//!
//! Exit codes: 0 on success, 2 on usage errors, 3 on non-convergence when
//! `--strict` is set.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ipadmm::bench::{emit_results, run_benchmark, BenchPlan, OutputFormat, DESK_GRID};
use ipadmm::instance::{generate_instance_json, problem_from_json, ChiMode, InstanceSpec, ProblemJson};
use ipadmm::solver::{run, SolveStatus, SolverConfig, Strategy, TraceOptions};
use ipadmm::SolverError;

#[derive(Parser)]
#[command(
    name = "ipadmm",
    about = "Majorized ADMM with indefinite proximal terms: instance generator, solver, and benchmark runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded random instance and write its problem JSON.
    Gen(GenArgs),
    /// Solve a problem JSON file with a chosen method.
    Solve(SolveArgs),
    /// Run the benchmark comparison over a grid of instances.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    /// Penalty mode: 0 or 2rho.
    #[arg(long, default_value = "0")]
    chi: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    input: PathBuf,
    /// One of spadmm, ipadmm-s1, ipadmm-s2, ipadmm-s3, ex42, ex43.
    #[arg(long)]
    method: String,
    #[arg(long, default_value_t = 1.618)]
    tau: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 200_000)]
    max_iter: usize,
    /// Spectral truncation level for ex42.
    #[arg(long, default_value_t = 3)]
    truncation: usize,
    /// First-block size for ex43.
    #[arg(long)]
    split: Option<usize>,
    /// Line-delimited JSON iteration trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Exit with code 3 if the run does not converge.
    #[arg(long, default_value_t = false)]
    strict: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Rows of the constraint matrix; omit both -m and -n to sweep the
    /// default desk-scale grid.
    #[arg(long, requires = "n")]
    m: Option<usize>,
    #[arg(long, requires = "m")]
    n: Option<usize>,
    /// Penalty mode: 0 or 2rho.
    #[arg(long, default_value = "0")]
    chi: String,
    /// Step length; repeat the flag to sweep (presets: 1 and 1.618).
    #[arg(long, default_values_t = vec![1.618])]
    tau: Vec<f64>,
    /// Comma-separated methods from {spadmm, ipadmm-s1, ipadmm-s2, ipadmm-s3}.
    #[arg(long)]
    method: String,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds starting at --seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 200_000)]
    max_iter: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: String,
    /// Prefix for per-run line-delimited JSON traces.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Exit with code 3 if any run does not converge.
    #[arg(long, default_value_t = false)]
    strict: bool,
}

/// Appends the dyadic non-ergodic decay series to the iteration trace
/// under its own record type.
fn append_diagnostic_records(
    path: &Path,
    result: &ipadmm::solver::SolveResult,
) -> Result<(), SolverError> {
    use std::io::Write;
    let eps: Vec<f64> = result.trace.iter().map(|r| r.eps_kkt_sq).collect();
    let series = ipadmm::diagnostics::nonergodic_tracker(&eps);
    let mut file = std::fs::OpenOptions::new().append(true).open(path)?;
    for (k, value) in series {
        let line = serde_json::json!({
            "type": "nonergodic",
            "k": k,
            "k_times_min_eps": value,
        });
        writeln!(file, "{line}")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveOutput {
    status: String,
    method: String,
    tau: f64,
    sigma: f64,
    iterations: usize,
    restarts: usize,
    primal_rel: f64,
    dual_rel: f64,
    eps_kkt_sq: f64,
    objective: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    xi: Vec<f64>,
    v: Vec<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(SolverError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, SolverError> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode, SolverError> {
    if args.m < 2 || args.n < 2 {
        return Err(SolverError::Usage("gen needs --m >= 2 and --n >= 2".into()));
    }
    let chi = ChiMode::parse(&args.chi)?;
    let spec = InstanceSpec::new(args.m, args.n, chi, args.seed);
    let json = generate_instance_json(&spec)?;
    std::fs::write(&args.out, serde_json::to_string(&json)?)?;
    println!(
        "wrote {} ({}x{}, chi mode {}, seed {})",
        args.out.display(),
        args.m,
        args.n,
        chi.name(),
        args.seed
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_strategy(name: &str, truncation: usize, split: Option<usize>) -> Result<Strategy, SolverError> {
    let base = Strategy::parse(name)?;
    Ok(match base {
        Strategy::Ex42 { .. } => Strategy::Ex42 { l: truncation },
        Strategy::Ex43 { .. } => {
            let split = split.ok_or_else(|| {
                SolverError::Usage("ex43 needs --split <first block size>".into())
            })?;
            Strategy::Ex43 { split }
        }
        other => other,
    })
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode, SolverError> {
    let text = std::fs::read_to_string(&args.input)?;
    let json: ProblemJson = serde_json::from_str(&text)?;
    let problem = problem_from_json(&json)?;
    let strategy = parse_strategy(&args.method, args.truncation, args.split)?;

    let config = SolverConfig {
        sigma: args.sigma,
        tau: args.tau,
        alpha: None,
        tol: args.tol,
        max_iter: args.max_iter,
        strategy,
        restart: Default::default(),
        eta: ipadmm::strategy::DEFAULT_ETA,
        gamma: None,
        seed: 0,
        trace: TraceOptions {
            record: args.trace.is_some(),
            jsonl_path: args.trace.clone(),
            ergodic_checkpoints: Vec::new(),
        },
        initial: None,
    };
    let result = run(&problem, &config)?;
    if let Some(trace_path) = &args.trace {
        append_diagnostic_records(trace_path, &result)?;
    }
    let status = match result.status {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIter => "max_iter",
        SolveStatus::RestartExhausted => "restart_exhausted",
    };
    let out = SolveOutput {
        status: status.to_string(),
        method: args.method.clone(),
        tau: args.tau,
        sigma: args.sigma,
        iterations: result.iterations,
        restarts: result.restarts,
        primal_rel: result.primal_rel,
        dual_rel: result.dual_rel,
        eps_kkt_sq: result.eps_kkt_sq,
        objective: result.objective,
        x: result.point.x,
        y: result.point.y,
        z: result.point.z,
        xi: result.point.xi,
        v: result.point.v,
    };
    std::fs::write(&args.out, serde_json::to_string_pretty(&out)?)?;
    println!(
        "{}: {} iterations, primal_rel {:.3e}, dual_rel {:.3e} -> {}",
        status,
        result.iterations,
        result.primal_rel,
        result.dual_rel,
        args.out.display()
    );
    if args.strict && result.status != SolveStatus::Converged {
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode, SolverError> {
    let chi = ChiMode::parse(&args.chi)?;
    let format = OutputFormat::parse(&args.format)?;
    if args.method.trim().is_empty() {
        return Err(SolverError::Usage("empty --method list".into()));
    }
    let methods = args
        .method
        .split(',')
        .map(|s| Strategy::parse(s.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    if args.seeds == 0 {
        return Err(SolverError::Usage("--seeds must be at least 1".into()));
    }
    if args.tau.is_empty() {
        return Err(SolverError::Usage("at least one --tau required".into()));
    }

    let grid = match (args.m, args.n) {
        (Some(m), Some(n)) => vec![(m, n)],
        _ => DESK_GRID.to_vec(),
    };
    let plan = BenchPlan {
        grid,
        methods,
        taus: args.tau.clone(),
        sigma: args.sigma,
        chi_mode: chi,
        seeds: (args.seed..args.seed + args.seeds).collect(),
        tol: args.tol,
        max_iter: args.max_iter,
        trace_prefix: args.trace.clone(),
    };
    let rows = run_benchmark(&plan)?;
    emit_results(&rows, format, &args.out)?;
    let nonconverged = rows.iter().filter(|r| !r.converged).count();
    println!(
        "wrote {} rows to {} ({} non-converged)",
        rows.len(),
        args.out.display(),
        nonconverged
    );
    if args.strict && nonconverged > 0 {
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}
