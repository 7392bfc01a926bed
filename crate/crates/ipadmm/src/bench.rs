//! Benchmark runner: regenerates seeded instances, runs the baseline and
//! indefinite-proximal methods over a grid, and emits rows with per-pair
//! iteration ratios.

use std::io::Write as IoWrite;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::instance::{generate_instance, ChiMode, InstanceSpec};
use crate::solver::{run, SolveStatus, SolverConfig, Strategy, TraceOptions};

/// Default desk-scale benchmark grid; the production-scale dimensions stay
/// reachable through explicit --m/--n flags.
pub const DESK_GRID: [(usize, usize); 5] =
    [(200, 100), (200, 200), (400, 200), (400, 400), (800, 400)];

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BenchRow {
    pub m: usize,
    pub n: usize,
    pub chi_mode: String,
    pub method: String,
    pub tau: f64,
    pub sigma: f64,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub primal_rel: f64,
    pub dual_rel: f64,
    pub restarts: usize,
    pub wall_ms: u64,
    /// iPADMM iterations / paired sPADMM iterations; blank on the baseline.
    pub ratio_vs_baseline: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub grid: Vec<(usize, usize)>,
    pub methods: Vec<Strategy>,
    pub taus: Vec<f64>,
    pub sigma: f64,
    pub chi_mode: ChiMode,
    pub seeds: Vec<u64>,
    pub tol: f64,
    pub max_iter: usize,
    /// When set, each run writes a line-delimited JSON trace to
    /// `{prefix}_{m}x{n}_{method}_tau{tau}_seed{seed}.jsonl`.
    pub trace_prefix: Option<std::path::PathBuf>,
}

fn validate_plan(plan: &BenchPlan) -> Result<()> {
    if plan.methods.is_empty() {
        return Err(SolverError::Usage("no methods selected".into()));
    }
    if plan.grid.is_empty() {
        return Err(SolverError::Usage("empty benchmark grid".into()));
    }
    if plan.seeds.is_empty() {
        return Err(SolverError::Usage("no seeds selected".into()));
    }
    for method in &plan.methods {
        match method {
            Strategy::Spadmm => {}
            Strategy::IpadmmS1 | Strategy::IpadmmS2 => {
                if plan.chi_mode != ChiMode::Zero {
                    return Err(SolverError::Usage(format!(
                        "{} pairs with --chi 0",
                        method.name()
                    )));
                }
            }
            Strategy::IpadmmS3 => {
                if plan.chi_mode != ChiMode::TwoVarrho {
                    return Err(SolverError::Usage(
                        "ipadmm-s3 pairs with --chi 2rho".into(),
                    ));
                }
            }
            Strategy::Ex42 { .. } | Strategy::Ex43 { .. } => {
                return Err(SolverError::Usage(format!(
                    "{} is a solve-only method, not a benchmark method",
                    method.name()
                )));
            }
        }
    }
    Ok(())
}

/// Runs every (cell, seed, tau, method) combination to the requested
/// tolerance. Paired rows share the instance; non-convergence is recorded
/// in-row and the benchmark continues.
pub fn run_benchmark(plan: &BenchPlan) -> Result<Vec<BenchRow>> {
    validate_plan(plan)?;
    let mut rows: Vec<BenchRow> = Vec::new();

    for &(m, n) in &plan.grid {
        for &seed in &plan.seeds {
            let spec = InstanceSpec::new(m, n, plan.chi_mode, seed);
            let problem = generate_instance(&spec)?;
            for &tau in &plan.taus {
                let mut baseline_iters: Option<usize> = None;
                // baseline first so pairs can be resolved in one pass
                let mut ordered = plan.methods.clone();
                ordered.sort_by_key(|s| !matches!(s, Strategy::Spadmm));
                for method in &ordered {
                    let jsonl_path = plan.trace_prefix.as_ref().map(|prefix| {
                        let mut name = prefix.as_os_str().to_os_string();
                        name.push(format!(
                            "_{m}x{n}_{}_tau{tau}_seed{seed}.jsonl",
                            method.name()
                        ));
                        std::path::PathBuf::from(name)
                    });
                    let config = SolverConfig {
                        sigma: plan.sigma,
                        tau,
                        alpha: None,
                        tol: plan.tol,
                        max_iter: plan.max_iter,
                        strategy: *method,
                        restart: Default::default(),
                        eta: crate::strategy::DEFAULT_ETA,
                        gamma: None,
                        seed,
                        trace: TraceOptions {
                            record: false,
                            jsonl_path,
                            ergodic_checkpoints: Vec::new(),
                        },
                        initial: None,
                    };
                    let start = Instant::now();
                    let result = run(&problem, &config)?;
                    let wall_ms = start.elapsed().as_millis() as u64;
                    let converged = result.status == SolveStatus::Converged;
                    if matches!(method, Strategy::Spadmm) && converged {
                        baseline_iters = Some(result.iterations);
                    }
                    let ratio = if matches!(method, Strategy::Spadmm) {
                        None
                    } else {
                        baseline_iters
                            .filter(|_| converged)
                            .map(|b| result.iterations as f64 / b as f64)
                    };
                    rows.push(BenchRow {
                        m,
                        n,
                        chi_mode: plan.chi_mode.name().to_string(),
                        method: method.name().to_string(),
                        tau,
                        sigma: plan.sigma,
                        seed,
                        iterations: result.iterations,
                        converged,
                        primal_rel: result.primal_rel,
                        dual_rel: result.dual_rel,
                        restarts: result.restarts,
                        wall_ms,
                        ratio_vs_baseline: ratio,
                    });
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<OutputFormat> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(SolverError::Usage(format!(
                "format must be csv or json, got '{other}'"
            ))),
        }
    }
}

const CSV_HEADER: [&str; 14] = [
    "m",
    "n",
    "chi_mode",
    "method",
    "tau",
    "sigma",
    "seed",
    "iterations",
    "converged",
    "primal_rel",
    "dual_rel",
    "restarts",
    "wall_ms",
    "ratio_vs_baseline",
];

pub fn emit_results(rows: &[BenchRow], format: OutputFormat, path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(SolverError::Usage("no rows to emit".into()));
    }
    match format {
        OutputFormat::Csv => {
            let mut writer = csv::Writer::from_path(path)?;
            writer.write_record(CSV_HEADER)?;
            for row in rows {
                writer.write_record(&[
                    row.m.to_string(),
                    row.n.to_string(),
                    row.chi_mode.clone(),
                    row.method.clone(),
                    row.tau.to_string(),
                    row.sigma.to_string(),
                    row.seed.to_string(),
                    row.iterations.to_string(),
                    row.converged.to_string(),
                    row.primal_rel.to_string(),
                    row.dual_rel.to_string(),
                    row.restarts.to_string(),
                    row.wall_ms.to_string(),
                    row.ratio_vs_baseline
                        .map(|r| r.to_string())
                        .unwrap_or_default(),
                ])?;
            }
            writer.flush()?;
        }
        OutputFormat::Json => {
            let mut file = std::fs::File::create(path)?;
            let text = serde_json::to_string_pretty(rows)?;
            file.write_all(text.as_bytes())?;
            file.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Parses rows back from a CSV emitted by [`emit_results`].
pub fn parse_csv(path: &Path) -> Result<Vec<BenchRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        let get = |i: usize| -> Result<&str> {
            r.get(i)
                .ok_or_else(|| SolverError::Csv(format!("missing column {i}")))
        };
        let parse_f = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| SolverError::Csv(format!("bad float '{s}': {e}")))
        };
        let parse_u = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|e| SolverError::Csv(format!("bad int '{s}': {e}")))
        };
        let ratio_raw = get(13)?;
        rows.push(BenchRow {
            m: parse_u(get(0)?)?,
            n: parse_u(get(1)?)?,
            chi_mode: get(2)?.to_string(),
            method: get(3)?.to_string(),
            tau: parse_f(get(4)?)?,
            sigma: parse_f(get(5)?)?,
            seed: get(6)?
                .parse::<u64>()
                .map_err(|e| SolverError::Csv(format!("bad seed: {e}")))?,
            iterations: parse_u(get(7)?)?,
            converged: get(8)? == "true",
            primal_rel: parse_f(get(9)?)?,
            dual_rel: parse_f(get(10)?)?,
            restarts: parse_u(get(11)?)?,
            wall_ms: get(12)?
                .parse::<u64>()
                .map_err(|e| SolverError::Csv(format!("bad wall_ms: {e}")))?,
            ratio_vs_baseline: if ratio_raw.is_empty() {
                None
            } else {
                Some(parse_f(ratio_raw)?)
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<BenchRow> {
        vec![
            BenchRow {
                m: 8,
                n: 10,
                chi_mode: "0".into(),
                method: "spadmm".into(),
                tau: 1.618,
                sigma: 1.0,
                seed: 7,
                iterations: 120,
                converged: true,
                primal_rel: 4.2e-7,
                dual_rel: 9.9e-7,
                restarts: 0,
                wall_ms: 3,
                ratio_vs_baseline: None,
            },
            BenchRow {
                m: 8,
                n: 10,
                chi_mode: "0".into(),
                method: "ipadmm-s2".into(),
                tau: 1.618,
                sigma: 1.0,
                seed: 7,
                iterations: 60,
                converged: true,
                primal_rel: 2.0e-7,
                dual_rel: 8.0e-7,
                restarts: 1,
                wall_ms: 2,
                ratio_vs_baseline: Some(0.5),
            },
        ]
    }

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join("ipadmm_bench_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rows.csv");
        let rows = sample_rows();
        emit_results(&rows, OutputFormat::Csv, &path).unwrap();
        let back = parse_csv(&path).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn ratio_populated_only_on_ipadmm_rows() {
        let rows = sample_rows();
        assert!(rows[0].ratio_vs_baseline.is_none());
        assert_eq!(rows[1].ratio_vs_baseline, Some(0.5));
    }

    #[test]
    fn empty_inputs_are_usage_errors() {
        let plan = BenchPlan {
            grid: vec![(8, 10)],
            methods: vec![],
            taus: vec![1.0],
            sigma: 1.0,
            chi_mode: ChiMode::Zero,
            seeds: vec![1],
            tol: 1e-6,
            max_iter: 100,
            trace_prefix: None,
        };
        assert!(matches!(
            run_benchmark(&plan),
            Err(SolverError::Usage(_))
        ));
        assert!(emit_results(&[], OutputFormat::Csv, Path::new("/tmp/x.csv")).is_err());
    }

    #[test]
    fn method_chi_pairing_is_validated() {
        let mut plan = BenchPlan {
            grid: vec![(8, 10)],
            methods: vec![Strategy::IpadmmS3],
            taus: vec![1.0],
            sigma: 1.0,
            chi_mode: ChiMode::Zero,
            seeds: vec![1],
            tol: 1e-6,
            max_iter: 100,
            trace_prefix: None,
        };
        assert!(run_benchmark(&plan).is_err());
        plan.methods = vec![Strategy::IpadmmS2];
        plan.chi_mode = ChiMode::TwoVarrho;
        assert!(run_benchmark(&plan).is_err());
    }
}
