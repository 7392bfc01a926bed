//! The majorized indefinite-proximal ADMM iteration: x-subproblem,
//! y-subproblem, multiplier update, KKT-based stopping, exact dual
//! extraction, safeguarded restarts, and ergodic averaging.
//!
//! One solve is a single-threaded deterministic state machine; the problem
//! and the proximal choice are read-only, so independent solves can run
//! concurrently.

use std::io::Write as IoWrite;
use std::path::PathBuf;

use crate::error::{Result, SolverError};
use crate::linalg::{axpy, dot, norm2, norm_inf};
use crate::problem::{kkt_residual_rel, CompositeProblem, KKTPoint, NonsmoothBlock};
use crate::strategy::{
    build_aggressive, build_example41, build_example42, build_example43, build_spadmm_baseline,
    escalate, AggressiveMode, Metric, ProximalChoice, DEFAULT_ETA, DEFAULT_GAMMA2, DEFAULT_GAMMA3,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Spadmm,
    IpadmmS1,
    IpadmmS2,
    IpadmmS3,
    Ex42 { l: usize },
    Ex43 { split: usize },
}

impl Strategy {
    pub fn parse(name: &str) -> Result<Strategy> {
        Ok(match name {
            "spadmm" => Strategy::Spadmm,
            "ipadmm-s1" => Strategy::IpadmmS1,
            "ipadmm-s2" => Strategy::IpadmmS2,
            "ipadmm-s3" => Strategy::IpadmmS3,
            "ex42" => Strategy::Ex42 { l: 3 },
            "ex43" => Strategy::Ex43 { split: 0 },
            other => {
                return Err(SolverError::Usage(format!(
                    "unknown method '{other}' (expected spadmm, ipadmm-s1, ipadmm-s2, ipadmm-s3, ex42, ex43)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Spadmm => "spadmm",
            Strategy::IpadmmS1 => "ipadmm-s1",
            Strategy::IpadmmS2 => "ipadmm-s2",
            Strategy::IpadmmS3 => "ipadmm-s3",
            Strategy::Ex42 { .. } => "ex42",
            Strategy::Ex43 { .. } => "ex43",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RestartPolicy {
    pub enabled: bool,
    pub sum_threshold: f64,
    pub decay_numerator: f64,
    pub decay_exponent: f64,
    pub escalation_factor: f64,
    pub max_restarts: usize,
    /// A restart additionally requires the monitored residual to have
    /// stopped decaying: the sum of the last `divergence_window` residuals
    /// must not be below the sum of the window before it. The thresholded
    /// check alone trips on the start-up transient of perfectly convergent
    /// runs (the first monitored residual of a moderate instance already
    /// exceeds the sum threshold), so the run loop only acts on it once the
    /// windowed residual mass fails to shrink.
    pub divergence_window: usize,
}

impl Default for RestartPolicy {
    fn default() -> Self {
        RestartPolicy {
            enabled: true,
            sum_threshold: 50.0,
            decay_numerator: 10.0,
            decay_exponent: 1.1,
            escalation_factor: 1.1,
            max_restarts: 20,
            divergence_window: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraceOptions {
    /// Keep per-iteration records in memory.
    pub record: bool,
    /// Optional line-delimited JSON trace sink.
    pub jsonl_path: Option<PathBuf>,
    /// Iteration counts at which ergodic averages are snapshotted.
    pub ergodic_checkpoints: Vec<usize>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            record: true,
            jsonl_path: None,
            ergodic_checkpoints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub sigma: f64,
    pub tau: f64,
    /// Overrides the strategy's default alpha when set (conditions only).
    pub alpha: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub strategy: Strategy,
    pub restart: RestartPolicy,
    pub eta: f64,
    pub gamma: Option<f64>,
    pub seed: u64,
    pub trace: TraceOptions,
    /// Overrides the default start (0, Pi_+(c), 0); the x and y parts must
    /// lie in the domains of p and q.
    pub initial: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

impl SolverConfig {
    pub fn new(strategy: Strategy) -> Self {
        SolverConfig {
            sigma: 1.0,
            tau: 1.618,
            alpha: None,
            tol: 1e-6,
            max_iter: 200_000,
            strategy,
            restart: RestartPolicy::default(),
            eta: DEFAULT_ETA,
            gamma: None,
            seed: 0,
            trace: TraceOptions::default(),
            initial: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma <= 0.0 {
            return Err(SolverError::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        let tau_max = crate::strategy::tau_upper_limit() + 1e-12;
        if !(self.tau > 0.0 && self.tau < tau_max) {
            return Err(SolverError::InvalidParameter(format!(
                "tau must lie in (0, (1+sqrt(5))/2), got {}",
                self.tau
            )));
        }
        if self.tol <= 0.0 {
            return Err(SolverError::InvalidParameter("tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(SolverError::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IterateState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// Cached r_hat = A*x + B*y - c + z / sigma.
    pub rhat: Vec<f64>,
    pub k: usize,
}

impl IterateState {
    pub fn initial(problem: &CompositeProblem, sigma: f64) -> Self {
        let x = vec![0.0; problem.dim_x()];
        // y0 = Pi_+(c) keeps the start inside dom(q) for the orthant block
        // when Y and Z coincide; otherwise 0 is in the domain of every
        // supported kind.
        let y = if matches!(problem.q, NonsmoothBlock::NonnegIndicator)
            && problem.dim_y() == problem.dim_z()
        {
            crate::problem::project_nonneg(&problem.c)
        } else {
            vec![0.0; problem.dim_y()]
        };
        let z = vec![0.0; problem.dim_z()];
        let mut state = IterateState {
            x,
            y,
            z,
            rhat: vec![0.0; problem.dim_z()],
            k: 0,
        };
        state.refresh_rhat(problem, sigma);
        state
    }

    pub fn from_point(problem: &CompositeProblem, sigma: f64, x: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> Self {
        let mut state = IterateState {
            x,
            y,
            z,
            rhat: vec![0.0; problem.dim_z()],
            k: 0,
        };
        state.refresh_rhat(problem, sigma);
        state
    }

    pub fn refresh_rhat(&mut self, problem: &CompositeProblem, sigma: f64) {
        let r = problem.primal_residual(&self.x, &self.y);
        self.rhat = r
            .iter()
            .zip(&self.z)
            .map(|(ri, zi)| ri + zi / sigma)
            .collect();
    }
}

/// Output of one iteration.
pub struct StepOutcome {
    pub state: IterateState,
    /// Subgradient certificate in the subdifferential of p at the new x.
    pub v: Vec<f64>,
    /// Multiplier satisfying the complementarity conditions exactly for the
    /// orthant-constrained block; z^k + sigma r^{k+1} otherwise.
    pub xi: Vec<f64>,
    /// Primal residual A*x + B*y - c at the new point.
    pub r_new: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    /// The multiplier increment tau*sigma*r^{k+1} as applied.
    pub z_step: Vec<f64>,
}

/// Solves argmin_block  nonsmooth(u) + 1/2 <u, P u> + <lin, u>
/// and returns the minimizer together with an exact subgradient certificate
/// `cert in ∂nonsmooth(minimizer)` generated alongside the solve.
fn prox_solve(
    block: &NonsmoothBlock,
    metric: &Metric,
    lin: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    match (block, metric) {
        (NonsmoothBlock::Zero, _) => {
            let mut sol = vec![0.0; lin.len()];
            let neg: Vec<f64> = lin.iter().map(|v| -v).collect();
            metric.solve(&neg, &mut sol)?;
            Ok((sol, vec![0.0; lin.len()]))
        }
        (NonsmoothBlock::L1 { weight }, Metric::ScaledIdentity { factor, .. }) => {
            let rho = *factor;
            if rho <= 0.0 {
                return Err(SolverError::InvalidMetric(
                    "l1 prox needs a positive scaled-identity metric".into(),
                ));
            }
            let t = weight / rho;
            let mut sol = vec![0.0; lin.len()];
            let mut cert = vec![0.0; lin.len()];
            for i in 0..lin.len() {
                let u = -lin[i] / rho;
                let s = u.signum() * (u.abs() - t).max(0.0);
                sol[i] = s;
                // first-order optimality of the shrinkage, generated exactly:
                // s != 0  =>  cert = weight * sign(s); s == 0 => cert = -lin
                cert[i] = if s != 0.0 { weight * s.signum() } else { -lin[i] };
            }
            Ok((sol, cert))
        }
        (NonsmoothBlock::NonnegIndicator, Metric::ScaledIdentity { factor, .. }) => {
            let rho = *factor;
            if rho <= 0.0 {
                return Err(SolverError::InvalidMetric(
                    "projection prox needs a positive scaled-identity metric".into(),
                ));
            }
            let mut sol = vec![0.0; lin.len()];
            let mut cert = vec![0.0; lin.len()];
            for i in 0..lin.len() {
                let u = -lin[i] / rho;
                if u > 0.0 {
                    sol[i] = u;
                    cert[i] = 0.0;
                } else {
                    sol[i] = 0.0;
                    cert[i] = -lin[i]; // <= 0 exactly here: normal-cone member
                }
            }
            Ok((sol, cert))
        }
        (NonsmoothBlock::L1 { weight }, Metric::BlockDiagDense(_)) => {
            let sol = coordinate_descent(metric, lin, CdKind::L1(*weight))?;
            let cert = residual_cert(metric, lin, &sol);
            Ok((sol, cert))
        }
        (NonsmoothBlock::NonnegIndicator, Metric::BlockDiagDense(_)) => {
            let sol = coordinate_descent(metric, lin, CdKind::Nonneg)?;
            let cert = residual_cert(metric, lin, &sol);
            Ok((sol, cert))
        }
        (NonsmoothBlock::Custom { prox, .. }, Metric::ScaledIdentity { factor, .. }) => {
            let sol = prox(lin, *factor);
            let cert = residual_cert(metric, lin, &sol);
            Ok((sol, cert))
        }
        (block, _) => Err(SolverError::UnsupportedSubproblem(format!(
            "nonsmooth kind '{}' has no exact solve under this metric form",
            block.kind_name()
        ))),
    }
}

/// cert = -(P sol + lin); exact optimality certificate for solved systems.
fn residual_cert(metric: &Metric, lin: &[f64], sol: &[f64]) -> Vec<f64> {
    let mut ps = vec![0.0; sol.len()];
    metric.apply(sol, &mut ps);
    ps.iter().zip(lin).map(|(a, b)| -(a + b)).collect()
}

enum CdKind {
    L1(f64),
    Nonneg,
}

/// Exact cyclic coordinate descent on
/// phi(u) = nonsmooth(u) + 1/2 <u, P u> + <lin, u> for block-diagonal dense
/// P; every 1-D step is an exact shrinkage/projection, so the iteration
/// converges to the unique minimizer of the strictly convex objective.
fn coordinate_descent(metric: &Metric, lin: &[f64], kind: CdKind) -> Result<Vec<f64>> {
    let blocks = match metric {
        Metric::BlockDiagDense(blocks) => blocks,
        _ => unreachable!("coordinate descent is only called for dense blocks"),
    };
    let n = lin.len();
    let mut u = vec![0.0; n];
    let mut grad = lin.to_vec(); // grad of the smooth part: P u + lin
    let scale: f64 = norm2(lin).max(1.0);
    let tol = 1e-13 * scale;
    let max_sweeps = 100_000;

    for _sweep in 0..max_sweeps {
        let mut max_change = 0.0f64;
        for b in blocks {
            let off = b.offset;
            let d = b.dim();
            for i in 0..d {
                let gi = off + i;
                let pii = b.matrix[(i, i)];
                if pii <= 0.0 {
                    return Err(SolverError::InvalidMetric(
                        "nonpositive diagonal in block metric".into(),
                    ));
                }
                // residual gradient without the u_i contribution
                let base = grad[gi] - pii * u[gi];
                let new_ui = match kind {
                    CdKind::L1(w) => {
                        let v = -base / pii;
                        let t = w / pii;
                        v.signum() * (v.abs() - t).max(0.0)
                    }
                    CdKind::Nonneg => (-base / pii).max(0.0),
                };
                let delta = new_ui - u[gi];
                if delta != 0.0 {
                    // update grad for the block rows
                    for j in 0..d {
                        grad[off + j] += b.matrix[(j, i)] * delta;
                    }
                    u[gi] = new_ui;
                    max_change = max_change.max(delta.abs() * pii);
                }
            }
        }
        if max_change <= tol {
            return Ok(u);
        }
    }
    Err(SolverError::SubproblemFailure(
        "coordinate descent did not reach stationarity".into(),
    ))
}

/// One iteration of the majorized iPADMM:
/// x^{k+1} = argmin p(x) + 1/2 <x, P x> + <grad f(x^k) + sigma A rhat^k - P x^k, x>
/// y^{k+1} = argmin q(y) + 1/2 <y, Q y> + <grad g(y^k) + sigma B (rhat^k + A*(x^{k+1}-x^k)) - Q y^k, y>
/// z^{k+1} = z^k + tau sigma (A*x^{k+1} + B*y^{k+1} - c).
pub fn step(
    state: &IterateState,
    problem: &CompositeProblem,
    choice: &ProximalChoice,
    config: &SolverConfig,
) -> Result<StepOutcome> {
    let sigma = config.sigma;
    let tau = config.tau;
    let nx = problem.dim_x();
    let ny = problem.dim_y();
    let nz = problem.dim_z();

    // x-subproblem linear term
    let grad_f = problem.f.gradient(&state.x);
    let mut a_rhat = vec![0.0; nx];
    problem.astar.adjoint(&state.rhat, &mut a_rhat);
    let mut px = vec![0.0; nx];
    choice.p_metric.apply(&state.x, &mut px);
    let lin_x: Vec<f64> = (0..nx)
        .map(|i| grad_f[i] + sigma * a_rhat[i] - px[i])
        .collect();
    let (x_new, v) = prox_solve(&problem.p, &choice.p_metric, &lin_x)?;

    let dx: Vec<f64> = x_new.iter().zip(&state.x).map(|(a, b)| a - b).collect();

    // y-subproblem linear term
    let mut adx = vec![0.0; nz];
    problem.astar.forward(&dx, &mut adx);
    let t_vec: Vec<f64> = state.rhat.iter().zip(&adx).map(|(r, a)| r + a).collect();
    let grad_g = problem.g.gradient(&state.y);
    let mut b_t = vec![0.0; ny];
    problem.bstar.adjoint(&t_vec, &mut b_t);
    let mut qy = vec![0.0; ny];
    choice.q_metric.apply(&state.y, &mut qy);
    let lin_y: Vec<f64> = (0..ny)
        .map(|i| grad_g[i] + sigma * b_t[i] - qy[i])
        .collect();
    let (y_new, q_cert) = prox_solve(&problem.q, &choice.q_metric, &lin_y)?;

    let dy: Vec<f64> = y_new.iter().zip(&state.y).map(|(a, b)| a - b).collect();

    // multiplier update: z^{k+1} = z^k + tau sigma r^{k+1}
    let r_new = problem.primal_residual(&x_new, &y_new);
    let z_step: Vec<f64> = r_new.iter().map(|ri| tau * sigma * ri).collect();
    let z_new: Vec<f64> = state.z.iter().zip(&z_step).map(|(zi, ui)| zi + ui).collect();
    let rhat_new: Vec<f64> = r_new
        .iter()
        .zip(&z_new)
        .map(|(ri, zi)| ri + zi / sigma)
        .collect();

    // the orthant block with an exact projection step admits the generated
    // multiplier xi = -cert, which is nonnegative and complementary to y
    // bitwise; other shapes fall back to ztilde = z^k + sigma r^{k+1}.
    let exact_xi = matches!(problem.q, NonsmoothBlock::NonnegIndicator)
        && matches!(choice.q_metric, Metric::ScaledIdentity { .. })
        && ny == nz;
    let xi: Vec<f64> = if exact_xi {
        q_cert.iter().map(|c| -c).collect()
    } else {
        state
            .z
            .iter()
            .zip(&r_new)
            .map(|(zi, ri)| zi + sigma * ri)
            .collect()
    };

    Ok(StepOutcome {
        state: IterateState {
            x: x_new,
            y: y_new,
            z: z_new,
            rhat: rhat_new,
            k: state.k + 1,
        },
        v,
        xi,
        r_new,
        dx,
        dy,
        z_step,
    })
}

/// Pure restart predicate over the monitored residual history of the
/// current run segment: triggers iff sum_{j<=k+1} R^j >= threshold and
/// R^{k+1} >= decay_numerator / (k+1)^decay_exponent.
pub fn restart_check(r_trace: &[f64], policy: &RestartPolicy) -> bool {
    match r_trace.last() {
        None => false,
        Some(&latest) => {
            let sum: f64 = r_trace.iter().sum();
            restart_check_running(sum, latest, r_trace.len(), policy)
        }
    }
}

pub fn restart_check_running(
    sum: f64,
    latest: f64,
    k_plus_1: usize,
    policy: &RestartPolicy,
) -> bool {
    sum >= policy.sum_threshold
        && latest >= policy.decay_numerator / (k_plus_1 as f64).powf(policy.decay_exponent)
}

/// Running-sum accumulator for the ergodic averages
/// xhat^k = (1/k) sum_{i=1..k} x^{i+1} (and likewise yhat, zhat over
/// ztilde^{i+1} = z^i + sigma r^{i+1}).
#[derive(Debug, Clone, Default)]
pub struct ErgodicAccumulator {
    pub count: usize,
    x_sum: Vec<f64>,
    y_sum: Vec<f64>,
    z_sum: Vec<f64>,
}

impl ErgodicAccumulator {
    pub fn add(&mut self, x: &[f64], y: &[f64], ztilde: &[f64]) {
        if self.count == 0 {
            self.x_sum = x.to_vec();
            self.y_sum = y.to_vec();
            self.z_sum = ztilde.to_vec();
        } else {
            axpy(1.0, x, &mut self.x_sum);
            axpy(1.0, y, &mut self.y_sum);
            axpy(1.0, ztilde, &mut self.z_sum);
        }
        self.count += 1;
    }

    pub fn reset(&mut self) {
        self.count = 0;
        self.x_sum.clear();
        self.y_sum.clear();
        self.z_sum.clear();
    }

    pub fn averages(&self) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        if self.count == 0 {
            return Err(SolverError::EmptyAverage);
        }
        let inv = 1.0 / self.count as f64;
        Ok((
            self.x_sum.iter().map(|v| v * inv).collect(),
            self.y_sum.iter().map(|v| v * inv).collect(),
            self.z_sum.iter().map(|v| v * inv).collect(),
        ))
    }
}

/// Full-history recomputation used to cross-check the running sums.
pub fn ergodic_averages(
    history: &[(Vec<f64>, Vec<f64>, Vec<f64>)],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut acc = ErgodicAccumulator::default();
    for (x, y, z) in history {
        acc.add(x, y, z);
    }
    acc.averages()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    RestartExhausted,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct IterRecord {
    pub k: usize,
    pub primal_rel: f64,
    pub dual_rel: f64,
    pub eps_kkt_sq: f64,
    pub r_monitor: f64,
    pub restarted: bool,
}

#[derive(Debug, Clone)]
pub struct RestartEvent {
    pub iteration: usize,
    pub old_gamma: f64,
    pub new_gamma: f64,
}

/// Running maxima of the dual-exactness violations along a run; all stay at
/// machine-precision scale for the closed-form subproblem paths.
#[derive(Debug, Clone, Default)]
pub struct DualExactness {
    /// max over iterations of max(0, -min_i xi_i)
    pub max_xi_negative: f64,
    /// max |<y, xi>|
    pub max_complementarity: f64,
    /// max (||v||_inf - weight) for the l1 block
    pub max_v_linf_excess: f64,
    /// max |v_i - weight*sign(x_i)| over nonzero x components
    pub max_v_sign_deviation: f64,
}

#[derive(Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub point: KKTPoint,
    pub iterations: usize,
    pub primal_rel: f64,
    pub dual_rel: f64,
    pub eps_kkt_sq: f64,
    pub objective: f64,
    pub trace: Vec<IterRecord>,
    pub restart_log: Vec<RestartEvent>,
    pub restarts: usize,
    pub ergodic: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    /// (k, xhat, yhat, zhat) snapshots at the requested checkpoints.
    pub ergodic_checkpoints: Vec<(usize, Vec<f64>, Vec<f64>, Vec<f64>)>,
    pub dual_exactness: DualExactness,
    /// max relative deviation of ||z^{k+1} - z^k|| from tau*sigma*||r^{k+1}||
    pub z_update_identity_dev: f64,
}

/// Per-step observation passed to an optional observer (diagnostics hooks).
pub struct StepObservation<'a> {
    /// 1-based global step count.
    pub k: usize,
    /// 1-based step count within the current run segment (resets on restart).
    pub k_run: usize,
    pub prev: &'a IterateState,
    pub next: &'a IterateState,
    pub r_new: &'a [f64],
    pub dx: &'a [f64],
    pub dy: &'a [f64],
    pub xi: &'a [f64],
    pub v: &'a [f64],
    pub primal_rel: f64,
    pub dual_rel: f64,
    pub eps_kkt_sq: f64,
    pub r_monitor: f64,
}

pub fn build_choice(problem: &CompositeProblem, config: &SolverConfig) -> Result<ProximalChoice> {
    match config.strategy {
        Strategy::Spadmm => build_spadmm_baseline(problem, config.sigma),
        Strategy::IpadmmS1 => build_example41(problem, config.sigma, config.tau),
        Strategy::IpadmmS2 => build_aggressive(
            problem,
            config.sigma,
            AggressiveMode::S2,
            config.eta,
            config.gamma.unwrap_or(DEFAULT_GAMMA2),
            problem.chi,
        ),
        Strategy::IpadmmS3 => build_aggressive(
            problem,
            config.sigma,
            AggressiveMode::S3,
            config.eta,
            config.gamma.unwrap_or(DEFAULT_GAMMA3),
            problem.chi,
        ),
        Strategy::Ex42 { l } => build_example42(problem, config.sigma, config.tau, l),
        Strategy::Ex43 { split } => build_example43(problem, config.sigma, split),
    }
}

pub fn run(problem: &CompositeProblem, config: &SolverConfig) -> Result<SolveResult> {
    run_with_observer(problem, config, &mut |_: &StepObservation| {})
}

pub fn run_with_observer(
    problem: &CompositeProblem,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&StepObservation),
) -> Result<SolveResult> {
    config.validate()?;
    problem.validate()?;
    let choice = build_choice(problem, config)?;
    run_loop(problem, config, choice, observer)
}

/// Runs with an externally constructed proximal choice instead of the one
/// the strategy tag would build.
pub fn run_with_choice(
    problem: &CompositeProblem,
    config: &SolverConfig,
    choice: ProximalChoice,
) -> Result<SolveResult> {
    config.validate()?;
    problem.validate()?;
    run_loop(problem, config, choice, &mut |_: &StepObservation| {})
}

fn run_loop(
    problem: &CompositeProblem,
    config: &SolverConfig,
    choice: ProximalChoice,
    observer: &mut dyn FnMut(&StepObservation),
) -> Result<SolveResult> {
    let mut choice = choice;
    let sigma = config.sigma;
    let tau = config.tau;
    let c_norm = norm2(&problem.c);
    let b_norm = problem.dual_scale_norm;

    let mut state = match &config.initial {
        Some((x, y, z)) => {
            IterateState::from_point(problem, sigma, x.clone(), y.clone(), z.clone())
        }
        None => IterateState::initial(problem, sigma),
    };
    let mut trace: Vec<IterRecord> = Vec::new();
    let mut restart_log: Vec<RestartEvent> = Vec::new();
    let mut jsonl = match &config.trace.jsonl_path {
        Some(p) => Some(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => None,
    };

    // Sigma_hat_f and Sigma_hat_g + sigma BB* weight the restart residual
    let sigma_hat_f = problem.f.upper_curvature.clone();
    let sigma_hat_g = problem.g.upper_curvature.clone();

    let mut best: Option<(f64, KKTPoint, f64, f64, f64)> = None; // (max_resid, point, primal, dual, eps)
    let mut ergodic = ErgodicAccumulator::default();
    let mut ergodic_checkpoints: Vec<(usize, Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut exactness = DualExactness::default();
    let mut z_dev_max = 0.0f64;

    let mut r_sum = 0.0f64; // running sum of the monitored residual (run segment)
    let mut r_prefix: Vec<f64> = vec![0.0]; // per-segment residual prefix sums
    let mut k_run = 0usize; // completed steps in the current run segment
    let mut restarts = 0usize;
    let mut status = SolveStatus::MaxIter;

    let mut wx = vec![0.0; problem.dim_x()];
    let mut wy = vec![0.0; problem.dim_y()];

    let mut k_global = 0usize;
    while k_global < config.max_iter {
        let prev_state = state;
        let outcome = step(&prev_state, problem, &choice, config)?;
        k_global += 1;
        k_run += 1;

        // monitored restart residual:
        // R = |dx|^2_{Sigma_hat_f} + |dy|^2_{Sigma_hat_g + sigma BB*} + |r|^2
        sigma_hat_f.apply(&outcome.dx, &mut wx);
        let mut r_monitor = dot(&outcome.dx, &wx);
        sigma_hat_g.apply(&outcome.dy, &mut wy);
        r_monitor += dot(&outcome.dy, &wy);
        let mut bdy = vec![0.0; problem.dim_z()];
        problem.bstar.forward(&outcome.dy, &mut bdy);
        r_monitor += sigma * dot(&bdy, &bdy);
        r_monitor += dot(&outcome.r_new, &outcome.r_new);
        r_sum += r_monitor;
        r_prefix.push(r_sum);

        // exact-complementarity bookkeeping
        let point = KKTPoint {
            x: outcome.state.x.clone(),
            y: outcome.state.y.clone(),
            z: outcome.state.z.clone(),
            xi: outcome.xi.clone(),
            v: outcome.v.clone(),
        };
        if let NonsmoothBlock::L1 { weight } = problem.p {
            exactness.max_v_linf_excess = exactness
                .max_v_linf_excess
                .max(norm_inf(&point.v) - weight);
            let mut dev = 0.0f64;
            for (xi_c, vi) in point.x.iter().zip(&point.v) {
                if *xi_c != 0.0 {
                    dev = dev.max((vi - weight * xi_c.signum()).abs());
                }
            }
            exactness.max_v_sign_deviation = exactness.max_v_sign_deviation.max(dev);
        }
        if matches!(problem.q, NonsmoothBlock::NonnegIndicator) {
            let min_xi = point.xi.iter().cloned().fold(f64::INFINITY, f64::min);
            exactness.max_xi_negative = exactness.max_xi_negative.max((-min_xi).max(0.0));
            exactness.max_complementarity = exactness
                .max_complementarity
                .max(dot(&point.y, &point.xi).abs());
        }

        // z-update identity |z^{k+1} - z^k| = tau sigma |r^{k+1}|, measured
        // on the increment the update applied (the state difference would
        // additionally pick up the representation rounding of z + step).
        let dz_norm = norm2(&outcome.z_step);
        let rhs = tau * sigma * norm2(&outcome.r_new);
        let dev = if rhs > 0.0 {
            (dz_norm - rhs).abs() / rhs
        } else {
            dz_norm
        };
        z_dev_max = z_dev_max.max(dev);

        let (primal_rel, dual_rel) = kkt_residual_rel(problem, &point, b_norm, c_norm);
        let eps = crate::problem::eps_kkt_sq(
            problem,
            &outcome.state.x,
            &outcome.state.y,
            &outcome.state.z,
        )
        .unwrap_or(f64::NAN);

        // ergodic averages skip the first step of each run segment
        if k_run >= 2 {
            let ztilde: Vec<f64> = prev_state
                .z
                .iter()
                .zip(&outcome.r_new)
                .map(|(zi, ri)| zi + sigma * ri)
                .collect();
            ergodic.add(&outcome.state.x, &outcome.state.y, &ztilde);
            if config.trace.ergodic_checkpoints.contains(&ergodic.count) {
                let (xh, yh, zh) = ergodic.averages()?;
                ergodic_checkpoints.push((ergodic.count, xh, yh, zh));
            }
        }

        observer(&StepObservation {
            k: k_global,
            k_run,
            prev: &prev_state,
            next: &outcome.state,
            r_new: &outcome.r_new,
            dx: &outcome.dx,
            dy: &outcome.dy,
            xi: &outcome.xi,
            v: &outcome.v,
            primal_rel,
            dual_rel,
            eps_kkt_sq: eps,
            r_monitor,
        });

        let max_resid = primal_rel.max(dual_rel);
        let improved = best.as_ref().map_or(true, |(b, ..)| max_resid < *b);
        if improved {
            best = Some((max_resid, point, primal_rel, dual_rel, eps));
        }

        let converged = max_resid <= config.tol;
        let mut restarted = false;

        let window = config.restart.divergence_window;
        let not_decaying = k_run >= 2 * window.max(1) && {
            let last = r_prefix[k_run] - r_prefix[k_run - window];
            let before = r_prefix[k_run - window] - r_prefix[k_run - 2 * window];
            last >= before
        };
        if !converged
            && choice.tag.is_aggressive()
            && config.restart.enabled
            && restart_check_running(r_sum, r_monitor, k_run, &config.restart)
            && not_decaying
        {
            if restarts >= config.restart.max_restarts {
                status = SolveStatus::RestartExhausted;
                record_iter(
                    &mut trace,
                    &mut jsonl,
                    config,
                    k_global,
                    primal_rel,
                    dual_rel,
                    eps,
                    r_monitor,
                    true,
                )?;
                break;
            }
            restarted = true;
            let old_gamma = choice.params.gamma.unwrap_or(1.0);
            choice = escalate(problem, &choice, config.restart.escalation_factor)?;
            restart_log.push(RestartEvent {
                iteration: k_global,
                old_gamma,
                new_gamma: choice.params.gamma.unwrap_or(1.0),
            });
            restarts += 1;
            // resume from the best iterate seen so far
            let bp = &best.as_ref().expect("best set on first iteration").1;
            state = IterateState::from_point(
                problem,
                sigma,
                bp.x.clone(),
                bp.y.clone(),
                bp.z.clone(),
            );
            state.k = k_global;
            r_sum = 0.0;
            r_prefix.clear();
            r_prefix.push(0.0);
            k_run = 0;
            ergodic.reset();
        } else {
            state = outcome.state;
        }

        record_iter(
            &mut trace,
            &mut jsonl,
            config,
            k_global,
            primal_rel,
            dual_rel,
            eps,
            r_monitor,
            restarted,
        )?;

        if converged {
            status = SolveStatus::Converged;
            break;
        }
    }

    if let Some(w) = jsonl.as_mut() {
        w.flush()?;
    }

    let (best_resid, best_point, best_primal, best_dual, best_eps) =
        best.ok_or_else(|| SolverError::InvalidParameter("no iterations were performed".into()))?;
    let _ = best_resid;
    let objective = crate::problem::objective(problem, &best_point.x, &best_point.y);

    Ok(SolveResult {
        status,
        point: best_point,
        iterations: k_global,
        primal_rel: best_primal,
        dual_rel: best_dual,
        eps_kkt_sq: best_eps,
        objective,
        trace,
        restart_log,
        restarts,
        ergodic: ergodic.averages().ok(),
        ergodic_checkpoints,
        dual_exactness: exactness,
        z_update_identity_dev: z_dev_max,
    })
}

#[allow(clippy::too_many_arguments)]
fn record_iter(
    trace: &mut Vec<IterRecord>,
    jsonl: &mut Option<std::io::BufWriter<std::fs::File>>,
    config: &SolverConfig,
    k: usize,
    primal_rel: f64,
    dual_rel: f64,
    eps: f64,
    r_monitor: f64,
    restarted: bool,
) -> Result<()> {
    let rec = IterRecord {
        k,
        primal_rel,
        dual_rel,
        eps_kkt_sq: eps,
        r_monitor,
        restarted,
    };
    if let Some(w) = jsonl.as_mut() {
        let mut line = serde_json::to_string(&TraceLine {
            record_type: "iter",
            k,
            primal_rel,
            dual_rel,
            eps_kkt_sq: eps,
            r: r_monitor,
            restarted,
        })?;
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    if config.trace.record {
        trace.push(rec);
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct TraceLine {
    #[serde(rename = "type")]
    record_type: &'static str,
    k: usize,
    primal_rel: f64,
    dual_rel: f64,
    eps_kkt_sq: f64,
    r: f64,
    restarted: bool,
}
