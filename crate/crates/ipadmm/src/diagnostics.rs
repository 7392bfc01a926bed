//! Runtime verification of the convergence-theory quantities: the
//! Lyapunov descent of the global-convergence analysis, the non-ergodic
//! o(1/k) KKT decay, summability of the restart residual, and the ergodic
//! variational-inequality gap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::linalg::{dot, norm2};
use crate::operator::{GramOp, OpRef, SelfAdjointOp, SumOp};
use crate::problem::{CompositeProblem, KKTPoint, NonsmoothBlock};
use crate::solver::{IterRecord, StepObservation};
use crate::strategy::ProximalChoice;
use std::sync::Arc;

// ---------------------------------------------------------------------------
// Complexity trace
// ---------------------------------------------------------------------------

/// Per-iteration complexity bookkeeping with the running minimum of the
/// squared KKT measure and the running sum of the restart residual.
#[derive(Debug, Clone, Default)]
pub struct ComplexityTrace {
    pub eps: Vec<f64>,
    pub running_min: Vec<f64>,
    pub running_r_sum: Vec<f64>,
}

impl ComplexityTrace {
    pub fn from_records(records: &[IterRecord]) -> Self {
        let mut trace = ComplexityTrace::default();
        for r in records {
            trace.push(r.eps_kkt_sq, r.r_monitor);
        }
        trace
    }

    pub fn push(&mut self, eps: f64, r_monitor: f64) {
        let min = match self.running_min.last() {
            Some(&m) => m.min(eps),
            None => eps,
        };
        let sum = self.running_r_sum.last().copied().unwrap_or(0.0) + r_monitor;
        self.eps.push(eps);
        self.running_min.push(min);
        self.running_r_sum.push(sum);
    }
}

/// The scaled running-minimum series k * min_{1<=i<=k} eps_i at dyadic
/// checkpoints k in {1, 2, 4, ...}; decreasing checkpoints certify the
/// o(1/k) non-ergodic decay, a constant eps series makes it increase.
pub fn nonergodic_tracker(eps_series: &[f64]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut running_min = f64::INFINITY;
    let mut next_checkpoint = 1usize;
    for (i, &eps) in eps_series.iter().enumerate() {
        let k = i + 1;
        running_min = running_min.min(eps);
        if k == next_checkpoint {
            out.push((k, k as f64 * running_min));
            next_checkpoint *= 2;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Lyapunov descent (global-convergence part (b))
// ---------------------------------------------------------------------------

/// Weighted norms and scalars needed to evaluate the part-(b) Lyapunov
/// function against a reference optimum:
///
/// V_k = (tau sigma)^{-1} |z^k - z*|^2 + |x^k - x*|^2_{Sigma_hat_f + S}
///     + |y^k - y*|^2_{Sigma_hat_g + T + sigma BB*}
///     + (1 - alpha min(tau, 1/tau)) sigma |r^k|^2 + alpha xi_k,
/// with xi_k = |y^k - y^{k-1}|^2_{Sigma_hat_g + T}, and the descent bound
/// rhs_k = t_{k+1} + (-tau + alpha min(1+tau, 1+1/tau)) sigma |r^{k+1}|^2,
/// t_{k+1} = |x^{k+1} - x^k|^2_{H_f} + |y^{k+1} - y^k|^2_{M_g}.
pub struct LyapunovContext {
    pub sigma: f64,
    pub tau: f64,
    pub alpha: f64,
    pub reference: KKTPoint,
    xf_op: OpRef,     // Sigma_hat_f + S
    yg_op: OpRef,     // Sigma_hat_g + T
    yg_full_op: OpRef, // Sigma_hat_g + T + sigma BB*
    hf_op: OpRef,     // H_f
    mg_op: OpRef,     // M_g
}

impl LyapunovContext {
    pub fn new(
        problem: &CompositeProblem,
        choice: &ProximalChoice,
        sigma: f64,
        tau: f64,
        alpha: f64,
        reference: KKTPoint,
    ) -> Self {
        let aa: OpRef = Arc::new(GramOp::new(problem.astar.clone(), 1.0));
        let bb: OpRef = Arc::new(GramOp::new(problem.bstar.clone(), 1.0));
        let xf_op: OpRef = Arc::new(SumOp::new(vec![
            (1.0, problem.f.upper_curvature.clone()),
            (1.0, choice.s_op.clone()),
        ]));
        let yg_op: OpRef = Arc::new(SumOp::new(vec![
            (1.0, problem.g.upper_curvature.clone()),
            (1.0, choice.t_op.clone()),
        ]));
        let yg_full_op: OpRef = Arc::new(SumOp::new(vec![
            (1.0, yg_op.clone()),
            (sigma, bb.clone()),
        ]));
        let hf_op: OpRef = Arc::new(SumOp::new(vec![
            (0.5, problem.f.lower_curvature.clone()),
            (1.0, choice.s_op.clone()),
            (0.5 * (1.0 - alpha) * sigma, aa),
        ]));
        let mg_coef = tau.min(1.0 + tau - tau * tau) * alpha * sigma;
        let mg_op: OpRef = Arc::new(SumOp::new(vec![
            (0.5, problem.g.lower_curvature.clone()),
            (1.0, choice.t_op.clone()),
            (mg_coef, bb),
        ]));
        LyapunovContext {
            sigma,
            tau,
            alpha,
            reference,
            xf_op,
            yg_op,
            yg_full_op,
            hf_op,
            mg_op,
        }
    }

    fn weighted_sq(op: &dyn SelfAdjointOp, v: &[f64]) -> f64 {
        let mut w = vec![0.0; v.len()];
        op.apply(v, &mut w);
        dot(v, &w)
    }

    /// V at an iterate (x, y, z) with residual r and predecessor y_prev.
    pub fn value(&self, x: &[f64], y: &[f64], z: &[f64], r: &[f64], y_prev: &[f64]) -> f64 {
        let dz: Vec<f64> = z.iter().zip(&self.reference.z).map(|(a, b)| a - b).collect();
        let dx: Vec<f64> = x.iter().zip(&self.reference.x).map(|(a, b)| a - b).collect();
        let dy: Vec<f64> = y.iter().zip(&self.reference.y).map(|(a, b)| a - b).collect();
        let dyy: Vec<f64> = y.iter().zip(y_prev).map(|(a, b)| a - b).collect();
        let phi = dot(&dz, &dz) / (self.tau * self.sigma)
            + Self::weighted_sq(self.xf_op.as_ref(), &dx)
            + Self::weighted_sq(self.yg_full_op.as_ref(), &dy);
        let r_coef = (1.0 - self.alpha * self.tau.min(1.0 / self.tau)) * self.sigma;
        let xi = Self::weighted_sq(self.yg_op.as_ref(), &dyy);
        phi + r_coef * dot(r, r) + self.alpha * xi
    }

    /// Right-hand side of the descent inequality for the step with
    /// increments (dx, dy) and new residual r_new.
    pub fn descent_rhs(&self, dx: &[f64], dy: &[f64], r_new: &[f64]) -> f64 {
        let t = Self::weighted_sq(self.hf_op.as_ref(), dx)
            + Self::weighted_sq(self.mg_op.as_ref(), dy);
        let coef =
            (-self.tau + self.alpha * (1.0 + self.tau).min(1.0 + 1.0 / self.tau)) * self.sigma;
        t + coef * dot(r_new, r_new)
    }
}

/// The individual convergence-analysis quantities at one transition:
/// phi_bar against the reference, xi (weighted y-increment), the two
/// increment energies s and t, and the residual norm. All recompute
/// deterministically from stored iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovState {
    pub phi_bar: f64,
    pub xi: f64,
    pub s: f64,
    pub t: f64,
    pub r_norm: f64,
}

impl LyapunovContext {
    /// Quantities for the transition from (x, y, z) to (x1, y1, z1) with
    /// residual r1 at the later iterate.
    pub fn state_at(
        &self,
        problem: &CompositeProblem,
        choice: &ProximalChoice,
        x1: &[f64],
        y1: &[f64],
        z1: &[f64],
        r1: &[f64],
        x: &[f64],
        y: &[f64],
    ) -> LyapunovState {
        let dzr: Vec<f64> = z1
            .iter()
            .zip(&self.reference.z)
            .map(|(a, b)| a - b)
            .collect();
        let dxr: Vec<f64> = x1
            .iter()
            .zip(&self.reference.x)
            .map(|(a, b)| a - b)
            .collect();
        let dyr: Vec<f64> = y1
            .iter()
            .zip(&self.reference.y)
            .map(|(a, b)| a - b)
            .collect();
        let phi_bar = dot(&dzr, &dzr) / (self.tau * self.sigma)
            + Self::weighted_sq(self.xf_op.as_ref(), &dxr)
            + Self::weighted_sq(self.yg_full_op.as_ref(), &dyr);

        let dx: Vec<f64> = x1.iter().zip(x).map(|(a, b)| a - b).collect();
        let dy: Vec<f64> = y1.iter().zip(y).map(|(a, b)| a - b).collect();
        let xi = Self::weighted_sq(self.yg_op.as_ref(), &dy);
        let t = Self::weighted_sq(self.hf_op.as_ref(), &dx)
            + Self::weighted_sq(self.mg_op.as_ref(), &dy);

        // s = |dx|^2_{1/2 Sigma_f + S} + |dy|^2_{1/2 Sigma_g + T}
        let sx_op = SumOp::new(vec![
            (0.5, problem.f.lower_curvature.clone()),
            (1.0, choice.s_op.clone()),
        ]);
        let sy_op = SumOp::new(vec![
            (0.5, problem.g.lower_curvature.clone()),
            (1.0, choice.t_op.clone()),
        ]);
        let s = Self::weighted_sq(&sx_op, &dx) + Self::weighted_sq(&sy_op, &dy);

        LyapunovState {
            phi_bar,
            xi,
            s,
            t,
            r_norm: norm2(r1),
        }
    }
}

/// Both sides of the descent inequality V_k - V_{k+1} >= rhs_k for one
/// transition, given the two consecutive iterates and their predecessors.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_part_b(
    ctx: &LyapunovContext,
    x_k: &[f64],
    y_k: &[f64],
    z_k: &[f64],
    r_k: &[f64],
    y_km1: &[f64],
    x_k1: &[f64],
    y_k1: &[f64],
    z_k1: &[f64],
    r_k1: &[f64],
) -> (f64, f64, f64) {
    let v_k = ctx.value(x_k, y_k, z_k, r_k, y_km1);
    let v_k1 = ctx.value(x_k1, y_k1, z_k1, r_k1, y_k);
    let dx: Vec<f64> = x_k1.iter().zip(x_k).map(|(a, b)| a - b).collect();
    let dy: Vec<f64> = y_k1.iter().zip(y_k).map(|(a, b)| a - b).collect();
    let rhs = ctx.descent_rhs(&dx, &dy, r_k1);
    (v_k, v_k1, rhs)
}

#[derive(Debug, Clone)]
pub struct LyapunovRecord {
    /// Transition index: compares V_k against V_{k+1}.
    pub k: usize,
    pub v_k: f64,
    pub v_next: f64,
    pub rhs: f64,
}

/// Observer-driven monitor that records the Lyapunov series along a run.
/// Feed every step observation; records start at the second step of a run
/// segment (V needs the predecessor of y).
pub struct LyapunovMonitor {
    ctx: LyapunovContext,
    window: Option<WindowEntry>,
    pub records: Vec<LyapunovRecord>,
}

struct WindowEntry {
    v: f64,
    k: usize,
}

impl LyapunovMonitor {
    pub fn new(ctx: LyapunovContext) -> Self {
        LyapunovMonitor {
            ctx,
            window: None,
            records: Vec::new(),
        }
    }

    pub fn observe(&mut self, obs: &StepObservation) {
        if obs.k_run == 1 {
            self.window = None; // restart segments re-anchor the window
        }
        // y_prev for V at `next` is the y in `prev`
        let v = self.ctx.value(
            &obs.next.x,
            &obs.next.y,
            &obs.next.z,
            obs.r_new,
            &obs.prev.y,
        );
        if let Some(prev) = self.window.take() {
            let rhs = self.ctx.descent_rhs(obs.dx, obs.dy, obs.r_new);
            self.records.push(LyapunovRecord {
                k: prev.k,
                v_k: prev.v,
                v_next: v,
                rhs,
            });
        }
        self.window = Some(WindowEntry { v, k: obs.k_run });
    }
}

// ---------------------------------------------------------------------------
// Variational-inequality gap
// ---------------------------------------------------------------------------

/// theta(u~) - theta(u) + <w~ - w, F(w)> with theta(u) = p(x) + q(y) and
/// F(w) = (grad f(x) + A z, grad g(y) + B z, c - A*x - B*y).
/// Returns None when theta is infinite at the probe (reported by samplers).
pub fn vi_gap(
    problem: &CompositeProblem,
    candidate: (&[f64], &[f64], &[f64]),
    probe: (&[f64], &[f64], &[f64]),
) -> Option<f64> {
    let (xt, yt, zt) = candidate;
    let (x, y, z) = probe;
    let theta_t = problem.p.value(xt) + problem.q.value(yt);
    let theta = problem.p.value(x) + problem.q.value(y);
    if !theta.is_finite() || !theta_t.is_finite() {
        return None;
    }

    // F(w) at the probe
    let grad_f = problem.f.gradient(x);
    let mut az = vec![0.0; problem.dim_x()];
    problem.astar.adjoint(z, &mut az);
    let fx: Vec<f64> = grad_f.iter().zip(&az).map(|(g, a)| g + a).collect();

    let grad_g = problem.g.gradient(y);
    let mut bz = vec![0.0; problem.dim_y()];
    problem.bstar.adjoint(z, &mut bz);
    let fy: Vec<f64> = grad_g.iter().zip(&bz).map(|(g, b)| g + b).collect();

    let r = problem.primal_residual(x, y);
    let fz: Vec<f64> = r.iter().map(|ri| -ri).collect(); // c - A*x - B*y

    let dx: Vec<f64> = xt.iter().zip(x).map(|(a, b)| a - b).collect();
    let dy: Vec<f64> = yt.iter().zip(y).map(|(a, b)| a - b).collect();
    let dz: Vec<f64> = zt.iter().zip(z).map(|(a, b)| a - b).collect();

    Some(theta_t - theta + dot(&dx, &fx) + dot(&dy, &fy) + dot(&dz, &fz))
}

#[derive(Debug, Clone)]
pub struct ViGapEstimate {
    pub max_gap: f64,
    pub probes_used: usize,
    pub probes_skipped: usize,
}

/// Estimates the supremum of the gap over the unit ball around the
/// candidate by fixed-seed sampling plus the analytic maximizer of the
/// linearized gap at frozen F.
pub fn vi_gap_supremum_estimate(
    problem: &CompositeProblem,
    candidate: (&[f64], &[f64], &[f64]),
    probes: usize,
    seed: u64,
) -> ViGapEstimate {
    let (xt, yt, zt) = candidate;
    let nx = xt.len();
    let ny = yt.len();
    let nz = zt.len();
    let total = nx + ny + nz;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut max_gap = f64::NEG_INFINITY;
    let mut used = 0usize;
    let mut skipped = 0usize;

    let eval = |dx: &[f64], dy: &[f64], dz: &[f64],
                used: &mut usize,
                skipped: &mut usize,
                max_gap: &mut f64| {
        let x: Vec<f64> = xt.iter().zip(dx).map(|(a, b)| a + b).collect();
        let y: Vec<f64> = yt.iter().zip(dy).map(|(a, b)| a + b).collect();
        let z: Vec<f64> = zt.iter().zip(dz).map(|(a, b)| a + b).collect();
        match vi_gap(problem, (xt, yt, zt), (&x, &y, &z)) {
            Some(g) => {
                *used += 1;
                if g > *max_gap {
                    *max_gap = g;
                }
            }
            None => *skipped += 1,
        }
    };

    // analytic maximizer of <w~ - w, F(w~)> over the unit ball: step along
    // -F(w~) from the candidate
    {
        let grad_f = problem.f.gradient(xt);
        let mut az = vec![0.0; nx];
        problem.astar.adjoint(zt, &mut az);
        let fx: Vec<f64> = grad_f.iter().zip(&az).map(|(g, a)| g + a).collect();
        let grad_g = problem.g.gradient(yt);
        let mut bz = vec![0.0; ny];
        problem.bstar.adjoint(zt, &mut bz);
        let fy: Vec<f64> = grad_g.iter().zip(&bz).map(|(g, b)| g + b).collect();
        let r = problem.primal_residual(xt, yt);
        let fz: Vec<f64> = r.iter().map(|ri| -ri).collect();
        let norm = (dot(&fx, &fx) + dot(&fy, &fy) + dot(&fz, &fz)).sqrt();
        if norm > 0.0 {
            let dx: Vec<f64> = fx.iter().map(|v| -v / norm).collect();
            let dy: Vec<f64> = fy.iter().map(|v| -v / norm).collect();
            let dz: Vec<f64> = fz.iter().map(|v| -v / norm).collect();
            eval(&dx, &dy, &dz, &mut used, &mut skipped, &mut max_gap);
        }
    }

    for _ in 0..probes {
        let g: Vec<f64> = (0..total).map(|_| rng.sample(StandardNormal)).collect();
        let gn = norm2(&g).max(1e-300);
        let radius: f64 = rng.gen::<f64>().powf(1.0 / total as f64);
        let scale = radius / gn;
        let dx: Vec<f64> = g[..nx].iter().map(|v| v * scale).collect();
        let dy: Vec<f64> = g[nx..nx + ny].iter().map(|v| v * scale).collect();
        let dz: Vec<f64> = g[nx + ny..].iter().map(|v| v * scale).collect();
        eval(&dx, &dy, &dz, &mut used, &mut skipped, &mut max_gap);
    }

    ViGapEstimate {
        max_gap,
        probes_used: used,
        probes_skipped: skipped,
    }
}

/// Projects a probe for the orthant-constrained block so fewer samples are
/// skipped: y components clipped to be feasible.
pub fn feasible_probe_y(problem: &CompositeProblem, y: &[f64]) -> Vec<f64> {
    match problem.q {
        NonsmoothBlock::NonnegIndicator => crate::problem::project_nonneg(y),
        _ => y.to_vec(),
    }
}

/// Convenience: VI-gap estimate where infeasible y probes are projected
/// onto the domain instead of skipped.
pub fn vi_gap_supremum_estimate_feasible(
    problem: &CompositeProblem,
    candidate: (&[f64], &[f64], &[f64]),
    probes: usize,
    seed: u64,
) -> Result<ViGapEstimate> {
    let (xt, yt, zt) = candidate;
    let nx = xt.len();
    let ny = yt.len();
    let nz = zt.len();
    let total = nx + ny + nz;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_gap = f64::NEG_INFINITY;
    let mut used = 0usize;
    let mut skipped = 0usize;

    for _ in 0..probes {
        let g: Vec<f64> = (0..total).map(|_| rng.sample(StandardNormal)).collect();
        let gn = norm2(&g).max(1e-300);
        let radius: f64 = rng.gen::<f64>().powf(1.0 / total as f64);
        let scale = radius / gn;
        let x: Vec<f64> = xt.iter().zip(&g[..nx]).map(|(a, b)| a + b * scale).collect();
        let y_raw: Vec<f64> = yt
            .iter()
            .zip(&g[nx..nx + ny])
            .map(|(a, b)| a + b * scale)
            .collect();
        let y = feasible_probe_y(problem, &y_raw);
        let z: Vec<f64> = zt
            .iter()
            .zip(&g[nx + ny..])
            .map(|(a, b)| a + b * scale)
            .collect();
        match vi_gap(problem, (xt, yt, zt), (&x, &y, &z)) {
            Some(gap) => {
                used += 1;
                max_gap = max_gap.max(gap);
            }
            None => skipped += 1,
        }
    }
    Ok(ViGapEstimate {
        max_gap,
        probes_used: used,
        probes_skipped: skipped,
    })
}
