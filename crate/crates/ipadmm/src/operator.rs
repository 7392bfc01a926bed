//! Linear-operator abstraction and spectral utilities.
//!
//! Operators are kept lazy: `sigma * A A^*` is a composition of the map with
//! its adjoint and a scalar, never a materialized matrix. Dense
//! materialization happens only for dimensions below a configurable cap.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SolverError};
use crate::linalg::{axpy, dot, norm2, scale};

/// Default cap below which operators may be densified for eigendecompositions.
pub const DEFAULT_DENSE_CAP: usize = 2000;

/// Default power-iteration settings.
pub const LAMBDA_MAX_TOL: f64 = 1e-9;
pub const LAMBDA_MAX_CAP: usize = 10_000;

/// Representation hint carried by linear maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Repr {
    Dense,
    SparseTriplet,
    Composite,
    Diagonal,
    LowRankPlusScaledIdentity,
}

/// A linear map between two Euclidean spaces, with its adjoint.
///
/// `forward` maps a `cols`-vector to a `rows`-vector; `adjoint` goes back.
pub trait LinearMap: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn forward(&self, x: &[f64], out: &mut [f64]);
    fn adjoint(&self, z: &[f64], out: &mut [f64]);
    fn repr(&self) -> Repr {
        Repr::Composite
    }
}

/// A self-adjoint linear operator, possibly indefinite.
pub trait SelfAdjointOp: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

pub type OpRef = Arc<dyn SelfAdjointOp>;
pub type MapRef = Arc<dyn LinearMap>;

// ---------------------------------------------------------------------------
// Concrete operators
// ---------------------------------------------------------------------------

/// Identity map on a space of the given dimension.
pub struct IdentityMap {
    pub dim: usize,
}

impl LinearMap for IdentityMap {
    fn rows(&self) -> usize {
        self.dim
    }
    fn cols(&self) -> usize {
        self.dim
    }
    fn forward(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
    fn adjoint(&self, z: &[f64], out: &mut [f64]) {
        out.copy_from_slice(z);
    }
    fn repr(&self) -> Repr {
        Repr::Diagonal
    }
}

/// Sparse map backed by a CSR matrix: forward = M x, adjoint = M^T z.
pub struct CsrMap {
    pub matrix: crate::sparse::CsrMatrix,
}

impl LinearMap for CsrMap {
    fn rows(&self) -> usize {
        self.matrix.rows()
    }
    fn cols(&self) -> usize {
        self.matrix.cols()
    }
    fn forward(&self, x: &[f64], out: &mut [f64]) {
        self.matrix.matvec(x, out);
    }
    fn adjoint(&self, z: &[f64], out: &mut [f64]) {
        self.matrix.matvec_transpose(z, out);
    }
    fn repr(&self) -> Repr {
        Repr::SparseTriplet
    }
}

pub struct ZeroOp {
    pub dim: usize,
}

impl SelfAdjointOp for ZeroOp {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

pub struct ScaledIdentityOp {
    pub dim: usize,
    pub factor: f64,
}

impl SelfAdjointOp for ScaledIdentityOp {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.factor * xi;
        }
    }
}

pub struct DiagOp {
    pub diag: Vec<f64>,
}

impl SelfAdjointOp for DiagOp {
    fn dim(&self) -> usize {
        self.diag.len()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for ((o, xi), d) in out.iter_mut().zip(x).zip(&self.diag) {
            *o = d * xi;
        }
    }
}

/// Dense symmetric operator (column-major storage via nalgebra).
pub struct DenseSymOp {
    pub matrix: DMatrix<f64>,
}

impl DenseSymOp {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        debug_assert_eq!(matrix.nrows(), matrix.ncols());
        DenseSymOp { matrix }
    }
}

impl SelfAdjointOp for DenseSymOp {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let xv = DVector::from_column_slice(x);
        let y = &self.matrix * xv;
        out.copy_from_slice(y.as_slice());
    }
}

/// Symmetric operator backed by a CSR matrix assumed symmetric.
pub struct CsrSymOp {
    pub matrix: crate::sparse::CsrMatrix,
}

impl SelfAdjointOp for CsrSymOp {
    fn dim(&self) -> usize {
        self.matrix.rows()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.matrix.matvec(x, out);
    }
}

/// scale * A A^*  for a linear map with `forward: X -> Z`; acts on X.
///
/// Note the convention: for the constraint map `A^*` stored as a
/// `LinearMap` (forward = A^* x), this operator computes
/// `scale * A(A^* x) = scale * adjoint(forward(x))`.
pub struct GramOp {
    pub map: MapRef,
    pub factor: f64,
    workspace_rows: usize,
}

impl GramOp {
    pub fn new(map: MapRef, factor: f64) -> Self {
        let workspace_rows = map.rows();
        GramOp {
            map,
            factor,
            workspace_rows,
        }
    }
}

impl SelfAdjointOp for GramOp {
    fn dim(&self) -> usize {
        self.map.cols()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mut mid = vec![0.0; self.workspace_rows];
        self.map.forward(x, &mut mid);
        self.map.adjoint(&mid, out);
        if self.factor != 1.0 {
            scale(self.factor, out);
        }
    }
}

/// Weighted sum of self-adjoint operators on the same space.
pub struct SumOp {
    pub terms: Vec<(f64, OpRef)>,
    dim: usize,
}

impl SumOp {
    pub fn new(terms: Vec<(f64, OpRef)>) -> Self {
        assert!(!terms.is_empty());
        let dim = terms[0].1.dim();
        for (_, t) in &terms {
            assert_eq!(t.dim(), dim, "sum terms must share the dimension");
        }
        SumOp { terms, dim }
    }
}

impl SelfAdjointOp for SumOp {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut tmp = vec![0.0; self.dim];
        for (coef, op) in &self.terms {
            if *coef == 0.0 {
                continue;
            }
            op.apply(x, &mut tmp);
            axpy(*coef, &tmp, out);
        }
    }
}

/// shift * I - op, used to bound smallest eigenvalues from power iterations.
pub struct ShiftedNegOp<'a> {
    pub op: &'a dyn SelfAdjointOp,
    pub shift: f64,
}

impl SelfAdjointOp for ShiftedNegOp<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.op.apply(x, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.shift * xi - *o;
        }
    }
}

// ---------------------------------------------------------------------------
// Spectral-shift operators: lambda_l I + sum_i (lambda_i - lambda_l) u_i u_i^*
// ---------------------------------------------------------------------------

/// Positive definite operator of the form
/// `lambda_base * I + sum_i (lambda_i - lambda_base) u_i u_i^*`
/// with `lambda_i >= lambda_base > 0` and orthonormal `u_i`.
///
/// Its inverse has the same shape with reciprocal eigenvalues, so both
/// directions apply in `O(l * dim)`.
#[derive(Clone)]
pub struct SpectralShiftOp {
    dim: usize,
    lambda_base: f64,
    pairs: Vec<(f64, Vec<f64>)>,
}

impl SpectralShiftOp {
    pub fn new(dim: usize, lambda_base: f64, pairs: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        if lambda_base <= 0.0 {
            return Err(SolverError::NotMajorizable {
                lambda_l: lambda_base,
            });
        }
        for (i, (lam, u)) in pairs.iter().enumerate() {
            if u.len() != dim {
                return Err(SolverError::DimensionMismatch(format!(
                    "deflation vector {i} has length {} for dim {dim}",
                    u.len()
                )));
            }
            if *lam < lambda_base - 1e-10 * (1.0 + lambda_base.abs()) {
                return Err(SolverError::InvalidParameter(format!(
                    "deflation eigenvalue {lam} below base {lambda_base}"
                )));
            }
            for (j, (_, w)) in pairs.iter().enumerate() {
                let g = dot(u, w) - if i == j { 1.0 } else { 0.0 };
                if g.abs() > 1e-8 {
                    return Err(SolverError::InvalidParameter(format!(
                        "deflation vectors not orthonormal: |<u{i},u{j}> - d| = {:.3e}",
                        g.abs()
                    )));
                }
            }
        }
        Ok(SpectralShiftOp {
            dim,
            lambda_base,
            pairs,
        })
    }

    pub fn lambda_base(&self) -> f64 {
        self.lambda_base
    }

    pub fn pairs(&self) -> &[(f64, Vec<f64>)] {
        &self.pairs
    }

    /// Closed-form inverse: reciprocal base and pair eigenvalues.
    pub fn inverse(&self) -> SpectralShiftOp {
        SpectralShiftOp {
            dim: self.dim,
            lambda_base: 1.0 / self.lambda_base,
            pairs: self
                .pairs
                .iter()
                .map(|(lam, u)| (1.0 / lam, u.clone()))
                .collect(),
        }
    }

    /// Applies the inverse without constructing it.
    pub fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let inv_base = 1.0 / self.lambda_base;
        for (o, r) in out.iter_mut().zip(rhs) {
            *o = inv_base * r;
        }
        for (lam, u) in &self.pairs {
            let c = (1.0 / lam - inv_base) * dot(u, rhs);
            axpy(c, u, out);
        }
    }
}

impl SelfAdjointOp for SpectralShiftOp {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.lambda_base * xi;
        }
        for (lam, u) in &self.pairs {
            let c = (lam - self.lambda_base) * dot(u, x);
            axpy(c, u, out);
        }
    }
}

// ---------------------------------------------------------------------------
// Spectral utilities
// ---------------------------------------------------------------------------

/// Deterministic power-iteration start vector: all ones, perturbed by
/// component index so it is never orthogonal to the dominant eigenvector
/// of structured operators.
fn start_vector(dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim)
        .map(|i| 1.0 + 0.5 * ((i % 17) as f64) / 17.0)
        .collect();
    let n = norm2(&v);
    scale(1.0 / n, &mut v);
    v
}

fn rayleigh_step(op: &dyn SelfAdjointOp, v: &mut Vec<f64>, av: &mut Vec<f64>) -> (f64, f64) {
    op.apply(v, av);
    let lambda = dot(v, av);
    // residual ||A v - lambda v||
    let mut res = 0.0;
    for (a, b) in av.iter().zip(v.iter()) {
        let d = a - lambda * b;
        res += d * d;
    }
    (lambda, res.sqrt())
}

/// Largest eigenvalue of a self-adjoint operator by power iteration with a
/// fixed deterministic start vector.
///
/// If the dominant eigenvalue in magnitude is negative, the iteration is
/// re-run on the shifted operator `op + |mu| I` so the algebraically largest
/// eigenvalue is still returned. Operators whose top eigenvalues cluster can
/// leave power iteration short of the tolerance within the cap; below the
/// dense cap the evaluation then falls back to a dense eigendecomposition,
/// above it the failure is reported with the best estimate.
pub fn lambda_max(op: &dyn SelfAdjointOp, tol: f64, cap: usize) -> Result<f64> {
    match lambda_max_impl(op, tol, cap, true) {
        Ok(v) => Ok(v),
        Err(e) if op.dim() <= DEFAULT_DENSE_CAP => {
            let pairs = dense_eig_desc(op, DEFAULT_DENSE_CAP)?;
            pairs.first().map(|p| p.0).ok_or(e)
        }
        Err(e) => Err(e),
    }
}

fn lambda_max_impl(op: &dyn SelfAdjointOp, tol: f64, cap: usize, allow_shift: bool) -> Result<f64> {
    let dim = op.dim();
    if dim == 0 {
        return Err(SolverError::InvalidParameter("empty operator".into()));
    }
    if dim == 1 {
        let mut out = [0.0];
        op.apply(&[1.0], &mut out);
        return Ok(out[0]);
    }
    let mut v = start_vector(dim);
    let mut av = vec![0.0; dim];
    let mut lambda_prev = f64::NAN;
    let mut delta_prev = f64::NAN;
    let mut best = (f64::NEG_INFINITY, f64::INFINITY); // (lambda, residual)

    for it in 0..cap {
        let (lambda, residual) = rayleigh_step(op, &mut v, &mut av);
        let scale_ref = lambda.abs().max(1.0);
        if residual < best.1 {
            best = (lambda, residual);
        }

        if residual <= tol * scale_ref {
            return finish_lambda_max(op, lambda, tol, cap, allow_shift, &v);
        }
        if !lambda_prev.is_nan() {
            let delta = (lambda - lambda_prev).abs();
            if delta == 0.0 && it > 2 {
                return finish_lambda_max(op, lambda, tol, cap, allow_shift, &v);
            }
            if !delta_prev.is_nan() && delta_prev > 0.0 {
                // geometric extrapolation of the remaining eigenvalue error
                let r = (delta / delta_prev).min(0.999_999);
                let est = delta * r / (1.0 - r);
                if est <= tol * scale_ref && delta <= tol * scale_ref {
                    return finish_lambda_max(op, lambda, tol, cap, allow_shift, &v);
                }
            }
            delta_prev = delta;
        }
        lambda_prev = lambda;

        // normalize A v for the next step
        let n = norm2(&av);
        if n == 0.0 {
            // v is in the kernel; the operator restricted to this start is zero
            return Ok(0.0);
        }
        for (vi, ai) in v.iter_mut().zip(&av) {
            *vi = ai / n;
        }
    }
    Err(SolverError::LambdaMaxNoConvergence {
        best: best.0,
        residual: best.1,
        iterations: cap,
    })
}

/// Power iteration converges to the eigenvalue largest in magnitude; when it
/// is negative, rerun on the shifted operator to locate the algebraic max.
fn finish_lambda_max(
    op: &dyn SelfAdjointOp,
    lambda: f64,
    tol: f64,
    cap: usize,
    allow_shift: bool,
    _v: &[f64],
) -> Result<f64> {
    if lambda >= 0.0 || !allow_shift {
        return Ok(lambda);
    }
    let shift = lambda.abs() * 1.01 + 1e-12;
    let shifted = ShiftedAddOp { op, shift };
    let lam_shifted = lambda_max_impl(&shifted, tol, cap, false)?;
    Ok(lam_shifted - shift)
}

/// op + shift * I, borrowed.
struct ShiftedAddOp<'a> {
    op: &'a dyn SelfAdjointOp,
    shift: f64,
}

impl SelfAdjointOp for ShiftedAddOp<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.op.apply(x, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o += self.shift * xi;
        }
    }
}

/// Lower estimate of the smallest eigenvalue, via
/// `shift - lambda_max(shift I - op)` for a caller-supplied upper shift.
pub fn lambda_min_bound(op: &dyn SelfAdjointOp, shift: f64, tol: f64, cap: usize) -> Result<f64> {
    let neg = ShiftedNegOp { op, shift };
    let lam = lambda_max(&neg, tol, cap)?;
    Ok(shift - lam)
}

/// Convenience: estimate lambda_min with an internally computed shift.
pub fn lambda_min_estimate(op: &dyn SelfAdjointOp, tol: f64, cap: usize) -> Result<f64> {
    let lmax = lambda_max(op, tol, cap)?;
    let shift = lmax.abs().max(1.0) * 1.01;
    lambda_min_bound(op, shift, tol, cap)
}

/// Materializes an operator as a dense symmetric matrix by applying it to
/// basis vectors. Only sensible below the dense cap.
pub fn densify(op: &dyn SelfAdjointOp) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        e[j] = 0.0;
        for i in 0..n {
            m[(i, j)] = col[i];
        }
    }
    // symmetrize away application roundoff
    let mt = m.transpose();
    (m + mt) * 0.5
}

/// Dense eigendecomposition sorted by descending eigenvalue.
pub fn dense_eig_desc(op: &dyn SelfAdjointOp, cap: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = op.dim();
    if n > cap {
        return Err(SolverError::DenseCapExceeded { dim: n, cap });
    }
    let m = densify(op);
    let eig = m.symmetric_eigen();
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|i| {
            (
                eig.eigenvalues[i],
                eig.eigenvectors.column(i).iter().copied().collect(),
            )
        })
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite eigenvalues"));
    Ok(pairs)
}

/// Symmetric PSD square root via dense eigendecomposition.
///
/// Eigenvalues in `[-1e-10 * scale, 0)` are clamped to zero; anything lower
/// is a not-PSD error.
pub fn sym_psd_sqrt(op: &dyn SelfAdjointOp, cap: usize) -> Result<DenseSymOp> {
    let pairs = dense_eig_desc(op, cap)?;
    let lam_max = pairs.first().map(|p| p.0).unwrap_or(0.0).max(0.0);
    let slack = 1e-10 * (1.0 + lam_max);
    let n = op.dim();
    let mut root = DMatrix::zeros(n, n);
    for (lam, u) in &pairs {
        if *lam < -slack {
            return Err(SolverError::NotPsd { lambda_min: *lam });
        }
        let s = lam.max(0.0).sqrt();
        if s == 0.0 {
            continue;
        }
        let uv = DVector::from_column_slice(u);
        root += s * &uv * uv.transpose();
    }
    Ok(DenseSymOp::new(root))
}

/// Leading `l` eigenpairs: dense path below the cap, deflated power
/// iteration above it.
pub fn leading_eigenpairs(
    op: &dyn SelfAdjointOp,
    l: usize,
    dense_cap: usize,
    tol: f64,
    iter_cap: usize,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = op.dim();
    let l = l.min(n);
    if n <= dense_cap {
        let mut pairs = dense_eig_desc(op, dense_cap)?;
        pairs.truncate(l);
        return Ok(pairs);
    }
    // deflated power iteration with deterministic starts
    let mut found: Vec<(f64, Vec<f64>)> = Vec::with_capacity(l);
    let mut av = vec![0.0; n];
    for k in 0..l {
        let mut v = start_vector(n);
        // decorrelate successive starts deterministically
        for (i, vi) in v.iter_mut().enumerate() {
            *vi += 0.1 * (((i + k * 7919) % 31) as f64) / 31.0;
        }
        orthogonalize(&mut v, &found);
        let nv = norm2(&v);
        scale(1.0 / nv, &mut v);

        let mut lambda_prev = f64::NAN;
        let mut converged = false;
        for _ in 0..iter_cap {
            op.apply(&v, &mut av);
            // deflate previously found directions
            for (lam, u) in &found {
                let c = lam * dot(u, &v);
                axpy(-c, u, &mut av);
            }
            let lambda = dot(&v, &av);
            let mut res = 0.0;
            for (a, b) in av.iter().zip(v.iter()) {
                let d = a - lambda * b;
                res += d * d;
            }
            let res = res.sqrt();
            if res <= tol.sqrt() * lambda.abs().max(1.0)
                && !lambda_prev.is_nan()
                && (lambda - lambda_prev).abs() <= tol * lambda.abs().max(1.0)
            {
                converged = true;
                break;
            }
            lambda_prev = lambda;
            orthogonalize(&mut av, &found);
            let na = norm2(&av);
            if na == 0.0 {
                break;
            }
            for (vi, ai) in v.iter_mut().zip(&av) {
                *vi = ai / na;
            }
        }
        op.apply(&v, &mut av);
        let lambda = dot(&v, &av);
        if !converged {
            let mut res = 0.0;
            for (a, b) in av.iter().zip(v.iter()) {
                let d = a - lambda * b;
                res += d * d;
            }
            return Err(SolverError::LambdaMaxNoConvergence {
                best: lambda,
                residual: res.sqrt(),
                iterations: iter_cap,
            });
        }
        found.push((lambda, v));
    }
    Ok(found)
}

fn orthogonalize(v: &mut [f64], basis: &[(f64, Vec<f64>)]) {
    for (_, u) in basis {
        let c = dot(u, v);
        axpy(-c, u, v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_op(d: &[f64]) -> DiagOp {
        DiagOp { diag: d.to_vec() }
    }

    #[test]
    fn lambda_max_diagonal() {
        let op = diag_op(&[1.0, 2.0, 3.0]);
        let lam = lambda_max(&op, 1e-10, LAMBDA_MAX_CAP).unwrap();
        assert!((lam - 3.0).abs() < 1e-8, "got {lam}");
    }

    #[test]
    fn lambda_max_rank_one() {
        // u u^* with ||u|| = 2 has top eigenvalue 4
        let u = [2.0, 0.0, 0.0];
        let m = DMatrix::from_fn(3, 3, |i, j| u[i] * u[j]);
        let op = DenseSymOp::new(m);
        let lam = lambda_max(&op, 1e-10, LAMBDA_MAX_CAP).unwrap();
        assert!((lam - 4.0).abs() < 1e-8, "got {lam}");
    }

    #[test]
    fn lambda_max_matches_dense_oracle_6x6() {
        // fixed random-ish symmetric 6x6, oracle = dense eigendecomposition
        let mut m = DMatrix::zeros(6, 6);
        let mut state = 88172645463325252u64;
        let mut next = || {
            // xorshift64
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) * 2.0 - 1.0
        };
        for i in 0..6 {
            for j in 0..=i {
                let v = next();
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        let oracle = m.clone().symmetric_eigen().eigenvalues.amax();
        // dense eig gives max |lambda|; take the algebraic max instead
        let oracle_max = m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let _ = oracle;
        let op = DenseSymOp::new(m);
        let lam = lambda_max(&op, 1e-10, LAMBDA_MAX_CAP).unwrap();
        assert!(
            (lam - oracle_max).abs() <= 1e-8 * oracle_max.abs().max(1.0),
            "power {lam} vs dense {oracle_max}"
        );
    }

    #[test]
    fn lambda_max_negative_dominant() {
        // dominant-in-magnitude eigenvalue is negative; algebraic max is 1
        let op = diag_op(&[-10.0, 1.0, 0.5]);
        let lam = lambda_max(&op, 1e-10, LAMBDA_MAX_CAP).unwrap();
        assert!((lam - 1.0).abs() < 1e-7, "got {lam}");
    }

    #[test]
    fn lambda_max_monotone_under_shift() {
        let op = diag_op(&[0.3, 1.7, 2.9, 0.1]);
        let base = lambda_max(&op, 1e-10, LAMBDA_MAX_CAP).unwrap();
        let shifted = SumOp::new(vec![
            (1.0, Arc::new(diag_op(&[0.3, 1.7, 2.9, 0.1])) as OpRef),
            (
                1.0,
                Arc::new(ScaledIdentityOp {
                    dim: 4,
                    factor: 0.75,
                }) as OpRef,
            ),
        ]);
        let lam = lambda_max(&shifted, 1e-10, LAMBDA_MAX_CAP).unwrap();
        assert!((lam - (base + 0.75)).abs() < 1e-7);
    }

    #[test]
    fn lambda_min_bound_diagonal() {
        let op = diag_op(&[-1.0, 5.0]);
        let lmin = lambda_min_bound(&op, 5.0, 1e-10, LAMBDA_MAX_CAP).unwrap();
        assert!((lmin - (-1.0)).abs() < 1e-8);

        let id = ScaledIdentityOp { dim: 3, factor: 1.0 };
        let lmin = lambda_min_bound(&id, 1.0, 1e-10, LAMBDA_MAX_CAP).unwrap();
        assert!((lmin - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lambda_min_bound_example41_toy() {
        // the S = diag(-0.98, 1.02) from the scaled-identity proximal toy
        let op = diag_op(&[0.98, -1.02]);
        let shift = 1.0;
        let lmin = lambda_min_bound(&op, shift, 1e-10, LAMBDA_MAX_CAP).unwrap();
        assert!((lmin - (-1.02)).abs() < 1e-8, "got {lmin}");
    }

    #[test]
    fn sqrt_diagonal_and_zero() {
        let r = sym_psd_sqrt(&diag_op(&[4.0, 9.0]), 100).unwrap();
        let mut out = vec![0.0; 2];
        r.apply(&[1.0, 0.0], &mut out);
        assert!((out[0] - 2.0).abs() < 1e-12 && out[1].abs() < 1e-12);
        r.apply(&[0.0, 1.0], &mut out);
        assert!((out[1] - 3.0).abs() < 1e-12);

        let z = sym_psd_sqrt(&ZeroOp { dim: 3 }, 100).unwrap();
        let mut out = vec![0.0; 3];
        z.apply(&[1.0, 2.0, 3.0], &mut out);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sqrt_random_gram_squares_back() {
        let mut state = 123456789u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) * 2.0 - 1.0
        };
        let b = DMatrix::from_fn(5, 5, |_, _| next());
        let m = b.transpose() * &b;
        let op = DenseSymOp::new(m.clone());
        let r = sym_psd_sqrt(&op, 100).unwrap();
        let rr = &r.matrix * &r.matrix;
        assert!((rr - m).norm() <= 1e-8);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let err = sym_psd_sqrt(&diag_op(&[1.0, -0.5]), 100);
        assert!(matches!(err, Err(SolverError::NotPsd { .. })));
    }

    #[test]
    fn sqrt_rejects_above_cap() {
        let err = sym_psd_sqrt(&ZeroOp { dim: 10 }, 5);
        assert!(matches!(err, Err(SolverError::DenseCapExceeded { .. })));
    }

    #[test]
    fn spectral_shift_matches_dense_expansion() {
        let u1 = vec![1.0, 0.0, 0.0];
        let u2 = vec![0.0, 1.0, 0.0];
        let op =
            SpectralShiftOp::new(3, 2.0, vec![(5.0, u1.clone()), (3.0, u2.clone())]).unwrap();
        // dense expansion 2 I + 3 u1 u1^T + 1 u2 u2^T = diag(5,3,2)
        let x = [1.0, 1.0, 1.0];
        let mut out = vec![0.0; 3];
        op.apply(&x, &mut out);
        assert!((out[0] - 5.0).abs() < 1e-12);
        assert!((out[1] - 3.0).abs() < 1e-12);
        assert!((out[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_shift_rejects_nonorthonormal() {
        let u1 = vec![1.0, 0.0];
        let u2 = vec![0.9, 0.1];
        assert!(SpectralShiftOp::new(2, 1.0, vec![(2.0, u1), (2.0, u2)]).is_err());
    }

    #[test]
    fn leading_pairs_deflated_path() {
        // force the deflated path with a tiny dense cap
        let op = diag_op(&[9.0, 7.0, 5.0, 1.0, 0.5, 0.25, 0.1, 0.05]);
        let pairs = leading_eigenpairs(&op, 3, 2, 1e-12, 20_000).unwrap();
        assert_eq!(pairs.len(), 3);
        assert!((pairs[0].0 - 9.0).abs() < 1e-6);
        assert!((pairs[1].0 - 7.0).abs() < 1e-6);
        assert!((pairs[2].0 - 5.0).abs() < 1e-6);
    }
}
