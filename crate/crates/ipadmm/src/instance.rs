//! Seeded random benchmark instances and the problem JSON schema.
//!
//! Generation mirrors the usual sparse-regression recipe: a PSD quadratic
//! from a thin sparse Gram factor, a sparse constraint matrix, a planted
//! point, and targets
//!
//!   Q1 ~ sparse(floor(0.1 n) x n, 10% density, N(0,1)), Q = Q1' Q1,
//!   H  ~ sparse(m x n, 20% density, N(0,1)),
//!   xx ~ N(0, I_n), c = H xx + max(N(0, I_m), 0), b = Q xx,
//!   varrho = 5 sqrt(n), d = c - 5 e, chi in {0, 2 varrho}.
//!
//! Randomness comes from ChaCha8 keyed by the instance seed, with one
//! fixed stream per component so results are reproducible across platforms:
//! stream 0 = Q1, stream 1 = H, stream 2 = xx, stream 3 = the noise added
//! to c. A degenerate all-zero sparse draw is redrawn on stream + 16.
//!
//! Sparse draws place round(density * rows * cols) entries at positions
//! sampled uniformly without replacement, with standard-normal values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::problem::{build_benchmark_problem, BenchmarkProblemData, CompositeProblem};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChiMode {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "2rho")]
    TwoVarrho,
}

impl ChiMode {
    pub fn parse(s: &str) -> Result<ChiMode> {
        match s {
            "0" => Ok(ChiMode::Zero),
            "2rho" => Ok(ChiMode::TwoVarrho),
            other => Err(SolverError::Usage(format!(
                "chi mode must be '0' or '2rho', got '{other}'"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChiMode::Zero => "0",
            ChiMode::TwoVarrho => "2rho",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct InstanceSpec {
    pub m: usize,
    pub n: usize,
    pub chi_mode: ChiMode,
    pub seed: u64,
    pub q_factor_density: f64,
    pub h_density: f64,
}

impl InstanceSpec {
    pub fn new(m: usize, n: usize, chi_mode: ChiMode, seed: u64) -> Self {
        InstanceSpec {
            m,
            n,
            chi_mode,
            seed,
            q_factor_density: 0.1,
            h_density: 0.2,
        }
    }

    pub fn varrho(&self) -> f64 {
        5.0 * (self.n as f64).sqrt()
    }

    pub fn chi(&self) -> f64 {
        match self.chi_mode {
            ChiMode::Zero => 0.0,
            ChiMode::TwoVarrho => 2.0 * self.varrho(),
        }
    }
}

/// On-disk problem schema; sparse matrices as 0-based (row, col, value)
/// coordinate triplets, all numbers 64-bit floats.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProblemJson {
    pub n: usize,
    pub m_z: usize,
    #[serde(rename = "Q")]
    pub q: Vec<(usize, usize, f64)>,
    #[serde(rename = "H")]
    pub h: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub varrho: f64,
    pub chi: f64,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// round(density * rows * cols) nonzeros at uniform positions without
/// replacement, standard-normal values. Redraws on stream + 16 if the draw
/// comes out identically zero.
fn sparse_randn(
    rows: usize,
    cols: usize,
    density: f64,
    seed: u64,
    stream: u64,
) -> Result<CsrMatrix> {
    let total = rows * cols;
    let target = ((density * total as f64).round() as usize).min(total);
    let mut attempt_stream = stream;
    for _attempt in 0..8 {
        let mut rng = stream_rng(seed, attempt_stream);
        let idx = rand::seq::index::sample(&mut rng, total, target);
        let mut triplets = Vec::with_capacity(target);
        let mut any_nonzero = false;
        for flat in idx.iter() {
            let v: f64 = rng.sample(StandardNormal);
            if v != 0.0 {
                any_nonzero = true;
            }
            triplets.push((flat / cols, flat % cols, v));
        }
        if any_nonzero {
            return CsrMatrix::from_triplets(rows, cols, &triplets);
        }
        eprintln!(
            "warning: degenerate all-zero sparse draw (seed {seed}, stream {attempt_stream}); redrawing"
        );
        attempt_stream += 16;
    }
    Err(SolverError::InvalidParameter(format!(
        "sparse draw degenerate after retries ({rows}x{cols}, density {density})"
    )))
}

fn randn_vec(len: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, stream);
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Generates the instance data together with the planted point `xx`.
pub fn generate_instance_with_planted(spec: &InstanceSpec) -> Result<(ProblemJson, Vec<f64>)> {
    if spec.m < 2 || spec.n < 2 {
        return Err(SolverError::InvalidParameter(
            "instance needs m >= 2 and n >= 2".into(),
        ));
    }
    let q_rows = ((0.1 * spec.n as f64).floor() as usize).max(1);
    let q1 = sparse_randn(q_rows, spec.n, spec.q_factor_density, spec.seed, 0)?;
    let q = q1.gram();
    let h = sparse_randn(spec.m, spec.n, spec.h_density, spec.seed, 1)?;
    let xx = randn_vec(spec.n, spec.seed, 2);
    let noise = randn_vec(spec.m, spec.seed, 3);

    let mut c = vec![0.0; spec.m];
    h.matvec(&xx, &mut c);
    for (ci, ni) in c.iter_mut().zip(&noise) {
        *ci += ni.max(0.0);
    }
    let mut b = vec![0.0; spec.n];
    q.matvec(&xx, &mut b);
    let d: Vec<f64> = c.iter().map(|ci| ci - 5.0).collect();

    let json = ProblemJson {
        n: spec.n,
        m_z: spec.m,
        q: q.to_triplets(),
        h: h.to_triplets(),
        b,
        c,
        d,
        varrho: spec.varrho(),
        chi: spec.chi(),
    };
    Ok((json, xx))
}

pub fn generate_instance_json(spec: &InstanceSpec) -> Result<ProblemJson> {
    Ok(generate_instance_with_planted(spec)?.0)
}

/// Assembles the solver-side problem from the schema.
pub fn problem_from_json(json: &ProblemJson) -> Result<CompositeProblem> {
    let q = CsrMatrix::from_triplets(json.n, json.n, &json.q)?;
    let h = CsrMatrix::from_triplets(json.m_z, json.n, &json.h)?;
    build_benchmark_problem(BenchmarkProblemData {
        q_mat: q,
        h_mat: h,
        b: json.b.clone(),
        c: json.c.clone(),
        d: json.d.clone(),
        varrho: json.varrho,
        chi: json.chi,
    })
}

pub fn generate_instance(spec: &InstanceSpec) -> Result<CompositeProblem> {
    problem_from_json(&generate_instance_json(spec)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{lambda_min_bound, lambda_max, LAMBDA_MAX_CAP, LAMBDA_MAX_TOL};
    use crate::problem::SharedCsrSym;
    use std::sync::Arc;

    fn spec() -> InstanceSpec {
        InstanceSpec::new(8, 10, ChiMode::Zero, 42)
    }

    #[test]
    fn derived_scalars() {
        let s = InstanceSpec::new(8, 16, ChiMode::TwoVarrho, 1);
        assert_eq!(s.varrho(), 20.0);
        assert_eq!(s.chi(), 40.0);
        assert_eq!(InstanceSpec::new(8, 16, ChiMode::Zero, 1).chi(), 0.0);
    }

    #[test]
    fn q_is_psd_by_construction() {
        let (json, _) = generate_instance_with_planted(&spec()).unwrap();
        let q = CsrMatrix::from_triplets(json.n, json.n, &json.q).unwrap();
        let op = SharedCsrSym { matrix: Arc::new(q) };
        let lmax = lambda_max(&op, LAMBDA_MAX_TOL, LAMBDA_MAX_CAP).unwrap();
        let lmin =
            lambda_min_bound(&op, lmax.abs().max(1.0) * 1.01, LAMBDA_MAX_TOL, LAMBDA_MAX_CAP)
                .unwrap();
        assert!(lmin >= -1e-10 * (1.0 + lmax), "lambda_min(Q) = {lmin}");
    }

    #[test]
    fn c_minus_h_xx_is_nonnegative() {
        let (json, xx) = generate_instance_with_planted(&spec()).unwrap();
        let h = CsrMatrix::from_triplets(json.m_z, json.n, &json.h).unwrap();
        let mut hxx = vec![0.0; json.m_z];
        h.matvec(&xx, &mut hxx);
        for (ci, hi) in json.c.iter().zip(&hxx) {
            assert!(ci - hi >= 0.0);
        }
        // d = c - 5e exactly
        for (di, ci) in json.d.iter().zip(&json.c) {
            assert_eq!(*di, ci - 5.0);
        }
    }

    #[test]
    fn fixed_seed_reproduces_identical_json() {
        let a = serde_json::to_string(&generate_instance_json(&spec()).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_instance_json(&spec()).unwrap()).unwrap();
        assert_eq!(a, b);

        let other = serde_json::to_string(
            &generate_instance_json(&InstanceSpec::new(8, 10, ChiMode::Zero, 43)).unwrap(),
        )
        .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn json_round_trip() {
        let json = generate_instance_json(&spec()).unwrap();
        let text = serde_json::to_string(&json).unwrap();
        let back: ProblemJson = serde_json::from_str(&text).unwrap();
        assert_eq!(json, back);
        let problem = problem_from_json(&back).unwrap();
        assert_eq!(problem.dim_x(), 10);
        assert_eq!(problem.dim_y(), 8);
    }
}
