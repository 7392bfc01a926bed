//! Majorized surrogates and the spectral-truncation majorizer.
//!
//! A smooth convex block f with upper curvature `Sigma_hat` is replaced by
//! the quadratic model anchored at `x'`:
//!
//!   fhat(x; x') = f(x') + <x - x', grad f(x')> + 1/2 ||x - x'||^2_{Sigma_hat}
//!
//! which dominates f everywhere and touches it at the anchor. The
//! spectral-truncation majorizer turns any operator G with lambda_l > 0 into
//! the cheap-to-invert upper bound
//! `M = lambda_l I + sum_{i<=l} (lambda_i - lambda_l) u_i u_i^*`.

use crate::error::{Result, SolverError};
use crate::linalg::dot;
use crate::operator::{
    leading_eigenpairs, SelfAdjointOp, SpectralShiftOp, LAMBDA_MAX_CAP, LAMBDA_MAX_TOL,
};
use crate::problem::SmoothBlock;

/// Quadratic majorant of a smooth block, frozen at an anchor point.
pub struct MajorantAt<'a> {
    pub anchor: Vec<f64>,
    pub base_value: f64,
    pub anchor_gradient: Vec<f64>,
    pub upper_curvature: &'a dyn SelfAdjointOp,
}

impl<'a> MajorantAt<'a> {
    pub fn new(block: &'a SmoothBlock, anchor: &[f64]) -> Self {
        MajorantAt {
            anchor: anchor.to_vec(),
            base_value: block.value(anchor),
            anchor_gradient: block.gradient(anchor),
            upper_curvature: block.upper_curvature.as_ref(),
        }
    }

    pub fn value_at(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(&self.anchor).map(|(a, b)| a - b).collect();
        let lin = dot(&d, &self.anchor_gradient);
        let mut sd = vec![0.0; d.len()];
        self.upper_curvature.apply(&d, &mut sd);
        self.base_value + lin + 0.5 * dot(&d, &sd)
    }
}

/// Evaluates the majorant of `block` anchored at `anchor` at the point `x`.
pub fn majorant_value(block: &SmoothBlock, anchor: &[f64], x: &[f64]) -> f64 {
    MajorantAt::new(block, anchor).value_at(x)
}

/// Spectral-truncation majorizer of `g` using its top `l` eigenpairs:
/// `M = lambda_l I + sum_{i<=l} (lambda_i - lambda_l) u_i u_i^*  >=  g`.
///
/// Requires `lambda_l > 0`; errors otherwise, since a nonpositive base would
/// not majorize the trailing spectrum.
pub fn spectral_truncation(
    g: &dyn SelfAdjointOp,
    l: usize,
    dense_cap: usize,
) -> Result<SpectralShiftOp> {
    if l == 0 {
        return Err(SolverError::InvalidParameter(
            "spectral truncation needs l >= 1".into(),
        ));
    }
    let pairs = leading_eigenpairs(g, l, dense_cap, LAMBDA_MAX_TOL, LAMBDA_MAX_CAP)?;
    let lambda_l = pairs.last().map(|p| p.0).unwrap_or(0.0);
    if lambda_l <= 0.0 {
        return Err(SolverError::NotMajorizable { lambda_l });
    }
    SpectralShiftOp::new(g.dim(), lambda_l, pairs)
}

/// Closed-form inverse of a spectral-shift operator.
pub fn spectral_shift_inverse(m: &SpectralShiftOp) -> SpectralShiftOp {
    m.inverse()
}
