//! Property-based invariants for the closed-form pieces.

use proptest::prelude::*;

use ipadmm::operator::{densify, SelfAdjointOp, SpectralShiftOp};
use ipadmm::problem::{project_nonneg, prox_l1};

proptest! {
    /// The shrinkage output satisfies the subgradient optimality condition
    /// of min weight*|x| + rho/2 (x - v)^2 componentwise.
    #[test]
    fn prox_l1_first_order_optimality(
        v in proptest::collection::vec(-50.0f64..50.0, 1..12),
        weight in 0.0f64..10.0,
        rho in 0.01f64..10.0,
    ) {
        let x = prox_l1(&v, weight, rho).unwrap();
        for (xi, vi) in x.iter().zip(&v) {
            // residual of the smooth part: rho (x - v)
            let g = rho * (xi - vi);
            if *xi != 0.0 {
                prop_assert!((g + weight * xi.signum()).abs() <= 1e-9 * (1.0 + weight));
            } else {
                prop_assert!(g.abs() <= weight + 1e-9 * (1.0 + weight));
            }
        }
    }

    /// Projection minimizes distance over the orthant: any feasible point is
    /// at least as far from v.
    #[test]
    fn projection_is_closest_feasible_point(
        v in proptest::collection::vec(-10.0f64..10.0, 1..10),
        probe in proptest::collection::vec(0.0f64..10.0, 1..10),
    ) {
        let p = project_nonneg(&v);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        let d_proj: f64 = p.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
        let k = v.len().min(probe.len());
        let mut q = p.clone();
        q[..k].copy_from_slice(&probe[..k]);
        let d_probe: f64 = q.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
        prop_assert!(d_proj <= d_probe + 1e-12);
    }

    /// Spectral-shift operators agree with their dense expansion and invert
    /// exactly through the closed-form reciprocal.
    #[test]
    fn spectral_shift_inverse_round_trip(
        base in 0.1f64..5.0,
        bump1 in 0.0f64..10.0,
        bump2 in 0.0f64..10.0,
        x in proptest::collection::vec(-5.0f64..5.0, 4),
    ) {
        let u1 = vec![0.5, 0.5, 0.5, 0.5];
        let u2 = vec![0.5, -0.5, 0.5, -0.5];
        let op = SpectralShiftOp::new(
            4,
            base,
            vec![(base + bump1, u1), (base + bump2, u2)],
        ).unwrap();
        let inv = op.inverse();
        let mut mid = vec![0.0; 4];
        let mut back = vec![0.0; 4];
        op.apply(&x, &mut mid);
        inv.apply(&mid, &mut back);
        let err: f64 = back.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-10 * (1.0 + nx));

        // dense expansion agreement
        let d = densify(&op);
        let xd = nalgebra::DVector::from_column_slice(&x);
        let dense_out = &d * xd;
        let direct_err: f64 = dense_out
            .iter()
            .zip(&mid)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        prop_assert!(direct_err <= 1e-10 * (1.0 + nx));
    }
}
