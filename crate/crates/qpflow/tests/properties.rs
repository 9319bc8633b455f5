//! Randomized structural invariants: reflection, quadrature linearity,
//! clipping, the zero extension of the reaction, and the gradient/duality
//! relations on smooth fields.

use std::sync::Arc;

use proptest::prelude::*;

use qpflow::coefficients::{extend_f_hat, CoefficientModel, NonlinearityModel};
use qpflow::grid::{build_grid, integrate, reflect_field, Domain, Field, Grid};
use qpflow::operators::{Problem, RegularizationParams};

fn disk(resolution: usize) -> Arc<Grid> {
    build_grid(Domain::Disk { radius: 1.0 }, resolution).unwrap()
}

/// A smooth bump with five low-order moments; compactly supported inside
/// the disk so reflections stay in range.
fn shape(c: [f64; 5]) -> impl Fn(f64, f64) -> f64 {
    move |x, y| {
        let bump = (1.0 - x * x - y * y).max(0.0);
        bump * (c[0] + c[1] * x + c[2] * y + c[3] * x * y + c[4] * (x * x - y * y))
    }
}

fn coeffs() -> impl Strategy<Value = [f64; 5]> {
    prop::array::uniform5(-2.0f64..2.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reflection_at_zero_is_an_involution(c in coeffs()) {
        let g = disk(24);
        let u = Field::from_fn(&g, shape(c));
        let twice = reflect_field(&reflect_field(&u, 0.0).unwrap(), 0.0).unwrap();
        for (a, b) in u.values().iter().zip(twice.values()) {
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn quadrature_is_linear(a in coeffs(), b in coeffs(), s in -3.0f64..3.0) {
        let g = disk(24);
        let u = Field::from_fn(&g, shape(a));
        let v = Field::from_fn(&g, shape(b));
        let lhs = integrate(&g, u.axpy(s, &v).values());
        let rhs = integrate(&g, u.values()) + s * integrate(&g, v.values());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs() + rhs.abs()));
    }

    #[test]
    fn clipping_is_idempotent_and_bounded(c in coeffs(), floor in -1.0f64..1.0) {
        let g = disk(24);
        let u = Field::from_fn(&g, shape(c));
        let clipped = u.clip_min(floor);
        prop_assert!(clipped.min_value() >= floor - 1e-15);
        let again = clipped.clip_min(floor);
        prop_assert_eq!(clipped.values(), again.values());
        // Clipping never moves a node past the original value from below.
        for (orig, cut) in u.values().iter().zip(clipped.values()) {
            prop_assert!(*cut >= *orig - 1e-15);
        }
    }

    #[test]
    fn extended_reaction_vanishes_below_zero(q in 1.0f64..6.0, s in -50.0f64..50.0) {
        let nm = NonlinearityModel::power(q, 2, 2.0).unwrap();
        let hat = extend_f_hat(&nm);
        if s <= 0.0 {
            prop_assert_eq!(hat.f(s), 0.0);
        } else {
            prop_assert!((hat.f(s) - nm.f(s)).abs() <= 1e-12 * (1.0 + nm.f(s).abs()));
        }
        // Extending twice changes nothing.
        let hat2 = extend_f_hat(&hat);
        prop_assert_eq!(hat.f(s), hat2.f(s));
    }

    #[test]
    fn directional_derivative_matches_finite_differences(
        a in coeffs(),
        b in coeffs(),
        p_idx in 0usize..3,
        quad in any::<bool>(),
    ) {
        let p = [1.5, 2.0, 3.0][p_idx];
        let g = disk(24);
        let coeff = if quad { CoefficientModel::quadratic() } else { CoefficientModel::constant() };
        let pr = Problem::new(
            Arc::clone(&g),
            coeff,
            NonlinearityModel::power(3.0, 2, p).unwrap(),
            RegularizationParams::default_for(p, &g),
        )
        .unwrap();
        let u = Field::from_fn(&g, shape(a));
        let v = Field::from_fn(&g, shape(b));
        let dd = pr.directional_derivative(&u, &v).total;
        let t = 1e-5 * (1.0 + u.max_abs()).max(v.max_abs());
        let fd = (pr.energy(&u.axpy(t, &v)) - pr.energy(&u.axpy(-t, &v))) / (2.0 * t);
        let scale = dd.abs().max(fd.abs()).max(1e-9);
        prop_assert!(
            (dd - fd).abs() / scale <= 2e-4,
            "dd {} vs fd {} at p {}", dd, fd, p
        );
    }

    #[test]
    fn residual_pairing_is_the_energy_gradient(
        a in coeffs(),
        b in coeffs(),
        p_idx in 0usize..3,
    ) {
        let p = [1.5, 2.0, 3.0][p_idx];
        let g = disk(24);
        let pr = Problem::new(
            Arc::clone(&g),
            CoefficientModel::constant(),
            NonlinearityModel::zero(2, p),
            RegularizationParams::default_for(p, &g),
        )
        .unwrap();
        let u = Field::from_fn(&g, shape(a));
        let v = Field::from_fn(&g, shape(b));
        let dd = pr.directional_derivative(&u, &v).total;
        let pairing = pr.residual_pairing(&u, &v);
        let scale = dd.abs().max(pairing.abs()).max(1e-300);
        prop_assert!((dd - pairing).abs() / scale <= 1e-10, "dd {} pairing {}", dd, pairing);
    }
}
