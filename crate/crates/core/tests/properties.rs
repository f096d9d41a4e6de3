use std::f64::consts::PI;

use proptest::prelude::*;

use halfflow::config::ExperimentConfig;
use halfflow::diagnostics::{constraint_violation, energy_concentration, energy_decay_check_values};
use halfflow::field::GridFunction;
use halfflow::frac::{
    energy_half, frac_divergence, frac_gradient, half_laplacian, leibniz_residual, od_pairing,
    quarter_laplacian, OffDiagKernel,
};
use halfflow::grid::{arc_distance, chord_distance, CircleGrid};
use halfflow::manifold::ManifoldDescriptor;

fn trig(g: CircleGrid, dim: usize, coeffs: &[f64]) -> GridFunction {
    let modes = coeffs.len() / (2 * dim);
    GridFunction::from_fn(g, dim, |x, o| {
        for (c, v) in o.iter_mut().enumerate() {
            *v = (0..modes)
                .map(|k| {
                    let a = &coeffs[(c * modes + k) * 2..(c * modes + k) * 2 + 2];
                    let kf = (k + 1) as f64;
                    a[0] * (kf * x).cos() + a[1] * (kf * x).sin()
                })
                .sum();
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chord_metric_bounds(x in -10.0f64..10.0, y in -10.0f64..10.0) {
        let c = chord_distance(x, y);
        let a = arc_distance(x, y);
        prop_assert!((c - chord_distance(y, x)).abs() < 1e-15);
        prop_assert!(c <= a + 1e-12);
        prop_assert!(c >= 2.0 / PI * a - 1e-12);
        prop_assert!(c <= 2.0 + 1e-15);
    }

    #[test]
    fn gradient_is_antisymmetric_and_leibniz_exact(
        f in prop::collection::vec(-1.0f64..1.0, 32),
        h in prop::collection::vec(-1.0f64..1.0, 32),
        s in 0.05f64..0.95,
    ) {
        let g = CircleGrid::new(32).unwrap();
        let f = GridFunction::new(g, 1, f).unwrap();
        let h = GridFunction::new(g, 1, h).unwrap();
        prop_assert_eq!(frac_gradient(&f, s).unwrap().antisymmetry_defect(), 0.0);
        prop_assert!(leibniz_residual(&f, &h, s).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn divergence_is_adjoint_of_gradient(
        k in prop::collection::vec(-1.0f64..1.0, 16 * 16 * 2),
        phi in prop::collection::vec(-1.0f64..1.0, 32),
        s in 0.05f64..0.95,
    ) {
        let g = CircleGrid::new(16).unwrap();
        let big_f = OffDiagKernel::new(g, 2, k, None).unwrap();
        let phi = GridFunction::new(g, 2, phi).unwrap();
        let lhs = frac_divergence(&big_f, s).unwrap().inner_l2(&phi).unwrap();
        let dphi = frac_gradient(&phi, s).unwrap().with_diagonal_limit(None).unwrap();
        let rhs: f64 = od_pairing(&big_f, &dphi).unwrap().values().iter().sum::<f64>() * g.spacing();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn half_laplacian_energy_identities(c in prop::collection::vec(-1.0f64..1.0, 12)) {
        let g = CircleGrid::new(64).unwrap();
        let u = trig(g, 2, &c);
        let e = energy_half(&u);
        let via_l = 0.5 * half_laplacian(&u).inner_l2(&u).unwrap();
        let q = quarter_laplacian(&u);
        let via_q = 0.5 * q.inner_l2(&q).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert!((e - via_l).abs() <= 1e-10 * e.max(1.0));
        prop_assert!((e - via_q).abs() <= 1e-10 * e.max(1.0));
    }

    #[test]
    fn concentration_grows_with_radius(c in prop::collection::vec(-1.0f64..1.0, 8), r in 0.01f64..1.9) {
        let g = CircleGrid::new(64).unwrap();
        let u = trig(g, 1, &c);
        let a = energy_concentration(&u, r).unwrap();
        let b = energy_concentration(&u, r * 1.05).unwrap();
        prop_assert!(b >= a - 1e-14);
    }

    #[test]
    fn projection_is_idempotent_on_sphere_and_torus(
        phi in 0.0f64..2.0 * PI,
        theta in 0.0f64..2.0 * PI,
        off in prop::array::uniform3(-0.1f64..0.1),
    ) {
        let s2 = ManifoldDescriptor::sphere(3).unwrap();
        let p = [theta.sin() * phi.cos() + off[0], theta.sin() * phi.sin() + off[1], theta.cos() + off[2]];
        let q = s2.project(&p).unwrap();
        let qq = s2.project(&q).unwrap();
        prop_assert!(q.iter().zip(&qq).all(|(a, b)| (a - b).abs() < 1e-14));

        let t = ManifoldDescriptor::torus(2.0, 0.5).unwrap();
        let rho = 2.0 + 0.5 * theta.cos();
        let p = [rho * phi.cos() + off[0], rho * phi.sin() + off[1], 0.5 * theta.sin() + off[2]];
        let q = t.project(&p).unwrap();
        let qq = t.project(&q).unwrap();
        prop_assert!(q.iter().zip(&qq).all(|(a, b)| (a - b).abs() < 1e-9));
        prop_assert!(t.distance(&q).unwrap() < 1e-9);
    }

    #[test]
    fn constraint_violation_ignores_node_order(shift in 0usize..32, c in prop::collection::vec(-0.05f64..0.05, 12)) {
        let g = CircleGrid::new(32).unwrap();
        let s2 = ManifoldDescriptor::sphere(3).unwrap();
        let bump = trig(g, 3, &c);
        let u = GridFunction::from_fn(g, 3, |_, o| o.copy_from_slice(&[0.0, 0.0, 1.0]))
            .add(&bump)
            .unwrap();
        let mut shifted = u.clone();
        for j in 0..32 {
            shifted.row_mut(j).copy_from_slice(u.row((j + shift) % 32));
        }
        prop_assert_eq!(constraint_violation(&s2, &u).unwrap(), constraint_violation(&s2, &shifted).unwrap());
    }

    #[test]
    fn non_increasing_energies_pass_decay_check(steps in prop::collection::vec(0.0f64..1.0, 1..50)) {
        let mut e = vec![10.0];
        for d in &steps {
            let last = *e.last().unwrap();
            e.push(last - d * 0.1);
        }
        prop_assert!(energy_decay_check_values(&e, 0.0).passed);
        e.push(*e.last().unwrap() + 1e-3);
        prop_assert!(!energy_decay_check_values(&e, 1e-4).passed);
    }

    #[test]
    fn grid_size_validation_in_configs(m in 0usize..600) {
        let text = format!("grid.M = {m}\nmanifold.kind = sphere\ninitial.kind = constant\ninitial.point = 0, 0, 1\n");
        let parsed = ExperimentConfig::parse(&text);
        prop_assert_eq!(parsed.is_ok(), m % 2 == 0 && m >= 8);
    }
}
