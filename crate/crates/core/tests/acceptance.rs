//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::path::{Path, PathBuf};

use halfflow::checks::{crossform_suite, geometry_suite, identity_suite, sphere_crossform_datum, torus_crossform_datum};
use halfflow::config::ExperimentConfig;
use halfflow::diagnostics::{convergence_detector, energy_decay_check, DEFAULT_POINT_TOL};
use halfflow::field::GridFunction;
use halfflow::flow::{
    evolve, flow_velocity, rhs_divergence_form, rhs_hypersurface_form, rhs_projection_form,
    rhs_quadratic_form, rhs_sphere_form, FlowFormulation, RecordOptions, Trajectory,
};
use halfflow::frac::{
    commutator_alt_residual, commutator_c, frac_laplacian_singular, half_laplacian,
    product_laplacian_residual, MatrixField,
};
use halfflow::grid::CircleGrid;
use halfflow::manifold::{ManifoldDescriptor, DEFAULT_GAUSS_ORDER};
use halfflow::runner::run_evolve;

type Outcome = Result<String, String>;

fn scenario(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.cfg"));
    ExperimentConfig::from_file(&path).expect("scenario parses")
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run(cfg: &ExperimentConfig) -> Trajectory {
    let n = cfg.manifold().unwrap();
    let u0 = cfg.initial.generate(cfg.grid(), &n).unwrap();
    evolve(u0, &n, cfg.formulation, &cfg.solver, &cfg.record, |_, _| Ok(())).unwrap()
}

fn c1_eigen() -> Outcome {
    let g = CircleGrid::new(128).unwrap();
    let mut worst: f64 = 0.0;
    for k in [1.0, 2.0, 3.0, 8.0] {
        let f = GridFunction::scalar_from_fn(g, |x| (k * x).cos());
        worst = worst.max(half_laplacian(&f).relative_l2_error(&f.scale(k)).unwrap());
    }
    verdict(worst <= 1e-12, format!("max relative error {worst:.2e} (tol 1e-12)"))
}

fn c2_identities() -> Outcome {
    let r = identity_suite(64, 2024).unwrap();
    let keys = ["leibniz", "antisymmetry", "duality_adjointness"];
    let relevant: Vec<_> = r.checks.iter().filter(|c| keys.iter().any(|k| c.name.starts_with(k))).collect();
    let worst = relevant.iter().map(|c| c.value).fold(0.0, f64::max);
    verdict(
        relevant.len() == 9 && relevant.iter().all(|c| c.passed),
        format!("{} checks, worst {worst:.2e} (tol 1e-12)", relevant.len()),
    )
}

fn c3_singular() -> Outcome {
    let err = |m: usize| {
        let f = GridFunction::scalar_from_fn(CircleGrid::new(m).unwrap(), |x| x.cos().exp());
        frac_laplacian_singular(&f, 0.5).unwrap().relative_l2_error(&half_laplacian(&f)).unwrap()
    };
    let (e1, e2, e3) = (err(128), err(256), err(512));
    verdict(
        e2 <= 1e-2 && e1 > e2 && e2 > e3,
        format!("M=128 {e1:.2e}, M=256 {e2:.2e}, M=512 {e3:.2e}"),
    )
}

fn c4_product_commutator() -> Outcome {
    let product = |m: usize| {
        let g = CircleGrid::new(m).unwrap();
        let f = GridFunction::scalar_from_fn(g, |x| x.cos().exp());
        let h = GridFunction::scalar_from_fn(g, |x| 1.0 / (1.5 + x.sin()));
        let lhs = half_laplacian(&f.pointwise_mul(&h).unwrap());
        product_laplacian_residual(&f, &h).unwrap().norm_l2() / lhs.norm_l2()
    };
    let commutator = |m: usize| {
        let g = CircleGrid::new(m).unwrap();
        let a = MatrixField::new(
            2,
            2,
            GridFunction::from_fn(g, 4, |x, o| {
                o[0] = x.cos().exp();
                o[1] = 1.0 / (1.3 - x.sin());
                o[2] = (2.0 * x).sin();
                o[3] = 0.5 + x.cos();
            }),
        )
        .unwrap();
        let b = GridFunction::from_fn(g, 2, |x, o| {
            o[0] = 1.0 / (1.02 - x.cos());
            o[1] = (x.sin()).exp();
        });
        commutator_alt_residual(&a, &b).unwrap().norm_l2() / commutator_c(&a, &b).unwrap().norm_l2()
    };
    let (p1, p2, p3) = (product(128), product(256), product(512));
    let (q1, q2, q3) = (commutator(128), commutator(256), commutator(512));
    let id = identity_suite(64, 7).unwrap();
    let constants: Vec<_> = id
        .checks
        .iter()
        .filter(|c| c.name.starts_with("product_rule_constant") || c.name.starts_with("commutator_alt_constant"))
        .collect();
    let cmax = constants.iter().map(|c| c.value).fold(0.0, f64::max);
    verdict(
        p2 <= 2e-2 && p1 > p2 && p2 > p3 && q2 <= 2e-2 && q1 > q2 && q2 > q3 && constants.len() == 4 && cmax <= 1e-12,
        format!(
            "product {p1:.2e}/{p2:.2e}/{p3:.2e}, commutator {q1:.2e}/{q2:.2e}/{q3:.2e} (M=128/256/512), constants {cmax:.2e}"
        ),
    )
}

fn c5_geometry() -> Outcome {
    let r = geometry_suite(64, 11).unwrap();
    let geo: Vec<_> = r.checks.iter().filter(|c| !c.name.starts_with("taylor")).collect();
    let failed: Vec<_> = geo.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    let get = |n: &str| r.get(n).map(|c| c.value).unwrap_or(f64::NAN);
    verdict(
        failed.is_empty() && geo.len() == 14,
        format!(
            "{} checks; sphere jet {:.1e}, torus oracle {:.1e}, worst idempotence {:.1e}{}",
            geo.len(),
            get("sphere_closed_form_vs_fd_jet"),
            get("torus_projection_vs_brute_force"),
            geo.iter().filter(|c| c.name.ends_with("idempotence")).map(|c| c.value).fold(0.0, f64::max),
            if failed.is_empty() { String::new() } else { format!("; failed {failed:?}") }
        ),
    )
}

fn c6_taylor() -> Outcome {
    let r = geometry_suite(64, 11).unwrap();
    let m16 = r.get("taylor_residual_gauss16").unwrap();
    let ratio = r.get("taylor_residual_ratio_32_over_16").unwrap();
    verdict(
        m16.passed && ratio.passed,
        format!("residual {:.2e} (tol 1e-6), 32/16 ratio {:.2e}", m16.value, ratio.value),
    )
}

fn c7_omega() -> Outcome {
    let r = crossform_suite(256, 3).unwrap();
    let a = r.get("omega_antisymmetry").unwrap();
    let c = r.get("omega_constant_map").unwrap();
    let re = r.get("omega_reassembly_vs_divergence").unwrap();
    verdict(
        a.passed && c.passed && re.passed,
        format!(
            "antisymmetry {:.1e}, constant map {:.1e}, reassembly gap {:.2e} (tol 3e-2)",
            a.value, c.value, re.value
        ),
    )
}

fn c8_formulations() -> Outcome {
    let s2 = ManifoldDescriptor::sphere(3).unwrap();
    let gaps = |m: usize| {
        let u = sphere_crossform_datum(5).generate(CircleGrid::new(m).unwrap(), &s2).unwrap();
        let p = rhs_projection_form(&s2, &u).unwrap();
        let d = rhs_divergence_form(&s2, &u, DEFAULT_GAUSS_ORDER).unwrap();
        let q = rhs_quadratic_form(&s2, &u, DEFAULT_GAUSS_ORDER).unwrap();
        let s = rhs_sphere_form(&s2, &u).unwrap();
        [
            d.relative_l2_error(&p).unwrap(),
            q.relative_l2_error(&p).unwrap(),
            q.relative_l2_error(&d).unwrap(),
            s.relative_l2_error(&p).unwrap(),
        ]
    };
    let g256 = gaps(256);
    let g512 = gaps(512);
    // D and Q agree to rounding on the sphere; below 1e-12 both count as converged.
    let decreasing = (0..3).all(|k| g512[k] < g256[k] || (g512[k] <= 1e-12 && g256[k] <= 1e-12));
    let torus = ManifoldDescriptor::torus(2.0, 0.5).unwrap();
    let u = torus_crossform_datum(5).generate(CircleGrid::new(256).unwrap(), &torus).unwrap();
    let th = rhs_hypersurface_form(&torus, &u, DEFAULT_GAUSS_ORDER)
        .unwrap()
        .relative_l2_error(&rhs_projection_form(&torus, &u).unwrap())
        .unwrap();
    verdict(
        g256[..3].iter().all(|&g| g <= 5e-2) && decreasing && th <= 5e-2 && g256[3] <= 3e-2,
        format!(
            "S2 M=256 P-D {:.2e} P-Q {:.2e} D-Q {:.2e}; M=512 {:.2e} {:.2e} {:.2e}; torus H-P {th:.2e}; sphere form {:.2e}",
            g256[0], g256[1], g256[2], g512[0], g512[1], g512[2], g256[3]
        ),
    )
}

fn c9_stationary() -> Outcome {
    let cfg = scenario("identity_map_stationary");
    let n = cfg.manifold().unwrap();
    let u0 = cfg.initial.generate(cfg.grid(), &n).unwrap();
    let v = flow_velocity(&n, FlowFormulation::Projection, &u0, DEFAULT_GAUSS_ORDER).unwrap().norm_l2();
    let traj = run(&cfg);
    let drift = traj.final_state.u.sub(&u0).unwrap().norm_l2();
    verdict(
        v <= 1e-8 && drift <= 1e-4 && traj.final_state.step_count == 100,
        format!("velocity {v:.2e} (tol 1e-8), drift after {} steps {drift:.2e}", traj.final_state.step_count),
    )
}

fn c10_energy_decay() -> Outcome {
    let mut cfg = scenario("small_energy_sphere");
    cfg.solver.t_end = 5.0;
    let traj = run(&cfg);
    let rep = energy_decay_check(&traj.records, 1e-6);
    let ratio = rep.final_energy / rep.initial_energy;
    verdict(
        rep.passed && ratio <= 0.5 && traj.records.len() == 5001,
        format!("max step increase {:.2e}, E(5)/E(0) = {ratio:.2e}", rep.max_increase),
    )
}

fn max_violation(cfg: &ExperimentConfig) -> f64 {
    run(cfg).records.iter().map(|r| r.constraint_violation).fold(0.0, f64::max)
}

fn c11_constraint() -> Outcome {
    let mut cfg = scenario("no_reprojection_drift");
    cfg.record = RecordOptions { stride: 1, ..cfg.record };
    let free = max_violation(&cfg);
    cfg.solver.dt /= 2.0;
    let free_half = max_violation(&cfg);
    cfg.solver.dt *= 2.0;
    cfg.solver.reproject = true;
    let projected = max_violation(&cfg);
    verdict(
        free <= 1e-4 && projected <= 1e-9 && free_half <= 0.5 * free,
        format!("no reprojection {free:.2e} (dt/2: {free_half:.2e}), with reprojection {projected:.2e}"),
    )
}

fn c12_ladder() -> Outcome {
    let base = scenario("dt_refinement_uniqueness");
    let finals: Vec<GridFunction> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| {
            let mut cfg = base.clone();
            cfg.solver.dt = dt;
            run(&cfg).final_state.u
        })
        .collect();
    let a = finals[0].sub(&finals[1]).unwrap().norm_l2();
    let b = finals[1].sub(&finals[2]).unwrap().norm_l2();
    let ratio = a / b;
    verdict(
        (ratio - 2.0).abs() <= 0.5,
        format!("|u(4e-3)-u(2e-3)| {a:.3e}, |u(2e-3)-u(1e-3)| {b:.3e}, ratio {ratio:.3}"),
    )
}

fn c13_convergence() -> Outcome {
    let cfg = scenario("small_energy_sphere");
    let traj = run(&cfg);
    let last = traj.records.last().unwrap();
    let v = convergence_detector(&traj.records, 100, DEFAULT_POINT_TOL, None).unwrap();
    verdict(
        (last.t - 20.0).abs() < 1e-9 && last.oscillation <= 0.05 && last.harmonic_residual <= 1e-3 && v.converged_to_point,
        format!(
            "T = {}, oscillation {:.2e}, harmonic residual {:.2e}",
            last.t, last.oscillation, last.harmonic_residual
        ),
    )
}

fn c14_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs: Vec<Vec<u8>> = Vec::new();
    for run_id in 0..2 {
        let mut cfg = scenario("dt_refinement_uniqueness");
        cfg.output_dir = dir.path().join(format!("run{run_id}"));
        cfg.calibration_file = PathBuf::from("does-not-exist.json");
        let s = run_evolve(&cfg).unwrap();
        outputs.push(std::fs::read(s.output_dir.join("trajectory.csv")).unwrap());
    }
    verdict(
        outputs[0] == outputs[1] && !outputs[0].is_empty(),
        format!("two seeded runs, {} bytes each, identical: {}", outputs[0].len(), outputs[0] == outputs[1]),
    )
}

fn main() {
    std::env::remove_var(halfflow::runner::OUTPUT_DIR_ENV);
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("spectral eigen-exactness", c1_eigen),
        ("algebraic identity suite", c2_identities),
        ("singular vs spectral half-Laplacian", c3_singular),
        ("product rule and commutator form", c4_product_commutator),
        ("geometry suite", c5_geometry),
        ("Taylor remainder of the projection", c6_taylor),
        ("Omega antisymmetry and reassembly", c7_omega),
        ("formulation equivalence", c8_formulations),
        ("stationarity of the identity map", c9_stationary),
        ("energy decay", c10_energy_decay),
        ("constraint preservation", c11_constraint),
        ("dt ladder uniqueness", c12_ladder),
        ("convergence to a point", c13_convergence),
        ("determinism", c14_determinism),
    ];
    let mut failures = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{:>2}] {name}: {detail} ({:.1}s)", k + 1, start.elapsed().as_secs_f64());
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
