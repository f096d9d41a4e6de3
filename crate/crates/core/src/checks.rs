//! Named check suites with measured residuals: `identity` (fractional
//! calculus), `geometry` (projections and jets) and `crossform` (agreement
//! between flow formulations and the Ω rewriting).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::field::GridFunction;
use crate::flow::{
    rhs_divergence_form, rhs_hypersurface_form, rhs_projection_form, rhs_quadratic_form,
    rhs_sphere_form, InitialDatum,
};
use crate::frac::{
    commutator_alt_residual, duality_constant, frac_divergence, frac_gradient, half_laplacian,
    leibniz_residual, od_pairing, product_laplacian_residual, riesz_transform, derivative,
    MatrixField, OffDiagKernel,
};
use crate::grid::CircleGrid;
use crate::manifold::{
    omega_apply, omega_potential, remainders_r123, taylor_residual, ManifoldDescriptor,
    DEFAULT_GAUSS_ORDER,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Identity,
    Geometry,
    Crossform,
}

impl Suite {
    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Identity => "identity",
            Suite::Geometry => "geometry",
            Suite::Crossform => "crossform",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "identity" => Ok(Suite::Identity),
            "geometry" => Ok(Suite::Geometry),
            "crossform" => Ok(Suite::Crossform),
            _ => Err(format!("unknown suite `{s}` (expected identity, geometry or crossform)")),
        }
    }
}

/// One measured quantity against its tolerance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub suite: Suite,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl CheckReport {
    fn new(suite: Suite, m: usize, seed: u64) -> Self {
        Self {
            suite,
            m,
            seed,
            passed: true,
            checks: Vec::new(),
        }
    }

    fn push(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        let passed = value.is_finite() && value <= tolerance;
        self.passed &= passed;
        self.checks.push(Check {
            name: name.into(),
            value,
            tolerance,
            passed,
        });
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn run_suite(suite: Suite, m: usize, seed: u64) -> Result<CheckReport> {
    match suite {
        Suite::Identity => identity_suite(m, seed),
        Suite::Geometry => geometry_suite(m, seed),
        Suite::Crossform => crossform_suite(m, seed),
    }
}

fn random_nodes(grid: CircleGrid, dim: usize, rng: &mut ChaCha8Rng) -> GridFunction {
    GridFunction::from_fn(grid, dim, |_, o| o.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0)))
}

/// Random trigonometric polynomial without a Nyquist component.
fn random_band_limited(grid: CircleGrid, dim: usize, rng: &mut ChaCha8Rng) -> GridFunction {
    let kmax = grid.len() / 2 - 1;
    let coeffs: Vec<f64> = (0..dim * (2 * kmax + 1)).map(|_| rng.random_range(-1.0..1.0)).collect();
    GridFunction::from_fn(grid, dim, |x, o| {
        for (c, v) in o.iter_mut().enumerate() {
            let a = &coeffs[c * (2 * kmax + 1)..(c + 1) * (2 * kmax + 1)];
            *v = a[0] + (1..=kmax).map(|k| a[2 * k - 1] * (k as f64 * x).cos() + a[2 * k] * (k as f64 * x).sin()).sum::<f64>();
        }
    })
}

fn relative_max(diff: f64, scale: f64) -> f64 {
    diff / scale.max(1.0)
}

/// Spectral eigen-relations, Leibniz rule, antisymmetry, d_s/div_s duality,
/// the Riesz factorisation of the half-Laplacian and constant-argument
/// product/commutator identities.
pub fn identity_suite(m: usize, seed: u64) -> Result<CheckReport> {
    let grid = CircleGrid::new(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CheckReport::new(Suite::Identity, m, seed);

    for k in [1i64, 2, 3, 8] {
        if 2 * k as usize >= m {
            continue;
        }
        let kf = k as f64;
        let f = GridFunction::scalar_from_fn(grid, |x| (kf * x).cos());
        let err = half_laplacian(&f).relative_l2_error(&f.scale(kf))?;
        report.push(format!("half_laplacian_eigen_k{k}"), err, 1e-12);
    }

    for s in [0.25, 0.5, 0.75] {
        let f = random_nodes(grid, 1, &mut rng);
        let g = random_nodes(grid, 1, &mut rng);
        report.push(format!("leibniz_s{s}"), leibniz_residual(&f, &g, s)?.max_abs(), 1e-12);

        let v = random_nodes(grid, 3, &mut rng);
        report.push(format!("antisymmetry_s{s}"), frac_gradient(&v, s)?.antisymmetry_defect(), 1e-12);

        let samples = (0..m * m * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let big_f = OffDiagKernel::new(grid, 3, samples, None)?;
        let lhs = frac_divergence(&big_f, s)?.inner_l2(&v)?;
        let dv = frac_gradient(&v, s)?.with_diagonal_limit(None)?;
        let rhs = od_pairing(&big_f, &dv)?.values().iter().sum::<f64>() * grid.spacing();
        report.push(format!("duality_adjointness_s{s}"), relative_max((lhs - rhs).abs(), lhs.abs()), 1e-12);
    }

    let f = random_band_limited(grid, 2, &mut rng);
    let lhs = riesz_transform(&derivative(&f));
    let err = lhs.sub(&half_laplacian(&f))?.max_abs();
    report.push("riesz_gradient_factorisation", relative_max(err, half_laplacian(&f).max_abs()), 1e-12);

    let c = GridFunction::constant(grid, &[1.7]);
    let g = random_band_limited(grid, 1, &mut rng);
    report.push("product_rule_constant_first", product_laplacian_residual(&c, &g)?.max_abs(), 1e-12);
    report.push("product_rule_constant_second", product_laplacian_residual(&g, &c)?.max_abs(), 1e-12);
    let a = MatrixField::constant(grid, 2, 2, &[1.0, -0.4, 0.3, 2.0])?;
    let b = random_band_limited(grid, 2, &mut rng);
    report.push("commutator_alt_constant_a", commutator_alt_residual(&a, &b)?.max_abs(), 1e-12);
    let a = MatrixField::new(2, 2, random_band_limited(grid, 4, &mut rng))?;
    let b = GridFunction::constant(grid, &[0.5, -1.0]);
    report.push("commutator_alt_constant_b", commutator_alt_residual(&a, &b)?.max_abs(), 1e-12);
    Ok(report)
}

fn unit(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

fn random_direction(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 > 1e-4 && n2 <= 1.0 {
            unit(&mut v);
            return v;
        }
    }
}

/// Uniform-ish random point on each test target, built without projecting.
fn random_point(name: &str, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match name {
        "sphere" => random_direction(3, rng),
        "ellipsoid" => {
            let d = random_direction(3, rng);
            let s = (0..3).map(|k| (d[k] / ELLIPSOID[k]).powi(2)).sum::<f64>().sqrt();
            d.iter().map(|v| v / s).collect()
        }
        "torus" => torus_point(rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)),
        _ => {
            let a = rng.random_range(0.0..2.0 * PI);
            vec![a.cos(), a.sin(), 0.0]
        }
    }
}

const ELLIPSOID: [f64; 3] = [1.0, 1.5, 0.75];
const TORUS: (f64, f64) = (2.0, 0.5);

fn torus_point(phi: f64, theta: f64) -> Vec<f64> {
    let rho = TORUS.0 + TORUS.1 * theta.cos();
    vec![rho * phi.cos(), rho * phi.sin(), TORUS.1 * theta.sin()]
}

/// Closest torus point by sampling the parametrisation on a dense grid and
/// repeatedly re-sampling a shrinking window around the best sample.
pub fn torus_brute_force_projection(q: &[f64]) -> Vec<f64> {
    let dist2 = |phi: f64, theta: f64| {
        let p = torus_point(phi, theta);
        (0..3).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>()
    };
    let n = 400;
    let step = 2.0 * PI / n as f64;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for a in 0..n {
        for b in 0..n {
            let (phi, theta) = (a as f64 * step, b as f64 * step);
            let d = dist2(phi, theta);
            if d < best.0 {
                best = (d, phi, theta);
            }
        }
    }
    let mut half = 2.0 * step;
    while half > 1e-13 {
        let (c_phi, c_theta) = (best.1, best.2);
        for a in -10..=10 {
            for b in -10..=10 {
                let phi = c_phi + half * a as f64 / 10.0;
                let theta = c_theta + half * b as f64 / 10.0;
                let d = dist2(phi, theta);
                if d < best.0 {
                    best = (d, phi, theta);
                }
            }
        }
        half *= 0.25;
    }
    torus_point(best.1, best.2)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn test_targets() -> Result<Vec<(&'static str, ManifoldDescriptor)>> {
    Ok(vec![
        ("sphere", ManifoldDescriptor::sphere(3)?),
        ("ellipsoid", ManifoldDescriptor::ellipsoid(ELLIPSOID.to_vec())?),
        ("torus", ManifoldDescriptor::torus(TORUS.0, TORUS.1)?),
        ("embedded_circle", ManifoldDescriptor::embedded_circle([0.0; 3], [0.0, 0.0, 1.0], 1.0)?),
    ])
}

/// Projector identities on four targets at 100 random points each, the
/// sphere's closed-form dπ against finite differences, the torus projection
/// against a brute-force oracle and the Taylor remainder of π on S¹.
pub fn geometry_suite(m: usize, seed: u64) -> Result<CheckReport> {
    let grid = CircleGrid::new(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CheckReport::new(Suite::Geometry, m, seed);
    const POINTS: usize = 100;

    for (name, n) in test_targets()? {
        let dim = n.ambient_dim();
        let (mut idem, mut square, mut sym, mut oracle, mut jet) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..POINTS {
            let p = random_point(name, &mut rng);
            let dir = random_direction(dim, &mut rng);
            let r = rng.random_range(0.0..0.8) * n.safe_radius();
            let q: Vec<f64> = p.iter().zip(&dir).map(|(a, b)| a + r * b).collect();
            let pq = n.project(&q)?;
            idem = idem.max(max_diff(&n.project(&pq)?, &pq));

            let pr = n.tangent_projector(&p)?;
            let mut p2 = vec![0.0; dim * dim];
            for i in 0..dim {
                for j in 0..dim {
                    p2[i * dim + j] = (0..dim).map(|k| pr[i * dim + k] * pr[k * dim + j]).sum();
                    sym = sym.max((pr[i * dim + j] - pr[j * dim + i]).abs());
                }
            }
            square = square.max(max_diff(&p2, &pr));

            if name == "sphere" {
                let fd = n.fd_projection_jet(&q)?;
                let exact = n.projection_jet(&q)?;
                jet = jet.max(max_diff(&fd.jacobian, &exact.jacobian));
                jet = jet.max(max_diff(&n.fd_projection_jet(&p)?.jacobian, &pr));
            }
            if name == "torus" {
                oracle = oracle.max(max_diff(&pq, &torus_brute_force_projection(&q)));
            }
        }
        report.push(format!("{name}_projection_idempotence"), idem, 1e-9);
        report.push(format!("{name}_projector_square"), square, 1e-6);
        report.push(format!("{name}_projector_symmetry"), sym, 1e-6);
        if name == "sphere" {
            report.push("sphere_closed_form_vs_fd_jet", jet, 1e-6);
        }
        if name == "torus" {
            report.push("torus_projection_vs_brute_force", oracle, 1e-6);
        }
    }

    let s1 = ManifoldDescriptor::sphere(2)?;
    let u = GridFunction::from_fn(grid, 2, |x, o| {
        o[0] = x.cos();
        o[1] = x.sin();
    });
    let (r16, exc) = taylor_residual(&s1, &u, 16)?;
    let (r32, _) = taylor_residual(&s1, &u, 32)?;
    let m16 = exc.masked_max(&r16);
    let m32 = exc.masked_max(&r32);
    report.push("taylor_residual_gauss16", m16, 1e-6);
    report.push("taylor_residual_ratio_32_over_16", m32 / m16, 0.5);
    Ok(report)
}

/// Smooth S² datum: a Poisson bump around a seed-dependent base point.
pub fn sphere_crossform_datum(seed: u64) -> InitialDatum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = random_direction(3, &mut rng);
    let mut a = random_direction(3, &mut rng);
    let d: f64 = (0..3).map(|k| a[k] * base[k]).sum();
    a.iter_mut().zip(&base).for_each(|(x, b)| *x -= d * b);
    unit(&mut a);
    let b = vec![
        base[1] * a[2] - base[2] * a[1],
        base[2] * a[0] - base[0] * a[2],
        base[0] * a[1] - base[1] * a[0],
    ];
    InitialDatum::PoissonBump {
        base,
        eps: 0.5,
        rho: 0.95,
        a,
        b,
    }
}

/// Smooth torus datum: a local loop on the outer equator whose chords stay in
/// the tube, rotated about the symmetry axis by a seed-dependent angle.
pub fn torus_crossform_datum(seed: u64) -> InitialDatum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let r = TORUS.0 + TORUS.1;
    InitialDatum::PoissonBump {
        base: vec![r * phi.cos(), r * phi.sin(), 0.0],
        eps: 0.4,
        rho: 0.9,
        a: vec![-phi.sin(), phi.cos(), 0.0],
        b: vec![0.0, 0.0, 1.0],
    }
}

/// Gaps between the right-hand sides of all applicable formulations and the
/// Ω-rewriting on smooth S² and torus data.
pub fn crossform_suite(m: usize, seed: u64) -> Result<CheckReport> {
    let grid = CircleGrid::new(m)?;
    let mut report = CheckReport::new(Suite::Crossform, m, seed);
    let order = DEFAULT_GAUSS_ORDER;

    let s2 = ManifoldDescriptor::sphere(3)?;
    let u = sphere_crossform_datum(seed).generate(grid, &s2)?;
    let p = rhs_projection_form(&s2, &u)?;
    let d = rhs_divergence_form(&s2, &u, order)?;
    let q = rhs_quadratic_form(&s2, &u, order)?;
    let s = rhs_sphere_form(&s2, &u)?;
    report.push("sphere_divergence_vs_projection", d.relative_l2_error(&p)?, 5e-2);
    report.push("sphere_quadratic_vs_projection", q.relative_l2_error(&p)?, 5e-2);
    report.push("sphere_quadratic_vs_divergence", q.relative_l2_error(&d)?, 5e-2);
    report.push("sphere_sphere_form_vs_projection", s.relative_l2_error(&p)?, 3e-2);

    let omega = omega_potential(&s2, &u)?;
    report.push("omega_antisymmetry", omega_antisymmetry(&omega), 1e-15);
    let c = GridFunction::constant(grid, &[0.0, 0.0, 1.0]);
    report.push("omega_constant_map", omega_potential(&s2, &c)?.max_abs(), 1e-15);
    report.push("omega_reassembly_vs_divergence", omega_reassembly(&s2, &u, order)?.relative_l2_error(&d)?, 3e-2);

    let torus = ManifoldDescriptor::torus(TORUS.0, TORUS.1)?;
    let u = torus_crossform_datum(seed).generate(grid, &torus)?;
    let p = rhs_projection_form(&torus, &u)?;
    let h = rhs_hypersurface_form(&torus, &u, order)?;
    report.push("torus_hypersurface_vs_projection", h.relative_l2_error(&p)?, 5e-2);
    Ok(report)
}

/// max |Ω + Ωᵀ| over all node pairs and the diagonal jet.
pub fn omega_antisymmetry(omega: &OffDiagKernel) -> f64 {
    let nn = omega.width();
    let dim = (nn as f64).sqrt().round() as usize;
    let defect = |o: &[f64]| {
        let mut w: f64 = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                w = w.max((o[a * dim + b] + o[b * dim + a]).abs());
            }
        }
        w
    };
    let mut worst = omega.samples().chunks_exact(nn).map(defect).fold(0.0, f64::max);
    if let Some(d) = omega.diagonal_limit() {
        worst = worst.max(d.chunks_exact(nn).map(defect).fold(0.0, f64::max));
    }
    worst
}

/// (Ω·d_{1/2}u + R1 + R2 + R3)/C_dual.
pub fn omega_reassembly(n: &ManifoldDescriptor, u: &GridFunction, order: usize) -> Result<GridFunction> {
    let c_dual = duality_constant(0.5, u.len())?;
    let omega = omega_potential(n, u)?;
    let rem = remainders_r123(n, u, u, u, order)?;
    Ok(omega_apply(&omega, u)?
        .add(&rem.r1.pointwise()?)?
        .add(&rem.r2)?
        .add(&rem.r3)?
        .scale(1.0 / c_dual))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_oracle_on_known_points() {
        let q = [3.0, 0.0, 0.0];
        assert!(max_diff(&torus_brute_force_projection(&q), &[2.5, 0.0, 0.0]) < 1e-9);
        let q = [0.0, 2.2, 0.3];
        let t = ManifoldDescriptor::torus(TORUS.0, TORUS.1).unwrap();
        assert!(max_diff(&torus_brute_force_projection(&q), &t.project(&q).unwrap()) < 1e-8);
    }

    #[test]
    fn identity_suite_passes_small_grid() {
        let r = identity_suite(32, 1).unwrap();
        assert!(r.passed, "{r:#?}");
        assert!(r.get("half_laplacian_eigen_k8").is_some());
    }

    #[test]
    fn suite_names_round_trip() {
        for s in [Suite::Identity, Suite::Geometry, Suite::Crossform] {
            assert_eq!(s.as_str().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }
}
