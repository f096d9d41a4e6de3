//! Initial data u₀: S¹ → N.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GridFunction;
use crate::grid::{chord_distance, CircleGrid};
use crate::manifold::{ManifoldDescriptor, Target};

/// Generators for initial data. All except `GreatCircle` and `TorusLoop`
/// are projected node-wise onto N.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialDatum {
    /// u ≡ π(point).
    Constant { point: Vec<f64> },
    /// π(base + ε(a cos x + b sin x)).
    Perturbation {
        base: Vec<f64>,
        eps: f64,
        a: Vec<f64>,
        b: Vec<f64>,
    },
    /// π(base + ε Σ_{k=1}^{modes} (α_k cos kx + β_k sin kx)/k²) with
    /// α_k, β_k uniform in [−1, 1]ⁿ from `seed`.
    RandomPerturbation {
        base: Vec<f64>,
        eps: f64,
        modes: usize,
        seed: u64,
    },
    /// π(base + ε(a P_ρ + b Q_ρ)(1 − ρ)/ρ) with the Poisson-type series
    /// P_ρ = Σ ρ^k cos kx, Q_ρ = Σ ρ^k sin kx.
    PoissonBump {
        base: Vec<f64>,
        eps: f64,
        rho: f64,
        a: Vec<f64>,
        b: Vec<f64>,
    },
    /// π(base + amplitude·exp(−|x − center|²/(2 width²))·direction), chord distance.
    Bump {
        base: Vec<f64>,
        direction: Vec<f64>,
        amplitude: f64,
        width: f64,
        center: f64,
    },
    /// (cos kx, sin kx, 0, …) on a sphere; center + ρ(cos kx e₁ + sin kx e₂) on an
    /// embedded circle.
    GreatCircle { winding: i64 },
    /// Curve φ = p x, θ = q x + phase on a torus of revolution.
    TorusLoop { p: i64, q: i64, phase: f64 },
}

fn check_len(name: &'static str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::param(name, format!("expected {n} components, got {}", v.len())));
    }
    Ok(())
}

fn plane_basis(normal: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let pick = if normal[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d: f64 = (0..3).map(|k| pick[k] * normal[k]).sum();
    let mut e1 = [0.0; 3];
    for k in 0..3 {
        e1[k] = pick[k] - d * normal[k];
    }
    let len = (e1.iter().map(|v| v * v).sum::<f64>()).sqrt();
    e1.iter_mut().for_each(|v| *v /= len);
    let e2 = [
        normal[1] * e1[2] - normal[2] * e1[1],
        normal[2] * e1[0] - normal[0] * e1[2],
        normal[0] * e1[1] - normal[1] * e1[0],
    ];
    (e1, e2)
}

impl InitialDatum {
    /// Sample on `grid`; every value lies on N within the Newton tolerance.
    pub fn generate(&self, grid: CircleGrid, n: &ManifoldDescriptor) -> Result<GridFunction> {
        let dim = n.ambient_dim();
        let raw = match self {
            InitialDatum::Constant { point } => {
                check_len("point", point, dim)?;
                GridFunction::constant(grid, point)
            }
            InitialDatum::Perturbation { base, eps, a, b } => {
                check_len("base", base, dim)?;
                check_len("a", a, dim)?;
                check_len("b", b, dim)?;
                GridFunction::from_fn(grid, dim, |x, o| {
                    for k in 0..dim {
                        o[k] = base[k] + eps * (a[k] * x.cos() + b[k] * x.sin());
                    }
                })
            }
            InitialDatum::RandomPerturbation {
                base,
                eps,
                modes,
                seed,
            } => {
                check_len("base", base, dim)?;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let coeffs: Vec<f64> = (0..modes * dim * 2)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                GridFunction::from_fn(grid, dim, |x, o| {
                    for k in 0..dim {
                        let mut acc = 0.0;
                        for mode in 0..*modes {
                            let kk = (mode + 1) as f64;
                            let c = &coeffs[(mode * dim + k) * 2..(mode * dim + k) * 2 + 2];
                            acc += (c[0] * (kk * x).cos() + c[1] * (kk * x).sin()) / (kk * kk);
                        }
                        o[k] = base[k] + eps * acc;
                    }
                })
            }
            InitialDatum::PoissonBump {
                base,
                eps,
                rho,
                a,
                b,
            } => {
                check_len("base", base, dim)?;
                check_len("a", a, dim)?;
                check_len("b", b, dim)?;
                if !(*rho > 0.0 && *rho < 1.0) {
                    return Err(Error::param("rho", "must lie in (0, 1)"));
                }
                let rho = *rho;
                let norm = (1.0 - rho) / rho;
                GridFunction::from_fn(grid, dim, |x, o| {
                    let den = 1.0 - 2.0 * rho * x.cos() + rho * rho;
                    let p = (rho * x.cos() - rho * rho) / den;
                    let q = rho * x.sin() / den;
                    for k in 0..dim {
                        o[k] = base[k] + eps * norm * (a[k] * p + b[k] * q);
                    }
                })
            }
            InitialDatum::Bump {
                base,
                direction,
                amplitude,
                width,
                center,
            } => {
                check_len("base", base, dim)?;
                check_len("direction", direction, dim)?;
                if !(*width > 0.0) {
                    return Err(Error::param("width", "must be positive"));
                }
                GridFunction::from_fn(grid, dim, |x, o| {
                    let r = chord_distance(x, *center);
                    let bump = amplitude * (-(r * r) / (2.0 * width * width)).exp();
                    for k in 0..dim {
                        o[k] = base[k] + bump * direction[k];
                    }
                })
            }
            InitialDatum::GreatCircle { winding } => {
                let k = *winding as f64;
                match n.target() {
                    Target::Sphere { n: d } => GridFunction::from_fn(grid, *d, |x, o| {
                        o.iter_mut().for_each(|v| *v = 0.0);
                        o[0] = (k * x).cos();
                        o[1] = (k * x).sin();
                    }),
                    Target::EmbeddedCircle {
                        center,
                        normal,
                        radius,
                    } => {
                        let (e1, e2) = plane_basis(normal);
                        GridFunction::from_fn(grid, 3, |x, o| {
                            for c in 0..3 {
                                o[c] = center[c] + radius * ((k * x).cos() * e1[c] + (k * x).sin() * e2[c]);
                            }
                        })
                    }
                    Target::LevelSet(_) => {
                        return Err(Error::param(
                            "initial.kind",
                            "great_circle needs a sphere or embedded circle target",
                        ))
                    }
                }
            }
            InitialDatum::TorusLoop { p, q, phase } => {
                let torus = match n.target() {
                    Target::LevelSet(g) => g.as_torus().cloned(),
                    _ => None,
                }
                .ok_or_else(|| Error::param("initial.kind", "torus_loop needs a torus target"))?;
                let (pf, qf) = (*p as f64, *q as f64);
                GridFunction::from_fn(grid, 3, |x, o| {
                    o.copy_from_slice(&torus.point(pf * x, qf * x + phase));
                })
            }
        };
        let mut out = raw.clone();
        for j in 0..grid.len() {
            let q = n.project(raw.row(j))?;
            out.row_mut(j).copy_from_slice(&q);
        }
        GridFunction::new(grid, dim, out.into_values())
    }
}
