//! IMEX time integration of u_t + (−Δ)^{1/2}u = r(u) in every formulation.

mod initial;
mod rhs;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::field::{forward_fft, inverse_fft_real, wavenumber, GridFunction};
use crate::manifold::{ManifoldDescriptor, DEFAULT_GAUSS_ORDER};

pub use initial::InitialDatum;
pub use rhs::{
    flow_velocity, rhs, rhs_divergence_form, rhs_hypersurface_form, rhs_projection_form,
    rhs_quadratic_form, rhs_sphere_form,
};

/// Equivalent right-hand sides of the flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowFormulation {
    Projection,
    Divergence,
    Quadratic,
    Hypersurface,
    Sphere,
}

impl FlowFormulation {
    pub const ALL: [FlowFormulation; 5] = [
        FlowFormulation::Projection,
        FlowFormulation::Divergence,
        FlowFormulation::Quadratic,
        FlowFormulation::Hypersurface,
        FlowFormulation::Sphere,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FlowFormulation::Projection => "projection",
            FlowFormulation::Divergence => "divergence",
            FlowFormulation::Quadratic => "quadratic",
            FlowFormulation::Hypersurface => "hypersurface",
            FlowFormulation::Sphere => "sphere",
        }
    }

    /// Whether the formulation is defined for target `n`.
    pub fn applies_to(&self, n: &ManifoldDescriptor) -> bool {
        match self {
            FlowFormulation::Hypersurface => n.codimension() == 1,
            FlowFormulation::Sphere => n.is_sphere(),
            _ => true,
        }
    }
}

impl fmt::Display for FlowFormulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FlowFormulation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        FlowFormulation::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown formulation `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ImexEuler,
    ImexMidpoint,
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "imex_euler" => Ok(Scheme::ImexEuler),
            "imex_midpoint" => Ok(Scheme::ImexMidpoint),
            _ => Err(format!("unknown scheme `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub dt: f64,
    pub scheme: Scheme,
    /// Replace u by π(u) node-wise after every step.
    pub reproject: bool,
    pub t_end: f64,
    pub constraint_abort_threshold: f64,
    /// Gauss–Legendre order of the chord-segment integrals.
    pub gauss_order: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            scheme: Scheme::ImexEuler,
            reproject: false,
            t_end: 1.0,
            constraint_abort_threshold: 1e-2,
            gauss_order: DEFAULT_GAUSS_ORDER,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt", "time step must be positive"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::param("t_end", "final time must be non-negative"));
        }
        if !(self.constraint_abort_threshold > 0.0) {
            return Err(Error::param("constraint_abort_threshold", "must be positive"));
        }
        if self.gauss_order == 0 {
            return Err(Error::param("gauss_order", "must be positive"));
        }
        Ok(())
    }

    /// Number of steps to reach t_end.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Solution at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub u: GridFunction,
    pub step_count: usize,
    /// r(u) evaluated at the previous level; zero before the first step.
    pub last_rhs: GridFunction,
}

impl FlowState {
    pub fn new(u: GridFunction) -> Self {
        let last_rhs = GridFunction::zeros(u.grid(), u.dim());
        Self {
            t: 0.0,
            u,
            step_count: 0,
            last_rhs,
        }
    }
}

fn check_tube(n: &ManifoldDescriptor, u: &GridFunction, t: f64) -> Result<()> {
    let limit = n.safe_radius();
    for (node, row) in u.rows().enumerate() {
        let distance = match n.distance(row) {
            Ok(d) => d,
            Err(Error::NewtonFailure { .. }) | Err(Error::OutsideTube { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        if !(distance < limit) {
            return Err(Error::FlowLeftTube {
                node,
                t,
                distance,
                limit,
            });
        }
    }
    Ok(())
}

/// One IMEX step: the half-Laplacian implicitly and diagonally in Fourier
/// space, r(u) explicitly.
pub fn step(
    state: &FlowState,
    n: &ManifoldDescriptor,
    formulation: FlowFormulation,
    opts: &SolverOptions,
) -> Result<FlowState> {
    let u = &state.u;
    check_tube(n, u, state.t)?;
    let r = rhs(n, formulation, u, opts.gauss_order)?;
    let dt = opts.dt;
    let m = u.len();
    let (explicit, implicit): (Vec<f64>, Vec<f64>) = (0..m)
        .map(|idx| {
            let k = wavenumber(m, idx).unsigned_abs() as f64;
            match opts.scheme {
                Scheme::ImexEuler => (1.0, 1.0 / (1.0 + dt * k)),
                Scheme::ImexMidpoint => (1.0 - 0.5 * dt * k, 1.0 / (1.0 + 0.5 * dt * k)),
            }
        })
        .unzip();
    let mut next = GridFunction::zeros(u.grid(), u.dim());
    for c in 0..u.dim() {
        let uh = forward_fft(&u.component(c));
        let rh = forward_fft(&r.component(c));
        let coeffs: Vec<Complex64> = (0..m)
            .map(|i| (uh[i] * explicit[i] + rh[i] * dt) * implicit[i])
            .collect();
        next.set_component(c, &inverse_fft_real(coeffs));
    }
    let step_count = state.step_count + 1;
    let t = step_count as f64 * dt;
    if !next.is_finite() {
        return Err(Error::NonFinite { step: step_count, t });
    }
    if opts.reproject {
        for j in 0..m {
            let q = n.project(next.row(j)).map_err(|e| match e {
                Error::OutsideTube { distance, limit } => Error::FlowLeftTube {
                    node: j,
                    t,
                    distance,
                    limit,
                },
                other => other,
            })?;
            next.row_mut(j).copy_from_slice(&q);
        }
    }
    check_tube(n, &next, t)?;
    Ok(FlowState {
        t,
        u: next,
        step_count,
        last_rhs: r,
    })
}

/// What to record while evolving.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordOptions {
    /// Record every `stride` steps (and always the first and last level).
    pub stride: usize,
    /// Radii R of ε(R).
    pub radii: Vec<f64>,
    /// Also record relative gaps between the projection form and the other
    /// applicable formulations.
    pub formulation_gaps: bool,
}

impl Default for RecordOptions {
    fn default() -> Self {
        Self {
            stride: 1,
            radii: vec![0.1],
            formulation_gaps: false,
        }
    }
}

/// Recorded diagnostics and the final state of a run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: FlowState,
}

fn make_record(
    n: &ManifoldDescriptor,
    state: &FlowState,
    rec: &RecordOptions,
    order: usize,
) -> Result<DiagnosticsRecord> {
    let mut r = diagnostics::record(n, &state.u, state.step_count, state.t, &rec.radii)?;
    if rec.formulation_gaps {
        let reference = rhs_projection_form(n, &state.u)?;
        for f in FlowFormulation::ALL.into_iter().skip(1) {
            if f.applies_to(n) {
                let other = rhs(n, f, &state.u, order)?;
                r.formulation_gaps
                    .push((f.as_str().to_string(), other.relative_l2_error(&reference)?));
            }
        }
    }
    Ok(r)
}

/// Integrate from u₀ to t_end, calling `sink` with every recorded level.
pub fn evolve<S>(
    u0: GridFunction,
    n: &ManifoldDescriptor,
    formulation: FlowFormulation,
    opts: &SolverOptions,
    rec: &RecordOptions,
    mut sink: S,
) -> Result<Trajectory>
where
    S: FnMut(&FlowState, &DiagnosticsRecord) -> Result<()>,
{
    opts.validate()?;
    if rec.stride == 0 {
        return Err(Error::param("stride", "must be positive"));
    }
    if !formulation.applies_to(n) {
        return Err(if formulation == FlowFormulation::Sphere {
            Error::NotASphere
        } else {
            Error::NotAHypersurface
        });
    }
    if u0.dim() != n.ambient_dim() {
        return Err(Error::SizeMismatch("initial datum and target dimensions differ".into()));
    }
    let mut worst: f64 = 0.0;
    for row in u0.rows() {
        worst = worst.max(n.distance(row)?);
    }
    if worst > 10.0 * n.newton_tol() {
        return Err(Error::OffManifold { distance: worst });
    }

    let steps = opts.steps();
    let mut state = FlowState::new(u0);
    let mut records = Vec::new();
    let first = make_record(n, &state, rec, opts.gauss_order)?;
    sink(&state, &first)?;
    records.push(first);
    for k in 1..=steps {
        state = step(&state, n, formulation, opts)?;
        let violation = diagnostics::constraint_violation(n, &state.u)?;
        if violation > opts.constraint_abort_threshold {
            return Err(Error::ConstraintBlowup {
                t: state.t,
                violation,
                threshold: opts.constraint_abort_threshold,
            });
        }
        if k % rec.stride == 0 || k == steps {
            let r = make_record(n, &state, rec, opts.gauss_order)?;
            sink(&state, &r)?;
            records.push(r);
        }
    }
    Ok(Trajectory {
        records,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CircleGrid;

    #[test]
    fn euler_step_matches_mode_formula() {
        let s = ManifoldDescriptor::sphere(3).unwrap();
        let g = CircleGrid::new(16).unwrap();
        let u = InitialDatum::Perturbation {
            base: vec![0.0, 0.0, 1.0],
            eps: 0.2,
            a: vec![1.0, 0.0, 0.0],
            b: vec![0.0, 1.0, 0.0],
        }
        .generate(g, &s)
        .unwrap();
        let opts = SolverOptions {
            dt: 0.01,
            ..Default::default()
        };
        let next = step(&FlowState::new(u.clone()), &s, FlowFormulation::Projection, &opts).unwrap();
        let r = rhs_projection_form(&s, &u).unwrap();
        for c in 0..3 {
            let uh = forward_fft(&u.component(c));
            let rh = forward_fft(&r.component(c));
            let coeffs: Vec<Complex64> = (0..16)
                .map(|i| (uh[i] + opts.dt * rh[i]) / (1.0 + opts.dt * wavenumber(16, i).unsigned_abs() as f64))
                .collect();
            let expect = inverse_fft_real(coeffs);
            for (a, b) in next.u.component(c).iter().zip(&expect) {
                assert!((a - b).abs() < 1e-14);
            }
        }
        assert_eq!(next.step_count, 1);
        assert!((next.t - 0.01).abs() < 1e-15);
    }

    #[test]
    fn constants_are_fixed_points() {
        let s = ManifoldDescriptor::sphere(3).unwrap();
        let g = CircleGrid::new(32).unwrap();
        let c = GridFunction::constant(g, &[0.0, 0.0, 1.0]);
        let opts = SolverOptions {
            t_end: 0.01,
            ..Default::default()
        };
        let traj = evolve(c.clone(), &s, FlowFormulation::Projection, &opts, &RecordOptions::default(), |_, _| Ok(())).unwrap();
        assert_eq!(traj.final_state.u, c);
        assert!(traj.records.iter().all(|r| r.energy == 0.0));
        assert_eq!(traj.records.len(), 11);
    }

    #[test]
    fn identity_map_barely_moves() {
        let s1 = ManifoldDescriptor::sphere(2).unwrap();
        let g = CircleGrid::new(128).unwrap();
        let u0 = GridFunction::from_fn(g, 2, |x, o| {
            o[0] = x.cos();
            o[1] = x.sin();
        });
        let mut state = FlowState::new(u0.clone());
        let opts = SolverOptions::default();
        for _ in 0..100 {
            state = step(&state, &s1, FlowFormulation::Projection, &opts).unwrap();
        }
        assert!(state.u.sub(&u0).unwrap().norm_l2() < 1e-4);
        assert!((state.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_off_manifold_start() {
        let s = ManifoldDescriptor::sphere(3).unwrap();
        let g = CircleGrid::new(16).unwrap();
        let u = GridFunction::constant(g, &[0.0, 0.0, 1.1]);
        let r = evolve(u, &s, FlowFormulation::Projection, &SolverOptions::default(), &RecordOptions::default(), |_, _| Ok(()));
        assert!(matches!(r, Err(Error::OffManifold { .. })));
    }
}
