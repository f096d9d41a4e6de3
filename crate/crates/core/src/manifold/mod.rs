//! Closed target manifolds N ⊂ ℝⁿ, their closest-point projection π and the
//! projection-derived geometric objects used by the flow.

mod levelset;
mod objects;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use levelset::{Ellipsoid, LevelSet, Torus};
pub(crate) use objects::{normal_divergence, normals, tangent_projectors};
pub use objects::{
    a_u, b_u, bu_contraction, hypersurface_objects, omega_apply, omega_potential,
    p_quadratic_form, remainders_r123, taylor_residual, Excursions, HypersurfaceObjects,
    R1Functional, Remainders, DEFAULT_GAUSS_ORDER,
};

pub const DEFAULT_NEWTON_TOL: f64 = 1e-10;
pub const DEFAULT_NEWTON_MAX_ITER: usize = 50;
/// Step of the second-difference Hessian of π.
const HESSIAN_STEP: f64 = 1e-4;

/// Geometric variant of the target.
#[derive(Clone, Debug)]
pub enum Target {
    /// Unit sphere S^{n−1} ⊂ ℝⁿ.
    Sphere { n: usize },
    /// Regular level set {g = 0}.
    LevelSet(Arc<dyn LevelSet>),
    /// Circle of radius `radius` about `center` in the plane orthogonal to
    /// the unit vector `normal`, in ℝ³.
    EmbeddedCircle {
        center: [f64; 3],
        normal: [f64; 3],
        radius: f64,
    },
}

/// Target manifold together with the tube and Newton parameters of its
/// closest-point projection.
#[derive(Clone, Debug)]
pub struct ManifoldDescriptor {
    target: Target,
    tube_radius: f64,
    newton_tol: f64,
    newton_max_iter: usize,
}

/// π(p), dπ(p) and d(dπ)(p); `jacobian[i·n + j] = ∂_j π_i`,
/// `hessian[(i·n + j)·n + k] = ∂_j ∂_k π_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionJet {
    pub value: Vec<f64>,
    pub jacobian: Vec<f64>,
    pub hessian: Vec<f64>,
}

impl ProjectionJet {
    pub fn dim(&self) -> usize {
        self.value.len()
    }

    /// dπ⊥ = Id − dπ.
    pub fn complement(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out: Vec<f64> = self.jacobian.iter().map(|v| -v).collect();
        for i in 0..n {
            out[i * n + i] += 1.0;
        }
        out
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl ManifoldDescriptor {
    fn with_target(target: Target, tube_radius: f64) -> Self {
        Self {
            target,
            tube_radius,
            newton_tol: DEFAULT_NEWTON_TOL,
            newton_max_iter: DEFAULT_NEWTON_MAX_ITER,
        }
    }

    pub fn sphere(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::param("n", "sphere needs ambient dimension at least 2"));
        }
        Ok(Self::with_target(Target::Sphere { n }, 0.9))
    }

    pub fn ellipsoid(axes: Vec<f64>) -> Result<Self> {
        let e = Ellipsoid::new(axes).ok_or_else(|| Error::param("axes", "need at least two positive semi-axes"))?;
        let tube = e.default_tube_radius();
        Ok(Self::with_target(Target::LevelSet(Arc::new(e)), tube))
    }

    pub fn torus(major: f64, minor: f64) -> Result<Self> {
        let t = Torus::new(major, minor).ok_or_else(|| Error::param("torus", "need 0 < r < R"))?;
        let tube = t.default_tube_radius();
        Ok(Self::with_target(Target::LevelSet(Arc::new(t)), tube))
    }

    pub fn level_set(g: Arc<dyn LevelSet>) -> Self {
        let tube = g.default_tube_radius();
        Self::with_target(Target::LevelSet(g), tube)
    }

    pub fn embedded_circle(center: [f64; 3], normal: [f64; 3], radius: f64) -> Result<Self> {
        let len = norm(&normal);
        if !(radius > 0.0 && radius.is_finite()) || !(len > 0.0) {
            return Err(Error::param("circle", "need a positive radius and nonzero normal"));
        }
        let normal = [normal[0] / len, normal[1] / len, normal[2] / len];
        Ok(Self::with_target(
            Target::EmbeddedCircle {
                center,
                normal,
                radius,
            },
            0.9 * radius,
        ))
    }

    pub fn with_tube_radius(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::param("tube_radius", "must be positive"));
        }
        self.tube_radius = delta;
        Ok(self)
    }

    pub fn with_newton(mut self, tol: f64, max_iter: usize) -> Result<Self> {
        if !(tol > 0.0) || max_iter == 0 {
            return Err(Error::param("newton", "tolerance and iteration cap must be positive"));
        }
        self.newton_tol = tol;
        self.newton_max_iter = max_iter;
        Ok(self)
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn tube_radius(&self) -> f64 {
        self.tube_radius
    }

    /// δ/2, the radius inside which π is evaluated.
    pub fn safe_radius(&self) -> f64 {
        0.5 * self.tube_radius
    }

    pub fn newton_tol(&self) -> f64 {
        self.newton_tol
    }

    pub fn newton_max_iter(&self) -> usize {
        self.newton_max_iter
    }

    pub fn ambient_dim(&self) -> usize {
        match &self.target {
            Target::Sphere { n } => *n,
            Target::LevelSet(g) => g.ambient_dim(),
            Target::EmbeddedCircle { .. } => 3,
        }
    }

    pub fn codimension(&self) -> usize {
        match &self.target {
            Target::Sphere { .. } | Target::LevelSet(_) => 1,
            Target::EmbeddedCircle { .. } => 2,
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.target, Target::Sphere { .. })
    }

    pub fn name(&self) -> String {
        match &self.target {
            Target::Sphere { n } => format!("sphere(n={n})"),
            Target::LevelSet(g) => g.name(),
            Target::EmbeddedCircle { radius, .. } => format!("circle(radius={radius})"),
        }
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.ambient_dim() {
            return Err(Error::SizeMismatch(format!(
                "point of dimension {} for target in ℝ^{}",
                p.len(),
                self.ambient_dim()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("p", "non-finite point"));
        }
        Ok(())
    }

    /// Closest point without the tube check. Fails only where π is undefined.
    pub fn raw_project(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_point(p)?;
        match &self.target {
            Target::Sphere { .. } => {
                let r = norm(p);
                if r < 1e-12 {
                    return Err(Error::OutsideTube {
                        distance: 1.0 - r,
                        limit: self.safe_radius(),
                    });
                }
                Ok(p.iter().map(|v| v / r).collect())
            }
            Target::EmbeddedCircle {
                center,
                normal,
                radius,
            } => {
                let q: Vec<f64> = p.iter().zip(center).map(|(a, c)| a - c).collect();
                let qn = dot(&q, normal);
                let planar: Vec<f64> = q.iter().zip(normal).map(|(a, nv)| a - qn * nv).collect();
                let r = norm(&planar);
                if r < 1e-12 {
                    return Err(Error::OutsideTube {
                        distance: radius.hypot(qn),
                        limit: self.safe_radius(),
                    });
                }
                Ok(planar
                    .iter()
                    .zip(center)
                    .map(|(a, c)| c + radius * a / r)
                    .collect())
            }
            Target::LevelSet(g) => self.newton_project(g.as_ref(), p),
        }
    }

    /// Newton iteration on the Lagrange system q − p + μ∇g(q) = 0, g(q) = 0.
    fn newton_project(&self, g: &dyn LevelSet, p: &[f64]) -> Result<Vec<f64>> {
        let n = p.len();
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        g.gradient(p, &mut grad);
        let gg = dot(&grad, &grad);
        if !(gg > 0.0) {
            return Err(Error::NewtonFailure {
                iterations: 0,
                residual: f64::NAN,
            });
        }
        let gp = g.value(p);
        let mut q: Vec<f64> = p.iter().zip(&grad).map(|(a, b)| a - gp * b / gg).collect();
        g.gradient(&q, &mut grad);
        let mut mu = dot(
            &p.iter().zip(&q).map(|(a, b)| a - b).collect::<Vec<_>>(),
            &grad,
        ) / dot(&grad, &grad);
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for iter in 0..self.newton_max_iter {
            g.gradient(&q, &mut grad);
            g.hessian(&q, &mut hess);
            let mut rhs = DVector::zeros(n + 1);
            for i in 0..n {
                rhs[i] = -(q[i] - p[i] + mu * grad[i]);
            }
            rhs[n] = -g.value(&q);
            residual = rhs.norm();
            if converged {
                break;
            }
            if residual < self.newton_tol {
                // One more step drives the residual to rounding level.
                converged = true;
            }
            let mut jac = DMatrix::zeros(n + 1, n + 1);
            for i in 0..n {
                for j in 0..n {
                    jac[(i, j)] = mu * hess[i * n + j] + if i == j { 1.0 } else { 0.0 };
                }
                jac[(i, n)] = grad[i];
                jac[(n, i)] = grad[i];
            }
            let step = jac.lu().solve(&rhs).ok_or(Error::NewtonFailure {
                iterations: iter,
                residual,
            })?;
            for i in 0..n {
                q[i] += step[i];
            }
            mu += step[n];
            if q.iter().any(|v| !v.is_finite()) {
                return Err(Error::NewtonFailure {
                    iterations: iter + 1,
                    residual: f64::NAN,
                });
            }
        }
        if !converged {
            return Err(Error::NewtonFailure {
                iterations: self.newton_max_iter,
                residual,
            });
        }
        Ok(q)
    }

    /// Distance from `p` to N.
    pub fn distance(&self, p: &[f64]) -> Result<f64> {
        self.check_point(p)?;
        match &self.target {
            Target::Sphere { .. } => Ok((norm(p) - 1.0).abs()),
            _ => {
                let q = self.raw_project(p)?;
                Ok(p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            }
        }
    }

    /// Cheap distance estimate used to flag chord-segment excursions: exact
    /// for sphere and circle, |g|/|∇g| for level sets.
    pub(crate) fn distance_estimate(&self, p: &[f64]) -> f64 {
        match &self.target {
            Target::LevelSet(g) => {
                let mut grad = vec![0.0; p.len()];
                g.gradient(p, &mut grad);
                let gn = norm(&grad);
                if gn > 0.0 {
                    g.value(p).abs() / gn
                } else {
                    f64::INFINITY
                }
            }
            _ => self.distance(p).unwrap_or(f64::INFINITY),
        }
    }

    /// Closest point on N; refuses points at distance ≥ δ/2.
    pub fn project(&self, p: &[f64]) -> Result<Vec<f64>> {
        let limit = self.safe_radius();
        if let Target::Sphere { .. } = self.target {
            self.check_point(p)?;
            let d = (norm(p) - 1.0).abs();
            if d >= limit {
                return Err(Error::OutsideTube { distance: d, limit });
            }
            return self.raw_project(p);
        }
        if let Target::LevelSet(_) = self.target {
            // Reject clearly remote points before Newton can wander.
            let est = self.distance_estimate(p);
            if !(est < 2.0 * limit) {
                return Err(Error::OutsideTube { distance: est, limit });
            }
        }
        let q = self.raw_project(p)?;
        let d = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if d >= limit {
            return Err(Error::OutsideTube { distance: d, limit });
        }
        Ok(q)
    }

    /// dπ(p) only, row-major. Closed form for the sphere.
    pub fn tangent_projector(&self, p: &[f64]) -> Result<Vec<f64>> {
        if let Target::Sphere { n } = self.target {
            self.check_point(p)?;
            return Ok(sphere_jacobian(p, n));
        }
        self.fd_jacobian(p)
    }

    fn fd_jacobian(&self, p: &[f64]) -> Result<Vec<f64>> {
        let n = self.ambient_dim();
        let eps = (10.0 * self.newton_tol).max(1e-5);
        let mut jac = vec![0.0; n * n];
        let mut a = p.to_vec();
        for j in 0..n {
            a[j] = p[j] + eps;
            let fp = self.raw_project(&a)?;
            a[j] = p[j] - eps;
            let fm = self.raw_project(&a)?;
            a[j] = p[j];
            for i in 0..n {
                jac[i * n + j] = (fp[i] - fm[i]) / (2.0 * eps);
            }
        }
        Ok(jac)
    }

    /// Jet of π at `p` (in the safe tube): closed form for the sphere,
    /// central finite differences otherwise.
    pub fn projection_jet(&self, p: &[f64]) -> Result<ProjectionJet> {
        let value = self.project(p)?;
        if let Target::Sphere { n } = self.target {
            return Ok(ProjectionJet {
                value,
                jacobian: sphere_jacobian(p, n),
                hessian: sphere_hessian(p, n),
            });
        }
        self.fd_jet_from(p, value)
    }

    /// Finite-difference jet regardless of variant.
    pub fn fd_projection_jet(&self, p: &[f64]) -> Result<ProjectionJet> {
        let value = self.project(p)?;
        self.fd_jet_from(p, value)
    }

    fn fd_jet_from(&self, p: &[f64], value: Vec<f64>) -> Result<ProjectionJet> {
        let n = self.ambient_dim();
        let jacobian = self.fd_jacobian(p)?;
        let eps = HESSIAN_STEP;
        let mut hessian = vec![0.0; n * n * n];
        let mut a = p.to_vec();
        let centre = self.raw_project(p)?;
        for j in 0..n {
            for k in j..n {
                let mut second = vec![0.0; n];
                if j == k {
                    a[j] = p[j] + eps;
                    let fp = self.raw_project(&a)?;
                    a[j] = p[j] - eps;
                    let fm = self.raw_project(&a)?;
                    a[j] = p[j];
                    for i in 0..n {
                        second[i] = (fp[i] - 2.0 * centre[i] + fm[i]) / (eps * eps);
                    }
                } else {
                    let mut corner = |sj: f64, sk: f64| -> Result<Vec<f64>> {
                        a[j] = p[j] + sj * eps;
                        a[k] = p[k] + sk * eps;
                        let r = self.raw_project(&a);
                        a[j] = p[j];
                        a[k] = p[k];
                        r
                    };
                    let pp = corner(1.0, 1.0)?;
                    let pm = corner(1.0, -1.0)?;
                    let mp = corner(-1.0, 1.0)?;
                    let mm = corner(-1.0, -1.0)?;
                    for i in 0..n {
                        second[i] = (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * eps * eps);
                    }
                }
                for i in 0..n {
                    hessian[(i * n + j) * n + k] = second[i];
                    hessian[(i * n + k) * n + j] = second[i];
                }
            }
        }
        Ok(ProjectionJet {
            value,
            jacobian,
            hessian,
        })
    }

    /// d(dπ)(p) without the tube check, for chord-segment points.
    pub(crate) fn hessian_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        if let Target::Sphere { n } = self.target {
            if dot(p, p) < 1e-24 {
                return Err(Error::OutsideTube {
                    distance: 1.0,
                    limit: self.safe_radius(),
                });
            }
            return Ok(sphere_hessian(p, n));
        }
        let value = self.raw_project(p)?;
        Ok(self.fd_jet_from(p, value)?.hessian)
    }

    /// out_i = Σ_{j,k} ∂_j∂_k π_i(p) a_j b_k.
    pub fn hessian_contract(&self, p: &[f64], a: &[f64], b: &[f64], out: &mut [f64]) -> Result<()> {
        if let Target::Sphere { .. } = self.target {
            let r2 = dot(p, p);
            if r2 < 1e-24 {
                return Err(Error::OutsideTube {
                    distance: 1.0,
                    limit: self.safe_radius(),
                });
            }
            let r = r2.sqrt();
            let (pa, pb, ab) = (dot(p, a), dot(p, b), dot(a, b));
            let inv3 = 1.0 / (r2 * r);
            let inv5 = inv3 / r2;
            for i in 0..p.len() {
                out[i] = -(a[i] * pb + b[i] * pa + ab * p[i]) * inv3 + 3.0 * p[i] * pa * pb * inv5;
            }
            return Ok(());
        }
        let (na, nb) = (norm(a), norm(b));
        if na == 0.0 || nb == 0.0 {
            out.iter_mut().for_each(|v| *v = 0.0);
            return Ok(());
        }
        let eps = HESSIAN_STEP;
        let shifted = |sa: f64, sb: f64| -> Result<Vec<f64>> {
            let q: Vec<f64> = (0..p.len())
                .map(|i| p[i] + eps * (sa * a[i] / na + sb * b[i] / nb))
                .collect();
            self.raw_project(&q)
        };
        let pp = shifted(1.0, 1.0)?;
        let pm = shifted(1.0, -1.0)?;
        let mp = shifted(-1.0, 1.0)?;
        let mm = shifted(-1.0, -1.0)?;
        let scale = na * nb / (4.0 * eps * eps);
        for i in 0..p.len() {
            out[i] = (pp[i] - pm[i] - mp[i] + mm[i]) * scale;
        }
        Ok(())
    }

    /// Unit normal ν(x) at a point of a hypersurface.
    pub fn normal_field(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let nu = self.normal_extension(x)?;
        let len = norm(&nu);
        Ok(nu.iter().map(|v| v / len).collect())
    }

    /// Smooth extension ν̃ of the normal to a neighbourhood: p for the
    /// sphere, ∇g/|∇g| for level sets.
    pub fn normal_extension(&self, p: &[f64]) -> Result<Vec<f64>> {
        match &self.target {
            Target::Sphere { .. } => Ok(p.to_vec()),
            Target::LevelSet(g) => {
                let mut grad = vec![0.0; p.len()];
                g.gradient(p, &mut grad);
                let len = norm(&grad);
                if !(len > 0.0) {
                    return Err(Error::OutsideTube {
                        distance: f64::INFINITY,
                        limit: self.safe_radius(),
                    });
                }
                Ok(grad.iter().map(|v| v / len).collect())
            }
            Target::EmbeddedCircle { .. } => Err(Error::NotAHypersurface),
        }
    }

    /// Jacobian dν̃(p), row-major.
    pub fn normal_extension_jacobian(&self, p: &[f64]) -> Result<Vec<f64>> {
        let n = p.len();
        match &self.target {
            Target::Sphere { .. } => {
                let mut id = vec![0.0; n * n];
                for i in 0..n {
                    id[i * n + i] = 1.0;
                }
                Ok(id)
            }
            Target::LevelSet(g) => {
                let mut grad = vec![0.0; n];
                let mut hess = vec![0.0; n * n];
                g.gradient(p, &mut grad);
                g.hessian(p, &mut hess);
                let len = norm(&grad);
                if !(len > 0.0) {
                    return Err(Error::OutsideTube {
                        distance: f64::INFINITY,
                        limit: self.safe_radius(),
                    });
                }
                let nu: Vec<f64> = grad.iter().map(|v| v / len).collect();
                let mut out = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        let proj_h: f64 = (0..n)
                            .map(|k| {
                                let pik = if i == k { 1.0 } else { 0.0 } - nu[i] * nu[k];
                                pik * hess[k * n + j]
                            })
                            .sum();
                        out[i * n + j] = proj_h / len;
                    }
                }
                Ok(out)
            }
            Target::EmbeddedCircle { .. } => Err(Error::NotAHypersurface),
        }
    }
}

fn sphere_jacobian(p: &[f64], n: usize) -> Vec<f64> {
    let r2 = dot(p, p);
    let r = r2.sqrt();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            out[i * n + j] = (id - p[i] * p[j] / r2) / r;
        }
    }
    out
}

fn sphere_hessian(p: &[f64], n: usize) -> Vec<f64> {
    let r2 = dot(p, p);
    let r = r2.sqrt();
    let inv3 = 1.0 / (r2 * r);
    let inv5 = inv3 / r2;
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut out = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out[(i * n + j) * n + k] = -(d(i, j) * p[k] + d(i, k) * p[j] + d(j, k) * p[i]) * inv3
                    + 3.0 * p[i] * p[j] * p[k] * inv5;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..n).map(|k| a[i * n + k] * b[k * n + j]).sum();
            }
        }
        out
    }

    #[test]
    fn closed_form_projections() {
        let s = ManifoldDescriptor::sphere(3).unwrap();
        assert_eq!(s.project(&[1.2, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(matches!(s.project(&[2.0, 0.0, 0.0]), Err(Error::OutsideTube { .. })));
        let e = ManifoldDescriptor::ellipsoid(vec![1.0, 1.0, 1.0]).unwrap();
        let q = e.project(&[0.0, 0.0, 0.8]).unwrap();
        assert!(max_diff(&q, &[0.0, 0.0, 1.0]) < 1e-12);
        let t = ManifoldDescriptor::torus(2.0, 0.5).unwrap();
        let q = t.project(&[2.6, 0.0, 0.0]).unwrap();
        assert!(max_diff(&q, &[2.5, 0.0, 0.0]) < 1e-12);
        let c = ManifoldDescriptor::embedded_circle([0.0; 3], [0.0, 0.0, 1.0], 1.0).unwrap();
        let q = c.project(&[1.1, 0.0, 0.2]).unwrap();
        assert!(max_diff(&q, &[1.0, 0.0, 0.0]) < 1e-15);
    }

    #[test]
    fn sphere_jacobian_on_manifold() {
        let s = ManifoldDescriptor::sphere(3).unwrap();
        let jet = s.projection_jet(&[1.0, 0.0, 0.0]).unwrap();
        assert!(max_diff(&jet.jacobian, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]) < 1e-15);
        let fd = s.fd_projection_jet(&[0.6, 0.0, 0.8]).unwrap();
        let exact = s.projection_jet(&[0.6, 0.0, 0.8]).unwrap();
        assert!(max_diff(&fd.jacobian, &exact.jacobian) < 1e-6);
        assert!(max_diff(&fd.hessian, &exact.hessian) < 1e-6);
    }

    #[test]
    fn projector_identities_on_level_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = ManifoldDescriptor::torus(2.0, 0.5).unwrap();
        let e = ManifoldDescriptor::ellipsoid(vec![1.5, 1.0, 0.7]).unwrap();
        for m in [&t, &e] {
            for _ in 0..5 {
                let p: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let x = match m.project(&p) {
                    Ok(x) => x,
                    Err(_) => m.raw_project(&[2.5, 0.1, 0.1]).unwrap(),
                };
                let jet = m.projection_jet(&x).unwrap();
                let j = &jet.jacobian;
                assert!(max_diff(&matmul(j, j, 3), j) < 1e-6);
                let jt: Vec<f64> = (0..9).map(|k| j[(k % 3) * 3 + k / 3]).collect();
                assert!(max_diff(j, &jt) < 1e-6);
                let nu = m.normal_field(&x).unwrap();
                assert!((norm(&nu) - 1.0).abs() < 1e-10);
                for col in 0..3 {
                    let tcol: Vec<f64> = (0..3).map(|r| j[r * 3 + col]).collect();
                    assert!(dot(&nu, &tcol).abs() < 1e-8);
                }
                let again = m.project(&x).unwrap();
                assert!(max_diff(&again, &x) < 1e-10);
            }
        }
    }

    #[test]
    fn hessian_contraction_matches_jet() {
        let t = ManifoldDescriptor::torus(2.0, 0.5).unwrap();
        let p = [2.3, 0.4, 0.35];
        let jet = t.projection_jet(&p).unwrap();
        let (a, b) = ([0.3, -0.2, 0.5], [0.1, 0.7, -0.4]);
        let mut out = [0.0; 3];
        t.hessian_contract(&p, &a, &b, &mut out).unwrap();
        for i in 0..3 {
            let mut want = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    want += jet.hessian[(i * 3 + j) * 3 + k] * a[j] * b[k];
                }
            }
            assert!((want - out[i]).abs() < 1e-6);
        }
        let s = ManifoldDescriptor::sphere(3).unwrap();
        let sj = s.projection_jet(&p.map(|v| v / 2.4)).unwrap();
        s.hessian_contract(&p.map(|v| v / 2.4), &a, &b, &mut out).unwrap();
        for i in 0..3 {
            let mut want = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    want += sj.hessian[(i * 3 + j) * 3 + k] * a[j] * b[k];
                }
            }
            assert!((want - out[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_is_not_a_hypersurface() {
        let c = ManifoldDescriptor::embedded_circle([0.0; 3], [0.0, 0.0, 1.0], 1.0).unwrap();
        assert!(matches!(c.normal_field(&[1.0, 0.0, 0.0]), Err(Error::NotAHypersurface)));
        let t = ManifoldDescriptor::torus(2.0, 0.5).unwrap();
        assert!(max_diff(&t.normal_field(&[2.5, 0.0, 0.0]).unwrap(), &[1.0, 0.0, 0.0]) < 1e-15);
    }
}
