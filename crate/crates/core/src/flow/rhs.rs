//! Right-hand sides r(u) of u_t + (−Δ)^{1/2}u = r(u) in each formulation.

use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::exec::map_rows;
use crate::field::GridFunction;
use crate::frac::{
    derivative, duality_constant, frac_gradient, half_laplacian, od_integrate,
    od_pairing,
};
use crate::manifold::{
    bu_contraction, normal_divergence, normals, remainders_r123, tangent_projectors,
    ManifoldDescriptor, Target,
};
use crate::quadrature::GaussLegendre;

use super::FlowFormulation;

fn project_all(n: &ManifoldDescriptor, u: &GridFunction) -> Result<GridFunction> {
    let rows: Result<Vec<Vec<f64>>> = map_rows(u.len(), |j| n.project(u.row(j))).into_iter().collect();
    GridFunction::new(u.grid(), u.dim(), rows?.into_iter().flatten().collect())
}

fn apply_blocks(blocks: &[f64], v: &GridFunction) -> GridFunction {
    let dim = v.dim();
    let nn = dim * dim;
    GridFunction::from_fn(v.grid(), dim, |_, _| {}).map_rows(|j, out| {
        let b = &blocks[j * nn..(j + 1) * nn];
        let x = v.row(j);
        for r in 0..dim {
            out[r] = (0..dim).map(|c| b[r * dim + c] * x[c]).sum();
        }
    })
}

/// (−Δ)^{1/2}π(u) − dπ(u)(−Δ)^{1/2}u with spectral Laplacians.
pub fn rhs_projection_form(n: &ManifoldDescriptor, u: &GridFunction) -> Result<GridFunction> {
    let pu = project_all(n, u)?;
    let proj = tangent_projectors(n, u)?;
    let lu = half_laplacian(u);
    half_laplacian(&pu).sub(&apply_blocks(&proj, &lu))
}

/// [d_{1/2}u·d_{1/2}(dπ⊥(u)) + div_{1/2}(A_u(du, du)/|x − y|^{1/2}·dπ⊥(u(y)))]/C_dual, the
/// first term through the B_u contraction.
pub fn rhs_divergence_form(n: &ManifoldDescriptor, u: &GridFunction, order: usize) -> Result<GridFunction> {
    let first = bu_contraction(n, u, order)?;
    let second = remainders_r123(n, u, u, u, order)?.r1.pointwise()?;
    let c_dual = duality_constant(0.5, u.len())?;
    Ok(first.add(&second)?.scale(1.0 / c_dual))
}

/// (2/C_dual) ∫ P^{kl}(u(x), u(y)) d_{1/2}u_k d_{1/2}u_l dy/|x − y|, the quadratic
/// form integrated on the fly as an off-diagonal pairing. The diagonal node
/// carries the limit P^{kl}(u, u)u′_k u′_l = −½ d(dπ)(u)[u′, u′].
pub fn rhs_quadratic_form(n: &ManifoldDescriptor, u: &GridFunction, order: usize) -> Result<GridFunction> {
    if u.dim() != n.ambient_dim() {
        return Err(Error::SizeMismatch("map and target dimensions differ".into()));
    }
    let q = GaussLegendre::new(order);
    let dim = u.dim();
    let grid = u.grid();
    let failure = Mutex::new(None);
    let vals = od_integrate(grid, dim, 2.0, |i, j, out| {
        let x = u.row(i);
        let d: Vec<f64> = x.iter().zip(u.row(j)).map(|(a, b)| a - b).collect();
        let mut p = vec![0.0; dim];
        let mut h = vec![0.0; dim];
        for (t, wt) in q.nodes.iter().zip(&q.weights) {
            for (s, ws) in q.nodes.iter().zip(&q.weights) {
                let tau = s * (1.0 - t);
                for k in 0..dim {
                    p[k] = x[k] - tau * d[k];
                }
                if let Err(e) = n.hessian_contract(&p, &d, &d, &mut h) {
                    failure.lock().expect("error slot").get_or_insert(e);
                    return;
                }
                let c = (t - 1.0) * wt * ws;
                for k in 0..dim {
                    out[k] += c * h[k];
                }
            }
        }
    });
    if let Some(e) = failure.into_inner().expect("error slot") {
        return Err(e);
    }
    let mut vals = vals;
    let du = derivative(u);
    let h = grid.spacing();
    let mut hess = vec![0.0; dim];
    for j in 0..grid.len() {
        n.hessian_contract(u.row(j), du.row(j), du.row(j), &mut hess)?;
        for k in 0..dim {
            vals[j * dim + k] -= 0.5 * h * hess[k];
        }
    }
    let c_dual = duality_constant(0.5, u.len())?;
    Ok(GridFunction::from_raw(grid, dim, vals).scale(2.0 / c_dual))
}

/// λν(u) with λ = [d_{1/2}u·Ã_u d_{1/2}u + div_{1/2}(d_{1/2}u·ν_u)]/C_dual.
pub fn rhs_hypersurface_form(n: &ManifoldDescriptor, u: &GridFunction, order: usize) -> Result<GridFunction> {
    if n.codimension() != 1 {
        return Err(Error::NotAHypersurface);
    }
    if u.dim() != n.ambient_dim() {
        return Err(Error::SizeMismatch("map and target dimensions differ".into()));
    }
    let q = GaussLegendre::new(order);
    let dim = u.dim();
    let grid = u.grid();
    let failure = Mutex::new(None);
    let mut quad = od_integrate(grid, 1, 2.0, |i, j, out| {
        let base = u.row(j);
        let d: Vec<f64> = u.row(i).iter().zip(base).map(|(a, b)| a - b).collect();
        if let Target::Sphere { .. } = n.target() {
            out[0] = d.iter().map(|v| v * v).sum();
            return;
        }
        let mut p = vec![0.0; dim];
        for (s, ws) in q.nodes.iter().zip(&q.weights) {
            for k in 0..dim {
                p[k] = base[k] + s * d[k];
            }
            match n.normal_extension_jacobian(&p) {
                Ok(jac) => {
                    for r in 0..dim {
                        out[0] += ws * d[r] * (0..dim).map(|c| jac[r * dim + c] * d[c]).sum::<f64>();
                    }
                }
                Err(e) => {
                    failure.lock().expect("error slot").get_or_insert(e);
                    return;
                }
            }
        }
    });
    if let Some(e) = failure.into_inner().expect("error slot") {
        return Err(e);
    }
    let du = derivative(u);
    let h = grid.spacing();
    for j in 0..grid.len() {
        let jac = n.normal_extension_jacobian(u.row(j))?;
        let v = du.row(j);
        quad[j] += h * (0..dim)
            .map(|r| v[r] * (0..dim).map(|c| jac[r * dim + c] * v[c]).sum::<f64>())
            .sum::<f64>();
    }
    let nu = normals(n, u)?;
    let div = normal_divergence(u, &nu)?;
    let c_dual = duality_constant(0.5, u.len())?;
    let lambda = GridFunction::from_raw(grid, 1, quad).add(&div)?.scale(1.0 / c_dual);
    lambda.pointwise_mul(&nu)
}

/// u|d_{1/2}u|²/C_dual for maps into the unit sphere.
pub fn rhs_sphere_form(n: &ManifoldDescriptor, u: &GridFunction) -> Result<GridFunction> {
    if !n.is_sphere() {
        return Err(Error::NotASphere);
    }
    let deviation = u
        .rows()
        .map(|r| (r.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs())
        .fold(0.0, f64::max);
    if u.dim() != n.ambient_dim() || deviation >= n.safe_radius() {
        return Err(Error::NotOnSphere {
            max_deviation: deviation,
        });
    }
    let du = frac_gradient(u, 0.5)?;
    let density = od_pairing(&du, &du)?;
    let c_dual = duality_constant(0.5, u.len())?;
    density.scale(1.0 / c_dual).pointwise_mul(u)
}

/// r(u) for the chosen formulation.
pub fn rhs(
    n: &ManifoldDescriptor,
    formulation: FlowFormulation,
    u: &GridFunction,
    order: usize,
) -> Result<GridFunction> {
    match formulation {
        FlowFormulation::Projection => rhs_projection_form(n, u),
        FlowFormulation::Divergence => rhs_divergence_form(n, u, order),
        FlowFormulation::Quadratic => rhs_quadratic_form(n, u, order),
        FlowFormulation::Hypersurface => rhs_hypersurface_form(n, u, order),
        FlowFormulation::Sphere => rhs_sphere_form(n, u),
    }
}

/// Flow velocity r(u) − (−Δ)^{1/2}u.
pub fn flow_velocity(
    n: &ManifoldDescriptor,
    formulation: FlowFormulation,
    u: &GridFunction,
    order: usize,
) -> Result<GridFunction> {
    rhs(n, formulation, u, order)?.sub(&half_laplacian(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CircleGrid;

    #[test]
    fn identity_map_is_stationary() {
        let s1 = ManifoldDescriptor::sphere(2).unwrap();
        let g = CircleGrid::new(128).unwrap();
        let u = GridFunction::from_fn(g, 2, |x, o| {
            o[0] = x.cos();
            o[1] = x.sin();
        });
        let r = rhs_projection_form(&s1, &u).unwrap();
        assert!(r.relative_l2_error(&u).unwrap() < 1e-12);
        let v = flow_velocity(&s1, FlowFormulation::Projection, &u, 16).unwrap();
        assert!(v.norm_l2() < 1e-8);
    }

    #[test]
    fn constants_give_zero() {
        let s2 = ManifoldDescriptor::sphere(3).unwrap();
        let g = CircleGrid::new(32).unwrap();
        let c = GridFunction::constant(g, &[0.0, 0.6, 0.8]);
        for f in FlowFormulation::ALL {
            assert!(rhs(&s2, f, &c, 8).unwrap().max_abs() < 1e-14, "{f:?}");
        }
    }

    #[test]
    fn form_restrictions() {
        let c = ManifoldDescriptor::embedded_circle([0.0; 3], [0.0, 0.0, 1.0], 1.0).unwrap();
        let g = CircleGrid::new(16).unwrap();
        let u = GridFunction::constant(g, &[1.0, 0.0, 0.0]);
        assert!(matches!(rhs_hypersurface_form(&c, &u, 4), Err(Error::NotAHypersurface)));
        assert!(matches!(rhs_sphere_form(&c, &u), Err(Error::NotASphere)));
        let s = ManifoldDescriptor::sphere(3).unwrap();
        let off = GridFunction::constant(g, &[2.0, 0.0, 0.0]);
        assert!(matches!(rhs_sphere_form(&s, &off), Err(Error::NotOnSphere { .. })));
    }
}
