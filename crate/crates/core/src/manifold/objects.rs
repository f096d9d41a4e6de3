//! Chord-segment integrals of the projection and the off-diagonal objects
//! assembled from them: A_u, B_u, Ω, the remainders R1–R3, the quadratic
//! form P^{kl} and the hypersurface quantities Ã_u, ν_u, λ.

use crate::error::{Error, Result};
use crate::exec::map_rows;
use crate::field::GridFunction;
use crate::frac::{
    derivative, duality_constant, frac_divergence, frac_gradient, od_integrate, od_pairing,
    OffDiagKernel,
};
use crate::grid::CircleGrid;
use crate::manifold::{ManifoldDescriptor, Target};
use crate::quadrature::GaussLegendre;

pub const DEFAULT_GAUSS_ORDER: usize = 16;

/// Node pairs (i, j) whose chord segment between u(x_j) and u(x_i) leaves the
/// safe tube. Values there come from the smooth extension of π's formulas.
#[derive(Clone, Debug, PartialEq)]
pub struct Excursions {
    m: usize,
    mask: Vec<bool>,
}

impl Excursions {
    fn from_rows(m: usize, rows: Vec<Vec<bool>>) -> Self {
        Self {
            m,
            mask: rows.into_iter().flatten().collect(),
        }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.m + j]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|b| *b)
    }

    /// Largest |entry| of `kernel` over pairs that stay inside the tube.
    pub fn masked_max(&self, kernel: &OffDiagKernel) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.m {
            for j in 0..self.m {
                if !self.contains(i, j) {
                    worst = kernel.get(i, j).iter().fold(worst, |w, v| w.max(v.abs()));
                }
            }
        }
        worst
    }
}

fn check_map(n: &ManifoldDescriptor, u: &GridFunction) -> Result<()> {
    if u.dim() != n.ambient_dim() {
        return Err(Error::SizeMismatch(format!(
            "map has {} components, target lives in ℝ^{}",
            u.dim(),
            n.ambient_dim()
        )));
    }
    Ok(())
}

/// Fail with `OffManifold` unless every node is within √tol of N.
pub(crate) fn check_on_manifold(n: &ManifoldDescriptor, u: &GridFunction, tol: f64) -> Result<()> {
    check_map(n, u)?;
    let mut worst: f64 = 0.0;
    for row in u.rows() {
        worst = worst.max(n.distance(row)?);
    }
    if worst * worst > tol {
        return Err(Error::OffManifold { distance: worst });
    }
    Ok(())
}

/// dπ(u(x_j)) at every node, row-major blocks of n².
pub(crate) fn tangent_projectors(n: &ManifoldDescriptor, u: &GridFunction) -> Result<Vec<f64>> {
    let rows: Result<Vec<Vec<f64>>> = map_rows(u.len(), |j| n.tangent_projector(u.row(j))).into_iter().collect();
    Ok(rows?.into_iter().flatten().collect())
}

/// Whether the segment from `a` to `b` leaves the safe tube.
fn segment_exits(n: &ManifoldDescriptor, a: &[f64], b: &[f64], samples: &[f64]) -> bool {
    let limit = n.safe_radius();
    if let Target::Sphere { .. } = n.target() {
        // Closest approach of the segment to the origin.
        let d: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
        let dd: f64 = d.iter().map(|v| v * v).sum();
        let tau = if dd > 0.0 {
            (-a.iter().zip(&d).map(|(x, y)| x * y).sum::<f64>() / dd).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let rmin = a.iter().zip(&d).map(|(x, y)| (x + tau * y).powi(2)).sum::<f64>().sqrt();
        let ra = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rmax = ra.max(rb);
        return 1.0 - rmin >= limit || rmax - 1.0 >= limit;
    }
    let mut p = vec![0.0; a.len()];
    samples.iter().chain([0.0, 1.0].iter()).any(|&tau| {
        for (k, v) in p.iter_mut().enumerate() {
            *v = a[k] + tau * (b[k] - a[k]);
        }
        n.distance_estimate(&p) >= limit
    })
}

/// Build an off-diagonal kernel row by row from a fallible pair evaluator,
/// recording segment excursions.
fn try_kernel<F>(
    n: &ManifoldDescriptor,
    u: &GridFunction,
    width: usize,
    samples: &[f64],
    f: F,
) -> Result<(OffDiagKernel, Excursions)>
where
    F: Fn(usize, usize, &mut [f64]) -> Result<()> + Sync + Send,
{
    let grid = u.grid();
    let m = grid.len();
    let rows: Vec<Result<(Vec<f64>, Vec<bool>)>> = map_rows(m, |i| {
        let mut row = vec![0.0; m * width];
        let mut flags = vec![false; m];
        for j in 0..m {
            if j == i {
                continue;
            }
            flags[j] = segment_exits(n, u.row(j), u.row(i), samples);
            f(i, j, &mut row[j * width..(j + 1) * width])?;
        }
        Ok((row, flags))
    });
    let mut samples_out = Vec::with_capacity(m * m * width);
    let mut flags = Vec::with_capacity(m);
    for r in rows {
        let (row, fl) = r?;
        samples_out.extend(row);
        flags.push(fl);
    }
    Ok((
        OffDiagKernel::new(grid, width, samples_out, None)?,
        Excursions::from_rows(m, flags),
    ))
}

fn diff(u: &GridFunction, i: usize, j: usize) -> Vec<f64> {
    u.row(i).iter().zip(u.row(j)).map(|(a, b)| a - b).collect()
}

/// A_u(dv, dw)(x, y) = ∫₀¹∫₀¹ t·d(dπ)(u(y) + ts(u(x) − u(y)))[v(x) − v(y), w(x) − w(y)] ds dt.
pub fn a_u(
    n: &ManifoldDescriptor,
    u: &GridFunction,
    v: &GridFunction,
    w: &GridFunction,
    order: usize,
) -> Result<(OffDiagKernel, Excursions)> {
    check_map(n, u)?;
    u.check_same_shape(v)?;
    u.check_same_shape(w)?;
    let q = GaussLegendre::new(order);
    let dim = u.dim();
    try_kernel(n, u, dim, &q.nodes, |i, j, out| {
        let du = diff(u, i, j);
        let dv = diff(v, i, j);
        let dw = diff(w, i, j);
        if dv.iter().all(|x| *x == 0.0) || dw.iter().all(|x| *x == 0.0) {
            return Ok(());
        }
        let base = u.row(j);
        let mut p = vec![0.0; dim];
        let mut h = vec![0.0; dim];
        for (t, wt) in q.nodes.iter().zip(&q.weights) {
            for (s, ws) in q.nodes.iter().zip(&q.weights) {
                for k in 0..dim {
                    p[k] = base[k] + t * s * du[k];
                }
                n.hessian_contract(&p, &dv, &dw, &mut h)?;
                let c = t * wt * ws;
                for k in 0..dim {
                    out[k] += c * h[k];
                }
            }
        }
        Ok(())
    })
}

/// Residual of u(x) − u(y) = dπ(u(y))(u(x) − u(y)) + A_u(du, du)(x, y).
pub fn taylor_residual(
    n: &ManifoldDescriptor,
    u: &GridFunction,
    order: usize,
) -> Result<(OffDiagKernel, Excursions)> {
    check_on_manifold(n, u, n.newton_tol())?;
    let (a, exc) = a_u(n, u, u, u, order)?;
    let proj = tangent_projectors(n, u)?;
    let dim = u.dim();
    let kernel = OffDiagKernel::from_fn(u.grid(), dim, |i, j, out| {
        let d = diff(u, i, j);
        let pj = &proj[j * dim * dim..(j + 1) * dim * dim];
        let aij = a.get(i, j);
        for r in 0..dim {
            let tangential: f64 = (0..dim).map(|c| pj[r * dim + c] * d[c]).sum();
            out[r] = d[r] - tangential - aij[r];
        }
    });
    Ok((kernel, exc))
}

/// B_u(x, y) = ∫₀¹ d(dπ)(u(y) + s(u(x) − u(y))) ds as an n³ kernel laid out
/// like [`ProjectionJet::hessian`](crate::manifold::ProjectionJet).
pub fn b_u(n: &ManifoldDescriptor, u: &GridFunction, order: usize) -> Result<(OffDiagKernel, Excursions)> {
    check_map(n, u)?;
    let q = GaussLegendre::new(order);
    let dim = u.dim();
    let width = dim * dim * dim;
    try_kernel(n, u, width, &q.nodes, |i, j, out| {
        let d = diff(u, i, j);
        let base = u.row(j);
        let mut p = vec![0.0; dim];
        for (s, ws) in q.nodes.iter().zip(&q.weights) {
            for k in 0..dim {
                p[k] = base[k] + s * d[k];
            }
            let h = n.hessian_at(&p)?;
            for (o, v) in out.iter_mut().zip(&h) {
                *o += ws * v;
            }
        }
        Ok(())
    })
}

/// −d_{1/2}u·B_u d_{1/2}u (x), including the diagonal node term
/// −h·d(dπ)(u)[u′, u′].
pub fn bu_contraction(n: &ManifoldDescriptor, u: &GridFunction, order: usize) -> Result<GridFunction> {
    check_map(n, u)?;
    let q = GaussLegendre::new(order);
    let grid = u.grid();
    let dim = u.dim();
    let failure = std::sync::Mutex::new(None);
    let mut vals = od_integrate(grid, dim, 2.0, |i, j, out| {
        let d = diff(u, i, j);
        let base = u.row(j);
        let mut p = vec![0.0; dim];
        let mut h = vec![0.0; dim];
        for (s, ws) in q.nodes.iter().zip(&q.weights) {
            for k in 0..dim {
                p[k] = base[k] + s * d[k];
            }
            if let Err(e) = n.hessian_contract(&p, &d, &d, &mut h) {
                failure.lock().expect("error slot").get_or_insert(e);
                return;
            }
            for k in 0..dim {
                out[k] -= ws * h[k];
            }
        }
    });
    if let Some(e) = failure.into_inner().expect("error slot") {
        return Err(e);
    }
    let du = derivative(u);
    let hgrid = grid.spacing();
    let mut h = vec![0.0; dim];
    for j in 0..grid.len() {
        n.hessian_contract(u.row(j), du.row(j), du.row(j), &mut h)?;
        for k in 0..dim {
            vals[j * dim + k] -= hgrid * h[k];
        }
    }
    Ok(GridFunction::from_raw(grid, dim, vals))
}

/// dπ⊥(u) as an n²-component grid function.
pub(crate) fn complement_field(proj: &[f64], grid: CircleGrid, dim: usize) -> GridFunction {
    let mut vals: Vec<f64> = proj.iter().map(|v| -v).collect();
    for j in 0..grid.len() {
        for r in 0..dim {
            vals[j * dim * dim + r * dim + r] += 1.0;
        }
    }
    GridFunction::from_raw(grid, dim * dim, vals)
}

/// Ω_{jk}(x, y) = Σ_i dπ(u(y))_{ik} D_{ij} − dπ(u(y))_{ij} D_{ik} with
/// D = d_{1/2}(dπ⊥(u)). Antisymmetric by construction; carries its
/// diagonal jet so that Ω·d_{1/2}u includes the diagonal node term.
pub fn omega_potential(n: &ManifoldDescriptor, u: &GridFunction) -> Result<OffDiagKernel> {
    check_map(n, u)?;
    let grid = u.grid();
    let dim = u.dim();
    let proj = tangent_projectors(n, u)?;
    let dk = frac_gradient(&complement_field(&proj, grid, dim), 0.5)?;
    let w = |p: &[f64], d: &[f64], out: &mut [f64]| {
        for j in 0..dim {
            for k in j + 1..dim {
                let mut wjk = 0.0;
                let mut wkj = 0.0;
                for i in 0..dim {
                    wjk += p[i * dim + k] * d[i * dim + j];
                    wkj += p[i * dim + j] * d[i * dim + k];
                }
                out[j * dim + k] = wjk - wkj;
                out[k * dim + j] = wkj - wjk;
            }
        }
    };
    let nn = dim * dim;
    let kernel = OffDiagKernel::from_fn(grid, nn, |i, j, out| {
        w(&proj[j * nn..(j + 1) * nn], dk.get(i, j), out);
    });
    let ld = dk.diagonal_limit().expect("s = 1/2 gradient has a diagonal limit");
    let mut diag = vec![0.0; grid.len() * nn];
    for x in 0..grid.len() {
        w(&proj[x * nn..(x + 1) * nn], &ld[x * nn..(x + 1) * nn], &mut diag[x * nn..(x + 1) * nn]);
    }
    kernel.with_diagonal_limit(Some(diag))
}

/// (K·F)_j(x) = ∫ Σ_k K_{jk}(x, y) F_k(x, y) dy/|x − y| for a matrix kernel K
/// and a vector kernel F, with the diagonal node term when both carry jets.
fn matrix_kernel_apply(k: &OffDiagKernel, f: &OffDiagKernel) -> Result<GridFunction> {
    let dim = f.width();
    if k.width() != dim * dim || k.grid() != f.grid() {
        return Err(Error::SizeMismatch("matrix kernel does not match vector kernel".into()));
    }
    let grid = f.grid();
    let mut vals = od_integrate(grid, dim, 1.0, |i, j, out| {
        let kij = k.get(i, j);
        let fij = f.get(i, j);
        for r in 0..dim {
            out[r] = (0..dim).map(|c| kij[r * dim + c] * fij[c]).sum();
        }
    });
    if let (Some(lk), Some(lf)) = (k.diagonal_limit(), f.diagonal_limit()) {
        let h = grid.spacing();
        for x in 0..grid.len() {
            for r in 0..dim {
                vals[x * dim + r] += h * (0..dim)
                    .map(|c| lk[x * dim * dim + r * dim + c] * lf[x * dim + c])
                    .sum::<f64>();
            }
        }
    }
    Ok(GridFunction::from_raw(grid, dim, vals))
}

/// Ω·d_{1/2}u (x).
pub fn omega_apply(omega: &OffDiagKernel, u: &GridFunction) -> Result<GridFunction> {
    matrix_kernel_apply(omega, &frac_gradient(u, 0.5)?)
}

/// R1 as the kernel K(x, y) = dπ⊥(u(y)) A_u(dv, dw)(x, y)/|x − y|^{1/2}; it acts
/// pointwise through div_{1/2} and weakly through φ ↦ ∬ K·d_{1/2}φ dx dy/|x − y|.
#[derive(Clone, Debug)]
pub struct R1Functional {
    kernel: OffDiagKernel,
}

impl R1Functional {
    pub fn kernel(&self) -> &OffDiagKernel {
        &self.kernel
    }

    /// div_{1/2} K.
    pub fn pointwise(&self) -> Result<GridFunction> {
        frac_divergence(&self.kernel, 0.5)
    }

    /// ∬ K(x, y)·d_{1/2}φ(x, y) dx dy/|x − y|.
    pub fn apply(&self, phi: &GridFunction) -> Result<f64> {
        let dphi = frac_gradient(phi, 0.5)?.with_diagonal_limit(None)?;
        let p = od_pairing(&self.kernel, &dphi)?;
        Ok(p.values().iter().sum::<f64>() * phi.grid().spacing())
    }
}

/// The remainders of the rewritten equation.
#[derive(Clone, Debug)]
pub struct Remainders {
    pub r1: R1Functional,
    pub r2: GridFunction,
    pub r3: GridFunction,
    pub excursions: Excursions,
}

/// R1 (see [`R1Functional`]), R2(x) = ∫ D(x, y)ᵀ A_u(dv, dw)(x, y) dy/|x − y|^{3/2} and
/// R3(x) = ∫ dπ(u(y)) D(x, y) d_{1/2}v(x, y) dy/|x − y|, with D = d_{1/2}(dπ⊥(u)).
pub fn remainders_r123(
    n: &ManifoldDescriptor,
    u: &GridFunction,
    v: &GridFunction,
    w: &GridFunction,
    order: usize,
) -> Result<Remainders> {
    let (a, excursions) = a_u(n, u, v, w, order)?;
    let grid = u.grid();
    let dim = u.dim();
    let nn = dim * dim;
    let proj = tangent_projectors(n, u)?;
    let comp = complement_field(&proj, grid, dim);
    let dk = frac_gradient(&comp, 0.5)?;
    let m = grid.len();
    let inv_sqrt: Vec<f64> = (0..=m / 2)
        .map(|o| if o == 0 { 0.0 } else { grid.offset_distance(o).powf(-0.5) })
        .collect();
    let off = |i: usize, j: usize| {
        let o = (i as isize - j as isize).unsigned_abs();
        o.min(m - o)
    };

    let r1_kernel = OffDiagKernel::from_fn(grid, dim, |i, j, out| {
        let c = comp.row(j);
        let aij = a.get(i, j);
        let s = inv_sqrt[off(i, j)];
        for b in 0..dim {
            out[b] = s * (0..dim).map(|r| aij[r] * c[r * dim + b]).sum::<f64>();
        }
    });

    let r2 = od_integrate(grid, dim, 1.5, |i, j, out| {
        let d = dk.get(i, j);
        let aij = a.get(i, j);
        for b in 0..dim {
            out[b] = (0..dim).map(|r| d[r * dim + b] * aij[r]).sum();
        }
    });

    // dπ(u(y))·D as a matrix kernel, with jet dπ(u(x))·D′.
    let pd = OffDiagKernel::from_fn(grid, nn, |i, j, out| {
        let p = &proj[j * nn..(j + 1) * nn];
        mat_mul_into(p, dk.get(i, j), dim, out);
    });
    let ld = dk.diagonal_limit().expect("s = 1/2 gradient has a diagonal limit");
    let mut jet = vec![0.0; m * nn];
    for x in 0..m {
        mat_mul_into(&proj[x * nn..(x + 1) * nn], &ld[x * nn..(x + 1) * nn], dim, &mut jet[x * nn..(x + 1) * nn]);
    }
    let pd = pd.with_diagonal_limit(Some(jet))?;
    let r3 = matrix_kernel_apply(&pd, &frac_gradient(v, 0.5)?)?;

    Ok(Remainders {
        r1: R1Functional { kernel: r1_kernel },
        r2: GridFunction::from_raw(grid, dim, r2),
        r3,
        excursions,
    })
}

fn mat_mul_into(a: &[f64], b: &[f64], dim: usize, out: &mut [f64]) {
    for r in 0..dim {
        for c in 0..dim {
            out[r * dim + c] = (0..dim).map(|k| a[r * dim + k] * b[k * dim + c]).sum();
        }
    }
}

/// P_j^{kl}(p, q) = ∫₀¹∫₀¹ (t − 1) ∂_k∂_l π_j(p + s(1 − t)(q − p)) ds dt, symmetrized in
/// (k, l); laid out as `[(j·n + k)·n + l]`.
pub fn p_quadratic_form(n: &ManifoldDescriptor, p: &[f64], q: &[f64], order: usize) -> Result<Vec<f64>> {
    let dim = n.ambient_dim();
    if p.len() != dim || q.len() != dim {
        return Err(Error::SizeMismatch("points must lie in the ambient space".into()));
    }
    let g = GaussLegendre::new(order);
    let mut out = vec![0.0; dim * dim * dim];
    let mut pt = vec![0.0; dim];
    for (t, wt) in g.nodes.iter().zip(&g.weights) {
        for (s, ws) in g.nodes.iter().zip(&g.weights) {
            let tau = s * (1.0 - t);
            for k in 0..dim {
                pt[k] = p[k] + tau * (q[k] - p[k]);
            }
            let h = n.hessian_at(&pt)?;
            let c = (t - 1.0) * wt * ws;
            for (o, v) in out.iter_mut().zip(&h) {
                *o += c * v;
            }
        }
    }
    for j in 0..dim {
        for k in 0..dim {
            for l in k + 1..dim {
                let a = (j * dim + k) * dim + l;
                let b = (j * dim + l) * dim + k;
                let mean = 0.5 * (out[a] + out[b]);
                out[a] = mean;
                out[b] = mean;
            }
        }
    }
    Ok(out)
}

/// Ã_u, ν_u and λ for a hypersurface target.
#[derive(Clone, Debug)]
pub struct HypersurfaceObjects {
    /// Ã_u(x, y) = ∫₀¹ dν̃(u(y) + s(u(x) − u(y))) ds, n² per pair.
    pub a_tilde: OffDiagKernel,
    /// ν_u(x, y) = (ν(u(x)) + ν(u(y)))/2.
    pub nu_u: OffDiagKernel,
    /// λ = [d_{1/2}u·d_{1/2}(ν∘u) + div_{1/2}(d_{1/2}u·ν_u)]/C_dual, so that λν(u)
    /// is the normal part of (−Δ)^{1/2}u in the Fourier normalization.
    pub lambda: GridFunction,
}

pub(crate) fn normals(n: &ManifoldDescriptor, u: &GridFunction) -> Result<GridFunction> {
    let rows: Result<Vec<Vec<f64>>> = map_rows(u.len(), |j| n.normal_field(u.row(j))).into_iter().collect();
    Ok(GridFunction::from_raw(u.grid(), u.dim(), rows?.into_iter().flatten().collect()))
}

/// div_{1/2}(d_{1/2}u·ν_u) for the normal field `nu`.
pub(crate) fn normal_divergence(u: &GridFunction, nu: &GridFunction) -> Result<GridFunction> {
    let grid = u.grid();
    let m = grid.len();
    let inv_sqrt: Vec<f64> = (0..=m / 2)
        .map(|o| if o == 0 { 0.0 } else { grid.offset_distance(o).powf(-0.5) })
        .collect();
    let kernel = OffDiagKernel::from_fn(grid, 1, |i, j, out| {
        let o = (i as isize - j as isize).unsigned_abs();
        let s = inv_sqrt[o.min(m - o)];
        out[0] = 0.5 * s * (0..u.dim())
            .map(|c| (u.row(i)[c] - u.row(j)[c]) * (nu.row(i)[c] + nu.row(j)[c]))
            .sum::<f64>();
    });
    frac_divergence(&kernel, 0.5)
}

pub fn hypersurface_objects(
    n: &ManifoldDescriptor,
    u: &GridFunction,
    order: usize,
) -> Result<HypersurfaceObjects> {
    if n.codimension() != 1 {
        return Err(Error::NotAHypersurface);
    }
    check_map(n, u)?;
    let q = GaussLegendre::new(order);
    let dim = u.dim();
    let (a_tilde, _) = try_kernel(n, u, dim * dim, &q.nodes, |i, j, out| {
        let d = diff(u, i, j);
        let base = u.row(j);
        let mut p = vec![0.0; dim];
        for (s, ws) in q.nodes.iter().zip(&q.weights) {
            for k in 0..dim {
                p[k] = base[k] + s * d[k];
            }
            let jac = n.normal_extension_jacobian(&p)?;
            for (o, v) in out.iter_mut().zip(&jac) {
                *o += ws * v;
            }
        }
        Ok(())
    })?;
    let nu = normals(n, u)?;
    let nu_u = OffDiagKernel::from_fn(u.grid(), dim, |i, j, out| {
        for c in 0..dim {
            out[c] = 0.5 * (nu.row(i)[c] + nu.row(j)[c]);
        }
    });
    let first = od_pairing(&frac_gradient(u, 0.5)?, &frac_gradient(&nu, 0.5)?)?;
    let second = normal_divergence(u, &nu)?;
    let c_dual = duality_constant(0.5, u.len())?;
    let lambda = first.add(&second)?.scale(1.0 / c_dual);
    Ok(HypersurfaceObjects {
        a_tilde,
        nu_u,
        lambda,
    })
}
