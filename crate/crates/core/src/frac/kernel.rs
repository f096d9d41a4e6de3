//! Off-diagonal kernels F(x, y) on S¹ × S¹ and the two-point calculus built
//! on them: the fractional gradient d_s, the pairing F·G, the divergence
//! div_s and Gagliardo-type seminorms.
//!
//! Samples never carry the measure dy/|x − y|; it is applied by the
//! integrating operations.

use crate::error::{Error, Result};
use crate::exec::fill_rows;
use crate::field::GridFunction;
use crate::frac::spectral::derivative;
use crate::grid::CircleGrid;

/// Sampled element of M_od, `samples[(i·M + j)·width + c] = F_c(x_i, x_j)`.
///
/// `diagonal_limit` holds, per node, the first-order jet L(x) with
/// F(x, y) ≈ L(x)·(x − y)/|x − y|^{1/2}; pairings add the diagonal node
/// contribution h·L_F(x)·L_G(x). Absent means the integrand vanishes on the
/// diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct OffDiagKernel {
    grid: CircleGrid,
    width: usize,
    samples: Vec<f64>,
    diagonal_limit: Option<Vec<f64>>,
}

impl OffDiagKernel {
    pub fn new(
        grid: CircleGrid,
        width: usize,
        samples: Vec<f64>,
        diagonal_limit: Option<Vec<f64>>,
    ) -> Result<Self> {
        let m = grid.len();
        if width == 0 {
            return Err(Error::param("width", "kernel must have at least one component"));
        }
        if samples.len() != m * m * width {
            return Err(Error::SizeMismatch(format!(
                "kernel needs {} samples, got {}",
                m * m * width,
                samples.len()
            )));
        }
        if let Some(d) = &diagonal_limit {
            if d.len() != m * width {
                return Err(Error::SizeMismatch("diagonal limit length".into()));
            }
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("samples", "non-finite kernel entry"));
        }
        Ok(Self {
            grid,
            width,
            samples,
            diagonal_limit,
        })
    }

    /// Build from `f(i, j, out)` evaluated for every off-diagonal pair; the
    /// diagonal samples are zero.
    pub fn from_fn<F>(grid: CircleGrid, width: usize, f: F) -> Self
    where
        F: Fn(usize, usize, &mut [f64]) + Sync + Send,
    {
        let m = grid.len();
        let samples = fill_rows(m, m * width, |i, row| {
            for (j, out) in row.chunks_mut(width).enumerate() {
                if j != i {
                    f(i, j, out);
                }
            }
        });
        Self {
            grid,
            width,
            samples,
            diagonal_limit: None,
        }
    }

    pub fn zeros(grid: CircleGrid, width: usize) -> Self {
        let m = grid.len();
        Self {
            grid,
            width,
            samples: vec![0.0; m * m * width],
            diagonal_limit: None,
        }
    }

    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    /// Number of real components per sample.
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        let base = (i * self.grid.len() + j) * self.width;
        &self.samples[base..base + self.width]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn diagonal_limit(&self) -> Option<&[f64]> {
        self.diagonal_limit.as_deref()
    }

    pub fn with_diagonal_limit(mut self, limit: Option<Vec<f64>>) -> Result<Self> {
        if let Some(d) = &limit {
            if d.len() != self.grid.len() * self.width {
                return Err(Error::SizeMismatch("diagonal limit length".into()));
            }
        }
        self.diagonal_limit = limit;
        Ok(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max |F(x_i, x_j) + F(x_j, x_i)|.
    pub fn antisymmetry_defect(&self) -> f64 {
        let m = self.grid.len();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in i..m {
                for (a, b) in self.get(i, j).iter().zip(self.get(j, i)) {
                    worst = worst.max((a + b).abs());
                }
            }
        }
        worst
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            grid: self.grid,
            width: self.width,
            samples: self.samples.iter().map(|v| a * v).collect(),
            diagonal_limit: self
                .diagonal_limit
                .as_ref()
                .map(|d| d.iter().map(|v| a * v).collect()),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let diag = match (&self.diagonal_limit, &other.diagonal_limit) {
            (None, None) => None,
            (a, b) => {
                let n = self.grid.len() * self.width;
                let za = vec![0.0; n];
                let a = a.as_deref().unwrap_or(&za);
                let b = b.as_deref().unwrap_or(&za);
                Some(a.iter().zip(b).map(|(x, y)| x - y).collect())
            }
        };
        Ok(Self {
            grid: self.grid,
            width: self.width,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a - b)
                .collect(),
            diagonal_limit: diag,
        })
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.width != other.width {
            return Err(Error::SizeMismatch(format!(
                "kernels differ in shape: (M={}, width={}) vs (M={}, width={})",
                self.grid.len(),
                self.width,
                other.grid.len(),
                other.width
            )));
        }
        Ok(())
    }
}

/// Visit the partners of node `i` in symmetric order i+1, i−1, i+2, i−2, …,
/// i+M/2, passing (j, offset).
#[inline]
pub(crate) fn symmetric_partners(m: usize, i: usize, mut visit: impl FnMut(usize, usize)) {
    let half = m / 2;
    for off in 1..=half {
        visit((i + off) % m, off);
        if off != half {
            visit((i + m - off) % m, off);
        }
    }
}

/// Row integrals Σ_{j≠i} F(x_i, x_j)·h/|x_i − x_j|^{exponent} for an
/// integrand produced on the fly by `integrand(i, j, out)`.
///
/// Rows are summed in the fixed symmetric order of [`symmetric_partners`].
pub(crate) fn od_integrate<F>(grid: CircleGrid, width: usize, exponent: f64, integrand: F) -> Vec<f64>
where
    F: Fn(usize, usize, &mut [f64]) + Sync + Send,
{
    let m = grid.len();
    let h = grid.spacing();
    let weights: Vec<f64> = (0..=m / 2)
        .map(|off| {
            if off == 0 {
                0.0
            } else {
                h * grid.offset_distance(off).powf(-exponent)
            }
        })
        .collect();
    fill_rows(m, width, |i, out| {
        let mut scratch = vec![0.0; width];
        symmetric_partners(m, i, |j, off| {
            scratch.iter_mut().for_each(|v| *v = 0.0);
            integrand(i, j, &mut scratch);
            let w = weights[off];
            for (o, v) in out.iter_mut().zip(&scratch) {
                *o += w * v;
            }
        });
    })
}

fn check_order(s: f64, upper_inclusive: bool) -> Result<()> {
    let ok = s >= 0.0 && if upper_inclusive { s <= 1.0 } else { s < 1.0 };
    if !ok {
        return Err(Error::param("s", format!("order {s} out of range")));
    }
    Ok(())
}

/// d_s f(x, y) = (f(x) − f(y))/|x − y|^s, s ∈ [0, 1).
///
/// For s = 1/2 the diagonal limit is the spectral derivative f′.
pub fn frac_gradient(f: &GridFunction, s: f64) -> Result<OffDiagKernel> {
    check_order(s, false)?;
    let grid = f.grid();
    let n = f.dim();
    let half = grid.len() / 2;
    let inv: Vec<f64> = (0..=half)
        .map(|off| if off == 0 { 0.0 } else { grid.offset_distance(off).powf(-s) })
        .collect();
    let m = grid.len();
    let mut k = OffDiagKernel::from_fn(grid, n, |i, j, out| {
        let off = (i as isize - j as isize).unsigned_abs();
        let w = inv[off.min(m - off)];
        for ((o, a), b) in out.iter_mut().zip(f.row(i)).zip(f.row(j)) {
            *o = (a - b) * w;
        }
    });
    if s == 0.5 {
        k.diagonal_limit = Some(derivative(f).into_values());
    }
    Ok(k)
}

/// F·G(x) = ∫ F(x, y)·G(x, y) dy/|x − y|, contracted over all components.
pub fn od_pairing(f: &OffDiagKernel, g: &OffDiagKernel) -> Result<GridFunction> {
    f.check_shape(g)?;
    let grid = f.grid;
    let width = f.width;
    let mut vals = od_integrate(grid, 1, 1.0, |i, j, out| {
        out[0] = f.get(i, j).iter().zip(g.get(i, j)).map(|(a, b)| a * b).sum();
    });
    if let (Some(lf), Some(lg)) = (&f.diagonal_limit, &g.diagonal_limit) {
        let h = grid.spacing();
        for (i, v) in vals.iter_mut().enumerate() {
            let a = &lf[i * width..(i + 1) * width];
            let b = &lg[i * width..(i + 1) * width];
            *v += h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        }
    }
    Ok(GridFunction::from_raw(grid, 1, vals))
}

/// |F|(x) = (F·F(x))^{1/2}.
pub fn od_norm(f: &OffDiagKernel) -> GridFunction {
    od_pairing(f, f).expect("same shape").map(|v| v.max(0.0).sqrt())
}

/// ‖F‖_{L^p_od} = ‖ |F| ‖_{L^p(S¹)}; `p = f64::INFINITY` gives the max.
pub fn od_lp_norm(f: &OffDiagKernel, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::param("p", format!("exponent must be at least 1, got {p}")));
    }
    let norm = od_norm(f);
    if p.is_infinite() {
        return Ok(norm.max_abs());
    }
    let h = f.grid.spacing();
    Ok((norm.values().iter().map(|v| v.powf(p)).sum::<f64>() * h).powf(1.0 / p))
}

/// div_s F(x) = Σ_{y≠x} (F(x, y) − F(y, x)) h/|x − y|^{1+s}, the exact transpose
/// of the off-diagonal d_s pairing.
pub fn frac_divergence(f: &OffDiagKernel, s: f64) -> Result<GridFunction> {
    check_order(s, true)?;
    let width = f.width;
    let vals = od_integrate(f.grid, width, 1.0 + s, |i, j, out| {
        for ((o, a), b) in out.iter_mut().zip(f.get(i, j)).zip(f.get(j, i)) {
            *o = a - b;
        }
    });
    Ok(GridFunction::from_raw(f.grid, width, vals))
}

/// d_s(fg) − d_s f·g(x) − f(y)·d_s g for scalar f, g.
pub fn leibniz_residual(f: &GridFunction, g: &GridFunction, s: f64) -> Result<OffDiagKernel> {
    f.check_same_shape(g)?;
    if f.dim() != 1 {
        return Err(Error::SizeMismatch("Leibniz residual needs scalar functions".into()));
    }
    let fg = f.pointwise_mul(g)?;
    let dfg = frac_gradient(&fg, s)?;
    let df = frac_gradient(f, s)?;
    let dg = frac_gradient(g, s)?;
    let grid = f.grid();
    Ok(OffDiagKernel::from_fn(grid, 1, |i, j, out| {
        out[0] = dfg.get(i, j)[0] - df.get(i, j)[0] * g.row(i)[0] - f.row(j)[0] * dg.get(i, j)[0];
    }))
}

/// ‖D_{s,q} f‖_{L^p} with D_{s,q} f(x) = (∫ |f(x) − f(y)|^q/|x − y|^{1+sq} dy)^{1/q}.
///
/// When the integrand has a finite nonzero limit on the diagonal
/// (q − sq − 1 = 0) one node contribution h·|f′(x)|^q is added.
pub fn gagliardo_seminorm(f: &GridFunction, s: f64, p: f64, q: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::param("s", format!("order must lie in (0, 1), got {s}")));
    }
    if !(p >= 1.0) {
        return Err(Error::param("p", format!("exponent must be at least 1, got {p}")));
    }
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::param("q", format!("exponent must be finite and at least 1, got {q}")));
    }
    let grid = f.grid();
    let h = grid.spacing();
    let mut inner = od_integrate(grid, 1, 1.0 + s * q, |i, j, out| {
        let d2: f64 = f.row(i).iter().zip(f.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
        out[0] = d2.sqrt().powf(q);
    });
    if (q - s * q - 1.0).abs() < 1e-14 {
        let df = derivative(f);
        for (v, row) in inner.iter_mut().zip(df.rows()) {
            let speed = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            *v += h * speed.powf(q);
        }
    }
    let d: Vec<f64> = inner.iter().map(|v| v.max(0.0).powf(1.0 / q)).collect();
    if p.is_infinite() {
        return Ok(d.iter().fold(0.0, |m, v| m.max(*v)));
    }
    Ok((d.iter().map(|v| v.powf(p)).sum::<f64>() * h).powf(1.0 / p))
}
