//! Grid functions u: S¹ → ℝⁿ and their discrete Fourier representation.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::CircleGrid;

/// Samples of a vector-valued map at the grid nodes, stored row-major
/// (row `j` is `u(x_j)`).
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: CircleGrid,
    dim: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: CircleGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "target dimension must be at least 1"));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::SizeMismatch(format!(
                "expected {} values for M = {}, n = {}, got {}",
                grid.len() * dim,
                grid.len(),
                dim,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput {
                row: pos / dim,
                component: pos % dim,
            });
        }
        Ok(Self { grid, dim, values })
    }

    /// Construct without the finiteness scan; used on internally produced data.
    pub(crate) fn from_raw(grid: CircleGrid, dim: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len() * dim);
        Self { grid, dim, values }
    }

    pub fn zeros(grid: CircleGrid, dim: usize) -> Self {
        Self::from_raw(grid, dim, vec![0.0; grid.len() * dim])
    }

    /// Sample `f(x, out)` at every node.
    pub fn from_fn(grid: CircleGrid, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Self {
        let mut values = vec![0.0; grid.len() * dim];
        for (j, row) in values.chunks_mut(dim).enumerate() {
            f(grid.node(j), row);
        }
        Self::from_raw(grid, dim, values)
    }

    pub fn scalar_from_fn(grid: CircleGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, 1, |x, out| out[0] = f(x))
    }

    pub fn constant(grid: CircleGrid, value: &[f64]) -> Self {
        Self::from_fn(grid, value.len(), |_, out| out.copy_from_slice(value))
    }

    pub fn from_components(grid: CircleGrid, components: &[Vec<f64>]) -> Result<Self> {
        let dim = components.len();
        if dim == 0 {
            return Err(Error::param("dim", "no components"));
        }
        let m = grid.len();
        if components.iter().any(|c| c.len() != m) {
            return Err(Error::SizeMismatch("component length differs from M".into()));
        }
        let mut values = vec![0.0; m * dim];
        for (c, comp) in components.iter().enumerate() {
            for (j, v) in comp.iter().enumerate() {
                values[j * dim + c] = *v;
            }
        }
        Self::new(grid, dim, values)
    }

    #[inline]
    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.dim).copied().collect()
    }

    pub fn set_component(&mut self, c: usize, data: &[f64]) {
        for (j, v) in data.iter().enumerate() {
            self.values[j * self.dim + c] = *v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.dim != other.dim {
            return Err(Error::SizeMismatch(format!(
                "grid functions differ in shape: (M={}, n={}) vs (M={}, n={})",
                self.grid.len(),
                self.dim,
                other.grid.len(),
                other.dim
            )));
        }
        Ok(())
    }

    pub(crate) fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::SizeMismatch(format!(
                "grid mismatch: M={} vs M={}",
                self.grid.len(),
                other.grid.len()
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid, self.dim, self.values.iter().map(|v| f(*v)).collect())
    }

    /// Overwrite every row with `f(j, row)`.
    pub(crate) fn map_rows(mut self, f: impl Fn(usize, &mut [f64])) -> Self {
        let dim = self.dim;
        for (j, row) in self.values.chunks_mut(dim).enumerate() {
            f(j, row);
        }
        self
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self::from_raw(
            self.grid,
            self.dim,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + a * y)
                .collect(),
        ))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// Node-wise product: componentwise for equal shapes, or scalar times vector.
    pub fn pointwise_mul(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        let (scalar, vector) = match (self.dim, other.dim) {
            (a, b) if a == b => {
                return Ok(Self::from_raw(
                    self.grid,
                    a,
                    self.values.iter().zip(&other.values).map(|(x, y)| x * y).collect(),
                ))
            }
            (1, _) => (self, other),
            (_, 1) => (other, self),
            (a, b) => {
                return Err(Error::SizeMismatch(format!(
                    "cannot multiply components of dimension {a} and {b}"
                )))
            }
        };
        let n = vector.dim;
        let values = vector
            .values
            .iter()
            .enumerate()
            .map(|(idx, v)| scalar.values[idx / n] * v)
            .collect();
        Ok(Self::from_raw(self.grid, n, values))
    }

    /// Node-wise Euclidean inner product, a scalar function.
    pub fn pointwise_dot(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let values = self
            .rows()
            .zip(other.rows())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum())
            .collect();
        Ok(Self::from_raw(self.grid, 1, values))
    }

    /// Discrete L² norm (Σ_j |u(x_j)|² h)^{1/2}.
    pub fn norm_l2(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.spacing()).sqrt()
    }

    /// Discrete L² inner product Σ_j u(x_j)·v(x_j) h.
    pub fn inner_l2(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.spacing())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest node-wise Euclidean norm.
    pub fn max_norm(&self) -> f64 {
        self.rows()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Average of u over the circle.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for row in self.rows() {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        let m = self.len() as f64;
        acc.iter_mut().for_each(|a| *a /= m);
        acc
    }

    /// Relative L² distance ‖self − other‖ / ‖other‖ (absolute when other is 0).
    pub fn relative_l2_error(&self, reference: &Self) -> Result<f64> {
        let diff = self.sub(reference)?.norm_l2();
        let scale = reference.norm_l2();
        Ok(if scale > 0.0 { diff / scale } else { diff })
    }
}

/// Complex Fourier coefficients ĉ(k) = (1/M) Σ_j f(x_j) e^{−ikx_j} per component,
/// stored in FFT order (k = 0, 1, …, M/2−1, −M/2, …, −1).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: CircleGrid,
    dim: usize,
    coefficients: Vec<Vec<Complex64>>,
}

impl SpectralField {
    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coefficient of mode `k ∈ [−M/2, M/2)` in component `c`.
    pub fn coefficient(&self, c: usize, k: i64) -> Complex64 {
        self.coefficients[c][fft_index(self.grid.len(), k)]
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.coefficients[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.coefficients[c]
    }

    pub fn from_coefficients(grid: CircleGrid, coefficients: Vec<Vec<Complex64>>) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::SizeMismatch(
                "spectral component length differs from M".into(),
            ));
        }
        Ok(Self {
            grid,
            dim: coefficients.len(),
            coefficients,
        })
    }
}

/// Signed wavenumber of FFT slot `idx`.
#[inline]
pub fn wavenumber(m: usize, idx: usize) -> i64 {
    if idx < m / 2 {
        idx as i64
    } else {
        idx as i64 - m as i64
    }
}

#[inline]
pub fn fft_index(m: usize, k: i64) -> usize {
    k.rem_euclid(m as i64) as usize
}

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<usize, PlanPair>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plans(m: usize) -> PlanPair {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache
            .entry(m)
            .or_insert_with(|| (planner.plan_fft_forward(m), planner.plan_fft_inverse(m)))
            .clone()
    })
}

pub(crate) fn forward_fft(data: &[f64]) -> Vec<Complex64> {
    let m = data.len();
    let (fwd, _) = plans(m);
    let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    let inv_m = 1.0 / m as f64;
    buf.iter_mut().for_each(|c| *c *= inv_m);
    buf
}

pub(crate) fn inverse_fft_real(mut coeffs: Vec<Complex64>) -> Vec<f64> {
    let m = coeffs.len();
    let (_, inv) = plans(m);
    inv.process(&mut coeffs);
    coeffs.into_iter().map(|c| c.re).collect()
}

pub fn to_spectral(f: &GridFunction) -> SpectralField {
    let coefficients = (0..f.dim()).map(|c| forward_fft(&f.component(c))).collect();
    SpectralField {
        grid: f.grid(),
        dim: f.dim(),
        coefficients,
    }
}

/// Inverse transform; the imaginary part (zero for conjugate-symmetric input)
/// is discarded.
pub fn from_spectral(s: &SpectralField) -> GridFunction {
    let comps: Vec<Vec<f64>> = s
        .coefficients
        .iter()
        .map(|c| inverse_fft_real(c.clone()))
        .collect();
    let mut out = GridFunction::zeros(s.grid, s.dim);
    for (c, comp) in comps.iter().enumerate() {
        out.set_component(c, comp);
    }
    out
}

/// Apply the Fourier multiplier `symbol(k)` to every component.
pub fn apply_multiplier(f: &GridFunction, symbol: impl Fn(i64) -> Complex64) -> GridFunction {
    let m = f.len();
    let table: Vec<Complex64> = (0..m).map(|idx| symbol(wavenumber(m, idx))).collect();
    let mut out = GridFunction::zeros(f.grid(), f.dim());
    for c in 0..f.dim() {
        let mut coeffs = forward_fft(&f.component(c));
        coeffs.iter_mut().zip(&table).for_each(|(a, s)| *a *= s);
        out.set_component(c, &inverse_fft_real(coeffs));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cosine_has_two_half_coefficients() {
        let g = CircleGrid::new(32).unwrap();
        let f = GridFunction::scalar_from_fn(g, f64::cos);
        let s = to_spectral(&f);
        for k in -16..16 {
            let c = s.coefficient(0, k);
            let expect = if k.abs() == 1 { 0.5 } else { 0.0 };
            assert!((c.re - expect).abs() < 1e-15 && c.im.abs() < 1e-15, "k={k}: {c}");
        }
    }

    #[test]
    fn constant_is_mode_zero() {
        let g = CircleGrid::new(16).unwrap();
        let s = to_spectral(&GridFunction::constant(g, &[2.5]));
        assert!((s.coefficient(0, 0).re - 2.5).abs() < 1e-15);
        for k in 1..8 {
            assert!(s.coefficient(0, k).norm() < 1e-15);
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let g = CircleGrid::new(64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vals: Vec<f64> = (0..64 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = GridFunction::new(g, 3, vals).unwrap();
        let back = from_spectral(&to_spectral(&f));
        assert!(back.relative_l2_error(&f).unwrap() < 1e-12);
    }

    #[test]
    fn real_input_is_conjugate_symmetric() {
        let g = CircleGrid::new(32).unwrap();
        let f = GridFunction::scalar_from_fn(g, |x| (x.sin() + 0.3).exp());
        let s = to_spectral(&f);
        for k in 1..16 {
            assert!((s.coefficient(0, -k) - s.coefficient(0, k).conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn rejects_non_finite_and_bad_length() {
        let g = CircleGrid::new(8).unwrap();
        assert!(GridFunction::new(g, 1, vec![0.0; 7]).is_err());
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(matches!(
            GridFunction::new(g, 1, v),
            Err(Error::NonFiniteInput { row: 3, .. })
        ));
    }
}
