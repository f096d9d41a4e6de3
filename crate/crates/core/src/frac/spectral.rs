use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{apply_multiplier, forward_fft, wavenumber, GridFunction};

/// (−Δ)^s as the Fourier multiplier |k|^{2s}, s ∈ (0, 1].
pub fn frac_laplacian_spectral(f: &GridFunction, s: f64) -> Result<GridFunction> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::param("s", format!("order must lie in (0, 1], got {s}")));
    }
    Ok(fractional_power(f, 2.0 * s))
}

/// Multiplier |k|^alpha for any alpha ≥ 0; the k = 0 mode is annihilated.
pub fn fractional_power(f: &GridFunction, alpha: f64) -> GridFunction {
    apply_multiplier(f, |k| {
        if k == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new((k.abs() as f64).powf(alpha), 0.0)
        }
    })
}

/// (−Δ)^{1/2}, multiplier |k|.
pub fn half_laplacian(f: &GridFunction) -> GridFunction {
    apply_multiplier(f, |k| Complex64::new(k.abs() as f64, 0.0))
}

/// (−Δ)^{1/4}, multiplier |k|^{1/2}.
pub fn quarter_laplacian(f: &GridFunction) -> GridFunction {
    fractional_power(f, 0.5)
}

/// Spectral derivative, multiplier ik with the Nyquist mode zeroed.
pub fn derivative(f: &GridFunction) -> GridFunction {
    let nyquist = -(f.len() as i64) / 2;
    apply_multiplier(f, |k| {
        if k == nyquist {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, k as f64)
        }
    })
}

/// Riesz–Hilbert transform, multiplier −i·sign(k) with k = 0 and the Nyquist
/// mode zeroed, so that R(∂f) = (−Δ)^{1/2} f.
pub fn riesz_transform(f: &GridFunction) -> GridFunction {
    let nyquist = -(f.len() as i64) / 2;
    apply_multiplier(f, |k| {
        if k == 0 || k == nyquist {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -(k.signum() as f64))
        }
    })
}

/// E_{1/2}(u) = ½ ∫ |(−Δ)^{1/4} u|² = π Σ_k |k| |û(k)|², summed over components.
pub fn energy_half(u: &GridFunction) -> f64 {
    let m = u.len();
    let mut total = 0.0;
    for c in 0..u.dim() {
        let coeffs = forward_fft(&u.component(c));
        total += coeffs
            .iter()
            .enumerate()
            .map(|(idx, z)| wavenumber(m, idx).unsigned_abs() as f64 * z.norm_sqr())
            .sum::<f64>();
    }
    PI * total
}

/// Node-wise energy density |(−Δ)^{1/4} u|²(x_j); ½ Σ_j density_j h = E_{1/2}(u).
pub fn energy_density(u: &GridFunction) -> Vec<f64> {
    let q = quarter_laplacian(u);
    q.rows().map(|r| r.iter().map(|v| v * v).sum()).collect()
}
