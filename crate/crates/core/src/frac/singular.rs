//! Principal-value quadrature for (−Δ)^s and the discrete constants that tie
//! the singular-integral and two-point calculus to the Fourier multiplier.
//!
//! The continuous constants C(s) and C_s are fixed numerically by
//! eigenfunction calibration on cos(x):
//!
//! * `c_disc(s, M)` scales the punctured trapezoid sum so that the discrete
//!   singular operator maps cos(x) to exactly cos(x);
//! * `c_dual(s, M)` is the ratio ∫ d_s f·d_s f dx / ‖(−Δ)^{s/2} f‖² for f = cos,
//!   evaluated with the discrete off-diagonal pairing. For s = 1/2 it tends
//!   to 2π.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::fill_rows;
use crate::field::GridFunction;
use crate::frac::kernel::{frac_gradient, od_pairing};
use crate::frac::spectral::fractional_power;
use crate::grid::CircleGrid;

/// Calibrated constants for one (s, M) pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub s: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub c_disc: f64,
    pub c_dual: f64,
}

fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::param("s", format!("order must lie in (0, 1), got {s}")));
    }
    Ok(())
}

/// Weight 1/|x_i − x_{i+m}|^{1+2s} for offsets m = 0..=M/2 (entry 0 unused).
fn singular_weights(grid: CircleGrid, s: f64) -> Vec<f64> {
    let half = grid.len() / 2;
    let mut w = vec![0.0; half + 1];
    for (m, wm) in w.iter_mut().enumerate().skip(1) {
        *wm = grid.offset_distance(m).powf(-(1.0 + 2.0 * s));
    }
    w
}

/// Eigenvalue of the uncalibrated punctured sum Σ_{j≠i} (f_i − f_j) h / |x_i − x_j|^{1+2s}
/// on the Fourier mode e^{ikx}.
pub fn singular_eigenvalue(s: f64, m: usize, k: i64) -> f64 {
    let grid = CircleGrid::new(m).expect("valid grid");
    let w = singular_weights(grid, s);
    let h = grid.spacing();
    let half = m / 2;
    let mut acc = 0.0;
    for (off, wm) in w.iter().enumerate().skip(1) {
        let mult = if off == half { 1.0 } else { 2.0 };
        acc += mult * (1.0 - (k as f64 * off as f64 * h).cos()) * wm;
    }
    acc * h
}

fn cache() -> &'static Mutex<HashMap<(u64, usize), Calibration>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, usize), Calibration>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// C_disc(s, M): scaling that makes the punctured quadrature exact on cos(x).
pub fn calibrate_constant(s: f64, m: usize) -> Result<f64> {
    Ok(calibration(s, m)?.c_disc)
}

/// C_dual(s, M) from the discrete duality pairing on cos(x).
pub fn duality_constant(s: f64, m: usize) -> Result<f64> {
    Ok(calibration(s, m)?.c_dual)
}

/// Both calibrated constants for (s, M), computed once and cached.
pub fn calibration(s: f64, m: usize) -> Result<Calibration> {
    check_order(s)?;
    let grid = CircleGrid::new(m)?;
    let key = (s.to_bits(), m);
    if let Some(c) = cache().lock().expect("calibration cache").get(&key) {
        return Ok(*c);
    }
    let c_disc = 1.0 / singular_eigenvalue(s, m, 1);

    let cosine = GridFunction::scalar_from_fn(grid, f64::cos);
    let grad = frac_gradient(&cosine, s)?;
    let pairing = od_pairing(&grad, &grad)?;
    let lhs: f64 = pairing.values().iter().sum::<f64>() * grid.spacing();
    let root = fractional_power(&cosine, s);
    let rhs = root.inner_l2(&root)?;
    let c_dual = lhs / rhs;

    let cal = Calibration { s, m, c_disc, c_dual };
    cache().lock().expect("calibration cache").insert(key, cal);
    Ok(cal)
}

/// Seed the cache with a previously computed entry (e.g. read from a
/// calibration table). Later lookups for (s, M) return it unchanged.
pub fn install_calibration(cal: Calibration) -> Result<()> {
    check_order(cal.s)?;
    CircleGrid::new(cal.m)?;
    if !(cal.c_disc > 0.0 && cal.c_disc.is_finite() && cal.c_dual > 0.0 && cal.c_dual.is_finite()) {
        return Err(Error::param("calibration", "constants must be positive and finite"));
    }
    cache()
        .lock()
        .expect("calibration cache")
        .insert((cal.s.to_bits(), cal.m), cal);
    Ok(())
}

/// (−Δ)^s f via the symmetric punctured trapezoid rule
/// C_disc(s, M) Σ_{m} (2f_i − f_{i+m} − f_{i−m}) h / |x_i − x_{i+m}|^{1+2s}.
pub fn frac_laplacian_singular(f: &GridFunction, s: f64) -> Result<GridFunction> {
    check_order(s)?;
    let grid = f.grid();
    let c = calibrate_constant(s, grid.len())?;
    let w = singular_weights(grid, s);
    let h = grid.spacing();
    let n = f.dim();
    let half = grid.len() / 2;
    let values = fill_rows(grid.len(), n, |i, out| {
        let fi = f.row(i);
        for (off, wm) in w.iter().enumerate().skip(1) {
            let fp = f.row(grid.wrap(i, off as isize));
            if off == half {
                for c in 0..n {
                    out[c] += (fi[c] - fp[c]) * wm;
                }
            } else {
                let fm = f.row(grid.wrap(i, -(off as isize)));
                for c in 0..n {
                    out[c] += (2.0 * fi[c] - fp[c] - fm[c]) * wm;
                }
            }
        }
        out.iter_mut().for_each(|v| *v *= c * h);
    });
    Ok(GridFunction::from_raw(grid, n, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frac::spectral::frac_laplacian_spectral;
    use std::f64::consts::PI;

    #[test]
    fn constants_are_annihilated() {
        let g = CircleGrid::new(32).unwrap();
        let c = GridFunction::constant(g, &[1.7, -2.0]);
        assert_eq!(frac_laplacian_singular(&c, 0.5).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn calibration_is_exact_on_first_mode() {
        for &s in &[0.25, 0.5, 0.75] {
            let g = CircleGrid::new(128).unwrap();
            let f = GridFunction::scalar_from_fn(g, f64::cos);
            let sing = frac_laplacian_singular(&f, s).unwrap();
            assert!(sing.sub(&f).unwrap().max_abs() < 1e-10, "s={s}");
        }
    }

    #[test]
    fn calibration_is_deterministic_and_converges() {
        let a = calibrate_constant(0.5, 256).unwrap();
        // bypass the cache by recomputing the eigenvalue directly
        let b = 1.0 / singular_eigenvalue(0.5, 256, 1);
        assert_eq!(a.to_bits(), b.to_bits());
        for &s in &[0.25, 0.5] {
            let c256 = calibrate_constant(s, 256).unwrap();
            let c512 = calibrate_constant(s, 512).unwrap();
            assert!((c256 - c512).abs() < 1e-2, "s={s}: {c256} vs {c512}");
        }
        // punctured sum misses h·k²/2 on mode k for s = 1/2
        let h = 2.0 * PI / 256.0;
        assert!((1.0 / a - (PI - h / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn duality_constant_tends_to_two_pi() {
        let c = duality_constant(0.5, 128).unwrap();
        assert!((c - 2.0 * PI).abs() < 1e-10, "{c}");
    }

    #[test]
    fn singular_matches_spectral_on_cos() {
        let g = CircleGrid::new(256).unwrap();
        let f = GridFunction::scalar_from_fn(g, f64::cos);
        let sing = frac_laplacian_singular(&f, 0.5).unwrap();
        let spec = frac_laplacian_spectral(&f, 0.5).unwrap();
        assert!(sing.relative_l2_error(&spec).unwrap() < 1e-2);
    }
}
