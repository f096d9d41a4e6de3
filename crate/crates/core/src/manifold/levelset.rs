//! Closed hypersurfaces given as regular level sets {g = 0}.

use std::fmt::Debug;

/// A scalar field g on ℝⁿ whose zero set is a closed hypersurface with
/// ∇g ≠ 0 on it.
pub trait LevelSet: Debug + Send + Sync {
    fn ambient_dim(&self) -> usize;
    fn value(&self, p: &[f64]) -> f64;
    fn gradient(&self, p: &[f64], out: &mut [f64]);
    /// Row-major n×n Hessian.
    fn hessian(&self, p: &[f64], out: &mut [f64]);
    /// Default tube radius δ.
    fn default_tube_radius(&self) -> f64;
    fn name(&self) -> String;
    fn as_torus(&self) -> Option<&Torus> {
        None
    }
}

/// Σ x_i²/a_i² − 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Ellipsoid {
    axes: Vec<f64>,
}

impl Ellipsoid {
    pub fn new(axes: Vec<f64>) -> Option<Self> {
        if axes.len() < 2 || axes.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return None;
        }
        Some(Self { axes })
    }

    pub fn axes(&self) -> &[f64] {
        &self.axes
    }
}

impl LevelSet for Ellipsoid {
    fn ambient_dim(&self) -> usize {
        self.axes.len()
    }

    fn value(&self, p: &[f64]) -> f64 {
        p.iter().zip(&self.axes).map(|(x, a)| x * x / (a * a)).sum::<f64>() - 1.0
    }

    fn gradient(&self, p: &[f64], out: &mut [f64]) {
        for ((o, x), a) in out.iter_mut().zip(p).zip(&self.axes) {
            *o = 2.0 * x / (a * a);
        }
    }

    fn hessian(&self, _p: &[f64], out: &mut [f64]) {
        let n = self.axes.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, a) in self.axes.iter().enumerate() {
            out[i * n + i] = 2.0 / (a * a);
        }
    }

    fn default_tube_radius(&self) -> f64 {
        0.5 * self.axes.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    fn name(&self) -> String {
        format!("ellipsoid{:?}", self.axes)
    }
}

/// Torus of revolution about the z-axis: (√(x² + y²) − R)² + z² − r².
#[derive(Clone, Debug, PartialEq)]
pub struct Torus {
    major: f64,
    minor: f64,
}

impl Torus {
    pub fn new(major: f64, minor: f64) -> Option<Self> {
        if !(minor > 0.0 && major > minor && major.is_finite()) {
            return None;
        }
        Some(Self { major, minor })
    }

    pub fn major(&self) -> f64 {
        self.major
    }

    pub fn minor(&self) -> f64 {
        self.minor
    }

    /// Point at toroidal angle `phi` and poloidal angle `theta`.
    pub fn point(&self, phi: f64, theta: f64) -> [f64; 3] {
        let rho = self.major + self.minor * theta.cos();
        [rho * phi.cos(), rho * phi.sin(), self.minor * theta.sin()]
    }
}

impl LevelSet for Torus {
    fn ambient_dim(&self) -> usize {
        3
    }

    fn value(&self, p: &[f64]) -> f64 {
        let rho = p[0].hypot(p[1]);
        (rho - self.major).powi(2) + p[2] * p[2] - self.minor * self.minor
    }

    fn gradient(&self, p: &[f64], out: &mut [f64]) {
        let rho = p[0].hypot(p[1]);
        let f = 2.0 * (rho - self.major) / rho;
        out[0] = f * p[0];
        out[1] = f * p[1];
        out[2] = 2.0 * p[2];
    }

    fn hessian(&self, p: &[f64], out: &mut [f64]) {
        let (x, y) = (p[0], p[1]);
        let rho = x.hypot(y);
        let r3 = rho * rho * rho;
        let big = self.major;
        out.iter_mut().for_each(|v| *v = 0.0);
        out[0] = 2.0 * (1.0 - big * y * y / r3);
        out[4] = 2.0 * (1.0 - big * x * x / r3);
        out[1] = 2.0 * big * x * y / r3;
        out[3] = out[1];
        out[8] = 2.0;
    }

    fn default_tube_radius(&self) -> f64 {
        0.9 * self.minor
    }

    fn name(&self) -> String {
        format!("torus(R={}, r={})", self.major, self.minor)
    }

    fn as_torus(&self) -> Option<&Torus> {
        Some(self)
    }
}
