use std::f64::consts::PI;

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Uniform periodic grid on the unit circle, x_j = 2πj/M.
///
/// Immutable after construction and `Copy`, so kernels can capture it freely.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CircleGrid {
    m: usize,
}

impl CircleGrid {
    /// Build a grid with `m` nodes. `m` must be even and at least 8.
    pub fn new(m: usize) -> Result<Self> {
        if m < 8 || m % 2 != 0 {
            return Err(Error::InvalidGridSize(m));
        }
        Ok(Self { m })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing 2π/M.
    #[inline]
    pub fn spacing(&self) -> f64 {
        TWO_PI / self.m as f64
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        TWO_PI * j as f64 / self.m as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.node(j)).collect()
    }

    /// Chord distance between nodes `i` and `j`.
    #[inline]
    pub fn node_distance(&self, i: usize, j: usize) -> f64 {
        let m = (i as isize - j as isize).unsigned_abs() % self.m;
        self.offset_distance(m)
    }

    /// Chord distance between two nodes whose indices differ by `m`.
    #[inline]
    pub fn offset_distance(&self, m: usize) -> f64 {
        2.0 * (PI * (m % self.m) as f64 / self.m as f64).sin().abs()
    }

    /// Index of the node `offset` steps after `i`, wrapping around.
    #[inline]
    pub fn wrap(&self, i: usize, offset: isize) -> usize {
        (i as isize + offset).rem_euclid(self.m as isize) as usize
    }
}

/// Reduce an angle to [0, 2π).
#[inline]
pub fn canonical_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TWO_PI);
    if r >= TWO_PI {
        0.0
    } else {
        r
    }
}

/// The circle's chord metric |x − y| = 2|sin((x − y)/2)|.
#[inline]
pub fn chord_distance(x: f64, y: f64) -> f64 {
    let d = canonical_angle(x) - canonical_angle(y);
    2.0 * (0.5 * d).sin().abs()
}

/// Geodesic (arc) distance on the circle, in [0, π].
#[inline]
pub fn arc_distance(x: f64, y: f64) -> f64 {
    let d = (canonical_angle(x) - canonical_angle(y)).abs();
    d.min(TWO_PI - d)
}
