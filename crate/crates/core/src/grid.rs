//! Discretizations of the periodic direction and of the reference layer `(0, 1)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// `nx` equispaced nodes `x_j = 2πj / nx` on the circle `[0, 2π)`.
///
/// `nx` must be even and at least 8. Modal operations use wavenumbers
/// `k = 1..=nx/2 - 1`; the Nyquist wavenumber `nx/2` is carried only for
/// exact sample round-trips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PeriodicGrid {
    nx: usize,
}

impl PeriodicGrid {
    pub fn new(nx: usize) -> Result<Self> {
        if nx < 8 || nx % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "nx must be even and >= 8, got {nx}"
            )));
        }
        Ok(Self { nx })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.nx as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.spacing() * j as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.node(j)).collect()
    }

    /// Highest wavenumber used by modal operations, `nx/2 - 1`.
    pub fn k_rep(&self) -> usize {
        self.nx / 2 - 1
    }
}

/// Nodes `0 = y_0 < y_1 < ... < y_ny = 1` of the reference layer.
///
/// The nodes are the image of the uniform partition `s_m = m / ny` under
/// `g(s) = s - stretch * sin(2πs) / (2π)`. `stretch = 0` gives the uniform
/// grid; `0 < stretch < 1` refines both boundaries by the factor
/// `1 - stretch`, where the exponential layers of the nutrient and pressure
/// fields live. The map is smooth, so every stencil on it stays second order.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalGrid {
    ny: usize,
    stretch: f64,
    nodes: Vec<f64>,
}

impl VerticalGrid {
    pub fn new(ny: usize, stretch: f64) -> Result<Self> {
        if ny < 4 {
            return Err(Error::InvalidGrid(format!("ny must be >= 4, got {ny}")));
        }
        if !(0.0..1.0).contains(&stretch) {
            return Err(Error::InvalidGrid(format!(
                "stretch must lie in [0, 1), got {stretch}"
            )));
        }
        let nodes = (0..=ny)
            .map(|m| {
                if m == 0 {
                    0.0
                } else if m == ny {
                    1.0
                } else {
                    let s = m as f64 / ny as f64;
                    s - stretch * (2.0 * PI * s).sin() / (2.0 * PI)
                }
            })
            .collect();
        Ok(Self { ny, stretch, nodes })
    }

    pub fn uniform(ny: usize) -> Result<Self> {
        Self::new(ny, 0.0)
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn stretch(&self) -> f64 {
        self.stretch
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn y(&self, m: usize) -> f64 {
        self.nodes[m]
    }

    /// Width of the interval `[y_m, y_{m+1}]`.
    pub fn gap(&self, m: usize) -> f64 {
        self.nodes[m + 1] - self.nodes[m]
    }

    /// Midpoint of `[y_m, y_{m+1}]`.
    pub fn midpoint(&self, m: usize) -> f64 {
        0.5 * (self.nodes[m] + self.nodes[m + 1])
    }

    /// Dual-cell width of node `m`; these are the trapezoidal weights.
    pub fn cell_width(&self, m: usize) -> f64 {
        let left = if m > 0 { self.gap(m - 1) } else { 0.0 };
        let right = if m < self.ny { self.gap(m) } else { 0.0 };
        0.5 * (left + right)
    }

    /// Largest node spacing, the `h` of the `O(h²)` error statements.
    pub fn max_gap(&self) -> f64 {
        (0..self.ny).map(|m| self.gap(m)).fold(0.0, f64::max)
    }

    /// Trapezoidal rule over `[0, 1]`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.ny + 1);
        values
            .iter()
            .enumerate()
            .map(|(m, v)| self.cell_width(m) * v)
            .sum()
    }

    /// Three-point weights for the first derivative at node `m`.
    ///
    /// Central at interior nodes, one-sided at `m = 0` and `m = ny`; all are
    /// exact for quadratics. Returned as `(node, weight)` pairs.
    pub fn first_derivative_stencil(&self, m: usize) -> [(usize, f64); 3] {
        let y = &self.nodes;
        if m == 0 {
            let h1 = y[1] - y[0];
            let h2 = y[2] - y[1];
            [
                (0, -(2.0 * h1 + h2) / (h1 * (h1 + h2))),
                (1, (h1 + h2) / (h1 * h2)),
                (2, -h1 / (h2 * (h1 + h2))),
            ]
        } else if m == self.ny {
            let n = self.ny;
            let h1 = y[n] - y[n - 1];
            let h2 = y[n - 1] - y[n - 2];
            [
                (n, (2.0 * h1 + h2) / (h1 * (h1 + h2))),
                (n - 1, -(h1 + h2) / (h1 * h2)),
                (n - 2, h1 / (h2 * (h1 + h2))),
            ]
        } else {
            let hm = y[m] - y[m - 1];
            let hp = y[m + 1] - y[m];
            [
                (m - 1, -hp / (hm * (hm + hp))),
                (m, (hp - hm) / (hm * hp)),
                (m + 1, hm / (hp * (hm + hp))),
            ]
        }
    }
}
