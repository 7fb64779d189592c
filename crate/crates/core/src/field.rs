//! Functions sampled on the reference strip `𝕊 × [0, 1]`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fourier::shift_cyclic;
use crate::grid::{PeriodicGrid, VerticalGrid};

/// Samples `v(x_j, y_m)` stored level by level: index `m * nx + j`.
///
/// Levels run over `m = 0..=ny` including both boundaries; there is no
/// duplicated seam column in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct StripField {
    grid_x: PeriodicGrid,
    grid_y: Arc<VerticalGrid>,
    values: Vec<f64>,
}

impl StripField {
    pub fn zeros(grid_x: PeriodicGrid, grid_y: Arc<VerticalGrid>) -> Self {
        let len = grid_x.nx() * (grid_y.ny() + 1);
        Self {
            grid_x,
            grid_y,
            values: vec![0.0; len],
        }
    }

    pub fn from_values(grid_x: PeriodicGrid, grid_y: Arc<VerticalGrid>, values: Vec<f64>) -> Result<Self> {
        let len = grid_x.nx() * (grid_y.ny() + 1);
        if values.len() != len {
            return Err(Error::GridMismatch(format!(
                "{} values for a {} x {} strip",
                values.len(),
                grid_x.nx(),
                grid_y.ny() + 1
            )));
        }
        Ok(Self {
            grid_x,
            grid_y,
            values,
        })
    }

    pub fn from_fn(grid_x: PeriodicGrid, grid_y: Arc<VerticalGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let xs = grid_x.nodes();
        let values = grid_y
            .nodes()
            .iter()
            .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self {
            grid_x,
            grid_y,
            values,
        }
    }

    pub fn grid_x(&self) -> PeriodicGrid {
        self.grid_x
    }

    pub fn grid_y(&self) -> &Arc<VerticalGrid> {
        &self.grid_y
    }

    pub fn nx(&self) -> usize {
        self.grid_x.nx()
    }

    pub fn ny(&self) -> usize {
        self.grid_y.ny()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, j: usize, m: usize) -> f64 {
        self.values[m * self.nx() + j]
    }

    pub fn level(&self, m: usize) -> &[f64] {
        let nx = self.nx();
        &self.values[m * nx..(m + 1) * nx]
    }

    pub fn level_mut(&mut self, m: usize) -> &mut [f64] {
        let nx = self.nx();
        &mut self.values[m * nx..(m + 1) * nx]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest pointwise difference to `other`.
    pub fn max_diff(&self, other: &StripField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Cyclic shift of every level by `shift` nodes in `x`.
    pub fn shifted_x(&self, shift: usize) -> Self {
        let mut out = self.clone();
        for m in 0..=self.ny() {
            out.level_mut(m).copy_from_slice(&shift_cyclic(self.level(m), shift));
        }
        out
    }

    pub(crate) fn same_grid(&self, grid_x: PeriodicGrid, grid_y: &VerticalGrid) -> Result<()> {
        if self.grid_x != grid_x || *self.grid_y != *grid_y {
            return Err(Error::GridMismatch("strip field was sampled on a different grid".into()));
        }
        Ok(())
    }
}
