//! Thomas algorithm for real tridiagonal systems.

use crate::error::{Error, Result};

/// Factored tridiagonal matrix; row `i` is
/// `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]`.
#[derive(Debug, Clone)]
pub(crate) struct TridiagonalLu {
    lower: Vec<f64>,
    // Modified diagonal and the multipliers of the forward sweep.
    pivot: Vec<f64>,
    upper: Vec<f64>,
}

impl TridiagonalLu {
    /// `lower[0]` and `upper[n - 1]` are ignored.
    pub(crate) fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        assert!(lower.len() == n && upper.len() == n);
        let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let mut pivot = diag;
        for i in 0..n {
            if i > 0 {
                pivot[i] -= lower[i] * upper[i - 1] / pivot[i - 1];
            }
            if !(pivot[i].abs() > 1e-14 * scale) {
                return Err(Error::SingularSystem(format!(
                    "tridiagonal pivot {i} is {:e}",
                    pivot[i]
                )));
            }
        }
        Ok(Self {
            lower,
            pivot,
            upper,
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.pivot.len()
    }

    pub(crate) fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.pivot.len();
        debug_assert_eq!(rhs.len(), n);
        for i in 1..n {
            rhs[i] -= self.lower[i] * rhs[i - 1] / self.pivot[i - 1];
        }
        rhs[n - 1] /= self.pivot[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.upper[i] * rhs[i + 1]) / self.pivot[i];
        }
    }
}
