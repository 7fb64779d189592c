//! Boundary profiles, their real trigonometric coefficients and spectral
//! differentiation on the periodic grid.

use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeOrder {
    First,
    Second,
}

/// Forward/inverse FFT plans and wavenumbers for one periodic grid.
///
/// Derivatives are those of the trigonometric interpolant sampled on the
/// grid: the Nyquist term `cos(nx/2 · x)` contributes nothing to the first
/// derivative at the nodes and `-(nx/2)²` times itself to the second.
#[derive(Clone)]
pub struct SpectralOps {
    grid: PeriodicGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralOps {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralOps").field("grid", &self.grid).finish()
    }
}

impl SpectralOps {
    pub fn new(grid: PeriodicGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.nx()),
            inverse: planner.plan_fft_inverse(grid.nx()),
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    /// Signed wavenumber of FFT bin `i`.
    fn wavenumber(&self, i: usize) -> i64 {
        let n = self.grid.nx();
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Normalized DFT coefficients `c_k = (1/nx) Σ_j v_j e^{-i k x_j}`.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let n = self.grid.nx();
        assert_eq!(values.len(), n, "sample count does not match the grid");
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Inverse of [`forward`](Self::forward); the imaginary part is dropped.
    pub fn inverse(&self, mut coeffs: Vec<Complex64>) -> Vec<f64> {
        self.inverse.process(&mut coeffs);
        coeffs.into_iter().map(|c| c.re).collect()
    }

    pub fn derivative(&self, values: &[f64], order: DerivativeOrder) -> Vec<f64> {
        let n = self.grid.nx();
        let mut c = self.forward(values);
        for (i, ci) in c.iter_mut().enumerate() {
            let k = self.wavenumber(i) as f64;
            *ci = match order {
                DerivativeOrder::First if i == n / 2 => Complex64::new(0.0, 0.0),
                DerivativeOrder::First => *ci * Complex64::new(0.0, k),
                DerivativeOrder::Second => *ci * (-k * k),
            };
        }
        self.inverse(c)
    }

    /// Dense differentiation matrix, column `l` is the derivative of `e_l`.
    pub fn matrix(&self, order: DerivativeOrder) -> DMatrix<f64> {
        let n = self.grid.nx();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for l in 0..n {
            e[l] = 1.0;
            let col = self.derivative(&e, order);
            m.column_mut(l).copy_from_slice(&col);
            e[l] = 0.0;
        }
        m
    }

    pub fn to_fourier(&self, values: &[f64]) -> FourierCoeffs {
        let n = self.grid.nx();
        let c = self.forward(values);
        let k_rep = self.grid.k_rep();
        let mut cos = Vec::with_capacity(k_rep);
        let mut sin = Vec::with_capacity(k_rep);
        for ck in &c[1..=k_rep] {
            cos.push(2.0 * ck.re);
            sin.push(-2.0 * ck.im);
        }
        FourierCoeffs {
            a0: c[0].re,
            cos,
            sin,
            nyquist: c[n / 2].re,
        }
    }

    /// Samples of the trigonometric polynomial described by `coeffs`.
    pub fn synthesize(&self, coeffs: &FourierCoeffs) -> Result<Vec<f64>> {
        let n = self.grid.nx();
        let k_rep = self.grid.k_rep();
        if coeffs.cos.len() != k_rep || coeffs.sin.len() != k_rep {
            return Err(Error::GridMismatch(format!(
                "{} coefficient pairs for a grid with k_rep = {k_rep}",
                coeffs.cos.len()
            )));
        }
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        c[0] = Complex64::new(coeffs.a0, 0.0);
        c[n / 2] = Complex64::new(coeffs.nyquist, 0.0);
        for k in 1..=k_rep {
            let ck = Complex64::new(0.5 * coeffs.cos[k - 1], -0.5 * coeffs.sin[k - 1]);
            c[k] = ck;
            c[n - k] = ck.conj();
        }
        Ok(self.inverse(c))
    }
}

/// Real trigonometric coefficients
/// `r(x) = a0 + Σ_{k=1}^{k_rep} (a_k cos kx + b_k sin kx) + a_N cos(nx/2 · x)`.
///
/// The Nyquist cosine `a_N` is kept so that sample → coefficient → sample
/// round-trips are exact; it takes no part in modal operations.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoeffs {
    pub a0: f64,
    /// `a_k` at index `k - 1`.
    pub cos: Vec<f64>,
    /// `b_k` at index `k - 1`.
    pub sin: Vec<f64>,
    pub nyquist: f64,
}

impl FourierCoeffs {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            a0: 0.0,
            cos: vec![0.0; grid.k_rep()],
            sin: vec![0.0; grid.k_rep()],
            nyquist: 0.0,
        }
    }

    pub fn k_rep(&self) -> usize {
        self.cos.len()
    }

    /// `a_k`, with `a(0) = a0`.
    pub fn a(&self, k: usize) -> f64 {
        if k == 0 {
            self.a0
        } else {
            self.cos[k - 1]
        }
    }

    /// `b_k`; zero for `k = 0`.
    pub fn b(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.sin[k - 1]
        }
    }

    /// `sqrt(a_k² + b_k²)`, or `|a0|` for `k = 0`.
    pub fn magnitude(&self, k: usize) -> f64 {
        self.a(k).hypot(self.b(k))
    }

    /// Mean square of the trigonometric polynomial over one period.
    pub fn mean_square(&self) -> f64 {
        let pairs: f64 = self
            .cos
            .iter()
            .zip(&self.sin)
            .map(|(a, b)| a * a + b * b)
            .sum();
        self.a0 * self.a0 + 0.5 * pairs + self.nyquist * self.nyquist
    }
}

/// Samples `ρ(x_j)` of a strictly positive periodic function.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryProfile {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl BoundaryProfile {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nx() {
            return Err(Error::GridMismatch(format!(
                "{} samples for nx = {}",
                values.len(),
                grid.nx()
            )));
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::NonPositiveProfile { index, value });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn flat(grid: PeriodicGrid, height: f64) -> Result<Self> {
        Self::new(grid, vec![height; grid.nx()])
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Cyclic shift by `shift` nodes: `out[j] = in[j - shift]`.
    pub fn shifted(&self, shift: usize) -> Self {
        Self {
            grid: self.grid,
            values: shift_cyclic(&self.values, shift),
        }
    }
}

pub(crate) fn shift_cyclic(values: &[f64], shift: usize) -> Vec<f64> {
    let n = values.len();
    (0..n).map(|j| values[(j + n - shift % n) % n]).collect()
}

/// Coefficients of the trigonometric interpolant of `profile`.
pub fn to_fourier(profile: &BoundaryProfile) -> FourierCoeffs {
    SpectralOps::new(profile.grid()).to_fourier(profile.values())
}

/// Profile sampled from `coeffs`; positivity is checked, not assumed.
pub fn from_fourier(coeffs: &FourierCoeffs, grid: PeriodicGrid) -> Result<BoundaryProfile> {
    let values = SpectralOps::new(grid).synthesize(coeffs)?;
    BoundaryProfile::new(grid, values)
}

pub fn spectral_derivative(profile: &BoundaryProfile, order: DerivativeOrder) -> Vec<f64> {
    SpectralOps::new(profile.grid()).derivative(profile.values(), order)
}
