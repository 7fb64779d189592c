//! Fourier multipliers of the linearization at the flat stationary state.
//!
//! The linearized boundary operator acts on `a_k cos kx + b_k sin kx` by
//! multiplication with `λ_k`. This module evaluates `λ_k` in closed form,
//! locates the smallest surface tension for which every multiplier is
//! positive, and re-derives `λ_k` from the two modal boundary value problems
//! as an independent check.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::ModelParameters;
use crate::stationary::FlatStationaryState;
use crate::tridiag::TridiagonalLu;

/// Highest mode the finite-difference oracle is trusted for: the modal
/// solutions carry boundary layers of width `1/(ρ* k)`.
pub const DEFAULT_K_ORACLE: usize = 16;

/// `1 / sinh(a)` for `a > 0` without overflow.
fn inv_sinh(a: f64) -> f64 {
    2.0 * (-a).exp() / -(-2.0 * a).exp_m1()
}

/// `1 / cosh(b)` for `b ≥ 0` without overflow.
fn sech(b: f64) -> f64 {
    2.0 * (-b).exp() / (1.0 + (-2.0 * b).exp())
}

/// `coth(a) - 1 / (sinh(a) cosh(b))` for `a > b ≥ 0`.
///
/// For small arguments the two terms cancel; the numerator is then formed as
/// `cosh a cosh b - 1 = 2 cosh a sinh²(b/2) + 2 sinh²(a/2)`.
fn coth_minus_csch_sech(a: f64, b: f64) -> f64 {
    if a < 20.0 {
        let (sa, sb) = ((0.5 * a).sinh(), (0.5 * b).sinh());
        (2.0 * a.cosh() * sb * sb + 2.0 * sa * sa) / (a.sinh() * b.cosh())
    } else {
        1.0 / a.tanh() - inv_sinh(a) * sech(b)
    }
}

/// Constants of a flat layer of arbitrary height `h`:
/// `(c1, c3) = ((σ̄2 - σ̄1 cosh h)/sinh h, (σ̄2 cosh h - σ̄1)/sinh h)`.
fn layer_constants(params: &ModelParameters, h: f64) -> (f64, f64) {
    let (s1, s2) = (params.sigma_bar_1, params.sigma_bar_2);
    let (csch, coth) = (inv_sinh(h), 1.0 / h.tanh());
    (s2 * csch - s1 * coth, s2 * coth - s1 * csch)
}

fn multiplier(params: &ModelParameters, height: f64, c1: f64, c3: f64, gamma: f64, k: usize) -> f64 {
    let p = params;
    let kf = k as f64;
    let m = (1.0 + kf * kf).sqrt();
    let bracket = coth_minus_csch_sech(height * m, height * kf);
    p.mu * c3 * m * bracket
        + (gamma * kf * kf - p.mu * p.sigma_tilde * height - p.mu * c1) * kf * (height * kf).tanh()
        + p.mu * (p.sigma_tilde - p.sigma_bar_2)
}

/// Closed-form multiplier `λ_k` at the stationary height, surface tension
/// `gamma`.
///
/// Evaluated as
/// `μ c3 m [coth(ρ*m) - 1/(sinh(ρ*m) cosh(ρ*k))]
///  + (γk² - μσ̃ρ* - μc1) k tanh(ρ*k) + μ(σ̃ - σ̄2)`, `m = sqrt(1 + k²)`,
/// which stays finite for every `k` representable in `f64`.
pub fn lambda_k(state: &FlatStationaryState, gamma: f64, k: usize) -> f64 {
    multiplier(&state.params, state.rho_star, state.c1, state.c3, gamma, k)
}

/// The same formula with the stationary height replaced by `height`.
///
/// Away from `ρ*` this is not an eigenvalue of anything; the time stepper
/// uses it as a diagonal approximation of the stiff part of the flow at
/// the current mean height.
pub fn lambda_at_height(params: &ModelParameters, height: f64, gamma: f64, k: usize) -> f64 {
    let (c1, c3) = layer_constants(params, height);
    multiplier(params, height, c1, c3, gamma, k)
}

/// `λ_0 = μσ̃ (1 - ρ*/sinh ρ*)`, the form that makes positivity evident.
pub fn lambda_zero_reduced(state: &FlatStationaryState) -> f64 {
    let p = &state.params;
    let r = state.rho_star;
    p.mu * p.sigma_tilde * (1.0 - r * inv_sinh(r))
}

/// `λ_k / (k³ tanh(ρ* k))`, which tends to `γ` as `k → ∞`.
pub fn tail_ratio(state: &FlatStationaryState, gamma: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("tail_ratio needs k >= 1".into()));
    }
    let kf = k as f64;
    Ok(lambda_k(state, gamma, k) / (kf * kf * kf * (state.rho_star * kf).tanh()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub params: ModelParameters,
    pub rho_star: f64,
    pub gamma: f64,
    pub k_max: usize,
    /// `λ_0 ..= λ_{k_max}`.
    pub lambdas: Vec<f64>,
    /// Oracle values for `k = 0 ..= k_oracle`, when requested.
    pub oracle_lambdas: Option<Vec<f64>>,
    pub min_lambda: f64,
    pub all_positive: bool,
}

/// `λ_0 ..= λ_{k_max}`; the modes are evaluated in parallel, each
/// independently, so the result does not depend on scheduling.
pub fn spectrum(state: &FlatStationaryState, gamma: f64, k_max: usize) -> SpectrumReport {
    let lambdas: Vec<f64> = (0..=k_max)
        .into_par_iter()
        .map(|k| lambda_k(state, gamma, k))
        .collect();
    let min_lambda = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    SpectrumReport {
        params: state.params,
        rho_star: state.rho_star,
        gamma,
        k_max,
        all_positive: lambdas.iter().all(|&l| l > 0.0),
        lambdas,
        oracle_lambdas: None,
        min_lambda,
    }
}

impl SpectrumReport {
    /// Fills `oracle_lambdas` for `k ≤ min(k_oracle, k_max)` with
    /// Richardson-extrapolated oracle values from grids `ny` and `ny / 2`.
    pub fn attach_oracle(&mut self, state: &FlatStationaryState, k_oracle: usize, ny: usize) -> Result<()> {
        let top = k_oracle.min(self.k_max);
        let values = (0..=top)
            .into_par_iter()
            .map(|k| extrapolated_oracle_lambda(state, self.gamma, k, ny))
            .collect::<Result<Vec<_>>>()?;
        self.oracle_lambdas = Some(values);
        Ok(())
    }
}

/// Result of [`gamma_threshold`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdReport {
    /// Midpoint of the final bracket, or 0 when every `γ ≥ tol` is stable.
    pub gamma_min: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    /// Modes `1 ..= k_eff` were scanned explicitly at `bracket_lo`; all
    /// higher modes are positive there by the tail bound.
    pub k_eff: usize,
}

/// Explicit scans beyond this many modes are refused.
const K_EFF_CAP: usize = 10_000_000;

/// Constant `D` of the tail bound: for `k ≥ 1`,
/// `λ_k(γ) ≥ k (γ tanh(ρ*) k² - D)`.
///
/// Each non-`γ` term of `λ_k` is bounded separately: the bracket in the
/// first term lies in `[0, coth ρ*]` and `sqrt(1 + k²) ≤ √2 k`.
pub fn tail_constant(state: &FlatStationaryState) -> f64 {
    let p = &state.params;
    let r = state.rho_star;
    p.mu * (p.sigma_tilde * r + state.c1.abs())
        + p.mu * (p.sigma_tilde - p.sigma_bar_2).abs()
        + std::f64::consts::SQRT_2 * p.mu * state.c3.abs() / r.tanh()
}

/// Smallest `k_t` with `λ_k(γ) > 0` certified for every `k ≥ k_t`.
fn tail_start(state: &FlatStationaryState, gamma: f64) -> f64 {
    let d = tail_constant(state);
    (d / (gamma * state.rho_star.tanh())).sqrt().floor() + 1.0
}

/// Smallest `λ_k(γ)` over all `k ≥ 1`, and the number of modes scanned.
fn min_over_modes(state: &FlatStationaryState, gamma: f64, k_scan: usize) -> Result<(f64, usize)> {
    let tail = tail_start(state, gamma);
    if !(tail < K_EFF_CAP as f64) {
        return Err(Error::ToleranceNotReached {
            iterations: 0,
            width: gamma,
        });
    }
    let k_eff = k_scan.max(tail as usize - 1).max(1);
    let min = (1..=k_eff)
        .into_par_iter()
        .map(|k| lambda_k(state, gamma, k))
        .reduce(|| f64::INFINITY, f64::min);
    Ok((min, k_eff))
}

/// Infimum of the set of `γ > 0` for which `λ_k(γ) > 0` for every `k ≥ 1`.
///
/// `λ_k` is affine and increasing in `γ`, so the set is an interval
/// `(γ_min, ∞)` or `[γ_min, ∞)`; the bracket is reported, not the endpoint
/// type. `λ_0` is positive for every valid parameter set and is not scanned.
/// Modes `1..=max(k_scan, k_t - 1)` are scanned; `k_t` comes from
/// [`tail_constant`].
pub fn gamma_threshold(state: &FlatStationaryState, k_scan: usize, tol: f64) -> Result<ThresholdReport> {
    if k_scan == 0 {
        return Err(Error::InvalidArgument("k_scan must be >= 1".into()));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    const MAX_ITER: usize = 2000;

    let mut hi = 1.0;
    let mut iterations = 0;
    while min_over_modes(state, hi, k_scan)?.0 <= 0.0 {
        hi *= 2.0;
        iterations += 1;
        if iterations > MAX_ITER || !hi.is_finite() {
            return Err(Error::ToleranceNotReached {
                iterations,
                width: hi,
            });
        }
    }
    let mut lo = hi;
    loop {
        lo *= 0.5;
        if lo < tol {
            let (_, k_eff) = min_over_modes(state, tol, k_scan)?;
            return Ok(ThresholdReport {
                gamma_min: 0.0,
                bracket_lo: 0.0,
                bracket_hi: tol,
                k_eff,
            });
        }
        if min_over_modes(state, lo, k_scan)?.0 <= 0.0 {
            break;
        }
        hi = lo;
    }

    // min λ(lo) ≤ 0 < min λ(hi)
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        iterations += 1;
        if mid <= lo || mid >= hi || iterations > MAX_ITER {
            return Err(Error::ToleranceNotReached {
                iterations,
                width: hi - lo,
            });
        }
        if min_over_modes(state, mid, k_scan)?.0 > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (_, k_eff) = min_over_modes(state, lo, k_scan)?;
    Ok(ThresholdReport {
        gamma_min: 0.5 * (lo + hi),
        bracket_lo: lo,
        bracket_hi: hi,
        k_eff,
    })
}

/// Which trigonometric mode the oracle perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Cos,
    Sin,
}

/// Numerical and closed-form modal profiles on `y'_i = i / ny`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalSolution {
    pub k: usize,
    pub kind: ModeKind,
    /// `a_k` or `b_k`.
    pub amplitude: f64,
    pub y: Vec<f64>,
    /// Nutrient perturbation profile (`A_k` or `B_k`).
    pub nutrient: Vec<f64>,
    /// Pressure perturbation profile (`M_k` or `N_k`).
    pub pressure: Vec<f64>,
    pub nutrient_closed: Vec<f64>,
    pub pressure_closed: Vec<f64>,
    /// One-sided second-order estimate of the pressure slope at `y' = 1`.
    pub pressure_slope_top: f64,
    /// `pressure_slope_top / (amplitude ρ*)`.
    pub lambda: f64,
}

impl ModalSolution {
    pub fn nutrient_sup_error(&self) -> f64 {
        sup_diff(&self.nutrient, &self.nutrient_closed)
    }

    pub fn pressure_sup_error(&self) -> f64 {
        sup_diff(&self.pressure, &self.pressure_closed)
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Source of the nutrient modal problem for unit amplitude.
pub fn nutrient_source(state: &FlatStationaryState, k: usize, y: f64) -> f64 {
    let (r, c1, c2) = (state.rho_star, state.c1, state.c2);
    let k2 = (k * k) as f64;
    let (sh, ch) = ((y * r).sinh(), (y * r).cosh());
    2.0 / r * (c1 * sh + c2 * ch) - k2 * y * (c1 * ch + c2 * sh)
}

/// Source of the pressure modal problem for unit amplitude.
pub fn pressure_source(state: &FlatStationaryState, k: usize, y: f64) -> f64 {
    let p = &state.params;
    let (r, c1, c2) = (state.rho_star, state.c1, state.c2);
    let k2 = (k * k) as f64;
    let (sh, ch) = ((y * r).sinh(), (y * r).cosh());
    2.0 / r * p.mu * (p.sigma_tilde - c1 * sh - c2 * ch)
        - k2 * p.mu * (c1 * y + p.sigma_tilde * r * y * y - c2 * y * sh - c1 * y * ch)
}

/// `sinh(a y) / sinh(a)` for `y ∈ [0, 1]`, `a > 0`.
fn sinh_ratio(a: f64, y: f64) -> f64 {
    (a * (y - 1.0)).exp() * (-2.0 * a * y).exp_m1() / (-2.0 * a).exp_m1()
}

/// Closed-form nutrient profile for unit amplitude.
pub fn nutrient_closed(state: &FlatStationaryState, k: usize, y: f64) -> f64 {
    let (r, c1, c2) = (state.rho_star, state.c1, state.c2);
    let m = (1.0 + (k * k) as f64).sqrt();
    let s = sinh_ratio(r * m, y);
    c1 * (y * (y * r).cosh() - s * r.cosh()) + c2 * (y * (y * r).sinh() - s * r.sinh())
}

/// Closed-form pressure profile for unit amplitude.
pub fn pressure_closed(state: &FlatStationaryState, gamma: f64, k: usize, y: f64) -> f64 {
    let p = &state.params;
    let (r, c1, c2, c3) = (state.rho_star, state.c1, state.c2, state.c3);
    let (mu, st) = (p.mu, p.sigma_tilde);
    let common = mu * c1 * y + mu * st * r * y * y - mu * (c1 * y * (y * r).cosh() + c2 * y * (y * r).sinh());
    if k == 0 {
        return -mu * c3 / r.sinh() * (y * r - r - (y * r).sinh()) - mu * st * r - mu * c1 + common;
    }
    let kf = k as f64;
    let m = (1.0 + kf * kf).sqrt();
    // sinh(yρk) - tanh(ρk) cosh(yρk) = -sinh(ρk(1 - y)) / cosh(ρk)
    let first = mu * c3 * m / kf * inv_sinh(r * m) * (r * kf * (1.0 - y)).sinh() * sech(r * kf);
    let ratio_k = ((y - 1.0) * r * kf).exp() * (1.0 + (-2.0 * y * r * kf).exp()) / (1.0 + (-2.0 * r * kf).exp());
    first
        + mu * c3 * sinh_ratio(r * m, y)
        + (gamma * kf * kf - mu * st * r - mu * c1) * ratio_k
        + common
}

/// Finite-difference solution of both modal problems for a unit cosine
/// mode on `ny + 1` equispaced points of `[0, 1]`.
pub fn modal_oracle(state: &FlatStationaryState, gamma: f64, k: usize, ny: usize) -> Result<ModalSolution> {
    modal_oracle_with(state, gamma, k, ny, ModeKind::Cos, 1.0)
}

/// [`modal_oracle`] for a general mode `amplitude · cos kx` or
/// `amplitude · sin kx`. The sine problem has the same equations with
/// `b_k` in place of `a_k`.
pub fn modal_oracle_with(
    state: &FlatStationaryState,
    gamma: f64,
    k: usize,
    ny: usize,
    kind: ModeKind,
    amplitude: f64,
) -> Result<ModalSolution> {
    if ny < 64 {
        return Err(Error::InvalidGrid(format!("oracle needs ny >= 64, got {ny}")));
    }
    if kind == ModeKind::Sin && k == 0 {
        return Err(Error::InvalidArgument("there is no sine mode for k = 0".into()));
    }
    let p = &state.params;
    let r = state.rho_star;
    let h = 1.0 / ny as f64;
    let y: Vec<f64> = (0..=ny).map(|i| i as f64 * h).collect();
    let k2 = (k * k) as f64;
    let c = 1.0 / (h * h * r * r);

    // Nutrient: unknowns at i = 1..ny-1, zero at both ends.
    let n_in = ny - 1;
    let nutrient_lu = TridiagonalLu::new(vec![c; n_in], vec![-2.0 * c - (1.0 + k2); n_in], vec![c; n_in])?;
    let mut rhs: Vec<f64> = y[1..ny].iter().map(|&yi| amplitude * nutrient_source(state, k, yi)).collect();
    nutrient_lu.solve_in_place(&mut rhs);
    let mut nutrient = Vec::with_capacity(ny + 1);
    nutrient.push(0.0);
    nutrient.extend_from_slice(&rhs);
    nutrient.push(0.0);

    // Pressure: unknowns at i = 0..ny-1; reflected ghost node at i = -1,
    // prescribed value at i = ny.
    let top = gamma * k2 * amplitude;
    let mut upper = vec![c; ny];
    upper[0] = 2.0 * c;
    let pressure_lu = TridiagonalLu::new(vec![c; ny], vec![-2.0 * c - k2; ny], upper)?;
    let mut rhs: Vec<f64> = (0..ny)
        .map(|i| -p.mu * nutrient[i] + amplitude * pressure_source(state, k, y[i]))
        .collect();
    rhs[ny - 1] -= c * top;
    pressure_lu.solve_in_place(&mut rhs);
    let mut pressure = rhs;
    pressure.push(top);

    // Centered slope at y = 1 with the ghost value taken from the discrete
    // equation at the top node; the error expansion stays even in h, so
    // one Richardson step gains two orders.
    let rhs_top = -p.mu * nutrient[ny] + amplitude * pressure_source(state, k, 1.0);
    let slope = (pressure[ny] - pressure[ny - 1]) / h + (rhs_top + k2 * top) / (2.0 * h * c);
    let nutrient_closed = y.iter().map(|&yi| amplitude * nutrient_closed(state, k, yi)).collect();
    let pressure_closed = y
        .iter()
        .map(|&yi| amplitude * pressure_closed(state, gamma, k, yi))
        .collect();
    Ok(ModalSolution {
        k,
        kind,
        amplitude,
        y,
        nutrient,
        pressure,
        nutrient_closed,
        pressure_closed,
        pressure_slope_top: slope,
        lambda: slope / (amplitude * r),
    })
}

/// `(4 λ(ny) - λ(ny/2)) / 3`, cancelling the `O(ny⁻²)` error of the oracle.
pub fn extrapolated_oracle_lambda(state: &FlatStationaryState, gamma: f64, k: usize, ny: usize) -> Result<f64> {
    let fine = modal_oracle(state, gamma, k, ny)?.lambda;
    let coarse = modal_oracle(state, gamma, k, ny / 2)?.lambda;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Confirms that a sine mode has the same multiplier as the cosine mode.
pub fn b_mode_symmetry_check(state: &FlatStationaryState, gamma: f64, k: usize, ny: usize) -> bool {
    if k == 0 {
        return true;
    }
    match (
        modal_oracle_with(state, gamma, k, ny, ModeKind::Cos, 1.0),
        modal_oracle_with(state, gamma, k, ny, ModeKind::Sin, 1.0),
    ) {
        (Ok(c), Ok(s)) => (c.lambda - s.lambda).abs() <= 1e-12 * c.lambda.abs().max(1.0),
        _ => false,
    }
}
