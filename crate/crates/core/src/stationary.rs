//! The flat stationary state: a layer of constant height `ρ*` with
//! nutrient `σ*(y)` and pressure `p*(y)` depending on depth only.
//!
//! `ρ*` is the unique positive root of
//! `f_α(x) = α(1 - cosh x) + x sinh x`, which exists iff `α > 2`.

use crate::error::{Error, Result};
use crate::params::ModelParameters;

/// Upper end of the bracket search for `ρ*`.
pub const BRACKET_LIMIT: f64 = 100.0;

/// `f_α(x) = α(1 - cosh x) + x sinh x`.
///
/// For `x < 1` the Taylor series `Σ_{n≥1} (2n - α) x^{2n} / (2n)!` is summed
/// directly: the two terms of the closed form cancel to `O(x²)` there. Above
/// that the form `x sinh x - 2α sinh²(x/2)` is used; it overflows to `+∞`
/// only past `x ≈ 709`.
pub fn f_alpha(alpha: f64, x: f64) -> f64 {
    if x.abs() < 1.0 {
        let x2 = x * x;
        let mut term = 1.0; // x^{2n} / (2n)!
        let mut sum = 0.0;
        for n in 1..40 {
            let two_n = 2.0 * n as f64;
            term *= x2 / ((two_n - 1.0) * two_n);
            let contrib = (two_n - alpha) * term;
            sum += contrib;
            if contrib.abs() <= f64::EPSILON * 1e-3 * sum.abs() && n > 2 {
                break;
            }
        }
        sum
    } else {
        let s = (0.5 * x).sinh();
        x * x.sinh() - 2.0 * alpha * s * s
    }
}

/// `f_α'(x) = cosh x · (x + (1 - α) tanh x)`.
pub fn f_alpha_prime(alpha: f64, x: f64) -> f64 {
    x * x.cosh() + (1.0 - alpha) * x.sinh()
}

/// Unique positive root `ρ*` of `f_α`.
///
/// A sign-change bracket is located by doubling upward from `x = 1` (or
/// halving downward when the root lies below 1), bisected to relative width
/// `1e-14`, and polished with three Newton steps that are discarded if they
/// leave the bracket.
pub fn solve_rho_star(params: &ModelParameters) -> Result<f64> {
    let params = params.validate()?;
    let alpha = params.alpha();
    let f = |x: f64| f_alpha(alpha, x);

    let (mut lo, mut hi);
    if f(1.0) < 0.0 {
        lo = 1.0;
        hi = 2.0;
        while f(hi) <= 0.0 {
            if hi >= BRACKET_LIMIT {
                return Err(Error::BracketNotFound {
                    alpha,
                    limit: BRACKET_LIMIT,
                });
            }
            lo = hi;
            hi = (2.0 * hi).min(BRACKET_LIMIT);
        }
    } else {
        hi = 1.0;
        lo = 0.5;
        while f(lo) >= 0.0 {
            if lo < 1e-300 {
                return Err(Error::BracketNotFound {
                    alpha,
                    limit: BRACKET_LIMIT,
                });
            }
            hi = lo;
            lo *= 0.5;
        }
    }

    // f(lo) < 0 < f(hi) from here on.
    while hi - lo > 1e-14 * hi.min(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let fx = f(x);
        let dfx = f_alpha_prime(alpha, x);
        if fx == 0.0 || dfx == 0.0 {
            break;
        }
        let next = x - fx / dfx;
        if next > lo && next < hi && f(next).abs() <= fx.abs() {
            x = next;
        } else {
            break;
        }
    }
    Ok(x)
}

/// Closed-form flat stationary solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatStationaryState {
    pub params: ModelParameters,
    pub rho_star: f64,
    /// `(σ̄2 - σ̄1 cosh ρ*) / sinh ρ*`, the coefficient of `sinh y` in `σ*`.
    pub c1: f64,
    /// `σ̄1`, the coefficient of `cosh y` in `σ*`.
    pub c2: f64,
    /// `σ*'(ρ*) = (σ̄2 cosh ρ* - σ̄1) / sinh ρ*`.
    pub c3: f64,
}

/// Builds the stationary state and checks `|f_α(ρ*)|`, the two expressions
/// for `c3`, and the free-boundary equilibrium `p*'(ρ*) = 0`.
pub fn make_state(params: &ModelParameters) -> Result<FlatStationaryState> {
    let params = params.validate()?;
    let rho = solve_rho_star(&params)?;
    let (s1, s2) = (params.sigma_bar_1, params.sigma_bar_2);
    let (sh, coth) = (rho.sinh(), 1.0 / rho.tanh());
    let c1 = s2 / sh - s1 * coth;
    let c2 = s1;
    let c3 = s2 * coth - s1 / sh;
    let state = FlatStationaryState {
        params,
        rho_star: rho,
        c1,
        c2,
        c3,
    };

    let residual = f_alpha(params.alpha(), rho);
    let f_scale = params.alpha() * rho.cosh();
    if residual.abs() > 1e-12 * f_scale.max(1.0) {
        return Err(Error::InconsistentState(format!(
            "|f_alpha(rho*)| = {:e}",
            residual.abs()
        )));
    }
    let c3_alt = c1 * rho.cosh() + c2 * sh;
    let c3_scale = c3.abs().max((c1 * rho.cosh()).abs()).max((c2 * sh).abs());
    if (c3 - c3_alt).abs() > 1e-12 * c3_scale {
        return Err(Error::InconsistentState(format!(
            "c3 = {c3} but c1 cosh + c2 sinh = {c3_alt}"
        )));
    }
    let dp = state.p_star_prime_unchecked(rho);
    let dp_scale = params.mu * c1.abs().max(c3.abs()).max(params.sigma_tilde * rho);
    if dp.abs() > 1e-10 * dp_scale {
        return Err(Error::InconsistentState(format!("p*'(rho*) = {dp:e}")));
    }
    Ok(state)
}

impl FlatStationaryState {
    pub fn new(params: &ModelParameters) -> Result<Self> {
        make_state(params)
    }

    fn check_domain(&self, y: f64) -> Result<()> {
        if (0.0..=self.rho_star).contains(&y) {
            Ok(())
        } else {
            Err(Error::DomainError {
                y,
                rho_star: self.rho_star,
            })
        }
    }

    /// `σ*(y) = [σ̄2 sinh y + σ̄1 sinh(ρ* - y)] / sinh ρ*`.
    ///
    /// Algebraically equal to `c1 sinh y + c2 cosh y`; this form avoids
    /// the cancellation between those terms when `ρ*` is large.
    pub fn sigma_star(&self, y: f64) -> Result<f64> {
        self.check_domain(y)?;
        Ok(self.sigma_star_unchecked(y))
    }

    pub fn sigma_star_prime(&self, y: f64) -> Result<f64> {
        self.check_domain(y)?;
        Ok(self.sigma_star_prime_unchecked(y))
    }

    /// `p*(y) = μ c1 (y - ρ*) + μ(σ̄2 - σ*(y) - σ̃(ρ*² - y²)/2)`.
    pub fn p_star(&self, y: f64) -> Result<f64> {
        self.check_domain(y)?;
        Ok(self.p_star_unchecked(y))
    }

    pub fn p_star_prime(&self, y: f64) -> Result<f64> {
        self.check_domain(y)?;
        Ok(self.p_star_prime_unchecked(y))
    }

    pub(crate) fn sigma_star_unchecked(&self, y: f64) -> f64 {
        let p = &self.params;
        (p.sigma_bar_2 * y.sinh() + p.sigma_bar_1 * (self.rho_star - y).sinh()) / self.rho_star.sinh()
    }

    pub(crate) fn sigma_star_prime_unchecked(&self, y: f64) -> f64 {
        let p = &self.params;
        (p.sigma_bar_2 * y.cosh() - p.sigma_bar_1 * (self.rho_star - y).cosh()) / self.rho_star.sinh()
    }

    pub(crate) fn p_star_unchecked(&self, y: f64) -> f64 {
        let p = &self.params;
        let r = self.rho_star;
        p.mu * self.c1 * (y - r)
            + p.mu * (p.sigma_bar_2 - self.sigma_star_unchecked(y) - 0.5 * p.sigma_tilde * (r * r - y * y))
    }

    pub(crate) fn p_star_prime_unchecked(&self, y: f64) -> f64 {
        let p = &self.params;
        p.mu * (self.c1 - self.sigma_star_prime_unchecked(y) + p.sigma_tilde * y)
    }

    /// `n` equispaced samples `(y, σ*(y), p*(y))` over `[0, ρ*]`.
    pub fn sample_profiles(&self, n: usize) -> Vec<[f64; 3]> {
        (0..n)
            .map(|i| {
                let y = if n > 1 {
                    // Pin the last sample to ρ* exactly.
                    if i == n - 1 {
                        self.rho_star
                    } else {
                        self.rho_star * i as f64 / (n - 1) as f64
                    }
                } else {
                    0.0
                };
                [y, self.sigma_star_unchecked(y), self.p_star_unchecked(y)]
            })
            .collect()
    }
}
