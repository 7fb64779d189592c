//! Physical constants of the model.

use crate::error::{Error, Result};

/// The five positive constants of the model.
///
/// Nutrient obeys `Δσ = σ` with `σ = sigma_bar_1` on the substrate and
/// `σ = sigma_bar_2` on the free surface; pressure obeys
/// `Δp = -mu (σ - sigma_tilde)` with `p = gamma κ` on the free surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParameters {
    /// Proliferation rate.
    pub mu: f64,
    /// Proliferation threshold of the nutrient concentration.
    pub sigma_tilde: f64,
    /// Nutrient concentration on the substrate `y = 0`.
    pub sigma_bar_1: f64,
    /// Nutrient concentration on the free surface.
    pub sigma_bar_2: f64,
    /// Surface tension coefficient.
    pub gamma: f64,
}

impl ModelParameters {
    pub fn new(mu: f64, sigma_tilde: f64, sigma_bar_1: f64, sigma_bar_2: f64, gamma: f64) -> Self {
        Self {
            mu,
            sigma_tilde,
            sigma_bar_1,
            sigma_bar_2,
            gamma,
        }
    }

    /// `mu = sigma_tilde = gamma = 1`, `sigma_bar_1 = 2`, `sigma_bar_2 = 3`.
    ///
    /// The reference parameter set used throughout the test-suite and the
    /// example configurations.
    pub fn reference() -> Self {
        Self::new(1.0, 1.0, 2.0, 3.0, 1.0)
    }

    pub fn alpha(&self) -> f64 {
        (self.sigma_bar_1 + self.sigma_bar_2) / self.sigma_tilde
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    /// Checks positivity of every field and `alpha > 2`.
    ///
    /// Positivity is checked first so that a zero `sigma_tilde` reports
    /// the offending field rather than an infinite `alpha`.
    pub fn validate(self) -> Result<Self> {
        let fields = [
            ("mu", self.mu),
            ("sigma_tilde", self.sigma_tilde),
            ("sigma_bar_1", self.sigma_bar_1),
            ("sigma_bar_2", self.sigma_bar_2),
            ("gamma", self.gamma),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonPositiveParameter { name, value });
            }
        }
        let alpha = self.alpha();
        if !(alpha > 2.0) {
            return Err(Error::AlphaOutOfRange { alpha });
        }
        Ok(self)
    }
}

impl Default for ModelParameters {
    fn default() -> Self {
        Self::reference()
    }
}
