//! The nonlinear surface evolution `ρ_t = -Ψ(ρ)` and its time integration.
//!
//! `Ψ(ρ) = ℬ(ρ) q` where `τ = ℛ(ρ)(σ̄1, σ̄2)` is the pulled-back nutrient and
//! `q = 𝒮(ρ)(-μ(τ - σ̃)) + 𝒯(ρ)(γ κ)` the pulled-back pressure.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::elliptic::{Discretization, SolverKind, TransformedOperator};
use crate::error::{Error, Result};
use crate::field::StripField;
use crate::fourier::{to_fourier, BoundaryProfile};
use crate::params::ModelParameters;
use crate::spectrum::lambda_at_height;

/// Burn-in excluded from decay fits.
pub const DEFAULT_BURN_IN: f64 = 0.1;
/// Amplitude below which a mode is considered decayed to round-off.
pub const FIT_CUTOFF: f64 = 1e-10;
/// Amplitude floor required at the start of a fit window.
pub const NOISE_FLOOR: f64 = 1e-12;
/// Automatic step of the IMEX scheme.
pub const IMEX_DEFAULT_DT: f64 = 1e-3;
/// Safety factor `C` of the explicit cap `dt ≤ C / (γ k³ tanh(ρ̄ k))`.
pub const RK4_CAP_FACTOR: f64 = 2.0;
/// Maximum number of step halvings after rejected steps.
pub const MAX_HALVINGS: usize = 20;

/// Everything computed on the way to `Ψ(ρ)`.
#[derive(Debug, Clone)]
pub struct PsiEvaluation {
    pub psi: Vec<f64>,
    pub nutrient: StripField,
    pub pressure: StripField,
    /// `-μ(τ - σ̃)`, the right-hand side of the pressure problem.
    pub source: StripField,
    /// `μ ∬ (σ - σ̃)` over the physical domain.
    pub growth: f64,
}

/// The map `ρ ↦ Ψ(ρ)` on a fixed discretization.
#[derive(Debug, Clone)]
pub struct BoundaryFlow {
    params: ModelParameters,
    disc: Arc<Discretization>,
    solver: SolverKind,
}

impl BoundaryFlow {
    pub fn new(params: ModelParameters, disc: Arc<Discretization>) -> Result<Self> {
        Ok(Self {
            params: params.validate()?,
            disc,
            solver: SolverKind::default(),
        })
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub fn params(&self) -> &ModelParameters {
        &self.params
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn evaluate(&self, profile: &BoundaryProfile) -> Result<PsiEvaluation> {
        let p = &self.params;
        let op = TransformedOperator::with_solver(&self.disc, profile, self.solver)?;
        let nutrient = op.solve_r(p.sigma_bar_1, p.sigma_bar_2)?;
        let mut source = nutrient.clone();
        source
            .values_mut()
            .iter_mut()
            .for_each(|v| *v = -p.mu * (*v - p.sigma_tilde));
        let k_bc: Vec<f64> = op.curvature().iter().map(|k| p.gamma * k).collect();
        let pressure = op.solve_st(&source, &k_bc)?;
        let psi = op.boundary().conservative(&pressure, &source)?;
        let growth = -op.integrate_physical(&source);
        Ok(PsiEvaluation {
            psi,
            nutrient,
            pressure,
            source,
            growth,
        })
    }

    pub fn psi(&self, profile: &BoundaryProfile) -> Result<Vec<f64>> {
        Ok(self.evaluate(profile)?.psi)
    }

    /// Height `h` at which the flat profile is an exact fixed point of the
    /// discrete flow. It differs from `ρ*` by the discretization error.
    pub fn discrete_flat_equilibrium(&self, guess: f64) -> Result<f64> {
        let grid = self.disc.grid_x();
        let flat_psi = |h: f64| -> Result<f64> {
            let psi = self.psi(&BoundaryProfile::flat(grid, h)?)?;
            Ok(psi.iter().sum::<f64>() / psi.len() as f64)
        };
        let (mut h0, mut h1) = (guess, guess * (1.0 + 1e-3));
        let (mut f0, mut f1) = (flat_psi(h0)?, flat_psi(h1)?);
        for iterations in 0..50 {
            if f1 == 0.0 || (h1 - h0).abs() <= 1e-15 * h1 {
                return Ok(h1);
            }
            if f1 == f0 {
                return Err(Error::ToleranceNotReached {
                    iterations,
                    width: (h1 - h0).abs(),
                });
            }
            let h2 = h1 - f1 * (h1 - h0) / (f1 - f0);
            (h0, f0) = (h1, f1);
            h1 = h2;
            f1 = flat_psi(h1)?;
        }
        Err(Error::ToleranceNotReached {
            iterations: 50,
            width: (h1 - h0).abs(),
        })
    }
}

/// `Ψ(ρ)` on a fresh discretization with `ny` levels and the default
/// solver.
pub fn psi(params: &ModelParameters, profile: &BoundaryProfile, grid_y: crate::grid::VerticalGrid) -> Result<Vec<f64>> {
    let disc = Discretization::new(profile.grid(), grid_y);
    BoundaryFlow::new(*params, disc)?.psi(profile)
}

/// `∫_0^{2π} ρ dx`, exact for the trigonometric interpolant.
pub fn volume(profile: &BoundaryProfile) -> f64 {
    2.0 * PI * profile.mean()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stepper {
    /// Classical fourth-order Runge-Kutta; the reference scheme.
    Rk4,
    /// Linearly implicit Euler with the flat-layer multipliers at the mean
    /// height as the implicit part.
    Imex,
}

impl std::str::FromStr for Stepper {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Stepper::Rk4),
            "imex" => Ok(Stepper::Imex),
            other => Err(Error::InvalidArgument(format!(
                "unknown stepper `{other}`, expected `imex` or `rk4`"
            ))),
        }
    }
}

impl std::fmt::Display for Stepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stepper::Rk4 => "rk4",
            Stepper::Imex => "imex",
        })
    }
}

/// Outcome of a single accepted step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub profile: BoundaryProfile,
    /// `μ ∬ (σ - σ̃)` at the start of the step.
    pub growth: f64,
}

/// Zeroes the Nyquist bin of a spectrum in place.
fn drop_nyquist(c: &mut [Complex64]) {
    let n = c.len();
    c[n / 2] = Complex64::new(0.0, 0.0);
}

fn profile_or_reject(grid: crate::grid::PeriodicGrid, values: Vec<f64>, t: f64, dt: f64) -> Result<BoundaryProfile> {
    BoundaryProfile::new(grid, values).map_err(|e| match e {
        Error::NonPositiveProfile { .. } => Error::StepRejected { t, dt },
        other => other,
    })
}

/// One step of length `dt` from `profile` at time `t`.
///
/// The IMEX step treats every mode `k ≥ 1` as
/// `ρ̂_k ← ρ̂_k - dt Ψ̂_k / (1 + dt max(λ_k(ρ̄), 0))`, which is the linearly
/// implicit Euler step with the flat-layer multiplier at the mean height
/// `ρ̄` standing in for the Jacobian. The mean mode is advanced explicitly,
/// so the discrete volume balance holds step by step. The Nyquist mode is
/// removed after every step by both schemes.
pub fn step(flow: &BoundaryFlow, stepper: Stepper, profile: &BoundaryProfile, t: f64, dt: f64) -> Result<StepOutcome> {
    let grid = profile.grid();
    let ops = flow.disc.spectral();
    let nx = grid.nx();
    match stepper {
        Stepper::Imex => {
            let eval = flow.evaluate(profile)?;
            let mut c = ops.forward(profile.values());
            let psi_hat = ops.forward(&eval.psi);
            let mean = profile.mean();
            let p = flow.params;
            c[0] -= dt * psi_hat[0];
            for k in 1..nx / 2 {
                let lam = lambda_at_height(&p, mean, p.gamma, k).max(0.0);
                let damp = 1.0 / (1.0 + dt * lam);
                c[k] -= psi_hat[k] * (dt * damp);
                c[nx - k] -= psi_hat[nx - k] * (dt * damp);
            }
            drop_nyquist(&mut c);
            let next = profile_or_reject(grid, ops.inverse(c), t, dt)?;
            Ok(StepOutcome {
                profile: next,
                growth: eval.growth,
            })
        }
        Stepper::Rk4 => {
            let stage = |base: &[f64], k: &[f64], h: f64| -> Result<BoundaryProfile> {
                let v = base.iter().zip(k).map(|(b, kk)| b - h * kk).collect();
                profile_or_reject(grid, v, t, dt)
            };
            let rho = profile.values();
            let e1 = flow.evaluate(profile)?;
            let k1 = e1.psi;
            let k2 = flow.psi(&stage(rho, &k1, 0.5 * dt)?)?;
            let k3 = flow.psi(&stage(rho, &k2, 0.5 * dt)?)?;
            let k4 = flow.psi(&stage(rho, &k3, dt)?)?;
            let v: Vec<f64> = (0..nx)
                .map(|j| rho[j] - dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
                .collect();
            let mut c = ops.forward(&v);
            drop_nyquist(&mut c);
            let next = profile_or_reject(grid, ops.inverse(c), t, dt)?;
            Ok(StepOutcome {
                profile: next,
                growth: e1.growth,
            })
        }
    }
}

/// Stability cap `C / (γ k³ tanh(ρ̄ k))` of the explicit scheme at the
/// highest resolved wavenumber.
pub fn explicit_dt_cap(params: &ModelParameters, nx: usize, mean_height: f64) -> f64 {
    let k = (nx / 2 - 1) as f64;
    RK4_CAP_FACTOR / (params.gamma * k * k * k * (mean_height * k).tanh())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct EvolutionConfig {
    pub params: ModelParameters,
    pub initial: BoundaryProfile,
    pub ny: usize,
    /// Boundary refinement of the vertical grid, see [`crate::grid::VerticalGrid`].
    pub stretch: f64,
    pub t_end: f64,
    pub stepper: Stepper,
    pub dt: TimeStep,
    /// Record every this many steps; the initial and final states are
    /// always recorded.
    pub record_every: usize,
    pub tracked_modes: Vec<usize>,
    pub solver: SolverKind,
}

impl EvolutionConfig {
    pub fn new(params: ModelParameters, initial: BoundaryProfile, t_end: f64) -> Self {
        Self {
            params,
            initial,
            ny: 64,
            stretch: 0.5,
            t_end,
            stepper: Stepper::Imex,
            dt: TimeStep::Auto,
            record_every: 1,
            tracked_modes: vec![1],
            solver: SolverKind::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_end must be positive, got {}", self.t_end)));
        }
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
            }
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be >= 1".into()));
        }
        let k_rep = self.initial.grid().k_rep();
        if let Some(&k) = self.tracked_modes.iter().find(|&&k| k == 0 || k > k_rep) {
            return Err(Error::InvalidArgument(format!(
                "tracked mode {k} outside 1..={k_rep}"
            )));
        }
        Ok(())
    }

    /// The step actually used before any halving.
    pub fn initial_dt(&self) -> f64 {
        match (self.dt, self.stepper) {
            (TimeStep::Fixed(dt), _) => dt,
            (TimeStep::Auto, Stepper::Imex) => IMEX_DEFAULT_DT,
            (TimeStep::Auto, Stepper::Rk4) => {
                explicit_dt_cap(&self.params, self.initial.grid().nx(), self.initial.mean())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    PinchOff { t: f64, min: f64, mean: f64 },
    /// Positivity could not be kept even after [`MAX_HALVINGS`] halvings.
    StepCollapse { t: f64, dt: f64 },
    SolverFailure { t: f64, message: String },
}

impl Termination {
    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::PinchOff { .. } => "pinch_off",
            Termination::StepCollapse { .. } => "step_collapse",
            Termination::SolverFailure { .. } => "solver_failure",
        }
    }
}

/// Signed Fourier coefficients of one tracked mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSeries {
    pub k: usize,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl ModeSeries {
    pub fn magnitude(&self, i: usize) -> f64 {
        self.cos[i].hypot(self.sin[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub profiles: Vec<BoundaryProfile>,
    pub volume: Vec<f64>,
    /// `dVol/dt - μ∬(σ - σ̃)`: at the first record the instantaneous value
    /// `-∫Ψ dx - μ∬(σ - σ̃)`, afterwards the difference quotient over the
    /// step that ended at the record minus the growth term at its start.
    pub volume_residual: Vec<f64>,
    pub max_rho: Vec<f64>,
    pub min_rho: Vec<f64>,
    pub modes: Vec<ModeSeries>,
    pub dt_final: f64,
    pub steps: usize,
    pub termination: Termination,
}

impl EvolutionTrace {
    pub fn mode(&self, k: usize) -> Result<&ModeSeries> {
        self.modes.iter().find(|m| m.k == k).ok_or(Error::ModeNotTracked(k))
    }

    fn record(&mut self, t: f64, profile: &BoundaryProfile, residual: f64) {
        let c = to_fourier(profile);
        self.times.push(t);
        self.volume.push(volume(profile));
        self.volume_residual.push(residual);
        self.max_rho.push(profile.max());
        self.min_rho.push(profile.min());
        for m in &mut self.modes {
            m.cos.push(c.a(m.k));
            m.sin.push(c.b(m.k));
        }
        self.profiles.push(profile.clone());
    }
}

/// Integrates `ρ_t = -Ψ(ρ)` from `config.initial` to `config.t_end`.
///
/// Failures inside the run end the integration and are reported through
/// [`EvolutionTrace::termination`]; only an invalid configuration is an
/// error.
pub fn evolve(config: &EvolutionConfig) -> Result<EvolutionTrace> {
    config.validate()?;
    let grid_y = crate::grid::VerticalGrid::new(config.ny, config.stretch)?;
    let disc = Discretization::new(config.initial.grid(), grid_y);
    let flow = BoundaryFlow::new(config.params, disc)?.with_solver(config.solver);

    let mut trace = EvolutionTrace {
        times: Vec::new(),
        profiles: Vec::new(),
        volume: Vec::new(),
        volume_residual: Vec::new(),
        max_rho: Vec::new(),
        min_rho: Vec::new(),
        modes: config
            .tracked_modes
            .iter()
            .map(|&k| ModeSeries {
                k,
                cos: Vec::new(),
                sin: Vec::new(),
            })
            .collect(),
        dt_final: config.initial_dt(),
        steps: 0,
        termination: Termination::Completed,
    };

    let mut rho = config.initial.clone();
    let mut t = 0.0;
    let mut dt = config.initial_dt();
    let initial_residual = match flow.evaluate(&rho) {
        Ok(e) => -e.psi.iter().sum::<f64>() * rho.grid().spacing() - e.growth,
        Err(err) => {
            trace.termination = failure(0.0, err);
            trace.record(0.0, &rho, f64::NAN);
            return Ok(trace);
        }
    };
    trace.record(0.0, &rho, initial_residual);

    let mut halvings = 0;
    while t < config.t_end * (1.0 - 1e-12) {
        let h = dt.min(config.t_end - t);
        match step(&flow, config.stepper, &rho, t, h) {
            Ok(out) => {
                let residual = (volume(&out.profile) - volume(&rho)) / h - out.growth;
                rho = out.profile;
                t = if h == config.t_end - t { config.t_end } else { t + h };
                trace.steps += 1;
                let last = t >= config.t_end * (1.0 - 1e-12);
                if trace.steps % config.record_every == 0 || last {
                    trace.record(t, &rho, residual);
                }
            }
            Err(Error::StepRejected { .. }) if halvings < MAX_HALVINGS => {
                halvings += 1;
                dt *= 0.5;
            }
            Err(Error::StepRejected { t: ts, dt: dts }) => {
                trace.termination = Termination::StepCollapse { t: ts, dt: dts };
                break;
            }
            Err(err) => {
                trace.termination = failure(t, err);
                break;
            }
        }
    }
    if !trace.termination.is_completed() && trace.times.last() != Some(&t) {
        // Keep the last accepted state in the trace.
        trace.record(t, &rho, f64::NAN);
    }
    trace.dt_final = dt;
    Ok(trace)
}

fn failure(t: f64, err: Error) -> Termination {
    match err {
        Error::PinchOff { min, mean } => Termination::PinchOff { t, min, mean },
        other => Termination::SolverFailure {
            t,
            message: other.to_string(),
        },
    }
}

/// Least-squares fit `|ρ̂_k(t)| ≈ K e^{-ωt}` for one tracked mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEstimate {
    pub k: usize,
    pub omega: f64,
    pub prefactor: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    pub r_squared: f64,
}

/// Fits the decay rate of mode `k` on `[burn_in, min(t_end, t_cut)]`, where
/// `t_cut` is the first time the amplitude drops below [`FIT_CUTOFF`].
pub fn fit_decay(trace: &EvolutionTrace, k: usize, burn_in: f64) -> Result<DecayEstimate> {
    let series = trace.mode(k)?;
    let n = trace.times.len();
    let start = trace.times.iter().position(|&t| t >= burn_in).unwrap_or(n);
    if start < n && series.magnitude(start) < NOISE_FLOOR {
        return Err(Error::AmplitudeUnderflow { k });
    }
    let mut end = start;
    while end < n && series.magnitude(end) >= FIT_CUTOFF {
        end += 1;
    }
    let samples = end - start;
    if samples < 3 {
        return Err(Error::WindowTooShort { k, samples });
    }
    let ts = &trace.times[start..end];
    let ys: Vec<f64> = (start..end).map(|i| series.magnitude(i).ln()).collect();
    let nf = samples as f64;
    let t_mean = ts.iter().sum::<f64>() / nf;
    let y_mean = ys.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (t, y) in ts.iter().zip(&ys) {
        let (dt, dy) = (t - t_mean, y - y_mean);
        sxy += dt * dy;
        sxx += dt * dt;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(DecayEstimate {
        k,
        omega: -slope,
        prefactor: intercept.exp(),
        t_start: ts[0],
        t_end: ts[samples - 1],
        samples,
        r_squared,
    })
}
