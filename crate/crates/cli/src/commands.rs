//! The four subcommands. Each validates the model before touching the
//! output directory, so a rejected configuration leaves no files behind.

use std::path::Path;

use serde::Serialize;
use tumorstrip_core::evolution::{evolve, fit_decay, EvolutionConfig, EvolutionTrace, Termination, NOISE_FLOOR};
use tumorstrip_core::spectrum::{gamma_threshold, lambda_k, spectrum, tail_ratio};
use tumorstrip_core::stationary::{f_alpha, make_state, FlatStationaryState};
use tumorstrip_core::{BoundaryProfile, PeriodicGrid, VerticalGrid};

use crate::config::{load_config, RunConfig};
use crate::exit::{self, Failure};
use crate::output::{opt_real, real, write_json, Csv, OutDir, RESOLVED_CONFIG};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Stationary,
    Spectrum,
    Threshold,
    Evolve,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Stationary => "stationary",
            Command::Spectrum => "spectrum",
            Command::Threshold => "threshold",
            Command::Evolve => "evolve",
        }
    }
}

/// Runs one subcommand and returns the exit code. Outputs written before
/// a numerical failure or an early termination are kept.
pub fn run(command: Command, config_path: &Path, out: &Path) -> Result<i32, Failure> {
    let config = load_config(config_path)?;
    let state = make_state(&config.model())?;
    let prepared = Prepared { config, state };
    prepared.preflight(command)?;
    let dir = OutDir::create(out)?;
    write_json(&dir.file(RESOLVED_CONFIG), &prepared.config)?;
    match command {
        Command::Stationary => prepared.stationary(&dir),
        Command::Spectrum => prepared.spectrum(&dir),
        Command::Threshold => prepared.threshold(&dir),
        Command::Evolve => prepared.evolve(&dir),
    }
}

struct Prepared {
    config: RunConfig,
    state: FlatStationaryState,
}

#[derive(Serialize)]
struct StationaryOutput<'a> {
    rho_star: f64,
    alpha: f64,
    c1: f64,
    c2: f64,
    c3: f64,
    lambda_0: f64,
    f_alpha_residual: f64,
    p_star_slope_at_surface: f64,
    samples: usize,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct OracleSummary {
    k_oracle: usize,
    ny_oracle: usize,
    max_rel_err: f64,
    tolerance: f64,
    converged: bool,
}

#[derive(Serialize)]
struct SpectrumOutput<'a> {
    rho_star: f64,
    gamma: f64,
    k_max: usize,
    min_lambda: f64,
    all_positive: bool,
    oracle: Option<OracleSummary>,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct ThresholdOutput<'a> {
    gamma_min: f64,
    bracket_lo: f64,
    bracket_hi: f64,
    k_eff: usize,
    k_scan: usize,
    tol: f64,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct ModeDecay {
    k: usize,
    /// The mode carried the initial perturbation; other modes are only
    /// driven nonlinearly and their fits are informational.
    perturbed: bool,
    lambda_predicted: f64,
    omega_fit: Option<f64>,
    rel_dev: Option<f64>,
    r_squared: Option<f64>,
    prefactor: Option<f64>,
    t_start: Option<f64>,
    t_end: Option<f64>,
    samples: Option<usize>,
    error: Option<String>,
}

#[derive(Serialize)]
struct TerminationOutput {
    reason: &'static str,
    t: Option<f64>,
    detail: Option<String>,
}

#[derive(Serialize)]
struct DecayOutput<'a> {
    termination: TerminationOutput,
    t_final: f64,
    steps: usize,
    dt_initial: f64,
    dt_final: f64,
    burn_in: f64,
    modes: Vec<ModeDecay>,
    notes: Vec<&'static str>,
    config: &'a RunConfig,
}

impl Prepared {
    fn preflight(&self, command: Command) -> Result<(), Failure> {
        let g = &self.config.grid;
        if command == Command::Evolve {
            VerticalGrid::new(g.ny, g.stretch)?;
            self.initial_profile()?;
        }
        if command == Command::Spectrum && self.config.spectrum.oracle && self.config.spectrum.ny_oracle < 128 {
            return Err(Failure::config(format!(
                "spectrum.ny_oracle must be at least 128 (extrapolation also uses ny_oracle / 2), got {}",
                self.config.spectrum.ny_oracle
            )));
        }
        Ok(())
    }

    /// `ρ* + eps cos(k x)` on the configured periodic grid.
    fn initial_profile(&self) -> Result<BoundaryProfile, Failure> {
        let grid = PeriodicGrid::new(self.config.grid.nx)?;
        let perturbation = self.config.evolve.perturbation;
        let (k, eps) = (perturbation.k as f64, perturbation.eps);
        let rho_star = self.state.rho_star;
        Ok(BoundaryProfile::from_fn(grid, |x| rho_star + eps * (k * x).cos())?)
    }

    fn gamma(&self) -> f64 {
        self.config.params.gamma
    }

    fn stationary(&self, dir: &OutDir) -> Result<i32, Failure> {
        let st = &self.state;
        let n = self.config.stationary.samples;
        let mut csv = Csv::new("stationary", &["y".into(), "sigma_star".into(), "p_star".into()]);
        for [y, s, p] in st.sample_profiles(n) {
            csv.row(vec![real(y), real(s), real(p)]);
        }
        csv.write(&dir.file("stationary_profiles.csv"))?;
        let summary = StationaryOutput {
            rho_star: st.rho_star,
            alpha: st.params.alpha(),
            c1: st.c1,
            c2: st.c2,
            c3: st.c3,
            lambda_0: lambda_k(st, self.gamma(), 0),
            f_alpha_residual: f_alpha(st.params.alpha(), st.rho_star).abs(),
            p_star_slope_at_surface: st.p_star_prime(st.rho_star)?,
            samples: n,
            config: &self.config,
        };
        write_json(&dir.file("stationary.json"), &summary)?;
        println!("rho_star = {}", real(st.rho_star));
        Ok(exit::OK)
    }

    fn spectrum(&self, dir: &OutDir) -> Result<i32, Failure> {
        let st = &self.state;
        let sc = &self.config.spectrum;
        let mut report = spectrum(st, self.gamma(), sc.k_max);
        if sc.oracle {
            report.attach_oracle(st, sc.k_oracle, sc.ny_oracle)?;
        }
        let header: Vec<String> = ["k", "lambda_k", "lambda_oracle", "rel_err", "tail_ratio"]
            .map(String::from)
            .to_vec();
        let mut csv = Csv::new("spectrum", &header);
        let mut max_rel_err = 0.0f64;
        for (k, &lambda) in report.lambdas.iter().enumerate() {
            let oracle = report.oracle_lambdas.as_ref().and_then(|o| o.get(k).copied());
            let rel_err = oracle.map(|o| ((o - lambda) / lambda).abs());
            if let Some(e) = rel_err {
                max_rel_err = max_rel_err.max(e);
            }
            let tail = if k == 0 { None } else { Some(tail_ratio(st, self.gamma(), k)?) };
            csv.row(vec![k.to_string(), real(lambda), opt_real(oracle), opt_real(rel_err), opt_real(tail)]);
        }
        csv.write(&dir.file("spectrum.csv"))?;
        let oracle = sc.oracle.then(|| OracleSummary {
            k_oracle: sc.k_oracle.min(sc.k_max),
            ny_oracle: sc.ny_oracle,
            max_rel_err,
            tolerance: sc.oracle_tol,
            converged: max_rel_err <= sc.oracle_tol,
        });
        let converged = oracle.as_ref().map_or(true, |o| o.converged);
        let summary = SpectrumOutput {
            rho_star: report.rho_star,
            gamma: report.gamma,
            k_max: report.k_max,
            min_lambda: report.min_lambda,
            all_positive: report.all_positive,
            oracle,
            config: &self.config,
        };
        write_json(&dir.file("spectrum_summary.json"), &summary)?;
        println!("min_lambda = {}, all_positive = {}", real(report.min_lambda), report.all_positive);
        if !converged {
            return Err(Failure::new(
                exit::NUMERICAL,
                format!(
                    "oracle relative error {} exceeds {} at ny_oracle = {}",
                    real(max_rel_err),
                    real(sc.oracle_tol),
                    sc.ny_oracle
                ),
            ));
        }
        Ok(exit::OK)
    }

    fn threshold(&self, dir: &OutDir) -> Result<i32, Failure> {
        let tc = &self.config.threshold;
        let report = gamma_threshold(&self.state, tc.k_scan, tc.tol)?;
        let summary = ThresholdOutput {
            gamma_min: report.gamma_min,
            bracket_lo: report.bracket_lo,
            bracket_hi: report.bracket_hi,
            k_eff: report.k_eff,
            k_scan: tc.k_scan,
            tol: tc.tol,
            config: &self.config,
        };
        write_json(&dir.file("threshold.json"), &summary)?;
        println!("gamma_min = {}", real(report.gamma_min));
        Ok(exit::OK)
    }

    fn evolve(&self, dir: &OutDir) -> Result<i32, Failure> {
        let ec = &self.config.evolve;
        let g = &self.config.grid;
        let eps = ec.perturbation.eps;
        let initial = self.initial_profile()?;
        let mut run = EvolutionConfig::new(self.state.params, initial, ec.t_end);
        run.ny = g.ny;
        run.stretch = g.stretch;
        run.stepper = ec.stepper();
        run.dt = ec.time_step();
        run.record_every = ec.record_every;
        run.tracked_modes = ec.tracked_modes.clone();
        let trace = evolve(&run)?;

        let mut header: Vec<String> = ["t", "volume", "volume_residual", "max_rho", "min_rho"]
            .map(String::from)
            .to_vec();
        for m in &trace.modes {
            header.push(format!("abs_a{}", m.k));
            header.push(format!("abs_b{}", m.k));
        }
        let mut csv = Csv::new("evolve", &header);
        for i in 0..trace.times.len() {
            let mut row = vec![
                real(trace.times[i]),
                real(trace.volume[i]),
                real(trace.volume_residual[i]),
                real(trace.max_rho[i]),
                real(trace.min_rho[i]),
            ];
            for m in &trace.modes {
                row.push(real(m.cos[i].abs()));
                row.push(real(m.sin[i].abs()));
            }
            csv.row(row);
        }
        csv.write(&dir.file("evolve.csv"))?;

        let modes: Vec<ModeDecay> = trace
            .modes
            .iter()
            .map(|m| {
                let lambda = lambda_k(&self.state, self.gamma(), m.k);
                let perturbed = m.k == ec.perturbation.k && eps != 0.0;
                match fit_decay(&trace, m.k, ec.burn_in) {
                    Ok(fit) => ModeDecay {
                        k: m.k,
                        perturbed,
                        lambda_predicted: lambda,
                        omega_fit: Some(fit.omega),
                        rel_dev: Some(((fit.omega - lambda) / lambda).abs()),
                        r_squared: Some(fit.r_squared),
                        prefactor: Some(fit.prefactor),
                        t_start: Some(fit.t_start),
                        t_end: Some(fit.t_end),
                        samples: Some(fit.samples),
                        error: None,
                    },
                    Err(err) => ModeDecay {
                        k: m.k,
                        perturbed,
                        lambda_predicted: lambda,
                        omega_fit: None,
                        rel_dev: None,
                        r_squared: None,
                        prefactor: None,
                        t_start: None,
                        t_end: None,
                        samples: None,
                        error: Some(err.to_string()),
                    },
                }
            })
            .collect();
        let mut notes = Vec::new();
        if growth_observed(&trace) || modes.iter().any(|m| m.perturbed && m.omega_fit.is_some_and(|w| w < 0.0)) {
            notes.push("unstable_growth_observed");
        }
        let summary = DecayOutput {
            termination: termination_output(&trace.termination),
            t_final: *trace.times.last().expect("trace holds the initial state"),
            steps: trace.steps,
            dt_initial: run.initial_dt(),
            dt_final: trace.dt_final,
            burn_in: ec.burn_in,
            modes,
            notes,
            config: &self.config,
        };
        write_json(&dir.file("decay.json"), &summary)?;
        println!(
            "{} after {} steps, t = {}",
            trace.termination.label(),
            trace.steps,
            real(summary.t_final)
        );
        if !trace.termination.is_completed() {
            return Err(Failure::new(
                exit::TERMINATED,
                format!("simulation stopped early: {:?}", trace.termination),
            ));
        }
        Ok(exit::OK)
    }
}

/// Largest deviation from the mean height grew over the run.
fn growth_observed(trace: &EvolutionTrace) -> bool {
    let deviation = |i: usize| {
        let p = &trace.profiles[i];
        let mean = p.mean();
        p.values().iter().fold(0.0f64, |m, v| m.max((v - mean).abs()))
    };
    let last = trace.profiles.len() - 1;
    let (start, end) = (deviation(0), deviation(last));
    end > start && end > NOISE_FLOOR
}

fn termination_output(t: &Termination) -> TerminationOutput {
    let label = t.label();
    match t {
        Termination::Completed => TerminationOutput {
            reason: label,
            t: None,
            detail: None,
        },
        Termination::PinchOff { t, min, mean } => TerminationOutput {
            reason: label,
            t: Some(*t),
            detail: Some(format!("min = {}, mean = {}", real(*min), real(*mean))),
        },
        Termination::StepCollapse { t, dt } => TerminationOutput {
            reason: label,
            t: Some(*t),
            detail: Some(format!("dt = {}", real(*dt))),
        },
        Termination::SolverFailure { t, message } => TerminationOutput {
            reason: label,
            t: Some(*t),
            detail: Some(message.clone()),
        },
    }
}
