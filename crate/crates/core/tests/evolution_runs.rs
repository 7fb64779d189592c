use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tumorstrip_core::evolution::{
    evolve, explicit_dt_cap, step, volume, BoundaryFlow, EvolutionConfig, Stepper, Termination, TimeStep,
};
use tumorstrip_core::spectrum::lambda_k;
use tumorstrip_core::stationary::make_state;
use tumorstrip_core::{to_fourier, BoundaryProfile, Discretization, ModelParameters, PeriodicGrid, VerticalGrid};

fn reference_flow(n: usize) -> BoundaryFlow {
    let disc = Discretization::new(PeriodicGrid::new(n).unwrap(), VerticalGrid::new(n, 0.5).unwrap());
    BoundaryFlow::new(ModelParameters::reference(), disc).unwrap()
}

fn mode(kind_sin: bool, k: usize, x: f64) -> f64 {
    let kx = k as f64 * x;
    if kind_sin {
        kx.sin()
    } else {
        kx.cos()
    }
}

/// Coefficient of `cos kx` or `sin kx` in `(Ψ(ρ* + ε e_k) - Ψ(ρ*)) / ε`,
/// extrapolated twice in `ε`.
fn directional_multiplier(flow: &BoundaryFlow, rho: f64, k: usize, sin: bool) -> (f64, f64) {
    let grid = flow.discretization().grid_x();
    let base = flow.psi(&BoundaryProfile::flat(grid, rho).unwrap()).unwrap();
    let quotient = |eps: f64| {
        let moved = BoundaryProfile::from_fn(grid, |x| rho + eps * mode(sin, k, x)).unwrap();
        let psi = flow.psi(&moved).unwrap();
        let d: Vec<f64> = psi.iter().zip(&base).map(|(a, b)| (a - b) / eps).collect();
        let coeff = grid.nodes().iter().zip(&d).map(|(&x, v)| v * mode(sin, k, x)).sum::<f64>() * 2.0
            / grid.nx() as f64;
        let off_mode = grid
            .nodes()
            .iter()
            .zip(&d)
            .map(|(&x, v)| (v - coeff * mode(sin, k, x)).abs())
            .fold(0.0, f64::max);
        (coeff, off_mode)
    };
    let (d1, _) = quotient(1e-3);
    let (d2, _) = quotient(5e-4);
    let (d3, off) = quotient(2.5e-4);
    let (r1, r2) = (2.0 * d2 - d1, 2.0 * d3 - d2);
    ((4.0 * r2 - r1) / 3.0, off)
}

#[test]
fn linearization_at_the_flat_state_is_the_multiplier() {
    let st = make_state(&ModelParameters::reference()).unwrap();
    let flow = reference_flow(64);
    for k in 1..=4 {
        let lambda = lambda_k(&st, 1.0, k);
        for sin in [false, true] {
            let (estimate, off_mode) = directional_multiplier(&flow, st.rho_star, k, sin);
            assert!(((estimate - lambda) / lambda).abs() <= 0.01, "k = {k}, sin = {sin}: {estimate} vs {lambda}");
            // What is left outside the mode is the O(ε) nonlinearity.
            assert!(off_mode <= 1e-2 * lambda.max(1.0), "k = {k}: off-mode {off_mode:e}");
        }
    }
}

#[test]
fn discrete_equilibrium_is_a_fixed_point_of_both_schemes() {
    let flow = reference_flow(32);
    let grid = flow.discretization().grid_x();
    let rho_star = make_state(flow.params()).unwrap().rho_star;
    let h = flow.discrete_flat_equilibrium(rho_star).unwrap();
    assert!((h - rho_star).abs() < 2e-2);
    for (stepper, dt) in [(Stepper::Imex, 1e-3), (Stepper::Rk4, explicit_dt_cap(flow.params(), 32, h))] {
        let mut rho = BoundaryProfile::flat(grid, h).unwrap();
        for n in 0..100 {
            rho = step(&flow, stepper, &rho, n as f64 * dt, dt).unwrap().profile;
        }
        let drift = rho.values().iter().fold(0.0f64, |m, v| m.max((v - h).abs()));
        assert!(drift <= 1e-10, "{stepper}: drift {drift:e}");
    }
}

#[test]
fn one_rk4_step_contracts_the_first_mode() {
    let flow = reference_flow(64);
    let grid = flow.discretization().grid_x();
    let h = flow.discrete_flat_equilibrium(make_state(flow.params()).unwrap().rho_star).unwrap();
    // Discrete multiplier from a centered difference about the discrete
    // equilibrium.
    let psi_at = |e: f64| flow.psi(&BoundaryProfile::from_fn(grid, |x| h + e * x.cos()).unwrap()).unwrap();
    let (plus, minus) = (psi_at(1e-4), psi_at(-1e-4));
    let lambda_h = grid
        .nodes()
        .iter()
        .zip(plus.iter().zip(&minus))
        .map(|(x, (p, m))| (p - m) / 2e-4 * x.cos())
        .sum::<f64>()
        * 2.0
        / grid.nx() as f64;
    let eps = 1e-6;
    let dt = explicit_dt_cap(flow.params(), 64, h);
    let start = BoundaryProfile::from_fn(grid, |x| h + eps * x.cos()).unwrap();
    let next = step(&flow, Stepper::Rk4, &start, 0.0, dt).unwrap().profile;
    let contraction = to_fourier(&next).a(1) / eps;
    assert!((contraction - (-lambda_h * dt).exp()).abs() <= 1e-9);
}

#[test]
fn imex_converges_at_first_order_in_dt() {
    let p = ModelParameters::reference();
    let rho_star = make_state(&p).unwrap().rho_star;
    let grid = PeriodicGrid::new(32).unwrap();
    let initial = BoundaryProfile::from_fn(grid, |x| rho_star + 1e-2 * (2.0 * x).cos()).unwrap();
    let finals: Vec<BoundaryProfile> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| {
            let mut c = EvolutionConfig::new(p, initial.clone(), 0.2);
            c.ny = 32;
            c.dt = TimeStep::Fixed(dt);
            c.record_every = 1000;
            let trace = evolve(&c).unwrap();
            assert!(trace.termination.is_completed());
            trace.profiles.last().unwrap().clone()
        })
        .collect();
    let gap = |a: &BoundaryProfile, b: &BoundaryProfile| {
        a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    let ratio = gap(&finals[0], &finals[1]) / gap(&finals[1], &finals[2]);
    let order = ratio.log2();
    assert!((0.8..=1.2).contains(&order), "order {order}");
}

#[test]
fn perturbed_layer_relaxes_and_keeps_the_volume_balance() {
    let p = ModelParameters::reference();
    let st = make_state(&p).unwrap();
    let grid = PeriodicGrid::new(32).unwrap();
    let initial = BoundaryProfile::from_fn(grid, |x| st.rho_star + 1e-3 * x.cos()).unwrap();
    let mut c = EvolutionConfig::new(p, initial, 1.0);
    c.ny = 32;
    c.record_every = 20;
    c.tracked_modes = vec![1, 2, 3, 4];
    let trace = evolve(&c).unwrap();
    assert_eq!(trace.termination, Termination::Completed);
    assert!(trace.times.windows(2).all(|w| w[1] > w[0]));
    let deviation: Vec<f64> = trace
        .profiles
        .iter()
        .map(|r| {
            let m = r.mean();
            r.values().iter().fold(0.0f64, |a, v| a.max((v - m).abs()))
        })
        .collect();
    assert!(deviation.windows(2).all(|w| w[1] <= w[0]));
    let first = trace.mode(1).unwrap();
    for i in 1..trace.times.len() {
        if trace.times[i - 1] >= 0.1 {
            assert!(first.magnitude(i) <= first.magnitude(i - 1));
        }
    }
    let envelope = 10.0 * ((2.0 * PI / 32.0).powi(2) + 1e-3);
    assert!(trace.volume_residual.iter().all(|r| r.abs() <= envelope));
    assert!(trace.volume_residual.iter().all(|r| r.abs() <= 1e-8));
}

#[test]
fn unperturbed_layer_stays_flat() {
    let p = ModelParameters::reference();
    let rho_star = make_state(&p).unwrap().rho_star;
    let grid = PeriodicGrid::new(32).unwrap();
    let mut c = EvolutionConfig::new(p, BoundaryProfile::flat(grid, rho_star).unwrap(), 0.1);
    c.ny = 32;
    let trace = evolve(&c).unwrap();
    assert!(trace.termination.is_completed());
    for (hi, lo) in trace.max_rho.iter().zip(&trace.min_rho) {
        assert!(hi - lo <= 1e-12);
    }
    assert!(trace.mode(1).unwrap().cos.iter().all(|a| a.abs() < 1e-13));
    assert!(trace.volume_residual.iter().all(|r| r.abs() <= 1e-8));
}

#[test]
fn thin_neck_ends_the_run_with_a_pinch_off() {
    let p = ModelParameters::reference();
    let grid = PeriodicGrid::new(32).unwrap();
    let initial = BoundaryProfile::from_fn(grid, |x| 1.0 + (1.0 - 1e-8) * x.cos()).unwrap();
    let mut c = EvolutionConfig::new(p, initial, 1.0);
    c.ny = 32;
    let trace = evolve(&c).unwrap();
    assert!(matches!(trace.termination, Termination::PinchOff { t, .. } if t == 0.0));
    assert_eq!(trace.times, vec![0.0]);
}

#[test]
fn volume_is_exact_for_trigonometric_profiles() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid = PeriodicGrid::new(64).unwrap();
    for _ in 0..20 {
        let mean = rng.random_range(1.0..5.0);
        let coeffs: Vec<(f64, f64)> = (1..=10)
            .map(|_| (rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05)))
            .collect();
        let rho = BoundaryProfile::from_fn(grid, |x| {
            mean + coeffs
                .iter()
                .enumerate()
                .map(|(i, (a, b))| a * ((i + 1) as f64 * x).cos() + b * ((i + 1) as f64 * x).sin())
                .sum::<f64>()
        })
        .unwrap();
        let exact = 2.0 * PI * mean;
        assert!(((volume(&rho) - exact) / exact).abs() <= 1e-12);
    }
}

#[test]
fn invalid_configurations_are_errors() {
    let p = ModelParameters::reference();
    let grid = PeriodicGrid::new(16).unwrap();
    let flat = BoundaryProfile::flat(grid, 4.0).unwrap();
    let mut c = EvolutionConfig::new(p, flat.clone(), -1.0);
    assert!(evolve(&c).is_err());
    c = EvolutionConfig::new(p, flat.clone(), 1.0);
    c.tracked_modes = vec![0];
    assert!(evolve(&c).is_err());
    c = EvolutionConfig::new(p, flat, 1.0);
    c.dt = TimeStep::Fixed(0.0);
    assert!(evolve(&c).is_err());
}
