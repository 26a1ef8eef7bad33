//! End-to-end parameter recovery: simulate a cohort from known values, fit
//! it, and check that posterior intervals land on the truth.

use icjm_core::mcmc::{fit, MCMCConfig};
use icjm_core::simulate::{simulate_dataset, SimulationParams};
use icjm_core::stats::quantile;
use icjm_core::ModelParameters;

fn interval(draws: &[ModelParameters], f: impl Fn(&ModelParameters) -> f64) -> (f64, f64, f64) {
    let vals: Vec<f64> = draws.iter().map(f).collect();
    (
        quantile(&vals, 0.025),
        icjm_core::stats::mean(&vals),
        quantile(&vals, 0.975),
    )
}

#[test]
fn posterior_intervals_cover_generating_values() {
    let sim = SimulationParams::generating();
    let (ds, _) = simulate_dataset(&sim, 100, 500);
    let cfg = MCMCConfig {
        n_iterations: 2000,
        n_burnin: 1000,
        thinning: 2,
        ..MCMCConfig::desk(614)
    };
    let out = fit(&ds, &sim.spec, &cfg).unwrap();
    let draws = out.samples.draws();
    assert_eq!(draws.len(), 3 * 500);

    // Tight checks on the well-identified longitudinal side.
    let named: &[(&str, fn(&ModelParameters) -> f64, f64)] = &[
        ("beta0", |p| p.beta[0], 2.34),
        ("beta1", |p| p.beta[1], 0.28),
        ("beta2", |p| p.beta[2], 0.61),
        ("beta3", |p| p.beta[3], 0.95),
        ("beta4", |p| p.beta[4], 0.02),
        ("tau_eps", |p| p.tau_eps, 47.40),
    ];
    for (name, f, truth) in named {
        let (lo, mean, hi) = interval(draws, f);
        assert!(
            (lo..=hi).contains(truth),
            "{name}: interval [{lo}, {hi}] (mean {mean}) misses {truth}"
        );
    }

    // Survival side: wider intervals at n = 100, but they must cover.
    let surv: &[(&str, fn(&ModelParameters) -> f64, f64)] = &[
        ("gamma_density_prg", |p| p.gamma_density[0], 0.50),
        ("alpha_value_prg", |p| p.alpha_value[0], 0.13),
        ("alpha_change_prg", |p| p.alpha_change[0], 3.01),
    ];
    for (name, f, truth) in surv {
        let (lo, mean, hi) = interval(draws, f);
        assert!(
            (lo..=hi).contains(truth),
            "{name}: interval [{lo}, {hi}] (mean {mean}) misses {truth}"
        );
    }

    // Mixing sanity on the retained third of the run.
    let finite_rhat: Vec<f64> = out
        .diagnostics
        .r_hat
        .iter()
        .map(|(_, r)| *r)
        .filter(|r| r.is_finite())
        .collect();
    assert!(!finite_rhat.is_empty());
    let worst = finite_rhat.iter().fold(0.0f64, |a, &b| a.max(b));
    assert!(worst < 1.35, "worst split R-hat {worst}");
}
