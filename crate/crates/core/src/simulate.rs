//! Synthetic active-surveillance cohorts drawn from the joint model.
//!
//! Patients get baseline covariates, random effects, an all-cause event time
//! by inverse-transform sampling of the total cumulative hazard, and a cause
//! picked from the cause-specific hazard shares at that time. Quarterly PSA
//! measurements (with small timing jitter and optional t-distributed noise)
//! and a jittered biopsy schedule (years 1 and 2, then biennial) turn the
//! latent event into the observed record: progression is interval-censored
//! between biopsies, treatment is observed exactly, and staggered
//! administrative censoring ends follow-up otherwise.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // redundant only when a dependency links std (e.g. test builds)
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StudentT};

use crate::data::{
    BaselineCovariates, Dataset, EventKind, EventRecord, LongitudinalObservation, OutcomeKind,
    PatientRecord,
};
use crate::likelihood::{cumulative_hazard, log_hazard, mean_psa, psa_back_transform};
use crate::model::{Cause, ModelError, ModelParameters, ModelSpec, RandomEffects, Variant};
use crate::rng::{stream, Domain};
use crate::spline::KnotVector;
use crate::stats;

/// Absolute tolerance on the inverted cumulative hazard at the solved event
/// time.
const ROOT_TOL: f64 = 1e-9;

/// Everything needed to generate a cohort.
#[derive(Debug, Clone)]
pub struct SimulationParams {
    pub spec: ModelSpec,
    pub params: ModelParameters,
    /// Baseline age: normal(mean, sd) truncated to `age_bounds`.
    pub age_mean: f64,
    pub age_sd: f64,
    pub age_bounds: (f64, f64),
    /// Baseline PSA density: log-normal matched to this natural-scale mean
    /// and standard deviation.
    pub density_mean: f64,
    pub density_sd: f64,
    /// Spacing of PSA measurements (years) and the half-width of their
    /// uniform timing jitter.
    pub psa_interval: f64,
    pub psa_jitter: f64,
    /// Half-width of the uniform jitter on biopsy times.
    pub biopsy_jitter: f64,
    /// Staggered administrative censoring: uniform over this window.
    pub censor_window: (f64, f64),
    /// Events solved for beyond this time are treated as never occurring.
    pub horizon: f64,
    /// Additive t-distributed residual noise on PSA (off reproduces the
    /// mean trajectory exactly).
    pub noise: bool,
}

impl SimulationParams {
    /// The built-in generating preset: posterior-mean parameters with the
    /// frozen generating knots and the observation scheme of the source
    /// cohort design.
    pub fn generating() -> Self {
        let ncs = KnotVector::new((0.0, 10.0), [1.5, 4.0].to_vec()).expect("valid knots");
        let h0 = KnotVector::new(
            (0.0, 12.0),
            [0.9, 1.4, 2.0, 2.7, 3.5, 4.4, 5.6, 7.5].to_vec(),
        )
        .expect("valid knots");
        let spec = ModelSpec::new(Variant::Icjm1, ncs, h0).expect("valid spec");

        let mut params = ModelParameters::baseline(&spec);
        params.beta = DVector::from_vec([2.34, 0.28, 0.61, 0.95, 0.02].to_vec());
        params.tau_eps = 47.40;
        params.omega = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.48, -0.04, -0.07, 0.02, //
                -0.04, 0.77, 0.46, -0.04, //
                -0.07, 0.46, 1.37, 1.36, //
                0.02, -0.04, 1.36, 2.54,
            ],
        );
        params.gamma_h0 = [
            DVector::from_vec(
                [
                    -6.78, -4.72, -2.84, -1.65, -1.54, -1.79, -1.85, -1.75, -1.85, -2.04,
                    -2.18, -2.32,
                ]
                .to_vec(),
            ),
            DVector::from_vec(
                [
                    -5.76, -4.99, -4.43, -4.26, -4.36, -4.47, -4.60, -4.69, -4.78, -4.92,
                    -5.08, -5.21,
                ]
                .to_vec(),
            ),
        ];
        params.gamma_density = [0.50, 0.23];
        params.alpha_value = [0.13, 0.42];
        params.alpha_change = [3.01, 2.62];
        params.tau_h0 = [10.0, 10.0];
        params.tau_u = 50.0;

        SimulationParams {
            spec,
            params,
            age_mean: 62.0,
            age_sd: 7.0,
            age_bounds: (45.0, 85.0),
            density_mean: 0.12,
            density_sd: 0.10,
            psa_interval: 0.25,
            psa_jitter: 2.0 / 52.0,
            biopsy_jitter: 1.0 / 12.0,
            censor_window: (3.0, 9.5),
            horizon: 12.0,
            noise: true,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.spec.validate_params(&self.params)
    }

    /// Scheduled biopsy times before jitter: years 1 and 2, then biennial
    /// out to the horizon.
    fn biopsy_grid(&self) -> Vec<f64> {
        let mut grid = [1.0, 2.0].to_vec();
        let mut t = 4.0;
        while t <= self.horizon + 1e-9 {
            grid.push(t);
            t += 2.0;
        }
        grid
    }
}

/// One generated patient: the observable record plus the latent truth.
#[derive(Debug, Clone)]
pub struct SimulatedPatient {
    pub record: PatientRecord,
    pub true_u: RandomEffects,
    /// Progression time; infinity when the latent event was not progression
    /// or lies beyond the horizon.
    pub true_t_prg: f64,
    /// Treatment-initiation time; infinity likewise.
    pub true_t_trt: f64,
    /// Cause of the latent event; `Censored` when none occurs in time.
    pub true_cause: EventKind,
}

/// Solves `H_total(0, t) = e` for `t` by accumulating year-long increments
/// and bisecting inside the bracketing segment. `None` when the total
/// hazard over `[0, horizon]` never reaches `e`.
pub(crate) fn solve_event_time(
    spec: &ModelSpec,
    params: &ModelParameters,
    u: &RandomEffects,
    covs: &BaselineCovariates,
    horizon: f64,
    e: f64,
) -> Option<f64> {
    let total = |a: f64, b: f64| -> f64 {
        let mut h = 0.0;
        for cause in Cause::ALL {
            h += cumulative_hazard(spec, params, u, covs.age, covs.psa_density, cause, a, b)
                .expect("valid integration range");
        }
        h
    };
    let mut cum = 0.0;
    let mut t = 0.0;
    while t < horizon {
        let next = (t + 1.0).min(horizon);
        let inc = total(t, next);
        if cum + inc >= e {
            // Bisection for the remainder within [t, next].
            let (mut lo, mut hi) = (t, next);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let f = cum + total(t, mid) - e;
                if f.abs() < ROOT_TOL || hi - lo < 1e-13 {
                    break;
                }
                if f < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            // The incremental accumulation and a single integral over
            // [0, t*] panelize differently, so they agree only to ~1e-8.
            // Newton steps against the single integral pin the root to the
            // evaluation every other consumer uses.
            let mut t_star = 0.5 * (lo + hi);
            for _ in 0..12 {
                let r = total(0.0, t_star) - e;
                if r.abs() < 1e-10 {
                    break;
                }
                let mut h = 0.0;
                for cause in Cause::ALL {
                    h += log_hazard(spec, params, u, covs.age, covs.psa_density, cause, t_star)
                        .exp();
                }
                t_star = (t_star - r / h.max(1e-12)).clamp(t, next);
            }
            return Some(t_star);
        }
        cum += inc;
        t = next;
    }
    None
}

/// Draws the latent event: all-cause time by inverse-transform sampling,
/// cause by the hazard share at that time. Events beyond the horizon come
/// back as infinities with no cause.
pub fn simulate_event_times<R: Rng>(
    sim: &SimulationParams,
    u: &RandomEffects,
    covs: &BaselineCovariates,
    rng: &mut R,
) -> (f64, f64, Option<Cause>) {
    let e: f64 = -(1.0 - rng.gen::<f64>()).ln();
    let Some(t) = solve_event_time(&sim.spec, &sim.params, u, covs, sim.horizon, e) else {
        return (f64::INFINITY, f64::INFINITY, None);
    };
    let h_prg = log_hazard(
        &sim.spec,
        &sim.params,
        u,
        covs.age,
        covs.psa_density,
        Cause::Progression,
        t,
    )
    .exp();
    let h_trt = log_hazard(
        &sim.spec,
        &sim.params,
        u,
        covs.age,
        covs.psa_density,
        Cause::Treatment,
        t,
    )
    .exp();
    if rng.gen::<f64>() < h_prg / (h_prg + h_trt) {
        (t, f64::INFINITY, Some(Cause::Progression))
    } else {
        (f64::INFINITY, t, Some(Cause::Treatment))
    }
}

/// Generates one patient. The stream is addressed by `(seed, index)`, so
/// patients are independent of generation order.
pub fn simulate_patient(sim: &SimulationParams, index: u64, seed: u64) -> SimulatedPatient {
    let mut rng = stream(seed, Domain::SimPatient, index, 0, 0);
    let patient_id = format!("p{index:05}");

    let age =
        stats::sample_truncated_normal(&mut rng, sim.age_mean, sim.age_sd, sim.age_bounds.0, sim.age_bounds.1);
    let (mu, sigma) = stats::lognormal_params(sim.density_mean, sim.density_sd);
    let psa_density = (mu + sigma * standard_normal(&mut rng)).exp();
    let covs = BaselineCovariates { age, psa_density };

    let omega_l = stats::cholesky(&sim.params.omega).expect("generating covariance PD").l();
    let u = stats::sample_mvn_chol(&mut rng, &omega_l);

    let (t_prg, t_trt, cause) = simulate_event_times(sim, &u, &covs, &mut rng);
    let censor = sim.censor_window.0
        + (sim.censor_window.1 - sim.censor_window.0) * rng.gen::<f64>();

    // Conducted biopsies: the jittered schedule, stopped at censoring, at
    // treatment, or at the first biopsy on/after a progression.
    let mut biopsies: Vec<f64> = Vec::new();
    for g in sim.biopsy_grid() {
        let jittered = (g + sim.biopsy_jitter * (2.0 * rng.gen::<f64>() - 1.0)).max(0.0);
        if jittered > censor || jittered > t_trt {
            break;
        }
        biopsies.push(jittered);
        if jittered >= t_prg {
            break; // progression detected; surveillance ends
        }
    }

    // Observed event record.
    let detection = biopsies.last().copied().filter(|&b| b >= t_prg);
    let event = if let Some(t_det) = detection {
        let last_clean =
            biopsies.iter().rev().find(|&&b| b < t_prg).copied().unwrap_or(0.0);
        EventRecord { delta: EventKind::Progression, t_prg_minus: last_clean, t_upper: t_det }
    } else if t_trt <= censor {
        let last_clean = biopsies.last().copied().unwrap_or(0.0);
        EventRecord { delta: EventKind::Treatment, t_prg_minus: last_clean, t_upper: t_trt }
    } else {
        let last_clean = biopsies.last().copied().unwrap_or(0.0);
        EventRecord { delta: EventKind::Censored, t_prg_minus: last_clean, t_upper: censor }
    };

    // Quarterly PSA up to the end of follow-up, jittered except at entry.
    let mut longitudinal = Vec::new();
    let noise_t3 = StudentT::new(3.0).expect("valid dof");
    let noise_scale = 1.0 / sim.params.tau_eps.sqrt();
    let mut k = 0u32;
    loop {
        let base = f64::from(k) * sim.psa_interval;
        if base > event.t_upper {
            break;
        }
        let t = if k == 0 {
            0.0
        } else {
            (base + sim.psa_jitter * (2.0 * rng.gen::<f64>() - 1.0)).clamp(0.0, event.t_upper)
        };
        let m = mean_psa(&sim.spec, &sim.params, &u, age, t);
        let y = if sim.noise { m + noise_scale * noise_t3.sample(&mut rng) } else { m };
        longitudinal.push(LongitudinalObservation {
            patient_id: patient_id.clone(),
            time: t,
            outcome_kind: OutcomeKind::Psa,
            value: psa_back_transform(y),
            trials: None,
        });
        k += 1;
    }

    SimulatedPatient {
        record: PatientRecord { patient_id, covariates: covs, longitudinal, event },
        true_u: u,
        true_t_prg: t_prg,
        true_t_trt: t_trt,
        true_cause: match cause {
            Some(Cause::Progression) => EventKind::Progression,
            Some(Cause::Treatment) => EventKind::Treatment,
            None => EventKind::Censored,
        },
    }
}

/// Latent truth retained alongside the observable dataset.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub patient_id: String,
    pub true_t_prg: f64,
    pub true_t_trt: f64,
    pub cause: EventKind,
    pub true_u: RandomEffects,
}

/// Generates `n` independent patients and splits them into the observable
/// dataset and the ground-truth table.
pub fn simulate_dataset(sim: &SimulationParams, n: usize, seed: u64) -> (Dataset, Vec<GroundTruth>) {
    let mut patients = Vec::with_capacity(n);
    let mut truths = Vec::with_capacity(n);
    for i in 0..n {
        let sp = simulate_patient(sim, i as u64, seed);
        truths.push(GroundTruth {
            patient_id: sp.record.patient_id.clone(),
            true_t_prg: sp.true_t_prg,
            true_t_trt: sp.true_t_trt,
            cause: sp.true_cause,
            true_u: sp.true_u,
        });
        patients.push(sp.record);
    }
    let ds = Dataset::new(patients, format!("simulated (n = {n}, seed = {seed})"));
    (ds, truths)
}

/// Shares of censoring, progression, and treatment among the observed
/// records (indexed like [`Dataset::delta_counts`]).
pub fn event_proportions(ds: &Dataset) -> [f64; 3] {
    let counts = ds.delta_counts();
    let total: usize = counts.iter().sum();
    let denom = (total.max(1)) as f64;
    [
        counts[0] as f64 / denom,
        counts[1] as f64 / denom,
        counts[2] as f64 / denom,
    ]
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use crate::likelihood::psa_transform;
    use proptest::prelude::*;

    /// Flat cause-specific hazards: log-baselines pinned at `ln(rate)` with
    /// every covariate and biomarker effect switched off, so event times are
    /// exponential with the summed rate.
    fn flat_hazard_params(rate_prg: f64, rate_trt: f64) -> SimulationParams {
        let mut sim = SimulationParams::generating();
        let n = sim.params.gamma_h0[0].len();
        sim.params.gamma_h0 = [
            DVector::from_element(n, rate_prg.ln()),
            DVector::from_element(n, rate_trt.ln()),
        ];
        sim.params.gamma_density = [0.0, 0.0];
        sim.params.alpha_value = [0.0, 0.0];
        sim.params.alpha_change = [0.0, 0.0];
        sim
    }

    fn typical_covs() -> BaselineCovariates {
        BaselineCovariates { age: 62.0, psa_density: 0.12 }
    }

    fn total_cumulative(sim: &SimulationParams, u: &RandomEffects, covs: &BaselineCovariates, t: f64) -> f64 {
        Cause::ALL
            .into_iter()
            .map(|c| {
                cumulative_hazard(&sim.spec, &sim.params, u, covs.age, covs.psa_density, c, 0.0, t)
                    .unwrap()
            })
            .sum()
    }

    #[test]
    fn generating_preset_is_valid() {
        let sim = SimulationParams::generating();
        sim.validate().unwrap();
        assert_eq!(sim.biopsy_grid(), alloc::vec![1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0]);
    }

    #[test]
    fn noise_free_psa_matches_mean_curve() {
        let mut sim = SimulationParams::generating();
        sim.noise = false;
        let sp = simulate_patient(&sim, 3, 99);
        assert!(!sp.record.longitudinal.is_empty());
        for obs in &sp.record.longitudinal {
            let m = mean_psa(&sim.spec, &sim.params, &sp.true_u, sp.record.covariates.age, obs.time);
            assert!(
                (psa_transform(obs.value) - m).abs() < 1e-12,
                "time {}: transformed {} vs mean {}",
                obs.time,
                psa_transform(obs.value),
                m
            );
        }
    }

    #[test]
    fn fixed_seed_reproduces_patient_exactly() {
        let sim = SimulationParams::generating();
        let a = simulate_patient(&sim, 7, 42);
        let b = simulate_patient(&sim, 7, 42);
        let ser = |p: &SimulatedPatient| {
            serde_json::to_string(&p.record).unwrap()
        };
        assert_eq!(ser(&a), ser(&b));
        assert_eq!(a.true_u, b.true_u);
        assert!(a.true_t_prg == b.true_t_prg || (a.true_t_prg.is_infinite() && b.true_t_prg.is_infinite()));
        assert!(a.true_t_trt == b.true_t_trt || (a.true_t_trt.is_infinite() && b.true_t_trt.is_infinite()));
    }

    #[test]
    fn truth_brackets_observed_record() {
        let sim = SimulationParams::generating();
        let (ds, truths) = simulate_dataset(&sim, 500, 11);
        ds.validate().unwrap();
        let mut n_prg = 0;
        let mut n_trt = 0;
        for (p, truth) in ds.patients.iter().zip(&truths) {
            assert_eq!(p.patient_id, truth.patient_id);
            assert!(!p.longitudinal.is_empty());
            assert_eq!(p.longitudinal[0].time, 0.0);
            match p.event.delta {
                EventKind::Progression => {
                    n_prg += 1;
                    assert_eq!(truth.cause, EventKind::Progression);
                    assert!(p.event.t_prg_minus < truth.true_t_prg);
                    assert!(truth.true_t_prg <= p.event.t_upper);
                }
                EventKind::Treatment => {
                    n_trt += 1;
                    assert_eq!(truth.cause, EventKind::Treatment);
                    assert_eq!(p.event.t_upper, truth.true_t_trt);
                    assert!(p.event.t_prg_minus <= p.event.t_upper);
                }
                EventKind::Censored => {
                    // Any latent progression was still undetected at the
                    // last clean biopsy.
                    assert!(truth.true_t_prg > p.event.t_prg_minus);
                }
            }
        }
        assert!(n_prg > 50, "expected a healthy share of progressors, got {n_prg}");
        assert!(n_trt > 10, "expected some treatment events, got {n_trt}");
    }

    #[test]
    fn jitterless_intervals_snap_to_biopsy_grid() {
        let mut sim = SimulationParams::generating();
        sim.biopsy_jitter = 0.0;
        let grid = sim.biopsy_grid();
        let (ds, truths) = simulate_dataset(&sim, 500, 5);
        let mut seen_2_4 = 0;
        for (p, truth) in ds.patients.iter().zip(&truths) {
            if p.event.delta != EventKind::Progression {
                continue;
            }
            let upper_pos = grid.iter().position(|&g| g == p.event.t_upper).expect("upper on grid");
            let expected_lower = if upper_pos == 0 { 0.0 } else { grid[upper_pos - 1] };
            assert_eq!(p.event.t_prg_minus, expected_lower);
            if truth.true_t_prg > 2.0 && truth.true_t_prg <= 4.0 && p.event.t_upper == 4.0 {
                assert_eq!(p.event.t_prg_minus, 2.0);
                seen_2_4 += 1;
            }
        }
        assert!(seen_2_4 >= 5, "expected several detections in (2, 4], got {seen_2_4}");
    }

    #[test]
    fn constant_hazards_recover_exponential_competing_risks() {
        let sim = flat_hazard_params(0.3, 0.1);
        let covs = typical_covs();
        let u = DVector::zeros(4);
        let mut rng = stream(17, Domain::SimPatient, 0, 0, 1);
        let n = 100_000;
        let mut times = Vec::new();
        let mut prg = 0usize;
        for _ in 0..n {
            let (tp, tt, cause) = simulate_event_times(&sim, &u, &covs, &mut rng);
            match cause {
                Some(Cause::Progression) => {
                    prg += 1;
                    times.push(tp);
                }
                Some(Cause::Treatment) => times.push(tt),
                None => {}
            }
        }
        let frac = prg as f64 / times.len() as f64;
        assert!((frac - 0.75).abs() <= 0.005, "cause share {frac}");

        // Times restricted to the horizon follow a truncated exponential
        // with the summed rate.
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rate = 0.4;
        let f12 = 1.0 - (-rate * 12.0).exp();
        let cdf = |t: f64| (1.0 - (-rate * t).exp()) / f12;
        let m = times.len() as f64;
        let mut ks: f64 = 0.0;
        for (i, &t) in times.iter().enumerate() {
            let f = cdf(t);
            ks = ks.max((f - i as f64 / m).abs()).max((f - (i as f64 + 1.0) / m).abs());
        }
        assert!(ks < 0.006, "KS distance {ks}");
    }

    #[test]
    fn zero_treatment_hazard_always_yields_progression() {
        let sim = flat_hazard_params(0.3, 1e-18);
        let covs = typical_covs();
        let u = DVector::zeros(4);
        let mut rng = stream(18, Domain::SimPatient, 0, 0, 1);
        for _ in 0..2000 {
            let (_, _, cause) = simulate_event_times(&sim, &u, &covs, &mut rng);
            if let Some(c) = cause {
                assert_eq!(c, Cause::Progression);
            }
        }
    }

    #[test]
    fn doubling_hazards_halves_event_times() {
        let covs = typical_covs();
        let u = DVector::zeros(4);
        let median_for = |rates: (f64, f64), seed: u64| -> f64 {
            let sim = flat_hazard_params(rates.0, rates.1);
            let mut rng = stream(seed, Domain::SimPatient, 0, 0, 1);
            let mut times: Vec<f64> = (0..20_000)
                .filter_map(|_| {
                    let (tp, tt, cause) = simulate_event_times(&sim, &u, &covs, &mut rng);
                    cause.map(|c| if c == Cause::Progression { tp } else { tt })
                })
                .collect();
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            times[times.len() / 2]
        };
        // Medians of exponentials truncated at the 12-year horizon.
        let trunc_median = |rate: f64| {
            let f12 = 1.0 - (-rate * 12.0f64).exp();
            -(1.0 - 0.5 * f12).ln() / rate
        };
        let slow = median_for((0.2, 0.1), 19);
        let fast = median_for((0.4, 0.2), 20);
        assert!((slow - trunc_median(0.3)).abs() < 0.06, "slow median {slow}");
        assert!((fast - trunc_median(0.6)).abs() < 0.03, "fast median {fast}");
        assert!((fast / slow - 0.52).abs() < 0.04, "ratio {}", fast / slow);
    }

    #[test]
    fn generating_cohort_matches_reference_event_mix() {
        let sim = SimulationParams::generating();
        let (ds, _) = simulate_dataset(&sim, 2000, 20260815);
        let p = event_proportions(&ds);
        let target = [0.6379, 0.2829, 0.0792];
        for (got, want) in p.iter().zip(target) {
            assert!(
                (got - want).abs() <= 0.05,
                "proportions {p:?} vs reference {target:?}"
            );
        }
    }

    #[test]
    fn single_patient_dataset_is_valid() {
        let sim = SimulationParams::generating();
        let (ds, truths) = simulate_dataset(&sim, 1, 3);
        ds.validate().unwrap();
        assert_eq!(truths.len(), 1);
        assert_eq!(truths[0].true_u.len(), 4);
    }

    #[test]
    fn solver_hits_target_cumulative_hazard() {
        let sim = SimulationParams::generating();
        let covs = typical_covs();
        let u = DVector::zeros(4);
        for e in [0.05, 0.2, 0.5, 1.0, 2.0, 4.0] {
            match solve_event_time(&sim.spec, &sim.params, &u, &covs, sim.horizon, e) {
                Some(t) => {
                    let h = total_cumulative(&sim, &u, &covs, t);
                    assert!((h - e).abs() < 1e-8, "e = {e}: H(0, {t}) = {h}");
                }
                None => {
                    // Only acceptable when the horizon total really is smaller.
                    let h = total_cumulative(&sim, &u, &covs, sim.horizon);
                    assert!(h < e, "solver gave up early: H(0, 12) = {h} ≥ {e}");
                }
            }
        }
        assert!(
            solve_event_time(&sim.spec, &sim.params, &u, &covs, sim.horizon, 1e6).is_none(),
            "unreachable target must report no event"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn any_simulated_patient_is_coherent(index in 0u64..5000, seed in 0u64..1000) {
            let sim = SimulationParams::generating();
            let sp = simulate_patient(&sim, index, seed);
            let ev = &sp.record.event;
            prop_assert!(ev.t_prg_minus >= 0.0);
            prop_assert!(ev.t_upper > 0.0 && ev.t_upper.is_finite());
            let times: Vec<f64> = sp.record.longitudinal.iter().map(|o| o.time).collect();
            prop_assert!(times.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(times.iter().all(|&t| (0.0..=ev.t_upper).contains(&t)));
            match ev.delta {
                EventKind::Progression => {
                    prop_assert!(sp.true_t_prg.is_finite());
                    prop_assert!(ev.t_prg_minus < sp.true_t_prg && sp.true_t_prg <= ev.t_upper);
                }
                EventKind::Treatment => {
                    prop_assert_eq!(sp.true_t_trt, ev.t_upper);
                }
                EventKind::Censored => {
                    prop_assert!(sp.true_t_prg > ev.t_prg_minus);
                }
            }
        }
    }
}
