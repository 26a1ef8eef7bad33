//! Dynamic individualized risk prediction.
//!
//! Given a fitted posterior and one patient's accumulated surveillance
//! history (biomarker measurements, last negative biopsy at `t_b`, still
//! treatment-free at the current visit `t_v`), this module produces
//! cumulative-incidence curves for progression over future time, averaged
//! over posterior parameter draws and, per draw, over the patient's
//! random effects sampled from their conditional distribution.
//!
//! Three conditioning regimes are provided:
//! - [`risk_full`]: progression may still be preceded by treatment after
//!   `t_v`, and the patient is known treatment-free up to `t_v`;
//! - [`risk_no_treatment`]: the treatment pathway is switched off entirely
//!   (pure progression process after `t_b`);
//! - [`risk_at_visit_biopsy`]: the special case of a biopsy performed at the
//!   current visit (`t_b == t_v`), conditioning on all-cause event-free
//!   survival to that visit.
//!
//! All curves live on the half-year clinical visit grid refined with
//! 15-point Gauss-Legendre panels, are zero at `t_b`, nondecreasing in the
//! prediction time, and bounded by one draw by draw.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{BaselineCovariates, EventKind, EventRecord, LongitudinalObservation, PatientRecord};
use crate::likelihood::{HazardNodes, PatientCache};
use crate::mcmc::{mh_accept, propose_walk, rm_adapt, AdaptiveScale, PosteriorSamples};
use crate::model::{Cause, ModelError, ModelParameters, ModelSpec, RandomEffects};
use crate::rng::{stream, Domain};
use crate::stats;

#[allow(unused_imports)]
use num_traits::Float;

/// Spacing of the clinical visit grid on which risk curves are reported.
pub const VISIT_STEP: f64 = 0.5;

/// Default number of posterior draws per curve.
pub const DEFAULT_DRAWS: usize = 400;

/// Default Metropolis-Hastings steps per random-effects draw.
pub const DEFAULT_MH_STEPS: u32 = 250;

/// Default adaptation steps at the start of each random-effects run.
pub const DEFAULT_MH_WARMUP: u32 = 50;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PredictError {
    #[error("context times must be finite and ordered: 0 <= t_b <= t_v, history times in [0, t_y]")]
    InvalidContext,
    #[error("baseline covariates must be finite with positive psa density")]
    InvalidCovariates,
    #[error("visit-time biopsy risk requires the last biopsy at the current visit (t_b == t_v)")]
    VisitMismatch,
    #[error("prediction horizon must not precede the conditioning time t_b")]
    EmptyHorizon,
    #[error("requested draw count must be positive")]
    InvalidConfig,
    #[error("random-effects target is not finite at the starting state")]
    NonFiniteTarget,
    #[error("random-effects covariance draw is not positive definite")]
    DegenerateCovariance,
    #[error("curve grid does not span the requested times")]
    GridSpan,
    #[error(transparent)]
    Model(#[from] ModelError),
}

// ---------------------------------------------------------------- context

/// One patient's accumulated information at prediction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionContext {
    /// Biomarker history up to the current visit (times in years from the
    /// start of surveillance, all at most `t_y`).
    pub history: Vec<LongitudinalObservation>,
    pub covariates: BaselineCovariates,
    /// Time of the last progression-free biopsy.
    pub t_b: f64,
    /// Current visit time; the patient is treatment-free up to here.
    pub t_v: f64,
    /// Time of the latest biomarker measurement.
    pub t_y: f64,
}

impl PredictionContext {
    pub fn validate(&self) -> Result<(), PredictError> {
        let ok_times = self.t_b.is_finite()
            && self.t_v.is_finite()
            && self.t_y.is_finite()
            && 0.0 <= self.t_b
            && self.t_b <= self.t_v
            && self.t_y >= 0.0;
        if !ok_times {
            return Err(PredictError::InvalidContext);
        }
        for obs in &self.history {
            if !(obs.time.is_finite() && 0.0 <= obs.time && obs.time <= self.t_y + 1e-9)
                || !obs.value.is_finite()
            {
                return Err(PredictError::InvalidContext);
            }
        }
        if !(self.covariates.age.is_finite()
            && self.covariates.psa_density.is_finite()
            && self.covariates.psa_density > 0.0)
        {
            return Err(PredictError::InvalidCovariates);
        }
        Ok(())
    }

    /// The patient's history packaged as a longitudinal-only record (the
    /// event fields are placeholders; only the biomarker rows are used).
    fn as_record(&self) -> PatientRecord {
        let t_end = self.t_y.max(self.t_v).max(self.t_b);
        PatientRecord {
            patient_id: String::from("prediction-subject"),
            covariates: self.covariates,
            longitudinal: self.history.clone(),
            event: EventRecord {
                delta: EventKind::Censored,
                t_prg_minus: t_end,
                t_upper: t_end,
            },
        }
    }
}

/// What a curve is conditioned on, carried alongside its values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditioning {
    /// Last progression-free biopsy time.
    pub t_b: f64,
    /// Treatment-free time, when the treatment pathway is part of the
    /// prediction; `None` for the no-treatment regime.
    pub t_v: Option<f64>,
    /// Latest biomarker time used.
    pub t_y: f64,
}

// ------------------------------------------------------------- risk curve

/// A posterior cumulative-incidence curve for progression.
///
/// `mean`, `lower`, and `upper` (pointwise 95% band) are averages and
/// percentiles over posterior draws; the per-draw curves are retained so
/// that conditional restatements ([`conditional_risk_from_curve`]) can be
/// formed draw by draw rather than from the posterior mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCurve {
    /// Prediction times, starting at the conditioning biopsy time.
    pub grid: Vec<f64>,
    /// Posterior mean risk at each grid time.
    pub mean: Vec<f64>,
    /// Pointwise 2.5% posterior quantile.
    pub lower: Vec<f64>,
    /// Pointwise 97.5% posterior quantile.
    pub upper: Vec<f64>,
    pub conditioning: Conditioning,
    /// Per-draw curves, row per posterior draw, column per grid time.
    draws: Vec<Vec<f64>>,
}

impl RiskCurve {
    pub fn n_draws(&self) -> usize {
        self.draws.len()
    }

    /// Per-draw curve values (row per posterior draw).
    pub fn draw_curves(&self) -> &[Vec<f64>] {
        &self.draws
    }

    /// Mean risk at `t`, linearly interpolated on the grid.
    pub fn value_at(&self, t: f64) -> Result<f64, PredictError> {
        interp(&self.grid, &self.mean, t)
    }

    fn summarize(
        grid: Vec<f64>,
        draws: Vec<Vec<f64>>,
        conditioning: Conditioning,
    ) -> RiskCurve {
        let n_g = grid.len();
        let mut mean = Vec::with_capacity(n_g);
        let mut lower = Vec::with_capacity(n_g);
        let mut upper = Vec::with_capacity(n_g);
        let mut column = Vec::with_capacity(draws.len());
        for g in 0..n_g {
            column.clear();
            column.extend(draws.iter().map(|d| d[g]));
            mean.push(stats::mean(&column));
            lower.push(stats::quantile(&column, 0.025));
            upper.push(stats::quantile(&column, 0.975));
        }
        RiskCurve { grid, mean, lower, upper, conditioning, draws }
    }
}

/// Linear interpolation of `values` over sorted `grid` at `t`.
fn interp(grid: &[f64], values: &[f64], t: f64) -> Result<f64, PredictError> {
    let n = grid.len();
    if n == 0 || t < grid[0] - 1e-9 || t > grid[n - 1] + 1e-9 {
        return Err(PredictError::GridSpan);
    }
    if t <= grid[0] {
        return Ok(values[0]);
    }
    if t >= grid[n - 1] {
        return Ok(values[n - 1]);
    }
    let hi = grid.partition_point(|&g| g < t).min(n - 1);
    let lo = hi - 1;
    let span = grid[hi] - grid[lo];
    if span <= 0.0 {
        return Ok(values[hi]);
    }
    let w = (t - grid[lo]) / span;
    Ok(values[lo] + w * (values[hi] - values[lo]))
}

/// One point of a risk curve with its credible band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskPoint {
    pub t_p: f64,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Monte Carlo settings for risk prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictConfig {
    /// Posterior draws per curve (evenly spaced over the pooled draws).
    pub n_draws: usize,
    /// Metropolis-Hastings steps per random-effects draw.
    pub n_mh: u32,
    /// Adaptation steps at the start of each random-effects run.
    pub warmup: u32,
    /// Base seed; every posterior draw gets an isolated substream.
    pub seed: u64,
}

impl PredictConfig {
    pub fn new(seed: u64) -> Self {
        PredictConfig {
            n_draws: DEFAULT_DRAWS,
            n_mh: DEFAULT_MH_STEPS,
            warmup: DEFAULT_MH_WARMUP,
            seed,
        }
    }
}

// ------------------------------------------------- random-effects sampling

/// The conditional (unnormalized) density of one patient's random effects:
/// biomarker likelihood of the history, the MVN prior, progression-free
/// survival to `t_b`, and (optionally) treatment-free survival to `t_v`.
struct EffectsTarget {
    cache: PatientCache,
    to_biopsy_prg: HazardNodes,
    to_visit_trt: Option<HazardNodes>,
    n_u: usize,
    /// Random-effects design rows at the PSA history times (intercept plus
    /// the three spline columns) with the matching centered responses'
    /// design for the fixed effects, used to shape proposals.
    psa_rows: Vec<[f64; 4]>,
    psa_y: Vec<f64>,
    psa_age_col: f64,
    /// Core-ratio rows (trials, [1, t, t^2]) under the core-ratio variant.
    cr_rows: Vec<(f64, [f64; 3])>,
}

impl EffectsTarget {
    fn new(
        ctx: &PredictionContext,
        spec: &ModelSpec,
        condition_on_tv: bool,
    ) -> Result<Self, PredictError> {
        ctx.validate()?;
        let record = ctx.as_record();
        let cache = PatientCache::new(&record, spec)?;
        let cov = &ctx.covariates;
        let to_biopsy_prg =
            HazardNodes::over_range(spec, cov.age, cov.psa_density, 0.0, ctx.t_b)?;
        let to_visit_trt = if condition_on_tv {
            Some(HazardNodes::over_range(spec, cov.age, cov.psa_density, 0.0, ctx.t_v)?)
        } else {
            None
        };
        let mut psa_rows = Vec::new();
        let mut psa_y = Vec::new();
        let mut cr_rows = Vec::new();
        for obs in &ctx.history {
            match obs.outcome_kind {
                crate::data::OutcomeKind::Psa => {
                    let b = spec.ncs().eval(obs.time);
                    psa_rows.push([1.0, b[0], b[1], b[2]]);
                    psa_y.push(crate::likelihood::psa_transform(obs.value));
                }
                crate::data::OutcomeKind::CoreRatio => {
                    if spec.variant() == crate::model::Variant::Icjm2 {
                        let n = obs.trials.unwrap_or(0) as f64;
                        cr_rows.push((n, [1.0, obs.time, obs.time * obs.time]));
                    }
                }
            }
        }
        Ok(EffectsTarget {
            cache,
            to_biopsy_prg,
            to_visit_trt,
            n_u: spec.n_u(),
            psa_rows,
            psa_y,
            psa_age_col: cov.age - crate::model::AGE_CENTER,
            cr_rows,
        })
    }

    /// Gaussian approximation to the conditional: precision
    /// `Omega^-1 + curvature of the biomarker likelihood` and the matching
    /// mean for the PSA block. Used only to shape proposals and pick the
    /// starting state; Metropolis-Hastings corrects the difference.
    fn gaussian_shape(
        &self,
        params: &ModelParameters,
        omega_chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    ) -> Result<(DVector<f64>, DMatrix<f64>), PredictError> {
        let mut prec = omega_chol.inverse();
        let mut rhs = DVector::zeros(self.n_u);
        // Student-t residuals with precision tau have log-density curvature
        // 4 tau / 3 at zero residual.
        let w = 4.0 * params.tau_eps / 3.0;
        for (row, &y) in self.psa_rows.iter().zip(&self.psa_y) {
            for a in 0..4 {
                for b in 0..4 {
                    prec[(a, b)] += w * row[a] * row[b];
                }
            }
            let fixed = params.beta[0]
                + params.beta[1] * row[1]
                + params.beta[2] * row[2]
                + params.beta[3] * row[3]
                + params.beta[4] * self.psa_age_col;
            let resid = y - fixed;
            for a in 0..4 {
                rhs[a] += w * row[a] * resid;
            }
        }
        // Binomial logit curvature is n p(1-p) <= n/4; the bound keeps the
        // proposal conservative without evaluating p.
        for (n, row) in &self.cr_rows {
            let w_cr = 0.25 * n;
            for a in 0..3 {
                for b in 0..3 {
                    prec[(4 + a, 4 + b)] += w_cr * row[a] * row[b];
                }
            }
        }
        let prec_chol =
            stats::cholesky(&prec).ok_or(PredictError::DegenerateCovariance)?;
        let start = prec_chol.solve(&rhs);
        let cov = prec_chol.inverse();
        Ok((start, cov))
    }

    fn log_density(
        &self,
        params: &ModelParameters,
        omega_chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
        u: &RandomEffects,
    ) -> f64 {
        let mut lp = self.cache.longitudinal_loglik(params, u)
            + stats::mvn_logpdf_chol(u, omega_chol)
            - self.to_biopsy_prg.integral(params, u, Cause::Progression);
        if let Some(trt) = &self.to_visit_trt {
            lp -= trt.integral(params, u, Cause::Treatment);
        }
        lp
    }

    /// Random-walk Metropolis targeting the conditional density: `n_mh`
    /// steps from the mean of a Gaussian approximation, proposals shaped by
    /// its covariance, Robbins-Monro scale adaptation during the first
    /// `warmup` steps, returning the final state.
    fn sample<R: Rng>(
        &self,
        rng: &mut R,
        params: &ModelParameters,
        n_mh: u32,
        warmup: u32,
    ) -> Result<RandomEffects, PredictError> {
        let omega_chol =
            stats::cholesky(&params.omega).ok_or(PredictError::DegenerateCovariance)?;
        let (start, shape_cov) = self.gaussian_shape(params, &omega_chol)?;
        let shape_l: DMatrix<f64> = stats::cholesky(&shape_cov)
            .ok_or(PredictError::DegenerateCovariance)?
            .l();
        let mut u = start;
        let mut lp = self.log_density(params, &omega_chol, &u);
        if !lp.is_finite() {
            return Err(PredictError::NonFiniteTarget);
        }
        let mut scale = AdaptiveScale::new(2.38 / (self.n_u as f64).sqrt());
        for step in 0..n_mh {
            let proposal = propose_walk(rng, &u, scale.scale(), Some(&shape_l));
            let lp_prop = self.log_density(params, &omega_chol, &proposal);
            let accepted = mh_accept(rng, lp_prop - lp);
            if accepted {
                u = proposal;
                lp = lp_prop;
            }
            if step < warmup {
                rm_adapt(&mut scale, accepted, 0.234, 1.0);
            }
        }
        Ok(u)
    }
}

/// Draw one patient's random effects conditional on their history and
/// event-free survival: progression-free to `ctx.t_b` always, and
/// additionally treatment-free to `ctx.t_v` when `condition_on_tv` is set.
///
/// Runs `n_mh` Metropolis-Hastings steps (Robbins-Monro adaptation over the
/// first `warmup`) and returns the final state. Errors if the target is not
/// finite at the origin.
pub fn sample_subject_effects(
    ctx: &PredictionContext,
    spec: &ModelSpec,
    draw: &ModelParameters,
    condition_on_tv: bool,
    n_mh: u32,
    warmup: u32,
    seed: u64,
) -> Result<RandomEffects, PredictError> {
    let target = EffectsTarget::new(ctx, spec, condition_on_tv)?;
    let mut rng = stream(seed, Domain::Effects, 0, 0, 0);
    target.sample(&mut rng, draw, n_mh, warmup)
}

// ------------------------------------------------------- curve integration

/// Which conditioning regime a curve is computed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    /// Progression risk accounting for the competing treatment pathway,
    /// given treatment-free survival to the current visit.
    Full,
    /// Progression risk with the treatment pathway removed.
    NoTreatment,
    /// Risk from a biopsy performed at the current visit (`t_b == t_v`).
    AtVisitBiopsy,
}

/// Precomputed integration geometry for one context and horizon: for each
/// half-year grid step, an outer 15-point panel, per outer node an inner
/// panel from the step start, and the step integral itself for the running
/// cumulative hazards. Building this is pure spline work; per-draw curve
/// evaluation afterwards is dot products only.
struct CurveEngine {
    grid: Vec<f64>,
    segments: Vec<Segment>,
    /// Treatment-free conditioning time (`None` for the no-treatment
    /// regime, where the treatment cause is ignored entirely).
    t_v: Option<f64>,
}

struct Segment {
    outer: HazardNodes,
    inner: Vec<HazardNodes>,
    step: HazardNodes,
}

impl CurveEngine {
    fn new(
        ctx: &PredictionContext,
        spec: &ModelSpec,
        t_v: Option<f64>,
        horizon: f64,
    ) -> Result<Self, PredictError> {
        let grid = visit_grid(ctx.t_b, t_v, horizon)?;
        let cov = &ctx.covariates;
        let mut segments = Vec::with_capacity(grid.len().saturating_sub(1));
        for win in grid.windows(2) {
            let (a, b) = (win[0], win[1]);
            let outer = HazardNodes::single_panel(spec, cov.age, cov.psa_density, a, b)?;
            let mut inner = Vec::with_capacity(outer.len());
            for j in 0..outer.len() {
                inner.push(HazardNodes::single_panel(
                    spec,
                    cov.age,
                    cov.psa_density,
                    a,
                    outer.time(j),
                )?);
            }
            let step = HazardNodes::single_panel(spec, cov.age, cov.psa_density, a, b)?;
            segments.push(Segment { outer, inner, step });
        }
        Ok(CurveEngine { grid, segments, t_v })
    }

    /// Risk at every grid time for one (parameters, random effects) draw.
    ///
    /// Written in the conditioned form: with `A_P(t) = H_PRG(t_b, t)` and
    /// `A_T(t) = H_TRT(t_v, t)`, the risk at `t_p` is
    /// `∫_{t_b}^{t_p} h_PRG(s) exp(-A_P(s) - A_T(max(s, t_v))) ds`,
    /// which equals the ratio of the event integral to the survival factor
    /// at the conditioning times while never forming either exponential.
    fn eval_draw(&self, params: &ModelParameters, u: &RandomEffects) -> Vec<f64> {
        let mut risks = Vec::with_capacity(self.grid.len());
        risks.push(0.0);
        let mut acc = 0.0;
        // Running cumulative hazards from the conditioning times.
        let mut a_p = 0.0;
        let mut a_t = 0.0;
        let mut hazards = Vec::new();
        for (i, seg) in self.segments.iter().enumerate() {
            let start = self.grid[i];
            // Whether this whole segment lies beyond the treatment-free
            // time (the grid contains t_v, so segments never straddle it).
            let past_tv = match self.t_v {
                Some(tv) => start >= tv,
                None => false,
            };
            hazards.clear();
            seg.outer.hazards_into(params, u, Cause::Progression, &mut hazards);
            for j in 0..seg.outer.len() {
                let mut exponent = a_p + seg.inner[j].integral(params, u, Cause::Progression);
                if past_tv {
                    exponent += a_t + seg.inner[j].integral(params, u, Cause::Treatment);
                }
                acc += seg.outer.weight(j) * hazards[j] * (-exponent).exp();
            }
            a_p += seg.step.integral(params, u, Cause::Progression);
            if past_tv {
                a_t += seg.step.integral(params, u, Cause::Treatment);
            }
            risks.push(acc.min(1.0));
        }
        // Quadrature noise aside, increments are nonnegative; enforce the
        // monotone clamp so downstream consumers can rely on it exactly.
        for i in 1..risks.len() {
            if risks[i] < risks[i - 1] {
                risks[i] = risks[i - 1];
            }
        }
        risks
    }
}

/// The prediction grid: `t_b`, every half-year mark after it, the
/// treatment-free time when it falls inside, and the horizon.
fn visit_grid(t_b: f64, t_v: Option<f64>, horizon: f64) -> Result<Vec<f64>, PredictError> {
    if !(horizon.is_finite() && horizon >= t_b) {
        return Err(PredictError::EmptyHorizon);
    }
    let mut grid = Vec::new();
    grid.push(t_b);
    if let Some(tv) = t_v {
        if tv > t_b + 1e-12 && tv < horizon - 1e-12 {
            grid.push(tv);
        }
    }
    let mut k = (t_b / VISIT_STEP).floor() as i64 + 1;
    loop {
        let mark = VISIT_STEP * k as f64;
        if mark >= horizon - 1e-12 {
            break;
        }
        if mark > t_b + 1e-12 {
            grid.push(mark);
        }
        k += 1;
    }
    if horizon > t_b {
        grid.push(horizon);
    }
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid times"));
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    Ok(grid)
}

/// Compute a risk curve out to `horizon` under the requested regime.
///
/// Posterior draws are taken evenly spaced over the pooled chains; each
/// draw gets one random-effects draw from an isolated seeded substream, so
/// results are independent of evaluation order.
pub fn risk_curve(
    ctx: &PredictionContext,
    posterior: &PosteriorSamples,
    kind: CurveKind,
    horizon: f64,
    cfg: &PredictConfig,
) -> Result<RiskCurve, PredictError> {
    ctx.validate()?;
    if cfg.n_draws == 0 {
        return Err(PredictError::InvalidConfig);
    }
    if kind == CurveKind::AtVisitBiopsy && (ctx.t_v - ctx.t_b).abs() > 1e-12 {
        return Err(PredictError::VisitMismatch);
    }
    let spec = posterior.spec();
    let (t_v, condition_on_tv) = match kind {
        CurveKind::Full | CurveKind::AtVisitBiopsy => (Some(ctx.t_v), true),
        CurveKind::NoTreatment => (None, false),
    };
    let engine = CurveEngine::new(ctx, spec, t_v, horizon)?;
    let target = EffectsTarget::new(ctx, spec, condition_on_tv)?;
    let draws = posterior.evenly_spaced(cfg.n_draws);
    let mut draw_curves = Vec::with_capacity(draws.len());
    for (j, params) in draws.iter().enumerate() {
        let mut rng = stream(cfg.seed, Domain::Predict, j as u64, 0, 0);
        let u = target.sample(&mut rng, params, cfg.n_mh, cfg.warmup)?;
        draw_curves.push(engine.eval_draw(params, &u));
    }
    let conditioning = Conditioning { t_b: ctx.t_b, t_v, t_y: ctx.t_y };
    Ok(RiskCurve::summarize(engine.grid, draw_curves, conditioning))
}

fn last_point(curve: &RiskCurve, t_p: f64) -> RiskPoint {
    let g = curve.grid.len() - 1;
    RiskPoint { t_p, mean: curve.mean[g], lower: curve.lower[g], upper: curve.upper[g] }
}

/// Progression risk by `t_p` with the competing treatment pathway, given
/// progression-free survival to `t_b` and treatment-free survival to `t_v`.
pub fn risk_full(
    ctx: &PredictionContext,
    t_p: f64,
    posterior: &PosteriorSamples,
    cfg: &PredictConfig,
) -> Result<RiskPoint, PredictError> {
    Ok(last_point(&risk_curve(ctx, posterior, CurveKind::Full, t_p, cfg)?, t_p))
}

/// Progression risk by `t_p` with the treatment pathway removed; the random
/// effects are drawn without conditioning on treatment-free survival.
pub fn risk_no_treatment(
    ctx: &PredictionContext,
    t_p: f64,
    posterior: &PosteriorSamples,
    cfg: &PredictConfig,
) -> Result<RiskPoint, PredictError> {
    Ok(last_point(&risk_curve(ctx, posterior, CurveKind::NoTreatment, t_p, cfg)?, t_p))
}

/// Progression risk by `t_p` from a biopsy performed at the current visit
/// (`t_b == t_v`), conditioning on all-cause event-free survival to it.
pub fn risk_at_visit_biopsy(
    ctx: &PredictionContext,
    t_p: f64,
    posterior: &PosteriorSamples,
    cfg: &PredictConfig,
) -> Result<RiskPoint, PredictError> {
    Ok(last_point(&risk_curve(ctx, posterior, CurveKind::AtVisitBiopsy, t_p, cfg)?, t_p))
}

/// Restate a curve as risk conditional on remaining event-free to a later
/// tentative biopsy time `t_b_new`: per posterior draw,
/// `(pi(t_e) - pi(t_b_new)) / (1 - pi(t_b_new))`, then averaged.
///
/// Both times must lie on (or be interpolable from) the curve grid; errors
/// when the grid does not span them or the ordering
/// `t_b <= t_b_new < t_e` fails.
pub fn conditional_risk_from_curve(
    curve: &RiskCurve,
    t_b_new: f64,
    t_e: f64,
) -> Result<f64, PredictError> {
    if !(curve.conditioning.t_b <= t_b_new + 1e-12 && t_b_new < t_e) {
        return Err(PredictError::InvalidContext);
    }
    if curve.draws.is_empty() {
        return Err(PredictError::InvalidConfig);
    }
    let mut total = 0.0;
    for draw in &curve.draws {
        let pi_b = interp(&curve.grid, draw, t_b_new)?;
        let pi_e = interp(&curve.grid, draw, t_e)?;
        let denom = (1.0 - pi_b).max(f64::MIN_POSITIVE);
        total += ((pi_e - pi_b) / denom).clamp(0.0, 1.0);
    }
    Ok(total / curve.draws.len() as f64)
}

// ------------------------------------------------------------------- tests
