//! Model densities: longitudinal submodels, cause-specific hazards,
//! cumulative hazards by Gauss-Kronrod quadrature, the three-branch joint
//! log-likelihood, and the log prior.
//!
//! The PSA submodel works on log2(PSA + 1) with 3-df Student-t residuals;
//! the core-ratio submodel (second variant only) is binomial with a
//! quadratic logit time trend. Each cause-specific log hazard is a
//! B-spline baseline plus log PSA density plus association terms on the
//! current PSA mean and its one-year backward change (the lagged mean uses
//! the spline's linear extrapolation below time zero, no clamping).
//!
//! The event branches of the survival log-likelihood:
//!
//! - censored: -H_prg(0, t_lower) - H_trt(0, t_upper)
//! - progression found at t_upper, last clean biopsy at t_lower:
//!   log of the integral over the detection interval of
//!   h_prg(s) exp{-H_prg(0, s) - H_trt(0, t_upper)} ds, one 15-point
//!   Gauss-Kronrod panel over the interval
//! - treatment at t_upper: log h_trt(t_upper) - H_prg(0, t_lower)
//!   - H_trt(0, t_upper)
//!
//! Cumulative hazards use 15-point Gauss-Kronrod with panel-per-year
//! subdivision beyond 2 years. [`PatientCache`] precomputes every spline
//! design row needed at observation times and quadrature nodes, so
//! repeated evaluation (MCMC sweeps) costs only dot products and exps.
//!
//! Everything here is pure; per-patient terms can be computed concurrently
//! and summed in a fixed order.

use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)] // redundant only when a dependency links std (e.g. test builds)
use num_traits::Float;

use crate::data::{EventKind, LongitudinalObservation, OutcomeKind, PatientRecord};
use crate::model::{
    Cause, ModelError, ModelParameters, ModelSpec, RandomEffects, Variant, AGE_CENTER,
};
use crate::quad;
use crate::stats;

/// Observation-scale transform for PSA: log2(value + 1).
pub fn psa_transform(value: f64) -> f64 {
    value.ln_1p() / core::f64::consts::LN_2
}

/// Inverse of [`psa_transform`], floored at zero.
pub fn psa_back_transform(y: f64) -> f64 {
    (Float::exp2(y) - 1.0).max(0.0)
}

// -------------------------------------------------------------- mean models

/// PSA mean coefficients for one (parameters, subject) pair, with the age
/// term folded into the intercept.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MeanCoefs {
    c0: f64,
    c: [f64; 3],
}

impl MeanCoefs {
    pub(crate) fn psa(params: &ModelParameters, u: &RandomEffects, age: f64) -> Self {
        MeanCoefs {
            c0: params.beta[0] + u[0] + params.beta[4] * (age - AGE_CENTER),
            c: [params.beta[1] + u[1], params.beta[2] + u[2], params.beta[3] + u[3]],
        }
    }

    #[inline]
    pub(crate) fn eval(&self, ncs_row: &[f64]) -> f64 {
        self.c0 + self.c[0] * ncs_row[0] + self.c[1] * ncs_row[1] + self.c[2] * ncs_row[2]
    }
}

/// Core-ratio logit coefficients (intercept, linear, quadratic in time).
#[inline]
pub(crate) fn cr_coefs(params: &ModelParameters, u: &RandomEffects) -> [f64; 3] {
    [params.beta[5] + u[4], params.beta[6] + u[5], params.beta[7] + u[6]]
}

/// Expected log2(PSA + 1) at time `t`.
pub fn mean_psa(
    spec: &ModelSpec,
    params: &ModelParameters,
    u: &RandomEffects,
    age: f64,
    t: f64,
) -> f64 {
    MeanCoefs::psa(params, u, age).eval(&spec.ncs().eval(t))
}

/// Logit of the expected core ratio at time `t` (second variant only).
pub fn mean_cr_logit(
    spec: &ModelSpec,
    params: &ModelParameters,
    u: &RandomEffects,
    t: f64,
) -> Result<f64, ModelError> {
    if spec.variant() != Variant::Icjm2 {
        return Err(ModelError::VariantMismatch);
    }
    let q = cr_coefs(params, u);
    Ok(q[0] + q[1] * t + q[2] * t * t)
}

// ------------------------------------------------------- observation models

/// Log density of one raw PSA observation given mean `m` on the transformed
/// scale and residual precision `tau_eps`.
pub fn loglik_psa_obs(
    obs: &LongitudinalObservation,
    m: f64,
    tau_eps: f64,
) -> Result<f64, ModelError> {
    if obs.outcome_kind != OutcomeKind::Psa {
        return Err(ModelError::Observation("expected a PSA observation"));
    }
    if !(tau_eps > 0.0) {
        return Err(ModelError::NotPositive { what: "tau_eps", value: tau_eps });
    }
    Ok(stats::student_t3_logpdf(psa_transform(obs.value) - m, tau_eps))
}

/// Log pmf of one core-ratio observation given the logit success
/// probability.
pub fn loglik_cr_obs(obs: &LongitudinalObservation, logit_p: f64) -> Result<f64, ModelError> {
    if obs.outcome_kind != OutcomeKind::CoreRatio {
        return Err(ModelError::Observation("expected a core-ratio observation"));
    }
    let trials = obs.trials.ok_or(ModelError::Observation("core-ratio trials missing"))?;
    let k = obs.value;
    if !(k >= 0.0 && k <= f64::from(trials) && k.fract() == 0.0) {
        return Err(ModelError::Observation("positive cores must be a whole number ≤ trials"));
    }
    Ok(stats::binomial_logit_logpmf(k as u32, trials, logit_p))
}

// ------------------------------------------------------------------ hazards

/// Everything needed to evaluate one cause's log hazard from cached design
/// rows: coefficient slices plus scalars folded per (params, subject).
pub(crate) struct HazardCoefs<'a> {
    gamma_h0: &'a [f64],
    offset: f64,
    a_value: f64,
    a_change: f64,
    a_cr: f64,
    mean: MeanCoefs,
    cr: [f64; 3],
    use_cr: bool,
}

impl<'a> HazardCoefs<'a> {
    pub(crate) fn new(
        params: &'a ModelParameters,
        u: &RandomEffects,
        age: f64,
        ln_density: f64,
        cause: Cause,
        use_cr: bool,
    ) -> Self {
        let k = cause.idx();
        HazardCoefs {
            gamma_h0: params.gamma_h0[k].as_slice(),
            offset: params.gamma_density[k] * ln_density,
            a_value: params.alpha_value[k],
            a_change: params.alpha_change[k],
            a_cr: params.alpha_cr[k],
            mean: MeanCoefs::psa(params, u, age),
            cr: if use_cr { cr_coefs(params, u) } else { [0.0; 3] },
            use_cr,
        }
    }

    /// Log hazard from precomputed design rows at one time point.
    #[inline]
    pub(crate) fn log_hazard_row(
        &self,
        h0_row: &[f64],
        ncs_row: &[f64],
        ncs_lag_row: &[f64],
        t: f64,
    ) -> f64 {
        let m = self.mean.eval(ncs_row);
        let m_lag = self.mean.eval(ncs_lag_row);
        let mut lh = dot(h0_row, self.gamma_h0)
            + self.offset
            + self.a_value * m
            + self.a_change * (m - m_lag);
        if self.use_cr {
            lh += self.a_cr * (self.cr[0] + self.cr[1] * t + self.cr[2] * t * t);
        }
        lh
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Log cause-specific hazard at time `t` for a subject with covariates
/// (age, psa_density) and random effects `u`.
pub fn log_hazard(
    spec: &ModelSpec,
    params: &ModelParameters,
    u: &RandomEffects,
    age: f64,
    psa_density: f64,
    cause: Cause,
    t: f64,
) -> f64 {
    let coefs = HazardCoefs::new(
        params,
        u,
        age,
        psa_density.ln(),
        cause,
        spec.variant() == Variant::Icjm2,
    );
    let h0_row = spec.h0_basis().eval(t);
    let ncs_row = spec.ncs().eval(t);
    let lag_row = spec.ncs().eval(t - 1.0);
    coefs.log_hazard_row(&h0_row, &ncs_row, &lag_row, t)
}

/// Cumulative cause-specific hazard over [a, b], 15-point Gauss-Kronrod
/// with panel-per-year subdivision beyond 2 years.
pub fn cumulative_hazard(
    spec: &ModelSpec,
    params: &ModelParameters,
    u: &RandomEffects,
    age: f64,
    psa_density: f64,
    cause: Cause,
    a: f64,
    b: f64,
) -> Result<f64, ModelError> {
    if !(0.0 <= a && a <= b) {
        return Err(ModelError::Interval { a, b });
    }
    Ok(quad::integrate_panels(
        |t| log_hazard(spec, params, u, age, psa_density, cause, t).exp(),
        a,
        b,
    ))
}

// ----------------------------------------------------------- patient cache

/// Quadrature node set with the design rows needed for hazard evaluation
/// cached at every node (row-major, n_h0 and 3 columns respectively).
struct QuadNodes {
    n: usize,
    n_h0: usize,
    w: Vec<f64>,
    t: Vec<f64>,
    h0: Vec<f64>,
    ncs: Vec<f64>,
    ncs_lag: Vec<f64>,
}

impl QuadNodes {
    fn empty(n_h0: usize) -> Self {
        QuadNodes {
            n: 0,
            n_h0,
            w: Vec::new(),
            t: Vec::new(),
            h0: Vec::new(),
            ncs: Vec::new(),
            ncs_lag: Vec::new(),
        }
    }

    fn push(&mut self, t: f64, w: f64, spec: &ModelSpec) {
        self.w.push(w);
        self.t.push(t);
        let start = self.h0.len();
        self.h0.resize(start + self.n_h0, 0.0);
        spec.h0_basis().eval_into(t, &mut self.h0[start..]);
        self.ncs.extend_from_slice(&spec.ncs().eval(t));
        self.ncs_lag.extend_from_slice(&spec.ncs().eval(t - 1.0));
        self.n += 1;
    }

    /// Nodes covering [a, b] with the panel-per-year rule.
    fn over_range(a: f64, b: f64, spec: &ModelSpec) -> Self {
        let mut qn = QuadNodes::empty(spec.n_h0());
        if b <= a {
            return qn;
        }
        let edges = quad::panel_edges(a, b, 2.0);
        for win in edges.windows(2) {
            for (t, w) in quad::nodes_weights(win[0], win[1]) {
                qn.push(t, w, spec);
            }
        }
        qn
    }

    /// One Gauss-Kronrod panel exactly over [a, b].
    fn single_panel(a: f64, b: f64, spec: &ModelSpec) -> Self {
        let mut qn = QuadNodes::empty(spec.n_h0());
        for (t, w) in quad::nodes_weights(a, b) {
            qn.push(t, w, spec);
        }
        qn
    }

    #[inline]
    fn log_hazard_at(&self, i: usize, coefs: &HazardCoefs) -> f64 {
        coefs.log_hazard_row(
            &self.h0[i * self.n_h0..(i + 1) * self.n_h0],
            &self.ncs[i * 3..i * 3 + 3],
            &self.ncs_lag[i * 3..i * 3 + 3],
            self.t[i],
        )
    }

    /// Integral of the hazard over the covered range.
    fn integrate(&self, coefs: &HazardCoefs) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n {
            total += self.w[i] * self.log_hazard_at(i, coefs).exp();
        }
        total
    }
}

/// Hazard quadrature over a fixed time range with all design rows cached at
/// construction, so repeated evaluation across parameter and random-effect
/// draws costs only dot products. This is the workhorse behind risk
/// prediction, where the same integration geometry is reused for hundreds of
/// posterior draws.
pub struct HazardNodes {
    nodes: QuadNodes,
    ln_density: f64,
    age: f64,
    use_cr: bool,
}

impl HazardNodes {
    /// Nodes covering [a, b] with the panel-per-year subdivision rule (the
    /// same rule as [`cumulative_hazard`]).
    pub fn over_range(
        spec: &ModelSpec,
        age: f64,
        psa_density: f64,
        a: f64,
        b: f64,
    ) -> Result<Self, ModelError> {
        if !(0.0 <= a && a <= b) || !psa_density.is_finite() || psa_density <= 0.0 {
            return Err(ModelError::Interval { a, b });
        }
        Ok(HazardNodes {
            nodes: QuadNodes::over_range(a, b, spec),
            ln_density: psa_density.ln(),
            age,
            use_cr: spec.variant() == Variant::Icjm2,
        })
    }

    /// One 15-point panel exactly over [a, b]; intended for short
    /// sub-segments where a single panel is already exact to roundoff.
    pub fn single_panel(
        spec: &ModelSpec,
        age: f64,
        psa_density: f64,
        a: f64,
        b: f64,
    ) -> Result<Self, ModelError> {
        if !(0.0 <= a && a <= b) || !psa_density.is_finite() || psa_density <= 0.0 {
            return Err(ModelError::Interval { a, b });
        }
        let nodes = if b > a {
            QuadNodes::single_panel(a, b, spec)
        } else {
            QuadNodes::empty(spec.n_h0())
        };
        Ok(HazardNodes { nodes, ln_density: psa_density.ln(), age, use_cr: spec.variant() == Variant::Icjm2 })
    }

    pub fn len(&self) -> usize {
        self.nodes.n
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.n == 0
    }

    pub fn time(&self, i: usize) -> f64 {
        self.nodes.t[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.nodes.w[i]
    }

    /// Integral of the cause-specific hazard over the covered range.
    pub fn integral(&self, params: &ModelParameters, u: &RandomEffects, cause: Cause) -> f64 {
        let coefs = HazardCoefs::new(params, u, self.age, self.ln_density, cause, self.use_cr);
        self.nodes.integrate(&coefs)
    }

    /// Cause-specific hazard evaluated at every node, appended to `out`.
    pub fn hazards_into(
        &self,
        params: &ModelParameters,
        u: &RandomEffects,
        cause: Cause,
        out: &mut Vec<f64>,
    ) {
        let coefs = HazardCoefs::new(params, u, self.age, self.ln_density, cause, self.use_cr);
        out.reserve(self.nodes.n);
        for i in 0..self.nodes.n {
            out.push(self.nodes.log_hazard_at(i, &coefs).exp());
        }
    }
}

fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Precomputed per-patient design rows at observation times and quadrature
/// nodes. Building one is pure spline work; evaluating likelihood terms
/// afterwards involves no spline evaluation at all.
///
/// Core-ratio observations are cached (and contribute) only under the
/// core-ratio variant; under the PSA-only variant they are ignored.
pub struct PatientCache {
    pub patient_id: String,
    pub delta: EventKind,
    pub t_lower: f64,
    pub t_upper: f64,
    pub age: f64,
    pub psa_density: f64,
    ln_density: f64,
    use_cr: bool,
    // Longitudinal rows.
    psa_y: Vec<f64>,
    psa_ncs: Vec<[f64; 3]>,
    cr_k: Vec<u32>,
    cr_n: Vec<u32>,
    cr_t: Vec<f64>,
    // Survival quadrature rows.
    base_lower: QuadNodes,
    base_upper: QuadNodes,
    outer: QuadNodes,
    inner: Vec<QuadNodes>,
}

impl PatientCache {
    pub fn new(patient: &PatientRecord, spec: &ModelSpec) -> Result<Self, ModelError> {
        let ev = &patient.event;
        let strict = ev.delta == EventKind::Progression;
        if ev.t_prg_minus < 0.0
            || ev.t_prg_minus > ev.t_upper
            || (strict && ev.t_prg_minus >= ev.t_upper)
        {
            return Err(ModelError::Interval { a: ev.t_prg_minus, b: ev.t_upper });
        }
        let use_cr = spec.variant() == Variant::Icjm2;

        let mut psa_y = Vec::new();
        let mut psa_ncs = Vec::new();
        let mut cr_k = Vec::new();
        let mut cr_n = Vec::new();
        let mut cr_t = Vec::new();
        for obs in &patient.longitudinal {
            match obs.outcome_kind {
                OutcomeKind::Psa => {
                    psa_y.push(psa_transform(obs.value));
                    psa_ncs.push(spec.ncs().eval(obs.time));
                }
                OutcomeKind::CoreRatio if use_cr => {
                    let trials =
                        obs.trials.ok_or(ModelError::Observation("core-ratio trials missing"))?;
                    if !(obs.value >= 0.0
                        && obs.value <= f64::from(trials)
                        && obs.value.fract() == 0.0)
                    {
                        return Err(ModelError::Observation(
                            "positive cores must be a whole number ≤ trials",
                        ));
                    }
                    cr_k.push(obs.value as u32);
                    cr_n.push(trials);
                    cr_t.push(obs.time);
                }
                OutcomeKind::CoreRatio => {}
            }
        }

        let base_lower = QuadNodes::over_range(0.0, ev.t_prg_minus, spec);
        let base_upper = QuadNodes::over_range(0.0, ev.t_upper, spec);
        let (outer, inner) = match ev.delta {
            EventKind::Progression => {
                let outer = QuadNodes::single_panel(ev.t_prg_minus, ev.t_upper, spec);
                // Increments of the cumulative hazard between consecutive
                // outer nodes; their running sum gives H(t_lower, s_j).
                let mut inner = Vec::with_capacity(outer.n);
                let mut prev = ev.t_prg_minus;
                for j in 0..outer.n {
                    inner.push(QuadNodes::over_range(prev, outer.t[j], spec));
                    prev = outer.t[j];
                }
                (outer, inner)
            }
            EventKind::Treatment => {
                // Single point row for the hazard factor at the event time.
                let mut point = QuadNodes::empty(spec.n_h0());
                point.push(ev.t_upper, 0.0, spec);
                (point, Vec::new())
            }
            EventKind::Censored => (QuadNodes::empty(spec.n_h0()), Vec::new()),
        };

        Ok(PatientCache {
            patient_id: patient.patient_id.clone(),
            delta: ev.delta,
            t_lower: ev.t_prg_minus,
            t_upper: ev.t_upper,
            age: patient.covariates.age,
            psa_density: patient.covariates.psa_density,
            ln_density: patient.covariates.psa_density.ln(),
            use_cr,
            psa_y,
            psa_ncs,
            cr_k,
            cr_n,
            cr_t,
            base_lower,
            base_upper,
            outer,
            inner,
        })
    }

    pub fn n_psa(&self) -> usize {
        self.psa_y.len()
    }

    pub fn n_cr(&self) -> usize {
        self.cr_k.len()
    }

    /// Summed positive cores and summed sampled cores over all core-ratio
    /// observations (for initialization).
    pub fn cr_totals(&self) -> (f64, f64) {
        let k: u32 = self.cr_k.iter().sum();
        let n: u32 = self.cr_n.iter().sum();
        (f64::from(k), f64::from(n))
    }

    /// Transformed PSA responses with their design rows (for least-squares
    /// initialization).
    pub fn psa_rows(&self) -> impl Iterator<Item = (f64, &[f64; 3])> {
        self.psa_y.iter().copied().zip(self.psa_ncs.iter())
    }

    /// Sum of longitudinal log densities for this patient.
    pub fn longitudinal_loglik(&self, params: &ModelParameters, u: &RandomEffects) -> f64 {
        let mean = MeanCoefs::psa(params, u, self.age);
        let mut ll = 0.0;
        for (i, row) in self.psa_ncs.iter().enumerate() {
            ll += stats::student_t3_logpdf(self.psa_y[i] - mean.eval(row), params.tau_eps);
        }
        if self.use_cr {
            let q = cr_coefs(params, u);
            for i in 0..self.cr_k.len() {
                let t = self.cr_t[i];
                let logit_p = q[0] + q[1] * t + q[2] * t * t;
                ll += stats::binomial_logit_logpmf(self.cr_k[i], self.cr_n[i], logit_p);
            }
        }
        ll
    }

    /// Unweighted Gram of the PSA random-effects design rows `[1, b(t)]`
    /// over this patient's PSA observation times (4 x 4). Scaled by the
    /// residual precision it approximates the likelihood curvature in the
    /// first four random effects, which samplers use to shape proposals.
    pub fn psa_effects_gram(&self) -> nalgebra::DMatrix<f64> {
        let mut g = nalgebra::DMatrix::zeros(4, 4);
        for b in &self.psa_ncs {
            let row = [1.0, b[0], b[1], b[2]];
            for a in 0..4 {
                for c in 0..4 {
                    g[(a, c)] += row[a] * row[c];
                }
            }
        }
        g
    }

    /// Trials-weighted Gram of the core-ratio effects rows `[1, t, t^2]`
    /// (3 x 3, weight = number of cores); `None` unless the core-ratio
    /// variant is active.
    pub fn cr_effects_gram(&self) -> Option<nalgebra::DMatrix<f64>> {
        if !self.use_cr {
            return None;
        }
        let mut g = nalgebra::DMatrix::zeros(3, 3);
        for (i, &t) in self.cr_t.iter().enumerate() {
            let row = [1.0, t, t * t];
            let n = f64::from(self.cr_n[i]);
            for a in 0..3 {
                for c in 0..3 {
                    g[(a, c)] += n * row[a] * row[c];
                }
            }
        }
        Some(g)
    }

    /// Event log-likelihood for this patient's branch.
    pub fn survival_loglik(&self, params: &ModelParameters, u: &RandomEffects) -> f64 {
        let prg =
            HazardCoefs::new(params, u, self.age, self.ln_density, Cause::Progression, self.use_cr);
        let trt =
            HazardCoefs::new(params, u, self.age, self.ln_density, Cause::Treatment, self.use_cr);
        let h_prg_lower = self.base_lower.integrate(&prg);
        match self.delta {
            EventKind::Censored => -h_prg_lower - self.base_upper.integrate(&trt),
            EventKind::Treatment => {
                self.outer.log_hazard_at(0, &trt) - h_prg_lower - self.base_upper.integrate(&trt)
            }
            EventKind::Progression => {
                let h_trt_upper = self.base_upper.integrate(&trt);
                let mut terms = [f64::NEG_INFINITY; quad::N_POINTS];
                let mut cum = 0.0;
                for j in 0..self.outer.n {
                    cum += self.inner[j].integrate(&prg);
                    terms[j] = self.outer.w[j].ln() + self.outer.log_hazard_at(j, &prg) - cum;
                }
                -h_prg_lower - h_trt_upper + logsumexp(&terms[..self.outer.n])
            }
        }
    }
}

// -------------------------------------------------------------- public ops

/// Event log-likelihood of one patient given parameters and their random
/// effects.
pub fn loglik_survival(
    patient: &PatientRecord,
    params: &ModelParameters,
    u: &RandomEffects,
    spec: &ModelSpec,
) -> Result<f64, ModelError> {
    Ok(PatientCache::new(patient, spec)?.survival_loglik(params, u))
}

/// Joint log-likelihood contribution of one patient: longitudinal +
/// survival + random-effects density.
pub fn loglik_joint(
    patient: &PatientRecord,
    params: &ModelParameters,
    u: &RandomEffects,
    spec: &ModelSpec,
) -> Result<f64, ModelError> {
    let cache = PatientCache::new(patient, spec)?;
    let chol = stats::cholesky(&params.omega).ok_or(ModelError::NotPositiveDefinite)?;
    Ok(cache.longitudinal_loglik(params, u)
        + cache.survival_loglik(params, u)
        + stats::mvn_logpdf_chol(u, &chol))
}

/// Log prior density of the full parameter vector (up to additive
/// constants that do not depend on any parameter). Out-of-support values
/// yield negative infinity instead of an error.
pub fn log_prior(params: &ModelParameters, spec: &ModelSpec) -> f64 {
    let pr = spec.priors();
    for tau in [params.tau_eps, params.tau_u, params.tau_h0[0], params.tau_h0[1]] {
        if !(tau > 0.0 && tau.is_finite()) {
            return f64::NEG_INFINITY;
        }
    }

    let mut lp = 0.0;
    for c in params.normal_prior_coefficients(spec.variant()) {
        lp += stats::normal_logpdf(c, 0.0, pr.normal_variance);
    }
    lp += stats::gamma_logpdf(params.tau_eps, pr.tau_eps_shape, pr.tau_eps_rate);

    let rho = spec.penalty().rank as f64;
    for k in 0..crate::model::N_CAUSES {
        let q = spec.penalty().quadratic_form(params.gamma_h0[k].as_slice());
        lp += 0.5 * rho * params.tau_h0[k].ln() - 0.5 * params.tau_h0[k] * q;
        lp += stats::gamma_logpdf(params.tau_h0[k], pr.tau_h0_shape, pr.tau_h0_rate);
    }

    let n_u = spec.n_u();
    let psi = nalgebra::DMatrix::<f64>::identity(n_u, n_u) * (pr.omega_scale / params.tau_u);
    match stats::inv_wishart_logpdf(&params.omega, spec.omega_prior_dof(), &psi) {
        Some(v) => lp += v,
        None => return f64::NEG_INFINITY,
    }
    lp += stats::gamma_logpdf(params.tau_u, pr.tau_u_shape, pr.tau_u_rate);
    lp
}
