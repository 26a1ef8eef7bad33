//! Adaptive Metropolis-within-Gibbs estimation of the joint model.
//!
//! Each sweep updates, in order: the fixed-effect blocks, the per-cause
//! association block (log-density coefficient plus biomarker associations),
//! the per-cause baseline log-hazard coefficients, the residual precision on
//! the log scale, every subject's random effects, and finally the conjugate
//! draws — a recentering move that resamples the split between fixed
//! coefficients and subject effects along their shared translation orbit,
//! the smoothing precisions, the random-effects covariance, and its scale
//! hyperparameter. Random-walk proposals are tuned by Robbins-Monro
//! adaptation toward fixed acceptance targets during burn-in (frozen
//! afterwards), with empirical-covariance shaping for multi-dimensional
//! blocks.
//!
//! All randomness comes from counter-based streams keyed by
//! `(chain, sweep, block)` or `(chain, sweep, subject)`, so chains — and the
//! conditionally independent subject updates inside a sweep — can run
//! concurrently or in any order with bitwise-identical results.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
#[allow(unused_imports)] // redundant only when a dependency links std (e.g. test builds)
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaDist, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, EventKind, OutcomeKind};
use crate::likelihood::{log_prior, PatientCache};
use crate::model::{
    Cause, ModelError, ModelParameters, ModelSpec, PriorConstants, RandomEffects, Variant,
    AGE_CENTER,
};
use crate::rng::{stream, Domain};
use crate::spline::PenaltyMatrix;
use crate::stats;

/// Consecutive fully-rejected sweeps after which a chain is declared
/// divergent.
const DIVERGENCE_WINDOW: u32 = 100;

/// Stream index (third address component) reserved for the conjugate draws
/// at the end of a sweep; parameter blocks use their block index.
const CONJUGATE_STREAM: u64 = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum McmcError {
    #[error("invalid sampler configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("log-posterior not finite at initialization of chain {chain}")]
    NonFiniteInit { chain: u32 },
    #[error("chain {chain} divergent: no proposal accepted in sweeps {from}..={to}")]
    Divergent { chain: u32, from: u32, to: u32 },
    #[error("convergence diagnostics need at least two chains")]
    SingleChain,
    #[error("chains must have equal length of at least four for diagnostics")]
    ChainLength,
    #[error("conditional scale matrix is singular")]
    SingularScale,
}

// ------------------------------------------------------------ configuration

/// Sampler run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCMCConfig {
    /// Total sweeps per chain, including burn-in.
    pub n_iterations: u32,
    /// Leading sweeps discarded (and used for proposal adaptation).
    pub n_burnin: u32,
    /// Keep every `thinning`-th post-burn-in sweep.
    pub thinning: u32,
    pub n_chains: u32,
    pub seed: u64,
    /// Acceptance target for one-dimensional random-walk blocks.
    pub target_scalar: f64,
    /// Acceptance target for multi-dimensional random-walk blocks.
    pub target_vector: f64,
    /// Decay exponent of the Robbins-Monro step size (1 = classic 1/step).
    pub rm_exponent: f64,
}

impl MCMCConfig {
    /// Desk-scale default: 3 chains of 4000 sweeps, half burn-in, thin 2.
    pub fn desk(seed: u64) -> Self {
        MCMCConfig {
            n_iterations: 4000,
            n_burnin: 2000,
            thinning: 2,
            n_chains: 3,
            seed,
            target_scalar: 0.44,
            target_vector: 0.234,
            rm_exponent: 1.0,
        }
    }

    /// Heavier reference configuration: 3 chains of 10000 sweeps, thin 10.
    pub fn reference(seed: u64) -> Self {
        MCMCConfig { n_iterations: 10_000, n_burnin: 5_000, thinning: 10, ..Self::desk(seed) }
    }

    pub fn validate(&self) -> Result<(), McmcError> {
        if self.n_iterations <= self.n_burnin {
            return Err(McmcError::Config("n_iterations must exceed n_burnin"));
        }
        if self.thinning < 1 {
            return Err(McmcError::Config("thinning must be at least 1"));
        }
        if (self.n_iterations - self.n_burnin) % self.thinning != 0 {
            return Err(McmcError::Config("retained span must be a multiple of thinning"));
        }
        if self.n_chains < 1 {
            return Err(McmcError::Config("need at least one chain"));
        }
        for t in [self.target_scalar, self.target_vector] {
            if !(t > 0.0 && t < 1.0) {
                return Err(McmcError::Config("acceptance targets must lie in (0,1)"));
            }
        }
        if !(self.rm_exponent > 0.0) {
            return Err(McmcError::Config("rm_exponent must be positive"));
        }
        Ok(())
    }

    /// Retained draws per chain.
    pub fn draws_per_chain(&self) -> u32 {
        (self.n_iterations - self.n_burnin) / self.thinning
    }
}

// --------------------------------------------------------------- adaptation

/// Robbins-Monro-adapted proposal scale (stored on the log scale, so the
/// scale itself is always positive).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaptiveScale {
    log_scale: f64,
    step: u64,
}

impl AdaptiveScale {
    pub fn new(initial_scale: f64) -> Self {
        debug_assert!(initial_scale > 0.0);
        AdaptiveScale { log_scale: initial_scale.ln(), step: 0 }
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One Robbins-Monro update of a proposal scale: the log scale moves by
/// `c / step^exponent * (accepted - target)` with `c = 1/(target(1-target))`,
/// so the expected drift vanishes exactly when the acceptance rate sits at
/// the target and perturbations decay like `1/step` for `exponent = 1`.
pub fn rm_adapt(scale: &mut AdaptiveScale, accepted: bool, target: f64, exponent: f64) {
    debug_assert!(target > 0.0 && target < 1.0);
    scale.step += 1;
    let c = 1.0 / (target * (1.0 - target));
    let gain = c / (scale.step as f64).powf(exponent);
    let a = if accepted { 1.0 } else { 0.0 };
    scale.log_scale += gain * (a - target);
}

/// Streaming mean/covariance of block samples (Welford), used to shape
/// multi-dimensional proposals after enough history has accumulated.
#[derive(Debug, Clone)]
struct RunningCov {
    n: f64,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
}

impl RunningCov {
    fn new(dim: usize) -> Self {
        RunningCov { n: 0.0, mean: DVector::zeros(dim), scatter: DMatrix::zeros(dim, dim) }
    }

    fn update(&mut self, x: &DVector<f64>) {
        self.n += 1.0;
        let delta = x - &self.mean;
        self.mean += &delta / self.n;
        let delta2 = x - &self.mean;
        self.scatter += delta * delta2.transpose();
    }

    fn covariance(&self) -> Option<DMatrix<f64>> {
        if self.n < 2.0 {
            None
        } else {
            Some(&self.scatter / (self.n - 1.0))
        }
    }
}

/// Random-walk proposal: `current + scale * L * z` with standard-normal `z`
/// and an optional lower-triangular shaping factor `L` (identity without).
pub(crate) fn propose_walk<R: Rng>(
    rng: &mut R,
    current: &DVector<f64>,
    scale: f64,
    shape_l: Option<&DMatrix<f64>>,
) -> DVector<f64> {
    let z = DVector::from_fn(current.len(), |_, _| StandardNormal.sample(rng));
    match shape_l {
        Some(l) => current + l * z * scale,
        None => current + z * scale,
    }
}

/// Metropolis accept/reject on a log-density difference. Non-finite
/// candidates are always rejected.
pub(crate) fn mh_accept<R: Rng>(rng: &mut R, log_ratio: f64) -> bool {
    if !log_ratio.is_finite() {
        return log_ratio == f64::INFINITY;
    }
    log_ratio >= 0.0 || rng.gen::<f64>().ln() < log_ratio
}

// ------------------------------------------------------------ laying blocks

/// A jointly-proposed slice of the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockKind {
    /// PSA fixed effects: intercept, three spline slopes, age slope.
    BetaPsa,
    /// Core-ratio fixed effects (quadratic time trend).
    BetaCr,
    /// One cause's density coefficient and biomarker associations.
    Assoc(Cause),
    /// One cause's baseline log-hazard coefficients.
    Baseline(Cause),
    /// log tau_eps random walk.
    LogTauEps,
}

impl BlockKind {
    fn name(self) -> &'static str {
        match self {
            BlockKind::BetaPsa => "beta_psa",
            BlockKind::BetaCr => "beta_cr",
            BlockKind::Assoc(Cause::Progression) => "assoc_prg",
            BlockKind::Assoc(Cause::Treatment) => "assoc_trt",
            BlockKind::Baseline(Cause::Progression) => "baseline_prg",
            BlockKind::Baseline(Cause::Treatment) => "baseline_trt",
            BlockKind::LogTauEps => "tau_eps",
        }
    }

    fn dim(self, spec: &ModelSpec) -> usize {
        match self {
            BlockKind::BetaPsa => 5,
            BlockKind::BetaCr => 3,
            BlockKind::Assoc(_) => {
                if spec.variant() == Variant::Icjm2 {
                    4
                } else {
                    3
                }
            }
            BlockKind::Baseline(_) => spec.n_h0(),
            BlockKind::LogTauEps => 1,
        }
    }

    /// Which per-subject likelihood pieces this block can change:
    /// (longitudinal, survival).
    fn touches(self) -> (bool, bool) {
        match self {
            // The PSA mean enters both the longitudinal density and the
            // hazard; same for the core-ratio mean under the CR variant.
            BlockKind::BetaPsa | BlockKind::BetaCr => (true, true),
            BlockKind::Assoc(_) | BlockKind::Baseline(_) => (false, true),
            BlockKind::LogTauEps => (true, false),
        }
    }

    fn get(self, params: &ModelParameters, spec: &ModelSpec) -> DVector<f64> {
        match self {
            BlockKind::BetaPsa => params.beta.rows(0, 5).into_owned(),
            BlockKind::BetaCr => params.beta.rows(5, 3).into_owned(),
            BlockKind::Assoc(cause) => {
                let k = cause.idx();
                let mut v = vec![
                    params.gamma_density[k],
                    params.alpha_value[k],
                    params.alpha_change[k],
                ];
                if spec.variant() == Variant::Icjm2 {
                    v.push(params.alpha_cr[k]);
                }
                DVector::from_vec(v)
            }
            BlockKind::Baseline(cause) => params.gamma_h0[cause.idx()].clone(),
            BlockKind::LogTauEps => DVector::from_element(1, params.tau_eps.ln()),
        }
    }

    fn set(self, params: &mut ModelParameters, spec: &ModelSpec, v: &DVector<f64>) {
        match self {
            BlockKind::BetaPsa => params.beta.rows_mut(0, 5).copy_from(v),
            BlockKind::BetaCr => params.beta.rows_mut(5, 3).copy_from(v),
            BlockKind::Assoc(cause) => {
                let k = cause.idx();
                params.gamma_density[k] = v[0];
                params.alpha_value[k] = v[1];
                params.alpha_change[k] = v[2];
                if spec.variant() == Variant::Icjm2 {
                    params.alpha_cr[k] = v[3];
                }
            }
            BlockKind::Baseline(cause) => params.gamma_h0[cause.idx()].copy_from(v),
            BlockKind::LogTauEps => params.tau_eps = v[0].exp(),
        }
    }

    /// Log prior of the block's coefficients at the current parameter state
    /// (only terms that vary with this block). The spherical coefficient
    /// prior is stated in raw coordinates, so the PSA block maps its
    /// coefficients through `map` before scoring them.
    fn log_prior(self, params: &ModelParameters, spec: &ModelSpec, map: &CoordinateMap) -> f64 {
        let pr = spec.priors();
        match self {
            BlockKind::BetaPsa => {
                let raw = map.beta_to_raw(&params.beta);
                (0..5).map(|j| stats::normal_logpdf(raw[j], 0.0, pr.normal_variance)).sum()
            }
            BlockKind::BetaCr => (5..8)
                .map(|j| stats::normal_logpdf(params.beta[j], 0.0, pr.normal_variance))
                .sum(),
            BlockKind::Assoc(cause) => {
                let k = cause.idx();
                let mut lp = stats::normal_logpdf(params.gamma_density[k], 0.0, pr.normal_variance)
                    + stats::normal_logpdf(params.alpha_value[k], 0.0, pr.normal_variance)
                    + stats::normal_logpdf(params.alpha_change[k], 0.0, pr.normal_variance);
                if spec.variant() == Variant::Icjm2 {
                    lp += stats::normal_logpdf(params.alpha_cr[k], 0.0, pr.normal_variance);
                }
                lp
            }
            BlockKind::Baseline(cause) => {
                let k = cause.idx();
                let q = spec.penalty().quadratic_form(params.gamma_h0[k].as_slice());
                -0.5 * params.tau_h0[k] * q
            }
            // Gamma prior on tau_eps plus the log-transform Jacobian.
            BlockKind::LogTauEps => {
                stats::gamma_logpdf(params.tau_eps, pr.tau_eps_shape, pr.tau_eps_rate)
                    + params.tau_eps.ln()
            }
        }
    }
}

fn blocks_for(spec: &ModelSpec) -> Vec<BlockKind> {
    let mut kinds = vec![BlockKind::BetaPsa];
    if spec.variant() == Variant::Icjm2 {
        kinds.push(BlockKind::BetaCr);
    }
    for cause in Cause::ALL {
        kinds.push(BlockKind::Assoc(cause));
    }
    for cause in Cause::ALL {
        kinds.push(BlockKind::Baseline(cause));
    }
    kinds.push(BlockKind::LogTauEps);
    kinds
}

/// Per-block adaptive state.
#[derive(Debug, Clone)]
struct BlockState {
    kind: BlockKind,
    dim: usize,
    scale: AdaptiveScale,
    cov: RunningCov,
    /// Lower Cholesky factor of the empirical covariance once available.
    prop_l: Option<DMatrix<f64>>,
}

impl BlockState {
    fn new(kind: BlockKind, spec: &ModelSpec) -> Self {
        let dim = kind.dim(spec);
        BlockState {
            kind,
            dim,
            scale: AdaptiveScale::new(2.38 / (dim as f64).sqrt()),
            cov: RunningCov::new(dim),
            prop_l: None,
        }
    }

    fn target(&self, cfg: &MCMCConfig) -> f64 {
        if self.dim == 1 {
            cfg.target_scalar
        } else {
            cfg.target_vector
        }
    }

    /// Record the current block value and refresh the proposal shape once
    /// enough samples have accumulated.
    fn learn(&mut self, value: &DVector<f64>) {
        self.cov.update(value);
        if self.dim > 1 && self.cov.n >= (2 * self.dim) as f64 {
            if let Some(mut c) = self.cov.covariance() {
                for i in 0..self.dim {
                    c[(i, i)] += 1e-10;
                }
                if let Some(ch) = stats::cholesky(&c) {
                    self.prop_l = Some(ch.l());
                }
            }
        }
    }
}

struct Counter {
    attempts: u64,
    accepts: u64,
}

impl Counter {
    fn new() -> Self {
        Counter { attempts: 0, accepts: 0 }
    }

    fn record(&mut self, accepted: bool) {
        self.attempts += 1;
        self.accepts += u64::from(accepted);
    }

    fn rate(&self) -> f64 {
        if self.attempts == 0 {
            f64::NAN
        } else {
            self.accepts as f64 / self.attempts as f64
        }
    }
}

// ------------------------------------------------------ sampling coordinates

/// Affine change of coordinates between the public ("raw") parameter space
/// and the space the chains actually sample in.
///
/// The longitudinal spline columns are nearly collinear, so random walks on
/// their raw coefficients crawl along likelihood ridges shared with the
/// subject effects and the covariance. Chains therefore run against a
/// [`ModelSpec::conditioned_on`] copy of the spec whose columns are centered
/// and whitened over the pooled measurement times; this map carries
/// coefficient vectors, subject effects, the covariance, and their priors
/// between the two systems. Both systems describe the same posterior, so
/// drawing in one and mapping to the other is exact, not an approximation.
///
/// The map only mixes the intercept and the three spline coefficients
/// (indices 0..=3 of both the fixed coefficients and the subject effects);
/// every other coordinate is carried unchanged.
#[derive(Debug, Clone)]
pub struct CoordinateMap {
    /// beta_raw = m beta_s.
    beta_raw_from_s: DMatrix<f64>,
    beta_s_from_raw: DMatrix<f64>,
    /// u_s = j u_raw.
    u_s_from_raw: DMatrix<f64>,
    u_raw_from_s: DMatrix<f64>,
    /// j j': the covariance-prior scale matrix expressed in sampling
    /// coordinates (the raw prior scale is the identity).
    omega_prior_scale: DMatrix<f64>,
    /// m'm: the raw spherical prior on the coefficients becomes
    /// N(0, sigma^2 (m'm)^-1) in sampling coordinates.
    beta_prior_gram: DMatrix<f64>,
}

impl CoordinateMap {
    /// Identity map: sampling coordinates equal the raw ones.
    pub fn identity(spec: &ModelSpec) -> Self {
        let p = spec.n_beta();
        let q = spec.n_u();
        CoordinateMap {
            beta_raw_from_s: DMatrix::identity(p, p),
            beta_s_from_raw: DMatrix::identity(p, p),
            u_s_from_raw: DMatrix::identity(q, q),
            u_raw_from_s: DMatrix::identity(q, q),
            omega_prior_scale: DMatrix::identity(q, q),
            beta_prior_gram: DMatrix::identity(p, p),
        }
    }

    /// Map induced by a conditioned copy of `spec`: the copy's spline
    /// columns are `w (raw_columns - mu)` per [`NcsBasis::affine`], so a
    /// curve with raw coefficients `(c0, c)` has sampling coefficients
    /// `(c0 + c'mu, w^-T' c)` and vice versa.
    pub fn new(spec: &ModelSpec, sampling_spec: &ModelSpec) -> Self {
        let (mu, w) = sampling_spec.ncs().affine();
        let mut wm = DMatrix::<f64>::zeros(3, 3);
        for r in 0..3 {
            for c in 0..=r {
                wm[(r, c)] = w[r][c];
            }
        }
        let w_inv = wm.clone().try_inverse().expect("triangular with positive diagonal");
        let wmu = &wm * DVector::from_column_slice(&mu);

        // 4x4 core acting on (intercept, curve coefficients); identical for
        // fixed coefficients and subject effects because both multiply the
        // same columns.
        let mut core_raw_from_s = DMatrix::<f64>::identity(4, 4);
        let mut core_s_from_raw = DMatrix::<f64>::identity(4, 4);
        for i in 0..3 {
            core_raw_from_s[(0, 1 + i)] = -wmu[i];
            core_s_from_raw[(0, 1 + i)] = mu[i];
            for j in 0..3 {
                core_raw_from_s[(1 + i, 1 + j)] = wm[(j, i)];
                core_s_from_raw[(1 + i, 1 + j)] = w_inv[(j, i)];
            }
        }

        let p = spec.n_beta();
        let q = spec.n_u();
        let mut beta_raw_from_s = DMatrix::identity(p, p);
        let mut beta_s_from_raw = DMatrix::identity(p, p);
        let mut u_raw_from_s = DMatrix::identity(q, q);
        let mut u_s_from_raw = DMatrix::identity(q, q);
        for i in 0..4 {
            for j in 0..4 {
                beta_raw_from_s[(i, j)] = core_raw_from_s[(i, j)];
                beta_s_from_raw[(i, j)] = core_s_from_raw[(i, j)];
                u_raw_from_s[(i, j)] = core_raw_from_s[(i, j)];
                u_s_from_raw[(i, j)] = core_s_from_raw[(i, j)];
            }
        }
        let omega_prior_scale = &u_s_from_raw * u_s_from_raw.transpose();
        let beta_prior_gram = beta_raw_from_s.transpose() * &beta_raw_from_s;
        CoordinateMap {
            beta_raw_from_s,
            beta_s_from_raw,
            u_s_from_raw,
            u_raw_from_s,
            omega_prior_scale,
            beta_prior_gram,
        }
    }

    pub fn beta_to_raw(&self, beta_s: &DVector<f64>) -> DVector<f64> {
        &self.beta_raw_from_s * beta_s
    }

    pub fn beta_from_raw(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.beta_s_from_raw * beta
    }

    pub fn u_to_raw(&self, u_s: &RandomEffects) -> RandomEffects {
        &self.u_raw_from_s * u_s
    }

    pub fn u_from_raw(&self, u: &RandomEffects) -> RandomEffects {
        &self.u_s_from_raw * u
    }

    pub fn omega_to_raw(&self, omega_s: &DMatrix<f64>) -> DMatrix<f64> {
        let m = &self.u_raw_from_s * omega_s * self.u_raw_from_s.transpose();
        0.5 * (&m + m.transpose())
    }

    pub fn omega_from_raw(&self, omega: &DMatrix<f64>) -> DMatrix<f64> {
        let m = &self.u_s_from_raw * omega * self.u_s_from_raw.transpose();
        0.5 * (&m + m.transpose())
    }

    /// A sampled parameter state expressed in raw coordinates.
    pub fn draw_to_raw(&self, p: &ModelParameters) -> ModelParameters {
        let mut out = p.clone();
        out.beta = self.beta_to_raw(&p.beta);
        out.omega = self.omega_to_raw(&p.omega);
        out
    }

    /// A raw parameter state expressed in sampling coordinates.
    pub fn params_from_raw(&self, p: &ModelParameters) -> ModelParameters {
        let mut out = p.clone();
        out.beta = self.beta_from_raw(&p.beta);
        out.omega = self.omega_from_raw(&p.omega);
        out
    }
}

/// The sampler's internal coordinate system for a dataset: a copy of the
/// spec whitened against the pooled PSA measurement times, plus the map
/// back to raw coordinates. Falls back to the raw system when the pooled
/// times cannot identify a transform.
pub fn sampling_space(ds: &Dataset, spec: &ModelSpec) -> (ModelSpec, CoordinateMap) {
    let times: Vec<f64> = ds
        .patients
        .iter()
        .flat_map(|p| p.longitudinal.iter())
        .filter(|o| o.outcome_kind == OutcomeKind::Psa)
        .map(|o| o.time)
        .collect();
    match spec.conditioned_on(&times) {
        Ok(spec_s) => {
            let map = CoordinateMap::new(spec, &spec_s);
            (spec_s, map)
        }
        Err(_) => (spec.clone(), CoordinateMap::identity(spec)),
    }
}

// -------------------------------------------------------------- chain state

/// One chain's full sampler state.
pub struct ChainState {
    pub params: ModelParameters,
    pub u: Vec<RandomEffects>,
    long_ll: Vec<f64>,
    surv_ll: Vec<f64>,
    omega_chol: Cholesky<f64, Dyn>,
    omega_l: DMatrix<f64>,
    blocks: Vec<BlockState>,
    u_scales: Vec<AdaptiveScale>,
    block_counters: Vec<Counter>,
    u_counter: Counter,
    rejected_streak: u32,
    ages: Vec<f64>,
    map: CoordinateMap,
    scratch_long: Vec<f64>,
    scratch_surv: Vec<f64>,
    /// Per-subject likelihood-curvature Grams for proposal shaping: the
    /// unweighted PSA effects Gram (scaled by the residual curvature each
    /// sweep) and the constant part (core-ratio bound), both embedded in
    /// n_u x n_u.
    gram_psa: Vec<DMatrix<f64>>,
    gram_base: Vec<DMatrix<f64>>,
}

impl ChainState {
    /// Builds the state around an initial parameter vector with all random
    /// effects at zero, verifying the starting log-posterior is finite.
    pub fn init(
        caches: &[PatientCache],
        spec: &ModelSpec,
        init: &ModelParameters,
        map: &CoordinateMap,
        chain: u32,
    ) -> Result<Self, McmcError> {
        spec.validate_params(init)?;
        let params = init.clone();
        let u: Vec<RandomEffects> = vec![DVector::zeros(spec.n_u()); caches.len()];
        let omega_chol = stats::cholesky(&params.omega).ok_or(ModelError::NotPositiveDefinite)?;
        let omega_l = omega_chol.l();
        let long_ll: Vec<f64> =
            caches.iter().zip(&u).map(|(c, ui)| c.longitudinal_loglik(&params, ui)).collect();
        let surv_ll: Vec<f64> =
            caches.iter().zip(&u).map(|(c, ui)| c.survival_loglik(&params, ui)).collect();
        let mut total = log_prior(&params, spec);
        for ((l, s), ui) in long_ll.iter().zip(&surv_ll).zip(&u) {
            total += l + s + stats::mvn_logpdf_chol(ui, &omega_chol);
        }
        if !total.is_finite() {
            return Err(McmcError::NonFiniteInit { chain });
        }
        let blocks: Vec<BlockState> =
            blocks_for(spec).into_iter().map(|k| BlockState::new(k, spec)).collect();
        let block_counters = blocks.iter().map(|_| Counter::new()).collect();
        let n_u = spec.n_u();
        let mut gram_psa = Vec::with_capacity(caches.len());
        let mut gram_base = Vec::with_capacity(caches.len());
        for c in caches {
            let mut gp = DMatrix::zeros(n_u, n_u);
            gp.view_mut((0, 0), (4, 4)).copy_from(&c.psa_effects_gram());
            gram_psa.push(gp);
            let mut gb = DMatrix::zeros(n_u, n_u);
            if let Some(cr) = c.cr_effects_gram() {
                // Binomial logit curvature is bounded by trials/4.
                gb.view_mut((4, 4), (3, 3)).copy_from(&(cr * 0.25));
            }
            gram_base.push(gb);
        }
        Ok(ChainState {
            params,
            u,
            long_ll,
            surv_ll,
            omega_chol,
            omega_l,
            blocks,
            u_scales: vec![AdaptiveScale::new(2.38 / (n_u as f64).sqrt()); caches.len()],
            block_counters,
            u_counter: Counter::new(),
            rejected_streak: 0,
            ages: caches.iter().map(|c| c.age).collect(),
            map: map.clone(),
            scratch_long: Vec::with_capacity(caches.len()),
            scratch_surv: Vec::with_capacity(caches.len()),
            gram_psa,
            gram_base,
        })
    }

    /// One full sweep. `sweep` is 1-based; adaptation runs during burn-in
    /// and freezes afterwards.
    fn sweep(
        &mut self,
        caches: &[PatientCache],
        spec: &ModelSpec,
        cfg: &MCMCConfig,
        chain: u32,
        sweep: u32,
    ) -> Result<(), McmcError> {
        let adapt = sweep <= cfg.n_burnin;
        let post = sweep > cfg.n_burnin;
        let mut any_accept = false;

        for b in 0..self.blocks.len() {
            let mut rng = stream(cfg.seed, Domain::Chain, u64::from(chain), u64::from(sweep), b as u64);
            let accepted = update_block(
                &mut self.blocks[b],
                &mut rng,
                caches,
                spec,
                &self.map,
                &mut self.params,
                &self.u,
                &mut self.long_ll,
                &mut self.surv_ll,
                &mut self.scratch_long,
                &mut self.scratch_surv,
                adapt,
                cfg,
            );
            any_accept |= accepted;
            if post {
                self.block_counters[b].record(accepted);
            }
        }

        // Shape each subject's proposal by the Gaussianized conditional
        // precision (prior + biomarker curvature); the prior Cholesky alone
        // over-proposes likelihood-tight directions and starves the rest.
        let omega_inv = self.omega_chol.inverse();
        let resid_curv = 4.0 * self.params.tau_eps / 3.0;
        for i in 0..caches.len() {
            let mut rng =
                stream(cfg.seed, Domain::SubjectUpdate, u64::from(chain), u64::from(sweep), i as u64);
            let prec = &omega_inv + &self.gram_psa[i] * resid_curv + &self.gram_base[i];
            let shape_l = stats::cholesky(&prec)
                .and_then(|c| stats::cholesky(&c.inverse()))
                .map(|c| c.l());
            let accepted = update_subject(
                i,
                &mut rng,
                &caches[i],
                &self.params,
                &mut self.u,
                &self.omega_chol,
                shape_l.as_ref().unwrap_or(&self.omega_l),
                &mut self.long_ll,
                &mut self.surv_ll,
                &mut self.u_scales[i],
                adapt,
                cfg,
            );
            any_accept |= accepted;
            if post {
                self.u_counter.record(accepted);
            }
        }

        let mut rng = stream(
            cfg.seed,
            Domain::Chain,
            u64::from(chain),
            u64::from(sweep),
            CONJUGATE_STREAM,
        );
        recenter_shared_effects(
            &mut rng,
            &mut self.params,
            &mut self.u,
            &self.ages,
            spec,
            &self.map,
            &self.omega_chol,
        )?;
        for cause in Cause::ALL {
            let k = cause.idx();
            self.params.tau_h0[k] = gibbs_tau_h0(
                &mut rng,
                self.params.gamma_h0[k].as_slice(),
                spec.penalty(),
                spec.priors(),
            );
        }
        self.params.omega =
            gibbs_omega(&mut rng, &self.u, self.params.tau_u, spec, &self.map)?;
        any_accept |= interweave_omega(
            &mut rng,
            &mut self.params,
            &mut self.u,
            caches,
            &mut self.long_ll,
            &mut self.surv_ll,
            spec,
            &self.map,
        );
        self.omega_chol =
            stats::cholesky(&self.params.omega).ok_or(McmcError::SingularScale)?;
        self.omega_l = self.omega_chol.l();
        self.params.tau_u = gibbs_tau_u(&mut rng, &self.params.omega, spec, &self.map)?;

        if note_divergence(&mut self.rejected_streak, any_accept) {
            return Err(McmcError::Divergent {
                chain,
                from: sweep + 1 - self.rejected_streak,
                to: sweep,
            });
        }
        Ok(())
    }
}

/// Tracks consecutive sweeps in which every proposal was rejected; returns
/// true once the divergence window is exhausted.
fn note_divergence(streak: &mut u32, any_accept: bool) -> bool {
    if any_accept {
        *streak = 0;
        false
    } else {
        *streak += 1;
        *streak >= DIVERGENCE_WINDOW
    }
}

/// Metropolis update of one parameter block; returns whether the proposal
/// was accepted.
#[allow(clippy::too_many_arguments)]
fn update_block<R: Rng>(
    block: &mut BlockState,
    rng: &mut R,
    caches: &[PatientCache],
    spec: &ModelSpec,
    map: &CoordinateMap,
    params: &mut ModelParameters,
    u: &[RandomEffects],
    long_ll: &mut [f64],
    surv_ll: &mut [f64],
    scratch_long: &mut Vec<f64>,
    scratch_surv: &mut Vec<f64>,
    adapt: bool,
    cfg: &MCMCConfig,
) -> bool {
    let kind = block.kind;
    let (need_long, need_surv) = kind.touches();
    let current = kind.get(params, spec);
    let proposal = propose_walk(rng, &current, block.scale.scale(), block.prop_l.as_ref());

    // Snapshot for the reject path: the log-precision block stores its state
    // as ln(tau_eps), and exp(ln(x)) does not round-trip bitwise.
    let saved = params.clone();
    let lp_old = kind.log_prior(params, spec, map);
    kind.set(params, spec, &proposal);
    let lp_new = kind.log_prior(params, spec, map);
    let mut log_ratio = lp_new - lp_old;

    scratch_long.clear();
    scratch_surv.clear();
    if need_long {
        for (c, ui) in caches.iter().zip(u) {
            scratch_long.push(c.longitudinal_loglik(params, ui));
        }
        log_ratio += scratch_long.iter().sum::<f64>() - long_ll.iter().sum::<f64>();
    }
    if need_surv {
        for (c, ui) in caches.iter().zip(u) {
            scratch_surv.push(c.survival_loglik(params, ui));
        }
        log_ratio += scratch_surv.iter().sum::<f64>() - surv_ll.iter().sum::<f64>();
    }

    let accepted = mh_accept(rng, log_ratio);
    if accepted {
        if need_long {
            long_ll.copy_from_slice(scratch_long);
        }
        if need_surv {
            surv_ll.copy_from_slice(scratch_surv);
        }
    } else {
        *params = saved;
    }
    if adapt {
        let target = block.target(cfg);
        rm_adapt(&mut block.scale, accepted, target, cfg.rm_exponent);
        block.learn(&kind.get(params, spec));
    }
    accepted
}

/// Metropolis update of one subject's random effects with a proposal shaped
/// by the current covariance.
#[allow(clippy::too_many_arguments)]
fn update_subject<R: Rng>(
    i: usize,
    rng: &mut R,
    cache: &PatientCache,
    params: &ModelParameters,
    u: &mut [RandomEffects],
    omega_chol: &Cholesky<f64, Dyn>,
    shape_l: &DMatrix<f64>,
    long_ll: &mut [f64],
    surv_ll: &mut [f64],
    scale: &mut AdaptiveScale,
    adapt: bool,
    cfg: &MCMCConfig,
) -> bool {
    let proposal = propose_walk(rng, &u[i], scale.scale(), Some(shape_l));
    let cand_long = cache.longitudinal_loglik(params, &proposal);
    let cand_surv = cache.survival_loglik(params, &proposal);
    let log_ratio = cand_long + cand_surv + stats::mvn_logpdf_chol(&proposal, omega_chol)
        - long_ll[i]
        - surv_ll[i]
        - stats::mvn_logpdf_chol(&u[i], omega_chol);
    let accepted = mh_accept(rng, log_ratio);
    if accepted {
        u[i] = proposal;
        long_ll[i] = cand_long;
        surv_ll[i] = cand_surv;
    }
    if adapt {
        rm_adapt(scale, accepted, cfg.target_vector, cfg.rm_exponent);
    }
    accepted
}

// ---------------------------------------------------------- conjugate draws

fn sample_gamma<R: Rng>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    debug_assert!(shape > 0.0 && rate > 0.0);
    GammaDist::new(shape, 1.0 / rate).expect("valid gamma parameters").sample(rng)
}

/// Conjugate draw of one cause's smoothing precision:
/// Gamma(shape + rank/2, rate + q/2) with q the penalty quadratic form.
pub fn gibbs_tau_h0<R: Rng>(
    rng: &mut R,
    gamma_h0_k: &[f64],
    penalty: &PenaltyMatrix,
    priors: &PriorConstants,
) -> f64 {
    let shape = priors.tau_h0_shape + penalty.rank as f64 / 2.0;
    let rate = priors.tau_h0_rate + 0.5 * penalty.quadratic_form(gamma_h0_k);
    sample_gamma(rng, shape, rate)
}

/// The per-subject design that embeds a shift of the fixed coefficients into
/// the subject-effect space: adding `delta` to the coefficients while
/// subtracting `E_i delta` from subject `i`'s effects leaves every subject's
/// mean trajectories — and therefore the whole likelihood — unchanged.
fn orbit_design(variant: Variant, age: f64) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(variant.n_u(), variant.n_beta());
    e[(0, 0)] = 1.0;
    e[(1, 1)] = 1.0;
    e[(2, 2)] = 1.0;
    e[(3, 3)] = 1.0;
    e[(0, 4)] = age - AGE_CENTER;
    if variant == Variant::Icjm2 {
        e[(4, 5)] = 1.0;
        e[(5, 6)] = 1.0;
        e[(6, 7)] = 1.0;
    }
    e
}

/// Exact Gibbs move along the translation orbit shared by the fixed
/// coefficients and the subject effects (`beta += delta`,
/// `u_i -= E_i delta`). The likelihood is constant on the orbit, so the
/// conditional of `delta` comes from the two Gaussian priors alone and can
/// be sampled in closed form. Random-walk blocks alone crawl along this
/// ridge; resampling the split directly is what lets the population level
/// mix.
pub fn recenter_shared_effects<R: Rng>(
    rng: &mut R,
    params: &mut ModelParameters,
    u: &mut [RandomEffects],
    ages: &[f64],
    spec: &ModelSpec,
    map: &CoordinateMap,
    omega_chol: &Cholesky<f64, Dyn>,
) -> Result<(), McmcError> {
    if u.is_empty() {
        return Ok(());
    }
    debug_assert_eq!(u.len(), ages.len());
    let variant = spec.variant();
    let sigma2 = spec.priors().normal_variance;
    let omega_inv = omega_chol.inverse();

    // Prior precision of the coefficients in sampling coordinates.
    let q0 = &map.beta_prior_gram / sigma2;
    let mut precision = q0.clone();
    let mut natural = -(&q0 * &params.beta);
    for (ui, &age) in u.iter().zip(ages) {
        let e = orbit_design(variant, age);
        let et_oinv = e.transpose() * &omega_inv;
        precision += &et_oinv * &e;
        natural += et_oinv * ui;
    }

    let prec_chol = stats::cholesky(&precision).ok_or(McmcError::SingularScale)?;
    let mean = prec_chol.solve(&natural);
    let cov_chol = stats::cholesky(&prec_chol.inverse()).ok_or(McmcError::SingularScale)?;
    let delta = mean + stats::sample_mvn_chol(rng, &cov_chol.l());

    params.beta += &delta;
    for (ui, &age) in u.iter_mut().zip(ages) {
        *ui -= orbit_design(variant, age) * &delta;
    }
    Ok(())
}

/// Conjugate draw of the random-effects covariance:
/// inverse-Wishart(prior dof + n_subjects, (scale/tau_u) I + sum of outer
/// products of the current effects).
pub fn gibbs_omega<R: Rng>(
    rng: &mut R,
    u_all: &[RandomEffects],
    tau_u: f64,
    spec: &ModelSpec,
    map: &CoordinateMap,
) -> Result<DMatrix<f64>, McmcError> {
    let p = spec.n_u();
    let nu = spec.omega_prior_dof() + u_all.len() as f64;
    let mut psi = &map.omega_prior_scale * (spec.priors().omega_scale / tau_u);
    for ui in u_all {
        debug_assert_eq!(ui.len(), p);
        psi += ui * ui.transpose();
    }
    stats::sample_inv_wishart(rng, nu, &psi).ok_or(McmcError::SingularScale)
}

/// Ancillary rescaling of the random-effects covariance (interweaving).
///
/// Holding the whitened effects `z_i = L^-1 u_i` fixed, proposes a fresh
/// covariance from the sufficient-parameterization conditional
/// (inverse-Wishart at `prior dof + n` with scale `Psi + sum u u^T`) and
/// accepts against the likelihood of the transported effects
/// `u_i' = L' z_i` plus the prior and proposal correction terms. In
/// directions the data barely identify the likelihood ratio is flat, so the
/// covariance jumps straight across its prior-dominated conditional instead
/// of random-walking through the effects pool one subject at a time; in
/// identified directions the likelihood keeps the scale pinned. Complements
/// [`gibbs_omega`], which is exact given the effects but freezes whenever
/// the effects themselves are slow.
///
/// Returns whether the proposal was accepted; on acceptance the covariance,
/// every subject's effects, and the cached likelihood terms are replaced.
#[allow(clippy::too_many_arguments)]
pub fn interweave_omega<R: Rng>(
    rng: &mut R,
    params: &mut ModelParameters,
    u: &mut [RandomEffects],
    caches: &[PatientCache],
    long_ll: &mut [f64],
    surv_ll: &mut [f64],
    spec: &ModelSpec,
    map: &CoordinateMap,
) -> bool {
    if u.is_empty() {
        return false;
    }
    let p = spec.n_u();
    let nu0 = spec.omega_prior_dof();
    let nu = nu0 + u.len() as f64;
    let psi0 = &map.omega_prior_scale * (spec.priors().omega_scale / params.tau_u);
    let mut scatter = DMatrix::zeros(p, p);
    for ui in u.iter() {
        scatter += ui * ui.transpose();
    }
    let psi_cur = &psi0 + &scatter;
    let Some(omega_prop) = stats::sample_inv_wishart(rng, nu, &psi_cur) else {
        return false;
    };
    let (Some(cur_chol), Some(prop_chol)) =
        (stats::cholesky(&params.omega), stats::cholesky(&omega_prop))
    else {
        return false;
    };
    let Some(cur_l_inv) = cur_chol.l().try_inverse() else {
        return false;
    };
    let transport = prop_chol.l() * cur_l_inv;

    let mut delta_lik = 0.0;
    let mut u_new = Vec::with_capacity(u.len());
    let mut ll_new = Vec::with_capacity(u.len());
    for (i, ui) in u.iter().enumerate() {
        let v = &transport * ui;
        let nl = caches[i].longitudinal_loglik(params, &v);
        let ns = caches[i].survival_loglik(params, &v);
        if !(nl + ns).is_finite() {
            return false;
        }
        delta_lik += nl + ns - long_ll[i] - surv_ll[i];
        u_new.push(v);
        ll_new.push((nl, ns));
    }
    let mut scatter_new = DMatrix::zeros(p, p);
    for v in &u_new {
        scatter_new += v * v.transpose();
    }
    let psi_prop = &psi0 + &scatter_new;

    let (Some(prior_prop), Some(prior_cur), Some(rev_q), Some(fwd_q)) = (
        stats::inv_wishart_logpdf(&omega_prop, nu0, &psi0),
        stats::inv_wishart_logpdf(&params.omega, nu0, &psi0),
        stats::inv_wishart_logpdf(&params.omega, nu, &psi_prop),
        stats::inv_wishart_logpdf(&omega_prop, nu, &psi_cur),
    ) else {
        return false;
    };
    let log_ratio = delta_lik + prior_prop - prior_cur + rev_q - fwd_q;
    if !mh_accept(rng, log_ratio) {
        return false;
    }
    params.omega = omega_prop;
    for (i, v) in u_new.into_iter().enumerate() {
        u[i] = v;
        long_ll[i] = ll_new[i].0;
        surv_ll[i] = ll_new[i].1;
    }
    true
}

/// Draw of the covariance-prior scale hyperparameter from its full
/// conditional.
///
/// With a Gamma(a, b) prior on tau_u and the inverse-Wishart prior carrying
/// scale matrix (s/tau_u) I at `nu0` degrees of freedom, the conditional
/// density of xi = 1/tau_u is Gamma(p*nu0/2 - a, (s/2) tr(Omega^-1)) damped
/// by exp(-b/xi); rejection sampling against the Gamma envelope accepts with
/// probability exp(-b/xi), which is nearly 1 for b = 0.01.
pub fn gibbs_tau_u<R: Rng>(
    rng: &mut R,
    omega: &DMatrix<f64>,
    spec: &ModelSpec,
    map: &CoordinateMap,
) -> Result<f64, McmcError> {
    let pr = spec.priors();
    let p = spec.n_u() as f64;
    let chol = stats::cholesky(omega).ok_or(McmcError::SingularScale)?;
    // tr(prior scale * omega^-1) in whichever coordinates omega lives in:
    // the raw-coordinate trace equals tr(omega_s^-1 j j').
    let tr_inv = (chol.inverse() * &map.omega_prior_scale).trace();
    let shape = p * spec.omega_prior_dof() / 2.0 - pr.tau_u_shape;
    let rate = 0.5 * pr.omega_scale * tr_inv;
    if !(shape > 0.0 && rate > 0.0 && rate.is_finite()) {
        return Err(McmcError::SingularScale);
    }
    let mut xi = 0.0;
    for _ in 0..100_000 {
        xi = sample_gamma(rng, shape, rate);
        if rng.gen::<f64>() < (-pr.tau_u_rate / xi).exp() {
            return Ok(1.0 / xi);
        }
    }
    // Acceptance is ~exp(-0.01/xi); exhausting the loop is unreachable in
    // practice. Fall back to the envelope draw.
    Ok(1.0 / xi)
}

// --------------------------------------------------------------- diagnostics

/// Split-half potential-scale-reduction statistic for one parameter.
///
/// Each chain is halved (middle element dropped when odd) and the standard
/// between/within variance ratio is computed over the resulting sequences.
/// By convention the result is clamped below at 1, and a set of sequences
/// with zero within- and between-sequence variance yields exactly 1.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Result<f64, McmcError> {
    if chains.len() < 2 {
        return Err(McmcError::SingleChain);
    }
    let n0 = chains[0].len();
    if n0 < 4 || chains.iter().any(|c| c.len() != n0) {
        return Err(McmcError::ChainLength);
    }
    let half = n0 / 2;
    let mut seqs: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        seqs.push(&c[0..half]);
        seqs.push(&c[n0 - half..]);
    }
    let m = seqs.len() as f64;
    let n = half as f64;
    let means: Vec<f64> = seqs.iter().map(|s| stats::mean(s)).collect();
    let grand = stats::mean(&means);
    let b = n * means.iter().map(|x| (x - grand) * (x - grand)).sum::<f64>() / (m - 1.0);
    let w = seqs.iter().map(|s| stats::variance(s)).sum::<f64>() / m;
    if w == 0.0 {
        return Ok(if b == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    Ok((var_plus / w).sqrt().max(1.0))
}

/// Flat list of scalar parameter names in the order used by
/// [`flatten_parameters`].
pub fn parameter_names(spec: &ModelSpec) -> Vec<String> {
    let mut names = Vec::new();
    for j in 0..spec.n_beta() {
        names.push(format!("beta[{j}]"));
    }
    names.push("tau_eps".to_string());
    for field in ["gamma_density", "alpha_value", "alpha_change"] {
        for cause in Cause::ALL {
            names.push(format!("{field}[{}]", cause.label()));
        }
    }
    if spec.variant() == Variant::Icjm2 {
        for cause in Cause::ALL {
            names.push(format!("alpha_cr[{}]", cause.label()));
        }
    }
    for cause in Cause::ALL {
        for j in 0..spec.n_h0() {
            names.push(format!("gamma_h0[{}][{j}]", cause.label()));
        }
    }
    for cause in Cause::ALL {
        names.push(format!("tau_h0[{}]", cause.label()));
    }
    for i in 0..spec.n_u() {
        for j in 0..=i {
            names.push(format!("omega[{i}][{j}]"));
        }
    }
    names.push("tau_u".to_string());
    names
}

/// Scalar view of a parameter vector matching [`parameter_names`].
pub fn flatten_parameters(p: &ModelParameters, spec: &ModelSpec) -> Vec<f64> {
    let mut v: Vec<f64> = p.beta.iter().copied().collect();
    v.push(p.tau_eps);
    v.extend_from_slice(&p.gamma_density);
    v.extend_from_slice(&p.alpha_value);
    v.extend_from_slice(&p.alpha_change);
    if spec.variant() == Variant::Icjm2 {
        v.extend_from_slice(&p.alpha_cr);
    }
    for cause in Cause::ALL {
        v.extend(p.gamma_h0[cause.idx()].iter().copied());
    }
    v.extend_from_slice(&p.tau_h0);
    for i in 0..spec.n_u() {
        for j in 0..=i {
            v.push(p.omega[(i, j)]);
        }
    }
    v.push(p.tau_u);
    v
}

// ------------------------------------------------------------------ results

/// Post-burn-in, thinned posterior draws with their chain labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorSamples {
    spec: ModelSpec,
    draws: Vec<ModelParameters>,
    chain_labels: Vec<u32>,
    n_chains: u32,
}

impl PosteriorSamples {
    pub fn new(
        spec: ModelSpec,
        draws: Vec<ModelParameters>,
        chain_labels: Vec<u32>,
        n_chains: u32,
    ) -> Result<Self, McmcError> {
        if draws.is_empty() || draws.len() != chain_labels.len() {
            return Err(McmcError::Config("draws and chain labels must match and be nonempty"));
        }
        if chain_labels.iter().any(|&c| c >= n_chains) {
            return Err(McmcError::Config("chain label out of range"));
        }
        Ok(PosteriorSamples { spec, draws, chain_labels, n_chains })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn n_draws(&self) -> usize {
        self.draws.len()
    }

    pub fn n_chains(&self) -> u32 {
        self.n_chains
    }

    pub fn draws(&self) -> &[ModelParameters] {
        &self.draws
    }

    pub fn chain_labels(&self) -> &[u32] {
        &self.chain_labels
    }

    pub fn chain(&self, label: u32) -> impl Iterator<Item = &ModelParameters> {
        self.draws
            .iter()
            .zip(&self.chain_labels)
            .filter(move |(_, &l)| l == label)
            .map(|(d, _)| d)
    }

    /// `l` draws spread evenly over the pooled sequence (all draws when
    /// `l` is at least the pool size).
    pub fn evenly_spaced(&self, l: usize) -> Vec<&ModelParameters> {
        let n = self.draws.len();
        if l == 0 {
            return Vec::new();
        }
        if l >= n {
            return self.draws.iter().collect();
        }
        (0..l)
            .map(|j| {
                let idx = ((j as f64 + 0.5) * n as f64 / l as f64) as usize;
                &self.draws[idx.min(n - 1)]
            })
            .collect()
    }

    /// Posterior mean of every scalar parameter (order of
    /// [`parameter_names`]).
    pub fn posterior_means(&self) -> Vec<f64> {
        let dim = flatten_parameters(&self.draws[0], &self.spec).len();
        let mut acc = vec![0.0; dim];
        for d in &self.draws {
            for (a, x) in acc.iter_mut().zip(flatten_parameters(d, &self.spec)) {
                *a += x;
            }
        }
        let n = self.draws.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

/// Acceptance rates and convergence statistics from a fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Post-burn-in acceptance rate per proposal block, averaged over
    /// chains; subject updates are pooled under `"u"`.
    pub acceptance: Vec<(String, f64)>,
    /// Split potential-scale-reduction per scalar parameter.
    pub r_hat: Vec<(String, f64)>,
    pub max_r_hat: f64,
}

pub struct FitOutput {
    pub samples: PosteriorSamples,
    pub diagnostics: FitDiagnostics,
}

/// Draws and acceptance bookkeeping from a single chain.
pub struct ChainRun {
    pub chain: u32,
    pub draws: Vec<ModelParameters>,
    pub acceptance: Vec<(String, f64)>,
}

// ----------------------------------------------------------------- fitting

/// Precomputed per-patient likelihood caches.
pub fn build_caches(ds: &Dataset, spec: &ModelSpec) -> Result<Vec<PatientCache>, McmcError> {
    ds.patients
        .iter()
        .map(|p| PatientCache::new(p, spec).map_err(McmcError::from))
        .collect()
}

/// Data-driven starting point shared by all chains: fixed effects from a
/// ridge-stabilized least-squares fit of the transformed PSA on the spline
/// design, baseline log-hazards at the crude per-cause event rate, neutral
/// values elsewhere.
pub fn initialize(caches: &[PatientCache], spec: &ModelSpec) -> ModelParameters {
    let mut params = ModelParameters::baseline(spec);

    // Least squares for the PSA fixed effects on [1, ncs, age - center].
    let mut xtx = DMatrix::<f64>::zeros(5, 5);
    let mut xty = DVector::<f64>::zeros(5);
    let mut n_obs = 0usize;
    for c in caches {
        let age_c = c.age - AGE_CENTER;
        for (y, row) in c.psa_rows() {
            let x = [1.0, row[0], row[1], row[2], age_c];
            for i in 0..5 {
                xty[i] += x[i] * y;
                for j in 0..5 {
                    xtx[(i, j)] += x[i] * x[j];
                }
            }
            n_obs += 1;
        }
    }
    let mut beta5 = DVector::zeros(5);
    if n_obs > 0 {
        for i in 0..5 {
            xtx[(i, i)] += 1e-8 * (1.0 + xtx[(i, i)]);
        }
        if let Some(ch) = stats::cholesky(&xtx) {
            beta5 = ch.solve(&xty);
        }
        // Residual variance of the least-squares fit sets the precision.
        let mut rss = 0.0;
        for c in caches {
            let age_c = c.age - AGE_CENTER;
            for (y, row) in c.psa_rows() {
                let fitted = beta5[0]
                    + beta5[1] * row[0]
                    + beta5[2] * row[1]
                    + beta5[3] * row[2]
                    + beta5[4] * age_c;
                rss += (y - fitted) * (y - fitted);
            }
        }
        let var = (rss / n_obs as f64).max(1e-4);
        params.tau_eps = 1.0 / var;
    }
    params.beta.rows_mut(0, 5).copy_from(&beta5);

    if spec.variant() == Variant::Icjm2 {
        // Core-ratio intercept at the overall positive fraction, flat trend.
        let mut k_tot = 0.0;
        let mut n_tot = 0.0;
        for c in caches {
            let (k, n) = c.cr_totals();
            k_tot += k;
            n_tot += n;
        }
        let p = ((k_tot + 0.5) / (n_tot + 1.0)).clamp(0.01, 0.99);
        params.beta[5] = stats::logit(p);
    }

    // Constant baseline log-hazard from the crude event rate per cause;
    // the basis sums to one, so equal coefficients give that constant.
    let follow_up: f64 = caches.iter().map(|c| c.t_upper).sum::<f64>().max(1e-9);
    for cause in Cause::ALL {
        let kind = match cause {
            Cause::Progression => EventKind::Progression,
            Cause::Treatment => EventKind::Treatment,
        };
        let events = caches.iter().filter(|c| c.delta == kind).count() as f64;
        let rate = (events.max(0.5) / follow_up).max(1e-6);
        params.gamma_h0[cause.idx()] = DVector::from_element(spec.n_h0(), rate.ln());
    }
    params.tau_h0 = [10.0, 10.0];
    params.tau_u = 50.0;
    params
}

/// Runs one chain to completion. Chains are independent given the shared
/// caches and initial point, so callers may execute them concurrently and
/// [`assemble`] the runs in label order.
///
/// `caches`, `spec`, and `init` must all live in the same coordinate
/// system as `map` (see [`sampling_space`]); retained draws are mapped back
/// to raw coordinates as they are stored.
pub fn run_chain(
    caches: &[PatientCache],
    spec: &ModelSpec,
    cfg: &MCMCConfig,
    init: &ModelParameters,
    map: &CoordinateMap,
    chain: u32,
) -> Result<ChainRun, McmcError> {
    let mut state = ChainState::init(caches, spec, init, map, chain)?;
    let mut draws = Vec::with_capacity(cfg.draws_per_chain() as usize);
    for sweep in 1..=cfg.n_iterations {
        state.sweep(caches, spec, cfg, chain, sweep)?;
        if sweep > cfg.n_burnin && (sweep - cfg.n_burnin) % cfg.thinning == 0 {
            draws.push(map.draw_to_raw(&state.params));
        }
    }
    let mut acceptance: Vec<(String, f64)> = state
        .blocks
        .iter()
        .zip(&state.block_counters)
        .map(|(b, c)| (b.kind.name().to_string(), c.rate()))
        .collect();
    acceptance.push(("u".to_string(), state.u_counter.rate()));
    Ok(ChainRun { chain, draws, acceptance })
}

/// Pools chain runs into posterior samples plus diagnostics. Runs may
/// arrive in any order; they are sorted by chain label.
pub fn assemble(
    spec: ModelSpec,
    cfg: &MCMCConfig,
    mut runs: Vec<ChainRun>,
) -> Result<FitOutput, McmcError> {
    runs.sort_by_key(|r| r.chain);
    let per_chain = cfg.draws_per_chain() as usize;
    if runs.is_empty()
        || runs.len() != cfg.n_chains as usize
        || runs.iter().any(|r| r.draws.len() != per_chain)
    {
        return Err(McmcError::Config("chain runs do not match the configuration"));
    }

    // R-hat per scalar parameter over the retained draws.
    let names = parameter_names(&spec);
    let series: Vec<Vec<Vec<f64>>> = runs
        .iter()
        .map(|r| r.draws.iter().map(|d| flatten_parameters(d, &spec)).collect())
        .collect();
    let mut r_hat = Vec::with_capacity(names.len());
    let mut max_r_hat = f64::NEG_INFINITY;
    for (j, name) in names.iter().enumerate() {
        let value = if cfg.n_chains < 2 || per_chain < 4 {
            f64::NAN
        } else {
            let per_param: Vec<Vec<f64>> =
                series.iter().map(|chain| chain.iter().map(|v| v[j]).collect()).collect();
            gelman_rubin(&per_param)?
        };
        if value.is_finite() {
            max_r_hat = max_r_hat.max(value);
        }
        r_hat.push((name.clone(), value));
    }
    if !max_r_hat.is_finite() {
        max_r_hat = f64::NAN;
    }

    // Acceptance rates averaged over chains.
    let mut acceptance: Vec<(String, f64)> = Vec::new();
    for (idx, (name, _)) in runs[0].acceptance.iter().enumerate() {
        let mean =
            runs.iter().map(|r| r.acceptance[idx].1).sum::<f64>() / runs.len() as f64;
        acceptance.push((name.clone(), mean));
    }

    let mut draws = Vec::with_capacity(per_chain * runs.len());
    let mut chain_labels = Vec::with_capacity(per_chain * runs.len());
    for r in runs {
        chain_labels.extend(core::iter::repeat(r.chain).take(r.draws.len()));
        draws.extend(r.draws);
    }
    let samples = PosteriorSamples::new(spec, draws, chain_labels, cfg.n_chains)?;
    Ok(FitOutput {
        samples,
        diagnostics: FitDiagnostics { acceptance, r_hat, max_r_hat },
    })
}

/// Fits the model: runs every chain sequentially and pools the results.
/// Chains sample in the conditioned coordinate system of [`sampling_space`];
/// the returned draws and diagnostics are in raw coordinates.
pub fn fit(ds: &Dataset, spec: &ModelSpec, cfg: &MCMCConfig) -> Result<FitOutput, McmcError> {
    cfg.validate()?;
    if ds.patients.is_empty() {
        return Err(McmcError::Config("dataset is empty"));
    }
    let (spec_s, map) = sampling_space(ds, spec);
    let caches = build_caches(ds, &spec_s)?;
    let init = initialize(&caches, &spec_s);
    let mut runs = Vec::with_capacity(cfg.n_chains as usize);
    for chain in 0..cfg.n_chains {
        runs.push(run_chain(&caches, &spec_s, cfg, &init, &map, chain)?);
    }
    assemble(spec.clone(), cfg, runs)
}
