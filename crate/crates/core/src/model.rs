//! Model structure: parameter container, variants, and the compiled spec
//! (spline bases, penalty, prior constants) shared by likelihood, MCMC,
//! prediction, and simulation.
//!
//! Two variants exist. The first models a single longitudinal PSA outcome
//! with 4 random effects (intercept + 3 spline slopes). The second adds a
//! binomial core-ratio outcome with quadratic time trend and 3 more random
//! effects (7 total). Both share a pair of cause-specific hazards
//! (progression, treatment start) with penalized B-spline log baselines,
//! a log PSA-density covariate, and association terms on the current PSA
//! mean and its one-year change (plus the core-ratio logit mean in the
//! second variant).

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::spline::{
    difference_penalty, BsplineBasis, KnotVector, NcsBasis, PenaltyMatrix, SplineError,
};

/// Age is centered at this value (years) in the PSA mean.
pub const AGE_CENTER: f64 = 62.0;

/// Order of the difference penalty on baseline-hazard coefficients.
pub const PENALTY_ORDER: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// PSA only; 4 random effects.
    Icjm1,
    /// PSA + core ratio; 7 random effects.
    Icjm2,
}

impl Variant {
    /// Random-effects dimension.
    pub fn n_u(self) -> usize {
        match self {
            Variant::Icjm1 => 4,
            Variant::Icjm2 => 7,
        }
    }

    /// Fixed-effects dimension (5 PSA terms, plus 3 core-ratio terms).
    pub fn n_beta(self) -> usize {
        match self {
            Variant::Icjm1 => 5,
            Variant::Icjm2 => 8,
        }
    }
}

/// The two competing causes that end active surveillance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cause {
    Progression,
    Treatment,
}

pub const N_CAUSES: usize = 2;

impl Cause {
    pub const ALL: [Cause; N_CAUSES] = [Cause::Progression, Cause::Treatment];

    pub fn idx(self) -> usize {
        match self {
            Cause::Progression => 0,
            Cause::Treatment => 1,
        }
    }

    /// Short lowercase tag used in parameter and diagnostic names.
    pub fn label(self) -> &'static str {
        match self {
            Cause::Progression => "prg",
            Cause::Treatment => "trt",
        }
    }
}

/// Per-subject random-effect vector (length 4 or 7 depending on variant).
pub type RandomEffects = DVector<f64>;

/// Fixed hyperconstants of the priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConstants {
    /// Variance of the zero-mean normal priors on regression coefficients.
    pub normal_variance: f64,
    pub tau_eps_shape: f64,
    pub tau_eps_rate: f64,
    pub tau_h0_shape: f64,
    pub tau_h0_rate: f64,
    pub tau_u_shape: f64,
    pub tau_u_rate: f64,
    /// The random-effects covariance prior is inverse-Wishart with scale
    /// matrix (omega_scale / tau_u) I and n_u + omega_extra_dof degrees of
    /// freedom.
    pub omega_scale: f64,
    pub omega_extra_dof: usize,
}

impl Default for PriorConstants {
    fn default() -> Self {
        PriorConstants {
            normal_variance: 100.0,
            tau_eps_shape: 0.01,
            tau_eps_rate: 0.01,
            tau_h0_shape: 5.0,
            tau_h0_rate: 0.5,
            tau_u_shape: 0.5,
            tau_u_rate: 0.01,
            omega_scale: 4.0,
            omega_extra_dof: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("{what} must be positive, got {value}")]
    NotPositive { what: &'static str, value: f64 },
    #[error("random-effects covariance is not symmetric positive-definite")]
    NotPositiveDefinite,
    #[error("operation requires the core-ratio variant")]
    VariantMismatch,
    #[error("invalid integration interval [{a}, {b}]")]
    Interval { a: f64, b: f64 },
    #[error("invalid observation: {0}")]
    Observation(&'static str),
}

/// Serialized form of [`ModelSpec`]; bases and penalty are rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpecRepr {
    pub variant: Variant,
    pub ncs_knots: KnotVector,
    pub h0_knots: KnotVector,
    pub penalty_order: usize,
    pub priors: PriorConstants,
}

/// Compiled model structure: variant, spline bases, penalty, priors.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ModelSpecRepr", into = "ModelSpecRepr")]
pub struct ModelSpec {
    variant: Variant,
    ncs_knots: KnotVector,
    h0_knots: KnotVector,
    ncs: NcsBasis,
    h0: BsplineBasis,
    penalty: PenaltyMatrix,
    priors: PriorConstants,
}

impl TryFrom<ModelSpecRepr> for ModelSpec {
    type Error = ModelError;

    fn try_from(r: ModelSpecRepr) -> Result<Self, ModelError> {
        let ncs = NcsBasis::new(&r.ncs_knots)?;
        let h0 = BsplineBasis::new(&r.h0_knots)?;
        let penalty = difference_penalty(h0.n_basis(), r.penalty_order)?;
        Ok(ModelSpec {
            variant: r.variant,
            ncs_knots: r.ncs_knots,
            h0_knots: r.h0_knots,
            ncs,
            h0,
            penalty,
            priors: r.priors,
        })
    }
}

impl From<ModelSpec> for ModelSpecRepr {
    fn from(s: ModelSpec) -> ModelSpecRepr {
        ModelSpecRepr {
            variant: s.variant,
            ncs_knots: s.ncs_knots,
            h0_knots: s.h0_knots,
            penalty_order: s.penalty.order,
            priors: s.priors,
        }
    }
}

impl ModelSpec {
    pub fn new(
        variant: Variant,
        ncs_knots: KnotVector,
        h0_knots: KnotVector,
    ) -> Result<Self, ModelError> {
        ModelSpec::try_from(ModelSpecRepr {
            variant,
            ncs_knots,
            h0_knots,
            penalty_order: PENALTY_ORDER,
            priors: PriorConstants::default(),
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn n_u(&self) -> usize {
        self.variant.n_u()
    }

    pub fn n_beta(&self) -> usize {
        self.variant.n_beta()
    }

    /// Number of B-spline coefficients in each baseline log hazard.
    pub fn n_h0(&self) -> usize {
        self.h0.n_basis()
    }

    pub fn ncs(&self) -> &NcsBasis {
        &self.ncs
    }

    pub fn h0_basis(&self) -> &BsplineBasis {
        &self.h0
    }

    pub fn ncs_knots(&self) -> &KnotVector {
        &self.ncs_knots
    }

    pub fn h0_knots(&self) -> &KnotVector {
        &self.h0_knots
    }

    /// A copy whose longitudinal spline columns are affinely
    /// re-coordinatized (centered and whitened) against the supplied sample
    /// times. The columns span the same function space, so the copy encodes
    /// the same model in different coefficient coordinates; samplers use it
    /// internally because the default truncated-power columns are nearly
    /// collinear. The copy is not serialization-stable: round-tripping it
    /// through its serialized form yields the default coordinates.
    pub fn conditioned_on(&self, times: &[f64]) -> Result<ModelSpec, ModelError> {
        let ncs = self.ncs.conditioned_on(times)?;
        Ok(ModelSpec { ncs, ..self.clone() })
    }

    pub fn penalty(&self) -> &PenaltyMatrix {
        &self.penalty
    }

    pub fn priors(&self) -> &PriorConstants {
        &self.priors
    }

    /// Degrees of freedom of the covariance prior: n_u + extra.
    pub fn omega_prior_dof(&self) -> f64 {
        (self.n_u() + self.priors.omega_extra_dof) as f64
    }

    /// Checks dimensions and support constraints of a parameter vector.
    pub fn validate_params(&self, p: &ModelParameters) -> Result<(), ModelError> {
        if p.beta.len() != self.n_beta() {
            return Err(ModelError::Dimension {
                what: "beta",
                expected: self.n_beta(),
                got: p.beta.len(),
            });
        }
        if p.omega.nrows() != self.n_u() || p.omega.ncols() != self.n_u() {
            return Err(ModelError::Dimension {
                what: "omega",
                expected: self.n_u(),
                got: p.omega.nrows().max(p.omega.ncols()),
            });
        }
        for g in &p.gamma_h0 {
            if g.len() != self.n_h0() {
                return Err(ModelError::Dimension {
                    what: "gamma_h0",
                    expected: self.n_h0(),
                    got: g.len(),
                });
            }
        }
        for (what, value) in [
            ("tau_eps", p.tau_eps),
            ("tau_u", p.tau_u),
            ("tau_h0[progression]", p.tau_h0[0]),
            ("tau_h0[treatment]", p.tau_h0[1]),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ModelError::NotPositive { what, value });
            }
        }
        let sym = p
            .omega
            .iter()
            .zip(p.omega.transpose().iter())
            .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        if !sym || crate::stats::cholesky(&p.omega).is_none() {
            return Err(ModelError::NotPositiveDefinite);
        }
        Ok(())
    }

    pub fn validate_u(&self, u: &RandomEffects) -> Result<(), ModelError> {
        if u.len() != self.n_u() {
            return Err(ModelError::Dimension {
                what: "random effects",
                expected: self.n_u(),
                got: u.len(),
            });
        }
        Ok(())
    }
}

/// Full parameter vector of the joint model.
///
/// Per-cause arrays are indexed by [`Cause::idx`]: 0 progression, 1
/// treatment. `alpha_cr` is carried for both variants but only enters the
/// hazard under the core-ratio variant.
///
/// Serialization goes through [`ModelParametersRepr`] (plain nested
/// vectors), keeping persisted files independent of the linear-algebra
/// backend's internal layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelParametersRepr", into = "ModelParametersRepr")]
pub struct ModelParameters {
    /// Fixed effects: PSA intercept, 3 spline slopes, centered-age slope;
    /// then (core-ratio variant) intercept, linear, quadratic time terms.
    pub beta: DVector<f64>,
    /// PSA residual precision.
    pub tau_eps: f64,
    /// Random-effects covariance.
    pub omega: DMatrix<f64>,
    /// Scale hyperparameter of the covariance prior.
    pub tau_u: f64,
    /// Per-cause baseline log-hazard B-spline coefficients.
    pub gamma_h0: [DVector<f64>; N_CAUSES],
    /// Per-cause smoothing precisions for the baseline coefficients.
    pub tau_h0: [f64; N_CAUSES],
    /// Per-cause coefficients on log baseline PSA density.
    pub gamma_density: [f64; N_CAUSES],
    /// Per-cause association with the current PSA mean.
    pub alpha_value: [f64; N_CAUSES],
    /// Per-cause association with the one-year PSA mean change.
    pub alpha_change: [f64; N_CAUSES],
    /// Per-cause association with the core-ratio logit mean.
    pub alpha_cr: [f64; N_CAUSES],
}

impl ModelParameters {
    /// Neutral starting point: zero coefficients, unit precisions, identity
    /// covariance.
    pub fn baseline(spec: &ModelSpec) -> Self {
        ModelParameters {
            beta: DVector::zeros(spec.n_beta()),
            tau_eps: 1.0,
            omega: DMatrix::identity(spec.n_u(), spec.n_u()),
            tau_u: 1.0,
            gamma_h0: [DVector::zeros(spec.n_h0()), DVector::zeros(spec.n_h0())],
            tau_h0: [1.0, 1.0],
            gamma_density: [0.0; N_CAUSES],
            alpha_value: [0.0; N_CAUSES],
            alpha_change: [0.0; N_CAUSES],
            alpha_cr: [0.0; N_CAUSES],
        }
    }

    /// All regression coefficients that get vague normal priors, in a fixed
    /// order (used by the prior and by diagnostics).
    pub fn normal_prior_coefficients(&self, variant: Variant) -> Vec<f64> {
        let mut v: Vec<f64> = self.beta.iter().copied().collect();
        v.extend_from_slice(&self.gamma_density);
        v.extend_from_slice(&self.alpha_value);
        v.extend_from_slice(&self.alpha_change);
        if variant == Variant::Icjm2 {
            v.extend_from_slice(&self.alpha_cr);
        }
        v
    }
}

/// Serialized form of [`ModelParameters`]: plain nested vectors, matrices
/// row by row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelParametersRepr {
    pub beta: Vec<f64>,
    pub tau_eps: f64,
    pub omega: Vec<Vec<f64>>,
    pub tau_u: f64,
    pub gamma_h0: [Vec<f64>; N_CAUSES],
    pub tau_h0: [f64; N_CAUSES],
    pub gamma_density: [f64; N_CAUSES],
    pub alpha_value: [f64; N_CAUSES],
    pub alpha_change: [f64; N_CAUSES],
    pub alpha_cr: [f64; N_CAUSES],
}

impl From<ModelParameters> for ModelParametersRepr {
    fn from(p: ModelParameters) -> Self {
        let n = p.omega.nrows();
        let omega = (0..n)
            .map(|i| (0..n).map(|j| p.omega[(i, j)]).collect())
            .collect();
        ModelParametersRepr {
            beta: p.beta.iter().copied().collect(),
            tau_eps: p.tau_eps,
            omega,
            tau_u: p.tau_u,
            gamma_h0: [
                p.gamma_h0[0].iter().copied().collect(),
                p.gamma_h0[1].iter().copied().collect(),
            ],
            tau_h0: p.tau_h0,
            gamma_density: p.gamma_density,
            alpha_value: p.alpha_value,
            alpha_change: p.alpha_change,
            alpha_cr: p.alpha_cr,
        }
    }
}

impl TryFrom<ModelParametersRepr> for ModelParameters {
    type Error = ModelError;

    fn try_from(r: ModelParametersRepr) -> Result<Self, ModelError> {
        let n = r.omega.len();
        let mut omega = DMatrix::<f64>::zeros(n, n);
        for (i, row) in r.omega.iter().enumerate() {
            if row.len() != n {
                return Err(ModelError::Dimension {
                    what: "omega",
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                omega[(i, j)] = v;
            }
        }
        Ok(ModelParameters {
            beta: DVector::from_vec(r.beta),
            tau_eps: r.tau_eps,
            omega,
            tau_u: r.tau_u,
            gamma_h0: [DVector::from_vec(r.gamma_h0[0].clone()), DVector::from_vec(r.gamma_h0[1].clone())],
            tau_h0: r.tau_h0,
            gamma_density: r.gamma_density,
            alpha_value: r.alpha_value,
            alpha_change: r.alpha_change,
            alpha_cr: r.alpha_cr,
        })
    }
}

/// Canonical small spec shared by unit tests across modules.
#[cfg(test)]
pub(crate) fn test_spec(variant: Variant) -> ModelSpec {
    use alloc::vec;
    let ncs = KnotVector::new((0.0, 10.0), vec![1.5, 4.0]).unwrap();
    let h0 =
        KnotVector::new((0.0, 12.0), vec![0.9, 1.4, 2.0, 2.7, 3.5, 4.4, 5.6, 7.5]).unwrap();
    ModelSpec::new(variant, ncs, h0).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_spec(variant: Variant) -> ModelSpec {
        super::test_spec(variant)
    }

    #[test]
    fn dimensions_by_variant() {
        let s1 = test_spec(Variant::Icjm1);
        assert_eq!(s1.n_u(), 4);
        assert_eq!(s1.n_beta(), 5);
        assert_eq!(s1.n_h0(), 12);
        assert_eq!(s1.penalty().dim, 12);
        assert_eq!(s1.penalty().order, PENALTY_ORDER);
        let s2 = test_spec(Variant::Icjm2);
        assert_eq!(s2.n_u(), 7);
        assert_eq!(s2.n_beta(), 8);
    }

    #[test]
    fn baseline_params_validate() {
        for variant in [Variant::Icjm1, Variant::Icjm2] {
            let spec = test_spec(variant);
            let p = ModelParameters::baseline(&spec);
            assert!(spec.validate_params(&p).is_ok());
        }
    }

    #[test]
    fn validation_catches_bad_params() {
        let spec = test_spec(Variant::Icjm1);
        let good = ModelParameters::baseline(&spec);

        let mut p = good.clone();
        p.beta = DVector::zeros(8);
        assert!(matches!(
            spec.validate_params(&p),
            Err(ModelError::Dimension { what: "beta", .. })
        ));

        let mut p = good.clone();
        p.tau_eps = 0.0;
        assert!(matches!(spec.validate_params(&p), Err(ModelError::NotPositive { .. })));

        let mut p = good.clone();
        p.omega[(0, 1)] = 2.0; // asymmetric
        assert!(matches!(spec.validate_params(&p), Err(ModelError::NotPositiveDefinite)));

        let mut p = good.clone();
        p.omega[(0, 0)] = -1.0;
        assert!(matches!(spec.validate_params(&p), Err(ModelError::NotPositiveDefinite)));

        assert!(spec.validate_u(&DVector::zeros(4)).is_ok());
        assert!(spec.validate_u(&DVector::zeros(7)).is_err());
    }

    #[test]
    fn spec_serde_round_trip_rebuilds_bases() {
        let spec = test_spec(Variant::Icjm2);
        let json = serde_json::to_string(&spec).unwrap();
        let back: ModelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.variant(), Variant::Icjm2);
        assert_eq!(back.n_h0(), spec.n_h0());
        assert_eq!(back.penalty().matrix, spec.penalty().matrix);
        assert_eq!(back.ncs_knots(), spec.ncs_knots());
        // Bases evaluate identically.
        for t in [0.0, 0.7, 3.3, 9.0, 12.0] {
            assert_eq!(back.ncs().eval(t), spec.ncs().eval(t));
            assert_eq!(back.h0_basis().eval(t), spec.h0_basis().eval(t));
        }
    }

    #[test]
    fn params_serde_round_trip() {
        let spec = test_spec(Variant::Icjm1);
        let mut p = ModelParameters::baseline(&spec);
        p.beta[0] = 2.34;
        p.alpha_change = [3.01, 2.62];
        let json = serde_json::to_string(&p).unwrap();
        let back: ModelParameters = serde_json::from_str(&json).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn normal_prior_coefficient_count() {
        let s1 = test_spec(Variant::Icjm1);
        let p1 = ModelParameters::baseline(&s1);
        assert_eq!(p1.normal_prior_coefficients(Variant::Icjm1).len(), 5 + 2 + 2 + 2);
        let s2 = test_spec(Variant::Icjm2);
        let p2 = ModelParameters::baseline(&s2);
        assert_eq!(p2.normal_prior_coefficients(Variant::Icjm2).len(), 8 + 2 + 2 + 2 + 2);
    }
}
