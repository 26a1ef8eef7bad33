//! Shared statistical primitives: log-densities, matrix-variate samplers,
//! and quantile helpers used across likelihood, MCMC, and simulation code.

use alloc::vec::Vec;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
#[allow(unused_imports)] // redundant only when a dependency links std (e.g. test builds)
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// log Gamma(x).
pub fn lgamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// log density of N(mean, variance) at x.
pub fn normal_logpdf(x: f64, mean: f64, variance: f64) -> f64 {
    let r = x - mean;
    -0.5 * (LN_2PI + variance.ln()) - 0.5 * r * r / variance
}

/// log density of Gamma(shape, rate) at x; -inf outside the support.
pub fn gamma_logpdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - lgamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// log(Gamma(2) / (Gamma(1.5) sqrt(3 pi))): normalizing constant of the
/// 3-df Student-t density at unit scale.
const T3_LN_CONST: f64 = -1.000_888_849_623_509_8;

/// log density at `resid` of a 3-df Student-t with location 0 and precision
/// `tau` (scale = 1/sqrt(tau)).
pub fn student_t3_logpdf(resid: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return f64::NEG_INFINITY;
    }
    T3_LN_CONST + 0.5 * tau.ln() - 2.0 * (1.0 + tau * resid * resid / 3.0).ln()
}

/// log(1 + exp(x)) without overflow.
pub fn ln_1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse logit.
pub fn ilogit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Logit of p in (0, 1).
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// log C(n, k).
pub fn ln_choose(n: u32, k: u32) -> f64 {
    lgamma(n as f64 + 1.0) - lgamma(k as f64 + 1.0) - lgamma((n - k) as f64 + 1.0)
}

/// Binomial log-pmf of `k` successes in `n` trials with success probability
/// inverse-logit(`logit_p`), including the binomial coefficient.
pub fn binomial_logit_logpmf(k: u32, n: u32, logit_p: f64) -> f64 {
    debug_assert!(k <= n);
    ln_choose(n, k) + k as f64 * logit_p - n as f64 * ln_1p_exp(logit_p)
}

/// Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone())
}

/// log density of MVN(0, cov) at x, given the Cholesky factor of cov.
pub fn mvn_logpdf_chol(x: &DVector<f64>, chol: &Cholesky<f64, Dyn>) -> f64 {
    let d = x.len() as f64;
    let half_log_det: f64 = (0..x.len()).map(|i| chol.l_dirty()[(i, i)].ln()).sum();
    let solved = chol.solve(x);
    -0.5 * d * LN_2PI - half_log_det - 0.5 * x.dot(&solved)
}

/// One draw from MVN(0, L L^T) given the lower Cholesky factor L.
pub fn sample_mvn_chol<R: Rng>(rng: &mut R, l: &DMatrix<f64>) -> DVector<f64> {
    let d = l.nrows();
    let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    l * z
}

/// log of the multivariate gamma function of dimension p at a.
pub fn ln_mv_gamma(p: usize, a: f64) -> f64 {
    let mut s = 0.25 * (p * (p - 1)) as f64 * core::f64::consts::PI.ln();
    for j in 1..=p {
        s += lgamma(a + 0.5 * (1.0 - j as f64));
    }
    s
}

/// log density of the inverse-Wishart IW(nu, psi) at omega. `None` when
/// omega or psi is not positive-definite.
pub fn inv_wishart_logpdf(omega: &DMatrix<f64>, nu: f64, psi: &DMatrix<f64>) -> Option<f64> {
    let p = omega.nrows();
    let chol_omega = cholesky(omega)?;
    let chol_psi = cholesky(psi)?;
    let ln_det_omega: f64 = (0..p).map(|i| 2.0 * chol_omega.l_dirty()[(i, i)].ln()).sum();
    let ln_det_psi: f64 = (0..p).map(|i| 2.0 * chol_psi.l_dirty()[(i, i)].ln()).sum();
    let omega_inv = chol_omega.inverse();
    let trace = (psi * omega_inv).trace();
    Some(
        0.5 * nu * ln_det_psi
            - 0.5 * nu * p as f64 * 2f64.ln()
            - ln_mv_gamma(p, 0.5 * nu)
            - 0.5 * (nu + p as f64 + 1.0) * ln_det_omega
            - 0.5 * trace,
    )
}

/// One draw from Wishart(nu, scale) by the Bartlett decomposition; requires
/// nu > p - 1 and a positive-definite scale.
pub fn sample_wishart<R: Rng>(rng: &mut R, nu: f64, scale: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let p = scale.nrows();
    let l = cholesky(scale)?.l();
    let mut a = DMatrix::zeros(p, p);
    for i in 0..p {
        let df = nu - i as f64;
        let chi2 = Gamma::new(0.5 * df, 2.0).ok()?;
        a[(i, i)] = chi2.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let m = l * a;
    Some(&m * m.transpose())
}

/// One draw from the inverse-Wishart IW(nu, psi).
pub fn sample_inv_wishart<R: Rng>(rng: &mut R, nu: f64, psi: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let psi_inv = cholesky(psi)?.inverse();
    let w = sample_wishart(rng, nu, &psi_inv)?;
    let omega = cholesky(&w)?.inverse();
    // Symmetrize: the inverse is symmetric up to rounding.
    Some(0.5 * (&omega + omega.transpose()))
}

/// One draw from N(mean, sd^2) truncated to [lo, hi], by rejection.
pub fn sample_truncated_normal<R: Rng>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let n = Normal::new(mean, sd).expect("valid normal");
    loop {
        let x = n.sample(rng);
        if x >= lo && x <= hi {
            return x;
        }
    }
}

/// (mu, sigma) of a log-normal with the requested mean and standard
/// deviation on the natural scale.
pub fn lognormal_params(mean: f64, sd: f64) -> (f64, f64) {
    debug_assert!(mean > 0.0 && sd > 0.0);
    let sigma2 = (1.0 + sd * sd / (mean * mean)).ln();
    (mean.ln() - 0.5 * sigma2, sigma2.sqrt())
}

/// Type-7 quantile (linear interpolation of order statistics) of `sorted`
/// at level `p` in [0, 1].
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Type-7 quantile of an unsorted sample.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

/// Sample mean.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}
