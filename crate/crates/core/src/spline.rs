//! Spline design rows and penalty matrices.
//!
//! Two bases are provided:
//!
//! - A 3-column natural cubic spline on 4 knots (2 boundary + 2 interior),
//!   built from truncated powers with the natural constraint, so every basis
//!   function is linear at and beyond the boundary knots. Evaluation
//!   extrapolates linearly on both sides (needed for lagged-mean terms at
//!   times below one year). The truncated-power columns are nearly
//!   collinear over the knot range (all grow cubically toward the upper
//!   boundary), which makes random-walk samplers on their coefficients mix
//!   poorly; [`NcsBasis::conditioned_on`] builds an affine re-coordinatized
//!   copy (centered and whitened against supplied sample times) spanning
//!   the same function space, for use inside samplers only.
//! - A clamped cubic B-spline basis on an arbitrary strictly increasing
//!   grid (partition of unity inside the grid). Evaluation clamps the input
//!   to the grid range, which freezes the baseline hazard beyond the last
//!   knot instead of extrapolating it.
//!
//! The difference penalty M = D_r' D_r + 1e-6 I regularizes the B-spline
//! coefficients of the log baseline hazard.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplineError {
    #[error("knots must be strictly increasing and bracketed by the boundary pair")]
    MalformedKnots,
    #[error("natural cubic spline basis needs exactly 2 interior knots, got {0}")]
    WrongInteriorCount(usize),
    #[error("only cubic B-splines are supported, got degree {0}")]
    UnsupportedDegree(usize),
    #[error("need at least {need} supplied times, got {got}")]
    TooFewTimes { need: usize, got: usize },
    #[error("cannot place {count} knots: supplied times are all identical")]
    DegenerateTimes { count: usize },
    #[error("penalty needs dim > order, got dim {dim}, order {order}")]
    PenaltyDims { dim: usize, order: usize },
    #[error("supplied times do not identify a conditioning transform")]
    DegenerateConditioning,
}

/// Ordered knot set: a boundary pair bracketing the interior knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    pub boundary: (f64, f64),
    pub interior: Vec<f64>,
}

impl KnotVector {
    pub fn new(boundary: (f64, f64), interior: Vec<f64>) -> Result<Self, SplineError> {
        let kv = KnotVector { boundary, interior };
        kv.validate()?;
        Ok(kv)
    }

    pub fn validate(&self) -> Result<(), SplineError> {
        let mut prev = self.boundary.0;
        for &k in &self.interior {
            if k <= prev {
                return Err(SplineError::MalformedKnots);
            }
            prev = k;
        }
        if self.boundary.1 <= prev {
            return Err(SplineError::MalformedKnots);
        }
        Ok(())
    }

    /// All knots in ascending order, boundaries included.
    pub fn full_grid(&self) -> Vec<f64> {
        let mut g = Vec::with_capacity(self.interior.len() + 2);
        g.push(self.boundary.0);
        g.extend_from_slice(&self.interior);
        g.push(self.boundary.1);
        g
    }
}

// ----------------------------------------------------------------- natural

/// Precompiled 3-column natural cubic spline basis on 4 knots.
#[derive(Debug, Clone)]
pub struct NcsBasis {
    xi: [f64; 4],
    inv_range: f64,
    inv_range2: f64,
    /// Column offsets of the affine re-coordinatization (zero by default).
    mu: [f64; 3],
    /// Lower-triangular column map of the affine re-coordinatization
    /// (identity by default).
    white: [[f64; 3]; 3],
}

impl NcsBasis {
    pub fn new(knots: &KnotVector) -> Result<Self, SplineError> {
        knots.validate()?;
        if knots.interior.len() != 2 {
            return Err(SplineError::WrongInteriorCount(knots.interior.len()));
        }
        let xi = [knots.boundary.0, knots.interior[0], knots.interior[1], knots.boundary.1];
        let range = xi[3] - xi[0];
        Ok(NcsBasis {
            xi,
            inv_range: 1.0 / range,
            inv_range2: 1.0 / (range * range),
            mu: [0.0; 3],
            white: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        })
    }

    /// Affine re-coordinatized copy whose columns have zero mean and unit,
    /// uncorrelated variance over the supplied sample times.
    ///
    /// The new columns span the same function space (together with the
    /// intercept), so any curve expressible in one coordinate system is
    /// exactly expressible in the other; [`NcsBasis::affine`] exposes the
    /// map between the two coefficient vectors. Intended as a sampler
    /// preconditioner: the default columns are nearly collinear, which
    /// cripples random-walk exploration of their coefficients.
    pub fn conditioned_on(&self, times: &[f64]) -> Result<NcsBasis, SplineError> {
        if times.len() < 4 {
            return Err(SplineError::TooFewTimes { need: 4, got: times.len() });
        }
        let inv_n = 1.0 / times.len() as f64;
        let mut mean = [0.0f64; 3];
        let mut second = [[0.0f64; 3]; 3];
        for &t in times {
            let r = self.raw(t);
            for k in 0..3 {
                mean[k] += inv_n * r[k];
                for l in 0..3 {
                    second[k][l] += inv_n * r[k] * r[l];
                }
            }
        }
        let mut cov = [[0.0f64; 3]; 3];
        for k in 0..3 {
            for l in 0..3 {
                cov[k][l] = second[k][l] - mean[k] * mean[l];
            }
        }

        // Cholesky of the 3x3 covariance, then forward substitution for its
        // inverse: white = L^-1 gives identity covariance for white (raw - mu).
        let mut l = [[0.0f64; 3]; 3];
        for k in 0..3 {
            for j in 0..=k {
                let mut s = cov[k][j];
                for m in 0..j {
                    s -= l[k][m] * l[j][m];
                }
                if j == k {
                    if s <= 0.0 {
                        return Err(SplineError::DegenerateConditioning);
                    }
                    l[k][k] = libm::sqrt(s);
                } else {
                    l[k][j] = s / l[j][j];
                }
            }
        }
        let mut white = [[0.0f64; 3]; 3];
        for k in 0..3 {
            white[k][k] = 1.0 / l[k][k];
            for j in (0..k).rev() {
                let mut s = 0.0;
                for m in (j + 1)..=k {
                    s += l[m][j] * white[k][m];
                }
                white[k][j] = -s / l[j][j];
            }
        }
        Ok(NcsBasis { mu: mean, white, ..*self })
    }

    /// The affine map `(mu, w)` of this basis: its columns are
    /// `b(t) = w (raw(t) - mu)` with `w` lower triangular, where `raw` is
    /// the default truncated-power representation.
    pub fn affine(&self) -> ([f64; 3], [[f64; 3]; 3]) {
        (self.mu, self.white)
    }

    /// Truncated-power natural spline row before any re-coordinatization.
    ///
    /// d_j(t) = [(t - xi_j)_+^3 - (t - xi_3)_+^3] / (xi_3 - xi_j); the
    /// differences d_j - d_2 cancel quadratic and cubic growth beyond the
    /// upper boundary, leaving linear tails (zero second derivative).
    #[inline]
    fn raw(&self, t: f64) -> [f64; 3] {
        let cube = |x: f64| if x > 0.0 { x * x * x } else { 0.0 };
        let tail = cube(t - self.xi[3]);
        let d = |j: usize| (cube(t - self.xi[j]) - tail) / (self.xi[3] - self.xi[j]);
        let d2 = d(2);
        [
            (t - self.xi[0]) * self.inv_range,
            (d(0) - d2) * self.inv_range2,
            (d(1) - d2) * self.inv_range2,
        ]
    }

    /// Basis row at `t`; defined for every real `t`, linear outside the
    /// boundary knots. The default basis is the truncated-power
    /// representation itself, zero at the lower boundary knot; a
    /// [`NcsBasis::conditioned_on`] copy applies its affine column map.
    #[inline]
    pub fn eval(&self, t: f64) -> [f64; 3] {
        let r = self.raw(t);
        let x = [r[0] - self.mu[0], r[1] - self.mu[1], r[2] - self.mu[2]];
        let w = &self.white;
        [
            w[0][0] * x[0],
            w[1][0] * x[0] + w[1][1] * x[1],
            w[2][0] * x[0] + w[2][1] * x[1] + w[2][2] * x[2],
        ]
    }
}

/// Natural cubic spline design row at `t` (3 columns, 3 df).
pub fn ncs_design(t: f64, knots: &KnotVector) -> Result<[f64; 3], SplineError> {
    Ok(NcsBasis::new(knots)?.eval(t))
}

// ----------------------------------------------------------------- b-spline

/// Precompiled clamped cubic B-spline basis.
#[derive(Debug, Clone)]
pub struct BsplineBasis {
    /// Full knot sequence with 4-fold boundary multiplicity.
    full: Vec<f64>,
    n_basis: usize,
    lo: f64,
    hi: f64,
}

pub const BSPLINE_DEGREE: usize = 3;

impl BsplineBasis {
    pub fn new(knots: &KnotVector) -> Result<Self, SplineError> {
        knots.validate()?;
        let grid = knots.full_grid();
        let mut full = Vec::with_capacity(grid.len() + 6);
        for _ in 0..BSPLINE_DEGREE {
            full.push(grid[0]);
        }
        full.extend_from_slice(&grid);
        for _ in 0..BSPLINE_DEGREE {
            full.push(grid[grid.len() - 1]);
        }
        Ok(BsplineBasis {
            n_basis: grid.len() + BSPLINE_DEGREE - 1,
            lo: grid[0],
            hi: grid[grid.len() - 1],
            full,
        })
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    /// Basis row at `t`, clamped to the knot range. Exactly 4 consecutive
    /// entries are nonzero; the row sums to 1.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_basis);
        out.fill(0.0);
        let x = t.clamp(self.lo, self.hi);
        // Knot span index mu: full[mu] <= x < full[mu+1], with x = hi mapped
        // into the last nonempty span.
        let mut mu = self.full.len() - BSPLINE_DEGREE - 2;
        while mu > BSPLINE_DEGREE && x < self.full[mu] {
            mu -= 1;
        }
        // de Boor triangle for the 4 nonzero cubic basis values on the span.
        let mut n = [1.0f64, 0.0, 0.0, 0.0];
        let mut left = [0.0f64; 4];
        let mut right = [0.0f64; 4];
        for j in 1..=BSPLINE_DEGREE {
            left[j] = x - self.full[mu + 1 - j];
            right[j] = self.full[mu + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let term = if denom == 0.0 { 0.0 } else { n[r] / denom };
                n[r] = saved + right[r + 1] * term;
                saved = left[j - r] * term;
            }
            n[j] = saved;
        }
        for (r, &v) in n.iter().enumerate() {
            out[mu - BSPLINE_DEGREE + r] = v;
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_basis];
        self.eval_into(t, &mut out);
        out
    }
}

/// Cubic B-spline design row at `t` over the clamped knot grid.
pub fn bspline_design(t: f64, knots: &KnotVector, degree: usize) -> Result<Vec<f64>, SplineError> {
    if degree != BSPLINE_DEGREE {
        return Err(SplineError::UnsupportedDegree(degree));
    }
    Ok(BsplineBasis::new(knots)?.eval(t))
}

// ------------------------------------------------------------------- knots

/// `count` knots at evenly spaced quantiles of `times` (type-7 quantiles,
/// levels i/(count-1)). Collapsing ties are separated by a minimal upward
/// perturbation.
pub fn knots_from_quantiles(times: &[f64], count: usize) -> Result<KnotVector, SplineError> {
    if times.len() < 2 || count < 2 {
        return Err(SplineError::TooFewTimes { need: 2, got: times.len().min(count) });
    }
    let mut sorted: Vec<f64> = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(SplineError::DegenerateTimes { count });
    }
    let mut knots: Vec<f64> = (0..count)
        .map(|i| crate::stats::quantile_sorted(&sorted, i as f64 / (count - 1) as f64))
        .collect();
    let span = knots[count - 1] - knots[0];
    let eps = (span * 1e-9).max(1e-12);
    for i in 1..count {
        if knots[i] <= knots[i - 1] {
            knots[i] = knots[i - 1] + eps;
        }
    }
    KnotVector::new((knots[0], knots[count - 1]), knots[1..count - 1].to_vec())
}

// ----------------------------------------------------------------- penalty

/// Ridge added to the difference penalty to make it positive-definite.
pub const PENALTY_RIDGE: f64 = 1e-6;

/// Difference penalty M = D_r' D_r + ridge I for B-spline coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    pub dim: usize,
    pub order: usize,
    pub matrix: DMatrix<f64>,
    /// Rank of M; full after the ridge, and the exponent used by the
    /// smoothing prior and its conjugate update.
    pub rank: usize,
}

impl PenaltyMatrix {
    /// Quadratic form v' M v.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.dim);
        let mut total = 0.0;
        for i in 0..self.dim {
            let mut row = 0.0;
            for j in 0..self.dim {
                row += self.matrix[(i, j)] * v[j];
            }
            total += v[i] * row;
        }
        total
    }
}

/// r-th order difference matrix D_r of shape (dim - r) x dim.
pub fn difference_matrix(dim: usize, order: usize) -> DMatrix<f64> {
    let mut d = DMatrix::<f64>::identity(dim, dim);
    for _ in 0..order {
        let rows = d.nrows() - 1;
        let mut next = DMatrix::<f64>::zeros(rows, dim);
        for i in 0..rows {
            for j in 0..dim {
                next[(i, j)] = d[(i + 1, j)] - d[(i, j)];
            }
        }
        d = next;
    }
    d
}

pub fn difference_penalty(dim: usize, order: usize) -> Result<PenaltyMatrix, SplineError> {
    if order == 0 || dim <= order {
        return Err(SplineError::PenaltyDims { dim, order });
    }
    let d = difference_matrix(dim, order);
    let mut m = d.transpose() * &d;
    for i in 0..dim {
        m[(i, i)] += PENALTY_RIDGE;
    }
    Ok(PenaltyMatrix { dim, order, matrix: m, rank: dim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn knots4() -> KnotVector {
        KnotVector::new((0.0, 9.5), vec![1.8, 4.1]).unwrap()
    }

    /// Independent oracle: natural cubic spline interpolation through the 4
    /// knots by the classic tridiagonal second-derivative construction,
    /// linearly extended outside the boundary.
    struct NaturalInterpolant {
        x: [f64; 4],
        y: [f64; 4],
        m: [f64; 4], // second derivatives, m[0] = m[3] = 0
    }

    impl NaturalInterpolant {
        fn fit(x: [f64; 4], y: [f64; 4]) -> Self {
            let h = [x[1] - x[0], x[2] - x[1], x[3] - x[2]];
            // Solve the 2x2 tridiagonal system for interior second derivatives.
            let a11 = 2.0 * (h[0] + h[1]);
            let a12 = h[1];
            let a21 = h[1];
            let a22 = 2.0 * (h[1] + h[2]);
            let b1 = 6.0 * ((y[2] - y[1]) / h[1] - (y[1] - y[0]) / h[0]);
            let b2 = 6.0 * ((y[3] - y[2]) / h[2] - (y[2] - y[1]) / h[1]);
            let det = a11 * a22 - a12 * a21;
            let m1 = (b1 * a22 - a12 * b2) / det;
            let m2 = (a11 * b2 - b1 * a21) / det;
            NaturalInterpolant { x, y, m: [0.0, m1, m2, 0.0] }
        }

        fn eval(&self, t: f64) -> f64 {
            let (x, y, m) = (&self.x, &self.y, &self.m);
            if t <= x[0] {
                // Natural boundary: linear continuation with the boundary slope.
                let h = x[1] - x[0];
                let slope = (y[1] - y[0]) / h - h * (2.0 * m[0] + m[1]) / 6.0;
                return y[0] + slope * (t - x[0]);
            }
            if t >= x[3] {
                let h = x[3] - x[2];
                let slope = (y[3] - y[2]) / h + h * (m[2] + 2.0 * m[3]) / 6.0;
                return y[3] + slope * (t - x[3]);
            }
            let i = if t < x[1] { 0 } else if t < x[2] { 1 } else { 2 };
            let h = x[i + 1] - x[i];
            let a = (x[i + 1] - t) / h;
            let b = (t - x[i]) / h;
            a * y[i]
                + b * y[i + 1]
                + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0
        }
    }

    #[test]
    fn ncs_spans_the_natural_spline_space() {
        // Fit intercept + 3 basis columns through 4 knot values and compare
        // with the independent interpolation oracle on a dense grid that
        // includes both extrapolation regions.
        let kv = knots4();
        let basis = NcsBasis::new(&kv).unwrap();
        let x = [0.0, 1.8, 4.1, 9.5];
        let y = [2.0, 2.6, 2.1, 3.9];
        let oracle = NaturalInterpolant::fit(x, y);

        // Solve the 4x4 system [1, C(x_i)] coef = y_i.
        let mut a = nalgebra::DMatrix::<f64>::zeros(4, 4);
        for (i, &xi) in x.iter().enumerate() {
            let c = basis.eval(xi);
            a[(i, 0)] = 1.0;
            a[(i, 1)] = c[0];
            a[(i, 2)] = c[1];
            a[(i, 3)] = c[2];
        }
        let rhs = nalgebra::DVector::from_row_slice(&y);
        let coef = a.lu().solve(&rhs).expect("basis columns independent");

        let mut t = -2.0;
        while t <= 12.5 {
            let c = basis.eval(t);
            let ours = coef[0] + coef[1] * c[0] + coef[2] * c[1] + coef[3] * c[2];
            assert_relative_eq!(ours, oracle.eval(t), epsilon = 1e-9, max_relative = 1e-9);
            t += 0.03;
        }
    }

    #[test]
    fn ncs_zero_at_lower_boundary_and_matches_truncated_powers() {
        // Independent restatement of the truncated-power construction with
        // the natural constraint, written directly from the piecewise-cubic
        // definition rather than the difference form used in `raw`.
        let kv = knots4();
        let basis = NcsBasis::new(&kv).unwrap();
        let xi = [0.0, 1.8, 4.1, 9.5];
        let range = xi[3] - xi[0];
        let pos_cube = |x: f64| if x > 0.0 { x * x * x } else { 0.0 };
        let d = |j: usize, t: f64| {
            (pos_cube(t - xi[j]) - pos_cube(t - xi[3])) / (xi[3] - xi[j])
        };
        let at_lower = basis.eval(xi[0]);
        assert_eq!(at_lower, [0.0, 0.0, 0.0]);
        let mut t = -1.0;
        while t <= 11.0 {
            let b = basis.eval(t);
            assert_relative_eq!(b[0], (t - xi[0]) / range, epsilon = 1e-12);
            assert_relative_eq!(
                b[1],
                (d(0, t) - d(2, t)) / (range * range),
                epsilon = 1e-12,
                max_relative = 1e-12
            );
            assert_relative_eq!(
                b[2],
                (d(1, t) - d(2, t)) / (range * range),
                epsilon = 1e-12,
                max_relative = 1e-12
            );
            t += 0.21;
        }
    }

    #[test]
    fn conditioned_basis_whitens_the_supplied_times() {
        // Skewed sample of times; the conditioned columns must have zero
        // empirical mean and identity empirical covariance over exactly that
        // sample, and relate to the default columns by the reported affine
        // map.
        let kv = knots4();
        let basis = NcsBasis::new(&kv).unwrap();
        let times: Vec<f64> = (0..300).map(|i| 9.5 * (i as f64 / 299.0).powi(2)).collect();
        let cond = basis.conditioned_on(&times).unwrap();

        let n = times.len() as f64;
        let mut mean = [0.0f64; 3];
        let mut cov = [[0.0f64; 3]; 3];
        for &t in &times {
            let b = cond.eval(t);
            for k in 0..3 {
                mean[k] += b[k] / n;
                for l in 0..3 {
                    cov[k][l] += b[k] * b[l] / n;
                }
            }
        }
        for k in 0..3 {
            assert!(mean[k].abs() < 1e-9, "column {k} mean {}", mean[k]);
            for l in 0..3 {
                let want = if k == l { 1.0 } else { 0.0 };
                assert!(
                    (cov[k][l] - mean[k] * mean[l] - want).abs() < 1e-8,
                    "cov[{k}][{l}] = {}",
                    cov[k][l]
                );
            }
        }

        let (mu, w) = cond.affine();
        for &t in &[-0.7, 0.4, 3.3, 8.0, 12.1] {
            let raw = basis.eval(t);
            let got = cond.eval(t);
            for k in 0..3 {
                let want: f64 = (0..=k).map(|j| w[k][j] * (raw[j] - mu[j])).sum();
                assert_relative_eq!(got[k], want, epsilon = 1e-12, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn conditioned_basis_rejects_degenerate_times() {
        let basis = NcsBasis::new(&knots4()).unwrap();
        assert!(matches!(
            basis.conditioned_on(&[1.0, 2.0]),
            Err(SplineError::TooFewTimes { need: 4, got: 2 })
        ));
        assert!(matches!(
            basis.conditioned_on(&[2.0; 50]),
            Err(SplineError::DegenerateConditioning)
        ));
    }

    #[test]
    fn ncs_design_wrapper_matches_basis() {
        let kv = knots4();
        assert_eq!(ncs_design(3.3, &kv).unwrap(), NcsBasis::new(&kv).unwrap().eval(3.3));
        let bad = KnotVector { boundary: (0.0, 10.0), interior: vec![1.0, 2.0, 3.0] };
        assert!(matches!(ncs_design(1.0, &bad), Err(SplineError::WrongInteriorCount(3))));
    }

    #[test]
    fn ncs_linear_beyond_boundaries() {
        // Second finite difference of three collinear points vanishes; the
        // whole 1.4-wide window must lie outside the boundary knots.
        let basis = NcsBasis::new(&knots4()).unwrap();
        for t0 in [9.5, 11.0, 25.0, -1.4, -4.0] {
            let (a, b, c) = (basis.eval(t0), basis.eval(t0 + 0.7), basis.eval(t0 + 1.4));
            for p in 0..3 {
                let second = a[p] - 2.0 * b[p] + c[p];
                assert!(second.abs() < 1e-10, "nonlinear tail at {t0}, col {p}: {second}");
            }
        }
    }

    #[test]
    fn ncs_second_derivative_vanishes_at_boundary() {
        let basis = NcsBasis::new(&knots4()).unwrap();
        let h = 1e-4;
        for t in [0.0, 9.5] {
            let (a, b, c) = (basis.eval(t - h), basis.eval(t), basis.eval(t + h));
            for p in 0..3 {
                let dd = (a[p] - 2.0 * b[p] + c[p]) / (h * h);
                assert!(dd.abs() < 1e-8 / h / h * h * h + 1e-3, "boundary curvature {dd}");
            }
        }
    }

    #[test]
    fn ncs_negative_time_is_finite_linear() {
        // Below the lower boundary every column continues along the exact
        // tangent it has at the boundary itself.
        let basis = NcsBasis::new(&knots4()).unwrap();
        let v = basis.eval(-0.5);
        assert!(v.iter().all(|x| x.is_finite()));
        let h = 1e-6;
        let at0 = basis.eval(0.0);
        let slope: Vec<f64> = basis
            .eval(h)
            .iter()
            .zip(at0)
            .map(|(a, b)| (a - b) / h)
            .collect();
        for k in 0..3 {
            assert_relative_eq!(v[k], at0[k] - 0.5 * slope[k], epsilon = 1e-6);
        }
    }

    /// Independent oracle: textbook recursive Cox-de Boor definition with
    /// half-open intervals (closed at the final knot).
    fn cox_de_boor(i: usize, k: usize, x: f64, knots: &[f64]) -> f64 {
        if k == 0 {
            let last = knots[knots.len() - 1];
            let hit = (knots[i] <= x && x < knots[i + 1])
                || (x == last && knots[i] < knots[i + 1] && knots[i + 1] == last);
            return if hit { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + k] - knots[i];
        if d1 > 0.0 {
            v += (x - knots[i]) / d1 * cox_de_boor(i, k - 1, x, knots);
        }
        let d2 = knots[i + k + 1] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + k + 1] - x) / d2 * cox_de_boor(i + 1, k - 1, x, knots);
        }
        v
    }

    fn grid10() -> KnotVector {
        KnotVector::new((0.0, 12.0), vec![0.9, 1.5, 2.2, 3.0, 3.9, 5.0, 6.5, 8.5]).unwrap()
    }

    #[test]
    fn bspline_matches_recursion_oracle() {
        let kv = grid10();
        let basis = BsplineBasis::new(&kv).unwrap();
        assert_eq!(basis.n_basis(), 12);
        let full: Vec<f64> = basis.full.clone();
        let mut t = 0.0;
        while t <= 12.0 {
            let ours = basis.eval(t);
            for i in 0..basis.n_basis() {
                let want = cox_de_boor(i, 3, t, &full);
                assert!((ours[i] - want).abs() < 1e-12, "basis {i} at {t}: {} vs {want}", ours[i]);
            }
            t += 0.0625;
        }
    }

    #[test]
    fn bspline_design_wrapper() {
        let kv = grid10();
        assert_eq!(bspline_design(1.0, &kv, 3).unwrap().len(), 12);
        assert!(matches!(bspline_design(1.0, &kv, 2), Err(SplineError::UnsupportedDegree(2))));
    }

    #[test]
    fn bspline_clamps_beyond_boundary() {
        let basis = BsplineBasis::new(&grid10()).unwrap();
        assert_eq!(basis.eval(15.0), basis.eval(12.0));
        assert_eq!(basis.eval(-1.0), basis.eval(0.0));
        // At the top boundary the last basis function is 1.
        let top = basis.eval(12.0);
        assert_relative_eq!(top[11], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bspline_local_support_at_interior_knot() {
        let basis = BsplineBasis::new(&grid10()).unwrap();
        let at_knot = basis.eval(2.2);
        let nonzero = at_knot.iter().filter(|v| **v != 0.0).count();
        assert!(nonzero <= 4, "{nonzero} nonzero values at an interior knot");
    }

    proptest! {
        #[test]
        fn bspline_partition_of_unity(t in 0.0f64..12.0) {
            let basis = BsplineBasis::new(&grid10()).unwrap();
            let row = basis.eval(t);
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|v| *v >= 0.0));
        }

        #[test]
        fn penalty_quadratic_form_is_sum_of_squared_diffs(
            v in proptest::collection::vec(-5.0f64..5.0, 12)
        ) {
            let pen = difference_penalty(12, 2).unwrap();
            let mut want = 0.0;
            for i in 0..10 {
                let d = v[i + 2] - 2.0 * v[i + 1] + v[i];
                want += d * d;
            }
            let ridge: f64 = v.iter().map(|x| x * x).sum::<f64>() * PENALTY_RIDGE;
            prop_assert!((pen.quadratic_form(&v) - (want + ridge)).abs() < 1e-9);
        }
    }

    #[test]
    fn penalty_first_order_small_case() {
        let pen = difference_penalty(3, 1).unwrap();
        // D1 = [[-1,1,0],[0,-1,1]]; M = D1'D1 + ridge I.
        let want = [1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                let ridge = if i == j { PENALTY_RIDGE } else { 0.0 };
                assert_relative_eq!(pen.matrix[(i, j)], want[3 * i + j] + ridge, epsilon = 1e-15);
            }
        }
        assert_eq!(pen.rank, 3);
    }

    #[test]
    fn penalty_eigen_structure() {
        // Before the ridge, D2'D2 on 12 coefficients has exactly 2 zero
        // eigenvalues (constants and linear trends are unpenalized).
        let d = difference_matrix(12, 2);
        let raw = d.transpose() * &d;
        let eig = raw.symmetric_eigen();
        let zeros = eig.eigenvalues.iter().filter(|l| l.abs() < 1e-9).count();
        assert_eq!(zeros, 2);
        // After the ridge, strictly positive-definite.
        let pen = difference_penalty(12, 2).unwrap();
        let eig = pen.matrix.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|l| *l >= PENALTY_RIDGE - 1e-12));
    }

    #[test]
    fn penalty_rejects_bad_dims() {
        assert!(difference_penalty(2, 2).is_err());
        assert!(difference_penalty(5, 0).is_err());
    }

    #[test]
    fn quantile_knots_uniform_case() {
        let times: Vec<f64> = (0..=10).map(f64::from).collect();
        let kv = knots_from_quantiles(&times, 3).unwrap();
        assert_eq!(kv.boundary, (0.0, 10.0));
        assert_eq!(kv.interior, vec![5.0]);
    }

    #[test]
    fn quantile_knots_eleven_from_skewed_times() {
        // Event-time-like sample: mixture of early and late times.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let times: Vec<f64> = (0..500)
            .map(|_| {
                let e: f64 = rng.gen::<f64>();
                12.0 * e * e
            })
            .collect();
        let kv = knots_from_quantiles(&times, 11).unwrap();
        let grid = kv.full_grid();
        assert_eq!(grid.len(), 11);
        for w in grid.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn quantile_knots_dedup_ties() {
        let times = vec![0.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 10.0];
        let kv = knots_from_quantiles(&times, 5).unwrap();
        let grid = kv.full_grid();
        for w in grid.windows(2) {
            assert!(w[1] > w[0], "tied knots not separated: {grid:?}");
        }
    }

    #[test]
    fn quantile_knots_degenerate_times() {
        let times = vec![3.0; 20];
        assert!(matches!(
            knots_from_quantiles(&times, 3),
            Err(SplineError::DegenerateTimes { count: 3 })
        ));
    }
}
