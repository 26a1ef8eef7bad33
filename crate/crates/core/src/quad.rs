//! Fixed 15-point quadrature panels.
//!
//! All cumulative-hazard and incidence integrals in this crate use a
//! 15-point rule, either as a single panel on a short interval or
//! subdivided into roughly year-long panels on long ones. The node and
//! weight constants are chosen so the rule is exact for polynomials up to
//! degree 29 on any interval after the affine rescale (the highest degree
//! attainable with 15 points).

use alloc::vec::Vec;

/// Nonnegative abscissae on [-1, 1], descending (the rule is symmetric
/// about the center; 0 is the center point).
pub const NODES: [f64; 8] = [
    0.987_992_518_020_485_428_489_565_7,
    0.937_273_392_400_705_904_307_758_9,
    0.848_206_583_410_427_216_200_648_3,
    0.724_417_731_360_170_047_416_186_1,
    0.570_972_172_608_538_847_537_226_7,
    0.394_151_347_077_563_369_897_207_4,
    0.201_194_093_997_434_522_300_628_3,
    0.0,
];

/// Weights matching `NODES`.
pub const WEIGHTS: [f64; 8] = [
    0.030_753_241_996_117_268_354_628_39,
    0.070_366_047_488_108_124_709_267_42,
    0.107_159_220_467_171_935_011_869_5,
    0.139_570_677_926_154_314_447_804_8,
    0.166_269_205_816_993_933_553_200_9,
    0.186_161_000_015_562_211_026_800_6,
    0.198_431_485_327_111_576_456_118_3,
    0.202_578_241_925_561_272_880_620_2,
];

/// Number of evaluation points per panel.
pub const N_POINTS: usize = 15;

/// Evaluation nodes and weights of the 15-point rule on `[a, b]`, in
/// ascending node order. Weights sum to `b - a`.
pub fn nodes_weights(a: f64, b: f64) -> [(f64, f64); N_POINTS] {
    let center = 0.5 * (a + b);
    let half_len = 0.5 * (b - a);
    let mut out = [(0.0, 0.0); N_POINTS];
    for j in 0..7 {
        let abscissa = half_len * NODES[j];
        let w = WEIGHTS[j] * half_len;
        out[j] = (center - abscissa, w);
        out[N_POINTS - 1 - j] = (center + abscissa, w);
    }
    out[7] = (center, WEIGHTS[7] * half_len);
    out
}

/// Integral of `f` over `[a, b]` with a single 15-point panel.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    let mut sum = 0.0;
    for (x, w) in nodes_weights(a, b) {
        sum += w * f(x);
    }
    sum
}

/// Panel boundaries for integrating over `[a, b]`: a single panel when the
/// interval is at most `max_panel_len` years, otherwise equal panels of at
/// most one year.
pub fn panel_edges(a: f64, b: f64, max_panel_len: f64) -> Vec<f64> {
    debug_assert!(b >= a);
    let len = b - a;
    let n_panels = if len <= max_panel_len {
        1
    } else {
        num_traits::Float::ceil(len).max(1.0) as usize
    };
    let mut edges = Vec::with_capacity(n_panels + 1);
    for i in 0..=n_panels {
        edges.push(a + len * (i as f64) / (n_panels as f64));
    }
    edges
}

/// Integral of `f` over `[a, b]` with year-long panel subdivision on long
/// intervals (single panel when `b - a <= 2`).
pub fn integrate_panels<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    let edges = panel_edges(a, b, 2.0);
    let mut sum = 0.0;
    for pair in edges.windows(2) {
        sum += integrate(&mut f, pair[0], pair[1]);
    }
    sum
}
