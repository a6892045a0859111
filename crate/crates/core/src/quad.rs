//! One-dimensional quadrature rules used by the deterministic checks.
//!
//! [`gauss_kronrod`] is a globally adaptive 7/15-point Gauss-Kronrod scheme
//! (bisect the interval with the largest error estimate until the summed
//! estimate meets the tolerance). [`tanh_sinh`] is the double-exponential
//! rule, which handles integrable endpoint singularities such as `log x` or
//! `x^{-1/2}` far better than any polynomial rule.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Outcome of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl QuadResult {
    /// Turns a non-converged result into [`Error::QuadratureNonConvergence`].
    pub fn into_result(self) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::QuadratureNonConvergence {
                value: self.value,
                error: self.error,
            })
        }
    }
}

/// Tolerances for adaptive rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    /// Maximum number of subintervals (Gauss-Kronrod) or levels (tanh-sinh).
    pub limit: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            limit: 2000,
        }
    }

    pub const fn with_limit(self, limit: usize) -> Self {
        Self { limit, ..self }
    }

    #[inline]
    fn met(&self, value: f64, error: f64) -> bool {
        error <= self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-10, 1e-10)
    }
}

// Nodes and weights of the 15-point Kronrod extension of the 7-point
// Gauss-Legendre rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn qk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        resk += WGK[j] * sum;
        if j % 2 == 1 {
            resg += WG[j / 2] * sum;
        }
    }
    let value = resk * half;
    let err = ((resk - resg) * half).abs();
    (value, err)
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod quadrature of `f` over `[a, b]`.
pub fn gauss_kronrod<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> QuadResult {
    if a == b {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
            converged: true,
        };
    }
    let (value, error) = qk15(&mut f, a, b);
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    while !tol.met(total, total_err) && heap.len() < tol.limit {
        let seg = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval exhausted at machine precision.
            heap.push(seg);
            break;
        }
        let (v1, e1) = qk15(&mut f, seg.a, mid);
        let (v2, e2) = qk15(&mut f, mid, seg.b);
        evaluations += 30;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum to shed the drift of the running totals.
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    QuadResult {
        value,
        error,
        evaluations,
        converged: tol.met(value, error),
    }
}

/// Gauss-Kronrod over `[a, b]` split at the given interior breakpoints.
pub fn gauss_kronrod_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    tol: Tolerance,
) -> QuadResult {
    let mut out = QuadResult {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
        converged: true,
    };
    let pieces = points.len().saturating_sub(1).max(1) as f64;
    let piece_tol = Tolerance {
        abs: tol.abs / pieces,
        ..tol
    };
    for w in points.windows(2) {
        let r = gauss_kronrod(&mut f, w[0], w[1], piece_tol);
        out.value += r.value;
        out.error += r.error;
        out.evaluations += r.evaluations;
        out.converged &= r.converged;
    }
    out
}

/// Tanh-sinh quadrature over the finite interval `[a, b]`.
///
/// The integrand is never evaluated at the endpoints, so integrable
/// endpoint singularities are fine. Refinement halves the step until two
/// successive levels agree to the tolerance.
pub fn tanh_sinh<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> QuadResult {
    use std::f64::consts::FRAC_PI_2;
    if a == b {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
            converged: true,
        };
    }
    let d = 0.5 * (b - a);
    // Abscissae beyond |t| = 4 sit within 1e-300 of the endpoints.
    let t_max = 4.0;
    let mut evaluations = 0;
    let mut eval_at = |t: f64, f: &mut F| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cosh_u = u.cosh();
        // 1 - tanh(u) = 2 / (e^{2u} + 1) keeps the endpoint gap accurate.
        let gap = 1.0 / (cosh_u * cosh_u);
        let w = FRAC_PI_2 * t.cosh() * gap;
        if w == 0.0 || !w.is_finite() {
            return 0.0;
        }
        let comp = 2.0 / ((2.0 * u).exp() + 1.0);
        let mut s = 0.0;
        let xr = b - d * comp;
        let xl = a + d * comp;
        if xr > a && xr < b {
            s += f(xr);
        }
        if t != 0.0 && xl > a && xl < b {
            s += f(xl);
        }
        evaluations += 2;
        w * s
    };
    let mut h = 1.0;
    let mut sum = eval_at(0.0, &mut f);
    let mut k = 1;
    while k as f64 * h <= t_max {
        sum += eval_at(k as f64 * h, &mut f);
        k += 1;
    }
    let mut estimate = d * h * sum;
    let mut error = f64::INFINITY;
    let mut converged = false;
    for _level in 0..tol.limit.min(12) {
        h *= 0.5;
        let mut k = 1;
        let mut new = 0.0;
        while k as f64 * h <= t_max {
            new += eval_at(k as f64 * h, &mut f);
            k += 2;
        }
        sum += new;
        let refined = d * h * sum;
        error = (refined - estimate).abs();
        estimate = refined;
        if tol.met(estimate, error) {
            converged = true;
            break;
        }
    }
    QuadResult {
        value: estimate,
        error,
        evaluations,
        converged,
    }
}
