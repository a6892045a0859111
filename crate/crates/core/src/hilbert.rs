//! Principal-value integrals against `1/(x - a)` and the Hilbert transform
//! `(Hf)(a) = (1/π) v.p. ∫ f(x) / (x - a) dx`.
//!
//! A [`SampledFunction`] stands for the piecewise-linear interpolant of its
//! node values. Outside the grid it either ramps to zero over one cell
//! ([`Tail::Zero`]) or continues as `c / (x - m)` matched to the end values
//! ([`Tail::Reciprocal`]), which is the far field of the transform of any
//! compactly supported function. All integrals below are exact for that
//! representation, so the transform at the nodes reduces to a Toeplitz
//! product with the weights `K(d) = ∫ hat(u - d) / u du`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use log::warn;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ladder::{EpsLadder, PVEstimate, DEFAULT_PV_TOL};

/// Relative size of the end values above which a function is not treated
/// as compactly supported.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Behaviour of a sampled function beyond its grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Tail {
    /// Linear ramp to zero over one cell on each side.
    Zero,
    /// `g_end (x_end - center) / (x - center)` beyond each end.
    Reciprocal { center: f64 },
}

/// Values on the uniform grid `x_i = x_min + i h`, `i = 0..m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    x_min: f64,
    x_max: f64,
    values: Vec<f64>,
    tail: Tail,
}

impl SampledFunction {
    pub fn new(x_min: f64, x_max: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidArgument("need at least two samples".into()));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "grid needs x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("samples must be finite".into()));
        }
        let f = Self {
            x_min,
            x_max,
            values,
            tail: Tail::Zero,
        };
        if !f.is_compactly_supported() {
            warn!(
                "sampled function on [{x_min}, {x_max}] does not vanish at the grid ends"
            );
        }
        Ok(f)
    }

    /// Samples `f` at `m` equispaced nodes spanning `[x_min, x_max]`.
    pub fn from_fn<F: Fn(f64) -> f64>(x_min: f64, x_max: f64, m: usize, f: F) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument("need at least two samples".into()));
        }
        let h = (x_max - x_min) / (m - 1) as f64;
        Self::new(x_min, x_max, (0..m).map(|i| f(x_min + i as f64 * h)).collect())
    }

    pub fn with_tail(mut self, tail: Tail) -> Result<Self> {
        if let Tail::Reciprocal { center } = tail {
            if !(center > self.x_min && center < self.x_max) {
                return Err(Error::InvalidArgument(format!(
                    "tail center {center} must lie inside ({}, {})",
                    self.x_min, self.x_max
                )));
            }
        }
        self.tail = tail;
        Ok(self)
    }

    fn same_grid(&self, values: Vec<f64>, tail: Tail) -> Self {
        Self {
            x_min: self.x_min,
            x_max: self.x_max,
            values,
            tail,
        }
    }

    #[inline]
    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    #[inline]
    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.values.len() - 1) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.values.len() {
            self.x_max
        } else {
            self.x_min + i as f64 * self.spacing()
        }
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn tail(&self) -> Tail {
        self.tail
    }

    pub fn is_compactly_supported(&self) -> bool {
        let max = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ends = self.values[0].abs().max(self.values[self.values.len() - 1].abs());
        ends <= SUPPORT_TOL * max || max == 0.0
    }

    /// Tail coefficients `(c_left, c_right, center)` for reciprocal tails.
    fn tail_coefficients(&self) -> Option<(f64, f64, f64)> {
        match self.tail {
            Tail::Zero => None,
            Tail::Reciprocal { center } => {
                let m = self.values.len();
                Some((
                    self.values[0] * (self.x_min - center),
                    self.values[m - 1] * (self.x_max - center),
                    center,
                ))
            }
        }
    }

    /// Value of the represented function at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let m = self.values.len();
        let h = self.spacing();
        if x < self.x_min || x > self.x_max {
            return match self.tail_coefficients() {
                Some((cl, cr, c)) => {
                    if x < self.x_min {
                        cl / (x - c)
                    } else {
                        cr / (x - c)
                    }
                }
                None => {
                    let (end, gap) = if x < self.x_min {
                        (self.values[0], self.x_min - x)
                    } else {
                        (self.values[m - 1], x - self.x_max)
                    };
                    if gap < h {
                        end * (1.0 - gap / h)
                    } else {
                        0.0
                    }
                }
            };
        }
        let u = (x - self.x_min) / h;
        let j = (u.floor() as usize).min(m - 2);
        let t = u - j as f64;
        self.values[j] * (1.0 - t) + self.values[j + 1] * t
    }

    /// `∫ f^2` of the represented function, tails included.
    pub fn l2_norm_sq(&self) -> f64 {
        let h = self.spacing();
        let v = &self.values;
        let inner: f64 = v
            .windows(2)
            .map(|w| (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]) * h / 3.0)
            .sum();
        let outer = match self.tail_coefficients() {
            None => (v[0] * v[0] + v[v.len() - 1] * v[v.len() - 1]) * h / 3.0,
            Some((cl, cr, c)) => cl * cl / (c - self.x_min) + cr * cr / (self.x_max - c),
        };
        inner + outer
    }

    /// Sum of a linear combination, node by node (same grid and tail model).
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        if self.len() != other.len() || self.x_min != other.x_min || self.x_max != other.x_max {
            return Err(Error::InvalidArgument("grids differ".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(self.same_grid(values, self.tail))
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        self.same_grid(self.values.iter().map(|v| alpha * v).collect(), self.tail)
    }

    /// Writes `x,value` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e}", self.x(i), v)?;
        }
        Ok(())
    }

    /// Reads `x,value` rows written by [`write_csv`](Self::write_csv). The
    /// abscissae must be equispaced.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (k, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::InvalidArgument(e.to_string()))?;
            if k == 0 {
                if line.trim() != "x,value" {
                    return Err(Error::InvalidArgument(format!("bad header {line:?}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("bad row {}: {line:?}", k + 1)))
            };
            xs.push(parse(it.next())?);
            vs.push(parse(it.next())?);
        }
        if xs.len() < 2 {
            return Err(Error::InvalidArgument("need at least two rows".into()));
        }
        let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        for (i, x) in xs.iter().enumerate() {
            if (x - (xs[0] + i as f64 * h)).abs() > 1e-9 * h.max(x.abs()) {
                return Err(Error::InvalidArgument("abscissae are not equispaced".into()));
            }
        }
        Self::new(xs[0], xs[xs.len() - 1], vs)
    }
}

/// `v.p. ∫_a^b dx / (c - x) = log((c - a) / (b - c))`.
pub fn pv_log_integral(a: f64, c: f64, b: f64) -> Result<f64> {
    if !(a < c && c < b) {
        return Err(Error::OrderViolation { a, c, b });
    }
    Ok(((c - a) / (b - c)).ln())
}

/// `ln(1 + z) / z`, continuous at 0.
fn ln1p_over(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - 0.5 * z
    } else {
        z.ln_1p() / z
    }
}

/// `∫_p^∞ dx / ((x - m)(x - a))` for `p > max(m, a)`.
fn right_tail_integral(p: f64, m: f64, a: f64) -> f64 {
    let z = (m - a) / (p - m);
    if z.abs() < 0.5 {
        ln1p_over(z) / (p - m)
    } else {
        // Near-cancelling 1 + z is better formed from the differences.
        ((p - m) / (p - a)).ln() / (a - m)
    }
}

/// `∫_{-∞}^q dx / ((x - m)(x - a))` for `q < min(m, a)`.
fn left_tail_integral(q: f64, m: f64, a: f64) -> f64 {
    let z = (m - a) / (q - m);
    if z.abs() < 0.5 {
        -ln1p_over(z) / (q - m)
    } else {
        ((q - a) / (q - m)).ln() / (a - m)
    }
}

/// `∫_u^v (α + β (x - a)) / (x - a) dx` with `[u, v]` on one side of `a`.
#[inline]
fn linear_piece(alpha: f64, beta: f64, u: f64, v: f64, a: f64) -> f64 {
    alpha * ((v - a) / (u - a)).ln() + beta * (v - u)
}

/// Integral of the linear piece through `(x0, f0)`, `(x1, f1)` over the part
/// of `[x0, x1]` with `|x - a| >= eps`.
fn excluded_piece(x0: f64, f0: f64, x1: f64, f1: f64, a: f64, eps: f64) -> f64 {
    let beta = (f1 - f0) / (x1 - x0);
    let alpha = f0 + beta * (a - x0);
    let mut acc = 0.0;
    let left_end = x1.min(a - eps);
    if left_end > x0 {
        acc += linear_piece(alpha, beta, x0, left_end, a);
    }
    let right_start = x0.max(a + eps);
    if x1 > right_start {
        acc += linear_piece(alpha, beta, right_start, x1, a);
    }
    acc
}

/// `∫_{|x - a| >= eps} f(x) / (x - a) dx` for the represented function.
pub fn pv_excluding(f: &SampledFunction, a: f64, eps: f64) -> f64 {
    let m = f.len();
    let h = f.spacing();
    let v = f.values();
    let mut acc = 0.0;
    for j in 0..m - 1 {
        acc += excluded_piece(f.x(j), v[j], f.x(j + 1), v[j + 1], a, eps);
    }
    match f.tail_coefficients() {
        None => {
            acc += excluded_piece(f.x_min - h, 0.0, f.x_min, v[0], a, eps);
            acc += excluded_piece(f.x_max, v[m - 1], f.x_max + h, 0.0, a, eps);
        }
        Some((cl, cr, c)) => {
            let p = f.x_max.max(a + eps);
            if cr != 0.0 {
                acc += cr * right_tail_integral(p, c, a);
            }
            let q = f.x_min.min(a - eps);
            if cl != 0.0 {
                acc += cl * left_tail_integral(q, c, a);
            }
        }
    }
    acc
}

/// Cut-off ladder for `v.p. ∫ f(x) / (x - a) dx`. Each rung integrates the
/// interpolant exactly over `|x - a| >= ε_k`; the smallest cut-off must be
/// at least two grid cells.
pub fn pv_quadrature(f: &SampledFunction, a: f64, ladder: &EpsLadder) -> Result<PVEstimate> {
    if !(a > f.x_min && a < f.x_max) {
        return Err(Error::SingularityOffGrid {
            a,
            lo: f.x_min,
            hi: f.x_max,
        });
    }
    let floor = 2.0 * f.spacing();
    if ladder.smallest() < floor * (1.0 - 1e-12) {
        return Err(Error::LadderTooFine {
            eps: ladder.smallest(),
            floor,
        });
    }
    let rungs = ladder.rungs().iter().map(|&e| pv_excluding(f, a, e)).collect();
    Ok(PVEstimate::from_rungs(ladder, rungs, DEFAULT_PV_TOL))
}

/// `K(d) = ∫ hat(u - d) / u du` (principal value at `d = 0, ±1`).
pub fn hat_kernel(d: i64) -> f64 {
    let s = d.signum() as f64;
    let d = d.unsigned_abs();
    let k = match d {
        0 => 0.0,
        1 => 2.0 * std::f64::consts::LN_2,
        2..=19 => {
            let d = d as f64;
            (d + 1.0) * (1.0 / d).ln_1p() - (d - 1.0) * (1.0 / (d - 1.0)).ln_1p()
        }
        _ => {
            // (1/d) Σ_k 2 / ((2k+1)(2k+2)) d^{-2k}
            let d = d as f64;
            let inv2 = 1.0 / (d * d);
            let mut term = 1.0;
            let mut sum = 0.0;
            for k in 0..10 {
                let kf = k as f64;
                sum += 2.0 / ((2.0 * kf + 1.0) * (2.0 * kf + 2.0)) * term;
                term *= inv2;
            }
            sum / d
        }
    };
    s * k
}

/// `S_i = Σ_j g_j K(j - i)`, computed directly.
fn hat_correlation_direct(g: &[f64]) -> Vec<f64> {
    let m = g.len();
    let kernel: Vec<f64> = (0..m as i64).map(hat_kernel).collect();
    (0..m)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for (j, &gj) in g.iter().enumerate() {
                if j > i {
                    acc += gj * kernel[j - i];
                } else if j < i {
                    acc -= gj * kernel[i - j];
                }
            }
            acc
        })
        .collect()
}

/// Same as [`hat_correlation_direct`] by zero-padded FFT convolution.
fn hat_correlation_fft(g: &[f64]) -> Vec<f64> {
    let m = g.len();
    let n = (2 * m).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut a: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); n];
    for (k, &v) in g.iter().enumerate() {
        a[k] = Complex::new(v, 0.0);
    }
    // S_i = Σ_j g_j K(j - i) = Σ_j g_j R(i - j) with R(t) = K(-t) = -K(t).
    let mut b: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); n];
    for t in 1..m {
        let k = hat_kernel(t as i64);
        b[t] = Complex::new(-k, 0.0);
        b[n - t] = Complex::new(k, 0.0);
    }
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= *y;
    }
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    a[..m].iter().map(|c| c.re * scale).collect()
}

fn transform_with(f: &SampledFunction, correlate: fn(&[f64]) -> Vec<f64>) -> SampledFunction {
    let g = f.values();
    let m = g.len();
    let h = f.spacing();
    let mut s = correlate(g);
    if let Some((cl, cr, c)) = f.tail_coefficients() {
        let (gl, gr) = (g[0], g[m - 1]);
        for (i, si) in s.iter_mut().enumerate() {
            let a = f.x(i);
            if i == 0 {
                // Inner half-hat and left tail are individually divergent.
                *si += -gl * (1.0 + ((c - f.x_min) / h).ln());
            } else {
                // Remove the outer half of the first hat (offset d = -i).
                let i_f = i as f64;
                *si -= gl * (1.0 - (i_f + 1.0) * (1.0 / i_f).ln_1p());
                *si += cl * left_tail_integral(f.x_min, c, a);
            }
            if i == m - 1 {
                *si += gr * (1.0 + ((f.x_max - c) / h).ln());
            } else {
                let d = (m - 1 - i) as f64;
                *si -= gr * ((d + 1.0) * (1.0 / d).ln_1p() - 1.0);
                *si += cr * right_tail_integral(f.x_max, c, a);
            }
        }
    }
    for v in &mut s {
        *v /= PI;
    }
    let center = 0.5 * (f.x_min + f.x_max);
    f.same_grid(s, Tail::Reciprocal { center })
}

/// Hilbert transform at every node by direct Toeplitz summation.
///
/// The result carries a reciprocal tail, the far field `-(∫f) / (π x)` of
/// the transform.
pub fn hilbert_transform(f: &SampledFunction) -> SampledFunction {
    transform_with(f, hat_correlation_direct)
}

/// Same as [`hilbert_transform`] with an FFT convolution, `O(m log m)`.
pub fn hilbert_transform_fft(f: &SampledFunction) -> SampledFunction {
    transform_with(f, hat_correlation_fft)
}

/// `H^{-1} = -H` on `L^2`.
pub fn hilbert_inverse(g: &SampledFunction) -> SampledFunction {
    hilbert_transform(g).scaled(-1.0)
}

/// The transform at an arbitrary point `a` (not necessarily a node), as the
/// limit of [`pv_excluding`] computed with the singular cell split at `a`.
pub fn hilbert_at(f: &SampledFunction, a: f64) -> f64 {
    // Inside one cell the linear piece through a contributes α ln|·| terms
    // that cancel symmetrically; a cut-off far below the cell width leaves
    // only rounding.
    let eps = 1e-9 * f.spacing();
    pv_excluding(f, a, eps) / PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{gauss_kronrod, Tolerance};

    fn lorentz() -> SampledFunction {
        SampledFunction::from_fn(-40.0, 40.0, 8001, |x| 1.0 / (1.0 + x * x)).unwrap()
    }

    fn bump() -> SampledFunction {
        SampledFunction::from_fn(-40.0, 40.0, 8001, |x| (-x * x).exp()).unwrap()
    }

    #[test]
    fn log_integral_examples() {
        assert_eq!(pv_log_integral(0.0, 1.0, 2.0).unwrap(), 0.0);
        assert!((pv_log_integral(0.0, 1.0, 3.0).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        assert!((pv_log_integral(-1.0, 0.0, std::f64::consts::E).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(
            pv_log_integral(1.0, 0.0, 2.0),
            Err(Error::OrderViolation { .. })
        ));
    }

    #[test]
    fn sign_convention_against_closed_form() {
        // Indicator of [a0, b0]: kernel 1/(x - a) gives log((b0 - a)/(a - a0)),
        // the negative of the 1/(c - x) closed form.
        let (a0, b0, a) = (-1.0, 2.0, 0.3);
        let m = 3001;
        let f = SampledFunction::from_fn(-3.0, 3.0, m, |x| {
            if (a0..=b0).contains(&x) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        // Interpolated ramps sit inside one cell of each jump.
        let est = pv_excluding(&f, a, 1e-9);
        let expected = -pv_log_integral(a0, a, b0).unwrap();
        assert!((est - expected).abs() < 5e-3, "{est} vs {expected}");
    }

    #[test]
    fn hat_kernel_matches_quadrature() {
        for d in [2i64, 3, 7, 19, 20, 21, 50, 400] {
            let df = d as f64;
            let q = gauss_kronrod(
                |u| (1.0 - (u - df).abs()) / u,
                df - 1.0,
                df + 1.0,
                Tolerance::new(1e-15, 1e-14),
            );
            assert!((hat_kernel(d) - q.value).abs() < 1e-13, "d = {d}");
            assert_eq!(hat_kernel(-d), -hat_kernel(d));
        }
        assert_eq!(hat_kernel(0), 0.0);
    }

    #[test]
    fn odd_and_even_integrands() {
        let f = bump();
        let ladder = EpsLadder::geometric(1.0, 5).unwrap();
        let r = pv_quadrature(&f, 0.0, &ladder).unwrap();
        assert!(r.value.abs() < 1e-12);
        let odd = SampledFunction::from_fn(-10.0, 10.0, 2001, |x| x.powi(3) * (-x * x).exp()).unwrap();
        let r = pv_quadrature(&odd, 0.0, &ladder).unwrap();
        // x^3 e^{-x^2} / x is even: ∫ x^2 e^{-x^2} = √π / 2, minus the excluded core.
        assert!(r.value > 0.0);
        let even = SampledFunction::from_fn(-10.0, 10.0, 2001, |x| x * (-x * x).exp()).unwrap();
        let r = pv_quadrature(&even, 0.0, &ladder).unwrap();
        assert!(r.value > 0.0);
    }

    #[test]
    fn quadrature_preconditions() {
        let f = bump();
        let ladder = EpsLadder::geometric(0.1, 3).unwrap();
        assert!(matches!(
            pv_quadrature(&f, 50.0, &ladder),
            Err(Error::SingularityOffGrid { .. })
        ));
        let fine = EpsLadder::geometric(0.01, 3).unwrap();
        assert!(matches!(
            pv_quadrature(&f, 0.0, &fine),
            Err(Error::LadderTooFine { .. })
        ));
    }

    #[test]
    fn rungs_form_a_cauchy_sequence() {
        let f = SampledFunction::from_fn(-8.0, 8.0, 16001, |x| (-(x - 0.4).powi(2)).exp()).unwrap();
        let ladder = EpsLadder::geometric(0.5, 7).unwrap();
        let r = pv_quadrature(&f, 0.1, &ladder).unwrap();
        let diffs: Vec<f64> = r.rung_values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");
        let limit = hilbert_at(&f, 0.1) * PI;
        assert!((r.value - limit).abs() < diffs[diffs.len() - 1] * 2.0);
    }

    #[test]
    fn lorentzian_transform() {
        let hf = hilbert_transform(&lorentz());
        for &x in &[-3.0, -1.0, 0.0, 1.0, 2.5] {
            let i = ((x + 40.0) / 0.01_f64).round() as usize;
            let exact = -x / (1.0 + x * x);
            assert!((hf.values()[i] - exact).abs() < 1e-3, "x = {x}");
        }
    }

    #[test]
    fn fft_path_agrees_with_direct() {
        for f in [lorentz(), bump()] {
            let a = hilbert_transform(&f);
            let b = hilbert_transform_fft(&f);
            let sup = a
                .values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(sup < 1e-6, "{sup}");
            let aa = hilbert_transform(&a);
            let bb = hilbert_transform_fft(&a);
            let sup = aa
                .values()
                .iter()
                .zip(bb.values())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(sup < 1e-6, "{sup}");
        }
    }

    #[test]
    fn node_values_match_pointwise_limit() {
        let f = bump();
        let hf = hilbert_transform(&f);
        for i in [0usize, 1, 2000, 3999, 4000, 4001, 7999, 8000] {
            let direct = hilbert_at(&f, f.x(i));
            assert!((hf.values()[i] - direct).abs() < 1e-9, "i = {i}");
        }
        let hh = hilbert_transform(&hf);
        for i in [0usize, 1, 4000, 7999, 8000] {
            let direct = hilbert_at(&hf, hf.x(i));
            assert!((hh.values()[i] - direct).abs() < 1e-8, "i = {i}: {} vs {direct}", hh.values()[i]);
        }
    }

    #[test]
    fn even_input_gives_odd_transform() {
        let hf = hilbert_transform(&bump());
        let v = hf.values();
        let m = v.len();
        for i in 0..m / 2 {
            assert!((v[i] + v[m - 1 - i]).abs() <= 1e-15 * (1.0 + v[i].abs()) * 8.0);
        }
        assert!(v[m / 2].abs() < 1e-15);
    }

    #[test]
    fn isometry_and_inverse() {
        for f in [bump(), lorentz()] {
            let hf = hilbert_transform(&f);
            let ratio = hf.l2_norm_sq() / f.l2_norm_sq();
            assert!((ratio - 1.0).abs() < 1e-2, "{ratio}");
            let back = hilbert_inverse(&hf);
            let sup = back
                .values()
                .iter()
                .zip(f.values())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(sup < 5e-3, "{sup}");
        }
        let zero = SampledFunction::new(-1.0, 1.0, vec![0.0; 11]).unwrap();
        assert!(hilbert_inverse(&zero).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn csv_round_trip() {
        let f = SampledFunction::from_fn(-2.0, 2.0, 41, |x| (-x * x).exp()).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = SampledFunction::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(f, g);
        assert!(SampledFunction::read_csv(std::io::Cursor::new("x,y\n1,2\n")).is_err());
    }

    #[test]
    fn eval_and_tails() {
        let f = SampledFunction::new(-1.0, 1.0, vec![1.0, 2.0, 1.0]).unwrap();
        assert_eq!(f.eval(-0.5), 1.5);
        assert_eq!(f.eval(1.5), 0.5);
        assert_eq!(f.eval(3.0), 0.0);
        let g = f.clone().with_tail(Tail::Reciprocal { center: 0.0 }).unwrap();
        assert_eq!(g.eval(2.0), 0.5);
        assert_eq!(g.eval(-4.0), 0.25);
        assert!(f.with_tail(Tail::Reciprocal { center: 2.0 }).is_err());
    }
}
