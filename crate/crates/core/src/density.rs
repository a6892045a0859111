//! Deterministic checks of the covariance and density estimates: the
//! determinant sandwich, the increment ratios, density-increment bounds and
//! the truncated singular double integrals `Λ_1`, `Λ_3`, `Λ_4`.
//!
//! Every check either compares a quantity against an envelope (the fitted
//! constant `sup lhs/rhs` must be finite, and at most a stated limit when the
//! bound carries an explicit constant) or fits a log-log slope along a ladder.

use std::cell::Cell;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{pair_stats, pow_nonneg, HurstIndex, PairStats};
use crate::mollifier::MollifierFamily;
use crate::quad::{gauss_kronrod, gauss_kronrod_breaks, tanh_sinh, Tolerance};
use crate::stats::loglog_slope;

/// Seed of the parameter samples used by the suite checks.
pub const DEFAULT_SAMPLE_SEED: u64 = 0x2f1b_6a3c_55d0_9e17;
/// Number of random parameter triples in the covariance checks.
pub const DEFAULT_SAMPLE_SIZE: usize = 10_000;
/// Tolerance used by the double integrals unless overridden.
pub const DEFAULT_TOL: Tolerance = Tolerance::new(1e-10, 1e-8);
/// Gaussian truncation, in standard deviations.
pub const TRUNCATION_SDS: f64 = 12.0;

/// One parameter point of a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    #[serde(rename = "H")]
    pub h: f64,
    pub s: f64,
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub extra: Vec<f64>,
}

impl SamplePoint {
    pub fn new(h: f64, s: f64, r: f64) -> Self {
        Self {
            h,
            s,
            r,
            a: 0.0,
            b: 0.0,
            extra: Vec::new(),
        }
    }

    pub fn at(mut self, a: f64, b: f64) -> Self {
        self.a = a;
        self.b = b;
        self
    }

    pub fn with(mut self, extra: &[f64]) -> Self {
        self.extra = extra.to_vec();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub point: SamplePoint,
    pub lhs: f64,
    pub rhs: f64,
}

impl BoundEntry {
    pub fn ratio(&self) -> f64 {
        if self.lhs == 0.0 {
            0.0
        } else {
            self.lhs / self.rhs
        }
    }
}

/// Envelope check over a parameter sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lemma_id: String,
    pub entries: Vec<BoundEntry>,
    /// `max lhs / rhs` over the sample.
    pub fitted_constant: f64,
    /// Explicit constant of the bound, when it has one.
    pub limit: Option<f64>,
    pub pass: bool,
}

impl BoundReport {
    pub fn new(lemma_id: &str, entries: Vec<BoundEntry>, limit: Option<f64>) -> Self {
        let mut fitted = 0.0f64;
        let mut finite = !entries.is_empty();
        for e in &entries {
            let r = e.ratio();
            finite &= r.is_finite() && e.lhs >= 0.0;
            fitted = fitted.max(r);
        }
        let pass = finite && limit.is_none_or(|c| fitted <= c * (1.0 + 1e-12));
        Self {
            lemma_id: lemma_id.to_string(),
            entries,
            fitted_constant: fitted,
            limit,
            pass,
        }
    }

    /// Smallest ratio in the sample.
    pub fn min_ratio(&self) -> f64 {
        self.entries.iter().map(BoundEntry::ratio).fold(f64::INFINITY, f64::min)
    }

    /// One JSON object per entry.
    pub fn json_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let v = serde_json::json!({
                "lemma": self.lemma_id,
                "point": e.point,
                "lhs": e.lhs,
                "rhs": e.rhs,
                "ratio": e.ratio(),
            });
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }

    /// `lemma,samples,fitted_constant,min_ratio,limit,pass` header and row.
    pub fn write_summary_csv(reports: &[&BoundReport], path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "lemma,samples,fitted_constant,min_ratio,limit,pass")?;
        for r in reports {
            let limit = r.limit.map(|c| c.to_string()).unwrap_or_default();
            writeln!(
                f,
                "{},{},{:e},{:e},{},{}",
                r.lemma_id,
                r.entries.len(),
                r.fitted_constant,
                r.min_ratio(),
                limit,
                r.pass
            )?;
        }
        f.flush()
    }
}

/// Log-log slope of a quantity along a ladder, compared with a lower bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub name: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub slope: f64,
    pub bound: f64,
    pub pass: bool,
}

impl ScalingCheck {
    pub fn new(name: &str, xs: Vec<f64>, ys: Vec<f64>, bound: f64) -> Self {
        let slope = loglog_slope(&xs, &ys);
        Self {
            name: name.to_string(),
            pass: slope.is_finite() && slope >= bound,
            xs,
            ys,
            slope,
            bound,
        }
    }

    /// Whether `ys` strictly decreases along the ladder.
    pub fn decreasing(&self) -> bool {
        self.ys.windows(2).all(|w| w[1] < w[0])
    }
}

fn hurst(h: f64) -> Result<HurstIndex> {
    HurstIndex::new(h)
}

fn ordered_pair(h: HurstIndex, s: f64, r: f64) -> Result<PairStats> {
    if !(0.0 < r && r < s) {
        return Err(Error::InvalidArgument(format!("need 0 < r < s (got s = {s}, r = {r})")));
    }
    let st = pair_stats(h, s, r)?;
    st.require_nondegenerate()?;
    Ok(st)
}

/// Draws `(H, s, r)` with `H` uniform on `h_range` and `0 < r < s <= 1`.
fn draw_triples(seed: u64, count: usize, h_range: (f64, f64)) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let h = h_range.0 + (h_range.1 - h_range.0) * rng.random::<f64>();
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        let (s, r) = if u > v { (u, v) } else { (v, u) };
        if r > 0.0 && s > r && h > h_range.0 {
            out.push((h, s, r));
        }
    }
    out
}

/// Determinant sandwich `½(2 - 2^H) r^{2H}(s-r)^{2H} <= det <= 2 r^{2H}(s-r)^{2H}`
/// on `count` random triples: returns the lower and the upper report, both
/// with limit 1.
pub fn determinant_sandwich(seed: u64, count: usize) -> Result<(BoundReport, BoundReport)> {
    let mut lower = Vec::with_capacity(count);
    let mut upper = Vec::with_capacity(count);
    for (hv, s, r) in draw_triples(seed, count, (0.05, 0.95)) {
        let h = hurst(hv)?;
        let st = pair_stats(h, s, r)?;
        let base = pow_nonneg(r, h.two_h()) * pow_nonneg(s - r, h.two_h());
        let p = SamplePoint::new(hv, s, r);
        lower.push(BoundEntry {
            point: p.clone(),
            lhs: 0.5 * (2.0 - 2f64.powf(hv)) * base,
            rhs: st.rho2,
        });
        upper.push(BoundEntry {
            point: p,
            lhs: st.rho2,
            rhs: 2.0 * base,
        });
    }
    Ok((
        BoundReport::new("det-lower", lower, Some(1.0)),
        BoundReport::new("det-upper", upper, Some(1.0)),
    ))
}

/// `(mu - r^{2H}) / ((s-r) r s^{2H-2})` and `(s^{2H} - mu) / ((s-r) s^{2H-1})`,
/// both functions of `x = r/s` alone, evaluated without cancellation.
pub fn increment_ratios(h: f64, s: f64, r: f64) -> (f64, f64) {
    let p = 2.0 * h;
    let x = r / s;
    let xp = (p * x.ln()).exp();
    let yp = (p * (-x).ln_1p()).exp();
    // 1 - x^{2H} - (1-x)^{2H}, expanded around whichever end is closer
    let n1 = if x < 0.5 {
        -(p * (-x).ln_1p()).exp_m1() - xp
    } else {
        -(p * x.ln()).exp_m1() - yp
    };
    let n2 = -(p * x.ln()).exp_m1() + yp;
    (n1 / (2.0 * x * (1.0 - x)), n2 / (2.0 * (1.0 - x)))
}

/// Range of the increment ratios within one band of Hurst indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioStratum {
    pub h_lo: f64,
    pub h_hi: f64,
    pub count: usize,
    pub first_min: f64,
    pub first_max: f64,
    pub second_min: f64,
    pub second_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementRatioReport {
    pub strata: Vec<RatioStratum>,
    /// All ratios finite and strictly positive.
    pub pass: bool,
}

/// Increment ratios on `count` random triples with `H ∈ (1/2, 0.95)`; the
/// fitted lower/upper constants are reported per band of width 0.1.
pub fn increment_ratio_sample(seed: u64, count: usize) -> IncrementRatioReport {
    let edges = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95];
    let mut strata: Vec<RatioStratum> = edges
        .windows(2)
        .map(|w| RatioStratum {
            h_lo: w[0],
            h_hi: w[1],
            count: 0,
            first_min: f64::INFINITY,
            first_max: 0.0,
            second_min: f64::INFINITY,
            second_max: 0.0,
        })
        .collect();
    let mut pass = true;
    for (h, s, r) in draw_triples(seed, count, (0.5, 0.95)) {
        let (q1, q2) = increment_ratios(h, s, r);
        pass &= q1.is_finite() && q2.is_finite() && q1 > 0.0 && q2 > 0.0;
        let k = strata
            .iter()
            .position(|st| h < st.h_hi)
            .unwrap_or(strata.len() - 1);
        let st = &mut strata[k];
        st.count += 1;
        st.first_min = st.first_min.min(q1);
        st.first_max = st.first_max.max(q1);
        st.second_min = st.second_min.min(q2);
        st.second_max = st.second_max.max(q2);
    }
    IncrementRatioReport { strata, pass }
}

/// `(1 + x)^α <= 1 + (2^α - 1) x^α` on an `m x m` grid of `[0, 1]^2`.
pub fn power_inequality_grid(m: usize) -> BoundReport {
    let mut entries = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let x = i as f64 / (m - 1) as f64;
            let al = j as f64 / (m - 1) as f64;
            entries.push(BoundEntry {
                point: SamplePoint::new(f64::NAN, 0.0, 0.0).with(&[x, al]),
                lhs: (1.0 + x).powf(al),
                rhs: 1.0 + (2f64.powf(al) - 1.0) * x.powf(al),
            });
        }
    }
    BoundReport::new("power-inequality", entries, Some(1.0))
}

fn check_beta(beta: f64, lo_open: bool) -> Result<()> {
    let ok = if lo_open {
        beta > 0.0 && beta < 1.0
    } else {
        (0.0..=1.0).contains(&beta)
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("exponent {beta} out of range")))
    }
}

/// `|φ(x,y) - φ(z,y)|` against `r^{βH} ρ^{-1-β} |x-z|^β exp(-β y²/(2 r^{2H}))`.
pub fn check_density_increment(h: f64, s: f64, r: f64, x: f64, y: f64, z: f64, beta: f64) -> Result<BoundEntry> {
    check_beta(beta, false)?;
    let hi = hurst(h)?;
    let st = pair_stats(hi, s, r)?;
    st.require_nondegenerate()?;
    let lhs = st.density_diff_x(x, z, y).abs();
    let rhs = pow_nonneg(r, beta * h) / st.rho().powf(1.0 + beta)
        * (x - z).abs().powf(beta)
        * (-beta * y * y / (2.0 * st.var_r)).exp();
    Ok(BoundEntry {
        point: SamplePoint::new(h, s, r).with(&[x, y, z, beta]),
        lhs,
        rhs,
    })
}

/// The companion bound in the second variable:
/// `|φ(x,y) - φ(x,z)| <= s^{βH} ρ^{-1-β} |y-z|^β exp(-β x²/(2 s^{2H}))`.
pub fn check_density_increment_y(h: f64, s: f64, r: f64, x: f64, y: f64, z: f64, beta: f64) -> Result<BoundEntry> {
    check_beta(beta, false)?;
    let hi = hurst(h)?;
    let st = pair_stats(hi, s, r)?;
    st.require_nondegenerate()?;
    let lhs = st.density_diff_y(x, y, z).abs();
    let rhs = pow_nonneg(s, beta * h) / st.rho().powf(1.0 + beta)
        * (y - z).abs().powf(beta)
        * (-beta * x * x / (2.0 * st.var_s)).exp();
    Ok(BoundEntry {
        point: SamplePoint::new(h, s, r).with(&[x, y, z, beta]),
        lhs,
        rhs,
    })
}

/// Both density-increment bounds on `count` random points, limit 1.
pub fn density_increment_sample(seed: u64, count: usize) -> Result<BoundReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let triples = draw_triples(seed, count, (0.05, 0.95));
    let mut entries = Vec::with_capacity(2 * count);
    for (h, s, r) in triples {
        let mut u = || 6.0 * rng.random::<f64>() - 3.0;
        let (x, y, z) = (u(), u(), u());
        let beta: f64 = rng.random();
        entries.push(check_density_increment(h, s, r, x, y, z, beta)?);
        entries.push(check_density_increment_y(h, s, r, x, y, z, beta)?);
    }
    Ok(BoundReport::new("density-increment", entries, Some(1.0)))
}

/// `φ(x,y) - φ(x,b) - φ(a,y) + φ(a,b)`, accurate when `x ≈ a` or `y ≈ b`.
fn double_diff(st: &PairStats, a: f64, b: f64, x: f64, y: f64) -> f64 {
    let sd_x = st.rho() / st.var_r.sqrt();
    let sd_y = st.rho() / st.var_s.sqrt();
    let dx = x - a;
    let dy = y - b;
    let small_x = dx.abs() < 1e-4 * sd_x;
    let small_y = dy.abs() < 1e-4 * sd_y;
    let (xm, ym) = (0.5 * (x + a), 0.5 * (y + b));
    match (small_x, small_y) {
        (true, true) => dx * dy * st.density_dxdy(xm, ym),
        (true, false) => dx * (st.density_dx(xm, y) - st.density_dx(xm, b)),
        (false, true) => dy * (st.density_dy(x, ym) - st.density_dy(a, ym)),
        (false, false) => st.density_diff_y(x, y, b) - st.density_diff_y(a, y, b),
    }
}

/// Breakpoints in `y` around the conditional ridge of `B_r` given `B_s = x`.
fn ridge_breaks(st: &PairStats, x: f64, lo: f64, hi: f64) -> Vec<f64> {
    let c = st.mu / st.var_s * x;
    let sd = st.rho() / st.var_s.sqrt();
    let mut pts = vec![lo, hi];
    for k in [-8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0] {
        let p = c + k * sd;
        if p > lo && p < hi {
            pts.push(p);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

struct Nested<'a> {
    st: &'a PairStats,
    tol: Tolerance,
    ok: Cell<bool>,
    err: Cell<f64>,
}

impl<'a> Nested<'a> {
    fn new(st: &'a PairStats, tol: Tolerance) -> Self {
        Self {
            st,
            tol,
            ok: Cell::new(true),
            err: Cell::new(0.0),
        }
    }

    /// `∫_{x0}^{x1} ∫_{y0}^{y1} f(x, y) dy dx` with ridge-aware inner splitting.
    fn integrate(&self, x0: f64, x1: f64, y0: f64, y1: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
        if !(x1 > x0 && y1 > y0) {
            return 0.0;
        }
        let inner_tol = Tolerance::new(self.tol.abs * 1e-2, self.tol.rel * 1e-2);
        let inner = |x: f64| {
            let pts = ridge_breaks(self.st, x, y0, y1);
            let r = gauss_kronrod_breaks(|y| f(x, y), &pts, inner_tol);
            if !r.converged {
                self.ok.set(false);
            }
            r.value
        };
        let r = gauss_kronrod(inner, x0, x1, self.tol);
        self.err.set(self.err.get() + r.error);
        if !r.converged {
            self.ok.set(false);
        }
        r.value
    }

    fn finish(&self, value: f64) -> Result<f64> {
        if self.ok.get() {
            Ok(value)
        } else {
            Err(Error::QuadratureNonConvergence {
                value,
                error: self.err.get(),
            })
        }
    }
}

/// `∫_a^∞ ∫_b^∞ |Ψ(x,y)| / ((x-a)(y-b)) dy dx`, split into the unit corner
/// square, the two strips and the far quadrant, with the infinite ranges cut
/// at [`TRUNCATION_SDS`] marginal deviations.
pub fn lambda1_quadrature(h: f64, s: f64, r: f64, a: f64, b: f64) -> Result<f64> {
    lambda1_quadrature_with(h, s, r, a, b, DEFAULT_TOL)
}

pub fn lambda1_quadrature_with(h: f64, s: f64, r: f64, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    let hi = hurst(h)?;
    let st = ordered_pair(hi, s, r)?;
    let q = Nested::new(&st, tol);
    let x_far = (a + 1.0).max(TRUNCATION_SDS * st.var_s.sqrt());
    let y_far = (b + 1.0).max(TRUNCATION_SDS * st.var_r.sqrt());
    let corner = q.integrate(a, a + 1.0, b, b + 1.0, |x, y| {
        (double_diff(&st, a, b, x, y) / ((x - a) * (y - b))).abs()
    });
    let strip_x = q.integrate(a + 1.0, x_far, b, b + 1.0, |x, y| {
        (st.density_diff_y(x, y, b) / ((x - a) * (y - b))).abs()
    });
    let strip_y = q.integrate(a, a + 1.0, b + 1.0, y_far, |x, y| {
        (st.density_diff_x(x, a, y) / ((x - a) * (y - b))).abs()
    });
    let far = q.integrate(a + 1.0, x_far, b + 1.0, y_far, |x, y| {
        st.density_unchecked(x, y) / ((x - a) * (y - b))
    });
    q.finish(corner + strip_x + strip_y + far)
}

/// `s^{βH/2} / (r^{(1+β)H} (s-r)^{(1+β)H})`.
pub fn lambda1_envelope(h: f64, s: f64, r: f64, beta: f64) -> f64 {
    s.powf(0.5 * beta * h) / (r.powf((1.0 + beta) * h) * (s - r).powf((1.0 + beta) * h))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("cut-off {eps} outside (0, 1)")))
    }
}

/// The two truncated integrals over `[a, a+ε]^2`:
/// `Λ_3` with weights `log u - (log ε / ε) u` against `φ`, and `Λ_4` with
/// weights `1/u - log ε / ε` against `|Ψ|`.
pub fn lambda34_quadrature(h: f64, s: f64, r: f64, a: f64, eps: f64) -> Result<(f64, f64)> {
    lambda34_quadrature_with(h, s, r, a, eps, DEFAULT_TOL)
}

pub fn lambda34_quadrature_with(h: f64, s: f64, r: f64, a: f64, eps: f64, tol: Tolerance) -> Result<(f64, f64)> {
    check_eps(eps)?;
    let hi = hurst(h)?;
    let st = ordered_pair(hi, s, r)?;
    let slope = eps.ln() / eps;
    let w3 = |u: f64| u.ln() - slope * u;
    let w4 = |u: f64| 1.0 / u - slope;

    // Λ_3: log singularities on both edges, so tanh-sinh in each variable.
    let mut ok = true;
    let inner_tol = Tolerance::new(tol.abs * 1e-2, tol.rel * 1e-2);
    let outer = tanh_sinh(
        |x| {
            let r = tanh_sinh(
                |y| w3(y - a) * st.density_unchecked(x, y),
                a,
                a + eps,
                inner_tol,
            );
            ok &= r.converged;
            w3(x - a) * r.value
        },
        a,
        a + eps,
        tol,
    );
    ok &= outer.converged;
    if !ok {
        return Err(Error::QuadratureNonConvergence {
            value: outer.value,
            error: outer.error,
        });
    }
    let l3 = outer.value;

    // Λ_4: bounded integrand with kinks along the zero set of Ψ.
    let q = Nested::new(&st, tol);
    let l4 = q.integrate(a, a + eps, a, a + eps, |x, y| {
        w4(x - a) * w4(y - a) * double_diff(&st, a, a, x, y).abs()
    });
    Ok((l3, q.finish(l4)?))
}

/// `(sr)^{-H/2} ε^H`.
pub fn lambda3_envelope(h: f64, s: f64, r: f64, eps: f64) -> f64 {
    (s * r).powf(-0.5 * h) * eps.powf(h)
}

/// `s^{βH/2} / (r^{(1+β/2)H} (s-r)^{(1+β)H}) ε^β (1 + log² ε)`.
pub fn lambda4_envelope(h: f64, s: f64, r: f64, eps: f64, beta: f64) -> f64 {
    let l = eps.ln();
    s.powf(0.5 * beta * h) / (r.powf((1.0 + 0.5 * beta) * h) * (s - r).powf((1.0 + beta) * h))
        * eps.powf(beta)
        * (1.0 + l * l)
}

/// `∫ ψ_1(x - a) |∂_x φ(x, a)| dx` with `ψ_1` from `fam`.
pub fn log_weighted_density_integral(fam: &MollifierFamily, h: f64, s: f64, r: f64, a: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0 - h && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "exponent {alpha} outside (1 - H, 1) for H = {h}"
        )));
    }
    let hi = hurst(h)?;
    let st = ordered_pair(hi, s, r)?;
    // φ(·, a) is a Gaussian bump centred at mu a / r^{2H}.
    let c = st.mu / st.var_r * a;
    let sd = st.rho() / st.var_r.sqrt();
    let top = a.max(c) + TRUNCATION_SDS * sd;
    let mut pts = vec![a, top];
    for p in [a + 1.0, c - 3.0 * sd, c - sd, c, c + sd, c + 3.0 * sd] {
        if p > a && p < top {
            pts.push(p);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let g = |x: f64| fam.psi1(x - a) * st.density_dx(x, a).abs();
    let tol = Tolerance::new(1e-12, 1e-9);
    // The first piece carries the log singularity at x = a.
    let head = tanh_sinh(g, pts[0], pts[1], tol);
    let tail = gauss_kronrod_breaks(g, &pts[1..], tol);
    let value = head.value + tail.value;
    if head.converged && tail.converged {
        Ok(value)
    } else {
        Err(Error::QuadratureNonConvergence {
            value,
            error: head.error + tail.error,
        })
    }
}

/// `(s-r)^{-(1+α)H} r^{-(1+α)H}`.
pub fn log_weighted_envelope(h: f64, s: f64, r: f64, alpha: f64) -> f64 {
    ((s - r) * r).powf(-(1.0 + alpha) * h)
}

/// Envelope ratios of `Λ_1` over a fixed parameter sample.
pub fn lambda1_report(points: &[SamplePoint], beta: f64) -> Result<BoundReport> {
    check_beta(beta, true)?;
    let entries = points
        .iter()
        .map(|p| {
            Ok(BoundEntry {
                point: p.clone().with(&[beta]),
                lhs: lambda1_quadrature(p.h, p.s, p.r, p.a, p.b)?,
                rhs: lambda1_envelope(p.h, p.s, p.r, beta),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::new("lambda1", entries, None))
}

/// `Λ_1` along `s = r + gap` for shrinking gaps; slope bound `-(1+β)H - 0.1`.
pub fn lambda1_gap_scaling(h: f64, r: f64, a: f64, b: f64, beta: f64, gaps: &[f64]) -> Result<ScalingCheck> {
    let ys = gaps
        .iter()
        .map(|&g| lambda1_quadrature(h, r + g, r, a, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalingCheck::new("lambda1 vs s-r", gaps.to_vec(), ys, -(1.0 + beta) * h - 0.1))
}

/// `Λ_3`, `Λ_4` along an ε ladder; slope bounds `H - 0.1` and `β - 0.15`.
pub fn lambda34_eps_scaling(h: f64, s: f64, r: f64, a: f64, beta: f64, eps: &[f64]) -> Result<(ScalingCheck, ScalingCheck)> {
    let vals = eps
        .iter()
        .map(|&e| lambda34_quadrature(h, s, r, a, e))
        .collect::<Result<Vec<_>>>()?;
    let l3 = vals.iter().map(|v| v.0).collect();
    let l4 = vals.iter().map(|v| v.1).collect();
    Ok((
        ScalingCheck::new("lambda3 vs eps", eps.to_vec(), l3, h - 0.1),
        ScalingCheck::new("lambda4 vs eps", eps.to_vec(), l4, beta - 0.15),
    ))
}

/// Log-weighted integral along `s = r + gap`; slope bound `-(1+α)H - 0.1`.
pub fn log_weighted_gap_scaling(
    fam: &MollifierFamily,
    h: f64,
    r: f64,
    a: f64,
    alpha: f64,
    gaps: &[f64],
) -> Result<ScalingCheck> {
    let ys = gaps
        .iter()
        .map(|&g| log_weighted_density_integral(fam, h, r + g, r, a, alpha))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalingCheck::new(
        "log-weighted vs s-r",
        gaps.to_vec(),
        ys,
        -(1.0 + alpha) * h - 0.1,
    ))
}

/// Envelope ratios of the log-weighted integral over a sample of points,
/// each carrying its exponent `α` as the single extra parameter.
pub fn log_weighted_report(fam: &MollifierFamily, points: &[SamplePoint]) -> Result<BoundReport> {
    let entries = points
        .iter()
        .map(|p| {
            let alpha = p.extra[0];
            Ok(BoundEntry {
                point: p.clone(),
                lhs: log_weighted_density_integral(fam, p.h, p.s, p.r, p.a, alpha)?,
                rhs: log_weighted_envelope(p.h, p.s, p.r, alpha),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::new("log-weighted", entries, None))
}
