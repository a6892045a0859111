//! The bump `ζ`, its dilations `ζ_n`, the smoothed logarithms `G_n = F'_+ * ζ_n`,
//! their envelopes `ψ_1`, `ψ_2`, and the `x log x` family `F_±`, `F`, `F_ε`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::quad::{gauss_kronrod, tanh_sinh, Tolerance};

/// Envelope constant used by [`MollifierFamily::psi1`] and [`MollifierFamily::psi2`].
pub const DEFAULT_ENVELOPE_C: f64 = 34.0;

const QUAD_TOL: Tolerance = Tolerance::new(1e-12, 1e-12);

/// `exp(1 / ((x-1)^2 - 1))` on `(0, 2)`, zero elsewhere.
fn bump(x: f64) -> f64 {
    if x <= 0.0 || x >= 2.0 {
        return 0.0;
    }
    // (x-1)^2 - 1 written so it cannot round to zero near the ends
    (1.0 / (x * (x - 2.0))).exp()
}

/// Derivative of [`bump`].
fn bump_prime(x: f64) -> f64 {
    if x <= 0.0 || x >= 2.0 {
        return 0.0;
    }
    let d = x * (x - 2.0);
    let b = bump(x);
    if b == 0.0 {
        return 0.0;
    }
    -2.0 * (x - 1.0) / (d * d) * b
}

fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| gauss_kronrod(bump, 0.0, 2.0, Tolerance::new(1e-15, 1e-15)).value)
}

/// Normalised bump and everything built from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierFamily {
    c: f64,
    envelope_c: f64,
}

impl Default for MollifierFamily {
    fn default() -> Self {
        Self::new()
    }
}

impl MollifierFamily {
    pub fn new() -> Self {
        Self {
            c: 1.0 / bump_mass(),
            envelope_c: DEFAULT_ENVELOPE_C,
        }
    }

    pub fn with_envelope_constant(self, envelope_c: f64) -> Self {
        Self { envelope_c, ..self }
    }

    /// The normaliser `c` with `∫ζ = 1`.
    pub fn normalizer(&self) -> f64 {
        self.c
    }

    pub fn envelope_constant(&self) -> f64 {
        self.envelope_c
    }

    pub fn zeta(&self, x: f64) -> f64 {
        self.c * bump(x)
    }

    fn zeta_prime(&self, x: f64) -> f64 {
        self.c * bump_prime(x)
    }

    /// `n ζ(n x)`.
    pub fn zeta_n(&self, n: u32, x: f64) -> f64 {
        let n = n as f64;
        n * self.zeta(n * x)
    }

    /// `∫ F'_+(x - y/n) ζ(y) dy`; zero for `x <= 0`.
    pub fn g_n(&self, n: u32, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let nf = n as f64;
        let u = nf * x;
        if u > 2.0 {
            // log x + ∫ ζ(y) log(1 - y/(nx)) dy
            let corr = gauss_kronrod(|y| self.zeta(y) * (-y / u).ln_1p(), 0.0, 2.0, QUAD_TOL).value;
            x.ln() + corr
        } else {
            // substitute t = nx - y so the log singularity sits at t = 0
            tanh_sinh(|t| self.zeta(u - t) * (t / nf).ln(), 0.0, u, QUAD_TOL).value
        }
    }

    /// `G_n'` from the convolution formulas (no differencing).
    pub fn g_n_prime(&self, n: u32, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let nf = n as f64;
        let u = nf * x;
        if u > 2.0 {
            gauss_kronrod(|y| self.zeta(y) * nf / (u - y), 0.0, 2.0, QUAD_TOL).value
        } else {
            nf * tanh_sinh(|t| self.zeta_prime(u - t) * (t / nf).ln(), 0.0, u, QUAD_TOL).value
        }
    }

    /// Central difference of [`Self::g_n`] with step `step`.
    pub fn g_n_prime_fd(&self, n: u32, x: f64, step: f64) -> f64 {
        (self.g_n(n, x + step) - self.g_n(n, x - step)) / (2.0 * step)
    }

    /// `C (1 + |log x|)` for `x > 0`, zero otherwise.
    pub fn psi1(&self, x: f64) -> f64 {
        if x > 0.0 {
            self.envelope_c * (1.0 + x.ln().abs())
        } else {
            0.0
        }
    }

    /// `C x^{-1} (1 + |log x|)` for `x > 0`, zero otherwise.
    pub fn psi2(&self, x: f64) -> f64 {
        if x > 0.0 {
            self.envelope_c * (1.0 + x.ln().abs()) / x
        } else {
            0.0
        }
    }
}

/// `x log x - x` for `x > 0`, zero otherwise.
pub fn f_plus(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln() - x
    } else {
        0.0
    }
}

/// `x log(-x) - x` for `x < 0`, zero otherwise.
pub fn f_minus(x: f64) -> f64 {
    if x < 0.0 {
        x * (-x).ln() - x
    } else {
        0.0
    }
}

/// `x log|x| - x`, with `F(0) = 0`.
pub fn f_full(x: f64) -> f64 {
    f_plus(x) + f_minus(x)
}

/// Inner piece of `F_ε`: `x^2 log ε / (2ε)`.
pub fn f_eps_inner(eps: f64, x: f64) -> f64 {
    x * x * eps.ln() / (2.0 * eps)
}

/// Outer piece of `F_ε`: `ε - ε log ε / 2 + x log x - x`.
pub fn f_eps_outer(eps: f64, x: f64) -> f64 {
    eps - 0.5 * eps * eps.ln() + x * x.ln() - x
}

/// `F_ε`: zero on `x <= 0`, quadratic on `(0, ε]`, shifted `F_+` beyond.
pub fn f_eps(eps: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x <= eps {
        f_eps_inner(eps, x)
    } else {
        f_eps_outer(eps, x)
    }
}

pub fn f_eps_d1(eps: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x <= eps {
        x * eps.ln() / eps
    } else {
        x.ln()
    }
}

/// Second derivative; at the break points the right-hand value is returned.
pub fn f_eps_d2(eps: f64, x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else if x < eps {
        eps.ln() / eps
    } else {
        1.0 / x
    }
}

/// Largest ratio and whether every sample satisfied `lhs <= rhs` up to `slack`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub name: String,
    pub samples: usize,
    pub max_ratio: f64,
    pub worst_at: (u32, f64),
    pub pass: bool,
}

impl EnvelopeCheck {
    fn run(
        name: &str,
        ns: &[u32],
        xs: &[f64],
        slack: f64,
        mut pair: impl FnMut(u32, f64) -> Option<(f64, f64)>,
    ) -> Self {
        let mut max_ratio = 0.0f64;
        let mut worst_at = (0, f64::NAN);
        let mut samples = 0;
        let mut finite = true;
        for &n in ns {
            for &x in xs {
                let Some((lhs, rhs)) = pair(n, x) else { continue };
                samples += 1;
                let r = lhs / rhs;
                finite &= r.is_finite();
                if r > max_ratio {
                    max_ratio = r;
                    worst_at = (n, x);
                }
            }
        }
        Self {
            name: name.to_string(),
            samples,
            max_ratio,
            worst_at,
            pass: finite && samples > 0 && max_ratio <= 1.0 + slack,
        }
    }
}

/// `m` log-spaced points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..m)
        .map(|i| (a + (b - a) * i as f64 / (m - 1) as f64).exp())
        .collect()
}

/// Fitted `sup |G_n(x)| / (1 + |log x|)` over the grid.
pub fn fitted_g_n_constant(fam: &MollifierFamily, ns: &[u32], xs: &[f64]) -> f64 {
    let mut c = 0.0f64;
    for &n in ns {
        for &x in xs {
            c = c.max(fam.g_n(n, x).abs() / (1.0 + x.ln().abs()));
        }
    }
    c
}

/// `|G_n(x)| <= ψ_1(x)`.
pub fn check_g_n_envelope(fam: &MollifierFamily, ns: &[u32], xs: &[f64]) -> EnvelopeCheck {
    EnvelopeCheck::run("g_n <= psi1", ns, xs, 0.0, |n, x| {
        Some((fam.g_n(n, x).abs(), fam.psi1(x)))
    })
}

/// `|G_n'(x)| <= ψ_2(x)`, with `G_n'` by central differences.
pub fn check_g_n_prime_envelope(fam: &MollifierFamily, ns: &[u32], xs: &[f64]) -> EnvelopeCheck {
    EnvelopeCheck::run("g_n' <= psi2", ns, xs, 0.0, |n, x| {
        let d = fam.g_n_prime_fd(n, x, 1e-4 * x);
        Some((d.abs(), fam.psi2(x)))
    })
}

/// `|G_n(x) - log x| <= log(1 + 2/(nx - 2))` wherever `x > 2/n`.
pub fn check_g_n_convergence(fam: &MollifierFamily, ns: &[u32], xs: &[f64]) -> EnvelopeCheck {
    EnvelopeCheck::run("|g_n - log| <= log(1 + 2/(nx-2))", ns, xs, 1e-8, |n, x| {
        let u = n as f64 * x;
        if u <= 2.0 {
            return None;
        }
        let lhs = (fam.g_n(n, x) - x.ln()).abs();
        let rhs = (2.0 / (u - 2.0)).ln_1p();
        // Below quadrature noise the ratio carries no information.
        Some((lhs, rhs.max(1e-9)))
    })
}

/// `sup_x |F_+(x) - F_ε(x)| <= ε - ε log ε / 2` on the grid.
pub fn check_f_eps_gap(eps: f64, xs: &[f64]) -> EnvelopeCheck {
    let bound = eps - 0.5 * eps * eps.ln();
    EnvelopeCheck::run("|F_+ - F_eps| <= eps - eps log eps / 2", &[0], xs, 1e-12, |_, x| {
        Some(((f_plus(x) - f_eps(eps, x)).abs(), bound))
    })
}

/// Largest mismatch of value and first derivative across the breaks `0` and `ε`.
pub fn f_eps_c1_defect(eps: f64) -> f64 {
    let inner_d = |x: f64| x * eps.ln() / eps;
    let at_eps = (f_eps_inner(eps, eps) - f_eps_outer(eps, eps))
        .abs()
        .max((inner_d(eps) - eps.ln()).abs());
    let at_zero = f_eps_inner(eps, 0.0).abs().max(inner_d(0.0).abs());
    at_eps.max(at_zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normaliser_and_mass() {
        let fam = MollifierFamily::new();
        assert_relative_eq!(fam.normalizer(), 2.25228, epsilon = 1e-5);
        assert_relative_eq!(bump_mass(), 0.443994, epsilon = 1e-6);
        for n in [1u32, 2, 8, 64] {
            let nf = n as f64;
            let m = gauss_kronrod(|x| fam.zeta_n(n, x), 0.0, 2.0 / nf, QUAD_TOL).value;
            assert!((m - 1.0).abs() < 1e-10, "n = {n}: {m}");
        }
    }

    #[test]
    fn zeta_support_and_values() {
        let fam = MollifierFamily::new();
        assert_eq!(fam.zeta(0.0), 0.0);
        assert_eq!(fam.zeta(2.0), 0.0);
        assert_eq!(fam.zeta(-0.3), 0.0);
        assert_eq!(fam.zeta(2.5), 0.0);
        assert_relative_eq!(fam.zeta(1.0), fam.normalizer() * (-1.0f64).exp(), epsilon = 1e-15);
        assert!(fam.zeta(0.1) > 0.0);
    }

    #[test]
    fn g_n_basic_values() {
        let fam = MollifierFamily::new();
        for n in [2, 8, 128] {
            assert_eq!(fam.g_n(n, -1.0), 0.0);
            assert_eq!(fam.g_n(n, 0.0), 0.0);
        }
        let vals: Vec<f64> = [2u32, 8, 32, 128].iter().map(|&n| fam.g_n(n, 1.0).abs()).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
        assert!(vals[3] < 1e-2);
        // For a large argument the smoothing is a small shift of the logarithm.
        let n = 8;
        let x = 5.0;
        let direct = gauss_kronrod(|y| fam.zeta(y) * (x - y / n as f64).ln(), 0.0, 2.0, QUAD_TOL).value;
        assert_relative_eq!(fam.g_n(n, x), direct, epsilon = 1e-11);
    }

    #[test]
    fn g_n_branches_meet() {
        let fam = MollifierFamily::new();
        let n = 4;
        let x0 = 2.0 / n as f64;
        let lo = fam.g_n(n, x0 * (1.0 - 1e-9));
        let hi = fam.g_n(n, x0 * (1.0 + 1e-9));
        assert!((lo - hi).abs() < 1e-7, "{lo} vs {hi}");
    }

    #[test]
    fn derivative_routes_agree() {
        let fam = MollifierFamily::new();
        for n in [2u32, 8, 32] {
            for x in [0.01, 0.05, 0.2, 0.7, 3.0] {
                let a = fam.g_n_prime(n, x);
                let d = fam.g_n_prime_fd(n, x, 1e-5 * x);
                assert!((a - d).abs() <= 1e-5 * (1.0 + a.abs()), "n={n} x={x}: {a} vs {d}");
            }
        }
    }

    #[test]
    fn envelopes() {
        let fam = MollifierFamily::new();
        assert_eq!(fam.psi1(1.0), DEFAULT_ENVELOPE_C);
        assert_eq!(fam.psi2(1.0), DEFAULT_ENVELOPE_C);
        assert_eq!(fam.psi1(-1.0), 0.0);
        assert_eq!(fam.psi2(0.0), 0.0);
        for x in [1e-3, 0.5, 7.0] {
            let k = fam.psi2(x) * x / (1.0 + x.ln().abs());
            assert_relative_eq!(k, DEFAULT_ENVELOPE_C, epsilon = 1e-12);
        }
        let ns = [2, 4, 8, 16, 32, 64, 128];
        let xs = log_grid(1e-4, 10.0, 60);
        assert!(check_g_n_envelope(&fam, &ns, &xs).pass);
        let c = fitted_g_n_constant(&fam, &ns, &xs);
        assert!(c.is_finite() && c < DEFAULT_ENVELOPE_C, "{c}");
        assert!(check_g_n_prime_envelope(&fam, &ns, &xs).pass);
        let conv = check_g_n_convergence(&fam, &ns, &xs);
        assert!(conv.pass, "{conv:?}");
    }

    #[test]
    fn f_family() {
        assert_eq!(f_plus(-2.0), 0.0);
        assert_relative_eq!(f_plus(std::f64::consts::E), 0.0, epsilon = 1e-15);
        assert_eq!(f_minus(3.0), 0.0);
        assert_relative_eq!(f_minus(-1.0), 1.0, epsilon = 1e-15);
        for x in [-3.0, -0.2, 0.0, 0.4, 5.0] {
            assert_relative_eq!(f_full(x), f_plus(x) + f_minus(x), epsilon = 1e-15);
            assert_relative_eq!(f_full(-x), -f_full(x), epsilon = 1e-15);
        }
    }

    #[test]
    fn f_eps_pieces_match() {
        let eps = 0.1;
        assert_relative_eq!(f_eps_inner(eps, eps), -0.115129, epsilon = 1e-6);
        assert_relative_eq!(f_eps_outer(eps, eps), -0.115129, epsilon = 1e-6);
        assert_relative_eq!(f_eps_d1(eps, eps), -2.302585, epsilon = 1e-6);
        assert_relative_eq!(f_eps_d1(eps, eps * (1.0 + 1e-12)), -2.302585, epsilon = 1e-6);
        for e in [0.5, 0.1, 0.01] {
            assert!(f_eps_c1_defect(e) < 1e-15);
            // Numerical derivative of F_ε against the stated F_ε'.
            for x in [-0.1, 0.3 * e, 0.9 * e, 1.5 * e, 2.0] {
                let h = 1e-7 * e;
                let d = (f_eps(e, x + h) - f_eps(e, x - h)) / (2.0 * h);
                assert!((d - f_eps_d1(e, x)).abs() < 1e-5, "eps={e} x={x}");
            }
            for x in [0.3 * e, 1.5 * e] {
                let h = 1e-5 * e;
                let d = (f_eps_d1(e, x + h) - f_eps_d1(e, x - h)) / (2.0 * h);
                assert!((d - f_eps_d2(e, x)).abs() < 1e-4 * (1.0 + d.abs()));
            }
        }
    }

    #[test]
    fn f_eps_gap_bound() {
        let xs: Vec<f64> = (0..4001).map(|i| -1.0 + 5.0 * i as f64 / 4000.0).collect();
        for eps in [0.1, 0.01] {
            let c = check_f_eps_gap(eps, &xs);
            assert!(c.pass, "{c:?}");
            // The bound is attained for x > ε.
            assert!(c.max_ratio > 1.0 - 1e-12);
        }
    }
}
