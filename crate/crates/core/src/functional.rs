//! The principal-value functional `C_t(a) = v.p. ∫_0^t 2H s^{2H-1} / (B_s - a) ds`
//! by three routes: the cut-off time integral, the discrete Hilbert
//! transform of the weighted local time, and (for `H < 1/2`) the
//! generalised quadratic covariation with `log|x - a|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ladder::{resolution_floor, EpsLadder, PVEstimate, DEFAULT_PV_TOL};
use crate::model::{pow_nonneg, HurstIndex, Regime};
use crate::occupation::{boundedness, local_time, BoundednessCheck, FieldKind, LocalTimeField, SpatialGrid};
use crate::sampler::{SamplePath, Sampler};
use crate::stats::MeanSe;

/// Knobs shared by the cut-off estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvOptions {
    /// Multiplier `c` of the resolution floor `c T^H n^{-H}`.
    pub floor_c: f64,
    /// Convergence tolerance on the last three rungs.
    pub tol: f64,
}

impl Default for PvOptions {
    fn default() -> Self {
        Self {
            floor_c: 1.0,
            tol: DEFAULT_PV_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Route {
    TimeIntegral,
    HilbertOfLocalTime,
    QuadraticCovariation,
}

impl Route {
    pub fn require_regime(self, h: HurstIndex) -> Result<()> {
        match self {
            Route::QuadraticCovariation => h.require(Regime::Sub),
            _ => Ok(()),
        }
    }
}

/// One estimate of `C_t(a)` on one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSample {
    pub hurst: HurstIndex,
    pub a: f64,
    pub t: f64,
    pub route: Route,
    pub estimate: PVEstimate,
    pub path_seed: u64,
}

impl FunctionalSample {
    /// JSON record `{H, a, t, route, value, eps_ladder, rungs, seed}`.
    pub fn record(&self) -> serde_json::Value {
        serde_json::json!({
            "H": self.hurst.value(),
            "a": self.a,
            "t": self.t,
            "route": self.route,
            "value": self.estimate.value,
            "eps_ladder": self.estimate.eps_ladder,
            "rungs": self.estimate.rung_values,
            "seed": self.path_seed,
        })
    }
}

fn check_ladder(path: &SamplePath, ladder: &EpsLadder, opts: &PvOptions) -> Result<()> {
    ladder.require_floor(resolution_floor(path.grid(), opts.floor_c))
}

/// Cut-off sums `Σ_{i < steps} 1{|B_i - a| >= ε} w_i / (B_i - a)`, one per rung.
fn time_rungs(path: &SamplePath, a: f64, ladder: &EpsLadder, range: std::ops::Range<usize>) -> Vec<f64> {
    let w = path.grid().ds2h_weights();
    let vals = path.values();
    ladder
        .rungs()
        .iter()
        .map(|&eps| {
            let mut acc = 0.0;
            for i in range.clone() {
                let d = vals[i] - a;
                if d.abs() >= eps {
                    acc += w[i] / d;
                }
            }
            acc
        })
        .collect()
}

/// `C_T(a)` over the whole path by the cut-off time integral.
pub fn pv_time_integral(
    path: &SamplePath,
    a: f64,
    ladder: &EpsLadder,
    opts: &PvOptions,
) -> Result<PVEstimate> {
    pv_time_integral_until(path, a, ladder, opts, path.grid().steps())
}

/// `C_t(a)` with `t = steps * dt`.
pub fn pv_time_integral_until(
    path: &SamplePath,
    a: f64,
    ladder: &EpsLadder,
    opts: &PvOptions,
    steps: usize,
) -> Result<PVEstimate> {
    check_ladder(path, ladder, opts)?;
    let steps = steps.min(path.grid().steps());
    Ok(PVEstimate::from_rungs(ladder, time_rungs(path, a, ladder, 0..steps), opts.tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

/// One-sided functional: `(± log ε) L(a, t) + Σ 1{±(B_i - a) >= ε} w_i / (B_i - a)`,
/// with `L` read from the weighted field of the same path.
pub fn one_sided(
    path: &SamplePath,
    field: &LocalTimeField,
    a: f64,
    side: Side,
    ladder: &EpsLadder,
    opts: &PvOptions,
) -> Result<PVEstimate> {
    check_ladder(path, ladder, opts)?;
    field.require_kind(FieldKind::Weighted)?;
    let lt = field.value_at(a);
    let w = path.grid().ds2h_weights();
    let vals = &path.values()[..path.grid().steps()];
    let sign = match side {
        Side::Plus => 1.0,
        Side::Minus => -1.0,
    };
    let rungs = ladder
        .rungs()
        .iter()
        .map(|&eps| {
            let mut acc = sign * eps.ln() * lt;
            for (v, wi) in vals.iter().zip(w) {
                let d = v - a;
                if sign * d >= eps {
                    acc += wi / d;
                }
            }
            acc
        })
        .collect();
    Ok(PVEstimate::from_rungs(ladder, rungs, opts.tol))
}

/// `C_t(a)` as `v.p. ∫ L(x, t) / (x - a) dx` over the weighted field, by the
/// midpoint rule with bins closer than `max(ε, h/2)` to `a` left out. Once
/// `ε` is under one bin the rungs equal `π` times the field's discrete
/// Hilbert transform.
pub fn from_local_time(field: &LocalTimeField, a: f64, ladder: &EpsLadder, tol: f64) -> Result<PVEstimate> {
    field.require_kind(FieldKind::Weighted)?;
    let (lo, hi) = (field.grid.lo(), field.grid.hi());
    if !(a > lo && a < hi) {
        return Err(Error::SingularityOffGrid { a, lo, hi });
    }
    let rungs = ladder.rungs().iter().map(|&e| field.pv_sum(a, e)).collect();
    Ok(PVEstimate::from_rungs(ladder, rungs, tol))
}

/// Number of grid steps in `lag`.
fn lag_steps(path: &SamplePath, lag: f64) -> Result<usize> {
    let dt = path.grid().dt();
    let k = (lag / dt).round();
    if !(k >= 1.0) || (k * dt - lag).abs() > 1e-9 * lag || k as usize > path.grid().steps() {
        return Err(Error::LagNotOnGrid { lag, step: dt });
    }
    Ok(k as usize)
}

/// `ε^{-2H} Σ_{s_i <= t - ε} (f(B_{s_i + ε}) - f(B_{s_i})) (B_{s_i + ε} - B_{s_i}) w_i`.
pub fn qcov<F: Fn(f64) -> f64>(path: &SamplePath, f: F, lag: f64) -> Result<f64> {
    path.hurst().require(Regime::Sub)?;
    let k = lag_steps(path, lag)?;
    let n = path.grid().steps();
    let w = path.grid().ds2h_weights();
    let v = path.values();
    let mut acc = 0.0;
    for i in 0..=(n - k).min(n - 1) {
        let (x0, x1) = (v[i], v[i + k]);
        acc += (f(x1) - f(x0)) * (x1 - x0) * w[i];
    }
    Ok(acc / pow_nonneg(lag, path.hurst().two_h()))
}

/// Both sides of the Bouleau-Yor identity on one path: `qcov(f)` and the
/// integrated-by-parts space side `∫ f'(x) L(x, t) dx` over the weighted
/// field on `grid`.
pub fn bouleau_yor_sides<F, G>(
    path: &SamplePath,
    f: F,
    f_prime: G,
    lag: f64,
    grid: &SpatialGrid,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let q = qcov(path, f, lag)?;
    let field = local_time(path, grid, FieldKind::Weighted)?;
    Ok((q, field.integrate(f_prime)))
}

/// `|qcov(f) - ∫ f' L dx|` on one path.
pub fn bouleau_yor_check<F, G>(path: &SamplePath, f: F, f_prime: G, lag: f64, grid: &SpatialGrid) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let (q, s) = bouleau_yor_sides(path, f, f_prime, lag, grid)?;
    Ok((q - s).abs())
}

/// `F(x) = x log|x| - x` with `F(0) = 0`.
pub fn yamada_f(x: f64) -> f64 {
    crate::mollifier::f_full(x)
}

/// Implied Skorohod integral `F(B_t - a) - F(-a) - C_t(a) / 2` at the path's horizon.
pub fn yamada_residual(path: &SamplePath, a: f64, ladder: &EpsLadder, opts: &PvOptions) -> Result<f64> {
    yamada_residual_until(path, a, ladder, opts, path.grid().steps())
}

/// Same at `t = steps * dt`.
pub fn yamada_residual_until(
    path: &SamplePath,
    a: f64,
    ladder: &EpsLadder,
    opts: &PvOptions,
    steps: usize,
) -> Result<f64> {
    let steps = steps.min(path.grid().steps());
    let c = pv_time_integral_until(path, a, ladder, opts, steps)?.value;
    Ok(yamada_f(path.values()[steps] - a) - yamada_f(-a) - 0.5 * c)
}

/// `H_0 = H` for `H <= 2/3`, `1 - H/2` above.
pub fn continuity_exponent(h: HurstIndex) -> f64 {
    let v = h.value();
    if v <= 2.0 / 3.0 {
        v
    } else {
        1.0 - 0.5 * v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementRow {
    pub t: f64,
    pub t_prime: f64,
    /// Monte Carlo `E|C_{t'}(a) - C_t(a)|^2`.
    pub second_moment: MeanSe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityTable {
    pub hurst: HurstIndex,
    pub exponent: f64,
    pub eps: f64,
    pub rows: Vec<IncrementRow>,
}

impl ContinuityTable {
    /// Boundedness of `E|ΔC|^2 / (t' - t)^{2 H_0}` over shrinking gaps.
    pub fn ratio_check(&self, z: f64) -> BoundednessCheck {
        let rows: Vec<(f64, MeanSe)> = self
            .rows
            .iter()
            .map(|r| (r.t_prime - r.t, r.second_moment))
            .collect();
        boundedness(&rows, 2.0 * self.exponent, z)
    }
}

/// Monte Carlo `E|C_{t'}(a) - C_t(a)|^2` for pairs with shrinking gaps,
/// using the smallest cut-off of `ladder` for every increment (`H > 1/2`).
pub fn continuity_modulus(
    sampler: &Sampler,
    a: f64,
    pairs: &[(f64, f64)],
    paths: usize,
    master_seed: u64,
    ladder: &EpsLadder,
    opts: &PvOptions,
) -> Result<ContinuityTable> {
    let grid = sampler.grid();
    let h = grid.hurst();
    h.require(Regime::Super)?;
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no time pairs".into()));
    }
    for &(t, tp) in pairs {
        if !(t >= 0.0 && tp >= t && tp <= grid.horizon() * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument(format!("bad time pair ({t}, {tp})")));
        }
    }
    if pairs.windows(2).any(|w| w[1].1 - w[1].0 >= w[0].1 - w[0].0) {
        return Err(Error::InvalidArgument("gaps must be decreasing".into()));
    }
    ladder.require_floor(resolution_floor(grid, opts.floor_c))?;
    let eps = ladder.smallest();
    let last = EpsLadder::new(vec![eps])?;
    let ranges: Vec<(usize, usize)> = pairs
        .iter()
        .map(|&(t, tp)| (grid.index_at(t), grid.index_at(tp)))
        .collect();
    let per_path: Vec<Vec<f64>> = sampler.map_paths(master_seed, paths, |_, path| {
        ranges
            .iter()
            .map(|&(i0, i1)| time_rungs(&path, a, &last, i0..i1)[0].powi(2))
            .collect()
    });
    let rows = pairs
        .iter()
        .enumerate()
        .map(|(k, &(t, tp))| {
            let col: Vec<f64> = per_path.iter().map(|v| v[k]).collect();
            IncrementRow {
                t,
                t_prime: tp,
                second_moment: MeanSe::from_slice(&col),
            }
        })
        .collect();
    Ok(ContinuityTable {
        hurst: h,
        exponent: continuity_exponent(h),
        eps,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::sampler::CirculantSampler;
    use std::sync::Arc;

    fn hurst(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    fn path(hv: f64, n: usize, seed: u64) -> SamplePath {
        let g = Arc::new(TimeGrid::new(hurst(hv), 1.0, n).unwrap());
        CirculantSampler::new(g).unwrap().sample(seed)
    }

    #[test]
    fn far_level_is_plain_riemann_sum() {
        let p = path(0.7, 512, 1);
        let a = 10.0;
        let ladder = EpsLadder::default_for(p.grid(), 1.0);
        let est = pv_time_integral(&p, a, &ladder, &PvOptions::default()).unwrap();
        let w = p.grid().ds2h_weights();
        let direct: f64 = (0..512).map(|i| w[i] / (p.values()[i] - a)).sum();
        for r in &est.rung_values {
            assert_eq!(*r, direct);
        }
        assert!(est.converged);
        assert_eq!(est.diag, 0.0);
    }

    #[test]
    fn reflection_negates_exactly() {
        let p = path(0.6, 1024, 2);
        let ladder = EpsLadder::default_for(p.grid(), 1.0);
        let opts = PvOptions::default();
        let a = 0.2;
        let e = pv_time_integral(&p, a, &ladder, &opts).unwrap();
        let r = pv_time_integral(&p.reflected(), -a, &ladder, &opts).unwrap();
        assert_eq!(e.negated().rung_values, r.rung_values);
    }

    #[test]
    fn brownian_weights_are_plain_steps() {
        let p = path(0.5, 256, 3);
        let ladder = EpsLadder::default_for(p.grid(), 1.0);
        let e = pv_time_integral(&p, 0.1, &ladder, &PvOptions::default()).unwrap();
        let dt = 1.0 / 256.0;
        let eps = ladder.smallest();
        let direct: f64 = p.values()[..256]
            .iter()
            .filter(|v| (*v - 0.1).abs() >= eps)
            .map(|v| dt / (v - 0.1))
            .sum();
        assert!((e.value - direct).abs() < 1e-12 * (1.0 + direct.abs()));
    }

    #[test]
    fn ladder_below_resolution_is_rejected() {
        let p = path(0.7, 256, 4);
        let ladder = EpsLadder::geometric(1e-3, 3).unwrap();
        assert!(matches!(
            pv_time_integral(&p, 0.0, &ladder, &PvOptions::default()),
            Err(Error::LadderBelowResolution { .. })
        ));
    }

    #[test]
    fn one_sided_parts_sum_to_two_sided() {
        let p = path(0.7, 2048, 5);
        let grid = SpatialGrid::default_for(p.hurst(), 1.0, 2048);
        let field = local_time(&p, &grid, FieldKind::Weighted).unwrap();
        let ladder = EpsLadder::default_for(p.grid(), 1.0);
        let opts = PvOptions::default();
        let plus = one_sided(&p, &field, 0.0, Side::Plus, &ladder, &opts).unwrap();
        let minus = one_sided(&p, &field, 0.0, Side::Minus, &ladder, &opts).unwrap();
        let two = pv_time_integral(&p, 0.0, &ladder, &opts).unwrap();
        for k in 0..ladder.len() {
            let s = plus.rung_values[k] + minus.rung_values[k];
            assert!((s - two.rung_values[k]).abs() < 1e-9 * (1.0 + two.rung_values[k].abs()));
        }
        let plain = local_time(&p, &grid, FieldKind::Plain).unwrap();
        assert!(one_sided(&p, &plain, 0.0, Side::Plus, &ladder, &opts).is_err());
    }

    #[test]
    fn one_sided_far_level() {
        let p = path(0.7, 512, 6);
        let grid = SpatialGrid::default_for(p.hurst(), 1.0, 512);
        let field = local_time(&p, &grid, FieldKind::Weighted).unwrap();
        let ladder = EpsLadder::default_for(p.grid(), 1.0);
        let opts = PvOptions::default();
        // Level beyond the field grid: no local time and an empty upper side.
        let a = 20.0;
        let plus = one_sided(&p, &field, a, Side::Plus, &ladder, &opts).unwrap();
        assert!(plus.rung_values.iter().all(|&v| v == 0.0));
        let minus = one_sided(&p, &field, a, Side::Minus, &ladder, &opts).unwrap();
        let two = pv_time_integral(&p, a, &ladder, &opts).unwrap();
        assert_eq!(minus.rung_values, two.rung_values);
    }

    #[test]
    fn local_time_route_single_bin() {
        let grid = SpatialGrid::centered(0.0, 0.1, 1.0).unwrap();
        let mut mass = vec![0.0; grid.bins()];
        let j = grid.locate(0.5).0;
        mass[j] = 3.0;
        let field = LocalTimeField {
            grid,
            mass,
            kind: FieldKind::Weighted,
            horizon: 1.0,
            hurst: hurst(0.7),
            steps: 16,
            seed: 0,
            clamped_fraction: 0.0,
        };
        let ladder = EpsLadder::geometric(0.2, 3).unwrap();
        let e = from_local_time(&field, -0.2, &ladder, 1e-9).unwrap();
        let c = grid.center(j);
        assert!((e.value - 3.0 * 0.1 / (c + 0.2)).abs() < 1e-14);
        assert!(matches!(
            from_local_time(&field, 5.0, &ladder, 1e-9),
            Err(Error::SingularityOffGrid { .. })
        ));
    }

    #[test]
    fn local_time_route_matches_discrete_hilbert() {
        let p = path(0.7, 4096, 7);
        let grid = SpatialGrid::default_for(p.hurst(), 1.0, 4096);
        let field = local_time(&p, &grid, FieldKind::Weighted).unwrap();
        let ladder = EpsLadder::default_for(p.grid(), 1.0);
        let hil = field.hilbert_at_centers();
        for j in (1..grid.bins() - 1).step_by(5) {
            let e = from_local_time(&field, grid.center(j), &ladder, DEFAULT_PV_TOL).unwrap();
            assert!((e.value - std::f64::consts::PI * hil[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn qcov_trivial_cases() {
        let p = path(0.3, 1024, 8);
        assert_eq!(qcov(&p, |_| 2.0, 4.0 / 1024.0).unwrap(), 0.0);
        assert!(matches!(
            qcov(&p, |x| x, 0.003),
            Err(Error::LagNotOnGrid { .. })
        ));
        let q = path(0.7, 64, 8);
        assert!(matches!(qcov(&q, |x| x, 1.0 / 64.0), Err(Error::WrongRegime { .. })));
    }

    #[test]
    fn qcov_identity_on_straight_line() {
        // B_s = s: each term is (lag)^2 w_i, so the sum is lag^{2-2H} Σ w_i.
        let h = hurst(0.25);
        let n = 100;
        let g = Arc::new(TimeGrid::new(h, 1.0, n).unwrap());
        let vals: Vec<f64> = g.nodes().to_vec();
        let p = SamplePath::from_values(Arc::clone(&g), vals).unwrap();
        let lag = 0.05;
        let q = qcov(&p, |x| x, lag).unwrap();
        let sum_w: f64 = g.ds2h_weights()[..=95].iter().sum();
        assert!((q - lag.powf(1.5) * sum_w).abs() < 1e-12);
    }

    #[test]
    fn bouleau_yor_zero_function() {
        let p = path(0.3, 512, 9);
        let grid = SpatialGrid::default_for(p.hurst(), 1.0, 512);
        let r = bouleau_yor_check(&p, |_| 0.0, |_| 0.0, 2.0 / 512.0, &grid).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn yamada_at_time_zero() {
        let p = path(0.7, 256, 10);
        let ladder = EpsLadder::default_for(p.grid(), 1.0);
        let r = yamada_residual_until(&p, 0.5, &ladder, &PvOptions::default(), 0).unwrap();
        assert_eq!(r, 0.0);
        assert_eq!(yamada_f(0.0), 0.0);
        assert!((yamada_f(std::f64::consts::E) - 0.0).abs() < 1e-15);
        assert_eq!(yamada_f(-1.0), 1.0);
    }

    #[test]
    fn continuity_exponent_case_split() {
        assert_eq!(continuity_exponent(hurst(0.6)), 0.6);
        assert!((continuity_exponent(hurst(0.8)) - 0.6).abs() < 1e-15);
        assert_eq!(continuity_exponent(hurst(2.0 / 3.0)), 2.0 / 3.0);
    }

    #[test]
    fn continuity_zero_gap_and_regime() {
        let g = Arc::new(TimeGrid::new(hurst(0.7), 1.0, 256).unwrap());
        let s = Sampler::Circulant(CirculantSampler::new(g).unwrap());
        let ladder = EpsLadder::default_for(s.grid(), 1.0);
        let t = continuity_modulus(&s, 0.0, &[(0.5, 0.6), (0.5, 0.5)], 20, 1, &ladder, &PvOptions::default())
            .unwrap();
        assert_eq!(t.rows[1].second_moment.mean, 0.0);
        assert!(t.rows[0].second_moment.mean > 0.0);
        let g = Arc::new(TimeGrid::new(hurst(0.4), 1.0, 256).unwrap());
        let s = Sampler::Circulant(CirculantSampler::new(g).unwrap());
        assert!(matches!(
            continuity_modulus(&s, 0.0, &[(0.5, 0.6)], 20, 1, &ladder, &PvOptions::default()),
            Err(Error::WrongRegime { .. })
        ));
    }

    #[test]
    fn record_fields() {
        let p = path(0.7, 256, 11);
        let ladder = EpsLadder::default_for(p.grid(), 1.0);
        let est = pv_time_integral(&p, 0.0, &ladder, &PvOptions::default()).unwrap();
        let s = FunctionalSample {
            hurst: p.hurst(),
            a: 0.0,
            t: 1.0,
            route: Route::TimeIntegral,
            estimate: est,
            path_seed: p.seed(),
        };
        let r = s.record();
        for key in ["H", "a", "t", "route", "value", "eps_ladder", "rungs", "seed"] {
            assert!(r.get(key).is_some(), "{key}");
        }
        assert_eq!(r["route"], "TimeIntegral");
    }
}
