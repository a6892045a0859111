//! Seeded Monte Carlo experiments shared by the verification suites and the
//! acceptance tests. Every experiment reduces per-path values in path order,
//! so results do not depend on the thread count.

use std::f64::consts::PI;
use std::sync::Arc;

use fbm_pv::functional::{
    bouleau_yor_sides, continuity_modulus, from_local_time, one_sided, pv_time_integral, qcov, yamada_residual,
    PvOptions, Side,
};
use fbm_pv::hilbert::{hilbert_transform_fft, SampledFunction};
use fbm_pv::occupation::{local_time, lt_modulus_scaling, occupation_check, BoundednessCheck};
use fbm_pv::sampler::derive_seed;
use fbm_pv::stats::{ks_two_sample, median, MeanSe};
use fbm_pv::{EpsLadder, FieldKind, HurstIndex, Method, Sampler, SpatialGrid, TimeGrid};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::record::Check;

pub fn sampler(h: f64, horizon: f64, n: usize, method: Method) -> Result<Sampler> {
    let grid = Arc::new(TimeGrid::new(HurstIndex::new(h)?, horizon, n)?);
    Ok(Sampler::new(method, grid)?)
}

/// Circulant for large grids, Cholesky for small ones.
pub fn auto_sampler(h: f64, horizon: f64, n: usize) -> Result<Sampler> {
    let method = if n <= 256 { Method::Cholesky } else { Method::Circulant };
    sampler(h, horizon, n, method)
}

/// Two-sample KS test between Cholesky and circulant endpoint marginals.
pub fn endpoint_ks(h: f64, n: usize, draws: usize, seed: u64) -> Result<Check> {
    let chol = sampler(h, 1.0, n, Method::Cholesky)?;
    let circ = sampler(h, 1.0, n, Method::Circulant)?;
    let a = chol.map_paths(derive_seed(seed, 1), draws, |_, p| p.endpoint());
    let b = circ.map_paths(derive_seed(seed, 2), draws, |_, p| p.endpoint());
    let ks = ks_two_sample(&a, &b);
    Ok(Check::assertion(
        &format!("endpoint KS H={h}"),
        ks.p_value > 1e-3,
        ks.p_value,
        1e-3,
        format!("D = {:.4}, {draws} draws each", ks.statistic),
    ))
}

/// Entrywise comparison of the empirical Gram matrix `E[B_i B_j]` (nodes
/// `1..=n`) with the exact covariance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GramReport {
    pub entries: usize,
    pub beyond_3se: usize,
    pub max_abs_z: f64,
    pub pass: bool,
}

pub fn gram_check(h: f64, n: usize, method: Method, paths: usize, seed: u64) -> Result<GramReport> {
    let s = sampler(h, 1.0, n, method)?;
    let hi = HurstIndex::new(h)?;
    let nodes = s.grid().nodes().to_vec();
    let m = n * (n + 1) / 2;
    let chunk = 500;
    let chunks = paths.div_ceil(chunk);
    // One (sum, sum of squares) accumulator per chunk, combined in order.
    let partial: Vec<(Vec<f64>, Vec<f64>)> = {
        use rayon::prelude::*;
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut s1 = vec![0.0; m];
                let mut s2 = vec![0.0; m];
                for k in c * chunk..((c + 1) * chunk).min(paths) {
                    let p = s.sample_path(seed, k as u64);
                    let v = &p.values()[1..];
                    let mut idx = 0;
                    for i in 0..n {
                        for j in i..n {
                            let x = v[i] * v[j];
                            s1[idx] += x;
                            s2[idx] += x * x;
                            idx += 1;
                        }
                    }
                }
                (s1, s2)
            })
            .collect()
    };
    let mut s1 = vec![0.0; m];
    let mut s2 = vec![0.0; m];
    for (a, b) in &partial {
        for k in 0..m {
            s1[k] += a[k];
            s2[k] += b[k];
        }
    }
    let np = paths as f64;
    let mut beyond = 0;
    let mut max_z = 0.0f64;
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            let mean = s1[idx] / np;
            let var = (s2[idx] / np - mean * mean) * np / (np - 1.0);
            let se = (var / np).sqrt();
            let exact = fbm_pv::model::covariance(hi, nodes[i + 1], nodes[j + 1]);
            let z = (mean - exact).abs() / se;
            if z > 3.0 {
                beyond += 1;
            }
            max_z = max_z.max(z);
            idx += 1;
        }
    }
    Ok(GramReport {
        entries: m,
        beyond_3se: beyond,
        max_abs_z: max_z,
        pass: (beyond as f64) <= 0.01 * m as f64 && max_z < 4.5,
    })
}

/// Weighted total mass against `t^{2H}` on every path; returns the worst error.
pub fn total_mass_error(s: &Sampler, grid: &SpatialGrid, paths: usize, seed: u64) -> Result<f64> {
    let errs = s.map_paths(seed, paths, |_, p| {
        local_time(&p, grid, FieldKind::Weighted).map(|f| (f.total_mass() - f.expected_total()).abs())
    });
    let errs = errs.into_iter().collect::<fbm_pv::Result<Vec<_>>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

/// Mean smooth-`Φ` occupation residual at `(n, h)` and at `(2n, h/2)`.
pub fn occupation_refinement(h: f64, n: usize, paths: usize, seed: u64) -> Result<(f64, f64)> {
    let phi = |x: f64| (-x * x).exp() * (2.0 * x).cos();
    let mut out = [0.0; 2];
    for (k, steps) in [n, 2 * n].into_iter().enumerate() {
        let s = auto_sampler(h, 1.0, steps)?;
        let base = SpatialGrid::default_for(HurstIndex::new(h)?, 1.0, n);
        let grid = SpatialGrid::centered(0.0, base.width() / (1 << k) as f64, 5.0)?;
        let r = s.map_paths(seed, paths, |_, p| occupation_check(&p, &grid, phi, FieldKind::Weighted));
        let r = r.into_iter().collect::<fbm_pv::Result<Vec<_>>>()?;
        out[k] = MeanSe::from_slice(&r).mean;
    }
    Ok((out[0], out[1]))
}

/// Options and ladder for one run.
#[derive(Debug, Clone)]
pub struct PvSetup {
    pub sampler: Sampler,
    pub grid: SpatialGrid,
    pub ladder: EpsLadder,
    pub opts: PvOptions,
}

impl PvSetup {
    /// Default spatial grid and ε-ladder for `(H, n)` at `T = 1`.
    pub fn defaults(h: f64, n: usize, floor_c: f64) -> Result<Self> {
        let sampler = auto_sampler(h, 1.0, n)?;
        let grid = SpatialGrid::default_for(sampler.grid().hurst(), 1.0, n);
        let ladder = EpsLadder::default_for(sampler.grid(), floor_c);
        Ok(Self {
            sampler,
            grid,
            ladder,
            opts: PvOptions {
                floor_c,
                ..PvOptions::default()
            },
        })
    }

    pub fn with_bandwidth(mut self, width: f64) -> Result<Self> {
        let half = 0.5 * self.grid.width() * self.grid.bins() as f64;
        self.grid = SpatialGrid::centered(0.0, width, half)?;
        Ok(self)
    }
}

/// Per-level outcome of the time-integral / local-time comparison on one
/// ensemble, with the one-sided decomposition defect of the same run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouteComparison {
    pub levels: Vec<f64>,
    /// Median over paths of `|C_time - C_lt| / |C_time|`, per level.
    pub median_rel: Vec<f64>,
    /// Largest `|plus + minus - two-sided| / |two-sided|` over paths, rungs and levels.
    pub one_sided_defect: f64,
}

pub fn route_comparison(setup: &PvSetup, levels: &[f64], paths: usize, seed: u64) -> Result<RouteComparison> {
    let per_path = setup.sampler.map_paths(seed, paths, |_, p| -> fbm_pv::Result<Vec<(f64, f64)>> {
        let field = local_time(&p, &setup.grid, FieldKind::Weighted)?;
        levels
            .iter()
            .map(|&a| {
                let ti = pv_time_integral(&p, a, &setup.ladder, &setup.opts)?;
                let lt = from_local_time(&field, a, &setup.ladder, setup.opts.tol)?;
                let plus = one_sided(&p, &field, a, Side::Plus, &setup.ladder, &setup.opts)?;
                let minus = one_sided(&p, &field, a, Side::Minus, &setup.ladder, &setup.opts)?;
                let mut defect = 0.0f64;
                for k in 0..ti.rung_values.len() {
                    let two = ti.rung_values[k];
                    let d = (plus.rung_values[k] + minus.rung_values[k] - two).abs() / two.abs().max(1e-300);
                    defect = defect.max(d);
                }
                Ok(((ti.value - lt.value).abs() / ti.value.abs(), defect))
            })
            .collect()
    });
    let per_path = per_path.into_iter().collect::<fbm_pv::Result<Vec<_>>>()?;
    let median_rel = (0..levels.len())
        .map(|k| median(&per_path.iter().map(|v| v[k].0).collect::<Vec<_>>()))
        .collect();
    let one_sided_defect = per_path.iter().flatten().map(|v| v.1).fold(0.0, f64::max);
    Ok(RouteComparison {
        levels: levels.to_vec(),
        median_rel,
        one_sided_defect,
    })
}

/// `g(x) = (1 - (x/w)^2)^3` on `|x| < w`.
pub fn bump(w: f64) -> impl Fn(f64) -> f64 + Copy {
    move |x: f64| {
        let u = x / w;
        if u.abs() < 1.0 {
            (1.0 - u * u).powi(3)
        } else {
            0.0
        }
    }
}

/// Per-path relative residuals of `∫ C_t(x) g(x) dx = ∓ π Σ (Hg)(B_i) w_i`:
/// first the minus form, then the plus form. The left side is `π` times
/// the discrete Hilbert transform of the weighted field at the bin
/// centers, paired with `g` by the midpoint rule.
pub fn occupation_hilbert_residuals(
    s: &Sampler,
    grid: &SpatialGrid,
    w: f64,
    paths: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let g = bump(w);
    let gs = SampledFunction::from_fn(-2.0 * w, 2.0 * w, 8193, g)?;
    let hg = hilbert_transform_fft(&gs);
    let centers = grid.centers();
    let gc: Vec<f64> = centers.iter().map(|&c| g(c)).collect();
    let width = grid.width();
    let r = s.map_paths(seed, paths, |_, p| -> fbm_pv::Result<(f64, f64)> {
        let field = local_time(&p, grid, FieldKind::Weighted)?;
        let hc = field.hilbert_at_centers();
        let lhs: f64 = hc.iter().zip(&gc).map(|(h, g)| PI * h * g * width).sum();
        let wts = p.grid().ds2h_weights();
        let time: f64 = p.values()[..wts.len()]
            .iter()
            .zip(wts)
            .map(|(&b, &wi)| hg.eval(b) * wi)
            .sum();
        let minus = -PI * time;
        let plus = PI * time;
        Ok(((lhs - minus).abs() / minus.abs(), (lhs - plus).abs() / plus.abs()))
    });
    Ok(r.into_iter().collect::<fbm_pv::Result<Vec<_>>>()?)
}

/// Ensemble checks for `H < 1/2`: the identity covariation, the
/// covariation/time-integral agreement at `a`, and Bouleau-Yor for `sin`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubRegimeReport {
    pub identity: MeanSe,
    pub expected_identity: f64,
    pub qcov_log: MeanSe,
    pub time_integral: MeanSe,
    pub by_qcov: MeanSe,
    pub by_space: MeanSe,
}

impl SubRegimeReport {
    pub fn checks(&self, a: f64, z: f64) -> Vec<Check> {
        let rel = (self.identity.mean - self.expected_identity).abs() / self.expected_identity;
        let zc = self.qcov_log.z_against(&self.time_integral);
        let zb = self.by_qcov.z_against(&self.by_space);
        vec![
            Check::assertion(
                "qcov(identity) vs t^2H",
                rel <= 0.03,
                rel,
                0.03,
                format!("{:.5} ± {:.5} vs {:.5}", self.identity.mean, self.identity.se, self.expected_identity),
            ),
            Check::assertion(
                &format!("qcov(log|x-a|) vs time integral, a={a}"),
                zc <= z,
                zc,
                z,
                format!(
                    "{:.4} ± {:.4} vs {:.4} ± {:.4}",
                    self.qcov_log.mean, self.qcov_log.se, self.time_integral.mean, self.time_integral.se
                ),
            ),
            Check::assertion(
                "Bouleau-Yor (f = sin)",
                zb <= z,
                zb,
                z,
                format!(
                    "{:.4} ± {:.4} vs {:.4} ± {:.4}",
                    self.by_qcov.mean, self.by_qcov.se, self.by_space.mean, self.by_space.se
                ),
            ),
        ]
    }
}

pub fn sub_regime(setup: &PvSetup, a: f64, lag_steps: usize, paths: usize, seed: u64) -> Result<SubRegimeReport> {
    let lag = lag_steps as f64 * setup.sampler.grid().dt();
    let rows = setup.sampler.map_paths(seed, paths, |_, p| -> fbm_pv::Result<[f64; 5]> {
        let id = qcov(&p, |x| x, lag)?;
        let lg = qcov(&p, |x| (x - a).abs().ln(), lag)?;
        let ti = pv_time_integral(&p, a, &setup.ladder, &setup.opts)?.value;
        let (bq, bs) = bouleau_yor_sides(&p, f64::sin, f64::cos, lag, &setup.grid)?;
        Ok([id, lg, ti, bq, bs])
    });
    let rows = rows.into_iter().collect::<fbm_pv::Result<Vec<_>>>()?;
    let col = |k: usize| MeanSe::from_slice(&rows.iter().map(|r| r[k]).collect::<Vec<_>>());
    let g = setup.sampler.grid();
    Ok(SubRegimeReport {
        identity: col(0),
        expected_identity: fbm_pv::model::pow_nonneg(g.horizon(), g.hurst().two_h()),
        qcov_log: col(1),
        time_integral: col(2),
        by_qcov: col(3),
        by_space: col(4),
    })
}

/// Ensemble mean of the implied Skorohod term at each level.
pub fn yamada_means(setup: &PvSetup, levels: &[f64], paths: usize, seed: u64) -> Result<Vec<MeanSe>> {
    let rows = setup.sampler.map_paths(seed, paths, |_, p| {
        levels
            .iter()
            .map(|&a| yamada_residual(&p, a, &setup.ladder, &setup.opts))
            .collect::<fbm_pv::Result<Vec<_>>>()
    });
    let rows = rows.into_iter().collect::<fbm_pv::Result<Vec<_>>>()?;
    Ok((0..levels.len())
        .map(|k| MeanSe::from_slice(&rows.iter().map(|r| r[k]).collect::<Vec<_>>()))
        .collect())
}

/// Increment pairs `(1/2, 1/2 + g)` for the shrinking gaps of the
/// continuity experiment.
pub const CONTINUITY_GAPS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

/// `E|C_{t'}(0) - C_t(0)|^2 / (t' - t)^{2 H_0}` over [`CONTINUITY_GAPS`].
pub fn continuity_check(h: f64, n: usize, paths: usize, seed: u64, z: f64) -> Result<BoundednessCheck> {
    let setup = PvSetup::defaults(h, n, 1.0)?;
    let pairs: Vec<(f64, f64)> = CONTINUITY_GAPS.iter().map(|&g| (0.5, 0.5 + g)).collect();
    let table = continuity_modulus(&setup.sampler, 0.0, &pairs, paths, seed, &setup.ladder, &setup.opts)?;
    Ok(table.ratio_check(z))
}

/// Level offsets of the local-time modulus experiment.
pub const MODULUS_OFFSETS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

/// `E|L(d, 1) - L(0, 1)|^2 / d^alpha` over [`MODULUS_OFFSETS`].
pub fn lt_modulus_check(h: f64, n: usize, alpha: f64, paths: usize, seed: u64, z: f64) -> Result<BoundednessCheck> {
    let s = auto_sampler(h, 1.0, n)?;
    let table = lt_modulus_scaling(&s, 1.0, 0.0, &MODULUS_OFFSETS, paths, seed, None)?;
    Ok(table.ratio_check(alpha, z))
}

pub fn boundedness_check(name: &str, b: &BoundednessCheck) -> Check {
    let ratios: Vec<String> = b.rows.iter().map(|r| format!("{:.4}±{:.4}", r.ratio, r.se)).collect();
    Check::assertion(
        name,
        b.pass,
        b.max_ratio,
        f64::INFINITY,
        format!("ratios [{}], slope {:.3}", ratios.join(", "), b.loglog_slope),
    )
}
