//! Verification suites: deterministic bounds and Monte Carlo identities.

use std::time::Instant;

use fbm_pv::density::{
    determinant_sandwich, density_increment_sample, increment_ratio_sample, lambda1_gap_scaling, lambda1_report,
    lambda34_eps_scaling, log_weighted_gap_scaling, log_weighted_report, power_inequality_grid, BoundReport,
    SamplePoint, ScalingCheck, DEFAULT_SAMPLE_SEED, DEFAULT_SAMPLE_SIZE,
};
use fbm_pv::mollifier::{
    check_f_eps_gap, check_g_n_convergence, check_g_n_envelope, check_g_n_prime_envelope, f_eps_c1_defect, log_grid,
    EnvelopeCheck, MollifierFamily,
};
use fbm_pv::quad::{gauss_kronrod, Tolerance};
use fbm_pv::stats::median;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiments::{
    occupation_hilbert_residuals, occupation_refinement, route_comparison, sub_regime, total_mass_error,
    yamada_means, PvSetup,
};
use crate::record::{Artifact, Check, EnsembleStat};

/// Hurst indices of the deterministic analysis checks.
pub const ANALYSIS_HURST: [f64; 3] = [0.6, 0.75, 0.9];
/// Exponent `β` used by the `Λ` checks.
pub const ANALYSIS_BETA: f64 = 0.5;

/// Gaps `0.05 * 2^-k`, `k = 0..5`.
pub fn gap_ladder() -> Vec<f64> {
    (0..5).map(|k| 0.05 * 0.5f64.powi(k)).collect()
}

fn report_check(r: &BoundReport) -> Check {
    Check::assertion(
        &r.lemma_id,
        r.pass,
        r.fitted_constant,
        r.limit.unwrap_or(f64::INFINITY),
        format!("{} samples, min ratio {:.3e}", r.entries.len(), r.min_ratio()),
    )
}

fn scaling_check(s: &ScalingCheck, label: &str, need_decreasing: bool) -> Check {
    let dec = s.decreasing();
    Check::assertion(
        &format!("{} {label}", s.name),
        s.pass && (!need_decreasing || dec),
        s.slope,
        s.bound,
        if need_decreasing {
            format!("slope >= bound, decreasing = {dec}")
        } else {
            "slope >= bound".to_string()
        },
    )
}

fn envelope_check(e: &EnvelopeCheck) -> Check {
    Check::assertion(
        &e.name,
        e.pass,
        e.max_ratio,
        1.0,
        format!("{} samples, worst at n = {}, x = {:.3e}", e.samples, e.worst_at.0, e.worst_at.1),
    )
}

/// Covariance inequalities on a seeded random sample: the determinant
/// sandwich, the increment ratios and the power inequality.
pub fn covariance_checks(seed: u64, count: usize) -> Result<(Vec<Check>, Vec<Artifact>)> {
    let (lo, up) = determinant_sandwich(seed, count)?;
    let ratios = increment_ratio_sample(seed, count);
    let power = power_inequality_grid(101);
    let mut checks = vec![report_check(&lo), report_check(&up), report_check(&power)];
    for st in &ratios.strata {
        let ok = st.first_min > 0.0 && st.second_min > 0.0 && st.first_max.is_finite() && st.second_max.is_finite();
        checks.push(Check::assertion(
            &format!("increment ratios H in [{}, {})", st.h_lo, st.h_hi),
            ok,
            st.first_max.max(st.second_max),
            f64::INFINITY,
            format!(
                "{} samples, first in [{:.3e}, {:.3e}], second in [{:.3e}, {:.3e}]",
                st.count, st.first_min, st.first_max, st.second_min, st.second_max
            ),
        ));
    }
    let artifacts = vec![
        Artifact::text("bounds/det-lower.jsonl", lo.json_lines()),
        Artifact::text("bounds/det-upper.jsonl", up.json_lines()),
        Artifact::text(
            "bounds/increment-ratios.json",
            serde_json::to_string_pretty(&ratios).expect("serializable"),
        ),
    ];
    Ok((checks, artifacts))
}

/// Density, `Λ`, log-weighted and mollifier checks; fully deterministic.
pub fn analysis_checks() -> Result<(Vec<Check>, Vec<Artifact>)> {
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();

    let inc = density_increment_sample(DEFAULT_SAMPLE_SEED, 2000)?;
    checks.push(report_check(&inc));
    artifacts.push(Artifact::text("bounds/density-increment.jsonl", inc.json_lines()));

    let mut points = Vec::new();
    for h in ANALYSIS_HURST {
        for (s, r) in [(2.0, 1.0), (1.0, 0.5), (1.2, 1.0)] {
            for (a, b) in [(0.0, 0.0), (0.5, -0.3)] {
                points.push(SamplePoint::new(h, s, r).at(a, b));
            }
        }
    }
    let l1 = lambda1_report(&points, ANALYSIS_BETA)?;
    checks.push(report_check(&l1));
    artifacts.push(Artifact::text("bounds/lambda1.jsonl", l1.json_lines()));

    let gaps = gap_ladder();
    let eps: Vec<f64> = (0..5).map(|k| 0.2 * 0.5f64.powi(k)).collect();
    let fam = MollifierFamily::new();
    let mut scaling = Vec::new();
    let mut lw_points = Vec::new();
    for h in ANALYSIS_HURST {
        let s = lambda1_gap_scaling(h, 1.0, 0.0, 0.0, ANALYSIS_BETA, &gaps)?;
        checks.push(scaling_check(&s, &format!("H={h}"), false));
        scaling.push(s);
        let (l3, l4) = lambda34_eps_scaling(h, 2.0, 1.0, 0.0, ANALYSIS_BETA, &eps)?;
        checks.push(scaling_check(&l3, &format!("H={h}"), true));
        checks.push(scaling_check(&l4, &format!("H={h}"), true));
        scaling.push(l3);
        scaling.push(l4);
        let alpha = (1.0 - h + 0.05).max(0.5);
        for a in [-2.0, -0.5, 0.0, 0.5, 2.0] {
            let s = log_weighted_gap_scaling(&fam, h, 1.0, a, alpha, &gaps)?;
            checks.push(scaling_check(&s, &format!("H={h} a={a}"), false));
            scaling.push(s);
            lw_points.push(SamplePoint::new(h, 2.0, 1.0).at(a, 0.0).with(&[alpha]));
        }
    }
    let lw = log_weighted_report(&fam, &lw_points)?;
    checks.push(report_check(&lw));
    artifacts.push(Artifact::text("bounds/log-weighted.jsonl", lw.json_lines()));
    artifacts.push(Artifact::text(
        "bounds/scaling.json",
        serde_json::to_string_pretty(&scaling).expect("serializable"),
    ));

    let ns = [2, 4, 8, 16, 32, 64, 128];
    let xs = log_grid(1e-4, 10.0, 60);
    let env = [
        check_g_n_envelope(&fam, &ns, &xs),
        check_g_n_prime_envelope(&fam, &ns, &xs),
        check_g_n_convergence(&fam, &ns, &xs),
    ];
    checks.extend(env.iter().map(envelope_check));

    let fx: Vec<f64> = (0..4001).map(|i| -1.0 + 5.0 * i as f64 / 4000.0).collect();
    for e in [0.1, 0.01] {
        checks.push(envelope_check(&check_f_eps_gap(e, &fx)));
        let d = f_eps_c1_defect(e);
        checks.push(Check::assertion(
            &format!("F_eps C1 at breaks, eps={e}"),
            d <= 1e-12,
            d,
            1e-12,
            "value and slope mismatch",
        ));
    }
    for n in [1u32, 2, 8, 64] {
        let top = 2.0 / n as f64;
        let mass = gauss_kronrod(|x| fam.zeta_n(n, x), 0.0, top, Tolerance::new(1e-14, 1e-14)).value;
        let err = (mass - 1.0).abs();
        checks.push(Check::assertion(
            &format!("zeta_n mass n={n}"),
            err <= 1e-10,
            err,
            1e-10,
            format!("integral {mass:.15}"),
        ));
    }
    Ok((checks, artifacts))
}

/// Result of the identity suite.
pub struct IdentityOutcome {
    pub checks: Vec<Check>,
    pub per_path: Vec<serde_json::Value>,
    pub ensemble: Vec<EnsembleStat>,
}

struct Budget {
    start: Instant,
    limit: Option<f64>,
}

impl Budget {
    fn check(&self, stage: &str) -> Result<()> {
        if let Some(l) = self.limit {
            let t = self.start.elapsed().as_secs_f64();
            if t > l {
                return Err(HarnessError::Budget(format!("{stage} finished at {t:.1}s, budget {l}s")));
            }
        }
        Ok(())
    }
}

/// Monte Carlo identities for the configured `(H, n, paths)`.
pub fn identity_checks(cfg: &ExperimentConfig, setup: &PvSetup, start: Instant) -> Result<IdentityOutcome> {
    let budget = Budget {
        start,
        limit: cfg.verify.budget_secs,
    };
    let v = &cfg.verify;
    let h = cfg.hurst;
    let seed = cfg.master_seed;
    let mut checks = Vec::new();
    let mut ensemble = Vec::new();

    let err = total_mass_error(&setup.sampler, &setup.grid, cfg.paths, seed)?;
    checks.push(Check::assertion(
        "weighted total mass = t^2H",
        err <= 1e-10,
        err,
        1e-10,
        format!("worst of {} paths", cfg.paths),
    ));
    let refine_n = cfg.steps.min(1024);
    let (r0, r1) = occupation_refinement(h, refine_n, cfg.paths.min(100), seed)?;
    checks.push(Check::assertion(
        "occupation residual under (h, ds) -> (h/2, ds/2)",
        r1 <= 0.65 * r0,
        r1 / r0,
        0.65,
        format!("mean residual {r0:.3e} -> {r1:.3e} at n = {refine_n}"),
    ));
    budget.check("occupation")?;

    let res = occupation_hilbert_residuals(&setup.sampler, &setup.grid, v.bump_half_width, cfg.paths, seed)?;
    let fine_n = 2 * cfg.steps;
    let fine = PvSetup {
        sampler: crate::experiments::sampler(h, cfg.horizon, fine_n, cfg.method.resolve(fine_n))?,
        ..setup.clone()
    }
    .with_bandwidth(0.5 * setup.grid.width())?;
    let res_fine = occupation_hilbert_residuals(&fine.sampler, &fine.grid, v.bump_half_width, cfg.paths, seed)?;
    let minus: Vec<f64> = res.iter().map(|r| r.0).collect();
    let plus: Vec<f64> = res.iter().map(|r| r.1).collect();
    let m0 = median(&minus);
    let m1 = median(&res_fine.iter().map(|r| r.0).collect::<Vec<_>>());
    let mp = median(&plus);
    checks.push(Check::assertion(
        "local-time Hilbert identity, median relative residual",
        m0 <= v.identity_tol,
        m0,
        v.identity_tol,
        format!("{} paths, n = {}, h = {:.4}", cfg.paths, cfg.steps, setup.grid.width()),
    ));
    checks.push(Check::assertion(
        "local-time Hilbert identity decreases under (n, h) -> (2n, h/2)",
        m1 < m0,
        m1,
        m0,
        format!("median {m0:.4e} -> {m1:.4e}"),
    ));
    checks.push(Check::diagnostic(
        "local-time Hilbert identity with the opposite sign",
        mp <= v.identity_tol,
        mp,
        v.identity_tol,
        "median relative residual if the right side is taken with a plus sign",
    ));
    let per_path = res
        .iter()
        .enumerate()
        .map(|(k, r)| json!({"path": k, "hilbert_identity_residual": r.0, "opposite_sign_residual": r.1}))
        .collect();
    budget.check("hilbert identity")?;

    let levels = if cfg.levels.is_empty() { vec![0.0] } else { cfg.levels.clone() };
    let cmp = route_comparison(setup, &levels, cfg.paths, seed)?;
    for (a, m) in cmp.levels.iter().zip(&cmp.median_rel) {
        checks.push(Check::diagnostic(
            &format!("route agreement a={a}"),
            *m <= 0.1,
            *m,
            0.1,
            "median |time integral - local-time route| / |time integral|",
        ));
    }
    checks.push(Check::assertion(
        "one-sided decomposition",
        cmp.one_sided_defect <= 0.1,
        cmp.one_sided_defect,
        0.1,
        "max relative defect of plus + minus against two-sided, all rungs",
    ));
    budget.check("routes")?;

    if h > 0.5 {
        let means = yamada_means(setup, &levels, v.ensemble_paths, seed)?;
        for (a, m) in levels.iter().zip(&means) {
            let z = m.z_against_value(0.0);
            checks.push(Check::assertion(
                &format!("Yamada residual mean a={a}"),
                z <= v.z,
                z,
                v.z,
                format!("{:.4e} ± {:.4e}", m.mean, m.se),
            ));
            ensemble.push(EnsembleStat::new(format!("yamada a={a}"), *m));
        }
        budget.check("yamada")?;
    }
    if h < 0.5 {
        let a = levels[0];
        let rep = sub_regime(setup, a, cfg.qcov.lag_steps, v.ensemble_paths, seed)?;
        checks.extend(rep.checks(a, v.z));
        ensemble.push(EnsembleStat::new("qcov identity", rep.identity));
        ensemble.push(EnsembleStat::new(format!("qcov log a={a}"), rep.qcov_log));
        ensemble.push(EnsembleStat::new(format!("time integral a={a}"), rep.time_integral));
        budget.check("covariation")?;
    }
    Ok(IdentityOutcome {
        checks,
        per_path,
        ensemble,
    })
}

/// Both deterministic batteries with the default sample.
pub fn bounds_checks() -> Result<(Vec<Check>, Vec<Artifact>)> {
    let (mut c, mut a) = covariance_checks(DEFAULT_SAMPLE_SEED, DEFAULT_SAMPLE_SIZE)?;
    let (c2, a2) = analysis_checks()?;
    c.extend(c2);
    a.extend(a2);
    Ok((c, a))
}
