//! Subcommand implementations. Each returns the run record together with
//! the files it would write, so runs can be compared byte for byte.

use std::fmt::Write as _;
use std::io::BufReader;
use std::sync::Arc;
use std::time::Instant;

use fbm_pv::functional::{from_local_time, pv_time_integral, qcov, FunctionalSample, PvOptions, Route};
use fbm_pv::hilbert::{hilbert_inverse, hilbert_transform, hilbert_transform_fft, SampledFunction, Tail};
use fbm_pv::model::pow_nonneg;
use fbm_pv::occupation::{default_bandwidth, local_time};
use fbm_pv::stats::{median, MeanSe};
use fbm_pv::{EpsLadder, FieldKind, HurstIndex, PVEstimate, Sampler, SpatialGrid, TimeGrid};
use serde_json::json;

use crate::config::{ExperimentConfig, Needs, RouteName};
use crate::error::{HarnessError, Result};
use crate::experiments::PvSetup;
use crate::record::{Artifact, Check, CommandSpec, EnsembleStat, Output, RunRecord, Suite};
use crate::verify;

pub fn route_label(r: RouteName) -> &'static str {
    match r {
        RouteName::TimeIntegral => "time_integral",
        RouteName::HilbertOfLocalTime => "hilbert_of_local_time",
        RouteName::QuadraticCovariation => "quadratic_covariation",
    }
}

/// Sampler, spatial grid (wide enough to hold every level), ladder and
/// options for a configuration.
pub fn setup(cfg: &ExperimentConfig) -> Result<PvSetup> {
    let h = HurstIndex::new(cfg.hurst)?;
    let grid = Arc::new(TimeGrid::new(h, cfg.horizon, cfg.steps)?);
    let sampler = Sampler::new(cfg.method.resolve(cfg.steps), grid.clone())?;
    let sg = &cfg.spatial_grid;
    let width = sg.bandwidth.unwrap_or_else(|| default_bandwidth(h, cfg.horizon, cfg.steps));
    let far = cfg.levels.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let half = (sg.coverage * pow_nonneg(cfg.horizon, cfg.hurst)).max(far + 2.0 * width);
    let spatial = SpatialGrid::centered(0.0, width, half)?;
    let ladder = match &cfg.eps_ladder.rungs {
        Some(r) => EpsLadder::new(r.clone())?,
        None => EpsLadder::default_for(&grid, cfg.eps_ladder.floor_c),
    };
    Ok(PvSetup {
        sampler,
        grid: spatial,
        ladder,
        opts: PvOptions {
            floor_c: cfg.eps_ladder.floor_c,
            tol: cfg.eps_ladder.tol,
        },
    })
}

fn finish(mut record: RunRecord, artifacts: Vec<Artifact>, start: Instant) -> Output {
    record.wall_clock_secs = start.elapsed().as_secs_f64();
    Output { record, artifacts }
}

pub fn cmd_sample(cfg: &ExperimentConfig) -> Result<Output> {
    let start = Instant::now();
    cfg.validate(&[Needs::Paths])?;
    let s = setup(cfg)?;
    let files = s.sampler.map_paths(cfg.master_seed, cfg.paths, |k, p| {
        let mut buf = Vec::new();
        p.write_csv(&mut buf).expect("writing to memory");
        (k, p.seed(), p.endpoint(), buf)
    });
    let mut record = RunRecord::new(CommandSpec::Sample, Some(cfg.clone()));
    let mut artifacts = Vec::new();
    let mut manifest = Vec::new();
    for (k, seed, end, buf) in files {
        let name = format!("paths/path_{k:05}.csv");
        manifest.push(json!({"index": k, "seed": seed, "file": name}));
        record.per_path.push(json!({"index": k, "seed": seed, "endpoint": end}));
        artifacts.push(Artifact::new(name, buf));
    }
    let m = json!({
        "H": cfg.hurst,
        "T": cfg.horizon,
        "n": cfg.steps,
        "method": format!("{:?}", cfg.method.resolve(cfg.steps)).to_lowercase(),
        "master_seed": cfg.master_seed,
        "paths": manifest,
    });
    artifacts.push(Artifact::text("manifest.json", serde_json::to_string_pretty(&m).expect("json")));
    Ok(finish(record, artifacts, start))
}

fn single_rung(v: f64, lag: f64) -> PVEstimate {
    PVEstimate {
        value: v,
        eps_ladder: vec![lag],
        rung_values: vec![v],
        converged: v.is_finite(),
        diag: 0.0,
    }
}

pub fn cmd_pv(cfg: &ExperimentConfig) -> Result<Output> {
    let start = Instant::now();
    cfg.validate(&[Needs::Paths, Needs::Levels])?;
    let s = setup(cfg)?;
    let h = s.sampler.grid().hurst();
    let lag = cfg.qcov.lag_steps as f64 * s.sampler.grid().dt();
    let routes = cfg.routes.clone();
    let levels = cfg.levels.clone();
    let per_path = s.sampler.map_paths(cfg.master_seed, cfg.paths, |_, p| -> fbm_pv::Result<Vec<FunctionalSample>> {
        let field = local_time(&p, &s.grid, FieldKind::Weighted)?;
        let mut out = Vec::with_capacity(levels.len() * routes.len());
        for &a in &levels {
            for &r in &routes {
                let route = Route::from(r);
                route.require_regime(h)?;
                let estimate = match r {
                    RouteName::TimeIntegral => pv_time_integral(&p, a, &s.ladder, &s.opts)?,
                    RouteName::HilbertOfLocalTime => from_local_time(&field, a, &s.ladder, s.opts.tol)?,
                    RouteName::QuadraticCovariation => single_rung(qcov(&p, |x| (x - a).abs().ln(), lag)?, lag),
                };
                out.push(FunctionalSample {
                    hurst: h,
                    a,
                    t: cfg.horizon,
                    route,
                    estimate,
                    path_seed: p.seed(),
                });
            }
        }
        Ok(out)
    });
    let per_path = per_path.into_iter().collect::<fbm_pv::Result<Vec<_>>>()?;

    let mut record = RunRecord::new(CommandSpec::Pv, Some(cfg.clone()));
    let mut jsonl = String::new();
    for (k, samples) in per_path.iter().enumerate() {
        let mut values = serde_json::Map::new();
        for fs in samples {
            writeln!(jsonl, "{}", fs.record()).expect("string write");
            let key = format!("a={} {}", fs.a, route_label(RouteName::from_route(fs.route)));
            values.insert(key, json!(fs.estimate.value));
        }
        record.per_path.push(json!({"path": k, "seed": samples.first().map(|f| f.path_seed), "values": values}));
    }

    let nr = routes.len();
    let mut csv = String::from("a,route,mean,se,converged_fraction,delta_mean,delta_se,delta_median_rel\n");
    for (li, &a) in levels.iter().enumerate() {
        let col = |ri: usize| -> Vec<&FunctionalSample> { per_path.iter().map(|v| &v[li * nr + ri]).collect() };
        let base: Vec<f64> = col(0).iter().map(|f| f.estimate.value).collect();
        for (ri, &r) in routes.iter().enumerate() {
            let c = col(ri);
            let vals: Vec<f64> = c.iter().map(|f| f.estimate.value).collect();
            let conv = c.iter().filter(|f| f.estimate.converged).count() as f64 / c.len() as f64;
            let m = MeanSe::from_slice(&vals);
            let label = route_label(r);
            record.ensemble.push(EnsembleStat::new(format!("a={a} {label}"), m));
            record.checks.push(Check::diagnostic(
                &format!("ladder converged a={a} {label}"),
                conv == 1.0,
                conv,
                1.0,
                "fraction of paths whose last three rungs agree within tol",
            ));
            let (dm, dse, dmed) = if ri == 0 {
                (String::new(), String::new(), String::new())
            } else {
                let d: Vec<f64> = vals.iter().zip(&base).map(|(x, b)| x - b).collect();
                let rel: Vec<f64> = d.iter().zip(&base).map(|(d, b)| (d / b).abs()).collect();
                let dm = MeanSe::from_slice(&d);
                let base_label = route_label(routes[0]);
                record.ensemble.push(EnsembleStat::new(format!("a={a} {label} - {base_label}"), dm));
                (format!("{:e}", dm.mean), format!("{:e}", dm.se), format!("{:e}", median(&rel)))
            };
            writeln!(
                csv,
                "{a},{label},{:e},{:e},{conv},{dm},{dse},{dmed}",
                m.mean, m.se
            )
            .expect("string write");
        }
    }
    let artifacts = vec![
        Artifact::text("functionals.jsonl", jsonl),
        Artifact::text("ensemble.csv", csv),
    ];
    Ok(finish(record, artifacts, start))
}

impl RouteName {
    pub fn from_route(r: Route) -> Self {
        match r {
            Route::TimeIntegral => RouteName::TimeIntegral,
            Route::HilbertOfLocalTime => RouteName::HilbertOfLocalTime,
            Route::QuadraticCovariation => RouteName::QuadraticCovariation,
        }
    }
}

pub fn cmd_localtime(cfg: &ExperimentConfig) -> Result<Output> {
    let start = Instant::now();
    cfg.validate(&[Needs::Paths])?;
    let s = setup(cfg)?;
    let kind = cfg.spatial_grid.kind;
    let fields = s.sampler.map_paths(cfg.master_seed, cfg.paths, |_, p| local_time(&p, &s.grid, kind));
    let fields = fields.into_iter().collect::<fbm_pv::Result<Vec<_>>>()?;
    let mut record = RunRecord::new(CommandSpec::Localtime, Some(cfg.clone()));
    let mut artifacts = Vec::new();
    let mut worst = 0.0f64;
    for (k, f) in fields.iter().enumerate() {
        let mut buf = Vec::new();
        f.write_csv(&mut buf)?;
        artifacts.push(Artifact::new(format!("localtime/field_{k:05}.csv"), buf));
        artifacts.push(Artifact::text(
            format!("localtime/field_{k:05}.json"),
            serde_json::to_string_pretty(&f.sidecar()).expect("json"),
        ));
        let err = (f.total_mass() - f.expected_total()).abs();
        worst = worst.max(err);
        record.per_path.push(json!({
            "path": k,
            "seed": f.seed,
            "total_mass": f.total_mass(),
            "expected_total": f.expected_total(),
            "clamped_fraction": f.clamped_fraction,
        }));
    }
    let masses: Vec<f64> = fields.iter().map(|f| f.total_mass()).collect();
    record.ensemble.push(EnsembleStat::new("total mass", MeanSe::from_slice(&masses)));
    record.checks.push(Check::assertion(
        "total mass",
        worst <= 1e-10,
        worst,
        1e-10,
        "largest |total mass - expected| over paths",
    ));
    Ok(finish(record, artifacts, start))
}

pub fn cmd_qcov(cfg: &ExperimentConfig) -> Result<Output> {
    let start = Instant::now();
    cfg.validate(&[Needs::Paths, Needs::SubRegime])?;
    let s = setup(cfg)?;
    let lag = cfg.qcov.lag_steps as f64 * s.sampler.grid().dt();
    let levels = cfg.levels.clone();
    let rows = s.sampler.map_paths(cfg.master_seed, cfg.paths, |_, p| -> fbm_pv::Result<(u64, Vec<f64>)> {
        let mut v = vec![qcov(&p, |x| x, lag)?];
        for &a in &levels {
            v.push(qcov(&p, |x| (x - a).abs().ln(), lag)?);
        }
        Ok((p.seed(), v))
    });
    let rows = rows.into_iter().collect::<fbm_pv::Result<Vec<_>>>()?;
    let mut record = RunRecord::new(CommandSpec::Qcov, Some(cfg.clone()));
    let mut csv = String::from("path,seed,identity");
    for a in &levels {
        write!(csv, ",log_a={a}").expect("string write");
    }
    csv.push('\n');
    for (k, (seed, v)) in rows.iter().enumerate() {
        let cells: Vec<String> = v.iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(csv, "{k},{seed},{}", cells.join(",")).expect("string write");
        record.per_path.push(json!({"path": k, "seed": seed, "values": v}));
    }
    let col = |j: usize| MeanSe::from_slice(&rows.iter().map(|r| r.1[j]).collect::<Vec<_>>());
    let id = col(0);
    record.ensemble.push(EnsembleStat::new("identity", id));
    for (j, a) in levels.iter().enumerate() {
        record.ensemble.push(EnsembleStat::new(format!("log a={a}"), col(j + 1)));
    }
    let expected = pow_nonneg(cfg.horizon, 2.0 * cfg.hurst);
    let rel = (id.mean - expected).abs() / expected;
    record.checks.push(Check::diagnostic(
        "qcov(identity) vs t^2H",
        rel <= 0.03,
        rel,
        0.03,
        format!("{:.5} ± {:.5} vs {expected:.5}", id.mean, id.se),
    ));
    Ok(finish(record, vec![Artifact::text("qcov.csv", csv)], start))
}

pub fn cmd_hilbert(input: &std::path::Path, fft: bool, inverse: bool) -> Result<Output> {
    let start = Instant::now();
    let file = std::fs::File::open(input)
        .map_err(|e| HarnessError::Validation(format!("input: cannot open {}: {e}", input.display())))?;
    let mut f =
        SampledFunction::read_csv(BufReader::new(file)).map_err(|e| HarnessError::Validation(format!("input: {e}")))?;
    // Inputs that do not vanish at the ends (e.g. a previous transform)
    // continue as c / (x - mid) beyond the grid.
    if !f.is_compactly_supported() {
        let center = 0.5 * (f.x_min() + f.x_max());
        f = f.with_tail(Tail::Reciprocal { center })?;
    }
    let g = match (fft, inverse) {
        (false, false) => hilbert_transform(&f),
        (true, false) => hilbert_transform_fft(&f),
        (false, true) => hilbert_inverse(&f),
        (true, true) => hilbert_transform_fft(&f).scaled(-1.0),
    };
    let mut buf = Vec::new();
    g.write_csv(&mut buf)?;
    let spec = CommandSpec::Hilbert {
        input: input.to_path_buf(),
        fft,
        inverse,
    };
    let mut record = RunRecord::new(spec, None);
    let (nf, ng) = (f.l2_norm_sq(), g.l2_norm_sq());
    let iso = (ng / nf - 1.0).abs();
    record.checks.push(Check::diagnostic(
        "isometry",
        iso <= 0.01,
        iso,
        0.01,
        format!("|Hf|^2 = {ng:.6e}, |f|^2 = {nf:.6e}"),
    ));
    Ok(finish(record, vec![Artifact::new("hilbert.csv", buf)], start))
}

pub fn cmd_verify(cfg: &ExperimentConfig, suite: Suite) -> Result<Output> {
    let start = Instant::now();
    cfg.validate(&[Needs::Paths])?;
    let mut record = RunRecord::new(CommandSpec::Verify { suite }, Some(cfg.clone()));
    let mut artifacts = Vec::new();
    if matches!(suite, Suite::Bounds | Suite::All) {
        let (c, a) = verify::bounds_checks()?;
        record.checks.extend(c);
        artifacts.extend(a);
    }
    if matches!(suite, Suite::Identities | Suite::All) {
        let s = setup(cfg)?;
        let out = verify::identity_checks(cfg, &s, start)?;
        record.checks.extend(out.checks);
        record.per_path = out.per_path;
        record.ensemble = out.ensemble;
    }
    if let Some(b) = cfg.verify.budget_secs {
        let t = start.elapsed().as_secs_f64();
        if t > b {
            return Err(HarnessError::Budget(format!("suite took {t:.1}s, budget {b}s")));
        }
    }
    let mut summary = String::new();
    for c in &record.checks {
        writeln!(summary, "{}", c.line()).expect("string write");
    }
    artifacts.push(Artifact::text("checks.txt", summary));
    Ok(finish(record, artifacts, start))
}

/// Runs `spec` with `cfg`, on a dedicated pool of `threads` workers when given.
pub fn run(spec: &CommandSpec, cfg: Option<&ExperimentConfig>, threads: Option<usize>) -> Result<Output> {
    let need_cfg = || cfg.ok_or_else(|| HarnessError::Validation("config: this command needs --config".into()));
    let go = || -> Result<Output> {
        match spec {
            CommandSpec::Sample => cmd_sample(need_cfg()?),
            CommandSpec::Pv => cmd_pv(need_cfg()?),
            CommandSpec::Localtime => cmd_localtime(need_cfg()?),
            CommandSpec::Qcov => cmd_qcov(need_cfg()?),
            CommandSpec::Hilbert { input, fft, inverse } => cmd_hilbert(input, *fft, *inverse),
            CommandSpec::Verify { suite } => cmd_verify(need_cfg()?, *suite),
        }
    };
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| HarnessError::Validation(format!("threads: {e}")))?;
            pool.install(go)
        }
        None => go(),
    }
}

/// Fails with a verification error when any assertion failed.
pub fn verdict(out: &Output) -> Result<()> {
    let failed = out.record.failed();
    if failed.is_empty() {
        Ok(())
    } else {
        let names: Vec<&str> = failed.iter().map(|c| c.name.as_str()).collect();
        Err(HarnessError::Verification(names.join("; ")))
    }
}
