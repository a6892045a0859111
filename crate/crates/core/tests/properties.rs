use std::collections::HashSet;
use std::sync::Arc;

use fbm_pv::functional::{from_local_time, one_sided, pv_time_integral, qcov, PvOptions, Side};
use fbm_pv::hilbert::{hilbert_transform, SampledFunction};
use fbm_pv::model::{covariance, marginal_density, pair_density, pair_stats};
use fbm_pv::occupation::local_time;
use fbm_pv::quad::{gauss_kronrod, Tolerance};
use fbm_pv::sampler::derive_seed;
use fbm_pv::stats::ks_two_sample;
use fbm_pv::{EpsLadder, FieldKind, HurstIndex, Method, Sampler, SpatialGrid, TimeGrid};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn sampler(h: f64, n: usize, method: Method) -> Sampler {
    let grid = Arc::new(TimeGrid::new(HurstIndex::new(h).unwrap(), 1.0, n).unwrap());
    Sampler::new(method, grid).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_matrix_is_psd(h in 0.05f64..0.95, times in prop::collection::btree_set(1u32..10_000, 2..64)) {
        let hi = HurstIndex::new(h).unwrap();
        let ts: Vec<f64> = times.iter().map(|&t| t as f64 / 1000.0).collect();
        let m = ts.len();
        let g = DMatrix::from_fn(m, m, |i, j| covariance(hi, ts[i], ts[j]));
        for i in 0..m {
            prop_assert!(g[(i, i)] > 0.0);
            for j in 0..m {
                prop_assert_eq!(g[(i, j)], g[(j, i)]);
            }
        }
        let trace = g.trace();
        let min = g.symmetric_eigenvalues().min();
        prop_assert!(min >= -1e-9 * trace, "min eigenvalue {min}, trace {trace}");
    }

    #[test]
    fn pair_density_marginalises(h in 0.1f64..0.9, r in 0.1f64..1.0, gap in 0.05f64..1.0, x in -2.0f64..2.0) {
        let hi = HurstIndex::new(h).unwrap();
        let s = r + gap;
        let st = pair_stats(hi, s, r).unwrap();
        let sd = st.var_r.sqrt();
        // Conditional law of B_r given B_s = x is centred at mu x / var_s.
        let c = st.mu * x / st.var_s;
        let tol = Tolerance::new(1e-12, 1e-10);
        let q = gauss_kronrod(|y| pair_density(&st, x, y).unwrap(), c - 12.0 * sd, c + 12.0 * sd, tol);
        let m = marginal_density(hi, s, x);
        prop_assert!((q.value - m).abs() <= 1e-8 * m.max(1e-3), "{} vs {m}", q.value);
    }

    #[test]
    fn weighted_mass_and_reflection(h in 0.1f64..0.9, seed in any::<u64>(), n in 16usize..400) {
        let s = sampler(h, n, Method::Cholesky);
        let p = s.sample(seed);
        let grid = SpatialGrid::centered(0.0, 0.07, 5.0).unwrap();
        let f = local_time(&p, &grid, FieldKind::Weighted).unwrap();
        prop_assert!((f.total_mass() - f.expected_total()).abs() <= 1e-12);
        let plain = local_time(&p, &grid, FieldKind::Plain).unwrap();
        prop_assert!((plain.total_mass() - 1.0).abs() <= 1e-12);
        let g = local_time(&p.reflected(), &grid, FieldKind::Weighted).unwrap();
        let m = f.mirrored();
        for (a, b) in g.mass.iter().zip(&m.mass) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn routes_are_antisymmetric(h in 0.55f64..0.9, seed in any::<u64>(), a in -0.5f64..0.5) {
        let s = sampler(h, 256, Method::Cholesky);
        let p = s.sample(seed);
        let q = p.reflected();
        let ladder = EpsLadder::default_for(s.grid(), 1.0);
        let opts = PvOptions::default();
        let t1 = pv_time_integral(&p, a, &ladder, &opts).unwrap();
        let t2 = pv_time_integral(&q, -a, &ladder, &opts).unwrap();
        for (x, y) in t1.rung_values.iter().zip(&t2.rung_values) {
            prop_assert_eq!(*x, -*y);
        }
        let grid = SpatialGrid::centered(0.0, 0.05, 5.0).unwrap();
        let f1 = local_time(&p, &grid, FieldKind::Weighted).unwrap();
        let f2 = local_time(&q, &grid, FieldKind::Weighted).unwrap();
        let l1 = from_local_time(&f1, a, &ladder, opts.tol).unwrap();
        let l2 = from_local_time(&f2, -a, &ladder, opts.tol).unwrap();
        for (x, y) in l1.rung_values.iter().zip(&l2.rung_values) {
            prop_assert!((x + y).abs() <= 1e-10 * (1.0 + x.abs()));
        }
        // One-sided pieces recombine into the two-sided sum.
        let plus = one_sided(&p, &f1, a, Side::Plus, &ladder, &opts).unwrap();
        let minus = one_sided(&p, &f1, a, Side::Minus, &ladder, &opts).unwrap();
        for k in 0..ladder.len() {
            let sum = plus.rung_values[k] + minus.rung_values[k];
            prop_assert!((sum - t1.rung_values[k]).abs() <= 1e-10 * (1.0 + t1.rung_values[k].abs()));
        }
    }

    #[test]
    fn qcov_is_antisymmetric(h in 0.1f64..0.45, seed in any::<u64>(), a in -0.5f64..0.5) {
        let s = sampler(h, 128, Method::Cholesky);
        let p = s.sample(seed);
        let lag = 2.0 * s.grid().dt();
        let x = qcov(&p, |x| (x - a).abs().ln(), lag).unwrap();
        let y = qcov(&p.reflected(), |x| (x + a).abs().ln(), lag).unwrap();
        prop_assert!((x + y).abs() <= 1e-12 * (1.0 + x.abs()));
    }

    #[test]
    fn hilbert_is_linear(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, c1 in -2.0f64..2.0, c2 in -2.0f64..2.0) {
        let f = SampledFunction::from_fn(-12.0, 12.0, 1201, |x| (-(x - c1).powi(2)).exp()).unwrap();
        let g = SampledFunction::from_fn(-12.0, 12.0, 1201, |x| (-(x - c2).powi(2) / 2.0).exp()).unwrap();
        let combo = f.scaled(alpha).axpy(beta, &g).unwrap();
        let lhs = hilbert_transform(&combo);
        let rhs = hilbert_transform(&f).scaled(alpha).axpy(beta, &hilbert_transform(&g)).unwrap();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + alpha.abs() + beta.abs()));
        }
    }
}

#[test]
fn seed_streams_are_distinct() {
    for master in [0u64, 1, 42, u64::MAX] {
        let seeds: HashSet<u64> = (0..100_000).map(|k| derive_seed(master, k)).collect();
        assert_eq!(seeds.len(), 100_000);
    }
    assert_ne!(derive_seed(1, 0), derive_seed(0, 1));
}

#[test]
fn self_similarity_of_endpoints() {
    // c^{-H} B_{ct} has the law of B_t; compare endpoints at c = 4.
    for h in [0.3, 0.7] {
        let hi = HurstIndex::new(h).unwrap();
        let long = Sampler::new(Method::Circulant, Arc::new(TimeGrid::new(hi, 4.0, 256).unwrap())).unwrap();
        let unit = sampler(h, 256, Method::Circulant);
        let scale = 4f64.powf(-h);
        let a = long.map_paths(1, 10_000, |_, p| scale * p.endpoint());
        let b = unit.map_paths(2, 10_000, |_, p| p.endpoint());
        let ks = ks_two_sample(&a, &b);
        assert!(ks.p_value > 1e-3, "H = {h}: {ks:?}");
    }
}

#[test]
fn isometry_improves_with_window() {
    // The transform decays like 1/x, so the L2 deficit is governed by the window, not the spacing.
    let f = |x: f64| (1.0 - x * x).max(0.0).powi(2);
    let errs: Vec<f64> = [2.0, 8.0, 32.0]
        .into_iter()
        .map(|l: f64| {
            let m = (100.0 * l) as usize + 1;
            let s = SampledFunction::from_fn(-l, l, 2 * m - 1, f).unwrap();
            (hilbert_transform(&s).l2_norm_sq() / s.l2_norm_sq() - 1.0).abs()
        })
        .collect();
    assert!(errs[0] < 1e-2, "{errs:?}");
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn sampler_reduction_is_order_stable() {
    let s = sampler(0.7, 64, Method::Circulant);
    let a = s.map_paths(9, 50, |k, p| (k, p.seed(), p.endpoint()));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| s.map_paths(9, 50, |k, p| (k, p.seed(), p.endpoint())));
    assert_eq!(a, b);
    assert!(a.iter().enumerate().all(|(i, r)| r.0 == i && r.1 == derive_seed(9, i as u64)));
}
