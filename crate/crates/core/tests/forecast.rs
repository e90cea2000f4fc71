use crimeflow::forecast::*;
use crimeflow::panel::{Panel, PanelRow, Provenance};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two-sided p by listing every sign assignment of the observed ranks.
fn wilcoxon_enumeration(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    // Average ranks by direct counting.
    let rank = |v: f64| {
        let less = d.iter().filter(|x| x.abs() < v).count() as f64;
        let eq = d.iter().filter(|x| x.abs() == v).count() as f64;
        less + (eq + 1.0) / 2.0
    };
    let ranks: Vec<f64> = d.iter().map(|v| rank(v.abs())).collect();
    let total: f64 = ranks.iter().sum();
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let w = w_plus.min(total - w_plus);
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| ranks[k]).sum();
        if s <= w + 1e-9 {
            hits += 1;
        }
    }
    (w, (2.0 * hits as f64 / (1u64 << n) as f64).min(1.0))
}

#[test]
fn wilcoxon_matches_enumeration_up_to_12() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for n in 1..=12 {
        for rep in 0..25 {
            // Small integer values force ties and zero differences.
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
            let b: Vec<f64> = (0..n)
                .map(|_| if rep % 2 == 0 { rng.random_range(0..6) as f64 } else { rng.random::<f64>() * 5.0 })
                .collect();
            let (w, p) = wilcoxon_enumeration(&a, &b);
            let r = wilcoxon_exact(&a, &b).unwrap();
            assert_eq!(r.statistic, w, "n={n}");
            assert!((r.p_value - p).abs() < 1e-12, "n={n}: {} vs {p}", r.p_value);
        }
    }
}

#[test]
fn wilcoxon_examples() {
    let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
    assert_eq!((r.w_minus, r.statistic), (0.0, 0.0));
    assert!((r.p_value - 0.25).abs() < 1e-12);
    assert!(r.exact);
    let r = wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
    assert!(r.degenerate && r.p_value == 1.0 && r.statistic == 0.0);
    assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]).is_err());
}

#[test]
fn exact_and_normal_agree_at_n12() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let a: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..12).map(|_| rng.random::<f64>() + 0.2).collect();
        let e = wilcoxon_exact(&a, &b).unwrap().p_value;
        let z = wilcoxon_normal(&a, &b).unwrap().p_value;
        assert!((e - z).abs() < 0.05, "{e} vs {z}");
    }
}

#[test]
fn large_samples_use_normal_approximation() {
    let a: Vec<f64> = (0..200).map(|i| (i % 17) as f64).collect();
    let b: Vec<f64> = (0..200).map(|i| (i % 13) as f64 + 1.0).collect();
    let r = wilcoxon_signed_rank(&a, &b).unwrap();
    assert!(!r.exact && r.n > EXACT_MAX_N);
    assert!(r.p_value > 0.0 && r.p_value <= 1.0);
}

fn toy(n: usize, p: usize, seed: u64, noise: f64) -> (FeatureSet, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<f64> = (0..p).map(|j| 1.5 - j as f64).collect();
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|j| rng.random::<f64>() * (j + 1) as f64 + j as f64).collect()).collect();
    let y = rows
        .iter()
        .map(|r| 0.7 + r.iter().zip(&truth).map(|(x, b)| x * b).sum::<f64>() + noise * (rng.random::<f64>() - 0.5))
        .collect();
    let names = (0..p).map(|j| format!("f{j}")).collect();
    (FeatureSet::from_rows(names, &rows).unwrap(), y, truth)
}

fn least_squares(x: &FeatureSet, y: &[f64]) -> DVector<f64> {
    let mut m = DMatrix::from_element(x.n(), x.p() + 1, 1.0);
    for i in 0..x.n() {
        for j in 0..x.p() {
            m[(i, j + 1)] = x.get(i, j);
        }
    }
    let yv = DVector::from_column_slice(y);
    (m.transpose() * &m).cholesky().unwrap().solve(&(m.transpose() * yv))
}

#[test]
fn enet_lambda_zero_is_least_squares() {
    for seed in 0..5 {
        let (x, y, _) = toy(60, 3, seed, 0.3);
        let en = fit_elastic_net(&x, &y, 0.0, 0.5);
        let (b0, b) = en.raw_coefficients();
        let ls = least_squares(&x, &y);
        assert!((b0 - ls[0]).abs() < 1e-6, "{b0} vs {}", ls[0]);
        for j in 0..3 {
            assert!((b[j] - ls[j + 1]).abs() < 1e-6, "{} vs {}", b[j], ls[j + 1]);
        }
    }
}

#[test]
fn enet_single_feature_noiseless() {
    let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.3]).collect();
    let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0]).collect();
    let x = FeatureSet::from_rows(vec!["x".into()], &rows).unwrap();
    let (b0, b) = fit_elastic_net(&x, &y, 0.0, 1.0).raw_coefficients();
    assert!((b[0] - 2.0).abs() < 1e-6 && b0.abs() < 1e-6);
}

#[test]
fn enet_full_shrinkage() {
    let (x, y, _) = toy(50, 3, 3, 0.1);
    let en = fit_elastic_net(&x, &y, 1e6, 0.5);
    assert!(en.coef_std.iter().all(|b| b.abs() < 1e-4));
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    assert!(en.predict(&x).iter().all(|p| (p - mean).abs() < 1e-3));
    let lasso = fit_elastic_net(&x, &y, 1e3, 1.0);
    assert!(lasso.coef_std.iter().all(|b| *b == 0.0));
}

/// Proximal gradient (ISTA) on the same standardized objective.
fn ista(x: &FeatureSet, y: &[f64], lambda: f64, alpha: f64) -> Vec<f64> {
    let (n, p) = (x.n(), x.p());
    let nf = n as f64;
    let means: Vec<f64> = (0..p).map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / nf).collect();
    let sds: Vec<f64> = (0..p)
        .map(|j| ((0..n).map(|i| (x.get(i, j) - means[j]).powi(2)).sum::<f64>() / nf).sqrt())
        .collect();
    let z: Vec<Vec<f64>> = (0..n).map(|i| (0..p).map(|j| (x.get(i, j) - means[j]) / sds[j]).collect()).collect();
    let ym = y.iter().sum::<f64>() / nf;
    let step = 1.0 / p as f64;
    let mut b = vec![0.0; p];
    for _ in 0..200_000 {
        let mut grad = vec![0.0; p];
        for i in 0..n {
            let r = (y[i] - ym) - z[i].iter().zip(&b).map(|(a, c)| a * c).sum::<f64>();
            for j in 0..p {
                grad[j] -= z[i][j] * r / nf;
            }
        }
        for j in 0..p {
            let v = b[j] - step * (grad[j] + lambda * (1.0 - alpha) * b[j]);
            let t = step * lambda * alpha;
            b[j] = if v > t { v - t } else if v < -t { v + t } else { 0.0 };
        }
    }
    b
}

#[test]
fn enet_matches_proximal_gradient() {
    let (x, y, _) = toy(40, 3, 9, 1.0);
    for (lambda, alpha) in [(0.1, 1.0), (0.05, 0.5), (0.3, 0.0)] {
        let en = fit_elastic_net(&x, &y, lambda, alpha);
        let oracle = ista(&x, &y, lambda, alpha);
        for (a, b) in en.coef_std.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-4, "λ={lambda} α={alpha}: {a} vs {b}");
        }
    }
}

#[test]
fn enet_cv_picks_low_penalty_for_clean_signal() {
    let (x, y, _) = toy(200, 3, 1, 0.05);
    let folds = fold_assignment(200, 5, 3).unwrap();
    let sel = cv_elastic_net(&x, &y, &EnGrid::default(), &folds, 5).unwrap();
    assert!(sel.best.lambda <= 1e-2, "{:?}", sel.best);
    assert_eq!(sel.grid.len(), 65);
    assert_eq!(sel.folds_used, 5);
}

#[test]
fn fold_assignment_is_balanced_and_seeded() {
    let f = fold_assignment(103, 5, 11).unwrap();
    let mut sizes = [0; 5];
    f.iter().for_each(|&g| sizes[g] += 1);
    assert!(sizes.iter().all(|&s| s == 20 || s == 21));
    assert_eq!(f, fold_assignment(103, 5, 11).unwrap());
    assert_ne!(f, fold_assignment(103, 5, 12).unwrap());
    assert!(fold_assignment(9, 5, 0).is_err());
}

fn params(n_trees: usize, max_depth: Option<usize>, mf: MaxFeatures) -> ForestParams {
    ForestParams {
        n_trees,
        max_depth,
        max_features: mf,
    }
}

#[test]
fn forest_constant_response() {
    let (x, _, _) = toy(50, 3, 2, 0.0);
    let y = vec![3.5; 50];
    let rf = fit_random_forest(&x, &y, params(10, None, MaxFeatures::All), 1).unwrap();
    assert!(rf.predict(&x).iter().all(|&p| p == 3.5));
}

#[test]
fn forest_stump_predicts_bootstrap_mean() {
    let (x, y, _) = toy(40, 2, 4, 1.0);
    let rf = fit_random_forest(&x, &y, params(1, Some(0), MaxFeatures::All), 9).unwrap();
    let pred = rf.predict(&x);
    assert!(pred.iter().all(|&p| p == pred[0]));
    assert_eq!(rf.trees()[0].n_nodes(), 1);
    let (lo, hi) = y.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(pred[0] >= lo && pred[0] <= hi);
}

#[test]
fn forest_fits_a_step_function() {
    let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64, (i % 7) as f64]).collect();
    let y: Vec<f64> = rows.iter().map(|r| if r[0] < 100.0 { 1.0 } else { 5.0 }).collect();
    let x = FeatureSet::from_rows(vec!["a".into(), "b".into()], &rows).unwrap();
    let rf = fit_random_forest(&x, &y, params(20, None, MaxFeatures::All), 3).unwrap();
    let m = evaluate(&rf.predict(&x), &y).unwrap();
    assert!(m.mse < 0.05, "{m:?}");
    assert!(rf.trees().iter().all(|t| t.depth() <= 3));
}

#[test]
fn forest_is_seeded_and_thread_invariant() {
    let (x, y, _) = toy(300, 4, 5, 2.0);
    let p = params(12, None, MaxFeatures::Sqrt);
    let a = fit_random_forest(&x, &y, p, 77).unwrap().predict(&x);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| fit_random_forest(&x, &y, p, 77).unwrap().predict(&x));
    assert_eq!(a, b);
    let c = fit_random_forest(&x, &y, p, 78).unwrap().predict(&x);
    assert_ne!(a, c);
}

#[test]
fn many_distinct_values_are_binned() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows: Vec<Vec<f64>> = (0..2000).map(|_| vec![rng.random::<f64>()]).collect();
    let y: Vec<f64> = rows.iter().map(|r| (r[0] * 6.0).sin()).collect();
    let x = FeatureSet::from_rows(vec!["a".into()], &rows).unwrap();
    let rf = fit_random_forest(&x, &y, params(5, None, MaxFeatures::All), 1).unwrap();
    // At most MAX_BINS leaves per tree.
    assert!(rf.trees().iter().all(|t| t.n_nodes() < 2 * MAX_BINS));
    assert!(evaluate(&rf.predict(&x), &y).unwrap().mse < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn forest_predictions_stay_in_range(seed in any::<u64>(), n in 5usize..60, depth in prop::option::of(0usize..6)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0..5) as f64, rng.random::<f64>()]).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..10) as f64).collect();
        let x = FeatureSet::from_rows(vec!["a".into(), "b".into()], &rows).unwrap();
        let rf = fit_random_forest(&x, &y, params(5, depth, MaxFeatures::Count(1)), seed).unwrap();
        let lo = y.iter().cloned().fold(f64::MAX, f64::min);
        let hi = y.iter().cloned().fold(f64::MIN, f64::max);
        let probe: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.random_range(-2.0..8.0), rng.random_range(-1.0..2.0)]).collect();
        let px = FeatureSet::from_rows(vec!["a".into(), "b".into()], &probe).unwrap();
        for p in rf.predict(&x).into_iter().chain(rf.predict(&px)) {
            prop_assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        }
    }
}

fn synthetic_panel(year: i32, seed: u64, past: Option<&Panel>, n_tracts: usize) -> Panel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for k in 0..n_tracts {
        for t in 0..168 {
            let idx = k * 168 + t;
            let checkins = rng.random_range(0..40u64);
            let pass = rng.random_range(0..30u64);
            let mean = 0.2 + 0.03 * checkins as f64 + 0.08 * pass as f64;
            let crime = (mean + rng.random::<f64>() * 2.0).floor() as u64;
            rows.push(PanelRow {
                tract_id: format!("T{k:02}"),
                t,
                crime,
                past_crime: past.map_or(rng.random_range(0..4), |p| p.rows()[idx].crime),
                checkins,
                inout_flow: checkins / 3,
                selfloop_flow: checkins - checkins / 3,
                passthrough_flow: pass,
                x: k as f64,
                y: 0.0,
                weekend: t >= 120,
                activity: None,
                covariates: None,
            });
        }
    }
    Panel::from_rows(year, rows, Provenance::default()).unwrap()
}

fn small_config(seed: u64) -> ForecastConfig {
    ForecastConfig {
        seed,
        rf_grid: RfGrid {
            n_trees: vec![10],
            max_depth: vec![Some(6)],
            max_features: vec![MaxFeatures::Third],
        },
        en_grid: EnGrid {
            lambdas: vec![1e-3, 1e-1],
            alphas: vec![0.0, 1.0],
        },
        ..ForecastConfig::default()
    }
}

#[test]
fn historical_baseline_is_past_crime() {
    let train = synthetic_panel(2024, 1, None, 2);
    let eval = synthetic_panel(2025, 2, Some(&train), 2);
    let h = historical_baseline(&eval);
    assert!(h.iter().zip(eval.rows()).all(|(p, r)| *p == r.past_crime as f64));
}

#[test]
fn suite_report_is_deterministic_and_leak_free() {
    let train = synthetic_panel(2024, 1, None, 4);
    let eval = synthetic_panel(2025, 2, Some(&train), 4);
    let cfg = small_config(5);
    let a = prediction_suite(&train, &eval, &cfg).unwrap();
    let b = prediction_suite(&train, &eval, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.models.len(), 9);
    assert_eq!(a.tests.len(), 4);
    assert_eq!(a.historical().improvement_pct, Some(0.0));
    assert_eq!(a.cv.sizes.iter().sum::<usize>(), train.len());

    // Shuffling the evaluation response changes metrics only.
    let mut rows = eval.rows().to_vec();
    let crimes: Vec<u64> = rows.iter().map(|r| r.crime).rev().collect();
    for (r, c) in rows.iter_mut().zip(crimes) {
        r.crime = c;
    }
    let shuffled = Panel::from_rows(2025, rows, Provenance::default()).unwrap();
    let cols = feature_columns(Variant::V1b, false);
    let xt = FeatureSet::from_panel(&train, &cols).unwrap();
    let yt: Vec<f64> = train.rows().iter().map(|r| r.crime as f64).collect();
    let model = train_random_forest(&xt, &yt, &cfg.rf_grid, 5, 1).unwrap();
    let p1 = predict(&model, &FeatureSet::from_panel(&eval, &cols).unwrap(), &eval);
    let p2 = predict(&model, &FeatureSet::from_panel(&shuffled, &cols).unwrap(), &shuffled);
    assert_eq!(p1, p2);

    let mut buf = Vec::new();
    write_eval_table(&a, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("Model,Predictors,MSE,Improvement%,MAE,R2,Wilcoxon p"));
    assert_eq!(text.lines().count(), 10);
}

#[test]
fn crime_is_not_a_feature() {
    let p = synthetic_panel(2024, 1, None, 1);
    assert!(FeatureSet::from_panel(&p, &["crime".to_string()]).is_err());
    assert!(feature_columns(Variant::V2b, true).len() == 11);
}
