use crimeflow::panel::{Panel, PanelRow, Provenance};
use crimeflow::pglm::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};

struct Truth {
    nu: f64,
    beta: f64,
    gamma: f64,
    delta: f64,
    /// None means Poisson.
    theta: Option<f64>,
}

fn draw_count(rng: &mut ChaCha8Rng, mean: f64, theta: Option<f64>) -> u64 {
    let lambda = match theta {
        Some(th) => Gamma::new(th, mean / th).unwrap().sample(rng),
        None => mean,
    };
    if lambda <= 0.0 {
        0
    } else {
        Poisson::new(lambda).unwrap().sample(rng) as u64
    }
}

fn make_panel(seed: u64, n_tracts: usize, truth: &Truth) -> Panel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha: Vec<f64> = (0..n_tracts).map(|_| Normal::new(0.0, 0.3).unwrap().sample(&mut rng)).collect();
    let mut rows = Vec::new();
    for (k, a) in alpha.iter().enumerate() {
        let pop: f64 = rng.random_range(0.5..2.0);
        for t in 0..168 {
            let daily = (2.0 * std::f64::consts::PI * (t % 24) as f64 / 24.0).sin();
            let past = draw_count(&mut rng, 2.0 * (1.0 + 0.3 * daily), None);
            let checkins = draw_count(&mut rng, 60.0 * pop * (1.2 + daily), None);
            let pass = draw_count(&mut rng, 40.0 * pop * (1.1 + daily), None);
            let eta = truth.nu + a + 0.4 * daily + truth.beta * past as f64
                + truth.gamma * checkins as f64
                + truth.delta * pass as f64;
            let crime = draw_count(&mut rng, eta.exp(), truth.theta);
            rows.push(PanelRow {
                tract_id: format!("T{k:03}"),
                t,
                crime,
                past_crime: past,
                checkins,
                inout_flow: checkins / 2,
                selfloop_flow: checkins - checkins / 2,
                passthrough_flow: pass,
                x: k as f64 + 0.5,
                y: 0.5,
                weekend: t >= 120,
                activity: None,
                covariates: Some([k as f64 * 0.1, (k % 3) as f64, 1.0 / (k + 1) as f64]),
            });
        }
    }
    Panel::from_rows(2024, rows, Provenance::default()).unwrap()
}

fn default_truth() -> Truth {
    Truth {
        nu: 0.5,
        beta: 0.05,
        gamma: 0.004,
        delta: 0.006,
        theta: Some(3.0),
    }
}

fn constant_panel(n_tracts: usize, value: u64) -> Panel {
    let rows = (0..n_tracts)
        .flat_map(|k| {
            (0..168).map(move |t| PanelRow {
                tract_id: format!("T{k:03}"),
                t,
                crime: value,
                past_crime: (t % 3) as u64,
                checkins: 0,
                inout_flow: 0,
                selfloop_flow: 0,
                passthrough_flow: 0,
                x: 0.0,
                y: 0.0,
                weekend: t >= 120,
                activity: None,
                covariates: None,
            })
        })
        .collect();
    Panel::from_rows(2024, rows, Provenance::default()).unwrap()
}

#[test]
fn design_column_counts() {
    let p = make_panel(1, 3, &default_truth());
    let d = build_design(&p, &ModelSpec::new("m", &["past_crime", "checkins"])).unwrap();
    assert_eq!(d.p(), 172);
    let mut spec = ModelSpec::new("m", &["past_crime", "checkins"]);
    spec.tract_effects = false;
    spec.hour_effects = false;
    assert_eq!(build_design(&p, &spec).unwrap().p(), 3);

    let big = constant_panel(169, 1);
    let d = build_design(&big, &ModelSpec::new("m", &["past_crime", "t"])).unwrap();
    assert_eq!(d.p(), 338);
    // Sparse products agree with the dense matrix.
    let d = build_design(&p, &ModelSpec::new("m", &["past_crime", "checkins"])).unwrap();
    let x = d.dense();
    let w: Vec<f64> = (0..d.n()).map(|i| 0.5 + (i % 7) as f64).collect();
    let dense = x.transpose() * DMatrix::from_diagonal(&DVector::from_vec(w.clone())) * &x;
    assert!((d.xtwx(&w) - dense).abs().max() < 1e-6);
}

#[test]
fn constant_regressor_is_rejected() {
    let p = constant_panel(2, 1);
    let err = build_design(&p, &ModelSpec::new("m", &["checkins"])).unwrap_err();
    assert!(err.to_string().contains("checkins"));
    assert!(build_design(&p, &ModelSpec::new("m", &["nope"])).is_err());
}

#[test]
fn intercept_only_equal_response() {
    let p = constant_panel(2, 5);
    let mut spec = ModelSpec::new("m", &[]);
    spec.tract_effects = false;
    spec.hour_effects = false;
    let fit = fit_nb_pglm(&p, &spec, FitOptions::default()).unwrap();
    assert!((fit.coefficients[0] - 5f64.ln()).abs() < 1e-8);
    assert!(fit.poisson_limit);
    assert_eq!(fit.dispersion, nb::THETA_MAX);
    assert!(fit.converged);
}

#[test]
fn zero_response_and_separation_are_errors() {
    let p = constant_panel(2, 0);
    let mut spec = ModelSpec::new("m", &[]);
    spec.tract_effects = false;
    spec.hour_effects = false;
    assert!(fit_nb_pglm(&p, &spec, FitOptions::default()).is_err());

    let mut rows = make_panel(3, 3, &default_truth()).rows().to_vec();
    for r in rows.iter_mut().filter(|r| r.tract_id == "T001") {
        r.crime = 0;
    }
    let p = Panel::from_rows(2024, rows, Provenance::default()).unwrap();
    let err = fit_nb_pglm(&p, &ModelSpec::new("m", &["past_crime"]), FitOptions::default()).unwrap_err();
    assert!(err.to_string().contains("tract[T001]"), "{err}");
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

#[test]
fn gradient_matches_finite_differences() {
    let p = make_panel(5, 6, &default_truth());
    let spec = ModelSpec::new("m", &["past_crime", "checkins", "passthrough_flow"]);
    let fit = fit_nb_pglm(&p, &spec, FitOptions::default()).unwrap();
    let d = build_design(&p, &spec).unwrap();
    let theta = fit.dispersion;
    let x = d.dense();
    let col_scale: Vec<f64> = (0..x.ncols()).map(|j| x.column(j).amax()).collect();
    // At the optimum and at a perturbed point.
    for shift in [0.0, 0.01] {
        let beta: Vec<f64> = fit.coefficients.iter().map(|b| b + shift).collect();
        let g = score(&d, &beta, theta);
        for j in 0..=beta.len() {
            // Five-point stencil with a step of about 1e-4 on the linear predictor.
            let h = if j < beta.len() { 1e-4 / col_scale[j] } else { 1e-4 * theta };
            let eval = |delta: f64| {
                let mut b = beta.clone();
                let mut th = theta;
                if j < b.len() {
                    b[j] += delta;
                } else {
                    th += delta;
                }
                log_likelihood(&d, &b, th)
            };
            let fd = (-eval(2.0 * h) + 8.0 * eval(h) - 8.0 * eval(-h) + eval(-2.0 * h)) / (12.0 * h);
            assert!(rel_err(g[j], fd) < 1e-4, "component {j}: analytic {} fd {fd}", g[j]);
        }
        if shift == 0.0 {
            assert!(g.iter().all(|v| v.abs() < 1e-3), "{g:?}");
        }
    }
}

#[test]
fn loglik_is_monotone() {
    let p = make_panel(7, 6, &default_truth());
    let fit = fit_nb_pglm(&p, &ModelSpec::new("m", &["past_crime", "checkins"]), FitOptions::default()).unwrap();
    assert!(fit.converged);
    for w in fit.loglik_trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-10, "{} -> {}", w[0], w[1]);
    }
    assert_eq!(*fit.loglik_trace.last().unwrap(), fit.log_likelihood);
    assert!((fit.aic - (-2.0 * fit.log_likelihood + 2.0 * (fit.coefficients.len() + 1) as f64)).abs() < 1e-9);
    assert!(fit.standard_errors.iter().all(|s| *s > 0.0));
}

#[test]
fn reference_level_invariance() {
    let p = make_panel(11, 6, &default_truth());
    let regs = ["past_crime", "checkins", "passthrough_flow"];
    let a = fit_nb_pglm(&p, &ModelSpec::new("a", &regs), FitOptions::default()).unwrap();
    let mut spec = ModelSpec::new("b", &regs);
    spec.reference_tract = Some("T003".into());
    spec.reference_hour = 77;
    let b = fit_nb_pglm(&p, &spec, FitOptions::default()).unwrap();
    for r in regs {
        let (ca, _) = a.coefficient(r).unwrap();
        let (cb, _) = b.coefficient(r).unwrap();
        assert!((ca - cb).abs() < 1e-6, "{r}: {ca} vs {cb}");
    }
    assert!((a.log_likelihood - b.log_likelihood).abs() < 1e-6);
    assert!((a.aic - b.aic).abs() < 1e-6);
    assert!(a.coefficient("tract[T003]").is_some() && b.coefficient("tract[T003]").is_none());
}

/// Plain Newton-Raphson Poisson regression on the dense design.
fn poisson_oracle(x: &DMatrix<f64>, y: &[u64]) -> DVector<f64> {
    let n = x.nrows();
    let ybar = y.iter().sum::<u64>() as f64 / n as f64;
    let mut beta = DVector::zeros(x.ncols());
    beta[0] = ybar.ln();
    for _ in 0..100 {
        let mu = (x * &beta).map(f64::exp);
        let resid = DVector::from_iterator(n, y.iter().zip(mu.iter()).map(|(&yi, m)| yi as f64 - m));
        let grad = x.transpose() * resid;
        let hess = x.transpose() * DMatrix::from_diagonal(&mu) * x;
        let step = hess.cholesky().unwrap().solve(&grad);
        beta += &step;
        if step.amax() < 1e-12 {
            break;
        }
    }
    beta
}

#[test]
fn poisson_consistency() {
    let mut truth = default_truth();
    truth.theta = None;
    let p = make_panel(13, 6, &truth);
    let spec = ModelSpec::new("m", &["past_crime", "checkins", "passthrough_flow"]);
    let fit = fit_nb_pglm(&p, &spec, FitOptions::default()).unwrap();
    let d = build_design(&p, &spec).unwrap();
    let oracle = poisson_oracle(&d.dense(), &d.y);
    if fit.poisson_limit {
        for (a, b) in fit.coefficients.iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    } else {
        // Finite but large dispersion: still close.
        assert!(fit.dispersion > 50.0, "{}", fit.dispersion);
        for r in ["past_crime", "checkins", "passthrough_flow"] {
            let j = d.columns.iter().position(|c| c == r).unwrap();
            assert!((fit.coefficients[j] - oracle[j]).abs() < 1e-3);
        }
    }
}

#[test]
fn poisson_limit_matches_oracle_exactly() {
    // Underdispersed response drives θ to the ceiling.
    let rows: Vec<PanelRow> = (0..3)
        .flat_map(|k| {
            (0..168).map(move |t| PanelRow {
                tract_id: format!("T{k:03}"),
                t,
                crime: 2 + ((t + k) % 2) as u64,
                past_crime: ((t * (k + 2)) % 4) as u64,
                checkins: ((t * 7 + k) % 5) as u64,
                inout_flow: 0,
                selfloop_flow: 0,
                passthrough_flow: 0,
                x: 0.0,
                y: 0.0,
                weekend: t >= 120,
                activity: None,
                covariates: None,
            })
        })
        .collect();
    let p = Panel::from_rows(2024, rows, Provenance::default()).unwrap();
    let spec = ModelSpec::new("m", &["past_crime", "checkins"]);
    let fit = fit_nb_pglm(&p, &spec, FitOptions::default()).unwrap();
    assert!(fit.poisson_limit);
    let d = build_design(&p, &spec).unwrap();
    let oracle = poisson_oracle(&d.dense(), &d.y);
    for (a, b) in fit.coefficients.iter().zip(oracle.iter()) {
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }
}

#[test]
fn recovers_known_coefficients() {
    let truth = default_truth();
    let p = make_panel(17, 30, &truth);
    let fit = fit_nb_pglm(&p, &ModelSpec::new("m", &["past_crime", "checkins", "passthrough_flow"]), FitOptions::default())
        .unwrap();
    for (name, value) in [("past_crime", truth.beta), ("checkins", truth.gamma), ("passthrough_flow", truth.delta)] {
        let (b, se) = fit.coefficient(name).unwrap();
        assert!((b - value).abs() < 4.0 * se, "{name}: {b} ± {se} vs {value}");
    }
    assert!((fit.dispersion - 3.0).abs() < 1.0, "{}", fit.dispersion);
}

#[test]
fn lr_test_rules() {
    let p = make_panel(19, 6, &default_truth());
    let opts = FitOptions::default();
    let a = fit_nb_pglm(&p, &ModelSpec::new("a", &["past_crime", "checkins"]), opts).unwrap();
    let t = lr_test(&a, &a).unwrap();
    assert_eq!((t.statistic, t.df, t.p_value), (0.0, 0, 1.0));
    let b = fit_nb_pglm(&p, &ModelSpec::new("b", &["past_crime", "passthrough_flow"]), opts).unwrap();
    assert!(lr_test(&a, &b).is_err());
    let full = fit_nb_pglm(&p, &ModelSpec::new("full", &["past_crime", "checkins", "passthrough_flow"]), opts).unwrap();
    let t = lr_test(&full, &a).unwrap();
    assert_eq!(t.df, 1);
    assert!(t.p_value < 1e-3, "{t:?}");
}

#[test]
fn lr_statistic_is_invariant_to_regressor_units() {
    let p = make_panel(23, 6, &default_truth());
    let opts = FitOptions::default();
    let regs = ["past_crime", "checkins", "passthrough_flow"];
    let full = fit_nb_pglm(&p, &ModelSpec::new("full", &regs), opts).unwrap();
    let nested = fit_nb_pglm(&p, &ModelSpec::new("nested", &regs[..2]), opts).unwrap();
    let base = lr_test(&full, &nested).unwrap().statistic;

    let rows: Vec<PanelRow> = p
        .rows()
        .iter()
        .map(|r| PanelRow {
            passthrough_flow: r.passthrough_flow * 3 + 7,
            checkins: r.checkins * 2 + 1,
            ..r.clone()
        })
        .collect();
    let q = Panel::from_rows(2024, rows, Provenance::default()).unwrap();
    let full = fit_nb_pglm(&q, &ModelSpec::new("full", &regs), opts).unwrap();
    let nested = fit_nb_pglm(&q, &ModelSpec::new("nested", &regs[..2]), opts).unwrap();
    let scaled = lr_test(&full, &nested).unwrap().statistic;
    assert!((base - scaled).abs() < 1e-5 * base.max(1.0), "{base} vs {scaled}");
}

#[test]
fn irr_values() {
    let up = irr_from("checkins", 0.00046587, 0.0001, 100.0);
    assert!((up.percent_change - 4.77).abs() < 0.005, "{}", up.percent_change);
    let down = irr_from("selfloop_flow", -0.000264, 0.0001, 100.0);
    assert!((down.percent_change + 2.61).abs() < 0.005, "{}", down.percent_change);
    let zero = irr_from("x", 0.0, 0.01, 100.0);
    assert_eq!(zero.percent_change, 0.0);
    assert!(zero.ci_low < 1.0 && zero.ci_high > 1.0);
}

#[test]
fn tract_constant_covariates_are_aliased() {
    let p = make_panel(29, 6, &default_truth());
    let spec = ModelSpec::new("m", &["past_crime", "concentrated_disadvantage"]);
    let err = fit_nb_pglm(&p, &spec, FitOptions::default()).unwrap_err();
    assert!(err.to_string().contains("concentrated_disadvantage"));
    let specs = with_extra_regressors(vec![ModelSpec::new("m", &["past_crime"])], &["concentrated_disadvantage"]);
    let fit = fit_nb_pglm(&p, &specs[0], FitOptions::default()).unwrap();
    assert_eq!(fit.aliased, vec!["concentrated_disadvantage".to_string()]);
    let plain = fit_nb_pglm(&p, &ModelSpec::new("m", &["past_crime"]), FitOptions::default()).unwrap();
    assert!((fit.log_likelihood - plain.log_likelihood).abs() < 1e-6);
}

#[test]
fn suite_runs_and_exports() {
    let p = make_panel(31, 8, &default_truth());
    let suite = model_suite(&p, &suite_specs(), FitOptions::default()).unwrap();
    assert_eq!(suite.fits.len(), 5);
    assert_eq!(suite.lr_tests.len(), 3);
    assert!(suite.fit("1b").unwrap().aic < suite.fit("1a").unwrap().aic);
    let mut buf = Vec::new();
    write_aic_table(&suite, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 6);
    let report = serde_json::to_string(&SuiteReport::new(&suite)).unwrap();
    assert!(report.contains("irr_per_100"));
}
