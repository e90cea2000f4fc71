use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::design::{aliased_columns, build_design, Design, ModelSpec};
use super::nb::{self, THETA_MAX};
use crate::error::{Error, Result};
use crate::panel::Panel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Relative log-likelihood change that ends the outer loop.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tolerance: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PGLMFit {
    pub spec: ModelSpec,
    pub columns: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// NB shape θ; [`nb::THETA_MAX`] in the Poisson limit.
    pub dispersion: f64,
    pub dispersion_se: Option<f64>,
    pub log_likelihood: f64,
    pub aic: f64,
    pub n_obs: usize,
    pub converged: bool,
    pub iterations: usize,
    pub poisson_limit: bool,
    /// Regressors dropped as linear combinations of other columns.
    pub aliased: Vec<String>,
    /// Log-likelihood after every accepted update.
    pub loglik_trace: Vec<f64>,
}

impl PGLMFit {
    /// Estimate and standard error by column name.
    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some((self.coefficients[j], self.standard_errors[j]))
    }

    /// Coefficients plus the dispersion parameter.
    pub fn n_params(&self) -> usize {
        self.coefficients.len() + 1
    }
}

pub fn fit_nb_pglm(panel: &Panel, spec: &ModelSpec, options: FitOptions) -> Result<PGLMFit> {
    let mut design = build_design(panel, spec)?;
    check_response(&design)?;
    let aliased = aliased_columns(&design, 1e-10);
    let mut aliased_names = Vec::new();
    if !aliased.is_empty() {
        let names: Vec<String> = aliased.iter().map(|&j| design.columns[j].clone()).collect();
        if !spec.drop_aliased || aliased.iter().any(|&j| j < design.regressor_offset()) {
            return Err(Error::Estimation(format!(
                "design is rank deficient; linearly dependent column(s): {}",
                names.join(", ")
            )));
        }
        warn!("{}: dropping aliased regressor(s) {}", spec.name, names.join(", "));
        design = design.without_regressors(&aliased);
        aliased_names = names;
    }
    let mut fit = fit_design(&design, options)?;
    fit.spec = spec.clone();
    fit.aliased = aliased_names;
    Ok(fit)
}

/// The response must not be identically zero, and no fixed-effect level may be all zero.
fn check_response(d: &Design) -> Result<()> {
    if d.y.iter().all(|&v| v == 0) {
        return Err(Error::Estimation("response is identically zero".into()));
    }
    let mut separated: Vec<String> = Vec::new();
    for (id, rows) in &d.tract_levels {
        if rows.iter().all(|&i| d.y[i] == 0) {
            separated.push(format!("tract[{id}]"));
        }
    }
    for (t, rows) in &d.hour_levels {
        if rows.iter().all(|&i| d.y[i] == 0) {
            separated.push(format!("hour[{t}]"));
        }
    }
    if !separated.is_empty() {
        return Err(Error::Estimation(format!(
            "separation: zero response for every observation of {}",
            separated.join(", ")
        )));
    }
    Ok(())
}

struct State {
    beta: Vec<f64>,
    mu: Vec<f64>,
    theta: f64,
    ll: f64,
}

fn mu_of(d: &Design, beta: &[f64]) -> Vec<f64> {
    d.eta(beta).into_iter().map(|e| e.clamp(-700.0, 700.0).exp()).collect()
}

fn solve_spd(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    a.cholesky()
        .map(|c| c.solve(&b))
        .ok_or_else(|| Error::Estimation("weighted normal equations are not positive definite".into()))
}

/// One Fisher-scoring solve at fixed θ starting from `mu`.
fn irls_target(d: &Design, mu: &[f64], theta: f64) -> Result<Vec<f64>> {
    let eta: Vec<f64> = mu.iter().map(|m| m.ln()).collect();
    let w: Vec<f64> = mu.iter().map(|&m| nb::fisher_weight(m, theta)).collect();
    let wz: Vec<f64> = (0..d.n())
        .map(|i| w[i] * (eta[i] + (d.y[i] as f64 - mu[i]) / mu[i]))
        .collect();
    Ok(solve_spd(d.xtwx(&w), d.xtv(&wz))?.iter().copied().collect())
}

/// IRLS at fixed θ with step-halving; every accepted step raises the log-likelihood.
fn irls(d: &Design, lf: &[f64], s: &mut State, trace: &mut Vec<f64>) -> Result<()> {
    for _ in 0..50 {
        let target = irls_target(d, &s.mu, s.theta)?;
        let mut step: Vec<f64> = target.iter().zip(&s.beta).map(|(t, b)| t - b).collect();
        let mut accepted = false;
        for _ in 0..30 {
            let cand: Vec<f64> = s.beta.iter().zip(&step).map(|(b, st)| b + st).collect();
            let mu = mu_of(d, &cand);
            let ll = nb::loglik(&d.y, lf, &mu, s.theta);
            if ll >= s.ll {
                s.beta = cand;
                s.mu = mu;
                s.ll = ll;
                trace.push(ll);
                accepted = true;
                break;
            }
            step.iter_mut().for_each(|v| *v *= 0.5);
        }
        let small = step
            .iter()
            .zip(&s.beta)
            .all(|(st, b)| st.abs() <= 1e-10 * (1.0 + b.abs()));
        if !accepted || small {
            break;
        }
    }
    Ok(())
}

pub(crate) fn fit_design(d: &Design, options: FitOptions) -> Result<PGLMFit> {
    let n = d.n();
    let lf = nb::ln_factorials(&d.y);
    let ybar = d.y.iter().sum::<u64>() as f64 / n as f64;
    let mu0: Vec<f64> = d.y.iter().map(|&v| (v as f64 + ybar) / 2.0).collect();

    // Poisson start.
    let beta = irls_target(d, &mu0, THETA_MAX)?;
    let mu = mu_of(d, &beta);
    let ll = nb::loglik(&d.y, &lf, &mu, THETA_MAX);
    let mut s = State {
        beta,
        mu,
        theta: THETA_MAX,
        ll,
    };
    let mut trace = vec![ll];
    irls(d, &lf, &mut s, &mut trace)?;

    // Moment start for θ, accepted only if it helps.
    let (num, den) = (0..n).fold((0.0, 0.0), |(a, b), i| {
        let r = d.y[i] as f64 - s.mu[i];
        (a + s.mu[i] * s.mu[i], b + r * r - s.mu[i])
    });
    if den > 0.0 {
        let cand = (num / den).clamp(nb::THETA_MIN, THETA_MAX);
        let ll = nb::loglik(&d.y, &lf, &s.mu, cand);
        if ll > s.ll {
            s.theta = cand;
            s.ll = ll;
            trace.push(ll);
        }
    }

    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=options.max_iter {
        iterations = it;
        let before = s.ll;
        let (theta, ll) = nb::optimize_theta(&d.y, &lf, &s.mu, s.theta);
        if ll > s.ll {
            s.theta = theta;
            s.ll = ll;
            trace.push(ll);
        }
        irls(d, &lf, &mut s, &mut trace)?;
        let change = (s.ll - before).abs() / (s.ll.abs() + 0.1);
        debug!("iteration {it}: loglik {:.10} theta {:.6e} change {change:.3e}", s.ll, s.theta);
        if change < options.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("fit did not converge in {} iterations", options.max_iter);
    }

    let poisson_limit = s.theta >= THETA_MAX * (1.0 - 1e-9);
    let (se, theta_se) = standard_errors(d, &s, poisson_limit);
    let k = d.p() + 1;
    Ok(PGLMFit {
        spec: ModelSpec::default(),
        columns: d.columns.clone(),
        coefficients: s.beta,
        standard_errors: se,
        dispersion: s.theta,
        dispersion_se: theta_se,
        log_likelihood: s.ll,
        aic: -2.0 * s.ll + 2.0 * k as f64,
        n_obs: n,
        converged,
        iterations,
        poisson_limit,
        aliased: Vec::new(),
        loglik_trace: trace,
    })
}

/// Observed information of (β, θ); the θ block is left out in the Poisson limit.
pub(crate) fn observed_information(d: &Design, beta: &[f64], theta: f64, with_theta: bool) -> DMatrix<f64> {
    let mu = mu_of(d, beta);
    let p = d.p();
    let w: Vec<f64> = (0..d.n()).map(|i| nb::observed_weight(d.y[i], mu[i], theta)).collect();
    let ibb = d.xtwx(&w);
    if !with_theta {
        return ibb;
    }
    let c: Vec<f64> = (0..d.n()).map(|i| -nb::cross_eta_theta(d.y[i], mu[i], theta)).collect();
    let ibt = d.xtv(&c);
    let (_, h) = nb::theta_derivatives(&d.y, &mu, theta);
    let mut info = DMatrix::zeros(p + 1, p + 1);
    info.view_mut((0, 0), (p, p)).copy_from(&ibb);
    for j in 0..p {
        info[(j, p)] = ibt[j];
        info[(p, j)] = ibt[j];
    }
    info[(p, p)] = -h;
    info
}

fn standard_errors(d: &Design, s: &State, poisson_limit: bool) -> (Vec<f64>, Option<f64>) {
    let p = d.p();
    let joint = !poisson_limit;
    let inv = observed_information(d, &s.beta, s.theta, joint).cholesky().map(|c| c.inverse());
    match inv {
        Some(inv) => {
            let se = (0..p).map(|j| inv[(j, j)].sqrt()).collect();
            (se, joint.then(|| inv[(p, p)].sqrt()))
        }
        None if joint => {
            warn!("joint information not positive definite; coefficient standard errors hold θ fixed");
            let inv = observed_information(d, &s.beta, s.theta, false).cholesky().map(|c| c.inverse());
            let se = match inv {
                Some(inv) => (0..p).map(|j| inv[(j, j)].sqrt()).collect(),
                None => vec![f64::NAN; p],
            };
            (se, None)
        }
        None => (vec![f64::NAN; p], None),
    }
}

/// Analytic gradient of the log-likelihood in (β, θ).
pub fn score(d: &Design, beta: &[f64], theta: f64) -> Vec<f64> {
    let mu = mu_of(d, beta);
    let r: Vec<f64> = (0..d.n()).map(|i| nb::score_eta(d.y[i], mu[i], theta)).collect();
    let mut g: Vec<f64> = d.xtv(&r).iter().copied().collect();
    g.push(nb::theta_derivatives(&d.y, &mu, theta).0);
    g
}

pub fn log_likelihood(d: &Design, beta: &[f64], theta: f64) -> f64 {
    let lf = nb::ln_factorials(&d.y);
    nb::loglik(&d.y, &lf, &mu_of(d, beta), theta)
}
