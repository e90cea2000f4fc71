//! NB2 log-likelihood pieces: `Var(y) = μ + μ²/θ`.

use statrs::function::gamma::ln_gamma;

pub const THETA_MIN: f64 = 1e-8;
/// Dispersion ceiling; fits that reach it are reported as the Poisson limit.
pub const THETA_MAX: f64 = 1e8;

/// `ln y!` for each response value.
pub fn ln_factorials(y: &[u64]) -> Vec<f64> {
    y.iter().map(|&v| ln_gamma(v as f64 + 1.0)).collect()
}

/// Log-density of one observation, stable as θ → ∞.
#[inline]
pub fn loglik_obs(y: u64, ln_fact: f64, mu: f64, theta: f64) -> f64 {
    let denom = theta + mu;
    let mut s = 0.0;
    for j in 0..y {
        s += ((j as f64 - mu) / denom).ln_1p();
    }
    s + y as f64 * mu.ln() - theta * (mu / theta).ln_1p() - ln_fact
}

pub fn loglik(y: &[u64], ln_fact: &[f64], mu: &[f64], theta: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..y.len() {
        total += loglik_obs(y[i], ln_fact[i], mu[i], theta);
    }
    total
}

/// First and second derivative of the log-likelihood with respect to θ.
pub fn theta_derivatives(y: &[u64], mu: &[f64], theta: f64) -> (f64, f64) {
    let (mut g, mut h) = (0.0, 0.0);
    for (&yi, &m) in y.iter().zip(mu) {
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for j in 0..yi {
            let d = 1.0 / (theta + j as f64);
            s1 += d;
            s2 += d * d;
        }
        let tm = theta + m;
        let r = (m - yi as f64) / tm;
        g += s1 - (m / theta).ln_1p() + r;
        h += -s2 + m / (theta * tm) - r / tm;
    }
    (g, h)
}

/// d ℓ / d η for each observation.
#[inline]
pub fn score_eta(y: u64, mu: f64, theta: f64) -> f64 {
    theta * (y as f64 - mu) / (theta + mu)
}

/// Expected (Fisher) IRLS weight.
#[inline]
pub fn fisher_weight(mu: f64, theta: f64) -> f64 {
    mu / (1.0 + mu / theta)
}

/// −d²ℓ/dη².
#[inline]
pub fn observed_weight(y: u64, mu: f64, theta: f64) -> f64 {
    let tm = theta + mu;
    theta * mu * (theta + y as f64) / (tm * tm)
}

/// d²ℓ/(dη dθ).
#[inline]
pub fn cross_eta_theta(y: u64, mu: f64, theta: f64) -> f64 {
    let tm = theta + mu;
    (y as f64 - mu) * mu / (tm * tm)
}

/// Maximize the log-likelihood over θ with μ fixed, working on ln θ.
/// Returns the new θ and its log-likelihood; never returns a worse point than `theta0`.
pub fn optimize_theta(y: &[u64], ln_fact: &[f64], mu: &[f64], theta0: f64) -> (f64, f64) {
    let (lo, hi) = (THETA_MIN.ln(), THETA_MAX.ln());
    let f = |phi: f64| loglik(y, ln_fact, mu, phi.exp());
    let mut phi = theta0.clamp(THETA_MIN, THETA_MAX).ln();
    let mut fx = f(phi);
    for _ in 0..100 {
        let theta = phi.exp();
        let (g_t, h_t) = theta_derivatives(y, mu, theta);
        let g = theta * g_t;
        let h = theta * theta * h_t + theta * g_t;
        if (g > 0.0 && phi >= hi) || (g < 0.0 && phi <= lo) {
            break;
        }
        let mut step = if h < 0.0 { -g / h } else { g.signum() };
        step = step.clamp(-3.0, 3.0);
        let mut improved = false;
        for _ in 0..40 {
            let cand = (phi + step).clamp(lo, hi);
            let fc = f(cand);
            if fc > fx {
                improved = (cand - phi).abs() > 1e-13;
                phi = cand;
                fx = fc;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            if g.abs() > 1e-6 {
                let (p2, f2) = golden_section(&f, (phi - 2.0).max(lo), (phi + 2.0).min(hi));
                if f2 > fx {
                    phi = p2;
                    fx = f2;
                }
            }
            break;
        }
        if step.abs() < 1e-10 {
            break;
        }
    }
    let theta = if phi >= hi {
        THETA_MAX
    } else if phi <= lo {
        THETA_MIN
    } else {
        phi.exp()
    };
    (theta, fx)
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-10 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
