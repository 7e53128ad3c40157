//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use statrs::function::gamma::ln_gamma;

/// `ln ∫₀¹ x^a (1 − x)^b dx` by tanh-sinh quadrature, summed in log space.
///
/// Requires `a, b > −1`.
pub fn ln_beta_integral(a: f64, b: f64) -> f64 {
    let h = 1.0 / 64.0;
    let n = (5.0 / h) as i64;
    let terms: Vec<f64> = (-n..=n)
        .map(|k| {
            let t = k as f64 * h;
            let u = std::f64::consts::FRAC_PI_2 * t.sinh();
            // x = 1/(1 + e^{−2u}), 1 − x = 1/(1 + e^{2u}), dx = 2x(1 − x)·(π/2)cosh t dt
            let ln_x = -(-2.0 * u).exp().ln_1p();
            let ln_1mx = -(2.0 * u).exp().ln_1p();
            (a + 1.0) * ln_x + (b + 1.0) * ln_1mx + (std::f64::consts::PI * t.cosh()).ln() + h.ln()
        })
        .collect();
    log_sum_exp(&terms)
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn ln_beta_fn(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// A mixture described independently of the library's types.
#[derive(Debug, Clone)]
pub struct Mixture {
    /// `(alpha, beta, weight)`
    pub betas: Vec<(f64, f64, f64)>,
    /// `(p, weight)`
    pub masses: Vec<(f64, f64)>,
}

/// Posterior probability of observing after `gap` silent rounds, with each
/// beta component integrated numerically.
pub fn posterior_by_quadrature(m: &Mixture, gap: u64) -> f64 {
    let g = gap as f64;
    let mut num = Vec::new();
    let mut den = Vec::new();
    for &(a, b, w) in &m.betas {
        let norm = ln_beta_fn(a, b);
        num.push(w.ln() + ln_beta_integral(a, b - 1.0 + g) - norm);
        den.push(w.ln() + ln_beta_integral(a - 1.0, b - 1.0 + g) - norm);
    }
    for &(p, w) in &m.masses {
        let ln_surv = if gap == 0 { 0.0 } else { g * (-p).ln_1p() };
        num.push(w.ln() + p.ln() + ln_surv);
        den.push(w.ln() + ln_surv);
    }
    (log_sum_exp(&num) - log_sum_exp(&den)).exp()
}

/// The same posterior from the closed-form gamma-function expressions.
pub fn posterior_by_gamma(m: &Mixture, gap: u64) -> f64 {
    let g = gap as f64;
    let mut num = Vec::new();
    let mut den = Vec::new();
    for &(a, b, w) in &m.betas {
        let ln_q = ln_gamma(a + b) + ln_gamma(b + g) - ln_gamma(b) - ln_gamma(a + b + g);
        let p = a / (a + b + g);
        num.push(w.ln() + ln_q + p.ln());
        den.push(w.ln() + ln_q);
    }
    for &(p, w) in &m.masses {
        let ln_surv = if gap == 0 { 0.0 } else { g * (-p).ln_1p() };
        num.push(w.ln() + p.ln() + ln_surv);
        den.push(w.ln() + ln_surv);
    }
    (log_sum_exp(&num) - log_sum_exp(&den)).exp()
}
