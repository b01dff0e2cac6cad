//! Reference implementations used only by tests. None of this shares code
//! with the library paths it checks.
#![allow(dead_code)]

use std::f64::consts::PI;

/// erf(x) for x ≥ 0 by the all-positive series
/// `erf(x) = 2/√π · e^{−x²} · Σ 2ⁿ x^{2n+1} / (1·3·…·(2n+1))`.
pub fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term > sum * 1e-18 {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
    }
    2.0 / PI.sqrt() * (-x2).exp() * sum
}

/// erfc(x) for x > 0 by backward evaluation of the continued fraction
/// `erfc(x) = e^{−x²}/√π · 1/(x + ½/(x + 1/(x + 3/2/(x + …))))`.
pub fn erfc_cf(x: f64) -> f64 {
    let mut f = x;
    for k in (1..400).rev() {
        f = x + (k as f64 / 2.0) / f;
    }
    (-x * x).exp() / PI.sqrt() / f
}

/// erfc for x ≥ 0.
pub fn erfc_oracle(x: f64) -> f64 {
    if x < 3.0 {
        1.0 - erf_series(x)
    } else {
        erfc_cf(x)
    }
}

/// Lower tail Φ(z) for z ≤ 0 and upper tail 1 − Φ(z) for z ≥ 0 are both
/// `½·erfc(|z|/√2)`.
pub fn tail_oracle(z: f64) -> f64 {
    0.5 * erfc_oracle(z.abs() / 2f64.sqrt())
}

pub fn cdf_oracle(z: f64) -> f64 {
    if z <= 0.0 {
        tail_oracle(z)
    } else {
        1.0 - tail_oracle(z)
    }
}

/// Normal quantile by bisection on the oracle CDF, solving in the smaller
/// tail so probabilities near 1 keep their precision.
pub fn quantile_oracle(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    let (target, sign) = if p <= 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
    // find t ≥ 0 with tail_oracle(t) = target; tail is decreasing in t
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail_oracle(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    sign * 0.5 * (lo + hi)
}

fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * PI * var).ln() + (x - mean).powi(2) / var)
}

/// Posterior mean of θ_1 for the two-group hierarchical model by direct 2-D
/// quadrature of `p(μ, τ | y) ∝ Π_j N(y_j | μ, σ_j² + τ²)` over a μ grid and a
/// τ grid on `[0, tau_max]` (trapezoid rule in both directions), averaging
/// the conditional mean of θ_1 given `(μ, τ)`.
pub fn brute_force_theta1_mean(y: [f64; 2], sigma: [f64; 2], tau_max: f64) -> f64 {
    let n_tau = 1201;
    let n_mu = 2401;
    let spread = (sigma[0].max(sigma[1]).powi(2) + tau_max * tau_max).sqrt();
    let mu_lo = y[0].min(y[1]) - 12.0 * spread;
    let mu_hi = y[0].max(y[1]) + 12.0 * spread;

    let mut logs = Vec::with_capacity(n_tau * n_mu);
    let mut cond = Vec::with_capacity(n_tau * n_mu);
    let mut weights = Vec::with_capacity(n_tau * n_mu);
    for i in 0..n_tau {
        let tau = tau_max * i as f64 / (n_tau - 1) as f64;
        let wt = if i == 0 || i == n_tau - 1 { 0.5 } else { 1.0 };
        for k in 0..n_mu {
            let mu = mu_lo + (mu_hi - mu_lo) * k as f64 / (n_mu - 1) as f64;
            let wm = if k == 0 || k == n_mu - 1 { 0.5 } else { 1.0 };
            let lp = normal_logpdf(y[0], mu, sigma[0].powi(2) + tau * tau)
                + normal_logpdf(y[1], mu, sigma[1].powi(2) + tau * tau);
            // E[θ_1 | μ, τ, y] from the textbook precision-weighted form
            let e = if tau == 0.0 {
                mu
            } else {
                (mu / (tau * tau) + y[0] / sigma[0].powi(2))
                    / (1.0 / (tau * tau) + 1.0 / sigma[0].powi(2))
            };
            logs.push(lp);
            cond.push(e);
            weights.push(wt * wm);
        }
    }
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for ((lp, e), w) in logs.iter().zip(&cond).zip(&weights) {
        let d = w * (lp - peak).exp();
        num += d * e;
        den += d;
    }
    num / den
}
