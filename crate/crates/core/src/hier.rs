//! One-way normal hierarchical model.
//!
//! Group estimates `ȳ_j ~ N(θ_j, σ_j²)` with `θ_j ~ N(μ, τ²)`, a flat prior
//! on `μ` and a uniform prior on `τ ∈ [0, tau_max]`. Given `(μ, τ)` each
//! `θ_j` is normal with the precision-weighted mean and variance of
//! [`conditional_posterior`]; integrating out `μ` leaves the marginal
//!
//! ```text
//! p(τ | y) ∝ V_μ(τ)^½ · Π_j (σ_j² + τ²)^−½ · exp(−(ȳ_j − μ̂(τ))² / (2(σ_j² + τ²)))
//! ```
//!
//! where `μ̂(τ)` is the precision-weighted mean of the `ȳ_j` and `V_μ(τ)` its
//! variance. [`fit_grid`] tabulates that density and simulates `τ`, then
//! `μ | τ`, then every `θ_j | μ, τ` exactly, so there is no chain to diagnose.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::StudyDataset;
use crate::error::{Error, Result};
use crate::rng::{site, Stream};
use crate::stats;

/// Mass above this share of `tau_max` counts as the top grid decile.
const TOP_DECILE: f64 = 0.9;
/// Tail mass beyond which a fit reports probable truncation.
pub const TAIL_MASS_WARNING: f64 = 0.01;
/// Draw count below which summaries are refused.
pub const MIN_SUMMARY_DRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperDraw {
    pub mu: f64,
    pub tau: f64,
}

fn check_sigma(sigma_y: f64) -> Result<()> {
    if sigma_y > 0.0 && sigma_y.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "sigma_y must be positive, got {sigma_y}"
        )))
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "tau must be non-negative, got {tau}"
        )))
    }
}

/// Posterior mean and sd of `θ_j` given `(μ, τ)`.
///
/// `τ = 0` gives `(μ, 0)` and `τ = ∞` gives `(ȳ, σ_ȳ)`. The mean is written as
/// `μ + w(ȳ − μ)` with `w = τ²/(τ² + σ²)`, which is the precision-weighted
/// average and stays between `μ` and `ȳ` under rounding.
pub fn conditional_posterior(y_bar: f64, sigma_y: f64, mu: f64, tau: f64) -> Result<(f64, f64)> {
    check_sigma(sigma_y)?;
    check_tau(tau)?;
    Ok(conditional_unchecked(y_bar, sigma_y, mu, tau))
}

#[inline]
fn conditional_unchecked(y_bar: f64, sigma_y: f64, mu: f64, tau: f64) -> (f64, f64) {
    if tau == 0.0 {
        return (mu, 0.0);
    }
    if tau.is_infinite() {
        return (y_bar, sigma_y);
    }
    let t2 = tau * tau;
    let s2 = sigma_y * sigma_y;
    let w = t2 / (t2 + s2);
    (mu + w * (y_bar - mu), sigma_y * tau / (s2 + t2).sqrt())
}

/// Factor `1/√(1 + σ²/τ²)` by which partial pooling scales a z-score.
pub fn zscore_correction(sigma_y: f64, tau: f64) -> Result<f64> {
    check_sigma(sigma_y)?;
    check_tau(tau)?;
    Ok(if tau.is_infinite() {
        1.0
    } else {
        tau / tau.hypot(sigma_y)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPosterior {
    pub mean: f64,
    pub sd: f64,
    pub z: f64,
}

/// Posterior of `θ_j − θ_k` for two groups sharing the standard error
/// `sigma_y`, with the hyperparameters held fixed.
pub fn pair_posterior(y_bar_j: f64, y_bar_k: f64, sigma_y: f64, tau: f64) -> Result<PairPosterior> {
    check_sigma(sigma_y)?;
    check_tau(tau)?;
    let diff = y_bar_j - y_bar_k;
    if tau == 0.0 {
        return Ok(PairPosterior {
            mean: 0.0,
            sd: 0.0,
            z: 0.0,
        });
    }
    if tau.is_infinite() {
        let sd = std::f64::consts::SQRT_2 * sigma_y;
        return Ok(PairPosterior {
            mean: diff,
            sd,
            z: diff / sd,
        });
    }
    let t2 = tau * tau;
    let s2 = sigma_y * sigma_y;
    let mean = t2 / (s2 + t2) * diff;
    let sd = std::f64::consts::SQRT_2 * sigma_y * tau / (s2 + t2).sqrt();
    Ok(PairPosterior {
        mean,
        sd,
        z: mean / sd,
    })
}

/// Precision-weighted mean of the estimates: the complete-pooling estimate.
pub fn pooled_mean(data: &StudyDataset) -> f64 {
    let (num, den) = data.summaries().iter().fold((0.0, 0.0), |(n, d), s| {
        let w = 1.0 / (s.std_error * s.std_error);
        (n + w * s.estimate, d + w)
    });
    num / den
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_points: usize,
    /// Upper end of the `τ` grid; `None` selects `2·sd(estimates) + max σ_j`.
    pub tau_max: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_points: 1000,
            tau_max: None,
        }
    }
}

impl GridConfig {
    pub fn resolve_tau_max(&self, data: &StudyDataset) -> f64 {
        self.tau_max.unwrap_or_else(|| {
            let max_se = data.std_errors().into_iter().fold(0.0, f64::max);
            2.0 * stats::sd(&data.estimates()) + max_se
        })
    }
}

/// Marginal posterior of `τ` tabulated on a uniform grid.
#[derive(Debug, Clone)]
pub struct TauGrid {
    pub tau: Vec<f64>,
    /// Unnormalized log density at each grid point.
    pub log_density: Vec<f64>,
    /// `μ̂(τ)` at each grid point.
    pub mu_hat: Vec<f64>,
    /// `V_μ(τ)` at each grid point.
    pub mu_var: Vec<f64>,
    /// Normalized trapezoid masses (end points carry half weight).
    pub mass: Vec<f64>,
    cumulative: Vec<f64>,
}

impl TauGrid {
    pub fn new(data: &StudyDataset, grid: &GridConfig) -> Result<Self> {
        let tau_max = grid.resolve_tau_max(data);
        if !(tau_max > 0.0 && tau_max.is_finite()) {
            return Err(Error::domain(format!(
                "tau_max must be positive, got {tau_max}"
            )));
        }
        if grid.n_points < 2 {
            return Err(Error::domain("grid needs at least 2 points"));
        }
        let y = data.estimates();
        let s2: Vec<f64> = data.std_errors().iter().map(|s| s * s).collect();
        let n = grid.n_points;
        let step = tau_max / (n - 1) as f64;

        let mut tau = Vec::with_capacity(n);
        let mut log_density = Vec::with_capacity(n);
        let mut mu_hat = Vec::with_capacity(n);
        let mut mu_var = Vec::with_capacity(n);
        for i in 0..n {
            let t = if i == n - 1 { tau_max } else { i as f64 * step };
            let t2 = t * t;
            let mut w_sum = 0.0;
            let mut wy_sum = 0.0;
            let mut log_v_sum = 0.0;
            for (yj, s2j) in y.iter().zip(&s2) {
                let v = s2j + t2;
                w_sum += 1.0 / v;
                wy_sum += yj / v;
                log_v_sum += v.ln();
            }
            let v_mu = 1.0 / w_sum;
            let m = wy_sum * v_mu;
            let ss: f64 = y
                .iter()
                .zip(&s2)
                .map(|(yj, s2j)| (yj - m).powi(2) / (s2j + t2))
                .sum();
            tau.push(t);
            mu_hat.push(m);
            mu_var.push(v_mu);
            log_density.push(0.5 * v_mu.ln() - 0.5 * log_v_sum - 0.5 * ss);
        }

        let peak = log_density
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if !peak.is_finite() {
            return Err(Error::Numerical(
                "tau density is not finite on the grid".into(),
            ));
        }
        let mut mass: Vec<f64> = log_density
            .iter()
            .enumerate()
            .map(|(i, lp)| {
                let edge = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                edge * (lp - peak).exp()
            })
            .collect();
        let total: f64 = mass.iter().sum();
        mass.iter_mut().for_each(|m| *m /= total);
        let cumulative = mass
            .iter()
            .scan(0.0, |acc, m| {
                *acc += m;
                Some(*acc)
            })
            .collect();
        Ok(TauGrid {
            tau,
            log_density,
            mu_hat,
            mu_var,
            mass,
            cumulative,
        })
    }

    pub fn tau_max(&self) -> f64 {
        *self.tau.last().expect("grid has points")
    }

    /// Posterior mass with `τ` in the top tenth of the grid range.
    pub fn top_decile_mass(&self) -> f64 {
        let cut = TOP_DECILE * self.tau_max();
        self.tau
            .iter()
            .zip(&self.mass)
            .filter(|(t, _)| **t >= cut)
            .map(|(_, m)| m)
            .sum()
    }

    /// Grid index for a uniform draw by inverting the cumulative masses.
    fn sample_index(&self, u: f64) -> usize {
        let total = *self.cumulative.last().expect("grid has points");
        let target = u * total;
        self.cumulative
            .partition_point(|&c| c < target)
            .min(self.tau.len() - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub group_ids: Vec<String>,
    /// Row-major `n_draws × J` matrix of `θ` draws.
    draws: Vec<f64>,
    pub hypers: Vec<HyperDraw>,
    pub seed: u64,
    pub n_draws: usize,
    pub tau_max: f64,
    /// Posterior mass of `τ` in the top grid decile.
    pub tail_mass: f64,
}

impl PosteriorDraws {
    /// Wraps an externally produced draw matrix (rows are draws).
    pub fn from_rows(
        group_ids: Vec<String>,
        rows: Vec<Vec<f64>>,
        hypers: Vec<HyperDraw>,
        seed: u64,
    ) -> Result<Self> {
        let j = group_ids.len();
        if rows.is_empty() {
            return Err(Error::domain("at least one draw is required"));
        }
        if hypers.len() != rows.len() {
            return Err(Error::LengthMismatch {
                what: "hypers",
                got: hypers.len(),
                expected: rows.len(),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != j) {
            return Err(Error::LengthMismatch {
                what: "draw row",
                got: bad.len(),
                expected: j,
            });
        }
        let tau_max = hypers.iter().map(|h| h.tau).fold(0.0, f64::max);
        Ok(PosteriorDraws {
            n_draws: rows.len(),
            draws: rows.into_iter().flatten().collect(),
            group_ids,
            hypers,
            seed,
            tau_max,
            tail_mass: 0.0,
        })
    }

    pub fn n_groups(&self) -> usize {
        self.group_ids.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let j = self.n_groups();
        &self.draws[i * j..(i + 1) * j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws
            .iter()
            .skip(j)
            .step_by(self.n_groups())
            .copied()
            .collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.draws.chunks_exact(self.n_groups())
    }

    /// True when more than 1% of the `τ` mass sits in the top grid decile.
    pub fn truncation_suspected(&self) -> bool {
        self.tail_mass > TAIL_MASS_WARNING
    }

    /// Writes `draw,mu,tau,<group_id...>`, one row per draw, draws numbered from 1.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["draw".to_string(), "mu".into(), "tau".into()];
        header.extend(self.group_ids.iter().cloned());
        w.write_record(&header)?;
        for (i, (row, h)) in self.rows().zip(&self.hypers).enumerate() {
            let mut rec = vec![(i + 1).to_string(), h.mu.to_string(), h.tau.to_string()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()
            .map_err(|e| Error::Numerical(format!("csv flush: {e}")))?;
        Ok(())
    }
}

/// Exact posterior simulation by grid marginalization over `τ`.
///
/// Deterministic in `(data, n_draws, grid, seed)`. All randomness comes from
/// one substream `(seed, FIT)`; each draw consumes one uniform for `τ`, one
/// normal for `μ` and `J` normals for the group effects, in that order.
pub fn fit_grid(
    data: &StudyDataset,
    n_draws: usize,
    grid: &GridConfig,
    seed: u64,
) -> Result<PosteriorDraws> {
    if n_draws < 1 {
        return Err(Error::domain("n_draws must be at least 1"));
    }
    let tau_grid = TauGrid::new(data, grid)?;
    let y = data.estimates();
    let s = data.std_errors();
    let j = y.len();
    let mut stream = Stream::new(seed, &[site::FIT]);

    let mut draws = Vec::with_capacity(n_draws * j);
    let mut hypers = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let idx = tau_grid.sample_index(stream.uniform());
        let tau = tau_grid.tau[idx];
        let mu = stream.normal(tau_grid.mu_hat[idx], tau_grid.mu_var[idx].sqrt());
        for (yj, sj) in y.iter().zip(&s) {
            let (m, sd) = conditional_unchecked(*yj, *sj, mu, tau);
            draws.push(stream.normal(m, sd));
        }
        hypers.push(HyperDraw { mu, tau });
    }
    if draws.iter().any(|d| !d.is_finite()) {
        return Err(Error::Numerical("non-finite posterior draw".into()));
    }
    Ok(PosteriorDraws {
        group_ids: data.group_ids(),
        draws,
        hypers,
        seed,
        n_draws,
        tau_max: tau_grid.tau_max(),
        tail_mass: tau_grid.top_decile_mass(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPosterior {
    pub group_id: String,
    pub mean: f64,
    pub sd: f64,
    /// 2.5% empirical quantile.
    pub lower: f64,
    /// 97.5% empirical quantile.
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub groups: Vec<GroupPosterior>,
    pub mu_median: f64,
    pub tau_median: f64,
    pub n_draws: usize,
}

pub fn summarize(draws: &PosteriorDraws) -> Result<PosteriorSummary> {
    if draws.n_draws < MIN_SUMMARY_DRAWS {
        return Err(Error::domain(format!(
            "at least {MIN_SUMMARY_DRAWS} draws are needed for a summary, got {}",
            draws.n_draws
        )));
    }
    let groups = draws
        .group_ids
        .iter()
        .enumerate()
        .map(|(j, id)| {
            let col = draws.column(j);
            let sorted = stats::sorted(&col);
            GroupPosterior {
                group_id: id.clone(),
                mean: stats::mean(&col),
                sd: stats::sd(&col),
                lower: stats::quantile_sorted(&sorted, 0.025),
                upper: stats::quantile_sorted(&sorted, 0.975),
            }
        })
        .collect();
    let mus: Vec<f64> = draws.hypers.iter().map(|h| h.mu).collect();
    let taus: Vec<f64> = draws.hypers.iter().map(|h| h.tau).collect();
    Ok(PosteriorSummary {
        groups,
        mu_median: stats::quantile_sorted(&stats::sorted(&mus), 0.5),
        tau_median: stats::quantile_sorted(&stats::sorted(&taus), 0.5),
        n_draws: draws.n_draws,
    })
}
