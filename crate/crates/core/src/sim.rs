//! Replicated simulation study: draw true group effects, simulate estimates,
//! analyze them classically and with the hierarchical model, and tally how
//! often each analysis claims a difference and how often the claimed sign is
//! right.
//!
//! Replication `r` draws its data from substream `(seed, SIM_DATA, r)` and
//! fits with seed `derive_seed(seed, [SIM_FIT, r])`, so results do not depend
//! on execution order and both arms see the same simulated data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::Correction;
use crate::compare::{self, ClaimScore, ComparisonMatrix};
use crate::data::StudyDataset;
use crate::error::{Error, Result};
use crate::fixtures;
use crate::hier::{self, GridConfig};
use crate::rng::{derive_seed, site, Stream};

pub const DEFAULT_SEED: u64 = 20_081;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analysis {
    Classical,
    Bayes,
    Both,
}

impl Analysis {
    fn classical(self) -> bool {
        matches!(self, Analysis::Classical | Analysis::Both)
    }

    fn bayes(self) -> bool {
        matches!(self, Analysis::Bayes | Analysis::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Standard deviation of the true group effects.
    pub tau_true: f64,
    #[serde(default)]
    pub mu_true: f64,
    /// Standard error of each group's estimate; its length sets the group count.
    pub sigma_list: Vec<f64>,
    pub n_reps: usize,
    pub alpha: f64,
    pub analysis: Analysis,
    #[serde(default = "default_bayes_draws")]
    pub bayes_draws: usize,
    /// Correction for the classical arm; the reference studies use none.
    #[serde(default = "default_correction")]
    pub classical_correction: Correction,
    #[serde(default)]
    pub grid: GridConfig,
    pub seed: u64,
}

fn default_bayes_draws() -> usize {
    1000
}

fn default_correction() -> Correction {
    Correction::None
}

impl SimConfig {
    /// Eight groups with the coaching-study standard errors, 1000
    /// replications at α = 0.05, both arms.
    pub fn eight_schools(tau_true: f64) -> Self {
        SimConfig {
            tau_true,
            mu_true: 0.0,
            sigma_list: fixtures::EIGHT_SCHOOLS.iter().map(|r| r.2).collect(),
            n_reps: 1000,
            alpha: 0.05,
            analysis: Analysis::Both,
            bayes_draws: default_bayes_draws(),
            classical_correction: Correction::None,
            grid: GridConfig::default(),
            seed: DEFAULT_SEED,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper-tau5" => Ok(Self::eight_schools(5.0)),
            "paper-tau10" => Ok(Self::eight_schools(10.0)),
            other => Err(Error::domain(format!(
                "unknown preset {other:?} (expected paper-tau5 or paper-tau10)"
            ))),
        }
    }

    pub fn n_groups(&self) -> usize {
        self.sigma_list.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_list.len() < 2 {
            return Err(Error::domain("sigma_list needs at least 2 groups"));
        }
        if let Some(s) = self
            .sigma_list
            .iter()
            .find(|s| !(**s > 0.0 && s.is_finite()))
        {
            return Err(Error::domain(format!(
                "sigma_list entries must be positive, got {s}"
            )));
        }
        if !(self.tau_true >= 0.0 && self.tau_true.is_finite()) {
            return Err(Error::domain(format!(
                "tau_true must be non-negative, got {}",
                self.tau_true
            )));
        }
        if !self.mu_true.is_finite() {
            return Err(Error::domain("mu_true must be finite"));
        }
        if self.n_reps < 1 {
            return Err(Error::domain("n_reps must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.bayes_draws < 1 {
            return Err(Error::domain("bayes_draws must be at least 1"));
        }
        if let Some(t) = self.grid.tau_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::domain(format!(
                    "grid tau_max must be positive and finite, got {t}"
                )));
            }
        }
        if self.grid.n_points < 2 {
            return Err(Error::domain("grid needs at least 2 points"));
        }
        Ok(())
    }
}

/// One arm's result for one replication.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmRep {
    pub score: ClaimScore,
    /// Sum and count of `|estimated difference| / |true difference|` over
    /// significant claims with a non-zero truth.
    pub ratio_sum: f64,
    pub n_ratios: u64,
    pub n_zero_truth: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub rep_index: usize,
    pub truths: Vec<f64>,
    pub estimates: Vec<f64>,
    pub classical: Option<ArmRep>,
    pub bayes: Option<ArmRep>,
}

fn score_arm(matrix: &ComparisonMatrix, diff_estimates: &[f64], truths: &[f64]) -> Result<ArmRep> {
    let score = compare::score_claims(matrix, truths)?;
    let n = truths.len();
    let mut true_diffs = Vec::with_capacity(diff_estimates.len());
    let mut significant = Vec::with_capacity(diff_estimates.len());
    for j in 0..n {
        for k in j + 1..n {
            true_diffs.push(truths[j] - truths[k]);
            significant.push(matrix.claim(j, k).is_some_and(|c| c.is_directional()));
        }
    }
    let tm = compare::type_m_summary(diff_estimates, &true_diffs, &significant)?;
    Ok(ArmRep {
        score,
        ratio_sum: tm.exaggeration_ratios.iter().sum(),
        n_ratios: tm.exaggeration_ratios.len() as u64,
        n_zero_truth: tm.n_zero_truth as u64,
    })
}

fn pair_diffs(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .flat_map(|j| (j + 1..n).map(move |k| values[j] - values[k]))
        .collect()
}

pub fn run_replication(config: &SimConfig, rep_index: usize) -> Result<RepOutcome> {
    config.validate()?;
    let mut stream = Stream::new(config.seed, &[site::SIM_DATA, rep_index as u64]);
    let truths: Vec<f64> = config
        .sigma_list
        .iter()
        .map(|_| stream.normal(config.mu_true, config.tau_true))
        .collect();
    let estimates: Vec<f64> = truths
        .iter()
        .zip(&config.sigma_list)
        .map(|(t, s)| stream.normal(*t, *s))
        .collect();
    let rows: Vec<(String, f64, f64)> = estimates
        .iter()
        .zip(&config.sigma_list)
        .enumerate()
        .map(|(j, (y, s))| (format!("g{}", j + 1), *y, *s))
        .collect();
    let data = StudyDataset::from_triples(&rows)?;

    let classical = if config.analysis.classical() {
        let m = compare::classical_pairwise(&data, config.alpha, config.classical_correction)?;
        Some(score_arm(&m, &pair_diffs(&estimates), &truths)?)
    } else {
        None
    };

    let bayes = if config.analysis.bayes() {
        let fit_seed = derive_seed(config.seed, &[site::SIM_FIT, rep_index as u64]);
        let draws = hier::fit_grid(&data, config.bayes_draws, &config.grid, fit_seed)?;
        let m = compare::interval_pairwise(&draws, 1.0 - config.alpha)?;
        let post_means: Vec<f64> = (0..draws.n_groups())
            .map(|j| crate::stats::mean(&draws.column(j)))
            .collect();
        Some(score_arm(&m, &pair_diffs(&post_means), &truths)?)
    } else {
        None
    };

    Ok(RepOutcome {
        rep_index,
        truths,
        estimates,
        classical,
        bayes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub n_reps: u64,
    pub n_comparisons: u64,
    pub n_significant: u64,
    pub n_correct_sign: u64,
    pub n_reps_any_significant: u64,
    /// Significant claims over all comparisons, in percent.
    pub pct_significant: f64,
    /// Correct-sign claims over significant claims, in percent; null when
    /// nothing was significant.
    pub pct_correct_sign: Option<f64>,
    /// Replications with at least one significant claim, in percent.
    pub pct_any_significant: f64,
    pub n_exaggeration_ratios: u64,
    pub n_zero_truth: u64,
    pub mean_exaggeration_ratio: Option<f64>,
}

impl ArmReport {
    fn aggregate<'a>(reps: impl Iterator<Item = &'a ArmRep>) -> Self {
        let mut n_reps = 0u64;
        let mut any = 0u64;
        let mut score = ClaimScore::default();
        let mut ratio_sum = 0.0;
        let mut n_ratios = 0u64;
        let mut n_zero = 0u64;
        for r in reps {
            n_reps += 1;
            if r.score.n_significant > 0 {
                any += 1;
            }
            score = score.merge(r.score);
            ratio_sum += r.ratio_sum;
            n_ratios += r.n_ratios;
            n_zero += r.n_zero_truth;
        }
        ArmReport {
            n_reps,
            n_comparisons: score.n_claims,
            n_significant: score.n_significant,
            n_correct_sign: score.n_correct_sign,
            n_reps_any_significant: any,
            pct_significant: 100.0 * score.significant_rate().unwrap_or(0.0),
            pct_correct_sign: score.correct_sign_rate().map(|r| 100.0 * r),
            pct_any_significant: 100.0 * any as f64 / n_reps.max(1) as f64,
            n_exaggeration_ratios: n_ratios,
            n_zero_truth: n_zero,
            mean_exaggeration_ratio: (n_ratios > 0).then(|| ratio_sum / n_ratios as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub classical: Option<ArmReport>,
    pub bayes: Option<ArmReport>,
}

/// Aggregates replications already run, in `rep_index` order.
pub fn aggregate(config: &SimConfig, mut reps: Vec<RepOutcome>) -> SimReport {
    reps.sort_by_key(|r| r.rep_index);
    let classical = config
        .analysis
        .classical()
        .then(|| ArmReport::aggregate(reps.iter().filter_map(|r| r.classical.as_ref())));
    let bayes = config
        .analysis
        .bayes()
        .then(|| ArmReport::aggregate(reps.iter().filter_map(|r| r.bayes.as_ref())));
    SimReport {
        config: config.clone(),
        classical,
        bayes,
    }
}

/// Runs all replications (in parallel) and aggregates them.
pub fn run_study(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let reps = (0..config.n_reps)
        .into_par_iter()
        .map(|r| run_replication(config, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(config, reps))
}
