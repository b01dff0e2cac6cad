//! Classical per-test inference and multiplicity corrections.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::StudyDataset;
use crate::error::{Error, Result};
use crate::normal;

pub use crate::normal::inverse_cdf as inverse_normal_cdf;

/// A two-sided z test of `estimate = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub label: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
}

impl TestResult {
    pub fn new(label: impl Into<String>, estimate: f64, std_error: f64) -> Result<Self> {
        if !(std_error > 0.0 && std_error.is_finite()) {
            return Err(Error::domain(format!(
                "std_error must be positive, got {std_error}"
            )));
        }
        let z = estimate / std_error;
        Ok(TestResult {
            label: label.into(),
            estimate,
            std_error,
            z,
            p_value: normal::two_sided_p(z),
        })
    }
}

/// One test of `θ_j − θ_k = 0`, with `j < k` in dataset order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub j: usize,
    pub k: usize,
    pub test: TestResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Correction {
    None,
    Bonferroni,
    BhFdr,
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Correction::None => "none",
            Correction::Bonferroni => "bonferroni",
            Correction::BhFdr => "bh-fdr",
        })
    }
}

impl FromStr for Correction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Correction::None),
            "bonferroni" => Ok(Correction::Bonferroni),
            "bh-fdr" | "bh_fdr" => Ok(Correction::BhFdr),
            other => Err(Error::domain(format!("unknown correction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionOutcome {
    pub method: Correction,
    /// α for none/bonferroni, q for bh-fdr.
    pub level: f64,
    /// Per-test rejection threshold on the p-value scale.
    pub per_test_threshold: Vec<f64>,
    pub rejected: Vec<bool>,
    /// z quantile used for interval half-widths; absent for bh-fdr.
    pub interval_multiplier: Option<f64>,
}

impl CorrectionOutcome {
    pub fn n_rejected(&self) -> usize {
        self.rejected.iter().filter(|&&r| r).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub group_id: String,
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    pub intervals: Vec<Interval>,
    /// Nominal per-family error level α.
    pub alpha: f64,
    pub method: Correction,
    pub multiplier: f64,
}

fn check_level(level: f64, name: &str) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must lie in (0, 1), got {level}"
        )))
    }
}

fn check_p_values(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::domain("at least one test is required"));
    }
    match p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(bad) => Err(Error::domain(format!("p-value {bad} outside [0, 1]"))),
        None => Ok(()),
    }
}

/// Probability of at least one rejection among `m` independent true nulls.
pub fn familywise_error_rate(alpha: f64, m: u32) -> Result<f64> {
    check_level(alpha, "alpha")?;
    if m == 0 {
        return Err(Error::domain("m must be at least 1"));
    }
    // 1 - (1-α)^m, via expm1/ln_1p so small rates keep their precision
    Ok(-(m as f64 * (-alpha).ln_1p()).exp_m1())
}

pub fn uncorrected(p_values: &[f64], alpha: f64) -> Result<CorrectionOutcome> {
    check_level(alpha, "alpha")?;
    check_p_values(p_values)?;
    Ok(CorrectionOutcome {
        method: Correction::None,
        level: alpha,
        per_test_threshold: vec![alpha; p_values.len()],
        rejected: p_values.iter().map(|&p| p <= alpha).collect(),
        interval_multiplier: Some(normal::inverse_cdf(1.0 - alpha / 2.0)?),
    })
}

pub fn bonferroni(p_values: &[f64], alpha: f64) -> Result<CorrectionOutcome> {
    check_level(alpha, "alpha")?;
    check_p_values(p_values)?;
    let m = p_values.len() as f64;
    let threshold = alpha / m;
    Ok(CorrectionOutcome {
        method: Correction::Bonferroni,
        level: alpha,
        per_test_threshold: vec![threshold; p_values.len()],
        rejected: p_values.iter().map(|&p| p <= threshold).collect(),
        interval_multiplier: Some(normal::inverse_cdf(1.0 - alpha / (2.0 * m))?),
    })
}

/// Benjamini–Hochberg step-up at FDR level `q`.
///
/// With `p_(1) ≤ … ≤ p_(m)` and `k* = max{k : p_(k) ≤ k·q/m}`, every test
/// with `p ≤ k*·q/m` is rejected, which is exactly the set of ranks `≤ k*`
/// with ties sharing one fate. The reported per-test threshold is that
/// common cutoff (0 when nothing is rejected).
pub fn bh_fdr(p_values: &[f64], q: f64) -> Result<CorrectionOutcome> {
    check_level(q, "q")?;
    check_p_values(p_values)?;
    let m = p_values.len();
    let mut sorted = p_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k_star = (1..=m)
        .rev()
        .find(|&k| sorted[k - 1] <= k as f64 * q / m as f64)
        .unwrap_or(0);
    let cutoff = k_star as f64 * q / m as f64;
    let rejected = p_values
        .iter()
        .map(|&p| k_star > 0 && p <= sorted[k_star - 1])
        .collect();
    Ok(CorrectionOutcome {
        method: Correction::BhFdr,
        level: q,
        per_test_threshold: vec![cutoff; m],
        rejected,
        interval_multiplier: None,
    })
}

pub fn apply(correction: Correction, p_values: &[f64], level: f64) -> Result<CorrectionOutcome> {
    match correction {
        Correction::None => uncorrected(p_values, level),
        Correction::Bonferroni => bonferroni(p_values, level),
        Correction::BhFdr => bh_fdr(p_values, level),
    }
}

/// Per-group tests of `θ_j = 0`.
pub fn group_z_tests(data: &StudyDataset) -> Result<Vec<TestResult>> {
    data.summaries()
        .iter()
        .map(|s| TestResult::new(s.group_id.clone(), s.estimate, s.std_error))
        .collect()
}

/// All `J(J−1)/2` pairwise difference tests in lexicographic `(j, k)` order.
pub fn pairwise_z_tests(data: &StudyDataset) -> Result<Vec<PairTest>> {
    let s = data.summaries();
    let mut out = Vec::with_capacity(s.len() * (s.len() - 1) / 2);
    for j in 0..s.len() {
        for k in j + 1..s.len() {
            let se = s[j].std_error.hypot(s[k].std_error);
            let label = format!("{}-{}", s[j].group_id, s[k].group_id);
            out.push(PairTest {
                j,
                k,
                test: TestResult::new(label, s[j].estimate - s[k].estimate, se)?,
            });
        }
    }
    Ok(out)
}

/// Normal-theory intervals `estimate ± multiplier·std_error`, with the
/// multiplier widened to `Φ⁻¹(1 − α/(2m))` under Bonferroni.
pub fn confidence_intervals(
    data: &StudyDataset,
    alpha: f64,
    method: Correction,
) -> Result<IntervalSet> {
    check_level(alpha, "alpha")?;
    let m = data.len() as f64;
    let multiplier = match method {
        Correction::None => normal::inverse_cdf(1.0 - alpha / 2.0)?,
        Correction::Bonferroni => normal::inverse_cdf(1.0 - alpha / (2.0 * m))?,
        Correction::BhFdr => {
            return Err(Error::domain(
                "no FDR intervals: the step-up procedure yields rejection sets only",
            ))
        }
    };
    Ok(IntervalSet {
        intervals: data
            .summaries()
            .iter()
            .map(|s| Interval {
                group_id: s.group_id.clone(),
                center: s.estimate,
                lower: s.estimate - multiplier * s.std_error,
                upper: s.estimate + multiplier * s.std_error,
            })
            .collect(),
        alpha,
        method,
        multiplier,
    })
}
