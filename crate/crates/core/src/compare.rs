//! All-pairs comparison claims and their scoring against known truths.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::classical::{self, Correction};
use crate::data::StudyDataset;
use crate::error::{Error, Result};
use crate::hier::PosteriorDraws;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Claim {
    Higher,
    Lower,
    Indeterminate,
}

impl Claim {
    pub fn flip(self) -> Claim {
        match self {
            Claim::Higher => Claim::Lower,
            Claim::Lower => Claim::Higher,
            Claim::Indeterminate => Claim::Indeterminate,
        }
    }

    pub fn is_directional(self) -> bool {
        self != Claim::Indeterminate
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Claim::Higher => "H",
            Claim::Lower => "L",
            Claim::Indeterminate => ".",
        }
    }
}

/// How a matrix was produced, which also fixes what `evidence` means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "correction")]
pub enum MatrixMethod {
    /// Evidence is `P(θ_j > θ_k)`; claims threshold it at the level.
    BayesProbability,
    /// Evidence is `P(θ_j > θ_k)`; claims require the central posterior
    /// interval of `θ_j − θ_k` to exclude zero.
    BayesInterval,
    /// Evidence is the two-sided p-value of the pairwise z test.
    Classical(Correction),
}

impl fmt::Display for MatrixMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixMethod::BayesProbability => f.write_str("bayes"),
            MatrixMethod::BayesInterval => f.write_str("bayes-interval"),
            MatrixMethod::Classical(c) => write!(f, "classical-{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    pub group_ids: Vec<String>,
    claims: Vec<Claim>,
    evidence: Vec<f64>,
    pub method: MatrixMethod,
    pub level: f64,
}

impl ComparisonMatrix {
    fn empty(group_ids: Vec<String>, method: MatrixMethod, level: f64) -> Self {
        let n = group_ids.len();
        ComparisonMatrix {
            group_ids,
            claims: vec![Claim::Indeterminate; n * n],
            evidence: vec![0.0; n * n],
            method,
            level,
        }
    }

    /// Sets cell `(j, k)` and its mirror image.
    fn set_pair(&mut self, j: usize, k: usize, claim: Claim, ev_jk: f64, ev_kj: f64) {
        let n = self.len();
        self.claims[j * n + k] = claim;
        self.claims[k * n + j] = claim.flip();
        self.evidence[j * n + k] = ev_jk;
        self.evidence[k * n + j] = ev_kj;
    }

    pub fn len(&self) -> usize {
        self.group_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group_ids.is_empty()
    }

    /// Claim for `θ_j` relative to `θ_k`; `None` on the diagonal.
    pub fn claim(&self, j: usize, k: usize) -> Option<Claim> {
        (j != k).then(|| self.claims[j * self.len() + k])
    }

    pub fn evidence(&self, j: usize, k: usize) -> Option<f64> {
        (j != k).then(|| self.evidence[j * self.len() + k])
    }

    /// Unordered pairs with a directional claim.
    pub fn n_directional(&self) -> usize {
        self.upper_pairs()
            .filter(|&(j, k)| self.claims[j * self.len() + k].is_directional())
            .count()
    }

    pub fn n_pairs(&self) -> usize {
        let n = self.len();
        n * (n - 1) / 2
    }

    fn upper_pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let n = self.len();
        (0..n).flat_map(move |j| (j + 1..n).map(move |k| (j, k)))
    }

    /// The same matrix with rows and columns taken in `order`.
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        let n = self.len();
        let mut seen = vec![false; n];
        if order.len() != n
            || order
                .iter()
                .any(|&i| i >= n || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::domain("order must be a permutation of the groups"));
        }
        let mut out = ComparisonMatrix::empty(
            order.iter().map(|&i| self.group_ids[i].clone()).collect(),
            self.method,
            self.level,
        );
        for (a, &oa) in order.iter().enumerate() {
            for (b, &ob) in order.iter().enumerate() {
                out.claims[a * n + b] = self.claims[oa * n + ob];
                out.evidence[a * n + b] = self.evidence[oa * n + ob];
            }
        }
        Ok(out)
    }

    /// Claim grid: header `group,<ids>`, cells `H`, `L` or `.`, empty diagonal.
    pub fn write_claims_csv<W: Write>(&self, out: W) -> Result<()> {
        self.write_grid(out, |j, k| self.claim(j, k).map(|c| c.symbol().to_string()))
    }

    /// Evidence grid in the same layout as the claim grid.
    pub fn write_evidence_csv<W: Write>(&self, out: W) -> Result<()> {
        self.write_grid(out, |j, k| self.evidence(j, k).map(|e| e.to_string()))
    }

    fn write_grid<W: Write>(
        &self,
        out: W,
        cell: impl Fn(usize, usize) -> Option<String>,
    ) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["group".to_string()];
        header.extend(self.group_ids.iter().cloned());
        w.write_record(&header)?;
        for (j, id) in self.group_ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend((0..self.len()).map(|k| cell(j, k).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush()
            .map_err(|e| Error::Numerical(format!("csv flush: {e}")))?;
        Ok(())
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "level must lie in (0, 1), got {level}"
        )))
    }
}

/// Share of draws with `θ_j > θ_k`, ties counting one half.
fn prob_greater(draws: &PosteriorDraws, j: usize, k: usize) -> f64 {
    let (mut greater, mut ties) = (0usize, 0usize);
    for row in draws.rows() {
        if row[j] > row[k] {
            greater += 1;
        } else if row[j] == row[k] {
            ties += 1;
        }
    }
    (2 * greater + ties) as f64 / (2 * draws.n_draws) as f64
}

/// Claims `θ_j > θ_k` when at least a `level` share of draws agree.
pub fn bayes_pairwise(draws: &PosteriorDraws, level: f64) -> Result<ComparisonMatrix> {
    check_level(level)?;
    let mut m = ComparisonMatrix::empty(
        draws.group_ids.clone(),
        MatrixMethod::BayesProbability,
        level,
    );
    for (j, k) in m.upper_pairs().collect::<Vec<_>>() {
        let p = prob_greater(draws, j, k);
        let q = prob_greater(draws, k, j);
        let claim = if p >= level {
            Claim::Higher
        } else if q >= level {
            Claim::Lower
        } else {
            Claim::Indeterminate
        };
        m.set_pair(j, k, claim, p, q);
    }
    Ok(m)
}

/// Claims a direction when the central `level` interval of `θ_j − θ_k`
/// (empirical quantiles of the draw-wise differences) excludes zero.
pub fn interval_pairwise(draws: &PosteriorDraws, level: f64) -> Result<ComparisonMatrix> {
    check_level(level)?;
    let tail = (1.0 - level) / 2.0;
    let mut m =
        ComparisonMatrix::empty(draws.group_ids.clone(), MatrixMethod::BayesInterval, level);
    let mut diffs = Vec::with_capacity(draws.n_draws);
    for (j, k) in m.upper_pairs().collect::<Vec<_>>() {
        diffs.clear();
        diffs.extend(draws.rows().map(|r| r[j] - r[k]));
        diffs.sort_by(f64::total_cmp);
        let lo = stats::quantile_sorted(&diffs, tail);
        let hi = stats::quantile_sorted(&diffs, 1.0 - tail);
        let claim = if lo > 0.0 {
            Claim::Higher
        } else if hi < 0.0 {
            Claim::Lower
        } else {
            Claim::Indeterminate
        };
        m.set_pair(
            j,
            k,
            claim,
            prob_greater(draws, j, k),
            prob_greater(draws, k, j),
        );
    }
    Ok(m)
}

/// Pairwise z tests with the chosen correction applied jointly to all
/// `J(J−1)/2` p-values; rejected pairs take the sign of the difference.
pub fn classical_pairwise(
    data: &StudyDataset,
    alpha: f64,
    correction: Correction,
) -> Result<ComparisonMatrix> {
    let tests = classical::pairwise_z_tests(data)?;
    let p: Vec<f64> = tests.iter().map(|t| t.test.p_value).collect();
    let outcome = classical::apply(correction, &p, alpha)?;
    let mut m =
        ComparisonMatrix::empty(data.group_ids(), MatrixMethod::Classical(correction), alpha);
    for (t, &rejected) in tests.iter().zip(&outcome.rejected) {
        let claim = if !rejected || t.test.estimate == 0.0 {
            Claim::Indeterminate
        } else if t.test.estimate > 0.0 {
            Claim::Higher
        } else {
            Claim::Lower
        };
        m.set_pair(t.j, t.k, claim, t.test.p_value, t.test.p_value);
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClaimScore {
    pub n_claims: u64,
    pub n_significant: u64,
    pub n_correct_sign: u64,
}

impl ClaimScore {
    pub fn significant_rate(&self) -> Option<f64> {
        (self.n_claims > 0).then(|| self.n_significant as f64 / self.n_claims as f64)
    }

    pub fn correct_sign_rate(&self) -> Option<f64> {
        (self.n_significant > 0).then(|| self.n_correct_sign as f64 / self.n_significant as f64)
    }

    pub fn merge(self, other: ClaimScore) -> ClaimScore {
        ClaimScore {
            n_claims: self.n_claims + other.n_claims,
            n_significant: self.n_significant + other.n_significant,
            n_correct_sign: self.n_correct_sign + other.n_correct_sign,
        }
    }
}

/// Counts directional claims and those whose direction matches the truth.
/// A true difference of exactly zero makes every directional claim wrong.
pub fn score_claims(matrix: &ComparisonMatrix, truths: &[f64]) -> Result<ClaimScore> {
    if truths.len() != matrix.len() {
        return Err(Error::LengthMismatch {
            what: "truths",
            got: truths.len(),
            expected: matrix.len(),
        });
    }
    let mut score = ClaimScore::default();
    for (j, k) in matrix.upper_pairs() {
        score.n_claims += 1;
        let claim = matrix.claims[j * matrix.len() + k];
        if !claim.is_directional() {
            continue;
        }
        score.n_significant += 1;
        let d = truths[j] - truths[k];
        let correct = (claim == Claim::Higher && d > 0.0) || (claim == Claim::Lower && d < 0.0);
        if correct {
            score.n_correct_sign += 1;
        }
    }
    Ok(score)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeMSummary {
    /// `|estimate| / |truth|` for each significant claim with non-zero truth.
    pub exaggeration_ratios: Vec<f64>,
    /// Mean of the ratios; absent when there are none.
    pub mean_ratio: Option<f64>,
    /// Significant claims skipped because their truth is exactly zero.
    pub n_zero_truth: usize,
}

pub fn type_m_summary(
    estimates: &[f64],
    truths: &[f64],
    significant: &[bool],
) -> Result<TypeMSummary> {
    if truths.len() != estimates.len() {
        return Err(Error::LengthMismatch {
            what: "truths",
            got: truths.len(),
            expected: estimates.len(),
        });
    }
    if significant.len() != estimates.len() {
        return Err(Error::LengthMismatch {
            what: "significant",
            got: significant.len(),
            expected: estimates.len(),
        });
    }
    let mut ratios = Vec::new();
    let mut n_zero_truth = 0;
    for ((&est, &truth), &sig) in estimates.iter().zip(truths).zip(significant) {
        if !sig {
            continue;
        }
        if truth == 0.0 {
            n_zero_truth += 1;
        } else {
            ratios.push(est.abs() / truth.abs());
        }
    }
    let mean_ratio = (!ratios.is_empty()).then(|| stats::mean(&ratios));
    Ok(TypeMSummary {
        exaggeration_ratios: ratios,
        mean_ratio,
        n_zero_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hier::HyperDraw;

    fn draws(cols: &[Vec<f64>]) -> PosteriorDraws {
        let n = cols[0].len();
        let rows = (0..n)
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect();
        let ids = (0..cols.len()).map(|j| format!("g{}", j + 1)).collect();
        PosteriorDraws::from_rows(ids, rows, vec![HyperDraw { mu: 0.0, tau: 1.0 }; n], 0).unwrap()
    }

    #[test]
    fn bayes_threshold_at_950_of_1000() {
        let a: Vec<f64> = (0..1000)
            .map(|i| if i < 970 { 1.0 } else { -1.0 })
            .collect();
        let b = vec![0.0; 1000];
        let m = bayes_pairwise(&draws(&[a, b]), 0.95).unwrap();
        assert_eq!(m.claim(0, 1), Some(Claim::Higher));
        assert_eq!(m.claim(1, 0), Some(Claim::Lower));
        assert_eq!(m.evidence(0, 1), Some(0.97));
        assert_eq!(m.claim(0, 0), None);
    }

    #[test]
    fn identical_columns_split_ties() {
        let a: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let m = bayes_pairwise(&draws(&[a.clone(), a]), 0.95).unwrap();
        assert_eq!(m.claim(0, 1), Some(Claim::Indeterminate));
        assert_eq!(m.evidence(0, 1), Some(0.5));
        assert_eq!(m.evidence(1, 0), Some(0.5));
    }

    #[test]
    fn bad_level() {
        let a = vec![0.0; 10];
        assert!(bayes_pairwise(&draws(&[a.clone(), a.clone()]), 1.0).is_err());
        assert!(interval_pairwise(&draws(&[a.clone(), a]), 0.0).is_err());
    }

    #[test]
    fn interval_claims() {
        let a: Vec<f64> = (0..1000).map(|i| 1.0 + i as f64 / 1000.0).collect();
        let b: Vec<f64> = (0..1000).map(|i| (i as f64 / 1000.0) - 0.5).collect();
        let m = interval_pairwise(&draws(&[a, b]), 0.95).unwrap();
        assert_eq!(m.claim(0, 1), Some(Claim::Higher));
    }

    #[test]
    fn classical_examples() {
        let ds = StudyDataset::from_triples(&[("a", 0.0, 1.0), ("b", 10.0, 1.0)]).unwrap();
        let m = classical_pairwise(&ds, 0.05, Correction::None).unwrap();
        assert_eq!(m.claim(0, 1), Some(Claim::Lower));
        let eq = StudyDataset::from_triples(&[("a", 3.0, 1.0), ("b", 3.0, 1.0)]).unwrap();
        for c in [Correction::None, Correction::Bonferroni, Correction::BhFdr] {
            assert_eq!(classical_pairwise(&eq, 0.05, c).unwrap().n_directional(), 0);
        }
    }

    #[test]
    fn scoring() {
        let ds = StudyDataset::from_triples(&[("1", 10.0, 1.0), ("2", 0.0, 1.0)]).unwrap();
        let m = classical_pairwise(&ds, 0.05, Correction::None).unwrap();
        let s = score_claims(&m, &[5.0, 3.0]).unwrap();
        assert_eq!((s.n_significant, s.n_correct_sign), (1, 1));
        let s = score_claims(&m, &[3.0, 5.0]).unwrap();
        assert_eq!((s.n_significant, s.n_correct_sign), (1, 0));
        let s = score_claims(&m, &[4.0, 4.0]).unwrap();
        assert_eq!((s.n_significant, s.n_correct_sign), (1, 0));
        assert!(score_claims(&m, &[1.0]).is_err());

        let flat = StudyDataset::from_triples(&[("1", 0.0, 1.0), ("2", 0.0, 1.0)]).unwrap();
        let m = classical_pairwise(&flat, 0.05, Correction::None).unwrap();
        let s = score_claims(&m, &[5.0, 3.0]).unwrap();
        assert_eq!((s.n_claims, s.n_significant, s.n_correct_sign), (1, 0, 0));
        assert_eq!(s.correct_sign_rate(), None);
    }

    #[test]
    fn type_m() {
        let t = type_m_summary(&[9.0], &[3.0], &[true]).unwrap();
        assert_eq!(t.exaggeration_ratios, vec![3.0]);
        assert_eq!(t.mean_ratio, Some(3.0));
        let t = type_m_summary(&[9.0, 1.0], &[3.0, 0.0], &[false, true]).unwrap();
        assert!(t.exaggeration_ratios.is_empty());
        assert_eq!(t.mean_ratio, None);
        assert_eq!(t.n_zero_truth, 1);
        assert!(type_m_summary(&[1.0], &[1.0, 2.0], &[true]).is_err());
    }

    #[test]
    fn csv_grids() {
        let ds = StudyDataset::from_triples(&[("a", 0.0, 1.0), ("b", 10.0, 1.0)]).unwrap();
        let m = classical_pairwise(&ds, 0.05, Correction::None).unwrap();
        let mut buf = Vec::new();
        m.write_claims_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "group,a,b\na,,L\nb,H,\n");
    }

    #[test]
    fn reorder_rejects_non_permutations() {
        let ds = StudyDataset::from_triples(&[("a", 0.0, 1.0), ("b", 10.0, 1.0)]).unwrap();
        let m = classical_pairwise(&ds, 0.05, Correction::None).unwrap();
        assert!(m.reordered(&[0, 0]).is_err());
        let r = m.reordered(&[1, 0]).unwrap();
        assert_eq!(r.claim(0, 1), Some(Claim::Higher));
        assert_eq!(r.group_ids, vec!["b", "a"]);
    }
}
