//! Bundled datasets.
//!
//! The coaching-experiment summaries from eight schools, and a synthetic
//! 51-group "states" dataset with a large spread of true means relative to
//! the standard errors.

use crate::data::{read_summaries, GroupSummary, Provenance, StudyDataset};
use crate::rng::{site, Stream};

pub const EIGHT_SCHOOLS_CSV: &str = include_str!("../data/eight_schools.csv");

/// `(school, estimate, std_error)`.
pub const EIGHT_SCHOOLS: [(&str, f64, f64); 8] = [
    ("A", 28.0, 15.0),
    ("B", 8.0, 10.0),
    ("C", -3.0, 16.0),
    ("D", 7.0, 11.0),
    ("E", -1.0, 9.0),
    ("F", 1.0, 11.0),
    ("G", 18.0, 10.0),
    ("H", 12.0, 18.0),
];

pub fn eight_schools() -> StudyDataset {
    read_summaries(EIGHT_SCHOOLS_CSV.as_bytes(), "eight_schools.csv")
        .expect("bundled fixture is valid")
}

pub const STATES_SEED: u64 = 51;
pub const STATES_N: usize = 51;
pub const STATES_MEAN: f64 = 250.0;
pub const STATES_SD: f64 = 8.0;
pub const STATES_SE_RANGE: (f64, f64) = (0.8, 1.6);

/// Synthetic states: from substream `(STATES_SEED, STATES_FIXTURE)`, draw for
/// each of `S01..S51` a true mean `N(250, 8²)`, a standard error uniform on
/// `[0.8, 1.6]`, then an estimate `N(true, se²)`.
pub fn synthetic_states() -> (StudyDataset, Vec<f64>) {
    let mut stream = Stream::new(STATES_SEED, &[site::STATES_FIXTURE]);
    let (lo, hi) = STATES_SE_RANGE;
    let mut truths = Vec::with_capacity(STATES_N);
    let mut summaries = Vec::with_capacity(STATES_N);
    for i in 0..STATES_N {
        let truth = stream.normal(STATES_MEAN, STATES_SD);
        let se = lo + (hi - lo) * stream.uniform();
        let estimate = stream.normal(truth, se);
        truths.push(truth);
        summaries.push(GroupSummary {
            group_id: format!("S{:02}", i + 1),
            estimate,
            std_error: se,
            n: None,
        });
    }
    let mut ds = StudyDataset::new(summaries, Provenance::SummaryLevel).expect("fixture is valid");
    ds.metadata
        .insert("fixture".into(), "synthetic-states".into());
    (ds, truths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_matches_table() {
        let ds = eight_schools();
        for (s, (id, est, se)) in ds.summaries().iter().zip(EIGHT_SCHOOLS) {
            assert_eq!(
                (s.group_id.as_str(), s.estimate, s.std_error),
                (id, est, se)
            );
        }
    }

    #[test]
    fn states_are_stable() {
        let (a, ta) = synthetic_states();
        let (b, tb) = synthetic_states();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_eq!(a.len(), 51);
        assert!(a.std_errors().iter().all(|s| (0.8..=1.6).contains(s)));
    }
}
