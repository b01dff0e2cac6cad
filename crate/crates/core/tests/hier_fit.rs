use poolcomp::compare;
use poolcomp::data::StudyDataset;
use poolcomp::fixtures;
use poolcomp::hier::{self, GridConfig};
use poolcomp::stats;

const MEANS: [f64; 8] = [11.0, 7.0, 6.0, 7.0, 5.0, 6.0, 10.0, 8.0];
const SDS: [f64; 8] = [8.0, 6.0, 8.0, 7.0, 6.0, 7.0, 7.0, 8.0];

#[test]
fn eight_schools_posterior() {
    let ds = fixtures::eight_schools();
    let fit = hier::fit_grid(&ds, 20_000, &GridConfig::default(), 3).unwrap();
    let s = hier::summarize(&fit).unwrap();
    for (g, (m, sd)) in s.groups.iter().zip(MEANS.iter().zip(SDS)) {
        assert!((g.mean - m).abs() <= 1.5, "{}: mean {}", g.group_id, g.mean);
        assert!((g.sd - sd).abs() <= 1.5, "{}: sd {}", g.group_id, g.sd);
        assert!(g.lower < g.mean && g.mean < g.upper);
    }
    assert!(!fit.truncation_suspected(), "tail mass {}", fit.tail_mass);
}

#[test]
fn eight_schools_pairwise_intervals_cover_zero() {
    let ds = fixtures::eight_schools();
    let fit = hier::fit_grid(&ds, 20_000, &GridConfig::default(), 4).unwrap();
    let m = compare::interval_pairwise(&fit, 0.95).unwrap();
    assert_eq!(m.n_directional(), 0);
    let m = compare::bayes_pairwise(&fit, 0.95).unwrap();
    assert_eq!(m.n_directional(), 0);
}

#[test]
fn symmetric_pair_gives_mirrored_means() {
    let ds = StudyDataset::from_triples(&[("a", -1.0, 1.0), ("b", 1.0, 1.0)]).unwrap();
    let fit = hier::fit_grid(&ds, 100_000, &GridConfig::default(), 9).unwrap();
    let s = hier::summarize(&fit).unwrap();
    let (a, b) = (s.groups[0].mean, s.groups[1].mean);
    assert!(a < 0.0 && b > 0.0);
    assert!((a + b).abs() < 0.03, "{a} {b}");
}

#[test]
fn identical_groups_pool_completely() {
    let rows: Vec<(String, f64, f64)> = [2.0, 3.0, 4.0, 2.5, 3.5]
        .iter()
        .enumerate()
        .map(|(i, s)| (format!("g{i}"), 5.0, *s))
        .collect();
    let ds = StudyDataset::from_triples(&rows).unwrap();
    let fit = hier::fit_grid(&ds, 20_000, &GridConfig::default(), 1).unwrap();
    let s = hier::summarize(&fit).unwrap();
    for g in &s.groups {
        assert!(
            (g.mean - 5.0).abs() < 3.0 * g.sd / (20_000f64).sqrt() + 0.02,
            "{}",
            g.mean
        );
    }
    assert!(s.tau_median < 2.0, "{}", s.tau_median);
}

#[test]
fn equal_errors_preserve_ranks() {
    let ys = [-12.0, -4.0, 0.0, 6.0, 15.0, 30.0];
    let rows: Vec<(String, f64, f64)> = ys
        .iter()
        .enumerate()
        .map(|(i, y)| (format!("g{i}"), *y, 5.0))
        .collect();
    let ds = StudyDataset::from_triples(&rows).unwrap();
    let fit = hier::fit_grid(&ds, 20_000, &GridConfig::default(), 2).unwrap();
    let means: Vec<f64> = (0..ys.len()).map(|j| stats::mean(&fit.column(j))).collect();
    assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
    // shrinkage toward the centre
    assert!(means[0] > ys[0] && means[5] < ys[5]);
}

#[test]
fn truncation_warning_for_narrow_grid() {
    let ds = fixtures::eight_schools();
    let narrow = GridConfig {
        n_points: 200,
        tau_max: Some(2.0),
    };
    let fit = hier::fit_grid(&ds, 1000, &narrow, 1).unwrap();
    assert!(fit.truncation_suspected());
    assert!(fit.hypers.iter().all(|h| h.tau <= 2.0));
}

#[test]
fn draws_csv_round_trip_shape() {
    let ds = fixtures::eight_schools();
    let fit = hier::fit_grid(&ds, 50, &GridConfig::default(), 1).unwrap();
    let mut buf = Vec::new();
    fit.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "draw,mu,tau,A,B,C,D,E,F,G,H");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 50);
    assert!(rows.iter().all(|r| r.split(',').count() == 11));
}
