use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use poolcomp::report::manifest::RunManifest;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_poolcomp"));
    c.env_remove("POOLCOMP_SEED");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("spawn poolcomp")
}

fn ok(args: &[&str], out: &Path) -> Output {
    let o = run(args, out);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&read(dir, name)).unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&read(dir, "manifest.json")).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn svg_count(dir: &Path, name: &str, tag: &str, class: &str) -> usize {
    let text = read(dir, name);
    let doc = roxmltree::Document::parse(&text).expect("valid XML");
    doc.descendants()
        .filter(|n| {
            n.has_tag_name(tag)
                && n.attribute("class")
                    .is_some_and(|c| c.split_whitespace().any(|w| w == class))
        })
        .count()
}

/// Data files listed in the manifest, excluding SVG and the manifest itself.
fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    manifest(dir)
        .outputs
        .iter()
        .filter(|n| n.ends_with(".csv") || n.ends_with(".json"))
        .map(|n| (n.clone(), std::fs::read(dir.join(n)).unwrap()))
        .collect()
}

/// Runs `args` twice plus once more from the manifest's resolved args and
/// checks the CSV/JSON outputs agree byte for byte.
fn assert_reproducible(args: &[&str]) {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    ok(args, &a);
    ok(args, &b);
    let resolved = manifest(&a).args;
    let resolved: Vec<&str> = resolved.iter().map(String::as_str).collect();
    ok(&resolved, &c);
    let (fa, fb, fc) = (data_files(&a), data_files(&b), data_files(&c));
    assert!(!fa.is_empty());
    assert_eq!(fa, fb, "rerun differs for {args:?}");
    assert_eq!(fa, fc, "manifest rerun differs for {args:?}");
}

#[test]
fn fit_writes_outputs_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path();
    ok(
        &["fit", "--fixture", "eight-schools", "--draws", "20000"],
        out,
    );
    let m = manifest(out);
    assert_eq!(m.subcommand, "fit");
    for f in [
        "posterior_draws.csv",
        "posterior_summary.json",
        "intervals.svg",
        "manifest.json",
    ] {
        assert!(
            m.outputs.iter().any(|o| o == f),
            "{f} missing from manifest"
        );
        assert!(out.join(f).exists());
    }
    assert!(m.warnings.is_empty(), "{:?}", m.warnings);
    assert_eq!(m.seed, Some(20_081));
    let s = json(out, "posterior_summary.json");
    let means: Vec<f64> = s["groups"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| g["mean"].as_f64().unwrap())
        .collect();
    for (m, want) in means.iter().zip([11.0, 7.0, 6.0, 7.0, 5.0, 6.0, 10.0, 8.0]) {
        assert!((m - want).abs() <= 1.5, "{m} vs {want}");
    }
    assert_eq!(read(out, "posterior_draws.csv").lines().count(), 20_001);
    assert_eq!(svg_count(out, "intervals.svg", "g", "group"), 8);
    assert_eq!(svg_count(out, "intervals.svg", "line", "zero"), 1);
    assert_eq!(svg_count(out, "intervals.svg", "line", "pooled"), 1);
}

#[test]
fn fit_three_panel_figure() {
    let tmp = TempDir::new().unwrap();
    ok(
        &[
            "fit",
            "--fixture",
            "eight-schools",
            "--draws",
            "2000",
            "--compare-classical",
        ],
        tmp.path(),
    );
    assert_eq!(svg_count(tmp.path(), "intervals.svg", "g", "group"), 24);
    assert_eq!(svg_count(tmp.path(), "intervals.svg", "line", "zero"), 3);
    assert_eq!(svg_count(tmp.path(), "intervals.svg", "line", "pooled"), 3);
}

#[test]
fn few_draws_warn_in_manifest() {
    let tmp = TempDir::new().unwrap();
    let o = ok(
        &["fit", "--fixture", "eight-schools", "--draws", "100"],
        tmp.path(),
    );
    let m = manifest(tmp.path());
    assert!(
        m.warnings
            .iter()
            .any(|w| w.contains("below the recommended")),
        "{:?}",
        m.warnings
    );
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn seed_from_environment() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let o = bin()
        .args([
            "fit",
            "--fixture",
            "eight-schools",
            "--draws",
            "500",
            "--out-dir",
        ])
        .arg(&a)
        .env("POOLCOMP_SEED", "7")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(manifest(&a).seed, Some(7));
    ok(
        &[
            "fit",
            "--fixture",
            "eight-schools",
            "--draws",
            "500",
            "--seed",
            "7",
        ],
        &b,
    );
    assert_eq!(
        read(&a, "posterior_draws.csv"),
        read(&b, "posterior_draws.csv")
    );
}

#[test]
fn input_errors_exit_2_with_row_context() {
    let tmp = TempDir::new().unwrap();
    let bad = write(
        tmp.path(),
        "bad.csv",
        "group,estimate,std_error\na,1,1\nb,2,-1\n",
    );
    let o = run(
        &["fit", "--input", bad.to_str().unwrap()],
        &tmp.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 3") && err.contains("std_error"), "{err}");

    let dup = write(
        tmp.path(),
        "dup.csv",
        "group,estimate,std_error\na,1,1\na,2,1\n",
    );
    let o = run(
        &["compare", "--input", dup.to_str().unwrap()],
        &tmp.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(2));

    let o = run(
        &["fit", "--input", "/nonexistent/x.csv"],
        &tmp.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(2));

    let o = run(
        &["compare", "--fixture", "eight-schools", "--level", "1.5"],
        &tmp.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(2));

    let o = run(
        &["compare", "--fixture", "eight-schools", "--method", "magic"],
        &tmp.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["shrinkage", "--sigma-y", "0"], &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    let tmp = TempDir::new().unwrap();
    let huge = write(
        tmp.path(),
        "huge.csv",
        "group,estimate,std_error\na,1e200,1\nb,-1e200,1\n",
    );
    let o = run(
        &["fit", "--input", huge.to_str().unwrap(), "--tau-max", "10"],
        &tmp.path().join("o"),
    );
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn units_input() {
    let tmp = TempDir::new().unwrap();
    let mut text = String::from("group,outcome\n");
    for (g, shift) in [("a", 0.0), ("b", 2.0), ("c", 4.0)] {
        for i in 0..6 {
            text.push_str(&format!("{g},{}\n", shift + i as f64 * 0.5));
        }
    }
    let units = write(tmp.path(), "units.csv", &text);
    let out = tmp.path().join("o");
    ok(
        &[
            "fit",
            "--input",
            units.to_str().unwrap(),
            "--format",
            "units",
            "--draws",
            "1000",
        ],
        &out,
    );
    let m = manifest(&out);
    assert_eq!(m.inputs.len(), 1);
    assert_eq!(m.inputs[0].sha256.len(), 64);
    let s = json(&out, "posterior_summary.json");
    assert_eq!(s["groups"].as_array().unwrap().len(), 3);
}

#[test]
fn correct_bonferroni_threshold() {
    let tmp = TempDir::new().unwrap();
    ok(
        &[
            "correct",
            "--fixture",
            "eight-schools",
            "--method",
            "bonferroni",
            "--intervals",
        ],
        tmp.path(),
    );
    let c = json(tmp.path(), "corrections.json");
    assert_eq!(c["m"], 8);
    for t in c["tests"].as_array().unwrap() {
        assert_eq!(t["threshold"].as_f64().unwrap(), 0.00625);
        assert!(
            t["interval"]["lower"].as_f64().unwrap() < t["interval"]["upper"].as_f64().unwrap()
        );
    }
    assert_eq!(svg_count(tmp.path(), "intervals.svg", "g", "group"), 8);
}

#[test]
fn correct_bh_fixture_and_interval_error() {
    let tmp = TempDir::new().unwrap();
    let p = write(
        tmp.path(),
        "p.csv",
        "label,p_value\nt1,0.001\nt2,0.013\nt3,0.04\nt4,0.2\n",
    );
    let ps = p.to_str().unwrap();
    let out = tmp.path().join("o");
    ok(
        &[
            "correct", "--input", ps, "--format", "pvalues", "--method", "bh-fdr",
        ],
        &out,
    );
    let c = json(&out, "corrections.json");
    assert_eq!(c["n_rejected"], 2);
    let rejected: Vec<bool> = c["tests"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["rejected"].as_bool().unwrap())
        .collect();
    assert_eq!(rejected, [true, true, false, false]);
    assert!(!out.join("intervals.svg").exists());

    let o = run(
        &[
            "correct",
            "--fixture",
            "eight-schools",
            "--method",
            "bh-fdr",
            "--intervals",
        ],
        &tmp.path().join("x"),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no FDR intervals"));
}

#[test]
fn single_test_same_under_none_and_bonferroni() {
    let tmp = TempDir::new().unwrap();
    let p = write(tmp.path(), "p.csv", "label,p_value\nonly,0.03\n");
    let ps = p.to_str().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(
        &[
            "correct", "--input", ps, "--format", "pvalues", "--method", "none",
        ],
        &a,
    );
    ok(
        &[
            "correct",
            "--input",
            ps,
            "--format",
            "pvalues",
            "--method",
            "bonferroni",
        ],
        &b,
    );
    let (mut ca, mut cb) = (json(&a, "corrections.json"), json(&b, "corrections.json"));
    ca["method"] = serde_json::Value::Null;
    cb["method"] = serde_json::Value::Null;
    assert_eq!(ca, cb);
    assert_eq!(ca["n_rejected"], 1);
}

#[test]
fn compare_eight_schools_all_indeterminate() {
    let tmp = TempDir::new().unwrap();
    ok(
        &["compare", "--fixture", "eight-schools", "--method", "bayes"],
        tmp.path(),
    );
    let matrix = read(tmp.path(), "matrix.csv");
    let mut lines = matrix.lines();
    lines.next();
    let cells: Vec<&str> = lines
        .flat_map(|l| l.split(',').skip(1))
        .filter(|c| !c.is_empty())
        .collect();
    assert_eq!(cells.len(), 56);
    assert!(cells.iter().all(|c| *c == "."), "{cells:?}");
    assert_eq!(svg_count(tmp.path(), "matrix.svg", "rect", "cell"), 56);
    assert_eq!(
        svg_count(tmp.path(), "matrix.svg", "rect", "indeterminate"),
        56
    );
}

#[test]
fn compare_identical_groups_every_method() {
    let tmp = TempDir::new().unwrap();
    let same = write(
        tmp.path(),
        "same.csv",
        "group,estimate,std_error\na,3,1\nb,3,1\n",
    );
    for method in ["none", "bonferroni", "bh-fdr", "bayes"] {
        let out = tmp.path().join(method);
        ok(
            &[
                "compare",
                "--input",
                same.to_str().unwrap(),
                "--method",
                method,
                "--draws",
                "2000",
            ],
            &out,
        );
        assert_eq!(
            read(&out, "matrix.csv"),
            "group,a,b\na,,.\nb,.,\n",
            "{method}"
        );
        assert_eq!(
            svg_count(&out, "matrix.svg", "rect", "indeterminate"),
            2,
            "{method}"
        );
    }
}

#[test]
fn compare_states_bayes_beats_fdr() {
    let tmp = TempDir::new().unwrap();
    let count = |method: &str| {
        let out = tmp.path().join(method);
        ok(
            &[
                "compare",
                "--fixture",
                "states",
                "--method",
                method,
                "--draws",
                "4000",
            ],
            &out,
        );
        read(&out, "matrix.csv")
            .lines()
            .skip(1)
            .flat_map(|l| l.split(',').skip(1).map(str::to_owned).collect::<Vec<_>>())
            .filter(|c| c == "H" || c == "L")
            .count()
    };
    let (bayes, fdr) = (count("bayes"), count("bh-fdr"));
    assert!(bayes >= fdr, "bayes {bayes} < fdr {fdr}");
    assert_eq!(
        svg_count(&tmp.path().join("bayes"), "matrix.svg", "rect", "cell"),
        51 * 50
    );
}

#[test]
fn simulate_minimal_run() {
    let tmp = TempDir::new().unwrap();
    ok(
        &["simulate", "--preset", "paper-tau5", "--reps", "1"],
        tmp.path(),
    );
    let r = json(tmp.path(), "sim_report.json");
    for arm in ["classical", "bayes"] {
        let a = &r[arm];
        assert_eq!(a["n_reps"], 1);
        let any = a["pct_any_significant"].as_f64().unwrap();
        assert!(any == 0.0 || any == 100.0);
    }
}

#[test]
fn simulate_from_config_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "cfg.json",
        r#"{"tau_true": 2, "sigma_list": [1, 1, 2], "n_reps": 20, "alpha": 0.05, "analysis": "classical", "seed": 3}"#,
    );
    let out = tmp.path().join("o");
    ok(&["simulate", "--config", cfg.to_str().unwrap()], &out);
    let r = json(&out, "sim_report.json");
    assert_eq!(r["classical"]["n_comparisons"], 60);
    assert!(r["bayes"].is_null());
    assert_eq!(manifest(&out).inputs.len(), 1);

    let bad = write(
        tmp.path(),
        "bad.json",
        r#"{"tau_true": -1, "sigma_list": [1, 1], "n_reps": 2, "alpha": 0.05, "analysis": "both", "seed": 1}"#,
    );
    let o = run(
        &["simulate", "--config", bad.to_str().unwrap()],
        &tmp.path().join("x"),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shrinkage_curve() {
    let tmp = TempDir::new().unwrap();
    ok(&["shrinkage"], tmp.path());
    let csv = read(tmp.path(), "shrinkage.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("variance_ratio,tau,factor"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 121);
    assert!((rows[0][0] - 1e-3).abs() < 1e-15 && (rows[120][0] - 1e3).abs() < 1e-9);
    let one = &rows[60];
    assert_eq!(one[0], 1.0);
    assert!((one[2] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    assert!(rows.windows(2).all(|w| w[1][2] >= w[0][2]));
    assert!(rows.iter().all(|r| r[2] > 0.0 && r[2] < 1.0));
    assert_eq!(
        svg_count(tmp.path(), "shrinkage.svg", "circle", "point"),
        121
    );

    let again = tmp.path().join("again");
    ok(&["shrinkage"], &again);
    assert_eq!(csv, read(&again, "shrinkage.csv"));
}

#[test]
fn every_subcommand_is_reproducible() {
    assert_reproducible(&[
        "fit",
        "--fixture",
        "eight-schools",
        "--draws",
        "3000",
        "--seed",
        "11",
    ]);
    assert_reproducible(&[
        "correct",
        "--fixture",
        "eight-schools",
        "--method",
        "none",
        "--tests",
        "pairs",
    ]);
    assert_reproducible(&[
        "compare",
        "--fixture",
        "eight-schools",
        "--method",
        "bayes",
        "--draws",
        "3000",
    ]);
    assert_reproducible(&["compare", "--fixture", "states", "--method", "bh-fdr"]);
    assert_reproducible(&[
        "simulate",
        "--preset",
        "paper-tau10",
        "--reps",
        "30",
        "--draws",
        "1000",
    ]);
    assert_reproducible(&["shrinkage", "--sigma-y", "2.5"]);
}
