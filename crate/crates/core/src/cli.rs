//! Command-line surface: `fit`, `correct`, `compare`, `simulate`, `shrinkage`.
//!
//! Every subcommand writes its outputs plus `manifest.json` into `--out-dir`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::classical::{self, Correction, TestResult};
use crate::compare::{self, ComparisonMatrix};
use crate::data::{self, StudyDataset};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::hier::{self, GridConfig, PosteriorDraws};
use crate::report::manifest::MANIFEST_FILE;
use crate::report::svg::{self, IntervalPanel, IntervalPoint};
use crate::report::{write_atomic, RunManifest};
use crate::sim::{self, Analysis, SimConfig};

/// Draw count below which Bayesian comparisons are flagged.
pub const RECOMMENDED_DRAWS: usize = 1000;
pub const DEFAULT_DRAWS: usize = 20_000;

#[derive(Debug, Parser)]
#[command(
    name = "poolcomp",
    version,
    about = "Multiple comparisons: classical corrections and hierarchical partial pooling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the hierarchical model and summarize the group effects.
    Fit(FitArgs),
    /// Apply a classical multiplicity correction.
    Correct(CorrectArgs),
    /// Build an all-pairs comparison matrix.
    Compare(CompareArgs),
    /// Run a replicated simulation study.
    Simulate(SimulateArgs),
    /// Tabulate the partial-pooling z-score factor.
    Shrinkage(ShrinkageArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    Summary,
    Units,
    /// `label,p_value` rows; only `correct` accepts it.
    Pvalues,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fixture {
    EightSchools,
    States,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long, value_name = "PATH", conflicts_with = "fixture")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "summary")]
    pub format: InputFormat,
    /// Use a bundled dataset instead of `--input`.
    #[arg(long, value_enum)]
    pub fixture: Option<Fixture>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 1000)]
    pub grid_points: usize,
    /// Upper end of the tau grid [default: 2·sd(estimates) + max std_error].
    #[arg(long)]
    pub tau_max: Option<f64>,
}

impl GridArgs {
    fn config(&self) -> GridConfig {
        GridConfig {
            n_points: self.grid_points,
            tau_max: self.tau_max,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = DEFAULT_DRAWS)]
    pub draws: usize,
    #[arg(long, env = "POOLCOMP_SEED", default_value_t = sim::DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Level of the classical panels drawn with `--compare-classical`.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Draw classical and Bonferroni panels beside the multilevel one.
    #[arg(long)]
    pub compare_classical: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectMethod {
    None,
    Bonferroni,
    BhFdr,
}

impl From<CorrectMethod> for Correction {
    fn from(m: CorrectMethod) -> Self {
        match m {
            CorrectMethod::None => Correction::None,
            CorrectMethod::Bonferroni => Correction::Bonferroni,
            CorrectMethod::BhFdr => Correction::BhFdr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFamily {
    /// One test per group of `θ_j = 0`.
    Groups,
    /// One test per pair of `θ_j = θ_k`.
    Pairs,
}

#[derive(Debug, Clone, Args)]
pub struct CorrectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "bonferroni")]
    pub method: CorrectMethod,
    #[arg(long, value_enum, default_value = "groups")]
    pub tests: TestFamily,
    /// Require interval output (an error under bh-fdr).
    #[arg(long)]
    pub intervals: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompareMethod {
    None,
    Bonferroni,
    BhFdr,
    Bayes,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "bayes")]
    pub method: CompareMethod,
    /// Posterior probability required for a Bayesian claim.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Error level for the classical methods.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_DRAWS)]
    pub draws: usize,
    #[arg(long, env = "POOLCOMP_SEED", default_value_t = sim::DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    #[value(name = "paper-tau5")]
    PaperTau5,
    #[value(name = "paper-tau10")]
    PaperTau10,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalysisArg {
    Classical,
    Bayes,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// JSON file holding a full simulation config.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub tau_true: Option<f64>,
    #[arg(long)]
    pub mu_true: Option<f64>,
    /// Comma-separated standard errors, one per group.
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub analysis: Option<AnalysisArg>,
    /// Correction used by the classical arm.
    #[arg(long, value_enum)]
    pub method: Option<CorrectMethod>,
    /// Posterior draws per replication for the Bayesian arm.
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long, env = "POOLCOMP_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ShrinkageArgs {
    #[arg(long, default_value_t = 1.0)]
    pub sigma_y: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Result of a subcommand: its manifest plus anything to echo on stdout.
pub struct Outcome {
    pub manifest: RunManifest,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let manifest = match cli.command {
        Command::Fit(a) => cmd_fit(&a)?,
        Command::Correct(a) => cmd_correct(&a)?,
        Command::Compare(a) => cmd_compare(&a)?,
        Command::Simulate(a) => cmd_simulate(&a)?,
        Command::Shrinkage(a) => cmd_shrinkage(&a)?,
    };
    Ok(Outcome { manifest })
}

struct OutDir<'a> {
    dir: &'a Path,
    manifest: RunManifest,
}

impl<'a> OutDir<'a> {
    fn new(dir: &'a Path, subcommand: &str) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(OutDir {
            dir,
            manifest: RunManifest::new(subcommand),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn finish(mut self) -> Result<RunManifest> {
        self.manifest.outputs.push(MANIFEST_FILE.to_string());
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        write_atomic(&self.dir.join(MANIFEST_FILE), text.as_bytes())?;
        Ok(self.manifest)
    }
}

fn input_args(a: &InputArgs) -> Vec<String> {
    let mut v = Vec::new();
    if let Some(f) = a.fixture {
        v.push("--fixture".into());
        v.push(f.to_possible_value().expect("value").get_name().to_string());
    }
    if let Some(p) = &a.input {
        v.push("--input".into());
        v.push(p.display().to_string());
        v.push("--format".into());
        v.push(
            a.format
                .to_possible_value()
                .expect("value")
                .get_name()
                .to_string(),
        );
    }
    v
}

fn grid_args(g: &GridArgs) -> Vec<String> {
    let mut v = vec!["--grid-points".into(), g.grid_points.to_string()];
    if let Some(t) = g.tau_max {
        v.push("--tau-max".into());
        v.push(t.to_string());
    }
    v
}

fn load_dataset(a: &InputArgs, manifest: &mut RunManifest) -> Result<StudyDataset> {
    match (&a.input, a.fixture) {
        (_, Some(Fixture::EightSchools)) => Ok(fixtures::eight_schools()),
        (_, Some(Fixture::States)) => Ok(fixtures::synthetic_states().0),
        (Some(path), None) => {
            manifest.add_input(path)?;
            match a.format {
                InputFormat::Summary => data::load_summaries(path),
                InputFormat::Units => StudyDataset::from_units(&data::load_units(path)?),
                InputFormat::Pvalues => {
                    Err(Error::domain("p-value input is only accepted by `correct`"))
                }
            }
        }
        (None, None) => Err(Error::domain("either --input or --fixture is required")),
    }
}

fn check_draws(draws: usize, manifest: &mut RunManifest) {
    if draws < RECOMMENDED_DRAWS {
        manifest.warn(format!(
            "{draws} draws is below the recommended {RECOMMENDED_DRAWS}"
        ));
    }
}

fn fit_with_warnings(
    data: &StudyDataset,
    draws: usize,
    grid: &GridConfig,
    seed: u64,
    manifest: &mut RunManifest,
) -> Result<PosteriorDraws> {
    for w in data.warnings() {
        manifest.warn(w);
    }
    check_draws(draws, manifest);
    let fit = hier::fit_grid(data, draws, grid, seed)?;
    if fit.truncation_suspected() {
        manifest.warn(format!(
            "{:.1}% of the tau posterior lies in the top decile of [0, {}]; consider a larger --tau-max",
            100.0 * fit.tail_mass,
            fit.tau_max
        ));
    }
    Ok(fit)
}

#[derive(Serialize)]
struct FitSummaryFile<'a> {
    groups: &'a [hier::GroupPosterior],
    mu_median: f64,
    tau_median: f64,
    n_draws: usize,
    seed: u64,
    tau_max: f64,
    tau_top_decile_mass: f64,
    complete_pooling_estimate: f64,
}

pub fn cmd_fit(a: &FitArgs) -> Result<RunManifest> {
    let mut out = OutDir::new(&a.out_dir, "fit")?;
    let data = load_dataset(&a.input, &mut out.manifest)?;
    let grid = a.grid.config();
    let draws = fit_with_warnings(&data, a.draws, &grid, a.seed, &mut out.manifest)?;
    let summary = hier::summarize(&draws)?;
    let pooled = hier::pooled_mean(&data);

    let mut csv_buf = Vec::new();
    draws.write_csv(&mut csv_buf)?;
    out.write("posterior_draws.csv", &csv_buf)?;
    out.write_json(
        "posterior_summary.json",
        &FitSummaryFile {
            groups: &summary.groups,
            mu_median: summary.mu_median,
            tau_median: summary.tau_median,
            n_draws: summary.n_draws,
            seed: a.seed,
            tau_max: draws.tau_max,
            tau_top_decile_mass: draws.tail_mass,
            complete_pooling_estimate: pooled,
        },
    )?;

    let multilevel = IntervalPanel {
        title: "Multilevel model".into(),
        points: summary
            .groups
            .iter()
            .map(|g| IntervalPoint {
                label: g.group_id.clone(),
                center: g.mean,
                lower: g.lower,
                upper: g.upper,
            })
            .collect(),
        pooled: Some(pooled),
    };
    let mut panels = Vec::new();
    if a.compare_classical {
        for (method, title) in [
            (Correction::None, "Classical"),
            (Correction::Bonferroni, "Bonferroni"),
        ] {
            let set = classical::confidence_intervals(&data, a.alpha, method)?;
            panels.push(IntervalPanel {
                title: title.into(),
                points: set
                    .intervals
                    .iter()
                    .map(|i| IntervalPoint {
                        label: i.group_id.clone(),
                        center: i.center,
                        lower: i.lower,
                        upper: i.upper,
                    })
                    .collect(),
                pooled: Some(pooled),
            });
        }
    }
    panels.push(multilevel);
    out.write(
        "intervals.svg",
        svg::interval_figure("Group effects with 95% intervals", "effect", &panels).as_bytes(),
    )?;

    let mut args = vec!["fit".to_string()];
    args.extend(input_args(&a.input));
    args.extend([
        "--draws".into(),
        a.draws.to_string(),
        "--seed".into(),
        a.seed.to_string(),
    ]);
    args.extend(grid_args(&a.grid));
    args.extend(["--alpha".into(), a.alpha.to_string()]);
    if a.compare_classical {
        args.push("--compare-classical".into());
    }
    out.manifest.args = args;
    out.manifest.seed = Some(a.seed);
    out.manifest.config = json!({
        "draws": a.draws,
        "grid_points": grid.n_points,
        "tau_max": draws.tau_max,
        "alpha": a.alpha,
        "compare_classical": a.compare_classical,
    });
    out.finish()
}

fn read_p_values(path: &Path) -> Result<Vec<(String, f64)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let source = path.display().to_string();
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header != ["label", "p_value"] {
        return Err(Error::Row {
            source_name: source,
            row: 1,
            message: format!("header must be `label,p_value`, got `{}`", header.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let p: f64 = rec[1].trim().parse().map_err(|_| Error::Row {
            source_name: source.clone(),
            row: i + 2,
            message: format!("p_value is not a number: {:?}", &rec[1]),
        })?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Row {
                source_name: source.clone(),
                row: i + 2,
                message: format!("p_value {p} outside [0, 1]"),
            });
        }
        out.push((rec[0].trim().to_string(), p));
    }
    if out.is_empty() {
        return Err(Error::domain(format!("{source}: no p-values")));
    }
    Ok(out)
}

#[derive(Serialize)]
struct IntervalJson {
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
struct CorrectedTest {
    label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    z: Option<f64>,
    p_value: f64,
    threshold: f64,
    rejected: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    interval: Option<IntervalJson>,
}

#[derive(Serialize)]
struct CorrectionsFile {
    method: Correction,
    level: f64,
    m: usize,
    n_rejected: usize,
    interval_multiplier: Option<f64>,
    tests: Vec<CorrectedTest>,
}

pub fn cmd_correct(a: &CorrectArgs) -> Result<RunManifest> {
    let method: Correction = a.method.into();
    if a.intervals && method == Correction::BhFdr {
        return Err(Error::domain(
            "no FDR intervals: bh-fdr produces rejection sets only; drop --intervals",
        ));
    }
    let mut out = OutDir::new(&a.out_dir, "correct")?;

    // (label, test) pairs; p-value input has no estimates
    let tests: Vec<(String, Option<TestResult>, f64)> = match (a.input.format, &a.input.input) {
        (InputFormat::Pvalues, Some(path)) if a.input.fixture.is_none() => {
            out.manifest.add_input(path)?;
            read_p_values(path)?
                .into_iter()
                .map(|(l, p)| (l, None, p))
                .collect()
        }
        _ => {
            let data = load_dataset(&a.input, &mut out.manifest)?;
            let tests = match a.tests {
                TestFamily::Groups => classical::group_z_tests(&data)?,
                TestFamily::Pairs => classical::pairwise_z_tests(&data)?
                    .into_iter()
                    .map(|p| p.test)
                    .collect(),
            };
            tests
                .into_iter()
                .map(|t| (t.label.clone(), Some(t.clone()), t.p_value))
                .collect()
        }
    };
    if a.intervals && tests.iter().any(|t| t.1.is_none()) {
        return Err(Error::domain(
            "intervals need estimates; p-value input has none",
        ));
    }

    let p: Vec<f64> = tests.iter().map(|t| t.2).collect();
    let outcome = classical::apply(method, &p, a.alpha)?;
    let entries: Vec<CorrectedTest> = tests
        .iter()
        .enumerate()
        .map(|(i, (label, t, p))| CorrectedTest {
            label: label.clone(),
            estimate: t.as_ref().map(|t| t.estimate),
            std_error: t.as_ref().map(|t| t.std_error),
            z: t.as_ref().map(|t| t.z),
            p_value: *p,
            threshold: outcome.per_test_threshold[i],
            rejected: outcome.rejected[i],
            interval: match (t, outcome.interval_multiplier) {
                (Some(t), Some(mult)) => Some(IntervalJson {
                    lower: t.estimate - mult * t.std_error,
                    upper: t.estimate + mult * t.std_error,
                }),
                _ => None,
            },
        })
        .collect();

    let figure = match outcome.interval_multiplier {
        Some(mult) if tests.iter().all(|t| t.1.is_some()) => {
            let points = tests
                .iter()
                .map(|(label, t, _)| {
                    let t = t.as_ref().expect("checked above");
                    IntervalPoint {
                        label: label.clone(),
                        center: t.estimate,
                        lower: t.estimate - mult * t.std_error,
                        upper: t.estimate + mult * t.std_error,
                    }
                })
                .collect();
            let title = match method {
                Correction::Bonferroni => "Bonferroni-adjusted intervals",
                _ => "Unadjusted intervals",
            };
            let panel = IntervalPanel {
                title: title.into(),
                points,
                pooled: None,
            };
            Some(svg::interval_figure(
                &format!("{} {:.0}% intervals", title, 100.0 * (1.0 - a.alpha)),
                "estimate",
                &[panel],
            ))
        }
        _ => None,
    };
    out.write_json(
        "corrections.json",
        &CorrectionsFile {
            method,
            level: a.alpha,
            m: p.len(),
            n_rejected: outcome.n_rejected(),
            interval_multiplier: outcome.interval_multiplier,
            tests: entries,
        },
    )?;
    if let Some(figure) = figure {
        out.write("intervals.svg", figure.as_bytes())?;
    }

    let mut args = vec!["correct".to_string()];
    args.extend(input_args(&a.input));
    args.extend([
        "--alpha".into(),
        a.alpha.to_string(),
        "--method".into(),
        a.method
            .to_possible_value()
            .expect("value")
            .get_name()
            .to_string(),
        "--tests".into(),
        a.tests
            .to_possible_value()
            .expect("value")
            .get_name()
            .to_string(),
    ]);
    if a.intervals {
        args.push("--intervals".into());
    }
    out.manifest.args = args;
    out.manifest.config = json!({
        "alpha": a.alpha,
        "method": method,
        "tests": a.tests,
    });
    out.finish()
}

/// Permutation listing groups by increasing raw estimate (stable for ties).
fn order_by_estimate(data: &StudyDataset) -> Vec<usize> {
    let est = data.estimates();
    let mut order: Vec<usize> = (0..est.len()).collect();
    order.sort_by(|&i, &j| est[i].total_cmp(&est[j]));
    order
}

pub fn cmd_compare(a: &CompareArgs) -> Result<RunManifest> {
    let mut out = OutDir::new(&a.out_dir, "compare")?;
    let data = load_dataset(&a.input, &mut out.manifest)?;
    let matrix: ComparisonMatrix = match a.method {
        CompareMethod::Bayes => {
            if !(a.level > 0.0 && a.level < 1.0) {
                return Err(Error::domain(format!(
                    "level must lie in (0, 1), got {}",
                    a.level
                )));
            }
            let fit =
                fit_with_warnings(&data, a.draws, &a.grid.config(), a.seed, &mut out.manifest)?;
            compare::bayes_pairwise(&fit, a.level)?
        }
        CompareMethod::None => compare::classical_pairwise(&data, a.alpha, Correction::None)?,
        CompareMethod::Bonferroni => {
            compare::classical_pairwise(&data, a.alpha, Correction::Bonferroni)?
        }
        CompareMethod::BhFdr => compare::classical_pairwise(&data, a.alpha, Correction::BhFdr)?,
    };

    let mut buf = Vec::new();
    matrix.write_claims_csv(&mut buf)?;
    out.write("matrix.csv", &buf)?;
    let mut buf = Vec::new();
    matrix.write_evidence_csv(&mut buf)?;
    out.write("evidence.csv", &buf)?;
    let sorted = matrix.reordered(&order_by_estimate(&data))?;
    out.write(
        "matrix.svg",
        svg::matrix_figure(
            &format!(
                "Pairwise comparisons ({} of {} pairs directional)",
                matrix.n_directional(),
                matrix.n_pairs()
            ),
            &sorted,
        )
        .as_bytes(),
    )?;

    let method_name = a
        .method
        .to_possible_value()
        .expect("value")
        .get_name()
        .to_string();
    let mut args = vec!["compare".to_string()];
    args.extend(input_args(&a.input));
    args.extend(["--method".into(), method_name.clone()]);
    let config = if a.method == CompareMethod::Bayes {
        args.extend([
            "--level".into(),
            a.level.to_string(),
            "--draws".into(),
            a.draws.to_string(),
            "--seed".into(),
            a.seed.to_string(),
        ]);
        args.extend(grid_args(&a.grid));
        out.manifest.seed = Some(a.seed);
        json!({
            "method": method_name,
            "level": a.level,
            "draws": a.draws,
            "grid_points": a.grid.grid_points,
            "tau_max": a.grid.config().resolve_tau_max(&data),
        })
    } else {
        args.extend(["--alpha".into(), a.alpha.to_string()]);
        json!({ "method": method_name, "alpha": a.alpha })
    };
    out.manifest.args = args;
    out.manifest.config = config;
    out.finish()
}

/// Builds the simulation config: preset or config file first, then flags.
pub fn resolve_sim_config(a: &SimulateArgs) -> Result<SimConfig> {
    let mut c = if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str::<SimConfig>(&text)
            .map_err(|e| Error::domain(format!("{}: {e}", path.display())))?
    } else {
        match a.preset {
            Some(Preset::PaperTau10) => SimConfig::preset("paper-tau10")?,
            _ => SimConfig::preset("paper-tau5")?,
        }
    };
    if let Some(v) = a.tau_true {
        c.tau_true = v;
    }
    if let Some(v) = a.mu_true {
        c.mu_true = v;
    }
    if let Some(v) = &a.sigmas {
        c.sigma_list = v.clone();
    }
    if let Some(v) = a.reps {
        c.n_reps = v;
    }
    if let Some(v) = a.alpha {
        c.alpha = v;
    }
    if let Some(v) = a.analysis {
        c.analysis = match v {
            AnalysisArg::Classical => Analysis::Classical,
            AnalysisArg::Bayes => Analysis::Bayes,
            AnalysisArg::Both => Analysis::Both,
        };
    }
    if let Some(v) = a.method {
        c.classical_correction = v.into();
    }
    if let Some(v) = a.draws {
        c.bayes_draws = v;
    }
    if let Some(v) = a.seed {
        c.seed = v;
    }
    if let Some(v) = a.grid_points {
        c.grid.n_points = v;
    }
    if a.tau_max.is_some() {
        c.grid.tau_max = a.tau_max;
    }
    c.validate()?;
    Ok(c)
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<RunManifest> {
    let config = resolve_sim_config(a)?;
    let mut out = OutDir::new(&a.out_dir, "simulate")?;
    if let Some(path) = &a.config {
        out.manifest.add_input(path)?;
    }
    if config.analysis != Analysis::Classical && config.bayes_draws < RECOMMENDED_DRAWS {
        check_draws(config.bayes_draws, &mut out.manifest);
    }
    let report = sim::run_study(&config)?;
    out.write_json("sim_report.json", &report)?;

    let analysis = match config.analysis {
        Analysis::Classical => "classical",
        Analysis::Bayes => "bayes",
        Analysis::Both => "both",
    };
    let sigmas = config
        .sigma_list
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",");
    let mut args = vec![
        "simulate".to_string(),
        "--tau-true".into(),
        config.tau_true.to_string(),
        "--mu-true".into(),
        config.mu_true.to_string(),
        "--sigmas".into(),
        sigmas,
        "--reps".into(),
        config.n_reps.to_string(),
        "--alpha".into(),
        config.alpha.to_string(),
        "--analysis".into(),
        analysis.into(),
        "--method".into(),
        config.classical_correction.to_string(),
        "--draws".into(),
        config.bayes_draws.to_string(),
        "--seed".into(),
        config.seed.to_string(),
        "--grid-points".into(),
        config.grid.n_points.to_string(),
    ];
    if let Some(t) = config.grid.tau_max {
        args.extend(["--tau-max".into(), t.to_string()]);
    }
    out.manifest.args = args;
    out.manifest.seed = Some(config.seed);
    out.manifest.config = serde_json::to_value(&config)?;
    out.finish()
}

/// Points per decade on the shrinkage grid.
pub const SHRINKAGE_PER_DECADE: i32 = 20;
/// Decades on each side of ratio 1.
pub const SHRINKAGE_DECADES: i32 = 3;

/// Variance ratios `τ²/σ²` at `10^(i/20)` for `i = −60..=60`.
pub fn shrinkage_grid() -> Vec<f64> {
    let half = SHRINKAGE_PER_DECADE * SHRINKAGE_DECADES;
    (-half..=half)
        .map(|i| 10f64.powf(i as f64 / SHRINKAGE_PER_DECADE as f64))
        .collect()
}

pub fn cmd_shrinkage(a: &ShrinkageArgs) -> Result<RunManifest> {
    if !(a.sigma_y > 0.0 && a.sigma_y.is_finite()) {
        return Err(Error::domain(format!(
            "sigma-y must be positive, got {}",
            a.sigma_y
        )));
    }
    let mut out = OutDir::new(&a.out_dir, "shrinkage")?;
    let ratios = shrinkage_grid();
    let mut factors = Vec::with_capacity(ratios.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["variance_ratio", "tau", "factor"])?;
    for r in &ratios {
        let tau = a.sigma_y * r.sqrt();
        let f = hier::zscore_correction(a.sigma_y, tau)?;
        factors.push(f);
        w.write_record([r.to_string(), tau.to_string(), f.to_string()])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Numerical(format!("csv buffer: {e}")))?;
    out.write("shrinkage.csv", &bytes)?;
    out.write(
        "shrinkage.svg",
        svg::log_curve_figure(
            "Shrinkage of the z-score for a comparison",
            "group-level variance / data variance",
            "z-score multiplier",
            &ratios,
            &factors,
        )
        .as_bytes(),
    )?;
    out.manifest.args = vec![
        "shrinkage".into(),
        "--sigma-y".into(),
        a.sigma_y.to_string(),
    ];
    out.manifest.config = json!({
        "sigma_y": a.sigma_y,
        "points_per_decade": SHRINKAGE_PER_DECADE,
        "decades_each_side": SHRINKAGE_DECADES,
    });
    out.finish()
}
