//! Command-line front end for the homicide-clearance pipeline.
//!
//! Every command writes its artifacts under `--out` (and nowhere else) plus a
//! `manifest.json` recording the seeds, versions, inputs and outputs needed
//! to replay the run byte-identically.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use clearance_core::dataset::{
    self, filter_unknown_age, load_map_csv, partition_by_state, shuffled_split, Dataset,
};
use clearance_core::eval::{balanced_accuracy, confusion, grid_search, precision, state_sweep};
use clearance_core::features::{encode, fit_schema, FeatureOptions, FeatureSchema};
use clearance_core::models::{self, grids, Hyperparameters, Penalty, SplitCriterion};
use clearance_core::shap::{
    local_report, mean_abs_shap, tree_shap, BackgroundSet, ShapExplanation, TreeShapMode,
};
use clearance_core::{linkage, report, synth};

const DEFAULT_SEED: u64 = 42;
const DEFAULT_K: usize = 5;
const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

#[derive(Parser)]
#[command(
    name = "clearance",
    version,
    about = "Predict and explain homicide clearance from MAP-schema victim records"
)]
struct Cli {
    /// JSON config file; explicit flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: hardware concurrency).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Algo {
    Dt,
    Rf,
    Gbm,
    Xgboost,
    Ridge,
    Lasso,
    Elasticnet,
}

impl Algo {
    fn name(&self) -> &'static str {
        match self {
            Algo::Dt => "dt",
            Algo::Rf => "rf",
            Algo::Gbm => "gbm",
            Algo::Xgboost => "xgboost",
            Algo::Ridge => "ridge",
            Algo::Lasso => "lasso",
            Algo::Elasticnet => "elasticnet",
        }
    }

    /// Reference configuration of the family, used by `train` defaults.
    fn default_config(&self, seed: u64) -> Hyperparameters {
        match self {
            Algo::Dt => Hyperparameters::decision_tree(SplitCriterion::Gini, 20),
            Algo::Rf => Hyperparameters::random_forest(SplitCriterion::Gini, 50, 200, seed),
            Algo::Gbm => Hyperparameters::gbm(200, 0.5, seed),
            Algo::Xgboost => grids::best_national_xgboost(seed),
            Algo::Ridge => Hyperparameters::logistic(Penalty::L2, 50.0, 0.0),
            Algo::Lasso => Hyperparameters::logistic(Penalty::L1, 50.0, 1.0),
            Algo::Elasticnet => Hyperparameters::logistic(Penalty::ElasticNet, 50.0, 0.5),
        }
    }

    fn default_grid(&self, seed: u64) -> Vec<Hyperparameters> {
        match self {
            Algo::Dt => grids::decision_tree(),
            Algo::Rf => grids::random_forest(seed),
            Algo::Gbm => grids::gbm(seed),
            Algo::Xgboost => grids::xgboost_national(seed),
            Algo::Ridge => grids::ridge(),
            Algo::Lasso => grids::lasso(),
            Algo::Elasticnet => grids::elastic_net(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ExplainMode {
    /// Tree-conditional expectations from node covers.
    Cover,
    /// Interventional expectations against training background rows.
    Background,
}

/// Flags shared by the model-fitting commands.
#[derive(Args, Clone, Debug, Default)]
struct CommonRun {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Drop the decade one-hot group (used for linked-subsample re-fits).
    #[arg(long)]
    no_decade: bool,
    /// Comma-separated ascending age-span upper edges.
    #[arg(long, value_delimiter = ',')]
    age_bin_edges: Option<Vec<i32>>,
}

/// Hyperparameter overrides for `train`.
#[derive(Args, Clone, Debug, Default)]
struct HyperOverrides {
    #[arg(long)]
    n_estimators: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    criterion: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    l1_ratio: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a MAP-schema CSV and report ingestion statistics.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic MAP-schema fixture (optionally with a paired
    /// second-source file for linkage).
    SynthFixture {
        /// Victim records to generate (must be positive).
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Number of distinct states to draw from.
        #[arg(long)]
        states: Option<usize>,
        /// Also emit wp_fixture.csv mirroring part of the data.
        #[arg(long)]
        wp: bool,
    },
    /// Split, fit one configuration, and score the held-out test set.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Algo::Xgboost)]
        algo: Algo,
        #[command(flatten)]
        common: CommonRun,
        #[command(flatten)]
        hyper: HyperOverrides,
    },
    /// Cross-validated grid search on the training split; refits the winner
    /// and scores the test split.
    Gridsearch {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Algo::Xgboost)]
        algo: Algo,
        #[command(flatten)]
        common: CommonRun,
    },
    /// Per-state grid search, refit, and test scoring.
    SweepStates {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonRun,
    },
    /// Attribute test-set predictions to features.
    Explain {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fitted model JSON; when absent a boosted model is trained first.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Frozen schema JSON accompanying --model.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ExplainMode::Cover)]
        mode: ExplainMode,
        /// Background rows for interventional mode.
        #[arg(long, default_value_t = 100)]
        background_size: usize,
        /// Explain at most this many test rows (seeded sample; default all).
        #[arg(long)]
        sample: Option<usize>,
        /// Features listed per local report.
        #[arg(long, default_value_t = 20)]
        top_k: usize,
        /// Local reports to write for the first rows of the explained set.
        #[arg(long, default_value_t = 2)]
        locals: usize,
        /// Also render the global summary as an SVG bar chart.
        #[arg(long)]
        svg: bool,
        #[command(flatten)]
        common: CommonRun,
    },
    /// Link MAP records with a second homicide dataset and account for
    /// outcome agreement.
    Match {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        wp: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON object mapping disposition strings to solved booleans.
        #[arg(long)]
        dispositions: Option<PathBuf>,
        /// Also emit MAP-schema CSVs for the robustness re-fits.
        #[arg(long)]
        emit_overridden: bool,
    },
    /// Yearly and per-state solved/unsolved tables.
    Summarize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Optional JSON configuration; flags win over file values.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    k: Option<usize>,
    train_fraction: Option<f64>,
    age_bin_edges: Option<Vec<i32>>,
    include_decade: Option<bool>,
    threads: Option<usize>,
    /// Full grid override for `gridsearch`.
    grid: Option<Vec<Hyperparameters>>,
}

struct Resolved {
    seed: u64,
    k: usize,
    train_fraction: f64,
    options: FeatureOptions,
    grid_override: Option<Vec<Hyperparameters>>,
}

fn resolve(common: &CommonRun, file: &FileConfig) -> Resolved {
    let mut options = FeatureOptions::default();
    if let Some(edges) = common
        .age_bin_edges
        .clone()
        .or_else(|| file.age_bin_edges.clone())
    {
        options.age_bin_edges = edges;
    }
    options.include_decade = if common.no_decade {
        false
    } else {
        file.include_decade.unwrap_or(true)
    };
    Resolved {
        seed: common.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        k: common.k.or(file.k).unwrap_or(DEFAULT_K),
        train_fraction: common
            .train_fraction
            .or(file.train_fraction)
            .unwrap_or(DEFAULT_TRAIN_FRACTION),
        options,
        grid_override: file.grid.clone(),
    }
}

/// All artifact paths go through here so nothing lands outside `--out`.
struct OutDir {
    dir: PathBuf,
    outputs: Vec<String>,
}

impl OutDir {
    fn create(dir: &Path) -> Result<OutDir> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    fn file(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }
}

#[derive(Serialize)]
struct InputRef {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    version: String,
    seed: u64,
    k: usize,
    train_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    algorithm: Option<String>,
    feature_options: FeatureOptions,
    inputs: BTreeMap<String, InputRef>,
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<usize>,
}

impl Manifest {
    fn new(command: &str, resolved: &Resolved) -> Manifest {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: resolved.seed,
            k: resolved.k,
            train_fraction: resolved.train_fraction,
            algorithm: None,
            feature_options: resolved.options.clone(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            threads: None,
        }
    }

    fn input(&mut self, name: &str, path: &Path) -> Result<()> {
        self.inputs.insert(
            name.to_string(),
            InputRef {
                path: path.display().to_string(),
                sha256: sha256_file(path)?,
            },
        );
        Ok(())
    }

    fn write(mut self, out: &mut OutDir) -> Result<()> {
        let path = out.dir.join("manifest.json");
        self.outputs = out.outputs.clone();
        self.outputs.push("manifest.json".to_string());
        report::write_json(path, &self)?;
        Ok(())
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Load, drop unknown ages, and stamp the monthly-overlap flag; the order
/// every model-facing command uses.
fn load_analysis_dataset(input: &Path) -> Result<Dataset> {
    let raw = load_map_csv(input)?;
    if raw.is_empty() {
        bail!("{} contains no usable rows", input.display());
    }
    Ok(filter_unknown_age(&raw).with_monthly_overlap())
}

#[derive(Serialize)]
struct TestScore {
    confusion: clearance_core::ConfusionMatrix,
    balanced_accuracy: f64,
    precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    precision_error: Option<String>,
}

fn score_test(model: &models::Model, test: &clearance_core::FeatureMatrix) -> Result<TestScore> {
    let predictions = model.predict_labels(test)?;
    let c = confusion(&predictions, &test.labels)?;
    let ba = balanced_accuracy(&c)?;
    let (p, perr) = match precision(&c) {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(TestScore {
        confusion: c,
        balanced_accuracy: ba,
        precision: p,
        precision_error: perr,
    })
}

fn apply_overrides(mut h: Hyperparameters, o: &HyperOverrides) -> Result<Hyperparameters> {
    if let Some(n) = o.n_estimators {
        h.n_estimators = n;
    }
    if let Some(lr) = o.learning_rate {
        h.learning_rate = lr;
    }
    if let Some(d) = o.max_depth {
        h.max_depth = d;
    }
    if let Some(c) = &o.criterion {
        h.criterion = match c.to_lowercase().as_str() {
            "gini" => SplitCriterion::Gini,
            "entropy" => SplitCriterion::Entropy,
            other => bail!("unknown criterion {other:?} (expected gini or entropy)"),
        };
    }
    if let Some(g) = o.gamma {
        h.gamma = g;
    }
    if let Some(c) = o.c {
        h.c = c;
    }
    if let Some(r) = o.l1_ratio {
        h.l1_ratio = r;
    }
    Ok(h)
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let file_config: FileConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("invalid config {}", path.display()))?
        }
        None => FileConfig::default(),
    };
    let threads = cli.threads.or(file_config.threads);
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool already initialized")?;
    }

    match cli.command {
        Command::Ingest { input, out } => cmd_ingest(&input, &out, &file_config, threads),
        Command::SynthFixture {
            rows,
            seed,
            out,
            states,
            wp,
        } => cmd_synth(rows, seed, &out, states, wp, &file_config, threads),
        Command::Train {
            input,
            out,
            algo,
            common,
            hyper,
        } => cmd_train(&input, &out, algo, &common, &hyper, &file_config, threads),
        Command::Gridsearch {
            input,
            out,
            algo,
            common,
        } => cmd_gridsearch(&input, &out, algo, &common, &file_config, threads),
        Command::SweepStates { input, out, common } => {
            cmd_sweep(&input, &out, &common, &file_config, threads)
        }
        Command::Explain {
            input,
            out,
            model,
            schema,
            mode,
            background_size,
            sample,
            top_k,
            locals,
            svg,
            common,
        } => cmd_explain(
            &input,
            &out,
            model.as_deref(),
            schema.as_deref(),
            mode,
            background_size,
            sample,
            top_k,
            locals,
            svg,
            &common,
            &file_config,
            threads,
        ),
        Command::Match {
            map,
            wp,
            out,
            dispositions,
            emit_overridden,
        } => cmd_match(
            &map,
            &wp,
            &out,
            dispositions.as_deref(),
            emit_overridden,
            threads,
        ),
        Command::Summarize { input, out } => cmd_summarize(&input, &out, threads),
    }
}

fn cmd_ingest(
    input: &Path,
    out: &Path,
    file_config: &FileConfig,
    threads: Option<usize>,
) -> Result<()> {
    let resolved = resolve(&CommonRun::default(), file_config);
    let mut out = OutDir::create(out)?;
    let raw = load_map_csv(input)?;
    let filtered = filter_unknown_age(&raw);

    #[derive(Serialize)]
    struct IngestReport {
        provenance: clearance_core::dataset::Provenance,
        solved: usize,
        unsolved: usize,
        unsolved_share: f64,
        known_age_rows: usize,
        derived_target_disagreements: usize,
        states: usize,
    }
    let report_doc = IngestReport {
        solved: raw.solved_count(),
        unsolved: raw.unsolved_count(),
        unsolved_share: raw.unsolved_count() as f64 / raw.len().max(1) as f64,
        known_age_rows: filtered.len(),
        derived_target_disagreements: dataset::target_disagreements(&raw),
        states: partition_by_state(&raw).len(),
        provenance: raw.provenance.clone(),
    };
    report::write_json(out.file("ingest_report.json"), &report_doc)?;
    println!(
        "ingest: {} read, {} kept, {} dropped; {} known-age rows; {} unsolved ({:.2}%)",
        raw.provenance.rows_read,
        raw.provenance.rows_kept,
        raw.provenance.rows_dropped,
        filtered.len(),
        raw.unsolved_count(),
        100.0 * raw.unsolved_count() as f64 / raw.len().max(1) as f64
    );
    let mut manifest = Manifest::new("ingest", &resolved);
    manifest.input("map_csv", input)?;
    manifest.threads = threads;
    manifest.write(&mut out)
}

fn cmd_synth(
    rows: usize,
    seed: Option<u64>,
    out: &Path,
    states: Option<usize>,
    wp: bool,
    file_config: &FileConfig,
    threads: Option<usize>,
) -> Result<()> {
    if rows == 0 {
        bail!("--rows must be positive");
    }
    let resolved = resolve(
        &CommonRun {
            seed,
            ..Default::default()
        },
        file_config,
    );
    let mut out = OutDir::create(out)?;
    let cfg = synth::SynthConfig {
        rows,
        seed: resolved.seed,
        states: states.unwrap_or(51),
        ..Default::default()
    };
    let d = synth::generate(&cfg);
    let fixture = out.file("fixture.csv");
    synth::write_map_csv(&fixture, &d.records)?;
    println!(
        "synth-fixture: wrote {} rows ({} solved) to {}",
        d.len(),
        d.solved_count(),
        fixture.display()
    );
    if wp {
        let wp_records = synth::generate_wp(
            &d,
            &synth::WpSynthConfig {
                seed: resolved.seed,
                ..Default::default()
            },
        );
        let wp_path = out.file("wp_fixture.csv");
        synth::write_wp_csv(&wp_path, &wp_records)?;
        println!(
            "synth-fixture: wrote {} second-source rows",
            wp_records.len()
        );
    }
    let mut manifest = Manifest::new("synth-fixture", &resolved);
    manifest.threads = threads;
    manifest.write(&mut out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    input: &Path,
    out: &Path,
    algo: Algo,
    common: &CommonRun,
    hyper: &HyperOverrides,
    file_config: &FileConfig,
    threads: Option<usize>,
) -> Result<()> {
    let resolved = resolve(common, file_config);
    let mut out = OutDir::create(out)?;
    let d = load_analysis_dataset(input)?;
    let split = shuffled_split(&d, resolved.train_fraction, resolved.seed)?;
    let schema = fit_schema(&split.train, &resolved.options)?;
    let train = encode(&split.train, &schema)?;
    let test = encode(&split.test, &schema)?;
    let h = apply_overrides(algo.default_config(resolved.seed), hyper)?;
    let model = models::fit(&train, &h)?;
    let test_score = score_test(&model, &test)?;

    schema.to_json_file(out.file("schema.json"))?;
    model.to_json_file(out.file("model.json"))?;
    #[derive(Serialize)]
    struct TrainReport {
        algorithm: String,
        hyperparameters: Hyperparameters,
        train_rows: usize,
        test_rows: usize,
        n_features: usize,
        test: TestScore,
    }
    println!(
        "train[{}]: test balanced accuracy {:.4}, precision {}",
        h.describe(),
        test_score.balanced_accuracy,
        test_score
            .precision
            .map(|p| format!("{p:.4}"))
            .unwrap_or_else(|| "undefined".to_string())
    );
    report::write_json(
        out.file("metrics.json"),
        &TrainReport {
            algorithm: algo.name().to_string(),
            hyperparameters: h.clone(),
            train_rows: train.n_rows(),
            test_rows: test.n_rows(),
            n_features: train.n_cols(),
            test: test_score,
        },
    )?;
    let mut manifest = Manifest::new("train", &resolved);
    manifest.algorithm = Some(algo.name().to_string());
    manifest.input("map_csv", input)?;
    manifest.threads = threads;
    manifest.write(&mut out)
}

fn cmd_gridsearch(
    input: &Path,
    out: &Path,
    algo: Algo,
    common: &CommonRun,
    file_config: &FileConfig,
    threads: Option<usize>,
) -> Result<()> {
    let resolved = resolve(common, file_config);
    let mut out = OutDir::create(out)?;
    let d = load_analysis_dataset(input)?;
    let split = shuffled_split(&d, resolved.train_fraction, resolved.seed)?;
    let schema = fit_schema(&split.train, &resolved.options)?;
    let train = encode(&split.train, &schema)?;
    let test = encode(&split.test, &schema)?;
    let grid = resolved
        .grid_override
        .clone()
        .unwrap_or_else(|| algo.default_grid(resolved.seed));
    let result = grid_search(&train, &grid, resolved.k, resolved.seed)?;
    let winner = result.winner_entry();
    let best = winner.hyperparameters.clone();
    let model = models::fit(&train, &best)?;
    let test_score = score_test(&model, &test)?;

    report::write_grid_csv(out.file("grid_results.csv"), &result)?;
    schema.to_json_file(out.file("schema.json"))?;
    model.to_json_file(out.file("model.json"))?;

    #[derive(Serialize)]
    struct ConfigSummary {
        index: usize,
        config: String,
        combined_score: Option<f64>,
        cv_balanced_accuracy: Option<f64>,
        cv_sd_balanced_accuracy: Option<f64>,
        cv_precision: Option<f64>,
        cv_sd_precision: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    }
    #[derive(Serialize)]
    struct GridSummary {
        algorithm: String,
        n_configurations: usize,
        k: usize,
        seed: u64,
        winner_index: usize,
        winner: Hyperparameters,
        winner_cv_balanced_accuracy: f64,
        winner_cv_sd_balanced_accuracy: f64,
        winner_cv_precision: Option<f64>,
        winner_cv_sd_precision: Option<f64>,
        winner_combined_score: Option<f64>,
        test: TestScore,
        configurations: Vec<ConfigSummary>,
    }
    let configurations: Vec<ConfigSummary> = result
        .entries
        .iter()
        .enumerate()
        .map(|(index, e)| ConfigSummary {
            index,
            config: e.hyperparameters.describe(),
            combined_score: e.combined_score,
            cv_balanced_accuracy: e.cv.as_ref().map(|cv| cv.mean_balanced_accuracy()),
            cv_sd_balanced_accuracy: e.cv.as_ref().map(|cv| cv.sd_balanced_accuracy()),
            cv_precision: e.cv.as_ref().and_then(|cv| cv.mean_precision().ok()),
            cv_sd_precision: e.cv.as_ref().and_then(|cv| cv.sd_precision().ok()),
            error: e.error.clone(),
        })
        .collect();
    let winner_cv = winner.cv.as_ref().unwrap();
    let summary = GridSummary {
        algorithm: algo.name().to_string(),
        n_configurations: result.entries.len(),
        k: resolved.k,
        seed: resolved.seed,
        winner_index: result.winner,
        winner: best.clone(),
        winner_cv_balanced_accuracy: winner_cv.mean_balanced_accuracy(),
        winner_cv_sd_balanced_accuracy: winner_cv.sd_balanced_accuracy(),
        winner_cv_precision: winner_cv.mean_precision().ok(),
        winner_cv_sd_precision: winner_cv.sd_precision().ok(),
        winner_combined_score: winner.combined_score,
        test: test_score,
        configurations,
    };
    report::write_json(out.file("grid_summary.json"), &summary)?;
    println!(
        "gridsearch[{}]: {} configurations; winner {} (cv balanced accuracy {:.4}); test balanced accuracy {:.4}",
        algo.name(),
        result.entries.len(),
        best.describe(),
        summary.winner_cv_balanced_accuracy,
        summary.test.balanced_accuracy,
    );
    let mut manifest = Manifest::new("gridsearch", &resolved);
    manifest.algorithm = Some(algo.name().to_string());
    manifest.input("map_csv", input)?;
    manifest.threads = threads;
    manifest.write(&mut out)
}

fn cmd_sweep(
    input: &Path,
    out: &Path,
    common: &CommonRun,
    file_config: &FileConfig,
    threads: Option<usize>,
) -> Result<()> {
    let resolved = resolve(common, file_config);
    let mut out = OutDir::create(out)?;
    let d = load_analysis_dataset(input)?;
    let partitions = partition_by_state(&d);
    let grid = resolved
        .grid_override
        .clone()
        .unwrap_or_else(|| grids::xgboost_state(resolved.seed));
    let sweep = state_sweep(
        &partitions,
        &grid,
        resolved.k,
        resolved.seed,
        resolved.train_fraction,
        &resolved.options,
    )?;
    report::write_sweep_csv(out.file("sweep_results.csv"), &sweep)?;

    #[derive(Serialize)]
    struct SweepSummary {
        n_states: usize,
        n_completed: usize,
        grid_size: usize,
        total_fitted_configs: usize,
        metric_correlation: Option<f64>,
        mean_test_balanced_accuracy: Option<f64>,
        mean_test_precision: Option<f64>,
        skipped: Vec<String>,
    }
    let completed: Vec<&clearance_core::eval::StateOutcome> = sweep
        .states
        .iter()
        .filter(|s| s.skipped.is_none())
        .collect();
    let mean_of = |xs: Vec<f64>| {
        if xs.is_empty() {
            None
        } else {
            Some(xs.iter().sum::<f64>() / xs.len() as f64)
        }
    };
    let summary = SweepSummary {
        n_states: sweep.states.len(),
        n_completed: completed.len(),
        grid_size: grid.len(),
        total_fitted_configs: sweep.total_fitted_configs,
        metric_correlation: sweep.metric_correlation(),
        mean_test_balanced_accuracy: mean_of(
            completed
                .iter()
                .filter_map(|s| s.test_balanced_accuracy)
                .collect(),
        ),
        mean_test_precision: mean_of(completed.iter().filter_map(|s| s.test_precision).collect()),
        skipped: sweep
            .states
            .iter()
            .filter_map(|s| s.skipped.as_ref().map(|r| format!("{}: {r}", s.state)))
            .collect(),
    };
    report::write_json(out.file("sweep_summary.json"), &summary)?;
    println!(
        "sweep-states: {} states, {} grid fits total, metric correlation {}",
        sweep.states.len(),
        sweep.total_fitted_configs,
        summary
            .metric_correlation
            .map(|c| format!("{c:.3}"))
            .unwrap_or_else(|| "n/a".to_string())
    );
    let mut manifest = Manifest::new("sweep-states", &resolved);
    manifest.input("map_csv", input)?;
    manifest.threads = threads;
    manifest.write(&mut out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_explain(
    input: &Path,
    out: &Path,
    model_path: Option<&Path>,
    schema_path: Option<&Path>,
    mode: ExplainMode,
    background_size: usize,
    sample: Option<usize>,
    top_k: usize,
    locals: usize,
    svg: bool,
    common: &CommonRun,
    file_config: &FileConfig,
    threads: Option<usize>,
) -> Result<()> {
    let resolved = resolve(common, file_config);
    let mut out = OutDir::create(out)?;
    let d = load_analysis_dataset(input)?;
    let split = shuffled_split(&d, resolved.train_fraction, resolved.seed)?;
    let schema = match schema_path {
        Some(p) => FeatureSchema::from_json_file(p)?,
        None => fit_schema(&split.train, &resolved.options)?,
    };
    let train = encode(&split.train, &schema)?;
    let test = encode(&split.test, &schema)?;
    let model = match model_path {
        Some(p) => {
            let m = models::Model::from_json_file(p)?;
            if m.schema_digest != schema.digest() {
                bail!(
                    "model was fit under a different schema (digest mismatch); \
                     pass the matching --schema"
                );
            }
            m
        }
        None => models::fit(&train, &grids::best_national_xgboost(resolved.seed))?,
    };

    let rows: Vec<usize> = match sample {
        Some(n) if n < test.n_rows() => {
            let mut rng = clearance_core::rng::Rng::new(resolved.seed ^ 0x5a);
            rng.sample_indices(test.n_rows(), n)
        }
        _ => (0..test.n_rows()).collect(),
    };
    let background;
    let shap_mode = match mode {
        ExplainMode::Cover => TreeShapMode::Cover,
        ExplainMode::Background => {
            background = BackgroundSet::from_matrix(&train, background_size, resolved.seed)?;
            TreeShapMode::Background(&background)
        }
    };
    let explanations: Vec<ShapExplanation> = rows
        .par_iter()
        .map(|&i| tree_shap(&model, test.row(i), shap_mode, &test.row_ids[i]))
        .collect::<Result<Vec<_>, _>>()?;

    let names = schema.column_names();
    let ranking = mean_abs_shap(&explanations, &names)?;
    report::write_shap_summary_csv(out.file("shap_summary.csv"), &ranking)?;
    report::write_explanations_csv(out.file("shap_points.csv"), &explanations, &names)?;
    for (i, e) in explanations.iter().take(locals).enumerate() {
        let r = local_report(e, &names, top_k);
        report::write_json(out.file(&format!("local_report_{i}.json")), &r)?;
    }
    if svg {
        report::write_shap_summary_svg(out.file("shap_summary.svg"), &ranking, 20)?;
    }
    println!(
        "explain: {} rows attributed; top features: {}",
        explanations.len(),
        ranking
            .iter()
            .take(4)
            .map(|r| format!("{} ({:.3})", r.feature, r.mean_abs_phi))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let mut manifest = Manifest::new("explain", &resolved);
    manifest.input("map_csv", input)?;
    if let Some(p) = model_path {
        manifest.input("model", p)?;
    }
    manifest.threads = threads;
    manifest.write(&mut out)
}

fn cmd_match(
    map_path: &Path,
    wp_path: &Path,
    out: &Path,
    dispositions: Option<&Path>,
    emit_overridden: bool,
    threads: Option<usize>,
) -> Result<()> {
    let resolved = resolve(&CommonRun::default(), &FileConfig::default());
    let mut out = OutDir::create(out)?;
    let map = load_map_csv(map_path)?;
    let table = match dispositions {
        Some(p) => linkage::DispositionMap::from_json_file(p)?,
        None => linkage::DispositionMap::default(),
    };
    let wp = linkage::load_wp_csv(wp_path, &table)?;
    let link = linkage::match_datasets(&map, &wp.records);

    report::write_pairs_csv(out.file("matched_pairs.csv"), &link, &map, &wp.records)?;
    #[derive(Serialize)]
    struct LinkSummary {
        matched: u64,
        agree: u64,
        agree_share: f64,
        wp_solved_map_unsolved: u64,
        wp_solved_map_unsolved_share: f64,
        map_solved_wp_unsolved: u64,
        ambiguous_keys: u64,
        unmatched_map: u64,
        unmatched_wp: u64,
        unkeyed_map: u64,
        unkeyed_wp: u64,
        wp_rows_dropped: u64,
    }
    let denom = link.matched.max(1) as f64;
    report::write_json(
        out.file("link_summary.json"),
        &LinkSummary {
            matched: link.matched,
            agree: link.agree,
            agree_share: link.agree as f64 / denom,
            wp_solved_map_unsolved: link.wp_solved_map_unsolved,
            wp_solved_map_unsolved_share: link.wp_solved_map_unsolved as f64 / denom,
            map_solved_wp_unsolved: link.map_solved_wp_unsolved,
            ambiguous_keys: link.ambiguous_keys,
            unmatched_map: link.unmatched_a,
            unmatched_wp: link.unmatched_b,
            unkeyed_map: link.unkeyed_a,
            unkeyed_wp: link.unkeyed_b,
            wp_rows_dropped: wp.provenance.rows_dropped,
        },
    )?;
    if emit_overridden {
        let full = linkage::override_outcomes(&map, &link);
        synth::write_map_csv(out.file("overridden_full.csv"), &full.records)?;
        let agree_subset = linkage::matched_subset(&map, &link, false);
        let agree_only: Vec<clearance_core::Record> = link
            .pairs
            .iter()
            .zip(agree_subset.records.iter())
            .filter(|(p, _)| p.a_solved == p.b_solved)
            .map(|(_, r)| r.clone())
            .collect();
        synth::write_map_csv(out.file("matched_agree.csv"), &agree_only)?;
        let overridden_subset = linkage::matched_subset(&map, &link, true);
        synth::write_map_csv(
            out.file("matched_overridden.csv"),
            &overridden_subset.records,
        )?;
    }
    println!(
        "match: {} matched, {} agree ({:.2}%), {} wp-solved/map-unsolved ({:.2}%), {} ambiguous keys",
        link.matched,
        link.agree,
        100.0 * link.agree as f64 / denom,
        link.wp_solved_map_unsolved,
        100.0 * link.wp_solved_map_unsolved as f64 / denom,
        link.ambiguous_keys
    );
    let mut manifest = Manifest::new("match", &resolved);
    manifest.input("map_csv", map_path)?;
    manifest.input("wp_csv", wp_path)?;
    manifest.threads = threads;
    manifest.write(&mut out)
}

fn cmd_summarize(input: &Path, out: &Path, threads: Option<usize>) -> Result<()> {
    let resolved = resolve(&CommonRun::default(), &FileConfig::default());
    let mut out = OutDir::create(out)?;
    let raw = load_map_csv(input)?;
    if raw.is_empty() {
        bail!("{} contains no usable rows", input.display());
    }
    report::write_yearly_counts_csv(out.file("yearly_counts.csv"), &raw)?;
    report::write_state_ratios_csv(out.file("state_ratios.csv"), &raw)?;
    let filtered = filter_unknown_age(&raw);
    #[derive(Serialize)]
    struct Totals {
        rows_read: u64,
        rows_kept: u64,
        rows_dropped: u64,
        solved: usize,
        unsolved: usize,
        unsolved_share: f64,
        known_age_rows: usize,
        derived_target_disagreements: usize,
        states: usize,
    }
    let totals = Totals {
        rows_read: raw.provenance.rows_read,
        rows_kept: raw.provenance.rows_kept,
        rows_dropped: raw.provenance.rows_dropped,
        solved: raw.solved_count(),
        unsolved: raw.unsolved_count(),
        unsolved_share: raw.unsolved_count() as f64 / raw.len() as f64,
        known_age_rows: filtered.len(),
        derived_target_disagreements: dataset::target_disagreements(&raw),
        states: partition_by_state(&raw).len(),
    };
    report::write_json(out.file("totals.json"), &totals)?;
    println!(
        "summarize: {} rows, {} unsolved ({:.2}%), {} states",
        raw.len(),
        totals.unsolved,
        100.0 * totals.unsolved_share,
        totals.states
    );
    let mut manifest = Manifest::new("summarize", &resolved);
    manifest.input("map_csv", input)?;
    manifest.threads = threads;
    manifest.write(&mut out)
}
