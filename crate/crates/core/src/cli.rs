//! Command-line front end.
//!
//! Every subcommand composes library operations directly. Options can also
//! come from a flat `key = value` file given with `--config`; keys are long
//! flag names, `[subcommand]` sections scope keys to one subcommand, and
//! flags on the command line win.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{kfold, Dataset, DatasetError, Goal, Target, Targets};
use crate::ensemble::{train_classic_stack_on, train_pyramid_on, EnsembleError, PyramidConfig, PyramidModel, StackConfig, StackModel};
use crate::evaluation::{compare_learners, evaluate, Aggregation, Candidate, EvalError, Grouping, ModelSet, Protocol};
use crate::learners::{train_transformed, LearnerError, LearnerSpec, MlpParams, Predictor, TargetTransform, TrainedModel, FORMAT_VERSION};
use crate::manifest::{flatten, Manifest, ManifestError};
use crate::reduction::{apply, apply_dataset, build_recipe, Penalty, ReductionConfig, ReductionError, ReductionRecipe};
use crate::report::{parse_report, ReportError};
use crate::synth::{gen_dataset, write_atomic, write_benchmark, OracleSpec, SynthError};
use crate::timing::{binary_search_fmax, exhaustive_scan, gen_landscape, minerva_search, LandscapeParams, TimingError, WnsLandscape};

/// Seed used when neither `--seed` nor `PYRAMID_SEED` is given.
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config file {path}, line {line}: {reason}")]
    Config { path: PathBuf, line: usize, reason: String },
    #[error("model bundle: {0}")]
    Bundle(String),
    #[error("{0}")]
    Invalid(String),
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    write_atomic(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "pyramid", version, about = "HLS report re-calibration and Fmax search")]
pub struct Cli {
    /// Master seed for every randomized step.
    #[arg(long, global = true, env = "PYRAMID_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    pub output: Option<OutputFormat>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Flat key = value options file; command-line flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic benchmark: reports plus dataset.csv.
    GenSynth(GenSynthArgs),
    /// Parse one report and print its raw feature vector.
    Parse(ParseArgs),
    /// Build a feature reduction recipe from a dataset.
    Reduce(ReduceArgs),
    /// Train all ten (goal, target) models into a bundle directory.
    Train(TrainArgs),
    /// Predict the five targets for one report.
    Predict(PredictArgs),
    /// Score a bundle on a dataset.
    Evaluate(EvaluateArgs),
    /// Train and compare learners under the benchmark protocol.
    Compare(CompareArgs),
    /// Search for the best (strategy, frequency) on a timing landscape.
    FmaxSearch(FmaxArgs),
    /// Probe every frequency in a window around a center.
    Scan(ScanArgs),
}

#[derive(Debug, Args)]
pub struct ManifestArg {
    /// Feature manifest CSV; the bundled one by default.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

impl ManifestArg {
    fn load(&self) -> Result<Manifest, CliError> {
        match &self.manifest {
            Some(p) => Ok(Manifest::from_csv(&read(p)?)?),
            None => Ok(Manifest::default_v1()),
        }
    }
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 90)]
    pub designs: usize,
    /// Relative standard deviation of the target noise.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[command(flatten)]
    pub manifest: ManifestArg,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[command(flatten)]
    pub manifest: ManifestArg,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Where to write the recipe JSON.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    pub corr_threshold: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.01)]
    pub coef_threshold: f64,
    #[arg(long, value_enum, default_value_t = PenaltyArg::L2)]
    pub penalty: PenaltyArg,
    #[command(flatten)]
    pub manifest: ManifestArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PenaltyArg {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Pyramid,
    Ridge,
    Mlp,
    Svr,
    RandomForest,
    Stack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformArg {
    Identity,
    Log1p,
}

impl From<TransformArg> for TargetTransform {
    fn from(t: TransformArg) -> Self {
        match t {
            TransformArg::Identity => TargetTransform::Identity,
            TransformArg::Log1p => TargetTransform::Log1p,
        }
    }
}

#[derive(Debug, Args)]
pub struct PyramidArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub bootstrap_fraction: Option<f64>,
    #[arg(long)]
    pub target_accuracy: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub max_order: Option<usize>,
    /// Hidden layer sizes of the sub-model, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sub_hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub sub_epochs: Option<usize>,
    #[arg(long)]
    pub sub_l2: Option<f64>,
}

impl PyramidArgs {
    fn config(&self, seed: u64, transform: TargetTransform) -> PyramidConfig {
        let mut c = PyramidConfig {
            target_transform: transform,
            ..PyramidConfig::benchmark(seed)
        };
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.bootstrap_fraction {
            c.bootstrap_fraction = v;
        }
        if let Some(v) = self.target_accuracy {
            c.target_accuracy = v;
        }
        if let Some(v) = self.max_iterations {
            c.max_iterations = v;
        }
        if let Some(v) = self.max_order {
            c.max_order = v;
        }
        if let LearnerSpec::Mlp(p) = &mut c.submodel {
            if let Some(h) = &self.sub_hidden {
                p.hidden = h.clone();
            }
            if let Some(e) = self.sub_epochs {
                p.epochs = e;
            }
            if let Some(l) = self.sub_l2 {
                p.l2 = l;
            }
        }
        c
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Bundle directory to create.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Family::Pyramid)]
    pub family: Family,
    #[arg(long, value_enum, default_value_t = TransformArg::Log1p)]
    pub transform: TransformArg,
    /// Reuse an existing recipe instead of building one.
    #[arg(long)]
    pub recipe: Option<PathBuf>,
    #[command(flatten)]
    pub pyramid: PyramidArgs,
    #[command(flatten)]
    pub manifest: ManifestArg,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Bundle directory or its index.json.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, value_enum, default_value_t = GoalArg::Tp)]
    pub goal: GoalArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GoalArg {
    Tp,
    Tpa,
}

impl From<GoalArg> for Goal {
    fn from(g: GoalArg) -> Self {
        match g {
            GoalArg::Tp => Goal::Tp,
            GoalArg::Tpa => Goal::Tpa,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// overall, device, category or device-category.
    #[arg(long, default_value = "overall")]
    pub group: Grouping,
    /// Weight aggregate rows by sample count.
    #[arg(long)]
    pub weighted: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Dataset CSV; the synthetic benchmark is generated when omitted.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 90)]
    pub designs: usize,
    /// Seed of the generated benchmark (the split uses `--seed`).
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub data_seed: u64,
    #[arg(long, value_enum, default_value_t = TransformArg::Log1p)]
    pub transform: TransformArg,
    /// Subset of ridge, mlp, svr, random_forest, pyramid, stack.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub learners: Option<Vec<Family>>,
    #[command(flatten)]
    pub pyramid: PyramidArgs,
    #[command(flatten)]
    pub manifest: ManifestArg,
}

#[derive(Debug, Args)]
pub struct LandscapeArg {
    /// `icepole_like`, `synthetic` (generated from `--seed`) or a directory.
    #[arg(long)]
    pub landscape: String,
}

impl LandscapeArg {
    fn load(&self, seed: u64) -> Result<WnsLandscape, CliError> {
        match self.landscape.as_str() {
            "icepole_like" => Ok(WnsLandscape::icepole_like()),
            "synthetic" => Ok(gen_landscape(&LandscapeParams::default(), seed)?),
            dir => Ok(WnsLandscape::load(Path::new(dir))?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SearchMethod {
    Minerva,
    Bisection,
}

#[derive(Debug, Args)]
pub struct FmaxArgs {
    #[command(flatten)]
    pub landscape: LandscapeArg,
    #[arg(long, value_enum, default_value_t = GoalArg::Tp)]
    pub goal: GoalArg,
    #[arg(long, value_enum, default_value_t = SearchMethod::Minerva)]
    pub method: SearchMethod,
    /// Strategy for bisection.
    #[arg(long, default_value_t = 0)]
    pub strategy: usize,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub landscape: LandscapeArg,
    #[arg(long)]
    pub center: u32,
    #[arg(long, default_value_t = 64)]
    pub radius: u32,
    #[arg(long, default_value_t = 0)]
    pub strategy: usize,
    #[arg(long, default_value_t = 1)]
    pub precision: u32,
}

/// Entry point: parses `argv`, runs the subcommand, and returns the exit
/// code (0 success, 1 domain error, 2 usage error).
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match inject_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs a parsed command and returns what it prints on stdout.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match cli.jobs {
        Some(0) => Err(CliError::Invalid("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Invalid(e.to_string()))?;
            pool.install(|| dispatch(cli))
        }
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> Result<String, CliError> {
    let seed = cli.seed;
    let fmt = |default| cli.output.unwrap_or(default);
    match &cli.command {
        Command::GenSynth(a) => gen_synth(a, seed, fmt(OutputFormat::Table)),
        Command::Parse(a) => parse(a, fmt(OutputFormat::Csv)),
        Command::Reduce(a) => reduce(a, fmt(OutputFormat::Table)),
        Command::Train(a) => train_bundle(a, seed, fmt(OutputFormat::Table)),
        Command::Predict(a) => predict(a, fmt(OutputFormat::Json)),
        Command::Evaluate(a) => evaluate_bundle(a, fmt(OutputFormat::Table)),
        Command::Compare(a) => compare(a, seed, fmt(OutputFormat::Table)),
        Command::FmaxSearch(a) => fmax_search(a, seed, fmt(OutputFormat::Table)),
        Command::Scan(a) => scan(a, seed, fmt(OutputFormat::Csv)),
    }
}

const SUBCOMMANDS: [&str; 9] = ["gen-synth", "parse", "reduce", "train", "predict", "evaluate", "compare", "fmax-search", "scan"];

/// Appends options from the `--config` file that are not already on the
/// command line.
pub fn inject_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            path = args.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let path = PathBuf::from(path);
    let text = read(&path)?;
    let sub = args.iter().skip(1).find(|a| SUBCOMMANDS.contains(&a.as_str())).cloned();
    let present = |key: &str| {
        let flag = format!("--{key}");
        args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
    };
    let mut out = argv;
    let mut section: Option<String> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = Some(name.trim().to_string());
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config {
                path,
                line: n + 1,
                reason: "expected `key = value`".into(),
            });
        };
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        if key.is_empty() || key == "config" {
            return Err(CliError::Config {
                path,
                line: n + 1,
                reason: format!("invalid key `{key}`"),
            });
        }
        if section.as_deref().is_some_and(|s| Some(s) != sub.as_deref()) || present(&key) {
            continue;
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            v => {
                out.push(format!("--{key}").into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

fn gen_synth(a: &GenSynthArgs, seed: u64, fmt: OutputFormat) -> Result<String, CliError> {
    let manifest = a.manifest.load()?;
    let spec = OracleSpec {
        noise: a.noise,
        ..OracleSpec::default()
    };
    let ds = write_benchmark(&a.out, &spec, a.designs, &manifest, seed)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        dir: &'a Path,
        designs: usize,
        samples: usize,
        features: usize,
        manifest_id: &'a str,
        seed: u64,
    }
    let s = Summary {
        dir: &a.out,
        designs: a.designs,
        samples: ds.len(),
        features: ds.dim(),
        manifest_id: manifest.id(),
        seed,
    };
    Ok(match fmt {
        OutputFormat::Json => json(&s),
        OutputFormat::Csv => format!(
            "dir,designs,samples,features,manifest_id,seed\n{},{},{},{},{},{}\n",
            s.dir.display(),
            s.designs,
            s.samples,
            s.features,
            s.manifest_id,
            s.seed
        ),
        OutputFormat::Table => format!(
            "wrote {} samples ({} designs, {} features) to {}\n",
            s.samples,
            s.designs,
            s.features,
            s.dir.display()
        ),
    })
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

fn parse(a: &ParseArgs, fmt: OutputFormat) -> Result<String, CliError> {
    let manifest = a.manifest.load()?;
    let report = parse_report(&read(&a.report)?)?;
    let v = flatten(&report, &manifest);
    #[derive(Serialize)]
    struct Feature<'a> {
        feature: &'a str,
        value: f64,
    }
    let rows: Vec<Feature> = manifest
        .names()
        .zip(&v.values)
        .map(|(feature, &value)| Feature { feature, value })
        .collect();
    Ok(match fmt {
        OutputFormat::Json => json(&rows),
        OutputFormat::Csv => {
            let mut s = String::from("feature,value\n");
            for r in &rows {
                let _ = writeln!(s, "{},{}", r.feature, r.value);
            }
            s
        }
        OutputFormat::Table => {
            let mut s = String::new();
            for r in &rows {
                let _ = writeln!(s, "{:<40} {:>16}", r.feature, r.value);
            }
            s
        }
    })
}

fn load_dataset(path: &Path, manifest: &Manifest) -> Result<Dataset, CliError> {
    let f = fs::File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let ds = Dataset::read_csv(f, manifest.id())?;
    if ds.dim() != manifest.len() {
        return Err(CliError::Invalid(format!(
            "{} has {} feature columns but the manifest defines {}",
            path.display(),
            ds.dim(),
            manifest.len()
        )));
    }
    Ok(ds)
}

fn reduce(a: &ReduceArgs, fmt: OutputFormat) -> Result<String, CliError> {
    let manifest = a.manifest.load()?;
    let ds = load_dataset(&a.dataset, &manifest)?;
    let cfg = ReductionConfig {
        corr_threshold: a.corr_threshold,
        lambda: a.lambda,
        coef_threshold: a.coef_threshold,
        penalty: match a.penalty {
            PenaltyArg::L1 => Penalty::L1,
            PenaltyArg::L2 => Penalty::L2,
        },
    };
    let (recipe, _) = build_recipe(&ds, &cfg)?;
    write(&a.out, recipe.to_json().as_bytes())?;
    let cats = manifest.categories();
    #[derive(Serialize)]
    struct Row {
        category: String,
        kept: usize,
    }
    let mut rows: Vec<Row> = crate::manifest::FeatureCategory::ALL
        .iter()
        .map(|c| Row {
            category: format!("{c:?}"),
            kept: recipe.kept_indices.iter().filter(|&&i| cats[i] == *c).count(),
        })
        .collect();
    rows.push(Row {
        category: "total".into(),
        kept: recipe.len(),
    });
    Ok(match fmt {
        OutputFormat::Json => json(&rows),
        OutputFormat::Csv => {
            let mut s = String::from("category,kept\n");
            for r in &rows {
                let _ = writeln!(s, "{},{}", r.category, r.kept);
            }
            s
        }
        OutputFormat::Table => {
            let mut s = String::new();
            for r in &rows {
                let _ = writeln!(s, "{:<16} {:>4}", r.category, r.kept);
            }
            s
        }
    })
}

/// Any persisted model a bundle can hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SavedModel {
    Learner(TrainedModel),
    Pyramid(PyramidModel),
    Stack(StackModel),
}

impl Predictor for SavedModel {
    fn input_dim(&self) -> usize {
        match self {
            SavedModel::Learner(m) => m.input_dim(),
            SavedModel::Pyramid(m) => m.input_dim(),
            SavedModel::Stack(m) => m.input_dim(),
        }
    }

    fn predict_matrix(&self, x: ndarray::ArrayView2<f64>) -> Result<ndarray::Array1<f64>, LearnerError> {
        match self {
            SavedModel::Learner(m) => m.predict_matrix(x),
            SavedModel::Pyramid(m) => m.predict_matrix(x),
            SavedModel::Stack(m) => m.predict_matrix(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleEntry {
    pub goal: Goal,
    pub target: Target,
    pub file: String,
}

/// `index.json` of a model bundle directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleIndex {
    pub format_version: u32,
    pub family: Family,
    pub seed: u64,
    pub manifest_id: String,
    pub feature_space_id: String,
    pub manifest_file: String,
    pub recipe_file: String,
    pub models: Vec<BundleEntry>,
}

/// A loaded bundle: manifest, recipe and one model per (goal, target).
#[derive(Debug, Clone)]
pub struct Bundle {
    pub index: BundleIndex,
    pub manifest: Manifest,
    pub recipe: ReductionRecipe,
    pub models: Vec<SavedModel>,
}

impl Bundle {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let index_path = if path.is_dir() { path.join("index.json") } else { path.to_path_buf() };
        let dir = index_path.parent().unwrap_or(Path::new("."));
        let index: BundleIndex = serde_json::from_str(&read(&index_path)?).map_err(|e| CliError::Bundle(e.to_string()))?;
        if index.format_version != FORMAT_VERSION {
            return Err(LearnerError::UnsupportedFormat(index.format_version).into());
        }
        let manifest = Manifest::from_csv(&read(&dir.join(&index.manifest_file))?)?;
        if manifest.id() != index.manifest_id {
            return Err(CliError::Bundle(format!(
                "manifest id {} does not match index {}",
                manifest.id(),
                index.manifest_id
            )));
        }
        let recipe = ReductionRecipe::from_json(&read(&dir.join(&index.recipe_file))?)?;
        let models = index
            .models
            .iter()
            .map(|e| {
                let m: SavedModel = serde_json::from_str(&read(&dir.join(&e.file))?).map_err(|err| CliError::Bundle(format!("{}: {err}", e.file)))?;
                if m.input_dim() != recipe.len() {
                    return Err(CliError::Bundle(format!("{} expects {} features, recipe keeps {}", e.file, m.input_dim(), recipe.len())));
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(Self {
            index,
            manifest,
            recipe,
            models,
        })
    }

    pub fn model(&self, goal: Goal, target: Target) -> Option<&SavedModel> {
        self.index
            .models
            .iter()
            .position(|e| e.goal == goal && e.target == target)
            .map(|i| &self.models[i])
    }

    pub fn model_set(&self) -> ModelSet<'_> {
        let mut set = ModelSet::new();
        for (e, m) in self.index.models.iter().zip(&self.models) {
            set.insert(e.goal, e.target, m);
        }
        set
    }
}

fn fit_family(family: Family, train: &Dataset, val: &Dataset, target: Target, seed: u64, transform: TargetTransform, pyramid: &PyramidConfig) -> Result<SavedModel, CliError> {
    let spec = match family {
        Family::Pyramid => return Ok(SavedModel::Pyramid(train_pyramid_on(train, val, target, pyramid)?)),
        Family::Stack => {
            let cfg = StackConfig {
                target_transform: transform,
                ..StackConfig::standard(seed)
            };
            return Ok(SavedModel::Stack(train_classic_stack_on(train, target, &cfg)?));
        }
        Family::Ridge => LearnerSpec::standard_four(seed)[0].clone(),
        Family::Mlp => LearnerSpec::Mlp(MlpParams {
            seed,
            ..MlpParams::default()
        }),
        Family::Svr => LearnerSpec::svr(),
        Family::RandomForest => LearnerSpec::forest(seed),
    };
    Ok(SavedModel::Learner(train_transformed(&spec, train, target, transform)?))
}

fn train_bundle(a: &TrainArgs, seed: u64, fmt: OutputFormat) -> Result<String, CliError> {
    let manifest = a.manifest.load()?;
    let raw = load_dataset(&a.dataset, &manifest)?;
    let recipe = match &a.recipe {
        Some(p) => ReductionRecipe::from_json(&read(p)?)?,
        None => build_recipe(&raw, &ReductionConfig::default())?.0,
    };
    if recipe.manifest_id != manifest.id() {
        return Err(CliError::Invalid(format!(
            "recipe was built for manifest {}, not {}",
            recipe.manifest_id,
            manifest.id()
        )));
    }
    let ds = apply_dataset(&recipe, &raw)?;
    let transform = TargetTransform::from(a.transform);
    let pyramid = a.pyramid.config(seed, transform);
    pyramid.validate()?;

    let jobs: Vec<(Goal, Target)> = Goal::ALL.iter().flat_map(|&g| Target::ALL.map(|t| (g, t))).collect();
    let models = jobs
        .par_iter()
        .map(|&(goal, target)| {
            let all = ds.filter_goal(goal);
            let folds = kfold(all.len(), 4, seed)?;
            let (train, val) = match a.family {
                Family::Pyramid => (all.subset(&folds[0].train), all.subset(&folds[0].validation)),
                _ => (all.clone(), all.subset(&folds[0].validation)),
            };
            fit_family(a.family, &train, &val, target, seed, transform, &pyramid)
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let index = BundleIndex {
        format_version: FORMAT_VERSION,
        family: a.family,
        seed,
        manifest_id: manifest.id().to_string(),
        feature_space_id: recipe.id(),
        manifest_file: "manifest.csv".into(),
        recipe_file: "recipe.json".into(),
        models: jobs
            .iter()
            .map(|&(goal, target)| BundleEntry {
                goal,
                target,
                file: format!("models/{}_{}.json", goal.name().to_lowercase(), target.name()),
            })
            .collect(),
    };
    write(&a.out.join("manifest.csv"), manifest.to_csv().as_bytes())?;
    write(&a.out.join("recipe.json"), recipe.to_json().as_bytes())?;
    for (e, m) in index.models.iter().zip(&models) {
        write(&a.out.join(&e.file), json(m).as_bytes())?;
    }
    write(&a.out.join("index.json"), json(&index).as_bytes())?;

    #[derive(Serialize)]
    struct Row {
        goal: Goal,
        target: Target,
        file: String,
        detail: String,
    }
    let rows: Vec<Row> = index
        .models
        .iter()
        .zip(&models)
        .map(|(e, m)| Row {
            goal: e.goal,
            target: e.target,
            file: e.file.clone(),
            detail: match m {
                SavedModel::Pyramid(p) => format!(
                    "{} iterations, {:?}, validation accuracy {:.2}%",
                    p.iterations(),
                    p.stages.last().map(|s| s.stop_reason).expect("non-empty"),
                    p.achieved_accuracy
                ),
                SavedModel::Learner(l) => match l.training_stats.train_rmse_rel {
                    Some(r) => format!("training error {r:.2}%"),
                    None => "no non-zero targets".into(),
                },
                SavedModel::Stack(s) => format!("meta weights {:?}", s.meta_weights()),
            },
        })
        .collect();
    Ok(match fmt {
        OutputFormat::Json => json(&rows),
        OutputFormat::Csv => {
            let mut s = String::from("goal,target,file,detail\n");
            for r in &rows {
                let _ = writeln!(s, "{},{},{},\"{}\"", r.goal.name(), r.target.name(), r.file, r.detail);
            }
            s
        }
        OutputFormat::Table => {
            let mut s = String::new();
            for r in &rows {
                let _ = writeln!(s, "{:<4} {:<5} {}", r.goal.name(), r.target.name(), r.detail);
            }
            s
        }
    })
}

fn predict(a: &PredictArgs, fmt: OutputFormat) -> Result<String, CliError> {
    let bundle = Bundle::load(&a.model)?;
    let report = parse_report(&read(&a.report)?)?;
    let raw = flatten(&report, &bundle.manifest);
    let v = apply(&bundle.recipe, &raw)?;
    let goal = Goal::from(a.goal);
    let mut out = Targets {
        lut: 0.0,
        ff: 0.0,
        dsp: 0.0,
        bram: 0.0,
        fmax: 0.0,
    };
    for t in Target::ALL {
        let m = bundle.model(goal, t).ok_or(EvalError::MissingModel { goal, target: t })?;
        out.set(t, m.predict_one(&v.values)?);
    }
    Ok(match fmt {
        OutputFormat::Json => json(&out),
        OutputFormat::Csv => format!("lut,ff,dsp,bram,fmax\n{},{},{},{},{}\n", out.lut, out.ff, out.dsp, out.bram, out.fmax),
        OutputFormat::Table => {
            let mut s = String::new();
            for t in Target::ALL {
                let _ = writeln!(s, "{:<5} {:>14.3}", t.name(), out.get(t));
            }
            s
        }
    })
}

fn evaluate_bundle(a: &EvaluateArgs, fmt: OutputFormat) -> Result<String, CliError> {
    let bundle = Bundle::load(&a.model)?;
    let raw = load_dataset(&a.dataset, &bundle.manifest)?;
    let ds = apply_dataset(&bundle.recipe, &raw)?;
    let agg = if a.weighted { Aggregation::Weighted } else { Aggregation::Unweighted };
    let report = evaluate(&bundle.model_set(), &ds, a.group, agg)?;
    Ok(match fmt {
        OutputFormat::Json => report.to_json() + "\n",
        OutputFormat::Csv => report.to_csv(),
        OutputFormat::Table => report.to_table(),
    })
}

fn compare(a: &CompareArgs, seed: u64, fmt: OutputFormat) -> Result<String, CliError> {
    let manifest = a.manifest.load()?;
    let ds = match &a.dataset {
        Some(p) => load_dataset(p, &manifest)?,
        None => gen_dataset(&OracleSpec::default(), a.designs, &manifest, a.data_seed)?,
    };
    let split = Protocol::new(seed).prepare(&ds)?;
    let transform = TargetTransform::from(a.transform);
    let families = a.learners.clone().unwrap_or_else(|| vec![Family::Ridge, Family::Mlp, Family::Svr, Family::RandomForest, Family::Pyramid]);
    let four = LearnerSpec::standard_four(seed);
    let candidates: Vec<Candidate> = families
        .iter()
        .map(|f| match f {
            Family::Ridge => Candidate::Learner {
                spec: four[0].clone(),
                transform,
            },
            Family::Mlp => Candidate::Learner {
                spec: four[1].clone(),
                transform,
            },
            Family::Svr => Candidate::Learner {
                spec: four[2].clone(),
                transform,
            },
            Family::RandomForest => Candidate::Learner {
                spec: four[3].clone(),
                transform,
            },
            Family::Pyramid => Candidate::Pyramid {
                config: a.pyramid.config(seed, transform),
            },
            Family::Stack => Candidate::Stack {
                config: StackConfig {
                    target_transform: transform,
                    ..StackConfig::standard(seed)
                },
            },
        })
        .collect();
    let table = compare_learners(&split.train, &split.validation, &split.test, &candidates)?;
    Ok(match fmt {
        OutputFormat::Json => table.to_json() + "\n",
        OutputFormat::Csv => table.to_csv(),
        OutputFormat::Table => table.to_table(),
    })
}

fn fmax_search(a: &FmaxArgs, seed: u64, fmt: OutputFormat) -> Result<String, CliError> {
    let l = a.landscape.load(seed)?;
    let goal = Goal::from(a.goal);
    match a.method {
        SearchMethod::Minerva => {
            let r = minerva_search(&l, goal)?;
            Ok(match fmt {
                OutputFormat::Json => json(&r),
                OutputFormat::Csv => format!(
                    "goal,strategy,fmax_mhz,lut_count,score,probes\n{},{},{},{},{},{}\n",
                    goal.name(),
                    r.strategy_id,
                    r.achieved_fmax,
                    r.lut_count,
                    r.score,
                    r.probes
                ),
                OutputFormat::Table => format!(
                    "goal      {}\nstrategy  {} ({})\nfmax      {} MHz\nluts      {}\nscore     {}\nprobes    {}\n",
                    goal.name(),
                    r.strategy_id,
                    l.strategies[r.strategy_id].name,
                    r.achieved_fmax,
                    r.lut_count,
                    r.score,
                    r.probes
                ),
            })
        }
        SearchMethod::Bisection => {
            let (lo, hi) = l.search_window;
            let r = binary_search_fmax(&l, a.strategy, lo, hi, l.precision)?;
            Ok(match fmt {
                OutputFormat::Json => json(&r),
                OutputFormat::Csv => {
                    let mut s = String::from("probe,freq_mhz,wns_ns,pass\n");
                    for (i, p) in r.probes.iter().enumerate() {
                        let _ = writeln!(s, "{},{},{},{}", i + 1, p.freq, p.wns, u8::from(p.passes()));
                    }
                    s
                }
                OutputFormat::Table => {
                    let probes: Vec<String> = r.probes.iter().map(|p| format!("{}{}", p.freq, if p.passes() { "+" } else { "-" })).collect();
                    format!("fmax    {} MHz\nprobes  {}\n", r.fmax, probes.join(" "))
                }
            })
        }
    }
}

fn scan(a: &ScanArgs, seed: u64, fmt: OutputFormat) -> Result<String, CliError> {
    let l = a.landscape.load(seed)?;
    let r = exhaustive_scan(&l, a.strategy, a.center, a.radius, a.precision)?;
    Ok(match fmt {
        OutputFormat::Csv => r.to_csv(),
        OutputFormat::Json => json(&r),
        OutputFormat::Table => {
            let mut s = format!("fmax {} MHz over {} probes\n", r.fmax, r.rows.len());
            for p in &r.rows {
                let _ = writeln!(s, "{:>6} {:>10.4} {}", p.freq, p.wns, if p.passes() { "pass" } else { "fail" });
            }
            s
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        assert_eq!(run(args(&["pyramid", "scan", "--bogus"])), 2);
        assert_eq!(run(args(&["pyramid"])), 2);
    }

    #[test]
    fn scan_prints_the_window() {
        let cli = Cli::try_parse_from(args(&["pyramid", "scan", "--landscape", "icepole_like", "--center", "333", "--radius", "64"])).unwrap();
        let out = execute(&cli).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "freq_mhz,wns_ns,pass");
        assert_eq!(lines.len(), 130);
    }

    #[test]
    fn domain_errors_exit_one() {
        assert_eq!(run(args(&["pyramid", "scan", "--landscape", "icepole_like", "--center", "100"])), 1);
    }

    #[test]
    fn config_values_fill_missing_flags_only() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.ini");
        fs::write(&cfg, "# defaults\nseed = 7\n[scan]\nradius = 8\ncenter = 300\n[train]\nalpha = 0.5\n").unwrap();
        let argv = args(&["pyramid", "scan", "--landscape", "icepole_like", "--center", "333", "--config", cfg.to_str().unwrap()]);
        let cli = Cli::try_parse_from(inject_config(argv).unwrap()).unwrap();
        assert_eq!(cli.seed, 7);
        let Command::Scan(s) = &cli.command else { panic!() };
        assert_eq!((s.center, s.radius), (333, 8));
    }

    #[test]
    fn malformed_config_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.ini");
        fs::write(&cfg, "seed 7\n").unwrap();
        let r = inject_config(args(&["pyramid", "scan", "--config", cfg.to_str().unwrap()]));
        assert!(matches!(r, Err(CliError::Config { line: 1, .. })));
    }

    #[test]
    fn fmax_search_reports_the_scan_result() {
        let cli = Cli::try_parse_from(args(&["pyramid", "fmax-search", "--landscape", "icepole_like", "--output", "csv"])).unwrap();
        let out = execute(&cli).unwrap();
        assert!(out.lines().nth(1).unwrap().starts_with("TP,0,389,"));
    }
}
