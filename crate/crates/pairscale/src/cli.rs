//! Command-line experiment drivers.
//!
//! Every command is a plain function over parsed arguments so tests and other
//! tools can call them directly; the `pairscale` binary only parses argv and
//! dispatches. Commands echo their resolved configuration (semantic
//! parameters, never paths) next to their primary output, and all randomness
//! fans out from one root seed per invocation, so runs with identical inputs
//! and seeds are byte-identical.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or domain
//! error.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::comparator::{self, ComparatorError, ComparatorModel, PairObservation, TrainConfig};
use crate::inference::{
    score_multi_with_matrix, score_single, InferenceConfig, InferenceError, ReferenceSet,
};
use crate::items::{Item, ItemError, ItemSet, SceneManifest};
use crate::matrix::{ComparisonMatrix, MatrixError};
use crate::metrics::{calibration, MetricsError, MetricsReport, SceneMetrics};
use crate::observer::{
    make_design, simulate_matrix, DesignError, DesignKind, ObserverConfig,
};
use crate::scaling::{
    scale_mle, scale_trueskill, JodScale, MleScalerConfig, ScalingError, TrueSkillState,
};
use crate::stats::{derive_seed, DEFAULT_SIGMA_OBS};

#[derive(Debug, Error)]
pub enum CliError {
    /// Wrong flags or an invalid configuration file; exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Invalid or inconsistent data; exit code 2.
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

macro_rules! data_error_from {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_error_from!(
    MatrixError,
    ItemError,
    ScalingError,
    ComparatorError,
    InferenceError,
    MetricsError,
    DesignError
);

#[derive(Parser, Debug)]
#[command(
    name = "pairscale",
    version,
    about = "Pairwise comparison scaling: matrices, scalers, comparator training and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Scale a comparison matrix into JOD scores.
    Scale(ScaleArgs),
    /// Train the preference comparator on manifest scenes.
    Train(TrainArgs),
    /// Score items with a trained comparator (multi or single mode).
    Infer(InferArgs),
    /// Compare predicted score files against ground-truth score files.
    Eval(EvalArgs),
    /// Generate synthetic ground truth, a comparison matrix and a histogram.
    Simulate(SimulateArgs),
    /// Emit the 6-bin calibration of comparator predictions vs annotations.
    Calibrate(CalibrateArgs),
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Scale(args) => cmd_scale(args),
        Command::Train(args) => cmd_train(args),
        Command::Infer(args) => cmd_infer(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Calibrate(args) => cmd_calibrate(args),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Trueskill,
    Mle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignArg {
    Full,
    ChainPlusRandom,
}

#[derive(Args, Debug)]
pub struct ScaleArgs {
    /// Comparison matrix CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Scaling method.
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Scores JSON to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Root seed for the replay order (trueskill only).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replay passes for the trueskill method.
    #[arg(long, default_value_t = 4)]
    pub passes: usize,
}

pub fn cmd_scale(args: &ScaleArgs) -> Result<(), CliError> {
    let matrix = ComparisonMatrix::load(&args.input)?;
    let violations = matrix.validate();
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(CliError::Data(format!("invalid matrix: {}", list.join("; "))));
    }
    let scores = match args.method {
        MethodArg::Trueskill => {
            if !matrix.is_connected() {
                eprintln!(
                    "warning: comparison graph is disconnected; each component is centered independently"
                );
            }
            scale_trueskill(
                &matrix,
                &TrueSkillState::new(matrix.len()),
                args.passes,
                derive_seed(args.seed, "scale/replay"),
            )?
        }
        MethodArg::Mle => scale_mle(&matrix, &MleScalerConfig::default())?,
    };
    scores.save(&args.output)?;
    let echo = json!({
        "format_version": crate::FORMAT_VERSION,
        "command": "scale",
        "method": match args.method { MethodArg::Trueskill => "trueskill", MethodArg::Mle => "mle" },
        "seed": args.seed,
        "passes": args.passes,
        "mle": MleScalerConfig::default(),
    });
    write_echo(&args.output, &echo)
}

/// On-disk training configuration: model architecture plus optimizer settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFileConfig {
    /// Output dims of each backbone layer; empty means a hub-only model.
    pub hidden_dims: Vec<usize>,
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Scene manifest JSON.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Attribute whose matrices to train on.
    #[arg(long)]
    pub attribute: String,
    /// Training configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Model checkpoint to write (loss history lands next to it).
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed from the configuration file.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", args.config.display())))?;
    let mut config: TrainFileConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid training config: {e}")))?;
    if let Some(seed) = args.seed {
        config.train.seed = seed;
    }
    let seed = config.train.seed;

    let (manifest, base) = SceneManifest::load(&args.manifest)?;
    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut observations: Vec<PairObservation> = Vec::new();
    let mut feature_dim: Option<usize> = None;

    for (scene, entry) in &manifest.scenes {
        let scene_items = ItemSet::load_features(&base.join(&entry.features))?;
        match (feature_dim, scene_items.feature_dim()) {
            (None, Some(d)) => feature_dim = Some(d),
            (Some(d), Some(got)) if d != got => {
                return Err(CliError::Data(format!(
                    "scene `{scene}` has feature dim {got}, expected {d}"
                )))
            }
            _ => {}
        }
        let matrix_path = entry.matrices.get(&args.attribute).ok_or_else(|| {
            CliError::Data(format!("scene `{scene}` has no matrix for attribute `{}`", args.attribute))
        })?;
        let matrix = ComparisonMatrix::load(&base.join(matrix_path))?;
        let filtered = matrix.threshold_filter(config.train.min_comparisons_threshold);
        let records =
            filtered.to_pair_records(derive_seed(seed, &format!("train/orient/{scene}")));
        if records.is_empty() {
            continue;
        }
        let offset = features.len();
        let mut slot_of_matrix_index = Vec::with_capacity(matrix.len());
        for id in matrix.item_ids() {
            let k = scene_items.index_of(id).ok_or_else(|| {
                CliError::Data(format!("scene `{scene}`: matrix id `{id}` missing from features"))
            })?;
            slot_of_matrix_index.push(offset + slot_of_matrix_index.len());
            features.push(scene_items.features_of(k)?.to_vec());
        }
        for r in records {
            observations.push(PairObservation {
                i: slot_of_matrix_index[r.i],
                j: slot_of_matrix_index[r.j],
                p: r.p,
                n: r.n,
            });
        }
    }

    if observations.is_empty() {
        return Err(CliError::Data(format!(
            "no training pairs left after thresholding at {}",
            config.train.min_comparisons_threshold
        )));
    }
    let d = feature_dim.ok_or_else(|| CliError::Data("no features found in manifest".into()))?;
    let mut dims = vec![d];
    dims.extend_from_slice(&config.hidden_dims);
    let mut model = ComparatorModel::init(&dims, derive_seed(seed, "train/init"));
    let history = comparator::train(&mut model, &observations, &features, &config.train)?;

    model.save_with_config(&args.out, Some(&config.train))?;
    let mut loss_csv = format!("# format: pairscale-loss v{}\nepoch,loss\n", crate::FORMAT_VERSION);
    for (epoch, loss) in history.iter().enumerate() {
        loss_csv.push_str(&format!("{epoch},{loss}\n"));
    }
    write_file(&sibling(&args.out, ".loss.csv"), &loss_csv)?;
    let echo = json!({
        "format_version": crate::FORMAT_VERSION,
        "command": "train",
        "attribute": args.attribute,
        "hidden_dims": config.hidden_dims,
        "train": config.train,
    });
    write_echo(&args.out, &echo)
}

#[derive(Args, Debug)]
pub struct InferArgs {
    /// Trained model checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Features CSV for the items to score.
    #[arg(long)]
    pub items: PathBuf,
    /// Inference configuration JSON; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scores JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the reconstructed comparison matrix (multi mode only).
    #[arg(long)]
    pub emit_matrix: Option<PathBuf>,
    /// Single mode: id of the query item within the features file.
    #[arg(long, requires = "refs")]
    pub query: Option<String>,
    /// Single mode: scores JSON fixing the reference scale.
    #[arg(long, requires = "query")]
    pub refs: Option<PathBuf>,
    /// Overrides the seed from the configuration file.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn cmd_infer(args: &InferArgs) -> Result<(), CliError> {
    let model = ComparatorModel::load(&args.model)?;
    let items = ItemSet::load_features(&args.items)?;
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str::<InferenceConfig>(&text)
                .map_err(|e| CliError::Usage(format!("invalid inference config: {e}")))?
        }
        None => InferenceConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }

    match (&args.query, &args.refs) {
        (Some(query), Some(refs_path)) => {
            if args.emit_matrix.is_some() {
                return Err(CliError::Usage(
                    "--emit-matrix applies to multi-item mode only".into(),
                ));
            }
            let ref_scores = JodScale::load(refs_path)?;
            let query_index = items
                .index_of(query)
                .ok_or_else(|| CliError::Data(format!("query id `{query}` not in features")))?;
            let mut ref_items = Vec::new();
            for id in ref_scores.item_ids() {
                let k = items.index_of(id).ok_or_else(|| {
                    CliError::Data(format!("reference id `{id}` not in features"))
                })?;
                ref_items.push(Item { id: id.clone(), features: Some(items.features_of(k)?.to_vec()) });
            }
            let refs = ReferenceSet::new(&ItemSet::new(ref_items)?, &ref_scores)?;
            let score =
                score_single(&model, query, items.features_of(query_index)?, &refs, &config)?;
            let out_scale = JodScale::from_raw(vec![query.clone()], vec![score])?;
            out_scale.save(&args.out)?;
        }
        (None, None) => {
            let (scale, matrix) = score_multi_with_matrix(&model, &items, &config)?;
            scale.save(&args.out)?;
            if let Some(matrix_path) = &args.emit_matrix {
                matrix.save(matrix_path)?;
            }
        }
        _ => unreachable!("clap enforces --query and --refs together"),
    }
    let echo = json!({
        "format_version": crate::FORMAT_VERSION,
        "command": "infer",
        "mode": if args.query.is_some() { "single" } else { "multi" },
        "config": config,
    });
    write_echo(&args.out, &echo)
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory of predicted score files, one JSON per scene.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth score files, one JSON per scene.
    #[arg(long)]
    pub truth: PathBuf,
    /// Report JSON to write (a CSV lands next to it).
    #[arg(long)]
    pub out: PathBuf,
}

fn scene_stems(dir: &Path) -> Result<BTreeSet<String>, CliError> {
    let mut stems = BTreeSet::new();
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("cannot read directory {}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry.map_err(|e| CliError::Data(e.to_string()))?.path();
        if path.extension().is_some_and(|ext| ext == "json") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.insert(stem.to_string());
            }
        }
    }
    Ok(stems)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let pred_scenes = scene_stems(&args.pred)?;
    let truth_scenes = scene_stems(&args.truth)?;
    if pred_scenes != truth_scenes {
        let only_pred: Vec<&String> = pred_scenes.difference(&truth_scenes).collect();
        let only_truth: Vec<&String> = truth_scenes.difference(&pred_scenes).collect();
        return Err(CliError::Data(format!(
            "scene sets differ; only in --pred: {only_pred:?}, only in --truth: {only_truth:?}"
        )));
    }
    if pred_scenes.is_empty() {
        return Err(CliError::Data("no scenes found".into()));
    }
    let mut per_scene = BTreeMap::new();
    for scene in &pred_scenes {
        let pred = JodScale::load(&args.pred.join(format!("{scene}.json")))?;
        let truth = JodScale::load(&args.truth.join(format!("{scene}.json")))?;
        per_scene.insert(scene.clone(), SceneMetrics::compute(&pred, &truth)?);
    }
    let report = MetricsReport::from_scenes(per_scene)?;
    report.save_json(&args.out)?;
    report.save_csv(&sibling(&args.out, ".csv"))?;
    let echo = json!({
        "format_version": crate::FORMAT_VERSION,
        "command": "eval",
        "scenes": pred_scenes.len(),
    });
    write_echo(&args.out, &echo)
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Number of items.
    #[arg(long)]
    pub n: usize,
    /// Comparison design.
    #[arg(long, value_enum)]
    pub design: DesignArg,
    /// Comparisons per pair.
    #[arg(long)]
    pub k: usize,
    /// Extra random pairs for the chain-plus-random design.
    #[arg(long, default_value_t = 0)]
    pub extra: usize,
    /// Observer noise; defaults to the 75%-per-JOD convention.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Bins of the empirical probability histogram.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    use rand::{RngExt, SeedableRng};
    if args.n < 2 {
        return Err(CliError::Usage(format!("--n must be at least 2, got {}", args.n)));
    }
    if args.bins < 1 {
        return Err(CliError::Usage("--bins must be at least 1".into()));
    }
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", args.out.display())))?;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(args.seed, "simulate/scores"));
    let ids: Vec<String> = (0..args.n).map(|k| format!("item_{k:02}")).collect();
    let scores: Vec<f64> = (0..args.n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let truth = JodScale::from_raw(ids, scores)?;

    let kind = match args.design {
        DesignArg::Full => DesignKind::Full,
        DesignArg::ChainPlusRandom => DesignKind::ChainPlusRandom,
    };
    let design = make_design(kind, args.n, args.extra, args.k, derive_seed(args.seed, "simulate/design"))?;
    let observer = ObserverConfig {
        sigma_obs: args.sigma.unwrap_or(DEFAULT_SIGMA_OBS),
        rng_seed: derive_seed(args.seed, "simulate/draws"),
    };
    let matrix = simulate_matrix(&truth, &design, &observer)?;

    truth.save(&args.out.join("true_scores.json"))?;
    matrix.save(&args.out.join("matrix.csv"))?;

    let hist = matrix.probability_histogram(args.bins);
    let mut hist_csv =
        format!("# format: pairscale-histogram v{}\nbin,edge_lo,edge_hi,count\n", crate::FORMAT_VERSION);
    for (k, count) in hist.iter().enumerate() {
        hist_csv.push_str(&format!(
            "{k},{},{},{count}\n",
            k as f64 / args.bins as f64,
            (k + 1) as f64 / args.bins as f64
        ));
    }
    write_file(&args.out.join("histogram.csv"), &hist_csv)?;

    let echo = json!({
        "format_version": crate::FORMAT_VERSION,
        "command": "simulate",
        "n": args.n,
        "design": match args.design { DesignArg::Full => "full", DesignArg::ChainPlusRandom => "chain_plus_random" },
        "k": args.k,
        "extra": args.extra,
        "sigma_obs": observer.sigma_obs,
        "seed": args.seed,
        "bins": args.bins,
        "pairs": design.pairs.len(),
        "connected": design.is_connected(args.n),
    });
    write_file(
        &args.out.join("config.json"),
        &(serde_json::to_string_pretty(&echo).expect("echo serializes") + "\n"),
    )
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Trained model checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Scene manifest JSON with annotated matrices.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Restrict to one attribute; all attributes pool together by default.
    #[arg(long)]
    pub attribute: Option<String>,
    /// Calibration CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<(), CliError> {
    let model = ComparatorModel::load(&args.model)?;
    let (manifest, base) = SceneManifest::load(&args.manifest)?;
    let mut predictions = Vec::new();
    let mut ground_truth = Vec::new();
    for (scene, entry) in &manifest.scenes {
        let items = ItemSet::load_features(&base.join(&entry.features))?;
        for (attribute, matrix_path) in &entry.matrices {
            if args.attribute.as_ref().is_some_and(|a| a != attribute) {
                continue;
            }
            let matrix = ComparisonMatrix::load(&base.join(matrix_path))?;
            for (i, j) in matrix.observed_pairs() {
                let gt = matrix.count(i, j) / matrix.pair_total(i, j);
                let fi = items
                    .index_of(&matrix.item_ids()[i])
                    .ok_or_else(|| CliError::Data(format!("scene `{scene}`: id missing from features")))?;
                let fj = items
                    .index_of(&matrix.item_ids()[j])
                    .ok_or_else(|| CliError::Data(format!("scene `{scene}`: id missing from features")))?;
                let pred = model.forward(items.features_of(fi)?, items.features_of(fj)?)?;
                predictions.push(pred);
                ground_truth.push(gt);
            }
        }
    }
    if predictions.is_empty() {
        return Err(CliError::Data("no observed pairs to calibrate against".into()));
    }
    let hist = calibration(&predictions, &ground_truth);
    hist.save_csv(&args.out)?;
    let echo = json!({
        "format_version": crate::FORMAT_VERSION,
        "command": "calibrate",
        "attribute": args.attribute,
        "records": predictions.len(),
    });
    write_echo(&args.out, &echo)
}

/// `model.json` -> `model<suffix>` in the same directory.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
    path.with_file_name(format!("{stem}{suffix}"))
}

fn write_echo(primary_output: &Path, echo: &serde_json::Value) -> Result<(), CliError> {
    write_file(
        &sibling(primary_output, ".config.json"),
        &(serde_json::to_string_pretty(echo).expect("echo serializes") + "\n"),
    )
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}
