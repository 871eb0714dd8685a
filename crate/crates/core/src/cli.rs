//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::detect::{load_detections, MembershipMode};
use crate::error::{Error, Result};
use crate::eval::{evaluate_semantic, SemanticEvalObject};
use crate::geom::{
    fixed_viewpoints_with, load_cameras, load_scene, save_cameras, compute_visibility, save_visibility,
    VisibilityParams, load_visibility, DEFAULT_DISTANCE, DEFAULT_RESOLUTION, DEFAULT_VIEWS,
};
use crate::gradcheck::{self, GradcheckConfig};
use crate::instance::{
    default_adjacency_radius, inclusion_vectors, load_instances, map50, merge_instances, save_instances,
    superpoint_adjacency, InstanceEvalObject, DEFAULT_INCLUSION_THRESHOLD,
};
use crate::loss::miou_hard;
use crate::synth::{emit, files, generate, NoiseSpec, SynthSpec};
use crate::train::{
    evaluate_confidence_baseline, evaluate_uniform, predict_weights, save_report, train_timed, train_with_validation,
    ConfidenceMode, LossKind, OptimizerKind, TrainConfig, TrainObject,
};
use crate::vote::{
    assign_labels, load_labeling, save_labeling, save_scores_tsv, score_unweighted, Labeling, ScoreMatrix,
    DEFAULT_NULL_SCORE, DEFAULT_NULL_THRESHOLD,
};
use crate::weightnet::{load_checkpoint_for, save_checkpoint, DEFAULT_TAU};

#[derive(Debug, Parser)]
#[command(name = "liftseg", version, about = "Lift multi-view 2D part detections onto 3D point clouds")]
struct Cli {
    /// Machine-readable output on stdout, and JSON errors on stderr.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for the parallel loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for every random choice; overrides seeds in spec and config files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic object directories with oracle detections.
    Synth(SynthArgs),
    /// Render a point cloud from fixed viewpoints and write per-view visibility.
    Visibility(VisibilityArgs),
    /// Label an object by unweighted voting.
    Lift(LiftArgs),
    /// Train the weight network on a directory of objects.
    Train(TrainArgs),
    /// Label an object by voting with weights from a trained checkpoint.
    LiftWeighted(LiftWeightedArgs),
    /// Semantic mIoU of predicted labelings.
    EvalSem(EvalArgs),
    /// Instance mAP at IoU 0.5 of predicted instances.
    EvalInst(EvalArgs),
    /// Voting with detection confidences as weights.
    BaselineConf(BaselineArgs),
    /// Finite-difference checks of the analytic gradients.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Built-in template: chair, table or lamp.
    #[arg(long, conflicts_with = "spec")]
    preset: Option<String>,
    /// Spec file (TOML).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory; with `--count` above 1, one subdirectory per object.
    #[arg(long)]
    out: PathBuf,
    /// Number of objects; object i uses seed + i.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Start from the adversarial noise profile.
    #[arg(long)]
    adversarial: bool,
    /// Probability that a truthful detection is missing.
    #[arg(long)]
    drop_rate: Option<f64>,
    /// Probability of an extra wrong-label detection per visible part and view.
    #[arg(long)]
    spurious_rate: Option<f64>,
    /// Maximum offset of each box edge in pixels.
    #[arg(long)]
    jitter: Option<f64>,
    /// Pixels added to every box side.
    #[arg(long)]
    loosen: Option<f64>,
    /// Length of the per-detection feature vector.
    #[arg(long)]
    feature_dim: Option<usize>,
    /// Feature signal-to-noise ratio.
    #[arg(long)]
    snr: Option<f64>,
    /// Number of viewpoints.
    #[arg(long)]
    views: Option<usize>,
    /// Image width and height in pixels.
    #[arg(long)]
    res: Option<u32>,
    /// Omit masks from the detection file.
    #[arg(long)]
    no_masks: bool,
    /// Super points that ignore part boundaries.
    #[arg(long)]
    boundary_violating: bool,
}

#[derive(Debug, Args)]
struct VisibilityArgs {
    #[arg(long)]
    cloud: PathBuf,
    /// Label table of the cloud.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = DEFAULT_VIEWS)]
    views: usize,
    #[arg(long, default_value_t = DEFAULT_DISTANCE)]
    distance: f64,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    res: u32,
    /// Splat radius in pixels.
    #[arg(long, default_value_t = VisibilityParams::default().splat_radius)]
    splat: f64,
    /// Depth tolerance in scene units.
    #[arg(long, default_value_t = VisibilityParams::default().depth_epsilon)]
    eps: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the generated cameras.
    #[arg(long)]
    cameras_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Per-point labels.
    #[arg(long)]
    out: PathBuf,
    /// Per-super-point score table.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Instance segmentation by super-point merging.
    #[arg(long)]
    instances: Option<PathBuf>,
    /// Fraction of a super point's visible points a detection must cover to include it.
    #[arg(long, default_value_t = DEFAULT_INCLUSION_THRESHOLD)]
    inclusion_threshold: f64,
}

#[derive(Debug, Args)]
struct LiftArgs {
    /// Object directory.
    #[arg(long)]
    object: PathBuf,
    /// Use mask membership instead of boxes.
    #[arg(long)]
    mask: bool,
    /// Super points whose best score is not above this stay unlabeled.
    #[arg(long, default_value_t = DEFAULT_NULL_THRESHOLD)]
    null_threshold: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LossArg {
    Mriou,
    CrossEntropy,
    Both,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Directory whose subdirectories are training objects.
    #[arg(long)]
    objects: PathBuf,
    /// Directory of held-out objects, evaluated after training.
    #[arg(long)]
    validation: Option<PathBuf>,
    /// Training config (TOML); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Passes over the training objects.
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    /// Training objective.
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    /// Weight offset; a fresh network outputs this for every detection.
    #[arg(long)]
    tau: Option<f64>,
    /// Positional-encoding frequencies for the view direction and box center.
    #[arg(long)]
    pe_freqs: Option<usize>,
    /// Hidden layer width.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    mask: bool,
    /// Trained network parameters (JSON).
    #[arg(long)]
    checkpoint: PathBuf,
    /// Per-epoch loss and validation summary (JSON).
    #[arg(long)]
    report: PathBuf,
    /// Record wall-clock time in the report (breaks byte-identical reports).
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct LiftWeightedArgs {
    /// Trained network parameters (JSON).
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    object: PathBuf,
    #[arg(long)]
    mask: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Object directory holding the ground truth; repeat once per prediction.
    #[arg(long = "object", required = true)]
    objects: Vec<PathBuf>,
    /// Prediction file, paired with `--object` in order.
    #[arg(long = "pred", required = true)]
    preds: Vec<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ConfidenceArg {
    Raw,
    Normalized,
    Both,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    /// Directory whose subdirectories are objects.
    #[arg(long)]
    objects: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    mode: ConfidenceArg,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = DEFAULT_NULL_SCORE)]
    null_score: f64,
    #[arg(long)]
    mask: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = GradcheckConfig::default().instances)]
    instances: usize,
    #[arg(long, default_value_t = GradcheckConfig::default().step)]
    step: f64,
}

/// Parses `argv` (including the program name) and runs one subcommand.
/// Returns 0 on success, 1 on runtime failure and 2 on usage errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let json = cli.json;
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Error::InvalidArgument(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(out) => {
            let text = if json { out.json.to_string() } else { out.human };
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{text}");
            if out.failed {
                1
            } else {
                0
            }
        }
        Err(e) => {
            if json {
                eprintln!("{}", json!({ "error": error_kind(&e), "message": e.to_string() }));
            } else {
                eprintln!("error: {e}");
            }
            1
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::EmptyCloud => "empty_cloud",
        Error::NonFinite { .. } | Error::NonFiniteValue(_) => "non_finite",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::DimensionMismatch(_) => "dimension_mismatch",
        Error::InvalidDetection { .. } => "invalid_detection",
        Error::MissingMask { .. } => "missing_mask",
        Error::Parse { .. } => "parse",
        Error::Json { .. } => "json",
        Error::Io { .. } => "io",
        Error::Checkpoint(_) => "checkpoint",
        Error::Diverged { .. } => "diverged",
    }
}

struct Output {
    human: String,
    json: serde_json::Value,
    failed: bool,
}

impl Output {
    fn new(human: String, json: serde_json::Value) -> Self {
        Self { human, json, failed: false }
    }
}

fn dispatch(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Synth(a) => synth(a, cli.seed),
        Command::Visibility(a) => visibility(a),
        Command::Lift(a) => lift(a),
        Command::Train(a) => train_cmd(a, cli.seed),
        Command::LiftWeighted(a) => lift_weighted(a),
        Command::EvalSem(a) => eval_sem(a),
        Command::EvalInst(a) => eval_inst(a),
        Command::BaselineConf(a) => baseline(a),
        Command::Gradcheck(a) => gradcheck_cmd(a, cli.seed),
    }
}

fn membership_mode(mask: bool) -> MembershipMode {
    if mask {
        MembershipMode::Mask
    } else {
        MembershipMode::Box
    }
}

/// Loads an object directory (cloud, label table, cameras, visibility and
/// detections in the formats written by `synth`).
pub fn load_object(dir: &Path, mode: MembershipMode) -> Result<TrainObject> {
    let scene = load_scene(&dir.join(files::CLOUD), &dir.join(files::LABELS))?;
    let cameras = load_cameras(&dir.join(files::CAMERAS))?;
    let visibility = load_visibility(&dir.join(files::VISIBILITY))?;
    let detections = load_detections(&dir.join(files::DETECTIONS))?;
    TrainObject::new(scene, detections, cameras, visibility, mode)
}

/// Object directories directly below `dir`, in name order.
pub fn object_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.join(files::CLOUD).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::InvalidArgument(format!("{} holds no object directories", dir.display())));
    }
    Ok(dirs)
}

pub fn load_objects(dir: &Path, mode: MembershipMode) -> Result<Vec<TrainObject>> {
    object_dirs(dir)?.iter().map(|d| load_object(d, mode)).collect()
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes") + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn synth(a: &SynthArgs, seed: Option<u64>) -> Result<Output> {
    let base_seed = seed.unwrap_or(0);
    let mut spec = match (&a.preset, &a.spec) {
        (Some(name), _) => SynthSpec::preset(name, base_seed)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut spec = SynthSpec::from_toml(&text)?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            spec
        }
        (None, None) => return Err(Error::InvalidArgument("synth needs --preset or --spec".into())),
    };
    if a.adversarial {
        spec.noise = NoiseSpec::adversarial();
    }
    let n = &mut spec.noise;
    n.drop_rate = a.drop_rate.unwrap_or(n.drop_rate);
    n.spurious_rate = a.spurious_rate.unwrap_or(n.spurious_rate);
    n.box_jitter_px = a.jitter.unwrap_or(n.box_jitter_px);
    n.box_loosen_px = a.loosen.unwrap_or(n.box_loosen_px);
    n.feature_dim = a.feature_dim.unwrap_or(n.feature_dim);
    n.feature_snr = a.snr.unwrap_or(n.feature_snr);
    spec.views = a.views.unwrap_or(spec.views);
    spec.resolution = a.res.unwrap_or(spec.resolution);
    spec.masks &= !a.no_masks;
    spec.boundary_violating |= a.boundary_violating;
    if a.count == 0 {
        return Err(Error::InvalidArgument("--count must be at least 1".into()));
    }
    let mut written = Vec::new();
    for i in 0..a.count {
        let mut s = spec.clone();
        s.seed = spec.seed.wrapping_add(i as u64);
        let dir = if a.count == 1 { a.out.clone() } else { a.out.join(format!("object_{i:03}")) };
        let bundle = generate(&s)?;
        emit(&bundle, &dir)?;
        written.push(json!({
            "dir": dir.display().to_string(),
            "seed": s.seed,
            "points": bundle.scene.cloud.len(),
            "super_points": bundle.scene.partition.num_super_points(),
            "detections": bundle.detections.len(),
        }));
    }
    let human = format!("wrote {} object(s) to {}", a.count, a.out.display());
    Ok(Output::new(human, json!({ "objects": written })))
}

fn visibility(a: &VisibilityArgs) -> Result<Output> {
    let scene = load_scene(&a.cloud, &a.labels)?;
    let cameras = fixed_viewpoints_with(a.views, a.distance, a.res, a.res)?;
    let params = VisibilityParams {
        splat_radius: a.splat,
        depth_epsilon: a.eps,
    };
    let vis = compute_visibility(&scene.cloud, &cameras, params)?;
    save_visibility(&vis, &a.out)?;
    if let Some(path) = &a.cameras_out {
        save_cameras(&cameras, path)?;
    }
    let counts: Vec<usize> = (0..vis.num_views()).map(|k| vis.visible_count(k)).collect();
    let human = format!("visible points per view: {counts:?}");
    Ok(Output::new(human, json!({ "points": vis.num_points(), "visible_per_view": counts })))
}

/// Writes the labeling and optional score table and instances; returns a summary.
fn write_outputs(object: &TrainObject, labeling: &Labeling, scores: &ScoreMatrix, out: &OutputArgs) -> Result<serde_json::Value> {
    save_labeling(labeling.point_labels(), &out.out)?;
    if let Some(path) = &out.scores {
        save_scores_tsv(scores, &object.scene.labels, path)?;
    }
    let mut instances = None;
    if let Some(path) = &out.instances {
        let partition = &object.scene.partition;
        let adjacency = superpoint_adjacency(&object.scene.cloud, partition, default_adjacency_radius(&object.scene.cloud))?;
        let inclusion = inclusion_vectors(partition, &object.visibility, &object.membership, &object.detections, out.inclusion_threshold);
        let seg = merge_instances(labeling, &adjacency, &inclusion)?;
        save_instances(&seg.to_instance_set(partition, Some(seg.scores(scores))), path)?;
        instances = Some(seg.num_instances());
    }
    let labeled = labeling.point_labels().iter().filter(|l| l.is_some()).count();
    let miou = miou_hard(object.ground_truth(), labeling.point_labels())?;
    Ok(json!({
        "points": labeling.point_labels().len(),
        "labeled_points": labeled,
        "miou": miou,
        "instances": instances,
    }))
}

fn summary_line(v: &serde_json::Value) -> String {
    let mut s = format!("labeled {} of {} points, mIoU against stored labels {:.4}", v["labeled_points"], v["points"], v["miou"].as_f64().unwrap_or(0.0));
    if let Some(n) = v["instances"].as_u64() {
        s.push_str(&format!(", {n} instances"));
    }
    s
}

fn lift(a: &LiftArgs) -> Result<Output> {
    let object = load_object(&a.object, membership_mode(a.mask))?;
    let scores = score_unweighted(&object.scene.partition, &object.visibility, &object.membership, &object.detections, a.null_threshold)?;
    let labeling = assign_labels(&scores, &object.scene.partition, a.null_threshold);
    let v = write_outputs(&object, &labeling, &scores, &a.output)?;
    Ok(Output::new(summary_line(&v), v))
}

fn lift_weighted(a: &LiftWeightedArgs) -> Result<Output> {
    let object = load_object(&a.object, membership_mode(a.mask))?;
    let params = load_checkpoint_for(&a.checkpoint, object.detections.feature_dim)?;
    let weights = predict_weights(&params, &object)?;
    let scores = object.normalized_scores(&weights, params.null_score)?;
    let labeling = assign_labels(&scores, &object.scene.partition, 0.0);
    let v = write_outputs(&object, &labeling, &scores, &a.output)?;
    Ok(Output::new(summary_line(&v), v))
}

fn train_cmd(a: &TrainArgs, seed: Option<u64>) -> Result<Output> {
    let mut cfg = match &a.config {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::default(),
    };
    cfg.seed = seed.unwrap_or(cfg.seed);
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.lr = a.lr.unwrap_or(cfg.lr);
    cfg.tau = a.tau.unwrap_or(cfg.tau);
    cfg.pe_freqs = a.pe_freqs.unwrap_or(cfg.pe_freqs);
    cfg.hidden = a.hidden.unwrap_or(cfg.hidden);
    if let Some(o) = a.optimizer {
        cfg.optimizer = match o {
            OptimizerArg::Sgd => OptimizerKind::Sgd,
            OptimizerArg::Adam => OptimizerKind::Adam,
        };
    }
    if let Some(l) = a.loss {
        cfg.loss = match l {
            LossArg::Mriou => LossKind::Mriou,
            LossArg::CrossEntropy => LossKind::CrossEntropy,
            LossArg::Both => LossKind::Both,
        };
    }
    let mode = membership_mode(a.mask);
    let objects = load_objects(&a.objects, mode)?;
    let validation = match &a.validation {
        Some(dir) => load_objects(dir, mode)?,
        None => Vec::new(),
    };
    let (params, report) = if a.timing {
        train_timed(&objects, &validation, &cfg)?
    } else {
        train_with_validation(&objects, &validation, &cfg)?
    };
    save_checkpoint(&params, &a.checkpoint)?;
    save_report(&report, &a.report)?;
    let mut human = format!(
        "trained on {} objects for {} epochs: loss {:.4} -> {:.4}, train mIoU {:.4} -> {:.4}",
        objects.len(),
        cfg.epochs,
        report.loss[0],
        report.final_loss,
        report.train_miou[0],
        report.final_train_miou
    );
    if let Some(v) = report.validation_miou {
        human.push_str(&format!(", validation mIoU {v:.4}"));
    }
    Ok(Output::new(human, serde_json::to_value(&report).expect("report serializes")))
}

fn check_pairs(a: &EvalArgs) -> Result<()> {
    if a.objects.len() != a.preds.len() {
        return Err(Error::InvalidArgument(format!(
            "{} --object but {} --pred arguments",
            a.objects.len(),
            a.preds.len()
        )));
    }
    Ok(())
}

fn emit_result(value: serde_json::Value, human: String, out: &Option<PathBuf>) -> Result<Output> {
    if let Some(path) = out {
        write_json(path, &value)?;
    }
    Ok(Output::new(human, value))
}

fn eval_sem(a: &EvalArgs) -> Result<Output> {
    check_pairs(a)?;
    let mut objects = Vec::with_capacity(a.objects.len());
    for (dir, pred) in a.objects.iter().zip(&a.preds) {
        let scene = load_scene(&dir.join(files::CLOUD), &dir.join(files::LABELS))?;
        objects.push(SemanticEvalObject {
            category: scene.category.clone().unwrap_or_default(),
            label_names: scene.labels.clone(),
            ground_truth: scene.gt.clone(),
            predicted: load_labeling(pred)?,
        });
    }
    let result = evaluate_semantic(&objects)?;
    let mut human = String::new();
    for (category, miou) in &result.per_category {
        human.push_str(&format!("{category}: {miou:.4}\n"));
    }
    human.push_str(&format!("overall mIoU {:.4}", result.overall));
    emit_result(serde_json::to_value(&result).expect("result serializes"), human, &a.out)
}

fn eval_inst(a: &EvalArgs) -> Result<Output> {
    check_pairs(a)?;
    let mut objects = Vec::with_capacity(a.objects.len());
    for (dir, pred) in a.objects.iter().zip(&a.preds) {
        let scene = load_scene(&dir.join(files::CLOUD), &dir.join(files::LABELS))?;
        let predicted = load_instances(pred)?;
        let ground_truth = load_instances(&dir.join(files::GT_INSTANCES))?;
        if predicted.per_point.len() != scene.cloud.len() || ground_truth.per_point.len() != scene.cloud.len() {
            return Err(Error::DimensionMismatch(format!("{}: instance files do not cover the cloud", dir.display())));
        }
        objects.push(InstanceEvalObject {
            category: scene.category.clone().unwrap_or_default(),
            label_names: scene.labels.clone(),
            predicted,
            ground_truth,
        });
    }
    let result = map50(&objects);
    let human = format!("part-aware mAP50 {:.4}, part-agnostic mAP50 {:.4}", result.part_aware, result.part_agnostic);
    emit_result(serde_json::to_value(&result).expect("result serializes"), human, &a.out)
}

fn baseline(a: &BaselineArgs) -> Result<Output> {
    let objects = load_objects(&a.objects, membership_mode(a.mask))?;
    let modes: &[(ConfidenceMode, &str)] = match a.mode {
        ConfidenceArg::Raw => &[(ConfidenceMode::Raw, "raw")],
        ConfidenceArg::Normalized => &[(ConfidenceMode::Normalized, "normalized")],
        ConfidenceArg::Both => &[(ConfidenceMode::Raw, "raw"), (ConfidenceMode::Normalized, "normalized")],
    };
    let mut value = serde_json::Map::new();
    let mut human = Vec::new();
    let uniform = evaluate_uniform(&objects, a.tau, a.null_score)?;
    value.insert("uniform".into(), json!(uniform));
    human.push(format!("uniform weight mIoU {uniform:.4}"));
    for &(mode, name) in modes {
        let miou = evaluate_confidence_baseline(&objects, mode, a.tau, a.null_score)?;
        value.insert(name.into(), json!(miou));
        human.push(format!("{name} confidence mIoU {miou:.4}"));
    }
    emit_result(serde_json::Value::Object(value), human.join("\n"), &a.out)
}

fn gradcheck_cmd(a: &GradcheckArgs, seed: Option<u64>) -> Result<Output> {
    let cfg = GradcheckConfig {
        instances: a.instances,
        seed: seed.unwrap_or(0),
        step: a.step,
        ..GradcheckConfig::default()
    };
    let report = gradcheck::run(&cfg)?;
    let worst = report.end_to_end.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    let human = format!(
        "{}: {} instances, end-to-end max rel error {worst:.2e} (< {:.0e}), loss {:.2e}, network {:.2e} (< {:.0e})",
        if report.passed { "PASS" } else { "FAIL" },
        report.end_to_end.len(),
        cfg.tolerance,
        report.loss_max_rel_error,
        report.weightnet_max_rel_error,
        cfg.module_tolerance
    );
    let mut out = Output::new(human, serde_json::to_value(&report).expect("report serializes"));
    out.failed = !report.passed;
    Ok(out)
}
