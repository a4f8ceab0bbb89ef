//! Command-line interface.

use std::path::{Path, PathBuf};

use aerocamo_core::eval::{make_noise_patch, Condition};
use aerocamo_core::losses::ObjectnessMode;
use aerocamo_core::trainer::TransformPolicy;
use aerocamo_core::{PatchConfig, PrintableColorSet};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::annotations::AnnotationFormat;
use crate::config::RunConfig;
use crate::error::{AppError, Result};
use crate::manifest::{Dataset, Split};
use crate::run::RunDir;
use crate::{colors, patchio, pipeline, plot, report};

#[derive(Debug, Parser)]
#[command(name = "aerocamo", version, about = "Adversarial camouflage patches against aerial object detectors")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random stream of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Parent directory for run directories.
    #[arg(long, global = true, default_value = "runs")]
    pub out: PathBuf,
    /// Write artifacts to exactly this directory instead of a new
    /// timestamped one below `--out`.
    #[arg(long, global = true)]
    pub run_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset of aerial scenes with planes.
    SynthData(SynthArgs),
    /// Tile large annotated images and split them by source.
    Ingest(IngestArgs),
    /// Train the toy detector.
    TrainDetector(TrainDetectorArgs),
    /// Optimize an adversarial patch against a frozen detector.
    TrainPatch(TrainPatchArgs),
    /// Composite a patch onto every annotated object of a split.
    Apply(ApplyArgs),
    /// Score CLEAN, NOISE and PATCH conditions.
    Evaluate(EvaluateArgs),
    /// Overlay precision/recall curves of several reports.
    Plot(PlotArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SynthData(_) => "synth-data",
            Command::Ingest(_) => "ingest",
            Command::TrainDetector(_) => "train-detector",
            Command::TrainPatch(_) => "train-patch",
            Command::Apply(_) => "apply",
            Command::Evaluate(_) => "evaluate",
            Command::Plot(_) => "plot",
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub train_count: Option<usize>,
    #[arg(long)]
    pub test_count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory of source PNG images.
    #[arg(long)]
    pub images: PathBuf,
    /// Directory of annotation files named like the images.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<AnnotationFormat>,
    #[arg(long)]
    pub tile_size: Option<usize>,
    #[arg(long)]
    pub overlap: Option<usize>,
    #[arg(long)]
    pub target_class: Option<String>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainDetectorArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ObjectnessArg {
    Raw,
    TimesClass,
}

#[derive(Debug, Args)]
pub struct TrainPatchArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    /// Geometry preset: large, small, large-side, two-small, small-less-colorful.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Square patch side in pixels.
    #[arg(long)]
    pub patch_size: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum)]
    pub objectness: Option<ObjectnessArg>,
    /// Printable colors, one `R G B` triple per line.
    #[arg(long)]
    pub colors: Option<PathBuf>,
    /// `state.json` of an earlier run to continue from.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "train")]
    pub split: Split,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Randomized,
    Identity,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub patch: PathBuf,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConditionArg {
    Clean,
    Noise,
    Patch,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    /// Conditions to score; may be repeated.
    #[arg(long, value_enum, required = true)]
    pub condition: Vec<ConditionArg>,
    /// Patch for the PATCH condition; also sets the NOISE patch size.
    #[arg(long)]
    pub patch: Option<PathBuf>,
    /// Geometry to apply; defaults to the geometry the patch was trained with.
    #[arg(long)]
    pub preset: Option<String>,
    /// NOISE patch side when no patch is given.
    #[arg(long)]
    pub patch_size: Option<usize>,
    #[arg(long)]
    pub match_iou: Option<f64>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: Split,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Report JSON files, drawn in the given order.
    #[arg(long, required = true, num_args = 1..)]
    pub reports: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub format: PlotFormat,
    /// Output file stem inside the run directory.
    #[arg(long, default_value = "pr_curves")]
    pub name: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PlotFormat {
    Svg,
    Png,
    Both,
}

fn preset(name: &str) -> Result<PatchConfig> {
    PatchConfig::preset(name).ok_or_else(|| {
        AppError::Usage(format!(
            "unknown preset {name:?} (expected large, small, large-side, two-small or small-less-colorful)"
        ))
    })
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(AppError::MissingInput(path.to_path_buf()))
    }
}

fn policy(p: PolicyArg, cfg: &RunConfig) -> TransformPolicy {
    match p {
        PolicyArg::Identity => TransformPolicy::Identity,
        PolicyArg::Randomized => match &cfg.evaluation.transform {
            TransformPolicy::Randomized(r) => TransformPolicy::Randomized(*r),
            TransformPolicy::Identity => TransformPolicy::Randomized(cfg.patch_training.transform_ranges),
        },
    }
}

/// Runs one command. Returns the run directory.
pub fn run(cli: &Cli, args: Vec<String>) -> Result<PathBuf> {
    let g = &cli.global;
    if let Some(c) = &g.config {
        require(c)?;
    }
    let mut cfg = RunConfig::load_or_default(g.config.as_deref())?;
    let seed = g.seed.unwrap_or(cfg.seed);
    cfg.set_seed(seed);

    // Validate inputs and fold flags into the configuration before any
    // directory is created.
    match &cli.command {
        Command::SynthData(a) => {
            if let Some(n) = a.train_count {
                cfg.synth.train_count = n;
            }
            if let Some(n) = a.test_count {
                cfg.synth.test_count = n;
            }
        }
        Command::Ingest(a) => {
            require(&a.images)?;
            require(&a.labels)?;
            let i = &mut cfg.ingest;
            i.format = a.format.unwrap_or(i.format);
            i.tile_size = a.tile_size.unwrap_or(i.tile_size);
            i.overlap = a.overlap.unwrap_or(i.overlap);
            i.test_fraction = a.test_fraction.unwrap_or(i.test_fraction);
            if let Some(t) = &a.target_class {
                i.target_class = t.clone();
            }
        }
        Command::TrainDetector(a) => {
            require(&a.manifest)?;
            let d = &mut cfg.detector_training;
            d.epochs = a.epochs.unwrap_or(d.epochs);
            d.batch_size = a.batch_size.unwrap_or(d.batch_size);
            d.learning_rate = a.learning_rate.unwrap_or(d.learning_rate);
        }
        Command::TrainPatch(a) => {
            require(&a.manifest)?;
            require(&a.weights)?;
            if let Some(p) = &a.colors {
                require(p)?;
            }
            if let Some(p) = &a.resume {
                require(p)?;
            }
            let t = &mut cfg.patch_training;
            if let Some(p) = &a.preset {
                t.patch_config = preset(p)?;
            }
            t.epochs = a.epochs.unwrap_or(t.epochs);
            t.batch_size = a.batch_size.unwrap_or(t.batch_size);
            t.learning_rate = a.learning_rate.unwrap_or(t.learning_rate);
            if let Some(s) = a.patch_size {
                t.patch_size = (s, s);
            }
            t.weights.alpha = a.alpha.unwrap_or(t.weights.alpha);
            t.weights.beta = a.beta.unwrap_or(t.weights.beta);
            t.weights.gamma = a.gamma.unwrap_or(t.weights.gamma);
            if let Some(o) = a.objectness {
                t.objectness = match o {
                    ObjectnessArg::Raw => ObjectnessMode::Raw,
                    ObjectnessArg::TimesClass => ObjectnessMode::TimesClass,
                };
            }
            t.validate()?;
        }
        Command::Apply(a) => {
            require(&a.manifest)?;
            require(&a.patch)?;
        }
        Command::Evaluate(a) => {
            require(&a.manifest)?;
            require(&a.weights)?;
            if let Some(p) = &a.patch {
                require(p)?;
            } else if a.condition.contains(&ConditionArg::Patch) {
                return Err(AppError::Usage("--condition patch needs --patch".into()));
            }
            if let Some(m) = a.match_iou {
                cfg.evaluation.match_iou = m;
            }
            if let Some(p) = a.policy {
                cfg.evaluation.transform = policy(p, &cfg);
            }
        }
        Command::Plot(a) => {
            for r in &a.reports {
                require(r)?;
            }
        }
    }

    let name = cli.command.name();
    let run = RunDir::create(&g.out, name, seed, g.run_dir.as_deref())?;
    run.write_snapshot(&cfg, name, args)?;
    let dir = run.path();

    match &cli.command {
        Command::SynthData(_) => {
            pipeline::synth_data(&cfg.synth, seed, dir)?;
        }
        Command::Ingest(a) => {
            pipeline::ingest(&a.images, &a.labels, &cfg.ingest, seed, dir)?;
        }
        Command::TrainDetector(a) => {
            let dataset = Dataset::open(&a.manifest)?;
            let rep = pipeline::train_detector(&dataset, &cfg.detector, &cfg.detector_training, dir)?;
            if let Some(ap) = rep.heldout_ap {
                println!("heldout_ap={ap:.4} converged={}", rep.converged);
            }
        }
        Command::TrainPatch(a) => {
            let (det, samples) = pipeline::load_detector_and_split(&a.weights, &a.manifest, a.split)?;
            let colors = match &a.colors {
                Some(p) => colors::load_colors(p)?,
                None => PrintableColorSet::default(),
            };
            let resume = a.resume.as_deref().map(pipeline::load_state).transpose()?;
            let run_id = pipeline::config_id(&cfg.to_toml());
            let out = pipeline::train_patch(&samples, &det, &cfg.patch_training, &colors, &run_id, dir, resume)?;
            if let Some(last) = out.log.last() {
                println!("final_l_obj={:.6} total={:.6}", last.l_obj, last.total);
            }
        }
        Command::Apply(a) => {
            let dataset = Dataset::open(&a.manifest)?;
            let patch = patchio::load_patch(&a.patch)?;
            let pc = match &a.preset {
                Some(p) => preset(p)?,
                None => patch.meta.config.unwrap_or(cfg.patch_training.patch_config),
            };
            let pol = policy(a.policy.unwrap_or(PolicyArg::Randomized), &cfg);
            pipeline::apply(&dataset, a.split, &patch, &pc, &pol, seed, dir)?;
        }
        Command::Evaluate(a) => {
            let (det, samples) = pipeline::load_detector_and_split(&a.weights, &a.manifest, a.split)?;
            let patch = a.patch.as_deref().map(patchio::load_patch).transpose()?;
            let pc = match &a.preset {
                Some(p) => preset(p)?,
                None => patch.as_ref().and_then(|p| p.meta.config).unwrap_or(cfg.patch_training.patch_config),
            };
            let (h, w) = match (&patch, a.patch_size) {
                (_, Some(s)) => (s, s),
                (Some(p), None) => (p.height(), p.width()),
                (None, None) => cfg.patch_training.patch_size,
            };
            let noise = make_noise_patch(h, w, seed)?;
            let specs: Vec<pipeline::ConditionSpec> = a
                .condition
                .iter()
                .map(|c| {
                    let (condition, p) = match c {
                        ConditionArg::Clean => (Condition::Clean, None),
                        ConditionArg::Noise => (Condition::Noise, Some(&noise)),
                        ConditionArg::Patch => (Condition::Patch, patch.as_ref()),
                    };
                    pipeline::ConditionSpec { condition, patch: p, patch_config: pc }
                })
                .collect();
            let reports = pipeline::evaluate(&det, &samples, &specs, &cfg.evaluation)?;
            for r in &reports {
                let stem = format!("report_{}", r.condition.as_str().to_ascii_lowercase());
                report::save_report(dir, &stem, r)?;
                println!("{}_ap={:.6}", r.condition.as_str().to_ascii_lowercase(), r.ap);
            }
        }
        Command::Plot(a) => {
            let reports = a.reports.iter().map(|p| report::load_report(p)).collect::<Result<Vec<_>>>()?;
            let formats: &[&str] = match a.format {
                PlotFormat::Svg => &["svg"],
                PlotFormat::Png => &["png"],
                PlotFormat::Both => &["svg", "png"],
            };
            for ext in formats {
                plot::save_plot(&dir.join(format!("{}.{ext}", a.name)), &reports)?;
            }
        }
    }
    Ok(dir.to_path_buf())
}
