//! The `art` command line.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::adjuster::{adjust_multistart, write_frames, write_trajectory_csv, AscentConfig, VerifierScorer};
use crate::dataforge::{build_dataset, store, synth, DatasetConfig, Split};
use crate::error::{ArtError, Result};
use crate::imaging::{self, composite, Placement};
use crate::pipeline::{gallery_build, retouch, Gallery, RetouchConfig};
use crate::trainer::{self, SceneBank, TrainConfig};
use crate::verifier::{load_checkpoint, save_checkpoint};

#[derive(Debug, Parser)]
#[command(name = "art", version, about = "Background selection and foreground placement with a consistency verifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize or index scene triples.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Index a directory of backgrounds for `retouch`.
    #[command(subcommand)]
    Gallery(GalleryCommand),
    /// Train a verifier on a manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split of a manifest.
    Eval(EvalArgs),
    /// Place a foreground on one background.
    Adjust(AdjustArgs),
    /// Pick backgrounds from a gallery and place the foreground on them.
    Retouch(RetouchArgs),
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Write synthetic scene triples to `<out>/<id>/`.
    Synth(SynthArgs),
    /// Build a manifest of positives and negatives from triples on disk.
    Build(BuildArgs),
}

#[derive(Debug, Subcommand)]
pub enum GalleryCommand {
    Build(GalleryBuildArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub triples: usize,
    #[arg(long)]
    pub seed: u64,
    /// Scene families to cycle through.
    #[arg(long, default_value_t = 4)]
    pub families: usize,
    /// Canvas side in pixels.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub root: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub test_frac: f64,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GalleryBuildArgs {
    #[arg(long)]
    pub root: PathBuf,
    /// Index file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// TOML training config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scene triple directory; defaults to the manifest's directory.
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Per-epoch metrics CSV; defaults to `<out>.metrics.csv`.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Training report JSON; defaults to `<out>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// One-row metrics CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Per-sample predictions CSV.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
}

#[derive(Debug, Args)]
pub struct AdjustArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// RGBA cut-out; transparent pixels are dropped.
    #[arg(long)]
    pub fg: PathBuf,
    #[arg(long)]
    pub bg: PathBuf,
    /// Indexed-color parsing map of the background.
    #[arg(long)]
    pub parsing: PathBuf,
    /// Overrides the config's restart count.
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    /// TOML ascent config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub traj: Option<PathBuf>,
    /// Directory for one composite per step of the winning restart.
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// JSON with the chosen placement and score.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RetouchArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub fg: PathBuf,
    /// Index written by `art gallery build`.
    #[arg(long)]
    pub gallery: PathBuf,
    #[arg(long, default_value_t = crate::pipeline::DEFAULT_K)]
    pub k: usize,
    /// Entries scored in stage 1; defaults to min(64, gallery size).
    #[arg(long)]
    pub sample_n: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    /// TOML ascent config for stage 2.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
}

/// What `art adjust --report` writes.
#[derive(Debug, Serialize)]
pub struct AdjustReport {
    pub seed: u64,
    pub placement: Placement,
    pub spatial_score: f64,
    pub content_score: f64,
    pub best_restart: usize,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Dataset(DatasetCommand::Synth(a)) => dataset_synth(a),
        Command::Dataset(DatasetCommand::Build(a)) => dataset_build(a),
        Command::Gallery(GalleryCommand::Build(a)) => gallery(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Adjust(a) => adjust(a),
        Command::Retouch(a) => retouch_cmd(a),
    }
}

fn dataset_synth(a: SynthArgs) -> Result<()> {
    let triples = synth::synth_corpus(a.triples, a.families, a.size, a.size, a.seed)?;
    std::fs::create_dir_all(&a.out).map_err(|e| ArtError::io(&a.out, e))?;
    for t in &triples {
        store::write_triple(&a.out, t)?;
    }
    eprintln!("wrote {} triples to {}", triples.len(), a.out.display());
    Ok(())
}

fn dataset_build(a: BuildArgs) -> Result<()> {
    let metas = store::read_metas(&a.root)?;
    let cfg = DatasetConfig {
        test_fraction: a.test_frac,
        ..DatasetConfig::default()
    };
    let manifest = build_dataset(&metas, &cfg, a.seed)?;
    store::write_manifest(&a.out, &manifest)?;
    let c = &manifest.header.counts;
    eprintln!(
        "{} samples ({} positive, {} spatial negative, {} content negative) from {} triples",
        c.total(),
        c.positive,
        c.spatial_negative,
        c.content_negative,
        metas.len()
    );
    Ok(())
}

fn gallery(a: GalleryBuildArgs) -> Result<()> {
    let index = gallery_build(&a.root, &a.out)?;
    for r in &index.rejections {
        eprintln!("rejected {}: {}", r.id, r.reason);
    }
    if index.entries.is_empty() {
        eprintln!("warning: no usable background/parsing pairs under {}", a.root.display());
    }
    eprintln!("indexed {} entries into {}", index.entries.len(), a.out.display());
    Ok(())
}

fn scene_root(root: Option<PathBuf>, manifest: &Path) -> PathBuf {
    root.unwrap_or_else(|| match manifest.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let manifest = store::read_manifest(&a.manifest)?;
    let bank = SceneBank::load(&scene_root(a.root, &a.manifest), &manifest, cfg.image_size)?;
    let (ckpt, report) = trainer::train(&manifest, &bank, &cfg, |m| {
        eprintln!(
            "epoch {:>3}  train {:.5}  test {:.5}  acc {:.4}  rmse {:.4}",
            m.epoch, m.train_loss, m.test_loss, m.accuracy, m.rmse
        )
    })?;
    save_checkpoint(&a.out, &ckpt)?;
    report.write_csv(&a.metrics.unwrap_or_else(|| with_suffix(&a.out, ".metrics.csv")))?;
    trainer::write_report_json(&a.report.unwrap_or_else(|| with_suffix(&a.out, ".report.json")), &report)?;
    eprintln!(
        "kept epoch {}: accuracy {:.4}, rmse {:.4}",
        report.best_epoch, report.accuracy, report.rmse
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.ckpt, None)?;
    let manifest = store::read_manifest(&a.manifest)?;
    let bank = SceneBank::load(&scene_root(a.root, &a.manifest), &manifest, ckpt.verifier.resolution())?;
    let split: Split = a.split.into();
    let e = trainer::evaluate(&ckpt, &manifest, &bank, split, trainer::LossWeights::new(a.lambda), None)?;
    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record(["split", "samples", "accuracy", "rmse", "loss"])?;
    w.write_record([
        format!("{:?}", a.split).to_lowercase(),
        e.predictions.len().to_string(),
        e.accuracy.to_string(),
        e.rmse.to_string(),
        e.loss.to_string(),
    ])?;
    w.flush().map_err(|err| ArtError::io(&a.out, err))?;
    if let Some(p) = &a.predictions {
        e.write_predictions_csv(p)?;
    }
    println!("accuracy {:.4}  rmse {:.4}  loss {:.5}  ({} samples)", e.accuracy, e.rmse, e.loss, e.predictions.len());
    Ok(())
}

fn ascent_config(path: Option<&Path>) -> Result<AscentConfig> {
    match path {
        Some(p) => AscentConfig::load(p),
        None => Ok(AscentConfig::default()),
    }
}

fn adjust(a: AdjustArgs) -> Result<()> {
    let mut cfg = ascent_config(a.config.as_deref())?;
    if let Some(k) = a.restarts {
        cfg.restarts = k;
    }
    let ckpt = load_checkpoint(&a.ckpt, None)?;
    let fg = imaging::read_foreground(&a.fg)?;
    let bg = imaging::read_rgb(&a.bg)?;
    let parsing = imaging::read_parsing(&a.parsing)?;
    let scorer = VerifierScorer::new(&ckpt.verifier, &fg, &bg, &parsing)?;
    let ms = adjust_multistart(&scorer, (bg.width() as f64, bg.height() as f64), &cfg, a.seed)?;
    imaging::write_rgb(&a.out, &composite(&bg, &fg, &ms.best)?)?;
    if let Some(p) = &a.traj {
        write_trajectory_csv(p, &ms.trajectories)?;
    }
    if let Some(dir) = &a.frames {
        write_frames(dir, &bg, &fg, &ms.trajectories[ms.best_restart])?;
    }
    let report = AdjustReport {
        seed: a.seed,
        placement: ms.best,
        spatial_score: ms.best_score,
        content_score: scorer.evaluate(&ms.best)?.y_c,
        best_restart: ms.best_restart,
    };
    if let Some(p) = &a.report {
        let text = serde_json::to_string_pretty(&report)?;
        std::fs::write(p, text + "\n").map_err(|e| ArtError::io(p, e))?;
    }
    println!(
        "cx {:.3}  cy {:.3}  scale {:.4}  spatial {:.6}  (restart {})",
        ms.best.cx, ms.best.cy, ms.best.scale, ms.best_score, ms.best_restart
    );
    Ok(())
}

fn retouch_cmd(a: RetouchArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.ckpt, None)?;
    let fg = imaging::read_foreground(&a.fg)?;
    let gallery = Gallery::load(&a.gallery)?;
    let cfg = RetouchConfig {
        sample_n: a.sample_n,
        k: a.k,
        seed: a.seed,
        ascent: ascent_config(a.config.as_deref())?,
    };
    let (image, mut report) = retouch(&ckpt.verifier, &fg, &gallery, &cfg)?;
    imaging::write_rgb(&a.out, &image)?;
    report.composite = Some(a.out.clone());
    report.write_json(&a.report)?;
    println!(
        "chose {} (content {:.4}, spatial {:.6}) from top {:?}",
        report.chosen_id,
        report.adjusted.iter().find(|c| c.id == report.chosen_id).map_or(f64::NAN, |c| c.y_c),
        report.chosen_spatial_score,
        report.top_k
    );
    Ok(())
}
