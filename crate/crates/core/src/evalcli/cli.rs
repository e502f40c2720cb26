//! `pgvcl` command line. Every stage reads what earlier stages left in the
//! output directory and writes its own artifacts next to them:
//!
//! ```text
//! <out>/config.txt             canonical key = value config of the run
//! <out>/data/                  manifest.json + video_NNN.pgvt
//! <out>/split.csv              labeled/unlabeled split of the training videos
//! <out>/pretrain.pgvt          stage-1 model      <out>/metrics_pretrain.csv
//! <out>/pseudo/pseudo_NNN.pgvt pseudo labels
//! <out>/shots.csv              detected shot boundaries per training video
//! <out>/contrast.pgvt          θ, θ^m             <out>/metrics_contrast.csv
//! <out>/finetune.pgvt          final model        <out>/metrics_finetune.csv
//! <out>/eval.txt               held-out metrics
//! <out>/metrics.csv            all stages (run-all)
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::configfile::read_config_file;
use super::metrics::{evaluate_video, MetricsReport};
use super::sweep::{run_sweep, GridPoint, SweepAxis};
use crate::contrast::Shots;
use crate::error::{Error, Result};
use crate::numerics::{Tensor, TensorFile};
use crate::pipeline::{
    detect_all_shots, load_contrast, load_segmentation, model_spec, run_contrast, run_finetune, run_pretrain,
    save_contrast, save_segmentation, CheckpointMeta, ExperimentConfig, Prepared, SegmentationModel, StageLog,
    METRICS_HEADER,
};
use crate::sampling::{equidistant_split, generate_pseudo_labels, pseudo_label_accuracy, DatasetSplit, PseudoLabels};
use crate::synthdata::{generate_dataset, read_dataset, write_dataset, MANIFEST_FILE};

#[derive(Parser, Debug)]
#[command(name = "pgvcl", version, about = "Pseudo-label guided cross-video pixel contrast, at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Flat `key = value` file; keys are SynthConfig and RunConfig field names.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory holding every stage's artifacts.
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Overrides both the dataset and the run seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic dataset.
    GenData(Common),
    /// Equidistant labeled/unlabeled split of the training videos.
    Split(Common),
    /// Stage 1: supervised pretraining on labeled frames.
    Pretrain(Common),
    /// Pseudo labels for every training frame from the pretrained model.
    PseudoLabel(Common),
    /// Histogram shot detection on the training videos.
    DetectShots(Common),
    /// Stage 2: pseudo-label guided cross-video contrast.
    Contrast(Common),
    /// Stage 3: OHEM fine-tuning of a fresh classifier.
    Finetune {
        #[command(flatten)]
        common: Common,
        /// Start from the pretrained backbone instead of the contrast one.
        #[arg(long)]
        baseline: bool,
    },
    /// Held-out metrics of the fine-tuned model (or of --checkpoint).
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Every stage in order, then eval.
    RunAll(Common),
    /// Ablation over pair counts (P{a}N{v}) or crop sizes (min-max).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "pair_counts")]
        axis: String,
        /// Comma-separated grid points; defaults to the axis's standard grid.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<String>,
    },
    /// Contrast-space pixel embeddings of the held-out video.
    ExportEmbeddings(Common),
}

struct Ctx {
    exp: ExperimentConfig,
    out: PathBuf,
    hash: String,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let mut exp = match &common.config {
            Some(p) => read_config_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = common.seed {
            exp = exp.with_seed(seed);
        }
        exp.validate()?;
        let hash = exp.hash();
        fs::create_dir_all(&common.out).map_err(|e| Error::io(&common.out, e))?;
        Ok(Self {
            exp,
            out: common.out.clone(),
            hash,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn require(&self, name: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::MissingArtifact(p))
        }
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }

    fn meta(&self, stage: &str, step: usize) -> CheckpointMeta {
        CheckpointMeta::new(stage, step, &self.hash)
    }

    fn prepared(&self) -> Result<Prepared> {
        self.require(&format!("data/{MANIFEST_FILE}"))?;
        let ds = read_dataset(&self.path("data"))?;
        let (train, eval) = ds.split_holdout(self.exp.run.holdout_video)?;
        let split_path = self.require("split.csv")?;
        let text = fs::read_to_string(&split_path).map_err(|e| Error::io(&split_path, e))?;
        let split = DatasetSplit::from_text(&text, &split_path.display().to_string())?;
        if split.total() != train.num_frames() {
            return Err(Error::Integrity(format!(
                "{} covers {} frames, training videos have {}",
                split_path.display(),
                split.total(),
                train.num_frames()
            )));
        }
        Ok(Prepared { train, eval, split })
    }

    fn load_model(&self, name: &str) -> Result<SegmentationModel> {
        let loaded = load_segmentation(&self.require(name)?, Some(&self.hash))?;
        warn(&loaded.warnings);
        Ok(loaded.model)
    }
}

fn warn(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn metrics_text(log: &StageLog) -> String {
    format!("{METRICS_HEADER}\n{}", log.to_text())
}

fn shots_text(shots: &[Shots]) -> String {
    let mut s = String::from("video,frames,boundaries\n");
    for (v, sh) in shots.iter().enumerate() {
        let b: Vec<String> = sh.boundaries().iter().map(usize::to_string).collect();
        let frames = sh.frames_of(sh.num_shots() - 1).end;
        let _ = writeln!(s, "{v},{frames},{}", b.join(";"));
    }
    s
}

fn parse_shots(text: &str, origin: &str) -> Result<Vec<Shots>> {
    let bad = |d: String| Error::Format {
        path: origin.to_string(),
        detail: d,
    };
    let mut out = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let mut parts = line.split(',');
        let (Some(v), Some(n), Some(b)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad(format!("bad line '{line}'")));
        };
        if v.parse::<usize>().ok() != Some(out.len()) {
            return Err(bad(format!("video index out of order in '{line}'")));
        }
        let n: usize = n.parse().map_err(|_| bad(format!("bad frame count in '{line}'")))?;
        let b: Vec<usize> = b
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| bad(format!("bad boundary in '{line}'"))))
            .collect::<Result<_>>()?;
        if b.windows(2).any(|w| w[0] >= w[1]) || b.iter().any(|&x| x == 0 || x >= n) {
            return Err(bad(format!("boundaries not increasing inside (0, {n}) in '{line}'")));
        }
        out.push(Shots::new(b, n));
    }
    Ok(out)
}

fn gen_data(ctx: &Ctx) -> Result<()> {
    let ds = generate_dataset(&ctx.exp.data)?;
    write_dataset(&ds, &ctx.path("data"))?;
    ctx.write("config.txt", &ctx.exp.to_text())?;
    println!("gen-data videos={} frames={} dir={}", ds.videos.len(), ds.num_frames(), ctx.path("data").display());
    Ok(())
}

fn split(ctx: &Ctx) -> Result<()> {
    ctx.require(&format!("data/{MANIFEST_FILE}"))?;
    let ds = read_dataset(&ctx.path("data"))?;
    let (train, _) = ds.split_holdout(ctx.exp.run.holdout_video)?;
    let split = equidistant_split(&train, ctx.exp.run.interval)?;
    ctx.write("split.csv", &split.to_text())?;
    println!(
        "split labeled={} unlabeled={} fraction={:.4}",
        split.labeled.len(),
        split.unlabeled.len(),
        split.labeled_fraction()
    );
    Ok(())
}

fn pretrain(ctx: &Ctx) -> Result<()> {
    let prep = ctx.prepared()?;
    let (model, outcome) = run_pretrain(&ctx.exp, &prep)?;
    save_segmentation(
        &ctx.path("pretrain.pgvt"),
        &model,
        Some(&outcome.velocity),
        &ctx.meta("pretrain", outcome.steps),
    )?;
    ctx.write("metrics_pretrain.csv", &metrics_text(&outcome.log))?;
    println!("pretrain steps={} miou={:.6}", outcome.steps, outcome.log.last_miou().unwrap_or(f64::NAN));
    Ok(())
}

fn pseudo_label(ctx: &Ctx) -> Result<()> {
    let prep = ctx.prepared()?;
    let model = ctx.load_model("pretrain.pgvt")?;
    let pseudo = generate_pseudo_labels(&model, &prep.split, &prep.train)?;
    pseudo.write(&ctx.path("pseudo"))?;
    println!("pseudo-label frames={} accuracy={:.6}", pseudo.len(), pseudo_label_accuracy(&pseudo, &prep.split, &prep.train));
    Ok(())
}

fn detect(ctx: &Ctx) -> Result<()> {
    let prep = ctx.prepared()?;
    let shots = detect_all_shots(&prep.train, &ctx.exp);
    ctx.write("shots.csv", &shots_text(&shots))?;
    let exact = shots
        .iter()
        .zip(&prep.train.videos)
        .filter(|(s, v)| s.boundaries() == v.true_shot_boundaries.as_slice())
        .count();
    println!("detect-shots videos={} exact_match={exact}", shots.len());
    Ok(())
}

fn contrast(ctx: &Ctx) -> Result<()> {
    let prep = ctx.prepared()?;
    let model = ctx.load_model("pretrain.pgvt")?;
    ctx.require(&format!("pseudo/{}", crate::sampling::pseudo_file_name(0)))?;
    let pseudo = PseudoLabels::read(&ctx.path("pseudo"), prep.train.videos.len())?;
    let shots_path = ctx.require("shots.csv")?;
    let text = fs::read_to_string(&shots_path).map_err(|e| Error::io(&shots_path, e))?;
    let shots = parse_shots(&text, &shots_path.display().to_string())?;
    let (pair, outcome) = run_contrast(&ctx.exp, &prep, &model.backbone, &pseudo, &shots)?;
    save_contrast(
        &ctx.path("contrast.pgvt"),
        &pair,
        Some(&outcome.velocity),
        &model_spec(&ctx.exp, &prep.train),
        &CheckpointMeta {
            optimizer: ctx.exp.run.contrast_optimizer.name().to_string(),
            ..ctx.meta("contrast", outcome.steps)
        },
    )?;
    ctx.write("metrics_contrast.csv", &metrics_text(&outcome.log))?;
    ctx.write("notes_contrast.txt", &outcome.log.notes.iter().map(|n| format!("{n}\n")).collect::<String>())?;
    let last = outcome.log.records.last().map_or(f32::NAN, |r| r.loss);
    println!("contrast steps={} skipped={} final_loss={last:.6}", outcome.steps, outcome.log.notes.len());
    Ok(())
}

fn finetune(ctx: &Ctx, baseline: bool) -> Result<()> {
    let prep = ctx.prepared()?;
    let backbone = if baseline {
        ctx.load_model("pretrain.pgvt")?.backbone
    } else {
        let (loaded, _) = load_contrast(&ctx.require("contrast.pgvt")?, Some(&ctx.hash))?;
        warn(&loaded.warnings);
        loaded.model.online.backbone
    };
    let (model, outcome) = run_finetune(&ctx.exp, &prep, &backbone)?;
    save_segmentation(
        &ctx.path("finetune.pgvt"),
        &model,
        Some(&outcome.velocity),
        &ctx.meta("finetune", outcome.steps),
    )?;
    ctx.write("metrics_finetune.csv", &metrics_text(&outcome.log))?;
    println!("finetune steps={} miou={:.6}", outcome.steps, outcome.log.last_miou().unwrap_or(f64::NAN));
    Ok(())
}

fn eval(ctx: &Ctx, checkpoint: Option<&Path>) -> Result<MetricsReport> {
    let prep = ctx.prepared()?;
    let model = match checkpoint {
        Some(p) => {
            let loaded = load_segmentation(p, Some(&ctx.hash))?;
            warn(&loaded.warnings);
            loaded.model
        }
        None => ctx.load_model("finetune.pgvt")?,
    };
    let report = evaluate_video(&model, prep.eval_video())?;
    ctx.write("eval.txt", &format!("{}\n", report.to_line()))?;
    println!("eval {}", report.to_line());
    Ok(report)
}

fn run_all(ctx: &Ctx) -> Result<()> {
    gen_data(ctx)?;
    split(ctx)?;
    pretrain(ctx)?;
    pseudo_label(ctx)?;
    detect(ctx)?;
    contrast(ctx)?;
    finetune(ctx, false)?;
    eval(ctx, None)?;
    let mut all = String::from(METRICS_HEADER);
    all.push('\n');
    for stage in ["pretrain", "contrast", "finetune"] {
        let p = ctx.path(&format!("metrics_{stage}.csv"));
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        all.extend(text.lines().skip(1).map(|l| format!("{l}\n")));
    }
    ctx.write("metrics.csv", &all)
}

fn sweep(ctx: &Ctx, axis: &str, grid: &[String]) -> Result<()> {
    let axis = SweepAxis::parse(axis)?;
    let points = if grid.is_empty() {
        axis.default_grid()
    } else {
        grid.iter().map(|g| GridPoint::parse(axis, g)).collect::<Result<_>>()?
    };
    let path = ctx.path(&format!("sweep_{}.txt", axis.name()));
    let mut file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let rows = run_sweep(&ctx.exp, &points, &mut file)?;
    for r in &rows {
        println!("{}", r.to_line());
    }
    Ok(())
}

fn export_embeddings(ctx: &Ctx) -> Result<()> {
    let prep = ctx.prepared()?;
    let (loaded, _) = load_contrast(&ctx.require("contrast.pgvt")?, Some(&ctx.hash))?;
    warn(&loaded.warnings);
    let net = &loaded.model.online;
    let video = prep.eval_video();
    let mut embeds = Vec::with_capacity(video.len());
    let mut labels = Vec::new();
    for frame in &video.frames {
        let (c, h, w) = frame.image.dims3()?;
        let e = net.forward_inference(&frame.image.clone().reshape(vec![1, c, h, w])?)?.item(0)?;
        let (_, fh, fw) = e.dims3()?;
        labels.extend(frame.label.resize_nearest(fh, fw).data().iter().map(|&l| f32::from(l)));
        embeds.push(e);
    }
    let stacked = Tensor::stack(&embeds.iter().collect::<Vec<_>>())?;
    let (t, _, fh, fw) = stacked.dims4()?;
    let mut file = TensorFile::new();
    file.push("embeddings", stacked);
    file.push("labels", Tensor::new(vec![t, fh, fw], labels)?);
    file.write(&ctx.path("embeddings.pgvt"))?;
    println!("export-embeddings frames={t} grid={fh}x{fw}");
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(c) => gen_data(&Ctx::new(c)?),
        Command::Split(c) => split(&Ctx::new(c)?),
        Command::Pretrain(c) => pretrain(&Ctx::new(c)?),
        Command::PseudoLabel(c) => pseudo_label(&Ctx::new(c)?),
        Command::DetectShots(c) => detect(&Ctx::new(c)?),
        Command::Contrast(c) => contrast(&Ctx::new(c)?),
        Command::Finetune { common, baseline } => finetune(&Ctx::new(common)?, *baseline),
        Command::Eval { common, checkpoint } => eval(&Ctx::new(common)?, checkpoint.as_deref()).map(|_| ()),
        Command::RunAll(c) => run_all(&Ctx::new(c)?),
        Command::Sweep { common, axis, grid } => sweep(&Ctx::new(common)?, axis, grid),
        Command::ExportEmbeddings(c) => export_embeddings(&Ctx::new(c)?),
    }
}

/// One machine-readable line: `error kind=<kind> message=<JSON string>`.
pub fn error_line(e: &Error) -> String {
    let msg = serde_json::to_string(&e.to_string()).unwrap_or_else(|_| "\"?\"".into());
    format!("error kind={} message={msg}", e.kind())
}

/// Parses `args` (program name first) and runs the subcommand; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let msg = serde_json::to_string(e.to_string().trim_end()).unwrap_or_else(|_| "\"?\"".into());
            eprintln!("error kind=usage message={msg}");
            return 2;
        }
        Err(e) => {
            // --help and --version
            let _ = e.print();
            return 0;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            1
        }
    }
}
