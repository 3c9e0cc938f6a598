use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use vsnet::corpus::{load_frame, load_midv_dir, save_gray, synth_video, write_midv_dir, SceneAttribute, SynthSpec};
use vsnet::harness::{
    cross_validate, evaluate, propagate_labels, train, DataSource, EvalOptions, PropagateParams, RunConfig, SynthSet,
};
use vsnet::model::{VsNet, VsNetConfig};
use vsnet::objectives::{benchmark, IouMode};

#[derive(Parser)]
#[command(name = "vsnet", version, about = "Video document saliency: data, training, evaluation, benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic document videos in the dataset layout.
    Synth(SynthArgs),
    /// Train a model; writes checkpoints, trainlog.csv and run.json.
    Train(TrainArgs),
    /// Evaluate a checkpoint; writes metrics.csv and saliency maps.
    Eval(EvalArgs),
    /// Time single-threaded inference.
    Bench(BenchArgs),
    /// k-fold cross-validation over videos.
    Cv(CvArgs),
    /// Refine a saliency image by seeded label propagation.
    Propagate(PropagateArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    videos: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 30)]
    frames: usize,
    /// Scene attributes cycled over the videos (TS, KS, HS, PS, CS).
    #[arg(long, value_delimiter = ',', default_value = "TS")]
    attributes: Vec<SceneAttribute>,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    blur: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// Run configuration (JSON); desk-scale defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory, replacing the configured data source.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// 256×256 frames, full-width network and batch 128 (ignored with --config).
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ImageFormat {
    Png,
    Pgm,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Run configuration or model configuration the checkpoint was trained
    /// with; defaults to run.json beside the checkpoint, then to shape
    /// inference.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Dataset directory; the run configuration's data source otherwise.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Apply label-propagation refinement to every saliency map.
    #[arg(long)]
    refine: bool,
    #[arg(long, value_enum, default_value = "mask")]
    iou: IouArg,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, value_enum, default_value = "png")]
    format: ImageFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum IouArg {
    Mask,
    Bbox,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Micro,
    Desk,
    Full,
}

#[derive(Args)]
struct BenchArgs {
    /// Checkpoint to time; a freshly initialized --model otherwise.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "desk")]
    model: Preset,
    /// Frame side in pixels.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long, default_value_t = 50)]
    repeats: usize,
    #[arg(long, default_value_t = vsnet::objectives::DEFAULT_WARMUP)]
    warmup: usize,
    /// Print the result as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct PropagateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    fg: f64,
    #[arg(long, default_value_t = 0.2)]
    bg: f64,
    #[arg(long, default_value_t = 50)]
    iterations: usize,
}

fn run_config(path: Option<&Path>, paper_scale: bool) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading run configuration {}", p.display())),
        None if paper_scale => Ok(RunConfig::paper_scale()),
        None => Ok(RunConfig::default()),
    }
}

/// Reads either a full run configuration or a bare model configuration.
fn model_config(path: &Path) -> Result<VsNetConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(run) = RunConfig::from_json(&text) {
        return Ok(run.model);
    }
    let config: VsNetConfig =
        serde_json::from_str(&text).with_context(|| format!("{} is neither a run nor a model configuration", path.display()))?;
    Ok(config)
}

fn load_model(args: &ModelArgs) -> Result<(VsNet, Option<RunConfig>)> {
    let beside = args.checkpoint.with_file_name("run.json");
    let (config, run) = match &args.config {
        Some(p) => (Some(model_config(p)?), RunConfig::load(p).ok()),
        None if beside.is_file() => {
            let run = RunConfig::load(&beside).with_context(|| format!("reading {}", beside.display()))?;
            (Some(run.model.clone()), Some(run))
        }
        None => (None, None),
    };
    let model = VsNet::load(&args.checkpoint, config)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    Ok((model, run))
}

fn synth(args: SynthArgs) -> Result<()> {
    let set = SynthSet {
        videos: args.videos,
        size: args.size,
        frames: args.frames,
        seed: args.seed,
        attributes: args.attributes,
        noise_sigma: args.noise,
        blur_length: args.blur,
    };
    let videos = set.generate()?;
    write_midv_dir(&args.out, &videos)?;
    println!("wrote {} videos of {} frames to {}", videos.len(), args.frames, args.out.display());
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let mut config = run_config(args.config.as_deref(), args.paper_scale)?;
    if let Some(data) = args.data {
        config.data = DataSource::Dir(data);
    }
    if let Some(epochs) = args.epochs {
        config.epochs = epochs;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.out_dir = Some(args.out.clone());
    let outcome = train(&config)?;
    let last = outcome.log.last().context("training ran no epochs")?;
    println!(
        "trained {} epochs: loss {:.5}, train IoU {:.4}, held-out IoU {}; best epoch {}",
        last.epoch,
        last.loss,
        last.train_iou,
        last.heldout_iou.map_or("-".into(), |v| format!("{v:.4}")),
        outcome.best_epoch
    );
    println!("artifacts in {}", args.out.display());
    Ok(())
}

fn eval_cmd(args: EvalArgs) -> Result<()> {
    let (model, run) = load_model(&args.model)?;
    let videos = match (&args.data, &run) {
        (Some(dir), _) => load_midv_dir(dir)?,
        (None, Some(run)) => run.data.load()?,
        (None, None) => bail!("no --data given and no run configuration to take the data source from"),
    };
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let options = EvalOptions {
        iou_mode: match args.iou {
            IouArg::Mask => IouMode::Mask,
            IouArg::Bbox => IouMode::Bbox,
        },
        threshold: args.threshold,
        alpha: run.as_ref().map_or(1.0, |r| r.alpha),
        refine: args.refine.then(PropagateParams::default),
        saliency_dir: Some(args.out.join("saliency")),
        image_ext: match args.format {
            ImageFormat::Png => "png".into(),
            ImageFormat::Pgm => "pgm".into(),
        },
        frames_per_video: None,
    };
    let report = evaluate(&model, &videos, &options)?;
    report.save_csv(&args.out.join("metrics.csv"))?;
    println!(
        "{} frames: mean IoU {:.4}, accuracy {:.4}, mean loss {:.5}",
        report.frames.len(),
        report.mean_iou(),
        report.accuracy,
        report.mean_loss
    );
    Ok(())
}

fn bench_cmd(args: BenchArgs) -> Result<()> {
    let mut model = match &args.checkpoint {
        Some(checkpoint) => {
            load_model(&ModelArgs {
                checkpoint: checkpoint.clone(),
                config: args.config.clone(),
            })?
            .0
        }
        None => VsNet::build(match args.model {
            Preset::Micro => VsNetConfig::micro(),
            Preset::Desk => VsNetConfig::desk_scale(),
            Preset::Full => VsNetConfig::full_scale(),
        })?,
    };
    if let Some(size) = args.size {
        if size != model.config().input_size {
            let config = VsNetConfig {
                input_size: size,
                ..model.config().clone()
            };
            model = VsNet::from_params(config, model.params().clone())?;
        }
    }
    let config = model.config();
    let video = synth_video(&SynthSpec::easy(config.input_size, config.arp_window, 0))?;
    let frames: Vec<_> = video.frames.iter().map(|f| f.to_tensor()).collect();
    let result = benchmark(&model, &frames, args.repeats, args.warmup)?;
    if args.json {
        let value = serde_json::json!({
            "fps": result.fps,
            "ms_per_step": result.ms_per_step,
            "repeats": args.repeats,
            "warmup": result.warmup,
            "size": config.input_size,
            "params": model.param_count(),
        });
        println!("{value}");
    } else {
        println!("size {0}×{0}, {1} parameters, {2} steps", config.input_size, model.param_count(), args.repeats);
        println!("fps: {:.2}", result.fps);
        println!("ms/step: {:.3}", result.ms_per_step);
    }
    Ok(())
}

fn cv_cmd(args: CvArgs) -> Result<()> {
    let mut config = run_config(args.config.as_deref(), false)?;
    if let Some(data) = args.data {
        config.data = DataSource::Dir(data);
    }
    if let Some(epochs) = args.epochs {
        config.epochs = epochs;
    }
    config.out_dir = Some(args.out.clone());
    let videos = config.data.load()?;
    let report = cross_validate(&config, &videos, args.folds)?;
    for fold in &report.folds {
        println!(
            "fold {}: IoU {:.4}, accuracy {:.4} ({})",
            fold.fold,
            fold.report.mean_iou(),
            fold.report.accuracy,
            fold.test_ids.join(", ")
        );
    }
    let (acc, acc_std) = report.accuracy();
    let (iou, iou_std) = report.mean_iou();
    println!("accuracy {acc:.4} ± {acc_std:.4}, IoU {iou:.4} ± {iou_std:.4}");
    Ok(())
}

fn propagate_cmd(args: PropagateArgs) -> Result<()> {
    let frame = load_frame(&args.input)?;
    let gray: Vec<f64> = frame.data.chunks_exact(3).map(|px| px[0]).collect();
    let params = PropagateParams {
        fg_thresh: args.fg,
        bg_thresh: args.bg,
        iterations: args.iterations,
    };
    let refined = propagate_labels(&gray, frame.width, frame.height, &params)?;
    if refined.no_seeds {
        log::warn!("no pixel reaches either threshold; output equals input");
    }
    save_gray(&refined.map, frame.width, frame.height, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Cv(a) => cv_cmd(a),
        Command::Propagate(a) => propagate_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
