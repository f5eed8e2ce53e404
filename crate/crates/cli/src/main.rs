use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lesionseg::camloc::{cam_binarize, cam_map, normalize_upsample, CamMethod, CamTensors, DEFAULT_CAM_THRESHOLD};
use lesionseg::enhance::{ace_enhance, auto_stride, AceParams};
use lesionseg::eval::{evaluate_dir, EvalOptions, Hd95Mode, DEFAULT_RESAMPLES};
use lesionseg::fuse::{fuse_regions, make_prompt, PromptKind, DEFAULT_POINT_COUNT};
use lesionseg::imagecore::{
    load_mask_png, load_png, read_tensor, save_gray8_png, save_image_png, save_mask_png, RegionSet,
};
use lesionseg::morphseg::{morph_segment, BinarizeOperand, MorphFilterParams, MorphParams};
use lesionseg::pipeline::{
    emit_overlays, ingest_busi, run_pipeline, DatasetManifest, DirProvider, MockProvider, PipelineConfig, Provider,
    RunOptions, SEED_ENV,
};
use lesionseg::refine::select_final;
use lesionseg::synth::write_phantom_dataset;
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(
    name = "lesionseg",
    version,
    about = "Weakly supervised breast-lesion segmentation pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Automatic colour equalization of one image.
    Enhance(EnhanceArgs),
    /// Suspicious-region extraction by clustering and shape filtering.
    Morphseg(MorphsegArgs),
    /// Class activation map from exported activation and gradient tensors.
    Camloc(CamlocArgs),
    /// Fuse morphology and CAM regions into a segmenter prompt.
    Fuse(FuseArgs),
    /// Hole-fill a segmenter mask, falling back to the fused region.
    Refine(RefineArgs),
    /// Dice, IoU and HD95 with bootstrap intervals over two mask folders.
    Eval(EvalArgs),
    /// Run every stage over a dataset.
    Pipeline(PipelineArgs),
    /// Build a manifest from a class-folder dataset.
    Ingest(IngestArgs),
    /// Draw contour overlays for a completed run.
    Overlays(OverlaysArgs),
    /// Write a synthetic phantom dataset.
    Synth(SynthArgs),
    /// Fill a provider directory with oracle tensors and masks from ground truth.
    MockProviders(MockProvidersArgs),
}

#[derive(Args)]
struct EnhanceArgs {
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5.0)]
    alpha: f32,
    /// Neighbour sampling stride; 0 derives it from the image size.
    #[arg(long, default_value_t = 0)]
    stride: usize,
}

#[derive(Args)]
struct MorphsegArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 90)]
    threshold: u8,
    #[arg(long, default_value_t = 0.2)]
    min_ratio: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    bottom_band: f64,
    #[arg(long, default_value_t = 0.1)]
    top_band: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5.0)]
    alpha: f32,
    #[arg(long, default_value_t = 0)]
    stride: usize,
    /// Image the threshold applies to: membership, enhanced or raw.
    #[arg(long, default_value = "membership")]
    operand: String,
    /// Label PNG, region `i` drawn with gray level `i + 1`.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    regions: PathBuf,
}

#[derive(Args)]
struct CamlocArgs {
    #[arg(long)]
    activations: PathBuf,
    #[arg(long)]
    gradients: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CAM_THRESHOLD)]
    threshold: f64,
    /// layercam or gradcam.
    #[arg(long, default_value = "layercam")]
    method: String,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    regions: PathBuf,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long)]
    morph: PathBuf,
    #[arg(long)]
    cam: PathBuf,
    /// box or points.
    #[arg(long, default_value = "box")]
    prompt_kind: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_POINT_COUNT)]
    points: usize,
    /// Defaults to the stem of `--out`.
    #[arg(long)]
    image_id: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the fused region as a region table.
    #[arg(long)]
    region: Option<PathBuf>,
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long)]
    mask: PathBuf,
    /// Region table whose first region replaces an empty mask.
    #[arg(long)]
    fallback: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// max-directed or pooled.
    #[arg(long, default_value = "max-directed")]
    hd95_mode: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Class-folder dataset root.
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    data: Option<PathBuf>,
    /// Manifest JSONL instead of a dataset root.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Keep only the image ids listed in this file.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, required_unless_present = "mock_providers")]
    providers: Option<PathBuf>,
    /// Use oracle providers built from the ground truth.
    #[arg(long, conflicts_with = "providers")]
    mock_providers: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set cam_threshold=180`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Replaces every seed in the config.
    #[arg(long, env = SEED_ENV)]
    seed: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    force: bool,
    #[arg(long)]
    overlays: bool,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OverlaysArgs {
    run: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value_t = 8.0)]
    snr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct MockProvidersArgs {
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    data: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Parses a kebab/lowercase enum name through its serde representation.
fn parse_name<T: DeserializeOwned>(what: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .with_context(|| format!("unknown {what} {value:?}"))
}

fn read_regions(path: &Path) -> Result<RegionSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn stride_for(stride: usize, width: usize, height: usize) -> usize {
    if stride == 0 {
        auto_stride(width, height)
    } else {
        stride
    }
}

fn enhance(a: EnhanceArgs) -> Result<()> {
    let img = load_png::<f32>(&a.input)?;
    let params = AceParams {
        alpha: a.alpha,
        sample_stride: stride_for(a.stride, img.width(), img.height()),
    };
    save_image_png(&ace_enhance(&img, &params), &a.out)?;
    Ok(())
}

fn morphseg(a: MorphsegArgs) -> Result<()> {
    let img = load_png::<f32>(&a.input)?;
    let (w, h) = (img.width(), img.height());
    let filter = MorphFilterParams {
        bin_threshold: a.threshold,
        bottom_band: a.bottom_band,
        top_band: a.top_band,
        min_ratio: a.min_ratio,
    };
    filter.validate()?;
    let params = MorphParams {
        ace: AceParams {
            alpha: a.alpha,
            sample_stride: stride_for(a.stride, w, h),
        },
        k: a.k,
        seed: a.seed,
        filter,
        operand: parse_name::<BinarizeOperand>("operand", &a.operand)?,
    };
    let regions = morph_segment(&img, &params);
    if regions.len() > 255 {
        eprintln!("{} regions; label levels saturate at 255", regions.len());
    }
    let mut levels = vec![0u8; w * h];
    for (i, r) in regions.iter().enumerate() {
        for &(row, col) in r.pixels() {
            levels[row * w + col] = (i + 1).min(255) as u8;
        }
    }
    save_gray8_png(w, h, &levels, &a.labels)?;
    write_json(&a.regions, &RegionSet::new(w, h, &regions))?;
    println!("{} regions", regions.len());
    Ok(())
}

fn camloc(a: CamlocArgs) -> Result<()> {
    let tensors = CamTensors::<f32>::from_files(&read_tensor(&a.activations)?, &read_tensor(&a.gradients)?)?;
    let method: CamMethod = parse_name("CAM method", &a.method)?;
    let heatmap = normalize_upsample(&cam_map(&tensors, method), a.width, a.height)?;
    heatmap.save_png(&a.out)?;
    let regions = cam_binarize(&heatmap, a.threshold as f32);
    write_json(&a.regions, &RegionSet::new(a.width, a.height, &regions))?;
    println!("{} regions", regions.len());
    Ok(())
}

fn fuse(a: FuseArgs) -> Result<()> {
    let (morph, cam) = (read_regions(&a.morph)?, read_regions(&a.cam)?);
    if (morph.width, morph.height) != (cam.width, cam.height) {
        bail!(
            "region tables disagree on size: {}x{} vs {}x{}",
            morph.width,
            morph.height,
            cam.width,
            cam.height
        );
    }
    let fused = fuse_regions(&morph.to_regions()?, &cam.to_regions()?)?;
    let kind: PromptKind = parse_name("prompt kind", &a.prompt_kind)?;
    let id = match a.image_id {
        Some(id) => id,
        None => a
            .out
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let prompt = make_prompt(&fused, &id, kind, a.seed, a.points);
    fs::write(&a.out, prompt.to_json()? + "\n").with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(path) = &a.region {
        write_json(
            path,
            &RegionSet::new(morph.width, morph.height, std::slice::from_ref(&fused.chosen)),
        )?;
    }
    println!("fused from {:?}, area {}", fused.source, fused.chosen.area());
    Ok(())
}

fn refine(a: RefineArgs) -> Result<()> {
    let mask = load_mask_png(&a.mask)?;
    let table = read_regions(&a.fallback)?;
    let Some(fallback) = table.to_regions()?.into_iter().next() else {
        bail!("{} holds no region", a.fallback.display());
    };
    let (out, source) = select_final(&mask, &fallback)?;
    save_mask_png(&out, &a.out)?;
    if let Some(path) = &a.report {
        write_json(path, &source)?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let opts = EvalOptions {
        n_bootstrap: a.bootstrap,
        seed: a.seed,
        hd95_mode: parse_name::<Hd95Mode>("HD95 mode", &a.hd95_mode)?,
    };
    let report = evaluate_dir(&a.pred, &a.gt, &opts)?;
    report.write_json(&a.out)?;
    if let Some(csv) = &a.csv {
        report.write_csv(csv)?;
    }
    println!(
        "{} images  dice {:.4} [{:.4}, {:.4}]  iou {:.4}  hd95 {:.2}",
        report.n_images, report.dice.mean, report.dice.lower, report.dice.upper, report.iou.mean, report.hd95.mean
    );
    Ok(())
}

fn load_manifest(data: Option<&Path>, manifest: Option<&Path>, split: Option<&Path>) -> Result<DatasetManifest> {
    let m = match (data, manifest) {
        (Some(root), _) => ingest_busi(root)?,
        (None, Some(path)) => DatasetManifest::load(path)?,
        (None, None) => bail!("either --data or --manifest is required"),
    };
    match split {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(m.filter_split(&text)?)
        }
        None => Ok(m),
    }
}

fn pipeline(a: PipelineArgs) -> Result<()> {
    let mut config = match &a.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    for kv in &a.overrides {
        config.set(kv)?;
    }
    config.apply_seed_env(a.seed.as_deref())?;
    let manifest = load_manifest(a.data.as_deref(), a.manifest.as_deref(), a.split.as_deref())?;
    let provider: Box<dyn Provider> = match &a.providers {
        Some(dir) => Box::new(DirProvider::new(dir)?),
        None => Box::new(MockProvider::from_manifest(
            &manifest,
            config.resize_width,
            config.resize_height,
        )?),
    };
    let opts = RunOptions {
        jobs: a.jobs,
        force: a.force,
    };
    let out = run_pipeline(&manifest, &config, provider.as_ref(), &a.out, opts)?;
    let r = &out.report;
    println!("{}", out.run_dir.display());
    println!(
        "{} images ({} cached)  dice {:.4} [{:.4}, {:.4}]  iou {:.4} [{:.4}, {:.4}]  hd95 {:.2} [{:.2}, {:.2}]",
        r.n_images,
        out.reused,
        r.dice.mean,
        r.dice.lower,
        r.dice.upper,
        r.iou.mean,
        r.iou.lower,
        r.iou.upper,
        r.hd95.mean,
        r.hd95.lower,
        r.hd95.upper
    );
    let flagged = r.per_image.iter().filter(|s| !s.flags.is_empty()).count();
    if flagged > 0 {
        println!("{flagged} images flagged; see report.csv");
    }
    if a.overlays {
        emit_overlays(&out.run_dir)?;
    }
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let manifest = load_manifest(Some(&a.data), None, a.split.as_deref())?;
    manifest.write(&a.out)?;
    println!("{} entries", manifest.len());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Enhance(a) => enhance(a),
        Command::Morphseg(a) => morphseg(a),
        Command::Camloc(a) => camloc(a),
        Command::Fuse(a) => fuse(a),
        Command::Refine(a) => refine(a),
        Command::Eval(a) => eval(a),
        Command::Pipeline(a) => pipeline(a),
        Command::Ingest(a) => ingest(a),
        Command::Overlays(a) => {
            let written = emit_overlays(&a.run)?;
            println!("{} overlays", written.len());
            Ok(())
        }
        Command::Synth(a) => {
            write_phantom_dataset(&a.out, a.n, a.size, a.snr, a.seed)?;
            println!("{} phantoms in {}", a.n, a.out.join("benign").display());
            Ok(())
        }
        Command::MockProviders(a) => {
            let manifest = load_manifest(a.data.as_deref(), a.manifest.as_deref(), None)?;
            MockProvider::from_manifest(&manifest, a.width, a.height)?.write_dir(&a.out)?;
            println!("{} images", manifest.len());
            Ok(())
        }
    }
}
