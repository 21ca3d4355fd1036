//! `rxnseq`: batch workflows over reaction diagram datasets.
//!
//! Exit status: 0 success, 1 validation or parse failure, 2 usage error, 3 external
//! process failure.

mod render;

use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use rxnseq::augment::{
    augment_sample, sample_rng, AugmentConfig, AugmentError, DirImageStore, RasterImage,
};
use rxnseq::bridge::{open_bridge, BridgeConfig, BridgeError};
use rxnseq::codec::{encode, read_token_lines, write_token_lines, OrderingPolicy, TokenLine};
use rxnseq::dataset_io::{self, convert, write_atomic, DatasetError};
use rxnseq::decoder::{
    greedy_decode, replay_oracle, DecodeConfig, DecodeError, DEFAULT_MAX_LENGTH,
};
use rxnseq::metrics::{evaluate, MatchConfig, MatchMode};
use rxnseq::schema::{Dataset, DiagramRecord, ReactionStructure, Style};
use rxnseq::Vocabulary;

#[derive(Debug, thiserror::Error)]
enum CliError {
    /// Bad or inconsistent input data.
    #[error("{0}")]
    Data(String),
    /// Flags that parse but cannot be honoured together.
    #[error("{0}")]
    Usage(String),
    /// The external model process failed.
    #[error("{0}")]
    External(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Data(_) => 1,
            CliError::Usage(_) => 2,
            CliError::External(_) => 3,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<AugmentError> for CliError {
    fn from(e: AugmentError) -> Self {
        CliError::Data(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "rxnseq", version, about = "Reaction diagram sequence toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a dataset into a token file, one sequence per diagram.
    Encode(EncodeArgs),
    /// Decode every diagram of a dataset with a model process or replayed token targets.
    Decode(DecodeArgs),
    /// Score predictions against ground truth.
    Eval(EvalArgs),
    /// Write augmented training samples.
    Augment(AugmentArgs),
    /// Print per-style dataset statistics and the reactions-per-diagram histogram.
    Stats(StatsArgs),
    /// Assign diagrams to cross-validation folds.
    Split(SplitArgs),
    /// Draw entity boxes onto the images, one overlay per reaction.
    Render(RenderArgs),
    /// Convert published ground-truth files into the dataset schema.
    #[command(long_about = CONVERT_HELP)]
    Convert(ConvertArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    Annotated,
    Reading,
    Random,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "annotated")]
    order: Order,
    /// Seed for the random order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    n_bins: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    /// Shell command starting a model process that speaks the JSON-lines logit protocol.
    #[arg(long, required_unless_present = "replay", conflicts_with = "replay")]
    model_cmd: Option<String>,
    /// Token file whose sequences are replayed as logits.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_LENGTH)]
    max_length: usize,
    #[arg(long, default_value_t = 2000)]
    n_bins: u32,
    /// Image directory passed to the model process (default: the dataset's directory).
    #[arg(long)]
    images: Option<PathBuf>,
    /// Seconds to wait for the model process to become ready.
    #[arg(long, default_value_t = 30.0)]
    handshake_timeout: f64,
    /// Seconds to wait for each step's logits.
    #[arg(long, default_value_t = 10.0)]
    step_timeout: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Hard,
    Soft,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, value_enum, default_value = "hard")]
    mode: Mode,
    /// Add one block of rows per diagram style.
    #[arg(long)]
    by_style: bool,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
    #[arg(long, default_value_t = 0.5)]
    iou_threshold: f64,
    /// Count IoU equal to the threshold as a match.
    #[arg(long)]
    inclusive: bool,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    num: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    compose_probability: f64,
    #[arg(long, default_value_t = 6)]
    max_compose: usize,
    #[arg(long, default_value_t = 0.5)]
    decay_ratio: f64,
    #[arg(long, default_value_t = 5.0)]
    rotation_degrees: f64,
    #[arg(long, default_value_t = 0.5)]
    hflip_probability: f64,
    #[arg(long, default_value_t = 0.1)]
    vflip_probability: f64,
    #[arg(long, default_value_t = 0.2)]
    color_jitter: f64,
    #[arg(long, default_value_t = 1333)]
    target_size: u32,
    /// Padding color as `R,G,B`.
    #[arg(long, default_value = "255,255,255", value_parser = parse_color)]
    pad_color: [u8; 3],
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Deal each style across the folds separately.
    #[arg(long)]
    stratify_by_style: bool,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Draw these predicted reactions instead of the dataset's own.
    #[arg(long)]
    pred: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoxFormatArg {
    Xywh,
    Xyxy,
}

const CONVERT_HELP: &str = "\
Convert published ground-truth files into the dataset schema.

Input is a JSON object with an \"images\" list (or the bare list). Per image:
  id, file_name, width, height   copied
  diagram_type | style           single, multiple, tree, graph (or *-line spellings)
  bboxes | entities              entities; \"id\" or the list position becomes the entity id
    bbox                         [x, y, w, h] (see --box-format), clipped to the image
    category_id | category       1 mol, 2 txt, 3 idt; or the strings mol/txt/idt
  reactions                      reactants / conditions / products id lists

The result is validated before it is written.";

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "xywh")]
    box_format: BoxFormatArg,
    /// Style for images that carry none.
    #[arg(long, value_parser = parse_style_arg)]
    default_style: Option<Style>,
    /// Drop entities of unknown category instead of failing.
    #[arg(long)]
    skip_unknown_categories: bool,
}

fn parse_color(s: &str) -> std::result::Result<[u8; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [r, g, b] = parts[..] else {
        return Err("expected R,G,B".into());
    };
    let c = |v: &str| v.parse::<u8>().map_err(|e| format!("{v:?}: {e}"));
    Ok([c(r)?, c(g)?, c(b)?])
}

fn parse_style_arg(s: &str) -> std::result::Result<Style, String> {
    convert::parse_style(s).ok_or_else(|| format!("unknown style {s:?}"))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Dataset> {
    dataset_io::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn png_bytes(img: &RasterImage) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    img.write_to(&mut Cursor::new(&mut buf), image::ImageFormat::Png)
        .map_err(|e| CliError::Data(format!("PNG encoding failed: {e}")))?;
    Ok(buf)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

fn cmd_encode(a: EncodeArgs) -> Result<()> {
    let vocab = Vocabulary::new(a.n_bins)
        .ok_or_else(|| CliError::Usage("--n-bins must be positive".into()))?;
    let ds = load(&a.dataset)?;
    let order = match a.order {
        Order::Annotated => OrderingPolicy::Annotated,
        Order::Reading => OrderingPolicy::Reading,
        Order::Random => OrderingPolicy::Random(a.seed),
    };
    let lines = ds
        .records
        .iter()
        .map(|r| {
            encode(r, &vocab, order)
                .map(|sequence| TokenLine {
                    image_id: r.image_id,
                    sequence,
                })
                .map_err(|e| CliError::Data(format!("image {}: {e}", r.image_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut buf = Vec::new();
    write_token_lines(&mut buf, &lines).expect("writing to memory");
    write_atomic(&a.out, &buf)?;
    println!("{}", lines.len());
    Ok(())
}

fn decode_error(image_id: u64, e: DecodeError) -> CliError {
    if let DecodeError::Source { source, .. } = &e {
        if source.downcast_ref::<BridgeError>().is_some() {
            return CliError::External(format!("image {image_id}: {e}"));
        }
    }
    CliError::Data(format!("image {image_id}: {e}"))
}

fn seconds(s: f64, flag: &str) -> Result<Duration> {
    Duration::try_from_secs_f64(s)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| CliError::Usage(format!("{flag} must be a positive number of seconds")))
}

fn cmd_decode(a: DecodeArgs) -> Result<()> {
    let vocab = Vocabulary::new(a.n_bins)
        .ok_or_else(|| CliError::Usage("--n-bins must be positive".into()))?;
    if a.max_length == 0 {
        return Err(CliError::Usage("--max-length must be positive".into()));
    }
    let config = DecodeConfig {
        max_length: a.max_length,
        vocab,
        allow_empty_output: true,
    };
    let ds = load(&a.dataset)?;

    let outputs: Vec<Result<ReactionStructure>> = if let Some(cmd) = &a.model_cmd {
        let mut bridge_cfg = BridgeConfig::new(vec!["sh".into(), "-c".into(), cmd.clone()]);
        bridge_cfg.handshake_timeout = seconds(a.handshake_timeout, "--handshake-timeout")?;
        bridge_cfg.step_timeout = seconds(a.step_timeout, "--step-timeout")?;
        let images = a.images.clone().unwrap_or_else(|| {
            a.dataset
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default()
        });
        ds.records
            .par_iter()
            .map(|r| {
                let mut bridge = open_bridge(&bridge_cfg, &vocab, &images.join(&r.file_name))
                    .map_err(|e| CliError::External(format!("image {}: {e}", r.image_id)))?;
                greedy_decode(&mut bridge, &config, r.width, r.height)
                    .map(|o| o.structure)
                    .map_err(|e| decode_error(r.image_id, e))
            })
            .collect()
    } else {
        let path = a.replay.as_ref().expect("clap enforces one source");
        let text = read_text(path)?;
        let lines = read_token_lines(text.as_bytes())
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let targets: BTreeMap<u64, TokenLine> =
            lines.into_iter().map(|l| (l.image_id, l)).collect();
        ds.records
            .par_iter()
            .map(|r| {
                let line = targets.get(&r.image_id).ok_or_else(|| {
                    CliError::Data(format!(
                        "{}: no sequence for image {}",
                        path.display(),
                        r.image_id
                    ))
                })?;
                let mut oracle = replay_oracle(&line.sequence.tokens, &vocab, 0.0, 0)
                    .map_err(|e| CliError::Data(format!("image {}: {e}", r.image_id)))?;
                greedy_decode(&mut oracle, &config, r.width, r.height)
                    .map(|o| o.structure)
                    .map_err(|e| decode_error(r.image_id, e))
            })
            .collect()
    };

    let mut records = Vec::with_capacity(ds.len());
    for (r, out) in ds.records.iter().zip(outputs) {
        records.push(out?.to_record(r.image_id, &r.file_name, r.width, r.height, r.style));
    }
    dataset_io::save(&Dataset::new(records), &a.out)?;
    println!("{}", ds.len());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.iou_threshold) {
        return Err(CliError::Usage("--iou-threshold must be in [0, 1]".into()));
    }
    let gt = load(&a.gt)?;
    let pred = load(&a.pred)?;
    let preds: BTreeMap<u64, ReactionStructure> = pred
        .records
        .iter()
        .map(|r| (r.image_id, r.structure()))
        .collect();
    let mode = match a.mode {
        Mode::Hard => MatchMode::Hard,
        Mode::Soft => MatchMode::Soft,
    };
    let cfg = MatchConfig {
        iou_threshold: a.iou_threshold,
        strict: !a.inclusive,
    };
    let report = evaluate(&gt, &preds, mode, &cfg).map_err(|e| CliError::Data(e.to_string()))?;
    if a.json {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        println!("{text}");
    } else {
        print!("{}", report.to_text(a.by_style));
    }
    Ok(())
}

fn cmd_augment(a: AugmentArgs) -> Result<()> {
    let config = AugmentConfig {
        compose_probability: a.compose_probability,
        max_compose: a.max_compose,
        decay_ratio: a.decay_ratio,
        rotation_degrees: a.rotation_degrees,
        hflip_probability: a.hflip_probability,
        vflip_probability: a.vflip_probability,
        color_jitter: a.color_jitter,
        target_size: a.target_size,
        pad_color: a.pad_color,
        seed: a.seed,
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let ds = load(&a.dataset)?;
    let store = DirImageStore::new(&a.images);
    // fail early, naming the first missing file
    for r in &ds.records {
        let p = store.path_of(r);
        if !p.is_file() {
            return Err(CliError::Data(format!("missing image {}", p.display())));
        }
    }
    create_dir(&a.out)?;
    let width = a.num.saturating_sub(1).to_string().len().max(5);
    let samples: Vec<Result<DiagramRecord>> = (0..a.num)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(config.seed, i as u64);
            let (img, mut rec) = augment_sample(&ds, &store, &config, &mut rng)?;
            rec.image_id = i as u64 + 1;
            rec.file_name = format!("aug_{i:0width$}.png");
            write_atomic(&a.out.join(&rec.file_name), &png_bytes(&img)?)?;
            Ok(rec)
        })
        .collect();
    let records = samples.into_iter().collect::<Result<Vec<_>>>()?;
    dataset_io::save(&Dataset::new(records), a.out.join("augmented.json"))?;
    println!("{}", a.num);
    Ok(())
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    let s = dataset_io::stats(&load(&a.dataset)?);
    if a.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&s).expect("stats serialize")
        );
    } else {
        print!("{s}");
    }
    Ok(())
}

fn cmd_split(a: SplitArgs) -> Result<()> {
    let ds = load(&a.dataset)?;
    let folds = dataset_io::split_folds(&ds, a.folds, a.seed, a.stratify_by_style)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut text = serde_json::to_string_pretty(&folds).expect("folds serialize");
    text.push('\n');
    write_atomic(&a.out, text.as_bytes())?;
    let sizes: Vec<String> = folds.fold_sizes().iter().map(ToString::to_string).collect();
    println!("{}", sizes.join(" "));
    Ok(())
}

fn cmd_render(a: RenderArgs) -> Result<()> {
    let ds = load(&a.dataset)?;
    let pred = a.pred.as_deref().map(load).transpose()?;
    let store = DirImageStore::new(&a.images);
    create_dir(&a.out)?;
    let jobs: Vec<(&DiagramRecord, &DiagramRecord)> = match &pred {
        None => ds.records.iter().map(|r| (r, r)).collect(),
        Some(p) => p
            .records
            .iter()
            .map(|r| {
                ds.get(r.image_id).map(|src| (src, r)).ok_or_else(|| {
                    CliError::Data(format!("prediction for unknown image id {}", r.image_id))
                })
            })
            .collect::<Result<_>>()?,
    };
    let written: Vec<Result<usize>> = jobs
        .par_iter()
        .map(|(src, shown)| {
            use rxnseq::augment::ImageStore;
            let img = store.load(src)?;
            let stem = Path::new(&src.file_name)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| src.image_id.to_string());
            for (k, overlay) in render::overlays(&img, shown).iter().enumerate() {
                let name = format!("{stem}_rxn{k}.png");
                write_atomic(&a.out.join(name), &png_bytes(overlay)?)?;
            }
            Ok(shown.reactions.len())
        })
        .collect();
    let mut total = 0;
    for w in written {
        total += w?;
    }
    println!("{total}");
    Ok(())
}

fn cmd_convert(a: ConvertArgs) -> Result<()> {
    let text = read_text(&a.input)?;
    let opts = convert::ConvertOptions {
        box_format: match a.box_format {
            BoxFormatArg::Xywh => convert::BoxFormat::Xywh,
            BoxFormatArg::Xyxy => convert::BoxFormat::Xyxy,
        },
        default_style: a.default_style,
        skip_unknown_categories: a.skip_unknown_categories,
    };
    let ds = convert::convert_str(&text, &opts)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.input.display())))?;
    dataset_io::save(&ds, &a.out)?;
    println!("{}", ds.len());
    Ok(())
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("RXNSEQ_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "RXNSEQ_THREADS must be a positive integer, got {v:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Augment(a) => cmd_augment(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Split(a) => cmd_split(a),
        Command::Render(a) => cmd_render(a),
        Command::Convert(a) => cmd_convert(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rxnseq: {e}");
            ExitCode::from(e.code())
        }
    }
}
