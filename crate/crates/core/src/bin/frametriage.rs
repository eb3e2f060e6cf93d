//! Command-line surface for the triage and restoration toolkit.
//!
//! Every subcommand takes `--config`, `--seed`, and `--threads`; flags
//! override the config file, which overrides built-in defaults. Runs are
//! deterministic: the same config, inputs, and seed produce byte-equal
//! outputs. On failure the process exits nonzero after printing a single
//! `error: <category>: <message>` line to stderr.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use frametriage::deteval::{evaluate, EvalDataset, EvalFrame};
use frametriage::error::Error;
use frametriage::geometry::Mask;
use frametriage::io::{
    list_frame_files, parse_sidecar, pr_curve_csv, read_frame_png, video_report_json,
    write_frame_log_csv, write_frame_png, write_video_report, DetectionSidecar, PngDepth,
    RunConfig, SidecarFrame,
};
use frametriage::metrics::compute_all;
use frametriage::pipeline::{
    plan_restoration, process_video, restore_frame, FrameTask, StageRecord,
};
use frametriage::quality::{quality_score, Disposition};
use frametriage::sim::{corrupt, test_chart};
use frametriage::{Detection, Frame, Result};

#[derive(Parser)]
#[command(name = "frametriage", version, about = "Frame-quality triage and restoration for endoscopy-style video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run config; unset fields use built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config's RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Score detection sidecars: quality score and triage per frame.
    Score {
        #[command(flatten)]
        common: Common,
        /// Detection sidecar JSON; falls back to paths.sidecar.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate predicted boxes against ground truth (AP/mAP, PR curves).
    EvalDetect {
        #[command(flatten)]
        common: Common,
        /// Ground-truth sidecar JSON (confidences ignored).
        #[arg(long)]
        ground_truth: PathBuf,
        /// Predicted sidecar JSON.
        #[arg(long)]
        predictions: PathBuf,
        /// Output JSON; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for per-class PR curve CSVs at the operating IoU.
        #[arg(long)]
        pr_dir: Option<PathBuf>,
    },
    /// Generate a paired clean/corrupt benchmark corpus.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Output directory; falls back to paths.output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Triage one frame and restore it if the score calls for it.
    Restore {
        #[command(flatten)]
        common: Common,
        /// Input frame PNG.
        #[arg(long)]
        frame: PathBuf,
        /// Detection sidecar JSON; no sidecar means no detections.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Frame id to look up in the sidecar; defaults to the file stem.
        #[arg(long)]
        frame_id: Option<String>,
        /// Where to write the kept or restored frame.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output PNG depth for restored frames (kept frames are copied).
        #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u8).range(8..=16))]
        depth: u8,
    },
    /// Full-reference metrics between a reference and a test frame.
    Metrics {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Triage and restore a whole frame directory.
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Directory of input PNG frames; falls back to paths.frames_dir.
        #[arg(long)]
        frames: Option<PathBuf>,
        /// Detection sidecar JSON; falls back to paths.sidecar.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Directory for kept and restored frames; falls back to
        /// paths.output_dir. Without it frames are triaged but not saved.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Video report JSON path; falls back to paths.report_json.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Per-frame log CSV path; falls back to paths.log_csv.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Output PNG depth for restored frames.
        #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u8).range(8..=16))]
        depth: u8,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}: {}", e.category(), error_message(&e));
        std::process::exit(1);
    }
}

/// The variant's message without its Display prefix, so the error line
/// stays `error: <category>: <message>` without repeating the category.
fn error_message(e: &Error) -> String {
    match e {
        Error::InvalidInput(m)
        | Error::ShapeMismatch(m)
        | Error::Numeric(m)
        | Error::Io(m) => m.clone(),
        Error::Parse { context, message } => format!("{context}: {message}"),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Score {
            common,
            sidecar,
            out,
        } => {
            let cfg = setup(&common)?;
            cmd_score(&cfg, sidecar, out)
        }
        Command::EvalDetect {
            common,
            ground_truth,
            predictions,
            out,
            pr_dir,
        } => {
            setup(&common)?;
            cmd_eval_detect(&ground_truth, &predictions, out, pr_dir)
        }
        Command::Simulate { common, out } => {
            let cfg = setup(&common)?;
            cmd_simulate(&cfg, out)
        }
        Command::Restore {
            common,
            frame,
            sidecar,
            frame_id,
            out,
            depth,
        } => {
            let cfg = setup(&common)?;
            cmd_restore(&cfg, &frame, sidecar, frame_id, out, parse_depth(depth)?)
        }
        Command::Metrics {
            common,
            reference,
            test,
        } => {
            setup(&common)?;
            cmd_metrics(&reference, &test)
        }
        Command::Pipeline {
            common,
            frames,
            sidecar,
            out_dir,
            report,
            log,
            depth,
        } => {
            let cfg = setup(&common)?;
            cmd_pipeline(&cfg, frames, sidecar, out_dir, report, log, parse_depth(depth)?)
        }
    }
}

/// Loads the config, applies flag overrides, and sizes the thread pool.
fn setup(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = common.threads {
        if threads == 0 {
            return Err(Error::InvalidInput("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    }
    Ok(cfg)
}

fn parse_depth(depth: u8) -> Result<PngDepth> {
    match depth {
        8 => Ok(PngDepth::Eight),
        16 => Ok(PngDepth::Sixteen),
        other => Err(Error::InvalidInput(format!(
            "--depth must be 8 or 16, got {other}"
        ))),
    }
}

/// Attaches the file path to a bare OS error.
fn with_path<T>(r: std::io::Result<T>, path: &Path) -> frametriage::Result<T> {
    r.map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn disposition_name(d: Disposition) -> &'static str {
    match d {
        Disposition::Keep => "keep",
        Disposition::Restore => "restore",
        Disposition::Discard => "discard",
    }
}

/// Writes to the path when given, otherwise prints to stdout.
fn deliver(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            with_path(std::fs::write(path, text), path)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn require_path(flag: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| Error::InvalidInput(format!("{what} required (flag or config paths)")))
}

fn confident(detections: &[Detection], threshold: f64) -> Vec<Detection> {
    detections
        .iter()
        .filter(|d| d.confidence >= threshold)
        .copied()
        .collect()
}

fn cmd_score(cfg: &RunConfig, sidecar: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let path = require_path(sidecar, &cfg.paths.sidecar, "--sidecar")?;
    let sidecar = parse_sidecar(&path)?;
    let mut text = String::from("frame_id,qs,disposition\n");
    for frame in &sidecar.frames {
        let kept = confident(&frame.detections, cfg.pipeline.confidence_threshold);
        let report = quality_score(&kept, &cfg.quality)?;
        text.push_str(&format!(
            "{},{},{}\n",
            frame.frame_id,
            report.qs,
            disposition_name(report.disposition)
        ));
    }
    deliver(out.as_deref(), &text)
}

fn cmd_eval_detect(
    ground_truth: &Path,
    predictions: &Path,
    out: Option<PathBuf>,
    pr_dir: Option<PathBuf>,
) -> Result<()> {
    let gt = parse_sidecar(ground_truth)?;
    let pred = parse_sidecar(predictions)?;
    let mut pred_by_id: HashMap<&str, &SidecarFrame> = HashMap::new();
    for frame in &pred.frames {
        pred_by_id.insert(frame.frame_id.as_str(), frame);
    }
    let gt_ids: std::collections::HashSet<&str> =
        gt.frames.iter().map(|f| f.frame_id.as_str()).collect();

    // Ground-truth file order first, then prediction-only frames, which
    // carry no ground truth and can only contribute false positives.
    let mut frames = Vec::new();
    for frame in &gt.frames {
        let predictions = pred_by_id
            .get(frame.frame_id.as_str())
            .map(|p| p.detections.clone())
            .unwrap_or_default();
        frames.push(EvalFrame {
            frame_id: frame.frame_id.clone(),
            ground_truth: frame.detections.clone(),
            predictions,
        });
    }
    for frame in &pred.frames {
        if !gt_ids.contains(frame.frame_id.as_str()) {
            frames.push(EvalFrame {
                frame_id: frame.frame_id.clone(),
                ground_truth: Vec::new(),
                predictions: frame.detections.clone(),
            });
        }
    }

    let result = evaluate(&EvalDataset { frames })?;
    if let Some(dir) = pr_dir {
        with_path(std::fs::create_dir_all(&dir), &dir)?;
        for class_eval in &result.per_class {
            let path = dir.join(format!("pr_class_{}.csv", class_eval.class.code()));
            with_path(std::fs::write(&path, pr_curve_csv(&class_eval.pr_points)), &path)?;
        }
    }
    let mut text =
        serde_json::to_string_pretty(&result).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    deliver(out.as_deref(), &text)
}

#[derive(Serialize)]
struct ManifestFrame {
    frame_id: String,
    seed: u64,
    masked: bool,
}

#[derive(Serialize)]
struct Manifest {
    seed: u64,
    width: usize,
    height: usize,
    frames: Vec<ManifestFrame>,
}

fn cmd_simulate(cfg: &RunConfig, out: Option<PathBuf>) -> Result<()> {
    let dir = require_path(out, &cfg.paths.output_dir, "--out")?;
    let sim = &cfg.simulate;
    sim.validate()?;
    let clean_dir = dir.join("clean");
    let corrupt_dir = dir.join("corrupt");
    with_path(std::fs::create_dir_all(&clean_dir), &clean_dir)?;
    with_path(std::fs::create_dir_all(&corrupt_dir), &corrupt_dir)?;
    let masks_dir = dir.join("masks");
    let mut manifest = Manifest {
        seed: cfg.seed,
        width: sim.width,
        height: sim.height,
        frames: Vec::with_capacity(sim.count),
    };
    for i in 0..sim.count {
        let frame_seed = cfg.seed.wrapping_add(i as u64);
        let frame_id = format!("frame_{i:04}");
        let file = format!("{frame_id}.png");
        let clean = test_chart(sim.width, sim.height, frame_seed)?;
        let spec = sim.degradation_spec(frame_seed)?;
        let corrupted = corrupt(&clean, &spec, frame_seed)?;
        write_frame_png(&clean_dir.join(&file), &clean, PngDepth::Sixteen)?;
        write_frame_png(&corrupt_dir.join(&file), &corrupted.frame, PngDepth::Sixteen)?;
        if let Some(mask) = &corrupted.mask {
            with_path(std::fs::create_dir_all(&masks_dir), &masks_dir)?;
            write_frame_png(&masks_dir.join(&file), &mask_to_frame(mask)?, PngDepth::Eight)?;
        }
        manifest.frames.push(ManifestFrame {
            frame_id,
            seed: frame_seed,
            masked: corrupted.mask.is_some(),
        });
    }
    let mut text =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    let manifest_path = dir.join("manifest.json");
    with_path(std::fs::write(&manifest_path, text), &manifest_path)?;
    println!("wrote {} frame pairs to {}", sim.count, dir.display());
    Ok(())
}

fn mask_to_frame(mask: &Mask) -> Result<Frame> {
    Frame::from_fn(mask.width(), mask.height(), 1, |x, y, _| {
        if mask.get(x, y) {
            1.0
        } else {
            0.0
        }
    })
}

#[derive(Serialize)]
struct RestoreLog<'a> {
    frame_id: &'a str,
    qs: f64,
    disposition: &'static str,
    stages: &'a [StageRecord],
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wrote: Option<String>,
}

fn cmd_restore(
    cfg: &RunConfig,
    frame_path: &Path,
    sidecar: Option<PathBuf>,
    frame_id: Option<String>,
    out: Option<PathBuf>,
    depth: PngDepth,
) -> Result<()> {
    let pipeline_cfg = cfg.pipeline_config();
    let frame_id = frame_id.unwrap_or_else(|| {
        frame_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let detections = match sidecar {
        Some(path) => lookup_detections(&parse_sidecar(&path)?, &frame_id),
        None => Vec::new(),
    };
    let kept = confident(&detections, pipeline_cfg.confidence_threshold);
    let report = quality_score(&kept, &pipeline_cfg.quality)?;

    let mut stages: Vec<StageRecord> = Vec::new();
    let mut failure: Option<String> = None;
    let mut wrote = None;
    let mut disposition = report.disposition;
    match report.disposition {
        Disposition::Keep => {
            // Byte-for-byte copy: the kept path never decodes the frame.
            if let Some(out_path) = &out {
                with_path(std::fs::copy(frame_path, out_path), out_path)?;
                wrote = Some(out_path.display().to_string());
            }
        }
        Disposition::Discard => {}
        Disposition::Restore => {
            let frame = read_frame_png(frame_path)?;
            let plan =
                plan_restoration(&detections, frame.width(), frame.height(), &pipeline_cfg)?;
            let result = restore_frame(&frame, &plan, &pipeline_cfg);
            stages = result.stages;
            match result.frame {
                Some(restored) => {
                    if let Some(out_path) = &out {
                        write_frame_png(out_path, &restored, depth)?;
                        wrote = Some(out_path.display().to_string());
                    }
                }
                None => {
                    disposition = Disposition::Discard;
                    failure = result.failure;
                }
            }
        }
    }

    let log = RestoreLog {
        frame_id: &frame_id,
        qs: report.qs,
        disposition: disposition_name(disposition),
        stages: &stages,
        failure: failure.as_deref(),
        wrote,
    };
    let mut text = serde_json::to_string_pretty(&log).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    print!("{text}");
    Ok(())
}

fn lookup_detections(sidecar: &DetectionSidecar, frame_id: &str) -> Vec<Detection> {
    sidecar
        .frames
        .iter()
        .find(|f| f.frame_id == frame_id)
        .map(|f| f.detections.clone())
        .unwrap_or_default()
}

fn cmd_metrics(reference: &Path, test: &Path) -> Result<()> {
    let reference = read_frame_png(reference)?;
    let test = read_frame_png(test)?;
    let set = compute_all(&reference, &test)?;
    // Non-finite values (infinite PSNR at identity) serialize as null.
    let mut text = serde_json::to_string_pretty(&set).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    print!("{text}");
    Ok(())
}

fn cmd_pipeline(
    cfg: &RunConfig,
    frames: Option<PathBuf>,
    sidecar: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    report: Option<PathBuf>,
    log: Option<PathBuf>,
    depth: PngDepth,
) -> Result<()> {
    let pipeline_cfg = cfg.pipeline_config();
    let frames_dir = require_path(frames, &cfg.paths.frames_dir, "--frames")?;
    let files = list_frame_files(&frames_dir)?;
    if files.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no PNG frames in {}",
            frames_dir.display()
        )));
    }

    let sidecar_path = sidecar.or_else(|| cfg.paths.sidecar.clone());
    let mut detections_by_id: HashMap<String, Vec<Detection>> = HashMap::new();
    if let Some(path) = &sidecar_path {
        let sidecar = parse_sidecar(path)?;
        for frame in sidecar.frames {
            detections_by_id.insert(frame.frame_id, frame.detections);
        }
        let known: std::collections::HashSet<&str> =
            files.iter().map(|(id, _)| id.as_str()).collect();
        let orphans = detections_by_id
            .keys()
            .filter(|id| !known.contains(id.as_str()))
            .count();
        if orphans > 0 {
            eprintln!("warning: {orphans} sidecar frame ids have no matching PNG");
        }
    }

    let tasks: Vec<FrameTask> = files
        .iter()
        .map(|(id, _)| FrameTask {
            frame_id: id.clone(),
            detections: detections_by_id.remove(id).unwrap_or_default(),
        })
        .collect();

    let out_dir = out_dir.or_else(|| cfg.paths.output_dir.clone());
    if let Some(dir) = &out_dir {
        with_path(std::fs::create_dir_all(dir), dir)?;
    }
    let video_report = process_video(
        &tasks,
        &pipeline_cfg,
        |i, _| read_frame_png(&files[i].1),
        None::<fn(usize, &FrameTask) -> Result<Frame>>,
        |i, task, log, restored| {
            let Some(dir) = &out_dir else { return Ok(()) };
            let name = format!("{}.png", task.frame_id);
            if log.disposition == Disposition::Keep {
                // Byte-for-byte: kept frames are copied, never re-encoded.
                let dst = dir.join(name);
                with_path(std::fs::copy(&files[i].1, &dst), &dst)?;
            } else if let Some(frame) = restored {
                write_frame_png(&dir.join(name), frame, depth)?;
            }
            Ok(())
        },
    )?;

    let report_path = report.or_else(|| cfg.paths.report_json.clone());
    let log_path = log.or_else(|| cfg.paths.log_csv.clone());
    if let Some(path) = &report_path {
        write_video_report(path, &video_report)?;
    }
    if let Some(path) = &log_path {
        write_frame_log_csv(path, &video_report.frames)?;
    }
    if report_path.is_none() && log_path.is_none() {
        // No file outputs requested: the report goes to stdout.
        print!("{}", video_report_json(&video_report));
    } else {
        println!(
            "total={} kept={} restored={} discarded={}",
            video_report.total,
            video_report.kept,
            video_report.restored,
            video_report.discarded
        );
    }
    Ok(())
}
