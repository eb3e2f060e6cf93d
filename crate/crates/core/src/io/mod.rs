//! File formats and run configuration.
//!
//! Three kinds of artifacts cross the process boundary and all of them
//! must be deterministic byte-for-byte under a fixed input:
//!
//! - detection sidecars: JSON, one record per frame, strict parse;
//! - run configs: TOML with every field defaulted, lossless round-trip;
//! - reports: video summary as JSON, per-frame log as CSV.
//!
//! Frames travel as 8- or 16-bit gray or RGB PNG files; a directory of
//! PNGs sorted by file name stands in for a video container.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;
use crate::geometry::{ArtifactClass, BBox, Detection, Frame};
use crate::pipeline::{InpaintMethod, PipelineConfig, VideoReport};
use crate::quality::QualityConfig;
use crate::restore::TvParams;
use crate::sim::{trajectory_kernel, BlurTrajectory, DegradationSpec, MaskSpec, Psf};

/// One frame's worth of detector output.
#[derive(Debug, Clone, PartialEq)]
pub struct SidecarFrame {
    pub frame_id: String,
    pub detections: Vec<Detection>,
}

/// Detector output for a whole video, in frame order.
///
/// Frame ids are unique; every box passed [`BBox`] and confidence
/// validation on the way in.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionSidecar {
    pub frames: Vec<SidecarFrame>,
}

// Wire format. Kept separate from the library types so the parser can
// reject unknown fields and report the offending frame/field, and so the
// on-disk schema stays frozen even if the in-memory types grow.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSidecar {
    frames: Vec<RawSidecarFrame>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSidecarFrame {
    frame_id: String,
    boxes: Vec<RawBox>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    class: u8,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    confidence: f64,
}

fn field_error(frame_id: &str, index: usize, field: &str, e: Error) -> Error {
    Error::Parse {
        context: format!("frame {frame_id} boxes[{index}].{field}"),
        message: e.to_string(),
    }
}

/// Attaches the file path to a bare OS error.
fn with_path<T>(r: std::io::Result<T>, path: &Path) -> Result<T> {
    r.map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Parses sidecar JSON text. Strict: unknown fields, unknown class codes,
/// invalid boxes or confidences, and duplicate frame ids are all errors
/// that name the frame and field involved.
pub fn sidecar_from_json(text: &str) -> Result<DetectionSidecar> {
    let raw: RawSidecar = serde_json::from_str(text).map_err(|e| Error::Parse {
        context: "sidecar".into(),
        message: e.to_string(),
    })?;
    let mut seen = HashSet::new();
    let mut frames = Vec::with_capacity(raw.frames.len());
    for rf in raw.frames {
        if !seen.insert(rf.frame_id.clone()) {
            return Err(Error::Parse {
                context: format!("frame {}", rf.frame_id),
                message: "duplicate frame_id".into(),
            });
        }
        let mut detections = Vec::with_capacity(rf.boxes.len());
        for (i, b) in rf.boxes.iter().enumerate() {
            let class = ArtifactClass::from_code(b.class)
                .map_err(|e| field_error(&rf.frame_id, i, "class", e))?;
            let bbox = BBox::new(b.x, b.y, b.w, b.h)
                .map_err(|e| field_error(&rf.frame_id, i, "bbox", e))?;
            let det = Detection::new(class, bbox, b.confidence)
                .map_err(|e| field_error(&rf.frame_id, i, "confidence", e))?;
            detections.push(det);
        }
        frames.push(SidecarFrame {
            frame_id: rf.frame_id,
            detections,
        });
    }
    Ok(DetectionSidecar { frames })
}

/// Reads and validates a sidecar file.
pub fn parse_sidecar(path: &Path) -> Result<DetectionSidecar> {
    let text = with_path(std::fs::read_to_string(path), path)?;
    sidecar_from_json(&text).map_err(|e| match e {
        Error::Parse { context, message } => Error::Parse {
            context: format!("{}: {context}", path.display()),
            message,
        },
        other => other,
    })
}

/// Serializes a sidecar to its JSON wire form (pretty, trailing newline).
pub fn sidecar_to_json(sidecar: &DetectionSidecar) -> String {
    let raw = RawSidecar {
        frames: sidecar
            .frames
            .iter()
            .map(|f| RawSidecarFrame {
                frame_id: f.frame_id.clone(),
                boxes: f
                    .detections
                    .iter()
                    .map(|d| RawBox {
                        class: d.class.code(),
                        x: d.bbox.x,
                        y: d.bbox.y,
                        w: d.bbox.w,
                        h: d.bbox.h,
                        confidence: d.confidence,
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&raw).expect("sidecar serialization cannot fail");
    s.push('\n');
    s
}

pub fn write_sidecar(path: &Path, sidecar: &DetectionSidecar) -> Result<()> {
    with_path(std::fs::write(path, sidecar_to_json(sidecar)), path)
}

/// Pipeline thresholds as they appear in the config file. Solver and
/// quality settings live in their own sections; this carries the rest of
/// [`PipelineConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub inpaint_method: InpaintMethod,
    pub patch_side: usize,
    pub confidence_threshold: f64,
    pub intensity_ceiling: f64,
    pub dilation_radius: f64,
    pub rescore: bool,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let p = PipelineConfig::default();
        PipelineSection {
            inpaint_method: p.inpaint_method,
            patch_side: p.patch_side,
            confidence_threshold: p.confidence_threshold,
            intensity_ceiling: p.intensity_ceiling,
            dilation_radius: p.dilation_radius,
            rescore: p.rescore,
        }
    }
}

/// Degradation recipe for `simulate`: how many frames, their size, and
/// the corruption chain. Blur comes from either a random motion
/// trajectory or an isotropic Gaussian, never both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    /// Odd kernel side for trajectory motion blur; absent disables it.
    pub trajectory_side: Option<usize>,
    /// Sigma for Gaussian blur; absent disables it.
    pub gaussian_sigma: Option<f64>,
    pub noise_sigma: f64,
    pub gamma: f64,
    /// Number of random square knockout regions; 0 disables masking.
    pub mask_count: usize,
    /// Candidate square sides in pixels, drawn uniformly per region.
    pub mask_sides: Vec<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            count: 15,
            width: 256,
            height: 256,
            trajectory_side: Some(15),
            gaussian_sigma: None,
            noise_sigma: 0.003,
            gamma: 1.0,
            mask_count: 0,
            mask_sides: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 || self.width == 0 || self.height == 0 {
            return Err(Error::invalid("simulate counts and dimensions must be positive"));
        }
        if self.trajectory_side.is_some() && self.gaussian_sigma.is_some() {
            return Err(Error::invalid(
                "simulate blur must be trajectory_side or gaussian_sigma, not both",
            ));
        }
        if let Some(side) = self.trajectory_side {
            if side < 3 || side % 2 == 0 {
                return Err(Error::invalid(format!(
                    "trajectory_side {side} must be odd and at least 3"
                )));
            }
        }
        if let Some(sigma) = self.gaussian_sigma {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::invalid(format!("gaussian_sigma {sigma} must be positive")));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma must be nonnegative"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::invalid("gamma must be positive"));
        }
        if self.mask_count > 0 && (self.mask_sides.is_empty() || self.mask_sides.contains(&0)) {
            return Err(Error::invalid("mask_sides must be nonempty positive sizes"));
        }
        Ok(())
    }

    /// Materializes the recipe for one frame. The seed should vary per
    /// frame so trajectories differ; everything else is shared.
    pub fn degradation_spec(&self, frame_seed: u64) -> Result<DegradationSpec> {
        self.validate()?;
        let psf = match (self.trajectory_side, self.gaussian_sigma) {
            (Some(side), None) => {
                let trajectory = BlurTrajectory::generate(frame_seed, side)?;
                Some(trajectory_kernel(&trajectory, side)?)
            }
            (None, Some(sigma)) => Some(Psf::gaussian(sigma)?),
            (None, None) => None,
            (Some(_), Some(_)) => unreachable!("validate rejects dual blur sources"),
        };
        let mask = (self.mask_count > 0).then(|| MaskSpec {
            count: self.mask_count,
            sides: self.mask_sides.clone(),
        });
        Ok(DegradationSpec {
            psf,
            noise_sigma: self.noise_sigma,
            gamma: self.gamma,
            mask,
        })
    }
}

/// Where a run reads and writes. All optional: each subcommand checks for
/// the paths it needs and flags may override them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub frames_dir: Option<PathBuf>,
    pub sidecar: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub report_json: Option<PathBuf>,
    pub log_csv: Option<PathBuf>,
}

/// Everything a run needs, as one TOML file. Every field has a default,
/// so an empty file is a valid config and partial files fill in the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub quality: QualityConfig,
    pub tv_deblur: TvParams,
    pub tv_inpaint: TvParams,
    pub pipeline: PipelineSection,
    pub simulate: SimConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            quality: QualityConfig::default(),
            tv_deblur: TvParams::default(),
            tv_inpaint: TvParams::for_inpainting(),
            pipeline: PipelineSection::default(),
            simulate: SimConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses and validates config text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
            context: "config".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = with_path(std::fs::read_to_string(path), path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                context: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    /// Serializes losslessly: `from_toml_str(&cfg.to_toml())` equals `cfg`.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline_config().validate()?;
        self.simulate.validate()
    }

    /// Assembles the pipeline view of this config.
    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            quality: self.quality.clone(),
            tv_deblur: self.tv_deblur.clone(),
            tv_inpaint: self.tv_inpaint.clone(),
            inpaint_method: self.pipeline.inpaint_method,
            patch_side: self.pipeline.patch_side,
            confidence_threshold: self.pipeline.confidence_threshold,
            intensity_ceiling: self.pipeline.intensity_ceiling,
            dilation_radius: self.pipeline.dilation_radius,
            rescore: self.pipeline.rescore,
        }
    }
}

/// Output sample depth for [`write_frame_png`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PngDepth {
    Eight,
    Sixteen,
}

/// Reads an 8- or 16-bit gray or RGB PNG into a [0,1] frame. Alpha and
/// other layouts are rejected rather than silently dropped.
pub fn read_frame_png(path: &Path) -> Result<Frame> {
    let img = image::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    use image::DynamicImage as D;
    match img {
        D::ImageLuma8(b) => {
            let (w, h) = b.dimensions();
            Frame::from_fn(w as usize, h as usize, 1, |x, y, _| {
                b.get_pixel(x as u32, y as u32).0[0] as f64 / 255.0
            })
        }
        D::ImageLuma16(b) => {
            let (w, h) = b.dimensions();
            Frame::from_fn(w as usize, h as usize, 1, |x, y, _| {
                b.get_pixel(x as u32, y as u32).0[0] as f64 / 65535.0
            })
        }
        D::ImageRgb8(b) => {
            let (w, h) = b.dimensions();
            Frame::from_fn(w as usize, h as usize, 3, |x, y, c| {
                b.get_pixel(x as u32, y as u32).0[c] as f64 / 255.0
            })
        }
        D::ImageRgb16(b) => {
            let (w, h) = b.dimensions();
            Frame::from_fn(w as usize, h as usize, 3, |x, y, c| {
                b.get_pixel(x as u32, y as u32).0[c] as f64 / 65535.0
            })
        }
        other => Err(Error::invalid(format!(
            "unsupported PNG layout {:?}: expected 8/16-bit gray or RGB without alpha",
            other.color()
        ))),
    }
}

/// Writes a 1-channel frame as gray PNG or a 3-channel frame as RGB PNG,
/// clamping to [0,1] and rounding to the requested depth.
pub fn write_frame_png(path: &Path, frame: &Frame, depth: PngDepth) -> Result<()> {
    let (w, h) = (frame.width() as u32, frame.height() as u32);
    let quant8 = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let quant16 = |v: f64| (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
    let img = match (frame.channels(), depth) {
        (1, PngDepth::Eight) => image::DynamicImage::ImageLuma8(image::ImageBuffer::from_fn(
            w,
            h,
            |x, y| image::Luma([quant8(frame.get(x as usize, y as usize, 0))]),
        )),
        (1, PngDepth::Sixteen) => image::DynamicImage::ImageLuma16(image::ImageBuffer::from_fn(
            w,
            h,
            |x, y| image::Luma([quant16(frame.get(x as usize, y as usize, 0))]),
        )),
        (3, PngDepth::Eight) => image::DynamicImage::ImageRgb8(image::ImageBuffer::from_fn(
            w,
            h,
            |x, y| {
                let px = |c| quant8(frame.get(x as usize, y as usize, c));
                image::Rgb([px(0), px(1), px(2)])
            },
        )),
        (3, PngDepth::Sixteen) => image::DynamicImage::ImageRgb16(image::ImageBuffer::from_fn(
            w,
            h,
            |x, y| {
                let px = |c| quant16(frame.get(x as usize, y as usize, c));
                image::Rgb([px(0), px(1), px(2)])
            },
        )),
        (c, _) => {
            return Err(Error::invalid(format!(
                "PNG output needs 1 or 3 channels, frame has {c}"
            )))
        }
    };
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Lists `*.png` files in a directory as `(frame_id, path)` sorted by
/// file name; the frame id is the file stem. Frame order in a directory
/// corpus is exactly this order.
pub fn list_frame_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in with_path(std::fs::read_dir(dir), dir)? {
        let path = with_path(entry, dir)?.path();
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if path.is_file() && is_png {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            out.push((stem, path));
        }
    }
    out.sort_by(|a, b| a.1.file_name().cmp(&b.1.file_name()));
    Ok(out)
}

/// Video report as pretty JSON with a trailing newline. Field order is
/// fixed by the struct, so equal reports give byte-equal text. Non-finite
/// floats serialize as null.
pub fn video_report_json(report: &VideoReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serialization cannot fail");
    s.push('\n');
    s
}

pub fn write_video_report(path: &Path, report: &VideoReport) -> Result<()> {
    with_path(std::fs::write(path, video_report_json(report)), path)
}

pub const FRAME_LOG_HEADER: [&str; 11] = [
    "frame_id",
    "qs",
    "disposition",
    "stages",
    "psnr_pre",
    "psnr_post",
    "ssim_pre",
    "ssim_post",
    "qs_post",
    "notes",
    "failure",
];

fn fmt_float(v: f64) -> String {
    // Shortest round-trip formatting; infinities print as "inf"/"-inf".
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// Per-frame log as CSV under [`FRAME_LOG_HEADER`]. Stage names join
/// with `+`; stage notes render as `stage=note` joined with `|`; absent
/// metrics are empty cells. An empty log is the header line alone.
pub fn frame_log_csv(frames: &[crate::pipeline::FrameLog]) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(FRAME_LOG_HEADER)
        .map_err(|e| Error::Io(e.to_string()))?;
    for f in frames {
        let disposition = match f.disposition {
            crate::quality::Disposition::Keep => "keep",
            crate::quality::Disposition::Restore => "restore",
            crate::quality::Disposition::Discard => "discard",
        };
        let stages: Vec<&str> = f.stages.iter().map(|s| s.stage).collect();
        let notes: Vec<String> = f
            .stages
            .iter()
            .filter_map(|s| s.note.as_ref().map(|n| format!("{}={n}", s.stage)))
            .collect();
        wtr.write_record([
            f.frame_id.as_str(),
            &fmt_float(f.qs),
            disposition,
            &stages.join("+"),
            &fmt_opt(f.psnr_pre),
            &fmt_opt(f.psnr_post),
            &fmt_opt(f.ssim_pre),
            &fmt_opt(f.ssim_post),
            &fmt_opt(f.qs_post),
            &notes.join("|"),
            f.failure.as_deref().unwrap_or(""),
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

pub fn write_frame_log_csv(path: &Path, frames: &[crate::pipeline::FrameLog]) -> Result<()> {
    with_path(std::fs::write(path, frame_log_csv(frames)?), path)
}

/// Writes the summary JSON and the per-frame CSV for one run.
pub fn emit_report(report: &VideoReport, json_path: &Path, csv_path: &Path) -> Result<()> {
    write_video_report(json_path, report)?;
    write_frame_log_csv(csv_path, &report.frames)
}

/// Cumulative precision-recall samples as `recall,precision` CSV.
pub fn pr_curve_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("recall,precision\n");
    for (recall, precision) in points {
        s.push_str(&format!("{recall},{precision}\n"));
    }
    s
}

pub fn write_pr_curve(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    with_path(std::fs::write(path, pr_curve_csv(points)), path)
}
