//! Per-frame triage and restoration orchestration: score the frame,
//! build a plan from its detections, run the stages, and account for a
//! whole video.

use crate::geometry::{boxes_to_mask, ArtifactClass, Mask};
use crate::metrics::{psnr, ssim};
use crate::quality::{quality_score, triage, Disposition, QualityConfig};
use crate::restore::{
    color_retransfer, color_stats, color_stats_over_mask, exposure_correct, patch_inpaint,
    tv_deconvolve, tv_inpaint, ExposureDirection, TvParams, COLOR_CEILING, DEFAULT_PATCH_SIDE,
};
use crate::{Detection, Error, Frame, Result};
use rayon::prelude::*;
use serde::Serialize;

/// Detections below this confidence are ignored for both scoring and
/// planning.
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.25;

/// Inpaint mask dilation in pixels at the reference resolution.
pub const DEFAULT_DILATION_RADIUS: f64 = 4.0;

/// Resolution (smaller frame dimension) at which the dilation radius is
/// specified; other sizes scale it proportionally.
pub const DILATION_REFERENCE_DIM: f64 = 512.0;

/// Which solver fills inpaint masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InpaintMethod {
    Tv,
    Patch,
}

/// Everything the pipeline needs to triage and restore frames.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub quality: QualityConfig,
    pub tv_deblur: TvParams,
    pub tv_inpaint: TvParams,
    pub inpaint_method: InpaintMethod,
    pub patch_side: usize,
    pub confidence_threshold: f64,
    pub intensity_ceiling: f64,
    /// Dilation in pixels at `DILATION_REFERENCE_DIM`; scaled by
    /// `min(w, h) / 512` per frame.
    pub dilation_radius: f64,
    /// Recompute the quality score over unaddressed detections after
    /// restoration. Logged only; never changes the disposition.
    pub rescore: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            quality: QualityConfig::default(),
            tv_deblur: TvParams::default(),
            tv_inpaint: TvParams::for_inpainting(),
            inpaint_method: InpaintMethod::Tv,
            patch_side: DEFAULT_PATCH_SIDE,
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            intensity_ceiling: COLOR_CEILING,
            dilation_radius: DEFAULT_DILATION_RADIUS,
            rescore: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.quality.validate()?;
        self.tv_deblur.validate()?;
        self.tv_inpaint.validate()?;
        if self.patch_side == 0 || self.patch_side.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "patch side {} must be odd and positive",
                self.patch_side
            )));
        }
        let ok = (0.0..=1.0).contains(&self.confidence_threshold)
            && self.intensity_ceiling > 0.0
            && self.intensity_ceiling <= 1.0
            && self.dilation_radius.is_finite()
            && self.dilation_radius >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("pipeline thresholds out of range"))
        }
    }
}

/// Dilation radius in pixels for a frame of the given size.
pub fn dilation_pixels(radius_at_ref: f64, width: usize, height: usize) -> usize {
    let scale = width.min(height) as f64 / DILATION_REFERENCE_DIM;
    (radius_at_ref * scale).round() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StageKind {
    Deblur,
    Exposure,
    Inpaint,
}

impl StageKind {
    pub fn name(&self) -> &'static str {
        match self {
            StageKind::Deblur => "deblur",
            StageKind::Exposure => "exposure",
            StageKind::Inpaint => "inpaint",
        }
    }
}

/// One stage of a restoration plan, with its scope and provenance.
#[derive(Debug, Clone)]
pub struct PlannedStage {
    pub kind: StageKind,
    /// Target pixels for Inpaint; whole-frame stages carry None.
    pub mask: Option<Mask>,
    /// Correction direction for Exposure.
    pub direction: Option<ExposureDirection>,
    /// Detections that motivated the stage.
    pub detections: Vec<Detection>,
}

/// Ordered stages for one frame. Construction keeps the fixed order
/// Deblur, then Exposure, then Inpaint, each present at most once:
/// whole-frame operations run before local fill so inpainting sees
/// deblurred, re-exposed context.
#[derive(Debug, Clone, Default)]
pub struct RestorationPlan {
    pub stages: Vec<PlannedStage>,
}

impl RestorationPlan {
    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn stage_names(&self) -> Vec<&'static str> {
        self.stages.iter().map(|s| s.kind.name()).collect()
    }
}

/// Builds the plan for one frame from its qualifying detections.
/// Blur anywhere adds Deblur; saturation or contrast adds Exposure
/// (direction by the larger total box area, saturation on ties);
/// specularity, bubbles, or misc artifacts add Inpaint over their
/// dilated boxes.
pub fn plan_restoration(
    detections: &[Detection],
    width: usize,
    height: usize,
    cfg: &PipelineConfig,
) -> Result<RestorationPlan> {
    cfg.validate()?;
    if width == 0 || height == 0 {
        return Err(Error::invalid("frame dimensions must be nonzero"));
    }
    let qualifying: Vec<&Detection> = detections
        .iter()
        .filter(|d| d.confidence >= cfg.confidence_threshold)
        .collect();
    let mut stages = Vec::new();

    let blur: Vec<Detection> = qualifying
        .iter()
        .filter(|d| d.class == ArtifactClass::Blur)
        .map(|d| **d)
        .collect();
    if !blur.is_empty() {
        stages.push(PlannedStage {
            kind: StageKind::Deblur,
            mask: None,
            direction: None,
            detections: blur,
        });
    }

    let exposure: Vec<Detection> = qualifying
        .iter()
        .filter(|d| matches!(d.class, ArtifactClass::Saturation | ArtifactClass::Contrast))
        .map(|d| **d)
        .collect();
    if !exposure.is_empty() {
        let area = |class: ArtifactClass| -> f64 {
            exposure
                .iter()
                .filter(|d| d.class == class)
                .map(|d| d.bbox.area_fraction())
                .sum()
        };
        let direction = if area(ArtifactClass::Saturation) >= area(ArtifactClass::Contrast) {
            ExposureDirection::Saturation
        } else {
            ExposureDirection::LowContrast
        };
        stages.push(PlannedStage {
            kind: StageKind::Exposure,
            mask: None,
            direction: Some(direction),
            detections: exposure,
        });
    }

    let local: Vec<Detection> = qualifying
        .iter()
        .filter(|d| {
            matches!(
                d.class,
                ArtifactClass::Specularity | ArtifactClass::Bubbles | ArtifactClass::Misc
            )
        })
        .map(|d| **d)
        .collect();
    if !local.is_empty() {
        let radius = dilation_pixels(cfg.dilation_radius, width, height);
        let boxes: Vec<_> = local.iter().map(|d| d.bbox).collect();
        let mask = boxes_to_mask(&boxes, width, height, radius)?;
        stages.push(PlannedStage {
            kind: StageKind::Inpaint,
            mask: Some(mask),
            direction: None,
            detections: local,
        });
    }

    Ok(RestorationPlan { stages })
}

/// One executed (or skipped) stage in a frame's log.
#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stage: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// What came out of running a plan on one frame.
#[derive(Debug)]
pub struct RestoreResult {
    /// The restored frame, or None when a stage failed: a frame that a
    /// stage corrupted is withdrawn rather than passed along.
    pub frame: Option<Frame>,
    pub stages: Vec<StageRecord>,
    pub failure: Option<String>,
}

fn sub_ceiling_mask(frame: &Frame, ceiling: f64) -> Result<Mask> {
    let c = frame.channels();
    Mask::from_fn(frame.width(), frame.height(), |x, y| {
        (0..c).fold(0.0f64, |m, ch| m.max(frame.get(x, y, ch))) < ceiling
    })
}

/// Runs the plan's stages in order. An empty plan returns the input
/// bit-exact. Any stage error stops execution and reports a failure
/// instead of a frame.
pub fn restore_frame(frame: &Frame, plan: &RestorationPlan, cfg: &PipelineConfig) -> RestoreResult {
    let mut current = frame.clone();
    let mut stages = Vec::new();
    let fail = |stages: Vec<StageRecord>, reason: String| RestoreResult {
        frame: None,
        stages,
        failure: Some(reason),
    };

    for stage in &plan.stages {
        match stage.kind {
            StageKind::Deblur => match tv_deconvolve(&current, None, &cfg.tv_deblur) {
                Ok(f) => {
                    current = f;
                    stages.push(StageRecord {
                        stage: "deblur",
                        note: None,
                    });
                }
                Err(e) => return fail(stages, format!("deblur: {e}")),
            },
            StageKind::Exposure => {
                let Some(direction) = stage.direction else {
                    return fail(stages, "exposure stage without a direction".into());
                };
                // The healthy pixel set is fixed before correction; its
                // post-correction statistics drive the color retransfer.
                let healthy = match sub_ceiling_mask(&current, cfg.intensity_ceiling) {
                    Ok(m) => m,
                    Err(e) => return fail(stages, format!("exposure: {e}")),
                };
                let corrected = match exposure_correct(&current, direction, cfg.intensity_ceiling)
                {
                    Ok(r) => r,
                    Err(e) => return fail(stages, format!("exposure: {e}")),
                };
                let mut notes = Vec::new();
                if corrected.degenerate {
                    notes.push("exposure-degenerate".to_string());
                } else {
                    notes.push(format!("gamma-estimate={:.4}", corrected.gamma_estimate));
                }
                current = corrected.frame;
                match (
                    color_stats_over_mask(&current, &healthy),
                    color_stats(&current, cfg.intensity_ceiling),
                ) {
                    (Ok(src), Ok(tgt)) => match color_retransfer(&current, &src, &tgt) {
                        Ok(crt) => {
                            if crt.regularized {
                                notes.push("crt-regularized".to_string());
                            }
                            notes.push("crt".to_string());
                            current = crt.frame;
                        }
                        Err(e) => return fail(stages, format!("color retransfer: {e}")),
                    },
                    _ => notes.push("crt-skipped-thin-stats".to_string()),
                }
                stages.push(StageRecord {
                    stage: "exposure",
                    note: Some(notes.join(";")),
                });
            }
            StageKind::Inpaint => {
                let Some(mask) = stage.mask.as_ref() else {
                    return fail(stages, "inpaint stage without a mask".into());
                };
                if !mask.any() {
                    stages.push(StageRecord {
                        stage: "inpaint",
                        note: Some("empty-mask".to_string()),
                    });
                    continue;
                }
                match cfg.inpaint_method {
                    InpaintMethod::Tv => match tv_inpaint(&current, mask, &cfg.tv_inpaint) {
                        Ok(f) => {
                            current = f;
                            stages.push(StageRecord {
                                stage: "inpaint",
                                note: Some("tv".to_string()),
                            });
                        }
                        Err(e) => return fail(stages, format!("inpaint: {e}")),
                    },
                    InpaintMethod::Patch => match patch_inpaint(&current, mask, cfg.patch_side) {
                        Ok(p) => {
                            let note = if p.tv_fallback_pixels > 0 {
                                format!("patch;tv-fallback={}px", p.tv_fallback_pixels)
                            } else {
                                "patch".to_string()
                            };
                            current = p.frame;
                            stages.push(StageRecord {
                                stage: "inpaint",
                                note: Some(note),
                            });
                        }
                        Err(e) => return fail(stages, format!("inpaint: {e}")),
                    },
                }
            }
        }
    }

    RestoreResult {
        frame: Some(current),
        stages,
        failure: None,
    }
}

/// One frame's worth of work for [`process_video`]: its id and sidecar
/// detections (already validated).
#[derive(Debug, Clone)]
pub struct FrameTask {
    pub frame_id: String,
    pub detections: Vec<Detection>,
}

/// Per-frame record in the video report.
#[derive(Debug, Clone, Serialize)]
pub struct FrameLog {
    pub frame_id: String,
    pub qs: f64,
    pub disposition: Disposition,
    pub stages: Vec<StageRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Score over detections no executed stage addressed (rescore only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qs_post: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr_pre: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr_post: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssim_pre: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssim_post: Option<f64>,
}

/// Video-level accounting.
#[derive(Debug, Clone, Serialize)]
pub struct VideoReport {
    pub total: usize,
    pub kept: usize,
    pub restored: usize,
    pub discarded: usize,
    pub kept_fraction: f64,
    pub restored_fraction: f64,
    pub discarded_fraction: f64,
    /// Qualifying detections per class code across the video.
    pub class_histogram: [usize; 6],
    pub frames: Vec<FrameLog>,
}

fn process_one<L, G>(
    index: usize,
    task: &FrameTask,
    cfg: &PipelineConfig,
    load: &L,
    ground_truth: Option<&G>,
) -> (FrameLog, Option<Frame>)
where
    L: Fn(usize, &FrameTask) -> Result<Frame> + Sync,
    G: Fn(usize, &FrameTask) -> Result<Frame> + Sync,
{
    let qualifying: Vec<Detection> = task
        .detections
        .iter()
        .filter(|d| d.confidence >= cfg.confidence_threshold)
        .cloned()
        .collect();
    let mut log = FrameLog {
        frame_id: task.frame_id.clone(),
        qs: 0.0,
        disposition: Disposition::Discard,
        stages: Vec::new(),
        failure: None,
        qs_post: None,
        psnr_pre: None,
        psnr_post: None,
        ssim_pre: None,
        ssim_post: None,
    };
    let report = match quality_score(&qualifying, &cfg.quality) {
        Ok(r) => r,
        Err(e) => {
            log.failure = Some(format!("scoring: {e}"));
            return (log, None);
        }
    };
    log.qs = report.qs;
    log.disposition = triage(report.qs, &cfg.quality);
    if log.disposition != Disposition::Restore {
        return (log, None);
    }

    let frame = match load(index, task) {
        Ok(f) => f,
        Err(e) => {
            log.disposition = Disposition::Discard;
            log.failure = Some(format!("load: {e}"));
            return (log, None);
        }
    };
    let plan = match plan_restoration(&qualifying, frame.width(), frame.height(), cfg) {
        Ok(p) => p,
        Err(e) => {
            log.disposition = Disposition::Discard;
            log.failure = Some(format!("planning: {e}"));
            return (log, None);
        }
    };
    let result = restore_frame(&frame, &plan, cfg);
    log.stages = result.stages;
    let Some(restored) = result.frame else {
        log.disposition = Disposition::Discard;
        log.failure = result.failure;
        return (log, None);
    };

    if cfg.rescore {
        let executed: Vec<&str> = log.stages.iter().map(|s| s.stage).collect();
        let unaddressed: Vec<Detection> = qualifying
            .iter()
            .filter(|d| {
                let stage = match d.class {
                    ArtifactClass::Blur => "deblur",
                    ArtifactClass::Saturation | ArtifactClass::Contrast => "exposure",
                    _ => "inpaint",
                };
                !executed.contains(&stage)
            })
            .cloned()
            .collect();
        log.qs_post = quality_score(&unaddressed, &cfg.quality).ok().map(|r| r.qs);
    }
    if let Some(gt) = ground_truth {
        if let Ok(clean) = gt(index, task) {
            log.psnr_pre = psnr(&clean, &frame).ok();
            log.psnr_post = psnr(&clean, &restored).ok();
            log.ssim_pre = ssim(&clean, &frame).ok();
            log.ssim_post = ssim(&clean, &restored).ok();
        }
    }
    (log, Some(restored))
}

/// Triage and restore a whole video. Frames are processed in parallel
/// chunks but `emit` runs strictly in input order: it receives the log
/// plus the restored frame (None for Keep and Discard — the Keep path
/// leaves the original untouched so callers can copy it byte-for-byte).
/// `load` is only invoked for frames that need restoration.
pub fn process_video<L, G, E>(
    tasks: &[FrameTask],
    cfg: &PipelineConfig,
    load: L,
    ground_truth: Option<G>,
    mut emit: E,
) -> Result<VideoReport>
where
    L: Fn(usize, &FrameTask) -> Result<Frame> + Sync,
    G: Fn(usize, &FrameTask) -> Result<Frame> + Sync,
    E: FnMut(usize, &FrameTask, &FrameLog, Option<&Frame>) -> Result<()>,
{
    cfg.validate()?;
    if tasks.is_empty() {
        return Err(Error::invalid("no frames to process"));
    }

    // Bounded chunks keep memory at a few restored frames while letting
    // rayon fill the cores.
    let chunk_size = rayon::current_num_threads().max(1) * 2;
    let mut logs = Vec::with_capacity(tasks.len());
    let mut class_histogram = [0usize; 6];
    let gt = ground_truth.as_ref();

    for (chunk_index, chunk) in tasks.chunks(chunk_size).enumerate() {
        let base = chunk_index * chunk_size;
        let results: Vec<(FrameLog, Option<Frame>)> = chunk
            .par_iter()
            .enumerate()
            .map(|(j, task)| process_one(base + j, task, cfg, &load, gt))
            .collect();
        for (j, (log, frame)) in results.into_iter().enumerate() {
            let task = &chunk[j];
            emit(base + j, task, &log, frame.as_ref())?;
            for d in &task.detections {
                if d.confidence >= cfg.confidence_threshold {
                    class_histogram[d.class.code() as usize] += 1;
                }
            }
            logs.push(log);
        }
    }

    let total = logs.len();
    let kept = logs
        .iter()
        .filter(|l| l.disposition == Disposition::Keep)
        .count();
    let restored = logs
        .iter()
        .filter(|l| l.disposition == Disposition::Restore)
        .count();
    let discarded = total - kept - restored;
    Ok(VideoReport {
        total,
        kept,
        restored,
        discarded,
        kept_fraction: kept as f64 / total as f64,
        restored_fraction: restored as f64 / total as f64,
        discarded_fraction: discarded as f64 / total as f64,
        class_histogram,
        frames: logs,
    })
}

/// Retention of the hard baseline that discards every frame carrying
/// any qualifying detection.
pub fn baseline_keep_count(tasks: &[FrameTask], cfg: &PipelineConfig) -> usize {
    tasks
        .iter()
        .filter(|t| {
            t.detections
                .iter()
                .all(|d| d.confidence < cfg.confidence_threshold)
        })
        .count()
}
