//! Frame usability scoring and triage.
//!
//! Every detection charges the frame a penalty that scales with how
//! severe its artifact class is, how much area it covers, and how close
//! to the frame center it sits:
//!
//! ```text
//! qs = clamp(1 - sum_b (la * wc[b] * area(b) + ll * wc[b] * loc(b)), 0, 1)
//! ```
//!
//! With fewer boxes than `small_count_cutoff` the lambda pair switches
//! from (0.5, 0.5) to (1, 1): sparse detections are trusted more, so each
//! one counts at full weight. The score then routes the frame: below
//! `discard_below` it is discarded, above `keep_above` kept untouched,
//! otherwise sent to restoration. Both comparisons are strict, so a score
//! exactly on a threshold goes to restoration.

use crate::geometry::{location_weight, ArtifactClass, Detection, LocationGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityConfig {
    /// Per-class severity, indexed by `ArtifactClass::code()`.
    pub class_weights: [f64; 6],
    /// Area-term weight when at least `small_count_cutoff` boxes are present.
    pub lambda_area: f64,
    /// Location-term weight under the same condition.
    pub lambda_location: f64,
    /// Box counts below this use lambdas of 1.0 instead.
    pub small_count_cutoff: usize,
    /// Scores strictly below this are discarded.
    pub discard_below: f64,
    /// Scores strictly above this are kept without restoration.
    pub keep_above: f64,
    pub location_grid: LocationGrid,
}

impl Default for QualityConfig {
    fn default() -> Self {
        let mut class_weights = [0.0; 6];
        class_weights[ArtifactClass::Blur.code() as usize] = 0.05;
        class_weights[ArtifactClass::Bubbles.code() as usize] = 0.10;
        class_weights[ArtifactClass::Specularity.code() as usize] = 0.20;
        class_weights[ArtifactClass::Saturation.code() as usize] = 0.10;
        class_weights[ArtifactClass::Contrast.code() as usize] = 0.05;
        class_weights[ArtifactClass::Misc.code() as usize] = 0.50;
        QualityConfig {
            class_weights,
            lambda_area: 0.5,
            lambda_location: 0.5,
            small_count_cutoff: 5,
            discard_below: 0.5,
            keep_above: 0.95,
            location_grid: LocationGrid::default(),
        }
    }
}

impl QualityConfig {
    pub fn validate(&self) -> Result<()> {
        let weights_ok = self
            .class_weights
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0);
        let lambdas_ok = [self.lambda_area, self.lambda_location]
            .iter()
            .all(|l| l.is_finite() && *l >= 0.0);
        let thresholds_ok = self.discard_below.is_finite()
            && self.keep_above.is_finite()
            && (0.0..=1.0).contains(&self.discard_below)
            && (0.0..=1.0).contains(&self.keep_above)
            && self.discard_below <= self.keep_above;
        let grid_ok = self
            .location_grid
            .weights
            .iter()
            .flatten()
            .all(|w| w.is_finite() && *w >= 0.0);
        if weights_ok && lambdas_ok && thresholds_ok && grid_ok {
            Ok(())
        } else {
            Err(Error::invalid("quality config out of range"))
        }
    }

    pub fn class_weight(&self, class: ArtifactClass) -> f64 {
        self.class_weights[class.code() as usize]
    }
}

/// Where triage sends a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Disposition {
    Keep,
    Restore,
    Discard,
}

impl Disposition {
    pub fn name(self) -> &'static str {
        match self {
            Disposition::Keep => "keep",
            Disposition::Restore => "restore",
            Disposition::Discard => "discard",
        }
    }
}

impl std::fmt::Display for Disposition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One detection's share of the quality penalty. `area_term` and
/// `location_term` already include the lambda and class factors, so
/// `qs == clamp(1 - sum of all terms)` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxContribution {
    pub detection: Detection,
    pub area_term: f64,
    pub location_term: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub qs: f64,
    pub disposition: Disposition,
    pub contributions: Vec<BoxContribution>,
}

/// Scores one frame's detections.
///
/// The caller decides which detections count; confidence filtering (the
/// pipeline drops boxes under its threshold) happens before this call.
pub fn quality_score(detections: &[Detection], cfg: &QualityConfig) -> Result<QualityReport> {
    cfg.validate()?;
    let (lambda_area, lambda_location) = if detections.len() < cfg.small_count_cutoff {
        (1.0, 1.0)
    } else {
        (cfg.lambda_area, cfg.lambda_location)
    };
    let mut contributions = Vec::with_capacity(detections.len());
    let mut penalty = 0.0;
    for det in detections {
        det.bbox.validate()?;
        if !(det.confidence.is_finite() && (0.0..=1.0).contains(&det.confidence)) {
            return Err(Error::invalid(format!(
                "confidence {} outside [0,1]",
                det.confidence
            )));
        }
        let wc = cfg.class_weight(det.class);
        let area_term = lambda_area * wc * det.bbox.area_fraction();
        let location_term =
            lambda_location * wc * location_weight(&det.bbox, &cfg.location_grid);
        penalty += area_term + location_term;
        contributions.push(BoxContribution {
            detection: *det,
            area_term,
            location_term,
        });
    }
    let qs = (1.0 - penalty).clamp(0.0, 1.0);
    Ok(QualityReport {
        qs,
        disposition: triage(qs, cfg),
        contributions,
    })
}

/// Routes a score. Strict inequalities: a score exactly at either
/// threshold restores.
pub fn triage(qs: f64, cfg: &QualityConfig) -> Disposition {
    if qs < cfg.discard_below {
        Disposition::Discard
    } else if qs > cfg.keep_above {
        Disposition::Keep
    } else {
        Disposition::Restore
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use approx::assert_abs_diff_eq;

    fn det(class: ArtifactClass, x: f64, y: f64, w: f64, h: f64) -> Detection {
        Detection::new(class, BBox::new(x, y, w, h).unwrap(), 0.9).unwrap()
    }

    fn central(class: ArtifactClass, area: f64) -> Detection {
        // Square of the given area centered on the frame.
        let side = area.sqrt();
        det(class, 0.5 - side / 2.0, 0.5 - side / 2.0, side, side)
    }

    #[test]
    fn no_detections_scores_one_and_keeps() {
        let r = quality_score(&[], &QualityConfig::default()).unwrap();
        assert_eq!(r.qs, 1.0);
        assert_eq!(r.disposition, Disposition::Keep);
        assert!(r.contributions.is_empty());
    }

    #[test]
    fn single_full_frame_misc_box_scores_quarter() {
        // One box: lambdas 1. Penalty = 0.5*1.0 + 0.5*0.5 = 0.75.
        let r = quality_score(
            &[det(ArtifactClass::Misc, 0.0, 0.0, 1.0, 1.0)],
            &QualityConfig::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(r.qs, 0.25, epsilon = 1e-9);
        assert_eq!(r.disposition, Disposition::Discard);
    }

    #[test]
    fn six_central_specularity_boxes_score_point_sixty_four() {
        // Six boxes: lambdas 0.5. Per box 0.5*0.2*0.1 + 0.5*0.2*0.5 = 0.06.
        let dets = vec![central(ArtifactClass::Specularity, 0.1); 6];
        let r = quality_score(&dets, &QualityConfig::default()).unwrap();
        assert_abs_diff_eq!(r.qs, 0.64, epsilon = 1e-9);
        assert_eq!(r.disposition, Disposition::Restore);
    }

    #[test]
    fn heavy_penalty_clamps_to_zero() {
        // Three full-frame misc boxes: 3 * (0.5 + 0.25) = 2.25 over budget.
        let dets = vec![det(ArtifactClass::Misc, 0.0, 0.0, 1.0, 1.0); 3];
        let r = quality_score(&dets, &QualityConfig::default()).unwrap();
        assert_eq!(r.qs, 0.0);
        assert_eq!(r.disposition, Disposition::Discard);
    }

    #[test]
    fn triage_thresholds_are_strict() {
        let cfg = QualityConfig::default();
        assert_eq!(triage(0.40, &cfg), Disposition::Discard);
        assert_eq!(triage(0.70, &cfg), Disposition::Restore);
        assert_eq!(triage(0.96, &cfg), Disposition::Keep);
        assert_eq!(triage(0.5, &cfg), Disposition::Restore);
        assert_eq!(triage(0.95, &cfg), Disposition::Restore);
    }

    #[test]
    fn lambda_switch_happens_below_cutoff_not_at_it() {
        // Identical central specularity boxes, area 0.04 each.
        // 4 boxes: per-box penalty 1.0*0.2*(0.04 + 0.5) = 0.108.
        // 5 boxes: per-box penalty 0.5*0.2*(0.04 + 0.5) = 0.054.
        let b4 = vec![central(ArtifactClass::Specularity, 0.04); 4];
        let b5 = vec![central(ArtifactClass::Specularity, 0.04); 5];
        let cfg = QualityConfig::default();
        let r4 = quality_score(&b4, &cfg).unwrap();
        let r5 = quality_score(&b5, &cfg).unwrap();
        assert_abs_diff_eq!(r4.qs, 1.0 - 4.0 * 0.108, epsilon = 1e-12);
        assert_abs_diff_eq!(r5.qs, 1.0 - 5.0 * 0.054, epsilon = 1e-12);
        // The fifth identical box can raise the score by halving lambdas.
        assert!(r5.qs > r4.qs);
    }

    #[test]
    fn contributions_resum_to_qs() {
        let dets = vec![
            central(ArtifactClass::Blur, 0.2),
            det(ArtifactClass::Saturation, 0.0, 0.0, 0.3, 0.3),
            det(ArtifactClass::Bubbles, 0.6, 0.1, 0.3, 0.2),
        ];
        let r = quality_score(&dets, &QualityConfig::default()).unwrap();
        let sum: f64 = r
            .contributions
            .iter()
            .map(|c| c.area_term + c.location_term)
            .sum();
        assert_abs_diff_eq!(r.qs, (1.0 - sum).clamp(0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn central_contrast_outscores_misc_with_company() {
        let cfg = QualityConfig::default();
        let contrast_only = quality_score(&[central(ArtifactClass::Contrast, 0.5)], &cfg).unwrap();
        let misc_and_spec = quality_score(
            &[
                central(ArtifactClass::Misc, 0.5),
                det(ArtifactClass::Specularity, 0.0, 0.0, 0.1, 0.1),
            ],
            &cfg,
        )
        .unwrap();
        assert!(contrast_only.qs > misc_and_spec.qs);
    }

    #[test]
    fn rejects_invalid_config() {
        let cfg = QualityConfig {
            discard_below: 0.99,
            keep_above: 0.5,
            ..QualityConfig::default()
        };
        assert!(quality_score(&[], &cfg).is_err());
        let mut cfg = QualityConfig::default();
        cfg.class_weights[0] = f64::NAN;
        assert!(quality_score(&[], &cfg).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_class() -> impl Strategy<Value = ArtifactClass> {
            (0u8..6).prop_map(|c| ArtifactClass::from_code(c).unwrap())
        }

        fn arb_det() -> impl Strategy<Value = Detection> {
            (arb_class(), 0.0..0.7f64, 0.0..0.7f64, 0.01..0.3f64, 0.01..0.3f64)
                .prop_map(|(class, x, y, w, h)| {
                    Detection::new(class, BBox::new(x, y, w, h).unwrap(), 0.8).unwrap()
                })
        }

        proptest! {
            #[test]
            fn qs_stays_in_unit_range(dets in proptest::collection::vec(arb_det(), 0..12)) {
                let r = quality_score(&dets, &QualityConfig::default()).unwrap();
                prop_assert!((0.0..=1.0).contains(&r.qs));
            }

            #[test]
            fn growing_a_box_never_raises_qs(dets in proptest::collection::vec(arb_det(), 1..8), grow in 1.01..1.5f64) {
                let cfg = QualityConfig::default();
                let base = quality_score(&dets, &cfg).unwrap();
                // Grow the first box about its center, staying in frame.
                let mut grown = dets.clone();
                let b = grown[0].bbox;
                let (cx, cy) = b.center();
                let w = (b.w * grow).min(2.0 * cx.min(1.0 - cx));
                let h = (b.h * grow).min(2.0 * cy.min(1.0 - cy));
                if w > b.w && h > b.h {
                    grown[0].bbox = BBox::new(cx - w / 2.0, cy - h / 2.0, w, h).unwrap();
                    let r = quality_score(&grown, &cfg).unwrap();
                    prop_assert!(r.qs <= base.qs + 1e-12);
                }
            }

            #[test]
            fn centering_a_corner_box_never_raises_qs(dets in proptest::collection::vec(arb_det(), 1..8)) {
                let cfg = QualityConfig::default();
                // Move the first box to a corner cell, then to the center cell.
                let mut corner = dets.clone();
                let b = corner[0].bbox;
                corner[0].bbox = BBox::new(0.0, 0.0, b.w.min(0.3), b.h.min(0.3)).unwrap();
                let mut center = corner.clone();
                let cb = center[0].bbox;
                center[0].bbox =
                    BBox::new(0.5 - cb.w / 2.0, 0.5 - cb.h / 2.0, cb.w, cb.h).unwrap();
                let qc = quality_score(&corner, &cfg).unwrap().qs;
                let qm = quality_score(&center, &cfg).unwrap().qs;
                prop_assert!(qm <= qc + 1e-12);
            }
        }
    }
}
