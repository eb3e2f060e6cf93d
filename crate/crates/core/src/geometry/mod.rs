//! Shared raster and box geometry: frames, masks, normalized boxes,
//! artifact classes, and the measurements the scorer and evaluator take
//! on boxes (IoU, area fraction, location weight).
//!
//! Boxes are axis-aligned and normalized: `x`, `y` is the top-left corner
//! in `[0,1]`, `w`, `h` are strictly positive extents with `x+w` and `y+h`
//! at most 1 (within 1e-9 slack for round-tripped values).

mod frame;
mod mask;
pub mod raster;

pub use frame::{BitDepth, Frame};
pub use mask::{boxes_to_mask, dilate_mask, Mask};

use crate::{Error, Result};

/// Slack accepted on `x+w <= 1` so serialized boxes survive round trips.
pub const BBOX_EDGE_SLACK: f64 = 1e-9;

/// Artifact classes a detector can report, with their stable wire codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactClass {
    Blur,
    Bubbles,
    Specularity,
    Saturation,
    Contrast,
    Misc,
}

impl ArtifactClass {
    pub const ALL: [ArtifactClass; 6] = [
        ArtifactClass::Blur,
        ArtifactClass::Bubbles,
        ArtifactClass::Specularity,
        ArtifactClass::Saturation,
        ArtifactClass::Contrast,
        ArtifactClass::Misc,
    ];

    /// Integer code used in detection sidecars. Stable across releases.
    pub fn code(self) -> u8 {
        match self {
            ArtifactClass::Blur => 0,
            ArtifactClass::Bubbles => 1,
            ArtifactClass::Specularity => 2,
            ArtifactClass::Saturation => 3,
            ArtifactClass::Contrast => 4,
            ArtifactClass::Misc => 5,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.code() == code)
            .ok_or_else(|| Error::invalid(format!("unknown artifact class code {code}")))
    }

    /// Snake-case name used in logs and reports.
    pub fn name(self) -> &'static str {
        match self {
            ArtifactClass::Blur => "blur",
            ArtifactClass::Bubbles => "bubbles",
            ArtifactClass::Specularity => "specularity",
            ArtifactClass::Saturation => "saturation",
            ArtifactClass::Contrast => "contrast",
            ArtifactClass::Misc => "misc_artifact",
        }
    }
}

impl std::fmt::Display for ArtifactClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Axis-aligned box in normalized frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = BBox { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let BBox { x, y, w, h } = *self;
        let ok = [x, y, w, h].iter().all(|v| v.is_finite())
            && (0.0..=1.0).contains(&x)
            && (0.0..=1.0).contains(&y)
            && w > 0.0
            && h > 0.0
            && x + w <= 1.0 + BBOX_EDGE_SLACK
            && y + h <= 1.0 + BBOX_EDGE_SLACK;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "box out of range: x={x} y={y} w={w} h={h}"
            )))
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Fraction of the frame the box covers. Equals `w * h` because
    /// coordinates are normalized.
    pub fn area_fraction(&self) -> f64 {
        self.w * self.h
    }
}

/// Intersection over union of two boxes, in `[0,1]`.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = f64::min(a.x + a.w, b.x + b.w) - f64::max(a.x, b.x);
    let iy = f64::min(a.y + a.h, b.y + b.h) - f64::max(a.y, b.y);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    inter / (a.area_fraction() + b.area_fraction() - inter)
}

/// See [`BBox::area_fraction`]. Free-function form for symmetry with [`iou`].
pub fn area_fraction(b: &BBox) -> f64 {
    b.area_fraction()
}

/// Importance of each cell in a 3x3 uniform grid over the unit square.
///
/// The default mirrors clinical reading: the central region matters most,
/// edge cells half as much, corner cells half again.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocationGrid {
    /// `weights[row][col]`, row-major from the top-left cell.
    pub weights: [[f64; 3]; 3],
}

impl Default for LocationGrid {
    fn default() -> Self {
        LocationGrid {
            weights: [
                [0.125, 0.25, 0.125],
                [0.25, 0.5, 0.25],
                [0.125, 0.25, 0.125],
            ],
        }
    }
}

/// Weight of the grid cell containing the box center.
///
/// Cell boundaries (multiples of 1/3) belong to the cell on their right or
/// below; a center exactly on the far frame edge stays in the last cell.
pub fn location_weight(b: &BBox, grid: &LocationGrid) -> f64 {
    let (cx, cy) = b.center();
    let col = ((cx * 3.0).floor() as usize).min(2);
    let row = ((cy * 3.0).floor() as usize).min(2);
    grid.weights[row][col]
}

/// One detector output: a labelled box with a confidence in `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub class: ArtifactClass,
    pub bbox: BBox,
    pub confidence: f64,
}

impl Detection {
    pub fn new(class: ArtifactClass, bbox: BBox, confidence: f64) -> Result<Self> {
        if !(confidence.is_finite() && (0.0..=1.0).contains(&confidence)) {
            return Err(Error::invalid(format!(
                "confidence {confidence} outside [0,1]"
            )));
        }
        Ok(Detection {
            class,
            bbox,
            confidence,
        })
    }
}
