//! Boolean pixel masks and the box-to-mask rasterizer used by the
//! inpainting stages.

use super::BBox;
use crate::{Error, Result};

/// Per-pixel boolean raster. `true` marks pixels an operation acts on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new_false(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("mask dimensions must be nonzero"));
        }
        Ok(Mask {
            width,
            height,
            data: vec![false; width * height],
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut m = Mask::new_false(width, height)?;
        for y in 0..height {
            for x in 0..width {
                m.data[y * width + x] = f(x, y);
            }
        }
        Ok(m)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    /// Fraction of pixels set, in `[0,1]`.
    pub fn fraction(&self) -> f64 {
        self.count_true() as f64 / (self.width * self.height) as f64
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|v| *v)
    }

    pub fn all(&self) -> bool {
        self.data.iter().all(|v| *v)
    }

    pub fn union_in_place(&mut self, other: &Mask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::ShapeMismatch(format!(
                "mask {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a |= *b;
        }
        Ok(())
    }

    /// True where `self` is set and `other` is not.
    pub fn difference(&self, other: &Mask) -> Result<Mask> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::ShapeMismatch("mask size mismatch".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a = *a && !*b;
        }
        Ok(out)
    }
}

/// Dilates with a square structuring element of side `2*radius + 1`.
///
/// The square is separable, so this runs as a horizontal pass then a
/// vertical pass. `radius == 0` returns the input unchanged.
pub fn dilate_mask(mask: &Mask, radius: usize) -> Mask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width, mask.height);
    let mut horiz = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            if mask.data[y * w + x] {
                let x0 = x.saturating_sub(radius);
                let x1 = (x + radius).min(w - 1);
                for out in &mut horiz[y * w + x0..=y * w + x1] {
                    *out = true;
                }
            }
        }
    }
    let mut out = Mask {
        width: w,
        height: h,
        data: vec![false; w * h],
    };
    for y in 0..h {
        for x in 0..w {
            if horiz[y * w + x] {
                let y0 = y.saturating_sub(radius);
                let y1 = (y + radius).min(h - 1);
                for yy in y0..=y1 {
                    out.data[yy * w + x] = true;
                }
            }
        }
    }
    out
}

/// Rasterizes normalized boxes onto a pixel grid and unions them, then
/// dilates by `dilate_radius`.
///
/// Each edge maps to a pixel index by rounding half away from zero, so a
/// box spanning `[0.1, 0.3)` horizontally on a 100-wide frame covers
/// columns 10..30. An empty box list gives an all-false mask. Boxes thin
/// enough to round to zero pixels contribute nothing.
pub fn boxes_to_mask(
    boxes: &[BBox],
    width: usize,
    height: usize,
    dilate_radius: usize,
) -> Result<Mask> {
    let mut mask = Mask::new_false(width, height)?;
    for b in boxes {
        b.validate()?;
        let x0 = ((b.x * width as f64).round() as usize).min(width);
        let x1 = (((b.x + b.w) * width as f64).round() as usize).min(width);
        let y0 = ((b.y * height as f64).round() as usize).min(height);
        let y1 = (((b.y + b.h) * height as f64).round() as usize).min(height);
        for y in y0..y1 {
            for x in x0..x1 {
                mask.set(x, y, true);
            }
        }
    }
    Ok(if dilate_radius > 0 {
        dilate_mask(&mask, dilate_radius)
    } else {
        mask
    })
}
