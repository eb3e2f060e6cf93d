//! Greedy exemplar-based inpainting: repeatedly pick the masked
//! boundary patch backed by the most known pixels, then copy the
//! best-matching fully-known source patch over its unknown pixels.

use crate::geometry::Mask;
use crate::restore::{tv_inpaint, TvParams};
use crate::{Error, Frame, Result};

pub const DEFAULT_PATCH_SIDE: usize = 9;

/// Source patches are first searched within this radius of the target;
/// the whole frame is scanned only when the local window has none.
const LOCAL_SEARCH_RADIUS: usize = 48;

/// Outcome of [`patch_inpaint`].
#[derive(Debug, Clone)]
pub struct PatchFill {
    pub frame: Frame,
    /// Pixels that had to be filled by the TV solver because no valid
    /// source patch existed. Zero when the exemplar fill completed.
    pub tv_fallback_pixels: usize,
}

/// Fills masked pixels by exemplar copying. Fill order follows patch
/// confidence (mean over the patch window; known pixels start at 1,
/// filled pixels inherit the priority of the patch that filled them).
/// Sources are windows of originally-known pixels only, matched by SSD
/// over the currently-known pixels of the target window, first minimum
/// in scan order. If no source window exists the remainder falls back
/// to [`tv_inpaint`]. Pixels outside the mask are returned bit-exact.
pub fn patch_inpaint(f: &Frame, mask: &Mask, patch_side: usize) -> Result<PatchFill> {
    if patch_side == 0 || patch_side.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "patch side {patch_side} must be odd and positive"
        )));
    }
    let (w, h, c) = (f.width(), f.height(), f.channels());
    if mask.width() != w || mask.height() != h {
        return Err(Error::ShapeMismatch(format!(
            "mask {}x{} for frame {w}x{h}",
            mask.width(),
            mask.height()
        )));
    }
    if mask.all() {
        return Err(Error::invalid("mask covers the entire frame"));
    }
    if !mask.any() {
        return Ok(PatchFill {
            frame: f.clone(),
            tv_fallback_pixels: 0,
        });
    }

    let r = patch_side / 2;
    let side2 = (patch_side * patch_side) as f64;
    let known0: Vec<bool> = mask.data().iter().map(|m| !m).collect();

    // Centers whose full window lies inside the frame and holds only
    // originally-known pixels, via an integral image of known0.
    let mut integral = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        for x in 0..w {
            integral[(y + 1) * (w + 1) + (x + 1)] = integral[y * (w + 1) + (x + 1)]
                + integral[(y + 1) * (w + 1) + x]
                - integral[y * (w + 1) + x]
                + u32::from(known0[y * w + x]);
        }
    }
    let window_known = |cx: usize, cy: usize| -> u32 {
        let (x0, y0) = (cx - r, cy - r);
        let (x1, y1) = (cx + r + 1, cy + r + 1);
        integral[y1 * (w + 1) + x1] + integral[y0 * (w + 1) + x0]
            - integral[y0 * (w + 1) + x1]
            - integral[y1 * (w + 1) + x0]
    };
    let mut source_centers = Vec::new();
    let mut valid_source = vec![false; w * h];
    if w >= patch_side && h >= patch_side {
        for cy in r..h - r {
            for cx in r..w - r {
                if window_known(cx, cy) == (patch_side * patch_side) as u32 {
                    valid_source[cy * w + cx] = true;
                    source_centers.push((cx, cy));
                }
            }
        }
    }
    if source_centers.is_empty() {
        let filled = tv_inpaint(f, mask, &TvParams::for_inpainting())?;
        return Ok(PatchFill {
            frame: filled,
            tv_fallback_pixels: mask.count_true(),
        });
    }

    let mut planes: Vec<Vec<f64>> = (0..c).map(|ch| f.plane(ch)).collect();
    let mut unknown: Vec<bool> = mask.data().to_vec();
    let mut confidence: Vec<f64> = known0.iter().map(|k| if *k { 1.0 } else { 0.0 }).collect();
    let mut remaining = mask.count_true();

    while remaining > 0 {
        // Highest-confidence boundary patch; first in scan order on ties.
        let mut best_priority = f64::NEG_INFINITY;
        let mut target = None;
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if !unknown[i] {
                    continue;
                }
                let boundary = (x > 0 && !unknown[i - 1])
                    || (x + 1 < w && !unknown[i + 1])
                    || (y > 0 && !unknown[i - w])
                    || (y + 1 < h && !unknown[i + w]);
                if !boundary {
                    continue;
                }
                let mut s = 0.0;
                for wy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                    for wx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                        s += confidence[wy * w + wx];
                    }
                }
                let priority = s / side2;
                if priority > best_priority {
                    best_priority = priority;
                    target = Some((x, y));
                }
            }
        }
        let Some((cx, cy)) = target else {
            break;
        };

        // Relative offsets of currently-known pixels in the target window.
        let mut offsets = Vec::new();
        for dy in -(r as isize)..=r as isize {
            for dx in -(r as isize)..=r as isize {
                let tx = cx as isize + dx;
                let ty = cy as isize + dy;
                if tx < 0 || ty < 0 || tx >= w as isize || ty >= h as isize {
                    continue;
                }
                if !unknown[ty as usize * w + tx as usize] {
                    offsets.push((dx, dy));
                }
            }
        }

        let ssd_at = |sx: usize, sy: usize, cutoff: f64| -> f64 {
            let mut s = 0.0;
            for &(dx, dy) in &offsets {
                let ti = (cy as isize + dy) as usize * w + (cx as isize + dx) as usize;
                let si = (sy as isize + dy) as usize * w + (sx as isize + dx) as usize;
                for plane in &planes {
                    let d = plane[ti] - plane[si];
                    s += d * d;
                }
                if s >= cutoff {
                    return f64::INFINITY;
                }
            }
            s
        };
        let mut best_ssd = f64::INFINITY;
        let mut source = None;
        let y_lo = cy.saturating_sub(LOCAL_SEARCH_RADIUS).max(r);
        let y_hi = (cy + LOCAL_SEARCH_RADIUS).min(h.saturating_sub(r + 1));
        let x_lo = cx.saturating_sub(LOCAL_SEARCH_RADIUS).max(r);
        let x_hi = (cx + LOCAL_SEARCH_RADIUS).min(w.saturating_sub(r + 1));
        for sy in y_lo..=y_hi {
            for sx in x_lo..=x_hi {
                if !valid_source[sy * w + sx] {
                    continue;
                }
                let s = ssd_at(sx, sy, best_ssd);
                if s < best_ssd {
                    best_ssd = s;
                    source = Some((sx, sy));
                }
            }
        }
        if source.is_none() {
            for &(sx, sy) in &source_centers {
                let s = ssd_at(sx, sy, best_ssd);
                if s < best_ssd {
                    best_ssd = s;
                    source = Some((sx, sy));
                }
            }
        }
        let Some((sx, sy)) = source else {
            break;
        };

        for dy in -(r as isize)..=r as isize {
            for dx in -(r as isize)..=r as isize {
                let tx = cx as isize + dx;
                let ty = cy as isize + dy;
                if tx < 0 || ty < 0 || tx >= w as isize || ty >= h as isize {
                    continue;
                }
                let ti = ty as usize * w + tx as usize;
                if !unknown[ti] {
                    continue;
                }
                let si = (sy as isize + dy) as usize * w + (sx as isize + dx) as usize;
                for plane in &mut planes {
                    plane[ti] = plane[si];
                }
                unknown[ti] = false;
                confidence[ti] = best_priority;
                remaining -= 1;
            }
        }
    }

    let mut fallback = 0usize;
    if remaining > 0 {
        fallback = remaining;
        let partial = Frame::from_planes(f, &planes)?;
        let rest = Mask::from_fn(w, h, |x, y| unknown[y * w + x])?;
        let filled = tv_inpaint(&partial, &rest, &TvParams::for_inpainting())?;
        planes = (0..c).map(|ch| filled.plane(ch)).collect();
    }

    // Assemble from the original frame so non-mask pixels are untouched
    // by construction.
    let mut out_planes: Vec<Vec<f64>> = (0..c).map(|ch| f.plane(ch)).collect();
    for (i, m) in mask.data().iter().enumerate() {
        if *m {
            for ch in 0..c {
                out_planes[ch][i] = planes[ch][i].clamp(0.0, 1.0);
            }
        }
    }
    Ok(PatchFill {
        frame: Frame::from_planes(f, &out_planes)?,
        tv_fallback_pixels: fallback,
    })
}
