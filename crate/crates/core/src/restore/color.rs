//! Color statistics, statistical color retransfer, and exposure
//! correction.
//!
//! All three ignore pixels at or above an intensity ceiling (max channel
//! `>= 0.9` by default): saturated regions carry no usable color
//! information and would drag the statistics toward the artifact being
//! fixed.

use crate::geometry::Mask;
use crate::{Error, Frame, Result};
use nalgebra::DMatrix;

/// Pixels whose maximum channel reaches this value are excluded from
/// statistics.
pub const COLOR_CEILING: f64 = 0.9;

/// First and second moments of a frame's usable pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorStats {
    /// Per-channel mean, one entry per channel.
    pub mean: Vec<f64>,
    /// Row-major covariance, `channels x channels`, population form.
    pub cov: Vec<f64>,
    pub count: usize,
    /// Which pixels qualified (true = below the ceiling).
    pub mask: Mask,
}

/// Moments over pixels whose max channel is below `ceiling`.
/// Needs at least two qualifying pixels.
pub fn color_stats(frame: &Frame, ceiling: f64) -> Result<ColorStats> {
    if !(ceiling.is_finite() && ceiling > 0.0) {
        return Err(Error::invalid(format!("ceiling {ceiling} must be positive")));
    }
    let (w, h, c) = (frame.width(), frame.height(), frame.channels());
    let mut mask = Mask::new_false(w, h)?;
    for y in 0..h {
        for x in 0..w {
            let mut peak = 0.0f64;
            for ch in 0..c {
                peak = peak.max(frame.get(x, y, ch));
            }
            if peak < ceiling {
                mask.set(x, y, true);
            }
        }
    }
    color_stats_over_mask(frame, &mask)
}

/// Moments over an explicit pixel set. The mask is stored back into the
/// result so later code can revisit exactly the same pixels.
pub fn color_stats_over_mask(frame: &Frame, mask: &Mask) -> Result<ColorStats> {
    let (w, h, c) = (frame.width(), frame.height(), frame.channels());
    if mask.width() != w || mask.height() != h {
        return Err(Error::ShapeMismatch(format!(
            "mask {}x{} for frame {w}x{h}",
            mask.width(),
            mask.height()
        )));
    }
    let count = mask.count_true();
    if count < 2 {
        return Err(Error::Numeric(format!(
            "{count} qualifying pixels, need at least 2 for color statistics"
        )));
    }
    let mut mean = vec![0.0; c];
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                for (ch, m) in mean.iter_mut().enumerate() {
                    *m += frame.get(x, y, ch);
                }
            }
        }
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    let mut cov = vec![0.0; c * c];
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            for i in 0..c {
                let di = frame.get(x, y, i) - mean[i];
                for j in i..c {
                    cov[i * c + j] += di * (frame.get(x, y, j) - mean[j]);
                }
            }
        }
    }
    for i in 0..c {
        for j in i..c {
            let v = cov[i * c + j] / count as f64;
            cov[i * c + j] = v;
            cov[j * c + i] = v;
        }
    }
    Ok(ColorStats {
        mean,
        cov,
        count,
        mask: mask.clone(),
    })
}

/// Outcome of [`color_retransfer`].
#[derive(Debug, Clone)]
pub struct CrtResult {
    pub frame: Frame,
    /// True when the target covariance was singular and needed the
    /// diagonal regularizer before inversion.
    pub regularized: bool,
}

const CRT_DELTA: f64 = 1e-8;

/// Symmetric matrix power via eigendecomposition; eigenvalues are
/// clamped at zero before the power is taken.
fn sym_pow(cov: &[f64], c: usize, exponent: f64) -> DMatrix<f64> {
    let m = DMatrix::from_row_slice(c, c, cov);
    let eig = m.symmetric_eigen();
    let mut d = DMatrix::zeros(c, c);
    for i in 0..c {
        d[(i, i)] = eig.eigenvalues[i].max(0.0).powf(exponent);
    }
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

fn min_eigenvalue(cov: &[f64], c: usize) -> f64 {
    DMatrix::from_row_slice(c, c, cov)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, b| a.min(*b))
}

/// Moves the frame's color distribution from `target_stats` to
/// `source_stats`: whitens against the target covariance, recolors with
/// the source root, and re-centers on the source mean. Linear up to the
/// final clamp, so it is invertible wherever no pixel clamps.
pub fn color_retransfer(
    frame: &Frame,
    source_stats: &ColorStats,
    target_stats: &ColorStats,
) -> Result<CrtResult> {
    let c = frame.channels();
    if source_stats.mean.len() != c || target_stats.mean.len() != c {
        return Err(Error::ShapeMismatch(format!(
            "stats for {} and {} channels against a {c}-channel frame",
            source_stats.mean.len(),
            target_stats.mean.len()
        )));
    }
    let mut tgt_cov = target_stats.cov.clone();
    let regularized = min_eigenvalue(&tgt_cov, c) <= 1e-12;
    if regularized {
        for i in 0..c {
            tgt_cov[i * c + i] += CRT_DELTA;
        }
    }
    let transform = sym_pow(&source_stats.cov, c, 0.5) * sym_pow(&tgt_cov, c, -0.5);
    let (w, h) = (frame.width(), frame.height());
    let mut data = Vec::with_capacity(w * h * c);
    let mut v = vec![0.0; c];
    for y in 0..h {
        for x in 0..w {
            for (i, vi) in v.iter_mut().enumerate() {
                *vi = frame.get(x, y, i) - target_stats.mean[i];
            }
            for i in 0..c {
                let mut acc = source_stats.mean[i];
                for (j, vj) in v.iter().enumerate() {
                    acc += transform[(i, j)] * vj;
                }
                data.push(acc.clamp(0.0, 1.0));
            }
        }
    }
    let out = Frame::new(w, h, c, data)?
        .with_bit_depth(frame.bit_depth())
        .with_index(frame.index());
    Ok(CrtResult {
        frame: out,
        regularized,
    })
}

/// Which artifact the exposure stage is countering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExposureDirection {
    /// Over-exposure: gamma fix plus a smooth highlight shoulder.
    Saturation,
    /// Under-exposure / gamma-crushed contrast: gamma fix only.
    LowContrast,
}

/// Outcome of [`exposure_correct`].
#[derive(Debug, Clone)]
pub struct ExposureResult {
    pub frame: Frame,
    /// Estimated corruption gamma; the applied exponent is its inverse.
    pub gamma_estimate: f64,
    /// True when the frame gave no usable median and was passed through.
    pub degenerate: bool,
}

/// Estimates how far the sub-ceiling median sits from mid-gray, models
/// that as a gamma corruption (`median = 0.5^g`), and applies the
/// inverse exponent. The estimate is clamped to `[0.3, 3]`. For the
/// saturation direction, values above the ceiling are then compressed
/// through a smooth shoulder `c + (1-c) * t/(1+t)` that stays below
/// white and meets the identity line with slope 1 at the ceiling.
///
/// A frame with no sub-ceiling pixels, or a median pinned at 0 (black)
/// passes through unchanged with the `degenerate` flag set.
pub fn exposure_correct(
    frame: &Frame,
    direction: ExposureDirection,
    ceiling: f64,
) -> Result<ExposureResult> {
    if !(ceiling.is_finite() && ceiling > 0.0) {
        return Err(Error::invalid(format!("ceiling {ceiling} must be positive")));
    }
    let (w, h, c) = (frame.width(), frame.height(), frame.channels());
    let mut samples = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let mut peak = 0.0f64;
            for ch in 0..c {
                peak = peak.max(frame.get(x, y, ch));
            }
            if peak < ceiling {
                for ch in 0..c {
                    samples.push(frame.get(x, y, ch));
                }
            }
        }
    }
    let median = median_in_place(&mut samples);
    let usable = matches!(median, Some(m) if m > 0.0 && m < 1.0);
    if !usable {
        return Ok(ExposureResult {
            frame: frame.clone(),
            gamma_estimate: 1.0,
            degenerate: true,
        });
    }
    let median = median.expect("checked above");
    let gamma_estimate = (median.ln() / 0.5f64.ln()).clamp(0.3, 3.0);
    let exponent = 1.0 / gamma_estimate;
    let mut data = Vec::with_capacity(w * h * c);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut v = frame.get(x, y, ch).powf(exponent);
                if direction == ExposureDirection::Saturation && v > ceiling {
                    let t = (v - ceiling) / (1.0 - ceiling);
                    v = ceiling + (1.0 - ceiling) * (t / (1.0 + t));
                }
                data.push(v.clamp(0.0, 1.0));
            }
        }
    }
    let out = Frame::new(w, h, c, data)?
        .with_bit_depth(frame.bit_depth())
        .with_index(frame.index());
    Ok(ExposureResult {
        frame: out,
        gamma_estimate,
        degenerate: false,
    })
}

/// Median with the even-count average convention. `None` on empty input.
fn median_in_place(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("pixel values are finite"));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}
