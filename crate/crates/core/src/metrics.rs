//! Full-reference image quality metrics: PSNR, SSIM, pixel-domain VIF,
//! and a relative edge-coherence ratio (RECO).
//!
//! All four take (reference, test) frames of identical shape. PSNR and
//! SSIM run per channel and average; VIF and RECO run on luminance.
//! Conventions follow the widely used reference implementations: SSIM
//! uses an 11x11 Gaussian window (sigma 1.5) in valid mode, VIF runs four
//! dyadic scales with the classic stabilizer of 2 on the 0..255 range.

use crate::geometry::raster::gaussian_taps;
use crate::{Error, Frame, Result};

/// Results bundle; a `None` entry means the metric was undefined or not
/// computed (RECO on an edge-free reference, VIF on tiny frames).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MetricSet {
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub vif: Option<f64>,
    pub reco: Option<f64>,
}

/// Peak signal-to-noise ratio in dB over the unit range. Identical
/// frames give `f64::INFINITY`.
pub fn psnr(reference: &Frame, test: &Frame) -> Result<f64> {
    reference.require_same_shape(test)?;
    let n = reference.data().len() as f64;
    let mse: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    })
}

/// Window side for [`ssim`].
pub const SSIM_WINDOW: usize = 11;

/// Valid-mode separable filtering; returns the filtered plane and its
/// reduced dimensions.
fn filter_valid(plane: &[f64], w: usize, h: usize, taps: &[f64]) -> (Vec<f64>, usize, usize) {
    let k = taps.len();
    debug_assert!(w >= k && h >= k);
    let w2 = w - k + 1;
    let mut rows = vec![0.0; w2 * h];
    for y in 0..h {
        for x in 0..w2 {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                acc += t * plane[y * w + x + i];
            }
            rows[y * w2 + x] = acc;
        }
    }
    let h2 = h - k + 1;
    let mut out = vec![0.0; w2 * h2];
    for y in 0..h2 {
        for x in 0..w2 {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                acc += t * rows[(y + i) * w2 + x];
            }
            out[y * w2 + x] = acc;
        }
    }
    (out, w2, h2)
}

fn ssim_plane(x: &[f64], y: &[f64], w: usize, h: usize) -> f64 {
    // Gaussian window, sigma 1.5, truncated to exactly 11 taps.
    let mut taps = gaussian_taps(1.5);
    while taps.len() > SSIM_WINDOW {
        taps.remove(0);
        taps.pop();
    }
    let s: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= s;
    }
    let c1 = (0.01f64).powi(2);
    let c2 = (0.03f64).powi(2);
    let (mu_x, w2, h2) = filter_valid(x, w, h, &taps);
    let (mu_y, _, _) = filter_valid(y, w, h, &taps);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let (m_xx, _, _) = filter_valid(&xx, w, h, &taps);
    let (m_yy, _, _) = filter_valid(&yy, w, h, &taps);
    let (m_xy, _, _) = filter_valid(&xy, w, h, &taps);
    let mut sum = 0.0;
    for i in 0..w2 * h2 {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let sx = m_xx[i] - mx * mx;
        let sy = m_yy[i] - my * my;
        let sxy = m_xy[i] - mx * my;
        sum += ((2.0 * mx * my + c1) * (2.0 * sxy + c2))
            / ((mx * mx + my * my + c1) * (sx + sy + c2));
    }
    sum / (w2 * h2) as f64
}

/// Mean structural similarity over valid window positions, averaged
/// across channels. Bounded above by 1; can go negative on inverted
/// structure.
pub fn ssim(reference: &Frame, test: &Frame) -> Result<f64> {
    reference.require_same_shape(test)?;
    if reference.width() < SSIM_WINDOW || reference.height() < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "frames must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for ssim"
        )));
    }
    let (w, h) = (reference.width(), reference.height());
    let mut total = 0.0;
    for c in 0..reference.channels() {
        total += ssim_plane(&reference.plane(c), &test.plane(c), w, h);
    }
    Ok(total / reference.channels() as f64)
}

/// Scales used by [`vif`], shallow to deep.
const VIF_SCALES: usize = 4;

/// Pixel-domain visual information fidelity on luminance, four dyadic
/// scales. 1.0 at identity, below 1 for information-losing distortions,
/// always nonnegative.
pub fn vif(reference: &Frame, test: &Frame) -> Result<f64> {
    reference.require_same_shape(test)?;
    // Classic parameterization works on the 0..255 range.
    let mut r: Vec<f64> = reference.luma().data().iter().map(|v| v * 255.0).collect();
    let mut t: Vec<f64> = test.luma().data().iter().map(|v| v * 255.0).collect();
    let (mut w, mut h) = (reference.width(), reference.height());
    let sigma_nsq = 2.0;
    let mut num = 0.0;
    let mut den = 0.0;
    for scale in 1..=VIF_SCALES {
        let n = (1 << (VIF_SCALES - scale + 1)) + 1; // 17, 9, 5, 3
        let taps = normalized_gaussian(n, n as f64 / 5.0);
        if scale > 1 {
            if w < n || h < n {
                return Err(Error::invalid(format!(
                    "frame too small for vif scale {scale} (window {n})"
                )));
            }
            let (rf, w2, h2) = filter_valid(&r, w, h, &taps);
            let (tf, _, _) = filter_valid(&t, w, h, &taps);
            (r, w, h) = (decimate2(&rf, w2, h2), w2.div_ceil(2), h2.div_ceil(2));
            t = decimate2(&tf, w2, h2);
        }
        if w < n || h < n {
            return Err(Error::invalid(format!(
                "frame too small for vif scale {scale} (window {n})"
            )));
        }
        let (mu1, w2, h2) = filter_valid(&r, w, h, &taps);
        let (mu2, _, _) = filter_valid(&t, w, h, &taps);
        let rr: Vec<f64> = r.iter().map(|v| v * v).collect();
        let tt: Vec<f64> = t.iter().map(|v| v * v).collect();
        let rt: Vec<f64> = r.iter().zip(&t).map(|(a, b)| a * b).collect();
        let (m_rr, _, _) = filter_valid(&rr, w, h, &taps);
        let (m_tt, _, _) = filter_valid(&tt, w, h, &taps);
        let (m_rt, _, _) = filter_valid(&rt, w, h, &taps);
        for i in 0..w2 * h2 {
            let sigma1_sq = (m_rr[i] - mu1[i] * mu1[i]).max(0.0);
            let sigma2_sq = (m_tt[i] - mu2[i] * mu2[i]).max(0.0);
            let sigma12 = m_rt[i] - mu1[i] * mu2[i];
            let mut g = sigma12 / (sigma1_sq + 1e-10);
            let mut sv_sq = sigma2_sq - g * sigma12;
            if sigma1_sq < 1e-10 {
                g = 0.0;
                sv_sq = sigma2_sq;
            }
            if sigma2_sq < 1e-10 {
                g = 0.0;
                sv_sq = 0.0;
            }
            if g < 0.0 {
                sv_sq = sigma2_sq;
                g = 0.0;
            }
            let sv_sq = sv_sq.max(1e-10);
            let s1 = if sigma1_sq < 1e-10 { 0.0 } else { sigma1_sq };
            num += (1.0 + g * g * s1 / (sv_sq + sigma_nsq)).log10();
            den += (1.0 + s1 / sigma_nsq).log10();
        }
    }
    if den <= 0.0 {
        // Featureless reference carries no information to preserve.
        return Ok(if num <= 0.0 { 1.0 } else { 0.0 });
    }
    Ok((num / den).max(0.0))
}

fn normalized_gaussian(n: usize, sigma: f64) -> Vec<f64> {
    let c = (n - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..n)
        .map(|i| (-0.5 * ((i as f64 - c) / sigma).powi(2)).exp())
        .collect();
    let s: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= s;
    }
    taps
}

/// Keeps every second sample starting at the first, in both directions.
fn decimate2(plane: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(w.div_ceil(2) * h.div_ceil(2));
    for y in (0..h).step_by(2) {
        for x in (0..w).step_by(2) {
            out.push(plane[y * w + x]);
        }
    }
    out
}

/// Relative edge coherence: the test frame's edge statistic over the
/// reference's. The statistic averages gradient magnitude weighted by
/// local orientation coherence over that frame's own detected edge
/// pixels (Sobel gradients, Otsu threshold on the magnitude histogram).
///
/// 1.0 at identity, below 1 under blur; sharpening can push it above 1.
/// `None` when the reference has no detectable edges.
pub fn reco(reference: &Frame, test: &Frame) -> Result<Option<f64>> {
    reference.require_same_shape(test)?;
    if reference.width() < 3 || reference.height() < 3 {
        return Err(Error::invalid("frames must be at least 3x3 for reco"));
    }
    let s_ref = edge_coherence_statistic(reference);
    if s_ref <= 1e-12 {
        return Ok(None);
    }
    Ok(Some(edge_coherence_statistic(test) / s_ref))
}

fn edge_coherence_statistic(frame: &Frame) -> f64 {
    let luma = frame.luma();
    let (w, h) = (luma.width(), luma.height());
    let p = luma.data();
    let at = |x: isize, y: isize| -> f64 {
        let xi = x.clamp(0, w as isize - 1) as usize;
        let yi = y.clamp(0, h as isize - 1) as usize;
        p[yi * w + xi]
    };
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    let mut mag = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let sx = at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x - 1, y)
                - at(x - 1, y + 1);
            let sy = at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x, y - 1)
                - at(x + 1, y - 1);
            let i = y as usize * w + x as usize;
            gx[i] = sx;
            gy[i] = sy;
            mag[i] = (sx * sx + sy * sy).sqrt();
        }
    }
    let threshold = match otsu_threshold(&mag) {
        Some(t) => t,
        None => return 0.0,
    };
    // Structure tensor over a 5x5 neighborhood at each edge pixel.
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..h {
        for x in 0..w {
            if mag[y * w + x] < threshold {
                continue;
            }
            let (mut jxx, mut jyy, mut jxy) = (0.0, 0.0, 0.0);
            for dy in -2isize..=2 {
                for dx in -2isize..=2 {
                    let xi = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    let yi = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    let i = yi * w + xi;
                    jxx += gx[i] * gx[i];
                    jyy += gy[i] * gy[i];
                    jxy += gx[i] * gy[i];
                }
            }
            let coherence =
                ((jxx - jyy).powi(2) + 4.0 * jxy * jxy).sqrt() / (jxx + jyy + 1e-12);
            sum += mag[y * w + x] * coherence;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Otsu's threshold over a 256-bin histogram of the values. `None` when
/// the values are all (nearly) zero, i.e. no gradients anywhere.
fn otsu_threshold(values: &[f64]) -> Option<f64> {
    let max = values.iter().fold(0.0f64, |a, b| a.max(*b));
    if max <= 1e-12 {
        return None;
    }
    const BINS: usize = 256;
    let mut hist = [0usize; BINS];
    for v in values {
        let b = ((v / max * BINS as f64) as usize).min(BINS - 1);
        hist[b] += 1;
    }
    let total = values.len() as f64;
    let total_mean: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, n)| i as f64 * *n as f64)
        .sum::<f64>()
        / total;
    let mut best = (0usize, -1.0f64);
    let (mut w0, mut sum0) = (0.0, 0.0);
    for (t, count) in hist.iter().enumerate().take(BINS - 1) {
        w0 += *count as f64 / total;
        sum0 += t as f64 * *count as f64 / total;
        if w0 <= 0.0 || w0 >= 1.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (total_mean - sum0) / (1.0 - w0);
        let between = w0 * (1.0 - w0) * (mu0 - mu1) * (mu0 - mu1);
        if between > best.1 {
            best = (t, between);
        }
    }
    Some((best.0 + 1) as f64 / BINS as f64 * max)
}

/// Runs all four metrics; RECO's undefined case maps to `None` instead
/// of an error so batch logs keep flowing.
pub fn compute_all(reference: &Frame, test: &Frame) -> Result<MetricSet> {
    Ok(MetricSet {
        psnr: Some(psnr(reference, test)?),
        ssim: Some(ssim(reference, test)?),
        vif: Some(vif(reference, test)?),
        reco: reco(reference, test)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::raster::blur_frame;
    use crate::sim::test_chart;
    use approx::assert_abs_diff_eq;

    #[test]
    fn psnr_identical_is_infinite() {
        let f = test_chart(32, 32, 0).unwrap();
        assert_eq!(psnr(&f, &f).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_of_sixteen_level_offset() {
        // Uniform offset of 16/255 on frames far from the clamp rails:
        // 10*log10(255^2/16^2) = 24.0483 dB.
        let a = Frame::constant(64, 64, 3, 100.0 / 255.0).unwrap();
        let b = Frame::constant(64, 64, 3, 116.0 / 255.0).unwrap();
        assert_abs_diff_eq!(psnr(&a, &b).unwrap(), 24.0483, epsilon = 1e-3);
    }

    #[test]
    fn psnr_full_range_offset_is_zero() {
        let a = Frame::constant(16, 16, 1, 0.0).unwrap();
        let b = Frame::constant(16, 16, 1, 1.0).unwrap();
        assert_abs_diff_eq!(psnr(&a, &b).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn psnr_rejects_shape_mismatch() {
        let a = Frame::constant(16, 16, 1, 0.5).unwrap();
        let b = Frame::constant(16, 8, 1, 0.5).unwrap();
        assert!(psnr(&a, &b).is_err());
    }

    #[test]
    fn ssim_identical_is_one() {
        let f = test_chart(48, 48, 1).unwrap();
        assert_abs_diff_eq!(ssim(&f, &f).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ssim_inverted_structure_goes_negative() {
        let f = test_chart(48, 48, 2).unwrap();
        let planes: Vec<Vec<f64>> = (0..3)
            .map(|c| f.plane(c).iter().map(|v| 1.0 - v).collect())
            .collect();
        let inv = Frame::from_planes(&f, &planes).unwrap();
        assert!(ssim(&f, &inv).unwrap() < 0.0);
    }

    #[test]
    fn ssim_is_symmetric_and_bounded() {
        let a = test_chart(48, 48, 3).unwrap();
        let b = blur_frame(&a, 1.5);
        let ab = ssim(&a, &b).unwrap();
        let ba = ssim(&b, &a).unwrap();
        assert_abs_diff_eq!(ab, ba, epsilon = 1e-12);
        assert!(ab <= 1.0);
    }

    #[test]
    fn ssim_rejects_frames_under_the_window() {
        let a = Frame::constant(10, 20, 1, 0.5).unwrap();
        let err = ssim(&a, &a).unwrap_err().to_string();
        assert!(err.contains("11x11"), "error should cite the window: {err}");
    }

    #[test]
    fn vif_identical_is_one_and_blur_loses_information() {
        let f = test_chart(96, 96, 4).unwrap();
        assert_abs_diff_eq!(vif(&f, &f).unwrap(), 1.0, epsilon = 1e-6);
        let blurred = blur_frame(&f, 2.0);
        let v = vif(&f, &blurred).unwrap();
        assert!((0.0..1.0).contains(&v), "vif of blur was {v}");
    }

    #[test]
    fn vif_rejects_frames_below_the_deepest_scale() {
        let f = Frame::constant(16, 16, 1, 0.5).unwrap();
        assert!(vif(&f, &f).is_err());
    }

    #[test]
    fn reco_identity_is_one_blur_below_one() {
        let f = test_chart(96, 96, 5).unwrap();
        let r = reco(&f, &f).unwrap().unwrap();
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-12);
        let blurred = blur_frame(&f, 2.0);
        let rb = reco(&f, &blurred).unwrap().unwrap();
        assert!(rb < 1.0, "reco of blur was {rb}");
    }

    #[test]
    fn reco_undefined_on_flat_reference() {
        let flat = Frame::constant(32, 32, 3, 0.5).unwrap();
        let tex = test_chart(32, 32, 6).unwrap();
        assert!(reco(&flat, &tex).unwrap().is_none());
    }

    #[test]
    fn sharpening_can_push_reco_above_one() {
        let f = test_chart(96, 96, 7).unwrap();
        // Unsharp mask: f + 1.5*(f - blur(f)).
        let b = blur_frame(&f, 1.2);
        let planes: Vec<Vec<f64>> = (0..3)
            .map(|c| {
                f.plane(c)
                    .iter()
                    .zip(b.plane(c))
                    .map(|(v, bl)| (v + 1.5 * (v - bl)).clamp(0.0, 1.0))
                    .collect()
            })
            .collect();
        let sharp = Frame::from_planes(&f, &planes).unwrap();
        let r = reco(&f, &sharp).unwrap().unwrap();
        assert!(r > 1.0, "reco of sharpened was {r}");
    }

    #[test]
    fn noise_ladder_decreases_psnr_monotonically() {
        use crate::sim::{corrupt, DegradationSpec};
        let f = test_chart(64, 64, 8).unwrap();
        let mut last = f64::INFINITY;
        for (i, sigma) in [0.01, 0.02, 0.04, 0.08].iter().enumerate() {
            let spec = DegradationSpec {
                noise_sigma: *sigma,
                ..DegradationSpec::neutral()
            };
            let out = corrupt(&f, &spec, 900 + i as u64).unwrap();
            let p = psnr(&f, &out.frame).unwrap();
            assert!(p < last, "psnr {p} did not drop at sigma {sigma}");
            last = p;
        }
    }
}
