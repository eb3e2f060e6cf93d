//! Plane-level convolution helpers shared by the simulator, the solvers,
//! and the metrics.
//!
//! Planes are row-major `w*h` slices of `f64`. All borders are handled by
//! half-sample reflection (`-1` maps to `0`, `-2` to `1`, ...), which keeps
//! constant planes exactly constant under any normalized kernel.

/// Reflects an out-of-range index into `[0, n)`. Handles overshoot beyond
/// one period, so kernels wider than the plane still work.
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut j = i % period;
    if j < 0 {
        j += period;
    }
    let j = if j < n { j } else { period - 1 - j };
    j as usize
}

/// Normalized 1D Gaussian taps, truncated at `ceil(3*sigma)`.
pub fn gaussian_taps(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let radius = (3.0 * sigma).ceil() as usize;
    let mut taps = Vec::with_capacity(2 * radius + 1);
    for i in -(radius as isize)..=(radius as isize) {
        let t = i as f64 / sigma;
        taps.push((-0.5 * t * t).exp());
    }
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Separable convolution with the same 1D kernel along rows then columns.
/// `taps.len()` must be odd.
pub fn conv_separable(plane: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    assert_eq!(plane.len(), w * h);
    assert_eq!(taps.len() % 2, 1);
    let r = (taps.len() / 2) as isize;
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let sx = reflect(x as isize + k as isize - r, w);
                acc += t * plane[y * w + sx];
            }
            rows[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let sy = reflect(y as isize + k as isize - r, h);
                acc += t * rows[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Gaussian blur of one plane.
pub fn blur_plane(plane: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    conv_separable(plane, w, h, &gaussian_taps(sigma))
}

/// Gaussian blur of a frame, channel by channel.
pub fn blur_frame(frame: &crate::Frame, sigma: f64) -> crate::Frame {
    let planes: Vec<Vec<f64>> = (0..frame.channels())
        .map(|c| blur_plane(&frame.plane(c), frame.width(), frame.height(), sigma))
        .collect();
    crate::Frame::from_planes(frame, &planes).expect("blur preserves shape")
}

/// Dense 2D convolution with a square odd-side kernel, same-size output.
///
/// `out[x,y] = sum_k kernel[k] * plane[reflect(x - kx + c), reflect(y - ky + c)]`,
/// i.e. true convolution, so asymmetric kernels (motion trails) smear in
/// the direction they encode.
pub fn conv2(plane: &[f64], w: usize, h: usize, taps: &[f64], side: usize) -> Vec<f64> {
    assert_eq!(plane.len(), w * h);
    assert_eq!(taps.len(), side * side);
    assert_eq!(side % 2, 1);
    let c = (side / 2) as isize;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..side {
                let sy = reflect(y as isize - (ky as isize - c), h);
                for kx in 0..side {
                    let t = taps[ky * side + kx];
                    if t == 0.0 {
                        continue;
                    }
                    let sx = reflect(x as isize - (kx as isize - c), w);
                    acc += t * plane[sy * w + sx];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Exact adjoint of [`conv2`] under the same reflected boundary: scatters
/// each residual sample back through the forward gather. Gradient-based
/// solvers need this to match `conv2` exactly.
pub fn conv2_adjoint(plane: &[f64], w: usize, h: usize, taps: &[f64], side: usize) -> Vec<f64> {
    assert_eq!(plane.len(), w * h);
    assert_eq!(taps.len(), side * side);
    assert_eq!(side % 2, 1);
    let c = (side / 2) as isize;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let r = plane[y * w + x];
            if r == 0.0 {
                continue;
            }
            for ky in 0..side {
                let sy = reflect(y as isize - (ky as isize - c), h);
                for kx in 0..side {
                    let t = taps[ky * side + kx];
                    if t == 0.0 {
                        continue;
                    }
                    let sx = reflect(x as isize - (kx as isize - c), w);
                    out[sy * w + sx] += t * r;
                }
            }
        }
    }
    out
}
