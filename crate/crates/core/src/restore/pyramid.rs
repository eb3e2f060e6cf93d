//! High-frequency band decomposition.
//!
//! A Gaussian low-pass ladder with doubling sigma peels off four
//! difference bands; whatever is left is the low-pass residual. Because
//! each band is literally `current - lowpassed(current)`, summing the
//! bands and the residual reconstructs the input to floating-point
//! accuracy, no synthesis filters needed.

use crate::geometry::raster::blur_plane;
use crate::{Frame, Result};

/// Number of difference bands.
pub const HF_SCALES: usize = 4;

/// Sigma of the first ladder rung; doubles per scale.
const BASE_SIGMA: f64 = 1.0;

/// Band-stack decomposition of one frame. Bands hold signed values and
/// are stored as interleaved samples like the source frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HfPyramid {
    width: usize,
    height: usize,
    channels: usize,
    /// `bands[0]` is the finest scale.
    bands: Vec<Vec<f64>>,
    lowpass: Vec<f64>,
}

impl HfPyramid {
    pub fn bands(&self) -> &[Vec<f64>] {
        &self.bands
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    /// Mean squared sample value of one band.
    pub fn band_energy(&self, scale: usize) -> f64 {
        let b = &self.bands[scale];
        b.iter().map(|v| v * v).sum::<f64>() / b.len() as f64
    }

    /// Sums bands and residual back into a frame.
    pub fn reconstruct(&self) -> Result<Frame> {
        let n = self.width * self.height * self.channels;
        let mut data = self.lowpass.clone();
        for band in &self.bands {
            for i in 0..n {
                data[i] += band[i];
            }
        }
        // Rounding can leave samples a few ulps outside [0,1].
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        Frame::new(self.width, self.height, self.channels, data)
    }
}

/// Splits a frame into [`HF_SCALES`] high-frequency bands plus a
/// low-pass residual.
pub fn hf_pyramid(frame: &Frame) -> HfPyramid {
    let (w, h, c) = (frame.width(), frame.height(), frame.channels());
    let mut current: Vec<Vec<f64>> = (0..c).map(|ch| frame.plane(ch)).collect();
    let mut bands = Vec::with_capacity(HF_SCALES);
    let mut sigma = BASE_SIGMA;
    for _ in 0..HF_SCALES {
        let mut band = vec![0.0; w * h * c];
        let mut next = Vec::with_capacity(c);
        for (ch, plane) in current.iter().enumerate() {
            let low = blur_plane(plane, w, h, sigma);
            for i in 0..w * h {
                band[i * c + ch] = plane[i] - low[i];
            }
            next.push(low);
        }
        bands.push(band);
        current = next;
        sigma *= 2.0;
    }
    let mut lowpass = vec![0.0; w * h * c];
    for (ch, plane) in current.iter().enumerate() {
        for i in 0..w * h {
            lowpass[i * c + ch] = plane[i];
        }
    }
    HfPyramid {
        width: w,
        height: h,
        channels: c,
        bands,
        lowpass,
    }
}

/// Summed L2 distance between the two frames' band stacks: the edge and
/// texture content they disagree on, ignoring the low-pass residual.
/// Zero iff the stacks agree sample for sample.
pub fn hf_edge_fidelity(a: &Frame, b: &Frame) -> Result<f64> {
    a.require_same_shape(b)?;
    let pa = hf_pyramid(a);
    let pb = hf_pyramid(b);
    let mut total = 0.0;
    for s in 0..HF_SCALES {
        let d2: f64 = pa.bands[s]
            .iter()
            .zip(&pb.bands[s])
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        total += d2.sqrt();
    }
    Ok(total)
}
