//! In-memory frame raster.
//!
//! Pixels are stored as interleaved `f64` in `[0,1]` regardless of the
//! source bit depth; metric and solver code relies on that range and on
//! double precision, so `Frame::new` validates it once up front.

use crate::{Error, Result};

/// Bit depth the frame was decoded from. Only affects file round trips.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    bit_depth: BitDepth,
    /// Temporal position within the source sequence.
    index: usize,
    data: Vec<f64>,
}

impl Frame {
    /// Wraps interleaved pixel data. `channels` must be 1 or 3, every
    /// sample finite and in `[0,1]`, and `data.len() == w*h*channels`.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("frame dimensions must be nonzero"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!(
                "frame must have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::ShapeMismatch(format!(
                "pixel buffer holds {} samples, expected {}",
                data.len(),
                width * height * channels
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!(
                "pixel value {bad} outside [0,1]"
            )));
        }
        Ok(Frame {
            width,
            height,
            channels,
            bit_depth: BitDepth::Eight,
            index: 0,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Frame::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds a frame by evaluating `f(x, y, channel)`; values are clamped
    /// to `[0,1]` so generator expressions don't need their own clamping.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c).clamp(0.0, 1.0));
                }
            }
        }
        Frame::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bit_depth(&self) -> BitDepth {
        self.bit_depth
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn with_bit_depth(mut self, depth: BitDepth) -> Self {
        self.bit_depth = depth;
        self
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        debug_assert!((0.0..=1.0).contains(&v), "pixel write {v} outside [0,1]");
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.channels == other.channels
    }

    pub fn require_same_shape(&self, other: &Frame) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    /// Copies one channel out as a w*h plane.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        assert!(c < self.channels);
        let mut out = Vec::with_capacity(self.width * self.height);
        let mut i = c;
        for _ in 0..self.width * self.height {
            out.push(self.data[i]);
            i += self.channels;
        }
        out
    }

    /// Rebuilds a frame from per-channel planes, clamping to `[0,1]`.
    /// Metadata (bit depth, index) is taken from `like`.
    pub fn from_planes(like: &Frame, planes: &[Vec<f64>]) -> Result<Frame> {
        if planes.len() != like.channels {
            return Err(Error::ShapeMismatch(format!(
                "{} planes for {} channels",
                planes.len(),
                like.channels
            )));
        }
        let n = like.width * like.height;
        if planes.iter().any(|p| p.len() != n) {
            return Err(Error::ShapeMismatch("plane size mismatch".into()));
        }
        let mut data = Vec::with_capacity(n * like.channels);
        for i in 0..n {
            for p in planes {
                data.push(p[i].clamp(0.0, 1.0));
            }
        }
        let f = Frame::new(like.width, like.height, like.channels, data)?;
        Ok(f.with_bit_depth(like.bit_depth).with_index(like.index))
    }

    /// Rec. 601 luminance; returns a clone for single-channel frames.
    pub fn luma(&self) -> Frame {
        if self.channels == 1 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.width * self.height);
        for i in 0..self.width * self.height {
            let r = self.data[i * 3];
            let g = self.data[i * 3 + 1];
            let b = self.data[i * 3 + 2];
            data.push((0.299 * r + 0.587 * g + 0.114 * b).clamp(0.0, 1.0));
        }
        Frame {
            width: self.width,
            height: self.height,
            channels: 1,
            bit_depth: self.bit_depth,
            index: self.index,
            data,
        }
    }

    /// Largest absolute per-sample difference. Frames must share a shape.
    pub fn max_abs_diff(&self, other: &Frame) -> Result<f64> {
        self.require_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_validates_shape_and_range() {
        assert!(Frame::new(2, 2, 1, vec![0.0; 4]).is_ok());
        assert!(Frame::new(2, 2, 1, vec![0.0; 5]).is_err());
        assert!(Frame::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(Frame::new(0, 2, 1, vec![]).is_err());
        assert!(Frame::new(1, 1, 1, vec![1.5]).is_err());
        assert!(Frame::new(1, 1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn plane_round_trip() {
        let f = Frame::from_fn(3, 2, 3, |x, y, c| (x + y + c) as f64 / 10.0).unwrap();
        let planes: Vec<_> = (0..3).map(|c| f.plane(c)).collect();
        let g = Frame::from_planes(&f, &planes).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn luma_of_gray_rgb_matches_gray() {
        let f = Frame::from_fn(4, 4, 3, |x, _, _| x as f64 / 4.0).unwrap();
        let l = f.luma();
        assert_eq!(l.channels(), 1);
        for x in 0..4 {
            assert!((l.get(x, 0, 0) - x as f64 / 4.0).abs() < 1e-12);
        }
    }
}
