//! Grayscale frames, frame sequences and pixel sets.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::floor;

/// Row-major grayscale raster with real-valued intensities.
///
/// Generated frames hold values in `[0, 1]`; quantization only happens at
/// file boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("frame", "width and height must be positive"));
        }
        if data.len() != width * height {
            return Err(Error::param(
                "frame",
                alloc::format!("{} values for a {}x{} frame", data.len(), width, height),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("frame", "non-finite intensity"));
        }
        Ok(Frame {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Frame {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Frame {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Bilinear sample at a real-valued position; `None` outside
    /// `[0, width-1] x [0, height-1]`.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        if !(0.0..=max_x).contains(&x) || !(0.0..=max_y).contains(&y) {
            return None;
        }
        Some(self.sample_unchecked(x, y))
    }

    /// Bilinear sample with coordinates clamped to the frame (nearest border
    /// value outside).
    #[inline]
    pub fn sample_clamped(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        self.sample_unchecked(x, y)
    }

    #[inline]
    fn sample_unchecked(&self, x: f64, y: f64) -> f64 {
        let x0 = floor(x) as usize;
        let y0 = floor(y) as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let ax = x - x0 as f64;
        let ay = y - y0 as f64;
        let row0 = y0 * self.width;
        let row1 = y1 * self.width;
        let top = self.data[row0 + x0] + ax * (self.data[row0 + x1] - self.data[row0 + x0]);
        let bot = self.data[row1 + x0] + ax * (self.data[row1 + x1] - self.data[row1 + x0]);
        top + ay * (bot - top)
    }
}

/// Ordered frames of identical dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::param("sequence", "no frames"));
        };
        let (w, h) = first.dims();
        for f in &frames[1..] {
            if f.dims() != (w, h) {
                return Err(Error::DimensionMismatch(w, h, f.width(), f.height()));
            }
        }
        Ok(FrameSequence { frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> &Frame {
        &self.frames[i]
    }

    /// The first two frames, the pair every flow estimator consumes.
    pub fn pair(&self) -> Result<(&Frame, &Frame)> {
        if self.frames.len() < 2 {
            return Err(Error::param("sequence", "at least two frames are required"));
        }
        Ok((&self.frames[0], &self.frames[1]))
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Region {
    pub fn full(width: usize, height: usize) -> Self {
        Region {
            x0: 0,
            y0: 0,
            x1: width,
            y1: height,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn clip(self, width: usize, height: usize) -> Self {
        Region {
            x0: self.x0.min(width),
            y0: self.y0.min(height),
            x1: self.x1.min(width),
            y1: self.y1.min(height),
        }
    }

    pub fn grow(self, margin: usize, width: usize, height: usize) -> Self {
        Region {
            x0: self.x0.saturating_sub(margin),
            y0: self.y0.saturating_sub(margin),
            x1: (self.x1 + margin).min(width),
            y1: (self.y1 + margin).min(height),
        }
    }

    /// Maps this region to a coarser level with pixel centres related by
    /// `x_coarse = (x + 0.5) / factor - 0.5`, covering every coarse pixel a
    /// bilinear lookup from inside the region can touch.
    pub fn to_coarse(self, factor: f64, width: usize, height: usize) -> Self {
        let lo = |v: usize| {
            let c = (v as f64 + 0.5) / factor - 0.5;
            if c <= 0.0 {
                0
            } else {
                floor(c) as usize
            }
        };
        let hi = |v: usize| {
            let c = (v as f64 - 0.5) / factor - 0.5;
            if c < 0.0 {
                1
            } else {
                floor(c) as usize + 2
            }
        };
        Region {
            x0: lo(self.x0),
            y0: lo(self.y0),
            x1: hi(self.x1),
            y1: hi(self.y1),
        }
        .clip(width, height)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..self.y1).flat_map(move |y| (self.x0..self.x1).map(move |x| (x, y)))
    }
}

/// A set of pixels of a `width x height` raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl PixelMask {
    pub fn empty(width: usize, height: usize) -> Self {
        PixelMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = PixelMask::empty(width, height);
        for y in 0..height {
            for x in 0..width {
                m.bits[y * width + x] = f(x, y);
            }
        }
        m
    }

    pub fn from_region(width: usize, height: usize, region: Region) -> Self {
        PixelMask::from_fn(width, height, |x, y| region.contains(x, y))
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn insert(&mut self, x: usize, y: usize) {
        self.bits[y * self.width + x] = true;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Smallest region containing every pixel of the mask.
    pub fn bounds(&self) -> Option<Region> {
        let mut r: Option<Region> = None;
        for (x, y) in self.iter() {
            r = Some(match r {
                None => Region {
                    x0: x,
                    y0: y,
                    x1: x + 1,
                    y1: y + 1,
                },
                Some(r) => Region {
                    x0: r.x0.min(x),
                    y0: r.y0.min(y),
                    x1: r.x1.max(x + 1),
                    y1: r.y1.max(y + 1),
                },
            });
        }
        r
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| (i % w, i / w))
    }
}
