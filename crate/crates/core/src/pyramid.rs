//! Gaussian pyramids with arbitrary scale factor.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::math::{ceil, exp, floor, powi, sqrt};

/// Multi-resolution stack of a frame. Level 0 is the input; level `l` is
/// level `l - 1` smoothed then resampled by `1 / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    levels: Vec<Frame>,
    scale: f64,
}

impl Pyramid {
    /// Builds `levels` levels with scale factor `scale`.
    ///
    /// Each step smooths with a normalized Gaussian of standard deviation
    /// `0.5 * sqrt(scale^2 - 1)` (truncated at two deviations, reflected
    /// borders) and resamples bilinearly to `floor(size / scale)`.
    /// Fails if any level would be smaller than `min_side` pixels.
    pub fn build(frame: &Frame, levels: usize, scale: f64, min_side: usize) -> Result<Self> {
        validate_shape(frame.width(), frame.height(), levels, scale, min_side)?;
        let mut out = Vec::with_capacity(levels);
        out.push(frame.clone());
        let kernel = smoothing_kernel(scale);
        for l in 1..levels {
            let next = downsample(&out[l - 1], &kernel, scale);
            out.push(next);
        }
        Ok(Pyramid { levels: out, scale })
    }

    pub fn levels(&self) -> &[Frame] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &Frame {
        &self.levels[l]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Multiplier converting level-`l` displacements to level-0 pixels.
    pub fn unit(&self, l: usize) -> f64 {
        powi(self.scale, l)
    }
}

/// Dimensions of every level, without building anything.
pub fn level_dims(width: usize, height: usize, levels: usize, scale: f64) -> Vec<(usize, usize)> {
    let mut dims = Vec::with_capacity(levels);
    let (mut w, mut h) = (width, height);
    for l in 0..levels {
        if l > 0 {
            w = floor(w as f64 / scale) as usize;
            h = floor(h as f64 / scale) as usize;
        }
        dims.push((w, h));
    }
    dims
}

pub fn validate_shape(
    width: usize,
    height: usize,
    levels: usize,
    scale: f64,
    min_side: usize,
) -> Result<()> {
    if levels == 0 {
        return Err(Error::param("levels", "must be at least 1"));
    }
    if !(scale.is_finite() && scale > 1.0) {
        return Err(Error::param("scale", "must be finite and > 1"));
    }
    for (l, (w, h)) in level_dims(width, height, levels, scale)
        .into_iter()
        .enumerate()
    {
        if w < min_side.max(1) || h < min_side.max(1) {
            return Err(Error::Domain(alloc::format!(
                "pyramid level {l} is {w}x{h}, smaller than the {min_side}-pixel window"
            )));
        }
    }
    Ok(())
}

pub(crate) fn smoothing_kernel(scale: f64) -> Vec<f64> {
    let sigma = 0.5 * sqrt(scale * scale - 1.0);
    let radius = ceil(2.0 * sigma) as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            exp(-d * d / (2.0 * sigma * sigma))
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Mirror index without repeating the edge sample (`-1 -> 1`).
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}

fn convolve_separable(frame: &Frame, kernel: &[f64]) -> Frame {
    let (w, h) = frame.dims();
    let r = (kernel.len() / 2) as isize;
    let src = frame.data();
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                acc += kv * row[reflect(x as isize + k as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (k, kv) in kernel.iter().enumerate() {
            let sy = reflect(y as isize + k as isize - r, h);
            let src_row = &tmp[sy * w..(sy + 1) * w];
            let dst_row = &mut out[y * w..(y + 1) * w];
            for (d, s) in dst_row.iter_mut().zip(src_row) {
                *d += kv * s;
            }
        }
    }
    Frame::new(w, h, out).expect("convolution preserves shape")
}

fn downsample(frame: &Frame, kernel: &[f64], scale: f64) -> Frame {
    let smooth = convolve_separable(frame, kernel);
    let (w, h) = frame.dims();
    let nw = floor(w as f64 / scale) as usize;
    let nh = floor(h as f64 / scale) as usize;
    Frame::from_fn(nw, nh, |x, y| {
        let sx = scale * (x as f64 + 0.5) - 0.5;
        let sy = scale * (y as f64 + 0.5) - 0.5;
        smooth.sample_clamped(sx, sy)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_halve() {
        let f = Frame::filled(64, 64, 0.3);
        let p = Pyramid::build(&f, 3, 2.0, 7).unwrap();
        let dims: Vec<_> = p.levels().iter().map(|l| l.dims()).collect();
        assert_eq!(dims, vec![(64, 64), (32, 32), (16, 16)]);
    }

    #[test]
    fn single_level_is_identity() {
        let f = Frame::from_fn(9, 11, |x, y| (x * 3 + y) as f64 / 40.0);
        let p = Pyramid::build(&f, 1, 2.0, 3).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.level(0), &f);
    }

    #[test]
    fn too_small_level_names_it() {
        let f = Frame::filled(32, 32, 0.0);
        match Pyramid::build(&f, 4, 2.0, 7) {
            Err(Error::Domain(msg)) => assert!(msg.contains("level 3")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn kernel_is_normalized() {
        for c in [1.3, 2.0, 3.0] {
            let k = smoothing_kernel(c);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(k.len() % 2, 1);
        }
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-2, 5), 2);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(6, 5), 2);
        assert_eq!(reflect(3, 1), 0);
    }

    #[test]
    fn odd_sizes_floor() {
        assert_eq!(
            level_dims(101, 37, 3, 2.0),
            vec![(101, 37), (50, 18), (25, 9)]
        );
        assert_eq!(level_dims(100, 100, 2, 1.5), vec![(100, 100), (66, 66)]);
    }
}
