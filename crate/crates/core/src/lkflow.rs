//! Single-scale dense Lucas-Kanade flow.
//!
//! For every pixel the displacement `d` minimizing
//!
//! ```text
//! sum_{q in window} w(q) * (grad I0(q) . d + I1(q + d) - I0(q))^2
//! ```
//!
//! is found by Gauss-Newton: the structure tensor comes from the gradients of
//! the first frame, and each iteration re-samples the second frame at the
//! displaced window (bilinear) to form the temporal difference. Increments
//! accumulate additively onto the running estimate.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::frame::{Frame, PixelMask, Region};
use crate::math::{exp, floor, sqrt};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LkParams {
    /// Window diameter in pixels (odd).
    pub window: usize,
    /// Standard deviation of the Gaussian window function `W`; samples are
    /// weighted by `W^2`.
    pub weight_sigma: f64,
    pub iterations: usize,
    /// Pixels whose structure tensor (weighted mean of gradient outer
    /// products, intensity^2 units) has a smaller eigenvalue below this are
    /// invalid.
    pub min_eigenvalue: f64,
}

impl Default for LkParams {
    fn default() -> Self {
        LkParams {
            window: 7,
            weight_sigma: 1.5,
            iterations: 3,
            min_eigenvalue: 1e-3,
        }
    }
}

impl LkParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::param("window", "must be odd and >= 3"));
        }
        if !(self.weight_sigma.is_finite() && self.weight_sigma > 0.0) {
            return Err(Error::param("weight_sigma", "must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::param("iterations", "must be at least 1"));
        }
        if !(self.min_eigenvalue.is_finite() && self.min_eigenvalue >= 0.0) {
            return Err(Error::param("min_eigenvalue", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn radius(&self) -> usize {
        self.window / 2
    }

    /// Normalized window weights `W^2 / sum W^2` as `(dx, dy, w)`.
    pub fn window_weights(&self) -> Vec<(isize, isize, f64)> {
        let r = self.radius() as isize;
        let s2 = self.weight_sigma * self.weight_sigma;
        let mut out = Vec::with_capacity(self.window * self.window);
        for dy in -r..=r {
            for dx in -r..=r {
                let wv = exp(-((dx * dx + dy * dy) as f64) / (2.0 * s2));
                out.push((dx, dy, wv * wv));
            }
        }
        let sum: f64 = out.iter().map(|t| t.2).sum();
        out.iter_mut().for_each(|t| t.2 /= sum);
        out
    }
}

/// Dense per-pixel displacement field with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    valid: Vec<bool>,
}

impl FlowField {
    pub fn invalid(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn uniform(width: usize, height: usize, u: f64, v: f64) -> Self {
        FlowField {
            width,
            height,
            u: vec![u; width * height],
            v: vec![v; width * height],
            valid: vec![true; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// The vector at `(x, y)` if valid.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<(f64, f64)> {
        let i = y * self.width + x;
        self.valid[i].then(|| (self.u[i], self.v[i]))
    }

    /// The stored vector regardless of validity.
    #[inline]
    pub fn raw(&self, x: usize, y: usize) -> (f64, f64, bool) {
        let i = y * self.width + x;
        (self.u[i], self.v[i], self.valid[i])
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: Option<(f64, f64)>) {
        let i = y * self.width + x;
        match value {
            Some((u, v)) if u.is_finite() && v.is_finite() => {
                self.u[i] = u;
                self.v[i] = v;
                self.valid[i] = true;
            }
            _ => {
                self.u[i] = 0.0;
                self.v[i] = 0.0;
                self.valid[i] = false;
            }
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Bilinearly resamples onto a `width x height` grid that is `factor`
    /// times finer and multiplies vectors by `factor`. Only pixels in
    /// `region` are filled. Invalid source samples are dropped and the
    /// remaining bilinear weights renormalized; a target pixel is invalid
    /// when no valid source sample carries weight.
    pub fn upsample(&self, width: usize, height: usize, factor: f64, region: Region) -> FlowField {
        self.resample(width, height, factor, factor, region)
    }

    /// As [`FlowField::upsample`] with separate grid `factor` and vector
    /// `multiplier`.
    pub fn resample(
        &self,
        width: usize,
        height: usize,
        factor: f64,
        multiplier: f64,
        region: Region,
    ) -> FlowField {
        let mut out = FlowField::invalid(width, height);
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        for (x, y) in region.clip(width, height).iter() {
            let sx = ((x as f64 + 0.5) / factor - 0.5).clamp(0.0, max_x);
            let sy = ((y as f64 + 0.5) / factor - 0.5).clamp(0.0, max_y);
            let x0 = floor(sx) as usize;
            let y0 = floor(sy) as usize;
            let x1 = (x0 + 1).min(self.width - 1);
            let y1 = (y0 + 1).min(self.height - 1);
            let ax = sx - x0 as f64;
            let ay = sy - y0 as f64;
            let taps = [
                (x0, y0, (1.0 - ax) * (1.0 - ay)),
                (x1, y0, ax * (1.0 - ay)),
                (x0, y1, (1.0 - ax) * ay),
                (x1, y1, ax * ay),
            ];
            let (mut su, mut sv, mut sw) = (0.0, 0.0, 0.0);
            for (tx, ty, w) in taps {
                if w > 0.0 {
                    if let Some((u, v)) = self.get(tx, ty) {
                        su += w * u;
                        sv += w * v;
                        sw += w;
                    }
                }
            }
            if sw > 0.0 {
                out.set(x, y, Some((multiplier * (su / sw), multiplier * (sv / sw))));
            }
        }
        out
    }
}

/// Weighted normal equations of one window: `G d = -b` with
/// `G = sum w [gx gx, gx gy; gx gy, gy gy]` and `b = sum w [gx gt, gy gt]`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NormalEquations {
    pub gxx: f64,
    pub gxy: f64,
    pub gyy: f64,
    pub bx: f64,
    pub by: f64,
}

impl NormalEquations {
    #[inline]
    pub fn add(&mut self, w: f64, gx: f64, gy: f64, gt: f64) {
        self.add_tensor(w, gx, gy);
        self.add_mismatch(w, gx, gy, gt);
    }

    #[inline]
    fn add_tensor(&mut self, w: f64, gx: f64, gy: f64) {
        self.gxx += w * gx * gx;
        self.gxy += w * gx * gy;
        self.gyy += w * gy * gy;
    }

    #[inline]
    fn add_mismatch(&mut self, w: f64, gx: f64, gy: f64, gt: f64) {
        self.bx += w * gx * gt;
        self.by += w * gy * gt;
    }

    /// Smaller eigenvalue of the structure tensor.
    pub fn min_eigenvalue(&self) -> f64 {
        let half_trace = 0.5 * (self.gxx + self.gyy);
        let half_diff = 0.5 * (self.gxx - self.gyy);
        half_trace - sqrt(half_diff * half_diff + self.gxy * self.gxy)
    }

    /// Smaller eigenvalue at least `min_eigenvalue`; false for NaN.
    fn conditioned(&self, min_eigenvalue: f64) -> bool {
        self.min_eigenvalue()
            .partial_cmp(&min_eigenvalue)
            .is_some_and(|o| o.is_ge())
    }

    /// Closed-form solution of the 2x2 system, `None` when the smaller
    /// eigenvalue is below `min_eigenvalue` or the determinant vanishes.
    pub fn solve(&self, min_eigenvalue: f64) -> Option<(f64, f64)> {
        if !self.conditioned(min_eigenvalue) {
            return None;
        }
        let det = self.gxx * self.gyy - self.gxy * self.gxy;
        if det <= 0.0 || !det.is_finite() {
            return None;
        }
        let u = -(self.gyy * self.bx - self.gxy * self.by) / det;
        let v = -(self.gxx * self.by - self.gxy * self.bx) / det;
        Some((u, v))
    }
}

/// Central differences in the interior, one-sided at the borders.
pub fn spatial_gradient(frame: &Frame) -> Result<(Frame, Frame)> {
    let (w, h) = frame.dims();
    if w < 3 || h < 3 {
        return Err(Error::param("frame", "gradient needs at least 3x3 pixels"));
    }
    let gx = Frame::from_fn(w, h, |x, y| {
        if x == 0 {
            frame.get(1, y) - frame.get(0, y)
        } else if x == w - 1 {
            frame.get(w - 1, y) - frame.get(w - 2, y)
        } else {
            0.5 * (frame.get(x + 1, y) - frame.get(x - 1, y))
        }
    });
    let gy = Frame::from_fn(w, h, |x, y| {
        if y == 0 {
            frame.get(x, 1) - frame.get(x, 0)
        } else if y == h - 1 {
            frame.get(x, h - 1) - frame.get(x, h - 2)
        } else {
            0.5 * (frame.get(x, y + 1) - frame.get(x, y - 1))
        }
    });
    Ok((gx, gy))
}

/// Displacement used by [`warp`].
#[derive(Debug, Clone, Copy)]
pub enum Displacement<'a> {
    Uniform(f64, f64),
    /// Invalid vectors are treated as zero displacement.
    Field(&'a FlowField),
}

/// Result of [`warp`]: the resampled frame plus the pixels whose source
/// position fell outside the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Warped {
    pub frame: Frame,
    pub out_of_bounds: PixelMask,
}

/// `output(x, y) = input(x + u, y + v)` with bilinear interpolation;
/// out-of-range samples take the nearest border value and are flagged.
pub fn warp(frame: &Frame, displacement: Displacement<'_>) -> Result<Warped> {
    let (w, h) = frame.dims();
    if let Displacement::Field(f) = displacement {
        if f.dims() != (w, h) {
            return Err(Error::DimensionMismatch(w, h, f.width(), f.height()));
        }
    }
    let mut oob = PixelMask::empty(w, h);
    let out = Frame::from_fn(w, h, |x, y| {
        let (u, v) = match displacement {
            Displacement::Uniform(u, v) => (u, v),
            Displacement::Field(f) => f.get(x, y).unwrap_or((0.0, 0.0)),
        };
        let sx = x as f64 + u;
        let sy = y as f64 + v;
        match frame.sample(sx, sy) {
            Some(s) => s,
            None => {
                oob.insert(x, y);
                frame.sample_clamped(sx, sy)
            }
        }
    });
    Ok(Warped {
        frame: out,
        out_of_bounds: oob,
    })
}

/// Precomputed state for solving many pixels of one frame pair.
pub(crate) struct PairSolver<'a> {
    prev: &'a Frame,
    next: &'a Frame,
    gx: Frame,
    gy: Frame,
    weights: Vec<(isize, isize, f64)>,
    params: LkParams,
}

impl<'a> PairSolver<'a> {
    pub(crate) fn new(prev: &'a Frame, next: &'a Frame, params: &LkParams) -> Result<Self> {
        params.validate()?;
        if prev.dims() != next.dims() {
            return Err(Error::DimensionMismatch(
                prev.width(),
                prev.height(),
                next.width(),
                next.height(),
            ));
        }
        if prev.width() < params.window || prev.height() < params.window {
            return Err(Error::Domain(alloc::format!(
                "{}x{} frame is smaller than the {}-pixel window",
                prev.width(),
                prev.height(),
                params.window
            )));
        }
        let (gx, gy) = spatial_gradient(prev)?;
        Ok(PairSolver {
            prev,
            next,
            gx,
            gy,
            weights: params.window_weights(),
            params: *params,
        })
    }

    /// Iterated LK at `(x, y)` starting from `guess`.
    pub(crate) fn solve_pixel(&self, x: usize, y: usize, guess: (f64, f64)) -> Option<(f64, f64)> {
        let (w, h) = self.prev.dims();
        let mut tensor = NormalEquations::default();
        let mut wsum = 0.0;
        let mut taps: Vec<(usize, usize, f64)> = Vec::with_capacity(self.weights.len());
        for &(dx, dy, wt) in &self.weights {
            let qx = x as isize + dx;
            let qy = y as isize + dy;
            if qx < 0 || qy < 0 || qx >= w as isize || qy >= h as isize {
                continue;
            }
            let (qx, qy) = (qx as usize, qy as usize);
            tensor.add_tensor(wt, self.gx.get(qx, qy), self.gy.get(qx, qy));
            wsum += wt;
            taps.push((qx, qy, wt));
        }
        tensor.gxx /= wsum;
        tensor.gxy /= wsum;
        tensor.gyy /= wsum;
        if !tensor.conditioned(self.params.min_eigenvalue) {
            return None;
        }
        let (mut du, mut dv) = guess;
        for _ in 0..self.params.iterations {
            let mut eq = tensor;
            for &(qx, qy, wt) in &taps {
                let s = self.next.sample(qx as f64 + du, qy as f64 + dv)?;
                let gt = s - self.prev.get(qx, qy);
                eq.add_mismatch(wt / wsum, self.gx.get(qx, qy), self.gy.get(qx, qy), gt);
            }
            let (iu, iv) = eq.solve(self.params.min_eigenvalue)?;
            du += iu;
            dv += iv;
            if !(du.is_finite() && dv.is_finite()) {
                return None;
            }
        }
        Some((du, dv))
    }

    /// Solves every pixel of `region`. With `guess`, pixels whose guess is
    /// invalid stay invalid.
    pub(crate) fn solve_region(&self, region: Region, guess: Option<&FlowField>) -> FlowField {
        let (w, h) = self.prev.dims();
        let mut out = FlowField::invalid(w, h);
        for (x, y) in region.clip(w, h).iter() {
            let start = match guess {
                None => Some((0.0, 0.0)),
                Some(g) => g.get(x, y),
            };
            let value = start.and_then(|s| self.solve_pixel(x, y, s));
            out.set(x, y, value);
        }
        out
    }
}

/// Dense LK flow from `prev` to `next` over the whole frame.
pub fn lk_flow(prev: &Frame, next: &Frame, params: &LkParams) -> Result<FlowField> {
    let solver = PairSolver::new(prev, next, params)?;
    Ok(solver.solve_region(Region::full(prev.width(), prev.height()), None))
}

/// LK flow restricted to `region`; pixels outside are invalid. Per-pixel
/// results equal those of [`lk_flow`].
pub fn lk_flow_region(
    prev: &Frame,
    next: &Frame,
    params: &LkParams,
    region: Region,
) -> Result<FlowField> {
    let solver = PairSolver::new(prev, next, params)?;
    Ok(solver.solve_region(region, None))
}

/// Mean vector over the valid pixels of `mask`; `Ok(None)` when the mask
/// holds no valid pixel.
pub fn mean_object_speed(flow: &FlowField, mask: &PixelMask) -> Result<Option<(f64, f64)>> {
    if mask.dims() != flow.dims() {
        let (mw, mh) = mask.dims();
        return Err(Error::DimensionMismatch(
            flow.width(),
            flow.height(),
            mw,
            mh,
        ));
    }
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let (mut su, mut sv, mut n) = (0.0, 0.0, 0usize);
    for (x, y) in mask.iter() {
        if let Some((u, v)) = flow.get(x, y) {
            su += u;
            sv += v;
            n += 1;
        }
    }
    Ok((n > 0).then(|| (su / n as f64, sv / n as f64)))
}
