//! Synthetic stimuli: a single object translating at constant velocity over
//! a uniform background, with additive Gaussian white noise.
//!
//! Objects are rendered by exact pixel-area integration so that sub-pixel
//! displacements change intensities smoothly. Noise is drawn per frame from
//! a stream keyed by `(seed, frame index)` only, so two specs that differ
//! only in velocity share the same noise fields.

use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::frame::{Frame, FrameSequence, PixelMask};
use crate::math::{asin, derive_seed, erf, sqrt};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    Square,
    Disk,
    /// Isotropic Gaussian with standard deviation `diameter / 4`.
    GaussianBlob,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub object: ObjectKind,
    pub diameter: f64,
    pub background: f64,
    /// Object intensity above the background.
    pub contrast: f64,
    /// Pixels per frame, `+x` right and `+y` down.
    pub velocity: (f64, f64),
    pub frames: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Object centre at the temporal midpoint of the sequence; image centre
    /// when `None`.
    pub center: Option<(f64, f64)>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            width: 128,
            height: 128,
            object: ObjectKind::Square,
            diameter: 16.0,
            background: 0.1,
            contrast: 0.8,
            velocity: (0.0, 0.0),
            frames: 2,
            noise_sigma: 0.02,
            seed: 0,
            center: None,
        }
    }
}

impl SynthSpec {
    pub fn with_velocity(mut self, u: f64, v: f64) -> Self {
        self.velocity = (u, v);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn speed(&self) -> f64 {
        crate::math::hypot(self.velocity.0, self.velocity.1)
    }

    /// Object centre in frame `t` (pixel centres at integer coordinates).
    pub fn object_center(&self, t: usize) -> (f64, f64) {
        let (cx, cy) = self.center.unwrap_or((
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
        ));
        let k = t as f64 - (self.frames as f64 - 1.0) / 2.0;
        (cx + k * self.velocity.0, cy + k * self.velocity.1)
    }

    fn half_extent(&self) -> f64 {
        self.diameter / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::param("size", "image dimensions must be positive"));
        }
        if !(self.diameter.is_finite() && self.diameter > 0.0) {
            return Err(Error::param("diameter", "must be positive"));
        }
        if self.frames == 0 {
            return Err(Error::param("frames", "must be at least 1"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::param("noise", "sigma must be finite and >= 0"));
        }
        if !(self.background.is_finite() && self.contrast.is_finite()) {
            return Err(Error::param("contrast", "intensities must be finite"));
        }
        if !(self.velocity.0.is_finite() && self.velocity.1.is_finite()) {
            return Err(Error::param("velocity", "must be finite"));
        }
        let e = self.half_extent();
        let (w, h) = (self.width as f64, self.height as f64);
        for t in 0..self.frames {
            let (cx, cy) = self.object_center(t);
            if cx - e < -0.5 || cy - e < -0.5 || cx + e > w - 0.5 || cy + e > h - 0.5 {
                return Err(Error::Domain(alloc::format!(
                    "object leaves the {}x{} frame at frame {} (centre {:.2},{:.2})",
                    self.width,
                    self.height,
                    t,
                    cx,
                    cy
                )));
            }
        }
        Ok(())
    }

    /// Fraction of pixel `(x, y)` covered by the object in frame `t`
    /// (for the blob: pixel-averaged profile, 1 at the centre).
    pub fn coverage(&self, t: usize, x: usize, y: usize) -> f64 {
        let (cx, cy) = self.object_center(t);
        let (x0, x1) = (x as f64 - 0.5 - cx, x as f64 + 0.5 - cx);
        let (y0, y1) = (y as f64 - 0.5 - cy, y as f64 + 0.5 - cy);
        let e = self.half_extent();
        match self.object {
            ObjectKind::Square => overlap(x0, x1, -e, e) * overlap(y0, y1, -e, e),
            ObjectKind::Disk => disk_rect_area(e, x0, x1, y0, y1),
            ObjectKind::GaussianBlob => {
                let s = self.diameter / 4.0;
                gauss_integral(s, x0, x1) * gauss_integral(s, y0, y1)
            }
        }
    }

    /// Noise-free frame `t`.
    pub fn render_clean(&self, t: usize) -> Frame {
        let e = self.half_extent() + 1.0;
        let (cx, cy) = self.object_center(t);
        Frame::from_fn(self.width, self.height, |x, y| {
            let (xf, yf) = (x as f64, y as f64);
            let near = match self.object {
                ObjectKind::GaussianBlob => true,
                _ => (xf - cx).abs() <= e && (yf - cy).abs() <= e,
            };
            if near {
                self.background + self.contrast * self.coverage(t, x, y)
            } else {
                self.background
            }
        })
    }

    /// Pixels whose coverage in frame `t` is at least one half.
    pub fn object_mask(&self, t: usize) -> PixelMask {
        let e = self.half_extent() + 1.0;
        let (cx, cy) = self.object_center(t);
        PixelMask::from_fn(self.width, self.height, |x, y| {
            (x as f64 - cx).abs() <= e
                && (y as f64 - cy).abs() <= e
                && self.coverage(t, x, y) >= 0.5
        })
    }
}

/// Renders the sequence: clean frame plus `N(0, sigma^2)` per pixel, clamped
/// to `[0, 1]`. Deterministic in `spec`.
pub fn generate_sequence(spec: &SynthSpec) -> Result<FrameSequence> {
    spec.validate()?;
    let frames: Vec<Frame> = (0..spec.frames)
        .map(|t| {
            let clean = spec.render_clean(t);
            add_noise(clean, spec.noise_sigma, derive_seed(spec.seed, &[t as u64]))
        })
        .collect();
    FrameSequence::new(frames)
}

fn add_noise(frame: Frame, sigma: f64, seed: u64) -> Frame {
    let (w, h) = frame.dims();
    let mut data = frame.into_data();
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in data.iter_mut() {
            let n: f64 = StandardNormal.sample(&mut rng);
            *v = (*v + sigma * n).clamp(0.0, 1.0);
        }
    } else {
        for v in data.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }
    Frame::new(w, h, data).expect("noise keeps dimensions and finiteness")
}

#[inline]
fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Integral of `exp(-x^2 / (2 s^2))` over `[a, b]`.
fn gauss_integral(s: f64, a: f64, b: f64) -> f64 {
    let k = s * sqrt(2.0);
    s * sqrt(core::f64::consts::PI / 2.0) * (erf(b / k) - erf(a / k))
}

/// Area of the intersection of the disk of radius `r` centred at the origin
/// with the rectangle `[x0, x1] x [y0, y1]`.
pub(crate) fn disk_rect_area(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let a = x0.max(-r);
    let b = x1.min(r);
    if a >= b || y0 >= r || y1 <= -r {
        return 0.0;
    }
    let chord = |x: f64| sqrt((r * r - x * x).max(0.0));
    // Antiderivative of the half-chord.
    let prim = |x: f64| {
        let x = x.clamp(-r, r);
        0.5 * (x * chord(x) + r * r * asin(x / r))
    };
    let mut cuts = [a, b, 0.0, 0.0, 0.0, 0.0];
    let mut n = 2;
    for yb in [y0, y1] {
        if yb.abs() < r {
            let xb = sqrt(r * r - yb * yb);
            for c in [-xb, xb] {
                if c > a && c < b {
                    cuts[n] = c;
                    n += 1;
                }
            }
        }
    }
    let cuts = &mut cuts[..n];
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let mut area = 0.0;
    for pair in cuts.windows(2) {
        let (s, e) = (pair[0], pair[1]);
        if e <= s {
            continue;
        }
        let m = 0.5 * (s + e);
        let hm = chord(m);
        let top_is_chord = hm < y1;
        let bottom_is_chord = -hm > y0;
        let top = if top_is_chord { hm } else { y1 };
        let bottom = if bottom_is_chord { -hm } else { y0 };
        if top <= bottom {
            continue;
        }
        let chord_int = prim(e) - prim(s);
        let len = e - s;
        area += if top_is_chord { chord_int } else { y1 * len };
        area -= if bottom_is_chord {
            -chord_int
        } else {
            y0 * len
        };
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_area_whole_and_quadrant() {
        let pi = core::f64::consts::PI;
        let full = disk_rect_area(3.0, -5.0, 5.0, -5.0, 5.0);
        assert!((full - 9.0 * pi).abs() < 1e-12);
        let quad = disk_rect_area(3.0, 0.0, 5.0, 0.0, 5.0);
        assert!((quad - 9.0 * pi / 4.0).abs() < 1e-12);
        let inner = disk_rect_area(3.0, -0.5, 0.5, -0.5, 0.5);
        assert!((inner - 1.0).abs() < 1e-12);
        assert_eq!(disk_rect_area(3.0, 4.0, 5.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn disk_area_matches_supersampling() {
        let r = 2.7;
        let (x0, x1, y0, y1) = (1.2, 2.2, 1.5, 2.5);
        let n = 2000;
        let mut hits = 0usize;
        for i in 0..n {
            for j in 0..n {
                let x = x0 + (i as f64 + 0.5) / n as f64;
                let y = y0 + (j as f64 + 0.5) / n as f64;
                if x * x + y * y <= r * r {
                    hits += 1;
                }
            }
        }
        let mc = hits as f64 / (n * n) as f64;
        assert!((disk_rect_area(r, x0, x1, y0, y1) - mc).abs() < 1e-4);
    }

    #[test]
    fn out_of_bounds_is_domain_error() {
        let spec = SynthSpec::default().with_velocity(200.0, 0.0);
        assert!(matches!(generate_sequence(&spec), Err(Error::Domain(_))));
    }

    #[test]
    fn integer_shift_moves_object_exactly() {
        let spec = SynthSpec::default()
            .with_velocity(10.0, 10.0)
            .with_noise(0.0);
        let seq = generate_sequence(&spec).unwrap();
        let (a, b) = seq.pair().unwrap();
        for y in 0..118 {
            for x in 0..118 {
                assert_eq!(a.get(x, y), b.get(x + 10, y + 10));
            }
        }
        assert_ne!(a, b);
    }

    #[test]
    fn mask_covers_square() {
        let spec = SynthSpec::default().with_noise(0.0);
        assert_eq!(spec.object_mask(0).count(), 256);
    }
}
