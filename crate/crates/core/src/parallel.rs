//! Parallel multi-scale flow.
//!
//! Every pyramid level is solved on its own, with no information flowing
//! between levels. Each level's field is brought to level-0 units and
//! resolution, and the per-pixel vectors are averaged with weights from a
//! log-normal confidence model: level `l` is trusted most for speeds near
//! `exp(mu0) * c^l`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::frame::{Frame, FrameSequence, PixelMask, Region};
use crate::lkflow::{mean_object_speed, FlowField, LkParams, PairSolver};
use crate::math::{exp, hypot, ln, powi};
use crate::pyramid::Pyramid;

/// Per-level confidence `k(l, v) = exp(-((ln v - mu_l) / sigma0)^2)` with
/// `mu_l = mu0 + l ln c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceModel {
    /// Log of the level-0 preferred speed (natural log of px/frame).
    pub mu0: f64,
    /// Log-space width shared by all levels.
    pub sigma0: f64,
    pub scale: f64,
    pub levels: usize,
}

impl ConfidenceModel {
    pub fn validate(&self) -> Result<()> {
        if !self.mu0.is_finite() {
            return Err(Error::param("mu0", "must be finite"));
        }
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            return Err(Error::param("sigma0", "must be positive"));
        }
        if !(self.scale.is_finite() && self.scale > 1.0) {
            return Err(Error::param("c", "must be finite and > 1"));
        }
        if self.levels == 0 {
            return Err(Error::param("L", "must be at least 1"));
        }
        Ok(())
    }

    pub fn level_mean(&self, level: usize) -> f64 {
        self.mu0 + level as f64 * ln(self.scale)
    }

    /// Confidence of level `level` in an estimate of magnitude `speed`.
    /// Returns 0 for non-positive or non-finite speeds.
    pub fn confidence(&self, level: usize, speed: f64) -> f64 {
        if !(speed > 0.0 && speed.is_finite()) {
            return 0.0;
        }
        let z = (ln(speed) - self.level_mean(level)) / self.sigma0;
        exp(-z * z)
    }

    /// Same model with a different level count.
    pub fn with_levels(self, levels: usize) -> Self {
        ConfidenceModel { levels, ..self }
    }

    /// `key=value` text form: `mu0`, `sigma0`, `c`, `L`, one per line.
    pub fn to_kv_string(&self) -> String {
        format!(
            "mu0={}\nsigma0={}\nc={}\nL={}\n",
            self.mu0, self.sigma0, self.scale, self.levels
        )
    }

    /// Parses the `key=value` form. Blank lines and `#` comments are
    /// ignored; all four keys are required.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let (mut mu0, mut sigma0, mut scale, mut levels) = (None, None, None, None);
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::param(
                    "model",
                    format!("line {}: expected key=value", n + 1),
                ));
            };
            let value = value.trim();
            let real = || {
                value.parse::<f64>().map_err(|_| {
                    Error::param("model", format!("line {}: bad number `{value}`", n + 1))
                })
            };
            match key.trim() {
                "mu0" => mu0 = Some(real()?),
                "sigma0" => sigma0 = Some(real()?),
                "c" => scale = Some(real()?),
                "L" => {
                    levels = Some(value.parse::<usize>().map_err(|_| {
                        Error::param(
                            "model",
                            format!("line {}: bad level count `{value}`", n + 1),
                        )
                    })?)
                }
                other => {
                    return Err(Error::param(
                        "model",
                        format!("line {}: unknown key `{other}`", n + 1),
                    ))
                }
            }
        }
        let missing = |k: &str| Error::param("model", format!("missing key `{k}`"));
        let model = ConfidenceModel {
            mu0: mu0.ok_or_else(|| missing("mu0"))?,
            sigma0: sigma0.ok_or_else(|| missing("sigma0"))?,
            scale: scale.ok_or_else(|| missing("c"))?,
            levels: levels.ok_or_else(|| missing("L"))?,
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParallelParams {
    pub model: ConfidenceModel,
    pub lk: LkParams,
    /// Pixels whose total confidence falls below this are invalid.
    pub weight_floor: f64,
}

impl ParallelParams {
    pub fn new(model: ConfidenceModel) -> Self {
        ParallelParams {
            model,
            lk: LkParams::default(),
            weight_floor: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.lk.validate()?;
        if !(self.weight_floor.is_finite() && self.weight_floor >= 0.0) {
            return Err(Error::param("weight_floor", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Confidence-weighted mean of per-level vectors (already in level-0
/// units). `estimates[l]` is `None` where level `l` has no valid vector.
/// Returns `None` if no level contributes or the total weight is below
/// `floor`.
pub fn fuse(
    model: &ConfidenceModel,
    estimates: &[Option<(f64, f64)>],
    floor: f64,
) -> Option<(f64, f64)> {
    let mut reference: Option<(f64, f64)> = None;
    let (mut su, mut sv, mut sw) = (0.0, 0.0, 0.0);
    for (l, est) in estimates.iter().enumerate() {
        let Some((u, v)) = *est else { continue };
        let w = model.confidence(l, hypot(u, v));
        if w <= 0.0 {
            continue;
        }
        // Accumulate offsets from the first contributor so that equal
        // inputs reproduce their value exactly.
        let (ru, rv) = *reference.get_or_insert((u, v));
        su += w * (u - ru);
        sv += w * (v - rv);
        sw += w;
    }
    let (ru, rv) = reference?;
    if sw < floor || sw <= 0.0 {
        return None;
    }
    Some((ru + su / sw, rv + sv / sw))
}

/// Normalized fusion weights for `estimates`; empty when fusion is
/// undefined.
pub fn fusion_weights(model: &ConfidenceModel, estimates: &[Option<(f64, f64)>]) -> Vec<f64> {
    let raw: Vec<f64> = estimates
        .iter()
        .enumerate()
        .map(|(l, e)| e.map_or(0.0, |(u, v)| model.confidence(l, hypot(u, v))))
        .collect();
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Vec::new();
    }
    raw.into_iter().map(|w| w / total).collect()
}

/// Fused field plus the per-level fields it was built from (level-0 units
/// and resolution).
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelOutput {
    pub fused: FlowField,
    pub levels: Vec<FlowField>,
}

impl ParallelOutput {
    /// Mean normalized weight of each level over the pixels of `mask`
    /// where fusion is defined.
    pub fn mean_weights(&self, model: &ConfidenceModel, mask: &PixelMask) -> Vec<f64> {
        let mut sums = alloc::vec![0.0; self.levels.len()];
        let mut n = 0usize;
        for (x, y) in mask.iter() {
            let est: Vec<_> = self.levels.iter().map(|f| f.get(x, y)).collect();
            let w = fusion_weights(model, &est);
            if w.is_empty() {
                continue;
            }
            n += 1;
            for (s, wi) in sums.iter_mut().zip(w) {
                *s += wi;
            }
        }
        if n > 0 {
            sums.iter_mut().for_each(|s| *s /= n as f64);
        }
        sums
    }
}

/// One level of the parallel estimator: LK at `level`, brought to level-0
/// units and resolution over `region`. Depends on nothing but the two
/// pyramids.
pub fn level_estimate(
    prev: &Pyramid,
    next: &Pyramid,
    level: usize,
    lk: &LkParams,
    region: Region,
) -> Result<FlowField> {
    let (w0, h0) = prev.level(0).dims();
    let region = region.clip(w0, h0);
    let solver = PairSolver::new(prev.level(level), next.level(level), lk)?;
    if level == 0 {
        return Ok(solver.solve_region(region, None));
    }
    let unit = powi(prev.scale(), level);
    let (wl, hl) = prev.level(level).dims();
    let field = solver.solve_region(region.to_coarse(unit, wl, hl), None);
    Ok(field.upsample(w0, h0, unit, region))
}

/// Parallel flow on prebuilt pyramids over `region` of level 0, levels
/// dispatched through `exec`.
pub fn parallel_flow_pyramids<E: Executor>(
    exec: &E,
    prev: &Pyramid,
    next: &Pyramid,
    params: &ParallelParams,
    region: Region,
) -> Result<ParallelOutput> {
    params.validate()?;
    let levels = params.model.levels;
    if prev.len() < levels || next.len() < levels {
        return Err(Error::param("L", "pyramids are shallower than requested"));
    }
    if (prev.scale() - params.model.scale).abs() > 1e-12 {
        return Err(Error::param("c", "pyramid scale differs from the model"));
    }
    let per_level = exec.map(levels, |l| {
        level_estimate(prev, next, l, &params.lk, region)
    });
    let level_fields = per_level.into_iter().collect::<Result<Vec<_>>>()?;
    let fused = fuse_fields(&params.model, &level_fields, params.weight_floor, region);
    Ok(ParallelOutput {
        fused,
        levels: level_fields,
    })
}

/// Pixel-wise [`fuse`] of level fields over `region`.
pub fn fuse_fields(
    model: &ConfidenceModel,
    levels: &[FlowField],
    floor: f64,
    region: Region,
) -> FlowField {
    let (w, h) = levels[0].dims();
    let mut out = FlowField::invalid(w, h);
    let mut est = alloc::vec![None; levels.len()];
    for (x, y) in region.clip(w, h).iter() {
        for (slot, f) in est.iter_mut().zip(levels) {
            *slot = f.get(x, y);
        }
        out.set(x, y, fuse(model, &est, floor));
    }
    out
}

/// Full-frame parallel flow, levels evaluated through `exec`.
pub fn parallel_flow_with<E: Executor>(
    exec: &E,
    prev: &Frame,
    next: &Frame,
    params: &ParallelParams,
) -> Result<ParallelOutput> {
    params.validate()?;
    let m = &params.model;
    let a = Pyramid::build(prev, m.levels, m.scale, params.lk.window)?;
    let b = Pyramid::build(next, m.levels, m.scale, params.lk.window)?;
    parallel_flow_pyramids(
        exec,
        &a,
        &b,
        params,
        Region::full(prev.width(), prev.height()),
    )
}

/// Full-frame parallel flow, levels evaluated sequentially.
pub fn parallel_flow(prev: &Frame, next: &Frame, params: &ParallelParams) -> Result<FlowField> {
    parallel_flow_with(&Sequential, prev, next, params).map(|o| o.fused)
}

/// Mean parallel flow over `mask` between the first two frames of `seq`.
pub fn parallel_object_speed(
    seq: &FrameSequence,
    mask: &PixelMask,
    params: &ParallelParams,
) -> Result<Option<(f64, f64)>> {
    params.validate()?;
    let (prev, next) = seq.pair()?;
    let region = mask.bounds().ok_or(Error::EmptyMask)?;
    let m = &params.model;
    let a = Pyramid::build(prev, m.levels, m.scale, params.lk.window)?;
    let b = Pyramid::build(next, m.levels, m.scale, params.lk.window)?;
    let out = parallel_flow_pyramids(&Sequential, &a, &b, params, region)?;
    mean_object_speed(&out.fused, mask)
}
