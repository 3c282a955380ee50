//! Coarse-to-fine (serial) multi-scale flow.
//!
//! The coarsest level is solved from a zero start. Every finer level starts
//! each pixel at the coarser field upsampled and multiplied by the scale
//! factor, then solves for the residual, so that
//! `v[l-1] = c * up(v[l]) + d[l-1]`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::frame::{Frame, FrameSequence, PixelMask, Region};
use crate::lkflow::{mean_object_speed, FlowField, LkParams, PairSolver};
use crate::pyramid::Pyramid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerialParams {
    pub levels: usize,
    pub scale: f64,
    pub lk: LkParams,
}

impl Default for SerialParams {
    fn default() -> Self {
        SerialParams {
            levels: 3,
            scale: 2.0,
            lk: LkParams::default(),
        }
    }
}

impl SerialParams {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::param("levels", "must be at least 1"));
        }
        if !(self.scale.is_finite() && self.scale > 1.0) {
            return Err(Error::param("scale", "must be finite and > 1"));
        }
        self.lk.validate()
    }
}

/// Serial flow on prebuilt pyramids, restricted to `region` of level 0.
pub fn serial_flow_pyramids(
    prev: &Pyramid,
    next: &Pyramid,
    params: &SerialParams,
    region: Region,
) -> Result<FlowField> {
    params.validate()?;
    if prev.len() < params.levels || next.len() < params.levels {
        return Err(Error::param(
            "levels",
            "pyramids are shallower than requested",
        ));
    }
    let regions = level_regions(prev, params.levels, region);
    let top = params.levels - 1;
    let solver = PairSolver::new(prev.level(top), next.level(top), &params.lk)?;
    let mut field = solver.solve_region(regions[top], None);
    for l in (0..top).rev() {
        let (w, h) = prev.level(l).dims();
        let projected = field.upsample(w, h, params.scale, regions[l]);
        debug_assert!(projection_is_scaled(
            &field,
            &projected,
            params.scale,
            regions[l]
        ));
        let solver = PairSolver::new(prev.level(l), next.level(l), &params.lk)?;
        field = solver.solve_region(regions[l], Some(&projected));
    }
    Ok(field)
}

/// Regions at each level needed to serve `region` at level 0.
fn level_regions(pyr: &Pyramid, levels: usize, region: Region) -> Vec<Region> {
    let mut out = Vec::with_capacity(levels);
    let (w0, h0) = pyr.level(0).dims();
    out.push(region.clip(w0, h0));
    for l in 1..levels {
        let (w, h) = pyr.level(l).dims();
        let r = out[l - 1].to_coarse(pyr.scale(), w, h);
        out.push(r);
    }
    out
}

// The projected field must be exactly `scale` times the plain upsampled one.
fn projection_is_scaled(coarse: &FlowField, projected: &FlowField, scale: f64, r: Region) -> bool {
    let (w, h) = projected.dims();
    let plain = coarse.resample(w, h, scale, 1.0, r);
    r.clip(w, h)
        .iter()
        .all(|(x, y)| match (projected.get(x, y), plain.get(x, y)) {
            (None, None) => true,
            (Some((pu, pv)), Some((u, v))) => pu == scale * u && pv == scale * v,
            _ => false,
        })
}

/// Full-frame serial flow between two frames.
pub fn serial_flow(prev: &Frame, next: &Frame, params: &SerialParams) -> Result<FlowField> {
    params.validate()?;
    let a = Pyramid::build(prev, params.levels, params.scale, params.lk.window)?;
    let b = Pyramid::build(next, params.levels, params.scale, params.lk.window)?;
    serial_flow_pyramids(&a, &b, params, Region::full(prev.width(), prev.height()))
}

/// Mean serial flow over `mask` between the first two frames of `seq`.
pub fn serial_object_speed(
    seq: &FrameSequence,
    mask: &PixelMask,
    params: &SerialParams,
) -> Result<Option<(f64, f64)>> {
    let (prev, next) = seq.pair()?;
    let region = mask.bounds().ok_or(Error::EmptyMask)?;
    let a = Pyramid::build(prev, params.levels, params.scale, params.lk.window)?;
    let b = Pyramid::build(next, params.levels, params.scale, params.lk.window)?;
    let flow = serial_flow_pyramids(&a, &b, params, region)?;
    mean_object_speed(&flow, mask)
}
