//! Object-speed estimators run on synthetic stimuli.

use alloc::format;
use alloc::string::String;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::lkflow::{mean_object_speed, LkParams};
use crate::math::hypot;
use crate::parallel::{level_estimate, parallel_flow_pyramids, ParallelParams};
use crate::pyramid::Pyramid;
use crate::serial::{serial_flow_pyramids, SerialParams};
use crate::synth::{generate_sequence, SynthSpec};

/// A way of turning a two-frame stimulus into a mean object velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    /// Returns the generator's true velocity.
    GroundTruth,
    /// LK at a single pyramid level, brought to level-0 units.
    SingleLevel {
        level: usize,
        scale: f64,
        lk: LkParams,
    },
    Serial(SerialParams),
    Parallel(ParallelParams),
}

impl Estimator {
    pub fn name(&self) -> String {
        match self {
            Estimator::GroundTruth => "oracle".into(),
            Estimator::SingleLevel { level, .. } => format!("level{level}"),
            Estimator::Serial(_) => "serial".into(),
            Estimator::Parallel(_) => "parallel".into(),
        }
    }

    /// Number of pyramid levels the estimator uses.
    pub fn levels(&self) -> usize {
        match self {
            Estimator::GroundTruth => 1,
            Estimator::SingleLevel { level, .. } => level + 1,
            Estimator::Serial(p) => p.levels,
            Estimator::Parallel(p) => p.model.levels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Estimator::GroundTruth => Ok(()),
            Estimator::SingleLevel { scale, lk, .. } => {
                if !(scale.is_finite() && *scale > 1.0) {
                    return Err(Error::param("scale", "must be finite and > 1"));
                }
                lk.validate()
            }
            Estimator::Serial(p) => p.validate(),
            Estimator::Parallel(p) => p.validate(),
        }
    }

    fn geometry(&self) -> Option<(usize, f64, usize)> {
        match self {
            Estimator::GroundTruth => None,
            Estimator::SingleLevel { level, scale, lk } => Some((level + 1, *scale, lk.window)),
            Estimator::Serial(p) => Some((p.levels, p.scale, p.lk.window)),
            Estimator::Parallel(p) => Some((p.model.levels, p.model.scale, p.lk.window)),
        }
    }

    /// Mean velocity over the object's frame-0 footprint, `None` when no
    /// pixel of the footprint carries a valid vector. Level work for the
    /// parallel estimator is dispatched through `exec`.
    pub fn estimate_velocity<E: Executor>(
        &self,
        spec: &SynthSpec,
        exec: &E,
    ) -> Result<Option<(f64, f64)>> {
        let Some((levels, scale, window)) = self.geometry() else {
            spec.validate()?;
            return Ok(Some(spec.velocity));
        };
        let seq = generate_sequence(spec)?;
        let (prev, next) = seq.pair()?;
        let mask = spec.object_mask(0);
        let region = mask.bounds().ok_or(Error::EmptyMask)?;
        let a = Pyramid::build(prev, levels, scale, window)?;
        let b = Pyramid::build(next, levels, scale, window)?;
        let flow = match self {
            Estimator::SingleLevel { level, lk, .. } => level_estimate(&a, &b, *level, lk, region)?,
            Estimator::Serial(p) => serial_flow_pyramids(&a, &b, p, region)?,
            Estimator::Parallel(p) => parallel_flow_pyramids(exec, &a, &b, p, region)?.fused,
            Estimator::GroundTruth => unreachable!(),
        };
        mean_object_speed(&flow, &mask)
    }

    /// Magnitude of [`Estimator::estimate_velocity`].
    pub fn estimate_speed<E: Executor>(&self, spec: &SynthSpec, exec: &E) -> Result<Option<f64>> {
        Ok(self
            .estimate_velocity(spec, exec)?
            .map(|(u, v)| hypot(u, v)))
    }
}
