//! Speed discrimination.
//!
//! A change `dv` from reference speed `v` is detected in one realization
//! when both `|s(v) - s(v + dv)| / v > alpha` and `|s(v) - s(v - dv)| / v >
//! alpha`, `s` being the estimated speed. The three stimuli of a realization
//! share one noise seed. The minimal detectable change is the smallest
//! candidate detected in at least `quota` of the realizations.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::exec::Executor;
use crate::math::{abs, derive_seed, sqrt};
use crate::synth::SynthSpec;

/// Relative margin on the threshold so that exact ties (`dv / v == alpha`)
/// are not decided by rounding.
const TIE_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminationParams {
    pub alpha: f64,
    /// Increasing relative changes `dv / v` to try.
    pub deltas: Vec<f64>,
    pub realizations: usize,
    pub quota: f64,
    /// Unit direction of motion.
    pub direction: (f64, f64),
    /// Template stimulus; velocity and seed are overwritten.
    pub stimulus: SynthSpec,
    pub seed: u64,
}

impl Default for DiscriminationParams {
    fn default() -> Self {
        let d = core::f64::consts::FRAC_1_SQRT_2;
        DiscriminationParams {
            alpha: 0.05,
            deltas: default_deltas(),
            realizations: 30,
            quota: 0.9,
            direction: (d, d),
            stimulus: SynthSpec::default(),
            seed: 0,
        }
    }
}

/// 2% to 60% in 1% steps.
pub fn default_deltas() -> Vec<f64> {
    (2..=60).map(|p| p as f64 / 100.0).collect()
}

impl DiscriminationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::param("alpha", "must be positive"));
        }
        if !(self.quota > 0.5 && self.quota <= 1.0) {
            return Err(Error::param("quota", "must lie in (0.5, 1]"));
        }
        if self.realizations == 0 {
            return Err(Error::param("realizations", "must be at least 1"));
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::param("deltas", "need positive candidates"));
        }
        if self.deltas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("deltas", "candidates must be increasing"));
        }
        let norm = crate::math::hypot(self.direction.0, self.direction.1);
        if abs(norm - 1.0) > 1e-9 {
            return Err(Error::param("direction", "must be a unit vector"));
        }
        Ok(())
    }

    fn stimulus_at(&self, speed: f64, realization: usize) -> SynthSpec {
        SynthSpec {
            velocity: (speed * self.direction.0, speed * self.direction.1),
            seed: derive_seed(self.seed, &[realization as u64]),
            ..self.stimulus.clone()
        }
    }

    /// Realizations that must detect a change for it to count.
    pub fn required(&self) -> usize {
        let n = self.realizations;
        (0..=n)
            .find(|&k| k as f64 >= self.quota * n as f64)
            .unwrap_or(n)
    }
}

/// Detection test on the estimates at `v`, `v + dv` and `v - dv`.
pub fn change_detected(
    v_obj: f64,
    alpha: f64,
    base: Option<f64>,
    up: Option<f64>,
    down: Option<f64>,
) -> bool {
    let (Some(b), Some(u), Some(d)) = (base, up, down) else {
        return false;
    };
    let threshold = alpha * v_obj * (1.0 + TIE_MARGIN);
    abs(b - u) > threshold && abs(b - d) > threshold
}

/// Whether a change of `dv` px/frame around `v_obj` is detected in
/// realization `realization`.
pub fn is_detectable<E: Executor>(
    v_obj: f64,
    dv: f64,
    estimator: &Estimator,
    params: &DiscriminationParams,
    realization: usize,
    exec: &E,
) -> Result<bool> {
    check_speeds(v_obj, dv, params)?;
    let est = |s: f64| estimator.estimate_speed(&params.stimulus_at(s, realization), exec);
    let base = est(v_obj)?;
    let up = est(v_obj + dv)?;
    let down = est(v_obj - dv)?;
    Ok(change_detected(v_obj, params.alpha, base, up, down))
}

fn check_speeds(v_obj: f64, dv: f64, params: &DiscriminationParams) -> Result<()> {
    if !(v_obj.is_finite() && v_obj > 0.0) {
        return Err(Error::param("v_obj", "must be positive"));
    }
    if !(dv.is_finite() && dv >= 0.0) {
        return Err(Error::param("dv", "must be non-negative"));
    }
    params.stimulus_at(v_obj + dv, 0).validate()
}

/// Smallest candidate `dv / v` detected in at least `quota` of the
/// realizations, or `None` if no candidate qualifies.
pub fn min_detectable<E: Executor>(
    v_obj: f64,
    estimator: &Estimator,
    params: &DiscriminationParams,
    exec: &E,
) -> Result<Option<f64>> {
    params.validate()?;
    estimator.validate()?;
    let largest = *params.deltas.last().unwrap();
    check_speeds(v_obj, largest * v_obj, params)?;
    let n = params.realizations;
    let need = params.required();
    let seq = crate::Sequential;
    let base = exec
        .map(n, |r| {
            estimator.estimate_speed(&params.stimulus_at(v_obj, r), &seq)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    for &delta in &params.deltas {
        let dv = delta * v_obj;
        let hits = exec.map(n, |r| -> Result<bool> {
            let up = estimator.estimate_speed(&params.stimulus_at(v_obj + dv, r), &seq)?;
            let down = estimator.estimate_speed(&params.stimulus_at(v_obj - dv, r), &seq)?;
            Ok(change_detected(v_obj, params.alpha, base[r], up, down))
        });
        let mut count = 0;
        for h in hits {
            if h? {
                count += 1;
            }
        }
        if count >= need {
            return Ok(Some(delta));
        }
    }
    Ok(None)
}

/// Fraction to percent, rounded to 1e-6 points so that `0.07` prints as
/// `7` rather than `7.000000000000001`.
fn to_percent(f: f64) -> f64 {
    crate::math::round(f * 1e8) / 1e6
}

/// Minimal detectable change per reference speed, in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminationCurve {
    pub method: String,
    pub levels: usize,
    /// `(v_obj, min dv/v in percent)`; `None` where nothing was detectable.
    pub points: Vec<(f64, Option<f64>)>,
}

pub fn discrimination_curve<E: Executor>(
    speeds: &[f64],
    estimator: &Estimator,
    params: &DiscriminationParams,
    exec: &E,
) -> Result<DiscriminationCurve> {
    let mut points = Vec::with_capacity(speeds.len());
    for &v in speeds {
        let d = min_detectable(v, estimator, params, exec)?;
        points.push((v, d.map(to_percent)));
    }
    Ok(DiscriminationCurve {
        method: estimator.name(),
        levels: estimator.levels(),
        points,
    })
}

/// Mean and variance of the present curve values over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSummary {
    pub mean: f64,
    /// Unbiased sample variance (`n - 1` denominator).
    pub variance: f64,
    pub range_lo: f64,
    pub range_hi: f64,
    /// Speeds in range with a detectable change.
    pub count: usize,
    /// Speeds in range with nothing detectable.
    pub missing: usize,
}

impl DiscriminationCurve {
    pub fn summary(&self, lo: f64, hi: f64) -> CurveSummary {
        let in_range = self.points.iter().filter(|(v, _)| *v >= lo && *v <= hi);
        let values: Vec<f64> = in_range.clone().filter_map(|(_, d)| *d).collect();
        let missing = in_range.filter(|(_, d)| d.is_none()).count();
        let n = values.len();
        let mean = if n > 0 {
            values.iter().sum::<f64>() / n as f64
        } else {
            f64::NAN
        };
        let variance = if n > 1 {
            values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            f64::NAN
        };
        CurveSummary {
            mean,
            variance,
            range_lo: lo,
            range_hi: hi,
            count: n,
            missing,
        }
    }

    /// Largest reference speed whose minimal detectable change is below
    /// `threshold_pct`.
    pub fn max_discriminated_speed(&self, threshold_pct: f64) -> Option<f64> {
        self.points
            .iter()
            .filter(|(_, d)| d.is_some_and(|d| d < threshold_pct))
            .map(|(v, _)| *v)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
    }

    pub fn std_dev(&self, lo: f64, hi: f64) -> f64 {
        sqrt(self.summary(lo, hi).variance)
    }
}

/// Curves for several estimators with one parameter set and seed.
pub fn compare<E: Executor>(
    estimators: &[Estimator],
    speeds: &[f64],
    params: &DiscriminationParams,
    exec: &E,
) -> Result<Vec<DiscriminationCurve>> {
    estimators
        .iter()
        .map(|e| discrimination_curve(speeds, e, params, exec))
        .collect()
}
