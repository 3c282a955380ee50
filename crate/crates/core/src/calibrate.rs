//! Empirical per-level confidence and the log-normal model fit.
//!
//! Confidence of one estimate is `1 - |v_r - v_e| / v_r` clamped to
//! `[0, 1]`, where `v_r` is the true speed and `v_e` the magnitude of the
//! mean estimated object velocity. A sample is the mean over noise
//! realizations at one speed.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::exec::Executor;
use crate::lkflow::LkParams;
use crate::math::{abs, derive_seed, exp, ln, sqrt};
use crate::parallel::ConfidenceModel;
use crate::synth::SynthSpec;

/// Mean confidence at one `(level, speed)` point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceSample {
    pub level: usize,
    pub speed: f64,
    pub realizations: usize,
    pub k_mean: f64,
    pub k_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedSweep {
    /// Positive, strictly increasing speeds in px/frame.
    pub speeds: Vec<f64>,
    pub realizations: usize,
    pub noise_sigma: f64,
    /// Unit direction of motion.
    pub direction: (f64, f64),
    /// Template stimulus; velocity, noise and seed are overwritten.
    pub stimulus: SynthSpec,
    pub seed: u64,
}

impl Default for SpeedSweep {
    fn default() -> Self {
        let d = core::f64::consts::FRAC_1_SQRT_2;
        SpeedSweep {
            speeds: log_spaced(0.5, 20.0, 40),
            realizations: 30,
            noise_sigma: 0.02,
            direction: (d, d),
            stimulus: SynthSpec::default(),
            seed: 0,
        }
    }
}

impl SpeedSweep {
    pub fn validate(&self) -> Result<()> {
        if self.speeds.is_empty() {
            return Err(Error::param("speeds", "sweep needs at least one speed"));
        }
        if self.speeds.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::param("speeds", "speeds must be positive"));
        }
        if self.speeds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("speeds", "speeds must be increasing"));
        }
        if self.realizations == 0 {
            return Err(Error::param("realizations", "must be at least 1"));
        }
        let norm = crate::math::hypot(self.direction.0, self.direction.1);
        if abs(norm - 1.0) > 1e-9 {
            return Err(Error::param("direction", "must be a unit vector"));
        }
        let fastest = self.stimulus_at(*self.speeds.last().unwrap(), 0);
        fastest.validate()
    }

    /// Stimulus for `speed` and realization `r`. The noise seed depends on
    /// the realization only.
    pub fn stimulus_at(&self, speed: f64, r: usize) -> SynthSpec {
        SynthSpec {
            velocity: (speed * self.direction.0, speed * self.direction.1),
            noise_sigma: self.noise_sigma,
            seed: derive_seed(self.seed, &[r as u64]),
            ..self.stimulus.clone()
        }
    }
}

/// `n` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![lo];
    }
    let (a, b) = (ln(lo), ln(hi));
    (0..n)
        .map(|i| exp(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Confidence of one estimate; `None` (no estimate) scores 0.
pub fn confidence_value(true_speed: f64, estimated: Option<f64>) -> f64 {
    match estimated {
        Some(ve) => (1.0 - abs((true_speed - ve) / true_speed)).clamp(0.0, 1.0),
        None => 0.0,
    }
}

/// Mean and standard deviation of per-realization confidence at every
/// sweep speed for an arbitrary estimator. Samples are labelled `level`.
pub fn measure_curve<E: Executor>(
    sweep: &SpeedSweep,
    estimator: &Estimator,
    level: usize,
    exec: &E,
) -> Result<Vec<ConfidenceSample>> {
    sweep.validate()?;
    estimator.validate()?;
    let n = sweep.realizations;
    let jobs = sweep.speeds.len() * n;
    let values = exec.map(jobs, |j| {
        let speed = sweep.speeds[j / n];
        let spec = sweep.stimulus_at(speed, j % n);
        estimator
            .estimate_speed(&spec, &crate::Sequential)
            .map(|e| confidence_value(speed, e))
    });
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(sweep
        .speeds
        .iter()
        .zip(values.chunks(n))
        .map(|(&speed, ks)| {
            let mean = ks.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                ks.iter().map(|k| (k - mean) * (k - mean)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            ConfidenceSample {
                level,
                speed,
                realizations: n,
                k_mean: mean,
                k_std: sqrt(var),
            }
        })
        .collect())
}

/// Empirical confidence of LK run at pyramid level `level` alone.
pub fn measure_confidence<E: Executor>(
    sweep: &SpeedSweep,
    level: usize,
    scale: f64,
    lk: &LkParams,
    exec: &E,
) -> Result<Vec<ConfidenceSample>> {
    let est = Estimator::SingleLevel {
        level,
        scale,
        lk: *lk,
    };
    measure_curve(sweep, &est, level, exec)
}

/// Sum of squared residuals of `model` against `samples`.
pub fn fit_objective(model: &ConfidenceModel, samples: &[ConfidenceSample]) -> f64 {
    samples
        .iter()
        .map(|s| {
            let r = model.confidence(s.level, s.speed) - s.k_mean;
            r * r
        })
        .sum()
}

/// RMS residual of `model` against the samples of one level.
pub fn rms_residual(model: &ConfidenceModel, samples: &[ConfidenceSample], level: usize) -> f64 {
    let (mut ss, mut n) = (0.0, 0usize);
    for s in samples.iter().filter(|s| s.level == level) {
        let r = model.confidence(level, s.speed) - s.k_mean;
        ss += r * r;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sqrt(ss / n as f64)
    }
}

const MU_RANGE: (f64, f64) = (-core::f64::consts::LN_10, core::f64::consts::LN_10);
const SIGMA_RANGE: (f64, f64) = (0.05, 3.0);
const GRID: usize = 121;

/// Least-squares fit of `(mu0, sigma0)` over all levels jointly, level
/// means tied by `mu_l = mu0 + l ln c`. Grid search over
/// `mu0 in [ln 0.1, ln 10]`, `sigma0 in [0.05, 3]`, then pattern-search
/// refinement from the best grid point. Deterministic.
pub fn fit_model(
    samples: &[ConfidenceSample],
    scale: f64,
    levels: usize,
) -> Result<ConfidenceModel> {
    let template = ConfidenceModel {
        mu0: 0.0,
        sigma0: 1.0,
        scale,
        levels,
    };
    template.validate()?;
    let mut informative: Vec<f64> = samples
        .iter()
        .filter(|s| s.level == 0 && s.k_mean > 0.05)
        .map(|s| s.speed)
        .collect();
    informative.sort_by(|a, b| a.partial_cmp(b).unwrap());
    informative.dedup();
    if informative.len() < 4 {
        return Err(Error::Fit(format!(
            "need at least 4 level-0 speeds with confidence above 0.05, got {}",
            informative.len()
        )));
    }
    let score = |mu0: f64, sigma0: f64| {
        fit_objective(
            &ConfidenceModel {
                mu0,
                sigma0,
                ..template
            },
            samples,
        )
    };
    let step_mu = (MU_RANGE.1 - MU_RANGE.0) / (GRID - 1) as f64;
    let step_sigma = (SIGMA_RANGE.1 - SIGMA_RANGE.0) / (GRID - 1) as f64;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..GRID {
        let mu0 = MU_RANGE.0 + i as f64 * step_mu;
        for j in 0..GRID {
            let sigma0 = SIGMA_RANGE.0 + j as f64 * step_sigma;
            let f = score(mu0, sigma0);
            if f < best.0 {
                best = (f, mu0, sigma0);
            }
        }
    }
    let (mut f, mut mu0, mut sigma0) = best;
    let (mut hm, mut hs) = (step_mu, step_sigma);
    while hm > 1e-12 || hs > 1e-12 {
        let mut improved = false;
        for (dm, ds) in [(hm, 0.0), (-hm, 0.0), (0.0, hs), (0.0, -hs)] {
            let (m, s) = (mu0 + dm, sigma0 + ds);
            if s <= 1e-6 {
                continue;
            }
            let g = score(m, s);
            if g < f {
                f = g;
                mu0 = m;
                sigma0 = s;
                improved = true;
            }
        }
        if !improved {
            hm *= 0.5;
            hs *= 0.5;
        }
    }
    let model = ConfidenceModel {
        mu0,
        sigma0,
        ..template
    };
    model.validate().map_err(|e| Error::Fit(format!("{e}")))?;
    Ok(model)
}

/// Sweep speed with the highest mean confidence at `level`.
pub fn empirical_peak(samples: &[ConfidenceSample], level: usize) -> Option<f64> {
    samples
        .iter()
        .filter(|s| s.level == level)
        .fold(None, |best: Option<&ConfidenceSample>, s| match best {
            Some(b) if b.k_mean >= s.k_mean => Some(b),
            _ => Some(s),
        })
        .map(|s| s.speed)
}
