//! Wall-clock timing of the parallel estimator, level by level.

use std::fmt;
use std::time::{Duration, Instant};

use msflow_core::parallel::{fuse_fields, level_estimate, ParallelParams};
use msflow_core::serial::serial_flow_pyramids;
use msflow_core::{Executor, FlowField, Frame, Pyramid, Region, Result, SerialParams};

use crate::pool::PoolExecutor;

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeReport {
    pub width: usize,
    pub height: usize,
    pub levels: usize,
    pub jobs: usize,
    /// Both pyramids.
    pub pyramid: Duration,
    /// Each level solved on the calling thread.
    pub per_level: Vec<Duration>,
    /// All levels dispatched to the pool at once.
    pub concurrent: Duration,
    pub merge: Duration,
    /// Coarse-to-fine baseline on the same pyramids.
    pub serial: Duration,
    /// Fused output of the pooled run equals the sequential one bit for bit.
    pub identical: bool,
}

impl RuntimeReport {
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn sequential_levels(&self) -> Duration {
        self.per_level.iter().sum()
    }

    /// Pyramids, levels one after another, and merge.
    pub fn total(&self) -> Duration {
        self.pyramid + self.sequential_levels() + self.merge
    }

    pub fn concurrent_total(&self) -> Duration {
        self.pyramid + self.concurrent + self.merge
    }

    pub fn speedup(&self) -> f64 {
        self.sequential_levels().as_secs_f64() / self.concurrent.as_secs_f64().max(1e-12)
    }
}

impl fmt::Display for RuntimeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        writeln!(
            f,
            "N={} ({}x{}) L={} jobs={}",
            self.pixels(),
            self.width,
            self.height,
            self.levels,
            self.jobs
        )?;
        writeln!(f, "pyramids      {:10.3} ms", ms(self.pyramid))?;
        for (l, d) in self.per_level.iter().enumerate() {
            writeln!(f, "level {l:<7} {:10.3} ms", ms(*d))?;
        }
        writeln!(f, "levels seq    {:10.3} ms", ms(self.sequential_levels()))?;
        writeln!(f, "levels pool   {:10.3} ms", ms(self.concurrent))?;
        writeln!(f, "merge         {:10.3} ms", ms(self.merge))?;
        writeln!(f, "total seq     {:10.3} ms", ms(self.total()))?;
        writeln!(f, "total pool    {:10.3} ms", ms(self.concurrent_total()))?;
        writeln!(f, "serial c2f    {:10.3} ms", ms(self.serial))?;
        writeln!(f, "speedup       {:10.3}", self.speedup())?;
        write!(f, "identical     {}", self.identical)
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

/// Times the parallel estimator on one frame pair, keeping the fastest of
/// `repeats` runs for every component.
pub fn run(
    prev: &Frame,
    next: &Frame,
    params: &ParallelParams,
    jobs: usize,
    repeats: usize,
) -> Result<RuntimeReport> {
    params.validate()?;
    let m = &params.model;
    let pool = PoolExecutor::new(jobs).map_err(|e| msflow_core::Error::Domain(e.to_string()))?;
    let region = Region::full(prev.width(), prev.height());
    let repeats = repeats.max(1);

    let mut best: Option<RuntimeReport> = None;
    for _ in 0..repeats {
        let ((a, b), pyramid) = timed(|| {
            (
                Pyramid::build(prev, m.levels, m.scale, params.lk.window),
                Pyramid::build(next, m.levels, m.scale, params.lk.window),
            )
        });
        let (a, b) = (a?, b?);

        let mut seq_fields = Vec::with_capacity(m.levels);
        let mut per_level = Vec::with_capacity(m.levels);
        for l in 0..m.levels {
            let (f, d) = timed(|| level_estimate(&a, &b, l, &params.lk, region));
            seq_fields.push(f?);
            per_level.push(d);
        }
        let (pooled, concurrent) =
            timed(|| pool.map(m.levels, |l| level_estimate(&a, &b, l, &params.lk, region)));
        let pooled = pooled.into_iter().collect::<Result<Vec<FlowField>>>()?;
        let (fused_seq, merge) = timed(|| fuse_fields(m, &seq_fields, params.weight_floor, region));
        let fused_pool = fuse_fields(m, &pooled, params.weight_floor, region);
        let sp = SerialParams {
            levels: m.levels,
            scale: m.scale,
            lk: params.lk,
        };
        let (s, serial) = timed(|| serial_flow_pyramids(&a, &b, &sp, region));
        s?;

        let run = RuntimeReport {
            width: prev.width(),
            height: prev.height(),
            levels: m.levels,
            jobs: pool.threads(),
            pyramid,
            per_level,
            concurrent,
            merge,
            serial,
            identical: bit_identical(&fused_seq, &fused_pool),
        };
        best = Some(match best {
            None => run,
            Some(b) => RuntimeReport {
                pyramid: b.pyramid.min(run.pyramid),
                per_level: b
                    .per_level
                    .iter()
                    .zip(&run.per_level)
                    .map(|(x, y)| *x.min(y))
                    .collect(),
                concurrent: b.concurrent.min(run.concurrent),
                merge: b.merge.min(run.merge),
                serial: b.serial.min(run.serial),
                identical: b.identical && run.identical,
                ..b
            },
        });
    }
    Ok(best.expect("at least one repeat"))
}

/// Equal dimensions, validity and IEEE bit patterns.
pub fn bit_identical(a: &FlowField, b: &FlowField) -> bool {
    if a.dims() != b.dims() {
        return false;
    }
    (0..a.height()).all(|y| {
        (0..a.width()).all(|x| {
            let (au, av, ak) = a.raw(x, y);
            let (bu, bv, bk) = b.raw(x, y);
            ak == bk && au.to_bits() == bu.to_bits() && av.to_bits() == bv.to_bits()
        })
    })
}
