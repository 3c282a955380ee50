//! Dense optical flow over Gaussian pyramids.
//!
//! Two multi-scale speed estimators are built on a single-scale
//! Lucas-Kanade solver:
//!
//! * [`serial`]: classical coarse-to-fine projection, each level refining the
//!   doubled estimate of the level above.
//! * [`parallel`]: every level is solved independently and the per-level
//!   vectors are fused with log-normal confidence weights.
//!
//! The [`calibrate`] module measures per-level confidence on synthetic
//! sequences and fits the weight model; [`discrim`] measures the smallest
//! relative speed change an estimator can reliably detect.
//!
//! The crate is `no_std` and only needs `alloc`. Work that can run
//! concurrently (pyramid levels, noise realizations) goes through the
//! [`Executor`] trait so that hosts can supply a thread pool.

#![no_std]

extern crate alloc;

pub mod calibrate;
pub mod discrim;
mod error;
pub mod estimator;
pub mod exec;
pub mod frame;
pub mod lkflow;
mod math;
pub mod parallel;
pub mod pyramid;
pub mod serial;
pub mod synth;

pub use error::{Error, Result};
pub use estimator::Estimator;
pub use exec::{Executor, Sequential};
pub use frame::{Frame, FrameSequence, PixelMask, Region};
pub use lkflow::{FlowField, LkParams};
pub use parallel::{ConfidenceModel, ParallelParams};
pub use pyramid::Pyramid;
pub use serial::SerialParams;
pub use synth::{ObjectKind, SynthSpec};
