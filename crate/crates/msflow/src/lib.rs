//! Files, threads and the command line around `msflow-core`.
//!
//! * [`pgm`] and [`seqio`]: binary PGM frames and numbered sequences.
//! * [`flowio`] and [`tables`]: flow fields, calibration samples,
//!   discrimination curves and model files.
//! * [`pool`]: a rayon-backed [`msflow_core::Executor`].
//! * [`bench`]: per-level timing of the parallel estimator.
//! * [`cli`]: the `msflow` binary.

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod flowio;
pub mod pgm;
pub mod pool;
pub mod seqio;
pub mod tables;

pub use error::{AppError, IoError};
pub use pool::PoolExecutor;
