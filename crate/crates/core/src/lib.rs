//! Performance laboratory for parallel I/O on block storage.
//!
//! * [`devices`]: sequential/random end-to-end bandwidth profiles.
//! * [`commnet`]: affine shuffle cost `t_s + t_w * m * tau` and its calibration.
//! * [`workload`]: IOR-style workloads, transfer schedules, synthetic traces.
//! * [`costmodel`]: closed-form collective and individual I/O time.
//! * [`simulator`]: discrete-event two-phase I/O and an LRU page cache.
//! * [`fixtures`]: published tables and the validation pass over them.

pub mod commnet;
pub mod config;
pub mod costmodel;
pub mod devices;
mod error;
pub mod fixtures;
pub mod simulator;
pub mod workload;

pub use error::{Error, Result};
