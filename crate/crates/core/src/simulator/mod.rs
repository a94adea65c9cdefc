//! Discrete-event simulation of collective and individual I/O, and an LRU
//! page-cache simulator.
//!
//! The collective simulator is an independent route to the analytic model in
//! [`crate::costmodel`]: for homogeneous inputs its makespan matches
//! `collective_time(..).total`, and it also accepts per-link and
//! per-iteration overrides that the closed form cannot express.

mod collective;
mod engine;
mod pagecache;

pub use collective::{
    simulate_collective, simulate_individual, ActorTimeline, IterationRecord, ProcessLayout,
    SimConfig, SimReport,
};
pub use pagecache::{simulate_page_cache, PageCacheConfig, PageCacheReport};
