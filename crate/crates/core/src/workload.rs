//! IOR-style workloads, the collective transfer schedule derived from them,
//! and synthetic page-level traces for the page-cache simulator.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_fraction, ensure_non_negative, ensure_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Read,
    Write,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "read" => Ok(Direction::Read),
            "write" => Ok(Direction::Write),
            other => Err(Error::invalid(
                "direction",
                format!("expected read or write, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub nodes: u32,
    pub procs_per_node: u32,
    pub aggregators_per_node: u32,
    pub segment_count: u32,
    /// MB written by one process per segment.
    pub block_size: f64,
    /// Collective buffer size, MB.
    pub transfer_size: f64,
    pub reorder_random: bool,
    pub direction: Direction,
}

impl WorkloadSpec {
    /// 4 nodes x 4 processes, one aggregator per node, 2 segments of 512 MB,
    /// 16 MB collective buffer, random task reordering: 16 GB in total.
    pub fn four_node_ior() -> Self {
        Self {
            nodes: 4,
            procs_per_node: 4,
            aggregators_per_node: 1,
            segment_count: 2,
            block_size: 512.0,
            transfer_size: 16.0,
            reorder_random: true,
            direction: Direction::Write,
        }
    }

    /// 2 nodes x 8 processes with the same per-process volume as
    /// [`WorkloadSpec::four_node_ior`].
    pub fn two_node_ior() -> Self {
        Self {
            nodes: 2,
            procs_per_node: 8,
            ..Self::four_node_ior()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("nodes", self.nodes),
            ("procs_per_node", self.procs_per_node),
            ("aggregators_per_node", self.aggregators_per_node),
            ("segment_count", self.segment_count),
        ] {
            if v == 0 {
                return Err(Error::invalid(name, "must be at least 1"));
            }
        }
        ensure_positive("block_size", self.block_size)?;
        ensure_positive("transfer_size", self.transfer_size)?;
        if self.aggregators_per_node > self.procs_per_node {
            return Err(Error::invalid(
                "aggregators_per_node",
                format!(
                    "{} aggregators per node exceed {} processes per node",
                    self.aggregators_per_node, self.procs_per_node
                ),
            ));
        }
        Ok(())
    }

    pub fn processes(&self) -> u64 {
        u64::from(self.nodes) * u64::from(self.procs_per_node)
    }

    pub fn aggregators(&self) -> u64 {
        u64::from(self.nodes) * u64::from(self.aggregators_per_node)
    }
}

/// Total MB moved by all processes.
pub fn total_data(spec: &WorkloadSpec) -> Result<f64> {
    spec.validate()?;
    let count = spec.processes() * u64::from(spec.segment_count);
    Ok(count as f64 * spec.block_size)
}

/// Fraction of data that must cross the network during shuffling, estimated
/// as non-aggregator processes over all processes.
pub fn estimate_tau(spec: &WorkloadSpec) -> Result<f64> {
    spec.validate()?;
    let p = spec.processes();
    let a = spec.aggregators();
    Ok((p - a) as f64 / p as f64)
}

/// Iteration plan for one aggregator. All aggregators run the same plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSchedule {
    pub iter: u64,
    /// Collective buffer size; every iteration but a ragged last one moves this much.
    pub msg_size: f64,
    pub tau: f64,
    pub total_data: f64,
    pub per_aggregator_data: f64,
    pub aggregators: u64,
}

impl TransferSchedule {
    /// Schedule for `aggregators` aggregators each moving `per_aggregator_data` MB
    /// in chunks of `msg_size`. The final chunk carries any remainder.
    pub fn new(
        per_aggregator_data: f64,
        msg_size: f64,
        tau: f64,
        aggregators: u64,
    ) -> Result<Self> {
        ensure_non_negative("per_aggregator_data", per_aggregator_data)?;
        ensure_positive("msg_size", msg_size)?;
        ensure_fraction("tau", tau)?;
        if aggregators == 0 {
            return Err(Error::invalid("aggregators", "must be at least 1"));
        }
        Ok(Self {
            iter: iteration_count(per_aggregator_data, msg_size),
            msg_size,
            tau,
            total_data: per_aggregator_data * aggregators as f64,
            per_aggregator_data,
            aggregators,
        })
    }

    /// `iter` full iterations of `msg_size` each.
    pub fn uniform(iter: u64, msg_size: f64, tau: f64, aggregators: u64) -> Result<Self> {
        let mut s = Self::new(iter as f64 * msg_size, msg_size, tau, aggregators)?;
        // Guards against ceil() drift on the product.
        s.iter = iter;
        Ok(s)
    }

    /// Per-iteration message sizes, MB.
    pub fn msg_sizes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.iter).map(move |i| self.msg_size_at(i))
    }

    pub fn msg_size_at(&self, i: u64) -> f64 {
        if i + 1 < self.iter {
            self.msg_size
        } else {
            let tail =
                self.per_aggregator_data - (self.iter.saturating_sub(1)) as f64 * self.msg_size;
            tail.clamp(0.0, self.msg_size)
        }
    }
}

/// ceil(volume / chunk), treating quotients within 1e-9 of an integer as exact.
fn iteration_count(volume: f64, chunk: f64) -> u64 {
    let q = volume / chunk;
    let nearest = q.round();
    if (q - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as u64
    } else {
        q.ceil() as u64
    }
}

pub fn derive_schedule(spec: &WorkloadSpec, tau_override: Option<f64>) -> Result<TransferSchedule> {
    let total = total_data(spec)?;
    let tau = match tau_override {
        Some(t) => {
            ensure_fraction("tau", t)?;
            t
        }
        None => estimate_tau(spec)?,
    };
    let aggregators = spec.aggregators();
    let mut schedule = TransferSchedule::new(
        total / aggregators as f64,
        spec.transfer_size,
        tau,
        aggregators,
    )?;
    schedule.total_data = total;
    Ok(schedule)
}

// ---------------------------------------------------------------------------
// Synthetic traces

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TracePattern {
    /// Every page written once per pass, in order.
    SequentialWrite,
    /// A write pass followed by a read pass over the same pages, per pass.
    ReadWriteMix,
    /// Every page read exactly once, in order; `passes` is ignored.
    StreamingRead,
    /// Every page written once per pass, in a seeded random order.
    RandomWrite,
}

impl FromStr for TracePattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "sequentialwrite" => Ok(TracePattern::SequentialWrite),
            "readwritemix" => Ok(TracePattern::ReadWriteMix),
            "streamingread" => Ok(TracePattern::StreamingRead),
            "randomwrite" => Ok(TracePattern::RandomWrite),
            _ => Err(Error::invalid(
                "pattern",
                format!("unknown trace pattern `{s}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PageOp {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub page: u64,
    pub op: PageOp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoTrace {
    pub records: Vec<TraceRecord>,
    pub page_size_kb: f64,
    pub working_set_mb: f64,
}

impl IoTrace {
    pub fn pages(&self) -> u64 {
        pages_in(self.working_set_mb, self.page_size_kb)
    }

    pub fn page_size_mb(&self) -> f64 {
        self.page_size_kb / 1024.0
    }

    /// Writes one `page_index,op` line per record, with op `R` or `W`.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            let op = match r.op {
                PageOp::Read => 'R',
                PageOp::Write => 'W',
            };
            writeln!(out, "{},{}", r.page, op)?;
        }
        Ok(())
    }

    /// Parses the text format. The working set is the smallest one that
    /// covers the highest page index seen.
    pub fn read_text<R: BufRead>(input: R, page_size_kb: f64) -> Result<Self> {
        ensure_positive("page_size", page_size_kb)?;
        let mut records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| Error::Trace {
                line: i + 1,
                message,
            };
            let (page, op) = line
                .split_once(',')
                .ok_or_else(|| bad(format!("expected `page_index,op`, got `{line}`")))?;
            let page: u64 = page
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad page index `{}`", page.trim())))?;
            let op = match op.trim() {
                "R" | "r" => PageOp::Read,
                "W" | "w" => PageOp::Write,
                other => return Err(bad(format!("bad op `{other}`, expected R or W"))),
            };
            records.push(TraceRecord { page, op });
        }
        let max_page = records.iter().map(|r| r.page).max().map_or(0, |p| p + 1);
        Ok(Self {
            records,
            page_size_kb,
            working_set_mb: max_page.max(1) as f64 * page_size_kb / 1024.0,
        })
    }
}

fn pages_in(working_set_mb: f64, page_size_kb: f64) -> u64 {
    (working_set_mb * 1024.0 / page_size_kb).floor() as u64
}

pub fn generate_trace(
    pattern: TracePattern,
    working_set_mb: f64,
    page_size_kb: f64,
    passes: u32,
    seed: u64,
) -> Result<IoTrace> {
    ensure_positive("page_size", page_size_kb)?;
    ensure_positive("working_set", working_set_mb)?;
    if working_set_mb * 1024.0 < page_size_kb {
        return Err(Error::invalid(
            "working_set",
            format!("{working_set_mb} MB holds no whole {page_size_kb} KB page"),
        ));
    }
    if passes == 0 {
        return Err(Error::invalid("passes", "must be at least 1"));
    }
    let pages = pages_in(working_set_mb, page_size_kb);
    let sweep = |op: PageOp| (0..pages).map(move |page| TraceRecord { page, op });

    let records: Vec<TraceRecord> = match pattern {
        TracePattern::SequentialWrite => (0..passes).flat_map(|_| sweep(PageOp::Write)).collect(),
        TracePattern::ReadWriteMix => (0..passes)
            .flat_map(|_| sweep(PageOp::Write).chain(sweep(PageOp::Read)))
            .collect(),
        TracePattern::StreamingRead => sweep(PageOp::Read).collect(),
        TracePattern::RandomWrite => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut order: Vec<u64> = (0..pages).collect();
            let mut out = Vec::with_capacity((pages * u64::from(passes)) as usize);
            for _ in 0..passes {
                order.shuffle(&mut rng);
                out.extend(order.iter().map(|&page| TraceRecord {
                    page,
                    op: PageOp::Write,
                }));
            }
            out
        }
    };
    Ok(IoTrace {
        records,
        page_size_kb,
        working_set_mb,
    })
}

impl fmt::Display for TracePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TracePattern::SequentialWrite => "sequential-write",
            TracePattern::ReadWriteMix => "read-write-mix",
            TracePattern::StreamingRead => "streaming-read",
            TracePattern::RandomWrite => "random-write",
        };
        f.write_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(nodes: u32, ppn: u32, agg: u32, seg: u32, block: f64, transfer: f64) -> WorkloadSpec {
        WorkloadSpec {
            nodes,
            procs_per_node: ppn,
            aggregators_per_node: agg,
            segment_count: seg,
            block_size: block,
            transfer_size: transfer,
            reorder_random: false,
            direction: Direction::Write,
        }
    }

    #[test]
    fn total_data_examples() {
        assert_eq!(total_data(&spec(4, 4, 1, 2, 512.0, 16.0)).unwrap(), 16384.0);
        assert_eq!(total_data(&spec(1, 1, 1, 1, 1.0, 1.0)).unwrap(), 1.0);
        assert_eq!(total_data(&spec(2, 8, 1, 2, 64.0, 16.0)).unwrap(), 2048.0);
    }

    #[test]
    fn tau_examples() {
        // 8 processes, 2 aggregators.
        assert_eq!(estimate_tau(&spec(2, 4, 1, 1, 1.0, 1.0)).unwrap(), 0.75);
        assert_eq!(estimate_tau(&spec(2, 4, 4, 1, 1.0, 1.0)).unwrap(), 0.0);
        assert_eq!(estimate_tau(&spec(4, 4, 1, 1, 1.0, 1.0)).unwrap(), 0.75);
    }

    #[test]
    fn schedule_examples() {
        let s = derive_schedule(&WorkloadSpec::four_node_ior(), Some(1.0)).unwrap();
        assert_eq!((s.iter, s.msg_size, s.tau), (256, 16.0, 1.0));
        assert_eq!(s.per_aggregator_data, 4096.0);
        assert_eq!(s.total_data, 16384.0);

        let single = derive_schedule(&spec(1, 1, 1, 1, 16.0, 16.0), None).unwrap();
        assert_eq!(single.iter, 1);

        let s = derive_schedule(&spec(2, 8, 1, 2, 64.0, 16.0), None).unwrap();
        assert_eq!((s.iter, s.msg_size, s.tau), (64, 16.0, 0.875));
    }

    #[test]
    fn ragged_tail() {
        let s = derive_schedule(&spec(1, 2, 1, 1, 10.0, 8.0), Some(0.5)).unwrap();
        assert_eq!(s.per_aggregator_data, 20.0);
        assert_eq!(s.iter, 3);
        let sizes: Vec<f64> = s.msg_sizes().collect();
        assert_eq!(sizes, vec![8.0, 8.0, 4.0]);
    }

    #[test]
    fn invalid_specs() {
        assert!(spec(0, 1, 1, 1, 1.0, 1.0).validate().is_err());
        assert!(spec(1, 2, 3, 1, 1.0, 1.0).validate().is_err());
        assert!(spec(1, 1, 1, 1, 0.0, 1.0).validate().is_err());
        assert!(derive_schedule(&spec(1, 1, 1, 1, 1.0, 1.0), Some(1.2)).is_err());
    }

    #[test]
    fn empty_schedule() {
        let s = TransferSchedule::new(0.0, 16.0, 1.0, 4).unwrap();
        assert_eq!(s.iter, 0);
        assert_eq!(s.msg_sizes().count(), 0);
    }

    #[test]
    fn trace_examples() {
        let t = generate_trace(TracePattern::StreamingRead, 1.0, 4.0, 1, 0).unwrap();
        assert_eq!(t.records.len(), 256);
        assert!(t
            .records
            .iter()
            .enumerate()
            .all(|(i, r)| r.page == i as u64 && r.op == PageOp::Read));

        let t = generate_trace(TracePattern::SequentialWrite, 1.0, 4.0, 2, 0).unwrap();
        assert_eq!(t.records.len(), 512);
        assert!(t.records.iter().all(|r| r.op == PageOp::Write));
        assert_eq!(t.records[256].page, 0);
        assert_eq!(t.records[511].page, 255);

        let t = generate_trace(TracePattern::ReadWriteMix, 1.0, 4.0, 2, 0).unwrap();
        assert_eq!(t.records.len(), 1024);
        assert_eq!(t.records[255].op, PageOp::Write);
        assert_eq!(t.records[256].op, PageOp::Read);
        assert_eq!(t.records[512].op, PageOp::Write);
    }

    #[test]
    fn trace_determinism_and_errors() {
        let a = generate_trace(TracePattern::RandomWrite, 2.0, 4.0, 3, 42).unwrap();
        let b = generate_trace(TracePattern::RandomWrite, 2.0, 4.0, 3, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_trace(TracePattern::RandomWrite, 2.0, 4.0, 3, 43).unwrap();
        assert_ne!(a, c);

        assert!(generate_trace(TracePattern::StreamingRead, 0.001, 4.0, 1, 0).is_err());
        assert!(generate_trace(TracePattern::StreamingRead, 1.0, 4.0, 0, 0).is_err());
    }

    #[test]
    fn trace_text_format() {
        let t = generate_trace(TracePattern::ReadWriteMix, 0.0625, 4.0, 1, 0).unwrap();
        let mut buf = Vec::new();
        t.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("0,W\n1,W\n"));
        let back = IoTrace::read_text(&buf[..], 4.0).unwrap();
        assert_eq!(back, t);

        let err = IoTrace::read_text("0,W\n1,X\n".as_bytes(), 4.0).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
