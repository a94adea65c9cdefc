use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::engine::{self, Phase};
use crate::commnet::{transfer_time_unchecked, CommParams};
use crate::costmodel::Strategy;
use crate::devices::{AccessPattern, DeviceProfile};
use crate::error::{ensure_non_negative, Error, Result};
use crate::workload::{Direction, TransferSchedule, WorkloadSpec};

/// Placement of processes and aggregators. Aggregators are the first
/// `aggregators_per_node` ranks on each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessLayout {
    pub nodes: u32,
    pub procs_per_node: u32,
    pub aggregators_per_node: u32,
}

impl ProcessLayout {
    pub fn processes(&self) -> u64 {
        u64::from(self.nodes) * u64::from(self.procs_per_node)
    }

    pub fn aggregators(&self) -> u64 {
        u64::from(self.nodes) * u64::from(self.aggregators_per_node)
    }

    /// Global rank of the `index`-th aggregator.
    pub fn aggregator_rank(&self, index: u64) -> u64 {
        let per_node = u64::from(self.aggregators_per_node);
        (index / per_node) * u64::from(self.procs_per_node) + index % per_node
    }

    fn validate(&self) -> Result<()> {
        if self.nodes == 0 || self.procs_per_node == 0 || self.aggregators_per_node == 0 {
            return Err(Error::invalid("layout", "all counts must be at least 1"));
        }
        if self.aggregators_per_node > self.procs_per_node {
            return Err(Error::invalid(
                "layout",
                "more aggregators than processes per node",
            ));
        }
        Ok(())
    }
}

impl From<&WorkloadSpec> for ProcessLayout {
    fn from(spec: &WorkloadSpec) -> Self {
        Self {
            nodes: spec.nodes,
            procs_per_node: spec.procs_per_node,
            aggregators_per_node: spec.aggregators_per_node,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub schedule: TransferSchedule,
    pub comm: CommParams,
    /// Link parameters keyed by (sender rank, aggregator rank).
    pub link_overrides: BTreeMap<(u64, u64), CommParams>,
    /// Message size, MB, for specific iterations of every aggregator.
    pub msg_size_overrides: BTreeMap<u64, f64>,
    pub device: DeviceProfile,
    pub layout: ProcessLayout,
    pub direction: Direction,
    /// Carried into the report. The protocol model itself draws no randomness.
    pub seed: u64,
}

impl SimConfig {
    /// Homogeneous configuration: no overrides, write direction, seed 0.
    pub fn homogeneous(
        schedule: TransferSchedule,
        comm: CommParams,
        device: DeviceProfile,
        layout: ProcessLayout,
    ) -> Self {
        Self {
            schedule,
            comm,
            link_overrides: BTreeMap::new(),
            msg_size_overrides: BTreeMap::new(),
            device,
            layout,
            direction: Direction::Write,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        if self.layout.aggregators() != self.schedule.aggregators {
            return Err(Error::invalid(
                "schedule",
                format!(
                    "schedule has {} aggregators but the layout places {}",
                    self.schedule.aggregators,
                    self.layout.aggregators()
                ),
            ));
        }
        let procs = self.layout.processes();
        for &(sender, aggregator) in self.link_overrides.keys() {
            if sender >= procs {
                return Err(Error::invalid(
                    "link_overrides",
                    format!("sender rank {sender} >= {procs}"),
                ));
            }
            if !(0..self.layout.aggregators()).any(|a| self.layout.aggregator_rank(a) == aggregator)
            {
                return Err(Error::invalid(
                    "link_overrides",
                    format!("rank {aggregator} is not an aggregator"),
                ));
            }
        }
        for (&iteration, &size) in &self.msg_size_overrides {
            if iteration >= self.schedule.iter {
                return Err(Error::invalid(
                    "msg_size_overrides",
                    format!("iteration {iteration} >= {}", self.schedule.iter),
                ));
            }
            ensure_non_negative("msg_size_overrides", size)?;
        }
        Ok(())
    }

    fn msg_size_at(&self, iteration: u64) -> f64 {
        self.msg_size_overrides
            .get(&iteration)
            .copied()
            .unwrap_or_else(|| self.schedule.msg_size_at(iteration))
    }

    /// Concurrent sends to an aggregator overlap, so the slowest link sets
    /// the iteration's shuffle time.
    fn shuffle_time(&self, aggregator: u64, msg_size: f64) -> f64 {
        let tau = self.schedule.tau;
        let base = transfer_time_unchecked(&self.comm, msg_size, tau);
        self.link_overrides
            .iter()
            .filter(|((_, agg), _)| *agg == aggregator)
            .map(|(_, p)| transfer_time_unchecked(p, msg_size, tau))
            .fold(base, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub shuffle_time: f64,
    pub io_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorTimeline {
    pub rank: u64,
    pub iterations: Vec<IterationRecord>,
    /// Sum of shuffle and I/O time over all iterations.
    pub total: f64,
    /// Simulation clock when the actor finished.
    pub finished_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub strategy: Strategy,
    pub device: String,
    pub seed: u64,
    pub timelines: Vec<ActorTimeline>,
    pub makespan: f64,
    pub total_shuffle: f64,
    pub total_io: f64,
    /// Shuffle time over shuffle plus I/O time, summed over all actors.
    pub shuffle_ratio: f64,
}

impl SimReport {
    fn assemble(
        strategy: Strategy,
        device: &str,
        seed: u64,
        timelines: Vec<ActorTimeline>,
    ) -> Self {
        let makespan = timelines.iter().map(|t| t.total).fold(0.0, f64::max);
        let mut total_shuffle = 0.0;
        let mut total_io = 0.0;
        for rec in timelines.iter().flat_map(|t| &t.iterations) {
            total_shuffle += rec.shuffle_time;
            total_io += rec.io_time;
        }
        let busy = total_shuffle + total_io;
        Self {
            strategy,
            device: device.to_string(),
            seed,
            timelines,
            makespan,
            total_shuffle,
            total_io,
            shuffle_ratio: if busy > 0.0 {
                total_shuffle / busy
            } else {
                0.0
            },
        }
    }
}

fn timeline(rank: u64, iterations: Vec<IterationRecord>, finished_at: f64) -> ActorTimeline {
    let total = iterations.iter().map(|r| r.shuffle_time + r.io_time).sum();
    ActorTimeline {
        rank,
        iterations,
        total,
        finished_at,
    }
}

/// Two-phase collective I/O. Every aggregator loops over its iterations,
/// shuffling then writing (reading then shuffling for reads), with no
/// synchronization between aggregators. Their I/O phases contend for the
/// storage node's sequential bandwidth.
pub fn simulate_collective(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let aggregators = config.layout.aggregators();
    let iters = config.schedule.iter;

    let mut shuffles: Vec<Vec<f64>> = Vec::with_capacity(aggregators as usize);
    let mut plans: Vec<Vec<Phase>> = Vec::with_capacity(aggregators as usize);
    for a in 0..aggregators {
        let rank = config.layout.aggregator_rank(a);
        let mut shuffle = Vec::with_capacity(iters as usize);
        let mut plan = Vec::with_capacity(2 * iters as usize);
        for i in 0..iters {
            let m = config.msg_size_at(i);
            let s = config.shuffle_time(rank, m);
            shuffle.push(s);
            match config.direction {
                Direction::Write => plan.extend([Phase::Delay(s), Phase::Transfer(m)]),
                Direction::Read => plan.extend([Phase::Transfer(m), Phase::Delay(s)]),
            }
        }
        shuffles.push(shuffle);
        plans.push(plan);
    }

    let outcome = engine::run(&plans, config.device.bdw_seq());
    let io_index = match config.direction {
        Direction::Write => 1,
        Direction::Read => 0,
    };
    let timelines = (0..aggregators)
        .map(|a| {
            let durations = &outcome.durations[a as usize];
            let records = shuffles[a as usize]
                .iter()
                .enumerate()
                .map(|(i, &shuffle_time)| IterationRecord {
                    shuffle_time,
                    io_time: durations[2 * i + io_index],
                })
                .collect();
            timeline(
                config.layout.aggregator_rank(a),
                records,
                outcome.finish[a as usize],
            )
        })
        .collect();
    Ok(SimReport::assemble(
        Strategy::Collective,
        config.device.name(),
        config.seed,
        timelines,
    ))
}

/// Individual I/O: each process moves an equal share of `total_data`
/// independently, all sharing the device's end-to-end bandwidth for `pattern`.
pub fn simulate_individual(
    total_data: f64,
    processes: u64,
    device: &DeviceProfile,
    pattern: AccessPattern,
) -> Result<SimReport> {
    ensure_non_negative("total_data", total_data)?;
    if processes == 0 {
        return Err(Error::invalid("processes", "must be at least 1"));
    }
    let share = total_data / processes as f64;
    let plans = vec![vec![Phase::Transfer(share)]; processes as usize];
    let outcome = engine::run(&plans, device.bandwidth(pattern));
    let timelines = outcome
        .durations
        .iter()
        .enumerate()
        .map(|(rank, d)| {
            timeline(
                rank as u64,
                vec![IterationRecord {
                    shuffle_time: 0.0,
                    io_time: d[0],
                }],
                outcome.finish[rank],
            )
        })
        .collect();
    Ok(SimReport::assemble(
        Strategy::Individual,
        device.name(),
        0,
        timelines,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmodel::{collective_time, individual_time};
    use crate::workload::derive_schedule;

    fn preset_config(device: DeviceProfile) -> SimConfig {
        let spec = WorkloadSpec::four_node_ior();
        let schedule = derive_schedule(&spec, Some(1.0)).unwrap();
        SimConfig::homogeneous(
            schedule,
            CommParams::reference_platform(),
            device,
            (&spec).into(),
        )
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn preset_matches_analytic_total() {
        for device in [
            DeviceProfile::hdd(),
            DeviceProfile::ssd(),
            DeviceProfile::nvm(),
        ] {
            let cfg = preset_config(device.clone());
            let report = simulate_collective(&cfg).unwrap();
            let analytic = collective_time(&cfg.schedule, &cfg.comm, &device, 0.0).unwrap();
            assert!(
                rel(report.makespan, analytic.total) < 1e-9,
                "{} vs {}",
                report.makespan,
                analytic.total
            );
            assert_eq!(report.timelines.len(), 4);
            assert_eq!(report.timelines[0].iterations.len(), 256);
        }
    }

    #[test]
    fn single_iteration_without_shuffle_volume() {
        let comm = CommParams::reference_platform();
        let alone = ProcessLayout {
            nodes: 1,
            procs_per_node: 4,
            aggregators_per_node: 1,
        };
        let schedule = TransferSchedule::uniform(1, 8.0, 0.0, 1).unwrap();
        let dev = DeviceProfile::hdd();
        let report =
            simulate_collective(&SimConfig::homogeneous(schedule, comm, dev.clone(), alone))
                .unwrap();
        assert!(rel(report.makespan, comm.t_s() + 8.0 / dev.bdw_seq()) < 1e-12);

        let layout = ProcessLayout {
            nodes: 2,
            procs_per_node: 2,
            aggregators_per_node: 1,
        };
        let schedule = TransferSchedule::uniform(1, 8.0, 0.0, 2).unwrap();
        let comm = CommParams::reference_platform();
        let dev = DeviceProfile::ssd();
        let report =
            simulate_collective(&SimConfig::homogeneous(schedule, comm, dev.clone(), layout))
                .unwrap();
        // Two aggregators share the storage node during the I/O phase.
        let expected = comm.t_s() + 2.0 * 8.0 / dev.bdw_seq();
        assert!(rel(report.makespan, expected) < 1e-12);
        for t in &report.timelines {
            assert_eq!(t.iterations[0].shuffle_time, comm.t_s());
        }
    }

    #[test]
    fn slow_link_increases_makespan() {
        let base = preset_config(DeviceProfile::nvm());
        let homogeneous = simulate_collective(&base).unwrap().makespan;
        let mut slowed = base.clone();
        let agg = slowed.layout.aggregator_rank(2);
        slowed
            .link_overrides
            .insert((agg + 1, agg), base.comm.with_scaled_t_w(2.0).unwrap());
        let report = simulate_collective(&slowed).unwrap();
        assert!(report.makespan > homogeneous);
        // Only the slowed aggregator's shuffles change.
        assert!(
            report.timelines[2].iterations[0].shuffle_time
                > report.timelines[0].iterations[0].shuffle_time
        );
    }

    #[test]
    fn read_direction_has_same_homogeneous_makespan() {
        let mut cfg = preset_config(DeviceProfile::hdd());
        let write = simulate_collective(&cfg).unwrap();
        cfg.direction = Direction::Read;
        let read = simulate_collective(&cfg).unwrap();
        assert!(rel(read.makespan, write.makespan) < 1e-12);
    }

    #[test]
    fn msg_size_override_applies() {
        let mut cfg = preset_config(DeviceProfile::ssd());
        cfg.msg_size_overrides.insert(3, 4.0);
        let report = simulate_collective(&cfg).unwrap();
        let rec = report.timelines[0].iterations[3];
        assert_eq!(
            rec.shuffle_time,
            transfer_time_unchecked(&cfg.comm, 4.0, 1.0)
        );
        assert!(
            report.makespan
                < simulate_collective(&preset_config(DeviceProfile::ssd()))
                    .unwrap()
                    .makespan
        );
    }

    #[test]
    fn invalid_overrides_rejected() {
        let mut cfg = preset_config(DeviceProfile::ssd());
        cfg.msg_size_overrides.insert(256, 4.0);
        assert!(simulate_collective(&cfg).is_err());

        let mut cfg = preset_config(DeviceProfile::ssd());
        // Rank 1 is not an aggregator with one aggregator per 4-rank node.
        cfg.link_overrides.insert((0, 1), cfg.comm);
        assert!(simulate_collective(&cfg).is_err());

        let mut cfg = preset_config(DeviceProfile::ssd());
        cfg.layout.aggregators_per_node = 2;
        assert!(simulate_collective(&cfg).is_err());
    }

    #[test]
    fn individual_examples() {
        let r =
            simulate_individual(16384.0, 16, &DeviceProfile::hdd(), AccessPattern::Random).unwrap();
        assert!((r.makespan - 613.17).abs() < 0.005);
        assert_eq!(r.total_shuffle, 0.0);
        let r = simulate_individual(0.0, 16, &DeviceProfile::hdd(), AccessPattern::Random).unwrap();
        assert_eq!(r.makespan, 0.0);
        let r =
            simulate_individual(2048.0, 16, &DeviceProfile::nvm(), AccessPattern::Random).unwrap();
        assert!((r.makespan - 18.53).abs() < 0.005);
        let analytic =
            individual_time(2048.0, &DeviceProfile::nvm(), AccessPattern::Random, 0.0).unwrap();
        assert!(rel(r.makespan, analytic.total) < 1e-9);
    }

    #[test]
    fn report_invariants() {
        let r = simulate_collective(&preset_config(DeviceProfile::hdd())).unwrap();
        let max = r.timelines.iter().map(|t| t.total).fold(0.0, f64::max);
        assert_eq!(r.makespan, max);
        assert!((r.shuffle_ratio - r.total_shuffle / (r.total_shuffle + r.total_io)).abs() < 1e-15);
        // No idle gaps: the clock agrees with the summed phase durations.
        for t in &r.timelines {
            assert!((t.finished_at - t.total).abs() <= 1e-9 * t.total);
        }
    }
}
