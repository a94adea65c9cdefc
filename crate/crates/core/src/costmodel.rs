//! Analytic cost of collective and individual I/O.
//!
//! Collective I/O alternates a shuffle phase and a contiguous I/O phase per
//! iteration; the two never overlap. The shuffle term follows the slowest
//! aggregator, whose peers' transfers overlap with each other, so each
//! iteration contributes one `t_s + t_w * msg_size_i * tau`. The I/O term
//! divides the volume written by all aggregators by the sequential
//! end-to-end bandwidth, which the aggregators share. Individual I/O has no
//! shuffle and sees the random bandwidth.

use serde::{Deserialize, Serialize};

use crate::commnet::{transfer_time_unchecked, CommParams};
use crate::devices::{AccessPattern, DeviceProfile};
use crate::error::{ensure_fraction, ensure_non_negative, ensure_positive, Error, Result};
use crate::workload::TransferSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    Collective,
    Individual,
}

/// Seconds spent per cost component. `total` is always the plain sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub t_comm: f64,
    pub t_io: f64,
    pub t_other: f64,
    pub total: f64,
}

impl CostBreakdown {
    fn new(t_comm: f64, t_io: f64, t_other: f64) -> Self {
        Self {
            t_comm,
            t_io,
            t_other,
            total: t_comm + t_io + t_other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub strategy: Strategy,
    pub t_collective: f64,
    pub t_individual: f64,
    /// `t_individual - t_collective`; positive means collective is faster.
    pub benefit: f64,
}

impl Decision {
    /// Picks collective only when it is strictly faster.
    pub fn from_totals(t_collective: f64, t_individual: f64) -> Self {
        let benefit = t_individual - t_collective;
        let strategy = if benefit > 0.0 {
            Strategy::Collective
        } else {
            Strategy::Individual
        };
        Self {
            strategy,
            t_collective,
            t_individual,
            benefit,
        }
    }
}

fn check_schedule(schedule: &TransferSchedule) -> Result<()> {
    ensure_fraction("tau", schedule.tau)?;
    ensure_positive("msg_size", schedule.msg_size)?;
    ensure_non_negative("total_data", schedule.total_data)?;
    ensure_non_negative("per_aggregator_data", schedule.per_aggregator_data)?;
    if schedule.aggregators == 0 {
        return Err(Error::invalid("aggregators", "must be at least 1"));
    }
    Ok(())
}

/// Shuffle time of the slowest aggregator over the whole schedule.
pub fn shuffle_time(schedule: &TransferSchedule, comm: &CommParams) -> f64 {
    schedule
        .msg_sizes()
        .map(|m| transfer_time_unchecked(comm, m, schedule.tau))
        .sum()
}

pub fn collective_time(
    schedule: &TransferSchedule,
    comm: &CommParams,
    device: &DeviceProfile,
    t_other: f64,
) -> Result<CostBreakdown> {
    check_schedule(schedule)?;
    ensure_non_negative("t_other", t_other)?;
    let t_comm = shuffle_time(schedule, comm);
    let t_io = schedule.total_data / device.bdw_seq();
    Ok(CostBreakdown::new(t_comm, t_io, t_other))
}

/// Individual I/O time. The model assumes uncoordinated accesses, so callers
/// normally pass [`AccessPattern::Random`].
pub fn individual_time(
    total_data: f64,
    device: &DeviceProfile,
    pattern: AccessPattern,
    t_other: f64,
) -> Result<CostBreakdown> {
    ensure_non_negative("total_data", total_data)?;
    ensure_non_negative("t_other", t_other)?;
    Ok(CostBreakdown::new(
        0.0,
        total_data / device.bandwidth(pattern),
        t_other,
    ))
}

/// Residual cost not explained by shuffle and I/O, clamped at zero.
pub fn fit_t_other(measured_total: f64, modeled_without_other: f64) -> Result<f64> {
    ensure_non_negative("measured_total", measured_total)?;
    ensure_non_negative("modeled_without_other", modeled_without_other)?;
    Ok((measured_total - modeled_without_other).max(0.0))
}

pub fn decide(
    schedule: &TransferSchedule,
    total_data: f64,
    comm: &CommParams,
    device: &DeviceProfile,
    t_other_coll: f64,
    t_other_indiv: f64,
) -> Result<Decision> {
    let coll = collective_time(schedule, comm, device, t_other_coll)?;
    let indiv = individual_time(total_data, device, AccessPattern::Random, t_other_indiv)?;
    Ok(Decision::from_totals(coll.total, indiv.total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub device: String,
    pub msg_size: f64,
    /// One shuffle iteration, seconds.
    pub shuffle_cost: f64,
    /// I/O time saved by issuing the same volume sequentially, seconds.
    pub benefit: f64,
}

impl TradeoffRow {
    pub fn shuffle_pays_off(&self) -> bool {
        self.shuffle_cost < self.benefit
    }
}

/// Single-iteration comparison of shuffle cost against the I/O time that
/// collective I/O saves, for each device and message size.
///
/// With `aggregators` aggregators each handling `msg_size` MB, the benefit is
/// the individual I/O time of that volume minus the collective I/O phase,
/// i.e. `T_individual - T_collective` with the shuffle term excluded since it
/// is reported separately. Rows are device-major, in input order.
pub fn tradeoff_sweep(
    msg_sizes: &[f64],
    comm: &CommParams,
    devices: &[DeviceProfile],
    tau: f64,
    aggregators: u64,
) -> Result<Vec<TradeoffRow>> {
    if msg_sizes.is_empty() {
        return Err(Error::invalid(
            "msg_sizes",
            "need at least one message size",
        ));
    }
    ensure_fraction("tau", tau)?;
    let mut rows = Vec::with_capacity(devices.len() * msg_sizes.len());
    for device in devices {
        for &m in msg_sizes {
            ensure_positive("msg_size", m)?;
            let schedule = TransferSchedule::uniform(1, m, tau, aggregators)?;
            let coll = collective_time(&schedule, comm, device, 0.0)?;
            let indiv = individual_time(schedule.total_data, device, AccessPattern::Random, 0.0)?;
            rows.push(TradeoffRow {
                device: device.name().to_string(),
                msg_size: m,
                shuffle_cost: coll.t_comm,
                benefit: indiv.total - (coll.total - coll.t_comm),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{derive_schedule, WorkloadSpec};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn preset() -> TransferSchedule {
        derive_schedule(&WorkloadSpec::four_node_ior(), Some(1.0)).unwrap()
    }

    #[test]
    fn collective_examples() {
        let comm = CommParams::reference_platform();
        let nvm = collective_time(&preset(), &comm, &DeviceProfile::nvm(), 0.0).unwrap();
        assert!((nvm.t_comm - 138.60).abs() < 0.005, "{nvm:?}");
        assert!((nvm.t_io - 145.88).abs() < 0.005, "{nvm:?}");
        assert!((nvm.total - 284.48).abs() < 0.005, "{nvm:?}");
        assert!(rel(nvm.total, 284.46) <= 1e-4);

        let ssd = collective_time(&preset(), &comm, &DeviceProfile::ssd(), 0.0).unwrap();
        assert!((ssd.total - 286.23).abs() < 0.005, "{ssd:?}");
    }

    #[test]
    fn empty_schedule_costs_only_other() {
        let s = TransferSchedule::new(0.0, 16.0, 1.0, 4).unwrap();
        let c = collective_time(
            &s,
            &CommParams::reference_platform(),
            &DeviceProfile::hdd(),
            1.5,
        )
        .unwrap();
        assert_eq!((c.t_comm, c.t_io, c.t_other, c.total), (0.0, 0.0, 1.5, 1.5));
    }

    #[test]
    fn individual_examples() {
        let t =
            |d: DeviceProfile| individual_time(16384.0, &d, AccessPattern::Random, 0.0).unwrap();
        assert!((t(DeviceProfile::hdd()).total - 613.17).abs() < 0.005);
        assert!((t(DeviceProfile::ssd()).total - 160.84).abs() < 0.01);
        assert!((t(DeviceProfile::nvm()).total - 148.26).abs() < 0.01);
        let seq = individual_time(
            16384.0,
            &DeviceProfile::nvm(),
            AccessPattern::Sequential,
            0.0,
        )
        .unwrap();
        assert!((seq.total - 145.88).abs() < 0.005);
        assert_eq!(t(DeviceProfile::hdd()).t_comm, 0.0);
    }

    #[test]
    fn t_other_fit() {
        assert_eq!(fit_t_other(284.46, 284.48).unwrap(), 0.0);
        assert!((fit_t_other(300.0, 284.48).unwrap() - 15.52).abs() < 1e-9);
        assert_eq!(fit_t_other(0.0, 0.0).unwrap(), 0.0);
        assert!(fit_t_other(-1.0, 0.0).is_err());
    }

    #[test]
    fn decisions() {
        let comm = CommParams::reference_platform();
        let s = preset();
        let d = |dev: DeviceProfile| decide(&s, 16384.0, &comm, &dev, 0.0, 0.0).unwrap();
        assert_eq!(d(DeviceProfile::nvm()).strategy, Strategy::Individual);
        assert_eq!(d(DeviceProfile::ssd()).strategy, Strategy::Individual);
        let hdd = d(DeviceProfile::hdd());
        assert_eq!(hdd.strategy, Strategy::Collective);
        assert!(hdd.benefit > 0.0);

        let empty = TransferSchedule::new(0.0, 16.0, 1.0, 4).unwrap();
        let tie = decide(&empty, 0.0, &comm, &DeviceProfile::nvm(), 0.0, 0.0).unwrap();
        assert_eq!(tie.benefit, 0.0);
        assert_eq!(tie.strategy, Strategy::Individual);
    }

    #[test]
    fn sweep_signs() {
        let devices = [
            DeviceProfile::hdd(),
            DeviceProfile::ssd(),
            DeviceProfile::nvm(),
        ];
        let sizes = [32.0 / 1024.0, 2.0, 16.0];
        let rows =
            tradeoff_sweep(&sizes, &CommParams::reference_platform(), &devices, 1.0, 4).unwrap();
        assert_eq!(rows.len(), 9);
        let pays: Vec<bool> = rows.iter().map(TradeoffRow::shuffle_pays_off).collect();
        assert_eq!(
            pays,
            [false, true, true, false, false, false, false, false, false]
        );
    }

    #[test]
    fn sweep_small_message_limit() {
        let comm = CommParams::reference_platform();
        let rows = tradeoff_sweep(&[1e-12], &comm, &[DeviceProfile::hdd()], 1.0, 4).unwrap();
        assert!((rows[0].shuffle_cost - comm.t_s()).abs() < 1e-12);
        assert!(rows[0].benefit.abs() < 1e-12);
        assert!(tradeoff_sweep(&[], &comm, &[DeviceProfile::hdd()], 1.0, 4).is_err());
        assert!(tradeoff_sweep(&[0.0], &comm, &[DeviceProfile::hdd()], 1.0, 4).is_err());
    }
}
