//! Event loop shared by the collective and individual simulations.
//!
//! Each actor runs a fixed list of phases back to back. A `Delay` phase
//! occupies only the actor. A `Transfer` phase moves data through the storage
//! node, whose bandwidth is split evenly among all transfers in flight
//! (processor sharing). Time advances from event to event: the next delay
//! expiry or the next transfer completion, whichever is first.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Phase {
    /// Fixed duration, seconds.
    Delay(f64),
    /// Volume through the shared storage bandwidth, MB.
    Transfer(f64),
}

#[derive(Debug, Clone, Copy)]
struct Wakeup {
    time: f64,
    seq: u64,
    actor: usize,
}

impl PartialEq for Wakeup {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Wakeup {}

impl PartialOrd for Wakeup {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Wakeup {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

struct InFlight {
    actor: usize,
    remaining: f64,
}

pub(crate) struct Outcome {
    /// Wall-clock duration of every phase, per actor, in phase order.
    pub durations: Vec<Vec<f64>>,
    /// Clock value at which each actor finished its last phase.
    pub finish: Vec<f64>,
}

pub(crate) fn run(plans: &[Vec<Phase>], bandwidth: f64) -> Outcome {
    assert!(bandwidth > 0.0, "storage bandwidth must be positive");

    let mut now = 0.0_f64;
    let mut seq = 0_u64;
    let mut wakeups: BinaryHeap<Reverse<Wakeup>> = BinaryHeap::new();
    let mut in_flight: Vec<InFlight> = Vec::new();
    let mut next_phase = vec![0_usize; plans.len()];
    let mut phase_start = vec![0.0_f64; plans.len()];
    let mut durations: Vec<Vec<f64>> = plans.iter().map(|p| Vec::with_capacity(p.len())).collect();
    let mut finish = vec![0.0_f64; plans.len()];

    let mut start = |actor: usize,
                     now: f64,
                     wakeups: &mut BinaryHeap<Reverse<Wakeup>>,
                     in_flight: &mut Vec<InFlight>,
                     next_phase: &mut [usize],
                     phase_start: &mut [f64]| {
        let Some(phase) = plans[actor].get(next_phase[actor]) else {
            return false;
        };
        next_phase[actor] += 1;
        phase_start[actor] = now;
        match *phase {
            Phase::Delay(d) => {
                wakeups.push(Reverse(Wakeup {
                    time: now + d,
                    seq,
                    actor,
                }));
                seq += 1;
            }
            Phase::Transfer(v) => in_flight.push(InFlight {
                actor,
                remaining: v,
            }),
        }
        true
    };

    for actor in 0..plans.len() {
        start(
            actor,
            now,
            &mut wakeups,
            &mut in_flight,
            &mut next_phase,
            &mut phase_start,
        );
    }

    let mut completed: Vec<usize> = Vec::new();
    loop {
        let next_wakeup = wakeups.peek().map(|Reverse(w)| w.time);
        let min_remaining = in_flight.iter().map(|f| f.remaining).min_by(f64::total_cmp);
        let share = bandwidth / in_flight.len().max(1) as f64;
        let next_transfer = min_remaining.map(|r| now + r / share);

        let (t, transfer_fires) = match (next_wakeup, next_transfer) {
            (None, None) => break,
            (Some(w), None) => (w, false),
            (None, Some(x)) => (x, true),
            (Some(w), Some(x)) if x <= w => (x, true),
            (Some(w), Some(_)) => (w, false),
        };

        completed.clear();
        if let Some(min_r) = min_remaining {
            // Progress of every transfer in flight since `now`. When a
            // transfer completion is the event, use the volume itself so the
            // finishing transfers land on exactly zero.
            let progress = if transfer_fires {
                min_r
            } else {
                ((t - now) * share).min(min_r)
            };
            in_flight.retain_mut(|f| {
                if transfer_fires && f.remaining <= min_r {
                    completed.push(f.actor);
                    false
                } else {
                    f.remaining = (f.remaining - progress).max(0.0);
                    true
                }
            });
        }
        now = t;

        while let Some(Reverse(w)) = wakeups.peek() {
            if w.time > now {
                break;
            }
            completed.push(w.actor);
            wakeups.pop();
        }

        completed.sort_unstable();
        for &actor in &completed {
            durations[actor].push(now - phase_start[actor]);
            if !start(
                actor,
                now,
                &mut wakeups,
                &mut in_flight,
                &mut next_phase,
                &mut phase_start,
            ) {
                finish[actor] = now;
            }
        }
    }

    Outcome { durations, finish }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lone_transfer_runs_at_full_bandwidth() {
        let out = run(&[vec![Phase::Transfer(100.0)]], 50.0);
        assert_eq!(out.durations[0], vec![2.0]);
        assert_eq!(out.finish[0], 2.0);
    }

    #[test]
    fn equal_transfers_share_evenly() {
        let plans = vec![vec![Phase::Transfer(10.0)]; 4];
        let out = run(&plans, 10.0);
        for f in out.finish {
            assert!((f - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn processor_sharing_with_unequal_sizes() {
        // Two transfers of 10 and 30 MB at 10 MB/s: the small one ends at 2 s
        // (5 MB/s each); the large one has 20 MB left and finishes at 4 s.
        let plans = vec![vec![Phase::Transfer(10.0)], vec![Phase::Transfer(30.0)]];
        let out = run(&plans, 10.0);
        assert!((out.finish[0] - 2.0).abs() < 1e-12);
        assert!((out.finish[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn delay_staggers_transfers() {
        // Actor 1 waits 1 s, so actor 0 transfers alone for the first second.
        let plans = vec![
            vec![Phase::Transfer(20.0)],
            vec![Phase::Delay(1.0), Phase::Transfer(10.0)],
        ];
        let out = run(&plans, 10.0);
        // t=1: actor 0 has 10 MB left; both then share 5 MB/s and finish at 3 s.
        assert!((out.finish[0] - 3.0).abs() < 1e-12, "{:?}", out.finish);
        assert!((out.finish[1] - 3.0).abs() < 1e-12, "{:?}", out.finish);
        assert_eq!(out.durations[1].len(), 2);
        assert!((out.durations[1][1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_length_phases_complete_immediately() {
        let plans = vec![vec![Phase::Delay(0.0), Phase::Transfer(0.0)], vec![]];
        let out = run(&plans, 1.0);
        assert_eq!(out.durations[0], vec![0.0, 0.0]);
        assert_eq!(out.finish, vec![0.0, 0.0]);
    }
}
