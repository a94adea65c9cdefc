use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::devices::{DeviceProfile, MemoryProfile};
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::workload::{IoTrace, PageOp};

/// LRU write-back page cache.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageCacheConfig {
    pub capacity_mb: f64,
    pub page_size_kb: f64,
    /// Write remaining dirty pages back when the trace ends.
    pub flush_at_end: bool,
}

impl PageCacheConfig {
    pub fn new(capacity_mb: f64, page_size_kb: f64, flush_at_end: bool) -> Result<Self> {
        ensure_non_negative("capacity", capacity_mb)?;
        ensure_positive("page_size", page_size_kb)?;
        Ok(Self {
            capacity_mb,
            page_size_kb,
            flush_at_end,
        })
    }

    /// Whole pages that fit, rounded down.
    pub fn capacity_pages(&self) -> u64 {
        (self.capacity_mb * 1024.0 / self.page_size_kb).floor() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PageCacheReport {
    pub elapsed: f64,
    pub capacity_pages: u64,
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    /// Evictions that wrote a dirty page back to the device.
    pub writebacks: u64,
    /// Dirty pages written back by the end-of-trace flush.
    pub flushed: u64,
    pub memory_time: f64,
    pub device_time: f64,
}

struct Slot {
    stamp: u64,
    dirty: bool,
}

/// Page → (recency stamp, dirty), with the stamps ordered for LRU lookup.
struct Lru {
    capacity: u64,
    slots: HashMap<u64, Slot>,
    by_stamp: BTreeMap<u64, u64>,
    clock: u64,
}

impl Lru {
    fn new(capacity: u64) -> Self {
        Self {
            capacity,
            slots: HashMap::new(),
            by_stamp: BTreeMap::new(),
            clock: 0,
        }
    }

    /// Marks `page` most recently used. Returns false on a miss.
    fn touch(&mut self, page: u64, dirty: bool) -> bool {
        self.clock += 1;
        match self.slots.get_mut(&page) {
            Some(slot) => {
                self.by_stamp.remove(&slot.stamp);
                slot.stamp = self.clock;
                slot.dirty |= dirty;
                self.by_stamp.insert(self.clock, page);
                true
            }
            None => false,
        }
    }

    /// Inserts a page known to be absent, returning the evicted victim's
    /// dirty flag, if any.
    fn insert(&mut self, page: u64, dirty: bool) -> Option<bool> {
        let victim = if self.slots.len() as u64 >= self.capacity {
            let (_, victim) = self.by_stamp.pop_first().expect("full cache has entries");
            self.slots.remove(&victim).map(|s| s.dirty)
        } else {
            None
        };
        self.slots.insert(
            page,
            Slot {
                stamp: self.clock,
                dirty,
            },
        );
        self.by_stamp.insert(self.clock, page);
        victim
    }

    fn dirty_pages(&self) -> u64 {
        self.slots.values().filter(|s| s.dirty).count() as u64
    }
}

/// Replays `trace` through an LRU write-back cache.
///
/// Read hits cost a page at memory read speed; read misses fetch the page at
/// the device's random bandwidth. Writes land in memory and dirty the page,
/// which costs a random-bandwidth device write when evicted. With zero
/// capacity every access goes straight to the device.
pub fn simulate_page_cache(
    trace: &IoTrace,
    cache: &PageCacheConfig,
    device: &DeviceProfile,
    memory: &MemoryProfile,
) -> Result<PageCacheReport> {
    if (trace.page_size_kb - cache.page_size_kb).abs() > 0.0 {
        return Err(Error::invalid(
            "page_size",
            format!(
                "trace uses {} KB pages but the cache uses {} KB",
                trace.page_size_kb, cache.page_size_kb
            ),
        ));
    }
    let page_mb = cache.page_size_kb / 1024.0;
    let mem_read = page_mb / memory.read_bw();
    let mem_write = page_mb / memory.write_bw();
    let dev_random = page_mb / device.bdw_ran();

    let mut report = PageCacheReport {
        capacity_pages: cache.capacity_pages(),
        ..Default::default()
    };
    let mut lru = Lru::new(report.capacity_pages);

    for rec in &trace.records {
        let is_write = rec.op == PageOp::Write;
        if report.capacity_pages == 0 {
            report.misses += 1;
            report.device_time += dev_random;
            continue;
        }
        if lru.touch(rec.page, is_write) {
            report.hits += 1;
            report.memory_time += if is_write { mem_write } else { mem_read };
            continue;
        }
        report.misses += 1;
        if is_write {
            report.memory_time += mem_write;
        } else {
            report.device_time += dev_random;
        }
        if let Some(victim_dirty) = lru.insert(rec.page, is_write) {
            report.evictions += 1;
            if victim_dirty {
                report.writebacks += 1;
                report.device_time += dev_random;
            }
        }
    }

    if cache.flush_at_end {
        report.flushed = lru.dirty_pages();
        report.device_time += report.flushed as f64 * page_mb / device.bdw_seq();
    }
    report.elapsed = report.memory_time + report.device_time;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{generate_trace, TracePattern};

    fn run(
        pattern: TracePattern,
        ws: f64,
        passes: u32,
        cap: f64,
        device: &DeviceProfile,
    ) -> PageCacheReport {
        let trace = generate_trace(pattern, ws, 4.0, passes, 7).unwrap();
        let cfg = PageCacheConfig::new(cap, 4.0, true).unwrap();
        simulate_page_cache(&trace, &cfg, device, &MemoryProfile::dram()).unwrap()
    }

    #[test]
    fn streaming_read_never_hits() {
        let hdd = DeviceProfile::hdd();
        let r = run(TracePattern::StreamingRead, 1.0, 1, 4.0, &hdd);
        assert_eq!((r.hits, r.misses, r.evictions), (0, 256, 0));
        let expected = 256.0 * (4.0 / 1024.0) / hdd.bdw_ran();
        assert!((r.elapsed - expected).abs() < 1e-12);
    }

    #[test]
    fn large_cache_hits_after_first_pass() {
        let r = run(
            TracePattern::ReadWriteMix,
            1.0,
            3,
            2.0,
            &DeviceProfile::ssd(),
        );
        // The first write sweep misses; everything after it hits.
        assert_eq!(r.misses, 256);
        assert_eq!(r.hits, 256 * 5);
        assert_eq!(r.evictions, 0);
        assert_eq!(r.flushed, 256);
    }

    #[test]
    fn zero_capacity_goes_to_device() {
        let nvm = DeviceProfile::nvm();
        let r = run(TracePattern::ReadWriteMix, 1.0, 2, 0.0, &nvm);
        assert_eq!(r.hits, 0);
        assert_eq!(r.misses, 1024);
        assert_eq!(r.memory_time, 0.0);
        let expected = 1024.0 * (4.0 / 1024.0) / nvm.bdw_ran();
        assert!((r.elapsed - expected).abs() < 1e-12);
    }

    #[test]
    fn capacity_rounds_down_to_pages() {
        let cfg = PageCacheConfig::new(0.01, 4.0, false).unwrap();
        assert_eq!(cfg.capacity_pages(), 2);
        assert!(PageCacheConfig::new(-1.0, 4.0, false).is_err());
        assert!(PageCacheConfig::new(1.0, 0.0, false).is_err());
    }

    #[test]
    fn thrashing_writes_back_dirty_pages() {
        // Sequential sweeps over 4x the capacity: every access misses.
        let r = run(
            TracePattern::SequentialWrite,
            1.0,
            2,
            0.25,
            &DeviceProfile::hdd(),
        );
        assert_eq!(r.hits, 0);
        assert_eq!(r.writebacks, 512 - 64);
        assert_eq!(r.flushed, 64);
    }

    #[test]
    fn page_size_mismatch_rejected() {
        let trace = generate_trace(TracePattern::StreamingRead, 1.0, 4.0, 1, 0).unwrap();
        let cfg = PageCacheConfig::new(1.0, 8.0, false).unwrap();
        assert!(
            simulate_page_cache(&trace, &cfg, &DeviceProfile::hdd(), &MemoryProfile::dram())
                .is_err()
        );
    }
}
