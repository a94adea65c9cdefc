//! Storage device parameterization.
//!
//! A device is described only by its end-to-end bandwidths (compute node to
//! storage node) for sequential and random access. There is no per-request
//! latency term; latency is folded into the measured bandwidth. Units are MB
//! and seconds everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AccessPattern {
    Sequential,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    name: String,
    bdw_seq: f64,
    bdw_ran: f64,
}

impl DeviceProfile {
    /// Builds a profile, rejecting non-positive bandwidths and profiles whose
    /// random bandwidth exceeds the sequential one.
    pub fn new(name: impl Into<String>, bdw_seq: f64, bdw_ran: f64) -> Result<Self> {
        ensure_positive("bdw_seq", bdw_seq)?;
        ensure_positive("bdw_ran", bdw_ran)?;
        if bdw_ran > bdw_seq {
            return Err(Error::invalid(
                "bdw_ran",
                format!(
                    "random bandwidth {bdw_ran} MB/s exceeds sequential bandwidth {bdw_seq} MB/s"
                ),
            ));
        }
        Ok(Self {
            name: name.into(),
            bdw_seq,
            bdw_ran,
        })
    }

    /// Like [`DeviceProfile::new`], but refuses the names of builtin profiles.
    pub fn custom(name: impl Into<String>, bdw_seq: f64, bdw_ran: f64) -> Result<Self> {
        let name = name.into();
        if BUILTIN_DEVICES
            .iter()
            .any(|(builtin, _, _)| builtin.eq_ignore_ascii_case(&name))
        {
            return Err(Error::ReservedDeviceName(name));
        }
        Self::new(name, bdw_seq, bdw_ran)
    }

    pub fn hdd() -> Self {
        builtin("HDD")
    }

    pub fn ssd() -> Self {
        builtin("SSD")
    }

    pub fn nvm() -> Self {
        builtin("NVM")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Sequential end-to-end bandwidth, MB/s.
    pub fn bdw_seq(&self) -> f64 {
        self.bdw_seq
    }

    /// Random end-to-end bandwidth, MB/s.
    pub fn bdw_ran(&self) -> f64 {
        self.bdw_ran
    }

    pub fn bandwidth(&self, pattern: AccessPattern) -> f64 {
        match pattern {
            AccessPattern::Sequential => self.bdw_seq,
            AccessPattern::Random => self.bdw_ran,
        }
    }
}

/// DRAM speed, used as the page-cache hit cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryProfile {
    read_bw: f64,
    write_bw: f64,
}

impl MemoryProfile {
    pub fn new(read_bw: f64, write_bw: f64) -> Result<Self> {
        ensure_positive("read_bw", read_bw)?;
        ensure_positive("write_bw", write_bw)?;
        Ok(Self { read_bw, write_bw })
    }

    pub fn dram() -> Self {
        Self {
            read_bw: DRAM_READ_MBPS,
            write_bw: DRAM_WRITE_MBPS,
        }
    }

    pub fn read_bw(&self) -> f64 {
        self.read_bw
    }

    pub fn write_bw(&self) -> f64 {
        self.write_bw
    }
}

// (name, bdw_seq, bdw_ran) in MB/s, measured end to end over 4 compute nodes.
const BUILTIN_DEVICES: [(&str, f64, f64); 3] = [
    ("HDD", 58.11, 26.72),
    ("SSD", 110.98, 101.86),
    ("NVM", 112.31, 110.51),
];

const DRAM_READ_MBPS: f64 = 1000.0;
const DRAM_WRITE_MBPS: f64 = 900.0;

fn builtin(name: &str) -> DeviceProfile {
    lookup_builtin(name).expect("builtin device table entry")
}

fn lookup_builtin(name: &str) -> Option<DeviceProfile> {
    BUILTIN_DEVICES
        .iter()
        .find(|(n, _, _)| n.eq_ignore_ascii_case(name))
        .map(|&(n, seq, ran)| DeviceProfile {
            name: n.to_string(),
            bdw_seq: seq,
            bdw_ran: ran,
        })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuiltinProfiles {
    pub devices: Vec<DeviceProfile>,
    pub memory: MemoryProfile,
}

impl BuiltinProfiles {
    /// Case-insensitive lookup by device name.
    pub fn device(&self, name: &str) -> Result<&DeviceProfile> {
        self.devices
            .iter()
            .find(|d| d.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownDevice(name.to_string()))
    }
}

/// The three builtin devices (in HDD, SSD, NVM order) and the DRAM profile.
pub fn builtin_profiles() -> BuiltinProfiles {
    BuiltinProfiles {
        devices: BUILTIN_DEVICES.iter().map(|(n, _, _)| builtin(n)).collect(),
        memory: MemoryProfile::dram(),
    }
}

/// Seconds needed to move `size_mb` through the device with the given pattern.
pub fn service_time(device: &DeviceProfile, size_mb: f64, pattern: AccessPattern) -> Result<f64> {
    ensure_non_negative("size", size_mb)?;
    Ok(size_mb / device.bandwidth(pattern))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table_values() {
        let p = builtin_profiles();
        assert_eq!(p.devices.len(), 3);
        let hdd = p.device("HDD").unwrap();
        assert_eq!((hdd.bdw_seq(), hdd.bdw_ran()), (58.11, 26.72));
        let ssd = p.device("ssd").unwrap();
        assert_eq!((ssd.bdw_seq(), ssd.bdw_ran()), (110.98, 101.86));
        let nvm = p.device("NVM").unwrap();
        assert_eq!((nvm.bdw_seq(), nvm.bdw_ran()), (112.31, 110.51));
        assert_eq!(p.memory.read_bw(), 1000.0);
        assert_eq!(p.memory.write_bw(), 900.0);
    }

    #[test]
    fn dram_outpaces_every_builtin_device() {
        let p = builtin_profiles();
        for d in &p.devices {
            assert!(p.memory.read_bw() >= d.bdw_seq().max(d.bdw_ran()));
            assert!(p.memory.write_bw() >= d.bdw_seq().max(d.bdw_ran()));
        }
    }

    #[test]
    fn unknown_device() {
        let err = builtin_profiles().device("FOO").unwrap_err();
        assert!(err.to_string().contains("FOO"));
    }

    #[test]
    fn service_time_examples() {
        let hdd = DeviceProfile::hdd();
        let t = service_time(&hdd, 16384.0, AccessPattern::Random).unwrap();
        assert!((t - 613.17).abs() < 0.005, "{t}");
        assert_eq!(
            service_time(&hdd, 0.0, AccessPattern::Sequential).unwrap(),
            0.0
        );
        let t = service_time(&hdd, 1024.0, AccessPattern::Sequential).unwrap();
        assert!((t - 17.62).abs() < 0.005, "{t}");
        assert!(service_time(&hdd, -1.0, AccessPattern::Random).is_err());
    }

    #[test]
    fn rejects_invalid_profiles() {
        assert!(DeviceProfile::new("x", 10.0, 20.0).is_err());
        assert!(DeviceProfile::new("x", 0.0, 0.0).is_err());
        assert!(DeviceProfile::new("x", f64::NAN, 1.0).is_err());
        assert!(DeviceProfile::new("x", 10.0, 10.0).is_ok());
        assert!(matches!(
            DeviceProfile::custom("nvm", 10.0, 5.0),
            Err(Error::ReservedDeviceName(_))
        ));
        assert!(DeviceProfile::custom("burst-buffer", 400.0, 300.0).is_ok());
    }

    #[test]
    fn sequential_never_slower_for_builtins() {
        for d in builtin_profiles().devices {
            let seq = service_time(&d, 100.0, AccessPattern::Sequential).unwrap();
            let ran = service_time(&d, 100.0, AccessPattern::Random).unwrap();
            assert!(seq <= ran);
        }
    }
}
