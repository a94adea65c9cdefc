//! INI-style configuration: `[section]` headers and `key = value` lines.
//! Lines starting with `#` or `;` are comments, as is anything after a
//! whitespace-preceded `#` or `;`.
//!
//! ```text
//! [workload]
//! nodes = 4
//! procs_per_node = 4
//! aggregators_per_node = 1
//! segment_count = 2
//! block_size_mb = 512
//! transfer_size_mb = 16
//! reorder_random = true
//! direction = write
//! tau = 1.0
//!
//! [comm]
//! t_s_s = 5.39e-3
//! t_w_s_per_mb = 3.35e-2
//! ```

use std::path::Path;
use std::str::FromStr;

use crate::commnet::CommParams;
use crate::devices::DeviceProfile;
use crate::error::{Error, Result};
use crate::simulator::PageCacheConfig;
use crate::workload::{Direction, WorkloadSpec};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabConfig {
    pub workload: Option<WorkloadSpec>,
    pub tau_override: Option<f64>,
    pub device: Option<DeviceProfile>,
    pub comm: Option<CommParams>,
    pub cache: Option<PageCacheConfig>,
}

struct Section {
    name: String,
    line: usize,
    entries: Vec<(String, String, usize)>,
}

impl Section {
    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        let Some(pos) = self.entries.iter().position(|(k, _, _)| k == key) else {
            return Ok(None);
        };
        let (_, value, _) = self.entries.remove(pos);
        value.parse().map(Some).map_err(|_| Error::ConfigKey {
            section: self.name.clone(),
            key: key.to_string(),
            message: format!("cannot parse `{value}`"),
        })
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.take(key)?.ok_or_else(|| Error::ConfigKey {
            section: self.name.clone(),
            key: key.to_string(),
            message: "missing required key".into(),
        })
    }

    fn take_bool(&mut self, key: &str) -> Result<Option<bool>> {
        let Some(raw) = self.take::<String>(key)? else {
            return Ok(None);
        };
        match raw.to_ascii_lowercase().as_str() {
            "true" | "yes" | "on" | "1" => Ok(Some(true)),
            "false" | "no" | "off" | "0" => Ok(Some(false)),
            _ => Err(Error::ConfigKey {
                section: self.name.clone(),
                key: key.to_string(),
                message: format!("expected a boolean, got `{raw}`"),
            }),
        }
    }

    /// Checked before parsing, so a misspelt key is reported as itself
    /// rather than as the required key it was meant to be.
    fn expect_keys(&self, allowed: &[&str]) -> Result<()> {
        match self
            .entries
            .iter()
            .find(|(k, _, _)| !allowed.contains(&k.as_str()))
        {
            Some((key, _, line)) => Err(Error::Config {
                line: *line,
                message: format!("unknown key `{key}` in [{}]", self.name),
            }),
            None => Ok(()),
        }
    }

    fn wrap(&self, err: Error) -> Error {
        match err {
            Error::InvalidParameter { name, reason } => Error::ConfigKey {
                section: self.name.clone(),
                key: name.to_string(),
                message: reason,
            },
            other => other,
        }
    }
}

fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if (b == b'#' || b == b';') && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            return &line[..i];
        }
    }
    line
}

fn split_sections(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config {
                    line: line_no,
                    message: format!("unterminated section header `{line}`"),
                })?
                .trim()
                .to_ascii_lowercase();
            if sections.iter().any(|s| s.name == name) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("duplicate section [{name}]"),
                });
            }
            sections.push(Section {
                name,
                line: line_no,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: line_no,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let section = sections.last_mut().ok_or_else(|| Error::Config {
            line: line_no,
            message: "key outside of any section".into(),
        })?;
        let key = key.trim().to_string();
        if section.entries.iter().any(|(k, _, _)| *k == key) {
            return Err(Error::Config {
                line: line_no,
                message: format!("duplicate key `{key}` in [{}]", section.name),
            });
        }
        section
            .entries
            .push((key, value.trim().to_string(), line_no));
    }
    Ok(sections)
}

impl LabConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        text.parse()
    }

    fn parse_workload(s: &mut Section) -> Result<(WorkloadSpec, Option<f64>)> {
        s.expect_keys(&[
            "nodes",
            "procs_per_node",
            "aggregators_per_node",
            "segment_count",
            "block_size_mb",
            "transfer_size_mb",
            "reorder_random",
            "direction",
            "tau",
        ])?;
        let spec = WorkloadSpec {
            nodes: s.require("nodes")?,
            procs_per_node: s.require("procs_per_node")?,
            aggregators_per_node: s.require("aggregators_per_node")?,
            segment_count: s.require("segment_count")?,
            block_size: s.require("block_size_mb")?,
            transfer_size: s.require("transfer_size_mb")?,
            reorder_random: s.take_bool("reorder_random")?.unwrap_or(false),
            direction: s
                .take::<Direction>("direction")?
                .unwrap_or(Direction::Write),
        };
        spec.validate().map_err(|e| s.wrap(e))?;
        let tau: Option<f64> = s.take("tau")?;
        if let Some(t) = tau {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::ConfigKey {
                    section: s.name.clone(),
                    key: "tau".into(),
                    message: format!("expected a fraction in [0, 1], got {t}"),
                });
            }
        }
        Ok((spec, tau))
    }
}

impl FromStr for LabConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut config = LabConfig::default();
        for mut s in split_sections(text)? {
            match s.name.as_str() {
                "workload" => {
                    let (spec, tau) = Self::parse_workload(&mut s)?;
                    config.workload = Some(spec);
                    config.tau_override = tau;
                }
                "device" => {
                    s.expect_keys(&["name", "bdw_seq_mbps", "bdw_ran_mbps"])?;
                    let name: String = s.require("name")?;
                    let seq: f64 = s.require("bdw_seq_mbps")?;
                    let ran: f64 = s.require("bdw_ran_mbps")?;
                    config.device =
                        Some(DeviceProfile::custom(name, seq, ran).map_err(|e| s.wrap(e))?);
                }
                "comm" => {
                    s.expect_keys(&["t_s_s", "t_w_s_per_mb"])?;
                    let t_s: f64 = s.require("t_s_s")?;
                    let t_w: f64 = s.require("t_w_s_per_mb")?;
                    config.comm = Some(CommParams::new(t_s, t_w).map_err(|e| s.wrap(e))?);
                }
                "cache" => {
                    s.expect_keys(&["capacity_mb", "page_size_kb", "flush_at_end"])?;
                    let capacity: f64 = s.require("capacity_mb")?;
                    let page: f64 = s.take("page_size_kb")?.unwrap_or(4.0);
                    let flush = s.take_bool("flush_at_end")?.unwrap_or(true);
                    config.cache =
                        Some(PageCacheConfig::new(capacity, page, flush).map_err(|e| s.wrap(e))?);
                }
                other => {
                    return Err(Error::Config {
                        line: s.line,
                        message: format!("unknown section [{other}]"),
                    })
                }
            }
        }
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE_V: &str = "\
# four compute nodes
[workload]
nodes = 4
procs_per_node = 4
aggregators_per_node = 1
segment_count = 2
block_size_mb = 512
transfer_size_mb = 16
reorder_random = true
direction = write
tau = 1.0

[comm]
t_s_s = 5.39e-3
t_w_s_per_mb = 3.35e-2

[cache]
capacity_mb = 96
page_size_kb = 4
flush_at_end = yes
";

    #[test]
    fn parses_full_config() {
        let cfg: LabConfig = TABLE_V.parse().unwrap();
        assert_eq!(cfg.workload.unwrap(), WorkloadSpec::four_node_ior());
        assert_eq!(cfg.tau_override, Some(1.0));
        assert_eq!(cfg.comm.unwrap(), CommParams::reference_platform());
        let cache = cfg.cache.unwrap();
        assert_eq!(cache.capacity_mb, 96.0);
        assert!(cache.flush_at_end);
        assert!(cfg.device.is_none());
    }

    #[test]
    fn trailing_comments() {
        let cfg: LabConfig =
            "[cache]   # sizes\ncapacity_mb = 96 ; MB\nflush_at_end = no # keep dirty\n"
                .parse()
                .unwrap();
        let cache = cfg.cache.unwrap();
        assert_eq!(cache.capacity_mb, 96.0);
        assert!(!cache.flush_at_end);
    }

    #[test]
    fn custom_device() {
        let cfg: LabConfig = "[device]\nname = burst\nbdw_seq_mbps = 400\nbdw_ran_mbps = 350\n"
            .parse()
            .unwrap();
        assert_eq!(cfg.device.unwrap().bdw_ran(), 350.0);
        let err = "[device]\nname = NVM\nbdw_seq_mbps = 1\nbdw_ran_mbps = 1\n"
            .parse::<LabConfig>()
            .unwrap_err();
        assert!(matches!(err, Error::ReservedDeviceName(_)));
    }

    #[test]
    fn errors_name_the_offender() {
        let err = "[comm]\nt_s_s = abc\nt_w_s_per_mb = 1\n"
            .parse::<LabConfig>()
            .unwrap_err();
        assert!(err.to_string().contains("t_s_s"), "{err}");

        let err = "[comm]\nt_s_s = 0\nt_w_s_per_mb = 1\nbogus = 2\n"
            .parse::<LabConfig>()
            .unwrap_err();
        assert!(
            err.to_string().contains("line 4") && err.to_string().contains("bogus"),
            "{err}"
        );

        let err = "nodes = 1\n".parse::<LabConfig>().unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");

        let err = "[network]\n".parse::<LabConfig>().unwrap_err();
        assert!(err.to_string().contains("network"), "{err}");

        let err = "[comm]\nt_s_s = 0\n".parse::<LabConfig>().unwrap_err();
        assert!(err.to_string().contains("t_w_s_per_mb"), "{err}");

        let err = TABLE_V
            .replace("tau = 1.0", "tau = 2")
            .parse::<LabConfig>()
            .unwrap_err();
        assert!(err.to_string().contains("tau"), "{err}");

        let err = TABLE_V
            .replace("aggregators_per_node = 1", "aggregators_per_node = 9")
            .parse::<LabConfig>()
            .unwrap_err();
        assert!(err.to_string().contains("aggregators_per_node"), "{err}");
    }
}
