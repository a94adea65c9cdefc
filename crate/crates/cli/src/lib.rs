//! Command-line front end for the collective/individual I/O cost lab.

mod commands;
mod render;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use nvmio_lab::devices::AccessPattern;
use nvmio_lab::workload::TracePattern;

use commands::{CacheArgs, Context, PredictArgs, SimulateArgs, UsageError};
use render::{Format, Render};

#[derive(Parser)]
#[command(
    name = "nvmio-lab",
    version,
    about = "Predict, simulate and compare collective vs individual I/O"
)]
struct Cli {
    /// Output format.
    #[arg(
        long,
        global = true,
        value_enum,
        default_value = "table",
        env = "NVMIO_LAB_FORMAT"
    )]
    format: Format,

    /// INI file with [workload], [device], [comm] and [cache] sections.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternArg {
    Sequential,
    Random,
}

impl From<PatternArg> for AccessPattern {
    fn from(p: PatternArg) -> Self {
        match p {
            PatternArg::Sequential => AccessPattern::Sequential,
            PatternArg::Random => AccessPattern::Random,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Collective,
    Individual,
}

#[derive(Subcommand)]
enum Command {
    /// List device and memory bandwidth profiles.
    Profiles,
    /// Cost breakdown of both strategies for one device.
    Predict {
        #[arg(long, default_value = "NVM")]
        device: String,
        /// Shuffle fraction; defaults to the workload's own value.
        #[arg(long)]
        tau: Option<f64>,
        /// Fixed per-run overhead added to both strategies, seconds.
        #[arg(long, default_value_t = 0.0)]
        t_other: f64,
        /// Access pattern of individual I/O.
        #[arg(long, value_enum, default_value = "random")]
        pattern: PatternArg,
    },
    /// Pick the cheaper strategy for one device.
    Decide {
        #[arg(long, default_value = "NVM")]
        device: String,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        t_other_collective: f64,
        #[arg(long, default_value_t = 0.0)]
        t_other_individual: f64,
    },
    /// Shuffle cost versus I/O benefit for one iteration across message sizes.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "32,2048,16384")]
        msg_sizes_kb: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "HDD,SSD,NVM")]
        devices: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, default_value_t = 4)]
        aggregators: u64,
    },
    /// Discrete-event run of the workload with per-aggregator timelines.
    Simulate {
        #[arg(long, default_value = "NVM")]
        device: String,
        #[arg(long, value_enum, default_value = "collective")]
        strategy: StrategyArg,
        #[arg(long)]
        tau: Option<f64>,
        /// Access pattern of individual I/O.
        #[arg(long, value_enum, default_value = "random")]
        pattern: PatternArg,
        /// Slow a link: SENDER:AGGREGATOR:FACTOR multiplies t_w for that pair.
        #[arg(long, value_name = "SENDER:AGG:FACTOR", value_parser = parse_slow_link)]
        slow_link: Vec<(u64, u64, f64)>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Replay a page trace through an LRU write-back page cache.
    CacheSim {
        #[arg(long, value_delimiter = ',', default_value = "HDD,SSD,NVM")]
        devices: Vec<String>,
        /// One or more capacities; slowdown is relative to the largest.
        #[arg(long, value_delimiter = ',')]
        capacity_mb: Vec<f64>,
        #[arg(long)]
        page_size_kb: Option<f64>,
        /// Leave dirty pages in the cache at the end of the run.
        #[arg(long)]
        no_flush: bool,
        /// Text trace, one `page,R|W` per line. Overrides the generator.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        #[arg(long, default_value = "read-write-mix")]
        pattern: TracePattern,
        #[arg(long, default_value_t = 64.0)]
        working_set_mb: f64,
        #[arg(long, default_value_t = 4)]
        passes: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit t_s and t_w from ping-pong samples (CSV: msg_size_mb,elapsed_s).
    Calibrate {
        #[arg(long, value_name = "PATH")]
        samples: PathBuf,
    },
    /// Check the model against the built-in reference tables.
    Validate {
        /// Use this relative tolerance for every cell.
        #[arg(long)]
        tolerance_override: Option<f64>,
    },
}

fn parse_slow_link(s: &str) -> Result<(u64, u64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [sender, agg, factor] = parts.as_slice() else {
        return Err(format!("expected SENDER:AGG:FACTOR, got `{s}`"));
    };
    let sender = sender
        .parse()
        .map_err(|e| format!("sender `{sender}`: {e}"))?;
    let agg = agg
        .parse()
        .map_err(|e| format!("aggregator `{agg}`: {e}"))?;
    let factor = factor
        .parse()
        .map_err(|e| format!("factor `{factor}`: {e}"))?;
    Ok((sender, agg, factor))
}

/// Exit status and captured output of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const VALIDATION_FAILED: u8 = 2;
}

fn emit<R: Render>(report: &R, format: Format, out: &mut String) -> Result<(), UsageError> {
    out.push_str(&report.render(format).map_err(UsageError)?);
    Ok(())
}

/// Parses `args` (program name first) and runs the command.
pub fn execute<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome {
                    code: Outcome::USAGE,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Outcome {
                    code: Outcome::OK,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    let mut stdout = String::new();
    match run(cli, &mut stdout) {
        Ok(code) => Outcome {
            code,
            stdout,
            stderr: String::new(),
        },
        Err(UsageError(msg)) => Outcome {
            code: Outcome::USAGE,
            stdout: String::new(),
            stderr: format!("error: {msg}\n"),
        },
    }
}

fn run(cli: Cli, out: &mut String) -> Result<u8, UsageError> {
    let ctx = Context::load(cli.config.as_deref())?;
    let format = cli.format;
    match cli.command {
        Command::Profiles => emit(&commands::profiles(&ctx), format, out)?,
        Command::Predict {
            device,
            tau,
            t_other,
            pattern,
        } => {
            let report = commands::predict(
                &ctx,
                PredictArgs {
                    device: &device,
                    tau,
                    t_other,
                    individual_pattern: pattern.into(),
                },
            )?;
            emit(&report, format, out)?;
        }
        Command::Decide {
            device,
            tau,
            t_other_collective,
            t_other_individual,
        } => {
            let report =
                commands::decide_cmd(&ctx, &device, tau, t_other_collective, t_other_individual)?;
            emit(&report, format, out)?;
        }
        Command::Sweep {
            msg_sizes_kb,
            devices,
            tau,
            aggregators,
        } => emit(
            &commands::sweep(&ctx, &msg_sizes_kb, &devices, tau, aggregators)?,
            format,
            out,
        )?,
        Command::Simulate {
            device,
            strategy,
            tau,
            pattern,
            slow_link,
            seed,
        } => {
            let report = commands::simulate(
                &ctx,
                SimulateArgs {
                    device: &device,
                    tau,
                    individual: matches!(strategy, StrategyArg::Individual),
                    pattern: pattern.into(),
                    slow_links: &slow_link,
                    seed,
                },
            )?;
            emit(&report, format, out)?;
        }
        Command::CacheSim {
            devices,
            capacity_mb,
            page_size_kb,
            no_flush,
            trace,
            pattern,
            working_set_mb,
            passes,
            seed,
        } => {
            let report = commands::cache_sim(
                &ctx,
                CacheArgs {
                    devices: &devices,
                    capacities_mb: &capacity_mb,
                    page_size_kb,
                    no_flush,
                    trace_file: trace.as_deref(),
                    pattern,
                    working_set_mb,
                    passes,
                    seed,
                },
            )?;
            emit(&report, format, out)?;
        }
        Command::Calibrate { samples } => emit(&commands::calibrate(&samples)?, format, out)?,
        Command::Validate { tolerance_override } => {
            let report = commands::validate_cmd(tolerance_override)?;
            emit(&report, format, out)?;
            if !report.passed {
                return Ok(Outcome::VALIDATION_FAILED);
            }
        }
    }
    Ok(Outcome::OK)
}
