use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use nvmio_lab::commnet::{
    fit_comm_params, read_samples_csv, CalibrationSample, CommFit, CommParams,
};
use nvmio_lab::config::LabConfig;
use nvmio_lab::costmodel::{
    collective_time, decide, individual_time, tradeoff_sweep, CostBreakdown, Decision, Strategy,
    TradeoffRow,
};
use nvmio_lab::devices::{builtin_profiles, AccessPattern, DeviceProfile, MemoryProfile};
use nvmio_lab::fixtures::{builtin_fixtures, validate, CellStatus, Preset, ValidationReport};
use nvmio_lab::simulator::{
    simulate_collective, simulate_individual, simulate_page_cache, PageCacheConfig,
    PageCacheReport, SimConfig, SimReport,
};
use nvmio_lab::workload::{
    derive_schedule, generate_trace, total_data, IoTrace, TracePattern, TransferSchedule,
    WorkloadSpec,
};
use serde::Serialize;

use crate::render::{num, pct, secs, table, Render};

/// Anything that ends the run with exit status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl From<nvmio_lab::Error> for UsageError {
    fn from(e: nvmio_lab::Error) -> Self {
        UsageError(e.to_string())
    }
}

pub struct Context {
    pub config: LabConfig,
}

impl Context {
    pub fn load(path: Option<&Path>) -> Result<Self, UsageError> {
        let config = match path {
            Some(p) => {
                LabConfig::load(p).map_err(|e| UsageError(format!("{}: {e}", p.display())))?
            }
            None => LabConfig::default(),
        };
        Ok(Self { config })
    }

    /// A device from the config's `[device]` section or a builtin profile.
    pub fn device(&self, name: &str) -> Result<DeviceProfile, UsageError> {
        if let Some(d) = &self.config.device {
            if d.name().eq_ignore_ascii_case(name) {
                return Ok(d.clone());
            }
        }
        Ok(builtin_profiles().device(name)?.clone())
    }

    pub fn devices(&self, names: &[String]) -> Result<Vec<DeviceProfile>, UsageError> {
        names.iter().map(|n| self.device(n)).collect()
    }

    pub fn comm(&self) -> CommParams {
        self.config
            .comm
            .unwrap_or_else(CommParams::reference_platform)
    }

    /// Workload from the config, else the 4-node preset. The shuffle fraction
    /// is `tau`, else the config's override, else the preset's value or the
    /// estimator for configured workloads.
    pub fn workload(
        &self,
        tau: Option<f64>,
    ) -> Result<(WorkloadSpec, TransferSchedule), UsageError> {
        let (spec, tau) = match &self.config.workload {
            Some(spec) => (spec.clone(), tau.or(self.config.tau_override)),
            None => {
                let preset = Preset::four_node();
                (preset.workload, Some(tau.unwrap_or(preset.tau)))
            }
        };
        let schedule = derive_schedule(&spec, tau)?;
        Ok((spec, schedule))
    }
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct ProfilesReport {
    pub devices: Vec<DeviceProfile>,
    pub memory: MemoryProfile,
}

impl Render for ProfilesReport {
    fn table(&self) -> String {
        let mut rows = self.csv_rows();
        rows.push(vec![
            "DRAM (page cache)".into(),
            num(self.memory.read_bw()),
            num(self.memory.write_bw()),
        ]);
        table(&["device", "seq/read MB/s", "random/write MB/s"], &rows)
    }

    fn csv_header(&self) -> Vec<&'static str> {
        vec!["device", "bdw_seq_mbps", "bdw_ran_mbps"]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.devices
            .iter()
            .map(|d| vec![d.name().to_string(), num(d.bdw_seq()), num(d.bdw_ran())])
            .collect()
    }
}

pub fn profiles(ctx: &Context) -> ProfilesReport {
    let builtins = builtin_profiles();
    let mut devices = builtins.devices;
    devices.extend(ctx.config.device.clone());
    ProfilesReport {
        devices,
        memory: builtins.memory,
    }
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct StrategyCost {
    pub device: String,
    pub strategy: Strategy,
    pub breakdown: CostBreakdown,
}

#[derive(Serialize)]
pub struct PredictReport {
    pub schedule: TransferSchedule,
    pub costs: Vec<StrategyCost>,
}

fn cost_rows(costs: &[StrategyCost]) -> Vec<Vec<String>> {
    costs
        .iter()
        .map(|c| {
            vec![
                c.device.clone(),
                format!("{:?}", c.strategy),
                num(c.breakdown.t_comm),
                num(c.breakdown.t_io),
                num(c.breakdown.t_other),
                num(c.breakdown.total),
            ]
        })
        .collect()
}

const COST_HEADER: [&str; 6] = [
    "device",
    "strategy",
    "t_comm_s",
    "t_io_s",
    "t_other_s",
    "total_s",
];

impl Render for PredictReport {
    fn table(&self) -> String {
        let s = &self.schedule;
        let mut out = format!(
            "schedule: iter {} x {} MB, tau {}, {} aggregators, {} MB total\n\n",
            s.iter, s.msg_size, s.tau, s.aggregators, s.total_data
        );
        let rows: Vec<Vec<String>> = cost_rows(&self.costs)
            .into_iter()
            .map(|r| {
                let mut r = r;
                for v in &mut r[2..] {
                    *v = secs(v.parse().unwrap_or(f64::NAN));
                }
                r
            })
            .collect();
        out.push_str(&table(&COST_HEADER, &rows));
        out
    }

    fn csv_header(&self) -> Vec<&'static str> {
        COST_HEADER.to_vec()
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        cost_rows(&self.costs)
    }
}

pub struct PredictArgs<'a> {
    pub device: &'a str,
    pub tau: Option<f64>,
    pub t_other: f64,
    pub individual_pattern: AccessPattern,
}

pub fn predict(ctx: &Context, args: PredictArgs<'_>) -> Result<PredictReport, UsageError> {
    let device = ctx.device(args.device)?;
    let (_, schedule) = ctx.workload(args.tau)?;
    let coll = collective_time(&schedule, &ctx.comm(), &device, args.t_other)?;
    let indiv = individual_time(
        schedule.total_data,
        &device,
        args.individual_pattern,
        args.t_other,
    )?;
    let costs = vec![
        StrategyCost {
            device: device.name().to_string(),
            strategy: Strategy::Collective,
            breakdown: coll,
        },
        StrategyCost {
            device: device.name().to_string(),
            strategy: Strategy::Individual,
            breakdown: indiv,
        },
    ];
    Ok(PredictReport { schedule, costs })
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct DecideReport {
    pub device: String,
    pub decision: Decision,
}

impl Render for DecideReport {
    fn table(&self) -> String {
        let d = &self.decision;
        format!(
            "{}: {:?}\n  collective {} s, individual {} s, benefit {} s\n",
            self.device,
            d.strategy,
            secs(d.t_collective),
            secs(d.t_individual),
            secs(d.benefit)
        )
    }

    fn csv_header(&self) -> Vec<&'static str> {
        vec![
            "device",
            "strategy",
            "t_collective_s",
            "t_individual_s",
            "benefit_s",
        ]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        let d = &self.decision;
        vec![vec![
            self.device.clone(),
            format!("{:?}", d.strategy),
            num(d.t_collective),
            num(d.t_individual),
            num(d.benefit),
        ]]
    }
}

pub fn decide_cmd(
    ctx: &Context,
    device: &str,
    tau: Option<f64>,
    t_other_coll: f64,
    t_other_indiv: f64,
) -> Result<DecideReport, UsageError> {
    let device = ctx.device(device)?;
    let (_, schedule) = ctx.workload(tau)?;
    let decision = decide(
        &schedule,
        schedule.total_data,
        &ctx.comm(),
        &device,
        t_other_coll,
        t_other_indiv,
    )?;
    Ok(DecideReport {
        device: device.name().to_string(),
        decision,
    })
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct SweepReport {
    pub tau: f64,
    pub aggregators: u64,
    pub rows: Vec<TradeoffRow>,
}

impl Render for SweepReport {
    fn table(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.device.clone(),
                    format!("{:.4}", r.msg_size),
                    format!("{:.6}", r.shuffle_cost),
                    format!("{:.6}", r.benefit),
                    if r.shuffle_pays_off() { "yes" } else { "no" }.into(),
                ]
            })
            .collect();
        format!(
            "one iteration, tau {}, {} aggregators\n\n{}",
            self.tau,
            self.aggregators,
            table(
                &[
                    "device",
                    "msg MB",
                    "shuffle s",
                    "benefit s",
                    "collective pays off"
                ],
                &rows
            )
        )
    }

    fn csv_header(&self) -> Vec<&'static str> {
        vec![
            "device",
            "msg_size_mb",
            "shuffle_cost_s",
            "benefit_s",
            "collective_pays_off",
        ]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.device.clone(),
                    num(r.msg_size),
                    num(r.shuffle_cost),
                    num(r.benefit),
                    r.shuffle_pays_off().to_string(),
                ]
            })
            .collect()
    }
}

pub fn sweep(
    ctx: &Context,
    msg_sizes_kb: &[f64],
    devices: &[String],
    tau: f64,
    aggregators: u64,
) -> Result<SweepReport, UsageError> {
    let devices = ctx.devices(devices)?;
    let sizes: Vec<f64> = msg_sizes_kb.iter().map(|kb| kb / 1024.0).collect();
    // Devices are independent; evaluate them concurrently.
    let per_device: Vec<Result<Vec<TradeoffRow>, nvmio_lab::Error>> = std::thread::scope(|scope| {
        let handles: Vec<_> = devices
            .iter()
            .map(|d| {
                let sizes = &sizes;
                let comm = ctx.comm();
                scope.spawn(move || {
                    tradeoff_sweep(sizes, &comm, std::slice::from_ref(d), tau, aggregators)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    let mut rows = Vec::new();
    for r in per_device {
        rows.extend(r?);
    }
    Ok(SweepReport {
        tau,
        aggregators,
        rows,
    })
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct SimulateReport {
    pub report: SimReport,
    /// Closed-form total for the same inputs (homogeneous part only).
    pub analytic_total: f64,
}

impl Render for SimulateReport {
    fn table(&self) -> String {
        let r = &self.report;
        let rows: Vec<Vec<String>> = r
            .timelines
            .iter()
            .map(|t| {
                let shuffle: f64 = t.iterations.iter().map(|i| i.shuffle_time).sum();
                let io: f64 = t.iterations.iter().map(|i| i.io_time).sum();
                vec![
                    t.rank.to_string(),
                    t.iterations.len().to_string(),
                    secs(shuffle),
                    secs(io),
                    secs(t.total),
                ]
            })
            .collect();
        let mut out = format!("{:?} I/O on {}\n\n", r.strategy, r.device);
        out.push_str(&table(
            &["rank", "iterations", "shuffle s", "io s", "total s"],
            &rows,
        ));
        out.push_str(&format!(
            "\nmakespan {} s (model {} s), shuffle share {}\n",
            secs(r.makespan),
            secs(self.analytic_total),
            pct(r.shuffle_ratio)
        ));
        out
    }

    fn csv_header(&self) -> Vec<&'static str> {
        vec!["aggregator", "iteration", "shuffle_s", "io_s"]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.report
            .timelines
            .iter()
            .flat_map(|t| {
                t.iterations.iter().enumerate().map(move |(i, rec)| {
                    vec![
                        t.rank.to_string(),
                        i.to_string(),
                        num(rec.shuffle_time),
                        num(rec.io_time),
                    ]
                })
            })
            .collect()
    }
}

pub struct SimulateArgs<'a> {
    pub device: &'a str,
    pub tau: Option<f64>,
    pub individual: bool,
    pub pattern: AccessPattern,
    /// (sender rank, aggregator rank, t_w multiplier)
    pub slow_links: &'a [(u64, u64, f64)],
    pub seed: u64,
}

pub fn simulate(ctx: &Context, args: SimulateArgs<'_>) -> Result<SimulateReport, UsageError> {
    let device = ctx.device(args.device)?;
    let (spec, schedule) = ctx.workload(args.tau)?;
    if args.individual {
        let total = total_data(&spec)?;
        let report = simulate_individual(total, spec.processes(), &device, args.pattern)?;
        let analytic_total = individual_time(total, &device, args.pattern, 0.0)?.total;
        return Ok(SimulateReport {
            report,
            analytic_total,
        });
    }
    let comm = ctx.comm();
    let analytic_total = collective_time(&schedule, &comm, &device, 0.0)?.total;
    let mut config = SimConfig::homogeneous(schedule, comm, device, (&spec).into());
    config.direction = spec.direction;
    config.seed = args.seed;
    for &(sender, aggregator, factor) in args.slow_links {
        config
            .link_overrides
            .insert((sender, aggregator), comm.with_scaled_t_w(factor)?);
    }
    let report = simulate_collective(&config)?;
    Ok(SimulateReport {
        report,
        analytic_total,
    })
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct CacheRun {
    pub device: String,
    pub capacity_mb: f64,
    pub result: PageCacheReport,
    /// Elapsed time over the same device's run at the largest capacity.
    pub slowdown: f64,
}

#[derive(Serialize)]
pub struct CacheReport {
    pub pattern: String,
    pub working_set_mb: f64,
    pub page_size_kb: f64,
    pub accesses: usize,
    pub runs: Vec<CacheRun>,
}

impl Render for CacheReport {
    fn table(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .runs
            .iter()
            .map(|r| {
                vec![
                    r.device.clone(),
                    num(r.capacity_mb),
                    r.result.hits.to_string(),
                    r.result.misses.to_string(),
                    r.result.writebacks.to_string(),
                    format!("{:.4}", r.result.elapsed),
                    format!("{:.2}x", r.slowdown),
                ]
            })
            .collect();
        format!(
            "{} over {} MB in {} KB pages, {} accesses\n\n{}",
            self.pattern,
            self.working_set_mb,
            self.page_size_kb,
            self.accesses,
            table(
                &[
                    "device",
                    "cache MB",
                    "hits",
                    "misses",
                    "writebacks",
                    "elapsed s",
                    "slowdown"
                ],
                &rows
            )
        )
    }

    fn csv_header(&self) -> Vec<&'static str> {
        vec![
            "device",
            "capacity_mb",
            "hits",
            "misses",
            "evictions",
            "writebacks",
            "flushed",
            "elapsed_s",
            "slowdown",
        ]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.runs
            .iter()
            .map(|r| {
                vec![
                    r.device.clone(),
                    num(r.capacity_mb),
                    r.result.hits.to_string(),
                    r.result.misses.to_string(),
                    r.result.evictions.to_string(),
                    r.result.writebacks.to_string(),
                    r.result.flushed.to_string(),
                    num(r.result.elapsed),
                    num(r.slowdown),
                ]
            })
            .collect()
    }
}

pub struct CacheArgs<'a> {
    pub devices: &'a [String],
    pub capacities_mb: &'a [f64],
    pub page_size_kb: Option<f64>,
    pub no_flush: bool,
    pub trace_file: Option<&'a Path>,
    pub pattern: TracePattern,
    pub working_set_mb: f64,
    pub passes: u32,
    pub seed: u64,
}

pub fn cache_sim(ctx: &Context, args: CacheArgs<'_>) -> Result<CacheReport, UsageError> {
    let configured = ctx.config.cache;
    let page_size_kb = args
        .page_size_kb
        .or(configured.map(|c| c.page_size_kb))
        .unwrap_or(4.0);
    let flush = !args.no_flush && configured.is_none_or(|c| c.flush_at_end);
    let capacities: Vec<f64> = if args.capacities_mb.is_empty() {
        vec![configured.map(|c| c.capacity_mb).ok_or_else(|| {
            UsageError("no cache capacity: pass --capacity-mb or a [cache] section".into())
        })?]
    } else {
        args.capacities_mb.to_vec()
    };

    let (trace, pattern) = match args.trace_file {
        Some(path) => {
            let file =
                File::open(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
            let trace = IoTrace::read_text(BufReader::new(file), page_size_kb)
                .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
            (trace, path.display().to_string())
        }
        None => (
            generate_trace(
                args.pattern,
                args.working_set_mb,
                page_size_kb,
                args.passes,
                args.seed,
            )?,
            args.pattern.to_string(),
        ),
    };

    let memory = MemoryProfile::dram();
    let largest = capacities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut runs = Vec::new();
    for device in ctx.devices(args.devices)? {
        let mut device_runs = Vec::new();
        for &cap in &capacities {
            let cfg = PageCacheConfig::new(cap, page_size_kb, flush)?;
            let result = simulate_page_cache(&trace, &cfg, &device, &memory)?;
            device_runs.push((cap, result));
        }
        let baseline = device_runs
            .iter()
            .find(|(cap, _)| *cap == largest)
            .map(|(_, r)| r.elapsed)
            .unwrap_or(f64::NAN);
        runs.extend(device_runs.into_iter().map(|(cap, result)| CacheRun {
            device: device.name().to_string(),
            capacity_mb: cap,
            slowdown: result.elapsed / baseline,
            result,
        }));
    }
    Ok(CacheReport {
        pattern,
        working_set_mb: trace.working_set_mb,
        page_size_kb,
        accesses: trace.records.len(),
        runs,
    })
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct CalibrateReport {
    pub samples: Vec<CalibrationSample>,
    pub fit: CommFit,
}

impl Render for CalibrateReport {
    fn table(&self) -> String {
        let p = &self.fit.params;
        let mut out = format!(
            "t_s = {:.6e} s, t_w = {:.6e} s/MB, rmse = {:.3e} s over {} samples\n",
            p.t_s(),
            p.t_w(),
            self.fit.rmse,
            self.samples.len()
        );
        for w in &self.fit.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out.push('\n');
        let rows: Vec<Vec<String>> = self
            .csv_rows()
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|v| v.parse::<f64>().map_or(v, |x| format!("{x:.6}")))
                    .collect()
            })
            .collect();
        out.push_str(&table(
            &["msg MB", "elapsed s", "predicted s", "residual s"],
            &rows,
        ));
        out
    }

    fn csv_header(&self) -> Vec<&'static str> {
        vec!["msg_size_mb", "elapsed_s", "predicted_s", "residual_s"]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.samples
            .iter()
            .zip(&self.fit.residuals)
            .map(|(s, r)| vec![num(s.msg_size), num(s.elapsed), num(s.elapsed - r), num(*r)])
            .collect()
    }
}

pub fn calibrate(path: &Path) -> Result<CalibrateReport, UsageError> {
    let file = File::open(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    let samples =
        read_samples_csv(file).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    let fit = fit_comm_params(&samples)?;
    Ok(CalibrateReport { samples, fit })
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct ValidateReport {
    #[serde(flatten)]
    pub inner: ValidationReport,
    pub passed: bool,
}

impl Render for ValidateReport {
    fn table(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .inner
            .cells
            .iter()
            .map(|c| {
                vec![
                    c.id.to_string(),
                    format!("{:.2}", c.computed),
                    format!("{:.2}", c.reference),
                    pct(c.rel_error),
                    pct(c.tolerance),
                    match c.status {
                        CellStatus::Pass => "pass".into(),
                        CellStatus::Fail => "FAIL".into(),
                        CellStatus::Flagged => "flagged".into(),
                    },
                    c.provenance.to_string(),
                ]
            })
            .collect();
        let mut out = table(
            &[
                "cell",
                "computed",
                "reference",
                "error",
                "tolerance",
                "status",
                "source",
            ],
            &rows,
        );
        for c in self.inner.cells.iter().filter(|c| c.note.is_some()) {
            out.push_str(&format!("note {}: {}\n", c.id, c.note.unwrap_or_default()));
        }
        out.push_str(&format!(
            "\n{} cells, {} failed, {} flagged; model vs measured: max {}, mean {}\n{}\n",
            self.inner.cells.len(),
            self.inner.failed,
            self.inner.flagged,
            pct(self.inner.max_measured_error),
            pct(self.inner.mean_measured_error),
            if self.passed { "PASS" } else { "FAIL" }
        ));
        out
    }

    fn csv_header(&self) -> Vec<&'static str> {
        vec![
            "fixture",
            "cell",
            "device",
            "kind",
            "computed",
            "reference",
            "rel_error",
            "tolerance",
            "status",
            "provenance",
            "note",
        ]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.inner
            .cells
            .iter()
            .map(|c| {
                vec![
                    c.fixture.to_string(),
                    c.id.to_string(),
                    c.device.to_string(),
                    format!("{:?}", c.kind),
                    num(c.computed),
                    num(c.reference),
                    num(c.rel_error),
                    num(c.tolerance),
                    format!("{:?}", c.status),
                    c.provenance.to_string(),
                    c.note.unwrap_or_default().to_string(),
                ]
            })
            .collect()
    }
}

pub fn validate_cmd(tolerance_override: Option<f64>) -> Result<ValidateReport, UsageError> {
    let inner = validate(&builtin_fixtures(), tolerance_override)?;
    Ok(ValidateReport {
        passed: inner.passed(),
        inner,
    })
}
