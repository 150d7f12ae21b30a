//! Latency and throughput sweeps over a real node.
//!
//! Every request is executed for real; only time is simulated. Under the
//! simulated clock each committed block and each read is charged from a cost
//! model applied to what execution actually did (signature checks, read and
//! write set sizes, partitions merged), and a single committer and a single
//! query server process work in arrival order. Under the wall clock the same
//! schedule is charged with measured durations instead.

mod sim;
mod workload;

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::domain::Digest;
use crate::ledger::OrderingMode;
use crate::workflows::{Network, WorkflowError};

pub use sim::{Counting, SIM_EPOCH_MS};
use sim::Sim;
use workload::Workload;

/// A benchmark targets the operations of one contract family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractGroup {
    User,
    Fiproject,
    Policy,
    Checkaccess,
}

impl ContractGroup {
    pub const ALL: [ContractGroup; 4] =
        [ContractGroup::User, ContractGroup::Fiproject, ContractGroup::Policy, ContractGroup::Checkaccess];

    pub fn name(self) -> &'static str {
        match self {
            ContractGroup::User => "user",
            ContractGroup::Fiproject => "fiproject",
            ContractGroup::Policy => "policy",
            ContractGroup::Checkaccess => "checkaccess",
        }
    }

    /// Operations in the order a latency sweep runs them.
    pub fn ops(self) -> &'static [BenchOp] {
        match self {
            ContractGroup::User => &[BenchOp::Add, BenchOp::Query, BenchOp::Check],
            ContractGroup::Fiproject | ContractGroup::Policy => {
                &[BenchOp::Add, BenchOp::Update, BenchOp::Query, BenchOp::Delete]
            }
            ContractGroup::Checkaccess => &[BenchOp::Check],
        }
    }

    /// The operation a throughput sweep drives.
    pub fn load_op(self) -> BenchOp {
        match self {
            ContractGroup::Checkaccess => BenchOp::Check,
            _ => BenchOp::Add,
        }
    }
}

impl fmt::Display for ContractGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ContractGroup {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ContractGroup::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown contract group {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchOp {
    Add,
    Update,
    Query,
    Delete,
    Check,
}

impl BenchOp {
    pub fn name(self) -> &'static str {
        match self {
            BenchOp::Add => "add",
            BenchOp::Update => "update",
            BenchOp::Query => "query",
            BenchOp::Delete => "delete",
            BenchOp::Check => "check",
        }
    }

    /// Writes go through ordering and commit; the rest are answered from
    /// committed state.
    pub fn is_write(self) -> bool {
        matches!(self, BenchOp::Add | BenchOp::Update | BenchOp::Delete)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockKind {
    Simulated,
    Wall,
}

impl FromStr for ClockKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simulated" => Ok(ClockKind::Simulated),
            "wall" => Ok(ClockKind::Wall),
            _ => Err(BenchError::Config(format!("unknown clock {s:?}"))),
        }
    }
}

/// Simulated service times in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostModel {
    /// Fixed per-request handling.
    pub request_us: u64,
    pub signature_us: u64,
    pub read_us: u64,
    /// Per entry visited by a range scan, on top of one read.
    pub scan_entry_us: u64,
    pub write_us: u64,
    /// Per block: assembly, hashing, log append.
    pub block_us: u64,
    /// Per block and per partition when merging partitioned ordering.
    pub partition_us: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            request_us: 100,
            signature_us: 400,
            read_us: 60,
            scan_entry_us: 5,
            write_us: 250,
            block_us: 2000,
            partition_us: 150,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchConfig {
    pub group: ContractGroup,
    pub block_sizes: Vec<usize>,
    pub concurrency_levels: Vec<usize>,
    pub ordering: OrderingMode,
    pub requests_per_level: usize,
    pub clock: ClockKind,
    pub cost: CostModel,
    pub timeout_ms: u64,
    /// Gap between open-loop arrivals in a latency sweep.
    pub arrival_interval_ms: u64,
    /// Every n-th load request is a duplicate that commits as invalid.
    pub invalid_every: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            group: ContractGroup::Fiproject,
            block_sizes: vec![10, 50, 100, 200],
            concurrency_levels: (1..=10).map(|k| k * 50).collect(),
            ordering: OrderingMode::Solo,
            requests_per_level: 400,
            clock: ClockKind::Simulated,
            cost: CostModel::default(),
            timeout_ms: 2000,
            arrival_interval_ms: 4,
            invalid_every: 10,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |what: &str| Err(BenchError::Config(format!("{what} must be at least 1")));
        if self.block_sizes.is_empty() || self.block_sizes.contains(&0) {
            return bad("every block size");
        }
        if self.concurrency_levels.is_empty() || self.concurrency_levels.contains(&0) {
            return bad("every concurrency level");
        }
        if self.requests_per_level == 0 {
            return bad("requestsPerLevel");
        }
        if self.timeout_ms == 0 {
            return bad("timeoutMs");
        }
        if self.arrival_interval_ms == 0 {
            return bad("arrivalIntervalMs");
        }
        if self.invalid_every == 0 {
            return bad("invalidEvery");
        }
        if let OrderingMode::Kafka(0) = self.ordering {
            return bad("the partition count");
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One configuration point. `concurrency` is empty for open-loop latency rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub group: String,
    pub op: String,
    pub mode: String,
    pub block_size: usize,
    pub concurrency: Option<usize>,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub tps: f64,
    pub valid: usize,
    pub invalid: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
}

pub const CSV_HEADER: [&str; 10] =
    ["group", "op", "mode", "block_size", "concurrency", "mean_ms", "p95_ms", "tps", "valid", "invalid"];

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Latency statistics over per-request latencies in microseconds.
struct Sample {
    latencies_us: Vec<u64>,
    valid: usize,
    invalid: usize,
    elapsed_us: u64,
}

impl Sample {
    fn row(mut self, cfg: &BenchConfig, op: BenchOp, block_size: usize, concurrency: Option<usize>) -> BenchRow {
        self.latencies_us.sort_unstable();
        let n = self.latencies_us.len();
        let mean = self.latencies_us.iter().sum::<u64>() as f64 / n.max(1) as f64;
        let p95 = if n == 0 { 0 } else { self.latencies_us[(n * 95).div_ceil(100) - 1] };
        let tps = if self.elapsed_us == 0 { 0.0 } else { self.valid as f64 * 1e6 / self.elapsed_us as f64 };
        BenchRow {
            group: cfg.group.name().to_string(),
            op: op.name().to_string(),
            mode: cfg.ordering.to_string(),
            block_size,
            concurrency,
            mean_ms: round3(mean / 1000.0),
            p95_ms: round3(p95 as f64 / 1000.0),
            tps: round3(tps),
            valid: self.valid,
            invalid: self.invalid,
        }
    }
}

/// One latency point: a fresh network cut at `block_size`, then
/// `requestsPerLevel` open-loop requests of each of the group's operations.
/// Returns the rows and the network they ran on.
pub fn latency_point(cfg: &BenchConfig, block_size: usize) -> Result<(Vec<BenchRow>, Network), BenchError> {
    cfg.validate()?;
    let mut sim = Sim::new(cfg, block_size)?;
    let mut work = Workload::setup(cfg.group, &mut sim)?;
    sim.mark();
    let n = cfg.requests_per_level;
    let gap = cfg.arrival_interval_ms * 1000;
    let mut rows = Vec::new();
    for &op in cfg.group.ops() {
        let t0 = sim.idle_at();
        let mut sample = Sample { latencies_us: Vec::with_capacity(n), valid: 0, invalid: 0, elapsed_us: 0 };
        let mut last = t0;
        if op.is_write() {
            let mut ids = Vec::with_capacity(n);
            for i in 0..n {
                let at = t0 + i as u64 * gap;
                sim.advance_to(at)?;
                let tx = work.write(&mut sim, op, i)?;
                ids.push(sim.submit(tx, at)?);
            }
            sim.drain()?;
            for id in ids {
                let (submitted, finished, valid) = sim.outcome(&id);
                sample.latencies_us.push(finished - submitted);
                last = last.max(finished);
                if valid { sample.valid += 1 } else { sample.invalid += 1 }
            }
        } else {
            for i in 0..n {
                let at = t0 + i as u64 * gap;
                sim.advance_to(at)?;
                let (ok, finished) = work.read(&mut sim, op, i, at)?;
                sample.latencies_us.push(finished - at);
                last = last.max(finished);
                if ok { sample.valid += 1 } else { sample.invalid += 1 }
            }
        }
        sample.elapsed_us = last - t0;
        rows.push(sample.row(cfg, op, block_size, None));
    }
    Ok((rows, sim.into_network()))
}

/// Execution time per operation across `blockSizes`.
pub fn run_latency_sweep(cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &b in &cfg.block_sizes {
        rows.extend(latency_point(cfg, b)?.0);
    }
    Ok(BenchResult { rows })
}

/// One throughput point: `concurrency` closed-loop clients share
/// `requestsPerLevel` pre-signed requests; each client sends its next request
/// once the previous one is answered. Blocks are cut at the first configured
/// block size.
pub fn tps_point(cfg: &BenchConfig, concurrency: usize) -> Result<(BenchRow, Network), BenchError> {
    cfg.validate()?;
    let block_size = cfg.block_sizes[0];
    let mut sim = Sim::new(cfg, block_size)?;
    let mut work = Workload::setup(cfg.group, &mut sim)?;
    work.seed(&mut sim)?;
    sim.mark();
    let op = cfg.group.load_op();
    let t0 = sim.idle_at();
    sim.advance_to(t0)?;
    let requests = work.load(&mut sim, cfg.requests_per_level, cfg.invalid_every)?;

    let mut queues: Vec<VecDeque<usize>> = vec![Default::default(); concurrency];
    for j in 0..requests.len() {
        queues[j % concurrency].push_back(j);
    }
    // Per client: the request in flight, or the instant it may send again.
    let mut in_flight: Vec<Option<(usize, Digest)>> = vec![None; concurrency];
    let mut ready_at = vec![t0; concurrency];
    let mut sample = Sample { latencies_us: Vec::new(), valid: 0, invalid: 0, elapsed_us: 0 };
    let mut now = t0;
    let mut last = t0;
    let mut requests: Vec<Option<workload::Request>> = requests.into_iter().map(Some).collect();
    loop {
        sim.advance_to(now)?;
        for c in 0..concurrency {
            if let Some((_, id)) = in_flight[c] {
                if let Some((submitted, finished, valid)) = sim.try_outcome(&id) {
                    in_flight[c] = None;
                    ready_at[c] = finished;
                    sample.latencies_us.push(finished - submitted);
                    last = last.max(finished);
                    if valid { sample.valid += 1 } else { sample.invalid += 1 }
                }
            }
            if in_flight[c].is_some() || ready_at[c] > now {
                continue;
            }
            let Some(j) = queues[c].pop_front() else { continue };
            match requests[j].take().expect("each request is sent once") {
                workload::Request::Write(tx) => {
                    let id = sim.submit(tx, now)?;
                    in_flight[c] = Some((j, id));
                }
                workload::Request::Read(read) => {
                    let (ok, finished) = work.serve(&mut sim, read, now)?;
                    ready_at[c] = finished;
                    sample.latencies_us.push(finished - now);
                    last = last.max(finished);
                    if ok { sample.valid += 1 } else { sample.invalid += 1 }
                }
            }
        }
        // Newly committed requests are collected at the same instant;
        // otherwise time moves on a 1 ms grid to the next ready client or
        // batch timeout.
        if in_flight.iter().flatten().any(|(_, id)| sim.try_outcome(id).is_some()) {
            continue;
        }
        let next_ready = (0..concurrency)
            .filter(|&c| in_flight[c].is_none() && !queues[c].is_empty())
            .map(|c| ready_at[c])
            .min();
        match next_ready.into_iter().chain(sim.deadline_us()).min() {
            Some(t) => now = t.max(now + 1).div_ceil(1000) * 1000,
            None => break,
        }
    }
    sample.elapsed_us = last - t0;
    Ok((sample.row(cfg, op, block_size, Some(concurrency)), sim.into_network()))
}

/// Throughput across `concurrencyLevels` under the configured ordering mode.
pub fn run_tps_sweep(cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &c in &cfg.concurrency_levels {
        rows.push(tps_point(cfg, c)?.0);
    }
    Ok(BenchResult { rows })
}

/// Writes the header and one line per row.
pub fn write_csv<W: Write>(result: &BenchResult, out: W) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in &result.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(result: &BenchResult, path: &Path) -> Result<(), BenchError> {
    let file = std::fs::File::create(path)?;
    write_csv(result, std::io::BufWriter::new(file))
}

/// Coefficient of variation of the rows' throughput.
pub fn tps_cv(rows: &[BenchRow]) -> f64 {
    let n = rows.len() as f64;
    if rows.is_empty() {
        return 0.0;
    }
    let mean = rows.iter().map(|r| r.tps).sum::<f64>() / n;
    let var = rows.iter().map(|r| (r.tps - mean).powi(2)).sum::<f64>() / n;
    if mean == 0.0 { 0.0 } else { var.sqrt() / mean }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(group: ContractGroup) -> BenchConfig {
        BenchConfig {
            group,
            block_sizes: vec![5, 20],
            concurrency_levels: vec![10, 40],
            requests_per_level: 40,
            ..BenchConfig::default()
        }
    }

    #[test]
    fn zero_values_are_config_errors() {
        let cases = [
            BenchConfig { requests_per_level: 0, ..BenchConfig::default() },
            BenchConfig { block_sizes: vec![10, 0], ..BenchConfig::default() },
            BenchConfig { block_sizes: vec![], ..BenchConfig::default() },
            BenchConfig { concurrency_levels: vec![0], ..BenchConfig::default() },
            BenchConfig { ordering: OrderingMode::Kafka(0), ..BenchConfig::default() },
        ];
        for cfg in cases {
            assert!(matches!(run_latency_sweep(&cfg), Err(BenchError::Config(_))));
            assert!(matches!(run_tps_sweep(&cfg), Err(BenchError::Config(_))));
        }
    }

    #[test]
    fn empty_result_writes_header_only() {
        let mut out = Vec::new();
        write_csv(&BenchResult::default(), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "group,op,mode,block_size,concurrency,mean_ms,p95_ms,tps,valid,invalid\n");
    }

    #[test]
    fn every_group_runs_both_sweeps() {
        for group in ContractGroup::ALL {
            let cfg = small(group);
            let lat = run_latency_sweep(&cfg).unwrap();
            assert_eq!(lat.rows.len(), group.ops().len() * 2, "{group}");
            for row in &lat.rows {
                assert_eq!(row.valid + row.invalid, 40, "{group} {}", row.op);
                assert_eq!(row.invalid, 0, "{group} {}", row.op);
            }
            let tps = run_tps_sweep(&cfg).unwrap();
            for row in &tps.rows {
                assert_eq!(row.valid + row.invalid, 40);
                assert_eq!(row.invalid, 4, "{group}");
                assert!(row.tps > 0.0);
            }
        }
    }

    #[test]
    fn reads_never_reach_blocks() {
        for group in ContractGroup::ALL {
            let (_, net) = latency_point(&small(group), 5).unwrap();
            for block in net.node().blocks().iter().skip(1) {
                for tx in &block.txs {
                    let m: crate::contracts::Method = tx.invoked_op.parse().unwrap();
                    assert!(m.is_write(), "{group}: {} committed", tx.invoked_op);
                }
            }
        }
    }

    #[test]
    fn cv_of_constant_series_is_zero() {
        let row = |tps| BenchRow {
            group: "g".into(),
            op: "add".into(),
            mode: "solo".into(),
            block_size: 1,
            concurrency: Some(1),
            mean_ms: 0.0,
            p95_ms: 0.0,
            tps,
            valid: 0,
            invalid: 0,
        };
        assert_eq!(tps_cv(&[row(5.0), row(5.0)]), 0.0);
        assert!((tps_cv(&[row(1.0), row(3.0)]) - 0.5).abs() < 1e-12);
    }
}
