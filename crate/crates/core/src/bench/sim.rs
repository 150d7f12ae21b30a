use std::cell::Cell;
use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde_json::Value;

use super::{BenchConfig, BenchError, ClockKind, CostModel};
use crate::domain::Digest;
use crate::ledger::state::{StateView, WorldState};
use crate::ledger::{Block, Clock, CommitError, NodeError, OrderingMode, SimClock, Transaction};
use crate::workflows::{init_network, Network, NetworkConfig, WorkflowError};

/// Simulated time zero, in clock milliseconds.
pub const SIM_EPOCH_MS: u64 = 1_700_000_000_000;

/// A state view that counts what a read touches.
pub struct Counting<'a> {
    inner: &'a WorldState,
    pub gets: Cell<u64>,
    pub scans: Cell<u64>,
    pub scanned: Cell<u64>,
}

impl<'a> Counting<'a> {
    pub fn new(inner: &'a WorldState) -> Self {
        Counting { inner, gets: Cell::new(0), scans: Cell::new(0), scanned: Cell::new(0) }
    }
}

impl StateView for Counting<'_> {
    fn get(&self, key: &str) -> Option<Value> {
        self.gets.set(self.gets.get() + 1);
        self.inner.get(key)
    }

    fn scan(&self, prefix: &str) -> Vec<(String, Value)> {
        let out = self.inner.scan(prefix);
        self.scans.set(self.scans.get() + 1);
        self.scanned.set(self.scanned.get() + out.len() as u64);
        out
    }
}

fn commit_failed(e: CommitError) -> BenchError {
    WorkflowError::from(NodeError::from(e)).into()
}

/// A network whose clock only moves when the harness says so, with one
/// committer and one query server, each busy until its last job finishes.
/// Times are microseconds since [`SIM_EPOCH_MS`].
pub(super) struct Sim {
    net: Network,
    clock: SimClock,
    cost: CostModel,
    wall: bool,
    partitions: u64,
    now_us: u64,
    committer_free: u64,
    reader_free: u64,
    seen_height: u64,
    submitted: HashMap<Digest, u64>,
    finished: HashMap<Digest, (u64, bool)>,
}

impl Sim {
    pub fn new(cfg: &BenchConfig, block_size: usize) -> Result<Self, BenchError> {
        let clock = SimClock::starting_at(SIM_EPOCH_MS);
        let config = NetworkConfig {
            block_size,
            timeout_ms: cfg.timeout_ms,
            ordering: cfg.ordering,
            ..NetworkConfig::default()
        };
        let net = init_network(config, Arc::new(clock.clone()))?;
        let partitions = match cfg.ordering {
            OrderingMode::Solo => 0,
            OrderingMode::Kafka(p) => u64::from(p),
        };
        Ok(Sim {
            net,
            clock,
            cost: cfg.cost,
            wall: cfg.clock == ClockKind::Wall,
            partitions,
            now_us: 0,
            committer_free: 0,
            reader_free: 0,
            seen_height: 0,
            submitted: HashMap::new(),
            finished: HashMap::new(),
        })
    }

    pub fn net(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn into_network(self) -> Network {
        self.net
    }

    /// Blocks committed so far are setup and are not timed.
    pub fn mark(&mut self) {
        self.seen_height = self.net.node().height();
    }

    /// First whole millisecond at which both servers are idle.
    pub fn idle_at(&self) -> u64 {
        self.now_us.max(self.committer_free).max(self.reader_free).div_ceil(1000) * 1000
    }

    fn set_time(&mut self, us: u64) {
        self.now_us = self.now_us.max(us);
        self.clock.set(SIM_EPOCH_MS + self.now_us / 1000);
    }

    pub fn deadline_us(&self) -> Option<u64> {
        self.net.node().deadline_ms().map(|ms| ms.saturating_sub(SIM_EPOCH_MS) * 1000)
    }

    /// Moves time to `t`, firing every batch timeout on the way.
    pub fn advance_to(&mut self, t: u64) -> Result<(), BenchError> {
        while let Some(due) = self.deadline_us() {
            let due = due.max(self.now_us);
            if due > t {
                break;
            }
            self.set_time(due);
            let started = Instant::now();
            self.net.node_mut().tick().map_err(commit_failed)?;
            self.absorb(due, started.elapsed());
        }
        self.set_time(t);
        Ok(())
    }

    /// Submits `tx` arriving at `at`; any block it completes is committed.
    pub fn submit(&mut self, tx: Transaction, at: u64) -> Result<Digest, BenchError> {
        self.advance_to(at)?;
        let id = tx.tx_id;
        self.submitted.insert(id, at);
        let started = Instant::now();
        self.net.node_mut().submit(tx).map_err(WorkflowError::from)?;
        self.absorb(at, started.elapsed());
        Ok(id)
    }

    /// Runs until nothing is pending.
    pub fn drain(&mut self) -> Result<(), BenchError> {
        while let Some(due) = self.deadline_us() {
            self.advance_to(due.max(self.now_us))?;
        }
        Ok(())
    }

    /// Submission time, commit-finish time and validity of a committed tx.
    pub fn try_outcome(&self, id: &Digest) -> Option<(u64, u64, bool)> {
        let (finished, valid) = *self.finished.get(id)?;
        Some((self.submitted[id], finished, valid))
    }

    pub fn outcome(&self, id: &Digest) -> (u64, u64, bool) {
        self.try_outcome(id).expect("transaction committed")
    }

    /// Answers a read arriving at `at` from committed state; returns its
    /// result and the instant the answer leaves the query server.
    pub fn read<T>(&mut self, at: u64, f: impl FnOnce(&Counting<'_>, u64) -> T) -> Result<(T, u64), BenchError> {
        self.advance_to(at)?;
        let now = self.clock.now_secs();
        let view = Counting::new(self.net.node().state());
        let started = Instant::now();
        let out = f(&view, now);
        let cost = if self.wall {
            started.elapsed().as_micros() as u64
        } else {
            let c = &self.cost;
            c.request_us
                + c.signature_us
                + (view.gets.get() + view.scans.get()) * c.read_us
                + view.scanned.get() * c.scan_entry_us
        };
        let finish = at.max(self.reader_free) + cost;
        self.reader_free = finish;
        Ok((out, finish))
    }

    fn block_cost(&self, block: &Block) -> u64 {
        let c = &self.cost;
        let txs: u64 = block
            .results
            .iter()
            .map(|r| {
                c.request_us + c.signature_us + r.read_set.len() as u64 * c.read_us + r.write_set.len() as u64 * c.write_us
            })
            .sum();
        c.block_us + self.partitions * c.partition_us + txs
    }

    /// Schedules blocks cut at `cut` on the committer. Under the wall clock
    /// the measured time of the call that cut them is split evenly.
    fn absorb(&mut self, cut: u64, measured: Duration) {
        let tip = self.net.node().height();
        if tip <= self.seen_height {
            return;
        }
        let fresh = tip - self.seen_height;
        let mut finished = Vec::new();
        for block in &self.net.node().blocks()[(self.seen_height + 1) as usize..=tip as usize] {
            let cost = if self.wall { measured.as_micros() as u64 / fresh } else { self.block_cost(block) };
            let start = cut.max(self.committer_free);
            self.committer_free = start + cost;
            finished.extend(block.txs.iter().zip(&block.results).map(|(tx, r)| (tx.tx_id, (start + cost, r.valid))));
        }
        self.finished.extend(finished);
        self.seen_height = tip;
    }
}
