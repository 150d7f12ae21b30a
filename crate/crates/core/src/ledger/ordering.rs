use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::tx::Transaction;

/// How submitted transactions are sequenced into blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OrderingMode {
    /// A single FIFO queue.
    Solo,
    /// `P` partitions chosen by `txId mod P`, merged round-robin.
    Kafka(u32),
}

impl OrderingMode {
    pub fn partitions(self) -> usize {
        match self {
            OrderingMode::Solo => 1,
            OrderingMode::Kafka(p) => p as usize,
        }
    }
}

impl fmt::Display for OrderingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderingMode::Solo => f.write_str("solo"),
            OrderingMode::Kafka(p) => write!(f, "kafka:{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("ordering mode must be \"solo\" or \"kafka:P\" with P >= 1, got {0:?}")]
pub struct BadOrderingMode(pub String);

impl FromStr for OrderingMode {
    type Err = BadOrderingMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BadOrderingMode(s.to_string());
        match s.split_once(':') {
            None if s == "solo" => Ok(OrderingMode::Solo),
            Some(("kafka", p)) => match p.parse::<u32>() {
                Ok(p) if p >= 1 => Ok(OrderingMode::Kafka(p)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

impl Serialize for OrderingMode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OrderingMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Batches transactions: a block is cut once `block_size` are pending, or
/// when the oldest pending transaction has waited `timeout_ms`.
#[derive(Debug, Clone)]
pub struct Orderer {
    mode: OrderingMode,
    block_size: usize,
    timeout_ms: u64,
    /// Per partition: (offset within the partition, transaction).
    partitions: Vec<VecDeque<(u64, Transaction)>>,
    next_offset: Vec<u64>,
    pending: usize,
    waiting_since: Option<u64>,
}

impl Orderer {
    pub fn new(mode: OrderingMode, block_size: usize, timeout_ms: u64) -> Self {
        assert!(block_size >= 1, "block size must be at least 1");
        let p = mode.partitions();
        Orderer {
            mode,
            block_size,
            timeout_ms,
            partitions: vec![VecDeque::new(); p],
            next_offset: vec![0; p],
            pending: 0,
            waiting_since: None,
        }
    }

    pub fn mode(&self) -> OrderingMode {
        self.mode
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn timeout_ms(&self) -> u64 {
        self.timeout_ms
    }

    pub fn pending(&self) -> usize {
        self.pending
    }

    pub fn is_pending(&self, tx_id: &crate::domain::Digest) -> bool {
        self.partitions.iter().flatten().any(|(_, t)| t.tx_id == *tx_id)
    }

    /// Queues `tx`; returns any batches that became full.
    pub fn enqueue(&mut self, tx: Transaction, now_ms: u64) -> Vec<Vec<Transaction>> {
        let p = tx.tx_id.mod_u64(self.partitions.len() as u64) as usize;
        let offset = self.next_offset[p];
        self.next_offset[p] += 1;
        self.partitions[p].push_back((offset, tx));
        self.pending += 1;
        self.waiting_since.get_or_insert(now_ms);
        let mut out = Vec::new();
        while self.pending >= self.block_size {
            out.push(self.take(self.block_size, now_ms));
        }
        out
    }

    /// Cuts a partial batch if the oldest pending transaction timed out.
    pub fn tick(&mut self, now_ms: u64) -> Option<Vec<Transaction>> {
        match self.waiting_since {
            Some(since) if self.pending > 0 && now_ms.saturating_sub(since) >= self.timeout_ms => {
                Some(self.take(self.pending.min(self.block_size), now_ms))
            }
            _ => None,
        }
    }

    /// Instant at which [`Orderer::tick`] would next cut, if anything is pending.
    pub fn deadline(&self) -> Option<u64> {
        self.waiting_since.filter(|_| self.pending > 0).map(|s| s + self.timeout_ms)
    }

    /// Cuts everything pending regardless of the timer.
    pub fn flush(&mut self, now_ms: u64) -> Vec<Vec<Transaction>> {
        let mut out = Vec::new();
        while self.pending > 0 {
            out.push(self.take(self.pending.min(self.block_size), now_ms));
        }
        out
    }

    /// Merges `n` transactions: repeatedly the partition head with the least
    /// (partition offset, partition index).
    fn take(&mut self, n: usize, now_ms: u64) -> Vec<Transaction> {
        let mut batch = Vec::with_capacity(n);
        while batch.len() < n {
            let (idx, _) = self
                .partitions
                .iter()
                .enumerate()
                .filter_map(|(i, q)| q.front().map(|(off, _)| (i, (*off, i))))
                .min_by_key(|(_, key)| *key)
                .expect("pending count matches queue contents");
            let (_, tx) = self.partitions[idx].pop_front().expect("non-empty");
            batch.push(tx);
        }
        self.pending -= n;
        self.waiting_since = (self.pending > 0).then_some(now_ms);
        batch
    }
}
