//! A single-process ledger node: ordering, commit onto replicated peers and
//! the on-disk block log.

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::audit::{audit_image, AuditReport};
use super::block::{Block, TxResult};
use super::clock::Clock;
use super::exec::{execute_block, simulate, TxRejection};
use super::lifecycle::{Lifecycle, LifecycleError};
use super::log::{encode_log, BlockLog, LogError};
use super::ordering::{Orderer, OrderingMode};
use super::state::WorldState;
use super::tx::Transaction;
use crate::contracts::{user::CreateUserArgs, Method};
use crate::domain::Digest;
use crate::identity::{authenticate, verify_envelope, IdentityDirectory, IdentityError};

/// Simulated network shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Topology {
    pub state_dbs: usize,
    pub cas: usize,
    pub peers: usize,
    pub orderers: usize,
    pub clients: usize,
}

impl Default for Topology {
    fn default() -> Self {
        Topology { state_dbs: 4, cas: 2, peers: 4, orderers: 1, clients: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeConfig {
    pub block_size: usize,
    pub timeout_ms: u64,
    pub ordering: OrderingMode,
    pub topology: Topology,
    pub log_path: Option<PathBuf>,
}

impl Default for NodeConfig {
    fn default() -> Self {
        NodeConfig { block_size: 10, timeout_ms: 2000, ordering: OrderingMode::Solo, topology: Topology::default(), log_path: None }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum NodeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Commit(#[from] CommitError),
    #[error("genesis transaction rejected: {0}")]
    BadGenesis(String),
    #[error("log replay diverged at height {0}")]
    ReplayDivergence(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubmitError {
    #[error("unknown operation {0:?}")]
    UnknownOp(String),
    #[error("{0} is read-only and is never ordered")]
    ReadOnly(String),
    #[error("transaction id does not match its contents")]
    BadTxId,
    #[error("duplicate transaction {0}")]
    DuplicateTxId(Digest),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Lifecycle(#[from] LifecycleError),
    #[error("commit failed: {0}")]
    Commit(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommitError {
    #[error("block {height} does not extend the tip")]
    BrokenChainLink { height: u64 },
    #[error("expected height {expected}, got {got}")]
    HeightMismatch { expected: u64, got: u64 },
    #[error("txRoot mismatch in block {height}")]
    TxRootMismatch { height: u64 },
    #[error("block hash mismatch in block {height}")]
    BlockHashMismatch { height: u64 },
    #[error("txId mismatch in block {height}")]
    TxIdMismatch { height: u64 },
    #[error("log append failed: {0}")]
    Log(String),
}

pub struct Node {
    config: NodeConfig,
    clock: Arc<dyn Clock>,
    peers: Vec<WorldState>,
    lifecycle: Lifecycle,
    orderer: Orderer,
    blocks: Vec<Block>,
    tx_index: HashMap<Digest, (u64, usize)>,
    pending_ids: HashSet<Digest>,
    log: Option<BlockLog>,
}

impl Node {
    fn empty(config: NodeConfig, clock: Arc<dyn Clock>) -> Result<Self, NodeError> {
        if config.block_size == 0 {
            return Err(NodeError::Config("block size must be at least 1".into()));
        }
        if config.topology.peers == 0 {
            return Err(NodeError::Config("at least one peer is required".into()));
        }
        let mut lifecycle = Lifecycle::new(config.topology.peers);
        lifecycle.deploy_all();
        Ok(Node {
            orderer: Orderer::new(config.ordering, config.block_size, config.timeout_ms),
            peers: vec![WorldState::default(); config.topology.peers],
            lifecycle,
            blocks: Vec::new(),
            tx_index: HashMap::new(),
            pending_ids: HashSet::new(),
            log: None,
            clock,
            config,
        })
    }

    /// Starts a new chain whose height-0 block holds `genesis`.
    pub fn create(config: NodeConfig, clock: Arc<dyn Clock>, genesis: Transaction) -> Result<Self, NodeError> {
        let mut node = Node::empty(config, clock)?;
        if let Some(path) = &node.config.log_path {
            node.log = Some(BlockLog::create(path)?);
        }
        let block = Block::assemble(0, Digest::ZERO, node.clock.now_secs(), vec![genesis]);
        node.commit_block(block)?;
        let result = &node.blocks[0].results[0];
        if !result.valid {
            return Err(NodeError::BadGenesis(result.message.clone().unwrap_or_default()));
        }
        Ok(node)
    }

    /// Rebuilds a node from its existing log.
    pub fn open(config: NodeConfig, clock: Arc<dyn Clock>) -> Result<Self, NodeError> {
        let path = config.log_path.clone().ok_or_else(|| NodeError::Config("no log path".into()))?;
        let (log, recorded) = BlockLog::open(&path)?;
        let mut node = Node::from_blocks(config, clock, &recorded)?;
        node.log = Some(log);
        Ok(node)
    }

    /// Re-executes recorded blocks from genesis. Every block must reproduce
    /// its recorded results exactly.
    pub fn from_blocks(config: NodeConfig, clock: Arc<dyn Clock>, recorded: &[Block]) -> Result<Self, NodeError> {
        let mut node = Node::empty(config, clock)?;
        for rec in recorded {
            let mut ordered = rec.clone();
            ordered.results.clear();
            ordered.commit_hash = Digest::ZERO;
            node.commit_block(ordered)?;
            if node.blocks.last() != Some(rec) {
                return Err(NodeError::ReplayDivergence(rec.height));
            }
        }
        Ok(node)
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Committed state as seen by the executing peer.
    pub fn state(&self) -> &WorldState {
        &self.peers[0]
    }

    pub fn peer_states(&self) -> &[WorldState] {
        &self.peers
    }

    pub fn lifecycle(&self) -> &Lifecycle {
        &self.lifecycle
    }

    pub fn lifecycle_mut(&mut self) -> &mut Lifecycle {
        &mut self.lifecycle
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn height(&self) -> u64 {
        self.blocks.last().map_or(0, |b| b.height)
    }

    pub fn pending(&self) -> usize {
        self.orderer.pending()
    }

    pub fn ordering(&self) -> OrderingMode {
        self.orderer.mode()
    }

    /// Where a committed transaction sits: (height, index in block).
    pub fn locate(&self, tx_id: &Digest) -> Option<(u64, usize)> {
        self.tx_index.get(tx_id).copied()
    }

    pub fn result_of(&self, tx_id: &Digest) -> Option<&TxResult> {
        let (h, i) = self.locate(tx_id)?;
        self.blocks.get(h as usize).and_then(|b| b.results.get(i))
    }

    /// Admission checks: known write method, deployed chaincode, intact id,
    /// valid signature, not seen before. Accepted transactions are queued
    /// and any full batch is committed immediately.
    pub fn submit(&mut self, tx: Transaction) -> Result<Digest, SubmitError> {
        let method: Method = tx.invoked_op.parse().map_err(|_| SubmitError::UnknownOp(tx.invoked_op.clone()))?;
        if !method.is_write() {
            return Err(SubmitError::ReadOnly(tx.invoked_op.clone()));
        }
        self.lifecycle.running_version(method.chaincode(), 0)?;
        if !tx.id_valid() {
            return Err(SubmitError::BadTxId);
        }
        if self.tx_index.contains_key(&tx.tx_id) || self.pending_ids.contains(&tx.tx_id) {
            return Err(SubmitError::DuplicateTxId(tx.tx_id));
        }
        if !tx.payload_matches() {
            return Err(IdentityError::BadSignature.into());
        }
        self.check_signature(&tx, method)?;
        let id = tx.tx_id;
        self.pending_ids.insert(id);
        let batches = self.orderer.enqueue(tx, self.clock.now_ms());
        self.commit_batches(batches).map_err(|e| SubmitError::Commit(e.to_string()))?;
        Ok(id)
    }

    fn check_signature(&self, tx: &Transaction, method: Method) -> Result<(), IdentityError> {
        let state = self.state();
        if method == Method::CreateUser {
            let args: CreateUserArgs = serde_json::from_value(tx.args.clone()).map_err(|_| IdentityError::BadSignature)?;
            let root = state.ca_root().ok_or(IdentityError::BadSignature)?;
            return if verify_envelope(&tx.envelope, &args.certificate, &root, tx.timestamp()) {
                Ok(())
            } else {
                Err(IdentityError::BadSignature)
            };
        }
        authenticate(&tx.envelope, state, tx.timestamp()).map(|_| ())
    }

    /// Executes `tx` against the committed state without ordering it.
    pub fn endorse(&self, tx: &Transaction) -> Result<TxResult, TxRejection> {
        if self.tx_index.contains_key(&tx.tx_id) || self.pending_ids.contains(&tx.tx_id) {
            return Err(TxRejection::DuplicateTxId(tx.tx_id));
        }
        simulate(self.state(), tx, false).map(|(r, _)| r)
    }

    /// Cuts a block if the batch timeout has elapsed. Returns committed heights.
    pub fn tick(&mut self) -> Result<Vec<u64>, CommitError> {
        let now = self.clock.now_ms();
        let batches: Vec<_> = self.orderer.tick(now).into_iter().collect();
        self.commit_batches(batches)
    }

    /// Commits everything pending regardless of the timer.
    pub fn flush(&mut self) -> Result<Vec<u64>, CommitError> {
        let batches = self.orderer.flush(self.clock.now_ms());
        self.commit_batches(batches)
    }

    /// Instant (ms) at which the pending batch times out.
    pub fn deadline_ms(&self) -> Option<u64> {
        self.orderer.deadline()
    }

    fn commit_batches(&mut self, batches: Vec<Vec<Transaction>>) -> Result<Vec<u64>, CommitError> {
        let mut heights = Vec::new();
        for txs in batches {
            let tip = self.blocks.last().expect("genesis committed first");
            let block = Block::assemble(tip.height + 1, tip.block_hash, self.clock.now_secs(), txs);
            heights.push(self.commit_block(block)?);
        }
        Ok(heights)
    }

    /// Verifies that `block` extends the tip, executes it on the first peer,
    /// replicates the writes, appends it to the log and returns its height.
    pub fn commit_block(&mut self, mut block: Block) -> Result<u64, CommitError> {
        let (expected, prev, prev_commit) = match self.blocks.last() {
            Some(b) => (b.height + 1, b.block_hash, b.commit_hash),
            None => (0, Digest::ZERO, Digest::ZERO),
        };
        let h = block.height;
        if block.prev_hash != prev {
            return Err(CommitError::BrokenChainLink { height: h });
        }
        if h != expected {
            return Err(CommitError::HeightMismatch { expected, got: h });
        }
        if block.txs.iter().any(|t| !t.id_valid()) {
            return Err(CommitError::TxIdMismatch { height: h });
        }
        if block.compute_tx_root() != block.tx_root {
            return Err(CommitError::TxRootMismatch { height: h });
        }
        if block.compute_hash() != block.block_hash {
            return Err(CommitError::BlockHashMismatch { height: h });
        }
        let mut seen: HashSet<Digest> =
            block.txs.iter().map(|t| t.tx_id).filter(|id| self.tx_index.contains_key(id)).collect();
        let (results, writes) = execute_block(&mut self.peers[0], &block, &mut seen);
        for peer in &mut self.peers[1..] {
            peer.apply(&writes);
            peer.last_committed_height = Some(h);
        }
        block.results = results;
        block.commit_hash = block.compute_commit_hash(&prev_commit);
        if let Some(log) = &mut self.log {
            log.append(&block).map_err(|e| CommitError::Log(e.to_string()))?;
        }
        for (i, tx) in block.txs.iter().enumerate() {
            self.pending_ids.remove(&tx.tx_id);
            self.tx_index.entry(tx.tx_id).or_insert((h, i));
        }
        self.blocks.push(block);
        Ok(h)
    }

    /// The chain as a log image, byte-identical to the on-disk log.
    pub fn log_image(&self) -> Vec<u8> {
        encode_log(&self.blocks)
    }

    pub fn audit(&self) -> AuditReport {
        audit_image(&self.log_image())
    }
}
