//! Whole-chain verification from a raw log image.

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use super::block::Block;
use super::exec::execute_block;
use super::log::{decode_block, frames};
use super::state::WorldState;
use crate::domain::{Digest, IndexViolation};

/// The first problem found, located by block height where possible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Violation {
    Format { detail: String },
    NonCanonical { frame: usize },
    BrokenChainLink { height: u64 },
    HeightMismatch { frame: usize, height: u64 },
    BlockHashMismatch { height: u64 },
    TxRootMismatch { height: u64 },
    TxIdMismatch { height: u64, index: usize },
    ResultCountMismatch { height: u64 },
    CommitHashMismatch { height: u64 },
    ResultMismatch { height: u64, index: usize },
    Index { violation: IndexViolation },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Format { detail } => write!(f, "malformed log: {detail}"),
            Violation::NonCanonical { frame } => write!(f, "frame {frame} is not in canonical form"),
            Violation::BrokenChainLink { height } => write!(f, "broken link at height {height}"),
            Violation::HeightMismatch { frame, height } => write!(f, "frame {frame} claims height {height}"),
            Violation::BlockHashMismatch { height } => write!(f, "block hash mismatch at height {height}"),
            Violation::TxRootMismatch { height } => write!(f, "txRoot mismatch at height {height}"),
            Violation::TxIdMismatch { height, index } => write!(f, "txId mismatch at height {height}, tx {index}"),
            Violation::ResultCountMismatch { height } => write!(f, "result count mismatch at height {height}"),
            Violation::CommitHashMismatch { height } => write!(f, "commit hash mismatch at height {height}"),
            Violation::ResultMismatch { height, index } => {
                write!(f, "replay disagrees with recorded result at height {height}, tx {index}")
            }
            Violation::Index { violation } => write!(f, "index integrity: {violation}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditReport {
    pub blocks: usize,
    pub txs: usize,
    pub violation: Option<Violation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violation.is_none()
    }
}

/// Structural pass: framing, canonical form, hash links, header hashes,
/// transaction ids, Merkle roots and the commit-hash chain. Stops at the
/// first violation.
pub fn verify_structure(image: &[u8]) -> Result<Vec<Block>, Violation> {
    let frames = frames(image).map_err(|e| Violation::Format { detail: e.to_string() })?;
    let mut blocks: Vec<Block> = Vec::with_capacity(frames.len());
    let mut prev_commit = Digest::ZERO;
    for (i, frame) in frames.into_iter().enumerate() {
        let block = decode_block(frame, i).map_err(|e| Violation::Format { detail: e.to_string() })?;
        if block.to_bytes() != frame {
            return Err(Violation::NonCanonical { frame: i });
        }
        let h = block.height;
        let expected_prev = blocks.last().map_or(Digest::ZERO, |b| b.block_hash);
        if block.prev_hash != expected_prev {
            return Err(Violation::BrokenChainLink { height: h });
        }
        if h != i as u64 {
            return Err(Violation::HeightMismatch { frame: i, height: h });
        }
        let ids: Vec<Digest> = block.txs.iter().map(|t| t.compute_id()).collect();
        if super::block::merkle_root(&ids) != block.tx_root {
            return Err(Violation::TxRootMismatch { height: h });
        }
        if let Some(index) = block.txs.iter().zip(&ids).position(|(t, id)| t.tx_id != *id) {
            return Err(Violation::TxIdMismatch { height: h, index });
        }
        if block.compute_hash() != block.block_hash {
            return Err(Violation::BlockHashMismatch { height: h });
        }
        if block.results.len() != block.txs.len() {
            return Err(Violation::ResultCountMismatch { height: h });
        }
        if block.compute_commit_hash(&prev_commit) != block.commit_hash {
            return Err(Violation::CommitHashMismatch { height: h });
        }
        prev_commit = block.commit_hash;
        blocks.push(block);
    }
    Ok(blocks)
}

/// Replay pass: re-executes every block from an empty state, compares each
/// result with the recorded one, then audits the index relations of the
/// final state.
pub fn verify_replay(blocks: &[Block]) -> Result<WorldState, Violation> {
    let mut state = WorldState::default();
    let mut seen = HashSet::new();
    for block in blocks {
        let (results, _) = execute_block(&mut state, block, &mut seen);
        if let Some(index) = results.iter().zip(&block.results).position(|(a, b)| a != b) {
            return Err(Violation::ResultMismatch { height: block.height, index });
        }
    }
    if let Some(v) = state.audit_indexes().into_iter().next() {
        return Err(Violation::Index { violation: v });
    }
    Ok(state)
}

pub fn audit_image(image: &[u8]) -> AuditReport {
    let mut report = AuditReport { blocks: 0, txs: 0, violation: None };
    match verify_structure(image) {
        Err(v) => report.violation = Some(v),
        Ok(blocks) => {
            report.blocks = blocks.len();
            report.txs = blocks.iter().map(|b| b.txs.len()).sum();
            report.violation = verify_replay(&blocks).err();
        }
    }
    report
}
