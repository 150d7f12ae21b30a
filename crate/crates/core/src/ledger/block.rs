use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::state::ReadEntry;
use super::tx::Transaction;
use crate::domain::{canonical_encode, canonical_json, Digest};

/// Binary Merkle root over `leaves`. Odd levels duplicate their last node,
/// a single leaf is its own root and the empty tree is all zeros.
pub fn merkle_root(leaves: &[Digest]) -> Digest {
    if leaves.is_empty() {
        return Digest::ZERO;
    }
    let mut level = leaves.to_vec();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| {
                let right = pair.get(1).unwrap_or(&pair[0]);
                Digest::of_parts(&[pair[0].as_bytes(), right.as_bytes()])
            })
            .collect();
    }
    level[0]
}

/// A key written by a transaction and the digest of the written value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct WriteDigest {
    pub key: String,
    pub value_digest: Digest,
}

/// Commit outcome of one transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TxResult {
    pub valid: bool,
    pub code: Option<String>,
    pub message: Option<String>,
    pub output: Value,
    pub read_set: Vec<ReadEntry>,
    pub write_set: Vec<WriteDigest>,
}

impl TxResult {
    pub fn invalid(code: &str, message: String) -> Self {
        TxResult {
            valid: false,
            code: Some(code.to_string()),
            message: Some(message),
            output: Value::Null,
            read_set: Vec::new(),
            write_set: Vec::new(),
        }
    }
}

/// A block as ordered and, once committed, with per-transaction results.
///
/// `blockHash` covers the header; `commitHash` chains each block's results
/// onto the previous block's `commitHash`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Block {
    pub height: u64,
    pub prev_hash: Digest,
    pub tx_root: Digest,
    pub timestamp: u64,
    pub block_hash: Digest,
    pub txs: Vec<Transaction>,
    pub results: Vec<TxResult>,
    pub commit_hash: Digest,
}

impl Block {
    /// An ordered, not yet committed block.
    pub fn assemble(height: u64, prev_hash: Digest, timestamp: u64, txs: Vec<Transaction>) -> Self {
        let tx_root = merkle_root(&txs.iter().map(|t| t.tx_id).collect::<Vec<_>>());
        let block_hash = header_hash(height, &prev_hash, &tx_root, timestamp);
        Block { height, prev_hash, tx_root, timestamp, block_hash, txs, results: Vec::new(), commit_hash: Digest::ZERO }
    }

    pub fn compute_hash(&self) -> Digest {
        header_hash(self.height, &self.prev_hash, &self.tx_root, self.timestamp)
    }

    pub fn compute_tx_root(&self) -> Digest {
        merkle_root(&self.txs.iter().map(|t| t.tx_id).collect::<Vec<_>>())
    }

    pub fn compute_commit_hash(&self, prev_commit: &Digest) -> Digest {
        commit_hash(prev_commit, &self.block_hash, &self.results)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        canonical_json(self)
    }
}

pub fn header_hash(height: u64, prev_hash: &Digest, tx_root: &Digest, timestamp: u64) -> Digest {
    Digest::of(&canonical_encode(
        "block",
        &[
            ("height", &height.to_be_bytes()),
            ("prevHash", prev_hash.as_bytes()),
            ("txRoot", tx_root.as_bytes()),
            ("timestamp", &timestamp.to_be_bytes()),
        ],
    ))
}

pub fn commit_hash(prev_commit: &Digest, block_hash: &Digest, results: &[TxResult]) -> Digest {
    Digest::of(&canonical_encode(
        "commit",
        &[
            ("prev", prev_commit.as_bytes()),
            ("blockHash", block_hash.as_bytes()),
            ("results", &canonical_json(results)),
        ],
    ))
}
