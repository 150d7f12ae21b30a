use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::domain::{canonical_json, canonical_json_value, Digest};
use crate::identity::{KeyPair, Nonce, SignedEnvelope};

/// Operation name of the single transaction in the genesis block.
pub const GENESIS_OP: &str = "Genesis";

/// A signed contract invocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Transaction {
    pub tx_id: Digest,
    pub invoked_op: String,
    pub args: Value,
    pub envelope: SignedEnvelope,
}

/// What the envelope payload must contain for a given invocation.
pub fn payload_for(op: &str, args: &Value) -> String {
    String::from_utf8(canonical_json_value(&json!({ "method": op, "args": args }))).expect("UTF-8")
}

impl Transaction {
    pub fn new(op: &str, args: Value, envelope: SignedEnvelope) -> Self {
        let mut tx = Transaction { tx_id: Digest::ZERO, invoked_op: op.to_string(), args, envelope };
        tx.tx_id = tx.compute_id();
        tx
    }

    /// Signs `op(args)` as `signer` and wraps it.
    pub fn sign(keys: &KeyPair, signer: Digest, op: &str, args: Value, nonce: Nonce, timestamp: u64) -> Self {
        let env = SignedEnvelope::sign(keys, signer, payload_for(op, &args), nonce, timestamp);
        Transaction::new(op, args, env)
    }

    /// Digest of the canonical transaction without its id.
    pub fn compute_id(&self) -> Digest {
        #[derive(Serialize)]
        #[serde(rename_all = "camelCase")]
        struct Body<'a> {
            invoked_op: &'a str,
            args: &'a Value,
            envelope: &'a SignedEnvelope,
        }
        Digest::of(&canonical_json(&Body { invoked_op: &self.invoked_op, args: &self.args, envelope: &self.envelope }))
    }

    pub fn id_valid(&self) -> bool {
        self.compute_id() == self.tx_id
    }

    /// The envelope signs exactly this invocation.
    pub fn payload_matches(&self) -> bool {
        self.envelope.payload == payload_for(&self.invoked_op, &self.args)
    }

    pub fn signer(&self) -> Digest {
        self.envelope.signer_user_number
    }

    pub fn timestamp(&self) -> u64 {
        self.envelope.timestamp
    }
}
