//! Deterministic execution of ordered blocks against a world state.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::block::{Block, TxResult, WriteDigest};
use super::state::{keys, TxContext, WorldState, WriteEntry};
use super::tx::{Transaction, GENESIS_OP};
use crate::contracts::{self, parse_args, user::CreateUserArgs, ContractError, Method};
use crate::domain::{Digest, PublicKey};
use crate::identity::{authenticate, verify_envelope, Certificate, IdentityDirectory, Role};

/// Arguments of the genesis transaction, signed by the administrator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GenesisArgs {
    pub ca_root: PublicKey,
    pub admin: Digest,
    pub admin_certificate: Certificate,
}

/// Why a transaction was flagged invalid at commit.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TxRejection {
    #[error("unknown operation {0:?}")]
    UnknownOp(String),
    #[error("{0} is read-only")]
    ReadOnly(String),
    #[error("transaction id does not match its contents")]
    BadTxId,
    #[error("duplicate transaction {0}")]
    DuplicateTxId(Digest),
    #[error("envelope payload does not match the invocation")]
    BadPayload,
    #[error("genesis transaction outside the genesis block")]
    BadGenesis,
    #[error(transparent)]
    Contract(#[from] ContractError),
}

impl TxRejection {
    pub fn code(&self) -> &'static str {
        match self {
            TxRejection::UnknownOp(_) => "UnknownOp",
            TxRejection::ReadOnly(_) => "ReadOnly",
            TxRejection::BadTxId => "BadTxId",
            TxRejection::DuplicateTxId(_) => "DuplicateTxId",
            TxRejection::BadPayload => "BadPayload",
            TxRejection::BadGenesis => "BadGenesis",
            TxRejection::Contract(e) => e.code(),
        }
    }
}

/// Runs one transaction against `state` without applying it.
pub fn simulate(state: &WorldState, tx: &Transaction, genesis: bool) -> Result<(TxResult, Vec<WriteEntry>), TxRejection> {
    if !tx.id_valid() {
        return Err(TxRejection::BadTxId);
    }
    if !tx.payload_matches() {
        return Err(TxRejection::BadPayload);
    }
    let mut ctx = TxContext::new(state);
    let output = if tx.invoked_op == GENESIS_OP {
        if !genesis {
            return Err(TxRejection::BadGenesis);
        }
        run_genesis(&mut ctx, tx)?
    } else {
        let method: Method = tx.invoked_op.parse().map_err(|_| TxRejection::UnknownOp(tx.invoked_op.clone()))?;
        if !method.is_write() {
            return Err(TxRejection::ReadOnly(tx.invoked_op.clone()));
        }
        authenticate_tx(&ctx, tx, method)?;
        contracts::execute(method, &tx.args, tx.signer(), tx.timestamp(), &mut ctx)?
    };
    let (reads, writes) = ctx.finish();
    let result = TxResult {
        valid: true,
        code: None,
        message: None,
        output,
        read_set: reads,
        write_set: writes.iter().map(|w| WriteDigest { key: w.key.clone(), value_digest: w.value_digest() }).collect(),
    };
    Ok((result, writes))
}

/// Signature and certificate checks at the transaction's own timestamp. A
/// registration presents its certificate in the arguments; everyone else
/// must already hold one on chain.
fn authenticate_tx(ctx: &TxContext<'_>, tx: &Transaction, method: Method) -> Result<(), ContractError> {
    if method == Method::CreateUser {
        let args: CreateUserArgs = parse_args(&tx.args)?;
        let root = ctx.ca_root().ok_or(crate::identity::IdentityError::BadSignature)?;
        if !verify_envelope(&tx.envelope, &args.certificate, &root, tx.timestamp()) {
            return Err(crate::identity::IdentityError::BadSignature.into());
        }
        return Ok(());
    }
    authenticate(&tx.envelope, ctx, tx.timestamp())?;
    Ok(())
}

fn run_genesis(ctx: &mut TxContext<'_>, tx: &Transaction) -> Result<Value, ContractError> {
    let args: GenesisArgs = parse_args(&tx.args)?;
    let cert = &args.admin_certificate;
    if cert.subject_user_number != args.admin
        || cert.subject_type != Role::Admin
        || tx.signer() != args.admin
        || !verify_envelope(&tx.envelope, cert, &args.ca_root, tx.timestamp())
    {
        return Err(ContractError::NotAuthorized("genesis must be signed by the certified administrator".into()));
    }
    ctx.put(keys::CA_ROOT.to_string(), &args.ca_root);
    ctx.put(keys::ADMIN.to_string(), &args.admin);
    ctx.put(keys::cert(&args.admin), cert);
    Ok(json!({ "admin": args.admin }))
}

/// Executes every transaction of `block` in order, applying valid ones to
/// `state`. Returns the per-transaction results and the applied writes in
/// application order.
pub fn execute_block(state: &mut WorldState, block: &Block, seen: &mut HashSet<Digest>) -> (Vec<TxResult>, Vec<WriteEntry>) {
    let mut results = Vec::with_capacity(block.txs.len());
    let mut applied = Vec::new();
    for tx in &block.txs {
        let outcome = if !seen.insert(tx.tx_id) {
            Err(TxRejection::DuplicateTxId(tx.tx_id))
        } else {
            simulate(state, tx, block.height == 0)
        };
        match outcome {
            Ok((result, writes)) => {
                state.apply(&writes);
                applied.extend(writes);
                results.push(result);
            }
            Err(e) => results.push(TxResult::invalid(e.code(), e.to_string())),
        }
    }
    state.last_committed_height = Some(block.height);
    (results, applied)
}
