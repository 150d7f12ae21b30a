//! Business-flow memos: goods movement, receivable documents, deposits and
//! similar events recorded on chain without a state change.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{to_json, ContractError};
use crate::domain::{Digest, User};
use crate::ledger::state::{keys, StateView, TxContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemoKind {
    DeliveryNote,
    ArdIssuance,
    ArdAssignment,
    CreditFacility,
    Pledge,
    PurchaseAgreement,
    Repayment,
    PurchaseContract,
    Deposit,
    DeliveryNotice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Memo {
    pub kind: MemoKind,
    pub from: Digest,
    pub to: Digest,
    /// Document or asset reference, e.g. a receivable or contract id.
    pub reference: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amount: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fi_project_id: Option<Digest>,
}

/// Accepts a memo signed by its sender when both ends are registered users.
pub fn record_memo(ctx: &mut TxContext<'_>, memo: &Memo, signer: Digest) -> Result<Value, ContractError> {
    if memo.from != signer {
        return Err(ContractError::NotAuthorized("memo must be signed by its sender".into()));
    }
    for end in [memo.from, memo.to] {
        if ctx.get_as::<User>(&keys::user(&end)).is_none() {
            return Err(ContractError::NotFound(format!("user {end}")));
        }
    }
    if memo.reference.is_empty() {
        return Err(ContractError::BadArgs("memo reference must not be empty".into()));
    }
    Ok(to_json(memo))
}
