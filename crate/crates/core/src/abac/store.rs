use serde::{Deserialize, Serialize};

use super::policy::{check_policy, AbacPolicy, PolicySpec};
use crate::contracts::{is_admin, ContractError};
use crate::domain::Digest;
use crate::ledger::state::{keys, StateView, TxContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeletePolicyCause {
    AdminRequest,
    AutoExpired,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddPolicyArgs {
    pub policy: PolicySpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct UpdatePolicyArgs {
    pub policy_id: Digest,
    pub policy: PolicySpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DeletePolicyArgs {
    pub policy_id: Digest,
    pub cause: DeletePolicyCause,
}

fn require_admin<V: StateView>(view: &V, signer: &Digest) -> Result<(), ContractError> {
    if is_admin(view, signer) {
        Ok(())
    } else {
        Err(ContractError::NotAuthorized("policy changes are reserved to the administrator".into()))
    }
}

pub fn get_policy<V: StateView>(view: &V, id: &Digest) -> Option<AbacPolicy> {
    view.get_as(&keys::policy(id))
}

pub fn add_policy(ctx: &mut TxContext<'_>, spec: PolicySpec, signer: &Digest, now: u64) -> Result<Digest, ContractError> {
    require_admin(ctx, signer)?;
    check_policy(&spec, now).map_err(|e| ContractError::BadPolicy(e.0))?;
    let policy = AbacPolicy::from_spec(spec);
    if ctx.contains(&keys::policy(&policy.policy_id)) {
        return Err(ContractError::DuplicatePolicy(policy.policy_id));
    }
    ctx.put(keys::policy(&policy.policy_id), &policy);
    Ok(policy.policy_id)
}

/// Replaces a policy: the old record is removed and the new one added under
/// its own id, which changes whenever the matchers change.
pub fn update_policy(
    ctx: &mut TxContext<'_>,
    old_id: &Digest,
    spec: PolicySpec,
    signer: &Digest,
    now: u64,
) -> Result<Digest, ContractError> {
    require_admin(ctx, signer)?;
    if get_policy(ctx, old_id).is_none() {
        return Err(ContractError::NotFound(format!("policy {old_id}")));
    }
    check_policy(&spec, now).map_err(|e| ContractError::BadPolicy(e.0))?;
    let policy = AbacPolicy::from_spec(spec);
    if policy.policy_id != *old_id && ctx.contains(&keys::policy(&policy.policy_id)) {
        return Err(ContractError::DuplicatePolicy(policy.policy_id));
    }
    ctx.delete(keys::policy(old_id));
    ctx.put(keys::policy(&policy.policy_id), &policy);
    Ok(policy.policy_id)
}

/// Removes a policy. An `AutoExpired` deletion is valid only once the
/// policy's window has ended at the transaction's timestamp.
pub fn delete_policy(
    ctx: &mut TxContext<'_>,
    id: &Digest,
    cause: DeletePolicyCause,
    signer: &Digest,
    now: u64,
) -> Result<(), ContractError> {
    require_admin(ctx, signer)?;
    let policy = get_policy(ctx, id).ok_or_else(|| ContractError::NotFound(format!("policy {id}")))?;
    if cause == DeletePolicyCause::AutoExpired && !policy.expired_at(now) {
        return Err(ContractError::NotAuthorized("policy has not expired".into()));
    }
    ctx.delete(keys::policy(id));
    Ok(())
}
