//! User management: registration and lookup.

use serde::{Deserialize, Serialize};

use super::ContractError;
use crate::domain::{Digest, PublicKey, User, UserType};
use crate::identity::{Certificate, IdentityDirectory, Role};
use crate::ledger::state::{keys, StateView, TxContext};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateUserArgs {
    pub user_name: String,
    pub user_type: UserType,
    pub pub_key: PublicKey,
    /// CA-issued certificate for the derived user number.
    pub certificate: Certificate,
}

/// Registers a user. The caller signs with the key being registered, so the
/// envelope signer must equal the derived user number.
pub fn create_user(
    ctx: &mut TxContext<'_>,
    args: &CreateUserArgs,
    signer: Digest,
    now: u64,
) -> Result<User, ContractError> {
    let user = User::new(&args.user_name, args.user_type, &args.pub_key.0)?;
    let n = user.user_number;
    let cert = &args.certificate;
    let root = ctx
        .ca_root()
        .ok_or_else(|| ContractError::NotAuthorized("network has no CA root".into()))?;
    if cert.subject_user_number != n
        || cert.pub_key != user.pub_key
        || cert.subject_type != Role::from(user.user_type)
    {
        return Err(ContractError::NotAuthorized("certificate does not match the registration".into()));
    }
    if !cert.verify_issuer(&root) || !cert.valid_at(now) {
        return Err(ContractError::NotAuthorized("certificate not valid".into()));
    }
    if signer != n {
        return Err(ContractError::NotAuthorized("registration must be signed by the registered key".into()));
    }
    if ctx.contains(&keys::user_name(&user.user_name)) || ctx.contains(&keys::user(&n)) {
        return Err(ContractError::AlreadyExists(format!("user {:?}", user.user_name)));
    }
    ctx.put(keys::user(&n), &user);
    ctx.put(keys::cert(&n), cert);
    ctx.put(keys::user_name(&user.user_name), &n);
    Ok(user)
}

/// Looks a user up by user number or by name. Read-only.
pub fn query_user<V: StateView>(view: &V, key: &str) -> Result<User, ContractError> {
    if let Ok(n) = key.parse::<Digest>() {
        if let Some(u) = view.get_as(&keys::user(&n)) {
            return Ok(u);
        }
    }
    view.get_as::<Digest>(&keys::user_name(key))
        .and_then(|n| view.get_as(&keys::user(&n)))
        .ok_or_else(|| ContractError::NotFound(format!("user {key:?}")))
}
