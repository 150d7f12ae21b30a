//! Contract methods executed against the world state.
//!
//! Write methods run inside block commit through [`execute`]; read methods are
//! served from committed snapshots and never enter the ordering queue.

pub mod fiproject;
pub mod memo;
pub mod user;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::abac;
use crate::domain::{Digest, DomainError};
use crate::identity::IdentityError;
use crate::ledger::state::{keys, StateView, TxContext};

/// Chaincode packages; each method belongs to exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chaincode {
    User,
    Fiproject,
    Abac,
    Scf,
}

impl Chaincode {
    pub const ALL: [Chaincode; 4] = [Chaincode::User, Chaincode::Fiproject, Chaincode::Abac, Chaincode::Scf];

    pub fn name(self) -> &'static str {
        match self {
            Chaincode::User => "user",
            Chaincode::Fiproject => "fiproject",
            Chaincode::Abac => "abac",
            Chaincode::Scf => "scf",
        }
    }
}

macro_rules! methods {
    ($($variant:ident => $chaincode:ident, $write:expr;)*) => {
        /// Contract methods by wire name.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Method { $($variant,)* }

        impl Method {
            pub const ALL: &'static [Method] = &[$(Method::$variant,)*];

            pub fn name(self) -> &'static str {
                match self { $(Method::$variant => stringify!($variant),)* }
            }

            pub fn chaincode(self) -> Chaincode {
                match self { $(Method::$variant => Chaincode::$chaincode,)* }
            }

            /// Whether the method mutates state and therefore goes through ordering.
            pub fn is_write(self) -> bool {
                match self { $(Method::$variant => $write,)* }
            }
        }
    };
}

methods! {
    CreateUser => User, true;
    QueryUser => User, false;
    CheckUser => User, false;
    AddFiProject => Fiproject, true;
    QueryFiProject => Fiproject, false;
    UpdateFiProject => Fiproject, true;
    DeleteFiProject => Fiproject, true;
    CheckFiProject => Fiproject, false;
    AddPolicy => Abac, true;
    QueryPolicy => Abac, false;
    UpdatePolicy => Abac, true;
    DeletePolicy => Abac, true;
    CheckAccess => Abac, false;
    RecordMemo => Scf, true;
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown method {0:?}")]
pub struct UnknownMethod(pub String);

impl FromStr for Method {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| UnknownMethod(s.to_string()))
    }
}

/// Why a contract call failed. `code()` is the stable identifier recorded on
/// chain for invalid transactions.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContractError {
    #[error("malformed arguments: {0}")]
    BadArgs(String),
    #[error("user name must not be empty")]
    EmptyName,
    #[error("bad key: {0}")]
    BadKey(String),
    #[error("{0} already exists")]
    AlreadyExists(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0} matches more than one record")]
    Ambiguous(String),
    #[error("BadFP: {0}")]
    BadFp(String),
    #[error("project is {0}, not Active")]
    Frozen(String),
    #[error("field {0} may not be updated")]
    IllegalField(String),
    #[error("illegal value: {0}")]
    IllegalValue(String),
    #[error("requester is not a party to the project")]
    NotParty,
    #[error("not authorized: {0}")]
    NotAuthorized(String),
    #[error("BadPolicy: {0}")]
    BadPolicy(String),
    #[error("policy {0} already exists")]
    DuplicatePolicy(Digest),
    #[error("access denied: {0}")]
    AccessDenied(String),
    #[error(transparent)]
    Identity(#[from] IdentityError),
}

impl ContractError {
    pub fn code(&self) -> &'static str {
        match self {
            ContractError::BadArgs(_) => "BadArgs",
            ContractError::EmptyName => "EmptyName",
            ContractError::BadKey(_) => "BadKey",
            ContractError::AlreadyExists(_) => "AlreadyExists",
            ContractError::NotFound(_) => "NotFound",
            ContractError::Ambiguous(_) => "Ambiguous",
            ContractError::BadFp(_) => "BadFP",
            ContractError::Frozen(_) => "Frozen",
            ContractError::IllegalField(_) => "IllegalField",
            ContractError::IllegalValue(_) => "IllegalValue",
            ContractError::NotParty => "NotParty",
            ContractError::NotAuthorized(_) => "NotAuthorized",
            ContractError::BadPolicy(_) => "BadPolicy",
            ContractError::DuplicatePolicy(_) => "DuplicatePolicy",
            ContractError::AccessDenied(_) => "AccessDenied",
            ContractError::Identity(IdentityError::UnknownUser(_)) => "UnknownUser",
            ContractError::Identity(IdentityError::TypeMismatch { .. }) => "TypeMismatch",
            ContractError::Identity(IdentityError::ExpiredCertificate) => "ExpiredCertificate",
            ContractError::Identity(_) => "BadSignature",
        }
    }
}

impl From<DomainError> for ContractError {
    fn from(e: DomainError) -> Self {
        match e {
            DomainError::EmptyName => ContractError::EmptyName,
            DomainError::BadKeyLength(_) => ContractError::BadKey(e.to_string()),
            other => ContractError::BadArgs(other.to_string()),
        }
    }
}

pub(crate) fn parse_args<T: serde::de::DeserializeOwned>(args: &Value) -> Result<T, ContractError> {
    serde_json::from_value(args.clone()).map_err(|e| ContractError::BadArgs(e.to_string()))
}

/// The administrator's user number, set at genesis.
pub fn admin_of<V: StateView>(view: &V) -> Option<Digest> {
    view.get_as(keys::ADMIN)
}

pub fn is_admin<V: StateView>(view: &V, who: &Digest) -> bool {
    admin_of(view).is_some_and(|a| a == *who)
}

/// Runs one write method. `now` is the transaction's signed timestamp.
pub fn execute(
    method: Method,
    args: &Value,
    signer: Digest,
    now: u64,
    ctx: &mut TxContext<'_>,
) -> Result<Value, ContractError> {
    match method {
        Method::CreateUser => {
            let user = user::create_user(ctx, &parse_args(args)?, signer, now)?;
            Ok(to_json(&user))
        }
        Method::AddFiProject => {
            let id = fiproject::add_fi_project(ctx, parse_args(args)?, signer)?;
            Ok(json!({ "fiProjectId": id }))
        }
        Method::UpdateFiProject => {
            let a: fiproject::UpdateArgs = parse_args(args)?;
            let req = fiproject::UpdateRequest {
                fi_project_id: a.fi_project_id,
                changes: a.changes,
                requester: signer,
            };
            fiproject::update_fi_project(ctx, &req)
        }
        Method::DeleteFiProject => {
            let a: fiproject::DeleteArgs = parse_args(args)?;
            fiproject::delete_fi_project(ctx, &a.fi_project_id, &signer)?;
            Ok(json!({ "fiProjectId": a.fi_project_id, "status": "Deleted" }))
        }
        Method::AddPolicy => {
            let a: abac::AddPolicyArgs = parse_args(args)?;
            let id = abac::add_policy(ctx, a.policy, &signer, now)?;
            Ok(json!({ "policyId": id }))
        }
        Method::UpdatePolicy => {
            let a: abac::UpdatePolicyArgs = parse_args(args)?;
            let new_id = abac::update_policy(ctx, &a.policy_id, a.policy, &signer, now)?;
            Ok(json!({ "oldPolicyId": a.policy_id, "newPolicyId": new_id }))
        }
        Method::DeletePolicy => {
            let a: abac::DeletePolicyArgs = parse_args(args)?;
            abac::delete_policy(ctx, &a.policy_id, a.cause, &signer, now)?;
            Ok(json!({ "policyId": a.policy_id, "cause": a.cause }))
        }
        Method::RecordMemo => memo::record_memo(ctx, &parse_args(args)?, signer),
        read => Err(ContractError::BadArgs(format!("{read} is read-only"))),
    }
}

pub(crate) fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("contract outputs serialize")
}
