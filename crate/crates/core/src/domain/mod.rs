//! On-ledger record types, hash-derived identifiers and canonical encodings.

mod digest;
mod encoding;
mod index;
mod types;

pub use digest::{Digest, DigestParseError};
pub(crate) use digest::decode_lower_hex;
pub use encoding::{canonical_encode, canonical_json, canonical_json_string, canonical_json_value};
pub use index::{IndexGraph, IndexViolation, Relation};
pub use types::{
    derive_project_id, derive_user_number, CollateralKind, FiProject, FiProjectDraft, Parties,
    ProjectStatus, PublicKey, User, UserType,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DomainError {
    #[error("user name must not be empty")]
    EmptyName,
    #[error("public key must be 32 bytes, got {0}")]
    BadKeyLength(usize),
    #[error("field {0} must not be empty")]
    EmptyField(&'static str),
    #[error("unknown user type {0:?}")]
    UnknownUserType(String),
    #[error("deposit share must lie in [0, 1]")]
    DepositOutOfRange,
}
