//! Simulated certificate authority and request signatures.

mod ca;
mod envelope;
mod keys;

pub use ca::{AnonCredential, Certificate, CertificateAuthority};
pub use envelope::{authenticate, check_user, verify_envelope, IdentityDirectory, Nonce, SignedEnvelope};
pub use keys::{verify_signature, KeyPair, Role, Signature};

use crate::domain::{Digest, UserType};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdentityError {
    #[error("CA seed must be at least 16 bytes, got {0}")]
    SeedTooShort(usize),
    #[error("certificate window [{not_before}, {not_after}] is empty")]
    InvalidWindow { not_before: u64, not_after: u64 },
    #[error("unknown user {0}")]
    UnknownUser(Digest),
    #[error("bad signature")]
    BadSignature,
    #[error("user is registered as {registered}, not {claimed}")]
    TypeMismatch { registered: UserType, claimed: UserType },
    #[error("certificate expired or not yet valid")]
    ExpiredCertificate,
}
