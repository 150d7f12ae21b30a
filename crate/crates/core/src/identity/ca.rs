use serde::{Deserialize, Serialize};

use super::keys::{verify_signature, KeyPair, Role, Signature};
use super::IdentityError;
use crate::domain::{canonical_encode, canonical_json_value, Digest, PublicKey};

/// A leaf certificate binding a user number to a key and role.
///
/// Chains are exactly one deep: only the CA root key is accepted as issuer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Certificate {
    pub subject_user_number: Digest,
    pub subject_type: Role,
    pub pub_key: PublicKey,
    pub not_before: u64,
    pub not_after: u64,
    pub serial: u64,
    pub ca_signature: Signature,
}

impl Certificate {
    /// Canonical JSON of every field except `caSignature`.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut tree = serde_json::to_value(self).expect("certificate serializes");
        tree.as_object_mut().expect("object").remove("caSignature");
        canonical_json_value(&tree)
    }

    pub fn verify_issuer(&self, ca_root: &PublicKey) -> bool {
        verify_signature(ca_root, &self.signing_bytes(), &self.ca_signature)
    }

    pub fn valid_at(&self, now: u64) -> bool {
        self.not_before <= now && now <= self.not_after
    }
}

/// The network's certificate authority.
///
/// Issuance takes `&mut self`, so one logical writer owns the serial counter.
#[derive(Debug, Clone)]
pub struct CertificateAuthority {
    root: KeyPair,
    next_serial: u64,
}

impl CertificateAuthority {
    pub const MIN_SEED_LEN: usize = 16;

    /// Derives the root keypair from `seed`; the same seed always yields the
    /// same root.
    pub fn init(seed: &[u8]) -> Result<Self, IdentityError> {
        if seed.len() < Self::MIN_SEED_LEN {
            return Err(IdentityError::SeedTooShort(seed.len()));
        }
        let root_seed = Digest::of(&canonical_encode("ca-root", &[("seed", seed)]));
        Ok(CertificateAuthority { root: KeyPair::from_seed(root_seed.0), next_serial: 1 })
    }

    /// Resumes issuance after `last_serial`.
    pub fn resume(seed: &[u8], last_serial: u64) -> Result<Self, IdentityError> {
        let mut ca = Self::init(seed)?;
        ca.next_serial = last_serial + 1;
        Ok(ca)
    }

    pub fn root_public_key(&self) -> PublicKey {
        self.root.public()
    }

    pub fn next_serial(&self) -> u64 {
        self.next_serial
    }

    pub fn issue(
        &mut self,
        subject: Digest,
        role: Role,
        pub_key: PublicKey,
        not_before: u64,
        not_after: u64,
    ) -> Result<Certificate, IdentityError> {
        if not_before >= not_after {
            return Err(IdentityError::InvalidWindow { not_before, not_after });
        }
        let mut cert = Certificate {
            subject_user_number: subject,
            subject_type: role,
            pub_key,
            not_before,
            not_after,
            serial: self.next_serial,
            ca_signature: Signature([0; 64]),
        };
        cert.ca_signature = self.root.sign(&cert.signing_bytes());
        self.next_serial += 1;
        Ok(cert)
    }
}

/// Hash commitment standing in for an anonymous credential: the tag can be
/// recomputed only by someone who knows the session nonce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AnonCredential {
    pub holder_user_number: Digest,
    pub blinded_tag: Digest,
}

impl AnonCredential {
    pub fn commit(holder: Digest, nonce: &[u8; 16]) -> Self {
        AnonCredential { holder_user_number: holder, blinded_tag: Self::tag(&holder, nonce) }
    }

    pub fn verify(&self, nonce: &[u8; 16]) -> bool {
        self.blinded_tag == Self::tag(&self.holder_user_number, nonce)
    }

    fn tag(holder: &Digest, nonce: &[u8; 16]) -> Digest {
        Digest::of(&canonical_encode("anon", &[("holder", holder.as_bytes()), ("nonce", nonce)]))
    }
}
