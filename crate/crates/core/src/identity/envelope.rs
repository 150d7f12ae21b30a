use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ca::Certificate;
use super::keys::{verify_signature, KeyPair, Role, Signature};
use super::IdentityError;
use crate::domain::{decode_lower_hex, Digest, PublicKey, User, UserType};

/// 16 random bytes making each envelope unique.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Nonce(pub [u8; 16]);

impl fmt::Debug for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonce({})", hex::encode(self.0))
    }
}

impl Serialize for Nonce {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for Nonce {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        decode_lower_hex::<16>(&s)
            .map(Nonce)
            .ok_or_else(|| serde::de::Error::custom("nonce must be 32 lowercase hex chars"))
    }
}

/// A payload signed by a registered identity.
///
/// The signature covers `payload ‖ nonce ‖ timestamp` (timestamp as 8-byte
/// big-endian seconds).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SignedEnvelope {
    pub payload: String,
    pub signer_user_number: Digest,
    pub signature: Signature,
    pub nonce: Nonce,
    pub timestamp: u64,
}

impl SignedEnvelope {
    pub fn sign(keys: &KeyPair, signer: Digest, payload: String, nonce: Nonce, timestamp: u64) -> Self {
        let msg = signing_message(payload.as_bytes(), &nonce, timestamp);
        SignedEnvelope {
            signature: keys.sign(&msg),
            payload,
            signer_user_number: signer,
            nonce,
            timestamp,
        }
    }

    pub fn signing_message(&self) -> Vec<u8> {
        signing_message(self.payload.as_bytes(), &self.nonce, self.timestamp)
    }

    /// Checks the signature alone against `key`.
    pub fn signature_valid(&self, key: &PublicKey) -> bool {
        verify_signature(key, &self.signing_message(), &self.signature)
    }
}

fn signing_message(payload: &[u8], nonce: &Nonce, timestamp: u64) -> Vec<u8> {
    let mut msg = Vec::with_capacity(payload.len() + 24);
    msg.extend_from_slice(payload);
    msg.extend_from_slice(&nonce.0);
    msg.extend_from_slice(&timestamp.to_be_bytes());
    msg
}

/// True iff the envelope signature verifies under the certificate key, the
/// certificate was issued by `ca_root`, is valid at `now`, and names the
/// envelope's signer.
pub fn verify_envelope(env: &SignedEnvelope, cert: &Certificate, ca_root: &PublicKey, now: u64) -> bool {
    cert.subject_user_number == env.signer_user_number
        && cert.valid_at(now)
        && cert.verify_issuer(ca_root)
        && env.signature_valid(&cert.pub_key)
}

/// Read access to registered identities.
pub trait IdentityDirectory {
    fn user(&self, user_number: &Digest) -> Option<User>;
    fn certificate(&self, user_number: &Digest) -> Option<Certificate>;
    fn ca_root(&self) -> Option<PublicKey>;
}

/// Verifies possession of the registered key and the claimed user type.
///
/// Private keys are never presented; a valid envelope signature proves the
/// caller holds the key the certificate binds.
pub fn check_user<D: IdentityDirectory + ?Sized>(
    env: &SignedEnvelope,
    claimed: UserType,
    dir: &D,
    now: u64,
) -> Result<User, IdentityError> {
    let signer = env.signer_user_number;
    let user = dir.user(&signer).ok_or(IdentityError::UnknownUser(signer))?;
    let cert = dir.certificate(&signer).ok_or(IdentityError::UnknownUser(signer))?;
    if !cert.valid_at(now) {
        return Err(IdentityError::ExpiredCertificate);
    }
    let root = dir.ca_root().ok_or(IdentityError::BadSignature)?;
    if cert.pub_key != user.pub_key || !verify_envelope(env, &cert, &root, now) {
        return Err(IdentityError::BadSignature);
    }
    if user.user_type != claimed {
        return Err(IdentityError::TypeMismatch { registered: user.user_type, claimed });
    }
    Ok(user)
}

/// Authenticates any certificate holder, including the administrator, and
/// returns the role its certificate attests. Non-admin signers must also be
/// registered users.
pub fn authenticate<D: IdentityDirectory + ?Sized>(
    env: &SignedEnvelope,
    dir: &D,
    now: u64,
) -> Result<Role, IdentityError> {
    let signer = env.signer_user_number;
    let cert = dir.certificate(&signer).ok_or(IdentityError::UnknownUser(signer))?;
    if cert.subject_type != Role::Admin && dir.user(&signer).is_none() {
        return Err(IdentityError::UnknownUser(signer));
    }
    if !cert.valid_at(now) {
        return Err(IdentityError::ExpiredCertificate);
    }
    let root = dir.ca_root().ok_or(IdentityError::BadSignature)?;
    if !verify_envelope(env, &cert, &root, now) {
        return Err(IdentityError::BadSignature);
    }
    Ok(cert.subject_type)
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use proptest::prelude::*;

    use super::*;
    use crate::identity::CertificateAuthority;

    struct Dir {
        users: HashMap<Digest, User>,
        certs: HashMap<Digest, Certificate>,
        root: PublicKey,
    }

    impl IdentityDirectory for Dir {
        fn user(&self, n: &Digest) -> Option<User> {
            self.users.get(n).cloned()
        }
        fn certificate(&self, n: &Digest) -> Option<Certificate> {
            self.certs.get(n).cloned()
        }
        fn ca_root(&self) -> Option<PublicKey> {
            Some(self.root)
        }
    }

    fn setup() -> (Dir, KeyPair, User) {
        let mut ca = CertificateAuthority::init(b"test-ca-seed-0001").unwrap();
        let keys = KeyPair::from_seed([4; 32]);
        let user = User::new("Sp1", UserType::Supplier, &keys.public().0).unwrap();
        let cert = ca.issue(user.user_number, Role::Supplier, keys.public(), 100, 1000).unwrap();
        let dir = Dir {
            users: [(user.user_number, user.clone())].into(),
            certs: [(user.user_number, cert)].into(),
            root: ca.root_public_key(),
        };
        (dir, keys, user)
    }

    fn env(keys: &KeyPair, signer: Digest) -> SignedEnvelope {
        SignedEnvelope::sign(keys, signer, r#"{"x":1}"#.into(), Nonce([1; 16]), 500)
    }

    #[test]
    fn verify_envelope_cases() {
        let (dir, keys, user) = setup();
        let cert = &dir.certs[&user.user_number];
        let e = env(&keys, user.user_number);
        assert!(verify_envelope(&e, cert, &dir.root, 500));
        assert!(!verify_envelope(&e, cert, &dir.root, 1001));
        let mismatch = env(&keys, Digest::of(b"someone else"));
        assert!(!verify_envelope(&mismatch, cert, &dir.root, 500));
    }

    #[test]
    fn check_user_outcomes() {
        let (dir, keys, user) = setup();
        let e = env(&keys, user.user_number);
        assert_eq!(check_user(&e, UserType::Supplier, &dir, 500).unwrap(), user);
        assert!(matches!(
            check_user(&e, UserType::CoreEnterprise, &dir, 500),
            Err(IdentityError::TypeMismatch { .. })
        ));
        assert_eq!(check_user(&e, UserType::Supplier, &dir, 2000), Err(IdentityError::ExpiredCertificate));
        let stranger = KeyPair::from_seed([5; 32]);
        let unknown = env(&stranger, Digest::of(b"nobody"));
        assert!(matches!(
            check_user(&unknown, UserType::Supplier, &dir, 500),
            Err(IdentityError::UnknownUser(_))
        ));
        let forged = env(&stranger, user.user_number);
        assert_eq!(check_user(&forged, UserType::Supplier, &dir, 500), Err(IdentityError::BadSignature));
    }

    #[test]
    fn envelope_json_round_trip() {
        let (_, keys, user) = setup();
        let e = env(&keys, user.user_number);
        let text = crate::domain::canonical_json_string(&e);
        let back: SignedEnvelope = serde_json::from_str(&text).unwrap();
        assert_eq!(back, e);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn sign_verify_and_single_bit_corruption(
            seed in any::<[u8; 32]>(),
            payload in proptest::collection::vec(any::<u8>(), 0..96),
            bit in any::<prop::sample::Index>(),
            corrupt_signature in any::<bool>(),
        ) {
            let keys = KeyPair::from_seed(seed);
            let sig = keys.sign(&payload);
            prop_assert!(verify_signature(&keys.public(), &payload, &sig));
            if corrupt_signature || payload.is_empty() {
                let mut bad = sig;
                let i = bit.index(512);
                bad.0[i / 8] ^= 1 << (i % 8);
                prop_assert!(!verify_signature(&keys.public(), &payload, &bad));
            } else {
                let mut bad = payload.clone();
                let i = bit.index(bad.len() * 8);
                bad[i / 8] ^= 1 << (i % 8);
                prop_assert!(!verify_signature(&keys.public(), &bad, &sig));
            }
        }
    }
}
