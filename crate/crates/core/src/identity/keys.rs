use std::fmt;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::domain::{decode_lower_hex, PublicKey, UserType};

/// Ed25519 signature bytes, hex on the wire.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; 64]);

impl Signature {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", &self.to_hex()[..16])
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        decode_lower_hex::<64>(&s)
            .map(Signature)
            .ok_or_else(|| serde::de::Error::custom("signature must be 128 lowercase hex chars"))
    }
}

/// A signing keypair. The secret half never leaves the holder.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

impl KeyPair {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        KeyPair { signing: SigningKey::from_bytes(&seed) }
    }

    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        Self::from_seed(seed)
    }

    pub fn seed(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    pub fn public(&self) -> PublicKey {
        PublicKey(self.signing.verifying_key().to_bytes())
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.signing.sign(message).to_bytes())
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public()).finish_non_exhaustive()
    }
}

/// Strict Ed25519 verification. Malformed keys verify nothing.
pub fn verify_signature(key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    let Ok(vk) = VerifyingKey::from_bytes(&key.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
    vk.verify(message, &sig).is_ok() && vk.verify_strict(message, &sig).is_ok()
}

/// The role a certificate attests. Users carry one of the four participant
/// types; the network administrator carries `Admin`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    CoreEnterprise,
    Supplier,
    Distributor,
    FinancialInstitution,
    Admin,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Admin => "Admin",
            Role::CoreEnterprise => UserType::CoreEnterprise.as_str(),
            Role::Supplier => UserType::Supplier.as_str(),
            Role::Distributor => UserType::Distributor.as_str(),
            Role::FinancialInstitution => UserType::FinancialInstitution.as_str(),
        }
    }

    pub fn user_type(self) -> Option<UserType> {
        match self {
            Role::Admin => None,
            Role::CoreEnterprise => Some(UserType::CoreEnterprise),
            Role::Supplier => Some(UserType::Supplier),
            Role::Distributor => Some(UserType::Distributor),
            Role::FinancialInstitution => Some(UserType::FinancialInstitution),
        }
    }
}

impl From<UserType> for Role {
    fn from(t: UserType) -> Self {
        match t {
            UserType::CoreEnterprise => Role::CoreEnterprise,
            UserType::Supplier => Role::Supplier,
            UserType::Distributor => Role::Distributor,
            UserType::FinancialInstitution => Role::FinancialInstitution,
        }
    }
}
