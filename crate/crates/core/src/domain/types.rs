use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::digest::{decode_lower_hex, Digest};
use super::encoding::canonical_encode;
use super::DomainError;

/// Participant categories that can register as users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UserType {
    CoreEnterprise,
    Supplier,
    Distributor,
    FinancialInstitution,
}

impl UserType {
    pub const ALL: [UserType; 4] = [
        UserType::CoreEnterprise,
        UserType::Supplier,
        UserType::Distributor,
        UserType::FinancialInstitution,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UserType::CoreEnterprise => "CoreEnterprise",
            UserType::Supplier => "Supplier",
            UserType::Distributor => "Distributor",
            UserType::FinancialInstitution => "FinancialInstitution",
        }
    }

    /// Suppliers and distributors are the borrowing side of a project.
    pub fn can_borrow(self) -> bool {
        matches!(self, UserType::Supplier | UserType::Distributor)
    }
}

impl fmt::Display for UserType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UserType {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UserType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| DomainError::UnknownUserType(s.to_string()))
    }
}

/// Raw 32-byte Ed25519 verification key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey(pub [u8; 32]);

impl PublicKey {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, DomainError> {
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| DomainError::BadKeyLength(bytes.len()))?;
        Ok(PublicKey(arr))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", &self.to_hex()[..16])
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        decode_lower_hex::<32>(&s)
            .map(PublicKey)
            .ok_or_else(|| serde::de::Error::custom("public key must be 64 lowercase hex chars"))
    }
}

/// A registered participant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct User {
    pub user_name: String,
    pub user_type: UserType,
    pub user_number: Digest,
    pub pub_key: PublicKey,
}

impl User {
    pub fn new(user_name: &str, user_type: UserType, pub_key: &[u8]) -> Result<Self, DomainError> {
        let user_number = derive_user_number(user_name, pub_key)?;
        Ok(User {
            user_name: user_name.to_string(),
            user_type,
            user_number,
            pub_key: PublicKey::from_slice(pub_key)?,
        })
    }
}

/// `userNumber = SHA-256(canonical("user"; userName, pubKey))`.
pub fn derive_user_number(user_name: &str, pub_key: &[u8]) -> Result<Digest, DomainError> {
    if user_name.is_empty() {
        return Err(DomainError::EmptyName);
    }
    if pub_key.len() != 32 {
        return Err(DomainError::BadKeyLength(pub_key.len()));
    }
    Ok(Digest::of(&canonical_encode(
        "user",
        &[("userName", user_name.as_bytes()), ("pubKey", pub_key)],
    )))
}

/// `fiProjectId = SHA-256(canonical("fp"; fiProjectName, fiProjectNumber))`.
pub fn derive_project_id(name: &str, number: &str) -> Result<Digest, DomainError> {
    if name.is_empty() {
        return Err(DomainError::EmptyField("fiProjectName"));
    }
    if number.is_empty() {
        return Err(DomainError::EmptyField("fiProjectNumber"));
    }
    Ok(Digest::of(&canonical_encode(
        "fp",
        &[("fiProjectName", name.as_bytes()), ("fiProjectNumber", number.as_bytes())],
    )))
}

/// What secures a financing project.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all_fields = "camelCase", deny_unknown_fields)]
pub enum CollateralKind {
    /// Pledged products.
    Inventory { product_ids: Vec<String> },
    /// An accounts-receivable document issued by the core enterprise.
    AccountsReceivable { ard_id: String },
    /// A prepayment purchase contract; the deposit share is in basis points.
    Prepayment { pc_id: String, deposit_bp: u32 },
}

impl CollateralKind {
    pub fn label(&self) -> &'static str {
        match self {
            CollateralKind::Inventory { .. } => "Inventory",
            CollateralKind::AccountsReceivable { .. } => "AccountsReceivable",
            CollateralKind::Prepayment { .. } => "Prepayment",
        }
    }

    /// Converts a deposit fraction in `[0, 1]` to basis points.
    pub fn deposit_bp_from_fraction(fraction: f64) -> Result<u32, DomainError> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(DomainError::DepositOutOfRange);
        }
        Ok((fraction * 10_000.0).round() as u32)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        match self {
            CollateralKind::Inventory { product_ids } => {
                if product_ids.is_empty() || product_ids.iter().any(String::is_empty) {
                    return Err(DomainError::EmptyField("productIds"));
                }
            }
            CollateralKind::AccountsReceivable { ard_id } => {
                if ard_id.is_empty() {
                    return Err(DomainError::EmptyField("ardId"));
                }
            }
            CollateralKind::Prepayment { pc_id, deposit_bp } => {
                if pc_id.is_empty() {
                    return Err(DomainError::EmptyField("pcId"));
                }
                if *deposit_bp > 10_000 {
                    return Err(DomainError::DepositOutOfRange);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProjectStatus {
    Active,
    Repaid,
    Deleted,
}

/// The three parties a project references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Parties {
    pub ce_index: Digest,
    pub fe_index: Digest,
    pub fi_index: Digest,
}

impl Parties {
    pub fn contains(&self, user: &Digest) -> bool {
        self.ce_index == *user || self.fe_index == *user || self.fi_index == *user
    }

    pub fn members(&self) -> [Digest; 3] {
        [self.ce_index, self.fe_index, self.fi_index]
    }
}

/// Client-supplied project fields; id and status are assigned on add.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FiProjectDraft {
    pub fi_project_name: String,
    pub fi_project_number: String,
    pub collateral: CollateralKind,
    pub amount: u64,
    pub interest_rate_bp: u32,
    pub time_start: u64,
    pub time_end: u64,
    pub ce_index: Digest,
    pub fe_index: Digest,
    pub fi_index: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FiProject {
    pub fi_project_name: String,
    pub fi_project_number: String,
    pub fi_project_id: Digest,
    pub collateral: CollateralKind,
    /// Minor currency units.
    pub amount: u64,
    pub interest_rate_bp: u32,
    pub time_start: u64,
    pub time_end: u64,
    pub ce_index: Digest,
    pub fe_index: Digest,
    pub fi_index: Digest,
    pub status: ProjectStatus,
}

impl FiProject {
    pub fn from_draft(draft: FiProjectDraft) -> Result<Self, DomainError> {
        let fi_project_id = derive_project_id(&draft.fi_project_name, &draft.fi_project_number)?;
        Ok(FiProject {
            fi_project_name: draft.fi_project_name,
            fi_project_number: draft.fi_project_number,
            fi_project_id,
            collateral: draft.collateral,
            amount: draft.amount,
            interest_rate_bp: draft.interest_rate_bp,
            time_start: draft.time_start,
            time_end: draft.time_end,
            ce_index: draft.ce_index,
            fe_index: draft.fe_index,
            fi_index: draft.fi_index,
            status: ProjectStatus::Active,
        })
    }

    pub fn parties(&self) -> Parties {
        Parties {
            ce_index: self.ce_index,
            fe_index: self.fe_index,
            fi_index: self.fi_index,
        }
    }
}
