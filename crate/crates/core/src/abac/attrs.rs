use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::identity::Role;

pub const RESOURCE_FI_PROJECT: &str = "FiProject";
pub const RESOURCE_USER: &str = "User";
pub const RESOURCE_POLICY: &str = "Policy";

pub const SUBJECT_ATTRS: [&str; 3] = ["userType", "userNumber", "org"];
pub const OBJECT_ATTRS: [&str; 3] = ["resourceType", "fiProjectId", "owner"];
pub const ENV_ATTRS: [&str; 2] = ["validFrom", "validUntil"];

/// An attribute value. `SubjectRef` appears only in policy object matchers
/// and stands for the request's subject attribute of that name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Int(i64),
    Text(String),
    SubjectRef {
        #[serde(rename = "subjectRef")]
        subject_ref: String,
    },
}

impl AttrValue {
    pub fn text(s: impl Into<String>) -> Self {
        AttrValue::Text(s.into())
    }

    pub fn subject_ref(name: &str) -> Self {
        AttrValue::SubjectRef { subject_ref: name.to_string() }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Int(i) => write!(f, "{i}"),
            AttrValue::Text(s) => write!(f, "{s:?}"),
            AttrValue::SubjectRef { subject_ref } => write!(f, "subject.{subject_ref}"),
        }
    }
}

/// Which vocabulary an attribute set is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrKind {
    Subject,
    Object,
    Environment,
}

impl AttrKind {
    pub fn vocabulary(self) -> &'static [&'static str] {
        match self {
            AttrKind::Subject => &SUBJECT_ATTRS,
            AttrKind::Object => &OBJECT_ATTRS,
            AttrKind::Environment => &ENV_ATTRS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AttrError {
    #[error("unknown {kind:?} attribute {name:?}")]
    UnknownName { kind: AttrKind, name: String },
    #[error("attribute {name} has unusable value {value}")]
    BadValue { name: String, value: String },
    #[error("validFrom is after validUntil")]
    EmptyWindow,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeSet(pub BTreeMap<String, AttrValue>);

impl AttributeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, AttrValue)>) -> Self {
        AttributeSet(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn window(from: u64, until: u64) -> Self {
        Self::from_pairs([("validFrom", AttrValue::Int(from as i64)), ("validUntil", AttrValue::Int(until as i64))])
    }

    pub fn get(&self, name: &str) -> Option<&AttrValue> {
        self.0.get(name)
    }

    pub fn insert(&mut self, name: &str, value: AttrValue) {
        self.0.insert(name.to_string(), value);
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Checks names against the vocabulary of `kind`. `allow_refs` admits
    /// `SubjectRef` values, which only policy object matchers may carry.
    pub fn validate(&self, kind: AttrKind, allow_refs: bool) -> Result<(), AttrError> {
        for (name, value) in &self.0 {
            if !kind.vocabulary().contains(&name.as_str()) {
                return Err(AttrError::UnknownName { kind, name: name.clone() });
            }
            let bad = || AttrError::BadValue { name: name.clone(), value: value.to_string() };
            match (kind, value) {
                (AttrKind::Environment, AttrValue::Int(i)) if *i >= 0 => {}
                (AttrKind::Environment, _) => return Err(bad()),
                (_, AttrValue::SubjectRef { subject_ref }) => {
                    if !allow_refs || !SUBJECT_ATTRS.contains(&subject_ref.as_str()) {
                        return Err(bad());
                    }
                }
                (AttrKind::Subject, v) if name == "userType" => {
                    if !matches!(v, AttrValue::Text(t) if ROLE_NAMES.contains(&t.as_str())) {
                        return Err(bad());
                    }
                }
                _ => {}
            }
        }
        if kind == AttrKind::Environment {
            let (from, until) = self.bounds();
            if from > until {
                return Err(AttrError::EmptyWindow);
            }
        }
        Ok(())
    }

    /// Environment window bounds; a missing bound is open.
    pub fn bounds(&self) -> (u64, u64) {
        let int = |name, default| match self.get(name) {
            Some(AttrValue::Int(i)) if *i >= 0 => *i as u64,
            _ => default,
        };
        (int("validFrom", 0), int("validUntil", u64::MAX))
    }
}

const ROLE_NAMES: [&str; 5] = ["CoreEnterprise", "Supplier", "Distributor", "FinancialInstitution", "Admin"];

/// Subset match: every attribute of `matcher` is present in `actual` with an
/// equal value. `SubjectRef` values compare against `subject[name]`; with no
/// subject to resolve against they match any present value.
pub fn subset_match(matcher: &AttributeSet, actual: &AttributeSet, subject: Option<&AttributeSet>) -> bool {
    matcher.0.iter().all(|(name, want)| {
        let Some(have) = actual.get(name) else { return false };
        match want {
            AttrValue::SubjectRef { subject_ref } => match subject {
                Some(s) => s.get(subject_ref) == Some(have),
                None => true,
            },
            literal => literal == have,
        }
    })
}

pub fn role_value(role: Role) -> AttrValue {
    AttrValue::text(role.as_str())
}
