//! Key-value world state and the per-transaction execution context.

use std::cell::RefCell;
use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{
    canonical_json, canonical_json_value, Digest, FiProject, IndexGraph, IndexViolation, Parties,
    PublicKey, User,
};
use crate::identity::{Certificate, IdentityDirectory};

/// State key layout.
pub mod keys {
    use crate::domain::Digest;

    pub const CA_ROOT: &str = "config:caRoot";
    pub const ADMIN: &str = "config:admin";

    pub fn user(n: &Digest) -> String {
        format!("user:{n}")
    }
    pub fn cert(n: &Digest) -> String {
        format!("cert:{n}")
    }
    pub fn project(id: &Digest) -> String {
        format!("fp:{id}")
    }
    pub fn policy(id: &Digest) -> String {
        format!("policy:{id}")
    }
    pub fn user_name(name: &str) -> String {
        format!("idx:username:{name}")
    }
    pub fn user_projects(n: &Digest) -> String {
        format!("idx:user-fp:{n}")
    }
    pub fn project_parties(id: &Digest) -> String {
        format!("idx:fp-parties:{id}")
    }
    pub fn project_name(name: &str) -> String {
        format!("idx:fpname:{name}")
    }
    pub fn project_number(number: &str) -> String {
        format!("idx:fpnumber:{number}")
    }

    pub const USER_PREFIX: &str = "user:";
    pub const PROJECT_PREFIX: &str = "fp:";
    pub const POLICY_PREFIX: &str = "policy:";
    pub const USER_PROJECTS_PREFIX: &str = "idx:user-fp:";
    pub const PROJECT_PARTIES_PREFIX: &str = "idx:fp-parties:";
}

/// Anything that can answer point reads against committed state.
pub trait StateView {
    fn get(&self, key: &str) -> Option<Value>;

    fn get_as<T: DeserializeOwned>(&self, key: &str) -> Option<T>
    where
        Self: Sized,
    {
        self.get(key).and_then(|v| serde_json::from_value(v).ok())
    }

    fn contains(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    /// All entries under `prefix`, in key order.
    fn scan(&self, prefix: &str) -> Vec<(String, Value)>;
}

impl<V: StateView> IdentityDirectory for V {
    fn user(&self, n: &Digest) -> Option<User> {
        self.get_as(&keys::user(n))
    }
    fn certificate(&self, n: &Digest) -> Option<Certificate> {
        self.get_as(&keys::cert(n))
    }
    fn ca_root(&self) -> Option<PublicKey> {
        self.get_as(keys::CA_ROOT)
    }
}

/// The committed key-value map plus the height it reflects.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct WorldState {
    pub last_committed_height: Option<u64>,
    pub state: BTreeMap<String, Value>,
}

impl StateView for WorldState {
    fn get(&self, key: &str) -> Option<Value> {
        self.state.get(key).cloned()
    }

    fn contains(&self, key: &str) -> bool {
        self.state.contains_key(key)
    }

    fn scan(&self, prefix: &str) -> Vec<(String, Value)> {
        self.scan_prefix(prefix).map(|(k, v)| (k.clone(), v.clone())).collect()
    }
}

impl WorldState {
    pub fn apply(&mut self, writes: &[WriteEntry]) {
        for w in writes {
            match &w.value {
                Some(v) => {
                    self.state.insert(w.key.clone(), v.clone());
                }
                None => {
                    self.state.remove(&w.key);
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    pub fn scan_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a String, &'a Value)> + 'a {
        self.state
            .range(prefix.to_string()..)
            .take_while(move |(k, _)| k.starts_with(prefix))
    }

    /// Digest over the key-value content only (height excluded).
    pub fn content_digest(&self) -> Digest {
        Digest::of(&canonical_json(&self.state))
    }

    /// Canonical JSON snapshot bytes.
    pub fn snapshot_bytes(&self) -> Vec<u8> {
        canonical_json(self)
    }

    pub fn users(&self) -> BTreeMap<Digest, User> {
        self.typed_prefix(keys::USER_PREFIX)
    }

    pub fn projects(&self) -> BTreeMap<Digest, FiProject> {
        self.typed_prefix(keys::PROJECT_PREFIX)
    }

    pub fn index_graph(&self) -> IndexGraph {
        IndexGraph {
            user_to_projects: self.typed_prefix(keys::USER_PROJECTS_PREFIX),
            project_to_parties: self.typed_prefix::<Parties>(keys::PROJECT_PARTIES_PREFIX),
        }
    }

    /// Full-graph audit of the user/project index relations.
    pub fn audit_indexes(&self) -> Vec<IndexViolation> {
        self.index_graph().audit(&self.users(), &self.projects())
    }

    fn typed_prefix<T: DeserializeOwned>(&self, prefix: &str) -> BTreeMap<Digest, T> {
        self.scan_prefix(prefix)
            .filter_map(|(k, v)| {
                let id = k[prefix.len()..].parse().ok()?;
                Some((id, serde_json::from_value(v.clone()).ok()?))
            })
            .collect()
    }
}

/// One key read during execution with the digest of what was observed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ReadEntry {
    pub key: String,
    /// Digest of the canonical value, or all zeros if absent.
    pub value_digest: Digest,
}

/// One key written during execution. `value: None` deletes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct WriteEntry {
    pub key: String,
    pub value: Option<Value>,
}

impl WriteEntry {
    pub fn value_digest(&self) -> Digest {
        self.value.as_ref().map_or(Digest::ZERO, |v| Digest::of(&canonical_json_value(v)))
    }
}

/// Buffered execution of a single transaction over a committed base.
///
/// Nothing reaches the base until the caller applies [`TxContext::finish`]'s
/// write set, so a failing transaction leaves no partial writes.
pub struct TxContext<'a> {
    base: &'a WorldState,
    writes: BTreeMap<String, Option<Value>>,
    reads: RefCell<BTreeMap<String, Digest>>,
}

impl<'a> TxContext<'a> {
    pub fn new(base: &'a WorldState) -> Self {
        TxContext { base, writes: BTreeMap::new(), reads: RefCell::new(BTreeMap::new()) }
    }

    pub fn put<T: Serialize>(&mut self, key: String, value: &T) {
        let v = serde_json::to_value(value).expect("state values serialize");
        self.writes.insert(key, Some(v));
    }

    pub fn delete(&mut self, key: String) {
        self.writes.insert(key, None);
    }

    pub fn finish(self) -> (Vec<ReadEntry>, Vec<WriteEntry>) {
        let reads = self
            .reads
            .into_inner()
            .into_iter()
            .map(|(key, value_digest)| ReadEntry { key, value_digest })
            .collect();
        let writes = self.writes.into_iter().map(|(key, value)| WriteEntry { key, value }).collect();
        (reads, writes)
    }
}

impl StateView for TxContext<'_> {
    fn get(&self, key: &str) -> Option<Value> {
        if let Some(local) = self.writes.get(key) {
            return local.clone();
        }
        let value = self.base.get(key);
        self.reads.borrow_mut().entry(key.to_string()).or_insert_with(|| {
            value.as_ref().map_or(Digest::ZERO, |v| Digest::of(&canonical_json_value(v)))
        });
        value
    }

    fn scan(&self, prefix: &str) -> Vec<(String, Value)> {
        let mut merged: BTreeMap<String, Option<Value>> =
            self.base.scan_prefix(prefix).map(|(k, v)| (k.clone(), Some(v.clone()))).collect();
        {
            let mut reads = self.reads.borrow_mut();
            for (k, v) in &merged {
                reads.entry(k.clone()).or_insert_with(|| {
                    v.as_ref().map_or(Digest::ZERO, |v| Digest::of(&canonical_json_value(v)))
                });
            }
        }
        for (k, v) in self.writes.range(prefix.to_string()..).take_while(|(k, _)| k.starts_with(prefix)) {
            merged.insert(k.clone(), v.clone());
        }
        merged.into_iter().filter_map(|(k, v)| Some((k, v?))).collect()
    }
}
