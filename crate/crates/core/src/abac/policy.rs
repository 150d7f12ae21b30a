use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::attrs::{AttrKind, AttributeSet};
use crate::contracts::Method;
use crate::domain::{canonical_encode, canonical_json, Digest};

/// A policy as submitted: matchers, permission bits and validity window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    #[serde(rename = "S", default)]
    pub s: AttributeSet,
    #[serde(rename = "O", default)]
    pub o: AttributeSet,
    #[serde(rename = "P")]
    pub p: BTreeMap<String, i64>,
    #[serde(rename = "E", default)]
    pub e: AttributeSet,
}

/// A stored policy, keyed by the digest of its subject and object matchers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbacPolicy {
    #[serde(rename = "policyId")]
    pub policy_id: Digest,
    #[serde(rename = "S")]
    pub s: AttributeSet,
    #[serde(rename = "O")]
    pub o: AttributeSet,
    #[serde(rename = "P")]
    pub p: BTreeMap<String, i64>,
    #[serde(rename = "E")]
    pub e: AttributeSet,
}

impl AbacPolicy {
    pub fn from_spec(spec: PolicySpec) -> Self {
        AbacPolicy { policy_id: policy_id(&spec.s, &spec.o), s: spec.s, o: spec.o, p: spec.p, e: spec.e }
    }

    pub fn spec(&self) -> PolicySpec {
        PolicySpec { s: self.s.clone(), o: self.o.clone(), p: self.p.clone(), e: self.e.clone() }
    }

    pub fn permits(&self, op: &str) -> bool {
        self.p.get(op) == Some(&1)
    }

    pub fn window(&self) -> (u64, u64) {
        self.e.bounds()
    }

    pub fn expired_at(&self, now: u64) -> bool {
        now > self.window().1
    }
}

pub fn policy_id(s: &AttributeSet, o: &AttributeSet) -> Digest {
    Digest::of(&canonical_encode("policy", &[("S", &canonical_json(s)), ("O", &canonical_json(o))]))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct BadPolicy(pub String);

/// Well-formedness of a policy at creation time `now`.
pub fn check_policy(spec: &PolicySpec, now: u64) -> Result<(), BadPolicy> {
    let bad = |why: String| Err(BadPolicy(why));
    if let Err(e) = spec.s.validate(AttrKind::Subject, false) {
        return bad(e.to_string());
    }
    if let Err(e) = spec.o.validate(AttrKind::Object, true) {
        return bad(e.to_string());
    }
    if let Err(e) = spec.e.validate(AttrKind::Environment, false) {
        return bad(e.to_string());
    }
    if spec.s.is_empty() && spec.o.is_empty() {
        return bad("empty subject and object matchers would match every request".into());
    }
    if spec.p.is_empty() {
        return bad("no permissions".into());
    }
    for (op, bit) in &spec.p {
        if op.parse::<Method>().is_err() {
            return bad(format!("unknown operation {op:?}"));
        }
        if !matches!(bit, 0 | 1) {
            return bad(format!("permission {op} = {bit}, expected 0 or 1"));
        }
    }
    if now > spec.e.bounds().1 {
        return bad("validity window already expired".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abac::AttrValue;

    fn spec() -> PolicySpec {
        PolicySpec {
            s: AttributeSet::from_pairs([("userType", AttrValue::text("Supplier"))]),
            o: AttributeSet::from_pairs([("resourceType", AttrValue::text("FiProject"))]),
            p: [("QueryFiProject".to_string(), 1)].into(),
            e: AttributeSet::window(0, 100),
        }
    }

    #[test]
    fn check_policy_cases() {
        assert_eq!(check_policy(&spec(), 50), Ok(()));
        let mut s = spec();
        s.p.insert("QueryFiProject".into(), 2);
        assert!(check_policy(&s, 0).is_err());
        let mut s = spec();
        s.e = AttributeSet::window(10, 5);
        assert!(check_policy(&s, 0).is_err());
        let mut s = spec();
        s.s = AttributeSet::new();
        s.o = AttributeSet::new();
        assert!(check_policy(&s, 0).is_err());
        assert!(check_policy(&spec(), 101).is_err());
        let mut s = spec();
        s.p = [("Launch".to_string(), 1)].into();
        assert!(check_policy(&s, 0).is_err());
        let mut s = spec();
        s.p.clear();
        assert!(check_policy(&s, 0).is_err());
    }

    #[test]
    fn id_depends_only_on_matchers() {
        let a = AbacPolicy::from_spec(spec());
        let mut other = spec();
        other.p.insert("AddFiProject".into(), 1);
        other.e = AttributeSet::window(3, 9);
        assert_eq!(AbacPolicy::from_spec(other).policy_id, a.policy_id);
        let mut moved = spec();
        moved.o.insert("owner", AttrValue::text("x"));
        assert_ne!(AbacPolicy::from_spec(moved).policy_id, a.policy_id);
    }

    #[test]
    fn wire_names() {
        let v = serde_json::to_value(AbacPolicy::from_spec(spec())).unwrap();
        for k in ["policyId", "S", "O", "P", "E"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }
}
