use serde::{Deserialize, Serialize};

use super::attrs::{role_value, subset_match, AttrError, AttrKind, AttrValue, AttributeSet};
use super::policy::AbacPolicy;
use crate::contracts::is_admin;
use crate::domain::{Digest, User};
use crate::identity::{authenticate, IdentityError, Role, SignedEnvelope};
use crate::ledger::state::{keys, StateView};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AccessRequest {
    pub envelope: SignedEnvelope,
    pub requested_op: String,
    #[serde(rename = "S_u", default)]
    pub s_u: AttributeSet,
    #[serde(rename = "O_u", default)]
    pub o_u: AttributeSet,
    #[serde(rename = "E_u", default)]
    pub e_u: AttributeSet,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AccessError {
    #[error("no policy supports the request")]
    NoPolicy,
    #[error("denied by every matching policy")]
    Denied,
    #[error("malformed attributes: {0}")]
    MalformedAttributes(String),
    #[error(transparent)]
    Identity(#[from] IdentityError),
}

impl From<AttrError> for AccessError {
    fn from(e: AttrError) -> Self {
        AccessError::MalformedAttributes(e.to_string())
    }
}

/// A decision plus the expired policies met while reaching it, which the
/// caller schedules for deletion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessOutcome {
    /// The granting policy on success.
    pub decision: Result<Digest, AccessError>,
    pub expired: Vec<Digest>,
}

impl AccessOutcome {
    pub fn granted(&self) -> bool {
        self.decision.is_ok()
    }

    fn rejected(e: AccessError) -> Self {
        AccessOutcome { decision: Err(e), expired: Vec::new() }
    }
}

pub fn auth<V: StateView>(req: &AccessRequest, view: &V, now: u64) -> Result<Role, AccessError> {
    Ok(authenticate(&req.envelope, view, now)?)
}

/// Validates the request's attributes and fixes the environment to the
/// evaluation instant.
pub fn get_attrs(
    req: &AccessRequest,
    now: u64,
) -> Result<(AttributeSet, AttributeSet, AttributeSet), AccessError> {
    req.s_u.validate(AttrKind::Subject, false)?;
    req.o_u.validate(AttrKind::Object, false)?;
    req.e_u.validate(AttrKind::Environment, false)?;
    match req.s_u.get("userNumber") {
        Some(AttrValue::Text(n)) if *n == req.envelope.signer_user_number.to_hex() => {}
        _ => return Err(AccessError::MalformedAttributes("userNumber must name the signer".into())),
    }
    Ok((req.s_u.clone(), req.o_u.clone(), AttributeSet::window(now, now)))
}

/// Authenticates, extracts attributes and decides against the stored policies.
pub fn check_access<V: StateView>(req: &AccessRequest, view: &V, now: u64) -> AccessOutcome {
    if let Err(e) = auth(req, view, now) {
        return AccessOutcome::rejected(e);
    }
    match get_attrs(req, now) {
        Ok((s, o, e)) => evaluate(&query_policy(view, Some(&s), Some(&o)), &s, &o, &e, &req.requested_op),
        Err(e) => AccessOutcome::rejected(e),
    }
}

/// Decision for server-built attributes at instant `now`.
pub fn decide<V: StateView>(
    view: &V,
    subject: &AttributeSet,
    object: &AttributeSet,
    op: &str,
    now: u64,
) -> AccessOutcome {
    let candidates = query_policy(view, Some(subject), Some(object));
    evaluate(&candidates, subject, object, &AttributeSet::window(now, now), op)
}

/// Evaluates matching candidates in order: a candidate whose window ended
/// before the request's window is recorded as expired; the first candidate
/// permitting `op` with an overlapping window grants.
pub fn evaluate(
    candidates: &[AbacPolicy],
    subject: &AttributeSet,
    object: &AttributeSet,
    env: &AttributeSet,
    op: &str,
) -> AccessOutcome {
    let (from_u, until_u) = env.bounds();
    let mut expired = Vec::new();
    let mut grant = None;
    let mut matched = false;
    for p in candidates {
        if !subset_match(&p.s, subject, None) || !subset_match(&p.o, object, Some(subject)) {
            continue;
        }
        matched = true;
        let (from_p, until_p) = p.window();
        if until_p < from_u {
            expired.push(p.policy_id);
            continue;
        }
        if grant.is_none() && p.permits(op) && from_u.max(from_p) <= until_u.min(until_p) {
            grant = Some(p.policy_id);
        }
    }
    let decision = match (grant, matched) {
        (Some(id), _) => Ok(id),
        (None, false) => Err(AccessError::NoPolicy),
        (None, true) => Err(AccessError::Denied),
    };
    AccessOutcome { decision, expired }
}

/// Stored policies whose subject matcher is a subset of `s` and whose object
/// matcher is a subset of `o`; an absent side is not constrained.
pub fn query_policy<V: StateView>(view: &V, s: Option<&AttributeSet>, o: Option<&AttributeSet>) -> Vec<AbacPolicy> {
    all_policies(view)
        .into_iter()
        .filter(|p| s.map_or(true, |s| subset_match(&p.s, s, None)) && o.map_or(true, |o| subset_match(&p.o, o, s)))
        .collect()
}

pub fn all_policies<V: StateView>(view: &V) -> Vec<AbacPolicy> {
    view.scan(keys::POLICY_PREFIX)
        .into_iter()
        .filter_map(|(_, v)| serde_json::from_value(v).ok())
        .collect()
}

/// Subject attributes the ledger vouches for: role and user number.
pub fn subject_attrs<V: StateView>(view: &V, who: &Digest) -> Option<AttributeSet> {
    let role = if is_admin(view, who) {
        Role::Admin
    } else {
        Role::from(view.get_as::<User>(&keys::user(who))?.user_type)
    };
    Some(AttributeSet::from_pairs([
        ("userType", role_value(role)),
        ("userNumber", AttrValue::text(who.to_hex())),
    ]))
}
