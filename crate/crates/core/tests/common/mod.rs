//! Fixtures, random case generators and brute-force oracles shared by the
//! integration suites. The oracles read raw state JSON and hash with `sha2`
//! directly, so they share no code with the contracts they check.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use fscf_core::abac::{self, AbacPolicy, AccessError, AccessRequest, AttrValue, AttributeSet, PolicySpec};
use fscf_core::contracts::fiproject::add_fi_project;
use fscf_core::domain::{CollateralKind, Digest, FiProjectDraft, UserType};
use fscf_core::identity::{IdentityError, Nonce, SignedEnvelope};
use fscf_core::ledger::state::{TxContext, WorldState};
use fscf_core::ledger::SimClock;
use fscf_core::workflows::{init_network, register_cast, Network, NetworkConfig, Participant};
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Map, Value};
use sha2::{Digest as _, Sha256};

pub const T0: u64 = 1_700_000_000_000;

pub const ROLES: [&str; 5] = ["CoreEnterprise", "Supplier", "Distributor", "FinancialInstitution", "Admin"];

pub const METHODS: [&str; 14] = [
    "CreateUser",
    "QueryUser",
    "CheckUser",
    "AddFiProject",
    "QueryFiProject",
    "UpdateFiProject",
    "DeleteFiProject",
    "CheckFiProject",
    "AddPolicy",
    "QueryPolicy",
    "UpdatePolicy",
    "DeletePolicy",
    "CheckAccess",
    "RecordMemo",
];

/// Operations the access generators draw from.
pub const OPS: [&str; 5] = ["QueryFiProject", "UpdateFiProject", "DeleteFiProject", "QueryUser", "AddPolicy"];

pub struct Cast {
    pub net: Network,
    pub clock: SimClock,
    /// Registered users followed by the administrator.
    pub people: Vec<Participant>,
    /// User numbers nobody registered.
    pub strangers: Vec<Digest>,
}

impl Cast {
    pub fn admin(&self) -> &Participant {
        self.people.last().unwrap()
    }

    pub fn state(&self) -> &WorldState {
        self.net.node().state()
    }

    pub fn of_type(&self, role: &str) -> Vec<Digest> {
        self.people.iter().filter(|p| p.role.as_str() == role).map(|p| p.user_number).collect()
    }
}

pub fn network() -> (Network, SimClock) {
    let clock = SimClock::starting_at(T0);
    (init_network(NetworkConfig::default(), Arc::new(clock.clone())).unwrap(), clock)
}

/// Four registered users from the scenario cast, a second core enterprise and
/// lender, and the administrator.
pub fn cast() -> Cast {
    let (mut net, clock) = network();
    let mut people = register_cast(&mut net, "").unwrap().to_vec();
    people.push(net.register("CE2", UserType::CoreEnterprise).unwrap());
    people.push(net.register("FI2", UserType::FinancialInstitution).unwrap());
    people.push(net.admin().clone());
    Cast { net, clock, people, strangers: vec![Digest::of(b"stranger-1"), Digest::of(b"stranger-2")] }
}

/// SHA-256 over a tag followed by length-prefixed name/value pairs.
pub fn tagged_hash(tag: &str, fields: &[(&str, &[u8])]) -> Digest {
    let mut h = Sha256::new();
    h.update(tag.as_bytes());
    for (name, value) in fields {
        h.update((name.len() as u64).to_be_bytes());
        h.update(name.as_bytes());
        h.update((value.len() as u64).to_be_bytes());
        h.update(value);
    }
    Digest(h.finalize().into())
}

fn raw<'a>(state: &'a WorldState, prefix: &str, id: &Digest) -> Option<&'a Value> {
    state.state.get(&format!("{prefix}:{}", id.to_hex()))
}

fn is_admin(state: &WorldState, who: &Digest) -> bool {
    state.state.get("config:admin") == Some(&json!(who.to_hex()))
}

// ---------------------------------------------------------------------------
// Adding a financing project
// ---------------------------------------------------------------------------

/// Validate, derive the id, then refuse unauthorized callers and duplicates.
pub fn oracle_add_fi_project(state: &WorldState, d: &FiProjectDraft, signer: &Digest) -> Result<Digest, &'static str> {
    let party = |who: &Digest, allowed: &[&str]| {
        raw(state, "user", who)
            .and_then(|u| u["userType"].as_str())
            .is_some_and(|t| allowed.contains(&t))
    };
    let collateral = match &d.collateral {
        CollateralKind::Inventory { product_ids } => {
            !product_ids.is_empty() && product_ids.iter().all(|p| !p.is_empty())
        }
        CollateralKind::AccountsReceivable { ard_id } => !ard_id.is_empty(),
        CollateralKind::Prepayment { pc_id, deposit_bp } => !pc_id.is_empty() && *deposit_bp <= 10_000,
    };
    let well_formed = !d.fi_project_name.is_empty()
        && !d.fi_project_number.is_empty()
        && collateral
        && d.amount > 0
        && d.time_start < d.time_end
        && party(&d.ce_index, &["CoreEnterprise"])
        && party(&d.fe_index, &["Supplier", "Distributor"])
        && party(&d.fi_index, &["FinancialInstitution"]);
    if !well_formed {
        return Err("BadFP");
    }
    let id = tagged_hash(
        "fp",
        &[("fiProjectName", d.fi_project_name.as_bytes()), ("fiProjectNumber", d.fi_project_number.as_bytes())],
    );
    if *signer != d.fi_index && !is_admin(state, signer) {
        return Err("NotAuthorized");
    }
    if raw(state, "fp", &id).is_some() {
        return Err("AlreadyExists");
    }
    Ok(id)
}

fn valid_collateral<R: Rng>(rng: &mut R) -> CollateralKind {
    match rng.gen_range(0..3) {
        0 => CollateralKind::Inventory { product_ids: vec!["P1".into(), "P2".into()] },
        1 => CollateralKind::AccountsReceivable { ard_id: "ARD-1".into() },
        _ => CollateralKind::Prepayment { pc_id: "PC-1".into(), deposit_bp: rng.gen_range(0..=10_000) },
    }
}

fn broken_collateral<R: Rng>(rng: &mut R) -> CollateralKind {
    match rng.gen_range(0..5) {
        0 => CollateralKind::Inventory { product_ids: vec![] },
        1 => CollateralKind::Inventory { product_ids: vec!["P1".into(), String::new()] },
        2 => CollateralKind::AccountsReceivable { ard_id: String::new() },
        3 => CollateralKind::Prepayment { pc_id: String::new(), deposit_bp: 100 },
        _ => CollateralKind::Prepayment { pc_id: "PC".into(), deposit_bp: rng.gen_range(10_001..=u32::MAX) },
    }
}

/// A project draft plus its signer. Half the drafts are well formed; the rest
/// break one field.
pub fn random_draft<R: Rng>(rng: &mut R, cast: &Cast) -> (FiProjectDraft, Digest) {
    let anyone: Vec<Digest> = cast.people.iter().map(|p| p.user_number).chain(cast.strangers.iter().copied()).collect();
    let borrowers: Vec<Digest> = [cast.of_type("Supplier"), cast.of_type("Distributor")].concat();
    let time_start = rng.gen_range(0..1_000);
    let mut d = FiProjectDraft {
        fi_project_name: ["a", "b", "loan"].choose(rng).unwrap().to_string(),
        fi_project_number: ["1", "2", "b1"].choose(rng).unwrap().to_string(),
        collateral: valid_collateral(rng),
        amount: rng.gen_range(1..1_000_000),
        interest_rate_bp: rng.gen_range(0..2_000),
        time_start,
        time_end: time_start + rng.gen_range(1..1_000),
        ce_index: *cast.of_type("CoreEnterprise").choose(rng).unwrap(),
        fe_index: *borrowers.choose(rng).unwrap(),
        fi_index: *cast.of_type("FinancialInstitution").choose(rng).unwrap(),
    };
    if rng.gen_bool(0.5) {
        match rng.gen_range(0..8) {
            0 => d.fi_project_name.clear(),
            1 => d.fi_project_number.clear(),
            2 => d.collateral = broken_collateral(rng),
            3 => d.amount = 0,
            4 => d.time_end = d.time_start - rng.gen_range(0..=d.time_start.min(5)),
            5 => d.ce_index = *anyone.choose(rng).unwrap(),
            6 => d.fe_index = *anyone.choose(rng).unwrap(),
            _ => d.fi_index = *anyone.choose(rng).unwrap(),
        }
    }
    let signer = match rng.gen_range(0..20) {
        0..=11 => d.fi_index,
        12..=14 => cast.admin().user_number,
        _ => *anyone.choose(rng).unwrap(),
    };
    (d, signer)
}

/// A base state holding the cast and a few projects the drafts can collide with.
pub fn project_base<R: Rng>(rng: &mut R, cast: &Cast) -> WorldState {
    let mut state = cast.state().clone();
    let mut added = 0;
    while added < 3 {
        let (d, _) = random_draft(rng, cast);
        let mut ctx = TxContext::new(&state);
        let ok = add_fi_project(&mut ctx, d.clone(), d.fi_index).is_ok();
        let (_, writes) = ctx.finish();
        if ok {
            state.apply(&writes);
            added += 1;
        }
    }
    state
}

/// Runs the contract on one case and compares it with the oracle, including
/// the stored record and the absence of writes on failure.
pub fn check_add_fi_project(base: &WorldState, d: &FiProjectDraft, signer: Digest) -> Result<(), String> {
    let expected = oracle_add_fi_project(base, d, &signer);
    let mut ctx = TxContext::new(base);
    let got = add_fi_project(&mut ctx, d.clone(), signer);
    let (_, writes) = ctx.finish();
    match (expected, got) {
        (Ok(a), Ok(b)) if a == b => {
            let mut record = serde_json::to_value(d).unwrap();
            record["fiProjectId"] = json!(a.to_hex());
            record["status"] = json!("Active");
            let key = format!("fp:{}", a.to_hex());
            let stored = writes.iter().find(|w| w.key == key).and_then(|w| w.value.clone());
            if stored != Some(record) {
                return Err(format!("stored record differs for {d:?}"));
            }
            Ok(())
        }
        (Err(code), Err(e)) if code == e.code() => {
            if writes.is_empty() {
                Ok(())
            } else {
                Err(format!("{code} left {} writes", writes.len()))
            }
        }
        (expected, got) => Err(format!("oracle {expected:?}, contract {:?} for {d:?}", got.map_err(|e| e.code()))),
    }
}

// ---------------------------------------------------------------------------
// Access decisions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleDecision {
    /// "Grant", "NoPolicy" or "Denied".
    pub kind: &'static str,
    /// Every policy that would grant on its own.
    pub grants: BTreeSet<Digest>,
    pub expired: BTreeSet<Digest>,
}

fn bound(e: &Value, name: &str, default: u64) -> u64 {
    e.get(name).and_then(Value::as_u64).unwrap_or(default)
}

/// Scans every stored policy: it matches when each subject matcher entry
/// equals the request's subject attribute and each object matcher entry
/// equals the request's object attribute (a subject reference resolving
/// through the subject). A matching policy grants when its bit for `op` is 1
/// and `now` lies inside its window, and is expired when its window ended
/// before `now`.
pub fn oracle_decide(state: &WorldState, s_u: &Value, o_u: &Value, op: &str, now: u64) -> OracleDecision {
    let empty = Map::new();
    let obj = |v: &Value| v.as_object().cloned().unwrap_or_else(|| empty.clone());
    let (s_u, o_u) = (obj(s_u), obj(o_u));
    let mut matched = false;
    let mut grants = BTreeSet::new();
    let mut expired = BTreeSet::new();
    for (key, p) in &state.state {
        let Some(hex) = key.strip_prefix("policy:") else { continue };
        let id: Digest = hex.parse().unwrap();
        let s_ok = obj(&p["S"]).iter().all(|(k, v)| s_u.get(k) == Some(v));
        let o_ok = obj(&p["O"]).iter().all(|(k, v)| match (o_u.get(k), v.get("subjectRef")) {
            (None, _) => false,
            (Some(have), Some(r)) => r.as_str().and_then(|r| s_u.get(r)) == Some(have),
            (Some(have), None) => have == v,
        });
        if !(s_ok && o_ok) {
            continue;
        }
        matched = true;
        let (from, until) = (bound(&p["E"], "validFrom", 0), bound(&p["E"], "validUntil", u64::MAX));
        if until < now {
            expired.insert(id);
        }
        if p["P"][op] == json!(1) && from <= now && now <= until {
            grants.insert(id);
        }
    }
    let kind = match (grants.is_empty(), matched) {
        (false, _) => "Grant",
        (true, false) => "NoPolicy",
        (true, true) => "Denied",
    };
    OracleDecision { kind, grants, expired }
}

pub fn access_code(e: &AccessError) -> &'static str {
    match e {
        AccessError::NoPolicy => "NoPolicy",
        AccessError::Denied => "Denied",
        AccessError::MalformedAttributes(_) => "Malformed",
        AccessError::Identity(IdentityError::BadSignature) => "BadSignature",
        AccessError::Identity(IdentityError::UnknownUser(_)) => "UnknownUser",
        AccessError::Identity(_) => "Identity",
    }
}

/// Compares an engine outcome with the oracle's decision.
pub fn agree(outcome: &abac::AccessOutcome, oracle: &OracleDecision) -> Result<(), String> {
    let kind_ok = match &outcome.decision {
        Ok(id) => oracle.kind == "Grant" && oracle.grants.contains(id),
        Err(e) => access_code(e) == oracle.kind,
    };
    let expired: BTreeSet<Digest> = outcome.expired.iter().copied().collect();
    if kind_ok && expired == oracle.expired && expired.len() == outcome.expired.len() {
        Ok(())
    } else {
        Err(format!("engine {outcome:?}, oracle {oracle:?}"))
    }
}

/// A stored policy drawn from small attribute pools so that requests often
/// match; windows straddle `base`.
pub fn random_policy<R: Rng>(rng: &mut R, people: &[Participant], base: u64) -> AbacPolicy {
    let who = |rng: &mut R| AttrValue::text(people.choose(rng).unwrap().user_number.to_hex());
    let mut s = AttributeSet::new();
    if rng.gen_bool(0.5) {
        s.insert("userType", AttrValue::text(*ROLES.choose(rng).unwrap()));
    }
    if rng.gen_bool(0.2) {
        s.insert("userNumber", who(rng));
    }
    if rng.gen_bool(0.15) {
        s.insert("org", AttrValue::text(*["o1", "o2"].choose(rng).unwrap()));
    }
    let mut o = AttributeSet::new();
    if rng.gen_bool(0.6) {
        o.insert("resourceType", AttrValue::text(*["FiProject", "User", "Policy"].choose(rng).unwrap()));
    }
    if rng.gen_bool(0.3) {
        o.insert("fiProjectId", AttrValue::text(*["p1", "p2"].choose(rng).unwrap()));
    }
    if rng.gen_bool(0.3) {
        let owner = match rng.gen_range(0..4) {
            0 | 1 => AttrValue::subject_ref("userNumber"),
            2 => AttrValue::subject_ref("org"),
            _ => who(rng),
        };
        o.insert("owner", owner);
    }
    let mut p = std::collections::BTreeMap::new();
    for op in OPS {
        if rng.gen_bool(0.5) {
            p.insert(op.to_string(), if rng.gen_bool(0.7) { 1 } else { 0 });
        }
    }
    let from = (base as i64 + rng.gen_range(-300..300)).max(0) as u64;
    let until = from + rng.gen_range(0..400);
    let e = match rng.gen_range(0..10) {
        0 => AttributeSet::new(),
        1 => AttributeSet::from_pairs([("validUntil", AttrValue::Int(until as i64))]),
        _ => AttributeSet::window(from, until),
    };
    AbacPolicy::from_spec(PolicySpec { s, o, p, e })
}

/// `base` with up to `max` random policies written straight into the store.
pub fn random_store<R: Rng>(rng: &mut R, base: &WorldState, people: &[Participant], now: u64, max: usize) -> WorldState {
    let mut state = base.clone();
    for _ in 0..rng.gen_range(0..=max) {
        let p = random_policy(rng, people, now);
        state.state.insert(format!("policy:{}", p.policy_id.to_hex()), serde_json::to_value(&p).unwrap());
    }
    state
}

/// Subject and object attributes for a request by `who`.
pub fn random_attrs<R: Rng>(rng: &mut R, who: &Participant, people: &[Participant]) -> (AttributeSet, AttributeSet) {
    let mut s = AttributeSet::from_pairs([("userNumber", AttrValue::text(who.user_number.to_hex()))]);
    if rng.gen_bool(0.9) {
        let role = if rng.gen_bool(0.8) { who.role.as_str() } else { ROLES.choose(rng).unwrap() };
        s.insert("userType", AttrValue::text(role));
    }
    if rng.gen_bool(0.5) {
        s.insert("org", AttrValue::text(*["o1", "o2"].choose(rng).unwrap()));
    }
    let mut o = AttributeSet::new();
    if rng.gen_bool(0.8) {
        o.insert("resourceType", AttrValue::text(*["FiProject", "User", "Policy"].choose(rng).unwrap()));
    }
    if rng.gen_bool(0.5) {
        o.insert("fiProjectId", AttrValue::text(*["p1", "p2"].choose(rng).unwrap()));
    }
    if rng.gen_bool(0.6) {
        let owner = if rng.gen_bool(0.5) { who } else { people.choose(rng).unwrap() };
        o.insert("owner", AttrValue::text(owner.user_number.to_hex()));
    }
    (s, o)
}

/// One envelope per participant, signed once and reused.
pub fn envelopes(people: &[Participant], now: u64) -> Vec<SignedEnvelope> {
    people
        .iter()
        .enumerate()
        .map(|(i, p)| SignedEnvelope::sign(&p.keys, p.user_number, "CheckAccess".into(), Nonce([i as u8; 16]), now))
        .collect()
}

/// What the authentication and attribute steps must conclude before any
/// policy is consulted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tamper {
    None,
    Signature,
    Stranger,
    ForeignNumber,
    UnknownAttribute,
    UnknownRole,
}

impl Tamper {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        match rng.gen_range(0..20) {
            0 => Tamper::Signature,
            1 => Tamper::Stranger,
            2 => Tamper::ForeignNumber,
            3 => Tamper::UnknownAttribute,
            4 => Tamper::UnknownRole,
            _ => Tamper::None,
        }
    }

    pub fn expected(self) -> Option<&'static str> {
        match self {
            Tamper::None => None,
            Tamper::Signature => Some("BadSignature"),
            Tamper::Stranger => Some("UnknownUser"),
            Tamper::ForeignNumber | Tamper::UnknownAttribute | Tamper::UnknownRole => Some("Malformed"),
        }
    }
}

/// A full access request by `people[who]`, possibly tampered.
pub fn access_request<R: Rng>(
    rng: &mut R,
    people: &[Participant],
    envelopes: &[SignedEnvelope],
    who: usize,
    tamper: Tamper,
) -> AccessRequest {
    let (mut s_u, o_u) = random_attrs(rng, &people[who], people);
    let mut envelope = envelopes[who].clone();
    match tamper {
        Tamper::None => {}
        Tamper::Signature => envelope.signature.0[rng.gen_range(0..64)] ^= 1 << rng.gen_range(0..8),
        Tamper::Stranger => {
            let stranger = Digest::of(b"stranger-1");
            envelope.signer_user_number = stranger;
            s_u.insert("userNumber", AttrValue::text(stranger.to_hex()));
        }
        Tamper::ForeignNumber => {
            let other = &people[(who + 1) % people.len()];
            s_u.insert("userNumber", AttrValue::text(other.user_number.to_hex()));
        }
        Tamper::UnknownAttribute => s_u.insert("color", AttrValue::text("red")),
        Tamper::UnknownRole => s_u.insert("userType", AttrValue::text("Pirate")),
    }
    AccessRequest {
        envelope,
        requested_op: OPS.choose(rng).unwrap().to_string(),
        s_u,
        o_u,
        e_u: AttributeSet::new(),
    }
}

/// Runs the full access check on one request and compares it with the
/// tampering verdict or, for untampered requests, the exhaustive evaluator.
pub fn check_access_case(state: &WorldState, req: &AccessRequest, tamper: Tamper, now: u64) -> Result<(), String> {
    let outcome = abac::check_access(req, state, now);
    match tamper.expected() {
        Some(code) => match &outcome.decision {
            Err(e) if access_code(e) == code && outcome.expired.is_empty() => Ok(()),
            other => Err(format!("{tamper:?}: expected {code}, got {other:?}")),
        },
        None => {
            let s = serde_json::to_value(&req.s_u).unwrap();
            let o = serde_json::to_value(&req.o_u).unwrap();
            agree(&outcome, &oracle_decide(state, &s, &o, &req.requested_op, now))
        }
    }
}

// ---------------------------------------------------------------------------
// Adding a policy
// ---------------------------------------------------------------------------

/// Well-formedness of a policy in its wire form at creation time `now`.
pub fn oracle_check_policy(spec: &Value, now: u64) -> bool {
    let empty = Map::new();
    let section = |k: &str| spec.get(k).and_then(Value::as_object).unwrap_or(&empty);
    let (s, o, p, e) = (section("S"), section("O"), section("P"), section("E"));
    let plain = |v: &Value| v.is_string() || v.is_i64();
    let subject_ok = s.iter().all(|(k, v)| match k.as_str() {
        "userType" => v.as_str().is_some_and(|t| ROLES.contains(&t)),
        "userNumber" | "org" => plain(v),
        _ => false,
    });
    let object_ok = o.iter().all(|(k, v)| {
        ["resourceType", "fiProjectId", "owner"].contains(&k.as_str())
            && (plain(v)
                || v.get("subjectRef")
                    .and_then(Value::as_str)
                    .is_some_and(|r| ["userType", "userNumber", "org"].contains(&r)))
    });
    let env_ok = e.iter().all(|(k, v)| ["validFrom", "validUntil"].contains(&k.as_str()) && v.as_u64().is_some());
    let (from, until) = (bound(&Value::Object(e.clone()), "validFrom", 0), bound(&Value::Object(e.clone()), "validUntil", u64::MAX));
    let perms_ok = !p.is_empty()
        && p.iter().all(|(k, v)| METHODS.contains(&k.as_str()) && (v == &json!(0) || v == &json!(1)));
    subject_ok && object_ok && env_ok && from <= until && !(s.is_empty() && o.is_empty()) && perms_ok && now <= until
}

/// Check the caller, check the policy, derive the id from the canonical
/// subject and object matchers, refuse duplicates.
pub fn oracle_add_policy(state: &WorldState, spec: &Value, signer: &Digest, now: u64) -> Result<Digest, &'static str> {
    if !is_admin(state, signer) {
        return Err("NotAuthorized");
    }
    if !oracle_check_policy(spec, now) {
        return Err("BadPolicy");
    }
    let s = serde_json::to_vec(&spec["S"]).unwrap();
    let o = serde_json::to_vec(&spec["O"]).unwrap();
    let id = tagged_hash("policy", &[("S", &s), ("O", &o)]);
    if raw(state, "policy", &id).is_some() {
        return Err("DuplicatePolicy");
    }
    Ok(id)
}

fn attr_value<R: Rng>(rng: &mut R, pool: &[&str]) -> AttrValue {
    match rng.gen_range(0..12) {
        0 => AttrValue::Int(rng.gen_range(-2..5)),
        1 => AttrValue::subject_ref(["userNumber", "org", "userType", "shoeSize"].choose(rng).unwrap()),
        _ => AttrValue::text(*pool.choose(rng).unwrap()),
    }
}

/// A policy proposal that is well formed about half the time, with matchers
/// drawn from pools small enough to collide with stored policies.
pub fn random_spec<R: Rng>(rng: &mut R, now: u64) -> PolicySpec {
    let mut s = AttributeSet::new();
    if rng.gen_bool(0.6) {
        let role = if rng.gen_bool(0.9) { ROLES[rng.gen_range(0..2)] } else { "Pirate" };
        let v = if rng.gen_bool(0.9) { AttrValue::text(role) } else { attr_value(rng, &ROLES) };
        s.insert("userType", v);
    }
    if rng.gen_bool(0.2) {
        s.insert("org", attr_value(rng, &["o1"]));
    }
    if rng.gen_bool(0.03) {
        s.insert("color", AttrValue::text("red"));
    }
    let mut o = AttributeSet::new();
    if rng.gen_bool(0.6) {
        o.insert("resourceType", AttrValue::text(*["FiProject", "User"].choose(rng).unwrap()));
    }
    if rng.gen_bool(0.3) {
        o.insert("owner", attr_value(rng, &["u1"]));
    }
    if rng.gen_bool(0.03) {
        o.insert("shape", AttrValue::text("round"));
    }
    let mut p = std::collections::BTreeMap::new();
    for _ in 0..rng.gen_range(0..4) {
        let op = if rng.gen_bool(0.95) { *METHODS.choose(rng).unwrap() } else { "Launch" };
        p.insert(op.to_string(), *[1, 1, 1, 0, 0, 2, -1].choose(rng).unwrap());
    }
    let from = now as i64 + rng.gen_range(-100..100);
    let until = from + rng.gen_range(-20..300);
    let mut e = AttributeSet::from_pairs([("validFrom", AttrValue::Int(from)), ("validUntil", AttrValue::Int(until))]);
    match rng.gen_range(0..30) {
        0 => e = AttributeSet::new(),
        1 => e.insert("validFrom", AttrValue::Int(-1)),
        2 => e.insert("validUntil", AttrValue::text("soon")),
        3 => e.insert("region", AttrValue::text("eu")),
        _ => {}
    }
    PolicySpec { s, o, p, e }
}

/// Runs the contract on one proposal and compares it with the oracle.
pub fn check_add_policy(base: &WorldState, spec: &PolicySpec, signer: Digest, now: u64) -> Result<(), String> {
    let wire = serde_json::to_value(spec).unwrap();
    let expected = oracle_add_policy(base, &wire, &signer, now);
    let mut ctx = TxContext::new(base);
    let got = abac::add_policy(&mut ctx, spec.clone(), &signer, now);
    let (_, writes) = ctx.finish();
    match (expected, got) {
        (Ok(a), Ok(b)) if a == b => {
            let mut record = wire.clone();
            record["policyId"] = json!(a.to_hex());
            let stored: Vec<_> = writes.iter().map(|w| (w.key.clone(), w.value.clone())).collect();
            if stored != vec![(format!("policy:{}", a.to_hex()), Some(record))] {
                return Err(format!("unexpected writes {stored:?}"));
            }
            Ok(())
        }
        (Err(code), Err(e)) if code == e.code() => {
            if writes.is_empty() {
                Ok(())
            } else {
                Err(format!("{code} left {} writes", writes.len()))
            }
        }
        (expected, got) => Err(format!("oracle {expected:?}, contract {:?} for {wire}", got.map_err(|e| e.code()))),
    }
}

/// `base` with some of the proposals the generator makes already stored.
pub fn policy_base<R: Rng>(rng: &mut R, cast: &Cast, now: u64) -> WorldState {
    let mut state = cast.state().clone();
    let admin = cast.admin().user_number;
    for _ in 0..40 {
        let spec = random_spec(rng, now);
        let mut ctx = TxContext::new(&state);
        let ok = abac::add_policy(&mut ctx, spec, &admin, now).is_ok();
        let (_, writes) = ctx.finish();
        if ok {
            state.apply(&writes);
        }
    }
    state
}
