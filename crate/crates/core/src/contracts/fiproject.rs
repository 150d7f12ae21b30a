//! Financing-project management.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{is_admin, ContractError};
use crate::abac::{self, AccessOutcome, AttributeSet};
use crate::domain::{derive_project_id, Digest, FiProject, FiProjectDraft, ProjectStatus, User, UserType};
use crate::ledger::state::{keys, StateView, TxContext};

/// The first project rule a candidate violates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FpRule {
    EmptyName,
    EmptyNumber,
    IdMismatch,
    Collateral(String),
    ZeroAmount,
    Time,
    UnknownParty(&'static str),
    WrongPartyType(&'static str),
}

impl fmt::Display for FpRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FpRule::EmptyName => f.write_str("empty project name"),
            FpRule::EmptyNumber => f.write_str("empty project number"),
            FpRule::IdMismatch => f.write_str("project id does not match name and number"),
            FpRule::Collateral(why) => write!(f, "collateral: {why}"),
            FpRule::ZeroAmount => f.write_str("amount must be positive"),
            FpRule::Time => f.write_str("timeStart must precede timeEnd"),
            FpRule::UnknownParty(role) => write!(f, "{role} index is not a registered user"),
            FpRule::WrongPartyType(role) => write!(f, "wrong party type for {role} index"),
        }
    }
}

/// Checks the key fields of a project and its three party references.
pub fn check_fi_project<V: StateView>(view: &V, fp: &FiProject) -> Result<(), FpRule> {
    if fp.fi_project_name.is_empty() {
        return Err(FpRule::EmptyName);
    }
    if fp.fi_project_number.is_empty() {
        return Err(FpRule::EmptyNumber);
    }
    if derive_project_id(&fp.fi_project_name, &fp.fi_project_number).ok() != Some(fp.fi_project_id) {
        return Err(FpRule::IdMismatch);
    }
    fp.collateral.validate().map_err(|e| FpRule::Collateral(e.to_string()))?;
    if fp.amount == 0 {
        return Err(FpRule::ZeroAmount);
    }
    if fp.time_start >= fp.time_end {
        return Err(FpRule::Time);
    }
    let parties: [(&'static str, Digest, fn(UserType) -> bool); 3] = [
        ("CE", fp.ce_index, |t| t == UserType::CoreEnterprise),
        ("FE", fp.fe_index, UserType::can_borrow),
        ("FI", fp.fi_index, |t| t == UserType::FinancialInstitution),
    ];
    for (role, index, type_ok) in parties {
        let user: User = view.get_as(&keys::user(&index)).ok_or(FpRule::UnknownParty(role))?;
        if !type_ok(user.user_type) {
            return Err(FpRule::WrongPartyType(role));
        }
    }
    Ok(())
}

/// Adds a project: check, derive the id, write record and indexes.
///
/// Only the lending institution named in the project, or the administrator,
/// may originate it.
pub fn add_fi_project(
    ctx: &mut TxContext<'_>,
    draft: FiProjectDraft,
    signer: Digest,
) -> Result<Digest, ContractError> {
    let fp = draft_to_project(draft);
    check_fi_project(ctx, &fp).map_err(|r| ContractError::BadFp(r.to_string()))?;
    let id = fp.fi_project_id;
    if signer != fp.fi_index && !is_admin(ctx, &signer) {
        return Err(ContractError::NotAuthorized("only the lending institution or admin may add".into()));
    }
    if ctx.contains(&keys::project(&id)) {
        return Err(ContractError::AlreadyExists(format!("project {id}")));
    }
    for party in fp.parties().members() {
        let key = keys::user_projects(&party);
        let mut set: BTreeSet<Digest> = ctx.get_as(&key).unwrap_or_default();
        set.insert(id);
        ctx.put(key, &set);
    }
    for key in [keys::project_name(&fp.fi_project_name), keys::project_number(&fp.fi_project_number)] {
        let mut ids: BTreeSet<Digest> = ctx.get_as(&key).unwrap_or_default();
        ids.insert(id);
        ctx.put(key, &ids);
    }
    ctx.put(keys::project_parties(&id), &fp.parties());
    ctx.put(keys::project(&id), &fp);
    Ok(id)
}

/// Builds the stored record without validating; validation is
/// [`check_fi_project`]'s job so that every rule reports as BadFP.
pub fn draft_to_project(draft: FiProjectDraft) -> FiProject {
    let id = derive_project_id(&draft.fi_project_name, &draft.fi_project_number).unwrap_or(Digest::ZERO);
    FiProject {
        fi_project_name: draft.fi_project_name,
        fi_project_number: draft.fi_project_number,
        fi_project_id: id,
        collateral: draft.collateral,
        amount: draft.amount,
        interest_rate_bp: draft.interest_rate_bp,
        time_start: draft.time_start,
        time_end: draft.time_end,
        ce_index: draft.ce_index,
        fe_index: draft.fe_index,
        fi_index: draft.fi_index,
        status: ProjectStatus::Active,
    }
}

/// Resolves a project by id, number or name (in that order).
pub fn query_fi_project<V: StateView>(view: &V, key: &str) -> Result<FiProject, ContractError> {
    if let Ok(id) = key.parse::<Digest>() {
        if let Some(fp) = view.get_as(&keys::project(&id)) {
            return Ok(fp);
        }
    }
    for index in [keys::project_number(key), keys::project_name(key)] {
        if let Some(ids) = view.get_as::<BTreeSet<Digest>>(&index) {
            let mut it = ids.iter();
            match (it.next(), it.next()) {
                (Some(id), None) => {
                    return view
                        .get_as(&keys::project(id))
                        .ok_or_else(|| ContractError::NotFound(format!("project {key:?}")));
                }
                (Some(_), Some(_)) => return Err(ContractError::Ambiguous(format!("project key {key:?}"))),
                _ => {}
            }
        }
    }
    Err(ContractError::NotFound(format!("project {key:?}")))
}

/// Object attributes describing `fp` as seen by `requester`.
///
/// `owner` resolves to the requester when the requester is one of the
/// project's parties and to the financing enterprise otherwise, so a policy
/// whose `owner` matcher references the subject grants exactly the parties.
pub fn object_attrs(fp: &FiProject, requester: &Digest) -> AttributeSet {
    let owner = if fp.parties().contains(requester) { *requester } else { fp.fe_index };
    AttributeSet::from_pairs([
        ("resourceType", abac::AttrValue::text(abac::RESOURCE_FI_PROJECT)),
        ("fiProjectId", abac::AttrValue::text(fp.fi_project_id.to_hex())),
        ("owner", abac::AttrValue::text(owner.to_hex())),
    ])
}

/// Access-gated read: the requester must hold a policy granting
/// `QueryFiProject` on the project. Returns the decision's side effects too.
pub fn query_fi_project_as<V: StateView>(
    view: &V,
    key: &str,
    requester: &Digest,
    now: u64,
) -> Result<(FiProject, AccessOutcome), ContractError> {
    let fp = query_fi_project(view, key)?;
    let subject = abac::subject_attrs(view, requester)
        .ok_or_else(|| ContractError::AccessDenied("requester is not registered".into()))?;
    let outcome = abac::decide(view, &subject, &object_attrs(&fp, requester), "QueryFiProject", now);
    match &outcome.decision {
        Ok(_) => Ok((fp, outcome)),
        Err(e) => Err(ContractError::AccessDenied(e.to_string())),
    }
}

pub const UPDATABLE_FIELDS: [&str; 4] = ["interestRateBp", "timeEnd", "amount", "status"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct UpdateArgs {
    pub fi_project_id: Digest,
    pub changes: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DeleteArgs {
    pub fi_project_id: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateRequest {
    pub fi_project_id: Digest,
    pub changes: BTreeMap<String, Value>,
    pub requester: Digest,
}

/// Validates an update; on success returns the current record and the record
/// as it would be after the update.
pub fn check_udv_info<V: StateView>(
    view: &V,
    req: &UpdateRequest,
) -> Result<(FiProject, FiProject), ContractError> {
    let old: FiProject = view
        .get_as(&keys::project(&req.fi_project_id))
        .ok_or_else(|| ContractError::NotFound(format!("project {}", req.fi_project_id)))?;
    if old.status != ProjectStatus::Active {
        return Err(ContractError::Frozen(format!("{:?}", old.status)));
    }
    if req.changes.is_empty() {
        return Err(ContractError::IllegalField("<none>".into()));
    }
    if let Some(bad) = req.changes.keys().find(|k| !UPDATABLE_FIELDS.contains(&k.as_str())) {
        return Err(ContractError::IllegalField(bad.clone()));
    }
    let mut new = old.clone();
    for (field, value) in &req.changes {
        let illegal = || ContractError::IllegalValue(format!("{field} = {value}"));
        match field.as_str() {
            "interestRateBp" => {
                new.interest_rate_bp = value.as_u64().and_then(|v| u32::try_from(v).ok()).ok_or_else(illegal)?;
            }
            "timeEnd" => new.time_end = value.as_u64().ok_or_else(illegal)?,
            "amount" => new.amount = value.as_u64().filter(|&a| a > 0).ok_or_else(illegal)?,
            "status" => {
                new.status = match value.as_str() {
                    Some("Repaid") => ProjectStatus::Repaid,
                    Some("Deleted") => ProjectStatus::Deleted,
                    _ => return Err(illegal()),
                }
            }
            _ => unreachable!("filtered above"),
        }
    }
    if new.time_end <= new.time_start {
        return Err(ContractError::IllegalValue("timeEnd must follow timeStart".into()));
    }
    if !old.parties().contains(&req.requester) && !is_admin(view, &req.requester) {
        return Err(ContractError::NotParty);
    }
    Ok((old, new))
}

/// Applies a validated update. The output records old and new values of the
/// changed fields; the id never changes.
pub fn update_fi_project(ctx: &mut TxContext<'_>, req: &UpdateRequest) -> Result<Value, ContractError> {
    let (old, new) = check_udv_info(ctx, req)?;
    let old_json = super::to_json(&old);
    let new_json = super::to_json(&new);
    let mut before = Map::new();
    let mut after = Map::new();
    for field in req.changes.keys() {
        before.insert(field.clone(), old_json[field].clone());
        after.insert(field.clone(), new_json[field].clone());
    }
    ctx.put(keys::project(&new.fi_project_id), &new);
    Ok(json!({ "fiProjectId": new.fi_project_id, "old": before, "new": after }))
}

/// Tombstones an Active project. The record stays readable with status
/// `Deleted`.
pub fn delete_fi_project(ctx: &mut TxContext<'_>, id: &Digest, requester: &Digest) -> Result<(), ContractError> {
    let mut fp: FiProject = ctx
        .get_as(&keys::project(id))
        .ok_or_else(|| ContractError::NotFound(format!("project {id}")))?;
    if fp.status != ProjectStatus::Active {
        return Err(ContractError::Frozen(format!("{:?}", fp.status)));
    }
    if !fp.parties().contains(requester) && !is_admin(ctx, requester) {
        return Err(ContractError::NotParty);
    }
    fp.status = ProjectStatus::Deleted;
    ctx.put(keys::project(id), &fp);
    Ok(())
}
