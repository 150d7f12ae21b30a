//! Request routing: JSON requests in, status code and JSON body out. The
//! HTTP server and the CLI both go through [`Gateway::route`].

mod config;

pub use config::{ConfigError, GatewayConfig, CONFIG_ENV, DEFAULT_CONFIG_PATH};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::abac::{self, AccessError, AccessRequest, AttrValue, AttributeSet};
use crate::contracts::fiproject::{check_fi_project, draft_to_project, query_fi_project_as};
use crate::contracts::user::query_user;
use crate::contracts::{parse_args, ContractError, Method};
use crate::domain::{Digest, FiProjectDraft, UserType};
use crate::identity::{authenticate, check_user, IdentityError, Nonce, Role, SignedEnvelope};
use crate::ledger::tx::payload_for;
use crate::ledger::{SubmitError, Transaction, TxRejection};
use crate::workflows::{Network, Participant, WorkflowError};

pub const MAX_BODY_BYTES: usize = 1 << 20;
/// Largest accepted difference between an envelope timestamp and the
/// gateway clock, in seconds.
pub const MAX_CLOCK_SKEW_SECS: u64 = 300;
pub const REQ_ID_HEADER: &str = "x-req-id";

/// A signed call: the envelope payload must be the canonical
/// `{"args", "method"}` object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApiRequest {
    pub method: String,
    #[serde(default)]
    pub args: Value,
    pub envelope: SignedEnvelope,
}

impl ApiRequest {
    pub fn signed(who: &Participant, method: &str, args: Value, nonce: Nonce, timestamp: u64) -> Self {
        let envelope = SignedEnvelope::sign(&who.keys, who.user_number, payload_for(method, &args), nonce, timestamp);
        ApiRequest { method: method.to_string(), args, envelope }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiResponse {
    pub status: u16,
    pub req_id: String,
    pub body: Value,
}

/// An error mapped to an HTTP status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: u16, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, code: code.to_string(), message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(400, "BadRequest", message)
    }
}

/// HTTP status for a contract or ledger error code.
pub fn status_for_code(code: &str) -> u16 {
    match code {
        "NotFound" => 404,
        "AlreadyExists" | "DuplicatePolicy" | "DuplicateTxId" | "Frozen" => 409,
        "NotAuthorized" | "BadSignature" | "UnknownUser" | "ExpiredCertificate" | "TypeMismatch" => 401,
        "AccessDenied" | "NotParty" | "NoPolicy" | "Denied" => 403,
        "BadArgs" | "EmptyName" | "BadKey" | "BadFP" | "IllegalField" | "IllegalValue" | "BadPolicy" | "Ambiguous"
        | "UnknownOp" | "ReadOnly" | "BadPayload" | "BadTxId" | "BadGenesis" | "MalformedAttributes" => 400,
        _ => 500,
    }
}

impl From<ContractError> for ApiError {
    fn from(e: ContractError) -> Self {
        ApiError::new(status_for_code(e.code()), e.code(), e.to_string())
    }
}

impl From<IdentityError> for ApiError {
    fn from(e: IdentityError) -> Self {
        ContractError::Identity(e).into()
    }
}

impl From<AccessError> for ApiError {
    fn from(e: AccessError) -> Self {
        match e {
            AccessError::Identity(i) => i.into(),
            AccessError::NoPolicy => ApiError::new(403, "NoPolicy", e.to_string()),
            AccessError::Denied => ApiError::new(403, "Denied", e.to_string()),
            AccessError::MalformedAttributes(_) => ApiError::new(400, "MalformedAttributes", e.to_string()),
        }
    }
}

impl From<WorkflowError> for ApiError {
    fn from(e: WorkflowError) -> Self {
        match e {
            WorkflowError::Rejected(r) => ApiError::new(status_for_code(r.code()), r.code(), r.to_string()),
            WorkflowError::Submit(s) => {
                let code = match &s {
                    SubmitError::UnknownOp(_) => "UnknownOp",
                    SubmitError::ReadOnly(_) => "ReadOnly",
                    SubmitError::BadTxId => "BadTxId",
                    SubmitError::DuplicateTxId(_) => "DuplicateTxId",
                    SubmitError::Identity(i) => ContractError::Identity(i.clone()).code(),
                    SubmitError::Lifecycle(_) | SubmitError::Commit(_) => "Internal",
                };
                ApiError::new(status_for_code(code), code, s.to_string())
            }
            WorkflowError::Invalid { code, message } => ApiError::new(500, &code, message),
            WorkflowError::BadParty(m) => ApiError::bad_request(m),
            WorkflowError::EmptyCollateral | WorkflowError::BadDeposit | WorkflowError::Config(_) => {
                ApiError::bad_request(e.to_string())
            }
            WorkflowError::UnknownParticipant(_) => ApiError::new(404, "NotFound", e.to_string()),
            WorkflowError::Identity(i) => i.into(),
            other => ApiError::new(500, "Internal", other.to_string()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyArgs {
    key: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct CheckUserArgs {
    user_type: UserType,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryPolicyArgs {
    #[serde(rename = "S")]
    s: Option<AttributeSet>,
    #[serde(rename = "O")]
    o: Option<AttributeSet>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckAccessArgs {
    #[serde(rename = "requestedOp")]
    requested_op: String,
    #[serde(rename = "O_u", default)]
    o_u: AttributeSet,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct AssignArgs {
    subject: AttributeSet,
    object: AttributeSet,
    ops: Vec<String>,
    valid_from: u64,
    valid_until: u64,
}

/// Admin-only actions under `/admin/`.
pub const ADMIN_ACTIONS: [&str; 6] =
    ["AddPolicy", "UpdatePolicy", "DeletePolicy", "QueryPolicy", "AssignUserAccess", "DeployDefaultPolicies"];

pub struct Gateway {
    net: Network,
    next_req: u64,
    queued_expiry: HashSet<Digest>,
}

impl Gateway {
    pub fn new(net: Network) -> Self {
        Gateway { net, next_req: 0, queued_expiry: HashSet::new() }
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn into_network(self) -> Network {
        self.net
    }

    /// Cuts a block if the batch timer has run out.
    pub fn tick(&mut self) {
        let _ = self.net.node_mut().tick();
    }

    /// Handles `path` with a JSON `body`. `req_id` is echoed back, or one is
    /// assigned.
    pub fn route(&mut self, path: &str, body: &[u8], req_id: Option<String>) -> ApiResponse {
        let req_id = req_id.unwrap_or_else(|| {
            self.next_req += 1;
            format!("req-{}", self.next_req)
        });
        self.tick();
        let (status, body) = match self.dispatch(path, body) {
            Ok(v) => (200, v),
            Err(e) => (e.status, json!({ "error": { "code": e.code, "message": e.message } })),
        };
        let mut body = body;
        if let Value::Object(map) = &mut body {
            map.insert("reqId".into(), Value::String(req_id.clone()));
        }
        ApiResponse { status, req_id, body }
    }

    fn dispatch(&mut self, path: &str, body: &[u8]) -> Result<Value, ApiError> {
        if body.len() > MAX_BODY_BYTES {
            return Err(ApiError::bad_request("body exceeds 1 MiB"));
        }
        let req: ApiRequest = serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))?;
        match path {
            "/invoke" => self.invoke(req),
            "/query" => self.query(req),
            _ => match path.strip_prefix("/admin/") {
                Some(action) if ADMIN_ACTIONS.contains(&action) => self.admin(action, req),
                _ => Err(ApiError::new(404, "NotFound", format!("no route {path}"))),
            },
        }
    }

    /// Signature, payload binding and clock skew; returns the signer's role.
    fn authenticate(&self, req: &ApiRequest) -> Result<Role, ApiError> {
        if req.envelope.payload != payload_for(&req.method, &req.args) {
            return Err(IdentityError::BadSignature.into());
        }
        let now = self.net.now();
        if req.envelope.timestamp.abs_diff(now) > MAX_CLOCK_SKEW_SECS {
            return Err(ApiError::new(401, "StaleRequest", "envelope timestamp too far from gateway clock"));
        }
        Ok(authenticate(&req.envelope, self.net.node().state(), now)?)
    }

    fn method(req: &ApiRequest) -> Result<Method, ApiError> {
        req.method.parse().map_err(|e: crate::contracts::UnknownMethod| ApiError::new(400, "UnknownOp", e.to_string()))
    }

    fn invoke(&mut self, req: ApiRequest) -> Result<Value, ApiError> {
        let method = Self::method(&req)?;
        if !method.is_write() {
            return Err(ApiError::new(400, "ReadOnly", format!("{method} is served by /query")));
        }
        if method != Method::CreateUser {
            self.authenticate(&req)?;
        } else if req.envelope.timestamp.abs_diff(self.net.now()) > MAX_CLOCK_SKEW_SECS {
            return Err(ApiError::new(401, "StaleRequest", "envelope timestamp too far from gateway clock"));
        }
        let tx = Transaction::new(&req.method, req.args, req.envelope);
        let receipt = self.net.execute(tx)?;
        Ok(serde_json::to_value(receipt).expect("serializes"))
    }

    fn query(&mut self, req: ApiRequest) -> Result<Value, ApiError> {
        let method = Self::method(&req)?;
        if method.is_write() {
            return Err(ApiError::new(400, "WriteMethod", format!("{method} is served by /invoke")));
        }
        self.authenticate(&req)?;
        let who = req.envelope.signer_user_number;
        let now = self.net.now();
        let state = self.net.node().state();
        let subject = abac::subject_attrs(state, &who).unwrap_or_default();
        let resource = |t: &str| AttributeSet::from_pairs([("resourceType", AttrValue::text(t))]);
        let result = match method {
            Method::QueryUser => {
                let a: KeyArgs = parse_args(&req.args)?;
                self.gate(&subject, &resource(abac::RESOURCE_USER), method, now)?;
                json!(query_user(self.net.node().state(), &a.key)?)
            }
            Method::CheckUser => {
                let a: CheckUserArgs = parse_args(&req.args)?;
                let user = check_user(&req.envelope, a.user_type, state, now)?;
                json!({ "userNumber": user.user_number, "userType": user.user_type })
            }
            Method::QueryFiProject => {
                let a: KeyArgs = parse_args(&req.args)?;
                let outcome = query_fi_project_as(state, &a.key, &who, now);
                let (fp, expired) = match outcome {
                    Ok((fp, o)) => (Ok(fp), o.expired),
                    Err(e) => (Err(e), self.expired_for_project(&a.key, &who, now)),
                };
                self.queue_expiry(&expired);
                json!(fp?)
            }
            Method::CheckFiProject => {
                let draft: FiProjectDraft = parse_args(&req.args)?;
                self.gate(&subject, &resource(abac::RESOURCE_FI_PROJECT), method, now)?;
                let fp = draft_to_project(draft);
                match check_fi_project(self.net.node().state(), &fp) {
                    Ok(()) => json!({ "ok": true, "fiProjectId": fp.fi_project_id }),
                    Err(rule) => json!({ "ok": false, "rule": rule.to_string() }),
                }
            }
            Method::QueryPolicy => {
                let a: QueryPolicyArgs = parse_args(&req.args)?;
                self.gate(&subject, &resource(abac::RESOURCE_POLICY), method, now)?;
                json!(abac::query_policy(self.net.node().state(), a.s.as_ref(), a.o.as_ref()))
            }
            Method::CheckAccess => {
                let a: CheckAccessArgs = parse_args(&req.args)?;
                let access = AccessRequest {
                    envelope: req.envelope.clone(),
                    requested_op: a.requested_op,
                    s_u: subject,
                    o_u: a.o_u,
                    e_u: AttributeSet::new(),
                };
                let outcome = abac::check_access(&access, state, now);
                self.queue_expiry(&outcome.expired);
                let policy = outcome.decision?;
                json!({ "decision": "OK", "policyId": policy, "expired": outcome.expired })
            }
            _ => unreachable!("write methods rejected above"),
        };
        Ok(json!({ "result": result }))
    }

    fn expired_for_project(&self, key: &str, who: &Digest, now: u64) -> Vec<Digest> {
        let state = self.net.node().state();
        let (Ok(fp), Some(s)) = (crate::contracts::fiproject::query_fi_project(state, key), abac::subject_attrs(state, who)) else {
            return Vec::new();
        };
        let o = crate::contracts::fiproject::object_attrs(&fp, who);
        abac::decide(state, &s, &o, Method::QueryFiProject.name(), now).expired
    }

    fn gate(&mut self, subject: &AttributeSet, object: &AttributeSet, method: Method, now: u64) -> Result<(), ApiError> {
        let outcome = abac::decide(self.net.node().state(), subject, object, method.name(), now);
        self.queue_expiry(&outcome.expired);
        outcome.decision.map(|_| ()).map_err(ApiError::from)
    }

    /// Queues `AutoExpired` deletions without waiting for their block.
    fn queue_expiry(&mut self, ids: &[Digest]) {
        let state = self.net.node().state();
        self.queued_expiry.retain(|id| abac::get_policy(state, id).is_some());
        for id in ids {
            if self.queued_expiry.insert(*id) {
                let admin = self.net.admin().clone();
                let tx = self.net.sign(&admin, Method::DeletePolicy, json!({ "policyId": id, "cause": "AutoExpired" }));
                if self.net.node().endorse(&tx).is_ok() {
                    let _ = self.net.node_mut().submit(tx);
                }
            }
        }
    }

    fn admin(&mut self, action: &str, req: ApiRequest) -> Result<Value, ApiError> {
        if req.method != action {
            return Err(ApiError::bad_request(format!("method {} does not match /admin/{action}", req.method)));
        }
        if self.authenticate(&req)? != Role::Admin {
            return Err(ApiError::new(401, "NotAuthorized", "administrator credentials required"));
        }
        match action {
            "AddPolicy" | "UpdatePolicy" | "DeletePolicy" => self.invoke(req),
            "QueryPolicy" => {
                let a: QueryPolicyArgs = parse_args(&req.args)?;
                Ok(json!({ "result": abac::query_policy(self.net.node().state(), a.s.as_ref(), a.o.as_ref()) }))
            }
            "AssignUserAccess" => {
                let a: AssignArgs = parse_args(&req.args)?;
                let ops: Vec<&str> = a.ops.iter().map(String::as_str).collect();
                let id = self.net.assign_user_access(a.subject, a.object, &ops, a.valid_from, a.valid_until)?;
                Ok(json!({ "result": { "policyId": id } }))
            }
            "DeployDefaultPolicies" => Ok(json!({ "result": { "policyIds": self.net.deploy_default_policies()? } })),
            _ => unreachable!("checked against ADMIN_ACTIONS"),
        }
    }
}

impl From<TxRejection> for ApiError {
    fn from(r: TxRejection) -> Self {
        ApiError::new(status_for_code(r.code()), r.code(), r.to_string())
    }
}
