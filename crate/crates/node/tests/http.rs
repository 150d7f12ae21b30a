use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use fscf_core::abac::{self, AttrValue, AttributeSet};
use fscf_core::contracts::fiproject::query_fi_project_as;
use fscf_core::domain::UserType;
use fscf_core::gateway::{ApiRequest, Gateway, MAX_BODY_BYTES, REQ_ID_HEADER};
use fscf_core::ledger::{SimClock, Transaction};
use fscf_core::workflows::{init_network, register_cast, Network, NetworkConfig, Participant, ScenarioParams};
use fscf_node::cli::call;
use fscf_node::server::{app, SharedGateway};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const T0: u64 = 1_700_000_000_000;

fn network(clock: &SimClock) -> Network {
    let config = NetworkConfig { block_size: 10, ..NetworkConfig::default() };
    init_network(config, Arc::new(clock.clone())).unwrap()
}

struct Fixture {
    gw: SharedGateway,
    router: Router,
    clock: SimClock,
}

fn fixture() -> Fixture {
    let clock = SimClock::starting_at(T0);
    let gw = Arc::new(Mutex::new(Gateway::new(network(&clock))));
    Fixture { router: app(gw.clone()), gw, clock }
}

impl Fixture {
    fn with_net<T>(&self, f: impl FnOnce(&mut Network) -> T) -> T {
        f(self.gw.lock().unwrap().network_mut())
    }

    fn signed(&self, who: &Participant, method: &str, args: Value) -> Vec<u8> {
        self.with_net(|net| {
            let nonce = net.fresh_nonce();
            serde_json::to_vec(&ApiRequest::signed(who, method, args, nonce, net.now())).unwrap()
        })
    }

    fn height(&self) -> u64 {
        self.with_net(|net| net.node().height())
    }

    async fn post(&self, path: &str, body: Vec<u8>, req_id: Option<&str>) -> (StatusCode, Option<String>, Value) {
        let mut req = Request::builder().method("POST").uri(path).header("content-type", "application/json");
        if let Some(id) = req_id {
            req = req.header(REQ_ID_HEADER, id);
        }
        let resp = self.router.clone().oneshot(req.body(Body::from(body)).unwrap()).await.unwrap();
        let status = resp.status();
        let echoed = resp.headers().get(REQ_ID_HEADER).map(|v| v.to_str().unwrap().to_string());
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, echoed, serde_json::from_slice(&bytes).unwrap())
    }
}

fn as_request(tx: &Transaction) -> Vec<u8> {
    let req = ApiRequest { method: tx.invoked_op.clone(), args: tx.args.clone(), envelope: tx.envelope.clone() };
    serde_json::to_vec(&req).unwrap()
}

fn params(name: &str, now: u64) -> ScenarioParams {
    ScenarioParams {
        project_name: name.into(),
        project_number: format!("{name}-no"),
        amount: 5_000,
        interest_rate_bp: 300,
        time_start: now,
        time_end: now + 86_400,
    }
}

#[tokio::test]
async fn create_user_over_http() {
    let f = fixture();
    let (p, tx) = f.with_net(|net| net.registration_tx("Sp1", UserType::Supplier).unwrap());
    let before = f.height();
    let (status, echoed, body) = f.post("/invoke", as_request(&tx), Some("abc-1")).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(echoed.as_deref(), Some("abc-1"));
    assert_eq!(body["reqId"], "abc-1");
    assert_eq!(body["result"]["userNumber"], json!(p.user_number));
    assert_eq!(body["txId"], json!(tx.tx_id));
    assert_eq!(f.height(), before + 1);
    f.with_net(|net| assert!(net.node().locate(&tx.tx_id).is_some()));

    let (status, _, body) = f.post("/invoke", as_request(&tx), None).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert_eq!(f.height(), before + 1);
}

#[tokio::test]
async fn request_ids_are_assigned_when_absent() {
    let f = fixture();
    let admin = f.with_net(|net| net.admin().clone());
    let (_, first, _) = f.post("/admin/QueryPolicy", f.signed(&admin, "QueryPolicy", json!({})), None).await;
    let (_, second, _) = f.post("/admin/QueryPolicy", f.signed(&admin, "QueryPolicy", json!({})), None).await;
    assert!(first.is_some() && second.is_some());
    assert_ne!(first, second);
}

#[tokio::test]
async fn error_statuses() {
    let f = fixture();
    let [sp, dt, ce, fi] = f.with_net(|net| {
        let cast = register_cast(net, "h").unwrap();
        net.deploy_default_policies().unwrap();
        cast
    });
    let now = f.with_net(|net| net.now());
    let trace = f.with_net(|net| net.run_accounts_receivable(&sp, &ce, &fi, "ARD-9", &params("loanH", now)).unwrap());
    let key = trace.resulting_project_id.to_hex();
    let before = f.height();

    let cases: Vec<(&str, Vec<u8>, StatusCode)> = vec![
        ("/query", f.signed(&dt, "QueryFiProject", json!({ "key": key })), StatusCode::FORBIDDEN),
        ("/query", f.signed(&sp, "QueryFiProject", json!({ "key": key })), StatusCode::OK),
        ("/query", f.signed(&sp, "QueryFiProject", json!({ "key": "nope" })), StatusCode::NOT_FOUND),
        ("/invoke", f.signed(&sp, "Transfer", json!({})), StatusCode::BAD_REQUEST),
        ("/invoke", f.signed(&sp, "QueryUser", json!({ "key": "hSp" })), StatusCode::BAD_REQUEST),
        ("/invoke", b"{not json".to_vec(), StatusCode::BAD_REQUEST),
        ("/admin/AddPolicy", f.signed(&sp, "AddPolicy", json!({ "policy": {} })), StatusCode::UNAUTHORIZED),
        ("/nowhere", f.signed(&sp, "QueryUser", json!({ "key": "hSp" })), StatusCode::NOT_FOUND),
        ("/invoke", vec![b' '; MAX_BODY_BYTES + 1], StatusCode::BAD_REQUEST),
        (
            "/invoke",
            f.signed(&dt, "UpdateFiProject", json!({ "fiProjectId": key, "changes": { "amount": 1 } })),
            StatusCode::FORBIDDEN,
        ),
    ];
    for (path, body, expected) in cases {
        let (status, _, resp) = f.post(path, body, None).await;
        assert_eq!(status, expected, "{path}: {resp}");
        if status != StatusCode::OK {
            assert!(resp["error"]["code"].is_string(), "{resp}");
        }
    }
    assert_eq!(f.height(), before, "4xx responses leave the chain alone");

    let mut tampered: Value = serde_json::from_slice(&f.signed(&sp, "QueryFiProject", json!({ "key": key }))).unwrap();
    tampered["args"]["key"] = json!("other");
    let (status, _, _) = f.post("/query", serde_json::to_vec(&tampered).unwrap(), None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);

    let stale = f.with_net(|net| {
        let nonce = net.fresh_nonce();
        serde_json::to_vec(&ApiRequest::signed(&sp, "QueryFiProject", json!({ "key": key }), nonce, net.now() - 3600))
            .unwrap()
    });
    let (status, _, body) = f.post("/query", stale, None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(body["error"]["code"], "StaleRequest");
}

#[tokio::test]
async fn admin_policy_lifecycle() {
    let f = fixture();
    let admin = f.with_net(|net| net.admin().clone());
    let now = f.with_net(|net| net.now());
    let policy = json!({
        "S": { "userType": "Supplier" },
        "O": { "resourceType": "FiProject" },
        "P": { "QueryFiProject": 1 },
        "E": { "validFrom": now, "validUntil": now + 1000 }
    });
    let (status, _, body) = f.post("/admin/AddPolicy", f.signed(&admin, "AddPolicy", json!({ "policy": policy })), None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let id = body["result"]["policyId"].clone();
    assert!(id.is_string());

    let (status, _, _) = f.post("/admin/AddPolicy", f.signed(&admin, "AddPolicy", json!({ "policy": policy })), None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let unknown = "00".repeat(32);
    let args = json!({ "policyId": unknown, "cause": "AdminRequest" });
    let (status, _, body) = f.post("/admin/DeletePolicy", f.signed(&admin, "DeletePolicy", args), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND, "{body}");

    let args = json!({ "policyId": id, "cause": "AdminRequest" });
    let (status, _, _) = f.post("/admin/DeletePolicy", f.signed(&admin, "DeletePolicy", args), None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn ticks_commit_queued_expiry_deletions() {
    let f = fixture();
    let [sp, _, _, _] = f.with_net(|net| register_cast(net, "t").unwrap());
    let now = f.with_net(|net| net.now());
    let subject = AttributeSet::from_pairs([("userType", AttrValue::text("Supplier"))]);
    let object = AttributeSet::from_pairs([("resourceType", AttrValue::text("User"))]);
    let id = f.with_net(|net| net.assign_user_access(subject, object, &["QueryUser"], now, now + 10).unwrap());

    f.clock.advance(60_000);
    let before = f.height();
    let (status, _, _) = f.post("/query", f.signed(&sp, "QueryUser", json!({ "key": "tSp" })), None).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(f.height(), before, "the deletion is queued, not committed");

    f.clock.advance(5_000);
    f.gw.lock().unwrap().tick();
    assert_eq!(f.height(), before + 1);
    f.with_net(|net| assert!(abac::get_policy(net.node().state(), &id).is_none()));
}

/// Identical networks take the same requests over HTTP, through the CLI
/// path and through the gateway directly, and agree with the library's own
/// decision for each.
#[tokio::test]
async fn contract_equivalence_across_front_doors() {
    let clocks: Vec<SimClock> = (0..3).map(|_| SimClock::starting_at(T0)).collect();
    let mut nets: Vec<Network> = clocks.iter().map(network).collect();
    let mut casts = Vec::new();
    for net in &mut nets {
        let cast = register_cast(net, "e").unwrap();
        net.deploy_default_policies().unwrap();
        let now = net.now();
        let [sp, _, ce, fi] = &cast;
        net.run_accounts_receivable(sp, ce, fi, "ARD-E", &params("loanE", now)).unwrap();
        casts.push(cast);
    }
    let cast = casts.remove(0);
    let [sp, dt, ce, fi] = &cast;
    let project = nets[0].node().state().projects().into_keys().next().unwrap();
    let key = project.to_hex();

    let calls: Vec<(&Participant, &str, &str, Value)> = vec![
        (sp, "/query", "QueryFiProject", json!({ "key": key })),
        (dt, "/query", "QueryFiProject", json!({ "key": key })),
        (ce, "/query", "QueryFiProject", json!({ "key": "loanE" })),
        (fi, "/invoke", "UpdateFiProject", json!({ "fiProjectId": key, "changes": { "interestRateBp": 320 } })),
        (dt, "/invoke", "UpdateFiProject", json!({ "fiProjectId": key, "changes": { "interestRateBp": 1 } })),
        (sp, "/query", "CheckAccess", json!({ "requestedOp": "QueryUser", "O_u": { "resourceType": "User" } })),
        (dt, "/query", "QueryUser", json!({ "key": "eCE" })),
        (sp, "/invoke", "DeleteFiProject", json!({ "fiProjectId": key })),
    ];

    let mut http_net = nets.remove(0);
    let mut outcomes: Vec<Vec<(u16, Value)>> = vec![Vec::new(), Vec::new(), Vec::new()];
    let mut library: Vec<bool> = Vec::new();
    for (who, path, method, args) in &calls {
        if *method == "QueryFiProject" && *path == "/query" {
            let state = http_net.node().state();
            let fp_key = args["key"].as_str().unwrap();
            library.push(query_fi_project_as(state, fp_key, &who.user_number, http_net.now()).is_ok());
        }
        let nonce = http_net.fresh_nonce();
        let req = ApiRequest::signed(who, method, args.clone(), nonce, http_net.now());
        let body = serde_json::to_vec(&req).unwrap();
        let gw = Arc::new(Mutex::new(Gateway::new(http_net)));
        let resp = app(gw.clone())
            .oneshot(Request::builder().method("POST").uri(*path).body(Body::from(body)).unwrap())
            .await
            .unwrap();
        let status = resp.status().as_u16();
        let mut v: Value = serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
        v.as_object_mut().unwrap().remove("reqId");
        outcomes[0].push((status, v));
        http_net = Arc::try_unwrap(gw).ok().unwrap().into_inner().unwrap().into_network();
    }

    let mut cli_net = nets.remove(0);
    for (who, path, method, args) in &calls {
        let (back, status, mut v) = call(cli_net, who, path, method, args.clone());
        cli_net = back;
        v.as_object_mut().unwrap().remove("reqId");
        outcomes[1].push((status, v));
    }

    let mut gw = Gateway::new(nets.remove(0));
    for (who, path, method, args) in &calls {
        let net = gw.network_mut();
        let nonce = net.fresh_nonce();
        let req = ApiRequest::signed(who, method, args.clone(), nonce, net.now());
        let r = gw.route(path, &serde_json::to_vec(&req).unwrap(), None);
        let mut v = r.body;
        v.as_object_mut().unwrap().remove("reqId");
        outcomes[2].push((r.status, v));
    }

    assert_eq!(outcomes[0], outcomes[1]);
    assert_eq!(outcomes[0], outcomes[2]);
    let statuses: Vec<u16> = outcomes[0].iter().map(|(s, _)| *s).collect();
    assert_eq!(statuses, [200, 403, 200, 200, 403, 200, 200, 200]);
    assert_eq!(library, [true, false, true]);
    let digest = http_net.node().state().content_digest();
    assert_eq!(cli_net.node().state().content_digest(), digest);
    assert_eq!(gw.network().node().state().content_digest(), digest);
}
