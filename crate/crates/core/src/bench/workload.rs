use serde_json::json;

use super::sim::{Counting, Sim};
use super::{BenchError, BenchOp, ContractGroup};
use crate::abac::{self, AccessRequest, AttrValue, AttributeSet, PolicySpec, RESOURCE_FI_PROJECT, RESOURCE_POLICY, RESOURCE_USER};
use crate::contracts::fiproject::query_fi_project_as;
use crate::contracts::user::query_user;
use crate::contracts::Method;
use crate::domain::{derive_project_id, CollateralKind, Digest, FiProjectDraft, UserType};
use crate::identity::{authenticate, check_user, SignedEnvelope};
use crate::ledger::Transaction;
use crate::workflows::{register_cast, Participant, VALIDITY_SECS};

const SEED: &str = "seed";

/// A request prepared ahead of a throughput run.
pub(super) enum Request {
    Write(Transaction),
    Read(Read),
}

/// A signed read: `target` names the item for queries, `deny` asks for an
/// operation no policy grants.
pub(super) struct Read {
    op: BenchOp,
    envelope: SignedEnvelope,
    target: String,
    deny: bool,
}

/// Participants and item naming for one contract group.
pub(super) struct Workload {
    group: ContractGroup,
    sp: Participant,
    ce: Participant,
    fi: Participant,
    admin: Participant,
    users: Vec<Participant>,
}

fn item(i: usize) -> String {
    format!("bench-{i}")
}

fn resource(kind: &str) -> AttributeSet {
    AttributeSet::from_pairs([("resourceType", AttrValue::text(kind))])
}

impl Workload {
    /// Registers a supplier, a core enterprise and a lender, and deploys the
    /// default policies.
    pub fn setup(group: ContractGroup, sim: &mut Sim) -> Result<Self, BenchError> {
        let net = sim.net();
        let [sp, _dt, ce, fi] = register_cast(net, "bench")?;
        net.deploy_default_policies()?;
        let admin = net.admin().clone();
        Ok(Workload { group, sp, ce, fi, admin, users: Vec::new() })
    }

    /// Commits the item that throughput duplicates collide with.
    pub fn seed(&mut self, sim: &mut Sim) -> Result<(), BenchError> {
        match self.group {
            ContractGroup::Fiproject => {
                let tx = self.add_project(sim, SEED);
                sim.net().execute(tx)?;
            }
            ContractGroup::User => {
                sim.net().register(SEED, UserType::Supplier)?;
            }
            ContractGroup::Policy => {
                let tx = self.add_policy(sim, SEED);
                sim.net().execute(tx)?;
            }
            ContractGroup::Checkaccess => {}
        }
        Ok(())
    }

    fn draft(&self, name: &str, now: u64) -> FiProjectDraft {
        FiProjectDraft {
            fi_project_name: name.to_string(),
            fi_project_number: name.to_string(),
            collateral: CollateralKind::AccountsReceivable { ard_id: format!("ARD-{name}") },
            amount: 100_000,
            interest_rate_bp: 500,
            time_start: now,
            time_end: now + 365 * 24 * 3600,
            ce_index: self.ce.user_number,
            fe_index: self.sp.user_number,
            fi_index: self.fi.user_number,
        }
    }

    fn project_id(name: &str) -> Digest {
        derive_project_id(name, name).expect("non-empty names")
    }

    fn add_project(&self, sim: &mut Sim, name: &str) -> Transaction {
        let now = sim.net().now();
        let draft = self.draft(name, now);
        sim.net().sign(&self.fi, Method::AddFiProject, json!(draft))
    }

    fn policy_object(name: &str) -> AttributeSet {
        AttributeSet::from_pairs([
            ("resourceType", AttrValue::text(RESOURCE_FI_PROJECT)),
            ("fiProjectId", AttrValue::text(name)),
        ])
    }

    fn policy_spec(name: &str, ops: &[Method], now: u64) -> PolicySpec {
        PolicySpec {
            s: AttributeSet::from_pairs([("userType", AttrValue::text("Supplier"))]),
            o: Self::policy_object(name),
            p: ops.iter().map(|m| (m.name().to_string(), 1)).collect(),
            e: AttributeSet::window(now, now + VALIDITY_SECS),
        }
    }

    fn policy_id(name: &str, now: u64) -> Digest {
        abac::AbacPolicy::from_spec(Self::policy_spec(name, &[Method::QueryFiProject], now)).policy_id
    }

    fn add_policy(&self, sim: &mut Sim, name: &str) -> Transaction {
        let now = sim.net().now();
        let spec = Self::policy_spec(name, &[Method::QueryFiProject], now);
        sim.net().sign(&self.admin, Method::AddPolicy, json!({ "policy": spec }))
    }

    /// The `i`-th write of `op`, signed now.
    pub fn write(&mut self, sim: &mut Sim, op: BenchOp, i: usize) -> Result<Transaction, BenchError> {
        let name = item(i);
        let now = sim.net().now();
        let tx = match (self.group, op) {
            (ContractGroup::Fiproject, BenchOp::Add) => self.add_project(sim, &name),
            (ContractGroup::Fiproject, BenchOp::Update) => {
                let args = json!({ "fiProjectId": Self::project_id(&name), "changes": { "interestRateBp": 650 } });
                sim.net().sign(&self.fi, Method::UpdateFiProject, args)
            }
            (ContractGroup::Fiproject, BenchOp::Delete) => {
                let args = json!({ "fiProjectId": Self::project_id(&name) });
                sim.net().sign(&self.fi, Method::DeleteFiProject, args)
            }
            (ContractGroup::Policy, BenchOp::Add) => self.add_policy(sim, &name),
            (ContractGroup::Policy, BenchOp::Update) => {
                let spec = Self::policy_spec(&name, &[Method::QueryFiProject, Method::CheckFiProject], now);
                let args = json!({ "policyId": Self::policy_id(&name, now), "policy": spec });
                sim.net().sign(&self.admin, Method::UpdatePolicy, args)
            }
            (ContractGroup::Policy, BenchOp::Delete) => {
                let args = json!({ "policyId": Self::policy_id(&name, now), "cause": "AdminRequest" });
                sim.net().sign(&self.admin, Method::DeletePolicy, args)
            }
            (ContractGroup::User, BenchOp::Add) => {
                let (p, tx) = sim.net().registration_tx(&name, UserType::Supplier)?;
                self.users.push(p);
                tx
            }
            (group, op) => unreachable!("{group} has no write {}", op.name()),
        };
        Ok(tx)
    }

    fn sign_read(&self, sim: &mut Sim, op: BenchOp, target: String, deny: bool) -> Read {
        let (who, method) = match (self.group, op) {
            (ContractGroup::User, BenchOp::Query) => (&self.sp, Method::QueryUser),
            (ContractGroup::User, _) => {
                let idx: usize = target.trim_start_matches("bench-").parse().expect("bench item");
                (&self.users[idx], Method::CheckUser)
            }
            (ContractGroup::Fiproject, _) => (&self.sp, Method::QueryFiProject),
            (ContractGroup::Policy, _) => (&self.admin, Method::QueryPolicy),
            (ContractGroup::Checkaccess, _) => (&self.sp, Method::CheckAccess),
        };
        let who = who.clone();
        let envelope = sim.net().sign(&who, method, json!({ "key": target })).envelope;
        Read { op, envelope, target, deny }
    }

    /// Signs and serves the `i`-th read of `op` arriving at `at`.
    pub fn read(&mut self, sim: &mut Sim, op: BenchOp, i: usize, at: u64) -> Result<(bool, u64), BenchError> {
        let read = self.sign_read(sim, op, item(i), false);
        self.serve(sim, read, at)
    }

    /// Answers `read` from committed state. True when the request succeeds.
    pub fn serve(&self, sim: &mut Sim, read: Read, at: u64) -> Result<(bool, u64), BenchError> {
        let group = self.group;
        let sp = self.sp.user_number;
        sim.read(at, |view: &Counting<'_>, now| {
            let env = &read.envelope;
            let Ok(_) = authenticate(env, view, now) else { return false };
            let signer = env.signer_user_number;
            let gate = |object: AttributeSet, method: Method| {
                abac::subject_attrs(view, &signer)
                    .is_some_and(|s| abac::decide(view, &s, &object, method.name(), now).granted())
            };
            match (group, read.op) {
                (ContractGroup::User, BenchOp::Query) => {
                    gate(resource(RESOURCE_USER), Method::QueryUser) && query_user(view, &read.target).is_ok()
                }
                (ContractGroup::User, _) => check_user(env, UserType::Supplier, view, now).is_ok(),
                (ContractGroup::Fiproject, _) => {
                    query_fi_project_as(view, &Self::project_id(&read.target).to_hex(), &signer, now).is_ok()
                }
                (ContractGroup::Policy, _) => {
                    let id = Self::policy_id(&read.target, now);
                    gate(resource(RESOURCE_POLICY), Method::QueryPolicy)
                        && abac::query_policy(view, None, Some(&Self::policy_object(&read.target)))
                            .iter()
                            .any(|p| p.policy_id == id)
                }
                (ContractGroup::Checkaccess, _) => {
                    let Some(s_u) = abac::subject_attrs(view, &signer) else { return false };
                    let op = if read.deny { Method::DeleteFiProject } else { Method::QueryFiProject };
                    let req = AccessRequest {
                        envelope: env.clone(),
                        requested_op: op.name().to_string(),
                        s_u,
                        o_u: AttributeSet::from_pairs([
                            ("resourceType", AttrValue::text(RESOURCE_FI_PROJECT)),
                            ("owner", AttrValue::text(sp.to_hex())),
                        ]),
                        e_u: AttributeSet::new(),
                    };
                    abac::check_access(&req, view, now).granted()
                }
            }
        })
    }

    /// `n` pre-signed throughput requests; every `invalid_every`-th one
    /// duplicates the seeded item, or for access checks asks for a denied
    /// operation.
    pub fn load(&mut self, sim: &mut Sim, n: usize, invalid_every: usize) -> Result<Vec<Request>, BenchError> {
        let mut out = Vec::with_capacity(n);
        for j in 0..n {
            let dup = (j + 1) % invalid_every == 0;
            let name = if dup { SEED.to_string() } else { format!("load-{j}") };
            let req = match self.group {
                ContractGroup::Fiproject => Request::Write(self.add_project(sim, &name)),
                ContractGroup::Policy => Request::Write(self.add_policy(sim, &name)),
                ContractGroup::User => Request::Write(sim.net().registration_tx(&name, UserType::Supplier)?.1),
                ContractGroup::Checkaccess => Request::Read(self.sign_read(sim, BenchOp::Check, name, dup)),
            };
            out.push(req);
        }
        Ok(out)
    }
}
