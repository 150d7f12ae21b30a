//! Network bootstrap, participant registration, policy deployment and the
//! three financing scenarios as transaction scripts.

mod scenarios;

pub use scenarios::{register_cast, ScenarioKind, ScenarioParams, ScenarioTrace, TraceStep, DEFAULT_INSTALLMENTS};

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::abac::{self, AbacPolicy, AttrValue, AttributeSet, PolicySpec};
use crate::contracts::{user::CreateUserArgs, ContractError, Method};
use crate::domain::{canonical_encode, derive_user_number, Digest, User, UserType};
use crate::identity::{Certificate, CertificateAuthority, IdentityError, KeyPair, Nonce, Role};
use crate::ledger::state::{keys, StateView};
use crate::ledger::{
    Clock, GenesisArgs, Node, NodeConfig, NodeError, OrderingMode, SubmitError, Topology, Transaction, TxRejection,
    TxResult, GENESIS_OP,
};

/// Certificates and default policies last this long.
pub const VALIDITY_SECS: u64 = 10 * 365 * 24 * 3600;

pub const ADMIN_NAME: &str = "admin";
pub const LOG_FILE: &str = "chain.log";
pub const SNAPSHOT_FILE: &str = "state.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    pub block_size: usize,
    pub timeout_ms: u64,
    pub ordering: OrderingMode,
    pub topology: Topology,
    pub data_dir: Option<PathBuf>,
    pub ca_seed: Vec<u8>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            block_size: 10,
            timeout_ms: 2000,
            ordering: OrderingMode::Solo,
            topology: Topology::default(),
            data_dir: None,
            ca_seed: b"fabric-scf-default-ca-seed".to_vec(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum WorkflowError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Node(#[from] NodeError),
    #[error("submission rejected: {0}")]
    Submit(SubmitError),
    #[error("rejected at endorsement: {0}")]
    Rejected(TxRejection),
    #[error("committed as invalid: {code}: {message}")]
    Invalid { code: String, message: String },
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error("{0}")]
    BadParty(String),
    #[error("inventory financing needs at least one product")]
    EmptyCollateral,
    #[error("deposit share must lie strictly between 0 and 1")]
    BadDeposit,
    #[error("unknown participant {0:?}")]
    UnknownParticipant(String),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

impl From<SubmitError> for WorkflowError {
    fn from(e: SubmitError) -> Self {
        WorkflowError::Submit(e)
    }
}

impl From<TxRejection> for WorkflowError {
    fn from(e: TxRejection) -> Self {
        WorkflowError::Rejected(e)
    }
}

impl WorkflowError {
    /// The contract-level error code, when there is one.
    pub fn code(&self) -> Option<&str> {
        match self {
            WorkflowError::Rejected(r) => Some(r.code()),
            WorkflowError::Invalid { code, .. } => Some(code),
            _ => None,
        }
    }
}

/// A signing identity known to this process.
#[derive(Debug, Clone)]
pub struct Participant {
    pub name: String,
    pub role: Role,
    pub keys: KeyPair,
    pub user_number: Digest,
}

/// Outcome of a committed write.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Receipt {
    pub tx_id: Digest,
    pub block_height: u64,
    pub result: Value,
}

/// A running node together with the CA and the administrator identity.
pub struct Network {
    node: Node,
    ca: CertificateAuthority,
    admin: Participant,
    seed: Vec<u8>,
    rng: ChaCha20Rng,
    data_dir: Option<PathBuf>,
}

fn derived_keys(seed: &[u8], name: &str) -> KeyPair {
    KeyPair::from_seed(Digest::of(&canonical_encode("participant", &[("seed", seed), ("name", name.as_bytes())])).0)
}

/// Brings a network up: a fresh chain with a genesis block, or the chain
/// persisted in `data_dir`, replayed from its log.
pub fn init_network(config: NetworkConfig, clock: Arc<dyn Clock>) -> Result<Network, WorkflowError> {
    if config.block_size == 0 {
        return Err(WorkflowError::Config("blockSize must be at least 1".into()));
    }
    let mut ca = CertificateAuthority::init(&config.ca_seed).map_err(|e| WorkflowError::Config(e.to_string()))?;
    let admin_keys = derived_keys(&config.ca_seed, ADMIN_NAME);
    let admin_number = derive_user_number(ADMIN_NAME, &admin_keys.public().0).expect("non-empty name");
    let admin = Participant { name: ADMIN_NAME.into(), role: Role::Admin, keys: admin_keys, user_number: admin_number };
    let log_path = match &config.data_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Some(dir.join(LOG_FILE))
        }
        None => None,
    };
    let node_config = NodeConfig {
        block_size: config.block_size,
        timeout_ms: config.timeout_ms,
        ordering: config.ordering,
        topology: config.topology,
        log_path: log_path.clone(),
    };
    let node = if log_path.as_ref().is_some_and(|p| p.exists()) {
        let node = Node::open(node_config, clock)?;
        if node.state().get_as::<Digest>(keys::ADMIN) != Some(admin_number) {
            return Err(WorkflowError::Config("CA seed does not match the persisted chain".into()));
        }
        let last_serial = node
            .state()
            .scan_prefix("cert:")
            .filter_map(|(_, v)| serde_json::from_value::<Certificate>(v.clone()).ok())
            .map(|c| c.serial)
            .max()
            .unwrap_or(0);
        ca = CertificateAuthority::resume(&config.ca_seed, last_serial).expect("seed checked");
        node
    } else {
        let now = clock.now_secs();
        let cert = ca.issue(admin_number, Role::Admin, admin.keys.public(), 0, now + VALIDITY_SECS)?;
        let args = GenesisArgs { ca_root: ca.root_public_key(), admin: admin_number, admin_certificate: cert };
        let genesis = Transaction::sign(
            &admin.keys,
            admin_number,
            GENESIS_OP,
            serde_json::to_value(args).expect("serializes"),
            Nonce([0; 16]),
            now,
        );
        Node::create(node_config, clock, genesis)?
    };
    let rng_seed = Digest::of(&canonical_encode(
        "nonce",
        &[("seed", &config.ca_seed), ("height", &node.height().to_be_bytes())],
    ));
    Ok(Network { node, ca, admin, seed: config.ca_seed, rng: ChaCha20Rng::from_seed(rng_seed.0), data_dir: config.data_dir })
}

impl Network {
    pub fn node(&self) -> &Node {
        &self.node
    }

    pub fn node_mut(&mut self) -> &mut Node {
        &mut self.node
    }

    pub fn admin(&self) -> &Participant {
        &self.admin
    }

    pub fn now(&self) -> u64 {
        self.node.clock().now_secs()
    }

    /// Reconstructs a registered participant's identity by name.
    pub fn participant(&self, name: &str) -> Result<Participant, WorkflowError> {
        if name == ADMIN_NAME {
            return Ok(self.admin.clone());
        }
        let user = crate::contracts::user::query_user(self.node.state(), name)
            .map_err(|_| WorkflowError::UnknownParticipant(name.to_string()))?;
        let keys = derived_keys(&self.seed, name);
        if keys.public() != user.pub_key {
            return Err(WorkflowError::UnknownParticipant(name.to_string()));
        }
        Ok(Participant { name: user.user_name, role: user.user_type.into(), keys, user_number: user.user_number })
    }

    /// Registers a user: the CA certifies the key, the user signs the
    /// CreateUser transaction with it.
    pub fn register(&mut self, name: &str, user_type: UserType) -> Result<Participant, WorkflowError> {
        let (p, tx) = self.registration_tx(name, user_type)?;
        self.execute(tx)?;
        Ok(p)
    }

    /// A certified, signed CreateUser transaction, not yet submitted.
    pub fn registration_tx(&mut self, name: &str, user_type: UserType) -> Result<(Participant, Transaction), WorkflowError> {
        let keys = derived_keys(&self.seed, name);
        let user = User::new(name, user_type, &keys.public().0)
            .map_err(|e| WorkflowError::Rejected(TxRejection::Contract(ContractError::from(e))))?;
        let now = self.now();
        let certificate = self.ca.issue(user.user_number, user_type.into(), keys.public(), now, now + VALIDITY_SECS)?;
        let args = CreateUserArgs { user_name: name.to_string(), user_type, pub_key: keys.public(), certificate };
        let p = Participant { name: name.to_string(), role: user_type.into(), keys, user_number: user.user_number };
        let tx = self.sign(&p, Method::CreateUser, serde_json::to_value(args).expect("serializes"));
        Ok((p, tx))
    }

    pub fn fresh_nonce(&mut self) -> Nonce {
        let mut n = [0u8; 16];
        self.rng.fill_bytes(&mut n);
        Nonce(n)
    }

    pub fn sign(&mut self, who: &Participant, method: Method, args: Value) -> Transaction {
        let nonce = self.fresh_nonce();
        Transaction::sign(&who.keys, who.user_number, method.name(), args, nonce, self.now())
    }

    /// Signs and runs a write, waiting for its commit.
    pub fn invoke(&mut self, who: &Participant, method: Method, args: Value) -> Result<Receipt, WorkflowError> {
        let tx = self.sign(who, method, args);
        self.execute(tx)
    }

    /// Endorses `tx` against the committed state, then orders and commits
    /// it. Endorsement failures never reach the chain.
    pub fn execute(&mut self, tx: Transaction) -> Result<Receipt, WorkflowError> {
        self.node.endorse(&tx)?;
        let id = self.node.submit(tx)?;
        if self.node.locate(&id).is_none() {
            self.node.flush().map_err(NodeError::from)?;
        }
        let (height, _) = self.node.locate(&id).expect("flushed transaction is committed");
        let result: TxResult = self.node.result_of(&id).cloned().expect("located");
        if !result.valid {
            return Err(WorkflowError::Invalid {
                code: result.code.unwrap_or_default(),
                message: result.message.unwrap_or_default(),
            });
        }
        Ok(Receipt { tx_id: id, block_height: height, result: result.output })
    }

    /// Baseline policies: lenders manage projects, parties read their own
    /// projects, any user reads user records, the administrator manages
    /// projects and policies. Already-present policies are kept.
    pub fn deploy_default_policies(&mut self) -> Result<Vec<Digest>, WorkflowError> {
        let now = self.now();
        let window = AttributeSet::window(now, now + VALIDITY_SECS);
        let text = AttrValue::text;
        let perms = |ops: &[Method]| ops.iter().map(|m| (m.name().to_string(), 1)).collect::<BTreeMap<_, _>>();
        let fp_ops: Vec<Method> = Method::ALL.iter().copied().filter(|m| m.chaincode() == crate::contracts::Chaincode::Fiproject).collect();
        let abac_ops: Vec<Method> = Method::ALL.iter().copied().filter(|m| m.chaincode() == crate::contracts::Chaincode::Abac).collect();
        let specs = [
            PolicySpec {
                s: AttributeSet::from_pairs([("userType", text("FinancialInstitution"))]),
                o: AttributeSet::from_pairs([("resourceType", text(abac::RESOURCE_FI_PROJECT))]),
                p: perms(&[Method::AddFiProject, Method::UpdateFiProject, Method::CheckFiProject]),
                e: window.clone(),
            },
            PolicySpec {
                s: AttributeSet::new(),
                o: AttributeSet::from_pairs([
                    ("resourceType", text(abac::RESOURCE_FI_PROJECT)),
                    ("owner", AttrValue::subject_ref("userNumber")),
                ]),
                p: perms(&[Method::QueryFiProject, Method::CheckFiProject]),
                e: window.clone(),
            },
            PolicySpec {
                s: AttributeSet::from_pairs([("userType", text("Admin"))]),
                o: AttributeSet::from_pairs([("resourceType", text(abac::RESOURCE_FI_PROJECT))]),
                p: perms(&fp_ops),
                e: window.clone(),
            },
            PolicySpec {
                s: AttributeSet::new(),
                o: AttributeSet::from_pairs([("resourceType", text(abac::RESOURCE_USER))]),
                p: perms(&[Method::QueryUser, Method::CheckUser]),
                e: window.clone(),
            },
            PolicySpec {
                s: AttributeSet::from_pairs([("userType", text("Admin"))]),
                o: AttributeSet::from_pairs([("resourceType", text(abac::RESOURCE_POLICY))]),
                p: perms(&abac_ops),
                e: window,
            },
        ];
        let mut ids = Vec::new();
        for spec in specs {
            let id = AbacPolicy::from_spec(spec.clone()).policy_id;
            if abac::get_policy(self.node.state(), &id).is_none() {
                self.add_policy(spec)?;
            }
            ids.push(id);
        }
        Ok(ids)
    }

    pub fn add_policy(&mut self, spec: PolicySpec) -> Result<Digest, WorkflowError> {
        let admin = self.admin.clone();
        let r = self.invoke(&admin, Method::AddPolicy, json!({ "policy": spec }))?;
        Ok(serde_json::from_value(r.result["policyId"].clone()).expect("policy id output"))
    }

    /// Grants each of `ops` to subjects matching `subject` on objects
    /// matching `object` for the window `[from, until]`.
    pub fn assign_user_access(
        &mut self,
        subject: AttributeSet,
        object: AttributeSet,
        ops: &[&str],
        from: u64,
        until: u64,
    ) -> Result<Digest, WorkflowError> {
        let spec = PolicySpec {
            s: subject,
            o: object,
            p: ops.iter().map(|op| (op.to_string(), 1)).collect(),
            e: AttributeSet::window(from, until),
        };
        self.add_policy(spec)
    }

    /// Deletes expired policies reported by an access decision, signed by the
    /// administrator with cause `AutoExpired`.
    pub fn expire_policies(&mut self, ids: &[Digest]) -> Result<Vec<Receipt>, WorkflowError> {
        let admin = self.admin.clone();
        ids.iter()
            .map(|id| self.invoke(&admin, Method::DeletePolicy, json!({ "policyId": id, "cause": "AutoExpired" })))
            .collect()
    }

    /// Every transaction on chain after genesis, in chain order.
    pub fn transactions(&self) -> Vec<Transaction> {
        self.node.blocks().iter().skip(1).flat_map(|b| b.txs.iter().cloned()).collect()
    }

    /// Writes the state snapshot next to the log, if persistent.
    pub fn save_snapshot(&self) -> Result<(), WorkflowError> {
        if let Some(dir) = &self.data_dir {
            std::fs::write(dir.join(SNAPSHOT_FILE), self.node.state().snapshot_bytes())?;
        }
        Ok(())
    }
}

/// Rebuilds `source`'s chain block by block on a fresh, in-memory node.
pub fn replay(source: &Node, clock: Arc<dyn Clock>) -> Result<Node, WorkflowError> {
    let config = NodeConfig { log_path: None, ..source.config().clone() };
    Ok(Node::from_blocks(config, clock, source.blocks())?)
}

/// Resubmits `txs` one by one into a fresh node built from `source`'s
/// genesis, committing each immediately.
pub fn replay_transactions(source: &Node, txs: &[Transaction], clock: Arc<dyn Clock>) -> Result<Node, WorkflowError> {
    let genesis = source.blocks()[0].txs[0].clone();
    let config = NodeConfig { log_path: None, ..source.config().clone() };
    let mut fresh = Node::create(config, clock, genesis)?;
    for tx in txs {
        fresh.submit(tx.clone())?;
        fresh.flush().map_err(NodeError::from)?;
    }
    Ok(fresh)
}
