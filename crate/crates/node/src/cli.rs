//! Command line front end. Contract calls go through the same
//! [`Gateway::route`] as HTTP requests.

use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fscf_core::abac::AttributeSet;
use fscf_core::bench::{self, BenchConfig, BenchResult, ClockKind, ContractGroup};
use fscf_core::domain::UserType;
use fscf_core::gateway::{ApiRequest, Gateway, GatewayConfig};
use fscf_core::ledger::audit::audit_image;
use fscf_core::ledger::{OrderingMode, WallClock};
use fscf_core::workflows::{
    init_network, register_cast, Network, Participant, ScenarioParams, ADMIN_NAME, DEFAULT_INSTALLMENTS, LOG_FILE,
    VALIDITY_SECS,
};
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "fscf", version, about = "Permissioned supply-chain-finance ledger")]
pub struct Cli {
    /// Config file; defaults to $FSCF_CONFIG, then ./fscf.toml.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured data directory.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Creates the chain, or reopens it, and prints the administrator.
    Init,
    /// Deploys the baseline access policies.
    DeployPolicies,
    /// Certifies and registers a user.
    Register {
        name: String,
        /// CoreEnterprise, Supplier, Distributor or FinancialInstitution.
        user_type: UserType,
    },
    /// Runs a financing flow and prints its trace.
    Scenario(ScenarioCmd),
    /// Grants operations to matching subjects on matching objects.
    Grant {
        /// Subject matcher, a JSON object.
        #[arg(long)]
        subject: String,
        /// Object matcher, a JSON object.
        #[arg(long)]
        object: String,
        #[arg(long, value_delimiter = ',', required = true)]
        ops: Vec<String>,
        /// Window start in UTC seconds; defaults to now.
        #[arg(long)]
        from: Option<u64>,
        /// Window end in UTC seconds; defaults to one year after the start.
        #[arg(long)]
        until: Option<u64>,
    },
    /// Signs a write as a registered user and commits it.
    Invoke(CallArgs),
    /// Signs a read as a registered user.
    Query(CallArgs),
    /// Runs an administrator action, signed by the administrator.
    Admin {
        action: String,
        #[arg(default_value = "{}")]
        args: String,
    },
    /// Verifies the persisted block log.
    Audit,
    /// Serves the HTTP API.
    Serve {
        /// Overrides the configured listen address.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Runs a benchmark sweep and writes CSV.
    #[command(subcommand)]
    Bench(BenchCmd),
}

#[derive(Debug, Args)]
pub struct CallArgs {
    /// Name of the signing user, or "admin".
    #[arg(long = "as")]
    pub signer: String,
    pub method: String,
    /// JSON arguments.
    #[arg(default_value = "{}")]
    pub args: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScenarioKindArg {
    /// Accounts receivable.
    Ar,
    /// Inventory pledge.
    Inv,
    /// Prepayment.
    Pre,
}

#[derive(Debug, Args)]
pub struct ScenarioCmd {
    pub kind: ScenarioKindArg,
    /// Registers a fresh cast named <PREFIX>Sp, <PREFIX>Dt, <PREFIX>CE, <PREFIX>FI.
    #[arg(long, conflicts_with_all = ["fe", "ce", "fi"])]
    pub cast: Option<String>,
    /// Borrower: the supplier, or the distributor for prepayment.
    #[arg(long)]
    pub fe: Option<String>,
    #[arg(long)]
    pub ce: Option<String>,
    #[arg(long)]
    pub fi: Option<String>,
    #[arg(long, default_value = "demo-project")]
    pub project: String,
    #[arg(long, default_value = "P-001")]
    pub number: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub amount: u64,
    #[arg(long, default_value_t = 450)]
    pub rate_bp: u32,
    /// Project term in days, starting now.
    #[arg(long, default_value_t = 180)]
    pub days: u64,
    /// Accounts-receivable document id.
    #[arg(long, default_value = "ARD-001")]
    pub ard: String,
    /// Pledged products for inventory financing.
    #[arg(long, value_delimiter = ',', default_value = "PRD-001")]
    pub products: Vec<String>,
    /// Runs the inventory default branch.
    #[arg(long)]
    pub default: bool,
    /// Purchase contract id for prepayment.
    #[arg(long, default_value = "PC-001")]
    pub contract: String,
    /// Deposit share for prepayment, strictly between 0 and 1.
    #[arg(long, default_value_t = 0.2)]
    pub deposit: f64,
    #[arg(long, default_value_t = DEFAULT_INSTALLMENTS)]
    pub installments: u32,
    /// Also writes the trace to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum BenchCmd {
    /// Execution time per operation across block sizes.
    Latency {
        #[arg(long, default_value = "fiproject")]
        group: ContractGroup,
        #[arg(long, value_delimiter = ',', default_value = "10,50,100,200")]
        block_sizes: Vec<usize>,
        #[arg(long, default_value = "solo")]
        mode: OrderingMode,
        #[arg(long, default_value_t = 400)]
        requests: usize,
        #[arg(long, default_value = "simulated")]
        clock: ClockKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Throughput across client concurrency, per ordering mode.
    Tps {
        #[arg(long, default_value = "fiproject")]
        group: ContractGroup,
        #[arg(long, value_delimiter = ',', default_value = "solo,kafka:4")]
        mode: Vec<OrderingMode>,
        #[arg(long, value_delimiter = ',', default_value = "50,100,150,200,250,300,350,400,450,500")]
        concurrency: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        block_size: usize,
        #[arg(long, default_value_t = 1000)]
        requests: usize,
        #[arg(long, default_value = "simulated")]
        clock: ClockKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Loads the config the command line points at.
pub fn load_config(cli: &Cli) -> anyhow::Result<GatewayConfig> {
    let path = GatewayConfig::resolve_path(cli.config.as_deref());
    let mut config = GatewayConfig::load(&path)?;
    if let Some(dir) = &cli.data_dir {
        config.data_dir = Some(dir.clone());
    }
    Ok(config)
}

fn open(config: &GatewayConfig) -> anyhow::Result<Network> {
    Ok(init_network(config.network(), Arc::new(WallClock))?)
}

fn print(out: &mut dyn Write, v: &Value) -> anyhow::Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(v)?)?;
    Ok(())
}

/// Commits anything still queued and refreshes the snapshot.
fn close(net: &mut Network) -> anyhow::Result<()> {
    net.node_mut().flush().context("committing queued transactions")?;
    net.save_snapshot()?;
    Ok(())
}

fn parse_json(what: &str, text: &str) -> anyhow::Result<Value> {
    serde_json::from_str(text).with_context(|| format!("{what} is not valid JSON"))
}

/// Signs `method(args)` as `signer` and routes it to `path`. Returns the
/// status and body.
pub fn call(net: Network, signer: &Participant, path: &str, method: &str, args: Value) -> (Network, u16, Value) {
    let mut net = net;
    let nonce = net.fresh_nonce();
    let req = ApiRequest::signed(signer, method, args, nonce, net.now());
    let body = serde_json::to_vec(&req).expect("serializes");
    let mut gw = Gateway::new(net);
    let response = gw.route(path, &body, None);
    (gw.into_network(), response.status, response.body)
}

fn scenario(net: &mut Network, cmd: &ScenarioCmd) -> anyhow::Result<Value> {
    let (fe, ce, fi) = match &cmd.cast {
        Some(prefix) => {
            let [sp, dt, ce, fi] = register_cast(net, prefix)?;
            let fe = if matches!(cmd.kind, ScenarioKindArg::Pre) { dt } else { sp };
            (fe, ce, fi)
        }
        None => {
            let who = |name: &Option<String>, flag: &str| -> anyhow::Result<Participant> {
                let name = name.as_deref().with_context(|| format!("--{flag} or --cast is required"))?;
                Ok(net.participant(name)?)
            };
            (who(&cmd.fe, "fe")?, who(&cmd.ce, "ce")?, who(&cmd.fi, "fi")?)
        }
    };
    let now = net.now();
    let params = ScenarioParams {
        project_name: cmd.project.clone(),
        project_number: cmd.number.clone(),
        amount: cmd.amount,
        interest_rate_bp: cmd.rate_bp,
        time_start: now,
        time_end: now + cmd.days * 24 * 3600,
    };
    let trace = match cmd.kind {
        ScenarioKindArg::Ar => net.run_accounts_receivable(&fe, &ce, &fi, &cmd.ard, &params)?,
        ScenarioKindArg::Inv => net.run_inventory(&fe, &ce, &fi, &cmd.products, &params, cmd.default)?,
        ScenarioKindArg::Pre => {
            net.run_prepayment(&fe, &ce, &fi, &cmd.contract, cmd.deposit, cmd.installments, &params)?
        }
    };
    let v = serde_json::to_value(&trace)?;
    if let Some(path) = &cmd.out {
        std::fs::write(path, serde_json::to_vec_pretty(&v)?).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(v)
}

fn write_bench(result: &BenchResult, out_path: &Option<PathBuf>, out: &mut dyn Write) -> anyhow::Result<()> {
    match out_path {
        Some(path) => bench::emit_csv(result, path).with_context(|| format!("writing {}", path.display()))?,
        None => bench::write_csv(result, &mut *out)?,
    }
    Ok(())
}

fn run_bench(cmd: &BenchCmd, out: &mut dyn Write) -> anyhow::Result<()> {
    match cmd {
        BenchCmd::Latency { group, block_sizes, mode, requests, clock, out: path } => {
            let cfg = BenchConfig {
                group: *group,
                block_sizes: block_sizes.clone(),
                ordering: *mode,
                requests_per_level: *requests,
                clock: *clock,
                ..BenchConfig::default()
            };
            write_bench(&bench::run_latency_sweep(&cfg)?, path, out)
        }
        BenchCmd::Tps { group, mode, concurrency, block_size, requests, clock, out: path } => {
            let mut result = BenchResult::default();
            for m in mode {
                let cfg = BenchConfig {
                    group: *group,
                    block_sizes: vec![*block_size],
                    concurrency_levels: concurrency.clone(),
                    ordering: *m,
                    requests_per_level: *requests,
                    clock: *clock,
                    ..BenchConfig::default()
                };
                result.rows.extend(bench::run_tps_sweep(&cfg)?.rows);
            }
            write_bench(&result, path, out)
        }
    }
}

/// Runs one command, writing its JSON or CSV output to `out`. Returns the
/// process exit code.
pub fn run(cli: &Cli, out: &mut dyn Write) -> anyhow::Result<i32> {
    if let Command::Bench(cmd) = &cli.command {
        run_bench(cmd, out)?;
        return Ok(0);
    }
    let config = load_config(cli)?;
    if let Command::Audit = cli.command {
        let dir = config.data_dir.as_ref().context("audit needs a data directory")?;
        let path = dir.join(LOG_FILE);
        let image = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let report = audit_image(&image);
        print(out, &serde_json::to_value(&report)?)?;
        return Ok(if report.is_clean() { 0 } else { 1 });
    }
    let mut net = open(&config)?;
    let code = match &cli.command {
        Command::Init => {
            let admin = net.admin().clone();
            print(out, &json!({ "admin": admin.user_number, "height": net.node().height() }))?;
            0
        }
        Command::DeployPolicies => {
            let ids = net.deploy_default_policies()?;
            print(out, &json!({ "policyIds": ids }))?;
            0
        }
        Command::Register { name, user_type } => {
            let p = net.register(name, *user_type)?;
            print(out, &json!({ "userName": p.name, "userType": user_type, "userNumber": p.user_number }))?;
            0
        }
        Command::Scenario(cmd) => {
            let trace = scenario(&mut net, cmd)?;
            print(out, &trace)?;
            0
        }
        Command::Grant { subject, object, ops, from, until } => {
            let subject: AttributeSet = serde_json::from_value(parse_json("--subject", subject)?)?;
            let object: AttributeSet = serde_json::from_value(parse_json("--object", object)?)?;
            let from = from.unwrap_or_else(|| net.now());
            let until = until.unwrap_or(from + VALIDITY_SECS / 10);
            let ops: Vec<&str> = ops.iter().map(String::as_str).collect();
            let id = net.assign_user_access(subject, object, &ops, from, until)?;
            print(out, &json!({ "policyId": id }))?;
            0
        }
        Command::Invoke(c) | Command::Query(c) => {
            let path = if matches!(cli.command, Command::Invoke(_)) { "/invoke" } else { "/query" };
            let signer = net.participant(&c.signer)?;
            let args = parse_json("args", &c.args)?;
            let (back, status, body) = call(net, &signer, path, &c.method, args);
            net = back;
            print(out, &body)?;
            i32::from(status >= 400)
        }
        Command::Admin { action, args } => {
            let admin = net.participant(ADMIN_NAME)?;
            let args = parse_json("args", args)?;
            let (back, status, body) = call(net, &admin, &format!("/admin/{action}"), action, args);
            net = back;
            print(out, &body)?;
            i32::from(status >= 400)
        }
        Command::Serve { listen } => {
            let listen = listen.clone().unwrap_or(config.listen.clone());
            let gw = Arc::new(Mutex::new(Gateway::new(net)));
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(crate::server::serve(gw, &listen))?;
            return Ok(0);
        }
        Command::Audit | Command::Bench(_) => bail!("handled above"),
    };
    close(&mut net)?;
    Ok(code)
}
