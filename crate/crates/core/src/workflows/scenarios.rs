use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Network, Participant, WorkflowError};
use crate::contracts::memo::{Memo, MemoKind};
use crate::contracts::Method;
use crate::domain::{derive_project_id, CollateralKind, Digest, FiProjectDraft, UserType};
use crate::identity::Role;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioKind {
    AccountsReceivable,
    Inventory,
    Prepayment,
}

impl ScenarioKind {
    pub fn collateral_label(self) -> &'static str {
        match self {
            ScenarioKind::AccountsReceivable => "AccountsReceivable",
            ScenarioKind::Inventory => "Inventory",
            ScenarioKind::Prepayment => "Prepayment",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceStep {
    pub actor: Digest,
    pub op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memo: Option<MemoKind>,
    pub tx_id: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioTrace {
    pub scenario_kind: ScenarioKind,
    pub steps: Vec<TraceStep>,
    pub resulting_project_id: Digest,
}

/// The credit facility's terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioParams {
    pub project_name: String,
    pub project_number: String,
    pub amount: u64,
    pub interest_rate_bp: u32,
    pub time_start: u64,
    pub time_end: u64,
}

pub const DEFAULT_INSTALLMENTS: u32 = 3;

fn expect_role(p: &Participant, role: Role, what: &str) -> Result<(), WorkflowError> {
    if p.role == role {
        Ok(())
    } else {
        Err(WorkflowError::BadParty(format!("{what} {} is registered as {}, expected {}", p.name, p.role.as_str(), role.as_str())))
    }
}

struct Script<'n> {
    net: &'n mut Network,
    steps: Vec<TraceStep>,
}

impl Script<'_> {
    fn memo(
        &mut self,
        from: &Participant,
        to: &Participant,
        kind: MemoKind,
        reference: &str,
        amount: Option<u64>,
        fp: Option<Digest>,
    ) -> Result<(), WorkflowError> {
        let memo = Memo { kind, from: from.user_number, to: to.user_number, reference: reference.into(), amount, fi_project_id: fp };
        let r = self.net.invoke(from, Method::RecordMemo, serde_json::to_value(memo).expect("serializes"))?;
        self.steps.push(TraceStep { actor: from.user_number, op: Method::RecordMemo.name().into(), memo: Some(kind), tx_id: r.tx_id });
        Ok(())
    }

    fn call(&mut self, who: &Participant, method: Method, args: serde_json::Value) -> Result<(), WorkflowError> {
        let r = self.net.invoke(who, method, args)?;
        self.steps.push(TraceStep { actor: who.user_number, op: method.name().into(), memo: None, tx_id: r.tx_id });
        Ok(())
    }

    fn add_project(
        &mut self,
        fi: &Participant,
        ce: &Participant,
        fe: &Participant,
        collateral: CollateralKind,
        p: &ScenarioParams,
    ) -> Result<Digest, WorkflowError> {
        let draft = FiProjectDraft {
            fi_project_name: p.project_name.clone(),
            fi_project_number: p.project_number.clone(),
            collateral,
            amount: p.amount,
            interest_rate_bp: p.interest_rate_bp,
            time_start: p.time_start,
            time_end: p.time_end,
            ce_index: ce.user_number,
            fe_index: fe.user_number,
            fi_index: fi.user_number,
        };
        self.call(fi, Method::AddFiProject, serde_json::to_value(draft).expect("serializes"))?;
        Ok(derive_project_id(&p.project_name, &p.project_number).unwrap_or(Digest::ZERO))
    }

    fn finish(self, kind: ScenarioKind, id: Digest) -> ScenarioTrace {
        ScenarioTrace { scenario_kind: kind, steps: self.steps, resulting_project_id: id }
    }
}

impl Network {
    fn script(&mut self) -> Script<'_> {
        Script { net: self, steps: Vec::new() }
    }

    /// Receivables financing: the supplier delivers goods, the core
    /// enterprise issues a receivable document, the supplier assigns it to
    /// the lender, and the lender grants credit against it.
    pub fn run_accounts_receivable(
        &mut self,
        sp: &Participant,
        ce: &Participant,
        fi: &Participant,
        ard_id: &str,
        params: &ScenarioParams,
    ) -> Result<ScenarioTrace, WorkflowError> {
        expect_role(sp, Role::Supplier, "supplier")?;
        expect_role(ce, Role::CoreEnterprise, "core enterprise")?;
        expect_role(fi, Role::FinancialInstitution, "lender")?;
        let mut s = self.script();
        s.memo(sp, ce, MemoKind::DeliveryNote, ard_id, None, None)?;
        s.memo(ce, sp, MemoKind::ArdIssuance, ard_id, Some(params.amount), None)?;
        s.memo(sp, fi, MemoKind::ArdAssignment, ard_id, Some(params.amount), None)?;
        let id = s.add_project(fi, ce, sp, CollateralKind::AccountsReceivable { ard_id: ard_id.into() }, params)?;
        Ok(s.finish(ScenarioKind::AccountsReceivable, id))
    }

    /// Inventory financing: the supplier pledges products and the lender
    /// grants credit. On default the lender sells the pledge back to the
    /// core enterprise, whose repayment closes the project.
    pub fn run_inventory(
        &mut self,
        sp: &Participant,
        ce: &Participant,
        fi: &Participant,
        product_ids: &[String],
        params: &ScenarioParams,
        default: bool,
    ) -> Result<ScenarioTrace, WorkflowError> {
        expect_role(sp, Role::Supplier, "supplier")?;
        expect_role(ce, Role::CoreEnterprise, "core enterprise")?;
        expect_role(fi, Role::FinancialInstitution, "lender")?;
        if product_ids.is_empty() {
            return Err(WorkflowError::EmptyCollateral);
        }
        let mut s = self.script();
        s.memo(sp, fi, MemoKind::Pledge, &product_ids.join(","), None, None)?;
        let collateral = CollateralKind::Inventory { product_ids: product_ids.to_vec() };
        let id = s.add_project(fi, ce, sp, collateral, params)?;
        if default {
            s.memo(fi, ce, MemoKind::PurchaseAgreement, &product_ids.join(","), Some(params.amount), Some(id))?;
            s.call(ce, Method::UpdateFiProject, json!({ "fiProjectId": id, "changes": { "status": "Repaid" } }))?;
        }
        Ok(s.finish(ScenarioKind::Inventory, id))
    }

    /// Prepayment financing: the core enterprise signs a purchase contract
    /// with the distributor, the lender finances it, and the distributor's
    /// deposit installments each release a delivery notice.
    #[allow(clippy::too_many_arguments)]
    pub fn run_prepayment(
        &mut self,
        dt: &Participant,
        ce: &Participant,
        fi: &Participant,
        pc_id: &str,
        deposit_fraction: f64,
        installments: u32,
        params: &ScenarioParams,
    ) -> Result<ScenarioTrace, WorkflowError> {
        expect_role(dt, Role::Distributor, "distributor")?;
        expect_role(ce, Role::CoreEnterprise, "core enterprise")?;
        expect_role(fi, Role::FinancialInstitution, "lender")?;
        if !(deposit_fraction > 0.0 && deposit_fraction < 1.0) || installments == 0 {
            return Err(WorkflowError::BadDeposit);
        }
        let deposit_bp = CollateralKind::deposit_bp_from_fraction(deposit_fraction).map_err(|_| WorkflowError::BadDeposit)?;
        let deposit_total = params.amount * deposit_bp as u64 / 10_000;
        let mut s = self.script();
        s.memo(ce, dt, MemoKind::PurchaseContract, pc_id, Some(params.amount), None)?;
        let id = s.add_project(fi, ce, dt, CollateralKind::Prepayment { pc_id: pc_id.into(), deposit_bp }, params)?;
        let n = installments as u64;
        for k in 0..n {
            let share = deposit_total / n + if k + 1 == n { deposit_total % n } else { 0 };
            let reference = format!("{pc_id}#{}", k + 1);
            s.memo(dt, fi, MemoKind::Deposit, &reference, Some(share), Some(id))?;
            s.memo(fi, ce, MemoKind::DeliveryNotice, &reference, None, Some(id))?;
        }
        Ok(s.finish(ScenarioKind::Prepayment, id))
    }
}

/// Registers a supplier, distributor, core enterprise and lender named with
/// `prefix`.
pub fn register_cast(net: &mut Network, prefix: &str) -> Result<[Participant; 4], WorkflowError> {
    Ok([
        net.register(&format!("{prefix}Sp"), UserType::Supplier)?,
        net.register(&format!("{prefix}Dt"), UserType::Distributor)?,
        net.register(&format!("{prefix}CE"), UserType::CoreEnterprise)?,
        net.register(&format!("{prefix}FI"), UserType::FinancialInstitution)?,
    ])
}
