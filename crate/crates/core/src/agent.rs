//! Agent state and the per-agent tax ledger.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::money::Money;

/// A gap above this many dollars counts as evasion.
pub const EVASION_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxKind {
    Income,
    Purchase,
    TaxPayment,
    Penalty,
    PublicGoodUtility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub step: u32,
    pub kind: TxKind,
    pub amount: Money,
    pub tax_owed: Money,
    pub tax_paid: Money,
    pub text_form: String,
}

impl TransactionRecord {
    pub fn income(step: u32, salary: Money, owed: Money, paid: Money) -> Self {
        Self {
            step,
            kind: TxKind::Income,
            amount: salary,
            tax_owed: owed,
            tax_paid: paid,
            text_form: format!("Obtained an income {salary} at time {step}"),
        }
    }

    pub fn purchase(step: u32, price: Money, owed: Money, paid: Money) -> Self {
        Self {
            step,
            kind: TxKind::Purchase,
            amount: price,
            tax_owed: owed,
            tax_paid: paid,
            text_form: format!("buy a product for a price {price}"),
        }
    }

    pub fn tax_payment(step: u32, paid: Money, owed: Money, what: &str) -> Self {
        Self {
            step,
            kind: TxKind::TaxPayment,
            amount: paid,
            tax_owed: Money::ZERO,
            tax_paid: Money::ZERO,
            text_form: format!("Paid {paid} of {owed} owed in {what} taxes at time {step}"),
        }
    }

    pub fn penalty(step: u32, penalty: Money, gap: Money) -> Self {
        Self {
            step,
            kind: TxKind::Penalty,
            amount: penalty,
            tax_owed: Money::ZERO,
            tax_paid: Money::ZERO,
            text_form: format!("Was audited for {gap} in unpaid taxes and charged a penalty of {penalty} at time {step}"),
        }
    }

    pub fn utility(step: u32, value: f64) -> Self {
        Self {
            step,
            kind: TxKind::PublicGoodUtility,
            amount: Money(value),
            tax_owed: Money::ZERO,
            tax_paid: Money::ZERO,
            text_form: format!("Received public goods worth {:.2} at time {step}", value),
        }
    }

    /// Income and purchase records carry a tax obligation.
    pub fn is_taxable(&self) -> bool {
        matches!(self.kind, TxKind::Income | TxKind::Purchase)
    }
}

/// Running tax position of one agent.
///
/// `evasion_gap = taxes_owed_cum − taxes_paid_cum − waived_cum`, where the
/// waived part is whatever audits discovered and wrote off.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentLedger {
    pub history: Vec<TransactionRecord>,
    pub taxes_owed_cum: Money,
    pub taxes_paid_cum: Money,
    pub waived_cum: Money,
    pub evasion_gap: Money,
    pub first_evasion_step: Option<u32>,
}

impl AgentLedger {
    pub fn post(&mut self, record: TransactionRecord) {
        if record.is_taxable() {
            self.taxes_owed_cum += record.tax_owed;
            self.taxes_paid_cum += record.tax_paid;
            self.evasion_gap = (self.taxes_owed_cum - self.taxes_paid_cum - self.waived_cum).round_cents();
            if self.first_evasion_step.is_none() && self.evasion_gap.0 > EVASION_TOLERANCE {
                self.first_evasion_step = Some(record.step);
            }
        }
        self.history.push(record);
    }

    /// Writes off the current gap after an audit and returns it.
    pub fn waive(&mut self) -> Money {
        let gap = self.evasion_gap.max(Money::ZERO);
        self.waived_cum += gap;
        self.evasion_gap = (self.taxes_owed_cum - self.taxes_paid_cum - self.waived_cum).round_cents();
        gap
    }

    /// The most recent `limit` history lines, newest first.
    pub fn recent_lines(&self, limit: usize) -> Vec<String> {
        self.history.iter().rev().take(limit).map(|r| r.text_form.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Desire {
    pub good_id: usize,
    /// Units bought per salary period.
    pub quantity: u32,
}

/// Bounded-rationality traits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Traits {
    /// Exploration propensity ζ in [0, 1].
    pub risk: f64,
    /// Planning horizon η in days.
    pub horizon: u32,
    /// Cognitive ability υ; reward noise has std 1 − υ.
    pub cognition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub balance: Money,
    pub salary_period: u32,
    /// Paid every `salary_period` steps.
    pub salary: Money,
    /// Income decile, 1 to 10.
    pub decile: u8,
    pub desires: Vec<Desire>,
    pub traits: Traits,
    /// Persona snippets, most recent first.
    pub persona: Arc<[String]>,
    pub ledger: AgentLedger,
    pub last_audit_step: Option<u32>,
}

impl AgentState {
    pub fn annual_income(&self) -> Money {
        self.salary * (365.0 / f64::from(self.salary_period)).round()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_tracks_underpayment_and_first_step() {
        let mut ledger = AgentLedger::default();
        ledger.post(TransactionRecord::income(0, Money(1000.0), Money(100.0), Money(100.0)));
        assert_eq!(ledger.first_evasion_step, None);
        ledger.post(TransactionRecord::purchase(12, Money(50.0), Money(3.22), Money(1.0)));
        assert_eq!(ledger.evasion_gap, Money(2.22));
        assert_eq!(ledger.first_evasion_step, Some(12));
        ledger.post(TransactionRecord::purchase(20, Money(50.0), Money(3.22), Money(0.0)));
        assert_eq!(ledger.first_evasion_step, Some(12));
    }

    #[test]
    fn waive_resets_gap_but_keeps_first_step() {
        let mut ledger = AgentLedger::default();
        ledger.post(TransactionRecord::income(3, Money(1000.0), Money(100.0), Money(40.0)));
        assert_eq!(ledger.waive(), Money(60.0));
        assert_eq!(ledger.evasion_gap, Money::ZERO);
        assert_eq!(ledger.waived_cum, Money(60.0));
        assert_eq!(ledger.first_evasion_step, Some(3));
    }

    #[test]
    fn one_cent_is_tolerated() {
        let mut ledger = AgentLedger::default();
        ledger.post(TransactionRecord::purchase(0, Money(10.0), Money(0.65), Money(0.64)));
        assert_eq!(ledger.first_evasion_step, None);
    }

    #[test]
    fn text_forms() {
        let r = TransactionRecord::income(30, Money(2500.0), Money(0.0), Money(0.0));
        assert_eq!(r.text_form, "Obtained an income 2500.00 at time 30");
        let r = TransactionRecord::purchase(45, Money(7.6), Money(0.0), Money(0.0));
        assert_eq!(r.text_form, "buy a product for a price 7.60");
    }
}
