//! Informal-economy metrics: first evasion time δ, informal size O and the
//! informal share Ō, plus the per-step series exported with every run.

use serde::{Deserialize, Serialize};

use crate::agent::TransactionRecord;
use crate::money::Money;

/// Share of a taxable transaction that counts as informal: its unpaid tax
/// fraction, applied to value plus owed tax.
pub fn informal_contribution(record: &TransactionRecord) -> (f64, f64) {
    let owed = record.tax_owed.0;
    let gross = record.amount.0 + owed;
    if owed <= 0.0 {
        return (0.0, gross);
    }
    let unpaid = ((owed - record.tax_paid.0) / owed).clamp(0.0, 1.0);
    (unpaid * gross, gross)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub step: u32,
    /// Cumulative informal size.
    #[serde(rename = "O")]
    pub informal_size: f64,
    pub informal_share_so_far: f64,
    pub government_budget: f64,
    pub audits: u32,
    pub penalties: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMetrics {
    pub agent_id: usize,
    pub delta: Option<u32>,
    pub informal_share: f64,
    pub decile: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Population δ: earliest per-agent first-evasion step.
    pub delta: Option<u32>,
    /// Cumulative O after each step.
    pub informal_size_series: Vec<Money>,
    pub informal_share: f64,
    /// `Σ_t Σ_a u_a^t / (1 + ρ)^t`.
    pub welfare: f64,
    pub welfare_undiscounted: f64,
    pub per_agent: Vec<AgentMetrics>,
    pub series: Vec<SeriesRow>,
    pub audits: u64,
    pub penalties: Money,
    pub waived_back_taxes: Money,
    pub negative_balance_agents: usize,
    pub budget_violation: bool,
    /// Largest relative money-conservation residual seen in any step.
    pub max_conservation_residual: f64,
}

/// Ō; 0 when there were no transactions.
pub fn informal_share(metrics: &RunMetrics) -> f64 {
    metrics.informal_share
}

pub fn first_evasion_time(metrics: &RunMetrics) -> Option<u32> {
    metrics.delta
}

/// Running totals while a world steps.
#[derive(Debug, Clone, Default)]
pub struct MetricsCollector {
    informal: f64,
    total: f64,
    per_agent: Vec<(f64, f64)>,
    pub series: Vec<SeriesRow>,
    pub welfare: f64,
    pub welfare_undiscounted: f64,
    pub audits: u64,
    pub penalties: Money,
    pub max_residual: f64,
}

impl MetricsCollector {
    pub fn new(population: usize) -> Self {
        Self { per_agent: vec![(0.0, 0.0); population], ..Self::default() }
    }

    pub fn observe(&mut self, agent: usize, record: &TransactionRecord) {
        if record.is_taxable() {
            let (o, g) = informal_contribution(record);
            self.informal += o;
            self.total += g;
            let a = &mut self.per_agent[agent];
            a.0 += o;
            a.1 += g;
        }
    }

    pub fn informal_size(&self) -> f64 {
        self.informal
    }

    pub fn share(&self) -> f64 {
        ratio(self.informal, self.total)
    }

    pub fn agent_share(&self, agent: usize) -> f64 {
        let (o, g) = self.per_agent[agent];
        ratio(o, g)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proration() {
        let full = TransactionRecord::purchase(0, Money(100.0), Money(10.0), Money(10.0));
        assert_eq!(informal_contribution(&full), (0.0, 110.0));
        let none = TransactionRecord::purchase(0, Money(100.0), Money(10.0), Money(0.0));
        assert_eq!(informal_contribution(&none), (110.0, 110.0));
        let half = TransactionRecord::purchase(0, Money(100.0), Money(10.0), Money(5.0));
        assert_eq!(informal_contribution(&half), (55.0, 110.0));
    }

    #[test]
    fn empty_economy_share_is_zero() {
        assert_eq!(MetricsCollector::new(3).share(), 0.0);
    }
}
