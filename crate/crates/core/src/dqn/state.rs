//! Fixed-length encoding of a decision context.

use serde::{Deserialize, Serialize};

use crate::econ::public_goods_ratio;
use crate::llm::{DecisionContext, DecisionKind, LlmSuggestion};

pub const STATE_DIM: usize = 16;

/// Feature order:
///
/// | idx | feature |
/// |-----|---------|
/// | 0 | balance / annual income |
/// | 1 | owed / per-period salary |
/// | 2 | suggestion / owed (0 when nothing is owed) |
/// | 3 | sales tax rate |
/// | 4 | top marginal income tax rate |
/// | 5 | audit probability |
/// | 6 | penalty rate α / (1 + α) |
/// | 7 | fixed fine / annual income |
/// | 8–11 | public-goods kind one-hot |
/// | 12 | cumulative evasion gap / annual income |
/// | 13 | steps since last audit / audit period, capped at 1 |
/// | 14 | 1 for a sales-tax decision, 0 for income tax |
/// | 15 | perceived public-goods value per dollar owed |
///
/// Incomes of zero fall back to a denominator of one dollar.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub [f64; STATE_DIM]);

impl StateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

pub fn suggestion_fraction(ctx: &DecisionContext, suggestion: &LlmSuggestion) -> f64 {
    if ctx.owed.0 > 0.0 {
        (suggestion.amount.0 / ctx.owed.0).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn encode_state(ctx: &DecisionContext, suggestion: &LlmSuggestion) -> StateVector {
    let annual = positive_or_one(ctx.agent.annual_income.0);
    let monthly = positive_or_one(ctx.agent.salary.0);
    let p = &ctx.policies;
    let e = &p.enforcement;
    let mut v = [0.0; STATE_DIM];
    v[0] = ctx.agent.balance.0 / annual;
    v[1] = ctx.owed.0 / monthly;
    v[2] = suggestion_fraction(ctx, suggestion);
    v[3] = p.sales_tax.rate();
    v[4] = p.income_tax.top_rate();
    v[5] = e.audit_probability;
    v[6] = e.penalty_rate / (1.0 + e.penalty_rate);
    v[7] = e.fixed_fine.0 / annual;
    v[8 + p.public_goods.kind_index()] = 1.0;
    v[12] = ctx.cumulative_gap.0 / annual;
    v[13] = (f64::from(ctx.steps_since_audit) / f64::from(e.audit_period.max(1))).min(1.0);
    v[14] = match ctx.kind {
        DecisionKind::IncomeTax => 0.0,
        DecisionKind::SalesTax => 1.0,
    };
    v[15] = public_goods_ratio(&p.public_goods, ctx.owed).clamp(-10.0, 10.0);
    StateVector(v)
}

fn positive_or_one(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        1.0
    }
}
