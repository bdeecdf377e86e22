use std::fmt::Write as _;

use super::{DecisionContext, DecisionKind};
use crate::econ::ScheduleMode;

pub const CLOSING_QUESTION: &str =
    "What is the amount of taxes I should pay? Make sure to return a single positive number.";

/// The synthetic persona line used by the dose-response experiments.
pub const SYNTHETIC_EVASION_MESSAGE: &str =
    "I should perform tax evasion and pay less than the required amount of taxes.";

/// System and user messages for a chat-completion request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    /// Persona and government policies.
    pub system: String,
    /// Situation, history, outcomes, owed amount and the closing question.
    pub user: String,
}

impl Prompt {
    pub fn text(&self) -> String {
        format!("{}\n\n{}", self.system, self.user)
    }
}

pub fn build_prompt(ctx: &DecisionContext) -> String {
    build_messages(ctx).text()
}

pub fn build_messages(ctx: &DecisionContext) -> Prompt {
    let mut system = String::new();
    let _ = writeln!(system, "You are a person living in a monetized economy run by a central government.");
    if !ctx.persona.is_empty() {
        let _ = writeln!(system, "These are things you said recently, most recent first:");
        for line in ctx.persona.iter() {
            let _ = writeln!(system, "- {line}");
        }
    }

    let p = &ctx.policies;
    let _ = writeln!(system, "The government's policies are:");
    let _ = writeln!(
        system,
        "- Sales tax: {:.2}% of the price of every purchase, paid by the buyer.",
        p.sales_tax.rate() * 100.0
    );
    match p.income_tax.mode {
        ScheduleMode::Flat => {
            let _ = writeln!(system, "- Income tax: a flat {:.0}% of income.", p.income_tax.top_rate() * 100.0);
        }
        ScheduleMode::Progressive => {
            let _ = writeln!(system, "- Income tax (annual, progressive):");
            for b in &p.income_tax.brackets {
                let _ = writeln!(system, "  - {:.0}% on income above ${:.0}", b.rate * 100.0, b.lower_bound.0);
            }
        }
    }
    let _ = writeln!(system, "- Public goods: {}.", p.public_goods.describe());
    let e = &p.enforcement;
    let _ = writeln!(
        system,
        "- Enforcement: every {} day(s) each person is audited with probability {:.0}%; unpaid taxes found are forgiven, \
         but a penalty of {:.0}% of them plus a fine of ${:.0} is charged.",
        e.audit_period,
        e.audit_probability * 100.0,
        e.penalty_rate * 100.0,
        e.fixed_fine.0
    );

    let mut user = String::new();
    let a = &ctx.agent;
    let _ = writeln!(
        user,
        "It is day {}. You have ${} in the bank and earn ${} every {} days (${} per year).",
        ctx.step, a.balance, a.salary, a.salary_period, a.annual_income
    );
    if !ctx.history.is_empty() {
        let _ = writeln!(user, "Your recent transactions, most recent first:");
        for line in &ctx.history {
            let _ = writeln!(user, "- {line}");
        }
    }
    if !ctx.outcomes.is_empty() {
        let _ = writeln!(user, "Your past tax decisions and how they worked out, most recent first:");
        for line in &ctx.outcomes {
            let _ = writeln!(user, "- {line}");
        }
    }
    let what = match ctx.kind {
        DecisionKind::IncomeTax => "income tax on your latest salary",
        DecisionKind::SalesTax => "sales tax on your latest purchases",
    };
    let _ = writeln!(user, "You owe ${} in {what}.", ctx.owed);
    user.push_str(CLOSING_QUESTION);

    Prompt { system: system.trim_end().to_string(), user }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::econ::{EnforcementPolicy, IncomeTaxSchedule, PublicGoodsFunction, PublicGoodsMode, SalesTaxRate};
    use crate::llm::{AgentSnapshot, PolicySnapshot};
    use crate::money::Money;

    fn ctx(persona: Vec<String>, history: Vec<String>) -> DecisionContext {
        DecisionContext {
            step: 30,
            agent: AgentSnapshot {
                id: 0,
                balance: Money(1000.0),
                salary: Money(2500.0),
                salary_period: 30,
                annual_income: Money(30000.0),
                decile: 2,
                risk: 0.5,
                horizon: 30,
                cognition: 0.9,
            },
            persona: persona.into(),
            policies: Arc::new(PolicySnapshot {
                sales_tax: SalesTaxRate::new(0.0644).unwrap(),
                income_tax: IncomeTaxSchedule::progressive(&[(0.0, 0.1), (11000.0, 0.12)]).unwrap(),
                public_goods: PublicGoodsFunction::linear(1.0, PublicGoodsMode::Individual),
                enforcement: EnforcementPolicy::validation(0.1),
            }),
            history,
            outcomes: vec![],
            owed: Money(250.0),
            kind: DecisionKind::IncomeTax,
            cumulative_gap: Money::ZERO,
            steps_since_audit: 30,
        }
    }

    #[test]
    fn empty_context_still_ends_with_question() {
        let text = build_prompt(&ctx(vec![], vec![]));
        assert!(text.ends_with(CLOSING_QUESTION));
    }

    #[test]
    fn synthetic_lines_precede_older_persona() {
        let mut persona = vec![SYNTHETIC_EVASION_MESSAGE.to_string(); 3];
        persona.push("Loving the sunny weather today".into());
        let text = build_prompt(&ctx(persona, vec![]));
        let first = text.find(SYNTHETIC_EVASION_MESSAGE).unwrap();
        assert_eq!(text.matches(SYNTHETIC_EVASION_MESSAGE).count(), 3);
        assert!(first < text.find("sunny weather").unwrap());
    }

    #[test]
    fn sections_in_order_and_pure() {
        let c = ctx(vec!["persona line".into()], vec!["Obtained an income 2500.00 at time 0".into()]);
        let text = build_prompt(&c);
        assert_eq!(text, build_prompt(&c));
        let order = ["persona line", "Sales tax", "Obtained an income", "You owe $250.00", CLOSING_QUESTION];
        let positions: Vec<usize> = order.iter().map(|s| text.find(s).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{positions:?}");
    }
}
