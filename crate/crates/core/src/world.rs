//! The discrete-time economy: salaries, purchases, self-reported taxes,
//! audits and public goods, one deterministic run per seed.

use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentState, Desire, Traits, TransactionRecord};
use crate::calibration::{CalibrationData, CalibrationError};
use crate::dqn::{DqnConfig, DqnError, DqnPolicy};
use crate::econ::{
    compute_income_tax, compute_penalty, compute_sales_tax, public_goods_value, EconError, EnforcementPolicy, Good,
    IncomeTaxSchedule, PublicGoodsFunction, PublicGoodsMode, SalesTaxRate,
};
use crate::llm::{
    self, AgentSnapshot, BackendSession, BackendSpec, DecisionBackend, DecisionContext, DecisionKind, LlmError,
    PolicySnapshot, SYNTHETIC_EVASION_MESSAGE,
};
use crate::metrics::{AgentMetrics, MetricsCollector, RunMetrics, SeriesRow};
use crate::money::Money;
use crate::seed::{hash64, rng_from, stream};

/// Relative tolerance of the per-step money balance check.
pub const CONSERVATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Econ(#[from] EconError),
    #[error("decision backend failed for agent {agent} at step {step}: {source}")]
    Backend { agent: usize, step: u32, source: LlmError },
    #[error("learner failed for agent {agent} at step {step}: {source}")]
    Learner { agent: usize, step: u32, source: DqnError },
    #[error("money not conserved at step {step}: relative residual {residual:e}")]
    Conservation { step: u32, residual: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    /// N, 1 to 1000.
    pub population: usize,
    /// T, 365 to 7300.
    pub steps: u32,
    /// Δt in days; only 1 is supported.
    pub step_days: u32,
    pub seed: u64,
    /// m₀ as a fraction of N × mean per-period salary; drawn from
    /// [0.05, 0.15] when unset.
    pub initial_budget_fraction: Option<f64>,
    /// ρ, per step.
    pub welfare_discount: f64,
    /// θ.
    pub salary_period: u32,
    /// Step within each salary period at which the bundle is bought.
    pub purchase_offset: u32,
    pub risk_range: (f64, f64),
    pub horizon_range: (u32, u32),
    pub cognition_range: (f64, f64),
    pub public_goods: PublicGoodsFunction,
    /// Calibration defaults when unset.
    pub enforcement: Option<EnforcementPolicy>,
    pub sales_rate: Option<f64>,
    pub income_tax: Option<IncomeTaxSchedule>,
    /// Persona corpus id.
    pub persona: String,
    pub persona_size: usize,
    /// Synthetic evasion messages prepended to every persona.
    pub synthetic_messages: u32,
    pub desires_per_agent: usize,
    /// Share of net salary spent on the monthly bundle, tax included.
    pub spend_fraction: f64,
    /// Transaction lines shown to the backend.
    pub history_window: usize,
    pub decision_backend: BackendSpec,
    pub dqn: DqnConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            population: 100,
            steps: 365,
            step_days: 1,
            seed: 0,
            initial_budget_fraction: None,
            welfare_discount: 0.05 / 365.0,
            salary_period: 30,
            purchase_offset: 15,
            risk_range: (0.0, 1.0),
            horizon_range: (1, 1095),
            cognition_range: (0.80, 0.99),
            public_goods: PublicGoodsFunction::linear(1.0, PublicGoodsMode::Pooled),
            enforcement: None,
            sales_rate: None,
            income_tax: None,
            persona: "random".into(),
            persona_size: llm::PERSONA_WINDOW,
            synthetic_messages: 0,
            desires_per_agent: 8,
            spend_fraction: 0.8,
            history_window: 40,
            decision_backend: BackendSpec::default(),
            dqn: DqnConfig::default(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let err = |m: String| Err(SimError::Config(m));
        if !(1..=1000).contains(&self.population) {
            return err(format!("population {} outside [1, 1000]", self.population));
        }
        if !(365..=7300).contains(&self.steps) {
            return err(format!("steps {} outside [365, 7300]", self.steps));
        }
        if self.step_days != 1 {
            return err("only one-day steps are supported".into());
        }
        if let Some(f) = self.initial_budget_fraction {
            if !(0.05..=0.15).contains(&f) {
                return err(format!("initial budget fraction {f} outside [0.05, 0.15]"));
            }
        }
        if !(self.welfare_discount > 0.0 && self.welfare_discount < 1.0) {
            return err(format!("welfare discount {} outside (0, 1)", self.welfare_discount));
        }
        if self.salary_period == 0 || self.purchase_offset >= self.salary_period {
            return err("need salary_period >= 1 and purchase_offset < salary_period".into());
        }
        let (r0, r1) = self.risk_range;
        if !(0.0 <= r0 && r0 <= r1 && r1 <= 1.0) {
            return err(format!("risk range {:?} not within [0, 1]", self.risk_range));
        }
        let (h0, h1) = self.horizon_range;
        if !(1 <= h0 && h0 <= h1 && h1 <= 1095) {
            return err(format!("horizon range {:?} not within [1, 1095]", self.horizon_range));
        }
        let (c0, c1) = self.cognition_range;
        if !(0.80 <= c0 && c0 <= c1 && c1 <= 0.99) {
            return err(format!("cognition range {:?} not within [0.80, 0.99]", self.cognition_range));
        }
        if !(self.spend_fraction >= 0.0 && self.spend_fraction <= 1.0) {
            return err("spend_fraction outside [0, 1]".into());
        }
        self.public_goods.validate()?;
        if let Some(e) = &self.enforcement {
            e.validate()?;
        }
        if let Some(s) = &self.income_tax {
            s.validate()?;
        }
        self.dqn.validate().map_err(|e| SimError::Config(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GovernmentState {
    pub budget: Money,
    pub initial_budget: Money,
    pub sales_tax: SalesTaxRate,
    pub income_tax: IncomeTaxSchedule,
    pub public_goods: PublicGoodsFunction,
    pub enforcement: EnforcementPolicy,
    pub taxes_collected_cum: Money,
    pub penalties_collected_cum: Money,
    pub waived_back_taxes_cum: Money,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepEvents {
    pub step: u32,
    pub salaries_paid: usize,
    pub purchases: usize,
    pub audits: u32,
    pub penalties: Money,
    pub taxes_paid: Money,
    pub utility: f64,
}

/// Everything observable about a world, for comparison and export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub config: SimulationConfig,
    pub step: u32,
    pub agents: Vec<AgentState>,
    pub government: GovernmentState,
    pub goods_sink: Money,
    pub backend_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub metrics: RunMetrics,
    pub snapshot: WorldSnapshot,
}

pub struct World {
    pub config: SimulationConfig,
    pub agents: Vec<AgentState>,
    pub government: GovernmentState,
    goods: Vec<Good>,
    policies: Arc<PolicySnapshot>,
    sessions: Vec<Box<dyn BackendSession>>,
    learners: Vec<DqnPolicy>,
    learner_rngs: Vec<ChaCha8Rng>,
    audit_rng: ChaCha8Rng,
    goods_sink: Money,
    step: u32,
    metrics: MetricsCollector,
    ever_negative: Vec<bool>,
    budget_violation: bool,
    backend_id: String,
}

/// Builds the world with the backend named in `config`.
pub fn init_world(config: SimulationConfig, calibration: &CalibrationData) -> Result<World, SimError> {
    let backend = config.decision_backend.build().map_err(|e| SimError::Config(e.to_string()))?;
    World::new(config, calibration, backend.as_ref())
}

/// Runs `config` on the bundled calibration.
pub fn run(config: SimulationConfig) -> Result<RunResult, SimError> {
    init_world(config, &CalibrationData::bundled())?.run()
}

/// Runs `config` with an already constructed backend, so that several runs
/// can share one (e.g. one rate-limited remote client).
pub fn run_with(
    config: SimulationConfig,
    calibration: &CalibrationData,
    backend: &dyn DecisionBackend,
) -> Result<RunResult, SimError> {
    World::new(config, calibration, backend)?.run()
}

impl World {
    pub fn new(
        config: SimulationConfig,
        calibration: &CalibrationData,
        backend: &dyn DecisionBackend,
    ) -> Result<Self, SimError> {
        config.validate()?;
        if calibration.income_deciles.len() != 10 || calibration.goods_catalog.is_empty() {
            return Err(SimError::Config("calibration needs 10 income deciles and a goods catalog".into()));
        }
        let corpus = calibration
            .persona(&config.persona)
            .ok_or_else(|| SimError::Config(format!("no persona corpus named {:?}", config.persona)))?;

        let sales_tax = match config.sales_rate {
            Some(r) => SalesTaxRate::new(r)?,
            None => calibration.sales_rate,
        };
        let income_tax = config.income_tax.clone().unwrap_or_else(|| calibration.tax_schedule.clone());
        let enforcement = config.enforcement.unwrap_or(calibration.enforcement_defaults);
        let policies = Arc::new(PolicySnapshot {
            sales_tax,
            income_tax: income_tax.clone(),
            public_goods: config.public_goods.clone(),
            enforcement,
        });

        let mut rng = rng_from(&[config.seed, stream::INIT]);
        let n = config.population;

        // Stratified deciles: each block of ten agents gets a permutation.
        let mut deciles = Vec::with_capacity(n);
        while deciles.len() < n {
            let mut block: Vec<u8> = (1..=10).collect();
            block.shuffle(&mut rng);
            deciles.extend(block.into_iter().take(n - deciles.len()));
        }

        let periods_per_year = (365.0 / f64::from(config.salary_period)).round();
        let mut agents = Vec::with_capacity(n);
        for (id, &decile) in deciles.iter().enumerate() {
            let annual = calibration.income_deciles[usize::from(decile) - 1];
            let salary = (annual / periods_per_year).round_cents();
            let traits = Traits {
                risk: rng.random_range(config.risk_range.0..=config.risk_range.1),
                horizon: rng.random_range(config.horizon_range.0..=config.horizon_range.1),
                cognition: rng.random_range(config.cognition_range.0..=config.cognition_range.1),
            };
            let tax_per_period = compute_income_tax(salary * periods_per_year, &income_tax)? / periods_per_year;
            let net = salary - tax_per_period;
            let budget = net * config.spend_fraction / (1.0 + sales_tax.rate());
            let desires = sample_desires(&calibration.goods_catalog, config.desires_per_agent, budget, &mut rng);

            let mut persona: Vec<String> =
                vec![SYNTHETIC_EVASION_MESSAGE.to_string(); config.synthetic_messages as usize];
            persona.extend(corpus.choose_multiple(&mut rng, config.persona_size).cloned());

            agents.push(AgentState {
                id,
                balance: salary,
                salary_period: config.salary_period,
                salary,
                decile,
                desires,
                traits,
                persona: persona.into(),
                ledger: Default::default(),
                last_audit_step: None,
            });
        }

        let fraction: f64 = rng.random_range(0.05..=0.15);
        let fraction = config.initial_budget_fraction.unwrap_or(fraction);
        let mean_salary = agents.iter().map(|a| a.salary.0).sum::<f64>() / n as f64;
        let initial_budget = Money(fraction * n as f64 * mean_salary).round_cents();

        let sessions = agents
            .iter()
            .map(|a| backend.open_session(a.id, hash64(&[config.seed, stream::BACKEND, a.id as u64])))
            .collect();
        let learners = agents
            .iter()
            .map(|a| {
                DqnPolicy::new(
                    config.dqn.clone(),
                    a.traits,
                    a.salary.0,
                    hash64(&[config.seed, stream::NETWORK_INIT, a.id as u64]),
                )
                .map_err(|source| SimError::Learner { agent: a.id, step: 0, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let learner_rngs = agents.iter().map(|a| rng_from(&[config.seed, stream::LEARNER, a.id as u64])).collect();

        Ok(Self {
            government: GovernmentState {
                budget: initial_budget,
                initial_budget,
                sales_tax,
                income_tax,
                public_goods: config.public_goods.clone(),
                enforcement,
                taxes_collected_cum: Money::ZERO,
                penalties_collected_cum: Money::ZERO,
                waived_back_taxes_cum: Money::ZERO,
            },
            goods: calibration.goods_catalog.clone(),
            policies,
            sessions,
            learners,
            learner_rngs,
            audit_rng: rng_from(&[config.seed, stream::AUDIT]),
            goods_sink: Money::ZERO,
            step: 0,
            metrics: MetricsCollector::new(n),
            ever_negative: vec![false; n],
            budget_violation: false,
            backend_id: backend.id(),
            agents,
            config,
        })
    }

    pub fn current_step(&self) -> u32 {
        self.step
    }

    pub fn goods(&self) -> &[Good] {
        &self.goods
    }

    pub fn learner(&self, agent: usize) -> &DqnPolicy {
        &self.learners[agent]
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        WorldSnapshot {
            config: self.config.clone(),
            step: self.step,
            agents: self.agents.clone(),
            government: self.government.clone(),
            goods_sink: self.goods_sink,
            backend_id: self.backend_id.clone(),
        }
    }

    fn total_money(&self) -> f64 {
        self.agents.iter().map(|a| a.balance.0).sum::<f64>() + self.government.budget.0 + self.goods_sink.0
    }

    fn context(&self, i: usize, kind: DecisionKind, owed: Money) -> DecisionContext {
        let a = &self.agents[i];
        DecisionContext {
            step: self.step,
            agent: AgentSnapshot {
                id: a.id,
                balance: a.balance,
                salary: a.salary,
                salary_period: a.salary_period,
                annual_income: a.annual_income(),
                decile: a.decile,
                risk: a.traits.risk,
                horizon: a.traits.horizon,
                cognition: a.traits.cognition,
            },
            persona: a.persona.clone(),
            policies: self.policies.clone(),
            history: a.ledger.recent_lines(self.config.history_window),
            outcomes: self.learners[i].outcome_lines(),
            owed,
            kind,
            cumulative_gap: a.ledger.evasion_gap,
            steps_since_audit: self.step - a.last_audit_step.unwrap_or(0),
        }
    }

    /// Suggestion then final decision; returns the amount paid.
    fn decide(&mut self, i: usize, kind: DecisionKind, owed: Money) -> Result<Money, SimError> {
        if owed.0 <= 0.0 {
            return Ok(Money::ZERO);
        }
        let step = self.step;
        let ctx = self.context(i, kind, owed);
        let suggestion = llm::suggest(self.sessions[i].as_mut(), &ctx)
            .map_err(|source| SimError::Backend { agent: i, step, source })?;
        let paid = self.learners[i]
            .decide_and_learn(&ctx, &suggestion, &mut self.learner_rngs[i])
            .map_err(|source| SimError::Learner { agent: i, step, source })?;
        Ok(paid.clamp(Money::ZERO, owed))
    }

    fn post(&mut self, i: usize, record: TransactionRecord) {
        self.metrics.observe(i, &record);
        self.agents[i].ledger.post(record);
    }

    /// Advances one step: salaries, purchases, audits, public goods, metrics.
    pub fn step(&mut self) -> Result<StepEvents, SimError> {
        let t = self.step;
        let n = self.agents.len();
        let mut events = StepEvents { step: t, ..StepEvents::default() };
        let before = self.total_money();
        let mut inflow = Money::ZERO;
        let mut paid_now = vec![Money::ZERO; n];
        let theta = self.config.salary_period;

        if t % theta == 0 {
            for i in 0..n {
                let salary = self.agents[i].salary;
                let annual = self.agents[i].annual_income();
                let periods = (365.0 / f64::from(theta)).round();
                let owed = (compute_income_tax(annual, &self.government.income_tax)? / periods).round_cents();
                self.agents[i].balance += salary;
                inflow += salary;
                let paid = self.decide(i, DecisionKind::IncomeTax, owed)?;
                self.agents[i].balance -= paid;
                self.government.budget += paid;
                self.government.taxes_collected_cum += paid;
                paid_now[i] += paid;
                self.learners[i].record_cost(paid);
                self.post(i, TransactionRecord::income(t, salary, owed, paid));
                self.post(i, TransactionRecord::tax_payment(t, paid, owed, "income"));
                events.salaries_paid += 1;
            }
        }

        if t % theta == self.config.purchase_offset {
            for i in 0..n {
                let lines: Vec<Money> = self.agents[i]
                    .desires
                    .iter()
                    .map(|d| (self.goods[d.good_id].price * f64::from(d.quantity)).round_cents())
                    .collect();
                let value: Money = lines.iter().copied().sum();
                if value.0 <= 0.0 {
                    continue;
                }
                let owed = compute_sales_tax(value, self.government.sales_tax)?.round_cents();
                let paid = self.decide(i, DecisionKind::SalesTax, owed)?;
                self.agents[i].balance -= value + paid;
                self.goods_sink += value;
                self.government.budget += paid;
                self.government.taxes_collected_cum += paid;
                paid_now[i] += paid;
                self.learners[i].record_cost(value + paid);

                // The bundle's tax is split across its goods by value, kept
                // unrounded so every line carries its share.
                let pay_fraction = if owed.0 > 0.0 { paid.0 / owed.0 } else { 0.0 };
                for line in lines {
                    let line_owed = owed * (line.0 / value.0);
                    self.post(i, TransactionRecord::purchase(t, line, line_owed, line_owed * pay_fraction));
                }
                self.post(i, TransactionRecord::tax_payment(t, paid, owed, "sales"));
                events.purchases += 1;
            }
        }

        let enforcement = self.government.enforcement;
        if (t + 1) % enforcement.audit_period == 0 {
            for i in 0..n {
                let u: f64 = self.audit_rng.random();
                if u >= enforcement.audit_probability {
                    continue;
                }
                events.audits += 1;
                self.agents[i].last_audit_step = Some(t);
                let gap = self.agents[i].ledger.evasion_gap;
                if gap.0 <= 0.005 {
                    continue;
                }
                let penalty = compute_penalty(gap, &enforcement)?.round_cents();
                self.agents[i].ledger.waive();
                self.government.waived_back_taxes_cum += gap;
                self.agents[i].balance -= penalty;
                self.government.budget += penalty;
                self.government.penalties_collected_cum += penalty;
                events.penalties += penalty;
                self.learners[i].record_penalty(penalty);
                self.post(i, TransactionRecord::penalty(t, penalty, gap));
            }
        }

        // Public goods are valued only on steps where taxes were paid.
        let f = &self.government.public_goods;
        let total_paid: Money = paid_now.iter().copied().sum();
        let utilities: Vec<f64> = match f.mode {
            PublicGoodsMode::Individual => paid_now
                .iter()
                .map(|&p| if p.0 > 0.0 { public_goods_value(f, p) } else { 0.0 })
                .collect(),
            PublicGoodsMode::Pooled => {
                let u = if total_paid.0 > 0.0 { public_goods_value(f, total_paid) / n as f64 } else { 0.0 };
                vec![u; n]
            }
        };
        let discount = (1.0 + self.config.welfare_discount).powi(-(t as i32));
        for (i, &u) in utilities.iter().enumerate() {
            if u != 0.0 {
                self.learners[i].record_utility(u);
                self.post(i, TransactionRecord::utility(t, u));
                self.metrics.welfare += u * discount;
                self.metrics.welfare_undiscounted += u;
                events.utility += u;
            }
        }
        events.taxes_paid = total_paid;

        let after = self.total_money();
        let residual = (after - before - inflow.0).abs() / (before.abs() + inflow.0.abs()).max(1.0);
        self.metrics.max_residual = self.metrics.max_residual.max(residual);
        if residual > CONSERVATION_TOLERANCE {
            return Err(SimError::Conservation { step: t, residual });
        }

        for (flag, a) in self.ever_negative.iter_mut().zip(&self.agents) {
            *flag |= a.balance.0 < 0.0;
        }
        self.budget_violation |= self.government.budget.0 < 0.0;
        self.metrics.audits += u64::from(events.audits);
        self.metrics.penalties += events.penalties;
        self.metrics.series.push(SeriesRow {
            step: t,
            informal_size: self.metrics.informal_size(),
            informal_share_so_far: self.metrics.share(),
            government_budget: self.government.budget.0,
            audits: events.audits,
            penalties: events.penalties.0,
        });
        self.step += 1;
        Ok(events)
    }

    /// Runs the remaining steps and collects metrics.
    pub fn run(mut self) -> Result<RunResult, SimError> {
        while self.step < self.config.steps {
            self.step()?;
        }
        let last = self.step.saturating_sub(1);
        for i in 0..self.agents.len() {
            self.learners[i]
                .finish(last, &mut self.learner_rngs[i])
                .map_err(|source| SimError::Learner { agent: i, step: last, source })?;
        }
        Ok(RunResult { metrics: self.metrics(), snapshot: self.snapshot() })
    }

    pub fn metrics(&self) -> RunMetrics {
        let per_agent: Vec<AgentMetrics> = self
            .agents
            .iter()
            .map(|a| AgentMetrics {
                agent_id: a.id,
                delta: a.ledger.first_evasion_step,
                informal_share: self.metrics.agent_share(a.id),
                decile: a.decile,
            })
            .collect();
        RunMetrics {
            delta: per_agent.iter().filter_map(|a| a.delta).min(),
            informal_size_series: self.metrics.series.iter().map(|r| Money(r.informal_size)).collect(),
            informal_share: self.metrics.share(),
            welfare: self.metrics.welfare,
            welfare_undiscounted: self.metrics.welfare_undiscounted,
            per_agent,
            series: self.metrics.series.clone(),
            audits: self.metrics.audits,
            penalties: self.metrics.penalties,
            waived_back_taxes: self.government.waived_back_taxes_cum,
            negative_balance_agents: self.ever_negative.iter().filter(|&&b| b).count(),
            budget_violation: self.budget_violation,
            max_conservation_residual: self.metrics.max_residual,
        }
    }
}

/// Picks goods by CPI weight without replacement and sizes quantities so
/// the bundle costs about `budget`.
fn sample_desires<R: Rng + ?Sized>(catalog: &[Good], count: usize, budget: Money, rng: &mut R) -> Vec<Desire> {
    let count = count.min(catalog.len());
    let mut chosen: Vec<&Good> = catalog
        .choose_multiple_weighted(rng, count, |g| g.weight)
        .map(|it| it.collect())
        .unwrap_or_else(|_| catalog.iter().take(count).collect());
    chosen.sort_by_key(|g| g.id);
    let weight: f64 = chosen.iter().map(|g| g.weight).sum();
    chosen
        .iter()
        .map(|g| {
            let allocation = if weight > 0.0 { budget.0 * g.weight / weight } else { budget.0 / count as f64 };
            let quantity = (allocation / g.price.0).round().max(1.0) as u32;
            Desire { good_id: catalog.iter().position(|c| c.id == g.id).unwrap_or(0), quantity }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ComplianceProfile;

    fn config(population: usize, profile: ComplianceProfile) -> SimulationConfig {
        SimulationConfig {
            population,
            seed: 42,
            risk_range: (0.0, 0.0),
            public_goods: PublicGoodsFunction::linear(1.0, PublicGoodsMode::Individual),
            decision_backend: BackendSpec::scripted(profile),
            dqn: DqnConfig { epsilon_min: 0.0, ..DqnConfig::default() },
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn single_agent_salary_from_decile_table() {
        let cal = CalibrationData::bundled();
        let world = init_world(config(1, ComplianceProfile::FullPay), &cal).unwrap();
        let salary = world.agents[0].salary;
        assert!(cal.income_deciles.iter().any(|d| (*d / 12.0).round_cents() == salary));
    }

    #[test]
    fn same_seed_same_world() {
        let cal = CalibrationData::bundled();
        let a = init_world(config(10, ComplianceProfile::FullPay), &cal).unwrap().snapshot();
        let b = init_world(config(10, ComplianceProfile::FullPay), &cal).unwrap().snapshot();
        assert_eq!(a, b);
    }

    #[test]
    fn stratified_deciles() {
        let cal = CalibrationData::bundled();
        let world = init_world(config(1000, ComplianceProfile::FullPay), &cal).unwrap();
        let mut counts = [0; 10];
        world.agents.iter().for_each(|a| counts[usize::from(a.decile) - 1] += 1);
        assert_eq!(counts, [100; 10]);
    }

    #[test]
    fn bundle_spend_near_target() {
        let cal = CalibrationData::bundled();
        let world = init_world(config(20, ComplianceProfile::FullPay), &cal).unwrap();
        for a in &world.agents {
            let value: f64 = a.desires.iter().map(|d| world.goods()[d.good_id].price.0 * f64::from(d.quantity)).sum();
            assert_eq!(a.desires.len(), 8);
            // quantities are whole units, so allow generous slack
            assert!(value > 0.0 && value < a.salary.0, "agent {} spends {value}", a.id);
        }
    }

    #[test]
    fn full_compliance_has_no_evasion() {
        let r = run(config(3, ComplianceProfile::FullPay)).unwrap();
        assert_eq!(r.metrics.informal_share, 0.0);
        assert_eq!(r.metrics.delta, None);
        for a in &r.snapshot.agents {
            assert_eq!(a.ledger.evasion_gap, Money::ZERO);
        }
    }

    #[test]
    fn never_pay_without_audits_is_fully_informal() {
        let mut c = config(3, ComplianceProfile::NeverPay);
        c.enforcement = Some(EnforcementPolicy::validation(0.0));
        let r = run(c).unwrap();
        assert_eq!(r.metrics.audits, 0);
        assert!((r.metrics.informal_share - 1.0).abs() < 1e-12, "{:?}", r.metrics.per_agent);
        assert_eq!(r.metrics.delta, Some(0));
    }

    #[test]
    fn half_pay_is_half_informal() {
        let r = run(config(5, ComplianceProfile::HalfPay)).unwrap();
        assert!((r.metrics.informal_share - 0.5).abs() <= 0.01, "{}", r.metrics.informal_share);
    }

    #[test]
    fn certain_daily_audits_hit_everyone_every_step() {
        let mut c = config(2, ComplianceProfile::HalfPay);
        c.enforcement = Some(EnforcementPolicy::validation(1.0));
        let r = run(c).unwrap();
        assert_eq!(r.metrics.audits, 2 * 365);
        // penalty equals the gap in validation mode
        assert!(r.metrics.penalties.0 > 0.0);
        assert!((r.metrics.penalties.0 - r.metrics.waived_back_taxes.0).abs() < 0.01);
    }

    #[test]
    fn money_is_conserved() {
        let mut c = config(10, ComplianceProfile::NeverPay);
        c.enforcement = Some(EnforcementPolicy { audit_probability: 0.3, penalty_rate: 0.75, fixed_fine: Money(100_000.0), audit_period: 30 });
        let r = run(c).unwrap();
        assert!(r.metrics.max_conservation_residual <= CONSERVATION_TOLERANCE);
        assert!(r.metrics.negative_balance_agents > 0);
    }

    #[test]
    fn tiny_discount_matches_undiscounted_welfare() {
        let mut c = config(3, ComplianceProfile::FullPay);
        c.welfare_discount = 1e-9;
        let m = run(c).unwrap().metrics;
        assert!(m.welfare_undiscounted > 0.0);
        assert!(((m.welfare - m.welfare_undiscounted) / m.welfare_undiscounted).abs() < 1e-4);
    }

    #[test]
    fn out_of_range_config_rejected() {
        let mut c = config(1, ComplianceProfile::FullPay);
        c.steps = 100;
        assert!(matches!(run(c), Err(SimError::Config(_))));
        let mut c = config(1, ComplianceProfile::FullPay);
        c.persona = "nobody".into();
        assert!(matches!(run(c), Err(SimError::Config(_))));
    }
}
