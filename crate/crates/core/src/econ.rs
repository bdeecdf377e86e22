//! Tax, public-goods and penalty arithmetic.
//!
//! Everything here is a pure function over immutable values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Money;

#[derive(Debug, Error, PartialEq)]
pub enum EconError {
    #[error("invalid tax schedule: {0}")]
    Schedule(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid policy: {0}")]
    Policy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaxBracket {
    /// Income above this bound is taxed at `rate`.
    pub lower_bound: Money,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    Progressive,
    Flat,
}

/// Income tax policy: ordered brackets, or a single flat rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncomeTaxSchedule {
    pub brackets: Vec<TaxBracket>,
    pub mode: ScheduleMode,
}

impl IncomeTaxSchedule {
    pub fn progressive(brackets: &[(f64, f64)]) -> Result<Self, EconError> {
        let schedule = Self {
            brackets: brackets
                .iter()
                .map(|&(lower, rate)| TaxBracket { lower_bound: Money(lower), rate })
                .collect(),
            mode: ScheduleMode::Progressive,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn flat(rate: f64) -> Result<Self, EconError> {
        let schedule = Self {
            brackets: vec![TaxBracket { lower_bound: Money::ZERO, rate }],
            mode: ScheduleMode::Flat,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<(), EconError> {
        let first = self
            .brackets
            .first()
            .ok_or_else(|| EconError::Schedule("no brackets".into()))?;
        if first.lower_bound != Money::ZERO {
            return Err(EconError::Schedule(format!(
                "first bound must be 0, got {}",
                first.lower_bound
            )));
        }
        if self.mode == ScheduleMode::Flat && self.brackets.len() != 1 {
            return Err(EconError::Schedule("flat schedule must have exactly one bracket".into()));
        }
        for b in &self.brackets {
            if !(0.0..=1.0).contains(&b.rate) {
                return Err(EconError::Schedule(format!("rate {} outside [0, 1]", b.rate)));
            }
            if !b.lower_bound.is_finite() {
                return Err(EconError::Schedule("non-finite bound".into()));
            }
        }
        for pair in self.brackets.windows(2) {
            if pair[1].lower_bound <= pair[0].lower_bound {
                return Err(EconError::Schedule(format!(
                    "bounds not strictly increasing at {}",
                    pair[1].lower_bound
                )));
            }
        }
        Ok(())
    }

    pub fn top_rate(&self) -> f64 {
        self.brackets.iter().map(|b| b.rate).fold(0.0, f64::max)
    }
}

/// Total income tax owed on `gross`.
pub fn compute_income_tax(gross: Money, schedule: &IncomeTaxSchedule) -> Result<Money, EconError> {
    schedule.validate()?;
    if !(gross.0 >= 0.0) || !gross.is_finite() {
        return Err(EconError::Domain(format!("gross income must be >= 0, got {gross}")));
    }
    let owed = match schedule.mode {
        ScheduleMode::Flat => gross * schedule.brackets[0].rate,
        ScheduleMode::Progressive => {
            let mut total = 0.0;
            for (i, b) in schedule.brackets.iter().enumerate() {
                if gross <= b.lower_bound {
                    break;
                }
                let upper = schedule
                    .brackets
                    .get(i + 1)
                    .map_or(gross.0, |next| next.lower_bound.0.min(gross.0));
                total += (upper - b.lower_bound.0) * b.rate;
            }
            Money(total)
        }
    };
    Ok(owed)
}

/// Sales tax: a single rate applied on top of every good's price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SalesTaxRate(f64);

impl SalesTaxRate {
    pub fn new(rate: f64) -> Result<Self, EconError> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(EconError::Policy(format!("sales tax rate must be >= 0, got {rate}")));
        }
        Ok(Self(rate))
    }

    pub fn rate(self) -> f64 {
        self.0
    }
}

/// Sales tax the buyer owes on top of `price`.
pub fn compute_sales_tax(price: Money, rate: SalesTaxRate) -> Result<Money, EconError> {
    if !(price.0 >= 0.0) {
        return Err(EconError::Domain(format!("price must be >= 0, got {price}")));
    }
    Ok(price * rate.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PublicGoodsKind {
    /// `k·τ`
    Linear { k: f64 },
    /// `τ·ln(max(τ, 1))`
    CapitalistLog,
    /// `τ·(τ* − ln(max(τ, 1)))`
    Socialist { tau_star: f64 },
    /// Piecewise-linear through `(τ, value)` points, flat beyond the ends.
    CustomTable { points: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PublicGoodsMode {
    /// Each agent values its own contribution.
    Individual,
    /// Aggregate contributions are valued once and shared per capita.
    Pooled,
}

/// How the government turns tax dollars into perceived utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicGoodsFunction {
    #[serde(flatten)]
    pub kind: PublicGoodsKind,
    pub mode: PublicGoodsMode,
}

impl PublicGoodsFunction {
    pub fn linear(k: f64, mode: PublicGoodsMode) -> Self {
        Self { kind: PublicGoodsKind::Linear { k }, mode }
    }

    pub fn validate(&self) -> Result<(), EconError> {
        match &self.kind {
            PublicGoodsKind::Linear { k } if !(*k >= 0.0) => {
                Err(EconError::Policy(format!("linear slope must be >= 0, got {k}")))
            }
            PublicGoodsKind::CustomTable { points } => {
                if points.is_empty() {
                    return Err(EconError::Policy("custom table has no points".into()));
                }
                for w in points.windows(2) {
                    if w[1].0 <= w[0].0 || w[1].1 < w[0].1 {
                        return Err(EconError::Policy(
                            "custom table must be increasing in tau and non-decreasing in value".into(),
                        ));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// One-hot slot used by the state encoder.
    pub fn kind_index(&self) -> usize {
        match self.kind {
            PublicGoodsKind::Linear { .. } => 0,
            PublicGoodsKind::CapitalistLog => 1,
            PublicGoodsKind::Socialist { .. } => 2,
            PublicGoodsKind::CustomTable { .. } => 3,
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            PublicGoodsKind::Linear { k } => {
                format!("every dollar paid in taxes returns public goods you value at ${k:.2}")
            }
            PublicGoodsKind::CapitalistLog => {
                "public goods are worth tau*ln(tau) for tau dollars of taxes paid".to_string()
            }
            PublicGoodsKind::Socialist { tau_star } => format!(
                "public goods are worth tau*({tau_star:.2} - ln(tau)) for tau dollars of taxes paid, favoring small contributors"
            ),
            PublicGoodsKind::CustomTable { .. } => {
                "public goods follow a government-published value table".to_string()
            }
        }
    }
}

/// Utility of `tau` tax dollars under `f`. Negative `tau` is treated as 0.
pub fn public_goods_value(f: &PublicGoodsFunction, tau: Money) -> f64 {
    let tau = tau.0.max(0.0);
    match &f.kind {
        PublicGoodsKind::Linear { k } => k * tau,
        PublicGoodsKind::CapitalistLog => tau * tau.max(1.0).ln(),
        PublicGoodsKind::Socialist { tau_star } => tau * (tau_star - tau.max(1.0).ln()),
        PublicGoodsKind::CustomTable { points } => interpolate(points, tau),
    }
}

/// Perceived value per tax dollar at `tau`; 1 for `tau` = 0 is avoided by
/// evaluating at one dollar instead.
pub fn public_goods_ratio(f: &PublicGoodsFunction, tau: Money) -> f64 {
    let tau = Money(tau.0.max(1.0));
    public_goods_value(f, tau) / tau.0
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let Some(&(x0, y0)) = points.first() else {
        return 0.0;
    };
    if x <= x0 {
        return y0;
    }
    for w in points.windows(2) {
        let ((xa, ya), (xb, yb)) = (w[0], w[1]);
        if x <= xb {
            return ya + (yb - ya) * (x - xa) / (xb - xa);
        }
    }
    points[points.len() - 1].1
}

/// Enforcement: random audits, proportional penalty and a fixed fine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnforcementPolicy {
    pub audit_probability: f64,
    pub penalty_rate: f64,
    pub fixed_fine: Money,
    pub audit_period: u32,
}

impl EnforcementPolicy {
    /// Penalty equal to the evaded amount, no fine, audits every step.
    pub fn validation(audit_probability: f64) -> Self {
        Self { audit_probability, penalty_rate: 1.0, fixed_fine: Money::ZERO, audit_period: 1 }
    }

    pub fn validate(&self) -> Result<(), EconError> {
        if !(0.0..=1.0).contains(&self.audit_probability) {
            return Err(EconError::Policy(format!(
                "audit probability {} outside [0, 1]",
                self.audit_probability
            )));
        }
        if !(self.penalty_rate >= 0.0) {
            return Err(EconError::Policy("penalty rate must be >= 0".into()));
        }
        if !(self.fixed_fine.0 >= 0.0) {
            return Err(EconError::Policy("fixed fine must be >= 0".into()));
        }
        if self.audit_period == 0 {
            return Err(EconError::Policy("audit period must be positive".into()));
        }
        Ok(())
    }
}

/// Penalty for a discovered evasion gap. The evaded taxes themselves are
/// waived, so only the proportional penalty and the fine are charged.
pub fn compute_penalty(evasion_gap: Money, policy: &EnforcementPolicy) -> Result<Money, EconError> {
    if !(evasion_gap.0 >= 0.0) {
        return Err(EconError::Domain(format!("evasion gap must be >= 0, got {evasion_gap}")));
    }
    if evasion_gap.0 == 0.0 {
        return Ok(Money::ZERO);
    }
    Ok(evasion_gap * policy.penalty_rate + policy.fixed_fine)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Good {
    pub id: usize,
    pub name: String,
    pub price: Money,
    /// Relative importance, normalized over the catalog.
    pub weight: f64,
}
