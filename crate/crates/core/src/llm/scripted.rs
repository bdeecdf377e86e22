//! Deterministic stand-ins for the language-model stage.
//!
//! Persona profiles decide once per session whether the agent will ever
//! evade and from which step on; afterwards every suggestion is a uniform
//! fraction of the owed amount. Every call consumes the same random draws
//! regardless of outcome, so sessions that share a seed stay aligned across
//! experiment cells.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BackendSession, DecisionBackend, DecisionContext, LlmError, LlmSuggestion};
use crate::econ::public_goods_ratio;
use crate::money::Money;

/// Evading suggestions pay a uniform fraction of owed in `[0, MAX_EVASION_FRACTION)`.
const MAX_EVASION_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ComplianceProfile {
    LawAbiding,
    Random,
    LawBreaking,
    HalfPay,
    NeverPay,
    FullPay,
    /// `k` synthetic evasion messages prepended to the persona.
    DoseResponse { k: u32 },
    /// Weighs the perceived return on taxes against expected enforcement.
    RiskSensitive,
}

impl ComplianceProfile {
    /// Per-session probability of ever evading, and the onset step range.
    fn persona_calibration(self) -> Option<(f64, u32, u32)> {
        match self {
            ComplianceProfile::LawAbiding => Some((0.009, 120, 365)),
            ComplianceProfile::Random => Some((0.033, 1, 365)),
            ComplianceProfile::LawBreaking => Some((0.984, 1, 250)),
            _ => None,
        }
    }
}

/// Logistic in `k`: 3.3% at k = 0, 98% at k = 20.
pub fn dose_response_probability(k: u32) -> f64 {
    1.0 / (1.0 + (-(-3.378 + 0.3635 * f64::from(k))).exp())
}

impl fmt::Display for ComplianceProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComplianceProfile::LawAbiding => f.write_str("law_abiding"),
            ComplianceProfile::Random => f.write_str("random"),
            ComplianceProfile::LawBreaking => f.write_str("law_breaking"),
            ComplianceProfile::HalfPay => f.write_str("half_pay"),
            ComplianceProfile::NeverPay => f.write_str("never_pay"),
            ComplianceProfile::FullPay => f.write_str("full_pay"),
            ComplianceProfile::DoseResponse { k } => write!(f, "dose_response({k})"),
            ComplianceProfile::RiskSensitive => f.write_str("risk_sensitive"),
        }
    }
}

impl FromStr for ComplianceProfile {
    type Err = LlmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Ok(match s {
            "law_abiding" => ComplianceProfile::LawAbiding,
            "random" => ComplianceProfile::Random,
            "law_breaking" => ComplianceProfile::LawBreaking,
            "half_pay" => ComplianceProfile::HalfPay,
            "never_pay" => ComplianceProfile::NeverPay,
            "full_pay" => ComplianceProfile::FullPay,
            "risk_sensitive" => ComplianceProfile::RiskSensitive,
            _ => {
                let k = s
                    .strip_prefix("dose_response(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|k| k.trim().parse().ok())
                    .ok_or_else(|| LlmError::Config(format!("unknown scripted profile {s:?}")))?;
                ComplianceProfile::DoseResponse { k }
            }
        })
    }
}

impl TryFrom<String> for ComplianceProfile {
    type Error = LlmError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ComplianceProfile> for String {
    fn from(p: ComplianceProfile) -> String {
        p.to_string()
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    profile: ComplianceProfile,
}

impl ScriptedBackend {
    pub fn new(profile: ComplianceProfile) -> Self {
        Self { profile }
    }

    pub fn session(&self, seed: u64) -> ScriptedSession {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u_evade: f64 = rng.random();
        let u_onset: f64 = rng.random();
        let u_disposition: f64 = rng.random();

        // More synthetic messages: more likely, earlier and deeper evasion.
        let (will_evade, onset, depth) = match self.profile {
            ComplianceProfile::DoseResponse { k } => {
                let p = dose_response_probability(k);
                let window = 365.0 * (1.0 - 0.75 * p);
                (u_evade < p, 1 + (u_onset * window).floor() as u32, 1.0 - p)
            }
            profile => match profile.persona_calibration() {
                Some((p, lo, hi)) => (u_evade < p, lo + (u_onset * f64::from(hi - lo)).floor() as u32, 1.0),
                None => (false, u32::MAX, 1.0),
            },
        };
        let disposition = [1.0, 0.5, 0.0][((u_disposition * 3.0) as usize).min(2)];
        ScriptedSession { profile: self.profile, rng, will_evade, onset, depth, disposition }
    }
}

impl DecisionBackend for ScriptedBackend {
    fn id(&self) -> String {
        format!("scripted:{}", self.profile)
    }

    fn open_session(&self, _agent_id: usize, seed: u64) -> Box<dyn BackendSession> {
        Box::new(self.session(seed))
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedSession {
    profile: ComplianceProfile,
    rng: ChaCha8Rng,
    will_evade: bool,
    onset: u32,
    /// Scales the fraction paid while evading.
    depth: f64,
    /// Pay fraction used by the risk-sensitive profile when indifferent.
    disposition: f64,
}

impl ScriptedSession {
    pub fn will_evade(&self) -> bool {
        self.will_evade
    }

    pub fn onset(&self) -> u32 {
        self.onset
    }

    fn amount(&mut self, ctx: &DecisionContext) -> Money {
        let owed = ctx.owed;
        let u: f64 = self.rng.random();
        match self.profile {
            ComplianceProfile::FullPay => owed,
            ComplianceProfile::NeverPay => Money::ZERO,
            ComplianceProfile::HalfPay => owed / 2.0,
            ComplianceProfile::RiskSensitive => {
                let p = &ctx.policies;
                let e = &p.enforcement;
                let annual = ctx.agent.annual_income.0.max(1.0);
                let advantage = (1.0 - public_goods_ratio(&p.public_goods, owed))
                    - e.audit_probability * (e.penalty_rate + e.fixed_fine.0 / annual);
                if advantage.abs() <= 1e-9 {
                    owed * self.disposition
                } else if u < (2.0 * advantage).clamp(0.0, 1.0) {
                    Money::ZERO
                } else {
                    owed
                }
            }
            _ => {
                if self.will_evade && ctx.step >= self.onset {
                    owed * (u * MAX_EVASION_FRACTION * self.depth)
                } else {
                    owed
                }
            }
        }
    }
}

impl BackendSession for ScriptedSession {
    fn suggest(&mut self, ctx: &DecisionContext) -> Result<LlmSuggestion, LlmError> {
        let amount = self.amount(ctx).round_cents().clamp(Money::ZERO, ctx.owed);
        Ok(LlmSuggestion {
            amount,
            raw_text: amount.to_string(),
            latency_ms: 0,
            backend_id: format!("scripted:{}", self.profile),
        })
    }
}
