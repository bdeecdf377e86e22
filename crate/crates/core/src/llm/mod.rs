//! Suggestion stage: renders the decision prompt, queries a backend and
//! parses a single suggested tax amount.

mod parse;
mod prompt;
mod remote;
mod scripted;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::econ::{EnforcementPolicy, IncomeTaxSchedule, PublicGoodsFunction, SalesTaxRate};
use crate::money::Money;

pub use parse::parse_amount;
pub use prompt::{build_messages, build_prompt, Prompt, CLOSING_QUESTION, SYNTHETIC_EVASION_MESSAGE};
pub use remote::{RemoteBackend, RemoteConfig, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL};
pub use scripted::{dose_response_probability, ComplianceProfile, ScriptedBackend};

/// Persona snippets shown in the prompt.
pub const PERSONA_WINDOW: usize = 20;
/// Past (decision, reward) outcome lines shown in the prompt.
pub const OUTCOME_WINDOW: usize = 20;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("cannot parse an amount from {0:?}")]
    Parse(String),
    #[error("backend failed after {attempts} attempt(s): {message}")]
    Backend { attempts: u32, message: String },
    #[error("backend configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    IncomeTax,
    SalesTax,
}

impl DecisionKind {
    pub fn index(self) -> usize {
        match self {
            DecisionKind::IncomeTax => 0,
            DecisionKind::SalesTax => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DecisionKind::IncomeTax => "income",
            DecisionKind::SalesTax => "sales",
        }
    }
}

/// The four government policies as seen by every agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySnapshot {
    pub sales_tax: SalesTaxRate,
    pub income_tax: IncomeTaxSchedule,
    pub public_goods: PublicGoodsFunction,
    pub enforcement: EnforcementPolicy,
}

/// The agent's own economic state at decision time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub id: usize,
    pub balance: Money,
    pub salary: Money,
    pub salary_period: u32,
    pub annual_income: Money,
    pub decile: u8,
    pub risk: f64,
    pub horizon: u32,
    pub cognition: f64,
}

#[derive(Debug, Clone)]
pub struct DecisionContext {
    pub step: u32,
    pub agent: AgentSnapshot,
    /// Most recent first.
    pub persona: Arc<[String]>,
    pub policies: Arc<PolicySnapshot>,
    /// Transaction history, newest first.
    pub history: Vec<String>,
    /// Past decisions and their rewards, newest first.
    pub outcomes: Vec<String>,
    pub owed: Money,
    pub kind: DecisionKind,
    pub cumulative_gap: Money,
    pub steps_since_audit: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmSuggestion {
    pub amount: Money,
    pub raw_text: String,
    pub latency_ms: u64,
    pub backend_id: String,
}

/// A per-agent, per-run conversation with a backend. Calls within one
/// session are sequential.
pub trait BackendSession: Send {
    fn suggest(&mut self, ctx: &DecisionContext) -> Result<LlmSuggestion, LlmError>;
}

/// A source of sessions, shared across runs.
pub trait DecisionBackend: Send + Sync {
    fn id(&self) -> String;
    fn open_session(&self, agent_id: usize, seed: u64) -> Box<dyn BackendSession>;
}

/// Queries the session and clamps the amount to `[0, owed]`.
pub fn suggest(session: &mut dyn BackendSession, ctx: &DecisionContext) -> Result<LlmSuggestion, LlmError> {
    let mut s = session.suggest(ctx)?;
    s.amount = s.amount.clamp(Money::ZERO, ctx.owed);
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    ScriptedPersona { profile: ComplianceProfile },
    RemoteChat(RemoteConfig),
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec::ScriptedPersona { profile: ComplianceProfile::FullPay }
    }
}

impl BackendSpec {
    pub fn scripted(profile: ComplianceProfile) -> Self {
        BackendSpec::ScriptedPersona { profile }
    }

    pub fn build(&self) -> Result<Arc<dyn DecisionBackend>, LlmError> {
        match self {
            BackendSpec::ScriptedPersona { profile } => Ok(Arc::new(ScriptedBackend::new(*profile))),
            BackendSpec::RemoteChat(config) => Ok(Arc::new(RemoteBackend::new(config.clone())?)),
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::ScriptedPersona { profile } => write!(f, "scripted:{profile}"),
            BackendSpec::RemoteChat(_) => f.write_str("remote"),
        }
    }
}

/// `scripted:<profile>` or `remote` (configured from the environment).
impl FromStr for BackendSpec {
    type Err = LlmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(profile) = s.strip_prefix("scripted:") {
            return Ok(BackendSpec::scripted(profile.parse()?));
        }
        if s == "remote" {
            return Ok(BackendSpec::RemoteChat(RemoteConfig::from_env()?));
        }
        Err(LlmError::Config(format!("unknown backend {s:?}; expected scripted:<profile> or remote")))
    }
}
