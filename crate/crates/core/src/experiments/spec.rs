//! Experiment definitions and the TOML spec file.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::calibration::CalibrationData;
use crate::econ::{compute_income_tax, EnforcementPolicy, PublicGoodsFunction, PublicGoodsKind, PublicGoodsMode};
use crate::llm::{BackendSpec, ComplianceProfile, RemoteConfig};
use crate::world::SimulationConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValidationId {
    I,
    II,
    III,
    IV,
}

impl ValidationId {
    pub const ALL: [ValidationId; 4] = [ValidationId::I, ValidationId::II, ValidationId::III, ValidationId::IV];

    /// `(k, P(ξ))` with ν(τ) = k·τ.
    pub fn parameters(self) -> (f64, f64) {
        match self {
            ValidationId::I => (2.0, 0.0),
            ValidationId::II => (1.0, 1.0),
            ValidationId::III => (1.0, 0.0),
            ValidationId::IV => (0.0, 1.0),
        }
    }

    /// Informal share a rational agent should settle on (0.5 stands for
    /// "any of 0, 0.5, 1").
    pub fn expected_share(self) -> f64 {
        match self {
            ValidationId::I | ValidationId::II => 0.0,
            ValidationId::III | ValidationId::IV => 0.5,
        }
    }

    pub fn default_profile(self) -> ComplianceProfile {
        match self {
            ValidationId::I | ValidationId::II => ComplianceProfile::FullPay,
            ValidationId::III | ValidationId::IV => ComplianceProfile::RiskSensitive,
        }
    }
}

impl fmt::Display for ValidationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for ValidationId {
    type Err = ExperimentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(ValidationId::I),
            "II" | "2" => Ok(ValidationId::II),
            "III" | "3" => Ok(ValidationId::III),
            "IV" | "4" => Ok(ValidationId::IV),
            _ => Err(ExperimentError::Spec(format!("unknown validation config {s:?}; expected I, II, III or IV"))),
        }
    }
}

/// Public-goods variants of the decile analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NuVariant {
    #[serde(rename = "0.75tau")]
    Inefficient,
    #[serde(rename = "1.25tau")]
    Efficient,
    #[serde(rename = "capitalist")]
    Capitalist,
    #[serde(rename = "socialist")]
    Socialist,
}

impl NuVariant {
    pub const ALL: [NuVariant; 4] = [NuVariant::Inefficient, NuVariant::Efficient, NuVariant::Capitalist, NuVariant::Socialist];

    pub fn name(self) -> &'static str {
        match self {
            NuVariant::Inefficient => "0.75tau",
            NuVariant::Efficient => "1.25tau",
            NuVariant::Capitalist => "capitalist",
            NuVariant::Socialist => "socialist",
        }
    }

    pub fn function(self, calibration: &CalibrationData) -> Result<PublicGoodsFunction, ExperimentError> {
        let kind = match self {
            NuVariant::Inefficient => PublicGoodsKind::Linear { k: 0.75 },
            NuVariant::Efficient => PublicGoodsKind::Linear { k: 1.25 },
            NuVariant::Capitalist => PublicGoodsKind::CapitalistLog,
            NuVariant::Socialist => PublicGoodsKind::Socialist { tau_star: socialist_tau_star(calibration)? },
        };
        Ok(PublicGoodsFunction { kind, mode: PublicGoodsMode::Pooled })
    }
}

impl FromStr for NuVariant {
    type Err = ExperimentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NuVariant::ALL
            .into_iter()
            .find(|v| v.name() == s.trim())
            .ok_or_else(|| ExperimentError::Spec(format!("unknown nu variant {s:?}; expected 0.75tau, 1.25tau, capitalist or socialist")))
    }
}

/// τ* for the socialist function: the log of what a top-decile earner pays
/// per salary period in income tax plus sales tax on spending all of the
/// net income. Taking the log keeps ν(τ)/τ = τ* − ln τ on the same scale as
/// the linear variants.
pub fn socialist_tau_star(calibration: &CalibrationData) -> Result<f64, ExperimentError> {
    let top = *calibration.income_deciles.last().ok_or_else(|| ExperimentError::Spec("no deciles".into()))?;
    let tax = compute_income_tax(top, &calibration.tax_schedule)?;
    let per_period = (tax + (top - tax) * calibration.sales_rate.rate()) / 12.0;
    Ok(per_period.0.max(1.0).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentKind {
    Validation { configs: Vec<ValidationId> },
    Persona { profile: ComplianceProfile },
    DoseResponse { k_values: Vec<u32> },
    Decile { nu: NuVariant },
    Sweep { nu_grid: Vec<f64>, p_grid: Vec<f64> },
    /// A single configuration taken verbatim from `[simulation]`.
    Run,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Validation { .. } => "validation",
            ExperimentKind::Persona { .. } => "persona",
            ExperimentKind::DoseResponse { .. } => "dose",
            ExperimentKind::Decile { .. } => "decile",
            ExperimentKind::Sweep { .. } => "sweep",
            ExperimentKind::Run => "run",
        }
    }

    /// Dose and sweep cells share random streams across cells so that
    /// differences between cells come from the treatment alone.
    pub fn common_random_numbers(&self) -> bool {
        matches!(self, ExperimentKind::DoseResponse { .. } | ExperimentKind::Sweep { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scale {
    pub population: Option<usize>,
    pub steps: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub repetitions: usize,
    pub master_seed: u64,
    /// Settings every cell starts from.
    pub base: SimulationConfig,
    pub scale: Scale,
    /// Replaces the experiment's default backend in every cell.
    pub backend: Option<BackendSpec>,
}

/// One cell of an experiment: a label and the configuration its
/// repetitions run (seed filled in per repetition).
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub label: String,
    pub config: SimulationConfig,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, repetitions: usize, master_seed: u64) -> Self {
        Self { kind, repetitions, master_seed, base: SimulationConfig::default(), scale: Scale::default(), backend: None }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Spec(m.to_string()));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        match &self.kind {
            ExperimentKind::Validation { configs } if configs.is_empty() => bad("no validation configs"),
            ExperimentKind::Validation { .. } if self.scale.population.is_some_and(|n| n != 1) => {
                bad("validation configs use a single agent")
            }
            ExperimentKind::Persona { profile }
                if !matches!(
                    profile,
                    ComplianceProfile::LawAbiding | ComplianceProfile::Random | ComplianceProfile::LawBreaking
                ) =>
            {
                bad("persona profile must be law_abiding, random or law_breaking")
            }
            ExperimentKind::DoseResponse { k_values } if k_values.is_empty() => bad("empty k range"),
            ExperimentKind::Sweep { nu_grid, p_grid } => {
                if nu_grid.is_empty() || p_grid.is_empty() {
                    return bad("sweep grids must be non-empty");
                }
                if !is_sorted(nu_grid) || !is_sorted(p_grid) {
                    return bad("sweep grids must be sorted ascending");
                }
                if nu_grid.iter().any(|&v| v < 0.0) || p_grid.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return bad("nu ratios must be >= 0 and audit probabilities in [0, 1]");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Expands the spec into cells, in output order.
    pub fn cells(&self, calibration: &CalibrationData) -> Result<Vec<Cell>, ExperimentError> {
        self.validate()?;
        let defaults = calibration.enforcement_defaults;
        let mut base = self.base.clone();
        if let Some(n) = self.scale.population {
            base.population = n;
        }
        if let Some(t) = self.scale.steps {
            base.steps = t;
        }
        let individual = |k: f64| PublicGoodsFunction::linear(k, PublicGoodsMode::Individual);
        // Personality studies: no audits, ν(τ) = τ, no exploration.
        let persona_base = |persona: &str| SimulationConfig {
            population: self.scale.population.unwrap_or(1),
            public_goods: individual(1.0),
            enforcement: Some(EnforcementPolicy { audit_probability: 0.0, ..defaults }),
            risk_range: (0.0, 0.0),
            persona: persona.to_string(),
            dqn: crate::dqn::DqnConfig { epsilon_min: 0.0, ..base.dqn.clone() },
            ..base.clone()
        };

        let mut cells: Vec<(String, SimulationConfig, ComplianceProfile)> = Vec::new();
        match &self.kind {
            ExperimentKind::Validation { configs } => {
                for &id in configs {
                    let (k, p) = id.parameters();
                    let config = SimulationConfig {
                        population: 1,
                        public_goods: individual(k),
                        enforcement: Some(EnforcementPolicy::validation(p)),
                        risk_range: (0.0, 0.0),
                        cognition_range: (0.99, 0.99),
                        horizon_range: (365, 365),
                        ..base.clone()
                    };
                    cells.push((id.to_string(), config, id.default_profile()));
                }
            }
            ExperimentKind::Persona { profile } => {
                cells.push((profile.to_string(), persona_base(&profile.to_string()), *profile));
            }
            ExperimentKind::DoseResponse { k_values } => {
                for &k in k_values {
                    let config = SimulationConfig { synthetic_messages: k, ..persona_base("random") };
                    cells.push((format!("k={k}"), config, ComplianceProfile::DoseResponse { k }));
                }
            }
            ExperimentKind::Decile { nu } => {
                let config = SimulationConfig {
                    public_goods: nu.function(calibration)?,
                    enforcement: Some(EnforcementPolicy { audit_probability: 0.1, ..defaults }),
                    ..base.clone()
                };
                cells.push((nu.name().to_string(), config, ComplianceProfile::RiskSensitive));
            }
            ExperimentKind::Sweep { nu_grid, p_grid } => {
                for &k in nu_grid {
                    for &p in p_grid {
                        let config = SimulationConfig {
                            public_goods: PublicGoodsFunction::linear(k, PublicGoodsMode::Pooled),
                            enforcement: Some(EnforcementPolicy { audit_probability: p, ..defaults }),
                            ..base.clone()
                        };
                        cells.push((sweep_label(k, p), config, ComplianceProfile::RiskSensitive));
                    }
                }
            }
            ExperimentKind::Run => {
                let profile = match &base.decision_backend {
                    BackendSpec::ScriptedPersona { profile } => *profile,
                    BackendSpec::RemoteChat(_) => ComplianceProfile::FullPay,
                };
                cells.push(("run".into(), base.clone(), profile));
            }
        }

        Ok(cells
            .into_iter()
            .map(|(label, mut config, profile)| {
                config.decision_backend = match (&self.backend, &self.kind) {
                    (Some(b), _) => b.clone(),
                    (None, ExperimentKind::Run) => config.decision_backend,
                    (None, _) => BackendSpec::scripted(profile),
                };
                Cell { label, config }
            })
            .collect())
    }
}

pub fn sweep_label(nu_ratio: f64, p: f64) -> String {
    format!("nu={nu_ratio};p={p}")
}

/// Inverse of [`sweep_label`].
pub fn parse_sweep_label(label: &str) -> Option<(f64, f64)> {
    let (nu, p) = label.strip_prefix("nu=")?.split_once(";p=")?;
    Some((nu.parse().ok()?, p.parse().ok()?))
}

fn is_sorted(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] <= w[1])
}

/// Inclusive `start:stop:step` grid, e.g. `0.5:1.5:0.25`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, ExperimentError> {
    let bad = || ExperimentError::Spec(format!("grid {text:?} is not start:stop:step"));
    let parts: Vec<f64> = text.split(':').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0) || stop < start {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    // Round to 1e-9 so 0.1-style steps print cleanly.
    Ok((0..count).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect())
}

/// Inclusive integer range `lo:hi` or a single value.
pub fn parse_k_range(text: &str) -> Result<Vec<u32>, ExperimentError> {
    let bad = || ExperimentError::Spec(format!("k range {text:?} is not lo:hi"));
    match text.split_once(':') {
        Some((lo, hi)) => {
            let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
            let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
            if hi < lo {
                return Err(bad());
            }
            Ok((lo..=hi).collect())
        }
        None => Ok(vec![text.trim().parse().map_err(|_| bad())?]),
    }
}

/// The on-disk spec file: `[simulation]`, `[experiment]`, `[backend]`,
/// `[output]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecFile {
    #[serde(default)]
    pub simulation: SimulationConfig,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSection {
    #[serde(flatten)]
    pub kind: ExperimentKind,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub population: Option<usize>,
    #[serde(default)]
    pub steps: Option<u32>,
}

fn default_repetitions() -> usize {
    10
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendSection {
    /// `scripted:<profile>` or `remote`.
    pub spec: Option<String>,
    /// Remote settings; endpoint, model and key fall back to the environment.
    pub remote: Option<RemoteConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub dir: String,
    pub workers: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "results".into(), workers: 1 }
    }
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Spec(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, ExperimentError> {
        toml::to_string(self).map_err(|e| ExperimentError::Spec(e.to_string()))
    }

    pub fn backend_spec(&self) -> Result<Option<BackendSpec>, ExperimentError> {
        let from_env = |e: crate::llm::LlmError| ExperimentError::Spec(e.to_string());
        match (&self.backend.spec, &self.backend.remote) {
            (Some(s), None) => Ok(Some(s.parse().map_err(from_env)?)),
            (Some(s), Some(remote)) if s == "remote" => Ok(Some(BackendSpec::RemoteChat(with_env(remote.clone())))),
            (None, Some(remote)) => Ok(Some(BackendSpec::RemoteChat(with_env(remote.clone())))),
            (Some(s), Some(_)) => Err(ExperimentError::Spec(format!("[backend.remote] given but spec is {s:?}"))),
            (None, None) => Ok(None),
        }
    }

    pub fn experiment_spec(&self) -> Result<ExperimentSpec, ExperimentError> {
        Ok(ExperimentSpec {
            kind: self.experiment.kind.clone(),
            repetitions: self.experiment.repetitions,
            master_seed: self.experiment.seed,
            base: self.simulation.clone(),
            scale: Scale { population: self.experiment.population, steps: self.experiment.steps },
            backend: self.backend_spec()?,
        })
    }

    pub fn from_spec(spec: &ExperimentSpec, output: OutputSection) -> Self {
        let backend = match &spec.backend {
            Some(BackendSpec::RemoteChat(remote)) => {
                BackendSection { spec: Some("remote".into()), remote: Some(remote.clone()) }
            }
            Some(b) => BackendSection { spec: Some(b.to_string()), remote: None },
            None => BackendSection::default(),
        };
        SpecFile {
            simulation: spec.base.clone(),
            experiment: ExperimentSection {
                kind: spec.kind.clone(),
                repetitions: spec.repetitions,
                seed: spec.master_seed,
                population: spec.scale.population,
                steps: spec.scale.steps,
            },
            backend,
            output,
        }
    }
}

fn with_env(mut remote: RemoteConfig) -> RemoteConfig {
    use crate::llm::{ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL};
    if remote.endpoint.is_empty() {
        remote.endpoint = std::env::var(ENV_ENDPOINT).unwrap_or_default();
    }
    if remote.model.is_empty() {
        remote.model = std::env::var(ENV_MODEL).unwrap_or_default();
    }
    if remote.api_key.is_none() {
        remote.api_key = std::env::var(ENV_API_KEY).ok();
    }
    remote
}
