//! Cell execution, per-run records and summaries.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{parse_sweep_label, ExperimentKind, ExperimentSpec, NuVariant, ValidationId};
use super::stats::{aggregate, mann_whitney_u, spearman, Aggregate, MannWhitney};
use super::ExperimentError;
use crate::calibration::CalibrationData;
use crate::llm::{BackendSpec, ComplianceProfile, DecisionBackend};
use crate::metrics::RunMetrics;
use crate::seed::{hash64, label64};
use crate::world::{run_with, RunResult};

/// Bucket width (steps) of the persona δ histogram.
pub const DELTA_HISTOGRAM_WIDTH: u32 = 50;

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub cell: String,
    pub repetition: usize,
    pub metric: String,
    pub value: f64,
}

pub struct ExperimentOutput {
    pub spec: ExperimentSpec,
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
    /// Full run results in (cell, repetition) order; only kept on request.
    pub runs: Vec<(String, usize, RunResult)>,
}

/// Seed of one repetition. With common random numbers every cell reuses
/// the same seeds, so cells differ only by their treatment.
pub fn cell_seed(spec: &ExperimentSpec, cell_index: usize, repetition: usize) -> u64 {
    let cell_key = if spec.kind.common_random_numbers() { 0 } else { cell_index as u64 };
    hash64(&[spec.master_seed, label64(spec.kind.name()), cell_key, repetition as u64])
}

/// Runs every cell of `spec` on up to `workers` threads. Results are
/// collected in (cell, repetition) order whatever the scheduling.
pub fn execute(
    spec: &ExperimentSpec,
    calibration: &CalibrationData,
    workers: usize,
    keep_runs: bool,
) -> Result<ExperimentOutput, ExperimentError> {
    let cells = spec.cells(calibration)?;
    let steps = cells.first().map_or(0, |c| c.config.steps);

    // One backend per distinct spec, shared by all runs that use it.
    let mut backends: Vec<(BackendSpec, Arc<dyn DecisionBackend>)> = Vec::new();
    for cell in &cells {
        if !backends.iter().any(|(b, _)| *b == cell.config.decision_backend) {
            let built = cell.config.decision_backend.build().map_err(|e| ExperimentError::Spec(e.to_string()))?;
            backends.push((cell.config.decision_backend.clone(), built));
        }
    }
    let backend_for = |b: &BackendSpec| backends.iter().find(|(s, _)| s == b).map(|(_, x)| x.clone()).expect("built");

    let jobs: Vec<(usize, usize)> =
        (0..cells.len()).flat_map(|c| (0..spec.repetitions).map(move |r| (c, r))).collect();
    let run_one = |&(c, r): &(usize, usize)| {
        let cell = &cells[c];
        let mut config = cell.config.clone();
        config.seed = cell_seed(spec, c, r);
        let backend = backend_for(&config.decision_backend);
        run_with(config, calibration, backend.as_ref())
            .map_err(|source| ExperimentError::Run { cell: cell.label.clone(), repetition: r, source })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let results: Vec<RunResult> = pool.install(|| jobs.par_iter().map(run_one).collect::<Result<_, _>>())?;

    let experiment = spec.kind.name();
    let decile = matches!(spec.kind, ExperimentKind::Decile { .. });
    let mut rows = Vec::new();
    for (&(c, r), result) in jobs.iter().zip(&results) {
        for (metric, value) in run_metrics(&result.metrics, steps, decile) {
            rows.push(ResultRow { experiment: experiment.into(), cell: cells[c].label.clone(), repetition: r, metric, value });
        }
    }
    let summary = summarize(&rows)?;
    let runs = if keep_runs {
        jobs.iter().zip(results).map(|(&(c, r), res)| (cells[c].label.clone(), r, res)).collect()
    } else {
        Vec::new()
    };
    Ok(ExperimentOutput { spec: spec.clone(), rows, summary, runs })
}

/// Scalar metrics of one run. δ is censored at `steps` when nobody evaded.
fn run_metrics(m: &RunMetrics, steps: u32, per_decile: bool) -> Vec<(String, f64)> {
    let censor = |d: Option<u32>| f64::from(d.unwrap_or(steps));
    let mut out = vec![
        ("informal_share".to_string(), m.informal_share),
        ("delta".to_string(), censor(m.delta)),
        ("delta_censored".to_string(), if m.delta.is_none() { 1.0 } else { 0.0 }),
        ("evaded".to_string(), if m.delta.is_some() { 1.0 } else { 0.0 }),
        ("agent_delta".to_string(), mean_agent_delta(m, steps)),
        ("welfare".to_string(), m.welfare),
        ("audits".to_string(), m.audits as f64),
        ("penalties".to_string(), m.penalties.0),
        ("negative_balance_agents".to_string(), m.negative_balance_agents as f64),
    ];
    if per_decile {
        for d in 1..=10u8 {
            let agents: Vec<_> = m.per_agent.iter().filter(|a| a.decile == d).collect();
            if agents.is_empty() {
                continue;
            }
            let n = agents.len() as f64;
            let mean = |f: &dyn Fn(&&crate::metrics::AgentMetrics) -> f64| agents.iter().map(f).sum::<f64>() / n;
            out.push((format!("informal_share_d{d}"), mean(&|a| a.informal_share)));
            out.push((format!("delta_d{d}"), mean(&|a| censor(a.delta))));
            out.push((format!("evaded_d{d}"), mean(&|a| if a.delta.is_some() { 1.0 } else { 0.0 })));
        }
    }
    out
}

/// Mean over agents of each agent's first evasion step, censored at `steps`.
fn mean_agent_delta(m: &RunMetrics, steps: u32) -> f64 {
    if m.per_agent.is_empty() {
        return f64::from(steps);
    }
    m.per_agent.iter().map(|a| f64::from(a.delta.unwrap_or(steps))).sum::<f64>() / m.per_agent.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    #[serde(flatten)]
    pub aggregate: Aggregate,
    /// For `delta`: runs in which nobody evaded (their δ is reported as T).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub censored: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: String,
    pub repetitions: usize,
    pub metrics: BTreeMap<String, MetricSummary>,
    /// Validation cells: the informal share a rational agent settles on.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub expected_share: Option<f64>,
    /// Validation cells: run shares against a sample fixed at the expected value.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub test_vs_expected: Option<MannWhitney>,
    /// Persona cells: counts of evading runs by δ bucket `[lo, lo + width)`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta_histogram: Option<Vec<(u32, usize)>>,
}

/// Mann-Whitney test of `informal_share` between two cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub test: MannWhitney,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub cells: Vec<CellSummary>,
    #[serde(default)]
    pub comparisons: Vec<Comparison>,
    /// Named rank correlations (dose: mean Ō and δ against k).
    #[serde(default)]
    pub trends: BTreeMap<String, f64>,
}

/// Rebuilds the summary from long-format rows. Cells keep their order of
/// first appearance; values within a cell are aggregated by repetition.
pub fn summarize(rows: &[ResultRow]) -> Result<Summary, ExperimentError> {
    let experiment = rows.first().map(|r| r.experiment.clone()).ok_or_else(|| ExperimentError::Spec("no result rows".into()))?;
    let mut order: Vec<String> = Vec::new();
    let mut by_cell: BTreeMap<&str, BTreeMap<&str, BTreeMap<usize, f64>>> = BTreeMap::new();
    for r in rows {
        if r.experiment != experiment {
            return Err(ExperimentError::Spec(format!("mixed experiments {experiment:?} and {:?}", r.experiment)));
        }
        if !by_cell.contains_key(r.cell.as_str()) {
            order.push(r.cell.clone());
        }
        by_cell.entry(&r.cell).or_default().entry(&r.metric).or_default().insert(r.repetition, r.value);
    }
    let values = |cell: &str, metric: &str| -> Vec<f64> {
        by_cell.get(cell).and_then(|m| m.get(metric)).map(|v| v.values().copied().collect()).unwrap_or_default()
    };

    let mut cells = Vec::with_capacity(order.len());
    for cell in &order {
        let mut metrics = BTreeMap::new();
        let mut repetitions = 0;
        for (metric, reps) in &by_cell[cell.as_str()] {
            let v: Vec<f64> = reps.values().copied().collect();
            repetitions = repetitions.max(v.len());
            let censored = (*metric == "delta")
                .then(|| values(cell, "delta_censored").iter().filter(|&&c| c > 0.5).count());
            metrics.insert(metric.to_string(), MetricSummary { aggregate: aggregate(&v)?, censored });
        }
        let mut summary = CellSummary {
            cell: cell.clone(),
            repetitions,
            metrics,
            expected_share: None,
            test_vs_expected: None,
            delta_histogram: None,
        };
        match experiment.as_str() {
            "validation" => {
                if let Ok(id) = cell.parse::<ValidationId>() {
                    let shares = values(cell, "informal_share");
                    let expected = id.expected_share();
                    summary.expected_share = Some(expected);
                    summary.test_vs_expected = Some(mann_whitney_u(&shares, &vec![expected; shares.len()])?);
                }
            }
            "persona" => {
                let deltas = values(cell, "delta");
                let evaded = values(cell, "evaded");
                let mut hist: BTreeMap<u32, usize> = BTreeMap::new();
                for (d, e) in deltas.iter().zip(&evaded) {
                    if *e > 0.5 {
                        *hist.entry(*d as u32 / DELTA_HISTOGRAM_WIDTH * DELTA_HISTOGRAM_WIDTH).or_default() += 1;
                    }
                }
                summary.delta_histogram = Some(hist.into_iter().collect());
            }
            _ => {}
        }
        cells.push(summary);
    }

    let mut comparisons = Vec::new();
    if experiment == "validation" {
        for (a, b) in [("I", "II"), ("III", "IV")] {
            if by_cell.contains_key(a) && by_cell.contains_key(b) {
                let test = mann_whitney_u(&values(a, "informal_share"), &values(b, "informal_share"))?;
                comparisons.push(Comparison { a: a.into(), b: b.into(), test });
            }
        }
    }

    let mut trends = BTreeMap::new();
    if experiment == "dose" {
        let ks: Vec<f64> = order.iter().filter_map(|c| c.strip_prefix("k=")?.parse().ok()).collect();
        if ks.len() == order.len() && ks.len() > 1 {
            let mean_of = |m: &str| -> Vec<f64> { cells.iter().map(|c| c.metrics.get(m).map_or(0.0, |s| s.aggregate.mean)).collect() };
            trends.insert("spearman_k_informal_share".into(), spearman(&ks, &mean_of("informal_share"))?);
            trends.insert("spearman_k_delta".into(), spearman(&ks, &mean_of("delta"))?);
        }
    }
    Ok(Summary { experiment, cells, comparisons, trends })
}

impl Summary {
    pub fn cell(&self, label: &str) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.cell == label)
    }

    pub fn mean(&self, cell: &str, metric: &str) -> Option<f64> {
        Some(self.cell(cell)?.metrics.get(metric)?.aggregate.mean)
    }

    /// Sweep cells as `(ν/τ, P, mean δ, mean per-agent δ, mean Ō)` rows.
    pub fn heatmap(&self) -> Vec<(f64, f64, f64, f64, f64)> {
        self.cells
            .iter()
            .filter_map(|c| {
                let (nu, p) = parse_sweep_label(&c.cell)?;
                let mean = |m| self.mean(&c.cell, m);
                Some((nu, p, mean("delta")?, mean("agent_delta")?, mean("informal_share")?))
            })
            .collect()
    }

    /// Dose cells as `(k, mean δ, std δ, mean Ō, std Ō)` rows.
    pub fn curve(&self) -> Vec<(u32, f64, f64, f64, f64)> {
        self.cells
            .iter()
            .filter_map(|c| {
                let k = c.cell.strip_prefix("k=")?.parse().ok()?;
                let d = &c.metrics.get("delta")?.aggregate;
                let o = &c.metrics.get("informal_share")?.aggregate;
                Some((k, d.mean, d.std, o.mean, o.std))
            })
            .collect()
    }
}

fn with_backend(mut spec: ExperimentSpec, backend: Option<BackendSpec>) -> ExperimentSpec {
    spec.backend = backend;
    spec
}

/// Validation configs with the default stub backends (or `backend`).
pub fn run_validation(
    configs: &[ValidationId],
    repetitions: usize,
    seed: u64,
    backend: Option<BackendSpec>,
    workers: usize,
) -> Result<ExperimentOutput, ExperimentError> {
    let spec = ExperimentSpec::new(ExperimentKind::Validation { configs: configs.to_vec() }, repetitions, seed);
    execute(&with_backend(spec, backend), &CalibrationData::bundled(), workers, false)
}

pub fn run_persona_experiment(
    profile: ComplianceProfile,
    repetitions: usize,
    seed: u64,
    workers: usize,
) -> Result<ExperimentOutput, ExperimentError> {
    let spec = ExperimentSpec::new(ExperimentKind::Persona { profile }, repetitions, seed);
    execute(&spec, &CalibrationData::bundled(), workers, false)
}

pub fn run_dose_response(
    k_values: &[u32],
    repetitions: usize,
    seed: u64,
    workers: usize,
) -> Result<ExperimentOutput, ExperimentError> {
    let spec = ExperimentSpec::new(ExperimentKind::DoseResponse { k_values: k_values.to_vec() }, repetitions, seed);
    execute(&spec, &CalibrationData::bundled(), workers, false)
}

pub fn run_decile_analysis(
    nu: NuVariant,
    population: usize,
    steps: u32,
    repetitions: usize,
    seed: u64,
    workers: usize,
) -> Result<ExperimentOutput, ExperimentError> {
    let mut spec = ExperimentSpec::new(ExperimentKind::Decile { nu }, repetitions, seed);
    spec.scale.population = Some(population);
    spec.scale.steps = Some(steps);
    execute(&spec, &CalibrationData::bundled(), workers, false)
}

pub fn run_sweep(
    nu_grid: &[f64],
    p_grid: &[f64],
    repetitions: usize,
    seed: u64,
    workers: usize,
) -> Result<ExperimentOutput, ExperimentError> {
    let kind = ExperimentKind::Sweep { nu_grid: nu_grid.to_vec(), p_grid: p_grid.to_vec() };
    execute(&ExperimentSpec::new(kind, repetitions, seed), &CalibrationData::bundled(), workers, false)
}
