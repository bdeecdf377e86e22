//! Command-line front end: parses arguments, runs an experiment and writes
//! its result files.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use taxsim::experiments::{
    execute, parse_grid, parse_k_range, ExperimentKind, ExperimentSpec, NuVariant, OutputSection, SpecFile,
    ValidationId,
};
use taxsim::export::{create_output_dir, report, summary_json, write_experiment};
use taxsim::llm::{BackendSpec, ComplianceProfile};
use taxsim::{CalibrationData, SimulationConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "taxsim", version, about = "Agent-based tax compliance experiments", arg_required_else_help = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Master seed; every run's seed is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Repetitions per cell.
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Agents per run.
    #[arg(long, global = true)]
    pub population: Option<usize>,
    /// Steps (days) per run.
    #[arg(long, global = true)]
    pub steps: Option<u32>,
    /// `scripted:<profile>` or `remote`.
    #[arg(long, global = true, value_parser = parse_backend)]
    pub backend: Option<BackendSpec>,
    /// Results root; files go to <out>/<experiment>/<timestamp>/.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// TOML spec file with [simulation], [experiment], [backend] and [output].
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rational-agent validation configs I–IV.
    Validate {
        /// Config to run; repeat for several. Default: all four.
        #[arg(long = "config", value_parser = parse_validation)]
        configs: Vec<ValidationId>,
    },
    /// Evasion incidence for one persona archetype.
    Persona {
        #[arg(long, default_value = "law_abiding", value_parser = parse_profile)]
        profile: ComplianceProfile,
    },
    /// Synthetic-message dose response.
    Dose {
        /// Inclusive `lo:hi` range of message counts.
        #[arg(long, default_value = "0:20", value_parser = parse_ks)]
        k: KRange,
    },
    /// Per-income-decile behaviour under one public-goods function.
    Decile {
        /// 0.75tau, 1.25tau, capitalist or socialist.
        #[arg(long, default_value = "0.75tau", value_parser = parse_nu)]
        nu: NuVariant,
    },
    /// ν/τ × audit-probability heatmap.
    Sweep {
        /// Inclusive `start:stop:step` grid of ν(τ)/τ ratios.
        #[arg(long, default_value = "0.5:1.5:0.25", value_parser = parse_f64_grid)]
        nu_grid: Grid,
        /// Inclusive `start:stop:step` grid of audit probabilities.
        #[arg(long, default_value = "0:1:0.25", value_parser = parse_f64_grid)]
        p_grid: Grid,
    },
    /// One configuration (from --spec, or the defaults); also writes each
    /// run's time series and final snapshot.
    Run,
    /// Rebuild summary.json from a results.csv.
    Report {
        results: PathBuf,
        /// Write here instead of stdout.
        #[arg(long)]
        to: Option<PathBuf>,
    },
}

// clap treats `Vec<T>` fields as repeated flags, so a whole range parsed
// from one value needs a wrapper.
#[derive(Debug, Clone)]
pub struct KRange(pub Vec<u32>);

#[derive(Debug, Clone)]
pub struct Grid(pub Vec<f64>);

fn parse_ks(s: &str) -> Result<KRange, String> {
    parse_k_range(s).map(KRange).map_err(|e| e.to_string())
}

fn parse_f64_grid(s: &str) -> Result<Grid, String> {
    parse_grid(s).map(Grid).map_err(|e| e.to_string())
}

fn parse_backend(s: &str) -> Result<BackendSpec, String> {
    s.parse().map_err(|e: taxsim::llm::LlmError| e.to_string())
}

fn parse_validation(s: &str) -> Result<ValidationId, String> {
    s.parse().map_err(|e: taxsim::experiments::ExperimentError| e.to_string())
}

fn parse_profile(s: &str) -> Result<ComplianceProfile, String> {
    s.parse().map_err(|e: taxsim::llm::LlmError| e.to_string())
}

fn parse_nu(s: &str) -> Result<NuVariant, String> {
    s.parse().map_err(|e: taxsim::experiments::ExperimentError| e.to_string())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

type BoxError = Box<dyn std::error::Error + Send + Sync>;

fn run(cli: Cli) -> Result<(), BoxError> {
    let g = cli.global;
    if let Command::Report { results, to } = &cli.command {
        let text = summary_json(&report(results)?)?;
        match to {
            Some(path) => fs::write(path, text)?,
            None => print!("{text}"),
        }
        return Ok(());
    }

    let file = g.spec.as_deref().map(load_spec).transpose()?;
    let (base, file_backend, output) = match &file {
        Some(f) => (f.simulation.clone(), f.backend_spec()?, f.output.clone()),
        None => (SimulationConfig::default(), None, OutputSection::default()),
    };
    let (kind, default_reps) = match cli.command {
        Command::Validate { configs } => {
            let configs = if configs.is_empty() { ValidationId::ALL.to_vec() } else { configs };
            (ExperimentKind::Validation { configs }, 20)
        }
        Command::Persona { profile } => (ExperimentKind::Persona { profile }, 100),
        Command::Dose { k } => (ExperimentKind::DoseResponse { k_values: k.0 }, 30),
        Command::Decile { nu } => (ExperimentKind::Decile { nu }, 10),
        Command::Sweep { nu_grid, p_grid } => (ExperimentKind::Sweep { nu_grid: nu_grid.0, p_grid: p_grid.0 }, 10),
        Command::Run => match &file {
            Some(f) => (f.experiment.kind.clone(), f.experiment.repetitions),
            None => (ExperimentKind::Run, 1),
        },
        Command::Report { .. } => unreachable!("handled above"),
    };
    let is_run = matches!(kind, ExperimentKind::Run);
    let file_experiment = file.as_ref().map(|f| &f.experiment);
    let mut spec = ExperimentSpec::new(
        kind,
        g.reps.or(file_experiment.map(|e| e.repetitions)).unwrap_or(default_reps),
        g.seed.or(file_experiment.map(|e| e.seed)).unwrap_or(0),
    );
    spec.base = base;
    spec.scale.population = g.population.or(file_experiment.and_then(|e| e.population));
    spec.scale.steps = g.steps.or(file_experiment.and_then(|e| e.steps));
    spec.backend = g.backend.or(file_backend);
    if g.seed.is_some_and(|s| s > i64::MAX as u64) {
        return Err("--seed must be at most 9223372036854775807".into());
    }

    let output = OutputSection {
        dir: g.out.map(|p| p.to_string_lossy().into_owned()).unwrap_or(output.dir),
        workers: g.workers.unwrap_or(output.workers).max(1),
    };
    let calibration = CalibrationData::bundled();
    let result = execute(&spec, &calibration, output.workers, is_run)?;
    let timestamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string();
    let dir = create_output_dir(Path::new(&output.dir), spec.kind.name(), &timestamp)?;
    write_experiment(&dir, &result, output)?;
    print_overview(&result.summary);
    println!("results written to {}", dir.display());
    Ok(())
}

fn load_spec(path: &Path) -> Result<SpecFile, BoxError> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(SpecFile::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn print_overview(summary: &taxsim::experiments::Summary) {
    for cell in &summary.cells {
        let stat = |m: &str| cell.metrics.get(m).map(|s| (s.aggregate.mean, s.aggregate.std));
        if let (Some((o, o_sd)), Some((d, d_sd))) = (stat("informal_share"), stat("delta")) {
            println!("{:<14} n={:<5} informal share {o:.4} ± {o_sd:.4}   delta {d:.1} ± {d_sd:.1}", cell.cell, cell.repetitions);
        }
    }
}
