//! Result files: `results.csv`, `summary.json`, `config_echo.toml` and the
//! plot-ready tables, under `<out>/<experiment>/<timestamp>/`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::experiments::{summarize, ExperimentError, ExperimentOutput, OutputSection, ResultRow, SpecFile, Summary};
use crate::metrics::SeriesRow;
use crate::world::WorldSnapshot;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ExportError + '_ {
    move |source| ExportError::Csv { path: path.to_path_buf(), source }
}

/// Creates `<out>/<experiment>/<timestamp>`, appending `-1`, `-2`, … if
/// that directory already exists.
pub fn create_output_dir(out: &Path, experiment: &str, timestamp: &str) -> Result<PathBuf, ExportError> {
    let parent = out.join(experiment);
    fs::create_dir_all(&parent).map_err(io_err(&parent))?;
    let mut dir = parent.join(timestamp);
    let mut n = 0;
    loop {
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                n += 1;
                dir = parent.join(format!("{timestamp}-{n}"));
            }
            Err(e) => return Err(io_err(&dir)(e)),
        }
    }
}

pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["experiment", "cell", "repetition", "metric", "value"]).map_err(csv_err(path))?;
    for r in rows {
        // `{}` on f64 is the shortest text that parses back to the same value.
        w.write_record([&r.experiment, &r.cell, &r.repetition.to_string(), &r.metric, &format!("{}", r.value)])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>, ExportError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err(path))
}

pub fn summary_json(summary: &Summary) -> Result<String, ExportError> {
    Ok(serde_json::to_string_pretty(summary)? + "\n")
}

pub fn write_summary_json(path: &Path, summary: &Summary) -> Result<(), ExportError> {
    fs::write(path, summary_json(summary)?).map_err(io_err(path))
}

/// Re-aggregates a results file into the summary it was written with.
pub fn report(results: &Path) -> Result<Summary, ExportError> {
    Ok(summarize(&read_results_csv(results)?)?)
}

pub fn write_series_csv(path: &Path, series: &[SeriesRow]) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in series {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_snapshot_json(path: &Path, snapshot: &WorldSnapshot) -> Result<(), ExportError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    serde_json::to_writer(&mut w, snapshot)?;
    w.flush().map_err(io_err(path))
}

fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(&r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// One line per sweep cell.
pub fn write_heatmap_csv(path: &Path, summary: &Summary) -> Result<(), ExportError> {
    let rows = summary
        .heatmap()
        .into_iter()
        .map(|(nu, p, d, ad, o)| vec![nu.to_string(), p.to_string(), d.to_string(), ad.to_string(), o.to_string()]);
    write_table(path, &["nu_ratio", "p_audit", "mean_delta", "mean_agent_delta", "mean_informal_share"], rows)
}

pub fn write_curve_csv(path: &Path, summary: &Summary) -> Result<(), ExportError> {
    let rows = summary
        .curve()
        .into_iter()
        .map(|(k, dm, ds, om, os)| vec![k.to_string(), dm.to_string(), ds.to_string(), om.to_string(), os.to_string()]);
    write_table(path, &["k", "mean_delta", "std_delta", "mean_informal_share", "std_informal_share"], rows)
}

pub fn write_histogram_csv(path: &Path, summary: &Summary) -> Result<(), ExportError> {
    let mut rows = Vec::new();
    for c in &summary.cells {
        for &(lo, count) in c.delta_histogram.iter().flatten() {
            rows.push(vec![c.cell.clone(), lo.to_string(), (lo + crate::experiments::DELTA_HISTOGRAM_WIDTH).to_string(), count.to_string()]);
        }
    }
    write_table(path, &["cell", "delta_lo", "delta_hi", "runs"], rows)
}

/// Writes everything an experiment produced into `dir`.
pub fn write_experiment(dir: &Path, output: &ExperimentOutput, settings: OutputSection) -> Result<(), ExportError> {
    write_results_csv(&dir.join("results.csv"), &output.rows)?;
    write_summary_json(&dir.join("summary.json"), &output.summary)?;
    let echo = SpecFile::from_spec(&output.spec, settings).to_toml()?;
    let echo_path = dir.join("config_echo.toml");
    fs::write(&echo_path, echo).map_err(io_err(&echo_path))?;
    match output.summary.experiment.as_str() {
        "sweep" => write_heatmap_csv(&dir.join("heatmap.csv"), &output.summary)?,
        "dose" => write_curve_csv(&dir.join("curve.csv"), &output.summary)?,
        "persona" => write_histogram_csv(&dir.join("histogram.csv"), &output.summary)?,
        _ => {}
    }
    for (cell, rep, run) in &output.runs {
        let stem = format!("{}_rep{rep}", sanitize(cell));
        write_series_csv(&dir.join(format!("{stem}_series.csv")), &run.metrics.series)?;
        write_snapshot_json(&dir.join(format!("{stem}_snapshot.json")), &run.snapshot)?;
    }
    Ok(())
}

fn sanitize(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect()
}
