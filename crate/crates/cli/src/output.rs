//! Result files: per-trial JSON lines, a CSV summary and a manifest.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::experiment::Outcome;

pub const SCHEMA_VERSION: u32 = 1;

/// Version string in `git describe` style.
pub fn version() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    version: String,
    config: &'a ExperimentConfig,
    wall_time_secs: f64,
    files: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Row<'a> {
    experiment: &'a str,
    trials: u64,
    metric: &'a str,
    value: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Written {
    pub records: PathBuf,
    pub summary: PathBuf,
    pub manifest: PathBuf,
}

/// Writes `<name>.jsonl`, `<name>.csv` and `<name>.manifest.json` into the
/// output directory. Only the manifest depends on `wall_time_secs`.
pub fn write_outcome(cfg: &ExperimentConfig, out: &Outcome, wall_time_secs: f64) -> Result<Written> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = cfg.experiment.name();
    let written = Written {
        records: dir.join(format!("{name}.jsonl")),
        summary: dir.join(format!("{name}.csv")),
        manifest: dir.join(format!("{name}.manifest.json")),
    };

    let file = fs::File::create(&written.records).map_err(|e| CliError::io(&written.records, e))?;
    let mut w = BufWriter::new(file);
    for r in &out.records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| CliError::io(&written.records, e))?;
    }
    w.flush().map_err(|e| CliError::io(&written.records, e))?;

    let mut csv = csv::Writer::from_path(&written.summary)?;
    for m in &out.summary.metrics {
        csv.serialize(Row { experiment: name, trials: out.summary.trials, metric: &m.metric, value: m.value })?;
    }
    csv.flush().map_err(|e| CliError::io(&written.summary, e))?;

    let file_name = |p: &Path| p.file_name().unwrap().to_string_lossy().into_owned();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        version: version(),
        config: cfg,
        wall_time_secs,
        files: vec![file_name(&written.records), file_name(&written.summary)],
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&written.manifest, text + "\n").map_err(|e| CliError::io(&written.manifest, e))?;
    Ok(written)
}
