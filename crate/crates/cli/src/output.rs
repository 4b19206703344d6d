//! Artifact writing: one `# {json}` metadata line followed by a CSV body.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use carleman_core::grad_dns::FlowField;
use carleman_core::io::SnapshotWriter;
use carleman_core::lbm_ref::Populations;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const OUT_DIR_ENV: &str = "CARLEMAN_HYDRO_OUT_DIR";

pub enum Body {
    Table {
        columns: Vec<String>,
        rows: Vec<Vec<String>>,
    },
    Flow {
        dt: f64,
        frames: Vec<(usize, FlowField)>,
    },
    Lattice {
        frames: Vec<(usize, Populations)>,
    },
}

pub struct Report {
    /// Derived quantities echoed into the metadata line.
    pub annotations: Map<String, Value>,
    pub body: Body,
}

impl Report {
    pub fn table(columns: Vec<String>, rows: Vec<Vec<String>>) -> Self {
        Report {
            annotations: Map::new(),
            body: Body::Table { columns, rows },
        }
    }

    pub fn annotate(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.annotations.insert(key.to_string(), value.into());
        self
    }
}

/// Shortest round-trip form; scientific notation outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Applies the output-directory override to a user path.
pub fn resolve_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Destination of the main artifact: the configured path, else
/// `<experiment>.csv` in the override directory, else stdout.
pub fn destination(config: &ExperimentConfig) -> Option<PathBuf> {
    match config.output() {
        Some(p) => Some(resolve_path(p)),
        None => std::env::var_os(OUT_DIR_ENV)
            .map(|d| Path::new(&d).join(format!("{}.csv", config.kind()))),
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = config.to_json().to_string();
    format!("{:x}", Sha256::digest(canonical.as_bytes()))
}

pub fn metadata(config: &ExperimentConfig, annotations: &Map<String, Value>) -> Value {
    let mut meta = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": config.to_json(),
        "config_sha256": config_hash(config),
    });
    if !annotations.is_empty() {
        meta["results"] = Value::Object(annotations.clone());
    }
    meta
}

pub fn write_report<W: Write>(
    config: &ExperimentConfig,
    report: &Report,
    mut w: W,
) -> Result<(), CliError> {
    writeln!(w, "# {}", metadata(config, &report.annotations))?;
    match &report.body {
        Body::Table { columns, rows } => {
            let mut csv = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(&mut w);
            csv.write_record(columns)?;
            for row in rows {
                csv.write_record(row)?;
            }
            csv.flush()?;
        }
        Body::Flow { dt, frames } => {
            let mut s = SnapshotWriter::new(&mut w)?;
            for (step, f) in frames {
                s.write_flow(*step, *step as f64 * dt, f)?;
            }
            s.finish()?;
        }
        Body::Lattice { frames } => {
            let mut s = SnapshotWriter::new(&mut w)?;
            for (step, f) in frames {
                s.write_populations(*step, *step as f64, f)?;
            }
            s.finish()?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn emit(config: &ExperimentConfig, report: &Report) -> Result<(), CliError> {
    match destination(config) {
        Some(path) => write_report(config, report, create(&path)?),
        None => write_report(config, report, io::stdout().lock()),
    }
}
