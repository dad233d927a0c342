use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use metastab::DriftSpec;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub tol_root: f64,
    pub tol_deriv: f64,
    pub tol_level: f64,
}

/// Reproducibility block written at the top of every report.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: String,
    pub command: String,
    pub drift_sha256: String,
    pub drift: DriftSpec,
    pub epsilon: Vec<f64>,
    pub v_cut: Option<f64>,
    pub seed: Option<u64>,
    pub tolerances: Tolerances,
}

/// SHA-256 of the compact JSON form of the spec.
pub fn spec_hash(spec: &DriftSpec) -> String {
    let text = serde_json::to_string(spec).expect("drift spec serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl Header {
    fn lines(&self) -> Vec<String> {
        let t = &self.tolerances;
        let mut out = vec![
            format!("tool: {}", self.tool),
            format!("command: {}", self.command),
            format!("drift_sha256: {}", self.drift_sha256),
            format!("drift: {}", serde_json::to_string(&self.drift).expect("drift spec serializes")),
            format!("epsilon: {:?}", self.epsilon),
        ];
        if let Some(v) = self.v_cut {
            out.push(format!("v_cut: {v}"));
        }
        if let Some(s) = self.seed {
            out.push(format!("seed: {s}"));
        }
        out.push(format!("tolerances: root={:e} deriv={:e} level={:e}", t.tol_root, t.tol_deriv, t.tol_level));
        out
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// CSV with the header block as `#` comment lines above the column row.
pub fn write_csv<R: Serialize>(path: &Path, header: &Header, rows: &[R]) -> Result<(), CliError> {
    let mut file = create(path)?;
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    for line in header.lines() {
        writeln!(file, "# {line}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(io)
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    header: &'a Header,
    report: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, header: &Header, report: &T) -> Result<(), CliError> {
    let mut file = create(path)?;
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    serde_json::to_writer_pretty(&mut file, &Envelope { header, report }).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(file).map_err(io)?;
    file.flush().map_err(io)
}
