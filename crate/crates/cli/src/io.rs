//! Records CSV, report JSON and atomic file output.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use statematch::analysis::{FitResult, MetricReport};
use statematch::engine::ExperimentRecord;

pub const RECORDS_HEADER: [&str; 9] = [
    "device",
    "qubits",
    "n",
    "epsilon",
    "theta0",
    "phi0",
    "run",
    "shots",
    "success_count",
];

pub const SCHEMA_VERSION: u32 = 1;

/// Shortest decimal form of `x` rounded to 12 significant digits.
pub fn sig12(x: f64) -> String {
    let rounded: f64 = format!("{x:.11e}").parse().expect("float formatting");
    format!("{rounded}")
}

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| anyhow!("writing {}: {}", path.display(), e.error))?;
    Ok(())
}

pub fn records_to_csv(records: &[ExperimentRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORDS_HEADER)?;
    for r in records {
        let qubits: Vec<String> = r.qubit_set.iter().map(|q| q.to_string()).collect();
        w.write_record([
            r.device_label.clone(),
            qubits.join("-"),
            r.n_iterations.to_string(),
            sig12(r.epsilon),
            sig12(r.theta0),
            sig12(r.phi0),
            r.run_index.to_string(),
            r.shots.to_string(),
            r.success_count.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| anyhow!("{}", e.error()))
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, k: usize, line: u64) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = row.get(k).unwrap_or("");
    raw.trim()
        .parse()
        .map_err(|e| anyhow!("line {line}: column '{}': cannot parse '{raw}': {e}", RECORDS_HEADER[k]))
}

pub fn records_from_csv<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut rows = rdr.records();
    let header = rows
        .next()
        .ok_or_else(|| anyhow!("line 1: empty file, expected header"))??;
    if header.iter().map(str::trim).ne(RECORDS_HEADER) {
        bail!(
            "line 1: header must be '{}', got '{}'",
            RECORDS_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        );
    }
    let mut out = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != RECORDS_HEADER.len() {
            bail!("line {line}: expected {} columns, got {}", RECORDS_HEADER.len(), row.len());
        }
        let qubit_set = row[1]
            .trim()
            .split('-')
            .map(|q| q.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| anyhow!("line {line}: column 'qubits': expected dash-joined indices, got '{}'", &row[1]))?;
        let rec = ExperimentRecord {
            device_label: row[0].trim().to_string(),
            qubit_set,
            n_iterations: field(&row, 2, line)?,
            epsilon: field(&row, 3, line)?,
            theta0: field(&row, 4, line)?,
            phi0: field(&row, 5, line)?,
            run_index: field(&row, 6, line)?,
            shots: field(&row, 7, line)?,
            success_count: field(&row, 8, line)?,
        };
        rec.validate().map_err(|e| anyhow!("line {line}: {e}"))?;
        out.push(rec);
    }
    if out.is_empty() {
        bail!("no data rows after the header");
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    records_from_csv(file).with_context(|| format!("in {}", path.display()))
}

/// Records sharing a device label and iteration count.
pub fn group_records(records: Vec<ExperimentRecord>) -> BTreeMap<(String, u32), Vec<ExperimentRecord>> {
    let mut groups: BTreeMap<(String, u32), Vec<ExperimentRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.device_label.clone(), r.n_iterations))
            .or_default()
            .push(r);
    }
    groups
}

/// Provenance attached to every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub inputs: Vec<PathBuf>,
    pub config: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub manifest: Manifest,
    pub metrics: Vec<MetricReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitResult>,
}

impl Report {
    pub fn new(manifest: Manifest, metrics: Vec<MetricReport>, fit: Option<FitResult>) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            manifest,
            metrics,
            fit,
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut v = serde_json::to_vec_pretty(self)?;
        v.push(b'\n');
        Ok(v)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let r: Report = serde_json::from_slice(bytes)?;
        if r.schema_version != SCHEMA_VERSION {
            bail!("unsupported report schema_version {}", r.schema_version);
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(phi0: f64, run: u32, k: u64) -> ExperimentRecord {
        ExperimentRecord {
            device_label: "sim".into(),
            qubit_set: vec![0, 1],
            n_iterations: 1,
            epsilon: 0.973,
            theta0: 0.39,
            phi0,
            run_index: run,
            shots: 2000,
            success_count: k,
        }
    }

    #[test]
    fn twelve_digits() {
        assert_eq!(sig12(std::f64::consts::PI), "3.14159265359");
        assert_eq!(sig12(0.973), "0.973");
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(-1.25e-7), "-0.000000125");
    }

    #[test]
    fn csv_round_trip_is_byte_stable() {
        let rs = vec![rec(0.1, 0, 1750), rec(1.0 / 3.0, 1, 1760)];
        let text = records_to_csv(&rs).unwrap();
        assert!(text.starts_with(b"device,qubits,n,epsilon,theta0,phi0,run,shots,success_count\n"));
        let back = records_from_csv(&text[..]).unwrap();
        assert_eq!(records_to_csv(&back).unwrap(), text);
        assert_eq!(back[0], rs[0]);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let bad = "device,qubits,n,epsilon,theta0,phi0,run,shots,success_count\n\
                   sim,0-1,1,0.973,0.39,0.1,0,2000,1750\n\
                   sim,0-1,1,0.973,0.39,0.2,0,2000,x\n";
        let e = records_from_csv(bad.as_bytes()).unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("success_count"), "{e}");
        let over = "device,qubits,n,epsilon,theta0,phi0,run,shots,success_count\n\
                    sim,0-1,1,0.973,0.39,0.1,0,20,21\n";
        assert!(records_from_csv(over.as_bytes()).unwrap_err().to_string().contains("line 2"));
        assert!(records_from_csv("a,b\n".as_bytes()).is_err());
        assert!(records_from_csv("".as_bytes()).is_err());
    }
}
