//! On-disk formats: snapshot directories, ground truth, ledgers, checkpoints.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use eog_core::controller::{Checkpoint, LedgerEntry};
use eog_core::evidence::{Alert, K8sEvent, LogChunk, MetricSeries, SpecChange};
use eog_core::graph::TopologyFile;
use eog_core::sim::{GroundTruth, Scenario};
use eog_core::{OperationalGraph, Snapshot};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOPOLOGY_FILE: &str = "topology.json";
pub const ALERTS_FILE: &str = "alerts.json";
pub const EVENTS_FILE: &str = "events.json";
pub const SPEC_CHANGES_FILE: &str = "spec_changes.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const LOGS_FILE: &str = "logs.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

pub const SNAPSHOT_FILES: [&str; 6] = [
    TOPOLOGY_FILE,
    ALERTS_FILE,
    EVENTS_FILE,
    SPEC_CHANGES_FILE,
    METRICS_FILE,
    LOGS_FILE,
];

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{}: {err}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        err: std::io::Error,
    },
    #[error("{}: {err}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        err: serde_json::Error,
    },
    #[error("{}:{line}: {err}", path.display())]
    JsonLine {
        path: PathBuf,
        line: usize,
        #[source]
        err: serde_json::Error,
    },
    #[error("{}: {msg}", path.display())]
    Invalid { path: PathBuf, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FileError + '_ {
    move |err| FileError::Io {
        path: path.to_path_buf(),
        err,
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FileError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|err| FileError::Json {
        path: path.to_path_buf(),
        err,
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), FileError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|err| FileError::Json {
        path: path.to_path_buf(),
        err,
    })?;
    text.push('\n');
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

fn read_optional<T: DeserializeOwned + Default>(path: &Path) -> Result<T, FileError> {
    if path.exists() {
        read_json(path)
    } else {
        Ok(T::default())
    }
}

/// Loads a snapshot directory. Only `topology.json` is required; missing
/// evidence files count as empty.
pub fn load_snapshot(dir: &Path) -> Result<Snapshot, FileError> {
    let topo_path = dir.join(TOPOLOGY_FILE);
    let topo: TopologyFile = read_json(&topo_path)?;
    let topology = OperationalGraph::try_from(topo).map_err(|e| FileError::Invalid {
        path: topo_path,
        msg: e.to_string(),
    })?;
    let snapshot = Snapshot {
        topology,
        alerts: read_optional::<Vec<Alert>>(&dir.join(ALERTS_FILE))?,
        events: read_optional::<Vec<K8sEvent>>(&dir.join(EVENTS_FILE))?,
        spec_changes: read_optional::<Vec<SpecChange>>(&dir.join(SPEC_CHANGES_FILE))?,
        metrics: read_optional::<Vec<MetricSeries>>(&dir.join(METRICS_FILE))?,
        logs: read_optional::<Vec<LogChunk>>(&dir.join(LOGS_FILE))?,
    };
    snapshot.validate().map_err(|e| FileError::Invalid {
        path: dir.to_path_buf(),
        msg: e.to_string(),
    })?;
    Ok(snapshot)
}

pub fn write_snapshot(dir: &Path, s: &Snapshot) -> Result<(), FileError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_json(&dir.join(TOPOLOGY_FILE), &TopologyFile::from(s.topology.clone()))?;
    write_json(&dir.join(ALERTS_FILE), &s.alerts)?;
    write_json(&dir.join(EVENTS_FILE), &s.events)?;
    write_json(&dir.join(SPEC_CHANGES_FILE), &s.spec_changes)?;
    write_json(&dir.join(METRICS_FILE), &s.metrics)?;
    write_json(&dir.join(LOGS_FILE), &s.logs)
}

/// Snapshot files plus `ground_truth.json`.
pub fn write_scenario(dir: &Path, s: &Scenario) -> Result<(), FileError> {
    write_snapshot(dir, &s.snapshot)?;
    write_json(&dir.join(GROUND_TRUTH_FILE), &s.ground_truth)
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruth, FileError> {
    read_json(path)
}

/// One entry per line.
pub fn write_ledger(path: &Path, entries: &[LedgerEntry]) -> Result<(), FileError> {
    let mut out = Vec::new();
    for e in entries {
        serde_json::to_writer(&mut out, e).map_err(|err| FileError::Json {
            path: path.to_path_buf(),
            err,
        })?;
        out.push(b'\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(io_err(path))
}

/// Reads a JSON Lines ledger, skipping blank lines.
pub fn read_ledger(path: &Path) -> Result<Vec<LedgerEntry>, FileError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|err| FileError::JsonLine {
            path: path.to_path_buf(),
            line: i + 1,
            err,
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

pub fn save_checkpoint(path: &Path, cp: &Checkpoint) -> Result<(), FileError> {
    write_json(path, cp)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, FileError> {
    read_json(path)
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), FileError> {
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            out.push(path.strip_prefix(root).unwrap_or(&path).to_path_buf());
        }
    }
    Ok(())
}

/// SHA-256 over every file under `dir`: sorted relative paths, each followed
/// by its length and contents.
pub fn manifest_hash(dir: &Path) -> Result<String, FileError> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for rel in files {
        let bytes = fs::read(dir.join(&rel)).map_err(io_err(&rel))?;
        let name = rel.to_string_lossy().replace('\\', "/");
        h.update(name.as_bytes());
        h.update([0]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use eog_core::controller::{run, BudgetConfig};
    use eog_core::policy::{OracleConfig, OraclePolicy};
    use eog_core::sim::flash_sale;

    #[test]
    fn flash_sale_round_trips_field_by_field() {
        let dir = tempfile::tempdir().unwrap();
        let s = flash_sale();
        write_scenario(dir.path(), &s).unwrap();
        let mut names: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        assert_eq!(names.len(), 7);
        let back = load_snapshot(dir.path()).unwrap();
        assert_eq!(back.topology, s.snapshot.topology);
        assert_eq!(back.alerts, s.snapshot.alerts);
        assert_eq!(back.events, s.snapshot.events);
        assert_eq!(back.spec_changes, s.snapshot.spec_changes);
        assert_eq!(back.metrics, s.snapshot.metrics);
        assert_eq!(back.logs, s.snapshot.logs);
        assert_eq!(back.topology.nodes().len(), 4);
        assert_eq!(load_ground_truth(&dir.path().join(GROUND_TRUTH_FILE)).unwrap(), s.ground_truth);
    }

    #[test]
    fn missing_evidence_files_are_empty() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join(TOPOLOGY_FILE),
            r#"{"nodes":["otel-demo/Deployment/a"]}"#,
        )
        .unwrap();
        let s = load_snapshot(dir.path()).unwrap();
        assert!(s.alerts.is_empty() && s.logs.is_empty());
        fs::remove_file(dir.path().join(TOPOLOGY_FILE)).unwrap();
        assert!(matches!(load_snapshot(dir.path()), Err(FileError::Io { .. })));
    }

    #[test]
    fn dangling_topology_edge_is_invalid() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join(TOPOLOGY_FILE),
            r#"{"nodes":["a/B/c"],"edges":[{"src":"a/B/c","dst":"a/B/d","kind":"dependency"}]}"#,
        )
        .unwrap();
        assert!(matches!(load_snapshot(dir.path()), Err(FileError::Invalid { .. })));
    }

    #[test]
    fn ledger_jsonl_round_trip() {
        let s = flash_sale();
        let r = run(&s.snapshot, None, &mut OraclePolicy::new(OracleConfig::default()), BudgetConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        write_ledger(&path, &r.ledger).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), r.ledger.len());
        assert_eq!(read_ledger(&path).unwrap(), r.ledger);
        fs::write(&path, "{\"step\":1}\n").unwrap();
        assert!(matches!(read_ledger(&path), Err(FileError::JsonLine { line: 1, .. })));
    }

    #[test]
    fn manifest_hash_is_stable_and_content_sensitive() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_scenario(a.path(), &flash_sale()).unwrap();
        write_scenario(b.path(), &flash_sale()).unwrap();
        let ha = manifest_hash(a.path()).unwrap();
        assert_eq!(ha, manifest_hash(b.path()).unwrap());
        fs::write(b.path().join(ALERTS_FILE), "[]\n").unwrap();
        assert_ne!(ha, manifest_hash(b.path()).unwrap());
    }
}
