//! Trial persistence: one self-describing JSON record per trial written
//! atomically (temp file + rename), a timing sidecar kept out of the
//! deterministic record, in-progress markers for crash recovery, and an
//! append-only index.

use crate::metrics::{TrialResult, TrialTiming};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid sweep specification: {0}")]
    InvalidSpec(String),
    #[error("trial failed: {0}")]
    Trial(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Serde(#[from] serde_json::Error),
}

pub(crate) struct Store {
    root: PathBuf,
    index: Mutex<fs::File>,
}

impl Store {
    pub fn open(root: &Path) -> Result<Store, BenchError> {
        fs::create_dir_all(root.join("trials"))?;
        fs::create_dir_all(root.join("markers"))?;
        let index = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(root.join("index.tsv"))?;
        Ok(Store {
            root: root.to_path_buf(),
            index: Mutex::new(index),
        })
    }

    fn trial_path(&self, id: &str) -> PathBuf {
        self.root.join("trials").join(format!("{id}.json"))
    }

    fn timing_path(&self, id: &str) -> PathBuf {
        self.root.join("trials").join(format!("{id}.timing.json"))
    }

    fn marker_path(&self, id: &str) -> PathBuf {
        self.root.join("markers").join(format!("{id}.attempt"))
    }

    /// A completed record, if one is already persisted.
    pub fn load_trial(&self, id: &str) -> Result<Option<TrialResult>, BenchError> {
        let path = self.trial_path(id);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(path)?;
        Ok(Some(serde_json::from_str(&text)?))
    }

    /// Registers the trial as in progress and returns the attempt number:
    /// 0 for a fresh trial, k when k earlier runs were interrupted.
    pub fn begin_trial(&self, id: &str) -> Result<u64, BenchError> {
        let path = self.marker_path(id);
        let attempt = match fs::read_to_string(&path) {
            Ok(text) => text.trim().parse::<u64>().unwrap_or(0),
            Err(_) => 0,
        };
        fs::write(&path, format!("{}\n", attempt + 1))?;
        Ok(attempt)
    }

    /// Atomically persists the record and its timing sidecar, clears the
    /// marker and appends to the index.
    pub fn finish_trial(
        &self,
        id: &str,
        result: &TrialResult,
        timing: &TrialTiming,
    ) -> Result<(), BenchError> {
        write_atomic(
            &self.trial_path(id),
            &serde_json::to_string_pretty(result)?,
        )?;
        write_atomic(
            &self.timing_path(id),
            &serde_json::to_string_pretty(timing)?,
        )?;
        let _ = fs::remove_file(self.marker_path(id));
        let mut index = self.index.lock().expect("index lock");
        writeln!(index, "{id}\tdone")?;
        Ok(())
    }
}

/// Write-then-rename within the destination directory.
fn write_atomic(path: &Path, contents: &str) -> Result<(), BenchError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// All persisted trial records under a sweep directory, in filename order.
pub fn load_results(root: &Path) -> Result<Vec<TrialResult>, BenchError> {
    let dir = root.join("trials");
    let mut paths: Vec<PathBuf> = Vec::new();
    if dir.exists() {
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if name.ends_with(".json") && !name.ends_with(".timing.json") {
                paths.push(path);
            }
        }
    }
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let text = fs::read_to_string(&path)?;
        out.push(serde_json::from_str(&text)?);
    }
    Ok(out)
}

/// Timing sidecars keyed by trial id.
pub fn load_timings(root: &Path) -> Result<BTreeMap<String, TrialTiming>, BenchError> {
    let dir = root.join("trials");
    let mut out = BTreeMap::new();
    if dir.exists() {
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if let Some(id) = name.strip_suffix(".timing.json") {
                let text = fs::read_to_string(&path)?;
                out.insert(id.to_string(), serde_json::from_str(&text)?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{DerivScore, Method, SimulationOutcome};

    fn dummy_result(id_seed: u64) -> TrialResult {
        TrialResult {
            system: "harmonic".into(),
            method: Method::AutoSindy,
            sigma: 0.01,
            seed: id_seed,
            effective_seed: id_seed,
            test_derivative: DerivScore { r2: 1.0, mse: 0.0 },
            validation_derivative: DerivScore { r2: 1.0, mse: 0.0 },
            simulation: SimulationOutcome::Scored { r2: 1.0, mse: 0.0 },
            canonical_complexity: 3,
            recovery: true,
            equations: vec!["x1".into()],
            library_sizes: vec![1],
            bias_only_variables: vec![],
            config: serde_json::json!({"k": 1}),
            error: None,
        }
    }

    #[test]
    fn roundtrip_and_markers() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert_eq!(store.load_trial("t1").unwrap(), None);
        assert_eq!(store.begin_trial("t1").unwrap(), 0);
        // marker survives a crash: next begin reports attempt 1
        assert_eq!(store.begin_trial("t1").unwrap(), 1);
        let result = dummy_result(32);
        store
            .finish_trial("t1", &result, &TrialTiming::default())
            .unwrap();
        assert_eq!(store.load_trial("t1").unwrap(), Some(result.clone()));
        // marker cleared on completion
        assert_eq!(store.begin_trial("t1").unwrap(), 0);

        let loaded = load_results(dir.path()).unwrap();
        assert_eq!(loaded, vec![result]);
        assert_eq!(load_timings(dir.path()).unwrap().len(), 1);
    }

    #[test]
    fn persisted_bytes_are_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let result = dummy_result(33);
        store
            .finish_trial("t", &result, &TrialTiming::default())
            .unwrap();
        let first = fs::read(dir.path().join("trials/t.json")).unwrap();
        store
            .finish_trial("t", &result, &TrialTiming::default())
            .unwrap();
        let second = fs::read(dir.path().join("trials/t.json")).unwrap();
        assert_eq!(first, second);
    }
}
