use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
/// Wall-clock times live apart from the manifest so that the manifest of a
/// rerun is byte-identical.
pub const TIMINGS_FILE: &str = "timings.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub stages: Vec<String>,
    pub timings_file: String,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// A run directory that records everything written into it.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
    timings: Vec<StageTiming>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> CliResult<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self {
            root,
            files: Vec::new(),
            timings: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes a CSV with `header` and one record per row.
    pub fn write_csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> CliResult<PathBuf>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::io(self.path(name), e.into());
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(&row).map_err(csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::io(self.path(name), e.into_error()))?;
        self.write_bytes(name, &bytes)
    }

    /// Runs `f` and records its wall-clock time under `stage`.
    pub fn stage<T>(
        &mut self,
        stage: &str,
        f: impl FnOnce(&mut Self) -> CliResult<T>,
    ) -> CliResult<T> {
        let start = Instant::now();
        let out = f(self)?;
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    /// Writes the timings file and the manifest, which lists every other
    /// file in write order.
    pub fn finish(mut self, command: &str, config_hash: &str) -> CliResult<RunManifest> {
        let timings = self.timings.clone();
        let path = self.path(TIMINGS_FILE);
        let mut text = serde_json::to_string_pretty(&timings).expect("serializable");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        let manifest = RunManifest {
            tool: "cdme".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config_hash.into(),
            stages: timings.iter().map(|t| t.stage.clone()).collect(),
            timings_file: TIMINGS_FILE.into(),
            files: std::mem::take(&mut self.files),
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("serializable");
        text.push('\n');
        let path = self.path(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

/// Shortest round-trip form; scientific notation outside `[1e-5, 1e16)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_files_with_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path().join("run")).unwrap();
        out.stage("write", |o| {
            o.write_csv("a.csv", &["t", "v"], vec![vec![num(0.5), num(1e-20)]])?;
            o.write_json("b.json", &serde_json::json!({"k": 1}))
        })
        .unwrap();
        let m = out.finish("test", "abc").unwrap();
        assert_eq!(m.files.len(), 2);
        assert_eq!(m.stages, vec!["write"]);
        let text = fs::read_to_string(dir.path().join("run/a.csv")).unwrap();
        assert_eq!(text, "t,v\n0.5,1e-20\n");
        assert_eq!(
            m.files[0].sha256,
            hex::encode(Sha256::digest(text.as_bytes()))
        );
        assert!(dir.path().join("run/manifest.json").exists());
        assert!(dir.path().join("run/timings.json").exists());
    }

    proptest::proptest! {
        #[test]
        fn num_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            proptest::prop_assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
