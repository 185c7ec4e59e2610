//! Atomic file output and run manifests.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use tomtrack::geometry::nifti::file_bytes_for_path;

use crate::error::{CliError, CliResult};

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::data("E_IO", Some(path), e.to_string())
}

/// Writes `bytes` to a temporary file beside `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::Builder::new()
        .prefix(".tomtrack-")
        .tempfile_in(dir)
        .map_err(|e| io_error(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_error(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

/// Writes an encoded NIfTI image, gzipped when `path` ends in `.gz`.
pub fn write_nifti(path: &Path, encoded: tomtrack::Result<Vec<u8>>) -> CliResult<()> {
    let bytes = encoded
        .and_then(|b| file_bytes_for_path(path, &b))
        .map_err(|e| CliError::from_core(e, Some(path)))?;
    write_atomic(path, &bytes)
}

/// Flat `key = value` record of one run. Everything except the timestamp is
/// determined by the inputs and parameters.
#[derive(Debug, Clone)]
pub struct Manifest {
    lines: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self { lines: Vec::new() };
        m.push("command", command);
        m.push("version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.lines.push((key.into(), value.to_string()));
        self
    }

    pub fn input(&mut self, name: &str, path: &Path) -> &mut Self {
        self.push(format!("input.{name}"), path.display())
    }

    pub fn param(&mut self, name: &str, value: impl Display) -> &mut Self {
        self.push(format!("param.{name}"), value)
    }

    pub fn count(&mut self, name: &str, value: impl Display) -> &mut Self {
        self.push(format!("count.{name}"), value)
    }

    pub fn output(&mut self, name: &str, path: &Path) -> &mut Self {
        self.push(format!("output.{name}"), path.display())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.lines {
            s.push_str(&format!("{k} = {v}\n"));
        }
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        s.push_str(&format!("timestamp_unix = {ts}\n"));
        s
    }

    pub fn write_to(&self, path: &Path) -> CliResult<()> {
        write_atomic(path, self.render().as_bytes())
    }

    /// Writes `<output>.manifest.txt` beside `output`.
    pub fn write_beside(&self, output: &Path) -> CliResult<()> {
        self.write_to(&manifest_path(output))
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.txt");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"second");
        let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(leftovers, 1);
    }

    #[test]
    fn manifest_lists_entries_in_order() {
        let mut m = Manifest::new("track");
        m.input("tom", Path::new("t.nii.gz")).param("step_size_vox", 0.7).count("accepted", 3);
        let text = m.render();
        let keys: Vec<&str> = text.lines().map(|l| l.split(" = ").next().unwrap()).collect();
        assert_eq!(
            keys,
            ["command", "version", "input.tom", "param.step_size_vox", "count.accepted", "timestamp_unix"]
        );
        assert_eq!(manifest_path(Path::new("a/b.tck")), PathBuf::from("a/b.tck.manifest.txt"));
    }
}
