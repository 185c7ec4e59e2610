//! `--config` support: a flat `key = value` file whose entries are spliced in
//! as `--key value` flags right after the subcommand name, ahead of the
//! user's own flags, so that flags given on the command line win.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult, EXIT_USAGE};

/// Global options that take a value, needed to find the subcommand name.
const VALUE_OPTIONS: [&str; 2] = ["--config", "--threads"];

/// Parses config text into `(key, value)` pairs. Keys may use `_` or `-`.
pub fn parse_config(text: &str, path: &Path) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| CliError {
            code: "E_CONFIG",
            path: Some(path.to_path_buf()),
            message: format!("line {}: {msg}", no + 1),
            exit: EXIT_USAGE,
        };
        let (key, value) = line.split_once('=').ok_or_else(|| bad("expected `key = value`"))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key.starts_with('-') {
            return Err(bad("empty or malformed key"));
        }
        if key == "config" {
            return Err(bad("config files cannot include other config files"));
        }
        let value = value.trim();
        let value = value
            .strip_prefix('"')
            .and_then(|v| v.strip_suffix('"'))
            .unwrap_or(value);
        out.push((key, value.to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

fn subcommand_position(args: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if VALUE_OPTIONS.contains(&s.as_ref()) {
            i += 2;
            continue;
        }
        if !s.starts_with('-') {
            return Some(i);
        }
        i += 1;
    }
    None
}

/// Returns `raw` with the config file's entries spliced in.
pub fn expand_args(raw: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = config_path(&raw) else {
        return Ok(raw);
    };
    let Some(pos) = subcommand_position(&raw) else {
        return Ok(raw);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| {
        let code = if e.kind() == std::io::ErrorKind::NotFound { "E_MISSING_FILE" } else { "E_IO" };
        CliError::data(code, Some(&path), e.to_string())
    })?;
    let mut injected = Vec::new();
    for (key, value) in parse_config(&text, &path)? {
        match value.as_str() {
            "true" => injected.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => {
                injected.push(OsString::from(format!("--{key}")));
                injected.push(OsString::from(value));
            }
        }
    }
    let mut out = raw;
    out.splice(pos + 1..pos + 1, injected);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_comments_quotes_and_underscores() {
        let text = "# tracking\nstep_size = 0.5\n\nout = \"a b.tck\"\nno-smooth = true\n";
        let kv = parse_config(text, Path::new("c.cfg")).unwrap();
        assert_eq!(
            kv,
            vec![
                ("step-size".to_string(), "0.5".to_string()),
                ("out".to_string(), "a b.tck".to_string()),
                ("no-smooth".to_string(), "true".to_string()),
            ]
        );
    }

    #[test]
    fn reports_line_numbers() {
        let e = parse_config("a = 1\nbroken\n", Path::new("c.cfg")).unwrap_err();
        assert_eq!(e.code, "E_CONFIG");
        assert!(e.message.contains("line 2"));
    }

    #[test]
    fn finds_subcommand_after_global_values() {
        let a = os(&["tomtrack", "--threads", "2", "--config", "x", "track", "--out", "o"]);
        assert_eq!(subcommand_position(&a), Some(5));
        assert_eq!(config_path(&a), Some(PathBuf::from("x")));
        assert_eq!(config_path(&os(&["t", "track", "--config=y"])), Some(PathBuf::from("y")));
    }

    #[test]
    fn injects_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "seed = 7\nno_smooth = true\nflag = false\n").unwrap();
        let raw = os(&["tomtrack", "track", "--config", cfg.to_str().unwrap(), "--seed", "9"]);
        let got = expand_args(raw).unwrap();
        let got: Vec<String> = got.iter().map(|s| s.to_string_lossy().into_owned()).collect();
        assert_eq!(&got[..5], &["tomtrack", "track", "--seed", "7", "--no-smooth"]);
        assert_eq!(&got[got.len() - 2..], &["--seed", "9"]);
    }
}
