//! Human-readable formatting, output sinks and run manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Result;
use omitbias::Error;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// `x` at four significant digits.
pub fn sig4(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&magnitude) {
        return format!("{x:.3e}");
    }
    let decimals = (3 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Left-aligned text table with a header row.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Hash of the resolved inputs of a run, over their compact JSON form.
pub fn digest_of(value: &Value) -> String {
    sha256_hex(value.to_string().as_bytes())
}

/// Sidecar written next to every output file.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub scenario_digest: String,
    pub output_sha256: String,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub version: String,
    pub started_unix: f64,
    pub elapsed_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// What a command produced, plus the manifest fields it knows about.
pub struct Emitted {
    pub body: String,
    pub scenario: Value,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub details: Option<Value>,
}

pub struct RunClock {
    started: SystemTime,
    timer: Instant,
}

impl RunClock {
    pub fn start() -> Self {
        RunClock {
            started: SystemTime::now(),
            timer: Instant::now(),
        }
    }
}

/// Prints to stdout, or writes `out` and its manifest.
pub fn deliver(command: &str, emitted: &Emitted, out: Option<&Path>, clock: &RunClock) -> Result<()> {
    let Some(path) = out else {
        print!("{}", emitted.body);
        return Ok(());
    };
    write_file(path, &emitted.body)?;
    let manifest = RunManifest {
        command: command.to_string(),
        arguments: std::env::args().skip(1).collect(),
        scenario_digest: digest_of(&emitted.scenario),
        output_sha256: sha256_hex(emitted.body.as_bytes()),
        seed: emitted.seed,
        n: emitted.n,
        version: omitbias::VERSION.to_string(),
        started_unix: clock
            .started
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0),
        elapsed_seconds: clock.timer.elapsed().as_secs_f64(),
        details: emitted.details.clone(),
    };
    let mpath = manifest_path(path);
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    write_file(&mpath, &text)?;
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|source| Error::Io {
        context: format!("writing {}", path.display()),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_significant_digits() {
        assert_eq!(sig4(0.44633), "0.4463");
        assert_eq!(sig4(1.3371), "1.337");
        assert_eq!(sig4(-2.3108), "-2.311");
        assert_eq!(sig4(123.456), "123.5");
        assert_eq!(sig4(4321.0), "4321");
        assert_eq!(sig4(0.0), "0");
        assert_eq!(sig4(1.5e-7), "1.500e-7");
    }

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(
            manifest_path(Path::new("/tmp/t1.csv")),
            PathBuf::from("/tmp/t1.csv.manifest.json")
        );
    }
}
