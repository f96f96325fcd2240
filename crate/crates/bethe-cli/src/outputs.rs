//! CSV and manifest emission. Fixed column orders per subcommand,
//! RFC-4180-style quoting, `.` decimal separator, 17-significant-digit
//! floats, temp-file plus atomic rename so no partial outputs survive.

use crate::config::RunConfig;
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// 17 significant digits: round-trips f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".to_string() } else { "-inf".to_string() };
    }
    format!("{x:.16e}")
}

pub fn fmt_bool(b: bool) -> String {
    if b { "true".into() } else { "false".into() }
}

fn quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Write atomically: temp file in the same directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len(), "row width mismatch");
        let line: Vec<String> = row.iter().map(|f| quote(f)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub code_version: String,
    pub master_seed: u64,
    pub workers: usize,
    /// sorted `key = value` lines; feeding them back as a config file
    /// reproduces the run
    pub config_lines: Vec<String>,
    pub per_task_streams: Vec<TaskStream>,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct TaskStream {
    pub task: String,
    pub path: Vec<u64>,
}

pub struct RunWriter {
    pub out_dir: PathBuf,
    manifest: Manifest,
    started: std::time::Instant,
}

impl RunWriter {
    pub fn new(config: &RunConfig) -> std::io::Result<Self> {
        let out_dir = PathBuf::from(config.get("out"));
        fs::create_dir_all(&out_dir)?;
        Ok(Self {
            out_dir,
            manifest: Manifest {
                subcommand: config.subcommand.clone(),
                code_version: env!("CARGO_PKG_VERSION").to_string(),
                master_seed: config.u64("seed").unwrap_or(0),
                workers: config.usize("workers").unwrap_or(0),
                config_lines: config.echo_lines(),
                per_task_streams: Vec::new(),
                warnings: Vec::new(),
                outputs: Vec::new(),
                wall_clock_seconds: 0.0,
            },
            started: std::time::Instant::now(),
        })
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.manifest.warnings.push(message.into());
    }

    pub fn task_stream(&mut self, task: impl Into<String>, path: &[u64]) {
        self.manifest.per_task_streams.push(TaskStream { task: task.into(), path: path.to_vec() });
    }

    pub fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> std::io::Result<PathBuf> {
        let path = self.out_dir.join(name);
        write_csv(&path, header, rows)?;
        self.manifest.outputs.push(name.to_string());
        Ok(path)
    }

    /// Write the manifest; call last.
    pub fn finish(mut self) -> std::io::Result<Vec<String>> {
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        let name = format!("{}_manifest.json", self.manifest.subcommand.replace('-', "_"));
        let path = self.out_dir.join(name);
        let json = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        write_atomic(&path, &json)?;
        Ok(self.manifest.warnings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_has_17_digits_and_roundtrips() {
        let x = 0.1234567890123456789;
        let s = fmt_f64(x);
        assert_eq!(s, "1.2345678901234568e-1");
        assert_eq!(s.parse::<f64>().unwrap(), x);
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(quote("plain"), "plain");
        assert_eq!(quote("a,b"), "\"a,b\"");
        assert_eq!(quote("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
