//! Report files: `summary.txt` (6 significant digits), `report.kv` (17
//! significant digits, resolved config embedded) and CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use shapederiv_core::slope::{FdRow, Slope};

use crate::config::RunConfig;
use crate::error::CliError;

pub fn full(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn short(x: f64) -> String {
    format!("{x:.5e}")
}

fn slope_short(s: &Slope) -> String {
    match s {
        Slope::Fitted(v) => format!("{v:.5e}"),
        other => other.to_string(),
    }
}

#[derive(Debug, Default)]
pub struct Report {
    kv: Vec<(String, String)>,
    summary: Vec<String>,
    tables: Vec<(&'static str, String)>,
    /// Set when a numerical check in the run did not hold.
    pub failed_checks: Vec<String>,
}

impl Report {
    pub fn scalar(&mut self, key: &str, label: &str, x: f64) {
        self.kv.push((key.into(), full(x)));
        self.summary.push(format!("{label}: {}", short(x)));
    }

    pub fn count(&mut self, key: &str, label: &str, n: usize) {
        self.kv.push((key.into(), n.to_string()));
        self.summary.push(format!("{label}: {n}"));
    }

    pub fn text(&mut self, key: &str, label: &str, value: &str) {
        self.kv.push((key.into(), value.into()));
        self.summary.push(format!("{label}: {value}"));
    }

    /// Machine-readable only; long vectors stay out of the summary.
    pub fn vector(&mut self, key: &str, v: &[f64]) {
        let items: Vec<String> = v.iter().map(|&x| full(x)).collect();
        self.kv.push((key.into(), format!("[{}]", items.join(", "))));
    }

    pub fn slope(&mut self, key: &str, label: &str, s: &Slope) {
        self.kv.push((key.into(), s.to_string()));
        self.summary.push(format!("{label}: {}", slope_short(s)));
    }

    pub fn check(&mut self, key: &str, label: &str, ok: bool, detail: String) {
        let verdict = if ok { "pass" } else { "fail" };
        self.kv.push((key.into(), verdict.into()));
        self.summary.push(format!("{label}: {verdict} ({detail})"));
        if !ok {
            self.failed_checks.push(format!("{label}: {detail}"));
        }
    }

    pub fn fd_table(&mut self, rows: &[FdRow]) {
        let mut csv = String::from("s,fd,L1,abs_err\n");
        for r in rows {
            let _ = writeln!(csv, "{},{},{},{}", full(r.s), full(r.fd), full(r.l1), full(r.abs_err));
        }
        self.tables.push(("fd_table.csv", csv));
        self.summary.push(String::from("s            fd            |fd - L1|"));
        for r in rows {
            self.summary.push(format!("{}  {}  {}", short(r.s), short(r.fd), short(r.abs_err)));
        }
    }

    pub fn table(&mut self, file: &'static str, csv: String) {
        self.tables.push((file, csv));
    }

    pub fn summary_line(&mut self, line: String) {
        self.summary.push(line);
    }

    pub fn render_kv(&self, config: &RunConfig) -> String {
        let mut out = String::new();
        let value = toml::Value::try_from(config).expect("configuration types serialize");
        flatten("config", &value, &mut out);
        for (k, v) in &self.kv {
            let _ = writeln!(out, "result.{k} = {v}");
        }
        out
    }

    pub fn render_summary(&self, command: &str) -> String {
        let mut out = format!("shapederiv {command}\n");
        for line in &self.summary {
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    pub fn write(&self, dir: &Path, config: &RunConfig, command: &str) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(dir.join("summary.txt"), self.render_summary(command)).map_err(io)?;
        std::fs::write(dir.join("report.kv"), self.render_kv(config)).map_err(io)?;
        for (name, csv) in &self.tables {
            std::fs::write(dir.join(name), csv).map_err(io)?;
        }
        Ok(())
    }
}

/// Dotted keys in document order; leaves use their TOML representation.
fn flatten(prefix: &str, value: &toml::Value, out: &mut String) {
    match value {
        toml::Value::Table(table) => {
            for (k, v) in table {
                flatten(&format!("{prefix}.{k}"), v, out);
            }
        }
        leaf => {
            let _ = writeln!(out, "{prefix} = {leaf}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formats() {
        assert_eq!(full(0.1), "1.0000000000000001e-1");
        assert_eq!(short(1234.5678), "1.23457e3");
        assert_eq!(full(-0.0), "-0.0000000000000000e0");
    }

    #[test]
    fn config_is_flattened() {
        let cfg = RunConfig::parse("[mesh]\nkind = \"disk\"\nrings = 2\n").unwrap();
        let report = Report::default();
        let kv = report.render_kv(&cfg);
        assert!(kv.contains("config.mesh.kind = \"disk\"\n"));
        assert!(kv.contains("config.mesh.rings = 2\n"));
    }

    #[test]
    fn failed_checks_are_collected() {
        let mut r = Report::default();
        r.check("slope_check", "slope check", false, "slope 1.2 < 1.8".into());
        assert_eq!(r.failed_checks.len(), 1);
        assert!(r.render_summary("fd-verify").contains("slope check: fail"));
    }
}
