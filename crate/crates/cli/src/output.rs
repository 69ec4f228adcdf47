use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// A command's result in every form it can be emitted in.
pub struct Output {
    pub text: String,
    pub json: Option<Value>,
    pub csv: Option<String>,
}

impl Output {
    pub fn new(text: String, json: &impl Serialize, csv: Option<String>) -> Self {
        Self {
            text,
            json: Some(serde_json::to_value(json).expect("results serialize")),
            csv,
        }
    }

    /// Tabular output only, e.g. a population file.
    pub fn csv_only(csv: String) -> Self {
        Self {
            text: csv.clone(),
            json: None,
            csv: Some(csv),
        }
    }

    /// Writes to `--out` (CSV for a `.csv` path, JSON otherwise) or stdout.
    pub fn emit(self, out: Option<&Path>, json: bool) -> Result<(), CliError> {
        let pretty = |v: &Value| serde_json::to_string_pretty(v).expect("values serialize") + "\n";
        if let Some(path) = out {
            let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
            let body = match (&self.json, &self.csv) {
                (_, Some(csv)) if is_csv || self.json.is_none() => csv.clone(),
                (Some(v), _) if !is_csv => pretty(v),
                _ => return Err(CliError::usage("this command has no CSV form; use a .json --out path")),
            };
            std::fs::write(path, body).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
            log::info!("wrote {}", path.display());
        }
        let stdout = if json {
            match &self.json {
                Some(v) => pretty(v),
                None => return Err(CliError::usage("this command only produces CSV")),
            }
        } else if out.is_none() {
            self.text
        } else {
            return Ok(());
        };
        let mut lock = std::io::stdout().lock();
        match lock.write_all(stdout.as_bytes()).and_then(|_| lock.flush()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::runtime(e.to_string())),
            _ => Ok(()),
        }
    }
}

/// Left-aligned text table.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut s = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut l = String::new();
        for (c, w) in cells.zip(&widths) {
            let _ = write!(l, "{c:<w$}  ");
        }
        s.push_str(l.trim_end());
        s.push('\n');
    };
    line(&mut header.iter().copied());
    for r in rows {
        line(&mut r.iter().map(String::as_str));
    }
    s
}

pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

pub fn cost(c: f64) -> String {
    format!("{c:.2}")
}

pub fn num(x: f64) -> String {
    format!("{x:.6}")
}

pub use screenwise_core::info::format_probability as prob;
