use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Formats `x` with 12 significant digits, trailing zeros dropped.
pub fn sig12(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&exp) {
        let s = format!("{x:.11e}");
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        return format!("{}e{e}", trim_zeros(mantissa));
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Plain comma-separated table; numbers go through [`sig12`].
#[derive(Debug, Clone, Default)]
pub struct Csv {
    text: String,
}

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<Option<usize>> for Cell {
    fn from(x: Option<usize>) -> Self {
        x.map_or(Cell::Empty, Cell::from)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Text(x.to_string())
    }
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: impl IntoIterator<Item = S>) -> Self {
        let mut csv = Self::default();
        let cols: Vec<String> = header.into_iter().map(|s| s.as_ref().to_string()).collect();
        csv.text.push_str(&cols.join(","));
        csv.text.push('\n');
        csv
    }

    pub fn row(&mut self, cells: impl IntoIterator<Item = Cell>) {
        let mut first = true;
        for c in cells {
            if !first {
                self.text.push(',');
            }
            first = false;
            match c {
                Cell::Num(x) => self.text.push_str(&sig12(x)),
                Cell::Int(i) => write!(self.text, "{i}").unwrap(),
                Cell::Text(s) if s.contains([',', '"', '\n']) => {
                    write!(self.text, "\"{}\"", s.replace('"', "\"\"")).unwrap()
                }
                Cell::Text(s) => self.text.push_str(&s),
                Cell::Empty => {}
            }
        }
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct EmittedFile {
    pub name: String,
    pub sha256: String,
}

/// Provenance record written next to every set of output files.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub input_sha256: String,
    pub parameters: serde_json::Value,
    pub tool_version: String,
    pub files: Vec<EmittedFile>,
}

/// Named artifacts produced by one command.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, content: String) {
        self.files.push((name.to_string(), content));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    /// Writes every artifact plus `manifest.json` into `dir`.
    pub fn write_all(
        &self,
        dir: &Path,
        command: &str,
        input_sha256: &str,
        parameters: serde_json::Value,
    ) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut files = Vec::new();
        for (name, content) in &self.files {
            let path = dir.join(name);
            fs::write(&path, content)?;
            files.push(EmittedFile { name: name.clone(), sha256: sha256_hex(content.as_bytes()) });
            written.push(path);
        }
        let manifest = RunManifest {
            command: command.to_string(),
            input_sha256: input_sha256.to_string(),
            parameters,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            files,
        };
        let path = dir.join("manifest.json");
        fs::write(&path, to_json(&manifest))?;
        written.push(path);
        Ok(written)
    }
}
