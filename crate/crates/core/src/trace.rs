//! Parsing of NtTrace-style logs into sequences of system-call names.
//!
//! A raw log line such as
//!
//! ```text
//! NtQueryPerformanceCounter( Counter=0xbcf6c8 [1.45779e+009], Freq=null ) => 0
//! ```
//!
//! contributes the single token `ntqueryperformancecounter`. Parameters,
//! return values and informational lines (`Unload of DLL at ...`) are dropped.
//! The processed form written back to disk is one lowercase name per line.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;

/// Ground-truth class of a trace. Malware is the positive class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Malicious,
}

impl Label {
    /// `+1.0` for malicious, `-1.0` for benign.
    pub fn sign(self) -> f64 {
        match self {
            Label::Malicious => 1.0,
            Label::Benign => -1.0,
        }
    }

    pub fn from_sign(s: f64) -> Label {
        if s >= 0.0 {
            Label::Malicious
        } else {
            Label::Benign
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Benign => "benign",
            Label::Malicious => "malicious",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "benign" => Ok(Label::Benign),
            "malicious" => Ok(Label::Malicious),
            other => Err(Error::Manifest(format!("unknown label {other:?}"))),
        }
    }
}

/// One program execution: the ordered call names it issued.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyscallTrace {
    pub source_id: String,
    pub calls: Vec<String>,
    pub label: Option<Label>,
}

impl SyscallTrace {
    pub fn new(source_id: impl Into<String>, calls: Vec<String>) -> Self {
        SyscallTrace {
            source_id: source_id.into(),
            calls,
            label: None,
        }
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    pub fn len(&self) -> usize {
        self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calls.is_empty()
    }

    /// Processed format: one call name per line, LF-terminated.
    pub fn render_processed(&self) -> String {
        let mut out = String::with_capacity(self.calls.iter().map(|c| c.len() + 1).sum());
        for c in &self.calls {
            out.push_str(c);
            out.push('\n');
        }
        out
    }
}

/// True when `token` satisfies the call-name invariants: non-empty, lowercase,
/// no whitespace, `nt` prefix.
pub fn is_valid_token(token: &str) -> bool {
    token.starts_with("nt")
        && token
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Returns the lowercased call name when `line` starts (after optional
/// whitespace) with an `Nt` identifier immediately followed by `(`.
pub fn extract_call_name(line: &str) -> Option<String> {
    let s = line.trim_start();
    let bytes = s.as_bytes();
    if bytes.len() < 3 || !bytes[..2].eq_ignore_ascii_case(b"nt") {
        return None;
    }
    let end = bytes.iter().position(|&b| !is_ident_byte(b))?;
    if bytes[end] != b'(' {
        return None;
    }
    Some(s[..end].to_ascii_lowercase())
}

/// Parses raw log text. Accepts LF or CRLF line endings.
pub fn parse_trace(text: &str, source_id: &str) -> Result<SyscallTrace> {
    let calls: Vec<String> = text.lines().filter_map(extract_call_name).collect();
    if calls.is_empty() {
        return Err(Error::EmptyTrace(source_id.to_string()));
    }
    Ok(SyscallTrace::new(source_id, calls))
}

/// Parses raw bytes, skipping lines that are not valid UTF-8.
pub fn parse_trace_bytes(bytes: &[u8], source_id: &str) -> Result<SyscallTrace> {
    let calls: Vec<String> = split_lines(bytes)
        .filter_map(|l| std::str::from_utf8(l).ok())
        .filter_map(extract_call_name)
        .collect();
    if calls.is_empty() {
        return Err(Error::EmptyTrace(source_id.to_string()));
    }
    Ok(SyscallTrace::new(source_id, calls))
}

fn split_lines(bytes: &[u8]) -> impl Iterator<Item = &[u8]> {
    let trimmed = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    trimmed
        .split(|&b| b == b'\n')
        .map(|l| l.strip_suffix(b"\r").unwrap_or(l))
        .filter(move |_| !bytes.is_empty())
}

/// On-disk layout of a trace file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceFormat {
    /// NtTrace output: `Name( params ) => ret`.
    Raw,
    /// One lowercase call name per line.
    Processed,
}

/// A file is processed when every non-blank line is a bare lowercase
/// call name. Anything else is treated as raw log text.
pub fn detect_format(bytes: &[u8]) -> TraceFormat {
    let mut any = false;
    for line in split_lines(bytes) {
        let Ok(l) = std::str::from_utf8(line) else {
            return TraceFormat::Raw;
        };
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        if !is_valid_token(l) {
            return TraceFormat::Raw;
        }
        any = true;
    }
    if any {
        TraceFormat::Processed
    } else {
        TraceFormat::Raw
    }
}

/// Parses the processed one-name-per-line format.
pub fn parse_processed(bytes: &[u8], source_id: &str) -> Result<SyscallTrace> {
    let calls: Vec<String> = split_lines(bytes)
        .filter_map(|l| std::str::from_utf8(l).ok())
        .map(str::trim)
        .filter(|l| is_valid_token(l))
        .map(str::to_string)
        .collect();
    if calls.is_empty() {
        return Err(Error::EmptyTrace(source_id.to_string()));
    }
    Ok(SyscallTrace::new(source_id, calls))
}

/// Reads a trace file in either format.
pub fn read_trace_file(path: &Path, source_id: &str) -> Result<SyscallTrace> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match detect_format(&bytes) {
        TraceFormat::Processed => parse_processed(&bytes, source_id),
        TraceFormat::Raw => parse_trace_bytes(&bytes, source_id),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: Label,
}

/// Labeled list of trace files, stored as CSV with header `path,label`.
///
/// Relative paths are resolved against `base_dir`, which is the manifest's
/// own directory when loaded from disk.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
    pub base_dir: PathBuf,
}

impl CorpusManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let m = CorpusManifest {
            entries,
            base_dir: PathBuf::new(),
        };
        m.check_unique()?;
        Ok(m)
    }

    fn check_unique(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(&e.path) {
                return Err(Error::Manifest(format!(
                    "duplicate path {}",
                    e.path.display()
                )));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    pub fn count(&self, label: Label) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }

    pub fn from_csv_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| Error::Manifest(e.to_string()))?
            .clone();
        if headers.len() != 2 || &headers[0] != "path" || &headers[1] != "label" {
            return Err(Error::Manifest(format!(
                "expected header \"path,label\", found {:?}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Manifest(e.to_string()))?;
            entries.push(ManifestEntry {
                path: PathBuf::from(&rec[0]),
                label: rec[1].parse()?,
            });
        }
        let m = CorpusManifest {
            entries,
            base_dir: base_dir.into(),
        };
        m.check_unique()?;
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_csv_str(&text, base)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("path,label\n");
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        for e in &self.entries {
            w.write_record([e.path.to_string_lossy().as_ref(), e.label.as_str()])
                .expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf8"));
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

/// Loads every manifest entry, attaching labels. Output order is manifest order.
pub fn load_corpus(manifest: &CorpusManifest, exec: Exec) -> Result<Vec<SyscallTrace>> {
    exec.try_map(&manifest.entries, |e| {
        let id = e.path.to_string_lossy().into_owned();
        let full = manifest.resolve(e);
        read_trace_file(&full, &id).map(|t| t.with_label(e.label))
    })
}
