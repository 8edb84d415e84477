//! Dataset manifests, header stripping, streaming reads and labeled samples.
//!
//! Manifests are TOML files:
//!
//! ```toml
//! name = "HDFS"
//! log_format = "<Date> <Time> <Pid> <Level> <Component>: <Content>"
//! mask_patterns = ['blk_-?\d+', '(\d+\.){3}\d+(:\d+)?']
//! raw_path = "../data/HDFS/HDFS.log"
//! sample_path = "../data/HDFS/HDFS_2k.log"
//! truth_path = "../data/HDFS/HDFS_2k.log_structured.csv"
//! ```
//!
//! Relative paths resolve against the manifest's own directory.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::LogRecord;
use crate::preprocess::MaskSet;

#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub log_format: String,
    #[serde(default)]
    pub mask_patterns: Vec<String>,
    #[serde(default)]
    pub raw_path: PathBuf,
    #[serde(default)]
    pub sample_path: PathBuf,
    #[serde(default)]
    pub truth_path: PathBuf,
    /// Expected sha256 of the sample file, hex. Checked when present.
    #[serde(default)]
    pub sample_sha256: Option<String>,
    #[serde(default)]
    pub truth_sha256: Option<String>,
}

/// Drops `.` and folds `..` lexically.
fn normalize(path: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            std::path::Component::CurDir => {}
            std::path::Component::ParentDir => {
                if !out.pop() {
                    out.push("..");
                }
            }
            other => out.push(other),
        }
    }
    out
}

impl DatasetManifest {
    /// Reads and validates a manifest, resolving relative paths.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest = Self::parse(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let base = std::fs::canonicalize(base).unwrap_or_else(|_| base.to_path_buf());
        for p in [
            &mut manifest.raw_path,
            &mut manifest.sample_path,
            &mut manifest.truth_path,
        ] {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = normalize(&base.join(&*p));
            }
        }
        Ok(manifest)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let manifest: DatasetManifest =
            toml::from_str(text).map_err(|e| Error::Config(format!("bad manifest: {e}")))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        compile_line_format(&self.log_format)?;
        MaskSet::compile(&self.mask_patterns)?;
        Ok(())
    }

    pub fn masks(&self) -> Result<MaskSet> {
        MaskSet::compile(&self.mask_patterns)
    }

    pub fn extractor(&self) -> Result<ContentExtractor> {
        compile_line_format(&self.log_format)
    }

    /// True when both the sample and its truth file exist on disk.
    pub fn sample_available(&self) -> bool {
        self.sample_path.is_file() && self.truth_path.is_file()
    }

    /// Compares recorded checksums with the files on disk. Mismatches are
    /// logged and returned; absent checksums are skipped.
    pub fn verify_checksums(&self) -> Result<Vec<PathBuf>> {
        let mut mismatched = Vec::new();
        for (path, expected) in [
            (&self.sample_path, &self.sample_sha256),
            (&self.truth_path, &self.truth_sha256),
        ] {
            let Some(expected) = expected else { continue };
            let actual = sha256_file(path)?;
            if !actual.eq_ignore_ascii_case(expected.trim()) {
                log::warn!(
                    "{}: sha256 {} differs from manifest value {}",
                    path.display(),
                    actual,
                    expected
                );
                mismatched.push(path.clone());
            }
        }
        Ok(mismatched)
    }
}

/// Hex sha256 of a file.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Maps a raw line to its free-text content.
#[derive(Debug, Clone)]
pub struct ContentExtractor {
    regex: Regex,
    fields: Vec<String>,
}

/// Compiles a line format such as `<Date> <Time> <Level>: <Content>`.
///
/// Text between placeholders is a regex fragment in which runs of spaces
/// match any whitespace run, so loghub formats like `\[<ADDR>\]` work as is.
/// Exactly one `<Content>` placeholder is required.
pub fn compile_line_format(log_format: &str) -> Result<ContentExtractor> {
    let spaces = Regex::new(" +").expect("static regex");
    let mut pattern = String::from("^");
    let mut fields = Vec::new();
    let mut rest = log_format;
    loop {
        let open = rest.find('<');
        let close = rest.find('>');
        match (open, close) {
            (None, None) => {
                pattern.push_str(&spaces.replace_all(rest, r"\s+"));
                break;
            }
            (Some(o), Some(c)) if o < c => {
                pattern.push_str(&spaces.replace_all(&rest[..o], r"\s+"));
                let name = &rest[o + 1..c];
                if name.is_empty()
                    || name.contains('<')
                    || !name.chars().all(|ch| ch.is_alphanumeric() || ch == '_')
                {
                    return Err(Error::Config(format!(
                        "bad placeholder <{name}> in line format {log_format:?}"
                    )));
                }
                if fields.iter().any(|f| f == name) {
                    return Err(Error::Config(format!(
                        "duplicate placeholder <{name}> in line format {log_format:?}"
                    )));
                }
                pattern.push_str(&format!("(?P<{name}>.*?)"));
                fields.push(name.to_owned());
                rest = &rest[c + 1..];
            }
            _ => {
                return Err(Error::Config(format!(
                    "unbalanced <> in line format {log_format:?}"
                )))
            }
        }
    }
    pattern.push('$');
    if !fields.iter().any(|f| f == "Content") {
        return Err(Error::Config(format!(
            "line format {log_format:?} has no <Content> placeholder"
        )));
    }
    let regex = Regex::new(&pattern)
        .map_err(|e| Error::Config(format!("line format {log_format:?}: {e}")))?;
    Ok(ContentExtractor { regex, fields })
}

impl ContentExtractor {
    /// Content capture of `line`, or the whole trimmed line when the format
    /// does not match.
    pub fn extract<'a>(&self, line: &'a str) -> &'a str {
        let line = line.trim();
        match self.regex.captures(line) {
            Some(caps) => caps.name("Content").map_or(line, |m| m.as_str()),
            None => line,
        }
    }

    /// True when `line` matches the format.
    pub fn matches(&self, line: &str) -> bool {
        self.regex.is_match(line.trim())
    }

    pub fn fields(&self) -> &[String] {
        &self.fields
    }

    /// Extractor that uses the whole line as content.
    pub fn whole_line() -> Self {
        compile_line_format("<Content>").expect("static format")
    }
}

/// Sequential reader yielding one record per line, in file order.
///
/// Invalid UTF-8 is replaced and counted; the stream keeps going.
pub struct RawStream<R> {
    reader: R,
    extractor: ContentExtractor,
    path: PathBuf,
    next_index: usize,
    buf: Vec<u8>,
    invalid_utf8_lines: usize,
}

impl RawStream<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>, extractor: ContentExtractor) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(RawStream::new(BufReader::new(file), extractor, path))
    }
}

impl<R: BufRead> RawStream<R> {
    pub fn new(reader: R, extractor: ContentExtractor, path: impl Into<PathBuf>) -> Self {
        RawStream {
            reader,
            extractor,
            path: path.into(),
            next_index: 0,
            buf: Vec::new(),
            invalid_utf8_lines: 0,
        }
    }

    /// Lines that needed UTF-8 replacement so far.
    pub fn invalid_utf8_lines(&self) -> usize {
        self.invalid_utf8_lines
    }

    pub fn extractor(&self) -> &ContentExtractor {
        &self.extractor
    }
}

impl<R: BufRead> Iterator for RawStream<R> {
    type Item = Result<LogRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        self.buf.clear();
        match self.reader.read_until(b'\n', &mut self.buf) {
            Ok(0) => None,
            Ok(_) => {
                if self.buf.last() == Some(&b'\n') {
                    self.buf.pop();
                    if self.buf.last() == Some(&b'\r') {
                        self.buf.pop();
                    }
                }
                let raw = match std::str::from_utf8(&self.buf) {
                    Ok(s) => s.to_owned(),
                    Err(_) => {
                        self.invalid_utf8_lines += 1;
                        log::warn!(
                            "{}: line {} is not valid UTF-8, replacing offending bytes",
                            self.path.display(),
                            self.next_index + 1
                        );
                        String::from_utf8_lossy(&self.buf).into_owned()
                    }
                };
                let content = self.extractor.extract(&raw).to_owned();
                let index = self.next_index;
                self.next_index += 1;
                Some(Ok(LogRecord {
                    index,
                    raw,
                    content,
                }))
            }
            Err(e) => Some(Err(Error::io(&self.path, e))),
        }
    }
}

/// Streams the manifest's full corpus.
pub fn stream_raw(manifest: &DatasetManifest) -> Result<RawStream<BufReader<File>>> {
    RawStream::open(&manifest.raw_path, manifest.extractor()?)
}

/// Labels of a structured sample.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    /// record index -> truth group id (`EventId`)
    pub labels: Vec<String>,
    /// truth group id -> template text
    pub truth_templates: BTreeMap<String, String>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn group_count(&self) -> usize {
        let mut ids: Vec<&str> = self.labels.iter().map(String::as_str).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

/// Reads a `*_structured.csv` truth file (`LineId`, `EventId`, `EventTemplate`).
pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if file.metadata().map(|m| m.len() == 0).unwrap_or(false) {
        return Ok(GroundTruth::default());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Ingest(format!("{}: missing column {name}", path.display())))
    };
    let (line_col, event_col, template_col) = (
        column("LineId")?,
        column("EventId")?,
        column("EventTemplate")?,
    );

    let mut rows: Vec<(usize, String, String)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let field = |i: usize| record.get(i).unwrap_or("").trim().to_owned();
        let line_id: usize = field(line_col).parse().map_err(|_| {
            Error::Ingest(format!(
                "{}: bad LineId {:?}",
                path.display(),
                record.get(line_col)
            ))
        })?;
        if line_id == 0 {
            return Err(Error::Ingest(format!(
                "{}: LineId is 1-based",
                path.display()
            )));
        }
        rows.push((line_id, field(event_col), field(template_col)));
    }
    rows.sort_by_key(|r| r.0);
    let mut truth = GroundTruth::default();
    for (position, (line_id, event, template)) in rows.into_iter().enumerate() {
        if line_id != position + 1 {
            return Err(Error::Ingest(format!(
                "{}: LineId {line_id} out of sequence (expected {})",
                path.display(),
                position + 1
            )));
        }
        truth
            .truth_templates
            .entry(event.clone())
            .or_insert(template);
        truth.labels.push(event);
    }
    Ok(truth)
}

/// Loads a labeled sample: its records and aligned truth labels.
pub fn load_sample(manifest: &DatasetManifest) -> Result<(Vec<LogRecord>, GroundTruth)> {
    load_sample_files(
        &manifest.sample_path,
        &manifest.truth_path,
        manifest.extractor()?,
    )
}

pub fn load_sample_files(
    sample_path: &Path,
    truth_path: &Path,
    extractor: ContentExtractor,
) -> Result<(Vec<LogRecord>, GroundTruth)> {
    let records = RawStream::open(sample_path, extractor)?.collect::<Result<Vec<_>>>()?;
    let truth = read_ground_truth(truth_path)?;
    if records.len() != truth.len() {
        return Err(Error::Ingest(format!(
            "{} has {} lines but {} has {} labeled rows",
            sample_path.display(),
            records.len(),
            truth_path.display(),
            truth.len()
        )));
    }
    Ok((records, truth))
}
