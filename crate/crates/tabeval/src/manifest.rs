//! Dataset manifest and prediction file formats.
//!
//! Both formats are newline-delimited JSON, one record per line, UTF-8:
//! streamable, diffable, and append-safe. Paths inside a manifest are
//! interpreted relative to the manifest file's directory so a dataset
//! directory can be moved wholesale.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perturb::MaskRecord;

/// Perturbation tags a manifest record may carry.
pub const KNOWN_TAGS: [&str; 5] = ["clean", "styleshift", "headermask", "noimage", "wrongtable"];

/// One evaluation example: a question over a rendered table with its gold
/// SQL. `image_file` is null for text-only (no-image) examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub example_id: String,
    pub question: String,
    pub gold_sql: String,
    pub table_file: String,
    pub db_file: String,
    pub image_file: Option<String>,
    pub template_id: String,
    pub perturbation_tag: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mask_record: Option<MaskRecord>,
}

/// An ordered set of manifest records plus the directory their relative
/// paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    records: Vec<ManifestRecord>,
    root: PathBuf,
}

impl DatasetManifest {
    pub fn new(records: Vec<ManifestRecord>, root: impl Into<PathBuf>) -> Result<Self> {
        let manifest = DatasetManifest { records, root: root.into() };
        manifest.validate()?;
        Ok(manifest)
    }

    fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::DatasetIntegrity("manifest contains no records".into()));
        }
        let mut seen = HashSet::new();
        for r in &self.records {
            if r.example_id.is_empty() {
                return Err(Error::DatasetIntegrity("record with empty example_id".into()));
            }
            if !seen.insert(r.example_id.as_str()) {
                return Err(Error::DatasetIntegrity(format!(
                    "duplicate example_id '{}'",
                    r.example_id
                )));
            }
            if !KNOWN_TAGS.contains(&r.perturbation_tag.as_str()) {
                return Err(Error::DatasetIntegrity(format!(
                    "example '{}' has unknown perturbation_tag '{}'",
                    r.example_id, r.perturbation_tag
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: ManifestRecord = serde_json::from_str(&line).map_err(|e| {
                Error::DatasetIntegrity(format!(
                    "{}:{}: malformed manifest record: {e}",
                    path.display(),
                    i + 1
                ))
            })?;
            records.push(record);
        }
        let root = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        DatasetManifest::new(records, root)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut out = Vec::new();
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(|e| Error::json(path, e))?;
            out.push(b'\n');
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&out).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn records(&self) -> &[ManifestRecord] {
        &self.records
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Resolves a manifest-relative path against the manifest directory.
    pub fn resolve(&self, relative: &str) -> PathBuf {
        let p = Path::new(relative);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// The single perturbation tag shared by every record, or an integrity
    /// error when the manifest mixes tags.
    pub fn uniform_tag(&self) -> Result<&str> {
        let first = self.records[0].perturbation_tag.as_str();
        for r in &self.records {
            if r.perturbation_tag != first {
                return Err(Error::DatasetIntegrity(format!(
                    "manifest mixes perturbation tags '{}' and '{}'",
                    first, r.perturbation_tag
                )));
            }
        }
        Ok(first)
    }
}

/// One raw prediction line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub example_id: String,
    pub predicted_sql: String,
}

/// Predictions keyed by example id; at most one per example.
#[derive(Debug, Clone, Default)]
pub struct PredictionSet {
    by_id: std::collections::HashMap<String, String>,
}

impl PredictionSet {
    pub fn from_records(records: Vec<PredictionRecord>) -> Result<Self> {
        let mut by_id = std::collections::HashMap::new();
        for r in records {
            if by_id.insert(r.example_id.clone(), r.predicted_sql).is_some() {
                return Err(Error::DatasetIntegrity(format!(
                    "more than one prediction for example '{}'",
                    r.example_id
                )));
            }
        }
        Ok(PredictionSet { by_id })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: PredictionRecord = serde_json::from_str(&line).map_err(|e| {
                Error::DatasetIntegrity(format!(
                    "{}:{}: malformed prediction record: {e}",
                    path.display(),
                    i + 1
                ))
            })?;
            records.push(record);
        }
        PredictionSet::from_records(records)
    }

    pub fn save(records: &[PredictionRecord], path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut out = Vec::new();
        for r in records {
            serde_json::to_writer(&mut out, r).map_err(|e| Error::json(path, e))?;
            out.push(b'\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn get(&self, example_id: &str) -> Option<&str> {
        self.by_id.get(example_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    /// Every predicted example id must exist in the manifest.
    pub fn check_against(&self, manifest: &DatasetManifest) -> Result<()> {
        let known: HashSet<&str> =
            manifest.records().iter().map(|r| r.example_id.as_str()).collect();
        let mut unknown: Vec<&str> = self
            .by_id
            .keys()
            .map(String::as_str)
            .filter(|id| !known.contains(id))
            .collect();
        if !unknown.is_empty() {
            unknown.sort_unstable();
            return Err(Error::DatasetIntegrity(format!(
                "predictions reference unknown example ids: {}",
                unknown.join(", ")
            )));
        }
        Ok(())
    }
}

/// Input line for dataset construction: a question over a named table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub example_id: String,
    pub question: String,
    pub table: String,
    pub gold_sql: String,
}

/// Loads the build-time questions file (newline-delimited records).
pub fn load_questions(path: &Path) -> Result<Vec<QuestionRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: QuestionRecord = serde_json::from_str(&line).map_err(|e| {
            Error::DatasetIntegrity(format!(
                "{}:{}: malformed question record: {e}",
                path.display(),
                i + 1
            ))
        })?;
        if !seen.insert(record.example_id.clone()) {
            return Err(Error::DatasetIntegrity(format!(
                "duplicate example_id '{}' in questions file",
                record.example_id
            )));
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::DatasetIntegrity(format!(
            "questions file {} contains no records",
            path.display()
        )));
    }
    Ok(records)
}
