//! Relational index over directory trees of recordings.
//!
//! Three tables: `files` (one row per binary file), `channels` and `extras`
//! (both keyed by the file row id). Persisted as CSV plus a `schema.sql`
//! that any SQL engine can load.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::metadata::{flatten, parse_metadata, validate, FileRecord, Node};
use crate::timecodec::to_epoch_millis;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot read index root {path}: {source}")]
    Root { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("time filter start {t0} is after its end {t1}")]
    BadRange { t0: i64, t1: i64 },
}

impl IndexError {
    pub fn code(&self) -> &'static str {
        match self {
            IndexError::Root { .. } | IndexError::Io { .. } => "io_error",
            IndexError::Csv { .. } => "index_format",
            IndexError::BadRange { .. } => "bad_time_range",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRow {
    pub id: usize,
    /// Relative to the index root, `/`-separated.
    pub metadata_path: String,
    pub file_name: String,
    pub subject_id: String,
    pub study_id: String,
    pub device_id: String,
    pub sensor_type: Option<String>,
    /// Null for local-only timestamps.
    pub start_epoch_ms: Option<i64>,
    pub end_epoch_ms: Option<i64>,
    pub rows: u64,
    pub data_type: String,
    pub bits: u32,
    pub n_channels: usize,
    pub group_id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelRow {
    pub file_id: usize,
    pub channel_index: usize,
    pub label: String,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtraRow {
    pub file_id: usize,
    pub field_name: String,
    pub value_text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IndexTable {
    pub files: Vec<FileRow>,
    pub channels: Vec<ChannelRow>,
    pub extras: Vec<ExtraRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SkipKind {
    /// The document contributed nothing.
    Skipped,
    /// Indexed, with a caveat.
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkipEntry {
    pub path: String,
    pub kind: SkipKind,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SkipReport {
    pub entries: Vec<SkipEntry>,
}

impl SkipReport {
    fn push(&mut self, path: &str, kind: SkipKind, code: &str, message: impl Into<String>) {
        self.entries.push(SkipEntry { path: path.to_string(), kind, code: code.to_string(), message: message.into() });
    }

    pub fn skipped(&self) -> impl Iterator<Item = &SkipEntry> {
        self.entries.iter().filter(|e| e.kind == SkipKind::Skipped)
    }
}

fn relative_path(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect::<Vec<_>>().join("/")
}

/// Records of one metadata document, or the reason it is not a recording.
pub fn load_records(bytes: &[u8]) -> Result<Vec<FileRecord>, (String, String)> {
    let doc = parse_metadata(bytes).map_err(|e| ("not_tsdf".to_string(), e.to_string()))?;
    let flat = flatten(&doc).map_err(|e| ("not_tsdf".to_string(), e.to_string()))?;
    if flat.is_empty() {
        return Err(("not_tsdf".into(), "no mapping carries a file_name".into()));
    }
    let report = validate(&flat);
    if !report.is_conformant() {
        let first = report.errors().next().map(ToString::to_string).unwrap_or_default();
        return Err(("invalid_metadata".into(), format!("{} errors; first: {first}", report.error_count())));
    }
    flat.iter().map(FileRecord::from_flat).collect::<Result<_, _>>().map_err(|r| ("invalid_metadata".to_string(), r.to_string()))
}

fn value_text(node: &Node) -> String {
    match node {
        Node::String(s) => s.clone(),
        other => other.to_compact_json(),
    }
}

fn add_records(table: &mut IndexTable, skips: &mut SkipReport, metadata_path: &str, records: &[FileRecord]) {
    for r in records {
        let id = table.files.len();
        let start = to_epoch_millis(&r.start_iso8601).ok();
        let end = to_epoch_millis(&r.end_iso8601).ok();
        if start.is_none() || end.is_none() {
            skips.push(
                metadata_path,
                SkipKind::Warning,
                "local_only_timestamp",
                format!("{}: no UTC anchor; epoch columns left null and excluded from time filters", r.file_name),
            );
        }
        table.files.push(FileRow {
            id,
            metadata_path: metadata_path.to_string(),
            file_name: r.file_name.clone(),
            subject_id: r.subject_id.clone(),
            study_id: r.study_id.clone(),
            device_id: r.device_id.clone(),
            sensor_type: r.sensor_type.clone(),
            start_epoch_ms: start,
            end_epoch_ms: end,
            rows: r.rows,
            data_type: r.data_type.as_str().to_string(),
            bits: r.bits,
            n_channels: r.channels.len(),
            group_id: r.group_id,
        });
        for (i, (label, unit)) in r.channels.iter().zip(&r.units).enumerate() {
            table.channels.push(ChannelRow { file_id: id, channel_index: i, label: label.clone(), unit: unit.clone() });
        }
        let columns = [
            "subject_id",
            "study_id",
            "device_id",
            "endianness",
            "metadata_version",
            "start_iso8601",
            "end_iso8601",
            "rows",
            "file_name",
            "channels",
            "units",
            "data_type",
            "bits",
            "sensor_type",
        ];
        for (k, v) in r.to_fields() {
            if !columns.contains(&k.as_str()) {
                table.extras.push(ExtraRow { file_id: id, field_name: k, value_text: value_text(&v) });
            }
        }
    }
}

/// Scans `root` for `*.json` metadata files. Documents that are not valid
/// recordings end up in the skip report; only an unreadable root fails.
pub fn build_index(root: &Path) -> Result<(IndexTable, SkipReport), IndexError> {
    fs::read_dir(root).map_err(|source| IndexError::Root { path: root.to_path_buf(), source })?;
    let mut table = IndexTable::default();
    let mut skips = SkipReport::default();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                let path = e.path().map_or_else(|| "?".to_string(), |p| relative_path(root, p));
                skips.push(&path, SkipKind::Skipped, "io_error", e.to_string());
                continue;
            }
        };
        let path = entry.path();
        if !entry.file_type().is_file() || path.extension().is_none_or(|x| !x.eq_ignore_ascii_case("json")) {
            continue;
        }
        let rel = relative_path(root, path);
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) => {
                skips.push(&rel, SkipKind::Skipped, "io_error", e.to_string());
                continue;
            }
        };
        match load_records(&bytes) {
            Ok(records) => add_records(&mut table, &mut skips, &rel, &records),
            Err((code, message)) => skips.push(&rel, SkipKind::Skipped, &code, message),
        }
    }
    Ok((table, skips))
}

/// Conjunction of the given conditions; `None` matches everything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Filter {
    pub subject_id: Option<String>,
    pub study_id: Option<String>,
    pub device_id: Option<String>,
    pub sensor_type: Option<String>,
    /// Epoch milliseconds, inclusive; matches files whose [start, end] meets it.
    pub overlaps: Option<(i64, i64)>,
    pub channel_label: Option<String>,
}

impl Filter {
    pub fn matches(&self, file: &FileRow, channels: &[ChannelRow]) -> bool {
        let eq = |want: &Option<String>, have: &str| want.as_deref().is_none_or(|w| w == have);
        eq(&self.subject_id, &file.subject_id)
            && eq(&self.study_id, &file.study_id)
            && eq(&self.device_id, &file.device_id)
            && self.sensor_type.as_deref().is_none_or(|w| file.sensor_type.as_deref() == Some(w))
            && self.overlaps.is_none_or(|(t0, t1)| match (file.start_epoch_ms, file.end_epoch_ms) {
                (Some(s), Some(e)) => s <= t1 && e >= t0,
                _ => false,
            })
            && self.channel_label.as_deref().is_none_or(|l| channels.iter().any(|c| c.file_id == file.id && c.label == l))
    }
}

pub fn query<'a>(index: &'a IndexTable, filter: &Filter) -> Result<Vec<&'a FileRow>, IndexError> {
    if let Some((t0, t1)) = filter.overlaps {
        if t0 > t1 {
            return Err(IndexError::BadRange { t0, t1 });
        }
    }
    let by_file = |id: usize| {
        let lo = index.channels.partition_point(|c| c.file_id < id);
        let hi = index.channels.partition_point(|c| c.file_id <= id);
        &index.channels[lo..hi]
    };
    Ok(index.files.iter().filter(|f| filter.matches(f, by_file(f.id))).collect())
}

pub const FILES_CSV: &str = "files.csv";
pub const CHANNELS_CSV: &str = "channels.csv";
pub const EXTRAS_CSV: &str = "extras.csv";
pub const SCHEMA_SQL: &str = "schema.sql";

pub const SCHEMA: &str = "\
CREATE TABLE files (
    id INTEGER PRIMARY KEY,
    metadata_path TEXT NOT NULL,
    file_name TEXT NOT NULL,
    subject_id TEXT NOT NULL,
    study_id TEXT NOT NULL,
    device_id TEXT NOT NULL,
    sensor_type TEXT,
    start_epoch_ms INTEGER,
    end_epoch_ms INTEGER,
    rows INTEGER NOT NULL,
    data_type TEXT NOT NULL,
    bits INTEGER NOT NULL,
    n_channels INTEGER NOT NULL,
    group_id INTEGER NOT NULL,
    UNIQUE (metadata_path, file_name)
);
CREATE TABLE channels (
    file_id INTEGER NOT NULL REFERENCES files(id),
    channel_index INTEGER NOT NULL,
    label TEXT NOT NULL,
    unit TEXT NOT NULL,
    PRIMARY KEY (file_id, channel_index)
);
CREATE TABLE extras (
    file_id INTEGER NOT NULL REFERENCES files(id),
    field_name TEXT NOT NULL,
    value_text TEXT NOT NULL,
    PRIMARY KEY (file_id, field_name)
);
-- CSV files carry a header row; an empty field in a nullable column is NULL.
";

fn write_table<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), IndexError> {
    let csv_err = |source| IndexError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| IndexError::Io { path: path.to_path_buf(), source })
}

fn read_table<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, IndexError> {
    let csv_err = |source| IndexError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

/// Writes the three tables and the schema into `out_dir`.
pub fn write_index(index: &IndexTable, out_dir: &Path) -> Result<(), IndexError> {
    fs::create_dir_all(out_dir).map_err(|source| IndexError::Io { path: out_dir.to_path_buf(), source })?;
    // the csv crate writes no header for an empty table; keep one so the files are self-describing
    write_with_header(&out_dir.join(FILES_CSV), &index.files, "id,metadata_path,file_name,subject_id,study_id,device_id,sensor_type,start_epoch_ms,end_epoch_ms,rows,data_type,bits,n_channels,group_id")?;
    write_with_header(&out_dir.join(CHANNELS_CSV), &index.channels, "file_id,channel_index,label,unit")?;
    write_with_header(&out_dir.join(EXTRAS_CSV), &index.extras, "file_id,field_name,value_text")?;
    let schema = out_dir.join(SCHEMA_SQL);
    fs::write(&schema, SCHEMA).map_err(|source| IndexError::Io { path: schema, source })
}

fn write_with_header<T: Serialize>(path: &Path, rows: &[T], header: &str) -> Result<(), IndexError> {
    if rows.is_empty() {
        return fs::write(path, format!("{header}\n")).map_err(|source| IndexError::Io { path: path.to_path_buf(), source });
    }
    write_table(path, rows)
}

pub fn load_index(dir: &Path) -> Result<IndexTable, IndexError> {
    Ok(IndexTable {
        files: read_table(&dir.join(FILES_CSV))?,
        channels: read_table(&dir.join(CHANNELS_CSV))?,
        extras: read_table(&dir.join(EXTRAS_CSV))?,
    })
}
