//! Whole recordings: one metadata file plus its binary files.
//!
//! Records that were flattened from the same list form a signal group. Each
//! amplitude file in a group gets its timestamps from exactly one place:
//!
//! * a time file in the same group (a record whose only channel is `time`),
//! * its own `time` channel,
//! * uniform sampling (`sampling_rate`).
//!
//! A group holding both a time file and a member with a `time` channel is
//! rejected as ambiguous.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, Read};
use std::ops::Range;
use std::path::{Path, PathBuf};

use md5::Md5;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::binio::{self, BinError, DataType, Number, SampleMatrix};
use crate::metadata::{
    flatten, parse_metadata, serialize_metadata, validate, Compression, FileRecord, MetadataError, SerializeLayout, ValidationReport,
};
use crate::timecodec::{decode_timestamps, encode_timestamps, Iso8601Timestamp, TimeEncoding, TimeError, TimeKind, TimeUnit};

/// Sample files above this size get a warning from [`Recording::audit`].
pub const DEFAULT_MAX_FILE_SIZE: u64 = 4 << 30;

pub const TIME_CHANNEL: &str = "time";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Metadata(#[from] MetadataError),
    #[error("metadata does not validate:\n{0}")]
    Invalid(ValidationReport),
    #[error("{file_name}: binary file is missing")]
    MissingFile { file_name: String },
    #[error("{file_name}: {source}")]
    Bin { file_name: String, source: BinError },
    #[error("{file_name}: {source}")]
    Time { file_name: String, source: TimeError },
    #[error("group {group_id}: ambiguous time source: {reason}")]
    AmbiguousTimeSource { group_id: usize, reason: String },
    #[error("{file_name}: no time source (no time file, no time channel, no sampling_rate)")]
    NoTimeSource { file_name: String },
    #[error("{file_name}: has {actual} rows but its time source has {expected}")]
    RowsMismatch { file_name: String, expected: u64, actual: u64 },
    #[error("{file_name}: compression {value:?} is not a supported time encoding")]
    UnsupportedCompression { file_name: String, value: String },
    #[error("no group with id {0}")]
    UnknownGroup(usize),
    #[error("no record for file {0:?}")]
    UnknownFile(String),
    #[error("inconsistent input: {0}")]
    Inconsistent(String),
    #[error("redundant_field_conflict: {file_name} states end {supplied} but its last sample is at {computed}")]
    RedundantFieldConflict { file_name: String, supplied: String, computed: String },
}

impl DatasetError {
    pub fn code(&self) -> &'static str {
        match self {
            DatasetError::Io { .. } => "io_error",
            DatasetError::Metadata(MetadataError::Syntax { .. } | MetadataError::Encoding { .. }) => "metadata_syntax",
            DatasetError::Metadata(_) => "metadata_structure",
            DatasetError::Invalid(_) => "invalid_metadata",
            DatasetError::MissingFile { .. } => "missing_file",
            DatasetError::Bin { source: BinError::SizeMismatch { .. }, .. } => "size_mismatch",
            DatasetError::Bin { .. } => "binary_error",
            DatasetError::Time { source, .. } => source.code(),
            DatasetError::AmbiguousTimeSource { .. } => "ambiguous_time_source",
            DatasetError::NoTimeSource { .. } => "no_time_source",
            DatasetError::RowsMismatch { .. } => "rows_mismatch",
            DatasetError::UnsupportedCompression { .. } => "unsupported_compression",
            DatasetError::UnknownGroup(_) => "unknown_group",
            DatasetError::UnknownFile(_) => "unknown_file",
            DatasetError::Inconsistent(_) => "inconsistent_input",
            DatasetError::RedundantFieldConflict { .. } => "redundant_field_conflict",
        }
    }

    /// True for errors caused by the filesystem rather than the content.
    pub fn is_io(&self) -> bool {
        matches!(self, DatasetError::Io { .. } | DatasetError::MissingFile { .. })
            || matches!(self, DatasetError::Bin { source: BinError::Io(_), .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimeSource {
    /// Index (into [`Recording::records`]) of the group's time file.
    TimeFile(usize),
    /// Channel index of the member's own `time` channel.
    TimeChannel(usize),
    Uniform {
        sampling_rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub record: usize,
    pub time: TimeSource,
    pub encoding: TimeEncoding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalGroup {
    pub group_id: usize,
    pub sensor_type: Option<String>,
    pub time_file: Option<usize>,
    pub members: Vec<Member>,
}

fn time_kind(rec: &FileRecord) -> Result<TimeKind, DatasetError> {
    match &rec.compression {
        None | Some(Compression::None | Compression::Relative) => Ok(TimeKind::Relative),
        Some(Compression::Absolute) => Ok(TimeKind::Absolute),
        Some(Compression::Difference) => Ok(TimeKind::Difference),
        Some(Compression::Other(v)) => Err(DatasetError::UnsupportedCompression { file_name: rec.file_name.clone(), value: v.clone() }),
    }
}

fn channel_encoding(rec: &FileRecord, channel: usize) -> Result<TimeEncoding, DatasetError> {
    let time_err = |source| DatasetError::Time { file_name: rec.file_name.clone(), source };
    let unit: TimeUnit = rec.units[channel].parse().map_err(time_err)?;
    TimeEncoding::new(time_kind(rec)?, unit, rec.start_iso8601, None).map_err(time_err)
}

fn is_time_file(rec: &FileRecord) -> bool {
    rec.channels.len() == 1 && rec.channels[0] == TIME_CHANNEL
}

/// Derives signal groups and each member's time source.
pub fn build_groups(records: &[FileRecord]) -> Result<Vec<SignalGroup>, DatasetError> {
    let mut by_group: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut order = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if !by_group.contains_key(&r.group_id) {
            order.push(r.group_id);
        }
        by_group.entry(r.group_id).or_default().push(i);
    }
    let mut groups = Vec::with_capacity(order.len());
    for group_id in order {
        let idxs = &by_group[&group_id];
        let time_files: Vec<usize> = idxs.iter().copied().filter(|&i| is_time_file(&records[i])).collect();
        if time_files.len() > 1 {
            return Err(DatasetError::AmbiguousTimeSource { group_id, reason: format!("{} time files", time_files.len()) });
        }
        let time_file = time_files.first().copied();
        let time_file_encoding = time_file.map(|t| channel_encoding(&records[t], 0)).transpose()?;
        let mut members = Vec::new();
        for &i in idxs {
            if Some(i) == time_file {
                continue;
            }
            let rec = &records[i];
            let own_channel = rec.channel_index(TIME_CHANNEL);
            let member = match (time_file, own_channel) {
                (Some(_), Some(_)) => {
                    return Err(DatasetError::AmbiguousTimeSource {
                        group_id,
                        reason: format!("{} has a time channel and the group has a time file", rec.file_name),
                    })
                }
                (Some(t), None) => {
                    if records[t].rows != rec.rows {
                        return Err(DatasetError::RowsMismatch {
                            file_name: rec.file_name.clone(),
                            expected: records[t].rows,
                            actual: rec.rows,
                        });
                    }
                    Member { record: i, time: TimeSource::TimeFile(t), encoding: time_file_encoding.clone().expect("time file encoding") }
                }
                (None, Some(c)) => Member { record: i, time: TimeSource::TimeChannel(c), encoding: channel_encoding(rec, c)? },
                (None, None) => {
                    let Some(rate) = rec.sampling_rate else {
                        return Err(DatasetError::NoTimeSource { file_name: rec.file_name.clone() });
                    };
                    if let Some(Compression::Other(v)) = &rec.compression {
                        return Err(DatasetError::UnsupportedCompression { file_name: rec.file_name.clone(), value: v.clone() });
                    }
                    let encoding = TimeEncoding::uniform(rec.start_iso8601, rate)
                        .map_err(|source| DatasetError::Time { file_name: rec.file_name.clone(), source })?;
                    Member { record: i, time: TimeSource::Uniform { sampling_rate: rate }, encoding }
                }
            };
            members.push(member);
        }
        let sensor_type = idxs.iter().find_map(|&i| records[i].sensor_type.clone());
        groups.push(SignalGroup { group_id, sensor_type, time_file, members });
    }
    Ok(groups)
}

/// Timestamps and samples of one amplitude file over a row range.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberData {
    pub file_name: String,
    /// Rows actually read; narrower than the requested range for short members.
    pub rows: Range<u64>,
    pub timestamps: Vec<i64>,
    pub samples: SampleMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupData {
    pub group_id: usize,
    pub rows: Range<u64>,
    /// Raw rows of the group's time file, when it has one.
    pub time_samples: Option<SampleMatrix>,
    /// Decoded instants of the time file, shared by all members.
    pub shared_timestamps: Option<Vec<i64>>,
    pub members: Vec<MemberData>,
}

#[derive(Debug, Clone)]
pub struct AuditOptions {
    /// End-timestamp tolerance; defaults to one unit of the time encoding
    /// (1 ms for uniform sampling).
    pub tolerance_ns: Option<i64>,
    pub max_file_size: u64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self { tolerance_ns: None, max_file_size: DEFAULT_MAX_FILE_SIZE }
    }
}

fn default_tolerance(enc: &TimeEncoding) -> i64 {
    match enc.kind {
        TimeKind::Uniform => 1_000_000,
        _ => enc.unit.nanos(),
    }
}

/// A recording opened from its metadata file. Immutable once opened.
#[derive(Debug, Clone)]
pub struct Recording {
    metadata_path: PathBuf,
    dir: PathBuf,
    records: Vec<FileRecord>,
    groups: Vec<SignalGroup>,
    report: ValidationReport,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

impl Recording {
    /// Parses, flattens and validates the metadata, checks every binary file
    /// against its layout and builds the signal groups.
    pub fn open(metadata_path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let rec = Self::load(metadata_path.as_ref())?;
        for r in &rec.records {
            rec.check_file(r)?;
        }
        Ok(rec)
    }

    /// Like [`open`](Self::open) without touching the binary files.
    pub fn load(metadata_path: &Path) -> Result<Self, DatasetError> {
        let bytes = fs::read(metadata_path).map_err(io_err(metadata_path))?;
        let doc = parse_metadata(&bytes)?;
        let flat = flatten(&doc)?;
        let report = validate(&flat);
        if !report.is_conformant() {
            return Err(DatasetError::Invalid(report));
        }
        let records = flat.iter().map(FileRecord::from_flat).collect::<Result<Vec<_>, _>>().map_err(DatasetError::Invalid)?;
        let groups = build_groups(&records)?;
        let dir = metadata_path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        Ok(Self { metadata_path: metadata_path.to_path_buf(), dir, records, groups, report })
    }

    fn check_file(&self, r: &FileRecord) -> Result<(), DatasetError> {
        let path = self.dir.join(&r.file_name);
        let meta = match fs::metadata(&path) {
            Ok(m) => m,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(DatasetError::MissingFile { file_name: r.file_name.clone() }),
            Err(e) => return Err(DatasetError::Io { path, source: e }),
        };
        binio::verify_size(meta.len(), &r.layout()).map_err(|source| DatasetError::Bin { file_name: r.file_name.clone(), source })
    }

    pub fn metadata_path(&self) -> &Path {
        &self.metadata_path
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn records(&self) -> &[FileRecord] {
        &self.records
    }

    pub fn groups(&self) -> &[SignalGroup] {
        &self.groups
    }

    /// Warnings collected while validating the metadata.
    pub fn validation_report(&self) -> &ValidationReport {
        &self.report
    }

    pub fn group(&self, group_id: usize) -> Result<&SignalGroup, DatasetError> {
        self.groups.iter().find(|g| g.group_id == group_id).ok_or(DatasetError::UnknownGroup(group_id))
    }

    pub fn record_index(&self, file_name: &str) -> Result<usize, DatasetError> {
        self.records.iter().position(|r| r.file_name == file_name).ok_or_else(|| DatasetError::UnknownFile(file_name.to_string()))
    }

    pub fn file_path(&self, record: usize) -> PathBuf {
        self.dir.join(&self.records[record].file_name)
    }

    /// Reads a row range of one binary file by random access.
    pub fn read_record(&self, record: usize, rows: Range<u64>) -> Result<SampleMatrix, DatasetError> {
        let r = &self.records[record];
        let bin_err = |source| DatasetError::Bin { file_name: r.file_name.clone(), source };
        if rows.start > rows.end {
            return Err(bin_err(BinError::OutOfBounds { start: rows.start, end: rows.end, rows: r.rows }));
        }
        let path = self.file_path(record);
        let mut file = File::open(&path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => DatasetError::MissingFile { file_name: r.file_name.clone() },
            _ => DatasetError::Io { path: path.clone(), source: e },
        })?;
        let m = binio::read_rows(&mut file, &r.layout(), rows.start, rows.end - rows.start).map_err(bin_err)?;
        Ok(m.with_labels(r.channels.clone(), r.units.clone()))
    }

    fn decode(&self, record: usize, enc: &TimeEncoding, raw: &[Number]) -> Result<Vec<i64>, DatasetError> {
        decode_timestamps(raw, enc, raw.len())
            .map_err(|source| DatasetError::Time { file_name: self.records[record].file_name.clone(), source })
    }

    /// Instants of `rows` for a stream stored in `channel` of `record`.
    /// Difference encoding needs a pass over all rows before `rows.start`.
    fn stored_times(
        &self,
        record: usize,
        channel: usize,
        enc: &TimeEncoding,
        rows: Range<u64>,
        already_read: Option<&SampleMatrix>,
    ) -> Result<Vec<i64>, DatasetError> {
        if enc.kind == TimeKind::Difference && rows.start > 0 {
            let prefix = self.read_record(record, 0..rows.end)?;
            let all = self.decode(record, enc, &prefix.column(channel))?;
            return Ok(all[rows.start as usize..].to_vec());
        }
        let column = match already_read {
            Some(m) => m.column(channel),
            None => self.read_record(record, rows.clone())?.column(channel),
        };
        self.decode(record, enc, &column)
    }

    fn uniform_times(&self, record: usize, enc: &TimeEncoding, rows: Range<u64>) -> Result<Vec<i64>, DatasetError> {
        rows.map(|i| enc.uniform_instant(i))
            .collect::<Result<_, _>>()
            .map_err(|source| DatasetError::Time { file_name: self.records[record].file_name.clone(), source })
    }

    /// Rows in the longest file of a group.
    pub fn group_rows(&self, group: &SignalGroup) -> u64 {
        group.time_file.iter().chain(group.members.iter().map(|m| &m.record)).map(|&i| self.records[i].rows).max().unwrap_or(0)
    }

    /// Timestamps and samples for `rows` of every member of a group.
    ///
    /// Members with their own time axis may differ in length; the range is
    /// clipped to each such member's rows and must lie within the longest.
    pub fn read_group(&self, group_id: usize, rows: Range<u64>) -> Result<GroupData, DatasetError> {
        let group = self.group(group_id)?;
        let total = self.group_rows(group);
        if rows.start > rows.end || rows.end > total {
            let file_name = format!("group {group_id}");
            return Err(DatasetError::Bin { file_name, source: BinError::OutOfBounds { start: rows.start, end: rows.end, rows: total } });
        }
        let (time_samples, shared) = match group.time_file {
            Some(t) => {
                let m = self.read_record(t, rows.clone())?;
                let enc = channel_encoding(&self.records[t], 0)?;
                let ts = self.stored_times(t, 0, &enc, rows.clone(), Some(&m))?;
                (Some(m), Some(ts))
            }
            None => (None, None),
        };
        let mut members = Vec::with_capacity(group.members.len());
        for m in &group.members {
            let own = self.records[m.record].rows;
            let range = match m.time {
                TimeSource::TimeFile(_) => rows.clone(),
                _ => rows.start.min(own)..rows.end.min(own),
            };
            let samples = self.read_record(m.record, range.clone())?;
            let timestamps = match &m.time {
                TimeSource::TimeFile(_) => shared.clone().unwrap_or_default(),
                TimeSource::TimeChannel(c) => self.stored_times(m.record, *c, &m.encoding, range.clone(), Some(&samples))?,
                TimeSource::Uniform { .. } => self.uniform_times(m.record, &m.encoding, range.clone())?,
            };
            let file_name = self.records[m.record].file_name.clone();
            members.push(MemberData { file_name, rows: range, timestamps, samples });
        }
        Ok(GroupData { group_id, rows, time_samples, shared_timestamps: shared, members })
    }

    /// All instants of one member.
    pub fn member_timestamps(&self, member: &Member) -> Result<Vec<i64>, DatasetError> {
        let rows = 0..self.records[member.record].rows;
        match &member.time {
            TimeSource::TimeFile(t) => self.stored_times(*t, 0, &member.encoding, rows, None),
            TimeSource::TimeChannel(c) => self.stored_times(member.record, *c, &member.encoding, rows, None),
            TimeSource::Uniform { .. } => self.uniform_times(member.record, &member.encoding, rows),
        }
    }

    /// Cross-file consistency checks. Findings only; never fails.
    ///
    /// Re-checks sizes and checksums, scans float data for NaN/Inf, decodes
    /// every time stream (monotonicity) and compares its last instant with
    /// `end_iso8601`.
    pub fn audit(&self, opts: &AuditOptions) -> ValidationReport {
        let mut report = self.report.clone();
        let mut readable = vec![true; self.records.len()];
        for (i, r) in self.records.iter().enumerate() {
            let path = r.file_name.clone();
            if let Err(e) = self.check_file(r) {
                report.error(&path, e.code(), e.to_string());
                readable[i] = false;
                continue;
            }
            let size = r.layout().expected_len();
            if size > opts.max_file_size {
                report.warning(&path, "large_file", format!("{size} bytes exceeds the {} byte guideline", opts.max_file_size));
            }
            if let Some(expected) = &r.checksum {
                let kind = r.checksum_type.as_deref().unwrap_or("md5");
                match file_checksum(&self.file_path(i), kind) {
                    Ok(Some(actual)) if actual.eq_ignore_ascii_case(expected) => {}
                    Ok(Some(actual)) => report.error(&path, "checksum_mismatch", format!("{kind} is {actual}, metadata says {expected}")),
                    Ok(None) => report.warning(&path, "unsupported_checksum_type", format!("cannot verify {kind:?} checksums")),
                    Err(e) => report.error(&path, "io_error", e.to_string()),
                }
            }
            if r.data_type == DataType::Float {
                match self.count_non_finite(i) {
                    Ok(0) => {}
                    Ok(n) => report.warning(&path, "non_finite_sample", format!("{n} NaN or infinite values")),
                    Err(e) => report.error(&path, e.code(), e.to_string()),
                }
            }
        }

        for group in &self.groups {
            if let Some(t) = group.time_file {
                if readable[t] {
                    let r = &self.records[t];
                    match channel_encoding(r, 0).and_then(|enc| self.stored_times(t, 0, &enc, 0..r.rows, None).map(|ts| (enc, ts))) {
                        Ok((enc, ts)) => check_time_axis(&mut report, r, &enc, &ts, opts),
                        Err(e) => report.error(&r.file_name, e.code(), e.to_string()),
                    }
                }
            }
            for m in &group.members {
                let source = match m.time {
                    TimeSource::TimeFile(t) => t,
                    _ => m.record,
                };
                if !readable[source] || !readable[m.record] {
                    continue;
                }
                let r = &self.records[m.record];
                match self.member_timestamps(m) {
                    Ok(ts) => {
                        // time files report their own axis above
                        let axis_checked = matches!(m.time, TimeSource::TimeFile(_));
                        if axis_checked {
                            check_end(&mut report, r, &m.encoding, &ts, opts);
                        } else {
                            check_time_axis(&mut report, r, &m.encoding, &ts, opts);
                        }
                    }
                    // a broken time file was already reported with its own axis
                    Err(_) if matches!(m.time, TimeSource::TimeFile(_)) => {}
                    Err(e) => report.error(&r.file_name, e.code(), e.to_string()),
                }
            }
        }
        report
    }

    fn count_non_finite(&self, record: usize) -> Result<usize, DatasetError> {
        const BLOCK: u64 = 1 << 16;
        let rows = self.records[record].rows;
        let mut count = 0;
        let mut start = 0;
        while start < rows {
            let end = (start + BLOCK).min(rows);
            count += self.read_record(record, start..end)?.non_finite_count();
            start = end;
        }
        Ok(count)
    }
}

fn check_time_axis(report: &mut ValidationReport, r: &FileRecord, enc: &TimeEncoding, ts: &[i64], opts: &AuditOptions) {
    if let Some(i) = ts.windows(2).position(|w| w[1] < w[0]) {
        report.error(&r.file_name, "nonmonotonic_time", format!("time decreases between rows {i} and {}", i + 1));
    }
    check_end(report, r, enc, ts, opts);
}

fn check_end(report: &mut ValidationReport, r: &FileRecord, enc: &TimeEncoding, ts: &[i64], opts: &AuditOptions) {
    let Some(&last) = ts.last() else {
        return;
    };
    let tolerance = opts.tolerance_ns.unwrap_or_else(|| default_tolerance(enc));
    match r.end_iso8601.timeline_nanos() {
        Ok(end) => {
            let diff = i128::from(last) - i128::from(end);
            if diff.abs() > i128::from(tolerance) {
                let computed = end_timestamp(&r.start_iso8601, last).map_or_else(|_| format!("{last} ns"), |t| t.to_string());
                report.error(
                    format!("{}.end_iso8601", r.file_name),
                    "end_timestamp_mismatch",
                    format!(
                        "end_iso8601 is {} but the last sample is at {computed} ({diff} ns off, tolerance {tolerance} ns)",
                        r.end_iso8601
                    ),
                );
            }
        }
        Err(e) => report.error(&r.file_name, e.code(), e.to_string()),
    }
}

/// Loads and audits a recording without requiring it to open cleanly:
/// metadata problems and damaged files all end up in the report.
pub fn audit_path(metadata_path: impl AsRef<Path>, opts: &AuditOptions) -> ValidationReport {
    let path = metadata_path.as_ref();
    match Recording::load(path) {
        Ok(rec) => rec.audit(opts),
        Err(DatasetError::Invalid(report)) => report,
        Err(e) => {
            let mut report = ValidationReport::new();
            report.error(path.display().to_string(), e.code(), e.to_string());
            report
        }
    }
}

/// Renders a last-sample instant as an end timestamp in the start's offset,
/// with at least millisecond digits.
pub fn end_timestamp(start: &Iso8601Timestamp, last: i64) -> Result<Iso8601Timestamp, TimeError> {
    Iso8601Timestamp::from_timeline_nanos(last, start.offset(), start.frac_digits().max(3))
}

/// Hex digest of `bytes`, or `None` for an unknown checksum type.
pub fn checksum_hex(kind: &str, bytes: &[u8]) -> Option<String> {
    match kind.to_ascii_lowercase().as_str() {
        "md5" => Some(hex::encode(Md5::digest(bytes))),
        "sha256" | "sha-256" => Some(hex::encode(Sha256::digest(bytes))),
        _ => None,
    }
}

fn file_checksum(path: &Path, kind: &str) -> io::Result<Option<String>> {
    fn stream<D: Digest>(path: &Path) -> io::Result<String> {
        let mut reader = BufReader::new(File::open(path)?);
        let mut hasher = D::new();
        let mut buf = vec![0u8; 1 << 16];
        loop {
            let n = reader.read(&mut buf)?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
        }
        Ok(hex::encode(hasher.finalize()))
    }
    match kind.to_ascii_lowercase().as_str() {
        "md5" => stream::<Md5>(path).map(Some),
        "sha256" | "sha-256" => stream::<Sha256>(path).map(Some),
        _ => Ok(None),
    }
}

/// One binary file to be written by [`create_recording`].
#[derive(Debug, Clone)]
pub struct FileSpec {
    pub record: FileRecord,
    pub samples: SampleMatrix,
    /// When set, these instants are encoded into the file's time channel
    /// (or into the time file itself), replacing its stored values.
    pub instants: Option<Vec<i64>>,
}

impl FileSpec {
    pub fn new(record: FileRecord, samples: SampleMatrix) -> Self {
        Self { record, samples, instants: None }
    }

    pub fn with_instants(mut self, instants: Vec<i64>) -> Self {
        self.instants = Some(instants);
        self
    }

    /// A time file holding `instants`; the stored column is produced on create.
    pub fn time_file(record: FileRecord, instants: Vec<i64>) -> Self {
        let samples = SampleMatrix::empty(1, record.format());
        Self { record, samples, instants: Some(instants) }
    }
}

#[derive(Debug, Clone, Default)]
pub struct GroupSpec {
    pub time_file: Option<FileSpec>,
    pub members: Vec<FileSpec>,
}

#[derive(Debug, Clone)]
pub struct CreateOptions {
    pub metadata_name: String,
    pub layout: SerializeLayout,
    /// Allowed distance between `end_iso8601` and the last decoded instant;
    /// defaults as for [`AuditOptions::tolerance_ns`].
    pub tolerance_ns: Option<i64>,
    /// Truncate instants that do not fit the time unit instead of failing.
    pub truncate_time: bool,
}

impl Default for CreateOptions {
    fn default() -> Self {
        Self {
            metadata_name: "recording_metadata.json".into(),
            layout: SerializeLayout::GroupedByCommonPrefix,
            tolerance_ns: None,
            truncate_time: false,
        }
    }
}

fn encode_into(spec: &FileSpec, channel: usize, truncate: bool) -> Result<SampleMatrix, DatasetError> {
    let rec = &spec.record;
    let instants = spec.instants.as_deref().unwrap_or_default();
    let enc = channel_encoding(rec, channel)?;
    let raw = encode_timestamps(instants, &enc, rec.format(), truncate)
        .map_err(|source| DatasetError::Time { file_name: rec.file_name.clone(), source })?;
    let bin_err = |source| DatasetError::Bin { file_name: rec.file_name.clone(), source };
    if is_time_file(rec) {
        let stored = numbers_to_samples(&raw, rec.format().data_type(), rec.bits);
        return SampleMatrix::from_stored(1, stored, rec.scale_factors.clone()).map_err(bin_err);
    }
    let mut m = spec.samples.clone();
    if m.rows() != instants.len() {
        return Err(DatasetError::Inconsistent(format!("{}: {} instants for {} rows", rec.file_name, instants.len(), m.rows())));
    }
    m.set_column(channel, &raw).map_err(bin_err)?;
    Ok(m)
}

fn numbers_to_samples(raw: &[Number], data_type: DataType, bits: u32) -> crate::binio::Samples {
    use crate::binio::Samples;
    match (data_type, bits) {
        (DataType::Int, _) => Samples::Int(raw.iter().map(|n| if let Number::Int(v) = n { *v } else { 0 }).collect()),
        (DataType::UInt, _) => Samples::UInt(raw.iter().map(|n| if let Number::UInt(v) = n { *v } else { 0 }).collect()),
        (DataType::Float, 32) => Samples::F32(raw.iter().map(|n| n.as_f64() as f32).collect()),
        (DataType::Float, _) => Samples::F64(raw.iter().map(|n| n.as_f64()).collect()),
    }
}

/// Writes metadata and binary files for a new recording into `out_dir`.
///
/// Everything is checked and encoded in memory first; nothing is written
/// unless the whole recording is consistent. `end_iso8601` of every record
/// must match its last instant within tolerance (see
/// [`FileSpec`] and [`end_timestamp`] for deriving it).
pub fn create_recording(groups: &[GroupSpec], out_dir: impl AsRef<Path>, opts: &CreateOptions) -> Result<Recording, DatasetError> {
    let out_dir = out_dir.as_ref();
    let mut records = Vec::new();
    let mut matrices = Vec::new();
    for (gid, g) in groups.iter().enumerate() {
        if let Some(tf) = &g.time_file {
            if !is_time_file(&tf.record) {
                return Err(DatasetError::Inconsistent(format!(
                    "{}: a time file must have the single channel \"time\"",
                    tf.record.file_name
                )));
            }
        }
        for spec in g.time_file.iter().chain(&g.members) {
            let rec = &spec.record;
            let mut record = rec.clone();
            record.group_id = gid;
            let matrix = match (&spec.instants, rec.channel_index(TIME_CHANNEL)) {
                (Some(_), Some(c)) => encode_into(spec, c, opts.truncate_time)?,
                (Some(_), None) => {
                    return Err(DatasetError::Inconsistent(format!("{}: instants given but the file has no time channel", rec.file_name)))
                }
                (None, _) => spec.samples.clone(),
            };
            if matrix.n_channels() != rec.channels.len() || matrix.rows() as u64 != rec.rows {
                return Err(DatasetError::Inconsistent(format!(
                    "{}: matrix is {}x{} but the record declares {} rows and {} channels",
                    rec.file_name,
                    matrix.rows(),
                    matrix.n_channels(),
                    rec.rows,
                    rec.channels.len()
                )));
            }
            if matrix.scale_factors() != rec.scale_factors.as_deref() {
                return Err(DatasetError::Inconsistent(format!("{}: scale factors differ between matrix and record", rec.file_name)));
            }
            records.push(record);
            matrices.push(matrix);
        }
    }

    let mut names = std::collections::HashSet::new();
    for r in &records {
        if !names.insert(r.file_name.as_str()) {
            return Err(DatasetError::Inconsistent(format!("file_name {:?} used twice", r.file_name)));
        }
    }

    let mut blobs = Vec::with_capacity(records.len());
    for (r, m) in records.iter_mut().zip(&matrices) {
        let bytes = binio::write_rows(m, &r.layout()).map_err(|source| DatasetError::Bin { file_name: r.file_name.clone(), source })?;
        if let Some(kind) = r.checksum_type.clone() {
            if let Some(actual) = checksum_hex(&kind, &bytes) {
                match &r.checksum {
                    Some(expected) if !expected.eq_ignore_ascii_case(&actual) => {
                        return Err(DatasetError::Inconsistent(format!(
                            "{}: checksum {expected} does not match data ({actual})",
                            r.file_name
                        )))
                    }
                    Some(_) => {}
                    None => r.checksum = Some(actual),
                }
            }
        }
        blobs.push(bytes);
    }

    let built = build_groups(&records)?;
    for g in &built {
        for m in &g.members {
            let source = match m.time {
                TimeSource::TimeFile(t) => t,
                _ => m.record,
            };
            let rec = &records[m.record];
            let time_err = |source| DatasetError::Time { file_name: rec.file_name.clone(), source };
            let ts = match &m.time {
                TimeSource::Uniform { .. } => {
                    (0..rec.rows).map(|i| m.encoding.uniform_instant(i)).collect::<Result<Vec<_>, _>>().map_err(time_err)?
                }
                TimeSource::TimeFile(_) => {
                    decode_timestamps(&matrices[source].column(0), &m.encoding, rec.rows as usize).map_err(time_err)?
                }
                TimeSource::TimeChannel(c) => {
                    decode_timestamps(&matrices[source].column(*c), &m.encoding, rec.rows as usize).map_err(time_err)?
                }
            };
            if let Some(i) = ts.windows(2).position(|w| w[1] < w[0]) {
                return Err(DatasetError::Time { file_name: rec.file_name.clone(), source: TimeError::NonMonotonic { index: i + 1 } });
            }
            let tolerance = opts.tolerance_ns.unwrap_or_else(|| default_tolerance(&m.encoding));
            let check = |r: &FileRecord| -> Result<(), DatasetError> {
                let Some(&last) = ts.last() else { return Ok(()) };
                let end = r.end_iso8601.timeline_nanos().map_err(|source| DatasetError::Time { file_name: r.file_name.clone(), source })?;
                if (i128::from(last) - i128::from(end)).abs() > i128::from(tolerance) {
                    return Err(DatasetError::RedundantFieldConflict {
                        file_name: r.file_name.clone(),
                        supplied: r.end_iso8601.to_string(),
                        computed: end_timestamp(&r.start_iso8601, last).map_or_else(|_| last.to_string(), |t| t.to_string()),
                    });
                }
                Ok(())
            };
            check(rec)?;
            if let TimeSource::TimeFile(t) = m.time {
                check(&records[t])?;
            }
        }
    }

    let text = serialize_metadata(&records, opts.layout)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for (r, bytes) in records.iter().zip(&blobs) {
        let path = out_dir.join(&r.file_name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, bytes).map_err(io_err(&path))?;
    }
    let meta_path = out_dir.join(&opts.metadata_name);
    fs::write(&meta_path, text).map_err(io_err(&meta_path))?;
    Recording::open(&meta_path)
}
