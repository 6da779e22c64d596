use std::fmt;

use indexmap::IndexMap;

use super::flatten::FlatRecord;
use super::node::Node;
use super::validate::ValidationReport;
use super::*;
use crate::binio::{BinaryLayout, DataType, Endianness, NumberFormat};
use crate::timecodec::{parse_iso8601, Iso8601Timestamp};

/// Value of the `compression` field: the time encoding of a time stream,
/// or `none` for uniformly sampled data.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Compression {
    None,
    Relative,
    Absolute,
    Difference,
    Other(String),
}

impl Compression {
    pub fn parse(s: &str) -> Self {
        match s {
            "none" => Compression::None,
            "relative" => Compression::Relative,
            "absolute" => Compression::Absolute,
            "difference" => Compression::Difference,
            other => Compression::Other(other.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Compression::None => "none",
            Compression::Relative => "relative",
            Compression::Absolute => "absolute",
            Compression::Difference => "difference",
            Compression::Other(s) => s,
        }
    }
}

impl fmt::Display for Compression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A fully resolved, checked description of one binary file.
#[derive(Debug, Clone, PartialEq)]
pub struct FileRecord {
    pub file_name: String,
    pub subject_id: String,
    pub study_id: String,
    pub device_id: String,
    pub endianness: Endianness,
    pub metadata_version: String,
    pub start_iso8601: Iso8601Timestamp,
    pub end_iso8601: Iso8601Timestamp,
    pub rows: u64,
    pub channels: Vec<String>,
    pub units: Vec<String>,
    pub data_type: DataType,
    pub bits: u32,
    pub compression: Option<Compression>,
    pub sampling_rate: Option<f64>,
    pub scale_factors: Option<Vec<f64>>,
    pub sensor_type: Option<String>,
    pub checksum: Option<String>,
    pub checksum_type: Option<String>,
    pub group_id: usize,
    /// Unrecognized fields, verbatim.
    pub extra_fields: IndexMap<String, Node>,
}

impl FileRecord {
    /// Checks a flattened record and converts it; the report carries every
    /// finding (warnings included) when conversion fails.
    pub fn from_flat(rec: &FlatRecord) -> Result<FileRecord, ValidationReport> {
        let mut report = ValidationReport::new();
        match check_record(rec, &mut report) {
            Some(r) if report.is_conformant() => Ok(r),
            _ => Err(report),
        }
    }

    pub fn format(&self) -> NumberFormat {
        NumberFormat::new(self.data_type, self.bits).expect("bits checked at construction")
    }

    pub fn layout(&self) -> BinaryLayout {
        BinaryLayout {
            format: self.format(),
            endianness: self.endianness,
            n_channels: self.channels.len(),
            rows: self.rows,
            scale_factors: self.scale_factors.clone(),
        }
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == label)
    }

    /// All fields in canonical order: mandatory, optional, then extras.
    pub fn to_fields(&self) -> IndexMap<String, Node> {
        let mut m = IndexMap::new();
        let mut put = |k: &str, v: Node| {
            m.insert(k.to_string(), v);
        };
        put(SUBJECT_ID, Node::String(self.subject_id.clone()));
        put(STUDY_ID, Node::String(self.study_id.clone()));
        put(DEVICE_ID, Node::String(self.device_id.clone()));
        put(ENDIANNESS, Node::String(self.endianness.as_str().into()));
        put(METADATA_VERSION, Node::String(self.metadata_version.clone()));
        put(START_ISO8601, Node::String(self.start_iso8601.to_string()));
        put(END_ISO8601, Node::String(self.end_iso8601.to_string()));
        put(ROWS, Node::Integer(self.rows as i64));
        put(FILE_NAME, Node::String(self.file_name.clone()));
        put(CHANNELS, Node::strings(self.channels.iter().cloned()));
        put(UNITS, Node::strings(self.units.iter().cloned()));
        put(DATA_TYPE, Node::String(self.data_type.as_str().into()));
        put(BITS, Node::Integer(i64::from(self.bits)));
        if let Some(c) = &self.compression {
            put(COMPRESSION, Node::String(c.as_str().into()));
        }
        if let Some(r) = self.sampling_rate {
            put(SAMPLING_RATE, Node::number(r));
        }
        if let Some(sf) = &self.scale_factors {
            put(SCALE_FACTORS, Node::List(sf.iter().map(|&v| Node::number(v)).collect()));
        }
        if let Some(s) = &self.sensor_type {
            put(SENSOR_TYPE, Node::String(s.clone()));
        }
        if let Some(s) = &self.checksum {
            put(CHECKSUM, Node::String(s.clone()));
        }
        if let Some(s) = &self.checksum_type {
            put(CHECKSUM_TYPE, Node::String(s.clone()));
        }
        for (k, v) in &self.extra_fields {
            if !m.contains_key(k) {
                m.insert(k.clone(), v.clone());
            }
        }
        m
    }

    pub fn to_flat(&self) -> FlatRecord {
        FlatRecord::from_fields(self.group_id, format!("<{}>", self.file_name), self.to_fields())
    }

    /// Field-for-field equality ignoring `group_id`.
    pub fn same_content(&self, other: &FileRecord) -> bool {
        let mut a = self.clone();
        a.group_id = other.group_id;
        a.extra_fields.sort_keys();
        let mut b = other.clone();
        b.extra_fields.sort_keys();
        a == b
    }
}

fn path_of(rec: &FlatRecord, field: &str) -> String {
    rec.fields.get(field).map_or_else(|| format!("{}.{field}", rec.path), |f| f.path.clone())
}

struct Checker<'a> {
    rec: &'a FlatRecord,
    report: &'a mut ValidationReport,
    failed: bool,
}

impl Checker<'_> {
    fn err(&mut self, field: &str, code: impl Into<String>, msg: impl Into<String>) {
        self.failed = true;
        self.report.error(path_of(self.rec, field), code, msg);
    }

    fn required(&mut self, field: &str) -> Option<&Node> {
        match self.rec.get(field) {
            Some(v) => Some(v),
            None => {
                self.failed = true;
                self.report.error(
                    format!("{}.{field}", self.rec.path),
                    format!("missing_mandatory:{field}"),
                    format!("mandatory field {field} is missing"),
                );
                None
            }
        }
    }

    fn string(&mut self, field: &str, node: Option<&Node>) -> Option<String> {
        match node? {
            Node::String(s) if s.is_empty() => {
                self.err(field, format!("empty_mandatory:{field}"), format!("{field} is empty"));
                None
            }
            Node::String(s) => Some(s.clone()),
            other => {
                self.err(field, format!("ill_typed:{field}"), format!("{field} must be a string, found {other}"));
                None
            }
        }
    }

    fn optional_string(&mut self, field: &str) -> Option<String> {
        match self.rec.get(field)? {
            Node::String(s) => Some(s.clone()),
            other => {
                self.err(field, format!("ill_typed:{field}"), format!("{field} must be a string, found {other}"));
                None
            }
        }
    }

    fn string_list(&mut self, field: &str, node: Option<&Node>) -> Option<Vec<String>> {
        let node = node?;
        let Some(items) = node.as_list() else {
            self.err(field, format!("ill_typed:{field}"), format!("{field} must be a list of strings, found {node}"));
            return None;
        };
        if items.is_empty() {
            self.err(field, format!("empty_mandatory:{field}"), format!("{field} is empty"));
            return None;
        }
        let strings: Option<Vec<String>> = items.iter().map(|n| n.as_str().map(str::to_string)).collect();
        if strings.is_none() {
            self.err(field, format!("ill_typed:{field}"), format!("{field} must contain only strings"));
        }
        strings
    }

    fn timestamp(&mut self, field: &str, node: Option<&Node>) -> Option<Iso8601Timestamp> {
        let text = self.string(field, node)?;
        match parse_iso8601(&text) {
            Ok(t) => Some(t),
            Err(e) => {
                self.err(field, format!("malformed_iso8601:{field}"), e.to_string());
                None
            }
        }
    }
}

/// Validates one flattened record into `report`; returns the typed record
/// when no errors were found for it.
pub(crate) fn check_record(rec: &FlatRecord, report: &mut ValidationReport) -> Option<FileRecord> {
    let mut c = Checker { rec, report, failed: false };

    let subject_id = c.required(SUBJECT_ID).cloned();
    let subject_id = c.string(SUBJECT_ID, subject_id.as_ref());
    let study_id = c.required(STUDY_ID).cloned();
    let study_id = c.string(STUDY_ID, study_id.as_ref());
    let device_id = c.required(DEVICE_ID).cloned();
    let device_id = c.string(DEVICE_ID, device_id.as_ref());

    let endianness = c.required(ENDIANNESS).cloned();
    let endianness = c.string(ENDIANNESS, endianness.as_ref()).and_then(|s| match s.parse::<Endianness>() {
        Ok(e) => Some(e),
        Err(msg) => {
            c.err(ENDIANNESS, "unknown_endianness", msg);
            None
        }
    });

    let version = c.required(METADATA_VERSION).cloned();
    let metadata_version = c.string(METADATA_VERSION, version.as_ref());
    if let Some(v) = &metadata_version {
        if v != SCHEMA_VERSION {
            c.report.warning(
                path_of(rec, METADATA_VERSION),
                "unsupported_metadata_version",
                format!("metadata_version {v:?}; this tool implements {SCHEMA_VERSION:?}"),
            );
        }
    }

    let start = c.required(START_ISO8601).cloned();
    let start = c.timestamp(START_ISO8601, start.as_ref());
    let end = c.required(END_ISO8601).cloned();
    let end = c.timestamp(END_ISO8601, end.as_ref());
    if let (Some(s), Some(e)) = (&start, &end) {
        if let (Ok(sn), Ok(en)) = (s.epoch_nanos(), e.epoch_nanos()) {
            if sn > en {
                c.err(END_ISO8601, "start_after_end", format!("start {s} is after end {e}"));
            }
        }
    }

    let rows = match c.required(ROWS) {
        Some(Node::Integer(n)) if *n >= 0 => Some(*n as u64),
        Some(other) => {
            let msg = format!("rows must be a non-negative integer, found {other}");
            c.err(ROWS, "ill_typed:rows", msg);
            None
        }
        None => None,
    };

    let file_name = c.required(FILE_NAME).cloned();
    let file_name = c.string(FILE_NAME, file_name.as_ref());
    if let Some(name) = &file_name {
        let b = name.as_bytes();
        if name.starts_with('/') || name.starts_with('\\') || (b.len() >= 2 && b[1] == b':' && b[0].is_ascii_alphabetic()) {
            c.err(FILE_NAME, "absolute_path", format!("file_name {name:?} must be relative to the metadata file"));
        }
    }

    let channels = c.required(CHANNELS).cloned();
    let channels = c.string_list(CHANNELS, channels.as_ref());
    let units = c.required(UNITS).cloned();
    let units = c.string_list(UNITS, units.as_ref());
    if let (Some(ch), Some(u)) = (&channels, &units) {
        if ch.len() != u.len() {
            c.err(UNITS, "channels_units_length_mismatch", format!("{} channels but {} units", ch.len(), u.len()));
        }
    }

    let data_type = c.required(DATA_TYPE).cloned();
    let data_type = c.string(DATA_TYPE, data_type.as_ref()).and_then(|s| match s.parse::<DataType>() {
        Ok(d) => Some(d),
        Err(msg) => {
            c.err(DATA_TYPE, "unknown_data_type", msg);
            None
        }
    });

    let bits = match c.required(BITS) {
        Some(Node::Integer(b)) if matches!(b, 8 | 16 | 32 | 64) => Some(*b as u32),
        Some(other) => {
            let msg = format!("bits must be one of 8, 16, 32, 64, found {other}");
            c.err(BITS, "unsupported_bits", msg);
            None
        }
        None => None,
    };
    if let (Some(DataType::Float), Some(b)) = (data_type, bits) {
        if b != 32 && b != 64 {
            c.err(BITS, "unsupported_bits", format!("float data must be 32 or 64 bits, found {b}"));
        }
    }

    let compression = match rec.get(COMPRESSION) {
        None => None,
        Some(Node::String(s)) => {
            let comp = Compression::parse(s);
            if let Compression::Other(v) = &comp {
                c.report.warning(
                    path_of(rec, COMPRESSION),
                    "unrecognized_compression",
                    format!("compression {v:?} is not one of none, relative, absolute, difference"),
                );
            }
            Some(comp)
        }
        Some(other) => {
            c.err(COMPRESSION, "ill_typed:compression", format!("compression must be a string, found {other}"));
            None
        }
    };

    let sampling_rate = match rec.get(SAMPLING_RATE) {
        None => None,
        Some(node) => match node.as_f64() {
            Some(r) if r.is_finite() && r > 0.0 => Some(r),
            Some(r) => {
                c.err(SAMPLING_RATE, "non_positive_sampling_rate", format!("sampling_rate must be positive, found {r}"));
                None
            }
            None => {
                c.err(SAMPLING_RATE, "ill_typed:sampling_rate", format!("sampling_rate must be a number, found {node}"));
                None
            }
        },
    };

    let scale_factors = match rec.get(SCALE_FACTORS) {
        None => None,
        Some(node) => {
            let values: Option<Vec<f64>> = node.as_list().and_then(|l| l.iter().map(Node::as_f64).collect());
            match values {
                None => {
                    c.err(SCALE_FACTORS, "ill_typed:scale_factors", "scale_factors must be a list of numbers");
                    None
                }
                Some(v) => {
                    if let Some(bad) = v.iter().find(|x| !x.is_finite() || **x == 0.0) {
                        c.err(SCALE_FACTORS, "invalid_scale_factor", format!("scale factor {bad} is not a finite non-zero number"));
                    }
                    if let Some(ch) = &channels {
                        if ch.len() != v.len() {
                            c.err(
                                SCALE_FACTORS,
                                "scale_factors_length_mismatch",
                                format!("{} scale factors for {} channels", v.len(), ch.len()),
                            );
                        }
                    }
                    Some(v)
                }
            }
        }
    };

    let sensor_type = c.optional_string(SENSOR_TYPE);
    let checksum = c.optional_string(CHECKSUM);
    let checksum_type = c.optional_string(CHECKSUM_TYPE);

    let mut extra_fields = IndexMap::new();
    for (name, field) in &rec.fields {
        if !is_recognized(name) {
            c.report.warning(
                &field.path,
                format!("unrecognized_field:{name}"),
                format!("field {name:?} is not part of the recognized vocabulary"),
            );
            extra_fields.insert(name.clone(), field.value.clone());
        }
    }
    for alias in &rec.aliases {
        c.report.warning(
            &alias.path,
            format!("alias_field:{}", alias.alias),
            format!("{:?} accepted as an alternative spelling of {:?}", alias.alias, alias.canonical),
        );
    }

    if c.failed {
        return None;
    }
    Some(FileRecord {
        file_name: file_name?,
        subject_id: subject_id?,
        study_id: study_id?,
        device_id: device_id?,
        endianness: endianness?,
        metadata_version: metadata_version?,
        start_iso8601: start?,
        end_iso8601: end?,
        rows: rows?,
        channels: channels?,
        units: units?,
        data_type: data_type?,
        bits: bits?,
        compression,
        sampling_rate,
        scale_factors,
        sensor_type,
        checksum,
        checksum_type,
        group_id: rec.group_id,
        extra_fields,
    })
}
