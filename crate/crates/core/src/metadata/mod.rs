//! Metadata documents: parsing, flattening, validation and serialization.
//!
//! Parsing keeps the JSON tree as written. [`flatten`] resolves inheritance
//! into one [`FlatRecord`] per binary file, [`validate`] checks those against
//! the mandatory field set, and [`FileRecord`] is the typed form used by the
//! rest of the crate. [`serialize_metadata`] goes the other way and can hoist
//! shared fields back up the tree.

mod flatten;
mod node;
mod record;
mod serialize;
mod validate;

use thiserror::Error;

pub use flatten::{flatten, AliasUse, FlatField, FlatRecord};
pub use node::{emit, parse_metadata, MetadataDocument, Node, DEFAULT_INDENT};
pub use record::{Compression, FileRecord};
pub use serialize::{serialize_metadata, serialize_metadata_with, SerializeLayout};
pub use validate::{validate, Severity, ValidationReport, Violation};

pub const SUBJECT_ID: &str = "subject_id";
pub const STUDY_ID: &str = "study_id";
pub const DEVICE_ID: &str = "device_id";
pub const ENDIANNESS: &str = "endianness";
pub const METADATA_VERSION: &str = "metadata_version";
pub const START_ISO8601: &str = "start_iso8601";
pub const END_ISO8601: &str = "end_iso8601";
pub const ROWS: &str = "rows";
pub const FILE_NAME: &str = "file_name";
pub const CHANNELS: &str = "channels";
pub const UNITS: &str = "units";
pub const DATA_TYPE: &str = "data_type";
pub const BITS: &str = "bits";

pub const COMPRESSION: &str = "compression";
pub const SAMPLING_RATE: &str = "sampling_rate";
pub const SCALE_FACTORS: &str = "scale_factors";
pub const SENSOR_TYPE: &str = "sensor_type";
pub const CHECKSUM: &str = "checksum";
pub const CHECKSUM_TYPE: &str = "checksum_type";

/// The thirteen fields every flattened record must carry, in canonical order.
pub const MANDATORY_FIELDS: [&str; 13] = [
    SUBJECT_ID,
    STUDY_ID,
    DEVICE_ID,
    ENDIANNESS,
    METADATA_VERSION,
    START_ISO8601,
    END_ISO8601,
    ROWS,
    FILE_NAME,
    CHANNELS,
    UNITS,
    DATA_TYPE,
    BITS,
];

/// Recognized optional fields, in canonical order after the mandatory ones.
pub const OPTIONAL_FIELDS: [&str; 6] = [COMPRESSION, SAMPLING_RATE, SCALE_FACTORS, SENSOR_TYPE, CHECKSUM, CHECKSUM_TYPE];

/// The schema version this crate writes and fully understands.
pub const SCHEMA_VERSION: &str = "0.1";

const ALIASES: [(&str, &str); 2] = [("endianess", ENDIANNESS), ("filename", FILE_NAME)];

/// Canonical spelling of a recognized field name, accepting aliases.
pub fn canonical_field(name: &str) -> Option<&'static str> {
    MANDATORY_FIELDS
        .iter()
        .chain(OPTIONAL_FIELDS.iter())
        .find(|f| **f == name)
        .copied()
        .or_else(|| ALIASES.iter().find(|(alias, _)| *alias == name).map(|(_, c)| *c))
}

pub fn is_recognized(name: &str) -> bool {
    MANDATORY_FIELDS.contains(&name) || OPTIONAL_FIELDS.contains(&name)
}

#[derive(Debug, Error)]
pub enum MetadataError {
    #[error("metadata is not valid UTF-8 (first bad byte at offset {offset})")]
    Encoding { offset: usize },
    #[error("JSON syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("metadata root must be a JSON object")]
    RootNotMapping,
    #[error("file_name at {path} is not a string")]
    FileNameNotString { path: String },
    #[error("{path} spells field {field:?} twice (canonical name and alias)")]
    AliasConflict { path: String, field: String },
    #[error("nothing_to_serialize: no records given")]
    NothingToSerialize,
    #[error("records do not validate:\n{0}")]
    Invalid(ValidationReport),
}
