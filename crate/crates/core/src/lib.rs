//! Time Series Data Format (TSDF).
//!
//! A recording is a directory holding one JSON metadata file and one or more
//! raw binary sample files. The metadata is a tree; every mapping carrying a
//! `file_name` describes one binary file and inherits all fields set on its
//! ancestors. Binary files are headerless, multiplexed (row-major) matrices.
//!
//! Module map:
//!
//! * [`metadata`]: parse, flatten, validate and serialize metadata documents
//! * [`timecodec`]: ISO 8601 timestamps and the four time encodings
//! * [`binio`]: raw sample file reading and writing
//! * [`dataset`]: whole recordings, signal groups, audits
//! * [`convert`]: CSV import/export, synthetic data, storage benchmark
//! * [`indexer`]: relational index over directories of recordings
//! * [`reference`]: the reference example datasets used in tests and demos

pub mod binio;
pub mod convert;
pub mod dataset;
pub mod indexer;
pub mod metadata;
pub mod reference;
pub mod timecodec;

pub use binio::{BinaryLayout, DataType, Endianness, Number, NumberFormat, SampleMatrix, Samples};
pub use dataset::{create_recording, Recording};
pub use metadata::{flatten, parse_metadata, serialize_metadata, validate, FileRecord, FlatRecord, MetadataDocument};
pub use timecodec::{Iso8601Timestamp, TimeEncoding, TimeKind, TimeUnit, UtcOffset};
