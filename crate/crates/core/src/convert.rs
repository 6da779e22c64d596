//! CSV import and export, synthetic recordings and the storage benchmark.

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::binio::{DataType, Endianness, Number, NumberFormat, SampleMatrix, Samples};
use crate::dataset::{create_recording, end_timestamp, CreateOptions, DatasetError, FileSpec, GroupSpec, Recording};
use crate::metadata::{Compression, FileRecord, SCHEMA_VERSION};
use crate::timecodec::{decode_timestamps, encode_timestamps, Iso8601Timestamp, TimeEncoding, TimeError, TimeKind, TimeUnit, UtcOffset};

#[derive(Debug, Error)]
pub enum ConvertError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("CSV line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("CSV line {line}, column {column:?}: cannot parse {value:?} as a number")]
    Parse { line: u64, column: String, value: String },
    #[error("CSV line {line}, column {column:?}: {source}")]
    BadTime { line: u64, column: String, source: TimeError },
    #[error("CSV line {line}: {actual} fields, header has {expected}")]
    Ragged { line: u64, expected: usize, actual: usize },
    #[error("mapped column {0:?} is not in the CSV header")]
    UnknownColumn(String),
    #[error("bad column mapping {0:?}; expected column=label:unit")]
    BadMapping(String),
    #[error("CSV line {line}: time value repeats the previous row")]
    DuplicateTime { line: u64 },
    #[error("CSV line {line}: time value is smaller than the previous row")]
    NonMonotonic { line: u64 },
    #[error("group {0} mixes files with different time axes; select one file")]
    MixedTimeAxes(usize),
    #[error("{0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Time(#[from] TimeError),
}

impl ConvertError {
    pub fn code(&self) -> &'static str {
        match self {
            ConvertError::Io { .. } => "io_error",
            ConvertError::Csv { .. } => "csv_syntax",
            ConvertError::Parse { .. } => "unparseable_number",
            ConvertError::BadTime { .. } => "bad_time_value",
            ConvertError::Ragged { .. } => "ragged_row",
            ConvertError::UnknownColumn(_) => "unknown_column",
            ConvertError::BadMapping(_) => "bad_mapping",
            ConvertError::DuplicateTime { .. } => "duplicate_time",
            ConvertError::NonMonotonic { .. } => "nonmonotonic_time",
            ConvertError::MixedTimeAxes(_) => "mixed_time_axes",
            ConvertError::InvalidSpec(_) => "invalid_spec",
            ConvertError::Dataset(e) => e.code(),
            ConvertError::Time(e) => e.code(),
        }
    }

    pub fn is_io(&self) -> bool {
        match self {
            ConvertError::Io { .. } => true,
            ConvertError::Dataset(e) => e.is_io(),
            _ => false,
        }
    }
}

/// CSV dialect. Nothing is guessed from the locale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvDialect {
    pub delimiter: u8,
    pub decimal: u8,
    pub quote: u8,
}

impl Default for CsvDialect {
    fn default() -> Self {
        Self { delimiter: b',', decimal: b'.', quote: b'"' }
    }
}

impl CsvDialect {
    fn check(&self) -> Result<(), ConvertError> {
        if self.delimiter == self.decimal || self.delimiter == self.quote || self.decimal == self.quote {
            return Err(ConvertError::InvalidSpec("delimiter, decimal mark and quote must differ".into()));
        }
        Ok(())
    }

    fn number_text(&self, text: &str) -> String {
        if self.decimal == b'.' {
            text.to_string()
        } else {
            text.replace(self.decimal as char, ".")
        }
    }

    fn render(&self, text: String) -> String {
        if self.decimal == b'.' {
            text
        } else {
            text.replace('.', &(self.decimal as char).to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRole {
    /// Elapsed time since the start in the given unit.
    Time(TimeUnit),
    /// ISO 8601 timestamps.
    TimeIso,
    Channel {
        label: String,
        unit: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMapping {
    pub column: String,
    pub role: ColumnRole,
}

impl ColumnMapping {
    /// Parses `column=label:unit[,column=label:unit...]`. The label `time`
    /// marks the time column, with a time unit or `iso` as its unit.
    pub fn parse_list(text: &str) -> Result<Vec<ColumnMapping>, ConvertError> {
        text.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.parse()).collect()
    }
}

impl FromStr for ColumnMapping {
    type Err = ConvertError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ConvertError::BadMapping(s.to_string());
        let (column, target) = s.split_once('=').ok_or_else(bad)?;
        let (label, unit) = target.split_once(':').ok_or_else(bad)?;
        let (column, label, unit) = (column.trim(), label.trim(), unit.trim());
        if column.is_empty() || label.is_empty() || unit.is_empty() {
            return Err(bad());
        }
        let role = match (label, unit) {
            ("time", "iso") => ColumnRole::TimeIso,
            ("time", u) => ColumnRole::Time(u.parse()?),
            (l, u) => ColumnRole::Channel { label: l.to_string(), unit: u.to_string() },
        };
        Ok(ColumnMapping { column: column.to_string(), role })
    }
}

/// Fields that CSV files do not carry.
#[derive(Debug, Clone)]
pub struct RecordTemplate {
    pub subject_id: String,
    pub study_id: String,
    pub device_id: String,
    pub endianness: Endianness,
    /// Required unless the time column holds ISO timestamps.
    pub start: Option<Iso8601Timestamp>,
    pub format: NumberFormat,
    pub scale_factors: Option<Vec<f64>>,
    /// Used when no time column is mapped.
    pub sampling_rate: Option<f64>,
    pub sensor_type: Option<String>,
    /// Storage of the time file.
    pub time_format: NumberFormat,
    /// Relative or difference.
    pub time_kind: TimeKind,
    /// Binary files are named `<stem>_samples.bin` and `<stem>_time.bin`.
    pub file_stem: String,
}

impl Default for RecordTemplate {
    fn default() -> Self {
        Self {
            subject_id: "unknown".into(),
            study_id: "unknown".into(),
            device_id: "unknown".into(),
            endianness: Endianness::Little,
            start: None,
            format: NumberFormat::FLOAT64,
            scale_factors: None,
            sampling_rate: None,
            sensor_type: None,
            time_format: NumberFormat::FLOAT64,
            time_kind: TimeKind::Relative,
            file_stem: "imported".into(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ImportOptions {
    pub dialect: CsvDialect,
    pub mapping: Vec<ColumnMapping>,
    pub template: RecordTemplate,
    /// Reject rows whose time equals the previous row's.
    pub strict_monotone: bool,
    pub metadata_name: Option<String>,
}

/// Exact decimal text (optionally with exponent) times `unit`, in nanoseconds,
/// rounded half-to-even.
pub fn parse_decimal_nanos(text: &str, unit: TimeUnit) -> Option<i128> {
    let t = text.trim();
    let (negative, t) = match t.as_bytes().first()? {
        b'-' => (true, &t[1..]),
        b'+' => (false, &t[1..]),
        _ => (false, t),
    };
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(p) => (&t[..p], t[p + 1..].parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let digits: String = int_part.chars().chain(frac_part.chars()).collect();
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = digits.trim_start_matches('0');
    if digits.len() > 36 {
        return None;
    }
    let mut value: i128 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    value = value.checked_mul(i128::from(unit.nanos()))?;
    let scale = exp - frac_part.len() as i32;
    if scale >= 0 {
        for _ in 0..scale {
            value = value.checked_mul(10)?;
        }
    } else {
        let div = 10i128.checked_pow((-scale) as u32);
        let Some(div) = div else {
            return Some(0);
        };
        let (q, r) = (value / div, value % div);
        value = if 2 * r > div || (2 * r == div && q % 2 == 1) { q + 1 } else { q };
    }
    Some(if negative { -value } else { value })
}

/// `nanos / unit` as the shortest exact decimal.
pub fn format_decimal_nanos(nanos: i128, unit: TimeUnit) -> String {
    let per = i128::from(unit.nanos());
    let sign = if nanos < 0 { "-" } else { "" };
    let abs = nanos.unsigned_abs();
    let per_u = per as u128;
    let (int, frac) = (abs / per_u, abs % per_u);
    if frac == 0 {
        return format!("{sign}{int}");
    }
    let width = per.to_string().len() - 1;
    let frac = format!("{frac:0width$}");
    format!("{sign}{int}.{}", frac.trim_end_matches('0'))
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ConvertError + '_ {
    move |source| ConvertError::Io { path: path.display().to_string(), source }
}

fn csv_err(e: csv::Error) -> ConvertError {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            ConvertError::Ragged { line, expected: *expected_len as usize, actual: *len as usize }
        }
        _ => ConvertError::Csv { line, message: e.to_string() },
    }
}

fn time_file_record(t: &RecordTemplate, rows: u64, start: Iso8601Timestamp, end: Iso8601Timestamp, unit: TimeUnit) -> FileRecord {
    let mut r = base_record(t, rows, start, end);
    r.file_name = format!("{}_time.bin", t.file_stem);
    r.channels = vec!["time".into()];
    r.units = vec![unit.as_str().into()];
    r.data_type = t.time_format.data_type();
    r.bits = t.time_format.bits();
    r.compression = Some(match t.time_kind {
        TimeKind::Difference => Compression::Difference,
        TimeKind::Absolute => Compression::Absolute,
        _ => Compression::Relative,
    });
    r
}

fn base_record(t: &RecordTemplate, rows: u64, start: Iso8601Timestamp, end: Iso8601Timestamp) -> FileRecord {
    FileRecord {
        file_name: format!("{}_samples.bin", t.file_stem),
        subject_id: t.subject_id.clone(),
        study_id: t.study_id.clone(),
        device_id: t.device_id.clone(),
        endianness: t.endianness,
        metadata_version: SCHEMA_VERSION.into(),
        start_iso8601: start,
        end_iso8601: end,
        rows,
        channels: Vec::new(),
        units: Vec::new(),
        data_type: t.format.data_type(),
        bits: t.format.bits(),
        compression: None,
        sampling_rate: None,
        scale_factors: t.scale_factors.clone(),
        sensor_type: t.sensor_type.clone(),
        checksum: None,
        checksum_type: None,
        group_id: 0,
        extra_fields: IndexMap::new(),
    }
}

/// Instants as they will read back from `format` storage.
fn stored_instants(instants: &[i64], enc: &TimeEncoding, format: NumberFormat) -> Result<Vec<i64>, TimeError> {
    let raw = encode_timestamps(instants, enc, format, false)?;
    decode_timestamps(&raw, enc, instants.len())
}

/// Reads a CSV file into a new single-group recording in `out_dir`.
pub fn import_csv(csv_path: &Path, opts: &ImportOptions, out_dir: &Path) -> Result<Recording, ConvertError> {
    let file = File::open(csv_path).map_err(io_err(csv_path))?;
    import_csv_from(BufReader::new(file), opts, out_dir)
}

pub fn import_csv_from<R: io::Read>(reader: R, opts: &ImportOptions, out_dir: &Path) -> Result<Recording, ConvertError> {
    opts.dialect.check()?;
    if opts.mapping.is_empty() {
        return Err(ConvertError::InvalidSpec("no columns mapped".into()));
    }
    let mut csv = csv::ReaderBuilder::new()
        .delimiter(opts.dialect.delimiter)
        .quote(opts.dialect.quote)
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header: Vec<String> = csv.headers().map_err(csv_err)?.iter().map(|h| h.trim().to_string()).collect();
    let mut time_col = None;
    let mut channels = Vec::new();
    for m in &opts.mapping {
        let idx = header.iter().position(|h| *h == m.column).ok_or_else(|| ConvertError::UnknownColumn(m.column.clone()))?;
        match &m.role {
            ColumnRole::Channel { label, unit } => channels.push((idx, label.clone(), unit.clone())),
            role => {
                if time_col.replace((idx, role.clone())).is_some() {
                    return Err(ConvertError::InvalidSpec("more than one time column".into()));
                }
            }
        }
    }
    if channels.is_empty() {
        return Err(ConvertError::InvalidSpec("no amplitude channels mapped".into()));
    }
    let t = &opts.template;
    let mut values = Vec::new();
    let mut times: Vec<(u64, i128)> = Vec::new();
    let mut iso_start: Option<Iso8601Timestamp> = None;
    for row in csv.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line());
        for (idx, _, _) in &channels {
            let text = opts.dialect.number_text(row[*idx].trim());
            let v: f64 =
                text.parse().map_err(|_| ConvertError::Parse { line, column: header[*idx].clone(), value: row[*idx].to_string() })?;
            values.push(v);
        }
        if let Some((idx, role)) = &time_col {
            let text = row[*idx].trim();
            let bad = |source| ConvertError::BadTime { line, column: header[*idx].clone(), source };
            let nanos = match role {
                ColumnRole::TimeIso => {
                    let ts = Iso8601Timestamp::parse(text).map_err(bad)?;
                    iso_start.get_or_insert(ts);
                    i128::from(ts.timeline_nanos().map_err(bad)?)
                }
                ColumnRole::Time(unit) => parse_decimal_nanos(&opts.dialect.number_text(text), *unit)
                    .ok_or_else(|| ConvertError::Parse { line, column: header[*idx].clone(), value: text.to_string() })?,
                ColumnRole::Channel { .. } => unreachable!(),
            };
            if let Some(&(_, prev)) = times.last() {
                if nanos < prev {
                    return Err(ConvertError::NonMonotonic { line });
                }
                if nanos == prev && opts.strict_monotone {
                    return Err(ConvertError::DuplicateTime { line });
                }
            }
            times.push((line, nanos));
        }
    }
    let rows = (values.len() / channels.len()) as u64;
    let start = match (&time_col, t.start) {
        (_, Some(s)) => s,
        (Some((_, ColumnRole::TimeIso)), None) => match iso_start {
            Some(s) => s,
            None => return Err(ConvertError::InvalidSpec("start timestamp required for an empty ISO time column".into())),
        },
        _ => return Err(ConvertError::InvalidSpec("start timestamp required".into())),
    };
    let start_ns = i128::from(start.timeline_nanos()?);

    let samples = SampleMatrix::from_physical(&values, channels.len(), t.format, t.scale_factors.clone())
        .map_err(|source| DatasetError::Bin { file_name: format!("{}_samples.bin", t.file_stem), source })?;
    let mut record = base_record(t, rows, start, start);
    record.channels = channels.iter().map(|c| c.1.clone()).collect();
    record.units = channels.iter().map(|c| c.2.clone()).collect();

    let group = match time_col {
        Some((_, role)) => {
            let unit = match role {
                ColumnRole::Time(u) => u,
                _ => TimeUnit::Millis,
            };
            let instants = times
                .iter()
                .map(|&(_, n)| {
                    let abs = if matches!(role, ColumnRole::TimeIso) { n } else { start_ns + n };
                    i64::try_from(abs).map_err(|_| ConvertError::Time(TimeError::Overflow))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let kind = match t.time_kind {
                TimeKind::Difference => TimeKind::Difference,
                _ => TimeKind::Relative,
            };
            let enc = TimeEncoding::new(kind, unit, start, None)?;
            let decoded = stored_instants(&instants, &enc, t.time_format)?;
            let end = match decoded.last() {
                Some(&last) => end_timestamp(&start, last)?,
                None => start,
            };
            record.end_iso8601 = end;
            let mut template = t.clone();
            template.time_kind = kind;
            let time_rec = time_file_record(&template, rows, start, end, unit);
            GroupSpec { time_file: Some(FileSpec::time_file(time_rec, instants)), members: vec![FileSpec::new(record, samples)] }
        }
        None => {
            let rate = t.sampling_rate.ok_or_else(|| ConvertError::InvalidSpec("no time column and no sampling rate".into()))?;
            let enc = TimeEncoding::uniform(start, rate)?;
            if rows > 0 {
                record.end_iso8601 = end_timestamp(&start, enc.uniform_instant(rows - 1)?)?;
            }
            record.sampling_rate = Some(rate);
            record.compression = Some(Compression::None);
            GroupSpec { time_file: None, members: vec![FileSpec::new(record, samples)] }
        }
    };
    let mut create = CreateOptions::default();
    if let Some(name) = &opts.metadata_name {
        create.metadata_name = name.clone();
    }
    Ok(create_recording(&[group], out_dir, &create)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeColumn {
    Iso,
    Elapsed(TimeUnit),
}

#[derive(Debug, Clone)]
pub struct ExportOptions {
    pub dialect: CsvDialect,
    pub time: TimeColumn,
    /// Restrict the export to one amplitude file of the group.
    pub file: Option<String>,
}

impl Default for ExportOptions {
    fn default() -> Self {
        Self { dialect: CsvDialect::default(), time: TimeColumn::Elapsed(TimeUnit::Millis), file: None }
    }
}

fn format_value(m: &SampleMatrix, row: usize, channel: usize) -> String {
    match (m.stored(), m.scale_factors()) {
        (Samples::F32(v), None) => v[row * m.n_channels() + channel].to_string(),
        (_, None) => match m.get(row, channel) {
            Number::Int(v) => v.to_string(),
            Number::UInt(v) => v.to_string(),
            Number::Float(v) => v.to_string(),
        },
        (_, Some(_)) => m.physical(row, channel).to_string(),
    }
}

/// Writes rows of a group as CSV: a time column, then every non-time
/// channel of the selected files as `label [unit]`.
pub fn export_csv_to<W: Write>(
    rec: &Recording,
    group_id: usize,
    rows: Range<u64>,
    opts: &ExportOptions,
    out: W,
) -> Result<(), ConvertError> {
    opts.dialect.check()?;
    let data = rec.read_group(group_id, rows)?;
    let selected: Vec<_> = data.members.iter().filter(|m| opts.file.as_ref().is_none_or(|f| *f == m.file_name)).collect();
    if selected.is_empty() {
        return Err(DatasetError::UnknownFile(opts.file.clone().unwrap_or_default()).into());
    }
    if selected.iter().any(|m| m.timestamps != selected[0].timestamps) {
        return Err(ConvertError::MixedTimeAxes(group_id));
    }
    let first = rec.record_index(&selected[0].file_name)?;
    let start = rec.records()[first].start_iso8601;
    let start_ns = i128::from(start.timeline_nanos()?);

    let mut w = csv::WriterBuilder::new().delimiter(opts.dialect.delimiter).quote(opts.dialect.quote).from_writer(out);
    let mut header = vec![match opts.time {
        TimeColumn::Iso => "time".to_string(),
        TimeColumn::Elapsed(u) => format!("time [{u}]"),
    }];
    let mut columns = Vec::new();
    for (mi, m) in selected.iter().enumerate() {
        let r = &rec.records()[rec.record_index(&m.file_name)?];
        for (c, (label, unit)) in r.channels.iter().zip(&r.units).enumerate() {
            if label != "time" {
                header.push(format!("{label} [{unit}]"));
                columns.push((mi, c));
            }
        }
    }
    let csv_io = |e: csv::Error| ConvertError::Io { path: "CSV output".into(), source: e.into() };
    w.write_record(&header).map_err(csv_io)?;
    let digits = start.frac_digits().max(3);
    let mut line = Vec::with_capacity(header.len());
    for (i, &t) in selected[0].timestamps.iter().enumerate() {
        line.clear();
        line.push(match opts.time {
            TimeColumn::Iso => Iso8601Timestamp::from_timeline_nanos(t, start.offset(), digits)?.to_string(),
            TimeColumn::Elapsed(u) => opts.dialect.render(format_decimal_nanos(i128::from(t) - start_ns, u)),
        });
        for &(mi, c) in &columns {
            line.push(opts.dialect.render(format_value(&selected[mi].samples, i, c)));
        }
        w.write_record(&line).map_err(csv_io)?;
    }
    w.flush().map_err(|e| ConvertError::Io { path: "CSV output".into(), source: e })?;
    Ok(())
}

pub fn export_csv(rec: &Recording, group_id: usize, rows: Range<u64>, opts: &ExportOptions) -> Result<String, ConvertError> {
    let mut buf = Vec::new();
    export_csv_to(rec, group_id, rows, opts, &mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthTime {
    Uniform,
    /// A separate time file with this encoding, unit and storage.
    TimeFile {
        kind: TimeKind,
        unit: TimeUnit,
        format: NumberFormat,
    },
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub channels: usize,
    pub sampling_rate: f64,
    pub duration_s: f64,
    pub seed: u64,
    pub format: NumberFormat,
    pub endianness: Endianness,
    pub time: SynthTime,
    pub start: Iso8601Timestamp,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            channels: 3,
            sampling_rate: 100.0,
            duration_s: 10.0,
            seed: 0,
            format: NumberFormat::FLOAT32,
            endianness: Endianness::Little,
            time: SynthTime::Uniform,
            start: Iso8601Timestamp::new(2020, 1, 1, 0, 0, 0, 0, 3, UtcOffset::Utc).expect("valid date"),
        }
    }
}

/// Deterministic sums of sinusoids plus noise; the same seed gives
/// byte-identical output.
pub fn synth(spec: &SynthSpec, out_dir: &Path) -> Result<Recording, ConvertError> {
    if spec.channels == 0 {
        return Err(ConvertError::InvalidSpec("at least one channel".into()));
    }
    if !(spec.sampling_rate.is_finite() && spec.sampling_rate > 0.0) || !(spec.duration_s.is_finite() && spec.duration_s >= 0.0) {
        return Err(ConvertError::InvalidSpec("sampling rate must be positive and duration non-negative".into()));
    }
    let rows = (spec.duration_s * spec.sampling_rate).round() as u64;
    let values = synth_values(spec, rows);
    let template = RecordTemplate {
        subject_id: "synthetic".into(),
        study_id: "synthetic".into(),
        device_id: format!("synth-{}", spec.seed),
        endianness: spec.endianness,
        start: Some(spec.start),
        format: spec.format,
        file_stem: "synth".into(),
        ..RecordTemplate::default()
    };
    let samples = SampleMatrix::from_physical(&values, spec.channels, spec.format, None)
        .map_err(|source| DatasetError::Bin { file_name: "synth_samples.bin".into(), source })?;
    let uniform = TimeEncoding::uniform(spec.start, spec.sampling_rate)?;
    let grid = (0..rows).map(|i| uniform.uniform_instant(i)).collect::<Result<Vec<_>, _>>()?;
    let mut record = base_record(&template, rows, spec.start, spec.start);
    record.channels = (1..=spec.channels).map(|i| format!("ch{i}")).collect();
    record.units = vec!["unitless".into(); spec.channels];

    let group = match spec.time {
        SynthTime::Uniform => {
            if let Some(&last) = grid.last() {
                record.end_iso8601 = end_timestamp(&spec.start, last)?;
            }
            record.sampling_rate = Some(spec.sampling_rate);
            record.compression = Some(Compression::None);
            GroupSpec { time_file: None, members: vec![FileSpec::new(record, samples)] }
        }
        SynthTime::TimeFile { kind, unit, format } => {
            let enc = TimeEncoding::new(kind, unit, spec.start, None)?;
            let raw = encode_timestamps(&grid, &enc, format, true)?;
            let decoded = decode_timestamps(&raw, &enc, grid.len())?;
            let end = match decoded.last() {
                Some(&last) => end_timestamp(&spec.start, last)?,
                None => spec.start,
            };
            record.end_iso8601 = end;
            let t = RecordTemplate { time_format: format, time_kind: kind, ..template.clone() };
            let time_rec = time_file_record(&t, rows, spec.start, end, unit);
            // the grid is snapped to what the time unit can hold
            GroupSpec { time_file: Some(FileSpec::time_file(time_rec, decoded)), members: vec![FileSpec::new(record, samples)] }
        }
    };
    Ok(create_recording(&[group], out_dir, &CreateOptions::default())?)
}

fn synth_values(spec: &SynthSpec, rows: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let nyquist = spec.sampling_rate / 2.0;
    let components: Vec<Vec<(f64, f64, f64)>> = (0..spec.channels)
        .map(|_| {
            (0..3)
                .map(|_| {
                    (rng.random_range(0.2..1.0) / 3.0, rng.random_range(0.0..nyquist / 2.0), rng.random_range(0.0..std::f64::consts::TAU))
                })
                .collect()
        })
        .collect();
    let amplitude = match spec.format.data_type() {
        DataType::Float => 1.0,
        DataType::Int => spec.format.int_range().1 as f64 * 0.4,
        DataType::UInt => spec.format.uint_max() as f64 * 0.2,
    };
    let offset = match spec.format.data_type() {
        DataType::UInt => spec.format.uint_max() as f64 * 0.5,
        _ => 0.0,
    };
    let mut out = Vec::with_capacity(rows as usize * spec.channels);
    for r in 0..rows {
        let t = r as f64 / spec.sampling_rate;
        for comps in &components {
            let clean: f64 = comps.iter().map(|(a, f, p)| a * (std::f64::consts::TAU * f * t + p).sin()).sum();
            let noise = (rng.random::<f64>() - 0.5) * 0.02;
            let v = offset + amplitude * (clean + noise);
            out.push(if spec.format.data_type() == DataType::Float { v } else { v.round() });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub binary_bytes: u64,
    pub csv_bytes: u64,
    /// `csv_bytes / binary_bytes`; undefined for empty recordings.
    pub ratio: Option<f64>,
    pub full_load_ms: f64,
    pub random_slice_ms: f64,
    pub rows: u64,
    pub slice_rows: u64,
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let ratio = self.ratio.map_or_else(|| "undefined".to_string(), |r| format!("{r:.3}"));
        let rows = [
            ("binary_bytes", self.binary_bytes.to_string()),
            ("csv_bytes", self.csv_bytes.to_string()),
            ("ratio", ratio),
            ("full_load_ms", format!("{:.3}", self.full_load_ms)),
            ("random_slice_ms", format!("{:.3}", self.random_slice_ms)),
            ("rows", self.rows.to_string()),
            ("slice_rows", self.slice_rows.to_string()),
        ];
        rows.iter().map(|(k, v)| format!("{k:<16} {v:>16}\n")).collect()
    }

    /// One JSON object per metric.
    pub fn to_json_lines(&self) -> String {
        let ratio = self.ratio.map_or(serde_json::Value::Null, |r| serde_json::json!(r));
        [
            ("binary_bytes", serde_json::json!(self.binary_bytes)),
            ("csv_bytes", serde_json::json!(self.csv_bytes)),
            ("ratio", ratio),
            ("full_load_ms", serde_json::json!(self.full_load_ms)),
            ("random_slice_ms", serde_json::json!(self.random_slice_ms)),
            ("rows", serde_json::json!(self.rows)),
            ("slice_rows", serde_json::json!(self.slice_rows)),
        ]
        .iter()
        .map(|(k, v)| format!("{}\n", serde_json::json!({ "metric": k, "value": v })))
        .collect()
    }
}

struct CountingWriter(u64);

impl Write for CountingWriter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0 += buf.len() as u64;
        Ok(buf.len())
    }
    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

const SLICE_TRIALS: u32 = 20;

/// Sizes of binary versus CSV storage and read latency of a full load
/// versus a random 1% slice.
pub fn bench_storage(rec: &Recording) -> Result<BenchReport, ConvertError> {
    let binary_bytes: u64 = rec.records().iter().map(|r| r.layout().expected_len()).sum();
    let mut csv_bytes = 0;
    for g in rec.groups() {
        let rows = 0..rec.group_rows(g);
        let opts = ExportOptions::default();
        let mut counter = CountingWriter(0);
        match export_csv_to(rec, g.group_id, rows.clone(), &opts, &mut counter) {
            Ok(()) => csv_bytes += counter.0,
            Err(ConvertError::MixedTimeAxes(_)) => {
                for m in &g.members {
                    let file = rec.records()[m.record].file_name.clone();
                    let opts = ExportOptions { file: Some(file), ..ExportOptions::default() };
                    let mut counter = CountingWriter(0);
                    export_csv_to(rec, g.group_id, rows.clone(), &opts, &mut counter)?;
                    csv_bytes += counter.0;
                }
            }
            Err(e) => return Err(e),
        }
    }
    let ratio = (binary_bytes > 0).then(|| csv_bytes as f64 / binary_bytes as f64);

    let started = Instant::now();
    for i in 0..rec.records().len() {
        rec.read_record(i, 0..rec.records()[i].rows)?;
    }
    let full_load_ms = started.elapsed().as_secs_f64() * 1e3;

    let longest = (0..rec.records().len()).max_by_key(|&i| rec.records()[i].rows);
    let (mut random_slice_ms, mut slice_rows) = (0.0, 0);
    if let Some(i) = longest {
        let rows = rec.records()[i].rows;
        slice_rows = (rows / 100).max(u64::from(rows > 0));
        let mut rng = ChaCha8Rng::seed_from_u64(rows);
        let started = Instant::now();
        for _ in 0..SLICE_TRIALS {
            let start = rng.random_range(0..=rows - slice_rows);
            rec.read_record(i, start..start + slice_rows)?;
        }
        random_slice_ms = started.elapsed().as_secs_f64() * 1e3 / f64::from(SLICE_TRIALS);
    }
    Ok(BenchReport {
        binary_bytes,
        csv_bytes,
        ratio,
        full_load_ms,
        random_slice_ms,
        rows: longest.map_or(0, |i| rec.records()[i].rows),
        slice_rows,
    })
}
