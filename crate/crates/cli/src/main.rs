//! `tsdf`: validate, inspect, audit, slice, convert and index TSDF recordings.
//!
//! Exit status: 0 success, 1 validation or audit findings, 2 usage error,
//! 3 I/O error. Diagnostics go to stderr, data and reports to stdout or `--out`.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use tsdf::convert::{
    bench_storage, export_csv_to, import_csv, ColumnMapping, ConvertError, CsvDialect, ExportOptions, ImportOptions, RecordTemplate,
    SynthSpec, SynthTime, TimeColumn,
};
use tsdf::dataset::{
    audit_path, create_recording, end_timestamp, AuditOptions, CreateOptions, DatasetError, FileSpec, GroupSpec, Recording, TimeSource,
};
use tsdf::indexer::{build_index, load_index, query, write_index, Filter, IndexError, SkipKind};
use tsdf::metadata::{flatten, parse_metadata, validate, FlatRecord, ValidationReport, Violation};
use tsdf::timecodec::{to_epoch_millis, Iso8601Timestamp, TimeKind, TimeUnit};
use tsdf::{DataType, Endianness, Number, NumberFormat, SampleMatrix};

#[derive(Parser)]
#[command(name = "tsdf", version, about = "Tools for TSDF recordings (JSON metadata plus raw binary sample files)")]
struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Human)]
    format: OutputFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Human,
    JsonLines,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, flatten and validate a metadata file. Exit 0 iff there are no errors.
    Validate { metadata: PathBuf },
    /// Show the flattened metadata, one column per binary file.
    Info { metadata: PathBuf },
    /// Validate metadata and check the binary files against it.
    Audit {
        metadata: PathBuf,
        /// Allowed gap between end_iso8601 and the last decoded sample.
        /// Defaults to one unit of the time encoding (1 ms for uniform sampling).
        #[arg(long, env = "TSDF_AUDIT_TOLERANCE_NS")]
        tolerance_ns: Option<i64>,
        /// Files above this size produce a warning.
        #[arg(long, default_value_t = tsdf::dataset::DEFAULT_MAX_FILE_SIZE)]
        max_file_size: u64,
    },
    /// Read a row range of a signal group and write it as CSV or as a new recording.
    Slice(SliceArgs),
    /// Convert a CSV file into a recording.
    ImportCsv(ImportArgs),
    /// Write a signal group as CSV.
    ExportCsv(ExportArgs),
    /// Write a deterministic synthetic recording.
    Synth(SynthArgs),
    /// Compare binary and CSV storage and time full and partial loads.
    Bench { metadata: PathBuf },
    /// Build or query a relational index over a directory tree.
    #[command(subcommand)]
    Index(IndexCommand),
}

#[derive(Args)]
struct GroupSelection {
    metadata: PathBuf,
    /// Signal group id.
    #[arg(long, default_value_t = 0)]
    group: usize,
    /// Row range `A..B` (either end may be omitted).
    #[arg(long, value_parser = parse_rows)]
    rows: Option<(Option<u64>, Option<u64>)>,
    /// Restrict to one amplitude file of the group.
    #[arg(long)]
    file: Option<String>,
}

#[derive(Args)]
struct DialectArgs {
    #[arg(long, default_value = ",", value_parser = parse_byte)]
    delimiter: u8,
    #[arg(long, default_value = ".", value_parser = parse_byte)]
    decimal: u8,
    #[arg(long, default_value = "\"", value_parser = parse_byte)]
    quote: u8,
}

impl DialectArgs {
    fn dialect(&self) -> CsvDialect {
        CsvDialect { delimiter: self.delimiter, decimal: self.decimal, quote: self.quote }
    }
}

#[derive(Args)]
struct SliceArgs {
    #[command(flatten)]
    sel: GroupSelection,
    /// Write CSV here (stdout when neither --csv nor --bin is given).
    #[arg(long, conflicts_with = "bin")]
    csv: Option<PathBuf>,
    /// Write a new recording into this directory.
    #[arg(long)]
    bin: Option<PathBuf>,
    /// Time column of CSV output: iso, s, ms, us or ns.
    #[arg(long, default_value = "ms", value_parser = parse_time_column)]
    time: TimeColumn,
    #[command(flatten)]
    dialect: DialectArgs,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    sel: GroupSelection,
    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Time column: iso, s, ms, us or ns.
    #[arg(long, default_value = "ms", value_parser = parse_time_column)]
    time: TimeColumn,
    #[command(flatten)]
    dialect: DialectArgs,
}

#[derive(Args)]
struct ImportArgs {
    csv: PathBuf,
    /// Column mapping, e.g. `t=time:ms,ax=accel_x:m/s/s`; `time:iso` marks ISO timestamps.
    #[arg(long)]
    map: String,
    #[arg(long)]
    out: PathBuf,
    /// Recording start; required unless the time column holds ISO timestamps.
    #[arg(long)]
    start: Option<Iso8601Timestamp>,
    #[arg(long, default_value = "unknown")]
    subject: String,
    #[arg(long, default_value = "unknown")]
    study: String,
    #[arg(long, default_value = "unknown")]
    device: String,
    #[arg(long)]
    sensor_type: Option<String>,
    /// Sample storage, e.g. float32, int16.
    #[arg(long, default_value = "float64", value_parser = parse_number_format)]
    dtype: NumberFormat,
    /// Time file storage.
    #[arg(long, default_value = "float64", value_parser = parse_number_format)]
    time_dtype: NumberFormat,
    /// relative or difference.
    #[arg(long, default_value = "relative", value_parser = parse_time_kind)]
    time_kind: TimeKind,
    /// Sampling rate when no time column is mapped.
    #[arg(long)]
    sampling_rate: Option<f64>,
    #[arg(long, default_value = "imported")]
    stem: String,
    #[arg(long, value_enum, default_value_t = EndianArg::Little)]
    endianness: EndianArg,
    /// Reject repeated time values.
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    dialect: DialectArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    channels: usize,
    /// Samples per second.
    #[arg(long, default_value_t = 100.0)]
    rate: f64,
    /// Seconds.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "float32", value_parser = parse_number_format)]
    dtype: NumberFormat,
    #[arg(long, value_enum, default_value_t = EndianArg::Little)]
    endianness: EndianArg,
    /// Write a time file `KIND:UNIT:DTYPE` (e.g. `difference:ms:uint32`) instead of uniform timing.
    #[arg(long, value_parser = parse_synth_time)]
    time_file: Option<SynthTime>,
    /// Recording start.
    #[arg(long)]
    start: Option<Iso8601Timestamp>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EndianArg {
    Little,
    Big,
}

impl From<EndianArg> for Endianness {
    fn from(e: EndianArg) -> Self {
        match e {
            EndianArg::Little => Endianness::Little,
            EndianArg::Big => Endianness::Big,
        }
    }
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Scan a directory tree and write files.csv, channels.csv, extras.csv and schema.sql.
    Build {
        root: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// List indexed files matching all given conditions.
    Query {
        /// Directory written by `index build`.
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        subject: Option<String>,
        #[arg(long)]
        study: Option<String>,
        #[arg(long)]
        device: Option<String>,
        #[arg(long)]
        sensor_type: Option<String>,
        #[arg(long)]
        channel: Option<String>,
        /// Window start: ISO 8601 or epoch milliseconds.
        #[arg(long, value_parser = parse_instant_ms)]
        from: Option<i64>,
        /// Window end: ISO 8601 or epoch milliseconds.
        #[arg(long, value_parser = parse_instant_ms)]
        to: Option<i64>,
    },
}

/// Stops with exit status 1 after the report has been printed.
#[derive(Debug)]
struct Findings;

impl std::fmt::Display for Findings {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("findings reported")
    }
}

impl std::error::Error for Findings {}

fn parse_rows(s: &str) -> Result<(Option<u64>, Option<u64>), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let end = |t: &str| -> Result<Option<u64>, String> {
        if t.is_empty() {
            Ok(None)
        } else {
            t.parse().map(Some).map_err(|_| format!("bad row number {t:?}"))
        }
    };
    Ok((end(a)?, end(b)?))
}

fn parse_byte(s: &str) -> Result<u8, String> {
    match s.as_bytes() {
        [b] if b.is_ascii() => Ok(*b),
        _ if s == "\\t" || s == "tab" => Ok(b'\t'),
        _ => Err(format!("expected one ASCII character, got {s:?}")),
    }
}

fn parse_number_format(s: &str) -> Result<NumberFormat, String> {
    let split = s.find(|c: char| c.is_ascii_digit()).ok_or_else(|| format!("expected e.g. float32, got {s:?}"))?;
    let data_type: DataType = s[..split].parse()?;
    let bits: u32 = s[split..].parse().map_err(|_| format!("bad bit width in {s:?}"))?;
    NumberFormat::new(data_type, bits).map_err(|e| e.to_string())
}

fn parse_time_kind(s: &str) -> Result<TimeKind, String> {
    match s {
        "relative" => Ok(TimeKind::Relative),
        "absolute" => Ok(TimeKind::Absolute),
        "difference" => Ok(TimeKind::Difference),
        other => Err(format!("expected relative, absolute or difference, got {other:?}")),
    }
}

fn parse_time_column(s: &str) -> Result<TimeColumn, String> {
    if s == "iso" {
        return Ok(TimeColumn::Iso);
    }
    s.parse::<TimeUnit>().map(TimeColumn::Elapsed).map_err(|e| e.to_string())
}

fn parse_synth_time(s: &str) -> Result<SynthTime, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [kind, unit, dtype] = parts[..] else {
        return Err(format!("expected KIND:UNIT:DTYPE, got {s:?}"));
    };
    Ok(SynthTime::TimeFile {
        kind: parse_time_kind(kind)?,
        unit: unit.parse().map_err(|e: tsdf::timecodec::TimeError| e.to_string())?,
        format: parse_number_format(dtype)?,
    })
}

fn parse_instant_ms(s: &str) -> Result<i64, String> {
    if let Ok(ms) = s.parse::<i64>() {
        return Ok(ms);
    }
    let t = Iso8601Timestamp::parse(s).map_err(|e| e.to_string())?;
    to_epoch_millis(&t).map_err(|e| e.to_string())
}

fn print_report(report: &ValidationReport, format: OutputFormat, summary: serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    match format {
        OutputFormat::Human => {
            for v in &report.violations {
                eprintln!("{v}");
            }
            writeln!(out, "{} error(s), {} warning(s)", report.error_count(), report.warnings().count())?;
        }
        OutputFormat::JsonLines => {
            for v in &report.violations {
                writeln!(out, "{}", violation_json(v))?;
            }
            writeln!(out, "{summary}")?;
        }
    }
    if report.is_conformant() {
        Ok(())
    } else {
        Err(Findings.into())
    }
}

fn violation_json(v: &Violation) -> serde_json::Value {
    json!({ "severity": v.severity, "code": v.code, "path": v.path, "message": v.message })
}

fn read_metadata(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn flatten_file(path: &Path) -> Result<std::result::Result<Vec<FlatRecord>, ValidationReport>> {
    let bytes = read_metadata(path)?;
    let flat = parse_metadata(&bytes).and_then(|doc| flatten(&doc));
    Ok(flat.map_err(|e| {
        let mut report = ValidationReport::new();
        let code = match e {
            tsdf::metadata::MetadataError::Syntax { .. } | tsdf::metadata::MetadataError::Encoding { .. } => "metadata_syntax",
            _ => "metadata_structure",
        };
        report.error(path.display().to_string(), code, e.to_string());
        report
    }))
}

fn cmd_validate(path: &Path, format: OutputFormat) -> Result<()> {
    let (report, n) = match flatten_file(path)? {
        Ok(records) => (validate(&records), records.len()),
        Err(report) => (report, 0),
    };
    let summary = json!({ "summary": "validate", "records": n, "errors": report.error_count(), "warnings": report.warnings().count() });
    print_report(&report, format, summary)
}

fn cmd_info(path: &Path, format: OutputFormat) -> Result<()> {
    let records = match flatten_file(path)? {
        Ok(r) => r,
        Err(report) => return print_report(&report, format, json!({ "summary": "info", "records": 0 })),
    };
    let mut out = BufWriter::new(io::stdout().lock());
    match format {
        OutputFormat::JsonLines => {
            for r in &records {
                let fields: serde_json::Map<_, _> = r.fields.iter().map(|(k, f)| (k.clone(), f.value.to_json_value())).collect();
                writeln!(out, "{}", json!({ "group_id": r.group_id, "path": r.path, "fields": fields }))?;
            }
        }
        OutputFormat::Human => {
            let mut names: Vec<&str> = Vec::new();
            for r in &records {
                for k in r.fields.keys() {
                    if !names.contains(&k.as_str()) {
                        names.push(k);
                    }
                }
            }
            let mut table: Vec<Vec<String>> = vec![std::iter::once("field".to_string())
                .chain(records.iter().map(|r| r.file_name().unwrap_or("?").to_string()))
                .collect()];
            for name in &names {
                let mut row = vec![name.to_string()];
                row.extend(records.iter().map(|r| r.get(name).map(|v| v.to_compact_json()).unwrap_or_default()));
                table.push(row);
            }
            let widths: Vec<usize> = (0..table[0].len()).map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
            for row in &table {
                let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                writeln!(out, "{}", cells.join("  ").trim_end())?;
            }
        }
    }
    out.flush()?;
    let report = validate(&records);
    for v in &report.violations {
        eprintln!("{v}");
    }
    if report.is_conformant() {
        Ok(())
    } else {
        Err(Findings.into())
    }
}

fn cmd_audit(path: &Path, tolerance_ns: Option<i64>, max_file_size: u64, format: OutputFormat) -> Result<()> {
    if !path.is_file() {
        // let the I/O error speak for itself
        read_metadata(path)?;
    }
    let report = audit_path(path, &AuditOptions { tolerance_ns, max_file_size });
    let summary = json!({ "summary": "audit", "errors": report.error_count(), "warnings": report.warnings().count() });
    print_report(&report, format, summary)
}

fn row_range(rec: &Recording, sel: &GroupSelection) -> Result<Range<u64>> {
    let group = rec.group(sel.group)?;
    let total = rec.group_rows(group);
    let (a, b) = sel.rows.unwrap_or((None, None));
    let range = a.unwrap_or(0)..b.unwrap_or(total);
    if range.start > range.end {
        bail!("empty row range {}..{}", range.start, range.end);
    }
    Ok(range)
}

fn csv_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn export(sel: &GroupSelection, time: TimeColumn, dialect: CsvDialect, out: Option<&Path>) -> Result<()> {
    let rec = Recording::open(&sel.metadata)?;
    let rows = row_range(&rec, sel)?;
    let opts = ExportOptions { dialect, time, file: sel.file.clone() };
    let mut w = csv_out(out)?;
    export_csv_to(&rec, sel.group, rows, &opts, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Record and stored time values for rows of a file, keeping the stored time
/// values: relative and absolute values stay valid under the original start,
/// a difference column is rebased on its first instant, uniform timing starts
/// at the first row.
fn sliced_file(
    orig: &tsdf::FileRecord,
    kind: TimeKind,
    time_column: Option<usize>,
    mut samples: SampleMatrix,
    instants: &[i64],
) -> Result<FileSpec> {
    let mut r = orig.clone();
    r.rows = samples.rows() as u64;
    r.checksum = None;
    r.group_id = 0;
    if let Some(&first) = instants.first() {
        if matches!(kind, TimeKind::Difference | TimeKind::Uniform) {
            r.start_iso8601 = Iso8601Timestamp::from_timeline_nanos(first, orig.start_iso8601.offset(), orig.start_iso8601.frac_digits())?;
        }
        if let (TimeKind::Difference, Some(c)) = (kind, time_column) {
            let mut col = samples.column(c);
            col[0] = match r.data_type {
                DataType::Int => Number::Int(0),
                DataType::UInt => Number::UInt(0),
                DataType::Float => Number::Float(0.0),
            };
            samples.set_column(c, &col)?;
        }
        r.end_iso8601 = end_timestamp(&r.start_iso8601, *instants.last().unwrap_or(&first))?;
    } else {
        r.end_iso8601 = r.start_iso8601;
    }
    Ok(FileSpec::new(r, samples))
}

fn slice_to_recording(sel: &GroupSelection, out: &Path) -> Result<Recording> {
    let rec = Recording::open(&sel.metadata)?;
    let rows = row_range(&rec, sel)?;
    let group = rec.group(sel.group)?;
    let data = rec.read_group(sel.group, rows)?;
    let mut spec = GroupSpec::default();
    if let (Some(t), Some(shared), Some(raw)) = (group.time_file, &data.shared_timestamps, &data.time_samples) {
        let kind = group.members[0].encoding.kind;
        spec.time_file = Some(sliced_file(&rec.records()[t], kind, Some(0), raw.clone(), shared)?);
    }
    for (m, d) in group.members.iter().zip(&data.members) {
        if sel.file.as_deref().is_some_and(|f| f != d.file_name) {
            continue;
        }
        let column = match m.time {
            TimeSource::TimeChannel(c) => Some(c),
            _ => None,
        };
        spec.members.push(sliced_file(&rec.records()[m.record], m.encoding.kind, column, d.samples.clone(), &d.timestamps)?);
    }
    if spec.members.is_empty() {
        bail!(DatasetError::UnknownFile(sel.file.clone().unwrap_or_default()));
    }
    let opts = CreateOptions { metadata_name: file_name(&sel.metadata), ..CreateOptions::default() };
    Ok(create_recording(&[spec], out, &opts)?)
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| "recording_metadata.json".into(), |n| n.to_string_lossy().into_owned())
}

fn cmd_slice(args: &SliceArgs) -> Result<()> {
    match &args.bin {
        Some(dir) => {
            let rec = slice_to_recording(&args.sel, dir)?;
            eprintln!("wrote {}", rec.metadata_path().display());
            Ok(())
        }
        None => export(&args.sel, args.time, args.dialect.dialect(), args.csv.as_deref()),
    }
}

fn cmd_import(args: &ImportArgs) -> Result<()> {
    let template = RecordTemplate {
        subject_id: args.subject.clone(),
        study_id: args.study.clone(),
        device_id: args.device.clone(),
        endianness: args.endianness.into(),
        start: args.start,
        format: args.dtype,
        scale_factors: None,
        sampling_rate: args.sampling_rate,
        sensor_type: args.sensor_type.clone(),
        time_format: args.time_dtype,
        time_kind: args.time_kind,
        file_stem: args.stem.clone(),
    };
    let opts = ImportOptions {
        dialect: args.dialect.dialect(),
        mapping: ColumnMapping::parse_list(&args.map)?,
        template,
        strict_monotone: args.strict,
        metadata_name: None,
    };
    let rec = import_csv(&args.csv, &opts, &args.out)?;
    println!("{}", rec.metadata_path().display());
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut spec = SynthSpec {
        channels: args.channels,
        sampling_rate: args.rate,
        duration_s: args.duration,
        seed: args.seed,
        format: args.dtype,
        endianness: args.endianness.into(),
        time: args.time_file.unwrap_or(SynthTime::Uniform),
        ..SynthSpec::default()
    };
    if let Some(start) = args.start {
        spec.start = start;
    }
    let rec = tsdf::convert::synth(&spec, &args.out)?;
    println!("{}", rec.metadata_path().display());
    Ok(())
}

fn cmd_bench(path: &Path, format: OutputFormat) -> Result<()> {
    let report = bench_storage(&Recording::open(path)?)?;
    let text = match format {
        OutputFormat::Human => report.to_text(),
        OutputFormat::JsonLines => report.to_json_lines(),
    };
    print!("{text}");
    if !text.ends_with('\n') {
        println!();
    }
    Ok(())
}

fn cmd_index(cmd: &IndexCommand, format: OutputFormat) -> Result<()> {
    let mut out = BufWriter::new(io::stdout().lock());
    match cmd {
        IndexCommand::Build { root, out: dir } => {
            let (index, skips) = build_index(root)?;
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            write_index(&index, dir)?;
            let skipped = skips.skipped().count();
            match format {
                OutputFormat::Human => {
                    for e in &skips.entries {
                        let kind = if e.kind == SkipKind::Skipped { "skipped" } else { "warning" };
                        eprintln!("{kind} [{}] {}: {}", e.code, e.path, e.message);
                    }
                    writeln!(
                        out,
                        "indexed {} file(s), {} channel(s); {skipped} document(s) skipped",
                        index.files.len(),
                        index.channels.len()
                    )?;
                }
                OutputFormat::JsonLines => {
                    for e in &skips.entries {
                        writeln!(out, "{}", serde_json::to_string(e)?)?;
                    }
                    let summary =
                        json!({ "summary": "index", "files": index.files.len(), "channels": index.channels.len(), "skipped": skipped });
                    writeln!(out, "{summary}")?;
                }
            }
        }
        IndexCommand::Query { index, subject, study, device, sensor_type, channel, from, to } => {
            let table = load_index(index)?;
            let overlaps = match (from, to) {
                (None, None) => None,
                (a, b) => Some((a.unwrap_or(i64::MIN), b.unwrap_or(i64::MAX))),
            };
            let filter = Filter {
                subject_id: subject.clone(),
                study_id: study.clone(),
                device_id: device.clone(),
                sensor_type: sensor_type.clone(),
                overlaps,
                channel_label: channel.clone(),
            };
            let hits = query(&table, &filter)?;
            for f in &hits {
                match format {
                    OutputFormat::Human => {
                        let ms = |v: Option<i64>| v.map_or_else(|| "-".to_string(), |v| v.to_string());
                        writeln!(
                            out,
                            "{}\t{}\t{}\t{}\t{}\t{}..{}",
                            f.metadata_path,
                            f.file_name,
                            f.subject_id,
                            f.study_id,
                            f.device_id,
                            ms(f.start_epoch_ms),
                            ms(f.end_epoch_ms)
                        )?;
                    }
                    OutputFormat::JsonLines => writeln!(out, "{}", serde_json::to_string(f)?)?,
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Validate { metadata } => cmd_validate(metadata, cli.format),
        Command::Info { metadata } => cmd_info(metadata, cli.format),
        Command::Audit { metadata, tolerance_ns, max_file_size } => cmd_audit(metadata, *tolerance_ns, *max_file_size, cli.format),
        Command::Slice(args) => cmd_slice(args),
        Command::ImportCsv(args) => cmd_import(args),
        Command::ExportCsv(args) => export(&args.sel, args.time, args.dialect.dialect(), args.out.as_deref()),
        Command::Synth(args) => cmd_synth(args),
        Command::Bench { metadata } => cmd_bench(metadata, cli.format),
        Command::Index(cmd) => cmd_index(cmd, cli.format),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Findings>() {
            return 1;
        }
        if cause.is::<io::Error>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<DatasetError>() {
            return if e.is_io() { 3 } else { 1 };
        }
        if let Some(e) = cause.downcast_ref::<ConvertError>() {
            return if e.is_io() { 3 } else { 1 };
        }
        if let Some(e) = cause.downcast_ref::<IndexError>() {
            return match e {
                IndexError::Root { .. } | IndexError::Io { .. } => 3,
                IndexError::BadRange { .. } => 2,
                IndexError::Csv { .. } => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if !err.is::<Findings>() {
                let code = err
                    .chain()
                    .find_map(|c| {
                        c.downcast_ref::<DatasetError>()
                            .map(DatasetError::code)
                            .or_else(|| c.downcast_ref::<ConvertError>().map(ConvertError::code))
                            .or_else(|| c.downcast_ref::<IndexError>().map(IndexError::code))
                    })
                    .unwrap_or("error");
                eprintln!("tsdf: {code}: {err:#}");
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
