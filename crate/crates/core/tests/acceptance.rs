//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero if any fail.

mod common;

use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{sensor_flat_diff, write_example};
use tsdf::binio::{read_rows, write_rows, BinaryLayout, DataType, Endianness, NumberFormat, SampleMatrix, Samples};
use tsdf::convert::{bench_storage, synth, SynthSpec, SynthTime};
use tsdf::dataset::{audit_path, create_recording, end_timestamp, AuditOptions, CreateOptions, FileSpec, GroupSpec, Recording};
use tsdf::indexer::{build_index, query, Filter};
use tsdf::metadata::{flatten, parse_metadata, serialize_metadata, validate, Compression, FileRecord, Node, SerializeLayout};
use tsdf::reference::{Example, AUDIO_METADATA, HOMESTUDY_METADATA, SENSOR_METADATA};
use tsdf::timecodec::{encode_timestamps, Iso8601Timestamp, TimeEncoding, TimeError, TimeKind, TimeUnit, UtcOffset};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1 ---------------------------------------------------------------------

fn golden_flatten() -> Outcome {
    let started = Instant::now();
    let doc = parse_metadata(SENSOR_METADATA.as_bytes()).map_err(|e| e.to_string())?;
    let recs = flatten(&doc).map_err(|e| e.to_string())?;
    check(recs.len() == 2, || format!("{} records", recs.len()))?;
    for (i, r) in recs.iter().enumerate() {
        if let Some(d) = sensor_flat_diff(r, i) {
            return Err(format!("record {i}: {d}"));
        }
    }
    let elapsed = started.elapsed();
    check(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("2 records, 14 fields each matched, {elapsed:?}"))
}

// 2 ---------------------------------------------------------------------

fn bundled_examples() -> Outcome {
    let mut parts = Vec::new();
    for (name, text, want) in [("audio", AUDIO_METADATA, 1), ("hierarchical", HOMESTUDY_METADATA, 4)] {
        let doc = parse_metadata(text.as_bytes()).map_err(|e| format!("{name}: {e}"))?;
        let recs = flatten(&doc).map_err(|e| format!("{name}: {e}"))?;
        check(recs.len() == want, || format!("{name}: {} records, expected {want}", recs.len()))?;
        let report = validate(&recs);
        check(report.is_conformant(), || format!("{name}:\n{report}"))?;
        parts.push(format!("{name} {} records / 0 errors", recs.len()));
    }
    Ok(parts.join(", "))
}

// 3 ---------------------------------------------------------------------

const FORMATS: [(DataType, u32); 10] = [
    (DataType::Int, 8),
    (DataType::Int, 16),
    (DataType::Int, 32),
    (DataType::Int, 64),
    (DataType::UInt, 8),
    (DataType::UInt, 16),
    (DataType::UInt, 32),
    (DataType::UInt, 64),
    (DataType::Float, 32),
    (DataType::Float, 64),
];

const UNITS: [TimeUnit; 4] = [TimeUnit::Seconds, TimeUnit::Millis, TimeUnit::Micros, TimeUnit::Nanos];

fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[T]) -> T {
    items[rng.random_range(0..items.len())]
}

fn random_samples(rng: &mut ChaCha8Rng, format: NumberFormat, len: usize) -> Samples {
    let shift = 64 - format.bits();
    match (format.data_type(), format.bits()) {
        (DataType::Int, _) => Samples::Int((0..len).map(|_| rng.random::<i64>() >> shift).collect()),
        (DataType::UInt, _) => Samples::UInt((0..len).map(|_| rng.random::<u64>() >> shift).collect()),
        // raw bit patterns, NaN payloads and infinities included
        (DataType::Float, 32) => Samples::F32((0..len).map(|_| f32::from_bits(rng.random())).collect()),
        (DataType::Float, _) => Samples::F64((0..len).map(|_| f64::from_bits(rng.random())).collect()),
    }
}

fn random_start(rng: &mut ChaCha8Rng) -> Iso8601Timestamp {
    let digits = rng.random_range(0..=9u8);
    let nanos = if digits == 0 { 0 } else { rng.random_range(0..10u32.pow(u32::from(digits))) * 10u32.pow(9 - u32::from(digits)) };
    let offset = match rng.random_range(0..3) {
        0 => UtcOffset::Utc,
        1 => UtcOffset::Local,
        _ => UtcOffset::Known(rng.random_range(-720..=840)),
    };
    Iso8601Timestamp::new(
        rng.random_range(2000..2030),
        rng.random_range(1..=12),
        rng.random_range(1..=28),
        rng.random_range(0..24),
        rng.random_range(0..60),
        rng.random_range(0..60),
        nanos,
        digits,
        offset,
    )
    .unwrap()
}

fn base_record(file_name: String, start: Iso8601Timestamp, rows: u64, format: NumberFormat, n: usize, rng: &mut ChaCha8Rng) -> FileRecord {
    FileRecord {
        file_name,
        subject_id: "subject".into(),
        study_id: "roundtrip".into(),
        device_id: format!("dev{}", rng.random_range(0..3)),
        endianness: if rng.random() { Endianness::Little } else { Endianness::Big },
        metadata_version: "0.1".into(),
        start_iso8601: start,
        end_iso8601: start,
        rows,
        channels: (0..n).map(|i| format!("c{i}")).collect(),
        units: (0..n).map(|_| pick(rng, &["V", "m/s/s", "unitless"]).to_string()).collect(),
        data_type: format.data_type(),
        bits: format.bits(),
        compression: None,
        sampling_rate: None,
        scale_factors: None,
        sensor_type: None,
        checksum: None,
        checksum_type: None,
        group_id: 0,
        extra_fields: IndexMap::new(),
    }
}

/// A random recording: its group specs plus the instants every amplitude file must decode to.
fn random_recording(rng: &mut ChaCha8Rng) -> (Vec<GroupSpec>, Vec<(String, Vec<i64>)>) {
    let mut groups = Vec::new();
    let mut expected = Vec::new();
    for g in 0..rng.random_range(1..=3) {
        let start = random_start(rng);
        let start_ns = start.timeline_nanos().unwrap();
        let rows = rng.random_range(0..=10_000u64);
        let kind = pick(rng, &[TimeKind::Uniform, TimeKind::Relative, TimeKind::Absolute, TimeKind::Difference]);
        let unit = pick(rng, &UNITS);
        let sensor = rng.random::<bool>().then(|| pick(rng, &["imu", "ppg", "audio"]).to_string());
        let n_members = rng.random_range(1..=2);
        let mut spec = GroupSpec::default();

        if kind == TimeKind::Uniform {
            let rate = pick(rng, &[0.5, 1.0, 3.3, 50.0, 100.0, 250.0, 44100.0]);
            let enc = TimeEncoding::uniform(start, rate).unwrap();
            let instants: Vec<i64> = (0..rows).map(|i| enc.uniform_instant(i).unwrap()).collect();
            let end = instants.last().map_or(start, |&l| end_timestamp(&start, l).unwrap());
            for m in 0..n_members {
                let (dt, bits) = pick(rng, &FORMATS);
                let format = NumberFormat::new(dt, bits).unwrap();
                let n = rng.random_range(1..=8);
                let mut r = base_record(format!("g{g}_m{m}.bin"), start, rows, format, n, rng);
                r.end_iso8601 = end;
                r.sampling_rate = Some(rate);
                r.compression = Some(Compression::None);
                r.sensor_type = sensor.clone();
                if format.data_type() != DataType::Float && rng.random_range(0..3) == 0 {
                    r.scale_factors = Some((0..n).map(|_| pick(rng, &[0.5, 0.001, 2.0, 0.0469378])).collect());
                }
                let stored = random_samples(rng, format, rows as usize * n);
                let m = SampleMatrix::from_stored(n, stored, r.scale_factors.clone()).unwrap();
                expected.push((r.file_name.clone(), instants.clone()));
                spec.members.push(FileSpec::new(r, m));
            }
            groups.push(spec);
            continue;
        }

        let unit_ns = unit.nanos();
        let first = match kind {
            // absolute values must be whole units of Unix time
            TimeKind::Absolute => start_ns - start_ns.rem_euclid(unit_ns) + unit_ns,
            _ => start_ns + rng.random_range(0..=100) * unit_ns,
        };
        let mut t = first;
        let instants: Vec<i64> = (0..rows)
            .map(|i| {
                if i > 0 {
                    t += rng.random_range(0..=100) * unit_ns;
                }
                t
            })
            .collect();
        let end = instants.last().map_or(start, |&l| end_timestamp(&start, l).unwrap());
        let compression = match kind {
            TimeKind::Relative => Compression::Relative,
            TimeKind::Absolute => Compression::Absolute,
            _ => Compression::Difference,
        };
        let wide = [(DataType::Int, 64), (DataType::UInt, 64)];
        let time_formats: &[(DataType, u32)] = match kind {
            TimeKind::Absolute => &wide,
            _ => &[
                (DataType::Int, 32),
                (DataType::UInt, 32),
                (DataType::Int, 64),
                (DataType::UInt, 64),
                (DataType::Float, 32),
                (DataType::Float, 64),
            ],
        };
        let in_file = rng.random::<bool>();
        if in_file {
            // each member carries its own time channel
            for m in 0..n_members {
                let (dt, bits) = pick(rng, time_formats);
                let format = NumberFormat::new(dt, bits).unwrap();
                let n = rng.random_range(2..=8); // a lone "time" channel would make it a time file
                let c = rng.random_range(0..n);
                let mut r = base_record(format!("g{g}_m{m}.bin"), start, rows, format, n, rng);
                r.channels[c] = "time".into();
                r.units[c] = unit.as_str().into();
                r.compression = Some(compression.clone());
                r.end_iso8601 = end;
                r.sensor_type = sensor.clone();
                let stored = random_samples(rng, format, rows as usize * n);
                let matrix = SampleMatrix::from_stored(n, stored, None).unwrap();
                expected.push((r.file_name.clone(), instants.clone()));
                spec.members.push(FileSpec::new(r, matrix).with_instants(instants.clone()));
            }
        } else {
            let (dt, bits) = pick(rng, time_formats);
            let tf = NumberFormat::new(dt, bits).unwrap();
            let mut tr = base_record(format!("g{g}_time.bin"), start, rows, tf, 1, rng);
            tr.channels = vec!["time".into()];
            tr.units = vec![unit.as_str().into()];
            tr.compression = Some(compression.clone());
            tr.end_iso8601 = end;
            tr.sensor_type = sensor.clone();
            spec.time_file = Some(FileSpec::time_file(tr, instants.clone()));
            for m in 0..n_members {
                let (dt, bits) = pick(rng, &FORMATS);
                let format = NumberFormat::new(dt, bits).unwrap();
                let n = rng.random_range(1..=8);
                let mut r = base_record(format!("g{g}_m{m}.bin"), start, rows, format, n, rng);
                r.end_iso8601 = end;
                r.sensor_type = sensor.clone();
                if rng.random::<u8>() < 40 {
                    r.extra_fields.insert("operator".into(), Node::String("rt".into()));
                }
                let stored = random_samples(rng, format, rows as usize * n);
                let matrix = SampleMatrix::from_stored(n, stored, None).unwrap();
                expected.push((r.file_name.clone(), instants.clone()));
                spec.members.push(FileSpec::new(r, matrix));
            }
        }
        groups.push(spec);
    }
    (groups, expected)
}

fn specs_from_reads(rec: &Recording) -> Result<Vec<GroupSpec>, String> {
    rec.groups()
        .iter()
        .map(|g| {
            let data = rec.read_group(g.group_id, 0..rec.group_rows(g)).map_err(|e| e.to_string())?;
            Ok(GroupSpec {
                time_file: g.time_file.map(|t| FileSpec::new(rec.records()[t].clone(), data.time_samples.clone().unwrap())),
                members: g
                    .members
                    .iter()
                    .zip(&data.members)
                    .map(|(m, d)| FileSpec::new(rec.records()[m.record].clone(), d.samples.clone()))
                    .collect(),
            })
        })
        .collect()
}

fn round_trip_case(rng: &mut ChaCha8Rng, case: usize) -> Result<(), String> {
    let (groups, expected) = random_recording(rng);
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ctx = |e: String| format!("case {case}: {e}");
    let created = create_recording(&groups, a.path(), &CreateOptions::default()).map_err(|e| ctx(e.to_string()))?;
    let opened = Recording::open(created.metadata_path()).map_err(|e| ctx(e.to_string()))?;

    // every amplitude file reads back its instants and its exact stored bytes
    for (file, instants) in &expected {
        let i = opened.record_index(file).map_err(|e| ctx(e.to_string()))?;
        let g = opened.groups().iter().find(|g| g.members.iter().any(|m| m.record == i)).unwrap();
        let m = g.members.iter().find(|m| m.record == i).unwrap();
        let ts = opened.member_timestamps(m).map_err(|e| ctx(e.to_string()))?;
        check(ts == *instants, || ctx(format!("{file}: timestamps differ")))?;
    }
    for spec in groups.iter().flat_map(|g| &g.members) {
        if spec.instants.is_some() {
            continue;
        }
        let i = opened.record_index(&spec.record.file_name).unwrap();
        let read = opened.read_record(i, 0..spec.record.rows).map_err(|e| ctx(e.to_string()))?;
        let layout = spec.record.layout();
        let same = write_rows(&read, &layout).ok() == write_rows(&spec.samples, &layout).ok();
        check(same, || ctx(format!("{}: samples differ", spec.record.file_name)))?;
    }
    let inputs: Vec<&FileRecord> = groups.iter().flat_map(|g| g.time_file.iter().chain(&g.members)).map(|s| &s.record).collect();
    for (want, got) in inputs.iter().zip(opened.records()) {
        check(want.same_content(got), || ctx(format!("{}: metadata differs", want.file_name)))?;
    }

    let again =
        create_recording(&specs_from_reads(&opened).map_err(ctx)?, b.path(), &CreateOptions::default()).map_err(|e| ctx(e.to_string()))?;
    for (x, y) in opened.records().iter().zip(again.records()) {
        check(x.same_content(y), || ctx(format!("{}: re-created metadata differs", x.file_name)))?;
        let bx = fs::read(a.path().join(&x.file_name)).map_err(|e| e.to_string())?;
        let by = fs::read(b.path().join(&y.file_name)).map_err(|e| e.to_string())?;
        check(bx == by, || ctx(format!("{}: re-created binary differs", x.file_name)))?;
    }
    let report = again.audit(&AuditOptions::default());
    check(report.is_conformant(), || ctx(format!("audit:\n{report}")))
}

fn round_trip_property() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_917);
    let mut failures = Vec::new();
    for case in 0..1000 {
        if let Err(e) = round_trip_case(&mut rng, case) {
            failures.push(e);
        }
    }
    let elapsed = started.elapsed();
    if !failures.is_empty() {
        return Err(format!("{} failures; first: {}", failures.len(), failures[0]));
    }
    check(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("1000 recordings, 0 failures, {:.1} s", elapsed.as_secs_f64()))
}

// 4 ---------------------------------------------------------------------

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[xs.len() / 2]
}

fn random_access() -> Outcome {
    const ROWS: u64 = 1_000_000;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("big.bin");
    let layout = BinaryLayout::new(NumberFormat::FLOAT32, Endianness::Little, 3, ROWS);
    let values: Vec<f32> = (0..ROWS * 3).map(|i| (i as f32 * 0.001).sin()).collect();
    let m = SampleMatrix::from_stored(3, Samples::F32(values), None).map_err(|e| e.to_string())?;
    fs::write(&path, write_rows(&m, &layout).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;

    let mut file = File::open(&path).map_err(|e| e.to_string())?;
    let full = read_rows(&mut file, &layout, 0, ROWS).map_err(|e| e.to_string())?;
    check(full == m, || "full read differs from written data".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for p in 0..100 {
        let mut cuts: Vec<u64> = (0..rng.random_range(1..=20)).map(|_| rng.random_range(0..=ROWS)).collect();
        cuts.extend([0, ROWS]);
        cuts.sort_unstable();
        let mut joined = SampleMatrix::empty(3, NumberFormat::FLOAT32);
        for w in cuts.windows(2) {
            joined.append(&read_rows(&mut file, &layout, w[0], w[1] - w[0]).map_err(|e| e.to_string())?);
        }
        check(joined == full, || format!("partition {p} differs"))?;
    }

    let full_t = median(
        (0..5)
            .map(|_| {
                let t = Instant::now();
                let _ = read_rows(&mut file, &layout, 0, ROWS);
                t.elapsed()
            })
            .collect(),
    );
    let slice_t = median(
        (0..21)
            .map(|_| {
                let start = rng.random_range(0..=ROWS - ROWS / 100);
                let t = Instant::now();
                let _ = read_rows(&mut file, &layout, start, ROWS / 100);
                t.elapsed()
            })
            .collect(),
    );
    let share = slice_t.as_secs_f64() / full_t.as_secs_f64();
    check(share < 0.10, || format!("1% slice took {:.1}% of a full read ({slice_t:?} vs {full_t:?})", share * 100.0))?;
    Ok(format!("100 partitions identical; 1% slice {slice_t:?} = {:.2}% of full read {full_t:?}", share * 100.0))
}

// 5 ---------------------------------------------------------------------

fn timestamp_capacity() -> Outcome {
    let start = Iso8601Timestamp::parse("2019-12-19T12:41:45.716+00:00").unwrap();
    let base = start.timeline_nanos().unwrap();
    let enc = TimeEncoding::new(TimeKind::Relative, TimeUnit::Millis, start, None).unwrap();
    let ms = 1_000_000i64;
    let day = 86_400_000 * ms;
    let at = |offset: i64| encode_timestamps(&[base + offset], &enc, NumberFormat::UINT32, false);
    check(at(49 * day).is_ok(), || "49 days rejected".into())?;
    check(matches!(at(50 * day), Err(TimeError::ValueOverflow { .. })), || format!("50 days: {:?}", at(50 * day)))?;
    check(at((u32::MAX as i64) * ms).is_ok(), || "2^32-1 ms rejected".into())?;
    check(matches!(at((1i64 << 32) * ms), Err(TimeError::ValueOverflow { .. })), || "2^32 ms accepted".into())?;
    Ok(format!("49 d ok, 50 d overflow, boundary at 2^32 ms = {:.2} days", (1u64 << 32) as f64 / 86_400_000.0))
}

// 6 ---------------------------------------------------------------------

fn storage_ratio() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SynthSpec {
        channels: 3,
        sampling_rate: 1000.0,
        duration_s: 1000.0,
        seed: 6,
        format: NumberFormat::FLOAT32,
        time: SynthTime::Uniform,
        ..SynthSpec::default()
    };
    let rec = synth(&spec, dir.path()).map_err(|e| e.to_string())?;
    check(rec.records()[0].rows == 1_000_000, || "wrong row count".into())?;
    let report = bench_storage(&rec).map_err(|e| e.to_string())?;
    let ratio = report.ratio.ok_or("ratio undefined")?;
    let versus = if ratio >= 4.0 { "meets" } else { "falls short of" };
    check(ratio >= 2.5, || format!("ratio {ratio:.3} < 2.5"))?;
    Ok(format!(
        "csv {} B / binary {} B = {ratio:.3}x ({versus} the 4x figure; shortest round-trip float32 text plus an elapsed-ms column)",
        report.csv_bytes, report.binary_bytes
    ))
}

// 7 ---------------------------------------------------------------------

fn truncate_by_one_element(path: &Path, bytes: u64) {
    let len = fs::metadata(path).unwrap().len();
    OpenOptions::new().write(true).open(path).unwrap().set_len(len - bytes).unwrap();
}

fn audit_sensitivity() -> Outcome {
    let opts = AuditOptions::default();
    let mut truncations = (0, 0);
    let mut perturbations = (0, 0);
    for ex in Example::ALL {
        let (_d, path) = write_example(ex);
        let clean = audit_path(&path, &opts);
        check(clean.is_conformant(), || format!("{ex:?} is not clean:\n{clean}"))?;
        for r in ex.records() {
            let (dir, path) = write_example(ex);
            truncate_by_one_element(&dir.path().join(&r.file_name), u64::from(r.bits / 8));
            truncations.0 += 1;
            if audit_path(&path, &opts).has_code("size_mismatch") {
                truncations.1 += 1;
            }
        }
    }

    // the sensor time file: float32 seconds, tolerance one unit (1 s), so add 2 s
    let (dir, path) = write_example(Example::Sensor);
    let bin = dir.path().join("sensor_time.bin");
    let mut bytes = fs::read(&bin).unwrap();
    let n = bytes.len();
    let last = f32::from_le_bytes(bytes[n - 4..].try_into().unwrap());
    bytes[n - 4..].copy_from_slice(&(last + 2.0).to_le_bytes());
    fs::write(&bin, bytes).unwrap();
    perturbations.0 += 1;
    if audit_path(&path, &opts).has_code("end_timestamp_mismatch") {
        perturbations.1 += 1;
    }

    // synthetic difference-encoded files in ms and us, uint32 storage
    for (seed, unit) in [(1u64, TimeUnit::Millis), (2, TimeUnit::Micros), (3, TimeUnit::Millis)] {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            seed,
            duration_s: 5.0,
            time: SynthTime::TimeFile { kind: TimeKind::Difference, unit, format: NumberFormat::UINT32 },
            ..SynthSpec::default()
        };
        let rec = synth(&spec, dir.path()).map_err(|e| e.to_string())?;
        check(rec.audit(&opts).is_conformant(), || "synthetic recording not clean".into())?;
        let bin = dir.path().join("synth_time.bin");
        let mut bytes = fs::read(&bin).unwrap();
        let n = bytes.len();
        let last = u32::from_le_bytes(bytes[n - 4..].try_into().unwrap());
        bytes[n - 4..].copy_from_slice(&(last + 2).to_le_bytes());
        fs::write(&bin, bytes).unwrap();
        perturbations.0 += 1;
        if audit_path(rec.metadata_path(), &opts).has_code("end_timestamp_mismatch") {
            perturbations.1 += 1;
        }
    }
    check(truncations.0 == truncations.1 && perturbations.0 == perturbations.1, || {
        format!("truncation {}/{}, perturbation {}/{}", truncations.1, truncations.0, perturbations.1, perturbations.0)
    })?;
    Ok(format!(
        "truncation detected {}/{}, final-delta perturbation detected {}/{}",
        truncations.1, truncations.0, perturbations.1, perturbations.0
    ))
}

// 8 ---------------------------------------------------------------------

/// Metadata files under `root` in depth-first, name-sorted order.
fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
    let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    for p in entries {
        if p.is_dir() {
            walk(&p, out);
        } else if p.extension().is_some_and(|x| x == "json") {
            out.push(p);
        }
    }
}

struct Scanned {
    metadata_path: String,
    record: FileRecord,
    span: Option<(i64, i64)>,
}

fn brute_force_scan(root: &Path) -> Vec<Scanned> {
    let mut files = Vec::new();
    walk(root, &mut files);
    let mut out = Vec::new();
    for f in files {
        let Ok(doc) = parse_metadata(&fs::read(&f).unwrap()) else { continue };
        let Ok(flat) = flatten(&doc) else { continue };
        if flat.is_empty() || !validate(&flat).is_conformant() {
            continue;
        }
        let rel = f.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
        for r in &flat {
            let record = FileRecord::from_flat(r).unwrap();
            let ms = |t: &Iso8601Timestamp| t.epoch_nanos().ok().map(|n| n / 1_000_000);
            let span = ms(&record.start_iso8601).zip(ms(&record.end_iso8601));
            out.push(Scanned { metadata_path: rel.clone(), record, span });
        }
    }
    out
}

fn brute_force_query(scan: &[Scanned], f: &Filter) -> Vec<(String, String)> {
    scan.iter()
        .filter(|s| {
            let r = &s.record;
            f.subject_id.as_ref().is_none_or(|v| *v == r.subject_id)
                && f.study_id.as_ref().is_none_or(|v| *v == r.study_id)
                && f.device_id.as_ref().is_none_or(|v| *v == r.device_id)
                && f.sensor_type.as_ref().is_none_or(|v| Some(v) == r.sensor_type.as_ref())
                && f.channel_label.as_ref().is_none_or(|v| r.channels.contains(v))
                && f.overlaps.is_none_or(|(t0, t1)| s.span.is_some_and(|(a, b)| a <= t1 && b >= t0))
        })
        .map(|s| (s.metadata_path.clone(), s.record.file_name.clone()))
        .collect()
}

const SUBJECTS: [&str; 3] = ["s1", "s2", "s3"];
const STUDIES: [&str; 2] = ["alpha", "beta"];
const DEVICES: [&str; 3] = ["d1", "d2", "d3"];
const SENSORS: [&str; 3] = ["imu", "ppg", "temp"];
const LABELS: [&str; 5] = ["x", "y", "z", "time", "temperature"];
const BASE_MS: i64 = 1_577_836_800_000; // 2020-01-01

fn random_corpus(rng: &mut ChaCha8Rng, root: &Path) {
    for d in 0..rng.random_range(1..=6) {
        let dir = root.join(format!("site{}", rng.random_range(0..3))).join(format!("rec{d}"));
        fs::create_dir_all(&dir).unwrap();
        let mut records = Vec::new();
        for i in 0..rng.random_range(1..=4) {
            let start_ms = BASE_MS + rng.random_range(0..30 * 86_400_000i64);
            let off = match rng.random_range(0..4) {
                0 => UtcOffset::Local,
                1 => UtcOffset::Known(rng.random_range(-600..=600)),
                _ => UtcOffset::Utc,
            };
            let ts = |ms: i64| Iso8601Timestamp::from_timeline_nanos(ms * 1_000_000, off, 3).unwrap();
            let n = rng.random_range(1..=3);
            let mut r = FileRecord {
                file_name: format!("f{i}.bin"),
                subject_id: pick(rng, &SUBJECTS).into(),
                study_id: pick(rng, &STUDIES).into(),
                device_id: pick(rng, &DEVICES).into(),
                endianness: Endianness::Little,
                metadata_version: "0.1".into(),
                start_iso8601: ts(start_ms),
                end_iso8601: ts(start_ms + rng.random_range(0..3 * 86_400_000i64)),
                rows: rng.random_range(0..1000),
                channels: (0..n).map(|_| pick(rng, &LABELS).to_string()).collect(),
                units: vec!["u".into(); n],
                data_type: DataType::Int,
                bits: 16,
                compression: None,
                sampling_rate: Some(10.0),
                scale_factors: None,
                sensor_type: rng.random::<bool>().then(|| pick(rng, &SENSORS).to_string()),
                checksum: None,
                checksum_type: None,
                group_id: rng.random_range(0..2),
                extra_fields: IndexMap::new(),
            };
            r.channels.dedup();
            r.units.truncate(r.channels.len());
            records.push(r);
        }
        let text = serialize_metadata(&records, SerializeLayout::GroupedByCommonPrefix).unwrap();
        fs::write(dir.join(format!("meta{d}.json")), text).unwrap();
        if rng.random_range(0..4) == 0 {
            fs::write(dir.join("notes.json"), r#"{"comment": "not a recording"}"#).unwrap();
        }
        if rng.random_range(0..4) == 0 {
            fs::write(dir.join("broken.json"), "{\"file_name\": ").unwrap();
        }
    }
}

fn random_filter(rng: &mut ChaCha8Rng) -> Filter {
    let maybe = |rng: &mut ChaCha8Rng, items: &[&str]| rng.random_range(0..3).eq(&0).then(|| pick(rng, items).to_string());
    let overlaps = (rng.random_range(0..3) == 0).then(|| {
        let t0 = BASE_MS + rng.random_range(-86_400_000..35 * 86_400_000i64);
        (t0, t0 + rng.random_range(0..5 * 86_400_000i64))
    });
    Filter {
        subject_id: maybe(rng, &SUBJECTS),
        study_id: maybe(rng, &STUDIES),
        device_id: maybe(rng, &DEVICES),
        sensor_type: maybe(rng, &SENSORS),
        overlaps,
        channel_label: maybe(rng, &LABELS),
    }
}

fn compare_corpus(root: &Path, rng: &mut ChaCha8Rng, queries: usize) -> Result<usize, String> {
    let (index, _) = build_index(root).map_err(|e| e.to_string())?;
    let scan = brute_force_scan(root);
    check(index.files.len() == scan.len(), || format!("{} indexed vs {} scanned", index.files.len(), scan.len()))?;
    for q in 0..queries {
        let f = if q == 0 { Filter::default() } else { random_filter(rng) };
        let got: Vec<_> =
            query(&index, &f).map_err(|e| e.to_string())?.iter().map(|r| (r.metadata_path.clone(), r.file_name.clone())).collect();
        let want = brute_force_query(&scan, &f);
        check(got == want, || format!("filter {f:?}: index {got:?} vs scan {want:?}"))?;
    }
    Ok(queries)
}

fn indexer_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let fixtures = tempfile::tempdir().unwrap();
    for ex in Example::ALL {
        fs::write(fixtures.path().join(ex.metadata_name()), ex.metadata_text()).unwrap();
    }
    let mut total = compare_corpus(fixtures.path(), &mut rng, 50).map_err(|e| format!("fixtures: {e}"))?;
    for c in 0..100 {
        let dir = tempfile::tempdir().unwrap();
        random_corpus(&mut rng, dir.path());
        total += compare_corpus(dir.path(), &mut rng, 30).map_err(|e| format!("corpus {c}: {e}"))?;
    }
    Ok(format!("fixture corpus + 100 synthetic corpora, {total} queries, 0 discrepancies"))
}

// 9 ---------------------------------------------------------------------

fn iso_matrix() -> Outcome {
    let dates = ["2019-12-19T12:41:45", "2000-02-29T00:00:00", "1999-12-31T23:59:59", "2024-07-04T06:07:08"];
    let offsets = ["Z", "", "+00:00", "-05:30", "+14:00"];
    let mut cases = 0;
    for date in dates {
        for digits in 0..=9 {
            for off in offsets {
                let frac = if digits == 0 { String::new() } else { format!(".{}", &"987654321"[..digits]) };
                let text = format!("{date}{frac}{off}");
                let t = Iso8601Timestamp::parse(&text).map_err(|e| format!("{text}: {e}"))?;
                check(t.to_string() == text, || format!("{text} formats as {t}"))?;
                check(Iso8601Timestamp::parse(&t.to_string()).ok() == Some(t), || format!("{text} does not re-parse"))?;
                cases += 1;
            }
        }
    }
    check(cases == 200, || format!("{cases} cases"))?;
    Ok("200 cases byte-identical (Z, omitted, +00:00, -05:30, +14:00 x 0-9 digits x 4 dates)".into())
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("golden flatten", golden_flatten),
        ("bundled examples", bundled_examples),
        ("round-trip property", round_trip_property),
        ("random-access equivalence", random_access),
        ("timestamp capacity", timestamp_capacity),
        ("storage efficiency", storage_ratio),
        ("audit sensitivity", audit_sensitivity),
        ("indexer oracle equivalence", indexer_oracle),
        ("ISO 8601 matrix", iso_matrix),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
