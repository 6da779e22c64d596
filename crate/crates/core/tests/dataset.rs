mod common;

use std::fs::{self, OpenOptions};

use common::write_example;
use tsdf::dataset::{audit_path, create_recording, AuditOptions, CreateOptions, DatasetError, FileSpec, GroupSpec, Recording, TimeSource};
use tsdf::reference::Example;
use tsdf::timecodec::{Iso8601Timestamp, TimeKind};

#[test]
fn sensor_recording_has_one_group_with_a_difference_time_file() {
    let (_dir, path) = write_example(Example::Sensor);
    let rec = Recording::open(&path).unwrap();
    assert_eq!(rec.groups().len(), 1);
    let g = &rec.groups()[0];
    let t = g.time_file.unwrap();
    assert_eq!(rec.records()[t].file_name, "sensor_time.bin");
    assert_eq!(g.members.len(), 1);
    assert_eq!(g.members[0].time, TimeSource::TimeFile(t));
    assert_eq!(g.members[0].encoding.kind, TimeKind::Difference);
}

#[test]
fn sensor_full_read() {
    let (_dir, path) = write_example(Example::Sensor);
    let rec = Recording::open(&path).unwrap();
    let data = rec.read_group(0, 0..4833).unwrap();
    let m = &data.members[0];
    assert_eq!(m.timestamps.len(), 4833);
    assert_eq!((m.samples.rows(), m.samples.n_channels()), (4833, 3));
    let start = Iso8601Timestamp::parse("2019-12-19T12:41:45.716+00:00").unwrap().epoch_nanos().unwrap();
    let end = Iso8601Timestamp::parse("2019-12-19T13:39:33.151+00:00").unwrap().epoch_nanos().unwrap();
    assert_eq!(m.timestamps[0], start);
    assert!((m.timestamps[4832] - end).abs() < 1_000_000, "{}", m.timestamps[4832] - end);
}

#[test]
fn difference_slices_match_the_full_decode() {
    let (_dir, path) = write_example(Example::Sensor);
    let rec = Recording::open(&path).unwrap();
    let full = rec.read_group(0, 0..4833).unwrap();
    let part = rec.read_group(0, 1000..1100).unwrap();
    assert_eq!(part.members[0].timestamps, full.members[0].timestamps[1000..1100]);
    assert_eq!(part.members[0].samples, full.members[0].samples.slice_rows(1000, 1100));
}

#[test]
fn empty_range_reads_nothing() {
    let (_dir, path) = write_example(Example::Sensor);
    let rec = Recording::open(&path).unwrap();
    let data = rec.read_group(0, 100..100).unwrap();
    assert!(data.members[0].timestamps.is_empty());
    assert_eq!(data.members[0].samples.rows(), 0);
}

#[test]
fn audio_is_uniform_and_second_one_starts_exactly_one_second_later() {
    let (_dir, path) = write_example(Example::Audio);
    let rec = Recording::open(&path).unwrap();
    assert_eq!(rec.groups().len(), 1);
    assert_eq!(rec.groups()[0].members[0].time, TimeSource::Uniform { sampling_rate: 44100.0 });
    let data = rec.read_group(0, 44100..88200).unwrap();
    let base = rec.records()[0].start_iso8601.epoch_nanos().unwrap();
    assert_eq!(data.members[0].timestamps[0], base + 1_000_000_000);
    assert_eq!(data.members[0].timestamps.len(), 44100);
}

#[test]
fn homestudy_has_two_groups_with_own_time_channels() {
    let (_dir, path) = write_example(Example::HomeStudy);
    let rec = Recording::open(&path).unwrap();
    assert_eq!(rec.groups().len(), 2);
    for g in rec.groups() {
        assert_eq!(g.members.len(), 2);
        assert!(g.time_file.is_none());
        assert!(g.members.iter().all(|m| m.time == TimeSource::TimeChannel(0)));
    }
    // members differ in length; the range is clipped per file
    let data = rec.read_group(0, 0..60714).unwrap();
    assert_eq!(data.members[0].timestamps.len(), 60714);
    assert_eq!(data.members[1].timestamps.len(), 607);
    assert!(rec.read_group(0, 0..60715).is_err());
}

#[test]
fn fixtures_audit_clean() {
    for ex in Example::ALL {
        let (_dir, path) = write_example(ex);
        let report = Recording::open(&path).unwrap().audit(&AuditOptions::default());
        assert!(report.is_conformant(), "{ex:?}:\n{report}");
    }
}

#[test]
fn end_one_second_late_with_half_second_tolerance_is_one_error() {
    let (dir, path) = write_example(Example::Audio);
    // last sample sits 22.7 us before 10:31:30; claim 10:31:31 instead
    let text = fs::read_to_string(&path).unwrap().replace("10:31:30.000", "10:31:31.000");
    fs::write(&path, text).unwrap();
    let opts = AuditOptions { tolerance_ns: Some(500_000_000), ..AuditOptions::default() };
    let report = audit_path(&path, &opts);
    assert_eq!(report.error_count(), 1, "{report}");
    assert!(report.has_code("end_timestamp_mismatch"));
    drop(dir);
}

#[test]
fn truncated_binary_fails_open_and_audit() {
    let (dir, path) = write_example(Example::Sensor);
    let bin = dir.path().join("sensor_samples.bin");
    let len = fs::metadata(&bin).unwrap().len();
    OpenOptions::new().write(true).open(&bin).unwrap().set_len(len - 2).unwrap();
    let err = Recording::open(&path).unwrap_err();
    assert_eq!(err.code(), "size_mismatch");
    assert!(err.to_string().contains("sensor_samples.bin"));
    assert!(audit_path(&path, &AuditOptions::default()).has_code("size_mismatch"));
}

#[test]
fn missing_binary_is_named() {
    let (dir, path) = write_example(Example::Sensor);
    fs::remove_file(dir.path().join("sensor_time.bin")).unwrap();
    match Recording::open(&path) {
        Err(DatasetError::MissingFile { file_name }) => assert_eq!(file_name, "sensor_time.bin"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn nan_samples_are_a_warning() {
    let (dir, path) = write_example(Example::HomeStudy);
    let bin = dir.path().join("temperature_t1.bin");
    let mut bytes = fs::read(&bin).unwrap();
    bytes[4..8].copy_from_slice(&f32::NAN.to_le_bytes());
    fs::write(&bin, bytes).unwrap();
    let report = Recording::open(&path).unwrap().audit(&AuditOptions::default());
    assert!(report.is_conformant(), "{report}");
    assert!(report.has_code("non_finite_sample"));
}

fn recreate(rec: &Recording) -> Vec<GroupSpec> {
    rec.groups()
        .iter()
        .map(|g| {
            let rows = 0..rec.group_rows(g);
            let data = rec.read_group(g.group_id, rows).unwrap();
            GroupSpec {
                time_file: g.time_file.map(|t| FileSpec::new(rec.records()[t].clone(), data.time_samples.clone().unwrap())),
                members: g
                    .members
                    .iter()
                    .zip(&data.members)
                    .map(|(m, d)| FileSpec::new(rec.records()[m.record].clone(), d.samples.clone()))
                    .collect(),
            }
        })
        .collect()
}

#[test]
fn recreating_from_read_output_is_byte_identical() {
    for ex in Example::ALL {
        let (dir, path) = write_example(ex);
        let rec = Recording::open(&path).unwrap();
        let out = tempfile::tempdir().unwrap();
        let again = create_recording(&recreate(&rec), out.path(), &CreateOptions::default()).unwrap();
        for r in rec.records() {
            let a = fs::read(dir.path().join(&r.file_name)).unwrap();
            let b = fs::read(out.path().join(&r.file_name)).unwrap();
            assert!(a == b, "{ex:?} {}", r.file_name);
        }
        for (a, b) in rec.records().iter().zip(again.records()) {
            assert!(a.same_content(b), "{ex:?}");
        }
        assert!(again.audit(&AuditOptions::default()).is_conformant());
    }
}

#[test]
fn conflicting_end_is_rejected_before_writing() {
    let (_dir, path) = write_example(Example::Sensor);
    let rec = Recording::open(&path).unwrap();
    let mut groups = recreate(&rec);
    let wrong = Iso8601Timestamp::parse("2019-12-19T13:40:33.151+00:00").unwrap();
    groups[0].members[0].record.end_iso8601 = wrong;
    let out = tempfile::tempdir().unwrap();
    let err = create_recording(&groups, out.path(), &CreateOptions::default()).unwrap_err();
    assert_eq!(err.code(), "redundant_field_conflict");
    assert_eq!(fs::read_dir(out.path()).unwrap().count(), 0);
}

#[test]
fn checksums_are_filled_in_and_verified() {
    let (_dir, path) = write_example(Example::Sensor);
    let rec = Recording::open(&path).unwrap();
    let mut groups = recreate(&rec);
    groups[0].members[0].record.checksum_type = Some("md5".into());
    let out = tempfile::tempdir().unwrap();
    let again = create_recording(&groups, out.path(), &CreateOptions::default()).unwrap();
    let sum = again.records()[1].checksum.clone().unwrap();
    assert_eq!(sum.len(), 32);
    assert!(again.audit(&AuditOptions::default()).is_conformant());

    let bin = out.path().join("sensor_samples.bin");
    let mut bytes = fs::read(&bin).unwrap();
    bytes[0] ^= 1;
    fs::write(&bin, bytes).unwrap();
    assert!(again.audit(&AuditOptions::default()).has_code("checksum_mismatch"));
}

#[test]
fn time_file_plus_time_channel_is_ambiguous() {
    let (_dir, path) = write_example(Example::Sensor);
    let text = fs::read_to_string(&path).unwrap().replace(r#"["pos", "vel", "accl"]"#, r#"["time", "vel", "accl"]"#);
    fs::write(&path, text).unwrap();
    assert_eq!(Recording::open(&path).unwrap_err().code(), "ambiguous_time_source");
}

#[test]
fn amplitude_without_time_source_is_rejected() {
    let (_dir, path) = write_example(Example::Audio);
    let text = fs::read_to_string(&path).unwrap().replace("\"sampling_rate\": 44100,", "");
    fs::write(&path, text).unwrap();
    assert_eq!(Recording::open(&path).unwrap_err().code(), "no_time_source");
}
