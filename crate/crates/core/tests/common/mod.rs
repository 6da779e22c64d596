#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde_json::Value;
use tempfile::TempDir;
use tsdf::metadata::FlatRecord;
use tsdf::reference::Example;

/// The flattened view of the sensor recording, one column per file:
/// (field, time file value, samples file value).
pub const SENSOR_FLAT: [(&str, &str, &str); 14] = [
    ("file_name", r#""sensor_time.bin""#, r#""sensor_samples.bin""#),
    ("subject_id", r#""0713""#, r#""0713""#),
    ("study_id", r#""drug513trialphase2""#, r#""drug513trialphase2""#),
    ("device_id", r#""serialUID071290123""#, r#""serialUID071290123""#),
    ("endianness", r#""little""#, r#""little""#),
    ("metadata_version", r#""0.1""#, r#""0.1""#),
    ("start_iso8601", r#""2019-12-19T12:41:45.716+00:00""#, r#""2019-12-19T12:41:45.716+00:00""#),
    ("end_iso8601", r#""2019-12-19T13:39:33.151+00:00""#, r#""2019-12-19T13:39:33.151+00:00""#),
    ("rows", "4833", "4833"),
    ("channels", r#"["time"]"#, r#"["pos","vel","accl"]"#),
    ("units", r#"["s"]"#, r#"["m","m/s","m/s/s"]"#),
    ("compression", r#""difference""#, ""),
    ("data_type", r#""float""#, r#""int""#),
    ("bits", "32", "16"),
];

/// Compares one flattened record against a column of [`SENSOR_FLAT`];
/// returns the first difference.
pub fn sensor_flat_diff(rec: &FlatRecord, column: usize) -> Option<String> {
    let mut expected_fields = 0;
    for (field, a, b) in SENSOR_FLAT {
        let cell = if column == 0 { a } else { b };
        if cell.is_empty() {
            if rec.get(field).is_some() {
                return Some(format!("{field} should be absent"));
            }
            continue;
        }
        expected_fields += 1;
        let want: Value = serde_json::from_str(cell).unwrap();
        match rec.get(field) {
            Some(v) if v.to_json_value() == want => {}
            other => return Some(format!("{field}: expected {want}, got {other:?}")),
        }
    }
    (rec.fields.len() != expected_fields).then(|| format!("{} fields, expected {expected_fields}", rec.fields.len()))
}

pub fn write_example(example: Example) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = example.write(dir.path()).unwrap();
    (dir, path)
}

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}
