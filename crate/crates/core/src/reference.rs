//! The three reference recordings, with generated binary data.
//!
//! Metadata is shipped verbatim (see `fixtures/`). Sample files are not
//! stored; [`Example::write`] synthesizes them deterministically so that
//! every file has the declared size and every time stream ends at
//! `end_iso8601` within one unit of its encoding.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use crate::binio::{self, SampleMatrix};
use crate::dataset::DatasetError;
use crate::metadata::{flatten, parse_metadata, FileRecord};

pub const SENSOR_METADATA: &str = include_str!("../fixtures/recording_metadata.json");
pub const AUDIO_METADATA: &str = include_str!("../fixtures/audio_metadata.json");
pub const HOMESTUDY_METADATA: &str = include_str!("../fixtures/homestudy_metadata.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example {
    /// Separate difference-encoded time file plus a 3-channel int16 file.
    Sensor,
    /// Uniformly sampled stereo audio, 30 s at 44.1 kHz.
    Audio,
    /// Two sessions of two sensors each, every file with its own time channel.
    HomeStudy,
}

impl Example {
    pub const ALL: [Example; 3] = [Example::Sensor, Example::Audio, Example::HomeStudy];

    pub fn metadata_text(self) -> &'static str {
        match self {
            Example::Sensor => SENSOR_METADATA,
            Example::Audio => AUDIO_METADATA,
            Example::HomeStudy => HOMESTUDY_METADATA,
        }
    }

    pub fn metadata_name(self) -> &'static str {
        match self {
            Example::Sensor => "recording_metadata.json",
            Example::Audio => "audio_metadata.json",
            Example::HomeStudy => "homestudy_metadata.json",
        }
    }

    /// Typed records of the example, in document order.
    pub fn records(self) -> Vec<FileRecord> {
        let doc = parse_metadata(self.metadata_text().as_bytes()).expect("reference metadata parses");
        flatten(&doc)
            .expect("reference metadata flattens")
            .iter()
            .map(|r| FileRecord::from_flat(r).expect("reference metadata validates"))
            .collect()
    }

    /// Writes the metadata file and all binaries into `dir`; returns the
    /// metadata path.
    pub fn write(self, dir: &Path) -> Result<PathBuf, DatasetError> {
        fs::create_dir_all(dir).map_err(|source| DatasetError::Io { path: dir.to_path_buf(), source })?;
        for rec in self.records() {
            let matrix = sample_data(&rec);
            let bytes = binio::write_rows(&matrix, &rec.layout())
                .map_err(|source| DatasetError::Bin { file_name: rec.file_name.clone(), source })?;
            let path = dir.join(&rec.file_name);
            fs::write(&path, bytes).map_err(|source| DatasetError::Io { path, source })?;
        }
        let path = dir.join(self.metadata_name());
        fs::write(&path, self.metadata_text()).map_err(|source| DatasetError::Io { path: path.clone(), source })?;
        Ok(path)
    }
}

/// Writes all three examples into `dir`.
pub fn write_all(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    Example::ALL.iter().map(|e| e.write(dir)).collect()
}

/// Integer milliseconds from start to end of a record.
fn duration_ms(rec: &FileRecord) -> i64 {
    let start = rec.start_iso8601.timeline_nanos().expect("anchored");
    let end = rec.end_iso8601.timeline_nanos().expect("anchored");
    (end - start) / 1_000_000
}

/// Elapsed milliseconds of row `i` when `rows` samples span `total` ms.
fn elapsed_ms(i: u64, rows: u64, total: i64) -> i64 {
    if rows < 2 {
        return 0;
    }
    let num = i128::from(total) * i128::from(i);
    let den = i128::from(rows - 1);
    ((2 * num + den) / (2 * den)) as i64
}

fn time_values(rec: &FileRecord) -> Vec<f64> {
    let total = duration_ms(rec);
    let ms: Vec<i64> = (0..rec.rows).map(|i| elapsed_ms(i, rec.rows, total)).collect();
    let per_unit = match rec.units[rec.channel_index("time").unwrap_or(0)].as_str() {
        "s" => 1000.0,
        "us" | "µs" => 0.001,
        "ns" => 0.000_001,
        _ => 1.0,
    };
    let is_difference = rec.compression.as_ref().is_some_and(|c| c.as_str() == "difference");
    if is_difference {
        // raw[0] is the offset of the first sample from start
        let mut prev = 0;
        ms.iter()
            .map(|&t| {
                let d = t - prev;
                prev = t;
                d as f64 / per_unit
            })
            .collect()
    } else {
        ms.iter().map(|&t| t as f64 / per_unit).collect()
    }
}

fn waveform(file_name: &str, row: u64, channel: usize) -> f64 {
    let t = row as f64;
    match file_name {
        "sensor_samples.bin" => {
            let pos = (t * 0.01).sin();
            [pos * 12000.0, (t * 0.01).cos() * 8000.0, -pos * 4000.0][channel]
        }
        "audio_voice_089.raw" => {
            let phase = TAU * 440.0 * t / 44100.0;
            let v = 9000.0 * phase.sin() + 2000.0 * (3.0 * phase + channel as f64).sin();
            v.round()
        }
        name if name.starts_with("temperature") => 36.5 + 0.4 * (t * 0.001).sin(),
        _ => 9.81 + 0.5 * (t * 0.05 + channel as f64).sin(),
    }
}

fn sample_data(rec: &FileRecord) -> SampleMatrix {
    let n = rec.channels.len();
    let time_channel = rec.channel_index("time");
    let times = time_channel.map(|_| time_values(rec));
    let mut values = Vec::with_capacity(rec.rows as usize * n);
    for r in 0..rec.rows {
        for c in 0..n {
            values.push(match (&times, Some(c) == time_channel) {
                (Some(ts), true) => ts[r as usize],
                _ => waveform(&rec.file_name, r, c),
            });
        }
    }
    SampleMatrix::from_physical(&values, n, rec.format(), rec.scale_factors.clone())
        .expect("reference data fits its format")
        .with_labels(rec.channels.clone(), rec.units.clone())
}
