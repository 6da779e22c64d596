//! Raw multiplexed sample files.
//!
//! A sample file is a headerless row-major matrix: element `(r, c)` starts at
//! byte `(r * n_channels + c) * bits / 8`. Nothing else is stored, so any row
//! range can be read with one seek.

use std::fmt;
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BinError {
    #[error("size_mismatch: expected {expected} bytes, found {actual}")]
    SizeMismatch { expected: u64, actual: u64 },
    #[error("row range {start}..{end} is outside 0..{rows}")]
    OutOfBounds { start: u64, end: u64, rows: u64 },
    #[error("quantization_overflow at row {row}, channel {channel}: {value} does not fit {format}")]
    QuantizationOverflow { row: usize, channel: usize, value: String, format: NumberFormat },
    #[error("unsupported number format {data_type} with {bits} bits")]
    UnsupportedFormat { data_type: String, bits: u32 },
    #[error("matrix is {rows}x{channels}, layout expects {expected_rows}x{expected_channels}")]
    ShapeMismatch { rows: usize, channels: usize, expected_rows: u64, expected_channels: usize },
    #[error("stored values of type {stored} cannot be written as {format}")]
    FormatMismatch { stored: &'static str, format: NumberFormat },
    #[error("{0} scale factors for {1} channels")]
    ScaleFactorCount(usize, usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataType {
    Int,
    UInt,
    Float,
}

impl DataType {
    pub fn as_str(self) -> &'static str {
        match self {
            DataType::Int => "int",
            DataType::UInt => "uint",
            DataType::Float => "float",
        }
    }
}

impl FromStr for DataType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "int" => Ok(DataType::Int),
            "uint" => Ok(DataType::UInt),
            "float" => Ok(DataType::Float),
            other => Err(format!("unknown data type {other:?}")),
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endianness {
    Big,
    Little,
}

impl Endianness {
    pub fn as_str(self) -> &'static str {
        match self {
            Endianness::Big => "big",
            Endianness::Little => "little",
        }
    }
}

impl FromStr for Endianness {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "big" => Ok(Endianness::Big),
            "little" => Ok(Endianness::Little),
            other => Err(format!("unknown byte order {other:?}")),
        }
    }
}

impl fmt::Display for Endianness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A storable number format: data type plus bit width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NumberFormat {
    data_type: DataType,
    bits: u8,
}

impl NumberFormat {
    pub const INT16: NumberFormat = NumberFormat { data_type: DataType::Int, bits: 16 };
    pub const UINT32: NumberFormat = NumberFormat { data_type: DataType::UInt, bits: 32 };
    pub const FLOAT32: NumberFormat = NumberFormat { data_type: DataType::Float, bits: 32 };
    pub const FLOAT64: NumberFormat = NumberFormat { data_type: DataType::Float, bits: 64 };

    pub fn new(data_type: DataType, bits: u32) -> Result<Self, BinError> {
        let ok = match data_type {
            DataType::Float => matches!(bits, 32 | 64),
            DataType::Int | DataType::UInt => matches!(bits, 8 | 16 | 32 | 64),
        };
        if !ok {
            return Err(BinError::UnsupportedFormat { data_type: data_type.to_string(), bits });
        }
        Ok(Self { data_type, bits: bits as u8 })
    }

    pub fn data_type(self) -> DataType {
        self.data_type
    }

    pub fn bits(self) -> u32 {
        u32::from(self.bits)
    }

    pub fn bytes(self) -> usize {
        usize::from(self.bits / 8)
    }

    /// Inclusive range of a signed integer of this width.
    pub fn int_range(self) -> (i128, i128) {
        let half = 1i128 << (self.bits - 1);
        (-half, half - 1)
    }

    pub fn uint_max(self) -> i128 {
        (1i128 << self.bits) - 1
    }
}

impl fmt::Display for NumberFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.data_type, self.bits)
    }
}

/// One stored value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Number {
    Int(i64),
    UInt(u64),
    Float(f64),
}

impl Number {
    pub fn as_f64(self) -> f64 {
        match self {
            Number::Int(v) => v as f64,
            Number::UInt(v) => v as f64,
            Number::Float(v) => v,
        }
    }
}

/// Column-agnostic storage of a matrix's raw values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    Int(Vec<i64>),
    UInt(Vec<u64>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl Samples {
    pub fn empty(format: NumberFormat) -> Self {
        match (format.data_type(), format.bits()) {
            (DataType::Int, _) => Samples::Int(Vec::new()),
            (DataType::UInt, _) => Samples::UInt(Vec::new()),
            (DataType::Float, 32) => Samples::F32(Vec::new()),
            (DataType::Float, _) => Samples::F64(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Samples::Int(v) => v.len(),
            Samples::UInt(v) => v.len(),
            Samples::F32(v) => v.len(),
            Samples::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, idx: usize) -> Number {
        match self {
            Samples::Int(v) => Number::Int(v[idx]),
            Samples::UInt(v) => Number::UInt(v[idx]),
            Samples::F32(v) => Number::Float(f64::from(v[idx])),
            Samples::F64(v) => Number::Float(v[idx]),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Samples::Int(_) => "int",
            Samples::UInt(_) => "uint",
            Samples::F32(_) => "float32",
            Samples::F64(_) => "float64",
        }
    }

    fn slice(&self, range: std::ops::Range<usize>) -> Samples {
        match self {
            Samples::Int(v) => Samples::Int(v[range].to_vec()),
            Samples::UInt(v) => Samples::UInt(v[range].to_vec()),
            Samples::F32(v) => Samples::F32(v[range].to_vec()),
            Samples::F64(v) => Samples::F64(v[range].to_vec()),
        }
    }

    fn extend(&mut self, other: &Samples) -> bool {
        match (self, other) {
            (Samples::Int(a), Samples::Int(b)) => a.extend_from_slice(b),
            (Samples::UInt(a), Samples::UInt(b)) => a.extend_from_slice(b),
            (Samples::F32(a), Samples::F32(b)) => a.extend_from_slice(b),
            (Samples::F64(a), Samples::F64(b)) => a.extend_from_slice(b),
            _ => return false,
        }
        true
    }

    /// Overwrites element `idx` with `value`, which must already fit the storage type.
    fn set(&mut self, idx: usize, value: Number) -> bool {
        match (self, value) {
            (Samples::Int(v), Number::Int(x)) => v[idx] = x,
            (Samples::UInt(v), Number::UInt(x)) => v[idx] = x,
            (Samples::F32(v), Number::Float(x)) => v[idx] = x as f32,
            (Samples::F64(v), Number::Float(x)) => v[idx] = x,
            _ => return false,
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryLayout {
    pub format: NumberFormat,
    pub endianness: Endianness,
    pub n_channels: usize,
    pub rows: u64,
    pub scale_factors: Option<Vec<f64>>,
}

impl BinaryLayout {
    pub fn new(format: NumberFormat, endianness: Endianness, n_channels: usize, rows: u64) -> Self {
        Self { format, endianness, n_channels, rows, scale_factors: None }
    }

    pub fn with_scale_factors(mut self, scale_factors: Vec<f64>) -> Self {
        self.scale_factors = Some(scale_factors);
        self
    }

    pub fn row_bytes(&self) -> u64 {
        (self.n_channels * self.format.bytes()) as u64
    }

    pub fn expected_len(&self) -> u64 {
        self.rows * self.row_bytes()
    }
}

/// A `rows x n_channels` block of samples with its stored representation.
///
/// Physical values are `stored * scale_factor[channel]` when scale factors
/// are present and `stored` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    rows: usize,
    n_channels: usize,
    stored: Samples,
    scale_factors: Option<Vec<f64>>,
    pub channel_labels: Vec<String>,
    pub units: Vec<String>,
}

impl SampleMatrix {
    pub fn from_stored(n_channels: usize, stored: Samples, scale_factors: Option<Vec<f64>>) -> Result<Self, BinError> {
        let len = stored.len();
        if n_channels == 0 && len != 0 || n_channels != 0 && !len.is_multiple_of(n_channels) {
            return Err(BinError::ShapeMismatch { rows: len, channels: n_channels, expected_rows: 0, expected_channels: n_channels });
        }
        if let Some(sf) = &scale_factors {
            if sf.len() != n_channels {
                return Err(BinError::ScaleFactorCount(sf.len(), n_channels));
            }
        }
        let rows = len.checked_div(n_channels).unwrap_or(0);
        Ok(Self { rows, n_channels, stored, scale_factors, channel_labels: Vec::new(), units: Vec::new() })
    }

    /// Quantizes physical values (row-major) into `format`. Integer targets
    /// use round-half-to-even of `physical / scale`.
    pub fn from_physical(
        values: &[f64],
        n_channels: usize,
        format: NumberFormat,
        scale_factors: Option<Vec<f64>>,
    ) -> Result<Self, BinError> {
        if let Some(sf) = &scale_factors {
            if sf.len() != n_channels {
                return Err(BinError::ScaleFactorCount(sf.len(), n_channels));
            }
        }
        let scale = |idx: usize| scale_factors.as_ref().map_or(1.0, |sf| sf[idx % n_channels]);
        let overflow = |idx: usize, v: f64| BinError::QuantizationOverflow {
            row: idx / n_channels.max(1),
            channel: idx % n_channels.max(1),
            value: v.to_string(),
            format,
        };
        let stored = match (format.data_type(), format.bits()) {
            (DataType::Float, 32) => Samples::F32(
                values
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let q = (v / scale(i)) as f32;
                        if v.is_finite() && !q.is_finite() {
                            Err(overflow(i, v))
                        } else {
                            Ok(q)
                        }
                    })
                    .collect::<Result<_, _>>()?,
            ),
            (DataType::Float, _) => Samples::F64(values.iter().enumerate().map(|(i, &v)| v / scale(i)).collect()),
            (DataType::Int, bits) => {
                let lim = 2f64.powi(bits as i32 - 1);
                Samples::Int(
                    values
                        .iter()
                        .enumerate()
                        .map(|(i, &v)| {
                            let q = (v / scale(i)).round_ties_even();
                            if q.is_finite() && q >= -lim && q < lim {
                                Ok(q as i64)
                            } else {
                                Err(overflow(i, v))
                            }
                        })
                        .collect::<Result<_, _>>()?,
                )
            }
            (DataType::UInt, bits) => {
                let lim = 2f64.powi(bits as i32);
                Samples::UInt(
                    values
                        .iter()
                        .enumerate()
                        .map(|(i, &v)| {
                            let q = (v / scale(i)).round_ties_even();
                            if q.is_finite() && q >= 0.0 && q < lim {
                                Ok(q as u64)
                            } else {
                                Err(overflow(i, v))
                            }
                        })
                        .collect::<Result<_, _>>()?,
                )
            }
        };
        Self::from_stored(n_channels, stored, scale_factors)
    }

    pub fn empty(n_channels: usize, format: NumberFormat) -> Self {
        Self { rows: 0, n_channels, stored: Samples::empty(format), scale_factors: None, channel_labels: Vec::new(), units: Vec::new() }
    }

    pub fn with_labels(mut self, channel_labels: Vec<String>, units: Vec<String>) -> Self {
        self.channel_labels = channel_labels;
        self.units = units;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn stored(&self) -> &Samples {
        &self.stored
    }

    pub fn scale_factors(&self) -> Option<&[f64]> {
        self.scale_factors.as_deref()
    }

    pub fn get(&self, row: usize, channel: usize) -> Number {
        self.stored.get(row * self.n_channels + channel)
    }

    pub fn physical(&self, row: usize, channel: usize) -> f64 {
        let v = self.get(row, channel).as_f64();
        match &self.scale_factors {
            Some(sf) => v * sf[channel],
            None => v,
        }
    }

    /// All physical values, row-major.
    pub fn physical_values(&self) -> Vec<f64> {
        (0..self.rows).flat_map(|r| (0..self.n_channels).map(move |c| (r, c))).map(|(r, c)| self.physical(r, c)).collect()
    }

    pub fn column(&self, channel: usize) -> Vec<Number> {
        (0..self.rows).map(|r| self.get(r, channel)).collect()
    }

    /// Replaces one column with already-encoded values of the matching storage type.
    pub fn set_column(&mut self, channel: usize, values: &[Number]) -> Result<(), BinError> {
        if values.len() != self.rows || channel >= self.n_channels {
            return Err(BinError::ShapeMismatch {
                rows: values.len(),
                channels: channel + 1,
                expected_rows: self.rows as u64,
                expected_channels: self.n_channels,
            });
        }
        for (r, &v) in values.iter().enumerate() {
            if !self.stored.set(r * self.n_channels + channel, v) {
                return Err(BinError::FormatMismatch { stored: self.stored.kind(), format: NumberFormat::FLOAT64 });
            }
        }
        Ok(())
    }

    pub fn slice_rows(&self, start: usize, end: usize) -> SampleMatrix {
        let stored = self.stored.slice(start * self.n_channels..end * self.n_channels);
        SampleMatrix {
            rows: end - start,
            n_channels: self.n_channels,
            stored,
            scale_factors: self.scale_factors.clone(),
            channel_labels: self.channel_labels.clone(),
            units: self.units.clone(),
        }
    }

    /// Appends the rows of `other`; both must share storage type and width.
    pub fn append(&mut self, other: &SampleMatrix) -> bool {
        if other.n_channels != self.n_channels || !self.stored.extend(&other.stored) {
            return false;
        }
        self.rows += other.rows;
        true
    }

    /// Count of NaN or infinite physical values.
    pub fn non_finite_count(&self) -> usize {
        match &self.stored {
            Samples::F32(v) => v.iter().filter(|x| !x.is_finite()).count(),
            Samples::F64(v) => v.iter().filter(|x| !x.is_finite()).count(),
            _ => 0,
        }
    }
}

/// Checks a byte length against the layout.
pub fn verify_size(actual: u64, layout: &BinaryLayout) -> Result<(), BinError> {
    let expected = layout.expected_len();
    if expected != actual {
        return Err(BinError::SizeMismatch { expected, actual });
    }
    Ok(())
}

/// Size check on a seekable source; leaves the cursor at the end.
pub fn verify_source_size<S: Seek>(source: &mut S, layout: &BinaryLayout) -> Result<(), BinError> {
    let actual = source.seek(SeekFrom::End(0))?;
    verify_size(actual, layout)
}

macro_rules! decode_each {
    ($bytes:expr, $ty:ty, $endian:expr) => {{
        const N: usize = std::mem::size_of::<$ty>();
        $bytes.chunks_exact(N).map(|c| {
            let arr: [u8; N] = c.try_into().unwrap();
            match $endian {
                Endianness::Little => <$ty>::from_le_bytes(arr),
                Endianness::Big => <$ty>::from_be_bytes(arr),
            }
        })
    }};
}

fn decode_samples(bytes: &[u8], format: NumberFormat, endian: Endianness) -> Samples {
    match (format.data_type(), format.bits()) {
        (DataType::Int, 8) => Samples::Int(decode_each!(bytes, i8, endian).map(i64::from).collect()),
        (DataType::Int, 16) => Samples::Int(decode_each!(bytes, i16, endian).map(i64::from).collect()),
        (DataType::Int, 32) => Samples::Int(decode_each!(bytes, i32, endian).map(i64::from).collect()),
        (DataType::Int, _) => Samples::Int(decode_each!(bytes, i64, endian).collect()),
        (DataType::UInt, 8) => Samples::UInt(bytes.iter().map(|&b| u64::from(b)).collect()),
        (DataType::UInt, 16) => Samples::UInt(decode_each!(bytes, u16, endian).map(u64::from).collect()),
        (DataType::UInt, 32) => Samples::UInt(decode_each!(bytes, u32, endian).map(u64::from).collect()),
        (DataType::UInt, _) => Samples::UInt(decode_each!(bytes, u64, endian).collect()),
        (DataType::Float, 32) => Samples::F32(decode_each!(bytes, f32, endian).collect()),
        (DataType::Float, _) => Samples::F64(decode_each!(bytes, f64, endian).collect()),
    }
}

/// Reads rows `[row_start, row_start + row_count)` with a single seek.
pub fn read_rows<S: Read + Seek>(source: &mut S, layout: &BinaryLayout, row_start: u64, row_count: u64) -> Result<SampleMatrix, BinError> {
    verify_source_size(source, layout)?;
    let end = row_start.checked_add(row_count).filter(|&e| e <= layout.rows).ok_or(BinError::OutOfBounds {
        start: row_start,
        end: row_start.saturating_add(row_count),
        rows: layout.rows,
    })?;
    if let Some(sf) = &layout.scale_factors {
        if sf.len() != layout.n_channels {
            return Err(BinError::ScaleFactorCount(sf.len(), layout.n_channels));
        }
    }
    let row_bytes = layout.row_bytes();
    source.seek(SeekFrom::Start(row_start * row_bytes))?;
    let mut buf = vec![0u8; ((end - row_start) * row_bytes) as usize];
    source.read_exact(&mut buf)?;
    let stored = decode_samples(&buf, layout.format, layout.endianness);
    SampleMatrix::from_stored(layout.n_channels, stored, layout.scale_factors.clone())
}

fn check_shape(matrix: &SampleMatrix, layout: &BinaryLayout) -> Result<(), BinError> {
    if matrix.n_channels != layout.n_channels || matrix.rows as u64 != layout.rows {
        return Err(BinError::ShapeMismatch {
            rows: matrix.rows,
            channels: matrix.n_channels,
            expected_rows: layout.rows,
            expected_channels: layout.n_channels,
        });
    }
    Ok(())
}

macro_rules! put {
    ($out:expr, $v:expr, $endian:expr) => {
        match $endian {
            Endianness::Little => $out.extend_from_slice(&$v.to_le_bytes()),
            Endianness::Big => $out.extend_from_slice(&$v.to_be_bytes()),
        }
    };
}

/// Serializes the matrix into the raw byte layout.
pub fn write_rows(matrix: &SampleMatrix, layout: &BinaryLayout) -> Result<Vec<u8>, BinError> {
    check_shape(matrix, layout)?;
    let format = layout.format;
    let endian = layout.endianness;
    let n = matrix.n_channels.max(1);
    let mut out = Vec::with_capacity(layout.expected_len() as usize);
    let overflow = |idx: usize, value: String| BinError::QuantizationOverflow { row: idx / n, channel: idx % n, value, format };
    let mismatch = BinError::FormatMismatch { stored: matrix.stored.kind(), format };
    match format.data_type() {
        DataType::Int | DataType::UInt => {
            let (lo, hi) = match format.data_type() {
                DataType::Int => format.int_range(),
                _ => (0, format.uint_max()),
            };
            let wide: Box<dyn Iterator<Item = i128>> = match &matrix.stored {
                Samples::Int(v) => Box::new(v.iter().map(|&x| i128::from(x))),
                Samples::UInt(v) => Box::new(v.iter().map(|&x| i128::from(x))),
                _ => return Err(mismatch),
            };
            for (idx, v) in wide.enumerate() {
                if v < lo || v > hi {
                    return Err(overflow(idx, v.to_string()));
                }
                match (format.data_type(), format.bits()) {
                    (DataType::Int, 8) => put!(out, v as i8, endian),
                    (DataType::Int, 16) => put!(out, v as i16, endian),
                    (DataType::Int, 32) => put!(out, v as i32, endian),
                    (DataType::Int, _) => put!(out, v as i64, endian),
                    (_, 8) => out.push(v as u8),
                    (_, 16) => put!(out, v as u16, endian),
                    (_, 32) => put!(out, v as u32, endian),
                    _ => put!(out, v as u64, endian),
                }
            }
        }
        DataType::Float => match (&matrix.stored, format.bits()) {
            (Samples::F32(v), 32) => v.iter().for_each(|x| put!(out, x, endian)),
            (Samples::F64(v), 64) => v.iter().for_each(|x| put!(out, x, endian)),
            _ => return Err(mismatch),
        },
    }
    Ok(out)
}

pub fn write_rows_to<W: Write>(writer: &mut W, matrix: &SampleMatrix, layout: &BinaryLayout) -> Result<(), BinError> {
    let bytes = write_rows(matrix, layout)?;
    writer.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn float32_little_endian_one() {
        let m = SampleMatrix::from_stored(1, Samples::F32(vec![1.0]), None).unwrap();
        let layout = BinaryLayout::new(NumberFormat::FLOAT32, Endianness::Little, 1, 1);
        assert_eq!(write_rows(&m, &layout).unwrap(), vec![0x00, 0x00, 0x80, 0x3F]);
    }

    #[test]
    fn uint16_big_endian() {
        let m = SampleMatrix::from_stored(1, Samples::UInt(vec![258]), None).unwrap();
        let fmt = NumberFormat::new(DataType::UInt, 16).unwrap();
        let layout = BinaryLayout::new(fmt, Endianness::Big, 1, 1);
        assert_eq!(write_rows(&m, &layout).unwrap(), vec![0x01, 0x02]);
    }

    #[test]
    fn scale_factor_quantization() {
        // 0.0469378 / 0.00469378 evaluates to exactly 10.0 in binary64.
        let m = SampleMatrix::from_physical(&[0.0469378], 1, NumberFormat::INT16, Some(vec![0.00469378])).unwrap();
        assert_eq!(m.get(0, 0), Number::Int(10));
        assert!((m.physical(0, 0) - 0.0469378).abs() <= 0.00469378 / 2.0);
    }

    #[test]
    fn quantization_rounds_half_to_even() {
        let m = SampleMatrix::from_physical(&[0.5, 1.5, 2.5, -0.5], 1, NumberFormat::INT16, None).unwrap();
        assert_eq!(m.stored(), &Samples::Int(vec![0, 2, 2, 0]));
    }

    #[test]
    fn quantization_overflow_names_position() {
        let err = SampleMatrix::from_physical(&[0.0, 1.0, 2.0, 40000.0], 2, NumberFormat::INT16, None).unwrap_err();
        match err {
            BinError::QuantizationOverflow { row, channel, .. } => assert_eq!((row, channel), (1, 1)),
            other => panic!("unexpected {other:?}"),
        }
        let u8f = NumberFormat::new(DataType::UInt, 8).unwrap();
        let m = SampleMatrix::from_stored(1, Samples::UInt(vec![256]), None).unwrap();
        let layout = BinaryLayout::new(u8f, Endianness::Little, 1, 1);
        assert!(matches!(write_rows(&m, &layout), Err(BinError::QuantizationOverflow { .. })));
    }

    #[test]
    fn sensor_samples_size() {
        let layout = BinaryLayout::new(NumberFormat::INT16, Endianness::Little, 3, 4833);
        assert_eq!(layout.expected_len(), 28_998);
        assert!(verify_size(28_998, &layout).is_ok());
        match verify_size(28_997, &layout) {
            Err(BinError::SizeMismatch { expected, actual }) => assert_eq!((expected, actual), (28_998, 28_997)),
            other => panic!("unexpected {other:?}"),
        }
        let empty = BinaryLayout::new(NumberFormat::INT16, Endianness::Little, 3, 0);
        assert!(verify_size(0, &empty).is_ok());
    }

    #[test]
    fn read_full_and_empty_ranges() {
        let values: Vec<i64> = (0..4833 * 3).map(|i| (i % 2000) as i64 - 1000).collect();
        let m = SampleMatrix::from_stored(3, Samples::Int(values), None).unwrap();
        let layout = BinaryLayout::new(NumberFormat::INT16, Endianness::Little, 3, 4833);
        let bytes = write_rows(&m, &layout).unwrap();
        assert_eq!(bytes.len(), 28_998);
        let mut cur = Cursor::new(bytes);
        let full = read_rows(&mut cur, &layout, 0, 4833).unwrap();
        assert_eq!((full.rows(), full.n_channels()), (4833, 3));
        assert_eq!(full, m);
        let empty = read_rows(&mut cur, &layout, 17, 0).unwrap();
        assert_eq!((empty.rows(), empty.n_channels()), (0, 3));
        assert!(matches!(read_rows(&mut cur, &layout, 4800, 34), Err(BinError::OutOfBounds { .. })));
    }

    #[test]
    fn read_rejects_wrong_size() {
        let layout = BinaryLayout::new(NumberFormat::INT16, Endianness::Little, 3, 2);
        let mut cur = Cursor::new(vec![0u8; 11]);
        assert!(matches!(read_rows(&mut cur, &layout, 0, 1), Err(BinError::SizeMismatch { expected: 12, actual: 11 })));
    }

    #[test]
    fn scale_applies_on_read() {
        let m = SampleMatrix::from_stored(2, Samples::Int(vec![10, -4]), None).unwrap();
        let layout = BinaryLayout::new(NumberFormat::INT16, Endianness::Big, 2, 1).with_scale_factors(vec![0.5, 2.0]);
        let bytes = write_rows(&m, &layout).unwrap();
        let back = read_rows(&mut Cursor::new(bytes), &layout, 0, 1).unwrap();
        assert_eq!(back.physical_values(), vec![5.0, -8.0]);
    }

    #[test]
    fn nan_payload_survives() {
        let nan = f32::from_bits(0x7fa0_0001);
        let m = SampleMatrix::from_stored(1, Samples::F32(vec![nan]), None).unwrap();
        let layout = BinaryLayout::new(NumberFormat::FLOAT32, Endianness::Little, 1, 1);
        let bytes = write_rows(&m, &layout).unwrap();
        assert_eq!(bytes, 0x7fa0_0001u32.to_le_bytes());
        let back = read_rows(&mut Cursor::new(bytes.clone()), &layout, 0, 1).unwrap();
        assert_eq!(write_rows(&back, &layout).unwrap(), bytes);
        assert_eq!(back.non_finite_count(), 1);
    }

    #[test]
    fn float_rejects_small_widths() {
        assert!(NumberFormat::new(DataType::Float, 16).is_err());
        assert!(NumberFormat::new(DataType::Int, 24).is_err());
        assert!(NumberFormat::new(DataType::UInt, 64).is_ok());
    }
}
