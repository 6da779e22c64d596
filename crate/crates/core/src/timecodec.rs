//! ISO 8601 timestamps and the sample-time encodings (relative, absolute,
//! difference, uniform).
//!
//! Instants are carried as `i64` nanoseconds on a single timeline. For
//! timestamps with a known offset or a `Z` designator that timeline is the
//! Unix epoch. A local-only timestamp has no absolute anchor, so its wall
//! clock reading is placed on the same scale as if it were UTC; relative
//! arithmetic still works, epoch conversion does not.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::binio::{DataType, Number, NumberFormat};

const NANOS_PER_SEC: i128 = 1_000_000_000;
const NANOS_PER_DAY: i128 = 86_400 * NANOS_PER_SEC;
const MAX_OFFSET_MINUTES: i16 = 18 * 60;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimeError {
    #[error("malformed ISO 8601 timestamp {text:?}: {defect}")]
    Malformed { text: String, defect: String },
    #[error("invalid calendar date {year:04}-{month:02}-{day:02}")]
    InvalidDate { year: i32, month: u8, day: u8 },
    #[error("UTC offset {minutes} min is outside +/-18:00")]
    OffsetOutOfRange { minutes: i32 },
    #[error("timestamp has no UTC offset, so it has no absolute anchor")]
    NoAbsoluteAnchor,
    #[error("instant is outside the representable epoch-nanosecond range")]
    Overflow,
    #[error("time value at index {index} decreases the time axis")]
    NonMonotonic { index: usize },
    #[error("instant at index {index} is not representable in {unit} without loss")]
    UnitPrecisionLoss { index: usize, unit: TimeUnit },
    #[error("encoded time value at index {index} does not fit in {format}")]
    ValueOverflow { index: usize, format: NumberFormat },
    #[error("non-finite time value at index {index}")]
    NonFinite { index: usize },
    #[error("instant at index {index} is off the uniform sampling grid")]
    NotUniform { index: usize },
    #[error("uniform time encoding requires a positive sampling rate")]
    MissingSamplingRate,
    #[error("expected {expected} raw time values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("unsupported time unit {0:?} (expected s, ms, us or ns)")]
    UnsupportedUnit(String),
}

impl TimeError {
    /// Stable short code used in validation reports.
    pub fn code(&self) -> &'static str {
        match self {
            TimeError::Malformed { .. } => "malformed_iso8601",
            TimeError::InvalidDate { .. } => "invalid_date",
            TimeError::OffsetOutOfRange { .. } => "offset_out_of_range",
            TimeError::NoAbsoluteAnchor => "no_absolute_anchor",
            TimeError::Overflow => "time_overflow",
            TimeError::NonMonotonic { .. } => "nonmonotonic_time",
            TimeError::UnitPrecisionLoss { .. } => "unit_precision_loss",
            TimeError::ValueOverflow { .. } => "time_value_overflow",
            TimeError::NonFinite { .. } => "non_finite_time",
            TimeError::NotUniform { .. } => "not_uniform",
            TimeError::MissingSamplingRate => "missing_sampling_rate",
            TimeError::LengthMismatch { .. } => "time_length_mismatch",
            TimeError::UnsupportedUnit(_) => "unsupported_time_unit",
        }
    }
}

/// What the source text said about the relation to UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UtcOffset {
    /// `±hh:mm`, in minutes east of UTC.
    Known(i16),
    /// `Z`: UTC is known, the local offset is not.
    Utc,
    /// No designator: only the local wall-clock time is known.
    Local,
}

impl UtcOffset {
    pub fn is_anchored(self) -> bool {
        !matches!(self, UtcOffset::Local)
    }

    fn minutes(self) -> i16 {
        match self {
            UtcOffset::Known(m) => m,
            UtcOffset::Utc | UtcOffset::Local => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Iso8601Timestamp {
    year: i32,
    month: u8,
    day: u8,
    hour: u8,
    minute: u8,
    second: u8,
    nanos: u32,
    frac_digits: u8,
    offset: UtcOffset,
}

fn is_leap(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        2 => 28,
        _ => 0,
    }
}

/// Days since 1970-01-01 in the proleptic Gregorian calendar.
fn days_from_civil(year: i32, month: u8, day: u8) -> i64 {
    let y = i64::from(year) - i64::from(month <= 2);
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (i64::from(month) + 9) % 12;
    let doy = (153 * mp + 2) / 5 + i64::from(day) - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn civil_from_days(days: i64) -> (i64, u8, u8) {
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = (doy - (153 * mp + 2) / 5 + 1) as u8;
    let month = if mp < 10 { mp + 3 } else { mp - 9 } as u8;
    let year = yoe + era * 400 + i64::from(month <= 2);
    (year, month, day)
}

fn digits_needed(nanos: u32) -> u8 {
    let mut digits = 9;
    let mut n = nanos;
    while digits > 0 && n.is_multiple_of(10) {
        n /= 10;
        digits -= 1;
    }
    digits
}

impl Iso8601Timestamp {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        year: i32,
        month: u8,
        day: u8,
        hour: u8,
        minute: u8,
        second: u8,
        nanos: u32,
        frac_digits: u8,
        offset: UtcOffset,
    ) -> Result<Self, TimeError> {
        if !(0..=9999).contains(&year) || !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
            return Err(TimeError::InvalidDate { year, month, day });
        }
        let malformed = |defect: &str| TimeError::Malformed {
            text: format!("{year:04}-{month:02}-{day:02}T{hour:02}:{minute:02}:{second:02}"),
            defect: defect.to_string(),
        };
        if hour >= 24 || minute >= 60 || second >= 60 {
            return Err(malformed("time of day out of range"));
        }
        if frac_digits > 9 || nanos >= 1_000_000_000 || digits_needed(nanos) > frac_digits {
            return Err(malformed("fraction does not fit the stated precision"));
        }
        if let UtcOffset::Known(m) = offset {
            if m.abs() > MAX_OFFSET_MINUTES {
                return Err(TimeError::OffsetOutOfRange { minutes: i32::from(m) });
            }
        }
        Ok(Self { year, month, day, hour, minute, second, nanos, frac_digits, offset })
    }

    pub fn parse(text: &str) -> Result<Self, TimeError> {
        parse_iso8601(text)
    }

    pub fn year(&self) -> i32 {
        self.year
    }
    pub fn month(&self) -> u8 {
        self.month
    }
    pub fn day(&self) -> u8 {
        self.day
    }
    pub fn hour(&self) -> u8 {
        self.hour
    }
    pub fn minute(&self) -> u8 {
        self.minute
    }
    pub fn second(&self) -> u8 {
        self.second
    }
    /// Fractional second in nanoseconds.
    pub fn nanos(&self) -> u32 {
        self.nanos
    }
    /// Number of fractional digits written in the source text.
    pub fn frac_digits(&self) -> u8 {
        self.frac_digits
    }
    pub fn offset(&self) -> UtcOffset {
        self.offset
    }

    fn wall_nanos(&self) -> i128 {
        let days = i128::from(days_from_civil(self.year, self.month, self.day));
        let secs = i128::from(self.hour) * 3600 + i128::from(self.minute) * 60 + i128::from(self.second);
        days * NANOS_PER_DAY + secs * NANOS_PER_SEC + i128::from(self.nanos)
    }

    fn timeline_nanos_wide(&self) -> i128 {
        self.wall_nanos() - i128::from(self.offset.minutes()) * 60 * NANOS_PER_SEC
    }

    /// Nanoseconds since the Unix epoch. Fails for local-only timestamps.
    pub fn epoch_nanos(&self) -> Result<i64, TimeError> {
        if !self.offset.is_anchored() {
            return Err(TimeError::NoAbsoluteAnchor);
        }
        self.timeline_nanos()
    }

    /// Position on the instant timeline; local-only timestamps are read as
    /// if their wall clock were UTC.
    pub fn timeline_nanos(&self) -> Result<i64, TimeError> {
        i64::try_from(self.timeline_nanos_wide()).map_err(|_| TimeError::Overflow)
    }

    /// Inverse of [`timeline_nanos`](Self::timeline_nanos): renders `nanos`
    /// with the given offset, using at least `min_digits` fractional digits
    /// and as many more as needed to stay exact.
    pub fn from_timeline_nanos(nanos: i64, offset: UtcOffset, min_digits: u8) -> Result<Self, TimeError> {
        let wall = i128::from(nanos) + i128::from(offset.minutes()) * 60 * NANOS_PER_SEC;
        let days = wall.div_euclid(NANOS_PER_DAY);
        let in_day = wall.rem_euclid(NANOS_PER_DAY);
        let (year, month, day) = civil_from_days(days as i64);
        let secs = in_day / NANOS_PER_SEC;
        let frac = (in_day % NANOS_PER_SEC) as u32;
        let digits = digits_needed(frac).max(min_digits.min(9));
        let year = i32::try_from(year).map_err(|_| TimeError::Overflow)?;
        Self::new(year, month, day, (secs / 3600) as u8, (secs / 60 % 60) as u8, (secs % 60) as u8, frac, digits, offset)
    }

    /// Same reading with a different number of written fractional digits.
    pub fn with_frac_digits(mut self, digits: u8) -> Result<Self, TimeError> {
        if digits > 9 || digits_needed(self.nanos) > digits {
            return Err(TimeError::Malformed { text: self.to_string(), defect: format!("cannot render fraction with {digits} digits") });
        }
        self.frac_digits = digits;
        Ok(self)
    }
}

/// Milliseconds since the Unix epoch, sub-millisecond part truncated toward zero.
pub fn to_epoch_millis(t: &Iso8601Timestamp) -> Result<i64, TimeError> {
    if !t.offset.is_anchored() {
        return Err(TimeError::NoAbsoluteAnchor);
    }
    let ms = t.timeline_nanos_wide() / 1_000_000;
    i64::try_from(ms).map_err(|_| TimeError::Overflow)
}

struct Cursor<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn fail(&self, defect: impl Into<String>) -> TimeError {
        TimeError::Malformed { text: self.text.to_string(), defect: defect.into() }
    }

    fn digits(&mut self, n: usize, what: &str) -> Result<u32, TimeError> {
        let end = self.pos + n;
        if end > self.bytes.len() || !self.bytes[self.pos..end].iter().all(u8::is_ascii_digit) {
            return Err(self.fail(format!("expected {n} digits for {what} at byte {}", self.pos)));
        }
        let v = self.bytes[self.pos..end].iter().fold(0u32, |acc, b| acc * 10 + u32::from(b - b'0'));
        self.pos = end;
        Ok(v)
    }

    fn literal(&mut self, c: u8) -> Result<(), TimeError> {
        if self.bytes.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.fail(format!("expected '{}' at byte {}", c as char, self.pos)))
        }
    }
}

/// Parses `yyyy-mm-ddThh:mm:ss[.f{1,9}][Z|±hh:mm]`.
pub fn parse_iso8601(text: &str) -> Result<Iso8601Timestamp, TimeError> {
    let mut cur = Cursor { text, bytes: text.as_bytes(), pos: 0 };
    let year = cur.digits(4, "year")? as i32;
    cur.literal(b'-')?;
    let month = cur.digits(2, "month")? as u8;
    cur.literal(b'-')?;
    let day = cur.digits(2, "day")? as u8;
    cur.literal(b'T')?;
    let hour = cur.digits(2, "hour")? as u8;
    cur.literal(b':')?;
    let minute = cur.digits(2, "minute")? as u8;
    cur.literal(b':')?;
    let second = cur.digits(2, "second")? as u8;

    if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
        return Err(TimeError::InvalidDate { year, month, day });
    }
    if hour >= 24 {
        return Err(cur.fail("hour must be below 24"));
    }
    if minute >= 60 || second >= 60 {
        return Err(cur.fail("minute and second must be below 60"));
    }

    let mut nanos = 0u32;
    let mut frac_digits = 0u8;
    if cur.bytes.get(cur.pos) == Some(&b'.') {
        cur.pos += 1;
        let start = cur.pos;
        while cur.pos < cur.bytes.len() && cur.bytes[cur.pos].is_ascii_digit() {
            cur.pos += 1;
        }
        let n = cur.pos - start;
        if n == 0 {
            return Err(cur.fail("decimal point without fraction digits"));
        }
        if n > 9 {
            return Err(cur.fail("more than 9 fractional digits (finer than nanoseconds)"));
        }
        let frac = cur.bytes[start..cur.pos].iter().fold(0u32, |acc, b| acc * 10 + u32::from(b - b'0'));
        nanos = frac * 10u32.pow(9 - n as u32);
        frac_digits = n as u8;
    }

    let offset = match cur.bytes.get(cur.pos) {
        None => UtcOffset::Local,
        Some(b'Z') => {
            cur.pos += 1;
            UtcOffset::Utc
        }
        Some(&sign @ (b'+' | b'-')) => {
            cur.pos += 1;
            let h = cur.digits(2, "offset hours")? as i32;
            cur.literal(b':')?;
            let m = cur.digits(2, "offset minutes")? as i32;
            if m >= 60 {
                return Err(cur.fail("offset minutes must be below 60"));
            }
            let total = h * 60 + m;
            if total > i32::from(MAX_OFFSET_MINUTES) {
                return Err(TimeError::OffsetOutOfRange { minutes: if sign == b'-' { -total } else { total } });
            }
            UtcOffset::Known(if sign == b'-' { -total as i16 } else { total as i16 })
        }
        Some(_) => return Err(cur.fail(format!("unexpected character at byte {}", cur.pos))),
    };
    if cur.pos != cur.bytes.len() {
        return Err(cur.fail(format!("trailing characters from byte {}", cur.pos)));
    }

    Ok(Iso8601Timestamp { year, month, day, hour, minute, second, nanos, frac_digits, offset })
}

impl fmt::Display for Iso8601Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}", self.year, self.month, self.day, self.hour, self.minute, self.second)?;
        if self.frac_digits > 0 {
            let scaled = self.nanos / 10u32.pow(9 - u32::from(self.frac_digits));
            write!(f, ".{:0width$}", scaled, width = usize::from(self.frac_digits))?;
        }
        match self.offset {
            UtcOffset::Local => Ok(()),
            UtcOffset::Utc => f.write_str("Z"),
            UtcOffset::Known(m) => {
                let sign = if m < 0 { '-' } else { '+' };
                write!(f, "{sign}{:02}:{:02}", m.abs() / 60, m.abs() % 60)
            }
        }
    }
}

impl FromStr for Iso8601Timestamp {
    type Err = TimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_iso8601(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeUnit {
    Seconds,
    Millis,
    Micros,
    Nanos,
}

impl TimeUnit {
    pub fn nanos(self) -> i64 {
        match self {
            TimeUnit::Seconds => 1_000_000_000,
            TimeUnit::Millis => 1_000_000,
            TimeUnit::Micros => 1_000,
            TimeUnit::Nanos => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TimeUnit::Seconds => "s",
            TimeUnit::Millis => "ms",
            TimeUnit::Micros => "us",
            TimeUnit::Nanos => "ns",
        }
    }
}

impl FromStr for TimeUnit {
    type Err = TimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "s" => Ok(TimeUnit::Seconds),
            "ms" => Ok(TimeUnit::Millis),
            "us" | "µs" => Ok(TimeUnit::Micros),
            "ns" => Ok(TimeUnit::Nanos),
            other => Err(TimeError::UnsupportedUnit(other.to_string())),
        }
    }
}

impl fmt::Display for TimeUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeKind {
    /// Elapsed since the recording start.
    Relative,
    /// Unix time.
    Absolute,
    /// Elapsed since the previous sample; the first value is the offset from the start.
    Difference,
    /// No stored values: start plus index over sampling rate.
    Uniform,
}

impl TimeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeKind::Relative => "relative",
            TimeKind::Absolute => "absolute",
            TimeKind::Difference => "difference",
            TimeKind::Uniform => "uniform",
        }
    }
}

impl fmt::Display for TimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeEncoding {
    pub kind: TimeKind,
    pub unit: TimeUnit,
    pub base: Iso8601Timestamp,
    pub sampling_rate: Option<f64>,
}

impl TimeEncoding {
    pub fn new(kind: TimeKind, unit: TimeUnit, base: Iso8601Timestamp, sampling_rate: Option<f64>) -> Result<Self, TimeError> {
        if kind == TimeKind::Uniform && !sampling_rate.is_some_and(|r| r.is_finite() && r > 0.0) {
            return Err(TimeError::MissingSamplingRate);
        }
        Ok(Self { kind, unit, base, sampling_rate })
    }

    pub fn uniform(base: Iso8601Timestamp, sampling_rate: f64) -> Result<Self, TimeError> {
        Self::new(TimeKind::Uniform, TimeUnit::Nanos, base, Some(sampling_rate))
    }

    /// Instant of sample `index` under uniform sampling.
    pub fn uniform_instant(&self, index: u64) -> Result<i64, TimeError> {
        let rate = self.sampling_rate.filter(|r| r.is_finite() && *r > 0.0).ok_or(TimeError::MissingSamplingRate)?;
        let base = self.base.timeline_nanos()?;
        let offset = if rate.fract() == 0.0 && rate < 1e18 {
            let num = i128::from(index) * NANOS_PER_SEC;
            let den = rate as i128;
            (2 * num + den) / (2 * den)
        } else {
            let v = (index as f64 * 1e9 / rate).round();
            if !v.is_finite() || v >= i64::MAX as f64 {
                return Err(TimeError::Overflow);
            }
            v as i128
        };
        i64::try_from(i128::from(base) + offset).map_err(|_| TimeError::Overflow)
    }
}

/// Exact `value * unit_nanos`, rounded half-to-even to an integer.
fn float_to_nanos(value: f64, unit_nanos: i64) -> Option<i128> {
    if !value.is_finite() {
        return None;
    }
    if value == 0.0 {
        return Some(0);
    }
    let bits = value.to_bits();
    let negative = bits >> 63 == 1;
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mantissa, exp) = if exp_bits == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp_bits - 1075) };
    let product = u128::from(mantissa) * unit_nanos as u128;
    let magnitude = if exp >= 0 {
        if exp > 40 {
            return None;
        }
        product.checked_shl(exp as u32).filter(|v| v >> exp as u32 == product)?
    } else {
        let shift = (-exp) as u32;
        if shift >= 128 {
            0
        } else {
            let q = product >> shift;
            let rem = product & ((1u128 << shift) - 1);
            let half = 1u128 << (shift - 1);
            if rem > half || (rem == half && q & 1 == 1) {
                q + 1
            } else {
                q
            }
        }
    };
    let magnitude = i128::try_from(magnitude).ok()?;
    Some(if negative { -magnitude } else { magnitude })
}

fn number_to_nanos(value: Number, unit: TimeUnit, index: usize) -> Result<i128, TimeError> {
    let unit_nanos = unit.nanos();
    match value {
        Number::Int(v) => Ok(i128::from(v) * i128::from(unit_nanos)),
        Number::UInt(v) => Ok(i128::from(v) * i128::from(unit_nanos)),
        Number::Float(f) => {
            if !f.is_finite() {
                return Err(TimeError::NonFinite { index });
            }
            float_to_nanos(f, unit_nanos).ok_or(TimeError::Overflow)
        }
    }
}

fn checked_instant(v: i128) -> Result<i64, TimeError> {
    i64::try_from(v).map_err(|_| TimeError::Overflow)
}

/// Decodes `n` instants from stored time values. For uniform encodings
/// `raw` must be empty.
pub fn decode_timestamps(raw: &[Number], enc: &TimeEncoding, n: usize) -> Result<Vec<i64>, TimeError> {
    if enc.kind == TimeKind::Uniform {
        if !raw.is_empty() {
            return Err(TimeError::LengthMismatch { expected: 0, actual: raw.len() });
        }
        return (0..n as u64).map(|i| enc.uniform_instant(i)).collect();
    }
    if raw.len() != n {
        return Err(TimeError::LengthMismatch { expected: n, actual: raw.len() });
    }
    let mut out = Vec::with_capacity(n);
    match enc.kind {
        TimeKind::Absolute => {
            for (i, &v) in raw.iter().enumerate() {
                out.push(checked_instant(number_to_nanos(v, enc.unit, i)?)?);
            }
        }
        TimeKind::Relative => {
            let base = i128::from(enc.base.timeline_nanos()?);
            for (i, &v) in raw.iter().enumerate() {
                out.push(checked_instant(base + number_to_nanos(v, enc.unit, i)?)?);
            }
        }
        TimeKind::Difference => {
            let mut acc = i128::from(enc.base.timeline_nanos()?);
            for (i, &v) in raw.iter().enumerate() {
                let delta = number_to_nanos(v, enc.unit, i)?;
                if delta < 0 {
                    return Err(TimeError::NonMonotonic { index: i });
                }
                acc += delta;
                out.push(checked_instant(acc)?);
            }
        }
        TimeKind::Uniform => unreachable!(),
    }
    Ok(out)
}

fn fit_integer(v: i128, format: NumberFormat, index: usize) -> Result<Number, TimeError> {
    let overflow = TimeError::ValueOverflow { index, format };
    match format.data_type() {
        DataType::Int => {
            let (lo, hi) = format.int_range();
            if v < lo || v > hi {
                return Err(overflow);
            }
            Ok(Number::Int(v as i64))
        }
        DataType::UInt => {
            if v < 0 || v > format.uint_max() {
                return Err(overflow);
            }
            Ok(Number::UInt(v as u64))
        }
        DataType::Float => unreachable!(),
    }
}

fn fit_float(nanos: i128, unit: TimeUnit, format: NumberFormat, truncate: bool, index: usize) -> Result<Number, TimeError> {
    let approx = nanos as f64 / unit.nanos() as f64;
    let stored = if format.bits() == 32 {
        let f = approx as f32;
        if !f.is_finite() {
            return Err(TimeError::ValueOverflow { index, format });
        }
        f64::from(f)
    } else {
        approx
    };
    if !truncate && float_to_nanos(stored, unit.nanos()) != Some(nanos) {
        return Err(TimeError::UnitPrecisionLoss { index, unit });
    }
    Ok(Number::Float(stored))
}

/// Encodes instants into stored time values of the given number format.
/// With `truncate` unset, any instant that would not decode back exactly is
/// rejected.
pub fn encode_timestamps(instants: &[i64], enc: &TimeEncoding, format: NumberFormat, truncate: bool) -> Result<Vec<Number>, TimeError> {
    if enc.kind == TimeKind::Uniform {
        for (i, &t) in instants.iter().enumerate() {
            if enc.uniform_instant(i as u64)? != t {
                return Err(TimeError::NotUniform { index: i });
            }
        }
        return Ok(Vec::new());
    }
    let unit_nanos = i128::from(enc.unit.nanos());
    let base = match enc.kind {
        TimeKind::Absolute => 0,
        _ => i128::from(enc.base.timeline_nanos()?),
    };
    let mut out = Vec::with_capacity(instants.len());
    let is_float = format.data_type() == DataType::Float;
    let mut prev_offset: i128 = 0;
    let mut prev_units: i128 = 0;
    for (i, &t) in instants.iter().enumerate() {
        let offset = i128::from(t) - base;
        if enc.kind == TimeKind::Difference && offset < prev_offset {
            return Err(TimeError::NonMonotonic { index: i });
        }
        if is_float {
            let value = if enc.kind == TimeKind::Difference { offset - prev_offset } else { offset };
            out.push(fit_float(value, enc.unit, format, truncate, i)?);
            prev_offset = offset;
            continue;
        }
        if offset % unit_nanos != 0 && !truncate {
            return Err(TimeError::UnitPrecisionLoss { index: i, unit: enc.unit });
        }
        let units = offset / unit_nanos;
        let value = if enc.kind == TimeKind::Difference { units - prev_units } else { units };
        out.push(fit_integer(value, format, i)?);
        prev_units = units;
        prev_offset = offset;
    }
    Ok(out)
}
