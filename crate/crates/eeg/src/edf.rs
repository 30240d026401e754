//! EDF and EDF+ (continuous) reader and writer.
//!
//! Layout: a 256-byte fixed header, then 256 bytes per signal stored
//! field-major, then `records` data records. Each record holds, for each
//! signal in order, `samples_per_record` little-endian `i16` values. In EDF+
//! the signal labeled `EDF Annotations` carries time-stamped annotation
//! lists (TALs) instead of samples.

use crate::error::{EegError, Result};

pub const ANNOTATION_LABEL: &str = "EDF Annotations";

#[derive(Debug, Clone, PartialEq)]
pub struct EdfSignal {
    pub label: String,
    pub transducer: String,
    pub physical_dim: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefilter: String,
    pub samples_per_record: usize,
}

impl EdfSignal {
    pub fn is_annotation(&self) -> bool {
        self.label.trim() == ANNOTATION_LABEL
    }

    /// Physical units per digital step.
    pub fn gain(&self) -> f64 {
        (self.physical_max - self.physical_min) / f64::from(self.digital_max - self.digital_min)
    }

    pub fn to_physical(&self, d: i16) -> f64 {
        (f64::from(d) - f64::from(self.digital_min)) * self.gain() + self.physical_min
    }

    pub fn to_digital(&self, x: f64) -> i16 {
        let d = ((x - self.physical_min) / self.gain() + f64::from(self.digital_min)).round();
        d.clamp(f64::from(self.digital_min), f64::from(self.digital_max)) as i16
    }

    /// An ordinary signal with a symmetric 16-bit range.
    pub fn eeg(label: &str, physical_bound: f64, samples_per_record: usize) -> Self {
        Self {
            label: label.into(),
            transducer: String::new(),
            physical_dim: "uV".into(),
            physical_min: -physical_bound,
            physical_max: physical_bound,
            digital_min: -32768,
            digital_max: 32767,
            prefilter: String::new(),
            samples_per_record,
        }
    }

    pub fn annotations(samples_per_record: usize) -> Self {
        Self {
            label: ANNOTATION_LABEL.into(),
            transducer: String::new(),
            physical_dim: String::new(),
            physical_min: -1.0,
            physical_max: 1.0,
            digital_min: -32768,
            digital_max: 32767,
            prefilter: String::new(),
            samples_per_record,
        }
    }
}

/// One annotation: onset and duration in seconds from file start.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub onset: f64,
    pub duration: Option<f64>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdfFile {
    pub patient: String,
    pub recording: String,
    pub start_date: String,
    pub start_time: String,
    /// `true` writes the `EDF+C` reserved marker.
    pub plus: bool,
    pub record_duration: f64,
    pub records: usize,
    pub signals: Vec<EdfSignal>,
    /// Physical values per signal; empty for the annotation signal.
    pub data: Vec<Vec<f64>>,
    pub annotations: Vec<Annotation>,
}

impl EdfFile {
    /// Indices of ordinary (non-annotation) signals.
    pub fn data_signals(&self) -> impl Iterator<Item = usize> + '_ {
        self.signals
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.is_annotation())
            .map(|(i, _)| i)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(EegError::Truncated {
                offset: self.bytes.len(),
                needed: end - self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn text(&mut self, n: usize, field: &'static str) -> Result<String> {
        let offset = self.pos;
        let raw = self.take(n)?;
        if let Some(i) = raw.iter().position(|b| !(0x20..=0x7e).contains(b)) {
            return Err(EegError::Header {
                offset: offset + i,
                field,
                msg: format!("non-printable byte 0x{:02x}", raw[i]),
            });
        }
        Ok(String::from_utf8_lossy(raw).trim_end().to_string())
    }

    fn number<T: std::str::FromStr>(&mut self, n: usize, field: &'static str) -> Result<T> {
        let offset = self.pos;
        let s = self.text(n, field)?;
        s.trim().parse().map_err(|_| EegError::Header {
            offset,
            field,
            msg: format!("cannot parse {s:?}"),
        })
    }
}

/// Parses an EDF or EDF+C file from memory.
pub fn parse_edf(bytes: &[u8]) -> Result<EdfFile> {
    let mut c = Cursor { bytes, pos: 0 };
    let version = c.text(8, "version")?;
    if version.trim() != "0" {
        return Err(EegError::Header {
            offset: 0,
            field: "version",
            msg: format!("expected \"0\", found {version:?}"),
        });
    }
    let patient = c.text(80, "patient")?;
    let recording = c.text(80, "recording")?;
    let start_date = c.text(8, "startdate")?;
    let start_time = c.text(8, "starttime")?;
    let header_off = c.pos;
    let header_bytes: usize = c.number(8, "header bytes")?;
    let reserved = c.text(44, "reserved")?;
    if reserved.starts_with("EDF+D") {
        return Err(EegError::Header {
            offset: c.pos - 44,
            field: "reserved",
            msg: "discontinuous EDF+ is not supported".into(),
        });
    }
    let records_off = c.pos;
    let records: i64 = c.number(8, "records")?;
    if records < 0 {
        return Err(EegError::Header {
            offset: records_off,
            field: "records",
            msg: format!("record count {records} unknown or negative"),
        });
    }
    let records = records as usize;
    let dur_off = c.pos;
    let record_duration: f64 = c.number(8, "duration")?;
    if !(record_duration > 0.0 && record_duration.is_finite()) {
        return Err(EegError::Header {
            offset: dur_off,
            field: "duration",
            msg: format!("record duration {record_duration} must be positive"),
        });
    }
    let ns_off = c.pos;
    let ns: usize = c.number(4, "signals")?;
    if ns == 0 {
        return Err(EegError::Header {
            offset: ns_off,
            field: "signals",
            msg: "no signals".into(),
        });
    }
    if header_bytes != 256 * (ns + 1) {
        return Err(EegError::Header {
            offset: header_off,
            field: "header bytes",
            msg: format!("{header_bytes} does not match 256*(1+{ns})"),
        });
    }

    let texts = |c: &mut Cursor, n, f| (0..ns).map(|_| c.text(n, f)).collect::<Result<Vec<_>>>();
    let labels = texts(&mut c, 16, "label")?;
    let transducers = texts(&mut c, 80, "transducer")?;
    let dims = texts(&mut c, 8, "physical dimension")?;
    let nums = |c: &mut Cursor, f| (0..ns).map(|_| c.number::<f64>(8, f)).collect::<Result<Vec<_>>>();
    let pmin = nums(&mut c, "physical min")?;
    let pmax = nums(&mut c, "physical max")?;
    let dmin = nums(&mut c, "digital min")?;
    let dmax = nums(&mut c, "digital max")?;
    let prefilters = texts(&mut c, 80, "prefilter")?;
    let spr_off = c.pos;
    let spr = (0..ns)
        .map(|_| c.number::<usize>(8, "samples per record"))
        .collect::<Result<Vec<_>>>()?;
    c.take(32 * ns)?;

    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        let in_i16 = |v: f64| v.fract() == 0.0 && (-32768.0..=32767.0).contains(&v);
        if !in_i16(dmin[i]) || !in_i16(dmax[i]) || dmin[i] >= dmax[i] {
            return Err(EegError::Header {
                offset: 256,
                field: "digital range",
                msg: format!("signal {i}: [{}, {}]", dmin[i], dmax[i]),
            });
        }
        if pmin[i] == pmax[i] {
            return Err(EegError::Header {
                offset: 256,
                field: "physical range",
                msg: format!("signal {i}: empty range"),
            });
        }
        if spr[i] == 0 {
            return Err(EegError::Header {
                offset: spr_off + 8 * i,
                field: "samples per record",
                msg: format!("signal {i} has zero samples per record"),
            });
        }
        signals.push(EdfSignal {
            label: labels[i].clone(),
            transducer: transducers[i].clone(),
            physical_dim: dims[i].clone(),
            physical_min: pmin[i],
            physical_max: pmax[i],
            digital_min: dmin[i] as i32,
            digital_max: dmax[i] as i32,
            prefilter: prefilters[i].clone(),
            samples_per_record: spr[i],
        });
    }

    let too_big = || EegError::RecordSize("declared data size overflows".into());
    let record_bytes = spr
        .iter()
        .try_fold(0usize, |acc, n| n.checked_mul(2).and_then(|b| acc.checked_add(b)))
        .ok_or_else(too_big)?;
    let expected = records
        .checked_mul(record_bytes)
        .and_then(|b| b.checked_add(header_bytes))
        .ok_or_else(too_big)?;
    if bytes.len() < expected {
        return Err(EegError::Truncated {
            offset: bytes.len(),
            needed: expected - bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(EegError::RecordSize(format!(
            "{} trailing bytes after {records} records of {record_bytes} bytes",
            bytes.len() - expected
        )));
    }

    let mut data: Vec<Vec<f64>> = signals
        .iter()
        .map(|s| {
            if s.is_annotation() {
                Vec::new()
            } else {
                Vec::with_capacity(records * s.samples_per_record)
            }
        })
        .collect();
    let mut annotations = Vec::new();
    for _ in 0..records {
        for (s, sig) in signals.iter().enumerate() {
            let start = c.pos;
            let raw = c.take(2 * sig.samples_per_record)?;
            if sig.is_annotation() {
                parse_tals(raw, start, &mut annotations)?;
            } else {
                data[s].extend(
                    raw.chunks_exact(2)
                        .map(|b| sig.to_physical(i16::from_le_bytes([b[0], b[1]]))),
                );
            }
        }
    }

    Ok(EdfFile {
        patient,
        recording,
        start_date,
        start_time,
        plus: reserved.starts_with("EDF+"),
        record_duration,
        records,
        signals,
        data,
        annotations,
    })
}

/// Decodes the TALs in one record's annotation bytes. Time-keeping TALs
/// (no text) are dropped.
fn parse_tals(raw: &[u8], base: usize, out: &mut Vec<Annotation>) -> Result<()> {
    let mut i = 0;
    while i < raw.len() {
        if raw[i] == 0 {
            i += 1;
            continue;
        }
        let start = i;
        let end = raw[i..]
            .iter()
            .position(|&b| b == 0)
            .map(|p| i + p)
            .ok_or_else(|| EegError::Annotation {
                offset: base + start,
                msg: "TAL not terminated by a zero byte".into(),
            })?;
        let tal = &raw[start..end];
        let bad = |msg: &str| EegError::Annotation {
            offset: base + start,
            msg: msg.into(),
        };
        if !matches!(tal.first(), Some(b'+') | Some(b'-')) {
            return Err(bad("onset must start with '+' or '-'"));
        }
        let head_end = tal.iter().position(|&b| b == 0x14).ok_or_else(|| bad("missing 0x14 after onset"))?;
        let head = &tal[..head_end];
        let (onset_raw, dur_raw) = match head.iter().position(|&b| b == 0x15) {
            Some(p) => (&head[..p], Some(&head[p + 1..])),
            None => (head, None),
        };
        let num = |b: &[u8]| -> Option<f64> {
            let s = std::str::from_utf8(b).ok()?;
            if s.is_empty() || !s.bytes().all(|c| c.is_ascii_digit() || matches!(c, b'+' | b'-' | b'.')) {
                return None;
            }
            s.parse().ok()
        };
        let onset = num(onset_raw).ok_or_else(|| bad("unparseable onset"))?;
        let duration = match dur_raw {
            Some(d) => Some(num(d).ok_or_else(|| bad("unparseable duration"))?),
            None => None,
        };
        let body = &tal[head_end + 1..];
        if body.last().is_some_and(|&b| b != 0x14) {
            return Err(bad("annotation text not terminated by 0x14"));
        }
        for text in body.split(|&b| b == 0x14).filter(|t| !t.is_empty()) {
            out.push(Annotation {
                onset,
                duration,
                text: String::from_utf8_lossy(text).into_owned(),
            });
        }
        i = end + 1;
    }
    Ok(())
}

fn field(out: &mut Vec<u8>, s: &str, width: usize) -> Result<()> {
    if s.len() > width || !s.bytes().all(|b| (0x20..=0x7e).contains(&b)) {
        return Err(EegError::Invalid(format!("header text {s:?} does not fit {width} ASCII bytes")));
    }
    out.extend_from_slice(s.as_bytes());
    out.extend(std::iter::repeat_n(b' ', width - s.len()));
    Ok(())
}

/// Shortest decimal rendering of `x` that fits in `width` characters.
fn fit_number(x: f64, width: usize) -> Result<String> {
    let plain = format!("{x}");
    if plain.len() <= width {
        return Ok(plain);
    }
    for prec in (0..width).rev() {
        let s = format!("{x:.prec$}");
        if s.len() <= width {
            return Ok(s);
        }
    }
    Err(EegError::Invalid(format!("{x} does not fit {width} characters")))
}

fn tal_bytes(onset: f64, duration: Option<f64>, texts: &[&str]) -> Vec<u8> {
    let mut b = Vec::new();
    let sign = if onset < 0.0 { "" } else { "+" };
    b.extend_from_slice(format!("{sign}{onset}").as_bytes());
    if let Some(d) = duration {
        b.push(0x15);
        b.extend_from_slice(format!("{d}").as_bytes());
    }
    b.push(0x14);
    if texts.is_empty() {
        b.push(0x14);
    }
    for t in texts {
        b.extend_from_slice(t.as_bytes());
        b.push(0x14);
    }
    b.push(0);
    b
}

/// Serializes an [`EdfFile`]. Annotations are placed in the record whose
/// time span contains their onset, after that record's time-keeping TAL.
pub fn write_edf(file: &EdfFile) -> Result<Vec<u8>> {
    let ns = file.signals.len();
    if ns == 0 || file.data.len() != ns {
        return Err(EegError::Invalid("data must have one entry per signal".into()));
    }
    for (i, s) in file.signals.iter().enumerate() {
        let want = if s.is_annotation() { 0 } else { file.records * s.samples_per_record };
        if file.data[i].len() != want {
            return Err(EegError::Invalid(format!(
                "signal {i} has {} values, expected {want}",
                file.data[i].len()
            )));
        }
    }

    let mut per_record: Vec<Vec<u8>> = (0..file.records)
        .map(|r| tal_bytes(r as f64 * file.record_duration, None, &[]))
        .collect();
    let ann_idx = file.signals.iter().position(EdfSignal::is_annotation);
    if let Some(a) = ann_idx {
        for ann in &file.annotations {
            let r = ((ann.onset / file.record_duration).floor().max(0.0) as usize).min(file.records.saturating_sub(1));
            per_record[r].extend(tal_bytes(ann.onset, ann.duration, &[&ann.text]));
        }
        let cap = 2 * file.signals[a].samples_per_record;
        if let Some(r) = per_record.iter().position(|b| b.len() > cap) {
            return Err(EegError::Invalid(format!(
                "record {r} needs {} annotation bytes, signal holds {cap}",
                per_record[r].len()
            )));
        }
    } else if !file.annotations.is_empty() {
        return Err(EegError::Invalid("annotations given without an annotation signal".into()));
    }

    let mut out = Vec::new();
    field(&mut out, "0", 8)?;
    field(&mut out, &file.patient, 80)?;
    field(&mut out, &file.recording, 80)?;
    field(&mut out, &file.start_date, 8)?;
    field(&mut out, &file.start_time, 8)?;
    field(&mut out, &(256 * (ns + 1)).to_string(), 8)?;
    field(&mut out, if file.plus { "EDF+C" } else { "" }, 44)?;
    field(&mut out, &file.records.to_string(), 8)?;
    field(&mut out, &fit_number(file.record_duration, 8)?, 8)?;
    field(&mut out, &ns.to_string(), 4)?;
    let sig = &file.signals;
    for s in sig {
        field(&mut out, &s.label, 16)?;
    }
    for s in sig {
        field(&mut out, &s.transducer, 80)?;
    }
    for s in sig {
        field(&mut out, &s.physical_dim, 8)?;
    }
    for s in sig {
        field(&mut out, &fit_number(s.physical_min, 8)?, 8)?;
    }
    for s in sig {
        field(&mut out, &fit_number(s.physical_max, 8)?, 8)?;
    }
    for s in sig {
        field(&mut out, &s.digital_min.to_string(), 8)?;
    }
    for s in sig {
        field(&mut out, &s.digital_max.to_string(), 8)?;
    }
    for s in sig {
        field(&mut out, &s.prefilter, 80)?;
    }
    for s in sig {
        field(&mut out, &s.samples_per_record.to_string(), 8)?;
    }
    for _ in sig {
        field(&mut out, "", 32)?;
    }

    for r in 0..file.records {
        for (i, s) in sig.iter().enumerate() {
            let n = s.samples_per_record;
            if Some(i) == ann_idx {
                let mut b = per_record[r].clone();
                b.resize(2 * n, 0);
                out.extend(b);
            } else {
                for &x in &file.data[i][r * n..(r + 1) * n] {
                    out.extend_from_slice(&s.to_digital(x).to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_range_midpoint() {
        let s = EdfSignal::eeg("C3", 187.5, 1);
        let step = s.gain();
        assert!(s.to_physical(0).abs() <= step);
    }

    #[test]
    fn fit_number_shortens() {
        assert_eq!(fit_number(-187.5, 8).unwrap(), "-187.5");
        assert!(fit_number(1.0 / 3.0, 8).unwrap().len() <= 8);
        assert!(fit_number(1e300, 8).is_err());
    }

    #[test]
    fn tal_grammar() {
        let mut out = Vec::new();
        let mut raw = tal_bytes(0.0, None, &[]);
        raw.extend(tal_bytes(1.5, Some(4.2), &["T1"]));
        raw.extend([0, 0, 0]);
        parse_tals(&raw, 0, &mut out).unwrap();
        assert_eq!(
            out,
            vec![Annotation {
                onset: 1.5,
                duration: Some(4.2),
                text: "T1".into()
            }]
        );
        let err = parse_tals(b"1.0\x14T0\x14\0", 100, &mut out).unwrap_err();
        assert!(matches!(err, EegError::Annotation { offset: 100, .. }));
        assert!(parse_tals(b"+1.0\x14T0", 0, &mut out).is_err());
    }
}
