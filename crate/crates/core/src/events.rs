//! AER event decoding/encoding and binning of event streams into frames.
//!
//! Supported containers:
//!
//! * N-MNIST binary: 5-byte records, `x | y | p:1 ts:23 (big-endian)`.
//! * AEDAT 3.1 (DVS Gestures): ASCII header, then little-endian packets with a
//!   28-byte header; polarity events are 8 bytes (`data`, `timestamp`).
//! * A line-oriented text format `x y polarity t_us`, `#` comments.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NMNIST_WIDTH: u32 = 34;
pub const NMNIST_HEIGHT: u32 = 34;
pub const NMNIST_MAX_TIMESTAMP: u64 = (1 << 23) - 1;

pub const GESTURE_WIDTH: u32 = 128;
pub const GESTURE_HEIGHT: u32 = 128;
/// The "Other" gesture class, left out of every task.
pub const GESTURE_EXCLUDED_CLASS: u32 = 11;

const AEDAT_MAGIC: &[u8] = b"#!AER-DAT3.1";
const AEDAT_END_HEADER: &[u8] = b"#!END-HEADER";
const AEDAT_PACKET_HEADER_LEN: usize = 28;
const AEDAT_POLARITY_EVENT: i16 = 1;
const AEDAT_POLARITY_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventRecord {
    pub x: u32,
    pub y: u32,
    pub polarity: bool,
    pub timestamp_us: u64,
}

impl EventRecord {
    pub fn new(x: u32, y: u32, polarity: bool, timestamp_us: u64) -> Self {
        Self {
            x,
            y,
            polarity,
            timestamp_us,
        }
    }
}

/// One binned binary input map.
///
/// Occupancy is stored sparsely as sorted, de-duplicated flat indices
/// `(c * height + y) * width + x`, so an entry can be active at most once.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFrame {
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    pub t_index: usize,
    /// Charge carried by every active entry, `1 / t_s`.
    pub amplitude: f64,
    active: Vec<u32>,
}

impl EventFrame {
    pub fn empty(channels: usize, width: usize, height: usize, t_index: usize, amplitude: f64) -> Self {
        Self {
            channels,
            width,
            height,
            t_index,
            amplitude,
            active: Vec::new(),
        }
    }

    /// Builds a frame from a dense `[c][y][x]` occupancy slice.
    pub fn from_bits(
        channels: usize,
        width: usize,
        height: usize,
        bits: &[bool],
        t_index: usize,
        amplitude: f64,
    ) -> Result<Self> {
        if bits.len() != channels * width * height {
            return Err(Error::Dimension(format!(
                "expected {} bits for {channels}x{height}x{width}, got {}",
                channels * width * height,
                bits.len()
            )));
        }
        let active = bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i as u32)
            .collect();
        Ok(Self {
            channels,
            width,
            height,
            t_index,
            amplitude,
            active,
        })
    }

    /// Same shape, every entry set.
    pub fn dense(channels: usize, width: usize, height: usize, t_index: usize, amplitude: f64) -> Self {
        Self {
            channels,
            width,
            height,
            t_index,
            amplitude,
            active: (0..(channels * width * height) as u32).collect(),
        }
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize) {
        let idx = self.flat(c, y, x);
        if let Err(pos) = self.active.binary_search(&idx) {
            self.active.insert(pos, idx);
        }
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> bool {
        self.active.binary_search(&self.flat(c, y, x)).is_ok()
    }

    #[inline]
    fn flat(&self, c: usize, y: usize, x: usize) -> u32 {
        ((c * self.height + y) * self.width + x) as u32
    }

    /// Active entries as `(c, y, x)` in ascending flat order.
    pub fn active(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let plane = self.width * self.height;
        self.active.iter().map(move |&i| {
            let i = i as usize;
            (i / plane, (i % plane) / self.width, i % self.width)
        })
    }

    pub fn count(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn to_bits(&self) -> Vec<bool> {
        let mut bits = vec![false; self.channels * self.width * self.height];
        for &i in &self.active {
            bits[i as usize] = true;
        }
        bits
    }
}

/// A labelled time window inside a DVS Gestures recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleLabelSpan {
    pub class_id: u32,
    pub start_us: u64,
    pub end_us: u64,
}

pub fn decode_nmnist(bytes: &[u8]) -> Result<Vec<EventRecord>> {
    let whole = bytes.len() - bytes.len() % 5;
    if whole != bytes.len() {
        return Err(Error::TruncatedRecord {
            offset: whole,
            len: bytes.len(),
        });
    }
    bytes
        .chunks_exact(5)
        .enumerate()
        .map(|(index, r)| {
            let (x, y) = (r[0] as u32, r[1] as u32);
            if x >= NMNIST_WIDTH || y >= NMNIST_HEIGHT {
                return Err(Error::EventOutOfRange {
                    index,
                    x,
                    y,
                    width: NMNIST_WIDTH,
                    height: NMNIST_HEIGHT,
                });
            }
            let ts = ((r[2] as u64 & 0x7f) << 16) | ((r[3] as u64) << 8) | r[4] as u64;
            Ok(EventRecord::new(x, y, r[2] & 0x80 != 0, ts))
        })
        .collect()
}

pub fn encode_nmnist(events: &[EventRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(events.len() * 5);
    for (index, e) in events.iter().enumerate() {
        if e.x >= NMNIST_WIDTH || e.y >= NMNIST_HEIGHT {
            return Err(Error::EventOutOfRange {
                index,
                x: e.x,
                y: e.y,
                width: NMNIST_WIDTH,
                height: NMNIST_HEIGHT,
            });
        }
        if e.timestamp_us > NMNIST_MAX_TIMESTAMP {
            return Err(Error::Unencodable {
                index,
                reason: format!("timestamp {} does not fit in 23 bits", e.timestamp_us),
            });
        }
        let ts = e.timestamp_us;
        out.extend_from_slice(&[
            e.x as u8,
            e.y as u8,
            ((e.polarity as u8) << 7) | ((ts >> 16) as u8 & 0x7f),
            (ts >> 8) as u8,
            ts as u8,
        ]);
    }
    Ok(out)
}

fn read_i16(b: &[u8], at: usize) -> i16 {
    i16::from_le_bytes([b[at], b[at + 1]])
}

fn read_i32(b: &[u8], at: usize) -> i32 {
    i32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Returns the byte offset of the first packet.
fn skip_aedat_header(bytes: &[u8]) -> Result<usize> {
    if !bytes.starts_with(AEDAT_MAGIC) {
        return Err(Error::MissingHeader);
    }
    let mut pos = 0;
    while pos < bytes.len() && bytes[pos] == b'#' {
        let line_end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(bytes.len(), |p| pos + p + 1);
        let is_end = bytes[pos..line_end].starts_with(AEDAT_END_HEADER);
        pos = line_end;
        if is_end {
            break;
        }
    }
    Ok(pos)
}

pub fn decode_aedat(bytes: &[u8]) -> Result<Vec<EventRecord>> {
    let mut pos = skip_aedat_header(bytes)?;
    let mut events = Vec::new();
    while pos < bytes.len() {
        if bytes.len() - pos < AEDAT_PACKET_HEADER_LEN {
            return Err(Error::MalformedPacket {
                offset: pos,
                reason: format!(
                    "{} trailing bytes, packet header needs {AEDAT_PACKET_HEADER_LEN}",
                    bytes.len() - pos
                ),
            });
        }
        let event_type = read_i16(bytes, pos);
        let event_size = read_i32(bytes, pos + 4);
        let ts_overflow = read_i32(bytes, pos + 12);
        let event_number = read_i32(bytes, pos + 20);
        if event_size < 0 || event_number < 0 {
            return Err(Error::MalformedPacket {
                offset: pos,
                reason: format!("negative eventSize ({event_size}) or eventNumber ({event_number})"),
            });
        }
        let payload = event_size as usize * event_number as usize;
        let start = pos + AEDAT_PACKET_HEADER_LEN;
        if bytes.len() - start < payload {
            return Err(Error::MalformedPacket {
                offset: pos,
                reason: format!(
                    "eventNumber {event_number} x eventSize {event_size} = {payload} bytes, only {} remain",
                    bytes.len() - start
                ),
            });
        }
        if event_type == AEDAT_POLARITY_EVENT {
            if event_size as usize != AEDAT_POLARITY_SIZE {
                return Err(Error::MalformedPacket {
                    offset: pos,
                    reason: format!("polarity eventSize must be 8, got {event_size}"),
                });
            }
            let overflow = (ts_overflow as u32 as u64) << 31;
            for ev in bytes[start..start + payload].chunks_exact(AEDAT_POLARITY_SIZE) {
                let data = u32::from_le_bytes([ev[0], ev[1], ev[2], ev[3]]);
                if data & 1 == 0 {
                    continue;
                }
                let ts = u32::from_le_bytes([ev[4], ev[5], ev[6], ev[7]]) as u64;
                events.push(EventRecord::new(
                    (data >> 17) & 0x7fff,
                    (data >> 2) & 0x7fff,
                    data & 2 != 0,
                    overflow | ts,
                ));
            }
        }
        pos = start + payload;
    }
    Ok(events)
}

/// Writes `events` as a single AEDAT 3.1 polarity packet.
pub fn encode_aedat(events: &[EventRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(96 + events.len() * AEDAT_POLARITY_SIZE);
    out.extend_from_slice(b"#!AER-DAT3.1\r\n#Format: RAW\r\n#Source 1: DVS128\r\n#!END-HEADER\r\n");
    if events.is_empty() {
        return Ok(out);
    }
    let overflow = events[0].timestamp_us >> 31;
    let n = events.len() as i32;
    for field in [
        AEDAT_POLARITY_EVENT.to_le_bytes().to_vec(),
        1i16.to_le_bytes().to_vec(),
        (AEDAT_POLARITY_SIZE as i32).to_le_bytes().to_vec(),
        4i32.to_le_bytes().to_vec(),
        (overflow as i32).to_le_bytes().to_vec(),
        n.to_le_bytes().to_vec(),
        n.to_le_bytes().to_vec(),
        n.to_le_bytes().to_vec(),
    ] {
        out.extend_from_slice(&field);
    }
    for (index, e) in events.iter().enumerate() {
        if e.x > 0x7fff || e.y > 0x7fff {
            return Err(Error::Unencodable {
                index,
                reason: format!("address ({}, {}) exceeds 15 bits", e.x, e.y),
            });
        }
        if e.timestamp_us >> 31 != overflow {
            return Err(Error::Unencodable {
                index,
                reason: "timestamps span more than one overflow epoch".into(),
            });
        }
        let data = (e.x << 17) | (e.y << 2) | ((e.polarity as u32) << 1) | 1;
        out.extend_from_slice(&data.to_le_bytes());
        out.extend_from_slice(&((e.timestamp_us & 0x7fff_ffff) as u32).to_le_bytes());
    }
    Ok(out)
}

/// Parses a DVS Gestures label CSV (`class,startTime_usec,endTime_usec`).
pub fn parse_gesture_labels(text: &str) -> Result<Vec<SampleLabelSpan>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut spans = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::parse("label csv", e))?;
        if row.len() < 3 {
            return Err(Error::parse(
                "label csv",
                format!("row {} has {} columns, expected 3", line + 2, row.len()),
            ));
        }
        let field = |i: usize| -> Result<u64> {
            row[i]
                .parse::<u64>()
                .map_err(|e| Error::parse("label csv", format!("row {}: {e}", line + 2)))
        };
        let span = SampleLabelSpan {
            class_id: field(0)? as u32,
            start_us: field(1)?,
            end_us: field(2)?,
        };
        if span.start_us >= span.end_us {
            return Err(Error::parse(
                "label csv",
                format!("row {}: start {} not before end {}", line + 2, span.start_us, span.end_us),
            ));
        }
        spans.push(span);
    }
    Ok(spans)
}

/// Events inside `[start_us, end_us)`, re-based to the window start.
pub fn slice_window(events: &[EventRecord], span: &SampleLabelSpan) -> Vec<EventRecord> {
    events
        .iter()
        .filter(|e| (span.start_us..span.end_us).contains(&e.timestamp_us))
        .map(|e| EventRecord {
            timestamp_us: e.timestamp_us - span.start_us,
            ..*e
        })
        .collect()
}

/// Extracts the events of `class_id` from a gesture recording.
///
/// When a class has several windows they are laid end to end, each re-based
/// so the output timeline stays non-decreasing.
pub fn load_gesture_sample(
    events: &[EventRecord],
    labels: &[SampleLabelSpan],
    class_id: u32,
) -> Result<Vec<EventRecord>> {
    if class_id == GESTURE_EXCLUDED_CLASS {
        return Err(Error::ExcludedClass(class_id));
    }
    let spans: Vec<&SampleLabelSpan> = labels.iter().filter(|s| s.class_id == class_id).collect();
    if spans.is_empty() {
        return Err(Error::ClassAbsent(class_id));
    }
    let mut out = Vec::new();
    let mut offset = 0u64;
    for span in spans {
        out.extend(slice_window(events, span).into_iter().map(|mut e| {
            e.timestamp_us += offset;
            e
        }));
        offset += span.end_us - span.start_us;
    }
    Ok(out)
}

pub fn parse_text_events(text: &str) -> Result<Vec<EventRecord>> {
    let mut events = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                "text events",
                format!("line {}: expected `x y polarity t_us`, got {} fields", n + 1, fields.len()),
            ));
        }
        let num = |i: usize| -> Result<u64> {
            fields[i]
                .parse::<u64>()
                .map_err(|e| Error::parse("text events", format!("line {}: `{}`: {e}", n + 1, fields[i])))
        };
        let polarity = match num(2)? {
            0 => false,
            1 => true,
            p => {
                return Err(Error::parse(
                    "text events",
                    format!("line {}: polarity must be 0 or 1, got {p}", n + 1),
                ))
            }
        };
        events.push(EventRecord::new(num(0)? as u32, num(1)? as u32, polarity, num(3)?));
    }
    Ok(events)
}

pub fn write_text_events(events: &[EventRecord]) -> String {
    let mut s = String::with_capacity(events.len() * 16);
    for e in events {
        let _ = writeln!(s, "{} {} {} {}", e.x, e.y, e.polarity as u8, e.timestamp_us);
    }
    s
}

/// Parameters for [`bin_events`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSpec {
    /// Window length in microseconds.
    pub dt_us: u64,
    /// Sensor resolution before downsampling.
    pub width: u32,
    pub height: u32,
    /// Neuron time-step in ms; sets the frame amplitude `1 / t_s`.
    pub t_s: f64,
    pub downsample: u32,
    /// Sample length. Without it the frames end at the last event.
    pub duration_us: Option<u64>,
}

impl BinSpec {
    pub fn out_width(&self) -> usize {
        (self.width / self.downsample) as usize
    }

    pub fn out_height(&self) -> usize {
        (self.height / self.downsample) as usize
    }

    fn validate(&self) -> Result<()> {
        if self.dt_us == 0 {
            return Err(Error::invalid("dt", "must be > 0"));
        }
        if !(self.t_s.is_finite() && self.t_s > 0.0) {
            return Err(Error::invalid("t_s", "must be > 0"));
        }
        if self.downsample == 0 {
            return Err(Error::invalid("downsample", "must be >= 1"));
        }
        if self.width % self.downsample != 0 || self.height % self.downsample != 0 {
            return Err(Error::invalid(
                "downsample",
                format!("{} does not divide {}x{}", self.downsample, self.width, self.height),
            ));
        }
        Ok(())
    }
}

/// Bins events into half-open windows `[k dt, (k+1) dt)`.
///
/// Polarity is ignored and duplicate events at one (downsampled) pixel within
/// a window collapse to a single active entry.
pub fn bin_events(events: &[EventRecord], spec: &BinSpec) -> Result<Vec<EventFrame>> {
    spec.validate()?;
    let n_frames = match spec.duration_us {
        Some(d) => d.div_ceil(spec.dt_us) as usize,
        None => events
            .iter()
            .map(|e| e.timestamp_us / spec.dt_us + 1)
            .max()
            .unwrap_or(0) as usize,
    };
    let (w, h) = (spec.out_width(), spec.out_height());
    let amplitude = 1.0 / spec.t_s;
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); n_frames];
    for (index, e) in events.iter().enumerate() {
        if e.x >= spec.width || e.y >= spec.height {
            return Err(Error::EventOutOfRange {
                index,
                x: e.x,
                y: e.y,
                width: spec.width,
                height: spec.height,
            });
        }
        let k = (e.timestamp_us / spec.dt_us) as usize;
        if k >= n_frames {
            continue;
        }
        let (x, y) = ((e.x / spec.downsample) as usize, (e.y / spec.downsample) as usize);
        buckets[k].push((y * w + x) as u32);
    }
    Ok(buckets
        .into_iter()
        .enumerate()
        .map(|(t_index, mut active)| {
            active.sort_unstable();
            active.dedup();
            EventFrame {
                channels: 1,
                width: w,
                height: h,
                t_index,
                amplitude,
                active,
            }
        })
        .collect())
}
