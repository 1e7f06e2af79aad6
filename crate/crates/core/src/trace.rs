//! Timestamped trace events on a 4 ns timeline and their file format.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "ITRC"
//! 4       2     version (1)
//! 6       4     tick length in ns (4)
//! 10      4     metadata length M in bytes
//! 14      4     record count N
//! 18      M     metadata, UTF-8 JSON
//! 18+M    15*N  records: tick u64, kind u8, channel u16, payload u32
//! ```
//!
//! Record kinds are 0 = hw-rising, 1 = hw-falling, 2 = sw-event. Hardware
//! records carry payload 0. Records are sorted by tick.

use std::fmt;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stimulus::Mode;

pub const MAGIC: [u8; 4] = *b"ITRC";
pub const VERSION: u16 = 1;
pub const TICK_NS: u32 = 4;
pub const HEADER_LEN: usize = 18;
pub const RECORD_LEN: usize = 15;

/// Last tick at or before `time_ns`.
pub fn quantize(time_ns: u64) -> u64 {
    time_ns / u64::from(TICK_NS)
}

/// Saturates for ticks beyond the 64-bit ns range.
pub fn ticks_to_ns(ticks: u64) -> u64 {
    ticks.saturating_mul(u64::from(TICK_NS))
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("bad magic at offset 0: expected \"ITRC\", found {found:?}")]
    BadMagic { offset: usize, found: Vec<u8> },
    #[error("unsupported version {found} at offset 4")]
    Version { offset: usize, found: u16 },
    #[error("unsupported tick length {found} ns at offset 6")]
    TickLength { offset: usize, found: u32 },
    #[error("truncated {what} at offset {offset}: need {need} bytes, have {have}")]
    Truncated {
        offset: usize,
        what: &'static str,
        need: usize,
        have: usize,
    },
    #[error("invalid metadata at offset {offset}: {message}")]
    Metadata { offset: usize, message: String },
    #[error("invalid record kind {value} at offset {offset}")]
    BadKind { offset: usize, value: u8 },
    #[error("unsorted tick {tick} after {previous} at offset {offset}")]
    Unsorted { offset: usize, tick: u64, previous: u64 },
    #[error("channel {channel} at offset {offset} exceeds the {channels} configured channels")]
    ChannelRange { offset: usize, channel: u16, channels: u16 },
    #[error("hardware record at offset {offset} carries payload {payload}")]
    HardwarePayload { offset: usize, payload: u32 },
    #[error("{extra} trailing bytes after the last record at offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("capture has {0} events, more than the format can hold")]
    TooManyEvents(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    HwRising,
    HwFalling,
    SwEvent,
}

impl EventKind {
    pub fn code(self) -> u8 {
        match self {
            EventKind::HwRising => 0,
            EventKind::HwFalling => 1,
            EventKind::SwEvent => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(EventKind::HwRising),
            1 => Some(EventKind::HwFalling),
            2 => Some(EventKind::SwEvent),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::HwRising => "hw-rising",
            EventKind::HwFalling => "hw-falling",
            EventKind::SwEvent => "sw-event",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TraceEvent {
    pub tick: u64,
    pub kind: EventKind,
    /// Stimulus line for hardware events, emitting core for software events.
    pub channel: u16,
    pub payload: u32,
}

impl TraceEvent {
    pub fn hw(tick: u64, rising: bool, channel: u16) -> Self {
        TraceEvent {
            tick,
            kind: if rising {
                EventKind::HwRising
            } else {
                EventKind::HwFalling
            },
            channel,
            payload: 0,
        }
    }

    /// A software event from an 8-bit store; the byte is zero-extended.
    pub fn sw(tick: u64, channel: u16, byte: u8) -> Self {
        TraceEvent {
            tick,
            kind: EventKind::SwEvent,
            channel,
            payload: u32::from(byte),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternInfo {
    pub high_ns: u64,
    pub low_ns: u64,
}

impl PatternInfo {
    pub fn period_ns(&self) -> u64 {
        self.high_ns.saturating_add(self.low_ns)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureMetadata {
    pub scenario: String,
    pub seed: u64,
    /// Simulated capture length in ns (after time scaling).
    pub duration_ns: u64,
    /// Time-scale divisor applied to the stimulation pattern and duration.
    pub scale: u64,
    pub mode: Option<Mode>,
    pub channels: u16,
    pub pattern: Option<PatternInfo>,
    pub stim_channel: u16,
    pub isr_channels: Vec<u16>,
    /// Fully resolved configuration of the run that produced the capture.
    #[serde(default)]
    pub config: serde_json::Value,
}

impl CaptureMetadata {
    pub fn new(scenario: impl Into<String>, channels: u16) -> Self {
        CaptureMetadata {
            scenario: scenario.into(),
            seed: 0,
            duration_ns: 0,
            scale: 1,
            mode: None,
            channels,
            pattern: None,
            stim_channel: 0,
            isr_channels: vec![0],
            config: serde_json::Value::Null,
        }
    }
}

/// Destination for emitted trace events.
pub trait TraceSink {
    fn record(&mut self, event: TraceEvent);
}

impl TraceSink for Vec<TraceEvent> {
    fn record(&mut self, event: TraceEvent) {
        self.push(event);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceCapture {
    pub tick_ns: u32,
    pub metadata: CaptureMetadata,
    pub events: Vec<TraceEvent>,
}

impl TraceSink for TraceCapture {
    fn record(&mut self, event: TraceEvent) {
        self.events.push(event);
    }
}

impl TraceCapture {
    pub fn new(metadata: CaptureMetadata) -> Self {
        TraceCapture {
            tick_ns: TICK_NS,
            metadata,
            events: Vec::new(),
        }
    }

    /// Checks ordering, channel range and hardware payloads.
    pub fn validate(&self) -> Result<(), TraceError> {
        let mut previous = 0;
        for (i, ev) in self.events.iter().enumerate() {
            let offset = i * RECORD_LEN;
            check_event(ev, previous, self.metadata.channels, offset)?;
            previous = ev.tick;
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut sink: W) -> Result<(), TraceError> {
        self.validate()?;
        let metadata = serde_json::to_vec(&self.metadata).map_err(|e| TraceError::Metadata {
            offset: HEADER_LEN,
            message: e.to_string(),
        })?;
        let count = u32::try_from(self.events.len()).map_err(|_| TraceError::TooManyEvents(self.events.len()))?;
        let mut buf = Vec::with_capacity(HEADER_LEN + metadata.len() + RECORD_LEN * self.events.len());
        buf.extend_from_slice(&MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&self.tick_ns.to_le_bytes());
        buf.extend_from_slice(&(metadata.len() as u32).to_le_bytes());
        buf.extend_from_slice(&count.to_le_bytes());
        buf.extend_from_slice(&metadata);
        for ev in &self.events {
            buf.extend_from_slice(&ev.tick.to_le_bytes());
            buf.push(ev.kind.code());
            buf.extend_from_slice(&ev.channel.to_le_bytes());
            buf.extend_from_slice(&ev.payload.to_le_bytes());
        }
        sink.write_all(&buf)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, TraceError> {
        let mut out = Vec::new();
        self.write_to(&mut out)?;
        Ok(out)
    }

    pub fn read_from<R: Read>(mut source: R) -> Result<Self, TraceError> {
        let mut bytes = Vec::new();
        source.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TraceError> {
        let mut r = Cursor { bytes, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != MAGIC {
            return Err(TraceError::BadMagic {
                offset: 0,
                found: magic.to_vec(),
            });
        }
        let version = r.u16("version")?;
        if version != VERSION {
            return Err(TraceError::Version {
                offset: 4,
                found: version,
            });
        }
        let tick_ns = r.u32("tick length")?;
        if tick_ns != TICK_NS {
            return Err(TraceError::TickLength {
                offset: 6,
                found: tick_ns,
            });
        }
        let meta_len = r.u32("metadata length")? as usize;
        let count = r.u32("record count")? as usize;
        let meta_bytes = r.take(meta_len, "metadata")?;
        let metadata: CaptureMetadata = serde_json::from_slice(meta_bytes).map_err(|e| TraceError::Metadata {
            offset: HEADER_LEN,
            message: e.to_string(),
        })?;
        let available = (bytes.len() - r.pos) / RECORD_LEN;
        let mut events = Vec::with_capacity(count.min(available));
        let mut previous = 0;
        for _ in 0..count {
            let offset = r.pos;
            let tick = r.u64("record")?;
            let code = r.take(1, "record")?[0];
            let channel = r.u16("record")?;
            let payload = r.u32("record")?;
            let kind = EventKind::from_code(code).ok_or(TraceError::BadKind {
                offset: offset + 8,
                value: code,
            })?;
            let ev = TraceEvent {
                tick,
                kind,
                channel,
                payload,
            };
            check_event(&ev, previous, metadata.channels, offset)?;
            previous = tick;
            events.push(ev);
        }
        if r.pos != bytes.len() {
            return Err(TraceError::TrailingBytes {
                offset: r.pos,
                extra: bytes.len() - r.pos,
            });
        }
        Ok(TraceCapture {
            tick_ns,
            metadata,
            events,
        })
    }

    /// Plot-friendly CSV: `tick,kind,channel,payload`.
    pub fn write_csv<W: Write>(&self, mut sink: W) -> io::Result<()> {
        writeln!(sink, "tick,kind,channel,payload")?;
        for ev in &self.events {
            writeln!(sink, "{},{},{},{}", ev.tick, ev.kind, ev.channel, ev.payload)?;
        }
        Ok(())
    }
}

fn check_event(ev: &TraceEvent, previous: u64, channels: u16, offset: usize) -> Result<(), TraceError> {
    if ev.tick < previous {
        return Err(TraceError::Unsorted {
            offset,
            tick: ev.tick,
            previous,
        });
    }
    if ev.channel >= channels {
        return Err(TraceError::ChannelRange {
            offset,
            channel: ev.channel,
            channels,
        });
    }
    if ev.kind != EventKind::SwEvent && ev.payload != 0 {
        return Err(TraceError::HardwarePayload {
            offset,
            payload: ev.payload,
        });
    }
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], TraceError> {
        let have = self.bytes.len() - self.pos;
        if have < n {
            return Err(TraceError::Truncated {
                offset: self.pos,
                what,
                need: n,
                have,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, TraceError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, TraceError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, TraceError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TraceCapture {
        let mut meta = CaptureMetadata::new("T1", 4);
        meta.seed = 3;
        meta.mode = Some(Mode::Latency);
        let mut c = TraceCapture::new(meta);
        c.record(TraceEvent::hw(250, true, 0));
        c.record(TraceEvent::sw(308, 0, 121));
        c.record(TraceEvent::hw(500, false, 0));
        c
    }

    #[test]
    fn quantize_floors_to_ticks() {
        assert_eq!(quantize(4), 1);
        assert_eq!(quantize(10), 2);
        assert_eq!(quantize(0), 0);
        assert_eq!(quantize(3), 0);
    }

    #[test]
    fn empty_capture_is_header_plus_metadata() {
        let c = TraceCapture::new(CaptureMetadata::new("empty", 1));
        let bytes = c.to_bytes().unwrap();
        let meta_len = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
        assert_eq!(bytes.len(), HEADER_LEN + meta_len);
        assert_eq!(&bytes[14..18], &0u32.to_le_bytes());
        assert_eq!(TraceCapture::from_bytes(&bytes).unwrap(), c);
    }

    #[test]
    fn three_events_round_trip_bit_exactly() {
        let c = sample();
        let bytes = c.to_bytes().unwrap();
        let back = TraceCapture::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn record_layout_is_fixed() {
        let bytes = sample().to_bytes().unwrap();
        let meta_len = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
        let rec = &bytes[HEADER_LEN + meta_len + RECORD_LEN..HEADER_LEN + meta_len + 2 * RECORD_LEN];
        assert_eq!(&rec[0..8], &308u64.to_le_bytes());
        assert_eq!(rec[8], 2);
        assert_eq!(&rec[9..11], &0u16.to_le_bytes());
        assert_eq!(&rec[11..15], &121u32.to_le_bytes());
    }

    #[test]
    fn corrupted_magic_names_offset_zero() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[0] = b'X';
        let err = TraceCapture::from_bytes(&bytes).unwrap_err();
        assert!(matches!(err, TraceError::BadMagic { offset: 0, .. }));
        assert!(err.to_string().contains("offset 0"));
    }

    #[test]
    fn header_errors() {
        let good = sample().to_bytes().unwrap();
        let mut v = good.clone();
        v[4] = 2;
        assert!(matches!(
            TraceCapture::from_bytes(&v),
            Err(TraceError::Version { found: 2, .. })
        ));
        let mut v = good.clone();
        v[6] = 8;
        assert!(matches!(
            TraceCapture::from_bytes(&v),
            Err(TraceError::TickLength { found: 8, .. })
        ));
        assert!(matches!(
            TraceCapture::from_bytes(&good[..10]),
            Err(TraceError::Truncated { offset: 10, .. })
        ));
        assert!(matches!(
            TraceCapture::from_bytes(&good[..good.len() - 1]),
            Err(TraceError::Truncated { what: "record", .. })
        ));
        let mut v = good.clone();
        v.push(0);
        assert!(matches!(
            TraceCapture::from_bytes(&v),
            Err(TraceError::TrailingBytes { extra: 1, .. })
        ));
    }

    #[test]
    fn record_errors() {
        let good = sample().to_bytes().unwrap();
        let meta_len = u32::from_le_bytes(good[10..14].try_into().unwrap()) as usize;
        let first = HEADER_LEN + meta_len;

        let mut v = good.clone();
        v[first + 8] = 7;
        assert!(matches!(
            TraceCapture::from_bytes(&v),
            Err(TraceError::BadKind { value: 7, .. })
        ));

        let mut v = good.clone();
        v[first + RECORD_LEN..first + RECORD_LEN + 8].copy_from_slice(&1u64.to_le_bytes());
        assert!(matches!(
            TraceCapture::from_bytes(&v),
            Err(TraceError::Unsorted {
                tick: 1,
                previous: 250,
                ..
            })
        ));

        let mut v = good.clone();
        v[first + 9] = 9;
        assert!(matches!(
            TraceCapture::from_bytes(&v),
            Err(TraceError::ChannelRange { channel: 9, .. })
        ));

        let mut v = good;
        v[first + 11] = 1;
        assert!(matches!(
            TraceCapture::from_bytes(&v),
            Err(TraceError::HardwarePayload { .. })
        ));
    }

    #[test]
    fn writer_refuses_invalid_captures() {
        let mut c = sample();
        c.events.swap(0, 1);
        assert!(matches!(c.to_bytes(), Err(TraceError::Unsorted { .. })));
    }

    #[test]
    fn csv_export() {
        let mut out = Vec::new();
        sample().write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "tick,kind,channel,payload\n250,hw-rising,0,0\n308,sw-event,0,121\n500,hw-falling,0,0\n"
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn capture() -> impl Strategy<Value = TraceCapture> {
            (
                proptest::collection::vec((0u64..1000, 0u8..3, 0u16..8, any::<u8>()), 0..200),
                any::<u64>(),
                "[a-zA-Z0-9+-]{0,12}",
            )
                .prop_map(|(raw, seed, name)| {
                    let mut meta = CaptureMetadata::new(name, 8);
                    meta.seed = seed;
                    let mut tick = 0;
                    let events = raw
                        .into_iter()
                        .map(|(dt, kind, channel, byte)| {
                            tick += dt;
                            match kind {
                                0 => TraceEvent::hw(tick, true, channel),
                                1 => TraceEvent::hw(tick, false, channel),
                                _ => TraceEvent::sw(tick, channel, byte),
                            }
                        })
                        .collect();
                    TraceCapture {
                        tick_ns: TICK_NS,
                        metadata: meta,
                        events,
                    }
                })
        }

        proptest! {
            #[test]
            fn read_inverts_write(c in capture()) {
                let bytes = c.to_bytes().unwrap();
                prop_assert_eq!(TraceCapture::from_bytes(&bytes).unwrap(), c);
            }

            #[test]
            fn quantize_is_monotone_with_bounded_error(a in any::<u64>(), b in any::<u64>()) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(quantize(lo) <= quantize(hi));
                prop_assert!(a - ticks_to_ns(quantize(a)) < 4);
            }

            #[test]
            fn reader_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
                let _ = TraceCapture::from_bytes(&bytes);
            }
        }
    }
}
