//! Measurement extraction from captures.
//!
//! Phase `i` spans `[A_i, A_{i+1})` where `A_i` is the i-th rising edge on
//! the stimulus channel. The last phase is closed with the pattern period
//! from the capture metadata, and only if it fits in the capture.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stimulus::Mode;
use crate::trace::{ticks_to_ns, EventKind, TraceCapture};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no samples to summarize")]
    Empty,
    #[error("capture contains no events")]
    EmptyCapture,
    #[error("capture was recorded in {recorded} mode, not {requested}")]
    ModeMismatch { recorded: Mode, requested: Mode },
    #[error("capture metadata lists no ISR channels")]
    NoIsrChannel,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase {
    pub index: u64,
    pub start_tick: u64,
    /// Exclusive; `None` when the phase runs past the end of the capture.
    pub end_tick: Option<u64>,
}

/// Ticks of all rising edges on `channel`, ascending.
pub fn segment_phases(capture: &TraceCapture, channel: u16) -> Vec<u64> {
    let mut ticks: Vec<u64> = capture
        .events
        .iter()
        .filter(|e| e.kind == EventKind::HwRising && e.channel == channel)
        .map(|e| e.tick)
        .collect();
    ticks.sort_unstable();
    ticks
}

/// Phases with their end ticks resolved.
pub fn phases(capture: &TraceCapture, channel: u16) -> Vec<Phase> {
    let starts = segment_phases(capture, channel);
    let tick_ns = u64::from(capture.tick_ns.max(1));
    let last_end = |start: u64| {
        let m = &capture.metadata;
        let period = m.pattern?.period_ns();
        let end_ns = start.checked_mul(tick_ns)?.checked_add(period)?;
        (end_ns <= m.duration_ns).then(|| end_ns.div_ceil(tick_ns))
    };
    starts
        .iter()
        .enumerate()
        .map(|(i, &start)| Phase {
            index: i as u64,
            start_tick: start,
            end_tick: starts.get(i + 1).copied().or_else(|| last_end(start)),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencySample {
    pub phase: u64,
    pub a_tick: u64,
    pub b_tick: u64,
    pub latency_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatencyAnalysis {
    pub samples: Vec<LatencySample>,
    /// Complete phases without an ISR event.
    pub misses: u64,
    pub phases: u64,
}

/// Latency set: per complete phase, the first software event on any of
/// `isr_channels` at or after the rising edge. With several channels the
/// interrupt is routed to several cores and whichever handles it counts.
pub fn latencies(capture: &TraceCapture, stim_channel: u16, isr_channels: &[u16]) -> LatencyAnalysis {
    let mut sw: Vec<u64> = capture
        .events
        .iter()
        .filter(|e| e.kind == EventKind::SwEvent && isr_channels.contains(&e.channel))
        .map(|e| e.tick)
        .collect();
    sw.sort_unstable();
    let mut out = LatencyAnalysis::default();
    for phase in phases(capture, stim_channel) {
        let Some(end) = phase.end_tick else { continue };
        out.phases += 1;
        let i = sw.partition_point(|&t| t < phase.start_tick);
        match sw.get(i) {
            Some(&b) if b < end => out.samples.push(LatencySample {
                phase: phase.index,
                a_tick: phase.start_tick,
                b_tick: b,
                latency_ns: ticks_to_ns(b - phase.start_tick),
            }),
            _ => out.misses += 1,
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputSample {
    pub phase: u64,
    pub isr_count: u64,
    pub high_ns: u64,
    pub throughput_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ThroughputAnalysis {
    pub samples: Vec<ThroughputSample>,
    pub warnings: Vec<String>,
}

/// Throughput set: ISR events on any of `isr_channels` per complete phase,
/// divided by the length of the high phase.
pub fn throughputs(capture: &TraceCapture, stim_channel: u16, isr_channels: &[u16]) -> ThroughputAnalysis {
    let mut out = ThroughputAnalysis::default();
    let starts = segment_phases(capture, stim_channel);
    if starts.len() < 2 {
        out.warnings.push(format!(
            "{} rising edge(s) on channel {stim_channel}; at least 2 are needed for throughput",
            starts.len()
        ));
        return out;
    }
    let mut sw: Vec<u64> = capture
        .events
        .iter()
        .filter(|e| e.kind == EventKind::SwEvent && isr_channels.contains(&e.channel))
        .map(|e| e.tick)
        .collect();
    sw.sort_unstable();
    let mut falls: Vec<u64> = capture
        .events
        .iter()
        .filter(|e| e.kind == EventKind::HwFalling && e.channel == stim_channel)
        .map(|e| e.tick)
        .collect();
    falls.sort_unstable();
    let configured_high = capture.metadata.pattern.map(|p| p.high_ns);

    for phase in phases(capture, stim_channel) {
        let Some(end) = phase.end_tick else { continue };
        let high_ns = configured_high.or_else(|| {
            let f = falls.partition_point(|&t| t <= phase.start_tick);
            falls
                .get(f)
                .filter(|&&t| t < end)
                .map(|&t| ticks_to_ns(t - phase.start_tick))
        });
        let Some(high_ns) = high_ns.filter(|&h| h > 0) else {
            out.warnings
                .push(format!("phase {} has no measurable high duration", phase.index));
            continue;
        };
        let isr_count = (sw.partition_point(|&t| t < end) - sw.partition_point(|&t| t < phase.start_tick)) as u64;
        out.samples.push(ThroughputSample {
            phase: phase.index,
            isr_count,
            high_ns,
            throughput_hz: isr_count as f64 / (high_ns as f64 * 1e-9),
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub p95: f64,
    pub p99: f64,
}

fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Order statistics; the median of an even-length set is the mean of the
/// two middle values, percentiles use nearest rank.
pub fn summarize(samples: &[f64]) -> Result<Stats, AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    };
    Ok(Stats {
        min: v[0],
        median,
        max: v[n - 1],
        p95: nearest_rank(&v, 95.0),
        p99: nearest_rank(&v, 99.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportSample {
    pub phase: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub schema_version: u32,
    pub scenario: String,
    pub mode: Mode,
    /// `ns` for latency, `Hz` for throughput.
    pub unit: String,
    pub count: usize,
    pub misses: u64,
    pub phases: u64,
    pub min: Option<f64>,
    pub median: Option<f64>,
    pub max: Option<f64>,
    pub p95: Option<f64>,
    pub p99: Option<f64>,
    pub samples: Vec<ReportSample>,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub metadata: serde_json::Value,
}

pub const CSV_COLUMNS: [&str; 13] = [
    "schema_version",
    "scenario",
    "mode",
    "unit",
    "phase",
    "value",
    "count",
    "misses",
    "min",
    "median",
    "max",
    "p95",
    "p99",
];

impl SummaryReport {
    pub fn from_samples(
        scenario: impl Into<String>,
        mode: Mode,
        samples: Vec<ReportSample>,
        misses: u64,
        phases: u64,
        metadata: serde_json::Value,
    ) -> Self {
        let values: Vec<f64> = samples.iter().map(|s| s.value).collect();
        let stats = summarize(&values).ok();
        SummaryReport {
            schema_version: REPORT_SCHEMA_VERSION,
            scenario: scenario.into(),
            mode,
            unit: match mode {
                Mode::Latency => "ns",
                Mode::Throughput => "Hz",
            }
            .to_string(),
            count: samples.len(),
            misses,
            phases,
            min: stats.map(|s| s.min),
            median: stats.map(|s| s.median),
            max: stats.map(|s| s.max),
            p95: stats.map(|s| s.p95),
            p99: stats.map(|s| s.p99),
            samples,
            warnings: Vec::new(),
            metadata,
        }
    }

    pub fn stats(&self) -> Option<Stats> {
        Some(Stats {
            min: self.min?,
            median: self.median?,
            max: self.max?,
            p95: self.p95?,
            p99: self.p99?,
        })
    }

    pub fn to_json(&self) -> Result<String, AnalysisError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per sample with the summary repeated on every row; a report
    /// without samples gets a single row with empty `phase` and `value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), AnalysisError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_COLUMNS)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        let row = |phase: String, value: String| {
            [
                self.schema_version.to_string(),
                self.scenario.clone(),
                self.mode.to_string(),
                self.unit.clone(),
                phase,
                value,
                self.count.to_string(),
                self.misses.to_string(),
                opt(self.min),
                opt(self.median),
                opt(self.max),
                opt(self.p95),
                opt(self.p99),
            ]
        };
        if self.samples.is_empty() {
            out.write_record(row(String::new(), String::new()))?;
        }
        for s in &self.samples {
            out.write_record(row(s.phase.to_string(), s.value.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String, AnalysisError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Full analysis of a capture in `mode` using the channels recorded in its
/// metadata.
pub fn analyze(capture: &TraceCapture, mode: Mode) -> Result<SummaryReport, AnalysisError> {
    let m = &capture.metadata;
    if let Some(recorded) = m.mode {
        if recorded != mode {
            return Err(AnalysisError::ModeMismatch {
                recorded,
                requested: mode,
            });
        }
    }
    if capture.events.is_empty() {
        return Err(AnalysisError::EmptyCapture);
    }
    let metadata = serde_json::to_value(m)?;
    match mode {
        Mode::Latency => {
            if m.isr_channels.is_empty() {
                return Err(AnalysisError::NoIsrChannel);
            }
            let x = latencies(capture, m.stim_channel, &m.isr_channels);
            let samples = x
                .samples
                .iter()
                .map(|s| ReportSample {
                    phase: s.phase,
                    value: s.latency_ns as f64,
                })
                .collect();
            let mut report = SummaryReport::from_samples(&m.scenario, mode, samples, x.misses, x.phases, metadata);
            if x.samples.is_empty() {
                report.warnings.push("no complete phase produced an ISR event".into());
            }
            Ok(report)
        }
        Mode::Throughput => {
            if m.isr_channels.is_empty() {
                return Err(AnalysisError::NoIsrChannel);
            }
            let t = throughputs(capture, m.stim_channel, &m.isr_channels);
            let samples: Vec<ReportSample> = t
                .samples
                .iter()
                .map(|s| ReportSample {
                    phase: s.phase,
                    value: s.throughput_hz,
                })
                .collect();
            let n = samples.len() as u64;
            let mut report = SummaryReport::from_samples(&m.scenario, mode, samples, 0, n, metadata);
            report.warnings = t.warnings;
            Ok(report)
        }
    }
}
