//! Interrupt generation block: periodic logical-high/low patterns on one or
//! more interrupt lines, each edge mirrored as a hardware trace event.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gic::{Gic, GicError, MIN_PULSE_NS};
use crate::trace::{quantize, TraceEvent, TraceSink};

pub const THROUGHPUT_HIGH_NS: u64 = 9_750_000_000;
pub const THROUGHPUT_LOW_NS: u64 = 250_000_000;
pub const LATENCY_HIGH_NS: u64 = 1_000_000;
pub const LATENCY_LOW_NS: u64 = 4_000_000;
/// Throughput capture length at full scale.
pub const THROUGHPUT_CAPTURE_NS: u64 = 120_000_000_000;
/// Latency capture length at full scale.
pub const LATENCY_CAPTURE_NS: u64 = 30_000_000_000;
/// Default time-scale divisor for desk-scale runs.
pub const DEFAULT_SCALE: u64 = 1000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error("high phase of {0} ns is below the {MIN_PULSE_NS} ns recognition width")]
    BelowRecognition(u64),
    #[error("pattern drives no lines")]
    NoLines,
    #[error("time-scale divisor must be at least 1")]
    ZeroScale,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StimulusError {
    #[error("stimulus line {0} is not bound to an interrupt")]
    UnboundLine(u16),
    #[error(transparent)]
    Gic(#[from] GicError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Latency,
    Throughput,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Latency => "latency",
            Mode::Throughput => "throughput",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "latency" => Ok(Mode::Latency),
            "throughput" => Ok(Mode::Throughput),
            other => Err(format!("unknown mode `{other}` (expected latency or throughput)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulationPattern {
    pub high_ns: u64,
    pub low_ns: u64,
    /// `None` repeats for the whole capture.
    pub repetitions: Option<u64>,
    pub lines: Vec<u16>,
    pub mode: Mode,
}

/// One line transition produced by a pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub time_ns: u64,
    pub line: u16,
    pub rising: bool,
    pub phase: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineBinding {
    pub line: u16,
    pub irq: u16,
}

impl StimulationPattern {
    pub fn new(high_ns: u64, low_ns: u64, lines: Vec<u16>, mode: Mode) -> Result<Self, PatternError> {
        if high_ns < MIN_PULSE_NS {
            return Err(PatternError::BelowRecognition(high_ns));
        }
        Self::probe(high_ns, low_ns, lines, mode)
    }

    /// Like [`StimulationPattern::new`] but accepts pulses narrower than the
    /// recognition width, for probing the recognition rule itself.
    pub fn probe(high_ns: u64, low_ns: u64, mut lines: Vec<u16>, mode: Mode) -> Result<Self, PatternError> {
        lines.sort_unstable();
        lines.dedup();
        if lines.is_empty() {
            return Err(PatternError::NoLines);
        }
        Ok(StimulationPattern {
            high_ns,
            low_ns,
            repetitions: None,
            lines,
            mode,
        })
    }

    /// 9.75 s high, 250 ms low on line 0.
    pub fn throughput() -> Self {
        Self::new(THROUGHPUT_HIGH_NS, THROUGHPUT_LOW_NS, vec![0], Mode::Throughput).expect("valid constants")
    }

    /// 1 ms high, 4 ms low on line 0.
    pub fn latency() -> Self {
        Self::new(LATENCY_HIGH_NS, LATENCY_LOW_NS, vec![0], Mode::Latency).expect("valid constants")
    }

    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Latency => Self::latency(),
            Mode::Throughput => Self::throughput(),
        }
    }

    pub fn with_repetitions(mut self, repetitions: u64) -> Self {
        self.repetitions = Some(repetitions);
        self
    }

    /// Divides both phases by `divisor`, keeping their ratio.
    pub fn scaled(&self, divisor: u64) -> Result<Self, PatternError> {
        if divisor == 0 {
            return Err(PatternError::ZeroScale);
        }
        let high_ns = self.high_ns / divisor;
        if high_ns < MIN_PULSE_NS {
            return Err(PatternError::BelowRecognition(high_ns));
        }
        Ok(StimulationPattern {
            high_ns,
            low_ns: self.low_ns / divisor,
            ..self.clone()
        })
    }

    pub fn period_ns(&self) -> u64 {
        self.high_ns + self.low_ns
    }

    pub fn phase_start(&self, phase: u64) -> u64 {
        phase * self.period_ns()
    }

    /// Phases that start within `[0, duration)`.
    pub fn started_phases(&self, duration_ns: u64) -> u64 {
        let started = duration_ns.div_ceil(self.period_ns());
        self.repetitions.map_or(started, |r| started.min(r))
    }

    /// Phases that fit entirely within `[0, duration)`.
    pub fn complete_phases(&self, duration_ns: u64) -> u64 {
        let complete = duration_ns / self.period_ns();
        self.repetitions.map_or(complete, |r| complete.min(r))
    }

    /// All line transitions inside `[0, duration)`, in time order.
    pub fn edges(&self, duration_ns: u64) -> impl Iterator<Item = Edge> + '_ {
        (0..self.started_phases(duration_ns)).flat_map(move |phase| {
            let start = self.phase_start(phase);
            let fall = start + self.high_ns;
            let rising = self.lines.iter().map(move |&line| Edge {
                time_ns: start,
                line,
                rising: true,
                phase,
            });
            let falling = self
                .lines
                .iter()
                .filter(move |_| fall < duration_ns)
                .map(move |&line| Edge {
                    time_ns: fall,
                    line,
                    rising: false,
                    phase,
                });
            rising.chain(falling)
        })
    }
}

/// Plays `pattern` into the bound interrupts of `gic` and records one
/// hardware event per edge at the same tick. Returns the number of edges.
pub fn drive<S: TraceSink>(
    pattern: &StimulationPattern,
    gic: &mut Gic,
    bindings: &[LineBinding],
    sink: &mut S,
    duration_ns: u64,
) -> Result<u64, StimulusError> {
    if let Some(&line) = pattern.lines.iter().find(|&&l| !bindings.iter().any(|b| b.line == l)) {
        return Err(StimulusError::UnboundLine(line));
    }
    let mut count = 0;
    for edge in pattern.edges(duration_ns) {
        for binding in bindings.iter().filter(|b| b.line == edge.line) {
            gic.assert_line(binding.irq, edge.rising, edge.time_ns)?;
        }
        sink.record(TraceEvent::hw(quantize(edge.time_ns), edge.rising, edge.line));
        count += 1;
    }
    Ok(count)
}
