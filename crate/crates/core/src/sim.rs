//! Discrete-event simulation of the interrupt path.
//!
//! A single event queue ordered by (time, insertion order) interleaves the
//! stimulus edges, Distributor recognition and every core's acknowledge,
//! ISR entry and end-of-interrupt. Time is kept in ns; trace events are
//! quantized to 4 ns ticks when they are emitted.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde_json::json;
use thiserror::Error;

use crate::gic::{Gic, GicError, SignalDecision, SPURIOUS_ID};
use crate::rng::{Stream, DISTRIBUTOR_STREAM};
use crate::scenarios::{ScenarioConfig, ScenarioError};
use crate::stimulus::{Mode, PatternError, StimulationPattern};
use crate::timing::{CorePath, PathContext, PathRngs, TimingError, TimingModel};
use crate::trace::{quantize, CaptureMetadata, PatternInfo, TraceCapture, TraceEvent, TraceSink};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Gic(#[from] GicError),
    #[error("scenario `{scenario}` does not support {mode} measurements")]
    ModeNotSupported { scenario: String, mode: Mode },
    #[error("capture of {duration_ns} ns is shorter than one stimulation phase ({period_ns} ns)")]
    DurationTooShort { duration_ns: u64, period_ns: u64 },
}

/// Parameters of one simulation run besides scenario and timing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Capture length before time scaling.
    pub duration_ns: u64,
    /// Time-scale divisor applied to pattern and duration.
    pub scale: u64,
    /// Replaces the mode's default pattern; given before time scaling.
    pub pattern: Option<StimulationPattern>,
}

impl RunConfig {
    pub fn new(mode: Mode, seed: u64, duration_ns: u64, scale: u64) -> Self {
        RunConfig {
            mode,
            seed,
            duration_ns,
            scale,
            pattern: None,
        }
    }

    pub fn with_pattern(mut self, pattern: StimulationPattern) -> Self {
        self.pattern = Some(pattern);
        self
    }

    /// The pattern actually played, after scaling.
    pub fn effective_pattern(&self) -> Result<StimulationPattern, PatternError> {
        let base = self
            .pattern
            .clone()
            .unwrap_or_else(|| StimulationPattern::for_mode(self.mode));
        if self.scale == 1 {
            Ok(base)
        } else {
            base.scaled(self.scale)
        }
    }

    pub fn effective_duration(&self) -> u64 {
        self.duration_ns / self.scale.max(1)
    }
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Edge { line: u16, rising: bool },
    Recognize { irq: u16 },
    Ack { core: usize },
    IsrEntry { core: usize, irq: u16 },
    Eoi { core: usize, irq: u16 },
}

#[derive(Debug)]
struct Scheduled {
    time: u64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

#[derive(Debug, Clone, Copy)]
enum CoreSlot {
    Idle,
    Acking(CorePath),
    InIsr,
}

struct Engine<'a> {
    timing: &'a TimingModel,
    ctx: PathContext,
    gic: Gic,
    measured: u16,
    stim_line: u16,
    queue: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    now: u64,
    cores: Vec<CoreSlot>,
    rngs: Vec<PathRngs>,
    distributor: Stream,
    capture: TraceCapture,
}

impl Engine<'_> {
    fn schedule(&mut self, time: u64, event: Event) {
        self.seq += 1;
        self.queue.push(Reverse(Scheduled {
            time,
            seq: self.seq,
            event,
        }));
    }

    fn distribute(&mut self) {
        for core in 0..self.cores.len() {
            if !matches!(self.cores[core], CoreSlot::Idle) {
                continue;
            }
            self.gic.distributor_select(core);
            if let SignalDecision::Signal(_) = self.gic.cpu_interface_filter(core) {
                let path = self.timing.sample_core_path(&self.ctx, &mut self.rngs[core]);
                self.cores[core] = CoreSlot::Acking(path);
                self.schedule(self.now + path.to_ack(), Event::Ack { core });
            }
        }
    }

    fn handle(&mut self, event: Event) -> Result<(), SimError> {
        match event {
            Event::Edge { line, rising } => {
                self.capture.record(TraceEvent::hw(quantize(self.now), rising, line));
                if line != self.stim_line {
                    return Ok(());
                }
                self.gic.assert_line(self.measured, rising, self.now)?;
                if rising {
                    let delay = self.timing.sample_recognize(&mut self.distributor);
                    self.schedule(self.now + delay, Event::Recognize { irq: self.measured });
                }
            }
            Event::Recognize { irq } => {
                self.gic.poll_recognition(irq, self.now)?;
                self.distribute();
            }
            Event::Ack { core } => {
                let CoreSlot::Acking(path) = self.cores[core] else {
                    unreachable!("acknowledge on core {core} without a signal in flight");
                };
                let irq = self.gic.acknowledge(core, self.now);
                if irq == SPURIOUS_ID {
                    self.cores[core] = CoreSlot::Idle;
                    self.distribute();
                } else {
                    self.cores[core] = CoreSlot::InIsr;
                    self.schedule(self.now + path.to_entry(), Event::IsrEntry { core, irq });
                }
            }
            Event::IsrEntry { core, irq } => {
                if irq == self.measured {
                    self.capture
                        .record(TraceEvent::sw(quantize(self.now), core as u16, irq as u8));
                }
                let done = self.now + self.timing.isr_body_ns + self.timing.eoi_ns;
                self.schedule(done, Event::Eoi { core, irq });
            }
            Event::Eoi { core, irq } => {
                self.gic.end_of_interrupt(core, irq, self.now)?;
                self.cores[core] = CoreSlot::Idle;
                self.distribute();
            }
        }
        Ok(())
    }
}

/// Simulates `scenario` under `timing` and returns the emitted trace.
/// Identical inputs give an identical capture.
pub fn run(scenario: &ScenarioConfig, timing: &TimingModel, config: &RunConfig) -> Result<TraceCapture, SimError> {
    scenario.validate()?;
    timing.validate()?;
    if !scenario.modes.contains(&config.mode) {
        return Err(SimError::ModeNotSupported {
            scenario: scenario.name.clone(),
            mode: config.mode,
        });
    }
    let pattern = config.effective_pattern()?;
    let duration = config.effective_duration();
    if duration < pattern.period_ns() {
        return Err(SimError::DurationTooShort {
            duration_ns: duration,
            period_ns: pattern.period_ns(),
        });
    }

    let cores = scenario.enabled_cores;
    let gic = Gic::configure(&scenario.interrupt_specs(config.mode), cores, scenario.priority_levels)?;
    let ctx = PathContext {
        cache_mode: scenario.cache_mode,
        stack: scenario.stack,
        contending_cores: scenario.contending_cores(),
        memory_stressor_cores: scenario.stressor().map_or(0, |s| s.core_count()),
        enabled_interrupts: gic.enabled_count(),
    };
    let isr_channels: Vec<u16> = scenario.measured_targets().iter().map(|c| c as u16).collect();
    let line_count = pattern.lines.iter().max().map_or(1, |&l| l + 1);
    let metadata = CaptureMetadata {
        scenario: scenario.name.clone(),
        seed: config.seed,
        duration_ns: duration,
        scale: config.scale,
        mode: Some(config.mode),
        channels: line_count.max(cores as u16),
        pattern: Some(PatternInfo {
            high_ns: pattern.high_ns,
            low_ns: pattern.low_ns,
        }),
        stim_channel: pattern.lines[0],
        isr_channels,
        config: json!({
            "scenario": scenario,
            "timing": timing,
            "stack_profile": timing.profile(scenario.stack),
            "pattern": pattern,
            "path_context": {
                "contending_cores": ctx.contending_cores,
                "memory_stressor_cores": ctx.memory_stressor_cores,
                "enabled_interrupts": ctx.enabled_interrupts,
            },
        }),
    };

    let mut engine = Engine {
        timing,
        ctx,
        gic,
        measured: scenario.measured_irq,
        stim_line: pattern.lines[0],
        queue: BinaryHeap::new(),
        seq: 0,
        now: 0,
        cores: vec![CoreSlot::Idle; cores],
        rngs: (0..cores).map(|c| PathRngs::for_core(config.seed, c)).collect(),
        distributor: Stream::new(config.seed, DISTRIBUTOR_STREAM),
        capture: TraceCapture::new(metadata),
    };
    for edge in pattern.edges(duration) {
        engine.schedule(
            edge.time_ns,
            Event::Edge {
                line: edge.line,
                rising: edge.rising,
            },
        );
    }
    while let Some(Reverse(next)) = engine.queue.pop() {
        if next.time >= duration {
            break;
        }
        engine.now = next.time;
        engine.handle(next.event)?;
    }
    Ok(engine.capture)
}
