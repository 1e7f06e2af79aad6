#![allow(dead_code)]

use irqbench::rng::Stream;
use irqbench::trace::{CaptureMetadata, EventKind, PatternInfo, TraceCapture, TraceEvent};

/// Random sorted capture with at most `max_events` events on 4 channels.
pub fn random_capture(rng: &mut Stream, max_events: u64) -> TraceCapture {
    let n = rng.uniform(0, max_events);
    let mut meta = CaptureMetadata::new("random", 4);
    meta.seed = rng.next_u64();
    meta.stim_channel = rng.uniform(0, 1) as u16;
    meta.isr_channels = (0..4u16).filter(|_| rng.uniform(0, 1) == 1).collect();
    // edge density varies from one capture to the next
    let edge_odds = rng.uniform(1, 40);
    let mut tick = 0u64;
    let mut events = Vec::with_capacity(n as usize);
    for _ in 0..n {
        tick += rng.uniform(0, 3) * rng.uniform(0, 50);
        let kind = if rng.uniform(1, edge_odds) == 1 {
            if rng.uniform(0, 1) == 0 {
                EventKind::HwRising
            } else {
                EventKind::HwFalling
            }
        } else {
            EventKind::SwEvent
        };
        let channel = rng.uniform(0, 3) as u16;
        events.push(match kind {
            EventKind::SwEvent => TraceEvent::sw(tick, channel, rng.uniform(0, 255) as u8),
            k => TraceEvent::hw(tick, k == EventKind::HwRising, channel),
        });
    }
    if rng.uniform(0, 2) > 0 {
        let high_ns = rng.uniform(0, 2000);
        meta.pattern = Some(PatternInfo {
            high_ns,
            low_ns: rng.uniform(1, 2000),
        });
    }
    meta.duration_ns = (tick + rng.uniform(0, 2000)) * 4;
    let mut capture = TraceCapture::new(meta);
    capture.events = events;
    capture
}

fn rising(c: &TraceCapture, stim: u16) -> Vec<u64> {
    c.events
        .iter()
        .filter(|e| e.kind == EventKind::HwRising && e.channel == stim)
        .map(|e| e.tick)
        .collect()
}

/// End tick of phase `i`, found by scanning the capture again.
fn phase_end(c: &TraceCapture, starts: &[u64], i: usize) -> Option<u64> {
    if i + 1 < starts.len() {
        return Some(starts[i + 1]);
    }
    let p = c.metadata.pattern?;
    let end_ns = starts[i] * 4 + p.high_ns + p.low_ns;
    if end_ns <= c.metadata.duration_ns {
        Some(end_ns.div_ceil(4))
    } else {
        None
    }
}

/// (phase, latency ns) pairs and miss count, by a full scan per phase.
pub fn reference_latencies(c: &TraceCapture, stim: u16, isr: &[u16]) -> (Vec<(u64, u64)>, u64) {
    let starts = rising(c, stim);
    let mut samples = Vec::new();
    let mut misses = 0;
    for i in 0..starts.len() {
        let Some(end) = phase_end(c, &starts, i) else { continue };
        let mut first: Option<u64> = None;
        for e in &c.events {
            if e.kind == EventKind::SwEvent && isr.contains(&e.channel) && e.tick >= starts[i] && e.tick < end {
                first = Some(first.map_or(e.tick, |f: u64| f.min(e.tick)));
            }
        }
        match first {
            Some(b) => samples.push((i as u64, (b - starts[i]) * 4)),
            None => misses += 1,
        }
    }
    (samples, misses)
}

/// (phase, isr count, high ns) triples, by a full scan per phase.
pub fn reference_throughputs(c: &TraceCapture, stim: u16, isr: &[u16]) -> Vec<(u64, u64, u64)> {
    let starts = rising(c, stim);
    if starts.len() < 2 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i in 0..starts.len() {
        let Some(end) = phase_end(c, &starts, i) else { continue };
        let high = match c.metadata.pattern {
            Some(p) => Some(p.high_ns),
            None => c
                .events
                .iter()
                .filter(|e| e.kind == EventKind::HwFalling && e.channel == stim && e.tick > starts[i] && e.tick < end)
                .map(|e| (e.tick - starts[i]) * 4)
                .min(),
        };
        let Some(high) = high.filter(|&h| h > 0) else { continue };
        let count = c
            .events
            .iter()
            .filter(|e| e.kind == EventKind::SwEvent && isr.contains(&e.channel) && e.tick >= starts[i] && e.tick < end)
            .count() as u64;
        out.push((i as u64, count, high));
    }
    out
}
