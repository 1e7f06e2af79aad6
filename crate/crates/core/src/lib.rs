//! Deterministic discrete-event model of the ARMv8-A / GICv2 interrupt path
//! with the stimulation patterns, trace capture and analysis needed to
//! measure interrupt latency and throughput.

pub mod analysis;
pub mod bench;
pub mod gic;
pub mod rng;
pub mod scenarios;
pub mod sim;
pub mod stimulus;
pub mod timing;
pub mod trace;
pub mod units;

pub use analysis::{analyze, latencies, summarize, throughputs, SummaryReport};
pub use bench::{run_benchmark, BenchOptions, BenchResult};
pub use gic::{Gic, InterruptSpec, Trigger};
pub use scenarios::{resolve, BenchmarkName, ScenarioConfig, ScenarioId, TestCase};
pub use sim::{run, RunConfig};
pub use stimulus::{Mode, StimulationPattern};
pub use timing::{CacheMode, StackKind, TimingModel};
pub use trace::{TraceCapture, TraceEvent};
