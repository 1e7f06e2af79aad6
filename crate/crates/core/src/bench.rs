//! Benchmark orchestration: every (seed, stack profile) pair is simulated
//! and analyzed independently, then pooled per profile.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::analysis::{analyze, AnalysisError, ReportSample, SummaryReport};
use crate::scenarios::{benchmark, BenchmarkName, ScenarioError, DEFAULT_BLMAX_T6_CORES};
use crate::sim::{run, RunConfig, SimError};
use crate::stimulus::{Mode, DEFAULT_SCALE, LATENCY_CAPTURE_NS, THROUGHPUT_CAPTURE_NS};
use crate::timing::{StackKind, TimingModel};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("seed {seed} ({stack}): {source}")]
    Sim {
        seed: u64,
        stack: StackKind,
        #[source]
        source: SimError,
    },
    #[error("seed {seed} ({stack}): {source}")]
    Analysis {
        seed: u64,
        stack: StackKind,
        #[source]
        source: AnalysisError,
    },
    #[error("no seeds given")]
    NoSeeds,
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub seeds: Vec<u64>,
    pub scale: u64,
    /// Capture length before scaling; defaults to the mode's capture length.
    pub duration_ns: Option<u64>,
    pub blmax_t6_cores: u32,
    pub profiles: Vec<StackKind>,
    pub timing: TimingModel,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            seeds: (1..=10).collect(),
            scale: DEFAULT_SCALE,
            duration_ns: None,
            blmax_t6_cores: DEFAULT_BLMAX_T6_CORES,
            profiles: StackKind::ALL.to_vec(),
            timing: TimingModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub stack: StackKind,
    pub report: SummaryReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub name: String,
    pub mode: Mode,
    pub runs: Vec<SeedReport>,
    /// One pooled report per stack profile, in `profiles` order.
    pub aggregates: Vec<SeedAggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAggregate {
    pub stack: StackKind,
    pub report: SummaryReport,
}

pub fn run_benchmark(name: BenchmarkName, opts: &BenchOptions) -> Result<BenchResult, BenchError> {
    if opts.seeds.is_empty() {
        return Err(BenchError::NoSeeds);
    }
    let def = benchmark(name, opts.blmax_t6_cores)?;
    let duration = opts.duration_ns.unwrap_or(match def.mode {
        Mode::Latency => LATENCY_CAPTURE_NS,
        Mode::Throughput => THROUGHPUT_CAPTURE_NS,
    });
    let jobs: Vec<(StackKind, u64)> = opts
        .profiles
        .iter()
        .flat_map(|&stack| opts.seeds.iter().map(move |&seed| (stack, seed)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(stack, seed)| {
            let scenario = def.config.clone().with_stack(stack);
            let cfg = RunConfig::new(def.mode, seed, duration, opts.scale);
            let capture =
                run(&scenario, &opts.timing, &cfg).map_err(|source| BenchError::Sim { seed, stack, source })?;
            let report = analyze(&capture, def.mode).map_err(|source| BenchError::Analysis { seed, stack, source })?;
            Ok(SeedReport { seed, stack, report })
        })
        .collect::<Result<Vec<_>, BenchError>>()?;

    let aggregates = opts
        .profiles
        .iter()
        .map(|&stack| {
            let mine: Vec<&SeedReport> = runs.iter().filter(|r| r.stack == stack).collect();
            let samples: Vec<ReportSample> = mine.iter().flat_map(|r| r.report.samples.iter().copied()).collect();
            let misses = mine.iter().map(|r| r.report.misses).sum();
            let phases = mine.iter().map(|r| r.report.phases).sum();
            let metadata = json!({
                "benchmark": name.as_str(),
                "stack": stack,
                "seeds": opts.seeds,
                "scale": opts.scale,
                "duration_ns": duration,
                "constituents": def.constituents.iter().map(|c| c.name.clone()).collect::<Vec<_>>(),
                "config": def.config.clone().with_stack(stack),
                "timing": opts.timing,
            });
            let mut report = SummaryReport::from_samples(name.as_str(), def.mode, samples, misses, phases, metadata);
            report.warnings = mine.iter().flat_map(|r| r.report.warnings.iter().cloned()).collect();
            SeedAggregate { stack, report }
        })
        .collect();

    Ok(BenchResult {
        name: name.as_str().to_string(),
        mode: def.mode,
        runs,
        aggregates,
    })
}

fn fmt_stat(v: Option<f64>, mode: Mode) -> String {
    match (v, mode) {
        (None, _) => "-".into(),
        (Some(v), Mode::Latency) => format!("{v:.0} ns"),
        (Some(v), Mode::Throughput) => format!("{:.1} kHz", v / 1e3),
    }
}

/// Side-by-side comparison of the stack profiles of one or more benchmarks.
pub fn comparison_table(results: &[BenchResult]) -> String {
    let mut rows = vec![[
        "benchmark".to_string(),
        "stack".into(),
        "count".into(),
        "misses".into(),
        "min".into(),
        "median".into(),
        "p99".into(),
        "max".into(),
    ]];
    for r in results {
        for a in &r.aggregates {
            let rep = &a.report;
            rows.push([
                r.name.clone(),
                a.stack.to_string(),
                rep.count.to_string(),
                rep.misses.to_string(),
                fmt_stat(rep.min, r.mode),
                fmt_stat(rep.median, r.mode),
                fmt_stat(rep.p99, r.mode),
                fmt_stat(rep.max, r.mode),
            ]);
        }
    }
    let widths: Vec<usize> = (0..8)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
        }
    }
    out
}
