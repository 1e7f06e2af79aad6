//! Registry of the test-cases T1–T7 and the benchmark compositions built from them.
//!
//! Scenario identifiers are stable strings: `T1`…`T7`, `T4-<n>` with
//! `n ∈ {1, 36, 72, 108, 144, 180}`, `T6-<k>` with `k ∈ {2, 3, 4}`, the
//! benchmarks `B-Lmin`, `B-Lmax`, `B-Tmax`, and any `+`-joined combination
//! (`T4-36+T7`) which resolves to the merge of its parts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gic::{CoreSet, InterruptSpec, Trigger, DEFAULT_PRIORITY_LEVELS, MAX_CORES};
use crate::stimulus::Mode;
use crate::timing::{CacheMode, MemoryStressor, StackKind};

/// The measured PL-to-PS interrupt. Always priority 0.
pub const MEASURED_IRQ: u16 = 121;
pub const FIRST_STRESSOR_IRQ: u16 = 32;
pub const T4_VARIANTS: [u32; 6] = [1, 36, 72, 108, 144, 180];
pub const T6_VARIANTS: [u32; 3] = [2, 3, 4];
/// Array written by the memory stressor in T7.
pub const T7_ARRAY_BYTES: u64 = 96 * 1024 * 1024;
/// Core count of the T6 part of B-Lmax unless overridden.
pub const DEFAULT_BLMAX_T6_CORES: u32 = 4;

const VALID_IDS: &str =
    "T1, T2, T3, T4-{1,36,72,108,144,180}, T5, T6-{2,3,4}, T7, B-Lmin, B-Lmax, B-Tmax, or a `+`-joined combination";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`; valid ids: {VALID_IDS}")]
    UnknownId(String),
    #[error("invalid variant {variant:?} for {case}")]
    InvalidVariant { case: TestCase, variant: Option<u32> },
    #[error("cannot merge cache modes {0} and {1}")]
    CacheConflict(CacheMode, CacheMode),
    #[error("merged scenario `{0}` has no measurement mode in common")]
    ModeConflict(String),
    #[error("cannot merge stack profiles {0} and {1}")]
    StackConflict(StackKind, StackKind),
    #[error("invalid scenario `{name}`: {reason}")]
    Invalid { name: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestCase {
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
    T7,
}

impl TestCase {
    pub const ALL: [TestCase; 7] = [
        TestCase::T1,
        TestCase::T2,
        TestCase::T3,
        TestCase::T4,
        TestCase::T5,
        TestCase::T6,
        TestCase::T7,
    ];

    pub fn variants(self) -> &'static [u32] {
        match self {
            TestCase::T4 => &T4_VARIANTS,
            TestCase::T6 => &T6_VARIANTS,
            _ => &[],
        }
    }
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", *self as u8 + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StressorConfig {
    pub cores: CoreSet,
    pub array_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub modes: BTreeSet<Mode>,
    pub measured_irq: u16,
    /// Every enabled interrupt and its priority, the measured one included.
    pub priorities: BTreeMap<u16, u8>,
    pub cache_mode: CacheMode,
    pub enabled_cores: usize,
    /// The measured interrupt is routed to all enabled cores.
    pub parallel_handling: bool,
    pub memory_stressor: Option<StressorConfig>,
    pub stack: StackKind,
    pub priority_levels: u16,
}

impl ScenarioConfig {
    fn single(name: &str, modes: &[Mode], cache_mode: CacheMode, cores: usize) -> Self {
        ScenarioConfig {
            name: name.to_string(),
            modes: modes.iter().copied().collect(),
            measured_irq: MEASURED_IRQ,
            priorities: BTreeMap::from([(MEASURED_IRQ, 0)]),
            cache_mode,
            enabled_cores: cores,
            parallel_handling: false,
            memory_stressor: None,
            stack: StackKind::BareMetal,
            priority_levels: DEFAULT_PRIORITY_LEVELS,
        }
    }

    pub fn with_stack(mut self, stack: StackKind) -> Self {
        self.stack = stack;
        self
    }

    pub fn enabled_interrupts(&self) -> usize {
        self.priorities.len()
    }

    /// Interrupts other than the measured one.
    pub fn stressor_irqs(&self) -> impl Iterator<Item = u16> + '_ {
        self.priorities
            .keys()
            .copied()
            .filter(move |&id| id != self.measured_irq)
    }

    /// Cores whose GIC transactions race for the measured interrupt.
    pub fn contending_cores(&self) -> usize {
        if self.parallel_handling {
            self.enabled_cores
        } else {
            1
        }
    }

    pub fn measured_targets(&self) -> CoreSet {
        if self.parallel_handling {
            CoreSet::first(self.enabled_cores)
        } else {
            CoreSet::single(0)
        }
    }

    pub fn stressor(&self) -> Option<MemoryStressor> {
        self.memory_stressor
            .as_ref()
            .and_then(|s| MemoryStressor::start(s.cores, s.array_bytes).ok())
    }

    /// GIC configuration for a run in `mode`: the measured interrupt is
    /// edge-triggered for latency and level-sensitive for throughput.
    pub fn interrupt_specs(&self, mode: Mode) -> Vec<InterruptSpec> {
        self.priorities
            .iter()
            .map(|(&id, &priority)| {
                if id == self.measured_irq {
                    let trigger = match mode {
                        Mode::Latency => Trigger::Edge,
                        Mode::Throughput => Trigger::Level,
                    };
                    InterruptSpec::new(id, trigger, priority).with_targets(self.measured_targets())
                } else {
                    InterruptSpec::new(id, Trigger::Level, priority)
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |reason: String| {
            Err(ScenarioError::Invalid {
                name: self.name.clone(),
                reason,
            })
        };
        if !(1..=MAX_CORES).contains(&self.enabled_cores) {
            return invalid(format!(
                "{} enabled cores, expected 1..={MAX_CORES}",
                self.enabled_cores
            ));
        }
        if self.modes.is_empty() {
            return invalid("no measurement mode".into());
        }
        if self.cache_mode == CacheMode::InvalidatedInIsr && self.modes.contains(&Mode::Throughput) {
            return invalid("invalidated caches only support latency measurements".into());
        }
        if self.parallel_handling && self.enabled_cores < 2 {
            return invalid("parallel handling needs at least 2 cores".into());
        }
        if self.priorities.get(&self.measured_irq) != Some(&0) {
            return invalid("the measured interrupt must be enabled at priority 0".into());
        }
        if let Some((id, p)) = self
            .priorities
            .iter()
            .find(|(_, &p)| u16::from(p) >= self.priority_levels)
        {
            return invalid(format!(
                "interrupt {id} has priority {p} outside 0..{}",
                self.priority_levels
            ));
        }
        if let Some(s) = &self.memory_stressor {
            if s.cores.is_empty() || s.array_bytes == 0 {
                return invalid("memory stressor needs cores and a non-empty array".into());
            }
            if s.cores.iter().any(|c| c >= self.enabled_cores) {
                return invalid("memory stressor runs on a disabled core".into());
            }
        }
        Ok(())
    }
}

fn stressor_ids(n: usize) -> impl Iterator<Item = u16> {
    (FIRST_STRESSOR_IRQ..).filter(|&id| id != MEASURED_IRQ).take(n)
}

/// The registry row for `case` (with its variant where one is required).
pub fn test_case(case: TestCase, variant: Option<u32>) -> Result<ScenarioConfig, ScenarioError> {
    let bad_variant = || ScenarioError::InvalidVariant { case, variant };
    match (case.variants().is_empty(), variant) {
        (true, None) => {}
        (false, Some(v)) if case.variants().contains(&v) => {}
        _ => return Err(bad_variant()),
    }
    let both = [Mode::Latency, Mode::Throughput];
    let latency = [Mode::Latency];
    let config = match case {
        TestCase::T1 => ScenarioConfig::single("T1", &both, CacheMode::Disabled, 1),
        TestCase::T2 => ScenarioConfig::single("T2", &both, CacheMode::Enabled, 1),
        TestCase::T3 => ScenarioConfig::single("T3", &latency, CacheMode::InvalidatedInIsr, 1),
        TestCase::T4 => {
            let n = variant.unwrap_or_default() as usize;
            let mut c = ScenarioConfig::single(&format!("T4-{n}"), &latency, CacheMode::Disabled, 2);
            let lowest = (c.priority_levels - 1) as u8;
            c.priorities.extend(stressor_ids(n).map(|id| (id, lowest)));
            c
        }
        TestCase::T5 => {
            let mut c = ScenarioConfig::single("T5", &latency, CacheMode::Disabled, 2);
            c.priorities.extend(stressor_ids(14).zip((1..=14u8).rev()));
            c
        }
        TestCase::T6 => {
            let k = variant.unwrap_or_default() as usize;
            let mut c = ScenarioConfig::single(&format!("T6-{k}"), &both, CacheMode::Disabled, k);
            c.parallel_handling = true;
            c
        }
        TestCase::T7 => {
            let mut c = ScenarioConfig::single("T7", &latency, CacheMode::Disabled, 4);
            c.memory_stressor = Some(StressorConfig {
                cores: CoreSet::first(4),
                array_bytes: T7_ARRAY_BYTES,
            });
            c
        }
    };
    debug_assert!(config.validate().is_ok());
    Ok(config)
}

/// Every test-case row, one entry per variant.
pub fn registry() -> Vec<ScenarioConfig> {
    TestCase::ALL
        .iter()
        .flat_map(|&case| {
            let variants: Vec<Option<u32>> = if case.variants().is_empty() {
                vec![None]
            } else {
                case.variants().iter().map(|&v| Some(v)).collect()
            };
            variants
                .into_iter()
                .map(move |v| test_case(case, v).expect("registry variant"))
        })
        .collect()
}

fn merge_cache(a: CacheMode, b: CacheMode) -> Result<CacheMode, ScenarioError> {
    use CacheMode::*;
    match (a, b) {
        (x, y) if x == y => Ok(x),
        (Disabled, other) | (other, Disabled) => Ok(other),
        (x, y) => Err(ScenarioError::CacheConflict(x, y)),
    }
}

/// Combines two scenarios: stressors and interrupt sets are unioned, the
/// larger core count and any parallel handling win, and only common
/// measurement modes remain. Caches disabled yields to the other side.
pub fn merge(a: &ScenarioConfig, b: &ScenarioConfig) -> Result<ScenarioConfig, ScenarioError> {
    let cache_mode = merge_cache(a.cache_mode, b.cache_mode)?;
    if a.stack != b.stack {
        return Err(ScenarioError::StackConflict(a.stack, b.stack));
    }
    let parts: BTreeSet<&str> = a.name.split('+').chain(b.name.split('+')).collect();
    let name = parts.into_iter().collect::<Vec<_>>().join("+");
    if a.measured_irq != b.measured_irq || a.priority_levels != b.priority_levels {
        return Err(ScenarioError::Invalid {
            name,
            reason: "constituents disagree on the measured interrupt or priority levels".into(),
        });
    }
    let modes: BTreeSet<Mode> = a.modes.intersection(&b.modes).copied().collect();
    if modes.is_empty() {
        return Err(ScenarioError::ModeConflict(name));
    }
    let mut priorities = a.priorities.clone();
    for (&id, &p) in &b.priorities {
        priorities.entry(id).and_modify(|q| *q = (*q).min(p)).or_insert(p);
    }
    let memory_stressor = match (&a.memory_stressor, &b.memory_stressor) {
        (Some(x), Some(y)) => Some(StressorConfig {
            cores: x.cores.union(y.cores),
            array_bytes: x.array_bytes.max(y.array_bytes),
        }),
        (x, y) => x.clone().or_else(|| y.clone()),
    };
    let merged = ScenarioConfig {
        name,
        modes,
        measured_irq: a.measured_irq,
        priorities,
        cache_mode,
        enabled_cores: a.enabled_cores.max(b.enabled_cores),
        parallel_handling: a.parallel_handling || b.parallel_handling,
        memory_stressor,
        stack: a.stack,
        priority_levels: a.priority_levels,
    };
    merged.validate()?;
    Ok(merged)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BenchmarkName {
    #[serde(rename = "B-Lmin")]
    LatencyMin,
    #[serde(rename = "B-Lmax")]
    LatencyMax,
    #[serde(rename = "B-Tmax")]
    ThroughputMax,
}

impl BenchmarkName {
    pub const ALL: [BenchmarkName; 3] = [
        BenchmarkName::LatencyMin,
        BenchmarkName::LatencyMax,
        BenchmarkName::ThroughputMax,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BenchmarkName::LatencyMin => "B-Lmin",
            BenchmarkName::LatencyMax => "B-Lmax",
            BenchmarkName::ThroughputMax => "B-Tmax",
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            BenchmarkName::ThroughputMax => Mode::Throughput,
            _ => Mode::Latency,
        }
    }
}

impl fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkName {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BenchmarkName::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| ScenarioError::UnknownId(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BenchmarkDef {
    pub name: BenchmarkName,
    pub constituents: Vec<ScenarioConfig>,
    pub mode: Mode,
    /// The merged configuration actually run.
    pub config: ScenarioConfig,
}

/// Builds a benchmark. `blmax_t6_cores` picks the T6 variant inside B-Lmax.
pub fn benchmark(name: BenchmarkName, blmax_t6_cores: u32) -> Result<BenchmarkDef, ScenarioError> {
    let constituents = match name {
        BenchmarkName::LatencyMin => vec![test_case(TestCase::T2, None)?],
        BenchmarkName::LatencyMax => vec![
            test_case(TestCase::T4, Some(36))?,
            test_case(TestCase::T6, Some(blmax_t6_cores))?,
        ],
        BenchmarkName::ThroughputMax => vec![test_case(TestCase::T6, Some(2))?, test_case(TestCase::T2, None)?],
    };
    let mut config = constituents[0].clone();
    for other in &constituents[1..] {
        config = merge(&config, other)?;
    }
    config.name = name.as_str().to_string();
    config.modes = BTreeSet::from([name.mode()]);
    Ok(BenchmarkDef {
        name,
        constituents,
        mode: name.mode(),
        config,
    })
}

/// A parsed scenario identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioId {
    Case(TestCase, Option<u32>),
    Benchmark(BenchmarkName),
    Combination(Vec<ScenarioId>),
}

impl FromStr for ScenarioId {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || ScenarioError::UnknownId(s.to_string());
        if s.contains('+') {
            let parts = s
                .split('+')
                .map(|p| match p.parse()? {
                    ScenarioId::Combination(_) => Err(unknown()),
                    id => Ok(id),
                })
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(ScenarioId::Combination(parts));
        }
        if let Ok(b) = s.parse::<BenchmarkName>() {
            return Ok(ScenarioId::Benchmark(b));
        }
        let rest = s.strip_prefix('T').ok_or_else(unknown)?;
        let (num, variant) = match rest.split_once('-') {
            Some((n, v)) => {
                if v.is_empty() || !v.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(unknown());
                }
                (n, Some(v.parse::<u32>().map_err(|_| unknown())?))
            }
            None => (rest, None),
        };
        let case = match num {
            "1" => TestCase::T1,
            "2" => TestCase::T2,
            "3" => TestCase::T3,
            "4" => TestCase::T4,
            "5" => TestCase::T5,
            "6" => TestCase::T6,
            "7" => TestCase::T7,
            _ => return Err(unknown()),
        };
        test_case(case, variant)?;
        Ok(ScenarioId::Case(case, variant))
    }
}

impl ScenarioId {
    pub fn resolve(&self, blmax_t6_cores: u32) -> Result<ScenarioConfig, ScenarioError> {
        match self {
            ScenarioId::Case(case, variant) => test_case(*case, *variant),
            ScenarioId::Benchmark(b) => Ok(benchmark(*b, blmax_t6_cores)?.config),
            ScenarioId::Combination(parts) => {
                let mut iter = parts.iter();
                let first = iter.next().ok_or_else(|| ScenarioError::UnknownId(String::new()))?;
                iter.try_fold(first.resolve(blmax_t6_cores)?, |acc, p| {
                    merge(&acc, &p.resolve(blmax_t6_cores)?)
                })
            }
        }
    }
}

/// Parses and resolves a scenario identifier with default options.
pub fn resolve(id: &str) -> Result<ScenarioConfig, ScenarioError> {
    id.parse::<ScenarioId>()?.resolve(DEFAULT_BLMAX_T6_CORES)
}
