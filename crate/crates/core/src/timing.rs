//! Per-step timing of the interrupt path.
//!
//! A delivered interrupt walks through recognition, selection, forwarding,
//! signaling, acknowledge, vectoring and software dispatch before the ISR
//! starts. Each step has a base duration plus bounded uniform jitter;
//! penalties are added for cache state, interconnect contention and a
//! running memory stressor.
//!
//! The model is read from a flat key/value file (TOML syntax, one integer
//! per key, all durations in ns). Keys that are absent keep their default.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gic::{CoreSet, MIN_PULSE_NS};
use crate::rng::{self, Stream};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TimingError {
    #[error("invalid timing model: {0}")]
    Invalid(String),
    #[error("cannot parse timing config: {0}")]
    Parse(String),
    #[error("memory stressor needs at least one core")]
    EmptyStressor,
    #[error("memory stressor array size must be positive")]
    EmptyArray,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CacheMode {
    Disabled,
    Enabled,
    /// Caches enabled, but the ISR invalidates them, so every path starts cold.
    InvalidatedInIsr,
}

impl fmt::Display for CacheMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CacheMode::Disabled => "disabled",
            CacheMode::Enabled => "enabled",
            CacheMode::InvalidatedInIsr => "invalidated-in-isr",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StackKind {
    BareMetal,
    Rtos,
}

impl StackKind {
    pub const ALL: [StackKind; 2] = [StackKind::BareMetal, StackKind::Rtos];

    pub fn as_str(&self) -> &'static str {
        match self {
            StackKind::BareMetal => "bare-metal",
            StackKind::Rtos => "rtos",
        }
    }
}

impl fmt::Display for StackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StackKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bare-metal" => Ok(StackKind::BareMetal),
            "rtos" => Ok(StackKind::Rtos),
            other => Err(format!("unknown stack profile `{other}` (expected bare-metal or rtos)")),
        }
    }
}

/// Software dispatch cost between the exception vector and ISR entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StackProfile {
    pub kind: StackKind,
    pub dispatch_base_ns: u64,
    pub dispatch_jitter_ns: u64,
    pub description: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingModel {
    /// Edge recognition; never shorter than the minimum pulse width.
    pub recognize_ns: u64,
    pub select_ns: u64,
    /// Extra selection cost per enabled interrupt beyond the first.
    pub select_per_enabled_ns: u64,
    pub forward_ns: u64,
    pub signal_ns: u64,
    pub ack_ns: u64,
    pub vector_ns: u64,
    /// Added on the core side of the path when caches are disabled.
    pub uncached_penalty_ns: u64,
    /// Added on the core side of the path when the ISR invalidated the caches.
    pub cache_refill_penalty_ns: u64,
    /// Upper bound of the uniform jitter added to every hardware step.
    pub jitter_ns: u64,
    /// Per-transaction contention range, scaled by the number of other contending cores.
    pub contention_min_ns: u64,
    pub contention_max_ns: u64,
    pub contention_transactions: u32,
    /// Per-access delay range while the memory stressor runs, scaled by its core count.
    pub memory_min_ns: u64,
    pub memory_max_ns: u64,
    pub memory_accesses: u32,
    pub isr_body_ns: u64,
    pub eoi_ns: u64,
    pub bare_metal_dispatch_base_ns: u64,
    pub bare_metal_dispatch_jitter_ns: u64,
    pub rtos_dispatch_base_ns: u64,
    pub rtos_dispatch_jitter_ns: u64,
}

impl Default for TimingModel {
    /// Calibrated so that the minimal-latency benchmark (caches enabled, one
    /// core, one interrupt) has a median of 232 ns on both stack profiles.
    fn default() -> Self {
        TimingModel {
            recognize_ns: 40,
            select_ns: 12,
            select_per_enabled_ns: 1,
            forward_ns: 8,
            signal_ns: 8,
            ack_ns: 20,
            vector_ns: 16,
            uncached_penalty_ns: 180,
            cache_refill_penalty_ns: 420,
            jitter_ns: 6,
            contention_min_ns: 16,
            contention_max_ns: 48,
            contention_transactions: 2,
            memory_min_ns: 6,
            memory_max_ns: 30,
            memory_accesses: 4,
            isr_body_ns: 16,
            eoi_ns: 20,
            bare_metal_dispatch_base_ns: 92,
            bare_metal_dispatch_jitter_ns: 40,
            rtos_dispatch_base_ns: 104,
            rtos_dispatch_jitter_ns: 12,
        }
    }
}

/// What a sampled path depends on besides the timing model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathContext {
    pub cache_mode: CacheMode,
    pub stack: StackKind,
    /// Cores racing for the same interrupt (1 = no contention).
    pub contending_cores: usize,
    /// Cores running the memory stressor (0 = stressor off).
    pub memory_stressor_cores: usize,
    /// Enabled interrupts the Distributor inspects on every selection.
    pub enabled_interrupts: usize,
}

impl PathContext {
    pub fn baseline(stack: StackKind) -> Self {
        PathContext {
            cache_mode: CacheMode::Disabled,
            stack,
            contending_cores: 1,
            memory_stressor_cores: 0,
            enabled_interrupts: 1,
        }
    }
}

/// The per-core portion of one sampled path, split at the acknowledge.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CorePath {
    pub select: u64,
    pub forward: u64,
    pub signal: u64,
    pub ack: u64,
    pub contention: u64,
    pub vector: u64,
    pub dispatch: u64,
    pub cache_penalty: u64,
    pub memory: u64,
}

impl CorePath {
    /// From the moment the interrupt is pending to the completed acknowledge.
    pub fn to_ack(&self) -> u64 {
        self.select + self.forward + self.signal + self.ack + self.contention
    }

    /// From the acknowledge to the first ISR instruction.
    pub fn to_entry(&self) -> u64 {
        self.vector + self.dispatch + self.cache_penalty + self.memory
    }

    pub fn total(&self) -> u64 {
        self.to_ack() + self.to_entry()
    }
}

/// The random streams one core's path draws from. Kept separate so that
/// enabling a penalty does not shift the draws of the others.
#[derive(Debug, Clone)]
pub struct PathRngs {
    pub jitter: Stream,
    pub contention: Stream,
    pub memory: Stream,
}

impl PathRngs {
    pub fn for_core(seed: u64, core: usize) -> Self {
        PathRngs {
            jitter: Stream::new(seed, rng::core_path_stream(core)),
            contention: Stream::new(seed, rng::contention_stream(core)),
            memory: Stream::new(seed, rng::memory_stream(core)),
        }
    }
}

impl TimingModel {
    pub fn validate(&self) -> Result<(), TimingError> {
        let invalid = |msg: String| Err(TimingError::Invalid(msg));
        if self.recognize_ns < MIN_PULSE_NS {
            return invalid(format!(
                "recognize_ns = {} is shorter than the {MIN_PULSE_NS} ns minimum pulse width",
                self.recognize_ns
            ));
        }
        if self.jitter_ns > 0 {
            let steps = [
                ("recognize_ns", self.recognize_ns),
                ("select_ns", self.select_ns),
                ("forward_ns", self.forward_ns),
                ("signal_ns", self.signal_ns),
                ("ack_ns", self.ack_ns),
                ("vector_ns", self.vector_ns),
            ];
            if let Some((key, base)) = steps.iter().find(|(_, base)| *base <= self.jitter_ns) {
                return invalid(format!("jitter_ns = {} is not below {key} = {base}", self.jitter_ns));
            }
        }
        if self.contention_min_ns > self.contention_max_ns {
            return invalid("contention_min_ns exceeds contention_max_ns".into());
        }
        if self.memory_min_ns > self.memory_max_ns {
            return invalid("memory_min_ns exceeds memory_max_ns".into());
        }
        for profile in StackKind::ALL.map(|k| self.profile(k)) {
            if profile.dispatch_base_ns == 0 {
                return invalid(format!("{} dispatch base must be positive", profile.kind));
            }
            if profile.dispatch_jitter_ns >= profile.dispatch_base_ns {
                return invalid(format!("{} dispatch jitter must be below its base", profile.kind));
            }
        }
        Ok(())
    }

    pub fn profile(&self, kind: StackKind) -> StackProfile {
        match kind {
            StackKind::BareMetal => StackProfile {
                kind,
                dispatch_base_ns: self.bare_metal_dispatch_base_ns,
                dispatch_jitter_ns: self.bare_metal_dispatch_jitter_ns,
                description: "unoptimized bare-metal stack: vendor dispatch routine, no scheduler, no tick",
            },
            StackKind::Rtos => StackProfile {
                kind,
                dispatch_base_ns: self.rtos_dispatch_base_ns,
                dispatch_jitter_ns: self.rtos_dispatch_jitter_ns,
                description: "RTOS stack: longer dispatch prologue with a narrower variation range",
            },
        }
    }

    /// Dispatch cost for a stack and cache configuration, without jitter.
    pub fn dispatch_base(&self, stack: StackKind, cache_mode: CacheMode) -> u64 {
        let base = self.profile(stack).dispatch_base_ns;
        match cache_mode {
            CacheMode::Disabled => base + self.uncached_penalty_ns,
            CacheMode::Enabled | CacheMode::InvalidatedInIsr => base,
        }
    }

    /// Sum of all base step durations for `ctx`, without jitter or penalties
    /// beyond the cache configuration.
    pub fn minimum_path(&self, ctx: &PathContext) -> u64 {
        self.recognize_ns
            + self.select_cost(ctx.enabled_interrupts)
            + self.forward_ns
            + self.signal_ns
            + self.ack_ns
            + self.vector_ns
            + self.dispatch_base(ctx.stack, ctx.cache_mode)
    }

    fn select_cost(&self, enabled: usize) -> u64 {
        self.select_ns + self.select_per_enabled_ns * enabled.saturating_sub(1) as u64
    }

    fn jittered(&self, base: u64, rng: &mut Stream) -> u64 {
        base + rng.uniform(0, self.jitter_ns)
    }

    pub fn sample_recognize(&self, rng: &mut Stream) -> u64 {
        self.jittered(self.recognize_ns, rng)
    }

    /// Samples one contended GIC transaction with `k` racing cores.
    pub fn sample_contention(&self, k: usize, rng: &mut Stream) -> u64 {
        if k <= 1 {
            return 0;
        }
        let others = (k - 1) as u64;
        rng.uniform(self.contention_min_ns * others, self.contention_max_ns * others)
    }

    pub fn sample_memory_access(&self, stressor_cores: usize, rng: &mut Stream) -> u64 {
        if stressor_cores == 0 {
            return 0;
        }
        rng.uniform(self.memory_min_ns, self.memory_max_ns) * stressor_cores as u64
    }

    pub fn sample_core_path(&self, ctx: &PathContext, rngs: &mut PathRngs) -> CorePath {
        let jitter = &mut rngs.jitter;
        let select = self.jittered(self.select_cost(ctx.enabled_interrupts), jitter);
        let forward = self.jittered(self.forward_ns, jitter);
        let signal = self.jittered(self.signal_ns, jitter);
        let ack = self.jittered(self.ack_ns, jitter);
        let vector = self.jittered(self.vector_ns, jitter);
        let profile = self.profile(ctx.stack);
        let dispatch = self.dispatch_base(ctx.stack, ctx.cache_mode) + jitter.uniform(0, profile.dispatch_jitter_ns);
        let contention = (0..self.contention_transactions)
            .map(|_| self.sample_contention(ctx.contending_cores, &mut rngs.contention))
            .sum();
        let memory = (0..self.memory_accesses)
            .map(|_| self.sample_memory_access(ctx.memory_stressor_cores, &mut rngs.memory))
            .sum();
        let cache_penalty = match ctx.cache_mode {
            CacheMode::InvalidatedInIsr => self.cache_refill_penalty_ns,
            _ => 0,
        };
        CorePath {
            select,
            forward,
            signal,
            ack,
            contention,
            vector,
            dispatch,
            cache_penalty,
            memory,
        }
    }

    pub fn from_config_str(text: &str) -> Result<Self, TimingError> {
        let model: TimingModel = toml::from_str(text).map_err(|e| TimingError::Parse(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_config_string(&self) -> String {
        toml::to_string(self).expect("flat integer table always serializes")
    }
}

/// Full edge-to-ISR delay of one interrupt: recognition plus the per-core path.
pub fn isr_path_delay(timing: &TimingModel, ctx: &PathContext, rngs: &mut PathRngs) -> u64 {
    timing.sample_recognize(&mut rngs.jitter) + timing.sample_core_path(ctx, rngs).total()
}

/// Memory stressor writing constants to random locations of a large array.
/// Only its timing influence is modeled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MemoryStressor {
    pub cores: CoreSet,
    pub array_bytes: u64,
}

impl MemoryStressor {
    pub fn start(cores: CoreSet, array_bytes: u64) -> Result<Self, TimingError> {
        if cores.is_empty() {
            return Err(TimingError::EmptyStressor);
        }
        if array_bytes == 0 {
            return Err(TimingError::EmptyArray);
        }
        Ok(MemoryStressor { cores, array_bytes })
    }

    pub fn core_count(&self) -> usize {
        self.cores.len()
    }
}
