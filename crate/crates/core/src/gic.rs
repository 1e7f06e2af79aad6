//! GICv2 Distributor and per-core CPU interface state machine.
//!
//! The model covers peripheral interrupts only: recognition of edge-triggered
//! and level-sensitive lines, highest-priority-pending selection, priority
//! masking, acknowledge and end-of-interrupt. All calls are instantaneous;
//! the simulation driver layers the step delays on top.
//!
//! Priorities follow the GIC convention: a numerically lower value is a
//! higher priority. With `L` configured levels the valid priorities are
//! `0..L`, and `L` itself is used as the idle running priority and as the
//! most permissive priority mask.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Value returned by [`Gic::acknowledge`] when nothing is signaled.
pub const SPURIOUS_ID: u16 = 1023;
/// Largest interrupt id that can be configured.
pub const MAX_INTERRUPT_ID: u16 = 1019;
/// Minimum high-phase width of an edge pulse that is guaranteed to be recognized.
pub const MIN_PULSE_NS: u64 = 40;
pub const DEFAULT_PRIORITY_LEVELS: u16 = 16;
pub const MAX_PRIORITY_LEVELS: u16 = 256;
pub const MAX_CORES: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GicError {
    #[error("interrupt id {0} is configured more than once")]
    DuplicateId(u16),
    #[error("interrupt id {0} is outside 0..={MAX_INTERRUPT_ID}")]
    IdOutOfRange(u16),
    #[error("priority {priority} of interrupt {id} is outside 0..{levels}")]
    PriorityOutOfRange { id: u16, priority: u8, levels: u16 },
    #[error("interrupt {0} is enabled but targets no core")]
    EmptyTargets(u16),
    #[error("interrupt {id} targets core {core} but only {cores} cores are configured")]
    TargetOutOfRange { id: u16, core: usize, cores: usize },
    #[error("core count {0} is outside 1..={MAX_CORES}")]
    CoreCount(usize),
    #[error("priority level count {0} is outside 2..={MAX_PRIORITY_LEVELS}")]
    PriorityLevels(u16),
    #[error("unknown interrupt id {0}")]
    UnknownId(u16),
    #[error("core {0} is not configured")]
    UnknownCore(usize),
    #[error("line of interrupt {id}: time {time} ns precedes the last event at {last} ns")]
    TimeRegression { id: u16, time: u64, last: u64 },
    #[error("end of interrupt for {id} on core {core}, which is not active there")]
    NotActive { id: u16, core: usize },
    #[error("priority mask {mask} is outside 0..={levels}")]
    MaskOutOfRange { mask: u16, levels: u16 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trigger {
    Edge,
    Level,
}

/// A set of core indices (at most [`MAX_CORES`]).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "Vec<usize>", try_from = "Vec<usize>")]
pub struct CoreSet(u8);

impl CoreSet {
    pub const fn empty() -> Self {
        CoreSet(0)
    }

    pub fn single(core: usize) -> Self {
        let mut set = Self::empty();
        set.insert(core);
        set
    }

    /// Cores `0..n`.
    pub fn first(n: usize) -> Self {
        (0..n).fold(Self::empty(), |mut set, core| {
            set.insert(core);
            set
        })
    }

    pub fn insert(&mut self, core: usize) {
        assert!(core < 8, "core index {core} does not fit a core set");
        self.0 |= 1 << core;
    }

    pub fn contains(&self, core: usize) -> bool {
        core < 8 && self.0 & (1 << core) != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Self) -> Self {
        CoreSet(self.0 | other.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..8).filter(move |&core| self.contains(core))
    }

    fn max(&self) -> Option<usize> {
        self.iter().last()
    }
}

impl fmt::Debug for CoreSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl From<CoreSet> for Vec<usize> {
    fn from(set: CoreSet) -> Self {
        set.iter().collect()
    }
}

impl TryFrom<Vec<usize>> for CoreSet {
    type Error = String;

    fn try_from(cores: Vec<usize>) -> Result<Self, Self::Error> {
        let mut set = CoreSet::empty();
        for core in cores {
            if core >= 8 {
                return Err(format!("core index {core} out of range"));
            }
            set.insert(core);
        }
        Ok(set)
    }
}

impl FromIterator<usize> for CoreSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut set = CoreSet::empty();
        for core in iter {
            set.insert(core);
        }
        set
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterruptSpec {
    pub id: u16,
    pub trigger: Trigger,
    pub priority: u8,
    pub targets: CoreSet,
    pub enabled: bool,
}

impl InterruptSpec {
    /// An enabled interrupt routed to core 0.
    pub fn new(id: u16, trigger: Trigger, priority: u8) -> Self {
        InterruptSpec {
            id,
            trigger,
            priority,
            targets: CoreSet::single(0),
            enabled: true,
        }
    }

    pub fn with_targets(mut self, targets: CoreSet) -> Self {
        self.targets = targets;
        self
    }

    pub fn disabled(mut self) -> Self {
        self.enabled = false;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lifecycle {
    Inactive,
    Pending,
    Active,
    ActiveAndPending,
}

/// Snapshot of one interrupt's GIC-side state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterruptState {
    pub lifecycle: Lifecycle,
    pub line_level: bool,
    /// Edge re-triggers recorded during the current activation.
    pub pend_count: u32,
    pub active_on: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CpuInterfaceState {
    pub priority_mask: u16,
    pub running_priority: u16,
    pub signaled: Option<u16>,
}

/// Outcome of a line transition or a recognition poll.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recognition {
    /// The interrupt became (or stays, for a level line) pending because of this call.
    Recognized,
    /// No new pending state: sub-threshold pulse, falling edge, or no transition.
    Ignored,
    /// A rising edge whose width is not known yet. Resolved by the falling
    /// edge or by [`Gic::poll_recognition`] once the minimum width elapsed.
    Deferred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalDecision {
    Signal(u16),
    Quiet,
}

/// The CPU interface masking rule: signal iff the candidate beats both the
/// priority mask and the running priority.
pub fn filter_allows(priority: u16, mask: u16, running: u16) -> bool {
    priority < mask && priority < running
}

#[derive(Debug, Clone)]
struct Irq {
    spec: InterruptSpec,
    latched: bool,
    active_on: Option<usize>,
    line_high: bool,
    last_time: u64,
    rise_at: Option<u64>,
    pend_count: u32,
}

impl Irq {
    fn pending(&self) -> bool {
        match self.spec.trigger {
            Trigger::Edge => self.latched,
            Trigger::Level => self.line_high,
        }
    }

    fn lifecycle(&self) -> Lifecycle {
        match (self.pending(), self.active_on.is_some()) {
            (false, false) => Lifecycle::Inactive,
            (true, false) => Lifecycle::Pending,
            (false, true) => Lifecycle::Active,
            (true, true) => Lifecycle::ActiveAndPending,
        }
    }

    fn latch_edge(&mut self) {
        if self.active_on.is_some() {
            self.pend_count = self.pend_count.saturating_add(1);
        }
        self.latched = true;
    }

    fn advance(&mut self, time: u64) -> Result<(), GicError> {
        if time < self.last_time {
            return Err(GicError::TimeRegression {
                id: self.spec.id,
                time,
                last: self.last_time,
            });
        }
        self.last_time = time;
        Ok(())
    }
}

/// One Distributor plus its CPU interfaces.
#[derive(Debug, Clone)]
pub struct Gic {
    levels: u16,
    irqs: Vec<Irq>,
    cpus: Vec<CpuInterfaceState>,
    forwarded: Vec<Option<u16>>,
}

impl Gic {
    pub fn configure(specs: &[InterruptSpec], cores: usize, levels: u16) -> Result<Self, GicError> {
        if !(1..=MAX_CORES).contains(&cores) {
            return Err(GicError::CoreCount(cores));
        }
        if !(2..=MAX_PRIORITY_LEVELS).contains(&levels) {
            return Err(GicError::PriorityLevels(levels));
        }
        let mut irqs: Vec<Irq> = Vec::with_capacity(specs.len());
        for spec in specs {
            if spec.id > MAX_INTERRUPT_ID {
                return Err(GicError::IdOutOfRange(spec.id));
            }
            if u16::from(spec.priority) >= levels {
                return Err(GicError::PriorityOutOfRange {
                    id: spec.id,
                    priority: spec.priority,
                    levels,
                });
            }
            if spec.enabled && spec.targets.is_empty() {
                return Err(GicError::EmptyTargets(spec.id));
            }
            if let Some(core) = spec.targets.max().filter(|&c| c >= cores) {
                return Err(GicError::TargetOutOfRange {
                    id: spec.id,
                    core,
                    cores,
                });
            }
            irqs.push(Irq {
                spec: spec.clone(),
                latched: false,
                active_on: None,
                line_high: false,
                last_time: 0,
                rise_at: None,
                pend_count: 0,
            });
        }
        irqs.sort_by_key(|irq| irq.spec.id);
        if let Some(pair) = irqs.windows(2).find(|w| w[0].spec.id == w[1].spec.id) {
            return Err(GicError::DuplicateId(pair[0].spec.id));
        }
        let idle = CpuInterfaceState {
            priority_mask: levels,
            running_priority: levels,
            signaled: None,
        };
        Ok(Gic {
            levels,
            irqs,
            cpus: vec![idle; cores],
            forwarded: vec![None; cores],
        })
    }

    pub fn cores(&self) -> usize {
        self.cpus.len()
    }

    pub fn priority_levels(&self) -> u16 {
        self.levels
    }

    /// Running priority of a core with nothing active.
    pub fn idle_priority(&self) -> u16 {
        self.levels
    }

    /// Number of enabled interrupts the Distributor has to inspect per selection.
    pub fn enabled_count(&self) -> usize {
        self.irqs.iter().filter(|irq| irq.spec.enabled).count()
    }

    pub fn spec(&self, id: u16) -> Option<&InterruptSpec> {
        self.find(id).ok().map(|i| &self.irqs[i].spec)
    }

    pub fn state(&self, id: u16) -> Option<InterruptState> {
        let irq = &self.irqs[self.find(id).ok()?];
        Some(InterruptState {
            lifecycle: irq.lifecycle(),
            line_level: irq.line_high,
            pend_count: irq.pend_count,
            active_on: irq.active_on,
        })
    }

    pub fn cpu(&self, core: usize) -> &CpuInterfaceState {
        &self.cpus[core]
    }

    /// The interrupt currently active on `core`, if any.
    pub fn active_on(&self, core: usize) -> Option<u16> {
        self.irqs
            .iter()
            .find(|irq| irq.active_on == Some(core))
            .map(|irq| irq.spec.id)
    }

    pub fn set_priority_mask(&mut self, core: usize, mask: u16) -> Result<(), GicError> {
        if mask > self.levels {
            return Err(GicError::MaskOutOfRange {
                mask,
                levels: self.levels,
            });
        }
        self.cpus
            .get_mut(core)
            .ok_or(GicError::UnknownCore(core))?
            .priority_mask = mask;
        Ok(())
    }

    fn find(&self, id: u16) -> Result<usize, GicError> {
        self.irqs
            .binary_search_by_key(&id, |irq| irq.spec.id)
            .map_err(|_| GicError::UnknownId(id))
    }

    /// Drives the input line of interrupt `id` to `level` at `time` (ns).
    pub fn assert_line(&mut self, id: u16, level: bool, time: u64) -> Result<Recognition, GicError> {
        let idx = self.find(id)?;
        let irq = &mut self.irqs[idx];
        irq.advance(time)?;
        if irq.line_high == level {
            return Ok(Recognition::Ignored);
        }
        irq.line_high = level;
        let outcome = match (irq.spec.trigger, level) {
            (Trigger::Level, true) => Recognition::Recognized,
            (Trigger::Level, false) => Recognition::Ignored,
            (Trigger::Edge, true) => {
                irq.rise_at = Some(time);
                Recognition::Deferred
            }
            (Trigger::Edge, false) => match irq.rise_at.take() {
                Some(rise) if time - rise >= MIN_PULSE_NS => {
                    irq.latch_edge();
                    Recognition::Recognized
                }
                _ => Recognition::Ignored,
            },
        };
        if !irq.pending() {
            for cpu in &mut self.cpus {
                if cpu.signaled == Some(id) {
                    cpu.signaled = None;
                }
            }
        }
        Ok(outcome)
    }

    /// Resolves a deferred rising edge once the minimum pulse width has elapsed
    /// with the line still high.
    pub fn poll_recognition(&mut self, id: u16, time: u64) -> Result<Recognition, GicError> {
        let idx = self.find(id)?;
        let irq = &mut self.irqs[idx];
        irq.advance(time)?;
        match irq.rise_at {
            Some(rise) if irq.line_high && time - rise >= MIN_PULSE_NS => {
                irq.rise_at = None;
                irq.latch_edge();
                Ok(Recognition::Recognized)
            }
            Some(_) => Ok(Recognition::Deferred),
            None => Ok(Recognition::Ignored),
        }
    }

    /// Highest-priority pending interrupt for `core`; ties go to the lowest id.
    /// The result is remembered as the candidate forwarded to the CPU interface.
    pub fn distributor_select(&mut self, core: usize) -> Option<u16> {
        assert!(core < self.cpus.len(), "core {core} is not configured");
        let mut best: Option<&Irq> = None;
        for irq in &self.irqs {
            let candidate =
                irq.spec.enabled && irq.spec.targets.contains(core) && irq.pending() && irq.active_on.is_none();
            if candidate && best.is_none_or(|b| irq.spec.priority < b.spec.priority) {
                best = Some(irq);
            }
        }
        let selected = best.map(|irq| irq.spec.id);
        self.forwarded[core] = selected;
        selected
    }

    /// Applies priority masking to the candidate last forwarded to `core`.
    pub fn cpu_interface_filter(&mut self, core: usize) -> SignalDecision {
        assert!(core < self.cpus.len(), "core {core} is not configured");
        let decision = match self.forwarded[core] {
            Some(id) => {
                let priority = u16::from(self.irqs[self.find(id).expect("forwarded id exists")].spec.priority);
                let cpu = &self.cpus[core];
                if filter_allows(priority, cpu.priority_mask, cpu.running_priority) {
                    SignalDecision::Signal(id)
                } else {
                    SignalDecision::Quiet
                }
            }
            None => SignalDecision::Quiet,
        };
        self.cpus[core].signaled = match decision {
            SignalDecision::Signal(id) => Some(id),
            SignalDecision::Quiet => None,
        };
        decision
    }

    /// Interrupt acknowledge: returns the signaled id and activates it, or
    /// [`SPURIOUS_ID`] when nothing is signaled, the signaled interrupt was
    /// taken by another core in the meantime, or `core` already has an
    /// active interrupt (no nesting).
    pub fn acknowledge(&mut self, core: usize, _time: u64) -> u16 {
        assert!(core < self.cpus.len(), "core {core} is not configured");
        if self.active_on(core).is_some() {
            return SPURIOUS_ID;
        }
        let Some(id) = self.cpus[core].signaled.take() else {
            return SPURIOUS_ID;
        };
        let idx = self.find(id).expect("signaled id exists");
        let irq = &mut self.irqs[idx];
        if !irq.spec.enabled || !irq.pending() || irq.active_on.is_some() {
            return SPURIOUS_ID;
        }
        irq.active_on = Some(core);
        irq.pend_count = 0;
        if irq.spec.trigger == Trigger::Edge {
            irq.latched = false;
        }
        let priority = u16::from(irq.spec.priority);
        self.cpus[core].running_priority = priority;
        for (other, cpu) in self.cpus.iter_mut().enumerate() {
            if other != core && cpu.signaled == Some(id) {
                cpu.signaled = None;
            }
        }
        id
    }

    pub fn end_of_interrupt(&mut self, core: usize, id: u16, _time: u64) -> Result<(), GicError> {
        if core >= self.cpus.len() {
            return Err(GicError::UnknownCore(core));
        }
        let idx = self.find(id)?;
        let irq = &mut self.irqs[idx];
        if irq.active_on != Some(core) {
            return Err(GicError::NotActive { id, core });
        }
        irq.active_on = None;
        self.cpus[core].running_priority = self.levels;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(trigger: Trigger) -> Gic {
        Gic::configure(&[InterruptSpec::new(61, trigger, 0)], 1, 16).unwrap()
    }

    fn deliver(gic: &mut Gic, core: usize) -> u16 {
        gic.distributor_select(core);
        gic.cpu_interface_filter(core);
        gic.acknowledge(core, 0)
    }

    #[test]
    fn configure_single_interrupt_starts_inactive() {
        let gic = single(Trigger::Edge);
        assert_eq!(gic.state(61).unwrap().lifecycle, Lifecycle::Inactive);
        let cpu = gic.cpu(0);
        assert_eq!(cpu.priority_mask, 16);
        assert_eq!(cpu.running_priority, 16);
        assert_eq!(cpu.signaled, None);
    }

    #[test]
    fn configure_empty_selects_nothing() {
        let mut gic = Gic::configure(&[], 2, 16).unwrap();
        assert_eq!(gic.distributor_select(0), None);
        assert_eq!(gic.distributor_select(1), None);
        assert_eq!(gic.acknowledge(0, 0), SPURIOUS_ID);
    }

    #[test]
    fn configure_rejects_invalid_specs() {
        let a = InterruptSpec::new(40, Trigger::Edge, 1);
        assert_eq!(
            Gic::configure(&[a.clone(), a.clone()], 1, 16).unwrap_err(),
            GicError::DuplicateId(40)
        );
        assert!(matches!(
            Gic::configure(&[InterruptSpec::new(40, Trigger::Edge, 16)], 1, 16),
            Err(GicError::PriorityOutOfRange { .. })
        ));
        assert_eq!(
            Gic::configure(&[a.clone().with_targets(CoreSet::empty())], 1, 16).unwrap_err(),
            GicError::EmptyTargets(40)
        );
        assert!(Gic::configure(&[a.clone().with_targets(CoreSet::empty()).disabled()], 1, 16).is_ok());
        assert!(matches!(
            Gic::configure(&[a.clone().with_targets(CoreSet::single(2))], 2, 16),
            Err(GicError::TargetOutOfRange { core: 2, .. })
        ));
        assert_eq!(Gic::configure(&[], 5, 16).unwrap_err(), GicError::CoreCount(5));
        assert_eq!(Gic::configure(&[], 0, 16).unwrap_err(), GicError::CoreCount(0));
        assert_eq!(Gic::configure(&[], 1, 300).unwrap_err(), GicError::PriorityLevels(300));
        assert_eq!(
            Gic::configure(&[InterruptSpec::new(1020, Trigger::Edge, 0)], 1, 16).unwrap_err(),
            GicError::IdOutOfRange(1020)
        );
    }

    #[test]
    fn short_edge_pulse_is_ignored() {
        let mut gic = single(Trigger::Edge);
        assert_eq!(gic.assert_line(61, true, 100).unwrap(), Recognition::Deferred);
        assert_eq!(gic.assert_line(61, false, 136).unwrap(), Recognition::Ignored);
        assert_eq!(gic.state(61).unwrap().lifecycle, Lifecycle::Inactive);
        assert_eq!(gic.poll_recognition(61, 200).unwrap(), Recognition::Ignored);
    }

    #[test]
    fn forty_ns_edge_pulse_is_recognized() {
        let mut gic = single(Trigger::Edge);
        gic.assert_line(61, true, 100).unwrap();
        assert_eq!(gic.assert_line(61, false, 140).unwrap(), Recognition::Recognized);
        assert_eq!(gic.state(61).unwrap().lifecycle, Lifecycle::Pending);
    }

    #[test]
    fn poll_recognizes_long_pulse_once() {
        let mut gic = single(Trigger::Edge);
        gic.assert_line(61, true, 0).unwrap();
        assert_eq!(gic.poll_recognition(61, 39).unwrap(), Recognition::Deferred);
        assert_eq!(gic.poll_recognition(61, 40).unwrap(), Recognition::Recognized);
        assert_eq!(gic.assert_line(61, false, 1_000).unwrap(), Recognition::Ignored);
        assert_eq!(gic.state(61).unwrap().lifecycle, Lifecycle::Pending);
        assert_eq!(deliver(&mut gic, 0), 61);
        gic.end_of_interrupt(0, 61, 2_000).unwrap();
        assert_eq!(gic.state(61).unwrap().lifecycle, Lifecycle::Inactive);
    }

    #[test]
    fn level_line_held_high_is_pending_again_after_eoi() {
        let mut gic = single(Trigger::Level);
        assert_eq!(gic.assert_line(61, true, 0).unwrap(), Recognition::Recognized);
        assert_eq!(deliver(&mut gic, 0), 61);
        assert_eq!(gic.state(61).unwrap().lifecycle, Lifecycle::ActiveAndPending);
        gic.end_of_interrupt(0, 61, 10).unwrap();
        assert_eq!(gic.state(61).unwrap().lifecycle, Lifecycle::Pending);
        assert_eq!(deliver(&mut gic, 0), 61);
    }

    #[test]
    fn level_line_dropping_while_active_clears_pending() {
        let mut gic = single(Trigger::Level);
        gic.assert_line(61, true, 0).unwrap();
        deliver(&mut gic, 0);
        gic.assert_line(61, false, 5).unwrap();
        assert_eq!(gic.state(61).unwrap().lifecycle, Lifecycle::Active);
        gic.end_of_interrupt(0, 61, 10).unwrap();
        assert_eq!(gic.state(61).unwrap().lifecycle, Lifecycle::Inactive);
    }

    #[test]
    fn assert_line_errors() {
        let mut gic = single(Trigger::Edge);
        assert_eq!(gic.assert_line(7, true, 0).unwrap_err(), GicError::UnknownId(7));
        gic.assert_line(61, true, 50).unwrap();
        assert!(matches!(
            gic.assert_line(61, false, 49),
            Err(GicError::TimeRegression { time: 49, last: 50, .. })
        ));
    }

    #[test]
    fn select_prefers_lowest_priority_value_then_lowest_id() {
        let specs = [
            InterruptSpec::new(40, Trigger::Level, 8),
            InterruptSpec::new(41, Trigger::Level, 2),
        ];
        let mut gic = Gic::configure(&specs, 1, 16).unwrap();
        assert_eq!(gic.distributor_select(0), None);
        gic.assert_line(40, true, 0).unwrap();
        gic.assert_line(41, true, 0).unwrap();
        assert_eq!(gic.distributor_select(0), Some(41));

        let specs = [
            InterruptSpec::new(41, Trigger::Level, 3),
            InterruptSpec::new(40, Trigger::Level, 3),
        ];
        let mut gic = Gic::configure(&specs, 1, 16).unwrap();
        gic.assert_line(41, true, 0).unwrap();
        gic.assert_line(40, true, 0).unwrap();
        assert_eq!(gic.distributor_select(0), Some(40));
    }

    #[test]
    fn select_respects_targets_and_enable() {
        let specs = [
            InterruptSpec::new(40, Trigger::Level, 0).with_targets(CoreSet::single(1)),
            InterruptSpec::new(41, Trigger::Level, 1).disabled(),
            InterruptSpec::new(42, Trigger::Level, 5),
        ];
        let mut gic = Gic::configure(&specs, 2, 16).unwrap();
        for id in [40, 41, 42] {
            gic.assert_line(id, true, 0).unwrap();
        }
        assert_eq!(gic.distributor_select(0), Some(42));
        assert_eq!(gic.distributor_select(1), Some(40));
    }

    #[test]
    fn filter_masks_and_blocks_preemption() {
        let specs = [
            InterruptSpec::new(40, Trigger::Level, 5),
            InterruptSpec::new(41, Trigger::Level, 2),
            InterruptSpec::new(42, Trigger::Level, 3),
        ];
        let mut gic = Gic::configure(&specs, 1, 16).unwrap();
        gic.set_priority_mask(0, 4).unwrap();
        gic.assert_line(40, true, 0).unwrap();
        gic.distributor_select(0);
        assert_eq!(gic.cpu_interface_filter(0), SignalDecision::Quiet);
        assert_eq!(gic.cpu(0).signaled, None);

        gic.set_priority_mask(0, 16).unwrap();
        gic.assert_line(41, true, 0).unwrap();
        assert_eq!(deliver(&mut gic, 0), 41);
        assert_eq!(gic.cpu(0).running_priority, 2);

        gic.assert_line(42, true, 0).unwrap();
        assert_eq!(gic.distributor_select(0), Some(42));
        assert_eq!(gic.cpu_interface_filter(0), SignalDecision::Quiet);
        assert_eq!(
            gic.set_priority_mask(0, 17).unwrap_err(),
            GicError::MaskOutOfRange { mask: 17, levels: 16 }
        );
    }

    #[test]
    fn acknowledge_without_signal_is_spurious() {
        let mut gic = single(Trigger::Edge);
        assert_eq!(gic.acknowledge(0, 0), SPURIOUS_ID);
        gic.assert_line(61, true, 0).unwrap();
        gic.assert_line(61, false, 40).unwrap();
        // pending but never forwarded to the CPU interface
        assert_eq!(gic.acknowledge(0, 50), SPURIOUS_ID);
        assert_eq!(deliver(&mut gic, 0), 61);
        assert_eq!(gic.state(61).unwrap().lifecycle, Lifecycle::Active);
    }

    #[test]
    fn no_nesting_while_active() {
        let specs = [
            InterruptSpec::new(40, Trigger::Level, 5),
            InterruptSpec::new(41, Trigger::Level, 1),
        ];
        let mut gic = Gic::configure(&specs, 1, 16).unwrap();
        gic.assert_line(40, true, 0).unwrap();
        assert_eq!(deliver(&mut gic, 0), 40);
        gic.assert_line(41, true, 0).unwrap();
        gic.distributor_select(0);
        // the CPU interface would signal the higher priority, but the core does not nest
        assert_eq!(gic.cpu_interface_filter(0), SignalDecision::Signal(41));
        assert_eq!(gic.acknowledge(0, 1), SPURIOUS_ID);
        assert_eq!(gic.state(41).unwrap().lifecycle, Lifecycle::Pending);
        gic.end_of_interrupt(0, 40, 2).unwrap();
        assert_eq!(deliver(&mut gic, 0), 41);
    }

    #[test]
    fn eoi_errors_for_non_active() {
        let mut gic = single(Trigger::Edge);
        assert_eq!(
            gic.end_of_interrupt(0, 61, 0).unwrap_err(),
            GicError::NotActive { id: 61, core: 0 }
        );
        assert_eq!(gic.end_of_interrupt(0, 99, 0).unwrap_err(), GicError::UnknownId(99));
        assert_eq!(gic.end_of_interrupt(3, 61, 0).unwrap_err(), GicError::UnknownCore(3));
    }

    #[test]
    fn one_to_n_delivery_goes_to_first_acknowledger() {
        let spec = InterruptSpec::new(121, Trigger::Level, 0).with_targets(CoreSet::first(2));
        let mut gic = Gic::configure(&[spec], 2, 16).unwrap();
        gic.assert_line(121, true, 0).unwrap();
        for core in 0..2 {
            gic.distributor_select(core);
            assert_eq!(gic.cpu_interface_filter(core), SignalDecision::Signal(121));
        }
        assert_eq!(gic.acknowledge(1, 10), 121);
        assert_eq!(gic.cpu(0).signaled, None);
        assert_eq!(gic.acknowledge(0, 12), SPURIOUS_ID);
        assert_eq!(gic.state(121).unwrap().active_on, Some(1));
    }

    #[test]
    fn core_set_serde_as_list() {
        let set = CoreSet::first(3);
        assert_eq!(serde_json::to_string(&set).unwrap(), "[0,1,2]");
        let back: CoreSet = serde_json::from_str("[2,0]").unwrap();
        assert_eq!(back, [0, 2].into_iter().collect());
        assert!(serde_json::from_str::<CoreSet>("[9]").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Edges collapse: any number of qualifying edges before the
            // acknowledge yields one delivery, edges during the activation
            // yield at most one more.
            #[test]
            fn edge_redelivery_is_bounded(before in 1usize..6, during in 0usize..6) {
                let mut gic = single(Trigger::Edge);
                let mut t = 0;
                let pulse = |gic: &mut Gic, t: &mut u64| {
                    gic.assert_line(61, true, *t).unwrap();
                    gic.assert_line(61, false, *t + 40).unwrap();
                    *t += 100;
                };
                for _ in 0..before {
                    pulse(&mut gic, &mut t);
                }
                let mut deliveries = 0;
                if deliver(&mut gic, 0) == 61 {
                    deliveries += 1;
                }
                for _ in 0..during {
                    pulse(&mut gic, &mut t);
                }
                prop_assert_eq!(gic.state(61).unwrap().pend_count as usize, during);
                gic.end_of_interrupt(0, 61, t).unwrap();
                while deliver(&mut gic, 0) == 61 {
                    deliveries += 1;
                    gic.end_of_interrupt(0, 61, t).unwrap();
                }
                prop_assert_eq!(deliveries, 1 + usize::from(during > 0));
            }

            #[test]
            fn at_most_one_active_per_core(ops in proptest::collection::vec((0u16..4, any::<bool>(), 0usize..2), 1..60)) {
                let specs: Vec<_> = (0..4u16)
                    .map(|i| InterruptSpec::new(32 + i, Trigger::Level, (i % 3) as u8).with_targets(CoreSet::first(2)))
                    .collect();
                let mut gic = Gic::configure(&specs, 2, 16).unwrap();
                for (step, (irq, level, core)) in ops.into_iter().enumerate() {
                    let t = step as u64;
                    gic.assert_line(32 + irq, level, t).unwrap();
                    gic.distributor_select(core);
                    let decision = gic.cpu_interface_filter(core);
                    let acked = gic.acknowledge(core, t);
                    if acked != SPURIOUS_ID {
                        prop_assert_eq!(decision, SignalDecision::Signal(acked));
                    }
                    for c in 0..2 {
                        let active = (32..36).filter(|&id| gic.state(id).unwrap().active_on == Some(c)).count();
                        prop_assert!(active <= 1);
                        if let Some(sig) = gic.cpu(c).signaled {
                            let lc = gic.state(sig).unwrap().lifecycle;
                            prop_assert!(matches!(lc, Lifecycle::Pending | Lifecycle::ActiveAndPending));
                        }
                    }
                    if step % 3 == 2 {
                        if let Some(id) = gic.active_on(core) {
                            gic.end_of_interrupt(core, id, t).unwrap();
                        }
                    }
                }
            }
        }
    }
}
