//! Streaming triggered acquisition.
//!
//! The engine consumes one frame (all channels' averaged IQ points) per
//! readout cycle. In standby it compares every channel against its
//! rolling-median baseline and fires when any I or Q excursion exceeds the
//! σ-scaled threshold; it then assembles the pre-buffer from its ring,
//! records the detection window, tags every channel that excursed inside the
//! window and classifies the capture as dual / top-only / bottom-only.
//! A capture in progress blocks re-arming (dead time); the engine returns to
//! standby when the window completes.
//!
//! The engine is a single logical consumer and preserves per-channel sample
//! order; feeding it a recorded timeline single-threaded replays a run
//! deterministically. Captures are handed to the caller as they complete and
//! never block frame ingestion.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec::Vec;
use core::fmt;

use crate::mkid::IQPoint;
use crate::stats;

/// Default trigger threshold in units of the per-quadrature noise σ.
pub const DEFAULT_THRESHOLD_SIGMA: f64 = 8.0;
/// Background samples per channel used to estimate σ.
pub const DEFAULT_BACKGROUND_SAMPLES: usize = 10_000;
/// Pre-trigger buffer length, µs.
pub const DEFAULT_PRE_BUFFER_US: f64 = 15.0;
/// Detection window length, µs.
pub const DEFAULT_WINDOW_US: f64 = 700.0;
/// Standby cycles in the rolling baseline median.
pub const DEFAULT_BASELINE_WINDOW: usize = 64;
/// Baseline medians become usable once this many standby samples are seen.
const MIN_BASELINE_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum DaqError {
    /// Fewer background samples than the configured count.
    InsufficientBackground { channel: usize, have: usize, need: usize },
    /// Trigger settings violate an invariant.
    InvalidSettings,
    /// Classification asked for an empty triggering-channel set.
    EmptyChannelSet,
}

impl fmt::Display for DaqError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DaqError::InsufficientBackground { channel, have, need } => {
                write!(f, "channel {channel}: {have} background samples, need {need}")
            }
            DaqError::InvalidSettings => write!(f, "invalid trigger settings"),
            DaqError::EmptyChannelSet => write!(f, "no triggering channels to classify"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for DaqError {}

/// Static trigger configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerSettings {
    /// Threshold multiplier on the per-quadrature σ.
    pub threshold_sigma: f64,
    /// Background samples per channel for the σ estimate.
    pub background_samples: usize,
    /// Pre-trigger buffer, µs.
    pub pre_buffer_us: f64,
    /// Detection window, µs.
    pub window_us: f64,
    /// Rolling baseline median window, standby cycles.
    pub baseline_window: usize,
}

impl Default for TriggerSettings {
    fn default() -> Self {
        Self {
            threshold_sigma: DEFAULT_THRESHOLD_SIGMA,
            background_samples: DEFAULT_BACKGROUND_SAMPLES,
            pre_buffer_us: DEFAULT_PRE_BUFFER_US,
            window_us: DEFAULT_WINDOW_US,
            baseline_window: DEFAULT_BASELINE_WINDOW,
        }
    }
}

impl TriggerSettings {
    pub fn validate(&self) -> Result<(), DaqError> {
        if self.threshold_sigma > 0.0
            && self.pre_buffer_us > 0.0
            && self.pre_buffer_us < self.window_us
            && self.baseline_window >= MIN_BASELINE_SAMPLES
            && self.background_samples > 1
        {
            Ok(())
        } else {
            Err(DaqError::InvalidSettings)
        }
    }
}

/// Per-channel, per-quadrature sample standard deviations of event-free
/// background data.
pub fn estimate_sigma(background: &[Vec<IQPoint>], count: usize) -> Result<Vec<(f64, f64)>, DaqError> {
    let mut out = Vec::with_capacity(background.len());
    for (channel, samples) in background.iter().enumerate() {
        if samples.len() < count {
            return Err(DaqError::InsufficientBackground { channel, have: samples.len(), need: count });
        }
        let is: Vec<f64> = samples.iter().map(|p| p.i).collect();
        let qs: Vec<f64> = samples.iter().map(|p| p.q).collect();
        out.push((stats::std_dev(&is), stats::std_dev(&qs)));
    }
    Ok(out)
}

/// Event class of a capture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventClass {
    Dual,
    TopOnly,
    BottomOnly,
}

impl EventClass {
    pub fn is_single(self) -> bool {
        self != EventClass::Dual
    }
}

impl fmt::Display for EventClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventClass::Dual => write!(f, "dual"),
            EventClass::TopOnly => write!(f, "top"),
            EventClass::BottomOnly => write!(f, "bottom"),
        }
    }
}

/// Classifies a triggering-channel set: channels `< n_top` belong to the top
/// array, the rest to the bottom array.
pub fn classify(trigger_channels: &BTreeSet<u16>, n_top: u16) -> Result<EventClass, DaqError> {
    if trigger_channels.is_empty() {
        return Err(DaqError::EmptyChannelSet);
    }
    let top = trigger_channels.iter().any(|&c| c < n_top);
    let bottom = trigger_channels.iter().any(|&c| c >= n_top);
    Ok(match (top, bottom) {
        (true, true) => EventClass::Dual,
        (true, false) => EventClass::TopOnly,
        (false, true) => EventClass::BottomOnly,
        (false, false) => unreachable!("nonempty set spans at least one array"),
    })
}

#[inline]
fn excursion_over(sigma: (f64, f64), threshold: f64, point: IQPoint, baseline: (f64, f64)) -> bool {
    let di = point.i - baseline.0;
    let dq = point.q - baseline.1;
    di.abs() > threshold * sigma.0 || dq.abs() > threshold * sigma.1
}

/// Rolling median over the last `window` pushed values.
#[derive(Debug, Clone)]
struct RollingMedian {
    window: usize,
    ring: VecDeque<f64>,
    sorted: Vec<f64>,
}

impl RollingMedian {
    fn new(window: usize) -> Self {
        Self { window, ring: VecDeque::with_capacity(window), sorted: Vec::with_capacity(window) }
    }

    fn push(&mut self, x: f64) {
        if self.ring.len() == self.window {
            let old = self.ring.pop_front().unwrap();
            let idx = self.sorted.partition_point(|v| v.total_cmp(&old).is_lt());
            self.sorted.remove(idx);
        }
        self.ring.push_back(x);
        let idx = self.sorted.partition_point(|v| v.total_cmp(&x).is_lt());
        self.sorted.insert(idx, x);
    }

    fn len(&self) -> usize {
        self.ring.len()
    }

    fn median(&self) -> f64 {
        let n = self.sorted.len();
        if n % 2 == 1 {
            self.sorted[n / 2]
        } else {
            0.5 * (self.sorted[n / 2 - 1] + self.sorted[n / 2])
        }
    }
}

/// One readout cycle's frame: the averaged IQ point of every channel.
#[derive(Debug, Clone)]
struct Frame {
    cycle: u64,
    samples: Vec<IQPoint>,
}

/// A completed acquisition before shots and ground truth are attached.
#[derive(Debug, Clone)]
pub struct RawCapture {
    pub id: u64,
    pub trigger_cycle: u64,
    /// Channels with any above-threshold excursion inside the window.
    pub trigger_channels: BTreeSet<u16>,
    pub class: EventClass,
    /// Baseline (I, Q) medians snapshotted at the trigger.
    pub baseline: Vec<(f64, f64)>,
    /// Frames from `trigger - pre_buffer` through `trigger + window`,
    /// in cycle order, one IQ point per channel each.
    pub frames: Vec<(u64, Vec<IQPoint>)>,
}

/// Outcome of feeding one frame to the engine.
#[derive(Debug, Clone)]
pub enum PushOutcome {
    /// Still in standby, or a capture window is filling.
    None,
    /// A capture completed its window on this frame.
    Capture(RawCapture),
    /// A trigger fired before the pre-buffer ring had filled (startup);
    /// the capture was rejected and the window consumed.
    Rejected { trigger_cycle: u64, available: usize, needed: usize },
}

#[derive(Debug)]
enum EngineState {
    Standby,
    Capturing { build: Box<CaptureBuild>, remaining: usize, rejected: bool },
}

#[derive(Debug)]
struct CaptureBuild {
    id: u64,
    trigger_cycle: u64,
    baseline: Vec<(f64, f64)>,
    members: BTreeSet<u16>,
    frames: Vec<(u64, Vec<IQPoint>)>,
}

/// The streaming trigger / capture state machine.
#[derive(Debug)]
pub struct TriggerEngine {
    settings: TriggerSettings,
    sigma: Vec<(f64, f64)>,
    n_top: u16,
    period_ns: f64,
    pre_cycles: usize,
    window_cycles: usize,
    baselines: Vec<(RollingMedian, RollingMedian)>,
    ring: VecDeque<Frame>,
    state: EngineState,
    next_id: u64,
    captures_emitted: u64,
    rejected_count: u64,
}

impl TriggerEngine {
    /// `sigma` holds one (σ_I, σ_Q) pair per channel; channels `< n_top`
    /// form the top array.
    pub fn new(
        settings: TriggerSettings,
        sigma: Vec<(f64, f64)>,
        n_top: u16,
        period_ns: f64,
    ) -> Result<Self, DaqError> {
        settings.validate()?;
        if sigma.is_empty() || period_ns <= 0.0 {
            return Err(DaqError::InvalidSettings);
        }
        // Ceil so the recorded cycles cover the nominal spans.
        let pre_cycles = libm::ceil(settings.pre_buffer_us * 1_000.0 / period_ns) as usize;
        let window_cycles = libm::ceil(settings.window_us * 1_000.0 / period_ns) as usize;
        let baselines = (0..sigma.len())
            .map(|_| {
                (
                    RollingMedian::new(settings.baseline_window),
                    RollingMedian::new(settings.baseline_window),
                )
            })
            .collect();
        Ok(Self {
            settings,
            sigma,
            n_top,
            period_ns,
            pre_cycles,
            window_cycles,
            baselines,
            ring: VecDeque::with_capacity(pre_cycles + 2),
            state: EngineState::Standby,
            next_id: 0,
            captures_emitted: 0,
            rejected_count: 0,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.sigma.len()
    }

    pub fn window_cycles(&self) -> usize {
        self.window_cycles
    }

    pub fn pre_cycles(&self) -> usize {
        self.pre_cycles
    }

    pub fn settings(&self) -> &TriggerSettings {
        &self.settings
    }

    pub fn sigma(&self) -> &[(f64, f64)] {
        &self.sigma
    }

    /// Dead time charged per emitted capture, ns.
    pub fn dead_time_per_capture_ns(&self) -> f64 {
        self.window_cycles as f64 * self.period_ns
    }

    pub fn rejected_captures(&self) -> u64 {
        self.rejected_count
    }

    pub fn captures_emitted(&self) -> u64 {
        self.captures_emitted
    }

    pub fn is_standby(&self) -> bool {
        matches!(self.state, EngineState::Standby)
    }

    fn baseline_ready(&self) -> bool {
        self.baselines[0].0.len() >= MIN_BASELINE_SAMPLES
    }

    fn current_baseline(&self) -> Vec<(f64, f64)> {
        self.baselines.iter().map(|(i, q)| (i.median(), q.median())).collect()
    }

    /// Feeds the frame for `cycle` (cycles must be strictly increasing
    /// across calls, gaps allowed). Returns a capture when a detection
    /// window completes.
    pub fn push_frame(&mut self, cycle: u64, samples: &[IQPoint]) -> PushOutcome {
        debug_assert_eq!(samples.len(), self.sigma.len());
        let outcome = if self.is_standby() {
            self.standby_step(cycle, samples)
        } else {
            self.capture_step(cycle, samples)
        };

        // The ring always tracks the most recent frames so the next
        // capture's pre-buffer is never lossy; the oldest frame's
        // allocation is recycled.
        if self.ring.len() > self.pre_cycles {
            let mut frame = self.ring.pop_front().unwrap();
            frame.cycle = cycle;
            frame.samples.clear();
            frame.samples.extend_from_slice(samples);
            self.ring.push_back(frame);
        } else {
            self.ring.push_back(Frame { cycle, samples: samples.to_vec() });
        }

        outcome
    }

    fn standby_step(&mut self, cycle: u64, samples: &[IQPoint]) -> PushOutcome {
        let k = self.settings.threshold_sigma;
        if self.baseline_ready() {
            let baseline = self.current_baseline();
            let hit = (0..samples.len())
                .any(|ch| excursion_over(self.sigma[ch], k, samples[ch], baseline[ch]));
            if hit {
                return self.open_capture(cycle, samples, baseline);
            }
        }
        // Quiet standby cycle: fold into the baselines.
        for (ch, point) in samples.iter().enumerate() {
            self.baselines[ch].0.push(point.i);
            self.baselines[ch].1.push(point.q);
        }
        PushOutcome::None
    }

    fn open_capture(&mut self, cycle: u64, samples: &[IQPoint], baseline: Vec<(f64, f64)>) -> PushOutcome {
        let k = self.settings.threshold_sigma;
        // Pre-buffer frames strictly before the trigger, within reach.
        let pre_frames: Vec<(u64, Vec<IQPoint>)> = self
            .ring
            .iter()
            .filter(|f| f.cycle + self.pre_cycles as u64 >= cycle && f.cycle < cycle)
            .map(|f| (f.cycle, f.samples.clone()))
            .collect();
        if pre_frames.len() < self.pre_cycles {
            self.rejected_count += 1;
            let available = pre_frames.len();
            self.state = EngineState::Capturing {
                build: Box::new(CaptureBuild {
                    id: u64::MAX,
                    trigger_cycle: cycle,
                    baseline,
                    members: BTreeSet::new(),
                    frames: Vec::new(),
                }),
                remaining: self.window_cycles,
                rejected: true,
            };
            return PushOutcome::Rejected { trigger_cycle: cycle, available, needed: self.pre_cycles };
        }

        let mut members = BTreeSet::new();
        for ch in 0..samples.len() {
            if excursion_over(self.sigma[ch], k, samples[ch], baseline[ch]) {
                members.insert(ch as u16);
            }
        }
        let mut frames = pre_frames;
        frames.push((cycle, samples.to_vec()));
        let id = self.next_id;
        self.next_id += 1;
        self.state = EngineState::Capturing {
            build: Box::new(CaptureBuild { id, trigger_cycle: cycle, baseline, members, frames }),
            remaining: self.window_cycles,
            rejected: false,
        };
        PushOutcome::None
    }

    fn capture_step(&mut self, cycle: u64, samples: &[IQPoint]) -> PushOutcome {
        let k = self.settings.threshold_sigma;
        let EngineState::Capturing { build, remaining, rejected } = &mut self.state else {
            unreachable!("capture_step outside a capture")
        };
        if !*rejected {
            for ch in 0..samples.len() {
                if excursion_over(self.sigma[ch], k, samples[ch], build.baseline[ch]) {
                    build.members.insert(ch as u16);
                }
            }
            build.frames.push((cycle, samples.to_vec()));
        }
        *remaining -= 1;
        if *remaining > 0 {
            return PushOutcome::None;
        }
        let state = core::mem::replace(&mut self.state, EngineState::Standby);
        match state {
            EngineState::Capturing { build, rejected: false, .. } => {
                let class =
                    classify(&build.members, self.n_top).expect("trigger has at least one member");
                self.captures_emitted += 1;
                PushOutcome::Capture(RawCapture {
                    id: build.id,
                    trigger_cycle: build.trigger_cycle,
                    trigger_channels: build.members,
                    class,
                    baseline: build.baseline,
                    frames: build.frames,
                })
            }
            _ => PushOutcome::None,
        }
    }
}
