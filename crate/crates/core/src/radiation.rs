//! Radiation sources: Poisson-timed muons and gammas, energy deposits and
//! phonon spread onto detector pixels.
//!
//! Muons follow sampled trajectories and deposit in every pierced chip in
//! proportion to the chord length, with a log-normal event-to-event spread
//! standing in for Landau fluctuations. Gammas are localized: they deposit a
//! heavier-tailed energy on exactly one detector chip.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;

use crate::geometry::{ChipGeometry, ChipHits, ChipRole, StackGeometry, Trajectory, Vec3};
use crate::rng::{self, RngFactory, Stream};

/// Default sea-level muon flux through a horizontal surface (events/s/cm²).
pub const DEFAULT_MUON_FLUX: f64 = 0.017;
/// Default gamma rate per detector chip (events/s). Tuned so that with the
/// default stack the dual-detection fraction of triggered captures sits near
/// one quarter.
pub const DEFAULT_GAMMA_RATE_PER_CHIP: f64 = 0.0043;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Muon,
    Gamma,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::Muon => write!(f, "muon"),
            EventKind::Gamma => write!(f, "gamma"),
        }
    }
}

/// Where an event comes from: a through-going track or a local impact.
#[derive(Debug, Clone, PartialEq)]
pub enum EventOrigin {
    Track(Trajectory),
    Local { chip: ChipRole, point: Vec3 },
}

/// One radiation event on the timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiationEvent {
    pub id: u64,
    pub kind: EventKind,
    pub origin: EventOrigin,
    /// Multiplies the kind's deposit scale (drawn per event).
    pub energy_scale: f64,
    /// Arrival time in ns since run start.
    pub time_ns: f64,
}

/// Source rates and deposit-spectrum parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    /// Muon flux through the generating plane (events/s/cm²).
    pub muon_flux_per_s_cm2: f64,
    /// Gamma rate per detector chip (events/s).
    pub gamma_rate_per_chip: f64,
    /// Muon energy deposit per mm of chord (arbitrary units).
    pub muon_dedx_per_mm: f64,
    /// Log-space sigma of the per-chip muon deposit spread; 0 disables it.
    pub muon_sigma_log: f64,
    /// Median gamma deposit (arbitrary units).
    pub gamma_median: f64,
    /// Log-space sigma of the gamma deposit distribution.
    pub gamma_sigma_log: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            muon_flux_per_s_cm2: DEFAULT_MUON_FLUX,
            gamma_rate_per_chip: DEFAULT_GAMMA_RATE_PER_CHIP,
            muon_dedx_per_mm: 300.0,
            muon_sigma_log: 0.3,
            gamma_median: 260.0,
            gamma_sigma_log: 0.8,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<(), SourceError> {
        if self.muon_flux_per_s_cm2 < 0.0 || self.gamma_rate_per_chip < 0.0 {
            return Err(SourceError::NegativeRate);
        }
        if self.muon_dedx_per_mm <= 0.0 || self.gamma_median <= 0.0 {
            return Err(SourceError::NonPositiveScale);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceError {
    NegativeRate,
    NonPositiveScale,
}

impl fmt::Display for SourceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceError::NegativeRate => write!(f, "source rates must be non-negative"),
            SourceError::NonPositiveScale => write!(f, "deposit scales must be positive"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SourceError {}

/// Energy bookkeeping for one event.
#[derive(Debug, Clone, PartialEq)]
pub struct DepositRecord {
    pub event_id: u64,
    /// Deposited energy per chip, top→bottom order (arbitrary units).
    pub per_chip: [f64; 3],
    /// Phonon energy collected per pixel on the two detector chips
    /// (row-major; same order as [`ChipGeometry::pixel_centers`]).
    pub pixels: [Vec<f64>; 2],
    /// Lateral impact point per detector chip, used by the phonon kernel.
    pub impact: [Option<Vec3>; 2],
    /// True when the event deposits in the qubit chip.
    pub qubit_hit: bool,
}

impl DepositRecord {
    pub fn qubit_deposit(&self) -> f64 {
        self.per_chip[ChipRole::Qubit.slot()]
    }

    fn empty(event_id: u64) -> Self {
        Self {
            event_id,
            per_chip: [0.0; 3],
            pixels: [Vec::new(), Vec::new()],
            impact: [None, None],
            qubit_hit: false,
        }
    }
}

/// Isotropic distance-decay kernel sharing a chip deposit over its pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhononKernel {
    /// Softening distance d₀ (mm) of the 1/(d² + d₀²) decay.
    pub d0_mm: f64,
    /// Fraction of the chip deposit collected by the pixels (≤ 1).
    pub collection_efficiency: f64,
}

impl Default for PhononKernel {
    fn default() -> Self {
        Self { d0_mm: 5.0, collection_efficiency: 0.8 }
    }
}

/// Generates the merged, time-ordered event list for one run.
///
/// Muon arrivals are Poisson with rate `flux × generating-plane area`; gamma
/// arrivals are Poisson per detector chip. Event ids are assigned in time
/// order after the merge.
pub fn generate_timeline(
    source: &SourceConfig,
    duration_s: f64,
    stack: &StackGeometry,
    factory: &RngFactory,
) -> Result<Vec<RadiationEvent>, SourceError> {
    source.validate()?;
    let duration_ns = duration_s * 1e9;
    let mut events: Vec<RadiationEvent> = Vec::new();

    let muon_rate = source.muon_flux_per_s_cm2 * stack.generating_plane_area_cm2();
    if muon_rate > 0.0 {
        let mut rng = factory.stream(Stream::MuonTimeline, 0);
        let mut t_ns = 0.0;
        loop {
            t_ns += rng::exponential(&mut rng, muon_rate) * 1e9;
            if t_ns >= duration_ns {
                break;
            }
            let traj = crate::geometry::sample_muon_trajectory(stack, &mut rng);
            events.push(RadiationEvent {
                id: 0,
                kind: EventKind::Muon,
                origin: EventOrigin::Track(traj),
                energy_scale: 1.0,
                time_ns: t_ns,
            });
        }
    }

    if source.gamma_rate_per_chip > 0.0 {
        for (slot, role) in [(0u64, ChipRole::TopDetector), (1u64, ChipRole::BottomDetector)] {
            let chip = stack.chip(role);
            let [hx, hy] = chip.half_extent();
            let mut rng = factory.stream(Stream::GammaTimeline, slot);
            let mut t_ns = 0.0;
            loop {
                t_ns += rng::exponential(&mut rng, source.gamma_rate_per_chip) * 1e9;
                if t_ns >= duration_ns {
                    break;
                }
                let point = Vec3::new(
                    chip.center.x + rng::uniform(&mut rng, -hx, hx),
                    chip.center.y + rng::uniform(&mut rng, -hy, hy),
                    chip.center.z,
                );
                events.push(RadiationEvent {
                    id: 0,
                    kind: EventKind::Gamma,
                    origin: EventOrigin::Local { chip: role, point },
                    energy_scale: 1.0,
                    time_ns: t_ns,
                });
            }
        }
    }

    events.sort_by(|a, b| a.time_ns.total_cmp(&b.time_ns));
    for (i, e) in events.iter_mut().enumerate() {
        e.id = i as u64;
    }
    Ok(events)
}

/// Deposits an event's energy into the chips it touches.
///
/// Muons deposit `dE/dx × chord × log-normal spread` in every pierced chip;
/// gammas deposit one log-normal draw on their chip. A muon that misses
/// everything yields a valid empty record.
pub fn deposit_energy<R: RngCore>(
    event: &RadiationEvent,
    hits: &ChipHits,
    source: &SourceConfig,
    rng: &mut R,
) -> DepositRecord {
    let mut record = DepositRecord::empty(event.id);
    match (&event.kind, &event.origin) {
        (EventKind::Muon, EventOrigin::Track(_)) => {
            for hit in &hits.hits {
                let base = source.muon_dedx_per_mm * hit.path_mm * event.energy_scale;
                let e = base * rng::lognormal(rng, 1.0, source.muon_sigma_log);
                let slot = hit.role.slot();
                record.per_chip[slot] = e;
                match hit.role {
                    ChipRole::TopDetector => {
                        record.impact[0] = Some(midpoint(hit.entry, hit.exit));
                    }
                    ChipRole::BottomDetector => {
                        record.impact[1] = Some(midpoint(hit.entry, hit.exit));
                    }
                    ChipRole::Qubit => record.qubit_hit = true,
                }
            }
        }
        (EventKind::Gamma, EventOrigin::Local { chip, point }) => {
            let e = rng::lognormal(rng, source.gamma_median * event.energy_scale, source.gamma_sigma_log);
            record.per_chip[chip.slot()] = e;
            let det = match chip {
                ChipRole::TopDetector => 0,
                ChipRole::BottomDetector => 1,
                ChipRole::Qubit => return record, // not generated; keep total in per_chip only
            };
            record.impact[det] = Some(*point);
        }
        _ => {}
    }
    record
}

/// Shares a chip deposit over the chip's pixel grid with the
/// `1/(d² + d₀²)` kernel, normalized so the shares sum to
/// `deposit × collection_efficiency`.
pub fn spread_phonons(deposit: f64, impact: Vec3, chip: &ChipGeometry, kernel: &PhononKernel) -> Vec<f64> {
    let centers = chip.pixel_centers();
    let mut weights: Vec<f64> = centers
        .iter()
        .map(|c| {
            let dx = c.x - impact.x;
            let dy = c.y - impact.y;
            1.0 / (dx * dx + dy * dy + kernel.d0_mm * kernel.d0_mm)
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let scale = deposit * kernel.collection_efficiency / total;
    for w in &mut weights {
        *w *= scale;
    }
    weights
}

/// Fills the per-pixel fields of a deposit record for both detector chips.
pub fn spread_event_phonons(record: &mut DepositRecord, stack: &StackGeometry, kernel: &PhononKernel) {
    for (det, role) in [(0usize, ChipRole::TopDetector), (1usize, ChipRole::BottomDetector)] {
        let chip = stack.chip(role);
        let deposit = record.per_chip[role.slot()];
        record.pixels[det] = match (deposit > 0.0, record.impact[det]) {
            (true, Some(impact)) => spread_phonons(deposit, impact, chip, kernel),
            _ => vec![0.0; chip.pixel_count()],
        };
    }
}

fn midpoint(a: Vec3, b: Vec3) -> Vec3 {
    (a + b) * 0.5
}

/// Deterministic deposit derivation for event `id` (stream-addressed).
pub fn deposit_for_event(
    event: &RadiationEvent,
    stack: &StackGeometry,
    source: &SourceConfig,
    kernel: &PhononKernel,
    factory: &RngFactory,
) -> DepositRecord {
    let hits = match &event.origin {
        EventOrigin::Track(traj) => crate::geometry::intersect(traj, stack),
        EventOrigin::Local { .. } => ChipHits::default(),
    };
    let mut rng = factory.stream(Stream::Deposit, event.id);
    let mut record = deposit_energy(event, &hits, source, &mut rng);
    spread_event_phonons(&mut record, stack, kernel);
    record
}
