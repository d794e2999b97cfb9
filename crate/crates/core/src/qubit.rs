//! Single-shot qubit measurement model with quasiparticle-burst degradation.
//!
//! A radiation deposit in the qubit substrate creates a quasiparticle burst
//! whose density decays exponentially. The burst adds to the qubit's
//! relaxation rate (`1/T1_eff = 1/T1 + Γ·n_qp`), degrades T2 analogously and
//! detunes the qubit, which a maximally frequency-sensitive Ramsey readout
//! converts into a population shift. Ground-state preparation is modeled as
//! independent of the burst.

use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;

use crate::math;
use crate::rng;

/// Default qubit relaxation time, µs.
pub const DEFAULT_T1_US: f64 = 25.0;
/// Default qubit coherence time, µs.
pub const DEFAULT_T2_US: f64 = 10.0;
/// Default E_J/E_C of the measured device.
pub const DEFAULT_EJ_OVER_EC: f64 = 36.0;
/// T1 shots wait this fraction of the nominal T1 before readout.
pub const DEFAULT_T1_WAIT_FRACTION: f64 = 0.33;
/// Ramsey free-evolution time (one quarter detuning period), µs.
pub const DEFAULT_RAMSEY_WAIT_US: f64 = 2.0;
/// Shot sequences executed per capture.
pub const SHOT_SEQUENCE_CYCLES: usize = 50;

/// Quasiparticle-burst decay constant for T1-configured runs, µs. Calibrated
/// once so the fitted post-event T1 population recovery constant under the
/// default coupling lands at 38 µs; frozen here.
pub const DEFAULT_TAU_QP_T1_US: f64 = 28.8;
/// Same for T2-configured runs, targeting a fitted 25 µs recovery.
pub const DEFAULT_TAU_QP_T2_US: f64 = 23.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShotKind {
    T1,
    T2,
    Ground,
}

impl fmt::Display for ShotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShotKind::T1 => write!(f, "t1"),
            ShotKind::T2 => write!(f, "t2"),
            ShotKind::Ground => write!(f, "ground"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitError {
    /// Model parameters violate an invariant.
    InvalidModel,
    /// Shot schedule latency outside the supported 10-15 µs band.
    InvalidSchedule,
}

impl fmt::Display for QubitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QubitError::InvalidModel => write!(f, "invalid qubit model parameters"),
            QubitError::InvalidSchedule => write!(f, "shot schedule latency must lie in [10, 15] µs"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for QubitError {}

/// Static qubit and readout parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitModel {
    pub t1_base_us: f64,
    pub t2_base_us: f64,
    pub ej_over_ec: f64,
    /// T1 readout wait as a fraction of `t1_base_us`.
    pub t1_wait_fraction: f64,
    /// Ramsey free-evolution time, µs.
    pub ramsey_wait_us: f64,
    /// Ramsey phase at zero detuning shift; π/2 is the maximally
    /// frequency-sensitive operating point.
    pub operating_phase_rad: f64,
    /// Symmetric readout error probability.
    pub readout_error: f64,
    /// Residual excited-state probability of ground-state preparation.
    pub ground_error: f64,
    /// Added relaxation rate per unit quasiparticle density, 1/µs.
    pub qp_t1_coupling: f64,
    /// Added dephasing rate per unit quasiparticle density, 1/µs.
    pub qp_t2_coupling: f64,
    /// Detuning per unit quasiparticle density, MHz.
    pub qp_detuning_mhz: f64,
}

impl Default for QubitModel {
    fn default() -> Self {
        Self {
            t1_base_us: DEFAULT_T1_US,
            t2_base_us: DEFAULT_T2_US,
            ej_over_ec: DEFAULT_EJ_OVER_EC,
            t1_wait_fraction: DEFAULT_T1_WAIT_FRACTION,
            ramsey_wait_us: DEFAULT_RAMSEY_WAIT_US,
            operating_phase_rad: math::PI / 2.0,
            readout_error: 0.0,
            ground_error: 0.01,
            qp_t1_coupling: 0.18,
            qp_t2_coupling: 0.08,
            qp_detuning_mhz: 0.08,
        }
    }
}

impl QubitModel {
    pub fn validate(&self) -> Result<(), QubitError> {
        let ok = self.t1_base_us > 0.0
            && self.t2_base_us > 0.0
            && self.t2_base_us <= 2.0 * self.t1_base_us
            && (0.0..=1.0).contains(&self.ground_error)
            && (0.0..=0.5).contains(&self.readout_error)
            && (0.0..1.0).contains(&self.t1_wait_fraction)
            && self.ramsey_wait_us > 0.0
            && self.qp_t1_coupling >= 0.0
            && self.qp_t2_coupling >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(QubitError::InvalidModel)
        }
    }

    /// T1 readout wait time, µs.
    pub fn t1_wait_us(&self) -> f64 {
        self.t1_wait_fraction * self.t1_base_us
    }

    fn apply_readout_error(&self, p: f64) -> f64 {
        (p * (1.0 - self.readout_error) + (1.0 - p) * self.readout_error).clamp(0.0, 1.0)
    }
}

/// Slowly varying environment offsets for one shot sequence. Drift
/// processes are hours-scale, so the run driver samples them once per
/// capture and the shot model stays a pure function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftOffsets {
    /// Additional Ramsey detuning, MHz.
    pub detuning_mhz: f64,
    /// Multiplicative factor on the base T1.
    pub t1_scale: f64,
}

impl Default for DriftOffsets {
    fn default() -> Self {
        Self { detuning_mhz: 0.0, t1_scale: 1.0 }
    }
}

/// Excited-state probability of a single T1 shot at quasiparticle density
/// `n_qp ≥ 0`.
pub fn p1_t1(model: &QubitModel, n_qp: f64) -> f64 {
    p1_t1_drifted(model, n_qp, &DriftOffsets::default())
}

/// T1 shot probability with drift offsets applied.
pub fn p1_t1_drifted(model: &QubitModel, n_qp: f64, drift: &DriftOffsets) -> f64 {
    let rate = 1.0 / (model.t1_base_us * drift.t1_scale) + model.qp_t1_coupling * n_qp;
    let p = math::exp(-model.t1_wait_us() * rate);
    model.apply_readout_error(p)
}

/// Excited-state probability of a single Ramsey (T2) shot:
/// `½(1 + exp(-t_R/T2_eff)·cos(2π·Δ·t_R + φ₀))`.
pub fn p1_t2(model: &QubitModel, n_qp: f64, extra_detuning_mhz: f64) -> f64 {
    let rate = 1.0 / model.t2_base_us + model.qp_t2_coupling * n_qp;
    let envelope = math::exp(-model.ramsey_wait_us * rate);
    let detuning = model.qp_detuning_mhz * n_qp + extra_detuning_mhz;
    let phase = math::TAU * detuning * model.ramsey_wait_us + model.operating_phase_rad;
    let p = 0.5 * (1.0 + envelope * math::cos(phase));
    model.apply_readout_error(p)
}

/// One ground-state preparation shot; the excitation probability is the
/// configured preparation error, independent of quasiparticle density.
pub fn ground_shot<R: RngCore>(model: &QubitModel, _n_qp: f64, rng: &mut R) -> bool {
    rng::uniform01(rng) < model.ground_error
}

/// A decaying quasiparticle population created by a qubit-chip deposit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiparticleBurst {
    pub start_ns: f64,
    /// Initial density, arbitrary units.
    pub n0: f64,
    /// 1/e decay constant, µs.
    pub tau_qp_us: f64,
}

impl QuasiparticleBurst {
    /// Density at absolute time `t_ns` (zero before the burst starts).
    pub fn density(&self, t_ns: f64) -> f64 {
        if t_ns < self.start_ns || self.n0 == 0.0 {
            return 0.0;
        }
        self.n0 * math::exp(-(t_ns - self.start_ns) / 1_000.0 / self.tau_qp_us)
    }
}

/// Converts qubit-chip deposits into bursts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurstModel {
    /// Initial density per unit deposited energy.
    pub n0_per_energy: f64,
    /// Burst decay constant, µs.
    pub tau_qp_us: f64,
}

impl BurstModel {
    /// Calibrated defaults per measurement kind (see the `DEFAULT_TAU_QP_*`
    /// constants).
    pub fn default_for(kind: ShotKind) -> Self {
        let tau_qp_us = match kind {
            ShotKind::T2 => DEFAULT_TAU_QP_T2_US,
            _ => DEFAULT_TAU_QP_T1_US,
        };
        Self { n0_per_energy: 0.005, tau_qp_us }
    }
}

/// Burst produced by a qubit-chip deposit (`n₀ ∝ deposit`).
pub fn burst_from_deposit(model: &BurstModel, deposit: f64, start_ns: f64) -> QuasiparticleBurst {
    QuasiparticleBurst {
        start_ns,
        n0: model.n0_per_energy * deposit.max(0.0),
        tau_qp_us: model.tau_qp_us,
    }
}

/// Timing of the fifty-cycle post-trigger shot sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotSchedule {
    pub kind: ShotKind,
    pub cycles: usize,
    /// Delay from the trigger to the first readout, µs (10-15).
    pub latency_us: f64,
    /// Cycle period (pulses plus buffering), µs.
    pub period_us: f64,
}

impl ShotSchedule {
    /// Default schedule per kind: 50 cycles, 12 µs latency, periods chosen
    /// so a full sequence spans about 800 µs (T1), 560 µs (T2) and
    /// 500 µs (ground).
    pub fn default_for(kind: ShotKind) -> Self {
        let period_us = match kind {
            ShotKind::T1 => 16.0,
            ShotKind::T2 => 11.2,
            ShotKind::Ground => 10.0,
        };
        Self { kind, cycles: SHOT_SEQUENCE_CYCLES, latency_us: 12.0, period_us }
    }

    pub fn validate(&self) -> Result<(), QubitError> {
        if (10.0..=15.0).contains(&self.latency_us) && self.cycles > 0 && self.period_us > 0.0 {
            Ok(())
        } else {
            Err(QubitError::InvalidSchedule)
        }
    }

    /// Trigger-relative readout time of cycle `k`, µs.
    pub fn shot_time_us(&self, k: usize) -> f64 {
        self.latency_us + k as f64 * self.period_us
    }

    /// Duration of the cycle train itself (excluding the initial latency), µs.
    pub fn sequence_duration_us(&self) -> f64 {
        self.cycles as f64 * self.period_us
    }
}

/// Outcome of one single-shot measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotRecord {
    pub kind: ShotKind,
    /// Readout time relative to the trigger, µs.
    pub t_rel_us: f64,
    /// Measured excited-state bit.
    pub outcome: bool,
    /// Ground-truth event id attached by the acquisition layer.
    pub event_id: Option<u64>,
}

/// Runs one post-trigger shot sequence. Each cycle draws one Bernoulli
/// outcome from the kind's probability at the burst-decayed density; the
/// conditional ground-state reset between cycles is treated as perfect.
pub fn run_shot_sequence<R: RngCore>(
    model: &QubitModel,
    schedule: &ShotSchedule,
    trigger_ns: f64,
    bursts: &[QuasiparticleBurst],
    drift: &DriftOffsets,
    rng: &mut R,
) -> Vec<ShotRecord> {
    let mut shots = Vec::with_capacity(schedule.cycles);
    for k in 0..schedule.cycles {
        let t_rel_us = schedule.shot_time_us(k);
        let t_abs_ns = trigger_ns + t_rel_us * 1_000.0;
        let n_qp: f64 = bursts.iter().map(|b| b.density(t_abs_ns)).sum();
        let outcome = match schedule.kind {
            ShotKind::T1 => rng::uniform01(rng) < p1_t1_drifted(model, n_qp, drift),
            ShotKind::T2 => rng::uniform01(rng) < p1_t2(model, n_qp, drift.detuning_mhz),
            ShotKind::Ground => ground_shot(model, n_qp, rng),
        };
        shots.push(ShotRecord { kind: schedule.kind, t_rel_us, outcome, event_id: None });
    }
    shots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RngFactory, Stream};
    use crate::stats;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn default_model_is_valid() {
        QubitModel::default().validate().unwrap();
        for kind in [ShotKind::T1, ShotKind::T2, ShotKind::Ground] {
            ShotSchedule::default_for(kind).validate().unwrap();
        }
    }

    #[test]
    fn t1_probability_closed_form_points() {
        let model = QubitModel::default();
        assert_relative_eq!(p1_t1(&model, 0.0), math::exp(-0.33), epsilon = 1e-12);
        assert!((p1_t1(&model, 0.0) - 0.7189).abs() < 5e-4);
        // Coherence halved: Γ·n = 1/T1.
        let n = 1.0 / (model.t1_base_us * model.qp_t1_coupling);
        assert_relative_eq!(p1_t1(&model, n), math::exp(-0.66), epsilon = 1e-12);
        assert!((p1_t1(&model, n) - 0.5169).abs() < 5e-4);
    }

    #[test]
    fn t1_probability_approaches_readout_floor() {
        let mut model = QubitModel::default();
        model.readout_error = 0.03;
        let p = p1_t1(&model, 1e12);
        assert_relative_eq!(p, 0.03, epsilon = 1e-9);
    }

    #[test]
    fn t2_probability_closed_form_points() {
        let model = QubitModel::default();
        // At the π/2 operating point the cosine vanishes regardless of T2.
        assert_relative_eq!(p1_t2(&model, 0.0, 0.0), 0.5, epsilon = 1e-12);
        let mut zero_phase = model.clone();
        zero_phase.operating_phase_rad = 0.0;
        let p = p1_t2(&zero_phase, 0.0, 0.0);
        assert_relative_eq!(p, 0.5 * (1.0 + math::exp(-0.2)), epsilon = 1e-12);
        assert!((p - 0.9094).abs() < 5e-4);
    }

    #[test]
    fn small_detuning_shifts_t2_monotonically_off_half() {
        let model = QubitModel::default();
        let mut last = 0.5;
        for i in 1..=20 {
            let n = i as f64 * 0.02;
            let p = p1_t2(&model, n, 0.0);
            assert!(p < last, "p({n}) = {p} not decreasing");
            last = p;
        }
    }

    #[test]
    fn ground_statistics_match_error_and_ignore_bursts() {
        let model = QubitModel::default();
        let f = RngFactory::new(21);
        let mut rng = f.stream(Stream::Shots, 0);
        let n = 100_000;
        let mut ones = 0u64;
        for _ in 0..n {
            if ground_shot(&model, 0.0, &mut rng) {
                ones += 1;
            }
        }
        let p = ones as f64 / n as f64;
        let sigma = stats::binomial_sigma(model.ground_error, n);
        assert!((p - model.ground_error).abs() < 3.0 * sigma, "p = {p}");

        // Same statistics with a strong burst.
        let mut with_burst = 0u64;
        let m = 10_000;
        let mut rng_a = f.stream(Stream::Shots, 1);
        let mut rng_b = f.stream(Stream::Shots, 2);
        let mut without_burst = 0u64;
        for _ in 0..m {
            if ground_shot(&model, 50.0, &mut rng_a) {
                with_burst += 1;
            }
            if ground_shot(&model, 0.0, &mut rng_b) {
                without_burst += 1;
            }
        }
        let pa = with_burst as f64 / m as f64;
        let pb = without_burst as f64 / m as f64;
        let s = stats::binomial_sigma(model.ground_error, m) * math::sqrt(2.0);
        assert!((pa - pb).abs() < 3.0 * s);
    }

    #[test]
    fn zero_ground_error_never_excites() {
        let mut model = QubitModel::default();
        model.ground_error = 0.0;
        let f = RngFactory::new(3);
        let mut rng = f.stream(Stream::Shots, 0);
        assert!((0..10_000).all(|_| !ground_shot(&model, 1.0, &mut rng)));
    }

    #[test]
    fn zero_deposit_gives_null_burst() {
        let burst = burst_from_deposit(&BurstModel::default_for(ShotKind::T1), 0.0, 123.0);
        assert_eq!(burst.n0, 0.0);
        assert_eq!(burst.density(1e6), 0.0);
    }

    #[test]
    fn burst_density_decays_exponentially() {
        let model = BurstModel::default_for(ShotKind::T1);
        let burst = burst_from_deposit(&model, 200.0, 0.0);
        assert!(burst.n0 > 0.0);
        assert_eq!(burst.density(-1.0), 0.0);
        let tau_ns = model.tau_qp_us * 1_000.0;
        assert_relative_eq!(burst.density(tau_ns), burst.n0 / math::exp(1.0), epsilon = 1e-12);
    }

    #[test]
    fn t1_sequence_without_burst_is_flat() {
        let model = QubitModel::default();
        let schedule = ShotSchedule::default_for(ShotKind::T1);
        let f = RngFactory::new(77);
        let n_seq = 1_000;
        let mut per_cycle = alloc::vec![stats::MomentAccumulator::default(); schedule.cycles];
        for s in 0..n_seq {
            let mut rng = f.stream(Stream::Shots, s);
            let shots = run_shot_sequence(&model, &schedule, 0.0, &[], &DriftOffsets::default(), &mut rng);
            for (k, shot) in shots.iter().enumerate() {
                per_cycle[k].push(shot.outcome as u8 as f64);
            }
        }
        let expected = math::exp(-0.33);
        for acc in &per_cycle {
            let sigma = stats::binomial_sigma(expected, acc.count);
            assert!((acc.mean() - expected).abs() < 3.5 * sigma, "bin mean {}", acc.mean());
        }
    }

    #[test]
    fn burst_suppresses_first_cycle_population() {
        let model = QubitModel::default();
        let schedule = ShotSchedule::default_for(ShotKind::T1);
        let burst_model = BurstModel::default_for(ShotKind::T1);
        // Typical vertical-muon qubit deposit.
        let burst = burst_from_deposit(&burst_model, 195.0, 0.0);
        let f = RngFactory::new(78);
        let n_seq = 1_000;
        let mut first_with = stats::MomentAccumulator::default();
        let mut first_without = stats::MomentAccumulator::default();
        for s in 0..n_seq {
            let mut rng = f.stream(Stream::Shots, s);
            let shots = run_shot_sequence(&model, &schedule, 0.0, &[burst], &DriftOffsets::default(), &mut rng);
            first_with.push(shots[0].outcome as u8 as f64);
            let mut rng = f.stream(Stream::Shots, s + n_seq);
            let shots = run_shot_sequence(&model, &schedule, 0.0, &[], &DriftOffsets::default(), &mut rng);
            first_without.push(shots[0].outcome as u8 as f64);
        }
        let gap = first_without.mean() - first_with.mean();
        let sigma = math::sqrt(
            first_with.binomial_sigma_of_mean().powi(2) + first_without.binomial_sigma_of_mean().powi(2),
        );
        assert!(gap > 5.0 * sigma, "gap {gap} vs sigma {sigma}");
    }

    #[test]
    fn sequence_durations_match_published_spans() {
        let t1 = ShotSchedule::default_for(ShotKind::T1);
        assert_relative_eq!(t1.sequence_duration_us(), 800.0, epsilon = 1e-12);
        let t2 = ShotSchedule::default_for(ShotKind::T2);
        assert_relative_eq!(t2.sequence_duration_us(), 560.0, epsilon = 1e-12);
    }

    #[test]
    fn triggered_and_untriggered_statistics_match_without_burst() {
        let model = QubitModel::default();
        let schedule = ShotSchedule::default_for(ShotKind::T2);
        let f = RngFactory::new(79);
        let n_seq = 400;
        let mut triggered = alloc::vec::Vec::new();
        let mut untriggered = alloc::vec::Vec::new();
        for s in 0..n_seq {
            let mut rng = f.stream(Stream::Shots, s);
            let shots = run_shot_sequence(&model, &schedule, 5e9, &[], &DriftOffsets::default(), &mut rng);
            triggered.push(shots.iter().filter(|x| x.outcome).count() as f64 / shots.len() as f64);
            let mut rng = f.stream(Stream::Shots, s + n_seq);
            let shots = run_shot_sequence(&model, &schedule, 0.0, &[], &DriftOffsets::default(), &mut rng);
            untriggered.push(shots.iter().filter(|x| x.outcome).count() as f64 / shots.len() as f64);
        }
        let (_, p) = stats::ks_test_two_sample(&triggered, &untriggered);
        assert!(p > 0.001, "KS p = {p}");
    }

    proptest! {
        #[test]
        fn probabilities_stay_in_unit_interval(
            n in 0.0..1e6f64,
            extra in -100.0..100.0f64,
            t1 in 1.0..200.0f64,
            t2_frac in 0.01..2.0f64,
            wait_frac in 0.01..0.99f64,
            readout in 0.0..0.5f64,
        ) {
            let model = QubitModel {
                t1_base_us: t1,
                t2_base_us: t2_frac * t1,
                t1_wait_fraction: wait_frac,
                readout_error: readout,
                ..QubitModel::default()
            };
            let a = p1_t1(&model, n);
            let b = p1_t2(&model, n, extra);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!((0.0..=1.0).contains(&b));
        }

        #[test]
        fn t1_population_monotone_nonincreasing_in_density(
            n1 in 0.0..100.0f64,
            n2 in 0.0..100.0f64,
        ) {
            let model = QubitModel::default();
            let (lo, hi) = if n1 <= n2 { (n1, n2) } else { (n2, n1) };
            prop_assert!(p1_t1(&model, hi) <= p1_t1(&model, lo));
        }
    }
}
