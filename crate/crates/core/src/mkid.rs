//! Phenomenological MKID response model.
//!
//! Deposited pixel energy maps to an effective temperature excursion that
//! relaxes exponentially as quasiparticles recombine. Each channel has an
//! IQ-plane arc from its nominal point down to (near) the origin; raising the
//! temperature walks the operating point along the arc. Readout collapses
//! every duty cycle to one averaged IQ point plus Gaussian noise per
//! quadrature.
//!
//! The arc is a logarithmic spiral (radius decays exponentially in
//! normalized temperature while the phase advances), which reproduces the
//! observed sweep toward the IQ origin with three parameters. An optional
//! phase-rate modulation term adds the calibration-curve kinks seen on
//! nonlinear resonators; it is zero by default so tests stay closed-form.

use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Sub};

use rand_core::RngCore;

use crate::math;
use crate::rng;

/// Default MKID base (bath) temperature, mK.
pub const DEFAULT_BASE_MK: f64 = 10.0;
/// Temperature at which the arc terminates near the IQ origin, mK.
pub const DEFAULT_SATURATION_MK: f64 = 300.0;
/// Default quasiparticle recombination time constant, µs.
pub const DEFAULT_TAU_QP_US: f64 = 100.0;
/// Default readout duty cycle period, ns.
pub const DEFAULT_PERIOD_NS: f64 = 8_000.0;
/// Default readout pulse length, ns.
pub const DEFAULT_PULSE_NS: f64 = 5_000.0;

/// One demodulated point in the IQ plane (volts, arbitrary scale).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IQPoint {
    pub i: f64,
    pub q: f64,
}

impl IQPoint {
    pub const fn new(i: f64, q: f64) -> Self {
        Self { i, q }
    }

    pub fn magnitude(self) -> f64 {
        math::hypot(self.i, self.q)
    }

    pub fn angle(self) -> f64 {
        math::atan2(self.q, self.i)
    }

    pub fn distance(self, other: IQPoint) -> f64 {
        math::hypot(self.i - other.i, self.q - other.q)
    }
}

impl Add for IQPoint {
    type Output = IQPoint;
    fn add(self, o: IQPoint) -> IQPoint {
        IQPoint::new(self.i + o.i, self.q + o.q)
    }
}

impl Sub for IQPoint {
    type Output = IQPoint;
    fn sub(self, o: IQPoint) -> IQPoint {
        IQPoint::new(self.i - o.i, self.q - o.q)
    }
}

impl Mul<f64> for IQPoint {
    type Output = IQPoint;
    fn mul(self, s: f64) -> IQPoint {
        IQPoint::new(self.i * s, self.q * s)
    }
}

/// Time-stamped IQ samples for one channel, one point per readout cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct IQTrace {
    pub channel: u16,
    /// Time of the first sample, ns.
    pub start_ns: f64,
    /// Sample spacing (the duty cycle period), ns.
    pub period_ns: f64,
    pub points: Vec<IQPoint>,
}

impl IQTrace {
    pub fn sample_time_ns(&self, index: usize) -> f64 {
        self.start_ns + index as f64 * self.period_ns
    }

    pub fn end_ns(&self) -> f64 {
        match self.points.len() {
            0 => self.start_ns,
            n => self.sample_time_ns(n - 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MkidError {
    /// Temperature below the configured base temperature.
    TemperatureBelowBase { t_mk: f64, base_mk: f64 },
    /// Configuration violates an invariant (noise, arc endpoint, ordering).
    InvalidConfig,
}

impl fmt::Display for MkidError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MkidError::TemperatureBelowBase { t_mk, base_mk } => {
                write!(f, "temperature {t_mk} mK below base {base_mk} mK")
            }
            MkidError::InvalidConfig => write!(f, "invalid MKID configuration"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MkidError {}

/// Per-channel resonator model.
#[derive(Debug, Clone, PartialEq)]
pub struct MKIDConfig {
    pub channel: u16,
    /// Nominal (base temperature) magnitude of the IQ point.
    pub nominal_magnitude: f64,
    /// Phase of the nominal IQ point, radians.
    pub phase_offset: f64,
    /// Arc radius at saturation as a fraction of nominal (< 0.05).
    pub end_radius_frac: f64,
    /// Total phase advance along the arc, radians.
    pub phase_sweep: f64,
    /// Amplitude of the phase-rate modulation ("kink") term; 0 disables it.
    pub kink_amplitude: f64,
    /// Oscillations of the kink term per unit normalized temperature.
    pub kink_frequency: f64,
    /// Gaussian noise sigma per quadrature on each averaged readout point.
    pub noise_sigma: f64,
    /// Base (bath) temperature, mK.
    pub base_mk: f64,
    /// Saturation temperature where the arc ends, mK.
    pub saturation_mk: f64,
    /// Pixel energy that drives the channel to saturation (arbitrary units).
    pub energy_full_scale: f64,
    /// Quasiparticle recombination time constant, µs.
    pub tau_qp_us: f64,
}

impl MKIDConfig {
    pub fn validate(&self) -> Result<(), MkidError> {
        let ok = self.noise_sigma >= 0.0
            && self.nominal_magnitude > 0.0
            && self.end_radius_frac > 0.0
            && self.end_radius_frac < 0.05
            && self.saturation_mk > self.base_mk
            && self.energy_full_scale > 0.0
            && self.tau_qp_us > 0.0;
        if ok {
            Ok(())
        } else {
            Err(MkidError::InvalidConfig)
        }
    }

    /// Normalized arc coordinate for a temperature: 0 at base, 1 at saturation.
    pub fn arc_coordinate(&self, t_mk: f64) -> f64 {
        ((t_mk - self.base_mk) / (self.saturation_mk - self.base_mk)).clamp(0.0, 1.0)
    }

    /// Nominal IQ point at base temperature.
    pub fn nominal(&self) -> IQPoint {
        IQPoint::new(
            self.nominal_magnitude * math::cos(self.phase_offset),
            self.nominal_magnitude * math::sin(self.phase_offset),
        )
    }

    fn radius_decay(&self) -> f64 {
        -math::ln(self.end_radius_frac)
    }

    fn phase_at(&self, u: f64) -> f64 {
        let kink = if self.kink_amplitude == 0.0 {
            0.0
        } else {
            // Integral of a cos-modulated phase rate.
            self.kink_amplitude * math::sin(math::TAU * self.kink_frequency * u)
                / (math::TAU * self.kink_frequency)
        };
        self.phase_offset + self.phase_sweep * (u + kink)
    }

    fn phase_rate(&self, u: f64) -> f64 {
        self.phase_sweep * (1.0 + self.kink_amplitude * math::cos(math::TAU * self.kink_frequency * u))
    }
}

/// Array-wide MKID defaults; per-channel configs differ only in their phase
/// offset so the arcs of an array fan out around the IQ plane.
#[derive(Debug, Clone, PartialEq)]
pub struct MkidArrayConfig {
    pub nominal_magnitude: f64,
    pub end_radius_frac: f64,
    pub phase_sweep: f64,
    pub kink_amplitude: f64,
    pub kink_frequency: f64,
    pub noise_sigma: f64,
    pub base_mk: f64,
    pub saturation_mk: f64,
    pub energy_full_scale: f64,
    pub tau_qp_us: f64,
}

impl Default for MkidArrayConfig {
    fn default() -> Self {
        Self {
            nominal_magnitude: 1.0,
            end_radius_frac: 0.02,
            phase_sweep: 2.2,
            kink_amplitude: 0.0,
            kink_frequency: 3.0,
            noise_sigma: 0.01,
            base_mk: DEFAULT_BASE_MK,
            saturation_mk: DEFAULT_SATURATION_MK,
            energy_full_scale: 60.0,
            tau_qp_us: DEFAULT_TAU_QP_US,
        }
    }
}

impl MkidArrayConfig {
    /// Per-channel config; channels get golden-angle-spaced phase offsets so
    /// no two arcs coincide.
    pub fn channel(&self, channel: u16) -> MKIDConfig {
        const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;
        MKIDConfig {
            channel,
            nominal_magnitude: self.nominal_magnitude,
            phase_offset: (channel as f64 * GOLDEN_ANGLE) % math::TAU,
            end_radius_frac: self.end_radius_frac,
            phase_sweep: self.phase_sweep,
            kink_amplitude: self.kink_amplitude,
            kink_frequency: self.kink_frequency,
            noise_sigma: self.noise_sigma,
            base_mk: self.base_mk,
            saturation_mk: self.saturation_mk,
            energy_full_scale: self.energy_full_scale,
            tau_qp_us: self.tau_qp_us,
        }
    }
}

/// An exponential effective-temperature excursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveTemperatureTrajectory {
    pub start_ns: f64,
    /// Peak temperature at the start, mK.
    pub t0_mk: f64,
    /// 1/e decay constant, µs.
    pub tau_us: f64,
    pub base_mk: f64,
}

/// Temperature at time `t_ns ≥ start_ns`:
/// `base + (T₀ - base)·exp(-(t - t₀)/τ)`.
pub fn relax(traj: &EffectiveTemperatureTrajectory, t_ns: f64) -> f64 {
    let dt_us = (t_ns - traj.start_ns) / 1_000.0;
    traj.base_mk + (traj.t0_mk - traj.base_mk) * math::exp(-dt_us / traj.tau_us)
}

/// Monotone map from deposited pixel energy to effective temperature:
/// linear in energy up to the full-scale energy, then saturated.
pub fn energy_to_temperature(pixel_energy: f64, mkid: &MKIDConfig) -> f64 {
    let u = (pixel_energy / mkid.energy_full_scale).clamp(0.0, 1.0);
    mkid.base_mk + (mkid.saturation_mk - mkid.base_mk) * u
}

/// Operating point on the channel's arc for a temperature `T ≥ base`.
pub fn temperature_to_iq(mkid: &MKIDConfig, t_mk: f64) -> Result<IQPoint, MkidError> {
    if t_mk < mkid.base_mk {
        return Err(MkidError::TemperatureBelowBase { t_mk, base_mk: mkid.base_mk });
    }
    let u = mkid.arc_coordinate(t_mk);
    let r = mkid.nominal_magnitude * math::exp(-mkid.radius_decay() * u);
    let phi = mkid.phase_at(u);
    Ok(IQPoint::new(r * math::cos(phi), r * math::sin(phi)))
}

/// Arc length of the channel's IQ path between two temperatures, by Simpson
/// integration of the analytic speed.
pub fn arc_length(mkid: &MKIDConfig, t_lo_mk: f64, t_hi_mk: f64) -> f64 {
    let u_lo = mkid.arc_coordinate(t_lo_mk);
    let u_hi = mkid.arc_coordinate(t_hi_mk);
    let k = mkid.radius_decay();
    let speed = |u: f64| {
        let r = mkid.nominal_magnitude * math::exp(-k * u);
        let dphi = mkid.phase_rate(u);
        r * math::sqrt(k * k + dphi * dphi)
    };
    let n = 2_048;
    let h = (u_hi - u_lo) / n as f64;
    let mut sum = speed(u_lo) + speed(u_hi);
    for i in 1..n {
        let u = u_lo + i as f64 * h;
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * speed(u);
    }
    sum * h / 3.0
}

/// Readout schedule for ringdown synthesis: one averaged IQ point per duty
/// cycle, sampled at the middle of the readout pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutSchedule {
    pub start_ns: f64,
    pub period_ns: f64,
    pub pulse_ns: f64,
    pub cycles: usize,
}

impl ReadoutSchedule {
    pub fn new(start_ns: f64, cycles: usize) -> Self {
        Self { start_ns, period_ns: DEFAULT_PERIOD_NS, pulse_ns: DEFAULT_PULSE_NS, cycles }
    }

    /// Time at which cycle `k`'s averaged point is evaluated.
    pub fn readout_time_ns(&self, k: usize) -> f64 {
        self.start_ns + k as f64 * self.period_ns + 0.5 * self.pulse_ns
    }
}

/// Synthesizes a noisy ringdown trace of a relaxing temperature excursion.
pub fn ringdown_trace<R: RngCore>(
    mkid: &MKIDConfig,
    teff: &EffectiveTemperatureTrajectory,
    schedule: &ReadoutSchedule,
    rng: &mut R,
) -> IQTrace {
    debug_assert!(schedule.period_ns >= schedule.pulse_ns);
    let mut points = Vec::with_capacity(schedule.cycles);
    for k in 0..schedule.cycles {
        let t = schedule.readout_time_ns(k);
        let temp = if t < teff.start_ns { teff.base_mk } else { relax(teff, t) };
        let clean = temperature_to_iq(mkid, temp).unwrap_or_else(|_| mkid.nominal());
        let (ni, nq) = rng::normal_pair(rng);
        points.push(IQPoint::new(clean.i + mkid.noise_sigma * ni, clean.q + mkid.noise_sigma * nq));
    }
    IQTrace {
        channel: mkid.channel,
        start_ns: schedule.readout_time_ns(0),
        period_ns: schedule.period_ns,
        points,
    }
}
