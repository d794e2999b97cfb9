//! Temperature calibration of MKID IQ responses.
//!
//! A fridge sweep from base temperature to saturation yields per-channel
//! knots (T, I, Q). Natural cubic splines in I(T) and Q(T) trace the
//! calibration path; new IQ points are assigned the temperature of the
//! nearest spline point (dense sampling plus golden-section refinement).
//! Slow phase drift shows up as a rigid rotation of the IQ plane about the
//! origin and is corrected by comparing per-channel median positions between
//! the calibration and the data.

use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::mkid::{IQPoint, IQTrace};
use crate::stats;

/// Spline samples used by the nearest-point search.
pub const DENSE_SAMPLES: usize = 4096;
/// Golden-section refinement tolerance for temperature assignment, mK.
pub const ASSIGN_REFINE_TOL_MK: f64 = 0.1;
/// Lower edge of the meaningful temperature band, mK.
pub const BAND_LOW_MK: f64 = 100.0;
/// Upper edge of the meaningful temperature band, mK.
pub const BAND_HIGH_MK: f64 = 300.0;

#[derive(Debug, Clone, PartialEq)]
pub enum CalibError {
    /// Fewer than four sweep points.
    TooFewKnots { have: usize },
    /// Sweep temperatures not strictly increasing (includes duplicates).
    NonMonotonicSweep,
    /// Sweep does not span the meaningful band.
    InsufficientSpan { lo: f64, hi: f64 },
    /// Every channel median sits at the IQ origin; no rotation estimate.
    DegenerateMedians,
    /// Channels without a calibration curve.
    MissingCalibration { channels: Vec<u16> },
}

impl fmt::Display for CalibError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CalibError::TooFewKnots { have } => write!(f, "calibration needs at least 4 sweep points, got {have}"),
            CalibError::NonMonotonicSweep => write!(f, "sweep temperatures must be strictly increasing"),
            CalibError::InsufficientSpan { lo, hi } => {
                write!(f, "sweep [{lo}, {hi}] mK does not cover [{BAND_LOW_MK}, {BAND_HIGH_MK}] mK")
            }
            CalibError::DegenerateMedians => write!(f, "all medians at the origin; cannot estimate rotation"),
            CalibError::MissingCalibration { channels } => {
                write!(f, "missing calibration for channels {channels:?}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CalibError {}

/// Natural cubic spline through strictly increasing abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    /// `xs` must be strictly increasing and at least two points long.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        debug_assert_eq!(xs.len(), ys.len());
        let n = xs.len();
        let mut second = alloc::vec![0.0; n];
        if n > 2 {
            let mut u = alloc::vec![0.0; n];
            for i in 1..n - 1 {
                let sig = (xs[i] - xs[i - 1]) / (xs[i + 1] - xs[i - 1]);
                let p = sig * second[i - 1] + 2.0;
                second[i] = (sig - 1.0) / p;
                let d = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
                    - (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
                u[i] = (6.0 * d / (xs[i + 1] - xs[i - 1]) - sig * u[i - 1]) / p;
            }
            for i in (1..n - 1).rev() {
                second[i] = second[i] * second[i + 1] + u[i];
            }
        }
        Self { xs, ys, second }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    /// Evaluates at `x`, clamped to the knot domain.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let x = x.clamp(self.xs[0], self.xs[n - 1]);
        let hi = self.xs.partition_point(|&v| v < x).clamp(1, n - 1);
        let lo = hi - 1;
        let h = self.xs[hi] - self.xs[lo];
        let a = (self.xs[hi] - x) / h;
        let b = (x - self.xs[lo]) / h;
        a * self.ys[lo]
            + b * self.ys[hi]
            + ((a * a * a - a) * self.second[lo] + (b * b * b - b) * self.second[hi]) * h * h / 6.0
    }
}

/// Per-channel calibration: sweep knots, I/Q splines, the median reference
/// position ("star") and a dense polyline cache for assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationCurve {
    pub channel: u16,
    pub knots: Vec<(f64, IQPoint)>,
    pub median: IQPoint,
    spline_i: CubicSpline,
    spline_q: CubicSpline,
    dense: Vec<(f64, IQPoint)>,
}

impl CalibrationCurve {
    pub fn point_at(&self, t_mk: f64) -> IQPoint {
        IQPoint::new(self.spline_i.eval(t_mk), self.spline_q.eval(t_mk))
    }

    pub fn domain(&self) -> (f64, f64) {
        self.spline_i.domain()
    }
}

/// Builds a channel's calibration from averaged sweep points and the median
/// standby position recorded during the sweep.
pub fn build_calibration(
    channel: u16,
    sweep: &[(f64, IQPoint)],
    median: IQPoint,
) -> Result<CalibrationCurve, CalibError> {
    if sweep.len() < 4 {
        return Err(CalibError::TooFewKnots { have: sweep.len() });
    }
    if sweep.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(CalibError::NonMonotonicSweep);
    }
    let lo = sweep[0].0;
    let hi = sweep[sweep.len() - 1].0;
    if lo > BAND_LOW_MK || hi < BAND_HIGH_MK {
        return Err(CalibError::InsufficientSpan { lo, hi });
    }
    let ts: Vec<f64> = sweep.iter().map(|k| k.0).collect();
    let is: Vec<f64> = sweep.iter().map(|k| k.1.i).collect();
    let qs: Vec<f64> = sweep.iter().map(|k| k.1.q).collect();
    let spline_i = CubicSpline::new(ts.clone(), is);
    let spline_q = CubicSpline::new(ts, qs);
    let dense = (0..DENSE_SAMPLES)
        .map(|k| {
            let t = lo + (hi - lo) * k as f64 / (DENSE_SAMPLES - 1) as f64;
            (t, IQPoint::new(spline_i.eval(t), spline_q.eval(t)))
        })
        .collect();
    Ok(CalibrationCurve { channel, knots: sweep.to_vec(), median, spline_i, spline_q, dense })
}

/// Confidence band of a temperature assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandFlag {
    /// Below the 100 mK band edge: minimal detector response.
    LowConfidence,
    InBand,
    /// At the 300 mK end of the curve; the true temperature may be higher.
    Saturated,
}

/// Result of a minimum-distance temperature assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureAssignment {
    pub t_mk: f64,
    /// IQ distance from the query point to the curve, for quality gating.
    pub distance: f64,
    pub band: BandFlag,
}

/// Assigns the temperature of the spline point nearest to `point`
/// (dense scan plus golden-section refinement).
pub fn assign_temperature(curve: &CalibrationCurve, point: IQPoint) -> TemperatureAssignment {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, (_, p)) in curve.dense.iter().enumerate() {
        let d = (p.i - point.i) * (p.i - point.i) + (p.q - point.q) * (p.q - point.q);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    let (lo, _) = curve.dense[best.saturating_sub(1)];
    let (hi, _) = curve.dense[(best + 1).min(curve.dense.len() - 1)];
    let t = math::golden_section_min(lo, hi, ASSIGN_REFINE_TOL_MK, |t| {
        curve.point_at(t).distance(point)
    });
    let distance = curve.point_at(t).distance(point);
    let (dom_lo, dom_hi) = curve.domain();
    let step = (dom_hi - dom_lo) / (DENSE_SAMPLES - 1) as f64;
    let (t_mk, band) = if t >= dom_hi - step {
        (dom_hi, BandFlag::Saturated)
    } else if t < BAND_LOW_MK {
        (t, BandFlag::LowConfidence)
    } else {
        (t, BandFlag::InBand)
    };
    TemperatureAssignment { t_mk, distance, band }
}

/// A rigid rotation of the IQ plane about the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationCorrection {
    pub theta: f64,
}

impl RotationCorrection {
    pub fn identity() -> Self {
        Self { theta: 0.0 }
    }

    /// The 2×2 rotation matrix `[[cosθ, -sinθ], [sinθ, cosθ]]`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let (s, c) = (math::sin(self.theta), math::cos(self.theta));
        [[c, -s], [s, c]]
    }

    pub fn inverse(&self) -> Self {
        Self { theta: -self.theta }
    }
}

/// Applies `C' = R C` to an IQ point.
pub fn apply_rotation(correction: &RotationCorrection, point: IQPoint) -> IQPoint {
    let m = correction.matrix();
    IQPoint::new(
        m[0][0] * point.i + m[0][1] * point.q,
        m[1][0] * point.i + m[1][1] * point.q,
    )
}

/// Estimates the drift angle as the circular mean over channels of
/// `angle(calibration median) - angle(data median)`. Applying the returned
/// rotation to data points moves them back into the calibration frame.
pub fn estimate_rotation(
    data_medians: &[IQPoint],
    calib_medians: &[IQPoint],
) -> Result<RotationCorrection, CalibError> {
    debug_assert_eq!(data_medians.len(), calib_medians.len());
    let mut deltas = Vec::new();
    for (d, c) in data_medians.iter().zip(calib_medians) {
        if d.magnitude() > 1e-12 && c.magnitude() > 1e-12 {
            deltas.push(c.angle() - d.angle());
        }
    }
    match stats::circular_mean(&deltas) {
        Some(theta) => Ok(RotationCorrection { theta }),
        None => Err(CalibError::DegenerateMedians),
    }
}

/// Per-substrate normalized energy of one capture.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedEnergy {
    /// Mean normalized peak temperature over the top array, in [0, 1].
    pub top: f64,
    /// Same for the bottom array.
    pub bottom: f64,
    /// Per-channel peak assignment (channel, peak T in mK, normalized).
    pub per_channel: Vec<(u16, f64, f64)>,
}

/// Smallest-magnitude samples examined per trace when looking for the peak
/// temperature; the arc magnitude decreases monotonically with temperature,
/// so these bracket the peak even under noise.
const PEAK_CANDIDATES: usize = 3;

/// Normalizes a capture's per-channel peak response to the `[100, 300]` mK
/// band and averages per substrate. Channels `< n_top` form the top array.
pub fn normalize_energy(
    traces: &[IQTrace],
    curves: &[CalibrationCurve],
    rotation: &RotationCorrection,
    n_top: u16,
) -> Result<NormalizedEnergy, CalibError> {
    let missing: Vec<u16> = traces
        .iter()
        .map(|t| t.channel)
        .filter(|ch| !curves.iter().any(|c| c.channel == *ch))
        .collect();
    if !missing.is_empty() {
        return Err(CalibError::MissingCalibration { channels: missing });
    }

    let mut per_channel = Vec::with_capacity(traces.len());
    let mut top_acc = stats::MomentAccumulator::default();
    let mut bottom_acc = stats::MomentAccumulator::default();
    for trace in traces {
        let curve = curves.iter().find(|c| c.channel == trace.channel).unwrap();
        let mut rotated: Vec<IQPoint> =
            trace.points.iter().map(|&p| apply_rotation(rotation, p)).collect();
        rotated.sort_by(|a, b| a.magnitude().total_cmp(&b.magnitude()));
        let peak = rotated
            .iter()
            .take(PEAK_CANDIDATES)
            .map(|&p| assign_temperature(curve, p).t_mk)
            .fold(f64::NEG_INFINITY, f64::max);
        let normalized = ((peak - BAND_LOW_MK) / (BAND_HIGH_MK - BAND_LOW_MK)).clamp(0.0, 1.0);
        per_channel.push((trace.channel, peak, normalized));
        if trace.channel < n_top {
            top_acc.push(normalized);
        } else {
            bottom_acc.push(normalized);
        }
    }
    Ok(NormalizedEnergy { top: top_acc.mean(), bottom: bottom_acc.mean(), per_channel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mkid::{temperature_to_iq, MkidArrayConfig};
    use crate::rng::{normal_pair, uniform, RngFactory, Stream};
    use approx::assert_relative_eq;

    fn model_sweep(kink: f64) -> (Vec<(f64, IQPoint)>, crate::mkid::MKIDConfig) {
        let mut cfg = MkidArrayConfig::default().channel(2);
        cfg.kink_amplitude = kink;
        let sweep: Vec<(f64, IQPoint)> = (0..=29)
            .map(|k| {
                let t = 10.0 + 10.0 * k as f64;
                (t, temperature_to_iq(&cfg, t).unwrap())
            })
            .collect();
        (sweep, cfg)
    }

    fn curve(kink: f64) -> CalibrationCurve {
        let (sweep, cfg) = model_sweep(kink);
        build_calibration(2, &sweep, cfg.nominal()).unwrap()
    }

    #[test]
    fn too_few_knots_is_an_error() {
        let (sweep, cfg) = model_sweep(0.0);
        let err = build_calibration(2, &sweep[..2], cfg.nominal()).unwrap_err();
        assert!(matches!(err, CalibError::TooFewKnots { have: 2 }));
    }

    #[test]
    fn duplicate_or_decreasing_temperatures_rejected() {
        let (mut sweep, cfg) = model_sweep(0.0);
        sweep[5].0 = sweep[4].0;
        assert_eq!(
            build_calibration(2, &sweep, cfg.nominal()).unwrap_err(),
            CalibError::NonMonotonicSweep
        );
        let (mut sweep, _) = model_sweep(0.0);
        sweep[5].0 = sweep[3].0 - 1.0;
        assert_eq!(
            build_calibration(2, &sweep, cfg.nominal()).unwrap_err(),
            CalibError::NonMonotonicSweep
        );
    }

    #[test]
    fn narrow_sweep_span_rejected() {
        let (sweep, cfg) = model_sweep(0.0);
        let narrow: Vec<_> = sweep.iter().copied().filter(|k| k.0 < 250.0).collect();
        assert!(matches!(
            build_calibration(2, &narrow, cfg.nominal()).unwrap_err(),
            CalibError::InsufficientSpan { .. }
        ));
    }

    #[test]
    fn spline_reproduces_held_out_midpoints() {
        let (sweep, cfg) = model_sweep(0.0);
        let curve = build_calibration(2, &sweep, cfg.nominal()).unwrap();
        for w in sweep.windows(2) {
            let chord = w[1].1.distance(w[0].1);
            let t_mid = 0.5 * (w[0].0 + w[1].0);
            let model_mid = temperature_to_iq(&cfg, t_mid).unwrap();
            let spline_mid = curve.point_at(t_mid);
            assert!(
                spline_mid.distance(model_mid) < 0.01 * chord,
                "midpoint at {t_mid} off by {} (chord {chord})",
                spline_mid.distance(model_mid)
            );
        }
    }

    #[test]
    fn kinked_curve_still_interpolates_knots_exactly() {
        let (sweep, cfg) = model_sweep(0.5);
        let curve = build_calibration(2, &sweep, cfg.nominal()).unwrap();
        for (t, p) in &sweep {
            assert_relative_eq!(curve.point_at(*t).distance(*p), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn assignment_round_trips_on_curve_points() {
        let curve = curve(0.0);
        let a = assign_temperature(&curve, curve.point_at(200.0));
        assert!((a.t_mk - 200.0).abs() < 0.5, "assigned {}", a.t_mk);
        assert_eq!(a.band, BandFlag::InBand);
        assert!(a.distance < 1e-6);
    }

    #[test]
    fn round_trip_under_one_millikelvin_in_band() {
        let curve = curve(0.0);
        let mut t = 100.0;
        while t <= 300.0 {
            let a = assign_temperature(&curve, curve.point_at(t));
            assert!((a.t_mk - t).abs() < 1.0, "T {t} assigned {}", a.t_mk);
            t += 10.0;
        }
    }

    #[test]
    fn noisy_assignment_matches_dense_oracle() {
        let curve = curve(0.0);
        let f = RngFactory::new(55);
        let mut rng = f.stream(Stream::CalibSweep, 9);
        // Brute-force oracle over a fine polyline.
        let oracle_n = 200_000;
        let (lo, hi) = curve.domain();
        let oracle_points: alloc::vec::Vec<(f64, IQPoint)> = (0..oracle_n)
            .map(|k| {
                let t = lo + (hi - lo) * k as f64 / (oracle_n - 1) as f64;
                (t, curve.point_at(t))
            })
            .collect();
        for _ in 0..200 {
            let t_true = uniform(&mut rng, 110.0, 290.0);
            let (ni, nq) = normal_pair(&mut rng);
            let p = curve.point_at(t_true) + IQPoint::new(0.01 * ni, 0.01 * nq);
            let fast = assign_temperature(&curve, p);
            let mut best = (f64::INFINITY, 0.0);
            for (t, q) in &oracle_points {
                let d = q.distance(p);
                if d < best.0 {
                    best = (d, *t);
                }
            }
            assert!(
                (fast.t_mk - best.1).abs() < 0.5,
                "fast {} vs oracle {}",
                fast.t_mk,
                best.1
            );
        }
    }

    #[test]
    fn nominal_point_assigns_to_band_floor() {
        let curve = curve(0.0);
        let a = assign_temperature(&curve, curve.knots[0].1);
        assert!(a.t_mk <= BAND_LOW_MK);
        assert_eq!(a.band, BandFlag::LowConfidence);
    }

    #[test]
    fn beyond_saturation_clamps_with_flag() {
        let curve = curve(0.0);
        // A point past the arc end, at the origin itself.
        let a = assign_temperature(&curve, IQPoint::new(0.0, 0.0));
        assert_eq!(a.t_mk, 300.0);
        assert_eq!(a.band, BandFlag::Saturated);
    }

    #[test]
    fn rotation_identity_and_half_turn() {
        let r0 = RotationCorrection::identity();
        let p = IQPoint::new(0.3, -0.7);
        assert_eq!(apply_rotation(&r0, p), p);
        let r = RotationCorrection { theta: math::PI };
        let q = apply_rotation(&r, IQPoint::new(1.0, 0.0));
        assert_relative_eq!(q.i, -1.0, epsilon = 1e-12);
        assert!(q.q.abs() < 1e-12);
    }

    #[test]
    fn rotation_is_an_isometry_and_invertible() {
        let f = RngFactory::new(77);
        let mut rng = f.stream(Stream::CalibSweep, 1);
        for _ in 0..1_000 {
            let theta = uniform(&mut rng, -6.0, 6.0);
            let p = IQPoint::new(uniform(&mut rng, -2.0, 2.0), uniform(&mut rng, -2.0, 2.0));
            let r = RotationCorrection { theta };
            let q = apply_rotation(&r, p);
            assert_relative_eq!(q.magnitude(), p.magnitude(), epsilon = 1e-12);
            let back = apply_rotation(&r.inverse(), q);
            assert!(back.distance(p) < 1e-12);
        }
    }

    #[test]
    fn estimate_rotation_identity_and_quarter_turn() {
        let medians = alloc::vec![IQPoint::new(1.0, 0.0), IQPoint::new(0.0, -1.0)];
        let r = estimate_rotation(&medians, &medians).unwrap();
        assert_relative_eq!(r.theta, 0.0, epsilon = 1e-12);

        // Data median at (1,0), calibration at (0,1): a +π/2 correction.
        let data = alloc::vec![IQPoint::new(1.0, 0.0)];
        let calib = alloc::vec![IQPoint::new(0.0, 1.0)];
        let r = estimate_rotation(&data, &calib).unwrap();
        assert_relative_eq!(r.theta, math::PI / 2.0, epsilon = 1e-12);
        let moved = apply_rotation(&r, data[0]);
        assert!(moved.distance(calib[0]) < 1e-12);
    }

    #[test]
    fn estimate_rotation_rejects_origin_medians() {
        let zeros = alloc::vec![IQPoint::default(); 9];
        assert_eq!(estimate_rotation(&zeros, &zeros).unwrap_err(), CalibError::DegenerateMedians);
    }

    #[test]
    fn noisy_rotation_recovery_matches_grid_search_oracle() {
        let truth = math::to_radians(17.0);
        let f = RngFactory::new(88);
        let mut rng = f.stream(Stream::CalibSweep, 2);
        let calib: alloc::vec::Vec<IQPoint> = (0..9)
            .map(|k| {
                let ang = k as f64 * 0.7;
                IQPoint::new(math::cos(ang), math::sin(ang))
            })
            .collect();
        // Heterogeneous per-channel noise on a true 17° data drift.
        let data: alloc::vec::Vec<IQPoint> = calib
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let (a, b) = normal_pair(&mut rng);
                let noise = 0.002 * (k + 1) as f64;
                let rotated = apply_rotation(&RotationCorrection { theta: -truth }, *p);
                IQPoint::new(rotated.i + noise * a, rotated.q + noise * b)
            })
            .collect();
        let est = estimate_rotation(&data, &calib).unwrap();

        // Oracle: least-squares grid search over θ.
        let mut best = (f64::INFINITY, 0.0);
        let n = 720_000;
        for k in 0..n {
            let theta = -math::PI + math::TAU * k as f64 / n as f64;
            let r = RotationCorrection { theta };
            let cost: f64 = data
                .iter()
                .zip(&calib)
                .map(|(d, c)| apply_rotation(&r, *d).distance(*c))
                .map(|d| d * d)
                .sum();
            if cost < best.0 {
                best = (cost, theta);
            }
        }
        assert!(
            (est.theta - best.1).abs() < math::to_radians(0.5),
            "estimate {} vs oracle {}",
            est.theta,
            best.1
        );
        assert!((est.theta - truth).abs() < math::to_radians(0.5));
    }

    #[test]
    fn rotation_estimate_is_equivariant() {
        let calib = alloc::vec![IQPoint::new(0.9, 0.1), IQPoint::new(-0.4, 0.8)];
        let data = alloc::vec![IQPoint::new(0.8, 0.3), IQPoint::new(-0.5, 0.7)];
        let base = estimate_rotation(&data, &calib).unwrap().theta;
        let phi = 0.37;
        let spun: alloc::vec::Vec<IQPoint> = data
            .iter()
            .map(|&p| apply_rotation(&RotationCorrection { theta: phi }, p))
            .collect();
        let shifted = estimate_rotation(&spun, &calib).unwrap().theta;
        let mut delta = base - phi - shifted;
        while delta > math::PI {
            delta -= math::TAU;
        }
        while delta < -math::PI {
            delta += math::TAU;
        }
        assert!(delta.abs() < 1e-12, "delta {delta}");
    }

    #[test]
    fn rotate_then_assign_matches_direct_assignment() {
        let curve = curve(0.0);
        let f = RngFactory::new(99);
        let mut rng = f.stream(Stream::CalibSweep, 3);
        for _ in 0..200 {
            let t = uniform(&mut rng, 100.0, 300.0);
            let (ni, nq) = normal_pair(&mut rng);
            let p = curve.point_at(t) + IQPoint::new(0.01 * ni, 0.01 * nq);
            let theta = uniform(&mut rng, -3.0, 3.0);
            let r = RotationCorrection { theta };
            let round = apply_rotation(&r.inverse(), apply_rotation(&r, p));
            let direct = assign_temperature(&curve, p).t_mk;
            let rt = assign_temperature(&curve, round).t_mk;
            assert!((direct - rt).abs() < 1e-6, "direct {direct} vs round-trip {rt}");
        }
    }

    fn flat_trace(channel: u16, point: IQPoint) -> IQTrace {
        IQTrace { channel, start_ns: 0.0, period_ns: 8_000.0, points: alloc::vec![point; 16] }
    }

    fn model_curves(n: u16) -> alloc::vec::Vec<CalibrationCurve> {
        let arrays = MkidArrayConfig::default();
        (0..n)
            .map(|ch| {
                let cfg = arrays.channel(ch);
                let sweep: alloc::vec::Vec<(f64, IQPoint)> = (0..=29)
                    .map(|k| {
                        let t = 10.0 + 10.0 * k as f64;
                        (t, temperature_to_iq(&cfg, t).unwrap())
                    })
                    .collect();
                build_calibration(ch, &sweep, cfg.nominal()).unwrap()
            })
            .collect()
    }

    #[test]
    fn normalized_energy_examples() {
        let arrays = MkidArrayConfig::default();
        let curves = model_curves(18);
        let rot = RotationCorrection::identity();

        // All top channels saturated, all bottom at base.
        let traces: alloc::vec::Vec<IQTrace> = (0..18u16)
            .map(|ch| {
                let cfg = arrays.channel(ch);
                let t = if ch < 9 { 300.0 } else { cfg.base_mk };
                flat_trace(ch, temperature_to_iq(&cfg, t).unwrap())
            })
            .collect();
        let e = normalize_energy(&traces, &curves, &rot, 9).unwrap();
        assert_relative_eq!(e.top, 1.0, epsilon = 1e-9);
        assert_relative_eq!(e.bottom, 0.0, epsilon = 1e-9);

        // 3 of 9 at full scale, 6 at base → 1/3.
        let traces: alloc::vec::Vec<IQTrace> = (0..9u16)
            .map(|ch| {
                let cfg = arrays.channel(ch);
                let t = if ch < 3 { 300.0 } else { cfg.base_mk };
                flat_trace(ch, temperature_to_iq(&cfg, t).unwrap())
            })
            .collect();
        let e = normalize_energy(&traces, &curves, &rot, 9).unwrap();
        assert_relative_eq!(e.top, 1.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn normalized_energy_is_monotone_in_peak_temperature() {
        let arrays = MkidArrayConfig::default();
        let curves = model_curves(1);
        let rot = RotationCorrection::identity();
        let cfg = arrays.channel(0);
        let mut last = -1.0;
        for t in [50.0, 120.0, 180.0, 240.0, 300.0] {
            let traces = alloc::vec![flat_trace(0, temperature_to_iq(&cfg, t).unwrap())];
            let e = normalize_energy(&traces, &curves, &rot, 9).unwrap();
            assert!(e.top >= last);
            last = e.top;
        }
    }

    #[test]
    fn missing_calibration_lists_channels() {
        let arrays = MkidArrayConfig::default();
        let curves = model_curves(1);
        let cfg = arrays.channel(0);
        let traces = alloc::vec![flat_trace(0, cfg.nominal()), flat_trace(7, cfg.nominal())];
        let err =
            normalize_energy(&traces, &curves, &RotationCorrection::identity(), 9).unwrap_err();
        assert_eq!(err, CalibError::MissingCalibration { channels: alloc::vec![7] });
    }
}
