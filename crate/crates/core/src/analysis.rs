//! Quantitative analysis of capture collections: rates, energy
//! distributions, post-event coherence curves, recovery fits,
//! misclassification estimation and slow-drift diagnostics.
//!
//! Every operation is a pure fold over its inputs; binned quantities are
//! built from mergeable accumulators so collections can be sharded and the
//! partial results merged.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;

use crate::daq::EventClass;
use crate::math;
use crate::qubit::ShotKind;
use crate::rng;
use crate::stats::{self, MomentAccumulator};

/// First-bin window for the misclassification estimate: shots closer to the
/// trigger than this belong to the "immediately after" bin, µs.
pub const FIRST_BIN_MAX_US: f64 = 20.0;
/// Dual-event scatter is split at these top-array shares.
pub const SCATTER_BOTTOM_HEAVY_MAX: f64 = 0.25;
pub const SCATTER_TOP_HEAVY_MIN: f64 = 0.75;
/// Jump annotation threshold in combined-σ units.
pub const DEFAULT_JUMP_SIGMA: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisError {
    /// Too few populated time bins for a fit.
    TooFewBins { have: usize },
    /// The curve has no amplitude to fit.
    ConstantCurve,
    /// The nonlinear fit failed to converge.
    NoConvergence { residual: f64 },
    /// Dual and baseline populations coincide; f is undefined.
    DegenerateDenominator,
    /// An operation received no data.
    EmptyInput,
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::TooFewBins { have } => write!(f, "need at least 6 populated bins, got {have}"),
            AnalysisError::ConstantCurve => write!(f, "curve is constant; amplitude not identifiable"),
            AnalysisError::NoConvergence { residual } => {
                write!(f, "recovery fit did not converge (residual {residual})")
            }
            AnalysisError::DegenerateDenominator => {
                write!(f, "dual population equals baseline; fraction undefined")
            }
            AnalysisError::EmptyInput => write!(f, "no data"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for AnalysisError {}

/// Rate of one capture class normalized to live time and substrate area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub class: EventClass,
    pub count: u64,
    pub live_time_s: f64,
    pub area_cm2: f64,
    /// Events per second per cm².
    pub rate: f64,
    /// Poisson standard error of `rate`.
    pub sigma: f64,
    /// `rate / expected_flux` when an expectation is configured.
    pub ratio_to_expected: Option<f64>,
}

/// Per-class rates with Poisson errors. `live_time_s` must already exclude
/// capture dead windows.
pub fn event_rates(
    classes: &[EventClass],
    live_time_s: f64,
    area_cm2: f64,
    expected_flux: Option<f64>,
) -> Vec<RateEstimate> {
    [EventClass::Dual, EventClass::TopOnly, EventClass::BottomOnly]
        .into_iter()
        .map(|class| {
            let count = classes.iter().filter(|&&c| c == class).count() as u64;
            let denom = live_time_s * area_cm2;
            let rate = if denom > 0.0 { count as f64 / denom } else { 0.0 };
            let sigma = if denom > 0.0 { math::sqrt(count as f64) / denom } else { 0.0 };
            RateEstimate {
                class,
                count,
                live_time_s,
                area_cm2,
                rate,
                sigma,
                ratio_to_expected: expected_flux.map(|e| rate / e),
            }
        })
        .collect()
}

/// Normalized-energy density histogram of one class on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyHistogram {
    pub class: EventClass,
    pub bin_width: f64,
    /// Probability density per bin; sums to 1 when multiplied by the width.
    pub density: Vec<f64>,
    pub count: u64,
}

impl EnergyHistogram {
    /// Density mass above `threshold`.
    pub fn tail_mass(&self, threshold: f64) -> f64 {
        self.density
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let lo = k as f64 * self.bin_width;
                let hi = lo + self.bin_width;
                let overlap = (hi.min(1.0) - lo.max(threshold)).max(0.0);
                d * overlap
            })
            .sum()
    }
}

/// One capture's normalized energies: the class and the per-substrate values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEntry {
    pub class: EventClass,
    pub top: f64,
    pub bottom: f64,
}

impl EnergyEntry {
    /// The scalar entering the per-class density: the struck substrate for
    /// singles, the per-detector average for duals.
    pub fn density_value(&self) -> f64 {
        match self.class {
            EventClass::TopOnly => self.top,
            EventClass::BottomOnly => self.bottom,
            EventClass::Dual => 0.5 * (self.top + self.bottom),
        }
    }
}

/// Per-class probability densities of normalized energy.
pub fn energy_histograms(entries: &[EnergyEntry], bins: usize) -> Vec<EnergyHistogram> {
    let bin_width = 1.0 / bins as f64;
    [EventClass::Dual, EventClass::TopOnly, EventClass::BottomOnly]
        .into_iter()
        .map(|class| {
            let values: Vec<f64> = entries
                .iter()
                .filter(|e| e.class == class)
                .map(|e| e.density_value())
                .collect();
            let mut counts = alloc::vec![0u64; bins];
            for &v in &values {
                let k = ((v / bin_width) as usize).min(bins - 1);
                counts[k] += 1;
            }
            let total = values.len() as f64;
            let density = counts
                .iter()
                .map(|&c| if total > 0.0 { c as f64 / total / bin_width } else { 0.0 })
                .collect();
            EnergyHistogram { class, bin_width, density, count: values.len() as u64 }
        })
        .collect()
}

/// Cluster of a dual event in the (top, bottom) energy plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualGroup {
    TopHeavy,
    BottomHeavy,
    Distributed,
}

/// Splits dual-event energy pairs by the top-array share of the total.
pub fn dual_scatter_groups(pairs: &[(f64, f64)]) -> Vec<DualGroup> {
    pairs
        .iter()
        .map(|&(top, bottom)| {
            let total = top + bottom;
            if total <= 0.0 {
                return DualGroup::Distributed;
            }
            let share = top / total;
            if share > SCATTER_TOP_HEAVY_MIN {
                DualGroup::TopHeavy
            } else if share < SCATTER_BOTTOM_HEAVY_MAX {
                DualGroup::BottomHeavy
            } else {
                DualGroup::Distributed
            }
        })
        .collect()
}

/// Binned mean single-shot population versus trigger-relative time.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationCurve {
    pub bin_width_us: f64,
    /// One accumulator per bin, bin k covering `[k·w, (k+1)·w)`.
    pub bins: Vec<MomentAccumulator>,
}

impl PopulationCurve {
    pub fn bin_center_us(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.bin_width_us
    }

    /// (t_center, mean, binomial σ, count) for populated bins.
    pub fn points(&self) -> Vec<(f64, f64, f64, u64)> {
        self.bins
            .iter()
            .enumerate()
            .filter(|(_, acc)| acc.count > 0)
            .map(|(k, acc)| (self.bin_center_us(k), acc.mean(), acc.binomial_sigma_of_mean(), acc.count))
            .collect()
    }

    /// Counts-weighted mean of bins centered before `max_us`.
    pub fn early_mean(&self, max_us: f64) -> Option<(f64, u64)> {
        let mut acc = MomentAccumulator::default();
        for (k, bin) in self.bins.iter().enumerate() {
            if self.bin_center_us(k) < max_us {
                acc.merge(bin);
            }
        }
        (acc.count > 0).then(|| (acc.mean(), acc.count))
    }

    /// Counts-weighted mean of the last `fraction` of the populated span.
    pub fn late_mean(&self, fraction: f64) -> Option<f64> {
        let last = self.bins.iter().rposition(|b| b.count > 0)?;
        let start = ((last + 1) as f64 * (1.0 - fraction)) as usize;
        let mut acc = MomentAccumulator::default();
        for bin in &self.bins[start..=last] {
            acc.merge(bin);
        }
        (acc.count > 0).then(|| acc.mean())
    }

    pub fn merge(&mut self, other: &PopulationCurve) {
        debug_assert_eq!(self.bin_width_us, other.bin_width_us);
        if other.bins.len() > self.bins.len() {
            self.bins.resize(other.bins.len(), MomentAccumulator::default());
        }
        for (k, bin) in other.bins.iter().enumerate() {
            self.bins[k].merge(bin);
        }
    }
}

/// Bins `(t_rel_us, outcome)` shots into a population curve.
pub fn population_curve(shots: &[(f64, bool)], bin_width_us: f64) -> PopulationCurve {
    let mut bins: Vec<MomentAccumulator> = Vec::new();
    for &(t, outcome) in shots {
        if t < 0.0 {
            continue;
        }
        let k = (t / bin_width_us) as usize;
        if k >= bins.len() {
            bins.resize(k + 1, MomentAccumulator::default());
        }
        bins[k].push(outcome as u8 as f64);
    }
    PopulationCurve { bin_width_us, bins }
}

/// Per-class population curves from `(class, t_rel_us, outcome)` shots.
pub fn post_event_population(
    shots: &[(EventClass, f64, bool)],
    bin_width_us: f64,
) -> BTreeMap<EventClass, PopulationCurve> {
    let mut out = BTreeMap::new();
    for class in [EventClass::Dual, EventClass::TopOnly, EventClass::BottomOnly] {
        let subset: Vec<(f64, bool)> = shots
            .iter()
            .filter(|(c, ..)| *c == class)
            .map(|&(_, t, o)| (t, o))
            .collect();
        if !subset.is_empty() {
            out.insert(class, population_curve(&subset, bin_width_us));
        }
    }
    out
}

/// Result of fitting `baseline - amplitude·exp(-t/τ)` to a population curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryFit {
    pub kind: ShotKind,
    pub amplitude: f64,
    pub baseline: f64,
    /// 1/e recovery constant, µs.
    pub tau_us: f64,
    /// Bootstrap 16-84% interval (equals `tau_us` twice when not bootstrapped).
    pub tau_ci_us: (f64, f64),
    pub residual_rms: f64,
}

/// Least-squares fit of an exponential recovery to a population curve.
pub fn fit_recovery(kind: ShotKind, curve: &PopulationCurve) -> Result<RecoveryFit, AnalysisError> {
    let pts = curve.points();
    if pts.len() < 6 {
        return Err(AnalysisError::TooFewBins { have: pts.len() });
    }
    let ts: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let ws: Vec<f64> = pts.iter().map(|p| p.3 as f64).collect();
    let (amplitude, baseline, tau_us, residual_rms) = fit_exp_recovery(&ts, &ys, &ws)?;
    Ok(RecoveryFit { kind, amplitude, baseline, tau_us, tau_ci_us: (tau_us, tau_us), residual_rms })
}

/// Recovery fit with a bootstrap confidence interval over captures: each
/// resample redraws whole captures (their shot lists) with replacement.
pub fn fit_recovery_bootstrap<R: RngCore>(
    kind: ShotKind,
    per_capture_shots: &[Vec<(f64, bool)>],
    bin_width_us: f64,
    n_boot: usize,
    rng: &mut R,
) -> Result<RecoveryFit, AnalysisError> {
    if per_capture_shots.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let all: Vec<(f64, bool)> = per_capture_shots.iter().flatten().copied().collect();
    let mut fit = fit_recovery(kind, &population_curve(&all, bin_width_us))?;
    let mut taus = Vec::with_capacity(n_boot);
    let n = per_capture_shots.len();
    for _ in 0..n_boot {
        let mut sample: Vec<(f64, bool)> = Vec::with_capacity(all.len());
        for _ in 0..n {
            let idx = (rng.next_u64() % n as u64) as usize;
            sample.extend_from_slice(&per_capture_shots[idx]);
        }
        if let Ok(f) = fit_recovery(kind, &population_curve(&sample, bin_width_us)) {
            taus.push(f.tau_us);
        }
    }
    if taus.len() >= 10 {
        taus.sort_by(f64::total_cmp);
        let lo = taus[(taus.len() as f64 * 0.16) as usize];
        let hi = taus[((taus.len() as f64 * 0.84) as usize).min(taus.len() - 1)];
        fit.tau_ci_us = (lo, hi);
    }
    Ok(fit)
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    if math::abs(det) < 1e-300 {
        return None;
    }
    let mut x = [0.0; 3];
    for k in 0..3 {
        let mut m = a;
        for row in 0..3 {
            m[row][k] = b[row];
        }
        let dk = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        x[k] = dk / det;
    }
    Some(x)
}

/// Levenberg-Marquardt fit of `y = b - a·exp(-t/τ)`; returns
/// `(a, b, τ, weighted residual rms)`. τ is optimized in log space so it
/// stays positive and cannot collapse into the degenerate flat solution.
fn fit_exp_recovery(ts: &[f64], ys: &[f64], ws: &[f64]) -> Result<(f64, f64, f64, f64), AnalysisError> {
    let n = ts.len();
    let w_total: f64 = ws.iter().sum();
    let y_mean = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / w_total;
    let y_var = ys.iter().zip(ws).map(|(y, w)| w * (y - y_mean) * (y - y_mean)).sum::<f64>() / w_total;
    if y_var < 1e-18 {
        return Err(AnalysisError::ConstantCurve);
    }

    // Initial guesses: baseline from the last quarter, amplitude from the
    // first point, τ from a deficit-weighted log-linear regression of
    // (b - y), which leans on the early informative bins.
    let tail_start = n - (n / 4).max(1);
    let mut tail = MomentAccumulator::default();
    for k in tail_start..n {
        tail.push(ys[k]);
    }
    let mut b = tail.mean();
    let mut a = b - ys[0];
    if math::abs(a) < 1e-12 {
        a = math::sqrt(y_var).max(1e-6);
    }
    let tau0 = {
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        let mut sw = 0.0;
        for k in 0..n {
            let d = (b - ys[k]) / a;
            if d > 1e-4 {
                let ln = math::ln(d);
                let w = d * d;
                sx += w * ts[k];
                sy += w * ln;
                sxx += w * ts[k] * ts[k];
                sxy += w * ts[k] * ln;
                sw += w;
            }
        }
        let denom = sw * sxx - sx * sx;
        let fallback = (ts[n - 1] - ts[0]).max(ts[0]) / 3.0;
        if sw > 0.0 && math::abs(denom) > 1e-12 {
            let slope = (sw * sxy - sx * sy) / denom;
            if slope < -1e-12 {
                (-1.0 / slope).clamp(ts[0] * 0.1, (ts[n - 1] - ts[0]) * 10.0)
            } else {
                fallback
            }
        } else {
            fallback
        }
    };
    let mut log_tau = math::ln(tau0.max(1e-6));

    let cost = |a: f64, b: f64, log_tau: f64| -> f64 {
        let tau = math::exp(log_tau);
        ts.iter()
            .zip(ys)
            .zip(ws)
            .map(|((t, y), w)| {
                let r = y - (b - a * math::exp(-t / tau));
                w * r * r
            })
            .sum()
    };

    let mut lambda = 1e-3;
    let mut current = cost(a, b, log_tau);
    for _ in 0..300 {
        let tau = math::exp(log_tau);
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for k in 0..n {
            let e = math::exp(-ts[k] / tau);
            let r = ys[k] - (b - a * e);
            // d model / d(a, b, ln τ)
            let j = [-e, 1.0, -a * ts[k] / tau * e];
            for p in 0..3 {
                jtr[p] += ws[k] * j[p] * r;
                for q in 0..3 {
                    jtj[p][q] += ws[k] * j[p] * j[q];
                }
            }
        }
        let mut damped = jtj;
        for p in 0..3 {
            damped[p][p] *= 1.0 + lambda;
            damped[p][p] += 1e-12;
        }
        let Some(step) = solve3(damped, jtr) else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
            continue;
        };
        let capped = step[2].clamp(-1.0, 1.0);
        let (na, nb, nlog) = (a + step[0], b + step[1], log_tau + capped);
        let next = cost(na, nb, nlog);
        if next.is_finite() && next < current {
            let rel = (current - next) / current.max(1e-300);
            a = na;
            b = nb;
            log_tau = nlog;
            current = next;
            lambda = (lambda * 0.3).max(1e-12);
            if rel < 1e-12 {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }

    let tau = math::exp(log_tau);
    let rms = math::sqrt(current / w_total);
    if !tau.is_finite() || tau <= 0.0 {
        return Err(AnalysisError::NoConvergence { residual: rms });
    }
    Ok((a, b, tau, rms))
}

/// Misclassified-dual fraction estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisclassificationEstimate {
    /// Fraction of single-class captures attributed to penetrating events.
    pub f: f64,
    /// First-bin single-class population.
    pub p_single: f64,
    /// First-bin dual-class population.
    pub p_dual: f64,
    /// Unaffected-shot population used as the reference.
    pub p_base: f64,
}

/// Solves `P_single = (1-f)·P_base + f·P_dual` for `f` on the first
/// post-trigger bin. With populations normalized so `P_base = 1` this is the
/// mixture relation between single- and dual-conditioned curves.
pub fn estimate_misclassification(
    single: &PopulationCurve,
    dual: &PopulationCurve,
    p_base: f64,
    first_bin_max_us: f64,
) -> Result<MisclassificationEstimate, AnalysisError> {
    let (p_single, _) = single.early_mean(first_bin_max_us).ok_or(AnalysisError::EmptyInput)?;
    let (p_dual, _) = dual.early_mean(first_bin_max_us).ok_or(AnalysisError::EmptyInput)?;
    let denom = p_base - p_dual;
    if math::abs(denom) < 1e-9 {
        return Err(AnalysisError::DegenerateDenominator);
    }
    let f = ((p_base - p_single) / denom).clamp(0.0, 1.0);
    Ok(MisclassificationEstimate { f, p_single, p_dual, p_base })
}

/// Dual flux corrected for misclassified singles:
/// `(dual_count + f·single_count) / (live·area)` with its Poisson-propagated σ.
pub fn corrected_flux(
    dual_count: u64,
    single_count: u64,
    f: f64,
    live_time_s: f64,
    area_cm2: f64,
) -> (f64, f64) {
    let denom = live_time_s * area_cm2;
    if denom <= 0.0 {
        return (0.0, 0.0);
    }
    let corrected = (dual_count as f64 + f * single_count as f64) / denom;
    let sigma = math::sqrt(dual_count as f64 + f * f * single_count as f64) / denom;
    (corrected, sigma)
}

/// Time-binned mean population over a whole acquisition, with jump
/// annotations where adjacent bins differ by more than `k` combined σ.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftSeries {
    pub bin_width_s: f64,
    pub bins: Vec<MomentAccumulator>,
    /// Indices of bins whose mean jumped relative to the previous
    /// populated bin.
    pub jumps: Vec<usize>,
}

impl DriftSeries {
    pub fn means(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.mean()).collect()
    }

    /// (max - min) / mean over populated bins.
    pub fn relative_range(&self) -> f64 {
        let populated: Vec<f64> =
            self.bins.iter().filter(|b| b.count > 0).map(|b| b.mean()).collect();
        if populated.is_empty() {
            return 0.0;
        }
        let max = populated.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let min = populated.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let mean = stats::mean(&populated);
        if mean == 0.0 {
            0.0
        } else {
            (max - min) / mean
        }
    }
}

/// Bins absolute-time shots into a drift series and annotates jumps.
pub fn drift_series(shots: &[(f64, bool)], bin_width_s: f64, jump_sigma: f64) -> DriftSeries {
    let mut bins: Vec<MomentAccumulator> = Vec::new();
    for &(t_s, outcome) in shots {
        if t_s < 0.0 {
            continue;
        }
        let k = (t_s / bin_width_s) as usize;
        if k >= bins.len() {
            bins.resize(k + 1, MomentAccumulator::default());
        }
        bins[k].push(outcome as u8 as f64);
    }
    let mut jumps = Vec::new();
    let mut prev: Option<usize> = None;
    for k in 0..bins.len() {
        if bins[k].count == 0 {
            continue;
        }
        if let Some(p) = prev {
            let s = math::sqrt(
                bins[k].binomial_sigma_of_mean().powi(2) + bins[p].binomial_sigma_of_mean().powi(2),
            );
            if s > 0.0 && math::abs(bins[k].mean() - bins[p].mean()) > jump_sigma * s {
                jumps.push(k);
            }
        }
        prev = Some(k);
    }
    DriftSeries { bin_width_s, bins, jumps }
}

/// Permutation test of jump-to-event proximity.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub n_jumps: usize,
    /// Mean distance from each jump to its nearest event, s.
    pub observed_s: Option<f64>,
    /// One-sided p-value: probability of an equally small mean distance
    /// under uniformly shuffled event times. `None` when there are no jumps.
    pub p_value: Option<f64>,
    pub permutations: usize,
}

fn mean_nearest_distance(points: &[f64], sorted_refs: &[f64]) -> f64 {
    let mut total = 0.0;
    for &p in points {
        let idx = sorted_refs.partition_point(|&r| r < p);
        let mut best = f64::INFINITY;
        if idx < sorted_refs.len() {
            best = best.min(math::abs(sorted_refs[idx] - p));
        }
        if idx > 0 {
            best = best.min(math::abs(p - sorted_refs[idx - 1]));
        }
        total += best;
    }
    total / points.len() as f64
}

/// Tests whether drift jumps cluster near capture times. Event times are
/// re-drawn uniformly over the run for each permutation.
pub fn event_drift_correlation<R: RngCore>(
    jump_times_s: &[f64],
    event_times_s: &[f64],
    duration_s: f64,
    permutations: usize,
    rng: &mut R,
) -> Result<CorrelationReport, AnalysisError> {
    if event_times_s.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    if jump_times_s.is_empty() {
        return Ok(CorrelationReport {
            n_jumps: 0,
            observed_s: None,
            p_value: None,
            permutations,
        });
    }
    let mut refs: Vec<f64> = event_times_s.to_vec();
    refs.sort_by(f64::total_cmp);
    let observed = mean_nearest_distance(jump_times_s, &refs);
    let mut at_most = 0usize;
    let mut shuffled = alloc::vec![0.0; refs.len()];
    for _ in 0..permutations {
        for slot in shuffled.iter_mut() {
            *slot = rng::uniform(rng, 0.0, duration_s);
        }
        shuffled.sort_by(f64::total_cmp);
        if mean_nearest_distance(jump_times_s, &shuffled) <= observed {
            at_most += 1;
        }
    }
    let p = (1 + at_most) as f64 / (permutations + 1) as f64;
    Ok(CorrelationReport {
        n_jumps: jump_times_s.len(),
        observed_s: Some(observed),
        p_value: Some(p),
        permutations,
    })
}
