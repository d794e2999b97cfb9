//! Seed-derived random streams.
//!
//! Every random draw in a run is addressed by `(stream kind, index)` so that
//! results do not depend on evaluation order: per-event physics, per-channel
//! noise and per-capture qubit shots can be computed in any order (or in
//! parallel) and still reproduce the exact bytes of a sequential run.
//!
//! Readout noise additionally uses the ChaCha word-position as a cycle counter
//! (four 32-bit words per readout cycle), so a channel's noise at cycle `k` is
//! a pure function of `(seed, channel, k)`.
//!
//! Distributions are inverted or Box-Muller transformed by hand instead of
//! going through `rand_distr`: the ziggurat samplers there consume a variable
//! amount of the underlying stream, which would break counter addressing.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math;

/// Logical random streams of a run. The discriminant is mixed into the
/// ChaCha stream id, so adding variants never reshuffles existing streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Muon arrival times and trajectories (sequential).
    MuonTimeline,
    /// Gamma arrival times and impact points; index = chip slot.
    GammaTimeline,
    /// Energy deposits of one event; index = event id.
    Deposit,
    /// Per-array detection suppression draws; index = event id.
    DetectionEfficiency,
    /// Readout noise; index = channel, word position = cycle counter.
    Noise,
    /// Background samples used for the sigma calibration; index = channel.
    SigmaBackground,
    /// Qubit shot outcomes of one capture; index = trigger cycle.
    Shots,
    /// Slow drift processes (sequential over a run).
    Drift,
    /// Calibration sweep averaging noise; index = channel.
    CalibSweep,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::MuonTimeline => 1,
            Stream::GammaTimeline => 2,
            Stream::Deposit => 3,
            Stream::DetectionEfficiency => 4,
            Stream::Noise => 5,
            Stream::SigmaBackground => 6,
            Stream::Shots => 7,
            Stream::Drift => 8,
            Stream::CalibSweep => 9,
        }
    }
}

/// Words of ChaCha output consumed per readout cycle (one Box-Muller pair).
pub const NOISE_WORDS_PER_CYCLE: u128 = 4;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives independent ChaCha8 streams from one master seed.
#[derive(Debug, Clone)]
pub struct RngFactory {
    key: [u8; 32],
}

impl RngFactory {
    pub fn new(seed: u64) -> Self {
        let mut state = seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Self { key }
    }

    /// A fresh generator for `(stream, index)`, starting at word position 0.
    pub fn stream(&self, stream: Stream, index: u64) -> ChaCha8Rng {
        let mut mix = stream.tag().wrapping_mul(0xa076_1d64_78bd_642f) ^ index;
        let id = splitmix64(&mut mix);
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(id);
        rng
    }

    /// Counter-addressed readout noise for `channel` at `cycle`:
    /// one standard-normal pair (I, Q).
    pub fn noise_at(&self, channel: u16, cycle: u64) -> (f64, f64) {
        let mut rng = self.stream(Stream::Noise, u64::from(channel));
        rng.set_word_pos(u128::from(cycle) * NOISE_WORDS_PER_CYCLE);
        normal_pair(&mut rng)
    }

    /// Sequential noise source for `channel` positioned at `cycle`. Cheaper
    /// than [`RngFactory::noise_at`] when cycles are consumed in order.
    pub fn noise_cursor(&self, channel: u16, cycle: u64) -> NoiseCursor {
        let mut rng = self.stream(Stream::Noise, u64::from(channel));
        rng.set_word_pos(u128::from(cycle) * NOISE_WORDS_PER_CYCLE);
        NoiseCursor { rng, next_cycle: cycle }
    }
}

/// Per-channel noise generator that tracks its cycle position.
#[derive(Debug, Clone)]
pub struct NoiseCursor {
    rng: ChaCha8Rng,
    next_cycle: u64,
}

impl NoiseCursor {
    /// Standard-normal (I, Q) pair for `cycle`; seeks if cycles were skipped.
    pub fn at(&mut self, cycle: u64) -> (f64, f64) {
        if cycle != self.next_cycle {
            self.rng.set_word_pos(u128::from(cycle) * NOISE_WORDS_PER_CYCLE);
        }
        self.next_cycle = cycle + 1;
        normal_pair(&mut self.rng)
    }
}

/// Uniform draw on the half-open interval (0, 1].
#[inline]
pub fn uniform_open01<R: RngCore>(rng: &mut R) -> f64 {
    let bits = rng.next_u64() >> 11;
    (bits as f64 + 1.0) * (1.0 / 9_007_199_254_740_992.0)
}

/// Uniform draw on `[0, 1)`.
#[inline]
pub fn uniform01<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Uniform draw on `[lo, hi)`.
#[inline]
pub fn uniform<R: RngCore>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform01(rng)
}

/// Box-Muller pair of independent standard normals. Consumes exactly two
/// 64-bit words.
#[inline]
pub fn normal_pair<R: RngCore>(rng: &mut R) -> (f64, f64) {
    let u1 = uniform_open01(rng);
    let u2 = uniform01(rng);
    let r = math::sqrt(-2.0 * math::ln(u1));
    let theta = math::TAU * u2;
    (r * math::cos(theta), r * math::sin(theta))
}

/// Single standard normal (the second half of the pair is discarded so the
/// stream cost stays fixed).
#[inline]
pub fn normal<R: RngCore>(rng: &mut R) -> f64 {
    normal_pair(rng).0
}

/// Exponential with the given rate (events per unit time).
#[inline]
pub fn exponential<R: RngCore>(rng: &mut R, rate: f64) -> f64 {
    -math::ln(uniform_open01(rng)) / rate
}

/// Log-normal with log-space median `median` and log-space sigma `sigma_log`.
/// `sigma_log == 0` degenerates to the median exactly.
#[inline]
pub fn lognormal<R: RngCore>(rng: &mut R, median: f64, sigma_log: f64) -> f64 {
    if sigma_log == 0.0 {
        // Still consume the draw so stream layout is independent of config.
        let _ = normal(rng);
        return median;
    }
    median * math::exp(sigma_log * normal(rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_independent_of_creation_order() {
        let f = RngFactory::new(7);
        let a1 = f.stream(Stream::Deposit, 3).next_u64();
        let b1 = f.stream(Stream::Deposit, 4).next_u64();
        let b2 = f.stream(Stream::Deposit, 4).next_u64();
        let a2 = f.stream(Stream::Deposit, 3).next_u64();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        assert_ne!(a1, b1);
    }

    #[test]
    fn noise_counter_addressing_matches_sequential_draws() {
        let f = RngFactory::new(42);
        let mut cursor = f.noise_cursor(5, 0);
        let seq: alloc::vec::Vec<(f64, f64)> = (0..100).map(|c| cursor.at(c)).collect();
        for (c, want) in seq.iter().enumerate() {
            assert_eq!(f.noise_at(5, c as u64), *want);
        }
        // Random access out of order.
        assert_eq!(cursor.at(17), seq[17]);
        assert_eq!(cursor.at(3), seq[3]);
    }

    #[test]
    fn normal_pair_moments() {
        let f = RngFactory::new(1);
        let mut rng = f.stream(Stream::Drift, 0);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let (a, b) = normal_pair(&mut rng);
            sum += a + b;
            sumsq += a * a + b * b;
        }
        let mean = sum / (2.0 * n as f64);
        let var = sumsq / (2.0 * n as f64) - mean * mean;
        assert!(math::abs(mean) < 5e-3);
        assert!(math::abs(var - 1.0) < 5e-3);
    }

    #[test]
    fn exponential_mean_matches_rate() {
        let f = RngFactory::new(2);
        let mut rng = f.stream(Stream::MuonTimeline, 0);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += exponential(&mut rng, 0.25);
        }
        assert!(math::abs(sum / n as f64 - 4.0) < 0.1);
    }
}
