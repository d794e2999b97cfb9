//! Deterministic simulation and analysis of radiation events on a stacked
//! MKID / qubit / MKID detector platform.
//!
//! The crate models the full chain from cosmic-ray muons and local gammas to
//! triggered data acquisition and quantitative analysis:
//!
//! * [`geometry`], the three-chip stack and straight-line muon trajectories;
//! * [`radiation`], Poisson event timelines, energy deposits and phonon
//!   spread onto detector pixels;
//! * [`mkid`], phenomenological resonator response: pixel energy →
//!   effective temperature → IQ ringdown traces;
//! * [`qubit`], single-shot T1/T2/ground measurements with
//!   quasiparticle-burst degradation and recovery;
//! * [`daq`], streaming 8σ trigger engine with pre-buffer capture and
//!   dual/top/bottom classification;
//! * [`calib`], temperature calibration splines, minimum-distance
//!   assignment and IQ rotation correction;
//! * [`analysis`], rates, energy histograms, post-event coherence curves,
//!   recovery fits, misclassification estimation and drift diagnostics;
//! * [`sim`], the run driver tying everything together.
//!
//! The crate is `no_std` (with `alloc`); every random draw is derived from a
//! single seed through counter-addressed streams ([`rng`]), so a run is
//! bit-reproducible regardless of evaluation order or thread count.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(feature = "std")]
extern crate std;

pub mod analysis;
pub mod calib;
pub mod daq;
pub mod geometry;
pub mod math;
pub mod mkid;
pub mod qubit;
pub mod radiation;
pub mod rng;
pub mod sim;
pub mod stats;

pub use daq::EventClass;
pub use geometry::{ChipGeometry, ChipRole, StackGeometry, Trajectory};
pub use mkid::{IQPoint, IQTrace};
pub use qubit::{ShotKind, ShotRecord};
pub use rng::RngFactory;
pub use sim::{CaptureRecord, RunStats, SimConfig};
