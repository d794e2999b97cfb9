//! Scratch calibration harness (deleted before release).

use radstack_core::geometry::{self, ChipRole, StackGeometry};
use radstack_core::radiation::{self, EventOrigin, SourceConfig};
use radstack_core::rng::RngFactory;

#[test]
#[ignore]
fn measure_muon_class_fractions() {
    for qubit_mm in [20.0, 14.0, 12.0, 10.0, 8.0, 6.0, 5.0] {
        let stack = StackGeometry::with_dimensions(
            20.0,
            qubit_mm,
            0.65,
            geometry::DEFAULT_GAP_MM,
            3,
        );
        let source = SourceConfig { gamma_rate_per_chip: 0.0, ..SourceConfig::default() };
        let live = 96.0 * 3600.0;
        let factory = RngFactory::new(999);
        let events = radiation::generate_timeline(&source, live, &stack, &factory).unwrap();
        let mut dual = 0u64;
        let mut dual_qubit = 0u64;
        let mut top_only = 0u64;
        let mut bottom_only = 0u64;
        let mut qubit_single = 0u64;
        for e in &events {
            let EventOrigin::Track(t) = &e.origin else { continue };
            let hits = geometry::intersect(t, &stack);
            let top = hits.pierces(ChipRole::TopDetector);
            let bottom = hits.pierces(ChipRole::BottomDetector);
            let qubit = hits.pierces(ChipRole::Qubit);
            match (top, bottom) {
                (true, true) => {
                    dual += 1;
                    if qubit {
                        dual_qubit += 1;
                    }
                }
                (true, false) => {
                    top_only += 1;
                    if qubit {
                        qubit_single += 1;
                    }
                }
                (false, true) => {
                    bottom_only += 1;
                    if qubit {
                        qubit_single += 1;
                    }
                }
                _ => {}
            }
        }
        let singles = top_only + bottom_only;
        let area = stack.chip(ChipRole::TopDetector).area_cm2();
        println!(
            "qubit {qubit_mm:>4} mm | dual {:.5}/s ({:.5}/s/cm2) | top_only {:.5}/s bottom_only {:.5}/s | frac {:.3} | beta(qubit|dual) {:.3} | gamma(qubit-single/single) {:.4}",
            dual as f64 / live,
            dual as f64 / live / area,
            top_only as f64 / live,
            bottom_only as f64 / live,
            dual as f64 / (dual + singles) as f64,
            dual_qubit as f64 / dual as f64,
            qubit_single as f64 / singles as f64,
        );
    }
}

use radstack_core::analysis;
use radstack_core::qubit::ShotKind;
use radstack_core::sim::{self, SimConfig};

fn dual_tau(kind: ShotKind, seed: u64, hours: f64) -> (f64, f64, usize, f64) {
    let cfg = SimConfig::new(seed, hours * 3600.0).with_shot_kind(kind);
    let mut captures: Vec<radstack_core::CaptureRecord> = Vec::new();
    let t0 = std::time::Instant::now();
    let (stats, _physics) = sim::run_simulation(&cfg, &mut captures).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let shots: Vec<(radstack_core::EventClass, f64, bool)> = captures
        .iter()
        .flat_map(|c| c.shots.iter().map(|s| (c.class, s.t_rel_us, s.outcome)))
        .collect();
    let curves = analysis::post_event_population(&shots, cfg.schedule.period_us);
    let dual = &curves[&radstack_core::EventClass::Dual];
    let fit = analysis::fit_recovery(kind, dual).unwrap();
    let n_dual = captures.iter().filter(|c| c.class == radstack_core::EventClass::Dual).count();
    let frac = n_dual as f64 / stats.n_captures as f64;
    println!(
        "kind {kind:?} seed {seed}: tau {:.2} us amp {:.3} base {:.3}, duals {n_dual}, frac {frac:.3}, sim {elapsed:.1}s, captures {}",
        fit.tau_us, fit.amplitude, fit.baseline, stats.n_captures
    );
    (fit.tau_us, frac, n_dual, elapsed)
}

#[test]
#[ignore]
fn calibrate_tau_t1() {
    dual_tau(ShotKind::T1, 1, 12.0);
}

#[test]
#[ignore]
fn calibrate_tau_t2() {
    dual_tau(ShotKind::T2, 2, 12.0);
}

#[test]
#[ignore]
fn dump_dual_curve() {
    let cfg = SimConfig::new(1, 4.0 * 3600.0).with_shot_kind(ShotKind::T1);
    let mut captures: Vec<radstack_core::CaptureRecord> = Vec::new();
    sim::run_simulation(&cfg, &mut captures).unwrap();
    let shots: Vec<(radstack_core::EventClass, f64, bool)> = captures
        .iter()
        .flat_map(|c| c.shots.iter().map(|s| (c.class, s.t_rel_us, s.outcome)))
        .collect();
    let curves = analysis::post_event_population(&shots, cfg.schedule.period_us);
    for (class, curve) in &curves {
        println!("== {class:?}");
        for (t, m, s, n) in curve.points().iter().take(12) {
            println!("  t {t:>6.1} mean {m:.4} sigma {s:.4} n {n}");
        }
        let late = curve.late_mean(0.25);
        println!("  late mean {late:?}");
    }
}

#[test]
#[ignore]
fn calibrate_tau_multi_seed() {
    for kind in [ShotKind::T1, ShotKind::T2] {
        let mut taus = Vec::new();
        for seed in 10..15 {
            let (tau, ..) = dual_tau(kind, seed, 16.0);
            taus.push(tau);
        }
        let mean: f64 = taus.iter().sum::<f64>() / taus.len() as f64;
        println!("kind {kind:?}: mean tau {mean:.2}, all {taus:?}");
    }
}

#[test]
#[ignore]
fn tau_estimator_variance_on_synthetic_t2() {
    use radstack_core::rng::{uniform01, RngFactory, Stream};
    use radstack_core::stats::MomentAccumulator;
    let f = RngFactory::new(77);
    for (amp, n_per_bin) in [(0.17_f64, 1200_u64), (0.17, 3600), (0.28, 1200), (0.28, 3600)] {
        let mut taus = Vec::new();
        for rep in 0..30u64 {
            let mut rng = f.stream(Stream::Shots, 1000 + rep);
            let mut bins = Vec::new();
            for k in 0..50 {
                let t = 12.0 + 11.2 * k as f64;
                let p = 0.5 - amp * (-t / 25.0f64).exp();
                let mut acc = MomentAccumulator::default();
                for _ in 0..n_per_bin {
                    acc.push((uniform01(&mut rng) < p) as u8 as f64);
                }
                bins.push(acc);
            }
            // bin width such that bin k center lands at the shot time
            let curve = analysis::PopulationCurve { bin_width_us: 11.2, bins };
            let fit = analysis::fit_recovery(ShotKind::T2, &curve).unwrap();
            taus.push(fit.tau_us);
        }
        let mean: f64 = taus.iter().sum::<f64>() / taus.len() as f64;
        let var: f64 = taus.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (taus.len() - 1) as f64;
        println!("amp {amp} n {n_per_bin}: tau mean {mean:.2} std {:.2}", var.sqrt());
    }
}
