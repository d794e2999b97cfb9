//! Three-layer chip stack geometry and muon trajectory sampling.
//!
//! The stack is three axis-aligned box-shaped chips sharing a vertical axis:
//! a top detector array, the qubit chip, and a bottom detector array. Muon
//! trajectories are straight lines sampled on a generating plane above the
//! stack with the sea-level cos²θ zenith law.

use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Sub};

use rand_core::RngCore;

use crate::math;
use crate::rng;

/// Default chip side length (mm).
pub const DEFAULT_LATERAL_MM: f64 = 20.0;
/// Default chip thickness (mm).
pub const DEFAULT_THICKNESS_MM: f64 = 0.65;
/// Default free gap between neighbouring chips (mm). Chosen so that the
/// derived acceptance half-angle of the default stack is 56.95°, i.e. a
/// 113.9° opening angle; the angle, not the spacing, is the published
/// constraint. See [`derive_half_angle`].
pub const DEFAULT_GAP_MM: f64 = 8.876_566_269_976_902;
/// Half-angle of the default stack (degrees).
pub const DEFAULT_HALF_ANGLE_DEG: f64 = 56.95;
/// Default lateral size of the qubit device chip (mm). The detector
/// substrates are published at 20 mm; the qubit chip is smaller so that a
/// track through it almost always continues into both detector arrays.
pub const DEFAULT_QUBIT_LATERAL_MM: f64 = 10.0;
/// The generating plane for muon entry points extends this factor times the
/// top chip's lateral size.
pub const GENERATING_PLANE_FACTOR: f64 = 1.1;
/// Height of the generating plane above the top face of the top chip (mm).
pub const GENERATING_PLANE_LIFT_MM: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    /// Chip dimensions or grid are non-positive.
    InvalidChip,
    /// The stack does not consist of a top detector, qubit, bottom detector
    /// sharing one vertical axis, in that order.
    InvalidStack,
    /// Outer chips coincide with the qubit plane; no acceptance angle exists.
    DegenerateStack,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::InvalidChip => write!(f, "chip dimensions and pixel grid must be positive"),
            GeometryError::InvalidStack => {
                write!(f, "stack must be top detector / qubit / bottom detector on one vertical axis")
            }
            GeometryError::DegenerateStack => write!(f, "stack has zero height; half angle undefined"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GeometryError {}

/// Minimal 3-vector in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(self) -> f64 {
        math::sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Position of a chip within the stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChipRole {
    TopDetector,
    Qubit,
    BottomDetector,
}

impl ChipRole {
    pub const ALL: [ChipRole; 3] = [ChipRole::TopDetector, ChipRole::Qubit, ChipRole::BottomDetector];

    /// Index in top→bottom order.
    pub fn slot(self) -> usize {
        match self {
            ChipRole::TopDetector => 0,
            ChipRole::Qubit => 1,
            ChipRole::BottomDetector => 2,
        }
    }
}

/// One axis-aligned box-shaped chip.
#[derive(Debug, Clone, PartialEq)]
pub struct ChipGeometry {
    /// Center of the box (mm).
    pub center: Vec3,
    /// Full lateral size along x and y (mm).
    pub lateral_mm: [f64; 2],
    /// Full thickness along z (mm).
    pub thickness_mm: f64,
    /// Detector pixel grid (rows × cols); 1×1 for the qubit chip.
    pub pixel_grid: [usize; 2],
    pub role: ChipRole,
}

impl ChipGeometry {
    pub fn new(center: Vec3, lateral_mm: [f64; 2], thickness_mm: f64, pixel_grid: [usize; 2], role: ChipRole) -> Result<Self, GeometryError> {
        let chip = Self { center, lateral_mm, thickness_mm, pixel_grid, role };
        chip.validate()?;
        Ok(chip)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.lateral_mm[0] <= 0.0
            || self.lateral_mm[1] <= 0.0
            || self.thickness_mm <= 0.0
            || self.pixel_grid[0] < 1
            || self.pixel_grid[1] < 1
        {
            return Err(GeometryError::InvalidChip);
        }
        Ok(())
    }

    pub fn half_extent(&self) -> [f64; 2] {
        [self.lateral_mm[0] * 0.5, self.lateral_mm[1] * 0.5]
    }

    pub fn z_top(&self) -> f64 {
        self.center.z + self.thickness_mm * 0.5
    }

    pub fn z_bottom(&self) -> f64 {
        self.center.z - self.thickness_mm * 0.5
    }

    pub fn pixel_count(&self) -> usize {
        self.pixel_grid[0] * self.pixel_grid[1]
    }

    /// Lateral substrate area in cm².
    pub fn area_cm2(&self) -> f64 {
        self.lateral_mm[0] * self.lateral_mm[1] / 100.0
    }

    /// Pixel centers in row-major order, laid out on a uniform grid.
    pub fn pixel_centers(&self) -> Vec<Vec3> {
        let [rows, cols] = self.pixel_grid;
        let [hx, hy] = self.half_extent();
        let dx = self.lateral_mm[0] / cols as f64;
        let dy = self.lateral_mm[1] / rows as f64;
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                out.push(Vec3::new(
                    self.center.x - hx + dx * (c as f64 + 0.5),
                    self.center.y - hy + dy * (r as f64 + 0.5),
                    self.center.z,
                ));
            }
        }
        out
    }
}

/// The full three-chip stack, ordered top → qubit → bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct StackGeometry {
    chips: [ChipGeometry; 3],
}

impl StackGeometry {
    pub fn new(top: ChipGeometry, qubit: ChipGeometry, bottom: ChipGeometry) -> Result<Self, GeometryError> {
        for c in [&top, &qubit, &bottom] {
            c.validate()?;
        }
        let ok = top.role == ChipRole::TopDetector
            && qubit.role == ChipRole::Qubit
            && bottom.role == ChipRole::BottomDetector
            && top.z_bottom() >= qubit.z_top()
            && qubit.z_bottom() >= bottom.z_top();
        let aligned = (top.center.x - qubit.center.x).abs() < 1e-9
            && (top.center.y - qubit.center.y).abs() < 1e-9
            && (bottom.center.x - qubit.center.x).abs() < 1e-9
            && (bottom.center.y - qubit.center.y).abs() < 1e-9;
        if !ok || !aligned {
            return Err(GeometryError::InvalidStack);
        }
        Ok(Self { chips: [top, qubit, bottom] })
    }

    /// Default stack: 20×20×0.65 mm detector chips in 3×3 arrays around a
    /// smaller qubit chip, gaps chosen for a 56.95° half-angle.
    pub fn default_stack() -> Self {
        Self::with_dimensions(
            DEFAULT_LATERAL_MM,
            DEFAULT_QUBIT_LATERAL_MM,
            DEFAULT_THICKNESS_MM,
            DEFAULT_GAP_MM,
            3,
        )
    }

    /// Stack of three square chips with equal gaps and `grid`×`grid` detector
    /// arrays, qubit chip centered at the origin.
    pub fn with_dimensions(
        detector_lateral_mm: f64,
        qubit_lateral_mm: f64,
        thickness_mm: f64,
        gap_mm: f64,
        grid: usize,
    ) -> Self {
        let dz = gap_mm + thickness_mm;
        let chip = |z: f64, lateral: f64, grid: [usize; 2], role: ChipRole| ChipGeometry {
            center: Vec3::new(0.0, 0.0, z),
            lateral_mm: [lateral, lateral],
            thickness_mm,
            pixel_grid: grid,
            role,
        };
        Self {
            chips: [
                chip(dz, detector_lateral_mm, [grid, grid], ChipRole::TopDetector),
                chip(0.0, qubit_lateral_mm, [1, 1], ChipRole::Qubit),
                chip(-dz, detector_lateral_mm, [grid, grid], ChipRole::BottomDetector),
            ],
        }
    }

    pub fn chips(&self) -> &[ChipGeometry; 3] {
        &self.chips
    }

    pub fn chip(&self, role: ChipRole) -> &ChipGeometry {
        &self.chips[role.slot()]
    }

    /// Free gaps between neighbouring chips (top↔qubit, qubit↔bottom), mm.
    pub fn vertical_gaps(&self) -> [f64; 2] {
        [
            self.chips[0].z_bottom() - self.chips[1].z_top(),
            self.chips[1].z_bottom() - self.chips[2].z_top(),
        ]
    }

    /// The horizontal plane on which muon entry points are generated:
    /// `(z, half_x, half_y)`.
    pub fn generating_plane(&self) -> (f64, f64, f64) {
        let top = &self.chips[0];
        (
            top.z_top() + GENERATING_PLANE_LIFT_MM,
            top.lateral_mm[0] * 0.5 * GENERATING_PLANE_FACTOR,
            top.lateral_mm[1] * 0.5 * GENERATING_PLANE_FACTOR,
        )
    }

    /// Generating plane area in cm².
    pub fn generating_plane_area_cm2(&self) -> f64 {
        let (_, hx, hy) = self.generating_plane();
        4.0 * hx * hy / 100.0
    }
}

/// A straight downward-going particle track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    /// Entry point on the generating plane (mm).
    pub entry: Vec3,
    /// Zenith angle in radians, `0 ≤ zenith < π/2`.
    pub zenith: f64,
    /// Azimuth angle in radians, `0 ≤ azimuth < 2π`.
    pub azimuth: f64,
}

impl Trajectory {
    /// Unit direction of travel (downward).
    pub fn direction(&self) -> Vec3 {
        let s = math::sin(self.zenith);
        Vec3::new(
            s * math::cos(self.azimuth),
            s * math::sin(self.azimuth),
            -math::cos(self.zenith),
        )
    }

    /// Point at ray parameter `t` (mm along the unit direction).
    pub fn at(&self, t: f64) -> Vec3 {
        self.entry + self.direction() * t
    }
}

/// Chord of a trajectory through one chip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChipHit {
    pub role: ChipRole,
    pub entry: Vec3,
    pub exit: Vec3,
    /// Chord length inside the chip (mm).
    pub path_mm: f64,
}

/// Per-chip intersection results in top→bottom order; misses are absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChipHits {
    pub hits: Vec<ChipHit>,
}

impl ChipHits {
    pub fn get(&self, role: ChipRole) -> Option<&ChipHit> {
        self.hits.iter().find(|h| h.role == role)
    }

    pub fn pierces(&self, role: ChipRole) -> bool {
        self.get(role).is_some()
    }

    pub fn pierces_both_detectors(&self) -> bool {
        self.pierces(ChipRole::TopDetector) && self.pierces(ChipRole::BottomDetector)
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

/// Angular intensity of sea-level muons (unnormalized, without the solid
/// angle Jacobian): `cos²θ`.
pub fn zenith_intensity(zenith: f64) -> f64 {
    let c = math::cos(zenith);
    c * c
}

/// Maximum zenith angle (degrees) at which a straight line through the
/// qubit-chip center can pierce both outer chips.
///
/// Over all azimuths the most permissive direction points at a corner of the
/// outer chips, so the limit is set by the half-diagonal over the distance
/// from the qubit center to the nearer face of each outer chip.
pub fn derive_half_angle(stack: &StackGeometry) -> Result<f64, GeometryError> {
    let apex = stack.chip(ChipRole::Qubit).center;
    let mut limit = f64::INFINITY;
    for role in [ChipRole::TopDetector, ChipRole::BottomDetector] {
        let chip = stack.chip(role);
        let dz = match role {
            ChipRole::TopDetector => chip.z_bottom() - apex.z,
            _ => apex.z - chip.z_top(),
        };
        if dz <= 0.0 {
            return Err(GeometryError::DegenerateStack);
        }
        let [hx, hy] = chip.half_extent();
        let reach = math::hypot(hx, hy);
        limit = limit.min(math::atan(reach / dz));
    }
    Ok(math::to_degrees(limit))
}

/// Samples one muon trajectory: entry point uniform on the generating plane,
/// zenith by inverse CDF of the cos²θ·sinθ law, azimuth uniform.
pub fn sample_muon_trajectory<R: RngCore>(stack: &StackGeometry, rng: &mut R) -> Trajectory {
    let (z, hx, hy) = stack.generating_plane();
    let x = rng::uniform(rng, -hx, hx);
    let y = rng::uniform(rng, -hy, hy);
    // CDF of cos²θ sinθ on [0, π/2) is 1 - cos³θ.
    let u = rng::uniform01(rng);
    let zenith = math::acos(math::cbrt(1.0 - u));
    let azimuth = rng::uniform(rng, 0.0, math::TAU);
    Trajectory { entry: Vec3::new(x, y, z), zenith, azimuth }
}

/// Exact ray/box intersection of a trajectory with every chip of the stack,
/// reported in top→bottom order.
pub fn intersect(traj: &Trajectory, stack: &StackGeometry) -> ChipHits {
    let dir = traj.direction();
    let mut hits = Vec::new();
    for chip in stack.chips() {
        if let Some((t0, t1)) = ray_box(traj.entry, dir, chip) {
            if t1 > t0 {
                hits.push(ChipHit {
                    role: chip.role,
                    entry: traj.at(t0),
                    exit: traj.at(t1),
                    path_mm: t1 - t0,
                });
            }
        }
    }
    ChipHits { hits }
}

/// Slab-method ray/box intersection; returns the `[t0, t1]` parameter range
/// of the overlap (ray restricted to `t ≥ 0`), or `None` on a miss.
fn ray_box(origin: Vec3, dir: Vec3, chip: &ChipGeometry) -> Option<(f64, f64)> {
    let [hx, hy] = chip.half_extent();
    let lo = [chip.center.x - hx, chip.center.y - hy, chip.z_bottom()];
    let hi = [chip.center.x + hx, chip.center.y + hy, chip.z_top()];
    let o = [origin.x, origin.y, origin.z];
    let d = [dir.x, dir.y, dir.z];
    let mut t0 = 0.0_f64;
    let mut t1 = f64::INFINITY;
    for axis in 0..3 {
        if math::abs(d[axis]) < 1e-300 {
            if o[axis] < lo[axis] || o[axis] > hi[axis] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[axis];
        let (ta, tb) = {
            let a = (lo[axis] - o[axis]) * inv;
            let b = (hi[axis] - o[axis]) * inv;
            if a <= b {
                (a, b)
            } else {
                (b, a)
            }
        };
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return None;
        }
    }
    Some((t0, t1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::rng::{RngFactory, Stream};

    #[test]
    fn default_stack_half_angle_is_published_value() {
        let stack = StackGeometry::default_stack();
        let half = derive_half_angle(&stack).unwrap();
        assert!((half - DEFAULT_HALF_ANGLE_DEG).abs() < 0.1, "half angle {half}");
        // Opening angle.
        assert!((2.0 * half - 113.9).abs() < 0.2);
    }

    #[test]
    fn half_angle_vanishes_for_tall_stacks() {
        let stack = StackGeometry::with_dimensions(20.0, 8.0, 0.65, 1.0e7, 3);
        let half = derive_half_angle(&stack).unwrap();
        assert!(half < 1e-4);
    }

    #[test]
    fn degenerate_stack_is_rejected() {
        // Collapsed spacing: all three chips on the same plane.
        let stack = StackGeometry::with_dimensions(20.0, 8.0, 0.65, -0.65, 3);
        assert_eq!(derive_half_angle(&stack), Err(GeometryError::DegenerateStack));
    }

    #[test]
    fn vertical_trajectory_pierces_all_chips_with_thickness_chords() {
        let stack = StackGeometry::default_stack();
        let (z, ..) = stack.generating_plane();
        let traj = Trajectory { entry: Vec3::new(0.0, 0.0, z), zenith: 0.0, azimuth: 0.0 };
        let hits = intersect(&traj, &stack);
        assert_eq!(hits.hits.len(), 3);
        assert_eq!(hits.hits[0].role, ChipRole::TopDetector);
        assert_eq!(hits.hits[2].role, ChipRole::BottomDetector);
        for hit in &hits.hits {
            assert_relative_eq!(hit.path_mm, 0.65, epsilon = 1e-12);
        }
    }

    #[test]
    fn oblique_chord_is_thickness_over_cosine() {
        let stack = StackGeometry::default_stack();
        let zen = math::to_radians(45.0);
        // Aim so the track passes the top chip center: offset the entry point.
        let (zp, ..) = stack.generating_plane();
        let top_center_z = stack.chip(ChipRole::TopDetector).center.z;
        let lever = (zp - top_center_z) * math::tan(zen);
        let traj = Trajectory { entry: Vec3::new(-lever, 0.0, zp), zenith: zen, azimuth: 0.0 };
        let hits = intersect(&traj, &stack);
        let top = hits.get(ChipRole::TopDetector).expect("top pierced");
        assert_relative_eq!(top.path_mm, 0.65 / math::cos(zen), epsilon = 1e-9);
    }

    #[test]
    fn zenith_intensity_ratio_is_four_at_sixty_degrees() {
        let r = zenith_intensity(0.0) / zenith_intensity(math::to_radians(60.0));
        assert_relative_eq!(r, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn sampled_zenith_mean_matches_quadrature() {
        // Oracle: ∫θcos²θsinθdθ / ∫cos²θsinθdθ by Simpson quadrature.
        let n = 20_000;
        let h = (math::PI / 2.0) / n as f64;
        let f = |t: f64| zenith_intensity(t) * math::sin(t);
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..=n {
            let t = i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            num += w * t * f(t);
            den += w * f(t);
        }
        let expected = num / den;

        let stack = StackGeometry::default_stack();
        let factory = RngFactory::new(101);
        let mut rng = factory.stream(Stream::MuonTimeline, 0);
        let n_draws = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n_draws {
            sum += sample_muon_trajectory(&stack, &mut rng).zenith;
        }
        let mean = sum / n_draws as f64;
        assert!((mean - expected).abs() / expected < 0.005, "mean {mean} vs {expected}");
    }

    #[test]
    fn sampled_azimuth_is_uniform() {
        let stack = StackGeometry::default_stack();
        let factory = RngFactory::new(202);
        let mut rng = factory.stream(Stream::MuonTimeline, 0);
        let mut counts = [0u64; 24];
        for _ in 0..100_000 {
            let t = sample_muon_trajectory(&stack, &mut rng);
            let bin = ((t.azimuth / math::TAU) * 24.0) as usize;
            counts[bin.min(23)] += 1;
        }
        let (_, p) = crate::stats::chi2_uniform_test(&counts);
        assert!(p > 0.001, "p = {p}");
    }

    #[test]
    fn entries_cover_plane_larger_than_top_chip() {
        let stack = StackGeometry::default_stack();
        let factory = RngFactory::new(303);
        let mut rng = factory.stream(Stream::MuonTimeline, 0);
        let mut beyond = 0;
        for _ in 0..10_000 {
            let t = sample_muon_trajectory(&stack, &mut rng);
            if math::abs(t.entry.x) > 10.0 || math::abs(t.entry.y) > 10.0 {
                beyond += 1;
            }
        }
        // Plane is 40×40 around a 20×20 chip → 3/4 of entries fall outside
        // the chip footprint.
        assert!(beyond > 7_000);
    }
}
