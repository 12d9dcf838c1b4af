//! Garment templates and crumpled instances.
//!
//! A garment is a rectangular particle grid with three spring families:
//! structural springs between grid neighbors, shear springs across cell
//! diagonals, and bend springs between skip-one neighbors. Categories differ
//! only in grid aspect ratio and size; that is enough to expose the behaviors
//! the rest of the system cares about (edges that drape, interiors that
//! hold shape, dangling under gravity).

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::SceneRng;
use crate::{Pose, Vec3};

/// Garment category label. Metadata only: it never changes the physics
/// beyond the grid dimensions chosen for it in the template pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Category {
    Top = 0,
    Trousers = 1,
    Scarf = 2,
    Glove = 3,
    Dress = 4,
    Hat = 5,
    Underpants = 6,
    Skirt = 7,
    Onesie = 8,
}

impl Category {
    pub const ALL: [Category; 9] = [
        Category::Top,
        Category::Trousers,
        Category::Scarf,
        Category::Glove,
        Category::Dress,
        Category::Hat,
        Category::Underpants,
        Category::Skirt,
        Category::Onesie,
    ];

    pub fn from_u8(v: u8) -> Result<Self> {
        Self::ALL
            .get(v as usize)
            .copied()
            .ok_or_else(|| Error::format(alloc::format!("unknown category code {v}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Top => "top",
            Category::Trousers => "trousers",
            Category::Scarf => "scarf",
            Category::Glove => "glove",
            Category::Dress => "dress",
            Category::Hat => "hat",
            Category::Underpants => "underpants",
            Category::Skirt => "skirt",
            Category::Onesie => "onesie",
        }
    }
}

/// Mass and stiffness constants shared by the spring families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffnessProfile {
    pub particle_mass: f64,
    pub k_struct: f64,
    pub k_shear: f64,
    pub k_bend: f64,
}

impl Default for StiffnessProfile {
    fn default() -> Self {
        StiffnessProfile {
            particle_mass: 0.01,
            k_struct: 80.0,
            k_shear: 40.0,
            k_bend: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum SpringKind {
    Structural = 0,
    Shear = 1,
    Bend = 2,
}

/// One spring between particles `a` and `b` of the same garment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spring {
    pub a: u32,
    pub b: u32,
    pub rest: f64,
    pub stiffness: f64,
    pub kind: SpringKind,
}

/// Immutable description of a garment: grid size, spacing, and constants.
#[derive(Debug, Clone, PartialEq)]
pub struct GarmentTemplate {
    pub template_id: u32,
    pub category: Category,
    pub rows: u32,
    pub cols: u32,
    pub spacing: f64,
    pub particle_mass: f64,
    pub k_struct: f64,
    pub k_shear: f64,
    pub k_bend: f64,
}

impl GarmentTemplate {
    /// Builds a template, validating grid dimensions and constants.
    pub fn new(
        template_id: u32,
        category: Category,
        rows: u32,
        cols: u32,
        spacing: f64,
        profile: StiffnessProfile,
    ) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::invalid(alloc::format!(
                "garment grid must be at least 2x2, got {rows}x{cols}"
            )));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::invalid("spacing must be > 0"));
        }
        if !(profile.particle_mass > 0.0) {
            return Err(Error::invalid("particle_mass must be > 0"));
        }
        if !(profile.k_struct > 0.0) || !(profile.k_shear > 0.0) || !(profile.k_bend > 0.0) {
            return Err(Error::invalid("spring stiffnesses must be > 0"));
        }
        Ok(GarmentTemplate {
            template_id,
            category,
            rows,
            cols,
            spacing,
            particle_mass: profile.particle_mass,
            k_struct: profile.k_struct,
            k_shear: profile.k_shear,
            k_bend: profile.k_bend,
        })
    }

    pub fn particle_count(&self) -> usize {
        (self.rows * self.cols) as usize
    }

    fn index(&self, r: u32, c: u32) -> u32 {
        r * self.cols + c
    }

    /// Flat-grid local position of particle (r, c), centered at the origin.
    pub fn local_position(&self, r: u32, c: u32) -> Vec3 {
        let half_w = (self.cols - 1) as f64 * self.spacing * 0.5;
        let half_h = (self.rows - 1) as f64 * self.spacing * 0.5;
        Vec3::new(
            c as f64 * self.spacing - half_w,
            r as f64 * self.spacing - half_h,
            0.0,
        )
    }

    /// Enumerates the full spring list in a fixed order: structural, then
    /// shear, then bend, row-major within each family.
    pub fn springs(&self) -> Vec<Spring> {
        let (rows, cols, s) = (self.rows, self.cols, self.spacing);
        let mut out = Vec::with_capacity(
            Self::structural_count(rows, cols)
                + Self::shear_count(rows, cols)
                + Self::bend_count(rows, cols),
        );
        let push = |out: &mut Vec<Spring>, a: u32, b: u32, rest: f64, k: f64, kind: SpringKind| {
            out.push(Spring { a, b, rest, stiffness: k, kind });
        };
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    push(&mut out, self.index(r, c), self.index(r, c + 1), s, self.k_struct, SpringKind::Structural);
                }
                if r + 1 < rows {
                    push(&mut out, self.index(r, c), self.index(r + 1, c), s, self.k_struct, SpringKind::Structural);
                }
            }
        }
        let diag = s * core::f64::consts::SQRT_2;
        for r in 0..rows.saturating_sub(1) {
            for c in 0..cols.saturating_sub(1) {
                push(&mut out, self.index(r, c), self.index(r + 1, c + 1), diag, self.k_shear, SpringKind::Shear);
                push(&mut out, self.index(r, c + 1), self.index(r + 1, c), diag, self.k_shear, SpringKind::Shear);
            }
        }
        for r in 0..rows {
            for c in 0..cols {
                if c + 2 < cols {
                    push(&mut out, self.index(r, c), self.index(r, c + 2), 2.0 * s, self.k_bend, SpringKind::Bend);
                }
                if r + 2 < rows {
                    push(&mut out, self.index(r, c), self.index(r + 2, c), 2.0 * s, self.k_bend, SpringKind::Bend);
                }
            }
        }
        out
    }

    /// Closed-form spring counts, used to cross-check the enumeration.
    pub fn structural_count(rows: u32, cols: u32) -> usize {
        (rows * (cols - 1) + cols * (rows - 1)) as usize
    }

    pub fn shear_count(rows: u32, cols: u32) -> usize {
        (2 * (rows - 1) * (cols - 1)) as usize
    }

    pub fn bend_count(rows: u32, cols: u32) -> usize {
        (rows * cols.saturating_sub(2) + cols * rows.saturating_sub(2)) as usize
    }

    /// Longest in-cloth path (meters), an upper bound on how far any part can
    /// dangle below a grasp point.
    pub fn diagonal(&self) -> f64 {
        let w = (self.cols - 1) as f64 * self.spacing;
        let h = (self.rows - 1) as f64 * self.spacing;
        (w * w + h * h).sqrt()
    }
}

/// A garment placed in a scene: particle state plus its spring list.
#[derive(Debug, Clone, PartialEq)]
pub struct GarmentInstance {
    pub template: GarmentTemplate,
    pub garment_id: u32,
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub springs: Vec<Spring>,
}

impl GarmentInstance {
    /// Total mass of the garment (kg).
    pub fn mass(&self) -> f64 {
        self.template.particle_mass * self.positions.len() as f64
    }

    /// Mean particle position.
    pub fn centroid(&self) -> Vec3 {
        let mut sum = Vec3::zeros();
        for p in &self.positions {
            sum += p;
        }
        sum / self.positions.len() as f64
    }
}

/// Instantiates a template under a rigid pose with a seeded crumple.
///
/// Each particle of the flat grid is perturbed by an independent uniform
/// offset in `[-amplitude, amplitude]^3` before the pose is applied, so the
/// same `(template, pose, amplitude, seed)` always yields a bit-identical
/// instance. Velocities start at zero.
pub fn instantiate(
    template: &GarmentTemplate,
    garment_id: u32,
    pose: &Pose,
    crumple_amplitude: f64,
    seed: u64,
) -> Result<GarmentInstance> {
    if !(crumple_amplitude >= 0.0) || !crumple_amplitude.is_finite() {
        return Err(Error::invalid("crumple_amplitude must be >= 0"));
    }
    let p = template.particle_count();
    let mut rng = SceneRng::from_seed(seed);
    let mut positions = Vec::with_capacity(p);
    for r in 0..template.rows {
        for c in 0..template.cols {
            let mut local = template.local_position(r, c);
            if crumple_amplitude > 0.0 {
                local.x += rng.uniform(-crumple_amplitude, crumple_amplitude);
                local.y += rng.uniform(-crumple_amplitude, crumple_amplitude);
                local.z += rng.uniform(-crumple_amplitude, crumple_amplitude);
            }
            positions.push(pose.rotation * local + pose.translation.vector);
        }
    }
    Ok(GarmentInstance {
        template: template.clone(),
        garment_id,
        positions,
        velocities: alloc::vec![Vec3::zeros(); p],
        springs: template.springs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn template(rows: u32, cols: u32) -> GarmentTemplate {
        GarmentTemplate::new(0, Category::Top, rows, cols, 0.05, StiffnessProfile::default())
            .unwrap()
    }

    #[test]
    fn smallest_grid_spring_counts() {
        // 2x2: 4 structural, 2 shear, no bend (bend needs a skip-one pair).
        let t = template(2, 2);
        let springs = t.springs();
        assert_eq!(t.particle_count(), 4);
        let count = |k: SpringKind| springs.iter().filter(|s| s.kind == k).count();
        assert_eq!(count(SpringKind::Structural), 4);
        assert_eq!(count(SpringKind::Shear), 2);
        assert_eq!(count(SpringKind::Bend), 0);
    }

    #[test]
    fn three_by_three_spring_counts() {
        // Enumerated by hand: 12 structural grid edges, 8 diagonals, 6 skips.
        let t = template(3, 3);
        let springs = t.springs();
        assert_eq!(t.particle_count(), 9);
        let count = |k: SpringKind| springs.iter().filter(|s| s.kind == k).count();
        assert_eq!(count(SpringKind::Structural), 12);
        assert_eq!(count(SpringKind::Shear), 8);
        assert_eq!(count(SpringKind::Bend), 6);
    }

    #[test]
    fn closed_form_counts_match_enumeration() {
        for (rows, cols) in [(2u32, 2u32), (2, 7), (3, 12), (8, 8), (10, 5)] {
            let t = template(rows, cols);
            let springs = t.springs();
            let count = |k: SpringKind| springs.iter().filter(|s| s.kind == k).count();
            assert_eq!(count(SpringKind::Structural), GarmentTemplate::structural_count(rows, cols));
            assert_eq!(count(SpringKind::Shear), GarmentTemplate::shear_count(rows, cols));
            assert_eq!(count(SpringKind::Bend), GarmentTemplate::bend_count(rows, cols));
        }
    }

    #[test]
    fn rejects_degenerate_dimensions() {
        assert!(GarmentTemplate::new(0, Category::Top, 1, 3, 0.05, StiffnessProfile::default()).is_err());
        assert!(GarmentTemplate::new(0, Category::Top, 3, 1, 0.05, StiffnessProfile::default()).is_err());
        assert!(GarmentTemplate::new(0, Category::Top, 3, 3, 0.0, StiffnessProfile::default()).is_err());
        let bad = StiffnessProfile { k_bend: -1.0, ..StiffnessProfile::default() };
        assert!(GarmentTemplate::new(0, Category::Top, 3, 3, 0.05, bad).is_err());
    }

    #[test]
    fn spring_rest_lengths_are_exact() {
        let t = template(4, 4);
        for s in t.springs() {
            let expected = match s.kind {
                SpringKind::Structural => 0.05,
                SpringKind::Shear => 0.05 * core::f64::consts::SQRT_2,
                SpringKind::Bend => 0.10,
            };
            assert_eq!(s.rest, expected);
            assert!(s.rest > 0.0);
            assert!(s.a != s.b);
            assert!((s.a as usize) < t.particle_count() && (s.b as usize) < t.particle_count());
        }
    }

    #[test]
    fn zero_crumple_identity_pose_is_flat_grid() {
        let t = template(3, 4);
        let g = instantiate(&t, 0, &Pose::identity(), 0.0, 123).unwrap();
        for r in 0..3 {
            for c in 0..4 {
                let p = g.positions[(r * 4 + c) as usize];
                assert_eq!(p, t.local_position(r, c));
                assert_eq!(p.z, 0.0);
            }
        }
        assert!(g.velocities.iter().all(|v| *v == Vec3::zeros()));
    }

    #[test]
    fn instantiate_is_deterministic() {
        let t = template(5, 6);
        let pose = Pose::translation(0.1, -0.2, 0.5);
        let a = instantiate(&t, 3, &pose, 0.02, 7).unwrap();
        let b = instantiate(&t, 3, &pose, 0.02, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn crumple_offsets_are_bounded() {
        let t = template(6, 6);
        let pose = Pose::identity();
        let g = instantiate(&t, 0, &pose, 0.02, 7).unwrap();
        let bound = 0.02 * 3f64.sqrt() + 1e-12;
        for r in 0..6 {
            for c in 0..6 {
                let d = g.positions[(r * 6 + c) as usize] - t.local_position(r, c);
                assert!(d.norm() <= bound, "offset {} exceeds bound", d.norm());
            }
        }
    }
}
