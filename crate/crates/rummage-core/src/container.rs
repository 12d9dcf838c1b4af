//! The three container scenarios and their geometry.
//!
//! Each scenario is a small set of analytic collision surfaces (axis-aligned
//! boxes, a horizontal drum, a faceplate with a circular opening) on top of a
//! world floor at `z = 0`, plus an exit region where retrieved garments get
//! dropped. The same shapes serve three roles: penalty contacts for the
//! integrator, occluders for the depth-style renderer, and the containment
//! predicate used by outcome judging.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::SceneRng;
use crate::Vec3;

/// Scene family. Numeric codes are part of the snapshot format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Scenario {
    WashingMachine = 0,
    Basket = 1,
    Sofa = 2,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::WashingMachine, Scenario::Basket, Scenario::Sofa];

    pub fn from_u8(v: u8) -> Result<Self> {
        Self::ALL
            .get(v as usize)
            .copied()
            .ok_or_else(|| Error::format(alloc::format!("unknown scenario code {v}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::WashingMachine => "washing-machine",
            Scenario::Basket => "basket",
            Scenario::Sofa => "sofa",
        }
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    fn closest_point(&self, p: &Vec3) -> Vec3 {
        Vec3::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
            p.z.clamp(self.min.z, self.max.z),
        )
    }

    /// Sphere-vs-box contact. Returns (outward normal, overlap depth).
    pub fn sphere_contact(&self, p: &Vec3, r: f64) -> Option<(Vec3, f64)> {
        let cp = self.closest_point(p);
        let d = p - cp;
        let d2 = d.norm_squared();
        if d2 > 0.0 {
            let dist = d2.sqrt();
            if dist < r {
                return Some((d / dist, r - dist));
            }
            return None;
        }
        // Center inside the box: push out along the least-penetrated face.
        let mut best_depth = f64::INFINITY;
        let mut normal = Vec3::zeros();
        let axes = [Vec3::x(), Vec3::y(), Vec3::z()];
        for (i, axis) in axes.iter().enumerate() {
            let lo = p[i] - self.min[i];
            let hi = self.max[i] - p[i];
            if lo < best_depth {
                best_depth = lo;
                normal = -axis;
            }
            if hi < best_depth {
                best_depth = hi;
                normal = *axis;
            }
        }
        Some((normal, r + best_depth))
    }

    /// Slab-method ray intersection; returns entry distance if the ray hits.
    pub fn ray_hit(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let mut tmin = 0.0f64;
        let mut tmax = f64::INFINITY;
        for i in 0..3 {
            if dir[i].abs() < 1e-15 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
            } else {
                let inv = 1.0 / dir[i];
                let mut t0 = (self.min[i] - origin[i]) * inv;
                let mut t1 = (self.max[i] - origin[i]) * inv;
                if t0 > t1 {
                    core::mem::swap(&mut t0, &mut t1);
                }
                tmin = tmin.max(t0);
                tmax = tmax.min(t1);
                if tmin > tmax {
                    return None;
                }
            }
        }
        if tmin > 1e-9 {
            Some(tmin)
        } else {
            None
        }
    }
}

/// Scenario-specific solid geometry.
#[derive(Debug, Clone, PartialEq)]
pub enum ContainerShape {
    /// Horizontal drum, axis along +y, circular opening facing +y in a flat
    /// faceplate at `face_y`. Interior spans `y in [face_y - depth, face_y]`.
    WashingMachine {
        drum_radius: f64,
        drum_depth: f64,
        axis_height: f64,
        face_y: f64,
        /// Radius of the circular opening; smaller than the drum radius so
        /// the faceplate forms a retaining lip like a real machine door.
        opening_radius: f64,
        /// Faceplate extent (the solid panel around the opening).
        face_half_width: f64,
        face_top: f64,
    },
    /// Open-top box: floor slab plus four walls.
    Basket {
        half_width: f64,
        half_depth: f64,
        wall_height: f64,
        wall_thickness: f64,
        floor_top: f64,
    },
    /// Seat slab, back slab, and two arm slabs; open towards -y and +z.
    Sofa {
        seat_half_w: f64,
        seat_half_d: f64,
        seat_height: f64,
        back_height: f64,
        arm_height: f64,
        slab_thickness: f64,
    },
}

/// A container: solid shape plus the exit region garments are delivered to.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub scenario: Scenario,
    pub shape: ContainerShape,
    pub exit_region: Aabb,
}

impl Container {
    /// Desk-scale default geometry for a scenario.
    pub fn standard(scenario: Scenario) -> Self {
        match scenario {
            Scenario::WashingMachine => Container {
                scenario,
                shape: ContainerShape::WashingMachine {
                    drum_radius: 0.30,
                    drum_depth: 0.50,
                    axis_height: 0.45,
                    face_y: 0.0,
                    opening_radius: 0.20,
                    face_half_width: 0.45,
                    face_top: 0.90,
                },
                exit_region: Aabb::new(Vec3::new(-0.40, 0.45, 0.0), Vec3::new(0.40, 1.15, 0.70)),
            },
            Scenario::Basket => Container {
                scenario,
                shape: ContainerShape::Basket {
                    half_width: 0.25,
                    half_depth: 0.25,
                    wall_height: 0.32,
                    wall_thickness: 0.03,
                    floor_top: 0.03,
                },
                exit_region: Aabb::new(Vec3::new(0.70, -0.35, 0.0), Vec3::new(1.30, 0.35, 0.70)),
            },
            Scenario::Sofa => Container {
                scenario,
                shape: ContainerShape::Sofa {
                    seat_half_w: 0.35,
                    seat_half_d: 0.30,
                    seat_height: 0.25,
                    back_height: 0.45,
                    arm_height: 0.42,
                    slab_thickness: 0.12,
                },
                exit_region: Aabb::new(Vec3::new(-0.35, -1.35, 0.0), Vec3::new(0.35, -0.72, 0.70)),
            },
        }
    }

    /// The boxes making up this container (empty for the drum, which uses
    /// analytic cylinder/annulus contacts instead).
    fn boxes(&self) -> Vec<Aabb> {
        match &self.shape {
            ContainerShape::WashingMachine { .. } => Vec::new(),
            ContainerShape::Basket { half_width, half_depth, wall_height, wall_thickness, floor_top } => {
                let (hw, hd, h, t, f) = (*half_width, *half_depth, *wall_height, *wall_thickness, *floor_top);
                alloc::vec![
                    // floor slab
                    Aabb::new(Vec3::new(-hw - t, -hd - t, 0.0), Vec3::new(hw + t, hd + t, f)),
                    // -x / +x walls
                    Aabb::new(Vec3::new(-hw - t, -hd - t, 0.0), Vec3::new(-hw, hd + t, h)),
                    Aabb::new(Vec3::new(hw, -hd - t, 0.0), Vec3::new(hw + t, hd + t, h)),
                    // -y / +y walls
                    Aabb::new(Vec3::new(-hw, -hd - t, 0.0), Vec3::new(hw, -hd, h)),
                    Aabb::new(Vec3::new(-hw, hd, 0.0), Vec3::new(hw, hd + t, h)),
                ]
            }
            ContainerShape::Sofa { seat_half_w, seat_half_d, seat_height, back_height, arm_height, slab_thickness } => {
                let (hw, hd, seat, back, arm, t) = (*seat_half_w, *seat_half_d, *seat_height, *back_height, *arm_height, *slab_thickness);
                alloc::vec![
                    // seat
                    Aabb::new(Vec3::new(-hw, -hd, 0.0), Vec3::new(hw, hd, seat)),
                    // back (behind +y edge), spans the full width incl. arms
                    Aabb::new(Vec3::new(-hw - t, hd, 0.0), Vec3::new(hw + t, hd + t, back)),
                    // arms
                    Aabb::new(Vec3::new(-hw - t, -hd, 0.0), Vec3::new(-hw, hd, arm)),
                    Aabb::new(Vec3::new(hw, -hd, 0.0), Vec3::new(hw + t, hd, arm)),
                ]
            }
        }
    }

    /// Visits every contact between a particle sphere and the environment
    /// (world floor plus container solids) in a fixed order.
    pub fn for_each_contact(&self, p: &Vec3, r: f64, mut visit: impl FnMut(Vec3, f64)) {
        // World floor.
        if p.z < r {
            visit(Vec3::z(), r - p.z);
        }
        match &self.shape {
            ContainerShape::WashingMachine { drum_radius, drum_depth, axis_height, face_y, opening_radius, face_half_width, face_top } => {
                let (rho, radial) = drum_radial(p, *axis_height);
                let y_back = face_y - drum_depth;
                // Radial wall keeps particles inside while they are within the
                // drum's y-span (with a margin of one radius past the opening
                // so cloth sliding out is still guided by the rim).
                if p.y > y_back - r && p.y < face_y + r && rho > drum_radius - r && rho > 1e-9 {
                    visit(-radial, rho - (drum_radius - r));
                }
                // Back disk.
                if rho < *drum_radius && p.y < y_back + r {
                    visit(Vec3::y(), (y_back + r) - p.y);
                }
                // Faceplate: a thick washer around the opening. Treated as a
                // solid (closest-point response) so the rim edge is rounded
                // and a particle can never see the surface normal flip sign.
                let _ = (face_half_width, face_top);
                let (y0, y1) = (face_y - 0.03, face_y + 0.01);
                if let Some((n, depth)) =
                    washer_contact(p, r, y0, y1, *opening_radius, *axis_height, rho, &radial)
                {
                    visit(n, depth);
                }
            }
            _ => {
                for b in self.boxes() {
                    if let Some((n, depth)) = b.sphere_contact(p, r) {
                        visit(n, depth);
                    }
                }
            }
        }
    }

    /// Whether a point is inside the container interior (the region garments
    /// are considered "in" the container).
    pub fn contains(&self, p: &Vec3) -> bool {
        match &self.shape {
            ContainerShape::WashingMachine { drum_radius, drum_depth, axis_height, face_y, .. } => {
                let (rho, _) = drum_radial(p, *axis_height);
                rho < *drum_radius && p.y > face_y - drum_depth && p.y < face_y + 0.02
            }
            ContainerShape::Basket { half_width, half_depth, wall_height, floor_top, .. } => {
                p.x.abs() <= *half_width
                    && p.y.abs() <= *half_depth
                    && p.z >= *floor_top - 0.01
                    && p.z <= wall_height + 0.15
            }
            ContainerShape::Sofa { seat_half_w, seat_half_d, seat_height, .. } => {
                p.x.abs() <= *seat_half_w
                    && p.y.abs() <= *seat_half_d
                    && p.z >= *seat_height - 0.01
                    && p.z <= 1.0
            }
        }
    }

    /// Nearest environment hit along a ray, used as an occlusion test by the
    /// renderer. Includes the world floor.
    pub fn ray_hit(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let mut best: Option<f64> = None;
        let mut consider = |t: Option<f64>| {
            if let Some(t) = t {
                if t > 1e-9 && best.is_none_or(|b| t < b) {
                    best = Some(t);
                }
            }
        };
        // World floor (z = 0).
        if dir.z.abs() > 1e-15 {
            let t = -origin.z / dir.z;
            if t > 1e-9 {
                consider(Some(t));
            }
        }
        match &self.shape {
            ContainerShape::WashingMachine { drum_radius, drum_depth, axis_height, face_y, opening_radius, face_half_width, face_top } => {
                let y_back = face_y - drum_depth;
                // Drum shell (cylinder rho = R within the y-span).
                let (ox, oz) = (origin.x, origin.z - axis_height);
                let (dx, dz) = (dir.x, dir.z);
                let a = dx * dx + dz * dz;
                if a > 1e-15 {
                    let b = 2.0 * (ox * dx + oz * dz);
                    let c = ox * ox + oz * oz - drum_radius * drum_radius;
                    let disc = b * b - 4.0 * a * c;
                    if disc >= 0.0 {
                        let sq = disc.sqrt();
                        for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                            if t > 1e-9 {
                                let y = origin.y + t * dir.y;
                                if y >= y_back && y <= *face_y {
                                    consider(Some(t));
                                }
                            }
                        }
                    }
                }
                // Back disk.
                if dir.y.abs() > 1e-15 {
                    let t = (y_back - origin.y) / dir.y;
                    if t > 1e-9 {
                        let p = origin + dir * t;
                        if drum_radial(&p, *axis_height).0 < *drum_radius {
                            consider(Some(t));
                        }
                    }
                }
                // Faceplate annulus.
                if dir.y.abs() > 1e-15 {
                    let t = (face_y - origin.y) / dir.y;
                    if t > 1e-9 {
                        let p = origin + dir * t;
                        let rho = drum_radial(&p, *axis_height).0;
                        if rho >= *opening_radius && p.x.abs() <= *face_half_width && p.z >= 0.0 && p.z <= *face_top {
                            consider(Some(t));
                        }
                    }
                }
            }
            _ => {
                for bx in self.boxes() {
                    consider(bx.ray_hit(origin, dir));
                }
            }
        }
        best
    }

    /// Deterministic grid of placement candidates on the support surface,
    /// resting height one contact radius above it.
    pub fn support_lattice(&self, contact_radius: f64) -> Vec<Vec3> {
        let mut pts = Vec::new();
        match &self.shape {
            ContainerShape::WashingMachine { drum_radius, drum_depth, axis_height, face_y, .. } => {
                // Lower arc of the drum interior.
                let rr = drum_radius - contact_radius;
                let n_y = 6;
                let n_theta = 7;
                for iy in 0..n_y {
                    let y = (face_y - drum_depth + 0.06) + (drum_depth - 0.14) * iy as f64 / (n_y - 1) as f64;
                    for it in 0..n_theta {
                        let theta = -1.0 + 2.0 * it as f64 / (n_theta - 1) as f64; // radians, +/-1 rad arc
                        pts.push(Vec3::new(rr * theta.sin(), y, axis_height - rr * theta.cos()));
                    }
                }
            }
            ContainerShape::Basket { half_width, half_depth, floor_top, .. } => {
                let n = 7;
                for ix in 0..n {
                    let x = -(half_width - 0.05) + 2.0 * (half_width - 0.05) * ix as f64 / (n - 1) as f64;
                    for iy in 0..n {
                        let y = -(half_depth - 0.05) + 2.0 * (half_depth - 0.05) * iy as f64 / (n - 1) as f64;
                        pts.push(Vec3::new(x, y, floor_top + contact_radius));
                    }
                }
            }
            ContainerShape::Sofa { seat_half_w, seat_half_d, seat_height, .. } => {
                let (nx, ny) = (8, 7);
                for ix in 0..nx {
                    let x = -(seat_half_w - 0.05) + 2.0 * (seat_half_w - 0.05) * ix as f64 / (nx - 1) as f64;
                    for iy in 0..ny {
                        let y = -(seat_half_d - 0.05) + 2.0 * (seat_half_d - 0.05) * iy as f64 / (ny - 1) as f64;
                        pts.push(Vec3::new(x, y, seat_height + contact_radius));
                    }
                }
            }
        }
        pts
    }

    /// Gripper height for retrieval lifts. The lift must fully peel the
    /// grasped garment off the pile (grasp height plus the largest garment
    /// extent), otherwise it leaves the pile as a folded bundle whose hang
    /// depth no longer depends on the grasp point. Inside the drum the lift
    /// is capped at the axis.
    pub fn retrieval_lift_z(&self) -> f64 {
        match &self.shape {
            ContainerShape::WashingMachine { axis_height, .. } => *axis_height,
            ContainerShape::Basket { .. } => 0.85,
            ContainerShape::Sofa { .. } => 0.80,
        }
    }

    /// Gripper height for adaptation pick-and-place (stays inside).
    pub fn adapt_lift_z(&self) -> f64 {
        match &self.shape {
            ContainerShape::WashingMachine { axis_height, .. } => *axis_height,
            ContainerShape::Basket { wall_height, .. } => 1.15 * wall_height,
            ContainerShape::Sofa { seat_height, .. } => seat_height + 0.22,
        }
    }

    /// Fixed waypoint the gripper passes through on its way out.
    pub fn exit_waypoint(&self) -> Vec3 {
        match &self.shape {
            ContainerShape::WashingMachine { axis_height, face_y, .. } => {
                Vec3::new(0.0, face_y + 0.12, *axis_height)
            }
            ContainerShape::Basket { half_width, wall_thickness, .. } => {
                Vec3::new(half_width + wall_thickness + 0.15, 0.0, self.retrieval_lift_z())
            }
            ContainerShape::Sofa { seat_half_d, .. } => {
                Vec3::new(0.0, -(seat_half_d + 0.20), self.retrieval_lift_z())
            }
        }
    }

    /// Release point inside the exit region, approached low over open floor.
    pub fn drop_point(&self) -> Vec3 {
        let c = self.exit_region.center();
        Vec3::new(c.x, c.y, 0.32)
    }

    /// Seeded spawn pose for dropping a garment during scene generation.
    /// Returns (position, yaw). `pile_top` is the current highest particle.
    pub fn spawn_pose(&self, rng: &mut SceneRng, pile_top: f64) -> (Vec3, f64) {
        let yaw = rng.uniform(0.0, core::f64::consts::TAU);
        let pos = match &self.shape {
            ContainerShape::WashingMachine { drum_depth, axis_height, face_y, .. } => {
                let x = rng.uniform(-0.06, 0.06);
                let y = rng.uniform(face_y - drum_depth + 0.14, face_y - 0.14);
                Vec3::new(x, y, *axis_height)
            }
            ContainerShape::Basket { wall_height, .. } => {
                let x = rng.uniform(-0.08, 0.08);
                let y = rng.uniform(-0.08, 0.08);
                Vec3::new(x, y, (wall_height + 0.12).max(pile_top + 0.10).min(wall_height + 0.30))
            }
            ContainerShape::Sofa { seat_height, .. } => {
                let x = rng.uniform(-0.10, 0.10);
                let y = rng.uniform(-0.10, 0.10);
                Vec3::new(x, y, (seat_height + 0.28).max(pile_top + 0.10))
            }
        };
        (pos, yaw)
    }
}

/// Sphere contact against a washer solid: the slab `y in [y0, y1]` with a
/// cylindrical hole of `hole_radius` around the drum axis. Returns the
/// outward normal and overlap depth.
#[allow(clippy::too_many_arguments)]
fn washer_contact(
    p: &Vec3,
    r: f64,
    y0: f64,
    y1: f64,
    hole_radius: f64,
    _axis_height: f64,
    rho: f64,
    radial: &Vec3,
) -> Option<(Vec3, f64)> {
    let dy = p.y.clamp(y0, y1);
    if rho >= hole_radius {
        if p.y > y0 && p.y < y1 {
            // Center inside the solid: exit through the least-deep face.
            let d_lo = p.y - y0;
            let d_hi = y1 - p.y;
            let d_hole = rho - hole_radius;
            if d_hole <= d_lo && d_hole <= d_hi {
                return Some((-radial, r + d_hole));
            }
            if d_lo <= d_hi {
                return Some((-Vec3::y(), r + d_lo));
            }
            return Some((Vec3::y(), r + d_hi));
        }
        let gap = (p.y - dy).abs();
        if gap < r {
            let n = if p.y >= y1 { Vec3::y() } else { -Vec3::y() };
            return Some((n, r - gap));
        }
        None
    } else {
        // In the hole: nearest solid point lies on the hole wall / rim circle.
        let d_rad = hole_radius - rho;
        let d_ax = p.y - dy;
        if d_ax == 0.0 {
            if d_rad < r {
                return Some((-radial, r - d_rad));
            }
            return None;
        }
        let dist = (d_rad * d_rad + d_ax * d_ax).sqrt();
        if dist < r && dist > 1e-12 {
            // Normal from the rim circle towards the particle: inward radially,
            // axial by the overhang side. Rounded-edge response.
            let n = (-radial * d_rad + Vec3::y() * d_ax) / dist;
            return Some((n, r - dist));
        }
        None
    }
}

/// Radial distance and outward radial direction from the drum axis
/// (axis along y at x = 0, z = axis_height).
fn drum_radial(p: &Vec3, axis_height: f64) -> (f64, Vec3) {
    let dx = p.x;
    let dz = p.z - axis_height;
    let rho = (dx * dx + dz * dz).sqrt();
    if rho > 1e-12 {
        (rho, Vec3::new(dx / rho, 0.0, dz / rho))
    } else {
        (0.0, Vec3::z())
    }
}
