//! Depth-camera-style point-cloud observation.
//!
//! A pinhole ray grid is cast from a scenario-specific camera; for each ray
//! the nearest particle-sphere hit wins (z-buffer), with the world floor and
//! container solids acting as occluders. Hits are deduplicated per particle
//! and the visible set is resampled to exactly `n` points: farthest point
//! sampling when too many, jittered resampling of visible particles when too
//! few. The per-point provenance (garment id, particle index) rides along as
//! a side channel for labeling; model code only ever consumes coordinates.

use alloc::vec::Vec;

use crate::container::Container;
use crate::error::{Error, Result};
use crate::rng::SceneRng;
use crate::sim::SceneState;
use crate::snapshot;
use crate::wire::fnv1a64;
use crate::Vec3;

/// Pinhole camera with a square pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    pub position: Vec3,
    pub look_at: Vec3,
    /// Vertical field of view (degrees).
    pub fov_deg: f64,
    pub grid_w: u32,
    pub grid_h: u32,
}

impl CameraPose {
    pub fn new(position: Vec3, look_at: Vec3) -> Result<Self> {
        let c = CameraPose { position, look_at, fov_deg: 55.0, grid_w: 160, grid_h: 160 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if (self.position - self.look_at).norm() < 1e-9 {
            return Err(Error::invalid("camera position must differ from look_at"));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(Error::invalid("fov must be in (0, 180) degrees"));
        }
        if self.grid_w == 0 || self.grid_h == 0 {
            return Err(Error::invalid("ray grid must be nonzero"));
        }
        Ok(())
    }

    /// The sensor pose used for a scenario: in front of the washing machine,
    /// top-down over the sofa and the basket.
    pub fn standard(container: &Container) -> Self {
        use crate::container::Scenario;
        match container.scenario {
            Scenario::WashingMachine => CameraPose {
                position: Vec3::new(0.0, 0.95, 0.55),
                look_at: Vec3::new(0.0, -0.25, 0.38),
                fov_deg: 60.0,
                grid_w: 160,
                grid_h: 160,
            },
            Scenario::Basket => CameraPose {
                position: Vec3::new(0.0, 0.0, 1.45),
                look_at: Vec3::new(0.0, 0.0, 0.03),
                fov_deg: 45.0,
                grid_w: 160,
                grid_h: 160,
            },
            Scenario::Sofa => CameraPose {
                position: Vec3::new(0.0, 0.0, 1.55),
                look_at: Vec3::new(0.0, 0.0, 0.25),
                fov_deg: 50.0,
                grid_w: 160,
                grid_h: 160,
            },
        }
    }

    /// Orthonormal camera basis (forward, right, up).
    fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let forward = (self.look_at - self.position).normalize();
        let world_up = if forward.z.abs() > 0.999 { Vec3::y() } else { Vec3::z() };
        let right = forward.cross(&world_up).normalize();
        let up = right.cross(&forward);
        (forward, right, up)
    }
}

/// Visibility-filtered observation with a hidden provenance channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudObs {
    /// Exactly `n` surface points (camera-visible, possibly resampled).
    pub points: Vec<Vec3>,
    /// Per-point (garment id, particle index); labeling/evaluation only.
    pub provenance: Vec<(u32, u32)>,
    /// Hash of the scene snapshot this observation was rendered from.
    pub scene_ref: u64,
}

impl PointCloudObs {
    /// Coordinates-only view; the only thing model code accepts.
    pub fn coords(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the highest point (max z), ties to the lowest index.
    pub fn highest_index(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.points.iter().enumerate() {
            if p.z > self.points[best].z {
                best = i;
            }
        }
        best
    }
}

/// Greedy max-min farthest point sampling.
///
/// Starts at `start_index` and repeatedly picks the point with the largest
/// distance to the selected set; ties break to the lowest index. Returns the
/// selection order.
pub fn farthest_point_sample(points: &[Vec3], n: usize, start_index: usize) -> Result<Vec<usize>> {
    if n > points.len() {
        return Err(Error::invalid(alloc::format!(
            "cannot sample {n} from {} points",
            points.len()
        )));
    }
    if start_index >= points.len() {
        return Err(Error::invalid("start_index out of range"));
    }
    let mut selected = Vec::with_capacity(n);
    if n == 0 {
        return Ok(selected);
    }
    let mut dist: Vec<f64> = points
        .iter()
        .map(|p| (p - points[start_index]).norm_squared())
        .collect();
    selected.push(start_index);
    while selected.len() < n {
        let mut best = 0;
        for i in 1..points.len() {
            if dist[i] > dist[best] {
                best = i;
            }
        }
        selected.push(best);
        for i in 0..points.len() {
            let d = (points[i] - points[best]).norm_squared();
            if d < dist[i] {
                dist[i] = d;
            }
        }
    }
    Ok(selected)
}

/// Renders the scene into exactly `n` observed points.
///
/// Visibility is resolved against blocker spheres of twice the contact
/// radius so a particle grid reads as a closed sheet instead of a sieve;
/// the emitted surface point is then pulled back onto the contact-radius
/// sphere, keeping every point within `radius` of its provenance particle.
///
/// Deterministic and pure in `(state, camera, n, radius)`; the scene's RNG is
/// not consumed (resample jitter derives from the snapshot hash).
pub fn render_cloud(
    state: &SceneState,
    camera: &CameraPose,
    n: usize,
    radius: f64,
) -> Result<PointCloudObs> {
    camera.validate()?;
    if n == 0 {
        return Err(Error::invalid("n must be > 0"));
    }
    let budget = (camera.grid_w * camera.grid_h) as usize;
    if n > budget {
        return Err(Error::invalid(alloc::format!(
            "n = {n} exceeds the ray budget {budget}"
        )));
    }

    let (forward, right, up) = camera.basis();
    let tan_half = (camera.fov_deg.to_radians() * 0.5).tan();
    let aspect = camera.grid_w as f64 / camera.grid_h as f64;
    let (w, h) = (camera.grid_w as usize, camera.grid_h as usize);

    // Ray direction through pixel center (ix, iy); unnormalized.
    let ray_dir = |ix: usize, iy: usize| -> Vec3 {
        let ndc_x = ((ix as f64 + 0.5) / w as f64 - 0.5) * 2.0;
        let ndc_y = (0.5 - (iy as f64 + 0.5) / h as f64) * 2.0;
        forward + right * (ndc_x * tan_half * aspect) + up * (ndc_y * tan_half)
    };

    // Z-buffer over pixels: (t, garment index, particle index).
    let mut zbuf: Vec<(f64, u32, u32)> = alloc::vec![(f64::INFINITY, u32::MAX, u32::MAX); w * h];

    // Rasterize each particle's blocker sphere over its conservative pixel
    // footprint.
    let blocker = 2.0 * radius;
    for (gi, g) in state.garments.iter().enumerate() {
        for (pi, center) in g.positions.iter().enumerate() {
            let d = center - camera.position;
            let depth = d.dot(&forward);
            if depth <= blocker {
                continue;
            }
            let px = (d.dot(&right) / (depth * tan_half * aspect) * 0.5 + 0.5) * w as f64;
            let py = (0.5 - d.dot(&up) / (depth * tan_half) * 0.5) * h as f64;
            // Conservative footprint radius in pixels.
            let fr = (blocker / depth) / (2.0 * tan_half) * h as f64 + 2.0;
            let x0 = ((px - fr).floor().max(0.0)) as usize;
            let x1 = ((px + fr).ceil().min(w as f64 - 1.0)) as usize;
            let y0 = ((py - fr).floor().max(0.0)) as usize;
            let y1 = ((py + fr).ceil().min(h as f64 - 1.0)) as usize;
            if x0 > x1 || y0 > y1 {
                continue;
            }
            for iy in y0..=y1 {
                for ix in x0..=x1 {
                    let dir = ray_dir(ix, iy);
                    let dir_n2 = dir.norm_squared();
                    // Ray-sphere in unnormalized parameter: |o + t*dir - c| = r.
                    let oc = camera.position - center;
                    let b = dir.dot(&oc);
                    let c = oc.norm_squared() - blocker * blocker;
                    let disc = b * b - dir_n2 * c;
                    if disc < 0.0 {
                        continue;
                    }
                    let t = (-b - disc.sqrt()) / dir_n2;
                    if t <= 1e-9 {
                        continue;
                    }
                    let slot = &mut zbuf[iy * w + ix];
                    if t < slot.0 {
                        *slot = (t, gi as u32, pi as u32);
                    }
                }
            }
        }
    }

    // Environment occlusion: drop hits behind the floor/container surfaces.
    // Resolved per pixel that has a candidate hit.
    let mut best_per_particle: alloc::collections::BTreeMap<(u32, u32), (f64, Vec3)> =
        alloc::collections::BTreeMap::new();
    for iy in 0..h {
        for ix in 0..w {
            let (t, gi, pi) = zbuf[iy * w + ix];
            if !t.is_finite() {
                continue;
            }
            let dir = ray_dir(ix, iy);
            // Occluder test uses the same unnormalized parameterization.
            if let Some(t_env) = state.container.ray_hit(&camera.position, &dir) {
                if t_env < t {
                    continue;
                }
            }
            // Pull the blocker hit back onto the contact-radius sphere.
            let center = state.garments[gi as usize].positions[pi as usize];
            let hit = camera.position + dir * t;
            let offset = hit - center;
            let hit = center + offset * (radius / offset.norm());
            let key = (gi, pi);
            let entry = best_per_particle.entry(key).or_insert((t, hit));
            if t < entry.0 {
                *entry = (t, hit);
            }
        }
    }

    if best_per_particle.is_empty() {
        return Err(Error::EmptyObservation);
    }

    // Visible set in canonical (garment, particle) order.
    let mut points: Vec<Vec3> = Vec::with_capacity(best_per_particle.len());
    let mut provenance: Vec<(u32, u32)> = Vec::with_capacity(best_per_particle.len());
    for (&(gi, pi), &(_, hit)) in &best_per_particle {
        points.push(hit);
        provenance.push((state.garments[gi as usize].garment_id, pi));
    }

    let scene_ref = fnv1a64(&snapshot::snapshot(state));

    if points.len() > n {
        let mut keep = farthest_point_sample(&points, n, 0)?;
        keep.sort_unstable();
        let points = keep.iter().map(|&i| points[i]).collect();
        let provenance = keep.iter().map(|&i| provenance[i]).collect();
        return Ok(PointCloudObs { points, provenance, scene_ref });
    }

    // Pad by jittered resampling of visible particles. The jitter stays
    // within half a radius of the particle center, so the provenance
    // invariant (point within contact radius of its particle) holds.
    let visible = points.len();
    let mut rng = SceneRng::from_seed(scene_ref ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    while points.len() < n {
        let k = rng.index(visible);
        let (gid, pi) = provenance[k];
        let g = state
            .garments
            .iter()
            .find(|g| g.garment_id == gid)
            .expect("provenance garment exists");
        let center = g.positions[pi as usize];
        let jitter = loop {
            let v = Vec3::new(
                rng.uniform(-1.0, 1.0),
                rng.uniform(-1.0, 1.0),
                rng.uniform(-1.0, 1.0),
            );
            if v.norm_squared() <= 1.0 {
                break v * (0.5 * radius);
            }
        };
        points.push(center + jitter);
        provenance.push((gid, pi));
    }

    Ok(PointCloudObs { points, provenance, scene_ref })
}

/// Appends exactly `lattice_points` support-surface placement candidates to
/// an observed cloud, forming the cloud the place model scores. The lattice
/// is resampled deterministically (farthest point sampling when too dense,
/// cyclic repetition when too sparse).
pub fn augment_with_lattice(
    points: &[Vec3],
    container: &Container,
    contact_radius: f64,
    lattice_points: usize,
) -> Vec<Vec3> {
    let lattice = container.support_lattice(contact_radius);
    let mut out = Vec::with_capacity(points.len() + lattice_points);
    out.extend_from_slice(points);
    if lattice.is_empty() || lattice_points == 0 {
        return out;
    }
    if lattice.len() >= lattice_points {
        let mut keep = farthest_point_sample(&lattice, lattice_points, 0).expect("n <= len");
        keep.sort_unstable();
        out.extend(keep.into_iter().map(|i| lattice[i]));
    } else {
        for k in 0..lattice_points {
            out.push(lattice[k % lattice.len()]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::Scenario;
    use crate::garment::{instantiate, Category, GarmentTemplate, StiffnessProfile};
    use crate::sim::{generate_scene, SimParams};
    use crate::Pose;

    #[test]
    fn fps_picks_farthest_then_all() {
        let pts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.5, 0.0, 0.0),
        ];
        let sel = farthest_point_sample(&pts, 2, 0).unwrap();
        assert_eq!(sel, alloc::vec![0, 1]);
        let all = farthest_point_sample(&pts, 3, 0).unwrap();
        assert_eq!(all.len(), 3);
        assert!(all.contains(&0) && all.contains(&1) && all.contains(&2));
    }

    #[test]
    fn fps_breaks_ties_to_lowest_index() {
        // Duplicate points: every max-min distance ties; lowest index wins.
        let pts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let sel = farthest_point_sample(&pts, 3, 0).unwrap();
        assert_eq!(sel, alloc::vec![0, 1, 3]);
    }

    #[test]
    fn fps_validates_inputs() {
        let pts = [Vec3::zeros()];
        assert!(farthest_point_sample(&pts, 2, 0).is_err());
        assert!(farthest_point_sample(&pts, 1, 5).is_err());
    }

    fn sofa_scene(seed: u64) -> crate::sim::SceneState {
        let pool =
            [GarmentTemplate::new(0, Category::Top, 6, 6, 0.05, StiffnessProfile::default()).unwrap()];
        generate_scene(
            crate::container::Container::standard(Scenario::Sofa),
            &pool,
            1,
            seed,
            &SimParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn render_is_deterministic_and_exact_n() {
        let s = sofa_scene(3);
        let cam = CameraPose::standard(&s.container);
        let a = render_cloud(&s, &cam, 128, 0.02).unwrap();
        let b = render_cloud(&s, &cam, 128, 0.02).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 128);
        assert_eq!(a.provenance.len(), 128);
    }

    #[test]
    fn every_point_is_near_its_provenance_particle() {
        let s = sofa_scene(5);
        let cam = CameraPose::standard(&s.container);
        let obs = render_cloud(&s, &cam, 200, 0.02).unwrap();
        for (p, &(gid, pi)) in obs.points.iter().zip(&obs.provenance) {
            let g = s.garment_by_id(gid).unwrap();
            let d = (p - g.positions[pi as usize]).norm();
            assert!(d <= 0.02 + 1e-9, "point {d} from its particle");
        }
    }

    #[test]
    fn occluded_bottom_garment_contributes_less() {
        // Two flat garments stacked directly: top-down camera sees the top;
        // the bottom contributes only leaked edge points.
        let t = GarmentTemplate::new(0, Category::Top, 6, 6, 0.05, StiffnessProfile::default()).unwrap();
        let bottom = instantiate(&t, 0, &Pose::translation(0.0, 0.0, 0.30), 0.0, 1).unwrap();
        let top = instantiate(&t, 1, &Pose::translation(0.0, 0.0, 0.34), 0.0, 2).unwrap();
        let mut s = crate::sim::SceneState::new(
            crate::container::Container::standard(Scenario::Sofa),
            1,
        );
        s.garments.push(bottom);
        s.garments.push(top);
        let cam = CameraPose::standard(&s.container);
        let obs = render_cloud(&s, &cam, 128, 0.02).unwrap();
        let from_bottom = obs.provenance.iter().filter(|(gid, _)| *gid == 0).count();
        assert!(
            from_bottom * 2 < obs.len(),
            "bottom garment should contribute under half the points, got {from_bottom}/{}",
            obs.len()
        );
    }

    #[test]
    fn observed_hits_are_first_along_their_ray() {
        // Re-verify visibility independently: for every true surface hit in
        // the cloud (padded points sit at half a radius from their particle,
        // hits at exactly one radius), cast the camera ray through the point
        // and check no other particle sphere intersects strictly earlier.
        let radius = 0.02;
        let t = GarmentTemplate::new(0, Category::Top, 6, 6, 0.05, StiffnessProfile::default()).unwrap();
        let bottom = instantiate(&t, 0, &Pose::translation(0.0, 0.0, 0.30), 0.0, 1).unwrap();
        let top = instantiate(&t, 1, &Pose::translation(0.0, 0.0, 0.34), 0.0, 2).unwrap();
        let mut s = crate::sim::SceneState::new(
            crate::container::Container::standard(Scenario::Sofa),
            1,
        );
        s.garments.push(bottom);
        s.garments.push(top);
        let cam = CameraPose::standard(&s.container);
        let obs = render_cloud(&s, &cam, 128, radius).unwrap();
        let mut checked = 0;
        for (p, &(gid, pi)) in obs.points.iter().zip(&obs.provenance) {
            let own_center = s.garment_by_id(gid).unwrap().positions[pi as usize];
            if ((p - own_center).norm() - radius).abs() > 1e-6 {
                continue; // padded resample, not a raw hit
            }
            // The surface point sits on the contact-radius sphere; re-derive
            // the blocker-sphere hit along the same ray and check priority.
            let dir = (p - cam.position).normalize();
            let blocker = 2.0 * radius;
            let oc_own = cam.position - own_center;
            let b_own = dir.dot(&oc_own);
            let disc_own = b_own * b_own - (oc_own.norm_squared() - blocker * blocker);
            assert!(disc_own > 0.0, "ray through an observed point misses its blocker sphere");
            let t_hit = -b_own - disc_own.sqrt();
            for g in &s.garments {
                for (qi, c) in g.positions.iter().enumerate() {
                    if g.garment_id == gid && qi == pi as usize {
                        continue;
                    }
                    let oc = cam.position - c;
                    let b = dir.dot(&oc);
                    let disc = b * b - (oc.norm_squared() - blocker * blocker);
                    if disc > 0.0 {
                        let t_other = -b - disc.sqrt();
                        assert!(
                            t_other >= t_hit - 1e-6,
                            "particle ({},{qi}) occludes an observed hit of ({gid},{pi})",
                            g.garment_id
                        );
                    }
                }
            }
            checked += 1;
        }
        assert!(checked > 20, "expected real surface hits, checked {checked}");
    }

    #[test]
    fn camera_below_floor_sees_nothing() {
        let s = sofa_scene(7);
        let cam = CameraPose {
            position: Vec3::new(0.0, 0.0, -1.0),
            look_at: Vec3::new(0.0, 0.0, 0.25),
            fov_deg: 60.0,
            grid_w: 64,
            grid_h: 64,
        };
        assert!(matches!(
            render_cloud(&s, &cam, 64, 0.02),
            Err(Error::EmptyObservation)
        ));
    }

    #[test]
    fn lattice_augmentation_is_exact_and_deterministic() {
        for scenario in Scenario::ALL {
            let c = crate::container::Container::standard(scenario);
            let base = random_like_points();
            let a = augment_with_lattice(&base, &c, 0.02, 48);
            let b = augment_with_lattice(&base, &c, 0.02, 48);
            assert_eq!(a, b);
            assert_eq!(a.len(), base.len() + 48);
            assert_eq!(&a[..base.len()], &base[..]);
            for p in &a[base.len()..] {
                assert!(c.contains(p), "{scenario:?} lattice point outside container");
            }
        }
    }

    fn random_like_points() -> alloc::vec::Vec<Vec3> {
        let mut rng = crate::rng::SceneRng::from_seed(4);
        (0..32)
            .map(|_| Vec3::new(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(0.2, 0.4)))
            .collect()
    }

    #[test]
    fn n_larger_than_ray_budget_is_rejected() {
        let s = sofa_scene(7);
        let cam = CameraPose {
            grid_w: 8,
            grid_h: 8,
            ..CameraPose::standard(&s.container)
        };
        assert!(render_cloud(&s, &cam, 65, 0.02).is_err());
    }
}
