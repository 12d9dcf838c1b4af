//! Deterministic mass-spring pile physics.
//!
//! Semi-implicit Euler with fixed substeps. Forces per substep, accumulated
//! in a fixed order (garment id, then particle index, then spring index, then
//! contact pairs in flat-index order) so trajectories are bit-reproducible:
//!
//! - gravity and linear air drag,
//! - Hooke springs with damping along the spring axis,
//! - penalty contacts between particle spheres of *different* garments,
//! - penalty contacts against the container and the world floor,
//! - Coulomb-style friction clamped both by `mu * |normal force|` and by the
//!   force that would zero the tangential relative velocity in one substep
//!   (so friction never injects energy).
//!
//! An optional kinematic attachment (the gripper) overrides the integrated
//! state of the grasped particles after every substep.

use alloc::vec::Vec;

use crate::container::Container;
use crate::error::{Error, Result};
use crate::garment::{instantiate, GarmentInstance, GarmentTemplate};
use crate::rng::SceneRng;
use crate::{Pose, Vec3};

/// Integrator and contact constants.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    /// Outer step length (s); one `step` runs `substeps` sub-integrations.
    pub dt: f64,
    pub substeps: u32,
    /// Gravity magnitude (m/s^2), applied along -z.
    pub gravity: f64,
    /// Damping along the spring axis (N*s/m).
    pub spring_damping: f64,
    /// Linear drag rate (1/s): force = -rate * m * v.
    pub air_damping: f64,
    /// Particle sphere radius (m).
    pub contact_radius: f64,
    /// Penalty stiffness for sphere and surface contacts (N/m).
    pub contact_stiffness: f64,
    /// Friction coefficient against container/floor surfaces.
    pub friction_mu_surface: f64,
    /// Friction coefficient between particles of different garments.
    pub friction_mu_particle: f64,
    /// Kinetic-energy threshold for settling (J).
    pub settle_ke_tol: f64,
    /// Step budget for settling.
    pub settle_max_steps: u32,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dt: 0.005,
            substeps: 4,
            gravity: 9.8,
            spring_damping: 0.5,
            air_damping: 3.0,
            contact_radius: 0.02,
            contact_stiffness: 400.0,
            friction_mu_surface: 0.5,
            friction_mu_particle: 0.6,
            settle_ke_tol: 2e-5,
            settle_max_steps: 2500,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::invalid("dt must be > 0"));
        }
        if self.substeps == 0 {
            return Err(Error::invalid("substeps must be >= 1"));
        }
        for (name, v) in [
            ("gravity", self.gravity),
            ("spring_damping", self.spring_damping),
            ("air_damping", self.air_damping),
            ("contact_radius", self.contact_radius),
            ("contact_stiffness", self.contact_stiffness),
            ("friction_mu_surface", self.friction_mu_surface),
            ("friction_mu_particle", self.friction_mu_particle),
            ("settle_ke_tol", self.settle_ke_tol),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(alloc::format!("{name} must be >= 0 and finite")));
            }
        }
        Ok(())
    }
}

/// Damping ratio of the spring-damper penalty contacts (fraction of critical
/// damping). Cloth-on-cloth impacts are inelastic.
const CONTACT_DAMPING_RATIO: f64 = 0.3;

/// Kinematic grasp constraint: the listed particles of one garment follow the
/// gripper rigidly until release.
#[derive(Debug, Clone, PartialEq)]
pub struct Attachment {
    pub garment_id: u32,
    pub particles: Vec<u32>,
    /// Particle offsets from the gripper position at grasp time.
    pub offsets: Vec<Vec3>,
    pub gripper_pos: Vec3,
    pub gripper_vel: Vec3,
}

/// A full scene: container, garments, integrator bookkeeping, RNG.
#[derive(Debug, Clone)]
pub struct SceneState {
    pub container: Container,
    pub garments: Vec<GarmentInstance>,
    pub sim_time: f64,
    pub step_count: u64,
    pub rng: SceneRng,
    pub attachment: Option<Attachment>,
    /// False when the last settle hit its step budget without converging.
    pub settled: bool,
}

impl SceneState {
    pub fn new(container: Container, seed: u64) -> Self {
        SceneState {
            container,
            garments: Vec::new(),
            sim_time: 0.0,
            step_count: 0,
            rng: SceneRng::from_seed(seed),
            attachment: None,
            settled: true,
        }
    }

    pub fn total_particles(&self) -> usize {
        self.garments.iter().map(|g| g.positions.len()).sum()
    }

    pub fn garment_by_id(&self, id: u32) -> Option<&GarmentInstance> {
        self.garments.iter().find(|g| g.garment_id == id)
    }

    pub fn garment_index(&self, id: u32) -> Option<usize> {
        self.garments.iter().position(|g| g.garment_id == id)
    }

    /// Highest particle z over the whole scene (or 0 when empty).
    pub fn max_z(&self) -> f64 {
        let mut top: f64 = 0.0;
        for g in &self.garments {
            for p in &g.positions {
                top = top.max(p.z);
            }
        }
        top
    }

    pub fn kinetic_energy(&self) -> f64 {
        let mut ke = 0.0;
        for g in &self.garments {
            let m = g.template.particle_mass;
            for v in &g.velocities {
                ke += 0.5 * m * v.norm_squared();
            }
        }
        ke
    }

    pub fn centroids(&self) -> Vec<Vec3> {
        self.garments.iter().map(|g| g.centroid()).collect()
    }

    /// Ids of garments whose centroid is inside the container interior.
    pub fn garments_in_container(&self) -> Vec<u32> {
        self.garments
            .iter()
            .filter(|g| self.container.contains(&g.centroid()))
            .map(|g| g.garment_id)
            .collect()
    }
}

/// Mechanical energy: kinetic + gravitational + spring elastic + the elastic
/// energy currently stored in penalty contacts. With damping and friction on,
/// this is non-increasing during unforced settling up to integrator error.
pub fn mechanical_energy(state: &SceneState, params: &SimParams) -> f64 {
    let mut e = state.kinetic_energy();
    for g in &state.garments {
        let m = g.template.particle_mass;
        for p in &g.positions {
            e += m * params.gravity * p.z;
        }
        for s in &g.springs {
            let len = (g.positions[s.a as usize] - g.positions[s.b as usize]).norm();
            let x = len - s.rest;
            e += 0.5 * s.stiffness * x * x;
        }
    }
    // Penalty energy against surfaces.
    let r = params.contact_radius;
    for g in &state.garments {
        for p in &g.positions {
            state.container.for_each_contact(p, r, |_, depth| {
                e += 0.5 * params.contact_stiffness * depth * depth;
            });
        }
    }
    // Penalty energy between garments.
    for_each_cross_pair(state, 2.0 * r, |_, _, pa, pb, _, _| {
        let dist = (pa - pb).norm();
        let overlap = 2.0 * r - dist;
        if overlap > 0.0 {
            e += 0.5 * params.contact_stiffness * overlap * overlap;
        }
    });
    e
}

/// Flat particle addressing across garments, plus a sorted uniform grid used
/// for cross-garment neighbor queries. Rebuilt per substep.
struct PairGrid {
    cell: f64,
    /// (packed cell key, flat index), sorted.
    entries: Vec<(u64, u32)>,
}

const GRID_BIAS: i64 = 1 << 20;

fn cell_key(p: &Vec3, cell: f64) -> u64 {
    let q = |v: f64| -> u64 {
        let c = libm_floor(v / cell) as i64 + GRID_BIAS;
        (c as u64) & 0x1f_ffff
    };
    (q(p.x) << 42) | (q(p.y) << 21) | q(p.z)
}

fn libm_floor(v: f64) -> f64 {
    num_traits::Float::floor(v)
}

impl PairGrid {
    fn build(state: &SceneState, cell: f64) -> (Self, Vec<(u32, u32)>, Vec<Vec3>) {
        let total = state.total_particles();
        let mut owner = Vec::with_capacity(total);
        let mut pos = Vec::with_capacity(total);
        for (gi, g) in state.garments.iter().enumerate() {
            for (pi, p) in g.positions.iter().enumerate() {
                owner.push((gi as u32, pi as u32));
                pos.push(*p);
            }
        }
        let mut entries: Vec<(u64, u32)> = pos
            .iter()
            .enumerate()
            .map(|(i, p)| (cell_key(p, cell), i as u32))
            .collect();
        entries.sort_unstable();
        (PairGrid { cell, entries }, owner, pos)
    }

    /// Visits candidate flat pairs (a < b) whose cells are within one cell of
    /// each other, in a fixed deterministic order.
    fn for_each_candidate(&self, pos: &[Vec3], mut visit: impl FnMut(u32, u32)) {
        for &(_, a) in &self.entries {
            let p = &pos[a as usize];
            let base = Vec3::new(p.x, p.y, p.z);
            for dx in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dz in -1i64..=1 {
                        let shifted = Vec3::new(
                            base.x + dx as f64 * self.cell,
                            base.y + dy as f64 * self.cell,
                            base.z + dz as f64 * self.cell,
                        );
                        let key = cell_key(&shifted, self.cell);
                        let start = self.entries.partition_point(|e| e.0 < key);
                        for &(k, b) in &self.entries[start..] {
                            if k != key {
                                break;
                            }
                            if b > a {
                                visit(a, b);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Visits every cross-garment particle pair within `threshold` of each other.
/// Pairs are reported once, `a < b` in flat order.
fn for_each_cross_pair(
    state: &SceneState,
    threshold: f64,
    mut visit: impl FnMut(u32, u32, &Vec3, &Vec3, u32, u32),
) {
    if state.garments.len() < 2 {
        return;
    }
    let (grid, owner, pos) = PairGrid::build(state, threshold);
    grid.for_each_candidate(&pos, |a, b| {
        let (ga, _) = owner[a as usize];
        let (gb, _) = owner[b as usize];
        if ga == gb {
            return;
        }
        let d2 = (pos[a as usize] - pos[b as usize]).norm_squared();
        if d2 <= threshold * threshold {
            visit(a, b, &pos[a as usize], &pos[b as usize], ga, gb);
        }
    });
}

/// Safety margin (m) added to the contact threshold when candidate pairs
/// are collected once per outer step: covers the distance two particles can
/// close within one step at plausible relative speeds.
const PAIR_MARGIN: f64 = 0.02;

/// Collects cross-garment candidate pairs within `2r + PAIR_MARGIN`,
/// evaluated exactly per substep.
fn collect_candidate_pairs(state: &SceneState, params: &SimParams) -> Vec<(u32, u32)> {
    let mut pairs = Vec::new();
    if state.garments.len() < 2 {
        return pairs;
    }
    let reach = 2.0 * params.contact_radius + PAIR_MARGIN;
    let (grid, owner, pos) = PairGrid::build(state, reach);
    grid.for_each_candidate(&pos, |a, b| {
        let (ga, _) = owner[a as usize];
        let (gb, _) = owner[b as usize];
        if ga == gb {
            return;
        }
        if (pos[a as usize] - pos[b as usize]).norm_squared() <= reach * reach {
            pairs.push((a, b));
        }
    });
    pairs
}

/// One sub-integration of length `dt_sub`. Use [`step`] for the public
/// stepping contract.
fn substep(state: &mut SceneState, params: &SimParams, dt_sub: f64, candidate_pairs: &[(u32, u32)]) {
    let n_garments = state.garments.len();
    if n_garments == 0 {
        state.sim_time += dt_sub;
        return;
    }

    // Flat layout mirrors (garment, particle) order.
    let mut offsets = Vec::with_capacity(n_garments);
    let mut total = 0usize;
    for g in &state.garments {
        offsets.push(total);
        total += g.positions.len();
    }
    let mut forces = alloc::vec![Vec3::zeros(); total];

    // Gravity and air drag.
    for (gi, g) in state.garments.iter().enumerate() {
        let m = g.template.particle_mass;
        let base = offsets[gi];
        for (pi, v) in g.velocities.iter().enumerate() {
            forces[base + pi] = Vec3::new(
                -params.air_damping * m * v.x,
                -params.air_damping * m * v.y,
                -m * params.gravity - params.air_damping * m * v.z,
            );
        }
    }

    // Springs: Hooke plus damping along the spring axis.
    for (gi, g) in state.garments.iter().enumerate() {
        let base = offsets[gi];
        for s in &g.springs {
            let (a, b) = (s.a as usize, s.b as usize);
            let d = g.positions[b] - g.positions[a];
            let len = d.norm();
            if len < 1e-12 {
                continue;
            }
            let dir = d / len;
            let rel_v = g.velocities[b] - g.velocities[a];
            let f_mag = s.stiffness * (len - s.rest) + params.spring_damping * rel_v.dot(&dir);
            let f = dir * f_mag;
            forces[base + a] += f;
            forces[base + b] -= f;
        }
    }

    // Contacts are gathered first so each particle's friction clamp can be
    // shared across its simultaneous contacts; applying the full
    // stop-the-slide force per contact overshoots and pumps energy when a
    // particle touches several things at once.
    let r = params.contact_radius;
    let two_r = 2.0 * r;
    let mut vel = Vec::with_capacity(total);
    let mut mass = Vec::with_capacity(total);
    for g in &state.garments {
        let m = g.template.particle_mass;
        for v in &g.velocities {
            vel.push(*v);
            mass.push(m);
        }
    }
    struct PairContact {
        a: usize,
        b: usize,
        n: Vec3,
        fn_mag: f64,
        m_eff: f64,
    }
    struct SurfContact {
        a: usize,
        n: Vec3,
        fn_mag: f64,
    }
    let mut pair_contacts: Vec<PairContact> = Vec::new();
    let mut surf_contacts: Vec<SurfContact> = Vec::new();
    let mut contact_count = alloc::vec![0u32; total];

    if n_garments >= 2 && !candidate_pairs.is_empty() {
        let mut pos = Vec::with_capacity(total);
        for g in &state.garments {
            pos.extend_from_slice(&g.positions);
        }
        for &(a, b) in candidate_pairs {
            let (ia, ib) = (a as usize, b as usize);
            let d = pos[ia] - pos[ib];
            let d2 = d.norm_squared();
            if d2 >= two_r * two_r || d2 < 1e-18 {
                continue;
            }
            let dist = d2.sqrt();
            let n = d / dist;
            let overlap = two_r - dist;
            let rel_v = vel[ia] - vel[ib];
            let m_eff = (mass[ia] * mass[ib]) / (mass[ia] + mass[ib]);
            // Spring-damper penalty, clamped so the contact never pulls.
            let c_n = CONTACT_DAMPING_RATIO * 2.0 * (params.contact_stiffness * m_eff).sqrt();
            let fn_mag = (params.contact_stiffness * overlap - c_n * rel_v.dot(&n)).max(0.0);
            pair_contacts.push(PairContact { a: ia, b: ib, n, fn_mag, m_eff });
            contact_count[ia] += 1;
            contact_count[ib] += 1;
        }
    }

    {
        let mut flat = 0usize;
        for g in &state.garments {
            let m = g.template.particle_mass;
            let c_n = CONTACT_DAMPING_RATIO * 2.0 * (params.contact_stiffness * m).sqrt();
            for (pi, p) in g.positions.iter().enumerate() {
                let v = g.velocities[pi];
                state.container.for_each_contact(p, r, |n, depth| {
                    let fn_mag = (params.contact_stiffness * depth - c_n * v.dot(&n)).max(0.0);
                    surf_contacts.push(SurfContact { a: flat, n, fn_mag });
                    contact_count[flat] += 1;
                });
                flat += 1;
            }
        }
    }

    for c in &pair_contacts {
        let mut f = c.n * c.fn_mag;
        let rel_v = vel[c.a] - vel[c.b];
        let vt = rel_v - c.n * rel_v.dot(&c.n);
        let vt_norm = vt.norm();
        if vt_norm > 1e-9 {
            let share = contact_count[c.a].max(contact_count[c.b]) as f64;
            let f_stop = c.m_eff * vt_norm / (dt_sub * share);
            let ft_mag = (params.friction_mu_particle * c.fn_mag).min(f_stop);
            f -= (vt / vt_norm) * ft_mag;
        }
        forces[c.a] += f;
        forces[c.b] -= f;
    }
    for c in &surf_contacts {
        let mut f = c.n * c.fn_mag;
        let v = vel[c.a];
        let vt = v - c.n * v.dot(&c.n);
        let vt_norm = vt.norm();
        if vt_norm > 1e-9 {
            let share = contact_count[c.a] as f64;
            let f_stop = mass[c.a] * vt_norm / (dt_sub * share);
            let ft_mag = (params.friction_mu_surface * c.fn_mag).min(f_stop);
            f -= (vt / vt_norm) * ft_mag;
        }
        forces[c.a] += f;
    }

    // Semi-implicit Euler: v then x.
    for (gi, g) in state.garments.iter_mut().enumerate() {
        let base = offsets[gi];
        let inv_m = 1.0 / g.template.particle_mass;
        for pi in 0..g.positions.len() {
            let v = g.velocities[pi] + forces[base + pi] * (inv_m * dt_sub);
            g.velocities[pi] = v;
            g.positions[pi] += v * dt_sub;
        }
    }

    // Kinematic attachment overrides the grasped particles.
    if let Some(att) = &state.attachment {
        if let Some(gi) = state.garments.iter().position(|g| g.garment_id == att.garment_id) {
            let g = &mut state.garments[gi];
            for (k, &pi) in att.particles.iter().enumerate() {
                g.positions[pi as usize] = att.gripper_pos + att.offsets[k];
                g.velocities[pi as usize] = att.gripper_vel;
            }
        }
    }

    state.sim_time += dt_sub;
}

/// Advances one full step (`substeps` sub-integrations) and checks for
/// numerical divergence.
pub fn step(state: &mut SceneState, params: &SimParams) -> Result<()> {
    let dt_sub = params.dt / params.substeps as f64;
    let candidate_pairs = collect_candidate_pairs(state, params);
    for _ in 0..params.substeps {
        substep(state, params, dt_sub, &candidate_pairs);
    }
    state.step_count += 1;
    for g in &state.garments {
        for (pi, (p, v)) in g.positions.iter().zip(&g.velocities).enumerate() {
            let finite =
                p.x.is_finite() && p.y.is_finite() && p.z.is_finite() && v.x.is_finite() && v.y.is_finite() && v.z.is_finite();
            if !finite {
                return Err(Error::NumericalDivergence {
                    step: state.step_count,
                    garment: g.garment_id,
                    particle: pi as u32,
                });
            }
        }
    }
    Ok(())
}

/// Steps until total kinetic energy drops below `settle_ke_tol` or the step
/// budget runs out. Returns whether the scene converged; the flag is also
/// recorded in `state.settled`.
pub fn settle(state: &mut SceneState, params: &SimParams) -> Result<bool> {
    // Convergence needs sub-threshold energy at two consecutive instants:
    // a coherently bouncing sheet passes through zero kinetic energy at each
    // apex, and a freshly spawned garment is momentarily at rest in midair.
    // An already-at-rest scene exits on its first check.
    let mut ke_prev = state.kinetic_energy();
    for _ in 0..params.settle_max_steps {
        step(state, params)?;
        let ke = state.kinetic_energy();
        if ke < params.settle_ke_tol && ke_prev < params.settle_ke_tol {
            state.settled = true;
            return Ok(true);
        }
        ke_prev = ke;
    }
    state.settled = false;
    Ok(false)
}

/// Symmetric matrix of cross-garment contact-pair counts: entry `(a, b)` is
/// the number of particle pairs (one from each garment) within
/// `2 * contact_radius`. Diagonal is zero. Indexed by garment position in
/// `state.garments`, row-major.
pub fn contact_graph(state: &SceneState, params: &SimParams) -> Vec<u64> {
    let k = state.garments.len();
    let mut matrix = alloc::vec![0u64; k * k];
    for_each_cross_pair(state, 2.0 * params.contact_radius, |_, _, _, _, ga, gb| {
        matrix[ga as usize * k + gb as usize] += 1;
        matrix[gb as usize * k + ga as usize] += 1;
    });
    matrix
}

/// Total number of cross-garment contact pairs; the entanglement proxy.
pub fn entanglement(state: &SceneState, params: &SimParams) -> u64 {
    let k = state.garments.len();
    let m = contact_graph(state, params);
    let mut sum = 0;
    for a in 0..k {
        for b in (a + 1)..k {
            sum += m[a * k + b];
        }
    }
    sum
}

/// Generates a settled pile: garments are sampled from the template pool and
/// dropped one at a time, each settling before the next drop. Deterministic
/// in `(container, pool, num_garments, seed, params)`.
pub fn generate_scene(
    container: Container,
    pool: &[GarmentTemplate],
    num_garments: u32,
    seed: u64,
    params: &SimParams,
) -> Result<SceneState> {
    params.validate()?;
    if !(1..=5).contains(&num_garments) {
        return Err(Error::invalid(alloc::format!(
            "num_garments must be in 1..=5, got {num_garments}"
        )));
    }
    if pool.is_empty() {
        return Err(Error::invalid("template pool is empty"));
    }
    let mut state = SceneState::new(container, seed);
    for k in 0..num_garments {
        let template = &pool[state.rng.index(pool.len())];
        let pile_top = state.max_z();
        let (pos, yaw) = state.container.spawn_pose(&mut state.rng, pile_top);
        let amplitude = state.rng.uniform(0.015, 0.035);
        let crumple_seed = state.rng.next_u64();
        let pose = Pose::from_parts(
            nalgebra::Translation3::from(pos),
            nalgebra::UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw),
        );
        let garment = instantiate(template, k, &pose, amplitude, crumple_seed)?;
        state.garments.push(garment);
        if !settle(&mut state, params)? {
            return Err(Error::SceneGeneration { seed });
        }
    }
    Ok(state)
}
