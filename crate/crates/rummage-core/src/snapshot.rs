//! Bit-exact scene snapshots.
//!
//! Versioned little-endian blob: magic `PILE`, format version, container
//! descriptor, garment count, per-garment blocks (inline template parameters,
//! then particle state), RNG state, and trailing integrator bookkeeping
//! (sim time, step count, settled flag, optional attachment) so that
//! `restore(snapshot(s))` reproduces `s` exactly, including its RNG.

use alloc::vec::Vec;

use crate::container::{Aabb, Container, ContainerShape, Scenario};
use crate::error::{Error, Result};
use crate::garment::{Category, GarmentInstance, GarmentTemplate, StiffnessProfile};
use crate::rng::{RngState, SceneRng};
use crate::sim::{Attachment, SceneState};
use crate::wire::{ByteReader, ByteWriter};
use crate::Vec3;

pub const MAGIC: &[u8; 4] = b"PILE";
pub const VERSION: u32 = 1;

fn write_vec3(w: &mut ByteWriter, v: &Vec3) {
    w.f64(v.x);
    w.f64(v.y);
    w.f64(v.z);
}

fn read_vec3(r: &mut ByteReader) -> Result<Vec3> {
    Ok(Vec3::new(r.f64()?, r.f64()?, r.f64()?))
}

fn write_container(w: &mut ByteWriter, c: &Container) {
    w.u8(c.scenario as u8);
    match &c.shape {
        ContainerShape::WashingMachine { drum_radius, drum_depth, axis_height, face_y, opening_radius, face_half_width, face_top } => {
            for v in [drum_radius, drum_depth, axis_height, face_y, opening_radius, face_half_width, face_top] {
                w.f64(*v);
            }
        }
        ContainerShape::Basket { half_width, half_depth, wall_height, wall_thickness, floor_top } => {
            for v in [half_width, half_depth, wall_height, wall_thickness, floor_top] {
                w.f64(*v);
            }
        }
        ContainerShape::Sofa { seat_half_w, seat_half_d, seat_height, back_height, arm_height, slab_thickness } => {
            for v in [seat_half_w, seat_half_d, seat_height, back_height, arm_height, slab_thickness] {
                w.f64(*v);
            }
        }
    }
    write_vec3(w, &c.exit_region.min);
    write_vec3(w, &c.exit_region.max);
}

fn read_container(r: &mut ByteReader) -> Result<Container> {
    let scenario = Scenario::from_u8(r.u8()?)?;
    let shape = match scenario {
        Scenario::WashingMachine => ContainerShape::WashingMachine {
            drum_radius: r.f64()?,
            drum_depth: r.f64()?,
            axis_height: r.f64()?,
            face_y: r.f64()?,
            opening_radius: r.f64()?,
            face_half_width: r.f64()?,
            face_top: r.f64()?,
        },
        Scenario::Basket => ContainerShape::Basket {
            half_width: r.f64()?,
            half_depth: r.f64()?,
            wall_height: r.f64()?,
            wall_thickness: r.f64()?,
            floor_top: r.f64()?,
        },
        Scenario::Sofa => ContainerShape::Sofa {
            seat_half_w: r.f64()?,
            seat_half_d: r.f64()?,
            seat_height: r.f64()?,
            back_height: r.f64()?,
            arm_height: r.f64()?,
            slab_thickness: r.f64()?,
        },
    };
    let exit_region = Aabb::new(read_vec3(r)?, read_vec3(r)?);
    Ok(Container { scenario, shape, exit_region })
}

fn write_template(w: &mut ByteWriter, t: &GarmentTemplate) {
    w.u32(t.template_id);
    w.u8(t.category as u8);
    w.u32(t.rows);
    w.u32(t.cols);
    w.f64(t.spacing);
    w.f64(t.particle_mass);
    w.f64(t.k_struct);
    w.f64(t.k_shear);
    w.f64(t.k_bend);
}

fn read_template(r: &mut ByteReader) -> Result<GarmentTemplate> {
    let template_id = r.u32()?;
    let category = Category::from_u8(r.u8()?)?;
    let rows = r.u32()?;
    let cols = r.u32()?;
    let spacing = r.f64()?;
    let profile = StiffnessProfile {
        particle_mass: r.f64()?,
        k_struct: r.f64()?,
        k_shear: r.f64()?,
        k_bend: r.f64()?,
    };
    GarmentTemplate::new(template_id, category, rows, cols, spacing, profile)
        .map_err(|e| Error::format(alloc::format!("invalid template in snapshot: {e}")))
}

/// Serializes a scene to an opaque blob.
pub fn snapshot(state: &SceneState) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    write_container(&mut w, &state.container);
    w.u32(state.garments.len() as u32);
    for g in &state.garments {
        write_template(&mut w, &g.template);
        w.u32(g.garment_id);
        w.u32(g.positions.len() as u32);
        for p in &g.positions {
            write_vec3(&mut w, p);
        }
        for v in &g.velocities {
            write_vec3(&mut w, v);
        }
    }
    let rng = state.rng.state();
    w.bytes(&rng.seed);
    w.u64(rng.stream);
    w.u128(rng.word_pos);
    w.f64(state.sim_time);
    w.u64(state.step_count);
    w.u8(state.settled as u8);
    match &state.attachment {
        None => w.u8(0),
        Some(att) => {
            w.u8(1);
            w.u32(att.garment_id);
            w.u32(att.particles.len() as u32);
            for (&pi, off) in att.particles.iter().zip(&att.offsets) {
                w.u32(pi);
                write_vec3(&mut w, off);
            }
            write_vec3(&mut w, &att.gripper_pos);
            write_vec3(&mut w, &att.gripper_vel);
        }
    }
    w.into_bytes()
}

/// Rebuilds a scene from a snapshot blob.
pub fn restore(blob: &[u8]) -> Result<SceneState> {
    let mut r = ByteReader::new(blob);
    r.expect_magic(MAGIC, "scene snapshot")?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(alloc::format!(
            "unsupported snapshot version {version} (expected {VERSION})"
        )));
    }
    let container = read_container(&mut r)?;
    let n_garments = r.u32()? as usize;
    if n_garments > 64 {
        return Err(Error::format("implausible garment count"));
    }
    let mut garments = Vec::with_capacity(n_garments);
    for _ in 0..n_garments {
        let template = read_template(&mut r)?;
        let garment_id = r.u32()?;
        let p = r.u32()? as usize;
        if p != template.particle_count() {
            return Err(Error::format(alloc::format!(
                "particle count {p} does not match template grid {}x{}",
                template.rows, template.cols
            )));
        }
        let mut positions = Vec::with_capacity(p);
        for _ in 0..p {
            positions.push(read_vec3(&mut r)?);
        }
        let mut velocities = Vec::with_capacity(p);
        for _ in 0..p {
            velocities.push(read_vec3(&mut r)?);
        }
        let springs = template.springs();
        garments.push(GarmentInstance { template, garment_id, positions, velocities, springs });
    }
    let mut seed = [0u8; 32];
    seed.copy_from_slice(r.take(32)?);
    let rng_state = RngState { seed, stream: r.u64()?, word_pos: r.u128()? };
    let sim_time = r.f64()?;
    let step_count = r.u64()?;
    let settled = r.u8()? != 0;
    let attachment = match r.u8()? {
        0 => None,
        1 => {
            let garment_id = r.u32()?;
            let n = r.u32()? as usize;
            let mut particles = Vec::with_capacity(n);
            let mut offsets = Vec::with_capacity(n);
            for _ in 0..n {
                particles.push(r.u32()?);
                offsets.push(read_vec3(&mut r)?);
            }
            let gripper_pos = read_vec3(&mut r)?;
            let gripper_vel = read_vec3(&mut r)?;
            Some(Attachment { garment_id, particles, offsets, gripper_pos, gripper_vel })
        }
        other => return Err(Error::format(alloc::format!("bad attachment flag {other}"))),
    };
    r.expect_end()?;
    Ok(SceneState {
        container,
        garments,
        sim_time,
        step_count,
        rng: SceneRng::restore(&rng_state),
        attachment,
        settled,
    })
}
