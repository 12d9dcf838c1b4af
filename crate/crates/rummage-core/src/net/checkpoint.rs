//! Model checkpoints: versioned little-endian blobs.
//!
//! Layout: magic `AFF1`, format version, module tag, architecture descriptor
//! (per-encoder level specs and propagation widths, then head widths), then
//! all f32 tensors in declaration order. Loading rebuilds the architecture
//! from the descriptor and validates the tensor count against it.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::net::encoder::{EncoderSpec, LevelSpec};
use crate::net::models::{ModelKind, PlaceModel, PointScoreModel, PLACE_HEAD, SCORE_HEAD};
use crate::wire::{ByteReader, ByteWriter};

pub const MAGIC: &[u8; 4] = b"AFF1";
pub const VERSION: u32 = 1;

/// A decoded checkpoint.
#[derive(Debug, Clone)]
pub enum Checkpoint {
    Retrieve(PointScoreModel<f32>),
    Place(PlaceModel<f32>),
    Pick(PointScoreModel<f32>),
}

impl Checkpoint {
    pub fn kind(&self) -> ModelKind {
        match self {
            Checkpoint::Retrieve(_) => ModelKind::Retrieve,
            Checkpoint::Place(_) => ModelKind::Place,
            Checkpoint::Pick(_) => ModelKind::Pick,
        }
    }
}

fn write_spec(w: &mut ByteWriter, spec: &EncoderSpec) {
    w.u32(spec.expected_points as u32);
    w.u8(spec.levels.len() as u8);
    for level in &spec.levels {
        w.u32(level.centroids as u32);
        w.f64(level.radius);
        w.u32(level.max_group as u32);
        w.u8(level.mlp.len() as u8);
        for &width in &level.mlp {
            w.u32(width as u32);
        }
    }
    for stage in &spec.fp {
        w.u8(stage.len() as u8);
        for &width in stage {
            w.u32(width as u32);
        }
    }
}

fn read_spec(r: &mut ByteReader) -> Result<EncoderSpec> {
    let expected_points = r.u32()? as usize;
    let n_levels = r.u8()? as usize;
    if n_levels == 0 || n_levels > 8 {
        return Err(Error::format("implausible level count"));
    }
    let mut levels = Vec::with_capacity(n_levels);
    for _ in 0..n_levels {
        let centroids = r.u32()? as usize;
        let radius = r.f64()?;
        let max_group = r.u32()? as usize;
        let n_widths = r.u8()? as usize;
        let mut mlp = Vec::with_capacity(n_widths);
        for _ in 0..n_widths {
            mlp.push(r.u32()? as usize);
        }
        levels.push(LevelSpec { centroids, radius, max_group, mlp });
    }
    let mut fp = Vec::with_capacity(n_levels);
    for _ in 0..n_levels {
        let n_widths = r.u8()? as usize;
        let mut stage = Vec::with_capacity(n_widths);
        for _ in 0..n_widths {
            stage.push(r.u32()? as usize);
        }
        fp.push(stage);
    }
    let spec = EncoderSpec { levels, fp, expected_points };
    spec.validate()?;
    Ok(spec)
}

fn write_head(w: &mut ByteWriter, widths: &[usize]) {
    w.u8(widths.len() as u8);
    for &width in widths {
        w.u32(width as u32);
    }
}

fn read_head(r: &mut ByteReader, expected: &[usize]) -> Result<()> {
    let n = r.u8()? as usize;
    if n != expected.len() {
        return Err(Error::format("head depth mismatch"));
    }
    for &e in expected {
        if r.u32()? as usize != e {
            return Err(Error::format("head width mismatch"));
        }
    }
    Ok(())
}

fn write_tensors(w: &mut ByteWriter, flat: &[f32]) {
    w.u64(flat.len() as u64);
    for &v in flat {
        w.f32(v);
    }
}

fn read_tensors(r: &mut ByteReader, expected: usize) -> Result<Vec<f32>> {
    let n = r.u64()? as usize;
    if n != expected {
        return Err(Error::format(alloc::format!(
            "checkpoint has {n} parameters, architecture needs {expected}"
        )));
    }
    let mut flat = Vec::with_capacity(n);
    for _ in 0..n {
        flat.push(r.f32()?);
    }
    Ok(flat)
}

/// Serializes a retrieval or pick model.
pub fn encode_point_score(model: &PointScoreModel<f32>, kind: ModelKind) -> Result<Vec<u8>> {
    if kind == ModelKind::Place {
        return Err(Error::invalid("place models use encode_place"));
    }
    let mut w = ByteWriter::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u8(kind as u8);
    write_spec(&mut w, &model.encoder.spec);
    write_head(&mut w, &SCORE_HEAD);
    write_tensors(&mut w, &model.to_flat());
    Ok(w.into_bytes())
}

/// Serializes a place model (two encoders share one descriptor).
pub fn encode_place(model: &PlaceModel<f32>) -> Result<Vec<u8>> {
    if model.enc_pick.spec != model.enc_candidates.spec {
        return Err(Error::invalid("place encoders must share an architecture"));
    }
    let mut w = ByteWriter::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u8(ModelKind::Place as u8);
    write_spec(&mut w, &model.enc_pick.spec);
    write_head(&mut w, &PLACE_HEAD);
    write_tensors(&mut w, &model.to_flat());
    Ok(w.into_bytes())
}

/// Decodes any checkpoint, validating shapes against the descriptor.
pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(MAGIC, "model checkpoint")?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(alloc::format!("unsupported checkpoint version {version}")));
    }
    let kind = ModelKind::from_u8(r.u8()?)?;
    let spec = read_spec(&mut r)?;
    match kind {
        ModelKind::Retrieve | ModelKind::Pick => {
            read_head(&mut r, &SCORE_HEAD)?;
            let mut model = PointScoreModel::new(spec, 0)?;
            let flat = read_tensors(&mut r, model.param_count())?;
            r.expect_end()?;
            model.from_flat(&flat);
            if kind == ModelKind::Retrieve {
                Ok(Checkpoint::Retrieve(model))
            } else {
                Ok(Checkpoint::Pick(model))
            }
        }
        ModelKind::Place => {
            read_head(&mut r, &PLACE_HEAD)?;
            let mut model = PlaceModel::new(spec, 0)?;
            let flat = read_tensors(&mut r, model.param_count())?;
            r.expect_end()?;
            model.from_flat(&flat);
            Ok(Checkpoint::Place(model))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_score_roundtrip() {
        let model = PointScoreModel::<f32>::tiny(24, 5).unwrap();
        let bytes = encode_point_score(&model, ModelKind::Retrieve).unwrap();
        match decode(&bytes).unwrap() {
            Checkpoint::Retrieve(loaded) => assert_eq!(loaded, model),
            other => panic!("wrong kind {:?}", other.kind()),
        }
    }

    #[test]
    fn place_roundtrip() {
        let model = PlaceModel::<f32>::tiny(20, 6).unwrap();
        let bytes = encode_place(&model).unwrap();
        match decode(&bytes).unwrap() {
            Checkpoint::Place(loaded) => assert_eq!(loaded, model),
            other => panic!("wrong kind {:?}", other.kind()),
        }
    }

    #[test]
    fn corrupted_checkpoint_is_rejected() {
        let model = PointScoreModel::<f32>::tiny(24, 5).unwrap();
        let mut bytes = encode_point_score(&model, ModelKind::Pick).unwrap();
        bytes[1] = b'Z';
        assert!(decode(&bytes).is_err());
        // Truncated tensor data.
        let bytes = encode_point_score(&model, ModelKind::Pick).unwrap();
        assert!(decode(&bytes[..bytes.len() - 3]).is_err());
    }
}
