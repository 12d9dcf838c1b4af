//! Supervision data: sample/dataset types, their binary format, and the
//! hard-example buffer for online fine-tuning.
//!
//! A sample is one labeled query on one observed cloud. The scene behind it
//! is fully reproducible from `(scenario, scene_seed)` plus the run
//! configuration, so any stored label can be re-derived by re-running the
//! labeling rollout.

mod collect;
mod optimize;

pub use collect::{
    build_scene, collect_pick_data, collect_place_data, collect_retrieval_data, rederive_label,
};
pub use optimize::{
    accuracy_point_score, online_finetune_pick, online_finetune_place,
    online_finetune_retrieval, train_place, train_point_score, FinetuneConfig, FinetuneReport,
    LossCurve, TrainConfig,
};

use alloc::vec::Vec;

use crate::container::Scenario;
use crate::error::{Error, Result};
use crate::net::ModelKind;
use crate::wire::{ByteReader, ByteWriter};
use crate::Vec3;

pub const DATASET_MAGIC: &[u8; 4] = b"AFFD";
pub const DATASET_VERSION: u32 = 1;

/// One labeled query. Coordinates are stored at f32 precision (the training
/// dtype) both in memory and on the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub kind: ModelKind,
    pub scenario: Scenario,
    pub scene_seed: u64,
    pub coords: Vec<Vec3>,
    /// Query point index: the grasp point for retrieve, the pick point for
    /// pick, the place point for place.
    pub query: u32,
    /// Conditioning pick index (place samples only).
    pub pick: Option<u32>,
    pub label: u8,
}

impl Sample {
    fn validate(&self) -> Result<()> {
        if self.label > 1 {
            return Err(Error::format("label must be 0 or 1"));
        }
        if self.query as usize >= self.coords.len() {
            return Err(Error::format("query index out of range"));
        }
        if let Some(p) = self.pick {
            if p as usize >= self.coords.len() {
                return Err(Error::format("pick index out of range"));
            }
        }
        if (self.kind == ModelKind::Place) != self.pick.is_some() {
            return Err(Error::format("pick index is for place samples exactly"));
        }
        Ok(())
    }
}

/// Counts per (kind, label), plus the provenance needed to regenerate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub config_hash: u64,
    pub seed: u64,
    pub n_points: u32,
    pub lattice_points: u32,
    /// `[kind][label]` sample counts.
    pub counts: [[u64; 2]; 3],
}

impl DatasetManifest {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn count(&mut self, kind: ModelKind, label: u8) {
        self.counts[kind as usize][label as usize] += 1;
    }
}

/// An ordered sample list with its manifest.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(config_hash: u64, seed: u64, n_points: u32, lattice_points: u32) -> Self {
        Dataset {
            manifest: DatasetManifest {
                config_hash,
                seed,
                n_points,
                lattice_points,
                counts: [[0; 2]; 3],
            },
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, sample: Sample) {
        self.manifest.count(sample.kind, sample.label);
        self.samples.push(sample);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positives(&self, kind: ModelKind) -> u64 {
        self.manifest.counts[kind as usize][1]
    }

    pub fn negatives(&self, kind: ModelKind) -> u64 {
        self.manifest.counts[kind as usize][0]
    }

    /// Round a point to storage precision.
    pub fn quantize(p: &Vec3) -> Vec3 {
        Vec3::new(p.x as f32 as f64, p.y as f32 as f64, p.z as f32 as f64)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(DATASET_MAGIC);
        w.u32(DATASET_VERSION);
        w.u64(self.manifest.config_hash);
        w.u64(self.manifest.seed);
        w.u32(self.manifest.n_points);
        w.u32(self.manifest.lattice_points);
        for kind in &self.manifest.counts {
            for &count in kind {
                w.u64(count);
            }
        }
        w.u64(self.samples.len() as u64);
        for s in &self.samples {
            w.u8(s.kind as u8);
            w.u8(s.scenario as u8);
            w.u64(s.scene_seed);
            w.u32(s.coords.len() as u32);
            for p in &s.coords {
                w.f32(p.x as f32);
                w.f32(p.y as f32);
                w.f32(p.z as f32);
            }
            match s.pick {
                Some(pick) => {
                    w.u8(2);
                    w.u32(pick);
                    w.u32(s.query);
                }
                None => {
                    w.u8(1);
                    w.u32(s.query);
                }
            }
            w.u8(s.label);
        }
        w.into_bytes()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.expect_magic(DATASET_MAGIC, "dataset")?;
        let version = r.u32()?;
        if version != DATASET_VERSION {
            return Err(Error::format(alloc::format!("unsupported dataset version {version}")));
        }
        let mut manifest = DatasetManifest {
            config_hash: r.u64()?,
            seed: r.u64()?,
            n_points: r.u32()?,
            lattice_points: r.u32()?,
            counts: [[0; 2]; 3],
        };
        for kind in manifest.counts.iter_mut() {
            for count in kind.iter_mut() {
                *count = r.u64()?;
            }
        }
        let n_samples = r.u64()? as usize;
        if n_samples as u64 != manifest.total() {
            return Err(Error::format("manifest counts disagree with sample count"));
        }
        let mut samples = Vec::with_capacity(n_samples);
        let mut recount = [[0u64; 2]; 3];
        for _ in 0..n_samples {
            let kind = ModelKind::from_u8(r.u8()?)?;
            let scenario = Scenario::from_u8(r.u8()?)?;
            let scene_seed = r.u64()?;
            let n_coords = r.u32()? as usize;
            if n_coords > 1 << 20 {
                return Err(Error::format("implausible coordinate count"));
            }
            let mut coords = Vec::with_capacity(n_coords);
            for _ in 0..n_coords {
                coords.push(Vec3::new(r.f32()? as f64, r.f32()? as f64, r.f32()? as f64));
            }
            let n_idx = r.u8()?;
            let (pick, query) = match n_idx {
                1 => (None, r.u32()?),
                2 => (Some(r.u32()?), r.u32()?),
                other => return Err(Error::format(alloc::format!("bad index count {other}"))),
            };
            let label = r.u8()?;
            let sample = Sample { kind, scenario, scene_seed, coords, query, pick, label };
            sample.validate()?;
            recount[kind as usize][label as usize] += 1;
            samples.push(sample);
        }
        r.expect_end()?;
        if recount != manifest.counts {
            return Err(Error::format("manifest counts disagree with decoded samples"));
        }
        Ok(Dataset { manifest, samples })
    }
}

/// Fixed-capacity store of inference-time failures. When full, its contents
/// join an offline half-batch for one update, then it flushes.
#[derive(Debug, Clone)]
pub struct HardExampleBuffer {
    capacity: usize,
    items: Vec<Sample>,
}

impl HardExampleBuffer {
    pub fn new(capacity: usize) -> Self {
        HardExampleBuffer { capacity, items: Vec::with_capacity(capacity) }
    }

    /// Adds a failure; returns true when the buffer just reached capacity.
    pub fn push(&mut self, sample: Sample) -> bool {
        debug_assert!(self.items.len() < self.capacity);
        self.items.push(sample);
        self.items.len() == self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.items.len() >= self.capacity
    }

    pub fn drain(&mut self) -> Vec<Sample> {
        core::mem::take(&mut self.items)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(kind: ModelKind, seed: u64, label: u8) -> Sample {
        Sample {
            kind,
            scenario: Scenario::Sofa,
            scene_seed: seed,
            coords: alloc::vec![
                Dataset::quantize(&Vec3::new(0.1, 0.2, 0.3)),
                Dataset::quantize(&Vec3::new(-0.1, 0.05, 0.4)),
            ],
            query: 1,
            pick: (kind == ModelKind::Place).then_some(0),
            label,
        }
    }

    #[test]
    fn dataset_roundtrip_is_exact() {
        let mut ds = Dataset::new(0xfeed, 7, 2, 0);
        ds.push(sample(ModelKind::Retrieve, 1, 1));
        ds.push(sample(ModelKind::Place, 2, 0));
        ds.push(sample(ModelKind::Pick, 3, 1));
        let bytes = ds.encode();
        let decoded = Dataset::decode(&bytes).unwrap();
        assert_eq!(decoded, ds);
        assert_eq!(decoded.manifest.total(), 3);
    }

    #[test]
    fn manifest_mismatch_is_rejected() {
        let mut ds = Dataset::new(0, 0, 2, 0);
        ds.push(sample(ModelKind::Retrieve, 1, 1));
        let mut bytes = ds.encode();
        // Corrupt a manifest count (offset: magic 4 + version 4 + hash 8 +
        // seed 8 + n_points 4 + lattice 4 = 32; counts start here).
        bytes[32] = 9;
        assert!(Dataset::decode(&bytes).is_err());
    }

    #[test]
    fn buffer_flushes_at_capacity() {
        let mut buffer = HardExampleBuffer::new(64);
        for i in 0..63 {
            assert!(!buffer.push(sample(ModelKind::Retrieve, i, 0)), "not full at {i}");
        }
        assert_eq!(buffer.len(), 63);
        assert!(!buffer.is_full());
        assert!(buffer.push(sample(ModelKind::Retrieve, 63, 0)));
        assert!(buffer.is_full());
        let drained = buffer.drain();
        assert_eq!(drained.len(), 64);
        assert!(buffer.is_empty());
    }
}
