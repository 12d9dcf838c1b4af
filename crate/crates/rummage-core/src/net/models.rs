//! The three affordance models und their training-side entry points.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::net::encoder::{Encoder, EncoderSpec, OUT_DIM};
use crate::net::{bce, bce_sigmoid_grad, sigmoid, AffordanceMap, Mlp, Scalar};
use crate::rng::SceneRng;
use crate::Vec3;

/// Which of the three modules a set of parameters belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ModelKind {
    Retrieve = 0,
    Place = 1,
    Pick = 2,
}

impl ModelKind {
    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(ModelKind::Retrieve),
            1 => Ok(ModelKind::Place),
            2 => Ok(ModelKind::Pick),
            other => Err(Error::format(alloc::format!("unknown model kind {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Retrieve => "retrieve",
            ModelKind::Place => "place",
            ModelKind::Pick => "pick",
        }
    }
}

/// Head widths for the single-encoder models.
pub const SCORE_HEAD: [usize; 3] = [OUT_DIM, 64, 1];
/// Head widths for the place model (over the 2 x 128 concatenation).
pub const PLACE_HEAD: [usize; 4] = [2 * OUT_DIM, 128, 64, 1];

fn seeded_init<F: Scalar>(mlps: &mut [&mut Mlp<F>], seed: u64) {
    let mut rng = SceneRng::from_seed(seed);
    for mlp in mlps.iter_mut() {
        for layer in &mut mlp.layers {
            let limit = (6.0 / (layer.in_dim + layer.out_dim) as f64).sqrt();
            for w in layer.w.iter_mut() {
                *w = F::from_f64(rng.uniform(-limit, limit));
            }
            // Biases draw from a nonzero range: with zero biases, a group's
            // own-centroid row (relative position zero) sits exactly on the
            // rectifier kink, which breaks finite-difference checks.
            let b_limit = 1.0 / (layer.in_dim as f64).sqrt();
            for b in layer.b.iter_mut() {
                *b = F::from_f64(rng.uniform(-b_limit, b_limit));
            }
        }
    }
}

/// Encoder + sigmoid head scoring each point; used for both the retrieval
/// and the pick modules.
#[derive(Debug, Clone, PartialEq)]
pub struct PointScoreModel<F> {
    pub encoder: Encoder<F>,
    pub head: Mlp<F>,
}

impl<F: Scalar> PointScoreModel<F> {
    pub fn new(spec: EncoderSpec, seed: u64) -> Result<Self> {
        let encoder = Encoder::zeros(spec)?;
        let head = Mlp::zeros(&SCORE_HEAD, false);
        let mut model = PointScoreModel { encoder, head };
        let mut refs: Vec<&mut Mlp<F>> = Vec::new();
        refs.extend(model.encoder.sa.iter_mut());
        refs.extend(model.encoder.fp.iter_mut());
        refs.push(&mut model.head);
        seeded_init(&mut refs, seed);
        Ok(model)
    }

    /// Desk-scale architecture for `n`-point clouds.
    pub fn desk(n: usize, seed: u64) -> Result<Self> {
        Self::new(EncoderSpec::desk(n), seed)
    }

    /// Miniature architecture for gradient checks.
    pub fn tiny(n: usize, seed: u64) -> Result<Self> {
        Self::new(EncoderSpec::tiny(n), seed)
    }

    pub fn expected_points(&self) -> usize {
        self.encoder.spec.expected_points
    }

    /// Per-point scores in `(0, 1)`.
    pub fn forward(&self, coords: &[Vec3]) -> Result<Vec<F>> {
        let cache = self.encoder.forward(coords)?;
        let n = coords.len();
        let (logits, _) = self.head.forward_rows(cache.features, n);
        Ok(logits.into_iter().map(sigmoid).collect())
    }

    /// Mean BCE loss and parameter gradients over a batch of clouds.
    ///
    /// Each cloud is encoded once; per-point losses gather at the query
    /// indices. Gradients are scaled by the total item count.
    pub fn loss_grad(&self, batch: &[ScoreBatch<'_>]) -> Result<(f64, PointScoreModel<F>)> {
        let total: usize = batch.iter().map(|b| b.items.len()).sum();
        if total == 0 {
            return Err(Error::net_input("empty batch"));
        }
        let inv = F::from_f64(1.0 / total as f64);
        let mut grads = self.zeros_like();
        let mut loss_sum = 0.0f64;
        for cloud in batch {
            let n = cloud.coords.len();
            let cache = self.encoder.forward(cloud.coords)?;
            // Gather queried feature rows into one head batch.
            let rows = cloud.items.len();
            let mut head_in = alloc::vec![F::zero(); rows * OUT_DIM];
            for (r, &(q, _)) in cloud.items.iter().enumerate() {
                if q >= n {
                    return Err(Error::net_input(alloc::format!("query index {q} out of range")));
                }
                head_in[r * OUT_DIM..(r + 1) * OUT_DIM]
                    .copy_from_slice(&cache.features[q * OUT_DIM..(q + 1) * OUT_DIM]);
            }
            let (logits, head_cache) = self.head.forward_rows(head_in, rows);
            let mut d_logits = alloc::vec![F::zero(); rows];
            for (r, &(_, label)) in cloud.items.iter().enumerate() {
                let p = sigmoid(logits[r]);
                loss_sum += bce(p, label)?.to_f64();
                d_logits[r] = bce_sigmoid_grad(p, label) * inv;
            }
            let d_head_in = self.head.backward_rows(&head_cache, d_logits, &mut grads.head);
            // Scatter the queried-feature gradients into the dense buffer.
            let mut d_features = alloc::vec![F::zero(); n * OUT_DIM];
            for (r, &(q, _)) in cloud.items.iter().enumerate() {
                let src = &d_head_in[r * OUT_DIM..(r + 1) * OUT_DIM];
                let dst = &mut d_features[q * OUT_DIM..(q + 1) * OUT_DIM];
                for (a, b) in dst.iter_mut().zip(src) {
                    *a += *b;
                }
            }
            self.encoder.backward(&cache, d_features, &mut grads.encoder);
        }
        grads.check_finite()?;
        Ok((loss_sum / total as f64, grads))
    }

    pub fn zeros_like(&self) -> Self {
        PointScoreModel {
            encoder: self.encoder.zeros_like(),
            head: self.head.zeros_like(),
        }
    }

    pub fn for_each_tensor(&self, f: &mut impl FnMut(&[F])) {
        self.encoder.for_each_tensor(f);
        self.head.for_each_tensor(f);
    }

    pub fn for_each_tensor_mut(&mut self, f: &mut impl FnMut(&mut Vec<F>)) {
        self.encoder.for_each_tensor_mut(f);
        self.head.for_each_tensor_mut(f);
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.for_each_tensor(&mut |t| n += t.len());
        n
    }

    pub fn to_flat(&self) -> Vec<F> {
        let mut flat = Vec::with_capacity(self.param_count());
        self.for_each_tensor(&mut |t| flat.extend_from_slice(t));
        flat
    }

    pub fn from_flat(&mut self, flat: &[F]) {
        let mut pos = 0;
        self.for_each_tensor_mut(&mut |t| {
            let len = t.len();
            t.copy_from_slice(&flat[pos..pos + len]);
            pos += len;
        });
        debug_assert_eq!(pos, flat.len());
    }

    fn check_finite(&self) -> Result<()> {
        let mut ok = true;
        self.for_each_tensor(&mut |t| {
            if t.iter().any(|v| !v.is_finite()) {
                ok = false;
            }
        });
        if ok {
            Ok(())
        } else {
            Err(Error::NonFiniteTensor { tensor: "point-score gradients" })
        }
    }
}

impl PointScoreModel<f32> {
    pub fn affordance(&self, coords: &[Vec3]) -> Result<AffordanceMap> {
        AffordanceMap::new(self.forward(coords)?)
    }
}

/// One cloud's worth of (query index, label) supervision.
#[derive(Debug, Clone, Copy)]
pub struct ScoreBatch<'a> {
    pub coords: &'a [Vec3],
    pub items: &'a [(usize, u8)],
}

/// Convenience free function mirroring the module-level operation map.
pub fn point_score_loss_grad<F: Scalar>(
    model: &PointScoreModel<F>,
    batch: &[ScoreBatch<'_>],
) -> Result<(f64, PointScoreModel<F>)> {
    model.loss_grad(batch)
}

/// Two encoders (pick-point context and place candidates) with a head over
/// the 256-d concatenation.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaceModel<F> {
    pub enc_pick: Encoder<F>,
    pub enc_candidates: Encoder<F>,
    pub head: Mlp<F>,
}

impl<F: Scalar> PlaceModel<F> {
    pub fn new(spec: EncoderSpec, seed: u64) -> Result<Self> {
        let enc_pick = Encoder::zeros(spec.clone())?;
        let enc_candidates = Encoder::zeros(spec)?;
        let head = Mlp::zeros(&PLACE_HEAD, false);
        debug_assert_eq!(head.in_dim(), 2 * OUT_DIM);
        let mut model = PlaceModel { enc_pick, enc_candidates, head };
        let mut refs: Vec<&mut Mlp<F>> = Vec::new();
        refs.extend(model.enc_pick.sa.iter_mut());
        refs.extend(model.enc_pick.fp.iter_mut());
        refs.extend(model.enc_candidates.sa.iter_mut());
        refs.extend(model.enc_candidates.fp.iter_mut());
        refs.push(&mut model.head);
        seeded_init(&mut refs, seed);
        Ok(model)
    }

    pub fn desk(n: usize, seed: u64) -> Result<Self> {
        Self::new(EncoderSpec::desk(n), seed)
    }

    pub fn tiny(n: usize, seed: u64) -> Result<Self> {
        Self::new(EncoderSpec::tiny(n), seed)
    }

    pub fn expected_points(&self) -> usize {
        self.enc_pick.spec.expected_points
    }

    /// Scores every point as a place target conditioned on `pick_index`.
    pub fn forward(&self, coords: &[Vec3], pick_index: usize) -> Result<Vec<F>> {
        if pick_index >= coords.len() {
            return Err(Error::net_input(alloc::format!(
                "pick index {pick_index} out of range for {} points",
                coords.len()
            )));
        }
        let pick_cache = self.enc_pick.forward(coords)?;
        let cand_cache = self.enc_candidates.forward(coords)?;
        let n = coords.len();
        let f_pick = &pick_cache.features[pick_index * OUT_DIM..(pick_index + 1) * OUT_DIM];
        let mut head_in = alloc::vec![F::zero(); n * 2 * OUT_DIM];
        for i in 0..n {
            head_in[i * 2 * OUT_DIM..i * 2 * OUT_DIM + OUT_DIM].copy_from_slice(f_pick);
            head_in[i * 2 * OUT_DIM + OUT_DIM..(i + 1) * 2 * OUT_DIM]
                .copy_from_slice(&cand_cache.features[i * OUT_DIM..(i + 1) * OUT_DIM]);
        }
        let (logits, _) = self.head.forward_rows(head_in, n);
        Ok(logits.into_iter().map(sigmoid).collect())
    }

    /// Mean BCE loss and gradients over (pick, place, label) triples.
    pub fn loss_grad(&self, batch: &[PlaceBatch<'_>]) -> Result<(f64, PlaceModel<F>)> {
        let total: usize = batch.iter().map(|b| b.items.len()).sum();
        if total == 0 {
            return Err(Error::net_input("empty batch"));
        }
        let inv = F::from_f64(1.0 / total as f64);
        let mut grads = self.zeros_like();
        let mut loss_sum = 0.0f64;
        for cloud in batch {
            let n = cloud.coords.len();
            let pick_cache = self.enc_pick.forward(cloud.coords)?;
            let cand_cache = self.enc_candidates.forward(cloud.coords)?;
            let rows = cloud.items.len();
            let mut head_in = alloc::vec![F::zero(); rows * 2 * OUT_DIM];
            for (r, &(pick, place, _)) in cloud.items.iter().enumerate() {
                if pick >= n || place >= n {
                    return Err(Error::net_input("pick/place index out of range"));
                }
                head_in[r * 2 * OUT_DIM..r * 2 * OUT_DIM + OUT_DIM]
                    .copy_from_slice(&pick_cache.features[pick * OUT_DIM..(pick + 1) * OUT_DIM]);
                head_in[r * 2 * OUT_DIM + OUT_DIM..(r + 1) * 2 * OUT_DIM]
                    .copy_from_slice(&cand_cache.features[place * OUT_DIM..(place + 1) * OUT_DIM]);
            }
            let (logits, head_cache) = self.head.forward_rows(head_in, rows);
            let mut d_logits = alloc::vec![F::zero(); rows];
            for (r, &(_, _, label)) in cloud.items.iter().enumerate() {
                let p = sigmoid(logits[r]);
                loss_sum += bce(p, label)?.to_f64();
                d_logits[r] = bce_sigmoid_grad(p, label) * inv;
            }
            let d_head_in = self.head.backward_rows(&head_cache, d_logits, &mut grads.head);
            let mut d_pick_features = alloc::vec![F::zero(); n * OUT_DIM];
            let mut d_cand_features = alloc::vec![F::zero(); n * OUT_DIM];
            for (r, &(pick, place, _)) in cloud.items.iter().enumerate() {
                let row = &d_head_in[r * 2 * OUT_DIM..(r + 1) * 2 * OUT_DIM];
                let dst = &mut d_pick_features[pick * OUT_DIM..(pick + 1) * OUT_DIM];
                for (a, b) in dst.iter_mut().zip(&row[..OUT_DIM]) {
                    *a += *b;
                }
                let dst = &mut d_cand_features[place * OUT_DIM..(place + 1) * OUT_DIM];
                for (a, b) in dst.iter_mut().zip(&row[OUT_DIM..]) {
                    *a += *b;
                }
            }
            self.enc_pick.backward(&pick_cache, d_pick_features, &mut grads.enc_pick);
            self.enc_candidates.backward(&cand_cache, d_cand_features, &mut grads.enc_candidates);
        }
        grads.check_finite()?;
        Ok((loss_sum / total as f64, grads))
    }

    pub fn zeros_like(&self) -> Self {
        PlaceModel {
            enc_pick: self.enc_pick.zeros_like(),
            enc_candidates: self.enc_candidates.zeros_like(),
            head: self.head.zeros_like(),
        }
    }

    pub fn for_each_tensor(&self, f: &mut impl FnMut(&[F])) {
        self.enc_pick.for_each_tensor(f);
        self.enc_candidates.for_each_tensor(f);
        self.head.for_each_tensor(f);
    }

    pub fn for_each_tensor_mut(&mut self, f: &mut impl FnMut(&mut Vec<F>)) {
        self.enc_pick.for_each_tensor_mut(f);
        self.enc_candidates.for_each_tensor_mut(f);
        self.head.for_each_tensor_mut(f);
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.for_each_tensor(&mut |t| n += t.len());
        n
    }

    pub fn to_flat(&self) -> Vec<F> {
        let mut flat = Vec::with_capacity(self.param_count());
        self.for_each_tensor(&mut |t| flat.extend_from_slice(t));
        flat
    }

    pub fn from_flat(&mut self, flat: &[F]) {
        let mut pos = 0;
        self.for_each_tensor_mut(&mut |t| {
            let len = t.len();
            t.copy_from_slice(&flat[pos..pos + len]);
            pos += len;
        });
        debug_assert_eq!(pos, flat.len());
    }

    fn check_finite(&self) -> Result<()> {
        let mut ok = true;
        self.for_each_tensor(&mut |t| {
            if t.iter().any(|v| !v.is_finite()) {
                ok = false;
            }
        });
        if ok {
            Ok(())
        } else {
            Err(Error::NonFiniteTensor { tensor: "place gradients" })
        }
    }
}

impl PlaceModel<f32> {
    pub fn affordance(&self, coords: &[Vec3], pick_index: usize) -> Result<AffordanceMap> {
        AffordanceMap::new(self.forward(coords, pick_index)?)
    }
}

/// One cloud's worth of (pick index, place index, label) supervision.
#[derive(Debug, Clone, Copy)]
pub struct PlaceBatch<'a> {
    pub coords: &'a [Vec3],
    pub items: &'a [(usize, usize, u8)],
}

pub fn place_loss_grad<F: Scalar>(
    model: &PlaceModel<F>,
    batch: &[PlaceBatch<'_>],
) -> Result<(f64, PlaceModel<F>)> {
    model.loss_grad(batch)
}

/// The three trained modules used by the policy.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub retrieval: PointScoreModel<f32>,
    pub place: PlaceModel<f32>,
    pub pick: PointScoreModel<f32>,
    /// Cloud size the place model expects (observation plus lattice).
    pub place_points: usize,
}
