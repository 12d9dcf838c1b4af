//! Hierarchical point-set encoder.
//!
//! Set-abstraction levels downsample the cloud by farthest point sampling,
//! group neighbors within a radius, run a shared MLP over each member's
//! relative position (and carried features), and max-pool per group. The
//! final level pools globally. Feature propagation then interpolates
//! features back down level by level with inverse-square-distance 3-NN
//! weights, concatenating each level's skip features, until every input
//! point carries a 128-d feature.
//!
//! Determinism and permutation behavior: farthest point sampling starts at
//! the lexicographically smallest point, groups keep their nearest members
//! (ties to the lower index), and reductions run in selection order, so the
//! whole encode is a function of the point *set* up to exact coordinate
//! ties.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::net::{c, Mlp, MlpCache, Scalar};
use crate::Vec3;

/// Output feature width of every encoder.
pub const OUT_DIM: usize = 128;

/// One set-abstraction level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSpec {
    /// Number of farthest-point-sampled centroids (clamped to the input size).
    pub centroids: usize,
    /// Grouping radius in normalized units; infinity for a global level.
    pub radius: f64,
    /// Most members kept per group (nearest first).
    pub max_group: usize,
    /// Output widths of the per-member MLP (input width is derived).
    pub mlp: Vec<usize>,
}

/// Full encoder architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderSpec {
    pub levels: Vec<LevelSpec>,
    /// Output widths of each feature-propagation stage, top-down; the last
    /// stage must end at [`OUT_DIM`].
    pub fp: Vec<Vec<usize>>,
    /// Cloud size this encoder accepts.
    pub expected_points: usize,
}

impl EncoderSpec {
    /// Desk-scale default: 128/32/1 centroids with grouping radii sized to
    /// the observed clouds' normalized point spacing.
    pub fn desk(expected_points: usize) -> Self {
        EncoderSpec {
            levels: alloc::vec![
                LevelSpec { centroids: 128, radius: 0.25, max_group: 16, mlp: alloc::vec![32, 32] },
                LevelSpec { centroids: 32, radius: 0.55, max_group: 16, mlp: alloc::vec![64, 64] },
                LevelSpec { centroids: 1, radius: f64::INFINITY, max_group: 64, mlp: alloc::vec![128, 128] },
            ],
            fp: alloc::vec![alloc::vec![96], alloc::vec![96], alloc::vec![OUT_DIM]],
            expected_points,
        }
    }

    /// Miniature architecture used by gradient checks.
    pub fn tiny(expected_points: usize) -> Self {
        EncoderSpec {
            levels: alloc::vec![
                LevelSpec { centroids: 8, radius: 0.5, max_group: 4, mlp: alloc::vec![8, 8] },
                LevelSpec { centroids: 4, radius: 1.0, max_group: 4, mlp: alloc::vec![12] },
                LevelSpec { centroids: 1, radius: f64::INFINITY, max_group: 8, mlp: alloc::vec![16] },
            ],
            fp: alloc::vec![alloc::vec![12], alloc::vec![12], alloc::vec![OUT_DIM]],
            expected_points,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::net_input("encoder needs at least one level"));
        }
        if self.expected_points == 0 {
            return Err(Error::net_input("expected_points must be > 0"));
        }
        let mut prev_radius = 0.0f64;
        for (i, level) in self.levels.iter().enumerate() {
            if level.centroids == 0 || level.max_group == 0 || level.mlp.is_empty() {
                return Err(Error::net_input(alloc::format!("level {i} is degenerate")));
            }
            if !(level.radius > prev_radius) {
                return Err(Error::net_input("grouping radii must be strictly increasing"));
            }
            prev_radius = level.radius;
        }
        if self.fp.len() != self.levels.len() {
            return Err(Error::net_input("one propagation stage per level is required"));
        }
        if self.fp.iter().any(|w| w.is_empty()) {
            return Err(Error::net_input("propagation stages need at least one layer"));
        }
        if *self.fp.last().unwrap().last().unwrap() != OUT_DIM {
            return Err(Error::net_input(alloc::format!(
                "final per-point feature width must be {OUT_DIM}"
            )));
        }
        Ok(())
    }

    fn level_dim(&self, l: usize) -> usize {
        *self.levels[l].mlp.last().unwrap()
    }

    /// (input width, full widths) of the SA MLP at level `l`.
    fn sa_widths(&self, l: usize) -> Vec<usize> {
        let d_prev = if l == 0 { 0 } else { self.level_dim(l - 1) };
        let mut widths = alloc::vec![3 + d_prev];
        widths.extend_from_slice(&self.levels[l].mlp);
        widths
    }

    /// (source dim, skip dim, full widths) of FP stage `j` (j = 0 starts at
    /// the top level).
    fn fp_widths(&self, j: usize) -> (usize, usize, Vec<usize>) {
        let n_levels = self.levels.len();
        let src_dim = if j == 0 {
            self.level_dim(n_levels - 1)
        } else {
            *self.fp[j - 1].last().unwrap()
        };
        let target = n_levels - j - 1; // point-set index P_target
        let skip_dim = if target >= 1 { self.level_dim(target - 1) } else { 3 };
        let mut widths = alloc::vec![src_dim + skip_dim];
        widths.extend_from_slice(&self.fp[j]);
        (src_dim, skip_dim, widths)
    }
}

/// Encoder parameters: one MLP per SA level and per FP stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder<F> {
    pub spec: EncoderSpec,
    pub sa: Vec<Mlp<F>>,
    pub fp: Vec<Mlp<F>>,
}

impl<F: Scalar> Encoder<F> {
    pub fn zeros(spec: EncoderSpec) -> Result<Self> {
        spec.validate()?;
        let sa = (0..spec.levels.len())
            .map(|l| Mlp::zeros(&spec.sa_widths(l), true))
            .collect();
        let fp = (0..spec.levels.len())
            .map(|j| Mlp::zeros(&spec.fp_widths(j).2, true))
            .collect();
        Ok(Encoder { spec, sa, fp })
    }

    pub fn zeros_like(&self) -> Self {
        Encoder {
            spec: self.spec.clone(),
            sa: self.sa.iter().map(Mlp::zeros_like).collect(),
            fp: self.fp.iter().map(Mlp::zeros_like).collect(),
        }
    }

    pub fn for_each_tensor(&self, f: &mut impl FnMut(&[F])) {
        for m in self.sa.iter().chain(&self.fp) {
            m.for_each_tensor(f);
        }
    }

    pub fn for_each_tensor_mut(&mut self, f: &mut impl FnMut(&mut Vec<F>)) {
        for m in self.sa.iter_mut().chain(self.fp.iter_mut()) {
            m.for_each_tensor_mut(f);
        }
    }

    /// Forward encode: returns per-point features (`n x OUT_DIM`) plus the
    /// cache required for the backward pass.
    pub fn forward(&self, coords: &[Vec3]) -> Result<EncodeCache<F>> {
        if coords.len() != self.spec.expected_points {
            return Err(Error::net_input(alloc::format!(
                "cloud has {} points, encoder expects {}",
                coords.len(),
                self.spec.expected_points
            )));
        }
        for (i, p) in coords.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::net_input(alloc::format!("non-finite coordinate at {i}")));
            }
        }
        let n = coords.len();

        // Center to the centroid, scale to unit bounding radius.
        let mut center = Vec3::zeros();
        for p in coords {
            center += p;
        }
        center /= n as f64;
        let mut scale = 0.0f64;
        for p in coords {
            scale = scale.max((p - center).norm());
        }
        if scale < 1e-9 {
            scale = 1.0;
        }
        let pts0: Vec<[F; 3]> = coords
            .iter()
            .map(|p| {
                [
                    c::<F>((p.x - center.x) / scale),
                    c::<F>((p.y - center.y) / scale),
                    c::<F>((p.z - center.z) / scale),
                ]
            })
            .collect();

        let n_levels = self.spec.levels.len();
        let mut level_points: Vec<Vec<[F; 3]>> = alloc::vec![pts0];
        let mut sa_caches: Vec<SaCache<F>> = Vec::with_capacity(n_levels);

        for l in 0..n_levels {
            let spec = &self.spec.levels[l];
            let prev_pts = &level_points[l];
            let prev_dim = if l == 0 { 0 } else { self.spec.level_dim(l - 1) };
            let s = spec.centroids.min(prev_pts.len());
            let start = lex_min_index(prev_pts);
            let selected = fps_indices(prev_pts, s, start);

            let mut group_offsets = Vec::with_capacity(s + 1);
            let mut groups_flat: Vec<usize> = Vec::new();
            let r2 = if spec.radius.is_finite() {
                c::<F>(spec.radius * spec.radius)
            } else {
                F::infinity()
            };
            for &ci in &selected {
                group_offsets.push(groups_flat.len());
                let cp = prev_pts[ci];
                let mut members: Vec<(F, usize)> = Vec::new();
                for (pi, p) in prev_pts.iter().enumerate() {
                    let d2 = dist2(p, &cp);
                    if d2 <= r2 {
                        members.push((d2, pi));
                    }
                }
                members.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                members.truncate(spec.max_group);
                groups_flat.extend(members.iter().map(|m| m.1));
            }
            group_offsets.push(groups_flat.len());

            // Member rows: [relative position, carried features].
            let in_dim = 3 + prev_dim;
            let rows = groups_flat.len();
            let mut inputs = alloc::vec![F::zero(); rows * in_dim];
            for gi in 0..s {
                let cp = level_points[l][selected[gi]];
                for slot in group_offsets[gi]..group_offsets[gi + 1] {
                    let pi = groups_flat[slot];
                    let p = level_points[l][pi];
                    let row = &mut inputs[slot * in_dim..(slot + 1) * in_dim];
                    row[0] = p[0] - cp[0];
                    row[1] = p[1] - cp[1];
                    row[2] = p[2] - cp[2];
                    if prev_dim > 0 {
                        let feats = &sa_caches[l - 1].pooled;
                        row[3..].copy_from_slice(&feats[pi * prev_dim..(pi + 1) * prev_dim]);
                    }
                }
            }
            let (member_out, mlp_cache) = self.sa[l].forward_rows(inputs, rows);

            // Max-pool per group, recording the winning member row.
            let d_out = self.spec.level_dim(l);
            let mut pooled = alloc::vec![F::zero(); s * d_out];
            let mut argmax_rows = alloc::vec![0usize; s * d_out];
            for gi in 0..s {
                let lo = group_offsets[gi];
                let hi = group_offsets[gi + 1];
                debug_assert!(hi > lo, "group must contain its centroid");
                for k in 0..d_out {
                    let mut best_row = lo;
                    let mut best = member_out[lo * d_out + k];
                    for row in (lo + 1)..hi {
                        let v = member_out[row * d_out + k];
                        if v > best {
                            best = v;
                            best_row = row;
                        }
                    }
                    pooled[gi * d_out + k] = best;
                    argmax_rows[gi * d_out + k] = best_row;
                }
            }

            let next_pts: Vec<[F; 3]> = selected.iter().map(|&i| level_points[l][i]).collect();
            level_points.push(next_pts);
            let _ = member_out;
            sa_caches.push(SaCache {
                groups_flat,
                group_offsets,
                mlp_cache,
                argmax_rows,
                pooled,
            });
        }

        // Feature propagation back down to the raw points.
        let mut fp_caches: Vec<FpCache<F>> = Vec::with_capacity(n_levels);
        for j in 0..n_levels {
            let src_set = n_levels - j; // point-set index
            let target_set = src_set - 1;
            let (src_dim, skip_dim, _) = self.spec.fp_widths(j);
            let src_pts = &level_points[src_set];
            let target_pts = &level_points[target_set];
            let src_feats: &[F] = if j == 0 {
                &sa_caches[n_levels - 1].pooled
            } else {
                &fp_caches[j - 1].out
            };

            let n_t = target_pts.len();
            let mut nn = Vec::with_capacity(n_t);
            let in_dim = src_dim + skip_dim;
            let mut inputs = alloc::vec![F::zero(); n_t * in_dim];
            for (ti, tp) in target_pts.iter().enumerate() {
                let (idxs, ws, k) = nearest3(src_pts, tp);
                let row = &mut inputs[ti * in_dim..(ti + 1) * in_dim];
                for m in 0..k {
                    let f = &src_feats[idxs[m] * src_dim..(idxs[m] + 1) * src_dim];
                    for (d, fv) in row[..src_dim].iter_mut().zip(f) {
                        *d += ws[m] * *fv;
                    }
                }
                // Skip features: the target level's own SA output, or the
                // normalized coordinates at the raw level.
                if target_set >= 1 {
                    let d_skip = self.spec.level_dim(target_set - 1);
                    let skip = &sa_caches[target_set - 1].pooled
                        [ti * d_skip..(ti + 1) * d_skip];
                    row[src_dim..].copy_from_slice(skip);
                } else {
                    row[src_dim..].copy_from_slice(&level_points[0][ti]);
                }
                nn.push((idxs, ws, k));
            }
            let (out, mlp_cache) = self.fp[j].forward_rows(inputs, n_t);
            fp_caches.push(FpCache { nn, mlp_cache, out });
        }

        let features = fp_caches[n_levels - 1].out.clone();
        Ok(EncodeCache {
            level_points,
            sa: sa_caches,
            fp: fp_caches,
            features,
        })
    }

    /// Backward pass: scatters `d_features` (`n x OUT_DIM`) through the
    /// propagation and abstraction stages, accumulating parameter gradients.
    pub fn backward(&self, cache: &EncodeCache<F>, d_features: Vec<F>, grads: &mut Encoder<F>) {
        let n_levels = self.spec.levels.len();
        // Per-level gradients of the pooled SA features.
        let mut d_sa_pooled: Vec<Vec<F>> = (0..n_levels)
            .map(|l| alloc::vec![F::zero(); cache.sa[l].pooled.len()])
            .collect();

        // FP stages in reverse (raw-point stage first).
        let mut d_fp_out: Vec<Option<Vec<F>>> = alloc::vec![None; n_levels];
        d_fp_out[n_levels - 1] = Some(d_features);
        for j in (0..n_levels).rev() {
            let d_out = d_fp_out[j].take().expect("stage gradient present");
            let (src_dim, _skip_dim, _) = self.spec.fp_widths(j);
            let d_concat = self.fp[j].backward_rows(&cache.fp[j].mlp_cache, d_out, &mut grads.fp[j]);
            let target_set = n_levels - j - 1;
            let in_dim = d_concat.len() / cache.fp[j].nn.len();
            // Where does the interpolated part flow?
            enum Dst {
                Sa(usize),
                Fp(usize),
            }
            let dst = if j == 0 { Dst::Sa(n_levels - 1) } else { Dst::Fp(j - 1) };
            let mut d_src = match &dst {
                Dst::Sa(l) => core::mem::take(&mut d_sa_pooled[*l]),
                Dst::Fp(prev) => alloc::vec![F::zero(); cache.fp[*prev].out.len()],
            };
            for (ti, (idxs, ws, k)) in cache.fp[j].nn.iter().enumerate() {
                let row = &d_concat[ti * in_dim..(ti + 1) * in_dim];
                for m in 0..*k {
                    let dstrow = &mut d_src[idxs[m] * src_dim..(idxs[m] + 1) * src_dim];
                    for (dsv, dv) in dstrow.iter_mut().zip(&row[..src_dim]) {
                        *dsv += ws[m] * *dv;
                    }
                }
                // Skip part flows to the target level's SA output.
                if target_set >= 1 {
                    let d_skip = &row[src_dim..];
                    let dst = &mut d_sa_pooled[target_set - 1]
                        [ti * d_skip.len()..(ti + 1) * d_skip.len()];
                    for (a, b) in dst.iter_mut().zip(d_skip) {
                        *a += *b;
                    }
                }
            }
            match dst {
                Dst::Sa(l) => d_sa_pooled[l] = d_src,
                Dst::Fp(prev) => d_fp_out[prev] = Some(d_src),
            }
        }

        // SA levels top-down.
        for l in (0..n_levels).rev() {
            let sa_cache = &cache.sa[l];
            let d_out_dim = self.spec.level_dim(l);
            let rows = sa_cache.groups_flat.len();
            let mut d_member_out = alloc::vec![F::zero(); rows * d_out_dim];
            let s = sa_cache.group_offsets.len() - 1;
            for gi in 0..s {
                for k in 0..d_out_dim {
                    let g = d_sa_pooled[l][gi * d_out_dim + k];
                    if g != F::zero() {
                        let row = sa_cache.argmax_rows[gi * d_out_dim + k];
                        d_member_out[row * d_out_dim + k] += g;
                    }
                }
            }
            let d_member_in =
                self.sa[l].backward_rows(&sa_cache.mlp_cache, d_member_out, &mut grads.sa[l]);
            if l >= 1 {
                let prev_dim = self.spec.level_dim(l - 1);
                let in_dim = 3 + prev_dim;
                for (slot, &pi) in sa_cache.groups_flat.iter().enumerate() {
                    let src = &d_member_in[slot * in_dim + 3..(slot + 1) * in_dim];
                    let dst = &mut d_sa_pooled[l - 1][pi * prev_dim..(pi + 1) * prev_dim];
                    for (a, b) in dst.iter_mut().zip(src) {
                        *a += *b;
                    }
                }
            }
        }
    }
}

/// Forward-pass memoization for [`Encoder::backward`].
pub struct EncodeCache<F> {
    /// Positions per point set (raw points first, then each level's
    /// centroids); kept for tests and debugging.
    #[allow(dead_code)]
    level_points: Vec<Vec<[F; 3]>>,
    sa: Vec<SaCache<F>>,
    fp: Vec<FpCache<F>>,
    /// Per-point output features, `n x OUT_DIM`.
    pub features: Vec<F>,
}

struct SaCache<F> {
    groups_flat: Vec<usize>,
    group_offsets: Vec<usize>,
    mlp_cache: MlpCache<F>,
    argmax_rows: Vec<usize>,
    pooled: Vec<F>,
}

struct FpCache<F> {
    nn: Vec<([usize; 3], [F; 3], usize)>,
    mlp_cache: MlpCache<F>,
    out: Vec<F>,
}

fn dist2<F: Scalar>(a: &[F; 3], b: &[F; 3]) -> F {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn lex_min_index<F: Scalar>(pts: &[[F; 3]]) -> usize {
    let mut best = 0;
    for i in 1..pts.len() {
        let (a, b) = (&pts[i], &pts[best]);
        let less = match a[0].partial_cmp(&b[0]).unwrap() {
            core::cmp::Ordering::Less => true,
            core::cmp::Ordering::Greater => false,
            core::cmp::Ordering::Equal => match a[1].partial_cmp(&b[1]).unwrap() {
                core::cmp::Ordering::Less => true,
                core::cmp::Ordering::Greater => false,
                core::cmp::Ordering::Equal => a[2] < b[2],
            },
        };
        if less {
            best = i;
        }
    }
    best
}

/// Greedy max-min selection; ties to the lowest index.
fn fps_indices<F: Scalar>(pts: &[[F; 3]], n: usize, start: usize) -> Vec<usize> {
    let mut selected = Vec::with_capacity(n);
    if n == 0 || pts.is_empty() {
        return selected;
    }
    let mut dist: Vec<F> = pts.iter().map(|p| dist2(p, &pts[start])).collect();
    selected.push(start);
    while selected.len() < n {
        let mut best = 0;
        for i in 1..pts.len() {
            if dist[i] > dist[best] {
                best = i;
            }
        }
        selected.push(best);
        for i in 0..pts.len() {
            let d = dist2(&pts[i], &pts[best]);
            if d < dist[i] {
                dist[i] = d;
            }
        }
    }
    selected
}

/// Up to three nearest source points with inverse-square-distance weights.
fn nearest3<F: Scalar>(src: &[[F; 3]], target: &[F; 3]) -> ([usize; 3], [F; 3], usize) {
    let k = src.len().min(3);
    let mut idxs = [0usize; 3];
    let mut d2s = [F::infinity(); 3];
    for (i, p) in src.iter().enumerate() {
        let d = dist2(p, target);
        // Insertion into the top-3 (strict less keeps lowest-index ties).
        for slot in 0..3 {
            if d < d2s[slot] {
                for back in (slot + 1..3).rev() {
                    d2s[back] = d2s[back - 1];
                    idxs[back] = idxs[back - 1];
                }
                d2s[slot] = d;
                idxs[slot] = i;
                break;
            }
        }
    }
    let eps = c::<F>(1e-12);
    let mut ws = [F::zero(); 3];
    let mut total = F::zero();
    for m in 0..k {
        ws[m] = F::one() / (d2s[m] + eps);
        total += ws[m];
    }
    for w in ws.iter_mut().take(k) {
        *w = *w / total;
    }
    (idxs, ws, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SceneRng;

    fn random_cloud(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = SceneRng::from_seed(seed);
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.uniform(-0.3, 0.3),
                    rng.uniform(-0.3, 0.3),
                    rng.uniform(0.0, 0.25),
                )
            })
            .collect()
    }

    fn seeded_encoder(spec: EncoderSpec, seed: u64) -> Encoder<f64> {
        let mut enc = Encoder::zeros(spec).unwrap();
        let mut rng = SceneRng::from_seed(seed);
        enc.for_each_tensor_mut(&mut |t: &mut Vec<f64>| {
            for v in t.iter_mut() {
                *v = rng.uniform(-0.4, 0.4);
            }
        });
        enc
    }

    #[test]
    fn encode_is_deterministic() {
        let cloud = random_cloud(32, 5);
        let enc = seeded_encoder(EncoderSpec::tiny(32), 7);
        let a = enc.forward(&cloud).unwrap();
        let b = enc.forward(&cloud).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.features.len(), 32 * OUT_DIM);
    }

    #[test]
    fn translation_invariance_by_normalization() {
        let cloud = random_cloud(32, 6);
        let shifted: Vec<Vec3> = cloud.iter().map(|p| p + Vec3::new(1.5, -2.0, 0.7)).collect();
        let enc = seeded_encoder(EncoderSpec::tiny(32), 7);
        let a = enc.forward(&cloud).unwrap();
        let b = enc.forward(&shifted).unwrap();
        for (x, y) in a.features.iter().zip(&b.features) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn permutation_equivariance_on_generic_clouds() {
        let cloud = random_cloud(32, 8);
        let enc = seeded_encoder(EncoderSpec::tiny(32), 9);
        let base = enc.forward(&cloud).unwrap();
        // Reverse the cloud; un-permute the outputs; compare.
        let reversed: Vec<Vec3> = cloud.iter().rev().copied().collect();
        let permuted = enc.forward(&reversed).unwrap();
        let n = cloud.len();
        for i in 0..n {
            let a = &base.features[i * OUT_DIM..(i + 1) * OUT_DIM];
            let b = &permuted.features[(n - 1 - i) * OUT_DIM..(n - i) * OUT_DIM];
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-9, "point {i}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn separated_cluster_locality_at_level_one() {
        // Two clusters farther apart than the level-1 grouping radius: a
        // level-1 group around a point of cluster A contains no member of
        // cluster B, so perturbing B leaves A's level-1 pooled features
        // untouched. Verified through the public forward by comparing the
        // level-1 caches indirectly: we reuse a 1-level encoder so the final
        // features are exactly the propagated level-1 features.
        let spec = EncoderSpec {
            levels: alloc::vec![LevelSpec {
                centroids: 8,
                radius: 0.3,
                max_group: 8,
                mlp: alloc::vec![8],
            }],
            fp: alloc::vec![alloc::vec![OUT_DIM]],
            expected_points: 16,
        };
        // Cluster A around the origin, cluster B around (2, 0, 0); after
        // normalization the gap stays much wider than radius 0.3.
        let mut cloud = Vec::new();
        let mut rng = SceneRng::from_seed(3);
        for _ in 0..8 {
            cloud.push(Vec3::new(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), 0.0));
        }
        for _ in 0..8 {
            cloud.push(Vec3::new(2.0 + rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), 0.0));
        }
        let enc = seeded_encoder(spec, 11);
        let base = enc.forward(&cloud).unwrap();
        // Perturb cluster B only (preserving the normalization frame takes
        // care: move one B point towards another B point, keeping centroid
        // and bounding radius fixed is fiddly -- instead compare grouping
        // structure: A-point groups must not contain B indices).
        let cache = base;
        let sa = &cache.sa[0];
        for (gi, &ci) in fps_indices(&cache.level_points[0], 8, lex_min_index(&cache.level_points[0]))
            .iter()
            .enumerate()
        {
            let centroid_is_a = ci < 8;
            for slot in sa.group_offsets[gi]..sa.group_offsets[gi + 1] {
                let member = sa.groups_flat[slot];
                assert_eq!(
                    member < 8,
                    centroid_is_a,
                    "group around {ci} mixes clusters (member {member})"
                );
            }
        }
    }

    #[test]
    fn wrong_cloud_size_is_rejected() {
        let enc = seeded_encoder(EncoderSpec::tiny(32), 7);
        let cloud = random_cloud(31, 5);
        assert!(enc.forward(&cloud).is_err());
        let mut bad = random_cloud(32, 5);
        bad[3].x = f64::NAN;
        assert!(enc.forward(&bad).is_err());
    }

    #[test]
    fn radii_must_increase() {
        let mut spec = EncoderSpec::tiny(32);
        spec.levels[1].radius = 0.1;
        assert!(spec.validate().is_err());
    }
}
