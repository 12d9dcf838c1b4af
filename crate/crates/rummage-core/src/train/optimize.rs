//! Training loops (seeded shuffling, per-scene holdout split, mean-BCE
//! minibatch updates) and hard-example online fine-tuning.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::action::{execute_pick_place, execute_retrieval, PickPlaceAction, RetrievalAction};
use crate::config::WorldConfig;
use crate::container::Scenario;
use crate::error::{Error, Result};
use crate::net::{
    AdamState, ModelKind, PlaceBatch, PlaceModel, PointScoreModel, Scalar, ScoreBatch,
};
use crate::obs::{augment_with_lattice, render_cloud, CameraPose};
use crate::policy::p_high;
use crate::rng::{mix64, SceneRng};
use crate::train::collect::build_scene;
use crate::train::{Dataset, HardExampleBuffer, Sample};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: u32,
    pub batch_size: usize,
    pub lr: f64,
    /// Fraction of scenes (not samples) held out for the validation loss.
    pub holdout_frac: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 60, batch_size: 128, lr: 1e-3, holdout_frac: 0.1, seed: 0 }
    }
}

/// Per-epoch mean train loss and held-out loss (NaN when no holdout scene).
#[derive(Debug, Clone, Default)]
pub struct LossCurve {
    pub epochs: Vec<(f64, f64)>,
}

fn validate_dataset(dataset: &Dataset, kind: ModelKind) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::UnusableDataset("dataset is empty".into()));
    }
    if dataset.samples.iter().any(|s| s.kind != kind) {
        return Err(Error::UnusableDataset(alloc::format!(
            "dataset contains samples of a different kind than {}",
            kind.name()
        )));
    }
    let (pos, neg) = (dataset.positives(kind), dataset.negatives(kind));
    if pos == 0 || neg == 0 {
        return Err(Error::UnusableDataset(alloc::format!(
            "single-class dataset ({pos} positive / {neg} negative): labels carry no signal"
        )));
    }
    Ok(())
}

/// Splits sample indices into (train, holdout) at scene granularity.
fn scene_split(dataset: &Dataset, cfg: &TrainConfig) -> (Vec<usize>, Vec<usize>) {
    let mut scene_seeds: Vec<u64> = dataset.samples.iter().map(|s| s.scene_seed).collect();
    scene_seeds.sort_unstable();
    scene_seeds.dedup();
    let mut rng = SceneRng::from_seed(mix64(cfg.seed, 0x73706c_6974));
    rng.shuffle(&mut scene_seeds);
    let n_holdout = if scene_seeds.len() >= 2 {
        ((scene_seeds.len() as f64 * cfg.holdout_frac).ceil() as usize).clamp(1, scene_seeds.len() - 1)
    } else {
        0
    };
    let holdout_seeds = &scene_seeds[scene_seeds.len() - n_holdout..];
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for (i, s) in dataset.samples.iter().enumerate() {
        if holdout_seeds.contains(&s.scene_seed) {
            holdout.push(i);
        } else {
            train.push(i);
        }
    }
    (train, holdout)
}

/// Groups a batch of sample indices by scene so each cloud encodes once.
fn group_by_scene<'a>(dataset: &'a Dataset, indices: &[usize]) -> Vec<(&'a Sample, Vec<usize>)> {
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for &i in indices {
        groups.entry(dataset.samples[i].scene_seed).or_default().push(i);
    }
    groups
        .into_values()
        .map(|idxs| (&dataset.samples[idxs[0]], idxs))
        .collect()
}

/// Trains the retrieval or pick module. Returns the model plus its curve.
pub fn train_point_score(
    kind: ModelKind,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<(PointScoreModel<f32>, LossCurve)> {
    if kind == ModelKind::Place {
        return Err(Error::config("place training uses train_place"));
    }
    validate_dataset(dataset, kind)?;
    let n_points = dataset.samples[0].coords.len();
    if dataset.samples.iter().any(|s| s.coords.len() != n_points) {
        return Err(Error::UnusableDataset("inconsistent cloud sizes".into()));
    }
    let mut model = PointScoreModel::desk(n_points, mix64(cfg.seed, kind as u64 + 1))?;
    let mut curve = LossCurve::default();
    if cfg.epochs == 0 {
        return Ok((model, curve));
    }
    let (train_idx, holdout_idx) = scene_split(dataset, cfg);
    if train_idx.is_empty() {
        return Err(Error::UnusableDataset("no training samples after the split".into()));
    }
    let mut adam: AdamState<f32> = AdamState::new(model.param_count(), cfg.lr);
    let mut order = train_idx.clone();
    let mut shuffle_rng = SceneRng::from_seed(mix64(cfg.seed, 0x6570_6f63_68));
    for _ in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut epoch_items = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let groups = group_by_scene(dataset, chunk);
            let items_per_group: Vec<Vec<(usize, u8)>> = groups
                .iter()
                .map(|(_, idxs)| {
                    idxs.iter()
                        .map(|&i| {
                            let s = &dataset.samples[i];
                            (s.query as usize, s.label)
                        })
                        .collect()
                })
                .collect();
            let batch: Vec<ScoreBatch> = groups
                .iter()
                .zip(&items_per_group)
                .map(|((head, _), items)| ScoreBatch { coords: &head.coords, items })
                .collect();
            let (loss, grads) = model.loss_grad(&batch)?;
            let mut params = model.to_flat();
            adam.update(&mut params, &grads.to_flat());
            model.from_flat(&params);
            epoch_loss += loss * chunk.len() as f64;
            epoch_items += chunk.len();
        }
        let train_loss = epoch_loss / epoch_items as f64;
        let holdout_loss = point_score_loss(&model, dataset, &holdout_idx)?;
        curve.epochs.push((train_loss, holdout_loss));
    }
    Ok((model, curve))
}

/// Forward-only mean loss over a sample-index set.
fn point_score_loss(
    model: &PointScoreModel<f32>,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<f64> {
    if indices.is_empty() {
        return Ok(f64::NAN);
    }
    let mut loss = 0.0;
    for (head, idxs) in group_by_scene(dataset, indices) {
        let scores = model.forward(&head.coords)?;
        for &i in &idxs {
            let s = &dataset.samples[i];
            loss += crate::net::bce(scores[s.query as usize], s.label)?.to_f64();
        }
    }
    Ok(loss / indices.len() as f64)
}

/// Fraction of samples the model classifies correctly at the 0.5 threshold.
pub fn accuracy_point_score(
    model: &PointScoreModel<f32>,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<f64> {
    if indices.is_empty() {
        return Ok(f64::NAN);
    }
    let mut correct = 0usize;
    for (head, idxs) in group_by_scene(dataset, indices) {
        let scores = model.forward(&head.coords)?;
        for &i in &idxs {
            let s = &dataset.samples[i];
            if (scores[s.query as usize] > 0.5) == (s.label == 1) {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / indices.len() as f64)
}

/// Trains the place module (batch of (pick, place, label) triples).
pub fn train_place(
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<(PlaceModel<f32>, LossCurve)> {
    validate_dataset(dataset, ModelKind::Place)?;
    let n_points = dataset.samples[0].coords.len();
    if dataset.samples.iter().any(|s| s.coords.len() != n_points) {
        return Err(Error::UnusableDataset("inconsistent cloud sizes".into()));
    }
    let mut model = PlaceModel::desk(n_points, mix64(cfg.seed, 0x706c_6163_65))?;
    let mut curve = LossCurve::default();
    if cfg.epochs == 0 {
        return Ok((model, curve));
    }
    let (train_idx, holdout_idx) = scene_split(dataset, cfg);
    if train_idx.is_empty() {
        return Err(Error::UnusableDataset("no training samples after the split".into()));
    }
    let mut adam: AdamState<f32> = AdamState::new(model.param_count(), cfg.lr);
    let mut order = train_idx.clone();
    let mut shuffle_rng = SceneRng::from_seed(mix64(cfg.seed, 0x6570_6f63_68));
    for _ in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut epoch_items = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let groups = group_by_scene(dataset, chunk);
            let items_per_group: Vec<Vec<(usize, usize, u8)>> = groups
                .iter()
                .map(|(_, idxs)| {
                    idxs.iter()
                        .map(|&i| {
                            let s = &dataset.samples[i];
                            (s.pick.unwrap() as usize, s.query as usize, s.label)
                        })
                        .collect()
                })
                .collect();
            let batch: Vec<PlaceBatch> = groups
                .iter()
                .zip(&items_per_group)
                .map(|((head, _), items)| PlaceBatch { coords: &head.coords, items })
                .collect();
            let (loss, grads) = model.loss_grad(&batch)?;
            let mut params = model.to_flat();
            adam.update(&mut params, &grads.to_flat());
            model.from_flat(&params);
            epoch_loss += loss * chunk.len() as f64;
            epoch_items += chunk.len();
        }
        let train_loss = epoch_loss / epoch_items as f64;
        let holdout_loss = place_loss(&model, dataset, &holdout_idx)?;
        curve.epochs.push((train_loss, holdout_loss));
    }
    Ok((model, curve))
}

fn place_loss(model: &PlaceModel<f32>, dataset: &Dataset, indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Ok(f64::NAN);
    }
    let mut loss = 0.0;
    for (head, idxs) in group_by_scene(dataset, indices) {
        for &i in &idxs {
            let s = &dataset.samples[i];
            let scores = model.forward(&head.coords, s.pick.unwrap() as usize)?;
            loss += crate::net::bce(scores[s.query as usize], s.label)?.to_f64();
        }
    }
    Ok(loss / indices.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneConfig {
    pub max_iterations: u32,
    /// Offline samples mixed into each composed batch (buffer adds the same
    /// number again).
    pub offline_per_batch: usize,
    pub buffer_capacity: usize,
    pub lr: f64,
    /// Rolling success-rate window length (episodes).
    pub window: usize,
    /// Stop when two consecutive windows differ by less than this.
    pub stop_delta: f64,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            max_iterations: 400,
            offline_per_batch: 64,
            buffer_capacity: 64,
            lr: 2e-4,
            window: 50,
            stop_delta: 0.02,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FinetuneReport {
    pub episodes: u32,
    pub updates: u32,
    pub failures_buffered: u32,
    pub success_history: Vec<bool>,
    pub stopped_early: bool,
}

fn rolling_stop(history: &[bool], window: usize, stop_delta: f64) -> bool {
    if history.len() < 2 * window {
        return false;
    }
    let rate = |slice: &[bool]| slice.iter().filter(|&&b| b).count() as f64 / slice.len() as f64;
    let last = rate(&history[history.len() - window..]);
    let prev = rate(&history[history.len() - 2 * window..history.len() - window]);
    (last - prev).abs() < stop_delta
}

/// Draws `count` offline samples (seeded, with replacement).
fn offline_draw<'a>(dataset: &'a Dataset, rng: &mut SceneRng, count: usize) -> Vec<&'a Sample> {
    (0..count).map(|_| &dataset.samples[rng.index(dataset.len())]).collect()
}

fn one_score_update(
    model: &mut PointScoreModel<f32>,
    adam: &mut AdamState<f32>,
    buffered: &[Sample],
    offline: &[&Sample],
) -> Result<()> {
    // Group by scene across both halves of the composed batch.
    let mut groups: BTreeMap<u64, (usize, Vec<(usize, u8)>)> = BTreeMap::new();
    let mut arena: Vec<&Sample> = Vec::new();
    for s in buffered.iter().chain(offline.iter().copied()) {
        arena.push(s);
        let slot = groups.entry(s.scene_seed).or_insert((arena.len() - 1, Vec::new()));
        slot.1.push((s.query as usize, s.label));
    }
    let batch: Vec<ScoreBatch> = groups
        .values()
        .map(|(head, items)| ScoreBatch { coords: &arena[*head].coords, items })
        .collect();
    let (_, grads) = model.loss_grad(&batch)?;
    let mut params = model.to_flat();
    adam.update(&mut params, &grads.to_flat());
    model.from_flat(&params);
    Ok(())
}

/// Online fine-tuning of the retrieval model: run its own argmax choice,
/// buffer failures as hard negatives, and take one composed update whenever
/// the buffer fills.
pub fn online_finetune_retrieval(
    model: &mut PointScoreModel<f32>,
    offline: &Dataset,
    world: &WorldConfig,
    scenarios: &[Scenario],
    cfg: &FinetuneConfig,
) -> Result<FinetuneReport> {
    validate_dataset(offline, ModelKind::Retrieve)?;
    let mut report = FinetuneReport::default();
    let mut buffer = HardExampleBuffer::new(cfg.buffer_capacity);
    let mut adam: AdamState<f32> = AdamState::new(model.param_count(), cfg.lr);
    let mut draw_rng = SceneRng::from_seed(mix64(cfg.seed, 0x6f66_666c_696e_65));
    for iteration in 0..cfg.max_iterations {
        let scenario = scenarios[iteration as usize % scenarios.len()];
        let scene_seed = mix64(cfg.seed, 0xb00 + iteration as u64);
        let mut state = match build_scene(world, scenario, scene_seed) {
            Ok(s) => s,
            Err(Error::SceneGeneration { .. }) => continue,
            Err(e) => return Err(e),
        };
        let camera = CameraPose::standard(&state.container);
        let obs = match render_cloud(&state, &camera, world.n_points, world.sim.contact_radius) {
            Ok(obs) => obs,
            Err(Error::EmptyObservation) => continue,
            Err(e) => return Err(e),
        };
        let map = model.affordance(obs.coords())?;
        let choice = map.argmax();
        let action = RetrievalAction::standard(
            &state.container,
            obs.points[choice],
            world.thresholds.gripper_speed,
        );
        let (outcome, _) = execute_retrieval(&mut state, &action, &world.sim, &world.thresholds)?;
        report.episodes += 1;
        report.success_history.push(outcome.success);
        if !outcome.success {
            report.failures_buffered += 1;
            let full = buffer.push(Sample {
                kind: ModelKind::Retrieve,
                scenario,
                scene_seed,
                coords: obs.points.iter().map(Dataset::quantize).collect(),
                query: choice as u32,
                pick: None,
                label: 0,
            });
            if full {
                let buffered = buffer.drain();
                let drawn = offline_draw(offline, &mut draw_rng, cfg.offline_per_batch);
                one_score_update(model, &mut adam, &buffered, &drawn)?;
                report.updates += 1;
            }
        }
        if rolling_stop(&report.success_history, cfg.window, cfg.stop_delta) {
            report.stopped_early = true;
            break;
        }
    }
    Ok(report)
}

/// Online fine-tuning of the pick model: failures are picks whose best place
/// (under the frozen place model) fails to improve the scene.
pub fn online_finetune_pick(
    model: &mut PointScoreModel<f32>,
    retrieval: &PointScoreModel<f32>,
    place_model: &PlaceModel<f32>,
    offline: &Dataset,
    world: &WorldConfig,
    scenarios: &[Scenario],
    cfg: &FinetuneConfig,
) -> Result<FinetuneReport> {
    validate_dataset(offline, ModelKind::Pick)?;
    let mut report = FinetuneReport::default();
    let mut buffer = HardExampleBuffer::new(cfg.buffer_capacity);
    let mut adam: AdamState<f32> = AdamState::new(model.param_count(), cfg.lr);
    let mut draw_rng = SceneRng::from_seed(mix64(cfg.seed, 0x6f66_666c_696e_65));
    for iteration in 0..cfg.max_iterations {
        let scenario = scenarios[iteration as usize % scenarios.len()];
        let scene_seed = mix64(cfg.seed, 0xc00 + iteration as u64);
        let mut state = match build_scene(world, scenario, scene_seed) {
            Ok(s) => s,
            Err(Error::SceneGeneration { .. }) => continue,
            Err(e) => return Err(e),
        };
        let camera = CameraPose::standard(&state.container);
        let obs = match render_cloud(&state, &camera, world.n_points, world.sim.contact_radius) {
            Ok(obs) => obs,
            Err(Error::EmptyObservation) => continue,
            Err(e) => return Err(e),
        };
        let place_coords = augment_with_lattice(
            &obs.points,
            &state.container,
            world.sim.contact_radius,
            world.lattice_points,
        );
        let map0 = retrieval.affordance(obs.coords())?;
        let p_before = p_high(&map0, 0.9);
        let pick = model.affordance(obs.coords())?.argmax();
        let place = place_model.affordance(&place_coords, pick)?.argmax();
        let action = PickPlaceAction::standard(
            &state.container,
            place_coords[pick],
            place_coords[place],
            world.thresholds.gripper_speed,
        );
        execute_pick_place(&mut state, &action, &world.sim, &world.thresholds)?;
        let p_after = match render_cloud(&state, &camera, world.n_points, world.sim.contact_radius) {
            Ok(obs2) => p_high(&retrieval.affordance(obs2.coords())?, 0.9),
            Err(Error::EmptyObservation) => 0.0,
            Err(e) => return Err(e),
        };
        let improved = p_after - p_before >= world.delta;
        report.episodes += 1;
        report.success_history.push(improved);
        if !improved {
            report.failures_buffered += 1;
            let full = buffer.push(Sample {
                kind: ModelKind::Pick,
                scenario,
                scene_seed,
                coords: obs.points.iter().map(Dataset::quantize).collect(),
                query: pick as u32,
                pick: None,
                label: 0,
            });
            if full {
                let buffered = buffer.drain();
                let drawn = offline_draw(offline, &mut draw_rng, cfg.offline_per_batch);
                one_score_update(model, &mut adam, &buffered, &drawn)?;
                report.updates += 1;
            }
        }
        if rolling_stop(&report.success_history, cfg.window, cfg.stop_delta) {
            report.stopped_early = true;
            break;
        }
    }
    Ok(report)
}

/// Online fine-tuning of the place model: random picks, its own best place;
/// failures are placements that fail to improve the scene.
pub fn online_finetune_place(
    model: &mut PlaceModel<f32>,
    retrieval: &PointScoreModel<f32>,
    offline: &Dataset,
    world: &WorldConfig,
    scenarios: &[Scenario],
    cfg: &FinetuneConfig,
) -> Result<FinetuneReport> {
    validate_dataset(offline, ModelKind::Place)?;
    let mut report = FinetuneReport::default();
    let mut buffer = HardExampleBuffer::new(cfg.buffer_capacity);
    let mut adam: AdamState<f32> = AdamState::new(model.param_count(), cfg.lr);
    let mut draw_rng = SceneRng::from_seed(mix64(cfg.seed, 0x6f66_666c_696e_65));
    let mut pick_rng = SceneRng::from_seed(mix64(cfg.seed, 0x7069_636b));
    for iteration in 0..cfg.max_iterations {
        let scenario = scenarios[iteration as usize % scenarios.len()];
        let scene_seed = mix64(cfg.seed, 0xd00 + iteration as u64);
        let mut state = match build_scene(world, scenario, scene_seed) {
            Ok(s) => s,
            Err(Error::SceneGeneration { .. }) => continue,
            Err(e) => return Err(e),
        };
        let camera = CameraPose::standard(&state.container);
        let obs = match render_cloud(&state, &camera, world.n_points, world.sim.contact_radius) {
            Ok(obs) => obs,
            Err(Error::EmptyObservation) => continue,
            Err(e) => return Err(e),
        };
        let place_coords = augment_with_lattice(
            &obs.points,
            &state.container,
            world.sim.contact_radius,
            world.lattice_points,
        );
        let map0 = retrieval.affordance(obs.coords())?;
        let p_before = p_high(&map0, 0.9);
        let pick = pick_rng.index(obs.len());
        let place = model.affordance(&place_coords, pick)?.argmax();
        let action = PickPlaceAction::standard(
            &state.container,
            place_coords[pick],
            place_coords[place],
            world.thresholds.gripper_speed,
        );
        execute_pick_place(&mut state, &action, &world.sim, &world.thresholds)?;
        let p_after = match render_cloud(&state, &camera, world.n_points, world.sim.contact_radius) {
            Ok(obs2) => p_high(&retrieval.affordance(obs2.coords())?, 0.9),
            Err(Error::EmptyObservation) => 0.0,
            Err(e) => return Err(e),
        };
        let improved = p_after - p_before >= world.delta;
        report.episodes += 1;
        report.success_history.push(improved);
        if !improved {
            report.failures_buffered += 1;
            let full = buffer.push(Sample {
                kind: ModelKind::Place,
                scenario,
                scene_seed,
                coords: place_coords.iter().map(Dataset::quantize).collect(),
                query: place as u32,
                pick: Some(pick as u32),
                label: 0,
            });
            if full {
                let buffered = buffer.drain();
                let drawn = offline_draw(offline, &mut draw_rng, cfg.offline_per_batch);
                // Composed place batch, grouped by scene.
                let mut scene_groups: BTreeMap<u64, (usize, Vec<(usize, usize, u8)>)> = BTreeMap::new();
                let mut arena: Vec<&Sample> = Vec::new();
                for s in buffered.iter().chain(drawn.iter().copied()) {
                    arena.push(s);
                    let slot = scene_groups
                        .entry(s.scene_seed)
                        .or_insert((arena.len() - 1, Vec::new()));
                    slot.1.push((s.pick.unwrap() as usize, s.query as usize, s.label));
                }
                let batch: Vec<PlaceBatch> = scene_groups
                    .values()
                    .map(|(head, items)| PlaceBatch { coords: &arena[*head].coords, items })
                    .collect();
                let (_, grads) = model.loss_grad(&batch)?;
                let mut params = model.to_flat();
                adam.update(&mut params, &grads.to_flat());
                model.from_flat(&params);
                report.updates += 1;
            }
        }
        if rolling_stop(&report.success_history, cfg.window, cfg.stop_delta) {
            report.stopped_early = true;
            break;
        }
    }
    Ok(report)
}
