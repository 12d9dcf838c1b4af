//! Offline data collection: labeling rollouts inside snapshot/restore
//! brackets, in the fixed supervision order retrieval, then place, then
//! pick.

use alloc::vec::Vec;

use crate::action::{execute_pick_place, execute_retrieval, PickPlaceAction, RetrievalAction};
use crate::config::WorldConfig;
use crate::container::{Container, Scenario};
use crate::error::{Error, Result};
use crate::net::{ModelKind, PlaceModel, PointScoreModel};
use crate::obs::{augment_with_lattice, render_cloud, CameraPose, PointCloudObs};
use crate::policy::p_high;
use crate::rng::{mix64, SceneRng};
use crate::sim::{generate_scene, SceneState};
use crate::snapshot::{restore, snapshot};
use crate::train::{Dataset, Sample};

const QUERY_SALT: u64 = 0x7175_6572_7921;

/// One generated, settled, rendered scene ready for labeling rollouts.
struct LabelScene {
    scenario: Scenario,
    scene_seed: u64,
    blob: Vec<u8>,
    obs: PointCloudObs,
    qrng: SceneRng,
}

/// Iterates seeded scenes round-robin over `scenarios`, skipping seeds whose
/// generation fails to settle.
struct SceneStream<'a> {
    world: &'a WorldConfig,
    scenarios: &'a [Scenario],
    seed: u64,
    index: u64,
}

impl<'a> SceneStream<'a> {
    fn new(world: &'a WorldConfig, scenarios: &'a [Scenario], seed: u64) -> Self {
        SceneStream { world, scenarios, seed, index: 0 }
    }

    fn next_scene(&mut self) -> Result<LabelScene> {
        loop {
            let scenario = self.scenarios[(self.index as usize) % self.scenarios.len()];
            let scene_seed = mix64(self.seed, self.index);
            self.index += 1;
            let state = match build_scene(self.world, scenario, scene_seed) {
                Ok(state) => state,
                Err(Error::SceneGeneration { .. }) => continue,
                Err(e) => return Err(e),
            };
            let camera = CameraPose::standard(&state.container);
            let obs = match render_cloud(&state, &camera, self.world.n_points, self.world.sim.contact_radius) {
                Ok(obs) => obs,
                Err(Error::EmptyObservation) => continue,
                Err(e) => return Err(e),
            };
            return Ok(LabelScene {
                scenario,
                scene_seed,
                blob: snapshot(&state),
                obs,
                qrng: SceneRng::from_seed(mix64(scene_seed, QUERY_SALT)),
            });
        }
    }
}

/// Rebuilds a labeling scene from its provenance; the single source of truth
/// shared by collection, re-derivation checks, and evaluation.
pub fn build_scene(world: &WorldConfig, scenario: Scenario, scene_seed: u64) -> Result<SceneState> {
    generate_scene(
        Container::standard(scenario),
        &world.templates,
        world.garment_count(scene_seed),
        scene_seed,
        &world.sim,
    )
}

/// Class-balance bookkeeping: collection first fills `target`, then keeps
/// only minority-class samples until neither class is below the configured
/// fraction, within the rollout budget.
struct Balancer {
    target: usize,
    min_frac: f64,
    budget: u64,
    rollouts: u64,
    positives: u64,
    negatives: u64,
}

impl Balancer {
    fn new(world: &WorldConfig, target: usize) -> Self {
        Balancer {
            target,
            min_frac: world.min_label_frac,
            budget: world.budget_factor as u64 * target as u64,
            rollouts: 0,
            positives: 0,
            negatives: 0,
        }
    }

    fn total(&self) -> u64 {
        self.positives + self.negatives
    }

    fn balanced(&self) -> bool {
        let total = self.total() as f64;
        self.positives as f64 >= self.min_frac * total
            && self.negatives as f64 >= self.min_frac * total
    }

    fn done(&self) -> bool {
        self.total() >= self.target as u64 && self.balanced()
    }

    /// Whether a sample with this label should be kept right now.
    fn keep(&mut self, label: u8) -> bool {
        if self.total() < self.target as u64 {
            true
        } else {
            // Oversampling phase: only the minority class helps.
            let minority_is_positive = self.positives <= self.negatives;
            (label == 1) == minority_is_positive
        }
    }

    fn record(&mut self, label: u8) {
        if label == 1 {
            self.positives += 1;
        } else {
            self.negatives += 1;
        }
    }

    fn charge_rollout(&mut self) -> bool {
        self.rollouts += 1;
        self.rollouts <= self.budget
    }

    fn starvation(&self, kind: &'static str, seed: u64) -> Error {
        Error::ClassStarvation {
            kind,
            seed,
            positives: self.positives,
            negatives: self.negatives,
            rollouts: self.rollouts,
        }
    }
}

/// Labels grasp points by executing the retrieval directly: 1 when the
/// judged outcome is a success, 0 otherwise. The scene is restored between
/// rollouts.
pub fn collect_retrieval_data(
    world: &WorldConfig,
    scenarios: &[Scenario],
    target_count: usize,
    seed: u64,
) -> Result<Dataset> {
    if target_count == 0 {
        return Err(Error::invalid("target_count must be > 0"));
    }
    if scenarios.is_empty() {
        return Err(Error::invalid("at least one scenario is required"));
    }
    let mut dataset = Dataset::new(
        world.config_hash,
        seed,
        world.n_points as u32,
        world.lattice_points as u32,
    );
    let mut stream = SceneStream::new(world, scenarios, seed);
    let mut balance = Balancer::new(world, target_count);
    while !balance.done() {
        let mut scene = stream.next_scene()?;
        for _ in 0..world.queries_per_scene {
            if balance.done() {
                break;
            }
            if !balance.charge_rollout() {
                return Err(balance.starvation("retrieval", seed));
            }
            let query = scene.qrng.index(scene.obs.len());
            let mut state = restore(&scene.blob)?;
            let action = RetrievalAction::standard(
                &state.container,
                scene.obs.points[query],
                world.thresholds.gripper_speed,
            );
            let (outcome, _) = execute_retrieval(&mut state, &action, &world.sim, &world.thresholds)?;
            let label = outcome.success as u8;
            if balance.keep(label) {
                balance.record(label);
                dataset.push(Sample {
                    kind: ModelKind::Retrieve,
                    scenario: scene.scenario,
                    scene_seed: scene.scene_seed,
                    coords: scene.obs.points.iter().map(Dataset::quantize).collect(),
                    query: query as u32,
                    pick: None,
                    label,
                });
            }
        }
    }
    Ok(dataset)
}

/// Measures the retrieval-affordance improvement a pick-and-place causes:
/// label 1 when the high-score fraction rises by at least the margin.
fn improvement_label(
    world: &WorldConfig,
    retrieval: &PointScoreModel<f32>,
    state: &mut SceneState,
    pick_point: crate::Vec3,
    place_point: crate::Vec3,
    p_before: f64,
) -> Result<(u8, f64)> {
    let action = PickPlaceAction::standard(
        &state.container,
        pick_point,
        place_point,
        world.thresholds.gripper_speed,
    );
    execute_pick_place(state, &action, &world.sim, &world.thresholds)?;
    let camera = CameraPose::standard(&state.container);
    let p_after = match render_cloud(state, &camera, world.n_points, world.sim.contact_radius) {
        Ok(obs) => {
            let map = retrieval.affordance(obs.coords())?;
            p_high(&map, 0.9)
        }
        Err(Error::EmptyObservation) => 0.0,
        Err(e) => return Err(e),
    };
    let label = (p_after - p_before >= world.delta) as u8;
    Ok((label, p_after))
}

/// Labels (pick, place) pairs by the retrieval-affordance improvement they
/// cause. Place candidates are observed points plus the support lattice.
pub fn collect_place_data(
    world: &WorldConfig,
    retrieval: &PointScoreModel<f32>,
    scenarios: &[Scenario],
    target_count: usize,
    seed: u64,
) -> Result<Dataset> {
    if target_count == 0 {
        return Err(Error::invalid("target_count must be > 0"));
    }
    if world.delta <= 0.0 {
        log::warn!(
            "degenerate improvement margin {}: labels will be noise-dominated",
            world.delta
        );
    }
    let mut dataset = Dataset::new(
        world.config_hash,
        seed,
        world.n_points as u32,
        world.lattice_points as u32,
    );
    let mut stream = SceneStream::new(world, scenarios, seed);
    let mut balance = Balancer::new(world, target_count);
    while !balance.done() {
        let mut scene = stream.next_scene()?;
        let state0 = restore(&scene.blob)?;
        let place_coords = augment_with_lattice(
            &scene.obs.points,
            &state0.container,
            world.sim.contact_radius,
            world.lattice_points,
        );
        let map0 = retrieval.affordance(scene.obs.coords())?;
        let p_before = p_high(&map0, 0.9);
        for _ in 0..world.queries_per_scene {
            if balance.done() {
                break;
            }
            if !balance.charge_rollout() {
                return Err(balance.starvation("place", seed));
            }
            let pick = scene.qrng.index(scene.obs.len());
            let place = scene.qrng.index(place_coords.len());
            let mut state = restore(&scene.blob)?;
            let (label, _) = improvement_label(
                world,
                retrieval,
                &mut state,
                place_coords[pick],
                place_coords[place],
                p_before,
            )?;
            if balance.keep(label) {
                balance.record(label);
                dataset.push(Sample {
                    kind: ModelKind::Place,
                    scenario: scene.scenario,
                    scene_seed: scene.scene_seed,
                    coords: place_coords.iter().map(Dataset::quantize).collect(),
                    query: place as u32,
                    pick: Some(pick as u32),
                    label,
                });
            }
        }
    }
    Ok(dataset)
}

/// Labels pick points by the improvement of the best place action under the
/// trained place model, conditioned on that pick.
pub fn collect_pick_data(
    world: &WorldConfig,
    retrieval: &PointScoreModel<f32>,
    place_model: &PlaceModel<f32>,
    scenarios: &[Scenario],
    target_count: usize,
    seed: u64,
) -> Result<Dataset> {
    if target_count == 0 {
        return Err(Error::invalid("target_count must be > 0"));
    }
    let mut dataset = Dataset::new(
        world.config_hash,
        seed,
        world.n_points as u32,
        world.lattice_points as u32,
    );
    let mut stream = SceneStream::new(world, scenarios, seed);
    let mut balance = Balancer::new(world, target_count);
    while !balance.done() {
        let mut scene = stream.next_scene()?;
        let state0 = restore(&scene.blob)?;
        let place_coords = augment_with_lattice(
            &scene.obs.points,
            &state0.container,
            world.sim.contact_radius,
            world.lattice_points,
        );
        let map0 = retrieval.affordance(scene.obs.coords())?;
        let p_before = p_high(&map0, 0.9);
        for _ in 0..world.queries_per_scene {
            if balance.done() {
                break;
            }
            if !balance.charge_rollout() {
                return Err(balance.starvation("pick", seed));
            }
            let pick = scene.qrng.index(scene.obs.len());
            // Best place under the frozen place model; ties to lowest index.
            let place = place_model.affordance(&place_coords, pick)?.argmax();
            let mut state = restore(&scene.blob)?;
            let (label, _) = improvement_label(
                world,
                retrieval,
                &mut state,
                place_coords[pick],
                place_coords[place],
                p_before,
            )?;
            if balance.keep(label) {
                balance.record(label);
                dataset.push(Sample {
                    kind: ModelKind::Pick,
                    scenario: scene.scenario,
                    scene_seed: scene.scene_seed,
                    coords: scene.obs.points.iter().map(Dataset::quantize).collect(),
                    query: pick as u32,
                    pick: None,
                    label,
                });
            }
        }
    }
    Ok(dataset)
}

/// Re-derives a stored sample's label by re-running its rollout from
/// provenance; used by audits and the label-oracle acceptance check.
pub fn rederive_label(
    world: &WorldConfig,
    sample: &Sample,
    retrieval: Option<&PointScoreModel<f32>>,
    place_model: Option<&PlaceModel<f32>>,
) -> Result<u8> {
    let state = build_scene(world, sample.scenario, sample.scene_seed)?;
    let camera = CameraPose::standard(&state.container);
    let obs = render_cloud(&state, &camera, world.n_points, world.sim.contact_radius)?;
    match sample.kind {
        ModelKind::Retrieve => {
            let mut state = state;
            let action = RetrievalAction::standard(
                &state.container,
                obs.points[sample.query as usize],
                world.thresholds.gripper_speed,
            );
            let (outcome, _) = execute_retrieval(&mut state, &action, &world.sim, &world.thresholds)?;
            Ok(outcome.success as u8)
        }
        ModelKind::Place | ModelKind::Pick => {
            let retrieval = retrieval
                .ok_or_else(|| Error::config("re-deriving place/pick labels needs the retrieval model"))?;
            let place_coords = augment_with_lattice(
                &obs.points,
                &state.container,
                world.sim.contact_radius,
                world.lattice_points,
            );
            let map0 = retrieval.affordance(obs.coords())?;
            let p_before = p_high(&map0, 0.9);
            let (pick, place) = match sample.kind {
                ModelKind::Place => (sample.pick.unwrap() as usize, sample.query as usize),
                ModelKind::Pick => {
                    let place_model = place_model.ok_or_else(|| {
                        Error::config("re-deriving pick labels needs the place model")
                    })?;
                    let pick = sample.query as usize;
                    (pick, place_model.affordance(&place_coords, pick)?.argmax())
                }
                ModelKind::Retrieve => unreachable!(),
            };
            let mut state = state;
            let (label, _) = improvement_label(
                world,
                retrieval,
                &mut state,
                place_coords[pick],
                place_coords[place],
                p_before,
            )?;
            Ok(label)
        }
    }
}
