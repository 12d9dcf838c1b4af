//! The inference-time controller.
//!
//! Per decision: render, score every point with the retrieval model, and
//! compute the fraction of points scoring above the high-score threshold.
//! If that fraction clears the gate, retrieve at the argmax point; otherwise
//! reorganize the pile with a pick-and-place chosen by the pick and place
//! models, up to a fixed number of rounds per retrieval, after which a
//! retrieval is forced (and flagged) so the loop always progresses.
//!
//! Baselines and ablations are the same loop with individual decisions
//! swapped for seeded-random or highest-point choices.

use alloc::vec::Vec;

use crate::action::{
    execute_pick_place, execute_retrieval, ActionOutcome, PickPlaceAction, RetrievalAction,
};
use crate::config::WorldConfig;
use crate::error::{Error, Result};
use crate::net::{AffordanceMap, ModelBundle};
use crate::obs::{augment_with_lattice, render_cloud, CameraPose, PointCloudObs};
use crate::rng::{mix64, SceneRng};
use crate::sim::SceneState;

/// How the retrieval point is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrieveRule {
    /// Argmax of the retrieval affordance map.
    Affordance,
    /// Seeded-uniform observed point (baseline).
    Random,
    /// Highest observed point (baseline).
    Highest,
}

/// How the adaptation pick point is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PickRule {
    Learned,
    Random,
}

/// How the adaptation place point is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaceRule {
    Learned,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    /// Scores above this count as "high" (strict inequality).
    pub high_score_threshold: f64,
    /// Retrieve only when the high-score fraction exceeds this (strict).
    pub p_high_gate: f64,
    /// Adaptation rounds allowed before a retrieval is forced.
    pub max_adapt_rounds: u32,
    pub retrieve_rule: RetrieveRule,
    pub pick_rule: PickRule,
    pub place_rule: PlaceRule,
    /// Extra actions allowed beyond `garments * (max_adapt_rounds + 1)`.
    pub budget_slack: u32,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            high_score_threshold: 0.9,
            p_high_gate: 0.1,
            max_adapt_rounds: 3,
            retrieve_rule: RetrieveRule::Affordance,
            pick_rule: PickRule::Learned,
            place_rule: PlaceRule::Learned,
            budget_slack: 5,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.high_score_threshold > 0.0 && self.high_score_threshold < 1.0) {
            return Err(Error::config("high_score_threshold must be in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.p_high_gate) {
            return Err(Error::config("p_high_gate must be in [0, 1]"));
        }
        Ok(())
    }

    /// Ablation: no adaptation, retrieval only.
    pub fn without_adaptation() -> Self {
        PolicyConfig { max_adapt_rounds: 0, ..PolicyConfig::default() }
    }

    /// Ablation: seeded-uniform pick point.
    pub fn without_pick_affordance() -> Self {
        PolicyConfig { pick_rule: PickRule::Random, ..PolicyConfig::default() }
    }

    /// Ablation: seeded-uniform place point.
    pub fn without_place_affordance() -> Self {
        PolicyConfig { place_rule: PlaceRule::Random, ..PolicyConfig::default() }
    }

    /// Baseline: retrieve at a seeded-uniform point, no adaptation.
    pub fn random_baseline() -> Self {
        PolicyConfig {
            retrieve_rule: RetrieveRule::Random,
            max_adapt_rounds: 0,
            ..PolicyConfig::default()
        }
    }

    /// Baseline: retrieve at the highest point, no adaptation.
    pub fn highest_baseline() -> Self {
        PolicyConfig {
            retrieve_rule: RetrieveRule::Highest,
            max_adapt_rounds: 0,
            ..PolicyConfig::default()
        }
    }

    /// Three rounds of random adaptations (sweep reference point).
    pub fn random_adaptation() -> Self {
        PolicyConfig {
            pick_rule: PickRule::Random,
            place_rule: PlaceRule::Random,
            ..PolicyConfig::default()
        }
    }
}

/// Fraction of points whose score strictly exceeds `threshold`.
pub fn p_high(map: &AffordanceMap, threshold: f64) -> f64 {
    let high = map.scores.iter().filter(|&&s| (s as f64) > threshold).count();
    high as f64 / map.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Retrieve,
    Adapt,
}

/// Gate: retrieve only when the high-score fraction strictly exceeds the
/// gate value.
pub fn decide(map: &AffordanceMap, config: &PolicyConfig) -> Decision {
    if p_high(map, config.high_score_threshold) > config.p_high_gate {
        Decision::Retrieve
    } else {
        Decision::Adapt
    }
}

/// One adaptation action, fully described for the episode log.
#[derive(Debug, Clone)]
pub struct AdaptRecord {
    pub pick_index: usize,
    pub place_index: usize,
    pub grasp_missed: bool,
    pub p_high_before: f64,
    pub p_high_after: f64,
}

/// Picks and places once, guided by the pick/place models (or the configured
/// random rules). Returns the record; the scene is left settled.
pub fn adapt_step(
    bundle: &ModelBundle,
    state: &mut SceneState,
    world: &WorldConfig,
    config: &PolicyConfig,
    rng: &mut SceneRng,
) -> Result<AdaptRecord> {
    let camera = CameraPose::standard(&state.container);
    let obs = render_cloud(state, &camera, world.n_points, world.sim.contact_radius)?;
    let retrieval_map = bundle.retrieval.affordance(obs.coords())?;
    let p_before = p_high(&retrieval_map, config.high_score_threshold);

    let pick_index = match config.pick_rule {
        PickRule::Learned => bundle.pick.affordance(obs.coords())?.argmax(),
        PickRule::Random => rng.index(obs.len()),
    };
    let place_coords = augment_with_lattice(
        obs.coords(),
        &state.container,
        world.sim.contact_radius,
        world.lattice_points,
    );
    if place_coords.is_empty() {
        return Err(Error::config("place candidate set is empty"));
    }
    let place_index = match config.place_rule {
        PlaceRule::Learned => bundle.place.affordance(&place_coords, pick_index)?.argmax(),
        PlaceRule::Random => rng.index(place_coords.len()),
    };

    let action = PickPlaceAction::standard(
        &state.container,
        place_coords[pick_index],
        place_coords[place_index],
        world.thresholds.gripper_speed,
    );
    let attached = execute_pick_place(state, &action, &world.sim, &world.thresholds)?;

    let obs_after = render_cloud(state, &camera, world.n_points, world.sim.contact_radius)?;
    let map_after = bundle.retrieval.affordance(obs_after.coords())?;
    let p_after = p_high(&map_after, config.high_score_threshold);
    Ok(AdaptRecord {
        pick_index,
        place_index,
        grasp_missed: !attached,
        p_high_before: p_before,
        p_high_after: p_after,
    })
}

/// One decision step of an episode.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub decision: Decision,
    /// Retrieval was forced after exhausting adaptation rounds.
    pub forced: bool,
    pub p_high_before: f64,
    pub rounds_used_before: u32,
    pub adapt: Option<AdaptRecord>,
    pub retrieve_index: Option<usize>,
    pub outcome: Option<ActionOutcome>,
}

/// Complete account of one episode.
#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub scenario: crate::container::Scenario,
    pub episode_seed: u64,
    pub initial_garments: u32,
    pub steps: Vec<StepRecord>,
    /// Garment ids delivered to the exit region (removed from the scene).
    pub retrieved: Vec<u32>,
    pub attempts: u32,
    pub successes: u32,
    pub failure_counts: [u32; 5],
    pub incomplete: bool,
    pub max_rounds_used: u32,
}

impl EpisodeLog {
    pub fn remaining(&self) -> u32 {
        self.initial_garments - self.retrieved.len() as u32
    }
}

/// Runs the retrieval loop until the container is empty or the action budget
/// runs out. Deterministic in `(scene, bundle, config, episode_seed)`.
pub fn run_episode(
    bundle: &ModelBundle,
    mut state: SceneState,
    world: &WorldConfig,
    config: &PolicyConfig,
    episode_seed: u64,
) -> Result<EpisodeLog> {
    config.validate()?;
    let camera = CameraPose::standard(&state.container);
    let mut rng = SceneRng::from_seed(mix64(episode_seed, 0x6570_6973_6f64_6521));
    let initial_garments = state.garments.len() as u32;
    let mut log = EpisodeLog {
        scenario: state.container.scenario,
        episode_seed,
        initial_garments,
        steps: Vec::new(),
        retrieved: Vec::new(),
        attempts: 0,
        successes: 0,
        failure_counts: [0; 5],
        incomplete: false,
        max_rounds_used: 0,
    };
    let budget = initial_garments * (config.max_adapt_rounds + 1) + config.budget_slack;
    let mut rounds_used = 0u32;
    let mut actions = 0u32;

    while !state.garments_in_container().is_empty() {
        if actions >= budget {
            log.incomplete = true;
            break;
        }
        let obs: PointCloudObs =
            match render_cloud(&state, &camera, world.n_points, world.sim.contact_radius) {
                Ok(obs) => obs,
                Err(Error::EmptyObservation) => {
                    // Garments remain but none are visible; give up cleanly.
                    log.incomplete = true;
                    break;
                }
                Err(e) => return Err(e),
            };
        let map = bundle.retrieval.affordance(obs.coords())?;
        let ph = p_high(&map, config.high_score_threshold);
        let decision = decide(&map, config);

        if decision == Decision::Adapt && rounds_used < config.max_adapt_rounds {
            let record = adapt_step(bundle, &mut state, world, config, &mut rng)?;
            rounds_used += 1;
            log.max_rounds_used = log.max_rounds_used.max(rounds_used);
            actions += 1;
            log.steps.push(StepRecord {
                decision,
                forced: false,
                p_high_before: ph,
                rounds_used_before: rounds_used - 1,
                adapt: Some(record),
                retrieve_index: None,
                outcome: None,
            });
            continue;
        }

        // Retrieve (forced if the gate never cleared).
        let forced = decision == Decision::Adapt;
        let retrieve_index = match config.retrieve_rule {
            RetrieveRule::Affordance => map.argmax(),
            RetrieveRule::Random => rng.index(obs.len()),
            RetrieveRule::Highest => obs.highest_index(),
        };
        let action = RetrievalAction::standard(
            &state.container,
            obs.points[retrieve_index],
            world.thresholds.gripper_speed,
        );
        let (outcome, _) = execute_retrieval(&mut state, &action, &world.sim, &world.thresholds)?;
        actions += 1;
        log.attempts += 1;
        if outcome.success {
            log.successes += 1;
        }
        log.failure_counts[outcome.failure_mode as usize] += 1;
        log.steps.push(StepRecord {
            decision: Decision::Retrieve,
            forced,
            p_high_before: ph,
            rounds_used_before: rounds_used,
            adapt: None,
            retrieve_index: Some(retrieve_index),
            outcome: Some(outcome),
        });
        rounds_used = 0;

        // Remove garments delivered to the exit region.
        let delivered: Vec<u32> = state
            .garments
            .iter()
            .filter(|g| state.container.exit_region.contains(&g.centroid()))
            .map(|g| g.garment_id)
            .collect();
        for id in delivered {
            if let Some(idx) = state.garment_index(id) {
                state.garments.remove(idx);
                log.retrieved.push(id);
            }
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(scores: &[f32]) -> AffordanceMap {
        AffordanceMap::new(scores.to_vec()).unwrap()
    }

    #[test]
    fn p_high_fraction_examples() {
        // 10 points, two above 0.9.
        let m = map(&[0.95, 0.95, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]);
        assert_eq!(p_high(&m, 0.9), 0.2);
        // Exactly at the threshold does not count (strict inequality).
        let m = map(&[0.9; 8]);
        assert_eq!(p_high(&m, 0.9), 0.0);
        let m = map(&[1.0; 5]);
        assert_eq!(p_high(&m, 0.9), 1.0);
    }

    #[test]
    fn decide_gate_boundaries() {
        let cfg = PolicyConfig::default();
        // 15% of points high: retrieve.
        let mut scores = alloc::vec![0.5f32; 100];
        for s in scores.iter_mut().take(15) {
            *s = 0.95;
        }
        assert_eq!(decide(&map(&scores), &cfg), Decision::Retrieve);
        // Exactly 10%: strict inequality says adapt.
        let mut scores = alloc::vec![0.5f32; 100];
        for s in scores.iter_mut().take(10) {
            *s = 0.95;
        }
        assert_eq!(decide(&map(&scores), &cfg), Decision::Adapt);
        // Nothing high: adapt.
        assert_eq!(decide(&map(&[0.0; 10]), &cfg), Decision::Adapt);
    }

    #[test]
    fn gate_is_monotone_under_order_preserving_scaling() {
        let cfg = PolicyConfig::default();
        let scores = alloc::vec![0.95f32, 0.92, 0.5, 0.3, 0.2, 0.1, 0.05, 0.0, 0.91, 0.93];
        let before = decide(&map(&scores), &cfg);
        // Scale low scores down (preserving which entries exceed 0.9).
        let scaled: alloc::vec::Vec<f32> =
            scores.iter().map(|&s| if s > 0.9 { s } else { s * 0.5 }).collect();
        assert_eq!(decide(&map(&scaled), &cfg), before);
    }

    #[test]
    fn argmax_is_invariant_under_increasing_transforms() {
        let scores = alloc::vec![0.1f32, 0.7, 0.3, 0.69, 0.2];
        let m = map(&scores);
        let transformed: alloc::vec::Vec<f32> =
            scores.iter().map(|&s| (0.2 + 0.7 * (s as f64).sqrt()) as f32).collect();
        let t = map(&transformed);
        assert_eq!(m.argmax(), t.argmax());
    }

    #[test]
    fn policy_config_validates() {
        assert!(PolicyConfig::default().validate().is_ok());
        let bad = PolicyConfig { high_score_threshold: 1.0, ..PolicyConfig::default() };
        assert!(bad.validate().is_err());
        let bad = PolicyConfig { p_high_gate: 1.5, ..PolicyConfig::default() };
        assert!(bad.validate().is_err());
    }
}
