//! Shared run configuration: physics, thresholds, observation sizes, and
//! the garment template pools with their generalization splits.

use alloc::vec::Vec;

use crate::action::Thresholds;
use crate::garment::{Category, GarmentTemplate, StiffnessProfile};
use crate::rng::mix64;
use crate::sim::SimParams;

/// Everything the simulator-side operations need to agree on.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub sim: SimParams,
    pub thresholds: Thresholds,
    /// Observed cloud size.
    pub n_points: usize,
    /// Placement-candidate lattice size appended to place-model clouds.
    pub lattice_points: usize,
    /// Garment count range for generated scenes (inclusive).
    pub min_garments: u32,
    pub max_garments: u32,
    /// Query points labeled per generated scene during collection.
    pub queries_per_scene: u32,
    /// Margin on the high-affordance fraction that defines a positive
    /// place/pick label.
    pub delta: f64,
    /// Neither label class may fall below this fraction of a dataset.
    pub min_label_frac: f64,
    /// Collection gives up after `budget_factor x target_count` rollouts.
    pub budget_factor: u32,
    /// Garment templates scenes draw from.
    pub templates: Vec<GarmentTemplate>,
    /// Hash of the full run configuration, embedded in artifacts.
    pub config_hash: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            sim: SimParams::default(),
            thresholds: Thresholds::default(),
            n_points: 512,
            lattice_points: 48,
            min_garments: 1,
            max_garments: 4,
            queries_per_scene: 8,
            delta: 0.02,
            min_label_frac: 0.25,
            budget_factor: 5,
            templates: seen_pool(),
            config_hash: 0,
        }
    }
}

impl WorldConfig {
    /// Desk-scale configuration used by the test and acceptance suites:
    /// smaller clouds keep encoder cost down at identical semantics.
    pub fn desk() -> Self {
        WorldConfig { n_points: 256, ..WorldConfig::default() }
    }

    /// Cloud size the place model sees (observation plus lattice).
    pub fn place_points(&self) -> usize {
        self.n_points + self.lattice_points
    }

    /// Deterministic garment count for a scene seed, so a stored
    /// `(scenario, scene_seed)` pair fully reproduces its scene.
    pub fn garment_count(&self, scene_seed: u64) -> u32 {
        let span = (self.max_garments - self.min_garments + 1) as u64;
        self.min_garments + (mix64(scene_seed, GARMENT_COUNT_SALT) % span) as u32
    }

    pub fn with_pool(mut self, templates: Vec<GarmentTemplate>) -> Self {
        self.templates = templates;
        self
    }
}

pub(crate) const GARMENT_COUNT_SALT: u64 = 0x6761_726d_656e_7473;

fn t(id: u32, category: Category, rows: u32, cols: u32) -> GarmentTemplate {
    GarmentTemplate::new(id, category, rows, cols, 0.05, StiffnessProfile::default())
        .expect("static template")
}

/// Training pool: six categories at their canonical grid shapes.
pub fn seen_pool() -> Vec<GarmentTemplate> {
    alloc::vec![
        t(0, Category::Top, 8, 8),
        t(1, Category::Trousers, 10, 5),
        t(2, Category::Scarf, 3, 11),
        t(3, Category::Dress, 9, 7),
        t(4, Category::Underpants, 5, 6),
        t(5, Category::Skirt, 7, 7),
    ]
}

/// Held-out aspect ratios of the seen categories.
pub fn novel_shape_pool() -> Vec<GarmentTemplate> {
    alloc::vec![
        t(100, Category::Top, 7, 9),
        t(101, Category::Trousers, 9, 6),
        t(102, Category::Scarf, 4, 10),
        t(103, Category::Dress, 10, 6),
        t(104, Category::Underpants, 6, 5),
        t(105, Category::Skirt, 6, 8),
    ]
}

/// Categories never seen in training.
pub fn novel_category_pool() -> Vec<GarmentTemplate> {
    alloc::vec![
        t(200, Category::Glove, 4, 5),
        t(201, Category::Hat, 5, 5),
        t(202, Category::Onesie, 10, 7),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_template_ids_are_disjoint() {
        let mut ids = alloc::vec::Vec::new();
        for pool in [seen_pool(), novel_shape_pool(), novel_category_pool()] {
            for t in pool {
                assert!(!ids.contains(&t.template_id), "duplicate id {}", t.template_id);
                ids.push(t.template_id);
            }
        }
    }

    #[test]
    fn garment_count_is_deterministic_and_in_range() {
        let cfg = WorldConfig::desk();
        for seed in 0..200 {
            let n = cfg.garment_count(seed);
            assert_eq!(n, cfg.garment_count(seed));
            assert!((cfg.min_garments..=cfg.max_garments).contains(&n));
        }
        // Both ends of the range occur.
        let counts: alloc::vec::Vec<u32> = (0..200).map(|s| cfg.garment_count(s)).collect();
        assert!(counts.contains(&cfg.min_garments));
        assert!(counts.contains(&cfg.max_garments));
    }
}
