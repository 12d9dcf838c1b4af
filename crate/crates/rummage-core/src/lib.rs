//! Deterministic desk-scale garment-pile retrieval: mass-spring pile physics,
//! depth-style point-cloud observation, point-level affordance networks with
//! analytic backpropagation, and the affordance-gated retrieval/adaptation
//! policy built on top of them.
//!
//! The crate is organized around the data flow of one episode:
//!
//! 1. [`garment`] builds crumpled particle-grid garments from templates.
//! 2. [`sim`] drops them into a container ([`container`]) and steps a
//!    semi-implicit mass-spring integrator with penalty contacts and friction.
//!    Scenes snapshot/restore bit-exactly ([`snapshot`]).
//! 3. [`obs`] renders a visibility-filtered point cloud from a scenario
//!    camera, with a hidden provenance channel for labeling only.
//! 4. [`net`] scores each observed point: retrieval, pick, and
//!    place-conditioned-on-pick affordance models.
//! 5. [`action`] executes retrieval and pick-place primitives and judges
//!    outcomes against the two failure modes (floor contact, drag-out).
//! 6. [`train`] collects labels by rolling actions forward inside
//!    snapshot/restore brackets, trains the three models in a fixed
//!    supervision order, and fine-tunes online from a hard-example buffer.
//! 7. [`policy`] runs the inference loop: retrieve when enough points score
//!    high, otherwise adapt the pile with a pick-and-place.
//! 8. [`eval`] measures success rates, ablations, and baselines.
//!
//! Everything is seeded and sequential: identical seeds give bit-identical
//! trajectories, datasets, parameters, and reports on the same build.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the `std` feature
//! (default) only widens dependency features. IO, file formats on disk, and
//! the CLI live in the companion `rummage-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod action;
pub mod config;
pub mod container;
pub mod error;
pub mod eval;
pub mod garment;
pub mod net;
pub mod obs;
pub mod policy;
pub mod rng;
pub mod sim;
pub mod snapshot;
pub mod train;
pub mod wire;

pub use action::{ActionOutcome, FailureMode, PickPlaceAction, RetrievalAction, Thresholds};
pub use config::WorldConfig;
pub use container::{Container, Scenario};
pub use error::{Error, Result};
pub use garment::{GarmentInstance, GarmentTemplate};
pub use net::{AffordanceMap, ModelBundle};
pub use obs::{CameraPose, PointCloudObs};
pub use sim::{SceneState, SimParams};

/// 3-vector used for all positions, velocities, and forces (meters, SI).
pub type Vec3 = nalgebra::Vector3<f64>;

/// Rigid transform used for garment spawn poses.
pub type Pose = nalgebra::Isometry3<f64>;
