//! Action primitives and outcome judging.
//!
//! Two primitives built on the same kinematic gripper: retrieval (grasp,
//! lift, transport out through a fixed per-scenario path, release) and
//! pick-and-place (grasp, lift, move, lower, release). The gripper is a
//! point attachment: all particles of the grasped garment within the grasp
//! radius follow it rigidly; there is no finger or force model.
//!
//! Judging is a pure function over the recorded trajectory. The two failure
//! modes of interest are the target touching the world floor during
//! transport, and non-target garments being dragged (horizontal centroid
//! displacement past a threshold, or leaving the container).

use alloc::vec::Vec;

use crate::container::{Aabb, Container};
use crate::error::{Error, Result};
use crate::sim::{settle, step, Attachment, SceneState, SimParams};
use crate::Vec3;

/// Outcome-judging thresholds and gripper kinematics.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    /// Attachment radius around the grasp point (m).
    pub grasp_radius: f64,
    /// Horizontal centroid displacement past which a non-target counts as
    /// dragged (m).
    pub tau_drag: f64,
    /// Target particles below this height above the world floor during
    /// transport count as floor contact (m).
    pub floor_eps: f64,
    /// Gripper speed along its path (m/s).
    pub gripper_speed: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            grasp_radius: 0.075,
            tau_drag: 0.05,
            floor_eps: 0.01,
            gripper_speed: 1.2,
        }
    }
}

/// Retrieval: grasp at a point, lift, carry through the exit waypoint, drop.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalAction {
    pub grasp_point: Vec3,
    /// Absolute gripper height after the lift (m).
    pub lift_height: f64,
    pub exit_waypoint: Vec3,
    pub drop_point: Vec3,
    pub speed: f64,
}

impl RetrievalAction {
    /// The fixed per-scenario retrieval path through `container`'s exit.
    pub fn standard(container: &Container, grasp_point: Vec3, speed: f64) -> Self {
        RetrievalAction {
            grasp_point,
            lift_height: container.retrieval_lift_z(),
            exit_waypoint: container.exit_waypoint(),
            drop_point: container.drop_point(),
            speed,
        }
    }

    pub fn validate(&self, container: &Container) -> Result<()> {
        if !container.exit_region.contains(&self.drop_point) {
            return Err(Error::invalid("drop_point must lie inside the exit region"));
        }
        if !(self.speed > 0.0) {
            return Err(Error::invalid("speed must be > 0"));
        }
        Ok(())
    }
}

/// Adaptation: grasp at pick point, lift, move above the place point, lower,
/// release.
#[derive(Debug, Clone, PartialEq)]
pub struct PickPlaceAction {
    pub pick_point: Vec3,
    pub place_point: Vec3,
    pub lift_height: f64,
    pub speed: f64,
}

impl PickPlaceAction {
    pub fn standard(container: &Container, pick_point: Vec3, place_point: Vec3, speed: f64) -> Self {
        PickPlaceAction {
            pick_point,
            place_point,
            lift_height: container.adapt_lift_z(),
            speed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("pick_point", &self.pick_point), ("place_point", &self.place_point)] {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::invalid(alloc::format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FailureMode {
    None = 0,
    GraspMiss = 1,
    FloorContact = 2,
    DragOut = 3,
    NotExtracted = 4,
}

impl FailureMode {
    pub fn name(self) -> &'static str {
        match self {
            FailureMode::None => "none",
            FailureMode::GraspMiss => "grasp-miss",
            FailureMode::FloorContact => "floor-contact",
            FailureMode::DragOut => "drag-out",
            FailureMode::NotExtracted => "not-extracted",
        }
    }
}

/// Judged result of one retrieval.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionOutcome {
    pub success: bool,
    pub failure_mode: FailureMode,
    /// Garment owning the nearest particle to the grasp point (also set on a
    /// miss, when any garment exists).
    pub target_garment_id: Option<u32>,
    /// Non-target garments displaced past `tau_drag` or out of the container.
    pub displaced_ids: Vec<u32>,
    pub max_nontarget_displacement: f64,
    /// Lowest target particle height seen during transport.
    pub min_target_clearance: f64,
}

impl ActionOutcome {
    fn new(mode: FailureMode, target: Option<u32>) -> Self {
        ActionOutcome {
            success: mode == FailureMode::None,
            failure_mode: mode,
            target_garment_id: target,
            displaced_ids: Vec::new(),
            max_nontarget_displacement: 0.0,
            min_target_clearance: f64::INFINITY,
        }
    }
}

/// Gripper phase, recorded per trajectory frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Descend,
    Lift,
    Transport,
    Lower,
    Settle,
}

/// One recorded simulation step of a rollout.
#[derive(Debug, Clone)]
pub struct TrajectoryFrame {
    pub step: u64,
    pub phase: Phase,
    pub gripper: Vec3,
    pub centroids: Vec<Vec3>,
    pub in_container: Vec<bool>,
    /// Lowest particle height of the target garment at this step.
    pub min_target_z: f64,
}

/// Full rollout log used for judging and debugging.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub target_id: Option<u32>,
    pub grasp_missed: bool,
    pub garment_ids: Vec<u32>,
    pub initial_centroids: Vec<Vec3>,
    pub initially_in_container: Vec<bool>,
    pub frames: Vec<TrajectoryFrame>,
    pub final_target_centroid: Option<Vec3>,
    pub exit_region: Aabb,
}

/// Result of trying to attach at a point.
#[derive(Debug, Clone)]
pub enum GraspResult {
    Attached(Attachment),
    Miss {
        nearest_garment: Option<u32>,
        distance: f64,
    },
}

/// Finds the nearest particle to `point`; if it lies within `grasp_radius`,
/// attaches every particle of that garment within `grasp_radius` of `point`.
pub fn grasp(state: &SceneState, point: &Vec3, grasp_radius: f64) -> Result<GraspResult> {
    if !(grasp_radius > 0.0) {
        return Err(Error::invalid("grasp_radius must be > 0"));
    }
    let mut best: Option<(f64, usize)> = None;
    for (gi, g) in state.garments.iter().enumerate() {
        for p in &g.positions {
            let d = (p - point).norm();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, gi));
            }
        }
    }
    let Some((dist, gi)) = best else {
        return Ok(GraspResult::Miss { nearest_garment: None, distance: f64::INFINITY });
    };
    let garment = &state.garments[gi];
    if dist > grasp_radius {
        return Ok(GraspResult::Miss {
            nearest_garment: Some(garment.garment_id),
            distance: dist,
        });
    }
    let mut particles = Vec::new();
    let mut offsets = Vec::new();
    for (pi, p) in garment.positions.iter().enumerate() {
        if (p - point).norm() <= grasp_radius {
            particles.push(pi as u32);
            offsets.push(p - point);
        }
    }
    debug_assert!(!particles.is_empty());
    Ok(GraspResult::Attached(Attachment {
        garment_id: garment.garment_id,
        particles,
        offsets,
        gripper_pos: *point,
        gripper_vel: Vec3::zeros(),
    }))
}

/// Rollout bookkeeping shared by both primitives.
struct Rollout {
    traj: Trajectory,
    gripper: Vec3,
    /// Particle sphere radius; target heights are sphere-surface heights.
    radius: f64,
}

impl Rollout {
    fn begin(state: &SceneState, gripper: Vec3, radius: f64) -> Self {
        let centroids = state.centroids();
        let in_container: Vec<bool> = state
            .garments
            .iter()
            .map(|g| state.container.contains(&g.centroid()))
            .collect();
        Rollout {
            traj: Trajectory {
                target_id: None,
                grasp_missed: false,
                garment_ids: state.garments.iter().map(|g| g.garment_id).collect(),
                initial_centroids: centroids,
                initially_in_container: in_container,
                frames: Vec::new(),
                final_target_centroid: None,
                exit_region: state.container.exit_region,
            },
            gripper,
            radius,
        }
    }

    fn record(&mut self, state: &SceneState, phase: Phase) {
        let mut min_target_z = f64::INFINITY;
        if let Some(tid) = self.traj.target_id {
            if let Some(g) = state.garment_by_id(tid) {
                for p in &g.positions {
                    // Height of the particle surface, not its center: a
                    // particle resting on the floor has center z ~= radius.
                    min_target_z = min_target_z.min(p.z - self.radius);
                }
            }
        }
        self.traj.frames.push(TrajectoryFrame {
            step: state.step_count,
            phase,
            gripper: self.gripper,
            centroids: state.centroids(),
            in_container: state
                .garments
                .iter()
                .map(|g| state.container.contains(&g.centroid()))
                .collect(),
            min_target_z,
        });
    }

    /// Moves the gripper to `target` at `speed`, stepping the simulation and
    /// recording one frame per step. Updates the attachment if present.
    fn move_to(
        &mut self,
        state: &mut SceneState,
        target: Vec3,
        speed: f64,
        phase: Phase,
        params: &SimParams,
    ) -> Result<()> {
        loop {
            let to_go = target - self.gripper;
            let dist = to_go.norm();
            if dist < 1e-12 {
                if let Some(att) = &mut state.attachment {
                    att.gripper_vel = Vec3::zeros();
                }
                return Ok(());
            }
            let step_len = speed * params.dt;
            let (next, vel) = if dist <= step_len {
                (target, to_go / params.dt)
            } else {
                let dir = to_go / dist;
                (self.gripper + dir * step_len, dir * speed)
            };
            self.gripper = next;
            if let Some(att) = &mut state.attachment {
                att.gripper_pos = next;
                att.gripper_vel = vel;
            }
            step(state, params)?;
            self.record(state, phase);
        }
    }

    /// Runs the settle loop, then records one frame.
    fn settle_recorded(&mut self, state: &mut SceneState, params: &SimParams) -> Result<bool> {
        let converged = settle(state, params)?;
        self.record(state, Phase::Settle);
        Ok(converged)
    }
}

/// Executes a retrieval and judges it. The scene is left in its post-action
/// state (labeling rollouts snapshot/restore around this call).
pub fn execute_retrieval(
    state: &mut SceneState,
    action: &RetrievalAction,
    params: &SimParams,
    thresholds: &Thresholds,
) -> Result<(ActionOutcome, Trajectory)> {
    action.validate(&state.container)?;
    let start = Vec3::new(action.grasp_point.x, action.grasp_point.y, action.lift_height);
    let mut roll = Rollout::begin(state, start, params.contact_radius);

    // Descend to the grasp point (no attachment yet; the pile just sits).
    roll.move_to(state, action.grasp_point, action.speed, Phase::Descend, params)?;

    match grasp(state, &action.grasp_point, thresholds.grasp_radius)? {
        GraspResult::Miss { nearest_garment, .. } => {
            roll.traj.grasp_missed = true;
            roll.traj.target_id = nearest_garment;
            roll.settle_recorded(state, params)?;
            let outcome = judge_retrieval(&roll.traj, thresholds);
            Ok((outcome, roll.traj))
        }
        GraspResult::Attached(att) => {
            let target_id = att.garment_id;
            roll.traj.target_id = Some(target_id);
            state.attachment = Some(att);

            // Lift vertically, carry through the exit waypoint, then make a
            // low horizontal approach to the drop point so the dangling
            // extent has time to deploy over the open floor.
            let lift_goal = Vec3::new(action.grasp_point.x, action.grasp_point.y, action.lift_height);
            roll.move_to(state, lift_goal, action.speed, Phase::Lift, params)?;
            roll.move_to(state, action.exit_waypoint, action.speed, Phase::Transport, params)?;
            let back = Vec3::new(
                action.exit_waypoint.x - action.drop_point.x,
                action.exit_waypoint.y - action.drop_point.y,
                0.0,
            );
            let horiz = back.norm();
            if horiz > 0.10 {
                let approach = Vec3::new(action.drop_point.x, action.drop_point.y, action.drop_point.z)
                    + back * (horiz.min(0.45) * 0.9 / horiz);
                roll.move_to(state, approach, action.speed, Phase::Transport, params)?;
            }
            roll.move_to(state, action.drop_point, action.speed, Phase::Transport, params)?;

            state.attachment = None;
            roll.settle_recorded(state, params)?;
            roll.traj.final_target_centroid =
                state.garment_by_id(target_id).map(|g| g.centroid());
            let outcome = judge_retrieval(&roll.traj, thresholds);
            Ok((outcome, roll.traj))
        }
    }
}

/// Executes a pick-and-place. A grasp miss leaves the scene settled and
/// otherwise untouched. Returns whether the grasp attached.
pub fn execute_pick_place(
    state: &mut SceneState,
    action: &PickPlaceAction,
    params: &SimParams,
    thresholds: &Thresholds,
) -> Result<bool> {
    action.validate()?;
    let start = Vec3::new(action.pick_point.x, action.pick_point.y, action.lift_height);
    let mut roll = Rollout::begin(state, start, params.contact_radius);

    roll.move_to(state, action.pick_point, action.speed, Phase::Descend, params)?;
    match grasp(state, &action.pick_point, thresholds.grasp_radius)? {
        GraspResult::Miss { .. } => {
            settle(state, params)?;
            Ok(false)
        }
        GraspResult::Attached(att) => {
            roll.traj.target_id = Some(att.garment_id);
            state.attachment = Some(att);
            let lift_goal = Vec3::new(action.pick_point.x, action.pick_point.y, action.lift_height);
            roll.move_to(state, lift_goal, action.speed, Phase::Lift, params)?;
            let above_place = Vec3::new(action.place_point.x, action.place_point.y, action.lift_height);
            roll.move_to(state, above_place, action.speed, Phase::Transport, params)?;
            let lower_goal = Vec3::new(
                action.place_point.x,
                action.place_point.y,
                action.place_point.z + params.contact_radius,
            );
            roll.move_to(state, lower_goal, action.speed, Phase::Lower, params)?;
            state.attachment = None;
            settle(state, params)?;
            Ok(true)
        }
    }
}

/// Pure judgment of a retrieval trajectory.
///
/// Precedence: GraspMiss, then the earliest violating frame wins; when drag
/// and floor contact first appear on the same frame, DragOut wins. If the
/// rollout survives, the target must have been delivered into the exit
/// region, else NotExtracted.
pub fn judge_retrieval(traj: &Trajectory, thresholds: &Thresholds) -> ActionOutcome {
    if traj.grasp_missed {
        return ActionOutcome::new(FailureMode::GraspMiss, traj.target_id);
    }
    let target = traj.target_id;
    let n = traj.garment_ids.len();

    let mut first_violation: Option<FailureMode> = None;
    let mut displaced: Vec<u32> = Vec::new();
    let mut max_disp: f64 = 0.0;
    let mut min_clearance = f64::INFINITY;

    for frame in &traj.frames {
        let in_drag_window = matches!(frame.phase, Phase::Lift | Phase::Transport | Phase::Lower);
        let mut drag_here = false;
        if in_drag_window {
            for i in 0..n {
                if Some(traj.garment_ids[i]) == target {
                    continue;
                }
                let d0 = traj.initial_centroids[i];
                let d1 = frame.centroids[i];
                let horizontal = ((d1.x - d0.x).powi(2) + (d1.y - d0.y).powi(2)).sqrt();
                max_disp = max_disp.max(horizontal);
                let left_container = traj.initially_in_container[i] && !frame.in_container[i];
                if horizontal > thresholds.tau_drag || left_container {
                    drag_here = true;
                    if !displaced.contains(&traj.garment_ids[i]) {
                        displaced.push(traj.garment_ids[i]);
                    }
                }
            }
        }
        let mut floor_here = false;
        if frame.phase == Phase::Transport {
            min_clearance = min_clearance.min(frame.min_target_z);
            if frame.min_target_z < thresholds.floor_eps {
                floor_here = true;
            }
        }
        if first_violation.is_none() {
            if drag_here {
                first_violation = Some(FailureMode::DragOut);
            } else if floor_here {
                first_violation = Some(FailureMode::FloorContact);
            }
        }
    }

    let mode = if let Some(mode) = first_violation {
        mode
    } else {
        let delivered = traj
            .final_target_centroid
            .map(|c| traj.exit_region.contains(&c))
            .unwrap_or(false);
        if delivered {
            FailureMode::None
        } else {
            FailureMode::NotExtracted
        }
    };
    let mut outcome = ActionOutcome::new(mode, target);
    outcome.displaced_ids = displaced;
    outcome.max_nontarget_displacement = max_disp;
    outcome.min_target_clearance = min_clearance;
    outcome
}
