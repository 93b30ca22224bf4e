//! Deterministic kinematic tabletop.
//!
//! Objects rest either on the table or on the set of objects directly under
//! them. `pick` and `place` return new scenes; a place whose supported
//! fraction is below [`PHI_MIN`] (or a roof placed across its support's
//! axis) makes the object fall sideways by its half diagonal.

mod geometry;
mod object;
mod render;
mod scene;

pub use geometry::{axis_difference, normalize_theta, overlap, overlap_area, Point, Rect};
pub use object::{Color, ObjectState, ObjectTemplate, Pose, Shape, Size, BIN_FLOOR, BIN_WALL};
pub use render::{crop, observe, render_heightmap, Grid, Observation, RenderConfig};
pub use scene::{Gripper, Scene, Workspace};

use thiserror::Error;

/// Grasp zone half-width as a fraction of half the smaller footprint side.
pub const EPS_GRASP_FRACTION: f64 = 0.6;
/// Minimum supported fraction of a placed footprint.
pub const PHI_MIN: f64 = 0.5;
/// Maximum misalignment (radians) between a roof and the axis of what it rests on.
pub const EPS_ALIGN: f64 = 0.3;
/// Footprint overlaps at or below this area (m^2) count as touching, not overlapping.
pub const EPS_OVERLAP: f64 = 1e-6;
pub const HEIGHT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    /// Workspace side W in meters.
    pub side: f64,
    /// Heightmap resolution G.
    pub grid: usize,
    /// In-hand crop size C.
    pub crop: usize,
    /// Object centers are drawn from the cell centers of this lattice.
    pub placement_grid: usize,
    /// Minimum gap between sampled footprints.
    pub clearance: f64,
    pub max_tries: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { side: 0.4, grid: 64, crop: 24, placement_grid: 32, clearance: 0.005, max_tries: 1000 }
    }
}

impl SimConfig {
    pub fn render(&self) -> RenderConfig {
        RenderConfig { grid: self.grid, crop: self.crop }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum RobotFault {
    #[error("PICK_WHILE_HOLDING: the gripper is already holding an object")]
    PickWhileHolding,
    #[error("GRASP_MISS: no graspable object at ({x:.3}, {y:.3})")]
    GraspMiss { x: f64, y: f64 },
    #[error("OBJECT_LOADED: {id} supports another object")]
    ObjectLoaded { id: String },
    #[error("OUT_OF_WORKSPACE: ({x:.3}, {y:.3}) is outside the workspace")]
    OutOfWorkspace { x: f64, y: f64 },
    #[error("PLACE_WHILE_EMPTY: the gripper is not holding anything")]
    PlaceWhileEmpty,
}

impl RobotFault {
    pub fn code(&self) -> &'static str {
        match self {
            RobotFault::PickWhileHolding => "PICK_WHILE_HOLDING",
            RobotFault::GraspMiss { .. } => "GRASP_MISS",
            RobotFault::ObjectLoaded { .. } => "OBJECT_LOADED",
            RobotFault::OutOfWorkspace { .. } => "OUT_OF_WORKSPACE",
            RobotFault::PlaceWhileEmpty => "PLACE_WHILE_EMPTY",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SceneError {
    #[error("PLACEMENT_EXHAUSTED: could not place {id} after {tries} tries")]
    PlacementExhausted { id: String, tries: usize },
    #[error("malformed scene document: {0}")]
    Json(String),
    #[error("scene violates invariants: {0}")]
    Invalid(String),
}
