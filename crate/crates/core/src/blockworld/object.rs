use serde::{Deserialize, Serialize};
use std::fmt;

use super::geometry::{normalize_theta, Point, Rect};

/// Floor thickness of a bin, measured from its bottom.
pub const BIN_FLOOR: f64 = 0.005;
/// Wall thickness of a bin.
pub const BIN_WALL: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Shape {
    Cube,
    Brick,
    TriangleRoof,
    Bottle,
    Tray,
    Bin,
}

impl Shape {
    pub fn as_str(self) -> &'static str {
        match self {
            Shape::Cube => "CUBE",
            Shape::Brick => "BRICK",
            Shape::TriangleRoof => "TRIANGLE_ROOF",
            Shape::Bottle => "BOTTLE",
            Shape::Tray => "TRAY",
            Shape::Bin => "BIN",
        }
    }

    pub fn graspable(self) -> bool {
        !matches!(self, Shape::Tray | Shape::Bin)
    }

    /// Default dimensions (w along the local x axis, l, h) in meters.
    pub fn default_size(self) -> Size {
        match self {
            Shape::Cube => Size::new(0.03, 0.03, 0.03),
            Shape::Brick => Size::new(0.09, 0.03, 0.03),
            Shape::TriangleRoof => Size::new(0.05, 0.03, 0.02),
            // cylinder of diameter 0.03, footprint is its bounding square
            Shape::Bottle => Size::new(0.03, 0.03, 0.10),
            Shape::Tray => Size::new(0.20, 0.14, 0.005),
            Shape::Bin => Size::new(0.16, 0.16, 0.04),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Green,
    Blue,
    Yellow,
    Gray,
    Brown,
    White,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Size {
    pub w: f64,
    pub l: f64,
    pub h: f64,
}

impl Size {
    pub const fn new(w: f64, l: f64, h: f64) -> Self {
        Self { w, l, h }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Height of the object's bottom face.
    pub z: f64,
    pub theta: f64,
}

/// What a task asks `make_scene` to place.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectTemplate {
    pub id: String,
    pub shape: Shape,
    pub size: Size,
    pub color: Color,
}

impl ObjectTemplate {
    pub fn new(id: &str, shape: Shape, color: Color) -> Self {
        Self { id: id.to_string(), shape, size: shape.default_size(), color }
    }

    pub fn with_size(mut self, size: Size) -> Self {
        self.size = size;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub id: String,
    pub shape: Shape,
    pub size: Size,
    pub pose: Pose,
    pub color: Color,
    pub graspable: bool,
    /// Objects this one rests on; empty means the table.
    pub support: Vec<String>,
}

impl ObjectState {
    pub fn new(template: &ObjectTemplate, x: f64, y: f64, theta: f64) -> Self {
        Self {
            id: template.id.clone(),
            shape: template.shape,
            size: template.size,
            pose: Pose { x, y, z: 0.0, theta: normalize_theta(theta) },
            color: template.color,
            graspable: template.shape.graspable(),
            support: Vec::new(),
        }
    }

    pub fn on_table(&self) -> bool {
        self.support.is_empty()
    }

    pub fn footprint(&self) -> Rect {
        self.footprint_at(self.pose.x, self.pose.y, self.pose.theta)
    }

    pub fn footprint_at(&self, x: f64, y: f64, theta: f64) -> Rect {
        Rect::new(x, y, self.size.w, self.size.l, theta)
    }

    pub fn top(&self) -> f64 {
        self.pose.z + self.size.h
    }

    /// Angular period of the footprint's symmetry: squares repeat every quarter turn.
    pub fn symmetry_period(&self) -> f64 {
        if (self.size.w - self.size.l).abs() < 1e-12 {
            std::f64::consts::FRAC_PI_2
        } else {
            std::f64::consts::PI
        }
    }

    fn bin_interior(&self) -> Rect {
        self.footprint().shrunk(BIN_WALL)
    }

    /// Height of the upper surface at `p`, or `None` when `p` is off the footprint.
    pub fn surface_at(&self, p: Point) -> Option<f64> {
        if !self.footprint().contains(p) {
            return None;
        }
        match self.shape {
            Shape::Bin if self.bin_interior().contains(p) => Some(self.pose.z + BIN_FLOOR),
            _ => Some(self.top()),
        }
    }

    /// Height at which an object with footprint `held` would rest on this one.
    pub fn support_height_for(&self, held: &Rect) -> f64 {
        match self.shape {
            Shape::Bin if held.inside(&self.bin_interior(), 1e-9) => self.pose.z + BIN_FLOOR,
            _ => self.top(),
        }
    }

    /// Half-width of the square grasp zone around the object center.
    pub fn grasp_tolerance(&self) -> f64 {
        super::EPS_GRASP_FRACTION * self.size.w.min(self.size.l) / 2.0
    }

    pub fn in_grasp_zone(&self, p: Point) -> bool {
        let (u, v) = self.footprint().to_local(p);
        let eps = self.grasp_tolerance();
        u.abs() <= eps && v.abs() <= eps
    }
}
