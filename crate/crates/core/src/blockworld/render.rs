use serde::{Deserialize, Serialize};

use super::geometry::Point;
use super::scene::{Gripper, Scene};

/// Square grid of f32 values, row-major with the first index along x.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub side: usize,
    pub data: Vec<f32>,
}

impl Grid {
    pub fn zeros(side: usize) -> Self {
        Self { side, data: vec![0.0; side * side] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.side + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f32) {
        self.data[i * self.side + j] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(0.0, f32::max)
    }

    /// Max-pools `factor x factor` blocks; `side` must be divisible by `factor`.
    pub fn max_pool(&self, factor: usize) -> Option<Grid> {
        if factor == 0 || !self.side.is_multiple_of(factor) {
            return None;
        }
        if factor == 1 {
            return Some(self.clone());
        }
        let side = self.side / factor;
        let mut out = Grid::zeros(side);
        for i in 0..self.side {
            for j in 0..self.side {
                let (a, b) = (i / factor, j / factor);
                let v = self.get(i, j);
                if v > out.get(a, b) {
                    out.set(a, b, v);
                }
            }
        }
        Some(out)
    }

    /// Renders as ASCII shading, one text row per x index.
    pub fn to_ascii(&self) -> String {
        const RAMP: &[u8] = b" .:-=+*#%@";
        let top = self.max().max(1e-6);
        let mut s = String::with_capacity(self.side * (self.side + 1));
        for i in 0..self.side {
            for j in 0..self.side {
                let v = self.get(i, j);
                let k = if v <= 0.0 { 0 } else { 1 + ((v / top) * (RAMP.len() - 2) as f32).round() as usize };
                s.push(RAMP[k.min(RAMP.len() - 1)] as char);
            }
            s.push('\n');
        }
        s
    }

    /// Binary PGM (P5) with heights scaled so `full_scale` meters maps to 255.
    pub fn to_pgm(&self, full_scale: f32) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.side, self.side).into_bytes();
        out.extend(self.data.iter().map(|&v| ((v / full_scale).clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }
}

/// The MDP state seen by a policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub heightmap: Grid,
    pub inhand: Grid,
    /// 1 when holding, 0 when empty.
    pub gripper: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RenderConfig {
    pub grid: usize,
    pub crop: usize,
}

fn render(scene: &Scene, side: usize, include_held: bool) -> Grid {
    let mut grid = Grid::zeros(side);
    let cell = scene.workspace.side / side as f64;
    let held = if include_held { None } else { scene.held_id() };
    for o in &scene.objects {
        if Some(o.id.as_str()) == held {
            continue;
        }
        let r = o.footprint().half_diagonal();
        let span = |c: f64| {
            let lo = ((c - r) / cell).floor().max(0.0) as usize;
            let hi = (((c + r) / cell).ceil().max(0.0) as usize).min(side);
            lo..hi
        };
        for i in span(o.pose.x) {
            for j in span(o.pose.y) {
                let p = Point::new((i as f64 + 0.5) * cell, (j as f64 + 0.5) * cell);
                if let Some(h) = o.surface_at(p) {
                    let h = h as f32;
                    if h > grid.get(i, j) {
                        grid.set(i, j, h);
                    }
                }
            }
        }
    }
    grid
}

/// Orthographic max-height projection sampled at cell centers; the held object is excluded.
pub fn render_heightmap(scene: &Scene, side: usize) -> Grid {
    render(scene, side, false)
}

/// Observation with the in-hand crop taken from the pre-pick heightmap around the grasp point.
pub fn observe(scene: &Scene, cfg: RenderConfig) -> Observation {
    let heightmap = render_heightmap(scene, cfg.grid);
    let (inhand, gripper) = match &scene.gripper {
        Gripper::Empty => (Grid::zeros(cfg.crop), 0),
        Gripper::Holding { x, y, theta, .. } => {
            // the held object keeps its pre-pick pose, so including it reproduces the pre-pick map
            let before = render(scene, cfg.grid, true);
            (crop(&before, scene.workspace.side, *x, *y, *theta, cfg.crop), 1)
        }
    };
    Observation { heightmap, inhand, gripper }
}

/// Crops `size x size` cells around `(x, y)` in the gripper frame rotated by `theta`.
pub fn crop(map: &Grid, workspace_side: f64, x: f64, y: f64, theta: f64, size: usize) -> Grid {
    let cell = workspace_side / map.side as f64;
    let (s, c) = theta.sin_cos();
    let half = size as f64 / 2.0;
    let mut out = Grid::zeros(size);
    for a in 0..size {
        for b in 0..size {
            let u = (a as f64 + 0.5 - half) * cell;
            let v = (b as f64 + 0.5 - half) * cell;
            let wx = x + c * u - s * v;
            let wy = y + s * u + c * v;
            let fi = (wx / cell).floor();
            let fj = (wy / cell).floor();
            if fi >= 0.0 && fj >= 0.0 && (fi as usize) < map.side && (fj as usize) < map.side {
                out.set(a, b, map.get(fi as usize, fj as usize));
            }
        }
    }
    out
}
