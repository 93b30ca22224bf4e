use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::fmt::Write as _;

use super::geometry::{normalize_theta, overlap, axis_difference, Point, Rect};
use super::object::{ObjectState, ObjectTemplate, Shape};
use super::{RobotFault, SceneError, SimConfig, EPS_ALIGN, EPS_OVERLAP, HEIGHT_TOL, PHI_MIN};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    /// Side length of the square workspace `[0, side) x [0, side)`.
    pub side: f64,
}

impl Workspace {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..self.side).contains(&x) && (0.0..self.side).contains(&y)
    }

    pub fn rect(&self) -> Rect {
        Rect::new(self.side / 2.0, self.side / 2.0, self.side, self.side, 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Gripper {
    Empty,
    /// Holding `id`, grasped at `(x, y)` with gripper angle `theta`.
    Holding { id: String, x: f64, y: f64, theta: f64 },
}

/// Full simulator ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub workspace: Workspace,
    pub objects: Vec<ObjectState>,
    pub gripper: Gripper,
    pub seed: u64,
    pub step_count: u64,
}

/// Maximum half-diagonal steps a falling object slides before resting on whatever is below.
const FALL_STEPS: usize = 4;

/// Result of resolving what a footprint would rest on.
struct Landing {
    z: f64,
    supporters: Vec<usize>,
    supported_fraction: f64,
    centroid: Point,
}

impl Scene {
    pub fn empty(side: f64, seed: u64) -> Self {
        Self { workspace: Workspace { side }, objects: Vec::new(), gripper: Gripper::Empty, seed, step_count: 0 }
    }

    /// Places `inventory` uniformly at random on lattice points, non-overlapping, all on the table.
    pub fn generate(inventory: &[ObjectTemplate], seed: u64, cfg: &SimConfig) -> Result<Self, SceneError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut scene = Scene::empty(cfg.side, seed);
        let ws = scene.workspace.rect();
        let cell = cfg.side / cfg.placement_grid as f64;
        for template in inventory {
            let mut placed = None;
            for _ in 0..cfg.max_tries {
                let i = rng.random_range(0..cfg.placement_grid);
                let j = rng.random_range(0..cfg.placement_grid);
                let theta = rng.random::<f64>() * PI;
                let candidate = ObjectState::new(template, (i as f64 + 0.5) * cell, (j as f64 + 0.5) * cell, theta);
                let fp = candidate.footprint();
                if !fp.inside(&ws, 0.0) {
                    continue;
                }
                let grown = fp.grown(cfg.clearance);
                if scene.objects.iter().any(|o| overlap(&grown, &o.footprint()).0 > 0.0) {
                    continue;
                }
                placed = Some(candidate);
                break;
            }
            match placed {
                Some(obj) => scene.objects.push(obj),
                None => return Err(SceneError::PlacementExhausted { id: template.id.clone(), tries: cfg.max_tries }),
            }
        }
        Ok(scene)
    }

    pub fn object(&self, id: &str) -> Option<&ObjectState> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn held_id(&self) -> Option<&str> {
        match &self.gripper {
            Gripper::Holding { id, .. } => Some(id),
            Gripper::Empty => None,
        }
    }

    pub fn is_held(&self, id: &str) -> bool {
        self.held_id() == Some(id)
    }

    /// Objects currently in the world (everything except the held one).
    pub fn resting(&self) -> impl Iterator<Item = &ObjectState> {
        let held = self.held_id();
        self.objects.iter().filter(move |o| Some(o.id.as_str()) != held)
    }

    pub fn supports_anything(&self, id: &str) -> bool {
        self.objects.iter().any(|o| o.support.iter().any(|s| s == id))
    }

    /// Topmost resting object whose footprint covers `p`, with its surface height there.
    pub fn topmost_at(&self, p: Point) -> Option<(usize, f64)> {
        let held = self.held_id();
        let mut best: Option<(usize, f64)> = None;
        for (i, o) in self.objects.iter().enumerate() {
            if Some(o.id.as_str()) == held {
                continue;
            }
            if let Some(h) = o.surface_at(p) {
                if best.is_none_or(|(_, bh)| h > bh) {
                    best = Some((i, h));
                }
            }
        }
        best
    }

    pub fn pick(&self, x: f64, y: f64, theta: f64) -> Result<Scene, RobotFault> {
        if self.held_id().is_some() {
            return Err(RobotFault::PickWhileHolding);
        }
        if !self.workspace.contains(x, y) {
            return Err(RobotFault::OutOfWorkspace { x, y });
        }
        let p = Point::new(x, y);
        let Some((idx, _)) = self.topmost_at(p) else {
            return Err(RobotFault::GraspMiss { x, y });
        };
        let target = &self.objects[idx];
        if !target.graspable || !target.in_grasp_zone(p) {
            return Err(RobotFault::GraspMiss { x, y });
        }
        if self.supports_anything(&target.id) {
            return Err(RobotFault::ObjectLoaded { id: target.id.clone() });
        }
        let mut next = self.clone();
        next.objects[idx].support.clear();
        next.gripper = Gripper::Holding { id: target.id.clone(), x, y, theta: normalize_theta(theta) };
        next.step_count += 1;
        Ok(next)
    }

    pub fn place(&self, x: f64, y: f64, theta: f64) -> Result<Scene, RobotFault> {
        let Some(held) = self.held_id() else {
            return Err(RobotFault::PlaceWhileEmpty);
        };
        if !self.workspace.contains(x, y) {
            return Err(RobotFault::OutOfWorkspace { x, y });
        }
        let idx = self.index_of(held).expect("held object is part of the scene");
        let theta = normalize_theta(theta);
        let fp = self.objects[idx].footprint_at(x, y, theta);
        let landing = self.landing(&fp, idx);

        let aligned = self.objects[idx].shape != Shape::TriangleRoof
            || landing.supporters.iter().all(|&s| {
                let sup = &self.objects[s];
                axis_difference(theta, sup.pose.theta, sup.symmetry_period()) <= EPS_ALIGN
            });
        let stable = landing.supporters.is_empty() || (landing.supported_fraction >= PHI_MIN && aligned);

        let mut next = self.clone();
        if stable {
            next.settle(idx, x, y, theta, &landing);
        } else {
            // fall off the supported region along the overhang direction
            let mut dx = x - landing.centroid.x;
            let mut dy = y - landing.centroid.y;
            let norm = dx.hypot(dy);
            if norm < 1e-12 {
                dx = 1.0;
                dy = 0.0;
            } else {
                dx /= norm;
                dy /= norm;
            }
            // step by the half diagonal until the footprint clears everything
            let reach = fp.half_diagonal();
            let max = self.workspace.side - 1e-9;
            let mut spot = None;
            for k in 1..=FALL_STEPS {
                let fx = (x + dx * reach * k as f64).clamp(0.0, max);
                let fy = (y + dy * reach * k as f64).clamp(0.0, max);
                let land = self.landing(&self.objects[idx].footprint_at(fx, fy, theta), idx);
                let clear = land.supporters.is_empty();
                if clear || k == FALL_STEPS {
                    spot = Some((fx, fy, land));
                }
                if clear {
                    break;
                }
            }
            let (fx, fy, land) = spot.expect("at least one fall step");
            next.settle(idx, fx, fy, theta, &land);
        }
        next.gripper = Gripper::Empty;
        next.step_count += 1;
        Ok(next)
    }

    fn settle(&mut self, idx: usize, x: f64, y: f64, theta: f64, landing: &Landing) {
        let support: Vec<String> = landing.supporters.iter().map(|&s| self.objects[s].id.clone()).collect();
        let obj = &mut self.objects[idx];
        obj.pose.x = x;
        obj.pose.y = y;
        obj.pose.z = landing.z;
        obj.pose.theta = theta;
        obj.support = support;
    }

    /// Highest surface the footprint would touch, ignoring object `exclude`.
    fn landing(&self, fp: &Rect, exclude: usize) -> Landing {
        let mut contacts = Vec::new();
        for (i, o) in self.objects.iter().enumerate() {
            if i == exclude {
                continue;
            }
            let (area, c) = overlap(fp, &o.footprint());
            if area > EPS_OVERLAP {
                contacts.push((i, o.support_height_for(fp), area, c));
            }
        }
        let Some(z) = contacts.iter().map(|c| c.1).reduce(f64::max) else {
            return Landing { z: 0.0, supporters: Vec::new(), supported_fraction: 1.0, centroid: fp.center() };
        };
        let mut supporters = Vec::new();
        let (mut total, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for &(i, h, area, c) in &contacts {
            if (h - z).abs() <= HEIGHT_TOL {
                supporters.push(i);
                total += area;
                cx += area * c.x;
                cy += area * c.y;
            }
        }
        Landing { z, supporters, supported_fraction: total / fp.area(), centroid: Point::new(cx / total, cy / total) }
    }

    /// Checks the structural invariants, returning a description of each violation.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let held = self.held_id();
        for (i, o) in self.objects.iter().enumerate() {
            if self.objects[..i].iter().any(|p| p.id == o.id) {
                out.push(format!("duplicate id {}", o.id));
            }
            if !self.workspace.contains(o.pose.x, o.pose.y) {
                out.push(format!("{} center outside workspace", o.id));
            }
            if !(0.0..PI).contains(&o.pose.theta) {
                out.push(format!("{} theta {} not in [0, pi)", o.id, o.pose.theta));
            }
            if o.pose.z < 0.0 {
                out.push(format!("{} below the table", o.id));
            }
            if o.graspable != o.shape.graspable() {
                out.push(format!("{} graspable flag disagrees with shape", o.id));
            }
            if Some(o.id.as_str()) == held {
                continue;
            }
            if o.on_table() {
                if o.pose.z.abs() > HEIGHT_TOL {
                    out.push(format!("{} on table but z = {}", o.id, o.pose.z));
                }
                continue;
            }
            let fp = o.footprint();
            for s in &o.support {
                match self.object(s) {
                    None => out.push(format!("{} rests on unknown {}", o.id, s)),
                    Some(_) if Some(s.as_str()) == held => out.push(format!("{} rests on held {}", o.id, s)),
                    Some(sup) if s == &o.id => out.push(format!("{} rests on itself", sup.id)),
                    Some(sup) => {
                        let h = sup.support_height_for(&fp);
                        if (h - o.pose.z).abs() > HEIGHT_TOL {
                            out.push(format!("{} at z = {} but {} surface is {}", o.id, o.pose.z, s, h));
                        }
                    }
                }
            }
        }
        let resting: Vec<&ObjectState> = self.resting().collect();
        for (a, oa) in resting.iter().enumerate() {
            for ob in &resting[a + 1..] {
                if oa.support == ob.support {
                    let area = overlap(&oa.footprint(), &ob.footprint()).0;
                    if area > EPS_OVERLAP {
                        out.push(format!("{} and {} overlap by {area:e} m^2", oa.id, ob.id));
                    }
                }
            }
        }
        if let Some(h) = held {
            if self.object(h).is_none() {
                out.push(format!("held object {h} does not exist"));
            }
        }
        out
    }

    /// Fixed-format text description, one line per object then the gripper line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for o in &self.objects {
            let _ = writeln!(
                s,
                "{}: {}, size ({:.3},{:.3},{:.3}), pose (x={:.3}, y={:.3}, z={:.3}, theta={:.3})",
                o.id, o.shape, o.size.w, o.size.l, o.size.h, o.pose.x, o.pose.y, o.pose.z, o.pose.theta
            );
        }
        match &self.gripper {
            Gripper::Empty => s.push_str("gripper: EMPTY"),
            Gripper::Holding { id, .. } => {
                let _ = write!(s, "gripper: HOLDING {id}");
            }
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let scene: Scene = serde_json::from_str(text).map_err(|e| SceneError::Json(e.to_string()))?;
        let problems = scene.violations();
        if !problems.is_empty() {
            return Err(SceneError::Invalid(problems.join("; ")));
        }
        Ok(scene)
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scene serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
