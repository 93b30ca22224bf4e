use std::f64::consts::FRAC_PI_2;
use std::fmt::Write;

use super::TaskName;
use crate::blockworld::{overlap_area, ObjectState, Rect, Scene, EPS_OVERLAP};
use crate::dsl::{self, Program};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("PLAN_INFEASIBLE: {0}")]
pub struct PlanInfeasible(pub String);

/// Gap left between blocks that are placed side by side.
const SIDE_GAP: f64 = 0.001;
/// Pyramid bases sit this far either side of the build site center.
const PYRAMID_HALF_SPACING: f64 = 0.0165;
const BOTTLE_U: [f64; 3] = [-0.05, 0.0, 0.05];
const BOTTLE_V: [f64; 2] = [-0.035, 0.035];
const BIN_U: [f64; 4] = [-0.0525, -0.0175, 0.0175, 0.0525];
const BIN_V: [f64; 2] = [-0.0175, 0.0175];
/// Lattice used to search for free build sites.
const SITE_LATTICE: usize = 32;

struct Script(String);

impl Script {
    fn pick(&mut self, id: &str) {
        writeln!(self.0, "pick(\"{id}\")").expect("string write");
    }

    fn place_on(&mut self, id: &str) {
        writeln!(self.0, "place_on(\"{id}\")").expect("string write");
    }

    fn place(&mut self, x: f64, y: f64, theta: f64) {
        writeln!(self.0, "place({x}, {y}, {theta})").expect("string write");
    }

    fn finish(mut self) -> String {
        if self.0.ends_with('\n') {
            self.0.pop();
        }
        self.0
    }
}

fn need<'a>(scene: &'a Scene, id: &str) -> Result<&'a ObjectState, PlanInfeasible> {
    scene.object(id).ok_or_else(|| PlanInfeasible(format!("object '{id}' is missing")))
}

/// True if `rect` lies in the workspace and clears every object not in `ignore` by `margin`.
fn site_free(scene: &Scene, rect: &Rect, ignore: &[&str], margin: f64) -> bool {
    rect.inside(&scene.workspace.rect(), 0.0) && clear_of(scene, rect, ignore, margin)
}

fn clear_of(scene: &Scene, rect: &Rect, ignore: &[&str], margin: f64) -> bool {
    let grown = rect.grown(margin);
    scene
        .objects
        .iter()
        .filter(|o| !ignore.contains(&o.id.as_str()))
        .all(|o| overlap_area(&grown, &o.footprint()) <= EPS_OVERLAP)
}

/// Lattice points ordered by distance to the workspace center.
fn lattice_by_distance(side: f64) -> Vec<(f64, f64)> {
    let cell = side / SITE_LATTICE as f64;
    let mid = side / 2.0;
    let mut pts: Vec<(f64, f64)> = (0..SITE_LATTICE)
        .flat_map(|i| (0..SITE_LATTICE).map(move |j| ((i as f64 + 0.5) * cell, (j as f64 + 0.5) * cell)))
        .collect();
    pts.sort_by(|a, b| {
        let da = (a.0 - mid).hypot(a.1 - mid);
        let db = (b.0 - mid).hypot(b.1 - mid);
        da.total_cmp(&db)
    });
    pts
}

/// Scripted program that solves `task` from `scene`. Deterministic in the scene.
pub fn expert_source(task: TaskName, scene: &Scene) -> Result<String, PlanInfeasible> {
    if scene.held_id().is_some() {
        return Err(PlanInfeasible("the gripper must start empty".into()));
    }
    let mut s = Script(String::new());
    match task {
        TaskName::MoveCube => {
            need(scene, "cube_small")?;
            need(scene, "cube_big")?;
            s.pick("cube_small");
            s.place_on("cube_big");
        }
        TaskName::BlockStacking | TaskName::HouseBuilding1 => {
            let n = if task == TaskName::BlockStacking { 4 } else { 3 };
            for k in 2..=n {
                need(scene, &format!("block_{k}"))?;
                s.pick(&format!("block_{k}"));
                s.place_on(&format!("block_{}", k - 1));
            }
            if task == TaskName::HouseBuilding1 {
                need(scene, "roof")?;
                s.pick("roof");
                s.place_on("block_3");
            }
        }
        TaskName::PyramidStacking => {
            let base = need(scene, "block_1")?;
            need(scene, "block_2")?;
            need(scene, "block_3")?;
            let w = base.size.w;
            let (cx, cy) = lattice_by_distance(scene.workspace.side)
                .into_iter()
                .find(|&(x, y)| {
                    let site = Rect::new(x, y, 2.0 * PYRAMID_HALF_SPACING + w, base.size.l, 0.0);
                    site_free(scene, &site, &[], 0.003)
                })
                .ok_or_else(|| PlanInfeasible("no free site for the pyramid".into()))?;
            s.pick("block_1");
            s.place(cx - PYRAMID_HALF_SPACING, cy, 0.0);
            s.pick("block_2");
            s.place(cx + PYRAMID_HALF_SPACING, cy, 0.0);
            s.pick("block_3");
            s.place(cx, cy, 0.0);
        }
        TaskName::HouseBuilding2 => {
            let (other, mid, dir) = side_by_side(scene, ["cube_1", "cube_2"], "roof")?;
            s.pick(other.0);
            s.place(other.1, other.2, other.3);
            s.pick("roof");
            s.place(mid.0, mid.1, dir);
        }
        TaskName::HouseBuilding3 => {
            let (other, mid, dir) = side_by_side(scene, ["red_cube_1", "red_cube_2"], "blue_brick")?;
            need(scene, "roof")?;
            s.pick(other.0);
            s.place(other.1, other.2, other.3);
            s.pick("blue_brick");
            s.place(mid.0, mid.1, dir);
            s.pick("roof");
            s.place_on("blue_brick");
        }
        TaskName::BottleArrangement => {
            let tray = need(scene, "tray")?.footprint();
            let mut k = 1;
            for v in BOTTLE_V {
                for u in BOTTLE_U {
                    let id = format!("bottle_{k}");
                    need(scene, &id)?;
                    let p = tray.to_world(u, v);
                    s.pick(&id);
                    s.place(p.x, p.y, tray.theta);
                    k += 1;
                }
            }
        }
        TaskName::BinPacking => {
            let bin = need(scene, "bin")?.footprint();
            let mut k = 1;
            for v in BIN_V {
                for u in BIN_U {
                    let id = format!("block_{k}");
                    need(scene, &id)?;
                    let p = bin.to_world(u, v);
                    s.pick(&id);
                    s.place(p.x, p.y, bin.theta);
                    k += 1;
                }
            }
        }
    }
    Ok(s.finish())
}

type Move<'a> = (&'a str, f64, f64, f64);

/// Picks an anchor cube and a side to put the other cube on, such that both the
/// slot and the spanning piece `span_id` laid across the pair are clear.
/// Returns the move for the second cube, the pair midpoint and the span direction.
///
/// Options that keep every footprint inside the workspace are preferred; near
/// the edges a footprint may overhang as long as its center stays inside.
fn side_by_side<'a>(scene: &Scene, pair: [&'a str; 2], span_id: &str) -> Result<(Move<'a>, (f64, f64), f64), PlanInfeasible> {
    let span = need(scene, span_id)?;
    let ws = scene.workspace.rect();
    let fits = |r: &Rect, strict: bool| {
        if strict {
            r.inside(&ws, 0.0)
        } else {
            scene.workspace.contains(r.cx, r.cy)
        }
    };
    for strict in [true, false] {
        for (anchor_id, other_id) in [(pair[0], pair[1]), (pair[1], pair[0])] {
            let anchor = need(scene, anchor_id)?;
            let other = need(scene, other_id)?;
            let dist = (anchor.size.w + other.size.w) / 2.0 + SIDE_GAP;
            for k in 0..4 {
                let dir = anchor.pose.theta + k as f64 * FRAC_PI_2;
                let (sin, cos) = dir.sin_cos();
                let (x, y) = (anchor.pose.x + dist * cos, anchor.pose.y + dist * sin);
                let slot = other.footprint_at(x, y, anchor.pose.theta);
                if !fits(&slot, strict) || !clear_of(scene, &slot, &[anchor_id, other_id], SIDE_GAP / 2.0) {
                    continue;
                }
                let mid = ((anchor.pose.x + x) / 2.0, (anchor.pose.y + y) / 2.0);
                let cover = span.footprint_at(mid.0, mid.1, dir);
                if !fits(&cover, strict) || cover_blocked(scene, &cover, &[anchor_id, other_id, span_id], anchor.top()) {
                    continue;
                }
                return Ok(((other_id, x, y, anchor.pose.theta), mid, dir));
            }
        }
    }
    Err(PlanInfeasible(format!("no free side next to {} or {}", pair[0], pair[1])))
}

/// A piece spanning the pair may overhang lower objects, as long as it does not
/// cover their grasp point or rest on them.
fn cover_blocked(scene: &Scene, cover: &Rect, ignore: &[&str], pair_top: f64) -> bool {
    scene.objects.iter().filter(|o| !ignore.contains(&o.id.as_str())).any(|o| {
        overlap_area(cover, &o.footprint()) > EPS_OVERLAP
            && (o.top() >= pair_top - 1e-9 || cover.grown(0.002).contains(o.footprint().center()))
    })
}

pub fn expert_plan(task: TaskName, scene: &Scene) -> Result<Program, PlanInfeasible> {
    let src = expert_source(task, scene)?;
    dsl::parse(&src).map_err(|e| PlanInfeasible(format!("generated program does not parse: {e}")))
}
