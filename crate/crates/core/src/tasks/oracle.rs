use super::TaskName;
use crate::blockworld::{overlap_area, ObjectState, Scene, SimConfig};

/// Goal tolerances derived from the heightmap resolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Half a heightmap cell.
    pub goal: f64,
    /// One heightmap cell.
    pub row: f64,
}

impl Tolerances {
    pub fn for_config(cfg: &SimConfig) -> Self {
        let cell = cfg.side / cfg.grid as f64;
        Self { goal: cell / 2.0, row: cell }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::for_config(&SimConfig::default())
    }
}

/// Ground-truth success predicate, with tolerances for the default grid.
pub fn oracle_check(task: TaskName, scene: &Scene) -> bool {
    oracle_check_with(task, scene, Tolerances::default())
}

pub fn oracle_check_with(task: TaskName, scene: &Scene, tol: Tolerances) -> bool {
    if scene.held_id().is_some() {
        return false;
    }
    let get = |id: &str| scene.object(id);
    match task {
        TaskName::MoveCube => (|| {
            let small = get("cube_small")?;
            let big = get("cube_big")?;
            let offset = (small.pose.x - big.pose.x).hypot(small.pose.y - big.pose.y);
            Some(supported_by(small, &[big]) && offset <= tol.goal)
        })()
        .unwrap_or(false),
        TaskName::BlockStacking => ids(scene, "block_").len() == 4 && chain(&ids(scene, "block_")).is_some(),
        TaskName::PyramidStacking => pyramid(scene),
        TaskName::HouseBuilding1 => (|| {
            let blocks = ids(scene, "block_");
            if blocks.len() != 3 {
                return None;
            }
            let order = chain(&blocks)?;
            let top = order.last()?;
            Some(supported_by(get("roof")?, &[top]))
        })()
        .unwrap_or(false),
        TaskName::HouseBuilding2 => (|| {
            let (a, b) = (get("cube_1")?, get("cube_2")?);
            Some(adjacent_on_table(a, b, tol) && supported_by(get("roof")?, &[a, b]))
        })()
        .unwrap_or(false),
        TaskName::HouseBuilding3 => (|| {
            let (a, b) = (get("red_cube_1")?, get("red_cube_2")?);
            let brick = get("blue_brick")?;
            Some(adjacent_on_table(a, b, tol) && supported_by(brick, &[a, b]) && supported_by(get("roof")?, &[brick]))
        })()
        .unwrap_or(false),
        TaskName::BottleArrangement => bottles(scene, tol).unwrap_or(false),
        TaskName::BinPacking => (|| {
            let bin = get("bin")?;
            let blocks = ids(scene, "block_");
            let rim = bin.top();
            Some(
                blocks.len() == 8
                    && blocks.iter().all(|b| {
                        b.footprint().inside(&bin.footprint(), 1e-9) && b.top() <= rim + 1e-9
                    }),
            )
        })()
        .unwrap_or(false),
    }
}

fn ids<'a>(scene: &'a Scene, prefix: &str) -> Vec<&'a ObjectState> {
    scene.objects.iter().filter(|o| o.id.starts_with(prefix)).collect()
}

/// True iff `o` rests on exactly the objects in `on`.
fn supported_by(o: &ObjectState, on: &[&ObjectState]) -> bool {
    o.support.len() == on.len() && on.iter().all(|s| o.support.contains(&s.id))
}

/// Orders `objs` bottom to top if they form a single support chain.
fn chain<'a>(objs: &[&'a ObjectState]) -> Option<Vec<&'a ObjectState>> {
    let mut order = vec![*objs.iter().find(|o| o.on_table())?];
    while order.len() < objs.len() {
        let below = order.last().expect("non-empty");
        let next = objs.iter().find(|o| supported_by(o, &[below]))?;
        order.push(next);
    }
    Some(order)
}

fn adjacent_on_table(a: &ObjectState, b: &ObjectState, tol: Tolerances) -> bool {
    let dist = (a.pose.x - b.pose.x).hypot(a.pose.y - b.pose.y);
    a.on_table() && b.on_table() && dist - a.size.w.max(b.size.w) <= tol.goal
}

fn pyramid(scene: &Scene) -> bool {
    let blocks = ids(scene, "block_");
    if blocks.len() != 3 {
        return false;
    }
    let base: Vec<_> = blocks.iter().filter(|b| b.on_table()).copied().collect();
    let top: Vec<_> = blocks.iter().filter(|b| !b.on_table()).copied().collect();
    if base.len() != 2 || top.len() != 1 {
        return false;
    }
    let (a, b, t) = (base[0], base[1], top[0]);
    let gap = (a.pose.x - b.pose.x).hypot(a.pose.y - b.pose.y);
    let area = t.footprint().area();
    gap <= 1.2 * a.size.w
        && supported_by(t, &[a, b])
        && [a, b].iter().all(|s| overlap_area(&t.footprint(), &s.footprint()) / area >= 0.25)
}

fn bottles(scene: &Scene, tol: Tolerances) -> Option<bool> {
    let tray = scene.object("tray")?;
    let bottles = ids(scene, "bottle_");
    if bottles.len() != 6 {
        return Some(false);
    }
    let frame = tray.footprint();
    let mut v = Vec::with_capacity(6);
    for b in &bottles {
        if !supported_by(b, &[tray]) || !b.footprint().inside(&frame, 1e-9) {
            return Some(false);
        }
        v.push(frame.to_local(b.footprint().center()).1);
    }
    v.sort_by(f64::total_cmp);
    let (lo, hi) = v.split_at(3);
    let mean = |r: &[f64]| r.iter().sum::<f64>() / r.len() as f64;
    let (m_lo, m_hi) = (mean(lo), mean(hi));
    let tight = |r: &[f64], m: f64| r.iter().all(|x| (x - m).abs() <= tol.row);
    let width = bottles[0].size.w.max(bottles[0].size.l);
    Some(tight(lo, m_lo) && tight(hi, m_hi) && m_hi - m_lo >= width)
}
