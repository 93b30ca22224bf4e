//! Demonstration episodes as MDP transitions, stored in a checksummed binary
//! format (see `docs/format.md`).

use std::f64::consts::PI;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blockworld::{Grid, Observation};
use crate::dsl::{ExecTrace, Skill};

pub const MAGIC: &[u8; 8] = b"RGPTDEMO";
const HEADER_LEN: usize = 16;
pub const VERSION: u16 = 1;
pub const FILE_EXTENSION: &str = "rgd";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("IO: {0}")]
    Io(#[from] io::Error),
    #[error("CORRUPT: {0}")]
    Corrupt(String),
    #[error("VERSION_MISMATCH: file version {found}, expected {VERSION}")]
    VersionMismatch { found: u16 },
    #[error("QUANTIZATION_OOB: action ({x}, {y}) lies outside the {g}x{g} workspace grid")]
    QuantizationOob { x: f64, y: f64, g: usize },
    #[error("invalid episode: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Source {
    Llm,
    Expert,
    Agent,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Llm => "llm",
            Source::Expert => "expert",
            Source::Agent => "agent",
        }
    }

    fn code(self) -> u8 {
        match self {
            Source::Llm => 0,
            Source::Expert => 1,
            Source::Agent => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        [Source::Llm, Source::Expert, Source::Agent].into_iter().find(|s| s.code() == c)
    }
}

/// A discretized action: cell `(i, j)` with `i` along x, rotation index `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridAction {
    pub skill: Skill,
    pub i: u16,
    pub j: u16,
    pub k: u16,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Observation,
    pub action: GridAction,
    pub reward: f32,
    pub next_obs: Observation,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub task: String,
    pub seed: u64,
    pub source: Source,
    pub transitions: Vec<Transition>,
}

/// Resolution of stored observations and actions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreGrid {
    /// Heightmap side G.
    pub g: u16,
    /// In-hand crop side C.
    pub c: u16,
    /// Rotation bins R over [0, pi).
    pub r: u16,
}

impl Default for StoreGrid {
    fn default() -> Self {
        Self { g: 32, c: 12, r: 8 }
    }
}

impl StoreGrid {
    /// Cell containing `(x, y)`; points outside `[0, side)` are rejected.
    pub fn cell(&self, side: f64, x: f64, y: f64) -> Result<(u16, u16), StoreError> {
        let g = self.g as usize;
        let cell = side / g as f64;
        let (fi, fj) = ((x / cell).floor(), (y / cell).floor());
        if !(x.is_finite() && y.is_finite()) || fi < 0.0 || fj < 0.0 || fi >= g as f64 || fj >= g as f64 {
            return Err(StoreError::QuantizationOob { x, y, g });
        }
        Ok((fi as u16, fj as u16))
    }

    /// Nearest rotation bin, wrapping at pi.
    pub fn rotation(&self, theta: f64) -> u16 {
        let r = self.r as f64;
        let k = (theta / (PI / r)).round().rem_euclid(r);
        k as u16 % self.r
    }

    /// World coordinates of a cell center and rotation bin.
    pub fn to_world(&self, side: f64, i: u16, j: u16, k: u16) -> (f64, f64, f64) {
        let cell = side / self.g as f64;
        ((i as f64 + 0.5) * cell, (j as f64 + 0.5) * cell, k as f64 * PI / self.r as f64)
    }

    /// Reduces a simulator observation to this grid by max-pooling.
    pub fn pool(&self, obs: &Observation) -> Result<Observation, StoreError> {
        let pool = |grid: &Grid, want: u16| {
            if want == 0 || !grid.side.is_multiple_of(want as usize) {
                return Err(StoreError::Invalid(format!("cannot pool a {} grid to {want}", grid.side)));
            }
            grid.max_pool(grid.side / want as usize)
                .ok_or_else(|| StoreError::Invalid(format!("cannot pool a {} grid to {want}", grid.side)))
        };
        Ok(Observation { heightmap: pool(&obs.heightmap, self.g)?, inhand: pool(&obs.inhand, self.c)?, gripper: obs.gripper })
    }
}

/// Converts an execution trace into an episode with sparse reward.
pub fn from_trace(
    trace: &ExecTrace,
    success: bool,
    task: &str,
    seed: u64,
    source: Source,
    grid: StoreGrid,
    workspace_side: f64,
) -> Result<Episode, StoreError> {
    if trace.is_empty() {
        return Err(StoreError::Invalid("empty trace".into()));
    }
    let n = trace.len();
    let mut transitions = Vec::with_capacity(n);
    for (t, step) in trace.steps.iter().enumerate() {
        let (i, j) = grid.cell(workspace_side, step.action.x, step.action.y)?;
        let last = t + 1 == n;
        transitions.push(Transition {
            obs: grid.pool(&step.pre)?,
            action: GridAction { skill: step.action.skill, i, j, k: grid.rotation(step.action.theta) },
            reward: if last && success { 1.0 } else { 0.0 },
            next_obs: grid.pool(&step.post)?,
            done: last,
        });
    }
    let ep = Episode { task: task.to_string(), seed, source, transitions };
    validate(&ep, grid)?;
    Ok(ep)
}

/// Checks shapes, index ranges, skill/gripper agreement, the chain property and reward placement.
pub fn validate(ep: &Episode, grid: StoreGrid) -> Result<(), StoreError> {
    let bad = |m: String| Err(StoreError::Invalid(format!("{} seed {}: {m}", ep.task, ep.seed)));
    let n = ep.transitions.len();
    for (t, tr) in ep.transitions.iter().enumerate() {
        for o in [&tr.obs, &tr.next_obs] {
            if o.heightmap.side != grid.g as usize || o.inhand.side != grid.c as usize || o.gripper > 1 {
                return bad(format!("transition {t} has the wrong observation shape"));
            }
        }
        let a = tr.action;
        if a.i >= grid.g || a.j >= grid.g || a.k >= grid.r {
            return bad(format!("transition {t} action out of range"));
        }
        let want = if tr.obs.gripper == 0 { Skill::Pick } else { Skill::Place };
        if a.skill != want {
            return bad(format!("transition {t} skill does not match the gripper state"));
        }
        let expected_skill = if t % 2 == 0 { Skill::Pick } else { Skill::Place };
        if a.skill != expected_skill {
            return bad(format!("transition {t} breaks PICK/PLACE alternation"));
        }
        if t + 1 < n && tr.next_obs != ep.transitions[t + 1].obs {
            return bad(format!("transition {t} next_obs differs from the following obs"));
        }
        let last = t + 1 == n;
        if tr.done != last || (tr.reward != 0.0 && !(last && tr.reward == 1.0)) {
            return bad(format!("transition {t} has an invalid reward/done flag"));
        }
    }
    Ok(())
}

pub fn file_name(task: &str, source: Source) -> String {
    format!("{task}_{}.{FILE_EXTENSION}", source.as_str())
}

fn put_grid(buf: &mut Vec<u8>, g: &Grid) {
    for v in &g.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_obs(buf: &mut Vec<u8>, o: &Observation) {
    put_grid(buf, &o.heightmap);
    put_grid(buf, &o.inhand);
    buf.push(o.gripper);
}

/// The CRC of each episode also covers the file header, so a damaged header
/// fails every checksum.
fn episode_crc(header: &[u8], body: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(header);
    h.update(body);
    h.finalize()
}

fn header(grid: StoreGrid) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    for v in [VERSION, grid.g, grid.c, grid.r] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn encode_episode(ep: &Episode, header: &[u8]) -> Vec<u8> {
    let mut buf = Vec::new();
    let name = ep.task.as_bytes();
    buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
    buf.extend_from_slice(name);
    buf.extend_from_slice(&ep.seed.to_le_bytes());
    buf.push(ep.source.code());
    buf.extend_from_slice(&(ep.transitions.len() as u32).to_le_bytes());
    for tr in &ep.transitions {
        put_obs(&mut buf, &tr.obs);
        buf.push(match tr.action.skill {
            Skill::Pick => 0,
            Skill::Place => 1,
        });
        for v in [tr.action.i, tr.action.j, tr.action.k] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&tr.reward.to_le_bytes());
        put_obs(&mut buf, &tr.next_obs);
        buf.push(u8::from(tr.done));
    }
    let crc = episode_crc(header, &buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

pub fn encode(episodes: &[Episode], grid: StoreGrid) -> Result<Vec<u8>, StoreError> {
    let head = header(grid);
    let mut out = head.clone();
    for ep in episodes {
        validate(ep, grid)?;
        if ep.task.len() > u16::MAX as usize {
            return Err(StoreError::Invalid("task name too long".into()));
        }
        out.extend_from_slice(&encode_episode(ep, &head));
    }
    Ok(out)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| StoreError::Corrupt(format!("unexpected end of data at byte {}", self.pos)))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, StoreError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, StoreError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32, StoreError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn grid(&mut self, side: usize) -> Result<Grid, StoreError> {
        let bytes = self.take(side * side * 4)?;
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        Ok(Grid { side, data })
    }

    fn obs(&mut self, grid: StoreGrid) -> Result<Observation, StoreError> {
        Ok(Observation { heightmap: self.grid(grid.g as usize)?, inhand: self.grid(grid.c as usize)?, gripper: self.u8()? })
    }
}

fn decode_episode(cur: &mut Cursor<'_>, grid: StoreGrid) -> Result<Episode, StoreError> {
    let start = cur.pos;
    let name_len = cur.u16()? as usize;
    let task = String::from_utf8(cur.take(name_len)?.to_vec()).map_err(|_| StoreError::Corrupt("task name is not UTF-8".into()));
    let seed = cur.u64()?;
    let source = Source::from_code(cur.u8()?);
    let n = cur.u32()? as usize;
    let per = 2 * (4 * (grid.g as usize).pow(2) + 4 * (grid.c as usize).pow(2) + 1) + 1 + 6 + 4 + 1;
    if n.checked_mul(per).is_none_or(|b| b > cur.data.len() - cur.pos) {
        return Err(StoreError::Corrupt(format!("episode at byte {start} claims {n} transitions")));
    }
    let mut transitions = Vec::with_capacity(n);
    for _ in 0..n {
        let obs = cur.obs(grid)?;
        let skill = match cur.u8()? {
            0 => Skill::Pick,
            1 => Skill::Place,
            s => return Err(StoreError::Corrupt(format!("bad skill code {s}"))),
        };
        let (i, j, k) = (cur.u16()?, cur.u16()?, cur.u16()?);
        let reward = cur.f32()?;
        let next_obs = cur.obs(grid)?;
        let done = cur.u8()? != 0;
        transitions.push(Transition { obs, action: GridAction { skill, i, j, k }, reward, next_obs, done });
    }
    let body_end = cur.pos;
    let stored = cur.u32()?;
    if episode_crc(&cur.data[..HEADER_LEN], &cur.data[start..body_end]) != stored {
        return Err(StoreError::Corrupt(format!("checksum mismatch in episode at byte {start}")));
    }
    let source = source.ok_or_else(|| StoreError::Corrupt("bad source code".into()))?;
    let ep = Episode { task: task?, seed, source, transitions };
    validate(&ep, grid).map_err(|e| StoreError::Corrupt(e.to_string()))?;
    Ok(ep)
}

pub fn decode(data: &[u8]) -> Result<(StoreGrid, Vec<Episode>), StoreError> {
    let mut cur = Cursor { data, pos: 0 };
    if cur.take(8).ok() != Some(MAGIC.as_slice()) {
        return Err(StoreError::Corrupt("bad magic".into()));
    }
    let version = cur.u16()?;
    if version != VERSION {
        return Err(StoreError::VersionMismatch { found: version });
    }
    let grid = StoreGrid { g: cur.u16()?, c: cur.u16()?, r: cur.u16()? };
    if grid.g == 0 || grid.r == 0 {
        return Err(StoreError::Corrupt("zero-sized grid in header".into()));
    }
    let mut episodes = Vec::new();
    while cur.pos < data.len() {
        episodes.push(decode_episode(&mut cur, grid)?);
    }
    Ok((grid, episodes))
}

pub fn write_file(path: &Path, episodes: &[Episode], grid: StoreGrid) -> Result<(), StoreError> {
    let bytes = encode(episodes, grid)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<(StoreGrid, Vec<Episode>), StoreError> {
    let mut data = Vec::new();
    fs::File::open(path)?.read_to_end(&mut data)?;
    decode(&data)
}

/// Writes one file per (task, source) under `dir`, replacing existing files.
/// Returns the paths written.
pub fn write(episodes: &[Episode], dir: &Path, grid: StoreGrid) -> Result<Vec<PathBuf>, StoreError> {
    fs::create_dir_all(dir)?;
    let mut keys: Vec<(&str, Source)> = episodes.iter().map(|e| (e.task.as_str(), e.source)).collect();
    keys.sort();
    keys.dedup();
    let mut paths = Vec::new();
    for (task, source) in keys {
        let group: Vec<Episode> = episodes.iter().filter(|e| e.task == task && e.source == source).cloned().collect();
        let path = dir.join(file_name(task, source));
        write_file(&path, &group, grid)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Reads every store file in `dir` in file-name order. All files must share one grid.
pub fn read(dir: &Path) -> Result<(Option<StoreGrid>, Vec<Episode>), StoreError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == FILE_EXTENSION))
        .collect();
    files.sort();
    let mut grid = None;
    let mut all = Vec::new();
    for f in files {
        let (g, eps) = read_file(&f)?;
        if grid.is_some_and(|prev| prev != g) {
            return Err(StoreError::Invalid(format!("{} uses a different grid", f.display())));
        }
        grid = Some(g);
        all.extend(eps);
    }
    Ok((grid, all))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockworld::SimConfig;
    use crate::dsl::{execute, ApiSurface, ExecConfig, RobotAction};
    use crate::tasks::{expert_plan, make_scene, oracle_check, TaskName};
    use proptest::prelude::*;

    fn expert_episode(task: TaskName, seed: u64) -> Episode {
        let cfg = SimConfig::default();
        let scene = make_scene(task, seed, &cfg).unwrap();
        let out = execute(&expert_plan(task, &scene).unwrap(), &scene, ApiSurface::Actor, &ExecConfig::default()).unwrap();
        let ok = oracle_check(task, &out.scene);
        from_trace(&out.trace, ok, task.as_str(), seed, Source::Expert, StoreGrid::default(), cfg.side).unwrap()
    }

    #[test]
    fn successful_move_cube_rewards() {
        let ep = expert_episode(TaskName::MoveCube, 1);
        let r: Vec<f32> = ep.transitions.iter().map(|t| t.reward).collect();
        assert_eq!(r, vec![0.0, 1.0]);
        assert_eq!(ep.transitions.iter().map(|t| t.done).collect::<Vec<_>>(), vec![false, true]);
        assert_eq!(ep.transitions[0].obs.heightmap.side, 32);
        assert_eq!(ep.transitions[0].next_obs.inhand.side, 12);
    }

    #[test]
    fn failed_trace_has_no_reward() {
        let cfg = SimConfig::default();
        let scene = make_scene(TaskName::MoveCube, 1, &cfg).unwrap();
        let out = execute(&expert_plan(TaskName::MoveCube, &scene).unwrap(), &scene, ApiSurface::Actor, &ExecConfig::default())
            .unwrap();
        let ep = from_trace(&out.trace, false, "move_cube", 1, Source::Llm, StoreGrid::default(), cfg.side).unwrap();
        assert!(ep.transitions.iter().all(|t| t.reward == 0.0));
    }

    #[test]
    fn edge_action_is_out_of_bounds() {
        let g = StoreGrid::default();
        assert!(matches!(g.cell(0.4, 0.4, 0.1), Err(StoreError::QuantizationOob { .. })));
        assert!(matches!(g.cell(0.4, -1e-9, 0.1), Err(StoreError::QuantizationOob { .. })));
        assert_eq!(g.cell(0.4, 0.3999, 0.0).unwrap(), (31, 0));

        let cfg = SimConfig::default();
        let scene = make_scene(TaskName::MoveCube, 1, &cfg).unwrap();
        let out = execute(&expert_plan(TaskName::MoveCube, &scene).unwrap(), &scene, ApiSurface::Actor, &ExecConfig::default())
            .unwrap();
        let mut trace = out.trace.clone();
        trace.steps[1].action = RobotAction { x: 0.4, ..trace.steps[1].action };
        let err = from_trace(&trace, true, "move_cube", 1, Source::Llm, StoreGrid::default(), cfg.side).unwrap_err();
        assert!(matches!(err, StoreError::QuantizationOob { .. }));
    }

    #[test]
    fn rotation_bins_wrap() {
        let g = StoreGrid::default();
        assert_eq!(g.rotation(0.0), 0);
        assert_eq!(g.rotation(PI / 8.0), 1);
        assert_eq!(g.rotation(PI - 0.01), 0);
        assert_eq!(g.rotation(3.0 * PI / 8.0 - 0.05), 3);
        let (x, y, t) = g.to_world(0.4, 0, 31, 4);
        assert!((x - 0.00625).abs() < 1e-12 && (y - 0.39375).abs() < 1e-12 && (t - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_trace_rejected() {
        let r = from_trace(&ExecTrace::default(), true, "t", 0, Source::Llm, StoreGrid::default(), 0.4);
        assert!(r.is_err());
    }

    #[test]
    fn round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut eps = vec![expert_episode(TaskName::MoveCube, 0), expert_episode(TaskName::MoveCube, 1)];
        eps.push(expert_episode(TaskName::HouseBuilding1, 2));
        // a value whose bits must survive unchanged
        eps[0].transitions[0].obs.heightmap.data[5] = f32::from_bits(0x3d4c_cccd);
        eps[0].transitions[0].obs.heightmap.data[6] = f32::MIN_POSITIVE;
        let paths = write(&eps, dir.path(), StoreGrid::default()).unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths[1].ends_with("move_cube_expert.rgd"));
        let (grid, back) = read(dir.path()).unwrap();
        assert_eq!(grid, Some(StoreGrid::default()));
        // file order: house_building_1 first
        assert_eq!(back[0], eps[2]);
        assert_eq!(back[1..], eps[..2]);
        let bits = |e: &Episode| e.transitions[0].obs.heightmap.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back[1]), bits(&eps[0]));
    }

    #[test]
    fn flipped_byte_is_corrupt() {
        let eps = vec![expert_episode(TaskName::MoveCube, 3)];
        let bytes = encode(&eps, StoreGrid::default()).unwrap();
        for pos in [20usize, 40, bytes.len() / 2, bytes.len() - 10, bytes.len() - 1] {
            let mut bad = bytes.clone();
            bad[pos] ^= 0x10;
            assert!(matches!(decode(&bad), Err(StoreError::Corrupt(_))), "byte {pos}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(StoreError::Corrupt(_))));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(decode(&bad), Err(StoreError::VersionMismatch { found: 9 })));
        assert!(matches!(decode(&bytes[..bytes.len() - 3]), Err(StoreError::Corrupt(_))));
    }

    #[test]
    fn empty_store() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write(&[], dir.path(), StoreGrid::default()).unwrap().is_empty());
        assert_eq!(read(dir.path()).unwrap(), (None, vec![]));
        let path = dir.path().join("x.rgd");
        write_file(&path, &[], StoreGrid::default()).unwrap();
        assert_eq!(read_file(&path).unwrap(), (StoreGrid::default(), vec![]));
    }

    #[test]
    fn chain_break_rejected() {
        let mut ep = expert_episode(TaskName::BlockStacking, 0);
        ep.transitions[1].next_obs.heightmap.data[0] += 1.0;
        assert!(validate(&ep, StoreGrid::default()).is_err());
        let mut ep = expert_episode(TaskName::BlockStacking, 0);
        ep.transitions.swap(0, 1);
        assert!(validate(&ep, StoreGrid::default()).is_err());
        // a handcrafted file carrying a broken chain with a valid checksum
        let mut ep = expert_episode(TaskName::BlockStacking, 0);
        ep.transitions[2].obs.gripper = 1;
        let mut bytes = encode(&[], StoreGrid::default()).unwrap();
        bytes.extend_from_slice(&encode_episode(&ep, &header(StoreGrid::default())));
        assert!(matches!(decode(&bytes), Err(StoreError::Corrupt(_))));
    }

    #[test]
    fn chain_holds_for_every_task() {
        for t in TaskName::ALL {
            let ep = expert_episode(t, 9);
            assert_eq!(ep.transitions.len(), t.spec().steps());
            assert_eq!(ep.transitions.last().unwrap().reward, 1.0);
        }
    }

    fn arb_obs(g: usize, c: usize, gripper: u8) -> impl Strategy<Value = Observation> {
        (prop::collection::vec(any::<f32>(), g * g), prop::collection::vec(any::<f32>(), c * c)).prop_map(
            move |(h, i)| Observation { heightmap: Grid { side: g, data: h }, inhand: Grid { side: c, data: i }, gripper },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn arbitrary_bits_round_trip(
            a in arb_obs(4, 2, 0), b in arb_obs(4, 2, 1), c in arb_obs(4, 2, 0),
            seed in any::<u64>(), i in 0u16..4, j in 0u16..4, k in 0u16..3, success in any::<bool>(),
        ) {
            let grid = StoreGrid { g: 4, c: 2, r: 3 };
            let pick = GridAction { skill: Skill::Pick, i, j, k };
            let place = GridAction { skill: Skill::Place, i: j, j: i, k };
            let ep = Episode {
                task: "t".into(), seed, source: Source::Agent,
                transitions: vec![
                    Transition { obs: a, action: pick, reward: 0.0, next_obs: b.clone(), done: false },
                    Transition { obs: b, action: place, reward: if success { 1.0 } else { 0.0 }, next_obs: c, done: true },
                ],
            };
            let bytes = encode(std::slice::from_ref(&ep), grid).unwrap();
            let (g2, back) = decode(&bytes).unwrap();
            prop_assert_eq!(g2, grid);
            prop_assert_eq!(encode(&back, grid).unwrap(), bytes);
        }
    }
}
