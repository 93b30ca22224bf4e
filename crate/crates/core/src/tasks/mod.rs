//! The eight benchmark tasks: inventories, instructions, success oracles and
//! scripted expert planners.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blockworld::{Color, ObjectTemplate, Scene, SceneError, Shape, SimConfig, Size};
use crate::difficulty::DifficultyInput;

mod expert;
mod oracle;
#[cfg(test)]
mod tests;

pub use expert::{expert_plan, expert_source, PlanInfeasible};
pub use oracle::{oracle_check, oracle_check_with, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    MoveCube,
    BlockStacking,
    PyramidStacking,
    #[serde(rename = "house_building_1")]
    HouseBuilding1,
    #[serde(rename = "house_building_2")]
    HouseBuilding2,
    #[serde(rename = "house_building_3")]
    HouseBuilding3,
    BottleArrangement,
    BinPacking,
}

impl TaskName {
    pub const ALL: [TaskName; 8] = [
        TaskName::MoveCube,
        TaskName::BlockStacking,
        TaskName::PyramidStacking,
        TaskName::HouseBuilding1,
        TaskName::HouseBuilding2,
        TaskName::HouseBuilding3,
        TaskName::BottleArrangement,
        TaskName::BinPacking,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskName::MoveCube => "move_cube",
            TaskName::BlockStacking => "block_stacking",
            TaskName::PyramidStacking => "pyramid_stacking",
            TaskName::HouseBuilding1 => "house_building_1",
            TaskName::HouseBuilding2 => "house_building_2",
            TaskName::HouseBuilding3 => "house_building_3",
            TaskName::BottleArrangement => "bottle_arrangement",
            TaskName::BinPacking => "bin_packing",
        }
    }

    pub fn spec(self) -> TaskSpec {
        TaskSpec::new(self)
    }
}

impl fmt::Display for TaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown task '{0}'; expected one of: move_cube, block_stacking, pyramid_stacking, house_building_1, house_building_2, house_building_3, bottle_arrangement, bin_packing")]
pub struct UnknownTask(pub String);

impl FromStr for TaskName {
    type Err = UnknownTask;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskName::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| UnknownTask(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub name: TaskName,
    pub instruction: &'static str,
    /// Containers (tray, bin) come first so they are placed before the items.
    pub inventory: Vec<ObjectTemplate>,
    pub difficulty_input: DifficultyInput,
}

fn numbered(prefix: &str, n: usize, shape: Shape, color: Color) -> impl Iterator<Item = ObjectTemplate> + '_ {
    (1..=n).map(move |k| ObjectTemplate::new(&format!("{prefix}_{k}"), shape, color))
}

/// Side of the big cube in move_cube.
pub const BIG_CUBE: f64 = 0.05;

impl TaskSpec {
    pub fn new(name: TaskName) -> Self {
        use Color::*;
        use Shape::*;
        let roof = || ObjectTemplate::new("roof", TriangleRoof, Red);
        let (instruction, inventory, (o, c, s)) = match name {
            TaskName::MoveCube => (
                "Move small cube above onto big cube",
                vec![
                    ObjectTemplate::new("cube_small", Cube, Red),
                    ObjectTemplate::new("cube_big", Cube, Blue).with_size(Size::new(BIG_CUBE, BIG_CUBE, BIG_CUBE)),
                ],
                (2, 1, 2),
            ),
            TaskName::BlockStacking => (
                "Stack the given blocks together.",
                numbered("block", 4, Cube, Green).collect(),
                (4, 1, 6),
            ),
            TaskName::PyramidStacking => (
                "Stack the given three blocks into a pyramid shape.",
                numbered("block", 3, Cube, Yellow).collect(),
                (3, 1, 6),
            ),
            TaskName::HouseBuilding1 => (
                "Construct a tall building using the given three blocks and a triangle shape.",
                numbered("block", 3, Cube, Blue).chain([roof()]).collect(),
                (4, 2, 6),
            ),
            TaskName::HouseBuilding2 => (
                "Construct a bungalow using the given two cubes and a triangle shape.",
                numbered("cube", 2, Cube, Blue).chain([roof()]).collect(),
                (3, 2, 4),
            ),
            TaskName::HouseBuilding3 => (
                "Construct a house using the given two cubes  (red), a brick (blue) and a triangle shape.",
                numbered("red_cube", 2, Cube, Red)
                    .chain([ObjectTemplate::new("blue_brick", Brick, Blue), roof()])
                    .collect(),
                (4, 3, 6),
            ),
            TaskName::BottleArrangement => (
                "Arrange the given six bottles neatly on a tray.",
                std::iter::once(ObjectTemplate::new("tray", Tray, Gray))
                    .chain(numbered("bottle", 6, Bottle, Green))
                    .collect(),
                (6, 1, 12),
            ),
            TaskName::BinPacking => (
                "Pick up blocks on the table and place on tray.",
                std::iter::once(ObjectTemplate::new("bin", Bin, Gray))
                    .chain(numbered("block", 8, Cube, Yellow))
                    .collect(),
                (8, 1, 16),
            ),
        };
        TaskSpec { name, instruction, inventory, difficulty_input: DifficultyInput::new(o, c, s) }
    }

    pub fn steps(&self) -> usize {
        self.difficulty_input.s as usize
    }

    pub fn make_scene(&self, seed: u64, cfg: &SimConfig) -> Result<Scene, SceneError> {
        Scene::generate(&self.inventory, seed, cfg)
    }
}

pub fn make_scene(task: TaskName, seed: u64, cfg: &SimConfig) -> Result<Scene, SceneError> {
    task.spec().make_scene(seed, cfg)
}
