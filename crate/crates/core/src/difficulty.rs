//! Task difficulty: `score = o + o*c + s` with three bands.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Object count, category count and step count of a task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DifficultyInput {
    pub o: i64,
    pub c: i64,
    pub s: i64,
}

impl DifficultyInput {
    pub const fn new(o: i64, c: i64, s: i64) -> Self {
        Self { o, c, s }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Band {
    Easy,
    Medium,
    Hard,
}

impl Band {
    pub fn from_score(score: i64) -> Band {
        match score {
            s if s <= 10 => Band::Easy,
            s if s <= 20 => Band::Medium,
            _ => Band::Hard,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Band::Easy => 'E',
            Band::Medium => 'M',
            Band::Hard => 'H',
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Band::Easy => "EASY",
            Band::Medium => "MEDIUM",
            Band::Hard => "HARD",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifficultyScore {
    pub score: i64,
    pub band: Band,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DifficultyError {
    #[error("NEGATIVE_INPUT: o, c and s must be non-negative (got o={o}, c={c}, s={s})")]
    NegativeInput { o: i64, c: i64, s: i64 },
}

pub fn score(input: DifficultyInput) -> Result<DifficultyScore, DifficultyError> {
    let DifficultyInput { o, c, s } = input;
    if o < 0 || c < 0 || s < 0 {
        return Err(DifficultyError::NegativeInput { o, c, s });
    }
    let score = o + o * c + s;
    Ok(DifficultyScore { score, band: Band::from_score(score) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn move_cube_row() {
        assert_eq!(score(DifficultyInput::new(2, 1, 2)).unwrap(), DifficultyScore { score: 6, band: Band::Easy });
    }

    #[test]
    fn zero_is_easy() {
        assert_eq!(score(DifficultyInput::new(0, 0, 0)).unwrap(), DifficultyScore { score: 0, band: Band::Easy });
    }

    #[test]
    fn house_building_3_row() {
        // 4 + 4*3 + 6
        assert_eq!(score(DifficultyInput::new(4, 3, 6)).unwrap(), DifficultyScore { score: 22, band: Band::Hard });
    }

    #[test]
    fn band_edges() {
        assert_eq!(Band::from_score(10), Band::Easy);
        assert_eq!(Band::from_score(11), Band::Medium);
        assert_eq!(Band::from_score(20), Band::Medium);
        assert_eq!(Band::from_score(21), Band::Hard);
    }

    #[test]
    fn negative_input() {
        assert!(matches!(score(DifficultyInput::new(-1, 0, 0)), Err(DifficultyError::NegativeInput { .. })));
        assert!(matches!(score(DifficultyInput::new(0, 0, -3)), Err(DifficultyError::NegativeInput { .. })));
    }

    proptest! {
        #[test]
        fn monotone(o in 0i64..50, c in 0i64..50, s in 0i64..50, d in 0i64..5) {
            let base = score(DifficultyInput::new(o, c, s)).unwrap();
            for bumped in [DifficultyInput::new(o + d, c, s), DifficultyInput::new(o, c + d, s), DifficultyInput::new(o, c, s + d)] {
                let b = score(bumped).unwrap();
                prop_assert!(b.score >= base.score);
                prop_assert!(b.band >= base.band);
            }
        }
    }
}
