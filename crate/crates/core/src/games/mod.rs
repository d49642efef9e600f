//! Concrete rule sets and their shipped levels.
//!
//! Four deceptive games (butterflies, invest, lemmings, sistersavior), a
//! straight-track race (camelrace) and a hunger maze (hungrybirds). Levels are
//! ASCII grids embedded from `levels/<game>_lvl<k>.txt`.

use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::engine::{Action, Category, GameSpec, GameState, Pos, Sprite};

pub mod butterflies;
pub mod camelrace;
pub mod hungrybirds;
pub mod invest;
pub mod lemmings;
pub mod sistersavior;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("malformed level: {0}")]
    MalformedLevel(String),
    #[error("unknown game '{0}'")]
    UnknownGame(String),
    #[error("game '{game}' has no level {level}")]
    UnknownLevel { game: String, level: usize },
}

/// Names of every shipped game, in registry order.
pub const GAMES: [&str; 6] = [
    "butterflies",
    "camelrace",
    "hungrybirds",
    "invest",
    "lemmings",
    "sistersavior",
];

macro_rules! levels {
    ($($name:literal),* $(,)?) => {
        [$(include_str!(concat!("../../levels/", $name))),*]
    };
}

const BUTTERFLIES_LEVELS: [&str; 3] = levels!(
    "butterflies_lvl0.txt",
    "butterflies_lvl1.txt",
    "butterflies_lvl2.txt"
);
const CAMELRACE_LEVELS: [&str; 5] = levels!(
    "camelrace_lvl0.txt",
    "camelrace_lvl1.txt",
    "camelrace_lvl2.txt",
    "camelrace_lvl3.txt",
    "camelrace_lvl4.txt",
);
const HUNGRYBIRDS_LEVELS: [&str; 3] = levels!(
    "hungrybirds_lvl0.txt",
    "hungrybirds_lvl1.txt",
    "hungrybirds_lvl2.txt"
);
const INVEST_LEVELS: [&str; 3] = levels!("invest_lvl0.txt", "invest_lvl1.txt", "invest_lvl2.txt");
const LEMMINGS_LEVELS: [&str; 5] = levels!(
    "lemmings_lvl0.txt",
    "lemmings_lvl1.txt",
    "lemmings_lvl2.txt",
    "lemmings_lvl3.txt",
    "lemmings_lvl4.txt",
);
const SISTERSAVIOR_LEVELS: [&str; 3] = levels!(
    "sistersavior_lvl0.txt",
    "sistersavior_lvl1.txt",
    "sistersavior_lvl2.txt"
);

/// Shared, lazily built spec for a game; states of one game share the same `Arc`.
pub fn spec(name: &str) -> Result<Arc<GameSpec>, GameError> {
    static SPECS: [OnceLock<Arc<GameSpec>>; 6] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    let idx = game_index(name)?;
    let spec = SPECS[idx].get_or_init(|| {
        Arc::new(match GAMES[idx] {
            "butterflies" => butterflies::spec(),
            "camelrace" => camelrace::spec(),
            "hungrybirds" => hungrybirds::spec(),
            "invest" => invest::spec(),
            "lemmings" => lemmings::spec(),
            _ => sistersavior::spec(),
        })
    });
    Ok(Arc::clone(spec))
}

fn game_index(name: &str) -> Result<usize, GameError> {
    GAMES
        .iter()
        .position(|g| g.eq_ignore_ascii_case(name))
        .ok_or_else(|| GameError::UnknownGame(name.to_string()))
}

pub fn levels(name: &str) -> Result<&'static [&'static str], GameError> {
    Ok(match GAMES[game_index(name)?] {
        "butterflies" => &BUTTERFLIES_LEVELS,
        "camelrace" => &CAMELRACE_LEVELS,
        "hungrybirds" => &HUNGRYBIRDS_LEVELS,
        "invest" => &INVEST_LEVELS,
        "lemmings" => &LEMMINGS_LEVELS,
        _ => &SISTERSAVIOR_LEVELS,
    })
}

pub fn level_count(name: &str) -> Result<usize, GameError> {
    levels(name).map(|l| l.len())
}

/// Initial state of a shipped level with the given random seed.
pub fn load(name: &str, level: usize, seed: u64) -> Result<GameState, GameError> {
    let text = levels(name)?
        .get(level)
        .ok_or_else(|| GameError::UnknownLevel {
            game: name.to_string(),
            level,
        })?;
    Ok(parse_level(text, spec(name)?)?.with_seed(seed))
}

/// Parses an ASCII grid into a tick-0 state (seed 0; see [`GameState::with_seed`]).
///
/// `'.'` and `' '` are floor; every other character must be in the game's
/// char map, and exactly one must map to the avatar category.
pub fn parse_level(text: &str, spec: Arc<GameSpec>) -> Result<GameState, GameError> {
    let rows: Vec<&str> = text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.is_empty())
        .collect();
    if rows.is_empty() {
        return Err(GameError::MalformedLevel("empty level".into()));
    }
    let width = rows[0].chars().count();
    let mut avatar: Option<Sprite> = None;
    let mut others = Vec::new();
    for (y, row) in rows.iter().enumerate() {
        if row.chars().count() != width {
            return Err(GameError::MalformedLevel(format!(
                "row {y} has {} cells, expected {width}",
                row.chars().count()
            )));
        }
        for (x, c) in row.chars().enumerate() {
            if c == '.' || c == ' ' {
                continue;
            }
            let entry = spec.entry(c).ok_or_else(|| {
                GameError::MalformedLevel(format!("unknown character '{c}' at ({x},{y})"))
            })?;
            let sprite = Sprite {
                id: 0,
                kind: entry.kind,
                category: entry.category,
                pos: Pos::new(x as i32, y as i32),
                alive: true,
                solid: entry.solid,
                heading: Action::Nil,
                counter: 0,
            };
            if entry.category == Category::Avatar {
                if avatar.is_some() {
                    return Err(GameError::MalformedLevel("more than one avatar".into()));
                }
                avatar = Some(sprite);
            } else {
                others.push(sprite);
            }
        }
    }
    let avatar = avatar.ok_or_else(|| GameError::MalformedLevel("no avatar".into()))?;
    let mut sprites = Vec::with_capacity(others.len() + 1);
    sprites.push(avatar);
    sprites.extend(others);
    Ok(GameState::new(
        spec,
        width as i32,
        rows.len() as i32,
        sprites,
        0,
    ))
}

/// Score changes that a game can ever produce, per event.
pub fn delta_set(name: &str) -> Result<&'static [f64], GameError> {
    Ok(match GAMES[game_index(name)?] {
        "butterflies" => butterflies::DELTAS,
        "camelrace" => camelrace::DELTAS,
        "hungrybirds" => hungrybirds::DELTAS,
        "invest" => invest::DELTAS,
        "lemmings" => lemmings::DELTAS,
        _ => sistersavior::DELTAS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{CharEntry, Rules, Step};

    struct Idle;
    impl Rules for Idle {
        fn step(&self, _: &mut Step<'_>, _: Action) {}
    }

    fn walls_spec() -> Arc<GameSpec> {
        Arc::new(
            GameSpec::new("walls", Action::MOVES.to_vec(), Box::new(Idle)).with_chars(&[
                ('w', CharEntry::wall("wall")),
                ('A', CharEntry::new("avatar", Category::Avatar)),
            ]),
        )
    }

    #[test]
    fn walls_around_centered_avatar() {
        let s = parse_level("www\nwAw\nwww\n", walls_spec()).unwrap();
        assert_eq!(s.dims(), (3, 3));
        assert_eq!(s.count_kind("wall"), 8);
        assert_eq!(s.avatar_pos(), Pos::new(1, 1));
        assert_eq!(s.tick(), 0);
        assert_eq!(s.score(), 0.0);
    }

    #[test]
    fn malformed_levels_are_rejected() {
        let spec = walls_spec();
        assert!(matches!(
            parse_level("www\nw.w\nwww", spec.clone()),
            Err(GameError::MalformedLevel(_))
        ));
        assert!(matches!(
            parse_level("www\nwAww\nwww", spec.clone()),
            Err(GameError::MalformedLevel(_))
        ));
        assert!(matches!(
            parse_level("wAw\nwAw", spec.clone()),
            Err(GameError::MalformedLevel(_))
        ));
        assert!(matches!(
            parse_level("wAw\nwZw", spec),
            Err(GameError::MalformedLevel(_))
        ));
    }

    #[test]
    fn every_shipped_level_parses_with_its_char_map() {
        for game in GAMES {
            let n = level_count(game).unwrap();
            assert!(n >= 3, "{game} ships {n} levels");
            for k in 0..n {
                let s = load(game, k, 0).unwrap_or_else(|e| panic!("{game} {k}: {e}"));
                let (w, h) = s.dims();
                assert!(s.sprites().iter().all(|sp| sp.pos.x < w && sp.pos.y < h));
            }
        }
    }

    #[test]
    fn specs_are_shared() {
        let a = load("invest", 0, 1).unwrap();
        let b = load("invest", 1, 2).unwrap();
        assert!(Arc::ptr_eq(a.spec(), b.spec()));
        assert!(matches!(
            load("pacman", 0, 0),
            Err(GameError::UnknownGame(_))
        ));
        assert!(matches!(
            load("invest", 9, 0),
            Err(GameError::UnknownLevel { .. })
        ));
    }
}
