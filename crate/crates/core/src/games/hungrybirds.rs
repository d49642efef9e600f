//! Leave the maze before starving.
//!
//! The bird's hunger grows every tick. Food resets it and scores a point;
//! reaching the exit wins with a bonus.

use crate::engine::{Action, Category, CharEntry, GameSpec, Rules, Status, Step};

pub const FOOD: f64 = 1.0;
pub const EXIT_BONUS: f64 = 10.0;
pub const DELTAS: &[f64] = &[FOOD, EXIT_BONUS];
/// Ticks a bird survives without eating.
pub const STARVATION: i32 = 30;
pub const TICK_CAP: u32 = 300;

pub struct HungryBirds;

pub fn spec() -> GameSpec {
    GameSpec::new("hungrybirds", Action::MOVES.to_vec(), Box::new(HungryBirds))
        .with_chars(&[
            ('w', CharEntry::wall("wall")),
            ('A', CharEntry::new("avatar", Category::Avatar)),
            ('f', CharEntry::new("food", Category::Resource)),
            ('E', CharEntry::new("exit", Category::Portal)),
        ])
        .with_tick_cap(TICK_CAP, Status::Lose)
}

/// Ticks left before the bird starves.
pub fn hunger_left(state: &crate::engine::GameState) -> i32 {
    STARVATION - state.avatar().counter
}

impl Rules for HungryBirds {
    fn step(&self, step: &mut Step<'_>, action: Action) {
        step.move_avatar(action);
        let avatar = step.avatar_id();
        if let Some(a) = step.sprite_mut(avatar) {
            a.counter += 1;
        }

        let at = step.avatar_pos();
        if let Some(food) = step.find_at(at, "food") {
            step.kill(food);
            step.collide("avatar", "food", FOOD);
            if let Some(a) = step.sprite_mut(avatar) {
                a.counter = 0;
            }
        }
        if step.find_at(at, "exit").is_some() {
            step.collide("avatar", "exit", EXIT_BONUS);
            step.win();
            return;
        }
        if step.sprite(avatar).is_some_and(|a| a.counter >= STARVATION) {
            step.lose();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::GameState;
    use crate::games::{parse_level, spec as game_spec};

    fn level(text: &str) -> GameState {
        parse_level(text, game_spec("hungrybirds").unwrap()).unwrap()
    }

    #[test]
    fn exit_wins_with_bonus() {
        let mut s = level("wwwww\nwA.Ew\nwwwww");
        s.advance(Action::Right).unwrap();
        s.advance(Action::Right).unwrap();
        assert_eq!(s.status(), Status::Win);
        assert_eq!(s.score(), EXIT_BONUS);
    }

    #[test]
    fn starving_loses() {
        let mut s = level("wwwww\nwA.Ew\nwwwww");
        for _ in 0..STARVATION - 1 {
            s.advance(Action::Nil).unwrap();
        }
        assert_eq!(hunger_left(&s), 1);
        assert_eq!(s.status(), Status::Running);
        s.advance(Action::Nil).unwrap();
        assert_eq!(s.status(), Status::Lose);
    }

    #[test]
    fn eating_on_the_last_tick_saves_the_bird() {
        let mut s = level("wwwwww\nwAf.Ew\nwwwwww");
        for _ in 0..STARVATION - 1 {
            s.advance(Action::Left).unwrap();
        }
        assert_eq!(hunger_left(&s), 1);
        s.advance(Action::Right).unwrap();
        assert_eq!(s.status(), Status::Running);
        assert_eq!(hunger_left(&s), STARVATION);
        assert_eq!(s.score(), FOOD);
    }
}
