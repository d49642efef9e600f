//! Catch every butterfly before the cocoons run out.
//!
//! Butterflies wander at random. One landing on a cocoon opens it and a new
//! butterfly hatches there, so letting cocoons open raises the attainable
//! score while bringing the loss closer.

use rand::Rng;

use crate::engine::{Action, Category, CharEntry, GameSpec, Rules, Status, Step};

pub const CAPTURE: f64 = 2.0;
pub const DELTAS: &[f64] = &[CAPTURE];
pub const TICK_CAP: u32 = 400;
/// Chance that a butterfly tries to move on a given tick.
pub const FLIGHT_CHANCE: f64 = 0.5;

pub struct Butterflies;

pub fn spec() -> GameSpec {
    GameSpec::new("butterflies", Action::MOVES.to_vec(), Box::new(Butterflies))
        .with_chars(&[
            ('w', CharEntry::wall("wall")),
            ('A', CharEntry::new("avatar", Category::Avatar)),
            ('b', CharEntry::new("butterfly", Category::Npc)),
            ('c', CharEntry::new("cocoon", Category::Static)),
        ])
        .with_tick_cap(TICK_CAP, Status::Lose)
}

impl Rules for Butterflies {
    fn step(&self, step: &mut Step<'_>, action: Action) {
        step.move_avatar(action);
        capture_at_avatar(step);

        for id in step.ids_of("butterfly") {
            if !step.rng().gen_bool(FLIGHT_CHANCE) {
                continue;
            }
            let dir = Action::MOVES[step.rng().gen_range(0..4)];
            if !step.move_sprite(id, dir) {
                continue;
            }
            let pos = step.sprite(id).map(|s| s.pos).unwrap_or_default();
            if pos == step.avatar_pos() {
                step.kill(id);
                step.collide("avatar", "butterfly", CAPTURE);
            } else if let Some(cocoon) = step.find_at(pos, "cocoon") {
                step.kill(cocoon);
                step.spawn("butterfly", Category::Npc, pos, false);
            }
        }

        if step.count_kind("cocoon") == 0 {
            step.lose();
        } else if step.count_kind("butterfly") == 0 {
            step.win();
        }
    }
}

fn capture_at_avatar(step: &mut Step<'_>) {
    let at = step.avatar_pos();
    while let Some(b) = step.find_at(at, "butterfly") {
        step.kill(b);
        step.collide("avatar", "butterfly", CAPTURE);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{parse_level, spec as game_spec};

    fn level(text: &str) -> crate::engine::GameState {
        parse_level(text, game_spec("butterflies").unwrap()).unwrap()
    }

    #[test]
    fn capture_scores_two() {
        // Walls pin the far butterfly so it cannot land anywhere interesting.
        let mut s = level("wwwwwww\nwAb.wbw\nwc..www\nwwwwwww");
        s.advance(Action::Right).unwrap();
        assert_eq!(s.score(), 2.0);
        assert_eq!(s.status(), Status::Running);
    }

    #[test]
    fn last_capture_wins() {
        let mut s = level("wwwww\nwAb.w\nwc..w\nwwwww");
        s.advance(Action::Right).unwrap();
        assert_eq!(s.status(), Status::Win);
        assert_eq!(s.score(), 2.0);
    }

    #[test]
    fn opening_the_last_cocoon_loses() {
        // The only butterfly is boxed in next to the only cocoon.
        let s = level("wwwwwww\nwA.wwww\nw..wbcw\nwwwwwww");
        for seed in 0..50 {
            let mut t = s.clone().with_seed(seed);
            while t.status() == Status::Running && t.tick() < 200 {
                t.advance(Action::Nil).unwrap();
            }
            if t.status() == Status::Lose && t.tick() < 200 {
                assert_eq!(t.count_kind("cocoon"), 0);
                assert_eq!(t.count_kind("butterfly"), 2);
                return;
            }
        }
        panic!("butterfly never reached the cocoon");
    }
}
