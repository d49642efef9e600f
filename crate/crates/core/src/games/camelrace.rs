//! Race a rival camel to the finish.
//!
//! The rival trots along its own lane and advances with a fixed probability
//! each tick. The avatar wins by touching the finish portal first; the only
//! point is awarded on arrival.

use rand::Rng;

use crate::engine::{Action, Category, CharEntry, GameSpec, Rules, Status, Step};

pub const FINISH: f64 = 1.0;
pub const DELTAS: &[f64] = &[FINISH];
pub const TICK_CAP: u32 = 200;
pub const RIVAL_PACE: f64 = 0.55;

pub struct CamelRace;

pub fn spec() -> GameSpec {
    GameSpec::new("camelrace", Action::MOVES.to_vec(), Box::new(CamelRace))
        .with_chars(&[
            ('w', CharEntry::wall("wall")),
            ('A', CharEntry::new("avatar", Category::Avatar)),
            ('c', CharEntry::new("rival", Category::Npc)),
            ('F', CharEntry::new("finish", Category::Portal)),
        ])
        .with_tick_cap(TICK_CAP, Status::Lose)
}

impl Rules for CamelRace {
    fn step(&self, step: &mut Step<'_>, action: Action) {
        step.move_avatar(action);
        if step.find_at(step.avatar_pos(), "finish").is_some() {
            step.collide("avatar", "finish", FINISH);
            step.win();
            return;
        }

        let finish_x = step
            .ids_of("finish")
            .iter()
            .filter_map(|&id| step.sprite(id))
            .map(|s| s.pos.x)
            .max()
            .unwrap_or(i32::MAX);
        for id in step.ids_of("rival") {
            if step.rng().gen_bool(RIVAL_PACE) {
                step.move_sprite(id, Action::Right);
            }
            if step.sprite(id).is_some_and(|s| s.pos.x >= finish_x) {
                step.lose();
            }
        }
    }
}
