//! Dig a way through so the lemmings reach the exit.
//!
//! Lemmings leave the door at a fixed interval and walk along their row
//! towards the exit, stopping at anything solid. The avatar removes the dirt
//! cell it faces with USE at a cost of one point per cell.

use crate::engine::{Action, Category, CharEntry, GameSpec, Pos, Rules, Status, Step};

pub const DIG: f64 = -1.0;
pub const LEMMING_SAVED: f64 = 2.0;
pub const LEMMING_TRAPPED: f64 = -2.0;
pub const AVATAR_TRAPPED: f64 = -5.0;
pub const DELTAS: &[f64] = &[LEMMING_SAVED, DIG, LEMMING_TRAPPED, AVATAR_TRAPPED];

pub const TICK_CAP: u32 = 300;
/// A lemming leaves the door every this many ticks.
pub const SPAWN_INTERVAL: u32 = 10;
pub const LEMMINGS_PER_LEVEL: i32 = 3;
/// Lemmings step on every other tick.
pub const WALK_PERIOD: u32 = 2;

pub struct Lemmings;

pub fn spec() -> GameSpec {
    let mut actions = Action::MOVES.to_vec();
    actions.push(Action::Use);
    GameSpec::new("lemmings", actions, Box::new(Lemmings))
        .with_chars(&[
            ('w', CharEntry::wall("wall")),
            ('d', CharEntry::solid("dirt", Category::Static)),
            ('A', CharEntry::new("avatar", Category::Avatar)),
            ('D', CharEntry::new("door", Category::Portal)),
            ('E', CharEntry::new("exit", Category::Portal)),
            ('t', CharEntry::new("trap", Category::Static)),
            ('l', CharEntry::new("lemming", Category::Npc)),
        ])
        .with_tick_cap(TICK_CAP, Status::Lose)
}

impl Rules for Lemmings {
    fn step(&self, step: &mut Step<'_>, action: Action) {
        if action == Action::Use {
            let facing = step.avatar_pos().step(step.orientation());
            if let Some(dirt) = step.find_at(facing, "dirt") {
                step.kill(dirt);
                step.collide("avatar", "dirt", DIG);
            }
        } else {
            step.move_avatar(action);
        }
        if step.find_at(step.avatar_pos(), "trap").is_some() {
            step.collide("avatar", "trap", AVATAR_TRAPPED);
            step.lose();
            return;
        }

        let exit = step
            .ids_of("exit")
            .first()
            .and_then(|&id| step.sprite(id))
            .map(|s| s.pos);
        if step.tick().is_multiple_of(WALK_PERIOD) {
            if let Some(exit) = exit {
                for id in step.ids_of("lemming") {
                    walk(step, id, exit);
                }
            }
        }

        // Doors count the lemmings they have released.
        let next_tick = step.tick() + 1;
        for door in step.ids_of("door") {
            let released = step.sprite(door).map_or(0, |s| s.counter);
            if released < LEMMINGS_PER_LEVEL && next_tick % SPAWN_INTERVAL == 1 {
                let pos = step.sprite(door).map(|s| s.pos).unwrap_or_default();
                step.spawn("lemming", Category::Npc, pos, false);
                if let Some(d) = step.sprite_mut(door) {
                    d.counter += 1;
                }
            }
        }

        let all_released = step.ids_of("door").iter().all(|&d| {
            step.sprite(d)
                .is_none_or(|s| s.counter >= LEMMINGS_PER_LEVEL)
        });
        if all_released && step.count_kind("lemming") == 0 {
            step.win();
        }
    }
}

fn walk(step: &mut Step<'_>, id: u32, exit: Pos) {
    let Some(pos) = step.sprite(id).map(|s| s.pos) else {
        return;
    };
    let dir = match exit.x.cmp(&pos.x) {
        std::cmp::Ordering::Greater => Action::Right,
        std::cmp::Ordering::Less => Action::Left,
        std::cmp::Ordering::Equal => match exit.y.cmp(&pos.y) {
            std::cmp::Ordering::Greater => Action::Down,
            std::cmp::Ordering::Less => Action::Up,
            std::cmp::Ordering::Equal => Action::Nil,
        },
    };
    if dir != Action::Nil {
        step.move_sprite(id, dir);
    }
    let pos = step.sprite(id).map(|s| s.pos).unwrap_or(pos);
    if pos == exit {
        step.kill(id);
        step.reward("lemming", LEMMING_SAVED);
    } else if step.find_at(pos, "trap").is_some() {
        step.kill(id);
        step.reward("lemming", LEMMING_TRAPPED);
    }
}
