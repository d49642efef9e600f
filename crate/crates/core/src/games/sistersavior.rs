//! Rescue the three hostages, then shoot the scorpion.
//!
//! Shooting a hostage pays more than rescuing one, but the scorpion only
//! becomes vulnerable once all three hostages have been rescued, so a single
//! shot hostage makes the game unwinnable.

use rand::Rng;

use crate::engine::{Action, Category, CharEntry, GameSpec, Rules, Status, Step};

pub const SHOOT_HOSTAGE: f64 = 2.0;
pub const RESCUE_HOSTAGE: f64 = 1.0;
pub const KILL_SCORPION: f64 = 14.0;
pub const HOSTAGES: i32 = 3;
pub const DELTAS: &[f64] = &[SHOOT_HOSTAGE, RESCUE_HOSTAGE, KILL_SCORPION, 0.0];
pub const TICK_CAP: u32 = 400;
/// The scorpion moves on every n-th tick.
pub const SCORPION_PERIOD: u32 = 3;

pub struct Sistersavior;

pub fn spec() -> GameSpec {
    let mut actions = Action::MOVES.to_vec();
    actions.push(Action::Use);
    GameSpec::new("sistersavior", actions, Box::new(Sistersavior))
        .with_chars(&[
            ('w', CharEntry::wall("wall")),
            ('A', CharEntry::new("avatar", Category::Avatar)),
            ('h', CharEntry::new("hostage", Category::Npc)),
            ('s', CharEntry::new("scorpion", Category::Npc)),
            ('*', CharEntry::new("bullet", Category::Movable)),
        ])
        .with_tick_cap(TICK_CAP, Status::Lose)
}

/// Hostages rescued so far; kept on the avatar.
fn rescued(step: &Step<'_>) -> i32 {
    step.sprite(step.avatar_id()).map_or(0, |a| a.counter)
}

impl Rules for Sistersavior {
    fn step(&self, step: &mut Step<'_>, action: Action) {
        if action == Action::Use {
            // One bullet in flight at a time; it leaves from the avatar's cell.
            if step.count_kind("bullet") == 0 {
                let at = step.avatar_pos();
                let id = step.spawn("bullet", Category::Movable, at, false);
                let heading = step.orientation();
                if let Some(b) = step.sprite_mut(id) {
                    b.heading = heading;
                }
            }
        } else {
            step.move_avatar(action);
        }
        avatar_contacts(step);
        if step.status().is_terminal() {
            return;
        }

        let tick = step.tick();
        let mut ids = step.ids_of("bullet");
        ids.extend(step.ids_of("scorpion"));
        ids.sort_unstable();
        for id in ids {
            let Some(s) = step.sprite(id) else { continue };
            if !s.alive {
                continue;
            }
            if s.kind == "bullet" {
                fly(step, id);
            } else if tick.is_multiple_of(SCORPION_PERIOD) {
                let dir = Action::MOVES[step.rng().gen_range(0..4)];
                step.move_sprite(id, dir);
                let pos = step.sprite(id).map(|s| s.pos).unwrap_or_default();
                if pos == step.avatar_pos() {
                    step.collide("avatar", "scorpion", 0.0);
                    step.lose();
                    return;
                }
                if let Some(bullet) = step.find_at(pos, "bullet") {
                    hit_scorpion(step, bullet, id);
                }
            }
        }
    }
}

fn avatar_contacts(step: &mut Step<'_>) {
    let at = step.avatar_pos();
    while let Some(h) = step.find_at(at, "hostage") {
        step.kill(h);
        step.collide("avatar", "hostage", RESCUE_HOSTAGE);
        let avatar = step.avatar_id();
        if let Some(a) = step.sprite_mut(avatar) {
            a.counter += 1;
        }
    }
    if step.find_at(at, "scorpion").is_some() {
        step.collide("avatar", "scorpion", 0.0);
        step.lose();
    }
}

fn fly(step: &mut Step<'_>, id: u32) {
    let heading = step.sprite(id).map_or(Action::Nil, |s| s.heading);
    if !step.move_sprite(id, heading) {
        step.kill(id);
        return;
    }
    let pos = step.sprite(id).map(|s| s.pos).unwrap_or_default();
    if let Some(h) = step.find_at(pos, "hostage") {
        step.kill(h);
        step.kill(id);
        step.collide("bullet", "hostage", SHOOT_HOSTAGE);
    } else if let Some(sc) = step.find_at(pos, "scorpion") {
        hit_scorpion(step, id, sc);
    }
}

fn hit_scorpion(step: &mut Step<'_>, bullet: u32, scorpion: u32) {
    step.kill(bullet);
    if rescued(step) >= HOSTAGES {
        step.kill(scorpion);
        step.collide("bullet", "scorpion", KILL_SCORPION);
        step.win();
    } else {
        step.collide("bullet", "scorpion", 0.0);
    }
}
