//! Collect coins and invest them; going into debt loses.
//!
//! Touching an investor charges its price at once. The investor then closes
//! for a fixed number of ticks and pays back a larger sum when it reopens.
//! Surviving to the tick cap is a win.

use crate::engine::{Action, Category, CharEntry, GameSpec, Kind, Rules, Status, Step};

pub const COIN: f64 = 1.0;
pub const TICK_CAP: u32 = 250;

/// Price, payout and delay of one investor colour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Investor {
    pub kind: Kind,
    pub closed_kind: Kind,
    pub cost: f64,
    pub payout: f64,
    pub delay: i32,
}

pub const INVESTORS: [Investor; 3] = [
    Investor {
        kind: "green",
        closed_kind: "green_closed",
        cost: 3.0,
        payout: 5.0,
        delay: 30,
    },
    Investor {
        kind: "red",
        closed_kind: "red_closed",
        cost: 7.0,
        payout: 15.0,
        delay: 60,
    },
    Investor {
        kind: "blue",
        closed_kind: "blue_closed",
        cost: 5.0,
        payout: 10.0,
        delay: 90,
    },
];

pub const DELTAS: &[f64] = &[COIN, -3.0, 5.0, -7.0, 15.0, -5.0, 10.0];

pub struct Invest;

pub fn spec() -> GameSpec {
    GameSpec::new("invest", Action::MOVES.to_vec(), Box::new(Invest))
        .with_chars(&[
            ('w', CharEntry::wall("wall")),
            ('A', CharEntry::new("avatar", Category::Avatar)),
            ('o', CharEntry::new("coin", Category::Resource)),
            ('G', CharEntry::new("green", Category::Npc)),
            ('R', CharEntry::new("red", Category::Npc)),
            ('B', CharEntry::new("blue", Category::Npc)),
            ('g', CharEntry::new("green_closed", Category::Static)),
            ('r', CharEntry::new("red_closed", Category::Static)),
            ('b', CharEntry::new("blue_closed", Category::Static)),
        ])
        .with_tick_cap(TICK_CAP, Status::Win)
}

fn investor(kind: Kind) -> Option<&'static Investor> {
    INVESTORS.iter().find(|i| i.kind == kind)
}

fn closed_investor(kind: Kind) -> Option<&'static Investor> {
    INVESTORS.iter().find(|i| i.closed_kind == kind)
}

impl Rules for Invest {
    fn step(&self, step: &mut Step<'_>, action: Action) {
        // Investors closed during this tick start counting down next tick.
        let avatar = step.avatar_id();
        let timed: Vec<u32> = step
            .state()
            .sprites()
            .iter()
            .filter(|s| s.alive && s.counter > 0 && s.id != avatar)
            .map(|s| s.id)
            .collect();

        step.move_avatar(action);

        let at = step.avatar_pos();
        for id in step.ids_at(at) {
            let Some(kind) = step.sprite(id).map(|s| s.kind) else {
                continue;
            };
            if kind == "coin" {
                step.kill(id);
                step.collide("avatar", "coin", COIN);
            } else if let Some(inv) = investor(kind) {
                transform(step, id, inv.closed_kind, inv.delay);
                step.collide("avatar", inv.kind, -inv.cost);
            }
        }

        for id in timed {
            let Some(s) = step.sprite_mut(id) else {
                continue;
            };
            s.counter -= 1;
            if s.counter > 0 {
                continue;
            }
            if let Some(inv) = closed_investor(s.kind) {
                reopen(step, id, inv.kind);
                step.reward(inv.kind, inv.payout);
            }
        }

        if step.state().score() < 0.0 {
            step.lose();
        }
    }
}

fn transform(step: &mut Step<'_>, id: u32, kind: Kind, timer: i32) {
    if let Some(s) = step.sprite_mut(id) {
        s.kind = kind;
        s.category = Category::Static;
        s.counter = timer;
    }
}

fn reopen(step: &mut Step<'_>, id: u32, kind: Kind) {
    if let Some(s) = step.sprite_mut(id) {
        s.kind = kind;
        s.category = Category::Npc;
        s.counter = 0;
    }
    step.announce_spawn(kind);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::GameState;
    use crate::games::{parse_level, spec as game_spec};

    fn level(text: &str) -> GameState {
        parse_level(text, game_spec("invest").unwrap()).unwrap()
    }

    /// Walks right along a corridor of coins into the investor at the end.
    fn corridor(coins: usize, investor: char) -> GameState {
        let mut row = String::from("wA");
        row.extend(std::iter::repeat_n('o', coins));
        row.push(investor);
        row.push('w');
        let wall = "w".repeat(row.len());
        level(&format!("{wall}\n{row}\n{wall}"))
    }

    fn walk(s: &mut GameState, action: Action, n: usize) {
        for _ in 0..n {
            s.advance(action).unwrap();
        }
    }

    #[test]
    fn coin_pickup_scores_one() {
        let mut s = corridor(2, '.');
        s.advance(Action::Right).unwrap();
        assert_eq!(s.score(), 1.0);
    }

    #[test]
    fn green_takes_three_and_returns_five_after_thirty() {
        let mut s = corridor(3, 'G');
        walk(&mut s, Action::Right, 3);
        assert_eq!(s.score(), 3.0);
        s.advance(Action::Right).unwrap();
        assert_eq!(s.score(), 0.0);
        assert_eq!(s.status(), Status::Running);
        let invested_at = s.tick();
        while s.tick() < invested_at + 29 {
            s.advance(Action::Nil).unwrap();
            assert_eq!(s.score(), 0.0);
        }
        s.advance(Action::Nil).unwrap();
        assert_eq!(s.tick(), invested_at + 30);
        assert_eq!(s.score(), 5.0);
        assert_eq!(s.count_kind("green"), 1);
    }

    #[test]
    fn red_and_blue_timings() {
        for (ch, cost, payout, delay) in [('R', 7.0, 15.0, 60), ('B', 5.0, 10.0, 90)] {
            let mut s = corridor(7, ch);
            walk(&mut s, Action::Right, 8);
            assert_eq!(s.score(), 7.0 - cost);
            let at = s.tick();
            while s.tick() < at + delay - 1 {
                s.advance(Action::Left).unwrap();
            }
            assert_eq!(s.score(), 7.0 - cost);
            s.advance(Action::Nil).unwrap();
            assert_eq!(s.score(), 7.0 - cost + payout);
        }
    }

    #[test]
    fn debt_loses() {
        let mut s = corridor(5, 'R');
        walk(&mut s, Action::Right, 5);
        assert_eq!(s.score(), 5.0);
        s.advance(Action::Right).unwrap();
        assert_eq!(s.score(), -2.0);
        assert_eq!(s.status(), Status::Lose);
    }

    #[test]
    fn surviving_to_the_cap_wins() {
        let mut s = corridor(1, '.');
        while !s.is_terminal() {
            s.advance(Action::Nil).unwrap();
        }
        assert_eq!(s.status(), Status::Win);
        assert_eq!(s.tick(), TICK_CAP);
    }

    #[test]
    fn coins_are_collected_once() {
        let mut s = corridor(1, '.');
        s.advance(Action::Right).unwrap();
        s.advance(Action::Right).unwrap();
        s.advance(Action::Left).unwrap();
        assert_eq!(s.count_kind("coin"), 0);
        assert_eq!(s.score(), 1.0);
    }
}
