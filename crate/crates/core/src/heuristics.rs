//! State evaluation functions used by the search agents.
//!
//! Every heuristic maps a simulated future state, together with what the
//! agent has learnt from its real trajectory, to a real value. Winning always
//! outranks every non-terminal state and losing ranks below all of them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::{Category, EventKind, GameState, Kind, Observation, Pos, Status};

/// Terminal bonus; dominates any score reachable in the shipped games.
pub const HUGE_WIN: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HeuristicId {
    /// Win, then maximise score.
    Wmh,
    /// Visit cells seen least often.
    Emh,
    /// Trigger unseen interactions, kinds and spawns.
    Kdh,
    /// Sample interactions whose outcome is still uncertain.
    Keh,
}

impl HeuristicId {
    pub const ALL: [HeuristicId; 4] = [
        HeuristicId::Wmh,
        HeuristicId::Emh,
        HeuristicId::Kdh,
        HeuristicId::Keh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HeuristicId::Wmh => "WMH",
            HeuristicId::Emh => "EMH",
            HeuristicId::Kdh => "KDH",
            HeuristicId::Keh => "KEH",
        }
    }
}

impl fmt::Display for HeuristicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeuristicId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HeuristicId::ALL
            .into_iter()
            .find(|h| h.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown heuristic '{s}'"))
    }
}

/// Tunable constants shared by every heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicParams {
    pub huge_win: f64,
    /// KDH weights for new kinds, new interaction pairs and spawns.
    pub kdh_weights: [f64; 3],
    /// Min-max normalise voice opinions before comparing them.
    pub normalize: bool,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        HeuristicParams {
            huge_win: HUGE_WIN,
            kdh_weights: [10.0, 5.0, 1.0],
            normalize: false,
        }
    }
}

/// Per-cell visit counters of the real trajectory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitGrid {
    width: i32,
    height: i32,
    counts: Vec<u32>,
    total: u64,
}

impl VisitGrid {
    pub fn new(width: i32, height: i32) -> Self {
        VisitGrid {
            width,
            height,
            counts: vec![0; (width * height).max(0) as usize],
            total: 0,
        }
    }

    pub fn dims(&self) -> (i32, i32) {
        (self.width, self.height)
    }

    fn index(&self, p: Pos) -> Option<usize> {
        (p.x >= 0 && p.y >= 0 && p.x < self.width && p.y < self.height)
            .then(|| (p.y * self.width + p.x) as usize)
    }

    pub fn count(&self, p: Pos) -> u32 {
        self.index(p).map_or(0, |i| self.counts[i])
    }

    pub fn record(&mut self, p: Pos) {
        if let Some(i) = self.index(p) {
            self.counts[i] += 1;
            self.total += 1;
        }
    }

    /// Number of positions recorded so far.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InteractionStats {
    pub occurrences: u64,
    pub score_delta_sum: f64,
    pub wins: u64,
    pub losses: u64,
}

impl InteractionStats {
    /// Mean score change per occurrence; `None` before the first sample.
    pub fn score_estimate(&self) -> Option<f64> {
        (self.occurrences > 0).then(|| self.score_delta_sum / self.occurrences as f64)
    }
}

/// Interaction statistics gathered from the real trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeBase {
    interactions: BTreeMap<(Kind, Kind), InteractionStats>,
    discovered: BTreeSet<Kind>,
    spawn_events: u64,
}

impl KnowledgeBase {
    pub fn stats(&self, actor: Kind, other: Kind) -> Option<&InteractionStats> {
        self.interactions.get(&(actor, other))
    }

    pub fn occurrences(&self, actor: Kind, other: Kind) -> u64 {
        self.stats(actor, other).map_or(0, |s| s.occurrences)
    }

    pub fn score_estimate(&self, actor: Kind, other: Kind) -> Option<f64> {
        self.stats(actor, other)
            .and_then(InteractionStats::score_estimate)
    }

    pub fn knows_kind(&self, kind: Kind) -> bool {
        self.discovered.contains(kind)
    }

    pub fn discovered_kinds(&self) -> impl Iterator<Item = Kind> + '_ {
        self.discovered.iter().copied()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&(Kind, Kind), &InteractionStats)> {
        self.interactions.iter()
    }

    pub fn spawn_events(&self) -> u64 {
        self.spawn_events
    }
}

/// Everything an agent learns from the real (not simulated) trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Knowledge {
    pub visits: VisitGrid,
    pub kb: KnowledgeBase,
    last_tick: Option<u32>,
}

impl Knowledge {
    pub fn new(width: i32, height: i32) -> Self {
        Knowledge {
            visits: VisitGrid::new(width, height),
            kb: KnowledgeBase::default(),
            last_tick: None,
        }
    }

    pub fn for_state(state: &GameState) -> Self {
        let (w, h) = state.dims();
        Knowledge::new(w, h)
    }

    /// Folds in one real observation. Observing the same tick twice is a no-op.
    pub fn update(&mut self, state: &GameState) {
        let tick = state.tick();
        if self.last_tick.is_some_and(|t| t >= tick) {
            return;
        }
        let since = self.last_tick.unwrap_or(0);
        let obs = state.observe_since(since);
        update_knowledge(&mut self.kb, &mut self.visits, &obs);
        self.last_tick = Some(tick);
    }

    pub fn last_tick(&self) -> Option<u32> {
        self.last_tick
    }
}

/// Records the avatar cell and the event delta of a real observation.
pub fn update_knowledge(kb: &mut KnowledgeBase, visits: &mut VisitGrid, obs: &Observation<'_>) {
    visits.record(obs.avatar_pos());
    for s in obs.sprites() {
        kb.discovered.insert(s.kind);
    }
    for e in obs.events() {
        match e.kind {
            EventKind::Collision {
                actor,
                other,
                score_delta,
            } => {
                kb.discovered.insert(other);
                let st = kb.interactions.entry((actor, other)).or_default();
                st.occurrences += 1;
                st.score_delta_sum += score_delta;
                match e.outcome {
                    Some(Status::Win) => st.wins += 1,
                    Some(Status::Lose) => st.losses += 1,
                    _ => {}
                }
            }
            EventKind::Spawn { kind } => {
                kb.discovered.insert(kind);
                kb.spawn_events += 1;
            }
            EventKind::Score { .. } => {}
        }
    }
}

fn terminal_value(status: Status, params: &HeuristicParams) -> Option<f64> {
    match status {
        Status::Win => Some(params.huge_win),
        Status::Lose => Some(-params.huge_win),
        Status::Running => None,
    }
}

pub fn evaluate_wmh(future: &Observation<'_>, params: &HeuristicParams) -> f64 {
    let score = future.score();
    match future.status() {
        Status::Win => params.huge_win + score,
        Status::Lose => -params.huge_win + score,
        Status::Running => score,
    }
}

pub fn evaluate_emh(future: &Observation<'_>, visits: &VisitGrid, params: &HeuristicParams) -> f64 {
    terminal_value(future.status(), params)
        .unwrap_or_else(|| 1.0 / (1.0 + visits.count(future.avatar_pos()) as f64))
}

/// Novelty along the simulated path (events after `future.since()`).
pub fn evaluate_kdh(future: &Observation<'_>, kb: &KnowledgeBase, params: &HeuristicParams) -> f64 {
    if let Some(v) = terminal_value(future.status(), params) {
        return v;
    }
    let mut new_kinds: BTreeSet<Kind> = BTreeSet::new();
    let mut new_pairs: BTreeSet<(Kind, Kind)> = BTreeSet::new();
    let mut spawns = 0u32;
    for e in future.events() {
        match e.kind {
            EventKind::Collision { actor, other, .. } => {
                if kb.occurrences(actor, other) == 0 {
                    new_pairs.insert((actor, other));
                }
                if !kb.knows_kind(other) {
                    new_kinds.insert(other);
                }
            }
            EventKind::Spawn { kind } => {
                spawns += 1;
                if !kb.knows_kind(kind) {
                    new_kinds.insert(kind);
                }
            }
            EventKind::Score { .. } => {}
        }
    }
    for s in future.sprites() {
        if !kb.knows_kind(s.kind) {
            new_kinds.insert(s.kind);
        }
    }
    let [w_kind, w_pair, w_spawn] = params.kdh_weights;
    w_kind * new_kinds.len() as f64 + w_pair * new_pairs.len() as f64 + w_spawn * spawns as f64
}

/// Curiosity bonus over the distinct interaction pairs touched on the path.
pub fn evaluate_keh(future: &Observation<'_>, kb: &KnowledgeBase, params: &HeuristicParams) -> f64 {
    if let Some(v) = terminal_value(future.status(), params) {
        return v;
    }
    let mut touched: BTreeSet<(Kind, Kind)> = BTreeSet::new();
    for e in future.events() {
        if let EventKind::Collision { actor, other, .. } = e.kind {
            touched.insert((actor, other));
        }
    }
    touched
        .into_iter()
        .map(|(a, o)| 1.0 / (1.0 + kb.occurrences(a, o) as f64))
        .sum()
}

/// Win/score value minus the distance to the closest portal.
pub fn evaluate_simple_state(future: &Observation<'_>, params: &HeuristicParams) -> f64 {
    let base = evaluate_wmh(future, params);
    if future.status().is_terminal() {
        return base;
    }
    base - future.nearest_distance(Category::Portal).unwrap_or(0) as f64
}

/// Dispatches to the heuristic `id`. `future` should be observed since the
/// tick at which the search started so that its events cover the path.
pub fn evaluate(
    id: HeuristicId,
    future: &Observation<'_>,
    knowledge: &Knowledge,
    params: &HeuristicParams,
) -> f64 {
    match id {
        HeuristicId::Wmh => evaluate_wmh(future, params),
        HeuristicId::Emh => evaluate_emh(future, &knowledge.visits, params),
        HeuristicId::Kdh => evaluate_kdh(future, &knowledge.kb, params),
        HeuristicId::Keh => evaluate_keh(future, &knowledge.kb, params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Action, CharEntry, GameSpec, Rules, Step};
    use std::sync::Arc;

    /// Avatar walks; touching a `bell` rings (0 points) and spawns a `note`.
    /// Touching a `coin` pays +1. Touching `goal` wins, `pit` loses.
    struct Toy;

    impl Rules for Toy {
        fn step(&self, step: &mut Step<'_>, action: Action) {
            step.move_avatar(action);
            let at = step.avatar_pos();
            if step.find_at(at, "bell").is_some() {
                step.collide("avatar", "bell", 0.0);
                step.spawn("note", Category::Resource, at, false);
            }
            if let Some(c) = step.find_at(at, "coin") {
                step.kill(c);
                step.collide("avatar", "coin", 1.0);
            }
            if step.find_at(at, "goal").is_some() {
                step.win();
            }
            if step.find_at(at, "pit").is_some() {
                step.lose();
            }
        }
    }

    fn toy(text: &str) -> GameState {
        let spec = Arc::new(
            GameSpec::new("toy", Action::MOVES.to_vec(), Box::new(Toy)).with_chars(&[
                ('w', CharEntry::wall("wall")),
                ('A', CharEntry::new("avatar", Category::Avatar)),
                ('b', CharEntry::new("bell", Category::Static)),
                ('o', CharEntry::new("coin", Category::Resource)),
                ('g', CharEntry::new("goal", Category::Portal)),
                ('p', CharEntry::new("pit", Category::Static)),
            ]),
        );
        crate::games::parse_level(text, spec).unwrap()
    }

    fn after(s: &GameState, actions: &[Action]) -> GameState {
        let mut t = s.clone();
        for &a in actions {
            t.advance(a).unwrap();
        }
        t
    }

    #[test]
    fn wmh_orders_win_score_loss() {
        let p = HeuristicParams::default();
        let s = toy("wwwwww\nwgAo.w\nw.p..w\nwwwwww");
        let win = after(&s, &[Action::Left]);
        let coin = after(&s, &[Action::Right]);
        let idle = after(&s, &[Action::Up]);
        let lose = after(&s, &[Action::Down]);
        assert_eq!(evaluate_wmh(&win.observe(), &p), 1e7);
        assert!(evaluate_wmh(&coin.observe(), &p) > evaluate_wmh(&idle.observe(), &p));
        assert!(evaluate_wmh(&lose.observe(), &p) < evaluate_wmh(&idle.observe(), &p));
    }

    #[test]
    fn emh_prefers_less_visited_cells() {
        let p = HeuristicParams::default();
        let s = toy("wwwww\nw.A.w\nwwwww");
        let mut k = Knowledge::for_state(&s);
        let left = after(&s, &[Action::Left]);
        let right = after(&s, &[Action::Right]);
        for _ in 0..5 {
            k.visits.record(left.avatar_pos());
        }
        let vl = evaluate_emh(&left.observe(), &k.visits, &p);
        let vr = evaluate_emh(&right.observe(), &k.visits, &p);
        assert!(vr > vl);
        assert_eq!(vr, 1.0);
        assert_eq!(vl, 1.0 / 6.0);
    }

    #[test]
    fn kdh_rewards_new_interactions_and_spawns() {
        let p = HeuristicParams::default();
        let s = toy("wwwwww\nw.Ab.w\nw....w\nwwwwww");
        let mut k = Knowledge::for_state(&s);
        k.update(&s);
        let ring = after(&s, &[Action::Right]);
        let idle = after(&s, &[Action::Down]);
        let idle2 = after(&s, &[Action::Left]);
        let since = s.tick();
        let v_ring = evaluate_kdh(&ring.observe_since(since), &k.kb, &p);
        let v_idle = evaluate_kdh(&idle.observe_since(since), &k.kb, &p);
        assert_eq!(v_idle, 0.0);
        assert_eq!(v_idle, evaluate_kdh(&idle2.observe_since(since), &k.kb, &p));
        // new pair (5) + new kind `note` (10) + one spawn (1)
        assert_eq!(v_ring, 16.0);
    }

    #[test]
    fn keh_bonus_shrinks_with_samples() {
        let p = HeuristicParams::default();
        let s = toy("wwwwww\nw.Ab.w\nwwwwww");
        let mut k = Knowledge::for_state(&s);
        let ring = after(&s, &[Action::Right]);
        let fresh = evaluate_keh(&ring.observe_since(0), &k.kb, &p);
        assert_eq!(fresh, 1.0);
        // Walk back and forth over the bell on the real trajectory.
        let mut real = s.clone();
        k.update(&real);
        for i in 0..200 {
            real.advance(if i % 2 == 0 {
                Action::Right
            } else {
                Action::Left
            })
            .unwrap();
            k.update(&real);
        }
        assert_eq!(k.kb.occurrences("avatar", "bell"), 100);
        let stale = evaluate_keh(&ring.observe_since(0), &k.kb, &p);
        assert!(stale < fresh);
        assert!(stale <= 1.0 / 101.0 + 1e-12);
        let idle = after(&s, &[Action::Left]);
        assert_eq!(evaluate_keh(&idle.observe_since(0), &k.kb, &p), 0.0);
    }

    #[test]
    fn knowledge_update_counts_visits_and_estimates() {
        let s = toy("wwwwwww\nwAoo..w\nwwwwwww");
        let mut k = Knowledge::for_state(&s);
        let mut real = s.clone();
        k.update(&real);
        k.update(&real);
        assert_eq!(k.visits.total(), 1);
        real.advance(Action::Right).unwrap();
        k.update(&real);
        real.advance(Action::Right).unwrap();
        k.update(&real);
        assert_eq!(k.visits.count(Pos::new(2, 1)), 1);
        assert_eq!(k.visits.total(), 3);
        assert_eq!(k.kb.score_estimate("avatar", "coin"), Some(1.0));
        assert_eq!(k.kb.occurrences("avatar", "coin"), 2);
    }

    #[test]
    fn simulation_leaves_knowledge_untouched() {
        let p = HeuristicParams::default();
        let s = toy("wwwwww\nw.Ab.w\nwwwwww");
        let mut k = Knowledge::for_state(&s);
        k.update(&s);
        let before = k.clone();
        let mut sim = s.clone();
        for i in 0..10 {
            sim.advance(if i % 2 == 0 {
                Action::Right
            } else {
                Action::Left
            })
            .unwrap();
            for h in HeuristicId::ALL {
                evaluate(h, &sim.observe_since(0), &k, &p);
            }
        }
        assert_eq!(k, before);
    }

    #[test]
    fn simple_state_subtracts_portal_distance() {
        let p = HeuristicParams::default();
        let s = toy("wwwwwwwww\nwA.....gw\nwwwwwwwww");
        assert_eq!(evaluate_simple_state(&s.observe(), &p), -6.0);
    }
}
