//! Deterministic grid-world simulation with a copyable forward model.
//!
//! A [`GameState`] is a plain value. Advancing it runs the game's [`Rules`]
//! for one tick; cloning it yields an independent snapshot that carries its
//! own random stream, so replays from a clone are bit-identical.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type GameRng = ChaCha8Rng;

/// Default episode length when a game does not override it.
pub const DEFAULT_TICK_CAP: u32 = 2000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("cannot advance a state whose status is {0}")]
    TerminalStateAdvance(Status),
    #[error("action {0} is not in the game's action set")]
    IllegalAction(Action),
    #[error("decision budget exhausted")]
    BudgetExhausted,
}

/// Avatar actions in their fixed tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Use,
    Nil,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::Use,
        Action::Nil,
    ];

    pub const MOVES: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Grid offset of a movement action; `(0, 0)` for USE and NIL.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Action::Up => (0, -1),
            Action::Down => (0, 1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Use | Action::Nil => (0, 0),
        }
    }

    pub fn is_move(self) -> bool {
        matches!(
            self,
            Action::Up | Action::Down | Action::Left | Action::Right
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "UP",
            Action::Down => "DOWN",
            Action::Left => "LEFT",
            Action::Right => "RIGHT",
            Action::Use => "USE",
            Action::Nil => "NIL",
        }
    }

    pub fn parse(s: &str) -> Option<Action> {
        Action::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Running,
    Win,
    Lose,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        self != Status::Running
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Running => "RUNNING",
            Status::Win => "WIN",
            Status::Lose => "LOSE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Avatar,
    Static,
    Movable,
    Npc,
    Portal,
    Resource,
}

/// Game-defined sprite type tag.
pub type Kind = &'static str;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct Pos {
    pub x: i32,
    pub y: i32,
}

impl Pos {
    pub const fn new(x: i32, y: i32) -> Self {
        Pos { x, y }
    }

    pub fn manhattan(self, other: Pos) -> i32 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn step(self, action: Action) -> Pos {
        let (dx, dy) = action.delta();
        Pos::new(self.x + dx, self.y + dy)
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sprite {
    pub id: u32,
    pub kind: Kind,
    pub category: Category,
    pub pos: Pos,
    pub alive: bool,
    /// Blocks movement of avatars and NPCs.
    pub solid: bool,
    /// Facing of moving sprites (projectiles, NPCs).
    pub heading: Action,
    /// Game-specific counter (hunger, respawn timers, ...).
    pub counter: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// `actor` is the avatar or one of its projectiles.
    Collision {
        actor: Kind,
        other: Kind,
        score_delta: f64,
    },
    Spawn {
        kind: Kind,
    },
    /// Score change not caused by the avatar (payouts, NPCs reaching goals).
    Score {
        cause: Kind,
        delta: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// Tick of the successor state in which the event happened.
    pub tick: u32,
    pub kind: EventKind,
    /// Terminal status reached in the same tick, if any.
    pub outcome: Option<Status>,
}

/// Persistent append-only event list; clones share their common prefix.
#[derive(Clone, Default)]
pub struct EventLog {
    head: Option<Arc<EventNode>>,
    len: usize,
}

struct EventNode {
    event: Event,
    prev: Option<Arc<EventNode>>,
}

impl EventLog {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn push(&mut self, event: Event) {
        let prev = self.head.take();
        self.head = Some(Arc::new(EventNode { event, prev }));
        self.len += 1;
    }

    /// Newest-first iterator.
    pub fn iter_rev(&self) -> impl Iterator<Item = &Event> {
        let mut cur = self.head.as_deref();
        std::iter::from_fn(move || {
            let node = cur?;
            cur = node.prev.as_deref();
            Some(&node.event)
        })
    }

    /// Events with `tick > since`, oldest first.
    pub fn since(&self, since: u32) -> Vec<&Event> {
        let mut out: Vec<&Event> = self.iter_rev().take_while(|e| e.tick > since).collect();
        out.reverse();
        out
    }
}

impl Drop for EventLog {
    fn drop(&mut self) {
        // Unlink iteratively; long episodes would otherwise recurse per node.
        let mut cur = self.head.take();
        while let Some(node) = cur {
            match Arc::try_unwrap(node) {
                Ok(mut inner) => cur = inner.prev.take(),
                Err(_) => break,
            }
        }
    }
}

impl PartialEq for EventLog {
    fn eq(&self, other: &Self) -> bool {
        self.len == other.len && self.iter_rev().eq(other.iter_rev())
    }
}

impl fmt::Debug for EventLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EventLog").field("len", &self.len).finish()
    }
}

/// Level character binding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharEntry {
    pub kind: Kind,
    pub category: Category,
    pub solid: bool,
    /// Immovable solid terrain, shared between copies instead of stored per sprite.
    pub fixed: bool,
}

impl CharEntry {
    pub const fn new(kind: Kind, category: Category) -> Self {
        CharEntry {
            kind,
            category,
            solid: false,
            fixed: false,
        }
    }

    pub const fn solid(kind: Kind, category: Category) -> Self {
        CharEntry {
            kind,
            category,
            solid: true,
            fixed: false,
        }
    }

    pub const fn wall(kind: Kind) -> Self {
        CharEntry {
            kind,
            category: Category::Static,
            solid: true,
            fixed: true,
        }
    }
}

/// Transition rules of one game.
///
/// `step` runs once per tick after the engine has validated the action. It
/// must move the avatar before NPCs, visit NPCs in ascending id order and
/// resolve collisions in event order.
pub trait Rules: Send + Sync {
    fn step(&self, step: &mut Step<'_>, action: Action);
}

/// Static definition of a game: action set, level alphabet and rules.
pub struct GameSpec {
    pub name: &'static str,
    pub action_set: Vec<Action>,
    /// `'.'` and `' '` are always empty floor.
    pub char_map: Vec<(char, CharEntry)>,
    pub rules: Box<dyn Rules>,
    pub tick_cap: u32,
    /// Outcome when the tick cap is reached while running.
    pub timeout_status: Status,
}

impl GameSpec {
    pub fn new(name: &'static str, action_set: Vec<Action>, rules: Box<dyn Rules>) -> Self {
        let mut action_set = action_set;
        if !action_set.contains(&Action::Nil) {
            action_set.push(Action::Nil);
        }
        action_set.sort();
        action_set.dedup();
        GameSpec {
            name,
            action_set,
            char_map: Vec::new(),
            rules,
            tick_cap: DEFAULT_TICK_CAP,
            timeout_status: Status::Lose,
        }
    }

    pub fn with_chars(mut self, chars: &[(char, CharEntry)]) -> Self {
        self.char_map.extend_from_slice(chars);
        self
    }

    pub fn with_tick_cap(mut self, cap: u32, timeout_status: Status) -> Self {
        self.tick_cap = cap;
        self.timeout_status = timeout_status;
        self
    }

    pub fn entry(&self, c: char) -> Option<&CharEntry> {
        self.char_map.iter().find(|(k, _)| *k == c).map(|(_, e)| e)
    }

    pub fn is_fixed(&self, kind: Kind) -> bool {
        self.char_map.iter().any(|(_, e)| e.fixed && e.kind == kind)
    }

    pub fn char_for(&self, kind: Kind) -> Option<char> {
        self.char_map
            .iter()
            .find(|(_, e)| e.kind == kind)
            .map(|(c, _)| *c)
    }
}

impl fmt::Debug for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GameSpec")
            .field("name", &self.name)
            .field("action_set", &self.action_set)
            .field("tick_cap", &self.tick_cap)
            .finish_non_exhaustive()
    }
}

/// Immovable cells shared by every copy of a state.
#[derive(Debug, Clone, PartialEq)]
struct Terrain {
    width: i32,
    cells: Vec<Option<Kind>>,
}

impl Terrain {
    fn index(&self, p: Pos, height: i32) -> Option<usize> {
        (p.x >= 0 && p.y >= 0 && p.x < self.width && p.y < height)
            .then(|| (p.y * self.width + p.x) as usize)
    }
}

/// Complete simulable world snapshot.
#[derive(Clone)]
pub struct GameState {
    spec: Arc<GameSpec>,
    width: i32,
    height: i32,
    /// Alive sprites sorted by id (the avatar is always kept).
    sprites: Vec<Sprite>,
    terrain: Arc<Terrain>,
    next_id: u32,
    avatar: u32,
    orientation: Action,
    score: f64,
    tick: u32,
    status: Status,
    rng: GameRng,
    events: EventLog,
}

impl PartialEq for GameState {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.spec, &other.spec)
            && self.width == other.width
            && self.height == other.height
            && self.sprites == other.sprites
            && self.terrain == other.terrain
            && self.next_id == other.next_id
            && self.avatar == other.avatar
            && self.orientation == other.orientation
            && self.score.to_bits() == other.score.to_bits()
            && self.tick == other.tick
            && self.status == other.status
            && self.rng == other.rng
            && self.events == other.events
    }
}

impl fmt::Debug for GameState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GameState")
            .field("game", &self.spec.name)
            .field("tick", &self.tick)
            .field("score", &self.score)
            .field("status", &self.status)
            .field("avatar", &self.avatar_pos())
            .field("sprites", &self.sprites.len())
            .finish()
    }
}

impl GameState {
    /// Builds a state at tick 0. `sprites` need not carry ids; they are assigned in order.
    /// Sprites of fixed kinds become terrain and get no id.
    pub fn new(
        spec: Arc<GameSpec>,
        width: i32,
        height: i32,
        sprites: Vec<Sprite>,
        seed: u64,
    ) -> Self {
        let (fixed, mut sprites): (Vec<Sprite>, Vec<Sprite>) =
            sprites.into_iter().partition(|s| spec.is_fixed(s.kind));
        let mut terrain = Terrain {
            width,
            cells: vec![None; (width.max(0) * height.max(0)) as usize],
        };
        for s in fixed {
            if let Some(i) = terrain.index(s.pos, height) {
                terrain.cells[i] = Some(s.kind);
            }
        }
        for (i, s) in sprites.iter_mut().enumerate() {
            s.id = i as u32;
        }
        let avatar = sprites
            .iter()
            .find(|s| s.category == Category::Avatar)
            .map(|s| s.id)
            .unwrap_or(0);
        GameState {
            spec,
            width,
            height,
            next_id: sprites.len() as u32,
            sprites,
            terrain: Arc::new(terrain),
            avatar,
            orientation: Action::Up,
            score: 0.0,
            tick: 0,
            status: Status::Running,
            rng: GameRng::seed_from_u64(seed),
            events: EventLog::default(),
        }
    }

    /// Replaces the random stream. Planners reseed copies so that sampled
    /// futures differ.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng = GameRng::seed_from_u64(seed);
        self
    }

    pub fn spec(&self) -> &Arc<GameSpec> {
        &self.spec
    }

    pub fn game_name(&self) -> &'static str {
        self.spec.name
    }

    pub fn dims(&self) -> (i32, i32) {
        (self.width, self.height)
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn tick(&self) -> u32 {
        self.tick
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn is_terminal(&self) -> bool {
        self.status.is_terminal()
    }

    pub fn sprites(&self) -> &[Sprite] {
        &self.sprites
    }

    pub fn sprite(&self, id: u32) -> Option<&Sprite> {
        self.sprites
            .binary_search_by_key(&id, |s| s.id)
            .ok()
            .map(|i| &self.sprites[i])
    }

    pub fn avatar(&self) -> &Sprite {
        self.sprite(self.avatar)
            .expect("avatar sprite is never removed")
    }

    pub fn avatar_pos(&self) -> Pos {
        self.avatar().pos
    }

    pub fn orientation(&self) -> Action {
        self.orientation
    }

    pub fn events(&self) -> &EventLog {
        &self.events
    }

    pub fn in_bounds(&self, p: Pos) -> bool {
        p.x >= 0 && p.y >= 0 && p.x < self.width && p.y < self.height
    }

    pub fn count_kind(&self, kind: Kind) -> usize {
        self.sprites
            .iter()
            .filter(|s| s.alive && s.kind == kind)
            .count()
            + self
                .terrain
                .cells
                .iter()
                .filter(|c| **c == Some(kind))
                .count()
    }

    /// Fixed terrain occupying `p`, if any.
    pub fn terrain_at(&self, p: Pos) -> Option<Kind> {
        self.terrain
            .index(p, self.height)
            .and_then(|i| self.terrain.cells[i])
    }

    /// Actions available now: the declared set while running, `{NIL}` once terminal.
    pub fn legal_actions(&self) -> Vec<Action> {
        if self.status.is_terminal() {
            vec![Action::Nil]
        } else {
            self.spec.action_set.clone()
        }
    }

    pub fn is_legal(&self, action: Action) -> bool {
        if self.status.is_terminal() {
            action == Action::Nil
        } else {
            self.spec.action_set.contains(&action)
        }
    }

    pub fn observe(&self) -> Observation<'_> {
        Observation {
            state: self,
            since: 0,
        }
    }

    /// View whose event delta holds only events after tick `since`.
    pub fn observe_since(&self, since: u32) -> Observation<'_> {
        Observation { state: self, since }
    }

    /// Runs one tick of the game's rules.
    pub fn advance(&mut self, action: Action) -> Result<(), EngineError> {
        if self.status.is_terminal() {
            return Err(EngineError::TerminalStateAdvance(self.status));
        }
        if !self.spec.action_set.contains(&action) {
            return Err(EngineError::IllegalAction(action));
        }
        let spec = Arc::clone(&self.spec);
        let mut step = Step {
            state: self,
            events: Vec::new(),
        };
        spec.rules.step(&mut step, action);
        let events = std::mem::take(&mut step.events);

        self.tick += 1;
        if self.status == Status::Running && self.tick >= spec.tick_cap {
            self.status = spec.timeout_status;
        }
        let avatar = self.avatar;
        self.sprites.retain(|s| s.alive || s.id == avatar);
        let outcome = self.status.is_terminal().then_some(self.status);
        for kind in events {
            self.events.push(Event {
                tick: self.tick,
                kind,
                outcome,
            });
        }
        Ok(())
    }

    /// Functional form of [`GameState::advance`].
    pub fn advanced(&self, action: Action) -> Result<GameState, EngineError> {
        let mut next = self.clone();
        next.advance(action)?;
        Ok(next)
    }

    /// Fixed-width text rendering, one character per cell.
    pub fn render(&self) -> String {
        let mut rows = vec![vec!['.'; self.width as usize]; self.height as usize];
        for (i, kind) in self.terrain.cells.iter().enumerate() {
            if let Some(kind) = kind {
                let (x, y) = (i % self.width as usize, i / self.width as usize);
                rows[y][x] = self.spec.char_for(kind).unwrap_or('?');
            }
        }
        for s in &self.sprites {
            if !s.alive || !self.in_bounds(s.pos) {
                continue;
            }
            let c = if s.id == self.avatar {
                'A'
            } else {
                self.spec.char_for(s.kind).unwrap_or('?')
            };
            let cell = &mut rows[s.pos.y as usize][s.pos.x as usize];
            // Keep the avatar visible over anything it stands on.
            if *cell != 'A' {
                *cell = c;
            }
        }
        let mut out = String::with_capacity((self.width as usize + 1) * self.height as usize);
        for row in rows {
            out.extend(row);
            out.push('\n');
        }
        out
    }
}

/// Mutable access to a state during one tick, handed to [`Rules::step`].
pub struct Step<'a> {
    state: &'a mut GameState,
    events: Vec<EventKind>,
}

impl<'a> Step<'a> {
    pub fn state(&self) -> &GameState {
        self.state
    }

    pub fn tick(&self) -> u32 {
        self.state.tick
    }

    pub fn rng(&mut self) -> &mut GameRng {
        &mut self.state.rng
    }

    pub fn avatar_id(&self) -> u32 {
        self.state.avatar
    }

    pub fn avatar_pos(&self) -> Pos {
        self.state.avatar_pos()
    }

    pub fn orientation(&self) -> Action {
        self.state.orientation
    }

    pub fn status(&self) -> Status {
        self.state.status
    }

    pub fn sprite(&self, id: u32) -> Option<&Sprite> {
        self.state.sprite(id)
    }

    pub fn sprite_mut(&mut self, id: u32) -> Option<&mut Sprite> {
        let i = self
            .state
            .sprites
            .binary_search_by_key(&id, |s| s.id)
            .ok()?;
        Some(&mut self.state.sprites[i])
    }

    /// Ids of alive sprites of `kind`, ascending.
    pub fn ids_of(&self, kind: Kind) -> Vec<u32> {
        self.state
            .sprites
            .iter()
            .filter(|s| s.alive && s.kind == kind)
            .map(|s| s.id)
            .collect()
    }

    /// Ids of alive sprites at `pos`, ascending.
    pub fn ids_at(&self, pos: Pos) -> Vec<u32> {
        self.state
            .sprites
            .iter()
            .filter(|s| s.alive && s.pos == pos)
            .map(|s| s.id)
            .collect()
    }

    pub fn find_at(&self, pos: Pos, kind: Kind) -> Option<u32> {
        self.state
            .sprites
            .iter()
            .find(|s| s.alive && s.pos == pos && s.kind == kind)
            .map(|s| s.id)
    }

    pub fn count_kind(&self, kind: Kind) -> usize {
        self.state.count_kind(kind)
    }

    pub fn blocked(&self, pos: Pos) -> bool {
        !self.state.in_bounds(pos)
            || self.state.terrain_at(pos).is_some()
            || self
                .state
                .sprites
                .iter()
                .any(|s| s.alive && s.solid && s.pos == pos)
    }

    /// Moves the avatar one cell; turning happens even when the move is blocked.
    pub fn move_avatar(&mut self, action: Action) -> bool {
        if !action.is_move() {
            return false;
        }
        self.state.orientation = action;
        let id = self.state.avatar;
        self.move_sprite(id, action)
    }

    /// Moves a sprite one cell unless the target is solid or off-grid.
    pub fn move_sprite(&mut self, id: u32, action: Action) -> bool {
        let Some(s) = self.sprite(id) else {
            return false;
        };
        let target = s.pos.step(action);
        if target == s.pos || self.blocked(target) {
            return false;
        }
        if let Some(s) = self.sprite_mut(id) {
            s.pos = target;
            s.heading = action;
        }
        true
    }

    /// Places a sprite regardless of solidity; positions must stay on the grid.
    pub fn set_pos(&mut self, id: u32, pos: Pos) {
        debug_assert!(self.state.in_bounds(pos));
        if let Some(s) = self.sprite_mut(id) {
            s.pos = pos;
        }
    }

    pub fn spawn(&mut self, kind: Kind, category: Category, pos: Pos, solid: bool) -> u32 {
        debug_assert!(self.state.in_bounds(pos));
        let id = self.state.next_id;
        self.state.next_id += 1;
        self.state.sprites.push(Sprite {
            id,
            kind,
            category,
            pos,
            alive: true,
            solid,
            heading: Action::Nil,
            counter: 0,
        });
        self.events.push(EventKind::Spawn { kind });
        id
    }

    /// Records a spawn for a sprite that reappears in place.
    pub fn announce_spawn(&mut self, kind: Kind) {
        self.events.push(EventKind::Spawn { kind });
    }

    /// Marks a sprite dead; it leaves the state at the end of the tick.
    pub fn kill(&mut self, id: u32) {
        if id == self.state.avatar {
            return;
        }
        if let Some(s) = self.sprite_mut(id) {
            s.alive = false;
        }
    }

    pub fn add_score(&mut self, delta: f64) {
        self.state.score += delta;
    }

    /// Records an avatar/projectile interaction and applies its score delta.
    pub fn collide(&mut self, actor: Kind, other: Kind, score_delta: f64) {
        self.state.score += score_delta;
        self.events.push(EventKind::Collision {
            actor,
            other,
            score_delta,
        });
    }

    /// Applies a score delta that no avatar interaction caused.
    pub fn reward(&mut self, cause: Kind, delta: f64) {
        self.state.score += delta;
        self.events.push(EventKind::Score { cause, delta });
    }

    pub fn win(&mut self) {
        if self.state.status == Status::Running {
            self.state.status = Status::Win;
        }
    }

    pub fn lose(&mut self) {
        if self.state.status == Status::Running {
            self.state.status = Status::Lose;
        }
    }
}

/// Read-only view of a state plus the event delta since a reference tick.
#[derive(Clone, Copy)]
pub struct Observation<'a> {
    state: &'a GameState,
    since: u32,
}

impl<'a> Observation<'a> {
    pub fn state(&self) -> &'a GameState {
        self.state
    }

    pub fn avatar_pos(&self) -> Pos {
        self.state.avatar_pos()
    }

    pub fn orientation(&self) -> Action {
        self.state.orientation
    }

    pub fn score(&self) -> f64 {
        self.state.score
    }

    pub fn tick(&self) -> u32 {
        self.state.tick
    }

    pub fn status(&self) -> Status {
        self.state.status
    }

    pub fn dims(&self) -> (i32, i32) {
        self.state.dims()
    }

    pub fn since(&self) -> u32 {
        self.since
    }

    pub fn sprites(&self) -> impl Iterator<Item = &'a Sprite> {
        let avatar = self.state.avatar;
        self.state
            .sprites
            .iter()
            .filter(move |s| s.alive && s.id != avatar)
    }

    pub fn sprites_of(&self, category: Category) -> impl Iterator<Item = &'a Sprite> {
        self.sprites().filter(move |s| s.category == category)
    }

    pub fn positions_of_kind(&self, kind: Kind) -> Vec<Pos> {
        self.sprites()
            .filter(|s| s.kind == kind)
            .map(|s| s.pos)
            .collect()
    }

    /// Manhattan distance from the avatar to the closest sprite of `category`.
    pub fn nearest_distance(&self, category: Category) -> Option<i32> {
        let a = self.avatar_pos();
        self.sprites_of(category).map(|s| s.pos.manhattan(a)).min()
    }

    /// Events after the reference tick, oldest first.
    pub fn events(&self) -> Vec<&'a Event> {
        self.state.events.since(self.since)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BudgetUnit {
    ForwardCalls,
    Millis,
}

/// Per-decision allowance of forward-model use.
///
/// Forward calls are always counted; in `Millis` mode the limit is wall-clock
/// time measured from the first query.
#[derive(Debug, Clone)]
pub struct Budget {
    unit: BudgetUnit,
    amount: u64,
    calls: u64,
    started: Option<Instant>,
}

impl Budget {
    pub fn new(unit: BudgetUnit, amount: u64) -> Self {
        Budget {
            unit,
            amount,
            calls: 0,
            started: None,
        }
    }

    pub fn calls(amount: u64) -> Self {
        Budget::new(BudgetUnit::ForwardCalls, amount)
    }

    pub fn millis(amount: u64) -> Self {
        Budget::new(BudgetUnit::Millis, amount)
    }

    pub fn unit(&self) -> BudgetUnit {
        self.unit
    }

    pub fn amount(&self) -> u64 {
        self.amount
    }

    /// Forward-model calls made so far.
    pub fn calls_made(&self) -> u64 {
        self.calls
    }

    /// Consumption in the budget's own unit, capped at `amount`.
    pub fn consumed(&self) -> u64 {
        match self.unit {
            BudgetUnit::ForwardCalls => self.calls,
            BudgetUnit::Millis => self
                .started
                .map(|t| t.elapsed().as_millis() as u64)
                .unwrap_or(0)
                .min(self.amount),
        }
    }

    /// Remaining forward calls; `None` in `Millis` mode.
    pub fn remaining_calls(&self) -> Option<u64> {
        match self.unit {
            BudgetUnit::ForwardCalls => Some(self.amount - self.calls),
            BudgetUnit::Millis => None,
        }
    }

    pub fn is_exhausted(&mut self) -> bool {
        match self.unit {
            BudgetUnit::ForwardCalls => self.calls >= self.amount,
            BudgetUnit::Millis => {
                let start = *self.started.get_or_insert_with(Instant::now);
                start.elapsed().as_millis() as u64 >= self.amount
            }
        }
    }

    /// Advances `state` by one tick, charging one forward call.
    pub fn advance(&mut self, state: &mut GameState, action: Action) -> Result<(), EngineError> {
        if self.is_exhausted() {
            return Err(EngineError::BudgetExhausted);
        }
        state.advance(action)?;
        self.calls += 1;
        Ok(())
    }

    /// A fresh budget of the same unit with a different amount.
    pub fn split(&self, amount: u64) -> Budget {
        Budget::new(self.unit, amount)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// NPCs wander; collecting a `gem` scores +1 and emits a collision.
    struct Wander;

    impl Rules for Wander {
        fn step(&self, step: &mut Step<'_>, action: Action) {
            step.move_avatar(action);
            for id in step.ids_of("bug") {
                let dir = Action::MOVES[step.rng().gen_range(0..4)];
                step.move_sprite(id, dir);
            }
            let at = step.avatar_pos();
            if let Some(gem) = step.find_at(at, "gem") {
                step.kill(gem);
                step.collide("avatar", "gem", 1.0);
            }
        }
    }

    struct Idle;

    impl Rules for Idle {
        fn step(&self, _: &mut Step<'_>, _: Action) {}
    }

    fn sprite(kind: Kind, category: Category, x: i32, y: i32, solid: bool) -> Sprite {
        Sprite {
            id: 0,
            kind,
            category,
            pos: Pos::new(x, y),
            alive: true,
            solid,
            heading: Action::Nil,
            counter: 0,
        }
    }

    fn wander_state(seed: u64) -> GameState {
        let spec = Arc::new(
            GameSpec::new("wander", Action::MOVES.to_vec(), Box::new(Wander)).with_chars(&[
                ('w', CharEntry::wall("wall")),
                ('g', CharEntry::new("gem", Category::Resource)),
                ('b', CharEntry::new("bug", Category::Npc)),
                ('P', CharEntry::new("goal", Category::Portal)),
            ]),
        );
        let sprites = vec![
            sprite("avatar", Category::Avatar, 1, 3, false),
            sprite("wall", Category::Static, 0, 0, true),
            sprite("gem", Category::Resource, 2, 3, false),
            sprite("bug", Category::Npc, 4, 4, false),
            sprite("goal", Category::Portal, 7, 3, false),
        ];
        GameState::new(spec, 8, 6, sprites, seed)
    }

    #[test]
    fn nil_on_static_game_only_bumps_tick() {
        let spec = Arc::new(GameSpec::new("idle", vec![], Box::new(Idle)));
        let s = GameState::new(
            spec,
            3,
            3,
            vec![sprite("avatar", Category::Avatar, 1, 1, false)],
            1,
        );
        let next = s.advanced(Action::Nil).unwrap();
        assert_eq!(next.tick(), s.tick() + 1);
        assert_eq!(next.score(), s.score());
        assert_eq!(next.sprites(), s.sprites());
        assert_eq!(next.status(), Status::Running);
    }

    #[test]
    fn terminal_states_refuse_to_advance() {
        let spec =
            Arc::new(GameSpec::new("idle", vec![], Box::new(Idle)).with_tick_cap(1, Status::Win));
        let mut s = GameState::new(
            spec,
            3,
            3,
            vec![sprite("avatar", Category::Avatar, 1, 1, false)],
            1,
        );
        s.advance(Action::Nil).unwrap();
        assert_eq!(s.status(), Status::Win);
        assert_eq!(
            s.advance(Action::Nil),
            Err(EngineError::TerminalStateAdvance(Status::Win))
        );
        assert_eq!(s.legal_actions(), vec![Action::Nil]);
        let copy = s.clone();
        assert!(copy.is_terminal());
    }

    #[test]
    fn illegal_action_is_rejected() {
        let mut s = wander_state(3);
        assert_eq!(
            s.advance(Action::Use),
            Err(EngineError::IllegalAction(Action::Use))
        );
        assert_eq!(
            s.legal_actions(),
            vec![
                Action::Up,
                Action::Down,
                Action::Left,
                Action::Right,
                Action::Nil
            ]
        );
    }

    #[test]
    fn copy_is_independent_and_replays_identically() {
        let original = wander_state(11);
        let before = original.clone();
        let mut a = original.clone();
        let mut b = original.clone();
        for i in 0..10 {
            let act = Action::MOVES[i % 4];
            a.advance(act).unwrap();
            b.advance(act).unwrap();
        }
        assert_eq!(original, before);
        assert_eq!(a, b);
        assert_ne!(a, original);
    }

    #[test]
    fn observation_reports_nearest_portal_and_collision_delta() {
        let mut s = wander_state(5);
        assert_eq!(s.observe().nearest_distance(Category::Portal), Some(6));
        s.advance(Action::Right).unwrap();
        let obs = s.observe_since(0);
        assert_eq!(s.score(), 1.0);
        let events = obs.events();
        assert_eq!(events.len(), 1);
        assert!(matches!(
            events[0].kind,
            EventKind::Collision {
                actor: "avatar",
                other: "gem",
                ..
            }
        ));
        assert!(s.observe_since(1).events().is_empty());
    }

    #[test]
    fn budget_counts_and_blocks_calls() {
        let mut s = wander_state(5);
        let mut b = Budget::calls(2);
        b.advance(&mut s, Action::Nil).unwrap();
        b.advance(&mut s, Action::Nil).unwrap();
        assert_eq!(
            b.advance(&mut s, Action::Nil),
            Err(EngineError::BudgetExhausted)
        );
        assert_eq!(b.calls_made(), 2);
        assert_eq!(s.tick(), 2);
    }

    #[test]
    fn long_event_logs_drop_without_recursion() {
        let mut log = EventLog::default();
        for t in 0..200_000 {
            log.push(Event {
                tick: t,
                kind: EventKind::Spawn { kind: "x" },
                outcome: None,
            });
        }
        let shared = log.clone();
        drop(log);
        assert_eq!(shared.len(), 200_000);
    }
}
