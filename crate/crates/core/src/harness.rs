//! Experiment execution and analysis.
//!
//! Episodes produce [`RunRecord`]s, which are streamed to an append-only CSV
//! file. Every table (win rates, normalised scores, F1 points) is recomputed
//! from records alone.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::engine::{Action, Budget, BudgetUnit, Status};
use crate::games::{self, GameError};
use crate::heuristics::HeuristicParams;
use crate::registry::{self, RegistryError, Settings};

/// Seed offset applied on every retry of a crashed episode.
pub const RETRY_SEED_OFFSET: u64 = 1_000_000;
pub const MAX_RETRIES: u32 = 3;
/// Points for positions 1 to 11; later positions get nothing.
pub const F1_POINTS: [u32; 11] = [25, 18, 15, 12, 10, 8, 6, 4, 2, 1, 0];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("no records to analyse")]
    EmptyRecords,
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One completed episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub agent: String,
    pub game: String,
    pub level: usize,
    pub run: usize,
    pub seed: u64,
    pub score: f64,
    #[serde(serialize_with = "bool_as_digit", deserialize_with = "digit_as_bool")]
    pub win: bool,
    pub timesteps: u32,
}

fn bool_as_digit<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u8(u8::from(*v))
}

fn digit_as_bool<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    match u8::deserialize(d)? {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(serde::de::Error::custom(format!(
            "win must be 0 or 1, got {other}"
        ))),
    }
}

impl RunRecord {
    pub fn key(&self) -> CellKey {
        (self.agent.clone(), self.game.clone(), self.level, self.run)
    }
}

/// Column order of the results file.
pub const HEADER: [&str; 8] = [
    "agent",
    "game",
    "level",
    "run",
    "seed",
    "score",
    "win",
    "timesteps",
];

/// (agent, game, level, run)
pub type CellKey = (String, String, usize, usize);

/// One tick as seen by a trace consumer.
#[derive(Debug, Clone, PartialEq)]
pub struct TickTrace {
    /// Tick at which the action was chosen.
    pub tick: u32,
    pub action: Action,
    /// Score after the action.
    pub score: f64,
    pub voice: Option<String>,
}

/// Plays one episode and reports every tick to `on_tick`.
///
/// Errors and panics inside the controller count as crashes: the episode is
/// replayed with the seed shifted by [`RETRY_SEED_OFFSET`], at most
/// [`MAX_RETRIES`] times, and then recorded as a loss with score 0.
pub fn run_episode_traced(
    agent: &str,
    game: &str,
    level: usize,
    run: usize,
    seed: u64,
    settings: &Settings,
    on_tick: &mut dyn FnMut(&TickTrace),
) -> Result<RunRecord, HarnessError> {
    registry::check_agent(agent)?;
    games::load(game, level, seed)?;
    let mut attempt_seed = seed;
    for attempt in 0..=MAX_RETRIES {
        let mut ticks = Vec::new();
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            play(agent, game, level, attempt_seed, settings, &mut ticks)
        }));
        match outcome {
            Ok(Ok((score, status, timesteps))) => {
                ticks.iter().for_each(&mut *on_tick);
                return Ok(RunRecord {
                    agent: agent.to_string(),
                    game: game.to_string(),
                    level,
                    run,
                    seed: attempt_seed,
                    score,
                    win: status == Status::Win,
                    timesteps,
                });
            }
            Ok(Err(e)) => log::warn!(
                "{agent} crashed on {game} lvl{level} seed {attempt_seed} (attempt {attempt}): {e}"
            ),
            Err(_) => log::warn!(
                "{agent} panicked on {game} lvl{level} seed {attempt_seed} (attempt {attempt})"
            ),
        }
        attempt_seed = attempt_seed.wrapping_add(RETRY_SEED_OFFSET);
    }
    log::warn!("{agent} on {game} lvl{level} run {run}: recorded as crashed loss");
    Ok(RunRecord {
        agent: agent.to_string(),
        game: game.to_string(),
        level,
        run,
        seed,
        score: 0.0,
        win: false,
        timesteps: 0,
    })
}

pub fn run_episode(
    agent: &str,
    game: &str,
    level: usize,
    run: usize,
    seed: u64,
    settings: &Settings,
) -> Result<RunRecord, HarnessError> {
    run_episode_traced(agent, game, level, run, seed, settings, &mut |_| {})
}

fn play(
    agent: &str,
    game: &str,
    level: usize,
    seed: u64,
    settings: &Settings,
    ticks: &mut Vec<TickTrace>,
) -> Result<(f64, Status, u32), String> {
    let mut state = games::load(game, level, seed).map_err(|e| e.to_string())?;
    let mut controller =
        registry::build(agent, settings, mix(seed, 0xA6E7)).map_err(|e| e.to_string())?;
    while !state.is_terminal() {
        let tick = state.tick();
        let d = controller.act(&state).map_err(|e| e.to_string())?;
        state.advance(d.action).map_err(|e| e.to_string())?;
        ticks.push(TickTrace {
            tick,
            action: d.action,
            score: state.score(),
            voice: d.voice,
        });
    }
    Ok((state.score(), state.status(), state.tick()))
}

/// SplitMix64 finaliser over a combined word.
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one grid cell. It does not depend on the agent, so every agent
/// faces the same random game dynamics.
pub fn cell_seed(base: u64, game: &str, level: usize, run: usize) -> u64 {
    let g = game.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    });
    mix(mix(mix(base, g), level as u64), run as u64) >> 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub agents: Vec<String>,
    pub games: Vec<String>,
    /// Levels to play; `None` plays every shipped level.
    pub levels: Option<Vec<usize>>,
    pub repeats: usize,
    pub budget_unit: BudgetUnit,
    pub budget_amount: u64,
    pub params: HeuristicParams,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            agents: Vec::new(),
            games: games::GAMES.iter().map(|g| g.to_string()).collect(),
            levels: None,
            repeats: 30,
            budget_unit: BudgetUnit::ForwardCalls,
            budget_amount: 1000,
            params: HeuristicParams::default(),
            seed: 0,
        }
    }
}

fn list(v: &str) -> Vec<String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    ///
    /// Keys: agents, games, levels, repeats, budget_unit (calls|ms),
    /// budget, seed, huge_win, kdh_weights, normalize.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut c = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| HarnessError::Config { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got '{content}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| {
                v.parse::<u64>()
                    .map_err(|_| err(format!("'{v}' is not a non-negative integer")))
            };
            let real = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| err(format!("'{v}' is not a number")))
            };
            match key {
                "agents" => {
                    c.agents = list(value);
                    for a in &c.agents {
                        registry::check_agent(a).map_err(|e| err(e.to_string()))?;
                    }
                }
                "games" => {
                    c.games = list(value);
                    for g in &c.games {
                        games::spec(g).map_err(|e| err(e.to_string()))?;
                    }
                }
                "levels" => {
                    c.levels = Some(
                        list(value)
                            .iter()
                            .map(|v| num(v).map(|n| n as usize))
                            .collect::<Result<_, _>>()?,
                    )
                }
                "repeats" => c.repeats = num(value)? as usize,
                "budget" => c.budget_amount = num(value)?,
                "budget_unit" => {
                    c.budget_unit = match value {
                        "calls" | "forward_calls" => BudgetUnit::ForwardCalls,
                        "ms" | "millis" => BudgetUnit::Millis,
                        _ => {
                            return Err(err(format!(
                                "budget_unit must be calls or ms, got '{value}'"
                            )))
                        }
                    }
                }
                "seed" => c.seed = num(value)?,
                "huge_win" => c.params.huge_win = real(value)?,
                "kdh_weights" => {
                    let w = list(value)
                        .iter()
                        .map(|v| real(v))
                        .collect::<Result<Vec<_>, _>>()?;
                    c.params.kdh_weights = w
                        .try_into()
                        .map_err(|_| err("kdh_weights needs exactly three numbers".to_string()))?;
                }
                "normalize" => {
                    c.params.normalize = value.parse().map_err(|_| {
                        err(format!("normalize must be true or false, got '{value}'"))
                    })?
                }
                _ => return Err(err(format!("unknown key '{key}'"))),
            }
        }
        if c.agents.is_empty() {
            return Err(HarnessError::Config {
                line: 0,
                message: "no agents listed".into(),
            });
        }
        if c.repeats == 0 {
            return Err(HarnessError::Config {
                line: 0,
                message: "repeats must be positive".into(),
            });
        }
        Ok(c)
    }

    pub fn settings(&self) -> Settings {
        Settings {
            budget: Budget::new(self.budget_unit, self.budget_amount),
            params: self.params,
        }
    }

    /// Every (agent, game, level, run) cell, in deterministic order.
    pub fn cells(&self) -> Result<Vec<CellKey>, HarnessError> {
        let mut out = Vec::new();
        for game in &self.games {
            let count = games::level_count(game)?;
            let levels: Vec<usize> = match &self.levels {
                Some(l) => l.iter().copied().filter(|&x| x < count).collect(),
                None => (0..count).collect(),
            };
            for &level in &levels {
                for run in 0..self.repeats {
                    for agent in &self.agents {
                        out.push((agent.clone(), game.clone(), level, run));
                    }
                }
            }
        }
        Ok(out)
    }
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize()
        .map(|r| r.map_err(HarnessError::from))
        .collect()
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn has_content(path: &Path) -> io::Result<bool> {
    match File::open(path) {
        Ok(f) => Ok(io::BufReader::new(f).lines().next().is_some()),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(false),
        Err(e) => Err(e),
    }
}

/// Runs every cell missing from `out` and appends its record as soon as it
/// completes. Returns all records in the file afterwards.
pub fn run_experiment(
    config: &ExperimentConfig,
    out: &Path,
    workers: usize,
    progress: &(dyn Fn(usize, usize, &RunRecord) + Sync),
) -> Result<Vec<RunRecord>, HarnessError> {
    let existing = if has_content(out)? {
        read_records(out)?
    } else {
        Vec::new()
    };
    let done: HashSet<CellKey> = existing.iter().map(RunRecord::key).collect();
    let todo: Vec<CellKey> = config
        .cells()?
        .into_iter()
        .filter(|k| !done.contains(k))
        .collect();

    let needs_header = !has_content(out)?;
    let file = OpenOptions::new().create(true).append(true).open(out)?;
    let mut sink = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file);
    if needs_header {
        sink.write_record(HEADER)?;
        sink.flush()?;
    }
    let writer = Mutex::new(sink);
    let settings = config.settings();
    let next = AtomicUsize::new(0);
    let finished = AtomicUsize::new(0);
    let failure: Mutex<Option<HarnessError>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(todo.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((agent, game, level, run)) = todo.get(i) else {
                    break;
                };
                if failure.lock().map(|f| f.is_some()).unwrap_or(true) {
                    break;
                }
                let seed = cell_seed(config.seed, game, *level, *run);
                let result =
                    run_episode(agent, game, *level, *run, seed, &settings).and_then(|rec| {
                        let mut w = writer.lock().expect("record sink poisoned");
                        w.serialize(&rec)?;
                        w.flush()?;
                        Ok(rec)
                    });
                match result {
                    Ok(rec) => {
                        let n = finished.fetch_add(1, Ordering::SeqCst) + 1;
                        progress(n, todo.len(), &rec);
                    }
                    Err(e) => {
                        if let Ok(mut f) = failure.lock() {
                            f.get_or_insert(e);
                        }
                        break;
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().ok().flatten() {
        return Err(e);
    }
    drop(writer);
    read_records(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct AgentGameStats {
    pub runs: usize,
    pub wins: usize,
    pub win_pct: f64,
    pub mean_score: f64,
    pub mean_timesteps: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    /// game -> agent -> stats
    pub games: BTreeMap<String, BTreeMap<String, AgentGameStats>>,
    /// Games with at least one win, per agent.
    pub unique_games_won: BTreeMap<String, usize>,
    /// Win percentage over all of an agent's runs.
    pub total_win_pct: BTreeMap<String, f64>,
}

impl Summary {
    pub fn agents(&self) -> Vec<String> {
        self.total_win_pct.keys().cloned().collect()
    }

    pub fn stats(&self, game: &str, agent: &str) -> Option<&AgentGameStats> {
        self.games.get(game).and_then(|g| g.get(agent))
    }
}

pub fn summarize(records: &[RunRecord]) -> Summary {
    #[derive(Default)]
    struct Acc {
        runs: usize,
        wins: usize,
        score: f64,
        steps: f64,
    }
    let mut acc: BTreeMap<(String, String), Acc> = BTreeMap::new();
    for r in records {
        let a = acc.entry((r.game.clone(), r.agent.clone())).or_default();
        a.runs += 1;
        a.wins += usize::from(r.win);
        a.score += r.score;
        a.steps += r.timesteps as f64;
    }
    let mut s = Summary::default();
    let mut totals: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for ((game, agent), a) in acc {
        let n = a.runs as f64;
        let stats = AgentGameStats {
            runs: a.runs,
            wins: a.wins,
            win_pct: 100.0 * a.wins as f64 / n,
            mean_score: a.score / n,
            mean_timesteps: a.steps / n,
        };
        let t = totals.entry(agent.clone()).or_default();
        t.0 += a.wins;
        t.1 += a.runs;
        *s.unique_games_won.entry(agent.clone()).or_default() += usize::from(a.wins > 0);
        s.games.entry(game).or_default().insert(agent, stats);
    }
    s.total_win_pct = totals
        .into_iter()
        .map(|(a, (w, n))| (a, 100.0 * w as f64 / n as f64))
        .collect();
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct F1Row {
    pub rank: usize,
    pub agent: String,
    pub points: u32,
    pub win_pct: f64,
    pub games_won: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct F1Result {
    /// Sorted by rank.
    pub rows: Vec<F1Row>,
    /// game -> agent -> points
    pub per_game: BTreeMap<String, BTreeMap<String, u32>>,
    /// Groups of agents that tied on every criterion in a game.
    pub ties: Vec<(String, Vec<String>)>,
}

impl F1Result {
    pub fn points(&self, agent: &str) -> Option<u32> {
        self.rows
            .iter()
            .find(|r| r.agent == agent)
            .map(|r| r.points)
    }
}

/// Formula-1 style ranking. Per game agents are ordered by wins, then mean
/// score, then fewer mean timesteps; a group tied on all three shares the
/// points of its best position.
pub fn f1_rank(records: &[RunRecord]) -> Result<F1Result, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyRecords);
    }
    let summary = summarize(records);
    let mut result = F1Result::default();
    let mut totals: BTreeMap<String, u32> = summary.agents().into_iter().map(|a| (a, 0)).collect();
    for (game, agents) in &summary.games {
        let mut order: Vec<(&String, &AgentGameStats)> = agents.iter().collect();
        let cmp = |a: &AgentGameStats, b: &AgentGameStats| {
            b.wins
                .cmp(&a.wins)
                .then(b.mean_score.total_cmp(&a.mean_score))
                .then(a.mean_timesteps.total_cmp(&b.mean_timesteps))
        };
        order.sort_by(|a, b| cmp(a.1, b.1).then(a.0.cmp(b.0)));
        let points = result.per_game.entry(game.clone()).or_default();
        let mut pos = 0;
        while pos < order.len() {
            let mut end = pos + 1;
            while end < order.len() && cmp(order[pos].1, order[end].1).is_eq() {
                end += 1;
            }
            let p = F1_POINTS.get(pos).copied().unwrap_or(0);
            for (agent, _) in &order[pos..end] {
                points.insert((*agent).clone(), p);
                *totals.get_mut(*agent).expect("agent listed") += p;
            }
            if end - pos > 1 {
                result.ties.push((
                    game.clone(),
                    order[pos..end].iter().map(|(a, _)| (*a).clone()).collect(),
                ));
            }
            pos = end;
        }
    }
    let mut rows: Vec<F1Row> = totals
        .into_iter()
        .map(|(agent, points)| F1Row {
            rank: 0,
            win_pct: summary.total_win_pct[&agent],
            games_won: summary.unique_games_won[&agent],
            agent,
            points,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.points
            .cmp(&a.points)
            .then(b.win_pct.total_cmp(&a.win_pct))
            .then(a.agent.cmp(&b.agent))
    });
    for i in 0..rows.len() {
        rows[i].rank = if i > 0 && rows[i].points == rows[i - 1].points {
            rows[i - 1].rank
        } else {
            i + 1
        };
    }
    result.rows = rows;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NormalizedScores {
    /// game -> agent -> value in [0, 1]
    pub values: BTreeMap<String, BTreeMap<String, f64>>,
    /// Games where every agent had the same mean score (all mapped to 0).
    pub degenerate: Vec<String>,
}

/// Per game, min-max rescaling of each agent's mean score.
pub fn normalize_scores(records: &[RunRecord]) -> NormalizedScores {
    let summary = summarize(records);
    let mut out = NormalizedScores::default();
    for (game, agents) in &summary.games {
        let means: Vec<f64> = agents.values().map(|s| s.mean_score).collect();
        let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Means that differ only by rounding count as equal.
        let degenerate = hi - lo <= 1e-9 * hi.abs().max(lo.abs()).max(1.0);
        if degenerate {
            log::info!("{game}: all agents share the same mean score; normalised to 0");
            out.degenerate.push(game.clone());
        }
        let row = agents
            .iter()
            .map(|(a, s)| {
                (
                    a.clone(),
                    if degenerate {
                        0.0
                    } else {
                        (s.mean_score - lo) / (hi - lo)
                    },
                )
            })
            .collect();
        out.values.insert(game.clone(), row);
    }
    out
}

/// Game x agent table ready for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl Matrix {
    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["game".to_string()];
        header.extend(self.cols.iter().cloned());
        w.write_record(&header)?;
        for (r, row) in self.rows.iter().zip(&self.values) {
            let mut line = vec![r.clone()];
            line.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&line)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rows ordered from the game with the highest mean win rate to the lowest;
/// columns follow `agents`.
fn matrix(summary: &Summary, agents: &[String], cell: impl Fn(&str, &str) -> f64) -> Matrix {
    let mut rows: Vec<(String, f64)> = summary
        .games
        .iter()
        .map(|(g, a)| {
            (
                g.clone(),
                a.values().map(|s| s.win_pct).sum::<f64>() / a.len().max(1) as f64,
            )
        })
        .collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let values = rows
        .iter()
        .map(|(g, _)| agents.iter().map(|a| cell(g, a)).collect())
        .collect();
    Matrix {
        rows: rows.into_iter().map(|(g, _)| g).collect(),
        cols: agents.to_vec(),
        values,
    }
}

pub fn win_matrix(summary: &Summary, agents: &[String]) -> Matrix {
    matrix(summary, agents, |g, a| {
        summary.stats(g, a).map_or(0.0, |s| s.win_pct)
    })
}

pub fn score_matrix(summary: &Summary, normalized: &NormalizedScores, agents: &[String]) -> Matrix {
    matrix(summary, agents, |g, a| {
        normalized
            .values
            .get(g)
            .and_then(|m| m.get(a))
            .copied()
            .unwrap_or(0.0)
    })
}

/// Distinct agents in first-seen order.
pub fn agents_in(records: &[RunRecord]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    records
        .iter()
        .filter(|r| seen.insert(r.agent.clone()))
        .map(|r| r.agent.clone())
        .collect()
}
