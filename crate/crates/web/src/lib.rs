//! Browser bindings: step through an episode, play one to the end, compare controllers.
//!
//! Budgets are counted in forward-model calls; wall-clock budgets are not
//! available in the browser.

use std::fmt::Write as _;

use eds_core::engine::{Budget, GameState, Status};
use eds_core::games;
use eds_core::harness::{self, RunRecord};
use eds_core::registry::{self, Controller, Settings};
use wasm_bindgen::prelude::*;

fn settings(budget_calls: u32) -> Settings {
    Settings {
        budget: Budget::calls(u64::from(budget_calls.max(1))),
        ..Settings::default()
    }
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Registered controller names, one per line.
#[wasm_bindgen]
pub fn agent_names() -> String {
    registry::agent_names().join("\n")
}

/// Game names with their level counts, as `name:levels` lines.
#[wasm_bindgen]
pub fn game_names() -> String {
    games::GAMES
        .iter()
        .map(|g| format!("{g}:{}", games::level_count(g).unwrap_or(0)))
        .collect::<Vec<_>>()
        .join("\n")
}

/// One episode advanced a tick at a time.
#[wasm_bindgen]
pub struct Episode {
    state: GameState,
    controller: Box<dyn Controller>,
    last: String,
}

#[wasm_bindgen]
impl Episode {
    #[wasm_bindgen(constructor)]
    pub fn new(
        agent: &str,
        game: &str,
        level: usize,
        seed: u64,
        budget_calls: u32,
    ) -> Result<Episode, JsError> {
        let state = games::load(game, level, seed).map_err(js_err)?;
        let controller = registry::build(agent, &settings(budget_calls), seed).map_err(js_err)?;
        Ok(Episode {
            state,
            controller,
            last: String::new(),
        })
    }

    /// Plays one tick. Returns false once the episode is over.
    pub fn step(&mut self) -> Result<bool, JsError> {
        if self.state.is_terminal() {
            return Ok(false);
        }
        let d = self.controller.act(&self.state).map_err(js_err)?;
        let mut s = format!("tick {}: {}", self.state.tick(), d.action.name());
        if let Some(v) = &d.voice {
            let _ = write!(s, " from {v}");
        }
        for o in &d.opinions {
            let _ = write!(
                s,
                "\n  {:<10} {:<6} {:.3}",
                o.label,
                o.opinion.action.name(),
                o.opinion.value
            );
        }
        self.last = s;
        self.state.advance(d.action).map_err(js_err)?;
        Ok(!self.state.is_terminal())
    }

    /// Plays until the episode ends or `max_ticks` more ticks have passed.
    pub fn run(&mut self, max_ticks: u32) -> Result<bool, JsError> {
        for _ in 0..max_ticks {
            if !self.step()? {
                return Ok(false);
            }
        }
        Ok(!self.state.is_terminal())
    }

    pub fn render(&self) -> String {
        self.state.render()
    }

    /// The last action played and, for ensembles, every voice's opinion.
    pub fn last_decision(&self) -> String {
        self.last.clone()
    }

    pub fn status_line(&self) -> String {
        let status = match self.state.status() {
            Status::Running => "running",
            Status::Win => "won",
            Status::Lose => "lost",
        };
        format!(
            "tick {}  score {}  {status}",
            self.state.tick(),
            self.state.score()
        )
    }
}

/// Plays `runs` episodes of every listed controller (comma separated) on one
/// level with shared seeds and returns a small results table.
#[wasm_bindgen]
pub fn compare(
    agents: &str,
    game: &str,
    level: usize,
    runs: usize,
    budget_calls: u32,
) -> Result<String, JsError> {
    let settings = settings(budget_calls);
    let mut records: Vec<RunRecord> = Vec::new();
    for agent in agents.split(',').map(str::trim).filter(|a| !a.is_empty()) {
        for run in 0..runs.max(1) {
            let seed = harness::cell_seed(0, game, level, run);
            records.push(
                harness::run_episode(agent, game, level, run, seed, &settings).map_err(js_err)?,
            );
        }
    }
    let summary = harness::summarize(&records);
    let mut out = format!(
        "{:<24} {:>6} {:>10} {:>8}\n",
        "controller", "wins", "mean score", "ticks"
    );
    for agent in harness::agents_in(&records) {
        if let Some(s) = summary.stats(game, &agent) {
            let _ = writeln!(
                out,
                "{agent:<24} {:>3}/{:<2} {:>10.2} {:>8.1}",
                s.wins, s.runs, s.mean_score, s.mean_timesteps
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn episodes_step_to_the_end() {
        let mut e = Episode::new("OLETSExpSc", "invest", 0, 3, 50).ok().unwrap();
        assert!(e.render().contains('A'));
        e.step().ok().unwrap();
        assert!(e.last_decision().contains("OLETS+WMH"));
        while e.run(50).ok().unwrap() {}
        assert!(!e.status_line().contains("running"));
    }

    #[test]
    fn compare_lists_each_controller() {
        let t = compare(
            "sampleRandom, sampleOneStepLookAhead",
            "camelrace",
            0,
            2,
            20,
        )
        .ok()
        .unwrap();
        assert_eq!(t.lines().count(), 3);
        assert!(t.contains("sampleOneStepLookAhead"));
    }

    #[test]
    fn registries_are_listed() {
        assert_eq!(agent_names().lines().count(), 12);
        assert!(game_names().contains("invest:3"));
    }
}
