//! Named controllers: the six sample agents and the six ensembles.

use rand::SeedableRng;
use thiserror::Error;

use crate::agents::{decide, AgentConfig, AgentError, Algorithm, Context};
use crate::engine::{Action, Budget, GameRng, GameState};
use crate::ensemble::{make_variant, Eds, EnsembleError, VoiceOpinion, VARIANTS};
use crate::heuristics::{HeuristicParams, Knowledge};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegistryError {
    #[error("unknown agent '{name}'{}", suggestion_text(.suggestions))]
    UnknownAgent {
        name: String,
        suggestions: Vec<String>,
    },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

fn suggestion_text(s: &[String]) -> String {
    if s.is_empty() {
        String::new()
    } else {
        format!("; did you mean {}?", s.join(", "))
    }
}

/// Every registered controller name: sample agents first, then ensembles.
pub fn agent_names() -> Vec<&'static str> {
    Algorithm::ALL
        .iter()
        .map(|a| a.name())
        .chain(VARIANTS)
        .collect()
}

pub fn is_ensemble(name: &str) -> bool {
    VARIANTS.contains(&name)
}

/// Registered names closest to `name`, best first.
pub fn suggest(name: &str, candidates: &[&str]) -> Vec<String> {
    let lower = name.to_ascii_lowercase();
    let mut scored: Vec<(f64, &str)> = candidates
        .iter()
        .map(|c| (strsim::jaro_winkler(&lower, &c.to_ascii_lowercase()), *c))
        .filter(|(s, _)| *s >= 0.7)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored
        .into_iter()
        .take(3)
        .map(|(_, c)| c.to_string())
        .collect()
}

/// Inputs shared by every controller of an experiment.
#[derive(Debug, Clone)]
pub struct Settings {
    /// Per-tick budget; its unit and amount are copied for every decision.
    pub budget: Budget,
    pub params: HeuristicParams,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            budget: Budget::calls(1000),
            params: HeuristicParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: Action,
    /// Label of the voice whose opinion was played (ensembles only).
    pub voice: Option<String>,
    pub opinions: Vec<VoiceOpinion>,
}

/// Plays one episode, one call per tick.
pub trait Controller: Send {
    fn name(&self) -> &str;
    fn act(&mut self, state: &GameState) -> Result<Decision, AgentError>;
}

pub struct SampleController {
    config: AgentConfig,
    settings: Settings,
    knowledge: Option<Knowledge>,
    rng: GameRng,
}

impl SampleController {
    pub fn new(config: AgentConfig, settings: Settings, seed: u64) -> Self {
        SampleController {
            config,
            settings,
            knowledge: None,
            rng: GameRng::seed_from_u64(seed),
        }
    }
}

fn observe<'k>(slot: &'k mut Option<Knowledge>, state: &GameState) -> &'k Knowledge {
    let k = slot.get_or_insert_with(|| Knowledge::for_state(state));
    k.update(state);
    k
}

impl Controller for SampleController {
    fn name(&self) -> &str {
        self.config.algorithm.name()
    }

    fn act(&mut self, state: &GameState) -> Result<Decision, AgentError> {
        let knowledge = observe(&mut self.knowledge, state);
        let mut budget = self.settings.budget.split(self.settings.budget.amount());
        let ctx = Context {
            knowledge,
            params: &self.settings.params,
        };
        let o = decide(&self.config, state, &mut budget, ctx, &mut self.rng)?;
        Ok(Decision {
            action: o.action,
            voice: None,
            opinions: Vec::new(),
        })
    }
}

pub struct EdsController {
    eds: Eds,
    settings: Settings,
    knowledge: Option<Knowledge>,
    rng: GameRng,
}

impl EdsController {
    pub fn new(eds: Eds, settings: Settings, seed: u64) -> Self {
        EdsController {
            eds,
            settings,
            knowledge: None,
            rng: GameRng::seed_from_u64(seed),
        }
    }

    pub fn eds(&self) -> &Eds {
        &self.eds
    }
}

impl Controller for EdsController {
    fn name(&self) -> &str {
        &self.eds.config().name
    }

    fn act(&mut self, state: &GameState) -> Result<Decision, AgentError> {
        if state.is_terminal() {
            return Err(AgentError::NotRunning);
        }
        let knowledge = observe(&mut self.knowledge, state);
        let ctx = Context {
            knowledge,
            params: &self.settings.params,
        };
        let d = self
            .eds
            .decide(state, &self.settings.budget, ctx, &mut self.rng);
        let voice = d.chosen.map(|i| self.eds.config().voices[i].label());
        Ok(Decision {
            action: d.action,
            voice,
            opinions: d.opinions,
        })
    }
}

/// Builds the controller registered under `name`.
pub fn build(
    name: &str,
    settings: &Settings,
    seed: u64,
) -> Result<Box<dyn Controller>, RegistryError> {
    if let Some(alg) = Algorithm::ALL.into_iter().find(|a| a.name() == name) {
        return Ok(Box::new(SampleController::new(
            AgentConfig::new(alg),
            settings.clone(),
            seed,
        )));
    }
    if is_ensemble(name) {
        let mut config = make_variant(name)?;
        config.normalize = settings.params.normalize;
        return Ok(Box::new(EdsController::new(
            Eds::new(config)?,
            settings.clone(),
            seed,
        )));
    }
    Err(RegistryError::UnknownAgent {
        name: name.to_string(),
        suggestions: suggest(name, &agent_names()),
    })
}

/// Fails with suggestions unless `name` is registered.
pub fn check_agent(name: &str) -> Result<(), RegistryError> {
    if agent_names().contains(&name) {
        Ok(())
    } else {
        Err(RegistryError::UnknownAgent {
            name: name.to_string(),
            suggestions: suggest(name, &agent_names()),
        })
    }
}
