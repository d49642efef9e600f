//! Ensemble decision systems.
//!
//! A set of voices (algorithm + heuristic pairs) each produce an [`Opinion`];
//! an arbitrator decides when and with how much budget each voice runs, and a
//! selection policy turns the collected opinions into the action played.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::agents::Opinion;
use crate::agents::{decide, AgentConfig, Algorithm, Context};
use crate::engine::{Action, Budget, GameRng, GameState};
use crate::heuristics::HeuristicId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnsembleError {
    #[error("no opinions to select from")]
    EmptyOpinions,
    #[error("unknown ensemble variant '{0}'")]
    UnknownVariant(String),
    #[error("an ensemble needs at least one enabled voice")]
    NoVoices,
    #[error("the diplomatic policy needs at least three voices, got {0}")]
    TooFewVoicesForDiplomatic(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arbitrator {
    /// Splits one tick's budget between all voices.
    Central,
    /// One voice per tick with the full budget, NIL until the cycle closes.
    Async,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Policy {
    HighestValue,
    Diplomatic,
    Random,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::HighestValue => "HighestValue",
            Policy::Diplomatic => "Diplomatic",
            Policy::Random => "Random",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Voice {
    pub agent: AgentConfig,
    pub heuristic: HeuristicId,
    pub enabled: bool,
}

impl Voice {
    pub fn new(algorithm: Algorithm, heuristic: HeuristicId) -> Self {
        Voice {
            agent: AgentConfig::new(algorithm).with_heuristic(heuristic),
            heuristic,
            enabled: true,
        }
    }

    /// Label such as `OLETS+WMH`.
    pub fn label(&self) -> String {
        let alg = match self.agent.algorithm {
            Algorithm::Olmcts => "MCTS",
            Algorithm::Olets => "OLETS",
            Algorithm::Rs => "RS",
            Algorithm::Rhea => "RHEA",
            Algorithm::Osla => "OSLA",
            Algorithm::Random => "Random",
        };
        format!("{alg}+{}", self.heuristic)
    }

    fn config(&self) -> AgentConfig {
        self.agent.with_heuristic(self.heuristic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdsConfig {
    pub name: String,
    pub voices: Vec<Voice>,
    pub arbitrator: Arbitrator,
    pub policy: Policy,
    /// Used when the diplomatic vote has no strict winner.
    pub fallback_policy: Policy,
    /// Rescale each voice's values by the range it has produced so far.
    pub normalize: bool,
}

impl EdsConfig {
    pub fn new(name: &str, voices: Vec<Voice>, arbitrator: Arbitrator, policy: Policy) -> Self {
        EdsConfig {
            name: name.to_string(),
            voices,
            arbitrator,
            policy,
            fallback_policy: Policy::Random,
            normalize: false,
        }
    }

    pub fn enabled_voices(&self) -> impl Iterator<Item = (usize, &Voice)> {
        self.voices.iter().enumerate().filter(|(_, v)| v.enabled)
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        let n = self.enabled_voices().count();
        if n == 0 {
            return Err(EnsembleError::NoVoices);
        }
        if self.policy == Policy::Diplomatic && n < 3 {
            return Err(EnsembleError::TooFewVoicesForDiplomatic(n));
        }
        Ok(())
    }
}

/// Names of the preconfigured ensembles.
pub const VARIANTS: [&str; 6] = [
    "BestFour",
    "BestFourDiplo",
    "BestExpSc",
    "MCTSExpSc",
    "OLETSExpSc",
    "OLETSExpScAsync",
];

pub fn make_variant(name: &str) -> Result<EdsConfig, EnsembleError> {
    use Algorithm::{Olets, Olmcts, Rs};
    use HeuristicId::{Emh, Kdh, Keh, Wmh};
    let best_four = || {
        vec![
            Voice::new(Olets, Wmh),
            Voice::new(Rs, Emh),
            Voice::new(Rs, Kdh),
            Voice::new(Olets, Keh),
        ]
    };
    let (voices, arbitrator, policy) = match name {
        "BestFour" => (best_four(), Arbitrator::Central, Policy::HighestValue),
        "BestFourDiplo" => (best_four(), Arbitrator::Central, Policy::Diplomatic),
        "BestExpSc" => (
            vec![Voice::new(Olets, Wmh), Voice::new(Rs, Emh)],
            Arbitrator::Central,
            Policy::HighestValue,
        ),
        "MCTSExpSc" => (
            vec![Voice::new(Olmcts, Wmh), Voice::new(Olmcts, Emh)],
            Arbitrator::Central,
            Policy::HighestValue,
        ),
        "OLETSExpSc" => (
            vec![Voice::new(Olets, Wmh), Voice::new(Olets, Emh)],
            Arbitrator::Central,
            Policy::HighestValue,
        ),
        "OLETSExpScAsync" => (
            vec![Voice::new(Olets, Wmh), Voice::new(Olets, Emh)],
            Arbitrator::Async,
            Policy::HighestValue,
        ),
        _ => return Err(EnsembleError::UnknownVariant(name.to_string())),
    };
    Ok(EdsConfig::new(name, voices, arbitrator, policy))
}

/// Index of the opinion the policy picks.
pub type Pick = usize;

/// Highest value wins; ties go to the earliest opinion.
pub fn select_highest_value(opinions: &[Opinion]) -> Result<Pick, EnsembleError> {
    let mut best: Option<Pick> = None;
    for (i, o) in opinions.iter().enumerate() {
        if best.is_none_or(|b| o.value > opinions[b].value) {
            best = Some(i);
        }
    }
    best.ok_or(EnsembleError::EmptyOpinions)
}

/// The action with strictly the most votes; otherwise `fallback` decides.
pub fn select_diplomatic(
    opinions: &[Opinion],
    fallback: Policy,
    rng: &mut GameRng,
) -> Result<Pick, EnsembleError> {
    if opinions.is_empty() {
        return Err(EnsembleError::EmptyOpinions);
    }
    let mut votes = [0usize; 6];
    for o in opinions {
        votes[o.action.index()] += 1;
    }
    let top = *votes.iter().max().unwrap_or(&0);
    let leaders: Vec<usize> = (0..6).filter(|&i| votes[i] == top).collect();
    if let [winner] = leaders[..] {
        let pick = opinions
            .iter()
            .position(|o| o.action.index() == winner)
            .unwrap_or(0);
        return Ok(pick);
    }
    match fallback {
        Policy::HighestValue => select_highest_value(opinions),
        Policy::Random | Policy::Diplomatic => select_random(opinions, rng),
    }
}

/// Uniform over opinions, so repeated actions are proportionally likelier.
pub fn select_random(opinions: &[Opinion], rng: &mut GameRng) -> Result<Pick, EnsembleError> {
    if opinions.is_empty() {
        return Err(EnsembleError::EmptyOpinions);
    }
    Ok(rng.gen_range(0..opinions.len()))
}

pub fn select(
    policy: Policy,
    fallback: Policy,
    opinions: &[Opinion],
    rng: &mut GameRng,
) -> Result<Pick, EnsembleError> {
    match policy {
        Policy::HighestValue => select_highest_value(opinions),
        Policy::Diplomatic => select_diplomatic(opinions, fallback, rng),
        Policy::Random => select_random(opinions, rng),
    }
}

/// Per-voice budget under central arbitration: an equal share minus one unit.
pub fn central_share(total: u64, voices: usize) -> u64 {
    (total / voices.max(1) as u64).saturating_sub(1)
}

/// One opinion together with the voice that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoiceOpinion {
    pub voice: usize,
    pub label: String,
    pub opinion: Opinion,
    /// Forward calls the voice spent.
    pub calls: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdsDecision {
    pub action: Action,
    /// Voice whose opinion was played, if any.
    pub chosen: Option<usize>,
    /// Opinions gathered for this tick (async: the whole cycle on closing ticks).
    pub opinions: Vec<VoiceOpinion>,
}

/// Running state of one ensemble over one episode.
#[derive(Debug, Clone)]
pub struct Eds {
    config: EdsConfig,
    cycle_pos: usize,
    stored: Vec<VoiceOpinion>,
    ranges: Vec<(f64, f64)>,
}

impl Eds {
    pub fn new(config: EdsConfig) -> Result<Self, EnsembleError> {
        config.validate()?;
        let n = config.voices.len();
        Ok(Eds {
            config,
            cycle_pos: 0,
            stored: Vec::new(),
            ranges: vec![(f64::INFINITY, f64::NEG_INFINITY); n],
        })
    }

    pub fn config(&self) -> &EdsConfig {
        &self.config
    }

    pub fn cycle_position(&self) -> usize {
        self.cycle_pos
    }

    /// Picks this tick's action. `total` carries the unit and the full per-tick amount.
    pub fn decide(
        &mut self,
        state: &GameState,
        total: &Budget,
        ctx: Context<'_>,
        rng: &mut GameRng,
    ) -> EdsDecision {
        match self.config.arbitrator {
            Arbitrator::Central => self.central(state, total, ctx, rng),
            Arbitrator::Async => self.asynchronous(state, total, ctx, rng),
        }
    }

    fn consult(
        &self,
        voice: usize,
        state: &GameState,
        budget: &mut Budget,
        ctx: Context<'_>,
        rng: &mut GameRng,
    ) -> Option<VoiceOpinion> {
        let v = &self.config.voices[voice];
        match decide(&v.config(), state, budget, ctx, rng) {
            Ok(opinion) => Some(VoiceOpinion {
                voice,
                label: v.label(),
                opinion,
                calls: budget.calls_made(),
            }),
            Err(e) => {
                log::debug!("voice {} failed: {e}", v.label());
                None
            }
        }
    }

    fn central(
        &mut self,
        state: &GameState,
        total: &Budget,
        ctx: Context<'_>,
        rng: &mut GameRng,
    ) -> EdsDecision {
        let active: Vec<usize> = self.config.enabled_voices().map(|(i, _)| i).collect();
        let share = central_share(total.amount(), active.len());
        let mut opinions = Vec::with_capacity(active.len());
        for i in active {
            let mut budget = total.split(share);
            if let Some(o) = self.consult(i, state, &mut budget, ctx, rng) {
                opinions.push(o);
            }
        }
        self.choose(opinions, rng)
    }

    fn asynchronous(
        &mut self,
        state: &GameState,
        total: &Budget,
        ctx: Context<'_>,
        rng: &mut GameRng,
    ) -> EdsDecision {
        let active: Vec<usize> = self.config.enabled_voices().map(|(i, _)| i).collect();
        let n = active.len();
        let voice = active[self.cycle_pos.min(n - 1)];
        let mut budget = total.split(total.amount());
        if let Some(o) = self.consult(voice, state, &mut budget, ctx, rng) {
            self.stored.push(o);
        }
        self.cycle_pos += 1;
        if self.cycle_pos < n {
            return EdsDecision {
                action: Action::Nil,
                chosen: None,
                opinions: Vec::new(),
            };
        }
        self.cycle_pos = 0;
        let mut opinions = std::mem::take(&mut self.stored);
        opinions.retain(|o| state.is_legal(o.opinion.action));
        self.choose(opinions, rng)
    }

    fn choose(&mut self, opinions: Vec<VoiceOpinion>, rng: &mut GameRng) -> EdsDecision {
        let mut scored: Vec<Opinion> = opinions.iter().map(|o| o.opinion).collect();
        if self.config.normalize {
            for (o, vo) in scored.iter_mut().zip(&opinions) {
                let r = &mut self.ranges[vo.voice];
                r.0 = r.0.min(o.value);
                r.1 = r.1.max(o.value);
                o.value = if r.1 > r.0 {
                    (o.value - r.0) / (r.1 - r.0)
                } else {
                    0.5
                };
            }
        }
        match select(
            self.config.policy,
            self.config.fallback_policy,
            &scored,
            rng,
        ) {
            Ok(i) => EdsDecision {
                action: scored[i].action,
                chosen: Some(opinions[i].voice),
                opinions,
            },
            Err(_) => EdsDecision {
                action: Action::Nil,
                chosen: None,
                opinions,
            },
        }
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "highestvalue" | "highest_value" => Ok(Policy::HighestValue),
            "diplomatic" => Ok(Policy::Diplomatic),
            "random" => Ok(Policy::Random),
            _ => Err(format!("unknown policy '{s}'")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn op(action: Action, value: f64) -> Opinion {
        Opinion {
            action,
            value,
            algorithm: "test",
        }
    }

    #[test]
    fn highest_value_examples() {
        let o = [op(Action::Up, 3.0), op(Action::Left, 7.5)];
        assert_eq!(o[select_highest_value(&o).unwrap()].action, Action::Left);
        let tie = [op(Action::Up, 5.0), op(Action::Down, 5.0)];
        assert_eq!(select_highest_value(&tie).unwrap(), 0);
        assert_eq!(select_highest_value(&[]), Err(EnsembleError::EmptyOpinions));
    }

    #[test]
    fn diplomatic_examples() {
        let mut rng = GameRng::seed_from_u64(1);
        let plural = [
            op(Action::Up, 0.0),
            op(Action::Up, 0.0),
            op(Action::Left, 9.0),
        ];
        assert_eq!(
            plural[select_diplomatic(&plural, Policy::Random, &mut rng).unwrap()].action,
            Action::Up
        );
        let split = [
            op(Action::Up, 0.0),
            op(Action::Up, 0.0),
            op(Action::Left, 1.0),
            op(Action::Left, 2.0),
        ];
        assert_eq!(
            select_diplomatic(&split, Policy::HighestValue, &mut rng).unwrap(),
            3
        );
        let distinct = [
            op(Action::Up, 4.0),
            op(Action::Down, 1.0),
            op(Action::Left, 2.0),
        ];
        assert_eq!(
            select_diplomatic(&distinct, Policy::HighestValue, &mut rng).unwrap(),
            0
        );
    }

    #[test]
    fn variants_match_their_bindings() {
        let diplo = make_variant("BestFourDiplo").unwrap();
        assert_eq!(diplo.voices.len(), 4);
        assert_eq!(diplo.policy, Policy::Diplomatic);
        assert_eq!(
            make_variant("OLETSExpScAsync").unwrap().arbitrator,
            Arbitrator::Async
        );
        let mcts = make_variant("MCTSExpSc").unwrap();
        assert!(mcts
            .voices
            .iter()
            .all(|v| v.agent.algorithm == Algorithm::Olmcts));
        let labels: Vec<String> = make_variant("BestFour")
            .unwrap()
            .voices
            .iter()
            .map(Voice::label)
            .collect();
        assert_eq!(labels, ["OLETS+WMH", "RS+EMH", "RS+KDH", "OLETS+KEH"]);
        for v in VARIANTS {
            make_variant(v).unwrap().validate().unwrap();
        }
        assert!(matches!(
            make_variant("BestFive"),
            Err(EnsembleError::UnknownVariant(_))
        ));
    }

    #[test]
    fn diplomatic_requires_three_voices() {
        let mut c = make_variant("BestExpSc").unwrap();
        c.policy = Policy::Diplomatic;
        assert_eq!(
            c.validate(),
            Err(EnsembleError::TooFewVoicesForDiplomatic(2))
        );
        c.voices.iter_mut().for_each(|v| v.enabled = false);
        assert_eq!(c.validate(), Err(EnsembleError::NoVoices));
    }

    #[test]
    fn central_share_leaves_a_margin() {
        assert_eq!(central_share(40, 4), 9);
        assert_eq!(central_share(1000, 2), 499);
        assert_eq!(central_share(1000, 1), 999);
        assert_eq!(central_share(0, 3), 0);
    }
}
