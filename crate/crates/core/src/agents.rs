//! Sample planning controllers.
//!
//! Every algorithm is a pure function of the root state, a budget, the
//! agent's accumulated knowledge and a random stream. Simulated copies of the
//! root are reseeded from that stream so stochastic futures are sampled.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Action, Budget, EngineError, GameRng, GameState};
use crate::heuristics::{evaluate, evaluate_simple_state, HeuristicId, HeuristicParams, Knowledge};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("state is already terminal")]
    NotRunning,
    #[error("budget too small for a single decision")]
    BudgetExhausted,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    Random,
    Osla,
    Olmcts,
    Olets,
    Rhea,
    Rs,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Random,
        Algorithm::Osla,
        Algorithm::Olmcts,
        Algorithm::Olets,
        Algorithm::Rhea,
        Algorithm::Rs,
    ];

    /// Controller name as listed in the registry.
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Random => "sampleRandom",
            Algorithm::Osla => "sampleOneStepLookAhead",
            Algorithm::Olmcts => "sampleMCTS",
            Algorithm::Olets => "OLETS",
            Algorithm::Rhea => "sampleRHEA",
            Algorithm::Rs => "sampleRS",
        }
    }

    fn short(self) -> &'static str {
        match self {
            Algorithm::Random => "RANDOM",
            Algorithm::Osla => "OSLA",
            Algorithm::Olmcts => "OLMCTS",
            Algorithm::Olets => "OLETS",
            Algorithm::Rhea => "RHEA",
            Algorithm::Rs => "RS",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    /// Accepts registry names as well as the short forms (`OSLA`, `MCTS`, ...).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let found = Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s) || a.short().eq_ignore_ascii_case(s));
        match found {
            Some(a) => Ok(a),
            None if s.eq_ignore_ascii_case("MCTS") => Ok(Algorithm::Olmcts),
            None => Err(format!("unknown algorithm '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub heuristic: HeuristicId,
    /// Simulation depth: total path length for OLMCTS, tree depth for
    /// OLETS, individual length for RHEA and RS.
    pub rollout_length: usize,
    pub exploration_constant: f64,
    pub population_keep: usize,
    /// Genes mutated per offspring.
    pub mutation_rate: usize,
}

impl AgentConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        let (rollout_length, exploration_constant) = match algorithm {
            Algorithm::Olmcts => (10, std::f64::consts::SQRT_2),
            Algorithm::Olets => (5, 1.0),
            _ => (10, std::f64::consts::SQRT_2),
        };
        AgentConfig {
            algorithm,
            heuristic: HeuristicId::Wmh,
            rollout_length,
            exploration_constant,
            population_keep: 10,
            mutation_rate: 1,
        }
    }

    pub fn with_heuristic(mut self, heuristic: HeuristicId) -> Self {
        self.heuristic = heuristic;
        self
    }
}

/// An action recommendation with the value its producer assigned to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Opinion {
    pub action: Action,
    pub value: f64,
    pub algorithm: &'static str,
}

/// Read-only inputs shared by every evaluation of one decision.
#[derive(Debug, Clone, Copy)]
pub struct Context<'a> {
    pub knowledge: &'a Knowledge,
    pub params: &'a HeuristicParams,
}

/// Chooses an action for `state` with the configured algorithm.
pub fn decide(
    config: &AgentConfig,
    state: &GameState,
    budget: &mut Budget,
    ctx: Context<'_>,
    rng: &mut GameRng,
) -> Result<Opinion, AgentError> {
    if state.is_terminal() {
        return Err(AgentError::NotRunning);
    }
    match config.algorithm {
        Algorithm::Random => decide_random(state, rng),
        Algorithm::Osla => decide_osla(config, state, budget, ctx),
        Algorithm::Olmcts => decide_olmcts(config, state, budget, ctx, rng),
        Algorithm::Olets => decide_olets(config, state, budget, ctx, rng),
        Algorithm::Rhea => decide_rhea(config, state, budget, ctx, rng),
        Algorithm::Rs => decide_rs(config, state, budget, ctx, rng),
    }
}

struct Evaluator<'a> {
    heuristic: HeuristicId,
    root_tick: u32,
    ctx: Context<'a>,
}

impl Evaluator<'_> {
    fn value(&self, s: &GameState) -> f64 {
        evaluate(
            self.heuristic,
            &s.observe_since(self.root_tick),
            self.ctx.knowledge,
            self.ctx.params,
        )
    }
}

fn evaluator<'a>(config: &AgentConfig, state: &GameState, ctx: Context<'a>) -> Evaluator<'a> {
    Evaluator {
        heuristic: config.heuristic,
        root_tick: state.tick(),
        ctx,
    }
}

/// Copy of `state` with a fresh random stream.
fn sample(state: &GameState, rng: &mut GameRng) -> GameState {
    state.clone().with_seed(rng.next_u64())
}

fn fallback(state: &GameState, algorithm: Algorithm, rng: &mut GameRng) -> Opinion {
    let legal = state.legal_actions();
    Opinion {
        action: *legal.choose(rng).unwrap_or(&Action::Nil),
        value: 0.0,
        algorithm: algorithm.name(),
    }
}

/// Advances `s`, mapping an exhausted budget to `Ok(false)`.
fn charge(budget: &mut Budget, s: &mut GameState, action: Action) -> Result<bool, AgentError> {
    match budget.advance(s, action) {
        Ok(()) => Ok(true),
        Err(EngineError::BudgetExhausted) => Ok(false),
        Err(e) => Err(e.into()),
    }
}

pub fn decide_random(state: &GameState, rng: &mut GameRng) -> Result<Opinion, AgentError> {
    Ok(fallback(state, Algorithm::Random, rng))
}

/// Scores every legal action after one step and keeps the best.
///
/// With the default win/score heuristic the value also subtracts the distance
/// to the nearest portal.
pub fn decide_osla(
    config: &AgentConfig,
    state: &GameState,
    budget: &mut Budget,
    ctx: Context<'_>,
) -> Result<Opinion, AgentError> {
    let legal = state.legal_actions();
    if budget
        .remaining_calls()
        .is_some_and(|r| r < legal.len() as u64)
    {
        return Err(AgentError::BudgetExhausted);
    }
    let eval = evaluator(config, state, ctx);
    let mut best: Option<(Action, f64)> = None;
    for a in legal {
        let mut s = state.clone();
        if !charge(budget, &mut s, a)? {
            break;
        }
        let v = if config.heuristic == HeuristicId::Wmh {
            evaluate_simple_state(&s.observe_since(eval.root_tick), ctx.params)
        } else {
            eval.value(&s)
        };
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((a, v));
        }
    }
    let (action, value) = best.ok_or(AgentError::BudgetExhausted)?;
    Ok(Opinion {
        action,
        value,
        algorithm: Algorithm::Osla.name(),
    })
}

/// Open-loop tree node: statistics per action path, no stored state.
#[derive(Debug, Clone)]
struct Node {
    children: [Option<usize>; 6],
    visits: u32,
    total: f64,
    /// OLETS blended value.
    olets: f64,
}

impl Node {
    fn new() -> Self {
        Node {
            children: [None; 6],
            visits: 0,
            total: 0.0,
            olets: 0.0,
        }
    }

    fn mean(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.total / self.visits as f64
        }
    }
}

struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn new() -> Self {
        Tree {
            nodes: vec![Node::new()],
        }
    }

    fn child(&self, node: usize, a: Action) -> Option<usize> {
        self.nodes[node].children[a.index()]
    }

    fn add_child(&mut self, node: usize, a: Action) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::new());
        self.nodes[node].children[a.index()] = Some(id);
        id
    }

    fn untried(&self, node: usize, legal: &[Action]) -> Vec<Action> {
        legal
            .iter()
            .copied()
            .filter(|&a| self.child(node, a).is_none())
            .collect()
    }

    /// Most-visited root action; ties go to the lowest action.
    fn best_root(&self) -> Option<(Action, usize)> {
        let mut best: Option<(Action, usize)> = None;
        for a in Action::ALL {
            if let Some(c) = self.child(0, a) {
                let v = self.nodes[c].visits;
                if v > 0 && best.is_none_or(|(_, b)| v > self.nodes[b].visits) {
                    best = Some((a, c));
                }
            }
        }
        best
    }

    fn backup(&mut self, path: &[usize], value: f64) {
        for &n in path {
            self.nodes[n].visits += 1;
            self.nodes[n].total += value;
        }
    }
}

/// Tiny noise that breaks exact ties between tree-policy scores, so a flat
/// landscape does not always favour the first action.
fn jitter(rng: &mut GameRng) -> f64 {
    rng.gen::<f64>() * 1e-6
}

/// Running range of backed-up values.
#[derive(Debug, Clone, Copy)]
struct Bounds {
    min: f64,
    max: f64,
}

impl Bounds {
    fn new() -> Self {
        Bounds {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn include(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    fn normalize(&self, v: f64) -> f64 {
        if self.max > self.min {
            (v - self.min) / (self.max - self.min)
        } else {
            0.5
        }
    }
}

/// Open-loop UCT with uniform random rollouts.
pub fn decide_olmcts(
    config: &AgentConfig,
    state: &GameState,
    budget: &mut Budget,
    ctx: Context<'_>,
    rng: &mut GameRng,
) -> Result<Opinion, AgentError> {
    let eval = evaluator(config, state, ctx);
    let depth_limit = config.rollout_length.max(1);
    let c = config.exploration_constant;
    let mut tree = Tree::new();
    let mut bounds = Bounds::new();

    'search: while !budget.is_exhausted() {
        let mut s = sample(state, rng);
        let mut node = 0;
        let mut path = vec![0];
        let mut depth = 0;

        while !s.is_terminal() && depth < depth_limit {
            let legal = s.legal_actions();
            let untried = tree.untried(node, &legal);
            if let Some(&a) = untried.choose(rng) {
                node = tree.add_child(node, a);
                path.push(node);
                if !charge(budget, &mut s, a)? {
                    break 'search;
                }
                depth += 1;
                break;
            }
            let parent_visits = tree.nodes[node].visits.max(1) as f64;
            let mut pick: Option<(Action, usize, f64)> = None;
            for &a in &legal {
                let Some(ch) = tree.child(node, a) else {
                    continue;
                };
                let n = &tree.nodes[ch];
                let ucb = if n.visits == 0 {
                    f64::INFINITY
                } else {
                    bounds.normalize(n.mean())
                        + c * (parent_visits.ln() / n.visits as f64).sqrt()
                        + jitter(rng)
                };
                if pick.is_none_or(|(_, _, best)| ucb > best) {
                    pick = Some((a, ch, ucb));
                }
            }
            let (a, ch, _) = pick.expect("fully expanded node has children");
            node = ch;
            path.push(node);
            if !charge(budget, &mut s, a)? {
                break 'search;
            }
            depth += 1;
        }

        while !s.is_terminal() && depth < depth_limit {
            let legal = s.legal_actions();
            let a = *legal.choose(rng).expect("running state has actions");
            if !charge(budget, &mut s, a)? {
                break 'search;
            }
            depth += 1;
        }

        let v = eval.value(&s);
        bounds.include(v);
        tree.backup(&path, v);
    }

    Ok(match tree.best_root() {
        Some((action, c)) => Opinion {
            action,
            value: tree.nodes[c].mean(),
            algorithm: Algorithm::Olmcts.name(),
        },
        None => fallback(state, Algorithm::Olmcts, rng),
    })
}

/// Open-loop expectimax tree search: optimistic blended values, no rollouts.
pub fn decide_olets(
    config: &AgentConfig,
    state: &GameState,
    budget: &mut Budget,
    ctx: Context<'_>,
    rng: &mut GameRng,
) -> Result<Opinion, AgentError> {
    let eval = evaluator(config, state, ctx);
    let depth_limit = config.rollout_length.max(1);
    let c = config.exploration_constant;
    let mut tree = Tree::new();

    'search: while !budget.is_exhausted() {
        let mut s = sample(state, rng);
        let mut node = 0;
        let mut path = vec![0];
        let mut depth = 0;

        while !s.is_terminal() && depth < depth_limit {
            let legal = s.legal_actions();
            let untried = tree.untried(node, &legal);
            if let Some(&a) = untried.choose(rng) {
                node = tree.add_child(node, a);
                path.push(node);
                if !charge(budget, &mut s, a)? {
                    break 'search;
                }
                break;
            }
            let parent_visits = tree.nodes[node].visits.max(1) as f64;
            let mut pick: Option<(Action, usize, f64)> = None;
            for &a in &legal {
                let Some(ch) = tree.child(node, a) else {
                    continue;
                };
                let n = &tree.nodes[ch];
                let score = if n.visits == 0 {
                    f64::INFINITY
                } else {
                    n.olets + c * (parent_visits.ln() / n.visits as f64).sqrt() + jitter(rng)
                };
                if pick.is_none_or(|(_, _, best)| score > best) {
                    pick = Some((a, ch, score));
                }
            }
            let (a, ch, _) = pick.expect("fully expanded node has children");
            node = ch;
            path.push(node);
            if !charge(budget, &mut s, a)? {
                break 'search;
            }
            depth += 1;
        }

        let v = eval.value(&s);
        tree.backup(&path, v);
        for &n in path.iter().rev() {
            let kids: Vec<f64> = tree.nodes[n]
                .children
                .iter()
                .flatten()
                .filter(|&&ch| tree.nodes[ch].visits > 0)
                .map(|&ch| tree.nodes[ch].olets)
                .collect();
            let mean = tree.nodes[n].mean();
            tree.nodes[n].olets = match kids.iter().copied().reduce(f64::max) {
                Some(best) => {
                    let beta = kids.len() as f64 / (kids.len() as f64 + 1.0);
                    (1.0 - beta) * mean + beta * best
                }
                None => mean,
            };
        }
    }

    Ok(match tree.best_root() {
        Some((action, c)) => Opinion {
            action,
            value: tree.nodes[c].olets,
            algorithm: Algorithm::Olets.name(),
        },
        None => fallback(state, Algorithm::Olets, rng),
    })
}

/// Plays `genes` from a fresh sample of `state`; `None` if the budget ran out.
fn fitness(
    genes: &[Action],
    state: &GameState,
    budget: &mut Budget,
    eval: &Evaluator<'_>,
    rng: &mut GameRng,
) -> Result<Option<f64>, AgentError> {
    let mut s = sample(state, rng);
    for &a in genes {
        if s.is_terminal() {
            break;
        }
        if !charge(budget, &mut s, a)? {
            return Ok(None);
        }
    }
    Ok(Some(eval.value(&s)))
}

fn random_genes(actions: &[Action], len: usize, rng: &mut GameRng) -> Vec<Action> {
    (0..len)
        .map(|_| actions[rng.gen_range(0..actions.len())])
        .collect()
}

#[derive(Debug, Clone)]
struct Individual {
    genes: Vec<Action>,
    fitness: f64,
}

fn opinion_from(
    best: Option<&Individual>,
    state: &GameState,
    alg: Algorithm,
    rng: &mut GameRng,
) -> Opinion {
    match best {
        Some(ind) => Opinion {
            action: ind.genes[0],
            value: ind.fitness,
            algorithm: alg.name(),
        },
        None => fallback(state, alg, rng),
    }
}

/// Rolling-horizon evolution of fixed-length action sequences.
pub fn decide_rhea(
    config: &AgentConfig,
    state: &GameState,
    budget: &mut Budget,
    ctx: Context<'_>,
    rng: &mut GameRng,
) -> Result<Opinion, AgentError> {
    let eval = evaluator(config, state, ctx);
    let actions = state.legal_actions();
    let len = config.rollout_length.max(1);
    let keep = config.population_keep.max(1);
    let mut population: Vec<Individual> = Vec::with_capacity(2 * keep);

    'evolve: {
        for _ in 0..keep {
            let genes = random_genes(&actions, len, rng);
            match fitness(&genes, state, budget, &eval, rng)? {
                Some(f) => population.push(Individual { genes, fitness: f }),
                None => break 'evolve,
            }
        }
        while !budget.is_exhausted() {
            let mut offspring = Vec::with_capacity(keep);
            for _ in 0..keep {
                let p1 = tournament(&population, rng);
                let p2 = tournament(&population, rng);
                let mut genes: Vec<Action> = p1
                    .genes
                    .iter()
                    .zip(&p2.genes)
                    .map(|(&a, &b)| if rng.gen_bool(0.5) { a } else { b })
                    .collect();
                mutate(&mut genes, &actions, config.mutation_rate, rng);
                match fitness(&genes, state, budget, &eval, rng)? {
                    Some(f) => offspring.push(Individual { genes, fitness: f }),
                    None => break,
                }
            }
            // Offspring go first so the stable sort lets them replace equally fit parents.
            offspring.append(&mut population);
            population = offspring;
            population.sort_by(|a, b| b.fitness.total_cmp(&a.fitness));
            population.truncate(keep);
        }
    }

    let best = population
        .iter()
        .reduce(|a, b| if b.fitness > a.fitness { b } else { a });
    Ok(opinion_from(best, state, Algorithm::Rhea, rng))
}

fn tournament<'p>(population: &'p [Individual], rng: &mut GameRng) -> &'p Individual {
    let a = &population[rng.gen_range(0..population.len())];
    let b = &population[rng.gen_range(0..population.len())];
    if b.fitness > a.fitness {
        b
    } else {
        a
    }
}

/// Replaces `count` genes, each with a different action when one exists.
fn mutate(genes: &mut [Action], actions: &[Action], count: usize, rng: &mut GameRng) {
    for _ in 0..count {
        let i = rng.gen_range(0..genes.len());
        if actions.len() > 1 {
            let mut a = genes[i];
            while a == genes[i] {
                a = actions[rng.gen_range(0..actions.len())];
            }
            genes[i] = a;
        }
    }
}

/// Uniformly random action sequences; the best one seen wins.
pub fn decide_rs(
    config: &AgentConfig,
    state: &GameState,
    budget: &mut Budget,
    ctx: Context<'_>,
    rng: &mut GameRng,
) -> Result<Opinion, AgentError> {
    let eval = evaluator(config, state, ctx);
    let actions = state.legal_actions();
    let len = config.rollout_length.max(1);
    let mut best: Option<Individual> = None;
    while !budget.is_exhausted() {
        let genes = random_genes(&actions, len, rng);
        let Some(f) = fitness(&genes, state, budget, &eval, rng)? else {
            break;
        };
        if best.as_ref().is_none_or(|b| f > b.fitness) {
            best = Some(Individual { genes, fitness: f });
        }
    }
    Ok(opinion_from(best.as_ref(), state, Algorithm::Rs, rng))
}
