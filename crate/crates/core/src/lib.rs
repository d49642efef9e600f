//! Ensemble decision systems for general video game playing.
//!
//! * [`engine`]: deterministic grid-game forward model.
//! * [`games`]: six small arcade games with shipped levels.
//! * [`heuristics`]: win/score, exploration and knowledge-seeking evaluations.
//! * [`agents`]: random, one-step lookahead, open-loop MCTS, OLETS, RHEA, random search.
//! * [`ensemble`]: voices, arbitrators and action selection policies.
//! * [`registry`]: named controllers.
//! * [`harness`]: episodes, experiment grids, rankings.

pub mod agents;
pub mod engine;
pub mod ensemble;
pub mod games;
pub mod harness;
pub mod heuristics;
pub mod registry;
