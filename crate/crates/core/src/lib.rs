//! Living-lab online evaluation for academic search.
//!
//! A lab server sits between search sites and experimental systems. For each
//! user request it fetches a baseline and a candidate ranking, shows either
//! one of them (A/B) or a team-draft interleaving, records clicks and turns
//! them into per-candidate evaluation profiles.

pub mod campaign;
pub mod client;
pub mod clicksim;
pub mod config;
pub mod corpus;
pub mod evaluation;
pub mod interleave;
pub mod lab;
pub mod report;
pub mod rng;
pub mod site;
pub mod systems;
