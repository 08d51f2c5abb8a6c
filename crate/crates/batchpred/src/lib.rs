//! Batch universal prediction for binary sources.
//!
//! A training set is `n` independent batches of `ell` bits each, drawn from
//! a memoryless Bernoulli source or a first-order Markov source. Predictors
//! assign probabilities to a fresh test batch of `ell` bits, and batch
//! regret is the expected excess log-loss (in nats) of a predictor relative
//! to the true source.
//!
//! The crate provides:
//! - add-constant (Krichevsky-Trofimov style) predictors and their naive
//!   baselines ([`predictors`]),
//! - exact regret evaluators (double sum, single sum, brute-force
//!   enumeration) for memoryless sources ([`regret_memoryless`]),
//! - Monte Carlo and brute-force evaluation of the initial/transition
//!   regret decomposition for Markov sources ([`regret_markov`]),
//! - reproducible sampling with a counter-based generator ([`rng`],
//!   [`sources`]),
//! - a CLI for experiment sweeps ([`cli`]).

pub mod cli;
pub mod predictors;
pub mod regret_markov;
pub mod regret_memoryless;
pub mod rng;
pub mod sources;
pub mod special;

/// Crate version, embedded in every output file header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
