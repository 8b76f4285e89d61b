//! Adaptive stimulus selection for grid spellers, simulated end to end.
//!
//! A speller infers its user's intended character from noisy per-flash
//! classifier scores. This crate models that loop: a Bayesian posterior over
//! the grid with dynamic stopping ([`bayes`]), the expected discrimination
//! gain that scores candidate flash groups as a function of their flashed
//! probability mass ([`gain`]), selection paradigms from random row-column
//! presentation to greedy group construction under observation-delay and
//! refractory constraints ([`policy`]), and a seeded Monte Carlo harness
//! that compares paradigms across detectability levels ([`sim`]).
//!
//! Each major capability has a runnable walkthrough under `examples/`; the
//! `spellersim` binary drives full benchmark sweeps and writes CSV/JSON
//! results plus a baseline comparison report ([`cli`], [`report`]).

pub mod bayes;
pub mod cli;
pub mod error;
pub mod gain;
pub mod grid;
pub mod policy;
pub mod report;
pub mod sim;

pub use bayes::{
    posterior_update, select_character, LikelihoodModel, PosteriorState, StopDecision,
    StoppingRule,
};
pub use error::{Error, Result};
pub use gain::{expected_gain, kl_divergence, CurveCache, GainCurve, DEFAULT_CURVE_GRID};
pub use grid::{FlashGroup, GridLayout, RcClass};
pub use policy::{
    min_observed_tti, ConstraintTracker, OdPredictor, Paradigm, PolicyConfig, RcRandomSchedule,
};
pub use sim::{
    run_sweep, run_trial, sample_score, SweepCell, SweepPlan, SweepResult, TrialConfig,
    TrialResult,
};
