//! Stimulus-selection policies and presentation constraints.
//!
//! Three paradigms are implemented. `rc-random` presents rows and columns
//! in shuffled without-replacement blocks. `rc-adaptive` scores the same 17
//! groups by expected gain and flashes the best. `greedy-adaptive` builds a
//! group from scratch: characters are taken in descending posterior order
//! until the flashed mass would pass the curve's optimum, and the bracketing
//! prefix groups are compared by gain.
//!
//! Two real-time constraints shape selection. An observation delay of
//! `delta` means a flash's score only arrives after `delta` further
//! presentations, so selection runs on a posterior *predicted* across the
//! pending flashes. A minimum target-to-target interval suppresses
//! characters flashed within the last `tti_min - 1` stimulus events.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bayes::{posterior_update, LikelihoodModel};
use crate::error::{Error, Result};
use crate::gain::GainCurve;
use crate::grid::{FlashGroup, GridLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Paradigm {
    RcRandom,
    RcAdaptive,
    GreedyAdaptive,
}

impl Paradigm {
    pub const ALL: [Paradigm; 3] = [Paradigm::RcRandom, Paradigm::RcAdaptive, Paradigm::GreedyAdaptive];

    pub fn as_str(&self) -> &'static str {
        match self {
            Paradigm::RcRandom => "rc-random",
            Paradigm::RcAdaptive => "rc-adaptive",
            Paradigm::GreedyAdaptive => "greedy-adaptive",
        }
    }

    /// Stable tag used when deriving per-condition random streams.
    pub fn tag(&self) -> u64 {
        match self {
            Paradigm::RcRandom => 0,
            Paradigm::RcAdaptive => 1,
            Paradigm::GreedyAdaptive => 2,
        }
    }
}

impl fmt::Display for Paradigm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Paradigm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rc-random" => Ok(Paradigm::RcRandom),
            "rc-adaptive" => Ok(Paradigm::RcAdaptive),
            "greedy-adaptive" => Ok(Paradigm::GreedyAdaptive),
            other => Err(Error::InvalidInput(format!(
                "unknown paradigm '{other}' (expected rc-random, rc-adaptive or greedy-adaptive)"
            ))),
        }
    }
}

/// How the posterior is rolled forward across unscored pending flashes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OdPredictor {
    /// Apply a Bayesian update per pending flash at the expected score
    /// `z = P1*mu1 + (1-P1)*mu0`.
    PseudoUpdate,
    /// Use the confirmed posterior as-is.
    FrozenPosterior,
}

impl OdPredictor {
    pub fn as_str(&self) -> &'static str {
        match self {
            OdPredictor::PseudoUpdate => "pseudo-update",
            OdPredictor::FrozenPosterior => "frozen-posterior",
        }
    }
}

impl fmt::Display for OdPredictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OdPredictor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pseudo-update" => Ok(OdPredictor::PseudoUpdate),
            "frozen-posterior" => Ok(OdPredictor::FrozenPosterior),
            other => Err(Error::InvalidInput(format!(
                "unknown od predictor '{other}' (expected pseudo-update or frozen-posterior)"
            ))),
        }
    }
}

/// Paradigm plus the constraint parameters it runs under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub paradigm: Paradigm,
    /// Largest group the greedy construction may emit.
    pub max_flash_size: usize,
    /// Number of further presentations before a flash's score arrives.
    pub observation_delay: usize,
    /// Minimum stimulus events between two presentations of one character;
    /// 1 means unrestricted.
    pub tti_min: usize,
    pub od_predictor: OdPredictor,
}

impl PolicyConfig {
    pub fn new(paradigm: Paradigm) -> Self {
        Self {
            paradigm,
            max_flash_size: 9,
            observation_delay: 0,
            tti_min: 1,
            od_predictor: OdPredictor::PseudoUpdate,
        }
    }

    pub fn validate(&self, grid: &GridLayout) -> Result<()> {
        let m = grid.char_count();
        if self.max_flash_size == 0 || self.max_flash_size > m {
            return Err(Error::InvalidInput(format!(
                "max flash size must lie in 1..={m}, got {}",
                self.max_flash_size
            )));
        }
        if self.tti_min < 1 {
            return Err(Error::InvalidInput("tti-min must be at least 1".into()));
        }
        if self.paradigm == Paradigm::GreedyAdaptive {
            // The TTI window can block at most (tti_min-1)*max_flash_size
            // characters; at least one must stay eligible.
            let blocked_cap = (self.tti_min - 1) * self.max_flash_size;
            if blocked_cap >= m {
                return Err(Error::InvalidInput(format!(
                    "tti-min {} with flash size {} can exhaust all {m} characters",
                    self.tti_min, self.max_flash_size
                )));
            }
        }
        Ok(())
    }
}

/// Sliding presentation state: the recent-flash window that enforces the
/// minimum TTI, and the queue of presented-but-unscored flashes.
#[derive(Debug, Clone)]
pub struct ConstraintTracker {
    window: usize,
    recent: VecDeque<FlashGroup>,
    pending: VecDeque<FlashGroup>,
    blocked: Vec<u32>,
}

impl ConstraintTracker {
    pub fn new(char_count: usize, tti_min: usize) -> Self {
        assert!(tti_min >= 1, "tti_min must be at least 1");
        Self {
            window: tti_min - 1,
            recent: VecDeque::new(),
            pending: VecDeque::new(),
            blocked: vec![0; char_count],
        }
    }

    /// Record a presentation: enters the TTI window (evicting the oldest
    /// entry beyond `tti_min - 1`) and the pending-score queue.
    pub fn record_presentation(&mut self, flash: &FlashGroup) {
        if self.window > 0 {
            if self.recent.len() == self.window {
                let old = self.recent.pop_front().expect("window is nonempty");
                for i in old.members() {
                    self.blocked[i] -= 1;
                }
            }
            for i in flash.members() {
                self.blocked[i] += 1;
            }
            self.recent.push_back(flash.clone());
        }
        self.pending.push_back(flash.clone());
    }

    /// A score arrived: pop the flash it belongs to (the oldest pending).
    pub fn record_score(&mut self) -> Result<FlashGroup> {
        self.pending.pop_front().ok_or(Error::ScoreWithoutPending)
    }

    /// One lockstep step: record `presented`, then pop the oldest pending
    /// flash if a score accompanies the step.
    pub fn advance(&mut self, presented: &FlashGroup, scored: bool) -> Result<Option<FlashGroup>> {
        self.record_presentation(presented);
        if scored {
            Ok(Some(self.record_score()?))
        } else {
            Ok(None)
        }
    }

    /// Whether flashing `index` now would violate the minimum TTI.
    pub fn is_blocked(&self, index: usize) -> bool {
        self.blocked[index] > 0
    }

    pub fn blocked_count(&self, group: &FlashGroup) -> usize {
        group.members().filter(|&i| self.is_blocked(i)).count()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn pending(&self) -> impl Iterator<Item = &FlashGroup> {
        self.pending.iter()
    }

    pub fn recent_len(&self) -> usize {
        self.recent.len()
    }
}

/// Candidates containing no character blocked by the TTI window.
pub fn feasible_groups(candidates: &[FlashGroup], tracker: &ConstraintTracker) -> Vec<FlashGroup> {
    candidates
        .iter()
        .filter(|g| tracker.blocked_count(g) == 0)
        .cloned()
        .collect()
}

/// Without-replacement presentation of the row/column groups: each block of
/// `rows + cols` flashes is a fresh shuffled permutation.
#[derive(Debug, Clone)]
pub struct RcRandomSchedule {
    groups: Vec<FlashGroup>,
    order: Vec<usize>,
    pos: usize,
}

impl RcRandomSchedule {
    pub fn new(grid: &GridLayout) -> Self {
        let groups = grid.rc_groups();
        let order: Vec<usize> = (0..groups.len()).collect();
        let pos = order.len();
        Self { groups, order, pos }
    }

    pub fn next(&mut self, rng: &mut impl Rng) -> FlashGroup {
        if self.pos >= self.order.len() {
            self.order.shuffle(rng);
            self.pos = 0;
        }
        let group = self.groups[self.order[self.pos]].clone();
        self.pos += 1;
        group
    }
}

/// Pick uniformly among the entries of `values` equal to its maximum.
fn argmax_random_tie<R: Rng>(values: &[f64], rng: &mut R) -> usize {
    debug_assert!(!values.is_empty());
    let max = values.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let tied: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == max)
        .map(|(i, _)| i)
        .collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.random_range(0..tied.len())]
    }
}

fn argmin_random_tie<R: Rng>(values: &[usize], rng: &mut R) -> usize {
    debug_assert!(!values.is_empty());
    let min = *values.iter().min().expect("nonempty");
    let tied: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == min)
        .map(|(i, _)| i)
        .collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.random_range(0..tied.len())]
    }
}

/// Highest-gain feasible candidate group, with ties broken uniformly at
/// random. If the TTI window leaves no candidate feasible, fall back to the
/// group containing the fewest blocked characters so the paradigm always
/// emits a flash.
pub fn next_flash_rc_adaptive<R: Rng>(
    probs: &[f64],
    curve: &GainCurve,
    candidates: &[FlashGroup],
    tracker: &ConstraintTracker,
    rng: &mut R,
) -> FlashGroup {
    debug_assert!(!candidates.is_empty());
    let feasible = feasible_groups(candidates, tracker);
    if feasible.is_empty() {
        let counts: Vec<usize> = candidates.iter().map(|g| tracker.blocked_count(g)).collect();
        return candidates[argmin_random_tie(&counts, rng)].clone();
    }
    let gains: Vec<f64> = feasible
        .iter()
        .map(|g| curve.lookup(g.prior_mass(probs)))
        .collect();
    feasible[argmax_random_tie(&gains, rng)].clone()
}

/// Greedy flash-group construction toward the curve optimum.
///
/// Eligible characters (not TTI-blocked) are ordered by descending
/// probability, ties shuffled. The "under" group is the longest prefix whose
/// mass stays at or below `p_opt`, capped at the flash-size limit; when even
/// the first character overshoots, that single character stands in for it.
/// The "over" group appends the next eligible character when the cap
/// permits, and the higher-gain bracket wins.
pub fn next_flash_greedy<R: Rng>(
    probs: &[f64],
    curve: &GainCurve,
    tracker: &ConstraintTracker,
    config: &PolicyConfig,
    rng: &mut R,
) -> Result<FlashGroup> {
    let m = probs.len();
    let cap = config.max_flash_size.min(m);
    let mut eligible: Vec<usize> = (0..m).filter(|&i| !tracker.is_blocked(i)).collect();
    if eligible.is_empty() {
        return Err(Error::InvalidInput(
            "no character is eligible under the TTI constraint".into(),
        ));
    }
    eligible.shuffle(rng);
    // Stable sort keeps the shuffled order among equal probabilities.
    eligible.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));

    let p_opt = curve.p_opt();
    let mut under_len = 0;
    let mut under_mass = 0.0;
    for &idx in &eligible {
        if under_len >= cap || under_mass + probs[idx] > p_opt {
            break;
        }
        under_len += 1;
        under_mass += probs[idx];
    }
    if under_len == 0 {
        under_len = 1;
        under_mass = probs[eligible[0]];
    }

    let chosen_len = if under_len < cap && under_len < eligible.len() {
        let over_mass = under_mass + probs[eligible[under_len]];
        if curve.lookup(over_mass) > curve.lookup(under_mass) {
            under_len + 1
        } else {
            under_len
        }
    } else {
        under_len
    };
    FlashGroup::from_indices(m, &eligible[..chosen_len])
}

/// Posterior estimate after the pending, still-unscored flashes.
///
/// The confirmed chain is never touched; real scores are always applied to
/// it when they arrive. `FrozenPosterior` returns the confirmed vector
/// unchanged, which is unbiased because the update is a martingale.
pub fn predict_posterior<'a>(
    confirmed: &[f64],
    pending: impl Iterator<Item = &'a FlashGroup>,
    model: &LikelihoodModel,
    mode: OdPredictor,
) -> Result<Vec<f64>> {
    let mut probs = confirmed.to_vec();
    if mode == OdPredictor::FrozenPosterior {
        return Ok(probs);
    }
    for flash in pending {
        let p1 = flash.prior_mass(&probs);
        let z_hat = p1 * model.mu1() + (1.0 - p1) * model.mu0();
        probs = posterior_update(&probs, flash, z_hat, model)?;
    }
    Ok(probs)
}

/// Smallest observed target-to-target interval in a presentation log: the
/// minimum number of stimulus events between two flashes of one character
/// (a T,N,N,T pattern is an interval of 3). `None` when no character
/// repeats.
pub fn min_observed_tti(flashes: &[FlashGroup]) -> Option<usize> {
    let m = flashes.first()?.choice_count();
    let mut last = vec![None; m];
    let mut min_tti: Option<usize> = None;
    for (event, group) in flashes.iter().enumerate() {
        for idx in group.members() {
            if let Some(prev) = last[idx] {
                let tti = event - prev;
                min_tti = Some(min_tti.map_or(tti, |cur: usize| cur.min(tti)));
            }
            last[idx] = Some(event);
        }
    }
    min_tti
}
