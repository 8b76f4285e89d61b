//! Gaussian classifier-score model, Bayesian posterior update, and the
//! dynamic stopping rule.
//!
//! Each flash produces a scalar classifier score drawn from one of two
//! Gaussians: `l1` when the flashed group contains the attended character,
//! `l0` otherwise. The character posterior is updated per score by
//! reweighting every character with the density matching its membership in
//! the flashed group, then renormalizing. Collection stops when the maximum
//! posterior reaches a threshold or a flash budget is exhausted.

use crate::error::{Error, Result};
use crate::grid::FlashGroup;

const LN_SQRT_TWO_PI: f64 = 0.9189385332046727;

/// Target / non-target score distributions: `l0 = N(mu0, sigma)`,
/// `l1 = N(mu1, sigma)`. The separation is summarized by the detectability
/// index `d' = (mu1 - mu0) / sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodModel {
    mu0: f64,
    mu1: f64,
    sigma: f64,
}

impl LikelihoodModel {
    pub fn new(mu0: f64, mu1: f64, sigma: f64) -> Result<Self> {
        if !(mu0.is_finite() && mu1.is_finite() && sigma.is_finite()) {
            return Err(Error::InvalidInput("likelihood parameters must be finite".into()));
        }
        if sigma <= 0.0 {
            return Err(Error::InvalidInput(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { mu0, mu1, sigma })
    }

    /// Canonical parameterization: `mu0 = 0`, `sigma = 1`, `mu1 = dprime`.
    /// The posterior and the gain curve depend on the pair only through d'.
    pub fn from_dprime(dprime: f64) -> Result<Self> {
        if !dprime.is_finite() || dprime < 0.0 {
            return Err(Error::InvalidInput(format!(
                "detectability index must be finite and nonnegative, got {dprime}"
            )));
        }
        Self::new(0.0, dprime, 1.0)
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dprime(&self) -> f64 {
        (self.mu1 - self.mu0) / self.sigma
    }

    /// Gaussian density of score `z` under `l1` (target) or `l0`.
    pub fn density(&self, z: f64, is_target: bool) -> f64 {
        self.log_density(z, is_target).exp()
    }

    pub fn log_density(&self, z: f64, is_target: bool) -> f64 {
        let mu = if is_target { self.mu1 } else { self.mu0 };
        let u = (z - mu) / self.sigma;
        -0.5 * u * u - self.sigma.ln() - LN_SQRT_TWO_PI
    }
}

/// One Bayesian update of `probs` for a score `z` observed after `flash`.
///
/// Every member of the flash group is reweighted by `l1(z)`, every other
/// character by `l0(z)`, and the vector is renormalized by the mixture mass.
/// Computed in the log domain with a single exp-normalize so that long runs
/// of extreme scores cannot underflow the normalizer.
pub fn posterior_update(
    probs: &[f64],
    flash: &FlashGroup,
    z: f64,
    model: &LikelihoodModel,
) -> Result<Vec<f64>> {
    if !z.is_finite() {
        return Err(Error::DegeneratePosterior);
    }
    posterior_update_with_loglik(
        probs,
        flash,
        model.log_density(z, false),
        model.log_density(z, true),
    )
}

/// Log-likelihood form of [`posterior_update`] for pluggable score models.
/// Scaling both likelihoods by a common factor (adding a constant to both
/// log-likelihoods) leaves the result unchanged up to rounding.
pub fn posterior_update_with_loglik(
    probs: &[f64],
    flash: &FlashGroup,
    log_l0: f64,
    log_l1: f64,
) -> Result<Vec<f64>> {
    if flash.choice_count() != probs.len() {
        return Err(Error::InvalidInput(format!(
            "flash group over {} choices applied to a posterior of length {}",
            flash.choice_count(),
            probs.len()
        )));
    }
    if !log_l0.is_finite() || !log_l1.is_finite() {
        return Err(Error::DegeneratePosterior);
    }
    let mut weights: Vec<f64> = probs
        .iter()
        .enumerate()
        .map(|(m, &p)| p.ln() + if flash.contains(m) { log_l1 } else { log_l0 })
        .collect();
    let max = weights.iter().fold(f64::NEG_INFINITY, |a, &w| a.max(w));
    if !max.is_finite() {
        return Err(Error::DegeneratePosterior);
    }
    let mut total = 0.0;
    for w in &mut weights {
        *w = (*w - max).exp();
        total += *w;
    }
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::DegeneratePosterior);
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok(weights)
}

/// Character posterior together with the flash/score history of one trial.
#[derive(Debug, Clone)]
pub struct PosteriorState {
    probs: Vec<f64>,
    flashes_presented: usize,
    scores_observed: usize,
    history: Vec<(FlashGroup, Option<f64>)>,
}

impl PosteriorState {
    /// Uniform prior over `char_count` characters.
    pub fn uniform(char_count: usize) -> Self {
        assert!(char_count >= 2, "need at least two characters");
        Self {
            probs: vec![1.0 / char_count as f64; char_count],
            flashes_presented: 0,
            scores_observed: 0,
            history: Vec::new(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().fold(0.0, |a, &p| a.max(p))
    }

    pub fn flashes_presented(&self) -> usize {
        self.flashes_presented
    }

    pub fn scores_observed(&self) -> usize {
        self.scores_observed
    }

    /// Presented flashes in order, each with its score once one has been
    /// incorporated.
    pub fn history(&self) -> &[(FlashGroup, Option<f64>)] {
        &self.history
    }

    /// Record a presentation whose score has not arrived yet.
    pub fn record_presentation(&mut self, flash: FlashGroup) {
        debug_assert_eq!(flash.choice_count(), self.probs.len());
        self.history.push((flash, None));
        self.flashes_presented += 1;
    }

    /// Incorporate the score for the oldest presentation still awaiting one.
    pub fn apply_score(&mut self, z: f64, model: &LikelihoodModel) -> Result<()> {
        if self.scores_observed >= self.flashes_presented {
            return Err(Error::ScoreWithoutPending);
        }
        let flash = self.history[self.scores_observed].0.clone();
        self.probs = posterior_update(&self.probs, &flash, z, model)?;
        self.history[self.scores_observed].1 = Some(z);
        self.scores_observed += 1;
        Ok(())
    }

    /// Present a flash and score it immediately (the zero-delay path).
    pub fn observe(&mut self, flash: FlashGroup, z: f64, model: &LikelihoodModel) -> Result<()> {
        self.record_presentation(flash);
        self.apply_score(z, model)
    }
}

/// Index of the maximum-probability character; ties go to the lowest index.
pub fn select_character(probs: &[f64]) -> usize {
    debug_assert!(!probs.is_empty());
    let mut best = 0;
    let mut best_p = probs[0];
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > best_p {
            best = i;
            best_p = p;
        }
    }
    best
}

/// Dynamic stopping parameters: posterior threshold and flash budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    p_threshold: f64,
    t_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    /// Maximum posterior reached the threshold.
    StopThreshold,
    /// The scored-flash budget is exhausted.
    StopTmax,
    Continue,
}

impl StoppingRule {
    pub fn new(p_threshold: f64, t_max: usize) -> Result<Self> {
        if !(p_threshold > 0.0 && p_threshold <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "stopping threshold must lie in (0, 1], got {p_threshold}"
            )));
        }
        if t_max < 1 {
            return Err(Error::InvalidInput("flash budget must be at least 1".into()));
        }
        Ok(Self { p_threshold, t_max })
    }

    pub fn p_threshold(&self) -> f64 {
        self.p_threshold
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    /// Threshold test first, then the budget test.
    pub fn decide(&self, state: &PosteriorState) -> StopDecision {
        if state.max_prob() >= self.p_threshold {
            StopDecision::StopThreshold
        } else if state.scores_observed() >= self.t_max {
            StopDecision::StopTmax
        } else {
            StopDecision::Continue
        }
    }
}
