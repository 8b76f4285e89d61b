//! Monte Carlo character-selection trials and detectability sweeps.
//!
//! One trial spells one character: a uniformly drawn target, a policy
//! choosing flashes on the predicted posterior, Gaussian classifier scores
//! delivered after the configured observation delay, Bayesian updates of the
//! confirmed posterior, and the dynamic stopping rule. Sweeps repeat trials
//! across detectability values and paradigms on independent, reproducible
//! random streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::bayes::{select_character, LikelihoodModel, PosteriorState, StopDecision, StoppingRule};
use crate::error::{Error, Result};
use crate::gain::{CurveCache, GainCurve};
use crate::grid::{FlashGroup, GridLayout};
use crate::policy::{
    next_flash_greedy, next_flash_rc_adaptive, predict_posterior, ConstraintTracker, Paradigm,
    PolicyConfig, RcRandomSchedule,
};

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-style seed split: mixes `tag` into `seed` so that distinct
/// conditions get unrelated streams while staying reproducible.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

/// The random stream for one trial, keyed by `(seed, trial_index)`.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// Draw a classifier score for a presented flash: from `l1` when the flash
/// contains the target, otherwise from `l0`.
pub fn sample_score<R: Rng>(
    flash: &FlashGroup,
    target: usize,
    model: &LikelihoodModel,
    rng: &mut R,
) -> f64 {
    let mu = if flash.contains(target) { model.mu1() } else { model.mu0() };
    let noise: f64 = rng.sample(StandardNormal);
    mu + model.sigma() * noise
}

/// Everything one trial needs. The per-trial random stream is fully
/// determined by `(seed, trial_index)`.
#[derive(Debug, Clone, Copy)]
pub struct TrialConfig<'a> {
    pub grid: &'a GridLayout,
    pub model: &'a LikelihoodModel,
    pub rule: &'a StoppingRule,
    pub policy: &'a PolicyConfig,
    pub curve: &'a GainCurve,
    pub seed: u64,
    pub trial_index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Threshold,
    TMax,
}

/// One presented flash with its score (once delivered) and the maximum
/// posterior right after this record last changed.
#[derive(Debug, Clone)]
pub struct FlashRecord {
    pub group: FlashGroup,
    pub score: Option<f64>,
    pub post_max: f64,
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub target: usize,
    pub selected: usize,
    pub correct: bool,
    /// Scores incorporated before stopping (the stopping time t).
    pub flashes_scored: usize,
    /// Presentations, including any still unscored when the trial stopped.
    pub flashes_presented: usize,
    pub stop_reason: StopReason,
    pub flash_log: Vec<FlashRecord>,
    pub final_probs: Vec<f64>,
}

impl TrialResult {
    /// Presented groups in order, for TTI and orientation scans.
    pub fn presented_groups(&self) -> Vec<FlashGroup> {
        self.flash_log.iter().map(|r| r.group.clone()).collect()
    }
}

/// Run a single trial to its stopping decision.
pub fn run_trial(cfg: &TrialConfig) -> Result<TrialResult> {
    cfg.policy.validate(cfg.grid)?;
    let m = cfg.grid.char_count();
    let delay = cfg.policy.observation_delay;
    let mut rng = trial_rng(cfg.seed, cfg.trial_index);
    let target = rng.random_range(0..m);

    let mut posterior = PosteriorState::uniform(m);
    let mut tracker = ConstraintTracker::new(m, cfg.policy.tti_min);
    let mut rc_schedule = match cfg.policy.paradigm {
        Paradigm::RcRandom => Some(RcRandomSchedule::new(cfg.grid)),
        _ => None,
    };
    let rc_candidates = match cfg.policy.paradigm {
        Paradigm::RcAdaptive => cfg.grid.rc_groups(),
        _ => Vec::new(),
    };
    let mut log: Vec<FlashRecord> = Vec::new();

    let stop_reason = loop {
        let flash = match cfg.policy.paradigm {
            Paradigm::RcRandom => rc_schedule.as_mut().expect("schedule exists").next(&mut rng),
            Paradigm::RcAdaptive => {
                let predicted = predict_posterior(
                    posterior.probs(),
                    tracker.pending(),
                    cfg.model,
                    cfg.policy.od_predictor,
                )?;
                next_flash_rc_adaptive(&predicted, cfg.curve, &rc_candidates, &tracker, &mut rng)
            }
            Paradigm::GreedyAdaptive => {
                let predicted = predict_posterior(
                    posterior.probs(),
                    tracker.pending(),
                    cfg.model,
                    cfg.policy.od_predictor,
                )?;
                next_flash_greedy(&predicted, cfg.curve, &tracker, cfg.policy, &mut rng)?
            }
        };
        posterior.record_presentation(flash.clone());
        tracker.record_presentation(&flash);
        log.push(FlashRecord { group: flash, score: None, post_max: posterior.max_prob() });

        // The score for the flash presented `delay` steps earlier arrives
        // now; during the first `delay` presentations the queue just fills.
        if tracker.pending_len() > delay {
            let due = tracker.record_score()?;
            let z = sample_score(&due, target, cfg.model, &mut rng);
            posterior.apply_score(z, cfg.model)?;
            let scored_idx = posterior.scores_observed() - 1;
            debug_assert_eq!(log[scored_idx].group, due);
            log[scored_idx].score = Some(z);
            log[scored_idx].post_max = posterior.max_prob();
            match cfg.rule.decide(&posterior) {
                StopDecision::Continue => {}
                StopDecision::StopThreshold => break StopReason::Threshold,
                StopDecision::StopTmax => break StopReason::TMax,
            }
        }
        debug_assert!(posterior.flashes_presented() <= cfg.rule.t_max() + delay + 1);
    };

    let selected = select_character(posterior.probs());
    Ok(TrialResult {
        target,
        selected,
        correct: selected == target,
        flashes_scored: posterior.scores_observed(),
        flashes_presented: posterior.flashes_presented(),
        stop_reason,
        flash_log: log,
        final_probs: posterior.probs().to_vec(),
    })
}

/// Aggregates for one `(paradigm, d')` sweep cell.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub paradigm: Paradigm,
    pub dprime: f64,
    pub trials: usize,
    pub accuracy: f64,
    /// 95% normal-approximation half-width for the accuracy.
    pub acc_ci95: f64,
    /// Mean scored flashes at stopping (the expected stopping time).
    pub est_scored: f64,
    /// Mean presentations, counting unscored in-flight flashes.
    pub est_presented: f64,
    /// 95% half-width for `est_scored`.
    pub est_ci95: f64,
    pub stop_tmax_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub dprimes: Vec<f64>,
    pub paradigms: Vec<Paradigm>,
    pub trials: usize,
    /// Paradigm-major, then d' in sweep order.
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, paradigm: Paradigm, dprime: f64) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.paradigm == paradigm && c.dprime == dprime)
    }
}

/// Shared sweep inputs; the paradigm field of `policy` is replaced per
/// sweep paradigm.
#[derive(Debug, Clone, Copy)]
pub struct SweepPlan<'a> {
    pub grid: &'a GridLayout,
    pub rule: StoppingRule,
    pub policy: PolicyConfig,
    pub seed: u64,
    pub curve_grid: usize,
}

/// Callback invoked once per finished cell with all its trial results, in
/// deterministic cell order.
pub type CellObserver<'a> = &'a mut dyn FnMut(&SweepCell, &[TrialResult]) -> Result<()>;

/// Run `trials` independent trials for every `(paradigm, d')` combination.
///
/// Trials inside a cell run in parallel; aggregation is ordered by trial
/// index, so results do not depend on scheduling. Cell streams are derived
/// from `(seed, paradigm, d')`, making every cell reproducible in isolation.
pub fn run_sweep(
    plan: &SweepPlan,
    dprimes: &[f64],
    paradigms: &[Paradigm],
    trials: usize,
    cache: &mut CurveCache,
    mut observer: Option<CellObserver>,
) -> Result<SweepResult> {
    if trials == 0 {
        return Err(Error::InvalidInput("trial count must be at least 1".into()));
    }
    if dprimes.is_empty() || paradigms.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one d' and one paradigm".into()));
    }
    let mut cells = Vec::with_capacity(dprimes.len() * paradigms.len());
    for &paradigm in paradigms {
        let policy = PolicyConfig { paradigm, ..plan.policy };
        policy.validate(plan.grid)?;
        for &dprime in dprimes {
            let model = LikelihoodModel::from_dprime(dprime)?;
            let curve = cache.get_or_build(&model, plan.curve_grid)?;
            let cell_seed = derive_seed(derive_seed(plan.seed, paradigm.tag()), dprime.to_bits());
            let results: Vec<TrialResult> = (0..trials)
                .into_par_iter()
                .map(|i| {
                    let cfg = TrialConfig {
                        grid: plan.grid,
                        model: &model,
                        rule: &plan.rule,
                        policy: &policy,
                        curve: &curve,
                        seed: cell_seed,
                        trial_index: i as u64,
                    };
                    run_trial(&cfg)
                })
                .collect::<Result<_>>()?;
            let cell = summarize(paradigm, dprime, &results);
            if let Some(obs) = observer.as_deref_mut() {
                obs(&cell, &results)?;
            }
            cells.push(cell);
        }
    }
    Ok(SweepResult {
        dprimes: dprimes.to_vec(),
        paradigms: paradigms.to_vec(),
        trials,
        cells,
    })
}

fn summarize(paradigm: Paradigm, dprime: f64, results: &[TrialResult]) -> SweepCell {
    let n = results.len();
    let nf = n as f64;
    let correct = results.iter().filter(|r| r.correct).count() as f64;
    let accuracy = correct / nf;
    let acc_ci95 = 1.96 * (accuracy * (1.0 - accuracy) / nf).sqrt();

    let scored: Vec<f64> = results.iter().map(|r| r.flashes_scored as f64).collect();
    let est_scored = scored.iter().sum::<f64>() / nf;
    let est_presented =
        results.iter().map(|r| r.flashes_presented as f64).sum::<f64>() / nf;
    let est_var = if n > 1 {
        scored.iter().map(|s| (s - est_scored).powi(2)).sum::<f64>() / (nf - 1.0)
    } else {
        0.0
    };
    let est_ci95 = 1.96 * (est_var / nf).sqrt();
    let stop_tmax_fraction =
        results.iter().filter(|r| r.stop_reason == StopReason::TMax).count() as f64 / nf;

    SweepCell {
        paradigm,
        dprime,
        trials: n,
        accuracy,
        acc_ci95,
        est_scored,
        est_presented,
        est_ci95,
        stop_tmax_fraction,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::DEFAULT_CURVE_GRID;
    use crate::policy::min_observed_tti;
    use approx::assert_abs_diff_eq;

    fn fixture(dprime: f64, paradigm: Paradigm) -> (GridLayout, LikelihoodModel, StoppingRule, PolicyConfig, GainCurve) {
        let grid = GridLayout::default_speller();
        let model = LikelihoodModel::from_dprime(dprime).unwrap();
        let rule = StoppingRule::new(0.9, 120).unwrap();
        let policy = PolicyConfig::new(paradigm);
        let curve = GainCurve::build(&model, DEFAULT_CURVE_GRID).unwrap();
        (grid, model, rule, policy, curve)
    }

    #[test]
    fn score_sampling_matches_the_model_moments() {
        let model = LikelihoodModel::from_dprime(2.0).unwrap();
        let flash = FlashGroup::from_indices(4, &[1]).unwrap();
        let mut rng = trial_rng(99, 0);

        let n = 100_000;
        let target_draws: Vec<f64> =
            (0..n).map(|_| sample_score(&flash, 1, &model, &mut rng)).collect();
        let mean = target_draws.iter().sum::<f64>() / n as f64;
        assert_abs_diff_eq!(mean, 2.0, epsilon = 0.02);

        let nontarget: Vec<f64> =
            (0..n).map(|_| sample_score(&flash, 0, &model, &mut rng)).collect();
        let m0 = nontarget.iter().sum::<f64>() / n as f64;
        let sd = (nontarget.iter().map(|z| (z - m0).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert_abs_diff_eq!(m0, 0.0, epsilon = 0.02);
        assert_abs_diff_eq!(sd, 1.0, epsilon = 0.02);

        // With d' = 0, target and non-target draws share their distribution.
        let flat = LikelihoodModel::from_dprime(0.0).unwrap();
        let a = sample_score(&flash, 1, &flat, &mut trial_rng(7, 0));
        let b = sample_score(&flash, 0, &flat, &mut trial_rng(7, 0));
        assert_eq!(a, b);
    }

    #[test]
    fn identical_seeds_reproduce_the_full_trial() {
        for paradigm in Paradigm::ALL {
            let (grid, model, rule, mut policy, curve) = fixture(1.5, paradigm);
            policy.observation_delay = 3;
            policy.tti_min = if paradigm == Paradigm::GreedyAdaptive { 3 } else { 1 };
            let cfg = TrialConfig {
                grid: &grid,
                model: &model,
                rule: &rule,
                policy: &policy,
                curve: &curve,
                seed: 1234,
                trial_index: 7,
            };
            let a = run_trial(&cfg).unwrap();
            let b = run_trial(&cfg).unwrap();
            assert_eq!(a.target, b.target);
            assert_eq!(a.selected, b.selected);
            assert_eq!(a.flashes_scored, b.flashes_scored);
            assert_eq!(a.flashes_presented, b.flashes_presented);
            assert_eq!(a.presented_groups(), b.presented_groups());
            assert_eq!(a.final_probs, b.final_probs);
        }
    }

    #[test]
    fn high_detectability_gives_fast_accurate_trials() {
        let (grid, model, rule, policy, curve) = fixture(6.0, Paradigm::RcRandom);
        let mut correct = 0;
        for i in 0..100 {
            let cfg = TrialConfig {
                grid: &grid,
                model: &model,
                rule: &rule,
                policy: &policy,
                curve: &curve,
                seed: 5,
                trial_index: i,
            };
            let r = run_trial(&cfg).unwrap();
            correct += r.correct as usize;
            // One scored flash can never push the posterior past 0.9 from
            // uniform when groups hold several characters.
            assert!(r.flashes_scored >= 2);
            assert!(r.flashes_scored <= 40);
        }
        assert!(correct >= 95, "expected near-perfect accuracy, got {correct}/100");
    }

    #[test]
    fn delayed_trials_present_more_than_they_score() {
        let (grid, model, rule, mut policy, curve) = fixture(3.0, Paradigm::GreedyAdaptive);
        policy.observation_delay = 6;
        for i in 0..20 {
            let cfg = TrialConfig {
                grid: &grid,
                model: &model,
                rule: &rule,
                policy: &policy,
                curve: &curve,
                seed: 21,
                trial_index: i,
            };
            let r = run_trial(&cfg).unwrap();
            assert_eq!(r.flashes_presented, r.flashes_scored + 6);
            assert!(r.flashes_scored <= 120);
        }
    }

    #[test]
    fn replaying_the_flash_log_reproduces_the_final_posterior() {
        let (grid, model, rule, policy, curve) = fixture(2.0, Paradigm::GreedyAdaptive);
        let cfg = TrialConfig {
            grid: &grid,
            model: &model,
            rule: &rule,
            policy: &policy,
            curve: &curve,
            seed: 77,
            trial_index: 3,
        };
        let r = run_trial(&cfg).unwrap();
        let mut probs = vec![1.0 / 72.0; 72];
        for rec in &r.flash_log {
            if let Some(z) = rec.score {
                probs = crate::bayes::posterior_update(&probs, &rec.group, z, &model).unwrap();
            }
        }
        let bits_match = probs
            .iter()
            .zip(&r.final_probs)
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(bits_match, "replay must be bit-identical at the decision level");
    }

    #[test]
    fn greedy_trials_respect_the_minimum_tti() {
        let (grid, model, rule, mut policy, curve) = fixture(2.0, Paradigm::GreedyAdaptive);
        policy.tti_min = 3;
        policy.observation_delay = 6;
        for i in 0..25 {
            let cfg = TrialConfig {
                grid: &grid,
                model: &model,
                rule: &rule,
                policy: &policy,
                curve: &curve,
                seed: 31,
                trial_index: i,
            };
            let r = run_trial(&cfg).unwrap();
            if let Some(tti) = min_observed_tti(&r.presented_groups()) {
                assert!(tti >= 3, "trial {i} violated the TTI floor: {tti}");
            }
        }
    }

    #[test]
    fn sweep_cells_are_independent_of_the_paradigm_list() {
        let grid = GridLayout::default_speller();
        let plan = SweepPlan {
            grid: &grid,
            rule: StoppingRule::new(0.9, 120).unwrap(),
            policy: PolicyConfig::new(Paradigm::RcRandom),
            seed: 404,
            curve_grid: 101,
        };
        let mut cache = CurveCache::new();
        let solo = run_sweep(&plan, &[2.0], &[Paradigm::RcRandom], 60, &mut cache, None).unwrap();
        let both = run_sweep(
            &plan,
            &[2.0],
            &[Paradigm::GreedyAdaptive, Paradigm::RcRandom],
            60,
            &mut cache,
            None,
        )
        .unwrap();
        let a = solo.cell(Paradigm::RcRandom, 2.0).unwrap();
        let b = both.cell(Paradigm::RcRandom, 2.0).unwrap();
        assert_eq!(a.accuracy, b.accuracy);
        assert_eq!(a.est_scored, b.est_scored);
        assert_eq!(a.est_presented, b.est_presented);
    }

    #[test]
    fn sweep_summaries_stay_within_bounds_and_reasons_are_consistent() {
        let grid = GridLayout::default_speller();
        let plan = SweepPlan {
            grid: &grid,
            rule: StoppingRule::new(0.9, 120).unwrap(),
            policy: PolicyConfig::new(Paradigm::RcRandom),
            seed: 11,
            curve_grid: 101,
        };
        let mut cache = CurveCache::new();
        let mut checked = 0usize;
        let mut observer = |_cell: &SweepCell, results: &[TrialResult]| -> Result<()> {
            for r in results {
                match r.stop_reason {
                    StopReason::Threshold => {
                        let max = r.final_probs.iter().fold(0.0f64, |a, &p| a.max(p));
                        assert!(max >= 0.9);
                    }
                    StopReason::TMax => assert_eq!(r.flashes_scored, 120),
                }
                checked += 1;
            }
            Ok(())
        };
        let sweep = run_sweep(
            &plan,
            &[1.0, 3.0],
            &[Paradigm::GreedyAdaptive],
            40,
            &mut cache,
            Some(&mut observer),
        )
        .unwrap();
        assert_eq!(checked, 80);
        for cell in &sweep.cells {
            assert!(cell.accuracy >= 0.0 && cell.accuracy <= 1.0);
            assert!(cell.est_scored >= 1.0 && cell.est_scored <= 120.0);
            assert!(cell.est_presented >= cell.est_scored);
            assert!(cell.stop_tmax_fraction >= 0.0 && cell.stop_tmax_fraction <= 1.0);
        }
    }

    #[test]
    fn sweep_rejects_empty_inputs() {
        let grid = GridLayout::default_speller();
        let plan = SweepPlan {
            grid: &grid,
            rule: StoppingRule::new(0.9, 120).unwrap(),
            policy: PolicyConfig::new(Paradigm::RcRandom),
            seed: 1,
            curve_grid: 101,
        };
        let mut cache = CurveCache::new();
        assert!(run_sweep(&plan, &[], &[Paradigm::RcRandom], 5, &mut cache, None).is_err());
        assert!(run_sweep(&plan, &[1.0], &[], 5, &mut cache, None).is_err());
        assert!(run_sweep(&plan, &[1.0], &[Paradigm::RcRandom], 0, &mut cache, None).is_err());
    }

    #[test]
    fn derive_seed_separates_nearby_tags() {
        let s = 42;
        let a = derive_seed(s, 0);
        let b = derive_seed(s, 1);
        let c = derive_seed(s + 1, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(s, 0));
    }
}
