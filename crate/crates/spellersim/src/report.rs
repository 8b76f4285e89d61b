//! Result serialization: sweep CSV, JSON mirror, baseline comparison
//! report, and per-trial flash logs. Output bytes are a pure function of
//! the sweep contents.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::policy::Paradigm;
use crate::sim::{SweepCell, SweepResult, TrialResult};

pub const SWEEP_CSV_HEADER: &str =
    "paradigm,dprime,trials,accuracy,acc_ci95,est_scored,est_presented,est_ci95,stop_tmax_fraction";

pub const FLASH_LOG_HEADER: &str = "trial,step,members,score,post_max";

/// A paradigm whose peak accuracy never clears this bound has collapsed to
/// near-chance behavior.
pub const COLLAPSE_ACCURACY: f64 = 0.15;

/// Format with six significant digits, plain decimal notation.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (5 - exponent).clamp(0, 17) as usize;
    format!("{x:.decimals$}")
}

/// CSV rendering of a sweep: one row per `(paradigm, d')` cell in sweep
/// order.
pub fn sweep_csv_string(result: &SweepResult) -> String {
    let mut out = String::with_capacity(64 * (result.cells.len() + 1));
    out.push_str(SWEEP_CSV_HEADER);
    out.push('\n');
    for c in &result.cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            c.paradigm,
            fmt_sig6(c.dprime),
            c.trials,
            fmt_sig6(c.accuracy),
            fmt_sig6(c.acc_ci95),
            fmt_sig6(c.est_scored),
            fmt_sig6(c.est_presented),
            fmt_sig6(c.est_ci95),
            fmt_sig6(c.stop_tmax_fraction),
        ));
    }
    out
}

pub fn write_sweep_csv(result: &SweepResult, path: &Path) -> Result<()> {
    std::fs::write(path, sweep_csv_string(result))?;
    Ok(())
}

/// JSON mirror of the CSV content.
pub fn write_sweep_json(result: &SweepResult, path: &Path) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(file, result)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(())
}

/// One d' point of a paradigm-versus-baseline comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub dprime: f64,
    pub accuracy: f64,
    pub baseline_accuracy: f64,
    /// Absolute accuracy difference (percentage points / 100).
    pub acc_gain: f64,
    pub est_scored: f64,
    pub baseline_est: f64,
    /// Relative stopping-time reduction versus baseline, in percent;
    /// negative when the paradigm needs more flashes.
    pub est_reduction_pct: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParadigmComparison {
    pub paradigm: Paradigm,
    pub rows: Vec<ComparisonRow>,
    pub max_acc_gain: f64,
    pub max_acc_gain_at: f64,
    pub max_est_reduction_pct: f64,
    pub max_est_reduction_at: f64,
    pub peak_accuracy: f64,
    /// Raised when `peak_accuracy <= COLLAPSE_ACCURACY`.
    pub low_accuracy_collapse: bool,
}

/// Per-d' deltas of every swept paradigm against the rc-random baseline.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub trials: usize,
    pub paradigms: Vec<ParadigmComparison>,
}

impl ComparisonReport {
    pub fn from_sweep(result: &SweepResult) -> Result<Self> {
        if !result.cells.iter().any(|c| c.paradigm == Paradigm::RcRandom) {
            return Err(Error::MissingBaseline);
        }
        let baseline = |d: f64| -> Option<&SweepCell> { result.cell(Paradigm::RcRandom, d) };

        let mut paradigms = Vec::new();
        for &paradigm in &result.paradigms {
            let mut rows = Vec::new();
            for &d in &result.dprimes {
                let (Some(cell), Some(base)) = (result.cell(paradigm, d), baseline(d)) else {
                    continue;
                };
                let est_reduction_pct = if base.est_scored > 0.0 {
                    100.0 * (base.est_scored - cell.est_scored) / base.est_scored
                } else {
                    0.0
                };
                rows.push(ComparisonRow {
                    dprime: d,
                    accuracy: cell.accuracy,
                    baseline_accuracy: base.accuracy,
                    acc_gain: cell.accuracy - base.accuracy,
                    est_scored: cell.est_scored,
                    baseline_est: base.est_scored,
                    est_reduction_pct,
                });
            }
            if rows.is_empty() {
                continue;
            }
            let best_acc = rows
                .iter()
                .max_by(|a, b| a.acc_gain.total_cmp(&b.acc_gain))
                .expect("rows nonempty");
            let best_est = rows
                .iter()
                .max_by(|a, b| a.est_reduction_pct.total_cmp(&b.est_reduction_pct))
                .expect("rows nonempty");
            let peak_accuracy = rows.iter().map(|r| r.accuracy).fold(0.0, f64::max);
            paradigms.push(ParadigmComparison {
                paradigm,
                max_acc_gain: best_acc.acc_gain,
                max_acc_gain_at: best_acc.dprime,
                max_est_reduction_pct: best_est.est_reduction_pct,
                max_est_reduction_at: best_est.dprime,
                peak_accuracy,
                low_accuracy_collapse: peak_accuracy <= COLLAPSE_ACCURACY,
                rows,
            });
        }
        Ok(Self { trials: result.trials, paradigms })
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "Comparison against the rc-random baseline ({} trials per point)\n",
            self.trials
        ));
        for p in &self.paradigms {
            out.push_str(&format!("\nparadigm: {}\n", p.paradigm));
            out.push_str(
                "  dprime,accuracy,baseline_accuracy,acc_gain,est_scored,baseline_est,est_reduction_pct\n",
            );
            for r in &p.rows {
                out.push_str(&format!(
                    "  {},{},{},{},{},{},{}\n",
                    fmt_sig6(r.dprime),
                    fmt_sig6(r.accuracy),
                    fmt_sig6(r.baseline_accuracy),
                    fmt_sig6(r.acc_gain),
                    fmt_sig6(r.est_scored),
                    fmt_sig6(r.baseline_est),
                    fmt_sig6(r.est_reduction_pct),
                ));
            }
            out.push_str(&format!(
                "  max accuracy gain: {} at dprime {}\n",
                fmt_sig6(p.max_acc_gain),
                fmt_sig6(p.max_acc_gain_at)
            ));
            out.push_str(&format!(
                "  max EST reduction: {}% at dprime {}\n",
                fmt_sig6(p.max_est_reduction_pct),
                fmt_sig6(p.max_est_reduction_at)
            ));
            out.push_str(&format!("  peak accuracy: {}\n", fmt_sig6(p.peak_accuracy)));
            out.push_str(&format!(
                "  low-accuracy collapse (peak <= {}): {}\n",
                fmt_sig6(COLLAPSE_ACCURACY),
                if p.low_accuracy_collapse { "yes" } else { "no" }
            ));
        }
        out
    }
}

/// Build the comparison against rc-random and write its text rendering.
pub fn write_comparison_report(result: &SweepResult, path: &Path) -> Result<ComparisonReport> {
    let report = ComparisonReport::from_sweep(result)?;
    std::fs::write(path, report.render_text())?;
    Ok(report)
}

/// Per-trial flash log for one sweep condition, one line per presentation:
/// `trial,step,members,score,post_max` with members joined by `;` and an
/// empty score column for flashes still unscored at stopping.
pub fn write_flash_log(trials: &[TrialResult], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{FLASH_LOG_HEADER}")?;
    for (trial_idx, trial) in trials.iter().enumerate() {
        for (step, rec) in trial.flash_log.iter().enumerate() {
            let members: Vec<String> = rec.group.members().map(|i| i.to_string()).collect();
            let score = rec.score.map(fmt_sig6).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{}",
                trial_idx,
                step,
                members.join(";"),
                score,
                fmt_sig6(rec.post_max)
            )?;
        }
    }
    out.flush()?;
    Ok(())
}
