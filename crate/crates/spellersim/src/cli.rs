//! Command-line front end.
//!
//! Values resolve as defaults <- config file <- flags. All ranges are
//! validated before any trial runs. Exit codes: 0 success, 2 usage error,
//! 3 runtime or configuration error.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Parser;
use serde::Deserialize;

use crate::bayes::StoppingRule;
use crate::gain::{CurveCache, DEFAULT_CURVE_GRID};
use crate::grid::GridLayout;
use crate::policy::{OdPredictor, Paradigm, PolicyConfig};
use crate::report::{
    write_comparison_report, write_flash_log, write_sweep_csv, write_sweep_json,
};
use crate::sim::{run_sweep, SweepPlan, SweepResult};

pub const DEFAULT_SEED: u64 = 42;

/// Fully resolved run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub paradigms: Vec<Paradigm>,
    pub dprimes: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    pub max_flash_size: usize,
    pub p_threshold: f64,
    pub t_max: usize,
    pub observation_delay: usize,
    pub tti_min: usize,
    pub od_predictor: OdPredictor,
    pub curve_grid: usize,
    pub out_dir: PathBuf,
    pub flash_logs: bool,
    pub quiet: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            paradigms: Paradigm::ALL.to_vec(),
            dprimes: (1..=16).map(|i| i as f64 * 0.25).collect(),
            trials: 1500,
            seed: DEFAULT_SEED,
            rows: 8,
            cols: 9,
            max_flash_size: 9,
            p_threshold: 0.9,
            t_max: 120,
            observation_delay: 0,
            tti_min: 1,
            od_predictor: OdPredictor::PseudoUpdate,
            curve_grid: DEFAULT_CURVE_GRID,
            out_dir: PathBuf::from("results"),
            flash_logs: false,
            quiet: false,
        }
    }
}

impl RunSpec {
    /// Range-check every field, naming the offending flag on failure.
    pub fn validate(&self) -> Result<(), String> {
        if self.paradigms.is_empty() {
            return Err("--paradigm needs at least one value".into());
        }
        if self.dprimes.is_empty() {
            return Err("--dprimes needs at least one value".into());
        }
        for &d in &self.dprimes {
            if !d.is_finite() || d < 0.0 {
                return Err(format!("--dprimes values must be finite and nonnegative, got {d}"));
            }
        }
        if self.trials < 1 {
            return Err("--trials must be at least 1".into());
        }
        if self.rows < 1 || self.cols < 1 || self.rows * self.cols < 2 {
            return Err(format!(
                "--rows/--cols must describe a grid of at least 2 characters, got {}x{}",
                self.rows, self.cols
            ));
        }
        let m = self.rows * self.cols;
        if self.max_flash_size < 1 || self.max_flash_size > m {
            return Err(format!(
                "--max-flash-size must lie in 1..={m}, got {}",
                self.max_flash_size
            ));
        }
        if !(self.p_threshold > 0.0 && self.p_threshold <= 1.0) {
            return Err(format!(
                "--p-threshold must lie in (0, 1], got {}",
                self.p_threshold
            ));
        }
        if self.t_max < 1 {
            return Err("--t-max must be at least 1".into());
        }
        if self.tti_min < 1 {
            return Err("--tti-min must be at least 1".into());
        }
        if self.curve_grid < 101 {
            return Err(format!("--curve-grid must be at least 101, got {}", self.curve_grid));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or out-of-range values; exit code 2.
    Usage(String),
    /// Configuration or execution failure; exit code 3.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "error: {msg}"),
            CliError::Runtime(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<crate::error::Error> for CliError {
    fn from(err: crate::error::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

/// Speller stimulus-selection benchmark over seeded Monte Carlo trials.
#[derive(Debug, Parser)]
#[command(name = "spellersim", version, about)]
struct CliArgs {
    /// TOML config file; flags take precedence over its values
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Paradigms to run: rc-random, rc-adaptive, greedy-adaptive
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    paradigm: Option<Vec<String>>,
    /// Detectability indices to sweep
    #[arg(long, value_delimiter = ',', value_name = "LIST", allow_negative_numbers = true)]
    dprimes: Option<Vec<f64>>,
    /// Monte Carlo trials per sweep point
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed for all random streams
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    /// Largest flash group the greedy paradigm may build
    #[arg(long)]
    max_flash_size: Option<usize>,
    /// Posterior threshold that stops a trial
    #[arg(long)]
    p_threshold: Option<f64>,
    /// Scored-flash budget per trial
    #[arg(long)]
    t_max: Option<usize>,
    /// Observation delay: presentations before a flash's score arrives
    #[arg(long)]
    od: Option<usize>,
    /// Minimum stimulus events between two flashes of one character
    #[arg(long)]
    tti_min: Option<usize>,
    /// Posterior prediction across pending flashes: pseudo-update or
    /// frozen-posterior
    #[arg(long, value_name = "MODE")]
    od_predictor: Option<String>,
    /// P1 samples in the precomputed gain curve
    #[arg(long)]
    curve_grid: Option<usize>,
    /// Directory for CSV/JSON/report outputs
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Write a per-trial flash log per sweep condition
    #[arg(long)]
    flash_logs: bool,
    /// Suppress progress output
    #[arg(long)]
    quiet: bool,
}

/// Config-file counterpart of the flags; unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    paradigms: Option<Vec<String>>,
    dprimes: Option<Vec<f64>>,
    trials: Option<usize>,
    seed: Option<u64>,
    rows: Option<usize>,
    cols: Option<usize>,
    max_flash_size: Option<usize>,
    p_threshold: Option<f64>,
    t_max: Option<usize>,
    observation_delay: Option<usize>,
    tti_min: Option<usize>,
    od_predictor: Option<String>,
    curve_grid: Option<usize>,
    out_dir: Option<PathBuf>,
    flash_logs: Option<bool>,
    quiet: Option<bool>,
}

fn parse_paradigms(values: &[String]) -> Result<Vec<Paradigm>, CliError> {
    values
        .iter()
        .map(|s| Paradigm::from_str(s).map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

fn resolve(args: CliArgs) -> Result<RunSpec, CliError> {
    let mut spec = RunSpec::default();

    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Runtime(format!("cannot read config file {}: {e}", path.display()))
        })?;
        let file: FileConfig = toml::from_str(&text).map_err(|e| {
            CliError::Runtime(format!("invalid config file {}: {e}", path.display()))
        })?;
        if let Some(v) = file.paradigms {
            spec.paradigms = parse_paradigms(&v)?;
        }
        if let Some(v) = file.dprimes {
            spec.dprimes = v;
        }
        if let Some(v) = file.trials {
            spec.trials = v;
        }
        if let Some(v) = file.seed {
            spec.seed = v;
        }
        if let Some(v) = file.rows {
            spec.rows = v;
        }
        if let Some(v) = file.cols {
            spec.cols = v;
        }
        if let Some(v) = file.max_flash_size {
            spec.max_flash_size = v;
        }
        if let Some(v) = file.p_threshold {
            spec.p_threshold = v;
        }
        if let Some(v) = file.t_max {
            spec.t_max = v;
        }
        if let Some(v) = file.observation_delay {
            spec.observation_delay = v;
        }
        if let Some(v) = file.tti_min {
            spec.tti_min = v;
        }
        if let Some(v) = file.od_predictor {
            spec.od_predictor =
                OdPredictor::from_str(&v).map_err(|e| CliError::Usage(e.to_string()))?;
        }
        if let Some(v) = file.curve_grid {
            spec.curve_grid = v;
        }
        if let Some(v) = file.out_dir {
            spec.out_dir = v;
        }
        if let Some(v) = file.flash_logs {
            spec.flash_logs = v;
        }
        if let Some(v) = file.quiet {
            spec.quiet = v;
        }
    }

    if let Some(v) = args.paradigm {
        spec.paradigms = parse_paradigms(&v)?;
    }
    if let Some(v) = args.dprimes {
        spec.dprimes = v;
    }
    if let Some(v) = args.trials {
        spec.trials = v;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    if let Some(v) = args.rows {
        spec.rows = v;
    }
    if let Some(v) = args.cols {
        spec.cols = v;
    }
    if let Some(v) = args.max_flash_size {
        spec.max_flash_size = v;
    }
    if let Some(v) = args.p_threshold {
        spec.p_threshold = v;
    }
    if let Some(v) = args.t_max {
        spec.t_max = v;
    }
    if let Some(v) = args.od {
        spec.observation_delay = v;
    }
    if let Some(v) = args.tti_min {
        spec.tti_min = v;
    }
    if let Some(v) = args.od_predictor {
        spec.od_predictor =
            OdPredictor::from_str(&v).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Some(v) = args.curve_grid {
        spec.curve_grid = v;
    }
    if let Some(v) = args.out_dir {
        spec.out_dir = v;
    }
    if args.flash_logs {
        spec.flash_logs = true;
    }
    if args.quiet {
        spec.quiet = true;
    }

    spec.validate().map_err(CliError::Usage)?;
    Ok(spec)
}

/// Parse argv (including the binary name) into a validated [`RunSpec`].
pub fn parse_args<I, T>(argv: I) -> Result<RunSpec, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = CliArgs::try_parse_from(argv).map_err(|e| CliError::Usage(e.to_string()))?;
    resolve(args)
}

/// Paths produced by one run.
#[derive(Debug)]
pub struct RunOutputs {
    pub sweep: SweepResult,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
    pub comparison_path: Option<PathBuf>,
    pub flash_log_paths: Vec<PathBuf>,
}

/// Run the sweep described by `spec` and write every output file.
pub fn execute(spec: &RunSpec) -> Result<RunOutputs, CliError> {
    spec.validate().map_err(CliError::Usage)?;

    let grid = if spec.rows == 8 && spec.cols == 9 {
        GridLayout::default_speller()
    } else {
        GridLayout::new(spec.rows, spec.cols)?
    };
    let rule = StoppingRule::new(spec.p_threshold, spec.t_max)?;
    let policy = PolicyConfig {
        paradigm: spec.paradigms[0],
        max_flash_size: spec.max_flash_size,
        observation_delay: spec.observation_delay,
        tti_min: spec.tti_min,
        od_predictor: spec.od_predictor,
    };
    fs::create_dir_all(&spec.out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", spec.out_dir.display())))?;

    let plan = SweepPlan {
        grid: &grid,
        rule,
        policy,
        seed: spec.seed,
        curve_grid: spec.curve_grid,
    };
    let mut cache = CurveCache::new();
    let mut flash_log_paths = Vec::new();
    let out_dir = spec.out_dir.clone();
    let quiet = spec.quiet;
    let want_logs = spec.flash_logs;
    let mut observer = |cell: &crate::sim::SweepCell, results: &[crate::sim::TrialResult]| {
        if !quiet {
            println!(
                "{} d'={} accuracy={:.4} est={:.2} (n={})",
                cell.paradigm, cell.dprime, cell.accuracy, cell.est_scored, cell.trials
            );
        }
        if want_logs {
            let path = out_dir.join(format!("flashlog_{}_d{}.csv", cell.paradigm, cell.dprime));
            write_flash_log(results, &path)?;
            flash_log_paths.push(path);
        }
        Ok(())
    };
    let sweep = run_sweep(
        &plan,
        &spec.dprimes,
        &spec.paradigms,
        spec.trials,
        &mut cache,
        Some(&mut observer),
    )?;

    let csv_path = spec.out_dir.join("sweep.csv");
    write_sweep_csv(&sweep, &csv_path)?;
    let json_path = spec.out_dir.join("sweep.json");
    write_sweep_json(&sweep, &json_path)?;

    let comparison_path = if spec.paradigms.contains(&Paradigm::RcRandom) {
        let path = spec.out_dir.join("comparison.txt");
        write_comparison_report(&sweep, &path)?;
        Some(path)
    } else {
        None
    };

    if !spec.quiet {
        println!("wrote {}", csv_path.display());
        println!("wrote {}", json_path.display());
        if let Some(p) = &comparison_path {
            println!("wrote {}", p.display());
        }
        for p in &flash_log_paths {
            println!("wrote {}", p.display());
        }
    }

    Ok(RunOutputs { sweep, csv_path, json_path, comparison_path, flash_log_paths })
}

/// Full CLI entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match CliArgs::try_parse_from(argv) {
        Ok(args) => args,
        Err(e) => {
            // Covers --help and --version (exit 0) as well as usage errors
            // (exit 2).
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let spec = match resolve(args) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    match execute(&spec) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(extra: &[&str]) -> Result<RunSpec, CliError> {
        let mut argv = vec!["spellersim"];
        argv.extend_from_slice(extra);
        parse_args(argv)
    }

    #[test]
    fn no_arguments_yield_the_documented_defaults() {
        let spec = parse(&[]).unwrap();
        assert_eq!(spec.rows, 8);
        assert_eq!(spec.cols, 9);
        assert_eq!(spec.p_threshold, 0.9);
        assert_eq!(spec.t_max, 120);
        assert_eq!(spec.trials, 1500);
        assert_eq!(spec.max_flash_size, 9);
        assert_eq!(spec.observation_delay, 0);
        assert_eq!(spec.tti_min, 1);
        assert_eq!(spec.paradigms, Paradigm::ALL.to_vec());
        assert_eq!(spec.dprimes.len(), 16);
        assert_eq!(spec.dprimes[0], 0.25);
        assert_eq!(spec.dprimes[15], 4.0);
        assert_eq!(spec.od_predictor, OdPredictor::PseudoUpdate);
    }

    #[test]
    fn constrained_run_flags_parse_into_the_spec() {
        let spec = parse(&["--paradigm", "greedy-adaptive", "--od", "6", "--tti-min", "3"]).unwrap();
        assert_eq!(spec.paradigms, vec![Paradigm::GreedyAdaptive]);
        assert_eq!(spec.observation_delay, 6);
        assert_eq!(spec.tti_min, 3);
    }

    #[test]
    fn comma_lists_and_mode_flags_parse() {
        let spec = parse(&[
            "--paradigm",
            "rc-random,rc-adaptive",
            "--dprimes",
            "0.5,1,2",
            "--od-predictor",
            "frozen-posterior",
        ])
        .unwrap();
        assert_eq!(spec.paradigms, vec![Paradigm::RcRandom, Paradigm::RcAdaptive]);
        assert_eq!(spec.dprimes, vec![0.5, 1.0, 2.0]);
        assert_eq!(spec.od_predictor, OdPredictor::FrozenPosterior);
    }

    #[test]
    fn out_of_range_values_are_usage_errors() {
        for (flags, needle) in [
            (vec!["--tti-min", "0"], "tti-min"),
            (vec!["--trials", "0"], "trials"),
            (vec!["--p-threshold", "0"], "p-threshold"),
            (vec!["--p-threshold", "1.5"], "p-threshold"),
            (vec!["--t-max", "0"], "t-max"),
            (vec!["--curve-grid", "50"], "curve-grid"),
            (vec!["--max-flash-size", "100"], "max-flash-size"),
            (vec!["--rows", "0"], "rows"),
            (vec!["--dprimes", "-1"], "dprimes"),
            (vec!["--paradigm", "bogus"], "bogus"),
            (vec!["--od-predictor", "psychic"], "psychic"),
        ] {
            let err = parse(&flags).unwrap_err();
            match &err {
                CliError::Usage(msg) => {
                    assert!(msg.contains(needle), "message {msg:?} should name {needle:?}")
                }
                other => panic!("expected usage error for {flags:?}, got {other:?}"),
            }
            assert_eq!(err.exit_code(), 2);
        }
    }

    #[test]
    fn unknown_flags_are_rejected_by_name() {
        let err = parse(&["--warp-speed", "9"]).unwrap_err();
        match err {
            CliError::Usage(msg) => assert!(msg.contains("--warp-speed")),
            other => panic!("expected usage error, got {other:?}"),
        }
    }

    #[test]
    fn config_file_overrides_defaults_and_flags_override_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "trials = 10\nseed = 7\nparadigms = [\"rc-random\"]\ntti_min = 2\n",
        )
        .unwrap();
        let path_str = path.to_str().unwrap();

        let spec = parse(&["--config", path_str]).unwrap();
        assert_eq!(spec.trials, 10);
        assert_eq!(spec.seed, 7);
        assert_eq!(spec.paradigms, vec![Paradigm::RcRandom]);
        assert_eq!(spec.tti_min, 2);
        assert_eq!(spec.t_max, 120, "untouched fields keep their defaults");

        let spec = parse(&["--config", path_str, "--trials", "33", "--tti-min", "1"]).unwrap();
        assert_eq!(spec.trials, 33);
        assert_eq!(spec.tti_min, 1);
        assert_eq!(spec.seed, 7);
    }

    #[test]
    fn bad_config_files_are_runtime_errors() {
        let missing = parse(&["--config", "/nonexistent/path.toml"]).unwrap_err();
        assert_eq!(missing.exit_code(), 3);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.toml");
        std::fs::write(&path, "trials = \"many\"").unwrap();
        let broken = parse(&["--config", path.to_str().unwrap()]).unwrap_err();
        assert_eq!(broken.exit_code(), 3);

        let unknown = dir.path().join("unknown.toml");
        std::fs::write(&unknown, "warp_speed = 9").unwrap();
        let err = parse(&["--config", unknown.to_str().unwrap()]).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn file_values_are_range_checked_like_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zero.toml");
        std::fs::write(&path, "tti_min = 0").unwrap();
        let err = parse(&["--config", path.to_str().unwrap()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
