//! Experiment configuration, the four `prospect-mdp` subcommands and their
//! output formats.
//!
//! Each command returns a [`CmdOutput`]: named files plus an exit code. The
//! binary writes the files to `--out` (or stdout) and exits with the code.
//!
//! | code | meaning |
//! |---|---|
//! | 0 | success |
//! | 1 | input error (`E_PARSE`, `E_INPUT`, `E_IO`) |
//! | 2 | solver did not converge (`E_NOCONV`) |
//! | 3 | an axiom check failed (`E_AXIOM`) |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::axioms::check_axioms;
use crate::environments::{
    betting_policy_string, build_betting_game, build_grid_world, BettingGameSpec, GridWorldSpec,
};
use crate::learning::{
    dyna_q, entropic_q_learning, optimal_start_value, run_trials, Exploration, LearnConfig, LearnTrace,
    LearningRate, QTable,
};
use crate::maps::{MapDescriptor, ProspectMap};
use crate::mdp::{Mdp, PolicyDet};
use crate::solvers::{
    aperiodicity_transform, finite_stage_dp, value_iteration_average, value_iteration_discounted,
    AverageSolveResult, FiniteStageResult, SolveError, SolveResult, DEFAULT_MAX_ITER_AVERAGE,
    DEFAULT_MAX_ITER_DISCOUNTED,
};

/// Formats with 12 significant digits, using the shortest representation
/// of the rounded value (`0.1`, `36.1234567891`, `1.5e-7`).
pub fn fmt_float(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("round trip of formatted float");
    rounded.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    Parse,
    Input,
    Io,
    NoConv,
    Axiom,
}

impl ErrorCode {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCode::Parse | ErrorCode::Input | ErrorCode::Io => 1,
            ErrorCode::NoConv => 2,
            ErrorCode::Axiom => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Parse => "E_PARSE",
            ErrorCode::Input => "E_INPUT",
            ErrorCode::Io => "E_IO",
            ErrorCode::NoConv => "E_NOCONV",
            ErrorCode::Axiom => "E_AXIOM",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: ErrorCode,
    pub message: String,
    pub hint: Option<String>,
}

impl CliError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        CliError { code, message: message.into(), hint: None }
    }

    fn input(message: impl fmt::Display) -> Self {
        CliError::new(ErrorCode::Input, message.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.code.as_str(), self.message)?;
        if let Some(h) = &self.hint {
            write!(f, "\nhint: {h}")?;
        }
        Ok(())
    }
}

impl std::error::Error for CliError {}

/// Optimality criterion, written `finite:T`, `discounted:alpha` or `average`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Criterion {
    Finite(usize),
    Discounted(f64),
    Average,
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "average" {
            return Ok(Criterion::Average);
        }
        match s.split_once(':') {
            Some(("finite", t)) => t
                .trim()
                .parse()
                .map(Criterion::Finite)
                .map_err(|_| format!("bad horizon in criterion {s:?}")),
            Some(("discounted", a)) => {
                let alpha: f64 = a.trim().parse().map_err(|_| format!("bad discount in criterion {s:?}"))?;
                if !(0.0..1.0).contains(&alpha) {
                    return Err(format!("discount {alpha} outside [0, 1)"));
                }
                Ok(Criterion::Discounted(alpha))
            }
            _ => Err(format!("criterion {s:?} is not finite:T, discounted:alpha or average")),
        }
    }
}

impl TryFrom<String> for Criterion {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Criterion> for String {
    fn from(c: Criterion) -> String {
        c.to_string()
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::Finite(t) => write!(f, "finite:{t}"),
            Criterion::Discounted(a) => write!(f, "discounted:{a}"),
            Criterion::Average => write!(f, "average"),
        }
    }
}

/// Where the MDP comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum MdpSource {
    Inline { mdp: Mdp },
    /// Path to a JSON MDP, relative to the config file.
    File { path: PathBuf },
    Betting(BettingGameSpec),
    Gridworld(GridWorldSpec),
}

/// The MDP together with what is needed to label its policies.
#[derive(Debug, Clone)]
pub struct LoadedMdp {
    pub mdp: Mdp,
    pub kind: MdpKind,
}

#[derive(Debug, Clone)]
pub enum MdpKind {
    Betting,
    Grid(GridWorldSpec),
    Generic,
}

impl LoadedMdp {
    pub fn default_start(&self) -> usize {
        match &self.kind {
            MdpKind::Grid(spec) => spec.start_state(),
            _ => 0,
        }
    }

    /// Compact policy label for sweep tables.
    pub fn policy_string(&self, f: &PolicyDet) -> String {
        match self.kind {
            MdpKind::Betting => betting_policy_string(f),
            _ => f.actions().iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" "),
        }
    }

    /// Human-readable policy table.
    pub fn policy_table(&self, f: &PolicyDet) -> String {
        match &self.kind {
            MdpKind::Grid(spec) => spec.render_policy(f),
            MdpKind::Betting => crate::environments::betting::DECISION_STATES
                .iter()
                .map(|&x| format!("state {x}: {}\n", crate::environments::betting::action_label(f[x])))
                .collect(),
            MdpKind::Generic => f.actions().iter().enumerate().map(|(x, a)| format!("state {x}: {a}\n")).collect(),
        }
    }
}

impl MdpSource {
    pub fn load(&self, base: &Path) -> Result<LoadedMdp, CliError> {
        Ok(match self {
            MdpSource::Inline { mdp } => LoadedMdp { mdp: mdp.clone(), kind: MdpKind::Generic },
            MdpSource::File { path } => LoadedMdp { mdp: read_mdp(&base.join(path))?, kind: MdpKind::Generic },
            MdpSource::Betting(spec) => {
                LoadedMdp { mdp: build_betting_game(spec).map_err(CliError::input)?, kind: MdpKind::Betting }
            }
            MdpSource::Gridworld(spec) => LoadedMdp {
                mdp: build_grid_world(spec).map_err(CliError::input)?,
                kind: MdpKind::Grid(spec.clone()),
            },
        })
    }
}

pub fn read_mdp(path: &Path) -> Result<Mdp, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new(ErrorCode::Io, format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::new(ErrorCode::Parse, format!("{}: {e}", path.display())))
}

/// Parameter swept by `sweep`: a numeric field of the map descriptor
/// (`lambda`, `tau`, ...) or one of `discount`, `horizon`, `aperiodicity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Entropic Q-learning; needs an entropic map with nonzero lambda.
    QLearning,
    DynaQ,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningSection {
    pub algorithm: Algorithm,
    pub trials: usize,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub learning_rate: LearningRate,
    pub exploration: Exploration,
    pub planning_steps: usize,
    pub eval_tolerance: f64,
}

impl Default for LearningSection {
    fn default() -> Self {
        let cfg = LearnConfig::default();
        LearningSection {
            algorithm: Algorithm::QLearning,
            trials: 1,
            episodes: cfg.episodes,
            steps_per_episode: cfg.steps_per_episode,
            learning_rate: cfg.learning_rate,
            exploration: cfg.exploration,
            planning_steps: cfg.planning_steps,
            eval_tolerance: cfg.eval_tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    pub trials: usize,
    pub tol: f64,
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection { trials: 1000, tol: 1e-8 }
    }
}

fn default_map() -> MapDescriptor {
    MapDescriptor::Expectation
}

fn default_criterion() -> Criterion {
    Criterion::Discounted(0.9)
}

fn default_tolerance() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mdp: MdpSource,
    #[serde(default = "default_map")]
    pub map: MapDescriptor,
    #[serde(default = "default_criterion")]
    pub criterion: Criterion,
    /// Stopping tolerance of value iteration.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Iteration cap; defaults depend on the criterion.
    #[serde(default)]
    pub max_iter: Option<usize>,
    /// Defaults to the environment's start state (0 for plain MDPs).
    #[serde(default)]
    pub start_state: Option<usize>,
    /// Self-loop weight of the aperiodicity transform, applied before solving.
    #[serde(default)]
    pub aperiodicity: Option<f64>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub learning: LearningSection,
    #[serde(default)]
    pub check: CheckSection,
    #[serde(default)]
    pub seed: u64,
    /// Directory that relative paths are resolved against; set by the
    /// loader, never read from JSON.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::new(ErrorCode::Parse, e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::new(ErrorCode::Io, format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = ExperimentConfig::from_json(&text)
            .map_err(|e| CliError { message: format!("{}: {}", path.display(), e.message), ..e })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn load(&self) -> Result<(LoadedMdp, usize), CliError> {
        let loaded = self.mdp.load(&self.base_dir)?;
        if !(self.tolerance > 0.0) {
            return Err(CliError::input(format!("tolerance {} must be positive", self.tolerance)));
        }
        if self.max_iter == Some(0) {
            return Err(CliError::input("max_iter must be at least 1"));
        }
        let start = self.start_state.unwrap_or_else(|| loaded.default_start());
        if start >= loaded.mdp.n_states() {
            return Err(CliError::input(format!("start state {start} out of range")));
        }
        let loaded = match self.aperiodicity {
            Some(kappa) => LoadedMdp {
                mdp: aperiodicity_transform(&loaded.mdp, kappa).map_err(CliError::input)?,
                ..loaded
            },
            None => loaded,
        };
        Ok((loaded, start))
    }
}

/// Files produced by a command, in write order.
#[derive(Debug, Clone, PartialEq)]
pub struct CmdOutput {
    pub files: Vec<(String, String)>,
    pub exit_code: i32,
    /// Set when the command finished but its result is a failure
    /// (non-convergence, axiom violation); printed to stderr.
    pub diagnostic: Option<CliError>,
}

impl CmdOutput {
    fn ok(files: Vec<(String, String)>) -> Self {
        CmdOutput { files, exit_code: 0, diagnostic: None }
    }

    /// Writes every file into `dir` (created if missing), or concatenates
    /// them on stdout when `dir` is `None`.
    pub fn emit(&self, dir: Option<&Path>) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::new(ErrorCode::Io, e.to_string());
        match dir {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(io)?;
                for (name, body) in &self.files {
                    std::fs::write(dir.join(name), body).map_err(io)?;
                }
            }
            None => {
                use std::io::Write;
                let mut out = std::io::stdout().lock();
                for (name, body) in &self.files {
                    if self.files.len() > 1 {
                        writeln!(out, "== {name} ==").map_err(io)?;
                    }
                    out.write_all(body.as_bytes()).map_err(io)?;
                    if !body.ends_with('\n') {
                        writeln!(out).map_err(io)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Solver output of any criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolveOutcome {
    Discounted(SolveResult),
    Average(AverageSolveResult),
    Finite(FiniteStageResult),
}

impl SolveOutcome {
    pub fn start_value(&self, start: usize) -> f64 {
        match self {
            SolveOutcome::Discounted(r) => r.value[start],
            SolveOutcome::Average(r) => r.gain,
            SolveOutcome::Finite(r) => r.optimal_value()[start],
        }
    }

    /// Stationary policy, or the first-stage rule for the finite horizon.
    pub fn policy(&self) -> &PolicyDet {
        match self {
            SolveOutcome::Discounted(r) => &r.policy,
            SolveOutcome::Average(r) => &r.policy,
            SolveOutcome::Finite(r) => &r.stage_policies[0],
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            SolveOutcome::Discounted(r) => r.iterations,
            SolveOutcome::Average(r) => r.iterations,
            SolveOutcome::Finite(r) => r.horizon(),
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            SolveOutcome::Discounted(r) => r.converged,
            SolveOutcome::Average(r) => r.converged,
            SolveOutcome::Finite(_) => true,
        }
    }
}

/// Contents of `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub criterion: Criterion,
    pub map: MapDescriptor,
    pub start_state: usize,
    pub start_value: f64,
    pub result: SolveOutcome,
}

fn solve_with(
    m: &Mdp,
    map: &dyn ProspectMap,
    criterion: Criterion,
    tolerance: f64,
    max_iter: Option<usize>,
) -> Result<SolveOutcome, CliError> {
    let zeros = vec![0.0; m.n_states()];
    let outcome = match criterion {
        Criterion::Finite(t) => finite_stage_dp(m, map, t).map(SolveOutcome::Finite),
        Criterion::Discounted(alpha) => value_iteration_discounted(
            m,
            map,
            alpha,
            &zeros,
            tolerance,
            max_iter.unwrap_or(DEFAULT_MAX_ITER_DISCOUNTED),
        )
        .map(SolveOutcome::Discounted),
        Criterion::Average => {
            value_iteration_average(m, map, &zeros, tolerance, max_iter.unwrap_or(DEFAULT_MAX_ITER_AVERAGE))
                .map(SolveOutcome::Average)
        }
    };
    match outcome {
        Ok(o) => Ok(o),
        Err(SolveError::NotConverged(partial)) => Ok(SolveOutcome::Discounted(*partial)),
        Err(SolveError::AverageNotConverged(partial)) => Ok(SolveOutcome::Average(*partial)),
        Err(e) => Err(CliError::input(e)),
    }
}

fn noconv_error(outcome: &SolveOutcome) -> CliError {
    let residual = match outcome {
        SolveOutcome::Discounted(r) => r.residuals.last().copied(),
        SolveOutcome::Average(r) => r.residuals.last().copied(),
        SolveOutcome::Finite(_) => None,
    }
    .unwrap_or(f64::NAN);
    let mut err = CliError::new(
        ErrorCode::NoConv,
        format!("no convergence after {} iterations (last residual {residual})", outcome.iterations()),
    );
    err.hint = Some(match outcome {
        SolveOutcome::Average(_) => {
            "the span contraction may fail on this chain (periodic?); retry with --aperiodicity 0.1".into()
        }
        _ => "raise max_iter or loosen tolerance".into(),
    });
    err
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<CmdOutput, CliError> {
    let (loaded, start) = cfg.load()?;
    let map = cfg.map.build(&loaded.mdp).map_err(CliError::input)?;
    let outcome = solve_with(&loaded.mdp, map.as_ref(), cfg.criterion, cfg.tolerance, cfg.max_iter)?;

    let policy_txt = match &outcome {
        SolveOutcome::Finite(r) => r
            .stage_policies
            .iter()
            .enumerate()
            .map(|(t, f)| format!("stage {t}\n{}", loaded.policy_table(f)))
            .collect::<Vec<_>>()
            .join("\n"),
        other => loaded.policy_table(other.policy()),
    };
    let report = SolveReport {
        criterion: cfg.criterion,
        map: cfg.map.clone(),
        start_state: start,
        start_value: outcome.start_value(start),
        result: outcome,
    };
    let mut out = CmdOutput::ok(vec![("result.json".into(), to_json(&report)), ("policy.txt".into(), policy_txt)]);
    if !report.result.converged() {
        let err = noconv_error(&report.result);
        out.exit_code = err.code.exit_code();
        out.diagnostic = Some(err);
    }
    Ok(out)
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param_value: f64,
    pub start_state_value: f64,
    pub policy_string: String,
    pub iterations: usize,
    pub converged: bool,
    /// Empty unless the point failed before producing a result.
    pub error: String,
}

pub const SWEEP_HEADER: [&str; 6] =
    ["param_value", "start_state_value", "policy_string", "iterations", "converged", "error"];

/// Applies `param = value` to a copy of the configuration.
fn apply_sweep(cfg: &ExperimentConfig, param: &str, value: f64) -> Result<ExperimentConfig, CliError> {
    let mut out = cfg.clone();
    match param {
        "discount" | "alpha" => out.criterion = Criterion::Discounted(value),
        "horizon" => {
            if value < 0.0 || value.fract() != 0.0 {
                return Err(CliError::input(format!("horizon {value} is not a nonnegative integer")));
            }
            out.criterion = Criterion::Finite(value as usize);
        }
        "aperiodicity" | "kappa" => out.aperiodicity = Some(value),
        key => {
            let mut json = serde_json::to_value(&cfg.map).expect("serializable");
            let slot = json
                .get_mut(key)
                .filter(|v| v.is_number())
                .ok_or_else(|| {
                    CliError::input(format!("sweep parameter {key:?} is not a numeric field of the {} map", cfg.map.kind()))
                })?;
            *slot = Value::from(value);
            out.map = serde_json::from_value(json).map_err(CliError::input)?;
        }
    }
    Ok(out)
}

fn sweep_point(cfg: &ExperimentConfig, param: &str, value: f64) -> SweepRow {
    let failed = |e: CliError| SweepRow {
        param_value: value,
        start_state_value: f64::NAN,
        policy_string: String::new(),
        iterations: 0,
        converged: false,
        error: format!("{}: {}", e.code.as_str(), e.message),
    };
    let run = || -> Result<SweepRow, CliError> {
        let point = apply_sweep(cfg, param, value)?;
        let (loaded, start) = point.load()?;
        let map = point.map.build(&loaded.mdp).map_err(CliError::input)?;
        let outcome = solve_with(&loaded.mdp, map.as_ref(), point.criterion, point.tolerance, point.max_iter)?;
        Ok(SweepRow {
            param_value: value,
            start_state_value: outcome.start_value(start),
            policy_string: loaded.policy_string(outcome.policy()),
            iterations: outcome.iterations(),
            converged: outcome.converged(),
            error: String::new(),
        })
    };
    run().unwrap_or_else(failed)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            fmt_float(r.param_value),
            fmt_float(r.start_state_value),
            r.policy_string.clone(),
            r.iterations.to_string(),
            r.converged.to_string(),
            r.error.clone(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Solves once per sweep value (in parallel); rows keep the input order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, CliError> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| CliError::input("config has no sweep section"))?;
    if sweep.values.is_empty() {
        return Err(CliError::input("sweep value list is empty"));
    }
    // reject unknown parameters up front rather than once per row
    apply_sweep(cfg, &sweep.param, sweep.values[0])?;
    cfg.mdp.load(&cfg.base_dir)?;
    Ok(sweep.values.par_iter().map(|&v| sweep_point(cfg, &sweep.param, v)).collect())
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<CmdOutput, CliError> {
    let rows = run_sweep(cfg)?;
    Ok(CmdOutput::ok(vec![("sweep.csv".into(), sweep_csv(&rows))]))
}

/// Contents of `summary.json` written by `learn`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnSummary {
    pub algorithm: Algorithm,
    pub trials: usize,
    pub v1_star: f64,
    pub final_mean_abs_error: f64,
    pub final_mean_v1: f64,
}

pub fn learn_config(cfg: &ExperimentConfig, start: usize) -> Result<LearnConfig, CliError> {
    let Criterion::Discounted(alpha) = cfg.criterion else {
        return Err(CliError::input("learning needs a discounted:alpha criterion"));
    };
    let lambda = match (&cfg.learning.algorithm, &cfg.map) {
        (Algorithm::QLearning, MapDescriptor::Entropic { lambda }) if *lambda != 0.0 => *lambda,
        (Algorithm::QLearning, _) => {
            return Err(CliError::input("q_learning needs an entropic map with nonzero lambda; use dyna_q otherwise"))
        }
        (Algorithm::DynaQ, _) => 0.0,
    };
    let s = &cfg.learning;
    Ok(LearnConfig {
        discount: alpha,
        lambda,
        episodes: s.episodes,
        steps_per_episode: s.steps_per_episode,
        learning_rate: s.learning_rate,
        exploration: s.exploration,
        planning_steps: s.planning_steps,
        start_state: start,
        seed: cfg.seed,
        eval_tolerance: s.eval_tolerance,
    })
}

pub fn cmd_learn(cfg: &ExperimentConfig) -> Result<CmdOutput, CliError> {
    let (loaded, start) = cfg.load()?;
    let m = &loaded.mdp;
    let lc = learn_config(cfg, start)?;
    lc.validate(m).map_err(CliError::input)?;
    if cfg.learning.trials == 0 {
        return Err(CliError::input("learning.trials must be at least 1"));
    }
    let map = cfg.map.build(m).map_err(CliError::input)?;
    let v_star = optimal_start_value(m, map.as_ref(), &lc).map_err(CliError::input)?;
    let runs: Vec<(QTable, LearnTrace)> = match cfg.learning.algorithm {
        Algorithm::QLearning => run_trials(&lc, cfg.learning.trials, |c| entropic_q_learning(m, c, v_star)),
        Algorithm::DynaQ => run_trials(&lc, cfg.learning.trials, |c| dyna_q(m, map.as_ref(), c, v_star)),
    }
    .map_err(CliError::input)?;
    let traces: Vec<LearnTrace> = runs.iter().map(|(_, t)| t.clone()).collect();
    let mean = LearnTrace::mean(&traces);
    let last = mean.records.last();
    let summary = LearnSummary {
        algorithm: cfg.learning.algorithm,
        trials: cfg.learning.trials,
        v1_star: v_star,
        final_mean_abs_error: last.map_or(f64::NAN, |r| r.abs_error),
        final_mean_v1: last.map_or(f64::NAN, |r| r.v1),
    };
    Ok(CmdOutput::ok(vec![
        ("trace.csv".into(), mean.to_csv()),
        ("qtable.json".into(), to_json(&runs[0].0)),
        ("summary.json".into(), to_json(&summary)),
    ]))
}

pub fn cmd_check(cfg: &ExperimentConfig) -> Result<CmdOutput, CliError> {
    let (loaded, _) = cfg.load()?;
    let map = cfg.map.build(&loaded.mdp).map_err(CliError::input)?;
    if cfg.check.trials == 0 || !(cfg.check.tol >= 0.0) {
        return Err(CliError::input("check needs trials >= 1 and a nonnegative tol"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let report = check_axioms(map.as_ref(), &loaded.mdp, cfg.check.trials, &mut rng, cfg.check.tol);
    let mut out = CmdOutput::ok(vec![("axioms.json".into(), to_json(&report))]);
    if !report.axioms_pass() {
        let failed: Vec<&str> = [
            ("monotonicity", report.monotonicity.passed),
            ("translation", report.translation.passed),
            ("centralization", report.centralization.passed),
        ]
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| *name)
        .collect();
        let err = CliError::new(ErrorCode::Axiom, format!("{} fails {}", report.map, failed.join(", ")));
        out.exit_code = err.code.exit_code();
        out.diagnostic = Some(err);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_float(0.1), "0.1");
        assert_eq!(fmt_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_float(123456.7890123456), "123456.789012");
        assert_eq!(fmt_float(-2.5e-9), "-0.0000000025");
        assert_eq!(fmt_float(f64::NAN), "NaN");
        assert_eq!(fmt_float(3.0), "3");
    }

    #[test]
    fn criterion_parsing() {
        assert_eq!("finite:5".parse::<Criterion>().unwrap(), Criterion::Finite(5));
        assert_eq!("discounted:0.99".parse::<Criterion>().unwrap(), Criterion::Discounted(0.99));
        assert_eq!("average".parse::<Criterion>().unwrap(), Criterion::Average);
        assert!("discounted:1.2".parse::<Criterion>().is_err());
        assert!("total".parse::<Criterion>().is_err());
        assert_eq!(Criterion::Discounted(0.99).to_string(), "discounted:0.99");
    }

    #[test]
    fn config_sources_parse() {
        let cfg = ExperimentConfig::from_json(
            r#"{"mdp": {"source": "betting", "win_prob": 0.1}, "map": {"kind": "expectation"}}"#,
        )
        .unwrap();
        assert!(matches!(cfg.mdp, MdpSource::Betting(BettingGameSpec { win_prob, .. }) if win_prob == 0.1));
        let cfg = ExperimentConfig::from_json(r#"{"mdp": {"source": "gridworld"}, "criterion": "average"}"#).unwrap();
        assert!(matches!(cfg.mdp, MdpSource::Gridworld(_)));
        let err = ExperimentConfig::from_json(r#"{"mdp": {"source": "betting", "bogus": 1}}"#).unwrap_err();
        assert_eq!(err.code, ErrorCode::Parse);
        assert!(ExperimentConfig::from_json("{not json").is_err());
    }

    #[test]
    fn sweep_parameter_must_exist() {
        let cfg = ExperimentConfig::from_json(
            r#"{"mdp": {"source": "betting"}, "map": {"kind": "entropic", "lambda": 0.1},
                "sweep": {"param": "tau", "values": [0.1]}}"#,
        )
        .unwrap();
        assert_eq!(run_sweep(&cfg).unwrap_err().code, ErrorCode::Input);
        let point = apply_sweep(&cfg, "lambda", -0.2).unwrap();
        assert_eq!(point.map, MapDescriptor::Entropic { lambda: -0.2 });
        let point = apply_sweep(&cfg, "discount", 0.5).unwrap();
        assert_eq!(point.criterion, Criterion::Discounted(0.5));
    }

    #[test]
    fn sweep_csv_quotes_policy() {
        let row = SweepRow {
            param_value: -0.5,
            start_state_value: 2.0,
            policy_string: "no,no".into(),
            iterations: 10,
            converged: true,
            error: String::new(),
        };
        assert_eq!(
            sweep_csv(&[row]),
            "param_value,start_state_value,policy_string,iterations,converged,error\n-0.5,2,\"no,no\",10,true,\n"
        );
    }
}
