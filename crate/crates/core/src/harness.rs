//! Config-driven experiments.
//!
//! An [`ExperimentConfig`] names a game, a solver and a reference policy.
//! [`run`] executes the solver once per seed, computes every trajectory in
//! memory and only then writes the output directory:
//!
//! ```text
//! <output_dir>/seed_<s>.csv          t,kl_ref,exploitability,entropy_p1,entropy_p2,value
//! <output_dir>/seed_<s>_policy.json  final policy
//! <output_dir>/summary.csv           config_hash,metric,mean,se,n
//! ```
//!
//! [`sweep`] repeats a run over values of one hyperparameter and adds
//! `sweep.csv` (`axis_value,final_metric_mean,final_metric_se`), and
//! [`crossplay_report`] tabulates pairwise cross-play scores. Seeds and
//! sweep points run on a rayon pool whose size is capped by the
//! `PORL_DYN_THREADS` environment variable.

mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::density::{self, Density, Support};
use crate::dynamics::{csv_error, points_to_csv, read_trajectory_csv, run_dynamics_from, DynamicsConfig, TrajectoryPoint};
use crate::equilibrium::{cross_play_score, qre_solve, soft_optimal};
use crate::games::{KernelSpec, MatrixGame, TabularSG};
use crate::param_policy::{ActionValue, Quadratic, SquashedGaussian, TrainConfig, Trainer};
use crate::policy::JointPolicy;
use crate::tabular_sg::{run_porl, soft_shapley_equilibrium, PorlConfig};
use crate::{Error, Result};

pub use plot::{plot_csv, PlotOptions};

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "PORL_DYN_THREADS";

/// Tolerance for the zero-sum antisymmetry check of cross-play tables.
pub const ANTISYMMETRY_TOL: f64 = 1e-10;

/// Largest grid accepted for discretizing a continuous action space.
const MAX_GRID_CELLS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinGame {
    MatchingPennies,
    RockPaperScissors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameSpec {
    Builtin {
        name: BuiltinGame,
    },
    /// Matrix game JSON file.
    MatrixFile {
        path: PathBuf,
    },
    /// Kernel game discretized on a midpoint grid with `resolution` cells
    /// per axis.
    Kernel {
        kernel: KernelSpec,
        resolution: usize,
    },
    /// Tabular stochastic game JSON file.
    TabularFile {
        path: PathBuf,
    },
    /// Single-agent continuous problem on `(-1, 1)^d` with a quadratic
    /// action value; `resolution` sets the evaluation grid per axis.
    Continuous {
        value: Quadratic,
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
}

fn default_resolution() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSolverConfig {
    pub train: TrainConfig,
    pub init: SquashedGaussian,
    #[serde(default = "default_param_record")]
    pub record_every: usize,
}

fn default_param_record() -> usize {
    100
}

/// The solver and its hyperparameters. The `seed` inside a payload is
/// replaced by each entry of [`ExperimentConfig::seeds`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverSpec {
    Dynamics(DynamicsConfig),
    Porl(PorlConfig),
    ParamPolicy(ParamSolverConfig),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// Regularized equilibrium at `reference_alpha`.
    #[default]
    Qre,
    None,
    /// JSON file: a joint policy (matrix games), one joint policy per state
    /// (tabular games) or a density (continuous problems).
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    #[default]
    Uniform,
    /// Log-densities with i.i.d. `N(0, scale²)` perturbations drawn from the
    /// run's seed.
    Random { scale: f64 },
    /// Relative probability masses per cell for each player.
    Explicit { p1: Vec<f64>, p2: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    pub solver: SolverSpec,
    #[serde(default)]
    pub reference: ReferenceSpec,
    /// Temperature of the reference equilibrium; defaults to the solver's
    /// `alpha`. Set it explicitly when sweeping `alpha` through zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_alpha: Option<f64>,
    #[serde(default)]
    pub initial: InitialSpec,
    pub output_dir: PathBuf,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str, base_dir: &Path) -> Result<Self> {
        let mut config: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        config.base_dir = base_dir.to_path_buf();
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_input(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json_str(&text, &base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        match &self.solver {
            SolverSpec::Dynamics(c) => c.validate()?,
            SolverSpec::Porl(c) => c.validate()?,
            SolverSpec::ParamPolicy(c) => {
                if c.record_every == 0 {
                    return Err(Error::Config("record_every must be positive".into()));
                }
            }
        }
        if let Some(a) = self.reference_alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("reference_alpha = {a} must be positive")));
            }
        }
        if let InitialSpec::Random { scale } = self.initial {
            if !(scale >= 0.0 && scale.is_finite()) {
                return Err(Error::Config(format!("initial scale {scale} must be nonnegative")));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("configs serialize");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    fn solver_alpha(&self) -> f64 {
        match &self.solver {
            SolverSpec::Dynamics(c) => c.alpha,
            SolverSpec::Porl(c) => c.alpha,
            SolverSpec::ParamPolicy(c) => c.train.alpha,
        }
    }

    fn reference_temperature(&self) -> Result<f64> {
        let alpha = self.reference_alpha.unwrap_or_else(|| self.solver_alpha());
        if alpha > 0.0 {
            Ok(alpha)
        } else {
            Err(Error::Config(
                "the qre reference needs a positive temperature; set reference_alpha".into(),
            ))
        }
    }
}

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

/// Exit status for an error: 2 for configuration problems, 3 for
/// convergence failures, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Unsupported(_) | Error::Json(_) => 2,
        Error::Convergence { .. } => 3,
        _ => 1,
    }
}

/// Worker pool sized by `PORL_DYN_THREADS` (rayon's default when unset).
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} = `{v}` is not a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

/// A game instantiated from a [`GameSpec`].
#[derive(Debug, Clone)]
pub enum Problem {
    Matrix(Arc<MatrixGame>),
    Tabular(TabularSG),
    Continuous { value: Quadratic, support: Arc<Support> },
}

pub fn build_problem(spec: &GameSpec, base_dir: &Path) -> Result<Problem> {
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
    Ok(match spec {
        GameSpec::Builtin { name } => Problem::Matrix(Arc::new(match name {
            BuiltinGame::MatchingPennies => MatrixGame::matching_pennies(),
            BuiltinGame::RockPaperScissors => MatrixGame::rock_paper_scissors(),
        })),
        GameSpec::MatrixFile { path } => {
            Problem::Matrix(Arc::new(MatrixGame::from_json_str(&read_input(&resolve(path))?)?))
        }
        GameSpec::Kernel { kernel, resolution } => {
            Problem::Matrix(kernel.build()?.discretize_uniform(*resolution)?)
        }
        GameSpec::TabularFile { path } => Problem::Tabular(TabularSG::from_json_str(&read_input(&resolve(path))?)?),
        GameSpec::Continuous { value, resolution } => {
            let dim = value.center.len();
            if dim == 0 || *resolution < 2 {
                return Err(Error::Config("continuous problems need dim >= 1 and resolution >= 2".into()));
            }
            let cells = (*resolution as f64).powi(dim as i32);
            if cells > MAX_GRID_CELLS as f64 {
                return Err(Error::Config(format!(
                    "evaluation grid of {cells:e} cells exceeds {MAX_GRID_CELLS}"
                )));
            }
            let support = Support::grid(&vec![(-1.0, 1.0); dim], &vec![*resolution; dim])?;
            Problem::Continuous {
                value: value.clone(),
                support: Arc::new(support),
            }
        }
    })
}

/// Parses the `--game` argument of `crossplay`: a builtin name, an inline
/// [`GameSpec`] JSON object, or a path to a matrix game JSON file.
pub fn parse_game_arg(arg: &str) -> Result<Arc<MatrixGame>> {
    let spec = if arg.trim_start().starts_with('{') {
        serde_json::from_str(arg).map_err(|e| Error::Config(format!("game spec: {e}")))?
    } else if let Ok(name) = serde_json::from_value::<BuiltinGame>(Value::String(arg.to_string())) {
        GameSpec::Builtin { name }
    } else {
        GameSpec::MatrixFile { path: PathBuf::from(arg) }
    };
    match build_problem(&spec, Path::new(""))? {
        Problem::Matrix(g) => Ok(g),
        _ => Err(Error::Config("cross-play needs a matrix or kernel game".into())),
    }
}

#[derive(Debug, Clone)]
enum Reference {
    None,
    Matrix(JointPolicy),
    Tabular(Vec<JointPolicy>),
    Continuous(Density),
}

fn build_reference(config: &ExperimentConfig, problem: &Problem) -> Result<Reference> {
    let path = match &config.reference {
        ReferenceSpec::None => return Ok(Reference::None),
        ReferenceSpec::Path(p) => Some(config.resolve(p)),
        ReferenceSpec::Qre => None,
    };
    let load_err = |e: serde_json::Error| Error::Config(format!("reference policy: {e}"));
    Ok(match (problem, path) {
        (Problem::Matrix(game), None) => {
            let alpha = config.reference_temperature()?;
            Reference::Matrix(qre_solve(game, alpha, 1e-13, 1_000_000)?.policy)
        }
        (Problem::Matrix(game), Some(p)) => {
            let pi: JointPolicy = serde_json::from_str(&read_input(&p)?).map_err(load_err)?;
            let uniform = game.uniform_policy();
            pi.p1.ensure_same_support(&uniform.p1)?;
            pi.p2.ensure_same_support(&uniform.p2)?;
            Reference::Matrix(pi)
        }
        (Problem::Tabular(sg), None) => {
            let alpha = config.reference_temperature()?;
            Reference::Tabular(soft_shapley_equilibrium(sg, alpha, 1e-13, 100_000)?.policy)
        }
        (Problem::Tabular(sg), Some(p)) => {
            let pi: Vec<JointPolicy> = serde_json::from_str(&read_input(&p)?).map_err(load_err)?;
            if pi.len() != sg.states() {
                return Err(Error::SupportMismatch(format!(
                    "reference has {} states, game has {}",
                    pi.len(),
                    sg.states()
                )));
            }
            Reference::Tabular(pi)
        }
        (Problem::Continuous { value, support }, None) => {
            let alpha = config.reference_temperature()?;
            Reference::Continuous(soft_optimal(&grid_values(value, support), support.clone(), alpha)?)
        }
        (Problem::Continuous { support, .. }, Some(p)) => {
            let d: Density = serde_json::from_str(&read_input(&p)?).map_err(load_err)?;
            d.ensure_same_support(&Density::uniform(support.clone()))?;
            Reference::Continuous(d)
        }
    })
}

fn grid_values(q: &Quadratic, support: &Support) -> Vec<f64> {
    support.cells().iter().map(|c| q.value(&c.center)).collect()
}

fn masses_to_density(support: &Arc<Support>, masses: &[f64], who: &str) -> Result<Density> {
    if masses.len() != support.len() {
        return Err(Error::Config(format!(
            "initial {who} has {} entries for {} cells",
            masses.len(),
            support.len()
        )));
    }
    if let Some(m) = masses.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        return Err(Error::Config(format!("initial {who} mass {m} must be positive")));
    }
    let logs = masses
        .iter()
        .enumerate()
        .map(|(i, m)| m.ln() - support.measure(i).ln())
        .collect();
    Density::from_log_values(support.clone(), logs)
}

fn initial_policy(spec: &InitialSpec, game: &MatrixGame, seed: u64) -> Result<JointPolicy> {
    use crate::policy::Player;
    let s1 = game.support(Player::One);
    let s2 = game.support(Player::Two);
    match spec {
        InitialSpec::Uniform => Ok(game.uniform_policy()),
        InitialSpec::Random { scale } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = |s: &Arc<Support>| {
                let logs = (0..s.len())
                    .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                    .collect();
                Density::from_log_values(s.clone(), logs)
            };
            let p1 = draw(s1)?;
            Ok(JointPolicy::new(p1, draw(s2)?))
        }
        InitialSpec::Explicit { p1, p2 } => Ok(JointPolicy::new(
            masses_to_density(s1, p1, "p1")?,
            masses_to_density(s2, p2, "p2")?,
        )),
    }
}

/// Result of one seed, held in memory until the whole run succeeds.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub points: Vec<TrajectoryPoint>,
    /// Final policy as pretty-printed JSON.
    pub policy_json: String,
    pub warnings: Vec<String>,
}

impl SeedResult {
    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("every run records its initial point")
    }
}

fn run_seed(config: &ExperimentConfig, problem: &Problem, reference: &Reference, seed: u64) -> Result<SeedResult> {
    match (&config.solver, problem) {
        (SolverSpec::Dynamics(dc), Problem::Matrix(game)) => {
            let dc = DynamicsConfig { seed, ..dc.clone() };
            let initial = initial_policy(&config.initial, game, seed)?;
            let reference = match reference {
                Reference::Matrix(r) => Some(r),
                _ => None,
            };
            let traj = run_dynamics_from(game, &dc, initial, reference)?;
            Ok(SeedResult {
                seed,
                policy_json: serde_json::to_string_pretty(&traj.final_policy)?,
                points: traj.points,
                warnings: traj.warnings,
            })
        }
        (SolverSpec::Porl(pc), Problem::Matrix(_) | Problem::Tabular(_)) => {
            if config.initial != InitialSpec::Uniform {
                return Err(Error::Config("the porl solver starts from the uniform policy".into()));
            }
            let sg = match problem {
                Problem::Matrix(g) => TabularSG::from_matrix_game(g)?,
                Problem::Tabular(sg) => sg.clone(),
                Problem::Continuous { .. } => unreachable!(),
            };
            let reference = match reference {
                Reference::Tabular(r) => Some(r.clone()),
                Reference::Matrix(r) => Some(vec![r.clone()]),
                _ => None,
            };
            let out = run_porl(&sg, pc, reference.as_deref())?;
            Ok(SeedResult {
                seed,
                policy_json: serde_json::to_string_pretty(&out.policy)?,
                points: out.trajectory.points,
                warnings: out.trajectory.warnings,
            })
        }
        (SolverSpec::ParamPolicy(ps), Problem::Continuous { value, support }) => {
            let reference = match reference {
                Reference::Continuous(d) => Some(d),
                _ => None,
            };
            run_param(ps, value, support, reference, seed)
        }
        (solver, _) => Err(Error::Config(format!(
            "solver `{}` cannot run on this game",
            match solver {
                SolverSpec::Dynamics(_) => "dynamics",
                SolverSpec::Porl(_) => "porl",
                SolverSpec::ParamPolicy(_) => "param_policy",
            }
        ))),
    }
}

fn run_param(
    ps: &ParamSolverConfig,
    value: &Quadratic,
    support: &Arc<Support>,
    reference: Option<&Density>,
    seed: u64,
) -> Result<SeedResult> {
    if ps.init.action_dim() != support.dim() {
        return Err(Error::Config(format!(
            "initial policy has dimension {}, the action space {}",
            ps.init.action_dim(),
            support.dim()
        )));
    }
    let train = TrainConfig { seed, ..ps.train.clone() };
    let q = grid_values(value, support);
    let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let measure = |t: usize, policy: &SquashedGaussian| -> Result<TrajectoryPoint> {
        let d = policy.discretize(support.clone())?;
        let mean = d.expectation(&q);
        Ok(TrajectoryPoint {
            t,
            kl_ref: match reference {
                Some(r) => density::kl(r, &d)?,
                None => f64::NAN,
            },
            exploitability: best - mean,
            entropy_1: density::entropy(&d),
            entropy_2: 0.0,
            value: mean,
        })
    };
    let mut trainer = Trainer::new(&ps.init, &train)?;
    let mut points = vec![measure(0, trainer.policy())?];
    for t in 1..=train.steps {
        trainer.step(value)?;
        if t % ps.record_every == 0 || t == train.steps {
            points.push(measure(t, trainer.policy())?);
        }
    }
    Ok(SeedResult {
        seed,
        points,
        policy_json: serde_json::to_string_pretty(trainer.policy())?,
        warnings: Vec::new(),
    })
}

/// Runs every seed in memory without touching the file system.
pub fn execute(config: &ExperimentConfig) -> Result<Vec<SeedResult>> {
    config.validate()?;
    let problem = build_problem(&config.game, &config.base_dir)?;
    let reference = build_reference(config, &problem)?;
    thread_pool()?.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| run_seed(config, &problem, &reference, seed))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub config_hash: String,
    pub metric: String,
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config_hash: String,
    pub output_dir: PathBuf,
    /// `(seed, trajectory CSV path)` in seed order.
    pub trajectories: Vec<(u64, PathBuf)>,
    pub summary: Vec<SummaryRow>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn metric(&self, name: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.metric == name)
    }
}

/// Sample mean and standard error of the mean (0 for a single sample).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn summarize(config_hash: &str, results: &[SeedResult]) -> Vec<SummaryRow> {
    let metrics: [(&str, fn(&TrajectoryPoint) -> f64); 5] = [
        ("final_kl_ref", |p| p.kl_ref),
        ("final_exploitability", |p| p.exploitability),
        ("final_entropy_p1", |p| p.entropy_1),
        ("final_entropy_p2", |p| p.entropy_2),
        ("final_value", |p| p.value),
    ];
    metrics
        .iter()
        .map(|(name, get)| {
            let xs: Vec<f64> = results.iter().map(|r| get(r.last())).collect();
            let (mean, se) = mean_se(&xs);
            SummaryRow {
                config_hash: config_hash.to_string(),
                metric: name.to_string(),
                mean,
                se,
                n: xs.len(),
            }
        })
        .collect()
}

fn to_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV output is UTF-8")
}

fn from_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

/// Executes `config` and writes its output directory.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    let results = execute(config)?;
    write_run(config, &results)
}

fn write_run(config: &ExperimentConfig, results: &[SeedResult]) -> Result<RunReport> {
    let hash = config.hash();
    let dir = config.resolve(&config.output_dir);
    fs::create_dir_all(&dir)?;
    let mut trajectories = Vec::new();
    let mut warnings = Vec::new();
    for r in results {
        let path = dir.join(format!("seed_{}.csv", r.seed));
        fs::write(&path, points_to_csv(&r.points))?;
        fs::write(dir.join(format!("seed_{}_policy.json", r.seed)), &r.policy_json)?;
        trajectories.push((r.seed, path));
        warnings.extend(r.warnings.iter().map(|w| format!("seed {}: {w}", r.seed)));
    }
    let summary = summarize(&hash, results);
    fs::write(dir.join("summary.csv"), to_csv(&summary))?;
    Ok(RunReport {
        config_hash: hash,
        output_dir: dir,
        trajectories,
        summary,
        warnings,
    })
}

/// A run directory read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedRun {
    pub summary: Vec<SummaryRow>,
    pub trajectories: Vec<(u64, Vec<TrajectoryPoint>)>,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let summary = from_csv(&dir.join("summary.csv"))?;
    let mut trajectories = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(seed) = name.strip_prefix("seed_").and_then(|n| n.strip_suffix(".csv")) {
            let seed: u64 = seed
                .parse()
                .map_err(|_| Error::Config(format!("unexpected file {}", path.display())))?;
            trajectories.push((seed, read_trajectory_csv(fs::File::open(&path)?)?));
        }
    }
    trajectories.sort_by_key(|(s, _)| *s);
    Ok(LoadedRun { summary, trajectories })
}

/// Hyperparameters a sweep can vary, by solver kind, with their location
/// in the serialized config.
fn axis_path(config: &ExperimentConfig, axis: &str) -> Result<Vec<&'static str>> {
    const DYNAMICS: &[&str] = &[
        "eta",
        "alpha",
        "alpha_floor_fraction",
        "alpha_decay",
        "decay_interval",
        "iterations",
        "record_every",
    ];
    const PORL: &[&str] = &[
        "eta",
        "alpha",
        "eval_sweeps",
        "improve_steps",
        "outer_iterations",
        "damping_tau",
        "eval_tol",
    ];
    const TRAIN: &[&str] = &["eta", "alpha", "steps", "batch_size", "learning_rate", "anchor_interval"];
    let find = |names: &[&'static str]| names.iter().copied().find(|n| *n == axis);
    let path = match &config.solver {
        SolverSpec::Dynamics(_) => find(DYNAMICS).map(|n| vec!["solver", n]),
        SolverSpec::Porl(_) => find(PORL).map(|n| vec!["solver", n]),
        SolverSpec::ParamPolicy(_) => find(TRAIN).map(|n| vec!["solver", "train", n]),
    };
    let path = path.or_else(|| match (axis, &config.game) {
        ("reference_alpha", _) => Some(vec!["reference_alpha"]),
        ("resolution", GameSpec::Kernel { .. } | GameSpec::Continuous { .. }) => Some(vec!["game", "resolution"]),
        _ => None,
    });
    path.ok_or_else(|| Error::Config(format!("`{axis}` is not a sweepable parameter of this config")))
}

/// Copy of `base` with one hyperparameter replaced. Integral values are
/// written as JSON integers so that count parameters accept them.
pub fn with_axis(base: &ExperimentConfig, axis: &str, value: f64) -> Result<ExperimentConfig> {
    let path = axis_path(base, axis)?;
    let mut json = serde_json::to_value(base)?;
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut node = &mut json;
    for key in parents {
        node = node
            .get_mut(*key)
            .ok_or_else(|| Error::Config(format!("config has no `{key}` section")))?;
    }
    let number = if value.fract() == 0.0 && value.abs() < 9.0e15 {
        Value::from(value as i64)
    } else {
        serde_json::Number::from_f64(value)
            .map(Value::Number)
            .ok_or_else(|| Error::Config(format!("{axis} = {value} is not a finite number")))?
    };
    node.as_object_mut()
        .ok_or_else(|| Error::Config(format!("cannot set `{axis}`")))?
        .insert(last.to_string(), number);
    let mut config: ExperimentConfig =
        serde_json::from_value(json).map_err(|e| Error::Config(format!("{axis} = {value}: {e}")))?;
    config.base_dir = base.base_dir.clone();
    config.output_dir = base.output_dir.join(format!("{axis}_{value}"));
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub final_metric_mean: f64,
    pub final_metric_se: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub axis: String,
    pub rows: Vec<SweepRow>,
    pub runs: Vec<RunReport>,
    pub table: PathBuf,
}

/// The swept metric: final KL to the reference, or final exploitability
/// when the config has no reference.
fn sweep_metric(config: &ExperimentConfig) -> &'static str {
    match config.reference {
        ReferenceSpec::None => "final_exploitability",
        _ => "final_kl_ref",
    }
}

/// Runs `base` once per value of `axis`. Each point writes its own run
/// directory `<output_dir>/<axis>_<value>`; the aggregate table goes to
/// `<output_dir>/sweep.csv`. Nothing is written unless every point succeeds.
pub fn sweep(base: &ExperimentConfig, axis: &str, values: &[f64]) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|v| with_axis(base, axis, *v))
        .collect::<Result<Vec<_>>>()?;
    let results = thread_pool()?.install(|| configs.par_iter().map(execute).collect::<Result<Vec<_>>>())?;
    let metric = sweep_metric(base);
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    for ((config, res), value) in configs.iter().zip(&results).zip(values) {
        let report = write_run(config, res)?;
        let row = report.metric(metric).expect("summary holds every metric");
        rows.push(SweepRow {
            axis_value: *value,
            final_metric_mean: row.mean,
            final_metric_se: row.se,
        });
        runs.push(report);
    }
    let table = base.resolve(&base.output_dir).join("sweep.csv");
    fs::write(&table, to_csv(&rows))?;
    Ok(SweepReport {
        axis: axis.to_string(),
        rows,
        runs,
        table,
    })
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    from_csv(path)
}

/// Parses a comma-separated list of numbers, as given to `--values`.
pub fn parse_values(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Config(format!("`{v}` is not a number")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossPlayRow {
    pub row_alg: String,
    pub col_alg: String,
    pub score_mean: f64,
}

/// Full pairwise cross-play table `S[X, Y] = u₁(X.p1, Y.p2) + u₂(Y.p1, X.p2)`
/// over the named policies, diagonal included. Zero-sum games are checked
/// for `S[X, Y] = -S[Y, X]`.
pub fn crossplay_report(game: &MatrixGame, policies: &[(String, JointPolicy)]) -> Result<Vec<CrossPlayRow>> {
    if policies.len() < 2 {
        return Err(Error::Config("cross-play needs at least two policies".into()));
    }
    let n = policies.len();
    let mut scores = vec![vec![0.0; n]; n];
    for (i, (name_x, x)) in policies.iter().enumerate() {
        for (j, (name_y, y)) in policies.iter().enumerate() {
            scores[i][j] = cross_play_score(game, x, y).map_err(|e| match e {
                Error::SupportMismatch(m) => Error::SupportMismatch(format!("{name_x} vs {name_y}: {m}")),
                other => other,
            })?;
        }
    }
    if game.is_zero_sum() {
        for i in 0..n {
            for j in i..n {
                let gap = (scores[i][j] + scores[j][i]).abs();
                if gap > ANTISYMMETRY_TOL {
                    return Err(Error::Model(format!(
                        "cross-play of {} and {} is not antisymmetric (gap {gap:e})",
                        policies[i].0, policies[j].0
                    )));
                }
            }
        }
    }
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            rows.push(CrossPlayRow {
                row_alg: policies[i].0.clone(),
                col_alg: policies[j].0.clone(),
                score_mean: scores[i][j],
            });
        }
    }
    Ok(rows)
}

pub fn crossplay_csv(rows: &[CrossPlayRow]) -> String {
    to_csv(rows)
}

pub fn read_crossplay_csv(path: &Path) -> Result<Vec<CrossPlayRow>> {
    from_csv(path)
}

/// Loads a joint policy file, named by its file stem.
pub fn load_named_policy(path: &Path) -> Result<(String, JointPolicy)> {
    let pi: JointPolicy = serde_json::from_str(&read_input(path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("policy")
        .to_string();
    Ok((name, pi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::UpdateRule;

    fn pennies_config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            game: GameSpec::Builtin {
                name: BuiltinGame::MatchingPennies,
            },
            solver: SolverSpec::Dynamics(DynamicsConfig::new(UpdateRule::MirrorDescent, 0.1, 0.2, 200)),
            reference: ReferenceSpec::Qre,
            reference_alpha: None,
            initial: InitialSpec::Explicit {
                p1: vec![0.6, 0.4],
                p2: vec![0.3, 0.7],
            },
            output_dir: dir.to_path_buf(),
            seeds: vec![0, 1],
            base_dir: PathBuf::new(),
        }
    }

    #[test]
    fn config_json_forms() {
        let text = r#"{
            "game": {"kind": "kernel", "kernel": {"name": "bilinear"}, "resolution": 8},
            "solver": {"kind": "dynamics", "eta": 0.1, "alpha": 0.2, "rule": "md", "iterations": 10},
            "reference": "qre",
            "initial": {"random": {"scale": 0.5}},
            "output_dir": "out",
            "seeds": [1, 2, 3]
        }"#;
        let c = ExperimentConfig::from_json_str(text, Path::new("/tmp")).unwrap();
        assert_eq!(c.seeds, vec![1, 2, 3]);
        assert!(matches!(c.solver, SolverSpec::Dynamics(_)));

        let porl = r#"{
            "game": {"kind": "builtin", "name": "matching_pennies"},
            "solver": {"kind": "porl", "eta": 0.5, "alpha": 0.2, "eval_sweeps": 1,
                       "outer_iterations": 10, "eval_tol": 0.0},
            "reference": {"path": "ref.json"},
            "output_dir": "out"
        }"#;
        let c = ExperimentConfig::from_json_str(porl, Path::new("")).unwrap();
        assert!(matches!(c.solver, SolverSpec::Porl(_)));
        assert_eq!(c.reference, ReferenceSpec::Path("ref.json".into()));
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        for text in [
            r#"{"game": {"kind": "builtin", "name": "matching_pennies"}, "solver": {"kind": "dynamics",
                "eta": 0.1, "alpha": 0.2, "rule": "md", "iterations": 10}, "output_dir": "o", "typo": 1}"#,
            r#"{"game": {"kind": "builtin", "name": "matching_pennies"}, "solver": {"kind": "dynamics",
                "eta": 0.1, "alpha": 0.2, "rule": "md", "iterations": 10, "etaa": 1}, "output_dir": "o"}"#,
            r#"{"game": {"kind": "builtin", "name": "matching_pennies", "size": 3}, "solver": {"kind": "dynamics",
                "eta": 0.1, "alpha": 0.2, "rule": "md", "iterations": 10}, "output_dir": "o"}"#,
        ] {
            let err = ExperimentConfig::from_json_str(text, Path::new("")).unwrap_err();
            assert_eq!(exit_code(&err), 2, "{err}");
        }
    }

    #[test]
    fn hash_tracks_content() {
        let dir = Path::new("x");
        let a = pennies_config(dir);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seeds = vec![0, 2];
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn execute_is_deterministic() {
        let c = pennies_config(Path::new("unused"));
        let a = execute(&c).unwrap();
        let b = execute(&c).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(points_to_csv(&x.points), points_to_csv(&y.points));
            assert_eq!(x.policy_json, y.policy_json);
        }
        assert!(a[0].last().kl_ref < a[0].points[0].kl_ref);
    }

    #[test]
    fn zero_temperature_reference_needs_override() {
        let mut c = pennies_config(Path::new("unused"));
        c.solver = SolverSpec::Dynamics(DynamicsConfig::new(UpdateRule::Mwu, 0.1, 0.0, 10));
        assert!(matches!(execute(&c), Err(Error::Config(_))));
        c.reference_alpha = Some(0.2);
        assert!(execute(&c).is_ok());
    }

    #[test]
    fn solver_game_mismatch() {
        let mut c = pennies_config(Path::new("unused"));
        c.game = GameSpec::Continuous {
            value: Quadratic { center: vec![0.3], scale: 1.0 },
            resolution: 50,
        };
        assert!(matches!(execute(&c), Err(Error::Config(_))));
    }

    #[test]
    fn axis_override() {
        let c = pennies_config(Path::new("out"));
        let d = with_axis(&c, "iterations", 7.0).unwrap();
        match d.solver {
            SolverSpec::Dynamics(dc) => assert_eq!(dc.iterations, 7),
            _ => unreachable!(),
        }
        assert_eq!(d.output_dir, Path::new("out").join("iterations_7"));
        assert!(matches!(with_axis(&c, "iterations", 7.5), Err(Error::Config(_))));
        assert!(matches!(with_axis(&c, "outer_iterations", 3.0), Err(Error::Config(_))));
        let d = with_axis(&c, "eta", 0.25).unwrap();
        assert!(matches!(d.solver, SolverSpec::Dynamics(DynamicsConfig { eta, .. }) if eta == 0.25));
    }

    #[test]
    fn mean_and_standard_error() {
        assert_eq!(mean_se(&[2.0]), (2.0, 0.0));
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn crossplay_identities() {
        let g = MatrixGame::matching_pennies();
        let s = g.support(crate::policy::Player::One).clone();
        let a = JointPolicy::new(
            Density::from_values(s.clone(), &[0.7, 0.3]).unwrap(),
            Density::from_values(s.clone(), &[0.2, 0.8]).unwrap(),
        );
        let b = g.uniform_policy();
        let rows = crossplay_report(&g, &[("a".into(), a.clone()), ("b".into(), b)]).unwrap();
        assert_eq!(rows.len(), 4);
        assert!((rows[1].score_mean + rows[2].score_mean).abs() < 1e-12);
        assert!(rows[0].score_mean.abs() < 1e-12);

        let rows = crossplay_report(&g, &[("x".into(), a.clone()), ("y".into(), a.clone())]).unwrap();
        assert_eq!(rows[1].score_mean, rows[2].score_mean);

        let big = MatrixGame::rock_paper_scissors().uniform_policy();
        let err = crossplay_report(&g, &[("a".into(), a), ("rps".into(), big)]).unwrap_err();
        assert!(err.to_string().contains("a vs rps"), "{err}");
    }

    #[test]
    fn values_list() {
        assert_eq!(parse_values("10, 5,0.1").unwrap(), vec![10.0, 5.0, 0.1]);
        assert!(parse_values("1,x").is_err());
    }
}
