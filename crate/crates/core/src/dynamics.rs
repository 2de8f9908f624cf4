//! Closed-form regularized-leader updates and last-iterate trajectories.
//!
//! Both players update simultaneously and each maximizes its own payoff.
//! With `ν` the marginal value of a player's actions against the opponent's
//! current density, the three update rules are, in log space,
//!
//! | rule | new log-density (before normalization) |
//! |------|-----------------------------------------|
//! | mirror descent | `(η·ν + log π) / (η·α + 1)` |
//! | incremental FTRL | `(1 - η·α)·log π + η·ν` |
//! | cumulative FTRL (`α = 0`) | `η·Σ_k ν_k` |
//!
//! At `α = 0` all of them reduce to multiplicative weights. For `α > 0` the
//! mirror-descent step with `(η, α)` is the incremental FTRL step with the
//! rescaled step size `η / (η·α + 1)`.
//!
//! Mirror descent with `α > 0` contracts toward the quantal response
//! equilibrium: `KL(π*, π_t) ≤ (1 + η·α)^{-t}·KL(π*, π_0)` whenever
//! `η ≤ min{1/b², α²/(b²·L⁴)}`, with `b` a bound on every density value and
//! `L` the payoff bound. [`step_size_bound`] evaluates that condition.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::density::{self, Density};
use crate::equilibrium::exploitability;
use crate::games::MatrixGame;
use crate::policy::{JointPolicy, Player};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// Mirror descent with KL proximity and entropy regularization.
    #[serde(rename = "md", alias = "mirror_descent")]
    MirrorDescent,
    /// Incremental FTRL / Hedge with the `-α log π` utility correction.
    Ftrl,
    /// FTRL over the full history of marginal values (requires `α = 0`).
    FtrlCumulative,
    /// Plain multiplicative weights (`α = 0`).
    Mwu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub eta: f64,
    pub alpha: f64,
    #[serde(default = "default_floor")]
    pub alpha_floor_fraction: f64,
    #[serde(default = "default_decay")]
    pub alpha_decay: f64,
    #[serde(default = "default_decay_interval")]
    pub decay_interval: usize,
    pub rule: UpdateRule,
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_floor() -> f64 {
    0.1
}

fn default_decay() -> f64 {
    1.0
}

fn default_decay_interval() -> usize {
    1000
}

fn default_record_every() -> usize {
    1
}

impl DynamicsConfig {
    pub fn new(rule: UpdateRule, eta: f64, alpha: f64, iterations: usize) -> Self {
        DynamicsConfig {
            eta,
            alpha,
            alpha_floor_fraction: default_floor(),
            alpha_decay: default_decay(),
            decay_interval: default_decay_interval(),
            rule,
            iterations,
            seed: 0,
            record_every: default_record_every(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta = {} must be positive", self.eta)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha = {} must be nonnegative", self.alpha)));
        }
        if !(self.alpha_floor_fraction > 0.0 && self.alpha_floor_fraction <= 1.0) {
            return Err(Error::Config("alpha_floor_fraction must lie in (0, 1]".into()));
        }
        if !(self.alpha_decay > 0.0 && self.alpha_decay <= 1.0) {
            return Err(Error::Config("alpha_decay must lie in (0, 1]".into()));
        }
        if self.decay_interval == 0 || self.record_every == 0 {
            return Err(Error::Config("decay_interval and record_every must be positive".into()));
        }
        match self.rule {
            UpdateRule::Mwu if self.alpha != 0.0 => {
                Err(Error::Config("the mwu rule runs with alpha = 0".into()))
            }
            UpdateRule::FtrlCumulative if self.alpha != 0.0 => Err(Error::Unsupported(
                "cumulative FTRL is only defined for alpha = 0".into(),
            )),
            UpdateRule::Ftrl if self.eta * self.alpha >= 1.0 => Err(Error::Config(format!(
                "incremental FTRL needs eta*alpha < 1 (got {})",
                self.eta * self.alpha
            ))),
            _ => Ok(()),
        }
    }

    /// Temperature in effect after `step` updates: multiplicative decay
    /// every `decay_interval` steps, never below `alpha_floor_fraction·α₀`.
    pub fn alpha_at(&self, step: usize) -> f64 {
        let decays = step / self.decay_interval;
        let floor = self.alpha_floor_fraction * self.alpha;
        let mut alpha = self.alpha;
        for _ in 0..decays {
            alpha = (self.alpha_decay * alpha).max(floor);
            if alpha == floor {
                break;
            }
        }
        alpha
    }
}

fn check_finite(nu: &[f64]) -> Result<()> {
    match nu.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(Error::Value(format!("marginal value {v}"))),
        None => Ok(()),
    }
}

/// Single-density mirror-descent update against a value vector `ν`.
pub fn md_update(pi: &Density, nu: &[f64], eta: f64, alpha: f64) -> Result<Density> {
    check_finite(nu)?;
    let scale = eta * alpha + 1.0;
    let logs = pi
        .log_values()
        .iter()
        .zip(nu)
        .map(|(lp, v)| (eta * v + lp) / scale)
        .collect();
    Density::from_log_values(pi.support().clone(), logs)
}

/// Single-density incremental FTRL update against a value vector `ν`.
pub fn ftrl_update(pi: &Density, nu: &[f64], eta: f64, alpha: f64) -> Result<Density> {
    if eta * alpha >= 1.0 {
        return Err(Error::Config(format!(
            "incremental FTRL needs eta*alpha < 1 (got {})",
            eta * alpha
        )));
    }
    check_finite(nu)?;
    let keep = 1.0 - eta * alpha;
    let logs = pi
        .log_values()
        .iter()
        .zip(nu)
        .map(|(lp, v)| keep * lp + eta * v)
        .collect();
    Density::from_log_values(pi.support().clone(), logs)
}

fn validate_step(eta: f64, alpha: f64) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Config(format!("eta = {eta} must be positive")));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Config(format!("alpha = {alpha} must be nonnegative")));
    }
    Ok(())
}

/// Marginal values of both players against the other's current density.
pub fn joint_marginals(pi: &JointPolicy, game: &MatrixGame) -> Result<[Vec<f64>; 2]> {
    Ok([
        game.marginal_q(Player::One, &pi.p2)?,
        game.marginal_q(Player::Two, &pi.p1)?,
    ])
}

/// Simultaneous mirror-descent step for both players.
pub fn md_step(pi: &JointPolicy, game: &MatrixGame, eta: f64, alpha: f64) -> Result<JointPolicy> {
    validate_step(eta, alpha)?;
    let [nu1, nu2] = joint_marginals(pi, game)?;
    Ok(JointPolicy::new(
        md_update(&pi.p1, &nu1, eta, alpha)?,
        md_update(&pi.p2, &nu2, eta, alpha)?,
    ))
}

/// Simultaneous incremental FTRL step for both players. Requires `η·α < 1`.
pub fn ftrl_step(pi: &JointPolicy, game: &MatrixGame, eta: f64, alpha: f64) -> Result<JointPolicy> {
    validate_step(eta, alpha)?;
    let [nu1, nu2] = joint_marginals(pi, game)?;
    Ok(JointPolicy::new(
        ftrl_update(&pi.p1, &nu1, eta, alpha)?,
        ftrl_update(&pi.p2, &nu2, eta, alpha)?,
    ))
}

/// FTRL over the whole history `ν_1..ν_t` of both players' marginal
/// values; `pi_t` only supplies the supports. An empty history gives the
/// uniform policy.
pub fn ftrl_cumulative_step(
    history: &[[Vec<f64>; 2]],
    pi_t: &JointPolicy,
    eta: f64,
    alpha: f64,
) -> Result<JointPolicy> {
    if alpha != 0.0 {
        return Err(Error::Unsupported(
            "cumulative FTRL is only defined for alpha = 0".into(),
        ));
    }
    validate_step(eta, alpha)?;
    let cumulative = |player: Player| -> Result<Density> {
        let d = pi_t.player(player);
        let mut sum = vec![0.0; d.len()];
        for entry in history {
            let nu = &entry[player.index()];
            if nu.len() != d.len() {
                return Err(Error::SupportMismatch(format!(
                    "history entry of length {} for a support of {} cells",
                    nu.len(),
                    d.len()
                )));
            }
            check_finite(nu)?;
            for (s, v) in sum.iter_mut().zip(nu) {
                *s += v;
            }
        }
        Density::from_log_values(d.support().clone(), sum.iter().map(|s| eta * s).collect())
    };
    Ok(JointPolicy::new(cumulative(Player::One)?, cumulative(Player::Two)?))
}

/// Largest step size for which the KL contraction toward the regularized
/// equilibrium is guaranteed: `min{1/b², α²/(b²·L⁴)}`.
pub fn step_size_bound(b: f64, l: f64, alpha: f64) -> f64 {
    let b2 = b * b;
    (1.0 / b2).min(alpha * alpha / (b2 * l.powi(4)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: usize,
    /// Joint KL from the reference to the iterate; NaN without a reference.
    pub kl_ref: f64,
    pub exploitability: f64,
    #[serde(rename = "entropy_p1")]
    pub entropy_1: f64,
    #[serde(rename = "entropy_p2")]
    pub entropy_2: f64,
    /// Expected payoff to player one.
    pub value: f64,
}

pub const TRAJECTORY_HEADER: &str = "t,kl_ref,exploitability,entropy_p1,entropy_p2,value";

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub final_policy: JointPolicy,
    /// Largest density value seen over the run (the `b` of the step-size rule).
    pub max_density: f64,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn to_csv(&self) -> String {
        points_to_csv(&self.points)
    }

    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("a trajectory always holds its initial point")
    }
}

pub fn points_to_csv(points: &[TrajectoryPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(p).expect("in-memory CSV write");
    }
    if points.is_empty() {
        return format!("{TRAJECTORY_HEADER}\n");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV output is UTF-8")
}

/// Parses a trajectory CSV written by [`points_to_csv`].
pub fn read_trajectory_csv(reader: impl Read) -> Result<Vec<TrajectoryPoint>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(csv_error)?.iter().collect::<Vec<_>>().join(",");
    if header != TRAJECTORY_HEADER {
        return Err(Error::Config(format!("unexpected trajectory CSV header `{header}`")));
    }
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::Config(format!("malformed CSV: {e}"))
}

fn measure(
    t: usize,
    game: &MatrixGame,
    pi: &JointPolicy,
    reference: Option<&JointPolicy>,
) -> Result<TrajectoryPoint> {
    Ok(TrajectoryPoint {
        t,
        kl_ref: match reference {
            Some(r) => r.kl(pi)?,
            None => f64::NAN,
        },
        exploitability: exploitability(game, pi)?.total(),
        entropy_1: density::entropy(&pi.p1),
        entropy_2: density::entropy(&pi.p2),
        value: game.expected_payoff(Player::One, pi)?,
    })
}

/// Runs the configured rule from the uniform policy.
pub fn run_dynamics(
    game: &MatrixGame,
    config: &DynamicsConfig,
    reference: Option<&JointPolicy>,
) -> Result<Trajectory> {
    run_dynamics_from(game, config, game.uniform_policy(), reference)
}

/// Runs `config.iterations` simultaneous updates from `initial`, recording
/// metrics at `t = 0` and every `record_every` steps (and at the last step).
pub fn run_dynamics_from(
    game: &MatrixGame,
    config: &DynamicsConfig,
    initial: JointPolicy,
    reference: Option<&JointPolicy>,
) -> Result<Trajectory> {
    config.validate()?;
    let mut pi = initial;
    let mut points = vec![measure(0, game, &pi, reference)?];
    let mut max_density = pi.max_value();
    let mut history: Vec<[Vec<f64>; 2]> = Vec::new();

    for t in 1..=config.iterations {
        let alpha = config.alpha_at(t - 1);
        pi = match config.rule {
            UpdateRule::MirrorDescent => md_step(&pi, game, config.eta, alpha)?,
            UpdateRule::Ftrl => ftrl_step(&pi, game, config.eta, alpha)?,
            UpdateRule::Mwu => md_step(&pi, game, config.eta, 0.0)?,
            UpdateRule::FtrlCumulative => {
                history.push(joint_marginals(&pi, game)?);
                ftrl_cumulative_step(&history, &pi, config.eta, 0.0)?
            }
        };
        max_density = max_density.max(pi.max_value());
        if t % config.record_every == 0 || t == config.iterations {
            points.push(measure(t, game, &pi, reference)?);
        }
    }

    let mut warnings = Vec::new();
    if config.rule == UpdateRule::MirrorDescent && config.alpha > 0.0 && game.is_zero_sum() {
        let b = match reference {
            Some(r) => max_density.max(r.max_value()),
            None => max_density,
        };
        let bound = step_size_bound(b, game.r_max(), config.alpha_at(config.iterations));
        if config.eta > bound {
            warnings.push(format!(
                "eta = {} exceeds the contraction step-size bound {bound:.3e} (b = {b:.4}, L = {})",
                config.eta,
                game.r_max()
            ));
        }
    }

    Ok(Trajectory {
        points,
        final_policy: pi,
        max_density,
        warnings,
    })
}
