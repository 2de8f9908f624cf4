//! Reference solutions and evaluation: quantal response equilibria,
//! soft-optimal (Boltzmann) densities, exploitability and cross-play.

use std::sync::Arc;

use crate::density::{Density, Support};
use crate::games::MatrixGame;
use crate::policy::{JointPolicy, Player};
use crate::{Error, Result};

/// The density maximizing `<g, u> + α·H(g)`, i.e. `g ∝ exp(u/α)` with
/// normalization taken over the cell measures.
pub fn soft_optimal(values: &[f64], support: Arc<Support>, alpha: f64) -> Result<Density> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("temperature {alpha} must be positive")));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Value(format!("value {v}")));
    }
    Density::from_log_values(support, values.iter().map(|v| v / alpha).collect())
}

/// Each player's logit response to the other's current density.
pub fn logit_response(game: &MatrixGame, pi: &JointPolicy, alpha: f64) -> Result<JointPolicy> {
    let nu1 = game.marginal_q(Player::One, &pi.p2)?;
    let nu2 = game.marginal_q(Player::Two, &pi.p1)?;
    Ok(JointPolicy::new(
        soft_optimal(&nu1, game.support(Player::One).clone(), alpha)?,
        soft_optimal(&nu2, game.support(Player::Two).clone(), alpha)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QreOptions {
    /// Weight of the logit response in `π ← (1-λ)·π + λ·logit(π)`.
    pub damping: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for QreOptions {
    fn default() -> Self {
        QreOptions {
            damping: 0.5,
            tol: 1e-10,
            max_iters: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QreSolution {
    pub policy: JointPolicy,
    /// Max over players of the l∞ distance between the policy and its
    /// logit response.
    pub residual: f64,
    pub alpha: f64,
    pub iterations_used: usize,
}

/// QRE at temperature `alpha` with the default damping of 0.5.
pub fn qre_solve(game: &MatrixGame, alpha: f64, tol: f64, max_iters: usize) -> Result<QreSolution> {
    qre_solve_with(
        game,
        alpha,
        &QreOptions {
            tol,
            max_iters,
            ..QreOptions::default()
        },
    )
}

/// Damped logit fixed-point iteration from the uniform policy. The damping
/// starts at `options.damping` and is halved whenever the residual has not
/// improved over a window of iterations; undamped logit iteration cycles on
/// most games once payoff differences exceed a few multiples of `alpha`.
pub fn qre_solve_with(game: &MatrixGame, alpha: f64, options: &QreOptions) -> Result<QreSolution> {
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("QRE temperature {alpha} must be positive")));
    }
    if !(options.damping > 0.0 && options.damping <= 1.0) {
        return Err(Error::Config(format!("damping {} must lie in (0, 1]", options.damping)));
    }
    const WINDOW: usize = 50;
    let mut pi = game.uniform_policy();
    let mut residual = f64::INFINITY;
    let mut damping = options.damping;
    let mut checkpoint = f64::INFINITY;
    for iteration in 0..=options.max_iters {
        let response = logit_response(game, &pi, alpha)?;
        residual = pi.linf_dist(&response)?;
        if residual <= options.tol {
            return Ok(QreSolution {
                policy: pi,
                residual,
                alpha,
                iterations_used: iteration,
            });
        }
        if !residual.is_finite() {
            break;
        }
        if iteration % WINDOW == 0 {
            if residual >= checkpoint && damping > 1e-6 {
                damping *= 0.5;
            }
            checkpoint = residual;
        }
        pi = JointPolicy::new(pi.p1.mix(&response.p1, damping)?, pi.p2.mix(&response.p2, damping)?);
    }
    Err(Error::Convergence {
        what: format!("QRE at alpha = {alpha}"),
        residual,
        iterations: options.max_iters,
    })
}

/// Per-player best-response gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exploitability {
    pub per_player: [f64; 2],
    /// Index of the best pure response of each player (lowest index on ties).
    pub best_response: [usize; 2],
}

impl Exploitability {
    /// NashConv: the sum of the per-player gains.
    pub fn total(&self) -> f64 {
        self.per_player[0] + self.per_player[1]
    }
}

/// Gain each player could obtain by switching to a best pure response,
/// `max_a ν_i(a) - <π_i, ν_i>`.
pub fn exploitability(game: &MatrixGame, pi: &JointPolicy) -> Result<Exploitability> {
    let mut per_player = [0.0; 2];
    let mut best_response = [0; 2];
    for player in Player::BOTH {
        let nu = game.marginal_q(player, pi.player(player.other()))?;
        let own = pi.player(player);
        own.ensure_same_support(&Density::uniform(game.support(player).clone()))?;
        let (best, best_value) = nu
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        per_player[player.index()] = (best_value - own.expectation(&nu)).max(0.0);
        best_response[player.index()] = best;
    }
    Ok(Exploitability {
        per_player,
        best_response,
    })
}

/// Cross-play scores of two joint policies: `scores[x][y]` is the total
/// return of policy `x` when its player-one density faces `y`'s player-two
/// density and its player-two density faces `y`'s player-one density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossPlayTable {
    pub scores: [[f64; 2]; 2],
}

/// Total return of `x` against `y` summed over both role assignments.
pub fn cross_play_score(game: &MatrixGame, x: &JointPolicy, y: &JointPolicy) -> Result<f64> {
    let as_one = game.expected_payoff(Player::One, &JointPolicy::new(x.p1.clone(), y.p2.clone()))?;
    let as_two = game.expected_payoff(Player::Two, &JointPolicy::new(y.p1.clone(), x.p2.clone()))?;
    Ok(as_one + as_two)
}

pub fn cross_play(game: &MatrixGame, a: &JointPolicy, b: &JointPolicy) -> Result<CrossPlayTable> {
    let pair = [a, b];
    let mut scores = [[0.0; 2]; 2];
    for (i, x) in pair.iter().enumerate() {
        for (j, y) in pair.iter().enumerate() {
            scores[i][j] = cross_play_score(game, x, y)?;
        }
    }
    Ok(CrossPlayTable { scores })
}
