//! Exact tabular policy optimization with a regularized leader.
//!
//! Each outer round alternates two phases on a [`TabularSG`]:
//!
//! 1. **Soft policy evaluation.** The state-action table of player one is
//!    iterated under the exact-expectation soft Bellman operator
//!    `Q(s,a) ← r(s,a) + γ·E_{s'}[V(s')]` with
//!    `V(s') = E_{a'~π(s')}[Q(s',a')] + α·H(π₁(s')) - α·H(π₂(s'))`,
//!    i.e. player one is credited its own entropy and debited the
//!    opponent's. The bootstrap reads a target table that is mixed toward
//!    each new sweep with coefficient `damping_tau`.
//! 2. **Per-state improvement.** Every state's Q slice defines a zero-sum
//!    matrix game, and both players take the closed-form mirror-descent
//!    step on it. In the tabular case the KL projection of the parametric
//!    method is attained exactly.
//!
//! Sample collection and replay are replaced by exact expectations.

use serde::{Deserialize, Serialize};

use crate::density::{self, Density};
use crate::dynamics::{md_step, Trajectory, TrajectoryPoint};
use crate::equilibrium::{exploitability, qre_solve};
use crate::games::{MatrixGame, TabularSG};
use crate::policy::{JointPolicy, Player};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PorlConfig {
    pub eta: f64,
    pub alpha: f64,
    /// Maximum soft Bellman sweeps per evaluation.
    pub eval_sweeps: usize,
    /// Mirror-descent steps per outer round against the evaluated table.
    #[serde(default = "one")]
    pub improve_steps: usize,
    pub outer_iterations: usize,
    /// Weight of the newest sweep in the target table (1 = no damping).
    #[serde(default = "one_f64")]
    pub damping_tau: f64,
    pub eval_tol: f64,
}

fn one() -> usize {
    1
}

fn one_f64() -> f64 {
    1.0
}

impl PorlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta = {} must be positive", self.eta)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha = {} must be nonnegative", self.alpha)));
        }
        if self.eval_sweeps == 0 || self.improve_steps == 0 {
            return Err(Error::Config("eval_sweeps and improve_steps must be positive".into()));
        }
        if !(self.damping_tau > 0.0 && self.damping_tau <= 1.0) {
            return Err(Error::Config(format!(
                "damping_tau = {} must lie in (0, 1]",
                self.damping_tau
            )));
        }
        if !(self.eval_tol >= 0.0) {
            return Err(Error::Config("eval_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Player one's state-action values `Q(s, a1, a2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ {
    states: usize,
    actions: [usize; 2],
    values: Vec<f64>,
}

impl TabularQ {
    pub fn zeros(states: usize, actions: [usize; 2]) -> Self {
        TabularQ {
            states,
            actions,
            values: vec![0.0; states * actions[0] * actions[1]],
        }
    }

    pub fn get(&self, s: usize, a1: usize, a2: usize) -> f64 {
        self.values[(s * self.actions[0] + a1) * self.actions[1] + a2]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The `d1 x d2` slice of state `s`.
    pub fn state_slice(&self, s: usize) -> Vec<Vec<f64>> {
        let [d1, d2] = self.actions;
        (0..d1)
            .map(|a1| (0..d2).map(|a2| self.get(s, a1, a2)).collect())
            .collect()
    }

    pub fn sup_dist(&self, other: &TabularQ) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Zero-sum matrix game induced by the Q slice of state `s`.
pub fn state_game(q: &TabularQ, s: usize) -> Result<MatrixGame> {
    MatrixGame::zero_sum(q.state_slice(s))
}

pub fn uniform_policy(sg: &TabularSG) -> Vec<JointPolicy> {
    let [d1, d2] = sg.actions();
    let game = MatrixGame::zero_sum(vec![vec![0.0; d2]; d1]).expect("non-empty action sets");
    vec![game.uniform_policy(); sg.states()]
}

/// Soft value of state `s` to player one under `pi` and table `q`.
pub fn soft_state_value(q: &TabularQ, pi: &JointPolicy, s: usize, alpha: f64) -> f64 {
    let [d1, d2] = q.actions;
    let p1 = pi.p1.masses();
    let p2 = pi.p2.masses();
    let mut v = 0.0;
    for a1 in 0..d1 {
        for a2 in 0..d2 {
            v += p1[a1] * p2[a2] * q.get(s, a1, a2);
        }
    }
    v + alpha * (density::entropy(&pi.p1) - density::entropy(&pi.p2))
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub q: TabularQ,
    pub sweeps: usize,
    pub converged: bool,
    /// Sup-norm change of the target table at each sweep.
    pub deltas: Vec<f64>,
}

fn check_policy(sg: &TabularSG, pi: &[JointPolicy]) -> Result<()> {
    if pi.len() != sg.states() {
        return Err(Error::SupportMismatch(format!(
            "{} state policies for {} states",
            pi.len(),
            sg.states()
        )));
    }
    let [d1, d2] = sg.actions();
    if let Some(s) = pi.iter().position(|p| p.p1.len() != d1 || p.p2.len() != d2) {
        return Err(Error::SupportMismatch(format!(
            "policy at state {s} does not match the action sets {d1}x{d2}"
        )));
    }
    Ok(())
}

/// Soft policy evaluation from a zero table.
pub fn soft_policy_evaluation(sg: &TabularSG, pi: &[JointPolicy], config: &PorlConfig) -> Result<Evaluation> {
    let [d1, d2] = sg.actions();
    soft_policy_evaluation_from(sg, pi, config, &TabularQ::zeros(sg.states(), [d1, d2]))
}

/// Soft policy evaluation warm-started from `init`. Sweeps are synchronous:
/// every entry of a sweep reads the previous target table.
pub fn soft_policy_evaluation_from(
    sg: &TabularSG,
    pi: &[JointPolicy],
    config: &PorlConfig,
    init: &TabularQ,
) -> Result<Evaluation> {
    config.validate()?;
    sg.validate()?;
    check_policy(sg, pi)?;
    let [d1, d2] = sg.actions();
    if init.states != sg.states() || init.actions != [d1, d2] {
        return Err(Error::Model("initial Q table has the wrong shape".into()));
    }
    let gamma = sg.gamma();
    let tau = config.damping_tau;
    let mut target = init.clone();
    let mut deltas = Vec::new();
    let mut converged = false;

    for _ in 0..config.eval_sweeps {
        let v: Vec<f64> = (0..sg.states())
            .map(|s| {
                if sg.is_terminal(s) {
                    0.0
                } else {
                    soft_state_value(&target, &pi[s], s, config.alpha)
                }
            })
            .collect();
        let mut next = target.clone();
        let mut delta = 0.0f64;
        for s in 0..sg.states() {
            for a1 in 0..d1 {
                for a2 in 0..d2 {
                    let r = sg.reward(s, a1, a2);
                    let backup = if sg.is_terminal(s) || gamma == 0.0 {
                        r
                    } else {
                        let ev: f64 = sg
                            .transition_row(s, a1, a2)
                            .iter()
                            .zip(&v)
                            .map(|(p, vs)| p * vs)
                            .sum();
                        r + gamma * ev
                    };
                    let idx = (s * d1 + a1) * d2 + a2;
                    let old = target.values[idx];
                    let mixed = if tau == 1.0 { backup } else { (1.0 - tau) * old + tau * backup };
                    if !mixed.is_finite() {
                        return Err(Error::Value(format!("Q({s}, {a1}, {a2}) = {mixed}")));
                    }
                    delta = delta.max((mixed - old).abs());
                    next.values[idx] = mixed;
                }
            }
        }
        target = next;
        deltas.push(delta);
        if delta <= config.eval_tol {
            converged = true;
            break;
        }
    }

    Ok(Evaluation {
        q: target,
        sweeps: deltas.len(),
        converged,
        deltas,
    })
}

/// One closed-form mirror-descent step at every state against the state's
/// Q slice.
pub fn per_state_improve(
    sg: &TabularSG,
    pi_t: &[JointPolicy],
    q: &TabularQ,
    eta: f64,
    alpha: f64,
) -> Result<Vec<JointPolicy>> {
    check_policy(sg, pi_t)?;
    if let Some(v) = q.values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Value(format!("Q entry {v}")));
    }
    (0..sg.states())
        .map(|s| md_step(&pi_t[s], &state_game(q, s)?, eta, alpha))
        .collect()
}

/// Regularized per-state objective `<π, ν> + α·H(π) - KL(π, π_t)/η` of one
/// player, with `ν` the marginal of the state's Q slice against the
/// opponent's density at `anchor`.
pub fn per_state_objective(
    q: &TabularQ,
    s: usize,
    player: Player,
    pi: &Density,
    anchor: &JointPolicy,
    eta: f64,
    alpha: f64,
) -> Result<f64> {
    let game = state_game(q, s)?;
    let nu = game.marginal_q(player, anchor.player(player.other()))?;
    let own_anchor = anchor.player(player);
    Ok(pi.expectation(&nu) + alpha * density::entropy(pi) - density::kl(pi, own_anchor)? / eta)
}

#[derive(Debug, Clone)]
pub struct PorlRun {
    pub policy: Vec<JointPolicy>,
    /// Soft Q of the final policy.
    pub q: TabularQ,
    /// Per round: summed per-state KL to the reference, exploitability,
    /// entropies and soft value at state 0.
    pub trajectory: Trajectory,
    /// Set when some evaluation stopped at `eval_sweeps` before reaching
    /// `eval_tol`.
    pub eval_warning: bool,
}

fn record(
    t: usize,
    pi: &[JointPolicy],
    q: &TabularQ,
    alpha: f64,
    reference: Option<&[JointPolicy]>,
) -> Result<TrajectoryPoint> {
    let kl_ref = match reference {
        Some(r) => r.iter().zip(pi).map(|(a, b)| a.kl(b)).sum::<Result<f64>>()?,
        None => f64::NAN,
    };
    Ok(TrajectoryPoint {
        t,
        kl_ref,
        exploitability: exploitability(&state_game(q, 0)?, &pi[0])?.total(),
        entropy_1: density::entropy(&pi[0].p1),
        entropy_2: density::entropy(&pi[0].p2),
        value: soft_state_value(q, &pi[0], 0, alpha),
    })
}

/// Alternates soft evaluation and per-state improvement from the uniform
/// policy for `outer_iterations` rounds. Evaluations are warm-started from
/// the previous round's table.
pub fn run_porl(sg: &TabularSG, config: &PorlConfig, reference: Option<&[JointPolicy]>) -> Result<PorlRun> {
    config.validate()?;
    if let Some(r) = reference {
        check_policy(sg, r)?;
    }
    let mut pi = uniform_policy(sg);
    let mut eval = soft_policy_evaluation(sg, &pi, config)?;
    let mut eval_warning = !eval.converged;
    let mut points = vec![record(0, &pi, &eval.q, config.alpha, reference)?];
    let mut max_density = pi.iter().map(JointPolicy::max_value).fold(0.0, f64::max);

    for t in 1..=config.outer_iterations {
        for _ in 0..config.improve_steps {
            pi = per_state_improve(sg, &pi, &eval.q, config.eta, config.alpha)?;
        }
        eval = soft_policy_evaluation_from(sg, &pi, config, &eval.q)?;
        eval_warning |= !eval.converged;
        max_density = pi.iter().map(JointPolicy::max_value).fold(max_density, f64::max);
        points.push(record(t, &pi, &eval.q, config.alpha, reference)?);
    }

    let mut warnings = Vec::new();
    if eval_warning {
        warnings.push(format!(
            "soft policy evaluation hit eval_sweeps = {} before eval_tol = {:e}",
            config.eval_sweeps, config.eval_tol
        ));
    }
    Ok(PorlRun {
        trajectory: Trajectory {
            points,
            final_policy: pi[0].clone(),
            max_density,
            warnings,
        },
        policy: pi,
        q: eval.q,
        eval_warning,
    })
}

#[derive(Debug, Clone)]
pub struct SoftEquilibrium {
    pub policy: Vec<JointPolicy>,
    pub q: TabularQ,
    /// Sup-norm change of the last value-iteration sweep.
    pub residual: f64,
}

/// Regularized equilibrium of a zero-sum stochastic game by soft Shapley
/// iteration: every sweep solves the QRE of each state's Q slice and backs up
/// its soft value. Independent of the policy-optimization loop, so it serves
/// as the reference for [`run_porl`].
pub fn soft_shapley_equilibrium(sg: &TabularSG, alpha: f64, tol: f64, max_sweeps: usize) -> Result<SoftEquilibrium> {
    sg.validate()?;
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("equilibrium temperature {alpha} must be positive")));
    }
    let [d1, d2] = sg.actions();
    let mut q = TabularQ::zeros(sg.states(), [d1, d2]);
    let mut residual = f64::INFINITY;
    let solve = |q: &TabularQ| -> Result<Vec<JointPolicy>> {
        (0..sg.states())
            .map(|s| Ok(qre_solve(&state_game(q, s)?, alpha, 1e-13, 1_000_000)?.policy))
            .collect()
    };
    for _ in 0..max_sweeps {
        let pi = solve(&q)?;
        let v: Vec<f64> = (0..sg.states())
            .map(|s| if sg.is_terminal(s) { 0.0 } else { soft_state_value(&q, &pi[s], s, alpha) })
            .collect();
        let mut next = q.clone();
        for s in 0..sg.states() {
            for a1 in 0..d1 {
                for a2 in 0..d2 {
                    let mut backup = sg.reward(s, a1, a2);
                    if !sg.is_terminal(s) {
                        let ev: f64 = sg.transition_row(s, a1, a2).iter().zip(&v).map(|(p, vs)| p * vs).sum();
                        backup += sg.gamma() * ev;
                    }
                    next.values[(s * d1 + a1) * d2 + a2] = backup;
                }
            }
        }
        residual = next.sup_dist(&q);
        q = next;
        if residual <= tol {
            return Ok(SoftEquilibrium { policy: solve(&q)?, q, residual });
        }
    }
    Err(Error::Convergence {
        what: "soft Shapley iteration".into(),
        residual,
        iterations: max_sweeps,
    })
}
