//! Parametric regularized-leader policies on `(-1, 1)^d`.
//!
//! The policy is a diagonal Gaussian squashed by `tanh`:
//! `a = tanh(μ + σ⊙ε)` with `ε ~ N(0, I)`. One policy-optimization step
//! minimizes the sampled objective
//!
//! ```text
//! J(θ) = E_{a~π_θ}[ (log π_θ(a) - log π_t(a)) / η - Q(a) + α·log π_θ(a) ]
//! ```
//!
//! whose minimizer over all densities is the mirror-descent target
//! `∝ exp((η·Q + log π_t) / (η·α + 1))`. Gradients are pathwise
//! (reparameterized) and hand-coded; [`Regularizer::Previous`] selects the
//! incremental-FTRL variant that uses `α·log π_t` in place of `α·log π_θ`.
//!
//! All log densities are evaluated in the pre-squash coordinate `u = atanh(a)`
//! with the Jacobian term `log(1 - tanh²u) = 2·(log 2 - u - softplus(-2u))`,
//! which stays accurate for large `|u|`.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::{Density, Support};
use crate::{Error, Result};

/// Actions closer than this to the box boundary are rejected by
/// [`SquashedGaussian::log_prob`].
pub const BOUNDARY_MARGIN: f64 = 1e-9;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `log(1 - tanh²(u))`.
pub fn log_tanh_jacobian(u: f64) -> f64 {
    2.0 * (LN_2 - u - softplus(-2.0 * u))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SquashedGaussian {
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
}

impl SquashedGaussian {
    pub fn new(mu: Vec<f64>, log_sigma: Vec<f64>) -> Result<Self> {
        if mu.is_empty() || mu.len() != log_sigma.len() {
            return Err(Error::Config(format!(
                "mu ({}) and log_sigma ({}) must have the same positive length",
                mu.len(),
                log_sigma.len()
            )));
        }
        if mu.iter().chain(&log_sigma).any(|v| !v.is_finite())
            || log_sigma.iter().any(|ls| !ls.exp().is_finite() || ls.exp() == 0.0)
        {
            return Err(Error::Value("policy parameters must be finite".into()));
        }
        Ok(SquashedGaussian { mu, log_sigma })
    }

    pub fn action_dim(&self) -> usize {
        self.mu.len()
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.log_sigma[i].exp()
    }

    /// Pre-squash point `u = μ + σ⊙ε`.
    pub fn pre_squash(&self, noise: &[f64]) -> Vec<f64> {
        assert_eq!(noise.len(), self.action_dim(), "noise dimension");
        (0..self.action_dim())
            .map(|i| self.mu[i] + self.sigma(i) * noise[i])
            .collect()
    }

    /// Reparameterized sample `a = tanh(μ + σ⊙ε)`.
    pub fn sample(&self, noise: &[f64]) -> Vec<f64> {
        self.pre_squash(noise).into_iter().map(f64::tanh).collect()
    }

    /// Log density at the action `tanh(u)`, given `u`.
    pub fn log_prob_pre_squash(&self, u: &[f64]) -> f64 {
        let half_log_2pi = 0.5 * (2.0 * PI).ln();
        u.iter()
            .enumerate()
            .map(|(i, &ui)| {
                let z = (ui - self.mu[i]) / self.sigma(i);
                -0.5 * z * z - self.log_sigma[i] - half_log_2pi - log_tanh_jacobian(ui)
            })
            .sum()
    }

    /// Log density of an action strictly inside the box.
    pub fn log_prob(&self, action: &[f64]) -> Result<f64> {
        if action.len() != self.action_dim() {
            return Err(Error::Domain(format!(
                "action of dimension {} for a {}-dimensional policy",
                action.len(),
                self.action_dim()
            )));
        }
        if let Some(a) = action.iter().find(|a| !(a.abs() < 1.0 - BOUNDARY_MARGIN)) {
            return Err(Error::Domain(format!("action component {a} is not inside (-1, 1)")));
        }
        let u: Vec<f64> = action.iter().map(|a| a.atanh()).collect();
        Ok(self.log_prob_pre_squash(&u))
    }

    /// Density values on the cell centers of `support`, renormalized over
    /// the cells.
    pub fn discretize(&self, support: Arc<Support>) -> Result<Density> {
        let logs = support
            .cells()
            .iter()
            .map(|c| self.log_prob(&c.center))
            .collect::<Result<Vec<_>>>()?;
        Density::from_log_values(support, logs)
    }
}

/// A differentiable action-value function `Q(a)`.
pub trait ActionValue: Sync {
    fn value(&self, action: &[f64]) -> f64;
    fn gradient(&self, action: &[f64]) -> Vec<f64>;
}

/// `Q(a) = -scale·‖a - center‖²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quadratic {
    pub center: Vec<f64>,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl ActionValue for Quadratic {
    fn value(&self, action: &[f64]) -> f64 {
        -self.scale
            * action
                .iter()
                .zip(&self.center)
                .map(|(a, c)| (a - c) * (a - c))
                .sum::<f64>()
    }

    fn gradient(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(&self.center)
            .map(|(a, c)| -2.0 * self.scale * (a - c))
            .collect()
    }
}

/// Which log density carries the entropy regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    /// `α·log π_θ`: the mirror-descent objective.
    #[default]
    Current,
    /// `α·log π_t`: the incremental-FTRL variant.
    Previous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveSpec {
    /// Step size; `f64::INFINITY` drops the proximity term.
    pub eta: f64,
    pub alpha: f64,
    pub regularizer: Regularizer,
}

impl ObjectiveSpec {
    pub fn new(eta: f64, alpha: f64) -> Self {
        ObjectiveSpec {
            eta,
            alpha,
            regularizer: Regularizer::Current,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::Config(format!("eta = {} must be positive", self.eta)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha = {} must be nonnegative", self.alpha)));
        }
        Ok(())
    }
}

/// A fixed set of standard-normal noise vectors shared by every objective
/// and gradient evaluation of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBatch {
    dim: usize,
    rows: Vec<Vec<f64>>,
}

impl NoiseBatch {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Config("noise rows must share a positive dimension".into()));
        }
        Ok(NoiseBatch { dim, rows })
    }

    pub fn gaussian(dim: usize, size: usize, rng: &mut impl Rng) -> Self {
        let rows = (0..size)
            .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        NoiseBatch { dim, rows }
    }

    /// Antithetic pairs `(ε, -ε)` rescaled per axis to unit sample variance,
    /// so the first two empirical moments match the standard normal exactly.
    pub fn balanced(dim: usize, pairs: usize, rng: &mut impl Rng) -> Self {
        let half: Vec<Vec<f64>> = (0..pairs)
            .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let scale: Vec<f64> = (0..dim)
            .map(|k| (half.iter().map(|r| r[k] * r[k]).sum::<f64>() / pairs as f64).sqrt())
            .collect();
        let mut rows = Vec::with_capacity(2 * pairs);
        for r in &half {
            let scaled: Vec<f64> = r.iter().zip(&scale).map(|(x, s)| x / s).collect();
            rows.push(scaled.iter().map(|x| -x).collect());
            rows.push(scaled);
        }
        NoiseBatch { dim, rows }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

fn check_shapes(theta: &SquashedGaussian, prev: &SquashedGaussian, batch: &NoiseBatch) -> Result<()> {
    if theta.action_dim() != prev.action_dim() || theta.action_dim() != batch.dim() {
        return Err(Error::Config(format!(
            "dimension mismatch: theta {}, previous policy {}, noise {}",
            theta.action_dim(),
            prev.action_dim(),
            batch.dim()
        )));
    }
    if batch.is_empty() {
        return Err(Error::Config("empty noise batch".into()));
    }
    Ok(())
}

fn inv(eta: f64) -> f64 {
    if eta.is_infinite() {
        0.0
    } else {
        1.0 / eta
    }
}

/// Empirical regularized-leader objective over the batch.
pub fn regularized_leader_objective(
    theta: &SquashedGaussian,
    prev: &SquashedGaussian,
    q: &dyn ActionValue,
    spec: &ObjectiveSpec,
    batch: &NoiseBatch,
) -> Result<f64> {
    spec.validate()?;
    check_shapes(theta, prev, batch)?;
    let inv_eta = inv(spec.eta);
    let mut total = 0.0;
    for eps in batch.rows() {
        let u = theta.pre_squash(eps);
        let a: Vec<f64> = u.iter().map(|x| x.tanh()).collect();
        let qa = q.value(&a);
        if !qa.is_finite() {
            return Err(Error::Value(format!("Q({a:?}) = {qa}")));
        }
        let lp_theta = theta.log_prob_pre_squash(&u);
        let lp_prev = prev.log_prob_pre_squash(&u);
        let reg = match spec.regularizer {
            Regularizer::Current => lp_theta,
            Regularizer::Previous => lp_prev,
        };
        let proximity = if inv_eta == 0.0 { 0.0 } else { inv_eta * (lp_theta - lp_prev) };
        total += proximity - qa + spec.alpha * reg;
    }
    Ok(total / batch.len() as f64)
}

/// Gradient with respect to `(μ, log σ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyGradient {
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
}

impl PolicyGradient {
    pub fn norm(&self) -> f64 {
        self.mu
            .iter()
            .chain(&self.log_sigma)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// Pathwise gradient of [`regularized_leader_objective`] on the same batch.
///
/// Holding `ε` fixed, `log π_θ(a(θ, ε)) = Σ_i -ε_i²/2 - log σ_i - log√(2π)
/// - log(1 - tanh²u_i)`, so the only direct parameter dependence is the
/// `-log σ` term; everything else flows through `u = μ + σ⊙ε`.
pub fn regularized_leader_gradient(
    theta: &SquashedGaussian,
    prev: &SquashedGaussian,
    q: &dyn ActionValue,
    spec: &ObjectiveSpec,
    batch: &NoiseBatch,
) -> Result<PolicyGradient> {
    spec.validate()?;
    check_shapes(theta, prev, batch)?;
    let dim = theta.action_dim();
    let inv_eta = inv(spec.eta);
    let sigma: Vec<f64> = (0..dim).map(|i| theta.sigma(i)).collect();
    let prev_var: Vec<f64> = (0..dim).map(|i| prev.sigma(i).powi(2)).collect();
    let mut g_mu = vec![0.0; dim];
    let mut g_ls = vec![0.0; dim];

    for eps in batch.rows() {
        let u = theta.pre_squash(eps);
        let a: Vec<f64> = u.iter().map(|x| x.tanh()).collect();
        let dq = q.gradient(&a);
        if let Some(v) = dq.iter().find(|v| !v.is_finite()) {
            return Err(Error::Value(format!("dQ/da at {a:?} = {v}")));
        }
        for i in 0..dim {
            let jac = log_tanh_jacobian(u[i]).exp();
            let pull_prev = (u[i] - prev.mu[i]) / prev_var[i];
            // d/du of -log(1 - tanh²u)
            let d_jac = 2.0 * a[i];
            let reg = match spec.regularizer {
                Regularizer::Current => d_jac,
                Regularizer::Previous => -pull_prev + d_jac,
            };
            let g_u = inv_eta * pull_prev - dq[i] * jac + spec.alpha * reg;
            g_mu[i] += g_u;
            g_ls[i] += g_u * sigma[i] * eps[i];
        }
    }

    let n = batch.len() as f64;
    let direct = match spec.regularizer {
        Regularizer::Current => -(inv_eta + spec.alpha),
        Regularizer::Previous => -inv_eta,
    };
    Ok(PolicyGradient {
        mu: g_mu.into_iter().map(|g| g / n).collect(),
        log_sigma: g_ls.into_iter().map(|g| g / n + direct).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub eta: f64,
    pub alpha: f64,
    pub steps: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Gradient steps between replacements of the anchor policy `π_t`.
    #[serde(default = "default_anchor")]
    pub anchor_interval: usize,
    #[serde(default)]
    pub regularizer: Regularizer,
    #[serde(default)]
    pub seed: u64,
}

fn default_batch() -> usize {
    256
}

fn default_lr() -> f64 {
    1e-2
}

fn default_anchor() -> usize {
    10
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub policy: SquashedGaussian,
    /// Objective value on each step's batch, before the step.
    pub objective: Vec<f64>,
}

/// Adam on the sampled objective. A fresh balanced noise batch is drawn per
/// step from a seeded generator and shared by the objective and gradient
/// evaluations of that step; the anchor `π_t` is replaced by the current
/// parameters every `anchor_interval` steps.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    spec: ObjectiveSpec,
    rng: ChaCha8Rng,
    theta: SquashedGaussian,
    anchor: SquashedGaussian,
    m: Vec<f64>,
    v: Vec<f64>,
    steps_taken: usize,
}

impl Trainer {
    pub fn new(init: &SquashedGaussian, config: &TrainConfig) -> Result<Self> {
        if config.batch_size < 2 || config.anchor_interval == 0 || !(config.learning_rate > 0.0) {
            return Err(Error::Config(
                "batch_size >= 2, anchor_interval >= 1 and learning_rate > 0 are required".into(),
            ));
        }
        let spec = ObjectiveSpec {
            eta: config.eta,
            alpha: config.alpha,
            regularizer: config.regularizer,
        };
        spec.validate()?;
        let n = 2 * init.action_dim();
        Ok(Trainer {
            config: config.clone(),
            spec,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            theta: init.clone(),
            anchor: init.clone(),
            m: vec![0.0; n],
            v: vec![0.0; n],
            steps_taken: 0,
        })
    }

    pub fn policy(&self) -> &SquashedGaussian {
        &self.theta
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// One Adam step; returns the objective on this step's batch before the
    /// update.
    pub fn step(&mut self, q: &dyn ActionValue) -> Result<f64> {
        const BETA1: f64 = 0.9;
        const BETA2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        if self.steps_taken > 0 && self.steps_taken.is_multiple_of(self.config.anchor_interval) {
            self.anchor = self.theta.clone();
        }
        let dim = self.theta.action_dim();
        let batch = NoiseBatch::balanced(dim, self.config.batch_size / 2, &mut self.rng);
        let j = regularized_leader_objective(&self.theta, &self.anchor, q, &self.spec, &batch)?;
        let g = regularized_leader_gradient(&self.theta, &self.anchor, q, &self.spec, &batch)?;
        self.steps_taken += 1;
        let t = self.steps_taken as i32;
        let lr = self.config.learning_rate;
        for (k, gk) in g.mu.iter().chain(&g.log_sigma).enumerate() {
            self.m[k] = BETA1 * self.m[k] + (1.0 - BETA1) * gk;
            self.v[k] = BETA2 * self.v[k] + (1.0 - BETA2) * gk * gk;
            let m_hat = self.m[k] / (1.0 - BETA1.powi(t));
            let v_hat = self.v[k] / (1.0 - BETA2.powi(t));
            let delta = lr * m_hat / (v_hat.sqrt() + EPS);
            if k < dim {
                self.theta.mu[k] -= delta;
            } else {
                self.theta.log_sigma[k - dim] -= delta;
            }
        }
        if self.theta.mu.iter().chain(&self.theta.log_sigma).any(|x| !x.is_finite()) {
            return Err(Error::Value(format!("parameters diverged at step {}", self.steps_taken)));
        }
        Ok(j)
    }
}

/// Runs `config.steps` steps of a [`Trainer`].
pub fn train(init: &SquashedGaussian, q: &dyn ActionValue, config: &TrainConfig) -> Result<TrainReport> {
    let mut trainer = Trainer::new(init, config)?;
    let objective = (0..config.steps)
        .map(|_| trainer.step(q))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainReport {
        policy: trainer.theta,
        objective,
    })
}
