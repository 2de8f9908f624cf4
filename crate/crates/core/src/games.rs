//! Payoff structures and marginal action values.
//!
//! Every two-player interaction is eventually a [`MatrixGame`]: discrete
//! games directly, kernel games on compact boxes after midpoint
//! discretization, and each state of a tabular stochastic game through its
//! state-action values. A single-agent problem is a matrix game whose second
//! player has exactly one action.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::density::{Density, Support};
use crate::policy::{JointPolicy, Player};
use crate::{Error, Result};

/// Two-player game with finite (or discretized) action sets.
///
/// Payoffs are stored row-major: entry `(i, j)` is the utility when player
/// one plays cell `i` and player two plays cell `j`.
#[derive(Debug, Clone)]
pub struct MatrixGame {
    rows: usize,
    cols: usize,
    payoff_1: Vec<f64>,
    payoff_2: Vec<f64>,
    zero_sum: bool,
    r_max: f64,
    support_1: Arc<Support>,
    support_2: Arc<Support>,
}

impl MatrixGame {
    /// Zero-sum game from player one's payoff matrix.
    pub fn zero_sum(payoff: Vec<Vec<f64>>) -> Result<Self> {
        let (rows, cols, p1) = flatten(&payoff)?;
        let p2 = p1.iter().map(|v| -v).collect();
        Self::from_parts(rows, cols, p1, p2, true, None)
    }

    pub fn general_sum(payoff_1: Vec<Vec<f64>>, payoff_2: Vec<Vec<f64>>) -> Result<Self> {
        let (rows, cols, p1) = flatten(&payoff_1)?;
        let (rows2, cols2, p2) = flatten(&payoff_2)?;
        if (rows, cols) != (rows2, cols2) {
            return Err(Error::Config(format!(
                "payoff shapes differ: {rows}x{cols} vs {rows2}x{cols2}"
            )));
        }
        Self::from_parts(rows, cols, p1, p2, false, None)
    }

    /// Single-agent problem: a value per action and a trivial opponent.
    pub fn single_agent(values: Vec<f64>) -> Result<Self> {
        let rows = values.len();
        let zeros = vec![0.0; rows];
        Self::from_parts(rows, 1, values, zeros, false, None)
    }

    pub fn matching_pennies() -> Self {
        Self::zero_sum(vec![vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap()
    }

    pub fn rock_paper_scissors() -> Self {
        Self::zero_sum(vec![
            vec![0.0, -1.0, 1.0],
            vec![1.0, 0.0, -1.0],
            vec![-1.0, 1.0, 0.0],
        ])
        .unwrap()
    }

    fn from_parts(
        rows: usize,
        cols: usize,
        payoff_1: Vec<f64>,
        payoff_2: Vec<f64>,
        zero_sum: bool,
        r_max: Option<f64>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config("payoff matrix is empty".into()));
        }
        if let Some(v) = payoff_1.iter().chain(&payoff_2).find(|v| !v.is_finite()) {
            return Err(Error::Value(format!("payoff entry {v}")));
        }
        if zero_sum && payoff_1.iter().zip(&payoff_2).any(|(a, b)| *a != -*b) {
            return Err(Error::Config("zero-sum game with payoff_2 != -payoff_1".into()));
        }
        let observed = payoff_1
            .iter()
            .chain(&payoff_2)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let r_max = match r_max {
            Some(r) if r < observed => {
                return Err(Error::Config(format!(
                    "payoff magnitude {observed} exceeds declared r_max {r}"
                )))
            }
            Some(r) => r,
            None => observed,
        };
        Ok(MatrixGame {
            rows,
            cols,
            payoff_1,
            payoff_2,
            zero_sum,
            r_max,
            support_1: Arc::new(Support::atoms(rows)),
            support_2: Arc::new(Support::atoms(cols)),
        })
    }

    /// Declares the payoff bound `R_max`; fails if an entry exceeds it.
    pub fn with_r_max(mut self, r_max: f64) -> Result<Self> {
        let observed = self
            .payoff_1
            .iter()
            .chain(&self.payoff_2)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if !(r_max >= observed) {
            return Err(Error::Config(format!(
                "payoff magnitude {observed} exceeds declared r_max {r_max}"
            )));
        }
        self.r_max = r_max;
        Ok(self)
    }

    /// Replaces the default unit-atom supports, e.g. by grids of a box.
    pub fn with_supports(mut self, support_1: Arc<Support>, support_2: Arc<Support>) -> Result<Self> {
        if support_1.len() != self.rows || support_2.len() != self.cols {
            return Err(Error::SupportMismatch(format!(
                "{}x{} payoff matrix with supports of {} and {} cells",
                self.rows,
                self.cols,
                support_1.len(),
                support_2.len()
            )));
        }
        self.support_1 = support_1;
        self.support_2 = support_2;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_zero_sum(&self) -> bool {
        self.zero_sum
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn support(&self, player: Player) -> &Arc<Support> {
        match player {
            Player::One => &self.support_1,
            Player::Two => &self.support_2,
        }
    }

    pub fn payoff(&self, player: Player, i: usize, j: usize) -> f64 {
        match player {
            Player::One => self.payoff_1[i * self.cols + j],
            Player::Two => self.payoff_2[i * self.cols + j],
        }
    }

    pub fn payoff_rows(&self, player: Player) -> Vec<Vec<f64>> {
        let table = match player {
            Player::One => &self.payoff_1,
            Player::Two => &self.payoff_2,
        };
        table.chunks(self.cols).map(|r| r.to_vec()).collect()
    }

    pub fn uniform_policy(&self) -> JointPolicy {
        JointPolicy::uniform(self.support_1.clone(), self.support_2.clone())
    }

    /// Marginal value of each of `player`'s actions against the opponent's
    /// density: `ν(a_i) = ∫ π_{-i}(a_{-i}) Q_i(a_i, a_{-i}) da_{-i}`.
    pub fn marginal_q(&self, player: Player, opponent: &Density) -> Result<Vec<f64>> {
        let opp_support = self.support(player.other());
        if !(Arc::ptr_eq(opponent.support(), opp_support) || **opponent.support() == **opp_support) {
            return Err(Error::SupportMismatch(format!(
                "opponent density has {} cells, game expects {} for player {:?}",
                opponent.len(),
                opp_support.len(),
                player.other()
            )));
        }
        let w = opponent.masses();
        let nu = match player {
            Player::One => (0..self.rows)
                .map(|i| {
                    let row = &self.payoff_1[i * self.cols..(i + 1) * self.cols];
                    row.iter().zip(&w).map(|(q, p)| q * p).sum()
                })
                .collect(),
            Player::Two => {
                let mut nu = vec![0.0; self.cols];
                for (i, wi) in w.iter().enumerate() {
                    let row = &self.payoff_2[i * self.cols..(i + 1) * self.cols];
                    for (acc, q) in nu.iter_mut().zip(row) {
                        *acc += wi * q;
                    }
                }
                nu
            }
        };
        Ok(nu)
    }

    /// Expected payoff of `player` under the joint policy.
    pub fn expected_payoff(&self, player: Player, pi: &JointPolicy) -> Result<f64> {
        let nu = self.marginal_q(player, pi.player(player.other()))?;
        let own = pi.player(player);
        if !(Arc::ptr_eq(own.support(), self.support(player)) || **own.support() == **self.support(player)) {
            return Err(Error::SupportMismatch(format!(
                "policy of {player:?} is not on the game's support"
            )));
        }
        Ok(own.expectation(&nu))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let repr: MatrixGameJson = serde_json::from_str(s)?;
        repr.build()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> MatrixGameJson {
        MatrixGameJson {
            payoff_1: self.payoff_rows(Player::One),
            payoff_2: if self.zero_sum {
                None
            } else {
                Some(self.payoff_rows(Player::Two))
            },
            zero_sum: Some(self.zero_sum),
            r_max: Some(self.r_max),
        }
    }
}

/// File schema for matrix games. `payoff_2` may be omitted for zero-sum
/// games.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixGameJson {
    pub payoff_1: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff_2: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_sum: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
}

impl MatrixGameJson {
    pub fn build(self) -> Result<MatrixGame> {
        let zero_sum = self.zero_sum.unwrap_or(self.payoff_2.is_none());
        let (rows, cols, p1) = flatten(&self.payoff_1)?;
        let p2 = match self.payoff_2 {
            Some(p2) => {
                let (r2, c2, p2) = flatten(&p2)?;
                if (r2, c2) != (rows, cols) {
                    return Err(Error::Config("payoff_1 and payoff_2 shapes differ".into()));
                }
                p2
            }
            None if zero_sum => p1.iter().map(|v| -v).collect(),
            None => return Err(Error::Config("general-sum game needs payoff_2".into())),
        };
        MatrixGame::from_parts(rows, cols, p1, p2, zero_sum, self.r_max)
    }
}

fn flatten(m: &[Vec<f64>]) -> Result<(usize, usize, Vec<f64>)> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return Err(Error::Config("payoff matrix is empty".into()));
    }
    if m.iter().any(|r| r.len() != cols) {
        return Err(Error::Config("payoff matrix rows have different lengths".into()));
    }
    Ok((rows, cols, m.iter().flatten().copied().collect()))
}

pub type Kernel = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

type Resolution = (Vec<usize>, Vec<usize>);

/// Zero-sum game on two compact boxes with payoff `Q(a1, a2)` to player one.
pub struct KernelGame {
    kernel: Kernel,
    box_1: Vec<(f64, f64)>,
    box_2: Vec<(f64, f64)>,
    r_max: f64,
    cache: Mutex<HashMap<Resolution, Arc<MatrixGame>>>,
}

impl fmt::Debug for KernelGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelGame")
            .field("box_1", &self.box_1)
            .field("box_2", &self.box_2)
            .field("r_max", &self.r_max)
            .finish_non_exhaustive()
    }
}

impl KernelGame {
    pub fn new(
        kernel: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        box_1: Vec<(f64, f64)>,
        box_2: Vec<(f64, f64)>,
        r_max: f64,
    ) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::Config(format!("r_max {r_max} must be positive")));
        }
        for &(lo, hi) in box_1.iter().chain(&box_2) {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::Config(format!("degenerate box axis [{lo}, {hi}]")));
            }
        }
        if box_1.is_empty() || box_2.is_empty() {
            return Err(Error::Config("kernel game boxes need at least one axis".into()));
        }
        Ok(KernelGame {
            kernel: Arc::new(kernel),
            box_1,
            box_2,
            r_max,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn eval(&self, a1: &[f64], a2: &[f64]) -> f64 {
        (self.kernel)(a1, a2)
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn box_1(&self) -> &[(f64, f64)] {
        &self.box_1
    }

    pub fn box_2(&self) -> &[(f64, f64)] {
        &self.box_2
    }

    /// Same resolution on every axis of both boxes.
    pub fn discretize_uniform(&self, resolution: usize) -> Result<Arc<MatrixGame>> {
        self.discretize(&vec![resolution; self.box_1.len()], &vec![resolution; self.box_2.len()])
    }

    /// Evaluates the kernel at every pair of midpoint-grid cell centers.
    /// The returned game carries the grid supports, so density-weighted sums
    /// over it are midpoint quadratures of the continuous integrals.
    /// Results are memoized per resolution.
    pub fn discretize(&self, resolution_1: &[usize], resolution_2: &[usize]) -> Result<Arc<MatrixGame>> {
        if resolution_1.len() != self.box_1.len() || resolution_2.len() != self.box_2.len() {
            return Err(Error::Config("one resolution per box axis is required".into()));
        }
        if resolution_1.iter().chain(resolution_2).any(|&n| n < 2) {
            return Err(Error::Config("resolution must be at least 2 per axis".into()));
        }
        let key = (resolution_1.to_vec(), resolution_2.to_vec());
        if let Some(game) = self.cache.lock().unwrap().get(&key) {
            return Ok(game.clone());
        }

        let s1 = Arc::new(Support::grid(&self.box_1, resolution_1)?);
        let s2 = Arc::new(Support::grid(&self.box_2, resolution_2)?);
        let mut payoff = Vec::with_capacity(s1.len() * s2.len());
        for c1 in s1.cells() {
            for c2 in s2.cells() {
                let q = self.eval(&c1.center, &c2.center);
                if !q.is_finite() {
                    return Err(Error::KernelDomain(format!(
                        "Q({:?}, {:?}) = {q}",
                        c1.center, c2.center
                    )));
                }
                if q.abs() > self.r_max * (1.0 + 1e-12) {
                    return Err(Error::KernelDomain(format!(
                        "|Q({:?}, {:?})| = {} exceeds r_max {}",
                        c1.center,
                        c2.center,
                        q.abs(),
                        self.r_max
                    )));
                }
                payoff.push(q);
            }
        }
        let neg = payoff.iter().map(|v| -v).collect();
        let game = MatrixGame::from_parts(s1.len(), s2.len(), payoff, neg, true, Some(self.r_max))?
            .with_supports(s1, s2)?;
        let game = Arc::new(game);
        self.cache.lock().unwrap().insert(key, game.clone());
        Ok(game)
    }
}

/// Built-in kernel games, selected by name in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `Q = scale·<a1, a2>` on `[-1, 1]^dim` for both players.
    Bilinear {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "one_usize")]
        dim: usize,
    },
    /// `Q = coupling·a1·a2 - curvature·a1² + curvature·a2²` on `[-1, 1]²`;
    /// concave for the maximizer, convex for the minimizer.
    Saddle { coupling: f64, curvature: f64 },
    /// `Q = Σ_ij coefficients[i][j]·a1^i·a2^j` on `[-1, 1]²`.
    Polynomial { coefficients: Vec<Vec<f64>> },
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

impl KernelSpec {
    pub fn build(&self) -> Result<KernelGame> {
        match self.clone() {
            KernelSpec::Bilinear { scale, dim } => {
                if dim == 0 {
                    return Err(Error::Config("bilinear kernel needs dim >= 1".into()));
                }
                let bx = vec![(-1.0, 1.0); dim];
                KernelGame::new(
                    move |a1, a2| scale * a1.iter().zip(a2).map(|(x, y)| x * y).sum::<f64>(),
                    bx.clone(),
                    bx,
                    (scale.abs() * dim as f64).max(f64::MIN_POSITIVE),
                )
            }
            KernelSpec::Saddle {
                coupling,
                curvature,
            } => KernelGame::new(
                move |a1, a2| {
                    coupling * a1[0] * a2[0] - curvature * a1[0] * a1[0] + curvature * a2[0] * a2[0]
                },
                vec![(-1.0, 1.0)],
                vec![(-1.0, 1.0)],
                (coupling.abs() + curvature.abs()).max(f64::MIN_POSITIVE),
            ),
            KernelSpec::Polynomial { coefficients } => {
                let bound: f64 = coefficients.iter().flatten().map(|c| c.abs()).sum();
                KernelGame::new(
                    move |a1, a2| {
                        let mut q = 0.0;
                        for (i, row) in coefficients.iter().enumerate() {
                            for (j, c) in row.iter().enumerate() {
                                q += c * a1[0].powi(i as i32) * a2[0].powi(j as i32);
                            }
                        }
                        q
                    },
                    vec![(-1.0, 1.0)],
                    vec![(-1.0, 1.0)],
                    bound.max(f64::MIN_POSITIVE),
                )
            }
        }
    }
}

/// Zero-sum tabular stochastic game with rewards to player one.
///
/// Every state offers the same `d1 x d2` joint action set. Terminal states
/// end the episode: their successors are never bootstrapped.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularSG {
    states: usize,
    actions: [usize; 2],
    transition: Vec<f64>,
    rewards: Vec<f64>,
    gamma: f64,
    terminal: Vec<bool>,
    r_max: f64,
}

/// Tolerance on the row sums of the transition table.
pub const TRANSITION_TOL: f64 = 1e-12;

impl TabularSG {
    /// `transition` is indexed `[s][a1][a2][s']` and `rewards` `[s][a1][a2]`,
    /// both flattened row-major.
    pub fn new(
        states: usize,
        actions: [usize; 2],
        transition: Vec<f64>,
        rewards: Vec<f64>,
        gamma: f64,
        terminals: &[usize],
    ) -> Result<Self> {
        let [d1, d2] = actions;
        if states == 0 || d1 == 0 || d2 == 0 {
            return Err(Error::Model("empty state or action set".into()));
        }
        if transition.len() != states * d1 * d2 * states {
            return Err(Error::Model(format!(
                "transition table has {} entries, expected {}",
                transition.len(),
                states * d1 * d2 * states
            )));
        }
        if rewards.len() != states * d1 * d2 {
            return Err(Error::Model(format!(
                "reward table has {} entries, expected {}",
                rewards.len(),
                states * d1 * d2
            )));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Model(format!("discount {gamma} must lie in [0, 1)")));
        }
        if let Some(r) = rewards.iter().find(|r| !r.is_finite()) {
            return Err(Error::Model(format!("reward {r} is not finite")));
        }
        let mut terminal = vec![false; states];
        for &s in terminals {
            if s >= states {
                return Err(Error::Model(format!("terminal state {s} out of range")));
            }
            terminal[s] = true;
        }
        let r_max = rewards.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let sg = TabularSG {
            states,
            actions,
            transition,
            rewards,
            gamma,
            terminal,
            r_max,
        };
        sg.validate()?;
        Ok(sg)
    }

    /// Checks that every transition row is a probability distribution.
    pub fn validate(&self) -> Result<()> {
        for (row_idx, row) in self.transition.chunks(self.states).enumerate() {
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(Error::Model(format!("transition row {row_idx} has a negative entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > TRANSITION_TOL {
                return Err(Error::Model(format!(
                    "transition row {row_idx} sums to {sum}"
                )));
            }
        }
        Ok(())
    }

    /// One state, `γ = 0`: the repeated matrix game.
    pub fn from_matrix_game(game: &MatrixGame) -> Result<Self> {
        if !game.is_zero_sum() && game.cols() != 1 {
            return Err(Error::Unsupported(
                "tabular stochastic games are zero-sum or single-agent".into(),
            ));
        }
        let rewards = game.payoff_rows(Player::One).concat();
        let transition = vec![1.0; rewards.len()];
        Self::new(1, [game.rows(), game.cols()], transition, rewards, 0.0, &[])
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> [usize; 2] {
        self.actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// `L = R_max / (1 - γ)`.
    pub fn value_bound(&self) -> f64 {
        self.r_max / (1.0 - self.gamma)
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn reward(&self, s: usize, a1: usize, a2: usize) -> f64 {
        let [d1, d2] = self.actions;
        debug_assert!(a1 < d1 && a2 < d2);
        self.rewards[(s * d1 + a1) * d2 + a2]
    }

    /// Successor distribution `P(· | s, a1, a2)`.
    pub fn transition_row(&self, s: usize, a1: usize, a2: usize) -> &[f64] {
        let [d1, d2] = self.actions;
        let start = ((s * d1 + a1) * d2 + a2) * self.states;
        &self.transition[start..start + self.states]
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let repr: TabularSGJson = serde_json::from_str(s)?;
        repr.build()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> TabularSGJson {
        let [d1, d2] = self.actions;
        TabularSGJson {
            states: self.states,
            actions: self.actions,
            transition: Tensor {
                shape: vec![self.states, d1, d2, self.states],
                data: self.transition.clone(),
            },
            rewards: Tensor {
                shape: vec![self.states, d1, d2],
                data: self.rewards.clone(),
            },
            gamma: self.gamma,
            terminals: (0..self.states).filter(|&s| self.terminal[s]).collect(),
        }
    }
}

/// Dense row-major tensor as stored in game files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// File schema for tabular stochastic games:
/// `{states, actions: [d1, d2], transition: {shape: [S, d1, d2, S], data},
/// rewards: {shape: [S, d1, d2], data}, gamma, terminals}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularSGJson {
    pub states: usize,
    pub actions: [usize; 2],
    pub transition: Tensor,
    pub rewards: Tensor,
    pub gamma: f64,
    #[serde(default)]
    pub terminals: Vec<usize>,
}

impl TabularSGJson {
    pub fn build(self) -> Result<TabularSG> {
        let [d1, d2] = self.actions;
        if self.transition.shape != [self.states, d1, d2, self.states] {
            return Err(Error::Model(format!(
                "transition shape {:?} does not match {} states and actions {:?}",
                self.transition.shape, self.states, self.actions
            )));
        }
        if self.rewards.shape != [self.states, d1, d2] {
            return Err(Error::Model(format!(
                "reward shape {:?} does not match {} states and actions {:?}",
                self.rewards.shape, self.states, self.actions
            )));
        }
        TabularSG::new(
            self.states,
            self.actions,
            self.transition.data,
            self.rewards.data,
            self.gamma,
            &self.terminals,
        )
    }
}
