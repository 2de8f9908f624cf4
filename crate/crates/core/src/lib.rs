//! Entropy-regularized no-regret dynamics for single-agent problems and
//! two-player games with discrete or discretized continuous action spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`density`] stores bounded probability densities in log space over
//!   finite supports or midpoint grids of compact boxes, together with
//!   entropy, KL divergence and L2 distance.
//! * [`games`] holds the payoff structures (matrix games, kernel games on
//!   boxes, tabular stochastic games) and computes marginal action values
//!   against an opponent density.
//! * [`dynamics`] implements the closed-form regularized mirror-descent and
//!   FTRL updates and runs last-iterate trajectories.
//! * [`equilibrium`] computes quantal response equilibria, soft-optimal
//!   policies, exploitability and cross-play tables.
//! * [`tabular_sg`] runs the exact tabular policy-optimization loop (soft
//!   policy evaluation followed by per-state regularized-leader improvement).
//! * [`param_policy`] is the parametric pathway: a tanh-squashed Gaussian,
//!   the sampled regularized-leader objective and its pathwise gradient.
//! * [`harness`] is the config-driven experiment runner behind the
//!   `porl-dyn` binary.
//!
//! ```
//! use porl_dyn::dynamics::md_step;
//! use porl_dyn::equilibrium::qre_solve;
//! use porl_dyn::games::MatrixGame;
//! use porl_dyn::policy::JointPolicy;
//!
//! let game = MatrixGame::matching_pennies();
//! let qre = qre_solve(&game, 0.2, 1e-12, 10_000).unwrap();
//! let next = md_step(&qre.policy, &game, 0.1, 0.2).unwrap();
//! assert!(porl_dyn::density::kl(&next.p1, &qre.policy.p1).unwrap() < 1e-12);
//! ```

pub mod density;
pub mod dynamics;
pub mod equilibrium;
mod error;
pub mod games;
pub mod harness;
pub mod param_policy;
pub mod policy;
pub mod tabular_sg;

pub use error::{Error, Result};
