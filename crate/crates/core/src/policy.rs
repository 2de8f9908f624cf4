use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{self, Density, Support};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }
}

/// One density per player. Single-agent problems use a one-atom density
/// for the (absent) second player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointPolicy {
    pub p1: Density,
    pub p2: Density,
}

impl JointPolicy {
    pub fn new(p1: Density, p2: Density) -> Self {
        JointPolicy { p1, p2 }
    }

    pub fn uniform(s1: Arc<Support>, s2: Arc<Support>) -> Self {
        JointPolicy {
            p1: Density::uniform(s1),
            p2: Density::uniform(s2),
        }
    }

    pub fn player(&self, player: Player) -> &Density {
        match player {
            Player::One => &self.p1,
            Player::Two => &self.p2,
        }
    }

    /// Joint KL, the sum of the per-player divergences.
    pub fn kl(&self, other: &JointPolicy) -> Result<f64> {
        Ok(density::kl(&self.p1, &other.p1)? + density::kl(&self.p2, &other.p2)?)
    }

    pub fn max_value(&self) -> f64 {
        self.p1.max_value().max(self.p2.max_value())
    }

    /// Largest per-cell difference of density values over both players.
    pub fn linf_dist(&self, other: &JointPolicy) -> Result<f64> {
        Ok(self.p1.linf_dist(&other.p1)?.max(self.p2.linf_dist(&other.p2)?))
    }
}
