//! Bounded probability densities on finite supports.
//!
//! A [`Support`] is a list of cells, each with a center and a strictly
//! positive Lebesgue measure. Discrete action sets are supports made of
//! unit-measure atoms; compact boxes are discretized with the midpoint rule
//! into uniform cells. Integrals over the action space become
//! measure-weighted sums over cells, so the same code serves both settings.
//!
//! A [`Density`] stores the log of its value on every cell. All updates in
//! this crate multiply densities by exponentials of scaled payoffs, which can
//! reach hundreds in magnitude; working in log space and normalizing with a
//! log-sum-exp keeps every density finite and strictly positive.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Densities must integrate to one within this tolerance.
pub const NORMALIZATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub center: Vec<f64>,
    pub measure: f64,
}

/// A finite collection of cells with positive measures.
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    cells: Vec<Cell>,
    total_volume: f64,
}

impl Support {
    pub fn new(cells: Vec<Cell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidDensity("support has no cells".into()));
        }
        let dim = cells[0].center.len();
        for (i, cell) in cells.iter().enumerate() {
            if !(cell.measure > 0.0 && cell.measure.is_finite()) {
                return Err(Error::InvalidDensity(format!(
                    "cell {i} has non-positive measure {}",
                    cell.measure
                )));
            }
            if cell.center.len() != dim || cell.center.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidDensity(format!(
                    "cell {i} has an invalid center {:?}",
                    cell.center
                )));
            }
        }
        let total_volume = cells.iter().map(|c| c.measure).sum();
        Ok(Support {
            cells,
            total_volume,
        })
    }

    /// `n` unit-measure atoms with centers `[0], [1], ..., [n-1]`.
    pub fn atoms(n: usize) -> Self {
        assert!(n > 0, "a support needs at least one atom");
        let cells = (0..n)
            .map(|i| Cell {
                center: vec![i as f64],
                measure: 1.0,
            })
            .collect();
        Support {
            cells,
            total_volume: n as f64,
        }
    }

    /// Midpoint grid over the box `bounds` with `resolution[k]` uniform cells
    /// along axis `k`. Cells are ordered with the last axis varying fastest.
    pub fn grid(bounds: &[(f64, f64)], resolution: &[usize]) -> Result<Self> {
        if bounds.is_empty() || bounds.len() != resolution.len() {
            return Err(Error::Config(format!(
                "grid needs one resolution per axis (got {} axes, {} resolutions)",
                bounds.len(),
                resolution.len()
            )));
        }
        for (&(lo, hi), &n) in bounds.iter().zip(resolution) {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::Config(format!("degenerate box axis [{lo}, {hi}]")));
            }
            if n == 0 {
                return Err(Error::Config("grid resolution must be positive".into()));
            }
        }
        let widths: Vec<f64> = bounds
            .iter()
            .zip(resolution)
            .map(|(&(lo, hi), &n)| (hi - lo) / n as f64)
            .collect();
        let volume: f64 = bounds.iter().map(|&(lo, hi)| hi - lo).product();
        let count: usize = resolution.iter().product();
        let measure = volume / count as f64;

        let mut cells = Vec::with_capacity(count);
        let mut index = vec![0usize; bounds.len()];
        for _ in 0..count {
            let center = index
                .iter()
                .zip(bounds)
                .zip(&widths)
                .map(|((&k, &(lo, _)), &w)| lo + (k as f64 + 0.5) * w)
                .collect();
            cells.push(Cell { center, measure });
            for axis in (0..index.len()).rev() {
                index[axis] += 1;
                if index[axis] < resolution[axis] {
                    break;
                }
                index[axis] = 0;
            }
        }
        Ok(Support {
            cells,
            total_volume: volume,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn measure(&self, i: usize) -> f64 {
        self.cells[i].measure
    }

    pub fn measures(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().map(|c| c.measure)
    }

    pub fn total_volume(&self) -> f64 {
        self.total_volume
    }

    pub fn dim(&self) -> usize {
        self.cells[0].center.len()
    }

    /// Measure-weighted inner product `<f, g>` of two functions on this support.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        debug_assert_eq!(g.len(), self.len());
        self.cells
            .iter()
            .zip(f.iter().zip(g))
            .map(|(c, (a, b))| a * b * c.measure)
            .sum()
    }
}

/// `log Σ exp(x_i)`, stable for large magnitudes.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// A normalized, strictly positive density over a [`Support`].
#[derive(Debug, Clone)]
pub struct Density {
    support: Arc<Support>,
    log_values: Vec<f64>,
    upper_bound: Option<f64>,
}

impl PartialEq for Density {
    fn eq(&self, other: &Self) -> bool {
        self.same_support(other) && self.log_values == other.log_values
    }
}

impl Density {
    pub fn uniform(support: Arc<Support>) -> Self {
        let log_value = -support.total_volume().ln();
        let log_values = vec![log_value; support.len()];
        Density {
            support,
            log_values,
            upper_bound: None,
        }
    }

    /// Builds a density from unnormalized log values; the result is
    /// normalized so that `Σ exp(log_value)·measure = 1`.
    pub fn from_log_values(support: Arc<Support>, mut log_values: Vec<f64>) -> Result<Self> {
        if log_values.len() != support.len() {
            return Err(Error::SupportMismatch(format!(
                "{} log values for a support of {} cells",
                log_values.len(),
                support.len()
            )));
        }
        if let Some(i) = log_values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDensity(format!(
                "log value {} at cell {i} is not finite",
                log_values[i]
            )));
        }
        let log_z = log_sum_exp(
            log_values
                .iter()
                .zip(support.measures())
                .map(|(v, m)| v + m.ln()),
        );
        for v in &mut log_values {
            *v -= log_z;
        }
        Ok(Density {
            support,
            log_values,
            upper_bound: None,
        })
    }

    /// Builds a density from unnormalized, strictly positive values.
    /// Zero or negative mass is rejected rather than clamped.
    pub fn from_values(support: Arc<Support>, values: &[f64]) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidDensity(format!(
                "value {} at cell {i} is not strictly positive and finite",
                values[i]
            )));
        }
        Self::from_log_values(support, values.iter().map(|v| v.ln()).collect())
    }

    /// Convex combination `(1 - weight)·self + weight·other`.
    pub fn mix(&self, other: &Density, weight: f64) -> Result<Density> {
        self.ensure_same_support(other)?;
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::Config(format!("mixture weight {weight} outside [0, 1]")));
        }
        let values: Vec<f64> = self
            .values()
            .iter()
            .zip(other.values())
            .map(|(a, b)| (1.0 - weight) * a + weight * b)
            .collect();
        Density::from_values(self.support.clone(), &values)
    }

    /// Declares an upper bound `b` on the density values and checks it.
    pub fn with_upper_bound(mut self, b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::Config(format!("upper bound {b} must be positive")));
        }
        let max = self.max_value();
        if max > b {
            return Err(Error::InvalidDensity(format!(
                "density value {max} exceeds the declared bound {b}"
            )));
        }
        self.upper_bound = Some(b);
        Ok(self)
    }

    pub fn upper_bound(&self) -> Option<f64> {
        self.upper_bound
    }

    pub fn support(&self) -> &Arc<Support> {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.log_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_values.is_empty()
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.log_values[i].exp()
    }

    pub fn values(&self) -> Vec<f64> {
        self.log_values.iter().map(|v| v.exp()).collect()
    }

    /// Probability mass of each cell, `value·measure`.
    pub fn masses(&self) -> Vec<f64> {
        self.log_values
            .iter()
            .zip(self.support.measures())
            .map(|(v, m)| v.exp() * m)
            .collect()
    }

    pub fn max_value(&self) -> f64 {
        self.log_values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
            .exp()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses().iter().sum()
    }

    /// Expected value `∫ p(a) f(a) da` of a function given per cell.
    pub fn expectation(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        self.log_values
            .iter()
            .zip(self.support.measures())
            .zip(f)
            .map(|((v, m), x)| v.exp() * m * x)
            .sum()
    }

    /// Largest per-cell difference of density values.
    pub fn linf_dist(&self, other: &Density) -> Result<f64> {
        self.ensure_same_support(other)?;
        Ok(self
            .log_values
            .iter()
            .zip(&other.log_values)
            .map(|(a, b)| (a.exp() - b.exp()).abs())
            .fold(0.0, f64::max))
    }

    pub fn same_support(&self, other: &Density) -> bool {
        Arc::ptr_eq(&self.support, &other.support) || *self.support == *other.support
    }

    pub fn ensure_same_support(&self, other: &Density) -> Result<()> {
        if self.same_support(other) {
            Ok(())
        } else {
            Err(Error::SupportMismatch(format!(
                "supports of {} and {} cells differ",
                self.len(),
                other.len()
            )))
        }
    }
}

/// Differential entropy `-∫ p log p`. Negative for peaked densities on
/// small boxes.
pub fn entropy(d: &Density) -> f64 {
    -d.log_values
        .iter()
        .zip(d.support.measures())
        .map(|(v, m)| v.exp() * v * m)
        .sum::<f64>()
}

/// `KL(p, q) = ∫ p log(p/q)`.
///
/// Evaluated as `∫ q·(t log t - t + 1)` with `t = p/q`; every term of that
/// sum is nonnegative, so the result is nonnegative without clamping the
/// total and is exactly zero when the log values coincide.
pub fn kl(p: &Density, q: &Density) -> Result<f64> {
    p.ensure_same_support(q)?;
    Ok(p.log_values
        .iter()
        .zip(&q.log_values)
        .zip(p.support.measures())
        .map(|((lp, lq), m)| {
            let r = lp - lq;
            let term = r * r.exp() - r.exp_m1();
            lq.exp() * term.max(0.0) * m
        })
        .sum())
}

/// `‖p - q‖₂` with respect to the cell measures.
pub fn l2_dist(p: &Density, q: &Density) -> Result<f64> {
    p.ensure_same_support(q)?;
    Ok(p.log_values
        .iter()
        .zip(&q.log_values)
        .zip(p.support.measures())
        .map(|((lp, lq), m)| {
            let d = lp.exp() - lq.exp();
            d * d * m
        })
        .sum::<f64>()
        .sqrt())
}

/// Both sides of the KL three-point identity
/// `KL(z̄,y) - KL(z,y) + KL(z,z̄) = <log z̄ - log y, z̄ - z>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreePoint {
    pub lhs: f64,
    pub rhs: f64,
}

pub fn kl_three_point(z_bar: &Density, z: &Density, y: &Density) -> Result<ThreePoint> {
    z_bar.ensure_same_support(z)?;
    z_bar.ensure_same_support(y)?;
    let lhs = kl(z_bar, y)? - kl(z, y)? + kl(z, z_bar)?;
    let rhs = z_bar
        .log_values
        .iter()
        .zip(&z.log_values)
        .zip(&y.log_values)
        .zip(z_bar.support.measures())
        .map(|(((lzb, lz), ly), m)| (lzb - ly) * (lzb.exp() - lz.exp()) * m)
        .sum();
    Ok(ThreePoint { lhs, rhs })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityRepr {
    cells: Vec<Cell>,
    log_values: Vec<f64>,
}

impl Serialize for Density {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        DensityRepr {
            cells: self.support.cells.clone(),
            log_values: self.log_values.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Density {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = DensityRepr::deserialize(deserializer)?;
        let support = Support::new(repr.cells).map_err(D::Error::custom)?;
        let mass: f64 = repr
            .log_values
            .iter()
            .zip(support.measures())
            .map(|(v, m)| v.exp() * m)
            .sum();
        if (mass - 1.0).abs() > 1e-8 {
            return Err(D::Error::custom(format!(
                "serialized density integrates to {mass}, not 1"
            )));
        }
        Density::from_log_values(Arc::new(support), repr.log_values).map_err(D::Error::custom)
    }
}
