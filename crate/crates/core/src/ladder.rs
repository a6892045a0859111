//! Decreasing cut-off ladders and the principal-value estimates built on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::pow_nonneg;

/// Default absolute tolerance on the spread of the last three rungs.
pub const DEFAULT_PV_TOL: f64 = 5e-2;
/// Default number of rungs in a geometric ladder.
pub const DEFAULT_RUNGS: usize = 8;

/// Strictly decreasing positive cut-offs `ε_0 > ε_1 > ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EpsLadder(Vec<f64>);

impl EpsLadder {
    pub fn new(rungs: Vec<f64>) -> Result<Self> {
        if rungs.is_empty() {
            return Err(Error::InvalidLadder("ladder is empty".into()));
        }
        if rungs.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidLadder("cut-offs must be positive and finite".into()));
        }
        if rungs.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidLadder("cut-offs must be strictly decreasing".into()));
        }
        Ok(Self(rungs))
    }

    /// `eps0, eps0 / 2, ..., eps0 / 2^{count-1}`.
    pub fn geometric(eps0: f64, count: usize) -> Result<Self> {
        Self::new((0..count).map(|k| eps0 * 0.5f64.powi(k as i32)).collect())
    }

    /// Geometric ladder from `T^H / 4`, halving over [`DEFAULT_RUNGS`] rungs,
    /// with rungs under the resolution floor dropped. If fewer than three
    /// survive, the ladder becomes `4 f, 2 f, f` for the floor `f`.
    pub fn default_for(grid: &TimeGrid, floor_c: f64) -> Self {
        let floor = resolution_floor(grid, floor_c);
        let eps0 = 0.25 * pow_nonneg(grid.horizon(), grid.hurst().value());
        let kept: Vec<f64> = (0..DEFAULT_RUNGS)
            .map(|k| eps0 * 0.5f64.powi(k as i32))
            .filter(|&e| e >= floor)
            .collect();
        if kept.len() >= 3 {
            Self(kept)
        } else {
            Self(vec![4.0 * floor, 2.0 * floor, floor])
        }
    }

    #[inline]
    pub fn rungs(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn smallest(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Fails with [`Error::LadderBelowResolution`] if the smallest cut-off is
    /// under `floor`.
    pub fn require_floor(&self, floor: f64) -> Result<()> {
        let eps = self.smallest();
        // Leave room for the rounding in `default_for`.
        if eps < floor * (1.0 - 1e-12) {
            Err(Error::LadderBelowResolution { eps, floor })
        } else {
            Ok(())
        }
    }
}

impl TryFrom<Vec<f64>> for EpsLadder {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<EpsLadder> for Vec<f64> {
    fn from(l: EpsLadder) -> Self {
        l.0
    }
}

/// `c T^H n^{-H}`: typical size of one path increment.
pub fn resolution_floor(grid: &TimeGrid, c: f64) -> f64 {
    let h = grid.hurst().value();
    c * pow_nonneg(grid.horizon(), h) * (grid.steps() as f64).powf(-h)
}

/// Value of a cut-off ladder and its convergence diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PVEstimate {
    pub value: f64,
    pub eps_ladder: Vec<f64>,
    pub rung_values: Vec<f64>,
    pub converged: bool,
    /// Largest successive-rung difference over the final three rungs.
    pub diag: f64,
}

impl PVEstimate {
    pub fn from_rungs(ladder: &EpsLadder, rung_values: Vec<f64>, tol: f64) -> Self {
        debug_assert_eq!(ladder.len(), rung_values.len());
        let k = rung_values.len();
        let tail = &rung_values[k.saturating_sub(3)..];
        let diag = tail
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max);
        Self {
            value: rung_values[k - 1],
            eps_ladder: ladder.rungs().to_vec(),
            converged: k >= 3 && diag <= tol,
            rung_values,
            diag,
        }
    }

    /// Negated estimate (same ladder).
    pub fn negated(&self) -> Self {
        Self {
            value: -self.value,
            rung_values: self.rung_values.iter().map(|v| -v).collect(),
            ..self.clone()
        }
    }
}
