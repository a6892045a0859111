use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{pow_nonneg, HurstIndex};

/// Uniform time grid `s_i = i T / n` on `[0, T]` carrying the step weights
/// for both `ds` and `ds^{2H}` integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    hurst: HurstIndex,
    horizon: f64,
    steps: usize,
    nodes: Vec<f64>,
    /// `s_{i+1}^{2H} - s_i^{2H}` for `i = 0..n`.
    ds2h: Vec<f64>,
}

impl TimeGrid {
    pub fn new(hurst: HurstIndex, horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::InvalidGrid("need at least one step".into()));
        }
        let dt = horizon / steps as f64;
        let mut nodes: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
        nodes[steps] = horizon;
        let p = hurst.two_h();
        let powers: Vec<f64> = nodes.iter().map(|&s| pow_nonneg(s, p)).collect();
        let ds2h = powers.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self {
            hurst,
            horizon,
            steps,
            nodes,
            ds2h,
        })
    }

    #[inline]
    pub fn hurst(&self) -> HurstIndex {
        self.hurst
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// The `n + 1` nodes, `s_0 = 0` through `s_n = T`.
    #[inline]
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// The `n` weights of the discrete measure `ds^{2H}` (left-point steps).
    #[inline]
    pub fn ds2h_weights(&self) -> &[f64] {
        &self.ds2h
    }

    /// Index of the last node not exceeding `t`, clamped to the grid.
    pub fn index_at(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        let k = (t / self.dt() + 1e-9).floor() as usize;
        k.min(self.steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_and_telescoping_weights() {
        for (hv, t, n) in [(0.3, 1.0, 10), (0.75, 2.5, 1000), (0.5, 1.0, 1)] {
            let g = TimeGrid::new(HurstIndex::new(hv).unwrap(), t, n).unwrap();
            assert_eq!(g.nodes()[0], 0.0);
            assert_eq!(g.nodes()[n], t);
            assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
            let total: f64 = g.ds2h_weights().iter().sum();
            assert!((total - t.powf(2.0 * hv)).abs() <= 1e-12 * t.powf(2.0 * hv));
        }
    }

    #[test]
    fn brownian_weights_are_plain_steps() {
        let g = TimeGrid::new(HurstIndex::new(0.5).unwrap(), 2.0, 8).unwrap();
        for w in g.ds2h_weights() {
            assert!((w - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let h = HurstIndex::new(0.5).unwrap();
        assert!(TimeGrid::new(h, 0.0, 4).is_err());
        assert!(TimeGrid::new(h, 1.0, 0).is_err());
    }

    #[test]
    fn index_lookup() {
        let g = TimeGrid::new(HurstIndex::new(0.5).unwrap(), 1.0, 10).unwrap();
        assert_eq!(g.index_at(0.0), 0);
        assert_eq!(g.index_at(0.3), 3);
        assert_eq!(g.index_at(1.0), 10);
        assert_eq!(g.index_at(5.0), 10);
    }
}
