use alloc::vec::Vec;

use crate::{Error, Result};

/// Tolerance for matching a breakpoint time to a grid node.
pub const NODE_TOLERANCE: f64 = 1e-12;

/// Discretisation `0 = t_0 < … < t_N = T` of the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidGrid("need at least one step (two nodes)"));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidGrid("first node must be 0"));
        }
        if nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("nodes must be finite"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("nodes must be strictly increasing"));
        }
        Ok(Self { nodes })
    }

    /// `steps` equal steps over `[0, horizon]`. The last node is exactly `horizon`.
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidGrid("need at least one step (two nodes)"));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidGrid("horizon must be positive"));
        }
        let mut nodes: Vec<f64> = (0..=steps)
            .map(|k| horizon * k as f64 / steps as f64)
            .collect();
        nodes[steps] = horizon;
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn time(&self, k: usize) -> f64 {
        self.nodes[k]
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.nodes[k + 1] - self.nodes[k]
    }

    pub fn max_dt(&self) -> f64 {
        (0..self.steps()).map(|k| self.dt(k)).fold(0.0, f64::max)
    }

    pub fn node_index(&self, t: f64) -> Option<usize> {
        let i = self.nodes.partition_point(|&n| n < t - NODE_TOLERANCE);
        (i < self.nodes.len() && (self.nodes[i] - t).abs() <= NODE_TOLERANCE).then_some(i)
    }

    pub fn contains_node(&self, t: f64) -> bool {
        self.node_index(t).is_some()
    }

    /// Every breakpoint strictly inside the horizon must be a node.
    pub fn check_breakpoints(&self, breakpoints: &[f64]) -> Result<()> {
        for &b in breakpoints {
            if b < self.horizon() - NODE_TOLERANCE && !self.contains_node(b) {
                return Err(Error::BreakpointOffGrid(b));
            }
        }
        Ok(())
    }

    /// Index of the step `(t_k, t_{k+1}]` containing `t`, for `0 < t <= T`.
    pub fn step_containing(&self, t: f64) -> Option<usize> {
        if !(t > 0.0) || t > self.horizon() {
            return None;
        }
        Some(self.nodes.partition_point(|&n| n < t) - 1)
    }

    /// Index of each node of `self` inside `fine`, if `self` is a sub-grid.
    pub fn embed_in(&self, fine: &TimeGrid) -> Option<Vec<usize>> {
        self.nodes.iter().map(|&t| fine.node_index(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn uniform_grid_ends_at_horizon() {
        let g = TimeGrid::uniform(1.0, 3).unwrap();
        assert_eq!(g.steps(), 3);
        assert_eq!(g.horizon(), 1.0);
        assert!((g.dt(1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_increasing() {
        assert_eq!(
            TimeGrid::new(vec![0.0, 0.5, 0.5, 1.0]),
            Err(Error::InvalidGrid("nodes must be strictly increasing"))
        );
        assert!(TimeGrid::new(vec![0.1, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0]).is_err());
    }

    #[test]
    fn step_lookup() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert_eq!(g.step_containing(0.25), Some(0));
        assert_eq!(g.step_containing(0.26), Some(1));
        assert_eq!(g.step_containing(1.0), Some(3));
        assert_eq!(g.step_containing(0.0), None);
        assert_eq!(g.step_containing(1.5), None);
    }

    #[test]
    fn breakpoint_membership() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert!(g.check_breakpoints(&[0.0, 0.5]).is_ok());
        assert_eq!(
            g.check_breakpoints(&[0.3]),
            Err(Error::BreakpointOffGrid(0.3))
        );
        let coarse = TimeGrid::uniform(1.0, 2).unwrap();
        assert_eq!(coarse.embed_in(&g), Some(vec![0, 2, 4]));
        assert_eq!(g.embed_in(&coarse), None);
    }
}
