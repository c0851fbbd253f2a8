use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Uniform,
    /// cosine-graded, finest next to both walls
    Clustered,
    /// read back from a file
    Custom,
}

/// Nodes x_0 = r0 < ... < x_N = r1. Cheap to clone.
#[derive(Debug, Clone)]
pub struct RadialGrid<T> {
    nodes: Arc<Vec<T>>,
    spacing: Spacing,
}

pub const MIN_CELLS: usize = 8;

impl<T: Real> RadialGrid<T> {
    pub fn new(r0: T, r1: T, cells: usize, spacing: Spacing) -> Result<Self> {
        if cells < MIN_CELLS {
            return Err(Error::InvalidConfig(format!("grid needs at least {MIN_CELLS} cells, got {cells}")));
        }
        if !(r1 > r0) {
            return Err(Error::InvalidConfig("grid endpoints must be increasing".into()));
        }
        let nf = T::from_usize_lossy(cells);
        let len = r1 - r0;
        let mut nodes: Vec<T> = (0..=cells)
            .map(|i| {
                let t = T::from_usize_lossy(i) / nf;
                match spacing {
                    Spacing::Clustered => {
                        let half = T::lit(0.5);
                        r0 + len * half * (T::one() - (T::PI() * t).cos())
                    }
                    _ => r0 + len * t,
                }
            })
            .collect();
        nodes[0] = r0;
        nodes[cells] = r1;
        let spacing = if spacing == Spacing::Custom { Spacing::Uniform } else { spacing };
        Self::checked(nodes, spacing)
    }

    pub fn uniform(r0: T, r1: T, cells: usize) -> Result<Self> {
        Self::new(r0, r1, cells, Spacing::Uniform)
    }

    pub fn from_nodes(nodes: Vec<T>) -> Result<Self> {
        Self::checked(nodes, Spacing::Custom)
    }

    fn checked(nodes: Vec<T>, spacing: Spacing) -> Result<Self> {
        if nodes.len() < MIN_CELLS + 1 {
            return Err(Error::InvalidConfig(format!("grid needs at least {} nodes", MIN_CELLS + 1)));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("grid nodes must be finite".into()));
        }
        if let Some(i) = nodes.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig(format!("grid nodes not strictly increasing at index {}", i + 1)));
        }
        Ok(Self { nodes: Arc::new(nodes), spacing })
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }
    pub fn spacing(&self) -> Spacing {
        self.spacing
    }
    /// Number of nodes, N + 1.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    /// Number of cells N.
    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }
    pub fn r0(&self) -> T {
        self.nodes[0]
    }
    pub fn r1(&self) -> T {
        self.nodes[self.nodes.len() - 1]
    }
    /// Width of cell [x_i, x_{i+1}].
    pub fn h(&self, i: usize) -> T {
        self.nodes[i + 1] - self.nodes[i]
    }
    pub fn mid(&self, i: usize) -> T {
        (self.nodes[i + 1] + self.nodes[i]) * T::lit(0.5)
    }
    pub fn h_max(&self) -> T {
        (0..self.cells()).fold(T::zero(), |a, i| a.max(self.h(i)))
    }
    pub fn h_min(&self) -> T {
        (0..self.cells()).fold(T::infinity(), |a, i| a.min(self.h(i)))
    }

    pub fn same_as(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.nodes, &other.nodes) || self.nodes == other.nodes
    }

    pub fn matches_interval(&self, r0: T, r1: T) -> bool {
        self.r0() == r0 && self.r1() == r1
    }
}

/// Real values attached to the nodes of a grid.
#[derive(Debug, Clone)]
pub struct Profile<T> {
    grid: RadialGrid<T>,
    values: Vec<T>,
}

impl<T: Real> Profile<T> {
    pub fn new(grid: RadialGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain { what: "profile value", value: values[i].as_f64() });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &RadialGrid<T>, f: impl Fn(T) -> T) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn constant(grid: &RadialGrid<T>, c: T) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn grid(&self) -> &RadialGrid<T> {
        &self.grid
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn into_values(self) -> Vec<T> {
        self.values
    }
    pub fn nodes(&self) -> &[T] {
        self.grid.nodes()
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn min(&self) -> T {
        self.values.iter().fold(T::infinity(), |a, &b| a.min(b))
    }
    pub fn max(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |a, &b| a.max(b))
    }

    pub fn sup_distance(&self, other: &Self) -> Result<T> {
        self.require_same_grid(other)?;
        Ok(crate::scalar::sup_diff(&self.values, &other.values))
    }

    pub fn require_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("profiles live on different grids".into()))
        }
    }

    /// Linear interpolation at r inside the grid span.
    pub fn interpolate(&self, r: T) -> T {
        let x = self.grid.nodes();
        let k = x.partition_point(|&xi| xi <= r).clamp(1, x.len() - 1);
        let t = (r - x[k - 1]) / (x[k] - x[k - 1]);
        self.values[k - 1] + t * (self.values[k] - self.values[k - 1])
    }
}
