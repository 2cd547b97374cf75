//! Periodic uniform grids on the flat torus and grid-sampled functions.
//!
//! Points and momenta are carried as `[f64; 2]` with the first `dim` entries
//! meaningful; this keeps all geometry allocation-free for n = 1, 2.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Maximum supported spatial dimension.
pub const MAX_DIM: usize = 2;

/// A point, momentum or velocity on the torus / its (co)tangent fiber.
pub type Coord = [f64; MAX_DIM];

/// Uniform periodic discretization of `T^n` with `n_per_dim` points per
/// dimension and spacing `h = 1 / n_per_dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    n_per_dim: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n_per_dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(CoreError::invalid(format!(
                "grid dimension must be 1 or 2, got {dim}"
            )));
        }
        if n_per_dim < 2 {
            return Err(CoreError::invalid(format!(
                "grid needs at least 2 points per dimension, got {n_per_dim}"
            )));
        }
        Ok(TorusGrid { dim, n_per_dim })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n_per_dim(&self) -> usize {
        self.n_per_dim
    }

    /// Grid spacing `h = 1/N`.
    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.n_per_dim as f64
    }

    /// Total number of nodes, `N^dim`.
    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.n_per_dim.pow(self.dim as u32)
    }

    /// Multi-index of a flat node index (row-major, axis 0 fastest).
    #[inline]
    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIM] {
        debug_assert!(flat < self.num_nodes());
        match self.dim {
            1 => [flat, 0],
            _ => [flat % self.n_per_dim, flat / self.n_per_dim],
        }
    }

    /// Flat index of a multi-index (entries already reduced mod N).
    #[inline]
    pub fn flat_index(&self, idx: [usize; MAX_DIM]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] + self.n_per_dim * idx[1],
        }
    }

    /// Coordinates of a node in the fundamental domain `[0, 1)^n`.
    #[inline]
    pub fn node_point(&self, flat: usize) -> Coord {
        let idx = self.multi_index(flat);
        let h = self.spacing();
        [idx[0] as f64 * h, idx[1] as f64 * h]
    }

    /// Shift a flat index by an integer offset per axis (periodic wrap).
    #[inline]
    pub fn shift(&self, flat: usize, offset: [i64; MAX_DIM]) -> usize {
        let idx = self.multi_index(flat);
        let n = self.n_per_dim as i64;
        let mut out = [0usize; MAX_DIM];
        for d in 0..self.dim {
            out[d] = (idx[d] as i64 + offset[d]).rem_euclid(n) as usize;
        }
        self.flat_index(out)
    }

    /// Minimal periodic integer offset `k` with `k ≡ raw (mod N)` and
    /// `k ∈ (-N/2, N/2]`; antipodal ties take the positive representative.
    #[inline]
    pub fn wrap_offset(&self, raw: i64) -> i64 {
        let n = self.n_per_dim as i64;
        let mut k = raw.rem_euclid(n);
        if 2 * k > n {
            k -= n;
        }
        k
    }

    /// Minimal periodic displacement vector from node `from` to node `to`
    /// (so that `to = from + disp` on the torus).
    pub fn node_displacement(&self, from: usize, to: usize) -> Coord {
        let a = self.multi_index(from);
        let b = self.multi_index(to);
        let h = self.spacing();
        let mut out = [0.0; MAX_DIM];
        for d in 0..self.dim {
            out[d] = self.wrap_offset(b[d] as i64 - a[d] as i64) as f64 * h;
        }
        out
    }

    /// Periodic distance between two nodes.
    pub fn node_distance(&self, a: usize, b: usize) -> f64 {
        let disp = self.node_displacement(a, b);
        norm(&disp, self.dim)
    }

    /// Periodic distance between two arbitrary points of `[0,1)^n`.
    pub fn point_distance(&self, a: &Coord, b: &Coord) -> f64 {
        let mut s = 0.0;
        for d in 0..self.dim {
            let mut delta = (a[d] - b[d]).rem_euclid(1.0);
            if delta > 0.5 {
                delta = 1.0 - delta;
            }
            s += delta * delta;
        }
        s.sqrt()
    }
}

/// Euclidean norm of the first `dim` entries.
#[inline]
pub fn norm(v: &Coord, dim: usize) -> f64 {
    match dim {
        1 => v[0].abs(),
        _ => v[0].hypot(v[1]),
    }
}

/// Dot product of the first `dim` entries.
#[inline]
pub fn dot(a: &Coord, b: &Coord, dim: usize) -> f64 {
    match dim {
        1 => a[0] * b[0],
        _ => a[0] * b[0] + a[1] * b[1],
    }
}

/// Reduce a point to the fundamental domain `[0, 1)^n`.
#[inline]
pub fn reduce_point(x: &Coord, dim: usize) -> Coord {
    let mut out = [0.0; MAX_DIM];
    for d in 0..dim {
        out[d] = x[d].rem_euclid(1.0);
    }
    out
}

/// Grid samples of a scalar function `u(·, t)` on the torus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueFunction {
    pub grid: TorusGrid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl ValueFunction {
    /// Wrap raw node values; rejects non-finite entries and size mismatch.
    pub fn new(grid: TorusGrid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(CoreError::invalid(format!(
                "value vector has {} entries, grid has {} nodes",
                values.len(),
                grid.num_nodes()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::invalid(format!(
                "non-finite value at node {i}"
            )));
        }
        if !time.is_finite() || time < 0.0 {
            return Err(CoreError::invalid(format!("invalid time {time}")));
        }
        Ok(ValueFunction { grid, values, time })
    }

    /// Sample a closure at every node.
    pub fn from_fn(grid: TorusGrid, time: f64, f: impl Fn(&Coord) -> f64) -> Result<Self> {
        let values = (0..grid.num_nodes())
            .map(|i| f(&grid.node_point(i)))
            .collect();
        Self::new(grid, values, time)
    }

    pub fn constant(grid: TorusGrid, value: f64, time: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.num_nodes()], time)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max - min` over the grid.
    pub fn oscillation(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Max-norm distance to another grid function on the same grid.
    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
