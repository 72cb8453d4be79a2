use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::{Error, Result};

/// One grid dimension. Periodic axes cover `[min, max)` with `nodes`
/// points; other axes cover `[min, max]` including both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub nodes: usize,
    pub periodic: bool,
}

impl Axis {
    pub fn new(min: f64, max: f64, nodes: usize) -> Self {
        Self {
            min,
            max,
            nodes,
            periodic: false,
        }
    }

    pub fn periodic(min: f64, max: f64, nodes: usize) -> Self {
        Self {
            min,
            max,
            nodes,
            periodic: true,
        }
    }

    pub fn spacing(&self) -> f64 {
        if self.periodic {
            (self.max - self.min) / self.nodes as f64
        } else {
            (self.max - self.min) / (self.nodes - 1) as f64
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.min + i as f64 * self.spacing()
    }

    pub fn period(&self) -> f64 {
        self.max - self.min
    }

    /// Lower cell index and weight of the upper node for coordinate `x`.
    fn locate(&self, x: f64) -> Option<(usize, usize, f64)> {
        let h = self.spacing();
        if self.periodic {
            let n = self.nodes as f64;
            let mut s = ((x - self.min) / h) % n;
            if s < 0.0 {
                s += n;
            }
            let i = (s.floor() as usize).min(self.nodes - 1);
            return Some((i, (i + 1) % self.nodes, s - i as f64));
        }
        let s = (x - self.min) / h;
        let top = (self.nodes - 1) as f64;
        let slack = 1e-9;
        if !(s >= -slack && s <= top + slack) {
            return None;
        }
        let s = s.clamp(0.0, top);
        let i = (s.floor() as usize).min(self.nodes - 2);
        Some((i, i + 1, s - i as f64))
    }
}

/// Dense grid over the augmented state `(x, q)`. The last axis is clarity
/// on `[0, 1]` and varies fastest in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(state_axes: Vec<Axis>, clarity_nodes: usize) -> Result<Self> {
        let mut axes = state_axes;
        axes.push(Axis::new(0.0, 1.0, clarity_nodes));
        for (d, a) in axes.iter().enumerate() {
            if a.nodes < 3 {
                return Err(Error::InvalidGrid(format!("axis {d} needs at least 3 nodes, has {}", a.nodes)));
            }
            if !(a.max > a.min) || !a.min.is_finite() || !a.max.is_finite() {
                return Err(Error::InvalidGrid(format!("axis {d} has bounds [{}, {}]", a.min, a.max)));
            }
        }
        let mut strides = vec![1; axes.len()];
        for d in (0..axes.len() - 1).rev() {
            strides[d] = strides[d + 1] * axes[d + 1].nodes;
        }
        Ok(Self { axes, strides })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    /// Number of vehicle-state dimensions.
    pub fn state_dims(&self) -> usize {
        self.axes.len() - 1
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.strides[0] * self.axes[0].nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn clarity_axis(&self) -> &Axis {
        self.axes.last().unwrap()
    }

    /// Number of vehicle-state nodes (all nodes divided by clarity nodes).
    pub fn spatial_len(&self) -> usize {
        self.len() / self.clarity_axis().nodes
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        for d in 0..self.axes.len() {
            out[d] = idx / self.strides[d];
            idx %= self.strides[d];
        }
    }

    /// Coordinates of node `idx` (state then clarity).
    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut multi = vec![0; self.dims()];
        self.multi_index(idx, &mut multi);
        multi.iter().zip(&self.axes).map(|(&i, a)| a.coord(i)).collect()
    }

    /// Whether `point` lies within the non-periodic bounds.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dims() && self.axes.iter().zip(point).all(|(a, &x)| a.periodic || a.locate(x).is_some())
    }

    /// Same as [`Grid::contains`] but only checks the vehicle-state axes.
    pub fn contains_state(&self, x: &[f64]) -> bool {
        x.len() == self.state_dims() && self.axes.iter().zip(x).all(|(a, &v)| a.periodic || a.locate(v).is_some())
    }

    /// Multilinear interpolation of nodal `values` at `point`.
    pub fn interpolate(&self, values: &[f64], point: &[f64]) -> Result<f64> {
        if point.len() != self.dims() {
            return Err(Error::DimensionMismatch(format!(
                "query has {} coordinates, grid has {} axes",
                point.len(),
                self.dims()
            )));
        }
        let mut cells = [(0usize, 0usize, 0.0f64); 8];
        if self.dims() > cells.len() {
            return Err(Error::InvalidGrid(format!("interpolation supports up to 8 axes, grid has {}", self.dims())));
        }
        for (d, (a, &x)) in self.axes.iter().zip(point).enumerate() {
            cells[d] = a.locate(x).ok_or(Error::OutOfDomain)?;
        }
        let d = self.dims();
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut idx = 0;
            for k in 0..d {
                let (lo, hi, w) = cells[k];
                if corner >> k & 1 == 1 {
                    weight *= w;
                    idx += hi * self.strides[k];
                } else {
                    weight *= 1.0 - w;
                    idx += lo * self.strides[k];
                }
            }
            if weight != 0.0 {
                acc += weight * values[idx];
            }
        }
        Ok(acc)
    }
}
