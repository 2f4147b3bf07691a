use rayon::prelude::*;

use super::grid::Grid;
use crate::aq::{canonicalize_flat, AqPoint};
use crate::error::{Error, Result};
use crate::eval::QEvaluator;

/// A q-valued function sampled at the nodes of a uniform grid.
///
/// Values are stored flat: node-major, then value (sheet), then coordinate.
/// The stored order of the q values at a node carries no meaning.
#[derive(Clone, Debug, PartialEq)]
pub struct QField {
    grid: Grid,
    q: usize,
    m: usize,
    data: Vec<f64>,
}

impl QField {
    pub fn from_data(grid: Grid, q: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if q == 0 || m == 0 {
            return Err(Error::EmptyPoint);
        }
        if data.len() != grid.len() * q * m {
            return Err(Error::ShapeMismatch(format!(
                "{} reals for {} nodes with q = {q}, m = {m}",
                data.len(),
                grid.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(QField { grid, q, m, data })
    }

    /// Every node holds `q` copies of the origin.
    pub fn zeros(grid: Grid, q: usize, m: usize) -> Self {
        let len = grid.len() * q * m;
        QField { grid, q, m, data: vec![0.0; len] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n(&self) -> usize {
        self.grid.n()
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
    /// Callers keep the values finite.
    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Width of one node's block.
    pub fn stride(&self) -> usize {
        self.q * self.m
    }

    pub fn value(&self, node: usize) -> &[f64] {
        let s = self.stride();
        &self.data[node * s..(node + 1) * s]
    }

    pub fn value_mut(&mut self, node: usize) -> &mut [f64] {
        let s = self.stride();
        &mut self.data[node * s..(node + 1) * s]
    }

    pub fn point(&self, node: usize) -> AqPoint {
        AqPoint::from_flat(self.value(node).to_vec(), self.m).expect("field values are finite")
    }

    /// Per-node flag, true exactly on the boundary of the index box.
    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.grid.len()).map(|i| self.grid.is_boundary(i)).collect()
    }

    /// Apply `f` to every stored real.
    pub fn map_values(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        QField::from_data(self.grid.clone(), self.q, self.m, self.data.iter().map(|&x| f(x)).collect())
    }

    pub fn scale(&self, lambda: f64) -> Result<Self> {
        self.map_values(|x| lambda * x)
    }

    /// Add `v` to every value at every node.
    pub fn translate(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, found: v.len() });
        }
        let mut data = self.data.clone();
        for chunk in data.chunks_exact_mut(self.m) {
            chunk.iter_mut().zip(v).for_each(|(x, a)| *x += a);
        }
        QField::from_data(self.grid.clone(), self.q, self.m, data)
    }

    /// Sort each node's values into canonical order.
    pub fn canonicalize(&mut self) {
        let (s, m) = (self.stride(), self.m);
        self.data.par_chunks_mut(s).for_each(|v| canonicalize_flat(v, m));
    }

    /// Largest value norm |u(X)| over all nodes.
    pub fn sup_norm(&self) -> f64 {
        self.data
            .chunks_exact(self.stride())
            .map(|v| v.iter().map(|x| x * x).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt()
    }

    pub fn same_shape(&self, other: &QField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch("fields live on different grids".into()));
        }
        if self.q != other.q || self.m != other.m {
            return Err(Error::ShapeMismatch(format!(
                "(q, m) = ({}, {}) vs ({}, {})",
                self.q, self.m, other.q, other.m
            )));
        }
        Ok(())
    }
}

/// Sample an evaluator at every node. Node values are stored canonically.
pub fn sample_field<E: QEvaluator + ?Sized>(f: &E, grid: &Grid) -> Result<QField> {
    let (q, m) = (f.q(), f.m());
    let s = q * m;
    let n = grid.n();
    let mut data = vec![0.0; grid.len() * s];
    data.par_chunks_mut(s).enumerate().try_for_each(|(node, out)| {
        let mut x = [0.0; 3];
        grid.coords(node, &mut x[..n]);
        f.eval_into(&x[..n], out).map_err(|e| Error::Evaluator { node, reason: e.to_string() })?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluator { node, reason: "non-finite value".into() });
        }
        canonicalize_flat(out, m);
        Ok(())
    })?;
    Ok(QField { grid: grid.clone(), q, m, data })
}
