use crate::error::{Error, Result};

/// Uniform node grid over an axis-aligned box. Nodes are numbered in
/// C order (last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dims: Vec<usize>,
    origin: Vec<f64>,
    h: f64,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(origin: Vec<f64>, dims: Vec<usize>, h: f64) -> Result<Self> {
        let n = dims.len();
        if !(1..=3).contains(&n) || origin.len() != n {
            return Err(Error::ShapeMismatch(format!("grid dimension {n} with origin of length {}", origin.len())));
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidParameter("every axis needs at least two nodes".into()));
        }
        if !(h > 0.0 && h.is_finite()) || origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidParameter("spacing must be positive and finite".into()));
        }
        let mut strides = vec![1; n];
        for i in (0..n - 1).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        Ok(Grid { dims, origin, h, strides })
    }

    /// `[-half, half]^n` with `cells` cells per side.
    pub fn cube(n: usize, half: f64, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidParameter("need at least one cell".into()));
        }
        Grid::new(vec![-half; n], vec![cells + 1; n], 2.0 * half / cells as f64)
    }

    /// Default box `[-1, 1]^n` with spacing `2/256`.
    pub fn default_box(n: usize) -> Self {
        Grid::cube(n, 1.0, 256).expect("valid default grid")
    }

    pub fn n(&self) -> usize {
        self.dims.len()
    }
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }
    pub fn origin(&self) -> &[f64] {
        &self.origin
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Upper corner of the box.
    pub fn upper(&self) -> Vec<f64> {
        self.origin.iter().zip(&self.dims).map(|(o, &d)| o + self.h * (d - 1) as f64).collect()
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut node: usize, out: &mut [usize]) {
        for (o, s) in out.iter_mut().zip(&self.strides) {
            *o = node / s;
            node %= s;
        }
    }

    pub fn coords(&self, node: usize, out: &mut [f64]) {
        let mut node = node;
        for k in 0..self.n() {
            let i = node / self.strides[k];
            node %= self.strides[k];
            out[k] = self.origin[k] + self.h * i as f64;
        }
    }

    pub fn coords_vec(&self, node: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n()];
        self.coords(node, &mut x);
        x
    }

    /// True on the topological boundary of the index box.
    pub fn is_boundary(&self, node: usize) -> bool {
        let mut node = node;
        for k in 0..self.n() {
            let i = node / self.strides[k];
            node %= self.strides[k];
            if i == 0 || i + 1 == self.dims[k] {
                return true;
            }
        }
        false
    }

    /// Check that the closed ball lies in the box.
    pub fn check_ball(&self, center: &[f64], radius: f64) -> Result<()> {
        let up = self.upper();
        let tol = 1e-12 * self.h;
        let inside = center.len() == self.n()
            && radius > 0.0
            && center
                .iter()
                .zip(self.origin.iter().zip(&up))
                .all(|(c, (lo, hi))| c - radius >= lo - tol && c + radius <= hi + tol);
        if inside {
            Ok(())
        } else {
            Err(Error::BallOutsideBox { center: center.to_vec(), radius })
        }
    }

    /// Index range (inclusive) of nodes within `radius` of `center` along axis `k`, clamped.
    pub fn axis_range(&self, k: usize, lo: f64, hi: f64) -> (usize, usize) {
        let a = ((lo - self.origin[k]) / self.h).floor().max(0.0) as usize;
        let b = (((hi - self.origin[k]) / self.h).ceil().max(0.0) as usize).min(self.dims[k] - 1);
        (a.min(self.dims[k] - 1), b)
    }
}
