use std::cmp::Ordering;

use super::assignment::{match_tuples_into, sq_dist};
use crate::error::{Error, Result};

/// An unordered q-tuple of points in R^m.
///
/// Values are stored flat (`q * m` reals) in lexicographic order, so two
/// points with the same multiset of values compare equal bitwise.
#[derive(Clone, Debug, PartialEq)]
pub struct AqPoint {
    q: usize,
    m: usize,
    values: Vec<f64>,
}

impl AqPoint {
    /// Build a point from a list of vectors.
    pub fn new(values: &[Vec<f64>]) -> Result<Self> {
        let first = values.first().ok_or(Error::EmptyPoint)?;
        let m = first.len();
        if m == 0 {
            return Err(Error::EmptyPoint);
        }
        let mut flat = Vec::with_capacity(values.len() * m);
        for v in values {
            if v.len() != m {
                return Err(Error::DimensionMismatch { expected: m, found: v.len() });
            }
            flat.extend_from_slice(v);
        }
        Self::from_flat(flat, m)
    }

    /// Build a point from `q * m` reals laid out value by value.
    pub fn from_flat(values: Vec<f64>, m: usize) -> Result<Self> {
        if m == 0 || values.is_empty() {
            return Err(Error::EmptyPoint);
        }
        if !values.len().is_multiple_of(m) {
            return Err(Error::DimensionMismatch { expected: m, found: values.len() % m });
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let q = values.len() / m;
        let mut p = AqPoint { q, m, values };
        p.canonicalize();
        Ok(p)
    }

    /// q copies of the origin.
    pub fn zero(q: usize, m: usize) -> Self {
        assert!(q > 0 && m > 0);
        AqPoint { q, m, values: vec![0.0; q * m] }
    }

    /// q copies of `v`.
    pub fn repeated(v: &[f64], q: usize) -> Result<Self> {
        Self::from_flat(v.repeat(q), v.len())
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Flat canonical storage.
    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, j: usize) -> &[f64] {
        &self.values[j * self.m..(j + 1) * self.m]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.m)
    }

    fn canonicalize(&mut self) {
        canonicalize_flat(&mut self.values, self.m);
    }

    fn check_shape(&self, other: &AqPoint) -> Result<()> {
        if self.q != other.q {
            return Err(Error::ShapeMismatch(format!("q = {} vs {}", self.q, other.q)));
        }
        if self.m != other.m {
            return Err(Error::DimensionMismatch { expected: self.m, found: other.m });
        }
        Ok(())
    }

    /// Matching distance G(a, b).
    pub fn metric(&self, other: &AqPoint) -> Result<f64> {
        Ok(self.metric_sq(other)?.sqrt())
    }

    /// Squared matching distance.
    pub fn metric_sq(&self, other: &AqPoint) -> Result<f64> {
        self.check_shape(other)?;
        Ok(super::assignment::match_cost(&self.values, &other.values, self.m))
    }

    /// Optimal matching: `perm[i] = j` pairs value `i` of `self` with value `j` of `other`.
    pub fn matching(&self, other: &AqPoint) -> Result<(f64, Vec<usize>)> {
        self.check_shape(other)?;
        let mut perm = vec![0; self.q];
        let c = match_tuples_into(&self.values, &other.values, self.m, &mut perm);
        Ok((c, perm))
    }

    /// |a| = G(a, q[[0]]).
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum()
    }

    /// Minimum distance between distinct values; +inf if all values coincide.
    pub fn separation(&self) -> f64 {
        self.separation_with_tolerance(0.0)
    }

    /// Separation where values closer than `tol` count as the same value.
    pub fn separation_with_tolerance(&self, tol: f64) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.q {
            for j in i + 1..self.q {
                let d = sq_dist(self.value(i), self.value(j)).sqrt();
                if d > tol && d < best {
                    best = d;
                }
            }
        }
        best
    }

    /// Smallest pairwise distance, zero when two values coincide; +inf for q = 1.
    pub fn min_gap(&self) -> f64 {
        min_gap_flat(&self.values, self.m)
    }

    pub fn average(&self) -> Vec<f64> {
        let mut avg = vec![0.0; self.m];
        for v in self.iter() {
            avg.iter_mut().zip(v).for_each(|(a, x)| *a += x);
        }
        avg.iter_mut().for_each(|a| *a /= self.q as f64);
        avg
    }

    /// Values translated so that their mean is zero.
    pub fn average_free(&self) -> AqPoint {
        let avg = self.average();
        let mut values = self.values.clone();
        for v in values.chunks_exact_mut(self.m) {
            v.iter_mut().zip(&avg).for_each(|(x, a)| *x -= a);
        }
        let mut p = AqPoint { q: self.q, m: self.m, values };
        p.canonicalize();
        p
    }

    /// Add the same vector to every value.
    pub fn translate(&self, v: &[f64]) -> Result<AqPoint> {
        if v.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, found: v.len() });
        }
        let mut values = self.values.clone();
        for x in values.chunks_exact_mut(self.m) {
            x.iter_mut().zip(v).for_each(|(x, a)| *x += a);
        }
        AqPoint::from_flat(values, self.m)
    }

    /// lambda * a, scaling every value.
    pub fn scale(&self, lambda: f64) -> Result<AqPoint> {
        AqPoint::from_flat(self.values.iter().map(|x| lambda * x).collect(), self.m)
    }

    /// Apply a linear map (row-major `m x m`) to every value.
    pub fn map_linear(&self, matrix: &[f64]) -> Result<AqPoint> {
        let m = self.m;
        if matrix.len() != m * m {
            return Err(Error::ShapeMismatch(format!("expected {m}x{m} matrix")));
        }
        let mut out = Vec::with_capacity(self.values.len());
        for v in self.iter() {
            for r in 0..m {
                out.push((0..m).map(|c| matrix[r * m + c] * v[c]).sum());
            }
        }
        AqPoint::from_flat(out, m)
    }

    /// Sum of m_j copies of each point, as one point with q = sum m_j q_j.
    pub fn concat_sum(parts: &[(usize, AqPoint)], target_q: usize) -> Result<AqPoint> {
        let first = parts.first().ok_or(Error::EmptyPoint)?;
        let m = first.1.m;
        let mut total = 0;
        let mut values = Vec::new();
        for (mult, p) in parts {
            if p.m != m {
                return Err(Error::DimensionMismatch { expected: m, found: p.m });
            }
            if *mult == 0 {
                return Err(Error::InvalidParameter("multiplicity must be positive".into()));
            }
            total += mult * p.q;
            for _ in 0..*mult {
                values.extend_from_slice(&p.values);
            }
        }
        if total != target_q {
            return Err(Error::ShapeMismatch(format!(
                "multiplicities give q = {total}, expected {target_q}"
            )));
        }
        AqPoint::from_flat(values, m)
    }
}

/// Sort a flat tuple of m-vectors lexicographically (stable).
pub fn canonicalize_flat(values: &mut [f64], m: usize) {
    let q = values.len() / m;
    if q <= 1 {
        return;
    }
    let mut idx: Vec<usize> = (0..q).collect();
    idx.sort_by(|&i, &j| lex_cmp(&values[i * m..(i + 1) * m], &values[j * m..(j + 1) * m]));
    if idx.iter().enumerate().all(|(k, &i)| k == i) {
        return;
    }
    let src = values.to_vec();
    for (k, &i) in idx.iter().enumerate() {
        values[k * m..(k + 1) * m].copy_from_slice(&src[i * m..(i + 1) * m]);
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Smallest pairwise distance within a flat tuple; +inf when q = 1.
pub fn min_gap_flat(values: &[f64], m: usize) -> f64 {
    let q = values.len() / m;
    let mut best = f64::INFINITY;
    for i in 0..q {
        for j in i + 1..q {
            best = best.min(sq_dist(&values[i * m..(i + 1) * m], &values[j * m..(j + 1) * m]));
        }
    }
    best.sqrt()
}
