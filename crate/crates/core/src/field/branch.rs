//! Branch-point detection: near-coincident values combined with a
//! monodromy test on a small circle around the node.
//!
//! The circle (radius `1.5 h`, 32 samples in the `(x1, x2)` plane) is
//! sampled by matched interpolation, so it crosses fold lines of the data
//! transversally instead of running along a grid row of coincident values.
//! Each labeled sheet is predicted by linear extrapolation from the two
//! previous samples before matching, which follows sheets through
//! transversal crossings (as for `Re(c z^{1/2})` with real `c`).

use std::f64::consts::TAU;

use super::interp::interpolate_into;
use super::qfield::QField;
use crate::aq::{match_tuples_into, min_gap_flat};

/// Samples on the monodromy circle.
const RING_SAMPLES: usize = 32;
/// Circle radius in units of `h`.
const RING_RADIUS: f64 = 1.5;

#[derive(Clone, Debug, PartialEq)]
pub struct BranchCluster {
    pub nodes: Vec<usize>,
    pub centroid: Vec<f64>,
}

/// `3 h^alpha` for a known local degree, else `3 h^{1/2}`.
pub fn default_threshold(h: f64, alpha: Option<f64>) -> f64 {
    3.0 * h.powf(alpha.unwrap_or(0.5))
}

/// Permutation of sheet labels after transport once around the circle
/// about `node`, or `None` when the circle leaves the grid.
pub fn ring_monodromy(u: &QField, node: usize) -> Option<Vec<usize>> {
    let grid = u.grid();
    let n = grid.n();
    if n < 2 {
        return None;
    }
    let center = grid.coords_vec(node);
    let radius = RING_RADIUS * grid.h();
    let up = grid.upper();
    for k in 0..2 {
        if center[k] - radius < grid.origin()[k] || center[k] + radius > up[k] {
            return None;
        }
    }
    let (q, m) = (u.q(), u.m());
    let len = q * m;
    let mut samples = vec![0.0; RING_SAMPLES * len];
    let mut x = center.clone();
    for (k, out) in samples.chunks_exact_mut(len).enumerate() {
        let t = TAU * (k as f64 + 0.5) / RING_SAMPLES as f64;
        x[0] = center[0] + radius * t.cos();
        x[1] = center[1] + radius * t.sin();
        interpolate_into(u, &x, out);
    }
    let sample = |k: usize| &samples[(k % RING_SAMPLES) * len..(k % RING_SAMPLES + 1) * len];
    // labels are compared at the best separated sample
    let start = (0..RING_SAMPLES)
        .map(|k| (k, min_gap_flat(sample(k), m)))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
        .0;
    let mut cur = sample(start).to_vec();
    let mut prev: Option<Vec<f64>> = None;
    let mut slot: Vec<usize> = (0..q).collect();
    let mut predicted = vec![0.0; len];
    let mut perm = vec![0; q];
    for k in start + 1..=start + RING_SAMPLES {
        let target = sample(k);
        match &prev {
            Some(p) => predicted.iter_mut().zip(cur.iter().zip(p)).for_each(|(o, (c, p))| *o = 2.0 * c - p),
            None => predicted.copy_from_slice(&cur),
        }
        match_tuples_into(&predicted, target, m, &mut perm);
        let mut next = vec![0.0; len];
        for i in 0..q {
            next[i * m..(i + 1) * m].copy_from_slice(&target[perm[i] * m..(perm[i] + 1) * m]);
            slot[i] = perm[i];
        }
        prev = Some(std::mem::replace(&mut cur, next));
    }
    Some(slot)
}

/// Clusters of nodes whose values nearly coincide (minimum pairwise gap
/// below `tau`) and whose ring transport is a nontrivial permutation.
pub fn detect_branch_points(u: &QField, tau: f64) -> Vec<BranchCluster> {
    use rayon::prelude::*;
    let grid = u.grid();
    let n = grid.n();
    let m = u.m();
    let flagged: Vec<bool> = (0..grid.len())
        .into_par_iter()
        .map(|node| {
            if min_gap_flat(u.value(node), m) >= tau {
                return false;
            }
            match ring_monodromy(u, node) {
                Some(p) => p.iter().enumerate().any(|(i, &j)| i != j),
                None => false,
            }
        })
        .collect();
    let mut seen = vec![false; grid.len()];
    let mut clusters = Vec::new();
    let mut mi = [0usize; 3];
    let mut mj = [0usize; 3];
    for start in 0..grid.len() {
        if !flagged[start] || seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let mut nodes = Vec::new();
        while let Some(v) = stack.pop() {
            nodes.push(v);
            grid.multi_index(v, &mut mi[..n]);
            // all 3^n - 1 neighbors
            for code in 0..3usize.pow(n as u32) {
                let mut c = code;
                let mut ok = true;
                for k in 0..n {
                    let d = (c % 3) as isize - 1;
                    c /= 3;
                    let t = mi[k] as isize + d;
                    if t < 0 || t >= grid.dims()[k] as isize {
                        ok = false;
                        break;
                    }
                    mj[k] = t as usize;
                }
                if !ok {
                    continue;
                }
                let w = grid.index(&mj[..n]);
                if flagged[w] && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        nodes.sort_unstable();
        let mut centroid = vec![0.0; n];
        for &v in &nodes {
            let x = grid.coords_vec(v);
            centroid.iter_mut().zip(&x).for_each(|(c, x)| *c += x);
        }
        centroid.iter_mut().for_each(|c| *c /= nodes.len() as f64);
        clusters.push(BranchCluster { nodes, centroid });
    }
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylindrical::{CylindricalFunction, ExampleUk};
    use crate::eval::FnEvaluator;
    use crate::field::{sample_field, Grid};
    use num_complex::Complex64;

    #[test]
    fn finds_the_half_power_branch_point() {
        let g = Grid::cube(2, 1.0, 256).unwrap();
        let h = g.h();
        for c in [
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)],
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)],
        ] {
            let u = sample_field(&CylindricalFunction::single(1, 2, c).unwrap(), &g).unwrap();
            let found = detect_branch_points(&u, default_threshold(h, Some(0.5)));
            assert_eq!(found.len(), 1, "{found:?}");
            assert!(found[0].centroid.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1.5 * h);
            assert!(found[0].nodes.contains(&g.index(&[128, 128])));
        }
    }

    #[test]
    fn separated_harmonics_have_no_branch_points() {
        let g = Grid::cube(2, 1.0, 64).unwrap();
        let f = FnEvaluator::new(3, 1, |x: &[f64], out: &mut [f64]| {
            out[0] = x[0];
            out[1] = 3.0 + x[0] * x[1];
            out[2] = -3.0 + x[0] * x[0] - x[1] * x[1];
            Ok(())
        });
        let u = sample_field(&f, &g).unwrap();
        assert!(detect_branch_points(&u, 1.0).is_empty());
    }

    #[test]
    fn uk_has_three_branch_points() {
        let g = Grid::cube(2, 1.0, 256).unwrap();
        let h = g.h();
        let u = sample_field(&ExampleUk::new(3, 8.0).unwrap(), &g).unwrap();
        let found = detect_branch_points(&u, default_threshold(h, Some(1.0 / 3.0)));
        assert_eq!(found.len(), 3);
        for cl in &found {
            let r = cl.centroid[0].hypot(cl.centroid[1]);
            assert!((r - 0.5).abs() <= 1.5 * h);
        }
    }
}
