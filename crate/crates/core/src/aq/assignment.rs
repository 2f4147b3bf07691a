//! Exact linear assignment on small square cost matrices.
//!
//! The matching metric needs the true optimum, so for `n <= 6` every
//! permutation is visited (depth-first, with pruning) and for larger `n`
//! the Hungarian method with dual potentials is used. Exhaustive search
//! visits permutations in lexicographic order and only accepts strictly
//! better costs, so among optimal permutations the lexicographically
//! smallest one is returned.

/// Largest size solved by exhaustive search.
pub const EXHAUSTIVE_LIMIT: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// Total cost of the assignment.
    pub cost: f64,
    /// `perm[i] = j` assigns row `i` to column `j`.
    pub perm: Vec<usize>,
}

/// Solve the assignment problem for a row-major `n x n` cost matrix.
pub fn solve(cost: &[f64], n: usize) -> Assignment {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    let mut perm = vec![0usize; n];
    let total = if n <= EXHAUSTIVE_LIMIT {
        exhaustive_into(cost, n, &mut perm)
    } else {
        hungarian_into(cost, n, &mut perm)
    };
    Assignment { cost: total, perm }
}

/// Exhaustive search writing the optimal permutation into `perm`.
pub fn exhaustive_into(cost: &[f64], n: usize, perm: &mut [usize]) -> f64 {
    match n {
        0 => 0.0,
        1 => {
            perm[0] = 0;
            cost[0]
        }
        2 => {
            let id = cost[0] + cost[3];
            let sw = cost[1] + cost[2];
            if sw < id {
                perm[0] = 1;
                perm[1] = 0;
                sw
            } else {
                perm[0] = 0;
                perm[1] = 1;
                id
            }
        }
        _ => {
            let mut search = Search {
                cost,
                n,
                best: f64::INFINITY,
                current: [0; 16],
                used: 0,
            };
            let mut best_perm = [0usize; 16];
            search.descend(0, 0.0, &mut best_perm);
            perm[..n].copy_from_slice(&best_perm[..n]);
            search.best
        }
    }
}

struct Search<'a> {
    cost: &'a [f64],
    n: usize,
    best: f64,
    current: [usize; 16],
    used: u32,
}

impl Search<'_> {
    fn descend(&mut self, row: usize, acc: f64, best_perm: &mut [usize; 16]) {
        if row == self.n {
            if acc < self.best {
                self.best = acc;
                best_perm[..self.n].copy_from_slice(&self.current[..self.n]);
            }
            return;
        }
        for col in 0..self.n {
            if self.used & (1 << col) != 0 {
                continue;
            }
            let next = acc + self.cost[row * self.n + col];
            // costs are nonnegative, so a partial sum at or above the incumbent cannot win
            if next >= self.best {
                continue;
            }
            self.used |= 1 << col;
            self.current[row] = col;
            self.descend(row + 1, next, best_perm);
            self.used &= !(1 << col);
        }
    }
}

/// Hungarian method (shortest augmenting paths with potentials), O(n^3).
pub fn hungarian_into(cost: &[f64], n: usize, perm: &mut [usize]) -> f64 {
    // 1-based arrays; index 0 is the virtual source column
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    (0..n).map(|i| cost[i * n + perm[i]]).sum()
}

/// Matching between two flat q-tuples of `m`-vectors under squared
/// Euclidean cost. Returns the optimal squared cost and writes
/// `perm[i] = j` (value `i` of `a` is matched with value `j` of `b`).
pub fn match_tuples_into(a: &[f64], b: &[f64], m: usize, perm: &mut [usize]) -> f64 {
    let q = a.len() / m;
    debug_assert_eq!(a.len(), b.len());
    if q == 1 {
        perm[0] = 0;
        return sq_dist(a, b);
    }
    if q <= EXHAUSTIVE_LIMIT {
        let mut cost = [0.0f64; EXHAUSTIVE_LIMIT * EXHAUSTIVE_LIMIT];
        fill_cost(a, b, m, q, &mut cost[..q * q]);
        exhaustive_into(&cost[..q * q], q, perm)
    } else {
        let mut cost = vec![0.0; q * q];
        fill_cost(a, b, m, q, &mut cost);
        hungarian_into(&cost, q, perm)
    }
}

/// Optimal squared matching cost without reporting the permutation.
///
/// Arguments are put in a fixed order first so the result is bitwise
/// symmetric.
pub fn match_cost(a: &[f64], b: &[f64], m: usize) -> f64 {
    let (a, b) = if flat_less(b, a) { (b, a) } else { (a, b) };
    let q = a.len() / m;
    let mut perm = [0usize; 16];
    if q <= 16 {
        match_tuples_into(a, b, m, &mut perm[..q])
    } else {
        let mut perm = vec![0usize; q];
        match_tuples_into(a, b, m, &mut perm)
    }
}

fn flat_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o == std::cmp::Ordering::Less,
        }
    }
    false
}

fn fill_cost(a: &[f64], b: &[f64], m: usize, q: usize, cost: &mut [f64]) {
    for i in 0..q {
        let ai = &a[i * m..(i + 1) * m];
        for j in 0..q {
            cost[i * q + j] = sq_dist(ai, &b[j * m..(j + 1) * m]);
        }
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(cost: &[f64], n: usize) -> f64 {
        fn rec(cost: &[f64], n: usize, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == n {
                *best = best.min(acc);
                return;
            }
            for c in 0..n {
                if !used[c] {
                    used[c] = true;
                    rec(cost, n, row + 1, used, acc + cost[row * n + c], best);
                    used[c] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, n, 0, &mut vec![false; n], 0.0, &mut best);
        best
    }

    #[test]
    fn hungarian_matches_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=7 {
            for _ in 0..50 {
                let cost: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>() * 10.0).collect();
                let mut p = vec![0; n];
                let h = hungarian_into(&cost, n, &mut p);
                assert!((h - brute(&cost, n)).abs() < 1e-9);
                let mut seen = vec![false; n];
                p.iter().for_each(|&j| seen[j] = true);
                assert!(seen.iter().all(|&s| s));
            }
        }
    }

    #[test]
    fn ties_prefer_lexicographic_permutation() {
        let cost = vec![1.0; 9];
        let a = solve(&cost, 3);
        assert_eq!(a.perm, vec![0, 1, 2]);
        let a = solve(&[1.0, 1.0, 1.0, 1.0], 2);
        assert_eq!(a.perm, vec![0, 1]);
    }

    #[test]
    fn large_instances_use_hungarian() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 9;
        let cost: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
        let a = solve(&cost, n);
        // compare against exhaustive search with the limit lifted
        let mut p = vec![0; n];
        let mut search = Search { cost: &cost, n, best: f64::INFINITY, current: [0; 16], used: 0 };
        let mut best = [0usize; 16];
        search.descend(0, 0.0, &mut best);
        p.copy_from_slice(&best[..n]);
        assert!((a.cost - search.best).abs() < 1e-12);
    }
}
