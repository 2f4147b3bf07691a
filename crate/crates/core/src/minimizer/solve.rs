use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aq::{match_cost, match_tuples_into, min_gap_flat};
use crate::error::{Error, Result};
use crate::field::{Grid, QField};
use crate::reduce::det_sum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepOrder {
    /// Gauss-Seidel in node index order.
    Lexicographic,
    /// Two colors by index parity; nodes of one color are updated in
    /// parallel, so results do not depend on the thread count.
    RedBlack,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveParams {
    pub max_sweeps: usize,
    /// Stop once a sweep lowers the energy by less than this fraction.
    pub energy_tol: f64,
    /// Additionally require the largest per-sheet node move of the sweep
    /// to be at most this.
    pub delta_tol: f64,
    /// Total number of solves; solves after the first start from the best
    /// field so far, perturbed near its lowest-separation nodes.
    pub restarts: usize,
    /// Perturbation size as a multiple of the local separation.
    pub perturb0: f64,
    /// Factor applied to the perturbation size on each further restart.
    pub anneal: f64,
    pub seed: u64,
    /// Over-relaxation factor in (0, 2); 1 is the plain matched mean.
    pub relaxation: f64,
    pub order: SweepOrder,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            max_sweeps: 20_000,
            energy_tol: 1e-10,
            delta_tol: f64::INFINITY,
            restarts: 5,
            perturb0: 0.5,
            anneal: 0.5,
            seed: 0,
            relaxation: 1.0,
            order: SweepOrder::Lexicographic,
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::InvalidParameter(s.into()));
        if self.max_sweeps == 0 || self.restarts == 0 {
            return bad("max_sweeps and restarts must be positive");
        }
        if !(self.energy_tol > 0.0) || !(self.delta_tol > 0.0) || !(self.perturb0 > 0.0) {
            return bad("tolerances and perturb0 must be positive");
        }
        if !(self.anneal > 0.0 && self.anneal < 1.0) {
            return bad("anneal must lie in (0, 1)");
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return bad("relaxation must lie in (0, 2)");
        }
        Ok(())
    }

    /// Over-relaxation factor `2 / (1 + sin(pi / cells))`, optimal for the
    /// scalar Laplacian on a square with `cells` cells per side.
    pub fn optimal_relaxation(cells: usize) -> f64 {
        2.0 / (1.0 + (std::f64::consts::PI / cells as f64).sin())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogEntry {
    pub restart: usize,
    /// 0 is the starting field of the solve.
    pub sweep: usize,
    pub energy: f64,
    pub max_delta: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub field: QField,
    pub energy: f64,
    pub best_restart: usize,
    pub log: Vec<LogEntry>,
}

/// `sum over forward edges G(u_i, u_j)^2 h^{n-2}`.
pub fn discrete_energy(u: &QField) -> f64 {
    let grid = u.grid();
    let n = grid.n();
    let s = det_sum(grid.len(), |node| {
        let mut mi = [0usize; 3];
        grid.multi_index(node, &mut mi[..n]);
        let mut e = 0.0;
        for k in 0..n {
            if mi[k] + 1 < grid.dims()[k] {
                e += match_cost(u.value(node), u.value(node + grid.strides()[k]), u.m());
            }
        }
        e
    });
    s * grid.h().powi(n as i32 - 2)
}

/// Box boundary nodes.
pub fn box_mask(grid: &Grid) -> Vec<bool> {
    (0..grid.len()).map(|i| grid.is_boundary(i)).collect()
}

/// Box boundary nodes and nodes at distance `>= radius` from `center`.
pub fn ball_mask(grid: &Grid, center: &[f64], radius: f64) -> Vec<bool> {
    let mut x = vec![0.0; grid.n()];
    (0..grid.len())
        .map(|i| {
            grid.coords(i, &mut x);
            let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
            grid.is_boundary(i) || r2 >= radius * radius
        })
        .collect()
}

struct Workspace<'a> {
    strides: &'a [usize],
    q: usize,
    m: usize,
    omega: f64,
}

impl Workspace<'_> {
    /// New value of `node` into `out`; returns the largest sheet move.
    fn relax(&self, data: &[f64], node: usize, out: &mut [f64]) -> f64 {
        let (q, m) = (self.q, self.m);
        let len = q * m;
        let cur = &data[node * len..(node + 1) * len];
        let mut acc = [0.0f64; 64];
        let mut acc_vec;
        let acc: &mut [f64] = if len <= 64 {
            &mut acc[..len]
        } else {
            acc_vec = vec![0.0; len];
            &mut acc_vec
        };
        let mut perm = vec![0usize; q];
        let mut deg = 0.0;
        for &s in self.strides {
            for nb in [node - s, node + s] {
                let other = &data[nb * len..(nb + 1) * len];
                match_tuples_into(cur, other, m, &mut perm);
                for i in 0..q {
                    for k in 0..m {
                        acc[i * m + k] += other[perm[i] * m + k];
                    }
                }
                deg += 1.0;
            }
        }
        let mut max_delta: f64 = 0.0;
        for i in 0..q {
            let mut d2 = 0.0;
            for k in 0..m {
                let j = i * m + k;
                let step = self.omega * (acc[j] / deg - cur[j]);
                out[j] = cur[j] + step;
                d2 += step * step;
            }
            max_delta = max_delta.max(d2.sqrt());
        }
        max_delta
    }
}

struct Schedule {
    /// Free nodes in index order, split by color for red-black sweeps.
    colors: Vec<Vec<usize>>,
    free: Vec<usize>,
}

fn schedule(grid: &Grid, fixed: &[bool]) -> Schedule {
    let n = grid.n();
    let free: Vec<usize> = (0..grid.len()).filter(|&i| !fixed[i]).collect();
    let mut colors = vec![Vec::new(), Vec::new()];
    let mut mi = [0usize; 3];
    for &i in &free {
        grid.multi_index(i, &mut mi[..n]);
        colors[mi[..n].iter().sum::<usize>() % 2].push(i);
    }
    Schedule { colors, free }
}

fn sweep(data: &mut [f64], ws: &Workspace, sched: &Schedule, order: SweepOrder) -> f64 {
    let len = ws.q * ws.m;
    let mut max_delta: f64 = 0.0;
    match order {
        SweepOrder::Lexicographic => {
            let mut out = vec![0.0; len];
            for &node in &sched.free {
                max_delta = max_delta.max(ws.relax(data, node, &mut out));
                data[node * len..(node + 1) * len].copy_from_slice(&out);
            }
        }
        SweepOrder::RedBlack => {
            for color in &sched.colors {
                let mut buf = vec![0.0; color.len() * len];
                let snapshot: &[f64] = data;
                let deltas: Vec<f64> = buf
                    .par_chunks_mut(len)
                    .zip(color.par_iter())
                    .map(|(out, &node)| ws.relax(snapshot, node, out))
                    .collect();
                for (k, &node) in color.iter().enumerate() {
                    data[node * len..(node + 1) * len].copy_from_slice(&buf[k * len..(k + 1) * len]);
                }
                max_delta = deltas.into_iter().fold(max_delta, f64::max);
            }
        }
    }
    max_delta
}

fn solve_once(
    u: &mut QField,
    sched: &Schedule,
    params: &SolveParams,
    restart: usize,
    log: &mut Vec<LogEntry>,
) -> Result<f64> {
    let strides = u.grid().strides().to_vec();
    let ws = Workspace { strides: &strides, q: u.q(), m: u.m(), omega: params.relaxation };
    let mut energy = discrete_energy(u);
    if !energy.is_finite() {
        return Err(Error::NonFiniteEnergy);
    }
    log.push(LogEntry { restart, sweep: 0, energy, max_delta: 0.0 });
    let mut previous = u.data().to_vec();
    for s in 1..=params.max_sweeps {
        let delta = sweep(u.data_mut(), &ws, sched, params.order);
        let e = discrete_energy(u);
        if !e.is_finite() {
            return Err(Error::NonFiniteEnergy);
        }
        if e > energy {
            // roundoff at convergence; keep the previous field
            u.data_mut().copy_from_slice(&previous);
            break;
        }
        let decrease = energy - e;
        energy = e;
        log.push(LogEntry { restart, sweep: s, energy, max_delta: delta });
        if (energy == 0.0 || decrease <= params.energy_tol * energy) && delta <= params.delta_tol {
            break;
        }
        previous.copy_from_slice(u.data());
    }
    Ok(energy)
}

fn perturb(u: &mut QField, sched: &Schedule, scale: f64, rng: &mut ChaCha8Rng) {
    let (q, m) = (u.q(), u.m());
    if q < 2 || sched.free.is_empty() {
        return;
    }
    let mut gaps: Vec<(f64, usize)> = sched.free.iter().map(|&i| (min_gap_flat(u.value(i), m), i)).collect();
    gaps.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let count = gaps.len().div_ceil(100);
    let strides = u.grid().strides().to_vec();
    let h = u.grid().h();
    for &(_, node) in &gaps[..count] {
        let local = strides
            .iter()
            .flat_map(|&s| [node - s, node + s])
            .map(|nb| min_gap_flat(u.value(nb), m))
            .fold(0.0f64, f64::max);
        let amp = scale * if local > 0.0 { local } else { h };
        for v in u.value_mut(node) {
            *v += amp * rng.random_range(-1.0..=1.0);
        }
    }
}

/// Minimize the discrete energy over the nodes not marked `fixed`, which
/// must include the box boundary. `init` supplies the fixed values.
pub fn minimize(init: &QField, fixed: &[bool], params: &SolveParams) -> Result<Solution> {
    params.validate()?;
    let grid = init.grid();
    if fixed.len() != grid.len() {
        return Err(Error::ShapeMismatch(format!("mask of {} nodes for {} grid nodes", fixed.len(), grid.len())));
    }
    if let Some(i) = (0..grid.len()).find(|&i| grid.is_boundary(i) && !fixed[i]) {
        return Err(Error::InvalidParameter(format!("box boundary node {i} is not fixed")));
    }
    if init.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let sched = schedule(grid, fixed);
    let mut log = Vec::new();
    let mut best = init.clone();
    let mut best_energy = solve_once(&mut best, &sched, params, 0, &mut log)?;
    let mut best_restart = 0;
    let runs = if init.q() < 2 { 1 } else { params.restarts };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut scale = params.perturb0;
    for r in 1..runs {
        let mut u = best.clone();
        perturb(&mut u, &sched, scale, &mut rng);
        scale *= params.anneal;
        let e = solve_once(&mut u, &sched, params, r, &mut log)?;
        if e < best_energy {
            best = u;
            best_energy = e;
            best_restart = r;
        }
    }
    best.canonicalize();
    Ok(Solution { field: best, energy: best_energy, best_restart, log })
}

/// CSV with columns `restart,sweep,energy,max_delta`.
pub fn log_csv(log: &[LogEntry]) -> String {
    let mut s = String::from("restart,sweep,energy,max_delta\n");
    for e in log {
        writeln!(s, "{},{},{:e},{:e}", e.restart, e.sweep, e.energy, e.max_delta).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylindrical::CylindricalFunction;
    use crate::eval::FnEvaluator;
    use crate::field::{dist_sq_ball, sample_field, Ball};
    use nalgebra::{DMatrix, DVector};
    use num_complex::Complex64;

    fn scalar(f: impl Fn(&[f64]) -> f64 + Sync) -> impl crate::eval::QEvaluator {
        FnEvaluator::new(1, 1, move |x: &[f64], out: &mut [f64]| {
            out[0] = f(x);
            Ok(())
        })
    }

    /// Direct solve of the 5-point Laplacian with the boundary of `u`.
    fn laplace_oracle(u: &QField) -> Vec<f64> {
        let g = u.grid();
        let free: Vec<usize> = (0..g.len()).filter(|&i| !g.is_boundary(i)).collect();
        let mut slot = vec![usize::MAX; g.len()];
        for (k, &i) in free.iter().enumerate() {
            slot[i] = k;
        }
        let mut a = DMatrix::zeros(free.len(), free.len());
        let mut b = DVector::zeros(free.len());
        for (k, &i) in free.iter().enumerate() {
            a[(k, k)] = 4.0;
            for &s in g.strides() {
                for nb in [i - s, i + s] {
                    if slot[nb] == usize::MAX {
                        b[k] += u.data()[nb];
                    } else {
                        a[(k, slot[nb])] = -1.0;
                    }
                }
            }
        }
        let x = a.lu().solve(&b).unwrap();
        let mut out = u.data().to_vec();
        for (k, &i) in free.iter().enumerate() {
            out[i] = x[k];
        }
        out
    }

    fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let n: f64 = b.iter().map(|y| y * y).sum();
        (d / n).sqrt()
    }

    fn with_zero_interior(u: &QField, fixed: &[bool]) -> QField {
        let mut v = u.clone();
        for (i, &f) in fixed.iter().enumerate() {
            if !f {
                v.value_mut(i).fill(0.0);
            }
        }
        v
    }

    fn tight(order: SweepOrder, cells: usize) -> SolveParams {
        SolveParams {
            energy_tol: 1e-15,
            delta_tol: 1e-14,
            relaxation: SolveParams::optimal_relaxation(cells),
            order,
            restarts: 1,
            ..SolveParams::default()
        }
    }

    #[test]
    fn energy_of_simple_fields() {
        let g = Grid::new(vec![0.0, 0.0], vec![65, 65], 1.0 / 64.0).unwrap();
        assert_eq!(discrete_energy(&QField::zeros(g.clone(), 3, 2)), 0.0);
        let u = sample_field(&scalar(|x| x[0]), &g).unwrap();
        // 64 cells of slope 1 per row, 65 rows: 65/64
        assert!((discrete_energy(&u) - 65.0 / 64.0).abs() < 1e-12);
        let two = u.map_values(|v| v).unwrap();
        let doubled = QField::from_data(g.clone(), 2, 1, two.data().iter().flat_map(|v| [*v, *v]).collect()).unwrap();
        assert!((discrete_energy(&doubled) - 2.0 * discrete_energy(&u)).abs() < 1e-12);
    }

    #[test]
    fn scalar_harmonic_matches_linear_solve() {
        let g = Grid::cube(2, 1.0, 24).unwrap();
        let exact = sample_field(&scalar(|x| x[0] * x[0] - x[1] * x[1] + (3.0 * x[0]).sin()), &g).unwrap();
        let fixed = box_mask(&g);
        let oracle = laplace_oracle(&exact);
        for order in [SweepOrder::Lexicographic, SweepOrder::RedBlack] {
            let sol = minimize(&with_zero_interior(&exact, &fixed), &fixed, &tight(order, 24)).unwrap();
            assert!(rel_l2(sol.field.data(), &oracle) < 1e-8, "{order:?} {} {:?}", rel_l2(sol.field.data(), &oracle), sol.log.last());
        }
    }

    #[test]
    fn separated_sheets_match_scalar_solves() {
        let g = Grid::cube(2, 1.0, 20).unwrap();
        let fs: [fn(&[f64]) -> f64; 3] =
            [|x| x[0] * x[1], |x| 10.0 + x[0] * x[0] - x[1] * x[1], |x| 20.0 + (x[0] + 0.3 * x[1]).exp()];
        let parts: Vec<QField> = fs.iter().map(|f| sample_field(&scalar(f), &g).unwrap()).collect();
        let data: Vec<f64> = (0..g.len()).flat_map(|i| parts.iter().map(move |p| p.data()[i])).collect();
        let u = QField::from_data(g.clone(), 3, 1, data).unwrap();
        let fixed = box_mask(&g);
        let sol = minimize(&with_zero_interior(&u, &fixed), &fixed, &tight(SweepOrder::RedBlack, 20)).unwrap();
        for (s, p) in parts.iter().enumerate() {
            let oracle = laplace_oracle(p);
            let got: Vec<f64> = (0..g.len()).map(|i| sol.field.value(i)[s]).collect();
            assert!(rel_l2(&got, &oracle) < 1e-8);
        }
    }

    #[test]
    fn branched_boundary_recovers_half_power() {
        let c = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        let phi = CylindricalFunction::single(1, 2, c).unwrap();
        let g = Grid::cube(2, 1.0, 64).unwrap();
        let exact = sample_field(&phi, &g).unwrap();
        let fixed = ball_mask(&g, &[0.0, 0.0], 1.0);
        let init = with_zero_interior(&exact, &fixed);
        let params = SolveParams { restarts: 2, energy_tol: 1e-12, ..tight(SweepOrder::RedBlack, 64) };
        let sol = minimize(&init, &fixed, &params).unwrap();
        let d = dist_sq_ball(&sol.field, &exact, &Ball::origin(2, 1.0)).unwrap().sqrt();
        assert!(d < 5e-2, "{d}");
        for w in sol.log.windows(2) {
            if w[0].restart == w[1].restart {
                assert!(w[1].energy <= w[0].energy);
            }
        }
        for i in 0..g.len() {
            if fixed[i] {
                let mut a = sol.field.value(i).to_vec();
                let mut b = init.value(i).to_vec();
                crate::aq::canonicalize_flat(&mut a, 2);
                crate::aq::canonicalize_flat(&mut b, 2);
                assert_eq!(a, b);
            }
        }
        assert!(sol.log.iter().any(|e| e.restart == 1));
    }

    #[test]
    fn independent_of_thread_count() {
        let c = vec![Complex64::new(1.0, 0.5), Complex64::new(0.0, 1.0)];
        let phi = CylindricalFunction::single(1, 2, c).unwrap();
        let g = Grid::cube(2, 1.0, 32).unwrap();
        let fixed = ball_mask(&g, &[0.0, 0.0], 0.9);
        let init = with_zero_interior(&sample_field(&phi, &g).unwrap(), &fixed);
        let params = SolveParams { max_sweeps: 200, restarts: 3, seed: 7, order: SweepOrder::RedBlack, ..SolveParams::default() };
        let run = |t| {
            rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap().install(|| minimize(&init, &fixed, &params).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a.field, b.field);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn local_stationarity_at_convergence() {
        let c = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        let phi = CylindricalFunction::single(1, 2, c).unwrap();
        let g = Grid::cube(2, 1.0, 32).unwrap();
        let fixed = ball_mask(&g, &[0.0, 0.0], 1.0);
        let params = SolveParams { restarts: 1, ..SolveParams::default() };
        let sol = minimize(&with_zero_interior(&sample_field(&phi, &g).unwrap(), &fixed), &fixed, &params).unwrap();
        let strides = g.strides().to_vec();
        let ws = Workspace { strides: &strides, q: 2, m: 2, omega: 1.0 };
        let e0 = discrete_energy(&sol.field);
        let mut out = vec![0.0; 4];
        for node in (0..g.len()).filter(|&i| !fixed[i]).step_by(7) {
            let mut v = sol.field.clone();
            ws.relax(sol.field.data(), node, &mut out);
            v.value_mut(node).copy_from_slice(&out);
            assert!((e0 - discrete_energy(&v)).abs() <= 1e-8 * e0);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let g = Grid::cube(2, 1.0, 8).unwrap();
        let u = QField::zeros(g.clone(), 1, 1);
        let free = vec![false; g.len()];
        assert!(minimize(&u, &free, &SolveParams::default()).is_err());
        let bad = SolveParams { anneal: 1.0, ..SolveParams::default() };
        assert!(minimize(&u, &box_mask(&g), &bad).is_err());
    }

    #[test]
    fn log_has_header() {
        let csv = log_csv(&[LogEntry { restart: 0, sweep: 1, energy: 2.0, max_delta: 0.5 }]);
        assert_eq!(csv, "restart,sweep,energy,max_delta\n0,1,2e0,5e-1\n");
    }
}
