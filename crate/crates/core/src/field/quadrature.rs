//! Ball quadratures on the grid.
//!
//! Nodal integrands are integrated by multilinear interpolation on each
//! cell; edge integrands (squared matching differences) by attaching to
//! each edge the `h^n` box centered at its midpoint. Cells and boxes cut by
//! the sphere are resolved with `4^n` subsamples.

use super::grid::Grid;
use super::qfield::QField;
use crate::aq::match_cost;
use crate::error::Result;
use crate::reduce::det_sum;

/// Subsamples per axis in cells cut by the sphere.
const SUB: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Ball { center, radius }
    }

    pub fn origin(n: usize, radius: f64) -> Self {
        Ball { center: vec![0.0; n], radius }
    }

    fn dist(&self, x: &[f64]) -> f64 {
        self.center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum::<f64>().sqrt()
    }
}

/// Weights `w_i` with `int_B K(|X - Y|) f ~ sum_i w_i f(X_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeQuadrature {
    pub entries: Vec<(usize, f64)>,
}

/// Weights `w_e` with `int_B K(|X - Y|) |Du|^2 ~ sum_e w_e G(u_i, u_j)^2 / h^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeQuadrature {
    /// `(node, axis, weight)` for the edge from `node` to `node + e_axis`.
    pub entries: Vec<(usize, usize, f64)>,
}

/// Offsets in `[0, 1)` of the subsample points along one axis.
fn sub_offsets() -> [f64; SUB] {
    std::array::from_fn(|k| (k as f64 + 0.5) / SUB as f64)
}

/// Iterate over multi-indices in the inclusive box `lo..=hi`.
fn for_each_index(lo: &[usize], hi: &[usize], mut f: impl FnMut(&[usize])) {
    let n = lo.len();
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return;
    }
    let mut idx = lo.to_vec();
    loop {
        f(&idx);
        let mut k = n;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if idx[k] < hi[k] {
                idx[k] += 1;
                break;
            }
            idx[k] = lo[k];
        }
    }
}

fn bounding(grid: &Grid, ball: &Ball) -> (Vec<usize>, Vec<usize>) {
    let n = grid.n();
    let mut lo = vec![0; n];
    let mut hi = vec![0; n];
    for k in 0..n {
        let (a, b) = grid.axis_range(k, ball.center[k] - ball.radius - grid.h(), ball.center[k] + ball.radius + grid.h());
        lo[k] = a;
        hi[k] = b;
    }
    (lo, hi)
}

/// Fraction of `[corner, corner + h]^n` inside the ball, weighted by the
/// kernel, times the box volume: returns per-subsample `(point weight, point)`.
fn box_samples<'a>(
    corner: &'a [f64],
    h: f64,
    ball: &'a Ball,
    kernel: &'a dyn Fn(f64) -> f64,
    mut emit: impl FnMut(&[usize], f64) + 'a,
) {
    let n = corner.len();
    let off = sub_offsets();
    let vol = h.powi(n as i32) / (SUB.pow(n as u32)) as f64;
    let mut x = [0.0; 3];
    for_each_index(&vec![0; n], &vec![SUB - 1; n], |s| {
        for k in 0..n {
            x[k] = corner[k] + h * off[s[k]];
        }
        let r = ball.dist(&x[..n]);
        if r < ball.radius {
            emit(s, vol * kernel(r));
        }
    });
}

/// Closest and farthest distance from the ball center to a box.
fn box_range(corner: &[f64], h: f64, ball: &Ball) -> (f64, f64) {
    let mut near = 0.0;
    let mut far = 0.0;
    for (k, c) in ball.center.iter().enumerate() {
        let (a, b) = (corner[k] - c, corner[k] + h - c);
        let d = if a > 0.0 {
            a
        } else if b < 0.0 {
            -b
        } else {
            0.0
        };
        near += d * d;
        far += a.abs().max(b.abs()).powi(2);
    }
    (near.sqrt(), far.sqrt())
}

impl NodeQuadrature {
    pub fn new(grid: &Grid, ball: &Ball, kernel: &dyn Fn(f64) -> f64) -> Result<Self> {
        grid.check_ball(&ball.center, ball.radius)?;
        let n = grid.n();
        let h = grid.h();
        let (lo, mut hi) = bounding(grid, ball);
        // cells are indexed by their lower corner
        for k in 0..n {
            hi[k] = hi[k].min(grid.dims()[k] - 2);
        }
        let off = sub_offsets();
        let corners = 1usize << n;
        let mut weights = vec![0.0; grid.len()];
        let mut corner = [0.0; 3];
        let mut acc = [0.0; 8];
        for_each_index(&lo, &hi, |cell| {
            for k in 0..n {
                corner[k] = grid.origin()[k] + h * cell[k] as f64;
            }
            let (near, _) = box_range(&corner[..n], h, ball);
            if near >= ball.radius {
                return;
            }
            acc[..corners].fill(0.0);
            box_samples(&corner[..n], h, ball, kernel, |s, w| {
                for (c, a) in acc[..corners].iter_mut().enumerate() {
                    let mut basis = w;
                    for k in 0..n {
                        let t = off[s[k]];
                        basis *= if c >> (n - 1 - k) & 1 == 1 { t } else { 1.0 - t };
                    }
                    *a += basis;
                }
            });
            let base = grid.index(cell);
            for (c, a) in acc[..corners].iter().enumerate() {
                let mut node = base;
                for k in 0..n {
                    if c >> (n - 1 - k) & 1 == 1 {
                        node += grid.strides()[k];
                    }
                }
                weights[node] += a;
            }
        });
        let entries = weights.into_iter().enumerate().filter(|(_, w)| *w != 0.0).collect();
        Ok(NodeQuadrature { entries })
    }

    /// `sum_i w_i f(i)` with a deterministic summation order.
    pub fn apply(&self, f: impl Fn(usize) -> f64 + Sync) -> f64 {
        det_sum(self.entries.len(), |k| {
            let (node, w) = self.entries[k];
            w * f(node)
        })
    }

    pub fn total_weight(&self) -> f64 {
        self.apply(|_| 1.0)
    }
}

impl EdgeQuadrature {
    pub fn new(grid: &Grid, ball: &Ball, kernel: &dyn Fn(f64) -> f64) -> Result<Self> {
        grid.check_ball(&ball.center, ball.radius)?;
        let n = grid.n();
        let h = grid.h();
        let (lo, hi) = bounding(grid, ball);
        let mut entries = Vec::new();
        let mut corner = [0.0; 3];
        for axis in 0..n {
            let mut hi_a = hi.clone();
            hi_a[axis] = hi_a[axis].min(grid.dims()[axis] - 2);
            for_each_index(&lo, &hi_a, |node| {
                // box centered at the edge midpoint
                for k in 0..n {
                    let mid = grid.origin()[k] + h * node[k] as f64 + if k == axis { 0.5 * h } else { 0.0 };
                    corner[k] = mid - 0.5 * h;
                }
                let (near, _) = box_range(&corner[..n], h, ball);
                if near >= ball.radius {
                    return;
                }
                let mut w = 0.0;
                box_samples(&corner[..n], h, ball, kernel, |_, pw| w += pw);
                if w != 0.0 {
                    entries.push((grid.index(node), axis, w));
                }
            });
        }
        Ok(EdgeQuadrature { entries })
    }

    /// `sum_e w_e G(u_i, u_j)^2 / h^2`.
    pub fn energy(&self, u: &QField) -> f64 {
        let h2 = u.grid().h().powi(2);
        let strides = u.grid().strides().to_vec();
        det_sum(self.entries.len(), |k| {
            let (node, axis, w) = self.entries[k];
            w * match_cost(u.value(node), u.value(node + strides[axis]), u.m()) / h2
        })
    }
}

fn one(_: f64) -> f64 {
    1.0
}

/// `int_B |u|^2`.
pub fn l2_sq_ball(u: &QField, ball: &Ball) -> Result<f64> {
    let quad = NodeQuadrature::new(u.grid(), ball, &one)?;
    Ok(quad.apply(|i| u.value(i).iter().map(|x| x * x).sum()))
}

/// `int_B G(u, v)^2`.
pub fn dist_sq_ball(u: &QField, v: &QField, ball: &Ball) -> Result<f64> {
    u.same_shape(v)?;
    let quad = NodeQuadrature::new(u.grid(), ball, &one)?;
    Ok(quad.apply(|i| match_cost(u.value(i), v.value(i), u.m())))
}

/// `int_B |Du|^2` through the edge quadrature.
pub fn energy_ball(u: &QField, ball: &Ball) -> Result<f64> {
    Ok(EdgeQuadrature::new(u.grid(), ball, &one)?.energy(u))
}

/// Per node, `h^n sum G(u_i, u_{i + e_k})^2 / h^2` over the forward edges
/// leaving that node. The total is the discrete energy.
pub fn grad_energy_density(u: &QField) -> Vec<f64> {
    let grid = u.grid();
    let n = grid.n();
    let scale = grid.h().powi(n as i32 - 2);
    let mut out = vec![0.0; grid.len()];
    use rayon::prelude::*;
    out.par_iter_mut().enumerate().for_each(|(node, o)| {
        let mut mi = [0usize; 3];
        grid.multi_index(node, &mut mi[..n]);
        let mut s = 0.0;
        for k in 0..n {
            if mi[k] + 1 < grid.dims()[k] {
                s += match_cost(u.value(node), u.value(node + grid.strides()[k]), u.m());
            }
        }
        *o = s * scale;
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylindrical::{BranchSum, BranchTerm, CylindricalFunction};
    use crate::eval::FnEvaluator;
    use crate::field::sample_field;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn scalar(f: impl Fn(&[f64]) -> f64 + Sync) -> impl crate::eval::QEvaluator {
        FnEvaluator::new(1, 1, move |x: &[f64], out: &mut [f64]| {
            out[0] = f(x);
            Ok(())
        })
    }

    #[test]
    fn unit_field_integrates_to_area() {
        let rho = 0.5;
        let g = Grid::cube(2, 1.0, (2.0 / (rho / 64.0)) as usize).unwrap();
        let u = sample_field(&scalar(|_| 1.0), &g).unwrap();
        let a = l2_sq_ball(&u, &Ball::origin(2, rho)).unwrap();
        assert!((a - PI * rho * rho).abs() < 0.01 * PI * rho * rho);
        // off-center ball, 3d volume
        let g3 = Grid::cube(3, 1.0, 48).unwrap();
        let u3 = sample_field(&scalar(|_| 1.0), &g3).unwrap();
        let v = l2_sq_ball(&u3, &Ball::new(vec![0.1, -0.2, 0.05], 0.6)).unwrap();
        assert!((v - 4.0 / 3.0 * PI * 0.216).abs() < 0.01 * v);
    }

    #[test]
    fn zero_and_self_distances() {
        let g = Grid::cube(2, 1.0, 32).unwrap();
        let u = QField::zeros(g.clone(), 2, 2);
        assert_eq!(l2_sq_ball(&u, &Ball::origin(2, 0.9)).unwrap(), 0.0);
        let phi = CylindricalFunction::single(1, 2, vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]).unwrap();
        let v = sample_field(&phi, &g).unwrap();
        assert_eq!(dist_sq_ball(&v, &v, &Ball::origin(2, 0.9)).unwrap(), 0.0);
        assert!(l2_sq_ball(&v, &Ball::origin(2, 1.5)).is_err());
    }

    #[test]
    fn l2_scales_quadratically() {
        let g = Grid::cube(2, 1.0, 40).unwrap();
        let u = sample_field(&scalar(|x| x[0] * x[1] + 0.3), &g).unwrap();
        let b = Ball::new(vec![0.1, 0.0], 0.7);
        let a = l2_sq_ball(&u, &b).unwrap();
        let s = l2_sq_ball(&u.scale(-2.5).unwrap(), &b).unwrap();
        assert!((s - 6.25 * a).abs() < 1e-12 * s);
    }

    #[test]
    fn energy_of_linear_function() {
        // u = x1 on [0,1]^2 has energy 1
        let g = Grid::new(vec![0.0, 0.0], vec![65, 65], 1.0 / 64.0).unwrap();
        let u = sample_field(&scalar(|x| x[0]), &g).unwrap();
        let total: f64 = grad_energy_density(&u).iter().sum();
        assert!((total - 1.0).abs() < 2.0 / 64.0, "{total}");
        // ball energy of x1 on B_r is pi r^2
        let g = Grid::cube(2, 1.0, 128).unwrap();
        let u = sample_field(&scalar(|x| x[0]), &g).unwrap();
        let e = energy_ball(&u, &Ball::origin(2, 0.5)).unwrap();
        assert!((e - PI * 0.25).abs() < 1e-3, "{e}");
    }

    #[test]
    fn energy_ignores_constant_shifts_and_repeats() {
        let g = Grid::cube(2, 1.0, 24).unwrap();
        let s = BranchSum::new(vec![BranchTerm { k0: 1, q0: 2, coeff: vec![Complex64::new(1.0, 0.5)] }], None).unwrap();
        let u = sample_field(&s, &g).unwrap();
        let e: f64 = grad_energy_density(&u).iter().sum();
        let e2: f64 = grad_energy_density(&u.translate(&[3.0]).unwrap()).iter().sum();
        assert!((e - e2).abs() < 1e-10 * e);
        let single = sample_field(&scalar(|x| x[0] * x[0] - x[1]), &g).unwrap();
        let tripled = QField::from_data(g.clone(), 3, 1, single.data().iter().flat_map(|&v| [v, v, v]).collect()).unwrap();
        let e1: f64 = grad_energy_density(&single).iter().sum();
        let e3: f64 = grad_energy_density(&tripled).iter().sum();
        assert!((e3 - 3.0 * e1).abs() < 1e-12 * e3);
    }
}
