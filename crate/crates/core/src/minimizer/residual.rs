//! Grid quadratures of the squash and squeeze first variations.

use crate::aq::match_tuples_into;
use crate::error::{Error, Result};
use crate::field::QField;
use crate::reduce::det_sum;
use crate::testfield::{ScalarField, VectorField};

/// Centered differences of each sheet at an interior node, with the tuples
/// at `node +- e_d` matched to the node tuple. Writes
/// `out[(i * m + k) * n + d] = d_d u_i^k`.
pub fn matched_gradient(u: &QField, node: usize, out: &mut [f64]) {
    let (q, m, n) = (u.q(), u.m(), u.n());
    let h = u.grid().h();
    let cur = u.value(node);
    let mut pm = vec![0usize; q];
    let mut pp = vec![0usize; q];
    for (d, &s) in u.grid().strides().iter().enumerate() {
        let minus = u.value(node - s);
        let plus = u.value(node + s);
        match_tuples_into(cur, minus, m, &mut pm);
        match_tuples_into(cur, plus, m, &mut pp);
        for i in 0..q {
            for k in 0..m {
                out[(i * m + k) * n + d] = (plus[pp[i] * m + k] - minus[pm[i] * m + k]) / (2.0 * h);
            }
        }
    }
}

/// Nodes in the bounding box of the support ball, which must stay one
/// spacing away from the box boundary.
fn support_nodes(u: &QField, center: &[f64], radius: f64) -> Result<Vec<usize>> {
    let grid = u.grid();
    if center.len() != grid.n() {
        return Err(Error::DimensionMismatch { expected: grid.n(), found: center.len() });
    }
    grid.check_ball(center, radius + grid.h())?;
    let n = grid.n();
    let ranges: Vec<(usize, usize)> =
        (0..n).map(|k| grid.axis_range(k, center[k] - radius, center[k] + radius)).collect();
    let mut nodes = Vec::new();
    let mut mi = vec![0usize; n];
    fn rec(k: usize, ranges: &[(usize, usize)], mi: &mut [usize], out: &mut Vec<usize>, strides: &[usize]) {
        if k == ranges.len() {
            out.push(mi.iter().zip(strides).map(|(i, s)| i * s).sum());
            return;
        }
        for i in ranges[k].0..=ranges[k].1 {
            mi[k] = i;
            rec(k + 1, ranges, mi, out, strides);
        }
    }
    rec(0, &ranges, &mut mi, &mut nodes, grid.strides());
    Ok(nodes)
}

/// `int |Du|^2 zeta + int u_i . D_d u_i D_d zeta`, half the derivative of
/// the energy along `u (1 + t zeta)`.
pub fn squash_residual(u: &QField, zeta: &dyn ScalarField) -> Result<f64> {
    let (center, radius) = zeta.support();
    let nodes = support_nodes(u, &center, radius)?;
    let (q, m, n) = (u.q(), u.m(), u.n());
    let grid = u.grid();
    let s = det_sum(nodes.len(), |k| {
        let node = nodes[k];
        let mut x = [0.0; 3];
        grid.coords(node, &mut x[..n]);
        let z = zeta.value(&x[..n]);
        let mut gz = [0.0; 3];
        zeta.gradient(&x[..n], &mut gz[..n]);
        if z == 0.0 && gz[..n].iter().all(|g| *g == 0.0) {
            return 0.0;
        }
        let mut du = vec![0.0; q * m * n];
        matched_gradient(u, node, &mut du);
        let val = u.value(node);
        let mut acc = 0.0;
        for ik in 0..q * m {
            let g = &du[ik * n..(ik + 1) * n];
            acc += z * g.iter().map(|v| v * v).sum::<f64>();
            acc += val[ik] * g.iter().zip(&gz[..n]).map(|(a, b)| a * b).sum::<f64>();
        }
        acc
    });
    Ok(s * grid.h().powi(n as i32))
}

/// `int 2 D_a u . D_b u D_a zeta^b - |Du|^2 div zeta`, the derivative of
/// the energy along `u(X + t zeta(X))` at `t = 0`.
pub fn squeeze_residual(u: &QField, zeta: &dyn VectorField) -> Result<f64> {
    let (center, radius) = zeta.support();
    let nodes = support_nodes(u, &center, radius)?;
    let (q, m, n) = (u.q(), u.m(), u.n());
    if zeta.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: zeta.dim() });
    }
    let grid = u.grid();
    let s = det_sum(nodes.len(), |k| {
        let node = nodes[k];
        let mut x = [0.0; 3];
        grid.coords(node, &mut x[..n]);
        let mut jac = [0.0; 9];
        zeta.jacobian(&x[..n], &mut jac[..n * n]);
        if jac[..n * n].iter().all(|v| *v == 0.0) {
            return 0.0;
        }
        let div: f64 = (0..n).map(|a| jac[a * n + a]).sum();
        let mut du = vec![0.0; q * m * n];
        matched_gradient(u, node, &mut du);
        let mut acc = 0.0;
        for ik in 0..q * m {
            let g = &du[ik * n..(ik + 1) * n];
            for a in 0..n {
                for b in 0..n {
                    acc += 2.0 * g[a] * g[b] * jac[a * n + b];
                }
            }
            acc -= g.iter().map(|v| v * v).sum::<f64>() * div;
        }
        acc
    });
    Ok(s * grid.h().powi(n as i32))
}
