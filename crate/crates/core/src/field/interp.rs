//! Matched multilinear interpolation of q-valued grid data.
//!
//! The corner with the largest weight is the base; every other corner's
//! tuple is matched to the base tuple by optimal assignment and the matched
//! values are blended sheet by sheet. Points outside the box are clamped.

use super::qfield::QField;
use crate::aq::match_tuples_into;

/// Interpolate `u` at `x`, writing `q * m` reals in the base corner's order.
pub fn interpolate_into(u: &QField, x: &[f64], out: &mut [f64]) {
    let grid = u.grid();
    let n = grid.n();
    let (q, m) = (u.q(), u.m());
    let mut base_idx = [0usize; 3];
    let mut frac = [0.0; 3];
    for k in 0..n {
        let t = ((x[k] - grid.origin()[k]) / grid.h()).clamp(0.0, (grid.dims()[k] - 1) as f64);
        let i = (t.floor() as usize).min(grid.dims()[k] - 2);
        base_idx[k] = i;
        frac[k] = t - i as f64;
    }
    let lower = grid.index(&base_idx[..n]);
    let corners = 1usize << n;
    let corner_node = |c: usize| -> usize {
        (0..n).filter(|&k| c >> k & 1 == 1).map(|k| grid.strides()[k]).sum::<usize>() + lower
    };
    let weight = |c: usize| -> f64 {
        (0..n).map(|k| if c >> k & 1 == 1 { frac[k] } else { 1.0 - frac[k] }).product()
    };
    let mut best = 0;
    let mut best_w = weight(0);
    for c in 1..corners {
        let w = weight(c);
        if w > best_w {
            best = c;
            best_w = w;
        }
    }
    let base = u.value(corner_node(best));
    let len = q * m;
    for (o, b) in out[..len].iter_mut().zip(base) {
        *o = best_w * b;
    }
    let mut perm = [0usize; 16];
    let mut perm_vec;
    let perm: &mut [usize] = if q <= 16 {
        &mut perm[..q]
    } else {
        perm_vec = vec![0; q];
        &mut perm_vec
    };
    for c in 0..corners {
        if c == best {
            continue;
        }
        let w = weight(c);
        if w == 0.0 {
            continue;
        }
        let v = u.value(corner_node(c));
        match_tuples_into(base, v, m, perm);
        for i in 0..q {
            let j = perm[i];
            for k in 0..m {
                out[i * m + k] += w * v[j * m + k];
            }
        }
    }
}

pub fn interpolate(u: &QField, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.stride()];
    interpolate_into(u, x, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aq::AqPoint;
    use crate::cylindrical::{BranchSum, BranchTerm};
    use crate::field::{sample_field, Grid};
    use num_complex::Complex64;

    #[test]
    fn reproduces_linear_sheets() {
        // two crossing-free linear sheets are interpolated exactly
        let g = Grid::cube(2, 1.0, 16).unwrap();
        let f = crate::eval::FnEvaluator::new(2, 1, |x: &[f64], out: &mut [f64]| {
            out[0] = 2.0 * x[0] - x[1] + 5.0;
            out[1] = -x[0] + 0.5 * x[1] - 5.0;
            Ok(())
        });
        let u = sample_field(&f, &g).unwrap();
        for x in [[0.13, -0.41], [0.77, 0.5], [-0.99, 0.99]] {
            let got = AqPoint::from_flat(interpolate(&u, &x), 1).unwrap();
            let want = crate::eval::QEvaluator::eval(&f, &x).unwrap();
            assert!(got.metric(&want).unwrap() < 1e-12);
        }
        // nodes are reproduced bitwise
        let node = g.index(&[3, 7]);
        let got = AqPoint::from_flat(interpolate(&u, &g.coords_vec(node)), 1).unwrap();
        assert_eq!(got, u.point(node));
    }

    #[test]
    fn second_order_on_branched_data() {
        let s = BranchSum::new(vec![BranchTerm { k0: 1, q0: 2, coeff: vec![Complex64::new(1.0, 0.3)] }], None).unwrap();
        let x = [0.4137, -0.2611];
        let want = crate::eval::QEvaluator::eval(&s, &x).unwrap();
        let err = |cells| {
            let u = sample_field(&s, &Grid::cube(2, 1.0, cells).unwrap()).unwrap();
            AqPoint::from_flat(interpolate(&u, &x), 1).unwrap().metric(&want).unwrap()
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e2 < e1 / 3.0, "{e1} {e2}");
    }
}
