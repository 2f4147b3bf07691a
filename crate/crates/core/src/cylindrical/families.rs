//! Closed-form multi-valued test functions.

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::function::gcd;
use crate::error::{Error, Result};
use crate::eval::QEvaluator;

/// `((x1 + i x2)^q - 1/k)^{1/q}` as a q-valued map into R^2 = C.
///
/// Branch points sit where `(x1 + i x2)^q = 1/k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExampleUk {
    pub q: usize,
    pub k: f64,
}

impl ExampleUk {
    pub fn new(q: usize, k: f64) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidParameter("example needs q >= 2".into()));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidParameter("k must be positive and finite".into()));
        }
        Ok(ExampleUk { q, k })
    }
}

impl QEvaluator for ExampleUk {
    fn q(&self) -> usize {
        self.q
    }
    fn m(&self) -> usize {
        2
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let z = Complex64::new(x[0], x[1]);
        let w = z.powu(self.q as u32) - 1.0 / self.k;
        if w == Complex64::new(0.0, 0.0) {
            out[..2 * self.q].fill(0.0);
            return Ok(());
        }
        let (r, t) = w.to_polar();
        let rq = r.powf(1.0 / self.q as f64);
        for j in 0..self.q {
            let v = Complex64::from_polar(rq, (t + TAU * j as f64) / self.q as f64);
            out[2 * j] = v.re;
            out[2 * j + 1] = v.im;
        }
        Ok(())
    }
}

/// One homogeneous term `Re(c z^{k0/q0})`.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchTerm {
    pub k0: usize,
    pub q0: usize,
    pub coeff: Vec<Complex64>,
}

/// Branchwise sum `constant + sum_t Re(c_t z^{alpha_t})` on the common
/// cover, a Q-valued function with `Q = lcm(q0_t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchSum {
    m: usize,
    cover: usize,
    terms: Vec<BranchTerm>,
    constant: Vec<f64>,
}

impl BranchSum {
    pub fn new(terms: Vec<BranchTerm>, constant: Option<Vec<f64>>) -> Result<Self> {
        let m = terms
            .first()
            .map(|t| t.coeff.len())
            .or(constant.as_ref().map(|c| c.len()))
            .ok_or_else(|| Error::InvalidParameter("empty branch sum".into()))?;
        let mut cover = 1;
        for t in &terms {
            if t.coeff.len() != m {
                return Err(Error::DimensionMismatch { expected: m, found: t.coeff.len() });
            }
            if t.q0 == 0 || t.k0 == 0 || gcd(t.k0, t.q0) != 1 {
                return Err(Error::InvalidParameter(format!("invalid degree {}/{}", t.k0, t.q0)));
            }
            cover = cover / gcd(cover, t.q0) * t.q0;
        }
        let constant = constant.unwrap_or_else(|| vec![0.0; m]);
        if constant.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: constant.len() });
        }
        Ok(BranchSum { m, cover, terms, constant })
    }

    pub fn terms(&self) -> &[BranchTerm] {
        &self.terms
    }
}

impl QEvaluator for BranchSum {
    fn q(&self) -> usize {
        self.cover
    }
    fn m(&self) -> usize {
        self.m
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let r = x[0].hypot(x[1]);
        let theta = x[1].atan2(x[0]).rem_euclid(TAU);
        let m = self.m;
        for l in 0..self.cover {
            let v = &mut out[l * m..(l + 1) * m];
            v.copy_from_slice(&self.constant);
            if r == 0.0 {
                continue;
            }
            for t in &self.terms {
                let alpha = t.k0 as f64 / t.q0 as f64;
                let w = Complex64::from_polar(r.powf(alpha), alpha * (theta + TAU * l as f64));
                for (vk, ck) in v.iter_mut().zip(&t.coeff) {
                    *vk += (ck * w).re;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aq::AqPoint;
    use crate::cylindrical::CylindricalFunction;

    #[test]
    fn uk_at_origin_has_equal_moduli() {
        let u = ExampleUk::new(3, 8.0).unwrap();
        let v = u.eval(&[0.0, 0.0]).unwrap();
        for w in v.iter() {
            assert!((w[0].hypot(w[1]) - 0.5).abs() < 1e-14);
        }
        assert!(v.separation() > 0.8);
    }

    #[test]
    fn uk_branch_point_collapses_all_values() {
        let u = ExampleUk::new(2, 4.0).unwrap();
        // z^2 = 1/4 at z = 1/2: the radicand vanishes so every root is zero
        assert_eq!(u.eval(&[0.5, 0.0]).unwrap(), AqPoint::zero(2, 2));
        // nearby, all values are small and distinct
        let v = u.eval(&[0.5 + 1e-6, 0.0]).unwrap();
        assert!(v.norm() < 1e-2 && v.separation() > 0.0);
    }

    #[test]
    fn uk_converges_to_rotated_copies() {
        let x = [0.3, -0.4];
        let z = Complex64::new(x[0], x[1]);
        let limit: Vec<Vec<f64>> = (0..3)
            .map(|j| {
                let w = Complex64::from_polar(1.0, TAU * j as f64 / 3.0) * z;
                vec![w.re, w.im]
            })
            .collect();
        let limit = AqPoint::new(&limit).unwrap();
        let mut prev = f64::INFINITY;
        for k in [1e2, 1e4, 1e6, 1e8] {
            let d = ExampleUk::new(3, k).unwrap().eval(&x).unwrap().metric(&limit).unwrap();
            assert!(d < prev);
            prev = d;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn single_term_sum_is_the_cylinder() {
        let c = vec![Complex64::new(1.0, 0.5), Complex64::new(-0.2, 1.0)];
        let s = BranchSum::new(vec![BranchTerm { k0: 1, q0: 2, coeff: c.clone() }], None).unwrap();
        let phi = CylindricalFunction::single(1, 2, c).unwrap();
        for x in [[0.3, 0.2], [-0.5, 0.1], [0.0, -0.7]] {
            assert!(s.eval(&x).unwrap().metric(&phi.eval(&x).unwrap()).unwrap() < 1e-14);
        }
    }

    #[test]
    fn sum_of_half_and_three_halves_shares_branches() {
        let s = BranchSum::new(
            vec![
                BranchTerm { k0: 1, q0: 2, coeff: vec![Complex64::new(1.0, 0.0)] },
                BranchTerm { k0: 3, q0: 2, coeff: vec![Complex64::new(1.0, 0.0)] },
            ],
            None,
        )
        .unwrap();
        assert_eq!(s.q(), 2);
        // on the positive axis: r^{1/2} + r^{3/2} and its negative
        let v = s.eval(&[0.25, 0.0]).unwrap();
        assert!((v.as_flat()[1] - (0.5 + 0.125)).abs() < 1e-15);
        assert!((v.as_flat()[0] + (0.5 + 0.125)).abs() < 1e-15);
    }
}
