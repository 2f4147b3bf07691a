//! Axis tilt from sheet offsets over a cylindrical function `phi0`.
//!
//! If the offsets are `D_x phi0 . lambda` for a vector `lambda` in the
//! plane, the first Fourier moments against `D_iota phi0` return
//! `c lambda^iota` with `c = sum_j alpha^2 m_j |c_j|^2`. Fitting
//! `lambda(z) = A z` over axis slices gives the tilt `A`.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;

use crate::aq::match_tuples_into;
use crate::cylindrical::CylindricalFunction;
use crate::error::{Error, Result};
use crate::field::{interpolate_into, QField};

/// Offsets `u - phi0` per slot of `phi0` at a point.
pub trait OffsetSource: Sync {
    fn offsets(&self, x: &[f64], out: &mut [f64]) -> Result<()>;
}

/// Offsets given by a closure.
pub struct FnOffsets<F>(pub F);

impl<F> OffsetSource for FnOffsets<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()> + Sync,
{
    fn offsets(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.0)(x, out)
    }
}

/// Offsets of a sampled field: matched interpolation at the point, then
/// optimal assignment to the slots of `phi0`.
pub struct FieldOffsets<'a> {
    pub field: &'a QField,
    pub phi0: &'a CylindricalFunction,
}

impl OffsetSource for FieldOffsets<'_> {
    fn offsets(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let (q, m) = (self.phi0.q(), self.phi0.m());
        let mut v = vec![0.0; q * m];
        interpolate_into(self.field, x, &mut v);
        let (r, t) = self.phi0.polar(x);
        let mut b = vec![0.0; q * m];
        self.phi0.eval_polar_into(r, t, &mut b);
        let mut perm = vec![0usize; q];
        match_tuples_into(&b, &v, m, &mut perm);
        for s in 0..q {
            for k in 0..m {
                out[s * m + k] = v[perm[s] * m + k] - b[s * m + k];
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TiltOptions {
    /// Radii averaged over.
    pub window: (f64, f64),
    /// Midpoint samples in the radial window.
    pub radial_samples: usize,
    /// Uniform angles per circle.
    pub angular_samples: usize,
}

impl Default for TiltOptions {
    fn default() -> Self {
        TiltOptions { window: (0.3, 0.7), radial_samples: 8, angular_samples: 256 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TiltFit {
    pub slices: Vec<Vec<f64>>,
    /// In-plane displacement per slice.
    pub lambdas: Vec<[f64; 2]>,
    /// Row-major `2 x (n - 2)` least-squares fit of `lambda(z) = A z`;
    /// empty for `n = 2`.
    pub a: Vec<f64>,
    /// `sum_j alpha^2 m_j |c_j|^2`.
    pub normalization: f64,
}

/// `lambda` on each axis slice `z` (length `n - 2`; for `n = 2` pass one
/// empty slice) and the linear fit through the origin.
pub fn fourier_tilt(
    source: &dyn OffsetSource,
    phi0: &CylindricalFunction,
    n: usize,
    slices: &[Vec<f64>],
    opts: &TiltOptions,
) -> Result<TiltFit> {
    if phi0.rotation().is_some() {
        return Err(Error::InvalidParameter("the reference cylinder must be axis aligned".into()));
    }
    if !(2..=3).contains(&n) || slices.is_empty() || slices.iter().any(|z| z.len() != n - 2) {
        return Err(Error::InvalidParameter("slices must be nonempty points of the axis".into()));
    }
    let (lo, hi) = opts.window;
    if !(0.0 < lo && lo < hi) || opts.radial_samples == 0 || opts.angular_samples == 0 {
        return Err(Error::InvalidParameter("bad tilt window or sample counts".into()));
    }
    let (q, m, q0) = (phi0.q(), phi0.m(), phi0.q0());
    let alpha = phi0.alpha();
    let slots = phi0.slots();
    let coeffs: Vec<_> = phi0.components().iter().map(|c| c.coeff.clone()).collect();
    let normalization: f64 = phi0
        .components()
        .iter()
        .filter_map(|c| c.coeff.as_ref().map(|v| c.multiplicity as f64 * v.iter().map(|z| z.norm_sqr()).sum::<f64>()))
        .sum::<f64>()
        * alpha
        * alpha;
    if !(normalization > 0.0) {
        return Err(Error::NoTiltSignal);
    }
    let na = opts.angular_samples;
    // unit-circle branch gradients do not depend on the slice
    let mut dphi = vec![0.0; na * q * m * 2];
    for k in 0..na {
        let t = TAU * k as f64 / na as f64;
        for (s, sl) in slots.iter().enumerate() {
            let (Some(l), Some(c)) = (sl.branch, &coeffs[sl.component]) else { continue };
            let (d1, d2) = phi0.branch_gradient(c, l, 1.0, t);
            for kk in 0..m {
                dphi[((k * q + s) * m + kk) * 2] = d1[kk];
                dphi[((k * q + s) * m + kk) * 2 + 1] = d2[kk];
            }
        }
    }
    let dr = (hi - lo) / opts.radial_samples as f64;
    let mut lambdas = Vec::with_capacity(slices.len());
    let mut x = vec![0.0; n];
    let mut off = vec![0.0; q * m];
    for z in slices {
        x[2..].copy_from_slice(z);
        let mut w = [0.0f64; 2];
        for ir in 0..opts.radial_samples {
            let r = lo + (ir as f64 + 0.5) * dr;
            let rs = r.powf(1.0 - alpha);
            for k in 0..na {
                let t = TAU * k as f64 / na as f64;
                x[0] = r * t.cos();
                x[1] = r * t.sin();
                source.offsets(&x, &mut off)?;
                for (s, sl) in slots.iter().enumerate() {
                    if sl.branch.is_none() {
                        continue;
                    }
                    for kk in 0..m {
                        let o = rs * off[s * m + kk];
                        w[0] += o * dphi[((k * q + s) * m + kk) * 2];
                        w[1] += o * dphi[((k * q + s) * m + kk) * 2 + 1];
                    }
                }
            }
        }
        // (1 / (pi q0)) times the angular integral, averaged over radii
        let scale = (TAU / na as f64) / (PI * q0 as f64) / opts.radial_samples as f64;
        lambdas.push([w[0] * scale / normalization, w[1] * scale / normalization]);
    }
    let a = if n == 2 {
        Vec::new()
    } else {
        let d = n - 2;
        let zt = DMatrix::from_fn(slices.len(), d, |i, k| slices[i][k]);
        let lam = DMatrix::from_fn(slices.len(), 2, |i, k| lambdas[i][k]);
        let normal = zt.transpose() * &zt;
        let rhs = zt.transpose() * lam;
        let sol = normal
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidParameter("slices do not span the axis".into()))?;
        // sol is (n-2) x 2, i.e. A transposed
        (0..2).flat_map(|i| (0..d).map(move |k| (i, k))).map(|(i, k)| sol[(k, i)]).collect()
    };
    Ok(TiltFit { slices: slices.to_vec(), lambdas, a, normalization })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylindrical::Component;
    use crate::field::{sample_field, Grid};
    use num_complex::Complex64;

    fn phi0() -> CylindricalFunction {
        CylindricalFunction::new(
            3,
            3,
            1,
            2,
            vec![
                Component::new(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.2, 0.1)], 1),
                Component::zero(1),
            ],
        )
        .unwrap()
    }

    /// Offsets `D_x phi0 . lambda(z)` written slot by slot.
    fn tilted<'a>(phi: &'a CylindricalFunction, lambda: impl Fn(&[f64]) -> [f64; 2] + Sync + 'a) -> impl OffsetSource + 'a {
        FnOffsets(move |x: &[f64], out: &mut [f64]| {
            let m = phi.m();
            let lam = lambda(&x[2..]);
            let (r, t) = phi.polar(x);
            out.fill(0.0);
            for (s, sl) in phi.slots().iter().enumerate() {
                let (Some(l), Some(c)) = (sl.branch, &phi.components()[sl.component].coeff) else { continue };
                let (d1, d2) = phi.branch_gradient(c, l, r, t);
                for k in 0..m {
                    out[s * m + k] = d1[k] * lam[0] + d2[k] * lam[1];
                }
            }
            Ok(())
        })
    }

    #[test]
    fn constant_shift_is_returned_on_every_slice() {
        let phi = phi0();
        let src = tilted(&phi, |_| [0.03, -0.02]);
        let slices: Vec<Vec<f64>> = [-0.5, 0.0, 0.25].iter().map(|z| vec![*z]).collect();
        let fit = fourier_tilt(&src, &phi, 3, &slices, &TiltOptions::default()).unwrap();
        for l in &fit.lambdas {
            assert!((l[0] - 0.03).abs() < 1e-12 && (l[1] + 0.02).abs() < 1e-12, "{l:?}");
        }
    }

    #[test]
    fn linear_tilt_is_recovered() {
        let phi = phi0();
        let a0 = [0.04, -0.07];
        let src = tilted(&phi, |z| [a0[0] * z[0], a0[1] * z[0]]);
        let slices: Vec<Vec<f64>> = (0..9).map(|k| vec![-0.8 + 0.2 * k as f64]).collect();
        let fit = fourier_tilt(&src, &phi, 3, &slices, &TiltOptions::default()).unwrap();
        assert!((fit.a[0] - a0[0]).abs() < 1e-12 && (fit.a[1] - a0[1]).abs() < 1e-12, "{:?}", fit.a);
    }

    #[test]
    fn no_offsets_no_tilt() {
        let phi = phi0();
        let src = FnOffsets(|_: &[f64], out: &mut [f64]| {
            out.fill(0.0);
            Ok(())
        });
        let fit = fourier_tilt(&src, &phi, 3, &[vec![0.3], vec![-0.4]], &TiltOptions::default()).unwrap();
        assert!(fit.lambdas.iter().all(|l| l == &[0.0, 0.0]));
        assert_eq!(fit.a, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_cylinder_has_no_signal() {
        let phi = CylindricalFunction::new(2, 1, 1, 2, vec![Component::new(vec![Complex64::new(0.0, 0.0)], 1)]).unwrap();
        let src = FnOffsets(|_: &[f64], out: &mut [f64]| {
            out.fill(0.0);
            Ok(())
        });
        assert!(matches!(fourier_tilt(&src, &phi, 2, &[vec![]], &TiltOptions::default()), Err(Error::NoTiltSignal)));
    }

    #[test]
    fn sampled_field_gives_planar_shift() {
        // phi0(X - lambda) = phi0 - D phi0 . lambda + O(|lambda|^2)
        let phi = CylindricalFunction::single(1, 2, vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]).unwrap();
        let lam = [0.01, 0.005];
        let shifted = crate::eval::FnEvaluator::new(2, 2, |x: &[f64], out: &mut [f64]| {
            let y = [x[0] - lam[0], x[1] - lam[1]];
            crate::eval::QEvaluator::eval_into(&phi, &y, out)
        });
        let u = sample_field(&shifted, &Grid::cube(2, 1.0, 256).unwrap()).unwrap();
        let src = FieldOffsets { field: &u, phi0: &phi };
        let fit = fourier_tilt(&src, &phi, 2, &[vec![]], &TiltOptions::default()).unwrap();
        let got = fit.lambdas[0];
        assert!((got[0] + lam[0]).abs() < 1e-3 && (got[1] + lam[1]).abs() < 1e-3, "{got:?}");
    }
}
