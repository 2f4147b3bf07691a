//! Inner-variation diagnostics for the half-power branch `Re(c z^{1/2})`.
//!
//! `Re(c z^{1/2})` is stationary for domain variations iff `gamma = c . c`
//! vanishes. For a field `zeta` the first variation
//! `d/dt int |D(w o (X + t zeta))|^2` at `t = 0` equals
//! `int 2 D_i w . D_j w D_i zeta^j - |Dw|^2 div zeta`, and its limit on
//! `B_1 minus B_eps` is `-(pi/2)(Re gamma zeta^1(0) - Im gamma zeta^2(0))`.

use std::f64::consts::{FRAC_PI_2, TAU};

use gauss_quad::GaussLegendre;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::testfield::VectorField;

/// Unconjugated square `sum_k c_k^2`.
pub fn isotropy_defect(c: &[Complex64]) -> Complex64 {
    c.iter().map(|z| z * z).sum()
}

/// Closed-form limit of the first variation.
pub fn inner_variation_closed(c: &[Complex64], zeta0: [f64; 2]) -> f64 {
    let g = isotropy_defect(c);
    -FRAC_PI_2 * (g.re * zeta0[0] - g.im * zeta0[1])
}

#[derive(Clone, Debug, PartialEq)]
pub struct InnerVariationOptions {
    /// Gauss-Legendre nodes in the radial direction.
    pub radial_nodes: usize,
    /// Uniform trapezoid nodes in angle.
    pub angular_nodes: usize,
    /// Assumed order `p` in `I(eps) = L + a eps^p`. The angular average
    /// cancels the linear term, so the default is 2.
    pub order: f64,
    /// Largest admissible spread between extrapolation stages.
    pub tolerance: f64,
}

impl Default for InnerVariationOptions {
    fn default() -> Self {
        InnerVariationOptions { radial_nodes: 48, angular_nodes: 256, order: 2.0, tolerance: 0.05 * FRAC_PI_2 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InnerVariationEstimate {
    /// Extrapolated value at `eps = 0`.
    pub value: f64,
    /// `(eps, integral over B_1 minus B_eps)` for each cutoff.
    pub partials: Vec<(f64, f64)>,
    /// Disagreement between the last two extrapolation stages.
    pub spread: f64,
}

/// First-variation integrand of `Re(c z^{1/2})` at `x` (principal branch).
fn integrand(c: &[Complex64], field: &dyn VectorField, x: [f64; 2]) -> f64 {
    let z = Complex64::new(x[0], x[1]);
    let dz = 0.5 / z.sqrt();
    let mut t11 = 0.0;
    let mut t22 = 0.0;
    let mut t12 = 0.0;
    for ck in c {
        let g = ck * dz;
        let (d1, d2) = (g.re, -g.im);
        t11 += d1 * d1;
        t22 += d2 * d2;
        t12 += d1 * d2;
    }
    let mut j = [0.0; 4];
    field.jacobian(&x, &mut j);
    let div = j[0] + j[3];
    2.0 * (t11 * j[0] + t12 * (j[1] + j[2]) + t22 * j[3]) - (t11 + t22) * div
}

fn annulus_integral(c: &[Complex64], field: &dyn VectorField, eps: f64, opts: &InnerVariationOptions) -> Result<f64> {
    let radial = opts
        .radial_nodes
        .try_into()
        .map_err(|_| Error::InvalidParameter("radial_nodes must be positive".into()))?;
    if opts.angular_nodes == 0 {
        return Err(Error::InvalidParameter("angular_nodes must be positive".into()));
    }
    let (center, radius) = field.support();
    let outer = (center.iter().map(|v| v * v).sum::<f64>().sqrt() + radius).min(1.0);
    if eps >= outer {
        return Ok(0.0);
    }
    let gl = GaussLegendre::new(radial);
    let nt = opts.angular_nodes;
    Ok(gl.integrate(eps, outer, |r| {
        let mut s = 0.0;
        for k in 0..nt {
            // half-step offset keeps samples off the principal branch cut
            let t = TAU * (k as f64 + 0.5) / nt as f64;
            s += integrand(c, field, [r * t.cos(), r * t.sin()]);
        }
        s * r * TAU / nt as f64
    }))
}

/// Quadrature of the first variation on `B_1 minus B_eps` for each cutoff,
/// extrapolated to `eps = 0` from the two smallest cutoffs.
pub fn inner_variation_numeric(
    c: &[Complex64],
    field: &dyn VectorField,
    eps: &[f64],
    opts: &InnerVariationOptions,
) -> Result<InnerVariationEstimate> {
    if field.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: field.dim() });
    }
    if eps.len() < 2 || eps.windows(2).any(|w| w[1] >= w[0]) || eps.iter().any(|&e| e <= 0.0) {
        return Err(Error::InvalidParameter("cutoffs must be positive and strictly decreasing (at least two)".into()));
    }
    let partials: Vec<(f64, f64)> = eps
        .iter()
        .map(|&e| annulus_integral(c, field, e, opts).map(|v| (e, v)))
        .collect::<Result<_>>()?;
    let extrapolate = |(e1, i1): (f64, f64), (e2, i2): (f64, f64)| {
        let (a, b) = (e1.powf(opts.order), e2.powf(opts.order));
        (a * i2 - b * i1) / (a - b)
    };
    let k = partials.len();
    let value = extrapolate(partials[k - 2], partials[k - 1]);
    let spread = if k >= 3 {
        (value - extrapolate(partials[k - 3], partials[k - 2])).abs()
    } else {
        (partials[k - 1].1 - partials[k - 2].1).abs()
    };
    if spread > opts.tolerance {
        return Err(Error::NonConvergent { spread, tolerance: opts.tolerance });
    }
    Ok(InnerVariationEstimate { value, partials, spread })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfield::BumpField;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn defect_examples() {
        assert_eq!(isotropy_defect(&[c(1.0, 0.0), c(0.0, 1.0)]), c(0.0, 0.0));
        assert_eq!(isotropy_defect(&[c(1.0, 0.0), c(0.0, 0.0)]), c(1.0, 0.0));
        // a + ib with |a| = |b| and a . b = 0
        let v = [c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)];
        let w: Vec<Complex64> = v.iter().map(|z| z * Complex64::from_polar(1.0, 0.4)).collect();
        assert!(isotropy_defect(&w).norm() < 1e-15);
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(inner_variation_closed(&[c(1.0, 0.0), c(0.0, 1.0)], [0.3, -2.0]), 0.0);
        assert!((inner_variation_closed(&[c(1.0, 0.0), c(0.0, 0.0)], [1.0, 0.0]) + FRAC_PI_2).abs() < 1e-15);
        assert_eq!(inner_variation_closed(&[c(1.0, 0.0), c(0.0, 0.0)], [0.0, 1.0]), 0.0);
    }

    fn numeric(coeff: &[Complex64], zeta0: [f64; 2], opts: &InnerVariationOptions) -> f64 {
        let f = BumpField::new(vec![0.0, 0.0], 0.5, zeta0.to_vec());
        inner_variation_numeric(coeff, &f, &[1e-2, 5e-3], opts).unwrap().value
    }

    #[test]
    fn numeric_matches_closed_form() {
        let opts = InnerVariationOptions::default();
        for coeff in [vec![c(1.0, 0.0), c(0.0, 1.0)], vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(2.0, 0.0), c(0.0, 1.0)]] {
            for zeta0 in [[1.0, 0.0], [0.0, 1.0], [0.6, -0.8]] {
                let want = inner_variation_closed(&coeff, zeta0);
                let got = numeric(&coeff, zeta0, &opts);
                assert!((got - want).abs() < 1e-3, "{coeff:?} {zeta0:?}: {got} vs {want}");
            }
        }
        // complex gamma exercises the second coordinate
        let coeff = vec![c(1.0, 1.0), c(0.5, 0.0)];
        let want = inner_variation_closed(&coeff, [0.0, 1.0]);
        assert!(want.abs() > 0.5);
        assert!((numeric(&coeff, [0.0, 1.0], &opts) - want).abs() < 1e-3);
    }

    #[test]
    fn refinement_shrinks_error() {
        let coeff = [c(1.0, 0.0), c(0.0, 0.0)];
        let want = inner_variation_closed(&coeff, [1.0, 0.0]);
        let errs: Vec<f64> = [(1, 2), (2, 4), (4, 8)]
            .iter()
            .map(|&(r, a)| {
                let opts = InnerVariationOptions { radial_nodes: r, angular_nodes: a, tolerance: f64::INFINITY, ..Default::default() };
                (numeric(&coeff, [1.0, 0.0], &opts) - want).abs()
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn rejects_bad_cutoffs() {
        let f = BumpField::new(vec![0.0, 0.0], 0.5, vec![1.0, 0.0]);
        let coeff = [c(1.0, 0.0)];
        let opts = InnerVariationOptions::default();
        assert!(inner_variation_numeric(&coeff, &f, &[1e-2], &opts).is_err());
        assert!(inner_variation_numeric(&coeff, &f, &[1e-2, 2e-2], &opts).is_err());
    }
}
