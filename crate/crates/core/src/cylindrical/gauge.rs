//! Relabeling freedom of cylindrical coefficients: component permutations
//! and multiplication by q0-th roots of unity.

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::function::{Component, CylindricalFunction};
use crate::error::{Error, Result};

/// Largest number of coefficients and largest q0 for the exhaustive search.
pub const GAUGE_LIMIT: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct GaugeAlignment {
    /// `sigma[j]` is the index of the `b` coefficient placed at slot `j`.
    pub sigma: Vec<usize>,
    /// Phase index `l_j` applied to that coefficient.
    pub phases: Vec<usize>,
    /// `e^{i 2 pi l_j / q0} b_{sigma(j)}`.
    pub aligned: Vec<Vec<Complex64>>,
    /// `sum_j |a_j - aligned_j|^2`.
    pub cost: f64,
}

/// `e^{i 2 pi l / q0}`, exact at quarter turns.
fn root(l: usize, q0: usize) -> Complex64 {
    let l = l % q0;
    match (4 * l) / q0 {
        _ if l == 0 => Complex64::new(1.0, 0.0),
        1 if 4 * l == q0 => Complex64::new(0.0, 1.0),
        2 if 2 * l == q0 => Complex64::new(-1.0, 0.0),
        3 if 4 * l == 3 * q0 => Complex64::new(0.0, -1.0),
        _ => Complex64::from_polar(1.0, TAU * l as f64 / q0 as f64),
    }
}

fn dist_sq(a: &[Complex64], b: &[Complex64], w: Complex64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - w * y).norm_sqr()).sum()
}

/// Relabel `b` to be as close as possible to `a`.
pub fn canonical_gauge(a: &[Vec<Complex64>], b: &[Vec<Complex64>], q0: usize) -> Result<GaugeAlignment> {
    let n = a.len();
    if b.len() != n {
        return Err(Error::ShapeMismatch(format!("{} vs {} coefficients", n, b.len())));
    }
    if n > GAUGE_LIMIT || q0 > GAUGE_LIMIT || q0 == 0 {
        return Err(Error::GaugeBoundExceeded { components: n, q0 });
    }
    // best phase for each (slot, candidate) pair; ties keep the smallest l
    let mut best_l = vec![0usize; n * n];
    let mut cost = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            let mut bc = f64::INFINITY;
            for l in 0..q0 {
                let d = dist_sq(&a[j], &b[k], root(l, q0));
                if d < bc {
                    bc = d;
                    best_l[j * n + k] = l;
                }
            }
            cost[j * n + k] = bc;
        }
    }
    let mut sigma = vec![0usize; n];
    let total = crate::aq::assignment::exhaustive_into(&cost, n, &mut sigma);
    let phases: Vec<usize> = (0..n).map(|j| best_l[j * n + sigma[j]]).collect();
    let aligned = (0..n)
        .map(|j| b[sigma[j]].iter().map(|z| root(phases[j], q0) * z).collect())
        .collect();
    Ok(GaugeAlignment { sigma, phases, aligned, cost: total })
}

/// Representative of a coefficient under the phase action: the first
/// coordinate of non-negligible size gets argument in `[0, 2 pi / q0)`.
pub fn phase_normal(c: &[Complex64], q0: usize) -> Vec<Complex64> {
    let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let Some(lead) = c.iter().find(|z| z.norm() > 1e-12 * scale) else {
        return c.to_vec();
    };
    let sector = TAU / q0 as f64;
    let arg = lead.arg().rem_euclid(TAU);
    let k = (arg / sector).floor() as usize % q0;
    if k == 0 {
        return c.to_vec();
    }
    let w = root(q0 - k, q0);
    c.iter().map(|z| w * z).collect()
}

fn lex_key(c: &[Complex64]) -> Vec<f64> {
    c.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// Gauge normal form: phase-normalized components, nonzero ones sorted
/// lexicographically, the zero component last.
pub fn normal_form(phi: &CylindricalFunction) -> CylindricalFunction {
    let q0 = phi.q0();
    let mut nonzero: Vec<Component> = phi
        .components()
        .iter()
        .filter_map(|c| c.coeff.as_ref().map(|v| Component::new(phase_normal(v, q0), c.multiplicity)))
        .collect();
    nonzero.sort_by(|a, b| {
        let ka = lex_key(a.coeff.as_ref().unwrap());
        let kb = lex_key(b.coeff.as_ref().unwrap());
        ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
    });
    nonzero.extend(phi.components().iter().filter(|c| c.is_zero()).cloned());
    let out = CylindricalFunction::new(phi.q(), phi.m(), phi.k0(), q0, nonzero).expect("same structure");
    match phi.rotation() {
        Some(r) => out.with_rotation(r.clone()),
        None => out,
    }
}
