//! Frequency function, Weiss quantity and related radial diagnostics.
//!
//! For a field `u`, center `Y` and radius `rho`:
//! `D = rho^{2-n} int_{B_rho} |Du|^2`, `H = rho^{1-n} int_{dB_rho} |u|^2`,
//! `N = D / H` and `W = rho^{-2 alpha} (D - alpha H)`.

use std::fmt::Write as _;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};
use crate::field::{
    l2_sq_ball, resolution_floor, shell_integral, Ball, EdgeQuadrature, QField, ShellIntegrand, ShellRule,
};

/// Relative floor on `H / sup|u|^2` below which `N` is not reported.
pub const HEIGHT_FLOOR: f64 = 1e-14;
/// Default monotonicity tolerance.
pub const MONOTONE_TOL: f64 = 0.01;

fn ball(center: &[f64], rho: f64) -> Ball {
    Ball::new(center.to_vec(), rho)
}

fn check_radius(u: &QField, rho: f64) -> Result<()> {
    let floor = resolution_floor(u);
    if rho < floor * (1.0 - 1e-12) {
        return Err(Error::ResolutionFloor { radius: rho, floor });
    }
    Ok(())
}

/// `int_{B_rho(Y)} K(R) |Du|^2` for a radial kernel.
fn weighted_energy(u: &QField, center: &[f64], rho: f64, kernel: &dyn Fn(f64) -> f64) -> Result<f64> {
    Ok(EdgeQuadrature::new(u.grid(), &ball(center, rho), kernel)?.energy(u))
}

/// `D = rho^{2-n} int_{B_rho(Y)} |Du|^2`.
pub fn scaled_energy(u: &QField, center: &[f64], rho: f64) -> Result<f64> {
    check_radius(u, rho)?;
    let e = weighted_energy(u, center, rho, &|_| 1.0)?;
    Ok(rho.powi(2 - u.n() as i32) * e)
}

/// `H = rho^{1-n} int_{dB_rho(Y)} |u|^2` by shell quadrature.
pub fn boundary_height(u: &QField, center: &[f64], rho: f64, rule: &ShellRule) -> Result<f64> {
    let s = shell_integral(u, &ball(center, rho), ShellIntegrand::Height, rule)?;
    Ok(rho.powi(1 - u.n() as i32) * s)
}

/// `H` through the volume form
/// `n rho^{-n} int_{B_rho} |u|^2 + rho^{-n} int_{B_rho} (rho^2 - R^2) |Du|^2`,
/// valid for fields satisfying the energy identity on every sub-ball.
pub fn boundary_height_volume(u: &QField, center: &[f64], rho: f64) -> Result<f64> {
    check_radius(u, rho)?;
    let n = u.n() as i32;
    let mass = l2_sq_ball(u, &ball(center, rho))?;
    let weighted = weighted_energy(u, center, rho, &|r| rho * rho - r * r)?;
    Ok(rho.powi(-n) * (n as f64 * mass + weighted))
}

fn checked_height(u: &QField, height: f64) -> Result<f64> {
    let floor = HEIGHT_FLOOR * u.sup_norm().powi(2);
    if !(height > floor) {
        return Err(Error::ZeroBoundaryTrace { height, floor });
    }
    Ok(height)
}

/// `N = D / H`.
pub fn frequency(u: &QField, center: &[f64], rho: f64, rule: &ShellRule) -> Result<f64> {
    let h = checked_height(u, boundary_height(u, center, rho, rule)?)?;
    Ok(scaled_energy(u, center, rho)? / h)
}

/// `W = rho^{-2 alpha} (D - alpha H)`.
pub fn weiss(u: &QField, center: &[f64], rho: f64, alpha: f64, rule: &ShellRule) -> Result<f64> {
    let d = scaled_energy(u, center, rho)?;
    let h = boundary_height(u, center, rho, rule)?;
    Ok(rho.powf(-2.0 * alpha) * (d - alpha * h))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyProfile {
    pub center: Vec<f64>,
    pub alpha: f64,
    pub radii: Vec<f64>,
    pub d: Vec<f64>,
    pub h: Vec<f64>,
    pub n: Vec<f64>,
    pub w: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Frequency,
    Weiss,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub quantity: Quantity,
    /// The pair `(index, index + 1)` of radii.
    pub index: usize,
    pub drop: f64,
}

/// Tabulate `D, H, N, W` over strictly increasing radii.
pub fn profile(u: &QField, center: &[f64], radii: &[f64], alpha: f64, rule: &ShellRule) -> Result<FrequencyProfile> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("radii must be nonempty and strictly increasing".into()));
    }
    let mut p = FrequencyProfile {
        center: center.to_vec(),
        alpha,
        radii: radii.to_vec(),
        d: Vec::with_capacity(radii.len()),
        h: Vec::with_capacity(radii.len()),
        n: Vec::with_capacity(radii.len()),
        w: Vec::with_capacity(radii.len()),
    };
    for &rho in radii {
        let d = scaled_energy(u, center, rho)?;
        let h = checked_height(u, boundary_height(u, center, rho, rule)?)?;
        p.d.push(d);
        p.h.push(h);
        p.n.push(d / h);
        p.w.push(rho.powf(-2.0 * alpha) * (d - alpha * h));
    }
    Ok(p)
}

impl FrequencyProfile {
    /// CSV with columns `rho,D,H,N,W`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rho,D,H,N,W\n");
        for i in 0..self.radii.len() {
            writeln!(s, "{},{},{},{},{}", self.radii[i], self.d[i], self.h[i], self.n[i], self.w[i]).unwrap();
        }
        s
    }

    /// Adjacent pairs where `N` drops by more than `tol`, or `W` drops by
    /// more than `tol * max(1, |W|)`.
    pub fn check_monotone(&self, tol: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        for i in 0..self.radii.len().saturating_sub(1) {
            let dn = self.n[i] - self.n[i + 1];
            if dn > tol {
                out.push(Violation { quantity: Quantity::Frequency, index: i, drop: dn });
            }
            let dw = self.w[i] - self.w[i + 1];
            if dw > tol * self.w[i].abs().max(1.0) {
                out.push(Violation { quantity: Quantity::Weiss, index: i, drop: dw });
            }
        }
        out
    }

    /// Two-sided doubling bound for every pair `sigma < rho` of radii:
    /// `(sigma/rho)^{2 N(rho)} H(rho) <= H(sigma) <= (sigma/rho)^{2 N_0} H(rho)`
    /// with `N_0` the frequency at the smallest radius, each side relaxed
    /// by the relative tolerance `tol`. Returns the offending pairs.
    pub fn check_doubling(&self, tol: f64) -> Vec<(usize, usize)> {
        let n0 = self.n[0];
        let mut bad = Vec::new();
        for j in 1..self.radii.len() {
            for i in 0..j {
                let ratio = self.radii[i] / self.radii[j];
                let upper = ratio.powf(2.0 * n0) * self.h[j];
                let lower = ratio.powf(2.0 * self.n[j]) * self.h[j];
                if self.h[i] > (1.0 + tol) * upper || self.h[i] < (1.0 - tol) * lower {
                    bad.push((i, j));
                }
            }
        }
        bad
    }
}

/// `int_{rho1}^{rho2} int_{dB_R} R^{2-n} |d/dR (u / R^alpha)|^2 dS dR`
/// with Gauss-Legendre nodes in `R`.
pub fn radial_excess_energy(
    u: &QField,
    center: &[f64],
    alpha: f64,
    annulus: (f64, f64),
    rule: &ShellRule,
    radial_nodes: usize,
) -> Result<f64> {
    let (r1, r2) = annulus;
    check_radius(u, r1)?;
    if r2 <= r1 {
        return Err(Error::InvalidParameter("annulus needs rho1 < rho2".into()));
    }
    u.grid().check_ball(center, r2 + u.grid().h())?;
    let nodes = radial_nodes
        .try_into()
        .map_err(|_| Error::InvalidParameter("radial_nodes must be positive".into()))?;
    let gl = GaussLegendre::new(nodes);
    let n = u.n() as i32;
    let mut err = None;
    let v = gl.integrate(r1, r2, |r| {
        match shell_integral(u, &ball(center, r), ShellIntegrand::WeissRadial { alpha }, rule) {
            Ok(s) => r.powi(2 - n) * s,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `|int_{B} |Du|^2 - int_{dB} u . D_R u| / int_{B} |Du|^2`.
pub fn energy_identity_residual(u: &QField, center: &[f64], rho: f64, rule: &ShellRule) -> Result<f64> {
    let e = weighted_energy(u, center, rho, &|_| 1.0)?;
    let s = shell_integral(u, &ball(center, rho), ShellIntegrand::ValueRadial, rule)?;
    Ok((e - s).abs() / e)
}

/// Relative mismatch between a centered difference (step `delta`) of
/// `rho^{2-n} int_{B_rho} |Du|^2` and `2 rho^{2-n} int_{dB_rho} |D_R u|^2`.
pub fn energy_derivative_residual(
    u: &QField,
    center: &[f64],
    rho: f64,
    delta: f64,
    rule: &ShellRule,
) -> Result<f64> {
    let fd = (scaled_energy(u, center, rho + delta)? - scaled_energy(u, center, rho - delta)?) / (2.0 * delta);
    let s = shell_integral(u, &ball(center, rho), ShellIntegrand::RadialEnergy, rule)?;
    let exact = 2.0 * rho.powi(2 - u.n() as i32) * s;
    Ok((fd - exact).abs() / exact.abs())
}
