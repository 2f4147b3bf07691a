//! Excess decay over dyadic-type scales `rho0 theta^j`.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use super::fit::{fit_tangent, FitOptions, FitTarget};
use super::rescale::rescale;
use crate::cylindrical::{canonical_gauge, CylindricalFunction, CylindricalRecord};
use crate::error::{Error, Result};
use crate::field::QField;

/// Normalized excesses below this are treated as exact.
pub const EXACT_EXCESS: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct DecayOptions {
    pub rho0: f64,
    pub theta: f64,
    /// Largest scale index `J`; scales `j = 0..=J` are used.
    pub scales: usize,
    pub target: FitTarget,
    pub fit: FitOptions,
}

#[derive(Clone, Debug)]
pub struct ScaleRecord {
    pub index: usize,
    pub rho: f64,
    /// `rho^{-n/2} ||u||_{L^2(B_rho)}`.
    pub norm: f64,
    /// Excess of the rescaled field against its fitted tangent.
    pub excess: f64,
    /// `(rho^{-n-2 alpha} int_{B_rho} G(u, phi)^2)^{1/2}` with `phi` the
    /// fitted tangent in original units.
    pub normalized_excess: f64,
    /// Fitted tangent of the rescaled field, gauge normal form.
    pub tangent: CylindricalFunction,
    /// Tangent coefficients in original units, gauge aligned to the
    /// previous scale.
    pub coefficients: Vec<Vec<Complex64>>,
    /// Coefficient distance to the previous scale after alignment.
    pub drift: Option<f64>,
    pub fit_converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DecayFit {
    /// Every normalized excess is numerically zero.
    ExactTangent,
    /// `log E_j = mu log(theta^j) + b` by least squares.
    Fitted { mu: f64, intercept: f64, residual: f64, points: usize },
    /// Fewer than two usable scales.
    Insufficient,
}

#[derive(Clone, Debug)]
pub struct ExcessReport {
    pub center: Vec<f64>,
    pub theta: f64,
    pub alpha: f64,
    pub scales: Vec<ScaleRecord>,
    pub fit: DecayFit,
}

/// Least-squares slope of `log E` against `log t` over points with
/// `E >= EXACT_EXCESS`.
fn fit_exponent(points: &[(f64, f64)]) -> DecayFit {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(_, e)| *e >= EXACT_EXCESS).map(|(t, e)| (t.ln(), e.ln())).collect();
    if pts.is_empty() && !points.is_empty() {
        return DecayFit::ExactTangent;
    }
    if pts.len() < 2 {
        return DecayFit::Insufficient;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let mu = sxy / sxx;
    let intercept = my - mu * mx;
    let residual = pts.iter().map(|p| (p.1 - intercept - mu * p.0).powi(2)).sum::<f64>().sqrt();
    DecayFit::Fitted { mu, intercept, residual, points: pts.len() }
}

pub fn decay_report(u: &QField, center: &[f64], opts: &DecayOptions) -> Result<ExcessReport> {
    if !(opts.theta > 0.0 && opts.theta < 1.0) || !(opts.rho0 > 0.0) {
        return Err(Error::InvalidParameter("need 0 < theta < 1 and rho0 > 0".into()));
    }
    let smallest = opts.theta.powi(opts.scales as i32);
    let floor = 8.0 * u.grid().h() / opts.rho0;
    if smallest < floor * (1.0 - 1e-12) {
        return Err(Error::ResolutionFloor { radius: opts.rho0 * smallest, floor: 8.0 * u.grid().h() });
    }
    u.grid().check_ball(center, opts.rho0)?;
    let mut scales: Vec<ScaleRecord> = Vec::with_capacity(opts.scales + 1);
    let mut alpha = f64::NAN;
    for j in 0..=opts.scales {
        let rho = opts.rho0 * opts.theta.powi(j as i32);
        let r = rescale(u, center, rho, None)?;
        let fit = fit_tangent(&r.field, &opts.target, &opts.fit)?;
        alpha = fit.tangent.alpha();
        let factor = r.norm * rho.powf(-alpha);
        let mut coefficients: Vec<Vec<Complex64>> =
            fit.tangent.coefficient_list().into_iter().map(|c| c.into_iter().map(|z| z * factor).collect()).collect();
        let mut drift = None;
        if let Some(prev) = scales.last() {
            if prev.coefficients.len() == coefficients.len() && prev.tangent.q0() == fit.tangent.q0() {
                let g = canonical_gauge(&prev.coefficients, &coefficients, fit.tangent.q0())?;
                coefficients = g.aligned;
                drift = Some(g.cost.sqrt());
            }
        }
        scales.push(ScaleRecord {
            index: j,
            rho,
            norm: r.norm,
            excess: fit.excess,
            normalized_excess: fit.excess * factor,
            tangent: fit.tangent,
            coefficients,
            drift,
            fit_converged: fit.converged,
        });
    }
    let pts: Vec<(f64, f64)> = scales.iter().map(|s| (s.rho / opts.rho0, s.normalized_excess)).collect();
    Ok(ExcessReport { center: center.to_vec(), theta: opts.theta, alpha, scales, fit: fit_exponent(&pts) })
}

#[derive(Serialize)]
struct ScaleBlock {
    index: usize,
    rho: f64,
    norm: f64,
    excess: f64,
    normalized_excess: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    drift: Option<f64>,
    fit_converged: bool,
    tangent: CylindricalRecord,
}

#[derive(Serialize)]
struct ReportBlock {
    center: Vec<f64>,
    theta: f64,
    alpha: f64,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual: Option<f64>,
}

#[derive(Serialize)]
struct ReportDoc {
    report: ReportBlock,
    scale: Vec<ScaleBlock>,
}

impl ExcessReport {
    pub fn mu(&self) -> Option<f64> {
        match self.fit {
            DecayFit::Fitted { mu, .. } => Some(mu),
            _ => None,
        }
    }

    /// Structured text: a `[report]` table and one `[[scale]]` block per
    /// scale with the fitted tangent embedded as a cylindrical record.
    pub fn to_text(&self) -> String {
        let (status, mu, residual) = match self.fit {
            DecayFit::ExactTangent => ("exact tangent", None, None),
            DecayFit::Insufficient => ("insufficient scales", None, None),
            DecayFit::Fitted { mu, residual, .. } => ("fitted", Some(mu), Some(residual)),
        };
        let doc = ReportDoc {
            report: ReportBlock {
                center: self.center.clone(),
                theta: self.theta,
                alpha: self.alpha,
                status,
                mu,
                residual,
            },
            scale: self
                .scales
                .iter()
                .map(|s| ScaleBlock {
                    index: s.index,
                    rho: s.rho,
                    norm: s.norm,
                    excess: s.excess,
                    normalized_excess: s.normalized_excess,
                    drift: s.drift,
                    fit_converged: s.fit_converged,
                    tangent: CylindricalRecord::from(&s.tangent),
                })
                .collect(),
        };
        toml::to_string(&doc).expect("report serializes")
    }

    /// CSV `scale,excess,mu_running`: the normalized excess per scale and
    /// the exponent fitted over scales `0..=j` (`NaN` until defined).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scale,excess,mu_running\n");
        let pts: Vec<(f64, f64)> = self.scales.iter().map(|s| (self.theta.powi(s.index as i32), s.normalized_excess)).collect();
        for (j, rec) in self.scales.iter().enumerate() {
            let mu = match fit_exponent(&pts[..=j]) {
                DecayFit::Fitted { mu, .. } => mu,
                _ => f64::NAN,
            };
            writeln!(s, "{},{:e},{}", rec.index, rec.normalized_excess, mu).unwrap();
        }
        s
    }
}
