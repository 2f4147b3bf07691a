//! Surface integrals over spheres sampled along rays.

use std::f64::consts::{PI, TAU};

use super::interp::interpolate_into;
use super::quadrature::Ball;
use super::qfield::QField;
use crate::aq::match_tuples_into;
use crate::error::{Error, Result};
use crate::reduce::det_sum;

/// Default number of circle samples for planar fields.
pub const DEFAULT_SHELL_SAMPLES_2D: usize = 720;
/// Default number of Fibonacci points on spheres.
pub const DEFAULT_SHELL_SAMPLES_3D: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShellIntegrand {
    /// `|u|^2`
    Height,
    /// `|D_R u|^2`
    RadialEnergy,
    /// `u . D_R u`
    ValueRadial,
    /// `|d/dR (u / R^alpha)|^2`
    WeissRadial { alpha: f64 },
}

impl ShellIntegrand {
    fn needs_derivative(self) -> bool {
        !matches!(self, ShellIntegrand::Height)
    }
}

/// Unit directions with equal weights summing to the sphere area.
#[derive(Clone, Debug, PartialEq)]
pub struct ShellRule {
    n: usize,
    directions: Vec<f64>,
    weight: f64,
}

impl ShellRule {
    /// `samples` uniform angles (n = 2) or a Fibonacci sphere (n = 3).
    pub fn new(n: usize, samples: usize) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidParameter("need at least one shell sample".into()));
        }
        let mut directions = Vec::with_capacity(n * samples);
        let weight = match n {
            2 => {
                for k in 0..samples {
                    let t = TAU * k as f64 / samples as f64;
                    directions.extend([t.cos(), t.sin()]);
                }
                TAU / samples as f64
            }
            3 => {
                let golden = PI * (3.0 - 5f64.sqrt());
                for k in 0..samples {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / samples as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    directions.extend([r * t.cos(), r * t.sin(), z]);
                }
                4.0 * PI / samples as f64
            }
            _ => return Err(Error::InvalidParameter(format!("shell rules exist for n = 2, 3 (got {n})"))),
        };
        Ok(ShellRule { n, directions, weight })
    }

    pub fn default_for(n: usize) -> Result<Self> {
        ShellRule::new(n, if n == 2 { DEFAULT_SHELL_SAMPLES_2D } else { DEFAULT_SHELL_SAMPLES_3D })
    }

    pub fn len(&self) -> usize {
        self.directions.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn direction(&self, k: usize) -> &[f64] {
        &self.directions[k * self.n..(k + 1) * self.n]
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

/// Values of `u` at `Y + radius * dir` and, if requested, radial
/// derivatives by centered differences at spacing `h`, with the inner and
/// outer tuples matched to the middle one.
pub(crate) fn ray_sample(
    u: &QField,
    center: &[f64],
    dir: &[f64],
    radius: f64,
    with_derivative: bool,
    value: &mut [f64],
    deriv: &mut [f64],
) {
    let n = u.n();
    let h = u.grid().h();
    let mut x = [0.0; 3];
    let at = |r: f64, x: &mut [f64; 3], out: &mut [f64]| {
        for k in 0..n {
            x[k] = center[k] + r * dir[k];
        }
        interpolate_into(u, &x[..n], out);
    };
    at(radius, &mut x, value);
    if !with_derivative {
        return;
    }
    let (q, m) = (u.q(), u.m());
    let mut inner = vec![0.0; q * m];
    let mut outer = vec![0.0; q * m];
    at(radius - h, &mut x, &mut inner);
    at(radius + h, &mut x, &mut outer);
    let mut pi = vec![0; q];
    let mut po = vec![0; q];
    match_tuples_into(value, &inner, m, &mut pi);
    match_tuples_into(value, &outer, m, &mut po);
    for i in 0..q {
        for k in 0..m {
            deriv[i * m + k] = (outer[po[i] * m + k] - inner[pi[i] * m + k]) / (2.0 * h);
        }
    }
}

fn integrand_value(kind: ShellIntegrand, radius: f64, value: &[f64], deriv: &[f64]) -> f64 {
    match kind {
        ShellIntegrand::Height => value.iter().map(|v| v * v).sum(),
        ShellIntegrand::RadialEnergy => deriv.iter().map(|d| d * d).sum(),
        ShellIntegrand::ValueRadial => value.iter().zip(deriv).map(|(v, d)| v * d).sum(),
        ShellIntegrand::WeissRadial { alpha } => {
            let s = radius.powf(-alpha);
            value
                .iter()
                .zip(deriv)
                .map(|(v, d)| {
                    let w = s * (d - alpha * v / radius);
                    w * w
                })
                .sum()
        }
    }
}

/// Smallest radius for which shell integrals are computed.
pub fn resolution_floor(u: &QField) -> f64 {
    2.0 * u.grid().h()
}

/// `int_{dB_rho(Y)} f dS` for the selected integrand.
pub fn shell_integral(u: &QField, ball: &Ball, kind: ShellIntegrand, rule: &ShellRule) -> Result<f64> {
    let floor = resolution_floor(u);
    if ball.radius < floor * (1.0 - 1e-12) {
        return Err(Error::ResolutionFloor { radius: ball.radius, floor });
    }
    if rule.n != u.n() {
        return Err(Error::DimensionMismatch { expected: u.n(), found: rule.n });
    }
    let reach = if kind.needs_derivative() { ball.radius + u.grid().h() } else { ball.radius };
    u.grid().check_ball(&ball.center, reach)?;
    let len = u.stride();
    let with_d = kind.needs_derivative();
    let sum = det_sum(rule.len(), |k| {
        let mut value = vec![0.0; len];
        let mut deriv = vec![0.0; len];
        ray_sample(u, &ball.center, rule.direction(k), ball.radius, with_d, &mut value, &mut deriv);
        integrand_value(kind, ball.radius, &value, &deriv)
    });
    Ok(sum * rule.weight * ball.radius.powi(u.n() as i32 - 1))
}
