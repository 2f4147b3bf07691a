use crate::cylindrical::CylindricalFunction;
use crate::error::{Error, Result};
use crate::field::{dist_sq_ball, interpolate_into, l2_sq_ball, sample_field, Ball, Grid, NodeQuadrature, QField};

/// Rescaled field `u(Y + rho X) / norm` on `[-1, 1]^n`, where
/// `norm = rho^{-n/2} ||u||_{L^2(B_rho(Y))}`.
#[derive(Clone, Debug)]
pub struct Rescaled {
    pub field: QField,
    pub norm: f64,
}

/// Cells per side such that rescaled nodes land on source nodes when
/// `2 rho / h` is an integer.
fn default_cells(u: &QField, rho: f64) -> usize {
    ((2.0 * rho / u.grid().h()).round() as usize).max(2)
}

/// Rescale about `center` at radius `rho` onto a `[-1, 1]^n` grid with
/// `cells` cells per side (default `2 rho / h`). Rescaled nodes that hit a
/// source node copy it; others use matched interpolation, with points
/// outside the source box clamped to it.
pub fn rescale(u: &QField, center: &[f64], rho: f64, cells: Option<usize>) -> Result<Rescaled> {
    let n = u.n();
    if center.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: center.len() });
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter("rho must be positive".into()));
    }
    let mass = l2_sq_ball(u, &Ball::new(center.to_vec(), rho))?;
    let norm = rho.powf(-(n as f64) / 2.0) * mass.sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::ZeroNorm);
    }
    let out_grid = Grid::cube(n, 1.0, cells.unwrap_or_else(|| default_cells(u, rho)))?;
    let src = u.grid();
    let (lo, hi) = (src.origin().to_vec(), src.upper());
    let h = src.h();
    let len = u.stride();
    let mut data = vec![0.0; out_grid.len() * len];
    use rayon::prelude::*;
    data.par_chunks_mut(len).enumerate().for_each(|(node, out)| {
        let mut x = [0.0; 3];
        out_grid.coords(node, &mut x[..n]);
        let mut y = [0.0; 3];
        let mut idx = [0usize; 3];
        let mut on_node = true;
        for k in 0..n {
            y[k] = (center[k] + rho * x[k]).clamp(lo[k], hi[k]);
            let t = (y[k] - lo[k]) / h;
            let r = t.round();
            on_node &= (t - r).abs() < 1e-9;
            idx[k] = r as usize;
        }
        if on_node {
            out.copy_from_slice(u.value(src.index(&idx[..n])));
        } else {
            interpolate_into(u, &y[..n], out);
        }
        out.iter_mut().for_each(|v| *v /= norm);
    });
    Ok(Rescaled { field: QField::from_data(out_grid, u.q(), u.m(), data)?, norm })
}

fn check_shape(u: &QField, phi: &CylindricalFunction) -> Result<()> {
    if u.q() != phi.q() || u.m() != phi.m() {
        return Err(Error::ShapeMismatch(format!(
            "field has (q, m) = ({}, {}), cylinder ({}, {})",
            u.q(),
            u.m(),
            phi.q(),
            phi.m()
        )));
    }
    Ok(())
}

/// `sqrt(int_{B} G(u, phi)^2)` with `phi` sampled on the grid of `u`.
pub fn excess_in_ball(u: &QField, phi: &CylindricalFunction, ball: &Ball) -> Result<f64> {
    check_shape(u, phi)?;
    let sampled = sample_field(phi, u.grid())?;
    Ok(dist_sq_ball(u, &sampled, ball)?.sqrt())
}

/// `sqrt(int_{B_1(0)} G(u, phi)^2)`.
pub fn excess(u: &QField, phi: &CylindricalFunction) -> Result<f64> {
    excess_in_ball(u, phi, &Ball::origin(u.n(), 1.0))
}

/// `int_{B_1(0) minus B_delta(0)} R^{-n - 2 alpha + sigma} G(u, phi)^2` with
/// `alpha` the degree of `phi`.
pub fn weighted_excess(u: &QField, phi: &CylindricalFunction, sigma: f64, delta: f64) -> Result<f64> {
    check_shape(u, phi)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("cutoff must be positive".into()));
    }
    let n = u.n() as f64;
    let p = -n - 2.0 * phi.alpha() + sigma;
    let kernel = move |r: f64| if r < delta { 0.0 } else { r.powf(p) };
    let quad = NodeQuadrature::new(u.grid(), &Ball::origin(u.n(), 1.0), &kernel)?;
    let sampled = sample_field(phi, u.grid())?;
    Ok(quad.apply(|node| crate::aq::match_cost(u.value(node), sampled.value(node), u.m())))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nonconcentration {
    /// `int_{B_{1/2}} G(u, phi)^2 / r_delta^{2/q - sigma}`, `r_delta = max(r, delta)`
    /// with `r` the distance to the axis of `phi`.
    pub weighted: f64,
    /// `int_{B_1} G(u, phi)^2`.
    pub excess_sq: f64,
}

impl Nonconcentration {
    pub fn ratio(&self) -> f64 {
        self.weighted / self.excess_sq
    }
}

pub fn nonconcentration(u: &QField, phi: &CylindricalFunction, delta: f64, sigma: f64) -> Result<Nonconcentration> {
    check_shape(u, phi)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("delta must be positive".into()));
    }
    let n = u.n();
    let p = 2.0 / u.q() as f64 - sigma;
    let sampled = sample_field(phi, u.grid())?;
    let g2 = |node: usize| crate::aq::match_cost(u.value(node), sampled.value(node), u.m());
    let inner = NodeQuadrature::new(u.grid(), &Ball::origin(n, 0.5), &|_| 1.0)?;
    let weighted = inner.apply(|node| {
        let x = u.grid().coords_vec(node);
        let (r, _) = phi.polar(&x);
        g2(node) / r.max(delta).powf(p)
    });
    let outer = NodeQuadrature::new(u.grid(), &Ball::origin(n, 1.0), &|_| 1.0)?;
    Ok(Nonconcentration { weighted, excess_sq: outer.apply(g2) })
}
