use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::aq::AqPoint;
use crate::error::{Error, Result};
use crate::eval::QEvaluator;

/// One component of a cylindrical function: either the q0 branches of
/// `Re(c z^alpha)` or the zero value, repeated `multiplicity` times.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    /// `None` is the zero component.
    pub coeff: Option<Vec<Complex64>>,
    pub multiplicity: usize,
}

impl Component {
    pub fn new(coeff: Vec<Complex64>, multiplicity: usize) -> Self {
        Component { coeff: Some(coeff), multiplicity }
    }

    pub fn zero(multiplicity: usize) -> Self {
        Component { coeff: None, multiplicity }
    }

    pub fn is_zero(&self) -> bool {
        self.coeff.is_none()
    }
}

/// Axis rotation `X -> e^A X` for a skew generator coupling the plane to the axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Rotation {
    n: usize,
    generator: Vec<f64>,
    exp: Vec<f64>,
}

impl Rotation {
    /// `generator` is row-major `n x n`, skew, zero on the plane block and the axis block.
    pub fn new(n: usize, generator: Vec<f64>) -> Result<Self> {
        if n < 2 || generator.len() != n * n {
            return Err(Error::ShapeMismatch(format!("rotation generator must be {n}x{n}")));
        }
        for i in 0..n {
            for j in 0..n {
                let a = generator[i * n + j];
                if !a.is_finite() {
                    return Err(Error::NonFinite);
                }
                if (a + generator[j * n + i]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter("rotation generator must be skew".into()));
                }
                let same_block = (i < 2 && j < 2) || (i >= 2 && j >= 2);
                if same_block && a != 0.0 {
                    return Err(Error::InvalidParameter(
                        "rotation generator may only couple the plane with the axis".into(),
                    ));
                }
            }
        }
        let exp = DMatrix::from_row_slice(n, n, &generator).exp();
        let exp = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| exp[(i, j)]).collect();
        Ok(Rotation { n, generator, exp })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generator(&self) -> &[f64] {
        &self.generator
    }

    /// First two coordinates of `e^A x`.
    fn plane(&self, x: &[f64]) -> (f64, f64) {
        let n = self.n;
        let row = |i: usize| (0..n).map(|j| self.exp[i * n + j] * x.get(j).copied().unwrap_or(0.0)).sum();
        (row(0), row(1))
    }
}

/// Homogeneous cylindrical q-valued function of degree `k0/q0`.
#[derive(Clone, Debug, PartialEq)]
pub struct CylindricalFunction {
    q: usize,
    m: usize,
    k0: usize,
    q0: usize,
    components: Vec<Component>,
    rotation: Option<Rotation>,
}

pub(crate) fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl CylindricalFunction {
    pub fn new(q: usize, m: usize, k0: usize, q0: usize, components: Vec<Component>) -> Result<Self> {
        if k0 == 0 || q0 == 0 || m == 0 {
            return Err(Error::InvalidParameter("k0, q0 and m must be positive".into()));
        }
        if gcd(k0, q0) != 1 {
            return Err(Error::InvalidParameter(format!("k0 = {k0} and q0 = {q0} are not coprime")));
        }
        if q0 > q {
            return Err(Error::InvalidParameter(format!("q0 = {q0} exceeds q = {q}")));
        }
        if components.iter().filter(|c| c.is_zero()).count() > 1 {
            return Err(Error::InvalidParameter("at most one zero component".into()));
        }
        let mut total = 0;
        for c in &components {
            if c.multiplicity == 0 {
                return Err(Error::InvalidParameter("multiplicity must be positive".into()));
            }
            match &c.coeff {
                Some(v) => {
                    if v.len() != m {
                        return Err(Error::DimensionMismatch { expected: m, found: v.len() });
                    }
                    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                        return Err(Error::NonFinite);
                    }
                    total += c.multiplicity * q0;
                }
                None => total += c.multiplicity,
            }
        }
        if total != q {
            return Err(Error::ShapeMismatch(format!("components account for {total} values, expected q = {q}")));
        }
        Ok(CylindricalFunction { q, m, k0, q0, components, rotation: None })
    }

    /// Single component `Re(c z^{k0/q0})` with q = q0.
    pub fn single(k0: usize, q0: usize, c: Vec<Complex64>) -> Result<Self> {
        let m = c.len();
        Self::new(q0, m, k0, q0, vec![Component::new(c, 1)])
    }

    pub fn with_rotation(mut self, rotation: Rotation) -> Self {
        self.rotation = Some(rotation);
        self
    }

    pub fn q(&self) -> usize {
        self.q
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn k0(&self) -> usize {
        self.k0
    }
    pub fn q0(&self) -> usize {
        self.q0
    }
    pub fn alpha(&self) -> f64 {
        self.k0 as f64 / self.q0 as f64
    }
    pub fn components(&self) -> &[Component] {
        &self.components
    }
    pub fn rotation(&self) -> Option<&Rotation> {
        self.rotation.as_ref()
    }

    /// Nonzero coefficients, each repeated by its multiplicity.
    pub fn coefficient_list(&self) -> Vec<Vec<Complex64>> {
        self.components
            .iter()
            .filter_map(|c| c.coeff.as_ref().map(|v| (v, c.multiplicity)))
            .flat_map(|(v, k)| std::iter::repeat_n(v.clone(), k))
            .collect()
    }

    /// Multiplicity of the zero component (0 if absent).
    pub fn zero_multiplicity(&self) -> usize {
        self.components.iter().filter(|c| c.is_zero()).map(|c| c.multiplicity).sum()
    }

    /// Replace the nonzero coefficients in order, keeping the structure.
    pub fn with_coefficients(&self, coeffs: &[Vec<Complex64>]) -> Result<Self> {
        let mut it = coeffs.iter();
        let mut comps = Vec::with_capacity(self.components.len());
        for c in &self.components {
            comps.push(match c.coeff {
                Some(_) => Component::new(
                    it.next().ok_or_else(|| Error::ShapeMismatch("too few coefficients".into()))?.clone(),
                    c.multiplicity,
                ),
                None => c.clone(),
            });
        }
        if it.next().is_some() {
            return Err(Error::ShapeMismatch("too many coefficients".into()));
        }
        let mut out = Self::new(self.q, self.m, self.k0, self.q0, comps)?;
        out.rotation = self.rotation.clone();
        Ok(out)
    }

    /// Polar coordinates of the rotated plane projection, angle in [0, 2pi).
    pub fn polar(&self, x: &[f64]) -> (f64, f64) {
        let (x1, x2) = match &self.rotation {
            Some(r) => r.plane(x),
            None => (x[0], x.get(1).copied().unwrap_or(0.0)),
        };
        let r = x1.hypot(x2);
        let mut t = x2.atan2(x1);
        if t < 0.0 {
            t += TAU;
        }
        (r, t)
    }

    /// Write all q values at polar position `(r, theta)`.
    ///
    /// Layout: component by component; within a component, branch `l`
    /// outer and repetition inner.
    pub fn eval_polar_into(&self, r: f64, theta: f64, out: &mut [f64]) {
        let m = self.m;
        let alpha = self.alpha();
        let ra = if r == 0.0 { 0.0 } else { r.powf(alpha) };
        let mut slot = 0;
        for comp in &self.components {
            match &comp.coeff {
                None => {
                    out[slot * m..(slot + comp.multiplicity) * m].fill(0.0);
                    slot += comp.multiplicity;
                }
                Some(c) => {
                    for l in 0..self.q0 {
                        let phase = alpha * (theta + TAU * l as f64);
                        let (s, co) = phase.sin_cos();
                        for _ in 0..comp.multiplicity {
                            let v = &mut out[slot * m..(slot + 1) * m];
                            for (vk, ck) in v.iter_mut().zip(c) {
                                *vk = ra * (ck.re * co - ck.im * s);
                            }
                            slot += 1;
                        }
                    }
                }
            }
        }
    }

    /// Which component and branch each output slot of `eval_polar_into` belongs to.
    pub fn slots(&self) -> Vec<Slot> {
        let mut out = Vec::with_capacity(self.q);
        for (j, comp) in self.components.iter().enumerate() {
            match comp.coeff {
                None => out.extend(std::iter::repeat_n(Slot { component: j, branch: None }, comp.multiplicity)),
                Some(_) => {
                    for l in 0..self.q0 {
                        out.extend(std::iter::repeat_n(Slot { component: j, branch: Some(l) }, comp.multiplicity));
                    }
                }
            }
        }
        out
    }

    pub fn eval_polar(&self, r: f64, theta: f64) -> AqPoint {
        let mut out = vec![0.0; self.q * self.m];
        self.eval_polar_into(r, theta, &mut out);
        AqPoint::from_flat(out, self.m).expect("finite cylindrical values")
    }

    /// In-plane derivatives of branch `l` of coefficient `c` at `(r, theta)`:
    /// returns `(d/dx1, d/dx2)` as m-vectors.
    pub fn branch_gradient(&self, c: &[Complex64], l: usize, r: f64, theta: f64) -> (Vec<f64>, Vec<f64>) {
        let alpha = self.alpha();
        let mag = alpha * r.powf(alpha - 1.0);
        let phase = (alpha - 1.0) * (theta + TAU * l as f64);
        let w = Complex64::from_polar(mag, phase);
        let d1 = c.iter().map(|ck| (ck * w).re).collect();
        let d2 = c.iter().map(|ck| (ck * w * Complex64::i()).re).collect();
        (d1, d2)
    }
}

/// Component and branch index of one value slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Slot {
    pub component: usize,
    pub branch: Option<usize>,
}

impl QEvaluator for CylindricalFunction {
    fn q(&self) -> usize {
        self.q
    }
    fn m(&self) -> usize {
        self.m
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let (r, t) = self.polar(x);
        self.eval_polar_into(r, t, out);
        Ok(())
    }
}

/// Trapezoid quadrature of `G(phi(e^{i theta}), psi(e^{i theta}))^2` over the circle.
pub fn circle_distance_sq(phi: &CylindricalFunction, psi: &CylindricalFunction, n_theta: usize) -> Result<f64> {
    if phi.q != psi.q || phi.m != psi.m || phi.k0 != psi.k0 || phi.q0 != psi.q0 {
        return Err(Error::ShapeMismatch("circle distance needs equal q, m and degree".into()));
    }
    if n_theta == 0 {
        return Err(Error::InvalidParameter("n_theta must be positive".into()));
    }
    let len = phi.q * phi.m;
    let mut a = vec![0.0; len];
    let mut b = vec![0.0; len];
    let mut sum = 0.0;
    for k in 0..n_theta {
        let t = TAU * k as f64 / n_theta as f64;
        phi.eval_polar_into(1.0, t, &mut a);
        psi.eval_polar_into(1.0, t, &mut b);
        sum += crate::aq::match_cost(&a, &b, phi.m);
    }
    Ok(sum * TAU / n_theta as f64)
}

/// Default number of circle samples.
pub const DEFAULT_N_THETA: usize = 1024;
