//! Smooth compactly supported test functions and vector fields.

/// A smooth vector field on R^n with compact support in a ball.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64], out: &mut [f64]);
    /// Row-major `n x n` Jacobian, `out[i * n + k] = d_i zeta^k`.
    fn jacobian(&self, x: &[f64], out: &mut [f64]);
    /// Center and radius of a ball containing the support.
    fn support(&self) -> (Vec<f64>, f64);
}

/// A smooth scalar function on R^n with compact support in a ball.
pub trait ScalarField: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    fn support(&self) -> (Vec<f64>, f64);
}

/// `(1 - |x - center|^2 / radius^2)^3` inside the ball, zero outside. C^2.
#[derive(Clone, Debug, PartialEq)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Bump {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        assert!(radius > 0.0);
        Bump { center, radius }
    }

    fn s(&self, x: &[f64]) -> f64 {
        self.center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum::<f64>() / (self.radius * self.radius)
    }
}

impl ScalarField for Bump {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let s = self.s(x);
        if s >= 1.0 {
            0.0
        } else {
            (1.0 - s).powi(3)
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let s = self.s(x);
        let f = if s >= 1.0 { 0.0 } else { -6.0 * (1.0 - s).powi(2) / (self.radius * self.radius) };
        for (o, (v, c)) in out.iter_mut().zip(x.iter().zip(&self.center)) {
            *o = f * (v - c);
        }
    }

    fn support(&self) -> (Vec<f64>, f64) {
        (self.center.clone(), self.radius)
    }
}

/// Constant vector times a bump.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpField {
    pub bump: Bump,
    pub amplitude: Vec<f64>,
}

impl BumpField {
    pub fn new(center: Vec<f64>, radius: f64, amplitude: Vec<f64>) -> Self {
        assert_eq!(center.len(), amplitude.len());
        BumpField { bump: Bump::new(center, radius), amplitude }
    }
}

impl VectorField for BumpField {
    fn dim(&self) -> usize {
        self.amplitude.len()
    }

    fn value(&self, x: &[f64], out: &mut [f64]) {
        let b = self.bump.value(x);
        out.iter_mut().zip(&self.amplitude).for_each(|(o, a)| *o = a * b);
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let mut g = vec![0.0; n];
        self.bump.gradient(x, &mut g);
        for i in 0..n {
            for k in 0..n {
                out[i * n + k] = g[i] * self.amplitude[k];
            }
        }
    }

    fn support(&self) -> (Vec<f64>, f64) {
        self.bump.support()
    }
}

/// `x * bump(x)` about the bump center: a radial dilation field.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialBumpField {
    pub bump: Bump,
}

impl VectorField for RadialBumpField {
    fn dim(&self) -> usize {
        self.bump.dim()
    }

    fn value(&self, x: &[f64], out: &mut [f64]) {
        let b = self.bump.value(x);
        for (o, (v, c)) in out.iter_mut().zip(x.iter().zip(&self.bump.center)) {
            *o = (v - c) * b;
        }
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let b = self.bump.value(x);
        let mut g = vec![0.0; n];
        self.bump.gradient(x, &mut g);
        for i in 0..n {
            for k in 0..n {
                let xk = x[k] - self.bump.center[k];
                out[i * n + k] = g[i] * xk + if i == k { b } else { 0.0 };
            }
        }
    }

    fn support(&self) -> (Vec<f64>, f64) {
        self.bump.support()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradients_match_differences() {
        let f = RadialBumpField { bump: Bump::new(vec![0.1, -0.2], 0.7) };
        let x = [0.3, 0.1];
        let mut jac = [0.0; 4];
        f.jacobian(&x, &mut jac);
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let (mut vp, mut vm) = ([0.0; 2], [0.0; 2]);
            f.value(&xp, &mut vp);
            f.value(&xm, &mut vm);
            for k in 0..2 {
                assert!(((vp[k] - vm[k]) / (2.0 * h) - jac[i * 2 + k]).abs() < 1e-8);
            }
        }
        assert_eq!(f.bump.value(&[5.0, 0.0]), 0.0);
    }
}
