//! Pointwise evaluators of q-valued functions.

use crate::aq::AqPoint;
use crate::error::Result;

/// A q-valued function that can be evaluated at points of R^n.
///
/// `eval_into` writes `q * m` reals (value by value, any order) into `out`.
pub trait QEvaluator: Sync {
    fn q(&self) -> usize;
    fn m(&self) -> usize;
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    fn eval(&self, x: &[f64]) -> Result<AqPoint> {
        let mut out = vec![0.0; self.q() * self.m()];
        self.eval_into(x, &mut out)?;
        AqPoint::from_flat(out, self.m())
    }
}

impl<T: QEvaluator + Send + ?Sized> QEvaluator for Box<T> {
    fn q(&self) -> usize {
        (**self).q()
    }
    fn m(&self) -> usize {
        (**self).m()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).eval_into(x, out)
    }
}

impl<T: QEvaluator + ?Sized> QEvaluator for &T {
    fn q(&self) -> usize {
        (**self).q()
    }
    fn m(&self) -> usize {
        (**self).m()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).eval_into(x, out)
    }
}

/// Evaluator backed by a closure.
pub struct FnEvaluator<F> {
    q: usize,
    m: usize,
    f: F,
}

impl<F> FnEvaluator<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()> + Sync,
{
    pub fn new(q: usize, m: usize, f: F) -> Self {
        FnEvaluator { q, m, f }
    }
}

impl<F> QEvaluator for FnEvaluator<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()> + Sync,
{
    fn q(&self) -> usize {
        self.q
    }
    fn m(&self) -> usize {
        self.m
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.f)(x, out)
    }
}

/// Union of the value sets of several evaluators sharing `m`.
pub struct Stack {
    parts: Vec<Box<dyn QEvaluator + Send>>,
    q: usize,
    m: usize,
}

impl Stack {
    pub fn new(parts: Vec<Box<dyn QEvaluator + Send>>) -> Result<Self> {
        let m = parts
            .first()
            .map(|p| p.m())
            .ok_or_else(|| crate::Error::InvalidParameter("empty stack".into()))?;
        if let Some(p) = parts.iter().find(|p| p.m() != m) {
            return Err(crate::Error::DimensionMismatch { expected: m, found: p.m() });
        }
        let q = parts.iter().map(|p| p.q()).sum();
        Ok(Stack { parts, q, m })
    }
}

impl QEvaluator for Stack {
    fn q(&self) -> usize {
        self.q
    }
    fn m(&self) -> usize {
        self.m
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let mut off = 0;
        for p in &self.parts {
            let len = p.q() * self.m;
            p.eval_into(x, &mut out[off..off + len])?;
            off += len;
        }
        Ok(())
    }
}
