//! Least-squares projection of a field on `B_1` onto cylindrical functions
//! of a fixed degree.

use std::collections::HashSet;
use std::f64::consts::TAU;
use std::hash::{DefaultHasher, Hash, Hasher};

use num_complex::Complex64;

use crate::aq::match_tuples_into;
use crate::cylindrical::{normal_form, Component, CylindricalFunction, Slot};
use crate::error::{Error, Result};
use crate::field::{interpolate_into, Ball, NodeQuadrature, QField};

/// Structures are enumerated only up to these bounds.
pub const STRUCTURE_LIMIT_Q: usize = 6;
pub const STRUCTURE_LIMIT_Q0: usize = 3;

/// Shape of a cylindrical function: degree `k0/q0`, multiplicities of the
/// nonzero components and multiplicity of the zero component.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TangentStructure {
    pub k0: usize,
    pub q0: usize,
    pub multiplicities: Vec<usize>,
    pub zero: usize,
}

impl TangentStructure {
    pub fn q(&self) -> usize {
        self.q0 * self.multiplicities.iter().sum::<usize>() + self.zero
    }

    pub fn of(phi: &CylindricalFunction) -> Self {
        TangentStructure {
            k0: phi.k0(),
            q0: phi.q0(),
            multiplicities: phi.components().iter().filter(|c| !c.is_zero()).map(|c| c.multiplicity).collect(),
            zero: phi.zero_multiplicity(),
        }
    }

    fn build(&self, m: usize, coeffs: &[Vec<Complex64>]) -> Result<CylindricalFunction> {
        let mut comps: Vec<Component> =
            self.multiplicities.iter().zip(coeffs).map(|(&k, c)| Component::new(c.clone(), k)).collect();
        if self.zero > 0 {
            comps.push(Component::zero(self.zero));
        }
        CylindricalFunction::new(self.q(), m, self.k0, self.q0, comps)
    }
}

/// All structures of degree `k0/q0` with `q` values and at least one
/// nonzero component; multiplicities are listed in nonincreasing order.
pub fn admissible_structures(q: usize, k0: usize, q0: usize) -> Result<Vec<TangentStructure>> {
    if q > STRUCTURE_LIMIT_Q || q0 > STRUCTURE_LIMIT_Q0 || q0 == 0 || q0 > q {
        return Err(Error::NoAdmissibleStructure { q, q0 });
    }
    fn partitions(total: usize, max: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if total == 0 {
            out.push(prefix.clone());
            return;
        }
        for k in (1..=max.min(total)).rev() {
            prefix.push(k);
            partitions(total - k, k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for sheets in 1..=q / q0 {
        let mut parts = Vec::new();
        partitions(sheets, sheets, &mut Vec::new(), &mut parts);
        for p in parts {
            out.push(TangentStructure { k0, q0, multiplicities: p, zero: q - q0 * sheets });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub enum FitTarget {
    Structure(TangentStructure),
    /// Try every admissible structure of this degree.
    Degree { k0: usize, q0: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Radius of the circle used to seed coefficients.
    pub ring_radius: f64,
    pub ring_samples: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iter: 200, ring_radius: 0.5, ring_samples: 256 }
    }
}

#[derive(Clone, Debug)]
pub struct TangentFit {
    /// Best fit in gauge normal form.
    pub tangent: CylindricalFunction,
    pub excess: f64,
    pub iterations: usize,
    /// The matching reached a fixed point.
    pub converged: bool,
    /// The alternation revisited an earlier matching without settling;
    /// `tangent` is the best one seen.
    pub cycled: bool,
}

struct Sample {
    node: usize,
    weight: f64,
    r: f64,
    ra: f64,
    theta: f64,
}

struct Problem<'a> {
    u: &'a QField,
    samples: Vec<Sample>,
}

impl<'a> Problem<'a> {
    fn new(u: &'a QField, alpha: f64) -> Result<Self> {
        let quad = NodeQuadrature::new(u.grid(), &Ball::origin(u.n(), 1.0), &|_| 1.0)?;
        let mut x = vec![0.0; u.n()];
        let samples = quad
            .entries
            .iter()
            .map(|&(node, weight)| {
                u.grid().coords(node, &mut x);
                let r = x[0].hypot(x[1]);
                let mut theta = x[1].atan2(x[0]);
                if theta < 0.0 {
                    theta += TAU;
                }
                Sample { node, weight, r, ra: if r == 0.0 { 0.0 } else { r.powf(alpha) }, theta }
            })
            .collect();
        Ok(Problem { u, samples })
    }

    /// Optimal matchings (`perm[s]` = value of `u` for slot `s`) and the squared excess.
    fn matchings(&self, phi: &CylindricalFunction, perms: &mut [usize]) -> f64 {
        let (q, m) = (phi.q(), phi.m());
        let mut pred = vec![0.0; q * m];
        let mut total = 0.0;
        for (i, s) in self.samples.iter().enumerate() {
            phi.eval_polar_into(s.r, s.theta, &mut pred);
            let cost = match_tuples_into(&pred, self.u.value(s.node), m, &mut perms[i * q..(i + 1) * q]);
            total += s.weight * cost;
        }
        total
    }

    /// Least-squares coefficients for fixed matchings. The normal
    /// equations split into one 2x2 system per component.
    fn solve(&self, phi: &CylindricalFunction, slots: &[Slot], perms: &[usize]) -> Result<Vec<Vec<Complex64>>> {
        let (q, m) = (phi.q(), phi.m());
        let alpha = phi.alpha();
        let comp_index: Vec<Option<usize>> = {
            let mut k = 0;
            phi.components()
                .iter()
                .map(|c| {
                    c.coeff.as_ref().map(|_| {
                        k += 1;
                        k - 1
                    })
                })
                .collect()
        };
        let nc = comp_index.iter().flatten().count();
        let mut mat = vec![[0.0f64; 3]; nc];
        let mut rhs = vec![vec![[0.0f64; 2]; m]; nc];
        for (i, s) in self.samples.iter().enumerate() {
            if s.ra == 0.0 {
                continue;
            }
            let obs = self.u.value(s.node);
            for (slot_i, slot) in slots.iter().enumerate() {
                let (Some(l), Some(j)) = (slot.branch, comp_index[slot.component]) else { continue };
                let (sn, cs) = (alpha * (s.theta + TAU * l as f64)).sin_cos();
                let (b0, b1) = (s.ra * cs, -s.ra * sn);
                let w = s.weight;
                mat[j][0] += w * b0 * b0;
                mat[j][1] += w * b0 * b1;
                mat[j][2] += w * b1 * b1;
                let v = &obs[perms[i * q + slot_i] * m..][..m];
                for k in 0..m {
                    rhs[j][k][0] += w * b0 * v[k];
                    rhs[j][k][1] += w * b1 * v[k];
                }
            }
        }
        (0..nc)
            .map(|j| {
                let [a, b, d] = mat[j];
                let det = a * d - b * b;
                if !(det > 1e-14 * (a * d).max(f64::MIN_POSITIVE)) {
                    return Err(Error::InvalidParameter("tangent fit is degenerate on this grid".into()));
                }
                Ok((0..m)
                    .map(|k| {
                        let [r0, r1] = rhs[j][k];
                        Complex64::new((d * r0 - b * r1) / det, (a * r1 - b * r0) / det)
                    })
                    .collect())
            })
            .collect()
    }
}

fn digest(perms: &[usize]) -> u64 {
    let mut h = DefaultHasher::new();
    perms.hash(&mut h);
    h.finish()
}

fn run(problem: &Problem, init: &CylindricalFunction, opts: &FitOptions) -> Result<TangentFit> {
    let q = init.q();
    let slots = init.slots();
    let mut phi = init.clone();
    let mut perms = vec![0usize; problem.samples.len() * q];
    let mut prev: Vec<usize> = Vec::new();
    let mut seen = HashSet::new();
    let mut best = (f64::INFINITY, phi.clone());
    let (mut converged, mut cycled) = (false, false);
    let mut iterations = 0;
    loop {
        let e2 = problem.matchings(&phi, &mut perms);
        if e2 < best.0 {
            best = (e2, phi.clone());
        }
        if perms == prev {
            converged = true;
            break;
        }
        if !seen.insert(digest(&perms)) {
            cycled = true;
            break;
        }
        if iterations == opts.max_iter {
            break;
        }
        iterations += 1;
        let coeffs = problem.solve(&phi, &slots, &perms)?;
        phi = phi.with_coefficients(&coeffs)?;
        std::mem::swap(&mut prev, &mut perms);
        perms.resize(prev.len(), 0);
    }
    Ok(TangentFit { tangent: normal_form(&best.1), excess: best.0.max(0.0).sqrt(), iterations, converged, cycled })
}

/// Alternate matching and least squares starting from `init`.
pub fn fit_tangent_from(u: &QField, init: &CylindricalFunction, opts: &FitOptions) -> Result<TangentFit> {
    if u.q() != init.q() || u.m() != init.m() {
        return Err(Error::ShapeMismatch("field and initial tangent differ in (q, m)".into()));
    }
    if init.rotation().is_some() {
        return Err(Error::InvalidParameter("tangent fits are axis aligned".into()));
    }
    run(&Problem::new(u, init.alpha())?, init, opts)
}

/// Coefficients of the closed label cycles of `u` on a circle of radius
/// `radius`, for cycles whose length makes `Re(c z^alpha)` single valued.
fn ring_candidates(u: &QField, k0: usize, q0: usize, opts: &FitOptions) -> Vec<Vec<Complex64>> {
    let (q, m, n) = (u.q(), u.m(), u.n());
    let len = q * m;
    let ns = opts.ring_samples;
    let alpha = k0 as f64 / q0 as f64;
    let mut seq = vec![0.0; ns * len];
    let mut raw = vec![0.0; len];
    let mut pred = vec![0.0; len];
    let mut perm = vec![0usize; q];
    let mut x = vec![0.0; n];
    let point = |k: usize, x: &mut [f64]| {
        let t = TAU * k as f64 / ns as f64;
        x[0] = opts.ring_radius * t.cos();
        x[1] = opts.ring_radius * t.sin();
    };
    point(0, &mut x);
    interpolate_into(u, &x, &mut seq[..len]);
    let predict = |seq: &[f64], k: usize, pred: &mut [f64]| {
        for i in 0..len {
            pred[i] = if k >= 2 { 2.0 * seq[(k - 1) * len + i] - seq[(k - 2) * len + i] } else { seq[(k - 1) * len + i] };
        }
    };
    for k in 1..ns {
        point(k, &mut x);
        interpolate_into(u, &x, &mut raw);
        predict(&seq, k, &mut pred);
        match_tuples_into(&pred, &raw, m, &mut perm);
        for i in 0..q {
            seq[k * len + i * m..k * len + (i + 1) * m].copy_from_slice(&raw[perm[i] * m..(perm[i] + 1) * m]);
        }
    }
    // close the loop: label i continues as label next[i]
    let mut extended = seq.clone();
    extended.extend_from_slice(&seq[..len]);
    predict(&extended, ns, &mut pred);
    let mut next = vec![0usize; q];
    match_tuples_into(&pred, &seq[..len], m, &mut next);
    let mut used = vec![false; q];
    let mut out = Vec::new();
    let ra = opts.ring_radius.powf(alpha);
    for start in 0..q {
        if used[start] {
            continue;
        }
        let mut cycle = vec![start];
        used[start] = true;
        let mut i = next[start];
        while i != start && !used[i] {
            used[i] = true;
            cycle.push(i);
            i = next[i];
        }
        if cycle.len() != q0 || i != start {
            continue;
        }
        let mut c = vec![Complex64::new(0.0, 0.0); m];
        for (t, &label) in cycle.iter().enumerate() {
            for k in 0..ns {
                let psi = alpha * TAU * (t as f64 + k as f64 / ns as f64);
                let w = Complex64::from_polar(1.0, -psi);
                for (ck, v) in c.iter_mut().zip(&seq[k * len + label * m..k * len + (label + 1) * m]) {
                    *ck += w * *v;
                }
            }
        }
        let scale = 2.0 / (ra * (ns * q0) as f64);
        out.push(c.into_iter().map(|z| z * scale).collect());
    }
    out.sort_by(|a: &Vec<Complex64>, b| {
        let na: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
        nb.total_cmp(&na)
    });
    out
}

/// Initial coefficient sets for a structure: ring candidates handed out in
/// decreasing size, a component of multiplicity `k` consuming `k` of them,
/// over every order of the components.
fn seeds(structure: &TangentStructure, candidates: &[Vec<Complex64>], m: usize, scale: f64) -> Vec<Vec<Vec<Complex64>>> {
    let nc = structure.multiplicities.len();
    let fallback = |j: usize| -> Vec<Complex64> {
        (0..m).map(|k| if k == 0 { Complex64::new(scale / (j + 1) as f64, 0.0) } else { Complex64::new(0.0, 0.0) }).collect()
    };
    let mut orders: Vec<Vec<usize>> = Vec::new();
    fn permute(prefix: &mut Vec<usize>, left: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..left.len() {
            let v = left.remove(i);
            prefix.push(v);
            permute(prefix, left, out);
            prefix.pop();
            left.insert(i, v);
        }
    }
    permute(&mut Vec::new(), &mut (0..nc).collect(), &mut orders);
    let mut out: Vec<Vec<Vec<Complex64>>> = Vec::new();
    for order in orders {
        let mut coeffs = vec![Vec::new(); nc];
        let mut next = 0;
        for &j in &order {
            coeffs[j] = candidates.get(next).cloned().unwrap_or_else(|| fallback(j));
            next += structure.multiplicities[j];
        }
        if !out.contains(&coeffs) {
            out.push(coeffs);
        }
    }
    out
}

/// Best cylindrical approximation of `u` on `B_1(0)`, axis aligned.
pub fn fit_tangent(u: &QField, target: &FitTarget, opts: &FitOptions) -> Result<TangentFit> {
    let structures = match target {
        FitTarget::Structure(s) => {
            if s.q() != u.q() {
                return Err(Error::NoAdmissibleStructure { q: u.q(), q0: s.q0 });
            }
            vec![s.clone()]
        }
        FitTarget::Degree { k0, q0 } => admissible_structures(u.q(), *k0, *q0)?,
    };
    let Some(first) = structures.first() else {
        return Err(Error::NoAdmissibleStructure { q: u.q(), q0: 0 });
    };
    let alpha = first.k0 as f64 / first.q0 as f64;
    let problem = Problem::new(u, alpha)?;
    let candidates = ring_candidates(u, first.k0, first.q0, opts);
    let scale = u.sup_norm().max(f64::MIN_POSITIVE);
    let mut best: Option<TangentFit> = None;
    for s in &structures {
        for coeffs in seeds(s, &candidates, u.m(), scale) {
            let fit = run(&problem, &s.build(u.m(), &coeffs)?, opts)?;
            // strict improvement keeps the earlier (simpler) structure on ties
            if best.as_ref().is_none_or(|b| fit.excess < b.excess * (1.0 - 1e-9)) {
                best = Some(fit);
            }
        }
    }
    best.ok_or(Error::NoAdmissibleStructure { q: u.q(), q0: first.q0 })
}

/// Coefficient error after optimal gauge alignment.
#[cfg(test)]
pub(crate) fn gauge_error(a: &CylindricalFunction, b: &CylindricalFunction) -> f64 {
    crate::cylindrical::canonical_gauge(&a.coefficient_list(), &b.coefficient_list(), a.q0()).unwrap().cost.sqrt()
}
