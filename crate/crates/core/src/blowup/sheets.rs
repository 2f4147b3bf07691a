use crate::aq::match_tuples_into;
use crate::cylindrical::{CylindricalFunction, Slot};
use crate::error::{Error, Result};
use crate::field::QField;

/// Values of `u` on a region around the axis of `phi`, each attached to
/// the nearest branch of a component of `phi`.
#[derive(Clone, Debug)]
pub struct SheetDecomposition {
    pub tangent: CylindricalFunction,
    pub slots: Vec<Slot>,
    pub nodes: Vec<usize>,
    /// `perm[i * q + s]`: index within `u(nodes[i])` of the value on slot `s`.
    pub perm: Vec<usize>,
    /// The value of `u` on each slot, copied unchanged.
    pub values: Vec<f64>,
    /// `phi` at each node, slot by slot.
    pub branches: Vec<f64>,
}

impl SheetDecomposition {
    fn stride(&self) -> usize {
        self.tangent.q() * self.tangent.m()
    }

    /// Offset `u - phi` on slot `s` at the `i`-th decomposed node.
    pub fn offset(&self, i: usize, s: usize) -> Vec<f64> {
        let m = self.tangent.m();
        let at = i * self.stride() + s * m;
        self.values[at..at + m].iter().zip(&self.branches[at..at + m]).map(|(v, b)| v - b).collect()
    }

    /// Per node, the offsets of component `j` as `(branch, offset)` pairs.
    pub fn component_offsets(&self, j: usize) -> Vec<Vec<(usize, Vec<f64>)>> {
        (0..self.nodes.len())
            .map(|i| {
                self.slots
                    .iter()
                    .enumerate()
                    .filter(|(_, sl)| sl.component == j)
                    .map(|(s, sl)| (sl.branch.unwrap_or(0), self.offset(i, s)))
                    .collect()
            })
            .collect()
    }

    /// Put every value back in its original position on a copy of `base`.
    pub fn reassemble(&self, base: &QField) -> Result<QField> {
        let (q, m) = (self.tangent.q(), self.tangent.m());
        if base.q() != q || base.m() != m {
            return Err(Error::ShapeMismatch("base field differs in (q, m)".into()));
        }
        let mut out = base.clone();
        for (i, &node) in self.nodes.iter().enumerate() {
            let dst = out.value_mut(node);
            for s in 0..q {
                let p = self.perm[i * q + s];
                dst[p * m..(p + 1) * m].copy_from_slice(&self.values[i * q * m + s * m..][..m]);
            }
        }
        Ok(out)
    }
}

/// Decompose `u` over the nodes with axis distance `>= inner` and
/// `|X| <= outer`. Every node must satisfy
/// `separation(phi(X)) > 2 kappa G(u(X), phi(X))`; otherwise the node with
/// the smallest margin is reported.
pub fn decompose_sheets(
    u: &QField,
    phi: &CylindricalFunction,
    inner: f64,
    outer: f64,
    kappa: f64,
) -> Result<SheetDecomposition> {
    let (q, m, n) = (u.q(), u.m(), u.n());
    if phi.q() != q || phi.m() != m {
        return Err(Error::ShapeMismatch("field and cylinder differ in (q, m)".into()));
    }
    if !(inner > 0.0 && outer > inner && kappa > 0.0) {
        return Err(Error::InvalidParameter("need 0 < inner < outer and kappa > 0".into()));
    }
    let slots = phi.slots();
    let grid = u.grid();
    let mut x = vec![0.0; n];
    let mut nodes = Vec::new();
    let mut perm = Vec::new();
    let mut values = Vec::new();
    let mut branches = Vec::new();
    let mut pred = vec![0.0; q * m];
    let mut p = vec![0usize; q];
    let mut worst: Option<(f64, usize, f64, f64)> = None;
    for node in 0..grid.len() {
        grid.coords(node, &mut x);
        let (r, theta) = phi.polar(&x);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r < inner || norm > outer {
            continue;
        }
        phi.eval_polar_into(r, theta, &mut pred);
        let cost = match_tuples_into(&pred, u.value(node), m, &mut p);
        let sep = separation_between_labels(&pred, &slots, m);
        let required = 2.0 * kappa * cost.sqrt();
        if sep <= required {
            let margin = sep - required;
            if worst.is_none_or(|w| margin < w.0) {
                worst = Some((margin, node, sep, required));
            }
            continue;
        }
        nodes.push(node);
        perm.extend_from_slice(&p);
        for &pi in p.iter() {
            values.extend_from_slice(&u.value(node)[pi * m..(pi + 1) * m]);
        }
        branches.extend_from_slice(&pred);
    }
    if let Some((_, node, separation, required)) = worst {
        return Err(Error::AmbiguousAssignment { node, separation, required });
    }
    Ok(SheetDecomposition { tangent: phi.clone(), slots, nodes, perm, values, branches })
}

/// Smallest distance between values carried by different (component,
/// branch) labels; copies of one label may coincide.
fn separation_between_labels(values: &[f64], slots: &[Slot], m: usize) -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..slots.len() {
        for b in a + 1..slots.len() {
            if slots[a] == slots[b] {
                continue;
            }
            let d = crate::aq::assignment::sq_dist(&values[a * m..(a + 1) * m], &values[b * m..(b + 1) * m]);
            best = best.min(d);
        }
    }
    // a single label leaves nothing to confuse
    best.sqrt()
}
