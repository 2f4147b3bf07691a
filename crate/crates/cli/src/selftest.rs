//! Built-in invariant checks. The report depends only on the seed: every
//! reduction in the library is deterministic and no timings are printed.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qvalued::blowup::{fit_tangent_from, rescale, FitOptions};
use qvalued::cylindrical::{canonical_gauge, normal_form, CylindricalFunction};
use qvalued::field::{sample_field, Grid, ShellRule};
use qvalued::frequency::frequency;
use qvalued::minimizer::{box_mask, minimize, SolveParams, SweepOrder};
use qvalued::{AqPoint, QEvaluator};

use crate::config::RunConfig;
use crate::{CmdResult, Failure, VERSION};

/// Outcome of one check: a name, pass flag and a measured value.
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn random_point(rng: &mut ChaCha8Rng, q: usize, m: usize) -> AqPoint {
    let flat: Vec<f64> = (0..q * m).map(|_| rng.random_range(-1.0..1.0)).collect();
    AqPoint::from_flat(flat, m).expect("finite")
}

fn metric_axioms(rng: &mut ChaCha8Rng) -> Check {
    let mut worst_triangle = f64::INFINITY;
    let mut symmetric = true;
    let mut worst_self = 0.0f64;
    for _ in 0..2000 {
        let q = rng.random_range(2..=5);
        let m = rng.random_range(1..=3);
        let (a, b, c) = (random_point(rng, q, m), random_point(rng, q, m), random_point(rng, q, m));
        let ab = a.metric(&b).unwrap();
        symmetric &= ab.to_bits() == b.metric(&a).unwrap().to_bits();
        worst_triangle = worst_triangle.min(a.metric(&c).unwrap() + c.metric(&b).unwrap() - ab);
        worst_self = worst_self.max(a.metric(&a).unwrap());
    }
    let passed = symmetric && worst_triangle >= -1e-9 && worst_self <= 1e-12;
    check("metric_axioms", passed, format!("symmetric={symmetric} triangle_slack={worst_triangle:.3e} self={worst_self:.3e}"))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut v = p.clone();
            v.insert(i, n - 1);
            out.push(v);
        }
    }
    out
}

fn metric_oracle(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let q = rng.random_range(1..=6);
        let m = rng.random_range(1..=3);
        let (a, b) = (random_point(rng, q, m), random_point(rng, q, m));
        let brute = permutations(q)
            .iter()
            .map(|p| (0..q).map(|i| a.value(i).iter().zip(b.value(p[i])).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let got = a.metric_sq(&b).unwrap();
        worst = worst.max((got - brute).abs() / brute.max(1e-300));
    }
    check("metric_oracle", worst <= 1e-12, format!("max_rel_err={worst:.3e}"))
}

fn average_identity(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let q = rng.random_range(1..=5);
        let m = rng.random_range(1..=3);
        let (a, b) = (random_point(rng, q, m), random_point(rng, q, m));
        let lhs = a.metric_sq(&b).unwrap();
        let da: f64 = a.average().iter().zip(b.average()).map(|(x, y)| (x - y) * (x - y)).sum();
        let rhs = q as f64 * da + a.average_free().metric_sq(&b.average_free()).unwrap();
        worst = worst.max((lhs - rhs).abs() / lhs.max(1e-300));
    }
    check("average_identity", worst <= 1e-10, format!("max_rel_err={worst:.3e}"))
}

fn random_coeff(rng: &mut ChaCha8Rng, m: usize) -> Vec<Complex64> {
    (0..m).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn gauge(rng: &mut ChaCha8Rng) -> Check {
    let mut worst_value = 0.0f64;
    let mut worst_cost = 0.0f64;
    for _ in 0..50 {
        let q0 = rng.random_range(1..=3);
        let k0 = [1, 2, 4, 5][rng.random_range(0..4)];
        let k0 = if q0 == 1 { k0 } else if k0 % q0 == 0 { k0 + 1 } else { k0 };
        let phi = CylindricalFunction::single(k0, q0, random_coeff(rng, 2)).unwrap();
        let nf = normal_form(&phi);
        let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        worst_value = worst_value.max(phi.eval(&x).unwrap().metric(&nf.eval(&x).unwrap()).unwrap());
        let g = canonical_gauge(&phi.coefficient_list(), &nf.coefficient_list(), q0).unwrap();
        worst_cost = worst_cost.max(g.cost);
    }
    let passed = worst_value <= 1e-12 && worst_cost <= 1e-24;
    check("gauge_normal_form", passed, format!("value_err={worst_value:.3e} align_cost={worst_cost:.3e}"))
}

fn cylinder_frequency() -> Check {
    let c = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
    let g = Grid::cube(2, 1.0, 64).unwrap();
    let rule = ShellRule::default_for(2).unwrap();
    let mut worst = 0.0f64;
    for (k0, q0) in [(1, 2), (3, 2)] {
        let phi = CylindricalFunction::single(k0, q0, c.clone()).unwrap();
        let u = sample_field(&phi, &g).unwrap();
        for rho in [0.25, 0.5] {
            let n = frequency(&u, &[0.0, 0.0], rho, &rule).unwrap();
            worst = worst.max((n - k0 as f64 / q0 as f64).abs());
        }
    }
    check("cylinder_frequency", worst <= 0.05, format!("max_err={worst:.6e}"))
}

fn harmonic_minimizer() -> Check {
    // x^2 - y^2 is discretely harmonic for the 5-point stencil
    let g = Grid::cube(2, 1.0, 16).unwrap();
    let exact = qvalued::eval::FnEvaluator::new(1, 1, |x: &[f64], out: &mut [f64]| {
        out[0] = x[0] * x[0] - x[1] * x[1];
        Ok(())
    });
    let exact = sample_field(&exact, &g).unwrap();
    let fixed = box_mask(&g);
    let mut init = exact.clone();
    for (i, &f) in fixed.iter().enumerate() {
        if !f {
            init.value_mut(i).fill(0.0);
        }
    }
    let params = SolveParams {
        energy_tol: 1e-15,
        delta_tol: 1e-14,
        relaxation: SolveParams::optimal_relaxation(16),
        order: SweepOrder::RedBlack,
        restarts: 1,
        ..SolveParams::default()
    };
    let sol = minimize(&init, &fixed, &params).unwrap();
    let err = sol.field.data().iter().zip(exact.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let monotone = sol.log.windows(2).all(|w| w[1].energy <= w[0].energy);
    check(
        "harmonic_minimizer",
        err <= 1e-8 && monotone,
        format!("max_err={err:.3e} monotone={monotone} energy={:.12e} sweeps={}", sol.energy, sol.log.len()),
    )
}

fn tangent_fit(rng: &mut ChaCha8Rng) -> Check {
    let phi = CylindricalFunction::single(1, 2, random_coeff(rng, 2)).unwrap();
    let g = Grid::cube(2, 1.0, 64).unwrap();
    let u = sample_field(&phi, &g).unwrap();
    let r = rescale(&u, &[0.0, 0.0], 0.5, None).unwrap();
    let init = CylindricalFunction::single(1, 2, random_coeff(rng, 2)).unwrap();
    let fit = fit_tangent_from(&r.field, &init, &FitOptions::default()).unwrap();
    let want: Vec<Vec<Complex64>> =
        phi.coefficient_list().iter().map(|c| c.iter().map(|z| z * (0.5f64.sqrt() / r.norm)).collect()).collect();
    let err = canonical_gauge(&want, &fit.tangent.coefficient_list(), 2).unwrap().cost.sqrt();
    check("tangent_fit", err <= 1e-6, format!("coeff_err={err:.3e} excess={:.3e}", fit.excess))
}

/// Run every check and render the report.
pub fn run_checks(seed: u64) -> (Vec<Check>, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks = vec![
        metric_axioms(&mut rng),
        metric_oracle(&mut rng),
        average_identity(&mut rng),
        gauge(&mut rng),
        cylinder_frequency(),
        harmonic_minimizer(),
        tangent_fit(&mut rng),
    ];
    let mut s = format!("# qval {VERSION} selftest seed={seed} h=1/32 triangle_tol=1e-9 identity_tol=1e-10 fit_tol=1e-6\n");
    for c in &checks {
        s.push_str(&format!("{} {} {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    s.push_str(&format!("summary: {} passed, {failed} failed\n", checks.len() - failed));
    (checks, s)
}

pub fn cmd_selftest(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let (checks, report) = run_checks(cfg.seed.unwrap_or(0));
    if let Some(p) = &cfg.out {
        std::fs::write(p, &report).map_err(|e| Failure::usage(anyhow::anyhow!("writing {}: {e}", p.display())))?;
    }
    out.write_all(report.as_bytes()).map_err(Failure::usage)?;
    if checks.iter().any(|c| !c.passed) {
        return Err(Failure::numeric(anyhow::anyhow!("selftest failed")));
    }
    Ok(())
}
