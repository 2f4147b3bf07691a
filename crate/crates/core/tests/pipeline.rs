//! Public-API pipelines across modules.

use num_complex::Complex64;
use proptest::prelude::*;

use qvalued::blowup::{decompose_sheets, fit_tangent, rescale, FitOptions, FitTarget};
use qvalued::cylindrical::{normal_form, CylindricalFunction, CylindricalRecord, GeneratorRecord};
use qvalued::field::{read_qfld, sample_field, write_qfld, Grid, ShellRule};
use qvalued::frequency::{profile, MONOTONE_TOL};
use qvalued::minimizer::{ball_mask, discrete_energy, minimize, SolveParams, SweepOrder};
use qvalued::{AqPoint, QEvaluator};

fn iso() -> Vec<Complex64> {
    vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]
}

#[test]
fn record_to_field_to_file_and_back() {
    let phi = CylindricalFunction::single(3, 2, iso()).unwrap();
    let text = GeneratorRecord::Cylinder(CylindricalRecord::from(&phi)).to_toml();
    let eval = GeneratorRecord::from_toml(&text).unwrap().build().unwrap();
    let grid = Grid::cube(2, 1.0, 32).unwrap();
    let u = sample_field(eval.as_ref(), &grid).unwrap();
    let mut bytes = Vec::new();
    write_qfld(&u, &mut bytes).unwrap();
    assert_eq!(read_qfld(&bytes[..]).unwrap(), u);
    assert_eq!(u, sample_field(&phi, &grid).unwrap());
}

#[test]
fn minimized_branched_field_has_half_frequency_and_tangent() {
    let phi = CylindricalFunction::single(1, 2, iso()).unwrap();
    let grid = Grid::cube(2, 1.0, 64).unwrap();
    let exact = sample_field(&phi, &grid).unwrap();
    let fixed = ball_mask(&grid, &[0.0, 0.0], 1.0);
    let mut init = exact.clone();
    for (i, &f) in fixed.iter().enumerate() {
        if !f {
            init.value_mut(i).fill(0.0);
        }
    }
    let params = SolveParams {
        relaxation: SolveParams::optimal_relaxation(64),
        order: SweepOrder::RedBlack,
        energy_tol: 1e-13,
        restarts: 1,
        ..SolveParams::default()
    };
    let sol = minimize(&init, &fixed, &params).unwrap();
    assert!(discrete_energy(&sol.field) <= discrete_energy(&init));

    let rule = ShellRule::default_for(2).unwrap();
    let p = profile(&sol.field, &[0.0, 0.0], &[0.2, 0.4, 0.6], 0.5, &rule).unwrap();
    assert!(p.n.iter().all(|n| (n - 0.5).abs() < 0.05), "{:?}", p.n);
    assert!(p.check_monotone(MONOTONE_TOL).iter().all(|v| v.drop < 0.05));

    let r = rescale(&sol.field, &[0.0, 0.0], 0.5, None).unwrap();
    let fit = fit_tangent(&r.field, &FitTarget::Degree { k0: 1, q0: 2 }, &FitOptions::default()).unwrap();
    assert!(fit.excess < 0.05, "{}", fit.excess);
    let sheets = decompose_sheets(&r.field, &fit.tangent, 0.3, 0.9, 1.0).unwrap();
    assert!(!sheets.nodes.is_empty());
}

proptest! {
    #[test]
    fn normal_form_is_a_relabeling(re in -1.0f64..1.0, im in -1.0f64..1.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let phi = CylindricalFunction::single(1, 3, vec![Complex64::new(re, im), Complex64::new(0.5, -0.25)]).unwrap();
        let nf = normal_form(&phi);
        let (a, b): (AqPoint, AqPoint) = (phi.eval(&[x, y]).unwrap(), nf.eval(&[x, y]).unwrap());
        prop_assert!(a.metric(&b).unwrap() < 1e-12);
    }
}
