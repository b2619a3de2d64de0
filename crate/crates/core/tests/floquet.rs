mod common;

use std::sync::Arc;

use common::TWO_PI;
use lie_floquet::algebra::LieAlgebra;
use lie_floquet::expr::Environment;
use lie_floquet::floquet::*;
use lie_floquet::linalg::C64;
use lie_floquet::milne_pinney::{casimir, MPParams};
use nalgebra::{dvector, DMatrix, DVector};

fn curve(texts: &[&str]) -> Arc<CoefficientCurve> {
    Arc::new(CoefficientCurve::parse(texts, TWO_PI, true, Environment::new()).unwrap())
}

fn mp_fund(omega: &str, steps: usize) -> FundamentalSolution {
    let p = MPParams::parse(1.0, omega).unwrap();
    fundamental_solution(&Arc::new(LieAlgebra::sp1r()), &Arc::new(p.curve().unwrap()), steps).unwrap()
}

fn so3_error(steps: usize) -> f64 {
    let a = Arc::new(LieAlgebra::so3());
    let f = fundamental_solution(&a, &curve(&["0", "0", "1"]), steps).unwrap();
    let oracle = common::expm(&(-a.ad_matrix(&dvector![0.0, 0.0, 1.0]).unwrap() * TWO_PI));
    (f.monodromy() - oracle).amax()
}

#[test]
fn constant_rotation_matches_exponential() {
    assert!(so3_error(4000) <= 1e-10);
}

#[test]
fn rk4_error_scales_with_fourth_power() {
    // coarse grids keep the error well above rounding
    let ratio = so3_error(50) / so3_error(100);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn quarter_turn_rotates_e1_to_minus_e2() {
    let a = LieAlgebra::so3();
    let traj = integrate_euler(&a, &curve(&["0", "0", "1"]), &dvector![1.0, 0.0, 0.0], std::f64::consts::FRAC_PI_2, 2000).unwrap();
    let (t, xi) = traj.last().unwrap();
    assert_eq!(*t, std::f64::consts::FRAC_PI_2);
    assert!((xi - dvector![0.0, -1.0, 0.0]).amax() <= 1e-10);
}

#[test]
fn euler_solution_is_an_automorphism() {
    let f = mp_fund("1 + 0.1*cos(t)", 4000);
    let a = f.algebra().clone();
    let mut rng = common::rng(7);
    for _ in 0..10 {
        let x = common::random_vector(&mut rng, 3);
        let y = common::random_vector(&mut rng, 3);
        let tol = 1e-8 * (1.0 + x.norm() * y.norm());
        let bxy = a.bracket(&x, &y).unwrap();
        for op in f.operators() {
            let lhs = a.bracket(&(op * &x), &(op * &y)).unwrap();
            assert!((lhs - op * &bxy).amax() <= tol);
        }
    }
}

#[test]
fn euler_solution_preserves_killing_form() {
    let f = mp_fund("1 + 0.1*cos(t)", 4000);
    let a = f.algebra().clone();
    let mut rng = common::rng(8);
    for _ in 0..10 {
        let x = common::random_vector(&mut rng, 3);
        let y = common::random_vector(&mut rng, 3);
        let k0 = a.killing(&x, &y).unwrap();
        let tol = 1e-8 * (1.0 + x.norm() * y.norm());
        for op in f.operators() {
            assert!((a.killing(&(op * &x), &(op * &y)).unwrap() - k0).abs() <= tol);
        }
    }
}

#[test]
fn casimir_is_conserved_along_euler_flow() {
    let p = MPParams::parse(1.0, "1 + 0.1*cos(t)").unwrap();
    let traj = integrate_euler(&LieAlgebra::sp1r(), &p.curve().unwrap(), &dvector![0.3, -0.7, 1.1], TWO_PI, 4000).unwrap();
    let k0 = casimir(&traj[0].1).unwrap();
    let drift = traj.iter().map(|(_, x)| (casimir(x).unwrap() - k0).abs()).fold(0.0, f64::max);
    assert!(drift <= 1e-10, "{drift:e}");
}

#[test]
fn evaluation_extends_by_monodromy() {
    let f = mp_fund("1 + 0.1*cos(t)", 400);
    let m = f.monodromy().clone();
    for t in [0.0, 0.37, 1.0, 3.3, 5.9] {
        let lhs = f.evaluate(t + TWO_PI).unwrap();
        let rhs = f.evaluate(t).unwrap() * &m;
        assert!((lhs - rhs).amax() <= 1e-12);
    }
    let mid = f.evaluate(0.5 * (f.grid()[10] + f.grid()[11])).unwrap();
    let det = mid.determinant();
    assert!((det - 1.0).abs() < 1e-9);
    assert!(matches!(f.evaluate(-1.0), Err(FloquetError::InvalidTime(_))));
}

fn assert_spectrum(values: &[C64], expected: &[C64], tol: f64) {
    let mut used = vec![false; expected.len()];
    for v in values {
        let hit = expected
            .iter()
            .enumerate()
            .position(|(i, e)| !used[i] && (v - e).norm() <= tol)
            .unwrap_or_else(|| panic!("{v} not in {expected:?}"));
        used[hit] = true;
    }
}

#[test]
fn constant_frequency_spectra() {
    for (w0, expected) in [
        (0.3, vec![C64::new(1.0, 0.0), C64::from_polar(1.0, 1.2 * std::f64::consts::PI), C64::from_polar(1.0, -1.2 * std::f64::consts::PI)]),
        (0.25, vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(-1.0, 0.0)]),
        (0.5, vec![C64::new(1.0, 0.0); 3]),
    ] {
        let f = mp_fund(&w0.to_string(), 4000);
        let cls = floquet_classify(f.algebra(), f.monodromy()).unwrap();
        assert_spectrum(&cls.values(), &expected, 1e-8);
    }
}

#[test]
fn spectrum_for_constant_frequency_in_open_band() {
    for w0 in [0.05, 0.15, 0.35, 0.45] {
        let f = mp_fund(&w0.to_string(), 4000);
        let cls = floquet_classify(f.algebra(), f.monodromy()).unwrap();
        let th = 4.0 * std::f64::consts::PI * w0;
        let expected = [C64::new(1.0, 0.0), C64::from_polar(1.0, th), C64::from_polar(1.0, -th)];
        assert_spectrum(&cls.values(), &expected, 1e-8);
    }
}

#[test]
fn delta_generator_for_constant_frequency() {
    let f = mp_fund("0.3", 4000);
    let a = f.algebra().clone();
    let cls = floquet_classify(&a, f.monodromy()).unwrap();
    let search = periodic_generators(&a, &f, &cls, &a.center());
    let delta = search
        .delta_candidates
        .iter()
        .find(|g| g.provenance == Provenance::DeltaConstruction)
        .expect("delta candidate");
    let v = &delta.vector;
    assert!((f.monodromy() * v - v).amax() <= 1e-8);
    assert!(common::sine(v, &dvector![0.0, 0.91, 1.09]) <= 1e-8);
    for g in &search.generators {
        let mg = f.monodromy() * &g.vector;
        assert!((casimir(&mg).unwrap() - casimir(&g.vector).unwrap()).abs() <= 1e-10);
    }
}

#[test]
fn half_turn_gives_antiperiodic_generators() {
    let a = Arc::new(LieAlgebra::so3());
    let f = fundamental_solution(&a, &curve(&["0", "0", "0.5"]), 4000).unwrap();
    let cls = floquet_classify(&a, f.monodromy()).unwrap();
    assert_eq!(cls.count(FloquetTag::Antiperiodic), 2);
    assert_eq!(cls.count(FloquetTag::Fixed), 1);
    let search = periodic_generators(&a, &f, &cls, &a.center());
    let anti: Vec<_> = search.generators.iter().filter(|g| g.period_multiple == 2).collect();
    assert_eq!(anti.len(), 2);
    let e3 = search.generators.iter().find(|g| g.period_multiple == 1).unwrap();
    assert!((e3.vector.clone() - dvector![0.0, 0.0, 1.0]).amax() <= 1e-8);
    let e1 = dvector![1.0, 0.0, 0.0];
    for k in 0..10 {
        let t = 0.1 + 0.6 * k as f64;
        let d = f.evaluate(t + TWO_PI).unwrap() * &e1 + f.evaluate(t).unwrap() * &e1;
        assert!(d.amax() <= 1e-8);
    }
}

#[test]
fn compact_algebra_has_unimodular_multipliers() {
    let a = Arc::new(LieAlgebra::so3());
    let f = fundamental_solution(&a, &curve(&["cos(t)", "0.3*sin(2*t)", "0.7 + 0.2*cos(t)"]), 2000).unwrap();
    let cls = floquet_classify(&a, f.monodromy()).unwrap();
    assert!(cls.max_circle_deviation() <= 1e-8);
}

#[test]
fn generators_reintegrate_to_start() {
    let a = Arc::new(LieAlgebra::sp1r());
    for omega in ["0.3", "1 + 0.1*cos(t)", "0.25"] {
        let p = MPParams::parse(1.0, omega).unwrap();
        let c = Arc::new(p.curve().unwrap());
        let f = fundamental_solution(&a, &c, 4000).unwrap();
        let cls = floquet_classify(&a, f.monodromy()).unwrap();
        let search = periodic_generators(&a, &f, &cls, &a.center());
        assert!(!search.generators.is_empty());
        for g in &search.generators {
            assert!(g.defect(f.monodromy()) <= 1e-8);
            assert!((g.vector.amax() - 1.0).abs() < 1e-15);
            let horizon = TWO_PI * g.period_multiple as f64;
            let traj = integrate_euler(&a, &c, &g.vector, horizon, 4000 * g.period_multiple as usize).unwrap();
            assert!((&traj.last().unwrap().1 - &g.vector).amax() <= 1e-7);
        }
    }
}

#[test]
fn abelian_algebra_has_identity_monodromy() {
    let a = Arc::new(LieAlgebra::abelian(2).unwrap());
    let f = fundamental_solution(&a, &curve(&["sin(t)", "1"]), 64).unwrap();
    assert_eq!(f.monodromy(), &DMatrix::<f64>::identity(2, 2));
    let cls = floquet_classify(&a, f.monodromy()).unwrap();
    assert_eq!(cls.count(FloquetTag::Fixed), 2);
}

#[test]
fn classification_reports_off_circle() {
    let m = DMatrix::from_diagonal(&dvector![2.0, 0.5, 1.0]);
    let cls = floquet_classify(&LieAlgebra::sp1r(), &m).unwrap();
    assert_eq!(cls.count(FloquetTag::OffCircle), 2);
    assert_eq!(cls.summary(), FloquetTag::OffCircle);
    let _: DVector<f64> = dvector![0.0];
}
