mod common;

use std::sync::Arc;

use common::TWO_PI;
use lie_floquet::algebra::LieAlgebra;
use lie_floquet::expr::{parse, Environment, Expr};
use lie_floquet::floquet::{fundamental_solution, CoefficientCurve};
use lie_floquet::hamiltonian::*;
use lie_floquet::milne_pinney::{mp_basis, mp_space, mp_system, MPParams, SAMPLE_BOX};
use lie_floquet::pipeline::find_periodic_integral;
use lie_floquet::presets::heisenberg_center_system;
use nalgebra::dvector;
use proptest::prelude::*;

fn env() -> Environment {
    Environment::new().with("c", 1.0)
}

fn mp(omega: &str) -> (MPParams, LieHamiltonianSystem) {
    let p = MPParams::parse(1.0, omega).unwrap();
    let s = mp_system(&p).unwrap();
    (p, s)
}

#[test]
fn closure_holds_at_random_points() {
    let (_, sys) = mp("1 + 0.1*cos(t)");
    let mut rng = common::rng(21);
    let pts: Vec<_> = (0..100).map(|_| common::random_point(&mut rng, &SAMPLE_BOX.0, &SAMPLE_BOX.1)).collect();
    assert!(verify_closure(&sys, &pts).unwrap() <= 1e-10);
}

#[test]
fn sign_sabotage_is_detected() {
    let (p, sys) = mp("1");
    assert!(sys.closure_residual() <= 1e-10);
    let mut c = LieAlgebra::sp1r().constants().to_vec();
    c[(3 + 2) * 3] = -1.0;
    c[(2 * 3 + 1) * 3] = 1.0;
    let pts = lie_floquet::milne_pinney::default_samples(50);
    let flipped = LieHamiltonianSystem::new(
        Arc::new(LieAlgebra::new(3, c).unwrap()),
        Arc::new(mp_basis(&p).unwrap()),
        sys.curve().clone(),
        &pts,
    )
    .unwrap();
    let basis = mp_basis(&p).unwrap();
    let h1max = pts.iter().map(|x| basis.values(x).unwrap()[0].abs()).fold(0.0, f64::max);
    assert!((flipped.closure_residual() - 2.0 * h1max).abs() <= 1e-12);
}

#[test]
fn equilibrium_is_fixed_by_the_flow() {
    let (_, sys) = mp("1");
    let traj = integrate_flow(&sys, &[1.0, 0.0], TWO_PI, 500).unwrap();
    for (_, x) in traj.iter() {
        assert!((x[0] - 1.0).abs() <= 1e-14 && x[1].abs() <= 1e-14);
    }
}

#[test]
fn autonomous_energy_is_conserved() {
    let (_, sys) = mp("1");
    let traj = integrate_flow(&sys, &[2.0, 0.0], TWO_PI, 4000).unwrap();
    let energy = |x: &[f64]| x[1] * x[1] / 2.0 + (x[0] * x[0] + 1.0 / (x[0] * x[0])) / 2.0;
    let e0 = energy(&[2.0, 0.0]);
    for (_, x) in traj.iter() {
        assert!((energy(x) - e0).abs() <= 1e-8);
    }
}

#[test]
fn zero_curve_gives_constant_flow() {
    let p = MPParams::parse(1.0, "1").unwrap();
    let sys = LieHamiltonianSystem::new(
        Arc::new(LieAlgebra::sp1r()),
        Arc::new(mp_basis(&p).unwrap()),
        Arc::new(CoefficientCurve::zero(3, TWO_PI).unwrap()),
        &[],
    )
    .unwrap();
    let traj = integrate_flow(&sys, &[0.7, -1.3], 3.0, 10).unwrap();
    assert!(traj.points.iter().all(|x| x == &vec![0.7, -1.3]));
}

#[test]
fn leaving_the_domain_is_reported() {
    let (_, sys) = mp("1");
    match integrate_flow(&sys, &[2.0, -10.0], 0.5, 1) {
        Err(DynamicsError::DomainExit { t, x }) => {
            assert!(t > 0.0);
            assert!(x[0] <= 0.0);
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        integrate_flow(&sys, &[-1.0, 0.0], 1.0, 2),
        Err(DynamicsError::OutsideDomain(_))
    ));
}

#[test]
fn first_integral_for_unit_frequency_is_h3() {
    let (p, sys) = mp("1");
    let fund = Arc::new(fundamental_solution(sys.algebra(), sys.curve(), 64).unwrap());
    let basis = Arc::new(mp_basis(&p).unwrap());
    let i = first_integral(&fund, &basis, &dvector![0.0, 0.0, 1.0]).unwrap();
    assert_eq!(i.value(0.0, &[2.0, 0.0]).unwrap(), -1.0625);
    assert!((i.value(17.3, &[2.0, 0.0]).unwrap() + 1.0625).abs() <= 1e-12);
    let zero = first_integral(&fund, &basis, &dvector![0.0, 0.0, 0.0]).unwrap();
    assert!(zero.is_trivial());
    assert_eq!(zero.value(3.0, &[1.0, 1.0]).unwrap(), 0.0);
}

#[test]
fn center_integral_is_time_independent() {
    let sys = heisenberg_center_system().unwrap();
    let fund = Arc::new(fundamental_solution(sys.algebra(), sys.curve(), 1000).unwrap());
    let i = first_integral(&fund, sys.basis(), &dvector![0.0, 0.0, 1.0]).unwrap();
    assert!(i.xi_curve().iter().all(|(_, xi)| xi == &dvector![0.0, 0.0, 1.0]));
    let traj = integrate_flow(&sys, &[0.3, -0.2, 1.1, 0.8], 2.0 * TWO_PI, 2000).unwrap();
    let r = conservation_report(&i, &traj).unwrap();
    assert!(r.max_abs_drift <= 1e-15, "{r:?}");
}

#[test]
fn periodic_integral_is_conserved_along_the_flow() {
    let (_, sys) = mp("1 + 0.1*cos(t)");
    let found = find_periodic_integral(&sys, 4000).unwrap();
    let traj = integrate_flow(&sys, &[2.0, 0.0], 2.0 * TWO_PI, 8000).unwrap();
    let r = conservation_report(&found.integral, &traj).unwrap();
    assert!(r.relative_drift <= 1e-6, "{r:?}");
    let mut rng = common::rng(5);
    for _ in 0..20 {
        let t = rng_t(&mut rng);
        let x = common::random_point(&mut rng, &SAMPLE_BOX.0, &SAMPLE_BOX.1);
        let i = &found.integral;
        assert!((i.value(t + TWO_PI, &x).unwrap() - i.value(t, &x).unwrap()).abs() <= 1e-8);
    }
}

fn rng_t(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    use rand::Rng;
    rng.gen_range(0.0..TWO_PI)
}

#[test]
fn frozen_xi_is_not_an_integral() {
    let (p, sys) = mp("1 + 0.1*cos(t)");
    let found = find_periodic_integral(&sys, 4000).unwrap();
    let alpha = found.generator.vector.clone();
    let basis = mp_basis(&p).unwrap();
    let traj = integrate_flow(&sys, &[2.0, 0.0], 2.0 * TWO_PI, 8000).unwrap();
    let values: Vec<f64> = traj.iter().map(|(_, x)| basis.combination(&alpha, x).unwrap()).collect();
    let v0 = values[0];
    let drift = values.iter().map(|v| (v - v0).abs()).fold(0.0, f64::max) / v0.abs().max(1.0);
    assert!(drift > 1e-2, "{drift}");
}

#[test]
fn isomorphism_at_initial_time() {
    let (p, sys) = mp("1 + 0.1*cos(t)");
    let fund = fundamental_solution(sys.algebra(), sys.curve(), 4000).unwrap();
    let basis = mp_basis(&p).unwrap();
    let r = poisson_isomorphism_check(&fund, &basis, &dvector![0.0, 1.0, 0.0], &dvector![0.0, 0.0, 1.0], &[(0.0, vec![1.0, 2.0])]).unwrap();
    assert!(r <= 1e-10);
    let a = dvector![0.2, -0.4, 0.9];
    let r = poisson_isomorphism_check(&fund, &basis, &a, &a, &[(1.0, vec![1.0, 2.0])]).unwrap();
    assert!(r <= 1e-12);
}

#[test]
fn isomorphism_on_random_samples() {
    let (p, sys) = mp("1 + 0.1*cos(t)");
    let fund = fundamental_solution(sys.algebra(), sys.curve(), 4000).unwrap();
    let basis = mp_basis(&p).unwrap();
    let mut rng = common::rng(9);
    let samples: Vec<_> = (0..20)
        .map(|_| (rng_t(&mut rng) * 2.0, common::random_point(&mut rng, &SAMPLE_BOX.0, &SAMPLE_BOX.1)))
        .collect();
    for _ in 0..5 {
        let a = common::random_vector(&mut rng, 3);
        let b = common::random_vector(&mut rng, 3);
        assert!(poisson_isomorphism_check(&fund, &basis, &a, &b, &samples).unwrap() <= 1e-6);
    }
}

#[test]
fn integral_satisfies_its_defining_equation() {
    let (p, sys) = mp("1 + 0.1*cos(t)");
    let fund = Arc::new(fundamental_solution(sys.algebra(), sys.curve(), 4000).unwrap());
    let basis = Arc::new(mp_basis(&p).unwrap());
    let i = first_integral(&fund, &basis, &dvector![0.3, 1.0, -0.5]).unwrap();
    let mut rng = common::rng(13);
    let space = mp_space();
    for _ in 0..10 {
        let t = rng_t(&mut rng) + 0.1;
        let x = common::random_point(&mut rng, &SAMPLE_BOX.0, &SAMPLE_BOX.1);
        let h = 1e-5;
        let dt = (i.value(t + h, &x).unwrap() - i.value(t - h, &x).unwrap()) / (2.0 * h);
        let xi = i.xi(t).unwrap();
        let expr_i = xi
            .iter()
            .zip(basis.exprs())
            .fold(Expr::num(0.0), |acc, (c, e)| acc + Expr::num(*c) * e.clone());
        let b = sys.curve().eval(t).unwrap();
        let mut flow = 0.0;
        for (k, hk) in basis.exprs().iter().enumerate() {
            flow += b[k] * poisson_bracket(hk, &expr_i, &space, basis.params(), &x).unwrap();
        }
        assert!((dt + flow).abs() <= 1e-5, "{}", dt + flow);
    }
}

#[test]
fn euler_curve_is_consistent() {
    let (p, sys) = mp("1 + 0.1*cos(t)");
    let fund = Arc::new(fundamental_solution(sys.algebra(), sys.curve(), 400).unwrap());
    let i = first_integral(&fund, &Arc::new(mp_basis(&p).unwrap()), &dvector![1.0, 0.0, 0.0]).unwrap();
    assert!(i.euler_residual().unwrap() <= 1e-14);
}

#[test]
fn poisson_jacobi_on_mp_hamiltonians() {
    let p = MPParams::parse(1.0, "1").unwrap();
    let basis = mp_basis(&p).unwrap();
    let space = mp_space();
    let [h1, h2, h3] = [0, 1, 2].map(|i| basis.exprs()[i].clone());
    let mut rng = common::rng(17);
    for _ in 0..20 {
        let x = common::random_point(&mut rng, &SAMPLE_BOX.0, &SAMPLE_BOX.1);
        // {f,{g,h}} with the inner bracket as an expression
        let br = |f: &Expr, g: &Expr| -> Expr {
            let (q, pp) = ("q", "p");
            f.differentiate(pp) * g.differentiate(q) - f.differentiate(q) * g.differentiate(pp)
        };
        let s = poisson_bracket(&h1, &br(&h2, &h3), &space, &env(), &x).unwrap()
            + poisson_bracket(&h2, &br(&h3, &h1), &space, &env(), &x).unwrap()
            + poisson_bracket(&h3, &br(&h1, &h2), &space, &env(), &x).unwrap();
        assert!(s.abs() <= 1e-9);
    }
}

fn phase_point() -> impl Strategy<Value = Vec<f64>> {
    (0.5..3.0f64, -2.0..2.0f64).prop_map(|(q, p)| vec![q, p])
}

fn sample_fn() -> impl Strategy<Value = Expr> {
    prop::sample::select(vec!["q^2*p", "sin(q) + p^3", "exp(p/3)*q", "sqrt(q)*cos(p)", "p*q/2", "1/q^2 - p"])
        .prop_map(|s| parse(s).unwrap())
}

proptest! {
    #[test]
    fn bracket_is_bilinear_and_antisymmetric(f in sample_fn(), g in sample_fn(), h in sample_fn(), a in -2.0..2.0f64, x in phase_point()) {
        let s = PhaseSpace::canonical_1d();
        let e = Environment::new();
        let fg = poisson_bracket(&f, &g, &s, &e, &x).unwrap();
        let gf = poisson_bracket(&g, &f, &s, &e, &x).unwrap();
        prop_assert!((fg + gf).abs() <= 1e-12 * (1.0 + fg.abs()));
        let lhs = poisson_bracket(&(Expr::num(a) * f.clone() + g.clone()), &h, &s, &e, &x).unwrap();
        let rhs = a * poisson_bracket(&f, &h, &s, &e, &x).unwrap() + poisson_bracket(&g, &h, &s, &e, &x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn bracket_obeys_leibniz(f in sample_fn(), g in sample_fn(), h in sample_fn(), x in phase_point()) {
        let s = PhaseSpace::canonical_1d();
        let e = Environment::new();
        let env = Layered2(&x);
        let fv = f.eval(&env).unwrap();
        let gv = g.eval(&env).unwrap();
        let lhs = poisson_bracket(&(f.clone() * g.clone()), &h, &s, &e, &x).unwrap();
        let rhs = fv * poisson_bracket(&g, &h, &s, &e, &x).unwrap() + gv * poisson_bracket(&f, &h, &s, &e, &x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }
}

struct Layered2<'a>(&'a [f64]);

impl lie_floquet::expr::Bindings for Layered2<'_> {
    fn lookup(&self, name: &str) -> Option<f64> {
        match name {
            "q" => Some(self.0[0]),
            "p" => Some(self.0[1]),
            _ => None,
        }
    }
}
