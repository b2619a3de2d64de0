//! Small bundled systems used by examples and checks.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::algebra::LieAlgebra;
use crate::expr::Environment;
use crate::floquet::CoefficientCurve;
use crate::hamiltonian::{DynamicsError, HamiltonianBasis, LieHamiltonianSystem, PhaseSpace};
use crate::sampling::halton_box;

/// Heisenberg realization on two degrees of freedom:
/// `H = (q1, p1*p2, -p2)` with `{H1, H2} = H3`, driven by
/// `b(t) = (cos t, sin t, 1)`. The central direction `e3` gives the
/// exactly conserved integral `-p2`.
pub fn heisenberg_center_system() -> Result<LieHamiltonianSystem, DynamicsError> {
    let space = PhaseSpace::new(vec!["q1".into(), "q2".into()], vec!["p1".into(), "p2".into()])?;
    let basis = HamiltonianBasis::parse(space, &["q1", "p1*p2", "-p2"], Environment::new())?;
    let curve = CoefficientCurve::parse(&["cos(t)", "sin(t)", "1"], 2.0 * PI, true, Environment::new())?;
    LieHamiltonianSystem::new(
        Arc::new(LieAlgebra::heisenberg3()),
        Arc::new(basis),
        Arc::new(curve),
        &halton_box(&[-2.0; 4], &[2.0; 4], 20),
    )
}
