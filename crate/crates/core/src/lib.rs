//! Periodic first integrals for time-periodic Hamiltonian systems of Lie type.
//!
//! A system `dx/dt = sum_i b_i(t) X_{H_i}(x)` whose Hamiltonians close under
//! the Poisson bracket into a Lie algebra has first integrals
//! `I(t, x) = sum_j xi_j(t) H_j(x)` for every solution `xi` of the Euler
//! system `dxi/dt = -[phi(t), xi]`. Floquet analysis of that linear system
//! locates the solutions that are periodic, giving periodic integrals.
//!
//! ```
//! use lie_floquet::milne_pinney::{mp_periodic_integral, MPParams};
//!
//! let params = MPParams::constant(1.0, 1.0).unwrap();
//! let (integral, _) = mp_periodic_integral(&params, 64).unwrap();
//! // with unit frequency the integral is H3
//! let v = integral.value(0.0, &[2.0, 0.0]).unwrap();
//! assert!((v + 1.0625).abs() < 1e-12);
//! ```

pub mod algebra;
pub mod expr;
pub mod floquet;
pub mod hamiltonian;
pub mod linalg;
pub mod milne_pinney;
pub mod pipeline;
pub mod presets;
pub mod sampling;

pub use algebra::{AlgebraError, AlgebraOperator, AlgebraVector, BracketEntry, LieAlgebra};
pub use expr::{parse, Environment, Expr, ExprError};
pub use floquet::{
    floquet_classify, fundamental_solution, integrate_euler, periodic_generators, CoefficientCurve,
    FloquetClassification, FloquetError, FloquetTag, FundamentalSolution, PeriodicGenerator, Provenance,
};
pub use hamiltonian::{
    conservation_report, first_integral, hamiltonian_vector_field, integrate_flow, poisson_bracket,
    poisson_isomorphism_check, verify_closure, ConservationReport, DynamicsError, FirstIntegral, HamiltonianBasis,
    LieHamiltonianSystem, PhaseSpace, PhaseTrajectory,
};
pub use linalg::{EigenError, C64};
pub use pipeline::{find_periodic_integral, PeriodicIntegral, PipelineError};
