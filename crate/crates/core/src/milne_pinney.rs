//! The periodic Milne–Pinney oscillator `q'' + w(t)^2 q = c / q^3` as a
//! Hamiltonian system of Lie type over sp(1, R).

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::algebra::{AlgebraError, AlgebraVector, LieAlgebra};
use crate::expr::{Environment, Expr, ExprError, Layered};
use crate::floquet::{CoefficientCurve, FloquetClassification, FloquetError, PERIODIC_TOL};
use crate::hamiltonian::{Bound, DynamicsError, FirstIntegral, HamiltonianBasis, LieHamiltonianSystem, PhaseSpace};
use crate::pipeline::{find_periodic_integral, PipelineError};
use crate::sampling::halton_box;

pub const MP_PERIOD: f64 = 2.0 * PI;

pub const MP_HAMILTONIANS: [&str; 3] = ["p*q/2", "-p^2/4 + (q^2 - c/q^2)/4", "-p^2/4 - (q^2 + c/q^2)/4"];

/// Closure-check box `q in [0.5, 3]`, `p in [-2, 2]`.
pub const SAMPLE_BOX: ([f64; 2], [f64; 2]) = ([0.5, -2.0], [3.0, 2.0]);

pub const DEFAULT_CLOSURE_SAMPLES: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MpError {
    #[error("c must be positive and finite, got {0}")]
    InvalidC(f64),
    #[error("omega may only use t and declared parameters, found `{0}`")]
    UndeclaredVariable(String),
    #[error("omega is not 2*pi-periodic: |w(2pi) - w(0)| = {0:e}")]
    NotPeriodic(f64),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MPParams {
    c: f64,
    omega: Expr,
    params: Environment,
}

impl MPParams {
    pub fn new(c: f64, omega: Expr) -> Result<Self, MpError> {
        Self::with_parameters(c, omega, Environment::new())
    }

    /// `omega` may reference names bound in `params` besides `t`.
    pub fn with_parameters(c: f64, omega: Expr, params: Environment) -> Result<Self, MpError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(MpError::InvalidC(c));
        }
        if let Some(v) = omega.variables().into_iter().find(|v| v != "t" && !params.contains(v)) {
            return Err(MpError::UndeclaredVariable(v));
        }
        let params = params.with("c", c);
        let mp = MPParams { c, omega, params };
        let gap = (mp.omega(MP_PERIOD)? - mp.omega(0.0)?).abs();
        if gap > PERIODIC_TOL {
            return Err(MpError::NotPeriodic(gap));
        }
        Ok(mp)
    }

    pub fn parse(c: f64, omega: &str) -> Result<Self, MpError> {
        Self::new(c, omega.parse()?)
    }

    /// Constant frequency `omega0`.
    pub fn constant(c: f64, omega0: f64) -> Result<Self, MpError> {
        Self::new(c, Expr::num(omega0))
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn omega_expr(&self) -> &Expr {
        &self.omega
    }

    /// Parameter environment, including `c`.
    pub fn params(&self) -> &Environment {
        &self.params
    }

    pub fn omega(&self, t: f64) -> Result<f64, ExprError> {
        self.omega.eval(&Layered {
            names: &["t"],
            values: &[t],
            base: &self.params,
        })
    }

    /// `alpha = 1 - w^2`.
    pub fn alpha(&self, t: f64) -> Result<f64, ExprError> {
        let w = self.omega(t)?;
        Ok(1.0 - w * w)
    }

    /// `beta = 1 + w^2`.
    pub fn beta(&self, t: f64) -> Result<f64, ExprError> {
        let w = self.omega(t)?;
        Ok(w * w + 1.0)
    }

    /// `(0, alpha, beta)`.
    pub fn mu(&self, t: f64) -> Result<AlgebraVector, ExprError> {
        Ok(AlgebraVector::from_vec(vec![0.0, self.alpha(t)?, self.beta(t)?]))
    }

    /// `b = (0, -alpha, -beta)` as a coefficient curve.
    pub fn curve(&self) -> Result<CoefficientCurve, FloquetError> {
        let w = self.omega.serialize();
        let texts = ["0".to_string(), format!("-(1 - ({w})^2)"), format!("-(({w})^2 + 1)")];
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        CoefficientCurve::parse(&refs, MP_PERIOD, true, self.params.clone())
    }
}

/// `(q, p)` with `q > 0`.
pub fn mp_space() -> PhaseSpace {
    PhaseSpace::canonical_1d()
        .with_bound("q", Bound::Above(0.0))
        .expect("valid bound")
}

pub fn mp_basis(params: &MPParams) -> Result<HamiltonianBasis, DynamicsError> {
    HamiltonianBasis::parse(mp_space(), &MP_HAMILTONIANS, params.params.clone())
}

/// Halton points in [`SAMPLE_BOX`].
pub fn default_samples(count: usize) -> Vec<Vec<f64>> {
    halton_box(&SAMPLE_BOX.0, &SAMPLE_BOX.1, count)
}

pub fn mp_system(params: &MPParams) -> Result<LieHamiltonianSystem, DynamicsError> {
    LieHamiltonianSystem::new(
        Arc::new(LieAlgebra::sp1r()),
        Arc::new(mp_basis(params)?),
        Arc::new(params.curve()?),
        &default_samples(DEFAULT_CLOSURE_SAMPLES),
    )
}

/// `K = xi1^2 + xi2^2 - xi3^2`.
pub fn casimir(xi: &AlgebraVector) -> Result<f64, AlgebraError> {
    if xi.len() != 3 {
        return Err(AlgebraError::DimensionMismatch {
            expected: 3,
            got: xi.len(),
        });
    }
    Ok(xi[0] * xi[0] + xi[1] * xi[1] - xi[2] * xi[2])
}

/// `|| G (-ad_phi xi) - mu x xi ||_inf` with `G = diag(1, 1, -1)`.
///
/// With the right-handed cross product the Euler system reads
/// `G dxi/dt = mu x xi`; the residual measures that identity.
pub fn cross_product_residual(params: &MPParams, xi: &AlgebraVector, t: f64) -> Result<f64, DynamicsError> {
    let algebra = LieAlgebra::sp1r();
    let phi = AlgebraVector::from_vec(vec![0.0, -params.alpha(t)?, -params.beta(t)?]);
    let mut rhs = -algebra.ad_matrix(&phi)? * xi;
    rhs[2] = -rhs[2];
    let cross = params.mu(t)?.cross(xi);
    Ok((rhs - cross).amax())
}

/// Runs the generator pipeline and returns the preferred integral.
pub fn mp_periodic_integral(
    params: &MPParams,
    steps_per_period: usize,
) -> Result<(FirstIntegral, FloquetClassification), PipelineError> {
    let sys = mp_system(params)?;
    let found = find_periodic_integral(&sys, steps_per_period)?;
    Ok((found.integral, found.classification))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn params_validation() {
        assert_eq!(MPParams::constant(0.0, 1.0).unwrap_err(), MpError::InvalidC(0.0));
        assert!(matches!(MPParams::parse(1.0, "1 + t"), Err(MpError::NotPeriodic(_))));
        assert_eq!(
            MPParams::parse(1.0, "k*cos(t)").unwrap_err(),
            MpError::UndeclaredVariable("k".into())
        );
        let p = MPParams::with_parameters(1.0, "w0 + eps*cos(t)".parse().unwrap(), Environment::new().with("w0", 0.5).with("eps", 0.1)).unwrap();
        assert!((p.omega(0.0).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn unit_frequency_curve_is_constant() {
        let p = MPParams::constant(1.0, 1.0).unwrap();
        let b = p.curve().unwrap().eval(0.7).unwrap();
        assert_eq!(b, dvector![0.0, 0.0, -2.0]);
    }

    #[test]
    fn casimir_examples() {
        assert_eq!(casimir(&dvector![1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(casimir(&dvector![0.0, 0.0, 1.0]).unwrap(), -1.0);
        assert!(casimir(&dvector![1.0]).is_err());
    }

    #[test]
    fn cross_product_examples() {
        let p = MPParams::constant(1.0, 1.0).unwrap();
        assert_eq!(cross_product_residual(&p, &dvector![0.0, 0.0, 0.0], 0.3).unwrap(), 0.0);
        assert!(cross_product_residual(&p, &dvector![1.0, 2.0, 3.0], 0.0).unwrap() <= 1e-14);
    }

    #[test]
    fn closure_is_recorded() {
        let sys = mp_system(&MPParams::parse(1.0, "1 + 0.1*cos(t)").unwrap()).unwrap();
        assert!(sys.closure_residual() <= 1e-10, "{}", sys.closure_residual());
    }
}
