//! Canonical phase-space mechanics for Hamiltonian systems of Lie type.
//!
//! Points are laid out as `(q_1, ..., q_m, p_1, ..., p_m)`. Sign conventions:
//! the Hamiltonian vector field of `H` is `(dH/dp, -dH/dq)` and the Poisson
//! bracket is `{f, g} = sum_a (f_p g_q - f_q g_p)`, so that `X_H g = {H, g}`
//! and `{H_X, H_Y} = H_[X,Y]` holds for the bundled oscillator data.

use std::sync::Arc;

use thiserror::Error;

use crate::algebra::{AlgebraError, AlgebraVector, LieAlgebra};
use crate::expr::{Bindings, Environment, Expr, ExprError, Layered};
use crate::floquet::{CoefficientCurve, FloquetError, FundamentalSolution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Floquet(#[from] FloquetError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("invalid phase space: {0}")]
    InvalidSpace(String),
    #[error("Hamiltonian H_{index} uses undeclared variable `{name}`")]
    UndeclaredVariable { index: usize, name: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("point {0:?} lies outside the phase-space domain")]
    OutsideDomain(Vec<f64>),
    #[error("trajectory left the domain at t = {t}: {x:?}")]
    DomainExit { t: f64, x: Vec<f64> },
    #[error("invalid step count {0}")]
    InvalidSteps(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    /// Coordinate strictly greater than the value.
    Above(f64),
    /// Coordinate strictly less than the value.
    Below(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coordinate: usize,
    pub bound: Bound,
}

/// Canonical coordinates with optional strict bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpace {
    names: Vec<String>,
    degrees: usize,
    constraints: Vec<Constraint>,
}

impl PhaseSpace {
    pub fn new(q: Vec<String>, p: Vec<String>) -> Result<Self, DynamicsError> {
        if q.len() != p.len() || q.is_empty() {
            return Err(DynamicsError::InvalidSpace(format!(
                "need equally many q and p names, got {} and {}",
                q.len(),
                p.len()
            )));
        }
        let degrees = q.len();
        let mut names = q;
        names.extend(p);
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(DynamicsError::InvalidSpace(format!("duplicate coordinate `{n}`")));
            }
            if n == "t" {
                return Err(DynamicsError::InvalidSpace("`t` is reserved for time".into()));
            }
        }
        Ok(PhaseSpace {
            names,
            degrees,
            constraints: Vec::new(),
        })
    }

    /// One degree of freedom with coordinates `q`, `p`.
    pub fn canonical_1d() -> Self {
        Self::new(vec!["q".into()], vec!["p".into()]).expect("valid")
    }

    pub fn with_bound(mut self, name: &str, bound: Bound) -> Result<Self, DynamicsError> {
        let coordinate = self
            .index_of(name)
            .ok_or_else(|| DynamicsError::InvalidSpace(format!("unknown coordinate `{name}`")))?;
        let v = match bound {
            Bound::Above(v) | Bound::Below(v) => v,
        };
        if !v.is_finite() {
            return Err(DynamicsError::InvalidSpace(format!("bound on `{name}` is not finite")));
        }
        self.constraints.push(Constraint { coordinate, bound });
        let lo = self.lower(coordinate);
        let hi = self.upper(coordinate);
        if lo >= hi {
            return Err(DynamicsError::InvalidSpace(format!("empty range for `{name}`: ({lo}, {hi})")));
        }
        Ok(self)
    }

    pub fn degrees(&self) -> usize {
        self.degrees
    }

    pub fn dim(&self) -> usize {
        2 * self.degrees
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn q_names(&self) -> &[String] {
        &self.names[..self.degrees]
    }

    pub fn p_names(&self) -> &[String] {
        &self.names[self.degrees..]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Tightest lower bound of a coordinate (or `-inf`).
    pub fn lower(&self, coordinate: usize) -> f64 {
        self.constraints
            .iter()
            .filter(|c| c.coordinate == coordinate)
            .filter_map(|c| match c.bound {
                Bound::Above(v) => Some(v),
                Bound::Below(_) => None,
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Tightest upper bound of a coordinate (or `+inf`).
    pub fn upper(&self, coordinate: usize) -> f64 {
        self.constraints
            .iter()
            .filter(|c| c.coordinate == coordinate)
            .filter_map(|c| match c.bound {
                Bound::Below(v) => Some(v),
                Bound::Above(_) => None,
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().all(|v| v.is_finite())
            && self.constraints.iter().all(|c| match c.bound {
                Bound::Above(v) => x[c.coordinate] > v,
                Bound::Below(v) => x[c.coordinate] < v,
            })
    }

    fn check_point(&self, x: &[f64]) -> Result<(), DynamicsError> {
        if x.len() != self.dim() {
            return Err(DynamicsError::Dimension(format!(
                "point has {} coordinates, phase space has {}",
                x.len(),
                self.dim()
            )));
        }
        if !self.contains(x) {
            return Err(DynamicsError::OutsideDomain(x.to_vec()));
        }
        Ok(())
    }

    fn bindings<'a, B: Bindings + ?Sized>(&'a self, x: &'a [f64], base: &'a B) -> Layered<'a, String, B> {
        Layered {
            names: &self.names,
            values: x,
            base,
        }
    }
}

/// Poisson bracket `{f, g}(x)` with derivatives taken symbolically.
pub fn poisson_bracket(
    f: &Expr,
    g: &Expr,
    space: &PhaseSpace,
    params: &Environment,
    x: &[f64],
) -> Result<f64, DynamicsError> {
    space.check_point(x)?;
    let env = space.bindings(x, params);
    let m = space.degrees();
    let mut s = 0.0;
    for a in 0..m {
        let (q, p) = (&space.names[a], &space.names[m + a]);
        let fp = f.differentiate(p).eval(&env)?;
        let fq = f.differentiate(q).eval(&env)?;
        let gp = g.differentiate(p).eval(&env)?;
        let gq = g.differentiate(q).eval(&env)?;
        s += fp * gq - fq * gp;
    }
    Ok(s)
}

/// `(dH/dp, -dH/dq)` at `x`, laid out like a point.
pub fn hamiltonian_vector_field(
    h: &Expr,
    space: &PhaseSpace,
    params: &Environment,
    x: &[f64],
) -> Result<Vec<f64>, DynamicsError> {
    space.check_point(x)?;
    let env = space.bindings(x, params);
    let m = space.degrees();
    let mut v = vec![0.0; 2 * m];
    for a in 0..m {
        v[a] = h.differentiate(&space.names[m + a]).eval(&env)?;
        v[m + a] = -h.differentiate(&space.names[a]).eval(&env)?;
    }
    Ok(v)
}

/// Hamiltonians `H_1..H_n` realizing the algebra, with cached gradients.
#[derive(Debug, Clone)]
pub struct HamiltonianBasis {
    space: PhaseSpace,
    exprs: Vec<Expr>,
    params: Environment,
    /// `dq[i][a] = dH_i/dq_a`
    dq: Vec<Vec<Expr>>,
    dp: Vec<Vec<Expr>>,
}

impl HamiltonianBasis {
    pub fn new(space: PhaseSpace, exprs: Vec<Expr>, params: Environment) -> Result<Self, DynamicsError> {
        for (i, e) in exprs.iter().enumerate() {
            if let Some(name) = e
                .variables()
                .into_iter()
                .find(|v| space.index_of(v).is_none() && !params.contains(v))
            {
                return Err(DynamicsError::UndeclaredVariable { index: i + 1, name });
            }
        }
        let m = space.degrees();
        let dq = exprs
            .iter()
            .map(|e| (0..m).map(|a| e.differentiate(&space.names[a])).collect())
            .collect();
        let dp = exprs
            .iter()
            .map(|e| (0..m).map(|a| e.differentiate(&space.names[m + a])).collect())
            .collect();
        Ok(HamiltonianBasis {
            space,
            exprs,
            params,
            dq,
            dp,
        })
    }

    pub fn parse(space: PhaseSpace, texts: &[&str], params: Environment) -> Result<Self, DynamicsError> {
        let exprs = texts.iter().map(|s| s.parse()).collect::<Result<Vec<Expr>, _>>()?;
        Self::new(space, exprs, params)
    }

    pub fn space(&self) -> &PhaseSpace {
        &self.space
    }

    pub fn exprs(&self) -> &[Expr] {
        &self.exprs
    }

    pub fn params(&self) -> &Environment {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.exprs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exprs.is_empty()
    }

    /// `dH_i/dq_a` and `dH_i/dp_a` expressions.
    pub fn gradient_exprs(&self, i: usize) -> (&[Expr], &[Expr]) {
        (&self.dq[i], &self.dp[i])
    }

    /// All values `H_i(x)`.
    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        self.space.check_point(x)?;
        let env = self.space.bindings(x, &self.params);
        Ok(self.exprs.iter().map(|e| e.eval(&env)).collect::<Result<_, _>>()?)
    }

    /// Gradients `(dH_i/dq, dH_i/dp)` for every `i`.
    pub fn gradients(&self, x: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>, DynamicsError> {
        self.space.check_point(x)?;
        self.gradients_unchecked(x)
    }

    fn gradients_unchecked(&self, x: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>, DynamicsError> {
        let env = self.space.bindings(x, &self.params);
        (0..self.len())
            .map(|i| {
                let gq = self.dq[i].iter().map(|e| e.eval(&env)).collect::<Result<Vec<_>, _>>()?;
                let gp = self.dp[i].iter().map(|e| e.eval(&env)).collect::<Result<Vec<_>, _>>()?;
                Ok((gq, gp))
            })
            .collect()
    }

    /// Matrix of brackets `{H_i, H_j}(x)`.
    pub fn bracket_matrix(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, DynamicsError> {
        let grads = self.gradients(x)?;
        let n = self.len();
        let m = self.space.degrees();
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let (fq, fp) = &grads[i];
                let (gq, gp) = &grads[j];
                out[i][j] = (0..m).map(|a| fp[a] * gq[a] - fq[a] * gp[a]).sum();
            }
        }
        Ok(out)
    }

    /// `sum_i c_i H_i(x)`.
    pub fn combination(&self, coeffs: &AlgebraVector, x: &[f64]) -> Result<f64, DynamicsError> {
        let v = self.values(x)?;
        Ok(coeffs.iter().zip(v).map(|(c, h)| c * h).sum())
    }
}

/// The system `X(t, x) = sum_i b_i(t) X_{H_i}(x)`.
#[derive(Debug, Clone)]
pub struct LieHamiltonianSystem {
    algebra: Arc<LieAlgebra>,
    basis: Arc<HamiltonianBasis>,
    curve: Arc<CoefficientCurve>,
    closure_residual: f64,
}

impl LieHamiltonianSystem {
    /// Assembles the system and records the closure residual over `samples`.
    pub fn new(
        algebra: Arc<LieAlgebra>,
        basis: Arc<HamiltonianBasis>,
        curve: Arc<CoefficientCurve>,
        samples: &[Vec<f64>],
    ) -> Result<Self, DynamicsError> {
        let n = algebra.dim();
        if basis.len() != n || curve.len() != n {
            return Err(DynamicsError::Dimension(format!(
                "algebra has dimension {n}, {} Hamiltonians, {} coefficients",
                basis.len(),
                curve.len()
            )));
        }
        let mut sys = LieHamiltonianSystem {
            algebra,
            basis,
            curve,
            closure_residual: 0.0,
        };
        sys.closure_residual = verify_closure(&sys, samples)?;
        Ok(sys)
    }

    pub fn algebra(&self) -> &Arc<LieAlgebra> {
        &self.algebra
    }

    pub fn basis(&self) -> &Arc<HamiltonianBasis> {
        &self.basis
    }

    pub fn curve(&self) -> &Arc<CoefficientCurve> {
        &self.curve
    }

    pub fn space(&self) -> &PhaseSpace {
        self.basis.space()
    }

    /// Worst closure residual recorded at construction.
    pub fn closure_residual(&self) -> f64 {
        self.closure_residual
    }

    /// Velocity `sum_i b_i(t) (dH_i/dp, -dH_i/dq)` at `(t, x)`.
    pub fn velocity(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        let b = self.curve.eval(t)?;
        let grads = self.basis.gradients_unchecked(x)?;
        let m = self.space().degrees();
        let mut v = vec![0.0; 2 * m];
        for (i, (gq, gp)) in grads.iter().enumerate() {
            if b[i] == 0.0 {
                continue;
            }
            for a in 0..m {
                v[a] += b[i] * gp[a];
                v[m + a] -= b[i] * gq[a];
            }
        }
        Ok(v)
    }
}

/// `max |{H_i, H_j}(x) - sum_k c_ij^k H_k(x)|` over samples and index pairs.
pub fn verify_closure(sys: &LieHamiltonianSystem, samples: &[Vec<f64>]) -> Result<f64, DynamicsError> {
    let n = sys.algebra.dim();
    let mut worst: f64 = 0.0;
    for x in samples {
        let h = sys.basis.values(x)?;
        let br = sys.basis.bracket_matrix(x)?;
        for i in 0..n {
            for j in 0..n {
                let rhs: f64 = (0..n).map(|k| sys.algebra.c(i, j, k) * h[k]).sum();
                worst = worst.max((br[i][j] - rhs).abs());
            }
        }
    }
    Ok(worst)
}

/// Sampled phase-space curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

impl PhaseTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.times.iter().copied().zip(self.points.iter().map(Vec::as_slice))
    }
}

fn axpy(x: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(x, k)| x + a * k).collect()
}

/// Fixed-step RK4 on the nonlinear flow; stops with `DomainExit` when a step
/// leaves the domain.
pub fn integrate_flow(
    sys: &LieHamiltonianSystem,
    x0: &[f64],
    t_end: f64,
    steps: usize,
) -> Result<PhaseTrajectory, DynamicsError> {
    sys.space().check_point(x0)?;
    if steps == 0 {
        return Err(DynamicsError::InvalidSteps(0));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(FloquetError::InvalidTime(t_end).into());
    }
    let h = t_end / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut points = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    times.push(0.0);
    points.push(x.clone());
    let exit = |t: f64, x: &[f64]| DynamicsError::DomainExit { t, x: x.to_vec() };
    for k in 0..steps {
        let t = k as f64 * h;
        let step = || -> Result<Vec<f64>, DynamicsError> {
            let k1 = sys.velocity(t, &x)?;
            let k2 = sys.velocity(t + 0.5 * h, &axpy(&x, 0.5 * h, &k1))?;
            let k3 = sys.velocity(t + 0.5 * h, &axpy(&x, 0.5 * h, &k2))?;
            let k4 = sys.velocity(t + h, &axpy(&x, h, &k3))?;
            Ok(x
                .iter()
                .enumerate()
                .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect())
        };
        let tn = if k + 1 == steps { t_end } else { (k + 1) as f64 * h };
        let next = match step() {
            Ok(v) => v,
            Err(DynamicsError::Expr(ExprError::Domain(_))) => return Err(exit(tn, &x)),
            Err(e) => return Err(e),
        };
        if !sys.space().contains(&next) {
            return Err(exit(tn, &next));
        }
        x = next;
        times.push(tn);
        points.push(x.clone());
    }
    Ok(PhaseTrajectory { times, points })
}

/// `I(t, x) = sum_j xi_j(t) H_j(x)` with `xi(t) = F(t) alpha`.
#[derive(Debug, Clone)]
pub struct FirstIntegral {
    fund: Arc<FundamentalSolution>,
    basis: Arc<HamiltonianBasis>,
    alpha: AlgebraVector,
    xi_curve: Vec<(f64, AlgebraVector)>,
    period_multiple: Option<u8>,
    trivial: bool,
}

/// Builds the first integral generated by `alpha`.
pub fn first_integral(
    fund: &Arc<FundamentalSolution>,
    basis: &Arc<HamiltonianBasis>,
    alpha: &AlgebraVector,
) -> Result<FirstIntegral, DynamicsError> {
    let n = fund.algebra().dim();
    if basis.len() != n || alpha.len() != n {
        return Err(DynamicsError::Dimension(format!(
            "algebra dimension {n}, {} Hamiltonians, alpha of length {}",
            basis.len(),
            alpha.len()
        )));
    }
    let xi_curve = fund
        .grid()
        .iter()
        .zip(fund.operators())
        .map(|(t, f)| (*t, f * alpha))
        .collect();
    Ok(FirstIntegral {
        fund: Arc::clone(fund),
        basis: Arc::clone(basis),
        alpha: alpha.clone(),
        xi_curve,
        period_multiple: None,
        trivial: alpha.iter().all(|a| *a == 0.0),
    })
}

impl FirstIntegral {
    pub fn with_period_multiple(mut self, multiple: u8) -> Self {
        self.period_multiple = Some(multiple);
        self
    }

    pub fn alpha(&self) -> &AlgebraVector {
        &self.alpha
    }

    pub fn xi_curve(&self) -> &[(f64, AlgebraVector)] {
        &self.xi_curve
    }

    pub fn period_multiple(&self) -> Option<u8> {
        self.period_multiple
    }

    pub fn is_trivial(&self) -> bool {
        self.trivial
    }

    pub fn fundamental(&self) -> &Arc<FundamentalSolution> {
        &self.fund
    }

    pub fn basis(&self) -> &Arc<HamiltonianBasis> {
        &self.basis
    }

    /// `xi(t)` for any `t >= 0`.
    pub fn xi(&self, t: f64) -> Result<AlgebraVector, DynamicsError> {
        Ok(self.fund.evaluate(t)? * &self.alpha)
    }

    pub fn value(&self, t: f64, x: &[f64]) -> Result<f64, DynamicsError> {
        if self.trivial {
            self.basis.space().check_point(x)?;
            return Ok(0.0);
        }
        let xi = self.xi(t)?;
        self.basis.combination(&xi, x)
    }

    /// Worst mismatch between stored nodes and a fresh RK4 step from the
    /// preceding node, at five evenly spread nodes.
    pub fn euler_residual(&self) -> Result<f64, DynamicsError> {
        let steps = self.xi_curve.len() - 1;
        let algebra = self.fund.algebra();
        let curve = self.fund.curve();
        let mut worst: f64 = 0.0;
        for j in 1..=5 {
            let k = (j * steps / 6).max(1).min(steps) - 1;
            let (t0, x0) = &self.xi_curve[k];
            let (t1, x1) = &self.xi_curve[k + 1];
            let shifted = shifted_step(algebra, curve, *t0, x0, t1 - t0)?;
            worst = worst.max((shifted - x1).amax());
        }
        Ok(worst)
    }
}

fn shifted_step(
    algebra: &LieAlgebra,
    curve: &CoefficientCurve,
    t0: f64,
    x0: &AlgebraVector,
    h: f64,
) -> Result<AlgebraVector, DynamicsError> {
    let gen = |t: f64| -> Result<nalgebra::DMatrix<f64>, DynamicsError> {
        let phi = curve.eval(t)?;
        Ok(-algebra.ad_matrix(&phi)?)
    };
    let (a1, a2, a3) = (gen(t0)?, gen(t0 + 0.5 * h)?, gen(t0 + h)?);
    let k1 = &a1 * x0;
    let k2 = &a2 * (x0 + &k1 * (0.5 * h));
    let k3 = &a2 * (x0 + &k2 * (0.5 * h));
    let k4 = &a3 * (x0 + &k3 * h);
    Ok(x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservationReport {
    pub max_abs_drift: f64,
    /// `max_abs_drift / max(1, |I(0, x(0))|)`.
    pub relative_drift: f64,
    pub samples: usize,
    pub initial_value: f64,
}

/// Evaluates `I` along `traj` and reports its drift from the initial value.
pub fn conservation_report(integral: &FirstIntegral, traj: &PhaseTrajectory) -> Result<ConservationReport, DynamicsError> {
    let values = traj
        .iter()
        .map(|(t, x)| integral.value(t, x))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(drift_of(&values))
}

pub(crate) fn drift_of(values: &[f64]) -> ConservationReport {
    let initial_value = values.first().copied().unwrap_or(0.0);
    let max_abs_drift = values.iter().map(|v| (v - initial_value).abs()).fold(0.0, f64::max);
    ConservationReport {
        max_abs_drift,
        relative_drift: max_abs_drift / initial_value.abs().max(1.0),
        samples: values.len(),
        initial_value,
    }
}

/// `max |{I_a, I_b}(t, x) - I_[a,b](t, x)|` over the samples, with the
/// bracket taken in the phase-space variables at frozen `t`.
pub fn poisson_isomorphism_check(
    fund: &FundamentalSolution,
    basis: &HamiltonianBasis,
    alpha: &AlgebraVector,
    beta: &AlgebraVector,
    samples: &[(f64, Vec<f64>)],
) -> Result<f64, DynamicsError> {
    let algebra = fund.algebra();
    let ab = algebra.bracket(alpha, beta)?;
    let n = algebra.dim();
    let mut worst: f64 = 0.0;
    for (t, x) in samples {
        let f = fund.evaluate(*t)?;
        let xa = &f * alpha;
        let xb = &f * beta;
        let xab = &f * &ab;
        let br = basis.bracket_matrix(x)?;
        let mut lhs = 0.0;
        for j in 0..n {
            for k in 0..n {
                lhs += xa[j] * xb[k] * br[j][k];
            }
        }
        let rhs = basis.combination(&xab, x)?;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}
