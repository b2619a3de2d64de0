//! Euler systems `dxi/dt = -[phi(t), xi]` on a Lie algebra: fundamental
//! solution, monodromy, Floquet classification and periodic generators.
//!
//! Convention: `xi(t) = F(t) xi(0)` as a matrix-column product, so column `j`
//! of `F(t)` is the solution started at `e_j`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::algebra::{AlgebraError, AlgebraOperator, AlgebraVector, CenterBasis, LieAlgebra};
use crate::expr::{Environment, Expr, ExprError, Layered};
use crate::linalg::{self, EigenError, C64};

/// `|lambda - 1|` or `|lambda + 1|` below this classifies a multiplier as
/// fixed or antiperiodic; `||lambda| - 1|` below it puts it on the circle.
pub const CLASSIFY_TOL: f64 = 1e-6;
/// Relative admissibility threshold: `|<a, conj a>_K| <= NULL_TOL |a|^2`.
pub const NULL_TOL: f64 = 1e-8;
/// Residual bound for generator invariants.
pub const GENERATOR_TOL: f64 = 1e-8;
/// Generators closer than this sine of angle are duplicates.
pub const DEDUP_SINE: f64 = 1e-6;
/// Periodicity tolerance for a declared periodic curve.
pub const PERIODIC_TOL: f64 = 1e-9;
pub const MIN_STEPS_PER_PERIOD: usize = 16;
const DET_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FloquetError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error("coefficient curve has {got} expressions, algebra has dimension {expected}")]
    CurveDimension { expected: usize, got: usize },
    #[error("period must be positive and finite, got {0}")]
    InvalidPeriod(f64),
    #[error("coefficient b_{index} uses undeclared variable `{name}`")]
    UndeclaredVariable { index: usize, name: String },
    #[error("curve declared periodic but |b(T) - b(0)| = {gap:e} exceeds {PERIODIC_TOL:e}")]
    NotPeriodic { gap: f64 },
    #[error("curve is not declared periodic")]
    NotDeclaredPeriodic,
    #[error("invalid step count {got}: need at least {min}")]
    InvalidSteps { got: usize, min: usize },
    #[error("invalid time {0}")]
    InvalidTime(f64),
    #[error("fundamental solution became singular at t = {t} (det = {det:e})")]
    NonInvertible { t: f64, det: f64 },
}

/// Coefficients `b_i(t)` of `phi(t) = sum_i b_i(t) e_i`.
#[derive(Debug, Clone)]
pub struct CoefficientCurve {
    exprs: Vec<Expr>,
    period: f64,
    periodic: bool,
    params: Environment,
}

impl CoefficientCurve {
    /// Expressions may use `t` and any name bound in `params`.
    pub fn new(exprs: Vec<Expr>, period: f64, periodic: bool, params: Environment) -> Result<Self, FloquetError> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(FloquetError::InvalidPeriod(period));
        }
        for (i, e) in exprs.iter().enumerate() {
            if let Some(name) = e.variables().into_iter().find(|v| v != "t" && !params.contains(v)) {
                return Err(FloquetError::UndeclaredVariable { index: i + 1, name });
            }
        }
        let curve = CoefficientCurve {
            exprs,
            period,
            periodic,
            params,
        };
        if periodic {
            let b0 = curve.eval(0.0)?;
            let b1 = curve.eval(period)?;
            let gap = (b1 - b0).amax();
            if gap > PERIODIC_TOL {
                return Err(FloquetError::NotPeriodic { gap });
            }
        }
        Ok(curve)
    }

    /// Parses each coefficient from text.
    pub fn parse(texts: &[&str], period: f64, periodic: bool, params: Environment) -> Result<Self, FloquetError> {
        let exprs = texts.iter().map(|s| s.parse()).collect::<Result<Vec<Expr>, _>>()?;
        Self::new(exprs, period, periodic, params)
    }

    /// The zero curve of dimension `n`.
    pub fn zero(n: usize, period: f64) -> Result<Self, FloquetError> {
        Self::new(vec![Expr::Num(0.0); n], period, true, Environment::new())
    }

    pub fn len(&self) -> usize {
        self.exprs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exprs.is_empty()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn exprs(&self) -> &[Expr] {
        &self.exprs
    }

    pub fn params(&self) -> &Environment {
        &self.params
    }

    /// Coefficient vector `(b_1(t), ..., b_n(t))`.
    pub fn eval(&self, t: f64) -> Result<AlgebraVector, ExprError> {
        let env = Layered {
            names: &["t"],
            values: &[t],
            base: &self.params,
        };
        let mut out = AlgebraVector::zeros(self.exprs.len());
        for (i, e) in self.exprs.iter().enumerate() {
            out[i] = e.eval(&env)?;
        }
        Ok(out)
    }
}

fn check_curve(algebra: &LieAlgebra, curve: &CoefficientCurve) -> Result<(), FloquetError> {
    if curve.len() != algebra.dim() {
        return Err(FloquetError::CurveDimension {
            expected: algebra.dim(),
            got: curve.len(),
        });
    }
    Ok(())
}

/// `phi(t) = sum_i b_i(t) e_i`.
pub fn phi_at(algebra: &LieAlgebra, curve: &CoefficientCurve, t: f64) -> Result<AlgebraVector, FloquetError> {
    check_curve(algebra, curve)?;
    Ok(curve.eval(t)?)
}

/// Generator of the Euler flow at time `t`: `-ad_{phi(t)}`.
fn euler_generator(algebra: &LieAlgebra, curve: &CoefficientCurve, t: f64) -> Result<DMatrix<f64>, FloquetError> {
    let phi = curve.eval(t)?;
    Ok(-algebra.ad_unchecked(phi.as_slice()))
}

/// One classical RK4 step for the linear system `Y' = A(t) Y`.
fn rk4_linear(
    algebra: &LieAlgebra,
    curve: &CoefficientCurve,
    t: f64,
    y: &DMatrix<f64>,
    h: f64,
) -> Result<DMatrix<f64>, FloquetError> {
    let a1 = euler_generator(algebra, curve, t)?;
    let a2 = euler_generator(algebra, curve, t + 0.5 * h)?;
    let a3 = euler_generator(algebra, curve, t + h)?;
    let k1 = &a1 * y;
    let k2 = &a2 * (y + &k1 * (0.5 * h));
    let k3 = &a2 * (y + &k2 * (0.5 * h));
    let k4 = &a3 * (y + &k3 * h);
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Integrates the Euler system from `xi0` over `[0, t_end]` with `steps`
/// fixed RK4 steps; returns every node including both endpoints.
pub fn integrate_euler(
    algebra: &LieAlgebra,
    curve: &CoefficientCurve,
    xi0: &AlgebraVector,
    t_end: f64,
    steps: usize,
) -> Result<Vec<(f64, AlgebraVector)>, FloquetError> {
    check_curve(algebra, curve)?;
    if xi0.len() != algebra.dim() {
        return Err(AlgebraError::DimensionMismatch {
            expected: algebra.dim(),
            got: xi0.len(),
        }
        .into());
    }
    if steps == 0 {
        return Err(FloquetError::InvalidSteps { got: 0, min: 1 });
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(FloquetError::InvalidTime(t_end));
    }
    let h = t_end / steps as f64;
    let n = algebra.dim();
    let mut y = DMatrix::from_column_slice(n, 1, xi0.as_slice());
    let mut out = Vec::with_capacity(steps + 1);
    out.push((0.0, xi0.clone()));
    for k in 0..steps {
        let t = k as f64 * h;
        y = rk4_linear(algebra, curve, t, &y, h)?;
        let tn = if k + 1 == steps { t_end } else { (k + 1) as f64 * h };
        out.push((tn, y.column(0).into_owned()));
    }
    Ok(out)
}

/// Fundamental solution of the Euler system over one period.
#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    algebra: Arc<LieAlgebra>,
    curve: Arc<CoefficientCurve>,
    grid: Vec<f64>,
    operators: Vec<AlgebraOperator>,
    monodromy: AlgebraOperator,
}

/// Integrates `dF/dt = -ad_{phi(t)} F`, `F(0) = I` over `[0, T]`.
pub fn fundamental_solution(
    algebra: &Arc<LieAlgebra>,
    curve: &Arc<CoefficientCurve>,
    steps_per_period: usize,
) -> Result<FundamentalSolution, FloquetError> {
    check_curve(algebra, curve)?;
    if !curve.is_periodic() {
        return Err(FloquetError::NotDeclaredPeriodic);
    }
    if steps_per_period < MIN_STEPS_PER_PERIOD {
        return Err(FloquetError::InvalidSteps {
            got: steps_per_period,
            min: MIN_STEPS_PER_PERIOD,
        });
    }
    let n = algebra.dim();
    let period = curve.period();
    let h = period / steps_per_period as f64;
    let mut grid = Vec::with_capacity(steps_per_period + 1);
    let mut operators = Vec::with_capacity(steps_per_period + 1);
    let mut f = DMatrix::identity(n, n);
    grid.push(0.0);
    operators.push(f.clone());
    for k in 0..steps_per_period {
        let t = k as f64 * h;
        f = rk4_linear(algebra, curve, t, &f, h)?;
        let tn = if k + 1 == steps_per_period { period } else { (k + 1) as f64 * h };
        let det = f.determinant();
        if det.is_nan() || det.abs() < DET_TOL {
            return Err(FloquetError::NonInvertible { t: tn, det });
        }
        grid.push(tn);
        operators.push(f.clone());
    }
    Ok(FundamentalSolution {
        algebra: Arc::clone(algebra),
        curve: Arc::clone(curve),
        grid,
        monodromy: f,
        operators,
    })
}

impl FundamentalSolution {
    pub fn algebra(&self) -> &Arc<LieAlgebra> {
        &self.algebra
    }

    pub fn curve(&self) -> &Arc<CoefficientCurve> {
        &self.curve
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn operators(&self) -> &[AlgebraOperator] {
        &self.operators
    }

    pub fn monodromy(&self) -> &AlgebraOperator {
        &self.monodromy
    }

    pub fn period(&self) -> f64 {
        self.curve.period()
    }

    pub fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    /// `F(t)` for any `t >= 0`, using `F(kT + s) = F(s) M^k`. Off-grid `F(s)`
    /// is re-integrated with one RK4 step from the node at or below `s`.
    pub fn evaluate(&self, t: f64) -> Result<AlgebraOperator, FloquetError> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(FloquetError::InvalidTime(t));
        }
        let period = self.period();
        let steps = self.steps();
        let h = period / steps as f64;
        let snap = 1e-12 * period;
        let mut k = (t / period).floor();
        let mut s = t - k * period;
        if s >= period - snap {
            k += 1.0;
            s = 0.0;
        }
        let s = s.max(0.0);
        let mut idx = ((s / h).floor() as usize).min(steps);
        if idx < steps && self.grid[idx + 1] - s <= snap {
            idx += 1;
        }
        let base = if (s - self.grid[idx]).abs() <= snap {
            self.operators[idx].clone()
        } else {
            let t0 = self.grid[idx];
            rk4_linear(&self.algebra, &self.curve, t0, &self.operators[idx], s - t0)?
        };
        Ok(if k == 0.0 {
            base
        } else {
            base * matrix_power(&self.monodromy, k as u64)
        })
    }
}

fn matrix_power(m: &DMatrix<f64>, mut k: u64) -> DMatrix<f64> {
    let n = m.nrows();
    let mut result = DMatrix::identity(n, n);
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Free-function form of [`FundamentalSolution::evaluate`].
pub fn evaluate_f(fund: &FundamentalSolution, t: f64) -> Result<AlgebraOperator, FloquetError> {
    fund.evaluate(t)
}

// ---------------------------------------------------------------------------
// Classification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FloquetTag {
    Fixed,
    Antiperiodic,
    Elliptic,
    Null,
    OffCircle,
}

impl FloquetTag {
    pub fn as_str(self) -> &'static str {
        match self {
            FloquetTag::Fixed => "fixed",
            FloquetTag::Antiperiodic => "antiperiodic",
            FloquetTag::Elliptic => "elliptic",
            FloquetTag::Null => "null",
            FloquetTag::OffCircle => "off-circle",
        }
    }
}

impl fmt::Display for FloquetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct ClassifiedEigenpair {
    pub value: C64,
    pub vector: DVector<C64>,
    /// `<a, conj a>_K`, real for a real symmetric Gram matrix.
    pub admissibility: f64,
    pub residual: f64,
    pub tag: FloquetTag,
}

impl ClassifiedEigenpair {
    pub fn is_real_vector(&self) -> bool {
        self.vector.iter().all(|z| z.im == 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct FloquetClassification {
    pub pairs: Vec<ClassifiedEigenpair>,
}

impl FloquetClassification {
    pub fn count(&self, tag: FloquetTag) -> usize {
        self.pairs.iter().filter(|p| p.tag == tag).count()
    }

    pub fn values(&self) -> Vec<C64> {
        self.pairs.iter().map(|p| p.value).collect()
    }

    /// `max_k ||lambda_k| - 1|`.
    pub fn max_circle_deviation(&self) -> f64 {
        self.pairs.iter().map(|p| (p.value.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn max_modulus(&self) -> f64 {
        self.pairs.iter().map(|p| p.value.norm()).fold(0.0, f64::max)
    }

    /// Summary tag of the whole spectrum: off-circle, then elliptic,
    /// antiperiodic and null dominate fixed.
    pub fn summary(&self) -> FloquetTag {
        [
            FloquetTag::OffCircle,
            FloquetTag::Elliptic,
            FloquetTag::Antiperiodic,
            FloquetTag::Null,
        ]
        .into_iter()
        .find(|t| self.count(*t) > 0)
        .unwrap_or(FloquetTag::Fixed)
    }
}

fn tag_for(value: C64, admissibility: f64, norm_sq: f64) -> FloquetTag {
    if (value - 1.0).norm() <= CLASSIFY_TOL {
        FloquetTag::Fixed
    } else if (value + 1.0).norm() <= CLASSIFY_TOL {
        FloquetTag::Antiperiodic
    } else if admissibility.abs() <= NULL_TOL * norm_sq {
        FloquetTag::Null
    } else if (value.norm() - 1.0).abs() <= CLASSIFY_TOL {
        FloquetTag::Elliptic
    } else {
        FloquetTag::OffCircle
    }
}

/// Eigenpairs of `monodromy` with Killing admissibility and tags.
pub fn floquet_classify(algebra: &LieAlgebra, monodromy: &AlgebraOperator) -> Result<FloquetClassification, FloquetError> {
    let n = algebra.dim();
    if monodromy.nrows() != n || monodromy.ncols() != n {
        return Err(AlgebraError::DimensionMismatch {
            expected: n,
            got: monodromy.nrows(),
        }
        .into());
    }
    let gram = algebra.killing_gram().map(|x| C64::new(x, 0.0));
    let pairs = linalg::eigen_decomposition(monodromy)?
        .into_iter()
        .map(|p| {
            let conj = p.vector.map(|z| z.conj());
            let admissibility = (p.vector.transpose() * &gram * &conj)[(0, 0)].re;
            let norm_sq = p.vector.norm_squared();
            ClassifiedEigenpair {
                tag: tag_for(p.value, admissibility, norm_sq),
                value: p.value,
                vector: p.vector,
                admissibility,
                residual: p.residual,
            }
        })
        .collect();
    Ok(FloquetClassification { pairs })
}

// ---------------------------------------------------------------------------
// Periodic generators

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Center,
    FixedEigenvector,
    AntiperiodicEigenvector,
    DeltaConstruction,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Center => "center",
            Provenance::FixedEigenvector => "fixed-eigenvector",
            Provenance::AntiperiodicEigenvector => "antiperiodic-eigenvector",
            Provenance::DeltaConstruction => "delta-construction",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A real initial vector whose Euler solution is `T`- or `2T`-periodic.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGenerator {
    pub vector: AlgebraVector,
    /// 1 or 2.
    pub period_multiple: u8,
    pub provenance: Provenance,
}

impl PeriodicGenerator {
    /// `||M v -+ v||_inf` for period multiple 1 (minus) or 2 (plus).
    pub fn defect(&self, monodromy: &AlgebraOperator) -> f64 {
        let mv = monodromy * &self.vector;
        if self.period_multiple == 1 {
            (mv - &self.vector).amax()
        } else {
            (mv + &self.vector).amax()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedEigenpair {
    pub index: usize,
    pub tag: FloquetTag,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct GeneratorSearch {
    pub generators: Vec<PeriodicGenerator>,
    /// Every delta vector built from an elliptic pair, before deduplication.
    pub delta_candidates: Vec<PeriodicGenerator>,
    pub skipped: Vec<SkippedEigenpair>,
}

/// Infinity-norm 1, first significant component positive.
pub fn normalize_generator(v: &AlgebraVector) -> Option<AlgebraVector> {
    let max = v.amax();
    if !(max > 0.0 && max.is_finite()) {
        return None;
    }
    let mut out = v / max;
    if let Some(first) = out.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            out = -out;
        }
    }
    Some(out)
}

/// Sine of the angle between two nonzero vectors.
pub fn sine_of_angle(u: &AlgebraVector, v: &AlgebraVector) -> f64 {
    let un = u.norm();
    let vn = v.norm();
    if un == 0.0 || vn == 0.0 {
        return 1.0;
    }
    let uh = u / un;
    let vh = v / vn;
    let proj = &uh - &vh * vh.dot(&uh);
    proj.norm().min(1.0)
}

/// Collects real generators of periodic Euler solutions: center vectors,
/// real eigenvectors for multipliers 1 and -1, and delta vectors from
/// elliptic admissible pairs.
pub fn periodic_generators(
    algebra: &LieAlgebra,
    fund: &FundamentalSolution,
    cls: &FloquetClassification,
    center: &CenterBasis,
) -> GeneratorSearch {
    let m = fund.monodromy();
    let mut search = GeneratorSearch::default();

    let offer = |search: &mut GeneratorSearch, raw: &AlgebraVector, period_multiple: u8, provenance: Provenance| -> Result<(), String> {
        let vector = normalize_generator(raw).ok_or_else(|| "zero vector".to_string())?;
        let g = PeriodicGenerator {
            vector,
            period_multiple,
            provenance,
        };
        let defect = g.defect(m);
        if defect > GENERATOR_TOL {
            return Err(format!("monodromy defect {defect:e}"));
        }
        if search
            .generators
            .iter()
            .any(|h| sine_of_angle(&h.vector, &g.vector) <= DEDUP_SINE)
        {
            return Err("duplicate of an earlier generator".into());
        }
        search.generators.push(g);
        Ok(())
    };

    for z in &center.vectors {
        let _ = offer(&mut search, z, 1, Provenance::Center);
    }

    let real_part = |v: &DVector<C64>| -> AlgebraVector {
        let re: AlgebraVector = v.map(|z| z.re);
        if re.amax() > 1e-12 {
            re
        } else {
            v.map(|z| z.im)
        }
    };

    for (index, pair) in cls.pairs.iter().enumerate() {
        let outcome = match pair.tag {
            FloquetTag::Fixed => offer(&mut search, &real_part(&pair.vector), 1, Provenance::FixedEigenvector),
            FloquetTag::Antiperiodic => offer(
                &mut search,
                &real_part(&pair.vector),
                2,
                Provenance::AntiperiodicEigenvector,
            ),
            FloquetTag::Elliptic if pair.value.im > 0.0 => {
                let conj = pair.vector.map(|z| z.conj());
                match algebra.bracket_complex(&pair.vector, &conj) {
                    Ok(br) => {
                        let delta: AlgebraVector = br.map(|z| z.im * 0.5);
                        if delta.amax() <= 1e-10 {
                            Err("delta vanishes".to_string())
                        } else {
                            let cand = PeriodicGenerator {
                                vector: normalize_generator(&delta).expect("nonzero"),
                                period_multiple: 1,
                                provenance: Provenance::DeltaConstruction,
                            };
                            search.delta_candidates.push(cand);
                            offer(&mut search, &delta, 1, Provenance::DeltaConstruction)
                        }
                    }
                    Err(e) => Err(e.to_string()),
                }
            }
            FloquetTag::Elliptic => Ok(()),
            FloquetTag::Null => Err("null admissibility".into()),
            FloquetTag::OffCircle => Err("multiplier off the unit circle".into()),
        };
        if let Err(reason) = outcome {
            search.skipped.push(SkippedEigenpair {
                index,
                tag: pair.tag,
                reason,
            });
        }
    }
    search
}

/// Largest deviation `max_k ||F(t_k) v - v||_inf` over the stored grid.
pub fn time_variation(fund: &FundamentalSolution, v: &AlgebraVector) -> f64 {
    fund.operators()
        .iter()
        .map(|f| (f * v - v).amax())
        .fold(0.0, f64::max)
}

/// Preferred generator: period multiple 1 first, then provenance order
/// fixed eigenvector, delta construction, center; ties go to the solution
/// with the least variation over the period. Falls back to a `2T` generator.
pub fn preferred_generator<'a>(
    fund: &FundamentalSolution,
    generators: &'a [PeriodicGenerator],
) -> Option<&'a PeriodicGenerator> {
    let rank = |p: Provenance| match p {
        Provenance::FixedEigenvector => 0,
        Provenance::DeltaConstruction => 1,
        Provenance::Center => 2,
        Provenance::AntiperiodicEigenvector => 3,
    };
    let mut best: Option<(&PeriodicGenerator, (u8, u8, f64))> = None;
    for g in generators {
        let key = (g.period_multiple, rank(g.provenance), time_variation(fund, &g.vector));
        let better = match &best {
            None => true,
            Some((_, k)) => {
                (key.0, key.1) < (k.0, k.1) || ((key.0, key.1) == (k.0, k.1) && key.2 < k.2 - 1e-12)
            }
        };
        if better {
            best = Some((g, key));
        }
    }
    best.map(|(g, _)| g)
}
