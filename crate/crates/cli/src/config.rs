//! Run configuration: schema validation, decoding, and model assembly.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;
use std::sync::OnceLock;

use lie_floquet::algebra::{BracketEntry, LieAlgebra};
use lie_floquet::expr::{Environment, Expr};
use lie_floquet::floquet::CoefficientCurve;
use lie_floquet::hamiltonian::{Bound, HamiltonianBasis, LieHamiltonianSystem, PhaseSpace};
use lie_floquet::milne_pinney::{mp_basis, MPParams, SAMPLE_BOX};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::Value;

use crate::CliError;

pub const SCHEMA: &str = include_str!("../schema/config.json");

pub const DEFAULT_STEPS: usize = 4000;
pub const DEFAULT_CLOSURE_SAMPLES: usize = 50;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum AlgebraSpec {
    Preset(String),
    Explicit {
        dim: usize,
        #[serde(default)]
        labels: Option<Vec<String>>,
        brackets: Vec<BracketJson>,
        #[serde(default)]
        complete: bool,
        #[serde(default)]
        jacobi_tol: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct BracketJson {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub c: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Coordinates {
    pub q: Vec<String>,
    pub p: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct MpSpec {
    pub c: f64,
    pub omega: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct Numerics {
    pub steps_per_period: Option<usize>,
    pub flow_steps: Option<usize>,
    pub horizon: Option<f64>,
    pub closure_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct Output {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct RunConfig {
    pub algebra: Option<AlgebraSpec>,
    pub hamiltonians: Option<Vec<String>>,
    pub coordinates: Option<Coordinates>,
    pub coefficients: Option<Vec<String>>,
    pub period: Option<f64>,
    pub periodic: Option<bool>,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub domain: BTreeMap<String, (String, f64)>,
    pub milne_pinney: Option<MpSpec>,
    #[serde(default)]
    pub numerics: Numerics,
    pub initial_state: Option<Vec<f64>>,
    pub xi0: Option<Vec<f64>>,
    pub sample_box: Option<BTreeMap<String, [f64; 2]>>,
    #[serde(default)]
    pub output: Output,
    pub sweep: Option<SweepSpec>,
}

fn validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let schema: Value = serde_json::from_str(SCHEMA).expect("bundled schema is valid JSON");
        jsonschema::validator_for(&schema).expect("bundled schema compiles")
    })
}

/// Checks `value` against the bundled schema, listing every violation.
pub fn validate_json(value: &Value) -> Result<(), CliError> {
    let errors: Vec<String> = validator()
        .iter_errors(value)
        .map(|e| {
            let path = e.instance_path().to_string();
            if path.is_empty() {
                e.to_string()
            } else {
                format!("{path}: {e}")
            }
        })
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("config does not match schema:\n  {}", errors.join("\n  "))))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::Validation(format!("invalid JSON: {e}")))?;
        validate_json(&value)?;
        serde_json::from_value(value).map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Defaults of the bundled oscillator demo.
    pub fn mp_default() -> Self {
        RunConfig {
            milne_pinney: Some(MpSpec {
                c: 1.0,
                omega: "1 + 0.1*cos(t)".into(),
            }),
            initial_state: Some(vec![2.0, 0.0]),
            numerics: Numerics {
                horizon: Some(4.0 * PI),
                ..Numerics::default()
            },
            ..RunConfig::default()
        }
    }

    pub fn is_milne_pinney(&self) -> bool {
        self.milne_pinney.is_some()
    }

    pub fn period(&self) -> f64 {
        if self.is_milne_pinney() {
            2.0 * PI
        } else {
            self.period.unwrap_or(2.0 * PI)
        }
    }

    pub fn params(&self) -> Environment {
        self.parameters.iter().map(|(k, v)| (k.as_str(), *v)).collect()
    }

    /// Sets a named parameter; for the oscillator preset `c` is its own field.
    pub fn set_parameter(&mut self, name: &str, value: f64) -> Result<(), CliError> {
        if let (Some(mp), "c") = (self.milne_pinney.as_mut(), name) {
            mp.c = value;
            return Ok(());
        }
        match self.parameters.get_mut(name) {
            Some(v) => {
                *v = value;
                Ok(())
            }
            None => Err(CliError::Validation(format!("swept parameter `{name}` is not declared in `parameters`"))),
        }
    }

    pub fn has_parameter(&self, name: &str) -> bool {
        (self.is_milne_pinney() && name == "c") || self.parameters.contains_key(name)
    }

    pub fn mp_params(&self) -> Result<Option<MPParams>, CliError> {
        let Some(mp) = &self.milne_pinney else { return Ok(None) };
        let omega: Expr = mp.omega.parse().map_err(|e| CliError::Validation(format!("milne_pinney.omega: {e}")))?;
        MPParams::with_parameters(mp.c, omega, self.params())
            .map(Some)
            .map_err(|e| CliError::Validation(format!("milne_pinney: {e}")))
    }

    pub fn algebra(&self) -> Result<LieAlgebra, CliError> {
        if self.is_milne_pinney() {
            return Ok(LieAlgebra::sp1r());
        }
        let spec = self
            .algebra
            .as_ref()
            .ok_or_else(|| CliError::Validation("config needs `algebra` or `milne_pinney`".into()))?;
        Ok(match spec {
            AlgebraSpec::Preset(name) => LieAlgebra::preset(name)?,
            AlgebraSpec::Explicit {
                dim,
                labels,
                brackets,
                complete,
                jacobi_tol,
            } => {
                let entries: Vec<BracketEntry> = brackets
                    .iter()
                    .map(|b| BracketEntry {
                        i: b.i,
                        j: b.j,
                        k: b.k,
                        c: b.c,
                    })
                    .collect();
                LieAlgebra::from_brackets(*dim, labels.clone(), &entries, *complete, jacobi_tol.unwrap_or(1e-12))?
            }
        })
    }

    pub fn curve(&self) -> Result<CoefficientCurve, CliError> {
        if let Some(mp) = self.mp_params()? {
            return Ok(mp.curve()?);
        }
        let texts = self
            .coefficients
            .as_ref()
            .ok_or_else(|| CliError::Validation("config needs `coefficients`".into()))?;
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        Ok(CoefficientCurve::parse(&refs, self.period(), self.periodic.unwrap_or(true), self.params())?)
    }

    pub fn space(&self) -> Result<PhaseSpace, CliError> {
        if self.is_milne_pinney() {
            return Ok(lie_floquet::milne_pinney::mp_space());
        }
        let mut space = match &self.coordinates {
            Some(c) => PhaseSpace::new(c.q.clone(), c.p.clone())?,
            None => PhaseSpace::canonical_1d(),
        };
        for (name, (op, v)) in &self.domain {
            let bound = match op.as_str() {
                ">" => Bound::Above(*v),
                "<" => Bound::Below(*v),
                other => return Err(CliError::Validation(format!("domain.{name}: unknown relation `{other}`"))),
            };
            space = space.with_bound(name, bound)?;
        }
        Ok(space)
    }

    pub fn basis(&self) -> Result<HamiltonianBasis, CliError> {
        if let Some(mp) = self.mp_params()? {
            return Ok(mp_basis(&mp)?);
        }
        let texts = self
            .hamiltonians
            .as_ref()
            .ok_or_else(|| CliError::Validation("config needs `hamiltonians`".into()))?;
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        Ok(HamiltonianBasis::parse(self.space()?, &refs, self.params())?)
    }

    /// Per-coordinate sampling interval: explicit `sample_box`, else a
    /// window inside the domain bounds.
    pub fn sample_ranges(&self, space: &PhaseSpace) -> Result<Vec<[f64; 2]>, CliError> {
        let explicit = self.sample_box.clone().unwrap_or_default();
        for name in explicit.keys() {
            if space.index_of(name).is_none() {
                return Err(CliError::Validation(format!("sample_box names unknown coordinate `{name}`")));
            }
        }
        let mp = self.is_milne_pinney();
        (0..space.dim())
            .map(|i| {
                let name = &space.names()[i];
                let range = if let Some(r) = explicit.get(name) {
                    *r
                } else if mp {
                    [SAMPLE_BOX.0[i], SAMPLE_BOX.1[i]]
                } else {
                    let (lo, hi) = (space.lower(i), space.upper(i));
                    match (lo.is_finite(), hi.is_finite()) {
                        (true, true) => [lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo)],
                        (true, false) => [lo + 0.5, lo + 3.0],
                        (false, true) => [hi - 3.0, hi - 0.5],
                        (false, false) => [-2.0, 2.0],
                    }
                };
                if range[0].is_nan() || range[1].is_nan() || range[0] >= range[1] {
                    return Err(CliError::Validation(format!("sample_box.{name}: empty interval")));
                }
                Ok(range)
            })
            .collect()
    }

    /// Seeded uniform points inside the sampling box and the domain.
    pub fn samples(&self, space: &PhaseSpace, count: usize, seed: u64) -> Result<Vec<Vec<f64>>, CliError> {
        let ranges = self.sample_ranges(space)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let mut tries = 0;
        while out.len() < count {
            let x: Vec<f64> = ranges.iter().map(|[a, b]| rng.gen_range(*a..*b)).collect();
            if space.contains(&x) {
                out.push(x);
            }
            tries += 1;
            if tries > 1000 * count.max(1) {
                return Err(CliError::Validation("sample box does not meet the domain".into()));
            }
        }
        Ok(out)
    }

    pub fn system(&self, seed: u64) -> Result<LieHamiltonianSystem, CliError> {
        let basis = self.basis()?;
        let count = self.numerics.closure_samples.unwrap_or(DEFAULT_CLOSURE_SAMPLES);
        let samples = self.samples(basis.space(), count, seed)?;
        Ok(LieHamiltonianSystem::new(
            Arc::new(self.algebra()?),
            Arc::new(basis),
            Arc::new(self.curve()?),
            &samples,
        )?)
    }
}
