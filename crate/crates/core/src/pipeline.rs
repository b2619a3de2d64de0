//! From a system of Lie type to a periodic first integral.

use std::sync::Arc;

use thiserror::Error;

use crate::floquet::{
    floquet_classify, fundamental_solution, periodic_generators, preferred_generator, FloquetClassification,
    FloquetError, FundamentalSolution, GeneratorSearch, PeriodicGenerator,
};
use crate::hamiltonian::{first_integral, DynamicsError, FirstIntegral, LieHamiltonianSystem};

#[derive(Debug, Clone, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Floquet(#[from] FloquetError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("no periodic generator found (spectrum: {})", describe(.classification))]
    NoGeneratorFound {
        classification: FloquetClassification,
        search: GeneratorSearch,
    },
}

fn describe(cls: &FloquetClassification) -> String {
    cls.pairs
        .iter()
        .map(|p| format!("{:.6}{:+.6}i {}", p.value.re, p.value.im, p.tag))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Everything the pipeline computed on the way to its integral.
#[derive(Debug, Clone)]
pub struct PeriodicIntegral {
    pub integral: FirstIntegral,
    pub generator: PeriodicGenerator,
    pub classification: FloquetClassification,
    pub search: GeneratorSearch,
    pub fundamental: Arc<FundamentalSolution>,
}

/// Monodromy, classification, generator search and the preferred generator's
/// first integral.
pub fn find_periodic_integral(sys: &LieHamiltonianSystem, steps_per_period: usize) -> Result<PeriodicIntegral, PipelineError> {
    let algebra = sys.algebra();
    let fundamental = Arc::new(fundamental_solution(algebra, sys.curve(), steps_per_period)?);
    let classification = floquet_classify(algebra, fundamental.monodromy())?;
    let search = periodic_generators(algebra, &fundamental, &classification, &algebra.center());
    let generator = match preferred_generator(&fundamental, &search.generators) {
        Some(g) => g.clone(),
        None => return Err(PipelineError::NoGeneratorFound { classification, search }),
    };
    let integral = first_integral(&fundamental, sys.basis(), &generator.vector)?.with_period_multiple(generator.period_multiple);
    Ok(PeriodicIntegral {
        integral,
        generator,
        classification,
        search,
        fundamental,
    })
}
