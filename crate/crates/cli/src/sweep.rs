//! Parameter sweeps producing stability-chart tables.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use lie_floquet::floquet::{floquet_classify, fundamental_solution, periodic_generators, FloquetTag};
use rayon::prelude::*;

use crate::config::{Axis, RunConfig};
use crate::output::{fmt_f64, Table};
use crate::CliError;

const TAGS: [FloquetTag; 5] = [
    FloquetTag::Fixed,
    FloquetTag::Antiperiodic,
    FloquetTag::Elliptic,
    FloquetTag::Null,
    FloquetTag::OffCircle,
];

/// One grid cell's outcome.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub point: Vec<f64>,
    pub outcome: Result<CellSummary, String>,
}

#[derive(Debug, Clone)]
pub struct CellSummary {
    pub class: FloquetTag,
    pub max_circle_deviation: f64,
    pub max_modulus: f64,
    pub counts: [usize; 5],
    pub generators: usize,
    pub multipliers: Vec<(f64, f64)>,
}

pub fn axis_values(axis: &Axis) -> Vec<f64> {
    let n = axis.count;
    (0..n)
        .map(|i| {
            if i + 1 == n {
                axis.max
            } else {
                axis.min + (axis.max - axis.min) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Grid points in row-major order (first axis slowest).
pub fn grid(axes: &[Axis]) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        let vals = axis_values(axis);
        points = points
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    points
}

pub fn check_spec(base: &RunConfig) -> Result<&[Axis], CliError> {
    let spec = base
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Validation("config has no `sweep` section".into()))?;
    if spec.axes.is_empty() || spec.axes.len() > 2 {
        return Err(CliError::Validation("sweep needs one or two axes".into()));
    }
    for (i, a) in spec.axes.iter().enumerate() {
        if a.count < 2 {
            return Err(CliError::Validation(format!("sweep axis `{}`: count must be at least 2", a.name)));
        }
        if !a.min.is_finite() || !a.max.is_finite() || a.min >= a.max {
            return Err(CliError::Validation(format!("sweep axis `{}`: need finite min < max", a.name)));
        }
        if !base.has_parameter(&a.name) {
            return Err(CliError::Validation(format!("sweep axis `{}` is not a declared parameter", a.name)));
        }
        if spec.axes[..i].iter().any(|b| b.name == a.name) {
            return Err(CliError::Validation(format!("sweep axis `{}` appears twice", a.name)));
        }
    }
    Ok(&spec.axes)
}

fn run_cell(base: &RunConfig, axes: &[Axis], point: &[f64], steps: usize) -> Result<CellSummary, String> {
    let mut cfg = base.clone();
    for (a, v) in axes.iter().zip(point) {
        cfg.set_parameter(&a.name, *v).map_err(|e| e.to_string())?;
    }
    let algebra = Arc::new(cfg.algebra().map_err(|e| e.to_string())?);
    let curve = Arc::new(cfg.curve().map_err(|e| e.to_string())?);
    let fund = fundamental_solution(&algebra, &curve, steps).map_err(|e| e.to_string())?;
    let cls = floquet_classify(&algebra, fund.monodromy()).map_err(|e| e.to_string())?;
    let search = periodic_generators(&algebra, &fund, &cls, &algebra.center());
    Ok(CellSummary {
        class: cls.summary(),
        max_circle_deviation: cls.max_circle_deviation(),
        max_modulus: cls.max_modulus(),
        counts: TAGS.map(|t| cls.count(t)),
        generators: search.generators.len(),
        multipliers: cls.values().iter().map(|z| (z.re, z.im)).collect(),
    })
}

/// Evaluates every cell, in parallel when `jobs != 1`, preserving grid order.
pub fn run_sweep(base: &RunConfig, steps: usize, jobs: usize) -> Result<Vec<CellResult>, CliError> {
    let axes = check_spec(base)?.to_vec();
    let points = grid(&axes);
    let work = |p: &Vec<f64>| CellResult {
        point: p.clone(),
        outcome: run_cell(base, &axes, p, steps),
    };
    if jobs == 1 {
        return Ok(points.iter().map(work).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    Ok(pool.install(|| points.par_iter().map(work).collect()))
}

pub fn write_sweep(dir: &Path, base: &RunConfig, cells: &[CellResult]) -> Result<PathBuf, CliError> {
    let axes = check_spec(base)?;
    let n = base.algebra()?.dim();
    let mut header: Vec<String> = axes.iter().map(|a| a.name.clone()).collect();
    header.extend(
        ["class", "max_circle_deviation", "max_modulus"]
            .iter()
            .map(|s| s.to_string()),
    );
    header.extend(TAGS.iter().map(|t| format!("n_{}", t.as_str().replace('-', "_"))));
    header.push("generators".into());
    for k in 1..=n {
        header.push(format!("lambda_{k}_re"));
        header.push(format!("lambda_{k}_im"));
    }
    header.push("error".into());
    let mut t = Table::create(dir, "sweep.csv", &header)?;
    for cell in cells {
        let mut row: Vec<String> = cell.point.iter().map(|v| fmt_f64(*v)).collect();
        match &cell.outcome {
            Ok(s) => {
                row.push(s.class.as_str().into());
                row.push(fmt_f64(s.max_circle_deviation));
                row.push(fmt_f64(s.max_modulus));
                row.extend(s.counts.iter().map(|c| c.to_string()));
                row.push(s.generators.to_string());
                for k in 0..n {
                    match s.multipliers.get(k) {
                        Some((re, im)) => {
                            row.push(fmt_f64(*re));
                            row.push(fmt_f64(*im));
                        }
                        None => row.extend([String::new(), String::new()]),
                    }
                }
                row.push(String::new());
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), header.len() - axes.len() - 1));
                row.push(e.clone());
            }
        }
        t.row(row)?;
    }
    t.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_row_major() {
        let axes = vec![
            Axis {
                name: "a".into(),
                min: 0.0,
                max: 1.0,
                count: 2,
            },
            Axis {
                name: "b".into(),
                min: 10.0,
                max: 30.0,
                count: 3,
            },
        ];
        let g = grid(&axes);
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], vec![0.0, 10.0]);
        assert_eq!(g[1], vec![0.0, 20.0]);
        assert_eq!(g[3], vec![1.0, 10.0]);
        assert_eq!(g[5], vec![1.0, 30.0]);
    }

    #[test]
    fn endpoints_are_exact() {
        let v = axis_values(&Axis {
            name: "w0".into(),
            min: 0.05,
            max: 0.95,
            count: 19,
        });
        assert_eq!(v[0], 0.05);
        assert_eq!(v[18], 0.95);
        assert!((v[4] - 0.25).abs() < 1e-15);
    }
}
