//! CSV emission. Floats are written with 17 significant digits.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use lie_floquet::floquet::{FloquetClassification, PeriodicGenerator};
use lie_floquet::hamiltonian::PhaseSpace;

use crate::CliError;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Table {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl Table {
    pub fn create(dir: &Path, name: &str, header: &[String]) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut t = Table {
            path,
            writer: csv::Writer::from_writer(file),
        };
        t.row(header.iter().cloned())?;
        Ok(t)
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) -> Result<(), CliError> {
        self.writer
            .write_record(cells)
            .map_err(|e| CliError::Io(format!("{}: {e}", self.path.display())))
    }

    pub fn floats(&mut self, values: &[f64]) -> Result<(), CliError> {
        self.row(values.iter().map(|v| fmt_f64(*v)))
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.writer
            .flush()
            .map_err(|e| CliError::Io(format!("{}: {e}", self.path.display())))?;
        Ok(self.path)
    }
}

pub fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

/// `t, xi_1..xi_n`.
pub fn write_xi(dir: &Path, name: &str, rows: &[(f64, Vec<f64>)], n: usize) -> Result<PathBuf, CliError> {
    let header: Vec<String> = std::iter::once("t".to_string()).chain(numbered("xi", n)).collect();
    let mut t = Table::create(dir, name, &header)?;
    for (time, xi) in rows {
        let mut r = vec![*time];
        r.extend_from_slice(xi);
        t.floats(&r)?;
    }
    t.finish()
}

/// `re_lambda, im_lambda, abs_lambda, admissibility, tag`.
pub fn write_classification(dir: &Path, name: &str, cls: &FloquetClassification) -> Result<PathBuf, CliError> {
    let header = ["re_lambda", "im_lambda", "abs_lambda", "admissibility", "tag"].map(String::from);
    let mut t = Table::create(dir, name, &header)?;
    for p in &cls.pairs {
        t.row([
            fmt_f64(p.value.re),
            fmt_f64(p.value.im),
            fmt_f64(p.value.norm()),
            fmt_f64(p.admissibility),
            p.tag.as_str().to_string(),
        ])?;
    }
    t.finish()
}

/// `provenance, period_multiple, g_1..g_n`.
pub fn write_generators(dir: &Path, name: &str, gens: &[PeriodicGenerator], n: usize) -> Result<PathBuf, CliError> {
    let header: Vec<String> = ["provenance", "period_multiple"]
        .map(String::from)
        .into_iter()
        .chain(numbered("g", n))
        .collect();
    let mut t = Table::create(dir, name, &header)?;
    for g in gens {
        let mut r = vec![g.provenance.as_str().to_string(), g.period_multiple.to_string()];
        r.extend(g.vector.iter().map(|v| fmt_f64(*v)));
        t.row(r)?;
    }
    t.finish()
}

/// `t, q_1..q_m, p_1..p_m, I_1..I_r`.
pub fn trajectory_header(space: &PhaseSpace, integrals: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain(numbered("q", space.degrees()))
        .chain(numbered("p", space.degrees()))
        .chain(numbered("I", integrals))
        .collect()
}

pub fn say(out: &mut dyn Write, line: &str) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::Io(e.to_string()))
}
