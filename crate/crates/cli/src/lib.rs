//! Command-line front end for `lie-floquet`.
//!
//! [`run_command`] is the whole program; the binary only forwards its exit
//! code. Exit codes: 0 success, 1 validation error, 2 numerical failure,
//! 3 I/O error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use lie_floquet::algebra::{AlgebraError, AlgebraVector};
use lie_floquet::expr::ExprError;
use lie_floquet::floquet::{
    floquet_classify, fundamental_solution, integrate_euler, periodic_generators, FloquetError, FundamentalSolution,
};
use lie_floquet::hamiltonian::{conservation_report, first_integral, integrate_flow, DynamicsError};
use lie_floquet::pipeline::{find_periodic_integral, PipelineError};
use thiserror::Error;

pub mod config;
pub mod output;
pub mod sweep;

use config::{RunConfig, DEFAULT_STEPS};
use output::{fmt_f64, say, Table};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<AlgebraError> for CliError {
    fn from(e: AlgebraError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ExprError> for CliError {
    fn from(e: ExprError) -> Self {
        match e {
            ExprError::Domain(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<FloquetError> for CliError {
    fn from(e: FloquetError) -> Self {
        match e {
            FloquetError::Expr(x) => x.into(),
            FloquetError::Eigen(_) | FloquetError::NonInvertible { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Expr(x) => x.into(),
            DynamicsError::Floquet(x) => x.into(),
            DynamicsError::DomainExit { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Floquet(x) => x.into(),
            PipelineError::Dynamics(x) => x.into(),
            PipelineError::NoGeneratorFound { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lie-floquet", version, about = "Periodic first integrals via Floquet analysis of Euler systems")]
struct Cli {
    /// Config file (alternative to the positional argument)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RK4 steps per period
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Seed for sample-point generation
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for sweeps (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Algebra validation and structure report
    Algebra {
        #[command(subcommand)]
        action: AlgebraAction,
    },
    /// Euler system integration
    Euler {
        #[command(subcommand)]
        action: EulerAction,
    },
    /// Monodromy, multipliers and periodic generators
    Floquet {
        #[command(subcommand)]
        action: FloquetAction,
    },
    /// Periodic first integrals
    Integral {
        #[command(subcommand)]
        action: IntegralAction,
    },
    /// Bundled Milne-Pinney oscillator
    Mp {
        #[command(subcommand)]
        action: MpAction,
    },
    /// Parameter sweep of the multiplier spectrum
    Sweep { cfg: Option<PathBuf> },
}

#[derive(Debug, Subcommand)]
enum AlgebraAction {
    Check { cfg: Option<PathBuf> },
}

#[derive(Debug, Subcommand)]
enum EulerAction {
    Run { cfg: Option<PathBuf> },
}

#[derive(Debug, Subcommand)]
enum FloquetAction {
    Analyze { cfg: Option<PathBuf> },
}

#[derive(Debug, Subcommand)]
enum IntegralAction {
    Find { cfg: Option<PathBuf> },
    Verify { cfg: Option<PathBuf> },
}

#[derive(Debug, Subcommand)]
enum MpAction {
    Demo { cfg: Option<PathBuf> },
}

struct Ctx<'a> {
    out: &'a mut dyn Write,
    cfg_flag: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    steps: Option<usize>,
    seed: u64,
    jobs: usize,
}

impl Ctx<'_> {
    fn load(&self, positional: Option<PathBuf>) -> Result<RunConfig, CliError> {
        let path = positional
            .or_else(|| self.cfg_flag.clone())
            .ok_or_else(|| CliError::Validation("a config file is required".into()))?;
        RunConfig::load(&path)
    }

    fn dir(&self, cfg: &RunConfig) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    fn steps(&self, cfg: &RunConfig) -> usize {
        self.steps.or(cfg.numerics.steps_per_period).unwrap_or(DEFAULT_STEPS)
    }

    fn say(&mut self, line: &str) -> Result<(), CliError> {
        say(self.out, line)
    }
}

/// Runs the program with `argv` (including the program name) on the real
/// standard streams.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// As [`run_command`] with explicit output streams.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    1
                }
            };
        }
    };
    let mut ctx = Ctx {
        out,
        cfg_flag: cli.config,
        out_dir: cli.out,
        steps: cli.steps,
        seed: cli.seed,
        jobs: cli.jobs,
    };
    let result = match cli.command {
        Command::Algebra {
            action: AlgebraAction::Check { cfg },
        } => algebra_check(&mut ctx, cfg),
        Command::Euler {
            action: EulerAction::Run { cfg },
        } => euler_run(&mut ctx, cfg),
        Command::Floquet {
            action: FloquetAction::Analyze { cfg },
        } => floquet_analyze(&mut ctx, cfg),
        Command::Integral {
            action: IntegralAction::Find { cfg },
        } => integral_find(&mut ctx, cfg),
        Command::Integral {
            action: IntegralAction::Verify { cfg },
        } => integral_verify(&mut ctx, cfg),
        Command::Mp {
            action: MpAction::Demo { cfg },
        } => mp_demo(&mut ctx, cfg),
        Command::Sweep { cfg } => sweep_cmd(&mut ctx, cfg),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn join(v: &AlgebraVector) -> String {
    v.iter().map(|x| format!("{}", x + 0.0)).collect::<Vec<_>>().join(" ")
}

fn algebra_check(ctx: &mut Ctx, path: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = ctx.load(path)?;
    let a = cfg.algebra()?;
    ctx.say(&format!("algebra: dim {} [{}]", a.dim(), a.labels().join(", ")))?;
    ctx.say("antisymmetry: ok")?;
    ctx.say("jacobi: ok")?;
    ctx.say("killing gram:")?;
    let g = a.killing_gram();
    for r in 0..a.dim() {
        ctx.say(&format!("  {}", join(&g.row(r).transpose())))?;
    }
    let center = a.center();
    ctx.say(&format!("center: dim {}", center.dim()))?;
    for v in &center.vectors {
        ctx.say(&format!("  {}", join(v)))?;
    }
    ctx.say(&format!("semisimple: {}", if a.is_semisimple() { "yes" } else { "no" }))?;
    if cfg.hamiltonians.is_some() || cfg.is_milne_pinney() {
        let sys = cfg.system(ctx.seed)?;
        ctx.say(&format!("closure residual: {:e}", sys.closure_residual()))?;
    }
    Ok(())
}

fn euler_run(ctx: &mut Ctx, path: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = ctx.load(path)?;
    let a = cfg.algebra()?;
    let curve = cfg.curve()?;
    let xi0 = match &cfg.xi0 {
        Some(v) => AlgebraVector::from_vec(v.clone()),
        None => a.basis(0),
    };
    let period = cfg.period();
    let horizon = cfg.numerics.horizon.unwrap_or(period);
    let steps = ((ctx.steps(&cfg) as f64) * horizon / period).round().max(1.0) as usize;
    let traj = integrate_euler(&a, &curve, &xi0, horizon, steps)?;
    let rows: Vec<(f64, Vec<f64>)> = traj.iter().map(|(t, x)| (*t, x.iter().copied().collect())).collect();
    let path = output::write_xi(&ctx.dir(&cfg), "xi.csv", &rows, a.dim())?;
    let (t, last) = traj.last().expect("nonempty");
    ctx.say(&format!("xi({t}) = [{}]", join(last)))?;
    ctx.say(&format!("wrote {}", path.display()))
}

fn analyze(cfg: &RunConfig, steps: usize) -> Result<(Arc<FundamentalSolution>, lie_floquet::FloquetClassification), CliError> {
    let a = Arc::new(cfg.algebra()?);
    let curve = Arc::new(cfg.curve()?);
    let fund = Arc::new(fundamental_solution(&a, &curve, steps)?);
    let cls = floquet_classify(&a, fund.monodromy())?;
    Ok((fund, cls))
}

fn report_classification(ctx: &mut Ctx, cls: &lie_floquet::FloquetClassification) -> Result<(), CliError> {
    for p in &cls.pairs {
        ctx.say(&format!(
            "multiplier {:+.12} {:+.12}i  |l| = {:.12}  tag = {}",
            p.value.re,
            p.value.im,
            p.value.norm(),
            p.tag
        ))?;
    }
    ctx.say(&format!("class: {}", cls.summary()))
}

fn floquet_analyze(ctx: &mut Ctx, path: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = ctx.load(path)?;
    let (fund, cls) = analyze(&cfg, ctx.steps(&cfg))?;
    let a = fund.algebra().clone();
    let search = periodic_generators(&a, &fund, &cls, &a.center());
    let dir = ctx.dir(&cfg);
    let n = a.dim();
    let header: Vec<String> = output::numbered("m", n).collect();
    let mut t = Table::create(&dir, "monodromy.csv", &header)?;
    for r in 0..n {
        let row: Vec<f64> = fund.monodromy().row(r).iter().copied().collect();
        t.floats(&row)?;
    }
    t.finish()?;
    output::write_classification(&dir, "classification.csv", &cls)?;
    output::write_generators(&dir, "generators.csv", &search.generators, n)?;
    report_classification(ctx, &cls)?;
    for g in &search.generators {
        ctx.say(&format!("generator ({}, period x{}): [{}]", g.provenance, g.period_multiple, join(&g.vector)))?;
    }
    for s in &search.skipped {
        ctx.say(&format!("skipped pair {} ({}): {}", s.index + 1, s.tag, s.reason))?;
    }
    ctx.say(&format!("wrote monodromy.csv, classification.csv, generators.csv to {}", dir.display()))
}

/// `xi(t)` on an even grid over `multiple` periods.
fn xi_rows(fund: &FundamentalSolution, alpha: &AlgebraVector, multiple: u8) -> Result<Vec<(f64, Vec<f64>)>, CliError> {
    let steps = fund.steps() * multiple as usize;
    let h = fund.period() * multiple as f64 / steps as f64;
    (0..=steps)
        .map(|k| {
            let t = k as f64 * h;
            let xi = fund.evaluate(t)? * alpha;
            Ok((t, xi.iter().copied().collect()))
        })
        .collect()
}

fn integral_find(ctx: &mut Ctx, path: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = ctx.load(path)?;
    let sys = cfg.system(ctx.seed)?;
    ctx.say(&format!("closure residual: {:e}", sys.closure_residual()))?;
    let found = find_periodic_integral(&sys, ctx.steps(&cfg))?;
    let dir = ctx.dir(&cfg);
    let n = sys.algebra().dim();
    output::write_classification(&dir, "classification.csv", &found.classification)?;
    output::write_generators(&dir, "generators.csv", &found.search.generators, n)?;
    let rows = xi_rows(&found.fundamental, &found.generator.vector, found.generator.period_multiple)?;
    output::write_xi(&dir, "xi.csv", &rows, n)?;
    report_classification(ctx, &found.classification)?;
    let g = &found.generator;
    ctx.say(&format!(
        "integral generator ({}, period x{}): [{}]",
        g.provenance,
        g.period_multiple,
        join(&g.vector)
    ))?;
    ctx.say(&format!("wrote classification.csv, generators.csv, xi.csv to {}", dir.display()))
}

struct VerifyOutcome {
    worst_relative: f64,
    horizon: f64,
    x0: Vec<f64>,
}

fn verify(
    ctx: &mut Ctx,
    cfg: &RunConfig,
    dir: &Path,
    prefix: &str,
) -> Result<VerifyOutcome, CliError> {
    let sys = cfg.system(ctx.seed)?;
    ctx.say(&format!("closure residual: {:e}", sys.closure_residual()))?;
    let steps = ctx.steps(cfg);
    let found = find_periodic_integral(&sys, steps)?;
    let x0 = cfg
        .initial_state
        .clone()
        .ok_or_else(|| CliError::Validation("config needs `initial_state`".into()))?;
    let period = cfg.period();
    let horizon = cfg.numerics.horizon.unwrap_or(2.0 * period);
    let flow_steps = cfg
        .numerics
        .flow_steps
        .unwrap_or_else(|| ((steps as f64) * horizon / period).round().max(1.0) as usize);
    let traj = integrate_flow(&sys, &x0, horizon, flow_steps)?;
    let integrals = found
        .search
        .generators
        .iter()
        .map(|g| first_integral(&found.fundamental, sys.basis(), &g.vector).map(|i| i.with_period_multiple(g.period_multiple)))
        .collect::<Result<Vec<_>, _>>()?;

    let n = sys.algebra().dim();
    output::write_classification(dir, &format!("{prefix}classification.csv"), &found.classification)?;
    let rows = xi_rows(&found.fundamental, &found.generator.vector, found.generator.period_multiple)?;
    output::write_xi(dir, &format!("{prefix}xi.csv"), &rows, n)?;
    let header = output::trajectory_header(sys.space(), integrals.len());
    let mut table = Table::create(dir, &format!("{prefix}trajectory.csv"), &header)?;
    for (t, x) in traj.iter() {
        let mut row = vec![t];
        row.extend_from_slice(x);
        for i in &integrals {
            row.push(i.value(t, x)?);
        }
        table.floats(&row)?;
    }
    table.finish()?;

    report_classification(ctx, &found.classification)?;
    let mut worst: f64 = 0.0;
    for (k, (i, g)) in integrals.iter().zip(&found.search.generators).enumerate() {
        let r = conservation_report(i, &traj)?;
        worst = worst.max(r.relative_drift);
        ctx.say(&format!(
            "I_{} ({}, period x{}) [{}]: initial {}, max drift {:e}, relative drift {:e}",
            k + 1,
            g.provenance,
            g.period_multiple,
            join(&g.vector),
            fmt_f64(r.initial_value),
            r.max_abs_drift,
            r.relative_drift
        ))?;
    }
    Ok(VerifyOutcome {
        worst_relative: worst,
        horizon,
        x0,
    })
}

fn integral_verify(ctx: &mut Ctx, path: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = ctx.load(path)?;
    let dir = ctx.dir(&cfg);
    let v = verify(ctx, &cfg, &dir, "")?;
    ctx.say(&format!(
        "conservation: max relative drift {:e} over [0, {}] from {:?}",
        v.worst_relative, v.horizon, v.x0
    ))?;
    ctx.say(&format!("wrote classification.csv, xi.csv, trajectory.csv to {}", dir.display()))
}

fn mp_demo(ctx: &mut Ctx, path: Option<PathBuf>) -> Result<(), CliError> {
    let mut cfg = match path.or_else(|| ctx.cfg_flag.clone()) {
        Some(p) => RunConfig::load(&p)?,
        None => RunConfig::mp_default(),
    };
    if !cfg.is_milne_pinney() {
        return Err(CliError::Validation("mp demo needs a `milne_pinney` config".into()));
    }
    let defaults = RunConfig::mp_default();
    cfg.initial_state = cfg.initial_state.or(defaults.initial_state);
    cfg.numerics.horizon = cfg.numerics.horizon.or(defaults.numerics.horizon);
    let dir = ctx.dir(&cfg);
    let mp = cfg.milne_pinney.clone().expect("checked");
    ctx.say(&format!("Milne-Pinney: c = {}, omega(t) = {}", mp.c, mp.omega))?;
    let v = verify(ctx, &cfg, &dir, "mp_")?;
    ctx.say(&format!(
        "conservation: max relative drift {:e} over [0, {}] from {:?}",
        v.worst_relative, v.horizon, v.x0
    ))?;
    ctx.say(&format!(
        "wrote mp_classification.csv, mp_xi.csv, mp_trajectory.csv to {}",
        dir.display()
    ))
}

fn sweep_cmd(ctx: &mut Ctx, path: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = ctx.load(path)?;
    let steps = ctx.steps(&cfg);
    let cells = sweep::run_sweep(&cfg, steps, ctx.jobs)?;
    let dir = ctx.dir(&cfg);
    let path = sweep::write_sweep(&dir, &cfg, &cells)?;
    let failed = cells.iter().filter(|c| c.outcome.is_err()).count();
    ctx.say(&format!("{} cells, {} failed", cells.len(), failed))?;
    ctx.say(&format!("wrote {}", path.display()))
}
