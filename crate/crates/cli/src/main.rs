//! `lowrank-split` command-line interface.
//!
//! Exit codes: 0 success, 1 certificate without guarantee, 2 usage or
//! configuration error, 3 no limit point found, 4 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lowrank_split::certificate::{dual_from_primal, rank_bound_check, LimitMode};
use lowrank_split::experiment::{self, ExperimentConfig, Method, ProblemSource, StartPoint};
use lowrank_split::matrix::{read_matrix, write_matrix};
use lowrank_split::prox::{prox_conjugate, prox_equivalence_conditions, prox_scaled_gauge};
use lowrank_split::solver::DivergenceRule;
use lowrank_split::{prox_envelope, prox_nonconvex_rank, Error, Gauge, ObjectiveSpec, ScalarFn, Status};

#[derive(Parser)]
#[command(name = "lowrank-split", version, about = "Proximal splitting for rank-constrained matrix problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a proximal operator to a matrix file.
    Prox(ProxArgs),
    /// Solve a problem with Douglas-Rachford or forward-backward splitting.
    Solve(SolveArgs),
    /// Build a dual certificate from a solve's terminal Z and M.
    Certify(CertifyArgs),
    /// Sweep r over a Hankel approximation problem, convex vs non-convex.
    HankelBench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProxOp {
    Nonconvex,
    Envelope,
    Conjugate,
    Gauge,
}

#[derive(Clone, Copy, ValueEnum)]
enum KArg {
    HalfSquare,
    Identity,
}

impl From<KArg> for ScalarFn {
    fn from(k: KArg) -> Self {
        match k {
            KArg::HalfSquare => ScalarFn::HalfSquare,
            KArg::Identity => ScalarFn::Identity,
        }
    }
}

#[derive(Args)]
struct ProxArgs {
    #[arg(long, value_enum)]
    op: ProxOp,
    #[arg(long)]
    r: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, value_enum, default_value = "half-square")]
    k: KArg,
    /// Write the equivalence report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    input: PathBuf,
    output: PathBuf,
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// Problem file (`variant ...` followed by matrix blocks).
    #[arg(long, conflicts_with_all = ["triangle", "generator"])]
    problem: Option<PathBuf>,
    /// Triangular Hankel target of size N.
    #[arg(long, conflicts_with = "generator")]
    triangle: Option<usize>,
    /// Hankel target from a comma-separated generator of length 2n-1.
    #[arg(long)]
    generator: Option<String>,
}

impl ProblemArgs {
    fn source(&self) -> Result<ProblemSource, Error> {
        match (&self.problem, self.triangle, &self.generator) {
            (Some(p), _, _) => Ok(ProblemSource::File(p.clone())),
            (_, Some(n), _) => Ok(ProblemSource::Triangle(n)),
            (_, _, Some(g)) => format!("generator:{g}").parse(),
            _ => Err(Error::Config("one of --problem, --triangle, --generator is required".into())),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgArg {
    Convex,
    Nonconvex,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Dr,
    Fb,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    r: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, value_enum, default_value = "nonconvex")]
    algorithm: AlgArg,
    #[arg(long, value_enum, default_value = "dr")]
    method: MethodArg,
    /// `zero`, `random` or `file:PATH`.
    #[arg(long, default_value = "zero")]
    z0: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Stop when the fixed-point residual fails to improve for this many
    /// iterations; 0 disables the check.
    #[arg(long, default_value_t = 1000)]
    stall_window: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CertifyArgs {
    /// Terminal `Z` of a Douglas-Rachford run.
    #[arg(long)]
    z: PathBuf,
    /// Terminal primal iterate `M = prox(Z)`.
    #[arg(long)]
    m: PathBuf,
    #[arg(long)]
    r: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r_min: Option<usize>,
    #[arg(long)]
    r_max: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) => 4,
        Error::Provider { source, .. } => exit_code_for(source),
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Prox(a) => cmd_prox(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Certify(a) => cmd_certify(a),
        Command::HankelBench(a) => cmd_bench(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn cmd_prox(a: ProxArgs) -> Result<u8, Error> {
    let z = read_matrix(&a.input)?;
    let spec = ObjectiveSpec::new(a.k.into(), Gauge::L2, a.r, a.gamma)?;
    let out = match a.op {
        ProxOp::Nonconvex => prox_nonconvex_rank(&spec, &z)?.0,
        ProxOp::Envelope => prox_envelope(&spec, &z)?,
        ProxOp::Conjugate => prox_conjugate(&spec, &z)?,
        ProxOp::Gauge => prox_scaled_gauge(&spec, &z)?,
    };
    write_matrix(&a.output, &out)?;
    if spec.k == ScalarFn::HalfSquare {
        let rep = prox_equivalence_conditions(&spec, &z)?;
        let text = format!(
            "cond_i = {}\ncond_ii = {}\ncond_iii = {}\ncond_iv = {}\ngap = {:e}\ntie = {}\ntol = {:e}\n",
            rep.cond_i, rep.cond_ii, rep.cond_iii, rep.cond_iv, rep.gap, rep.tie_flag, rep.tol
        );
        match &a.report {
            Some(p) => lowrank_split::io::write_atomic(p, text.as_bytes())?,
            None => print!("{text}"),
        }
    }
    Ok(0)
}

fn cmd_solve(a: SolveArgs) -> Result<u8, Error> {
    let p = a.problem.source()?.load()?;
    let mut cfg = ExperimentConfig {
        gamma: a.gamma,
        rho: a.rho,
        seed: a.seed,
        max_iter: a.max_iter,
        tol: a.tol,
        ..Default::default()
    };
    cfg.z0 = a.z0.parse::<StartPoint>()?;
    cfg.apply_env()?;
    let z0 = cfg.start_point(p.shape())?;
    let mut scfg = cfg.solver_config(z0)?;
    scfg.divergence = DivergenceRule { window: a.stall_window, ..DivergenceRule::default() };
    let spec = ObjectiveSpec::half_square(a.r, a.gamma)?;
    let mode = match a.algorithm {
        AlgArg::Convex => LimitMode::Convex,
        AlgArg::Nonconvex => LimitMode::NonConvex,
    };
    let method = match a.method {
        MethodArg::Dr => Method::DouglasRachford,
        MethodArg::Fb => Method::ForwardBackward,
    };
    let outcome = experiment::solve(&p, &spec, mode, method, &scfg)?;
    outcome.write(&a.out)?;
    print!("{}", outcome.report());
    Ok(match outcome.trace.status {
        Status::Converged => 0,
        Status::Diverged | Status::MaxIterReached => 3,
    })
}

fn cmd_certify(a: CertifyArgs) -> Result<u8, Error> {
    let z = read_matrix(&a.z)?;
    let m = read_matrix(&a.m)?;
    let cert = dual_from_primal(&z, &m, a.gamma, a.r)?;
    print!("{}", cert.to_report());
    println!("rank_bound_ok = {}", rank_bound_check(&m, &cert, a.r));
    Ok(if cert.low_rank_guarantee { 0 } else { 1 })
}

fn cmd_bench(a: BenchArgs) -> Result<u8, Error> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = a.n {
        cfg.problem = ProblemSource::Triangle(n);
    }
    if let Some(v) = a.r_min {
        cfg.r_min = v;
    }
    if let Some(v) = a.r_max {
        cfg.r_max = Some(v);
    }
    if let Some(v) = a.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = a.max_iter {
        cfg.max_iter = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.out {
        cfg.output = v;
    }
    for kv in &a.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    cfg.apply_env()?;
    let res = experiment::run_hankel_bench(&cfg)?;
    for row in &res.rows {
        let fmt = |s: &Option<experiment::RunSummary>| {
            s.as_ref()
                .map_or("-".to_string(), |s| format!("{:?} rank {} err {:.6}", s.status, s.rank, s.relative_error))
        };
        println!("r = {}: convex {}; nonconvex {}", row.r, fmt(&row.convex), fmt(&row.nonconvex));
        if let Some(e) = &row.error {
            eprintln!("r = {}: {e}", row.r);
        }
    }
    println!("wrote {}", cfg.output.display());
    Ok(if res.has_hard_error() { 4 } else { 0 })
}
