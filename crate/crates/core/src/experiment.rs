//! Experiment configuration and the Hankel approximation benchmark.
//!
//! Configuration files are flat `key = value` lines; `#` starts a comment.
//! Recognized keys:
//!
//! | key          | values                                             |
//! |--------------|----------------------------------------------------|
//! | `problem`    | `triangle:N`, `generator:h1,h2,...`, `file:PATH`   |
//! | `r_min`      | integer, default 1                                 |
//! | `r_max`      | integer, default `q − 1`                           |
//! | `gamma`      | positive float, default 1                          |
//! | `rho`        | float in (0, 2), default 1                         |
//! | `z0`         | `zero`, `random`, `file:PATH`                      |
//! | `z0_scale`   | standard deviation of random starts, default 1     |
//! | `seed`       | integer, default 0                                 |
//! | `max_iter`   | integer, default 50000                             |
//! | `tol`        | fixed-point tolerance, default 1e-10               |
//! | `output`     | output directory                                   |
//! | `algorithms` | `convex`, `nonconvex`, `both`                      |

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::certificate::{
    dr_limit_point_check, dual_from_primal, problem_subgradient, DualCertificate, LimitMode, LimitPointReport,
};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::matrix::{self, frob_norm, numerical_rank, Matrix, DEFAULT_RANK_TOL};
use crate::problem::{self, lower_bound, objective_eval, ProblemSpec};
use crate::prox::ObjectiveSpec;
use crate::solver::{
    douglas_rachford_with_objective, forward_backward_with_objective, EnvelopeProx, IterateTrace, ProxOperator,
    RankProx, SolverConfig, Status,
};

/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "LOWRANK_SPLIT_SEED";

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Triangle(usize),
    Generator(Vec<f64>),
    File(PathBuf),
}

impl ProblemSource {
    pub fn load(&self) -> Result<ProblemSpec> {
        match self {
            Self::Triangle(n) => ProblemSpec::hankel(problem::build_triangle_hankel(*n)?),
            Self::Generator(seq) => {
                if seq.len().is_multiple_of(2) {
                    return Err(Error::Config(format!("generator needs 2n-1 values, got {}", seq.len())));
                }
                let n = seq.len().div_ceil(2);
                ProblemSpec::hankel(matrix::hankel_from_sequence(n, n, seq)?)
            }
            Self::File(p) => problem::read_problem(p),
        }
    }
}

impl FromStr for ProblemSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| Error::Config(format!("bad problem `{s}`")))?;
        match kind {
            "triangle" => {
                rest.trim().parse().map(Self::Triangle).map_err(|e| Error::Config(format!("bad size `{rest}`: {e}")))
            }
            "generator" => rest
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad generator value `{t}`: {e}"))))
                .collect::<Result<_>>()
                .map(Self::Generator),
            "file" => Ok(Self::File(PathBuf::from(rest.trim()))),
            _ => Err(Error::Config(format!("unknown problem kind `{kind}`"))),
        }
    }
}

impl std::fmt::Display for ProblemSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Triangle(n) => write!(f, "triangle:{n}"),
            Self::Generator(seq) => {
                let parts: Vec<String> = seq.iter().map(|v| format!("{v:e}")).collect();
                write!(f, "generator:{}", parts.join(","))
            }
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StartPoint {
    Zero,
    Random,
    File(PathBuf),
}

impl FromStr for StartPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Self::Zero),
            "random" => Ok(Self::Random),
            _ => match s.strip_prefix("file:") {
                Some(p) => Ok(Self::File(PathBuf::from(p))),
                None => Err(Error::Config(format!("bad z0 `{s}`"))),
            },
        }
    }
}

impl std::fmt::Display for StartPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Zero => f.write_str("zero"),
            Self::Random => f.write_str("random"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithms {
    Convex,
    NonConvex,
    Both,
}

impl Algorithms {
    pub fn convex(self) -> bool {
        matches!(self, Self::Convex | Self::Both)
    }

    pub fn nonconvex(self) -> bool {
        matches!(self, Self::NonConvex | Self::Both)
    }
}

impl FromStr for Algorithms {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convex" => Ok(Self::Convex),
            "nonconvex" => Ok(Self::NonConvex),
            "both" => Ok(Self::Both),
            _ => Err(Error::Config(format!("bad algorithms `{s}`"))),
        }
    }
}

impl std::fmt::Display for Algorithms {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Convex => "convex",
            Self::NonConvex => "nonconvex",
            Self::Both => "both",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSource,
    pub r_min: usize,
    pub r_max: Option<usize>,
    pub gamma: f64,
    pub rho: f64,
    pub z0: StartPoint,
    pub z0_scale: f64,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub output: PathBuf,
    pub algorithms: Algorithms,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSource::Triangle(10),
            r_min: 1,
            r_max: None,
            gamma: 1.0,
            rho: 1.0,
            z0: StartPoint::Zero,
            z0_scale: 1.0,
            seed: 0,
            max_iter: 50_000,
            tol: 1e-10,
            output: PathBuf::from("hankel-bench"),
            algorithms: Algorithms::Both,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| Error::Config(format!("bad value `{value}` for `{key}`: {e}")))
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "problem" => self.problem = value.parse()?,
            "r_min" => self.r_min = parse_value(key, value)?,
            "r_max" => self.r_max = Some(parse_value(key, value)?),
            "gamma" => self.gamma = parse_value(key, value)?,
            "rho" => self.rho = parse_value(key, value)?,
            "z0" => self.z0 = value.parse()?,
            "z0_scale" => self.z0_scale = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "max_iter" => self.max_iter = parse_value(key, value)?,
            "tol" => self.tol = parse_value(key, value)?,
            "output" => self.output = PathBuf::from(value),
            "algorithms" => self.algorithms = value.parse()?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn parse(src: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in src.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies the seed from [`SEED_ENV`] if it is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = parse_value(SEED_ENV, &v)?;
        }
        Ok(())
    }

    /// Effective configuration, readable back by [`Self::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "problem = {}", self.problem);
        let _ = writeln!(out, "r_min = {}", self.r_min);
        if let Some(r) = self.r_max {
            let _ = writeln!(out, "r_max = {r}");
        }
        let _ = writeln!(out, "gamma = {:e}", self.gamma);
        let _ = writeln!(out, "rho = {:e}", self.rho);
        let _ = writeln!(out, "z0 = {}", self.z0);
        let _ = writeln!(out, "z0_scale = {:e}", self.z0_scale);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "max_iter = {}", self.max_iter);
        let _ = writeln!(out, "tol = {:e}", self.tol);
        let _ = writeln!(out, "output = {}", self.output.display());
        let _ = writeln!(out, "algorithms = {}", self.algorithms);
        out
    }

    /// Inclusive rank range for a problem with `q = min(n, m)`.
    pub fn rank_range(&self, q: usize) -> Result<std::ops::RangeInclusive<usize>> {
        let hi = self.r_max.unwrap_or(q.saturating_sub(1).max(1));
        if self.r_min == 0 || self.r_min > hi || hi > q {
            return Err(Error::Config(format!("rank range {}..={hi} not within 1..={q}", self.r_min)));
        }
        Ok(self.r_min..=hi)
    }

    pub fn start_point(&self, shape: (usize, usize)) -> Result<Matrix> {
        match &self.z0 {
            StartPoint::Zero => Ok(Matrix::zeros(shape.0, shape.1)),
            StartPoint::Random => random_start(shape, self.z0_scale, self.seed),
            StartPoint::File(p) => {
                let z = matrix::read_matrix(p)?;
                if z.shape() != shape {
                    return Err(Error::ShapeMismatch { expected: shape, got: z.shape() });
                }
                Ok(z)
            }
        }
    }

    pub fn solver_config(&self, z0: Matrix) -> Result<SolverConfig> {
        let cfg = SolverConfig::new(z0).gamma(self.gamma).rho(self.rho).max_iter(self.max_iter).tol(self.tol);
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }
}

/// Gaussian matrix with entries of standard deviation `scale`.
pub fn random_start(shape: (usize, usize), scale: f64, seed: u64) -> Result<Matrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(shape.0, shape.1, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    DouglasRachford,
    ForwardBackward,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dr" => Ok(Self::DouglasRachford),
            "fb" => Ok(Self::ForwardBackward),
            _ => Err(Error::Config(format!("bad method `{s}`"))),
        }
    }
}

/// Result of one solve together with its post-hoc checks.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub mode: LimitMode,
    pub trace: IterateTrace,
    pub certificate: Option<DualCertificate>,
    pub limit_point: Option<LimitPointReport>,
    pub rank_x: usize,
    pub relative_error: f64,
}

/// Runs one convex or non-convex solve and, on convergence, builds the dual
/// certificate and the limit-point report.
pub fn solve(
    p: &ProblemSpec,
    spec: &ObjectiveSpec,
    mode: LimitMode,
    method: Method,
    cfg: &SolverConfig,
) -> Result<SolveOutcome> {
    let spec = spec.with_gamma(cfg.gamma);
    if spec.r > p.shape().0.min(p.shape().1) {
        return Err(Error::RankOutOfRange { r: spec.r, q: p.shape().0.min(p.shape().1) });
    }
    let env = EnvelopeProx(spec);
    let rank = RankProx(spec);
    let prox1: &dyn ProxOperator = match mode {
        LimitMode::Convex => &env,
        LimitMode::NonConvex => &rank,
    };
    let objective = |m: &Matrix| {
        objective_eval(p, &spec, m).map_or(f64::NAN, |v| match mode {
            LimitMode::Convex => v.envelope,
            LimitMode::NonConvex => v.nonconvex,
        })
    };
    let trace = match method {
        Method::DouglasRachford => douglas_rachford_with_objective(prox1, p, cfg, Some(&objective))?,
        Method::ForwardBackward => forward_backward_with_objective(prox1, p, cfg, Some(&objective))?,
    };
    let rank_x = numerical_rank(&trace.x, DEFAULT_RANK_TOL);
    let relative_error = p.relative_error(&trace.x);
    let (mut certificate, mut limit_point) = (None, None);
    if trace.converged() && method == Method::DouglasRachford {
        certificate = Some(dual_from_primal(&trace.z, &trace.x, cfg.gamma, spec.r)?);
        if rank_x <= spec.r {
            let sg = problem_subgradient(p);
            limit_point = Some(dr_limit_point_check(&trace.x, &trace.z, cfg.gamma, spec.r, mode, &sg, 1e-6)?);
        }
    }
    Ok(SolveOutcome { mode, trace, certificate, limit_point, rank_x, relative_error })
}

impl SolveOutcome {
    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "status = {:?}", self.trace.status);
        let _ = writeln!(out, "iterations = {}", self.trace.iterations);
        let _ = writeln!(out, "last_res_fix = {:e}", self.trace.last_res_fix);
        let _ = writeln!(out, "min_res_fix = {:e}", self.trace.min_res_fix);
        let _ = writeln!(out, "rank_x = {}", self.rank_x);
        let _ = writeln!(out, "relative_error = {:e}", self.relative_error);
        if let Some(c) = &self.certificate {
            out.push_str(&c.to_report());
        }
        if let Some(l) = &self.limit_point {
            let _ = writeln!(out, "limit_orth_left = {:e}", l.orth_left);
            let _ = writeln!(out, "limit_orth_right = {:e}", l.orth_right);
            let _ = writeln!(out, "limit_subgrad_residual = {:e}", l.subgrad_residual);
            let _ = writeln!(out, "limit_sigma_bound_ok = {}", l.sigma_bound_ok);
        }
        out
    }

    /// Writes `trace.csv`, `x.mat`, `z.mat` and `report.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("trace.csv"), self.trace.to_csv().as_bytes())?;
        matrix::write_matrix(dir.join("x.mat"), &self.trace.x)?;
        matrix::write_matrix(dir.join("z.mat"), &self.trace.z)?;
        write_atomic(&dir.join("report.txt"), self.report().as_bytes())
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: Status,
    pub iterations: usize,
    pub last_res_fix: f64,
    pub rank: usize,
    pub relative_error: f64,
    pub x: Matrix,
    pub z: Matrix,
    pub trace_file: String,
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub r: usize,
    pub convex: Option<RunSummary>,
    pub nonconvex: Option<RunSummary>,
    /// Value of the convex relaxation at its solution.
    pub lower_bound_value: f64,
    /// The same bound expressed as a relative error `√(2 LB)/‖H‖_F`.
    pub lower_bound_rel: f64,
    pub certificate: Option<DualCertificate>,
    /// Hard error for this rank, if any.
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub n: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchResult {
    /// Best relative error among convex solutions of rank at most `r`,
    /// taken over every relaxation parameter in the sweep.
    pub fn convex_feasible_error(&self, r: usize) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|row| row.convex.as_ref())
            .filter(|c| c.status == Status::Converged && c.rank <= r)
            .map(|c| c.relative_error)
            .min_by(f64::total_cmp)
    }

    pub fn rank_conv_csv(&self) -> String {
        let mut out = String::from("r,rank_convex\n");
        for row in &self.rows {
            let rank = row.convex.as_ref().map_or(String::new(), |c| c.rank.to_string());
            let _ = writeln!(out, "{},{rank}", row.r);
        }
        out
    }

    /// Columns: budget, convex feasible error, non-convex error, lower bound.
    pub fn err_csv(&self) -> String {
        let mut out = String::from("rank,err_convex,err_nonconvex,lower_bound\n");
        let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:e}"));
        for row in &self.rows {
            let nc = row.nonconvex.as_ref().filter(|s| s.status == Status::Converged).map(|s| s.relative_error);
            let lb = row.lower_bound_rel.is_finite().then_some(row.lower_bound_rel);
            let _ = writeln!(out, "{},{},{},{}", row.r, fmt(self.convex_feasible_error(row.r)), fmt(nc), fmt(lb));
        }
        out
    }

    /// One line per rank with both runs' status and the trace files they came from.
    pub fn runs_csv(&self) -> String {
        let mut out = String::from(
            "r,convex_status,convex_iterations,convex_res_fix,convex_rank,convex_err,nonconvex_status,nonconvex_iterations,nonconvex_res_fix,nonconvex_rank,nonconvex_err,lower_bound_value,epsilon,tie_multiplicity,guarantee,convex_trace,nonconvex_trace,error\n",
        );
        let run = |s: &Option<RunSummary>| match s {
            Some(s) => {
                format!("{:?},{},{:e},{},{:e}", s.status, s.iterations, s.last_res_fix, s.rank, s.relative_error)
            }
            None => ",,,,".into(),
        };
        for row in &self.rows {
            let cert = row
                .certificate
                .as_ref()
                .map_or(",,".into(), |c| format!("{:e},{},{}", c.epsilon, c.tie_multiplicity, c.low_rank_guarantee));
            let _ = writeln!(
                out,
                "{},{},{},{:e},{cert},{},{},{}",
                row.r,
                run(&row.convex),
                run(&row.nonconvex),
                row.lower_bound_value,
                row.convex.as_ref().map_or("", |s| s.trace_file.as_str()),
                row.nonconvex.as_ref().map_or("", |s| s.trace_file.as_str()),
                row.error.as_deref().unwrap_or("").replace(',', ";"),
            );
        }
        out
    }

    pub fn has_hard_error(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }
}

fn run_one(
    p: &ProblemSpec,
    spec: &ObjectiveSpec,
    mode: LimitMode,
    cfg: &SolverConfig,
    out: Option<&Path>,
) -> Result<(RunSummary, IterateTrace)> {
    let tag = match mode {
        LimitMode::Convex => "convex",
        LimitMode::NonConvex => "nonconvex",
    };
    let res = solve(p, spec, mode, Method::DouglasRachford, cfg)?;
    let trace_file = format!("trace_{tag}_r{}.csv", spec.r);
    if let Some(dir) = out {
        write_atomic(&dir.join(&trace_file), res.trace.to_csv().as_bytes())?;
    }
    let t = res.trace;
    Ok((
        RunSummary {
            status: t.status,
            iterations: t.iterations,
            last_res_fix: t.last_res_fix,
            rank: res.rank_x,
            relative_error: res.relative_error,
            x: t.x.clone(),
            z: t.z.clone(),
            trace_file,
        },
        t,
    ))
}

fn bench_rank(p: &ProblemSpec, cfg: &ExperimentConfig, r: usize, z0: &Matrix, out: Option<&Path>) -> Result<BenchRow> {
    let spec = ObjectiveSpec::half_square(r, cfg.gamma)?;
    let scfg = cfg.solver_config(z0.clone())?;
    let h_norm = frob_norm(p.target());
    let mut row = BenchRow {
        r,
        convex: None,
        nonconvex: None,
        lower_bound_value: f64::NAN,
        lower_bound_rel: f64::NAN,
        certificate: None,
        error: None,
    };
    if cfg.algorithms.convex() {
        let (summary, trace) = run_one(p, &spec, LimitMode::Convex, &scfg, out)?;
        if trace.converged() {
            let lb = lower_bound(p, &spec, &trace.x)?;
            row.lower_bound_value = lb;
            row.lower_bound_rel = (2.0 * lb.max(0.0)).sqrt() / h_norm;
            row.certificate = Some(dual_from_primal(&trace.z, &trace.x, cfg.gamma, r)?);
        }
        row.convex = Some(summary);
    }
    if cfg.algorithms.nonconvex() {
        row.nonconvex = Some(run_one(p, &spec, LimitMode::NonConvex, &scfg, out)?.0);
    }
    Ok(row)
}

/// Runs the convex relaxation and non-convex Douglas-Rachford for every rank
/// in the configured range. Ranks run on separate threads; results do not
/// depend on scheduling. With `out` set, per-rank trace files are written
/// there as each run finishes.
pub fn hankel_bench(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<BenchResult> {
    let p = cfg.problem.load()?;
    let (n, m) = p.shape();
    let range = cfg.rank_range(n.min(m))?;
    let z0 = cfg.start_point((n, m))?;
    cfg.solver_config(z0.clone())?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    let rows = std::thread::scope(|s| {
        let handles: Vec<_> = range
            .map(|r| {
                let (p, z0) = (&p, &z0);
                (r, s.spawn(move || bench_rank(p, cfg, r, z0, out)))
            })
            .collect();
        handles
            .into_iter()
            .map(|(r, h)| {
                let res = h.join().unwrap_or_else(|_| Err(Error::Numerical(format!("worker for r = {r} panicked"))));
                res.unwrap_or_else(|e| BenchRow {
                    r,
                    convex: None,
                    nonconvex: None,
                    lower_bound_value: f64::NAN,
                    lower_bound_rel: f64::NAN,
                    certificate: None,
                    error: Some(e.to_string()),
                })
            })
            .collect()
    });
    Ok(BenchResult { n, rows })
}

/// Runs [`hankel_bench`] and writes `rank_conv.csv`, `err.csv`, `runs.csv`,
/// `config.txt` and the per-rank traces into `cfg.output`.
pub fn run_hankel_bench(cfg: &ExperimentConfig) -> Result<BenchResult> {
    let dir = cfg.output.as_path();
    let res = hankel_bench(cfg, Some(dir))?;
    write_atomic(&dir.join("config.txt"), cfg.to_text().as_bytes())?;
    write_atomic(&dir.join("rank_conv.csv"), res.rank_conv_csv().as_bytes())?;
    write_atomic(&dir.join("err.csv"), res.err_csv().as_bytes())?;
    write_atomic(&dir.join("runs.csv"), res.runs_csv().as_bytes())?;
    Ok(res)
}
