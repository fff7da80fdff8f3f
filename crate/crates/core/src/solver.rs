//! Douglas-Rachford and forward-backward drivers.
//!
//! Both drivers are generic over [`ProxOperator`] / [`GradientOperator`]
//! providers and share the stopping logic in [`Monitor`]. Stopping rules are
//! fixed-point residual thresholds chosen by the caller; there is no
//! canonical criterion for these methods.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matrix::{frob_dist, frob_norm, numerical_rank, Matrix, DEFAULT_RANK_TOL};
use crate::prox::{self, ObjectiveSpec};

#[derive(Debug, Clone)]
pub struct ProxOutput {
    pub value: Matrix,
    /// Set when the operator is set-valued at the query point and `value` is
    /// one deterministic selection.
    pub tie: bool,
}

impl From<Matrix> for ProxOutput {
    fn from(value: Matrix) -> Self {
        Self { value, tie: false }
    }
}

/// `Z ↦ prox_{γ f}(Z)`.
pub trait ProxOperator {
    fn prox(&self, gamma: f64, z: &Matrix) -> Result<ProxOutput>;
}

impl<F> ProxOperator for F
where
    F: Fn(f64, &Matrix) -> Result<Matrix>,
{
    fn prox(&self, gamma: f64, z: &Matrix) -> Result<ProxOutput> {
        self(gamma, z).map(ProxOutput::from)
    }
}

pub trait GradientOperator {
    fn gradient(&self, x: &Matrix) -> Result<Matrix>;
    fn lipschitz(&self) -> f64;
}

/// Prox of `f = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroProx;

impl ProxOperator for ZeroProx {
    fn prox(&self, _gamma: f64, z: &Matrix) -> Result<ProxOutput> {
        Ok(z.clone().into())
    }
}

/// `f₁ = k(‖·‖_g) + χ_{rank ≤ r}`; the step weight comes from the driver.
#[derive(Debug, Clone, Copy)]
pub struct RankProx(pub ObjectiveSpec);

impl ProxOperator for RankProx {
    fn prox(&self, gamma: f64, z: &Matrix) -> Result<ProxOutput> {
        let (value, tie) = prox::prox_nonconvex_rank(&self.0.with_gamma(gamma), z)?;
        Ok(ProxOutput { value, tie })
    }
}

/// Convex envelope `k(‖·‖_{g,r*})`.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeProx(pub ObjectiveSpec);

impl ProxOperator for EnvelopeProx {
    fn prox(&self, gamma: f64, z: &Matrix) -> Result<ProxOutput> {
        prox::prox_envelope(&self.0.with_gamma(gamma), z).map(ProxOutput::from)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceRule {
    /// Stop when `‖Z_k‖_F` exceeds this.
    pub max_norm: f64,
    /// Iterations per stagnation window; 0 disables the stagnation test.
    pub window: usize,
    /// Required decrease of the best residual over one window.
    pub min_improvement: f64,
}

impl Default for DivergenceRule {
    fn default() -> Self {
        Self { max_norm: 1e12, window: 1000, min_improvement: 1e-12 }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub gamma: f64,
    pub rho: f64,
    pub max_iter: usize,
    pub tol_fixed_point: f64,
    pub tol_step: f64,
    pub record_trace: bool,
    pub z0: Matrix,
    pub divergence: DivergenceRule,
}

impl SolverConfig {
    /// `γ = 1`, `ρ = 1`, 50 000 iterations, tolerances `1e-9`.
    pub fn new(z0: Matrix) -> Self {
        Self {
            gamma: 1.0,
            rho: 1.0,
            max_iter: 50_000,
            tol_fixed_point: 1e-9,
            tol_step: 1e-9,
            record_trace: true,
            z0,
            divergence: DivergenceRule::default(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(Matrix::zeros(rows, cols))
    }

    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn max_iter(mut self, n: usize) -> Self {
        self.max_iter = n;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol_fixed_point = tol;
        self.tol_step = tol;
        self
    }

    pub fn record_trace(mut self, on: bool) -> Self {
        self.record_trace = on;
        self
    }

    pub fn divergence(mut self, rule: DivergenceRule) -> Self {
        self.divergence = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.rho > 0.0 && self.rho < 2.0) {
            return Err(Error::Config(format!("rho must lie in (0, 2), got {}", self.rho)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        if !(self.tol_fixed_point > 0.0 && self.tol_step > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterReached,
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub k: usize,
    pub res_fix: f64,
    pub res_step: f64,
    /// Objective at `X_k` when an objective was supplied, NaN otherwise.
    pub objective: f64,
    pub rank_x: usize,
}

#[derive(Debug, Clone)]
pub struct IterateTrace {
    pub records: Vec<IterRecord>,
    pub status: Status,
    pub iterations: usize,
    pub last_res_fix: f64,
    /// Smallest fixed-point residual seen over the whole run.
    pub min_res_fix: f64,
    /// Iterations at which a prox provider reported a set-valued selection.
    pub tie_iterations: Vec<usize>,
    pub x: Matrix,
    pub y: Matrix,
    pub z: Matrix,
}

impl IterateTrace {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    /// CSV with header `iter,res_fix,res_step,objective,rank_x`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,res_fix,res_step,objective,rank_x\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{:e},{:e},{:e},{}", r.k, r.res_fix, r.res_step, r.objective, r.rank_x);
        }
        out
    }
}

/// Stopping and divergence bookkeeping shared by the drivers.
#[derive(Debug)]
pub struct Monitor {
    tol_fix: f64,
    tol_step: f64,
    rule: DivergenceRule,
    best: f64,
    best_at_window_start: f64,
    pub min_res_fix: f64,
}

impl Monitor {
    pub fn new(cfg: &SolverConfig) -> Self {
        Self {
            tol_fix: cfg.tol_fixed_point,
            tol_step: cfg.tol_step,
            rule: cfg.divergence,
            best: f64::INFINITY,
            best_at_window_start: f64::INFINITY,
            min_res_fix: f64::INFINITY,
        }
    }

    /// Returns a terminal status once iteration `k` (1-based) settles the run.
    pub fn observe(&mut self, k: usize, res_fix: f64, res_step: f64, z_norm: f64) -> Option<Status> {
        self.min_res_fix = self.min_res_fix.min(res_fix);
        if res_fix <= self.tol_fix && res_step <= self.tol_step {
            return Some(Status::Converged);
        }
        if !z_norm.is_finite() || z_norm > self.rule.max_norm || !res_fix.is_finite() {
            return Some(Status::Diverged);
        }
        self.best = self.best.min(res_fix);
        if self.rule.window > 0 && k.is_multiple_of(self.rule.window) {
            let stalled = self.best_at_window_start - self.best < self.rule.min_improvement;
            self.best_at_window_start = self.best;
            if stalled {
                return Some(Status::Diverged);
            }
        }
        None
    }
}

type Objective<'a> = Option<&'a dyn Fn(&Matrix) -> f64>;

/// One Douglas-Rachford sequence advanced step by step:
///
/// ```text
/// X_k = prox_{γ f₁}(Z_{k−1})
/// Y_k = prox_{γ f₂}(2 X_k − Z_{k−1})
/// Z_k = Z_{k−1} + ρ (Y_k − X_k)
/// ```
pub struct DrStepper<'a> {
    prox1: &'a dyn ProxOperator,
    prox2: &'a dyn ProxOperator,
    gamma: f64,
    rho: f64,
    pub k: usize,
    pub x: Matrix,
    pub y: Matrix,
    pub z: Matrix,
    pub last_tie: bool,
}

impl<'a> DrStepper<'a> {
    pub fn new(prox1: &'a dyn ProxOperator, prox2: &'a dyn ProxOperator, cfg: &SolverConfig) -> Self {
        Self {
            prox1,
            prox2,
            gamma: cfg.gamma,
            rho: cfg.rho,
            k: 0,
            x: cfg.z0.clone(),
            y: cfg.z0.clone(),
            z: cfg.z0.clone(),
            last_tie: false,
        }
    }

    /// Advances one iteration; returns `(‖Y_k − X_k‖_F, ‖Z_k − Z_{k−1}‖_F)`.
    pub fn step(&mut self) -> Result<(f64, f64)> {
        let k = self.k + 1;
        let wrap = |e| Error::Provider { iteration: k, source: Box::new(e) };
        let out = self.prox1.prox(self.gamma, &self.z).map_err(wrap)?;
        let x = out.value;
        x.ensure_same_shape(&self.z).map_err(wrap)?;
        let reflected = &x.scale(2.0) - &self.z;
        let y = self.prox2.prox(self.gamma, &reflected).map_err(wrap)?.value;
        let diff = &y - &x;
        let res_fix = frob_norm(&diff);
        let z = &self.z + &diff.scale(self.rho);
        let res_step = self.rho * res_fix;
        self.k = k;
        self.last_tie = out.tie;
        self.x = x;
        self.y = y;
        self.z = z;
        Ok((res_fix, res_step))
    }
}

pub fn douglas_rachford(
    prox1: &dyn ProxOperator,
    prox2: &dyn ProxOperator,
    cfg: &SolverConfig,
) -> Result<IterateTrace> {
    douglas_rachford_with_objective(prox1, prox2, cfg, None)
}

/// Douglas-Rachford with an objective evaluated at every recorded `X_k`.
pub fn douglas_rachford_with_objective(
    prox1: &dyn ProxOperator,
    prox2: &dyn ProxOperator,
    cfg: &SolverConfig,
    objective: Objective<'_>,
) -> Result<IterateTrace> {
    cfg.validate()?;
    let mut st = DrStepper::new(prox1, prox2, cfg);
    let mut mon = Monitor::new(cfg);
    let mut records = Vec::new();
    let mut ties = Vec::new();
    let mut status = Status::MaxIterReached;
    let mut last = f64::INFINITY;
    while st.k < cfg.max_iter {
        let (res_fix, res_step) = st.step()?;
        last = res_fix;
        if st.last_tie {
            ties.push(st.k);
        }
        if cfg.record_trace {
            records.push(record(st.k, res_fix, res_step, &st.x, objective));
        }
        if let Some(s) = mon.observe(st.k, res_fix, res_step, frob_norm(&st.z)) {
            status = s;
            break;
        }
    }
    Ok(IterateTrace {
        records,
        status,
        iterations: st.k,
        last_res_fix: last,
        min_res_fix: mon.min_res_fix,
        tie_iterations: ties,
        x: st.x,
        y: st.y,
        z: st.z,
    })
}

fn record(k: usize, res_fix: f64, res_step: f64, x: &Matrix, objective: Objective<'_>) -> IterRecord {
    IterRecord {
        k,
        res_fix,
        res_step,
        objective: objective.map_or(f64::NAN, |f| f(x)),
        rank_x: numerical_rank(x, DEFAULT_RANK_TOL),
    }
}

/// Forward-backward splitting with `0 < γ < 2/L`:
///
/// ```text
/// Z_k = X_{k−1} − γ ∇f₂(X_{k−1})
/// X_k = prox_{γ f₁}(Z_k)
/// ```
///
/// `cfg.z0` is used as `X_0`. The fixed-point residual is `‖X_k − X_{k−1}‖_F`.
pub fn forward_backward(
    prox1: &dyn ProxOperator,
    grad: &dyn GradientOperator,
    cfg: &SolverConfig,
) -> Result<IterateTrace> {
    forward_backward_with_objective(prox1, grad, cfg, None)
}

pub fn forward_backward_with_objective(
    prox1: &dyn ProxOperator,
    grad: &dyn GradientOperator,
    cfg: &SolverConfig,
    objective: Objective<'_>,
) -> Result<IterateTrace> {
    cfg.validate()?;
    let l = grad.lipschitz();
    if !(l >= 0.0) || cfg.gamma * l >= 2.0 {
        return Err(Error::Config(format!("forward-backward needs gamma < 2/L; gamma = {}, L = {l}", cfg.gamma)));
    }
    let mut x = cfg.z0.clone();
    let mut z_prev = cfg.z0.clone();
    let mut z = cfg.z0.clone();
    let mut mon = Monitor::new(cfg);
    let mut records = Vec::new();
    let mut ties = Vec::new();
    let mut status = Status::MaxIterReached;
    let mut last = f64::INFINITY;
    let mut k = 0;
    while k < cfg.max_iter {
        k += 1;
        let wrap = |e| Error::Provider { iteration: k, source: Box::new(e) };
        let g = grad.gradient(&x).map_err(wrap)?;
        z = &x - &g.scale(cfg.gamma);
        let out = prox1.prox(cfg.gamma, &z).map_err(wrap)?;
        if out.tie {
            ties.push(k);
        }
        let res_fix = frob_dist(&out.value, &x);
        let res_step = frob_dist(&z, &z_prev);
        x = out.value;
        z_prev = z.clone();
        last = res_fix;
        if cfg.record_trace {
            records.push(record(k, res_fix, res_step, &x, objective));
        }
        // the step residual is reported but only the X residual decides convergence
        if let Some(s) = mon.observe(k, res_fix, 0.0, frob_norm(&z)) {
            status = s;
            break;
        }
    }
    Ok(IterateTrace {
        records,
        status,
        iterations: k,
        last_res_fix: last,
        min_res_fix: mon.min_res_fix,
        tie_iterations: ties,
        y: x.clone(),
        x,
        z,
    })
}

#[derive(Debug, Clone)]
pub struct PairRun {
    pub convex: IterateTrace,
    pub nonconvex: IterateTrace,
    /// `equal[k−1]`: `M^c_k = M^n_k` within `1e-8` at iteration `k`, for every
    /// `k` reached by both runs.
    pub equal: Vec<bool>,
}

impl PairRun {
    pub fn always_equal(&self) -> bool {
        self.equal.iter().all(|&e| e)
    }
}

/// Runs convex (envelope) and non-convex Douglas-Rachford in lockstep from
/// the same `Z₀` and compares their `X` iterates at every step.
pub fn run_pair(spec: &ObjectiveSpec, prox2: &dyn ProxOperator, cfg: &SolverConfig) -> Result<PairRun> {
    cfg.validate()?;
    let conv = EnvelopeProx(*spec);
    let nonconv = RankProx(*spec);
    let mut a = DrStepper::new(&conv, prox2, cfg);
    let mut b = DrStepper::new(&nonconv, prox2, cfg);
    let mut ma = Monitor::new(cfg);
    let mut mb = Monitor::new(cfg);
    let (mut ra, mut rb) = (Vec::new(), Vec::new());
    let (mut sa, mut sb) = (None, None);
    let (mut la, mut lb) = (f64::INFINITY, f64::INFINITY);
    let mut ties = Vec::new();
    let mut equal = Vec::new();
    for _ in 0..cfg.max_iter {
        if sa.is_none() {
            let (f, s) = a.step()?;
            la = f;
            if cfg.record_trace {
                ra.push(record(a.k, f, s, &a.x, None));
            }
            sa = ma.observe(a.k, f, s, frob_norm(&a.z));
        }
        if sb.is_none() {
            let (f, s) = b.step()?;
            lb = f;
            if b.last_tie {
                ties.push(b.k);
            }
            if cfg.record_trace {
                rb.push(record(b.k, f, s, &b.x, None));
            }
            sb = mb.observe(b.k, f, s, frob_norm(&b.z));
        }
        if a.k == b.k {
            equal.push(frob_dist(&a.x, &b.x) <= 1e-8);
        }
        if sa.is_some() && sb.is_some() {
            break;
        }
    }
    let finish = |st: DrStepper<'_>, recs, status: Option<Status>, last, mon: &Monitor, ties| IterateTrace {
        records: recs,
        status: status.unwrap_or(Status::MaxIterReached),
        iterations: st.k,
        last_res_fix: last,
        min_res_fix: mon.min_res_fix,
        tie_iterations: ties,
        x: st.x,
        y: st.y,
        z: st.z,
    };
    Ok(PairRun { convex: finish(a, ra, sa, la, &ma, Vec::new()), nonconvex: finish(b, rb, sb, lb, &mb, ties), equal })
}
