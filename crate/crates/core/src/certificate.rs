//! Post-hoc checks on Douglas-Rachford limit points.
//!
//! From a fixed point `Z*` with `M* = prox_{γ f₁}(Z*)` the dual variable is
//! `D* = (Z* − M*)/γ`. A gap `σ_r(D*) > σ_{r+1}(D*)` certifies that the convex
//! relaxation has rank-`r` solutions and that the non-convex iteration behaves
//! like the convex one on the ball of radius `ε = γ(σ_r(D*) − σ_{r+1}(D*))`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{self, check_rank, frob_dist, frob_norm, numerical_rank, Matrix, DEFAULT_RANK_TOL};
use crate::problem::ProblemSpec;
use crate::prox::ObjectiveSpec;
use crate::solver::{run_pair, SolverConfig, Status};

#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub d_star: Matrix,
    pub r: usize,
    pub gamma: f64,
    pub sigma_r: f64,
    pub sigma_r_plus_1: f64,
    /// Largest `s` with `σ_r(D*) = … = σ_{r+s}(D*)` within the tie tolerance.
    pub tie_multiplicity: usize,
    pub tau_tie: f64,
    /// `γ (σ_r(D*) − σ_{r+1}(D*))`.
    pub epsilon: f64,
    pub low_rank_guarantee: bool,
}

pub fn dual_from_primal(z_star: &Matrix, m_star: &Matrix, gamma: f64, r: usize) -> Result<DualCertificate> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    z_star.ensure_same_shape(m_star)?;
    check_rank(r, z_star.min_dim())?;
    let d_star = (z_star - m_star).scale(1.0 / gamma);
    let dec = matrix::svd(&d_star);
    let sigma_r = dec.sigma_at(r);
    let sigma_r_plus_1 = dec.sigma_at(r + 1);
    let tau = dec.tau_tie;
    let epsilon = (gamma * (sigma_r - sigma_r_plus_1)).max(0.0);
    let gap = sigma_r - sigma_r_plus_1 > tau;
    Ok(DualCertificate {
        tie_multiplicity: dec.tie_multiplicity(r),
        d_star,
        r,
        gamma,
        sigma_r,
        sigma_r_plus_1,
        tau_tie: tau,
        epsilon,
        low_rank_guarantee: gap || sigma_r <= tau,
    })
}

impl DualCertificate {
    pub fn to_report(&self) -> String {
        format!(
            "r = {}\ngamma = {:e}\nsigma_r = {:e}\nsigma_r_plus_1 = {:e}\ntie_multiplicity = {}\ntau_tie = {:e}\nepsilon = {:e}\nlow_rank_guarantee = {}\n",
            self.r,
            self.gamma,
            self.sigma_r,
            self.sigma_r_plus_1,
            self.tie_multiplicity,
            self.tau_tie,
            self.epsilon,
            self.low_rank_guarantee
        )
    }
}

/// `rank(M*) ≤ r + s`.
pub fn rank_bound_check(m_star: &Matrix, cert: &DualCertificate, r: usize) -> bool {
    numerical_rank(m_star, DEFAULT_RANK_TOL) <= r + cert.tie_multiplicity
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub start_distance: f64,
    pub status: Status,
    pub iterations: usize,
    /// `‖Z_∞ − Z*‖_F`.
    pub z_distance: f64,
    /// `‖X_∞ − X*‖_F` with `X* = prox(Z*)`.
    pub x_distance: f64,
    /// The convex and non-convex iterates agreed at every step.
    pub tracked_convex: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractionReport {
    pub radius: f64,
    pub tol: f64,
    pub trials: Vec<TrialOutcome>,
}

impl AttractionReport {
    /// Every trial converged with `Z_∞` within `tol` of `Z*` and tracked the convex run.
    pub fn passed(&self) -> bool {
        self.trials.iter().all(|t| t.status == Status::Converged && t.z_distance <= self.tol && t.tracked_convex)
    }

    /// Like [`Self::passed`] but measuring the primal iterate `X` instead of `Z`.
    pub fn primal_passed(&self) -> bool {
        self.trials.iter().all(|t| t.status == Status::Converged && t.x_distance <= self.tol && t.tracked_convex)
    }

    pub fn max_z_distance(&self) -> f64 {
        self.trials.iter().map(|t| t.z_distance).fold(0.0, f64::max)
    }

    pub fn max_x_distance(&self) -> f64 {
        self.trials.iter().map(|t| t.x_distance).fold(0.0, f64::max)
    }
}

/// Starts non-convex Douglas-Rachford (in lockstep with the convex one) from
/// `trials` points drawn uniformly from the ball of radius `radius_factor · ε`
/// around `Z*`.
#[allow(clippy::too_many_arguments)]
pub fn attraction_ball_test(
    problem: &ProblemSpec,
    spec: &ObjectiveSpec,
    cert: &DualCertificate,
    z_star: &Matrix,
    trials: usize,
    radius_factor: f64,
    base: &SolverConfig,
    seed: u64,
) -> Result<AttractionReport> {
    let radius = radius_factor * cert.epsilon;
    let mut report = AttractionReport { radius, tol: 1e-6, trials: Vec::with_capacity(trials) };
    if trials == 0 {
        return Ok(report);
    }
    if !(cert.epsilon > 0.0) {
        return Err(Error::Precondition("attraction ball needs epsilon > 0".into()));
    }
    let spec = spec.with_gamma(base.gamma);
    let x_star = crate::prox::prox_nonconvex_rank(&spec, z_star)?.0;
    let (n, m) = z_star.shape();
    let d = (n * m) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let dir = Matrix::from_fn(n, m, |_, _| rng.sample(StandardNormal))?;
        let rho: f64 = radius * rng.random::<f64>().powf(1.0 / d);
        let z0 = z_star + &dir.scale(rho / frob_norm(&dir));
        let mut cfg = base.clone();
        cfg.z0 = z0;
        cfg.record_trace = false;
        let pair = run_pair(&spec, problem, &cfg)?;
        let nc = &pair.nonconvex;
        report.trials.push(TrialOutcome {
            start_distance: rho,
            status: nc.status,
            iterations: nc.iterations,
            z_distance: frob_dist(&nc.z, z_star),
            x_distance: frob_dist(&nc.x, &x_star),
            tracked_convex: pair.always_equal(),
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitMode {
    Convex,
    NonConvex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitPointReport {
    pub mode: LimitMode,
    pub r_mat: Matrix,
    /// `‖Rᵀ X*‖_F`.
    pub orth_left: f64,
    /// `‖X* Rᵀ‖_F`.
    pub orth_right: f64,
    /// Distance of `−X* − R` from `∂f₂(X*)`.
    pub subgrad_residual: f64,
    pub sigma1_r: f64,
    pub sigma_bound: f64,
    pub sigma_bound_ok: bool,
}

impl LimitPointReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.orth_left <= tol && self.orth_right <= tol && self.subgrad_residual <= tol && self.sigma_bound_ok
    }
}

/// Checks `RᵀX* = 0`, `X*Rᵀ = 0`, `−X* − R ∈ ∂f₂(X*)` and the bound on `σ₁(R)`
/// for `R = (Z* − (1+γ) X*)/γ`, which equals `D* − X*`.
///
/// The bound is `σ₁(R) ≤ σ_r(X*)` in convex mode and `σ₁(R) ≤ (1 + 1/γ) σ_r(X*)`
/// otherwise, with slack `tol`.
pub fn dr_limit_point_check(
    x_star: &Matrix,
    z_star: &Matrix,
    gamma: f64,
    r: usize,
    mode: LimitMode,
    subgrad: &dyn Fn(&Matrix, &Matrix) -> Result<f64>,
    tol: f64,
) -> Result<LimitPointReport> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    x_star.ensure_same_shape(z_star)?;
    check_rank(r, x_star.min_dim())?;
    let r_mat = (z_star - &x_star.scale(1.0 + gamma)).scale(1.0 / gamma);
    limit_point_check_with(x_star, &r_mat, gamma, r, mode, subgrad, tol)
}

/// [`dr_limit_point_check`] with an explicit `R`.
pub fn limit_point_check_with(
    x_star: &Matrix,
    r_mat: &Matrix,
    gamma: f64,
    r: usize,
    mode: LimitMode,
    subgrad: &dyn Fn(&Matrix, &Matrix) -> Result<f64>,
    tol: f64,
) -> Result<LimitPointReport> {
    x_star.ensure_same_shape(r_mat)?;
    let dec = matrix::svd(x_star);
    let rank = matrix::numerical_rank_of(&dec.sigma, DEFAULT_RANK_TOL);
    if rank > r {
        return Err(Error::Precondition(format!("limit point has numerical rank {rank} > r = {r}")));
    }
    let orth_left = frob_norm(&r_mat.transpose().matmul(x_star)?);
    let orth_right = frob_norm(&x_star.matmul(&r_mat.transpose())?);
    let g = (x_star + r_mat).scale(-1.0);
    let subgrad_residual = subgrad(x_star, &g)?;
    let sigma1_r = matrix::svd(r_mat).sigma_at(1);
    let factor = match mode {
        LimitMode::Convex => 1.0,
        LimitMode::NonConvex => 1.0 + 1.0 / gamma,
    };
    let sigma_bound = factor * dec.sigma_at(r);
    Ok(LimitPointReport {
        mode,
        r_mat: r_mat.clone(),
        orth_left,
        orth_right,
        subgrad_residual,
        sigma1_r,
        sigma_bound,
        sigma_bound_ok: sigma1_r <= sigma_bound + tol,
    })
}

/// Membership test for `∂f₂` supplied by a problem.
pub fn problem_subgradient(p: &ProblemSpec) -> impl Fn(&Matrix, &Matrix) -> Result<f64> + '_ {
    move |x, g| p.subgradient_residual(x, g)
}
