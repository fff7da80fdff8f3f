//! Proximal operators of the rank-constrained function
//! `f₁ = k(‖·‖_g) + χ_{rank ≤ r}`, of its convex envelope `k(‖·‖_{g,r*})`,
//! and of the envelope's conjugate, plus the checks relating them.
//!
//! The envelope prox is evaluated through Moreau's decomposition: with
//! `W = Z/γ`, `M^c = Z − γ·prox_{γ⁻¹ k⁺(‖·‖_{g^D,r})}(W)`. All three matrices
//! share singular vectors, so only singular values are manipulated.

use crate::error::{Error, Result};
use crate::gauge::{Gauge, ScalarFn};
use crate::matrix::{check_rank, frob_dist, frob_norm, svd, Matrix, Svd};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveSpec {
    pub k: ScalarFn,
    pub g: Gauge,
    pub r: usize,
    pub gamma: f64,
}

impl ObjectiveSpec {
    pub fn new(k: ScalarFn, g: Gauge, r: usize, gamma: f64) -> Result<Self> {
        let spec = Self { k, g, r, gamma };
        spec.validate()?;
        Ok(spec)
    }

    /// `k = t²/2`, Frobenius gauge.
    pub fn half_square(r: usize, gamma: f64) -> Result<Self> {
        Self::new(ScalarFn::HalfSquare, Gauge::L2, r, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.r == 0 {
            return Err(Error::RankOutOfRange { r: 0, q: 0 });
        }
        Ok(())
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        Self { gamma, ..self }
    }

    fn check_applicable(&self, z: &Matrix) -> Result<()> {
        self.validate()?;
        check_rank(self.r, z.min_dim())
    }

    fn require_envelope_support(&self) -> Result<()> {
        match (self.k, self.g) {
            (ScalarFn::HalfSquare, Gauge::L2) => Ok(()),
            (k, g) => Err(Error::Unsupported(format!(
                "envelope prox is only available for k = HalfSquare with the L2 gauge (got {k:?}, {g:?})"
            ))),
        }
    }

    /// `k(‖M‖_g) + χ_{rank(M) ≤ r}`; `+∞` when `M` has more than `r`
    /// singular values above `rank_tol · σ₁(M)`.
    pub fn nonconvex_value(&self, m: &Matrix, rank_tol: f64) -> f64 {
        let s = svd(m);
        if crate::matrix::numerical_rank_of(&s.sigma, rank_tol) > self.r {
            return f64::INFINITY;
        }
        self.k.eval(self.g.eval(&s.sigma))
    }

    /// `k(‖M‖_{g,r*})`.
    pub fn envelope_value(&self, m: &Matrix) -> f64 {
        let s = svd(m);
        self.k.eval(self.g.low_rank_inducing_eval(&s.sigma, self.r))
    }

    /// `k⁺(‖D‖_{g^D,r})`.
    pub fn conjugate_value(&self, d: &Matrix) -> f64 {
        let s = svd(d);
        self.k.monotone_conjugate(self.g.truncated_dual_eval(&s.sigma, self.r))
    }
}

#[derive(Debug, Clone)]
pub struct ProxEquivalenceReport {
    /// `M^c` equals the non-convex prox output.
    pub cond_i: bool,
    /// `rank(M^c) ≤ r`.
    pub cond_ii: bool,
    /// `σ_{r+j}(Z − M^c) = σ_{r+j}(Z)` for all `j ≥ 1`.
    pub cond_iii: bool,
    /// `σ_r(Z − M^c) ≥ σ_{r+1}(Z)`.
    pub cond_iv: bool,
    pub m_c: Matrix,
    pub m_n: Matrix,
    /// `σ_r(Z − M^c) − σ_{r+1}(Z)`.
    pub gap: f64,
    /// `σ_r(Z) = σ_{r+1}(Z)`: the non-convex prox is set-valued and `m_n` is one member.
    pub tie_flag: bool,
    pub tol: f64,
}

impl ProxEquivalenceReport {
    pub fn all_true(&self) -> bool {
        self.cond_i && self.cond_ii && self.cond_iii && self.cond_iv
    }

    pub fn all_false(&self) -> bool {
        !(self.cond_i || self.cond_ii || self.cond_iii || self.cond_iv)
    }

    pub fn consistent(&self) -> bool {
        self.all_true() || self.all_false()
    }
}

/// `prox_{γ k(‖·‖_g)}(P)`.
pub fn prox_scaled_gauge(spec: &ObjectiveSpec, p: &Matrix) -> Result<Matrix> {
    spec.validate()?;
    match spec.g {
        Gauge::L2 => {
            // radial shrink: the prox of a function of ‖·‖_F keeps the direction
            let t = frob_norm(p);
            if t == 0.0 {
                return Ok(Matrix::zeros(p.rows(), p.cols()));
            }
            Ok(p.scale(spec.k.prox_nonneg(spec.gamma, t) / t))
        }
    }
}

fn scaled_gauge_on_values(spec: &ObjectiveSpec, sigma: &[f64]) -> Vec<f64> {
    match spec.g {
        Gauge::L2 => {
            let t = Gauge::L2.eval(sigma);
            if t == 0.0 {
                return vec![0.0; sigma.len()];
            }
            let f = spec.k.prox_nonneg(spec.gamma, t) / t;
            sigma.iter().map(|s| s * f).collect()
        }
    }
}

/// A member of `prox_{γ f₁}(Z)`: `prox_{γ k(‖·‖_g)}(svd_r(Z))`.
///
/// The flag reports `σ_r(Z) = σ_{r+1}(Z)`, where the prox is set-valued.
pub fn prox_nonconvex_rank(spec: &ObjectiveSpec, z: &Matrix) -> Result<(Matrix, bool)> {
    spec.check_applicable(z)?;
    let s = svd(z);
    Ok(prox_nonconvex_from_svd(spec, &s))
}

pub(crate) fn prox_nonconvex_from_svd(spec: &ObjectiveSpec, s: &Svd) -> (Matrix, bool) {
    let vals = scaled_gauge_on_values(spec, &s.sigma[..spec.r]);
    (s.compose(&vals), s.ties_at(spec.r))
}

/// `prox_{γ k(‖·‖_{g,r*})}(Z)`, the prox of the convex envelope of `f₁`.
pub fn prox_envelope(spec: &ObjectiveSpec, z: &Matrix) -> Result<Matrix> {
    spec.check_applicable(z)?;
    spec.require_envelope_support()?;
    let s = svd(z);
    Ok(prox_envelope_from_svd(spec, &s))
}

pub(crate) fn prox_envelope_from_svd(spec: &ObjectiveSpec, s: &Svd) -> Matrix {
    let vals = envelope_values(spec, &s.sigma);
    s.compose(&vals)
}

/// Singular values of `M^c` from those of `Z`: `σ(Z) − γ·y` where `y` is the
/// conjugate prox at `σ(Z)/γ`.
fn envelope_values(spec: &ObjectiveSpec, sigma: &[f64]) -> Vec<f64> {
    let gamma = spec.gamma;
    let w: Vec<f64> = sigma.iter().map(|s| s / gamma).collect();
    let y = conjugate_prox_values(&w, 1.0 / gamma, spec.r);
    sigma.iter().zip(&y).map(|(s, y)| (s - gamma * y).max(0.0)).collect()
}

/// `prox_{γ⁻¹ k⁺(‖·‖_{g^D,r})}(W)`.
pub fn prox_conjugate(spec: &ObjectiveSpec, w: &Matrix) -> Result<Matrix> {
    spec.check_applicable(w)?;
    spec.require_envelope_support()?;
    let s = svd(w);
    let y = conjugate_prox_values(&s.sigma, 1.0 / spec.gamma, spec.r);
    Ok(s.compose(&y))
}

/// Exact minimizer of `c/2 · Σ_{i ≤ r} y_[i]² + ½‖y − σ‖²` for sorted `σ ≥ 0`,
/// where `y_[i]` is the `i`-th largest entry.
///
/// The solution shrinks a leading block by `1/(1+c)`, pools the entries
/// `r−t+1 ..= r+s` at a common level `θ`, and leaves the rest untouched. Every
/// `(t, s)` pair is tried; the admissible one with the smallest objective wins.
pub fn conjugate_prox_values(sigma: &[f64], c: f64, r: usize) -> Vec<f64> {
    let q = sigma.len();
    if q == 0 {
        return Vec::new();
    }
    let r = r.clamp(1, q);
    let scale = sigma[0].max(1.0);
    let slack = 1e-12 * scale;
    let shrink = 1.0 + c;

    let mut prefix = vec![0.0; q + 1];
    for i in 0..q {
        prefix[i + 1] = prefix[i] + sigma[i];
    }

    struct Candidate {
        lead: usize,
        end: usize,
        theta: f64,
        violation: f64,
        objective: f64,
    }
    let mut best: Option<Candidate> = None;

    for t in 1..=r {
        let lead = r - t;
        for s in 0..=(q - r) {
            let end = r + s;
            let theta = (prefix[end] - prefix[lead]) / (t as f64 * shrink + s as f64);
            let mut violation: f64 = 0.0;
            if lead > 0 {
                violation = violation.max(shrink * theta - sigma[lead - 1]);
            }
            violation = violation.max(sigma[lead] - shrink * theta);
            violation = violation.max(theta - sigma[end - 1]);
            if end < q {
                violation = violation.max(sigma[end] - theta);
            }
            let head: f64 = sigma[..lead]
                .iter()
                .map(|x| {
                    let y = x / shrink;
                    0.5 * c * y * y + 0.5 * (y - x) * (y - x)
                })
                .sum();
            let pooled: f64 = 0.5 * c * t as f64 * theta * theta
                + sigma[lead..end].iter().map(|x| 0.5 * (theta - x) * (theta - x)).sum::<f64>();
            let cand = Candidate { lead, end, theta, violation, objective: head + pooled };
            let better = match &best {
                None => true,
                Some(b) => {
                    let (cf, bf) = (cand.violation <= slack, b.violation <= slack);
                    match (cf, bf) {
                        (true, false) => true,
                        (false, true) => false,
                        (true, true) => cand.objective < b.objective,
                        (false, false) => cand.violation < b.violation,
                    }
                }
            };
            if better {
                best = Some(cand);
            }
        }
    }

    let b = best.expect("at least one pooling candidate");
    let mut y = sigma.to_vec();
    for v in &mut y[..b.lead] {
        *v /= shrink;
    }
    for v in &mut y[b.lead..b.end] {
        *v = b.theta;
    }
    y
}

/// `‖M^c + γ·prox_conjugate(Z/γ) − Z‖_F`, which vanishes by Moreau's identity.
pub fn moreau_check(spec: &ObjectiveSpec, z: &Matrix) -> Result<f64> {
    let m_c = prox_envelope(spec, z)?;
    let y_c = prox_conjugate(spec, &z.scale(1.0 / spec.gamma))?.scale(spec.gamma);
    Ok(frob_dist(&(&m_c + &y_c), z))
}

/// `γ k(‖M‖_{g,r*}) + ½‖M − Z‖²`.
pub fn envelope_prox_objective(spec: &ObjectiveSpec, z: &Matrix, m: &Matrix) -> f64 {
    let d = frob_dist(m, z);
    spec.gamma * spec.envelope_value(m) + 0.5 * d * d
}

/// `γ f₁(M) + ½‖M − Z‖²`.
pub fn nonconvex_prox_objective(spec: &ObjectiveSpec, z: &Matrix, m: &Matrix) -> f64 {
    let d = frob_dist(m, z);
    spec.gamma * spec.nonconvex_value(m, crate::matrix::DEFAULT_RANK_TOL) + 0.5 * d * d
}

/// Evaluates the four equivalent conditions relating the envelope prox and
/// the rank-constrained prox at `Z`.
///
/// Comparisons use `1e-8 · max(1, σ₁(Z))`.
pub fn prox_equivalence_conditions(spec: &ObjectiveSpec, z: &Matrix) -> Result<ProxEquivalenceReport> {
    spec.check_applicable(z)?;
    spec.require_envelope_support()?;
    let r = spec.r;
    let sz = svd(z);
    let tol = 1e-8 * sz.sigma_max().max(1.0);
    let m_c = prox_envelope_from_svd(spec, &sz);
    let (m_n, tie_flag) = prox_nonconvex_from_svd(spec, &sz);

    let s_mc = svd(&m_c);
    let s_res = svd(&(z - &m_c));

    let cond_i = frob_dist(&m_c, &m_n) <= tol;
    let cond_ii = s_mc.sigma.iter().filter(|&&v| v > tol).count() <= r;
    let cond_iii = (r + 1..=sz.len()).all(|i| (s_res.sigma_at(i) - sz.sigma_at(i)).abs() <= tol);
    let gap = s_res.sigma_at(r) - sz.sigma_at(r + 1);
    let cond_iv = gap >= -tol;

    Ok(ProxEquivalenceReport { cond_i, cond_ii, cond_iii, cond_iv, m_c, m_n, gap, tie_flag, tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{numerical_rank, DEFAULT_RANK_TOL};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Matrix {
        Matrix::from_fn(n, m, |_, _| rng.sample(StandardNormal)).unwrap()
    }

    fn diag(v: &[f64]) -> Matrix {
        Matrix::diag(v).unwrap()
    }

    #[test]
    fn scaled_gauge_examples() {
        let hs = ObjectiveSpec::half_square(1, 1.0).unwrap();
        let out = prox_scaled_gauge(&hs, &diag(&[2.0, 2.0])).unwrap();
        assert!(frob_dist(&out, &diag(&[1.0, 1.0])) < 1e-15);

        let id = ObjectiveSpec::new(ScalarFn::Identity, Gauge::L2, 1, 1.0).unwrap();
        let small = diag(&[0.3, 0.4]);
        assert!(prox_scaled_gauge(&id, &small).unwrap().is_zero());
        let big = diag(&[3.0, 4.0]);
        assert!(frob_dist(&prox_scaled_gauge(&id, &big).unwrap(), &big.scale(0.8)) < 1e-15);

        for spec in [hs, id] {
            assert!(prox_scaled_gauge(&spec, &Matrix::zeros(2, 3)).unwrap().is_zero());
        }
    }

    #[test]
    fn nonconvex_examples() {
        let spec = ObjectiveSpec::half_square(1, 1.0).unwrap();
        let (m, tie) = prox_nonconvex_rank(&spec, &diag(&[2.0, 1.0])).unwrap();
        assert!(!tie);
        assert!(frob_dist(&m, &diag(&[1.0, 0.0])) < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = gaussian(&mut rng, 4, 3);
        let full = ObjectiveSpec::half_square(3, 0.7).unwrap();
        let (m, _) = prox_nonconvex_rank(&full, &z).unwrap();
        assert!(frob_dist(&m, &z.scale(1.0 / 1.7)) < 1e-12);

        let (m, tie) = prox_nonconvex_rank(&spec, &Matrix::zeros(3, 3)).unwrap();
        assert!(m.is_zero() && tie);
        assert!(prox_nonconvex_rank(&ObjectiveSpec::half_square(4, 1.0).unwrap(), &z).is_err());
    }

    /// Search over rank-one diagonal candidates `diag(a, 0)` / `diag(0, b)`.
    #[test]
    fn nonconvex_closed_form_beats_sampled_candidates() {
        let spec = ObjectiveSpec::half_square(1, 1.0).unwrap();
        let z = diag(&[2.0, 1.0]);
        let (m, _) = prox_nonconvex_rank(&spec, &z).unwrap();
        let best = nonconvex_prox_objective(&spec, &z, &m);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let a = rng.random_range(-3.0..3.0);
            let cand = if rng.random_bool(0.5) { diag(&[a, 0.0]) } else { diag(&[0.0, a]) };
            assert!(best <= nonconvex_prox_objective(&spec, &z, &cand) + 1e-12);
        }
        assert_abs_diff_eq!(best, 1.0 + 0.5, epsilon = 1e-12);
    }

    #[test]
    fn nonconvex_beats_random_low_rank_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for r in 1..=2 {
            let spec = ObjectiveSpec::half_square(r, 0.5).unwrap();
            let z = gaussian(&mut rng, 4, 4);
            let (m, _) = prox_nonconvex_rank(&spec, &z).unwrap();
            let best = nonconvex_prox_objective(&spec, &z, &m);
            for _ in 0..10_000 {
                let l = gaussian(&mut rng, 4, r);
                let rr = gaussian(&mut rng, r, 4);
                let cand = l.matmul(&rr).unwrap();
                assert!(best <= nonconvex_prox_objective(&spec, &z, &cand) + 1e-12);
            }
        }
    }

    #[test]
    fn envelope_examples() {
        let spec = ObjectiveSpec::half_square(1, 1.0).unwrap();
        let z = diag(&[2.0, 0.0]);
        let m_c = prox_envelope(&spec, &z).unwrap();
        let (m_n, _) = prox_nonconvex_rank(&spec, &z).unwrap();
        assert!(frob_dist(&m_c, &diag(&[1.0, 0.0])) < 1e-14);
        assert!(frob_dist(&m_c, &m_n) < 1e-14);
        assert!(prox_envelope(&spec, &Matrix::zeros(2, 2)).unwrap().is_zero());

        let id = ObjectiveSpec::new(ScalarFn::Identity, Gauge::L2, 1, 1.0).unwrap();
        assert!(matches!(prox_envelope(&id, &z), Err(Error::Unsupported(_))));
        assert!(matches!(prox_conjugate(&id, &z), Err(Error::Unsupported(_))));
    }

    /// `Z = diag(2, 1)`, `r = 1`, `γ = 1`. The conjugate subproblem on
    /// `σ = (2, 1)` with `c = 1` pools both entries:
    /// `θ = (2 + 1)/(1·2 + 1) = 1`, so `y = (1, 1)` and `M^c = diag(1, 0)`.
    /// The same value is confirmed by the independent oracle in the
    /// integration tests (projected gradient over the capped simplex).
    #[test]
    fn envelope_fixture_diag_two_one() {
        let spec = ObjectiveSpec::half_square(1, 1.0).unwrap();
        let m_c = prox_envelope(&spec, &diag(&[2.0, 1.0])).unwrap();
        assert!(frob_dist(&m_c, &diag(&[1.0, 0.0])) < 1e-12);
    }

    #[test]
    fn conjugate_examples() {
        // r = q: separable quadratic
        let y = conjugate_prox_values(&[3.0, 2.0, 1.0], 0.5, 3);
        for (a, b) in y.iter().zip([2.0, 4.0 / 3.0, 2.0 / 3.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        // single active value: y₁ = σ₁/(1+c) = 1/(1+c)
        let y = conjugate_prox_values(&[1.0, 0.0, 0.0], 2.0, 1);
        assert_abs_diff_eq!(y[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(&y[1..], &[0.0, 0.0]);
    }

    /// KKT residual of the pooled solution: for each entry there must be a
    /// weight `w_i ∈ [0, 1]` with `Σ w = r` and `c·w_i·y_i + y_i − σ_i = 0`.
    #[test]
    fn conjugate_vector_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let q = rng.random_range(1..8);
            let r = rng.random_range(1..=q);
            let c = 10f64.powf(rng.random_range(-1.5..1.5));
            let mut sigma: Vec<f64> = (0..q).map(|_| rng.random_range(0.0..3.0)).collect();
            sigma.sort_by(|a, b| b.total_cmp(a));
            let y = conjugate_prox_values(&sigma, c, r);
            let w: Vec<f64> =
                y.iter().zip(&sigma).map(|(&yi, &si)| if yi > 0.0 { (si - yi) / (c * yi) } else { 0.0 }).collect();
            let mut resid: f64 = 0.0;
            for &wi in &w {
                resid = resid.max(-wi).max(wi - 1.0);
            }
            if y.iter().all(|&v| v > 0.0) {
                resid = resid.max((w.iter().sum::<f64>() - r as f64).abs());
            }
            assert!(resid <= 1e-10, "kkt residual {resid} for sigma={sigma:?} r={r} c={c}");
        }
    }

    #[test]
    fn moreau_identity_holds() {
        let spec = ObjectiveSpec::half_square(2, 1.0).unwrap();
        assert_eq!(moreau_check(&spec, &Matrix::zeros(3, 3)).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for gamma in [0.1, 1.0, 10.0] {
            let spec = spec.with_gamma(gamma);
            for _ in 0..20 {
                let z = gaussian(&mut rng, 5, 4);
                let res = moreau_check(&spec, &z).unwrap();
                assert!(res <= 1e-8 * frob_norm(&z).max(1.0));
            }
            // rank-r input: envelope and non-convex prox agree
            let z = gaussian(&mut rng, 5, 2).matmul(&gaussian(&mut rng, 2, 4)).unwrap();
            let m_c = prox_envelope(&spec, &z).unwrap();
            let (m_n, _) = prox_nonconvex_rank(&spec, &z).unwrap();
            assert!(frob_dist(&m_c, &m_n) <= 1e-8);
        }
    }

    #[test]
    fn equivalence_on_rank_r_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let z = gaussian(&mut rng, 5, 2).matmul(&gaussian(&mut rng, 2, 4)).unwrap();
        let rep = prox_equivalence_conditions(&ObjectiveSpec::half_square(2, 1.0).unwrap(), &z).unwrap();
        assert!(rep.all_true(), "{rep:?}");
    }

    /// For `Z = diag(2, 1)`, `r = 1`: the envelope prox has rank one iff
    /// `γ σ₁/(1+γ) ≥ σ₂`, i.e. `γ ≥ 1`. Sweep downward until it fails.
    #[test]
    fn equivalence_fails_together_for_small_gamma() {
        let z = diag(&[2.0, 1.0]);
        let mut gamma = 1.0;
        let rep = loop {
            gamma *= 0.8;
            let rep = prox_equivalence_conditions(&ObjectiveSpec::half_square(1, gamma).unwrap(), &z).unwrap();
            if !rep.cond_ii {
                break rep;
            }
        };
        assert!(rep.all_false(), "gamma={gamma} {rep:?}");
        assert_eq!(numerical_rank(&rep.m_c, DEFAULT_RANK_TOL), 2);
    }

    #[test]
    fn equivalence_sweep_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let gamma = [0.1, 1.0, 10.0][rng.random_range(0..3)];
            let r = rng.random_range(1..=3);
            let z = gaussian(&mut rng, 6, 5);
            let rep = prox_equivalence_conditions(&ObjectiveSpec::half_square(r, gamma).unwrap(), &z).unwrap();
            if rep.gap.abs() > rep.tol {
                assert!(rep.consistent(), "{rep:?}");
            }
        }
    }

    #[test]
    fn envelope_is_firmly_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let spec =
                ObjectiveSpec::half_square(rng.random_range(1..=3), 10f64.powf(rng.random_range(-1.0..1.0))).unwrap();
            let z1 = gaussian(&mut rng, 4, 4);
            let z2 = gaussian(&mut rng, 4, 4);
            let p1 = prox_envelope(&spec, &z1).unwrap();
            let p2 = prox_envelope(&spec, &z2).unwrap();
            let dp = &p1 - &p2;
            let lhs = frob_norm(&dp).powi(2);
            let rhs = crate::matrix::inner(&dp, &(&z1 - &z2)).unwrap();
            assert!(lhs <= rhs + 1e-8);
        }
    }

    #[test]
    fn envelope_shares_singular_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z = gaussian(&mut rng, 5, 4);
        let spec = ObjectiveSpec::half_square(2, 0.5).unwrap();
        let m = prox_envelope(&spec, &z).unwrap();
        let s = svd(&z);
        let cross = s.u.transpose() * m.as_dmatrix() * &s.v;
        for i in 0..cross.nrows() {
            for j in 0..cross.ncols() {
                if i != j {
                    assert!(cross[(i, j)].abs() <= 1e-8);
                }
            }
        }
    }
}
