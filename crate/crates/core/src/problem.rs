//! Concrete convex terms `f₂` and the composite objectives built on them.
//!
//! All variants are scaled to pair with `k(t) = t²/2`:
//!
//! * `HankelApprox`: `f₂(M) = −⟨M, H⟩ + ½‖H‖² + χ_𝓗(M)`, so that
//!   `½‖M‖² + f₂(M) = ½‖H − M‖²` on Hankel matrices.
//! * `Completion`: indicator of agreeing with `data` on `mask`.
//! * `QuadraticFit`: `f₂(M) = ½‖M − A‖²`.
//!
//! Matrix completion is not part of the Hankel experiment; it is included to
//! exercise indicator terms with irregular support.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{self, frob_dist, frob_norm, hankel_project, inner, is_hankel, Matrix};
use crate::prox::ObjectiveSpec;
use crate::solver::{GradientOperator, ProxOperator, ProxOutput};

/// Relative tolerance for membership in an indicator's set.
pub const FEASIBILITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    HankelApprox { h: Matrix },
    Completion { mask: Vec<bool>, data: Matrix },
    QuadraticFit { a: Matrix },
}

impl ProblemSpec {
    pub fn hankel(h: Matrix) -> Result<Self> {
        if !is_hankel(&h, 0.0) {
            return Err(Error::InvalidInput("target matrix is not Hankel".into()));
        }
        Ok(Self::HankelApprox { h })
    }

    /// `mask` is row-major; entries of `data` outside the mask are ignored and zeroed.
    pub fn completion(mask: Vec<bool>, data: Matrix) -> Result<Self> {
        let (n, m) = data.shape();
        if mask.len() != n * m {
            return Err(Error::InvalidInput(format!("mask has {} entries, expected {}", mask.len(), n * m)));
        }
        let data = Matrix::from_fn(n, m, |i, j| if mask[i * m + j] { data.get(i, j) } else { 0.0 })?;
        Ok(Self::Completion { mask, data })
    }

    pub fn quadratic(a: Matrix) -> Self {
        Self::QuadraticFit { a }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Self::HankelApprox { h } => h.shape(),
            Self::Completion { data, .. } => data.shape(),
            Self::QuadraticFit { a } => a.shape(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::HankelApprox { .. } => "hankel",
            Self::Completion { .. } => "completion",
            Self::QuadraticFit { .. } => "quadratic",
        }
    }

    /// The matrix a solution is compared against for relative errors.
    pub fn target(&self) -> &Matrix {
        match self {
            Self::HankelApprox { h } => h,
            Self::Completion { data, .. } => data,
            Self::QuadraticFit { a } => a,
        }
    }

    fn masked(&self, i: usize, j: usize) -> bool {
        match self {
            Self::Completion { mask, data } => mask[i * data.cols() + j],
            _ => false,
        }
    }

    /// Distance of `m` from the indicator's set (zero when there is none).
    pub fn infeasibility(&self, m: &Matrix) -> f64 {
        match self {
            Self::HankelApprox { .. } => frob_dist(m, &hankel_project(m)),
            Self::Completion { data, .. } => {
                let (n, c) = m.shape();
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..c {
                        if self.masked(i, j) {
                            s += (m.get(i, j) - data.get(i, j)).powi(2);
                        }
                    }
                }
                s.sqrt()
            }
            Self::QuadraticFit { .. } => 0.0,
        }
    }

    pub fn is_feasible(&self, m: &Matrix) -> bool {
        self.infeasibility(m) <= FEASIBILITY_TOL * (1.0 + frob_norm(m))
    }

    /// `f₂(M)`, `+∞` outside the indicator's set.
    pub fn f2_value(&self, m: &Matrix) -> Result<f64> {
        m.ensure_same_shape(self.target())?;
        if !self.is_feasible(m) {
            return Ok(f64::INFINITY);
        }
        Ok(match self {
            Self::HankelApprox { h } => -inner(m, h)? + 0.5 * frob_norm(h).powi(2),
            Self::Completion { .. } => 0.0,
            Self::QuadraticFit { a } => 0.5 * frob_dist(m, a).powi(2),
        })
    }

    /// `prox_{γ f₂}(Z)`. Outputs lie exactly in the indicator's set.
    pub fn f2_prox(&self, gamma: f64, z: &Matrix) -> Result<Matrix> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
        }
        z.ensure_same_shape(self.target())?;
        Ok(match self {
            Self::HankelApprox { h } => hankel_project(&(z + &h.scale(gamma))),
            Self::Completion { data, .. } => {
                let (n, m) = z.shape();
                Matrix::from_fn(n, m, |i, j| if self.masked(i, j) { data.get(i, j) } else { z.get(i, j) })?
            }
            Self::QuadraticFit { a } => (z + &a.scale(gamma)).scale(1.0 / (1.0 + gamma)),
        })
    }

    /// `(∇f₂(X), L)`; only the smooth variant has one.
    pub fn f2_grad(&self, x: &Matrix) -> Result<(Matrix, f64)> {
        match self {
            Self::QuadraticFit { a } => {
                x.ensure_same_shape(a)?;
                Ok((x - a, 1.0))
            }
            other => Err(Error::Unsupported(format!("{} term has no gradient", other.name()))),
        }
    }

    /// Distance of `G` from `∂f₂(X)`, plus the infeasibility of `X`.
    pub fn subgradient_residual(&self, x: &Matrix, g: &Matrix) -> Result<f64> {
        x.ensure_same_shape(g)?;
        let infeas = self.infeasibility(x);
        Ok(infeas
            + match self {
                // ∂f₂(X) = −H + 𝓗^⊥
                Self::HankelApprox { h } => frob_norm(&hankel_project(&(g + h))),
                // normal cone of the mask constraint: anything supported on the mask
                Self::Completion { .. } => {
                    let (n, m) = g.shape();
                    let mut s = 0.0;
                    for i in 0..n {
                        for j in 0..m {
                            if !self.masked(i, j) {
                                s += g.get(i, j).powi(2);
                            }
                        }
                    }
                    s.sqrt()
                }
                Self::QuadraticFit { a } => frob_dist(g, &(x - a)),
            })
    }

    /// Relative error `‖T − M‖_F / ‖T‖_F` against [`Self::target`].
    pub fn relative_error(&self, m: &Matrix) -> f64 {
        let t = self.target();
        frob_dist(t, m) / frob_norm(t).max(f64::MIN_POSITIVE)
    }
}

impl ProxOperator for ProblemSpec {
    fn prox(&self, gamma: f64, z: &Matrix) -> Result<ProxOutput> {
        self.f2_prox(gamma, z).map(ProxOutput::from)
    }
}

impl GradientOperator for ProblemSpec {
    fn gradient(&self, x: &Matrix) -> Result<Matrix> {
        self.f2_grad(x).map(|(g, _)| g)
    }

    fn lipschitz(&self) -> f64 {
        match self {
            Self::QuadraticFit { .. } => 1.0,
            _ => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValues {
    /// `k(‖M‖_g) + χ_{rank ≤ r}(M) + f₂(M)`.
    pub nonconvex: f64,
    /// `k(‖M‖_{g,r*}) + f₂(M)`.
    pub envelope: f64,
}

pub fn objective_eval(p: &ProblemSpec, spec: &ObjectiveSpec, m: &Matrix) -> Result<ObjectiveValues> {
    let f2 = p.f2_value(m)?;
    Ok(ObjectiveValues {
        nonconvex: spec.nonconvex_value(m, matrix::DEFAULT_RANK_TOL) + f2,
        envelope: spec.envelope_value(m) + f2,
    })
}

/// Value of the convex relaxation at its solution, which bounds the
/// rank-constrained optimum from below.
pub fn lower_bound(p: &ProblemSpec, spec: &ObjectiveSpec, m_convex: &Matrix) -> Result<f64> {
    Ok(objective_eval(p, spec, m_convex)?.envelope)
}

/// Hankel matrix with generator `h_k = 1` for `k ≤ n` and `0` afterwards:
/// ones on and above the main anti-diagonal.
pub fn build_triangle_hankel(n: usize) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let seq: Vec<f64> = (0..2 * n - 1).map(|k| if k < n { 1.0 } else { 0.0 }).collect();
    matrix::hankel_from_sequence(n, n, &seq)
}

/// Parses a comma-separated generator sequence of odd length `2n − 1`.
pub fn hankel_from_generator(list: &str) -> Result<Matrix> {
    let seq: Vec<f64> = list
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::InvalidInput(format!("bad generator value `{t}`: {e}"))))
        .collect::<Result<_>>()?;
    if seq.len().is_multiple_of(2) {
        return Err(Error::InvalidInput(format!("generator needs 2n-1 values, got {}", seq.len())));
    }
    let n = seq.len().div_ceil(2);
    matrix::hankel_from_sequence(n, n, &seq)
}

// ---------------------------------------------------------------------------
// Problem files
//
//   variant hankel|completion|quadratic
//   matrix <name>
//   <n m header and rows, as in the matrix text format>
//
// Hankel needs `H`, completion needs `mask` (0/1 entries) and `data`,
// quadratic needs `A`.
// ---------------------------------------------------------------------------

pub fn to_problem_text(p: &ProblemSpec) -> String {
    let mut out = format!("variant {}\n", p.name());
    let mut section = |name: &str, m: &Matrix| {
        let _ = write!(out, "matrix {name}\n{}", matrix::to_text(m));
    };
    match p {
        ProblemSpec::HankelApprox { h } => section("H", h),
        ProblemSpec::Completion { mask, data } => {
            let (n, m) = data.shape();
            let mm = Matrix::from_fn(n, m, |i, j| if mask[i * m + j] { 1.0 } else { 0.0 }).expect("finite");
            section("mask", &mm);
            section("data", data);
        }
        ProblemSpec::QuadraticFit { a } => section("A", a),
    }
    out
}

pub fn parse_problem(src: &str) -> Result<ProblemSpec> {
    let lines: Vec<(usize, &str)> = src
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let mut variant = None;
    let mut mats: Vec<(String, Matrix)> = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let (ln, line) = lines[i];
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next()) {
            (Some("variant"), Some(v)) => {
                variant = Some(v.to_string());
                i += 1;
            }
            (Some("matrix"), Some(name)) => {
                let header = lines.get(i + 1).ok_or(Error::Parse { line: ln, msg: "missing matrix header".into() })?;
                let n: usize = header
                    .1
                    .split_whitespace()
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or(Error::Parse { line: header.0, msg: "bad matrix header".into() })?;
                let end = i + 2 + n;
                if end > lines.len() {
                    return Err(Error::Parse { line: header.0, msg: "matrix block truncated".into() });
                }
                let block: String = lines[i + 1..end].iter().map(|(_, l)| format!("{l}\n")).collect();
                let m = matrix::parse_text(&block).map_err(|e| match e {
                    Error::Parse { line, msg } => Error::Parse { line: line + header.0 - 1, msg },
                    other => other,
                })?;
                mats.push((name.to_string(), m));
                i = end;
            }
            _ => return Err(Error::Parse { line: ln, msg: format!("unexpected line `{line}`") }),
        }
    }
    let take = |name: &str| -> Result<Matrix> {
        mats.iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m.clone())
            .ok_or(Error::Parse { line: 0, msg: format!("missing matrix `{name}`") })
    };
    match variant.as_deref() {
        Some("hankel") => ProblemSpec::hankel(take("H")?),
        Some("completion") => {
            let mask = take("mask")?;
            let data = take("data")?;
            if mask.shape() != data.shape() {
                return Err(Error::ShapeMismatch { expected: data.shape(), got: mask.shape() });
            }
            let flags: Vec<bool> = mask.to_row_major().into_iter().map(|v| v != 0.0).collect();
            ProblemSpec::completion(flags, data)
        }
        Some("quadratic") => Ok(ProblemSpec::quadratic(take("A")?)),
        Some(other) => Err(Error::Parse { line: 1, msg: format!("unknown variant `{other}`") }),
        None => Err(Error::Parse { line: 1, msg: "missing `variant` line".into() }),
    }
}

pub fn read_problem(path: impl AsRef<Path>) -> Result<ProblemSpec> {
    parse_problem(&std::fs::read_to_string(path)?)
}

pub fn write_problem(path: impl AsRef<Path>, p: &ProblemSpec) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), to_problem_text(p).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::svd_r;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Matrix {
        Matrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    fn random_hankel(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        let seq: Vec<f64> = (0..2 * n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
        matrix::hankel_from_sequence(n, n, &seq).unwrap()
    }

    #[test]
    fn triangle_hankel() {
        let h2 = build_triangle_hankel(2).unwrap();
        assert_eq!(h2, Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap());
        assert_eq!(build_triangle_hankel(1).unwrap(), Matrix::identity(1));
        assert_abs_diff_eq!(frob_norm(&build_triangle_hankel(10).unwrap()).powi(2), 55.0, epsilon = 1e-12);
        assert!(build_triangle_hankel(0).is_err());
        assert_eq!(hankel_from_generator("1,1,0").unwrap(), h2);
        assert!(hankel_from_generator("1,1").is_err());
    }

    /// Oracle: parametrize Hankel matrices by their generator `c` and solve
    /// the unconstrained quadratic `min −γ⟨M(c),H⟩ + ½‖M(c) − Z‖²` through
    /// its normal equations.
    #[test]
    fn hankel_prox_matches_quadratic_program() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let n = rng.random_range(2..6);
            let h = random_hankel(&mut rng, n);
            let p = ProblemSpec::hankel(h.clone()).unwrap();
            let gamma = rng.random_range(0.1..3.0);
            let z = random(&mut rng, n, n);
            let k = 2 * n - 1;
            let basis: Vec<DMatrix<f64>> =
                (0..k).map(|d| DMatrix::from_fn(n, n, |i, j| if i + j == d { 1.0 } else { 0.0 })).collect();
            let gram = DMatrix::from_fn(k, k, |a, b| basis[a].dot(&basis[b]));
            let rhs = DVector::from_fn(k, |a, _| basis[a].dot(&(z.as_dmatrix() + h.as_dmatrix() * gamma)));
            let c = gram.cholesky().unwrap().solve(&rhs);
            let oracle = basis.iter().zip(c.iter()).fold(DMatrix::zeros(n, n), |acc, (b, w)| acc + b * *w);
            let got = p.f2_prox(gamma, &z).unwrap();
            assert!((got.as_dmatrix() - oracle).amax() < 1e-12);
            assert!(is_hankel(&got, 0.0));
            // variational inequality against random feasible points
            let g = z.clone();
            for _ in 0..5 {
                let w = random_hankel(&mut rng, n);
                let lhs = inner(&(&(&g + &h.scale(gamma)) - &got), &(&w - &got)).unwrap();
                assert!(lhs <= 1e-10);
            }
        }
    }

    #[test]
    fn hankel_prox_stationary_point() {
        let h = build_triangle_hankel(4).unwrap();
        let p = ProblemSpec::hankel(h.clone()).unwrap();
        let gamma = 0.7;
        assert!(p.f2_prox(gamma, &h.scale(-gamma)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn completion_and_quadratic_prox() {
        let data = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let p = ProblemSpec::completion(vec![true, false, false, true], data).unwrap();
        let z = Matrix::from_rows(&[vec![1.0, 9.0], vec![8.0, 4.0]]).unwrap();
        assert_eq!(p.f2_prox(1.0, &z).unwrap(), z);
        let other = Matrix::from_rows(&[vec![0.0, 9.0], vec![8.0, 0.0]]).unwrap();
        assert_eq!(p.f2_prox(1.0, &other).unwrap(), z);
        assert_eq!(p.f2_value(&other).unwrap(), f64::INFINITY);
        assert_eq!(p.f2_value(&z).unwrap(), 0.0);

        let a = Matrix::diag(&[1.0, 2.0]).unwrap();
        let q = ProblemSpec::quadratic(a.clone());
        assert!(frob_dist(&q.f2_prox(0.3, &a).unwrap(), &a) < 1e-15);
    }

    #[test]
    fn gradient_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(&mut rng, 3, 4);
        let q = ProblemSpec::quadratic(a.clone());
        let (g, l) = q.f2_grad(&a).unwrap();
        assert!(g.is_zero());
        assert_eq!(l, 1.0);
        let delta = random(&mut rng, 3, 4);
        let (g, _) = q.f2_grad(&(&a + &delta)).unwrap();
        assert!(frob_dist(&g, &delta) < 1e-15);

        let h = ProblemSpec::hankel(build_triangle_hankel(3).unwrap()).unwrap();
        assert!(matches!(h.f2_grad(&Matrix::zeros(3, 3)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(&mut rng, 3, 3);
        let q = ProblemSpec::quadratic(a);
        let x = random(&mut rng, 3, 3);
        let (g, _) = q.f2_grad(&x).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let bump = Matrix::from_fn(3, 3, |a, b| if (a, b) == (i, j) { h } else { 0.0 }).unwrap();
                let fd = (q.f2_value(&(&x + &bump)).unwrap() - q.f2_value(&(&x - &bump)).unwrap()) / (2.0 * h);
                let rel = (fd - g.get(i, j)).abs() / g.get(i, j).abs().max(1e-3);
                worst = worst.max(rel);
            }
        }
        assert!(worst <= 1e-6, "worst relative error {worst}");
    }

    #[test]
    fn objective_examples() {
        let h = build_triangle_hankel(4).unwrap();
        let p = ProblemSpec::hankel(h.clone()).unwrap();
        let rank_h = matrix::numerical_rank(&h, matrix::DEFAULT_RANK_TOL);
        let spec = ObjectiveSpec::half_square(rank_h, 1.0).unwrap();
        let v = objective_eval(&p, &spec, &h).unwrap();
        assert_abs_diff_eq!(v.nonconvex, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.envelope, 0.0, epsilon = 1e-12);

        // rank ≤ r feasible point: both finite and equal
        let spec1 = ObjectiveSpec::half_square(1, 1.0).unwrap();
        let m = Matrix::from_fn(4, 4, |_, _| 0.5).unwrap();
        let v = objective_eval(&p, &spec1, &m).unwrap();
        assert!(v.nonconvex.is_finite());
        assert_abs_diff_eq!(v.nonconvex, v.envelope, epsilon = 1e-12);
        assert_abs_diff_eq!(v.nonconvex, 0.5 * frob_dist(&h, &m).powi(2), epsilon = 1e-12);

        // rank-2 Hankel point with r = 1
        let m2 = matrix::hankel_from_sequence(4, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let v = objective_eval(&p, &spec1, &m2).unwrap();
        assert_eq!(v.nonconvex, f64::INFINITY);
        assert!(v.envelope.is_finite());
    }

    #[test]
    fn lower_bound_trivial_problem() {
        // f₂ = 0 (completion with empty mask): the relaxation is minimized at 0
        let p = ProblemSpec::completion(vec![false; 4], Matrix::zeros(2, 2)).unwrap();
        let spec = ObjectiveSpec::half_square(1, 1.0).unwrap();
        assert_eq!(lower_bound(&p, &spec, &Matrix::zeros(2, 2)).unwrap(), 0.0);
    }

    #[test]
    fn subgradient_residuals() {
        let h = build_triangle_hankel(3).unwrap();
        let p = ProblemSpec::hankel(h.clone()).unwrap();
        let x = hankel_project(&svd_r(&h, 1).unwrap().0);
        assert!(p.subgradient_residual(&x, &h.scale(-1.0)).unwrap() < 1e-12);
        assert!(p.subgradient_residual(&x, &h).unwrap() > 1.0);
    }

    #[test]
    fn problem_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let problems = vec![
            ProblemSpec::hankel(build_triangle_hankel(3).unwrap()).unwrap(),
            ProblemSpec::completion(vec![true, false, true, true, false, true], random(&mut rng, 2, 3)).unwrap(),
            ProblemSpec::quadratic(random(&mut rng, 3, 2)),
        ];
        for p in problems {
            assert_eq!(parse_problem(&to_problem_text(&p)).unwrap(), p);
        }
        assert!(parse_problem("variant hankel\nmatrix H\n2 2\n1 2\n3 4\n").is_err());
        assert!(parse_problem("variant nope\n").is_err());
        assert!(parse_problem("matrix H\n1 1\n1\n").is_err());
    }
}
