//! Symmetric gauges, their truncated duals, low-rank inducing norms and the
//! scalar outer functions `k` with their monotone conjugates.
//!
//! Every norm here is unitarily invariant, so evaluation goes through the
//! singular values. Vector-level functions take singular values sorted
//! nonincreasingly and nonnegative.
//!
//! Only the Frobenius (`ℓ₂`) gauge is provided. A new gauge must supply
//! `g`, its dual `g^D`, the top-`r` truncation of `g^D`, and the dual of that
//! truncation; everything downstream is written against [`Gauge`].

use crate::error::Result;
use crate::matrix::{check_rank, svd, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gauge {
    /// Frobenius norm; self-dual.
    #[default]
    L2,
}

impl Gauge {
    /// `g(x)` on a vector of magnitudes.
    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            Gauge::L2 => l2(x),
        }
    }

    /// `g^D(x)`.
    pub fn dual_eval(self, x: &[f64]) -> f64 {
        match self {
            Gauge::L2 => l2(x),
        }
    }

    /// `g^D(σ₁, …, σ_r)` for sorted `sigma`.
    pub fn truncated_dual_eval(self, sigma: &[f64], r: usize) -> f64 {
        self.dual_eval(&sigma[..r.min(sigma.len())])
    }

    /// Low-rank inducing norm `‖σ‖_{g,r*}`, the dual of [`Self::truncated_dual_eval`].
    pub fn low_rank_inducing_eval(self, sigma: &[f64], r: usize) -> f64 {
        match self {
            Gauge::L2 => l2_low_rank_inducing(sigma, r).value,
        }
    }
}

fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Evaluation of the `ℓ₂` low-rank inducing norm together with the number of
/// trailing singular values that were pooled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledNorm {
    pub value: f64,
    /// Number `t ∈ 1..=r` of top-`r` slots that share the pooled tail.
    pub pooled: usize,
}

/// `‖σ‖²_{ℓ₂,r*} = min { Σ σ_i² / w_i : 0 ≤ w ≤ 1, Σ w = r }`. The minimizer
/// caps the leading `r − t` weights at one and spreads the remaining `t`
/// proportionally to `σ` over the tail, for some `t ∈ 1..=r`. Each admissible
/// `t` (all weights ≤ 1) gives an upper bound, and the optimum is among them.
pub fn l2_low_rank_inducing(sigma: &[f64], r: usize) -> PooledNorm {
    let q = sigma.len();
    let r = r.clamp(1, q.max(1));
    if q == 0 {
        return PooledNorm { value: 0.0, pooled: 1 };
    }
    let head_sq: Vec<f64> = std::iter::once(0.0)
        .chain(sigma.iter().scan(0.0, |acc, s| {
            *acc += s * s;
            Some(*acc)
        }))
        .collect();
    let mut best: Option<PooledNorm> = None;
    let mut tail: f64 = sigma[r..].iter().sum();
    for t in 1..=r {
        let lead = r - t;
        tail += sigma[lead];
        let largest_pooled = sigma[lead];
        let admissible = tail == 0.0 || largest_pooled * t as f64 <= tail * (1.0 + 1e-12);
        if !admissible {
            continue;
        }
        let value = (head_sq[lead] + tail * tail / t as f64).sqrt();
        if best.is_none_or(|b| value < b.value) {
            best = Some(PooledNorm { value, pooled: t });
        }
    }
    // t = r always admits when σ₁ ≤ Σσ/r; if rounding rejected every t the
    // full pool is the fallback.
    best.unwrap_or_else(|| {
        let total: f64 = sigma.iter().sum();
        PooledNorm { value: (total * total / r as f64).sqrt(), pooled: r }
    })
}

/// `‖A‖_g = g(σ(A))`.
pub fn gauge_eval(g: Gauge, a: &Matrix) -> f64 {
    g.eval(&svd(a).sigma)
}

/// `‖A‖_{g^D,r}`.
pub fn truncated_dual_gauge_eval(g: Gauge, r: usize, a: &Matrix) -> Result<f64> {
    check_rank(r, a.min_dim())?;
    Ok(g.truncated_dual_eval(&svd(a).sigma, r))
}

/// `‖A‖_{g,r*}`.
pub fn low_rank_inducing_norm_eval(g: Gauge, r: usize, a: &Matrix) -> Result<f64> {
    check_rank(r, a.min_dim())?;
    Ok(g.low_rank_inducing_eval(&svd(a).sigma, r))
}

/// The increasing convex outer function `k` on `ℝ≥0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScalarFn {
    /// `k(t) = t²/2`.
    #[default]
    HalfSquare,
    /// `k(t) = t`.
    Identity,
}

impl ScalarFn {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            ScalarFn::HalfSquare => 0.5 * t * t,
            ScalarFn::Identity => t,
        }
    }

    /// `k⁺(s) = sup_{x ≥ 0} [x s − k(x)]`, possibly `+∞`.
    pub fn monotone_conjugate(self, s: f64) -> f64 {
        match self {
            ScalarFn::HalfSquare => {
                let s = s.max(0.0);
                0.5 * s * s
            }
            ScalarFn::Identity => {
                if s <= 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `argmin_{t ≥ 0} γ k(t) + ½ (t − a)²` for `a ≥ 0`.
    pub fn prox_nonneg(self, gamma: f64, a: f64) -> f64 {
        match self {
            ScalarFn::HalfSquare => a.max(0.0) / (1.0 + gamma),
            ScalarFn::Identity => (a - gamma).max(0.0),
        }
    }
}

pub fn monotone_conjugate_eval(k: ScalarFn, s: f64) -> f64 {
    k.monotone_conjugate(s)
}
