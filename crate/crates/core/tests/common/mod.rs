//! Independent oracles shared by the integration tests.
//!
//! Everything here works on the capped simplex `{0 ≤ w ≤ 1, Σw = r}` and
//! never calls the library's pooling formulas.

#![allow(dead_code)]

use lowrank_split::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Matrix {
    Matrix::from_fn(n, m, |_, _| StandardNormal.sample(rng)).unwrap()
}

/// Product of Gaussian `n×k` and `k×m` factors, so rank at most `k`.
pub fn low_rank(rng: &mut ChaCha8Rng, n: usize, m: usize, k: usize) -> Matrix {
    gaussian(rng, n, k).matmul(&gaussian(rng, k, m)).unwrap()
}

/// Euclidean projection onto the capped simplex: `clip(v − τ, 0, 1)` with `τ`
/// found by bisection.
pub fn project_capped_simplex(v: &[f64], r: f64) -> Vec<f64> {
    let total = |tau: f64| v.iter().map(|x| (x - tau).clamp(0.0, 1.0)).sum::<f64>();
    let lo_v = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_v = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo_v - 1.0, hi_v);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().map(|x| (x - tau).clamp(0.0, 1.0)).collect()
}

/// Accelerated projected gradient with restarts for a smooth convex `f` on
/// the capped simplex. Returns the best value seen.
pub fn minimize_on_capped_simplex(
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    lipschitz: f64,
    dim: usize,
    r: usize,
    iters: usize,
) -> f64 {
    let step = 1.0 / lipschitz;
    let mut x = vec![r as f64 / dim as f64; dim];
    let mut y = x.clone();
    let mut t: f64 = 1.0;
    let mut best = f(&x);
    let mut stalled = 0;
    for _ in 0..iters {
        let g = grad(&y);
        let cand: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - step * gi).collect();
        let xn = project_capped_simplex(&cand, r as f64);
        let fx = f(&xn);
        if fx > best {
            // restart momentum when the objective goes up
            t = 1.0;
            y = x.clone();
            continue;
        }
        stalled = if best - fx <= 1e-16 * best.abs().max(1.0) { stalled + 1 } else { 0 };
        best = fx;
        if stalled > 2000 {
            break;
        }
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = xn.iter().zip(&x).map(|(a, b)| a + (t - 1.0) / tn * (a - b)).collect();
        x = xn;
        t = tn;
    }
    best
}

/// `min_M γ·½‖M‖²_{r*} + ½‖M − Z‖²` from `σ(Z)`: the inner minimization over
/// `M` leaves `Σ γσ²/(2(w + γ))` to be minimized over the capped simplex.
pub fn envelope_prox_value(sigma: &[f64], gamma: f64, r: usize) -> f64 {
    let f = |w: &[f64]| sigma.iter().zip(w).map(|(s, wi)| gamma * s * s / (2.0 * (wi + gamma))).sum::<f64>();
    let g = |w: &[f64]| sigma.iter().zip(w).map(|(s, wi)| -gamma * s * s / (2.0 * (wi + gamma).powi(2))).collect();
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let l = gamma * smax * smax / gamma.powi(3);
    minimize_on_capped_simplex(f, g, l.max(1e-12), sigma.len(), r, 200_000)
}

/// `min_Y c·½ Σ_{i ≤ r} σ_i(Y)² + ½‖Y − W‖²` from `σ(W)`: the top-`r` sum of
/// squares is a maximum over the capped simplex, and swapping min and max
/// leaves `max_w Σ ½ s² c w/(1 + c w)`.
pub fn conjugate_prox_value(s: &[f64], c: f64, r: usize) -> f64 {
    let f = |w: &[f64]| -s.iter().zip(w).map(|(si, wi)| 0.5 * si * si * c * wi / (1.0 + c * wi)).sum::<f64>();
    let g = |w: &[f64]| s.iter().zip(w).map(|(si, wi)| -0.5 * si * si * c / (1.0 + c * wi).powi(2)).collect();
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let l = smax * smax * c * c;
    -minimize_on_capped_simplex(f, g, l.max(1e-12), s.len(), r, 200_000)
}

/// `‖σ‖_{r*} = min_w sqrt(Σ σ²/w)`. The minimizer is `w_i = min(1, t σ_i)`;
/// `t` is found by bisection on `Σ w = r`.
pub fn low_rank_norm(sigma: &[f64], r: usize) -> f64 {
    let nz: Vec<f64> = sigma.iter().cloned().filter(|&s| s > 0.0).collect();
    if nz.len() <= r {
        return nz.iter().map(|s| s * s).sum::<f64>().sqrt();
    }
    let total = |t: f64| nz.iter().map(|s| (t * s).min(1.0)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, 1.0);
    while total(hi) < r as f64 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < r as f64 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    nz.iter().map(|s| s * s / (t * s).min(1.0)).sum::<f64>().sqrt()
}

/// `c/2 Σ_{i≤r} σ_i(Y)² + ½‖Y − W‖²`, evaluated directly on matrices.
pub fn conjugate_objective(y: &Matrix, w: &Matrix, c: f64, r: usize) -> f64 {
    let sy = lowrank_split::svd(y).sigma;
    let top: f64 = sy.iter().take(r).map(|v| v * v).sum();
    0.5 * c * top + 0.5 * lowrank_split::matrix::frob_dist(y, w).powi(2)
}

/// `γ ½‖M‖²_{r*} + ½‖M − Z‖²` with the norm from [`low_rank_norm`].
pub fn envelope_objective(m: &Matrix, z: &Matrix, gamma: f64, r: usize) -> f64 {
    let sm = lowrank_split::svd(m).sigma;
    0.5 * gamma * low_rank_norm(&sm, r).powi(2) + 0.5 * lowrank_split::matrix::frob_dist(m, z).powi(2)
}
