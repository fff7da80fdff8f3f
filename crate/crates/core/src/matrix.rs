//! Dense matrices, singular value decompositions and structured projections.
//!
//! [`Matrix`] is a thin newtype over `nalgebra::DMatrix<f64>` that enforces
//! finite entries and a nonempty shape. The SVD is computed by faer and
//! re-sorted so that singular values are nonincreasing; all consumers build
//! results from rank-one products `u_i v_iᵀ`, so column signs never matter.

use std::fmt::Write as _;
use std::ops::{Add, Range, Sub};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative threshold used by [`numerical_rank`] unless a caller overrides it.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Tie tolerance `τ_tie = 1e-9 · max(σ₁, 1)`.
pub fn default_tie_tolerance(sigma_max: f64) -> f64 {
    1e-9 * sigma_max.max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix(DMatrix<f64>);

impl Matrix {
    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::InvalidInput(format!("matrix must be at least 1x1, got {}x{}", m.nrows(), m.ncols())));
        }
        if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite entry at column-major position {pos}")));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix produced by internal arithmetic on finite operands.
    pub(crate) fn wrap(m: DMatrix<f64>) -> Self {
        debug_assert!(m.nrows() > 0 && m.ncols() > 0);
        Self(m)
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_slice(n, m, &flat)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::wrap(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self::wrap(DMatrix::identity(n, n))
    }

    /// Square diagonal matrix.
    pub fn diag(values: &[f64]) -> Result<Self> {
        Self::rect_diag(values.len(), values.len(), values)
    }

    /// `rows × cols` matrix with `values` on the main diagonal.
    pub fn rect_diag(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() > rows.min(cols) {
            return Err(Error::InvalidInput(format!(
                "{} diagonal values do not fit a {rows}x{cols} matrix",
                values.len()
            )));
        }
        let mut m = DMatrix::zeros(rows, cols);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        Self::from_dmatrix(m)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::from_dmatrix(DMatrix::from_fn(rows, cols, f))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    /// `q = min(n, m)`, the number of singular values.
    pub fn min_dim(&self) -> usize {
        self.rows().min(self.cols())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Self::wrap(&self.0 * s)
    }

    pub fn transpose(&self) -> Matrix {
        Self::wrap(self.0.transpose())
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols() != rhs.rows() {
            return Err(Error::ShapeMismatch { expected: (self.cols(), rhs.cols()), got: rhs.shape() });
        }
        Ok(Self::wrap(&self.0 * &rhs.0))
    }

    pub fn ensure_same_shape(&self, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch { expected: self.shape(), got: other.shape() });
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let (n, m) = self.shape();
        let mut out = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }
}

impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix add shape mismatch");
        Matrix::wrap(&self.0 + &rhs.0)
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix sub shape mismatch");
        Matrix::wrap(&self.0 - &rhs.0)
    }
}

/// `⟨A, B⟩ = trace(AᵀB)`.
pub fn inner(a: &Matrix, b: &Matrix) -> Result<f64> {
    a.ensure_same_shape(b)?;
    Ok(a.0.dot(&b.0))
}

pub fn frob_norm(a: &Matrix) -> f64 {
    a.0.norm()
}

/// Frobenius distance `‖A − B‖_F` without allocating.
pub fn frob_dist(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "frob_dist shape mismatch");
    a.0.iter().zip(b.0.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Singular value decomposition with nonincreasing singular values.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `n × q`, orthonormal columns.
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    /// `m × q`, orthonormal columns.
    pub v: DMatrix<f64>,
    /// Maximal runs of equal singular values (0-based index ranges).
    pub tie_groups: Vec<Range<usize>>,
    pub tau_tie: f64,
}

/// Full SVD with the default tie tolerance.
pub fn svd(a: &Matrix) -> Svd {
    let mut out = full_svd_raw(a);
    out.tau_tie = default_tie_tolerance(out.sigma.first().copied().unwrap_or(0.0));
    out.tie_groups = tie_groups(&out.sigma, out.tau_tie);
    out
}

pub fn full_svd(a: &Matrix, tau_tie: f64) -> Result<Svd> {
    if !(tau_tie >= 0.0 && tau_tie.is_finite()) {
        return Err(Error::InvalidInput(format!("tie tolerance must be finite and >= 0, got {tau_tie}")));
    }
    let mut out = full_svd_raw(a);
    out.tau_tie = tau_tie;
    out.tie_groups = tie_groups(&out.sigma, tau_tie);
    Ok(out)
}

fn full_svd_raw(a: &Matrix) -> Svd {
    let (n, m) = a.shape();
    let q = a.min_dim();
    let fa = faer::Mat::<f64>::from_fn(n, m, |i, j| a.0[(i, j)]);
    // faer's divide-and-conquer SVD converges for every finite input of the sizes used here
    let dec = fa.thin_svd().expect("SVD of a finite matrix");
    let (u_raw, v_raw) = (dec.U(), dec.V());
    let s_raw: Vec<f64> = dec.S().column_vector().iter().copied().collect();

    let mut order: Vec<usize> = (0..q).collect();
    // Stable sort keeps the decomposition deterministic under ties.
    order.sort_by(|&i, &j| s_raw[j].total_cmp(&s_raw[i]));

    let mut u = DMatrix::zeros(n, q);
    let mut v = DMatrix::zeros(m, q);
    let mut sigma = Vec::with_capacity(q);
    for (dst, &src) in order.iter().enumerate() {
        let s = s_raw[src];
        let sign = if s < 0.0 { -1.0 } else { 1.0 };
        sigma.push(s.abs());
        for i in 0..n {
            u[(i, dst)] = sign * u_raw[(i, src)];
        }
        for j in 0..m {
            v[(j, dst)] = v_raw[(j, src)];
        }
    }
    Svd { u, sigma, v, tie_groups: Vec::new(), tau_tie: 0.0 }
}

/// Partition `0..sigma.len()` into maximal blocks whose consecutive gaps are within `tau`.
pub fn tie_groups(sigma: &[f64], tau: f64) -> Vec<Range<usize>> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=sigma.len() {
        if i == sigma.len() || (sigma[i - 1] - sigma[i]).abs() > tau {
            groups.push(start..i);
            start = i;
        }
    }
    groups
}

impl Svd {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma.first().copied().unwrap_or(0.0)
    }

    /// `σ_i` with 1-based `i`; zero beyond `q`.
    pub fn sigma_at(&self, i: usize) -> f64 {
        assert!(i >= 1, "singular values are 1-indexed");
        self.sigma.get(i - 1).copied().unwrap_or(0.0)
    }

    /// `Σ_i values[i] · u_i v_iᵀ` over the stored singular vectors.
    pub fn compose(&self, values: &[f64]) -> Matrix {
        assert!(values.len() <= self.sigma.len());
        let mut out = DMatrix::zeros(self.u.nrows(), self.v.nrows());
        for (i, &s) in values.iter().enumerate() {
            if s != 0.0 {
                out.ger(s, &self.u.column(i), &self.v.column(i), 1.0);
            }
        }
        Matrix::wrap(out)
    }

    pub fn reconstruct(&self) -> Matrix {
        self.compose(&self.sigma)
    }

    /// Whether `σ_r = σ_{r+1}` within the tie tolerance (`r` is 1-based).
    pub fn ties_at(&self, r: usize) -> bool {
        r >= 1 && r < self.sigma.len() && (self.sigma[r - 1] - self.sigma[r]).abs() <= self.tau_tie
    }

    /// Largest `s` with `σ_r = … = σ_{r+s}` within the tie tolerance.
    pub fn tie_multiplicity(&self, r: usize) -> usize {
        let mut s = 0;
        while r + s < self.sigma.len() && (self.sigma[r - 1] - self.sigma[r + s]).abs() <= self.tau_tie {
            s += 1;
        }
        s
    }

    /// Best rank-`r` approximation built from this decomposition.
    pub fn truncate(&self, r: usize) -> Result<(Matrix, bool)> {
        check_rank(r, self.sigma.len())?;
        Ok((self.compose(&self.sigma[..r]), self.ties_at(r)))
    }
}

pub(crate) fn check_rank(r: usize, q: usize) -> Result<()> {
    if r == 0 || r > q {
        return Err(Error::RankOutOfRange { r, q });
    }
    Ok(())
}

/// Truncated SVD `svd_r(A)`. The flag reports `σ_r(A) = σ_{r+1}(A)`, in which
/// case the rank-`r` approximation is not unique and the returned matrix is
/// one deterministic member of the set.
pub fn svd_r(a: &Matrix, r: usize) -> Result<(Matrix, bool)> {
    check_rank(r, a.min_dim())?;
    svd(a).truncate(r)
}

/// Count of singular values above `rel_tol · σ₁`.
pub fn numerical_rank_of(sigma: &[f64], rel_tol: f64) -> usize {
    let top = sigma.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > rel_tol * top).count()
}

pub fn numerical_rank(a: &Matrix, rel_tol: f64) -> usize {
    numerical_rank_of(&svd(a).sigma, rel_tol)
}

/// Orthogonal projection onto Hankel matrices (constant anti-diagonals).
///
/// Square inputs are the primary use; rectangular inputs project onto
/// matrices constant along each `i + j = const` line.
pub fn hankel_project(a: &Matrix) -> Matrix {
    let (n, m) = a.shape();
    let mut sums = vec![0.0; n + m - 1];
    let mut counts = vec![0usize; n + m - 1];
    for i in 0..n {
        for j in 0..m {
            sums[i + j] += a.0[(i, j)];
            counts[i + j] += 1;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        *s /= c as f64;
    }
    Matrix::wrap(DMatrix::from_fn(n, m, |i, j| sums[i + j]))
}

/// Hankel matrix `X[i][j] = seq[i + j]`; `seq` must have `rows + cols − 1` entries.
pub fn hankel_from_sequence(rows: usize, cols: usize, seq: &[f64]) -> Result<Matrix> {
    if rows == 0 || cols == 0 || seq.len() != rows + cols - 1 {
        return Err(Error::InvalidInput(format!(
            "a {rows}x{cols} Hankel matrix needs {} generator values, got {}",
            (rows + cols).saturating_sub(1),
            seq.len()
        )));
    }
    Matrix::from_fn(rows, cols, |i, j| seq[i + j])
}

pub fn is_hankel(a: &Matrix, tol: f64) -> bool {
    let (n, m) = a.shape();
    (1..n).all(|i| (0..m - 1).all(|j| (a.0[(i, j)] - a.0[(i - 1, j + 1)]).abs() <= tol))
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Plain-text format: a header line `n m` followed by `n` rows of `m` values.
pub fn to_text(a: &Matrix) -> String {
    let (n, m) = a.shape();
    let mut out = format!("{n} {m}\n");
    for i in 0..n {
        let row: Vec<String> = (0..m).map(|j| format!("{:e}", a.get(i, j))).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn parse_text(src: &str) -> Result<Matrix> {
    let mut lines =
        src.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing `n m` header".into() })?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse { line: hline, msg: format!("bad header: {e}") })?;
    let [n, m] = dims[..] else {
        return Err(Error::Parse { line: hline, msg: "header must be `n m`".into() });
    };
    let mut data = Vec::with_capacity(n * m);
    for _ in 0..n {
        let (ln, row) = lines.next().ok_or(Error::Parse { line: hline, msg: format!("expected {n} rows") })?;
        let vals = parse_row(row.split_whitespace(), ln)?;
        if vals.len() != m {
            return Err(Error::Parse { line: ln, msg: format!("expected {m} values, got {}", vals.len()) });
        }
        data.extend(vals);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::Parse { line: ln, msg: "trailing content after matrix".into() });
    }
    Matrix::from_row_slice(n, m, &data)
}

pub fn to_csv(a: &Matrix) -> String {
    let (n, m) = a.shape();
    let mut out = String::new();
    for i in 0..n {
        let row: Vec<String> = (0..m).map(|j| format!("{:e}", a.get(i, j))).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn parse_csv(src: &str) -> Result<Matrix> {
    let mut rows = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        rows.push(parse_row(line.split(',').map(str::trim), i + 1)?);
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 1, msg: "empty CSV".into() });
    }
    Matrix::from_rows(&rows)
}

fn parse_row<'a>(tokens: impl Iterator<Item = &'a str>, line: usize) -> Result<Vec<f64>> {
    tokens.map(|t| t.parse::<f64>().map_err(|e| Error::Parse { line, msg: format!("bad value `{t}`: {e}") })).collect()
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads a matrix; `.csv` files use the CSV format, anything else the text format.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path)?;
    if is_csv(path) {
        parse_csv(&src)
    } else {
        parse_text(&src)
    }
}

pub fn write_matrix(path: impl AsRef<Path>, a: &Matrix) -> Result<()> {
    let path = path.as_ref();
    let body = if is_csv(path) { to_csv(a) } else { to_text(a) };
    crate::io::write_atomic(path, body.as_bytes())
}
