//! Dense symmetric linear algebra for small matrices.
//!
//! Everything here is value-level: no shared state, no global RNG. Matrices
//! are square and row-major; dimensions beyond a hundred or so are not a
//! goal.

use std::ops::{Deref, Index, IndexMut};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Tolerances};

// ── Vector ──────────────────────────────────────────────────────────────

/// A dense real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Self {
        Self(entries)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// The `index`-th standard basis vector.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[index] = 1.0;
        v
    }

    /// Draws a vector with iid standard-normal entries.
    pub fn standard_normal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        Self((0..dim).map(|_| rng.sample(StandardNormal)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Vector {
        Self(self.0.iter().map(|x| x * factor).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &Vector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(&self) -> Option<Vector> {
        let n = self.norm();
        (n > 0.0).then(|| self.scaled(1.0 / n))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

// ── Matrix ──────────────────────────────────────────────────────────────

/// A dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = c;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidSpec(
                "matrix must have at least one row".into(),
            ));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend(row);
        }
        Ok(Self { dim, data })
    }

    /// `v wᵀ`.
    pub fn outer(v: &Vector, w: &Vector) -> Self {
        let dim = v.dim();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = v[i] * w[j];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vector {
        Vector((0..self.dim).map(|i| self[(i, j)]).collect())
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn add(&self, other: &Matrix) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dim, other.dim, "matrix dimension mismatch");
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += c · v vᵀ`.
    pub fn add_outer(&mut self, c: f64, v: &Vector) {
        for i in 0..self.dim {
            let ci = c * v[i];
            for j in 0..self.dim {
                self.data[i * self.dim + j] += ci * v[j];
            }
        }
    }

    pub fn add_identity(&mut self, c: f64) {
        for i in 0..self.dim {
            self[(i, i)] += c;
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Self {
        assert_eq!(self.dim, other.dim, "matrix dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &Vector) -> Vector {
        assert_eq!(self.dim, v.dim(), "matrix-vector dimension mismatch");
        Vector(
            (0..self.dim)
                .map(|i| self.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum())
                .collect(),
        )
    }

    /// `vᵀ M v`.
    pub fn quad_form(&self, v: &Vector) -> f64 {
        v.dot(&self.matvec(v))
    }

    /// Replaces the matrix by `(M + Mᵀ) / 2`.
    pub fn symmetrize(&mut self) {
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest relative asymmetry `|M_ij − M_ji| / max(1, |M_ij|)`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let (a, b) = (self[(i, j)], self[(j, i)]);
                worst = worst.max((a - b).abs() / a.abs().max(1.0));
            }
        }
        worst
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim == dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: dim,
            })
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.rows()
    }
}

// ── PsdMatrix ───────────────────────────────────────────────────────────

/// A symmetric positive semidefinite matrix.
///
/// Construction through [`PsdMatrix::new`] checks symmetry and the minimum
/// eigenvalue against [`Tolerances`]. Internal producers whose output is PSD
/// by construction (Gram matrices, weighted covariances, rank-one shrinks)
/// skip the eigenvalue check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct PsdMatrix(Matrix);

impl PsdMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        Self::with_tolerances(m, &Tolerances::DEFAULT)
    }

    pub fn with_tolerances(m: Matrix, tol: &Tolerances) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NotPsd("non-finite entries".into()));
        }
        let asym = m.asymmetry();
        if asym > tol.symmetry {
            return Err(Error::NotPsd(format!("asymmetry {asym:e}")));
        }
        let min = SymmetricEigen::new(&m).min();
        if min < -tol.psd_slack {
            return Err(Error::NotPsd(format!("minimum eigenvalue {min:e}")));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix that is PSD by construction. Symmetrizes it.
    pub(crate) fn from_construction(mut m: Matrix) -> Self {
        m.symmetrize();
        Self(m)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(Matrix::zeros(dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(Matrix::identity(dim))
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::NotPsd(format!("scale {c} is negative")));
        }
        Ok(Self(Matrix::scaled_identity(dim, c)))
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        if let Some(d) = diag.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(Error::NotPsd(format!("diagonal entry {d}")));
        }
        Ok(Self(Matrix::diagonal(diag)))
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// `α A + (1 − α) B`; stays in the cone for `α ∈ [0, 1]`.
    pub fn convex_combination(&self, other: &PsdMatrix, alpha: f64) -> Result<PsdMatrix> {
        self.0.check_dim(other.dim())?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidSpec(format!(
                "mixing weight {alpha} not in [0, 1]"
            )));
        }
        Ok(Self::from_construction(
            self.0.scaled(alpha).add(&other.0.scaled(1.0 - alpha)),
        ))
    }

    pub fn eigen(&self) -> SymmetricEigen {
        SymmetricEigen::new(&self.0)
    }

    /// Principal square root via the eigendecomposition.
    pub fn sqrt(&self) -> Matrix {
        self.eigen().map_values(|l| l.max(0.0).sqrt())
    }
}

impl Deref for PsdMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

impl TryFrom<Vec<Vec<f64>>> for PsdMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }
}

impl From<PsdMatrix> for Vec<Vec<f64>> {
    fn from(m: PsdMatrix) -> Self {
        m.0.rows()
    }
}

// ── Cholesky ────────────────────────────────────────────────────────────

/// Lower-triangular factor `L` with `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Matrix,
}

impl Cholesky {
    /// Plain factorization. Fails on any non-positive pivot.
    pub fn factor(m: &Matrix) -> Option<Self> {
        let n = m.dim();
        let mut l = Matrix::zeros(n);
        for j in 0..n {
            let mut diag = m[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag > 0.0 && diag.is_finite()) {
                return None;
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Some(Self { lower: l })
    }

    /// Factorization with diagonal jitter on failure.
    ///
    /// The first retry adds `tol.jitter · trace / d` to the diagonal; each
    /// further retry multiplies the jitter by ten.
    pub fn factor_jittered(m: &Matrix, tol: &Tolerances) -> Result<Self> {
        if let Some(c) = Self::factor(m) {
            return Ok(c);
        }
        let n = m.dim() as f64;
        let scale = (m.trace() / n).abs();
        let mut jitter = tol.jitter * if scale > 0.0 { scale } else { 1.0 };
        for _ in 0..tol.jitter_retries {
            let mut shifted = m.clone();
            shifted.add_identity(jitter);
            if let Some(c) = Self::factor(&shifted) {
                return Ok(c);
            }
            jitter *= 10.0;
        }
        Err(Error::CholeskyFailure {
            retries: tol.jitter_retries,
        })
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.lower.dim())
            .map(|i| self.lower[(i, i)].ln())
            .sum::<f64>()
    }

    /// `L z`.
    pub fn mul_lower(&self, z: &Vector) -> Vector {
        let n = self.lower.dim();
        Vector(
            (0..n)
                .map(|i| (0..=i).map(|k| self.lower[(i, k)] * z[k]).sum())
                .collect(),
        )
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &Vector) -> Vector {
        let n = self.lower.dim();
        let mut x = b.clone();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lower[(i, k)] * x[k];
            }
            x[i] = s / self.lower[(i, i)];
        }
        x
    }

    /// Solves `Lᵀ x = b`.
    pub fn solve_upper(&self, b: &Vector) -> Vector {
        let n = self.lower.dim();
        let mut x = b.clone();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.lower[(k, i)] * x[k];
            }
            x[i] = s / self.lower[(i, i)];
        }
        x
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &Vector) -> Vector {
        self.solve_upper(&self.solve_lower(b))
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.lower.dim();
        let mut inv = Matrix::zeros(n);
        for j in 0..n {
            let col = self.solve(&Vector::basis(n, j));
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv.symmetrize();
        inv
    }
}

// ── Symmetric eigensolver ───────────────────────────────────────────────

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenvalues are sorted ascending; column `k` of `vectors` belongs to
/// `values[k]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymmetricEigen {
    const MAX_SWEEPS: usize = 100;

    pub fn new(m: &Matrix) -> Self {
        let n = m.dim();
        let mut a = m.clone();
        a.symmetrize();
        let mut v = Matrix::identity(n);
        let scale = a.frobenius();

        for _ in 0..Self::MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum();
            if off.sqrt() <= f64::EPSILON * 1e-2 * scale || off == 0.0 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[(k, p)], a[(k, q)]);
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    for k in 0..n {
                        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let mut vectors = Matrix::zeros(n);
        for (col, &src) in order.iter().enumerate() {
            for k in 0..n {
                vectors[(k, col)] = v[(k, src)];
            }
        }
        Self { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `V diag(f(λ)) Vᵀ`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let mut out = Matrix::zeros(n);
        for (k, &l) in self.values.iter().enumerate() {
            let fl = f(l);
            if fl == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = self.vectors[(i, k)] * fl;
                for j in 0..n {
                    out[(i, j)] += vik * self.vectors[(j, k)];
                }
            }
        }
        out.symmetrize();
        out
    }
}

// ── Operations ──────────────────────────────────────────────────────────

/// `log det(I + x Σ)`, via Cholesky of `I + x Σ`.
pub fn logdet_potential(sigma: &PsdMatrix, x: f64) -> Result<f64> {
    logdet_potential_with(sigma, x, &Tolerances::DEFAULT)
}

pub fn logdet_potential_with(sigma: &PsdMatrix, x: f64, tol: &Tolerances) -> Result<f64> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "potential scale x = {x} must be ≥ 0"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut m = sigma.scaled(x);
    m.add_identity(1.0);
    let value = Cholesky::factor_jittered(&m, tol)?.logdet();
    // I + xΣ ⪰ I, so anything below zero is rounding.
    Ok(value.max(0.0))
}

/// `Σ − Σ v vᵀ Σ / (1 + vᵀ Σ v)`: the covariance after a rank-one precision
/// increment `v vᵀ`.
pub fn rank_one_shrink(sigma: &PsdMatrix, v: &Vector) -> Result<PsdMatrix> {
    sigma.check_dim(v.dim())?;
    let sv = sigma.matvec(v);
    let denom = 1.0 + v.dot(&sv);
    let mut out = sigma.as_matrix().clone();
    out.add_outer(-1.0 / denom, &sv);
    Ok(PsdMatrix::from_construction(out))
}

/// Whether `a ⪯ b`, i.e. `λ_min(b − a) ≥ −tol`.
pub fn psd_order_holds(a: &PsdMatrix, b: &PsdMatrix, tol: f64) -> Result<bool> {
    Ok(psd_order_gap(a, b)? >= -tol)
}

/// `λ_min(b − a)`.
pub fn psd_order_gap(a: &Matrix, b: &Matrix) -> Result<f64> {
    a.check_dim(b.dim())?;
    Ok(SymmetricEigen::new(&b.sub(a)).min())
}

/// `G Gᵀ · scale / dim` with iid standard-normal `G ∈ R^{dim×dim}`.
pub fn random_psd<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> PsdMatrix {
    random_psd_with_rank(dim, dim, scale, rng)
}

/// Like [`random_psd`] but with `G ∈ R^{dim×rank}`, so the result has rank
/// at most `rank`.
pub fn random_psd_with_rank<R: Rng + ?Sized>(
    dim: usize,
    rank: usize,
    scale: f64,
    rng: &mut R,
) -> PsdMatrix {
    assert!(dim >= 1, "random_psd needs dim ≥ 1");
    assert!(scale > 0.0, "random_psd needs scale > 0");
    let mut m = Matrix::zeros(dim);
    for _ in 0..rank {
        let g = Vector::standard_normal(dim, rng);
        m.add_outer(scale / dim as f64, &g);
    }
    PsdMatrix::from_construction(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(d: &[f64]) -> PsdMatrix {
        PsdMatrix::diagonal(d).unwrap()
    }

    // Determinant by cofactor expansion; only for tiny matrices.
    fn det_bruteforce(m: &Matrix) -> f64 {
        let n = m.dim();
        if n == 1 {
            return m[(0, 0)];
        }
        (0..n)
            .map(|j| {
                let minor = Matrix::from_rows(
                    (1..n)
                        .map(|i| (0..n).filter(|&k| k != j).map(|k| m[(i, k)]).collect())
                        .collect(),
                )
                .unwrap();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[(0, j)] * det_bruteforce(&minor)
            })
            .sum()
    }

    #[test]
    fn logdet_identity() {
        let v = logdet_potential(&PsdMatrix::identity(3), 1.0).unwrap();
        assert!((v - 3.0 * 2f64.ln()).abs() < 1e-14);
        assert!((v - 2.0794415416798357).abs() < 1e-12);
    }

    #[test]
    fn logdet_zero_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_psd(4, 2.0, &mut rng);
        assert_eq!(logdet_potential(&s, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn logdet_diag() {
        let v = logdet_potential(&diag(&[2.0, 0.5]), 3.0).unwrap();
        assert!((v - (7f64.ln() + 2.5f64.ln())).abs() < 1e-14);
        assert!((v - 2.862200880929).abs() < 1e-11);
    }

    #[test]
    fn logdet_matches_cofactor_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in 1..=4 {
            let s = random_psd(dim, 1.5, &mut rng);
            let mut m = s.scaled(2.5);
            m.add_identity(1.0);
            let want = det_bruteforce(&m).ln();
            assert!((logdet_potential(&s, 2.5).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn logdet_rejects_negative_scale() {
        assert!(logdet_potential(&PsdMatrix::identity(2), -1.0).is_err());
    }

    #[test]
    fn shrink_identity() {
        let out = rank_one_shrink(&PsdMatrix::identity(2), &Vector::basis(2, 0)).unwrap();
        assert_eq!(out.as_matrix(), &Matrix::diagonal(&[0.5, 1.0]));
    }

    #[test]
    fn shrink_zero_vector_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_psd(3, 1.0, &mut rng);
        let out = rank_one_shrink(&s, &Vector::zeros(3)).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn shrink_diag() {
        let out = rank_one_shrink(&diag(&[4.0, 1.0]), &Vector::basis(2, 0)).unwrap();
        assert!((out[(0, 0)] - 0.8).abs() < 1e-15);
        assert_eq!(out[(1, 1)], 1.0);
        assert_eq!(out[(0, 1)], 0.0);
    }

    #[test]
    fn shrink_dimension_mismatch() {
        assert!(matches!(
            rank_one_shrink(&PsdMatrix::identity(2), &Vector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn order_examples() {
        let z = PsdMatrix::zeros(2);
        let i = PsdMatrix::identity(2);
        assert!(psd_order_holds(&z, &i, 1e-9).unwrap());
        assert!(!psd_order_holds(&i, &z, 1e-9).unwrap());
        assert!(!psd_order_holds(&diag(&[1.0, 1.0]), &diag(&[2.0, 0.5]), 1e-9).unwrap());
        let gap = psd_order_gap(&diag(&[1.0, 1.0]), &diag(&[2.0, 0.5])).unwrap();
        assert!((gap + 0.5).abs() < 1e-15);
        assert!(psd_order_holds(&z, &PsdMatrix::identity(3), 1e-9).is_err());
    }

    #[test]
    fn random_psd_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let one = random_psd(1, 1.0, &mut rng);
        assert!(one[(0, 0)] >= 0.0);

        let a = random_psd(5, 3.0, &mut ChaCha8Rng::seed_from_u64(42));
        let b = random_psd(5, 3.0, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
        assert!(PsdMatrix::new(a.into_matrix()).is_ok());
    }

    #[test]
    fn psd_validation_rejects_bad_input() {
        let asym = Matrix::from_rows(vec![vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(PsdMatrix::new(asym).is_err());
        let indefinite = Matrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(PsdMatrix::new(indefinite).is_err());
        assert!(Matrix::from_rows(vec![vec![1.0, 2.0], vec![2.0]]).is_err());
    }

    #[test]
    fn eigen_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for dim in [1, 2, 5, 12] {
            let s = random_psd(dim, 1.0, &mut rng);
            let e = s.eigen();
            let back = e.map_values(|l| l);
            assert!(back.sub(&s).frobenius() < 1e-12 * (1.0 + s.frobenius()));
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let s = random_psd(4, 2.0, &mut rng);
        let r = s.sqrt();
        assert!(r.matmul(&r).sub(&s).frobenius() < 1e-12);
    }

    #[test]
    fn cholesky_jitter_rescues_singular() {
        let singular = Matrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(Cholesky::factor(&singular).is_none());
        assert!(Cholesky::factor_jittered(&singular, &Tolerances::DEFAULT).is_ok());

        let negative = Matrix::diagonal(&[1.0, -1.0]);
        assert!(matches!(
            Cholesky::factor_jittered(&negative, &Tolerances::DEFAULT),
            Err(Error::CholeskyFailure { retries: 3 })
        ));
    }

    #[test]
    fn cholesky_solve_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut m = random_psd(4, 1.0, &mut rng).into_matrix();
        m.add_identity(0.5);
        let c = Cholesky::factor(&m).unwrap();
        let b = Vector::new(vec![1.0, -2.0, 0.5, 3.0]);
        let x = c.solve(&b);
        assert!(m.matvec(&x).sub(&b).norm() < 1e-12);
        let prod = m.matmul(&c.inverse());
        assert!(prod.sub(&Matrix::identity(4)).frobenius() < 1e-12);
    }
}
