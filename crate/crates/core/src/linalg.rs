//! Dense complex linear algebra used throughout the crate.
//!
//! [`CVector`] and [`CMatrix`] are small owned containers over [`Complex64`]
//! with the physics inner-product convention: `inner(a, b)` is conjugate-linear
//! in `a` and linear in `b`. The Hermitian eigensolver and the singular value
//! decomposition are delegated to `nalgebra`; everything else is plain loops
//! since the matrices involved stay in the tens of rows.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{shape, Error, Result};

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Relative Hermitian tolerance accepted by [`herm_eig`].
pub const HERMITIAN_TOL: f64 = 1e-8;

const EIG_MAX_ITER: usize = 100_000;

/// A column vector in `ℂⁿ`.
#[derive(Clone, PartialEq, Default)]
pub struct CVector {
    entries: Vec<Complex64>,
}

impl CVector {
    pub fn new(entries: Vec<Complex64>) -> Self {
        Self { entries }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: vec![ZERO; dim],
        }
    }

    /// The `k`-th standard basis vector of `ℂ^dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.entries[k] = ONE;
        v
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self {
            entries: values.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.entries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.entries.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            entries: self.entries.iter().map(|z| z * c).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `|self⟩⟨other|`, the rank-one operator `c ↦ self·⟨other, c⟩`.
    pub fn outer(&self, other: &CVector) -> CMatrix {
        CMatrix::from_fn(self.dim(), other.dim(), |i, j| {
            self.entries[i] * other.entries[j].conj()
        })
    }
}

impl fmt::Debug for CVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.iter()).finish()
    }
}

impl Index<usize> for CVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.entries[i]
    }
}

impl IndexMut<usize> for CVector {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.entries[i]
    }
}

impl From<Vec<Complex64>> for CVector {
    fn from(entries: Vec<Complex64>) -> Self {
        Self::new(entries)
    }
}

impl FromIterator<Complex64> for CVector {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

impl Add for &CVector {
    type Output = CVector;
    fn add(self, rhs: &CVector) -> CVector {
        assert_eq!(self.dim(), rhs.dim(), "vector dimension mismatch");
        self.entries.iter().zip(&rhs.entries).map(|(a, b)| a + b).collect()
    }
}

impl Sub for &CVector {
    type Output = CVector;
    fn sub(self, rhs: &CVector) -> CVector {
        assert_eq!(self.dim(), rhs.dim(), "vector dimension mismatch");
        self.entries.iter().zip(&rhs.entries).map(|(a, b)| a - b).collect()
    }
}

impl Neg for &CVector {
    type Output = CVector;
    fn neg(self) -> CVector {
        self.entries.iter().map(|z| -z).collect()
    }
}

/// `Σᵢ conj(aᵢ)·bᵢ`.
pub fn inner(a: &CVector, b: &CVector) -> Result<Complex64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: "inner",
            expected: a.dim().to_string(),
            found: b.dim().to_string(),
        });
    }
    Ok(inner_unchecked(a.as_slice(), b.as_slice()))
}

pub(crate) fn inner_unchecked(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "CMatrix::new",
                expected: (rows * cols).to_string(),
                found: data.len().to_string(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                context: "CMatrix::from_rows",
                expected: m.to_string(),
                found: bad.len().to_string(),
            });
        }
        Ok(Self {
            rows: n,
            cols: m,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Self::new(rows, cols, values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn scalar(z: Complex64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![z],
        }
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { Complex64::new(values[i], 0.0) } else { ZERO })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> CVector {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `‖M − M*‖_fro`.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (self - &self.adjoint()).norm_fro()
    }

    pub fn try_mul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                context: "matrix product",
                expected: format!("{} rows", self.cols),
                found: shape(rhs.rows, rhs.cols),
            });
        }
        Ok(self.mul_unchecked(rhs))
    }

    fn mul_unchecked(&self, rhs: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let lhs_row = self.row(i);
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in lhs_row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &CVector) -> Result<CVector> {
        if self.cols != v.dim() {
            return Err(Error::DimensionMismatch {
                context: "matrix-vector product",
                expected: self.cols.to_string(),
                found: v.dim().to_string(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `M*·v` without forming the adjoint.
    pub fn adjoint_mul_vec(&self, v: &CVector) -> Result<CVector> {
        if self.rows != v.dim() {
            return Err(Error::DimensionMismatch {
                context: "adjoint-vector product",
                expected: self.rows.to_string(),
                found: v.dim().to_string(),
            });
        }
        let mut out = CVector::zeros(self.cols);
        for i in 0..self.rows {
            let vi = v[i];
            for (o, a) in out.entries.iter_mut().zip(self.row(i)) {
                *o += a.conj() * vi;
            }
        }
        Ok(out)
    }

    /// Integer power of a square matrix; `pow(0)` is the identity.
    pub fn pow(&self, n: u32) -> Result<CMatrix> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let mut out = CMatrix::identity(self.rows);
        for _ in 0..n {
            out = out.mul_unchecked(self);
        }
        Ok(out)
    }

    pub fn block(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> CMatrix {
        assert!(
            row0 + rows <= self.rows && col0 + cols <= self.cols,
            "block out of range"
        );
        CMatrix::from_fn(rows, cols, |i, j| self[(row0 + i, col0 + j)])
    }

    pub fn set_block(&mut self, row0: usize, col0: usize, block: &CMatrix) {
        assert!(
            row0 + block.rows <= self.rows && col0 + block.cols <= self.cols,
            "block out of range"
        );
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(row0 + i, col0 + j)] = block[(i, j)];
            }
        }
    }

    /// Horizontal concatenation; all parts must share the row count.
    pub fn hstack(parts: &[CMatrix]) -> Result<CMatrix> {
        let rows = parts.first().map_or(0, CMatrix::rows);
        if let Some(bad) = parts.iter().find(|p| p.rows != rows) {
            return Err(Error::DimensionMismatch {
                context: "hstack",
                expected: format!("{rows} rows"),
                found: shape(bad.rows, bad.cols),
            });
        }
        let cols = parts.iter().map(CMatrix::cols).sum();
        let mut out = CMatrix::zeros(rows, cols);
        let mut col0 = 0;
        for p in parts {
            out.set_block(0, col0, p);
            col0 += p.cols;
        }
        Ok(out)
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> Result<f64> {
        if self.rows == 0 || self.cols == 0 {
            return Ok(0.0);
        }
        Ok(svd(self)?.singular_values.first().copied().unwrap_or(0.0))
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:>+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        self.mul_unchecked(rhs)
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix sum shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix difference shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Spectral decomposition `M = U·diag(λ)·U*` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEig {
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose `k`-th column pairs with `eigenvalues[k]`.
    pub eigenvectors: CMatrix,
}

impl HermEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Smallest eigenvalue, or 0 for the empty matrix.
    pub fn min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// `U·diag(λ)·U*`.
    pub fn reconstruct(&self) -> CMatrix {
        let u = &self.eigenvectors;
        let n = u.rows();
        CMatrix::from_fn(n, n, |i, j| {
            self.eigenvalues
                .iter()
                .enumerate()
                .map(|(k, &l)| u[(i, k)] * u[(j, k)].conj() * l)
                .sum()
        })
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// The input is symmetrized as `(M + M*)/2` first; it is rejected when
/// `‖M − M*‖_fro > 1e-8·(1 + ‖M‖_fro)`.
pub fn herm_eig(m: &CMatrix) -> Result<HermEig> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let defect = m.hermitian_defect();
    let bound = HERMITIAN_TOL * (1.0 + m.norm_fro());
    if defect > bound {
        return Err(Error::NotHermitian { defect, bound });
    }
    let n = m.rows();
    if n == 0 {
        return Ok(HermEig {
            eigenvalues: Vec::new(),
            eigenvectors: CMatrix::zeros(0, 0),
        });
    }
    let sym = (m + &m.adjoint()).scale_real(0.5);
    let eig = nalgebra::SymmetricEigen::try_new(sym.to_nalgebra(), f64::EPSILON, EIG_MAX_ITER)
        .ok_or(Error::NoConvergence("Hermitian eigensolver"))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Thin singular value decomposition `M = U·diag(σ)·V*`, σ descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v_adjoint: CMatrix,
}

pub fn svd(m: &CMatrix) -> Result<Svd> {
    let k = m.rows().min(m.cols());
    if k == 0 {
        return Ok(Svd {
            u: CMatrix::zeros(m.rows(), 0),
            singular_values: Vec::new(),
            v_adjoint: CMatrix::zeros(0, m.cols()),
        });
    }
    let dec = nalgebra::SVD::try_new(m.to_nalgebra(), true, true, f64::EPSILON, EIG_MAX_ITER)
        .ok_or(Error::NoConvergence("singular value decomposition"))?;
    let u = dec.u.as_ref().ok_or(Error::NoConvergence("singular vectors"))?;
    let vt = dec.v_t.as_ref().ok_or(Error::NoConvergence("singular vectors"))?;

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));
    Ok(Svd {
        u: CMatrix::from_fn(m.rows(), k, |i, j| u[(i, order[j])]),
        singular_values: order.iter().map(|&j| dec.singular_values[j]).collect(),
        v_adjoint: CMatrix::from_fn(k, m.cols(), |i, j| vt[(order[i], j)]),
    })
}

/// Numerical rank: singular values above `rtol·σ_max`.
pub fn rank(m: &CMatrix, rtol: f64) -> Result<usize> {
    let s = svd(m)?.singular_values;
    let cutoff = rtol * s.first().copied().unwrap_or(0.0);
    Ok(s.iter().filter(|&&x| x > cutoff && x > 0.0).count())
}

/// Minimum-norm least-squares solution of `A·X = B`.
///
/// Singular values below `max(rows, cols)·ε·σ_max` are treated as zero.
pub fn lstsq(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch {
            context: "lstsq",
            expected: format!("{} rows", a.rows()),
            found: shape(b.rows(), b.cols()),
        });
    }
    let dec = svd(a)?;
    let smax = dec.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = a.rows().max(a.cols()) as f64 * f64::EPSILON * smax;
    // X = V·diag(1/σ)·U*·B over the retained singular triplets.
    let utb = dec.u.adjoint().try_mul(b)?;
    let mut x = CMatrix::zeros(a.cols(), b.cols());
    for (k, &s) in dec.singular_values.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        for i in 0..a.cols() {
            let v = dec.v_adjoint[(k, i)].conj() / s;
            for j in 0..b.cols() {
                x[(i, j)] += v * utb[(k, j)];
            }
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_matrix, random_vector, rng};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inner_examples() {
        let e0 = CVector::basis(2, 0);
        let e1 = CVector::basis(2, 1);
        assert_eq!(inner(&e0, &e1).unwrap(), ZERO);

        let a = CVector::new(vec![c(0.0, 1.0), ZERO]);
        assert_eq!(inner(&a, &a).unwrap(), ONE);

        // conj(1)·3 + conj(2i)·1 = 3 − 2i
        let a = CVector::new(vec![ONE, c(0.0, 2.0)]);
        let b = CVector::new(vec![c(3.0, 0.0), ONE]);
        assert_eq!(inner(&a, &b).unwrap(), c(3.0, -2.0));
    }

    #[test]
    fn inner_dimension_mismatch() {
        let err = inner(&CVector::zeros(2), &CVector::zeros(3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn herm_eig_examples() {
        let e = herm_eig(&CMatrix::identity(2)).unwrap();
        assert_eq!(e.eigenvalues.len(), 2);
        for l in &e.eigenvalues {
            assert!((l - 1.0).abs() < 1e-14);
        }

        let m = CMatrix::from_real(2, 2, &[1.0, 2.0, 2.0, 1.0]).unwrap();
        let e = herm_eig(&m).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-13);
        assert!((e.eigenvalues[1] + 1.0).abs() < 1e-13);

        let e = herm_eig(&CMatrix::zeros(3, 3)).unwrap();
        assert_eq!(e.eigenvalues, vec![0.0; 3]);
    }

    #[test]
    fn herm_eig_rejects_bad_input() {
        assert!(matches!(
            herm_eig(&CMatrix::zeros(2, 3)),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
        let m = CMatrix::from_real(2, 2, &[1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(matches!(herm_eig(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn herm_eig_absorbs_roundoff_asymmetry() {
        let mut m = CMatrix::from_real(2, 2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        m[(0, 1)] += c(1e-12, 0.0);
        let e = herm_eig(&m).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-11);
    }

    #[test]
    fn herm_eig_invariants_on_random_hermitian() {
        let mut g = rng(7);
        for n in [1, 2, 5, 12, 24] {
            let f = random_matrix(&mut g, n + 3, n);
            let m = &f.adjoint() * &f;
            let e = herm_eig(&m).unwrap();
            let scale = m.norm_fro();
            for w in e.eigenvalues.windows(2) {
                assert!(w[0] >= w[1]);
            }
            for k in 0..n {
                let v = e.eigenvectors.column(k);
                let mv = m.mul_vec(&v).unwrap();
                let lv = v.scale(c(e.eigenvalues[k], 0.0));
                assert!((&mv - &lv).norm() <= 1e-10 * scale);
            }
            let u = &e.eigenvectors;
            let gram = &u.adjoint() * u;
            assert!((&gram - &CMatrix::identity(n)).norm_fro() <= 1e-10 * (n as f64).sqrt());
            assert!((&e.reconstruct() - &m).norm_fro() <= 1e-9 * (1.0 + scale));
        }
    }

    #[test]
    fn lstsq_identity_system() {
        let mut g = rng(1);
        let b = random_matrix(&mut g, 4, 3);
        let x = lstsq(&CMatrix::identity(4), &b).unwrap();
        assert!((&x - &b).norm_fro() < 1e-13);
    }

    #[test]
    fn lstsq_self_system_has_zero_residual() {
        let mut g = rng(2);
        // rank-deficient: 5x4 of rank 2
        let a = &random_matrix(&mut g, 5, 2) * &random_matrix(&mut g, 2, 4);
        let x = lstsq(&a, &a).unwrap();
        assert!((&(&a * &x) - &a).norm_fro() < 1e-12 * a.norm_fro());
        // minimum-norm solution is the orthogonal projector onto the row space
        assert!((&(&x * &x) - &x).norm_fro() < 1e-10);
        assert!(x.hermitian_defect() < 1e-10);
        assert!((x.trace().re - 2.0).abs() < 1e-10);
    }

    /// Normal equations `(A*A)·X = A*B` solved by Gaussian elimination with
    /// partial pivoting.
    fn normal_equations(a: &CMatrix, b: &CMatrix) -> CMatrix {
        let mut lhs = &a.adjoint() * a;
        let mut rhs = &a.adjoint() * b;
        let n = lhs.rows();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| lhs[(i, col)].norm().total_cmp(&lhs[(j, col)].norm()))
                .unwrap();
            for j in 0..n {
                let t = lhs[(col, j)];
                lhs[(col, j)] = lhs[(piv, j)];
                lhs[(piv, j)] = t;
            }
            for j in 0..rhs.cols() {
                let t = rhs[(col, j)];
                rhs[(col, j)] = rhs[(piv, j)];
                rhs[(piv, j)] = t;
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = lhs[(i, col)] / lhs[(col, col)];
                for j in 0..n {
                    let t = lhs[(col, j)];
                    lhs[(i, j)] -= f * t;
                }
                for j in 0..rhs.cols() {
                    let t = rhs[(col, j)];
                    rhs[(i, j)] -= f * t;
                }
            }
        }
        CMatrix::from_fn(n, rhs.cols(), |i, j| rhs[(i, j)] / lhs[(i, i)])
    }

    #[test]
    fn lstsq_matches_normal_equations_on_overdetermined_system() {
        let mut g = rng(3);
        let a = random_matrix(&mut g, 6, 3);
        let b = random_matrix(&mut g, 6, 2);
        let x = lstsq(&a, &b).unwrap();
        let oracle = normal_equations(&a, &b);
        let r1 = (&(&a * &x) - &b).norm_fro();
        let r2 = (&(&a * &oracle) - &b).norm_fro();
        assert!((r1 - r2).abs() <= 1e-9, "{r1} vs {r2}");
        assert!((&x - &oracle).norm_fro() <= 1e-9);
    }

    #[test]
    fn lstsq_dimension_mismatch() {
        assert!(lstsq(&CMatrix::identity(3), &CMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn spectral_norm_of_known_matrices() {
        let a = CMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((a.spectral_norm().unwrap() - 1.0).abs() < 1e-14);
        let d = CMatrix::diag_real(&[0.3, -2.0, 1.0]);
        assert!((d.spectral_norm().unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(CMatrix::zeros(0, 0).spectral_norm().unwrap(), 0.0);
    }

    #[test]
    fn adjoint_is_involution_and_norm_is_definite() {
        let mut g = rng(4);
        let m = random_matrix(&mut g, 3, 5);
        assert_eq!(m.adjoint().adjoint(), m);
        assert!(m.norm_fro() > 0.0);
        assert_eq!(CMatrix::zeros(3, 5).norm_fro(), 0.0);
    }

    proptest! {
        #[test]
        fn adjoint_consistency(seed in any::<u64>(), n in 1usize..6, k in 1usize..6) {
            let mut g = rng(seed);
            let m = random_matrix(&mut g, n, k);
            let a = random_vector(&mut g, n);
            let b = random_vector(&mut g, k);
            let lhs = inner(&a, &m.mul_vec(&b).unwrap()).unwrap();
            let rhs = inner(&m.adjoint_mul_vec(&a).unwrap(), &b).unwrap();
            let scale = a.norm() * m.norm_fro() * b.norm();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * scale);
        }

        #[test]
        fn gram_matrices_have_nonnegative_spectrum(seed in any::<u64>(), n in 1usize..8, k in 1usize..8) {
            let mut g = rng(seed);
            let f = random_matrix(&mut g, k, n);
            let gram = &f.adjoint() * &f;
            let e = herm_eig(&gram).unwrap();
            prop_assert!(e.min() >= -1e-10 * gram.norm_fro());
        }

        #[test]
        fn hermitian_reconstruction(seed in any::<u64>(), n in 1usize..10) {
            let mut g = rng(seed);
            let x = random_matrix(&mut g, n, n);
            let m = &x + &x.adjoint();
            let e = herm_eig(&m).unwrap();
            prop_assert!((&e.reconstruct() - &m).norm_fro() <= 1e-9 * (1.0 + m.norm_fro()));
        }
    }
}
