//! `B(H)`-valued kernels on a finite index set, their scalar lift
//! `K̃((s,a),(t,b)) = ⟨a, K(s,t)·b⟩`, and elements of the lifted RKHS.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{shape, Error, Result};
use crate::linalg::{herm_eig, inner_unchecked, CMatrix, CVector, ZERO};

/// Relative tolerance for Hermitian symmetry of kernel blocks.
pub const KERNEL_SYMMETRY_TOL: f64 = 1e-12;

/// Default relative tolerance of the positive-definiteness test.
pub const DEFAULT_PD_TOL: f64 = 1e-10;

/// Finite ordered set of distinct labels.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSet {
    labels: Vec<String>,
    positions: HashMap<String, usize>,
}

impl IndexSet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        let mut positions = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if positions.insert(l.clone(), i).is_some() {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self { labels, positions })
    }

    /// Labels `"0"`, `"1"`, …, `"n-1"`.
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.positions
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(label.to_owned()))
    }

    pub fn check(&self, index: usize) -> Result<()> {
        if index < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index, len: self.len() })
        }
    }
}

/// A Hermitian-symmetric table `S×S → B(ℂᵈ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorKernel {
    index_set: IndexSet,
    dim: usize,
    // row-major m×m table of d×d blocks
    blocks: Vec<CMatrix>,
}

impl OperatorKernel {
    /// Builds a kernel from the full table of blocks, checking shapes and
    /// `K(t,s) = K(s,t)*` within `1e-12` relative.
    pub fn new(index_set: IndexSet, dim: usize, blocks: Vec<Vec<CMatrix>>) -> Result<Self> {
        let m = index_set.len();
        if blocks.len() != m || blocks.iter().any(|row| row.len() != m) {
            return Err(Error::DimensionMismatch {
                context: "kernel block table",
                expected: shape(m, m),
                found: format!("{} rows", blocks.len()),
            });
        }
        let blocks: Vec<CMatrix> = blocks.into_iter().flatten().collect();
        for b in &blocks {
            if b.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch {
                    context: "kernel block",
                    expected: shape(dim, dim),
                    found: shape(b.rows(), b.cols()),
                });
            }
        }
        for i in 0..m {
            for j in i..m {
                let bij = &blocks[i * m + j];
                let defect = (&blocks[j * m + i] - &bij.adjoint()).norm_fro();
                let bound = KERNEL_SYMMETRY_TOL * (1.0 + bij.norm_fro());
                if defect > bound {
                    return Err(Error::NotHermitian { defect, bound });
                }
            }
        }
        Ok(Self { index_set, dim, blocks })
    }

    pub fn from_fn(index_set: IndexSet, dim: usize, mut f: impl FnMut(usize, usize) -> CMatrix) -> Result<Self> {
        let m = index_set.len();
        let blocks = (0..m).map(|i| (0..m).map(|j| f(i, j)).collect()).collect();
        Self::new(index_set, dim, blocks)
    }

    /// Builds a kernel from the blocks with `i ≤ j`; the lower triangle is
    /// filled by adjoints. Diagonal blocks must be Hermitian.
    pub fn from_upper(index_set: IndexSet, dim: usize, mut f: impl FnMut(usize, usize) -> CMatrix) -> Result<Self> {
        let m = index_set.len();
        let mut table = vec![vec![CMatrix::zeros(0, 0); m]; m];
        for i in 0..m {
            for j in i..m {
                let b = f(i, j);
                if i != j {
                    table[j][i] = b.adjoint();
                }
                table[i][j] = b;
            }
        }
        Self::new(index_set, dim, table)
    }

    /// The Gram kernel `K(sᵢ,sⱼ) = Wᵢ*·Wⱼ` of a factor family.
    pub fn from_factors(index_set: IndexSet, factors: &[CMatrix]) -> Result<Self> {
        if factors.len() != index_set.len() {
            return Err(Error::DimensionMismatch {
                context: "factor family",
                expected: index_set.len().to_string(),
                found: factors.len().to_string(),
            });
        }
        let (rank, dim) = factors[0].shape();
        if let Some(bad) = factors.iter().find(|w| w.shape() != (rank, dim)) {
            return Err(Error::DimensionMismatch {
                context: "factor family",
                expected: shape(rank, dim),
                found: shape(bad.rows(), bad.cols()),
            });
        }
        let adj: Vec<CMatrix> = factors.iter().map(CMatrix::adjoint).collect();
        Self::from_fn(index_set, dim, |i, j| &adj[i] * &factors[j])
    }

    /// `K(s,t) = I` for all pairs.
    pub fn identity(index_set: IndexSet, dim: usize) -> Result<Self> {
        Self::from_fn(index_set, dim, |_, _| CMatrix::identity(dim))
    }

    pub fn zero(index_set: IndexSet, dim: usize) -> Result<Self> {
        Self::from_fn(index_set, dim, |_, _| CMatrix::zeros(dim, dim))
    }

    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    pub fn len(&self) -> usize {
        self.index_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_set.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `K(sᵢ, sⱼ)`. Panics on out-of-range indices; see [`Self::try_block`].
    pub fn block(&self, i: usize, j: usize) -> &CMatrix {
        &self.blocks[i * self.len() + j]
    }

    pub fn try_block(&self, i: usize, j: usize) -> Result<&CMatrix> {
        self.index_set.check(i)?;
        self.index_set.check(j)?;
        Ok(self.block(i, j))
    }

    pub fn block_by_label(&self, s: &str, t: &str) -> Result<&CMatrix> {
        let i = self.index_set.position(s)?;
        let j = self.index_set.position(t)?;
        Ok(self.block(i, j))
    }

    /// Relabels by `perm`: the new kernel's index `k` is the old index `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let m = self.len();
        let mut seen = vec![false; m];
        if perm.len() != m || perm.iter().any(|&p| p >= m || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument("not a permutation of the index set".into()));
        }
        let labels = perm.iter().map(|&p| self.index_set.label(p).to_owned());
        Self::from_fn(IndexSet::new(labels)?, self.dim, |i, j| {
            self.block(perm[i], perm[j]).clone()
        })
    }

    pub fn point(&self, label: &str, vector: CVector) -> Result<LiftedPoint> {
        let index = self.index_set.position(label)?;
        LiftedPoint::new(self, index, vector)
    }

    /// `K̃((s,a),(t,b)) = ⟨a, K(s,t)·b⟩`.
    pub fn lift(&self, p: &LiftedPoint, q: &LiftedPoint) -> Result<Complex64> {
        self.validate(p)?;
        self.validate(q)?;
        Ok(self.lift_unchecked(p, q))
    }

    fn lift_unchecked(&self, p: &LiftedPoint, q: &LiftedPoint) -> Complex64 {
        let kb = self
            .block(p.index, q.index)
            .mul_vec(&q.vector)
            .expect("validated dimensions");
        inner_unchecked(p.vector.as_slice(), kb.as_slice())
    }

    pub fn validate(&self, p: &LiftedPoint) -> Result<()> {
        self.index_set.check(p.index)?;
        if p.vector.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "lifted point",
                expected: self.dim.to_string(),
                found: p.vector.dim().to_string(),
            });
        }
        Ok(())
    }

    /// The `(m·d)×(m·d)` matrix whose `(i,j)` block is `K(sᵢ,sⱼ)`.
    pub fn block_gram(&self) -> BlockGram {
        let (m, d) = (self.len(), self.dim);
        let mut g = CMatrix::zeros(m * d, m * d);
        for i in 0..m {
            for j in 0..m {
                g.set_block(i * d, j * d, self.block(i, j));
            }
        }
        BlockGram { matrix: g }
    }

    /// Positive-definiteness test: the minimum eigenvalue of the block Gram
    /// matrix must be at least `−tol·(1 + ‖G‖_fro)`.
    pub fn is_positive_definite(&self, tol: f64) -> Result<PdCheck> {
        if !(tol >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be nonnegative, got {tol}"
            )));
        }
        let gram = self.block_gram();
        let gram_norm = gram.matrix.norm_fro();
        let min_eig = herm_eig(&gram.matrix)?.min();
        let threshold = -tol * (1.0 + gram_norm);
        Ok(PdCheck {
            positive: min_eig >= threshold,
            min_eig,
            threshold,
            gram_norm,
        })
    }

    /// `Σᵢⱼ ⟨hᵢ, K(sᵢ,sⱼ)·hⱼ⟩` for one vector per index.
    pub fn quadratic_form(&self, h: &[CVector]) -> Result<Complex64> {
        if h.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "quadratic form",
                expected: self.len().to_string(),
                found: h.len().to_string(),
            });
        }
        let stacked: CVector = h.iter().flat_map(|v| v.iter().copied()).collect();
        if stacked.dim() != self.len() * self.dim {
            return Err(Error::DimensionMismatch {
                context: "quadratic form",
                expected: (self.len() * self.dim).to_string(),
                found: stacked.dim().to_string(),
            });
        }
        let gh = self.block_gram().matrix.mul_vec(&stacked)?;
        Ok(inner_unchecked(stacked.as_slice(), gh.as_slice()))
    }
}

/// Block Gram matrix of a kernel.
#[derive(Debug, Clone)]
pub struct BlockGram {
    pub matrix: CMatrix,
}

/// Outcome of [`OperatorKernel::is_positive_definite`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdCheck {
    pub positive: bool,
    pub min_eig: f64,
    pub threshold: f64,
    pub gram_norm: f64,
}

/// A point `(s, a)` of `S × H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPoint {
    pub index: usize,
    pub vector: CVector,
}

impl LiftedPoint {
    pub fn new(kernel: &OperatorKernel, index: usize, vector: CVector) -> Result<Self> {
        let p = Self { index, vector };
        kernel.validate(&p)?;
        Ok(p)
    }
}

/// A finite combination `F = Σᵢ cᵢ·K̃(·,(sᵢ,aᵢ))` in the RKHS of the lifted
/// kernel.
#[derive(Debug, Clone)]
pub struct KernelSection {
    kernel: Arc<OperatorKernel>,
    terms: Vec<(Complex64, LiftedPoint)>,
}

impl KernelSection {
    pub fn zero(kernel: Arc<OperatorKernel>) -> Self {
        Self {
            kernel,
            terms: Vec::new(),
        }
    }

    /// The generator `K̃(·,(t,b))`.
    pub fn generator(kernel: Arc<OperatorKernel>, point: LiftedPoint) -> Result<Self> {
        let mut f = Self::zero(kernel);
        f.push(Complex64::new(1.0, 0.0), point)?;
        Ok(f)
    }

    pub fn from_terms(
        kernel: Arc<OperatorKernel>,
        terms: impl IntoIterator<Item = (Complex64, LiftedPoint)>,
    ) -> Result<Self> {
        let mut f = Self::zero(kernel);
        for (c, p) in terms {
            f.push(c, p)?;
        }
        Ok(f)
    }

    pub fn push(&mut self, coefficient: Complex64, point: LiftedPoint) -> Result<()> {
        self.kernel.validate(&point)?;
        self.terms.push((coefficient, point));
        Ok(())
    }

    pub fn kernel(&self) -> &Arc<OperatorKernel> {
        &self.kernel
    }

    pub fn terms(&self) -> &[(Complex64, LiftedPoint)] {
        &self.terms
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            kernel: Arc::clone(&self.kernel),
            terms: self.terms.iter().map(|(k, p)| (k * c, p.clone())).collect(),
        }
    }

    /// `F + G`, as a concatenation of terms.
    pub fn add(&self, other: &KernelSection) -> Result<Self> {
        self.same_kernel(other)?;
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Self {
            kernel: Arc::clone(&self.kernel),
            terms,
        })
    }

    /// `F(q) = Σᵢ cᵢ·K̃(q, (sᵢ,aᵢ))`; conjugate-linear in the vector of `q`.
    pub fn evaluate(&self, q: &LiftedPoint) -> Result<Complex64> {
        self.kernel.validate(q)?;
        Ok(self
            .terms
            .iter()
            .map(|(c, p)| c * self.kernel.lift_unchecked(q, p))
            .sum())
    }

    /// `⟨F, G⟩ = Σᵢⱼ conj(cᵢ)·dⱼ·K̃((sᵢ,aᵢ),(tⱼ,bⱼ))`.
    pub fn inner(&self, other: &KernelSection) -> Result<Complex64> {
        self.same_kernel(other)?;
        let mut acc = ZERO;
        for (c, p) in &self.terms {
            for (d, q) in &other.terms {
                acc += c.conj() * d * self.kernel.lift_unchecked(p, q);
            }
        }
        Ok(acc)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.inner(self).map(|z| z.re).unwrap_or(0.0)
    }

    fn same_kernel(&self, other: &KernelSection) -> Result<()> {
        if Arc::ptr_eq(&self.kernel, &other.kernel) || *self.kernel == *other.kernel {
            Ok(())
        } else {
            Err(Error::KernelMismatch)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{inner, ONE};
    use crate::random::{complex_normal, random_factors, random_vector, rng};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar_kernel(values: &[&[f64]]) -> OperatorKernel {
        let m = values.len();
        OperatorKernel::from_fn(IndexSet::numbered(m).unwrap(), 1, |i, j| {
            CMatrix::scalar(c(values[i][j], 0.0))
        })
        .unwrap()
    }

    fn contraction_half() -> OperatorKernel {
        scalar_kernel(&[&[1.0, 0.5, 0.25], &[0.5, 1.0, 0.5], &[0.25, 0.5, 1.0]])
    }

    fn random_section(k: &Arc<OperatorKernel>, g: &mut rand_chacha::ChaCha20Rng, n: usize) -> KernelSection {
        use rand::Rng;
        let terms: Vec<_> = (0..n)
            .map(|_| {
                let idx = g.random_range(0..k.len());
                let v = random_vector(g, k.dim());
                (complex_normal(g), LiftedPoint::new(k, idx, v).unwrap())
            })
            .collect();
        KernelSection::from_terms(Arc::clone(k), terms).unwrap()
    }

    fn gram_kernel(seed: u64, m: usize, r: usize, d: usize) -> Arc<OperatorKernel> {
        let mut g = rng(seed);
        let w = random_factors(&mut g, m, r, d);
        Arc::new(OperatorKernel::from_factors(IndexSet::numbered(m).unwrap(), &w).unwrap())
    }

    #[test]
    fn index_set_rejects_duplicates_and_empty() {
        assert_eq!(
            IndexSet::new(["a", "b", "a"]).unwrap_err(),
            Error::DuplicateLabel("a".into())
        );
        assert_eq!(IndexSet::new(Vec::<String>::new()).unwrap_err(), Error::EmptyIndexSet);
        let s = IndexSet::new(["x", "y"]).unwrap();
        assert_eq!(s.position("y").unwrap(), 1);
        assert!(matches!(s.position("z"), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn construction_enforces_hermitian_symmetry() {
        let err = OperatorKernel::from_fn(IndexSet::numbered(2).unwrap(), 1, |i, j| {
            CMatrix::scalar(c(
                if i < j {
                    1.0
                } else if i > j {
                    2.0
                } else {
                    1.0
                },
                0.0,
            ))
        })
        .unwrap_err();
        assert!(matches!(err, Error::NotHermitian { .. }));

        let err = OperatorKernel::from_fn(IndexSet::numbered(1).unwrap(), 2, |_, _| {
            CMatrix::from_real(2, 2, &[1.0, 1.0, 0.0, 1.0]).unwrap()
        })
        .unwrap_err();
        assert!(matches!(err, Error::NotHermitian { .. }));
    }

    #[test]
    fn construction_checks_block_shapes() {
        let err = OperatorKernel::from_fn(IndexSet::numbered(2).unwrap(), 2, |_, _| CMatrix::identity(3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn from_upper_fills_adjoints() {
        let k = OperatorKernel::from_upper(IndexSet::numbered(2).unwrap(), 1, |i, j| {
            CMatrix::scalar(if i == j { ONE } else { c(0.25, 0.5) })
        })
        .unwrap();
        assert_eq!(k.block(1, 0)[(0, 0)], c(0.25, -0.5));
    }

    #[test]
    fn lift_examples() {
        let k = OperatorKernel::identity(IndexSet::numbered(2).unwrap(), 2).unwrap();
        let mut g = rng(11);
        let a = random_vector(&mut g, 2);
        let b = random_vector(&mut g, 2);
        let p = LiftedPoint::new(&k, 0, a.clone()).unwrap();
        let q = LiftedPoint::new(&k, 1, b.clone()).unwrap();
        assert!((k.lift(&p, &q).unwrap() - inner(&a, &b).unwrap()).norm() < 1e-15);

        let unit = a.scale(c(1.0 / a.norm(), 0.0));
        let p = LiftedPoint::new(&k, 0, unit).unwrap();
        assert!((k.lift(&p, &p).unwrap() - ONE).norm() < 1e-15);
    }

    #[test]
    fn lift_matches_factor_space_inner_product() {
        let mut g = rng(12);
        let w = random_factors(&mut g, 3, 4, 2);
        let k = OperatorKernel::from_factors(IndexSet::numbered(3).unwrap(), &w).unwrap();
        for (s, t) in [(0, 1), (2, 0), (1, 1)] {
            let a = random_vector(&mut g, 2);
            let b = random_vector(&mut g, 2);
            let expected = inner(&w[s].mul_vec(&a).unwrap(), &w[t].mul_vec(&b).unwrap()).unwrap();
            let p = LiftedPoint::new(&k, s, a).unwrap();
            let q = LiftedPoint::new(&k, t, b).unwrap();
            assert!((k.lift(&p, &q).unwrap() - expected).norm() <= 1e-12 * (1.0 + expected.norm()));
        }
    }

    #[test]
    fn lift_rejects_invalid_points() {
        let k = OperatorKernel::identity(IndexSet::numbered(2).unwrap(), 2).unwrap();
        assert!(matches!(
            LiftedPoint::new(&k, 5, CVector::zeros(2)),
            Err(Error::IndexOutOfRange { index: 5, len: 2 })
        ));
        assert!(matches!(
            LiftedPoint::new(&k, 0, CVector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad = LiftedPoint {
            index: 0,
            vector: CVector::zeros(1),
        };
        let ok = LiftedPoint::new(&k, 0, CVector::zeros(2)).unwrap();
        assert!(k.lift(&bad, &ok).is_err());
    }

    #[test]
    fn block_gram_examples() {
        let k = OperatorKernel::identity(IndexSet::numbered(2).unwrap(), 2).unwrap();
        let g = k.block_gram().matrix;
        let i2 = CMatrix::identity(2);
        let expected = CMatrix::hstack(&[i2.clone(), i2.clone()]).unwrap();
        assert_eq!(g.block(0, 0, 2, 4), expected);
        assert_eq!(g.block(2, 0, 2, 4), expected);

        let z = OperatorKernel::zero(IndexSet::numbered(3).unwrap(), 2).unwrap();
        assert_eq!(z.block_gram().matrix, CMatrix::zeros(6, 6));

        let g = contraction_half().block_gram().matrix;
        let expected = CMatrix::from_real(3, 3, &[1.0, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 1.0]).unwrap();
        assert_eq!(g, expected);
    }

    #[test]
    fn positive_definiteness_examples() {
        let k = OperatorKernel::identity(IndexSet::numbered(3).unwrap(), 2).unwrap();
        assert!(k.is_positive_definite(DEFAULT_PD_TOL).unwrap().positive);

        let k = scalar_kernel(&[&[1.0, 2.0], &[2.0, 1.0]]);
        let check = k.is_positive_definite(DEFAULT_PD_TOL).unwrap();
        assert!(!check.positive);
        assert!((check.min_eig + 1.0).abs() < 1e-12);

        for seed in 0..10 {
            let k = gram_kernel(seed, 4, 2, 3);
            assert!(k.is_positive_definite(DEFAULT_PD_TOL).unwrap().positive);
        }

        assert!(k.is_positive_definite(-1.0).is_err());
    }

    #[test]
    fn single_point_kernel_is_pd_iff_block_is_psd() {
        let k = OperatorKernel::new(
            IndexSet::numbered(1).unwrap(),
            2,
            vec![vec![CMatrix::diag_real(&[1.0, 0.0])]],
        )
        .unwrap();
        assert!(k.is_positive_definite(DEFAULT_PD_TOL).unwrap().positive);
        let k = OperatorKernel::new(
            IndexSet::numbered(1).unwrap(),
            2,
            vec![vec![CMatrix::diag_real(&[1.0, -0.1])]],
        )
        .unwrap();
        assert!(!k.is_positive_definite(DEFAULT_PD_TOL).unwrap().positive);
    }

    #[test]
    fn section_evaluate_examples() {
        let k = Arc::new(OperatorKernel::identity(IndexSet::numbered(2).unwrap(), 2).unwrap());
        let b = CVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let q = LiftedPoint::new(&k, 1, b).unwrap();
        let f = KernelSection::generator(Arc::clone(&k), q.clone()).unwrap();
        assert!((f.evaluate(&q).unwrap() - ONE).norm() < 1e-15);

        let zero = LiftedPoint::new(&k, 0, CVector::zeros(2)).unwrap();
        assert_eq!(f.evaluate(&zero).unwrap(), ZERO);

        let k = Arc::new(contraction_half());
        let gen = KernelSection::generator(
            Arc::clone(&k),
            LiftedPoint::new(&k, 1, CVector::from_real(&[1.0])).unwrap(),
        )
        .unwrap();
        let at = LiftedPoint::new(&k, 0, CVector::from_real(&[1.0])).unwrap();
        assert!((gen.evaluate(&at).unwrap() - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn section_inner_examples() {
        let k = Arc::new(OperatorKernel::identity(IndexSet::numbered(2).unwrap(), 3).unwrap());
        let mut g = rng(13);
        let a = random_vector(&mut g, 3);
        let b = random_vector(&mut g, 3);
        let p = LiftedPoint::new(&k, 0, a.clone()).unwrap();
        let q = LiftedPoint::new(&k, 1, b).unwrap();
        let fa = KernelSection::generator(Arc::clone(&k), p.clone()).unwrap();
        let fb = KernelSection::generator(Arc::clone(&k), q.clone()).unwrap();
        assert!((fa.inner(&fa).unwrap() - c(a.norm_sqr(), 0.0)).norm() < 1e-13);
        assert!((fa.inner(&fb).unwrap() - k.lift(&p, &q).unwrap()).norm() < 1e-13);

        let other = Arc::new(OperatorKernel::zero(IndexSet::numbered(2).unwrap(), 3).unwrap());
        let fz = KernelSection::zero(other);
        assert_eq!(fa.inner(&fz).unwrap_err(), Error::KernelMismatch);
    }

    #[test]
    fn reproducing_property_for_sections() {
        // F(q) = ⟨K̃(·,q), F⟩
        let k = gram_kernel(21, 3, 4, 2);
        let mut g = rng(22);
        for _ in 0..10 {
            let f = random_section(&k, &mut g, 4);
            let q = LiftedPoint::new(&k, 1, random_vector(&mut g, 2)).unwrap();
            let kq = KernelSection::generator(Arc::clone(&k), q.clone()).unwrap();
            let lhs = f.evaluate(&q).unwrap();
            let rhs = kq.inner(&f).unwrap();
            assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
        }
    }

    #[test]
    fn pd_is_invariant_under_relabeling() {
        let k = gram_kernel(31, 4, 2, 2);
        let p = k.permuted(&[2, 0, 3, 1]).unwrap();
        let a = k.is_positive_definite(DEFAULT_PD_TOL).unwrap();
        let b = p.is_positive_definite(DEFAULT_PD_TOL).unwrap();
        assert_eq!(a.positive, b.positive);
        assert!((a.min_eig - b.min_eig).abs() < 1e-10);
        assert_eq!(p.block(0, 1), k.block(2, 0));

        let bad = scalar_kernel(&[&[1.0, 2.0, 0.0], &[2.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let perm = bad.permuted(&[2, 1, 0]).unwrap();
        assert!(!perm.is_positive_definite(DEFAULT_PD_TOL).unwrap().positive);
        assert!(bad.permuted(&[0, 0, 1]).is_err());
    }

    proptest! {
        #[test]
        fn section_evaluation_is_additive_and_conjugate_homogeneous(seed in any::<u64>()) {
            let k = gram_kernel(seed, 3, 3, 2);
            let mut g = rng(seed ^ 0xabc);
            let f = random_section(&k, &mut g, 5);
            let a = random_vector(&mut g, 2);
            let b = random_vector(&mut g, 2);
            let lam = complex_normal(&mut g);
            for s in 0..3 {
                let fa = f.evaluate(&LiftedPoint::new(&k, s, a.clone()).unwrap()).unwrap();
                let fb = f.evaluate(&LiftedPoint::new(&k, s, b.clone()).unwrap()).unwrap();
                let fab = f.evaluate(&LiftedPoint::new(&k, s, &a + &b).unwrap()).unwrap();
                let scale = 1.0 + fa.norm() + fb.norm();
                prop_assert!((fab - fa - fb).norm() <= 1e-12 * scale);
                let fl = f.evaluate(&LiftedPoint::new(&k, s, a.scale(lam)).unwrap()).unwrap();
                prop_assert!((fl - lam.conj() * fa).norm() <= 1e-12 * (1.0 + fa.norm()) * (1.0 + lam.norm()));
                let f0 = f.evaluate(&LiftedPoint::new(&k, s, CVector::zeros(2)).unwrap()).unwrap();
                prop_assert_eq!(f0, ZERO);
            }
        }

        #[test]
        fn lift_is_hermitian(seed in any::<u64>()) {
            let k = gram_kernel(seed, 3, 2, 3);
            let mut g = rng(seed.wrapping_add(1));
            let p = LiftedPoint::new(&k, 0, random_vector(&mut g, 3)).unwrap();
            let q = LiftedPoint::new(&k, 2, random_vector(&mut g, 3)).unwrap();
            let pq = k.lift(&p, &q).unwrap();
            let qp = k.lift(&q, &p).unwrap();
            prop_assert!((pq - qp.conj()).norm() <= 1e-12 * (1.0 + pq.norm()));
        }

        #[test]
        fn section_norms_are_nonnegative_and_inner_is_hermitian(seed in any::<u64>()) {
            let k = gram_kernel(seed, 4, 2, 2);
            let mut g = rng(seed.wrapping_mul(3));
            let f = random_section(&k, &mut g, 6);
            let h = random_section(&k, &mut g, 3);
            let ff = f.inner(&f).unwrap();
            prop_assert!(ff.re >= -1e-10 * (1.0 + ff.norm()));
            let fh = f.inner(&h).unwrap();
            let hf = h.inner(&f).unwrap();
            prop_assert!((fh - hf.conj()).norm() <= 1e-12 * (1.0 + fh.norm()));
        }
    }
}
