//! Minimal dilation factorization `K(s,t) = V_s*·V_t`.
//!
//! The factors come from the spectral decomposition of the block Gram matrix
//! `G = U·diag(λ)·U*`: with the `r` eigenvalues above `tol·λ_max` retained, the
//! stacked factor `F = diag(√λ₊)·U₊*` is `r×(m·d)` and `V_i` is its `i`-th
//! column block. The rows of `F` are orthogonal with positive norms, so the
//! images `V_i·a` span all of `ℂʳ`: the dilation space is minimal and is
//! identified with the RKHS of the lifted kernel through
//! `K̃(·,(s,a)) ↦ V_s·a`. Under that identification the standard basis of
//! `ℂʳ` plays the role of an orthonormal basis of the RKHS.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::{KernelSection, LiftedPoint, OperatorKernel};
use crate::linalg::{herm_eig, inner, CMatrix, CVector};

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Relative bound on `max ‖K(sᵢ,sⱼ) − Vᵢ*Vⱼ‖_fro`, scaled by `1 + ‖G‖_fro`.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizeOptions {
    /// Positive-definiteness gate and relative eigenvalue truncation.
    pub rank_tol: f64,
    pub residual_tol: f64,
}

impl Default for FactorizeOptions {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            residual_tol: DEFAULT_RESIDUAL_TOL,
        }
    }
}

/// An element of the dilation space `L ≅ ℂʳ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DilationVector(pub CVector);

impl DilationVector {
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn inner(&self, other: &DilationVector) -> Result<Complex64> {
        inner(&self.0, &other.0)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.norm_sqr()
    }
}

#[derive(Debug, Clone)]
pub struct DilationFactorization {
    kernel: Arc<OperatorKernel>,
    rank: usize,
    factors: Vec<CMatrix>,
    eigenvalues: Vec<f64>,
    options: FactorizeOptions,
    residual: f64,
    gram_norm: f64,
}

/// Factorizes with the default residual bound and truncation tolerance `tol`.
pub fn factorize(kernel: Arc<OperatorKernel>, tol: f64) -> Result<DilationFactorization> {
    DilationFactorization::new(
        kernel,
        FactorizeOptions {
            rank_tol: tol,
            ..FactorizeOptions::default()
        },
    )
}

impl DilationFactorization {
    pub fn new(kernel: Arc<OperatorKernel>, options: FactorizeOptions) -> Result<Self> {
        let pd = kernel.is_positive_definite(options.rank_tol)?;
        if !pd.positive {
            return Err(Error::NotPositiveDefinite { min_eig: pd.min_eig });
        }
        let (m, d) = (kernel.len(), kernel.dim());
        let gram = kernel.block_gram().matrix;
        let eig = herm_eig(&gram)?;
        let lmax = eig.max();
        let cutoff = options.rank_tol * lmax;
        let retained: Vec<f64> = eig
            .eigenvalues
            .iter()
            .copied()
            .take_while(|&l| lmax > 0.0 && l > cutoff)
            .collect();
        let rank = retained.len();

        let stacked = CMatrix::from_fn(rank, m * d, |k, c| eig.eigenvectors[(c, k)].conj() * retained[k].sqrt());
        let factors = (0..m).map(|i| stacked.block(0, i * d, rank, d)).collect();

        let mut fact = Self {
            kernel,
            rank,
            factors,
            eigenvalues: retained,
            options,
            residual: 0.0,
            gram_norm: pd.gram_norm,
        };
        fact.residual = fact.max_residual();
        let bound = options.residual_tol * (1.0 + fact.gram_norm);
        if !(fact.residual <= bound) {
            return Err(Error::ResidualExceeded {
                residual: fact.residual,
                bound,
            });
        }
        Ok(fact)
    }

    fn max_residual(&self) -> f64 {
        let m = self.kernel.len();
        let adj: Vec<CMatrix> = self.factors.iter().map(CMatrix::adjoint).collect();
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                let r = (self.kernel.block(i, j) - &(&adj[i] * &self.factors[j])).norm_fro();
                worst = worst.max(r);
            }
        }
        worst
    }

    pub fn kernel(&self) -> &Arc<OperatorKernel> {
        &self.kernel
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    /// `V_i` as an `r×d` matrix.
    pub fn factor(&self, i: usize) -> Result<&CMatrix> {
        self.kernel.index_set().check(i)?;
        Ok(&self.factors[i])
    }

    pub fn factors(&self) -> &[CMatrix] {
        &self.factors
    }

    /// Retained eigenvalues of the block Gram matrix, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn truncation_tol(&self) -> f64 {
        self.options.rank_tol
    }

    pub fn options(&self) -> FactorizeOptions {
        self.options
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn gram_norm(&self) -> f64 {
        self.gram_norm
    }

    /// `[V_1 | V_2 | … | V_m]`, of size `r×(m·d)`.
    pub fn stacked(&self) -> CMatrix {
        CMatrix::hstack(&self.factors).unwrap_or_else(|_| CMatrix::zeros(0, self.kernel.len() * self.dim()))
    }

    fn check(&self, i: usize) -> Result<()> {
        self.kernel.index_set().check(i)
    }

    fn check_dilation(&self, x: &DilationVector) -> Result<()> {
        if x.dim() != self.rank {
            return Err(Error::DimensionMismatch {
                context: "dilation vector",
                expected: self.rank.to_string(),
                found: x.dim().to_string(),
            });
        }
        Ok(())
    }

    /// `Vᵢ*·Vⱼ`.
    pub fn reconstruct(&self, i: usize, j: usize) -> Result<CMatrix> {
        self.check(i)?;
        self.check(j)?;
        Ok(&self.factors[i].adjoint() * &self.factors[j])
    }

    /// `Vᵢ·a`, the image of the generator `K̃(·,(sᵢ,a))` in `L`.
    pub fn apply_v(&self, i: usize, a: &CVector) -> Result<DilationVector> {
        self.check(i)?;
        Ok(DilationVector(self.factors[i].mul_vec(a)?))
    }

    /// `Vᵢ*·x`.
    pub fn apply_v_adjoint(&self, i: usize, x: &DilationVector) -> Result<CVector> {
        self.check(i)?;
        self.check_dilation(x)?;
        self.factors[i].adjoint_mul_vec(&x.0)
    }

    /// `(V_{s₁}*V_{t₁})⋯(V_{sₙ}*V_{tₙ})·b`, applied right to left through `L`.
    pub fn chain_product(&self, pairs: &[(usize, usize)], b: &CVector) -> Result<CVector> {
        for &(s, t) in pairs {
            self.check(s)?;
            self.check(t)?;
        }
        let mut h = b.clone();
        for &(s, t) in pairs.iter().rev() {
            let x = self.apply_v(t, &h)?;
            h = self.apply_v_adjoint(s, &x)?;
        }
        Ok(h)
    }

    /// Image in `L` of a section: `Σ cᵢ·V_{sᵢ}·aᵢ`.
    pub fn embed(&self, f: &KernelSection) -> Result<DilationVector> {
        self.same_kernel(f)?;
        let mut acc = CVector::zeros(self.rank);
        for (c, p) in f.terms() {
            let v = self.factors[p.index].mul_vec(&p.vector)?;
            acc = &acc + &v.scale(*c);
        }
        Ok(DilationVector(acc))
    }

    /// `V_{to}·V_{from}*` acting on sections: each generator `K̃(·,(t,b))` is
    /// sent to `K̃(·,(to, K(from,t)·b))`.
    pub fn transfer_apply(&self, from: usize, to: usize, f: &KernelSection) -> Result<KernelSection> {
        self.check(from)?;
        self.check(to)?;
        self.same_kernel(f)?;
        let terms = f
            .terms()
            .iter()
            .map(|(c, p)| {
                let v = self.kernel.block(from, p.index).mul_vec(&p.vector)?;
                Ok((*c, LiftedPoint { index: to, vector: v }))
            })
            .collect::<Result<Vec<_>>>()?;
        KernelSection::from_terms(Arc::clone(f.kernel()), terms)
    }

    /// `V_s·V_s*` acting on sections; a projection when `K(s,s) = I`.
    pub fn projection_apply(&self, s: usize, f: &KernelSection) -> Result<KernelSection> {
        self.transfer_apply(s, s, f)
    }

    /// `Σ_k (Vᵢ*e_k)·(Vⱼ*e_k)*` over the standard basis `{e_k}` of `ℂʳ`.
    pub fn frame_reconstruct(&self, i: usize, j: usize) -> Result<CMatrix> {
        self.check(i)?;
        self.check(j)?;
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for k in 0..self.rank {
            let e = DilationVector(CVector::basis(self.rank, k));
            let left = self.apply_v_adjoint(i, &e)?;
            let right = self.apply_v_adjoint(j, &e)?;
            out = &out + &left.outer(&right);
        }
        Ok(out)
    }

    /// `‖Vᵢ*Vᵢ − I‖_fro`.
    pub fn isometry_defect(&self, i: usize) -> Result<f64> {
        let vv = self.reconstruct(i, i)?;
        Ok((&vv - &CMatrix::identity(self.dim())).norm_fro())
    }

    fn same_kernel(&self, f: &KernelSection) -> Result<()> {
        if Arc::ptr_eq(&self.kernel, f.kernel()) || *self.kernel == **f.kernel() {
            Ok(())
        } else {
            Err(Error::KernelMismatch)
        }
    }
}
