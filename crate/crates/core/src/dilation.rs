//! Two worked dilations.
//!
//! *Power dilation of a contraction.* The kernel `K(m,n) = A^(n−m)` on the
//! window `{0,…,N}` (with `A^(−k) = (A*)^k`) is factorized, and the shift
//! `U` is the minimum-norm operator on `L` sending `V_m·a` to `V_{m+1}·a` for
//! `m < N`. With `V = V_0`, the compressions `V*·Uⁿ·V` reproduce `Aⁿ`. The
//! window is finite, so `U` is only pinned down on the span of the shifted
//! generators; [`ShiftDilation::max_power`] records how far the identity is
//! certified.
//!
//! *Naimark dilation of a discrete POVM.* The kernel on atoms is
//! `K(i,j) = δᵢⱼ·Q({i})`; `P({j})` is the orthogonal projection of `L` onto
//! the range of `V_j`, and `V = Σⱼ V_j` is the image of the generator over the
//! whole outcome set.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::factorization::{DilationFactorization, FactorizeOptions, DEFAULT_RANK_TOL};
use crate::kernel::{IndexSet, OperatorKernel};
use crate::linalg::{herm_eig, lstsq, svd, CMatrix, CVector};

/// Slack allowed on `‖A‖ ≤ 1`.
pub const CONTRACTION_TOL: f64 = 1e-12;

pub const DEFAULT_POWER_TOL: f64 = 1e-8;

/// Tolerance for POVM validity and for the Naimark dilation checks.
pub const POVM_TOL: f64 = 1e-10;

/// A contraction `A` together with the index window `{0,…,N}`.
#[derive(Debug, Clone)]
pub struct ContractionModel {
    a: CMatrix,
    window: usize,
    norm: f64,
}

impl ContractionModel {
    pub fn new(a: CMatrix, window: usize, norm_tol: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        if window < 1 {
            return Err(Error::InvalidWindow { window, min: 1 });
        }
        let norm = a.spectral_norm()?;
        if !(norm <= 1.0 + norm_tol) {
            return Err(Error::NotContraction { norm });
        }
        Ok(Self { a, window, norm })
    }

    pub fn operator(&self) -> &CMatrix {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn spectral_norm(&self) -> f64 {
        self.norm
    }

    /// The kernel `K(m,n) = A^(n−m)` on labels `"0"`, …, `"N"`.
    pub fn kernel(&self) -> Result<OperatorKernel> {
        let n = self.window;
        let mut powers = Vec::with_capacity(n + 1);
        powers.push(CMatrix::identity(self.dim()));
        for k in 1..=n {
            powers.push(&powers[k - 1] * &self.a);
        }
        OperatorKernel::from_upper(IndexSet::numbered(n + 1)?, self.dim(), |m, k| powers[k - m].clone())
    }
}

/// `K(m,n) = A^(n−m)` over `{0,…,N}`.
pub fn contraction_kernel(a: &CMatrix, window: usize) -> Result<OperatorKernel> {
    ContractionModel::new(a.clone(), window, CONTRACTION_TOL)?.kernel()
}

fn check_vectors(a: &CMatrix, h: &[CVector]) -> Result<()> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if let Some(bad) = h.iter().find(|v| v.dim() != a.rows()) {
        return Err(Error::DimensionMismatch {
            context: "telescoping sum",
            expected: a.rows().to_string(),
            found: bad.dim().to_string(),
        });
    }
    Ok(())
}

/// Tails `g_k = h_k + A·h_{k+1} + ⋯ + A^{n−k}·h_n`, computed backwards.
fn tails(a: &CMatrix, h: &[CVector]) -> Result<Vec<CVector>> {
    let mut out = vec![CVector::zeros(a.rows()); h.len()];
    for k in (0..h.len()).rev() {
        out[k] = match out.get(k + 1) {
            Some(next) => &h[k] + &a.mul_vec(next)?,
            None => h[k].clone(),
        };
    }
    Ok(out)
}

/// The quadratic form `Σ_{m,n} ⟨h_m, A^(n−m)·h_n⟩` written as the telescoping
/// sum `Σ_k ‖g_k‖² − ‖A·g_{k+1}‖²`, where `g_k` are the tails of `h` (and
/// `g_{n+1} = 0`). Nonnegative whenever `‖A‖ ≤ 1`.
pub fn telescoping_quadratic(a: &CMatrix, h: &[CVector]) -> Result<f64> {
    check_vectors(a, h)?;
    let g = tails(a, h)?;
    let mut total = 0.0;
    for k in 0..g.len() {
        total += g[k].norm_sqr();
        if let Some(next) = g.get(k + 1) {
            total -= a.mul_vec(next)?.norm_sqr();
        }
    }
    Ok(total)
}

/// `‖g_1‖² + (1 − ‖A‖²)·Σ_{k≥2} ‖g_k‖²`, a lower bound for
/// [`telescoping_quadratic`].
pub fn telescoping_lower_bound(a: &CMatrix, h: &[CVector]) -> Result<f64> {
    check_vectors(a, h)?;
    let g = tails(a, h)?;
    let norm = a.spectral_norm()?;
    let head = g.first().map_or(0.0, CVector::norm_sqr);
    let tail: f64 = g.iter().skip(1).map(CVector::norm_sqr).sum();
    Ok(head + (1.0 - norm * norm) * tail)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerDilationOptions {
    pub rank_tol: f64,
    /// Tolerance on `‖Aⁿ − V*UⁿV‖_fro` for certifying a power.
    pub power_tol: f64,
    /// Slack on `‖A‖ ≤ 1`.
    pub norm_tol: f64,
    /// Replace `U` by the unitary factor of its polar decomposition.
    pub polar: bool,
}

impl Default for PowerDilationOptions {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            power_tol: DEFAULT_POWER_TOL,
            norm_tol: CONTRACTION_TOL,
            polar: false,
        }
    }
}

/// Realization `Aⁿ = V*·Uⁿ·V` on a truncated window.
#[derive(Debug, Clone)]
pub struct ShiftDilation {
    model: ContractionModel,
    fact: DilationFactorization,
    shift: CMatrix,
    embedding: CMatrix,
    shift_defect: f64,
    power_residuals: Vec<f64>,
    max_power: usize,
}

/// Power dilation with default options and certification tolerance `tol`.
pub fn power_dilation(a: &CMatrix, window: usize, tol: f64) -> Result<ShiftDilation> {
    power_dilation_with(
        a,
        window,
        &PowerDilationOptions {
            power_tol: tol,
            ..PowerDilationOptions::default()
        },
    )
}

pub fn power_dilation_with(a: &CMatrix, window: usize, opts: &PowerDilationOptions) -> Result<ShiftDilation> {
    if window < 2 {
        return Err(Error::InvalidWindow { window, min: 2 });
    }
    let model = ContractionModel::new(a.clone(), window, opts.norm_tol)?;
    let kernel = Arc::new(model.kernel()?);
    let fact = DilationFactorization::new(
        kernel,
        FactorizeOptions {
            rank_tol: opts.rank_tol,
            ..FactorizeOptions::default()
        },
    )?;

    // U·X = Y with X = [V_0 … V_{N−1}], Y = [V_1 … V_N]; solved as X*·U* = Y*.
    let factors = fact.factors();
    let x = CMatrix::hstack(&factors[..window])?;
    let y = CMatrix::hstack(&factors[1..])?;
    let mut shift = lstsq(&x.adjoint(), &y.adjoint())?.adjoint();
    if opts.polar && shift.rows() > 0 {
        let dec = svd(&shift)?;
        shift = &dec.u * &dec.v_adjoint;
    }
    let shift_defect = (&(&shift * &x) - &y).norm_fro();

    let embedding = factors[0].clone();
    let mut dilation = ShiftDilation {
        model,
        fact,
        shift,
        embedding,
        shift_defect,
        power_residuals: Vec::with_capacity(window),
        max_power: 0,
    };

    let mut power = CMatrix::identity(dilation.model.dim());
    let mut certified = true;
    for n in 1..=window {
        power = &power * dilation.model.operator();
        let residual = (&power - &dilation.compressed_power(n as u32)?).norm_fro();
        dilation.power_residuals.push(residual);
        certified &= residual <= opts.power_tol;
        if certified {
            dilation.max_power = n;
        }
    }
    if dilation.max_power == 0 {
        return Err(Error::PowerIdentityFailed {
            residual: dilation.power_residuals[0],
        });
    }
    Ok(dilation)
}

impl ShiftDilation {
    pub fn model(&self) -> &ContractionModel {
        &self.model
    }

    pub fn factorization(&self) -> &DilationFactorization {
        &self.fact
    }

    /// The shift `U` on `L ≅ ℂʳ`.
    pub fn shift(&self) -> &CMatrix {
        &self.shift
    }

    /// The embedding `V = V_0 : H → L`.
    pub fn embedding(&self) -> &CMatrix {
        &self.embedding
    }

    /// `‖U·X − Y‖_fro` over the stacked generator images.
    pub fn shift_defect(&self) -> f64 {
        self.shift_defect
    }

    /// `‖Aⁿ − V*UⁿV‖_fro` for `n = 1, …, N`.
    pub fn power_residuals(&self) -> &[f64] {
        &self.power_residuals
    }

    /// Largest `n` such that the identity holds within tolerance for all
    /// `1 ≤ k ≤ n`.
    pub fn max_power(&self) -> usize {
        self.max_power
    }

    /// `V*·Uⁿ·V`.
    pub fn compressed_power(&self, n: u32) -> Result<CMatrix> {
        let mut x = self.embedding.clone();
        for _ in 0..n {
            x = &self.shift * &x;
        }
        Ok(&self.embedding.adjoint() * &x)
    }
}

/// Discrete POVM: PSD effects summing to the identity.
#[derive(Debug, Clone)]
pub struct DiscretePOVM {
    dim: usize,
    atoms: IndexSet,
    effects: Vec<CMatrix>,
}

impl DiscretePOVM {
    pub fn new<S: Into<String>>(atoms: Vec<S>, effects: Vec<CMatrix>) -> Result<Self> {
        let atoms = IndexSet::new(atoms)?;
        if effects.len() != atoms.len() {
            return Err(Error::DimensionMismatch {
                context: "POVM effects",
                expected: atoms.len().to_string(),
                found: effects.len().to_string(),
            });
        }
        let dim = effects[0].rows();
        let mut total = CMatrix::zeros(dim, dim);
        for (i, e) in effects.iter().enumerate() {
            if e.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch {
                    context: "POVM effect",
                    expected: format!("{dim}x{dim}"),
                    found: format!("{}x{}", e.rows(), e.cols()),
                });
            }
            let min_eig = herm_eig(e)?.min();
            if min_eig < -POVM_TOL {
                return Err(Error::EffectNotPsd {
                    atom: atoms.label(i).to_owned(),
                    min_eig,
                });
            }
            total = &total + e;
        }
        let defect = (&total - &CMatrix::identity(dim)).norm_fro();
        if !(defect <= POVM_TOL) {
            return Err(Error::Incomplete { defect });
        }
        Ok(Self { dim, atoms, effects })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &IndexSet {
        &self.atoms
    }

    pub fn effect(&self, i: usize) -> &CMatrix {
        &self.effects[i]
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }

    /// `Q(A) = Σ_{j∈A} Q({j})`.
    pub fn measure(&self, subset: &[usize]) -> Result<CMatrix> {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for &j in subset {
            self.atoms.check(j)?;
            out = &out + &self.effects[j];
        }
        Ok(out)
    }

    /// Kernel on atoms, `K(i,j) = Q({i} ∩ {j}) = δᵢⱼ·Q({i})`.
    pub fn atom_kernel(&self) -> Result<OperatorKernel> {
        OperatorKernel::from_fn(self.atoms.clone(), self.dim, |i, j| {
            if i == j {
                self.effects[i].clone()
            } else {
                CMatrix::zeros(self.dim, self.dim)
            }
        })
    }
}

/// `Q = V*·P·V` with `P` a projection-valued measure on `L`.
#[derive(Debug, Clone)]
pub struct NaimarkDilation {
    povm: DiscretePOVM,
    fact: DilationFactorization,
    embedding: CMatrix,
    projections: Vec<CMatrix>,
    report: NaimarkDefects,
}

/// Worst-case defects measured when a Naimark dilation is built.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NaimarkDefects {
    /// `‖V*V − I‖_fro`.
    pub isometry: f64,
    /// `max_j ‖P_j − P_j*‖_fro`.
    pub selfadjoint: f64,
    /// `max_j ‖P_j − P_j²‖_fro`.
    pub idempotent: f64,
    /// `max_{i≠j} ‖P_i·P_j‖_fro`.
    pub orthogonality: f64,
    /// `‖Σ_j P_j − I‖_fro`.
    pub completeness: f64,
    /// `max_j ‖Q({j}) − V*P_jV‖_fro`.
    pub compression: f64,
}

impl NaimarkDefects {
    pub fn max(&self) -> f64 {
        [
            self.isometry,
            self.selfadjoint,
            self.idempotent,
            self.orthogonality,
            self.completeness,
            self.compression,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn naimark_dilate(povm: &DiscretePOVM, tol: f64) -> Result<NaimarkDilation> {
    let kernel = Arc::new(povm.atom_kernel()?);
    let fact = DilationFactorization::new(
        kernel,
        FactorizeOptions {
            rank_tol: tol,
            ..FactorizeOptions::default()
        },
    )?;
    let (r, d) = (fact.rank(), povm.dim());
    let lmax = fact.eigenvalues().first().copied().unwrap_or(0.0);

    let mut embedding = CMatrix::zeros(r, d);
    let mut projections = Vec::with_capacity(povm.atoms().len());
    for v in fact.factors() {
        embedding = &embedding + v;
        // Orthonormal basis of range(V_j) from the spectral decomposition of V_j*V_j.
        let eig = herm_eig(&(&v.adjoint() * v))?;
        let mut p = CMatrix::zeros(r, r);
        for (k, &mu) in eig.eigenvalues.iter().enumerate() {
            if !(mu > tol * lmax) {
                break;
            }
            let w = v.mul_vec(&eig.eigenvectors.column(k))?.scale((1.0 / mu.sqrt()).into());
            p = &p + &w.outer(&w);
        }
        projections.push(p);
    }

    let dil = NaimarkDilation {
        povm: povm.clone(),
        fact,
        embedding,
        projections,
        report: NaimarkDefects::default(),
    };
    let report = dil.measure_defects()?;
    let checks = [
        ("isometry", report.isometry),
        ("selfadjointness", report.selfadjoint),
        ("idempotence", report.idempotent),
        ("orthogonality", report.orthogonality),
        ("completeness", report.completeness),
        ("compression", report.compression),
    ];
    if let Some(&(what, defect)) = checks.iter().find(|(_, x)| !(*x <= POVM_TOL)) {
        return Err(Error::DilationDefect { what, defect });
    }
    Ok(NaimarkDilation { report, ..dil })
}

impl NaimarkDilation {
    fn measure_defects(&self) -> Result<NaimarkDefects> {
        let r = self.fact.rank();
        let eye_r = CMatrix::identity(r);
        let v = &self.embedding;
        let mut out = NaimarkDefects {
            isometry: (&(&v.adjoint() * v) - &CMatrix::identity(self.povm.dim())).norm_fro(),
            ..NaimarkDefects::default()
        };
        let mut total = CMatrix::zeros(r, r);
        for (j, p) in self.projections.iter().enumerate() {
            out.selfadjoint = out.selfadjoint.max(p.hermitian_defect());
            out.idempotent = out.idempotent.max((p - &(p * p)).norm_fro());
            for q in &self.projections[j + 1..] {
                out.orthogonality = out.orthogonality.max((p * q).norm_fro());
            }
            let compressed = &(&v.adjoint() * p) * v;
            out.compression = out.compression.max((&compressed - self.povm.effect(j)).norm_fro());
            total = &total + p;
        }
        out.completeness = (&total - &eye_r).norm_fro();
        Ok(out)
    }

    pub fn povm(&self) -> &DiscretePOVM {
        &self.povm
    }

    pub fn factorization(&self) -> &DilationFactorization {
        &self.fact
    }

    pub fn rank(&self) -> usize {
        self.fact.rank()
    }

    /// The isometry `V : H → L`.
    pub fn embedding(&self) -> &CMatrix {
        &self.embedding
    }

    pub fn projection(&self, j: usize) -> &CMatrix {
        &self.projections[j]
    }

    pub fn projections(&self) -> &[CMatrix] {
        &self.projections
    }

    pub fn defects(&self) -> NaimarkDefects {
        self.report
    }

    /// `P(A) = Σ_{j∈A} P({j})`.
    pub fn projection_of(&self, subset: &[usize]) -> Result<CMatrix> {
        let r = self.rank();
        let mut p = CMatrix::zeros(r, r);
        for &j in subset {
            self.povm.atoms().check(j)?;
            p = &p + &self.projections[j];
        }
        Ok(p)
    }

    /// `V*·P(A)·V` for a subset given by atom indices.
    pub fn compress_indices(&self, subset: &[usize]) -> Result<CMatrix> {
        let p = self.projection_of(subset)?;
        Ok(&(&self.embedding.adjoint() * &p) * &self.embedding)
    }

    /// `V*·P(A)·V` for a subset given by atom labels.
    pub fn povm_compress<S: AsRef<str>>(&self, subset: &[S]) -> Result<CMatrix> {
        let idx = subset
            .iter()
            .map(|s| {
                self.povm
                    .atoms()
                    .position(s.as_ref())
                    .map_err(|_| Error::UnknownAtom(s.as_ref().to_owned()))
            })
            .collect::<Result<Vec<_>>>()?;
        self.compress_indices(&idx)
    }
}

/// Compression `V*·P(A)·V` of a Naimark dilation.
pub fn povm_compress<S: AsRef<str>>(dil: &NaimarkDilation, subset: &[S]) -> Result<CMatrix> {
    dil.povm_compress(subset)
}
