//! Operator-valued positive definite kernels on finite index sets.
//!
//! A kernel `K : S × S → ℂ^{d×d}` is stored as its blocks. The crate checks
//! positivity through the block Gram matrix, computes minimal dilation
//! factorizations `K(s,t) = V_s*·V_t`, builds power dilations of contractions
//! and Naimark dilations of POVMs, and samples `ℂᵈ`-valued Gaussian processes
//! with covariance `K`.
//!
//! Inner products are conjugate-linear in the first argument.

// `!(x <= bound)` is used throughout so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod dilation;
pub mod error;
pub mod factorization;
pub mod gaussian;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod random;

pub use dilation::{
    contraction_kernel, naimark_dilate, povm_compress, power_dilation, telescoping_quadratic, ContractionModel,
    DiscretePOVM, NaimarkDilation, ShiftDilation,
};
pub use error::{Error, Result};
pub use factorization::{factorize, DilationFactorization, DilationVector, FactorizeOptions};
pub use gaussian::{build_sampler, estimate_all_pairs, CovarianceEstimate, GaussianSampler, JointDraw, NormalStream};
pub use kernel::{IndexSet, KernelSection, OperatorKernel};
pub use linalg::{inner, CMatrix, CVector};
pub use num_complex::Complex64;
