//! Seeded random instances: matrices, vectors, contractions, factor families
//! and POVMs. Used by the self-checks in the CLI and by the test suites.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::linalg::{herm_eig, CMatrix, CVector};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Complex Gaussian entry with independent N(0, 1/2) real and imaginary parts.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CVector {
    (0..dim).map(|_| complex_normal(rng)).collect()
}

/// Random `dim`×`dim` matrix rescaled to spectral norm `norm`.
pub fn random_contraction<R: Rng + ?Sized>(rng: &mut R, dim: usize, norm: f64) -> Result<CMatrix> {
    let m = random_matrix(rng, dim, dim);
    let s = m.spectral_norm()?;
    Ok(m.scale_real(norm / s))
}

/// `count` random `rank`×`dim` factors.
pub fn random_factors<R: Rng + ?Sized>(rng: &mut R, count: usize, rank: usize, dim: usize) -> Vec<CMatrix> {
    (0..count).map(|_| random_matrix(rng, rank, dim)).collect()
}

/// Random POVM with `atoms` effects on `ℂ^dim`.
///
/// Draws PSD matrices `Bⱼ = XⱼXⱼ*` with random ranks and normalizes them as
/// `S^{-1/2}·Bⱼ·S^{-1/2}` with `S = Σ Bⱼ`.
pub fn random_povm<R: Rng + ?Sized>(rng: &mut R, dim: usize, atoms: usize) -> Result<Vec<CMatrix>> {
    loop {
        let raw: Vec<CMatrix> = (0..atoms)
            .map(|_| {
                let k = rng.random_range(1..=dim);
                let x = random_matrix(rng, dim, k);
                &x * &x.adjoint()
            })
            .collect();
        let total = raw.iter().fold(CMatrix::zeros(dim, dim), |acc, b| &acc + b);
        let eig = herm_eig(&total)?;
        // Reject nearly singular sums so the normalization stays accurate.
        if eig.min() < 1e-3 * eig.max() {
            continue;
        }
        let inv_sqrt = {
            let u = &eig.eigenvectors;
            let d = CMatrix::diag_real(&eig.eigenvalues.iter().map(|l| l.powf(-0.5)).collect::<Vec<_>>());
            &(u * &d) * &u.adjoint()
        };
        let mut effects: Vec<CMatrix> = raw.iter().map(|b| &(&inv_sqrt * b) * &inv_sqrt).collect();
        for e in &mut effects {
            *e = (&*e + &e.adjoint()).scale_real(0.5);
        }
        return Ok(effects);
    }
}
