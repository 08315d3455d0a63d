//! `H`-valued Gaussian processes `W_t = Σᵢ (V_t*·φᵢ)·Zᵢ` built on a dilation
//! factorization, and Monte Carlo estimation of their covariance.
//!
//! The orthonormal basis `{φᵢ}` is the standard basis of `L ≅ ℂʳ`, so a joint
//! draw is `W_s = V_s*·z` for one real standard normal vector `z ∈ ℝʳ` shared
//! by every index `s`.
//!
//! Draw `k` of a sampler seeded with `seed` takes its normals from the ChaCha20
//! substream `(seed, k / DRAWS_PER_BLOCK)`. Any partition of the draw sequence
//! into whole blocks therefore sees exactly the same normals, and
//! [`estimate_all_pairs`] gives bitwise identical results serially and in
//! parallel.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factorization::DilationFactorization;
use crate::kernel::OperatorKernel;
use crate::linalg::{inner_unchecked, CMatrix, CVector, ZERO};

/// Normal generator identifier recorded in reports.
pub const NORMAL_ALGORITHM: &str =
    "ChaCha20Rng::seed_from_u64(seed) with set_stream(block); rand_distr::StandardNormal (ziggurat)";

pub const DRAWS_PER_BLOCK: u64 = 4096;

/// Reproducible stream of i.i.d. standard normal reals.
#[derive(Debug, Clone)]
pub struct NormalStream {
    seed: u64,
    stream: u64,
    rng: ChaCha20Rng,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, 0)
    }

    /// Independent stream `index` derived from `seed`.
    pub fn substream(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self {
            seed,
            stream: index,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream
    }

    pub fn algorithm(&self) -> &'static str {
        NORMAL_ALGORITHM
    }

    pub fn next_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.next_normal();
        }
    }
}

impl Iterator for NormalStream {
    type Item = f64;
    fn next(&mut self) -> Option<f64> {
        Some(self.next_normal())
    }
}

pub fn normal_stream(seed: u64) -> NormalStream {
    NormalStream::new(seed)
}

/// One joint draw `{W_s}` together with the normals it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDraw {
    pub index: u64,
    pub z: Vec<f64>,
    /// `W_s` for each index `s`, in index-set order.
    pub values: Vec<CVector>,
}

impl JointDraw {
    pub fn get<'a>(&'a self, kernel: &OperatorKernel, label: &str) -> Result<&'a CVector> {
        Ok(&self.values[kernel.index_set().position(label)?])
    }

    pub fn labelled<'a>(&'a self, kernel: &'a OperatorKernel) -> impl Iterator<Item = (&'a str, &'a CVector)> {
        kernel.index_set().labels().iter().map(String::as_str).zip(&self.values)
    }
}

/// Seeded generator of joint draws with covariance `K`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    kernel: Arc<OperatorKernel>,
    rank: usize,
    // V_s* as d×r matrices
    adjoints: Vec<CMatrix>,
    seed: u64,
    next_draw: u64,
    stream: NormalStream,
}

pub fn build_sampler(fact: &DilationFactorization, seed: u64) -> GaussianSampler {
    GaussianSampler::new(fact, seed)
}

fn realize(adjoints: &[CMatrix], z: &[f64]) -> Vec<CVector> {
    adjoints
        .iter()
        .map(|vt| {
            (0..vt.rows())
                .map(|i| vt.row(i).iter().zip(z).map(|(v, &x)| v * x).sum::<Complex64>())
                .collect()
        })
        .collect()
}

impl GaussianSampler {
    pub fn new(fact: &DilationFactorization, seed: u64) -> Self {
        Self {
            kernel: Arc::clone(fact.kernel()),
            rank: fact.rank(),
            adjoints: fact.factors().iter().map(CMatrix::adjoint).collect(),
            seed,
            next_draw: 0,
            stream: NormalStream::new(seed),
        }
    }

    pub fn kernel(&self) -> &Arc<OperatorKernel> {
        &self.kernel
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `V_s*` for index `s`.
    pub fn adjoint(&self, s: usize) -> &CMatrix {
        &self.adjoints[s]
    }

    /// Number of joint draws taken so far.
    pub fn position(&self) -> u64 {
        self.next_draw
    }

    /// Next joint draw; consumes exactly `r` standard normals.
    pub fn draw(&mut self) -> JointDraw {
        if self.next_draw.is_multiple_of(DRAWS_PER_BLOCK) {
            self.stream = NormalStream::substream(self.seed, self.next_draw / DRAWS_PER_BLOCK);
        }
        let mut z = vec![0.0; self.rank];
        self.stream.fill(&mut z);
        let values = realize(&self.adjoints, &z);
        let index = self.next_draw;
        self.next_draw += 1;
        JointDraw { index, z, values }
    }

    fn check_pair(&self, s: usize, t: usize) -> Result<()> {
        self.kernel.index_set().check(s)?;
        self.kernel.index_set().check(t)
    }

    fn check_count(samples: u64) -> Result<()> {
        if samples == 0 {
            return Err(Error::InvalidArgument("sample count must be at least 1".into()));
        }
        Ok(())
    }

    /// `(1/M)·Σ ⟨a, W_s⟩·⟨W_t, b⟩` over the next `M` draws.
    pub fn estimate_covariance(
        &mut self,
        samples: u64,
        s: usize,
        t: usize,
        a: &CVector,
        b: &CVector,
    ) -> Result<Complex64> {
        Self::check_count(samples)?;
        self.check_pair(s, t)?;
        let d = self.kernel.dim();
        for v in [a, b] {
            if v.dim() != d {
                return Err(Error::DimensionMismatch {
                    context: "covariance test vector",
                    expected: d.to_string(),
                    found: v.dim().to_string(),
                });
            }
        }
        let mut acc = ZERO;
        for _ in 0..samples {
            let w = self.draw();
            let left = inner_unchecked(a.as_slice(), w.values[s].as_slice());
            let right = inner_unchecked(w.values[t].as_slice(), b.as_slice());
            acc += left * right;
        }
        Ok(acc / samples as f64)
    }

    /// `K̂(s,t) = (1/M)·Σ |W_s⟩⟨W_t|` over the next `M` draws.
    pub fn estimate_operator_covariance(&mut self, samples: u64, s: usize, t: usize) -> Result<CovarianceEstimate> {
        Self::check_count(samples)?;
        self.check_pair(s, t)?;
        let d = self.kernel.dim();
        let mut sum = CMatrix::zeros(d, d);
        let mut second = vec![0.0; d * d];
        for _ in 0..samples {
            let w = self.draw();
            for i in 0..d {
                for j in 0..d {
                    let x = w.values[s][i] * w.values[t][j].conj();
                    sum[(i, j)] += x;
                    second[i * d + j] += x.norm_sqr();
                }
            }
        }
        Ok(CovarianceEstimate::finish(&self.kernel, s, t, samples, &sum, &second))
    }
}

/// Empirical `K̂(s,t)` against the exact block.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub s: usize,
    pub t: usize,
    pub sample_count: u64,
    pub matrix: CMatrix,
    /// `max |K̂(s,t) − K(s,t)|` over entries.
    pub max_abs_error: f64,
    /// `max √(second moment)/√M` over entries.
    pub std_error: f64,
}

impl CovarianceEstimate {
    fn finish(kernel: &OperatorKernel, s: usize, t: usize, samples: u64, sum: &CMatrix, second: &[f64]) -> Self {
        let m = samples as f64;
        let matrix = sum.scale_real(1.0 / m);
        let max_abs_error = (&matrix - kernel.block(s, t)).max_abs();
        let std_error = second.iter().map(|&q| (q / m).sqrt() / m.sqrt()).fold(0.0, f64::max);
        Self {
            s,
            t,
            sample_count: samples,
            matrix,
            max_abs_error,
            std_error,
        }
    }
}

/// Covariance estimates for every pair `(s,t)` from one shared set of draws.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    pub seed: u64,
    pub sample_count: u64,
    pub labels: Vec<String>,
    /// Row-major `m×m` table of estimates.
    pub estimates: Vec<CovarianceEstimate>,
    /// `max |mean(W_s)|` over indices and coordinates.
    pub mean_max_abs: f64,
}

impl CovarianceReport {
    pub fn estimate(&self, s: usize, t: usize) -> &CovarianceEstimate {
        &self.estimates[s * self.labels.len() + t]
    }

    pub fn max_abs_error(&self) -> f64 {
        self.estimates.iter().map(|e| e.max_abs_error).fold(0.0, f64::max)
    }

    pub fn max_std_error(&self) -> f64 {
        self.estimates.iter().map(|e| e.std_error).fold(0.0, f64::max)
    }

    /// CLT tolerance `5/√M` used for the pass/fail verdict.
    pub fn tolerance(&self) -> f64 {
        clt_tolerance(self.sample_count)
    }

    pub fn passes(&self) -> bool {
        self.max_abs_error() <= self.tolerance()
    }
}

pub fn clt_tolerance(samples: u64) -> f64 {
    5.0 / (samples as f64).sqrt()
}

struct Partial {
    // upper-triangle pairs (s ≤ t), each d×d, row-major
    sums: Vec<Complex64>,
    second: Vec<f64>,
    means: Vec<Complex64>,
}

impl Partial {
    fn new(pairs: usize, m: usize, d: usize) -> Self {
        Self {
            sums: vec![ZERO; pairs * d * d],
            second: vec![0.0; pairs * d * d],
            means: vec![ZERO; m * d],
        }
    }

    fn merge(&mut self, other: &Partial) {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        for (a, b) in self.second.iter_mut().zip(&other.second) {
            *a += b;
        }
        for (a, b) in self.means.iter_mut().zip(&other.means) {
            *a += b;
        }
    }
}

fn accumulate_block(adjoints: &[CMatrix], rank: usize, seed: u64, block: u64, count: u64) -> Partial {
    let m = adjoints.len();
    let d = adjoints.first().map_or(0, CMatrix::rows);
    let pairs = m * (m + 1) / 2;
    let mut acc = Partial::new(pairs, m, d);
    let mut stream = NormalStream::substream(seed, block);
    let mut z = vec![0.0; rank];
    for _ in 0..count {
        stream.fill(&mut z);
        let w = realize(adjoints, &z);
        let mut p = 0;
        for s in 0..m {
            for (mean, x) in acc.means[s * d..(s + 1) * d].iter_mut().zip(w[s].iter()) {
                *mean += x;
            }
            for t in s..m {
                let base = p * d * d;
                for i in 0..d {
                    let ws = w[s][i];
                    for j in 0..d {
                        let x = ws * w[t][j].conj();
                        acc.sums[base + i * d + j] += x;
                        acc.second[base + i * d + j] += x.norm_sqr();
                    }
                }
                p += 1;
            }
        }
    }
    acc
}

/// Estimates `K̂(s,t)` for all pairs from the first `M` draws of the sampler
/// seeded with `seed`.
///
/// Blocks of [`DRAWS_PER_BLOCK`] draws are accumulated independently and
/// merged in block order, so the result does not depend on `parallel` or on
/// the number of worker threads. `K̂(t,s)` is the exact adjoint of `K̂(s,t)`.
pub fn estimate_all_pairs(
    fact: &DilationFactorization,
    seed: u64,
    samples: u64,
    parallel: bool,
) -> Result<CovarianceReport> {
    GaussianSampler::check_count(samples)?;
    let kernel = fact.kernel();
    let (m, d, rank) = (kernel.len(), kernel.dim(), fact.rank());
    let adjoints: Vec<CMatrix> = fact.factors().iter().map(CMatrix::adjoint).collect();
    let blocks = samples.div_ceil(DRAWS_PER_BLOCK);
    let count = |b: u64| DRAWS_PER_BLOCK.min(samples - b * DRAWS_PER_BLOCK);

    let partials: Vec<Partial> = if parallel {
        (0..blocks)
            .into_par_iter()
            .map(|b| accumulate_block(&adjoints, rank, seed, b, count(b)))
            .collect()
    } else {
        (0..blocks)
            .map(|b| accumulate_block(&adjoints, rank, seed, b, count(b)))
            .collect()
    };
    let mut total = Partial::new(m * (m + 1) / 2, m, d);
    for p in &partials {
        total.merge(p);
    }

    let mut estimates: Vec<Option<CovarianceEstimate>> = vec![None; m * m];
    let mut p = 0;
    for s in 0..m {
        for t in s..m {
            let base = p * d * d;
            let sum = CMatrix::new(d, d, total.sums[base..base + d * d].to_vec())?;
            let second = &total.second[base..base + d * d];
            let upper = CovarianceEstimate::finish(kernel, s, t, samples, &sum, second);
            if s != t {
                let second_t: Vec<f64> = (0..d * d).map(|k| second[(k % d) * d + k / d]).collect();
                let lower = CovarianceEstimate::finish(kernel, t, s, samples, &sum.adjoint(), &second_t);
                estimates[t * m + s] = Some(lower);
            }
            estimates[s * m + t] = Some(upper);
            p += 1;
        }
    }
    let mean_max_abs = total
        .means
        .iter()
        .map(|x| x.norm() / samples as f64)
        .fold(0.0, f64::max);

    Ok(CovarianceReport {
        seed,
        sample_count: samples,
        labels: kernel.index_set().labels().to_vec(),
        estimates: estimates.into_iter().map(|e| e.expect("all pairs filled")).collect(),
        mean_max_abs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::{factorize, DEFAULT_RANK_TOL};
    use crate::kernel::IndexSet;
    use crate::linalg::{inner, ONE};
    use crate::random::{random_factors, random_vector, rng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fact_of(k: OperatorKernel) -> DilationFactorization {
        factorize(Arc::new(k), DEFAULT_RANK_TOL).unwrap()
    }

    fn contraction_half() -> DilationFactorization {
        let v = [[1.0, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 1.0]];
        fact_of(
            OperatorKernel::from_fn(IndexSet::numbered(3).unwrap(), 1, |i, j| {
                CMatrix::scalar(c(v[i][j], 0.0))
            })
            .unwrap(),
        )
    }

    #[test]
    fn equal_seeds_give_equal_streams() {
        let a: Vec<f64> = NormalStream::new(42).take(1000).collect();
        let b: Vec<f64> = NormalStream::new(42).take(1000).collect();
        assert_eq!(a, b);
        let c: Vec<f64> = NormalStream::new(43).take(1000).collect();
        assert_ne!(a, c);
        let s1: Vec<f64> = NormalStream::substream(42, 1).take(10).collect();
        assert_ne!(&a[..10], &s1[..]);
    }

    #[test]
    fn stream_moments_and_tails() {
        let n = 1_000_000;
        let mut s = NormalStream::new(2024);
        let (mut sum, mut sq, mut tail) = (0.0, 0.0, 0usize);
        for _ in 0..n {
            let x = s.next_normal();
            sum += x;
            sq += x * x;
            if x.abs() > 1.96 {
                tail += 1;
            }
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        let frac = tail as f64 / n as f64;
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "variance {var}");
        assert!(frac > 0.047 && frac < 0.053, "tail fraction {frac}");
    }

    #[test]
    fn rank_zero_draws_are_zero() {
        let f = fact_of(OperatorKernel::zero(IndexSet::numbered(2).unwrap(), 3).unwrap());
        let mut s = build_sampler(&f, 1);
        for _ in 0..5 {
            let w = s.draw();
            assert!(w.z.is_empty());
            for v in &w.values {
                assert_eq!(v, &CVector::zeros(3));
            }
        }
        let est = s.estimate_operator_covariance(10, 0, 1).unwrap();
        assert_eq!(est.matrix, CMatrix::zeros(3, 3));
        assert_eq!(est.max_abs_error, 0.0);
    }

    #[test]
    fn scalar_identity_has_unit_variance() {
        let f = fact_of(OperatorKernel::identity(IndexSet::numbered(1).unwrap(), 1).unwrap());
        let mut s = build_sampler(&f, 9);
        let m = 100_000;
        let mut acc = 0.0;
        for _ in 0..m {
            acc += s.draw().values[0].norm_sqr();
        }
        assert!((acc / m as f64 - 1.0).abs() < 0.02);
    }

    #[test]
    fn samplers_are_deterministic() {
        let f = contraction_half();
        let mut a = build_sampler(&f, 5);
        let mut b = build_sampler(&f, 5);
        for _ in 0..(DRAWS_PER_BLOCK + 10) {
            assert_eq!(a.draw(), b.draw());
        }
    }

    #[test]
    fn constant_kernel_gives_identical_components() {
        let f = fact_of(OperatorKernel::identity(IndexSet::numbered(2).unwrap(), 1).unwrap());
        let mut s = build_sampler(&f, 3);
        for _ in 0..20 {
            let w = s.draw();
            assert!((&w.values[0] - &w.values[1]).norm() < 1e-12);
        }
    }

    #[test]
    fn joint_draws_share_one_normal_vector() {
        let mut g = rng(8);
        let w = random_factors(&mut g, 4, 3, 2);
        let f = fact_of(OperatorKernel::from_factors(IndexSet::numbered(4).unwrap(), &w).unwrap());
        let mut s = build_sampler(&f, 4);
        for _ in 0..50 {
            let draw = s.draw();
            assert_eq!(draw.z.len(), f.rank());
            let zc = CVector::from_real(&draw.z);
            for (i, v) in draw.values.iter().enumerate() {
                let expected = f.factor(i).unwrap().adjoint().mul_vec(&zc).unwrap();
                assert!((&expected - v).norm() <= 1e-14 * (1.0 + v.norm()));
            }
        }
    }

    #[test]
    fn marginal_variance_matches_kernel_diagonal() {
        let mut g = rng(10);
        let w = random_factors(&mut g, 2, 3, 2);
        let k = OperatorKernel::from_factors(IndexSet::numbered(2).unwrap(), &w).unwrap();
        let scale = k
            .block(0, 0)
            .spectral_norm()
            .unwrap()
            .max(k.block(1, 1).spectral_norm().unwrap());
        let w: Vec<CMatrix> = w.iter().map(|x| x.scale_real(1.0 / scale.sqrt())).collect();
        let f = fact_of(OperatorKernel::from_factors(IndexSet::numbered(2).unwrap(), &w).unwrap());
        let a = {
            let v = random_vector(&mut g, 2);
            v.scale(c(1.0 / v.norm(), 0.0))
        };
        let mut s = build_sampler(&f, 11);
        let m = 200_000;
        let mut acc = 0.0;
        for _ in 0..m {
            acc += inner(&s.draw().values[0], &a).unwrap().norm_sqr();
        }
        let expected = inner(&a, &f.kernel().block(0, 0).mul_vec(&a).unwrap()).unwrap().re;
        assert!(
            (acc / m as f64 - expected).abs() < 0.02,
            "{} vs {expected}",
            acc / m as f64
        );
    }

    #[test]
    fn estimate_covariance_examples() {
        let f = fact_of(OperatorKernel::identity(IndexSet::numbered(1).unwrap(), 2).unwrap());
        let mut s = build_sampler(&f, 1);
        let zero = CVector::zeros(2);
        let e1 = CVector::basis(2, 0);
        assert_eq!(s.estimate_covariance(100, 0, 0, &zero, &e1).unwrap(), ZERO);
        let est = s.estimate_covariance(200_000, 0, 0, &e1, &e1).unwrap();
        assert!(est.re > 0.98 && est.re < 1.02, "{est}");

        let f = contraction_half();
        let mut s = build_sampler(&f, 2);
        let one = CVector::new(vec![ONE]);
        let est = s.estimate_covariance(200_000, 0, 1, &one, &one).unwrap();
        assert!(est.re > 0.48 && est.re < 0.52, "{est}");

        assert!(s.estimate_covariance(0, 0, 1, &one, &one).is_err());
        assert!(s.estimate_covariance(10, 0, 9, &one, &one).is_err());
        assert!(s.estimate_covariance(10, 0, 1, &e1, &one).is_err());
    }

    #[test]
    fn operator_estimate_agrees_with_scalar_estimate_on_shared_draws() {
        let mut g = rng(12);
        let w = random_factors(&mut g, 3, 2, 2);
        let f = fact_of(OperatorKernel::from_factors(IndexSet::numbered(3).unwrap(), &w).unwrap());
        let a = random_vector(&mut g, 2);
        let b = random_vector(&mut g, 2);
        let base = build_sampler(&f, 77);
        let est = base.clone().estimate_covariance(5000, 0, 2, &a, &b).unwrap();
        let op = base.clone().estimate_operator_covariance(5000, 0, 2).unwrap();
        let via_op = inner(&a, &op.matrix.mul_vec(&b).unwrap()).unwrap();
        assert!((est - via_op).norm() <= 1e-12 * (1.0 + est.norm()));
    }

    #[test]
    fn hermitian_pairing_is_exact_on_shared_draws() {
        let mut g = rng(13);
        let w = random_factors(&mut g, 2, 3, 2);
        let f = fact_of(OperatorKernel::from_factors(IndexSet::numbered(2).unwrap(), &w).unwrap());
        let a = random_vector(&mut g, 2);
        let b = random_vector(&mut g, 2);
        let base = build_sampler(&f, 99);
        let x = base.clone().estimate_covariance(3000, 0, 1, &a, &b).unwrap();
        let y = base.clone().estimate_covariance(3000, 1, 0, &b, &a).unwrap();
        assert_eq!(x, y.conj());
    }

    #[test]
    fn identity_kernel_operator_estimate() {
        let f = fact_of(OperatorKernel::identity(IndexSet::numbered(1).unwrap(), 2).unwrap());
        let mut s = build_sampler(&f, 21);
        let est = s.estimate_operator_covariance(200_000, 0, 0).unwrap();
        assert!(est.max_abs_error <= 0.02, "{}", est.max_abs_error);
        assert!(est.std_error > 0.0);
    }

    #[test]
    fn all_pairs_is_independent_of_parallelism_and_matches_sampler() {
        let mut g = rng(14);
        let w = random_factors(&mut g, 3, 2, 2);
        let f = fact_of(OperatorKernel::from_factors(IndexSet::numbered(3).unwrap(), &w).unwrap());
        let m = 3 * DRAWS_PER_BLOCK + 123;
        let serial = estimate_all_pairs(&f, 5, m, false).unwrap();
        let par = estimate_all_pairs(&f, 5, m, true).unwrap();
        assert_eq!(serial, par);

        let single = build_sampler(&f, 5).estimate_operator_covariance(m, 0, 2).unwrap();
        let diff = (&single.matrix - &serial.estimate(0, 2).matrix).max_abs();
        assert!(diff <= 1e-12, "{diff}");

        for s in 0..3 {
            for t in 0..3 {
                assert_eq!(serial.estimate(t, s).matrix, serial.estimate(s, t).matrix.adjoint());
            }
        }
        assert!(serial.mean_max_abs <= 4.0 / (m as f64).sqrt() * 2.0);
    }

    #[test]
    fn all_pairs_rejects_zero_samples() {
        let f = contraction_half();
        assert!(estimate_all_pairs(&f, 1, 0, false).is_err());
    }
}
