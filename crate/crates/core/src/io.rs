//! File formats used by the command-line front end.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major arrays of
//! rows. Kernel files key blocks as `"s|t"`; only one orientation of each
//! off-diagonal pair is needed and the mirror is filled by the adjoint.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dilation::DiscretePOVM;
use crate::error::Error;
use crate::factorization::DilationFactorization;
use crate::gaussian::GaussianSampler;
use crate::kernel::{IndexSet, OperatorKernel, KERNEL_SYMMETRY_TOL};
use crate::linalg::CMatrix;

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

/// Failure to obtain a valid object from an input file.
#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Invalid(#[from] Error),
}

fn parse_err(msg: impl Into<String>) -> InputError {
    InputError::Parse(msg.into())
}

pub fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &JsonMatrix, nrows: usize, ncols: usize, what: &str) -> Result<CMatrix, InputError> {
    if rows.len() != nrows {
        return Err(parse_err(format!(
            "{what}: expected {nrows} rows, found {}",
            rows.len()
        )));
    }
    let mut data = Vec::with_capacity(nrows * ncols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(parse_err(format!(
                "{what}: row {i} has {} entries, expected {ncols}",
                row.len()
            )));
        }
        data.extend(row.iter().map(|&[re, im]| Complex64::new(re, im)));
    }
    Ok(CMatrix::new(nrows, ncols, data)?)
}

/// Square matrix of any size.
pub fn square_from_json(rows: &JsonMatrix, what: &str) -> Result<CMatrix, InputError> {
    matrix_from_json(rows, rows.len(), rows.len(), what)
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, InputError> {
    std::fs::read(path).map_err(|source| InputError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn sha256_digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

fn from_json<'a, T: Deserialize<'a>>(bytes: &'a [u8]) -> Result<T, InputError> {
    serde_json::from_slice(bytes).map_err(|e| parse_err(e.to_string()))
}

fn pair_key(s: &str, t: &str) -> String {
    format!("{s}|{t}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub dim: usize,
    pub labels: Vec<String>,
    pub blocks: BTreeMap<String, JsonMatrix>,
}

impl KernelFile {
    pub fn parse(bytes: &[u8]) -> Result<Self, InputError> {
        from_json(bytes)
    }

    /// Upper-triangle serialization of `kernel`.
    pub fn from_kernel(kernel: &OperatorKernel) -> Self {
        let labels = kernel.index_set().labels().to_vec();
        let mut blocks = BTreeMap::new();
        for i in 0..labels.len() {
            for j in i..labels.len() {
                blocks.insert(pair_key(&labels[i], &labels[j]), matrix_to_json(kernel.block(i, j)));
            }
        }
        Self {
            dim: kernel.dim(),
            labels,
            blocks,
        }
    }

    pub fn to_kernel(&self) -> Result<OperatorKernel, InputError> {
        if let Some(l) = self.labels.iter().find(|l| l.contains('|')) {
            return Err(parse_err(format!("label {l:?} contains '|'")));
        }
        let index_set = IndexSet::new(self.labels.iter().cloned())?;
        let m = index_set.len();
        let d = self.dim;
        let mut given: Vec<Vec<Option<CMatrix>>> = vec![vec![None; m]; m];
        for (key, value) in &self.blocks {
            let (s, t) = key
                .split_once('|')
                .ok_or_else(|| parse_err(format!("block key {key:?} is not of the form \"s|t\"")))?;
            let i = index_set
                .position(s)
                .map_err(|_| parse_err(format!("block {key:?}: unknown label {s:?}")))?;
            let j = index_set
                .position(t)
                .map_err(|_| parse_err(format!("block {key:?}: unknown label {t:?}")))?;
            given[i][j] = Some(matrix_from_json(value, d, d, &format!("block {key:?}"))?);
        }
        let mut table = vec![vec![CMatrix::zeros(d, d); m]; m];
        for i in 0..m {
            for j in i..m {
                let (s, t) = (index_set.label(i), index_set.label(j));
                let block = match (&given[i][j], &given[j][i]) {
                    (Some(b), Some(mirror)) if i != j => {
                        let defect = (&mirror.adjoint() - b).max_abs();
                        let bound = KERNEL_SYMMETRY_TOL * (1.0 + b.max_abs());
                        if defect > bound {
                            return Err(Error::NotHermitian { defect, bound }.into());
                        }
                        b.clone()
                    }
                    (Some(b), _) => b.clone(),
                    (None, Some(mirror)) => mirror.adjoint(),
                    (None, None) => {
                        return Err(parse_err(format!("missing block {:?}", pair_key(s, t))));
                    }
                };
                if i != j {
                    table[j][i] = block.adjoint();
                }
                table[i][j] = block;
            }
        }
        Ok(OperatorKernel::new(index_set, d, table)?)
    }
}

pub fn read_kernel(bytes: &[u8]) -> Result<OperatorKernel, InputError> {
    KernelFile::parse(bytes)?.to_kernel()
}

/// Finite-outcome POVM: one effect per atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmFile {
    pub dim: usize,
    pub atoms: Vec<String>,
    pub effects: BTreeMap<String, JsonMatrix>,
}

impl PovmFile {
    pub fn parse(bytes: &[u8]) -> Result<Self, InputError> {
        from_json(bytes)
    }

    pub fn from_povm(povm: &DiscretePOVM) -> Self {
        let atoms = povm.atoms().labels().to_vec();
        let effects = atoms
            .iter()
            .zip(povm.effects())
            .map(|(a, e)| (a.clone(), matrix_to_json(e)))
            .collect();
        Self {
            dim: povm.dim(),
            atoms,
            effects,
        }
    }

    pub fn to_povm(&self) -> Result<DiscretePOVM, InputError> {
        if let Some(extra) = self.effects.keys().find(|k| !self.atoms.contains(k)) {
            return Err(parse_err(format!("effect given for undeclared atom {extra:?}")));
        }
        let effects = self
            .atoms
            .iter()
            .map(|a| {
                let m = self
                    .effects
                    .get(a)
                    .ok_or_else(|| parse_err(format!("missing effect for atom {a:?}")))?;
                matrix_from_json(m, self.dim, self.dim, &format!("effect {a:?}"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DiscretePOVM::new(self.atoms.clone(), effects)?)
    }
}

pub fn read_povm(bytes: &[u8]) -> Result<DiscretePOVM, InputError> {
    PovmFile::parse(bytes)?.to_povm()
}

/// A bare square matrix.
pub fn read_matrix(bytes: &[u8]) -> Result<CMatrix, InputError> {
    let rows: JsonMatrix = from_json(bytes)?;
    if rows.is_empty() {
        return Err(parse_err("matrix is empty"));
    }
    square_from_json(&rows, "matrix")
}

/// Factors `V_s` (each `r×d`) of a dilation factorization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorFile {
    pub rank: usize,
    pub dim: usize,
    pub labels: Vec<String>,
    pub residual: f64,
    pub factors: BTreeMap<String, JsonMatrix>,
}

impl FactorFile {
    pub fn parse(bytes: &[u8]) -> Result<Self, InputError> {
        from_json(bytes)
    }

    pub fn from_factorization(fact: &DilationFactorization) -> Self {
        let labels = fact.kernel().index_set().labels().to_vec();
        let factors = labels
            .iter()
            .zip(fact.factors())
            .map(|(l, v)| (l.clone(), matrix_to_json(v)))
            .collect();
        Self {
            rank: fact.rank(),
            dim: fact.dim(),
            labels,
            residual: fact.residual(),
            factors,
        }
    }

    pub fn factor_matrices(&self) -> Result<Vec<CMatrix>, InputError> {
        self.labels
            .iter()
            .map(|l| {
                let m = self
                    .factors
                    .get(l)
                    .ok_or_else(|| parse_err(format!("missing factor for label {l:?}")))?;
                if self.rank == 0 {
                    if !m.is_empty() {
                        return Err(parse_err(format!("factor {l:?}: expected 0 rows")));
                    }
                    return Ok(CMatrix::zeros(0, self.dim));
                }
                matrix_from_json(m, self.rank, self.dim, &format!("factor {l:?}"))
            })
            .collect()
    }

    /// The kernel `K(s,t) = V_s*·V_t` described by the stored factors.
    pub fn to_kernel(&self) -> Result<OperatorKernel, InputError> {
        let index_set = IndexSet::new(self.labels.iter().cloned())?;
        let factors = self.factor_matrices()?;
        if self.rank == 0 {
            return Ok(OperatorKernel::zero(index_set, self.dim)?);
        }
        Ok(OperatorKernel::from_factors(index_set, &factors)?)
    }
}

/// Writes `count` joint draws as CSV rows `draw,label,re_0,im_0,…`.
pub fn write_draws_csv<W: Write>(sampler: &mut GaussianSampler, count: u64, out: W) -> csv::Result<()> {
    let kernel = std::sync::Arc::clone(sampler.kernel());
    let d = kernel.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["draw".to_string(), "label".to_string()];
    for k in 0..d {
        header.push(format!("re_{k}"));
        header.push(format!("im_{k}"));
    }
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(2 + 2 * d);
    for _ in 0..count {
        let draw = sampler.draw();
        for (label, v) in draw.labelled(&kernel) {
            record.clear();
            record.push(draw.index.to_string());
            record.push(label.to_string());
            for z in v.iter() {
                record.push(z.re.to_string());
                record.push(z.im.to_string());
            }
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}
