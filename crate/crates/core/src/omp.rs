//! Orthogonal matching pursuit and its genie-aided wrapper.
//!
//! Greedy atom selection by maximal |atom^H residual| with a least-squares
//! re-fit over the selected set each iteration. The genie variant sweeps the
//! sparsity level and keeps the reconstruction closest to the true channel,
//! which makes it an optimistic benchmark.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::{CMatrix, CVector, Complex64};

/// Unit-norm atom dictionary.
#[derive(Debug, Clone)]
pub struct Dictionary {
    atoms: CMatrix,
}

impl Dictionary {
    /// Wraps an M x D matrix, checking unit column norms.
    pub fn new(atoms: CMatrix) -> Result<Self> {
        for j in 0..atoms.ncols() {
            let n = atoms.column(j).norm();
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!(
                    "dictionary column {j} has norm {n}, expected 1"
                )));
            }
        }
        Ok(Self { atoms })
    }

    /// ULA steering grid with `oversample` atoms per antenna: atom d has
    /// spatial frequency d / (oversample * M) and entries of magnitude
    /// 1/sqrt(M). `oversample = 1` gives the orthonormal DFT basis.
    pub fn steering(m: usize, oversample: usize) -> Result<Self> {
        if m == 0 || oversample == 0 {
            return Err(Error::invalid("need M >= 1 and oversample >= 1"));
        }
        let d = m * oversample;
        let scale = 1.0 / (m as f64).sqrt();
        let atoms = CMatrix::from_fn(m, d, |r, c| {
            Complex64::from_polar(scale, TAU * (r * c) as f64 / d as f64)
        });
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &CMatrix {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn len(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.ncols() == 0
    }
}

/// Least-squares coefficients over the selected atoms via thin QR. Returns
/// None when the selection is numerically rank-deficient.
fn refit(dict: &Dictionary, selected: &[usize], y: &CVector) -> Option<CVector> {
    let m = dict.dim();
    let k = selected.len();
    let a = CMatrix::from_fn(m, k, |r, c| dict.atoms[(r, selected[c])]);
    let qr = a.qr();
    let r = qr.r();
    for i in 0..k {
        if r[(i, i)].norm() < 1e-12 {
            return None;
        }
    }
    let mut x = qr.q().adjoint() * y;
    // Back substitution on the upper-triangular factor.
    for i in (0..k).rev() {
        let mut acc = x[i];
        for j in i + 1..k {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / r[(i, i)];
    }
    Some(x)
}

fn synthesize(dict: &Dictionary, selected: &[usize], coeffs: &CVector) -> CVector {
    let mut out = CVector::zeros(dict.dim());
    for (c, &j) in coeffs.iter().zip(selected) {
        out += dict.atoms.column(j) * *c;
    }
    out
}

/// Reconstructions after 1..=s_max greedy iterations (selections are nested,
/// so one pass serves every sparsity level). Stops early if the selected set
/// loses rank; ties in the selection score go to the lowest atom index.
fn omp_path(y: &CVector, dict: &Dictionary, s_max: usize) -> Result<Vec<CVector>> {
    if s_max == 0 || s_max > dict.dim() {
        return Err(Error::invalid(format!(
            "sparsity must be in 1..={}, got {s_max}",
            dict.dim()
        )));
    }
    if y.len() != dict.dim() {
        return Err(Error::invalid("observation does not match dictionary"));
    }
    let mut selected: Vec<usize> = Vec::with_capacity(s_max);
    let mut residual = y.clone();
    let mut path = Vec::with_capacity(s_max);
    for _ in 0..s_max {
        let mut best = None;
        let mut best_score = -1.0;
        for j in 0..dict.len() {
            if selected.contains(&j) {
                continue;
            }
            let score = dict.atoms.column(j).dotc(&residual).norm();
            if score > best_score {
                best_score = score;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        selected.push(j);
        let Some(coeffs) = refit(dict, &selected, y) else {
            selected.pop();
            break;
        };
        let recon = synthesize(dict, &selected, &coeffs);
        residual = y - &recon;
        path.push(recon);
    }
    if path.is_empty() {
        path.push(CVector::zeros(dict.dim()));
    }
    Ok(path)
}

/// s-sparse OMP reconstruction of the channel behind `y`.
pub fn omp(y: &CVector, dict: &Dictionary, s: usize) -> Result<CVector> {
    let path = omp_path(y, dict, s)?;
    Ok(path.last().unwrap().clone())
}

/// Genie-aided OMP: runs s = 1..=s_max and returns the reconstruction
/// minimizing ||h_true - h_hat_s||^2, smallest s on ties.
pub fn genie_omp(
    y: &CVector,
    dict: &Dictionary,
    h_true: &CVector,
    s_max: usize,
) -> Result<CVector> {
    let path = omp_path(y, dict, s_max)?;
    let mut best = 0;
    let mut best_err = f64::INFINITY;
    for (i, recon) in path.iter().enumerate() {
        let err = (h_true - recon).norm_squared();
        if err < best_err {
            best_err = err;
            best = i;
        }
    }
    Ok(path[best].clone())
}
