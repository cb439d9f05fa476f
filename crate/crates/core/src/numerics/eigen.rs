//! Symmetric eigensolves with a deterministic ordering and sign convention.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Largest matrix handled by [`sym_eigen`].
pub const MAX_EIGEN_DIM: usize = 64;

/// Ascending eigenvalues with orthonormal eigenvectors stored as columns.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetricSpectrum {
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: DMatrix<f64>,
}

impl SymmetricSpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, i: usize) -> DVector<f64> {
        self.eigenvectors.column(i).into_owned()
    }

    /// `Q Λ Qᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lam = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        &self.eigenvectors * lam * self.eigenvectors.transpose()
    }
}

/// Maximum absolute asymmetry `max |aᵢⱼ − aⱼᵢ|`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Eigen-decomposition of a symmetric matrix.
///
/// Eigenvalues are returned in ascending order. Each eigenvector is flipped
/// so that its largest-magnitude entry (first such index on ties) is positive.
pub fn sym_eigen(a: &DMatrix<f64>) -> Result<SymmetricSpectrum> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidMatrix(format!(
            "matrix is {}x{}, expected square",
            n,
            a.ncols()
        )));
    }
    if n == 0 || n > MAX_EIGEN_DIM {
        return Err(Error::InvalidMatrix(format!(
            "dimension {n} outside 1..={MAX_EIGEN_DIM}"
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    let scale = a.amax().max(1.0);
    let asym = asymmetry(a);
    if asym > 1e-10 * scale {
        return Err(Error::InvalidMatrix(format!(
            "asymmetry {asym:e} exceeds tolerance"
        )));
    }
    Ok(sym_eigen_unchecked(a))
}

pub(crate) fn sym_eigen_unchecked(a: &DMatrix<f64>) -> SymmetricSpectrum {
    let n = a.nrows();
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        fix_sign(&mut col);
        vecs.set_column(dst, &col);
    }
    SymmetricSpectrum {
        eigenvalues,
        eigenvectors: vecs,
    }
}

pub(crate) fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0usize;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() * (1.0 + 1e-12) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        *v *= -1.0;
    }
}

/// Eigenvalues only, ascending. Intended for small Hessians in hot loops.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    if n == 1 {
        return vec![a[(0, 0)]];
    }
    if n == 2 {
        let (p, q, r) = (a[(0, 0)], 0.5 * (a[(0, 1)] + a[(1, 0)]), a[(1, 1)]);
        let mean = 0.5 * (p + r);
        let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
        return vec![mean - rad, mean + rad];
    }
    let mut vals: Vec<f64> = ((a + a.transpose()) * 0.5)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    vals.sort_by(|x, y| x.total_cmp(y));
    vals
}

/// Solution of `A c = λ M c` with `M` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct GeneralizedSpectrum {
    pub eigenvalues: Vec<f64>,
    /// Columns are `M`-orthonormal eigenvectors.
    pub eigenvectors: DMatrix<f64>,
    /// Spectral condition number of `M`.
    pub mass_condition: f64,
}

/// Generalized symmetric-definite eigenproblem via Cholesky reduction.
///
/// Fails with [`Error::IllConditionedBasis`] when `cond(M)` exceeds
/// `max_condition`.
pub fn generalized_sym_eigen(
    a: &DMatrix<f64>,
    m: &DMatrix<f64>,
    max_condition: f64,
) -> Result<GeneralizedSpectrum> {
    let n = a.nrows();
    if m.nrows() != n || a.ncols() != n || m.ncols() != n {
        return Err(Error::InvalidMatrix("dimension mismatch".into()));
    }
    let m_sym = (m + m.transpose()) * 0.5;
    let a_sym = (a + a.transpose()) * 0.5;
    let m_vals = m_sym.clone().symmetric_eigenvalues();
    let lo = m_vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = m_vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= max_condition) {
        return Err(Error::IllConditionedBasis { condition });
    }
    let chol = m_sym
        .cholesky()
        .ok_or(Error::IllConditionedBasis { condition })?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or(Error::IllConditionedBasis { condition })?;
    let c = &l_inv * a_sym * l_inv.transpose();
    let spec = sym_eigen_unchecked(&c);
    let mut vecs = l_inv.transpose() * &spec.eigenvectors;
    for j in 0..n {
        let mut col = vecs.column(j).into_owned();
        fix_sign(&mut col);
        vecs.set_column(j, &col);
    }
    Ok(GeneralizedSpectrum {
        eigenvalues: spec.eigenvalues,
        eigenvectors: vecs,
        mass_condition: condition,
    })
}

/// Orthonormal rows closest (in Frobenius norm) to the rows of `dirs`
/// (`k × n`, `k ≤ n`), i.e. the polar factor `U Vᵀ` of its SVD.
///
/// Returns the polar factor and the ratio of smallest to largest singular
/// value.
pub fn polar_rows(dirs: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let svd = dirs.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    (u * vt, ratio)
}

/// Extends orthonormal rows `q` (`k × n`) to an `n × n` orthogonal matrix.
///
/// Completion rows are obtained by Gram–Schmidt on the standard basis in
/// index order; the last completion row is flipped if needed so the
/// determinant is `+1` whenever `k < n`.
pub fn complete_orthonormal(q: &DMatrix<f64>) -> DMatrix<f64> {
    let (k, n) = q.shape();
    let mut rows: Vec<DVector<f64>> = (0..k).map(|i| q.row(i).transpose()).collect();
    for e in 0..n {
        if rows.len() == n {
            break;
        }
        let mut v = DVector::<f64>::zeros(n);
        v[e] = 1.0;
        for _ in 0..2 {
            for r in &rows {
                let proj = r.dot(&v);
                v -= r * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            rows.push(v / norm);
        }
    }
    let mut out = DMatrix::<f64>::zeros(n, n);
    for (i, r) in rows.iter().enumerate() {
        out.set_row(i, &r.transpose());
    }
    if k < n && out.determinant() < 0.0 {
        let mut last = out.row(n - 1).into_owned();
        last *= -1.0;
        out.set_row(n - 1, &last);
    }
    out
}
