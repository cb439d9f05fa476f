use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::{complete_orthonormal, polar_rows, sym_eigen};
use crate::transport::EigenvalueProfile;

/// Singular-value ratio below which a direction matrix counts as rank
/// deficient.
pub const MIN_SINGULAR_RATIO: f64 = 1e-3;

/// Largest `k` with `m_k ≥ 1 − tol`; `tol` defaults to twice the map
/// tolerance of the profile's provenance.
pub fn detect_factors(profile: &EigenvalueProfile, tol: Option<f64>) -> usize {
    let tol = tol.unwrap_or(2.0 * profile.provenance.map_tolerance());
    // m_k is nonincreasing in k
    profile.m.iter().take_while(|&&m| m >= 1.0 - tol).count()
}

/// Where the Gaussian directions come from.
#[derive(Debug, Clone, Copy)]
pub enum Directions<'a> {
    /// Top-`k` eigenvectors of the Gaussian average of the spectral
    /// projector onto the `k` largest eigenvalues of `D²φ`.
    Profile {
        profile: &'a EigenvalueProfile,
        k: usize,
    },
    /// The linear parts `Vᵢ` of pulled-back near-minimizers, one per row.
    Linear(&'a [Vec<f64>]),
}

fn profile_directions(profile: &EigenvalueProfile, k: usize) -> Result<DMatrix<f64>> {
    let n = profile.dimension();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={n}, got {k}"
        )));
    }
    let mut projector = DMatrix::<f64>::zeros(n, n);
    for (w, vecs) in profile.weights.iter().zip(&profile.eigenvectors) {
        for c in n - k..n {
            let v = vecs.column(c);
            projector += *w * v * v.transpose();
        }
    }
    let spec = sym_eigen(&projector)?;
    Ok(DMatrix::from_fn(k, n, |i, j| {
        spec.eigenvectors[(j, n - 1 - i)]
    }))
}

/// Orthogonal `R` whose first `k` rows are the orthonormalized directions,
/// so `R` maps them onto `e₁, …, e_k`.
///
/// Each direction row is signed so that its largest-magnitude entry is
/// positive; the completion rows follow [`complete_orthonormal`].
pub fn align_rotation(source: Directions<'_>) -> Result<DMatrix<f64>> {
    let dirs = match source {
        Directions::Profile { profile, k } => profile_directions(profile, k)?,
        Directions::Linear(rows) => {
            let k = rows.len();
            let n = rows.first().map_or(0, Vec::len);
            if k == 0 || n == 0 || k > n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Dimension(
                    "direction rows must be k ≤ n vectors".into(),
                ));
            }
            DMatrix::from_fn(k, n, |i, j| rows[i][j])
        }
    };
    let (mut q, ratio) = polar_rows(&dirs);
    if !(ratio >= MIN_SINGULAR_RATIO) {
        return Err(Error::DegenerateDirections(format!(
            "singular value ratio {ratio:e} below {MIN_SINGULAR_RATIO:e}"
        )));
    }
    for i in 0..q.nrows() {
        let lead =
            q.row(i)
                .iter()
                .copied()
                .fold(0.0f64, |a, v| if v.abs() > a.abs() + 1e-12 { v } else { a });
        if lead < 0.0 {
            q.row_mut(i).neg_mut();
        }
    }
    Ok(complete_orthonormal(&q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_directions() {
        let rows = vec![vec![1.0, 0.0, 0.0]];
        let r = align_rotation(Directions::Linear(&rows)).unwrap();
        assert!((r - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);
    }

    #[test]
    fn recovers_a_rotation() {
        let a = 30f64.to_radians();
        let rows = vec![vec![a.cos(), a.sin()], vec![-a.sin(), a.cos()]];
        let r = align_rotation(Directions::Linear(&rows)).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[a.cos(), a.sin(), -a.sin(), a.cos()]);
        assert!((r - expected).amax() < 1e-12);
    }

    #[test]
    fn nearly_parallel_pair_is_degenerate() {
        let b = 1e-6f64;
        let rows = vec![vec![1.0, 0.0], vec![b.cos(), b.sin()]];
        assert!(matches!(
            align_rotation(Directions::Linear(&rows)),
            Err(Error::DegenerateDirections(_))
        ));
    }
}
