//! Dense linear algebra in a point metric: orthonormalization, nullspaces,
//! complements and subspace projections.
//!
//! Everything here works on small matrices (chart dimensions ≤ ~8) and is
//! deterministic: fixed iteration orders, no randomization.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Singular values below `REL_NULL_TOL`· σ_max count as zero when detecting
/// rank. Double-precision jets carry ~1e-12 noise; the 1e-8 threshold keeps
/// four orders of margin.
pub const REL_NULL_TOL: f64 = 1e-8;

/// Metric condition numbers above this are rejected as singular.
pub const METRIC_COND_LIMIT: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("metric is not positive definite at the evaluation point")]
    NotPositiveDefinite,
    #[error("metric is numerically singular at the evaluation point (cond ≈ {cond:.3e})")]
    IllConditioned { cond: f64 },
    #[error("SVD failed to converge")]
    SvdFailed,
}

pub fn inner(g: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (g * b).dot(a)
}

pub fn norm(g: &DMatrix<f64>, a: &DVector<f64>) -> f64 {
    inner(g, a, a).max(0.0).sqrt()
}

/// Checks positive definiteness (Cholesky) and conditioning, and returns
/// the inverse metric.
pub fn metric_inverse(g: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let svd = g.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 0.0 || smax / smin > METRIC_COND_LIMIT {
        return Err(LinalgError::IllConditioned {
            cond: if smin > 0.0 { smax / smin } else { f64::INFINITY },
        });
    }
    let chol =
        nalgebra::Cholesky::new(g.clone()).ok_or(LinalgError::NotPositiveDefinite)?;
    Ok(chol.inverse())
}

/// Modified Gram–Schmidt in the inner product of `g`, with one
/// re-orthogonalization pass. Vectors that collapse below `drop_tol`
/// relative to their original norm are dropped, so the result is an
/// orthonormal basis of the span.
pub fn gram_schmidt(g: &DMatrix<f64>, vectors: &[DVector<f64>], drop_tol: f64) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let original = norm(g, v);
        if original == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = inner(g, &w, b);
                w -= b * c;
            }
        }
        let n = norm(g, &w);
        if n > drop_tol * original {
            basis.push(w / n);
        }
    }
    basis
}

/// Rank and an orthonormal (Euclidean) basis of the kernel of `mat`,
/// using the relative singular-value threshold.
///
/// The matrix is zero-padded to square first so the full right singular
/// basis is available; `svd` returns singular values sorted descending,
/// so the kernel is the trailing rows of Vᵀ.
pub fn nullspace(mat: &DMatrix<f64>) -> Result<(usize, Vec<DVector<f64>>), LinalgError> {
    let (n, m) = (mat.nrows(), mat.ncols());
    let work = if n < m {
        let mut w = DMatrix::zeros(m, m);
        w.view_mut((0, 0), (n, m)).copy_from(mat);
        w
    } else {
        mat.clone()
    };
    let svd = work.svd(false, true);
    let vt = svd.v_t.ok_or(LinalgError::SvdFailed)?;
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| smax > 0.0 && s > REL_NULL_TOL * smax)
        .count();
    let kernel = (rank..m).map(|r| vt.row(r).transpose()).collect();
    Ok((rank, kernel))
}

/// Orthonormal basis (in `g`) of the g-orthogonal complement of `span`
/// inside the whole chart tangent space.
pub fn complement(
    g: &DMatrix<f64>,
    span: &[DVector<f64>],
    dim: usize,
) -> Result<Vec<DVector<f64>>, LinalgError> {
    if span.is_empty() {
        let coords: Vec<DVector<f64>> = (0..dim)
            .map(|i| {
                let mut e = DVector::zeros(dim);
                e[i] = 1.0;
                e
            })
            .collect();
        return Ok(gram_schmidt(g, &coords, 1e-12));
    }
    // x is g-orthogonal to span(K)  ⟺  Kᵀ G x = 0
    let mut kt_g = DMatrix::zeros(span.len(), dim);
    for (r, k) in span.iter().enumerate() {
        let row = (g * k).transpose();
        kt_g.set_row(r, &row);
    }
    let (_, null) = nullspace(&kt_g)?;
    Ok(gram_schmidt(g, &null, 1e-12))
}

/// g-orthogonal projection of `x` onto the span of a g-orthonormal basis.
pub fn project(g: &DMatrix<f64>, basis: &[DVector<f64>], x: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(x.len());
    for b in basis {
        out += b * inner(g, x, b);
    }
    out
}

/// Principal angles (radians) between two subspaces given by g-orthonormal
/// bases: the arccosines of the singular values of Aᵀ G B.
pub fn principal_angles(
    g: &DMatrix<f64>,
    a: &[DVector<f64>],
    b: &[DVector<f64>],
) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut m = DMatrix::zeros(a.len(), b.len());
    for (i, u) in a.iter().enumerate() {
        for (j, v) in b.iter().enumerate() {
            m[(i, j)] = inner(g, u, v);
        }
    }
    let svd = m.svd(false, false);
    svd.singular_values
        .iter()
        .map(|s| s.min(1.0).max(-1.0).acos())
        .collect()
}

/// Max |g(bᵢ,bⱼ) − δᵢⱼ| over a basis: how far from g-orthonormal it is.
pub fn orthonormality_residual(g: &DMatrix<f64>, basis: &[DVector<f64>]) -> f64 {
    let mut worst = 0.0_f64;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((inner(g, a, b) - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_rank_two_projection() {
        // drop x3: 2x3 matrix [[1,0,0],[0,1,0]]
        let mat = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let (rank, kernel) = nullspace(&mat).unwrap();
        assert_eq!(rank, 2);
        assert_eq!(kernel.len(), 1);
        assert!((kernel[0][2].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn nullspace_of_zero_matrix_is_everything() {
        let mat = DMatrix::zeros(2, 3);
        let (rank, kernel) = nullspace(&mat).unwrap();
        assert_eq!(rank, 0);
        assert_eq!(kernel.len(), 3);
    }

    #[test]
    fn gram_schmidt_in_scaled_metric() {
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let raw = vec![
            DVector::from_vec(vec![1.0, 1.0]),
            DVector::from_vec(vec![0.0, 1.0]),
        ];
        let basis = gram_schmidt(&g, &raw, 1e-12);
        assert_eq!(basis.len(), 2);
        assert!(orthonormality_residual(&g, &basis) < 1e-12);
    }

    #[test]
    fn complement_dimension_counts() {
        let g = DMatrix::identity(4, 4);
        let span = vec![
            DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]),
        ];
        let comp = complement(&g, &span, 4).unwrap();
        assert_eq!(comp.len(), 2);
        for c in &comp {
            for s in &span {
                assert!(inner(&g, c, s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ill_conditioned_metric_rejected() {
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-14]));
        assert!(matches!(
            metric_inverse(&g),
            Err(LinalgError::IllConditioned { .. })
        ));
    }
}
