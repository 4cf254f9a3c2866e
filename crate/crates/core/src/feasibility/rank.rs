use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative singular-value cutoff for rank decisions.
pub const RANK_RTOL: f64 = 1e-9;
/// Absolute floor, relative to the magnitude of the coordinates, so that
/// round-off differences between "equal" points never count as a direction.
const RANK_ATOL: f64 = 1e-13;

fn difference_matrix(points: &[Vec<f64>]) -> Result<(DMatrix<f64>, f64)> {
    let Some(x0) = points.first() else {
        return Err(Error::InvalidArgument("affine dimension of an empty set".into()));
    };
    let m = x0.len();
    let mut scale = 1.0f64;
    for p in points {
        if p.len() != m {
            return Err(Error::dims("point", m, p.len()));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point".into()));
        }
        scale = p.iter().fold(scale, |s, v| s.max(v.abs()));
    }
    let cols = points.len() - 1;
    let d = DMatrix::from_fn(m, cols, |i, j| points[j + 1][i] - x0[i]);
    Ok((d, scale))
}

fn cutoff(sigma_max: f64, scale: f64) -> f64 {
    (RANK_RTOL * sigma_max).max(RANK_ATOL * scale)
}

/// Affine dimension of a finite point set: rank of `(x_k - x_0)`.
pub fn affine_dim(points: &[Vec<f64>]) -> Result<usize> {
    let (d, scale) = difference_matrix(points)?;
    if d.ncols() == 0 || d.nrows() == 0 {
        return Ok(0);
    }
    let sv = d.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let tol = cutoff(smax, scale);
    Ok(sv.iter().filter(|&&s| s > tol).count())
}

/// Orthonormal basis (as rows) of the direction space of the affine hull.
pub fn affine_basis(points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let (d, scale) = difference_matrix(points)?;
    if d.ncols() == 0 || d.nrows() == 0 {
        return Ok(Vec::new());
    }
    let svd = d.svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = cutoff(smax, scale);
    Ok(svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol)
        .map(|(j, _)| u.column(j).iter().cloned().collect())
        .collect())
}

/// Orthonormal basis (as rows) of the null space of a row-major matrix.
pub fn null_space(rows: &[Vec<f64>], ncols: usize) -> Vec<Vec<f64>> {
    if rows.is_empty() {
        return (0..ncols)
            .map(|j| (0..ncols).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
    }
    // Work with the square Gram-free formulation: pad to n x n so the SVD
    // returns a complete right basis.
    let m = rows.len().max(ncols);
    let a = DMatrix::from_fn(m, ncols, |i, j| rows.get(i).map_or(0.0, |r| r[j]));
    let svd = a.svd(false, true);
    let vt = svd.v_t.as_ref().expect("right singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = (RANK_RTOL * smax).max(1e-300);
    (0..ncols)
        .filter(|&j| svd.singular_values.get(j).is_none_or(|&s| s <= tol))
        .map(|j| vt.row(j).iter().cloned().collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims() {
        assert_eq!(affine_dim(&[vec![1.0, 2.0]]).unwrap(), 0);
        assert_eq!(affine_dim(&[vec![1.0], vec![1.0], vec![1.0]]).unwrap(), 0);
        assert_eq!(affine_dim(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap(), 1);
        assert_eq!(affine_dim(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(), 2);
        assert!(affine_dim(&[]).is_err());
    }

    #[test]
    fn roundoff_is_not_a_direction() {
        let a = 0.1 + 0.2;
        assert_eq!(affine_dim(&[vec![a], vec![0.3]]).unwrap(), 0);
    }

    #[test]
    fn null_space_of_sum_row() {
        let ns = null_space(&[vec![1.0, 1.0, 1.0]], 3);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            assert!(v.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn basis_spans_segment() {
        let b = affine_basis(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b[0][0].abs() - 0.6).abs() < 1e-12);
    }
}
