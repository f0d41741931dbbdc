//! Dense helpers shared by the samplers.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::VertexOrdering;

/// Lower Cholesky factor `L` with `a = L Lᵀ`. Reports the failing pivot.
pub fn cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut s = a[(j, j)];
        for k in 0..j {
            s -= l[(j, k)] * l[(j, k)];
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let ljj = s.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Upper Cholesky factor `U` with `a = Uᵀ U`.
pub fn cholesky_upper(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    cholesky_lower(a).map(|l| l.transpose())
}

/// Inverse of a lower-triangular matrix.
pub fn lower_tri_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut inv = DMatrix::zeros(n, n);
    for j in 0..n {
        inv[(j, j)] = 1.0 / l[(j, j)];
        for i in (j + 1)..n {
            let mut s = 0.0;
            for k in j..i {
                s += l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / l[(i, i)];
        }
    }
    inv
}

pub fn upper_tri_inverse(u: &DMatrix<f64>) -> DMatrix<f64> {
    lower_tri_inverse(&u.transpose()).transpose()
}

/// Inverse of a symmetric positive definite matrix, symmetrized.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = cholesky_lower(a)?;
    let li = lower_tri_inverse(&l);
    let inv = li.transpose() * li;
    Ok(symmetrize(&inv))
}

pub fn log_det_spd(a: &DMatrix<f64>) -> Result<f64> {
    let l = cholesky_lower(a)?;
    Ok(2.0 * l.diagonal().iter().map(|x| x.ln()).sum::<f64>())
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// `out[ord(i), ord(j)] = a[i, j]`.
pub fn permute_sym(a: &DMatrix<f64>, ord: &VertexOrdering) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(ord.map(i), ord.map(j))] = a[(i, j)];
        }
    }
    out
}

/// Trace inner product `tr(Aᵀ B)`.
pub fn trace_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Draw from `N(mean, precision⁻¹)`.
pub fn sample_mvn_precision<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    precision: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let l = cholesky_lower(precision)?;
    let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    // Solve Lᵀ x = z so that cov(x) = (L Lᵀ)⁻¹.
    let n = mean.len();
    let mut x = DVector::zeros(n);
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(mean + x)
}

/// `log(sum(exp(xs)))` without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reports_failing_pivot() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 2.0, 1.0]);
        assert_eq!(cholesky_lower(&a), Err(Error::NotPositiveDefinite { pivot: 2 }));
    }

    #[test]
    fn inverse_round_trip() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let inv = spd_inverse(&a).unwrap();
        assert!((&a * &inv - DMatrix::identity(3, 3)).amax() < 1e-12);
        let u = cholesky_upper(&a).unwrap();
        assert!((upper_tri_inverse(&u) * &u - DMatrix::identity(3, 3)).amax() < 1e-12);
        let ld = log_det_spd(&a).unwrap();
        assert!((ld - a.determinant().ln()).abs() < 1e-12);
    }

    #[test]
    fn permute_then_inverse_permute() {
        let a = DMatrix::from_fn(4, 4, |i, j| (i * 4 + j) as f64);
        let ord = VertexOrdering::from_perm(vec![2, 0, 3, 1]).unwrap();
        let b = permute_sym(&a, &ord);
        assert_eq!(b[(2, 0)], a[(0, 1)]);
        assert_eq!(permute_sym(&b, &ord.inverse()), a);
    }
}
