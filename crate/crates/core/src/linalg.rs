//! Small dense complex matrices stored row-major in slices.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub(crate) type C = Complex64;

pub(crate) fn to_matrix(m: &[C], size: usize) -> DMatrix<C> {
    DMatrix::from_row_slice(size, size, m)
}

pub(crate) fn from_matrix(m: &DMatrix<C>) -> Vec<C> {
    let size = m.nrows();
    let mut out = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub(crate) fn identity(size: usize) -> Vec<C> {
    let mut out = vec![C::new(0.0, 0.0); size * size];
    for i in 0..size {
        out[i * size + i] = C::new(1.0, 0.0);
    }
    out
}

pub(crate) fn matmul(a: &[C], b: &[C], size: usize) -> Vec<C> {
    let mut out = vec![C::new(0.0, 0.0); size * size];
    for i in 0..size {
        for k in 0..size {
            let aik = a[i * size + k];
            for j in 0..size {
                out[i * size + j] += aik * b[k * size + j];
            }
        }
    }
    out
}

pub(crate) fn matvec(a: &[C], v: &[C], size: usize) -> Vec<C> {
    (0..size).map(|i| (0..size).map(|j| a[i * size + j] * v[j]).sum()).collect()
}

pub(crate) fn adjoint(a: &[C], size: usize) -> Vec<C> {
    let mut out = vec![C::new(0.0, 0.0); size * size];
    for i in 0..size {
        for j in 0..size {
            out[j * size + i] = a[i * size + j].conj();
        }
    }
    out
}

pub(crate) fn transpose(a: &[C], size: usize) -> Vec<C> {
    let mut out = vec![C::new(0.0, 0.0); size * size];
    for i in 0..size {
        for j in 0..size {
            out[j * size + i] = a[i * size + j];
        }
    }
    out
}

/// Frobenius norm of `a - a^H` relative to that of `a`.
pub(crate) fn hermitian_defect(a: &[C], size: usize) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..size {
        for j in 0..size {
            num += (a[i * size + j] - a[j * size + i].conj()).norm_sqr();
            den += a[i * size + j].norm_sqr();
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

pub(crate) fn symmetrize(a: &[C], size: usize) -> Vec<C> {
    let mut out = a.to_vec();
    for i in 0..size {
        for j in 0..size {
            out[i * size + j] = 0.5 * (a[i * size + j] + a[j * size + i].conj());
        }
    }
    out
}

pub(crate) fn determinant(a: &[C], size: usize) -> C {
    match size {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        _ => to_matrix(a, size).determinant(),
    }
}

pub(crate) fn inverse(a: &[C], size: usize) -> Option<Vec<C>> {
    match size {
        1 => (a[0] != C::new(0.0, 0.0)).then(|| vec![1.0 / a[0]]),
        2 => {
            let det = determinant(a, 2);
            (det != C::new(0.0, 0.0)).then(|| vec![a[3] / det, -a[1] / det, -a[2] / det, a[0] / det])
        }
        _ => to_matrix(a, size).try_inverse().map(|m| from_matrix(&m)),
    }
}

/// Lower Cholesky factor `L` with `a = L L^H`; `None` if `a` is not
/// positive definite.
pub(crate) fn cholesky(a: &[C], size: usize) -> Option<Vec<C>> {
    let mut l = vec![C::new(0.0, 0.0); size * size];
    for i in 0..size {
        for j in 0..=i {
            let mut s = a[i * size + j];
            for k in 0..j {
                s -= l[i * size + k] * l[j * size + k].conj();
            }
            if i == j {
                if !(s.re > 0.0) || !s.re.is_finite() {
                    return None;
                }
                l[i * size + i] = C::new(s.re.sqrt(), 0.0);
            } else {
                l[i * size + j] = s / l[j * size + j].re;
            }
        }
    }
    Some(l)
}

/// Inverse of a lower-triangular matrix.
pub(crate) fn lower_inverse(l: &[C], size: usize) -> Vec<C> {
    let mut inv = vec![C::new(0.0, 0.0); size * size];
    for col in 0..size {
        for i in col..size {
            let mut s = if i == col { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) };
            for k in col..i {
                s -= l[i * size + k] * inv[k * size + col];
            }
            inv[i * size + col] = s / l[i * size + i];
        }
    }
    inv
}

/// Eigenvalues of a hermitian matrix in ascending order.
pub(crate) fn hermitian_eigenvalues(a: &[C], size: usize) -> Vec<f64> {
    match size {
        1 => vec![a[0].re],
        2 => {
            let mean = 0.5 * (a[0].re + a[3].re);
            let half = 0.5 * (a[0].re - a[3].re);
            let r = (half * half + a[1].norm_sqr()).sqrt();
            vec![mean - r, mean + r]
        }
        _ => {
            let eig = to_matrix(&symmetrize(a, size), size).symmetric_eigenvalues();
            let mut vals: Vec<f64> = eig.iter().copied().collect();
            vals.sort_by(|x, y| x.total_cmp(y));
            vals
        }
    }
}

/// Smallest eigenvalue and a unit eigenvector of a hermitian matrix.
pub(crate) fn hermitian_min_eigenpair(a: &[C], size: usize) -> (f64, Vec<C>) {
    let eig = to_matrix(&symmetrize(a, size), size).symmetric_eigen();
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, &v)| if v < best.1 { (i, v) } else { best });
    (val, eig.eigenvectors.column(idx).iter().copied().collect())
}

/// `L^{-1} M L^{-H}` for a lower-triangular inverse `linv` repeated blockwise:
/// `linv` has size `r`, `m` has size `blocks * r`.
pub(crate) fn whiten_blocks(m: &[C], linv: &[C], blocks: usize, r: usize) -> Vec<C> {
    let size = blocks * r;
    let mut big = vec![C::new(0.0, 0.0); size * size];
    for b in 0..blocks {
        for i in 0..r {
            for j in 0..r {
                big[(b * r + i) * size + b * r + j] = linv[i * r + j];
            }
        }
    }
    let tmp = matmul(&big, m, size);
    matmul(&tmp, &adjoint(&big, size), size)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = vec![c(4.0, 0.0), c(1.0, 1.0), c(1.0, -1.0), c(3.0, 0.0)];
        let l = cholesky(&a, 2).unwrap();
        let back = matmul(&l, &adjoint(&l, 2), 2);
        for (x, y) in back.iter().zip(&a) {
            assert!((x - y).norm() < 1e-14);
        }
        let li = lower_inverse(&l, 2);
        let id = matmul(&li, &l, 2);
        for (x, y) in id.iter().zip(identity(2)) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn closed_form_eigenvalues_agree_with_nalgebra() {
        let a = vec![c(2.0, 0.0), c(0.3, -0.7), c(0.3, 0.7), c(-1.0, 0.0)];
        let fast = hermitian_eigenvalues(&a, 2);
        let (slow, _) = hermitian_min_eigenpair(&a, 2);
        assert!((fast[0] - slow).abs() < 1e-13);
    }

    #[test]
    fn indefinite_matrix_has_no_cholesky() {
        let a = vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)];
        assert!(cholesky(&a, 2).is_none());
    }
}
