//! Kronecker, Khatri-Rao and a few small complex-matrix helpers.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex;

use crate::scalar::Real;

/// Kronecker product of two vectors: `out[i * b.len() + j] = a[i] * b[j]`.
pub fn kron_vec<T: Real>(a: ArrayView1<Complex<T>>, b: ArrayView1<Complex<T>>) -> Array1<Complex<T>> {
    let nb = b.len();
    Array1::from_shape_fn(a.len() * nb, |k| a[k / nb] * b[k % nb])
}

/// Kronecker product of two matrices.
pub fn kron<T: Real>(a: ArrayView2<Complex<T>>, b: ArrayView2<Complex<T>>) -> Array2<Complex<T>> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}

/// Column-wise Kronecker (Khatri-Rao) product `A ∘ B`.
///
/// Column `k` of the result is `a[:, k] ⊗ b[:, k]`, so both inputs need the
/// same number of columns.
pub fn khatri_rao<T: Real>(a: ArrayView2<Complex<T>>, b: ArrayView2<Complex<T>>) -> Array2<Complex<T>> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    assert_eq!(ac, bc, "khatri_rao: column counts differ");
    Array2::from_shape_fn((ar * br, ac), |(i, k)| a[[i / br, k]] * b[[i % br, k]])
}

/// Column-major vectorization.
pub fn vec_col_major<T: Real>(m: ArrayView2<Complex<T>>) -> Array1<Complex<T>> {
    let (r, c) = m.dim();
    Array1::from_shape_fn(r * c, |k| m[[k % r, k / r]])
}

/// `a b^H`.
pub fn outer_h<T: Real>(a: ArrayView1<Complex<T>>, b: ArrayView1<Complex<T>>) -> Array2<Complex<T>> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j].conj())
}

/// `a^H b`.
pub fn inner_h<T: Real>(a: ArrayView1<Complex<T>>, b: ArrayView1<Complex<T>>) -> Complex<T> {
    a.iter()
        .zip(b.iter())
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

/// Matrix with `d` on the diagonal.
pub fn diag<T: Real>(d: ArrayView1<Complex<T>>) -> Array2<Complex<T>> {
    let n = d.len();
    let mut m = Array2::from_elem((n, n), Complex::new(T::zero(), T::zero()));
    for i in 0..n {
        m[[i, i]] = d[i];
    }
    m
}

pub fn conj_transpose<T: Real>(m: ArrayView2<Complex<T>>) -> Array2<Complex<T>> {
    m.t().mapv(|z| z.conj())
}

/// Largest singular value squared of `a`, by power iteration on `a^H a`.
pub fn spectral_norm_sq<T: Real>(a: ArrayView2<Complex<T>>) -> T {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return T::zero();
    }
    let gram = conj_transpose(a).dot(&a);
    // Deterministic, non-degenerate start.
    let mut v = Array1::from_shape_fn(n, |k| Complex::new(T::one(), T::lit(0.1) * T::from_usize_lossy(k)));
    let mut lambda = T::zero();
    for _ in 0..500 {
        let w = gram.dot(&v);
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if norm == T::zero() {
            return T::zero();
        }
        let next = norm / v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        v = w.mapv(|z| z / norm);
        if (next - lambda).abs() <= T::epsilon() * T::lit(16.0) * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda
}

/// Max absolute entrywise difference.
pub fn max_abs_diff<T: Real>(a: ArrayView2<Complex<T>>, b: ArrayView2<Complex<T>>) -> T {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(T::zero(), T::max)
}

/// Frobenius norm.
pub fn fro_norm<T: Real>(a: ArrayView2<Complex<T>>) -> T {
    a.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}
