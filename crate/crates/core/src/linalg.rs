//! Small dense complex linear-algebra helpers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::Real;

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

/// Spectral (operator 2-) norm.
pub fn op_norm<T: Real>(m: &CMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.singular_values().iter().copied().fold(T::zero(), |a, b| a.max(b))
}

/// Largest entry modulus.
pub fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().map(|z| crate::cabs(*z)).fold(T::zero(), |a, b| a.max(b))
}

/// `max |M - M^dagger|` entrywise.
pub fn hermiticity_residual<T: Real>(m: &CMatrix<T>) -> T {
    let n = m.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            worst = worst.max(crate::cabs(m[(i, j)] - m[(j, i)].conj()));
        }
    }
    worst
}

/// `<a, b> = sum conj(a_i) b_i`.
pub fn inner<T: Real>(a: &CVector<T>, b: &CVector<T>) -> Complex<T> {
    a.iter().zip(b.iter()).fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

pub fn vec_norm<T: Real>(a: &CVector<T>) -> T {
    a.iter().map(|z| z.norm_sqr()).fold(T::zero(), |x, y| x + y).sqrt()
}

pub fn outer<T: Real>(a: &CVector<T>, b: &CVector<T>) -> CMatrix<T> {
    a * b.adjoint()
}

pub fn commutator<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a * b - b * a
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending and the
/// eigenvectors in the matching columns.
pub fn hermitian_eigen<T: Real>(m: &CMatrix<T>) -> (Vec<T>, CMatrix<T>) {
    let eig = m.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::<T>::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Phase that rotates `b` onto `a` (maximal real overlap), i.e. the unit
/// complex number `w` minimising `|a - w b|`.
pub fn align_phase<T: Real>(a: &CVector<T>, b: &CVector<T>) -> Complex<T> {
    let ov = inner(b, a);
    let r = crate::cabs(ov);
    if r == T::zero() {
        Complex::new(T::one(), T::zero())
    } else {
        ov / r
    }
}
