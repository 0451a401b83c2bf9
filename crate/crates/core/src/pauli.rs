//! Pauli algebra on C².
//!
//! `σ·v` for a real vector has eigenvalues ±|v|; this identity is the
//! backbone of every closed-form spectrum used in the tests.

use nalgebra::{Matrix2, Vector3};
use num_complex::Complex64;

pub type C64 = Complex64;

pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn sigma1() -> Matrix2<C64> {
    Matrix2::new(C64::new(0.0, 0.0), ONE, ONE, C64::new(0.0, 0.0))
}

pub fn sigma2() -> Matrix2<C64> {
    Matrix2::new(C64::new(0.0, 0.0), -I, I, C64::new(0.0, 0.0))
}

pub fn sigma3() -> Matrix2<C64> {
    Matrix2::new(ONE, C64::new(0.0, 0.0), C64::new(0.0, 0.0), -ONE)
}

/// σ·v for real components: [[v3, v1 - i v2], [v1 + i v2, -v3]].
pub fn sigma_dot(v: &Vector3<f64>) -> Matrix2<C64> {
    let v1 = C64::new(v[0], 0.0);
    let v2 = C64::new(v[1], 0.0);
    let v3 = C64::new(v[2], 0.0);
    Matrix2::new(v3, v1 - I * v2, v1 + I * v2, -v3)
}

/// σ·c for complex coefficients (no conjugation; c·σ means Σ cᵢ σᵢ).
pub fn sigma_dot_c(c: &[C64; 3]) -> Matrix2<C64> {
    Matrix2::new(c[2], c[0] - I * c[1], c[0] + I * c[1], -c[2])
}

/// Determinant of a 2×2 complex matrix.
pub fn det2(m: &Matrix2<C64>) -> C64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

/// Singular values of a 2×2 complex matrix in closed form, (max, min).
pub fn singular_values2(m: &Matrix2<C64>) -> (f64, f64) {
    // eigenvalues of A†A: t/2 ± sqrt(t²/4 - |det|²)
    let t = m.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let d = det2(m).norm_sqr();
    let disc = (t * t / 4.0 - d).max(0.0).sqrt();
    let hi = (t / 2.0 + disc).max(0.0).sqrt();
    let lo = (t / 2.0 - disc).max(0.0).sqrt();
    (hi, lo)
}

/// Operator 2-norm of a 2×2 complex matrix.
pub fn opnorm2(m: &Matrix2<C64>) -> f64 {
    singular_values2(m).0
}

/// Largest entrywise deviation from Hermiticity, max |M - M†|.
pub fn herm_defect(m: &Matrix2<C64>) -> f64 {
    let a = m.adjoint();
    (m - a).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian 2×2 matrix, ascending.
pub fn eig2_hermitian(m: &Matrix2<C64>) -> (f64, f64) {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b2 = m[(0, 1)].norm_sqr();
    let mid = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b2).sqrt();
    (mid - disc, mid + disc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    #[test]
    fn sigma_dot_eigenvalues_are_plus_minus_norm() {
        let v = Vector3::new(3.0, 4.0, 0.0);
        let (lo, hi) = eig2_hermitian(&sigma_dot(&v));
        assert_relative_eq!(lo, -5.0, epsilon = 1e-14);
        assert_relative_eq!(hi, 5.0, epsilon = 1e-14);
    }

    #[test]
    fn sigma_dot_matches_component_sum() {
        let v = Vector3::new(0.3, -1.1, 0.7);
        let direct = sigma_dot(&v);
        let summed = sigma1() * C64::new(v[0], 0.0)
            + sigma2() * C64::new(v[1], 0.0)
            + sigma3() * C64::new(v[2], 0.0);
        assert!((direct - summed).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn singular_values_match_eigenvalues_for_hermitian() {
        let m = sigma_dot(&Vector3::new(1.0, 2.0, -2.0));
        let (hi, lo) = singular_values2(&m);
        assert_relative_eq!(hi, 3.0, epsilon = 1e-12);
        assert_relative_eq!(lo, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn sigma_traceless_and_hermitian() {
        for s in [sigma1(), sigma2(), sigma3()] {
            assert_eq!(herm_defect(&s), 0.0);
            assert_eq!((s[(0, 0)] + s[(1, 1)]).norm(), 0.0);
        }
    }
}
