//! Small helpers for complex 3-vectors.

use num_complex::Complex64;

pub type C3 = [Complex64; 3];

pub const ZERO: C3 = [Complex64::new(0.0, 0.0); 3];

#[inline]
pub fn add(a: &C3, b: &C3) -> C3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &C3, b: &C3) -> C3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: &C3, s: Complex64) -> C3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn scale_re(a: &C3, s: f64) -> C3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Bilinear dot product (no conjugation).
#[inline]
pub fn dot(a: &C3, b: &C3) -> Complex64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Hermitian product `(a, b) = Σ a_i conj(b_i)`.
#[inline]
pub fn hdot(a: &C3, b: &C3) -> Complex64 {
    a[0] * b[0].conj() + a[1] * b[1].conj() + a[2] * b[2].conj()
}

#[inline]
pub fn dot_re(a: &C3, k: &[f64; 3]) -> Complex64 {
    a[0] * k[0] + a[1] * k[1] + a[2] * k[2]
}

#[inline]
pub fn cross(a: &C3, b: &C3) -> C3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn conj(a: &C3) -> C3 {
    [a[0].conj(), a[1].conj(), a[2].conj()]
}

#[inline]
pub fn norm_sq(a: &C3) -> f64 {
    a[0].norm_sqr() + a[1].norm_sqr() + a[2].norm_sqr()
}

#[inline]
pub fn from_re(v: [f64; 3]) -> C3 {
    [
        Complex64::new(v[0], 0.0),
        Complex64::new(v[1], 0.0),
        Complex64::new(v[2], 0.0),
    ]
}
