//! Points of the upper half-plane and integer 2×2 matrices acting on them.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A complex number with strictly positive imaginary part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReIm", into = "ReIm")]
pub struct UpperHalfPoint(Complex64);

impl UpperHalfPoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        Self::try_from(Complex64::new(re, im))
    }

    pub fn re(self) -> f64 {
        self.0.re
    }

    pub fn im(self) -> f64 {
        self.0.im
    }

    pub fn z(self) -> Complex64 {
        self.0
    }

    pub fn conj(self) -> Complex64 {
        self.0.conj()
    }

    /// `z + t` for real `t`.
    pub fn translate(self, t: f64) -> Self {
        Self(self.0 + t)
    }

    /// Adds a small complex offset, as used by finite differences.
    pub fn offset(self, dz: Complex64) -> Result<Self> {
        Self::try_from(self.0 + dz)
    }

    /// Möbius action of a matrix with positive determinant.
    pub fn act(self, g: &IntMatrix2) -> Self {
        let z = self.0;
        let w = (z * g.a as f64 + g.b as f64) / (z * g.c as f64 + g.d as f64);
        Self(w)
    }

    /// Reduces into the standard fundamental domain `|Re w| <= 1/2`, `|w| >= 1`.
    ///
    /// Returns `(w, g)` with `w = g·z` and `g ∈ SL2(Z)`.
    pub fn reduce(self) -> (Self, IntMatrix2) {
        let mut g = IntMatrix2::IDENTITY;
        let mut w = self.0;
        for _ in 0..10_000 {
            let shift = (w.re + 0.5).floor();
            if shift != 0.0 {
                w -= shift;
                g = IntMatrix2::new(1, -(shift as i64), 0, 1).compose(&g);
            }
            if w.norm_sqr() < 1.0 - 1e-15 {
                w = -w.inv();
                g = IntMatrix2::S.compose(&g);
            } else {
                break;
            }
        }
        (Self(w), g)
    }
}

impl TryFrom<Complex64> for UpperHalfPoint {
    type Error = Error;

    fn try_from(z: Complex64) -> Result<Self> {
        if z.im > 0.0 && z.is_finite() {
            Ok(Self(z))
        } else {
            Err(Error::InvalidArgument(format!(
                "{z} is not in the upper half-plane"
            )))
        }
    }
}

/// Serialized form of a complex number: `{"re": .., "im": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReIm {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ReIm {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<ReIm> for Complex64 {
    fn from(z: ReIm) -> Self {
        Complex64::new(z.re, z.im)
    }
}

impl TryFrom<ReIm> for UpperHalfPoint {
    type Error = Error;

    fn try_from(z: ReIm) -> Result<Self> {
        Self::try_from(Complex64::from(z))
    }
}

impl From<UpperHalfPoint> for ReIm {
    fn from(p: UpperHalfPoint) -> Self {
        p.0.into()
    }
}

impl From<UpperHalfPoint> for Complex64 {
    fn from(p: UpperHalfPoint) -> Self {
        p.0
    }
}

impl fmt::Display for UpperHalfPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:+}i", self.0.re, self.0.im)
    }
}

/// Integer matrix `(a b; c d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntMatrix2 {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl IntMatrix2 {
    pub const IDENTITY: Self = Self::new(1, 0, 0, 1);
    /// `z ↦ z + 1`.
    pub const T: Self = Self::new(1, 1, 0, 1);
    /// `z ↦ -1/z`.
    pub const S: Self = Self::new(0, -1, 1, 0);

    pub const fn new(a: i64, b: i64, c: i64, d: i64) -> Self {
        Self { a, b, c, d }
    }

    pub fn det(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.a, -self.b, -self.c, -self.d)
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self::new(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )
    }

    /// `max(|a|, |b|, |c|, |d|)`.
    pub fn height(&self) -> i64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    /// The automorphy factor `cz + d`.
    pub fn j_factor(&self, z: Complex64) -> Complex64 {
        z * self.c as f64 + self.d as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_lower_half_plane() {
        assert!(UpperHalfPoint::new(0.0, 0.0).is_err());
        assert!(UpperHalfPoint::new(1.0, -1.0).is_err());
        assert!(UpperHalfPoint::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn reduction_lands_in_fundamental_domain() {
        for &(x, y) in &[(0.3, 0.05), (-7.2, 0.01), (0.49, 0.9), (0.1, 1.2)] {
            let z = UpperHalfPoint::new(x, y).unwrap();
            let (w, g) = z.reduce();
            assert_eq!(g.det(), 1);
            assert!(w.re().abs() <= 0.5 + 1e-12);
            assert!(w.z().norm() >= 1.0 - 1e-12);
            let back = z.act(&g);
            assert!((back.z() - w.z()).norm() < 1e-9 * w.z().norm());
        }
    }

    #[test]
    fn s_and_t_act_as_expected() {
        let z = UpperHalfPoint::new(0.2, 1.3).unwrap();
        assert!((z.act(&IntMatrix2::T).z() - (z.z() + 1.0)).norm() < 1e-15);
        assert!((z.act(&IntMatrix2::S).z() + z.z().inv()).norm() < 1e-15);
    }
}
