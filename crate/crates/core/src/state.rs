//! The pair `U = (u, b)` of velocity and magnetic fields.

use std::ops::{Add, Sub};
use std::sync::Arc;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::field::SpectralVectorField;
use crate::lattice::Lattice;

#[derive(Clone, Debug)]
pub struct StateU {
    pub u: SpectralVectorField,
    pub b: SpectralVectorField,
}

impl StateU {
    pub fn new(u: SpectralVectorField, b: SpectralVectorField) -> Result<Self> {
        u.lattice().check_same(b.lattice())?;
        Ok(StateU { u, b })
    }

    pub fn zeros(lattice: &Arc<Lattice>) -> Self {
        StateU {
            u: SpectralVectorField::zeros(lattice),
            b: SpectralVectorField::zeros(lattice),
        }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        self.u.lattice()
    }

    pub fn norm_l2_sq(&self) -> f64 {
        self.u.norm_l2_sq() + self.b.norm_l2_sq()
    }

    pub fn sobolev_sq(&self, s: f64) -> f64 {
        self.u.sobolev_sq(s) + self.b.sobolev_sq(s)
    }

    pub fn inner_l2(&self, other: &StateU) -> f64 {
        self.u.inner_l2(&other.u) + self.b.inner_l2(&other.b)
    }

    pub fn scaled(&self, a: f64) -> StateU {
        StateU {
            u: self.u.scaled(a),
            b: self.b.scaled(a),
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &StateU) {
        self.u.axpy(a, &other.u);
        self.b.axpy(a, &other.b);
    }

    pub fn max_abs_diff(&self, other: &StateU) -> f64 {
        self.u
            .max_abs_diff(&other.u)
            .max(self.b.max_abs_diff(&other.b))
    }

    pub fn is_finite(&self) -> bool {
        self.u
            .coeffs()
            .iter()
            .chain(self.b.coeffs())
            .all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    pub fn is_divergence_free(&self, rel_tol: f64) -> bool {
        self.u.is_divergence_free(rel_tol) && self.b.is_divergence_free(rel_tol)
    }

    pub fn to_snapshot(&self) -> Value {
        json!({ "u": self.u.to_snapshot(), "b": self.b.to_snapshot() })
    }

    pub fn from_snapshot(value: &Value) -> Result<Self> {
        let part = |key: &str| {
            value
                .get(key)
                .ok_or_else(|| Error::Snapshot(format!("missing field `{key}`")))
                .and_then(SpectralVectorField::from_snapshot)
        };
        StateU::new(part("u")?, part("b")?)
    }
}

impl Add<&StateU> for &StateU {
    type Output = StateU;
    fn add(self, rhs: &StateU) -> StateU {
        StateU {
            u: &self.u + &rhs.u,
            b: &self.b + &rhs.b,
        }
    }
}

impl Sub<&StateU> for &StateU {
    type Output = StateU;
    fn sub(self, rhs: &StateU) -> StateU {
        StateU {
            u: &self.u - &rhs.u,
            b: &self.b - &rhs.b,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::random_divfree;
    use crate::lattice::make_lattice;

    #[test]
    fn lattice_mismatch_rejected() {
        let a = make_lattice(2).unwrap();
        let b = make_lattice(3).unwrap();
        let r = StateU::new(
            SpectralVectorField::zeros(&a),
            SpectralVectorField::zeros(&b),
        );
        assert!(matches!(r, Err(Error::LatticeMismatch { .. })));
    }

    #[test]
    fn snapshot_round_trip() {
        let l = make_lattice(3).unwrap();
        let s = StateU::new(random_divfree(1, &l, 1.0), random_divfree(2, &l, 1.0)).unwrap();
        let back = StateU::from_snapshot(&s.to_snapshot()).unwrap();
        assert_eq!(back.max_abs_diff(&s), 0.0);
    }
}
