//! Dimensional bookkeeping over the three scale spaces: time `T`, length `L`
//! and mass `M`.
//!
//! A [`Dim`] carries exact rational exponents, so products, quotients and
//! rational powers of dimensions never drift. A [`Quantity`] pairs a real
//! value (in the single coherent unit system used across the crate) with its
//! dimension; additive operations and comparisons refuse to mix dimensions.
//!
//! Pattern-space vectors are dimensionless in themselves; lengths appear
//! through the metric, which carries `L²`. Hence displacements have
//! [`Dim::NONE`], velocities `T⁻¹`, and angular velocities `T⁻¹L⁻¹`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Div, Mul, Neg};

use num_rational::Rational32;

use crate::error::{Error, Result};

/// Rational exponents of `T`, `L`, `M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dim {
    pub t: Rational32,
    pub l: Rational32,
    pub m: Rational32,
}

const fn r(n: i32) -> Rational32 {
    Rational32::new_raw(n, 1)
}

const fn dim(t: i32, l: i32, m: i32) -> Dim {
    Dim {
        t: r(t),
        l: r(l),
        m: r(m),
    }
}

impl Dim {
    pub const NONE: Dim = dim(0, 0, 0);
    pub const TIME: Dim = dim(1, 0, 0);
    pub const LENGTH: Dim = dim(0, 1, 0);
    pub const MASS: Dim = dim(0, 0, 1);
    /// Velocity of a pattern vector, `T⁻¹`.
    pub const VELOCITY: Dim = dim(-1, 0, 0);
    /// Acceleration of a pattern vector, `T⁻²`.
    pub const ACCELERATION: Dim = dim(-2, 0, 0);
    /// Angular velocity, `T⁻¹ ⊗ 𝕍_ang = T⁻¹L⁻¹`.
    pub const ANGULAR_VELOCITY: Dim = dim(-1, -1, 0);
    pub const ANGULAR_ACCELERATION: Dim = dim(-2, -1, 0);
    /// Forces, energies and powers-times-time share `T⁻²L²M`.
    pub const FORCE: Dim = dim(-2, 2, 1);
    pub const ENERGY: Dim = dim(-2, 2, 1);
    pub const MOMENTUM: Dim = dim(-1, 2, 1);
    pub const ANGULAR_MOMENTUM: Dim = dim(-1, 3, 1);
    /// Total momentum of a force (torque), `T⁻²L³M`.
    pub const TORQUE: Dim = dim(-2, 3, 1);
    pub const AREA: Dim = dim(0, 2, 0);
    /// Dimension of the inertia operators `σ̂`, `Σ̂`.
    pub const INERTIA: Dim = dim(0, 2, 0);
    /// Dimension of principal inertia momenta `m₀λ`.
    pub const MOMENT_OF_INERTIA: Dim = dim(0, 2, 1);

    pub fn new(t: Rational32, l: Rational32, m: Rational32) -> Self {
        Dim { t, l, m }
    }

    pub fn from_ints(t: i32, l: i32, m: i32) -> Self {
        dim(t, l, m)
    }

    pub fn is_dimensionless(&self) -> bool {
        *self == Dim::NONE
    }

    /// Dimension of a product of quantities.
    pub fn mul(self, other: Dim) -> Dim {
        Dim {
            t: self.t + other.t,
            l: self.l + other.l,
            m: self.m + other.m,
        }
    }

    pub fn div(self, other: Dim) -> Dim {
        self.mul(other.recip())
    }

    pub fn recip(self) -> Dim {
        self.pow(r(-1))
    }

    pub fn pow(self, p: Rational32) -> Dim {
        Dim {
            t: self.t * p,
            l: self.l * p,
            m: self.m * p,
        }
    }

    /// `Ok(())` when `self == expected`, otherwise a mismatch naming `context`.
    pub fn expect(self, expected: Dim, context: &'static str) -> Result<()> {
        if self == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                context,
                expected,
                found: self,
            })
        }
    }
}

/// Componentwise sum of exponents.
pub fn dim_mul(a: Dim, b: Dim) -> Dim {
    a.mul(b)
}

/// Componentwise scaling of exponents.
pub fn dim_pow(a: Dim, p: Rational32) -> Dim {
    a.pow(p)
}

impl Mul for Dim {
    type Output = Dim;
    fn mul(self, rhs: Dim) -> Dim {
        Dim::mul(self, rhs)
    }
}

impl Div for Dim {
    type Output = Dim;
    fn div(self, rhs: Dim) -> Dim {
        Dim::div(self, rhs)
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_dimensionless() {
            return f.write_str("1");
        }
        let mut first = true;
        for (sym, e) in [("T", self.t), ("L", self.l), ("M", self.m)] {
            if e == r(0) {
                continue;
            }
            if !first {
                f.write_str("·")?;
            }
            first = false;
            if e == r(1) {
                f.write_str(sym)?;
            } else {
                write!(f, "{sym}^{e}")?;
            }
        }
        Ok(())
    }
}

/// A real value tagged with its dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub dim: Dim,
}

impl Quantity {
    pub fn new(value: f64, dim: Dim) -> Self {
        Quantity { value, dim }
    }

    pub fn dimensionless(value: f64) -> Self {
        Quantity::new(value, Dim::NONE)
    }

    pub fn zero(dim: Dim) -> Self {
        Quantity::new(0.0, dim)
    }

    pub fn try_add(self, other: Quantity) -> Result<Quantity> {
        other.dim.expect(self.dim, "quantity addition")?;
        Ok(Quantity::new(self.value + other.value, self.dim))
    }

    pub fn try_sub(self, other: Quantity) -> Result<Quantity> {
        other.dim.expect(self.dim, "quantity subtraction")?;
        Ok(Quantity::new(self.value - other.value, self.dim))
    }

    pub fn try_cmp(self, other: Quantity) -> Result<Option<Ordering>> {
        other.dim.expect(self.dim, "quantity comparison")?;
        Ok(self.value.partial_cmp(&other.value))
    }

    pub fn powi(self, p: i32) -> Quantity {
        Quantity::new(self.value.powi(p), self.dim.pow(r(p)))
    }

    pub fn sqrt(self) -> Quantity {
        Quantity::new(self.value.sqrt(), self.dim.pow(Rational32::new(1, 2)))
    }

    /// The value, provided the dimension is `dim`.
    pub fn value_in(self, dim: Dim, context: &'static str) -> Result<f64> {
        self.dim.expect(dim, context)?;
        Ok(self.value)
    }
}

/// Dimension-checked addition.
pub fn qty_add(a: Quantity, b: Quantity) -> Result<Quantity> {
    a.try_add(b)
}

impl Mul for Quantity {
    type Output = Quantity;
    fn mul(self, rhs: Quantity) -> Quantity {
        Quantity::new(self.value * rhs.value, self.dim * rhs.dim)
    }
}

impl Div for Quantity {
    type Output = Quantity;
    fn div(self, rhs: Quantity) -> Quantity {
        Quantity::new(self.value / rhs.value, self.dim / rhs.dim)
    }
}

impl Mul<f64> for Quantity {
    type Output = Quantity;
    fn mul(self, rhs: f64) -> Quantity {
        Quantity::new(self.value * rhs, self.dim)
    }
}

impl Neg for Quantity {
    type Output = Quantity;
    fn neg(self) -> Quantity {
        Quantity::new(-self.value, self.dim)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]", self.value, self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i32, d: i32) -> Rational32 {
        Rational32::new(n, d)
    }

    #[test]
    fn inverse_pair_is_dimensionless() {
        assert_eq!(dim_mul(Dim::TIME, Dim::TIME.recip()), Dim::NONE);
    }

    #[test]
    fn energy_dimension() {
        let l2m = Dim::from_ints(0, 2, 1);
        let t_2 = Dim::from_ints(-2, 0, 0);
        assert_eq!(dim_mul(l2m, t_2), Dim::ENERGY);
        assert_eq!(Dim::ENERGY.to_string(), "T^-2·L^2·M");
    }

    #[test]
    fn half_lengths_close() {
        let half = Dim::new(q(0, 1), q(1, 2), q(0, 1));
        assert_eq!(dim_mul(half, half), Dim::LENGTH);
    }

    #[test]
    fn pow_examples() {
        assert_eq!(dim_pow(Dim::AREA, q(1, 2)), Dim::LENGTH);
        assert_eq!(dim_pow(Dim::VELOCITY, q(2, 1)), Dim::from_ints(-2, 0, 0));
        assert_eq!(dim_pow(Dim::NONE, q(7, 3)), Dim::NONE);
    }

    #[test]
    fn add_examples() {
        let a = Quantity::new(3.0, Dim::LENGTH);
        let b = Quantity::new(4.0, Dim::LENGTH);
        assert_eq!(qty_add(a, b).unwrap(), Quantity::new(7.0, Dim::LENGTH));
        let z = Quantity::zero(Dim::MASS);
        assert_eq!(
            qty_add(z, Quantity::new(2.5, Dim::MASS)).unwrap(),
            Quantity::new(2.5, Dim::MASS)
        );
        let err = qty_add(Quantity::new(1.0, Dim::LENGTH), Quantity::new(1.0, Dim::TIME));
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn comparison_needs_equal_dims() {
        let a = Quantity::new(1.0, Dim::MASS);
        assert_eq!(
            a.try_cmp(Quantity::new(2.0, Dim::MASS)).unwrap(),
            Some(Ordering::Less)
        );
        assert!(a.try_cmp(Quantity::new(2.0, Dim::LENGTH)).is_err());
    }

    fn arb_dim() -> impl Strategy<Value = Dim> {
        let e = (-6i32..=6, 1i32..=4).prop_map(|(n, d)| Rational32::new(n, d));
        (e.clone(), e.clone(), e).prop_map(|(t, l, m)| Dim::new(t, l, m))
    }

    proptest! {
        #[test]
        fn dim_group_laws(a in arb_dim(), b in arb_dim(), c in arb_dim()) {
            prop_assert_eq!(dim_mul(dim_mul(a, b), c), dim_mul(a, dim_mul(b, c)));
            prop_assert_eq!(dim_mul(a, b), dim_mul(b, a));
            prop_assert_eq!(dim_mul(a, dim_pow(a, q(-1, 1))), Dim::NONE);
            prop_assert_eq!(dim_mul(a, Dim::NONE), a);
        }
    }
}
