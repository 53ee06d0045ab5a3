//! The oriented Euclidean pattern space: vectors, covectors, points,
//! linear operators, the scaled metric `g ∈ L² ⊗ 𝕊* ⊗ 𝕊*`, its flat/sharp
//! isomorphisms, cross products and the Hodge identification of
//! antisymmetric operators with vectors.
//!
//! A fixed oriented orthonormal basis is used throughout, so `g` is the
//! identity matrix scaled by `L²`.

use std::fmt;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};

use crate::error::{Error, Result};
use crate::units::{Dim, Quantity};

/// Relative tolerance for the antisymmetry check in [`hodge_to_vec`].
pub const ANTISYMMETRY_TOL: f64 = 1e-12;

/// A vector of `𝕊` scaled by `dim`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec3 {
    pub v: Vector3<f64>,
    pub dim: Dim,
}

/// A covector of `𝕊*` scaled by `dim`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Covec3 {
    pub a: Vector3<f64>,
    pub dim: Dim,
}

/// A point of the affine pattern space; differences are dimensionless
/// vectors of `𝕊`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point3 {
    pub p: Vector3<f64>,
}

/// An element of `dim ⊗ 𝕊* ⊗ 𝕊`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinOp3 {
    pub m: Matrix3<f64>,
    pub dim: Dim,
}

impl Vec3 {
    pub fn new(x: f64, y: f64, z: f64, dim: Dim) -> Self {
        Vec3 {
            v: Vector3::new(x, y, z),
            dim,
        }
    }

    pub fn from_raw(v: Vector3<f64>, dim: Dim) -> Self {
        Vec3 { v, dim }
    }

    pub fn zero(dim: Dim) -> Self {
        Vec3::from_raw(Vector3::zeros(), dim)
    }

    /// Basis vector `e_{k+1}`, dimensionless.
    pub fn basis(k: usize) -> Self {
        let mut v = Vector3::zeros();
        v[k] = 1.0;
        Vec3::from_raw(v, Dim::NONE)
    }

    pub fn try_add(self, o: Vec3) -> Result<Vec3> {
        o.dim.expect(self.dim, "vector addition")?;
        Ok(Vec3::from_raw(self.v + o.v, self.dim))
    }

    pub fn try_sub(self, o: Vec3) -> Result<Vec3> {
        o.dim.expect(self.dim, "vector subtraction")?;
        Ok(Vec3::from_raw(self.v - o.v, self.dim))
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::from_raw(self.v * s, self.dim)
    }

    pub fn scale_by(self, q: Quantity) -> Vec3 {
        Vec3::from_raw(self.v * q.value, self.dim * q.dim)
    }

    /// Metric norm `√g(v, v)`, with dimension `L · dim`.
    pub fn norm(self) -> Quantity {
        metric(self, self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().all(|x| x.is_finite())
    }
}

impl Covec3 {
    pub fn new(x: f64, y: f64, z: f64, dim: Dim) -> Self {
        Covec3 {
            a: Vector3::new(x, y, z),
            dim,
        }
    }

    pub fn from_raw(a: Vector3<f64>, dim: Dim) -> Self {
        Covec3 { a, dim }
    }

    pub fn zero(dim: Dim) -> Self {
        Covec3::from_raw(Vector3::zeros(), dim)
    }

    pub fn try_add(self, o: Covec3) -> Result<Covec3> {
        o.dim.expect(self.dim, "covector addition")?;
        Ok(Covec3::from_raw(self.a + o.a, self.dim))
    }

    pub fn try_sub(self, o: Covec3) -> Result<Covec3> {
        o.dim.expect(self.dim, "covector subtraction")?;
        Ok(Covec3::from_raw(self.a - o.a, self.dim))
    }

    pub fn scale(self, s: f64) -> Covec3 {
        Covec3::from_raw(self.a * s, self.dim)
    }

    pub fn scale_by(self, q: Quantity) -> Covec3 {
        Covec3::from_raw(self.a * q.value, self.dim * q.dim)
    }

    /// Natural pairing `⟨α, v⟩`.
    pub fn pair(self, v: Vec3) -> Quantity {
        Quantity::new(self.a.dot(&v.v), self.dim * v.dim)
    }
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 {
            p: Vector3::new(x, y, z),
        }
    }

    pub fn origin() -> Self {
        Point3 { p: Vector3::zeros() }
    }

    pub fn from_raw(p: Vector3<f64>) -> Self {
        Point3 { p }
    }

    /// `self − other ∈ 𝕊`.
    pub fn minus(self, other: Point3) -> Vec3 {
        Vec3::from_raw(self.p - other.p, Dim::NONE)
    }

    /// Translate by a dimensionless vector.
    pub fn plus(self, d: Vec3) -> Result<Point3> {
        d.dim.expect(Dim::NONE, "point translation")?;
        Ok(Point3 { p: self.p + d.v })
    }
}

impl LinOp3 {
    pub fn from_raw(m: Matrix3<f64>, dim: Dim) -> Self {
        LinOp3 { m, dim }
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        Vec3::from_raw(self.m * v.v, self.dim * v.dim)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.m.norm().max(f64::MIN_POSITIVE);
        (self.m - self.m.transpose()).norm() <= tol * scale
    }
}

/// `g(u, v)`, with dimension `L² · u.dim · v.dim`.
pub fn metric(u: Vec3, v: Vec3) -> Quantity {
    Quantity::new(u.v.dot(&v.v), Dim::AREA * u.dim * v.dim)
}

/// `g♭ : 𝕊 → L² ⊗ 𝕊*`.
pub fn flat(v: Vec3) -> Covec3 {
    Covec3::from_raw(v.v, v.dim * Dim::AREA)
}

/// `g♯ : 𝕊* → L⁻² ⊗ 𝕊`.
pub fn sharp(a: Covec3) -> Vec3 {
    Vec3::from_raw(a.a, a.dim / Dim::AREA)
}

/// Right-handed cross product `𝕊 × 𝕊 → L ⊗ 𝕊`.
pub fn cross(u: Vec3, v: Vec3) -> Vec3 {
    Vec3::from_raw(u.v.cross(&v.v), u.dim * v.dim * Dim::LENGTH)
}

/// Cross product of covectors, `g♭(g♯α × g♯β)`.
pub fn covec_cross(a: Covec3, b: Covec3) -> Covec3 {
    flat(cross(sharp(a), sharp(b)))
}

/// The antisymmetric operator `r ↦ Ω × r`.
pub fn vec_to_hodge(omega: Vec3) -> LinOp3 {
    LinOp3::from_raw(omega.v.cross_matrix(), omega.dim * Dim::LENGTH)
}

/// Inverse of [`vec_to_hodge`] on antisymmetric operators.
pub fn hodge_to_vec(w: LinOp3) -> Result<Vec3> {
    let scale = w.m.norm();
    let defect = (w.m + w.m.transpose()).norm();
    if defect > ANTISYMMETRY_TOL * scale {
        return Err(Error::NotAntisymmetric {
            defect: if scale > 0.0 { defect / scale } else { defect },
        });
    }
    let a = 0.5 * (w.m - w.m.transpose());
    Ok(Vec3::from_raw(
        Vector3::new(a[(2, 1)], a[(0, 2)], a[(1, 0)]),
        w.dim / Dim::LENGTH,
    ))
}

/// A proper rotation of the pattern space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(pub Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        match Unit::try_new(axis, 1e-300) {
            Some(u) => Rotation(*Rotation3::from_axis_angle(&u, angle).matrix()),
            None => Rotation::identity(),
        }
    }

    /// Rodrigues formula for `exp(hat(θ))`.
    pub fn exp(theta: Vector3<f64>) -> Self {
        let angle = theta.norm();
        let k = theta.cross_matrix();
        if angle < 1e-8 {
            // Taylor expansion keeps the truncation below roundoff.
            let k2 = k * k;
            return Rotation(
                Matrix3::identity() + k * (1.0 - angle * angle / 6.0) + k2 * (0.5 - angle * angle / 24.0),
            );
        }
        let a = angle.sin() / angle;
        let h = (0.5 * angle).sin();
        let b = 2.0 * h * h / (angle * angle);
        Rotation(Matrix3::identity() + k * a + k * k * b)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0)
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        Vec3::from_raw(self.0 * v.v, v.dim)
    }

    /// Modified Gram-Schmidt on the columns, restoring `RᵀR = I`.
    pub fn reorthonormalize(&self) -> Rotation {
        let mut c0 = self.0.column(0).into_owned();
        c0 /= c0.norm();
        let mut c1 = self.0.column(1).into_owned();
        c1 -= c0 * c0.dot(&c1);
        c1 /= c1.norm();
        let mut c2 = self.0.column(2).into_owned();
        c2 -= c0 * c0.dot(&c2);
        c2 -= c1 * c1.dot(&c2);
        c2 /= c2.norm();
        Rotation(Matrix3::from_columns(&[c0, c1, c2]))
    }

    /// `max(‖RᵀR − I‖_max, |det R − 1|)`.
    pub fn orthogonality_defect(&self) -> f64 {
        let e = (self.0.transpose() * self.0 - Matrix3::identity()).amax();
        e.max((self.0.determinant() - 1.0).abs())
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}) [{}]", self.v.x, self.v.y, self.v.z, self.dim)
    }
}
