//! The `n`-particle product configuration space: masses and weights, the
//! geometric metric `g_mul` and the weighted metric `G_mul`, the center of
//! mass, and the diagonal/relative splitting of multivectors and
//! multiforms.
//!
//! Relative multivectors are stored as full `n`-lists satisfying
//! `Σ μᵢ vᵢ = 0`; there is no reduced coordinate system.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geom3::{flat, Covec3, Point3, Vec3};
use crate::units::{Dim, Quantity};

/// Relative tolerance for membership in `𝕊_rel` or the annihilator of the
/// diagonal.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Particle masses, with total mass and weights.
#[derive(Clone, Debug, PartialEq)]
pub struct MassSpec {
    masses: Vec<f64>,
    total: f64,
    weights: Vec<f64>,
}

impl MassSpec {
    /// Masses in the coherent mass unit.
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidInput("at least one particle is required".into()));
        }
        for (index, &mass) in masses.iter().enumerate() {
            if !(mass > 0.0 && mass.is_finite()) {
                return Err(Error::NonPositiveMass { index, mass });
            }
        }
        let total: f64 = masses.iter().sum();
        let weights = masses.iter().map(|m| m / total).collect();
        Ok(MassSpec {
            masses,
            total,
            weights,
        })
    }

    pub fn from_quantities(masses: &[Quantity]) -> Result<Self> {
        let raw = masses
            .iter()
            .map(|q| q.value_in(Dim::MASS, "particle mass"))
            .collect::<Result<Vec<_>>>()?;
        MassSpec::new(raw)
    }

    pub fn equal(n: usize, mass: f64) -> Result<Self> {
        MassSpec::new(vec![mass; n])
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn mass(&self, i: usize) -> Quantity {
        Quantity::new(self.masses[i], Dim::MASS)
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// `m₀ = Σ mᵢ`.
    pub fn total_mass(&self) -> Quantity {
        Quantity::new(self.total, Dim::MASS)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// `μᵢ = mᵢ / m₀`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn check_len(&self, n: usize, context: &'static str) -> Result<()> {
        if n == self.len() {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                context,
                left: self.len(),
                right: n,
            })
        }
    }
}

/// A point of `ℙ_mul`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiConfig {
    pub points: Vec<Point3>,
}

impl MultiConfig {
    pub fn new(points: Vec<Point3>) -> Self {
        MultiConfig { points }
    }

    pub fn from_raw(points: &[Vector3<f64>]) -> Self {
        MultiConfig {
            points: points.iter().map(|&p| Point3::from_raw(p)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// An element of `dim ⊗ 𝕊_mul`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiVec {
    pub vs: Vec<Vector3<f64>>,
    pub dim: Dim,
}

/// An element of `dim ⊗ 𝕊*_mul`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiCovec {
    pub cs: Vec<Vector3<f64>>,
    pub dim: Dim,
}

impl MultiVec {
    pub fn from_raw(vs: Vec<Vector3<f64>>, dim: Dim) -> Self {
        MultiVec { vs, dim }
    }

    pub fn zeros(n: usize, dim: Dim) -> Self {
        MultiVec::from_raw(vec![Vector3::zeros(); n], dim)
    }

    /// Collect vectors of a common dimension.
    pub fn from_vecs(vecs: &[Vec3]) -> Result<Self> {
        let dim = vecs.first().map(|v| v.dim).unwrap_or(Dim::NONE);
        for v in vecs {
            v.dim.expect(dim, "multivector entries")?;
        }
        Ok(MultiVec::from_raw(vecs.iter().map(|v| v.v).collect(), dim))
    }

    /// `(w, …, w)`.
    pub fn diagonal(w: Vec3, n: usize) -> Self {
        MultiVec::from_raw(vec![w.v; n], w.dim)
    }

    pub fn len(&self) -> usize {
        self.vs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vs.is_empty()
    }

    pub fn get(&self, i: usize) -> Vec3 {
        Vec3::from_raw(self.vs[i], self.dim)
    }

    pub fn try_add(&self, o: &MultiVec) -> Result<MultiVec> {
        o.dim.expect(self.dim, "multivector addition")?;
        check_same_len(self.len(), o.len(), "multivector addition")?;
        Ok(MultiVec::from_raw(
            self.vs.iter().zip(&o.vs).map(|(a, b)| a + b).collect(),
            self.dim,
        ))
    }

    pub fn try_sub(&self, o: &MultiVec) -> Result<MultiVec> {
        o.dim.expect(self.dim, "multivector subtraction")?;
        check_same_len(self.len(), o.len(), "multivector subtraction")?;
        Ok(MultiVec::from_raw(
            self.vs.iter().zip(&o.vs).map(|(a, b)| a - b).collect(),
            self.dim,
        ))
    }

    pub fn scale(&self, s: f64) -> MultiVec {
        MultiVec::from_raw(self.vs.iter().map(|v| v * s).collect(), self.dim)
    }

    /// Largest component norm.
    pub fn max_norm(&self) -> f64 {
        self.vs.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

impl MultiCovec {
    pub fn from_raw(cs: Vec<Vector3<f64>>, dim: Dim) -> Self {
        MultiCovec { cs, dim }
    }

    pub fn zeros(n: usize, dim: Dim) -> Self {
        MultiCovec::from_raw(vec![Vector3::zeros(); n], dim)
    }

    pub fn from_covecs(covecs: &[Covec3]) -> Result<Self> {
        let dim = covecs.first().map(|c| c.dim).unwrap_or(Dim::NONE);
        for c in covecs {
            c.dim.expect(dim, "multiform entries")?;
        }
        Ok(MultiCovec::from_raw(covecs.iter().map(|c| c.a).collect(), dim))
    }

    pub fn len(&self) -> usize {
        self.cs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cs.is_empty()
    }

    pub fn get(&self, i: usize) -> Covec3 {
        Covec3::from_raw(self.cs[i], self.dim)
    }

    pub fn try_add(&self, o: &MultiCovec) -> Result<MultiCovec> {
        o.dim.expect(self.dim, "multiform addition")?;
        check_same_len(self.len(), o.len(), "multiform addition")?;
        Ok(MultiCovec::from_raw(
            self.cs.iter().zip(&o.cs).map(|(a, b)| a + b).collect(),
            self.dim,
        ))
    }

    pub fn try_sub(&self, o: &MultiCovec) -> Result<MultiCovec> {
        o.dim.expect(self.dim, "multiform subtraction")?;
        check_same_len(self.len(), o.len(), "multiform subtraction")?;
        Ok(MultiCovec::from_raw(
            self.cs.iter().zip(&o.cs).map(|(a, b)| a - b).collect(),
            self.dim,
        ))
    }

    pub fn scale(&self, s: f64) -> MultiCovec {
        MultiCovec::from_raw(self.cs.iter().map(|v| v * s).collect(), self.dim)
    }

    /// `Σ αᵢ`.
    pub fn total(&self) -> Covec3 {
        Covec3::from_raw(self.cs.iter().sum(), self.dim)
    }

    /// Natural pairing `⟨α, v⟩ = Σ ⟨αᵢ, vᵢ⟩`.
    pub fn pair(&self, v: &MultiVec) -> Result<Quantity> {
        check_same_len(self.len(), v.len(), "multiform pairing")?;
        let s = self.cs.iter().zip(&v.vs).map(|(a, b)| a.dot(b)).sum();
        Ok(Quantity::new(s, self.dim * v.dim))
    }

    pub fn max_norm(&self) -> f64 {
        self.cs.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

fn check_same_len(left: usize, right: usize, context: &'static str) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            context,
            left,
            right,
        })
    }
}

/// Multi-geometrical metric `Σ g(uᵢ, vᵢ)`.
pub fn g_mul(u: &MultiVec, v: &MultiVec) -> Result<Quantity> {
    check_same_len(u.len(), v.len(), "g_mul")?;
    let s = u.vs.iter().zip(&v.vs).map(|(a, b)| a.dot(b)).sum();
    Ok(Quantity::new(s, Dim::AREA * u.dim * v.dim))
}

/// Multi-weighted metric `Σ μᵢ g(uᵢ, vᵢ)`.
#[allow(non_snake_case)]
pub fn G_mul(u: &MultiVec, v: &MultiVec, m: &MassSpec) -> Result<Quantity> {
    check_same_len(u.len(), v.len(), "G_mul")?;
    m.check_len(u.len(), "G_mul")?;
    let s = u
        .vs
        .iter()
        .zip(&v.vs)
        .zip(m.weights())
        .map(|((a, b), w)| w * a.dot(b))
        .sum();
    Ok(Quantity::new(s, Dim::AREA * u.dim * v.dim))
}

/// `G♭_mul(v) = (μᵢ g♭(vᵢ))ᵢ`.
pub fn weighted_flat(v: &MultiVec, m: &MassSpec) -> Result<MultiCovec> {
    m.check_len(v.len(), "weighted flat")?;
    Ok(MultiCovec::from_raw(
        v.vs.iter().zip(m.weights()).map(|(x, w)| x * *w).collect(),
        v.dim * Dim::AREA,
    ))
}

/// `p₀ = o + Σ μᵢ (pᵢ − o)`, evaluated with `o = p₁`.
pub fn center_of_mass(p: &MultiConfig, m: &MassSpec) -> Result<Point3> {
    m.check_len(p.len(), "center of mass")?;
    let o = p.points[0].p;
    let shift: Vector3<f64> = p
        .points
        .iter()
        .zip(m.weights())
        .map(|(q, w)| (q.p - o) * *w)
        .sum();
    Ok(Point3::from_raw(o + shift))
}

/// `v₀ = Σ μᵢ vᵢ` and `v_rel = (vᵢ − v₀)ᵢ`.
pub fn split_vec_dia_rel(v: &MultiVec, m: &MassSpec) -> Result<(Vec3, MultiVec)> {
    m.check_len(v.len(), "diagonal splitting")?;
    let v0: Vector3<f64> = v.vs.iter().zip(m.weights()).map(|(x, w)| x * *w).sum();
    let rel = v.vs.iter().map(|x| x - v0).collect();
    Ok((Vec3::from_raw(v0, v.dim), MultiVec::from_raw(rel, v.dim)))
}

/// `α₀ = Σ αᵢ` and `α_rel = (αᵢ − μᵢ α₀)ᵢ`.
pub fn split_covec_dia_rel(a: &MultiCovec, m: &MassSpec) -> Result<(Covec3, MultiCovec)> {
    m.check_len(a.len(), "diagonal cosplitting")?;
    let a0 = a.total();
    let rel = a
        .cs
        .iter()
        .zip(m.weights())
        .map(|(x, w)| x - a0.a * *w)
        .collect();
    Ok((a0, MultiCovec::from_raw(rel, a.dim)))
}

/// Whether `Σ μᵢ vᵢ = 0` within [`MEMBERSHIP_TOL`] relative to the largest
/// component.
pub fn is_relative(v: &MultiVec, m: &MassSpec) -> bool {
    let s: Vector3<f64> = v.vs.iter().zip(m.weights()).map(|(x, w)| x * *w).sum();
    s.norm() <= MEMBERSHIP_TOL * v.max_norm().max(f64::MIN_POSITIVE)
}

/// Whether `Σ αᵢ = 0`, i.e. `α` annihilates the diagonal.
pub fn annihilates_diagonal(a: &MultiCovec) -> bool {
    a.total().a.norm() <= MEMBERSHIP_TOL * a.max_norm().max(f64::MIN_POSITIVE) * a.len() as f64
}

/// `½ m₀ G_mul(v, v) = Σ ½ mᵢ g(vᵢ, vᵢ)`.
pub fn multi_kinetic_energy(v: &MultiVec, m: &MassSpec) -> Result<Quantity> {
    v.dim.expect(Dim::VELOCITY, "multi kinetic energy")?;
    let g = G_mul(v, v, m)?;
    Ok(m.total_mass() * g * 0.5)
}

/// `m₀ G♭_mul(v) = (mᵢ g♭(vᵢ))ᵢ`.
pub fn multi_kinetic_momentum(v: &MultiVec, m: &MassSpec) -> Result<MultiCovec> {
    v.dim.expect(Dim::VELOCITY, "multi kinetic momentum")?;
    m.check_len(v.len(), "multi kinetic momentum")?;
    let cs = (0..v.len())
        .map(|i| flat(v.get(i)).scale_by(m.mass(i)).a)
        .collect();
    Ok(MultiCovec::from_raw(cs, Dim::MOMENTUM))
}
