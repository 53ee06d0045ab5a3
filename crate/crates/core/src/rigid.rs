//! Geometry of the rigid configuration space.
//!
//! A rigid system is described by a [`RigidShape`] (body-frame relative
//! positions `r̄ᵢ` with `Σ μᵢ r̄ᵢ = 0`, masses, mutual lengths, characteristic
//! and principal inertia data) and a [`RigidState`] (center of mass, attitude
//! `R`, center velocity and spatial angular velocity `Ω`). Current relative
//! positions are `rᵢ = R r̄ᵢ`.
//!
//! The tangent space of the multi-configuration space along the rigid
//! submanifold splits `G_mul`-orthogonally into a center-of-mass part, a
//! rotational part `Ω ×_mul r` and a normal part; the cotangent space splits
//! dually into total force, total momentum `Σ g♭(rᵢ) × αᵢ` and an annihilator
//! part. See [`split_tangent`] and [`split_cotangent`].
//!
//! Collinear (characteristic 1) bodies have a singular inertia operator with
//! the body axis as null direction. Angular velocities are then represented
//! by the unique representative orthogonal to the axis, obtained through the
//! pseudo-inverse of `Σ̂`.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::geom3::{cross, flat, metric, Covec3, LinOp3, Point3, Rotation, Vec3};
use crate::multibody::{center_of_mass, MassSpec, MultiConfig, MultiCovec, MultiVec};
use crate::units::{Dim, Quantity};

/// Singular values below this fraction of the largest count as zero when
/// computing the characteristic.
pub const RANK_TOL: f64 = 1e-9;
/// Relative tolerance on pairwise length rates for rigid-tangent velocities.
pub const RIGIDITY_TOL: f64 = 1e-9;
/// Disagreement between the weighted and unweighted angular-velocity formulas
/// beyond which [`angular_velocity`] reports an internal inconsistency.
pub const FORMULA_AGREEMENT_TOL: f64 = 1e-9;
/// Relative tolerance on `RᵀR = I` and `det R = 1`.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;
/// Relative tolerance for coincident principal momenta when labelling the
/// inertia symmetry.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Dimension of the span of the relative positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Characteristic {
    /// Collinear particles.
    Degenerate = 1,
    /// Coplanar, non-collinear particles.
    WeaklyNonDegenerate = 2,
    StronglyNonDegenerate = 3,
}

impl Characteristic {
    pub fn value(self) -> u8 {
        self as u8
    }

    pub fn label(self) -> &'static str {
        match self {
            Characteristic::Degenerate => "degenerate",
            Characteristic::WeaklyNonDegenerate => "weakly non-degenerate",
            Characteristic::StronglyNonDegenerate => "strongly non-degenerate",
        }
    }

    fn from_rank(rank: usize) -> Self {
        match rank {
            1 => Characteristic::Degenerate,
            2 => Characteristic::WeaklyNonDegenerate,
            _ => Characteristic::StronglyNonDegenerate,
        }
    }
}

/// Coincidence pattern of the principal inertia momenta.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InertiaSymmetry {
    Spherical,
    Symmetric,
    Asymmetric,
}

impl InertiaSymmetry {
    pub fn label(self) -> &'static str {
        match self {
            InertiaSymmetry::Spherical => "spherical",
            InertiaSymmetry::Symmetric => "symmetric",
            InertiaSymmetry::Asymmetric => "asymmetric",
        }
    }
}

/// Reference configuration and inertia data of a rigid body.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidShape {
    ref_config: MultiVec,
    masses: MassSpec,
    lengths: Vec<Vec<f64>>,
    characteristic: Characteristic,
    /// Eigenvalues of the body-frame `Σ̂`, descending.
    eigenvalues: [f64; 3],
    principal_axes: Rotation,
    /// Body-frame axis of a collinear body.
    axis: Option<Vector3<f64>>,
    initial_center: Point3,
}

/// Current placement and velocity of a rigid body.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidState {
    pub p_cen: Point3,
    pub rotation: Rotation,
    /// Center-of-mass velocity, `T⁻¹`.
    pub v_cen: Vec3,
    /// Spatial angular velocity, `T⁻¹L⁻¹`.
    pub omega: Vec3,
}

/// Three-way splitting of a multivector along the rigid submanifold.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitVec {
    pub v_cen: Vec3,
    pub omega: Vec3,
    pub v_perp: MultiVec,
}

/// Three-way splitting of a multiform along the rigid submanifold.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitCovec {
    pub a_cen: Covec3,
    /// Total momentum `Σ g♭(rᵢ) × αᵢ`, an element of `𝕍*_ang`.
    pub a_ang: Covec3,
    pub a_perp: MultiCovec,
}

/// Matrix of `σ̂` (unweighted) or `Σ̂` (weighted) at a given attitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InertiaOp {
    pub op: LinOp3,
    pub weighted: bool,
    rank: usize,
}

/// Center and angular kinetic energies and momenta.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KineticQuantities {
    pub k_cen: Quantity,
    pub k_ang: Quantity,
    pub p_cen: Covec3,
    pub p_ang: Covec3,
}

impl KineticQuantities {
    pub fn total_energy(&self) -> Quantity {
        Quantity::new(self.k_cen.value + self.k_ang.value, Dim::ENERGY)
    }
}

impl InertiaOp {
    /// Moore-Penrose solve `op⁺ rhs`; the null direction of a collinear body
    /// is dropped.
    pub fn solve(&self, rhs: Vec3) -> Vec3 {
        let x = if self.rank == 3 {
            match self.op.m.cholesky() {
                Some(ch) => ch.solve(&rhs.v),
                None => pinv_symmetric(&self.op.m, 3) * rhs.v,
            }
        } else {
            pinv_symmetric(&self.op.m, self.rank) * rhs.v
        };
        Vec3::from_raw(x, rhs.dim / self.op.dim)
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        self.op.apply(v)
    }

    /// Eigenvalues, descending.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let e = SymmetricEigen::new(self.op.m).eigenvalues;
        let mut v = [e[0], e[1], e[2]];
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
}

/// Pseudo-inverse of a symmetric positive semidefinite matrix keeping its
/// `rank` largest eigenvalues.
fn pinv_symmetric(m: &Matrix3<f64>, rank: usize) -> Matrix3<f64> {
    let eig = SymmetricEigen::new(*m);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out = Matrix3::zeros();
    for &k in idx.iter().take(rank) {
        let lambda = eig.eigenvalues[k];
        if lambda.abs() > 0.0 {
            let u = eig.eigenvectors.column(k);
            out += u * u.transpose() / lambda;
        }
    }
    out
}

fn inertia_matrix(rs: &[Vector3<f64>], weights: Option<&[f64]>) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for (i, r) in rs.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        m += (Matrix3::identity() * r.norm_squared() - r * r.transpose()) * w;
    }
    0.5 * (m + m.transpose())
}

impl RigidShape {
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Body-frame relative positions `r̄ᵢ`.
    pub fn ref_config(&self) -> &MultiVec {
        &self.ref_config
    }

    pub fn masses(&self) -> &MassSpec {
        &self.masses
    }

    /// Mutual distance `l_ij`.
    pub fn length(&self, i: usize, j: usize) -> Quantity {
        Quantity::new(self.lengths[i][j], Dim::LENGTH)
    }

    pub fn lengths(&self) -> &[Vec<f64>] {
        &self.lengths
    }

    pub fn characteristic(&self) -> Characteristic {
        self.characteristic
    }

    pub fn is_degenerate(&self) -> bool {
        self.characteristic == Characteristic::Degenerate
    }

    /// Eigenvalues `λ₁ ≥ λ₂ ≥ λ₃` of `Σ̂`, dimension `L²`.
    pub fn eigenvalues(&self) -> [Quantity; 3] {
        self.eigenvalues.map(|l| Quantity::new(l, Dim::INERTIA))
    }

    /// Principal inertia momenta `Iₖ = m₀ λₖ`, descending.
    pub fn principal_momenta(&self) -> [Quantity; 3] {
        self.eigenvalues
            .map(|l| Quantity::new(self.masses.total() * l, Dim::MOMENT_OF_INERTIA))
    }

    /// Body-frame principal axes as columns, matching [`Self::principal_momenta`].
    pub fn principal_axes(&self) -> &Rotation {
        &self.principal_axes
    }

    /// Body-frame axis of a collinear body.
    pub fn axis(&self) -> Option<Vector3<f64>> {
        self.axis
    }

    pub fn symmetry(&self) -> InertiaSymmetry {
        let [a, b, c] = self.eigenvalues;
        let close = |x: f64, y: f64| (x - y).abs() <= SYMMETRY_TOL * a.abs();
        match (close(a, b), close(b, c)) {
            (true, true) => InertiaSymmetry::Spherical,
            (false, false) => InertiaSymmetry::Asymmetric,
            _ => InertiaSymmetry::Symmetric,
        }
    }

    /// Current relative positions `rᵢ = R r̄ᵢ` (dimensionless).
    pub fn offsets(&self, rotation: &Rotation) -> Vec<Vector3<f64>> {
        self.ref_config.vs.iter().map(|r| rotation.0 * r).collect()
    }

    pub fn offsets_multi(&self, rotation: &Rotation) -> MultiVec {
        MultiVec::from_raw(self.offsets(rotation), Dim::NONE)
    }

    /// Spatial axis `R ā` of a collinear body.
    pub fn spatial_axis(&self, rotation: &Rotation) -> Option<Vector3<f64>> {
        self.axis.map(|a| rotation.0 * a)
    }

    pub fn node_positions(&self, state: &RigidState) -> MultiConfig {
        MultiConfig::from_raw(
            &self
                .offsets(&state.rotation)
                .iter()
                .map(|r| state.p_cen.p + r)
                .collect::<Vec<_>>(),
        )
    }

    /// `vᵢ = v_cen + Ω × rᵢ`.
    pub fn node_velocities(&self, state: &RigidState) -> MultiVec {
        MultiVec::from_raw(
            self.offsets(&state.rotation)
                .iter()
                .map(|r| state.v_cen.v + state.omega.v.cross(r))
                .collect(),
            Dim::VELOCITY,
        )
    }

    /// State at the reference placement (`R = I`) with the given velocities.
    pub fn state_at_rest(&self) -> RigidState {
        RigidState {
            p_cen: self.initial_center,
            rotation: Rotation::identity(),
            v_cen: Vec3::zero(Dim::VELOCITY),
            omega: Vec3::zero(Dim::ANGULAR_VELOCITY),
        }
    }

    /// Initial state from node velocities at the reference placement.
    pub fn initial_state(&self, velocities: &MultiVec) -> Result<RigidState> {
        velocities.dim.expect(Dim::VELOCITY, "initial node velocities")?;
        let rest = self.state_at_rest();
        let v_cen = Vec3::from_raw(
            velocities
                .vs
                .iter()
                .zip(self.masses.weights())
                .map(|(v, w)| v * *w)
                .sum(),
            Dim::VELOCITY,
        );
        let omega = angular_velocity(self, &rest.rotation, velocities)?;
        Ok(RigidState {
            v_cen,
            omega,
            ..rest
        })
    }

    /// Check dimensions, orthogonality of the attitude and, for collinear
    /// bodies, the gauge `Ω ⊥ axis`.
    pub fn validate_state(&self, state: &RigidState) -> Result<()> {
        state.v_cen.dim.expect(Dim::VELOCITY, "center velocity")?;
        state.omega.dim.expect(Dim::ANGULAR_VELOCITY, "angular velocity")?;
        let defect = state.rotation.orthogonality_defect();
        if defect > ORTHOGONALITY_TOL {
            return Err(Error::InvalidInput(format!(
                "attitude is not a proper rotation (defect {defect:e})"
            )));
        }
        if let Some(a) = self.spatial_axis(&state.rotation) {
            let c = a.dot(&state.omega.v);
            if c.abs() > ORTHOGONALITY_TOL * state.omega.v.norm().max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "angular velocity of a collinear body has axial component {c:e}"
                )));
            }
        }
        Ok(())
    }

    /// Remove the axial component of `Ω` for collinear bodies.
    pub fn gauge_fix(&self, state: &mut RigidState) {
        if let Some(a) = self.spatial_axis(&state.rotation) {
            let a = a.normalize();
            state.omega.v -= a * a.dot(&state.omega.v);
        }
    }
}

/// Validate a reference configuration and compute its inertia data.
pub fn build_shape(positions: &MultiConfig, masses: &MassSpec) -> Result<RigidShape> {
    let n = positions.len();
    if n != masses.len() {
        return Err(Error::LengthMismatch {
            context: "rigid shape",
            left: n,
            right: masses.len(),
        });
    }
    if n < 2 {
        return Err(Error::SingleParticle);
    }
    if let Some(bad) = positions.points.iter().position(|p| !p.p.iter().all(|x| x.is_finite())) {
        return Err(Error::InvalidInput(format!("position {bad} is not finite")));
    }
    let center = center_of_mass(positions, masses)?;
    let rs: Vec<Vector3<f64>> = positions.points.iter().map(|p| p.p - center.p).collect();

    let extent = rs.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let mut lengths = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let l = (positions.points[i].p - positions.points[j].p).norm();
            if l <= 1e-12 * extent || l == 0.0 {
                return Err(Error::CoincidentParticles(i, j));
            }
            lengths[i][j] = l;
            lengths[j][i] = l;
        }
    }

    let rows = DMatrix::from_fn(n, 3, |i, k| rs[i][k]);
    let svd = rows.svd(false, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * smax)
        .count();
    let characteristic = Characteristic::from_rank(rank);

    let sigma = inertia_matrix(&rs, Some(masses.weights()));
    let eig = SymmetricEigen::new(sigma);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = idx.map(|k| eig.eigenvalues[k]);
    let mut axes = Matrix3::from_columns(&idx.map(|k| eig.eigenvectors.column(k).into_owned()));
    if axes.determinant() < 0.0 {
        axes.set_column(2, &(-axes.column(2)));
    }

    let axis = if characteristic == Characteristic::Degenerate {
        let vt = svd.v_t.expect("right singular vectors requested");
        let mut best = 0;
        for k in 1..svd.singular_values.len() {
            if svd.singular_values[k] > svd.singular_values[best] {
                best = k;
            }
        }
        let row = vt.row(best);
        Some(Vector3::new(row[0], row[1], row[2]).normalize())
    } else {
        None
    };

    Ok(RigidShape {
        ref_config: MultiVec::from_raw(rs, Dim::NONE),
        masses: masses.clone(),
        lengths,
        characteristic,
        eigenvalues,
        principal_axes: Rotation(axes),
        axis,
        initial_center: center,
    })
}

/// `Σ̂(r)Ω = Σ μᵢ rᵢ × (Ω × rᵢ)`, or `σ̂` with unit weights, at attitude `R`.
pub fn sigma_hat(shape: &RigidShape, rotation: &Rotation, weighted: bool) -> InertiaOp {
    let rs = shape.offsets(rotation);
    let m = inertia_matrix(&rs, weighted.then(|| shape.masses.weights()));
    InertiaOp {
        op: LinOp3::from_raw(m, Dim::INERTIA),
        weighted,
        rank: if shape.is_degenerate() { 2 } else { 3 },
    }
}

fn weighted_moment(rs: &[Vector3<f64>], vs: &[Vector3<f64>], weights: Option<&[f64]>) -> Vector3<f64> {
    rs.iter()
        .zip(vs)
        .enumerate()
        .map(|(i, (r, v))| r.cross(v) * weights.map_or(1.0, |w| w[i]))
        .sum()
}

/// Angular velocity of rigid-tangent node velocities, `v ↦ Ω` with
/// `vᵢ − v_cen = Ω × rᵢ`. The center-of-mass velocity is removed first.
///
/// Both the unweighted (`σ̂`) and weighted (`Σ̂`) formulas are evaluated and
/// must agree. The result has dimension `v.dim · L⁻¹`.
pub fn angular_velocity(shape: &RigidShape, rotation: &Rotation, v: &MultiVec) -> Result<Vec3> {
    if v.len() != shape.len() {
        return Err(Error::LengthMismatch {
            context: "angular velocity",
            left: shape.len(),
            right: v.len(),
        });
    }
    let rs = shape.offsets(rotation);
    let w = shape.masses.weights();
    let v_cen: Vector3<f64> = v.vs.iter().zip(w).map(|(x, m)| x * *m).sum();
    let vrel: Vec<Vector3<f64>> = v.vs.iter().map(|x| x - v_cen).collect();

    let r_scale = rs.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let v_scale = vrel.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let scale = r_scale * v_scale;
    if scale == 0.0 {
        return Ok(Vec3::zero(v.dim / Dim::LENGTH));
    }
    let n = rs.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let residual = (rs[i] - rs[j]).dot(&(vrel[i] - vrel[j]));
            if residual.abs() > RIGIDITY_TOL * scale {
                return Err(Error::NotRigidTangent { i, j, residual });
            }
        }
    }

    let big = sigma_hat(shape, rotation, true);
    let small = sigma_hat(shape, rotation, false);
    let moment_w = Vec3::from_raw(weighted_moment(&rs, &vrel, Some(w)), v.dim * Dim::LENGTH);
    let moment_u = Vec3::from_raw(weighted_moment(&rs, &vrel, None), v.dim * Dim::LENGTH);
    let omega = big.solve(moment_w);
    let omega_u = small.solve(moment_u);
    let disagreement = (omega.v - omega_u.v).norm();
    if disagreement > FORMULA_AGREEMENT_TOL * omega.v.norm().max(v_scale / r_scale.max(f64::MIN_POSITIVE) * 1e-3) {
        return Err(Error::InternalInconsistency(format!(
            "weighted and unweighted angular velocity formulas differ by {disagreement:e}"
        )));
    }

    for (i, (r, x)) in rs.iter().zip(&vrel).enumerate() {
        let residual = (x - omega.v.cross(r)).norm();
        if residual > RIGIDITY_TOL * scale.max(v_scale) {
            return Err(Error::NotRigidTangent { i, j: i, residual });
        }
    }
    Ok(omega)
}

/// `G_mul`-orthogonal splitting of an arbitrary multivector into center,
/// rotational and normal parts.
pub fn split_tangent(shape: &RigidShape, rotation: &Rotation, v: &MultiVec) -> Result<SplitVec> {
    if v.len() != shape.len() {
        return Err(Error::LengthMismatch {
            context: "tangent splitting",
            left: shape.len(),
            right: v.len(),
        });
    }
    let rs = shape.offsets(rotation);
    let w = shape.masses.weights();
    let v_cen: Vector3<f64> = v.vs.iter().zip(w).map(|(x, m)| x * *m).sum();
    let vrel: Vec<Vector3<f64>> = v.vs.iter().map(|x| x - v_cen).collect();
    let moment = Vec3::from_raw(weighted_moment(&rs, &vrel, Some(w)), v.dim * Dim::LENGTH);
    let omega = sigma_hat(shape, rotation, true).solve(moment);
    let v_perp = vrel
        .iter()
        .zip(&rs)
        .map(|(x, r)| x - omega.v.cross(r))
        .collect();
    Ok(SplitVec {
        v_cen: Vec3::from_raw(v_cen, v.dim),
        omega,
        v_perp: MultiVec::from_raw(v_perp, v.dim),
    })
}

/// Multivector `Ω ×_mul r`.
pub fn rotational_field(shape: &RigidShape, rotation: &Rotation, omega: Vec3) -> MultiVec {
    let r = shape.offsets(rotation);
    MultiVec::from_raw(
        r.iter().map(|x| omega.v.cross(x)).collect(),
        omega.dim * Dim::LENGTH,
    )
}

impl SplitVec {
    /// `diag(v_cen) + Ω ×_mul r + v_perp`.
    pub fn reconstruct(&self, shape: &RigidShape, rotation: &Rotation) -> MultiVec {
        let rot = rotational_field(shape, rotation, self.omega);
        MultiVec::from_raw(
            self.v_perp
                .vs
                .iter()
                .zip(&rot.vs)
                .map(|(p, r)| self.v_cen.v + r + p)
                .collect(),
            self.v_perp.dim,
        )
    }
}

/// Total momentum of a multiform, `Σ g♭(rᵢ) × αᵢ`.
pub fn total_momentum(shape: &RigidShape, rotation: &Rotation, a: &MultiCovec) -> Covec3 {
    let rs = shape.offsets(rotation);
    let sum: Vector3<f64> = rs.iter().zip(&a.cs).map(|(r, x)| r.cross(x)).sum();
    // g♭(r) carries L², the covector cross product L⁻¹
    Covec3::from_raw(sum, a.dim * Dim::LENGTH)
}

/// Rotational multiform `(Σ̂⁻¹)*(β) ×_mul G♭_mul(r)`, whose total momentum is
/// `β` (up to the axial part for collinear bodies).
pub fn rotational_form(shape: &RigidShape, rotation: &Rotation, beta: Covec3) -> MultiCovec {
    let rs = shape.offsets(rotation);
    let sigma = sigma_hat(shape, rotation, true);
    let w = sigma.solve(crate::geom3::sharp(beta));
    let cs = rs
        .iter()
        .zip(shape.masses.weights())
        .map(|(r, mu)| w.v.cross(r) * *mu)
        .collect();
    MultiCovec::from_raw(cs, beta.dim / Dim::LENGTH)
}

/// `Ḡ_mul`-orthogonal splitting of an arbitrary multiform into total force,
/// total momentum and an annihilator of the rigid tangent space.
pub fn split_cotangent(shape: &RigidShape, rotation: &Rotation, a: &MultiCovec) -> Result<SplitCovec> {
    if a.len() != shape.len() {
        return Err(Error::LengthMismatch {
            context: "cotangent splitting",
            left: shape.len(),
            right: a.len(),
        });
    }
    let a_cen = a.total();
    let a_ang = total_momentum(shape, rotation, a);
    let rot = rotational_form(shape, rotation, a_ang);
    let a_perp = a
        .cs
        .iter()
        .zip(&rot.cs)
        .zip(shape.masses.weights())
        .map(|((x, r), mu)| x - a_cen.a * *mu - r)
        .collect();
    Ok(SplitCovec {
        a_cen,
        a_ang,
        a_perp: MultiCovec::from_raw(a_perp, a.dim),
    })
}

impl SplitCovec {
    /// `(μᵢ a_cen)ᵢ + α_rot + a_perp`.
    pub fn reconstruct(&self, shape: &RigidShape, rotation: &Rotation) -> MultiCovec {
        let rot = rotational_form(shape, rotation, self.a_ang);
        MultiCovec::from_raw(
            self.a_perp
                .cs
                .iter()
                .zip(&rot.cs)
                .zip(shape.masses.weights())
                .map(|((p, r), mu)| self.a_cen.a * *mu + r + p)
                .collect(),
            self.a_perp.dim,
        )
    }
}

/// Norms of `Σ μᵢ vᵢ` and `Σ μᵢ rᵢ × vᵢ`; both vanish on the normal space.
pub fn tangent_moments(shape: &RigidShape, rotation: &Rotation, v: &MultiVec) -> (f64, f64) {
    let rs = shape.offsets(rotation);
    let w = shape.masses.weights();
    let lin: Vector3<f64> = v.vs.iter().zip(w).map(|(x, m)| x * *m).sum();
    (lin.norm(), weighted_moment(&rs, &v.vs, Some(w)).norm())
}

/// Norms of `Σ αᵢ` and `Σ g♭(rᵢ) × αᵢ`; both vanish on the annihilator.
pub fn cotangent_moments(shape: &RigidShape, rotation: &Rotation, a: &MultiCovec) -> (f64, f64) {
    (a.total().a.norm(), total_momentum(shape, rotation, a).a.norm())
}

/// Energies `½m₀g(v_cen, v_cen)`, `½m₀g(Ω, Σ̂Ω)` and momenta `m₀g♭(v_cen)`,
/// `m₀Σ♭(Ω)`.
pub fn kinetic_quantities(shape: &RigidShape, state: &RigidState) -> Result<KineticQuantities> {
    state.v_cen.dim.expect(Dim::VELOCITY, "center velocity")?;
    state.omega.dim.expect(Dim::ANGULAR_VELOCITY, "angular velocity")?;
    let m0 = shape.masses.total_mass();
    let sigma_omega = sigma_hat(shape, &state.rotation, true).apply(state.omega);
    Ok(KineticQuantities {
        k_cen: m0 * metric(state.v_cen, state.v_cen) * 0.5,
        k_ang: m0 * metric(state.omega, sigma_omega) * 0.5,
        p_cen: flat(state.v_cen).scale_by(m0),
        p_ang: flat(sigma_omega).scale_by(m0),
    })
}

/// Velocity field of the rigid motion, `v_cen + Ω × (p − p_cen)`.
pub fn continuous_velocity_field(state: &RigidState, p: Point3) -> Result<Vec3> {
    state.omega.dim.expect(Dim::ANGULAR_VELOCITY, "angular velocity")?;
    cross(state.omega, p.minus(state.p_cen)).try_add(state.v_cen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multibody::G_mul;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rv(rng: &mut ChaCha8Rng) -> Vector3<f64> {
        Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
    }

    fn random_shape(rng: &mut ChaCha8Rng, n: usize) -> RigidShape {
        let pts = (0..n).map(|_| Point3::from_raw(rv(rng) * 2.0)).collect();
        let m = MassSpec::new((0..n).map(|_| rng.random_range(0.3..3.0)).collect()).unwrap();
        build_shape(&MultiConfig::new(pts), &m).unwrap()
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation {
        Rotation::exp(rv(rng) * 3.0)
    }

    fn dumbbell() -> RigidShape {
        let p = MultiConfig::new(vec![Point3::new(1.0, 0.0, 0.0), Point3::new(-1.0, 0.0, 0.0)]);
        build_shape(&p, &MassSpec::equal(2, 1.0).unwrap()).unwrap()
    }

    fn tetrahedron() -> RigidShape {
        let s = 1.0 / 3f64.sqrt();
        let p = MultiConfig::new(vec![
            Point3::new(s, s, s),
            Point3::new(s, -s, -s),
            Point3::new(-s, s, -s),
            Point3::new(-s, -s, s),
        ]);
        build_shape(&p, &MassSpec::equal(4, 1.0).unwrap()).unwrap()
    }

    /// Σ̂ by applying `Ω ↦ Σ μᵢ rᵢ×(Ω×rᵢ)` to basis vectors.
    fn brute_sigma(shape: &RigidShape, rot: &Rotation) -> Matrix3<f64> {
        let rs = shape.offsets(rot);
        let mut m = Matrix3::zeros();
        for k in 0..3 {
            let mut e = Vector3::zeros();
            e[k] = 1.0;
            let col: Vector3<f64> = rs
                .iter()
                .zip(shape.masses().weights())
                .map(|(r, w)| r.cross(&e.cross(r)) * *w)
                .sum();
            m.set_column(k, &col);
        }
        m
    }

    #[test]
    fn dumbbell_is_degenerate() {
        let s = dumbbell();
        assert_eq!(s.characteristic(), Characteristic::Degenerate);
        let [a, b, c] = s.eigenvalues();
        assert!((a.value - 1.0).abs() < 1e-15);
        assert!((b.value - 1.0).abs() < 1e-15);
        assert!(c.value.abs() < 1e-15);
        assert_eq!(s.principal_momenta()[0].dim, Dim::MOMENT_OF_INERTIA);
        assert!((s.principal_momenta()[0].value - 2.0).abs() < 1e-15);
        let axis = s.axis().unwrap();
        assert!((axis.x.abs() - 1.0).abs() < 1e-15);
        assert_eq!(s.length(0, 1), Quantity::new(2.0, Dim::LENGTH));
    }

    #[test]
    fn triangle_is_weakly_non_degenerate() {
        let side = 1.5;
        let h = side * 3f64.sqrt() / 2.0;
        let p = MultiConfig::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(side, 0.0, 0.0),
            Point3::new(side / 2.0, h, 0.0),
        ]);
        let s = build_shape(&p, &MassSpec::equal(3, 2.0).unwrap()).unwrap();
        assert_eq!(s.characteristic(), Characteristic::WeaklyNonDegenerate);
        let brute = brute_sigma(&s, &Rotation::identity());
        let mut oracle: Vec<f64> = SymmetricEigen::new(brute).eigenvalues.iter().copied().collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        for (k, l) in s.eigenvalues().iter().enumerate() {
            assert!((l.value - oracle[k]).abs() < 1e-14);
        }
        // frozen from the oracle: planar equilateral triangle, side 1.5
        assert!((oracle[0] - 0.75).abs() < 1e-14);
        assert!((oracle[1] - 0.375).abs() < 1e-14);
        assert_eq!(s.symmetry(), InertiaSymmetry::Symmetric);
    }

    #[test]
    fn tetrahedron_is_spherical() {
        let s = tetrahedron();
        assert_eq!(s.characteristic(), Characteristic::StronglyNonDegenerate);
        assert_eq!(s.symmetry(), InertiaSymmetry::Spherical);
        let brute = brute_sigma(&s, &Rotation::identity());
        assert!((brute - Matrix3::identity() * (2.0 / 3.0)).amax() < 1e-15);
    }

    #[test]
    fn shape_errors() {
        let m = MassSpec::equal(1, 1.0).unwrap();
        assert!(matches!(
            build_shape(&MultiConfig::new(vec![Point3::origin()]), &m),
            Err(Error::SingleParticle)
        ));
        let m = MassSpec::equal(3, 1.0).unwrap();
        let p = MultiConfig::new(vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::origin()]);
        assert!(matches!(build_shape(&p, &m), Err(Error::CoincidentParticles(0, 2))));
    }

    #[test]
    fn shape_invariants_on_random_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let n = rng.random_range(2..9);
            let s = random_shape(&mut rng, n);
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(s.lengths()[i][j], s.lengths()[j][i]);
                    for k in 0..n {
                        if i != j && j != k && i != k {
                            assert!(s.lengths()[i][k] <= s.lengths()[i][j] + s.lengths()[j][k] + 1e-15);
                        }
                    }
                }
            }
            let com: Vector3<f64> = s
                .ref_config()
                .vs
                .iter()
                .zip(s.masses().weights())
                .map(|(r, w)| r * *w)
                .sum();
            assert!(com.norm() < 1e-13);
            let expected = if n == 2 { 1 } else if n == 3 { 2 } else { 3 };
            assert_eq!(s.characteristic().value(), expected);
        }
    }

    #[test]
    fn sigma_hat_examples() {
        let s = dumbbell();
        let op = sigma_hat(&s, &Rotation::identity(), true);
        let e3 = Vec3::new(0.0, 0.0, 1.0, Dim::ANGULAR_VELOCITY);
        let out = op.apply(e3);
        assert!((out.v - e3.v).norm() < 1e-15);
        assert_eq!(out.dim, Dim::ANGULAR_VELOCITY * Dim::INERTIA);
        let e1 = Vec3::new(1.0, 0.0, 0.0, Dim::ANGULAR_VELOCITY);
        assert!(op.apply(e1).v.norm() < 1e-15);
        assert_eq!(op.rank(), 2);
    }

    #[test]
    fn sigma_hat_frame_covariance_and_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..50 {
            let n = rng.random_range(3..8);
            let s = random_shape(&mut rng, n);
            let rot = random_rotation(&mut rng);
            let body = sigma_hat(&s, &Rotation::identity(), true).op.m;
            let spatial = sigma_hat(&s, &rot, true).op.m;
            let scale = body.norm();
            assert!((spatial - rot.0 * body * rot.0.transpose()).amax() <= 1e-12 * scale);
            assert!((spatial - brute_sigma(&s, &rot)).amax() <= 1e-13 * scale);
            let before = sigma_hat(&s, &Rotation::identity(), true).eigenvalues();
            let after = sigma_hat(&s, &rot, true).eigenvalues();
            for k in 0..3 {
                assert!((before[k] - after[k]).abs() <= 1e-12 * scale);
            }
            assert!(sigma_hat(&s, &rot, false).op.is_symmetric(1e-13));
        }
    }

    #[test]
    fn angular_velocity_roundtrip_and_least_squares_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let n = rng.random_range(3..10);
            let s = random_shape(&mut rng, n);
            let rot = random_rotation(&mut rng);
            let om = rv(&mut rng);
            let rs = s.offsets(&rot);
            let vs: Vec<_> = rs.iter().map(|r| om.cross(r)).collect();
            let v = MultiVec::from_raw(vs.clone(), Dim::VELOCITY);
            let got = angular_velocity(&s, &rot, &v).unwrap();
            assert_eq!(got.dim, Dim::ANGULAR_VELOCITY);
            assert!((got.v - om).norm() <= 1e-12 * om.norm());

            // normal equations of min Σ μᵢ |vᵢ − Ω×rᵢ|², built entry by entry
            let mut a = Matrix3::zeros();
            let mut b = Vector3::zeros();
            for (i, r) in rs.iter().enumerate() {
                let mu = s.masses().weights()[i];
                // Ω×r = −[r]× Ω
                let jr = -r.cross_matrix();
                a += jr.transpose() * jr * mu;
                b += jr.transpose() * vs[i] * mu;
            }
            let ls = a.lu().solve(&b).unwrap();
            assert!((ls - got.v).norm() <= 1e-11 * om.norm());
        }
        let s = dumbbell();
        let zero = MultiVec::zeros(2, Dim::VELOCITY);
        assert_eq!(angular_velocity(&s, &Rotation::identity(), &zero).unwrap().v, Vector3::zeros());
    }

    #[test]
    fn angular_velocity_rejects_non_rigid() {
        let s = tetrahedron();
        let mut v = MultiVec::zeros(4, Dim::VELOCITY);
        v.vs[0] = s.ref_config().vs[0] * 0.1;
        assert!(matches!(
            angular_velocity(&s, &Rotation::identity(), &v),
            Err(Error::NotRigidTangent { .. })
        ));
        // collinear flex: middle particle moves sideways, lengths are stationary
        let p = MultiConfig::new(vec![
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
        ]);
        let s = build_shape(&p, &MassSpec::equal(3, 1.0).unwrap()).unwrap();
        let v = MultiVec::from_raw(
            vec![Vector3::zeros(), Vector3::new(0.0, 1.0, 0.0), Vector3::zeros()],
            Dim::VELOCITY,
        );
        assert!(matches!(
            angular_velocity(&s, &Rotation::identity(), &v),
            Err(Error::NotRigidTangent { .. })
        ));
    }

    #[test]
    fn degenerate_gauge() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let s = dumbbell();
        for _ in 0..50 {
            let rot = random_rotation(&mut rng);
            let om = rv(&mut rng);
            let rs = s.offsets(&rot);
            let v = MultiVec::from_raw(rs.iter().map(|r| om.cross(r)).collect(), Dim::VELOCITY);
            let got = angular_velocity(&s, &rot, &v).unwrap();
            let axis = s.spatial_axis(&rot).unwrap();
            assert!(got.v.dot(&axis).abs() < 1e-12);
            for (r, x) in rs.iter().zip(&v.vs) {
                assert!((got.v.cross(r) - x).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn angular_velocity_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for _ in 0..50 {
            let s = random_shape(&mut rng, 5);
            let rot = random_rotation(&mut rng);
            let q = random_rotation(&mut rng);
            let om = rv(&mut rng);
            let v = MultiVec::from_raw(s.offsets(&rot).iter().map(|r| om.cross(r)).collect(), Dim::VELOCITY);
            let qv = MultiVec::from_raw(v.vs.iter().map(|x| q.0 * x).collect(), Dim::VELOCITY);
            let a = angular_velocity(&s, &q.compose(&rot), &qv).unwrap();
            let b = angular_velocity(&s, &rot, &v).unwrap();
            assert!((a.v - q.0 * b.v).norm() <= 1e-11 * om.norm());
        }
    }

    #[test]
    fn tangent_splitting() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for _ in 0..200 {
            let n = rng.random_range(2..9);
            let s = random_shape(&mut rng, n);
            let rot = random_rotation(&mut rng);
            let v = MultiVec::from_raw((0..n).map(|_| rv(&mut rng)).collect(), Dim::VELOCITY);
            let sp = split_tangent(&s, &rot, &v).unwrap();
            let back = sp.reconstruct(&s, &rot);
            assert!(back.try_sub(&v).unwrap().max_norm() <= 1e-13 * v.max_norm().max(1.0) * 4.0);
            let (lin, ang) = tangent_moments(&s, &rot, &sp.v_perp);
            assert!(lin <= 1e-12 && ang <= 1e-12);
            let dia = MultiVec::diagonal(sp.v_cen, n);
            let rotp = rotational_field(&s, &rot, sp.omega);
            let m = s.masses();
            assert!(G_mul(&dia, &rotp, m).unwrap().value.abs() <= 1e-12);
            assert!(G_mul(&dia, &sp.v_perp, m).unwrap().value.abs() <= 1e-12);
            assert!(G_mul(&rotp, &sp.v_perp, m).unwrap().value.abs() <= 1e-12);
        }
    }

    #[test]
    fn tangent_splitting_special_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let s = random_shape(&mut rng, 5);
        let rot = random_rotation(&mut rng);
        let om = rv(&mut rng);
        let w = rv(&mut rng);
        let v = MultiVec::from_raw(s.offsets(&rot).iter().map(|r| w + om.cross(r)).collect(), Dim::VELOCITY);
        let sp = split_tangent(&s, &rot, &v).unwrap();
        assert!(sp.v_perp.max_norm() < 1e-14);
        assert!((sp.v_cen.v - w).norm() < 1e-14);
        assert!((sp.omega.v - om).norm() < 1e-13);

        let d = split_tangent(&s, &rot, &MultiVec::from_raw(vec![w; 5], Dim::VELOCITY)).unwrap();
        assert!((d.v_cen.v - w).norm() < 1e-15);
        assert!(d.omega.v.norm() < 1e-14);
        assert!(d.v_perp.max_norm() < 1e-14);
    }

    #[test]
    fn omega_reading_without_center_removal_coincides() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        for _ in 0..50 {
            let s = random_shape(&mut rng, 6);
            let rot = random_rotation(&mut rng);
            let v = MultiVec::from_raw((0..6).map(|_| rv(&mut rng)).collect(), Dim::VELOCITY);
            let rs = s.offsets(&rot);
            let raw = weighted_moment(&rs, &v.vs, Some(s.masses().weights()));
            let omega_raw = sigma_hat(&s, &rot, true).solve(Vec3::from_raw(raw, Dim::VELOCITY * Dim::LENGTH));
            let sp = split_tangent(&s, &rot, &v).unwrap();
            assert!((omega_raw.v - sp.omega.v).norm() <= 1e-13 * sp.omega.v.norm().max(1.0));
        }
    }

    #[test]
    fn cotangent_splitting_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..200 {
            let n = rng.random_range(2..9);
            let s = random_shape(&mut rng, n);
            let rot = random_rotation(&mut rng);
            let a = MultiCovec::from_raw((0..n).map(|_| rv(&mut rng)).collect(), Dim::FORCE);
            let v = MultiVec::from_raw((0..n).map(|_| rv(&mut rng)).collect(), Dim::VELOCITY);
            let sa = split_cotangent(&s, &rot, &a).unwrap();
            let sv = split_tangent(&s, &rot, &v).unwrap();
            let lhs = a.pair(&v).unwrap();
            let rhs = sa.a_cen.pair(sv.v_cen).value
                + sa.a_ang.pair(sv.omega).value
                + sa.a_perp.pair(&sv.v_perp).unwrap().value;
            assert_eq!(sa.a_ang.pair(sv.omega).dim, lhs.dim);
            assert!((lhs.value - rhs).abs() <= 1e-12 * (1.0 + lhs.value.abs()));
            let (lin, ang) = cotangent_moments(&s, &rot, &sa.a_perp);
            assert!(lin <= 1e-12 && ang <= 1e-12);
            let back = sa.reconstruct(&s, &rot);
            assert!(back.try_sub(&a).unwrap().max_norm() <= 1e-13 * 8.0);
        }
    }

    #[test]
    fn cotangent_special_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let s = random_shape(&mut rng, 4);
        let rot = random_rotation(&mut rng);
        let beta = rv(&mut rng);
        let a = MultiCovec::from_raw(s.masses().weights().iter().map(|w| beta * *w).collect(), Dim::FORCE);
        let sa = split_cotangent(&s, &rot, &a).unwrap();
        assert!((sa.a_cen.a - beta).norm() < 1e-15);
        assert!(sa.a_ang.a.norm() < 1e-14);
        assert!(sa.a_perp.max_norm() < 1e-14);
    }

    #[test]
    fn transpose_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let s = random_shape(&mut rng, 5);
            let rot = random_rotation(&mut rng);
            let a = MultiCovec::from_raw((0..5).map(|_| rv(&mut rng)).collect(), Dim::FORCE);
            let om = Vec3::from_raw(rv(&mut rng), Dim::ANGULAR_VELOCITY);
            let lhs = total_momentum(&s, &rot, &a).pair(om);
            let rhs = a.pair(&rotational_field(&s, &rot, om)).unwrap();
            assert_eq!(lhs.dim, rhs.dim);
            assert!((lhs.value - rhs.value).abs() <= 1e-12 * (1.0 + rhs.value.abs()));
        }
    }

    #[test]
    fn kinetic_examples() {
        let s = dumbbell();
        let state = RigidState {
            omega: Vec3::new(0.0, 0.0, 1.0, Dim::ANGULAR_VELOCITY),
            ..s.state_at_rest()
        };
        let k = kinetic_quantities(&s, &state).unwrap();
        assert!((k.k_ang.value - 1.0).abs() < 1e-15);
        assert_eq!(k.k_ang.dim, Dim::ENERGY);
        assert_eq!(k.p_ang.dim, Dim::ANGULAR_MOMENTUM);

        let trans = RigidState {
            v_cen: Vec3::new(1.0, 2.0, 3.0, Dim::VELOCITY),
            ..s.state_at_rest()
        };
        assert_eq!(kinetic_quantities(&s, &trans).unwrap().k_ang.value, 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..100 {
            let s = random_shape(&mut rng, 6);
            let state = RigidState {
                p_cen: Point3::from_raw(rv(&mut rng)),
                rotation: random_rotation(&mut rng),
                v_cen: Vec3::from_raw(rv(&mut rng), Dim::VELOCITY),
                omega: Vec3::from_raw(rv(&mut rng), Dim::ANGULAR_VELOCITY),
            };
            let k = kinetic_quantities(&s, &state).unwrap();
            let v = s.node_velocities(&state);
            let node: f64 = (0..6).map(|i| 0.5 * s.masses().masses()[i] * v.vs[i].norm_squared()).sum();
            assert!((k.total_energy().value - node).abs() <= 1e-12 * node.max(1.0));
            let rs = s.offsets(&state.rotation);
            let l: Vector3<f64> = (0..6).map(|i| rs[i].cross(&v.vs[i]) * s.masses().masses()[i]).sum();
            assert!((k.p_ang.a - l).norm() <= 1e-12 * l.norm().max(1.0));
        }
    }

    #[test]
    fn velocity_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let s = random_shape(&mut rng, 4);
        let state = RigidState {
            p_cen: Point3::from_raw(rv(&mut rng)),
            rotation: random_rotation(&mut rng),
            v_cen: Vec3::from_raw(rv(&mut rng), Dim::VELOCITY),
            omega: Vec3::from_raw(rv(&mut rng), Dim::ANGULAR_VELOCITY),
        };
        let pos = s.node_positions(&state);
        let vel = s.node_velocities(&state);
        for i in 0..4 {
            let f = continuous_velocity_field(&state, pos.points[i]).unwrap();
            assert!((f.v - vel.vs[i]).norm() < 1e-14);
        }
        assert_eq!(continuous_velocity_field(&state, state.p_cen).unwrap(), state.v_cen);
        for _ in 0..100 {
            let p = Point3::from_raw(rv(&mut rng) * 5.0);
            let q = Point3::from_raw(rv(&mut rng) * 5.0);
            let vp = continuous_velocity_field(&state, p).unwrap();
            let vq = continuous_velocity_field(&state, q).unwrap();
            let rate = 2.0 * metric(p.minus(q), vp.try_sub(vq).unwrap()).value;
            assert!(rate.abs() < 1e-13);
        }
    }
}
