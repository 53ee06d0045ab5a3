//! Forces and the split equations of motion.
//!
//! Applied forces are multiforms of dimension `T⁻²L²M`. For a rigid body
//! they split into total force `F_cen`, total momentum `F_ang` and a part
//! `F_perp` annihilating the rigid tangent space. The center moves by
//! `m₀ dv_cen = g♯F_cen`; the attitude follows Euler's equation
//! `m₀ Σ̂(dΩ + Σ̂⁻¹(Ω × Σ̂Ω)) = g♯F_ang`. The reaction of the rigid
//! constraint is `R⊥ = m₀ G♭_mul(N) − F_perp`, with `N` the second
//! fundamental form of the rigid submanifold.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geom3::{covec_cross, flat, sharp, Covec3, Point3, Rotation, Vec3};
use crate::multibody::{MassSpec, MultiConfig, MultiCovec, MultiVec};
use crate::rigid::{sigma_hat, split_cotangent, RigidShape, RigidState};
use crate::surface::{Chart, ChartPoint};
use crate::units::{Dim, Quantity};

/// Relative size of an axial torque on a collinear body that is tolerated
/// as roundoff.
pub const AXIS_TORQUE_TOL: f64 = 1e-9;

pub type CustomForceFn = Arc<dyn Fn(f64, &MultiConfig, &MultiVec, &MassSpec) -> MultiCovec + Send + Sync>;
pub type CustomPotentialFn = Arc<dyn Fn(&MultiConfig, &MassSpec) -> f64 + Send + Sync>;
pub type ScalarLawFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Scalar law `λ(d)` of the distance `d = |pⱼ − pᵢ|`, with optional
/// potential `U(d)`.
#[derive(Clone)]
pub enum PairLaw {
    /// `λ = k(1 − l₀/d)`, `U = ½k(d − l₀)²`.
    Spring { k: f64, rest: f64 },
    /// Attraction `λ = k/d³`, `U = −k/d`.
    InverseSquare { k: f64 },
    Custom {
        lambda: ScalarLawFn,
        potential: Option<ScalarLawFn>,
    },
}

impl PairLaw {
    pub fn lambda(&self, d: f64) -> f64 {
        match self {
            PairLaw::Spring { k, rest } => k * (1.0 - rest / d),
            PairLaw::InverseSquare { k } => k / (d * d * d),
            PairLaw::Custom { lambda, .. } => lambda(d),
        }
    }

    pub fn potential(&self, d: f64) -> Option<f64> {
        match self {
            PairLaw::Spring { k, rest } => Some(0.5 * k * (d - rest).powi(2)),
            PairLaw::InverseSquare { k } => Some(-k / d),
            PairLaw::Custom { potential, .. } => potential.as_ref().map(|u| u(d)),
        }
    }
}

impl fmt::Debug for PairLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairLaw::Spring { k, rest } => write!(f, "Spring {{ k: {k}, rest: {rest} }}"),
            PairLaw::InverseSquare { k } => write!(f, "InverseSquare {{ k: {k} }}"),
            PairLaw::Custom { potential, .. } => {
                write!(f, "Custom {{ conservative: {} }}", potential.is_some())
            }
        }
    }
}

/// Interaction between particles `i` and `j`, applied symmetrically.
#[derive(Clone, Debug)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    pub law: PairLaw,
}

impl PairTerm {
    pub fn new(i: usize, j: usize, law: PairLaw) -> Result<Self> {
        if i == j {
            return Err(Error::InvalidInput(format!("pair term ({i}, {j}) joins a particle to itself")));
        }
        Ok(PairTerm { i, j, law })
    }
}

/// A multi-force together with its potential when conservative.
#[derive(Clone)]
pub enum ForceLaw {
    /// `Fᵢ = mᵢ g♭(a)` for a field acceleration `a` (`T⁻²`).
    Uniform { accel: Vec3 },
    /// `Fᵢ = Σⱼ λᵢⱼ(|pⱼ − pᵢ|) g♭(pⱼ − pᵢ)`.
    Pairwise(Vec<PairTerm>),
    /// `Fᵢ = −k mᵢ (pᵢ − o)/|pᵢ − o|³`, `U = −Σ k mᵢ/|pᵢ − o|`.
    Central { origin: Point3, strength: f64 },
    Custom {
        force: CustomForceFn,
        potential: Option<CustomPotentialFn>,
    },
    Sum(Vec<ForceLaw>),
}

impl fmt::Debug for ForceLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForceLaw::Uniform { accel } => write!(f, "Uniform({accel})"),
            ForceLaw::Pairwise(t) => f.debug_tuple("Pairwise").field(t).finish(),
            ForceLaw::Central { origin, strength } => {
                write!(f, "Central {{ origin: {:?}, strength: {strength} }}", origin.p)
            }
            ForceLaw::Custom { potential, .. } => {
                write!(f, "Custom {{ conservative: {} }}", potential.is_some())
            }
            ForceLaw::Sum(v) => f.debug_tuple("Sum").field(v).finish(),
        }
    }
}

impl ForceLaw {
    pub fn zero() -> Self {
        ForceLaw::Sum(Vec::new())
    }

    pub fn uniform(accel: Vec3) -> Result<Self> {
        accel.dim.expect(Dim::ACCELERATION, "uniform field")?;
        Ok(ForceLaw::Uniform { accel })
    }

    pub fn is_conservative(&self) -> bool {
        match self {
            ForceLaw::Uniform { .. } | ForceLaw::Central { .. } => true,
            ForceLaw::Pairwise(t) => t.iter().all(|p| p.law.potential(1.0).is_some()),
            ForceLaw::Custom { potential, .. } => potential.is_some(),
            ForceLaw::Sum(v) => v.iter().all(ForceLaw::is_conservative),
        }
    }

    /// Potential energy, when every term is conservative.
    pub fn potential(&self, config: &MultiConfig, masses: &MassSpec) -> Option<Quantity> {
        self.raw_potential(config, masses).map(|u| Quantity::new(u, Dim::ENERGY))
    }

    fn raw_potential(&self, config: &MultiConfig, masses: &MassSpec) -> Option<f64> {
        let p = &config.points;
        match self {
            ForceLaw::Uniform { accel } => Some(
                -p.iter()
                    .zip(masses.masses())
                    .map(|(q, m)| m * accel.v.dot(&q.p))
                    .sum::<f64>(),
            ),
            ForceLaw::Pairwise(terms) => terms
                .iter()
                .map(|t| t.law.potential((p[t.j].p - p[t.i].p).norm()))
                .sum(),
            ForceLaw::Central { origin, strength } => Some(
                -p.iter()
                    .zip(masses.masses())
                    .map(|(q, m)| strength * m / (q.p - origin.p).norm())
                    .sum::<f64>(),
            ),
            ForceLaw::Custom { potential, .. } => potential.as_ref().map(|u| u(config, masses)),
            ForceLaw::Sum(v) => v.iter().map(|l| l.raw_potential(config, masses)).sum(),
        }
    }

    fn accumulate(&self, t: f64, config: &MultiConfig, vel: &MultiVec, masses: &MassSpec, out: &mut [Vector3<f64>]) -> Result<()> {
        let p = &config.points;
        match self {
            ForceLaw::Uniform { accel } => {
                for (f, m) in out.iter_mut().zip(masses.masses()) {
                    *f += accel.v * *m;
                }
            }
            ForceLaw::Pairwise(terms) => {
                for term in terms {
                    if term.i >= p.len() || term.j >= p.len() {
                        return Err(Error::InvalidInput(format!(
                            "pair term ({}, {}) refers to a missing particle",
                            term.i, term.j
                        )));
                    }
                    let d = p[term.j].p - p[term.i].p;
                    let f = d * term.law.lambda(d.norm());
                    out[term.i] += f;
                    out[term.j] -= f;
                }
            }
            ForceLaw::Central { origin, strength } => {
                for ((f, q), m) in out.iter_mut().zip(p).zip(masses.masses()) {
                    let d = q.p - origin.p;
                    *f -= d * (strength * m / d.norm().powi(3));
                }
            }
            ForceLaw::Custom { force, .. } => {
                let f = force(t, config, vel, masses);
                f.dim.expect(Dim::FORCE, "custom force")?;
                if f.len() != out.len() {
                    return Err(Error::LengthMismatch {
                        context: "custom force",
                        left: out.len(),
                        right: f.len(),
                    });
                }
                for (o, x) in out.iter_mut().zip(&f.cs) {
                    *o += x;
                }
            }
            ForceLaw::Sum(v) => {
                for law in v {
                    law.accumulate(t, config, vel, masses, out)?;
                }
            }
        }
        Ok(())
    }
}

/// Per-node applied forces at time `t`.
pub fn evaluate_force(law: &ForceLaw, t: f64, config: &MultiConfig, vel: &MultiVec, masses: &MassSpec) -> Result<MultiCovec> {
    if config.len() != masses.len() || vel.len() != masses.len() {
        return Err(Error::LengthMismatch {
            context: "force evaluation",
            left: masses.len(),
            right: if config.len() != masses.len() { config.len() } else { vel.len() },
        });
    }
    let mut out = vec![Vector3::zeros(); masses.len()];
    law.accumulate(t, config, vel, masses, &mut out)?;
    Ok(MultiCovec::from_raw(out, Dim::FORCE))
}

/// Total force, total momentum of the force and the normal remainder.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidForceSplit {
    pub f_cen: Covec3,
    pub f_ang: Covec3,
    pub f_perp: MultiCovec,
}

pub fn split_rigid_force(shape: &RigidShape, rotation: &Rotation, force: &MultiCovec) -> Result<RigidForceSplit> {
    force.dim.expect(Dim::FORCE, "rigid force splitting")?;
    let s = split_cotangent(shape, rotation, force)?;
    Ok(RigidForceSplit {
        f_cen: s.a_cen,
        f_ang: s.a_ang,
        f_perp: s.a_perp,
    })
}

/// Euler's equation: `dΩ = Σ̂⁻¹(g♯F_ang/m₀ − Ω × Σ̂Ω)`.
///
/// For collinear bodies the axial component of `F_ang` must vanish (relative
/// to `|F_ang|`); the solution is the representative orthogonal to the axis.
pub fn euler_rhs(shape: &RigidShape, state: &RigidState, f_ang: Covec3) -> Result<Vec3> {
    let scale = f_ang.a.norm();
    euler_rhs_scaled(shape, state, f_ang, scale)
}

/// [`euler_rhs`] with an explicit torque scale for the axial check, e.g.
/// `Σ |rᵢ||Fᵢ|` when `F_ang` comes from node forces.
pub fn euler_rhs_scaled(shape: &RigidShape, state: &RigidState, f_ang: Covec3, torque_scale: f64) -> Result<Vec3> {
    f_ang.dim.expect(Dim::TORQUE, "total momentum of the force")?;
    state.omega.dim.expect(Dim::ANGULAR_VELOCITY, "angular velocity")?;
    let mut torque = f_ang.a;
    if let Some(axis) = shape.spatial_axis(&state.rotation) {
        let axis = axis.normalize();
        let component = axis.dot(&torque);
        if component.abs() > AXIS_TORQUE_TOL * torque_scale.max(f64::MIN_POSITIVE) {
            return Err(Error::DegenerateAxisTorque { component });
        }
        torque -= axis * component;
    }
    let sigma = sigma_hat(shape, &state.rotation, true);
    let m0 = shape.masses().total_mass();
    let drive = sharp(Covec3::from_raw(torque, f_ang.dim)).scale_by(Quantity::new(1.0 / m0.value, m0.dim.recip()));
    let gyro = crate::geom3::cross(state.omega, sigma.apply(state.omega));
    let rhs = drive.try_sub(gyro)?;
    Ok(sigma.solve(rhs))
}

/// `Σ̂⁻¹(Ω × Σ̂Ω)`, the rotational correction shared by `N` and the reaction.
fn gyroscopic_term(shape: &RigidShape, state: &RigidState) -> Vector3<f64> {
    let sigma = sigma_hat(shape, &state.rotation, true);
    let gyro = crate::geom3::cross(state.omega, sigma.apply(state.omega));
    sigma.solve(gyro).v
}

/// `Nᵢ = Ω × (Ω × rᵢ) − Σ̂⁻¹(Ω × Σ̂Ω) × rᵢ`, dimension `T⁻²`.
pub fn second_fundamental_form_rigid(shape: &RigidShape, state: &RigidState) -> Result<MultiVec> {
    state.omega.dim.expect(Dim::ANGULAR_VELOCITY, "angular velocity")?;
    let w = state.omega.v;
    let c = gyroscopic_term(shape, state);
    let n = shape
        .offsets(&state.rotation)
        .iter()
        .map(|r| w.cross(&w.cross(r)) - c.cross(r))
        .collect();
    Ok(MultiVec::from_raw(n, Dim::ACCELERATION))
}

/// Reaction of the rigid constraint, `R⊥ = m₀ G♭_mul(N) − F_perp`.
pub fn reaction_per_node(shape: &RigidShape, state: &RigidState, force: &MultiCovec) -> Result<MultiCovec> {
    let n = second_fundamental_form_rigid(shape, state)?;
    let split = split_rigid_force(shape, &state.rotation, force)?;
    let cs = n
        .vs
        .iter()
        .zip(&split.f_perp.cs)
        .zip(shape.masses().masses())
        .map(|((a, f), m)| a * *m - f)
        .collect();
    Ok(MultiCovec::from_raw(cs, Dim::FORCE))
}

/// The same reaction from the expanded covector expression
/// `m₀[Ω̄×(Ω̄×r̄ᵢ) − Σ*⁻¹(Ω̄ × g♭(Σ̂Ω)) × r̄ᵢ] − Fᵢ + μᵢF_cen + Σ*⁻¹(F_ang) × r̄ᵢ`
/// with `Ω̄ = g♭Ω`, `r̄ᵢ = μᵢ g♭(rᵢ)`, `Σ*⁻¹(β) = g♭(Σ̂⁻¹ g♯β)`, and
/// `F_cen`, `F_ang` summed directly from `F`.
pub fn reaction_per_node_expanded(shape: &RigidShape, state: &RigidState, force: &MultiCovec) -> Result<MultiCovec> {
    force.dim.expect(Dim::FORCE, "applied force")?;
    state.omega.dim.expect(Dim::ANGULAR_VELOCITY, "angular velocity")?;
    if force.len() != shape.len() {
        return Err(Error::LengthMismatch {
            context: "rigid reaction",
            left: shape.len(),
            right: force.len(),
        });
    }
    let sigma = sigma_hat(shape, &state.rotation, true);
    let sigma_star_inv = |beta: Covec3| flat(sigma.solve(sharp(beta)));
    let m0 = shape.masses().total_mass();
    let weights = shape.masses().weights();
    let rs: Vec<Vec3> = shape
        .offsets(&state.rotation)
        .into_iter()
        .map(|r| Vec3::from_raw(r, Dim::NONE))
        .collect();

    let omega_bar = flat(state.omega);
    let f_cen = force.total();
    let f_ang = rs
        .iter()
        .zip(&force.cs)
        .map(|(r, f)| covec_cross(flat(*r), Covec3::from_raw(*f, Dim::FORCE)))
        .try_fold(Covec3::zero(Dim::TORQUE), |acc, x| acc.try_add(x))?;
    let correction = sigma_star_inv(covec_cross(omega_bar, flat(sigma.apply(state.omega))));
    let rot_force = sigma_star_inv(f_ang);

    let mut cs = Vec::with_capacity(shape.len());
    for (i, r) in rs.iter().enumerate() {
        let r_bar = flat(*r).scale(weights[i]);
        let inertial = covec_cross(omega_bar, covec_cross(omega_bar, r_bar))
            .try_sub(covec_cross(correction, r_bar))?
            .scale_by(m0);
        let ri = inertial
            .try_sub(force.get(i))?
            .try_add(f_cen.scale(weights[i]))?
            .try_add(covec_cross(rot_force, r_bar))?;
        cs.push(ri.a);
    }
    Ok(MultiCovec::from_raw(cs, Dim::FORCE))
}

/// Reduced equations of motion: `(dv_cen, dΩ)` at `state` and time `t`.
pub fn newton_rhs_full(shape: &RigidShape, state: &RigidState, law: &ForceLaw, t: f64) -> Result<(Vec3, Vec3)> {
    let force = evaluate_force(
        law,
        t,
        &shape.node_positions(state),
        &shape.node_velocities(state),
        shape.masses(),
    )?;
    newton_rhs_with_force(shape, state, &force)
}

/// Reduced equations of motion for given node forces.
pub fn newton_rhs_with_force(shape: &RigidShape, state: &RigidState, force: &MultiCovec) -> Result<(Vec3, Vec3)> {
    force.dim.expect(Dim::FORCE, "applied force")?;
    let rs = shape.offsets(&state.rotation);
    let f_cen = force.total();
    let f_ang_raw: Vector3<f64> = rs.iter().zip(&force.cs).map(|(r, f)| r.cross(f)).sum();
    let scale: f64 = rs.iter().zip(&force.cs).map(|(r, f)| r.norm() * f.norm()).sum();
    let f_ang = Covec3::from_raw(f_ang_raw, Dim::TORQUE);
    let m0 = shape.masses().total();
    let dv = Vec3::from_raw(f_cen.a / m0, Dim::ACCELERATION);
    let domega = euler_rhs_scaled(shape, state, f_ang, scale)?;
    Ok((dv, domega))
}

/// Node accelerations `dv_cen + dΩ × rᵢ + Ω × (Ω × rᵢ)` of a rigid motion.
pub fn node_accelerations(shape: &RigidShape, state: &RigidState, dv_cen: Vec3, domega: Vec3) -> MultiVec {
    let w = state.omega.v;
    MultiVec::from_raw(
        shape
            .offsets(&state.rotation)
            .iter()
            .map(|r| dv_cen.v + domega.v.cross(r) + w.cross(&w.cross(r)))
            .collect(),
        Dim::ACCELERATION,
    )
}

/// Largest Lagrange residual along a sampled trajectory, absolute and
/// relative to the largest generalized force encountered.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LagrangeResidual {
    pub max_abs: f64,
    pub scale: f64,
    pub relative: f64,
    pub samples: usize,
}

impl LagrangeResidual {
    fn from_parts(max_abs: f64, scale: f64, samples: usize) -> Self {
        LagrangeResidual {
            max_abs,
            scale,
            relative: max_abs / scale.max(f64::MIN_POSITIVE),
            samples,
        }
    }
}

const LAGRANGE_FD: f64 = 1e-6;

fn partials<F: Fn(&[f64], &[f64]) -> f64>(lag: &F, q: &[f64], qd: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = q.len();
    let mut dq = vec![0.0; n];
    let mut dqd = vec![0.0; n];
    for k in 0..n {
        let hq = LAGRANGE_FD * q[k].abs().max(1.0);
        let mut a = q.to_vec();
        let mut b = q.to_vec();
        a[k] += hq;
        b[k] -= hq;
        dq[k] = (lag(&a, qd) - lag(&b, qd)) / (2.0 * hq);
        let hv = LAGRANGE_FD * qd[k].abs().max(1.0);
        let mut a = qd.to_vec();
        let mut b = qd.to_vec();
        a[k] += hv;
        b[k] -= hv;
        dqd[k] = (lag(q, &a) - lag(q, &b)) / (2.0 * hv);
    }
    (dq, dqd)
}

/// `D(∂L/∂q̇) − ∂L/∂q` on uniformly sampled `(t, q, q̇)`, evaluated at
/// interior samples accepted by `keep`.
fn lagrange_residual_samples<F, K>(lag: F, samples: &[(f64, Vec<f64>, Vec<f64>)], keep: K) -> Result<LagrangeResidual>
where
    F: Fn(&[f64], &[f64]) -> f64,
    K: Fn(&[f64]) -> bool,
{
    if samples.len() < 3 {
        return Err(Error::InvalidInput("Lagrange residual needs at least three samples".into()));
    }
    let parts: Vec<(Vec<f64>, Vec<f64>)> = samples.iter().map(|(_, q, qd)| partials(&lag, q, qd)).collect();
    let mut max_abs = 0.0f64;
    let mut scale = 0.0f64;
    let mut count = 0;
    for k in 1..samples.len() - 1 {
        if !(keep(&samples[k - 1].1) && keep(&samples[k].1) && keep(&samples[k + 1].1)) {
            continue;
        }
        let dt = samples[k + 1].0 - samples[k - 1].0;
        for c in 0..samples[k].1.len() {
            let ddt = (parts[k + 1].1[c] - parts[k - 1].1[c]) / dt;
            let dq = parts[k].0[c];
            max_abs = max_abs.max((ddt - dq).abs());
            scale = scale.max(ddt.abs()).max(dq.abs());
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidInput("no trajectory sample lies inside the chart domain".into()));
    }
    Ok(LagrangeResidual::from_parts(max_abs, scale, count))
}

/// Lagrange residual of a constrained particle with Lagrangian
/// `½ m g_con(ẏ, ẏ) − U(embed(y))`.
pub fn lagrange_residual_chart<U>(chart: &Chart, mass: Quantity, potential: U, samples: &[(f64, ChartPoint)]) -> Result<LagrangeResidual>
where
    U: Fn(Point3) -> f64,
{
    let m = mass.value_in(Dim::MASS, "particle mass")?;
    let lag = |y: &[f64], yd: &[f64]| {
        let t = chart.tangents(y);
        let v: Vector3<f64> = t.iter().zip(yd).map(|(a, s)| a * *s).sum();
        0.5 * m * v.norm_squared() - potential(chart.point(y))
    };
    let data: Vec<_> = samples.iter().map(|(t, p)| (*t, p.y.clone(), p.y_dot.clone())).collect();
    lagrange_residual_samples(lag, &data, |_| true)
}

/// `R = R_z(φ) R_x(θ) R_z(ψ)`.
pub fn euler_zxz_matrix(phi: f64, theta: f64, psi: f64) -> Matrix3<f64> {
    let rz = |a: f64| {
        let (s, c) = a.sin_cos();
        Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
    };
    let (s, c) = theta.sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c);
    rz(phi) * rx * rz(psi)
}

/// Z-X-Z Euler angles `(φ, θ, ψ)` of a rotation, `θ ∈ [0, π]`.
pub fn euler_zxz_angles(r: &Matrix3<f64>) -> [f64; 3] {
    let theta = r[(2, 2)].clamp(-1.0, 1.0).acos();
    let phi = r[(0, 2)].atan2(-r[(1, 2)]);
    let psi = r[(2, 0)].atan2(r[(2, 1)]);
    [phi, theta, psi]
}

/// Columns `w_k` with `Ω = Σ w_k q̇_k` for Z-X-Z angles.
fn euler_zxz_rate_matrix(phi: f64, theta: f64) -> Matrix3<f64> {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    Matrix3::from_columns(&[
        Vector3::z(),
        Vector3::new(cp, sp, 0.0),
        Vector3::new(sp * st, -cp * st, ct),
    ])
}

fn unwrap_angle(prev: f64, next: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    next + tau * ((prev - next) / tau).round()
}

/// Minimum of `sin θ` for samples used in the rigid Lagrange residual.
pub const EULER_CHART_MARGIN: f64 = 0.1;

/// Lagrange residual of a rigid body in the chart `(p_cen, φ, θ, ψ)` with
/// Lagrangian `½m₀|v_cen|² + ½m₀ g(Ω, Σ̂Ω) − U`. Samples with
/// `sin θ ≤ 0.1` are skipped.
pub fn lagrange_residual_rigid(shape: &RigidShape, law: &ForceLaw, samples: &[(f64, RigidState)]) -> Result<LagrangeResidual> {
    if !law.is_conservative() {
        return Err(Error::InvalidInput("Lagrange residual needs a conservative force law".into()));
    }
    let m0 = shape.masses().total();
    let body = shape.ref_config().vs.clone();
    let weights = shape.masses().weights().to_vec();
    let lag = |q: &[f64], qd: &[f64]| {
        let r = euler_zxz_matrix(q[3], q[4], q[5]);
        let omega = euler_zxz_rate_matrix(q[3], q[4]) * Vector3::new(qd[3], qd[4], qd[5]);
        let center = Vector3::new(q[0], q[1], q[2]);
        let mut rot = 0.0;
        let mut points = Vec::with_capacity(body.len());
        for (b, w) in body.iter().zip(&weights) {
            let ri = r * b;
            rot += w * omega.cross(&ri).norm_squared();
            points.push(center + ri);
        }
        let trans = Vector3::new(qd[0], qd[1], qd[2]).norm_squared();
        let u = law
            .raw_potential(&MultiConfig::from_raw(&points), shape.masses())
            .unwrap_or(0.0);
        0.5 * m0 * (trans + rot) - u
    };

    let mut data: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::with_capacity(samples.len());
    let mut prev: Option<[f64; 3]> = None;
    for (t, s) in samples {
        let mut ang = euler_zxz_angles(&s.rotation.0);
        if let Some(p) = prev {
            ang[0] = unwrap_angle(p[0], ang[0]);
            ang[2] = unwrap_angle(p[2], ang[2]);
        }
        prev = Some(ang);
        let w = euler_zxz_rate_matrix(ang[0], ang[1]);
        let rates = w.lu().solve(&s.omega.v).unwrap_or_else(|| Vector3::repeat(f64::NAN));
        data.push((
            *t,
            vec![s.p_cen.p.x, s.p_cen.p.y, s.p_cen.p.z, ang[0], ang[1], ang[2]],
            vec![s.v_cen.v.x, s.v_cen.v.y, s.v_cen.v.z, rates.x, rates.y, rates.z],
        ));
    }
    lagrange_residual_samples(lag, &data, |q| q[4].sin() > EULER_CHART_MARGIN)
}
