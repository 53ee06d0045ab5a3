//! Fixed-step time integrators.
//!
//! * [`integrate_rigid`]: Runge-Kutta-Munthe-Kaas on `(p_cen, v_cen, R, Ω)`,
//!   driven by the center equation and Euler's equation. The attitude is
//!   advanced by the exponential map, so rigidity holds structurally.
//! * [`integrate_dae_oracle`]: the unsplit Newton law on all node
//!   coordinates with Lagrange multipliers on every pairwise length
//!   constraint, followed by projection onto the constraint manifold.
//! * [`integrate_chart`]: a particle on a chart, `ÿ = −Γ(ẏ, ẏ) + g_con⁻¹F/m`.
//! * [`integrate_free`]: unconstrained particles.
//!
//! Every integrator returns one [`TrajectoryRecord`] for the initial state
//! and one per `record_stride` steps (always including the last). A failing
//! step aborts with the records gathered so far.

use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

use crate::dynamics::{evaluate_force, newton_rhs_with_force, reaction_per_node, ForceLaw};
use crate::error::{Error, Result};
use crate::geom3::{Covec3, Point3, Rotation, Vec3};
use crate::multibody::{MassSpec, MultiConfig, MultiCovec, MultiVec};
use crate::rigid::{RigidShape, RigidState};
use crate::surface::{coordinate_acceleration, reaction_force, Chart, ChartPoint};
use crate::units::{Dim, Quantity};

/// Singular values of the constraint system below this fraction of the
/// largest are dropped by the least-squares multiplier solve.
pub const MULTIPLIER_RCOND: f64 = 1e-10;
/// Maximum Gauss-Newton iterations of the position projection.
pub const MAX_PROJECTION_ITERS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Rk4,
    ExplicitEuler,
}

impl Method {
    fn tableau(self) -> Tableau {
        match self {
            Method::Rk4 => Tableau {
                a: &[&[], &[0.5], &[0.0, 0.5], &[0.0, 0.0, 1.0]],
                b: &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
                c: &[0.0, 0.5, 0.5, 1.0],
            },
            Method::ExplicitEuler => Tableau {
                a: &[&[]],
                b: &[1.0],
                c: &[0.0],
            },
        }
    }
}

struct Tableau {
    a: &'static [&'static [f64]],
    b: &'static [f64],
    c: &'static [f64],
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig {
    /// Step size, dimension `T`.
    pub dt: Quantity,
    pub steps: usize,
    pub method: Method,
    /// Tolerance of the constraint projections and of attitude drift.
    pub projection_tol: f64,
    /// Record every `record_stride`-th step (the final step always).
    pub record_stride: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64, steps: usize) -> Result<Self> {
        let cfg = IntegratorConfig {
            dt: Quantity::new(dt, Dim::TIME),
            steps,
            method: Method::Rk4,
            projection_tol: 1e-12,
            record_stride: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride.max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.dt.dim.expect(Dim::TIME, "time step")?;
        if !(self.dt.value > 0.0 && self.dt.value.is_finite()) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {}", self.dt.value)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidInput("at least one step is required".into()));
        }
        if !(self.projection_tol > 0.0) {
            return Err(Error::InvalidInput("projection tolerance must be positive".into()));
        }
        Ok(())
    }

    fn records_at(&self, step: usize) -> bool {
        step == self.steps || step % self.record_stride.max(1) == 0
    }
}

/// State carried by a record.
#[derive(Clone, Debug, PartialEq)]
pub enum TrajectoryState {
    Rigid(RigidState),
    Chart(ChartPoint),
    /// Raw node positions and velocities.
    Nodes,
}

/// Energy and momenta of the node system. Angular momentum is taken about
/// the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conserved {
    pub kinetic: Quantity,
    pub potential: Option<Quantity>,
    pub linear_momentum: Covec3,
    pub angular_momentum: Covec3,
}

impl Conserved {
    /// `K + U` when the force law is conservative, otherwise `K`.
    pub fn energy(&self) -> Quantity {
        Quantity::new(
            self.kinetic.value + self.potential.map_or(0.0, |u| u.value),
            Dim::ENERGY,
        )
    }

    fn evaluate(law: &ForceLaw, config: &MultiConfig, vel: &MultiVec, masses: &MassSpec) -> Self {
        let mut k = 0.0;
        let mut p = Vector3::zeros();
        let mut l = Vector3::zeros();
        for ((x, v), m) in config.points.iter().zip(&vel.vs).zip(masses.masses()) {
            k += 0.5 * m * v.norm_squared();
            p += v * *m;
            l += x.p.cross(v) * *m;
        }
        Conserved {
            kinetic: Quantity::new(k, Dim::ENERGY),
            potential: law.potential(config, masses),
            linear_momentum: Covec3::from_raw(p, Dim::MOMENTUM),
            angular_momentum: Covec3::from_raw(l, Dim::ANGULAR_MOMENTUM),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub time: f64,
    pub state: TrajectoryState,
    pub node_positions: MultiConfig,
    pub node_velocities: MultiVec,
    pub forces: MultiCovec,
    pub reactions: MultiCovec,
    pub conserved: Conserved,
    /// `max |‖pᵢ − pⱼ‖ − l_ij|` over constrained pairs.
    pub constraint_residual: f64,
}

/// A run that failed part way, with the records produced before the failure.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct Aborted {
    pub records: Vec<TrajectoryRecord>,
    #[source]
    pub error: Error,
}

impl From<Aborted> for Error {
    fn from(a: Aborted) -> Error {
        a.error
    }
}

pub type Trajectory = std::result::Result<Vec<TrajectoryRecord>, Aborted>;

fn rk_step<F>(tab: &Tableau, t: f64, dt: f64, y: &[f64], mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let mut ks: Vec<Vec<f64>> = Vec::with_capacity(tab.b.len());
    for (i, row) in tab.a.iter().enumerate() {
        let mut yi = y.to_vec();
        for (j, aij) in row.iter().enumerate() {
            if *aij != 0.0 {
                for (s, k) in yi.iter_mut().zip(&ks[j]) {
                    *s += dt * aij * k;
                }
            }
        }
        ks.push(f(t + tab.c[i] * dt, &yi)?);
    }
    let mut out = y.to_vec();
    for (bi, k) in tab.b.iter().zip(&ks) {
        for (s, kk) in out.iter_mut().zip(k) {
            *s += dt * bi * kk;
        }
    }
    Ok(out)
}

fn v3(s: &[f64], at: usize) -> Vector3<f64> {
    Vector3::new(s[at], s[at + 1], s[at + 2])
}

fn max_length_residual(config: &MultiConfig, lengths: &[Vec<f64>]) -> f64 {
    let n = config.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (config.points[i].p - config.points[j].p).norm();
            worst = worst.max((d - lengths[i][j]).abs());
        }
    }
    worst
}

/// Angular increment rate in the Lie algebra: `θ̇ = dexp⁻¹_θ(Ω)`.
fn dexpinv(theta: &Vector3<f64>, omega: &Vector3<f64>) -> Vector3<f64> {
    omega - theta.cross(omega) * 0.5 + theta.cross(&theta.cross(omega)) / 12.0
}

fn rigid_record(shape: &RigidShape, state: &RigidState, law: &ForceLaw, t: f64, step: usize) -> Result<TrajectoryRecord> {
    let pos = shape.node_positions(state);
    let vel = shape.node_velocities(state);
    let forces = evaluate_force(law, t, &pos, &vel, shape.masses())?;
    let reactions = reaction_per_node(shape, state, &forces)?;
    Ok(TrajectoryRecord {
        step,
        time: t,
        state: TrajectoryState::Rigid(*state),
        constraint_residual: max_length_residual(&pos, shape.lengths()),
        conserved: Conserved::evaluate(law, &pos, &vel, shape.masses()),
        node_positions: pos,
        node_velocities: vel,
        forces,
        reactions,
    })
}

/// Reduced rigid-body integration with the exponential-map attitude update.
pub fn integrate_rigid(shape: &RigidShape, state0: &RigidState, law: &ForceLaw, cfg: &IntegratorConfig) -> Trajectory {
    let mut records = Vec::new();
    let fail = |records: Vec<TrajectoryRecord>, error: Error| Aborted { records, error };
    if let Err(e) = cfg.validate().and_then(|_| shape.validate_state(state0)) {
        return Err(fail(records, e));
    }
    let tab = cfg.method.tableau();
    let dt = cfg.dt.value;
    let mut state = *state0;
    match rigid_record(shape, &state, law, 0.0, 0) {
        Ok(r) => records.push(r),
        Err(e) => return Err(fail(records, e.at_step(0))),
    }
    for step in 1..=cfg.steps {
        let t0 = (step - 1) as f64 * dt;
        let r0 = state.rotation;
        let y0 = [
            state.p_cen.p.as_slice(),
            state.v_cen.v.as_slice(),
            state.omega.v.as_slice(),
            &[0.0; 3],
        ]
        .concat();
        let stage_state = |y: &[f64]| {
            let theta = v3(y, 9);
            let mut s = RigidState {
                p_cen: Point3::from_raw(v3(y, 0)),
                rotation: Rotation::exp(theta).compose(&r0),
                v_cen: Vec3::from_raw(v3(y, 3), Dim::VELOCITY),
                omega: Vec3::from_raw(v3(y, 6), Dim::ANGULAR_VELOCITY),
            };
            shape.gauge_fix(&mut s);
            (s, theta)
        };
        let stepped = rk_step(&tab, t0, dt, &y0, |t, y| {
            let (s, theta) = stage_state(y);
            let pos = shape.node_positions(&s);
            let vel = shape.node_velocities(&s);
            let f = evaluate_force(law, t, &pos, &vel, shape.masses())?;
            let (dv, dw) = newton_rhs_with_force(shape, &s, &f)?;
            let dth = dexpinv(&theta, &s.omega.v);
            Ok([
                s.v_cen.v.as_slice(),
                dv.v.as_slice(),
                dw.v.as_slice(),
                dth.as_slice(),
            ]
            .concat())
        });
        let y1 = match stepped {
            Ok(y) => y,
            Err(e) => return Err(fail(records, e.at_step(step))),
        };
        let (mut next, _) = stage_state(&y1);
        next.rotation = next.rotation.reorthonormalize();
        shape.gauge_fix(&mut next);
        if !(next.p_cen.p.iter().chain(next.omega.v.iter()).chain(next.v_cen.v.iter()).all(|x| x.is_finite())) {
            return Err(fail(
                records,
                Error::InvalidInput("state became non-finite".into()).at_step(step),
            ));
        }
        state = next;
        if cfg.records_at(step) {
            match rigid_record(shape, &state, law, step as f64 * dt, step) {
                Ok(r) => records.push(r),
                Err(e) => return Err(fail(records, e.at_step(step))),
            }
        }
    }
    Ok(records)
}

/// Pairwise length constraints `½(|pᵢ − pⱼ|² − l²ᵢⱼ) = 0` on all pairs.
struct PairConstraints {
    pairs: Vec<(usize, usize, f64)>,
    inv_mass: Vec<f64>,
}

impl PairConstraints {
    fn new(masses: &MassSpec, lengths: &[Vec<f64>]) -> Self {
        let n = masses.len();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((i, j, lengths[i][j]));
            }
        }
        PairConstraints {
            pairs,
            inv_mass: masses.masses().iter().map(|m| 1.0 / m).collect(),
        }
    }

    fn jacobian(&self, x: &[Vector3<f64>]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.pairs.len(), 3 * x.len());
        for (row, &(a, b, _)) in self.pairs.iter().enumerate() {
            let d = x[a] - x[b];
            for k in 0..3 {
                j[(row, 3 * a + k)] = d[k];
                j[(row, 3 * b + k)] = -d[k];
            }
        }
        j
    }

    fn inv_mass_diag(&self) -> DVector<f64> {
        DVector::from_iterator(
            3 * self.inv_mass.len(),
            self.inv_mass.iter().flat_map(|w| [*w; 3]),
        )
    }

    /// `(J M⁻¹ Jᵀ)⁺ rhs`.
    fn solve_multipliers(&self, j: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
        let minv = self.inv_mass_diag();
        let jm = DMatrix::from_fn(j.nrows(), j.ncols(), |r, c| j[(r, c)] * minv[c]);
        let a = &jm * j.transpose();
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let eps = MULTIPLIER_RCOND * smax.max(f64::MIN_POSITIVE);
        svd.solve(rhs, eps).expect("u and v_t requested")
    }

    /// Correction `−M⁻¹Jᵀ(JM⁻¹Jᵀ)⁺ r` for a constraint-space residual `r`.
    fn correction(&self, j: &DMatrix<f64>, r: &DVector<f64>) -> DVector<f64> {
        let lambda = self.solve_multipliers(j, r);
        let mut dx = -(j.transpose() * lambda);
        let minv = self.inv_mass_diag();
        dx.component_mul_assign(&minv);
        dx
    }

    fn position_residual(&self, x: &[Vector3<f64>]) -> DVector<f64> {
        DVector::from_iterator(
            self.pairs.len(),
            self.pairs
                .iter()
                .map(|&(a, b, l)| 0.5 * ((x[a] - x[b]).norm_squared() - l * l)),
        )
    }

    fn max_length_error(&self, x: &[Vector3<f64>]) -> f64 {
        self.pairs
            .iter()
            .map(|&(a, b, l)| ((x[a] - x[b]).norm() - l).abs())
            .fold(0.0, f64::max)
    }

    fn velocity_residual(&self, x: &[Vector3<f64>], v: &[Vector3<f64>]) -> f64 {
        self.pairs
            .iter()
            .map(|&(a, b, _)| (x[a] - x[b]).dot(&(v[a] - v[b])).abs())
            .fold(0.0, f64::max)
    }

    /// Accelerations and per-node reactions `Σⱼ λᵢⱼ (pᵢ − pⱼ)`.
    fn accelerations(&self, x: &[Vector3<f64>], v: &[Vector3<f64>], f: &[Vector3<f64>]) -> Result<(Vec<Vector3<f64>>, Vec<Vector3<f64>>)> {
        let n = x.len();
        let j = self.jacobian(x);
        let fm = DVector::from_iterator(
            3 * n,
            f.iter().zip(&self.inv_mass).flat_map(|(ff, w)| [ff.x * w, ff.y * w, ff.z * w]),
        );
        let quad = DVector::from_iterator(
            self.pairs.len(),
            self.pairs.iter().map(|&(a, b, _)| (v[a] - v[b]).norm_squared()),
        );
        let rhs = -(&quad + &j * &fm);
        let lambda = self.solve_multipliers(&j, &rhs);
        let mut reactions = vec![Vector3::zeros(); n];
        for (row, &(a, b, _)) in self.pairs.iter().enumerate() {
            let d = (x[a] - x[b]) * lambda[row];
            reactions[a] += d;
            reactions[b] -= d;
        }
        let acc: Vec<Vector3<f64>> = (0..n)
            .map(|i| (f[i] + reactions[i]) * self.inv_mass[i])
            .collect();
        // the least-squares multipliers must still satisfy the acceleration constraint
        let scale = quad.amax() + (&j * &fm).amax();
        let residual = self
            .pairs
            .iter()
            .zip(quad.iter())
            .map(|(&(a, b, _), q)| ((x[a] - x[b]).dot(&(acc[a] - acc[b])) + q).abs())
            .fold(0.0, f64::max);
        if residual > 1e-8 * scale.max(1.0) {
            return Err(Error::SingularConstraintJacobian { residual });
        }
        Ok((acc, reactions))
    }

    fn project(&self, x: &mut [Vector3<f64>], v: &mut [Vector3<f64>], tol: f64) -> Result<()> {
        let n = x.len();
        let mut converged = self.max_length_error(x) <= tol;
        for _ in 0..MAX_PROJECTION_ITERS {
            if converged {
                break;
            }
            let j = self.jacobian(x);
            let dx = self.correction(&j, &self.position_residual(x));
            for i in 0..n {
                x[i] += v3(dx.as_slice(), 3 * i);
            }
            converged = self.max_length_error(x) <= tol;
        }
        if !converged {
            return Err(Error::SingularConstraintJacobian {
                residual: self.max_length_error(x),
            });
        }
        let j = self.jacobian(x);
        let vv = DVector::from_iterator(3 * n, v.iter().flat_map(|w| [w.x, w.y, w.z]));
        let dv = self.correction(&j, &(&j * &vv));
        for i in 0..n {
            v[i] += v3(dv.as_slice(), 3 * i);
        }
        Ok(())
    }
}

fn flatten(vs: &[Vector3<f64>]) -> Vec<f64> {
    vs.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
}

fn unflatten(s: &[f64]) -> Vec<Vector3<f64>> {
    s.chunks_exact(3).map(|c| Vector3::new(c[0], c[1], c[2])).collect()
}

fn check_nodes(positions: &MultiConfig, velocities: &MultiVec, masses: &MassSpec) -> Result<()> {
    velocities.dim.expect(Dim::VELOCITY, "node velocities")?;
    if positions.len() != masses.len() || velocities.len() != masses.len() {
        return Err(Error::LengthMismatch {
            context: "node state",
            left: masses.len(),
            right: if positions.len() != masses.len() { positions.len() } else { velocities.len() },
        });
    }
    Ok(())
}

/// Full-space Newton law with Lagrange multipliers on all pairwise lengths.
///
/// Reactions are the per-node sums `Σⱼ λᵢⱼ g♭(pᵢ − pⱼ)`; individual
/// multipliers are not unique for `n ≥ 4`, their node sums are.
pub fn integrate_dae_oracle(
    positions0: &MultiConfig,
    velocities0: &MultiVec,
    masses: &MassSpec,
    lengths: &[Vec<f64>],
    law: &ForceLaw,
    cfg: &IntegratorConfig,
) -> Trajectory {
    let mut records = Vec::new();
    let fail = |records: Vec<TrajectoryRecord>, error: Error| Aborted { records, error };
    if let Err(e) = cfg.validate().and_then(|_| check_nodes(positions0, velocities0, masses)) {
        return Err(fail(records, e));
    }
    let n = masses.len();
    if lengths.len() != n || lengths.iter().any(|r| r.len() != n) {
        return Err(fail(
            records,
            Error::LengthMismatch {
                context: "constraint lengths",
                left: n,
                right: lengths.len(),
            },
        ));
    }
    let cons = PairConstraints::new(masses, lengths);
    let x0: Vec<Vector3<f64>> = positions0.points.iter().map(|p| p.p).collect();
    let v0 = velocities0.vs.clone();
    let scale = x0.iter().map(|p| p.norm()).fold(1.0, f64::max);
    let vscale = v0.iter().map(|v| v.norm()).fold(1.0, f64::max);
    if cons.max_length_error(&x0) > 1e-10 * scale || cons.velocity_residual(&x0, &v0) > 1e-10 * scale * vscale {
        return Err(fail(
            records,
            Error::InvalidInput("initial state violates the length constraints".into()),
        ));
    }

    let dt = cfg.dt.value;
    let tab = cfg.method.tableau();
    let record = |x: &[Vector3<f64>], v: &[Vector3<f64>], t: f64, step: usize| -> Result<TrajectoryRecord> {
        let pos = MultiConfig::from_raw(x);
        let vel = MultiVec::from_raw(v.to_vec(), Dim::VELOCITY);
        let forces = evaluate_force(law, t, &pos, &vel, masses)?;
        let (_, reactions) = cons.accelerations(x, v, &forces.cs)?;
        Ok(TrajectoryRecord {
            step,
            time: t,
            state: TrajectoryState::Nodes,
            constraint_residual: cons.max_length_error(x),
            conserved: Conserved::evaluate(law, &pos, &vel, masses),
            node_positions: pos,
            node_velocities: vel,
            forces,
            reactions: MultiCovec::from_raw(reactions, Dim::FORCE),
        })
    };

    let (mut x, mut v) = (x0, v0);
    match record(&x, &v, 0.0, 0) {
        Ok(r) => records.push(r),
        Err(e) => return Err(fail(records, e.at_step(0))),
    }
    for step in 1..=cfg.steps {
        let t0 = (step - 1) as f64 * dt;
        let y0 = [flatten(&x), flatten(&v)].concat();
        let stepped = rk_step(&tab, t0, dt, &y0, |t, y| {
            let (xs, vs) = y.split_at(3 * n);
            let xs = unflatten(xs);
            let vs = unflatten(vs);
            let pos = MultiConfig::from_raw(&xs);
            let vel = MultiVec::from_raw(vs.clone(), Dim::VELOCITY);
            let f = evaluate_force(law, t, &pos, &vel, masses)?;
            let (acc, _) = cons.accelerations(&xs, &vs, &f.cs)?;
            Ok([flatten(&vs), flatten(&acc)].concat())
        })
        .and_then(|y1| {
            let (xs, vs) = y1.split_at(3 * n);
            let mut xs = unflatten(xs);
            let mut vs = unflatten(vs);
            cons.project(&mut xs, &mut vs, cfg.projection_tol * scale)?;
            Ok((xs, vs))
        });
        match stepped {
            Ok((xs, vs)) => {
                x = xs;
                v = vs;
            }
            Err(e) => return Err(fail(records, e.at_step(step))),
        }
        if cfg.records_at(step) {
            match record(&x, &v, step as f64 * dt, step) {
                Ok(r) => records.push(r),
                Err(e) => return Err(fail(records, e.at_step(step))),
            }
        }
    }
    Ok(records)
}

/// Unconstrained particles under `law`.
pub fn integrate_free(positions0: &MultiConfig, velocities0: &MultiVec, masses: &MassSpec, law: &ForceLaw, cfg: &IntegratorConfig) -> Trajectory {
    let mut records = Vec::new();
    let fail = |records: Vec<TrajectoryRecord>, error: Error| Aborted { records, error };
    if let Err(e) = cfg.validate().and_then(|_| check_nodes(positions0, velocities0, masses)) {
        return Err(fail(records, e));
    }
    let n = masses.len();
    let dt = cfg.dt.value;
    let tab = cfg.method.tableau();
    let record = |y: &[f64], t: f64, step: usize| -> Result<TrajectoryRecord> {
        let pos = MultiConfig::from_raw(&unflatten(&y[..3 * n]));
        let vel = MultiVec::from_raw(unflatten(&y[3 * n..]), Dim::VELOCITY);
        let forces = evaluate_force(law, t, &pos, &vel, masses)?;
        Ok(TrajectoryRecord {
            step,
            time: t,
            state: TrajectoryState::Nodes,
            constraint_residual: 0.0,
            conserved: Conserved::evaluate(law, &pos, &vel, masses),
            node_positions: pos,
            node_velocities: vel,
            forces,
            reactions: MultiCovec::zeros(n, Dim::FORCE),
        })
    };
    let mut y: Vec<f64> = positions0
        .points
        .iter()
        .flat_map(|p| [p.p.x, p.p.y, p.p.z])
        .chain(flatten(&velocities0.vs))
        .collect();
    match record(&y, 0.0, 0) {
        Ok(r) => records.push(r),
        Err(e) => return Err(fail(records, e.at_step(0))),
    }
    for step in 1..=cfg.steps {
        let t0 = (step - 1) as f64 * dt;
        let stepped = rk_step(&tab, t0, dt, &y, |t, s| {
            let pos = MultiConfig::from_raw(&unflatten(&s[..3 * n]));
            let vel = MultiVec::from_raw(unflatten(&s[3 * n..]), Dim::VELOCITY);
            let f = evaluate_force(law, t, &pos, &vel, masses)?;
            let acc: Vec<f64> = f
                .cs
                .iter()
                .zip(masses.masses())
                .flat_map(|(ff, m)| [ff.x / m, ff.y / m, ff.z / m])
                .collect();
            Ok([&s[3 * n..], acc.as_slice()].concat())
        });
        match stepped {
            Ok(next) => y = next,
            Err(e) => return Err(fail(records, e.at_step(step))),
        }
        if cfg.records_at(step) {
            match record(&y, step as f64 * dt, step) {
                Ok(r) => records.push(r),
                Err(e) => return Err(fail(records, e.at_step(step))),
            }
        }
    }
    Ok(records)
}

/// A particle of mass `mass` moving on `chart` under `law` (evaluated on the
/// one-node system at the embedded point).
pub fn integrate_chart(chart: &Chart, cp0: &ChartPoint, law: &ForceLaw, mass: Quantity, cfg: &IntegratorConfig) -> Trajectory {
    let mut records = Vec::new();
    let fail = |records: Vec<TrajectoryRecord>, error: Error| Aborted { records, error };
    let masses = match mass
        .value_in(Dim::MASS, "particle mass")
        .and_then(|m| MassSpec::new(vec![m]))
    {
        Ok(m) => m,
        Err(e) => return Err(fail(records, e)),
    };
    if let Err(e) = cfg.validate() {
        return Err(fail(records, e));
    }
    let l = chart.dim_l();
    if cp0.y.len() != l || cp0.y_dot.len() != l {
        return Err(fail(
            records,
            Error::LengthMismatch {
                context: "chart point",
                left: l,
                right: cp0.y.len(),
            },
        ));
    }
    let dt = cfg.dt.value;
    let tab = cfg.method.tableau();
    let node = |y: &[f64], yd: &[f64]| {
        let t = chart.tangents(y);
        let v: Vector3<f64> = t.iter().zip(yd).map(|(a, s)| a * *s).sum();
        (
            MultiConfig::new(vec![chart.point(y)]),
            MultiVec::from_raw(vec![v], Dim::VELOCITY),
        )
    };
    let record = |y: &[f64], t: f64, step: usize| -> Result<TrajectoryRecord> {
        let (yy, yd) = y.split_at(l);
        let (pos, vel) = node(yy, yd);
        let forces = evaluate_force(law, t, &pos, &vel, &masses)?;
        let r = reaction_force(chart, yy, yd, forces.get(0), mass)?;
        Ok(TrajectoryRecord {
            step,
            time: t,
            state: TrajectoryState::Chart(ChartPoint {
                y: yy.to_vec(),
                y_dot: yd.to_vec(),
            }),
            constraint_residual: 0.0,
            conserved: Conserved::evaluate(law, &pos, &vel, &masses),
            node_positions: pos,
            node_velocities: vel,
            forces,
            reactions: MultiCovec::from_raw(vec![r.a], Dim::FORCE),
        })
    };
    let mut y = [cp0.y.as_slice(), cp0.y_dot.as_slice()].concat();
    match record(&y, 0.0, 0) {
        Ok(r) => records.push(r),
        Err(e) => return Err(fail(records, e.at_step(0))),
    }
    for step in 1..=cfg.steps {
        let t0 = (step - 1) as f64 * dt;
        let stepped = rk_step(&tab, t0, dt, &y, |t, s| {
            let (yy, yd) = s.split_at(l);
            let (pos, vel) = node(yy, yd);
            let f = evaluate_force(law, t, &pos, &vel, &masses)?;
            let acc = coordinate_acceleration(chart, yy, yd, f.get(0), mass)?;
            Ok([yd, acc.as_slice()].concat())
        });
        match stepped {
            Ok(next) => y = next,
            Err(e) => return Err(fail(records, e.at_step(step))),
        }
        if cfg.records_at(step) {
            match record(&y, step as f64 * dt, step) {
                Ok(r) => records.push(r),
                Err(e) => return Err(fail(records, e.at_step(step))),
            }
        }
    }
    Ok(records)
}
