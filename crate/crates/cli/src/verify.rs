//! Seeded invariant checks on the system described by a scenario.

use geomech::dynamics::{reaction_per_node, reaction_per_node_expanded, split_rigid_force, PairLaw, PairTerm};
use geomech::multibody::split_vec_dia_rel;
use geomech::rigid::{angular_velocity, cotangent_moments, split_tangent, tangent_moments};
use geomech::surface::{extrinsic_acceleration, intrinsic_acceleration, reaction_force, reaction_force_explicit, second_fundamental_form};
use geomech::{build_shape, evaluate_force, Covec3, Dim, ForceLaw, MassSpec, MultiCovec, MultiVec, Result, RigidShape, RigidState, Rotation, Vec3};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::scenario::{surface_mass, Scenario, System};

pub const TRIALS: usize = 200;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &'static str, worst: f64, tolerance: f64) -> Self {
        Check {
            name,
            worst,
            tolerance,
            pass: worst <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn rvec(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    )
}

fn random_state(rng: &mut ChaCha8Rng, shape: &RigidShape) -> RigidState {
    let mut s = RigidState {
        p_cen: geomech::Point3::from_raw(rvec(rng) * 3.0),
        rotation: Rotation::exp(rvec(rng) * 3.0),
        v_cen: Vec3::from_raw(rvec(rng), Dim::VELOCITY),
        omega: Vec3::from_raw(rvec(rng) * 2.0, Dim::ANGULAR_VELOCITY),
    };
    shape.gauge_fix(&mut s);
    s
}

/// Forces with no axial torque when the body is collinear, arbitrary
/// otherwise.
fn random_force(rng: &mut ChaCha8Rng, shape: &RigidShape, state: &RigidState) -> Result<MultiCovec> {
    let n = shape.len();
    if !shape.is_degenerate() {
        return Ok(MultiCovec::from_raw((0..n).map(|_| rvec(rng)).collect(), Dim::FORCE));
    }
    let law = ForceLaw::Sum(vec![
        ForceLaw::uniform(Vec3::from_raw(rvec(rng), Dim::ACCELERATION))?,
        random_pairwise(rng, n),
    ]);
    evaluate_force(&law, 0.0, &shape.node_positions(state), &shape.node_velocities(state), shape.masses())
}

fn random_pairwise(rng: &mut ChaCha8Rng, n: usize) -> ForceLaw {
    let mut terms = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            terms.push(PairTerm {
                i,
                j,
                law: PairLaw::Spring {
                    k: rng.random_range(-2.0..2.0),
                    rest: rng.random_range(0.0..2.0),
                },
            });
        }
    }
    ForceLaw::Pairwise(terms)
}

fn rigid_checks(rng: &mut ChaCha8Rng, shape: &RigidShape) -> Result<Vec<Check>> {
    let n = shape.len();
    let (mut roundtrip, mut recon, mut moments, mut newton3, mut dual, mut annih) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..TRIALS {
        let state = random_state(rng, shape);
        let rot = state.rotation;

        let v = shape.node_velocities(&state);
        let w = angular_velocity(shape, &rot, &v)?;
        roundtrip = roundtrip.max((w.v - state.omega.v).norm() / state.omega.v.norm().max(f64::MIN_POSITIVE));

        let arb = MultiVec::from_raw((0..n).map(|_| rvec(rng)).collect(), Dim::VELOCITY);
        let split = split_tangent(shape, &rot, &arb)?;
        let back = split.reconstruct(shape, &rot);
        let err = arb.vs.iter().zip(&back.vs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        recon = recon.max(err / arb.max_norm());
        let (lin, ang) = tangent_moments(shape, &rot, &split.v_perp);
        moments = moments.max(lin.max(ang) / arb.max_norm());

        let pos = shape.node_positions(&state);
        let pair = evaluate_force(&random_pairwise(rng, n), 0.0, &pos, &v, shape.masses())?;
        let s = split_rigid_force(shape, &rot, &pair)?;
        let scale = pair.max_norm() * (1.0 + shape.offsets(&rot).iter().map(|r| r.norm()).fold(0.0, f64::max));
        newton3 = newton3.max(s.f_cen.a.norm().max(s.f_ang.a.norm()) / scale.max(f64::MIN_POSITIVE));

        let f = random_force(rng, shape, &state)?;
        let a = reaction_per_node(shape, &state, &f)?;
        let b = reaction_per_node_expanded(shape, &state, &f)?;
        let rscale = a.max_norm().max(b.max_norm()).max(f64::MIN_POSITIVE);
        let dev = a.cs.iter().zip(&b.cs).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        dual = dual.max(dev / rscale);
        let (lin, ang) = cotangent_moments(shape, &rot, &a);
        annih = annih.max(lin.max(ang) / rscale);
    }
    Ok(vec![
        Check::new("angular velocity roundtrip", roundtrip, 1e-11),
        Check::new("tangent splitting reconstruction", recon, 1e-13),
        Check::new("normal part moment conditions", moments, 1e-12),
        Check::new("pairwise forces have no rigid component", newton3, 1e-12),
        Check::new("reaction formulas agree", dual, 1e-10),
        Check::new("reaction annihilates the rigid tangent space", annih, 1e-10),
    ])
}

fn free_checks(rng: &mut ChaCha8Rng, masses: &MassSpec) -> Result<Vec<Check>> {
    let n = masses.len();
    let mut recon = 0.0f64;
    for _ in 0..TRIALS {
        let v = MultiVec::from_raw((0..n).map(|_| rvec(rng)).collect(), Dim::VELOCITY);
        let (v0, rel) = split_vec_dia_rel(&v, masses)?;
        let err = v.vs.iter().zip(&rel.vs).map(|(a, r)| (v0.v + r - a).norm()).fold(0.0, f64::max);
        recon = recon.max(err / v.max_norm());
    }
    Ok(vec![Check::new("center of mass splitting reconstruction", recon, 1e-13)])
}

fn surface_checks(rng: &mut ChaCha8Rng, scenario: &Scenario, mass: f64) -> Result<Vec<Check>> {
    let (Some(chart), Some(cp)) = (scenario.system.chart(), scenario.system.chart_point()) else {
        return Ok(Vec::new());
    };
    let m = surface_mass(mass);
    let (mut gauss, mut explicit) = (0.0f64, 0.0f64);
    for _ in 0..TRIALS {
        let yd: Vec<f64> = cp.y_dot.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let ydd: Vec<f64> = cp.y_dot.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let ext = extrinsic_acceleration(&chart, &cp.y, &yd, &ydd)?;
        let int = intrinsic_acceleration(&chart, &cp.y, &yd, &ydd)?;
        let nn = second_fundamental_form(&chart, &cp.y, &yd)?;
        let scale = ext.v.norm().max(1.0);
        gauss = gauss.max((ext.v - int.v - nn.v).norm() / scale);
        let f = Covec3::from_raw(rvec(rng), Dim::FORCE);
        let a = reaction_force(&chart, &cp.y, &yd, f, m)?;
        let b = reaction_force_explicit(&chart, &cp.y, &yd, f, m)?;
        explicit = explicit.max((a.a - b.a).norm() / a.a.norm().max(1.0));
    }
    Ok(vec![
        Check::new("Gauss split of the acceleration", gauss, 1e-8),
        Check::new("explicit coordinate reaction agrees", explicit, 1e-8),
    ])
}

/// Run the invariant suite on the scenario's system with a seeded generator.
pub fn verify(scenario: &Scenario, seed: u64) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks = match &scenario.system {
        System::Rigid { masses, positions, .. } => rigid_checks(&mut rng, &build_shape(positions, masses)?)?,
        System::FreeMulti { masses, .. } => free_checks(&mut rng, masses)?,
        System::Surface { mass, .. } => surface_checks(&mut rng, scenario, *mass)?,
    };
    Ok(VerifyReport { seed, checks })
}
