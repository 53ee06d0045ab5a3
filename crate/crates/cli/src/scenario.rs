//! Scenario files: TOML text with a `system` table, optional `[[forces]]`,
//! an `[integrator]` table and optional `[outputs]`.
//!
//! Particle indices in force specs and in diagnostics are 1-based.

use geomech::dynamics::{PairLaw, PairTerm};
use geomech::integrate::Method;
use geomech::rigid::RIGIDITY_TOL;
use geomech::{build_shape, Chart, ChartPoint, Dim, ForceLaw, IntegratorConfig, MassSpec, MultiConfig, MultiVec, Point3, Quantity, Vec3};
use nalgebra::Vector3;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    #[serde(default)]
    compare_oracle: bool,
    system: RawSystem,
    #[serde(default)]
    forces: Vec<RawForce>,
    integrator: RawIntegrator,
    #[serde(default)]
    outputs: RawOutputs,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum RawSystem {
    Rigid {
        particles: Vec<RawParticle>,
    },
    Surface {
        chart: String,
        params: Option<Vec<f64>>,
        mass: f64,
        y0: Vec<f64>,
        ydot0: Vec<f64>,
    },
    FreeMulti {
        particles: Vec<RawParticle>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParticle {
    mass: f64,
    position: [f64; 3],
    #[serde(default)]
    velocity: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawForce {
    Uniform { acceleration: [f64; 3] },
    Spring { i: usize, j: usize, k: f64, rest: Option<f64> },
    InverseSquare { i: usize, j: usize, k: f64 },
    Central { origin: [f64; 3], strength: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    dt: f64,
    steps: usize,
    #[serde(default = "default_method")]
    method: String,
    rotation_update: Option<String>,
    projection_tol: Option<f64>,
}

fn default_method() -> String {
    "rk4".into()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutputs {
    trajectory_path: Option<String>,
    reactions_path: Option<String>,
    report_path: Option<String>,
    sample_stride: Option<usize>,
}

/// A particle system with initial data, checked for consistency.
#[derive(Debug, Clone)]
pub enum System {
    Rigid {
        masses: MassSpec,
        positions: MultiConfig,
        velocities: MultiVec,
    },
    Surface {
        chart: String,
        mass: f64,
        y0: Vec<f64>,
        ydot0: Vec<f64>,
    },
    FreeMulti {
        masses: MassSpec,
        positions: MultiConfig,
        velocities: MultiVec,
    },
}

impl System {
    pub fn kind(&self) -> &'static str {
        match self {
            System::Rigid { .. } => "rigid",
            System::Surface { .. } => "surface",
            System::FreeMulti { .. } => "free_multi",
        }
    }

    pub fn particles(&self) -> usize {
        match self {
            System::Rigid { masses, .. } | System::FreeMulti { masses, .. } => masses.len(),
            System::Surface { .. } => 1,
        }
    }

    pub fn chart(&self) -> Option<Chart> {
        match self {
            System::Surface { chart, .. } => Chart::builtin(chart).ok(),
            _ => None,
        }
    }

    pub fn chart_point(&self) -> Option<ChartPoint> {
        match self {
            System::Surface { y0, ydot0, .. } => ChartPoint::new(y0.clone(), ydot0.clone()).ok(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForceSpec {
    Uniform { acceleration: Vector3<f64> },
    Spring { i: usize, j: usize, k: f64, rest: f64 },
    InverseSquare { i: usize, j: usize, k: f64 },
    Central { origin: Vector3<f64>, strength: f64 },
}

#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub trajectory_path: Option<String>,
    pub reactions_path: Option<String>,
    pub report_path: Option<String>,
    pub sample_stride: usize,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: Option<String>,
    pub system: System,
    pub forces: Vec<ForceSpec>,
    pub dt: f64,
    /// May be zero, in which case nothing is integrated.
    pub steps: usize,
    pub method: Method,
    pub projection_tol: f64,
    pub outputs: Outputs,
    pub compare_oracle: bool,
}

impl Scenario {
    /// Force law with 0-based particle indices.
    pub fn force_law(&self) -> ForceLaw {
        let mut pairs = Vec::new();
        let mut laws = Vec::new();
        for f in &self.forces {
            match *f {
                ForceSpec::Uniform { acceleration } => laws.push(ForceLaw::Uniform {
                    accel: Vec3::from_raw(acceleration, Dim::ACCELERATION),
                }),
                ForceSpec::Spring { i, j, k, rest } => pairs.push(PairTerm {
                    i: i - 1,
                    j: j - 1,
                    law: PairLaw::Spring { k, rest },
                }),
                ForceSpec::InverseSquare { i, j, k } => pairs.push(PairTerm {
                    i: i - 1,
                    j: j - 1,
                    law: PairLaw::InverseSquare { k },
                }),
                ForceSpec::Central { origin, strength } => laws.push(ForceLaw::Central {
                    origin: Point3::from_raw(origin),
                    strength,
                }),
            }
        }
        if !pairs.is_empty() {
            laws.push(ForceLaw::Pairwise(pairs));
        }
        ForceLaw::Sum(laws)
    }

    /// Integrator settings for `steps ≥ 1`.
    pub fn integrator_config(&self) -> Option<IntegratorConfig> {
        let mut cfg = IntegratorConfig::new(self.dt, self.steps).ok()?;
        cfg.method = self.method;
        cfg.projection_tol = self.projection_tol;
        Some(cfg.with_stride(self.outputs.sample_stride))
    }
}

fn finite3(v: &[f64; 3]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn check_particles(particles: &[RawParticle], errors: &mut Vec<String>) -> Option<(MassSpec, MultiConfig, MultiVec)> {
    let before = errors.len();
    if particles.is_empty() {
        errors.push("system has no particles".into());
    }
    for (k, p) in particles.iter().enumerate() {
        if !(p.mass > 0.0 && p.mass.is_finite()) {
            errors.push(format!("particle {}: mass must be positive, got {}", k + 1, p.mass));
        }
        if !finite3(&p.position) {
            errors.push(format!("particle {}: position is not finite", k + 1));
        }
        if !finite3(&p.velocity) {
            errors.push(format!("particle {}: velocity is not finite", k + 1));
        }
    }
    for a in 0..particles.len() {
        for b in (a + 1)..particles.len() {
            if particles[a].position == particles[b].position {
                errors.push(format!("particles {} and {} coincide", a + 1, b + 1));
            }
        }
    }
    if errors.len() > before {
        return None;
    }
    let masses = MassSpec::new(particles.iter().map(|p| p.mass).collect()).ok()?;
    let positions = MultiConfig::from_raw(&particles.iter().map(|p| Vector3::from(p.position)).collect::<Vec<_>>());
    let velocities = MultiVec::from_raw(particles.iter().map(|p| Vector3::from(p.velocity)).collect(), Dim::VELOCITY);
    Some((masses, positions, velocities))
}

/// Every pair `(i, j)` whose length rate `(pᵢ − pⱼ)·(vᵢ − vⱼ)` exceeds the
/// rigidity tolerance, 1-based.
fn rigidity_violations(masses: &MassSpec, positions: &MultiConfig, velocities: &MultiVec) -> Vec<(usize, usize, f64)> {
    let w = masses.weights();
    let com: Vector3<f64> = positions.points.iter().zip(w).map(|(p, m)| p.p * *m).sum();
    let v_cen: Vector3<f64> = velocities.vs.iter().zip(w).map(|(v, m)| v * *m).sum();
    let rs: Vec<Vector3<f64>> = positions.points.iter().map(|p| p.p - com).collect();
    let vrel: Vec<Vector3<f64>> = velocities.vs.iter().map(|v| v - v_cen).collect();
    let scale = rs.iter().map(|r| r.norm()).fold(0.0, f64::max) * vrel.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut out = Vec::new();
    for i in 0..rs.len() {
        for j in (i + 1)..rs.len() {
            let residual = (rs[i] - rs[j]).dot(&(vrel[i] - vrel[j]));
            if residual.abs() > RIGIDITY_TOL * scale {
                out.push((i + 1, j + 1, residual));
            }
        }
    }
    out
}

/// Parse and validate scenario text, reporting every problem found.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let mut errors = Vec::new();

    let (system, n) = match raw.system {
        RawSystem::Rigid { particles } => {
            if particles.len() < 2 {
                errors.push("a rigid system needs at least two particles".into());
            }
            match check_particles(&particles, &mut errors) {
                Some((masses, positions, velocities)) if particles.len() >= 2 => {
                    let bad = rigidity_violations(&masses, &positions, &velocities);
                    for (i, j, r) in &bad {
                        errors.push(format!(
                            "initial velocities are not rigid: pair ({i},{j}) has length rate {r:.3e}"
                        ));
                    }
                    if bad.is_empty() {
                        match build_shape(&positions, &masses) {
                            Ok(shape) => {
                                if let Err(e) = shape.initial_state(&velocities) {
                                    errors.push(format!("initial velocities are not rigid: {e}"));
                                }
                            }
                            Err(e) => errors.push(format!("invalid rigid shape: {e}")),
                        }
                    }
                    let n = masses.len();
                    (
                        Some(System::Rigid {
                            masses,
                            positions,
                            velocities,
                        }),
                        n,
                    )
                }
                _ => (None, particles.len()),
            }
        }
        RawSystem::FreeMulti { particles } => {
            let n = particles.len();
            let sys = check_particles(&particles, &mut errors).map(|(masses, positions, velocities)| System::FreeMulti {
                masses,
                positions,
                velocities,
            });
            (sys, n)
        }
        RawSystem::Surface {
            chart,
            params,
            mass,
            y0,
            ydot0,
        } => {
            let chart_name = match params {
                Some(p) if !chart.contains('(') => format!(
                    "{chart}({})",
                    p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
                ),
                _ => chart,
            };
            if !(mass > 0.0 && mass.is_finite()) {
                errors.push(format!("surface particle mass must be positive, got {mass}"));
            }
            match Chart::builtin(&chart_name) {
                Ok(c) => {
                    if y0.len() != c.dim_l() || ydot0.len() != c.dim_l() {
                        errors.push(format!(
                            "chart {} has {} coordinates, got y0 of length {} and ydot0 of length {}",
                            c.name(),
                            c.dim_l(),
                            y0.len(),
                            ydot0.len()
                        ));
                    }
                }
                Err(e) => errors.push(format!("chart: {e}")),
            }
            if !y0.iter().chain(&ydot0).all(|x| x.is_finite()) {
                errors.push("chart coordinates are not finite".into());
            }
            (
                Some(System::Surface {
                    chart: chart_name,
                    mass,
                    y0,
                    ydot0,
                }),
                1,
            )
        }
    };
    let surface = matches!(system, Some(System::Surface { .. }));

    let mut forces = Vec::new();
    for (k, f) in raw.forces.iter().enumerate() {
        let label = format!("force {}", k + 1);
        let mut pair = |i: usize, j: usize| {
            let mut ok = true;
            if surface {
                errors.push(format!("{label}: pair forces need a multi-particle system"));
                return false;
            }
            for idx in [i, j] {
                if idx == 0 || idx > n {
                    errors.push(format!("{label}: particle index {idx} is outside 1..={n}"));
                    ok = false;
                }
            }
            if i == j {
                errors.push(format!("{label}: pair ({i},{j}) joins a particle to itself"));
                ok = false;
            }
            ok
        };
        match f {
            RawForce::Uniform { acceleration } => {
                if finite3(acceleration) {
                    forces.push(ForceSpec::Uniform {
                        acceleration: Vector3::from(*acceleration),
                    });
                } else {
                    errors.push(format!("{label}: acceleration is not finite"));
                }
            }
            RawForce::Spring { i, j, k, rest } => {
                if pair(*i, *j) {
                    let rest = match (rest, &system) {
                        (Some(r), _) => *r,
                        (None, Some(System::Rigid { positions, .. } | System::FreeMulti { positions, .. })) => {
                            (positions.points[i - 1].p - positions.points[j - 1].p).norm()
                        }
                        _ => 0.0,
                    };
                    if !(k.is_finite() && rest.is_finite() && rest >= 0.0) {
                        errors.push(format!("{label}: spring constants must be finite with rest length ≥ 0"));
                    }
                    forces.push(ForceSpec::Spring { i: *i, j: *j, k: *k, rest });
                }
            }
            RawForce::InverseSquare { i, j, k } => {
                if pair(*i, *j) {
                    if !k.is_finite() {
                        errors.push(format!("{label}: strength is not finite"));
                    }
                    forces.push(ForceSpec::InverseSquare { i: *i, j: *j, k: *k });
                }
            }
            RawForce::Central { origin, strength } => {
                if !(finite3(origin) && strength.is_finite()) {
                    errors.push(format!("{label}: central field parameters are not finite"));
                }
                forces.push(ForceSpec::Central {
                    origin: Vector3::from(*origin),
                    strength: *strength,
                });
            }
        }
    }

    let ig = &raw.integrator;
    if !(ig.dt > 0.0 && ig.dt.is_finite()) {
        errors.push(format!("integrator: dt must be positive, got {}", ig.dt));
    }
    let method = match ig.method.as_str() {
        "rk4" => Method::Rk4,
        "explicit_euler" => Method::ExplicitEuler,
        other => {
            errors.push(format!("integrator: unknown method '{other}' (rk4 or explicit_euler)"));
            Method::Rk4
        }
    };
    if let Some(r) = &ig.rotation_update {
        if r != "exponential_map" {
            errors.push(format!("integrator: unsupported rotation_update '{r}' (exponential_map)"));
        }
    }
    let projection_tol = ig.projection_tol.unwrap_or(1e-12);
    if !(projection_tol > 0.0 && projection_tol.is_finite()) {
        errors.push("integrator: projection_tol must be positive".into());
    }
    let stride = raw.outputs.sample_stride.unwrap_or(1);
    if stride == 0 {
        errors.push("outputs: sample_stride must be at least 1".into());
    }
    if raw.compare_oracle && !matches!(system, Some(System::Rigid { .. }) | None) {
        errors.push("compare_oracle requires a rigid system".into());
    }

    match system {
        Some(system) if errors.is_empty() => Ok(Scenario {
            name: raw.name,
            system,
            forces,
            dt: ig.dt,
            steps: ig.steps,
            method,
            projection_tol,
            outputs: Outputs {
                trajectory_path: raw.outputs.trajectory_path,
                reactions_path: raw.outputs.reactions_path,
                report_path: raw.outputs.report_path,
                sample_stride: stride,
            },
            compare_oracle: raw.compare_oracle,
        }),
        _ => Err(ScenarioError::Validation(errors)),
    }
}

/// Total mass as a quantity, for the surface particle.
pub(crate) fn surface_mass(mass: f64) -> Quantity {
    Quantity::new(mass, Dim::MASS)
}
