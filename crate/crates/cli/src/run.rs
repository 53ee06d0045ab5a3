//! Scenario execution and the trajectory, reaction and report files.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use geomech::integrate::{integrate_chart, integrate_dae_oracle, integrate_free, integrate_rigid, Aborted, TrajectoryRecord, TrajectoryState};
use geomech::{build_shape, Error, ForceLaw};
use nalgebra::Vector3;
use serde::Serialize;
use thiserror::Error;

use crate::scenario::{surface_mass, Scenario, System};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("{}", match .step { Some(s) => format!("numerical failure at step {s}: {message}"), None => format!("numerical failure: {message}") })]
    Numerical {
        step: Option<usize>,
        message: String,
        report: Box<RunReport>,
    },
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Prefix of default output file names.
    pub stem: String,
    /// Run the constrained reference integrator even if the scenario does
    /// not ask for it.
    pub compare_oracle: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>, stem: impl Into<String>) -> Self {
        RunOptions {
            out_dir: out_dir.into(),
            stem: stem.into(),
            compare_oracle: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub characteristic: u8,
    pub characteristic_label: &'static str,
    pub symmetry: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Drift {
    /// `max |E(t) − E(0)|` with `E = K + U`; absent for non-conservative laws.
    pub energy: Option<f64>,
    pub kinetic_energy: f64,
    /// `max |P(t) − P(0)|`.
    pub linear_momentum: f64,
    /// `max |P(t) − P(0) − ∫Σ(F + R)|`, the impulse of applied and reaction
    /// forces integrated by the trapezoid rule over recorded samples.
    pub linear_momentum_beyond_impulse: f64,
    /// Angular momentum about the origin.
    pub angular_momentum: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleComparison {
    pub max_node_deviation: f64,
    pub max_reaction_deviation: f64,
    pub max_relative_reaction_deviation: f64,
    pub oracle_max_constraint_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorInfo {
    pub step: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFiles {
    pub trajectory: String,
    pub reactions: String,
    pub report: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub system: &'static str,
    pub particles: usize,
    pub classification: Option<Classification>,
    /// `m₀λₖ`, descending.
    pub principal_momenta: Option<[f64; 3]>,
    pub steps: usize,
    pub dt: f64,
    pub records: usize,
    pub drift: Option<Drift>,
    pub max_constraint_residual: Option<f64>,
    /// Largest of `|Σ Rᵢ|` and `|Σ g♭(rᵢ) × Rᵢ|` relative to the reaction scale.
    pub max_annihilator_residual: Option<f64>,
    pub oracle: Option<OracleComparison>,
    pub files: OutputFiles,
    pub error: Option<ErrorInfo>,
    pub wall_clock_seconds: f64,
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn split_error(e: &Error) -> (Option<usize>, String) {
    match e {
        Error::AtStep { step, source } => (Some(*step), source.to_string()),
        other => (None, other.to_string()),
    }
}

fn resolve(out_dir: &Path, given: &Option<String>, default: String) -> PathBuf {
    let p = PathBuf::from(given.clone().unwrap_or(default));
    if p.is_absolute() {
        p
    } else {
        out_dir.join(p)
    }
}

fn trajectory_header(system: &System, n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 1..=n {
        for c in ["x", "y", "z", "vx", "vy", "vz"] {
            h.push(format!("{c}{i}"));
        }
    }
    match system {
        System::Rigid { .. } => {
            for c in ["pcen_x", "pcen_y", "pcen_z", "omega_x", "omega_y", "omega_z"] {
                h.push(c.into());
            }
        }
        System::Surface { y0, .. } => {
            for a in 1..=y0.len() {
                h.push(format!("q{a}"));
            }
            for a in 1..=y0.len() {
                h.push(format!("qdot{a}"));
            }
        }
        System::FreeMulti { .. } => {}
    }
    h
}

fn reactions_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 1..=n {
        for c in ["rx", "ry", "rz"] {
            h.push(format!("{c}{i}"));
        }
    }
    h
}

fn trajectory_row(r: &TrajectoryRecord) -> Vec<String> {
    let mut row = vec![fmt(r.time)];
    for (p, v) in r.node_positions.points.iter().zip(&r.node_velocities.vs) {
        row.extend(p.p.iter().chain(v.iter()).map(|x| fmt(*x)));
    }
    match &r.state {
        TrajectoryState::Rigid(s) => row.extend(s.p_cen.p.iter().chain(s.omega.v.iter()).map(|x| fmt(*x))),
        TrajectoryState::Chart(cp) => row.extend(cp.y.iter().chain(&cp.y_dot).map(|x| fmt(*x))),
        TrajectoryState::Nodes => {}
    }
    row
}

fn reactions_row(r: &TrajectoryRecord) -> Vec<String> {
    let mut row = vec![fmt(r.time)];
    for c in &r.reactions.cs {
        row.extend(c.iter().map(|x| fmt(*x)));
    }
    row
}

fn write_csv(path: &Path, header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(&header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()
}

/// Relative annihilator residual of one record, about the given center.
pub fn annihilator_residual(r: &TrajectoryRecord, center: Vector3<f64>) -> f64 {
    let mut sum = Vector3::zeros();
    let mut moment = Vector3::zeros();
    let mut scale = 0.0;
    for (p, c) in r.node_positions.points.iter().zip(&r.reactions.cs) {
        let rel = p.p - center;
        sum += c;
        moment += rel.cross(c);
        scale += c.norm() * rel.norm().max(1.0);
    }
    sum.norm().max(moment.norm()) / scale.max(1.0)
}

fn drift(records: &[TrajectoryRecord], conservative: bool) -> Option<Drift> {
    let first = records.first()?;
    let c0 = &first.conserved;
    let mut d = Drift {
        energy: conservative.then_some(0.0),
        kinetic_energy: 0.0,
        linear_momentum: 0.0,
        linear_momentum_beyond_impulse: 0.0,
        angular_momentum: 0.0,
    };
    let mut impulse = Vector3::zeros();
    let mut prev: Option<&TrajectoryRecord> = None;
    for r in records {
        if let Some(p) = prev {
            let total = |x: &TrajectoryRecord| x.forces.total().a + x.reactions.total().a;
            impulse += (total(p) + total(r)) * (0.5 * (r.time - p.time));
        }
        prev = Some(r);
        let c = &r.conserved;
        if let Some(e) = d.energy.as_mut() {
            *e = e.max((c.energy().value - c0.energy().value).abs());
        }
        d.kinetic_energy = d.kinetic_energy.max((c.kinetic.value - c0.kinetic.value).abs());
        let dp = c.linear_momentum.a - c0.linear_momentum.a;
        d.linear_momentum = d.linear_momentum.max(dp.norm());
        d.linear_momentum_beyond_impulse = d.linear_momentum_beyond_impulse.max((dp - impulse).norm());
        d.angular_momentum = d.angular_momentum.max((c.angular_momentum.a - c0.angular_momentum.a).norm());
    }
    Some(d)
}

fn compare(rigid: &[TrajectoryRecord], oracle: &[TrajectoryRecord]) -> OracleComparison {
    let mut out = OracleComparison {
        max_node_deviation: 0.0,
        max_reaction_deviation: 0.0,
        max_relative_reaction_deviation: 0.0,
        oracle_max_constraint_residual: 0.0,
    };
    let scale = rigid.iter().map(|r| r.reactions.max_norm()).fold(0.0, f64::max);
    for (a, b) in rigid.iter().zip(oracle) {
        for (p, q) in a.node_positions.points.iter().zip(&b.node_positions.points) {
            out.max_node_deviation = out.max_node_deviation.max((p.p - q.p).norm());
        }
        for (p, q) in a.reactions.cs.iter().zip(&b.reactions.cs) {
            out.max_reaction_deviation = out.max_reaction_deviation.max((p - q).norm());
        }
        out.oracle_max_constraint_residual = out.oracle_max_constraint_residual.max(b.constraint_residual);
    }
    out.max_relative_reaction_deviation = out.max_reaction_deviation / scale.max(f64::MIN_POSITIVE);
    out
}

fn abort_parts(t: Result<Vec<TrajectoryRecord>, Aborted>) -> (Vec<TrajectoryRecord>, Option<Error>) {
    match t {
        Ok(r) => (r, None),
        Err(a) => (a.records, Some(a.error)),
    }
}

/// Run one scenario and write its outputs.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunReport, RunError> {
    let started = Instant::now();
    let law: ForceLaw = scenario.force_law();
    let cfg = scenario.integrator_config();
    let system = &scenario.system;
    let n = system.particles();

    let mut classification = None;
    let mut principal_momenta = None;
    let mut oracle = None;
    let mut failure: Option<Error> = None;
    let mut records = Vec::new();
    let mut centers: Option<Vec<Vector3<f64>>> = None;

    match system {
        System::Rigid {
            masses,
            positions,
            velocities,
        } => {
            let setup = build_shape(positions, masses).and_then(|shape| {
                let state = shape.initial_state(velocities)?;
                Ok((shape, state))
            });
            match setup {
                Err(e) => failure = Some(e),
                Ok((shape, state)) => {
                    classification = Some(Classification {
                        characteristic: shape.characteristic().value(),
                        characteristic_label: shape.characteristic().label(),
                        symmetry: shape.symmetry().label(),
                    });
                    principal_momenta = Some(shape.principal_momenta().map(|q| q.value));
                    if let Some(cfg) = &cfg {
                        let (recs, err) = abort_parts(integrate_rigid(&shape, &state, &law, cfg));
                        failure = err;
                        if failure.is_none() && (scenario.compare_oracle || opts.compare_oracle) {
                            let (orecs, oerr) = abort_parts(integrate_dae_oracle(
                                positions,
                                velocities,
                                masses,
                                shape.lengths(),
                                &law,
                                cfg,
                            ));
                            match oerr {
                                Some(e) => failure = Some(e),
                                None => oracle = Some(compare(&recs, &orecs)),
                            }
                        }
                        centers = Some(
                            recs.iter()
                                .map(|r| match &r.state {
                                    TrajectoryState::Rigid(s) => s.p_cen.p,
                                    _ => unreachable!("rigid records carry rigid states"),
                                })
                                .collect(),
                        );
                        records = recs;
                    }
                }
            }
        }
        System::FreeMulti {
            masses,
            positions,
            velocities,
        } => {
            if let Some(cfg) = &cfg {
                let (recs, err) = abort_parts(integrate_free(positions, velocities, masses, &law, cfg));
                records = recs;
                failure = err;
            }
        }
        System::Surface { mass, .. } => {
            if let (Some(cfg), Some(chart), Some(cp)) = (&cfg, system.chart(), system.chart_point()) {
                let (recs, err) = abort_parts(integrate_chart(&chart, &cp, &law, surface_mass(*mass), cfg));
                records = recs;
                failure = err;
            }
        }
    }

    let traj_path = resolve(&opts.out_dir, &scenario.outputs.trajectory_path, format!("{}_trajectory.csv", opts.stem));
    let reac_path = resolve(&opts.out_dir, &scenario.outputs.reactions_path, format!("{}_reactions.csv", opts.stem));
    let report_path = resolve(&opts.out_dir, &scenario.outputs.report_path, format!("{}_report.json", opts.stem));

    write_csv(&traj_path, trajectory_header(system, n), records.iter().map(trajectory_row))?;
    write_csv(&reac_path, reactions_header(n), records.iter().map(reactions_row))?;

    let max_annihilator_residual = centers.as_ref().and_then(|cs| {
        records
            .iter()
            .zip(cs)
            .map(|(r, c)| annihilator_residual(r, *c))
            .reduce(f64::max)
    });
    let error = failure.as_ref().map(|e| {
        let (step, message) = split_error(e);
        ErrorInfo { step, message }
    });
    let report = RunReport {
        scenario: scenario.name.clone().unwrap_or_else(|| opts.stem.clone()),
        system: system.kind(),
        particles: n,
        classification,
        principal_momenta,
        steps: scenario.steps,
        dt: scenario.dt,
        records: records.len(),
        drift: drift(&records, law.is_conservative()),
        max_constraint_residual: records.iter().map(|r| r.constraint_residual).reduce(f64::max),
        max_annihilator_residual,
        oracle,
        files: OutputFiles {
            trajectory: traj_path.display().to_string(),
            reactions: reac_path.display().to_string(),
            report: report_path.display().to_string(),
        },
        error: error.clone(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let mut w = BufWriter::new(File::create(&report_path)?);
    serde_json::to_writer_pretty(&mut w, &report).map_err(io::Error::other)?;
    writeln!(w)?;
    w.flush()?;

    match error {
        Some(ErrorInfo { step, message }) => Err(RunError::Numerical {
            step,
            message,
            report: Box::new(report),
        }),
        None => Ok(report),
    }
}
