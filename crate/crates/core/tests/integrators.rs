use geomech::dynamics::{lagrange_residual_chart, lagrange_residual_rigid};
use geomech::integrate::Trajectory;
use geomech::*;
use nalgebra::Vector3;

fn top() -> (RigidShape, RigidState) {
    let p = MultiConfig::from_raw(&[
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(-0.4, 0.9, 0.1),
        Vector3::new(-0.3, -0.7, -0.2),
        Vector3::new(0.2, 0.1, 1.2),
    ]);
    let shape = build_shape(&p, &MassSpec::new(vec![1.0, 2.0, 1.5, 0.7]).unwrap()).unwrap();
    let state = RigidState {
        v_cen: Vec3::new(0.2, -0.1, 0.05, Dim::VELOCITY),
        omega: Vec3::new(1.3, -0.8, 2.1, Dim::ANGULAR_VELOCITY),
        ..shape.state_at_rest()
    };
    (shape, state)
}

fn endpoint(traj: Trajectory) -> Vec<Vector3<f64>> {
    let recs = traj.unwrap();
    recs.last().unwrap().node_positions.points.iter().map(|p| p.p).collect()
}

fn max_dev(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn rigid_and_dae_agree_on_free_top() {
    let (shape, state) = top();
    let cfg = IntegratorConfig::new(1e-3, 1000).unwrap();
    let law = ForceLaw::zero();
    let rigid = integrate_rigid(&shape, &state, &law, &cfg).unwrap();
    let dae = integrate_dae_oracle(
        &shape.node_positions(&state),
        &shape.node_velocities(&state),
        shape.masses(),
        shape.lengths(),
        &law,
        &cfg,
    )
    .unwrap();
    assert_eq!(rigid.len(), dae.len());
    let rscale = rigid.iter().map(|r| r.reactions.max_norm()).fold(0.0, f64::max);
    for (a, b) in rigid.iter().zip(&dae) {
        assert_eq!(a.time, b.time);
        for i in 0..shape.len() {
            assert!((a.node_positions.points[i].p - b.node_positions.points[i].p).norm() <= 1e-6);
            assert!((a.reactions.cs[i] - b.reactions.cs[i]).norm() <= 1e-6 * rscale);
        }
        assert!(b.constraint_residual <= 1e-10);
    }
}

#[test]
fn rigid_and_dae_agree_under_central_field() {
    let (shape, mut state) = top();
    state.p_cen = Point3::new(0.0, 0.0, 4.0);
    state.v_cen = Vec3::new(0.9, 0.0, 0.0, Dim::VELOCITY);
    let law = ForceLaw::Central {
        origin: Point3::origin(),
        strength: 20.0,
    };
    let cfg = IntegratorConfig::new(1e-3, 500).unwrap();
    let a = endpoint(integrate_rigid(&shape, &state, &law, &cfg));
    let b = endpoint(integrate_dae_oracle(
        &shape.node_positions(&state),
        &shape.node_velocities(&state),
        shape.masses(),
        shape.lengths(),
        &law,
        &cfg,
    ));
    assert!(max_dev(&a, &b) <= 1e-6);
}

#[test]
fn rk4_order_against_fine_reference() {
    let (shape, state) = top();
    let law = ForceLaw::zero();
    let run = |dt: f64| {
        let steps = (1.0 / dt).round() as usize;
        let cfg = IntegratorConfig::new(dt, steps).unwrap().with_stride(steps);
        endpoint(integrate_rigid(&shape, &state, &law, &cfg))
    };
    let dt = 0.04;
    let reference = run(dt / 16.0);
    let e1 = max_dev(&run(dt), &reference);
    let e2 = max_dev(&run(dt / 2.0), &reference);
    let ratio = e1 / e2;
    assert!((12.8..=19.2).contains(&ratio), "ratio {ratio}");
}

#[test]
fn lagrange_residual_along_spherical_pendulum() {
    let chart = Chart::sphere(1.0).unwrap();
    let g = 9.81;
    let law = ForceLaw::uniform(Vec3::new(0.0, 0.0, -g, Dim::ACCELERATION)).unwrap();
    let cp = ChartPoint::new(vec![2.0, 0.0], vec![0.0, 1.5]).unwrap();
    let mass = Quantity::new(1.0, Dim::MASS);
    let cfg = IntegratorConfig::new(1e-3, 2000).unwrap();
    let recs = integrate_chart(&chart, &cp, &law, mass, &cfg).unwrap();
    let samples: Vec<(f64, ChartPoint)> = recs
        .iter()
        .map(|r| match &r.state {
            TrajectoryState::Chart(p) => (r.time, p.clone()),
            _ => unreachable!(),
        })
        .collect();
    assert!(samples.iter().all(|(_, p)| p.y[0].sin() > 0.3));
    let res = lagrange_residual_chart(&chart, mass, |p: Point3| g * p.p.z, &samples).unwrap();
    assert!(res.relative <= 1e-4, "{res:?}");
    assert!(res.samples > 1000);
}

#[test]
fn lagrange_residual_along_rigid_orbit() {
    let (shape, mut state) = top();
    state.p_cen = Point3::new(3.0, 0.0, 0.5);
    state.v_cen = Vec3::new(0.0, 1.5, 0.0, Dim::VELOCITY);
    state.rotation = Rotation::exp(Vector3::new(0.9, 0.2, 0.0));
    let law = ForceLaw::Central {
        origin: Point3::origin(),
        strength: 8.0,
    };
    let cfg = IntegratorConfig::new(1e-3, 1500).unwrap();
    let recs = integrate_rigid(&shape, &state, &law, &cfg).unwrap();
    let samples: Vec<(f64, RigidState)> = recs
        .iter()
        .map(|r| match &r.state {
            TrajectoryState::Rigid(s) => (r.time, *s),
            _ => unreachable!(),
        })
        .collect();
    let res = lagrange_residual_rigid(&shape, &law, &samples).unwrap();
    assert!(res.relative <= 1e-4, "{res:?}");
    assert!(res.samples > 100);
}

#[test]
fn parallel_runs_are_identical() {
    let (shape, state) = top();
    let cfg = IntegratorConfig::new(1e-3, 300).unwrap();
    let law = ForceLaw::zero();
    let serial = integrate_rigid(&shape, &state, &law, &cfg).unwrap();
    let parallel: Vec<_> = std::thread::scope(|s| {
        let hs: Vec<_> = (0..4)
            .map(|_| s.spawn(|| integrate_rigid(&shape, &state, &law, &cfg).unwrap()))
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for p in parallel {
        assert_eq!(p, serial);
    }
}
