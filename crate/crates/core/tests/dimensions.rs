use geomech::dynamics::{newton_rhs_with_force, reaction_per_node, second_fundamental_form_rigid};
use geomech::geom3::{cross, flat, metric, sharp};
use geomech::rigid::{continuous_velocity_field, kinetic_quantities, total_momentum};
use geomech::*;
use geomech::{dynamics, multibody, surface};
use nalgebra::Vector3;
use proptest::prelude::*;

fn arb_dim() -> impl Strategy<Value = Dim> {
    (-3i32..=3, -3i32..=3, -2i32..=2).prop_map(|(t, l, m)| Dim::from_ints(t, l, m))
}

fn arb_vec() -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-10.0f64..10.0).prop_map(Vector3::from)
}

proptest! {
    #[test]
    fn metric_operations_track_length_powers(a in arb_dim(), b in arb_dim(), u in arb_vec(), v in arb_vec()) {
        let x = Vec3::from_raw(u, a);
        let y = Vec3::from_raw(v, b);
        prop_assert_eq!(metric(x, y).dim, a * b * Dim::LENGTH * Dim::LENGTH);
        prop_assert_eq!(flat(x).dim, a * Dim::LENGTH * Dim::LENGTH);
        prop_assert_eq!(sharp(flat(x)).dim, a);
        prop_assert_eq!(cross(x, y).dim, a * b * Dim::LENGTH);
        prop_assert!(x.try_add(y).is_ok() == (a == b));
    }

    #[test]
    fn rigid_quantities_have_physical_dimensions(
        pts in prop::collection::vec(arb_vec(), 3..7),
        w in arb_vec(),
        vc in arb_vec(),
        f in arb_vec(),
    ) {
        let masses = MassSpec::equal(pts.len(), 1.5).unwrap();
        let Ok(shape) = build_shape(&MultiConfig::from_raw(&pts), &masses) else {
            return Ok(());
        };
        prop_assume!(!shape.is_degenerate());
        let state = RigidState {
            v_cen: Vec3::from_raw(vc, Dim::VELOCITY),
            omega: Vec3::from_raw(w * 0.1, Dim::ANGULAR_VELOCITY),
            ..shape.state_at_rest()
        };
        let k = kinetic_quantities(&shape, &state).unwrap();
        prop_assert_eq!(k.k_cen.dim, Dim::ENERGY);
        prop_assert_eq!(k.k_ang.dim, Dim::ENERGY);
        prop_assert_eq!(k.p_cen.dim, Dim::MOMENTUM);
        prop_assert_eq!(k.p_ang.dim, Dim::ANGULAR_MOMENTUM);

        let forces = MultiCovec::from_raw(vec![f; shape.len()], Dim::FORCE);
        prop_assert_eq!(total_momentum(&shape, &state.rotation, &forces).dim, Dim::TORQUE);
        let (dv, dw) = newton_rhs_with_force(&shape, &state, &forces).unwrap();
        prop_assert_eq!(dv.dim, Dim::ACCELERATION);
        prop_assert_eq!(dw.dim, Dim::ANGULAR_ACCELERATION);
        prop_assert_eq!(reaction_per_node(&shape, &state, &forces).unwrap().dim, Dim::FORCE);
        prop_assert_eq!(second_fundamental_form_rigid(&shape, &state).unwrap().dim, Dim::ACCELERATION);
        let field = continuous_velocity_field(&state, Point3::from_raw(pts[0])).unwrap();
        prop_assert_eq!(field.dim, Dim::VELOCITY);
    }

    #[test]
    fn perturbed_dimensions_raise_mismatch(d in arb_dim(), f in arb_vec()) {
        let shape = build_shape(
            &MultiConfig::from_raw(&[Vector3::x(), Vector3::y(), Vector3::z(), Vector3::zeros()]),
            &MassSpec::equal(4, 1.0).unwrap(),
        )
        .unwrap();
        let rest = shape.state_at_rest();
        let chart = Chart::sphere(1.0).unwrap();
        let (y, yd) = ([1.0, 0.5], [0.2, -0.3]);
        let mass = Quantity::new(1.0, Dim::MASS);
        let force = Covec3::from_raw(f, Dim::FORCE);
        let vel = MultiVec::from_raw(vec![f; 4], Dim::VELOCITY);
        let forces = MultiCovec::from_raw(vec![f; 4], Dim::FORCE);
        let cfg = IntegratorConfig::new(1e-3, 1).unwrap();

        // (expected dimension, call with the argument's dimension replaced by `d`)
        let cases: Vec<(Dim, Box<dyn Fn(Dim) -> Result<()>>)> = vec![
            (Dim::ACCELERATION, Box::new(|d| ForceLaw::uniform(Vec3::from_raw(Vector3::z(), d)).map(drop))),
            (Dim::TIME, Box::new(|d| IntegratorConfig { dt: Quantity::new(1e-3, d), ..cfg.clone() }.validate())),
            (Dim::VELOCITY, Box::new(|d| shape.initial_state(&MultiVec { dim: d, ..vel.clone() }).map(drop))),
            (Dim::VELOCITY, Box::new(|d| multibody::multi_kinetic_energy(&MultiVec { dim: d, ..vel.clone() }, shape.masses()).map(drop))),
            (Dim::ANGULAR_VELOCITY, Box::new(|d| shape.validate_state(&RigidState { omega: Vec3::from_raw(f, d), ..rest }))),
            (Dim::VELOCITY, Box::new(|d| shape.validate_state(&RigidState { v_cen: Vec3::from_raw(f, d), ..rest }))),
            (Dim::FORCE, Box::new(|d| dynamics::split_rigid_force(&shape, &rest.rotation, &MultiCovec { dim: d, ..forces.clone() }).map(drop))),
            (Dim::TORQUE, Box::new(|d| dynamics::euler_rhs(&shape, &rest, Covec3::from_raw(f, d)).map(drop))),
            (Dim::FORCE, Box::new(|d| surface::reaction_force(&chart, &y, &yd, Covec3::from_raw(f, d), mass).map(drop))),
            (Dim::MASS, Box::new(|d| surface::reaction_force(&chart, &y, &yd, force, Quantity::new(1.0, d)).map(drop))),
            (Dim::FORCE, Box::new(|d| surface::coordinate_acceleration(&chart, &y, &yd, Covec3::from_raw(f, d), mass).map(drop))),
            (Dim::MASS, Box::new(|d| surface::coordinate_acceleration(&chart, &y, &yd, force, Quantity::new(1.0, d)).map(drop))),
            (Dim::FORCE, Box::new(|d| Covec3::from_raw(f, Dim::FORCE).try_add(Covec3::from_raw(f, d)).map(drop))),
            (Dim::MASS, Box::new(|d| {
                let traj = integrate_chart(&chart, &ChartPoint::new(y.to_vec(), yd.to_vec()).unwrap(), &ForceLaw::zero(), Quantity::new(1.0, d), &cfg);
                traj.map(drop).map_err(Error::from)
            })),
        ];
        for (k, (expected, call)) in cases.iter().enumerate() {
            if d == *expected {
                continue;
            }
            let err = call(d).expect_err("perturbed dimension accepted");
            prop_assert!(matches!(err.root(), Error::DimensionMismatch { .. }), "case {}: {:?}", k, err);
        }
    }
}
