//! Geometric Newtonian mechanics for systems of point particles.
//!
//! The crate is organised bottom-up:
//!
//! * [`units`]: exact dimensional bookkeeping over time, length and mass.
//! * [`geom3`]: vectors, covectors, the scaled metric and cross products of
//!   the oriented pattern space.
//! * [`multibody`]: the `n`-particle configuration space with its weighted
//!   metric and center-of-mass splitting.
//! * [`surface`]: particles constrained to embedded submanifolds given by
//!   charts, with second fundamental form and reaction forces.
//! * [`rigid`]: the rigid configuration space, inertia operators and the
//!   tangent and cotangent splittings.
//! * [`dynamics`]: force laws, the Euler equation, reaction forces and the
//!   Lagrange residual diagnostics.
//! * [`integrate`]: time integrators for rigid bodies, surface particles,
//!   free particles and a constrained reference integrator.

pub mod error;
pub mod dynamics;
pub mod geom3;
pub mod integrate;
pub mod multibody;
pub mod rigid;
pub mod surface;
pub mod units;

pub use error::{Error, Result};
pub use geom3::{Covec3, LinOp3, Point3, Rotation, Vec3};
pub use multibody::{MassSpec, MultiConfig, MultiCovec, MultiVec};
pub use rigid::{build_shape, Characteristic, InertiaSymmetry, RigidShape, RigidState};
pub use units::{Dim, Quantity};
pub use dynamics::{evaluate_force, ForceLaw, PairLaw, PairTerm};
pub use integrate::{
    integrate_chart, integrate_dae_oracle, integrate_free, integrate_rigid, Aborted, IntegratorConfig, Method,
    TrajectoryRecord, TrajectoryState,
};
pub use surface::{Chart, ChartPoint};
