use thiserror::Error;

use crate::units::Dim;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: Dim,
        found: Dim,
    },

    #[error("length mismatch in {context}: {left} vs {right}")]
    LengthMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("operator is not antisymmetric (relative defect {defect:e})")]
    NotAntisymmetric { defect: f64 },

    #[error("degenerate chart at y = {y:?}: induced metric condition ratio {ratio:e}")]
    DegenerateChart { y: Vec<f64>, ratio: f64 },

    #[error("particles {0} and {1} coincide")]
    CoincidentParticles(usize, usize),

    #[error("a rigid system needs at least two particles")]
    SingleParticle,

    #[error("masses must be positive and finite (particle {index}: {mass})")]
    NonPositiveMass { index: usize, mass: f64 },

    #[error("velocities are not tangent to the rigid constraint: pair ({i}, {j}) has length rate {residual:e}")]
    NotRigidTangent { i: usize, j: usize, residual: f64 },

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("torque has a component {component:e} along the axis of a degenerate (collinear) body")]
    DegenerateAxisTorque { component: f64 },

    #[error("singular constraint jacobian: acceleration system residual {residual:e}")]
    SingularConstraintJacobian { residual: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Error {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }

    /// The innermost error, unwrapping step annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            other => other,
        }
    }
}
