//! Registration of parametrized surfaces in ℝ³ by geodesic shooting under a
//! reparametrization-invariant H¹ inner metric, with exact discrete gradients
//! from the adjoint equations and Riemannian shape statistics.
//!
//! The pipeline, bottom-up:
//!
//! - [`mesh`]: structured triangulations of the plane sheet, cylinder and torus.
//! - [`geometry`]: first fundamental form and area density per element.
//! - [`metric`]: the inner metric, flat/sharp maps and variations in `q`.
//! - [`shooting`]: explicit forward integration of the geodesic equations.
//! - [`adjoint`]: the backward sweep and the gradient of the objective.
//! - [`registration`]: gradient descent on the initial velocity.
//! - [`statistics`]: angles, geodesic triangles and Karcher means.
//! - [`io`]: native mesh/velocity files, OBJ and CSV export.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod error;
pub mod field;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod metric;
pub mod registration;
pub mod shooting;
pub mod statistics;

pub use adjoint::{AdjointState, KineticGradient};
pub use error::{Error, Result};
pub use field::{Covector, Immersion, TangentField, Vec3};
pub use geometry::{ElementGeometry, SurfaceGeometry};
pub use mesh::{DomainMesh, Topology};
pub use metric::{MetricOperator, SolverOptions};
pub use registration::{RegistrationConfig, RegistrationResult, Status};
pub use statistics::{MeanResult, TriangleReport};
pub use shooting::GeodesicPath;
