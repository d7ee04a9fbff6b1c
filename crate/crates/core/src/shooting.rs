//! Forward integration of the discrete geodesic equations.
//!
//! With `Δt = 1/N`, each step is
//!
//! ```text
//! q_{i+1} = q_i + Δt u_i
//! A(q_{i+1}) u_{i+1} = A(q_i) u_i + Δt δℓ/δq(u_i, u_i; q_i)
//! ```
//!
//! where `A(q)` is the metric operator. The quadratic term is evaluated at
//! step `i`, so every step costs one assembly and one linear solve.

use crate::error::{Error, Result};
use crate::field::{Immersion, TangentField};
use crate::metric::MetricOperator;

/// A discrete path `(q_i, u_i)`, `i = 0..=N`.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    q: Vec<Immersion>,
    u: Vec<TangentField>,
    kinetic: Vec<f64>,
    dt: f64,
    alpha: f64,
    operators: Vec<MetricOperator>,
}

fn step_failure(step: usize, e: Error) -> Error {
    Error::StepFailure {
        step,
        source: Box::new(e),
    }
}

impl GeodesicPath {
    /// Number of time steps `N`.
    pub fn steps(&self) -> usize {
        self.q.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Surfaces `q_0 … q_N`.
    pub fn surfaces(&self) -> &[Immersion] {
        &self.q
    }

    /// Velocities `u_0 … u_N`; `u_N` is only a diagnostic.
    pub fn velocities(&self) -> &[TangentField] {
        &self.u
    }

    /// Per-step kinetic energies `½⟨u_i, u_i⟩_{q_i}`, `i = 0..=N`.
    pub fn kinetic(&self) -> &[f64] {
        &self.kinetic
    }

    /// Metric operators at `q_0 … q_N`.
    pub fn operators(&self) -> &[MetricOperator] {
        &self.operators
    }

    pub fn start(&self) -> &Immersion {
        &self.q[0]
    }

    pub fn end(&self) -> &Immersion {
        &self.q[self.steps()]
    }

    pub fn initial_velocity(&self) -> &TangentField {
        &self.u[0]
    }

    /// `q_{N/2}` (rounded down).
    pub fn midpoint(&self) -> &Immersion {
        &self.q[self.steps() / 2]
    }

    /// `Δt Σ_{i<N} ½⟨u_i, u_i⟩_{q_i}`.
    pub fn energy(&self) -> f64 {
        self.dt * self.kinetic[..self.steps()].iter().sum::<f64>()
    }

    /// `Δt Σ_{i<N} ‖u_i‖_{q_i}`.
    pub fn length(&self) -> f64 {
        self.dt
            * self.kinetic[..self.steps()]
                .iter()
                .map(|e| (2.0 * e).max(0.0).sqrt())
                .sum::<f64>()
    }

    /// `max_i |e_i − e_0| / e_0` over `i = 0..=N`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.kinetic[0];
        if e0 == 0.0 {
            return 0.0;
        }
        self.kinetic
            .iter()
            .map(|e| (e - e0).abs() / e0)
            .fold(0.0, f64::max)
    }

    /// A path with prescribed velocities `u_0 … u_{N-1}` (not integrated):
    /// `q_{i+1} = q_i + Δt u_i`, `u_N` repeats `u_{N-1}`.
    pub fn from_velocities(q0: &Immersion, velocities: Vec<TangentField>, alpha: f64) -> Result<Self> {
        let n = velocities.len();
        if n == 0 {
            return Err(Error::InvalidParameter("a path needs at least one step".into()));
        }
        let dt = 1.0 / n as f64;
        let mut q = vec![q0.clone()];
        let mut u = velocities;
        u.push(u[n - 1].clone());
        let mut operators = Vec::with_capacity(n + 1);
        let mut kinetic = Vec::with_capacity(n + 1);
        for i in 0..=n {
            if i > 0 {
                q.push(q[i - 1].displaced(dt, &u[i - 1]));
            }
            let op = MetricOperator::assemble(&q[i], alpha).map_err(|e| step_failure(i, e))?;
            kinetic.push(op.lagrangian(&u[i], &u[i])?);
            operators.push(op);
        }
        Ok(GeodesicPath {
            q,
            u,
            kinetic,
            dt,
            alpha,
            operators,
        })
    }
}

/// Integrates the geodesic starting at `q0` with velocity `u0` over `steps`
/// explicit steps.
pub fn shoot(q0: &Immersion, u0: &TangentField, steps: usize, alpha: f64) -> Result<GeodesicPath> {
    if steps == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    u0.check_len(q0.node_count())?;
    let dt = 1.0 / steps as f64;
    let op0 = MetricOperator::assemble(q0, alpha).map_err(|e| step_failure(0, e))?;
    let mut kinetic = vec![op0.lagrangian(u0, u0)?];
    let mut q = vec![q0.clone()];
    let mut u = vec![u0.clone()];
    let mut operators = vec![op0];

    for i in 0..steps {
        let op = &operators[i];
        let next_q = q[i].displaced(dt, &u[i]);
        let mut rhs = op.flat(&u[i])?;
        rhs.axpy(dt, &op.dl_dq(&u[i], &u[i])?);
        let next_op = MetricOperator::assemble_with(&next_q, alpha, op.solver_options())
            .map_err(|e| step_failure(i + 1, e))?;
        let next_u = next_op.sharp(&rhs).map_err(|e| step_failure(i + 1, e))?;
        kinetic.push(next_op.lagrangian(&next_u, &next_u)?);
        q.push(next_q);
        u.push(next_u);
        operators.push(next_op);
    }

    Ok(GeodesicPath {
        q,
        u,
        kinetic,
        dt,
        alpha,
        operators,
    })
}

/// `Δt Σ_{i<N} ½⟨u_i, u_i⟩_{q_i}`.
pub fn path_energy(path: &GeodesicPath) -> f64 {
    path.energy()
}

/// `Δt Σ_{i<N} ‖u_i‖_{q_i}`.
pub fn path_length(path: &GeodesicPath) -> f64 {
    path.length()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::field::Vec3;
    use crate::mesh::{DomainMesh, Topology};

    fn plane(n: usize) -> Immersion {
        Immersion::flat(Arc::new(DomainMesh::build(Topology::Plane, n, n).unwrap()))
    }

    #[test]
    fn zero_velocity_is_stationary() {
        let q0 = plane(4);
        let path = shoot(&q0, &TangentField::zeros(q0.node_count()), 7, 0.6).unwrap();
        for (q, u) in path.surfaces().iter().zip(path.velocities()) {
            assert_eq!(q.coords(), q0.coords());
            assert_eq!(u.max_abs(), 0.0);
        }
        assert_eq!(path.energy(), 0.0);
        assert_eq!(path.length(), 0.0);
    }

    #[test]
    fn single_step_is_euler() {
        let q0 = plane(3);
        let u0 = TangentField::from_fn(q0.node_count(), |i| Vec3::new(0.1 * i as f64, -0.05, 0.2));
        let path = shoot(&q0, &u0, 1, 0.6).unwrap();
        assert_eq!(path.dt(), 1.0);
        let expected = q0.displaced(1.0, &u0);
        assert_eq!(path.end().coords(), expected.coords());
    }

    #[test]
    fn prescribed_constant_path_energy() {
        let q0 = plane(3);
        let c = 1.7;
        let n = q0.node_count();
        for steps in [1, 3, 8] {
            let us = vec![TangentField(vec![Vec3::new(c, 0.0, 0.0); n]); steps];
            let path = GeodesicPath::from_velocities(&q0, us, 0.6).unwrap();
            assert!((path.energy() - 0.5 * c * c).abs() < 1e-12);
            // constant speed: length² = 2 · energy
            assert!((path.length().powi(2) - 2.0 * path.energy()).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_step_reports_index() {
        let q0 = plane(3);
        // collapse everything onto the x axis within the first step
        let u0 = TangentField::from_fn(q0.node_count(), |i| {
            Vec3::new(0.0, -q0.coords()[i].y, 0.0)
        });
        let err = shoot(&q0, &u0, 1, 0.5).unwrap_err();
        assert!(matches!(err, Error::StepFailure { step: 1, .. }), "{err}");
    }

    #[test]
    fn zero_steps_rejected() {
        let q0 = plane(2);
        assert!(shoot(&q0, &TangentField::zeros(q0.node_count()), 0, 0.5).is_err());
    }
}
