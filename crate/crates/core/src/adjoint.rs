//! Adjoint (backward) sweep of the discrete geodesic equations and the
//! gradient of the registration objective with respect to the initial
//! velocity.
//!
//! The recursion is the exact transpose of the forward scheme in
//! [`crate::shooting`]. With `A_i = A(q_i)`, `B_i(w) = δℓ/δq(u_i, w; q_i)` and
//! `P_i = A_i v̂_i`, the matching part runs from `û_N = 0`,
//! `P_N = −σ⁻² M (q_N − q_targ)` down to `i = 0`:
//!
//! ```text
//! A_i û_i = A_i û_{i+1} + Δt P_{i+1} + 2Δt B_iᵀ û_{i+1}
//! P_i     = P_{i+1} + 2 δℓ/δq(û_{i+1} − û_i, u_i; q_i) + Δt δ²ℓ/δq²(u_i, u_i; q_i)·û_{i+1}
//! ```
//!
//! where `M` is the mass matrix of the flat parameter measure. The kinetic
//! term `Δt Σ ½⟨u_i, u_i⟩_{q_i}` contributes the sources `Δt A_i u_i` and
//! `Δt δℓ/δq(u_i, u_i; q_i)` to the same recursion; for an energy-preserving
//! flow its gradient would be exactly `u_0`, but the explicit scheme only
//! preserves energy to first order, so by default it is computed exactly.

use crate::error::{Error, Result};
use crate::field::{Covector, Immersion, TangentField};
use crate::metric::{apply_blockwise, parameter_mass};
use crate::shooting::GeodesicPath;

/// How the gradient of the kinetic term is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KineticGradient {
    /// Transposed through the discrete scheme: the exact gradient of the
    /// discrete objective.
    #[default]
    Exact,
    /// Approximated by `u_0`, exact only when the integrator preserves energy.
    Conserved,
}

/// Backward adjoint variables `û_i`, `v̂_i` for `i = 0..=N`.
#[derive(Debug, Clone)]
pub struct AdjointState {
    u_hat: Vec<TangentField>,
    v_hat: Vec<TangentField>,
    kinetic_gradient: TangentField,
}

impl AdjointState {
    /// `û_0 … û_N`.
    pub fn u_hat(&self) -> &[TangentField] {
        &self.u_hat
    }

    /// `v̂_0 … v̂_N`.
    pub fn v_hat(&self) -> &[TangentField] {
        &self.v_hat
    }

    /// Metric gradient of the kinetic term with respect to `u_0`.
    pub fn kinetic_gradient(&self) -> &TangentField {
        &self.kinetic_gradient
    }

    /// `(i, ‖û_i‖_{q_i}, ‖v̂_i‖_{q_i})` for every step.
    pub fn step_norms(&self, path: &GeodesicPath) -> Result<Vec<(usize, f64, f64)>> {
        path.operators()
            .iter()
            .enumerate()
            .map(|(i, op)| Ok((i, op.norm(&self.u_hat[i])?, op.norm(&self.v_hat[i])?)))
            .collect()
    }
}

/// Output of one linear backward recursion in gradient convention.
struct Sweep {
    /// `μ_0 … μ_N` (the sensitivities with respect to `u_i`, sharpened).
    mu: Vec<TangentField>,
    /// `λ_0 … λ_N` (covectors, sensitivities with respect to `q_i`).
    lambda: Vec<Covector>,
}

/// Runs `A_i μ_i = w Δt A_i u_i + Δt λ_{i+1} + A_i μ_{i+1} + 2Δt B_iᵀ μ_{i+1}`,
/// `λ_i = λ_{i+1} + w Δt ℓ_q(u_i, u_i) + 2 ℓ_q(μ_{i+1} − μ_i, u_i) + Δt H_i μ_{i+1}`
/// from `μ_N = 0` and the given `λ_N`.
fn sweep(path: &GeodesicPath, lambda_n: Covector, kinetic_weight: f64) -> Result<Sweep> {
    let steps = path.steps();
    let n = path.start().node_count();
    let dt = path.dt();
    let ops = path.operators();
    let u = path.velocities();

    let mut mu = vec![TangentField::zeros(n); steps + 1];
    let mut lambda = vec![Covector::zeros(n); steps + 1];
    lambda[steps] = lambda_n;

    for i in (0..steps).rev() {
        let op = &ops[i];
        let mu_next = &mu[i + 1];
        let mut rhs = op.flat(mu_next)?;
        rhs.axpy(dt, &lambda[i + 1]);
        if kinetic_weight != 0.0 {
            rhs.axpy(kinetic_weight * dt, &op.flat(&u[i])?);
        }
        rhs.axpy(2.0 * dt, &op.dl_dq_transpose(&u[i], mu_next)?);
        let mu_i = op.sharp(&rhs).map_err(|e| Error::StepFailure {
            step: i,
            source: Box::new(e),
        })?;

        let mut lam = lambda[i + 1].clone();
        if kinetic_weight != 0.0 {
            lam.axpy(kinetic_weight * dt, &op.dl_dq(&u[i], &u[i])?);
        }
        lam.axpy(2.0, &op.dl_dq(&(mu_next - &mu_i), &u[i])?);
        lam.axpy(dt, &op.d2l_dq2(&u[i], mu_next)?);
        lambda[i] = lam;
        mu[i] = mu_i;
    }
    Ok(Sweep { mu, lambda })
}

/// `σ⁻² M (q_N − q_targ)`: derivative of the matching term `(1/2σ²) d(q_N, q_targ)`.
fn matching_covector(path: &GeodesicPath, q_targ: &Immersion, sigma: f64) -> Result<Covector> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    path.end().ensure_compatible(q_targ)?;
    let mass = parameter_mass(path.end().mesh());
    Ok(apply_blockwise(&mass, &path.end().difference(q_targ)).scaled(1.0 / (sigma * sigma)))
}

/// Integrates the adjoint equations backwards along `path`.
pub fn backward_sweep(path: &GeodesicPath, q_targ: &Immersion, sigma: f64) -> Result<AdjointState> {
    backward_sweep_with(path, q_targ, sigma, KineticGradient::Exact)
}

pub fn backward_sweep_with(
    path: &GeodesicPath,
    q_targ: &Immersion,
    sigma: f64,
    kinetic: KineticGradient,
) -> Result<AdjointState> {
    let matching = sweep(path, matching_covector(path, q_targ, sigma)?, 0.0)?;
    let ops = path.operators();
    let u_hat: Vec<TangentField> = matching.mu.iter().map(|m| -m).collect();
    let v_hat = matching
        .lambda
        .iter()
        .zip(ops)
        .map(|(lam, op)| op.sharp(&(-lam)))
        .collect::<Result<Vec<_>>>()?;
    let kinetic_gradient = match kinetic {
        KineticGradient::Exact => {
            let n = path.start().node_count();
            sweep(path, Covector::zeros(n), 1.0)?.mu.swap_remove(0)
        }
        KineticGradient::Conserved => path.initial_velocity().clone(),
    };
    Ok(AdjointState {
        u_hat,
        v_hat,
        kinetic_gradient,
    })
}

/// `∇_{u_0} E = (kinetic gradient) − û_0`, a metric gradient at `q_0`.
pub fn gradient(_path: &GeodesicPath, adjoint: &AdjointState) -> TangentField {
    &adjoint.kinetic_gradient - &adjoint.u_hat[0]
}

/// The exact metric gradient from a single combined sweep, without keeping
/// the adjoint variables. Agrees with [`gradient`] under
/// [`KineticGradient::Exact`].
pub fn objective_gradient(path: &GeodesicPath, q_targ: &Immersion, sigma: f64) -> Result<TangentField> {
    let s = sweep(path, matching_covector(path, q_targ, sigma)?, 1.0)?;
    Ok(s.mu.into_iter().next().expect("at least one step"))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::field::Vec3;
    use crate::mesh::{DomainMesh, Topology};
    use crate::shooting::shoot;

    fn cylinder() -> Immersion {
        let mesh = Arc::new(DomainMesh::build(Topology::Cylinder, 6, 4).unwrap());
        crate::fixtures::CylinderParams::straight().build(mesh).unwrap()
    }

    fn bump(q: &Immersion) -> TangentField {
        TangentField::from_fn(q.node_count(), |i| {
            let p = q.mesh().nodes()[i];
            Vec3::new(0.1 * p.y, 0.05 * (6.0 * p.x).sin(), 0.02)
        })
    }

    #[test]
    fn zero_mismatch_gives_zero_matching_adjoint() {
        let q0 = cylinder();
        let u0 = bump(&q0);
        let path = shoot(&q0, &u0, 4, 0.6).unwrap();
        let target = path.end().clone();
        let adj = backward_sweep_with(&path, &target, 1.0, KineticGradient::Conserved).unwrap();
        assert!(adj.u_hat().iter().all(|u| u.max_abs() == 0.0));
        assert!(adj.v_hat().iter().all(|v| v.max_abs() == 0.0));
        assert_eq!(gradient(&path, &adj), u0);
    }

    #[test]
    fn exact_kinetic_gradient_is_close_to_initial_velocity() {
        let q0 = cylinder();
        let u0 = bump(&q0);
        let path = shoot(&q0, &u0, 8, 0.6).unwrap();
        let adj = backward_sweep(&path, path.end(), 1.0).unwrap();
        let g = gradient(&path, &adj);
        let rel = (&g - &u0).max_abs() / u0.max_abs();
        assert!(rel < 0.1, "{rel}");
        assert!(rel > 0.0);
    }

    #[test]
    fn global_minimum_has_zero_gradient() {
        let q0 = cylinder();
        let path = shoot(&q0, &TangentField::zeros(q0.node_count()), 3, 0.6).unwrap();
        let adj = backward_sweep(&path, &q0, 1.0).unwrap();
        assert_eq!(gradient(&path, &adj).max_abs(), 0.0);
        assert_eq!(adj.u_hat()[adj.u_hat().len() - 1].max_abs(), 0.0);
    }

    #[test]
    fn combined_sweep_matches_split_sweeps() {
        let q0 = cylinder();
        let u0 = bump(&q0);
        let path = shoot(&q0, &u0, 5, 0.6).unwrap();
        let target = q0.displaced(1.0, &TangentField(vec![Vec3::new(0.0, 0.1, 0.05); q0.node_count()]));
        let adj = backward_sweep(&path, &target, 0.7).unwrap();
        let a = gradient(&path, &adj);
        let b = objective_gradient(&path, &target, 0.7).unwrap();
        assert!((&a - &b).max_abs() < 1e-10 * a.max_abs());
        assert_eq!(adj.u_hat().len(), 6);
        assert_eq!(adj.step_norms(&path).unwrap().len(), 6);
    }

    #[test]
    fn invalid_sigma_and_mesh() {
        let q0 = cylinder();
        let path = shoot(&q0, &TangentField::zeros(q0.node_count()), 2, 0.6).unwrap();
        assert!(backward_sweep(&path, &q0, 0.0).is_err());
        let other = Immersion::flat(Arc::new(DomainMesh::build(Topology::Plane, 3, 3).unwrap()));
        assert!(matches!(backward_sweep(&path, &other, 1.0), Err(Error::MeshMismatch(_))));
    }
}
