//! Registration by gradient descent on the initial velocity of a shot
//! geodesic, minimizing
//!
//! ```text
//! E(u_0) = Δt Σ_{i<N} ½⟨u_i, u_i⟩_{q_i} + (1/2σ²) ∫_M |q_N − q_targ|² dx
//! ```

use serde::{Deserialize, Serialize};

use crate::adjoint::{backward_sweep_with, gradient, objective_gradient, KineticGradient};
use crate::error::{Error, Result};
use crate::field::{Immersion, TangentField};
use crate::metric::{apply_blockwise, parameter_mass, MetricOperator};
use crate::shooting::{shoot, GeodesicPath};

/// Initial velocity of the descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitPolicy {
    #[default]
    Zero,
    /// `sharp_{q_0}(M (q_targ − q_0))`.
    L2diff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistrationConfig {
    /// Length scale of the metric.
    pub alpha: f64,
    /// Weight of the matching term.
    pub sigma: f64,
    /// Time steps `N`.
    pub steps: usize,
    pub max_iters: usize,
    /// Initial step size ε.
    pub step_eps: f64,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    /// Line search gives up below this step size.
    pub step_min: f64,
    /// Stop when `‖∇E‖_{q_0}` falls to this value.
    pub tol_grad: f64,
    /// Stop when `‖∇E‖_{q_0}` falls to this fraction of its initial value.
    pub tol_grad_rel: Option<f64>,
    /// Stop when `∫|q_N − q_targ|² dx` falls to this value.
    pub tol_match: Option<f64>,
    pub init: InitPolicy,
    /// Plain `u ← u − ε ∇E` with constant ε, no line search.
    pub fixed_step: bool,
    pub kinetic_gradient: KineticGradient,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        RegistrationConfig {
            alpha: 0.6,
            sigma: 1.0,
            steps: 10,
            max_iters: 200,
            step_eps: 1.0,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            step_min: 1e-12,
            tol_grad: 1e-6,
            tol_grad_rel: None,
            tol_match: None,
            init: InitPolicy::Zero,
            fixed_step: false,
            kinetic_gradient: KineticGradient::Exact,
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be a finite value ≥ 0");
        }
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        if !(self.step_eps > 0.0) || !(self.step_min > 0.0) {
            return bad("step sizes must be positive");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return bad("armijo_shrink must lie in (0, 1)");
        }
        if !(self.tol_grad >= 0.0) {
            return bad("tol_grad must be ≥ 0");
        }
        if matches!(self.tol_match, Some(t) if !(t >= 0.0)) {
            return bad("tol_match must be ≥ 0");
        }
        if matches!(self.tol_grad_rel, Some(t) if !(t >= 0.0)) {
            return bad("tol_grad_rel must be ≥ 0");
        }
        Ok(())
    }
}

/// Terms of the objective at one initial velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energies {
    pub total: f64,
    pub kinetic: f64,
    /// `(1/2σ²) · l2_error`.
    pub matching: f64,
    /// `∫_M |q_N − q_targ|² dx`.
    pub l2_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIters,
    StepFailure,
}

/// One row of the descent history, describing the iterate after `step` was taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub e_total: f64,
    pub e_kinetic: f64,
    pub e_match: f64,
    pub l2_error: f64,
    pub grad_norm: f64,
    /// Step size that produced this iterate; 0 for the initial one.
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct RegistrationResult {
    pub u0_opt: TangentField,
    pub path: GeodesicPath,
    pub energies: Energies,
    pub history: Vec<IterationRecord>,
    pub status: Status,
}

impl RegistrationResult {
    /// Accepted descent steps.
    pub fn iterations(&self) -> usize {
        self.history.len().saturating_sub(1)
    }
}

/// `∫_M |q − q_targ|² dx` with the flat parameter measure.
pub fn l2_matching(q: &Immersion, q_targ: &Immersion) -> Result<f64> {
    q.ensure_compatible(q_targ)?;
    let d = q.difference(q_targ);
    let mass = parameter_mass(q.mesh());
    Ok(apply_blockwise(&mass, &d).pair(&d))
}

fn energies_of(path: &GeodesicPath, q_targ: &Immersion, sigma: f64) -> Result<Energies> {
    let kinetic = path.energy();
    let l2_error = l2_matching(path.end(), q_targ)?;
    let matching = l2_error / (2.0 * sigma * sigma);
    Ok(Energies {
        total: kinetic + matching,
        kinetic,
        matching,
        l2_error,
    })
}

/// Shoots from `q0` with `u0` and evaluates the objective.
pub fn evaluate(
    q0: &Immersion,
    u0: &TangentField,
    q_targ: &Immersion,
    cfg: &RegistrationConfig,
) -> Result<(GeodesicPath, Energies)> {
    q0.ensure_compatible(q_targ)?;
    let path = shoot(q0, u0, cfg.steps, cfg.alpha)?;
    let e = energies_of(&path, q_targ, cfg.sigma)?;
    Ok((path, e))
}

/// `(E_total, E_kinetic, E_match)` at `u0`.
pub fn energy(q0: &Immersion, u0: &TangentField, q_targ: &Immersion, cfg: &RegistrationConfig) -> Result<Energies> {
    evaluate(q0, u0, q_targ, cfg).map(|(_, e)| e)
}

/// Metric gradient `∇_{u_0} E` along an already shot path.
pub fn path_gradient(path: &GeodesicPath, q_targ: &Immersion, cfg: &RegistrationConfig) -> Result<TangentField> {
    match cfg.kinetic_gradient {
        KineticGradient::Exact => objective_gradient(path, q_targ, cfg.sigma),
        KineticGradient::Conserved => {
            let adj = backward_sweep_with(path, q_targ, cfg.sigma, KineticGradient::Conserved)?;
            Ok(gradient(path, &adj))
        }
    }
}

/// Initial velocity chosen by `cfg.init`.
pub fn initial_velocity(q0: &Immersion, q_targ: &Immersion, cfg: &RegistrationConfig) -> Result<TangentField> {
    match cfg.init {
        InitPolicy::Zero => Ok(TangentField::zeros(q0.node_count())),
        InitPolicy::L2diff => {
            let op = MetricOperator::assemble(q0, cfg.alpha)?;
            let mass = parameter_mass(q0.mesh());
            op.sharp(&apply_blockwise(&mass, &q_targ.difference(q0)))
        }
    }
}

/// Registers `q0` to `q_targ` starting from the configured initial velocity.
pub fn register(q0: &Immersion, q_targ: &Immersion, cfg: &RegistrationConfig) -> Result<RegistrationResult> {
    cfg.validate()?;
    q0.ensure_compatible(q_targ)?;
    let u0 = initial_velocity(q0, q_targ, cfg)?;
    register_from(q0, q_targ, u0, cfg)
}

/// Registers starting from an explicit initial velocity.
pub fn register_from(
    q0: &Immersion,
    q_targ: &Immersion,
    u_init: TangentField,
    cfg: &RegistrationConfig,
) -> Result<RegistrationResult> {
    cfg.validate()?;
    let mut u = u_init;
    let (mut path, mut e) = evaluate(q0, &u, q_targ, cfg)?;
    let mut history = Vec::new();
    let mut eps = cfg.step_eps;
    let mut last_step = 0.0;
    let status;

    let mut iter = 0;
    loop {
        let g = path_gradient(&path, q_targ, cfg)?;
        let g_sq = path.operators()[0].inner_product(&g, &g)?.max(0.0);
        let g_norm = g_sq.sqrt();
        history.push(IterationRecord {
            iter,
            e_total: e.total,
            e_kinetic: e.kinetic,
            e_match: e.matching,
            l2_error: e.l2_error,
            grad_norm: g_norm,
            step: last_step,
        });
        let g_initial = history[0].grad_norm;
        if g_norm <= cfg.tol_grad
            || cfg.tol_grad_rel.is_some_and(|t| g_norm <= t * g_initial)
            || cfg.tol_match.is_some_and(|t| e.l2_error <= t)
        {
            status = Status::Converged;
            break;
        }
        if iter == cfg.max_iters {
            status = Status::MaxIters;
            break;
        }

        if cfg.fixed_step {
            let trial = {
                let mut t = u.clone();
                t.axpy(-eps, &g);
                t
            };
            match evaluate(q0, &trial, q_targ, cfg) {
                Ok((p, en)) => {
                    u = trial;
                    path = p;
                    e = en;
                    last_step = eps;
                }
                Err(err) if err.is_numerical() => {
                    status = Status::StepFailure;
                    break;
                }
                Err(err) => return Err(err),
            }
        } else {
            let mut accepted = None;
            while eps >= cfg.step_min {
                let mut trial = u.clone();
                trial.axpy(-eps, &g);
                match evaluate(q0, &trial, q_targ, cfg) {
                    Ok((p, en)) if en.total <= e.total - cfg.armijo_c * eps * g_sq && en.total < e.total => {
                        accepted = Some((trial, p, en));
                        break;
                    }
                    Ok(_) => {}
                    Err(err) if err.is_numerical() => {}
                    Err(err) => return Err(err),
                }
                eps *= cfg.armijo_shrink;
            }
            match accepted {
                Some((trial, p, en)) => {
                    u = trial;
                    path = p;
                    e = en;
                    last_step = eps;
                    eps *= 2.0;
                }
                None => {
                    status = Status::StepFailure;
                    break;
                }
            }
        }
        iter += 1;
    }

    Ok(RegistrationResult {
        u0_opt: u,
        path,
        energies: e,
        history,
        status,
    })
}
