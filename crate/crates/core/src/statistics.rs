//! Riemannian statistics on the space of surfaces: angles between initial
//! velocities, geodesic triangles and the Karcher mean by iterated shooting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Immersion, TangentField};
use crate::geometry::surface_area;
use crate::metric::MetricOperator;
use crate::registration::{register, RegistrationConfig, RegistrationResult, Status};
use crate::shooting::shoot;

/// Angle in degrees between `u` and `v` in the metric at `q`.
pub fn geodesic_angle(u: &TangentField, v: &TangentField, q: &Immersion, alpha: f64) -> Result<f64> {
    angle_with(&MetricOperator::assemble(q, alpha)?, u, v)
}

/// [`geodesic_angle`] with an already assembled operator.
pub fn angle_with(op: &MetricOperator, u: &TangentField, v: &TangentField) -> Result<f64> {
    let uu = op.inner_product(u, u)?;
    let vv = op.inner_product(v, v)?;
    if !(uu > 0.0) || !(vv > 0.0) {
        return Err(Error::ZeroVelocity);
    }
    let c = op.inner_product(u, v)? / (uu.sqrt() * vv.sqrt());
    Ok(c.clamp(-1.0, 1.0).acos().to_degrees())
}

/// Runs `f(0..n)` on up to `jobs` threads (all available if `None`),
/// returning results in index order.
fn run_indexed<T, F>(n: usize, jobs: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    match jobs {
        Some(1) => (0..n).map(&f).collect(),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(|| (0..n).into_par_iter().map(&f).collect()),
        None => (0..n).into_par_iter().map(&f).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct TriangleReport {
    /// Angles at A, B, C in degrees.
    pub angles: [f64; 3],
    pub angle_sum: f64,
    /// Lengths of the geodesics A→B, B→C, C→A.
    pub side_lengths: [f64; 3],
    /// Lengths of the reverse geodesics B→A, C→B, A→C.
    pub reverse_lengths: [f64; 3],
    /// Midpoints `q_{N/2}` of A→B, B→C, C→A.
    pub midpoints: [Immersion; 3],
    /// Registrations in the order A→B, A→C, B→A, B→C, C→A, C→B.
    pub registrations: Vec<RegistrationResult>,
}

impl TriangleReport {
    pub fn all_converged(&self) -> bool {
        self.registrations.iter().all(|r| r.status == Status::Converged)
    }
}

/// Registers every ordered pair of `(qa, qb, qc)` and measures the angle at
/// each vertex between its two outgoing initial velocities.
pub fn triangle_experiment(
    qa: &Immersion,
    qb: &Immersion,
    qc: &Immersion,
    cfg: &RegistrationConfig,
) -> Result<TriangleReport> {
    triangle_experiment_with(qa, qb, qc, cfg, None)
}

pub fn triangle_experiment_with(
    qa: &Immersion,
    qb: &Immersion,
    qc: &Immersion,
    cfg: &RegistrationConfig,
    jobs: Option<usize>,
) -> Result<TriangleReport> {
    if !cfg.steps.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "the triangle experiment needs an even number of steps, got {}",
            cfg.steps
        )));
    }
    qa.ensure_compatible(qb)?;
    qa.ensure_compatible(qc)?;
    let v = [qa, qb, qc];
    // (from, to) in the order A→B, A→C, B→A, B→C, C→A, C→B
    const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];
    let regs = run_indexed(6, jobs, |k| {
        let (from, to) = PAIRS[k];
        register(v[from], v[to], cfg)
    })?;

    let mut angles = [0.0; 3];
    for (vertex, angle) in angles.iter_mut().enumerate() {
        let (r1, r2) = (&regs[2 * vertex], &regs[2 * vertex + 1]);
        *angle = angle_with(&r1.path.operators()[0], &r1.u0_opt, &r2.u0_opt)?;
    }
    let (ab, ac, ba, bc, ca, cb) = (&regs[0], &regs[1], &regs[2], &regs[3], &regs[4], &regs[5]);
    Ok(TriangleReport {
        angles,
        angle_sum: angles.iter().sum(),
        side_lengths: [ab.path.length(), bc.path.length(), ca.path.length()],
        reverse_lengths: [ba.path.length(), cb.path.length(), ac.path.length()],
        midpoints: [
            ab.path.midpoint().clone(),
            bc.path.midpoint().clone(),
            ca.path.midpoint().clone(),
        ],
        registrations: regs,
    })
}

/// Stopping rules and parallelism of [`karcher_mean_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeanOptions {
    /// Stop when `‖ū‖_{q_mean}` is at most this value.
    pub tol: f64,
    /// Also stop when `‖ū‖` falls to this fraction of the first norm.
    pub rel_tol: Option<f64>,
    pub max_outer: usize,
    /// Threads for the per-shape registrations; all available if `None`.
    pub jobs: Option<usize>,
}

impl Default for MeanOptions {
    fn default() -> Self {
        MeanOptions {
            tol: 1e-3,
            rel_tol: None,
            max_outer: 10,
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanStatus {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct MeanResult {
    pub mean: Immersion,
    /// Outer iterations performed (registration rounds).
    pub iterations: usize,
    /// `‖ū‖_{q_mean}` at every outer iteration.
    pub velocity_norms: Vec<f64>,
    /// Registered initial velocities at the final mean.
    pub per_shape_velocities: Vec<TangentField>,
    /// Final matching errors of the registrations at the final mean.
    pub per_shape_l2: Vec<f64>,
    pub status: MeanStatus,
}

/// Karcher mean with an absolute tolerance on the averaged velocity.
pub fn karcher_mean(
    shapes: &[Immersion],
    init: &Immersion,
    cfg: &RegistrationConfig,
    mean_tol: f64,
    max_outer: usize,
) -> Result<MeanResult> {
    karcher_mean_with(
        shapes,
        init,
        cfg,
        &MeanOptions {
            tol: mean_tol,
            max_outer,
            ..Default::default()
        },
    )
}

/// Registers the current mean to every shape, averages the initial
/// velocities with weight `1/n` and moves the mean to the endpoint of the
/// geodesic shot with the average, until the average is small.
pub fn karcher_mean_with(
    shapes: &[Immersion],
    init: &Immersion,
    cfg: &RegistrationConfig,
    opts: &MeanOptions,
) -> Result<MeanResult> {
    if shapes.is_empty() {
        return Err(Error::InvalidParameter("the mean needs at least one shape".into()));
    }
    if opts.max_outer == 0 {
        return Err(Error::InvalidParameter("max_outer must be at least 1".into()));
    }
    cfg.validate()?;
    for s in shapes {
        init.ensure_compatible(s)?;
    }
    let n = shapes.len();
    let mut mean = init.clone();
    let mut norms = Vec::new();

    for outer in 1..=opts.max_outer {
        let regs = run_indexed(n, opts.jobs, |j| register(&mean, &shapes[j], cfg))?;
        let mut avg = TangentField::zeros(mean.node_count());
        for r in &regs {
            avg.axpy(1.0 / n as f64, &r.u0_opt);
        }
        let norm = regs[0].path.operators()[0].norm(&avg)?;
        norms.push(norm);
        let done = norm <= opts.tol || opts.rel_tol.is_some_and(|r| norm <= r * norms[0]);
        if done || outer == opts.max_outer {
            return Ok(MeanResult {
                mean,
                iterations: outer,
                velocity_norms: norms,
                per_shape_l2: regs.iter().map(|r| r.energies.l2_error).collect(),
                per_shape_velocities: regs.into_iter().map(|r| r.u0_opt).collect(),
                status: if done { MeanStatus::Converged } else { MeanStatus::MaxIters },
            });
        }
        mean = shoot(&mean, &avg, cfg.steps, cfg.alpha)?.end().clone();
    }
    unreachable!("the loop returns on its last iteration")
}

/// Surface areas of the three vertices and of the three side midpoints.
pub fn triangle_areas(report: &TriangleReport, vertices: [&Immersion; 3]) -> ([f64; 3], [f64; 3]) {
    (vertices.map(surface_area), report.midpoints.each_ref().map(surface_area))
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

    fn constant(q: &Immersion, c: Vec3) -> TangentField {
        TangentField(vec![c; q.node_count()])
    }

    #[test]
    fn angle_examples() {
        let q = plane(3);
        let u = constant(&q, Vec3::new(1.0, 0.0, 0.0));
        let v = constant(&q, Vec3::new(0.0, 1.0, 0.0));
        assert!((geodesic_angle(&u, &v, &q, 0.0).unwrap() - 90.0).abs() < 1e-12);
        assert_eq!(geodesic_angle(&u, &u, &q, 0.6).unwrap(), 0.0);
        assert!((geodesic_angle(&u, &(-&u), &q, 0.6).unwrap() - 180.0).abs() < 1e-12);
    }

    #[test]
    fn angle_symmetry_and_scaling() {
        let q = plane(4);
        let u = TangentField::from_fn(q.node_count(), |i| Vec3::new(i as f64 * 0.1, 1.0, -0.3));
        let v = TangentField::from_fn(q.node_count(), |i| Vec3::new(0.2, (i as f64).sin(), 0.5));
        let a = geodesic_angle(&u, &v, &q, 0.6).unwrap();
        assert!((a - geodesic_angle(&v, &u, &q, 0.6).unwrap()).abs() < 1e-12);
        assert!((a - geodesic_angle(&u.scaled(7.5), &v.scaled(0.01), &q, 0.6).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn zero_velocity_angle_is_an_error() {
        let q = plane(3);
        let u = constant(&q, Vec3::x());
        let z = TangentField::zeros(q.node_count());
        assert!(matches!(geodesic_angle(&u, &z, &q, 0.6), Err(Error::ZeroVelocity)));
    }

    #[test]
    fn odd_steps_rejected_for_triangles() {
        let q = plane(3);
        let cfg = RegistrationConfig {
            steps: 5,
            ..Default::default()
        };
        assert!(matches!(
            triangle_experiment(&q, &q, &q, &cfg),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn mean_input_validation() {
        let q = plane(3);
        let cfg = RegistrationConfig::default();
        assert!(karcher_mean(&[], &q, &cfg, 1e-3, 3).is_err());
        assert!(matches!(
            karcher_mean(&[plane(4)], &q, &cfg, 1e-3, 3),
            Err(Error::MeshMismatch(_))
        ));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let a: Vec<usize> = run_indexed(10, Some(1), |i| Ok(i * i)).unwrap();
        let b: Vec<usize> = run_indexed(10, Some(3), |i| Ok(i * i)).unwrap();
        assert_eq!(a, b);
    }
}
