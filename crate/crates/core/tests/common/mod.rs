//! Test oracles that are independent of the library's assembly code paths.
#![allow(dead_code)]

use std::sync::Arc;

use innermatch::fixtures::perturbed_torus;
use innermatch::{DomainMesh, Immersion, TangentField, Topology, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_field(n: usize, rng: &mut impl Rng) -> TangentField {
    TangentField::from_fn(n, |_| {
        Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
    })
}

pub fn small_torus(nx: usize, ny: usize, rng: &mut impl Rng) -> Immersion {
    let mesh = Arc::new(DomainMesh::build(Topology::Torus, nx, ny).unwrap());
    perturbed_torus(mesh, 0.35, 0.15, 0.02, rng).unwrap()
}

/// One triangle of the grid, enumerated independently of `DomainMesh`:
/// unique node indices and unwrapped parameter corners.
pub struct OracleTriangle {
    pub nodes: [usize; 3],
    pub corners: [[f64; 2]; 3],
}

pub fn oracle_triangles(topology: Topology, nx: usize, ny: usize) -> Vec<OracleTriangle> {
    let px = matches!(topology, Topology::Cylinder | Topology::Torus);
    let py = matches!(topology, Topology::Torus);
    let ux = if px { nx } else { nx + 1 };
    let uy = if py { ny } else { ny + 1 };
    let id = |i: usize, j: usize| (i % ux) + (j % uy) * ux;
    let pos = |i: usize, j: usize| [i as f64 / nx as f64, j as f64 / ny as f64];
    let mut out = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            for tri in [[(i, j), (i + 1, j), (i + 1, j + 1)], [(i, j), (i + 1, j + 1), (i, j + 1)]] {
                out.push(OracleTriangle {
                    nodes: tri.map(|(a, b)| id(a, b)),
                    corners: tri.map(|(a, b)| pos(a, b)),
                });
            }
        }
    }
    out
}

/// Partial derivatives of a linear interpolant: solves
/// `[e1 e2]ᵀ ∇f = [f1 − f0, f2 − f0]` for each component.
fn derivatives(c: &[[f64; 2]; 3], vals: [[f64; 3]; 3]) -> [[f64; 3]; 2] {
    let (e1, e2) = (
        [c[1][0] - c[0][0], c[1][1] - c[0][1]],
        [c[2][0] - c[0][0], c[2][1] - c[0][1]],
    );
    let det = e1[0] * e2[1] - e1[1] * e2[0];
    let mut d = [[0.0; 3]; 2];
    for k in 0..3 {
        let (f1, f2) = (vals[1][k] - vals[0][k], vals[2][k] - vals[0][k]);
        // Cramer's rule on [[e1x, e1y], [e2x, e2y]] · (dx, dy) = (f1, f2)
        d[0][k] = (f1 * e2[1] - e1[1] * f2) / det;
        d[1][k] = (e1[0] * f2 - f1 * e2[0]) / det;
    }
    d
}

fn area(c: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]))
}

fn vec3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// `⟨u, v⟩_q` by per-triangle edge-midpoint quadrature of the integrand
/// `Σ_k u^k v^k vol + α² g^{ij} ∂_i u^k ∂_j v^k vol`.
pub fn metric_by_quadrature(q: &Immersion, alpha: f64, u: &TangentField, v: &TangentField) -> f64 {
    let mesh = q.mesh();
    let mut total = 0.0;
    for tri in oracle_triangles(mesh.topology(), mesh.nx(), mesh.ny()) {
        let gather = |f: &dyn Fn(usize) -> [f64; 3]| [f(tri.nodes[0]), f(tri.nodes[1]), f(tri.nodes[2])];
        let qv = gather(&|i| vec3(&q.coords()[i]));
        let uv = gather(&|i| vec3(&u[i]));
        let vv = gather(&|i| vec3(&v[i]));
        let dq = derivatives(&tri.corners, qv);
        let du = derivatives(&tri.corners, uv);
        let dv = derivatives(&tri.corners, vv);
        let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let g = [[dot(&dq[0], &dq[0]), dot(&dq[0], &dq[1])], [dot(&dq[1], &dq[0]), dot(&dq[1], &dq[1])]];
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        let vol = det.sqrt();
        let gi = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
        let mut grad_term = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..3 {
                    grad_term += gi[i][j] * du[i][k] * dv[j][k];
                }
            }
        }
        let a = area(&tri.corners);
        // edge midpoints integrate quadratics exactly
        let mut mass = 0.0;
        for (e0, e1) in [(0, 1), (1, 2), (2, 0)] {
            let mut uu = [0.0; 3];
            let mut vvv = [0.0; 3];
            for k in 0..3 {
                uu[k] = 0.5 * (uv[e0][k] + uv[e1][k]);
                vvv[k] = 0.5 * (vv[e0][k] + vv[e1][k]);
            }
            mass += dot(&uu, &vvv) * a / 3.0;
        }
        total += vol * mass + alpha * alpha * grad_term * vol * a;
    }
    total
}

/// `∫_M |a − b|² dx` by edge-midpoint quadrature.
pub fn l2_by_quadrature(a: &Immersion, b: &Immersion) -> f64 {
    let d = a.difference(b);
    let mesh = a.mesh();
    let mut total = 0.0;
    for tri in oracle_triangles(mesh.topology(), mesh.nx(), mesh.ny()) {
        let ar = area(&tri.corners);
        for (e0, e1) in [(0, 1), (1, 2), (2, 0)] {
            let m = 0.5 * (d[tri.nodes[e0]] + d[tri.nodes[e1]]);
            total += m.norm_squared() * ar / 3.0;
        }
    }
    total
}

/// Smallest relative error of a central difference over a sweep of steps.
pub fn fd_min_rel_error(analytic: f64, f: impl Fn(f64) -> f64, steps: &[f64]) -> (f64, Vec<(f64, f64)>) {
    let mut table = Vec::new();
    let mut best = f64::INFINITY;
    for &h in steps {
        let fd = (f(h) - f(-h)) / (2.0 * h);
        let rel = (fd - analytic).abs() / analytic.abs().max(1e-300);
        table.push((h, rel));
        best = best.min(rel);
    }
    (best, table)
}

pub const FD_STEPS: [f64; 9] = [1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6, 3e-7, 1e-7];

/// Standard linear-element mass and stiffness matrices of the parameter
/// domain, assembled densely from the oracle triangulation.
pub fn reference_fem(topology: Topology, nx: usize, ny: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let tris = oracle_triangles(topology, nx, ny);
    let n = tris.iter().flat_map(|t| t.nodes).max().unwrap() + 1;
    let mut mass = vec![vec![0.0; n]; n];
    let mut stiff = vec![vec![0.0; n]; n];
    for t in &tris {
        let a = area(&t.corners);
        // gradients of the three hat functions: derivatives of the unit vectors
        let grads: Vec<[f64; 2]> = (0..3)
            .map(|k| {
                let mut vals = [[0.0; 3]; 3];
                vals[k][0] = 1.0;
                let d = derivatives(&t.corners, vals);
                [d[0][0], d[1][0]]
            })
            .collect();
        for i in 0..3 {
            for j in 0..3 {
                let (ni, nj) = (t.nodes[i], t.nodes[j]);
                mass[ni][nj] += if i == j { a / 6.0 } else { a / 12.0 };
                stiff[ni][nj] += a * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
            }
        }
    }
    (mass, stiff)
}
