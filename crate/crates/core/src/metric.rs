//! The H¹-type inner metric
//!
//! ```text
//! ⟨u, v⟩_q = Σ_k ∫_M ( u^k v^k + α² g^{ij} ∂_i u^k ∂_j v^k ) vol(g) dx
//! ```
//!
//! discretized with linear elements, together with the velocity/momentum maps
//! and the first and second variations of `ℓ(u, v; q) = ½ ⟨u, v⟩_q` with
//! respect to the surface `q`.
//!
//! Per element, with `D = ∂q/∂x` (3×2), `g = DᵀD`, `Gs = sym(∇uᵀ∇v)`,
//! `m = ∫_T u·v dx` and `c = ⟨g⁻¹, Gs⟩`:
//!
//! ```text
//! ℓ_T  = ½ vol (m + α² |T| c)
//! ∂ℓ_T/∂D = D W,   W = ½ vol [ (m + α²|T| c) g⁻¹ − 2 α²|T| g⁻¹ Gs g⁻¹ ]
//! ```
//!
//! and the nodal covector entry of node `a` is `D W ∇φ_a`.

use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3x2};

use crate::error::Result;
use crate::field::{Covector, Immersion, TangentField, Vec3};
use crate::geometry::{field_gradient, ElementGeometry, SurfaceGeometry};
use crate::linalg::CsrMatrix;
use crate::mesh::{DomainMesh, ReferenceElement};

/// Iterative solver settings for [`MetricOperator::sharp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual `‖p − A x‖ / ‖p‖` at which CG stops.
    pub rel_tol: f64,
    /// Iteration cap as a multiple of the `3n` unknowns.
    pub max_iter_factor: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rel_tol: 1e-13,
            max_iter_factor: 10,
        }
    }
}

/// `⟨·,·⟩_q` at a fixed surface and length scale.
///
/// The 3n×3n matrix is block diagonal with three identical n×n blocks
/// `M(q) + α² S(q)`; only one block is stored.
#[derive(Debug, Clone)]
pub struct MetricOperator {
    q: Immersion,
    alpha: f64,
    geometry: SurfaceGeometry,
    matrix: CsrMatrix,
    solver: SolverOptions,
}

fn sym(m: Matrix2<f64>) -> Matrix2<f64> {
    0.5 * (m + m.transpose())
}

fn frob(a: &Matrix2<f64>, b: &Matrix2<f64>) -> f64 {
    a.component_mul(b).sum()
}

fn local<'a>(values: &'a [Vec3], t: &[usize; 3]) -> [&'a Vec3; 3] {
    [&values[t[0]], &values[t[1]], &values[t[2]]]
}

/// `Σ_ab M_ab u_a · v_b`, the exact element integral of `u·v`.
#[allow(clippy::needless_range_loop)]
fn local_mass_pair(el: &ReferenceElement, u: [&Vec3; 3], v: [&Vec3; 3]) -> f64 {
    let mut s = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            s += el.mass(a, b) * u[a].dot(v[b]);
        }
    }
    s
}

/// `Σ_a M_ab u_a`.
fn local_mass_apply(el: &ReferenceElement, u: [&Vec3; 3], b: usize) -> Vec3 {
    (0..3).map(|a| el.mass(a, b) * u[a]).sum()
}

/// The 2×2 weight `W` of the first variation for fields `u`, `v`.
fn first_variation_weight(
    el: &ReferenceElement,
    geo: &ElementGeometry,
    alpha: f64,
    m: f64,
    gs: &Matrix2<f64>,
) -> Matrix2<f64> {
    let a2 = alpha * alpha * el.area;
    let c = frob(&geo.g_inv, gs);
    let h = geo.g_inv * gs * geo.g_inv;
    0.5 * geo.vol * ((m + a2 * c) * geo.g_inv - 2.0 * a2 * h)
}

impl MetricOperator {
    /// Assembles `⟨·,·⟩_q` with length scale `alpha ≥ 0`.
    pub fn assemble(q: &Immersion, alpha: f64) -> Result<Self> {
        Self::assemble_with(q, alpha, SolverOptions::default())
    }

    pub fn assemble_with(q: &Immersion, alpha: f64, solver: SolverOptions) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(crate::Error::InvalidParameter(format!("alpha must be ≥ 0, got {alpha}")));
        }
        let geometry = SurfaceGeometry::compute(q)?;
        let mesh = q.mesh();
        let mut matrix = CsrMatrix::zeros(mesh.pattern().clone());
        let vals = matrix.values_mut();
        let a2 = alpha * alpha;
        for (t, (el, geo)) in mesh.elements().iter().zip(&geometry.elements).enumerate() {
            let slots = mesh.slots(t);
            for a in 0..3 {
                let ga = geo.g_inv * el.grads[a];
                for b in 0..3 {
                    let stiff = el.area * ga.dot(&el.grads[b]);
                    vals[slots[3 * a + b]] += geo.vol * (el.mass(a, b) + a2 * stiff);
                }
            }
        }
        Ok(MetricOperator {
            q: q.clone(),
            alpha,
            geometry,
            matrix,
            solver,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn surface(&self) -> &Immersion {
        &self.q
    }

    pub fn mesh(&self) -> &Arc<DomainMesh> {
        self.q.mesh()
    }

    pub fn geometry(&self) -> &SurfaceGeometry {
        &self.geometry
    }

    /// The shared scalar block `M(q) + α² S(q)`.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn solver_options(&self) -> SolverOptions {
        self.solver
    }

    fn n(&self) -> usize {
        self.q.node_count()
    }

    /// `uᵀ A v`.
    pub fn inner_product(&self, u: &TangentField, v: &TangentField) -> Result<f64> {
        u.check_len(self.n())?;
        v.check_len(self.n())?;
        Ok(self.flat_unchecked(v).pair(u))
    }

    /// `√⟨u, u⟩_q`.
    pub fn norm(&self, u: &TangentField) -> Result<f64> {
        Ok(self.inner_product(u, u)?.max(0.0).sqrt())
    }

    /// Velocity to momentum: `p = A u`.
    pub fn flat(&self, u: &TangentField) -> Result<Covector> {
        u.check_len(self.n())?;
        Ok(self.flat_unchecked(u))
    }

    fn flat_unchecked(&self, u: &TangentField) -> Covector {
        let comps = [0, 1, 2].map(|k| self.matrix.mul_vec(&u.component(k)));
        Covector::from_components(comps)
    }

    /// Momentum to velocity: solves `A u = p` component-wise.
    pub fn sharp(&self, p: &Covector) -> Result<TangentField> {
        p.check_len(self.n())?;
        let max_iter = self.solver.max_iter_factor * 3 * self.n();
        let mut comps: [Vec<f64>; 3] = Default::default();
        for (k, c) in comps.iter_mut().enumerate() {
            *c = self
                .matrix
                .solve_pcg(&p.component(k), self.solver.rel_tol, max_iter)?
                .x;
        }
        Ok(TangentField::from_components(comps))
    }

    /// `ℓ(u, v; q) = ½ ⟨u, v⟩_q`.
    pub fn lagrangian(&self, u: &TangentField, v: &TangentField) -> Result<f64> {
        Ok(0.5 * self.inner_product(u, v)?)
    }

    /// Covector of `δq ↦ ⟨δℓ/δq(u, v; q), δq⟩`.
    pub fn dl_dq(&self, u: &TangentField, v: &TangentField) -> Result<Covector> {
        u.check_len(self.n())?;
        v.check_len(self.n())?;
        let mesh = self.mesh();
        let mut out = Covector::zeros(self.n());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let el = mesh.element(t);
            let geo = &self.geometry.elements[t];
            let (ul, vl) = (local(u.values(), tri), local(v.values(), tri));
            let m = local_mass_pair(el, ul, vl);
            let gs = sym(field_gradient(el, ul).transpose() * field_gradient(el, vl));
            let w = first_variation_weight(el, geo, self.alpha, m, &gs);
            let dw = geo.dq * w;
            for a in 0..3 {
                out[tri[a]] += dw * el.grads[a];
            }
        }
        Ok(out)
    }

    /// Covector of `δq ↦ d/dε ⟨δℓ/δq(u, u; q + ε δq), w⟩` at `ε = 0`.
    pub fn d2l_dq2(&self, u: &TangentField, w: &TangentField) -> Result<Covector> {
        u.check_len(self.n())?;
        w.check_len(self.n())?;
        let mesh = self.mesh();
        let a2c = self.alpha * self.alpha;
        let mut out = Covector::zeros(self.n());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let el = mesh.element(t);
            let geo = &self.geometry.elements[t];
            let ul = local(u.values(), tri);
            let du = field_gradient(el, ul);
            let omega = field_gradient(el, local(w.values(), tri));
            let d = &geo.dq;
            let gi = &geo.g_inv;
            let a2 = a2c * el.area;

            let m = local_mass_pair(el, ul, ul);
            let gs = sym(du.transpose() * du);
            let c = frob(gi, &gs);
            let h = gi * gs * gi;
            let beta = m + a2 * c;
            let wmat = 0.5 * geo.vol * (beta * gi - 2.0 * a2 * h);

            let s = sym(d.transpose() * omega);
            let s0 = frob(&s, gi);
            let sh = frob(&s, &h);
            let k = gi * s * gi;
            let l = gs * gi * s + s * gi * gs;

            // f(D) = ⟨sym(Dᵀ Ω), W(D)⟩; differentiate the explicit D and then W
            let r: Matrix3x2<f64> = omega * wmat
                + (0.5 * (beta * s0 - 2.0 * a2 * sh) * geo.vol) * (d * gi)
                + (0.5 * geo.vol)
                    * (-2.0 * a2 * s0 * (d * h) - 2.0 * beta * (d * k)
                        + 4.0 * a2 * (d * gi * l * gi));
            for a in 0..3 {
                out[tri[a]] += r * el.grads[a];
            }
        }
        Ok(out)
    }

    /// Covector of `δu ↦ ⟨δℓ/δq(u, δu; q), mu⟩`, i.e. the transpose in the
    /// second slot of the first variation, evaluated against `mu`.
    pub fn dl_dq_transpose(&self, u: &TangentField, mu: &TangentField) -> Result<Covector> {
        u.check_len(self.n())?;
        mu.check_len(self.n())?;
        let mesh = self.mesh();
        let a2c = self.alpha * self.alpha;
        let mut out = Covector::zeros(self.n());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let el = mesh.element(t);
            let geo = &self.geometry.elements[t];
            let ul = local(u.values(), tri);
            let du = field_gradient(el, ul);
            let omega = field_gradient(el, local(mu.values(), tri));
            let gi = &geo.g_inv;
            let s = sym(geo.dq.transpose() * omega);
            let s0 = frob(&s, gi);
            let k = gi * s * gi;
            let z = (0.5 * geo.vol * a2c * el.area) * (s0 * gi - 2.0 * k);
            let mass_w = 0.5 * geo.vol * s0;
            let duz = du * z;
            for b in 0..3 {
                out[tri[b]] += mass_w * local_mass_apply(el, ul, b) + duz * el.grads[b];
            }
        }
        Ok(out)
    }
}

/// Assembles `⟨·,·⟩_q`.
pub fn assemble(q: &Immersion, alpha: f64) -> Result<MetricOperator> {
    MetricOperator::assemble(q, alpha)
}

/// First variation of `ℓ(u, v; q)` with respect to `q`.
pub fn dl_dq(q: &Immersion, alpha: f64, u: &TangentField, v: &TangentField) -> Result<Covector> {
    MetricOperator::assemble(q, alpha)?.dl_dq(u, v)
}

/// Second variation of `ℓ(u, u; q)` with respect to `q`, paired with `w`.
pub fn d2l_dq2(q: &Immersion, alpha: f64, u: &TangentField, w: &TangentField) -> Result<Covector> {
    MetricOperator::assemble(q, alpha)?.d2l_dq2(u, w)
}

/// Mass matrix of the flat parameter measure `dx`.
pub fn parameter_mass(mesh: &DomainMesh) -> CsrMatrix {
    let mut m = CsrMatrix::zeros(mesh.pattern().clone());
    let vals = m.values_mut();
    for (t, el) in mesh.elements().iter().enumerate() {
        let slots = mesh.slots(t);
        for a in 0..3 {
            for b in 0..3 {
                vals[slots[3 * a + b]] += el.mass(a, b);
            }
        }
    }
    m
}

/// Stiffness matrix `∫ ∇φ_a · ∇φ_b dx` of the flat parameter domain.
pub fn parameter_stiffness(mesh: &DomainMesh) -> CsrMatrix {
    let mut s = CsrMatrix::zeros(mesh.pattern().clone());
    let vals = s.values_mut();
    for (t, el) in mesh.elements().iter().enumerate() {
        let slots = mesh.slots(t);
        for a in 0..3 {
            for b in 0..3 {
                vals[slots[3 * a + b]] += el.area * el.grads[a].dot(&el.grads[b]);
            }
        }
    }
    s
}

/// Applies a scalar block matrix to every component of a nodal field.
pub fn apply_blockwise(m: &CsrMatrix, u: &TangentField) -> Covector {
    Covector::from_components([0, 1, 2].map(|k| m.mul_vec(&u.component(k))))
}
