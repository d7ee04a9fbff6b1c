//! First fundamental form, its inverse and the area density of an immersed
//! surface, one set per linear triangle.

use nalgebra::{Matrix2, Matrix3x2};

use crate::error::{Error, Result};
use crate::field::{Immersion, TangentField};
use crate::mesh::ReferenceElement;

/// Default regularity threshold, relative to the median element area density.
pub const DEFAULT_REL_EPS_REG: f64 = 1e-10;

/// Geometry of an immersed linear triangle. All quantities are constant on
/// the element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    /// `∂q/∂xⁱ` as columns.
    pub dq: Matrix3x2<f64>,
    /// `g_ij = ∂_i q · ∂_j q`.
    pub g: Matrix2<f64>,
    pub g_inv: Matrix2<f64>,
    /// `√det g`.
    pub vol: f64,
}

/// Gradient of a nodal field on one element: row `k` holds `∂_i u^k`.
pub(crate) fn field_gradient(
    el: &ReferenceElement,
    values: [&nalgebra::Vector3<f64>; 3],
) -> Matrix3x2<f64> {
    let mut d = Matrix3x2::zeros();
    for (v, g) in values.iter().zip(&el.grads) {
        d += *v * g.transpose();
    }
    d
}

impl ElementGeometry {
    /// Geometry from the derivative matrix; `None` if `det g ≤ eps²` or not finite.
    pub fn from_dq(dq: Matrix3x2<f64>, eps: f64) -> std::result::Result<Self, f64> {
        let g = dq.transpose() * dq;
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        if !(det > eps * eps) || !det.is_finite() {
            return Err(det);
        }
        let g_inv = Matrix2::new(g[(1, 1)], -g[(0, 1)], -g[(1, 0)], g[(0, 0)]) / det;
        Ok(ElementGeometry {
            dq,
            g,
            g_inv,
            vol: det.sqrt(),
        })
    }
}

/// Geometry of triangle `tri` of `q`. Fails if `det g ≤ eps_reg²`.
pub fn element_geometry(q: &Immersion, tri: usize, eps_reg: f64) -> Result<ElementGeometry> {
    let mesh = q.mesh();
    let t = mesh.triangles()[tri];
    let c = q.coords();
    let dq = field_gradient(mesh.element(tri), [&c[t[0]], &c[t[1]], &c[t[2]]]);
    ElementGeometry::from_dq(dq, eps_reg).map_err(|det| Error::DegenerateElement { triangle: tri, det })
}

fn raw_volumes(q: &Immersion) -> Vec<f64> {
    let mesh = q.mesh();
    let c = q.coords();
    mesh.triangles()
        .iter()
        .zip(mesh.elements())
        .map(|(t, el)| {
            let dq = field_gradient(el, [&c[t[0]], &c[t[1]], &c[t[2]]]);
            let g = dq.transpose() * dq;
            g.determinant().max(0.0).sqrt()
        })
        .collect()
}

/// Geometry of every triangle of a surface.
#[derive(Debug, Clone)]
pub struct SurfaceGeometry {
    pub elements: Vec<ElementGeometry>,
}

impl SurfaceGeometry {
    /// Uses the default threshold `1e-10 × median vol(g)`.
    pub fn compute(q: &Immersion) -> Result<Self> {
        let eps = default_eps_reg(q);
        Self::compute_with(q, eps)
    }

    pub fn compute_with(q: &Immersion, eps_reg: f64) -> Result<Self> {
        let elements = (0..q.mesh().triangle_count())
            .map(|t| element_geometry(q, t, eps_reg))
            .collect::<Result<Vec<_>>>()?;
        Ok(SurfaceGeometry { elements })
    }

    /// `Σ_T vol(g) · |T|`.
    pub fn area(&self, q: &Immersion) -> f64 {
        self.elements
            .iter()
            .zip(q.mesh().elements())
            .map(|(e, r)| e.vol * r.area)
            .sum()
    }
}

/// `DEFAULT_REL_EPS_REG` times the median element area density.
pub fn default_eps_reg(q: &Immersion) -> f64 {
    let mut v = raw_volumes(q);
    v.sort_by(f64::total_cmp);
    let median = if v.is_empty() { 0.0 } else { v[v.len() / 2] };
    // a fully collapsed surface keeps a positive threshold so it is rejected
    (DEFAULT_REL_EPS_REG * median).max(f64::MIN_POSITIVE)
}

/// Triangles whose area density does not exceed `eps_reg`.
pub fn check_regularity(q: &Immersion, eps_reg: f64) -> Vec<usize> {
    raw_volumes(q)
        .into_iter()
        .enumerate()
        .filter(|&(_, v)| !(v > eps_reg))
        .map(|(t, _)| t)
        .collect()
}

/// Surface area `Σ_T vol(g) |T|`, without regularity checks.
pub fn surface_area(q: &Immersion) -> f64 {
    raw_volumes(q)
        .into_iter()
        .zip(q.mesh().elements())
        .map(|(v, r)| v * r.area)
        .sum()
}

/// Per-node deformation magnitude `|u|`, convenience re-export for exporters.
pub fn magnitudes(u: &TangentField) -> Vec<f64> {
    u.magnitudes()
}
