//! Structured triangular meshes on the unit square with periodic node
//! identification for the cylinder and the torus.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SparsityPattern;

/// Model domain of a parametrized surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// `[0,1] × [0,1]`, no identification.
    #[serde(alias = "plane-sheet", alias = "planesheet")]
    Plane,
    /// `S¹ × [0,1]`, periodic in the first coordinate.
    Cylinder,
    /// `S¹ × S¹`, periodic in both coordinates.
    Torus,
}

impl Topology {
    pub fn periodic_x(self) -> bool {
        matches!(self, Topology::Cylinder | Topology::Torus)
    }

    pub fn periodic_y(self) -> bool {
        matches!(self, Topology::Torus)
    }

    pub fn name(self) -> &'static str {
        match self {
            Topology::Plane => "plane",
            Topology::Cylinder => "cylinder",
            Topology::Torus => "torus",
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plane" | "planesheet" | "plane-sheet" => Ok(Topology::Plane),
            "cylinder" => Ok(Topology::Cylinder),
            "torus" => Ok(Topology::Torus),
            other => Err(Error::InvalidParameter(format!("unknown topology `{other}`"))),
        }
    }
}

/// Parameter-space data of one linear triangle: the constant gradients of its
/// three nodal basis functions and its area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceElement {
    pub grads: [Vector2<f64>; 3],
    pub area: f64,
}

impl ReferenceElement {
    fn from_corners(p: [Vector2<f64>; 3]) -> Self {
        let e = Matrix2::from_columns(&[p[1] - p[0], p[2] - p[0]]);
        let det = e.determinant();
        // rows of E⁻¹ are the gradients of φ₁ and φ₂
        let inv = Matrix2::new(e[(1, 1)], -e[(0, 1)], -e[(1, 0)], e[(0, 0)]) / det;
        let g1 = Vector2::new(inv[(0, 0)], inv[(0, 1)]);
        let g2 = Vector2::new(inv[(1, 0)], inv[(1, 1)]);
        ReferenceElement {
            grads: [-g1 - g2, g1, g2],
            area: 0.5 * det,
        }
    }

    /// Exact mass matrix entry `∫_T φ_a φ_b dx`.
    pub fn mass(&self, a: usize, b: usize) -> f64 {
        if a == b {
            self.area / 6.0
        } else {
            self.area / 12.0
        }
    }
}

/// A regular triangulation of one of the model domains.
///
/// Immutable after construction; share it behind an [`Arc`].
#[derive(Debug, Clone)]
pub struct DomainMesh {
    topology: Topology,
    nx: usize,
    ny: usize,
    nodes: Vec<Vector2<f64>>,
    triangles: Vec<[usize; 3]>,
    dof_map: Vec<usize>,
    elements: Vec<ReferenceElement>,
    pattern: Arc<SparsityPattern>,
    slots: Vec<[usize; 9]>,
}

impl DomainMesh {
    /// Builds the `nx × ny` grid on `topology`, splitting every cell along its
    /// lower-left to upper-right diagonal.
    pub fn build(topology: Topology, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidResolution { nx, ny });
        }
        if topology.periodic_x() && nx < 3 {
            return Err(Error::ResolutionTooSmall {
                direction: "nx",
                value: nx,
            });
        }
        if topology.periodic_y() && ny < 3 {
            return Err(Error::ResolutionTooSmall {
                direction: "ny",
                value: ny,
            });
        }
        let overflow = || Error::ResolutionOverflow { nx, ny };
        let gx = nx.checked_add(1).ok_or_else(overflow)?;
        let gy = ny.checked_add(1).ok_or_else(overflow)?;
        let grid_points = gx.checked_mul(gy).ok_or_else(overflow)?;
        // 3 components per node and 2 triangles per cell must stay addressable
        grid_points.checked_mul(3).ok_or_else(overflow)?;
        nx.checked_mul(ny)
            .and_then(|c| c.checked_mul(2))
            .ok_or_else(overflow)?;

        let ux = if topology.periodic_x() { nx } else { gx };
        let uy = if topology.periodic_y() { ny } else { gy };

        let mut nodes = Vec::with_capacity(ux * uy);
        for j in 0..uy {
            for i in 0..ux {
                nodes.push(Vector2::new(i as f64 / nx as f64, j as f64 / ny as f64));
            }
        }

        let mut dof_map = Vec::with_capacity(grid_points);
        for j in 0..gy {
            for i in 0..gx {
                dof_map.push((i % ux) + (j % uy) * ux);
            }
        }
        let grid = |i: usize, j: usize| dof_map[i + j * gx];
        let param = |i: usize, j: usize| Vector2::new(i as f64 / nx as f64, j as f64 / ny as f64);

        let mut triangles = Vec::with_capacity(2 * nx * ny);
        let mut elements = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                for tri in [[0, 1, 2], [0, 2, 3]] {
                    let c = tri.map(|k| corners[k]);
                    triangles.push(c.map(|(a, b)| grid(a, b)));
                    elements.push(ReferenceElement::from_corners(c.map(|(a, b)| param(a, b))));
                }
            }
        }

        let mut rows = vec![BTreeSet::new(); nodes.len()];
        for t in &triangles {
            for &a in t {
                for &b in t {
                    rows[a].insert(b);
                }
            }
        }
        let pattern = Arc::new(SparsityPattern::from_rows(&rows));
        let slots = triangles
            .iter()
            .map(|t| {
                let mut s = [0; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        s[3 * a + b] = pattern.position(t[a], t[b]).expect("pattern covers element");
                    }
                }
                s
            })
            .collect();

        Ok(DomainMesh {
            topology,
            nx,
            ny,
            nodes,
            triangles,
            dof_map,
            elements,
            pattern,
            slots,
        })
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Parameter-space positions of the unique nodes.
    pub fn nodes(&self) -> &[Vector2<f64>] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn elements(&self) -> &[ReferenceElement] {
        &self.elements
    }

    pub fn element(&self, tri: usize) -> &ReferenceElement {
        &self.elements[tri]
    }

    /// Grid index `i + j (nx+1)` to unique node index.
    pub fn dof_map(&self) -> &[usize] {
        &self.dof_map
    }

    /// Unique node of grid point `(i, j)`, `0 ≤ i ≤ nx`, `0 ≤ j ≤ ny`.
    pub fn grid_node(&self, i: usize, j: usize) -> usize {
        self.dof_map[i + j * (self.nx + 1)]
    }

    /// Number of unique node columns and rows.
    pub fn unique_dims(&self) -> (usize, usize) {
        let ux = if self.topology.periodic_x() { self.nx } else { self.nx + 1 };
        let uy = if self.topology.periodic_y() { self.ny } else { self.ny + 1 };
        (ux, uy)
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    /// Value-array positions of the 3×3 element block of triangle `tri`, row-major.
    pub fn slots(&self, tri: usize) -> &[usize; 9] {
        &self.slots[tri]
    }

    /// True if both meshes discretize the same domain at the same resolution.
    pub fn is_compatible(&self, other: &DomainMesh) -> bool {
        self.topology == other.topology && self.nx == other.nx && self.ny == other.ny
    }
}

impl PartialEq for DomainMesh {
    fn eq(&self, other: &Self) -> bool {
        self.is_compatible(other) && self.triangles == other.triangles
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_plane() {
        let m = DomainMesh::build(Topology::Plane, 1, 1).unwrap();
        assert_eq!(m.triangle_count(), 2);
        assert_eq!(m.node_count(), 4);
    }

    #[test]
    fn torus_at_reported_resolution() {
        let m = DomainMesh::build(Topology::Torus, 30, 30).unwrap();
        assert_eq!(m.triangle_count(), 1800);
        assert_eq!(m.node_count(), 900);
    }

    #[test]
    fn cylinder_two_by_two_is_rejected() {
        // two subdivisions around a periodic direction would alias edges
        let err = DomainMesh::build(Topology::Cylinder, 2, 2).unwrap_err();
        assert!(matches!(err, Error::ResolutionTooSmall { direction: "nx", value: 2 }));
    }

    #[test]
    fn cylinder_node_count() {
        let m = DomainMesh::build(Topology::Cylinder, 3, 2).unwrap();
        assert_eq!(m.triangle_count(), 12);
        assert_eq!(m.node_count(), 3 * 3);
    }

    #[test]
    fn periodic_y_minimum() {
        let err = DomainMesh::build(Topology::Torus, 4, 2).unwrap_err();
        assert!(matches!(err, Error::ResolutionTooSmall { direction: "ny", .. }));
        assert!(DomainMesh::build(Topology::Plane, 1, 2).is_ok());
    }

    #[test]
    fn zero_resolution() {
        assert!(matches!(
            DomainMesh::build(Topology::Plane, 0, 3),
            Err(Error::InvalidResolution { .. })
        ));
    }

    #[test]
    fn overflow_is_reported() {
        let err = DomainMesh::build(Topology::Plane, usize::MAX, 2).unwrap_err();
        assert!(matches!(err, Error::ResolutionOverflow { .. }));
        let err = DomainMesh::build(Topology::Plane, usize::MAX / 4, usize::MAX / 4).unwrap_err();
        assert!(matches!(err, Error::ResolutionOverflow { .. }));
    }

    #[test]
    fn areas_and_orientation() {
        for (topo, nx, ny) in [
            (Topology::Plane, 1, 1),
            (Topology::Plane, 5, 3),
            (Topology::Cylinder, 3, 1),
            (Topology::Cylinder, 7, 4),
            (Topology::Torus, 3, 3),
            (Topology::Torus, 11, 6),
        ] {
            let m = DomainMesh::build(topo, nx, ny).unwrap();
            let total: f64 = m.elements().iter().map(|e| e.area).sum();
            assert!((total - 1.0).abs() < 1e-12, "{topo} {nx}x{ny}: {total}");
            assert!(m.elements().iter().all(|e| e.area > 0.0));
            let expected = match topo {
                Topology::Plane => (nx + 1) * (ny + 1),
                Topology::Cylinder => nx * (ny + 1),
                Topology::Torus => nx * ny,
            };
            assert_eq!(m.node_count(), expected);
            // identification is idempotent
            for &d in m.dof_map() {
                assert!(d < m.node_count());
                let (ux, _) = m.unique_dims();
                let (i, j) = (d % ux, d / ux);
                assert_eq!(m.grid_node(i, j), d);
            }
        }
    }

    #[test]
    fn basis_gradients_sum_to_zero() {
        let m = DomainMesh::build(Topology::Torus, 4, 5).unwrap();
        for e in m.elements() {
            let s = e.grads[0] + e.grads[1] + e.grads[2];
            assert!(s.norm() < 1e-12);
        }
    }

    #[test]
    fn topology_parsing() {
        assert_eq!("Torus".parse::<Topology>().unwrap(), Topology::Torus);
        assert_eq!("plane-sheet".parse::<Topology>().unwrap(), Topology::Plane);
        assert!("sphere".parse::<Topology>().is_err());
    }
}
