//! Shared inputs for the benchmarks.

use std::sync::Arc;

use innermatch::fixtures::CylinderParams;
use innermatch::{DomainMesh, Immersion, TangentField, Topology, Vec3};

/// Straight and bent cylinders on an `n × n` mesh.
pub fn cylinder_pair(n: usize) -> (Immersion, Immersion) {
    let mesh = Arc::new(DomainMesh::build(Topology::Cylinder, n, n).expect("n ≥ 3"));
    let q0 = CylinderParams::straight().build(mesh.clone()).expect("valid fixture");
    let qt = CylinderParams::bent().build(mesh).expect("valid fixture");
    (q0, qt)
}

/// A smooth bending velocity.
pub fn bending_velocity(q: &Immersion) -> TangentField {
    TangentField::from_fn(q.node_count(), |i| {
        let p = q.coords()[i];
        Vec3::new(0.4 * p.z * p.z, 0.05 * (3.0 * p.z).sin(), -0.1 * p.x * p.z)
    })
}
