mod common;

use std::sync::Arc;

use common::*;
use innermatch::fixtures::CylinderParams;
use innermatch::shooting::{path_energy, path_length, shoot};
use innermatch::{DomainMesh, Immersion, TangentField, Topology, Vec3};
use nalgebra::{Rotation3, Vector3};

fn cylinder(n: usize) -> Immersion {
    CylinderParams::straight()
        .build(Arc::new(DomainMesh::build(Topology::Cylinder, n, n).unwrap()))
        .unwrap()
}

/// A smooth bending velocity on the cylinder.
fn bend(q: &Immersion) -> TangentField {
    TangentField::from_fn(q.node_count(), |i| {
        let p = q.coords()[i];
        Vec3::new(0.4 * p.z * p.z, 0.05 * (3.0 * p.z).sin(), -0.1 * p.x * p.z)
    })
}

#[test]
fn zero_velocity_path_is_constant_on_every_topology() {
    let mut r = rng(31);
    let q = small_torus(5, 4, &mut r);
    let path = shoot(&q, &TangentField::zeros(q.node_count()), 6, 0.6).unwrap();
    assert!(path.surfaces().iter().all(|s| s == &q));
    assert!(path.velocities().iter().all(|u| u.max_abs() == 0.0));
}

#[test]
fn energy_bookkeeping_and_length_bound() {
    let q = cylinder(8);
    let path = shoot(&q, &bend(&q), 8, 0.6).unwrap();
    let sum: f64 = path.kinetic()[..8].iter().sum();
    assert!((path_energy(&path) - path.dt() * sum).abs() <= 1e-14 * path_energy(&path));
    assert!(path_length(&path).powi(2) <= 2.0 * path_energy(&path) + 1e-12);
}

#[test]
fn shooting_is_rigid_equivariant() {
    let q = cylinder(8);
    let u = bend(&q);
    let rot = Rotation3::from_euler_angles(1.0, -0.4, 2.2);
    let b = Vector3::new(3.0, -1.0, 0.5);
    let a = shoot(&q, &u, 6, 0.6).unwrap();
    let c = shoot(&q.rigid(&rot, &b), &u.rotated(&rot), 6, 0.6).unwrap();
    for i in 0..=6 {
        let dq = c.surfaces()[i].difference(&a.surfaces()[i].rigid(&rot, &b)).max_abs();
        let du = (&c.velocities()[i] - &a.velocities()[i].rotated(&rot)).max_abs();
        assert!(dq <= 1e-10 && du <= 1e-10, "step {i}: {dq:e} {du:e}");
    }
}

#[test]
fn endpoints_converge_at_first_order() {
    let q = cylinder(8);
    let u = bend(&q);
    let ends: Vec<Immersion> = [8, 16, 32].iter().map(|&n| shoot(&q, &u, n, 0.6).unwrap().end().clone()).collect();
    let ratio = ends[0].difference(&ends[1]).max_abs() / ends[1].difference(&ends[2]).max_abs();
    assert!((ratio - 2.0).abs() < 0.5, "{ratio}");
}
