//! Deterministic parametric shape generators: straight and bent cylinders,
//! asymmetric tori and vases.
//!
//! These are reconstructions. Every shape parameter lives in a serializable
//! struct so experiments can be reproduced from a config file.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Rotation3, Unit, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Immersion, Vec3};
use crate::mesh::{DomainMesh, Topology};

fn require_topology(mesh: &DomainMesh, t: Topology) -> Result<()> {
    if mesh.topology() == t {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "fixture needs a {t} mesh, got {}",
            mesh.topology()
        )))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// A cylinder around the z axis, optionally bent in the x–z plane and with
/// radial ripples along its axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CylinderParams {
    pub radius: f64,
    pub height: f64,
    /// Total bend of the axis in degrees; 0 keeps it straight.
    pub bend_deg: f64,
    pub ripples: u32,
    /// Absolute radial amplitude of the ripples.
    pub ripple_amplitude: f64,
}

impl Default for CylinderParams {
    fn default() -> Self {
        CylinderParams {
            radius: 0.25,
            height: 1.0,
            bend_deg: 0.0,
            ripples: 0,
            ripple_amplitude: 0.0,
        }
    }
}

impl CylinderParams {
    pub fn straight() -> Self {
        Self::default()
    }

    /// Bent by 90° with 5 ripples of amplitude 0.02.
    pub fn bent() -> Self {
        CylinderParams {
            bend_deg: 90.0,
            ripples: 5,
            ripple_amplitude: 0.02,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        positive("radius", self.radius)?;
        positive("height", self.height)?;
        if !self.bend_deg.is_finite() || self.bend_deg.abs() >= 360.0 {
            return Err(Error::InvalidParameter(format!(
                "bend angle must lie in (-360, 360), got {}",
                self.bend_deg
            )));
        }
        if !(self.ripple_amplitude.abs() < self.radius) {
            return Err(Error::InvalidParameter(
                "ripple amplitude must be smaller than the radius".into(),
            ));
        }
        let bend = self.bend_deg.to_radians().abs();
        if bend > 0.0 && self.height / bend <= self.radius + self.ripple_amplitude.abs() {
            return Err(Error::InvalidParameter(
                "bend radius smaller than the tube radius folds the surface".into(),
            ));
        }
        Ok(())
    }

    pub fn point(&self, x: f64, y: f64) -> Vec3 {
        let theta = 2.0 * PI * x;
        let r = self.radius
            + self.ripple_amplitude * (2.0 * PI * f64::from(self.ripples) * y).sin();
        let (ox, oy) = (r * theta.cos(), r * theta.sin());
        let s = y * self.height;
        let bend = self.bend_deg.to_radians();
        if bend == 0.0 {
            return Vec3::new(ox, oy, s);
        }
        // the axis follows a circular arc of length `height`, rotating about y
        let big_r = self.height / bend;
        let phi = bend * y;
        let (sp, cp) = phi.sin_cos();
        Vec3::new(big_r * (1.0 - cp) + ox * cp, oy, big_r * sp - ox * sp)
    }

    pub fn build(&self, mesh: Arc<DomainMesh>) -> Result<Immersion> {
        require_topology(&mesh, Topology::Cylinder)?;
        self.validate()?;
        Immersion::from_fn(mesh, |x, y| self.point(x, y))
    }
}

/// A torus whose tube radius varies around the major circle, placed by a
/// rotation about `axis` and a translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TorusParams {
    pub major_radius: f64,
    pub minor_radius: f64,
    /// Relative tube-radius variation: `r(θ) = r (1 + asymmetry cos θ)`.
    pub asymmetry: f64,
    pub axis: [f64; 3],
    pub angle_deg: f64,
    pub offset: [f64; 3],
}

impl Default for TorusParams {
    fn default() -> Self {
        TorusParams {
            major_radius: 0.35,
            minor_radius: 0.15,
            asymmetry: 0.4,
            axis: [1.0, 0.0, 0.0],
            angle_deg: 0.0,
            offset: [0.0; 3],
        }
    }
}

impl TorusParams {
    fn validate(&self) -> Result<()> {
        positive("major radius", self.major_radius)?;
        positive("minor radius", self.minor_radius)?;
        if !(self.asymmetry.abs() < 1.0) {
            return Err(Error::InvalidParameter("asymmetry must lie in (-1, 1)".into()));
        }
        if self.minor_radius * (1.0 + self.asymmetry.abs()) >= self.major_radius {
            return Err(Error::InvalidParameter("tube self-intersects".into()));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        let axis = Vector3::from(self.axis);
        if axis.norm() == 0.0 || self.angle_deg == 0.0 {
            return Rotation3::identity();
        }
        Rotation3::from_axis_angle(&Unit::new_normalize(axis), self.angle_deg.to_radians())
    }

    /// Shape before placement.
    pub fn local_point(&self, x: f64, y: f64) -> Vec3 {
        let (st, ct) = (2.0 * PI * x).sin_cos();
        let (sp, cp) = (2.0 * PI * y).sin_cos();
        let r = self.minor_radius * (1.0 + self.asymmetry * ct);
        let ring = self.major_radius + r * cp;
        Vec3::new(ring * ct, ring * st, r * sp)
    }

    pub fn build(&self, mesh: Arc<DomainMesh>) -> Result<Immersion> {
        require_topology(&mesh, Topology::Torus)?;
        self.validate()?;
        let rot = self.rotation();
        let b = Vec3::from(self.offset);
        Immersion::from_fn(mesh, |x, y| rot * self.local_point(x, y) + b)
    }
}

/// The asymmetric-torus triangle: one torus and two rotated copies, each
/// pair related by a composition of two rotations.
pub fn torus_triangle(mesh: Arc<DomainMesh>, base: &TorusParams, angle_deg: f64) -> Result<[Immersion; 3]> {
    let a = base.build(mesh)?;
    let t = angle_deg.to_radians();
    let rb = Rotation3::from_axis_angle(&Vector3::x_axis(), t)
        * Rotation3::from_axis_angle(&Vector3::z_axis(), 0.5 * t);
    let rc = Rotation3::from_axis_angle(&Vector3::y_axis(), t)
        * Rotation3::from_axis_angle(&Vector3::z_axis(), -0.5 * t);
    let zero = Vec3::zeros();
    let b = a.rigid(&rb, &zero);
    let c = a.rigid(&rc, &zero);
    Ok([a, b, c])
}

/// A vase: a cylinder along z with radius profile
/// `r(y) = radius (1 + Σ_k coeffs[k] sin((k+1) π y))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VaseParams {
    pub radius: f64,
    pub height: f64,
    pub coeffs: Vec<f64>,
}

impl Default for VaseParams {
    fn default() -> Self {
        VaseParams {
            radius: 0.25,
            height: 1.0,
            coeffs: vec![0.3, 0.0, -0.1],
        }
    }
}

impl VaseParams {
    pub fn profile(&self, y: f64) -> f64 {
        let s: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * ((k + 1) as f64 * PI * y).sin())
            .sum();
        self.radius * (1.0 + s)
    }

    pub fn build(&self, mesh: Arc<DomainMesh>) -> Result<Immersion> {
        require_topology(&mesh, Topology::Cylinder)?;
        positive("radius", self.radius)?;
        positive("height", self.height)?;
        let (_, uy) = mesh.unique_dims();
        for j in 0..uy {
            let r = self.profile(j as f64 / mesh.ny() as f64);
            if !(r > 0.0) {
                return Err(Error::InvalidParameter(format!("vase radius {r} ≤ 0 at row {j}")));
            }
        }
        Immersion::from_fn(mesh, |x, y| {
            let r = self.profile(y);
            let (s, c) = (2.0 * PI * x).sin_cos();
            Vec3::new(r * c, r * s, y * self.height)
        })
    }

    /// The five shipped vase reconstructions.
    pub fn family() -> Vec<VaseParams> {
        [
            vec![0.35, 0.0, 0.0],
            vec![0.2, 0.15, 0.0],
            vec![0.25, -0.15, 0.05],
            vec![0.1, 0.0, 0.12],
            vec![0.3, 0.1, -0.08],
        ]
        .into_iter()
        .map(|coeffs| VaseParams {
            coeffs,
            ..VaseParams::default()
        })
        .collect()
    }
}

/// Torus with independent random nodal perturbations of size `noise`.
pub fn perturbed_torus(
    mesh: Arc<DomainMesh>,
    major: f64,
    minor: f64,
    noise: f64,
    rng: &mut impl Rng,
) -> Result<Immersion> {
    let params = TorusParams {
        major_radius: major,
        minor_radius: minor,
        asymmetry: 0.0,
        ..TorusParams::default()
    };
    let mut q = params.build(mesh)?;
    for c in q.coords_mut() {
        *c += noise * Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{check_regularity, surface_area};

    fn cyl_mesh(n: usize) -> Arc<DomainMesh> {
        Arc::new(DomainMesh::build(Topology::Cylinder, n, n).unwrap())
    }

    #[test]
    fn straight_cylinder_geometry() {
        let q = CylinderParams::straight().build(cyl_mesh(16)).unwrap();
        for c in q.coords() {
            assert!(((c.x * c.x + c.y * c.y).sqrt() - 0.25).abs() < 1e-14);
            assert!(c.z >= 0.0 && c.z <= 1.0);
        }
    }

    #[test]
    fn zero_bend_zero_ripple_is_straight_cylinder() {
        let p = CylinderParams {
            bend_deg: 0.0,
            ripples: 5,
            ripple_amplitude: 0.0,
            ..CylinderParams::default()
        };
        let a = p.build(cyl_mesh(8)).unwrap();
        let b = CylinderParams::straight().build(cyl_mesh(8)).unwrap();
        assert_eq!(a.coords(), b.coords());
    }

    #[test]
    fn bent_cylinder_axis_turns_ninety_degrees() {
        let p = CylinderParams::bent();
        // axis tangent at the top: (sin 90°, 0, cos 90°)
        let top_center = (p.point(0.0, 1.0) + p.point(0.5, 1.0)) / 2.0;
        let below = (p.point(0.0, 0.999) + p.point(0.5, 0.999)) / 2.0;
        let dir = (top_center - below).normalize();
        assert!((dir - Vec3::x()).norm() < 1e-2);
        let q = p.build(cyl_mesh(16)).unwrap();
        assert!(check_regularity(&q, 1e-8).is_empty());
    }

    #[test]
    fn invalid_parameters() {
        let p = CylinderParams {
            radius: -1.0,
            ..CylinderParams::default()
        };
        assert!(p.build(cyl_mesh(4)).is_err());
        let torus_mesh = Arc::new(DomainMesh::build(Topology::Torus, 4, 4).unwrap());
        assert!(CylinderParams::default().build(torus_mesh.clone()).is_err());
        let t = TorusParams {
            minor_radius: 0.4,
            ..TorusParams::default()
        };
        assert!(t.build(torus_mesh).is_err());
    }

    #[test]
    fn torus_triangle_vertices_are_congruent() {
        let mesh = Arc::new(DomainMesh::build(Topology::Torus, 12, 8).unwrap());
        let [a, b, c] = torus_triangle(mesh, &TorusParams::default(), 60.0).unwrap();
        let (sa, sb, sc) = (surface_area(&a), surface_area(&b), surface_area(&c));
        assert!((sa - sb).abs() < 1e-12 && (sa - sc).abs() < 1e-12);
        assert!(check_regularity(&a, 1e-8).is_empty());
    }

    #[test]
    fn vase_family_is_regular_and_distinct() {
        let mesh = cyl_mesh(12);
        let shapes: Vec<Immersion> = VaseParams::family()
            .iter()
            .map(|p| p.build(mesh.clone()).unwrap())
            .collect();
        assert_eq!(shapes.len(), 5);
        for s in &shapes {
            assert!(check_regularity(s, 1e-8).is_empty());
        }
        assert!(shapes[0].coords() != shapes[1].coords());
    }
}
