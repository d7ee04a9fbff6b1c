//! Nodal ℝ³-valued fields: surfaces, velocities and their duals.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::{Rotation3, Vector3};

use crate::error::{Error, Result};
use crate::mesh::DomainMesh;

pub type Vec3 = Vector3<f64>;

macro_rules! nodal_vector {
    ($name:ident) => {
        impl $name {
            pub fn zeros(n: usize) -> Self {
                $name(vec![Vec3::zeros(); n])
            }

            pub fn from_fn(n: usize, f: impl FnMut(usize) -> Vec3) -> Self {
                $name((0..n).map(f).collect())
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn values(&self) -> &[Vec3] {
                &self.0
            }

            pub fn values_mut(&mut self) -> &mut [Vec3] {
                &mut self.0
            }

            pub fn into_values(self) -> Vec<Vec3> {
                self.0
            }

            pub fn iter(&self) -> std::slice::Iter<'_, Vec3> {
                self.0.iter()
            }

            /// `self += s · other`
            pub fn axpy(&mut self, s: f64, other: &Self) {
                for (a, b) in self.0.iter_mut().zip(&other.0) {
                    *a += s * b;
                }
            }

            pub fn scaled(&self, s: f64) -> Self {
                $name(self.0.iter().map(|v| v * s).collect())
            }

            /// Largest absolute nodal component.
            pub fn max_abs(&self) -> f64 {
                self.0.iter().map(|v| v.amax()).fold(0.0, f64::max)
            }

            /// Component `k` of every node.
            pub fn component(&self, k: usize) -> Vec<f64> {
                self.0.iter().map(|v| v[k]).collect()
            }

            pub fn from_components(c: [Vec<f64>; 3]) -> Self {
                $name(
                    (0..c[0].len())
                        .map(|i| Vec3::new(c[0][i], c[1][i], c[2][i]))
                        .collect(),
                )
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.iter().all(|x| x.is_finite()))
            }

            /// Applies `R` to every nodal vector.
            pub fn rotated(&self, r: &Rotation3<f64>) -> Self {
                $name(self.0.iter().map(|v| r * v).collect())
            }

            pub(crate) fn check_len(&self, n: usize) -> Result<()> {
                if self.0.len() == n {
                    Ok(())
                } else {
                    Err(Error::DimensionMismatch {
                        expected: n,
                        actual: self.0.len(),
                    })
                }
            }
        }

        impl Index<usize> for $name {
            type Output = Vec3;
            fn index(&self, i: usize) -> &Vec3 {
                &self.0[i]
            }
        }

        impl IndexMut<usize> for $name {
            fn index_mut(&mut self, i: usize) -> &mut Vec3 {
                &mut self.0[i]
            }
        }

        impl Add for &$name {
            type Output = $name;
            fn add(self, rhs: &$name) -> $name {
                $name(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
            }
        }

        impl Sub for &$name {
            type Output = $name;
            fn sub(self, rhs: &$name) -> $name {
                $name(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
            }
        }

        impl Neg for &$name {
            type Output = $name;
            fn neg(self) -> $name {
                $name(self.0.iter().map(|a| -a).collect())
            }
        }

        impl Mul<f64> for &$name {
            type Output = $name;
            fn mul(self, s: f64) -> $name {
                self.scaled(s)
            }
        }

        impl From<Vec<Vec3>> for $name {
            fn from(v: Vec<Vec3>) -> Self {
                $name(v)
            }
        }
    };
}

/// A velocity or variation: one ℝ³ vector per unique mesh node.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentField(pub Vec<Vec3>);

/// A linear functional on nodal fields, represented by its nodal coefficients.
///
/// Pairing with a [`TangentField`] is the plain nodal sum `Σ_a p_a · u_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Covector(pub Vec<Vec3>);

nodal_vector!(TangentField);
nodal_vector!(Covector);

impl Covector {
    pub fn pair(&self, u: &TangentField) -> f64 {
        self.0.iter().zip(&u.0).map(|(p, u)| p.dot(u)).sum()
    }
}

impl TangentField {
    /// Nodal Euclidean dot product, for diagnostics only.
    pub fn nodal_dot(&self, other: &TangentField) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.dot(b)).sum()
    }

    /// Per-node Euclidean length.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.norm()).collect()
    }
}

/// A parametrized surface `q: M → ℝ³`, sampled at the unique mesh nodes.
#[derive(Debug, Clone)]
pub struct Immersion {
    mesh: Arc<DomainMesh>,
    coords: Vec<Vec3>,
}

impl Immersion {
    pub fn new(mesh: Arc<DomainMesh>, coords: Vec<Vec3>) -> Result<Self> {
        if coords.len() != mesh.node_count() {
            return Err(Error::DimensionMismatch {
                expected: mesh.node_count(),
                actual: coords.len(),
            });
        }
        if coords.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidParameter("non-finite immersion coordinate".into()));
        }
        Ok(Immersion { mesh, coords })
    }

    /// Samples `f` at the parameter position of every unique node.
    pub fn from_fn(mesh: Arc<DomainMesh>, f: impl Fn(f64, f64) -> Vec3) -> Result<Self> {
        let coords = mesh.nodes().iter().map(|p| f(p.x, p.y)).collect();
        Immersion::new(mesh, coords)
    }

    /// The identity immersion `(x¹, x², 0)`; only meaningful on the plane sheet.
    pub fn flat(mesh: Arc<DomainMesh>) -> Self {
        Immersion::from_fn(mesh, |x, y| Vec3::new(x, y, 0.0)).expect("finite")
    }

    pub fn mesh(&self) -> &Arc<DomainMesh> {
        &self.mesh
    }

    pub fn coords(&self) -> &[Vec3] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [Vec3] {
        &mut self.coords
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    /// `q + s · u`, nodal-wise.
    pub fn displaced(&self, s: f64, u: &TangentField) -> Immersion {
        debug_assert_eq!(u.len(), self.coords.len());
        Immersion {
            mesh: self.mesh.clone(),
            coords: self.coords.iter().zip(u.values()).map(|(q, u)| q + s * u).collect(),
        }
    }

    /// `q − other` as a nodal field.
    pub fn difference(&self, other: &Immersion) -> TangentField {
        TangentField(self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect())
    }

    /// `R q + b`.
    pub fn rigid(&self, r: &Rotation3<f64>, b: &Vec3) -> Immersion {
        Immersion {
            mesh: self.mesh.clone(),
            coords: self.coords.iter().map(|q| r * q + b).collect(),
        }
    }

    pub fn ensure_compatible(&self, other: &Immersion) -> Result<()> {
        if self.mesh.is_compatible(&other.mesh) && self.node_count() == other.node_count() {
            Ok(())
        } else {
            Err(Error::MeshMismatch(format!(
                "{} {}x{} vs {} {}x{}",
                self.mesh.topology(),
                self.mesh.nx(),
                self.mesh.ny(),
                other.mesh.topology(),
                other.mesh.nx(),
                other.mesh.ny()
            )))
        }
    }

    pub fn as_field(&self) -> TangentField {
        TangentField(self.coords.clone())
    }
}

impl PartialEq for Immersion {
    fn eq(&self, other: &Self) -> bool {
        *self.mesh == *other.mesh && self.coords == other.coords
    }
}
