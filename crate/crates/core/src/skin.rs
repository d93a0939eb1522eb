//! Linear blend skinning of flat silhouette meshes.
//!
//! A silhouette lives in the rig-local `z = 0` plane. Binding captures the
//! inverse rest transforms; skinning then moves every vertex by the weighted
//! sum of `world_j · bind_j⁻¹`.

use alloc::vec::Vec;

use crate::error::MeshError;
use crate::math::{Transform, Vec3};
use crate::skeleton::{forward_kinematics, Pose, Skeleton};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SilhouetteMesh {
    vertices: Vec<[f64; 2]>,
    polygons: Vec<Vec<usize>>,
    weights: Vec<Vec<(usize, f64)>>,
}

impl SilhouetteMesh {
    /// `polygons[0]` is the outline; any further polygons are holes.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        polygons: Vec<Vec<usize>>,
        weights: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self, MeshError> {
        if vertices.len() != weights.len() {
            return Err(MeshError::WeightCount {
                vertices: vertices.len(),
                weights: weights.len(),
            });
        }
        if polygons.first().is_none_or(|p| p.len() < 3) {
            return Err(MeshError::NoOutline);
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(MeshError::NonFinite(i));
            }
        }
        for (pi, poly) in polygons.iter().enumerate() {
            if let Some(&bad) = poly.iter().find(|&&v| v >= vertices.len()) {
                return Err(MeshError::BadPolygonIndex {
                    polygon: pi,
                    vertex: bad,
                    count: vertices.len(),
                });
            }
        }
        for (vertex, ws) in weights.iter().enumerate() {
            if ws.is_empty() {
                return Err(MeshError::Unweighted { vertex });
            }
            if let Some(&(_, weight)) = ws.iter().find(|(_, w)| *w < 0.0 || !w.is_finite()) {
                return Err(MeshError::NegativeWeight { vertex, weight });
            }
            let sum: f64 = ws.iter().map(|(_, w)| w).sum();
            if sum == 0.0 {
                return Err(MeshError::Unweighted { vertex });
            }
            if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                return Err(MeshError::WeightSum { vertex, sum });
            }
        }
        Ok(SilhouetteMesh {
            vertices,
            polygons,
            weights,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn polygons(&self) -> &[Vec<usize>] {
        &self.polygons
    }

    pub fn weights(&self) -> &[Vec<(usize, f64)>] {
        &self.weights
    }

    pub fn rest_position(&self, i: usize) -> Vec3 {
        let [x, y] = self.vertices[i];
        Vec3::new(x, y, 0.0)
    }

    /// Binds against the skeleton's rest pose.
    pub fn bind(self, skeleton: &Skeleton) -> Result<BoundMesh, MeshError> {
        for (vertex, ws) in self.weights.iter().enumerate() {
            if let Some(&(joint, _)) = ws.iter().find(|(j, _)| *j >= skeleton.len()) {
                return Err(MeshError::BadJoint {
                    vertex,
                    joint,
                    joints: skeleton.len(),
                });
            }
        }
        let rest = forward_kinematics(skeleton, &Pose::identity(skeleton.len()))
            .expect("identity pose always matches its skeleton");
        Ok(BoundMesh {
            bind_inverse: rest.iter().map(Transform::inverse).collect(),
            mesh: self,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BoundMesh {
    mesh: SilhouetteMesh,
    bind_inverse: Vec<Transform>,
}

impl BoundMesh {
    pub fn mesh(&self) -> &SilhouetteMesh {
        &self.mesh
    }

    pub fn joint_count(&self) -> usize {
        self.bind_inverse.len()
    }
}

/// Skinned 3D positions, one per mesh vertex, in input order.
pub fn skin_silhouette(bound: &BoundMesh, transforms: &[Transform]) -> Result<Vec<Vec3>, MeshError> {
    if transforms.len() != bound.bind_inverse.len() {
        return Err(MeshError::TransformCount {
            expected: bound.bind_inverse.len(),
            got: transforms.len(),
        });
    }
    let skinning: Vec<Transform> = transforms.iter().zip(&bound.bind_inverse).map(|(w, b)| w.then(b)).collect();
    let mesh = &bound.mesh;
    Ok((0..mesh.vertices.len())
        .map(|i| {
            let rest = mesh.rest_position(i);
            mesh.weights[i]
                .iter()
                .fold(Vec3::ZERO, |acc, &(j, w)| acc + skinning[j].transform_point(rest) * w)
        })
        .collect())
}
