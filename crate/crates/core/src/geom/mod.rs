//! Points, transforms, planes, indexed triangle meshes and STL.

mod mesh;
pub mod stl;
mod transform;
mod vec;

pub use mesh::{transform_mesh, MeshStats, TriMesh, Triangle};
pub use transform::{reflect_point, reflection_transform, rotation_onto_x, Plane, Transform4};
pub use vec::{Aabb, Point3, Vec3, UNIT_TOLERANCE};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("vertex {0} has a non-finite coordinate")]
    NonFiniteVertex(usize),
    #[error("normal vector is zero or non-finite")]
    DegenerateNormal,
    #[error("normal {0} is not unit length")]
    NonUnitNormal(usize),
    #[error("triangle {triangle} references a vertex outside 0..{vertex_count}")]
    IndexOutOfRange { triangle: usize, vertex_count: usize },
    #[error("triangle {0} references the same vertex twice")]
    RepeatedVertex(usize),
    #[error("expected {expected} entries, got {got}")]
    VertexCountMismatch { expected: usize, got: usize },
    #[error("boundary is not a set of simple loops at vertex {0}")]
    NonManifoldBoundary(u32),
}
