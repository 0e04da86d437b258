//! Median-plane fitting from symmetric landmark pairs, and the mirrored model.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{reflection_transform, stl::DEFAULT_WELD_TOLERANCE, transform_mesh, Plane, Point3, TriMesh, Vec3};

/// Below this many pairs the fit is flagged as weakly constrained.
pub const RECOMMENDED_PAIRS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkPair {
    #[serde(default)]
    pub label: String,
    pub left: Point3,
    pub right: Point3,
}

impl LandmarkPair {
    pub fn new(label: impl Into<String>, left: Point3, right: Point3) -> Self {
        LandmarkPair { label: label.into(), left, right }
    }

    pub fn midpoint(&self) -> Point3 {
        (self.left + self.right) * 0.5
    }

    pub fn swapped(&self) -> Self {
        LandmarkPair { label: self.label.clone(), left: self.right, right: self.left }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianPlaneFit {
    pub plane: Plane,
    pub residual_rms: f64,
    pub pair_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MirrorError {
    #[error("no landmark pairs")]
    NoPairs,
    #[error("landmark pair {index} ({label:?}) has coincident or non-finite points")]
    DegeneratePair { index: usize, label: String },
    #[error("landmark difference vectors cancel out; left/right labels are inconsistent")]
    OpposedPairs,
}

/// Least-squares median plane.
///
/// The normal is the principal axis of the unit left-minus-right directions,
/// signed to agree with their sum, so it points from the right side to the
/// left. The origin is the centroid of the pair midpoints, which minimizes the
/// squared midpoint-to-plane distances for that normal.
pub fn fit_median_plane(pairs: &[LandmarkPair]) -> Result<MedianPlaneFit, MirrorError> {
    if pairs.is_empty() {
        return Err(MirrorError::NoPairs);
    }
    let mut scatter = Matrix3::<f64>::zeros();
    let mut sum = Vec3::ZERO;
    for (index, p) in pairs.iter().enumerate() {
        let d = p.left - p.right;
        let u = match d.try_normalize() {
            Some(u) if d.is_finite() && d.norm() > DEFAULT_WELD_TOLERANCE => u,
            _ => return Err(MirrorError::DegeneratePair { index, label: p.label.clone() }),
        };
        let v = nalgebra::Vector3::new(u.x, u.y, u.z);
        scatter += v * v.transpose();
        sum += u;
    }
    let eig = SymmetricEigen::new(scatter);
    let (k, _) = eig.eigenvalues.iter().enumerate().fold((0, f64::MIN), |acc, (i, &l)| if l > acc.1 { (i, l) } else { acc });
    let e = eig.eigenvectors.column(k);
    let mut normal = Vec3::new(e[0], e[1], e[2]).normalize();
    let along = sum.dot(normal);
    if along.abs() < 1e-6 * pairs.len() as f64 {
        return Err(MirrorError::OpposedPairs);
    }
    if along < 0.0 {
        normal = -normal;
    }
    let n = pairs.len() as f64;
    let origin = pairs.iter().fold(Vec3::ZERO, |acc, p| acc + p.midpoint()) * (1.0 / n);
    let plane = Plane::new(origin, normal).expect("unit normal from eigen decomposition");
    let residual_rms = (pairs.iter().map(|p| plane.signed_distance(p.midpoint()).powi(2)).sum::<f64>() / n).sqrt();
    let warning = (pairs.len() < RECOMMENDED_PAIRS)
        .then(|| format!("only {} landmark pair(s); at least {RECOMMENDED_PAIRS} are recommended", pairs.len()));
    Ok(MedianPlaneFit { plane, residual_rms, pair_count: pairs.len(), warning })
}

pub fn mirror_model(mesh: &TriMesh, fit: &MedianPlaneFit) -> TriMesh {
    transform_mesh(mesh, &reflection_transform(&fit.plane))
}
