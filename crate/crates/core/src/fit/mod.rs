//! Screen-space patch fitting: project the selected points through a camera,
//! keep one point per pixel, triangulate in the image plane and lift the
//! connectivity back onto the 3D points.

mod camera;
pub mod delaunay;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use camera::{DisplayPoint, Projection, ViewCamera, DEFAULT_VIEWPORT};
use delaunay::{Triangulation, TriangulationError};

use crate::contour::{self, build_implicit, eval_implicit, ContourError, SurfaceContour};
use crate::geom::{Point3, TriMesh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("invalid camera: {0}")]
    BadCamera(String),
    #[error("contour selects no mesh vertices")]
    EmptySelection,
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("all projected points are collinear")]
    Collinear,
    #[error("all points are behind the camera")]
    AllBehindCamera,
    #[error("contour point {0} is behind the camera")]
    ContourNotVisible(usize),
    #[error("contour is not a simple loop in this view (segments {0} and {1} cross)")]
    ContourNotSimple(usize, usize),
    #[error("contour segment {0}-{1} passes through a patch point")]
    ConstraintThroughPoint(usize, usize),
    #[error("fitted patch is not a disk (euler characteristic {euler}, {loops} boundary loops)")]
    NotDisk { euler: i64, loops: usize },
    #[error(transparent)]
    Contour(#[from] ContourError),
}

impl From<TriangulationError> for FitError {
    fn from(e: TriangulationError) -> Self {
        match e {
            TriangulationError::TooFewPoints(n) => FitError::TooFewPoints(n),
            TriangulationError::Collinear => FitError::Collinear,
            TriangulationError::ConstraintThroughPoint(a, b) => FitError::ConstraintThroughPoint(a, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPatch {
    #[serde(skip)]
    pub mesh: TriMesh,
    pub source_contour: Option<SurfaceContour>,
    pub camera: ViewCamera,
}

/// Mesh vertices inside the contour's swept region, followed by the contour points.
pub fn collect_patch_points(mesh: &TriMesh, contour: &SurfaceContour) -> Result<Vec<Point3>, FitError> {
    let region = build_implicit(contour)?;
    let mut out: Vec<Point3> = mesh.vertices().iter().copied().filter(|&p| eval_implicit(&region, p) <= 0.0).collect();
    if out.is_empty() {
        return Err(FitError::EmptySelection);
    }
    out.extend_from_slice(contour.points());
    Ok(out)
}

/// Triangles whose front side faces the camera.
pub fn front_facing(mesh: &TriMesh, cam: &ViewCamera) -> TriMesh {
    let keep: Vec<usize> = (0..mesh.triangles().len())
        .filter(|&t| {
            let n = mesh.triangle_cross(t);
            let toward = match cam.projection {
                Projection::Parallel { .. } => cam.toward_eye(),
                Projection::Perspective { .. } => {
                    let [a, b, c] = mesh.triangle_points(t);
                    cam.eye - (a + b + c) * (1.0 / 3.0)
                }
            };
            n.dot(toward) > 0.0
        })
        .collect();
    mesh.select_triangles(&keep).compacted()
}

/// One point per occupied pixel, the one nearest the eye. Survivors keep
/// their input order; equal depths keep the earlier point.
pub fn project_dedup(points: &[Point3], cam: &ViewCamera) -> Result<Vec<Point3>, FitError> {
    cam.validate()?;
    let mut best: HashMap<(i64, i64), (f64, usize)> = HashMap::new();
    let mut visible = 0;
    for (i, &p) in points.iter().enumerate() {
        let Some(d) = cam.world_to_display(p) else { continue };
        visible += 1;
        best.entry(d.pixel())
            .and_modify(|e| {
                if d.depth < e.0 {
                    *e = (d.depth, i);
                }
            })
            .or_insert((d.depth, i));
    }
    if visible == 0 && !points.is_empty() {
        return Err(FitError::AllBehindCamera);
    }
    let mut keep: Vec<usize> = best.into_values().map(|(_, i)| i).collect();
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| points[i]).collect())
}

/// Interior points closer than this many pixels to the contour are dropped
/// so the boundary triangles do not degenerate into slivers.
pub const BOUNDARY_CLEARANCE_PX: f64 = 1.0;

/// Delaunay triangulation in the camera's image plane, lifted to 3D.
///
/// Without a contour this triangulates the projected convex hull. With one,
/// the contour points become the boundary: its segments are forced into the
/// triangulation, other points must lie strictly inside it, and triangles
/// outside are removed. Output faces the camera (counter-clockwise on screen).
pub fn delaunay_fit(points: &[Point3], contour: Option<&SurfaceContour>, cam: &ViewCamera) -> Result<TriMesh, FitError> {
    cam.validate()?;
    let mut world: Vec<Point3> = Vec::new();
    let mut screen: Vec<[f64; 2]> = Vec::new();
    let mut polygon: Vec<[f64; 2]> = Vec::new();
    if let Some(c) = contour {
        for (i, &p) in c.points().iter().enumerate() {
            let d = cam.world_to_display(p).ok_or(FitError::ContourNotVisible(i))?;
            polygon.push([d.x, d.y]);
        }
        let n = polygon.len();
        for i in 0..n {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                if contour::segments_intersect(polygon[i], polygon[(i + 1) % n], polygon[j], polygon[(j + 1) % n]) {
                    return Err(FitError::ContourNotSimple(i, j));
                }
            }
            if polygon[i] == polygon[(i + 1) % n] {
                return Err(FitError::ContourNotSimple(i, (i + 1) % n));
            }
        }
        world.extend_from_slice(c.points());
        screen.extend_from_slice(&polygon);
    }
    let mut any_visible = false;
    for &p in points {
        let Some(d) = cam.world_to_display(p) else { continue };
        any_visible = true;
        let q = [d.x, d.y];
        if contour.is_some()
            && (contour::winding_number(&polygon, q) == 0 || contour::distance_to_polygon(&polygon, q) < BOUNDARY_CLEARANCE_PX) {
                continue;
            }
        world.push(p);
        screen.push(q);
    }
    if !any_visible && contour.is_none() && !points.is_empty() {
        return Err(FitError::AllBehindCamera);
    }
    let mut tri = Triangulation::new(screen.clone())?;
    let m = polygon.len();
    for i in 0..m {
        tri.insert_constraint(i, (i + 1) % m)?;
    }
    let triangles: Vec<[u32; 3]> = tri
        .triangles()
        .into_iter()
        .filter(|t| {
            if contour.is_none() {
                return true;
            }
            let c = [0, 1].map(|k| (screen[t[0]][k] + screen[t[1]][k] + screen[t[2]][k]) / 3.0);
            contour::winding_number(&polygon, c) != 0
        })
        .map(|t| t.map(|i| i as u32))
        .collect();
    let mesh = TriMesh::new(world, triangles).expect("indices from the triangulation").compacted();
    if contour.is_some() {
        let loops = mesh.boundary_loops().map(|l| l.len()).unwrap_or(0);
        let euler = mesh.euler_characteristic();
        if euler != 1 || loops != 1 {
            return Err(FitError::NotDisk { euler, loops });
        }
    }
    Ok(mesh)
}

/// Full fitting step: selection, optional front-face culling, pixel dedup, triangulation.
pub fn fit_patch(mesh: &TriMesh, contour: &SurfaceContour, cam: &ViewCamera, cull_back_faces: bool) -> Result<FittedPatch, FitError> {
    cam.validate()?;
    let source = if cull_back_faces { front_facing(mesh, cam) } else { mesh.clone() };
    let selected = collect_patch_points(&source, contour)?;
    let kept = project_dedup(&selected, cam)?;
    let patch = delaunay_fit(&kept, Some(contour), cam)?;
    Ok(FittedPatch { mesh: patch, source_contour: Some(contour.clone()), camera: *cam })
}
