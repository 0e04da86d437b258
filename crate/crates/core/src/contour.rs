//! Closed surface contours, the swept-loop implicit region they define, and
//! clipping a mesh against an implicit function.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::MeshBvh;
use crate::geom::{Aabb, Plane, Point3, TriMesh, Triangle, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContourError {
    #[error("contour needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("contour point {0} is non-finite")]
    NonFinite(usize),
    #[error("contour points {0} and {1} coincide")]
    CoincidentPoints(usize, usize),
    #[error("contour has {points} points but {normals} normals")]
    NormalCount { points: usize, normals: usize },
    #[error("contour normal {0} is not unit length")]
    NonUnitNormal(usize),
    #[error("contour encloses zero area in projection")]
    ZeroArea,
    #[error("contour segments {0} and {1} cross in projection")]
    SelfIntersecting(usize, usize),
    #[error("contour normals cancel out; no extrusion direction")]
    IllConditionedNormals,
    #[error("host mesh is empty")]
    EmptyHost,
}

/// Ordered closed loop of points on a mesh, with the surface normal at each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawContour", into = "RawContour")]
pub struct SurfaceContour {
    points: Vec<Point3>,
    normals: Vec<Vec3>,
    host: String,
}

#[derive(Serialize, Deserialize)]
struct RawContour {
    host: String,
    points: Vec<Point3>,
    normals: Vec<Vec3>,
}

impl TryFrom<RawContour> for SurfaceContour {
    type Error = ContourError;
    fn try_from(r: RawContour) -> Result<Self, ContourError> {
        SurfaceContour::new(r.points, r.normals, r.host)
    }
}

impl From<SurfaceContour> for RawContour {
    fn from(c: SurfaceContour) -> Self {
        RawContour { host: c.host, points: c.points, normals: c.normals }
    }
}

/// Sum of the normals if usable, otherwise the polygon's area normal.
fn projection_axis(points: &[Point3], normals: &[Vec3]) -> Option<Vec3> {
    let mean = normals.iter().fold(Vec3::ZERO, |a, &n| a + n);
    if mean.norm() > 1e-6 * normals.len() as f64 {
        return mean.try_normalize();
    }
    newell_normal(points).try_normalize()
}

fn newell_normal(points: &[Point3]) -> Vec3 {
    let n = points.len();
    (0..n).fold(Vec3::ZERO, |a, i| a + points[i].cross(points[(i + 1) % n])) * 0.5
}

impl SurfaceContour {
    pub fn new(points: Vec<Point3>, normals: Vec<Vec3>, host: impl Into<String>) -> Result<Self, ContourError> {
        if points.len() < 3 {
            return Err(ContourError::TooFewPoints(points.len()));
        }
        if normals.len() != points.len() {
            return Err(ContourError::NormalCount { points: points.len(), normals: normals.len() });
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(ContourError::NonFinite(i));
        }
        if let Some(i) = normals.iter().position(|n| !n.is_unit()) {
            return Err(ContourError::NonUnitNormal(i));
        }
        let n = points.len();
        for i in 0..n {
            if points[i] == points[(i + 1) % n] {
                return Err(ContourError::CoincidentPoints(i, (i + 1) % n));
            }
        }
        let axis = projection_axis(&points, &normals).ok_or(ContourError::ZeroArea)?;
        let frame = Frame::new(axis);
        let poly: Vec<[f64; 2]> = points.iter().map(|&p| frame.project(p)).collect();
        let diag = Aabb::from_points(points.iter()).diagonal();
        if poly.iter().all(|&q| orient(poly[0], poly[1], q) == 0.0) {
            return Err(ContourError::ZeroArea);
        }
        if let Some((a, b)) = first_crossing(&poly) {
            return Err(ContourError::SelfIntersecting(a, b));
        }
        if signed_area(&poly).abs() <= 1e-12 * diag * diag {
            return Err(ContourError::ZeroArea);
        }
        Ok(SurfaceContour { points, normals, host: host.into() })
    }

    /// Contour on `mesh`: each point takes the face normal of the nearest triangle.
    pub fn on_mesh(points: Vec<Point3>, mesh: &TriMesh, host: impl Into<String>) -> Result<Self, ContourError> {
        if mesh.is_empty() {
            return Err(ContourError::EmptyHost);
        }
        let bvh = MeshBvh::new(mesh);
        let mut normals = Vec::with_capacity(points.len());
        for (i, &p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(ContourError::NonFinite(i));
            }
            let hit = bvh.closest(p).expect("non-empty mesh");
            normals.push(mesh.face_normal(hit.triangle).unwrap_or(Vec3::Z));
        }
        SurfaceContour::new(points, normals, host)
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn host(&self) -> &str {
        &self.host
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(self.points.iter())
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.points.len();
        (0..n).map(|i| self.points[i].distance(self.points[(i + 1) % n])).sum()
    }

    pub fn mean_normal(&self) -> Vec3 {
        self.normals.iter().fold(Vec3::ZERO, |a, &n| a + n) * (1.0 / self.normals.len() as f64)
    }

    /// Distance from `p` to the closed polyline.
    pub fn distance_to_polyline(&self, p: Point3) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| (crate::bvh::closest_point_on_segment(p, self.points[i], self.points[(i + 1) % n]) - p).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Orthonormal frame `(u, v, w)` with `w` the viewing axis and `u x v = w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub u: Vec3,
    pub v: Vec3,
    pub w: Vec3,
}

impl Frame {
    pub fn new(w: Vec3) -> Frame {
        let w = w.normalize();
        let u = w.any_perpendicular().normalize();
        let v = w.cross(u);
        Frame { u, v, w }
    }

    #[inline]
    pub fn project(&self, p: Point3) -> [f64; 2] {
        [p.dot(self.u), p.dot(self.v)]
    }
}

pub(crate) fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i][0] * poly[(i + 1) % n][1] - poly[(i + 1) % n][0] * poly[i][1]).sum::<f64>() * 0.5
}

#[inline]
pub(crate) fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    robust::orient2d(robust::Coord { x: a[0], y: a[1] }, robust::Coord { x: b[0], y: b[1] }, robust::Coord { x: c[0], y: c[1] })
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test with exact orientation signs.
pub(crate) fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

fn first_crossing(poly: &[[f64; 2]]) -> Option<(usize, usize)> {
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        for j in i + 1..n {
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // shared endpoint; only a fold back along the same line counts
                let (shared, other_a, other_b) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                if orient(shared, other_a, other_b) == 0.0 {
                    let da = [other_a[0] - shared[0], other_a[1] - shared[1]];
                    let db = [other_b[0] - shared[0], other_b[1] - shared[1]];
                    if da[0] * db[0] + da[1] * db[1] > 0.0 {
                        return Some((i, j));
                    }
                }
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Winding number of the closed polygon around `p`.
pub(crate) fn winding_number(poly: &[[f64; 2]], p: [f64; 2]) -> i32 {
    let n = poly.len();
    let mut w = 0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a[1] <= p[1] {
            if b[1] > p[1] && orient(a, b, p) > 0.0 {
                w += 1;
            }
        } else if b[1] <= p[1] && orient(a, b, p) < 0.0 {
            w -= 1;
        }
    }
    w
}

pub(crate) fn distance_to_polygon(poly: &[[f64; 2]], p: [f64; 2]) -> f64 {
    let n = poly.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = if len2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let q = [a[0] + d[0] * t - p[0], a[1] + d[1] * t - p[1]];
        best = best.min(q[0].hypot(q[1]));
    }
    best
}

/// Scalar field whose zero set separates the kept and discarded sides.
pub trait Implicit: Sync {
    fn eval(&self, p: Point3) -> f64;
    /// Target accuracy for points placed on the zero set.
    fn boundary_tolerance(&self) -> f64;
}

impl Implicit for Plane {
    fn eval(&self, p: Point3) -> f64 {
        self.signed_distance(p)
    }
    fn boundary_tolerance(&self) -> f64 {
        1e-9
    }
}

/// Infinite prism swept by a contour along its mean normal. Negative inside.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopImplicitRegion {
    contour: SurfaceContour,
    frame: Frame,
    polygon: Vec<[f64; 2]>,
    diagonal: f64,
}

pub fn build_implicit(contour: &SurfaceContour) -> Result<LoopImplicitRegion, ContourError> {
    let sum = contour.normals.iter().fold(Vec3::ZERO, |a, &n| a + n);
    if sum.norm() <= 1e-6 * contour.len() as f64 {
        return Err(ContourError::IllConditionedNormals);
    }
    let frame = Frame::new(sum);
    let polygon = contour.points.iter().map(|&p| frame.project(p)).collect();
    Ok(LoopImplicitRegion { contour: contour.clone(), frame, polygon, diagonal: contour.bounds().diagonal() })
}

impl LoopImplicitRegion {
    pub fn direction(&self) -> Vec3 {
        self.frame.w
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn contour(&self) -> &SurfaceContour {
        &self.contour
    }

    /// The loop projected into the `(u, v)` plane of [`Self::frame`].
    pub fn polygon(&self) -> &[[f64; 2]] {
        &self.polygon
    }

    pub fn loop_diagonal(&self) -> f64 {
        self.diagonal
    }

    pub fn contains_projected(&self, q: [f64; 2]) -> bool {
        winding_number(&self.polygon, q) != 0
    }
}

/// Projected distance to the loop, negative when the projection falls inside it.
pub fn eval_implicit(region: &LoopImplicitRegion, p: Point3) -> f64 {
    let q = region.frame.project(p);
    let d = distance_to_polygon(&region.polygon, q);
    if d == 0.0 {
        0.0
    } else if region.contains_projected(q) {
        -d
    } else {
        d
    }
}

impl Implicit for LoopImplicitRegion {
    fn eval(&self, p: Point3) -> f64 {
        eval_implicit(self, p)
    }
    fn boundary_tolerance(&self) -> f64 {
        1e-6 * self.diagonal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keep {
    Inside,
    Outside,
}

const T_MIN: f64 = 1e-9;

/// Point on segment `ab` (with `fa < 0 < fb` or the reverse) where `f` vanishes.
/// Starts from the linear estimate and refines with the Illinois variant of
/// regula falsi, since the field is only piecewise linear along the segment.
fn zero_crossing(f: &impl Implicit, a: Point3, b: Point3, fa: f64, fb: f64) -> Point3 {
    let tol = f.boundary_tolerance() * 0.01;
    let (mut t0, mut t1, mut f0, mut f1) = (0.0f64, 1.0f64, fa, fb);
    let mut t = f0 / (f0 - f1);
    let mut side = 0;
    for _ in 0..100 {
        let ft = f.eval(a.lerp(b, t));
        if ft.abs() <= tol || (t1 - t0) <= f64::EPSILON {
            break;
        }
        if (ft < 0.0) == (f0 < 0.0) {
            t0 = t;
            f0 = ft;
            if side == -1 {
                f1 *= 0.5;
            }
            side = -1;
        } else {
            t1 = t;
            f1 = ft;
            if side == 1 {
                f0 *= 0.5;
            }
            side = 1;
        }
        t = t0 + (t1 - t0) * (f0 / (f0 - f1));
    }
    a.lerp(b, t.clamp(T_MIN, 1.0 - T_MIN))
}

/// Keeps the part of `mesh` where `f <= 0` (inside) or `f >= 0` (outside).
/// Triangles crossing the zero set are cut along it; each cut edge gets one
/// shared vertex, so the kept side stays connected. An all-zero triangle
/// belongs to the inside.
pub fn clip_mesh_by_implicit(mesh: &TriMesh, f: &impl Implicit, keep: Keep) -> TriMesh {
    let values: Vec<f64> = mesh.vertices().par_iter().map(|&p| f.eval(p)).collect();
    let verts = mesh.vertices();
    let mut out_vertices: Vec<Point3> = verts.to_vec();
    let mut crossings: HashMap<(u32, u32), u32> = HashMap::new();
    let mut out_tris: Vec<Triangle> = Vec::new();
    let kept = |v: f64| match keep {
        Keep::Inside => v <= 0.0,
        Keep::Outside => v >= 0.0,
    };
    for tri in mesh.triangles() {
        let fv = tri.map(|i| values[i as usize]);
        let neg = fv.iter().any(|&v| v < 0.0);
        let pos = fv.iter().any(|&v| v > 0.0);
        if !(neg && pos) {
            let inside = !pos;
            if inside == (keep == Keep::Inside) {
                out_tris.push(*tri);
            }
            continue;
        }
        let mut poly: Vec<u32> = Vec::with_capacity(4);
        for e in 0..3 {
            let (i, j) = (tri[e], tri[(e + 1) % 3]);
            let (fi, fj) = (fv[e], fv[(e + 1) % 3]);
            if kept(fi) {
                poly.push(i);
            }
            if (fi < 0.0 && fj > 0.0) || (fi > 0.0 && fj < 0.0) {
                let key = (i.min(j), i.max(j));
                let id = *crossings.entry(key).or_insert_with(|| {
                    let (lo, hi) = (key.0 as usize, key.1 as usize);
                    out_vertices.push(zero_crossing(f, verts[lo], verts[hi], values[lo], values[hi]));
                    (out_vertices.len() - 1) as u32
                });
                poly.push(id);
            }
        }
        for k in 1..poly.len().saturating_sub(1) {
            out_tris.push([poly[0], poly[k], poly[k + 1]]);
        }
    }
    TriMesh::from_parts_unchecked(out_vertices, out_tris).compacted()
}

/// Connected components of `mesh` that come within `radius` of some contour point.
pub fn components_near(mesh: &TriMesh, contour: &SurfaceContour, radius: f64) -> TriMesh {
    let comps = mesh.connected_components();
    let mut keep = Vec::new();
    for comp in comps {
        let near = comp.iter().any(|&t| {
            mesh.triangles()[t].iter().any(|&v| {
                let p = mesh.vertices()[v as usize];
                contour.points().iter().any(|c| c.distance(p) <= radius)
            })
        });
        if near {
            keep.extend(comp);
        }
    }
    keep.sort_unstable();
    mesh.select_triangles(&keep).compacted()
}
