//! Solid implant construction: the fitted patch is the outer skin, an inward
//! offset of it (smoothed) is the inner skin, and a ruled band closes the rim.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::MeshBvh;
use crate::contour::{self, Frame, SurfaceContour};
use crate::fit::{FittedPatch, ViewCamera};
use crate::geom::{Aabb, GeomError, Point3, TriMesh, Triangle, Vec3};

/// Smallest triangle area allowed in a finished implant, in mm².
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImplantError {
    #[error("thickness must be positive and finite, got {0}")]
    BadThickness(f64),
    #[error("patch is not consistently oriented")]
    NotOriented,
    #[error("patch must have exactly one boundary loop, found {0}")]
    NotADisk(usize),
    #[error("loop {0} is degenerate (fewer than 3 points or near-zero length)")]
    DegenerateLoop(char),
    #[error("crania mesh is empty")]
    EmptyCrania,
    #[error("inner edge contour does not overlap the patch footprint")]
    NoOverlap,
    #[error("assembled solid is not watertight")]
    NotWatertight,
    #[error("assembled solid has euler characteristic {0}, expected 2")]
    WrongTopology(i64),
    #[error("assembled solid has non-positive volume {0}")]
    NonPositiveVolume(f64),
    #[error("assembled solid has {0} degenerate triangles")]
    DegenerateTriangles(usize),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Moves every vertex by `d` along its area-weighted normal.
pub fn offset_surface(patch: &TriMesh, d: f64) -> Result<TriMesh, ImplantError> {
    if !patch.is_consistently_oriented() {
        return Err(ImplantError::NotOriented);
    }
    if d == 0.0 {
        return Ok(patch.clone());
    }
    let normals = patch.vertex_normals();
    let moved = patch.vertices().iter().zip(&normals).map(|(&p, &n)| p + n * d).collect();
    Ok(patch.with_vertices(moved)?)
}

/// Number of triangle pairs that intersect without sharing a vertex.
pub fn count_self_intersections(mesh: &TriMesh) -> usize {
    if mesh.triangles().is_empty() {
        return 0;
    }
    let bvh = MeshBvh::new(mesh);
    let tris = mesh.triangles();
    let mut count = 0;
    for t in 0..tris.len() {
        let pts = mesh.triangle_points(t);
        let bb = Aabb::from_points(&pts);
        for u in bvh.overlapping(&bb) {
            if u <= t || tris[u].iter().any(|v| tris[t].contains(v)) {
                continue;
            }
            if triangles_intersect(pts, mesh.triangle_points(u)) {
                count += 1;
            }
        }
    }
    count
}

/// Separating-axis test for two triangles; touching counts as separated.
pub fn triangles_intersect(a: [Point3; 3], b: [Point3; 3]) -> bool {
    let ea = [a[1] - a[0], a[2] - a[1], a[0] - a[2]];
    let eb = [b[1] - b[0], b[2] - b[1], b[0] - b[2]];
    let na = ea[0].cross(ea[1]);
    let nb = eb[0].cross(eb[1]);
    let scale = ea.iter().chain(&eb).map(|e| e.norm()).fold(0.0, f64::max);
    let eps = 1e-12 * scale * scale * scale;
    let mut axes = vec![na, nb];
    for x in &ea {
        for y in &eb {
            axes.push(x.cross(*y));
        }
        axes.push(na.cross(*x));
    }
    for y in &eb {
        axes.push(nb.cross(*y));
    }
    for axis in axes {
        if axis.norm() <= 1e-12 * scale * scale {
            continue;
        }
        let span = |t: &[Point3; 3]| {
            let d = t.map(|p| p.dot(axis));
            (d[0].min(d[1]).min(d[2]), d[0].max(d[1]).max(d[2]))
        };
        let (amin, amax) = span(&a);
        let (bmin, bmax) = span(&b);
        // both flat on this axis at the same height: coplanar, decided in-plane
        if amax - amin <= eps && bmax - bmin <= eps && (amin - bmin).abs() <= eps {
            continue;
        }
        if amax <= bmin + eps || bmax <= amin + eps {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smoothing {
    pub iterations: u32,
    pub lambda: f64,
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing { iterations: 10, lambda: 0.5 }
    }
}

/// Uniform Laplacian smoothing; `pinned` vertices never move.
pub fn laplacian_smooth(mesh: &TriMesh, pinned: &[bool], s: Smoothing) -> TriMesh {
    let n = mesh.vertices().len();
    let mut nbrs: Vec<Vec<u32>> = vec![Vec::new(); n];
    for t in mesh.triangles() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            nbrs[a as usize].push(b);
            nbrs[b as usize].push(a);
        }
    }
    for l in &mut nbrs {
        l.sort_unstable();
        l.dedup();
    }
    let mut pos = mesh.vertices().to_vec();
    for _ in 0..s.iterations {
        let prev = pos.clone();
        for v in 0..n {
            if pinned[v] || nbrs[v].is_empty() {
                continue;
            }
            let mut c = Vec3::ZERO;
            for &u in &nbrs[v] {
                c += prev[u as usize];
            }
            c = c * (1.0 / nbrs[v].len() as f64);
            pos[v] = prev[v] + (c - prev[v]) * s.lambda;
        }
    }
    mesh.with_vertices(pos).expect("same vertex count")
}

/// Laplacian smoothing of the inner skin's displacement from the outer skin.
fn smooth_against(outer: &TriMesh, inner: &TriMesh, pinned: &[bool], s: Smoothing) -> TriMesh {
    let d: Vec<Vec3> = inner.vertices().iter().zip(outer.vertices()).map(|(&q, &p)| q - p).collect();
    let smoothed = laplacian_smooth(&inner.with_vertices(d).expect("same vertex count"), pinned, s);
    let pos = smoothed.vertices().iter().zip(outer.vertices()).map(|(&d, &p)| p + d).collect();
    inner.with_vertices(pos).expect("same vertex count")
}

/// Normalized cumulative arc length, `n + 1` entries from 0 to 1.
fn arc_params(pts: &[Point3]) -> (Vec<f64>, f64) {
    let n = pts.len();
    let mut s = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    s.push(0.0);
    for i in 0..n {
        acc += pts[i].distance(pts[(i + 1) % n]);
        s.push(acc);
    }
    if acc > 0.0 {
        for x in &mut s {
            *x /= acc;
        }
    }
    (s, acc)
}

/// Merge of the two arc-length parameter sequences; `true` advances along `a`.
fn zipper_steps(sa: &[f64], sb: &[f64]) -> Vec<bool> {
    let (na, nb) = (sa.len() - 1, sb.len() - 1);
    let (mut i, mut j) = (0, 0);
    let mut steps = Vec::with_capacity(na + nb);
    while i < na || j < nb {
        let next_a = if i < na { sa[i + 1] } else { f64::INFINITY };
        let next_b = if j < nb { sb[j + 1] } else { f64::INFINITY };
        let take_a = next_a <= next_b;
        steps.push(take_a);
        if take_a {
            i += 1;
        } else {
            j += 1;
        }
    }
    steps
}

fn rotated(pts: &[Point3], k: usize) -> Vec<Point3> {
    (0..pts.len()).map(|i| pts[(i + k) % pts.len()]).collect()
}

/// Rung list `(i, j)` walked by the zipper, starting at `(0, 0)`.
fn rungs(steps: &[bool]) -> Vec<(usize, usize)> {
    let (mut i, mut j) = (0, 0);
    let mut out = vec![(0, 0)];
    for &s in &steps[..steps.len() - 1] {
        if s {
            i += 1;
        } else {
            j += 1;
        }
        out.push((i, j));
    }
    out
}

/// Correspondence between two loops: the start offset into `b` and the
/// zipper steps. The offset is the one giving the shortest total rung length.
pub fn band_correspondence(a: &[Point3], b: &[Point3]) -> (usize, Vec<bool>) {
    let (sa, _) = arc_params(a);
    let mut best: Option<(f64, usize, Vec<bool>)> = None;
    for k in 0..b.len() {
        let bk = rotated(b, k);
        let (sb, _) = arc_params(&bk);
        let steps = zipper_steps(&sa, &sb);
        let cost: f64 = rungs(&steps).iter().map(|&(i, j)| a[i % a.len()].distance(bk[j % b.len()])).sum();
        if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
            best = Some((cost, k, steps));
        }
    }
    let (_, k, steps) = best.expect("b is non-empty");
    (k, steps)
}

/// Triangles joining index loops `a` and `b` (same winding). Edges of `a`
/// appear reversed and edges of `b` forward, so `a` can be the rim of a
/// surface oriented along it and `b` the rim of one oriented against it.
fn band_triangles(a: &[u32], b: &[u32], shift: usize, steps: &[bool]) -> Vec<Triangle> {
    let (na, nb) = (a.len(), b.len());
    let bi = |j: usize| b[(j + shift) % nb];
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(steps.len());
    for &s in steps {
        if s {
            out.push([a[(i + 1) % na], a[i % na], bi(j)]);
            i += 1;
        } else {
            out.push([a[i % na], bi(j), bi(j + 1)]);
            j += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuledBand {
    /// Vertices are `a` followed by `b`.
    pub mesh: TriMesh,
    pub shift: usize,
    /// Set when the band has (numerically) no area, e.g. identical loops.
    pub degenerate: bool,
}

/// Ruled surface between two closed loops with arc-length correspondence.
pub fn ruled_band(a: &[Point3], b: &[Point3]) -> Result<RuledBand, ImplantError> {
    let (_, la) = arc_params(a);
    let (_, lb) = arc_params(b);
    let scale = la.max(lb);
    if a.len() < 3 || la <= 1e-12 * scale.max(1.0) {
        return Err(ImplantError::DegenerateLoop('a'));
    }
    if b.len() < 3 || lb <= 1e-12 * scale.max(1.0) {
        return Err(ImplantError::DegenerateLoop('b'));
    }
    let (shift, steps) = band_correspondence(a, b);
    let ai: Vec<u32> = (0..a.len() as u32).collect();
    let bi: Vec<u32> = (a.len() as u32..(a.len() + b.len()) as u32).collect();
    let tris = band_triangles(&ai, &bi, shift, &steps);
    let mut verts = a.to_vec();
    verts.extend_from_slice(b);
    let mesh = TriMesh::new(verts, tris)?;
    let degenerate = mesh.area() <= 1e-12 * la * lb;
    Ok(RuledBand { mesh, shift, degenerate })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImplantProvenance {
    pub thickness: f64,
    pub smoothing: Smoothing,
    pub patch_contour: Option<SurfaceContour>,
    pub camera: Option<ViewCamera>,
    pub inner_edge_contour: Option<SurfaceContour>,
    /// Largest rim-to-contour distance, both directions, final implants only.
    pub rim_max_gap: Option<f64>,
    pub self_intersections: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplantModel {
    /// Vertices `0..outer_vertex_count` (and the first `outer_triangle_count`
    /// triangles) are the outer skin; the next as many vertices are the inner skin.
    #[serde(skip)]
    pub solid: TriMesh,
    pub thickness: f64,
    pub outer_vertex_count: usize,
    pub outer_triangle_count: usize,
    /// Outer rim as vertex indices, following the outer skin's boundary direction.
    pub rim_indices: Vec<u32>,
    pub provenance: ImplantProvenance,
}

impl ImplantModel {
    pub fn outer_surface(&self) -> TriMesh {
        let keep: Vec<usize> = (0..self.outer_triangle_count).collect();
        self.solid.select_triangles(&keep)
    }

    pub fn outer_rim(&self) -> Vec<Point3> {
        self.rim_indices.iter().map(|&v| self.solid.vertices()[v as usize]).collect()
    }

    /// Rim of the inner skin, index-aligned with the outer rim.
    pub fn inner_rim(&self) -> Vec<Point3> {
        let n = self.outer_vertex_count as u32;
        self.rim_indices.iter().map(|&v| self.solid.vertices()[(v + n) as usize]).collect()
    }
}

pub fn check_thickness(t: f64) -> Result<(), ImplantError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(ImplantError::BadThickness(t))
    }
}

fn single_rim(patch: &TriMesh) -> Result<Vec<u32>, ImplantError> {
    if !patch.is_consistently_oriented() {
        return Err(ImplantError::NotOriented);
    }
    let mut loops = patch.boundary_loops()?;
    if loops.len() != 1 {
        return Err(ImplantError::NotADisk(loops.len()));
    }
    Ok(loops.pop().expect("one loop"))
}

/// Inner skin positions before smoothing, rim and pinned mask.
struct InnerSkin {
    raw: TriMesh,
    pinned: Vec<bool>,
    self_intersections: usize,
}

fn inner_skin(patch: &TriMesh, rim: &[u32], thickness: f64) -> Result<InnerSkin, ImplantError> {
    let raw = offset_surface(patch, -thickness)?;
    let mut pinned = vec![false; patch.vertices().len()];
    for &v in rim {
        pinned[v as usize] = true;
    }
    let self_intersections = count_self_intersections(&raw);
    Ok(InnerSkin { raw, pinned, self_intersections })
}

fn assemble(outer: &TriMesh, inner: &TriMesh, rim: &[u32]) -> Result<TriMesh, ImplantError> {
    let n = outer.vertices().len() as u32;
    let mut verts = outer.vertices().to_vec();
    verts.extend_from_slice(inner.vertices());
    let mut tris: Vec<Triangle> = outer.triangles().to_vec();
    tris.extend(inner.triangles().iter().map(|t| [t[0] + n, t[2] + n, t[1] + n]));
    // one quad per rim edge, split along its shorter diagonal
    let m = rim.len();
    for i in 0..m {
        let (a, b) = (rim[i], rim[(i + 1) % m]);
        let (ai, bi) = (a + n, b + n);
        if verts[b as usize].distance(verts[ai as usize]) <= verts[a as usize].distance(verts[bi as usize]) {
            tris.push([b, a, ai]);
            tris.push([b, ai, bi]);
        } else {
            tris.push([b, a, bi]);
            tris.push([a, ai, bi]);
        }
    }
    let solid = TriMesh::new(verts, tris)?;
    if !solid.is_watertight() {
        return Err(ImplantError::NotWatertight);
    }
    let chi = solid.euler_characteristic();
    if chi != 2 {
        return Err(ImplantError::WrongTopology(chi));
    }
    let degenerate = (0..solid.triangles().len()).filter(|&t| solid.triangle_area(t) < MIN_TRIANGLE_AREA).count();
    if degenerate > 0 {
        return Err(ImplantError::DegenerateTriangles(degenerate));
    }
    let vol = solid.signed_volume();
    if vol <= 0.0 {
        return Err(ImplantError::NonPositiveVolume(vol));
    }
    Ok(solid)
}

fn intersection_warning(count: usize) -> Vec<String> {
    if count == 0 {
        Vec::new()
    } else {
        vec![format!("inner offset surface has {count} self-intersecting triangle pairs")]
    }
}

/// Outer skin is the patch itself; inner skin is the patch offset inward by
/// `thickness`, Laplacian-smoothed with its rim pinned.
pub fn build_initial_implant(patch: &FittedPatch, thickness: f64, smoothing: Smoothing) -> Result<ImplantModel, ImplantError> {
    check_thickness(thickness)?;
    let rim = single_rim(&patch.mesh)?;
    let skin = inner_skin(&patch.mesh, &rim, thickness)?;
    let inner = smooth_against(&patch.mesh, &skin.raw, &skin.pinned, smoothing);
    let solid = assemble(&patch.mesh, &inner, &rim)?;
    Ok(ImplantModel {
        solid,
        thickness,
        outer_vertex_count: patch.mesh.vertices().len(),
        outer_triangle_count: patch.mesh.triangles().len(),
        rim_indices: rim,
        provenance: ImplantProvenance {
            thickness,
            smoothing,
            patch_contour: patch.source_contour.clone(),
            camera: Some(patch.camera),
            inner_edge_contour: None,
            rim_max_gap: None,
            self_intersections: skin.self_intersections,
            warnings: intersection_warning(skin.self_intersections),
        },
    })
}

/// Point at normalized arc length `s` (wrapping) along closed polyline `pts`.
fn point_at(pts: &[Point3], params: &[f64], s: f64) -> Point3 {
    let s = s.rem_euclid(1.0);
    let n = pts.len();
    let i = params.partition_point(|&x| x <= s).clamp(1, n) - 1;
    let span = params[i + 1] - params[i];
    let t = if span > 0.0 { (s - params[i]) / span } else { 0.0 };
    if t == 0.0 {
        return pts[i];
    }
    pts[i].lerp(pts[(i + 1) % n], t)
}

/// Arc-length parameter of the point on the polyline closest to `p`.
fn closest_param(pts: &[Point3], params: &[f64], p: Point3) -> f64 {
    let n = pts.len();
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        let ab = b - a;
        let len2 = ab.norm_squared();
        let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let d = p.distance(a + ab * t);
        if d < best.0 {
            best = (d, params[i] + t * (params[i + 1] - params[i]));
        }
    }
    best.1
}

fn polylines_overlap(a: &[[f64; 2]], b: &[[f64; 2]]) -> bool {
    let (na, nb) = (a.len(), b.len());
    for i in 0..na {
        for j in 0..nb {
            if contour::segments_intersect(a[i], a[(i + 1) % na], b[j], b[(j + 1) % nb]) {
                return true;
            }
        }
    }
    contour::winding_number(a, b[0]) != 0 || contour::winding_number(b, a[0]) != 0
}

/// Largest distance from a vertex of either closed polyline to the other.
pub fn polyline_gap(a: &[Point3], b: &[Point3]) -> f64 {
    let one_way = |p: &[Point3], q: &[Point3]| {
        p.iter()
            .map(|&x| (0..q.len()).map(|i| x.distance(crate::bvh::closest_point_on_segment(x, q[i], q[(i + 1) % q.len()]))).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

/// Rebuilds the implant with its inner rim moved onto `inner_edge_contour`.
///
/// The contour is resampled at the rim's own arc-length parameters, starting
/// from the contour point nearest the first rim vertex. The rim displacement
/// is spread over the inner skin by inverse-square-distance weighting before
/// smoothing, so a contour equal to the current inner rim changes nothing.
pub fn build_final_implant(
    crania: &TriMesh,
    initial: &ImplantModel,
    inner_edge_contour: &SurfaceContour,
    thickness: f64,
) -> Result<ImplantModel, ImplantError> {
    check_thickness(thickness)?;
    if crania.is_empty() {
        return Err(ImplantError::EmptyCrania);
    }
    let outer = initial.outer_surface();
    let rim = initial.rim_indices.clone();
    let smoothing = initial.provenance.smoothing;
    let skin = inner_skin(&outer, &rim, thickness)?;
    let raw_rim: Vec<Point3> = rim.iter().map(|&v| skin.raw.vertices()[v as usize]).collect();

    let frame = Frame::new(outer.vertex_normals().iter().fold(Vec3::ZERO, |a, &n| a + n).try_normalize().unwrap_or(Vec3::Z));
    let rim_2d: Vec<[f64; 2]> = raw_rim.iter().map(|&p| frame.project(p)).collect();
    let mut target: Vec<Point3> = inner_edge_contour.points().to_vec();
    let target_2d: Vec<[f64; 2]> = target.iter().map(|&p| frame.project(p)).collect();
    if !polylines_overlap(&rim_2d, &target_2d) {
        return Err(ImplantError::NoOverlap);
    }
    if contour::signed_area(&rim_2d).signum() != contour::signed_area(&target_2d).signum() {
        target.reverse();
    }
    let (tparams, _) = arc_params(&target);
    let (rparams, _) = arc_params(&raw_rim);
    let s0 = closest_param(&target, &tparams, raw_rim[0]);
    let new_rim: Vec<Point3> = rparams[..raw_rim.len()].iter().map(|&s| point_at(&target, &tparams, s0 + s)).collect();

    let deltas: Vec<Vec3> = new_rim.iter().zip(&raw_rim).map(|(&a, &b)| a - b).collect();
    let mut pos = skin.raw.vertices().to_vec();
    if deltas.iter().any(|d| d.norm_squared() > 0.0) {
        for (v, p) in pos.iter_mut().enumerate() {
            if skin.pinned[v] {
                continue;
            }
            let (mut acc, mut wsum) = (Vec3::ZERO, 0.0);
            for (b, d) in raw_rim.iter().zip(&deltas) {
                let w = 1.0 / p.distance(*b).powi(2).max(1e-24);
                acc += *d * w;
                wsum += w;
            }
            *p += acc * (1.0 / wsum);
        }
        for (&v, &q) in rim.iter().zip(&new_rim) {
            pos[v as usize] = q;
        }
    }
    let displaced = skin.raw.with_vertices(pos)?;
    let inner = smooth_against(&outer, &displaced, &skin.pinned, smoothing);
    let solid = assemble(&outer, &inner, &rim)?;
    let gap = polyline_gap(&new_rim, inner_edge_contour.points());
    let self_intersections = count_self_intersections(&inner);
    let mut provenance = initial.provenance.clone();
    provenance.thickness = thickness;
    provenance.inner_edge_contour = Some(inner_edge_contour.clone());
    provenance.rim_max_gap = Some(gap);
    provenance.self_intersections = self_intersections;
    provenance.warnings = intersection_warning(self_intersections);
    Ok(ImplantModel {
        solid,
        thickness,
        outer_vertex_count: initial.outer_vertex_count,
        outer_triangle_count: initial.outer_triangle_count,
        rim_indices: rim,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn zero_offset_is_identity_and_flat_offset_translates() {
        let disk = fixtures::flat_disk(10.0, 4, 24);
        assert_eq!(offset_surface(&disk, 0.0).unwrap(), disk);
        let up = offset_surface(&disk, 2.0).unwrap();
        for (a, b) in up.vertices().iter().zip(disk.vertices()) {
            assert!((*a - *b - Vec3::new(0.0, 0.0, 2.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn inconsistent_orientation_rejected() {
        let disk = fixtures::flat_disk(10.0, 2, 8);
        let (v, mut t) = disk.into_parts();
        t[0] = [t[0][0], t[0][2], t[0][1]];
        let bad = TriMesh::new(v, t).unwrap();
        assert_eq!(offset_surface(&bad, 1.0), Err(ImplantError::NotOriented));
    }

    #[test]
    fn sat_basics() {
        let t = [Vec3::ZERO, Vec3::X, Vec3::Y];
        let pierce = [Vec3::new(0.2, 0.2, -1.0), Vec3::new(0.2, 0.2, 1.0), Vec3::new(0.3, 0.25, 1.0)];
        assert!(triangles_intersect(t, pierce));
        let above = pierce.map(|p| p + Vec3::new(0.0, 0.0, 3.0));
        assert!(!triangles_intersect(t, above));
        let coplanar = [Vec3::new(0.1, 0.1, 0.0), Vec3::new(2.0, 0.1, 0.0), Vec3::new(0.1, 2.0, 0.0)];
        assert!(triangles_intersect(t, coplanar));
        let beside = t.map(|p| p + Vec3::new(5.0, 0.0, 0.0));
        assert!(!triangles_intersect(t, beside));
    }

    #[test]
    fn pinned_vertices_stay() {
        let grid = fixtures::grid_patch(1.0, 4);
        let mut pinned = vec![false; grid.vertices().len()];
        pinned[0] = true;
        let bumped: Vec<Point3> = grid.vertices().iter().map(|p| *p + Vec3::new(0.0, 0.0, (p.x * 7.0).sin())).collect();
        let m = grid.with_vertices(bumped).unwrap();
        let s = laplacian_smooth(&m, &pinned, Smoothing::default());
        assert_eq!(s.vertices()[0], m.vertices()[0]);
        assert_ne!(s.vertices()[5], m.vertices()[5]);
    }

    #[test]
    fn point_at_hits_vertices() {
        let sq = [Vec3::ZERO, Vec3::X, Vec3::new(1.0, 1.0, 0.0), Vec3::Y];
        let (p, _) = arc_params(&sq);
        for i in 0..4 {
            assert_eq!(point_at(&sq, &p, p[i]), sq[i]);
        }
        assert!((point_at(&sq, &p, 0.125) - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
        assert!((closest_param(&sq, &p, Vec3::new(1.2, 0.5, 0.0)) - 0.375).abs() < 1e-15);
    }
}
