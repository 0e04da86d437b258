use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::transform::Transform4;
use super::vec::{Aabb, Point3, Vec3};
use super::GeomError;

pub type Triangle = [u32; 3];

/// Indexed triangle surface.
///
/// Indices are always in range and no triangle repeats a vertex. Per-vertex
/// normals, when present, are unit length and match the vertex count.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    vertices: Vec<Point3>,
    triangles: Vec<Triangle>,
    normals: Option<Vec<Vec3>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshStats {
    pub area: f64,
    pub signed_volume: f64,
    pub euler_characteristic: i64,
    pub is_watertight: bool,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<Triangle>) -> Result<TriMesh, GeomError> {
        let n = vertices.len();
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(GeomError::NonFiniteVertex(i));
        }
        for (ti, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i as usize >= n) {
                return Err(GeomError::IndexOutOfRange { triangle: ti, vertex_count: n });
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(GeomError::RepeatedVertex(ti));
            }
        }
        Ok(TriMesh { vertices, triangles, normals: None })
    }

    /// Caller guarantees the index invariants.
    pub(crate) fn from_parts_unchecked(vertices: Vec<Point3>, triangles: Vec<Triangle>) -> TriMesh {
        debug_assert!(TriMesh::new(vertices.clone(), triangles.clone()).is_ok());
        TriMesh { vertices, triangles, normals: None }
    }

    pub fn empty() -> TriMesh {
        TriMesh::default()
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn into_parts(self) -> (Vec<Point3>, Vec<Triangle>) {
        (self.vertices, self.triangles)
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_points(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    /// Same connectivity, new positions.
    pub fn with_vertices(&self, vertices: Vec<Point3>) -> Result<TriMesh, GeomError> {
        if vertices.len() != self.vertices.len() {
            return Err(GeomError::VertexCountMismatch { expected: self.vertices.len(), got: vertices.len() });
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(GeomError::NonFiniteVertex(i));
        }
        Ok(TriMesh { vertices, triangles: self.triangles.clone(), normals: None })
    }

    /// Attach explicit per-vertex normals.
    pub fn set_normals(&mut self, normals: Vec<Vec3>) -> Result<(), GeomError> {
        if normals.len() != self.vertices.len() {
            return Err(GeomError::VertexCountMismatch { expected: self.vertices.len(), got: normals.len() });
        }
        if let Some(i) = normals.iter().position(|n| !n.is_unit()) {
            return Err(GeomError::NonUnitNormal(i));
        }
        self.normals = Some(normals);
        Ok(())
    }

    /// Copy with area-weighted vertex normals attached.
    pub fn with_computed_normals(&self) -> TriMesh {
        let normals = self.vertex_normals();
        TriMesh { vertices: self.vertices.clone(), triangles: self.triangles.clone(), normals: Some(normals) }
    }

    pub fn triangle_cross(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle_points(t);
        (b - a).cross(c - a)
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        0.5 * self.triangle_cross(t).norm()
    }

    /// Unit face normal; `None` for a zero-area triangle.
    pub fn face_normal(&self, t: usize) -> Option<Vec3> {
        self.triangle_cross(t).try_normalize()
    }

    /// Area-weighted vertex normals. Unreferenced or fully degenerate
    /// vertices get +Z so the result is always unit length.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut acc = vec![Vec3::ZERO; self.vertices.len()];
        for (ti, t) in self.triangles.iter().enumerate() {
            let n = self.triangle_cross(ti);
            for &v in t {
                acc[v as usize] += n;
            }
        }
        acc.into_iter().map(|n| n.try_normalize().unwrap_or(Vec3::Z)).collect()
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Divergence-theorem volume; positive for outward-oriented closed meshes.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let a = self.vertices[t[0] as usize];
                let b = self.vertices[t[1] as usize];
                let c = self.vertices[t[2] as usize];
                a.dot(b.cross(c))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Undirected edges with the number of triangles using each.
    pub fn edge_use_counts(&self) -> HashMap<(u32, u32), u32> {
        let mut m = HashMap::with_capacity(self.triangles.len() * 2);
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *m.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        m
    }

    fn directed_edge_counts(&self) -> HashMap<(u32, u32), u32> {
        let mut m = HashMap::with_capacity(self.triangles.len() * 3);
        for t in &self.triangles {
            for k in 0..3 {
                *m.entry((t[k], t[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        m
    }

    /// V - E + F over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                used[v as usize] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        let e = self.edge_use_counts().len() as i64;
        v - e + self.triangles.len() as i64
    }

    /// Every directed edge used once and paired with its reverse.
    pub fn is_watertight(&self) -> bool {
        if self.triangles.is_empty() {
            return false;
        }
        let d = self.directed_edge_counts();
        d.iter().all(|(&(a, b), &n)| n == 1 && d.get(&(b, a)) == Some(&1))
    }

    /// No directed edge used twice, no edge shared by more than two triangles.
    pub fn is_consistently_oriented(&self) -> bool {
        self.directed_edge_counts().values().all(|&n| n == 1) && self.edge_use_counts().values().all(|&n| n <= 2)
    }

    pub fn stats(&self) -> MeshStats {
        MeshStats {
            area: self.area(),
            signed_volume: self.signed_volume(),
            euler_characteristic: self.euler_characteristic(),
            is_watertight: self.is_watertight(),
        }
    }

    /// Closed boundary loops, each following the half-edge direction of its triangles.
    pub fn boundary_loops(&self) -> Result<Vec<Vec<u32>>, GeomError> {
        let d = self.directed_edge_counts();
        let mut next: HashMap<u32, u32> = HashMap::new();
        let mut starts: Vec<u32> = Vec::new();
        // walk triangles in order so loop order is deterministic
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if !d.contains_key(&(b, a)) {
                    if next.insert(a, b).is_some() {
                        return Err(GeomError::NonManifoldBoundary(a));
                    }
                    starts.push(a);
                }
            }
        }
        let mut visited: HashMap<u32, bool> = HashMap::new();
        let mut loops = Vec::new();
        for s in starts {
            if visited.contains_key(&s) {
                continue;
            }
            let mut lp = vec![s];
            visited.insert(s, true);
            let mut cur = next[&s];
            while cur != s {
                if visited.insert(cur, true).is_some() {
                    return Err(GeomError::NonManifoldBoundary(cur));
                }
                lp.push(cur);
                cur = *next.get(&cur).ok_or(GeomError::NonManifoldBoundary(cur))?;
            }
            loops.push(lp);
        }
        Ok(loops)
    }

    /// Mesh with every triangle's winding reversed.
    pub fn reversed(&self) -> TriMesh {
        TriMesh {
            vertices: self.vertices.clone(),
            triangles: self.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect(),
            normals: self.normals.as_ref().map(|ns| ns.iter().map(|&n| -n).collect()),
        }
    }

    /// Drops unreferenced vertices, keeping the relative order of the rest.
    pub fn compacted(&self) -> TriMesh {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                remap[v as usize] = 0;
            }
        }
        let mut vertices = Vec::new();
        let mut normals = self.normals.as_ref().map(|_| Vec::new());
        for (i, r) in remap.iter_mut().enumerate() {
            if *r == 0 {
                *r = vertices.len() as u32;
                vertices.push(self.vertices[i]);
                if let (Some(out), Some(src)) = (normals.as_mut(), self.normals.as_ref()) {
                    out.push(src[i]);
                }
            }
        }
        let triangles = self.triangles.iter().map(|t| t.map(|v| remap[v as usize])).collect();
        TriMesh { vertices, triangles, normals }
    }

    /// Keeps the listed triangles (in the given order) and compacts.
    pub fn select_triangles(&self, keep: &[usize]) -> TriMesh {
        TriMesh { vertices: self.vertices.clone(), triangles: keep.iter().map(|&t| self.triangles[t]).collect(), normals: None }
            .compacted()
    }

    /// Concatenation without welding.
    pub fn append(&self, other: &TriMesh) -> TriMesh {
        let off = self.vertices.len() as u32;
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut triangles = self.triangles.clone();
        triangles.extend(other.triangles.iter().map(|t| t.map(|v| v + off)));
        TriMesh { vertices, triangles, normals: None }
    }

    pub fn translated(&self, d: Vec3) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|&v| v + d).collect(),
            triangles: self.triangles.clone(),
            normals: self.normals.clone(),
        }
    }

    pub fn mean_edge_length(&self) -> f64 {
        let edges = self.edge_use_counts();
        if edges.is_empty() {
            return 0.0;
        }
        let total: f64 = edges.keys().map(|&(a, b)| self.vertices[a as usize].distance(self.vertices[b as usize])).sum();
        total / edges.len() as f64
    }

    /// Triangle groups connected through shared edges, in order of first triangle.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut by_edge: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
        for (ti, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                by_edge.entry((a.min(b), a.max(b))).or_default().push(ti);
            }
        }
        let mut comp = vec![usize::MAX; self.triangles.len()];
        let mut out = Vec::new();
        for seed in 0..self.triangles.len() {
            if comp[seed] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![seed];
            comp[seed] = id;
            let mut stack = vec![seed];
            while let Some(t) = stack.pop() {
                let tri = self.triangles[t];
                for k in 0..3 {
                    let (a, b) = (tri[k], tri[(k + 1) % 3]);
                    for &n in &by_edge[&(a.min(b), a.max(b))] {
                        if comp[n] == usize::MAX {
                            comp[n] = id;
                            members.push(n);
                            stack.push(n);
                        }
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Merges vertices closer than `tol` (first occurrence wins) and drops
    /// triangles that collapse. Representatives end up more than `tol`
    /// apart, so welding twice is the same as welding once.
    pub fn welded(&self, tol: f64) -> TriMesh {
        let (vertices, remap) = weld_points(&self.vertices, tol);
        let triangles = self
            .triangles
            .iter()
            .map(|t| t.map(|v| remap[v as usize]))
            .filter(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2])
            .collect();
        TriMesh { vertices, triangles, normals: None }.compacted()
    }
}

/// Returns (representatives, index map from input to representative).
pub(crate) fn weld_points(points: &[Point3], tol: f64) -> (Vec<Point3>, Vec<u32>) {
    let mut reps: Vec<Point3> = Vec::new();
    let mut remap = Vec::with_capacity(points.len());
    if tol <= 0.0 {
        let mut exact: HashMap<[u64; 3], u32> = HashMap::new();
        for p in points {
            let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
            let id = *exact.entry(key).or_insert_with(|| {
                reps.push(*p);
                (reps.len() - 1) as u32
            });
            remap.push(id);
        }
        return (reps, remap);
    }
    let cell = |p: &Point3| -> [i64; 3] { [(p.x / tol).floor() as i64, (p.y / tol).floor() as i64, (p.z / tol).floor() as i64] };
    let mut grid: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    let tol2 = tol * tol;
    for p in points {
        let c = cell(p);
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &id in ids {
                            if (reps[id as usize] - *p).norm_squared() <= tol2 {
                                found = Some(id);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        let id = match found {
            Some(id) => id,
            None => {
                reps.push(*p);
                let id = (reps.len() - 1) as u32;
                grid.entry(c).or_default().push(id);
                id
            }
        };
        remap.push(id);
    }
    (reps, remap)
}

/// Applies `t` to every vertex. Orientation-reversing transforms also reverse
/// winding so outward faces stay outward; normals are recomputed if present.
pub fn transform_mesh(mesh: &TriMesh, t: &Transform4) -> TriMesh {
    let vertices: Vec<Point3> = mesh.vertices.iter().map(|&v| t.apply_point(v)).collect();
    let triangles = if t.det3() < 0.0 {
        mesh.triangles.iter().map(|tri| [tri[0], tri[2], tri[1]]).collect()
    } else {
        mesh.triangles.clone()
    };
    let out = TriMesh { vertices, triangles, normals: None };
    if mesh.normals.is_some() {
        out.with_computed_normals()
    } else {
        out
    }
}
