//! Mesh comparison: per-vertex distance fields and voxel overlap (Dice, Jaccard).

use bitvec::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::MeshBvh;
use crate::geom::{Aabb, Point3, TriMesh};

/// Default cap on overlap grid cells (about 134M, one byte of votes each).
pub const DEFAULT_MAX_CELLS: usize = 512 * 512 * 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("mesh {0} is empty")]
    EmptyMesh(char),
    #[error("mesh {0} is not watertight")]
    NotWatertight(char),
    #[error("voxel size must be positive and finite, got {0}")]
    BadVoxelSize(f64),
    #[error("overlap grid needs {cells} cells, cap is {cap}")]
    GridTooLarge { cells: usize, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub rms: f64,
    pub p95: f64,
}

impl Summary {
    /// Nearest-rank percentile; zeros for an empty list.
    pub fn of(values: &[f64]) -> Summary {
        if values.is_empty() {
            return Summary::default();
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        let rank = ((0.95 * n).ceil() as usize).clamp(1, s.len());
        Summary {
            min: s[0],
            max: s[s.len() - 1],
            mean: s.iter().sum::<f64>() / n,
            rms: (s.iter().map(|x| x * x).sum::<f64>() / n).sqrt(),
            p95: s[rank - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceFieldResult {
    /// One entry per vertex of `a`, in vertex order.
    pub distances: Vec<f64>,
    pub signed: bool,
    pub summary: Summary,
}

impl DistanceFieldResult {
    /// One value per line, for coloring a mesh by distance.
    pub fn to_ascii(&self) -> String {
        let mut s = String::with_capacity(self.distances.len() * 12);
        for d in &self.distances {
            s.push_str(&format!("{d:.6}\n"));
        }
        s
    }
}

/// Exact distance from every vertex of `a` to the surface of `b`. In signed
/// mode, vertices inside the closed mesh `b` get negative values.
pub fn distance_field(a: &TriMesh, b: &TriMesh, signed: bool) -> Result<DistanceFieldResult, MetricsError> {
    if a.vertices().is_empty() {
        return Err(MetricsError::EmptyMesh('a'));
    }
    if b.triangles().is_empty() {
        return Err(MetricsError::EmptyMesh('b'));
    }
    if signed && !b.is_watertight() {
        return Err(MetricsError::NotWatertight('b'));
    }
    let bvh = MeshBvh::new(b);
    let distances: Vec<f64> = a
        .vertices()
        .par_iter()
        .map(|&p| {
            let d = bvh.closest(p).expect("b has triangles").distance;
            if signed && d > 0.0 && contains_point(&bvh, p) {
                -d
            } else {
                d
            }
        })
        .collect();
    let summary = Summary::of(&distances);
    Ok(DistanceFieldResult { distances, signed, summary })
}

/// Symmetric Hausdorff distance between the vertex sets and the opposite surfaces.
pub fn hausdorff(a: &TriMesh, b: &TriMesh) -> Result<f64, MetricsError> {
    let ab = distance_field(a, b, false)?.summary.max;
    let ba = distance_field(b, a, false).map_err(|e| match e {
        MetricsError::EmptyMesh(c) => MetricsError::EmptyMesh(if c == 'a' { 'b' } else { 'a' }),
        e => e,
    })?;
    Ok(ab.max(ba.summary.max))
}

/// Signed positions along `axis` where the line through `origin` crosses
/// the mesh, sorted. Points on shared edges and vertices are assigned to
/// exactly one triangle by a top-left rule on exact orientations.
pub fn line_crossings(bvh: &MeshBvh, origin: Point3, axis: usize) -> Vec<f64> {
    let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
    let q = robust::Coord { x: origin[u], y: origin[v] };
    let mut out = Vec::new();
    for t in bvh.along_axis(origin, axis) {
        let tri = bvh.triangle(t);
        let mut c = tri.map(|p| robust::Coord { x: p[u], y: p[v] });
        let mut h = tri.map(|p| p[axis]);
        let area = robust::orient2d(c[0], c[1], c[2]);
        if area == 0.0 {
            continue;
        }
        if area < 0.0 {
            c.swap(1, 2);
            h.swap(1, 2);
        }
        let mut w = [0.0; 3];
        let mut inside = true;
        for e in 0..3 {
            let (a, b) = (c[(e + 1) % 3], c[(e + 2) % 3]);
            let o = robust::orient2d(a, b, q);
            let top_left = a.y > b.y || (a.y == b.y && a.x < b.x);
            if o < 0.0 || (o == 0.0 && !top_left) {
                inside = false;
                break;
            }
            w[e] = o;
        }
        if inside {
            let s = w[0] + w[1] + w[2];
            out.push((w[0] * h[0] + w[1] * h[1] + w[2] * h[2]) / s);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Majority vote of ray parity along the three coordinate axes.
pub fn contains_point(bvh: &MeshBvh, p: Point3) -> bool {
    let votes = (0..3).filter(|&axis| line_crossings(bvh, p, axis).iter().filter(|&&x| x > p[axis]).count() % 2 == 1).count();
    votes >= 2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Volumes {
    pub a: f64,
    pub b: f64,
    pub intersection: f64,
    pub union: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapResult {
    pub dice: f64,
    pub jaccard: f64,
    pub voxel_size: f64,
    pub volumes: Volumes,
}

/// Largest bounding-box extent of the pair divided by 256.
pub fn default_voxel_size(a: &TriMesh, b: &TriMesh) -> f64 {
    let e = a.bounds().union(b.bounds()).extent();
    e.x.max(e.y).max(e.z) / 256.0
}

/// Voxel grid on the lattice of multiples of the voxel size.
#[derive(Debug, Clone, Copy)]
struct Grid {
    start: [i64; 3],
    dims: [usize; 3],
    h: f64,
}

impl Grid {
    fn covering(bounds: Aabb, h: f64) -> Grid {
        let lo = [0, 1, 2].map(|k| (bounds.min[k] / h).floor() as i64);
        let hi = [0, 1, 2].map(|k| (bounds.max[k] / h).ceil() as i64);
        Grid { start: lo, dims: [0, 1, 2].map(|k| (hi[k] - lo[k]).max(1) as usize), h }
    }

    fn cells(&self) -> usize {
        self.dims.iter().product()
    }

    fn center(&self, k: usize, i: usize) -> f64 {
        (self.start[k] as f64 + i as f64 + 0.5) * self.h
    }

    fn index(&self, ijk: [usize; 3]) -> usize {
        (ijk[2] * self.dims[1] + ijk[1]) * self.dims[0] + ijk[0]
    }
}

/// Voxel centers inside the closed mesh, by three-axis scanline parity with majority vote.
fn rasterize(mesh: &TriMesh, g: &Grid) -> BitVec {
    let bvh = MeshBvh::new(mesh);
    let mut votes = vec![0u8; g.cells()];
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let rows: Vec<(usize, usize, Vec<f64>)> = (0..g.dims[u] * g.dims[v])
            .into_par_iter()
            .map(|r| {
                let (iu, iv) = (r % g.dims[u], r / g.dims[u]);
                let mut o = Point3::ZERO;
                o[u] = g.center(u, iu);
                o[v] = g.center(v, iv);
                (iu, iv, line_crossings(&bvh, o, axis))
            })
            .collect();
        for (iu, iv, xs) in rows {
            let mut next = 0;
            for i in 0..g.dims[axis] {
                let c = g.center(axis, i);
                while next < xs.len() && xs[next] < c {
                    next += 1;
                }
                if next % 2 == 1 {
                    let mut ijk = [0; 3];
                    ijk[axis] = i;
                    ijk[u] = iu;
                    ijk[v] = iv;
                    votes[g.index(ijk)] += 1;
                }
            }
        }
    }
    votes.into_iter().map(|n| n >= 2).collect()
}

pub fn overlap_rate(a: &TriMesh, b: &TriMesh, voxel_size: f64) -> Result<OverlapResult, MetricsError> {
    overlap_rate_capped(a, b, voxel_size, DEFAULT_MAX_CELLS)
}

/// Dice and Jaccard of the two solids on a shared voxel grid.
pub fn overlap_rate_capped(a: &TriMesh, b: &TriMesh, voxel_size: f64, max_cells: usize) -> Result<OverlapResult, MetricsError> {
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(MetricsError::BadVoxelSize(voxel_size));
    }
    for (m, name) in [(a, 'a'), (b, 'b')] {
        if m.triangles().is_empty() {
            return Err(MetricsError::EmptyMesh(name));
        }
        if !m.is_watertight() {
            return Err(MetricsError::NotWatertight(name));
        }
    }
    let g = Grid::covering(a.bounds().union(b.bounds()), voxel_size);
    let cells = g.dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).unwrap_or(usize::MAX);
    if cells > max_cells {
        return Err(MetricsError::GridTooLarge { cells, cap: max_cells });
    }
    let (ra, rb) = rayon::join(|| rasterize(a, &g), || rasterize(b, &g));
    let na = ra.count_ones();
    let nb = rb.count_ones();
    let ni = (ra.clone() & rb.clone()).count_ones();
    let nu = (ra | rb).count_ones();
    let cell = voxel_size.powi(3);
    let dice = if na + nb == 0 { 0.0 } else { 2.0 * ni as f64 / (na + nb) as f64 };
    let jaccard = if nu == 0 { 0.0 } else { ni as f64 / nu as f64 };
    Ok(OverlapResult {
        dice,
        jaccard,
        voxel_size,
        volumes: Volumes { a: na as f64 * cell, b: nb as f64 * cell, intersection: ni as f64 * cell, union: nu as f64 * cell },
    })
}
