//! Isosurface extraction.
//!
//! [`extract_isosurface`] is organized as a four-pass sweep over grid rows
//! (x-edge classification with per-row trim bounds, y/z edge and triangle
//! counting, prefix sums, then generation into preallocated slots). Every row
//! owns the crossing edges leaving its points in +x, +y and +z, so vertex ids
//! are fixed by the counting pass and rows can be processed independently.
//!
//! [`extract_isosurface_reference`] walks every cube and welds through a hash
//! map. Both produce the same triangles; the solid is the region where
//! samples are `>= iso` and faces point toward lower values.

use std::collections::HashMap;

use rayon::prelude::*;

use super::tables::{CORNER_OFFSETS, EDGE_CORNERS, TRI_TABLE};
use super::{ScalarVolume, VolumeError, VoxelMask};
use crate::geom::{Point3, TriMesh, Triangle};

const X_EDGE: u8 = 1;
const Y_EDGE: u8 = 2;
const Z_EDGE: u8 = 4;

/// For each cube edge: (row offset dj, row offset dk, point offset di, axis).
const EDGE_LOCATION: [(usize, usize, usize, u8); 12] = [
    (0, 0, 0, X_EDGE),
    (0, 0, 1, Y_EDGE),
    (1, 0, 0, X_EDGE),
    (0, 0, 0, Y_EDGE),
    (0, 1, 0, X_EDGE),
    (0, 1, 1, Y_EDGE),
    (1, 1, 0, X_EDGE),
    (0, 1, 0, Y_EDGE),
    (0, 0, 0, Z_EDGE),
    (0, 0, 1, Z_EDGE),
    (1, 0, 1, Z_EDGE),
    (1, 0, 0, Z_EDGE),
];

fn triangle_count(case: usize) -> usize {
    TRI_TABLE[case].iter().take_while(|&&e| e >= 0).count() / 3
}

// With bits set for corners below iso, table order already faces outward.
#[inline]
fn emit(a: u32, b: u32, c: u32) -> Triangle {
    [a, b, c]
}

fn masked_samples(vol: &ScalarVolume, iso: f64, mask: Option<&VoxelMask>) -> Result<Vec<f64>, VolumeError> {
    let dims = vol.dims();
    if dims.iter().any(|&d| d < 2) {
        return Err(VolumeError::Degenerate(dims));
    }
    match mask {
        None => Ok(vol.samples().to_vec()),
        Some(m) => {
            if m.dims() != dims {
                return Err(VolumeError::MaskDims { mask: m.dims(), volume: dims });
            }
            Ok(vol.samples().iter().enumerate().map(|(i, &s)| if m.get_linear(i) { s } else { iso - 1.0 }).collect())
        }
    }
}

#[inline]
fn interpolate(p0: Point3, p1: Point3, s0: f64, s1: f64, iso: f64) -> Point3 {
    let t = (iso - s0) / (s1 - s0);
    p0 + (p1 - p0) * t
}

/// Per-cube marching cubes with hash-map welding. Kept as the correctness
/// reference for the sweep implementation.
pub fn extract_isosurface_reference(vol: &ScalarVolume, iso: f64, mask: Option<&VoxelMask>) -> Result<TriMesh, VolumeError> {
    let samples = masked_samples(vol, iso, mask)?;
    let [nx, ny, nz] = vol.dims();
    let at = |i: usize, j: usize, k: usize| samples[i + nx * (j + ny * k)];
    let mut ids: HashMap<usize, u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut case = 0usize;
                let mut vals = [0.0; 8];
                for (c, o) in CORNER_OFFSETS.iter().enumerate() {
                    vals[c] = at(i + o[0], j + o[1], k + o[2]);
                    if vals[c] < iso {
                        case |= 1 << c;
                    }
                }
                let row = &TRI_TABLE[case];
                let mut edge_vertex = |e: usize| -> u32 {
                    let [c0, c1] = EDGE_CORNERS[e];
                    let o0 = CORNER_OFFSETS[c0];
                    let o1 = CORNER_OFFSETS[c1];
                    let (pi, pj, pk) = (i + o0[0], j + o0[1], k + o0[2]);
                    let axis = (0..3).find(|&a| o1[a] != o0[a]).unwrap();
                    let key = 3 * (pi + nx * (pj + ny * pk)) + axis;
                    *ids.entry(key).or_insert_with(|| {
                        let p = interpolate(
                            vol.position(pi, pj, pk),
                            vol.position(i + o1[0], j + o1[1], k + o1[2]),
                            vals[c0],
                            vals[c1],
                            iso,
                        );
                        vertices.push(p);
                        (vertices.len() - 1) as u32
                    })
                };
                for t in row.chunks(3).take_while(|t| t[0] >= 0) {
                    let a = edge_vertex(t[0] as usize);
                    let b = edge_vertex(t[1] as usize);
                    let c = edge_vertex(t[2] as usize);
                    triangles.push(emit(a, b, c));
                }
            }
        }
    }
    Ok(TriMesh::from_parts_unchecked(vertices, triangles))
}

/// Trim state of one grid row: the first and last crossing x-edge.
#[derive(Clone, Copy, Default)]
struct RowTrim {
    first: Option<usize>,
    last: usize,
}

struct Sweep<'a> {
    nx: usize,
    ny: usize,
    nz: usize,
    iso: f64,
    samples: &'a [f64],
    inside: Vec<bool>,
    trims: Vec<RowTrim>,
}

impl Sweep<'_> {
    #[inline]
    fn row_start(&self, j: usize, k: usize) -> usize {
        self.nx * (j + self.ny * k)
    }

    /// Point range of a row pair that can hold a crossing between the two rows.
    fn pair_range(&self, a: usize, b: usize) -> Option<(usize, usize)> {
        let (ta, tb) = (self.trims[a], self.trims[b]);
        let (sa, sb) = (a * self.nx, b * self.nx);
        let left_differs = self.inside[sa] != self.inside[sb];
        let right_differs = self.inside[sa + self.nx - 1] != self.inside[sb + self.nx - 1];
        let first = match (ta.first, tb.first) {
            _ if left_differs => Some(0),
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        };
        let first = first.or(if right_differs { Some(0) } else { None })?;
        let last = if right_differs { self.nx - 1 } else { (ta.last.max(tb.last) + 1).min(self.nx - 1) };
        Some((first, last.max(first)))
    }

    /// Inclusive point range holding every crossing edge owned by row (j, k).
    fn owned_range(&self, j: usize, k: usize) -> Option<(usize, usize)> {
        let r = j + self.ny * k;
        let mut range: Option<(usize, usize)> = self.trims[r].first.map(|f| (f, self.trims[r].last));
        let mut merge = |o: Option<(usize, usize)>| {
            if let Some((a, b)) = o {
                range = Some(match range {
                    Some((x, y)) => (x.min(a), y.max(b)),
                    None => (a, b),
                });
            }
        };
        if j + 1 < self.ny {
            merge(self.pair_range(r, r + 1));
        }
        if k + 1 < self.nz {
            merge(self.pair_range(r, r + self.ny));
        }
        range
    }

    fn flags_at(&self, j: usize, k: usize, i: usize) -> u8 {
        let p = self.row_start(j, k) + i;
        let here = self.inside[p];
        let mut f = 0;
        if i + 1 < self.nx && self.inside[p + 1] != here {
            f |= X_EDGE;
        }
        if j + 1 < self.ny && self.inside[p + self.nx] != here {
            f |= Y_EDGE;
        }
        if k + 1 < self.nz && self.inside[p + self.nx * self.ny] != here {
            f |= Z_EDGE;
        }
        f
    }

    /// Cube range [lo, hi) of the cube row (j, k) that can be non-trivial.
    fn cube_range(&self, j: usize, k: usize) -> Option<(usize, usize)> {
        let rows = [j + self.ny * k, j + 1 + self.ny * k, j + self.ny * (k + 1), j + 1 + self.ny * (k + 1)];
        let left: Vec<bool> = rows.iter().map(|&r| self.inside[r * self.nx]).collect();
        let right: Vec<bool> = rows.iter().map(|&r| self.inside[r * self.nx + self.nx - 1]).collect();
        let left_differs = left.iter().any(|&b| b != left[0]);
        let right_differs = right.iter().any(|&b| b != right[0]);
        let mut lo = rows.iter().filter_map(|&r| self.trims[r].first).min();
        let mut hi = rows.iter().filter(|&&r| self.trims[r].first.is_some()).map(|&r| self.trims[r].last + 1).max();
        if left_differs {
            lo = Some(0);
        }
        if right_differs {
            hi = Some(self.nx - 1);
            lo = lo.or(Some(0));
        }
        match (lo, hi) {
            (Some(l), Some(h)) => Some((l, h.min(self.nx - 1))),
            (Some(l), None) => Some((l, self.nx - 1)),
            _ => None,
        }
    }

    fn case_at(&self, i: usize, j: usize, k: usize) -> usize {
        let mut case = 0;
        for (c, o) in CORNER_OFFSETS.iter().enumerate() {
            if !self.inside[i + o[0] + self.nx * (j + o[1] + self.ny * (k + o[2]))] {
                case |= 1 << c;
            }
        }
        case
    }
}

/// Extracts the `iso` level set as a triangle mesh. With a mask, voxels outside
/// it are treated as lying below `iso`.
pub fn extract_isosurface(vol: &ScalarVolume, iso: f64, mask: Option<&VoxelMask>) -> Result<TriMesh, VolumeError> {
    let samples = masked_samples(vol, iso, mask)?;
    let [nx, ny, nz] = vol.dims();
    let rows = ny * nz;

    // Pass 1: classify points and trim each row to its x-edge crossings.
    let inside: Vec<bool> = samples.par_iter().map(|&s| s >= iso).collect();
    let trims: Vec<RowTrim> = (0..rows)
        .into_par_iter()
        .map(|r| {
            let row = &inside[r * nx..(r + 1) * nx];
            let mut t = RowTrim::default();
            for i in 0..nx - 1 {
                if row[i] != row[i + 1] {
                    t.first.get_or_insert(i);
                    t.last = i;
                }
            }
            t
        })
        .collect();
    let sweep = Sweep { nx, ny, nz, iso, samples: &samples, inside, trims };

    // Pass 2: owned-edge ranges and counts per grid row, triangle counts per cube row.
    let owned: Vec<Option<(usize, usize)>> = (0..rows).into_par_iter().map(|r| sweep.owned_range(r % ny, r / ny)).collect();
    let edge_counts: Vec<usize> = (0..rows)
        .into_par_iter()
        .map(|r| match owned[r] {
            Some((a, b)) => (a..=b).map(|i| sweep.flags_at(r % ny, r / ny, i).count_ones() as usize).sum(),
            None => 0,
        })
        .collect();
    let cube_rows = (ny - 1) * (nz - 1);
    let cube_ranges: Vec<Option<(usize, usize)>> =
        (0..cube_rows).into_par_iter().map(|c| sweep.cube_range(c % (ny - 1), c / (ny - 1))).collect();
    let tri_counts: Vec<usize> = (0..cube_rows)
        .into_par_iter()
        .map(|c| {
            let (j, k) = (c % (ny - 1), c / (ny - 1));
            match cube_ranges[c] {
                Some((lo, hi)) => (lo..hi).map(|i| triangle_count(sweep.case_at(i, j, k))).sum(),
                None => 0,
            }
        })
        .collect();

    // Pass 3: prefix sums give every row its output slots.
    let mut vertex_offsets = Vec::with_capacity(rows + 1);
    let mut acc = 0;
    for &c in &edge_counts {
        vertex_offsets.push(acc);
        acc += c;
    }
    vertex_offsets.push(acc);
    let mut vertices = vec![Point3::ZERO; acc];
    let mut tri_offsets = Vec::with_capacity(cube_rows + 1);
    let mut tacc = 0;
    for &c in &tri_counts {
        tri_offsets.push(tacc);
        tacc += c;
    }
    let mut triangles: Vec<Triangle> = vec![[0; 3]; tacc];

    // Pass 4: generate vertices per grid row and triangles per cube row.
    let mut vslices = Vec::with_capacity(rows);
    let mut rest: &mut [Point3] = &mut vertices;
    for &c in &edge_counts {
        let (head, tail) = rest.split_at_mut(c);
        vslices.push(head);
        rest = tail;
    }
    vslices.into_par_iter().enumerate().for_each(|(r, out)| {
        let Some((a, b)) = owned[r] else { return };
        let (j, k) = (r % ny, r / ny);
        let mut n = 0;
        for i in a..=b {
            let f = sweep.flags_at(j, k, i);
            let p0 = sweep.row_start(j, k) + i;
            let x0 = vol.position(i, j, k);
            for (bit, step, x1) in [
                (X_EDGE, 1, (i + 1, j, k)),
                (Y_EDGE, nx, (i, j + 1, k)),
                (Z_EDGE, nx * ny, (i, j, k + 1)),
            ] {
                if f & bit != 0 {
                    out[n] = interpolate(x0, vol.position(x1.0, x1.1, x1.2), sweep.samples[p0], sweep.samples[p0 + step], sweep.iso);
                    n += 1;
                }
            }
        }
        debug_assert_eq!(n, out.len());
    });

    let mut tslices = Vec::with_capacity(cube_rows);
    let mut trest: &mut [Triangle] = &mut triangles;
    for &c in &tri_counts {
        let (head, tail) = trest.split_at_mut(c);
        tslices.push(head);
        trest = tail;
    }
    tslices.into_par_iter().enumerate().for_each(|(c, out)| {
        let Some((lo, hi)) = cube_ranges[c] else { return };
        if out.is_empty() {
            return;
        }
        let (j, k) = (c % (ny - 1), c / (ny - 1));
        // cursor[dj + 2*dk]: id of the first owned edge at point i of that row
        let mut cursor = [0usize; 4];
        for dk in 0..2 {
            for dj in 0..2 {
                let (rj, rk) = (j + dj, k + dk);
                let r = rj + ny * rk;
                let mut id = vertex_offsets[r];
                if let Some((a, _)) = owned[r] {
                    for i in a..lo {
                        id += sweep.flags_at(rj, rk, i).count_ones() as usize;
                    }
                }
                cursor[dj + 2 * dk] = id;
            }
        }
        let mut n = 0;
        for i in lo..hi {
            let mut flags = [[0u8; 2]; 4];
            for dk in 0..2 {
                for dj in 0..2 {
                    flags[dj + 2 * dk] = [sweep.flags_at(j + dj, k + dk, i), sweep.flags_at(j + dj, k + dk, i + 1)];
                }
            }
            let case = sweep.case_at(i, j, k);
            let edge_id = |e: usize| -> u32 {
                let (dj, dk, di, axis) = EDGE_LOCATION[e];
                let slot = dj + 2 * dk;
                let mut id = cursor[slot];
                if di == 1 {
                    id += flags[slot][0].count_ones() as usize;
                }
                let f = flags[slot][di];
                for lower in [X_EDGE, Y_EDGE] {
                    if lower < axis && f & lower != 0 {
                        id += 1;
                    }
                }
                id as u32
            };
            for t in TRI_TABLE[case].chunks(3).take_while(|t| t[0] >= 0) {
                out[n] = emit(edge_id(t[0] as usize), edge_id(t[1] as usize), edge_id(t[2] as usize));
                n += 1;
            }
            for (slot, f) in flags.iter().enumerate() {
                cursor[slot] += f[0].count_ones() as usize;
            }
        }
        debug_assert_eq!(n, out.len());
    });

    Ok(TriMesh::from_parts_unchecked(vertices, triangles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geom::Vec3;

    fn unit(n: usize, f: impl Fn(Point3) -> f64 + Sync) -> ScalarVolume {
        ScalarVolume::from_fn([n, n, n], Vec3::new(1.0, 1.0, 1.0), Vec3::ZERO, f).unwrap()
    }

    #[test]
    fn empty_below_iso() {
        let v = unit(5, |_| -1.0);
        assert!(extract_isosurface(&v, 0.0, None).unwrap().is_empty());
        assert!(extract_isosurface_reference(&v, 0.0, None).unwrap().is_empty());
    }

    #[test]
    fn single_voxel_is_closed() {
        let v = unit(4, |p| if p == Vec3::new(1.0, 2.0, 1.0) { 1.0 } else { -1.0 });
        let m = extract_isosurface(&v, 0.0, None).unwrap();
        assert_eq!(m.triangles().len(), 8);
        assert!(m.is_watertight());
        assert_eq!(m.euler_characteristic(), 2);
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn degenerate_dims() {
        let v = ScalarVolume::new([1, 3, 3], Vec3::new(1.0, 1.0, 1.0), Vec3::ZERO, vec![0.0; 9]).unwrap();
        assert!(matches!(extract_isosurface(&v, 0.0, None), Err(VolumeError::Degenerate(_))));
    }

    #[test]
    fn mask_suppresses_outside_voxels() {
        let v = unit(8, |p| if p.x < 3.5 && p.x > 0.5 && p.y > 0.5 && p.y < 6.5 && p.z > 0.5 && p.z < 6.5 { 1.0 } else { -1.0 });
        let mut mask = super::super::VoxelMask::new([8, 8, 8]);
        for k in 0..8 {
            for j in 0..8 {
                for i in 0..2 {
                    mask.set([i, j, k], true);
                }
            }
        }
        let full = extract_isosurface(&v, 0.0, None).unwrap();
        let masked = extract_isosurface(&v, 0.0, Some(&mask)).unwrap();
        assert!(masked.signed_volume() < full.signed_volume());
        assert!(masked.is_watertight());
        let m2 = super::super::VoxelMask::new([7, 8, 8]);
        assert!(matches!(extract_isosurface(&v, 0.0, Some(&m2)), Err(VolumeError::MaskDims { .. })));
    }

    #[test]
    fn small_sphere_matches_reference() {
        let v = fixtures::sphere_volume(20, 1.0, Vec3::new(9.3, 9.6, 10.1), 6.5);
        let a = extract_isosurface(&v, 0.0, None).unwrap();
        let b = extract_isosurface_reference(&v, 0.0, None).unwrap();
        assert_eq!(a.triangles().len(), b.triangles().len());
        assert!(a.is_watertight() && b.is_watertight());
        assert!((a.signed_volume() - b.signed_volume()).abs() < 1e-9);
    }
}
