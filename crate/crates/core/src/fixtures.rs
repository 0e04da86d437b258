//! Synthetic meshes and volumes with known analytic properties.
//!
//! Used by tests, the acceptance suite, and the CLI's synthetic case generator.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::geom::{Point3, TriMesh, Triangle, Vec3};
use crate::volume::ScalarVolume;

pub fn unit_cube() -> TriMesh {
    axis_box(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0))
}

/// Outward-oriented closed box.
pub fn axis_box(min: Point3, max: Point3) -> TriMesh {
    let v = |i: u32| {
        Vec3::new(
            if i & 1 != 0 { max.x } else { min.x },
            if i & 2 != 0 { max.y } else { min.y },
            if i & 4 != 0 { max.z } else { min.z },
        )
    };
    let vertices = (0..8).map(v).collect();
    let triangles = vec![
        [0, 2, 1], [1, 2, 3], // z = min
        [4, 5, 6], [5, 7, 6], // z = max
        [0, 1, 4], [1, 5, 4], // y = min
        [2, 6, 3], [3, 6, 7], // y = max
        [0, 4, 2], [2, 4, 6], // x = min
        [1, 3, 5], [3, 7, 5], // x = max
    ];
    TriMesh::new(vertices, triangles).unwrap()
}

/// Icosahedron subdivided `level` times and pushed onto the sphere.
pub fn icosphere(radius: f64, level: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|&a| Vec3::from(a).normalize())
    .collect();
    let mut tris: Vec<Triangle> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(tris.len() * 4);
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                (verts.len() - 1) as u32
            })
        };
        for [a, b, c] in tris {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    TriMesh::new(verts.into_iter().map(|v| v * radius).collect(), tris).unwrap()
}

/// Latitude/longitude sphere with single-vertex poles, outward oriented.
pub fn uv_sphere(center: Point3, radius: f64, segments: u32, rings: u32) -> TriMesh {
    let mut verts = vec![center + Vec3::Z * radius];
    for r in 1..rings {
        let theta = PI * r as f64 / rings as f64;
        for s in 0..segments {
            let phi = 2.0 * PI * s as f64 / segments as f64;
            verts.push(center + Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()) * radius);
        }
    }
    verts.push(center - Vec3::Z * radius);
    let south = verts.len() as u32 - 1;
    let ring = |r: u32, s: u32| 1 + (r - 1) * segments + (s % segments);
    let mut tris = Vec::new();
    for s in 0..segments {
        tris.push([0, ring(1, s), ring(1, s + 1)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            let (a, b, c, d) = (ring(r, s), ring(r, s + 1), ring(r + 1, s), ring(r + 1, s + 1));
            tris.push([a, c, b]);
            tris.push([b, c, d]);
        }
    }
    for s in 0..segments {
        tris.push([south, ring(rings - 1, s + 1), ring(rings - 1, s)]);
    }
    TriMesh::new(verts, tris).unwrap()
}

/// Polar-grid disk patch: a center vertex and `rings` rings of `segments`
/// vertices, mapped through `place(radius_fraction, angle)`. Oriented so the
/// boundary runs counter-clockwise in the (angle) parameter.
fn polar_patch(rings: u32, segments: u32, place: impl Fn(f64, f64) -> Point3) -> TriMesh {
    let mut verts = vec![place(0.0, 0.0)];
    for r in 1..=rings {
        for s in 0..segments {
            verts.push(place(r as f64 / rings as f64, 2.0 * PI * s as f64 / segments as f64));
        }
    }
    let ring = |r: u32, s: u32| 1 + (r - 1) * segments + (s % segments);
    let mut tris = Vec::new();
    for s in 0..segments {
        tris.push([0, ring(1, s), ring(1, s + 1)]);
    }
    for r in 1..rings {
        for s in 0..segments {
            let (a, b, c, d) = (ring(r, s), ring(r, s + 1), ring(r + 1, s), ring(r + 1, s + 1));
            tris.push([a, c, d]);
            tris.push([a, d, b]);
        }
    }
    TriMesh::new(verts, tris).unwrap()
}

/// Flat disk in z = 0 facing +Z.
pub fn flat_disk(radius: f64, rings: u32, segments: u32) -> TriMesh {
    polar_patch(rings, segments, |f, a| Vec3::new(radius * f * a.cos(), radius * f * a.sin(), 0.0))
}

/// Spherical cap about +Z on a sphere centered at the origin, facing outward.
pub fn spherical_cap(radius: f64, half_angle: f64, rings: u32, segments: u32) -> TriMesh {
    polar_patch(rings, segments, |f, a| {
        let th = half_angle * f;
        Vec3::new(th.sin() * a.cos(), th.sin() * a.sin(), th.cos()) * radius
    })
}

/// Regular `n x n` grid over `[0, size]^2` in z = 0, facing +Z.
pub fn grid_patch(size: f64, n: u32) -> TriMesh {
    let h = size / n as f64;
    let mut verts = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            verts.push(Vec3::new(i as f64 * h, j as f64 * h, 0.0));
        }
    }
    let id = |i: u32, j: u32| j * (n + 1) + i;
    let mut tris = Vec::new();
    for j in 0..n {
        for i in 0..n {
            tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriMesh::new(verts, tris).unwrap()
}

/// Ball of radius `r` sampled as `r - |p - c|` (positive inside).
pub fn sphere_volume(n: usize, spacing: f64, center: Point3, r: f64) -> ScalarVolume {
    ScalarVolume::from_fn([n, n, n], Vec3::new(spacing, spacing, spacing), Vec3::ZERO, |p| r - (p - center).norm()).unwrap()
}

/// Parameters of the synthetic skull: a spherical shell centered at the
/// origin with an elliptical prism-shaped hole drilled along +X.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellDefect {
    pub outer_radius: f64,
    pub thickness: f64,
    /// Semi-axes of the hole cross-section in (y, z).
    pub semi_y: f64,
    pub semi_z: f64,
}

impl Default for ShellDefect {
    fn default() -> Self {
        ShellDefect { outer_radius: 80.0, thickness: 6.0, semi_y: 28.0, semi_z: 20.0 }
    }
}

impl ShellDefect {
    pub fn inner_radius(&self) -> f64 {
        self.outer_radius - self.thickness
    }

    /// Bone-positive field: >0 inside the shell material, <0 elsewhere.
    pub fn field(&self, p: Point3) -> f64 {
        let r = p.norm();
        let shell = (self.outer_radius - r).min(r - self.inner_radius());
        if p.x <= 0.0 {
            return shell;
        }
        // approximate distance outside the elliptical hole, scaled by the smaller semi-axis
        let e = ((p.y / self.semi_y).powi(2) + (p.z / self.semi_z).powi(2)).sqrt();
        let hole = (e - 1.0) * self.semi_y.min(self.semi_z);
        shell.min(hole)
    }

    /// Point on the hole edge at parameter `angle`, on the sphere of radius `r`.
    pub fn edge_point(&self, angle: f64, r: f64) -> Point3 {
        let y = self.semi_y * angle.cos();
        let z = self.semi_z * angle.sin();
        Vec3::new((r * r - y * y - z * z).sqrt(), y, z)
    }

    /// Closed polyline along the hole edge on the sphere of radius `r`,
    /// counter-clockwise seen from +X.
    pub fn edge_loop(&self, r: f64, n: usize) -> Vec<Point3> {
        (0..n).map(|i| self.edge_point(2.0 * PI * i as f64 / n as f64, r)).collect()
    }

    pub fn volume(&self, spacing: f64) -> ScalarVolume {
        let half = self.outer_radius + 4.0 * spacing;
        let n = (2.0 * half / spacing).ceil() as usize + 1;
        let origin = Vec3::new(-half, -half, -half);
        ScalarVolume::from_fn([n, n, n], Vec3::new(spacing, spacing, spacing), origin, |p| self.field(p)).unwrap()
    }
}
