//! Binary and ASCII STL.
//!
//! Binary layout: 80-byte header, little-endian `u32` triangle count, then one
//! 50-byte record per triangle (normal, three vertices as `f32` triples, and a
//! `u16` attribute word). STL carries no units; everything here is millimeters.

use std::fmt::Write as _;

use thiserror::Error;

use super::mesh::TriMesh;
use super::vec::{Point3, Vec3};

pub const HEADER_LEN: usize = 80;
pub const RECORD_LEN: usize = 50;
/// Default vertex weld tolerance in millimeters.
pub const DEFAULT_WELD_TOLERANCE: f64 = 1e-6;

const HEADER_TEXT: &[u8] = b"cranial binary STL (units: mm)";

#[derive(Debug, Error, PartialEq)]
pub enum StlError {
    #[error("truncated STL: {0} bytes is shorter than the 84-byte binary preamble")]
    Truncated(usize),
    #[error("STL triangle count mismatch: header declares {declared} triangles, payload holds {actual_bytes} bytes")]
    CountMismatch { declared: u32, actual_bytes: usize },
    #[error("non-finite coordinate in triangle {0}")]
    NonFinite(usize),
    #[error("malformed ASCII STL at line {line}: {msg}")]
    Ascii { line: usize, msg: String },
}

/// Parses binary or ASCII STL and welds coincident vertices within `weld_tolerance`.
pub fn read_stl(bytes: &[u8], weld_tolerance: f64) -> Result<TriMesh, StlError> {
    let soup = read_stl_soup(bytes)?;
    Ok(soup_to_mesh(&soup, weld_tolerance))
}

/// Raw triangle soup, in file order.
pub fn read_stl_soup(bytes: &[u8]) -> Result<Vec<[Point3; 3]>, StlError> {
    if bytes.len() >= HEADER_LEN + 4 {
        let declared = u32::from_le_bytes(bytes[80..84].try_into().unwrap());
        let expected = HEADER_LEN + 4 + declared as usize * RECORD_LEN;
        if expected == bytes.len() {
            return parse_binary(bytes, declared as usize);
        }
        if looks_ascii(bytes) {
            return parse_ascii(bytes);
        }
        return Err(StlError::CountMismatch { declared, actual_bytes: bytes.len() - HEADER_LEN - 4 });
    }
    if looks_ascii(bytes) {
        return parse_ascii(bytes);
    }
    Err(StlError::Truncated(bytes.len()))
}

fn looks_ascii(bytes: &[u8]) -> bool {
    let start = bytes.iter().position(|b| !b.is_ascii_whitespace()).unwrap_or(bytes.len());
    bytes[start..].starts_with(b"solid") && std::str::from_utf8(bytes).is_ok()
}

fn parse_binary(bytes: &[u8], count: usize) -> Result<Vec<[Point3; 3]>, StlError> {
    let mut out = Vec::with_capacity(count);
    for t in 0..count {
        let rec = &bytes[HEADER_LEN + 4 + t * RECORD_LEN..][..RECORD_LEN];
        let f = |i: usize| f32::from_le_bytes(rec[i * 4..i * 4 + 4].try_into().unwrap()) as f64;
        let tri = [Vec3::new(f(3), f(4), f(5)), Vec3::new(f(6), f(7), f(8)), Vec3::new(f(9), f(10), f(11))];
        if tri.iter().any(|p| !p.is_finite()) {
            return Err(StlError::NonFinite(t));
        }
        out.push(tri);
    }
    Ok(out)
}

fn parse_ascii(bytes: &[u8]) -> Result<Vec<[Point3; 3]>, StlError> {
    let text = std::str::from_utf8(bytes).map_err(|_| StlError::Ascii { line: 0, msg: "not UTF-8".into() })?;
    let mut out = Vec::new();
    let mut current: Vec<Point3> = Vec::with_capacity(3);
    for (ln, line) in text.lines().enumerate() {
        let mut words = line.split_whitespace();
        match words.next() {
            Some("vertex") => {
                let mut c = [0.0f64; 3];
                for v in c.iter_mut() {
                    let w = words.next().ok_or_else(|| StlError::Ascii { line: ln + 1, msg: "vertex needs 3 coordinates".into() })?;
                    *v = w.parse::<f32>().map_err(|e| StlError::Ascii { line: ln + 1, msg: e.to_string() })? as f64;
                }
                current.push(c.into());
            }
            Some("endfacet") => {
                if current.len() != 3 {
                    return Err(StlError::Ascii { line: ln + 1, msg: format!("facet has {} vertices", current.len()) });
                }
                let tri = [current[0], current[1], current[2]];
                if tri.iter().any(|p| !p.is_finite()) {
                    return Err(StlError::NonFinite(out.len()));
                }
                out.push(tri);
                current.clear();
            }
            _ => {}
        }
    }
    if !current.is_empty() {
        return Err(StlError::Ascii { line: text.lines().count(), msg: "unterminated facet".into() });
    }
    Ok(out)
}

/// Welds a triangle soup into an indexed mesh, dropping collapsed triangles.
pub fn soup_to_mesh(soup: &[[Point3; 3]], weld_tolerance: f64) -> TriMesh {
    let pts: Vec<Point3> = soup.iter().flatten().copied().collect();
    let (vertices, remap) = super::mesh::weld_points(&pts, weld_tolerance);
    let triangles = remap
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .filter(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2])
        .collect();
    TriMesh::from_parts_unchecked(vertices, triangles).compacted()
}

fn f32_point(p: Point3) -> [f32; 3] {
    [p.x as f32, p.y as f32, p.z as f32]
}

// Normal from the f32-rounded vertices so a reread mesh writes identical bytes.
fn facet_normal(tri: &[[f32; 3]; 3]) -> [f32; 3] {
    let p = tri.map(|v| Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64));
    let n = (p[1] - p[0]).cross(p[2] - p[0]).try_normalize().unwrap_or(Vec3::ZERO);
    f32_point(n)
}

pub fn binary_stl_len(triangle_count: usize) -> usize {
    HEADER_LEN + 4 + RECORD_LEN * triangle_count
}

pub fn write_stl_binary(mesh: &TriMesh) -> Vec<u8> {
    let n = mesh.triangles().len();
    let mut out = Vec::with_capacity(binary_stl_len(n));
    let mut header = [b' '; HEADER_LEN];
    header[..HEADER_TEXT.len()].copy_from_slice(HEADER_TEXT);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    for t in 0..n {
        let tri = mesh.triangle_points(t).map(f32_point);
        for c in facet_normal(&tri) {
            out.extend_from_slice(&c.to_le_bytes());
        }
        for v in &tri {
            for c in v {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

pub fn write_stl_ascii(mesh: &TriMesh, name: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "solid {name}");
    for t in 0..mesh.triangles().len() {
        let tri = mesh.triangle_points(t).map(f32_point);
        let n = facet_normal(&tri);
        let _ = writeln!(s, "  facet normal {:e} {:e} {:e}", n[0], n[1], n[2]);
        let _ = writeln!(s, "    outer loop");
        for v in &tri {
            let _ = writeln!(s, "      vertex {:e} {:e} {:e}", v[0], v[1], v[2]);
        }
        let _ = writeln!(s, "    endloop");
        let _ = writeln!(s, "  endfacet");
    }
    let _ = writeln!(s, "endsolid {name}");
    s
}
