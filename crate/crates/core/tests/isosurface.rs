use std::f64::consts::PI;
use std::time::Instant;

use cranial_core::fixtures;
use cranial_core::geom::{TriMesh, Vec3};
use cranial_core::volume::{extract_isosurface, extract_isosurface_reference, ScalarVolume};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Key = [[u64; 3]; 3];

fn point_key(p: Vec3) -> [u64; 3] {
    [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]
}

/// Triangles as coordinate triples, rotated so the smallest corner leads. Keeps winding.
fn triangle_set(m: &TriMesh) -> Vec<Key> {
    let mut out: Vec<Key> = (0..m.triangles().len())
        .map(|t| {
            let k = m.triangle_points(t).map(point_key);
            let r = (0..3).min_by_key(|&i| k[i]).unwrap();
            [k[r], k[(r + 1) % 3], k[(r + 2) % 3]]
        })
        .collect();
    out.sort_unstable();
    out
}

fn random_volume(seed: u64, n: usize) -> ScalarVolume {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n * n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    ScalarVolume::new([n, n, n], Vec3::new(1.0, 0.75, 1.25), Vec3::new(-3.0, 2.0, 0.5), samples).unwrap()
}

#[test]
fn sweep_matches_reference_on_random_volumes() {
    for seed in 0..50 {
        let vol = random_volume(seed, 16);
        let a = extract_isosurface(&vol, 0.0, None).unwrap();
        let b = extract_isosurface_reference(&vol, 0.0, None).unwrap();
        assert!(!a.is_empty());
        assert_eq!(triangle_set(&a), triangle_set(&b), "seed {seed}");
        assert_eq!(a.vertices().len(), b.vertices().len(), "seed {seed}");
    }
}

#[test]
fn sweep_matches_reference_on_uneven_dims() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for dims in [[2, 2, 2], [2, 9, 3], [17, 2, 5], [5, 6, 2], [31, 3, 4]] {
        let n = dims.iter().product();
        let samples = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let vol = ScalarVolume::new(dims, Vec3::new(1.0, 1.0, 1.0), Vec3::ZERO, samples).unwrap();
        let a = extract_isosurface(&vol, 0.1, None).unwrap();
        let b = extract_isosurface_reference(&vol, 0.1, None).unwrap();
        assert_eq!(triangle_set(&a), triangle_set(&b), "{dims:?}");
    }
}

#[test]
fn sparse_blobs_match_reference() {
    // mostly empty rows exercise the trim bounds
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let c: Vec<Vec3> = (0..3).map(|_| Vec3::new(rng.random_range(5.0..17.0), rng.random_range(5.0..16.0), rng.random_range(5.0..15.0))).collect();
        let r: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..3.5)).collect();
        let vol = ScalarVolume::from_fn([23, 22, 21], Vec3::new(1.0, 1.0, 1.0), Vec3::ZERO, |p| {
            (0..3).map(|i| r[i] - (p - c[i]).norm()).fold(f64::MIN, f64::max)
        })
        .unwrap();
        let a = extract_isosurface(&vol, 0.0, None).unwrap();
        let b = extract_isosurface_reference(&vol, 0.0, None).unwrap();
        assert_eq!(triangle_set(&a), triangle_set(&b));
        assert!(a.is_watertight());
    }
}

#[test]
fn padded_random_volumes_are_closed() {
    for seed in 0..20 {
        let inner = random_volume(100 + seed, 10);
        let vol = ScalarVolume::from_fn([12, 12, 12], Vec3::new(1.0, 1.0, 1.0), Vec3::ZERO, |p| {
            let (i, j, k) = (p.x as usize, p.y as usize, p.z as usize);
            if (1..11).contains(&i) && (1..11).contains(&j) && (1..11).contains(&k) {
                inner.get(i - 1, j - 1, k - 1)
            } else {
                -1.0
            }
        })
        .unwrap();
        let m = extract_isosurface(&vol, 0.0, None).unwrap();
        assert!(m.is_watertight(), "seed {seed}");
        assert!(m.signed_volume() > 0.0);
    }
}

fn vertex_set(m: &TriMesh) -> Vec<[u64; 3]> {
    let mut v: Vec<_> = m.vertices().iter().map(|&p| point_key(p)).collect();
    v.sort_unstable();
    v
}

#[test]
fn negated_field_shares_vertices() {
    for seed in 0..5 {
        let vol = random_volume(500 + seed, 12);
        let a = extract_isosurface(&vol, 0.2, None).unwrap();
        let b = extract_isosurface(&vol.map(|s| -s), -0.2, None).unwrap();
        assert_eq!(vertex_set(&a), vertex_set(&b));
    }
}

#[test]
fn negated_smooth_field_reverses_orientation() {
    let vol = fixtures::sphere_volume(24, 1.0, Vec3::new(11.2, 11.7, 12.1), 7.3);
    let a = extract_isosurface(&vol, 0.0, None).unwrap();
    let b = extract_isosurface(&vol.map(|s| -s), 0.0, None).unwrap();
    assert_eq!(vertex_set(&a), vertex_set(&b));
    assert_eq!(triangle_set(&a), triangle_set(&b.reversed()));
    assert!((a.signed_volume() + b.signed_volume()).abs() < 1e-9);
}

#[test]
fn vertices_lie_on_grid_edges() {
    let vol = random_volume(3, 12);
    let m = extract_isosurface(&vol, 0.0, None).unwrap();
    let sp = vol.spacing();
    let o = vol.origin();
    for v in m.vertices() {
        assert!(v.is_finite());
        let g = [(v.x - o.x) / sp.x, (v.y - o.y) / sp.y, (v.z - o.z) / sp.z];
        let off_grid = g.iter().filter(|c| (*c - c.round()).abs() > 1e-9).count();
        assert!(off_grid <= 1, "{v:?}");
        for (c, n) in g.iter().zip(vol.dims()) {
            assert!(*c >= -1e-9 && *c <= (n - 1) as f64 + 1e-9);
        }
    }
}

#[test]
fn sphere_128_fidelity() {
    let r = 40.0;
    let vol = fixtures::sphere_volume(128, 1.0, Vec3::new(63.5, 63.5, 63.5), r);
    let start = Instant::now();
    let m = extract_isosurface(&vol, 0.0, None).unwrap();
    let elapsed = start.elapsed();
    let s = m.stats();
    assert!(s.is_watertight);
    assert_eq!(s.euler_characteristic, 2);
    let area = 4.0 * PI * r * r;
    let volume = 4.0 / 3.0 * PI * r.powi(3);
    assert!((s.area - area).abs() / area < 0.02, "area {}", s.area);
    assert!((s.signed_volume - volume).abs() / volume < 0.02, "volume {}", s.signed_volume);
    assert!(elapsed.as_secs_f64() < 10.0);
}

