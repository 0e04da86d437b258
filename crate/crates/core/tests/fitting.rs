use std::collections::BTreeSet;
use std::time::Instant;

use cranial_core::contour::{build_implicit, SurfaceContour};
use cranial_core::fit::delaunay::{delaunay_2d, orient, Triangulation};
use cranial_core::fit::{delaunay_fit, fit_patch, project_dedup, Projection, ViewCamera, DEFAULT_VIEWPORT};
use cranial_core::fixtures;
use cranial_core::geom::{Point3, Vec3};
use num::{BigRational, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

fn orient_exact(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> BigRational {
    (q(b[0]) - q(a[0])) * (q(c[1]) - q(a[1])) - (q(b[1]) - q(a[1])) * (q(c[0]) - q(a[0]))
}

/// Positive when `d` is strictly inside the circle through CCW `a, b, c`.
fn incircle_exact(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> BigRational {
    let row = |p: [f64; 2]| {
        let x = q(p[0]) - q(d[0]);
        let y = q(p[1]) - q(d[1]);
        let w = &x * &x + &y * &y;
        (x, y, w)
    };
    let (ax, ay, aw) = row(a);
    let (bx, by, bw) = row(b);
    let (cx, cy, cw) = row(c);
    &ax * (&by * &cw - &bw * &cy) - &ay * (&bx * &cw - &bw * &cx) + &aw * (&bx * &cy - &by * &cx)
}

/// Every CCW triple whose circumcircle holds no other point.
fn brute_force_delaunay(p: &[[f64; 2]]) -> Vec<[usize; 3]> {
    let n = p.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let o = orient_exact(p[i], p[j], p[k]);
                if o.is_zero() {
                    continue;
                }
                let t = if o.is_positive() { [i, j, k] } else { [i, k, j] };
                let empty = (0..n).filter(|&m| !t.contains(&m)).all(|m| !incircle_exact(p[t[0]], p[t[1]], p[t[2]], p[m]).is_positive());
                if empty {
                    out.push(t);
                }
            }
        }
    }
    out.sort();
    out
}

fn hull_size(p: &[[f64; 2]]) -> usize {
    (0..p.len())
        .filter(|&i| {
            // on the hull iff some line through it has every other point on one side
            (0..p.len()).filter(|&j| j != i).any(|j| {
                (0..p.len()).filter(|&k| k != i && k != j).all(|k| orient_exact(p[i], p[j], p[k]).is_positive())
            })
        })
        .count()
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    (0..n).map(|_| [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)]).collect()
}

#[test]
fn matches_empty_circumcircle_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let n = rng.random_range(3..=12);
        let p = random_points(&mut rng, n);
        let lib = delaunay_2d(&p).unwrap();
        assert_eq!(lib, brute_force_delaunay(&p), "{p:?}");
        assert_eq!(lib.len(), 2 * n - hull_size(&p) - 2);
        for t in &lib {
            assert!(orient(p[t[0]], p[t[1]], p[t[2]]) > 0.0);
        }
    }
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn integer_lattice_is_valid_with_ties() {
    // cocircular quadruples: any tie-break is fine, but every triangle must be empty
    let mut p = Vec::new();
    for i in 0..5 {
        for j in 0..4 {
            p.push([i as f64, j as f64]);
        }
    }
    let lib = delaunay_2d(&p).unwrap();
    assert_eq!(lib.len(), 2 * 20 - 14 - 2);
    let area: f64 = lib.iter().map(|t| orient(p[t[0]], p[t[1]], p[t[2]]) * 0.5).sum();
    assert!((area - 12.0).abs() < 1e-12);
    for t in &lib {
        for (m, &d) in p.iter().enumerate() {
            if !t.contains(&m) {
                assert!(!incircle_exact(p[t[0]], p[t[1]], p[t[2]], d).is_positive());
            }
        }
    }
}

#[test]
fn constraints_survive_and_stay_valid() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        // boundary polygon first, then interior points
        let m = rng.random_range(5..12);
        let mut p: Vec<[f64; 2]> = (0..m)
            .map(|i| {
                let a = std::f64::consts::TAU * (i as f64 + rng.random_range(-0.3..0.3)) / m as f64;
                let r = rng.random_range(5.0..10.0);
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        p.extend(random_points(&mut rng, 30).into_iter().map(|[x, y]| [x * 0.4, y * 0.4]));
        let mut tri = Triangulation::new(p.clone()).unwrap();
        for i in 0..m {
            tri.insert_constraint(i, (i + 1) % m).unwrap();
        }
        for i in 0..m {
            assert!(tri.is_constrained(i, (i + 1) % m));
        }
        let ts = tri.triangles();
        let edges: BTreeSet<(usize, usize)> = ts.iter().flat_map(|t| (0..3).map(move |e| (t[e], t[(e + 1) % 3]))).collect();
        for i in 0..m {
            let (a, b) = (i, (i + 1) % m);
            assert!(edges.contains(&(a, b)) || edges.contains(&(b, a)));
        }
        for t in &ts {
            assert!(orient(p[t[0]], p[t[1]], p[t[2]]) > 0.0);
        }
    }
}

fn top_camera(up: Vec3) -> ViewCamera {
    ViewCamera {
        eye: Vec3::new(0.0, 0.0, 200.0),
        look_at: Vec3::ZERO,
        up,
        viewport: [512, 512],
        projection: Projection::Parallel { parallel_scale: 15.0 },
    }
}

fn position_triangles(mesh: &cranial_core::geom::TriMesh) -> BTreeSet<[[u64; 3]; 3]> {
    mesh.triangles()
        .iter()
        .map(|t| {
            let mut c = t.map(|v| {
                let p = mesh.vertices()[v as usize];
                [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]
            });
            let r = (0..3).min_by_key(|&i| c[i]).unwrap();
            c.rotate_left(r);
            c
        })
        .collect()
}

#[test]
fn in_plane_rotation_of_the_camera_changes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<Point3> = (0..60)
        .map(|_| Vec3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-1.0..1.0)))
        .collect();
    let base = position_triangles(&delaunay_fit(&pts, None, &top_camera(Vec3::Y)).unwrap());
    for deg in [90.0f64, 180.0, 270.0] {
        let a = deg.to_radians();
        let up = Vec3::new(-a.sin(), a.cos(), 0.0);
        let other = position_triangles(&delaunay_fit(&pts, None, &top_camera(up)).unwrap());
        assert_eq!(base, other);
    }
}

#[test]
fn fitted_patch_normals_face_the_camera() {
    let sphere = fixtures::icosphere(50.0, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let n = rng.random_range(6..20);
        let pts: Vec<Point3> = (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * (i as f64 + rng.random_range(-0.3..0.3)) / n as f64;
                let s: f64 = rng.random_range(0.2..0.5);
                Vec3::new(s.sin() * a.cos(), s.sin() * a.sin(), s.cos()) * 50.0
            })
            .collect();
        let contour = SurfaceContour::on_mesh(pts, &sphere, "s").unwrap();
        let cam = ViewCamera::framing(&build_implicit(&contour).unwrap(), DEFAULT_VIEWPORT);
        let patch = fit_patch(&sphere, &contour, &cam, true).unwrap();
        assert_eq!(patch.mesh.euler_characteristic(), 1);
        assert!(patch.mesh.triangles().len() > n);
        let toward = cam.toward_eye();
        for t in 0..patch.mesh.triangles().len() {
            assert!(patch.mesh.triangle_cross(t).dot(toward) > 0.0);
        }
        for p in patch.mesh.vertices() {
            assert!((p.norm() - 50.0).abs() < 0.5);
        }
    }
}

#[test]
fn dedup_keeps_the_near_side() {
    // the far hemisphere projects onto the same pixels as the near one
    let sphere = fixtures::icosphere(50.0, 4);
    let cam = top_camera(Vec3::Y);
    let near = project_dedup(sphere.vertices(), &cam).unwrap();
    assert!(near.iter().all(|p| p.z > -1e-9 || p.x.hypot(p.y) > 49.0));
}
