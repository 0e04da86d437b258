//! The synthetic shell-with-hole project used by the acceptance suite and demos.

use cranial_core::contour::SurfaceContour;
use cranial_core::fixtures::ShellDefect;
use cranial_core::geom::Vec3;
use cranial_core::mirror::LandmarkPair;

use crate::project::{Inputs, Project, SyntheticShell};

pub const CONTOUR_POINTS: usize = 64;

pub fn default_shell() -> SyntheticShell {
    let d = ShellDefect::default();
    SyntheticShell { outer_radius: d.outer_radius, thickness: d.thickness, semi_y: d.semi_y, semi_z: d.semi_z, spacing: 1.0 }
}

fn radial_contour(points: Vec<Vec3>, outward: bool, host: &str) -> SurfaceContour {
    let normals = points.iter().map(|p| if outward { p.normalize() } else { -p.normalize() }).collect();
    SurfaceContour::new(points, normals, host).expect("hole edge loop is a simple closed curve")
}

/// Landmark pairs symmetric about x = 0, on the outer sphere well clear of the hole.
fn shell_landmarks(r: f64) -> Vec<LandmarkPair> {
    let on_sphere = |y: f64, z: f64| {
        let x = (r * r - y * y - z * z).sqrt();
        (Vec3::new(x, y, z), Vec3::new(-x, y, z))
    };
    [("upper", 10.0, 60.0), ("front", 45.0, 20.0), ("back", -45.0, -10.0), ("lower", 5.0, -60.0)]
        .into_iter()
        .map(|(label, y, z)| {
            let (left, right) = on_sphere(y, z);
            LandmarkPair::new(label, left, right)
        })
        .collect()
}

pub fn synthetic_shell_project(id: &str, shell: SyntheticShell) -> Project {
    let defect = ShellDefect { outer_radius: shell.outer_radius, thickness: shell.thickness, semi_y: shell.semi_y, semi_z: shell.semi_z };
    let mut p = Project::new(id);
    p.inputs = Some(Inputs::SyntheticShell(shell));
    p.landmarks = shell_landmarks(shell.outer_radius);
    p.contour_defect = Some(radial_contour(defect.edge_loop(defect.outer_radius, CONTOUR_POINTS), true, "mirrored"));
    p.contour_inner_edge = Some(radial_contour(defect.edge_loop(defect.inner_radius(), CONTOUR_POINTS), false, "crania"));
    p.params.thickness = shell.thickness;
    p
}
