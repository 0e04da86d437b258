use serde::{Deserialize, Serialize};

use super::FitError;
use crate::contour::LoopImplicitRegion;
use crate::geom::{Point3, Vec3};

pub const DEFAULT_VIEWPORT: [u32; 2] = [512, 512];
const FRAME_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Projection {
    /// `parallel_scale` is half the viewport height in millimeters.
    Parallel { parallel_scale: f64 },
    /// Vertical field of view in degrees.
    Perspective { fov_y_deg: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewCamera {
    pub eye: Point3,
    pub look_at: Point3,
    pub up: Vec3,
    pub viewport: [u32; 2],
    pub projection: Projection,
}

/// Point in display coordinates: pixels from the lower-left corner, plus
/// depth in front of the eye along the view direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplayPoint {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
}

impl DisplayPoint {
    pub fn pixel(&self) -> (i64, i64) {
        (self.x.floor() as i64, self.y.floor() as i64)
    }
}

impl ViewCamera {
    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |m: &str| Err(FitError::BadCamera(m.to_string()));
        if !(self.eye.is_finite() && self.look_at.is_finite() && self.up.is_finite()) {
            return bad("non-finite camera vector");
        }
        let view = self.look_at - self.eye;
        if view.norm() == 0.0 {
            return bad("eye coincides with look_at");
        }
        if self.up.cross(view).norm() <= 1e-9 * self.up.norm() * view.norm() {
            return bad("up is parallel to the view direction");
        }
        if self.viewport[0] == 0 || self.viewport[1] == 0 {
            return bad("viewport must be at least 1x1");
        }
        match self.projection {
            Projection::Parallel { parallel_scale } if !(parallel_scale > 0.0 && parallel_scale.is_finite()) => {
                bad("parallel_scale must be positive")
            }
            Projection::Perspective { fov_y_deg } if !(fov_y_deg > 0.0 && fov_y_deg < 180.0) => bad("fov_y_deg must be in (0, 180)"),
            _ => Ok(()),
        }
    }

    /// Unit vector from `look_at` toward the eye.
    pub fn toward_eye(&self) -> Vec3 {
        (self.eye - self.look_at).normalize()
    }

    /// Screen axes `(right, up, toward_eye)`, right-handed.
    pub fn axes(&self) -> (Vec3, Vec3, Vec3) {
        let w = self.toward_eye();
        let u = self.up.cross(w).normalize();
        (u, w.cross(u), w)
    }

    fn aspect(&self) -> f64 {
        self.viewport[0] as f64 / self.viewport[1] as f64
    }

    /// `None` for points at or behind the eye of a perspective camera.
    pub fn world_to_display(&self, p: Point3) -> Option<DisplayPoint> {
        let (u, v, w) = self.axes();
        let rel = p - self.eye;
        let depth = -rel.dot(w);
        let (cx, cy) = (rel.dot(u), rel.dot(v));
        let half_h = match self.projection {
            Projection::Parallel { parallel_scale } => parallel_scale,
            Projection::Perspective { fov_y_deg } => {
                if depth <= 0.0 {
                    return None;
                }
                depth * (fov_y_deg.to_radians() * 0.5).tan()
            }
        };
        let [wpx, hpx] = self.viewport.map(|d| d as f64);
        Some(DisplayPoint {
            x: (cx / (half_h * self.aspect()) + 1.0) * 0.5 * wpx,
            y: (cy / half_h + 1.0) * 0.5 * hpx,
            depth,
        })
    }

    /// Millimeters per pixel at the look-at distance.
    pub fn pixel_size(&self) -> f64 {
        let half_h = match self.projection {
            Projection::Parallel { parallel_scale } => parallel_scale,
            Projection::Perspective { fov_y_deg } => (self.look_at - self.eye).norm() * (fov_y_deg.to_radians() * 0.5).tan(),
        };
        2.0 * half_h / self.viewport[1] as f64
    }

    /// Parallel view straight down the region's extrusion axis, framing the
    /// contour with a 5% margin.
    pub fn framing(region: &LoopImplicitRegion, viewport: [u32; 2]) -> ViewCamera {
        let frame = region.frame();
        let pts = region.contour().points();
        let center = region.contour().bounds().center();
        let (mut half_u, mut half_v) = (0.0f64, 0.0f64);
        for &p in pts {
            let d = p - center;
            half_u = half_u.max(d.dot(frame.u).abs());
            half_v = half_v.max(d.dot(frame.v).abs());
        }
        let aspect = viewport[0] as f64 / viewport[1].max(1) as f64;
        let scale = half_v.max(half_u / aspect).max(f64::MIN_POSITIVE) * (1.0 + FRAME_MARGIN);
        let distance = 2.0 * region.loop_diagonal().max(1.0);
        ViewCamera {
            eye: center + frame.w * distance,
            look_at: center,
            up: frame.v,
            viewport,
            projection: Projection::Parallel { parallel_scale: scale },
        }
    }
}
