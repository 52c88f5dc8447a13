//! Pinhole and orthographic cameras with pixel-center primary rays.

use crate::error::{Error, Result};
use crate::math::Vec3;

#[derive(Debug, Clone, Copy)]
pub enum Projection {
    /// Vertical field of view in radians.
    Perspective { fov_y: f32 },
    /// World-space height of the view volume.
    Orthographic { height: f32 },
}

#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

#[derive(Debug, Clone, Copy)]
pub struct Camera {
    pub position: Vec3,
    forward: Vec3,
    right: Vec3,
    up: Vec3,
    proj: Projection,
}

impl Camera {
    pub fn look_at(position: Vec3, target: Vec3, up_hint: Vec3, proj: Projection) -> Result<Camera> {
        let forward = (target - position).normalized();
        if forward == Vec3::ZERO {
            return Err(Error::invalid("camera position coincides with its target"));
        }
        let right = forward.cross(up_hint).normalized();
        if right == Vec3::ZERO {
            return Err(Error::invalid("camera up direction is parallel to the view direction"));
        }
        let up = right.cross(forward);
        match proj {
            Projection::Perspective { fov_y } => {
                if !(fov_y > 0.0 && fov_y < std::f32::consts::PI) {
                    return Err(Error::invalid(format!("field of view {fov_y} out of (0, pi)")));
                }
            }
            Projection::Orthographic { height } => {
                if !(height > 0.0 && height.is_finite()) {
                    return Err(Error::invalid(format!("orthographic height {height} must be positive")));
                }
            }
        }
        Ok(Camera { position, forward, right, up, proj })
    }

    pub fn forward(&self) -> Vec3 {
        self.forward
    }

    /// Primary ray through the center of pixel `(px, py)` on a `w x h` grid.
    pub fn primary_ray(&self, px: usize, py: usize, w: usize, h: usize) -> Ray {
        // NDC in [-1, 1], y up, evaluated at the pixel center.
        let sx = 2.0 * (px as f32 + 0.5) / w as f32 - 1.0;
        let sy = 1.0 - 2.0 * (py as f32 + 0.5) / h as f32;
        let aspect = w as f32 / h as f32;
        match self.proj {
            Projection::Perspective { fov_y } => {
                let half = (fov_y / 2.0).tan();
                let dir = self.forward + self.right * (sx * half * aspect) + self.up * (sy * half);
                Ray { origin: self.position, dir: dir.normalized() }
            }
            Projection::Orthographic { height } => {
                let half_h = height / 2.0;
                let origin = self.position
                    + self.right * (sx * half_h * aspect)
                    + self.up * (sy * half_h);
                Ray { origin, dir: self.forward }
            }
        }
    }

    /// Perspective camera on the +z side of a bounding box, looking along -z
    /// at its center and framing the whole box with a small margin.
    pub fn framing(lo: Vec3, hi: Vec3, fov_y: f32) -> Result<Camera> {
        let center = (lo + hi) * 0.5;
        let half_extent = (hi - lo) * 0.5;
        let radius = half_extent.length().max(1e-4);
        let dist = radius / (fov_y / 2.0).tan() * 1.12 + half_extent.z;
        Camera::look_at(
            center + Vec3::new(0.0, 0.0, dist),
            center,
            Vec3::new(0.0, 1.0, 0.0),
            Projection::Perspective { fov_y },
        )
    }
}

/// Watertight-enough Möller–Trumbore ray/triangle intersection.
/// Returns `(t, b1, b2)`: the ray parameter and barycentrics of vertices 1
/// and 2 (vertex 0 carries `1 - b1 - b2`).
pub fn intersect_triangle(ray: &Ray, p0: Vec3, p1: Vec3, p2: Vec3) -> Option<(f32, f32, f32)> {
    let e1 = p1 - p0;
    let e2 = p2 - p0;
    let pvec = ray.dir.cross(e2);
    let det = e1.dot(pvec);
    if det.abs() < 1e-12 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = ray.origin - p0;
    let b1 = tvec.dot(pvec) * inv_det;
    if !(-1e-6..=1.0 + 1e-6).contains(&b1) {
        return None;
    }
    let qvec = tvec.cross(e1);
    let b2 = ray.dir.dot(qvec) * inv_det;
    if b2 < -1e-6 || b1 + b2 > 1.0 + 1e-6 {
        return None;
    }
    let t = e2.dot(qvec) * inv_det;
    if t <= 1e-5 {
        return None;
    }
    Some((t, b1.max(0.0), b2.max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perspective_center_ray_points_forward() {
        let cam = Camera::look_at(
            Vec3::new(0.0, 0.0, 5.0),
            Vec3::ZERO,
            Vec3::new(0.0, 1.0, 0.0),
            Projection::Perspective { fov_y: 0.8 },
        )
        .unwrap();
        // Odd-sized grid: the middle pixel center coincides with the axis.
        let ray = cam.primary_ray(1, 1, 3, 3);
        assert_abs_diff_eq!((ray.dir - Vec3::new(0.0, 0.0, -1.0)).length(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn orthographic_rays_are_parallel() {
        let cam = Camera::look_at(
            Vec3::new(0.0, 0.0, 2.0),
            Vec3::ZERO,
            Vec3::new(0.0, 1.0, 0.0),
            Projection::Orthographic { height: 1.0 },
        )
        .unwrap();
        let a = cam.primary_ray(0, 0, 4, 4);
        let b = cam.primary_ray(3, 2, 4, 4);
        assert_eq!(a.dir, b.dir);
        assert!(a.origin != b.origin);
    }

    #[test]
    fn degenerate_cameras_are_rejected() {
        let p = Vec3::new(0.0, 0.0, 1.0);
        assert!(Camera::look_at(p, p, Vec3::new(0.0, 1.0, 0.0), Projection::Perspective { fov_y: 0.8 }).is_err());
        assert!(Camera::look_at(
            p,
            Vec3::ZERO,
            Vec3::new(0.0, 0.0, 1.0),
            Projection::Perspective { fov_y: 0.8 }
        )
        .is_err());
        assert!(Camera::look_at(
            p,
            Vec3::ZERO,
            Vec3::new(0.0, 1.0, 0.0),
            Projection::Perspective { fov_y: 4.0 }
        )
        .is_err());
    }

    #[test]
    fn triangle_hit_and_miss() {
        let ray = Ray { origin: Vec3::new(0.25, 0.25, 1.0), dir: Vec3::new(0.0, 0.0, -1.0) };
        let hit = intersect_triangle(
            &ray,
            Vec3::ZERO,
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        );
        let (t, b1, b2) = hit.unwrap();
        assert_abs_diff_eq!(t, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(b1, 0.25, epsilon = 1e-6);
        assert_abs_diff_eq!(b2, 0.25, epsilon = 1e-6);

        let miss = Ray { origin: Vec3::new(0.9, 0.9, 1.0), dir: Vec3::new(0.0, 0.0, -1.0) };
        assert!(intersect_triangle(
            &miss,
            Vec3::ZERO,
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        )
        .is_none());
    }

    #[test]
    fn framing_camera_sees_the_box_center() {
        let cam = Camera::framing(Vec3::new(-1.0, -2.0, 0.0), Vec3::new(3.0, 2.0, 0.5), 0.7).unwrap();
        let center = Vec3::new(1.0, 0.0, 0.25);
        assert!(cam.forward().dot(center - cam.position) > 0.0);
    }
}
