use super::geom::{Mat3, Vec3};
use super::{RenderConfig, Viewpoint};
use crate::error::{Error, Result};

/// Pinhole camera looking at the world origin.
///
/// Camera space is x right, y down, z forward along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    /// World to camera rotation; rows are the right, down and forward axes.
    pub rotation: Mat3,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
    pub far: f64,
}

pub const WORLD_UP: Vec3 = Vec3::new(0.0, 0.0, 1.0);

/// Spherical position: azimuth 0 lies on +X, elevation is measured from the
/// XY plane toward +Z.
pub fn spherical_position(vp: &Viewpoint) -> Vec3 {
    let (az, el) = (vp.azimuth.to_radians(), vp.elevation.to_radians());
    Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()) * vp.distance
}

pub fn camera_from_viewpoint(vp: &Viewpoint, cfg: &RenderConfig, width: usize, height: usize) -> Result<Camera> {
    if (vp.elevation.abs() - 90.0).abs() < 1e-9 || vp.elevation.abs() > 90.0 {
        return Err(Error::Invalid(format!(
            "elevation {} leaves the up vector undefined",
            vp.elevation
        )));
    }
    if vp.distance <= 0.0 || width == 0 || height == 0 {
        return Err(Error::Invalid(format!(
            "degenerate camera: distance {}, size {}x{}",
            vp.distance, width, height
        )));
    }
    let position = spherical_position(vp);
    let forward = (-position).normalized();
    let right = forward.cross(WORLD_UP).normalized();
    let down = forward.cross(right);
    let f = (height as f64 / 2.0) / (cfg.fov_y_deg.to_radians() / 2.0).tan();
    Ok(Camera {
        position,
        rotation: Mat3 {
            rows: [right, down, forward],
        },
        fx: f,
        fy: f,
        cx: (width as f64 - 1.0) / 2.0,
        cy: (height as f64 - 1.0) / 2.0,
        width,
        height,
        near: cfg.near,
        far: cfg.far,
    })
}

impl Camera {
    pub fn world_to_camera(&self, p: Vec3) -> Vec3 {
        self.rotation.mul_vec(p - self.position)
    }

    pub fn camera_to_world(&self, p: Vec3) -> Vec3 {
        self.rotation.transpose_mul_vec(p) + self.position
    }

    /// Pixel coordinates and optical-axis depth; `None` behind the camera.
    pub fn project(&self, world: Vec3) -> Option<(f64, f64, f64)> {
        let c = self.world_to_camera(world);
        (c.z > 0.0).then(|| (self.fx * c.x / c.z + self.cx, self.fy * c.y / c.z + self.cy, c.z))
    }

    /// Camera-space point at pixel `(u, v)` with optical-axis depth `z`.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Vec3 {
        let c = Vec3::new((u - self.cx) / self.fx * z, (v - self.cy) / self.fy * z, z);
        self.camera_to_world(c)
    }

    /// World units covered by one quantization step of the depth encoding.
    pub fn depth_step(&self) -> f64 {
        (self.far - self.near) / 65534.0
    }

    /// `round((z − near)/(far − near)·65534)` clamped to `[0, 65534]`.
    pub fn quantize_depth(&self, z: f64) -> u16 {
        ((z - self.near) / (self.far - self.near) * 65534.0).round().clamp(0.0, 65534.0) as u16
    }

    pub fn dequantize_depth(&self, q: u16) -> f64 {
        self.near + q as f64 / 65534.0 * (self.far - self.near)
    }
}
