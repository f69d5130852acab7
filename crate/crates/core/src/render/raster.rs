use super::camera::Camera;
use super::geom::Vec3;
use super::mesh::TriMesh;
use crate::error::{Error, Result};
use crate::image::{DepthMap, RgbImage};

/// Directional light; `direction` points from the scene toward the light.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Light {
    pub direction: Vec3,
    pub intensity: f64,
}

/// Flat background of rendered views; 127 maps to ≈0 in network units.
pub const TARGET_BACKGROUND: [u8; 3] = [127, 127, 127];

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub rgb: RgbImage,
    pub depth: DepthMap,
    pub mask: Vec<bool>,
}

#[derive(Clone, Copy)]
struct ClipVert {
    pos: Vec3,
    color: [f64; 3],
}

fn lerp_vert(a: &ClipVert, b: &ClipVert, t: f64) -> ClipVert {
    let mut color = [0.0; 3];
    for c in 0..3 {
        color[c] = a.color[c] + (b.color[c] - a.color[c]) * t;
    }
    ClipVert {
        pos: a.pos + (b.pos - a.pos) * t,
        color,
    }
}

/// Sutherland-Hodgman against the plane `z = near` (camera space).
fn clip_near(poly: &[ClipVert], near: f64) -> Vec<ClipVert> {
    let mut out = Vec::with_capacity(4);
    for i in 0..poly.len() {
        let a = &poly[i];
        let b = &poly[(i + 1) % poly.len()];
        let (ina, inb) = (a.pos.z >= near, b.pos.z >= near);
        if ina {
            out.push(*a);
        }
        if ina != inb {
            let t = (near - a.pos.z) / (b.pos.z - a.pos.z);
            out.push(lerp_vert(a, b, t));
        }
    }
    out
}

#[inline]
fn edge(ax: f64, ay: f64, bx: f64, by: f64, px: f64, py: f64) -> f64 {
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}

struct Target<'a> {
    cam: &'a Camera,
    zbuf: Vec<f64>,
    color: Vec<[f64; 3]>,
}

impl Target<'_> {
    fn fill(&mut self, tri: [&ClipVert; 3], shade: f64) {
        let cam = self.cam;
        let s: Vec<(f64, f64, f64)> = tri
            .iter()
            .map(|v| (cam.fx * v.pos.x / v.pos.z + cam.cx, cam.fy * v.pos.y / v.pos.z + cam.cy, 1.0 / v.pos.z))
            .collect();
        let area = edge(s[0].0, s[0].1, s[1].0, s[1].1, s[2].0, s[2].1);
        if area.abs() < 1e-12 {
            return;
        }
        let umin = s.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let umax = s.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let vmin = s.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let vmax = s.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let x0 = umin.ceil().max(0.0) as i64;
        let x1 = umax.floor().min(cam.width as f64 - 1.0) as i64;
        let y0 = vmin.ceil().max(0.0) as i64;
        let y1 = vmax.floor().min(cam.height as f64 - 1.0) as i64;
        for y in y0..=y1 {
            let py = y as f64;
            for x in x0..=x1 {
                let px = x as f64;
                let w0 = edge(s[1].0, s[1].1, s[2].0, s[2].1, px, py) / area;
                let w1 = edge(s[2].0, s[2].1, s[0].0, s[0].1, px, py) / area;
                let w2 = edge(s[0].0, s[0].1, s[1].0, s[1].1, px, py) / area;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let inv_z = w0 * s[0].2 + w1 * s[1].2 + w2 * s[2].2;
                let z = 1.0 / inv_z;
                let idx = y as usize * cam.width + x as usize;
                if z >= self.zbuf[idx] {
                    continue;
                }
                self.zbuf[idx] = z;
                let mut c = [0.0; 3];
                for (k, ck) in c.iter_mut().enumerate() {
                    let num = w0 * tri[0].color[k] * s[0].2 + w1 * tri[1].color[k] * s[1].2 + w2 * tri[2].color[k] * s[2].2;
                    *ck = (num / inv_z * shade).clamp(0.0, 1.0);
                }
                self.color[idx] = c;
            }
        }
    }
}

/// Z-buffered perspective rasterization with Lambertian flat shading.
///
/// Depth is the camera-space z of the nearest surface, quantized by
/// [`Camera::quantize_depth`]; uncovered pixels hold the background sentinel
/// and [`TARGET_BACKGROUND`].
pub fn rasterize(mesh: &TriMesh, cam: &Camera, lights: &[Light]) -> Result<Raster> {
    mesh.validate()?;
    if lights.is_empty() {
        return Err(Error::Invalid("rasterize needs at least one light".into()));
    }
    let n = cam.width * cam.height;
    let mut target = Target {
        cam,
        zbuf: vec![f64::INFINITY; n],
        color: vec![[0.0; 3]; n],
    };
    for t in &mesh.triangles {
        let [a, b, c] = t.map(|i| i as usize);
        let (pa, pb, pc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
        let mut normal = (pb - pa).cross(pc - pa);
        let len = normal.norm();
        if len < 1e-15 {
            continue;
        }
        normal = normal * (1.0 / len);
        if normal.dot(cam.position - pa) < 0.0 {
            normal = -normal;
        }
        let shade: f64 = lights
            .iter()
            .map(|l| l.intensity * normal.dot(l.direction).max(0.0))
            .sum();
        let poly = [a, b, c].map(|i| ClipVert {
            pos: cam.world_to_camera(mesh.vertices[i]),
            color: mesh.colors[i],
        });
        let clipped = clip_near(&poly, cam.near);
        for k in 1..clipped.len().saturating_sub(1) {
            target.fill([&clipped[0], &clipped[k], &clipped[k + 1]], shade);
        }
    }

    let mut rgb = RgbImage::filled(cam.width, cam.height, TARGET_BACKGROUND);
    let mut depth = DepthMap::empty(cam.width, cam.height);
    let mut mask = vec![false; n];
    for i in 0..n {
        if target.zbuf[i].is_finite() {
            mask[i] = true;
            depth.data[i] = cam.quantize_depth(target.zbuf[i]);
            let c = target.color[i];
            rgb.data[i * 3..i * 3 + 3].copy_from_slice(&c.map(|v| (v * 255.0).round() as u8));
        }
    }
    Ok(Raster { rgb, depth, mask })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::DEPTH_BACKGROUND;
    use crate::render::{camera_from_viewpoint, RenderConfig, Viewpoint};

    fn head_light(cam: &Camera) -> Vec<Light> {
        vec![Light {
            direction: cam.position.normalized(),
            intensity: 1.0,
        }]
    }

    #[test]
    fn facing_square_has_constant_depth() {
        let cfg = RenderConfig::default();
        let cam = camera_from_viewpoint(&Viewpoint::new(0.0, 0.0, 2.0), &cfg, 32, 32).unwrap();
        // Square in the plane x = 0.3, i.e. optical-axis distance 1.7.
        let m = TriMesh::cuboid(Vec3::new(0.3, -0.2, -0.2), Vec3::new(0.3, 0.2, 0.2), [1.0, 1.0, 1.0]);
        let r = rasterize(&m, &cam, &head_light(&cam)).unwrap();
        let expect = ((1.7 - cfg.near) / (cfg.far - cfg.near) * 65534.0).round() as u16;
        let covered: Vec<u16> = r.depth.data.iter().copied().filter(|&d| d != DEPTH_BACKGROUND).collect();
        assert!(covered.len() > 50);
        assert!(covered.iter().all(|&d| d == expect));
        // Head-on white face under a unit head light is full white.
        let center = r.rgb.pixel(16, 16);
        assert_eq!(center, [255, 255, 255]);
    }

    #[test]
    fn sphere_closest_point() {
        let cfg = RenderConfig::default();
        // Odd size puts a pixel center on the optical axis.
        let cam = camera_from_viewpoint(&Viewpoint::new(0.0, 0.0, 2.0), &cfg, 65, 65).unwrap();
        let m = TriMesh::uv_sphere(0.5, 64, 128, [0.8; 3]);
        let r = rasterize(&m, &cam, &head_light(&cam)).unwrap();
        let min = *r.depth.data.iter().min().unwrap();
        let z = cam.dequantize_depth(min);
        assert!((z - 1.5).abs() <= 2.0 * cam.depth_step(), "closest depth {z}");
    }

    #[test]
    fn empty_mesh() {
        let cam = camera_from_viewpoint(&Viewpoint::new(10.0, 5.0, 2.0), &RenderConfig::default(), 16, 16).unwrap();
        let r = rasterize(&TriMesh::default(), &cam, &head_light(&cam)).unwrap();
        assert!(r.mask.iter().all(|&m| !m));
        assert!(r.depth.data.iter().all(|&d| d == DEPTH_BACKGROUND));
    }

    #[test]
    fn triangle_crossing_near_plane_is_clipped() {
        let cfg = RenderConfig::default();
        let cam = camera_from_viewpoint(&Viewpoint::new(0.0, 0.0, 2.0), &cfg, 32, 32).unwrap();
        // Extends from behind the camera to in front of it.
        let m = TriMesh {
            vertices: vec![Vec3::new(3.0, -0.2, -0.3), Vec3::new(3.0, 0.2, -0.3), Vec3::new(0.0, 0.0, -0.3)],
            triangles: vec![[0, 1, 2]],
            colors: vec![[1.0; 3]; 3],
        };
        let r = rasterize(&m, &cam, &head_light(&cam)).unwrap();
        for (i, &d) in r.depth.data.iter().enumerate() {
            if r.mask[i] {
                assert!(cam.dequantize_depth(d) >= cfg.near - 1e-9);
            }
        }
        assert!(r.mask.iter().any(|&m| m));
    }

    #[test]
    fn no_lights_rejected() {
        let cam = camera_from_viewpoint(&Viewpoint::new(0.0, 0.0, 2.0), &RenderConfig::default(), 8, 8).unwrap();
        assert!(rasterize(&TriMesh::default(), &cam, &[]).is_err());
    }
}
