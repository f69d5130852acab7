//! Deterministic software renderer and procedural scene sampling.
//!
//! Training pairs are produced on the fly: an object is rendered from a
//! random viewpoint under random lights, composited over a background with a
//! softened mask, and paired with a clean render of another viewpoint.

mod blur;
mod camera;
mod geom;
mod mesh;
mod objects;
mod raster;

use std::path::Path;

pub use blur::{blur_plane, gaussian_blur, gaussian_kernel};
pub use camera::{camera_from_viewpoint, spherical_position, Camera, WORLD_UP};
pub use geom::{Mat3, Vec3};
pub use mesh::TriMesh;
pub use objects::{build_mesh, gen_object, sample_params, ChairParams, Family, ObjectParams, VehicleParams, OBJECT_RADIUS};
pub use raster::{rasterize, Light, Raster, TARGET_BACKGROUND};

use crate::error::{Error, Result};
use crate::image::{DepthMap, GrayImage, RgbImage};
use crate::rng::SplitMix64;

pub const AZIMUTH_RANGE: (f64, f64) = (0.0, 360.0);
pub const ELEVATION_RANGE: (f64, f64) = (-10.0, 40.0);
pub const DISTANCE_RANGE: (f64, f64) = (1.7, 2.3);

/// Camera placement in degrees and world units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewpoint {
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
}

impl Viewpoint {
    pub const fn new(azimuth: f64, elevation: f64, distance: f64) -> Self {
        Viewpoint {
            azimuth,
            elevation,
            distance,
        }
    }

    /// Uniform over the sampling ranges.
    pub fn sample(rng: &mut SplitMix64) -> Self {
        Viewpoint {
            azimuth: rng.uniform(AZIMUTH_RANGE.0, AZIMUTH_RANGE.1),
            elevation: rng.uniform(ELEVATION_RANGE.0, ELEVATION_RANGE.1),
            distance: rng.uniform(DISTANCE_RANGE.0, DISTANCE_RANGE.1),
        }
    }

    /// Angle in degrees between the two viewing directions.
    pub fn angle_to(&self, other: &Viewpoint) -> f64 {
        let a = spherical_position(&Viewpoint { distance: 1.0, ..*self });
        let b = spherical_position(&Viewpoint { distance: 1.0, ..*other });
        a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    /// Random lights, soft alpha compositing and image blur.
    Realistic,
    /// Two fixed unit lights, hard mask, no blur.
    Basic,
}

impl RenderMode {
    pub fn name(self) -> &'static str {
        match self {
            RenderMode::Realistic => "realistic",
            RenderMode::Basic => "basic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "realistic" => Some(RenderMode::Realistic),
            "basic" => Some(RenderMode::Basic),
            _ => None,
        }
    }
}

/// Where input-view backgrounds come from.
#[derive(Debug, Clone, PartialEq)]
pub enum BackgroundSource {
    Flat([u8; 3]),
    /// Built-in smooth colored noise.
    Procedural,
    /// Images already cropped and resized to the render size.
    Pool(Vec<RgbImage>),
}

impl BackgroundSource {
    /// Load every `.ppm` file of a directory (sorted by name), center-cropped
    /// and resized to `size`.
    pub fn load_dir(dir: &Path, size: usize) -> Result<Self> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("ppm")))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(Error::Invalid(format!("no .ppm backgrounds in {}", dir.display())));
        }
        let pool = paths
            .iter()
            .map(|p| crate::pnm::read_ppm(p).map(|img| img.center_square_resized(size)))
            .collect::<Result<Vec<_>>>()?;
        Ok(BackgroundSource::Pool(pool))
    }

    pub fn draw(&self, rng: &mut SplitMix64, width: usize, height: usize) -> RgbImage {
        match self {
            BackgroundSource::Flat(c) => RgbImage::filled(width, height, *c),
            BackgroundSource::Pool(pool) => {
                let img = &pool[rng.index(pool.len())];
                if img.width == width && img.height == height {
                    img.clone()
                } else {
                    img.center_square_resized(width.max(height))
                }
            }
            BackgroundSource::Procedural => procedural_background(rng, width, height),
        }
    }
}

/// Bilinearly interpolated random color lattice plus fine grain.
fn procedural_background(rng: &mut SplitMix64, width: usize, height: usize) -> RgbImage {
    let cells = 2 + rng.index(4);
    let lattice: Vec<[f64; 3]> = (0..(cells + 1) * (cells + 1))
        .map(|_| [rng.uniform(0.0, 255.0), rng.uniform(0.0, 255.0), rng.uniform(0.0, 255.0)])
        .collect();
    let grain = rng.uniform(0.0, 30.0);
    let mut img = RgbImage::filled(width, height, [0, 0, 0]);
    for y in 0..height {
        for x in 0..width {
            let fx = x as f64 / width.max(2) as f64 * cells as f64;
            let fy = y as f64 / height.max(2) as f64 * cells as f64;
            let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
            let (tx, ty) = (fx - ix as f64, fy - iy as f64);
            let at = |i: usize, j: usize| lattice[j * (cells + 1) + i];
            let mut px = [0u8; 3];
            for c in 0..3 {
                let top = at(ix, iy)[c] * (1.0 - tx) + at(ix + 1, iy)[c] * tx;
                let bot = at(ix, iy + 1)[c] * (1.0 - tx) + at(ix + 1, iy + 1)[c] * tx;
                let v = top * (1.0 - ty) + bot * ty + grain * (rng.next_f64() - 0.5);
                px[c] = v.round().clamp(0.0, 255.0) as u8;
            }
            img.set_pixel(x, y, px);
        }
    }
    img
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub mode: RenderMode,
    pub light_count: (u64, u64),
    pub light_intensity: (f64, f64),
    pub mask_sigma: (f64, f64),
    pub image_sigma: (f64, f64),
    pub fov_y_deg: f64,
    pub near: f64,
    pub far: f64,
    pub background: BackgroundSource,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            mode: RenderMode::Realistic,
            light_count: (2, 4),
            light_intensity: (0.4, 1.0),
            mask_sigma: (1.0, 1.3),
            image_sigma: (0.2, 0.6),
            fov_y_deg: 35.0,
            near: 0.5,
            far: 3.5,
            background: BackgroundSource::Procedural,
        }
    }
}

impl RenderConfig {
    pub fn basic() -> Self {
        RenderConfig {
            mode: RenderMode::Basic,
            ..RenderConfig::default()
        }
    }
}

/// The two fixed unit-intensity lights of basic mode.
pub fn basic_lights() -> Vec<Light> {
    vec![
        Light {
            direction: Vec3::new(0.5, 0.4, 0.75).normalized(),
            intensity: 1.0,
        },
        Light {
            direction: Vec3::new(-0.6, -0.3, 0.5).normalized(),
            intensity: 1.0,
        },
    ]
}

/// Random viewpoint and lighting for one scene.
pub fn sample_scene(rng: &mut SplitMix64, cfg: &RenderConfig) -> (Viewpoint, Vec<Light>) {
    let vp = Viewpoint::sample(rng);
    let lights = match cfg.mode {
        RenderMode::Basic => basic_lights(),
        RenderMode::Realistic => {
            let n = rng.range_inclusive(cfg.light_count.0, cfg.light_count.1);
            (0..n)
                .map(|_| {
                    // Uniform on the upper unit hemisphere: z ~ U[0,1].
                    let z = rng.next_f64();
                    let phi = rng.uniform(0.0, 2.0 * std::f64::consts::PI);
                    let s = (1.0 - z * z).sqrt();
                    Light {
                        direction: Vec3::new(s * phi.cos(), s * phi.sin(), z),
                        intensity: rng.uniform(cfg.light_intensity.0, cfg.light_intensity.1),
                    }
                })
                .collect()
        }
    };
    (vp, lights)
}

/// One rendered view.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedSample {
    pub rgb: RgbImage,
    pub depth: DepthMap,
    pub mask: Vec<bool>,
    pub camera: Camera,
    pub viewpoint: Viewpoint,
}

impl RenderedSample {
    pub fn mask_image(&self) -> GrayImage {
        GrayImage {
            width: self.rgb.width,
            height: self.rgb.height,
            data: self.mask.iter().map(|&m| if m { 255 } else { 0 }).collect(),
        }
    }
}

pub fn render_view(mesh: &TriMesh, vp: Viewpoint, lights: &[Light], cfg: &RenderConfig, size: usize) -> Result<RenderedSample> {
    let camera = camera_from_viewpoint(&vp, cfg, size, size)?;
    let Raster { rgb, depth, mask } = rasterize(mesh, &camera, lights)?;
    Ok(RenderedSample {
        rgb,
        depth,
        mask,
        camera,
        viewpoint: vp,
    })
}

/// Blend a render over a background with explicit smoothing parameters.
///
/// `mask_sigma` softens the mask into alpha; `image_sigma` blurs the
/// foreground. `None` disables either step.
pub fn composite_with(
    foreground: &RgbImage,
    mask: &[bool],
    background: &RgbImage,
    mask_sigma: Option<f64>,
    image_sigma: Option<f64>,
) -> Result<RgbImage> {
    let (w, h) = (foreground.width, foreground.height);
    if background.width != w || background.height != h || mask.len() != w * h {
        return Err(Error::shape(
            "composite",
            format!(
                "foreground {}x{}, mask {} pixels, background {}x{}",
                w,
                h,
                mask.len(),
                background.width,
                background.height
            ),
        ));
    }
    let hard: Vec<f64> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    let alpha = match mask_sigma {
        Some(s) => blur_plane(&hard, w, h, s),
        None => hard,
    };
    let fg_planes = blur::planes(foreground);
    let fg: Vec<Vec<f64>> = match image_sigma {
        Some(s) => fg_planes.iter().map(|p| blur_plane(p, w, h, s)).collect(),
        None => fg_planes.to_vec(),
    };
    let mut out = background.clone();
    for i in 0..w * h {
        let a = alpha[i];
        if a == 0.0 {
            continue;
        }
        for c in 0..3 {
            let v = a * fg[c][i] + (1.0 - a) * background.data[i * 3 + c] as f64;
            out.data[i * 3 + c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}

/// Composite according to the render mode, drawing the smoothing strengths
/// from `rng` in realistic mode.
pub fn composite(sample: &RenderedSample, background: &RgbImage, rng: &mut SplitMix64, cfg: &RenderConfig) -> Result<RgbImage> {
    match cfg.mode {
        RenderMode::Basic => composite_with(&sample.rgb, &sample.mask, background, None, None),
        RenderMode::Realistic => {
            let ms = rng.uniform(cfg.mask_sigma.0, cfg.mask_sigma.1);
            let is = rng.uniform(cfg.image_sigma.0, cfg.image_sigma.1);
            composite_with(&sample.rgb, &sample.mask, background, Some(ms), Some(is))
        }
    }
}
