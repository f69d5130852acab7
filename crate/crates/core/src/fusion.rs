//! Depth maps to colored world-space point clouds, multi-view fusion and
//! ASCII PLY.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{DepthMap, RgbImage, DEPTH_BACKGROUND};
use crate::render::{Camera, Vec3, Viewpoint};
use crate::tensor::Tensor;

/// Default voxel size for thinning fused clouds, in world units.
pub const DEFAULT_VOXEL: f64 = 0.01;

/// Predicted depth at or above this normalized value is treated as background.
pub const PREDICTED_BACKGROUND: f32 = 0.8;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f32; 3]>,
    pub colors: Vec<[u8; 3]>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, p: [f32; 3], c: [u8; 3]) {
        self.points.push(p);
        self.colors.push(c);
    }

    pub fn extend(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
        self.colors.extend_from_slice(&other.colors);
    }

    /// Axis-aligned bounds, or `None` when empty.
    pub fn bounds(&self) -> Option<([f32; 3], [f32; 3])> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(mut lo, mut hi), p| {
            for i in 0..3 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
            (lo, hi)
        }))
    }
}

/// One depth map with its colors and camera.
#[derive(Debug, Clone)]
pub struct View {
    pub depth: DepthMap,
    pub rgb: RgbImage,
    pub camera: Camera,
}

/// Six views at elevation 20° spaced 60° in azimuth.
pub fn canonical_views(distance: f64) -> Vec<Viewpoint> {
    (0..6).map(|i| Viewpoint::new(60.0 * i as f64, 20.0, distance)).collect()
}

/// Back-project every non-background pixel into world space.
pub fn depth_to_points(depth: &DepthMap, rgb: &RgbImage, cam: &Camera) -> Result<PointCloud> {
    if depth.width != cam.width || depth.height != cam.height || rgb.width != cam.width || rgb.height != cam.height {
        return Err(Error::shape(
            "depth_to_points",
            format!(
                "depth {}x{}, rgb {}x{}, camera {}x{}",
                depth.width, depth.height, rgb.width, rgb.height, cam.width, cam.height
            ),
        ));
    }
    let mut pc = PointCloud::default();
    for v in 0..depth.height {
        for u in 0..depth.width {
            let q = depth.get(u, v);
            if q == DEPTH_BACKGROUND {
                continue;
            }
            let p = cam.unproject(u as f64, v as f64, cam.dequantize_depth(q));
            pc.push([p.x as f32, p.y as f32, p.z as f32], rgb.pixel(u, v));
        }
    }
    Ok(pc)
}

/// Quantized depth map from a network depth output, mapping values at or
/// above `background` to the sentinel.
pub fn depth_from_prediction(t: &Tensor<f32>, background: f32) -> Result<DepthMap> {
    let s = t.shape();
    if s.len() != 3 || s[0] != 1 {
        return Err(Error::shape("depth_from_prediction", format!("expected [1,H,W], got {s:?}")));
    }
    let data = t
        .data()
        .iter()
        .map(|&v| {
            if v >= background || v.is_nan() {
                DEPTH_BACKGROUND
            } else {
                (((v as f64 + 1.0) * 0.5 * 65535.0).round().clamp(0.0, 65534.0)) as u16
            }
        })
        .collect();
    DepthMap::new(s[2], s[1], data)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FuseOptions {
    /// Keep only the first point in each cube of this side.
    pub voxel: Option<f64>,
    /// Drop points whose nearest neighbour is farther than this.
    pub outlier_distance: Option<f64>,
}

fn cell(p: &[f32; 3], size: f64) -> (i64, i64, i64) {
    let f = |x: f32| (x as f64 / size).floor() as i64;
    (f(p[0]), f(p[1]), f(p[2]))
}

/// Concatenate per-view clouds in view order, then optionally thin and
/// remove isolated points.
pub fn fuse(views: &[View], opts: FuseOptions) -> Result<PointCloud> {
    if views.is_empty() {
        return Err(Error::Invalid("fuse needs at least one view".into()));
    }
    let mut all = PointCloud::default();
    for v in views {
        all.extend(&depth_to_points(&v.depth, &v.rgb, &v.camera)?);
    }
    if let Some(size) = opts.voxel {
        all = voxel_thin(&all, size)?;
    }
    if let Some(d) = opts.outlier_distance {
        all = remove_outliers(&all, d)?;
    }
    Ok(all)
}

pub fn voxel_thin(pc: &PointCloud, size: f64) -> Result<PointCloud> {
    if !(size > 0.0 && size.is_finite()) {
        return Err(Error::Invalid(format!("voxel size {size} must be positive")));
    }
    let mut seen = HashSet::new();
    let mut out = PointCloud::default();
    for (p, c) in pc.points.iter().zip(&pc.colors) {
        if seen.insert(cell(p, size)) {
            out.push(*p, *c);
        }
    }
    Ok(out)
}

/// Keep points having another point within `dist`.
pub fn remove_outliers(pc: &PointCloud, dist: f64) -> Result<PointCloud> {
    if !(dist > 0.0 && dist.is_finite()) {
        return Err(Error::Invalid(format!("outlier distance {dist} must be positive")));
    }
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in pc.points.iter().enumerate() {
        grid.entry(cell(p, dist)).or_default().push(i);
    }
    let d2 = dist * dist;
    let mut out = PointCloud::default();
    for (i, p) in pc.points.iter().enumerate() {
        let (cx, cy, cz) = cell(p, dist);
        let mut found = false;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    for &j in grid.get(&(cx + dx, cy + dy, cz + dz)).map(Vec::as_slice).unwrap_or(&[]) {
                        if j == i {
                            continue;
                        }
                        let q = &pc.points[j];
                        let e: f64 = (0..3).map(|k| (p[k] as f64 - q[k] as f64).powi(2)).sum();
                        if e <= d2 {
                            found = true;
                            break 'search;
                        }
                    }
                }
            }
        }
        if found {
            out.push(*p, pc.colors[i]);
        }
    }
    Ok(out)
}

pub fn encode_ply(pc: &PointCloud) -> String {
    let mut s = String::with_capacity(200 + pc.len() * 32);
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", pc.len());
    s.push_str("property float x\nproperty float y\nproperty float z\n");
    s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n");
    for (p, c) in pc.points.iter().zip(&pc.colors) {
        let _ = writeln!(s, "{} {} {} {} {} {}", p[0], p[1], p[2], c[0], c[1], c[2]);
    }
    s
}

const PLY_PROPERTIES: [(&str, &str); 6] = [
    ("float", "x"),
    ("float", "y"),
    ("float", "z"),
    ("uchar", "red"),
    ("uchar", "green"),
    ("uchar", "blue"),
];

/// Parse the ASCII layout produced by [`encode_ply`]; comments are allowed.
pub fn parse_ply(text: &str) -> Result<PointCloud> {
    let bad = |d: String| Error::format("PLY", d);
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim_start().starts_with("comment"));
    fn expect<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, want: &str) -> Result<()> {
        match lines.next() {
            Some((_, l)) if l.trim() == want => Ok(()),
            Some((n, l)) => Err(Error::format("PLY", format!("line {}: expected {want:?}, found {l:?}", n + 1))),
            None => Err(Error::format("PLY", format!("missing {want:?}"))),
        }
    }
    expect(&mut lines, "ply")?;
    expect(&mut lines, "format ascii 1.0")?;
    let (n, l) = lines.next().ok_or_else(|| bad("missing element line".into()))?;
    let count: usize = match l.split_whitespace().collect::<Vec<_>>()[..] {
        ["element", "vertex", c] => c.parse().map_err(|_| bad(format!("line {}: bad vertex count", n + 1)))?,
        _ => return Err(bad(format!("line {}: expected vertex element", n + 1))),
    };
    for (ty, name) in PLY_PROPERTIES {
        expect(&mut lines, &format!("property {ty} {name}"))?;
    }
    expect(&mut lines, "end_header")?;
    let mut pc = PointCloud::default();
    for (n, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        if pc.len() == count {
            return Err(bad(format!("line {}: more vertices than declared", n + 1)));
        }
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 6 {
            return Err(bad(format!("line {}: expected 6 fields, found {}", n + 1, f.len())));
        }
        let mut p = [0f32; 3];
        for k in 0..3 {
            p[k] = f[k].parse().map_err(|_| bad(format!("line {}: bad coordinate {:?}", n + 1, f[k])))?;
            if !p[k].is_finite() {
                return Err(bad(format!("line {}: non-finite coordinate", n + 1)));
            }
        }
        let mut c = [0u8; 3];
        for k in 0..3 {
            c[k] = f[3 + k].parse().map_err(|_| bad(format!("line {}: bad color {:?}", n + 1, f[3 + k])))?;
        }
        pc.push(p, c);
    }
    if pc.len() != count {
        return Err(bad(format!("header declares {count} vertices, body has {}", pc.len())));
    }
    Ok(pc)
}

pub fn write_ply(path: &Path, pc: &PointCloud) -> Result<()> {
    std::fs::write(path, encode_ply(pc)).map_err(|e| Error::io(path, e))
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| Error::format("PLY", "not UTF-8 text"))?;
    parse_ply(text)
}

/// Euclidean distance of a world point from the origin.
pub fn radius(p: &[f32; 3]) -> f64 {
    Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64).norm()
}
