//! Raster image containers and conversions to and from network tensors.

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Background sentinel of a quantized depth map.
pub const DEPTH_BACKGROUND: u16 = u16::MAX;

/// Interleaved 8-bit RGB.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// 8-bit single channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// 16-bit quantized depth; [`DEPTH_BACKGROUND`] marks empty pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u16>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::shape(
                "rgb image",
                format!("{}x{} needs {} bytes, got {}", width, height, width * height * 3, data.len()),
            ));
        }
        Ok(RgbImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        RgbImage { width, height, data }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Luma (ITU-R BT.601 weights) as floating point in `[0, 255]`.
    pub fn luma(&self) -> Vec<f64> {
        self.data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect()
    }

    /// Channel-major `[3, H, W]` tensor scaled to `[-1, 1]`.
    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        let (w, h) = (self.width, self.height);
        Tensor::from_fn([3, h, w], |i| {
            let c = i / (w * h);
            let p = i % (w * h);
            T::from_f64(self.data[p * 3 + c] as f64 / 127.5 - 1.0)
        })
    }

    /// Inverse of [`RgbImage::to_tensor`], rounding and clamping to bytes.
    pub fn from_tensor<T: Real>(t: &Tensor<T>) -> Result<Self> {
        let s = t.shape();
        if s.len() != 3 || s[0] != 3 {
            return Err(Error::shape("rgb image", format!("expected [3,H,W], got {s:?}")));
        }
        let (h, w) = (s[1], s[2]);
        let mut data = vec![0u8; w * h * 3];
        for c in 0..3 {
            for p in 0..w * h {
                data[p * 3 + c] = unit_to_byte(Real::to_f64(t.data()[c * w * h + p]));
            }
        }
        RgbImage::new(w, h, data)
    }

    /// Largest centered square, resampled to `size × size` by area averaging.
    pub fn center_square_resized(&self, size: usize) -> RgbImage {
        let side = self.width.min(self.height);
        let x0 = (self.width - side) / 2;
        let y0 = (self.height - side) / 2;
        let mut out = vec![0u8; size * size * 3];
        let scale = side as f64 / size as f64;
        for oy in 0..size {
            for ox in 0..size {
                let (fy0, fy1) = (oy as f64 * scale, (oy + 1) as f64 * scale);
                let (fx0, fx1) = (ox as f64 * scale, (ox + 1) as f64 * scale);
                let mut acc = [0.0f64; 3];
                let mut area = 0.0;
                let mut y = fy0.floor() as usize;
                while (y as f64) < fy1 && y < side {
                    let wy = (fy1.min(y as f64 + 1.0) - fy0.max(y as f64)).max(0.0);
                    let mut x = fx0.floor() as usize;
                    while (x as f64) < fx1 && x < side {
                        let wx = (fx1.min(x as f64 + 1.0) - fx0.max(x as f64)).max(0.0);
                        let p = self.pixel(x0 + x, y0 + y);
                        for c in 0..3 {
                            acc[c] += wx * wy * p[c] as f64;
                        }
                        area += wx * wy;
                        x += 1;
                    }
                    y += 1;
                }
                for c in 0..3 {
                    out[(oy * size + ox) * 3 + c] = (acc[c] / area).round().clamp(0.0, 255.0) as u8;
                }
            }
        }
        RgbImage {
            width: size,
            height: size,
            data: out,
        }
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape(
                "gray image",
                format!("{}x{} needs {} bytes, got {}", width, height, width * height, data.len()),
            ));
        }
        Ok(GrayImage { width, height, data })
    }
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<u16>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape(
                "depth map",
                format!("{}x{} needs {} values, got {}", width, height, width * height, data.len()),
            ));
        }
        Ok(DepthMap { width, height, data })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        DepthMap {
            width,
            height,
            data: vec![DEPTH_BACKGROUND; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.data[y * self.width + x]
    }

    /// `[1, H, W]` tensor mapping `0..=65535` linearly onto `[-1, 1]`, so the
    /// background sentinel becomes exactly `+1`.
    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        Tensor::from_fn([1, self.height, self.width], |i| {
            T::from_f64(self.data[i] as f64 / 65535.0 * 2.0 - 1.0)
        })
    }

    /// Inverse of [`DepthMap::to_tensor`] with rounding and clamping.
    pub fn from_tensor<T: Real>(t: &Tensor<T>) -> Result<Self> {
        let s = t.shape();
        if s.len() != 3 || s[0] != 1 {
            return Err(Error::shape("depth map", format!("expected [1,H,W], got {s:?}")));
        }
        let data = t
            .data()
            .iter()
            .map(|&v| ((Real::to_f64(v) + 1.0) * 0.5 * 65535.0).round().clamp(0.0, 65535.0) as u16)
            .collect();
        DepthMap::new(s[2], s[1], data)
    }
}

/// Map `[-1, 1]` onto bytes.
pub fn unit_to_byte(v: f64) -> u8 {
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}
