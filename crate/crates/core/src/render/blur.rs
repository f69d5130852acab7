use crate::image::RgbImage;

/// Normalized Gaussian taps for offsets `-r..=r` with `r = ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let r = (3.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-r..=r).map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Separable Gaussian blur of a `w × h` plane with clamped borders.
pub fn blur_plane(data: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let clamp = |i: i64, n: usize| i.clamp(0, n as i64 - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (t, &kw) in k.iter().enumerate() {
                s += kw * data[y * w + clamp(x as i64 + t as i64 - r, w)];
            }
            tmp[y * w + x] = s;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (t, &kw) in k.iter().enumerate() {
                s += kw * tmp[clamp(y as i64 + t as i64 - r, h) * w + x];
            }
            out[y * w + x] = s;
        }
    }
    out
}

/// Per-channel planes of an RGB image as floating point.
pub(crate) fn planes(img: &RgbImage) -> [Vec<f64>; 3] {
    let mut p = [Vec::new(), Vec::new(), Vec::new()];
    for (c, plane) in p.iter_mut().enumerate() {
        *plane = img.data.chunks_exact(3).map(|px| px[c] as f64).collect();
    }
    p
}

pub fn gaussian_blur(img: &RgbImage, sigma: f64) -> RgbImage {
    let mut out = img.clone();
    for (c, plane) in planes(img).iter().enumerate() {
        let b = blur_plane(plane, img.width, img.height, sigma);
        for (i, v) in b.iter().enumerate() {
            out.data[i * 3 + c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_normalized_and_sized() {
        for &s in &[0.2, 0.6, 1.0, 1.3] {
            let k = gaussian_kernel(s);
            assert_eq!(k.len(), 2 * (3.0f64 * s).ceil() as usize + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_image_unchanged() {
        let img = RgbImage::filled(9, 7, [13, 200, 77]);
        for &s in &[0.3, 1.0, 2.5] {
            let b = gaussian_blur(&img, s);
            for (a, o) in b.data.iter().zip(&img.data) {
                assert!((*a as i32 - *o as i32).abs() <= 1);
            }
        }
    }

    #[test]
    fn impulse_center_weight() {
        let (w, h) = (15, 15);
        let mut d = vec![0.0; w * h];
        d[7 * w + 7] = 1.0;
        let b = blur_plane(&d, w, h, 1.0);
        // Direct evaluation of the discrete normalized Gaussian at 0.
        let norm: f64 = (-3..=3).map(|t: i32| (-(t * t) as f64 / 2.0).exp()).sum();
        let center = 1.0 / norm;
        assert!((b[7 * w + 7] - center * center).abs() < 1e-15);
    }

    #[test]
    fn flip_equivariant() {
        let (w, h) = (11, 6);
        let d: Vec<f64> = (0..w * h).map(|i| ((i * 37) % 23) as f64).collect();
        let flip = |v: &[f64]| -> Vec<f64> {
            let mut o = vec![0.0; w * h];
            for y in 0..h {
                for x in 0..w {
                    o[y * w + (w - 1 - x)] = v[y * w + x];
                }
            }
            o
        };
        let a = blur_plane(&flip(&d), w, h, 0.9);
        let b = flip(&blur_plane(&d, w, h, 0.9));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
