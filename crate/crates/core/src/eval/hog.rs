use crate::error::{Error, Result};

pub const HOG_CELL: usize = 8;
pub const HOG_BINS: usize = 9;
const HOG_EPS: f64 = 1e-6;

/// Histogram-of-oriented-gradients descriptor of a grayscale image.
///
/// Centered-difference gradients (borders replicate), 9 unsigned orientation
/// bins centered at 0°, 20°, …, 160° with linear interpolation between the
/// two nearest, 8×8-pixel cells, 2×2-cell blocks at a one-cell stride, each
/// block L2-normalized as `v / sqrt(|v|² + ε²)`.
pub fn hog(gray: &[f64], width: usize, height: usize) -> Result<Vec<f64>> {
    if gray.len() != width * height {
        return Err(Error::shape("hog", format!("{}x{} image needs {} values, got {}", width, height, width * height, gray.len())));
    }
    if !width.is_multiple_of(HOG_CELL) || !height.is_multiple_of(HOG_CELL) || width < 2 * HOG_CELL || height < 2 * HOG_CELL {
        return Err(Error::shape(
            "hog",
            format!("size {width}x{height} must be a multiple of {HOG_CELL} and at least two cells"),
        ));
    }
    let (cw, ch) = (width / HOG_CELL, height / HOG_CELL);
    let mut cells = vec![0.0f64; cw * ch * HOG_BINS];
    let at = |x: isize, y: isize| {
        let x = x.clamp(0, width as isize - 1) as usize;
        let y = y.clamp(0, height as isize - 1) as usize;
        gray[y * width + x]
    };
    let bin_width = 180.0 / HOG_BINS as f64;
    for y in 0..height {
        for x in 0..width {
            let (xi, yi) = (x as isize, y as isize);
            let gx = at(xi + 1, yi) - at(xi - 1, yi);
            let gy = at(xi, yi + 1) - at(xi, yi - 1);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let angle = gy.atan2(gx).to_degrees().rem_euclid(180.0);
            let pos = angle / bin_width;
            let lo = pos.floor();
            let frac = pos - lo;
            let b0 = lo as usize % HOG_BINS;
            let b1 = (b0 + 1) % HOG_BINS;
            let c = ((y / HOG_CELL) * cw + x / HOG_CELL) * HOG_BINS;
            cells[c + b0] += mag * (1.0 - frac);
            cells[c + b1] += mag * frac;
        }
    }
    let mut out = Vec::with_capacity((cw - 1) * (ch - 1) * 4 * HOG_BINS);
    for by in 0..ch - 1 {
        for bx in 0..cw - 1 {
            let start = out.len();
            for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let c = ((by + dy) * cw + bx + dx) * HOG_BINS;
                out.extend_from_slice(&cells[c..c + HOG_BINS]);
            }
            let norm = (out[start..].iter().map(|v| v * v).sum::<f64>() + HOG_EPS * HOG_EPS).sqrt();
            for v in &mut out[start..] {
                *v /= norm;
            }
        }
    }
    Ok(out)
}

pub fn descriptor_len(width: usize, height: usize) -> usize {
    (width / HOG_CELL - 1) * (height / HOG_CELL - 1) * 4 * HOG_BINS
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_is_zero() {
        let d = hog(&vec![77.0; 32 * 32], 32, 32).unwrap();
        assert_eq!(d.len(), 324);
        assert_eq!(d.len(), descriptor_len(32, 32));
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_step_edge() {
        // Step between columns 7 and 8: columns 7 and 8 carry gradient 255
        // along +x in every row, i.e. 8·255 in bin 0 of each of the four
        // cells of the single block, and nothing elsewhere.
        let img: Vec<f64> = (0..16 * 16).map(|i| if i % 16 >= 8 { 255.0 } else { 0.0 }).collect();
        let d = hog(&img, 16, 16).unwrap();
        assert_eq!(d.len(), 36);
        let cell = 8.0 * 255.0;
        let norm = (4.0 * cell * cell + HOG_EPS * HOG_EPS).sqrt();
        for c in 0..4 {
            for b in 0..HOG_BINS {
                let want = if b == 0 { cell / norm } else { 0.0 };
                assert!((d[c * HOG_BINS + b] - want).abs() < 1e-12, "cell {c} bin {b}: {}", d[c * HOG_BINS + b]);
            }
        }
    }

    #[test]
    fn interpolates_between_bins() {
        // Diagonal ramp: gradient at 45°, between the 40° and 60° bins.
        // Cell (1,1) is the last cell of the first block and touches no border.
        let img: Vec<f64> = (0..32 * 32).map(|i| ((i % 32) + (i / 32)) as f64).collect();
        let d = hog(&img, 32, 32).unwrap();
        let (b2, b3) = (d[3 * HOG_BINS + 2], d[3 * HOG_BINS + 3]);
        assert!(b2 > 0.0 && (b2 / b3 - 3.0).abs() < 1e-9, "{b2} {b3}");
        assert!(d.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn offset_invariance_and_errors() {
        let img: Vec<f64> = (0..24 * 16).map(|i| ((i * 37) % 101) as f64).collect();
        let shifted: Vec<f64> = img.iter().map(|v| v + 40.0).collect();
        assert_eq!(hog(&img, 24, 16).unwrap(), hog(&shifted, 24, 16).unwrap());
        assert!(hog(&img, 12, 32).is_err());
        assert!(hog(&img[1..], 24, 16).is_err());
    }
}
