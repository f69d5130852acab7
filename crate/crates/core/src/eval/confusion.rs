use rayon::prelude::*;

use super::{clean_render, network_input, rgb_error};
use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::render::{TriMesh, Viewpoint};
use crate::viewnet::Network;

/// Mean prediction error for every (input view, output view) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    /// Elevation-major, then azimuth in 30° steps.
    pub buckets: Vec<Viewpoint>,
    /// `raw[i * n + j]`: input bucket `i`, output bucket `j`.
    pub raw: Vec<f64>,
    /// `raw` with each column divided by its sum.
    pub normalized: Vec<f64>,
}

pub fn view_buckets(elevations: &[f64], distance: f64) -> Vec<Viewpoint> {
    elevations
        .iter()
        .flat_map(|&el| (0..12).map(move |k| Viewpoint::new(30.0 * k as f64, el, distance)))
        .collect()
}

/// Average normalized RGB error over `objects` for all bucket pairs.
pub fn confusion_matrix(
    net: &Network,
    objects: &[TriMesh],
    elevations: &[f64],
    distance: f64,
    seed: u64,
) -> Result<ConfusionMatrix> {
    if objects.is_empty() || elevations.is_empty() {
        return Err(Error::Invalid("confusion matrix needs objects and elevations".into()));
    }
    let buckets = view_buckets(elevations, distance);
    let n = buckets.len();
    let size = net.config.size;
    let per_object = objects
        .par_iter()
        .enumerate()
        .map(|(o, mesh)| -> Result<Vec<f64>> {
            let gt: Vec<RgbImage> = buckets
                .iter()
                .map(|&vp| clean_render(mesh, vp, size).map(|r| r.0))
                .collect::<Result<_>>()?;
            let mut errs = vec![0.0; n * n];
            for (i, &vin) in buckets.iter().enumerate() {
                let input = network_input(mesh, vin, size, seed, o as u64, i as u64)?;
                let z = net.latent(&input.to_tensor())?;
                for (j, &vout) in buckets.iter().enumerate() {
                    let (rgb, _) = net.decode_latent(&z, &vout)?;
                    errs[i * n + j] = rgb_error(&RgbImage::from_tensor(&rgb)?, &gt[j])?;
                }
            }
            Ok(errs)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut raw = vec![0.0; n * n];
    for e in &per_object {
        for (r, v) in raw.iter_mut().zip(e) {
            *r += v / objects.len() as f64;
        }
    }
    let mut normalized = raw.clone();
    for j in 0..n {
        let s: f64 = (0..n).map(|i| raw[i * n + j]).sum();
        for i in 0..n {
            normalized[i * n + j] = if s > 0.0 { raw[i * n + j] / s } else { 1.0 / n as f64 };
        }
    }
    Ok(ConfusionMatrix {
        buckets,
        raw,
        normalized,
    })
}

impl ConfusionMatrix {
    pub fn size(&self) -> usize {
        self.buckets.len()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let n = self.size();
        (0..n).map(|j| (0..n).map(|i| self.normalized[i * n + j]).sum()).collect()
    }

    /// Mean normalized entry over pairs at most `near` degrees apart, and
    /// over pairs at least `far` degrees apart.
    pub fn near_far_means(&self, near: f64, far: f64) -> (f64, f64) {
        let n = self.size();
        let (mut sn, mut cn, mut sf, mut cf) = (0.0, 0usize, 0.0, 0usize);
        for i in 0..n {
            for j in 0..n {
                // Round away trigonometric noise on exact multiples of 30°.
                let a = (self.buckets[i].angle_to(&self.buckets[j]) * 1e6).round() / 1e6;
                let v = self.normalized[i * n + j];
                if a <= near {
                    sn += v;
                    cn += 1;
                }
                if a >= far {
                    sf += v;
                    cf += 1;
                }
            }
        }
        (sn / cn.max(1) as f64, sf / cf.max(1) as f64)
    }

    /// Tab-separated normalized matrix, one row per input bucket.
    pub fn to_text(&self) -> String {
        let n = self.size();
        let mut s = String::new();
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| super::sig6(self.normalized[i * n + j])).collect();
            s.push_str(&row.join("\t"));
            s.push('\n');
        }
        s
    }

    /// False-color rendering with `cell`×`cell` pixels per entry, scaled so
    /// the largest entry is red and zero is blue.
    pub fn heatmap(&self, cell: usize) -> RgbImage {
        let n = self.size();
        let max = self.normalized.iter().cloned().fold(0.0, f64::max);
        let mut img = RgbImage::filled(n * cell, n * cell, [0; 3]);
        for i in 0..n {
            for j in 0..n {
                let t = if max > 0.0 { self.normalized[i * n + j] / max } else { 0.0 };
                let c = false_color(t);
                for y in 0..cell {
                    for x in 0..cell {
                        img.set_pixel(j * cell + x, i * cell + y, c);
                    }
                }
            }
        }
        img
    }
}

/// Blue → cyan → yellow → red ramp over `[0, 1]`.
fn false_color(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let stops = [[0.0, 0.0, 0.5], [0.0, 0.8, 1.0], [1.0, 1.0, 0.0], [0.8, 0.0, 0.0]];
    let pos = t * 3.0;
    let k = (pos.floor() as usize).min(2);
    let f = pos - k as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = ((stops[k][c] * (1.0 - f) + stops[k + 1][c] * f) * 255.0).round() as u8;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::{gen_object, Family};
    use crate::viewnet::NetConfig;

    #[test]
    fn buckets_and_normalization() {
        let mut cfg = NetConfig::with_size(16);
        cfg.enc_widths = [4, 4, 4, 4, 4];
        cfg.latent = 8;
        cfg.angle_width = 4;
        cfg.dec_fc = [8, 8, 4];
        let net = Network::new(cfg, 5).unwrap();
        let objs = vec![gen_object(Family::Vehicle, 1)];
        let m = confusion_matrix(&net, &objs, &[0.0, 30.0], 2.0, 1).unwrap();
        assert_eq!(m.size(), 24);
        assert_eq!(m.raw.len(), 24 * 24);
        for s in m.column_sums() {
            assert!((s - 1.0).abs() < 1e-6);
        }
        let img = m.heatmap(4);
        assert_eq!((img.width, img.height), (96, 96));
        assert_eq!(m.to_text().lines().count(), 24);
        assert!(confusion_matrix(&net, &[], &[0.0], 2.0, 1).is_err());
    }

    #[test]
    fn near_far_classification() {
        let buckets = view_buckets(&[0.0], 2.0);
        let n = buckets.len();
        // Error proportional to the angle between views.
        let raw: Vec<f64> = (0..n * n).map(|k| 1.0 + buckets[k / n].angle_to(&buckets[k % n])).collect();
        let m = ConfusionMatrix {
            buckets,
            normalized: raw.clone(),
            raw,
        };
        let (near, far) = m.near_far_means(30.0, 150.0);
        // Near: 0° and ±30° → mean angle 20°. Far: 150°, 180°, 150° → 160°.
        assert!((near - 21.0).abs() < 1e-6, "{near}");
        assert!((far - 161.0).abs() < 1e-6, "{far}");
    }

    #[test]
    fn color_ramp_ends() {
        assert_eq!(false_color(0.0), [0, 0, 128]);
        assert_eq!(false_color(1.0), [204, 0, 0]);
    }
}
