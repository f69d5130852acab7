//! Evaluation: HOG descriptors, similarity-based dataset splits,
//! nearest-neighbour baselines, normalized errors, viewpoint confusion
//! matrices and latent-space analyses.

mod cluster;
mod confusion;
mod hog;
mod nn;
mod protocol;

pub use cluster::{average_linkage, clusters_after, split_dataset, Merge, SplitResult};
pub use confusion::{confusion_matrix, ConfusionMatrix};
pub use hog::{descriptor_len, euclidean, hog, HOG_BINS, HOG_CELL};
pub use nn::{nn_distances, nn_select, rgb_distance, Described, NnMetric};
pub use protocol::{evaluate, network_input, EvalProtocol, Report, REPORT_COLUMNS};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{DepthMap, RgbImage};
use crate::render::{basic_lights, render_view, RenderConfig, TriMesh, Viewpoint};
use crate::tensor::Tensor;
use crate::viewnet::Network;

/// Largest possible RGB distance, `sqrt(3)·255` rounded as customary.
pub const RGB_NORMALIZER: f64 = 443.4;
pub const DEPTH_NORMALIZER: f64 = 65535.0;

/// Mean per-pixel Euclidean RGB distance divided by [`RGB_NORMALIZER`].
pub fn rgb_error(pred: &RgbImage, gt: &RgbImage) -> Result<f64> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(Error::shape(
            "rgb_error",
            format!("{}x{} vs {}x{}", pred.width, pred.height, gt.width, gt.height),
        ));
    }
    let n = (pred.width * pred.height) as f64;
    let total: f64 = pred
        .data
        .chunks_exact(3)
        .zip(gt.data.chunks_exact(3))
        .map(|(a, b)| {
            (0..3)
                .map(|c| {
                    let d = a[c] as f64 - b[c] as f64;
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    Ok(total / n / RGB_NORMALIZER)
}

/// Mean absolute 16-bit depth difference divided by [`DEPTH_NORMALIZER`].
pub fn depth_error(pred: &DepthMap, gt: &DepthMap) -> Result<f64> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(Error::shape(
            "depth_error",
            format!("{}x{} vs {}x{}", pred.width, pred.height, gt.width, gt.height),
        ));
    }
    let n = (pred.width * pred.height) as f64;
    let total: f64 = pred.data.iter().zip(&gt.data).map(|(&a, &b)| (a as f64 - b as f64).abs()).sum();
    Ok(total / n / DEPTH_NORMALIZER)
}

/// Fixed viewpoints used to compare models for the split.
pub const SPLIT_VIEWS: [Viewpoint; 3] = [
    Viewpoint::new(0.0, 10.0, 2.0),
    Viewpoint::new(90.0, 10.0, 2.0),
    Viewpoint::new(180.0, 10.0, 2.0),
];

/// Clean render under the two fixed lights on the flat target background.
pub fn clean_render(mesh: &TriMesh, vp: Viewpoint, size: usize) -> Result<(RgbImage, DepthMap)> {
    let s = render_view(mesh, vp, &basic_lights(), &RenderConfig::basic(), size)?;
    Ok((s.rgb, s.depth))
}

/// HOG descriptors of a model from the split viewpoints.
pub fn model_descriptors(mesh: &TriMesh, size: usize) -> Result<Vec<Vec<f64>>> {
    SPLIT_VIEWS
        .iter()
        .map(|&vp| {
            let (rgb, _) = clean_render(mesh, vp, size)?;
            hog(&rgb.luma(), size, size)
        })
        .collect()
}

fn descriptor_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| euclidean(x, y)).sum()
}

/// Sum over the split viewpoints of the HOG distance between renders.
pub fn model_distance(a: &TriMesh, b: &TriMesh, size: usize) -> Result<f64> {
    Ok(descriptor_distance(&model_descriptors(a, size)?, &model_descriptors(b, size)?))
}

/// All pairwise [`model_distance`]s.
pub fn distance_matrix(meshes: &[TriMesh], size: usize) -> Result<Vec<Vec<f64>>> {
    let desc = meshes
        .par_iter()
        .map(|m| model_descriptors(m, size))
        .collect::<Result<Vec<_>>>()?;
    let n = meshes.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| if j > i { descriptor_distance(&desc[i], &desc[j]) } else { 0.0 }).collect())
        .collect();
    let mut d = rows;
    for i in 0..n {
        for j in 0..i {
            d[i][j] = d[j][i];
        }
    }
    Ok(d)
}

/// Pairwise Euclidean distances between encoder outputs, in input order.
pub fn latent_distance_matrix(net: &Network, images: &[Tensor<f32>]) -> Result<Vec<Vec<f64>>> {
    let z = images.par_iter().map(|im| net.latent(im)).collect::<Result<Vec<_>>>()?;
    let n = z.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = z[i]
                .iter()
                .zip(&z[j])
                .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
                .sum::<f64>()
                .sqrt();
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    Ok(d)
}

/// Mean within-group and cross-group entries of a distance matrix whose
/// rows come in consecutive groups of `group` (diagonal excluded).
pub fn block_means(d: &[Vec<f64>], group: usize) -> (f64, f64) {
    let (mut within, mut nw, mut cross, mut nc) = (0.0, 0usize, 0.0, 0usize);
    for (i, row) in d.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if i == j {
                continue;
            }
            if i / group == j / group {
                within += v;
                nw += 1;
            } else {
                cross += v;
                nc += 1;
            }
        }
    }
    (within / nw.max(1) as f64, cross / nc.max(1) as f64)
}

/// Format with six significant digits.
pub fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-5..6).contains(&mag) {
        return format!("{v:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    format!("{v:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::{gen_object, Family};

    #[test]
    fn normalized_error_examples() {
        let a = RgbImage::filled(4, 3, [0; 3]);
        let b = RgbImage::filled(4, 3, [255; 3]);
        assert_eq!(rgb_error(&a, &a).unwrap(), 0.0);
        let want = (3.0f64 * 255.0 * 255.0).sqrt() / 443.4;
        assert!((rgb_error(&a, &b).unwrap() - want).abs() < 1e-12);
        assert!((rgb_error(&a, &b).unwrap() - 0.996105).abs() < 1e-6);
        let d0 = DepthMap::new(2, 2, vec![0; 4]).unwrap();
        let d1 = DepthMap::new(2, 2, vec![65535; 4]).unwrap();
        assert_eq!(depth_error(&d0, &d1).unwrap(), 1.0);
        assert!(rgb_error(&a, &RgbImage::filled(3, 4, [0; 3])).is_err());
        assert!(depth_error(&d0, &DepthMap::new(1, 4, vec![0; 4]).unwrap()).is_err());
    }

    #[test]
    fn model_distance_properties() {
        let a = gen_object(Family::Vehicle, 1);
        let b = gen_object(Family::Vehicle, 2);
        assert_eq!(model_distance(&a, &a, 32).unwrap(), 0.0);
        assert_eq!(model_distance(&a, &b, 32).unwrap(), model_distance(&b, &a, 32).unwrap());
        let m = distance_matrix(&[a.clone(), b.clone(), gen_object(Family::Chair, 3)], 32).unwrap();
        assert_eq!(m[0][1], model_distance(&a, &b, 32).unwrap());
        assert_eq!(m[1][0], m[0][1]);
        assert_eq!(m[2][2], 0.0);
    }

    #[test]
    fn families_separate() {
        let (mut vv, mut vc) = (0.0, 0.0);
        for s in 0..20 {
            let v1 = gen_object(Family::Vehicle, 1000 + 2 * s);
            let v2 = gen_object(Family::Vehicle, 1001 + 2 * s);
            let c = gen_object(Family::Chair, 5000 + s);
            vv += model_distance(&v1, &v2, 32).unwrap();
            vc += model_distance(&v1, &c, 32).unwrap();
        }
        assert!(vc > vv, "vehicle-chair {vc} vs vehicle-vehicle {vv}");
    }

    #[test]
    fn block_mean_split() {
        let d = vec![
            vec![0.0, 1.0, 5.0, 5.0],
            vec![1.0, 0.0, 5.0, 5.0],
            vec![5.0, 5.0, 0.0, 2.0],
            vec![5.0, 5.0, 2.0, 0.0],
        ];
        assert_eq!(block_means(&d, 2), (1.5, 5.0));
    }

    #[test]
    fn significant_digits() {
        assert_eq!(sig6(0.0123456789), "0.0123457");
        assert_eq!(sig6(0.5), "0.500000");
        assert_eq!(sig6(1.0), "1.00000");
        assert_eq!(sig6(0.0), "0");
    }
}
