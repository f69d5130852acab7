use rayon::prelude::*;

use super::{clean_render, depth_error, nn_select, rgb_error, sig6, Described, NnMetric};
use crate::error::{Error, Result};
use crate::fusion::{depth_from_prediction, PREDICTED_BACKGROUND};
use crate::image::{DepthMap, RgbImage};
use crate::render::{basic_lights, composite_with, render_view, BackgroundSource, RenderConfig, TriMesh, Viewpoint};
use crate::rng::{derive_seed, SplitMix64};
use crate::viewnet::Network;

const INPUT_STREAM: u64 = 0x6576_616c;

pub const REPORT_COLUMNS: [&str; 4] = ["Color Normal", "Color Difficult", "Depth Normal", "Depth Difficult"];

/// Network input for evaluation: a clean render over a procedural
/// background seeded by `(seed, object, view)`.
pub fn network_input(mesh: &TriMesh, vp: Viewpoint, size: usize, seed: u64, object: u64, view: u64) -> Result<RgbImage> {
    let s = render_view(mesh, vp, &basic_lights(), &RenderConfig::basic(), size)?;
    let mut rng = SplitMix64::new(derive_seed(seed, INPUT_STREAM, (object << 16) | view));
    let bg = BackgroundSource::Procedural.draw(&mut rng, size, size);
    composite_with(&s.rgb, &s.mask, &bg, None, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalProtocol {
    pub input_views: Vec<Viewpoint>,
    pub output_views: Vec<Viewpoint>,
    pub seed: u64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            input_views: [30.0, 120.0, 210.0, 300.0].iter().map(|&az| Viewpoint::new(az, 10.0, 2.0)).collect(),
            output_views: (0..6).map(|k| Viewpoint::new(60.0 * k as f64, 20.0, 2.0)).collect(),
            seed: 0,
        }
    }
}

/// Errors of the three nearest-neighbour baselines and the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// `(method, [color normal, color difficult, depth normal, depth difficult])`.
    pub rows: Vec<(String, [f64; 4])>,
}

impl Report {
    pub fn row(&self, method: &str) -> Option<&[f64; 4]> {
        self.rows.iter().find(|(m, _)| m == method).map(|(_, v)| v)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("method\t{}\n", REPORT_COLUMNS.join("\t"));
        for (m, v) in &self.rows {
            let cells: Vec<String> = v.iter().map(|&x| sig6(x)).collect();
            s.push_str(&format!("{m}\t{}\n", cells.join("\t")));
        }
        s
    }
}

fn method_name(m: NnMetric) -> &'static str {
    match m {
        NnMetric::Hog => "NN HOG",
        NnMetric::HogRgb => "NN HOG+RGB",
        NnMetric::Rgb => "NN RGB",
    }
}

/// Per-method `(color, depth)` error sums over one test set.
fn score_set(
    net: &Network,
    train: &[TriMesh],
    candidates: &[Vec<Described>],
    test: &[TriMesh],
    first_id: u64,
    p: &EvalProtocol,
) -> Result<Vec<(f64, f64)>> {
    let size = net.config.size;
    let per_model = test
        .par_iter()
        .enumerate()
        .map(|(t, mesh)| -> Result<Vec<(f64, f64)>> {
            let gts: Vec<(RgbImage, DepthMap)> = p
                .output_views
                .iter()
                .map(|&vp| clean_render(mesh, vp, size))
                .collect::<Result<_>>()?;
            let mut acc = vec![(0.0, 0.0); 4];
            for (vi, &vin) in p.input_views.iter().enumerate() {
                let query = Described::new(clean_render(mesh, vin, size)?.0)?;
                for (k, metric) in NnMetric::ALL.iter().enumerate() {
                    let pick = &train[nn_select(&query, &candidates[vi], *metric)?];
                    for (&vout, gt) in p.output_views.iter().zip(&gts) {
                        let (rgb, depth) = clean_render(pick, vout, size)?;
                        acc[k].0 += rgb_error(&rgb, &gt.0)?;
                        acc[k].1 += depth_error(&depth, &gt.1)?;
                    }
                }
                let input = network_input(mesh, vin, size, p.seed, first_id + t as u64, vi as u64)?;
                let z = net.latent(&input.to_tensor())?;
                for (&vout, gt) in p.output_views.iter().zip(&gts) {
                    let (rgb, depth) = net.decode_latent(&z, &vout)?;
                    acc[3].0 += rgb_error(&RgbImage::from_tensor(&rgb)?, &gt.0)?;
                    acc[3].1 += depth_error(&depth_from_prediction(&depth, PREDICTED_BACKGROUND)?, &gt.1)?;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![(0.0, 0.0); 4];
    for m in &per_model {
        for (t, v) in total.iter_mut().zip(m) {
            t.0 += v.0;
            t.1 += v.1;
        }
    }
    let n = (test.len() * p.input_views.len() * p.output_views.len()) as f64;
    Ok(total.into_iter().map(|(c, d)| (c / n, d / n)).collect())
}

/// Mean normalized errors on the normal and difficult test sets.
///
/// Baselines know the input viewpoint and see the query without background;
/// the network sees it over a procedural background.
pub fn evaluate(
    net: &Network,
    train: &[TriMesh],
    normal: &[TriMesh],
    difficult: &[TriMesh],
    p: &EvalProtocol,
) -> Result<Report> {
    if train.is_empty() || normal.is_empty() || difficult.is_empty() {
        return Err(Error::Invalid("evaluation needs training, normal and difficult models".into()));
    }
    if p.input_views.is_empty() || p.output_views.is_empty() {
        return Err(Error::Invalid("evaluation needs input and output views".into()));
    }
    let size = net.config.size;
    let candidates: Vec<Vec<Described>> = p
        .input_views
        .iter()
        .map(|&vp| {
            train
                .par_iter()
                .map(|m| Described::new(clean_render(m, vp, size)?.0))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let a = score_set(net, train, &candidates, normal, 0, p)?;
    let b = score_set(net, train, &candidates, difficult, normal.len() as u64, p)?;
    let mut rows = Vec::new();
    for (k, metric) in NnMetric::ALL.iter().enumerate() {
        rows.push((method_name(*metric).to_string(), [a[k].0, b[k].0, a[k].1, b[k].1]));
    }
    rows.push(("Network".to_string(), [a[3].0, b[3].0, a[3].1, b[3].1]));
    Ok(Report { rows })
}
