//! Checks shared by the integration tests and the acceptance run.
#![allow(dead_code)]

pub mod gradcheck;

use mv3d::eval::confusion_matrix;
use mv3d::render::{basic_lights, gen_object, render_view, Family, RenderConfig, TriMesh, Vec3, Viewpoint};
use mv3d::rng::SplitMix64;
use mv3d::viewnet::{NetConfig, Network};

/// Twenty seeded meshes, alternating families.
pub fn closure_meshes() -> Vec<TriMesh> {
    (0..20u64)
        .map(|s| gen_object(if s % 2 == 0 { Family::Vehicle } else { Family::Chair }, 1000 + s))
        .collect()
}

/// Back-project every foreground pixel and project it again: the point must
/// land on its own pixel with depth within two quantization steps.
///
/// Returns `(closed, foreground)` pixel counts over three random views per
/// mesh.
pub fn depth_round_trip(meshes: &[TriMesh], size: usize, seed: u64) -> (usize, usize) {
    let cfg = RenderConfig::basic();
    let mut rng = SplitMix64::new(seed);
    let (mut ok, mut total) = (0, 0);
    for mesh in meshes {
        for _ in 0..3 {
            let s = render_view(mesh, Viewpoint::sample(&mut rng), &basic_lights(), &cfg, size).unwrap();
            let cam = &s.camera;
            for v in 0..size {
                for u in 0..size {
                    let q = s.depth.get(u, v);
                    if q == u16::MAX {
                        continue;
                    }
                    total += 1;
                    let p = cam.unproject(u as f64, v as f64, cam.dequantize_depth(q));
                    if let Some((pu, pv, z)) = cam.project(p) {
                        let same_pixel = pu.round() as usize == u && pv.round() as usize == v;
                        if same_pixel && (cam.quantize_depth(z) as i64 - q as i64).abs() <= 2 {
                            ok += 1;
                        }
                    }
                }
            }
        }
    }
    (ok, total)
}

/// Largest excess of `| |p| − r |` over `2·step + z/f` for a finely
/// tessellated sphere seen from several views; negative means within bound.
pub fn sphere_excess(size: usize) -> f64 {
    let r = 0.5;
    let mesh = TriMesh::uv_sphere(r, 96, 192, [0.7, 0.7, 0.7]);
    let cfg = RenderConfig::basic();
    let mut worst = f64::NEG_INFINITY;
    for (az, el, d) in [(0.0, 0.0, 2.0), (70.0, 25.0, 1.8), (200.0, -10.0, 2.3), (315.0, 40.0, 1.7)] {
        let s = render_view(&mesh, Viewpoint::new(az, el, d), &basic_lights(), &cfg, size).unwrap();
        let cam = &s.camera;
        for v in 0..size {
            for u in 0..size {
                let q = s.depth.get(u, v);
                if q == u16::MAX {
                    continue;
                }
                let z = cam.dequantize_depth(q);
                let p: Vec3 = cam.unproject(u as f64, v as f64, z);
                let bound = 2.0 * cam.depth_step() + z / cam.fx.min(cam.fy);
                worst = worst.max((p.norm() - r).abs() - bound);
            }
        }
    }
    worst
}

/// Largest max/min ratio of normalized confusion entries for an untrained
/// network, over five initialization seeds.
pub fn untrained_confusion_ratio(cfg: &NetConfig) -> f64 {
    let objects: Vec<TriMesh> = (0..2).map(|s| gen_object(Family::Vehicle, 500 + s)).collect();
    (0..5u64)
        .map(|seed| {
            let net = Network::new(cfg.clone(), seed).unwrap();
            let m = confusion_matrix(&net, &objects, &[20.0], 2.0, seed).unwrap();
            let max = m.normalized.iter().cloned().fold(f64::MIN, f64::max);
            let min = m.normalized.iter().cloned().fold(f64::MAX, f64::min);
            max / min
        })
        .fold(0.0, f64::max)
}

/// Average linkage recomputed from scratch at every step: each cluster
/// distance is the mean over all member pairs. Ties go to the smallest
/// (lower id, higher id). Returns `(a, b, distance, size)` per merge.
pub fn brute_force_linkage(d: &[Vec<f64>]) -> Vec<(usize, usize, f64, usize)> {
    let n = d.len();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut out = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in 0..clusters.len() {
                if i == j {
                    continue;
                }
                let (a, b) = (&clusters[i].1, &clusters[j].1);
                let mut sum = 0.0;
                for &x in a {
                    for &y in b {
                        sum += d[x][y];
                    }
                }
                let avg = sum / (a.len() * b.len()) as f64;
                let key = (clusters[i].0.min(clusters[j].0), clusters[i].0.max(clusters[j].0));
                let take = match best {
                    None => true,
                    Some((bd, bk, _, _)) => avg < bd || (avg == bd && key < bk),
                };
                if take {
                    best = Some((avg, key, i, j));
                }
            }
        }
        let (dist, (lo, hi), i, j) = best.unwrap();
        let mut members = clusters[i].1.clone();
        members.extend(&clusters[j].1);
        out.push((lo, hi, dist, members.len()));
        let id = n + out.len() - 1;
        clusters.retain(|c| c.0 != lo && c.0 != hi);
        clusters.push((id, members));
    }
    out
}
