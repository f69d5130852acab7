//! Randomized properties and end-to-end geometry checks.

mod common;

use mv3d::eval::{rgb_error, split_dataset};
use mv3d::image::RgbImage;
use mv3d::tensor::{Graph, Tensor};
use mv3d::viewnet::NetConfig;
use proptest::prelude::*;

fn image(w: usize, h: usize, data: Vec<u8>) -> RgbImage {
    RgbImage::new(w, h, data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn upsample_zero_layout(c in 1usize..4, h in 1usize..6, w in 1usize..6, seed in any::<u64>()) {
        let mut rng = mv3d::rng::SplitMix64::new(seed);
        let x = Tensor::from_fn(vec![c, h, w], |_| rng.uniform(-1e3, 1e3) as f32);
        let mut g = Graph::new();
        let v = g.leaf(x.clone());
        let y = g.upsample_zero(v).unwrap();
        let y = g.value(y);
        prop_assert_eq!(y.shape(), &[c, 2 * h, 2 * w][..]);
        for ch in 0..c {
            for i in 0..2 * h {
                for j in 0..2 * w {
                    let got = y.data()[(ch * 2 * h + i) * 2 * w + j];
                    let want = if i % 2 == 0 && j % 2 == 0 { x.data()[(ch * h + i / 2) * w + j / 2] } else { 0.0 };
                    prop_assert_eq!(got.to_bits(), want.to_bits());
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rgb_error_is_a_metric(
        a in prop::collection::vec(any::<u8>(), 48),
        b in prop::collection::vec(any::<u8>(), 48),
        c in prop::collection::vec(any::<u8>(), 48),
    ) {
        let (a, b, c) = (image(4, 4, a), image(4, 4, b), image(4, 4, c));
        let ab = rgb_error(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab == 0.0, a == b);
        prop_assert_eq!(ab, rgb_error(&b, &a).unwrap());
        prop_assert_eq!(rgb_error(&a, &a).unwrap(), 0.0);
        let bc = rgb_error(&b, &c).unwrap();
        let ac = rgb_error(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn split_partitions_models(n in 10usize..40, seed in any::<u64>(), fraction in 0.05f64..0.5) {
        let mut rng = mv3d::rng::SplitMix64::new(seed);
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.next_f64(), rng.next_f64()]).collect();
        let d: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| pts.iter().map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()).collect())
            .collect();
        let k = n / 5;
        let s = split_dataset(&d, fraction, k).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.test_normal).chain(&s.test_difficult).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(s.test_difficult.len(), k);
        prop_assert!(!s.test_normal.is_empty() && !s.train.is_empty());
    }
}

#[test]
fn depth_round_trip_on_seeded_meshes() {
    let (ok, total) = common::depth_round_trip(&common::closure_meshes(), 64, 7);
    assert!(total > 10_000, "{total} foreground pixels");
    assert!(ok as f64 >= 0.999 * total as f64, "{ok}/{total}");
}

#[test]
fn sphere_surface_residual() {
    let excess = common::sphere_excess(64);
    assert!(excess < 0.0, "residual exceeds bound by {excess}");
}

#[test]
fn untrained_confusion_is_near_uniform() {
    let ratio = common::untrained_confusion_ratio(&NetConfig::desk());
    assert!(ratio < 3.0, "max/min {ratio}");
}
