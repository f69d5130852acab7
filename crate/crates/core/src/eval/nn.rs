use super::hog::{euclidean, hog};
use crate::error::{Error, Result};
use crate::image::RgbImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NnMetric {
    Rgb,
    Hog,
    HogRgb,
}

impl NnMetric {
    pub const ALL: [NnMetric; 3] = [NnMetric::Hog, NnMetric::HogRgb, NnMetric::Rgb];

    pub fn name(self) -> &'static str {
        match self {
            NnMetric::Rgb => "rgb",
            NnMetric::Hog => "hog",
            NnMetric::HogRgb => "hog+rgb",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rgb" => Some(NnMetric::Rgb),
            "hog" => Some(NnMetric::Hog),
            "hog+rgb" => Some(NnMetric::HogRgb),
            _ => None,
        }
    }
}

/// Image plus its HOG descriptor, for repeated nearest-neighbour queries.
#[derive(Debug, Clone)]
pub struct Described {
    pub image: RgbImage,
    pub hog: Vec<f64>,
}

impl Described {
    pub fn new(image: RgbImage) -> Result<Self> {
        let hog = hog(&image.luma(), image.width, image.height)?;
        Ok(Described { image, hog })
    }
}

pub fn rgb_distance(a: &RgbImage, b: &RgbImage) -> f64 {
    a.data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Distances from `query` to every candidate under `metric`.
///
/// The combined metric is `0.5·d_rgb/mean(d_rgb) + 0.5·d_hog/mean(d_hog)`
/// with means over the candidate set; a zero mean drops its term.
pub fn nn_distances(query: &Described, candidates: &[Described], metric: NnMetric) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::Invalid("nearest neighbour needs at least one candidate".into()));
    }
    for c in candidates {
        if (c.image.width, c.image.height) != (query.image.width, query.image.height) {
            return Err(Error::shape(
                "nearest neighbour",
                format!(
                    "candidate {}x{} vs query {}x{}",
                    c.image.width, c.image.height, query.image.width, query.image.height
                ),
            ));
        }
    }
    let rgb = || candidates.iter().map(|c| rgb_distance(&query.image, &c.image)).collect::<Vec<_>>();
    let hogd = || candidates.iter().map(|c| euclidean(&query.hog, &c.hog)).collect::<Vec<_>>();
    Ok(match metric {
        NnMetric::Rgb => rgb(),
        NnMetric::Hog => hogd(),
        NnMetric::HogRgb => {
            let (r, h) = (rgb(), hogd());
            let n = candidates.len() as f64;
            let (mr, mh) = (r.iter().sum::<f64>() / n, h.iter().sum::<f64>() / n);
            let term = |d: f64, m: f64| if m > 0.0 { 0.5 * d / m } else { 0.0 };
            r.iter().zip(&h).map(|(&a, &b)| term(a, mr) + term(b, mh)).collect()
        }
    })
}

/// Index of the nearest candidate; ties go to the lowest index.
pub fn nn_select(query: &Described, candidates: &[Described], metric: NnMetric) -> Result<usize> {
    let d = nn_distances(query, candidates, metric)?;
    let mut best = 0;
    for (i, &v) in d.iter().enumerate() {
        if v < d[best] {
            best = i;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn noise(seed: u64) -> RgbImage {
        let mut rng = SplitMix64::new(seed);
        RgbImage::new(16, 16, (0..16 * 16 * 3).map(|_| rng.index(256) as u8).collect()).unwrap()
    }

    #[test]
    fn picks_identical_candidate() {
        let cands: Vec<Described> = (0..5).map(|s| Described::new(noise(s)).unwrap()).collect();
        for metric in NnMetric::ALL {
            for i in 0..5 {
                assert_eq!(nn_select(&cands[i], &cands, metric).unwrap(), i);
            }
        }
    }

    #[test]
    fn matches_exhaustive_scan() {
        let cands: Vec<Described> = (0..50).map(|s| Described::new(noise(100 + s)).unwrap()).collect();
        let q = Described::new(noise(7)).unwrap();
        for metric in NnMetric::ALL {
            let d = nn_distances(&q, &cands, metric).unwrap();
            let brute = (0..50).min_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b))).unwrap();
            assert_eq!(nn_select(&q, &cands, metric).unwrap(), brute);
        }
        let rgb = nn_distances(&q, &cands, NnMetric::Rgb).unwrap();
        let h = nn_distances(&q, &cands, NnMetric::Hog).unwrap();
        let both = nn_distances(&q, &cands, NnMetric::HogRgb).unwrap();
        let (mr, mh) = (rgb.iter().sum::<f64>() / 50.0, h.iter().sum::<f64>() / 50.0);
        for i in 0..50 {
            assert!((both[i] - (0.5 * rgb[i] / mr + 0.5 * h[i] / mh)).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_and_mismatched() {
        let q = Described::new(noise(1)).unwrap();
        assert!(nn_select(&q, &[], NnMetric::Rgb).is_err());
        let other = Described::new(RgbImage::filled(24, 16, [0; 3])).unwrap();
        assert!(nn_select(&q, &[other], NnMetric::Rgb).is_err());
        for m in NnMetric::ALL {
            assert_eq!(NnMetric::parse(m.name()), Some(m));
        }
    }
}
