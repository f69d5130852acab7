//! `key = value` run configuration with documented defaults.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::render::{Family, RenderMode};
use crate::viewnet::NetConfig;

/// Every key with its default, in echo order.
pub const KEYS: [(&str, &str); 21] = [
    ("seed", "42"),
    ("size", "32"),
    ("enc_widths", "16,32,64,128,128"),
    ("latent", "256"),
    ("angle_width", "64"),
    ("dec_fc", "512,512,128"),
    ("lambda", "0.1"),
    ("alpha", "0.01"),
    ("adversarial", "false"),
    ("steps", "5000"),
    ("batch", "16"),
    ("mode", "realistic"),
    ("family", "vehicle"),
    ("objects", "200"),
    ("samples", "16"),
    ("split_fraction", "0.1"),
    ("k_difficult", "10"),
    ("checkpoint_every", "500"),
    ("confusion_objects", "10"),
    ("backgrounds", ""),
    ("out", "out"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub net: NetConfig,
    pub steps: u64,
    pub batch: usize,
    pub mode: RenderMode,
    pub family: Family,
    /// Number of procedural models; model `i` uses object seed `i`.
    pub objects: usize,
    /// Samples written by `gen-data`.
    pub samples: usize,
    pub split_fraction: f64,
    pub k_difficult: usize,
    /// Zero disables periodic checkpoints.
    pub checkpoint_every: u64,
    /// Test models used for the confusion matrix (from the normal test set).
    pub confusion_objects: usize,
    /// Optional directory of background images for training inputs.
    pub backgrounds: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::parse("").expect("defaults parse")
    }
}

fn bad(key: &str, value: &str, why: &str) -> Error {
    Error::Config(format!("{key} = {value:?}: {why}"))
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(key, v, "not a valid number"))
}

fn list<const N: usize>(key: &str, v: &str) -> Result<[usize; N]> {
    let parts: Vec<usize> = v.split(',').map(|p| num(key, p.trim())).collect::<Result<_>>()?;
    parts.try_into().map_err(|_| bad(key, v, &format!("expected {N} comma-separated integers")))
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Parse config text. Blank lines and `#` comments are ignored; missing
    /// keys take their defaults; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values: Vec<(&str, String, bool)> = KEYS.iter().map(|&(k, d)| (k, d.to_string(), false)).collect();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim();
            let slot = values
                .iter_mut()
                .find(|(name, _, _)| *name == k)
                .ok_or_else(|| Error::Config(format!("line {}: unknown key {k:?}", n + 1)))?;
            if slot.2 {
                return Err(Error::Config(format!("line {}: duplicate key {k:?}", n + 1)));
            }
            slot.1 = v.trim().to_string();
            slot.2 = true;
        }
        let get = |k: &str| values.iter().find(|(name, _, _)| *name == k).map(|(_, v, _)| v.as_str()).unwrap();

        let size: usize = num("size", get("size"))?;
        let mut net = NetConfig::with_size(size);
        net.enc_widths = list("enc_widths", get("enc_widths"))?;
        net.latent = num("latent", get("latent"))?;
        net.angle_width = num("angle_width", get("angle_width"))?;
        net.dec_fc = list("dec_fc", get("dec_fc"))?;
        let explicit = |k: &str| values.iter().any(|(name, _, set)| *name == k && *set);
        if !explicit("dec_fc") {
            // The last width must match the bottleneck, so follow size and widths.
            let b = net.bottleneck();
            net.dec_fc[2] = net.enc_widths[4] * b * b;
        }
        net.lambda = num("lambda", get("lambda"))?;
        net.alpha = num("alpha", get("alpha"))?;
        net.adversarial = match get("adversarial") {
            "true" => true,
            "false" => false,
            v => return Err(bad("adversarial", v, "expected true or false")),
        };
        net.validate()?;

        let mode = RenderMode::parse(get("mode")).ok_or_else(|| bad("mode", get("mode"), "expected realistic or basic"))?;
        let family = Family::parse(get("family")).ok_or_else(|| bad("family", get("family"), "expected vehicle or chair"))?;
        let batch: usize = num("batch", get("batch"))?;
        if batch == 0 {
            return Err(bad("batch", "0", "must be positive"));
        }
        let split_fraction: f64 = num("split_fraction", get("split_fraction"))?;
        if !(split_fraction > 0.0 && split_fraction < 1.0) {
            return Err(bad("split_fraction", get("split_fraction"), "must lie in (0, 1)"));
        }
        let backgrounds = match get("backgrounds") {
            "" => None,
            p => Some(PathBuf::from(p)),
        };
        let out = get("out");
        if out.is_empty() {
            return Err(bad("out", out, "must not be empty"));
        }
        Ok(RunConfig {
            seed: num("seed", get("seed"))?,
            net,
            steps: num("steps", get("steps"))?,
            batch,
            mode,
            family,
            objects: num("objects", get("objects"))?,
            samples: num("samples", get("samples"))?,
            split_fraction,
            k_difficult: num("k_difficult", get("k_difficult"))?,
            checkpoint_every: num("checkpoint_every", get("checkpoint_every"))?,
            confusion_objects: num("confusion_objects", get("confusion_objects"))?,
            backgrounds,
            out: PathBuf::from(out),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Fully resolved config; parsing it yields `self` again.
    pub fn to_text(&self) -> String {
        let n = &self.net;
        let values = [
            self.seed.to_string(),
            n.size.to_string(),
            join(&n.enc_widths),
            n.latent.to_string(),
            n.angle_width.to_string(),
            join(&n.dec_fc),
            n.lambda.to_string(),
            n.alpha.to_string(),
            n.adversarial.to_string(),
            self.steps.to_string(),
            self.batch.to_string(),
            self.mode.name().to_string(),
            self.family.name().to_string(),
            self.objects.to_string(),
            self.samples.to_string(),
            self.split_fraction.to_string(),
            self.k_difficult.to_string(),
            self.checkpoint_every.to_string(),
            self.confusion_objects.to_string(),
            self.backgrounds.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            self.out.display().to_string(),
        ];
        KEYS.iter().zip(values).map(|((k, _), v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_desk_scale() {
        let c = RunConfig::default();
        assert_eq!(c.net, NetConfig::desk());
        assert_eq!((c.seed, c.steps, c.batch, c.objects), (42, 5000, 16, 200));
        assert_eq!(c.mode, RenderMode::Realistic);
        assert_eq!(c.family, Family::Vehicle);
        assert_eq!(c.backgrounds, None);
        assert_eq!(RunConfig::parse("size = 64").unwrap().net.dec_fc, [512, 512, 512]);
        assert!(RunConfig::parse("size = 64\ndec_fc = 512,512,128").is_err());
    }

    #[test]
    fn overrides_comments_and_round_trip() {
        let c = RunConfig::parse("# tiny run\nsize = 16\nsteps=3 # short\n\nfamily = chair\nbackgrounds = /tmp/bg\n").unwrap();
        assert_eq!((c.net.size, c.steps, c.family), (16, 3, Family::Chair));
        assert_eq!(c.backgrounds.as_deref(), Some(Path::new("/tmp/bg")));
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
        assert_eq!(c.to_text().lines().count(), KEYS.len());
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "colour = red",
            "seed",
            "seed = 1\nseed = 2",
            "seed = -1",
            "size = 24",
            "enc_widths = 1,2,3",
            "lambda = -1",
            "alpha = nan",
            "adversarial = yes",
            "mode = fancy",
            "batch = 0",
            "split_fraction = 1",
            "out =",
        ] {
            assert!(matches!(RunConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }
}
