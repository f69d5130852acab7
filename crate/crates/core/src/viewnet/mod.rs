//! Viewpoint-conditioned encoder-decoder.
//!
//! The encoder maps an image to a latent code. The decoder processes the
//! requested viewpoint in a small fully connected branch, joins it with the
//! latent code, and up-convolves to an RGB image plus a depth map.

mod train;

use crate::error::{Error, Result};
use crate::render::Viewpoint;
use crate::rng::derive_seed;
use crate::tensor::{he_init, Graph, ParamSet, Real, Tensor, Var};
use crate::weights::NamedTensors;

pub use train::{
    load_checkpoint, render_pair, save_checkpoint, smoothed, write_loss_log, TrainConfig, TrainPair, Trainer,
};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const OUTPUT_CHANNELS: usize = 4;
const ENCODER_KERNELS: [usize; 5] = [5, 5, 3, 3, 3];

/// `(sin az, cos az, sin el, cos el, (r - 2.0) / 0.3)`.
pub fn encode_viewpoint(vp: &Viewpoint) -> [f64; 5] {
    let (az, el) = (vp.azimuth.to_radians(), vp.elevation.to_radians());
    [az.sin(), az.cos(), el.sin(), el.cos(), (vp.distance - 2.0) / 0.3]
}

pub fn viewpoint_tensor<T: Real>(vp: &Viewpoint) -> Tensor<T> {
    Tensor::vector(encode_viewpoint(vp).iter().map(|&v| T::from_f64(v)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    /// Input and output side length.
    pub size: usize,
    pub enc_widths: [usize; 5],
    pub latent: usize,
    pub angle_width: usize,
    /// Joint FC widths; the last is reshaped into the first decoder map.
    pub dec_fc: [usize; 3],
    pub lambda: f64,
    pub adversarial: bool,
    pub alpha: f64,
}

impl NetConfig {
    pub fn desk() -> Self {
        NetConfig {
            size: 32,
            enc_widths: [16, 32, 64, 128, 128],
            latent: 256,
            angle_width: 64,
            dec_fc: [512, 512, 128],
            lambda: 0.1,
            adversarial: false,
            alpha: 0.01,
        }
    }

    /// Full-size 128² preset.
    pub fn large() -> Self {
        NetConfig {
            size: 128,
            enc_widths: [64, 128, 256, 512, 512],
            latent: 1024,
            angle_width: 64,
            dec_fc: [2048, 2048, 512 * 16],
            ..NetConfig::desk()
        }
    }

    /// Desk widths for size `size`, with the last FC width adjusted.
    pub fn with_size(size: usize) -> Self {
        let mut c = NetConfig::desk();
        c.size = size;
        c.dec_fc[2] = c.enc_widths[4] * c.bottleneck() * c.bottleneck();
        c
    }

    /// Spatial side of the innermost feature map.
    pub fn bottleneck(&self) -> usize {
        (self.size / 32).max(1)
    }

    /// Encoder strides: halve while the map is larger than one pixel.
    pub fn strides(&self) -> [usize; 5] {
        let mut s = self.size;
        let mut out = [1; 5];
        for o in &mut out {
            if s > 1 {
                *o = 2;
                s /= 2;
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !self.size.is_power_of_two() || self.size < 2 {
            return Err(Error::Config(format!("image size {} must be a power of two ≥ 2", self.size)));
        }
        if self.enc_widths.contains(&0) || self.latent == 0 || self.angle_width == 0 || self.dec_fc.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        let b = self.bottleneck();
        let want = self.enc_widths[4] * b * b;
        if self.dec_fc[2] != want {
            return Err(Error::Config(format!(
                "last decoder FC width {} must equal {}·{}² = {}",
                self.dec_fc[2], self.enc_widths[4], b, want
            )));
        }
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda {} must be ≥ 0", self.lambda)));
        }
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha {} must be ≥ 0", self.alpha)));
        }
        Ok(())
    }

    /// Up-conv output widths, mirroring the encoder.
    pub fn dec_widths(&self) -> [usize; 5] {
        let e = self.enc_widths;
        [e[3], e[2], e[1], e[0], OUTPUT_CHANNELS]
    }
}

// Parameter order in a generator set:
//   enc.conv0..4 (w, b), enc.fc, dec.angle0..2, dec.fc0..2, dec.up0..4.
const ENC_FC: usize = 10;
const ANGLE: usize = 12;
const JOINT: usize = 18;
const UP: usize = 24;
const GENERATOR_TENSORS: usize = 34;

fn push_layer(set: &mut ParamSet<f32>, name: &str, wshape: &[usize], seed: u64, index: u64) -> Result<()> {
    set.push(format!("{name}.w"), he_init(wshape, derive_seed(seed, 0x1417, index)))?;
    set.push(format!("{name}.b"), Tensor::zeros([wshape[0]]))
}

/// He-initialized generator parameters with zero biases.
pub fn init_generator(cfg: &NetConfig, seed: u64) -> Result<ParamSet<f32>> {
    cfg.validate()?;
    let mut set = ParamSet::new();
    let mut idx = 0u64;
    let mut layer = |set: &mut ParamSet<f32>, name: String, shape: &[usize]| {
        idx += 1;
        push_layer(set, &name, shape, seed, idx)
    };
    let mut cin = 3;
    for (i, (&w, &k)) in cfg.enc_widths.iter().zip(&ENCODER_KERNELS).enumerate() {
        layer(&mut set, format!("enc.conv{i}"), &[w, cin, k, k])?;
        cin = w;
    }
    let b = cfg.bottleneck();
    layer(&mut set, "enc.fc".into(), &[cfg.latent, cfg.enc_widths[4] * b * b])?;
    let mut n = 5;
    for i in 0..3 {
        layer(&mut set, format!("dec.angle{i}"), &[cfg.angle_width, n])?;
        n = cfg.angle_width;
    }
    let mut n = cfg.latent + cfg.angle_width;
    for (i, &w) in cfg.dec_fc.iter().enumerate() {
        layer(&mut set, format!("dec.fc{i}"), &[w, n])?;
        n = w;
    }
    let mut cin = cfg.enc_widths[4];
    for (i, &w) in cfg.dec_widths().iter().enumerate() {
        let k = ENCODER_KERNELS[4 - i];
        layer(&mut set, format!("dec.up{i}"), &[w, cin, k, k])?;
        cin = w;
    }
    debug_assert_eq!(set.len(), GENERATOR_TENSORS);
    Ok(set)
}

/// Discriminator: the encoder's conv stack on 6 channels, then one logit.
pub fn init_discriminator(cfg: &NetConfig, seed: u64) -> Result<ParamSet<f32>> {
    cfg.validate()?;
    let mut set = ParamSet::new();
    let mut cin = 6;
    for (i, (&w, &k)) in cfg.enc_widths.iter().zip(&ENCODER_KERNELS).enumerate() {
        push_layer(&mut set, &format!("disc.conv{i}"), &[w, cin, k, k], seed, 100 + i as u64)?;
        cin = w;
    }
    let b = cfg.bottleneck();
    push_layer(&mut set, "disc.fc", &[1, cfg.enc_widths[4] * b * b], seed, 106)?;
    Ok(set)
}

/// Build a config whose shapes match the given generator tensors.
pub fn config_from_params(set: &ParamSet<f32>, size: usize) -> Result<NetConfig> {
    let shape = |name: &str| -> Result<Vec<usize>> {
        set.get(name)
            .map(|p| p.value.shape().to_vec())
            .ok_or_else(|| Error::format("weights", format!("missing tensor {name}")))
    };
    let mut enc = [0; 5];
    for (i, e) in enc.iter_mut().enumerate() {
        *e = shape(&format!("enc.conv{i}.w"))?[0];
    }
    let mut dec_fc = [0; 3];
    for (i, d) in dec_fc.iter_mut().enumerate() {
        *d = shape(&format!("dec.fc{i}.w"))?[0];
    }
    let cfg = NetConfig {
        size,
        enc_widths: enc,
        latent: shape("enc.fc.w")?[0],
        angle_width: shape("dec.angle0.w")?[0],
        dec_fc,
        ..NetConfig::desk()
    };
    cfg.validate().map_err(|e| Error::format("weights", e.to_string()))?;
    let fresh = init_generator(&cfg, 0)?;
    if fresh.len() != set.len() {
        return Err(Error::format("weights", format!("expected {} tensors, found {}", fresh.len(), set.len())));
    }
    for p in fresh.iter() {
        let have = shape(&p.name)?;
        if have != p.value.shape() {
            return Err(Error::format(
                "weights",
                format!("tensor {} has shape {:?}, expected {:?}", p.name, have, p.value.shape()),
            ));
        }
    }
    Ok(cfg)
}

fn conv_stack<T: Real>(cfg: &NetConfig, g: &mut Graph<T>, p: &[Var], x: Var) -> Result<Var> {
    let strides = cfg.strides();
    let mut h = x;
    for (i, &k) in ENCODER_KERNELS.iter().enumerate() {
        h = g.conv2d(h, p[2 * i], p[2 * i + 1], strides[i], (k - 1) / 2)?;
        h = g.leaky_relu(h, LEAKY_SLOPE);
    }
    let n = g.value(h).len();
    g.reshape(h, &[n])
}

fn check_image<T: Real>(cfg: &NetConfig, g: &Graph<T>, x: Var, channels: usize) -> Result<()> {
    let s = g.shape(x);
    if s != [channels, cfg.size, cfg.size] {
        return Err(Error::shape(
            "network input",
            format!("expected [{}, {}, {}], got {:?}", channels, cfg.size, cfg.size, s),
        ));
    }
    Ok(())
}

/// Image `[3,S,S]` to latent code `[latent]`; `p` are the bound generator
/// parameters.
pub fn encode<T: Real>(cfg: &NetConfig, g: &mut Graph<T>, p: &[Var], image: Var) -> Result<Var> {
    check_image(cfg, g, image, 3)?;
    let flat = conv_stack(cfg, g, p, image)?;
    let z = g.fully_connected(flat, p[ENC_FC], p[ENC_FC + 1])?;
    Ok(g.leaky_relu(z, LEAKY_SLOPE))
}

/// Latent code and viewpoint encoding to `(rgb [3,S,S], depth [1,S,S])`.
pub fn decode<T: Real>(cfg: &NetConfig, g: &mut Graph<T>, p: &[Var], z: Var, theta: Var) -> Result<(Var, Var)> {
    let mut a = theta;
    for i in 0..3 {
        a = g.fully_connected(a, p[ANGLE + 2 * i], p[ANGLE + 2 * i + 1])?;
        a = g.leaky_relu(a, LEAKY_SLOPE);
    }
    let mut h = g.concat(z, a)?;
    for i in 0..3 {
        h = g.fully_connected(h, p[JOINT + 2 * i], p[JOINT + 2 * i + 1])?;
        h = g.leaky_relu(h, LEAKY_SLOPE);
    }
    let b = cfg.bottleneck();
    h = g.reshape(h, &[cfg.enc_widths[4], b, b])?;
    let strides = cfg.strides();
    for i in 0..5 {
        let (w, bias) = (p[UP + 2 * i], p[UP + 2 * i + 1]);
        h = if strides[4 - i] == 2 {
            g.upconv2d(h, w, bias)?
        } else {
            let k = g.shape(w)[2];
            g.conv2d(h, w, bias, 1, (k - 1) / 2)?
        };
        h = if i == 4 { g.tanh(h) } else { g.leaky_relu(h, LEAKY_SLOPE) };
    }
    let rgb = g.slice_channels(h, 0, 3)?;
    let depth = g.slice_channels(h, 3, 1)?;
    Ok((rgb, depth))
}

/// Discriminator logit for a `[6,S,S]` stack; `p` are the bound
/// discriminator parameters.
pub fn discriminate<T: Real>(cfg: &NetConfig, g: &mut Graph<T>, p: &[Var], stack: Var) -> Result<Var> {
    check_image(cfg, g, stack, 6)?;
    let flat = conv_stack(cfg, g, p, stack)?;
    let logit = g.fully_connected(flat, p[10], p[11])?;
    g.reshape(logit, &[])
}

/// `‖y − ŷ‖² + λ‖d − d̂‖₁` for one sample.
pub fn view_loss<T: Real>(
    g: &mut Graph<T>,
    pred_rgb: Var,
    pred_depth: Var,
    tgt_rgb: Var,
    tgt_depth: Var,
    lambda: f64,
) -> Result<Var> {
    let dr = g.sub(pred_rgb, tgt_rgb)?;
    let dd = g.sub(pred_depth, tgt_depth)?;
    let sq = g.sum_squares(dr);
    let l1 = g.sum_abs(dd);
    let l1 = g.scale(l1, lambda);
    g.add(sq, l1)
}

/// Discriminator and adversarial terms for one sample, from the two logits.
pub fn adversarial_terms<T: Real>(g: &mut Graph<T>, real_logit: Var, fake_logit: Var) -> Result<(Var, Var)> {
    let lr = g.bce_with_logits(real_logit, 1.0);
    let lf = g.bce_with_logits(fake_logit, 0.0);
    let discr = g.add(lr, lf)?;
    let adv = g.bce_with_logits(fake_logit, 1.0);
    Ok((discr, adv))
}

/// `αz_a + (1 − α)z_b`; any real `α` is allowed.
pub fn interpolate_latent(za: &[f32], zb: &[f32], alpha: f32) -> Result<Vec<f32>> {
    if za.len() != zb.len() {
        return Err(Error::shape("interpolate_latent", format!("lengths {} and {}", za.len(), zb.len())));
    }
    if alpha == 1.0 {
        return Ok(za.to_vec());
    }
    if alpha == 0.0 {
        return Ok(zb.to_vec());
    }
    Ok(za.iter().zip(zb).map(|(&a, &b)| alpha * a + (1.0 - alpha) * b).collect())
}

/// Trained generator ready for inference.
#[derive(Debug, Clone)]
pub struct Network {
    pub config: NetConfig,
    pub params: ParamSet<f32>,
}

impl Network {
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        let params = init_generator(&config, seed)?;
        Ok(Network { config, params })
    }

    pub fn latent(&self, image: &Tensor<f32>) -> Result<Vec<f32>> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g);
        let x = g.leaf(image.clone());
        let z = encode(&self.config, &mut g, &p, x)?;
        Ok(g.value(z).data().to_vec())
    }

    pub fn decode_latent(&self, z: &[f32], vp: &Viewpoint) -> Result<(Tensor<f32>, Tensor<f32>)> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g);
        let z = g.leaf(Tensor::vector(z.to_vec()));
        let theta = g.leaf(viewpoint_tensor(vp));
        let (rgb, depth) = decode(&self.config, &mut g, &p, z, theta)?;
        Ok((g.value(rgb).clone(), g.value(depth).clone()))
    }

    /// Predictions for several viewpoints from one encoding.
    pub fn predict(&self, image: &Tensor<f32>, views: &[Viewpoint]) -> Result<Vec<(Tensor<f32>, Tensor<f32>)>> {
        let z = self.latent(image)?;
        views.iter().map(|vp| self.decode_latent(&z, vp)).collect()
    }

    pub fn to_named(&self) -> NamedTensors {
        let mut out: NamedTensors = self.params.iter().map(|p| (p.name.clone(), (*p.value).clone())).collect();
        out.push(("meta/size".into(), Tensor::vector(vec![self.config.size as f32])));
        out
    }

    /// Rebuild from tensors written by [`Network::to_named`] or a checkpoint.
    pub fn from_named(tensors: &[(String, Tensor<f32>)]) -> Result<Self> {
        let size = tensors
            .iter()
            .find(|(n, _)| n == "meta/size")
            .and_then(|(_, t)| t.data().first().copied())
            .ok_or_else(|| Error::format("weights", "missing meta/size"))?;
        if !((1.0..=65536.0).contains(&size) && size.fract() == 0.0) {
            return Err(Error::format("weights", format!("bad image size {size}")));
        }
        let mut params = ParamSet::new();
        for (name, t) in tensors {
            if name.starts_with("enc.") || name.starts_with("dec.") {
                params.push(name.clone(), t.clone())?;
            }
        }
        let config = config_from_params(&params, size as usize)?;
        // Reorder into canonical layout.
        let mut ordered = ParamSet::new();
        for p in init_generator(&config, 0)?.iter() {
            ordered.push(p.name.clone(), (*params.get(&p.name).expect("checked").value).clone())?;
        }
        Ok(Network {
            config,
            params: ordered,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(size: usize) -> NetConfig {
        let mut c = NetConfig {
            size,
            enc_widths: [2, 3, 3, 4, 4],
            latent: 6,
            angle_width: 3,
            dec_fc: [5, 5, 0],
            ..NetConfig::desk()
        };
        c.dec_fc[2] = 4 * c.bottleneck() * c.bottleneck();
        c
    }

    #[test]
    fn viewpoint_encoding_examples() {
        let e = encode_viewpoint(&Viewpoint::new(0.0, 0.0, 2.0));
        assert_eq!(e, [0.0, 1.0, 0.0, 1.0, 0.0]);
        let e = encode_viewpoint(&Viewpoint::new(90.0, 0.0, 2.3));
        let want = [1.0, 0.0, 0.0, 1.0, 1.0];
        for (a, b) in e.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        let lo = encode_viewpoint(&Viewpoint::new(1e-6, 10.0, 2.0));
        let hi = encode_viewpoint(&Viewpoint::new(360.0 - 1e-6, 10.0, 2.0));
        assert!(lo.iter().zip(&hi).all(|(a, b)| (a - b).abs() < 1e-7));
        for vp in [Viewpoint::new(37.0, -8.0, 1.7), Viewpoint::new(250.0, 39.0, 2.2)] {
            let e = encode_viewpoint(&vp);
            assert!((e[0] * e[0] + e[1] * e[1] - 1.0).abs() < 1e-6);
            assert!((e[2] * e[2] + e[3] * e[3] - 1.0).abs() < 1e-6);
            assert!(e[4].abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn stride_schedule() {
        assert_eq!(NetConfig::desk().strides(), [2; 5]);
        assert_eq!(tiny(8).strides(), [2, 2, 2, 1, 1]);
        assert_eq!(NetConfig::large().bottleneck(), 4);
        NetConfig::large().validate().unwrap();
        let mut bad = NetConfig::desk();
        bad.size = 48;
        assert!(bad.validate().is_err());
        bad = NetConfig::desk();
        bad.dec_fc[2] = 100;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn output_shapes_and_range() {
        for size in [8, 32, 64] {
            let cfg = tiny(size);
            let net = Network::new(cfg.clone(), 3).unwrap();
            let img = Tensor::from_fn([3, size, size], |i| ((i * 7919) % 13) as f32 / 6.0 - 1.0);
            let z = net.latent(&img).unwrap();
            assert_eq!(z.len(), cfg.latent);
            let (rgb, depth) = net.decode_latent(&z, &Viewpoint::new(10.0, 5.0, 2.0)).unwrap();
            assert_eq!(rgb.shape(), &[3, size, size]);
            assert_eq!(depth.shape(), &[1, size, size]);
            assert!(rgb.data().iter().chain(depth.data()).all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn wrong_image_size_is_rejected() {
        let net = Network::new(tiny(8), 1).unwrap();
        let err = net.latent(&Tensor::zeros([3, 16, 16])).unwrap_err();
        assert!(err.to_string().contains("[3, 8, 8]"), "{err}");
    }

    #[test]
    fn zero_weights_zero_image_zero_latent() {
        let mut net = Network::new(tiny(8), 1).unwrap();
        for i in 0..net.params.len() {
            net.params.value_mut(i).data_mut().fill(0.0);
        }
        let z = net.latent(&Tensor::zeros([3, 8, 8])).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decode_is_deterministic() {
        let net = Network::new(tiny(8), 2).unwrap();
        let z = vec![0.3, -0.1, 0.7, 0.0, 1.0, -2.0];
        let vp = Viewpoint::new(33.0, 12.0, 1.9);
        let a = net.decode_latent(&z, &vp).unwrap();
        let b = net.decode_latent(&z, &vp).unwrap();
        assert_eq!(a, b);
    }

    fn loss_of(pr: &[f32], pd: &[f32], tr: &[f32], td: &[f32], lambda: f64) -> f32 {
        let mut g = Graph::<f32>::new();
        let n = pd.len();
        let pr = g.leaf(Tensor::new([3, 1, n], pr.to_vec()).unwrap());
        let pd = g.leaf(Tensor::new([1, 1, n], pd.to_vec()).unwrap());
        let tr = g.leaf(Tensor::new([3, 1, n], tr.to_vec()).unwrap());
        let td = g.leaf(Tensor::new([1, 1, n], td.to_vec()).unwrap());
        let l = view_loss(&mut g, pr, pd, tr, td, lambda).unwrap();
        g.value(l).data()[0]
    }

    #[test]
    fn loss_arithmetic() {
        assert_eq!(loss_of(&[1.0, 0.0, 0.0], &[0.5], &[0.0; 3], &[0.0], 0.1), 1.05);
        assert_eq!(loss_of(&[0.2, -0.3, 0.9], &[0.4], &[0.2, -0.3, 0.9], &[0.4], 0.1), 0.0);
        let (pr, pd, tr, td) = ([0.5, -0.25, 0.0, 1.0, 0.0, 0.5], [0.25, -0.5], [0.0; 6], [0.0; 2]);
        let l0 = loss_of(&pr, &pd, &tr, &td, 0.0);
        let l1 = loss_of(&pr, &pd, &tr, &td, 0.1);
        let l2 = loss_of(&pr, &pd, &tr, &td, 0.2);
        assert!(((l2 - l0) - 2.0 * (l1 - l0)).abs() < 1e-6);
    }

    #[test]
    fn discriminator_at_half() {
        let mut g = Graph::<f64>::new();
        let real = g.leaf(Tensor::scalar(0.0));
        let fake = g.leaf(Tensor::scalar(0.0));
        let (d, a) = adversarial_terms(&mut g, real, fake).unwrap();
        assert!((g.value(d).data()[0] - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((g.value(a).data()[0] - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn discriminator_shapes() {
        let cfg = tiny(8);
        let d = init_discriminator(&cfg, 4).unwrap();
        let mut g = Graph::<f32>::new();
        let p = d.bind(&mut g);
        let x = g.leaf(Tensor::zeros([6, 8, 8]));
        let l = discriminate(&cfg, &mut g, &p, x).unwrap();
        assert_eq!(g.shape(l), &[] as &[usize]);
    }

    #[test]
    fn latent_interpolation_endpoints() {
        let (a, b) = (vec![1.5f32, -0.2, 3.0], vec![0.1f32, 0.7, -1.0]);
        assert_eq!(interpolate_latent(&a, &b, 1.0).unwrap(), a);
        assert_eq!(interpolate_latent(&a, &b, 0.0).unwrap(), b);
        assert_eq!(interpolate_latent(&a, &a, 0.5).unwrap(), a);
        let e = interpolate_latent(&a, &b, 2.0).unwrap();
        assert!((e[0] - 2.9).abs() < 1e-6);
        assert!(interpolate_latent(&a, &b[..2], 0.5).is_err());
    }

    #[test]
    fn named_round_trip() {
        let net = Network::new(tiny(16), 9).unwrap();
        let mut named = net.to_named();
        named.reverse();
        let back = Network::from_named(&named).unwrap();
        assert_eq!(back.config, net.config);
        for (a, b) in net.params.iter().zip(back.params.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.value, b.value);
        }
        named.retain(|(n, _)| n != "dec.up4.b");
        assert!(Network::from_named(&named).is_err());
    }
}
