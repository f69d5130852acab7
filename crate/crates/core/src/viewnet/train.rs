use std::path::Path;
use std::sync::mpsc::sync_channel;
use std::sync::Arc;

use rayon::prelude::*;

use super::{
    adversarial_terms, decode, discriminate, encode, init_discriminator, view_loss, viewpoint_tensor, Network,
};
use crate::error::{Error, Result};
use crate::render::{composite, render_view, sample_scene, RenderConfig, TriMesh, Viewpoint};
use crate::rng::{derive_seed, SplitMix64};
use crate::tensor::{AdamConfig, AdamState, Graph, ParamSet, Tensor};
use crate::weights::NamedTensors;

const PAIR_STREAM: u64 = 0x7061_6972;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub batch: usize,
    pub adam: AdamConfig,
    pub render: RenderConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 42,
            batch: 16,
            adam: AdamConfig::default(),
            render: RenderConfig::default(),
        }
    }
}

/// One training example in network units.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPair {
    pub input: Tensor<f32>,
    pub target_rgb: Tensor<f32>,
    pub target_depth: Tensor<f32>,
    pub theta: Tensor<f32>,
    pub object: usize,
    pub input_view: Viewpoint,
    pub output_view: Viewpoint,
}

/// The `index`-th training pair of a run; depends only on `(seed, index)`.
pub fn render_pair(objects: &[TriMesh], cfg: &RenderConfig, size: usize, seed: u64, index: u64) -> Result<TrainPair> {
    if objects.is_empty() {
        return Err(Error::Invalid("training needs at least one object".into()));
    }
    let mut rng = SplitMix64::new(derive_seed(seed, PAIR_STREAM, index));
    let object = rng.index(objects.len());
    let mesh = &objects[object];
    let (input_view, lights) = sample_scene(&mut rng, cfg);
    let output_view = Viewpoint::sample(&mut rng);
    let src = render_view(mesh, input_view, &lights, cfg, size)?;
    let bg = cfg.background.draw(&mut rng, size, size);
    let input = composite(&src, &bg, &mut rng, cfg)?;
    let tgt = render_view(mesh, output_view, &lights, cfg, size)?;
    Ok(TrainPair {
        input: input.to_tensor(),
        target_rgb: tgt.rgb.to_tensor(),
        target_depth: tgt.depth.to_tensor(),
        theta: viewpoint_tensor(&output_view),
        object,
        input_view,
        output_view,
    })
}

struct SampleGrads {
    loss: f64,
    grads: Vec<Vec<f32>>,
}

fn flat(grads: &crate::tensor::Grads<f32>, g: &Graph<f32>, vars: &[crate::tensor::Var]) -> Vec<Vec<f32>> {
    crate::tensor::flat_grads(grads, g, vars)
}

fn sum_in_order(set: &mut ParamSet<f32>, samples: &[SampleGrads]) -> f64 {
    set.zero_grad();
    let mut loss = 0.0;
    for s in samples {
        set.accumulate_flat(&s.grads);
        loss += s.loss;
    }
    loss
}

/// Owns parameters and optimizer state across steps.
pub struct Trainer {
    pub net: Network,
    pub config: TrainConfig,
    pub adam: AdamState,
    /// Discriminator and its optimizer, in adversarial mode.
    pub disc: Option<(ParamSet<f32>, AdamState)>,
    /// Completed steps.
    pub step: u64,
    /// `(step, loss)` for each step run by this trainer, 1-based.
    pub log: Vec<(u64, f64)>,
    /// `(step, discriminator loss, adversarial loss)` in adversarial mode.
    pub adv_log: Vec<(u64, f64, f64)>,
    objects: Arc<Vec<TriMesh>>,
}

impl Trainer {
    pub fn new(net: Network, config: TrainConfig, objects: Vec<TriMesh>) -> Result<Self> {
        if objects.is_empty() {
            return Err(Error::Invalid("training needs at least one object".into()));
        }
        if config.batch == 0 {
            return Err(Error::Config("batch must be ≥ 1".into()));
        }
        let adam = AdamState::new(&net.params, config.adam);
        let disc = if net.config.adversarial {
            let d = init_discriminator(&net.config, derive_seed(config.seed, 0xD15C, 0))?;
            let a = AdamState::new(&d, config.adam);
            Some((d, a))
        } else {
            None
        };
        Ok(Trainer {
            net,
            config,
            adam,
            disc,
            step: 0,
            log: Vec::new(),
            adv_log: Vec::new(),
            objects: Arc::new(objects),
        })
    }

    /// Train until `total_steps` steps are complete, calling `after_step`
    /// after each one. On failure the trainer keeps the last good state.
    pub fn run(&mut self, total_steps: u64, mut after_step: impl FnMut(&Trainer) -> Result<()>) -> Result<()> {
        if self.step >= total_steps {
            return Ok(());
        }
        let (tx, rx) = sync_channel::<Result<Vec<TrainPair>>>(2);
        let objects = Arc::clone(&self.objects);
        let render = self.config.render.clone();
        let (size, seed, batch, first) = (self.net.config.size, self.config.seed, self.config.batch as u64, self.step);
        std::thread::scope(|scope| {
            scope.spawn(move || {
                for step in first..total_steps {
                    let pairs = (0..batch)
                        .into_par_iter()
                        .map(|b| render_pair(&objects, &render, size, seed, step * batch + b))
                        .collect::<Result<Vec<_>>>();
                    if tx.send(pairs).is_err() {
                        break;
                    }
                }
            });
            let result = (|| {
                for _ in first..total_steps {
                    let pairs = rx.recv().map_err(|_| Error::Invalid("data producer stopped".into()))??;
                    self.train_step(&pairs)?;
                    after_step(self)?;
                }
                Ok(())
            })();
            // Dropping the receiver stops the producer early on failure.
            drop(rx);
            result
        })
    }

    fn train_step(&mut self, pairs: &[TrainPair]) -> Result<()> {
        let step = self.step + 1;
        if self.disc.is_some() {
            return self.adversarial_step(pairs, step);
        }
        let cfg = &self.net.config;
        let params = &self.net.params;
        let samples = pairs
            .par_iter()
            .map(|pair| {
                let mut g = Graph::new();
                let p = params.bind(&mut g);
                let x = g.leaf(pair.input.clone());
                let theta = g.leaf(pair.theta.clone());
                let z = encode(cfg, &mut g, &p, x)?;
                let (rgb, depth) = decode(cfg, &mut g, &p, z, theta)?;
                let tr = g.leaf(pair.target_rgb.clone());
                let td = g.leaf(pair.target_depth.clone());
                let loss = view_loss(&mut g, rgb, depth, tr, td, cfg.lambda)?;
                let grads = g.backward(loss)?;
                Ok(SampleGrads {
                    loss: g.value(loss).data()[0] as f64,
                    grads: flat(&grads, &g, &p),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let loss = sum_in_order(&mut self.net.params, &samples);
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("non-finite loss {loss} at step {step}")));
        }
        self.adam
            .step(&mut self.net.params)
            .map_err(|e| Error::Numerical(format!("step {step}: {e}")))?;
        self.step = step;
        self.log.push((step, loss));
        Ok(())
    }

    fn adversarial_step(&mut self, pairs: &[TrainPair], step: u64) -> Result<()> {
        let cfg = &self.net.config;
        let (disc, disc_adam) = self.disc.as_mut().expect("adversarial mode");
        let gen = &self.net.params;

        // Discriminator update on real targets and current generator output.
        let dsamples = pairs
            .par_iter()
            .map(|pair| {
                let mut g = Graph::new();
                let p = gen.bind(&mut g);
                let x = g.leaf(pair.input.clone());
                let theta = g.leaf(pair.theta.clone());
                let z = encode(cfg, &mut g, &p, x)?;
                let (fake, _) = decode(cfg, &mut g, &p, z, theta)?;
                let fake = g.value(fake).clone();

                let mut g = Graph::new();
                let dp = disc.bind(&mut g);
                let x = g.leaf(pair.input.clone());
                let real = g.leaf(pair.target_rgb.clone());
                let fake = g.leaf(fake);
                let rs = g.concat_channels(x, real)?;
                let fs = g.concat_channels(x, fake)?;
                let rl = discriminate(cfg, &mut g, &dp, rs)?;
                let fl = discriminate(cfg, &mut g, &dp, fs)?;
                let (ld, _) = adversarial_terms(&mut g, rl, fl)?;
                let grads = g.backward(ld)?;
                Ok(SampleGrads {
                    loss: g.value(ld).data()[0] as f64,
                    grads: flat(&grads, &g, &dp),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        // Generator update against the updated discriminator.
        let mut disc_next = disc.clone();
        let mut adam_next = disc_adam.clone();
        let discr_loss = sum_in_order(&mut disc_next, &dsamples);
        if !discr_loss.is_finite() {
            return Err(Error::Numerical(format!("non-finite discriminator loss at step {step}")));
        }
        adam_next
            .step(&mut disc_next)
            .map_err(|e| Error::Numerical(format!("step {step}: {e}")))?;

        let alpha = cfg.alpha;
        let gsamples = pairs
            .par_iter()
            .map(|pair| {
                let mut g = Graph::new();
                let p = gen.bind(&mut g);
                let dp = disc_next.bind(&mut g);
                let x = g.leaf(pair.input.clone());
                let theta = g.leaf(pair.theta.clone());
                let z = encode(cfg, &mut g, &p, x)?;
                let (rgb, depth) = decode(cfg, &mut g, &p, z, theta)?;
                let tr = g.leaf(pair.target_rgb.clone());
                let td = g.leaf(pair.target_depth.clone());
                let euc = view_loss(&mut g, rgb, depth, tr, td, cfg.lambda)?;
                let fs = g.concat_channels(x, rgb)?;
                let fl = discriminate(cfg, &mut g, &dp, fs)?;
                let adv = g.bce_with_logits(fl, 1.0);
                let weighted = g.scale(adv, alpha);
                let total = g.add(euc, weighted)?;
                let grads = g.backward(total)?;
                Ok((
                    SampleGrads {
                        loss: g.value(euc).data()[0] as f64,
                        grads: flat(&grads, &g, &p),
                    },
                    g.value(adv).data()[0] as f64,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let adv_loss: f64 = gsamples.iter().map(|(_, a)| a).sum();
        let gsamples: Vec<SampleGrads> = gsamples.into_iter().map(|(s, _)| s).collect();
        let mut gen_next = self.net.params.clone();
        let loss = sum_in_order(&mut gen_next, &gsamples);
        if !loss.is_finite() || !adv_loss.is_finite() {
            return Err(Error::Numerical(format!("non-finite generator loss at step {step}")));
        }
        let mut gen_adam = self.adam.clone();
        gen_adam
            .step(&mut gen_next)
            .map_err(|e| Error::Numerical(format!("step {step}: {e}")))?;

        self.disc = Some((disc_next, adam_next));
        self.net.params = gen_next;
        self.adam = gen_adam;
        self.step = step;
        self.log.push((step, loss));
        self.adv_log.push((step, discr_loss, adv_loss));
        Ok(())
    }
}

fn step_tensor(step: u64) -> Tensor<f32> {
    // Two 24-bit halves keep the count exact in f32.
    Tensor::vector(vec![(step >> 24) as f32, (step & 0xFF_FFFF) as f32])
}

fn optimizer_named(prefix: &str, set: &ParamSet<f32>, adam: &AdamState, out: &mut NamedTensors) {
    for (i, p) in set.iter().enumerate() {
        out.push((format!("adam_m/{prefix}{}", p.name), adam.m[i].clone()));
        out.push((format!("adam_v/{prefix}{}", p.name), adam.v[i].clone()));
    }
}

/// Parameters, optimizer moments and step count of a trainer.
pub fn save_checkpoint(path: &Path, t: &Trainer) -> Result<()> {
    let mut out = t.net.to_named();
    optimizer_named("", &t.net.params, &t.adam, &mut out);
    if let Some((d, a)) = &t.disc {
        out.extend(d.iter().map(|p| (p.name.clone(), (*p.value).clone())));
        optimizer_named("", d, a, &mut out);
    }
    out.push(("meta/step".into(), step_tensor(t.step)));
    crate::weights::save_weights(path, &out)
}

/// Restore a trainer from [`save_checkpoint`] output.
pub fn load_checkpoint(path: &Path, config: TrainConfig, objects: Vec<TriMesh>, adversarial: bool, alpha: f64, lambda: f64) -> Result<Trainer> {
    let named = crate::weights::load_weights(path)?;
    let mut net = Network::from_named(&named)?;
    net.config.adversarial = adversarial;
    net.config.alpha = alpha;
    net.config.lambda = lambda;
    let get = |name: &str| -> Result<&Tensor<f32>> {
        named
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::format("checkpoint", format!("missing tensor {name}")))
    };
    let step_t = get("meta/step")?;
    if step_t.len() != 2 {
        return Err(Error::format("checkpoint", "meta/step must hold two values"));
    }
    let step = ((step_t.data()[0] as u64) << 24) | step_t.data()[1] as u64;
    let mut t = Trainer::new(net, config, objects)?;
    let restore = |set: &ParamSet<f32>, adam: &mut AdamState| -> Result<()> {
        for (i, p) in set.iter().enumerate() {
            for (kind, dst) in [("adam_m", &mut adam.m[i]), ("adam_v", &mut adam.v[i])] {
                let src = get(&format!("{kind}/{}", p.name))?;
                if src.shape() != p.value.shape() {
                    return Err(Error::format("checkpoint", format!("{kind}/{} has wrong shape", p.name)));
                }
                *dst = src.clone();
            }
        }
        adam.t = step;
        Ok(())
    };
    restore(&t.net.params, &mut t.adam)?;
    if let Some((d, a)) = &mut t.disc {
        for i in 0..d.len() {
            let name = d.iter().nth(i).expect("index in range").name.clone();
            let src = get(&name)?;
            if src.shape() != d.value(i).shape() {
                return Err(Error::format("checkpoint", format!("{name} has wrong shape")));
            }
            *d.value_mut(i) = src.clone();
        }
        restore(d, a)?;
    }
    t.step = step;
    Ok(t)
}

/// Trailing moving average with the given window (shorter at the start).
pub fn smoothed(log: &[(u64, f64)], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(log.len());
    let mut acc = 0.0;
    for i in 0..log.len() {
        acc += log[i].1;
        if i >= window {
            acc -= log[i - window].1;
        }
        out.push(acc / (i + 1).min(window) as f64);
    }
    out
}

/// One `step loss` pair per line.
pub fn write_loss_log(path: &Path, log: &[(u64, f64)], append: bool) -> Result<()> {
    use std::io::Write;
    let mut text = String::new();
    for (s, l) in log {
        text.push_str(&format!("{s} {l}\n"));
    }
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
