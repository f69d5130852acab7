//! Reverse-mode gradients against 64-bit central finite differences.

use mv3d::render::Viewpoint;
use mv3d::rng::SplitMix64;
use mv3d::tensor::{Graph, Tensor, Var};
use mv3d::viewnet::{decode, encode, init_generator, view_loss, viewpoint_tensor, NetConfig};

pub const H: f64 = 1e-3;
pub const TOL: f64 = 1e-4;

fn random(shape: &[usize], rng: &mut SplitMix64) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| rng.uniform(-1.0, 1.0))
}

/// `‖a − n‖ / max(‖a‖, ‖n‖)`, zero when both vanish.
pub fn rel_error(a: &[f64], n: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(n).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(n));
    if scale < 1e-12 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Worst relative error over all inputs between analytic and numeric
/// gradients of `f`.
pub fn check(inputs: &[Tensor<f64>], f: impl Fn(&mut Graph<f64>, &[Var]) -> Var) -> f64 {
    let eval = |xs: &[Tensor<f64>]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.leaf(x.clone())).collect();
        let loss = f(&mut g, &vars);
        g.value(loss).data()[0]
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|x| g.leaf(x.clone())).collect();
    let loss = f(&mut g, &vars);
    let grads = g.backward(loss).unwrap();
    let mut worst: f64 = 0.0;
    for (k, x) in inputs.iter().enumerate() {
        let analytic = grads.tensor(&g, vars[k]).into_data();
        let mut numeric = vec![0.0; x.len()];
        for i in 0..x.len() {
            let mut xs = inputs.to_vec();
            xs[k].data_mut()[i] = x.data()[i] + H;
            let up = eval(&xs);
            xs[k].data_mut()[i] = x.data()[i] - H;
            let down = eval(&xs);
            numeric[i] = (up - down) / (2.0 * H);
        }
        worst = worst.max(rel_error(&analytic, &numeric));
    }
    worst
}

/// Squared distance to a fixed random tensor, so every output element gets
/// a distinct upstream gradient.
fn probe(g: &mut Graph<f64>, y: Var, seed: u64) -> Var {
    let mut rng = SplitMix64::new(seed);
    let shape = g.shape(y).to_vec();
    let r = g.leaf(random(&shape, &mut rng));
    let d = g.sub(y, r).unwrap();
    g.sum_squares(d)
}

/// `(case, worst relative error)` for every differentiable op.
pub fn op_cases() -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut rng = SplitMix64::new(1);
    for (stride, k) in [(1, 3), (2, 3), (2, 5), (1, 1)] {
        let inputs = [random(&[2, 8, 8], &mut rng), random(&[3, 2, k, k], &mut rng), random(&[3], &mut rng)];
        let e = check(&inputs, |g, v| {
            let y = g.conv2d(v[0], v[1], v[2], stride, (k - 1) / 2).unwrap();
            probe(g, y, 7)
        });
        out.push((format!("conv2d s{stride} k{k}"), e));
    }

    let e = check(&[random(&[2, 3, 3], &mut rng)], |g, v| {
        let y = g.upsample_zero(v[0]).unwrap();
        probe(g, y, 8)
    });
    out.push(("upsample_zero".into(), e));
    for k in [3, 5] {
        let inputs = [random(&[3, 4, 4], &mut rng), random(&[2, 3, k, k], &mut rng), random(&[2], &mut rng)];
        let e = check(&inputs, |g, v| {
            let y = g.upconv2d(v[0], v[1], v[2]).unwrap();
            probe(g, y, 9)
        });
        out.push((format!("upconv2d k{k}"), e));
    }

    let fc = [random(&[7], &mut rng), random(&[4, 7], &mut rng), random(&[4], &mut rng)];
    let e = check(&fc, |g, v| {
        let y = g.fully_connected(v[0], v[1], v[2]).unwrap();
        probe(g, y, 10)
    });
    out.push(("fully_connected".into(), e));
    // Keep leaky ReLU inputs away from the kink.
    let x = Tensor::from_fn(vec![20], |i| if i % 2 == 0 { 0.1 + 0.05 * i as f64 } else { -0.1 - 0.05 * i as f64 });
    let e = check(&[x], |g, v| {
        let y = g.leaky_relu(v[0], 0.2);
        probe(g, y, 11)
    });
    out.push(("leaky_relu".into(), e));

    let x = random(&[3, 4], &mut rng);
    type Unary = fn(&mut Graph<f64>, Var) -> Var;
    let unary: [(&str, Unary); 6] = [
        ("tanh", |g, v| {
            let y = g.tanh(v);
            probe(g, y, 12)
        }),
        ("sigmoid", |g, v| {
            let y = g.sigmoid(v);
            probe(g, y, 13)
        }),
        ("scale", |g, v| {
            let y = g.scale(v, -2.5);
            probe(g, y, 14)
        }),
        ("sum", |g, v| {
            let s = g.sum(v);
            let t = g.tanh(s);
            g.sum_squares(t)
        }),
        ("sum_abs", |g, v| g.sum_abs(v)),
        ("bce_with_logits", |g, v| {
            let a = g.bce_with_logits(v, 1.0);
            let b = g.bce_with_logits(v, 0.0);
            let b = g.scale(b, 0.3);
            g.add(a, b).unwrap()
        }),
    ];
    for (name, f) in unary {
        out.push((name.into(), check(std::slice::from_ref(&x), |g, v| f(g, v[0]))));
    }
    let e = check(&[x.clone(), random(&[3, 4], &mut rng)], |g, v| {
        let a = g.add(v[0], v[1]).unwrap();
        let s = g.sub(a, v[1]).unwrap();
        let s = g.sub(s, v[1]).unwrap();
        probe(g, s, 15)
    });
    out.push(("add/sub".into(), e));

    let e = check(&[random(&[3], &mut rng), random(&[5], &mut rng)], |g, v| {
        let y = g.concat(v[0], v[1]).unwrap();
        probe(g, y, 16)
    });
    out.push(("concat".into(), e));
    let e = check(&[random(&[2, 3, 3], &mut rng), random(&[1, 3, 3], &mut rng)], |g, v| {
        let y = g.concat_channels(v[0], v[1]).unwrap();
        probe(g, y, 17)
    });
    out.push(("concat_channels".into(), e));
    let e = check(&[random(&[4, 2, 2], &mut rng)], |g, v| {
        let y = g.slice_channels(v[0], 1, 2).unwrap();
        let y = g.reshape(y, &[8]).unwrap();
        probe(g, y, 18)
    });
    out.push(("slice_channels/reshape".into(), e));
    out
}

/// Worst relative error of the view loss over every parameter of a tiny
/// S=8 network.
pub fn network_case() -> f64 {
    let cfg = NetConfig {
        size: 8,
        enc_widths: [2, 3, 3, 4, 4],
        latent: 5,
        angle_width: 3,
        dec_fc: [6, 5, 4],
        ..NetConfig::desk()
    };
    let mut params = init_generator(&cfg, 11).unwrap().cast::<f64>();
    let mut rng = SplitMix64::new(5);
    // Non-zero biases so their gradients are exercised too.
    for i in 0..params.len() {
        if params.value(i).rank() == 1 {
            let n = params.value(i).len();
            params.value_mut(i).data_mut().copy_from_slice(&(0..n).map(|_| rng.uniform(-0.1, 0.1)).collect::<Vec<_>>());
        }
    }
    let image = random(&[3, 8, 8], &mut rng);
    let tgt_rgb = random(&[3, 8, 8], &mut rng);
    let theta: Tensor<f64> = viewpoint_tensor(&Viewpoint::new(37.0, 12.0, 2.1));
    // Depth targets well away from the prediction so ±h never crosses the
    // kink of the L1 term.
    let depth0 = {
        let mut g = Graph::new();
        let p = params.bind(&mut g);
        let x = g.leaf(image.clone());
        let t = g.leaf(theta.clone());
        let z = encode(&cfg, &mut g, &p, x).unwrap();
        let (_, d) = decode(&cfg, &mut g, &p, z, t).unwrap();
        g.value(d).clone()
    };
    let tgt_depth = Tensor::from_fn(vec![1, 8, 8], |i| {
        let off = rng.uniform(0.2, 0.5);
        if rng.next_f64() < 0.5 {
            depth0.data()[i] + off
        } else {
            depth0.data()[i] - off
        }
    });

    let inputs: Vec<Tensor<f64>> = (0..params.len()).map(|i| params.value(i).clone()).collect();
    check(&inputs, |g, p| {
        let x = g.leaf(image.clone());
        let t = g.leaf(theta.clone());
        let z = encode(&cfg, g, p, x).unwrap();
        let (rgb, depth) = decode(&cfg, g, p, z, t).unwrap();
        let yr = g.leaf(tgt_rgb.clone());
        let yd = g.leaf(tgt_depth.clone());
        view_loss(g, rgb, depth, yr, yd, 0.1).unwrap()
    })
}
