use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mv3d::config::RunConfig;
use mv3d::eval::{
    clean_render, confusion_matrix, distance_matrix, evaluate, nn_select, split_dataset, Described, EvalProtocol,
    NnMetric, SplitResult,
};
use mv3d::fusion::{canonical_views, depth_from_prediction, fuse, write_ply, FuseOptions, View, PREDICTED_BACKGROUND};
use mv3d::image::RgbImage;
use mv3d::pnm::{read_ppm, write_file, write_pgm, write_pgm16, write_ppm};
use mv3d::render::{
    camera_from_viewpoint, composite, gen_object, render_view, sample_scene, BackgroundSource, RenderConfig,
    RenderMode, TriMesh, Viewpoint,
};
use mv3d::rng::{derive_seed, SplitMix64};
use mv3d::viewnet::{load_checkpoint, save_checkpoint, write_loss_log, Network, TrainConfig, Trainer};
use mv3d::weights::load_weights;
use mv3d::{Error, Result};

const GEN_STREAM: u64 = 0x6765_6e64;

#[derive(Parser)]
#[command(name = "mv3d", version, about = "Novel view and depth prediction from a single image")]
struct Cli {
    /// key = value run configuration; missing keys use defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render samples to PPM/PGM files with a manifest.
    GenData,
    /// Train the network; writes weights, loss log, split and checkpoint.
    Train {
        /// Continue from <out>/checkpoint.mv3d.
        #[arg(long)]
        resume: bool,
    },
    /// Predict RGB and depth for each requested viewpoint.
    Predict {
        #[arg(long)]
        weights: PathBuf,
        /// Input PPM image, center-cropped and resized to the network size.
        #[arg(long)]
        input: PathBuf,
        /// Azimuths in degrees (repeatable).
        #[arg(long = "az", required = true, allow_negative_numbers = true)]
        az: Vec<f64>,
        /// Elevations; a single value applies to every azimuth.
        #[arg(long = "el", allow_negative_numbers = true)]
        el: Vec<f64>,
        /// Distances; a single value applies to every azimuth.
        #[arg(long = "r")]
        r: Vec<f64>,
    },
    /// Predict the six canonical views and fuse them into a PLY point cloud.
    Fuse {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Error table against the nearest-neighbour baselines and a confusion matrix.
    Eval {
        #[arg(long)]
        weights: PathBuf,
        /// Split file; defaults to <out>/split.txt.
        #[arg(long)]
        split: Option<PathBuf>,
        /// Baseline whose per-model neighbours are listed in neighbours.txt.
        #[arg(long, default_value = "hog+rgb", value_parser = parse_metric)]
        metric: NnMetric,
    },
}

fn parse_metric(s: &str) -> std::result::Result<NnMetric, String> {
    NnMetric::parse(s).ok_or_else(|| format!("unknown metric {s:?} (expected rgb, hog or hog+rgb)"))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 2,
        Error::Numerical(_) => 3,
        Error::Format { .. } => 4,
        Error::Config(_) | Error::Shape { .. } | Error::Invalid(_) => 5,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(5) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("MV3D_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("MV3D_THREADS = {v:?}: expected a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    create_dir(&cfg.out)?;
    match cli.command {
        Command::GenData => gen_data(&cfg),
        Command::Train { resume } => train(&cfg, resume),
        Command::Predict { weights, input, az, el, r } => predict(&cfg, &weights, &input, &az, &el, &r),
        Command::Fuse { weights, input } => fuse_cmd(&cfg, &weights, &input),
        Command::Eval { weights, split, metric } => {
            let split = split.unwrap_or_else(|| cfg.out.join("split.txt"));
            eval(&cfg, &weights, &split, metric)
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn echo_config(cfg: &RunConfig) -> Result<()> {
    write_file(&cfg.out.join("config.txt"), cfg.to_text().as_bytes())
}

fn render_config(cfg: &RunConfig) -> Result<RenderConfig> {
    let mut r = match cfg.mode {
        RenderMode::Realistic => RenderConfig::default(),
        RenderMode::Basic => RenderConfig::basic(),
    };
    if let Some(dir) = &cfg.backgrounds {
        r.background = BackgroundSource::load_dir(dir, cfg.net.size)?;
    }
    Ok(r)
}

fn objects(cfg: &RunConfig) -> Vec<TriMesh> {
    (0..cfg.objects as u64).map(|s| gen_object(cfg.family, s)).collect()
}

fn gen_data(cfg: &RunConfig) -> Result<()> {
    echo_config(cfg)?;
    let rcfg = render_config(cfg)?;
    let size = cfg.net.size;
    if cfg.samples > 0 && cfg.objects == 0 {
        return Err(Error::Config("objects must be positive to render samples".into()));
    }
    let mut manifest = String::new();
    for id in 0..cfg.samples {
        let mut rng = SplitMix64::new(derive_seed(cfg.seed, GEN_STREAM, id as u64));
        let obj_seed = rng.index(cfg.objects) as u64;
        let mesh = gen_object(cfg.family, obj_seed);
        let (vp, lights) = sample_scene(&mut rng, &rcfg);
        let s = render_view(&mesh, vp, &lights, &rcfg, size)?;
        let bg = rcfg.background.draw(&mut rng, size, size);
        let input = composite(&s, &bg, &mut rng, &rcfg)?;
        let file = |kind: &str| cfg.out.join(format!("{id:06}_{kind}"));
        write_ppm(&file("input.ppm"), &input)?;
        write_ppm(&file("rgb.ppm"), &s.rgb)?;
        write_pgm16(&file("depth.pgm"), &s.depth)?;
        write_pgm(&file("mask.pgm"), &s.mask_image())?;
        manifest.push_str(&format!(
            "{id} {} {obj_seed} {:.6} {:.6} {:.6} {}\n",
            cfg.family.name(),
            vp.azimuth,
            vp.elevation,
            vp.distance,
            lights.len()
        ));
    }
    write_file(&cfg.out.join("manifest.txt"), manifest.as_bytes())
}

fn make_split(cfg: &RunConfig, meshes: &[TriMesh]) -> Result<SplitResult> {
    let d = distance_matrix(meshes, cfg.net.size)?;
    split_dataset(&d, cfg.split_fraction, cfg.k_difficult)
}

fn train(cfg: &RunConfig, resume: bool) -> Result<()> {
    echo_config(cfg)?;
    let meshes = objects(cfg);
    let split = make_split(cfg, &meshes)?;
    write_file(&cfg.out.join("split.txt"), split.to_text(cfg.net.size).as_bytes())?;
    let train_set: Vec<TriMesh> = split.train.iter().map(|&i| meshes[i].clone()).collect();
    let tcfg = TrainConfig {
        seed: cfg.seed,
        batch: cfg.batch,
        render: render_config(cfg)?,
        ..TrainConfig::default()
    };
    let ckpt = cfg.out.join("checkpoint.mv3d");
    let log_path = cfg.out.join("loss.txt");
    let mut trainer = if resume {
        let t = load_checkpoint(&ckpt, tcfg, train_set, cfg.net.adversarial, cfg.net.alpha, cfg.net.lambda)?;
        if t.net.config.size != cfg.net.size {
            return Err(Error::Config(format!(
                "checkpoint size {} differs from config size {}",
                t.net.config.size, cfg.net.size
            )));
        }
        t
    } else {
        Trainer::new(Network::new(cfg.net.clone(), cfg.seed)?, tcfg, train_set)?
    };
    let first_step = trainer.step;
    let every = cfg.checkpoint_every;
    let result = trainer.run(cfg.steps, |t| {
        if every > 0 && t.step % every == 0 && t.step < cfg.steps {
            save_checkpoint(&ckpt, t)?;
        }
        Ok(())
    });
    if let Err(e) = result {
        if matches!(e, Error::Numerical(_)) {
            // A failed step leaves the trainer untouched: save it as the last good state.
            save_checkpoint(&ckpt, &trainer)?;
            write_loss_log(&log_path, &trainer.log, resume)?;
            eprintln!("last good checkpoint: {}", ckpt.display());
        }
        return Err(e);
    }
    write_loss_log(&log_path, &trainer.log, resume)?;
    save_checkpoint(&ckpt, &trainer)?;
    mv3d::weights::save_weights(&cfg.out.join("weights.mv3d"), &trainer.net.to_named())?;
    println!(
        "trained steps {}..{}, final loss {}",
        first_step + 1,
        trainer.step,
        trainer.log.last().map(|l| l.1).unwrap_or(f64::NAN)
    );
    Ok(())
}

fn load_network(path: &Path) -> Result<Network> {
    Network::from_named(&load_weights(path)?)
}

fn load_input(path: &Path, size: usize) -> Result<RgbImage> {
    Ok(read_ppm(path)?.center_square_resized(size))
}

fn broadcast(name: &str, values: &[f64], n: usize, default: f64) -> Result<Vec<f64>> {
    match values.len() {
        0 => Ok(vec![default; n]),
        1 => Ok(vec![values[0]; n]),
        k if k == n => Ok(values.to_vec()),
        k => Err(Error::Config(format!("--{name} given {k} times for {n} azimuths"))),
    }
}

fn predict(cfg: &RunConfig, weights: &Path, input: &Path, az: &[f64], el: &[f64], r: &[f64]) -> Result<()> {
    let net = load_network(weights)?;
    let image = load_input(input, net.config.size)?;
    let el = broadcast("el", el, az.len(), 20.0)?;
    let r = broadcast("r", r, az.len(), 2.0)?;
    let views: Vec<Viewpoint> = (0..az.len()).map(|i| Viewpoint::new(az[i], el[i], r[i])).collect();
    for vp in &views {
        if !(vp.azimuth.is_finite() && vp.elevation.is_finite() && vp.distance.is_finite() && vp.distance > 0.0) {
            return Err(Error::Config(format!("invalid viewpoint {vp:?}")));
        }
    }
    let outputs = net.predict(&image.to_tensor(), &views)?;
    for (k, (rgb, depth)) in outputs.iter().enumerate() {
        write_ppm(&cfg.out.join(format!("view{k}_rgb.ppm")), &RgbImage::from_tensor(rgb)?)?;
        write_pgm16(
            &cfg.out.join(format!("view{k}_depth.pgm")),
            &depth_from_prediction(depth, PREDICTED_BACKGROUND)?,
        )?;
    }
    Ok(())
}

fn fuse_cmd(cfg: &RunConfig, weights: &Path, input: &Path) -> Result<()> {
    let net = load_network(weights)?;
    let size = net.config.size;
    let image = load_input(input, size)?;
    let vps = canonical_views(2.0);
    let outputs = net.predict(&image.to_tensor(), &vps)?;
    let views = vps
        .iter()
        .zip(&outputs)
        .map(|(vp, (rgb, depth))| {
            Ok(View {
                depth: depth_from_prediction(depth, PREDICTED_BACKGROUND)?,
                rgb: RgbImage::from_tensor(rgb)?,
                camera: camera_from_viewpoint(vp, &RenderConfig::default(), size, size)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cloud = fuse(&views, FuseOptions::default())?;
    write_ply(&cfg.out.join("cloud.ply"), &cloud)?;
    println!("{} points", cloud.len());
    Ok(())
}

fn eval(cfg: &RunConfig, weights: &Path, split_path: &Path, metric: NnMetric) -> Result<()> {
    echo_config(cfg)?;
    let net = load_network(weights)?;
    let text = std::fs::read_to_string(split_path).map_err(|e| Error::Io {
        path: split_path.to_path_buf(),
        source: e,
    })?;
    let (split, size) = SplitResult::parse(&text)?;
    if size != net.config.size {
        return Err(Error::Config(format!(
            "split was made at image size {size}, weights expect {}",
            net.config.size
        )));
    }
    let meshes = objects(cfg);
    let mut all = split.train.iter().chain(&split.test_normal).chain(&split.test_difficult);
    if let Some(&bad) = all.find(|&&i| i >= meshes.len()) {
        return Err(Error::Config(format!("split model {bad} exceeds configured object count {}", meshes.len())));
    }
    let pick = |ids: &[usize]| -> Vec<TriMesh> { ids.iter().map(|&i| meshes[i].clone()).collect() };
    let (train, normal, difficult) = (pick(&split.train), pick(&split.test_normal), pick(&split.test_difficult));
    let protocol = EvalProtocol {
        seed: cfg.seed,
        ..EvalProtocol::default()
    };
    let report = evaluate(&net, &train, &normal, &difficult, &protocol)?;
    write_file(&cfg.out.join("report.txt"), report.to_text().as_bytes())?;
    print!("{}", report.to_text());

    let conf_objects = &normal[..cfg.confusion_objects.min(normal.len())];
    if !conf_objects.is_empty() {
        let m = confusion_matrix(&net, conf_objects, &[0.0, 30.0], 2.0, cfg.seed)?;
        write_file(&cfg.out.join("confusion.txt"), m.to_text().as_bytes())?;
        write_ppm(&cfg.out.join("confusion.ppm"), &m.heatmap(8))?;
        let (near, far) = m.near_far_means(30.0, 150.0);
        println!("confusion near {near:.6} far {far:.6}");
    }

    // Neighbours chosen by the selected baseline, for inspection.
    let mut lines = String::new();
    for &vp in &protocol.input_views {
        let candidates = train
            .iter()
            .map(|m| Described::new(clean_render(m, vp, size)?.0))
            .collect::<Result<Vec<_>>>()?;
        for (ids, set) in [(&split.test_normal, &normal), (&split.test_difficult, &difficult)] {
            for (&id, mesh) in ids.iter().zip(set.iter()) {
                let q = Described::new(clean_render(mesh, vp, size)?.0)?;
                let nn = split.train[nn_select(&q, &candidates, metric)?];
                lines.push_str(&format!("{id} {} {nn}\n", vp.azimuth));
            }
        }
    }
    write_file(&cfg.out.join("neighbours.txt"), lines.as_bytes())
}
