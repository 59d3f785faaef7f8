//! `semrad`: bake, render, super-resolve and measure semantic part fields.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use semrad::bench::{bench, write_csv, BenchConfig};
use semrad::compositing::{DensityConfig, DensitySign};
use semrad::field::{load_pack, save_pack, Recipe, SemanticScene, Vec3};
use semrad::io::{write_atomic, write_json};
use semrad::metrics::{garment_extraction_check, mae_per_channel, psnr, upsample_consistency, MetricReport};
use semrad::oracle::render_dense_oracle;
use semrad::render::{render_lowres, Camera, CameraSpec, Pose, PoseSpec, RenderBuffers, RenderOptions};
use semrad::superres::{superres, upsample_triplanes, SuperResOptions, SuperResStats, DEFAULT_DELTA};

const RUN_FILE: &str = "run.json";

#[derive(Parser, Debug)]
#[command(name = "semrad", version, about, args_conflicts_with_subcommands = true)]
struct Cli {
    /// Replay a run from its `run.json`.
    #[arg(long, value_name = "RUN_JSON", value_parser = existing_path)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
enum Command {
    /// Bake a scene recipe into a tri-plane pack.
    Bake(BakeArgs),
    /// Dense low-resolution render.
    Render(RenderArgs),
    /// Guided super-resolution from a low-res render.
    Superres(SuperresArgs),
    /// Dense reference render, optionally on upsampled planes.
    Oracle(OracleArgs),
    /// Compare two renders and optionally run the extraction check.
    Metrics(MetricsArgs),
    /// Time the dense and guided paths.
    Bench(BenchArgs),
    /// Render a pose sequence or camera orbit through the guided path.
    Animate(AnimateArgs),
}

fn existing_path(s: &str) -> std::result::Result<PathBuf, String> {
    std::fs::canonicalize(s).map_err(|e| format!("{s}: {e}"))
}

fn range_f64(lo: f64, hi: f64) -> impl Fn(&str) -> std::result::Result<f64, String> + Clone {
    move |s: &str| {
        let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
        if v.is_finite() && v > lo && v <= hi {
            Ok(v)
        } else {
            Err(format!("must be in ({lo}, {hi}]"))
        }
    }
}

fn density_sign(s: &str) -> std::result::Result<i32, String> {
    match s {
        "-1" => Ok(-1),
        "1" | "+1" => Ok(1),
        _ => Err("must be -1 or 1".into()),
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct DensityArgs {
    /// Sigmoid length scale.
    #[arg(long, default_value_t = 0.005, value_parser = range_f64(0.0, 1.0))]
    beta: f64,
    /// -1 is dense inside the surface, 1 is the literal outside form.
    #[arg(long, default_value_t = -1, allow_hyphen_values = true, value_parser = density_sign)]
    density_sign: i32,
    #[arg(long, default_value_t = 200.0, value_parser = range_f64(0.0, 1e6))]
    density_scale: f64,
}

impl DensityArgs {
    fn config(&self) -> Result<DensityConfig> {
        let sign = DensitySign::from_value(self.density_sign).context("--density-sign must be -1 or 1")?;
        let cfg = DensityConfig {
            beta: self.beta,
            sign,
            scale: self.density_scale,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct ViewArgs {
    #[arg(long, value_parser = existing_path)]
    pack: PathBuf,
    /// Bone name to axis-angle JSON; identity when omitted.
    #[arg(long, value_parser = existing_path)]
    pose: Option<PathBuf>,
    /// Camera JSON; its resolution is replaced by `--res`.
    #[arg(long, value_parser = existing_path)]
    camera: Option<PathBuf>,
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u32).range(1..=8192))]
    res: u32,
    /// Thread cap; 0 uses every core.
    #[arg(long, env = "SEMRAD_WORKERS", default_value_t = 0)]
    workers: usize,
    #[command(flatten)]
    #[serde(flatten)]
    density: DensityArgs,
}

struct View {
    scene: SemanticScene,
    pose: Pose,
    camera: Camera,
    pivot: Vec3,
    cfg: DensityConfig,
}

impl ViewArgs {
    fn load(&self) -> Result<View> {
        let scene = load_pack(&self.pack).with_context(|| format!("loading {}", self.pack.display()))?;
        let pose = match &self.pose {
            Some(p) => Pose::load(scene.skeleton(), p).with_context(|| format!("loading {}", p.display()))?,
            None => Pose::identity(scene.skeleton()),
        };
        let res = self.res as usize;
        let mut spec = match &self.camera {
            Some(p) => CameraSpec::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => CameraSpec::front(res),
        };
        spec.width = res;
        spec.height = res;
        let camera = Camera::from_spec(&spec)?;
        Ok(View {
            pose,
            camera,
            pivot: Vec3::from(spec.look_at),
            cfg: self.density.config()?,
            scene,
        })
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SampleArgs {
    /// Stratified samples per ray; the importance pass draws as many again.
    #[arg(long, default_value_t = 36, value_parser = clap::value_parser!(u32).range(1..=4096))]
    samples: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bin midpoints instead of jittered strata.
    #[arg(long)]
    no_jitter: bool,
}

impl SampleArgs {
    fn options(&self, workers: usize) -> RenderOptions {
        RenderOptions {
            n_coarse: self.samples as usize,
            n_fine: self.samples as usize,
            jitter: !self.no_jitter,
            seed: self.seed,
            workers,
            ..Default::default()
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct GuideArgs {
    /// Depth probe offset; defaults to one coarse step, (far - near) / 72.
    #[arg(long, value_parser = range_f64(0.0, 1e3))]
    tau: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_DELTA, value_parser = range_f64(0.0, 1.0))]
    delta: f64,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..=16))]
    factor: u32,
    /// Candidates from the centre pixel only.
    #[arg(long)]
    no_aggregate: bool,
}

impl GuideArgs {
    fn options(&self, workers: usize) -> SuperResOptions {
        SuperResOptions {
            factor: self.factor as usize,
            tau: self.tau,
            delta: self.delta,
            aggregate: !self.no_aggregate,
            workers,
            ..Default::default()
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct BakeArgs {
    /// Recipe JSON path, or a built-in name: `default`, `occlusion`.
    #[arg(long, default_value = "default")]
    scene: String,
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u32).range(2..=8192))]
    res: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct RenderArgs {
    #[command(flatten)]
    #[serde(flatten)]
    view: ViewArgs,
    #[command(flatten)]
    #[serde(flatten)]
    sampling: SampleArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SuperresArgs {
    /// `--res` is the low-res size, which must match this render.
    #[command(flatten)]
    #[serde(flatten)]
    view: ViewArgs,
    /// Output directory of `render`.
    #[arg(long, value_parser = existing_path)]
    lowres: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    guide: GuideArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct OracleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    view: ViewArgs,
    /// Samples per pass; 72 stratified plus 72 importance by default.
    #[arg(long, default_value_t = 72, value_parser = clap::value_parser!(u32).range(1..=4096))]
    samples: u32,
    /// Render on planes upsampled by this factor; 1 keeps the baked planes.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..=16))]
    planes_factor: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct MetricsArgs {
    /// Render directory under test.
    #[arg(long, value_parser = existing_path)]
    test: PathBuf,
    /// Reference render directory at the same resolution.
    #[arg(long, value_parser = existing_path)]
    reference: Option<PathBuf>,
    /// Low-res render the test directory was upsampled from.
    #[arg(long, value_parser = existing_path)]
    lowres: Option<PathBuf>,
    /// Also run the extraction check for every enabled part of this pack.
    #[arg(long, value_parser = existing_path)]
    extract_pack: Option<PathBuf>,
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u32).range(1..=8192))]
    extract_res: u32,
    #[arg(long, env = "SEMRAD_WORKERS", default_value_t = 0)]
    workers: usize,
    #[command(flatten)]
    #[serde(flatten)]
    density: DensityArgs,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct BenchArgs {
    #[command(flatten)]
    #[serde(flatten)]
    view: ViewArgs,
    /// Comma-separated worker counts.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    worker_counts: Vec<usize>,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..=16))]
    factor: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct AnimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    view: ViewArgs,
    /// JSON array of poses, interpolated evenly over the frames.
    #[arg(long, value_parser = existing_path)]
    poses: Option<PathBuf>,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..=100000))]
    frames: u32,
    /// Orbit the camera a full turn about its look-at point.
    #[arg(long)]
    orbit: bool,
    #[command(flatten)]
    #[serde(flatten)]
    sampling: SampleArgs,
    #[command(flatten)]
    #[serde(flatten)]
    guide: GuideArgs,
    #[arg(long)]
    out: PathBuf,
}

fn save_run(path: &Path, command: &Command) -> Result<()> {
    write_json(path, command)?;
    Ok(())
}

fn bake(a: &BakeArgs, command: &Command) -> Result<()> {
    let recipe = match Recipe::builtin(&a.scene) {
        Some(r) if !Path::new(&a.scene).exists() => r,
        _ => Recipe::load(&a.scene).with_context(|| format!("loading recipe {}", a.scene))?,
    };
    let scene = recipe.bake(a.res as usize)?;
    save_pack(&scene, &a.out)?;
    save_run(&sidecar(&a.out), command)
}

/// Run file next to a single-file output: `scene.pack` -> `scene.pack.run.json`.
fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(RUN_FILE);
    out.with_file_name(name)
}

fn render(a: &RenderArgs, command: &Command) -> Result<()> {
    let v = a.view.load()?;
    let r = render_lowres(&v.scene, &v.pose, &v.camera, &v.cfg, &a.sampling.options(a.view.workers))?;
    r.buffers.save(&a.out)?;
    save_run(&a.out.join(RUN_FILE), command)
}

fn run_superres(a: &SuperresArgs, command: &Command) -> Result<SuperResStats> {
    let v = a.view.load()?;
    let lowres = RenderBuffers::load(&a.lowres).with_context(|| format!("loading {}", a.lowres.display()))?;
    let sr = superres(&v.scene, &v.pose, &v.camera, &lowres, &v.cfg, &a.guide.options(a.view.workers))?;
    sr.save(&a.out)?;
    save_run(&a.out.join(RUN_FILE), command)?;
    Ok(sr.stats)
}

fn oracle(a: &OracleArgs, command: &Command) -> Result<()> {
    let v = a.view.load()?;
    let res = a.view.res as usize;
    let factor = a.planes_factor as usize;
    let hi = (factor > 1).then(|| upsample_triplanes(&v.scene, factor)).transpose()?;
    let opts = RenderOptions {
        n_coarse: a.samples as usize,
        n_fine: a.samples as usize,
        ..semrad::oracle::oracle_options(a.view.workers)
    };
    let camera = v.camera.with_resolution(res, res);
    let r = render_dense_oracle(&v.scene, hi.as_ref(), &v.pose, &camera, &v.cfg, &opts)?;
    r.buffers.save(&a.out)?;
    save_run(&a.out.join(RUN_FILE), command)
}

fn metrics(a: &MetricsArgs, command: &Command) -> Result<()> {
    let mut report = MetricReport::default();
    let t = Instant::now();
    let test = RenderBuffers::load(&a.test)?;
    report.wall_times.insert("load".into(), t.elapsed().as_secs_f64());
    if let Ok(text) = std::fs::read_to_string(a.test.join("stats.json")) {
        let stats: SuperResStats = serde_json::from_str(&text).context("parsing stats.json")?;
        report.eval_counts.guided = stats.evaluations_guided;
        report.eval_counts.dense = stats.evaluations_dense_equivalent;
    }
    if let Some(dir) = &a.reference {
        let reference = RenderBuffers::load(dir)?;
        let t = Instant::now();
        report.psnr = Some(psnr(&test.color, &reference.color)?);
        report.mae = mae_per_channel(&test.color, &reference.color)?;
        report.wall_times.insert("compare".into(), t.elapsed().as_secs_f64());
    }
    if let Some(dir) = &a.lowres {
        let lo = RenderBuffers::load(dir)?;
        report.upsample_consistency = Some(upsample_consistency(&test.color, &lo.color)?);
    }
    if let Some(pack) = &a.extract_pack {
        let scene = load_pack(pack)?;
        let pose = Pose::identity(scene.skeleton());
        let res = a.extract_res as usize;
        let camera = Camera::from_spec(&CameraSpec::front(res))?;
        let cfg = a.density.config()?;
        let opts = RenderOptions {
            jitter: false,
            workers: a.workers,
            ..Default::default()
        };
        let t = Instant::now();
        let full = render_lowres(&scene, &pose, &camera, &cfg, &opts)?.buffers;
        for k in scene.enabled_mask().iter() {
            report
                .extraction
                .push(garment_extraction_check(&scene, k, &pose, &camera, &cfg, &opts, Some(&full))?);
        }
        report.wall_times.insert("extraction".into(), t.elapsed().as_secs_f64());
    }
    match &a.out {
        Some(path) => {
            write_json(path, &report)?;
            save_run(&sidecar(path), command)?;
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn run_bench(a: &BenchArgs, command: &Command) -> Result<()> {
    let v = a.view.load()?;
    if a.worker_counts.is_empty() {
        bail!("--worker-counts is empty");
    }
    let config = BenchConfig {
        low_res: a.view.res as usize,
        factor: a.factor as usize,
        workers: a.worker_counts.clone(),
        ..Default::default()
    };
    let rows = bench(&v.scene, &v.pose, &v.camera, &v.cfg, &config)?;
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf)?;
    write_atomic(&a.out, &buf)?;
    save_run(&sidecar(&a.out), command)
}

fn load_pose_sequence(scene: &SemanticScene, path: &Path) -> Result<Vec<Pose>> {
    let text = std::fs::read_to_string(path)?;
    let specs: Vec<PoseSpec> = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if specs.is_empty() {
        bail!("{} holds no poses", path.display());
    }
    specs
        .iter()
        .map(|s| Pose::from_spec(scene.skeleton(), s).map_err(Into::into))
        .collect()
}

/// Pose at frame `i` of `n`, spreading the keyframes evenly.
fn pose_at(keys: &[Pose], i: usize, n: usize) -> Pose {
    if keys.len() == 1 || n == 1 {
        return keys[0].clone();
    }
    let s = i as f64 * (keys.len() - 1) as f64 / (n - 1) as f64;
    let k = (s.floor() as usize).min(keys.len() - 2);
    keys[k].interpolate(&keys[k + 1], s - k as f64)
}

fn frame_dir(out: &Path, i: usize) -> PathBuf {
    out.join(format!("frame_{i:03}"))
}

fn animate(a: &AnimateArgs, command: &Command) -> Result<()> {
    let v = a.view.load()?;
    let keys = match &a.poses {
        Some(p) => load_pose_sequence(&v.scene, p)?,
        None => vec![v.pose.clone()],
    };
    let n = a.frames as usize;
    let ropts = a.sampling.options(a.view.workers);
    let sopts = a.guide.options(a.view.workers);
    for i in 0..n {
        let pose = pose_at(&keys, i, n);
        let camera = if a.orbit {
            let angle = std::f64::consts::TAU * i as f64 / n as f64;
            v.camera.rotated_about(&v.pivot, &Rotation3::from_axis_angle(&Vector3::y_axis(), angle))
        } else {
            v.camera.clone()
        };
        let lo = render_lowres(&v.scene, &pose, &camera, &v.cfg, &ropts)?;
        let sr = superres(&v.scene, &pose, &camera, &lo.buffers, &v.cfg, &sopts)?;
        sr.save(frame_dir(&a.out, i))?;
    }
    save_run(&a.out.join(RUN_FILE), command)
}

fn absolute(p: &mut PathBuf) -> Result<()> {
    *p = std::path::absolute(&*p)?;
    Ok(())
}

impl Command {
    /// Makes output paths absolute so the recorded run replays from anywhere.
    fn absolutize(&mut self) -> Result<()> {
        match self {
            Command::Bake(a) => {
                if Path::new(&a.scene).exists() {
                    a.scene = std::path::absolute(&a.scene)?.to_string_lossy().into_owned();
                }
                absolute(&mut a.out)
            }
            Command::Render(a) => absolute(&mut a.out),
            Command::Superres(a) => absolute(&mut a.out),
            Command::Oracle(a) => absolute(&mut a.out),
            Command::Metrics(a) => a.out.as_mut().map_or(Ok(()), absolute),
            Command::Bench(a) => absolute(&mut a.out),
            Command::Animate(a) => absolute(&mut a.out),
        }
    }
}

fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Bake(a) => bake(a, command),
        Command::Render(a) => render(a, command),
        Command::Superres(a) => {
            let stats = run_superres(a, command)?;
            eprintln!(
                "guided {} / dense {} evaluations (ratio {:.4}), {:.3} open gates per foreground pixel",
                stats.evaluations_guided, stats.evaluations_dense_equivalent, stats.reduction_ratio, stats.open_gates_mean
            );
            Ok(())
        }
        Command::Oracle(a) => oracle(a, command),
        Command::Metrics(a) => metrics(a, command),
        Command::Bench(a) => run_bench(a, command),
        Command::Animate(a) => animate(a, command),
    }
}

/// Re-validates a replayed run the way the parser would have.
fn check_replay(command: &Command) -> Result<()> {
    let inputs: Vec<&PathBuf> = match command {
        Command::Bake(_) => vec![],
        Command::Render(a) => view_inputs(&a.view),
        Command::Superres(a) => [view_inputs(&a.view), vec![&a.lowres]].concat(),
        Command::Oracle(a) => view_inputs(&a.view),
        Command::Metrics(a) => [Some(&a.test), a.reference.as_ref(), a.lowres.as_ref(), a.extract_pack.as_ref()]
            .into_iter()
            .flatten()
            .collect(),
        Command::Bench(a) => view_inputs(&a.view),
        Command::Animate(a) => [view_inputs(&a.view), a.poses.iter().collect()].concat(),
    };
    for p in inputs {
        if !p.exists() {
            bail!("{} does not exist", p.display());
        }
    }
    Ok(())
}

fn view_inputs(v: &ViewArgs) -> Vec<&PathBuf> {
    [Some(&v.pack), v.pose.as_ref(), v.camera.as_ref()].into_iter().flatten().collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let command = match (cli.config, cli.command) {
        (Some(path), None) => {
            let parsed = std::fs::read_to_string(&path)
                .map_err(anyhow::Error::from)
                .and_then(|t| serde_json::from_str::<Command>(&t).map_err(Into::into))
                .and_then(|c| check_replay(&c).map(|_| c));
            match parsed {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: bad run file {}: {e:#}", path.display());
                    return ExitCode::from(1);
                }
            }
        }
        (None, Some(c)) => c,
        _ => {
            eprintln!("error: a subcommand or --config is required\n\nFor more information, try '--help'.");
            return ExitCode::from(1);
        }
    };
    let mut command = command;
    match command.absolutize().and_then(|_| execute(&command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn keyframes_are_spread_over_the_frames() {
        let scene = Recipe::default_figure().bake(8).unwrap();
        let sk = scene.skeleton();
        let a = Pose::identity(sk);
        let mut b = a.clone();
        b.set_rotation(1, &Rotation3::from_axis_angle(&Vector3::x_axis(), 0.8));
        let keys = [a.clone(), b.clone()];
        assert_eq!(pose_at(&keys, 0, 5), a);
        let end = pose_at(&keys, 4, 5);
        assert!((end.rotation(1).angle() - 0.8).abs() < 1e-12);
        let mid = pose_at(&keys, 2, 5);
        assert!((mid.rotation(1).angle() - 0.4).abs() < 1e-9);
        assert_eq!(pose_at(&keys[..1], 3, 5), a);
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar(Path::new("/x/scene.pack")), PathBuf::from("/x/scene.pack.run.json"));
    }
}
