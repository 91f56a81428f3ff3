//! Command-line front end. [`dispatch`] parses `argv`, runs one subcommand
//! and returns the process exit code: 0 on success, 1 on usage errors
//! (unknown flags or config keys, bad values), 2 on data errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::mesh::{edge_unpool, load_obj, save_obj, JointRules, Point3, TriMesh};
use crate::metrics::{self, EvalSet};
use crate::nn::train::{self, AffineSynthConfig, TrainConfig};
use crate::nn::{load_checkpoint, save_checkpoint, AffineNet, NetConfig, SrNet, SrNetConfig, Tensor4};
use crate::srdata::{self, IcpParams, PairRecord, SrSynthConfig, SrTemplates};
use crate::toy::ToyHand;
use crate::uv::{load_template, read_uvp, write_uvp, NormalizationCube, UvCodec, UvForm, UvTemplate};
use crate::warp::Camera;

#[derive(Debug, Parser)]
#[command(name = "uvhand", version, about = "UV position maps for 3D hand meshes")]
pub struct Cli {
    /// Worker threads (falls back to UVHAND_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for every random choice of the subcommand.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print the effective configuration to stderr.
    #[arg(long, global = true)]
    pub verbose: bool,
    /// `key = value` file; keys are long flag names of the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mesh to UV position map.
    Encode(EncodeArgs),
    /// UV position map to mesh.
    Decode(DecodeArgs),
    /// Edge-based unpooling (midpoint subdivision).
    Unpool(UnpoolArgs),
    /// Rigid or similarity ICP of a mesh onto a PLY point cloud.
    Register(RegisterArgs),
    /// In-mask Gaussian smoothing of a UV map.
    Smooth(SmoothArgs),
    /// Low/high-resolution training pair from a coarse and a dense mesh.
    SrPair(SrPairArgs),
    /// Train a toy network on synthetic hands.
    TrainToy(TrainToyArgs),
    /// Apply a trained refinement network to a UV map.
    SrInfer(SrInferArgs),
    /// Metrics report for predicted against ground-truth meshes.
    Eval(EvalArgs),
    /// Z-buffer depth map of a mesh as 16-bit PNG (millimeters).
    RenderDepth(RenderDepthArgs),
    /// Finite-difference checks of every analytic gradient.
    Gradcheck(GradcheckArgs),
}

/// A built-in toy template (`toy:uv1`, `toy:uv2`, `toy:uv3`) or an OBJ path.
#[derive(Debug, Args)]
pub struct TemplateArg {
    #[arg(long)]
    pub template: String,
}

#[derive(Debug, Args)]
pub struct CubeArgs {
    /// Cube centre `x,y,z` in meters (default: mesh bounding-box centre).
    #[arg(long, value_parser = parse_point)]
    pub cube_center: Option<Point3>,
    #[arg(long, default_value_t = crate::uv::DEFAULT_HALF_EXTENT)]
    pub cube_half: f64,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[command(flatten)]
    pub template: TemplateArg,
    #[arg(long, default_value_t = 256)]
    pub res: usize,
    #[command(flatten)]
    pub cube: CubeArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a 16-bit RGB preview.
    #[arg(long)]
    pub png: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub uvp: PathBuf,
    #[command(flatten)]
    pub template: TemplateArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct UnpoolArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    /// Mesh to move.
    #[arg(long)]
    pub mesh: PathBuf,
    /// PLY point cloud.
    #[arg(long)]
    pub scan: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 2.5)]
    pub reject_factor: f64,
    /// Estimate a uniform scale as well.
    #[arg(long)]
    pub scale: bool,
    /// Iterations of scan-attraction plus Laplacian smoothing after ICP.
    #[arg(long, default_value_t = 0)]
    pub nonrigid: usize,
    #[arg(long, default_value_t = 0.5)]
    pub smooth_weight: f64,
    /// JSON report with the transform and residual history.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    #[arg(long)]
    pub uvp: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SrPairArgs {
    #[arg(long)]
    pub coarse: PathBuf,
    #[arg(long)]
    pub dense: PathBuf,
    #[command(flatten)]
    pub template: TemplateArg,
    #[arg(long, default_value_t = 256)]
    pub res: usize,
    #[command(flatten)]
    pub cube: CubeArgs,
    /// Also emit the smoothed low map with this sigma (pixels).
    #[arg(long)]
    pub smooth: Option<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Name stem of the written maps.
    #[arg(long, default_value = "pair")]
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ToyNet {
    Affinenet,
    Srnet,
}

#[derive(Debug, Args)]
pub struct TrainToyArgs {
    #[arg(value_enum)]
    pub net: ToyNet,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Constant learning rate instead of cosine decay.
    #[arg(long)]
    pub no_cosine: bool,
    #[arg(long, default_value_t = 64)]
    pub res: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SrInferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted meshes, paired in order with `--gt`.
    #[arg(long, required = true)]
    pub pred: Vec<PathBuf>,
    #[arg(long, required = true)]
    pub gt: Vec<PathBuf>,
    /// Joint regression rules; enables pose error and PCK.
    #[arg(long)]
    pub joint_rules: Option<PathBuf>,
    /// Align each prediction to its ground truth first.
    #[arg(long)]
    pub procrustes: bool,
    /// Also compare depth maps rendered at this size.
    #[arg(long)]
    pub depth_res: Option<usize>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// PCK/PCV curve export.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderDepthArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub res: usize,
    /// Orthographic pixels per meter (default: fit the mesh with a margin).
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Float width of the checks; only 64 is supported.
    #[arg(long, default_value_t = 64)]
    pub bits: u32,
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
}

fn parse_point(s: &str) -> std::result::Result<Point3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<std::result::Result<_, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|_| "expected x,y,z".to_string())
}

/// Failure categories mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Usage(m),
            e => Failure::Data(e),
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected key = value, got '{line}'"),
        })?;
        out.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(out)
}

/// Folds config-file values into `argv` for every option not given on the
/// command line. Unknown keys are usage errors.
fn merge_config(argv: &[OsString], config: &Path, verbose: bool) -> std::result::Result<Vec<OsString>, Failure> {
    let text = std::fs::read_to_string(config).map_err(|e| Failure::Data(Error::io(config, e)))?;
    let kv = parse_config(&text).map_err(|e| Failure::Usage(e.to_string()))?;
    let cmd = Cli::command();
    let matches = cmd.clone().ignore_errors(true).try_get_matches_from(argv).map_err(|e| Failure::Usage(e.to_string()))?;
    let (sub_name, sub_matches) = matches.subcommand().expect("subcommand is required");
    let sub = cmd.find_subcommand(sub_name).expect("parsed subcommand exists");

    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in &kv {
        let named = |a: &&clap::Arg| a.get_long() == Some(key.as_str()) && a.get_id() != "config";
        // look the id up only in the matches that define it
        let (arg, owner) = match sub.get_arguments().find(named) {
            Some(a) => (a, sub_matches),
            None => cmd
                .get_arguments()
                .find(named)
                .map(|a| (a, &matches))
                .ok_or_else(|| Failure::Usage(format!("unknown config key '{key}' for '{sub_name}'")))?,
        };
        let on_cli = owner.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine);
        let source = if on_cli { "flag" } else { "config" };
        if verbose {
            eprintln!("config {key} = {value} ({source})");
        }
        if on_cli {
            continue;
        }
        let takes_value = arg.get_num_args().is_none_or(|n| n.takes_values());
        if takes_value {
            extra.push(format!("--{key}").into());
            extra.push(value.into());
        } else {
            match value.as_str() {
                "true" | "1" | "yes" => extra.push(format!("--{key}").into()),
                "false" | "0" | "no" => {}
                v => return Err(Failure::Usage(format!("config key '{key}' expects true/false, got '{v}'"))),
            }
        }
    }
    // options go right after the subcommand name so that positionals stay put
    let pos = argv
        .iter()
        .position(|a| a.to_str() == Some(sub_name))
        .map(|p| p + 1)
        .unwrap_or(argv.len());
    let mut out = argv[..pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[pos..]);
    Ok(out)
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    match run_argv(&argv) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("{msg}");
            1
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run_argv(argv: &[OsString]) -> std::result::Result<(), Failure> {
    // lenient pass: required options may still come from the config file
    let loose = Cli::command().ignore_errors(true).try_get_matches_from(argv).ok();
    let config = loose.as_ref().and_then(|m| m.get_one::<PathBuf>("config").cloned());
    let verbose = loose.as_ref().is_some_and(|m| m.get_flag("verbose"));
    let argv = match &config {
        Some(path) if loose.as_ref().is_some_and(|m| m.subcommand().is_some()) => merge_config(argv, path, verbose)?,
        _ => argv.to_vec(),
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err(Failure::Usage(e.render().to_string()));
        }
    };
    let threads = match cli.threads {
        Some(n) => Some(n),
        None => match std::env::var("UVHAND_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| Failure::Usage(format!("UVHAND_THREADS='{v}' is not a count")))?,
            ),
            Err(_) => None,
        },
    };
    if threads == Some(0) {
        return Err(Failure::Usage("--threads must be positive".into()));
    }
    if cli.verbose {
        eprintln!("threads = {threads:?}, seed = {:?}", cli.seed);
        eprintln!("{:#?}", cli.command);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    pool.install(|| run(&cli))
}

fn template_from(spec: &str) -> Result<UvTemplate> {
    if let Some(form) = spec.strip_prefix("toy:") {
        let form = UvForm::parse(form)
            .filter(|f| matches!(f, UvForm::Uv1 | UvForm::Uv2 | UvForm::Uv3))
            .ok_or_else(|| Error::Config(format!("unknown toy template '{form}' (uv1, uv2, uv3)")))?;
        return Ok(ToyHand::default().template(form));
    }
    load_template(spec)
}

fn cube_for(mesh: &TriMesh, c: &CubeArgs) -> Result<NormalizationCube> {
    let center = c.cube_center.unwrap_or_else(|| {
        let (lo, hi) = mesh.bounds();
        [0, 1, 2].map(|k| 0.5 * (lo[k] + hi[k]))
    });
    NormalizationCube::new(center, c.cube_half)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Orthographic camera framing `mesh` in a `res`-pixel square with a 5%
/// margin.
fn fit_camera(mesh: &TriMesh, res: usize, scale: Option<f64>) -> Result<Camera> {
    let (lo, hi) = mesh.bounds();
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
    let s = scale.unwrap_or(0.9 * res as f64 / span);
    let c = 0.5 * (res as f64 - 1.0);
    Camera::orthographic(s, c - s * 0.5 * (lo[0] + hi[0]), c - s * 0.5 * (lo[1] + hi[1]))
}

fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Encode(a) => {
            let mesh = load_obj(&a.mesh)?;
            let template = template_from(&a.template.template)?;
            let codec = UvCodec::new(&template, a.res, a.res)?;
            let cube = cube_for(&mesh, &a.cube)?;
            let (map, clamped) = codec.encode_with_report(&mesh, &cube)?;
            write_uvp(&map, &a.out)?;
            if let Some(png) = &a.png {
                crate::uv::export_png(&map, png)?;
            }
            println!(
                "wrote {} ({}x{}, {} in-mask pixels, {clamped} clamped vertices)",
                a.out.display(),
                a.res,
                a.res,
                codec.mask().count()
            );
        }
        Command::Decode(a) => {
            let map = read_uvp(&a.uvp)?;
            let template = template_from(&a.template.template)?;
            let codec = UvCodec::new(&template, map.width, map.height)?;
            let mesh = codec.decode(&map)?;
            save_obj(&mesh, &a.out)?;
            println!("wrote {} ({} vertices)", a.out.display(), mesh.vertex_count());
        }
        Command::Unpool(a) => {
            let mesh = load_obj(&a.mesh)?;
            let dense = edge_unpool(&mesh)?;
            save_obj(&dense, &a.out)?;
            println!("vertices {} faces {}", dense.vertex_count(), dense.face_count());
        }
        Command::Register(a) => {
            let mesh = load_obj(&a.mesh)?;
            let scan = srdata::load_ply(&a.scan)?;
            let params = IcpParams {
                max_iterations: a.max_iter,
                tolerance: a.tolerance,
                reject_factor: a.reject_factor,
                estimate_scale: a.scale,
                ..Default::default()
            };
            let r = srdata::icp_register(&mesh, &scan, &params)?;
            let fitted = if a.nonrigid > 0 {
                srdata::refine_nonrigid(&r.mesh, &scan, a.nonrigid, a.smooth_weight)?
            } else {
                r.mesh.clone()
            };
            save_obj(&fitted, &a.out)?;
            println!(
                "iterations {} residual {:.6e} -> {:.6e} m",
                r.iterations,
                r.residuals[0],
                r.residuals.last().copied().unwrap_or(f64::NAN)
            );
            if let Some(path) = &a.report {
                let report = serde_json::json!({
                    "transform": r.transform,
                    "residuals": r.residuals,
                    "iterations": r.iterations,
                    "converged": r.converged,
                });
                write_json(path, &report)?;
            }
        }
        Command::Smooth(a) => {
            let map = read_uvp(&a.uvp)?;
            let out = srdata::gaussian_smooth_uv(&map, a.sigma)?;
            write_uvp(&out, &a.out)?;
            println!("wrote {}", a.out.display());
        }
        Command::SrPair(a) => {
            let coarse = load_obj(&a.coarse)?;
            let dense = load_obj(&a.dense)?;
            let templates = SrTemplates::new(&template_from(&a.template.template)?, a.res)?;
            let cube = cube_for(&coarse, &a.cube)?;
            let pair = srdata::make_sr_pair(&coarse, &dense, &templates, &cube, a.smooth)?;
            create_dir(&a.out_dir)?;
            let low = a.out_dir.join(format!("{}_low.uvp", a.name));
            let high = a.out_dir.join(format!("{}_high.uvp", a.name));
            write_uvp(&pair.low, &low)?;
            write_uvp(&pair.high, &high)?;
            let mut records = vec![PairRecord {
                low_path: low,
                high_path: high.clone(),
                cube: (&cube).into(),
            }];
            if let Some(s) = &pair.low_smoothed {
                let p = a.out_dir.join(format!("{}_low_smooth.uvp", a.name));
                write_uvp(s, &p)?;
                records.push(PairRecord {
                    low_path: p,
                    high_path: high,
                    cube: (&cube).into(),
                });
            }
            let manifest = a.out_dir.join("manifest.jsonl");
            let mut all = if manifest.exists() { srdata::read_manifest(&manifest)? } else { Vec::new() };
            all.retain(|r| !records.iter().any(|n| n.low_path == r.low_path));
            all.extend(records);
            srdata::write_manifest(&manifest, &all)?;
            println!("wrote pair '{}' ({} manifest entries)", a.name, all.len());
        }
        Command::TrainToy(a) => train_toy(a, seed)?,
        Command::SrInfer(a) => {
            let ck = load_checkpoint(&a.checkpoint)?;
            let mut net = SrNet::from_checkpoint(&ck)?;
            let map = read_uvp(&a.input)?;
            let x = Tensor4::from_vec(1, 3, map.height, map.width, map.data.clone())?;
            let y = net.forward(&x)?;
            let mut out = map.clone();
            out.data = y.data.iter().map(|v| v.clamp(0.0, 1.0)).collect();
            out.apply_mask();
            write_uvp(&out, &a.out)?;
            println!("wrote {}", a.out.display());
        }
        Command::Eval(a) => eval(a)?,
        Command::RenderDepth(a) => {
            let mesh = load_obj(&a.mesh)?;
            let camera = fit_camera(&mesh, a.res, a.scale)?;
            let d = metrics::render_depth(&mesh, &camera, a.res, a.res)?;
            let px: Vec<u16> = d
                .depth
                .iter()
                .zip(&d.valid)
                .map(|(&z, &v)| if v { (z * 1000.0).round().clamp(1.0, 65535.0) as u16 } else { 0 })
                .collect();
            let img = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(a.res as u32, a.res as u32, px)
                .expect("buffer matches size");
            img.save(&a.out).map_err(|e| Error::Format(format!("{}: {e}", a.out.display())))?;
            println!("wrote {} ({} covered pixels)", a.out.display(), d.valid_count());
        }
        Command::Gradcheck(a) => {
            if a.bits != 64 {
                return Err(Failure::Usage(format!("--bits {} unsupported; checks run in 64-bit", a.bits)));
            }
            let reports = crate::gradcheck::run_suite(a.instances, seed);
            let mut ok = true;
            for r in &reports {
                ok &= r.passed;
                println!(
                    "{:<44} max rel err {:.3e} over {} probes  {}",
                    r.name,
                    r.max_rel_err,
                    r.probes,
                    if r.passed { "ok" } else { "FAIL" }
                );
            }
            if !ok {
                return Err(Failure::Data(Error::Format("gradient check failed".into())));
            }
        }
    }
    Ok(())
}

fn jsonl_sink(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufWriter::new(f))
}

fn train_toy(a: &TrainToyArgs, seed: u64) -> Result<()> {
    create_dir(&a.out)?;
    let log_path = a.out.join("loss.jsonl");
    let mut log = jsonl_sink(&log_path)?;
    let summary = match a.net {
        ToyNet::Affinenet => {
            let data = train::synth_affine_dataset(&AffineSynthConfig {
                samples: a.samples.unwrap_or(8),
                resolution: a.res,
                seed,
                ..Default::default()
            })?;
            let mut cfg = TrainConfig::affinenet(a.steps.unwrap_or(3000), a.batch);
            cfg.seed = seed;
            cfg.lr = a.lr.unwrap_or(cfg.lr);
            cfg.cosine = !a.no_cosine;
            let mut net_cfg = NetConfig::scaled(1.0 / 16.0, a.res).with_min_width(8);
            net_cfg.seed = seed;
            let mut net = AffineNet::new(net_cfg)?;
            let s = train::train_affinenet(&mut net, &data, &cfg, Some(&mut log))?;
            save_checkpoint(&net.to_checkpoint()?, a.out.join("affinenet.uvck"))?;
            serde_json::json!({
                "net": "affinenet",
                "steps": cfg.steps,
                "initial_loss": s.initial_loss(),
                "final_loss": s.final_loss,
                "ratio": s.final_loss / s.initial_loss(),
            })
        }
        ToyNet::Srnet => {
            let synth = srdata::synth_sr_dataset(&SrSynthConfig {
                samples: a.samples.unwrap_or(200),
                resolution: a.res,
                seed,
                ..Default::default()
            })?;
            let mut cfg = TrainConfig::srnet(a.steps.unwrap_or(1000), a.batch);
            cfg.seed = seed;
            cfg.lr = a.lr.unwrap_or(cfg.lr);
            cfg.cosine = !a.no_cosine;
            let mut net = SrNet::new(SrNetConfig {
                resolution: a.res,
                seed,
                ..SrNetConfig::toy()
            })?;
            let s = train::train_srnet(&mut net, &synth.data, &cfg, Some(&mut log))?;
            save_checkpoint(&net.to_checkpoint()?, a.out.join("srnet.uvck"))?;
            let pred = train::sr_predict(&mut net, &synth.data, a.batch)?;
            let depth = srdata::sr_depth_report(&synth, &pred, 2 * a.res)?;
            serde_json::json!({
                "net": "srnet",
                "steps": cfg.steps,
                "initial_loss": s.initial_loss(),
                "final_loss": s.final_loss,
                "depth": depth,
            })
        }
    };
    log.flush().map_err(|e| Error::io(&log_path, e))?;
    write_json(&a.out.join("summary.json"), &summary)?;
    println!("{summary}");
    Ok(())
}

fn eval(a: &EvalArgs) -> std::result::Result<(), Failure> {
    if a.pred.len() != a.gt.len() {
        return Err(Failure::Usage(format!(
            "{} --pred meshes but {} --gt meshes",
            a.pred.len(),
            a.gt.len()
        )));
    }
    let load = |ps: &[PathBuf]| ps.iter().map(load_obj).collect::<Result<Vec<_>>>();
    let (pred, gt) = (load(&a.pred)?, load(&a.gt)?);
    let mut set = EvalSet {
        pred_verts: pred.iter().map(|m| m.vertices.clone()).collect(),
        gt_verts: gt.iter().map(|m| m.vertices.clone()).collect(),
        ..Default::default()
    };
    if let Some(rules) = &a.joint_rules {
        let rules = JointRules::load(rules)?;
        let regress = |ms: &[TriMesh]| ms.iter().map(|m| rules.regress(&m.vertices)).collect::<Result<Vec<_>>>();
        set.pred_joints = regress(&pred)?;
        set.gt_joints = regress(&gt)?;
    }
    let mut report = metrics::evaluate(&set, a.procrustes)?;
    if let Some(res) = a.depth_res {
        let mut rmse = 0.0;
        let mut psnr = 0.0;
        for (p, g) in pred.iter().zip(&gt) {
            let camera = fit_camera(g, res, None)?;
            let s = metrics::depth_rmse_psnr(
                &metrics::render_depth(p, &camera, res, res)?,
                &metrics::render_depth(g, &camera, res, res)?,
            )?;
            rmse += s.rmse_mm;
            psnr += s.psnr_db;
        }
        report.depth_rmse_mm = Some(rmse / pred.len() as f64);
        report.psnr_db = Some(psnr / pred.len() as f64);
    }
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
    println!("{text}");
    if let Some(path) = &a.report {
        write_json(path, &report)?;
    }
    if let Some(path) = &a.csv {
        let mut buf = Vec::new();
        metrics::write_curve_csv(&mut buf, report.pck.as_ref(), report.pcv.as_ref())?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
