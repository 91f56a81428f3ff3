//! Datasets, training steps and loops for both networks, and the seeded
//! synthetic data generator for the image-to-UV network.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{affine_loss, batch_mean, sr_loss, LossReport, LossWeights, ScaleTarget};
use crate::mesh::{axis_angle, Point3};
use crate::render::render_shaded;
use crate::toy::{HandPose, ToyHand};
use crate::uv::{Mask, NormalizationCube, SampleStencil, UvCodec, UvForm};
use crate::warp::{Camera, WarpContext};

use super::affinenet::LEVELS;
use super::{cosine_lr, Adam, AffineNet, Param, SrNet, Tensor4};

/// One image with ground truth at every UV head resolution.
#[derive(Debug, Clone)]
pub struct AffineSample {
    /// `(3, R, R)` channel-planar.
    pub image: Vec<f64>,
    pub cube: NormalizationCube,
    /// Ground-truth maps for heads I4..I0.
    pub gt: Vec<Vec<f64>>,
    /// Ground-truth mesh vertices (meters).
    pub verts: Vec<Point3>,
}

#[derive(Debug, Clone)]
pub struct AffineDataset {
    pub resolution: usize,
    pub camera: Camera,
    /// Codecs at the UV head resolutions I4..I0.
    pub codecs: Vec<UvCodec>,
    pub masks: Vec<Mask>,
    pub samples: Vec<AffineSample>,
}

/// Training-loop settings shared by both networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    /// Cosine decay over `steps`; constant rate otherwise.
    pub cosine: bool,
    pub seed: u64,
    pub weights: LossWeights,
    /// Number of finest heads supervised (AffineNet only).
    pub supervised_scales: usize,
}

impl TrainConfig {
    /// Image-to-UV recipe: Adam at 1e-4 with cosine decay.
    pub fn affinenet(steps: usize, batch: usize) -> Self {
        TrainConfig {
            steps,
            batch,
            lr: 1e-4,
            cosine: true,
            seed: 0,
            weights: LossWeights::default(),
            supervised_scales: 4,
        }
    }

    /// Refinement recipe: Adam at 1e-4 with cosine decay. The residual
    /// corrections are a few thousandths of the cube, so larger rates stall.
    pub fn srnet(steps: usize, batch: usize) -> Self {
        TrainConfig {
            steps,
            batch,
            lr: 1e-4,
            cosine: true,
            seed: 0,
            weights: LossWeights::default().with_scales(1),
            supervised_scales: 1,
        }
    }
}

/// One line of the JSON-lines training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub lr: f64,
    pub total: f64,
    pub components: std::collections::BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub history: Vec<StepLog>,
    /// Loss of the parameters after the last update, same batch rule.
    pub final_loss: f64,
}

impl TrainSummary {
    pub fn initial_loss(&self) -> f64 {
        self.history.first().map(|s| s.total).unwrap_or(f64::NAN)
    }
}

/// Seeded per-epoch shuffles cut into batches of at most `batch`.
fn batches(n: usize, batch: usize, steps: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(steps);
    let mut idx: Vec<usize> = (0..n).collect();
    while out.len() < steps {
        idx.shuffle(&mut rng);
        for chunk in idx.chunks(batch.max(1)) {
            if out.len() == steps {
                break;
            }
            out.push(chunk.to_vec());
        }
    }
    out
}

fn log_step(log: &mut Option<&mut dyn Write>, entry: &StepLog) -> Result<()> {
    if let Some(w) = log.as_mut() {
        let line = serde_json::to_string(entry).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io("<training log>", e))?;
    }
    Ok(())
}

fn check_report(r: &LossReport) -> Result<()> {
    if !r.total.is_finite() {
        return Err(Error::NonFinite(format!("loss {:?}", r.components)));
    }
    Ok(())
}

/// Forward + loss (+ backward when `update`) on one batch; returns the
/// batch-mean report.
pub fn affine_batch_loss(
    net: &mut AffineNet,
    data: &AffineDataset,
    idx: &[usize],
    cfg: &TrainConfig,
    backward: bool,
) -> Result<LossReport> {
    let r = data.resolution;
    let images: Vec<&[f64]> = idx.iter().map(|&i| data.samples[i].image.as_slice()).collect();
    let image = Tensor4::stack(&images, 3, r, r)?;
    let cubes: Vec<NormalizationCube> = idx.iter().map(|&i| data.samples[i].cube).collect();
    let ctx = WarpContext {
        camera: &data.camera,
        image_size: r,
        cubes: &cubes,
    };
    let out = net.forward(&image, Some(&data.masks), &ctx)?;
    let first = LEVELS - cfg.supervised_scales;
    let reports = idx
        .iter()
        .enumerate()
        .map(|(b, &i)| {
            let s = &data.samples[i];
            let preds: Vec<&[f64]> = (first..LEVELS).map(|k| out.uv[k].sample(b)).collect();
            let targets: Vec<ScaleTarget> = (first..LEVELS)
                .map(|k| ScaleTarget {
                    gt: &s.gt[k],
                    mask: &data.masks[k],
                    stencil: &data.codecs[k].stencil,
                    cube: &s.cube,
                    verts: &s.verts,
                })
                .collect();
            affine_loss(&preds, &targets, &cfg.weights)
        })
        .collect::<Result<Vec<_>>>()?;
    let report = batch_mean(reports);
    check_report(&report)?;
    if backward {
        let mut grads: Vec<Option<Tensor4>> = vec![None; LEVELS];
        for (j, k) in (first..LEVELS).enumerate() {
            let mut g = out.uv[k].zeros_like();
            for b in 0..idx.len() {
                g.sample_mut(b).copy_from_slice(&report.grads[b * cfg.supervised_scales + j]);
            }
            grads[k] = Some(g);
        }
        net.backward(&out, &grads);
    }
    Ok(report)
}

fn adam_step(params: Vec<&mut Param>, adam: &mut Adam, lr: f64) -> Result<()> {
    let mut params = params;
    adam.update(&mut params, lr)
}

/// Trains with Adam; the summary's `final_loss` re-evaluates the last batch
/// rule on the whole dataset when it fits in one batch, else on the last
/// batch.
pub fn train_affinenet(
    net: &mut AffineNet,
    data: &AffineDataset,
    cfg: &TrainConfig,
    mut log: Option<&mut dyn Write>,
) -> Result<TrainSummary> {
    if cfg.supervised_scales == 0 || cfg.supervised_scales > LEVELS || cfg.weights.scales.len() != cfg.supervised_scales {
        return Err(Error::Config(format!(
            "supervised scales {} must be 1..=5 and match {} scale weights",
            cfg.supervised_scales,
            cfg.weights.scales.len()
        )));
    }
    net.set_training(true);
    let mut adam = Adam::new(cfg.lr);
    let plan = batches(data.samples.len(), cfg.batch, cfg.steps, cfg.seed);
    let mut history = Vec::with_capacity(cfg.steps);
    for (step, idx) in plan.iter().enumerate() {
        let lr = if cfg.cosine { cosine_lr(cfg.lr, step, cfg.steps) } else { cfg.lr };
        net.zero_grad();
        let report = affine_batch_loss(net, data, idx, cfg, true)?;
        adam_step(net.params_mut(), &mut adam, lr)?;
        let entry = StepLog {
            step,
            lr,
            total: report.total,
            components: report.components,
        };
        log_step(&mut log, &entry)?;
        history.push(entry);
    }
    let last = plan.last().cloned().unwrap_or_else(|| (0..data.samples.len()).collect());
    let final_loss = affine_batch_loss(net, data, &last, cfg, false)?.total;
    Ok(TrainSummary { history, final_loss })
}

/// Input/target pair for the refinement network.
#[derive(Debug, Clone)]
pub struct SrSample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub cube: NormalizationCube,
    /// Dense ground-truth vertices (meters).
    pub verts: Vec<Point3>,
}

#[derive(Debug, Clone)]
pub struct SrDataset {
    pub resolution: usize,
    pub mask: Mask,
    /// Decoding stencil of the dense (subdivided) template.
    pub stencil: SampleStencil,
    pub samples: Vec<SrSample>,
}

pub fn sr_batch_loss(net: &mut SrNet, data: &SrDataset, idx: &[usize], backward: bool) -> Result<LossReport> {
    let r = data.resolution;
    let inputs: Vec<&[f64]> = idx.iter().map(|&i| data.samples[i].input.as_slice()).collect();
    let x = Tensor4::stack(&inputs, 3, r, r)?;
    let y = net.forward(&x)?;
    let reports = idx
        .iter()
        .enumerate()
        .map(|(b, &i)| {
            let s = &data.samples[i];
            let t = ScaleTarget {
                gt: &s.target,
                mask: &data.mask,
                stencil: &data.stencil,
                cube: &s.cube,
                verts: &s.verts,
            };
            sr_loss(y.sample(b), &t, Default::default())
        })
        .collect::<Result<Vec<_>>>()?;
    let report = batch_mean(reports);
    check_report(&report)?;
    if backward {
        let mut g = y.zeros_like();
        for b in 0..idx.len() {
            g.sample_mut(b).copy_from_slice(&report.grads[b]);
        }
        net.backward(&g);
    }
    Ok(report)
}

pub fn train_srnet(
    net: &mut SrNet,
    data: &SrDataset,
    cfg: &TrainConfig,
    mut log: Option<&mut dyn Write>,
) -> Result<TrainSummary> {
    let mut adam = Adam::new(cfg.lr);
    let plan = batches(data.samples.len(), cfg.batch, cfg.steps, cfg.seed);
    let mut history = Vec::with_capacity(cfg.steps);
    for (step, idx) in plan.iter().enumerate() {
        let lr = if cfg.cosine { cosine_lr(cfg.lr, step, cfg.steps) } else { cfg.lr };
        net.zero_grad();
        let report = sr_batch_loss(net, data, idx, true)?;
        adam_step(net.params_mut(), &mut adam, lr)?;
        let entry = StepLog {
            step,
            lr,
            total: report.total,
            components: report.components,
        };
        log_step(&mut log, &entry)?;
        history.push(entry);
    }
    let all: Vec<usize> = (0..data.samples.len()).collect();
    let mut final_loss = 0.0;
    for chunk in all.chunks(cfg.batch.max(1)) {
        final_loss += sr_batch_loss(net, data, chunk, false)?.total * chunk.len() as f64;
    }
    Ok(TrainSummary {
        history,
        final_loss: final_loss / all.len().max(1) as f64,
    })
}

/// Applies the refinement network to every sample input.
pub fn sr_predict(net: &mut SrNet, data: &SrDataset, batch: usize) -> Result<Vec<Vec<f64>>> {
    let r = data.resolution;
    let mut out = Vec::with_capacity(data.samples.len());
    for chunk in data.samples.chunks(batch.max(1)) {
        let inputs: Vec<&[f64]> = chunk.iter().map(|s| s.input.as_slice()).collect();
        let y = net.forward(&Tensor4::stack(&inputs, 3, r, r)?)?;
        out.extend((0..chunk.len()).map(|b| y.sample(b).to_vec()));
    }
    Ok(out)
}

/// Settings of the synthetic image/UV generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineSynthConfig {
    pub samples: usize,
    pub resolution: usize,
    pub form: UvForm,
    pub seed: u64,
    /// Upper bound of each joint curl (radians).
    pub max_curl: f64,
    /// Bound of the in-plane wrist rotation (radians).
    pub max_roll: f64,
    pub half_extent: f64,
}

impl Default for AffineSynthConfig {
    fn default() -> Self {
        AffineSynthConfig {
            samples: 8,
            resolution: 64,
            form: UvForm::Uv3,
            seed: 7,
            max_curl: 0.9,
            max_roll: 0.3,
            half_extent: crate::uv::DEFAULT_HALF_EXTENT,
        }
    }
}

/// Camera depth of the synthetic hand's wrist.
pub const SYNTH_DEPTH: f64 = 0.5;

/// Orthographic camera framing the toy hand in a `size`-pixel image.
pub fn synth_camera(size: usize) -> Camera {
    let s = size as f64 / 0.22;
    let c = 0.5 * (size as f64 - 1.0);
    Camera::orthographic(s, c - s * 0.024, c - s * 0.075).expect("positive scale")
}

/// Random hand pose within the configured bounds.
pub fn random_pose(rng: &mut impl Rng, max_curl: f64, max_roll: f64) -> HandPose {
    let mut pose = HandPose::default();
    for f in pose.curls.iter_mut() {
        for c in f.iter_mut() {
            *c = rng.random_range(0.0..=max_curl);
        }
    }
    let roll = axis_angle([0.0, 0.0, 1.0], rng.random_range(-max_roll..=max_roll));
    let tilt = axis_angle(
        [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0],
        rng.random_range(-0.15..0.15),
    );
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = (0..3).map(|k| roll[i][k] * tilt[k][j]).sum();
        }
    }
    pose.rotation = Some(r);
    pose.translation = [0.0, 0.0, SYNTH_DEPTH];
    pose
}

/// Posed toy hands rendered to (silhouette, depth, shading) images with
/// ground-truth UV maps at the five head resolutions. The cube is centred
/// on the posed wrist.
pub fn synth_affine_dataset(cfg: &AffineSynthConfig) -> Result<AffineDataset> {
    let hand = ToyHand::default();
    let template = hand.template(cfg.form);
    let sizes = [16, 8, 4, 2, 1].map(|d| cfg.resolution / d);
    let codecs = sizes
        .iter()
        .map(|&s| UvCodec::new(&template, s, s))
        .collect::<Result<Vec<_>>>()?;
    let masks = codecs.iter().map(|c| c.mask()).collect();
    let camera = synth_camera(cfg.resolution);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        let pose = random_pose(&mut rng, cfg.max_curl, cfg.max_roll);
        let mesh = hand.posed(&pose);
        let wrist = crate::mesh::add(hand.wrist_rest(), pose.translation);
        let cube = NormalizationCube::new(wrist, cfg.half_extent)?;
        let image = render_shaded(&mesh, &camera, cfg.resolution, wrist[2], 0.1);
        let gt = codecs
            .iter()
            .map(|c| c.encode(&mesh, &cube).map(|m| m.data))
            .collect::<Result<Vec<_>>>()?;
        samples.push(AffineSample {
            image,
            cube,
            gt,
            verts: mesh.vertices,
        });
    }
    Ok(AffineDataset {
        resolution: cfg.resolution,
        camera,
        codecs,
        masks,
        samples,
    })
}
