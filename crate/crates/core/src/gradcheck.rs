//! Central finite-difference checks of every analytic gradient: losses,
//! bilinear grid sampling, the affine connection, each layer kind and both
//! networks end to end.
//!
//! Each check draws random instances, evaluates a scalar `L` (losses
//! directly; tensors through a random linear read-out), and compares the
//! analytic gradient with `(L(x+h) - L(x-h)) / 2h` on a random subset of
//! coordinates. Instances are redrawn while any non-smooth point (L1 or
//! ReLU kink, integer sampling coordinate) lies within reach of the step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::loss::{self, LossWeights, ScaleTarget, VertexNorm};
use crate::mesh::Point3;
use crate::nn::{
    concat, split, AffineNet, BatchNorm2d, Conv2d, Layer, NetConfig, Relu, Sigmoid, SrNet, SrNetConfig, Tensor4,
    Upsample2x,
};
use crate::uv::{Mask, NormalizationCube, SampleStencil, TemplateRaster, UvTemplate};
use crate::warp::{grid_sample, grid_sample_backward, AffineConnection, Camera, SampleGrid, WarpContext};

/// Finite-difference step.
pub const STEP: f64 = 1e-6;
/// Pass threshold on the relative error.
pub const TOLERANCE: f64 = 1e-5;
/// Coordinates probed per instance and input.
const PROBES: usize = 24;
/// Minimum distance of any kink from the evaluation point.
const KINK_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub name: String,
    pub instances: usize,
    pub probes: usize,
    pub max_rel_err: f64,
    pub passed: bool,
}

/// `|a - n| / max(|a|, |n|)`, or the absolute difference when both are
/// below `1e-8`.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let d = (analytic - numeric).abs();
    let s = analytic.abs().max(numeric.abs());
    if s < 1e-8 {
        d
    } else {
        d / s
    }
}

fn probe_indices(rng: &mut impl Rng, len: usize) -> Vec<usize> {
    if len <= PROBES {
        (0..len).collect()
    } else {
        (0..PROBES).map(|_| rng.random_range(0..len)).collect()
    }
}

/// Compares `grad` with central differences of `f` around `x` on probed
/// coordinates; returns the worst relative error.
fn fd_compare(rng: &mut impl Rng, x: &mut [f64], grad: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> (f64, usize) {
    let idx = probe_indices(rng, x.len());
    let mut worst: f64 = 0.0;
    for &i in &idx {
        let orig = x[i];
        x[i] = orig + STEP;
        let fp = f(x);
        x[i] = orig - STEP;
        let fm = f(x);
        x[i] = orig;
        worst = worst.max(rel_error(grad[i], (fp - fm) / (2.0 * STEP)));
    }
    (worst, idx.len())
}

/// Like [`fd_compare`] for functions with many internal kinks: a probe is
/// kept only when the central differences at `h` and `h/2` agree, which
/// fails whenever a kink lies within the step. Rejected probes are redrawn.
fn fd_compare_smooth(
    rng: &mut impl Rng,
    x: &mut [f64],
    grad: &[f64],
    mut f: impl FnMut(&[f64]) -> f64,
) -> (f64, usize) {
    let mut worst: f64 = 0.0;
    let mut kept = 0;
    for _ in 0..PROBES * 8 {
        if kept == PROBES.min(x.len()) {
            break;
        }
        let i = rng.random_range(0..x.len());
        let orig = x[i];
        let mut central = |h: f64| {
            x[i] = orig + h;
            let fp = f(x);
            x[i] = orig - h;
            let fm = f(x);
            x[i] = orig;
            (fp - fm) / (2.0 * h)
        };
        let (d1, d2) = (central(STEP), central(STEP / 2.0));
        if rel_error(d1, d2) > 1e-7 {
            continue;
        }
        kept += 1;
        worst = worst.max(rel_error(grad[i], d2));
    }
    (worst, kept)
}

fn rand_vec(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn rand_tensor(rng: &mut impl Rng, shape: [usize; 4]) -> Tensor4 {
    let [n, c, h, w] = shape;
    Tensor4::from_vec(n, c, h, w, rand_vec(rng, n * c * h * w, -1.0, 1.0)).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Acc {
    name: String,
    instances: usize,
    probes: usize,
    worst: f64,
}

impl Acc {
    fn new(name: &str) -> Self {
        Acc {
            name: name.into(),
            instances: 0,
            probes: 0,
            worst: 0.0,
        }
    }
    fn add(&mut self, (err, n): (f64, usize)) {
        self.worst = self.worst.max(err);
        self.probes += n;
    }
    fn done(self) -> GradCheckReport {
        GradCheckReport {
            passed: self.worst < TOLERANCE && self.probes > 0,
            name: self.name,
            instances: self.instances,
            probes: self.probes,
            max_rel_err: self.worst,
        }
    }
}

/// Checks a layer's input and parameter gradients under `L = <r, y>`.
fn check_layer<L: Layer>(
    name: &str,
    instances: usize,
    rng: &mut ChaCha8Rng,
    mut make: impl FnMut(&mut ChaCha8Rng) -> Option<(L, Tensor4)>,
) -> GradCheckReport {
    let mut acc = Acc::new(name);
    while acc.instances < instances {
        let Some((mut layer, mut x)) = make(rng) else { continue };
        let y = layer.forward(&x).expect("shapes chosen to fit");
        let r = rand_tensor(rng, y.shape());
        for p in layer.params_mut() {
            p.zero_grad();
        }
        let gx = layer.backward(&r);
        let shape = x.shape();
        acc.add(fd_compare(rng, &mut x.data, &gx.data, |d| {
            let t = Tensor4::from_vec(shape[0], shape[1], shape[2], shape[3], d.to_vec()).unwrap();
            dot(&layer.forward(&t).unwrap().data, &r.data)
        }));
        let grads: Vec<Vec<f64>> = layer.params_mut().iter().map(|p| p.grad.clone()).collect();
        for (k, g) in grads.iter().enumerate() {
            let mut v = layer.params_mut()[k].value.clone();
            let res = fd_compare(rng, &mut v, g, |d| {
                layer.params_mut()[k].value.copy_from_slice(d);
                dot(&layer.forward(&x).unwrap().data, &r.data)
            });
            layer.params_mut()[k].value.copy_from_slice(&v);
            acc.add(res);
        }
        acc.instances += 1;
    }
    acc.done()
}

fn random_mask(rng: &mut impl Rng, w: usize, h: usize) -> Mask {
    let mut bits: Vec<bool> = (0..w * h).map(|_| rng.random_bool(0.8)).collect();
    bits[0] = true;
    Mask::new(w, h, bits)
}

/// Small two-triangle template covering most of the unit square, with a
/// single mesh vertex per corner.
fn quad_template() -> UvTemplate {
    UvTemplate::new(
        crate::uv::UvForm::Custom,
        vec![[0.05, 0.05], [0.95, 0.1], [0.9, 0.95], [0.1, 0.9], [0.5, 0.45]],
        vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
        (0..5).collect(),
        5,
    )
    .expect("valid quad template")
}

fn verts_margin_ok(pred: &[f64], t: &ScaleTarget) -> bool {
    let plane = t.mask.width * t.mask.height;
    let q = t.stencil.apply(pred, plane);
    t.cube
        .denormalize(&q)
        .iter()
        .zip(t.verts)
        .all(|(a, b)| (0..3).all(|k| (a[k] - b[k]).abs() > KINK_MARGIN * 1e-2))
}

fn uv_margin_ok(pred: &[f64], gt: &[f64]) -> bool {
    pred.iter().zip(gt).all(|(a, b)| (a - b).abs() > KINK_MARGIN)
}

fn grad_margin_ok(pred: &[f64], gt: &[f64], w: usize, h: usize) -> bool {
    let plane = w * h;
    for c in 0..3 {
        for r in 0..h {
            for x in 0..w {
                let i = c * plane + r * w + x;
                for j in [(x + 1 < w).then(|| i + 1), (r + 1 < h).then(|| i + w)].into_iter().flatten() {
                    if ((pred[j] - pred[i]) - (gt[j] - gt[i])).abs() < KINK_MARGIN {
                        return false;
                    }
                }
            }
        }
    }
    true
}

struct LossCase {
    mask: Mask,
    stencil: SampleStencil,
    cube: NormalizationCube,
    gt: Vec<f64>,
    verts: Vec<Point3>,
    pred: Vec<f64>,
}

fn loss_case(rng: &mut impl Rng, template: &UvTemplate, res: usize) -> LossCase {
    let raster = TemplateRaster::build(template, res, res).expect("resolution fits");
    let mask = random_mask(rng, res, res);
    let stencil = SampleStencil::build(template, &raster);
    let cube = NormalizationCube::new([0.01, -0.02, 0.5], 0.2).unwrap();
    let n = 3 * res * res;
    LossCase {
        gt: rand_vec(rng, n, 0.0, 1.0),
        pred: rand_vec(rng, n, 0.0, 1.0),
        verts: (0..template.n_mesh_verts)
            .map(|_| [0, 1, 2].map(|k| cube.center()[k] + rng.random_range(-0.15..0.15)))
            .collect(),
        mask,
        stencil,
        cube,
    }
}

impl LossCase {
    fn target(&self) -> ScaleTarget<'_> {
        ScaleTarget {
            gt: &self.gt,
            mask: &self.mask,
            stencil: &self.stencil,
            cube: &self.cube,
            verts: &self.verts,
        }
    }
}

fn check_losses(instances: usize, rng: &mut ChaCha8Rng) -> Vec<GradCheckReport> {
    let template = quad_template();
    let res = 8;
    let mut out = Vec::new();

    let mut acc = Acc::new("loss_uv");
    while acc.instances < instances {
        let mut c = loss_case(rng, &template, res);
        if !uv_margin_ok(&c.pred, &c.gt) {
            continue;
        }
        let g = loss::uv_l1(&c.pred, &c.gt, &c.mask).unwrap().grads.remove(0);
        acc.add(fd_compare(rng, &mut c.pred, &g, |p| loss::uv_l1(p, &c.gt, &c.mask).unwrap().total));
        acc.instances += 1;
    }
    out.push(acc.done());

    let mut acc = Acc::new("loss_grad");
    while acc.instances < instances {
        let mut c = loss_case(rng, &template, res);
        if !grad_margin_ok(&c.pred, &c.gt, res, res) {
            continue;
        }
        let g = loss::grad_l1(&c.pred, &c.gt, &c.mask).unwrap().grads.remove(0);
        acc.add(fd_compare(rng, &mut c.pred, &g, |p| loss::grad_l1(p, &c.gt, &c.mask).unwrap().total));
        acc.instances += 1;
    }
    out.push(acc.done());

    for norm in [VertexNorm::L1, VertexNorm::Euclidean] {
        let mut acc = Acc::new(&format!("loss_verts ({norm:?})"));
        while acc.instances < instances {
            let gt: Vec<Point3> = (0..30).map(|_| [0, 1, 2].map(|_| rng.random_range(-0.1..0.1))).collect();
            let mut pred: Vec<f64> = rand_vec(rng, 90, -0.1, 0.1);
            if pred.iter().zip(gt.iter().flatten()).any(|(a, b)| (a - b).abs() < KINK_MARGIN) {
                continue;
            }
            let pts = |d: &[f64]| d.chunks(3).map(|c| [c[0], c[1], c[2]]).collect::<Vec<_>>();
            let g = loss::verts_l1(&pts(&pred), &gt, norm).unwrap().grads.remove(0);
            acc.add(fd_compare(rng, &mut pred, &g, |d| loss::verts_l1(&pts(d), &gt, norm).unwrap().total));
            acc.instances += 1;
        }
        out.push(acc.done());
    }

    let mut acc = Acc::new("loss_verts (through sampling)");
    while acc.instances < instances {
        let mut c = loss_case(rng, &template, res);
        if !verts_margin_ok(&c.pred, &c.target()) {
            continue;
        }
        let g = loss::verts_l1_sampled(&c.pred, &c.target(), VertexNorm::L1).unwrap().grads.remove(0);
        let mut pred = std::mem::take(&mut c.pred);
        acc.add(fd_compare(rng, &mut pred, &g, |p| {
            loss::verts_l1_sampled(p, &c.target(), VertexNorm::L1).unwrap().total
        }));
        acc.instances += 1;
    }
    out.push(acc.done());

    let mut acc = Acc::new("loss_affine (2 scales)");
    while acc.instances < instances {
        let a = loss_case(rng, &template, 4);
        let b = loss_case(rng, &template, 8);
        let ok = |c: &LossCase, r| {
            uv_margin_ok(&c.pred, &c.gt) && grad_margin_ok(&c.pred, &c.gt, r, r) && verts_margin_ok(&c.pred, &c.target())
        };
        if !ok(&a, 4) || !ok(&b, 8) {
            continue;
        }
        let mut w = LossWeights::default().with_scales(2);
        w.scales = vec![0.7, 1.3];
        let targets = [a.target(), b.target()];
        let r = loss::affine_loss(&[&a.pred, &b.pred], &targets, &w).unwrap();
        let mut joint: Vec<f64> = a.pred.iter().chain(&b.pred).copied().collect();
        let g: Vec<f64> = r.grads.concat();
        let na = a.pred.len();
        acc.add(fd_compare(rng, &mut joint, &g, |d| {
            loss::affine_loss(&[&d[..na], &d[na..]], &targets, &w).unwrap().total
        }));
        acc.instances += 1;
    }
    out.push(acc.done());

    let mut acc = Acc::new("loss_sr");
    while acc.instances < instances {
        let mut c = loss_case(rng, &template, res);
        if !uv_margin_ok(&c.pred, &c.gt) || !verts_margin_ok(&c.pred, &c.target()) {
            continue;
        }
        let g = loss::sr_loss(&c.pred, &c.target(), VertexNorm::L1).unwrap().grads.remove(0);
        let mut pred = std::mem::take(&mut c.pred);
        acc.add(fd_compare(rng, &mut pred, &g, |p| {
            loss::sr_loss(p, &c.target(), VertexNorm::L1).unwrap().total
        }));
        acc.instances += 1;
    }
    out.push(acc.done());
    out
}

fn frac_ok(v: f64) -> bool {
    let f = v - v.floor();
    f > KINK_MARGIN && f < 1.0 - KINK_MARGIN
}

fn check_warp(instances: usize, rng: &mut ChaCha8Rng) -> Vec<GradCheckReport> {
    let mut out = Vec::new();
    let mut acc_f = Acc::new("grid_sample (features)");
    let mut acc_g = Acc::new("grid_sample (grid)");
    while acc_f.instances < instances {
        let mut feat = rand_tensor(rng, [2, 3, 5, 6]);
        let grids: Vec<SampleGrid> = (0..2)
            .map(|_| SampleGrid {
                width: 4,
                height: 4,
                coords: (0..16).map(|_| [rng.random_range(-1.0..6.0), rng.random_range(-1.0..5.0)]).collect(),
                valid: (0..16).map(|_| rng.random_bool(0.9)).collect(),
                clamped: vec![false; 16],
                jacobian: [1.0, 1.0],
            })
            .collect();
        if grids.iter().flat_map(|g| &g.coords).any(|c| !frac_ok(c[0]) || !frac_ok(c[1])) {
            continue;
        }
        let r = rand_tensor(rng, [2, 3, 4, 4]);
        let (gf, gg) = grid_sample_backward(&feat, &grids, &r).unwrap();
        let shape = feat.shape();
        acc_f.add(fd_compare(rng, &mut feat.data, &gf.data, |d| {
            let t = Tensor4::from_vec(shape[0], shape[1], shape[2], shape[3], d.to_vec()).unwrap();
            dot(&grid_sample(&t, &grids).unwrap().data, &r.data)
        }));
        let mut flat: Vec<f64> = grids.iter().flat_map(|g| g.coords.iter().flatten().copied()).collect();
        let gflat: Vec<f64> = gg.iter().flatten().flatten().copied().collect();
        acc_g.add(fd_compare(rng, &mut flat, &gflat, |d| {
            let mut gs = grids.clone();
            for (k, g) in gs.iter_mut().enumerate() {
                for (p, c) in g.coords.iter_mut().enumerate() {
                    *c = [d[(k * 16 + p) * 2], d[(k * 16 + p) * 2 + 1]];
                }
            }
            dot(&grid_sample(&feat, &gs).unwrap().data, &r.data)
        }));
        acc_f.instances += 1;
        acc_g.instances += 1;
    }
    out.push(acc_f.done());
    out.push(acc_g.done());

    let mut acc = Acc::new("affine_connection (features and UV map)");
    let camera = Camera::orthographic(40.0, 3.0, 3.5).unwrap();
    let cubes = [NormalizationCube::new([0.0, 0.0, 0.5], 0.1).unwrap(); 2];
    while acc.instances < instances {
        let (h, fsz, img) = (4, 4, 8);
        let mut uv = Tensor4::from_vec(2, 3, h, h, rand_vec(rng, 2 * 3 * h * h, 0.05, 0.95)).unwrap();
        let feat = rand_tensor(rng, [2, 2, fsz, fsz]);
        let mask = random_mask(rng, h, h);
        let ctx = WarpContext {
            camera: &camera,
            image_size: img,
            cubes: &cubes,
        };
        let mut ac = AffineConnection::default();
        let y = ac.forward(&uv, &feat, Some(&mask), &ctx).unwrap();
        // reject instances with a sample coordinate near a pixel boundary
        let grids_ok = (0..2).all(|n| {
            let g = crate::warp::grid_from_planar(uv.sample(n), h, h, Some(&mask), &cubes[n], &camera, img, (fsz, fsz));
            g.coords
                .iter()
                .zip(&g.valid)
                .zip(&g.clamped)
                .all(|((c, &v), &cl)| !v || (!cl && frac_ok(c[0]) && frac_ok(c[1])))
        });
        if !grids_ok {
            continue;
        }
        let r = rand_tensor(rng, y.shape());
        let (gf, guv) = ac.backward(&r);
        let mut fdata = feat.data.clone();
        acc.add(fd_compare(rng, &mut fdata, &gf.data, |d| {
            let t = Tensor4::from_vec(2, 2, fsz, fsz, d.to_vec()).unwrap();
            dot(&AffineConnection::default().forward(&uv, &t, Some(&mask), &ctx).unwrap().data, &r.data)
        }));
        let shape = uv.shape();
        acc.add(fd_compare(rng, &mut uv.data, &guv.data, |d| {
            let t = Tensor4::from_vec(shape[0], shape[1], shape[2], shape[3], d.to_vec()).unwrap();
            dot(&AffineConnection::default().forward(&t, &feat, Some(&mask), &ctx).unwrap().data, &r.data)
        }));
        acc.instances += 1;
    }
    out.push(acc.done());
    out
}

/// Wraps `concat` of a fixed side input so it fits the layer harness.
struct ConcatProbe {
    side: Tensor4,
    first_c: usize,
}

impl Layer for ConcatProbe {
    fn forward(&mut self, x: &Tensor4) -> Result<Tensor4> {
        self.first_c = x.c;
        concat(&[x, &self.side])
    }
    fn backward(&mut self, gy: &Tensor4) -> Tensor4 {
        split(gy, &[self.first_c, self.side.c]).remove(0)
    }
    fn out_shape(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        Ok([input[0] + self.side.c, input[1], input[2]])
    }
}

fn away_from_zero(t: &mut Tensor4) {
    for v in &mut t.data {
        if v.abs() < KINK_MARGIN {
            *v = KINK_MARGIN * 2.0;
        }
    }
}

fn check_layers(instances: usize, rng: &mut ChaCha8Rng) -> Vec<GradCheckReport> {
    let mut out = Vec::new();
    for (k, stride, pad) in [(3, 1, 1), (3, 2, 1), (5, 1, 2), (9, 1, 4)] {
        out.push(check_layer(&format!("conv2d {k}x{k} stride {stride}"), instances, rng, |rng| {
            let conv = Conv2d::new("c", 2, 3, k, stride, pad, rng);
            Some((conv, rand_tensor(rng, [2, 2, 7, 6])))
        }));
    }
    for training in [true, false] {
        let mode = if training { "train" } else { "eval" };
        out.push(check_layer(&format!("batchnorm ({mode})"), instances, rng, |rng| {
            let mut bn = BatchNorm2d::new("bn", 3);
            bn.training = training;
            bn.gamma.value = rand_vec(rng, 3, 0.5, 1.5);
            bn.beta.value = rand_vec(rng, 3, -0.5, 0.5);
            bn.running_mean = rand_vec(rng, 3, -0.5, 0.5);
            bn.running_var = rand_vec(rng, 3, 0.5, 2.0);
            Some((bn, rand_tensor(rng, [3, 3, 4, 5])))
        }));
    }
    out.push(check_layer("relu", instances, rng, |rng| {
        let mut x = rand_tensor(rng, [2, 3, 4, 4]);
        away_from_zero(&mut x);
        Some((Relu::default(), x))
    }));
    out.push(check_layer("sigmoid", instances, rng, |rng| {
        Some((Sigmoid::default(), rand_tensor(rng, [2, 3, 4, 4])))
    }));
    out.push(check_layer("upsample2x", instances, rng, |rng| {
        Some((Upsample2x::default(), rand_tensor(rng, [2, 2, 3, 5])))
    }));
    out.push(check_layer("concat", instances, rng, |rng| {
        let side = rand_tensor(rng, [2, 3, 4, 4]);
        Some((ConcatProbe { side, first_c: 0 }, rand_tensor(rng, [2, 2, 4, 4])))
    }));
    out
}

fn check_networks(instances: usize, rng: &mut ChaCha8Rng) -> Vec<GradCheckReport> {
    let mut out = Vec::new();

    let mut acc = Acc::new("SRNet end to end (16x16)");
    while acc.instances < instances {
        let cfg = SrNetConfig {
            resolution: 16,
            channels: [4, 3],
            residual: rng.random_bool(0.5),
            zero_last: false,
            seed: rng.random(),
        };
        let mut net = SrNet::new(cfg).unwrap();
        let mut x = rand_tensor(rng, [2, 3, 16, 16]);
        let y = net.forward(&x).unwrap();
        let r = rand_tensor(rng, y.shape());
        net.zero_grad();
        let gx = net.backward(&r);
        acc.add(fd_compare_smooth(rng, &mut x.data, &gx.data, |d| {
            let t = Tensor4::from_vec(2, 3, 16, 16, d.to_vec()).unwrap();
            dot(&net.forward(&t).unwrap().data, &r.data)
        }));
        let grads: Vec<Vec<f64>> = net.params_mut().iter().map(|p| p.grad.clone()).collect();
        let k = rng.random_range(0..grads.len());
        let mut v = net.params_mut()[k].value.clone();
        let res = fd_compare_smooth(rng, &mut v, &grads[k], |d| {
            net.params_mut()[k].value.copy_from_slice(d);
            dot(&net.forward(&x).unwrap().data, &r.data)
        });
        acc.add(res);
        acc.instances += 1;
    }
    out.push(acc.done());

    let mut acc = Acc::new("AffineNet end to end (32x32, 1/32 widths)");
    let camera = Camera::orthographic(120.0, 15.5, 15.5).unwrap();
    let cubes = [NormalizationCube::new([0.0, 0.0, 0.5], 0.15).unwrap(); 2];
    while acc.instances < instances {
        let mut cfg = NetConfig::scaled(1.0 / 32.0, 32);
        cfg.seed = rng.random();
        let mut net = AffineNet::new(cfg).unwrap();
        let ctx = WarpContext {
            camera: &camera,
            image_size: 32,
            cubes: &cubes,
        };
        let mut x = rand_tensor(rng, [2, 3, 32, 32]);
        let o = net.forward(&x, None, &ctx).unwrap();
        let rs: Vec<Tensor4> = o.uv.iter().map(|t| rand_tensor(rng, t.shape())).collect();
        let read = |o: &crate::nn::AffineOutputs| -> f64 { o.uv.iter().zip(&rs).map(|(t, r)| dot(&t.data, &r.data)).sum() };
        net.zero_grad();
        let grads: Vec<Option<Tensor4>> = rs.iter().cloned().map(Some).collect();
        let gx = net.backward(&o, &grads);
        let res = fd_compare_smooth(rng, &mut x.data, &gx.data, |d| {
            let t = Tensor4::from_vec(2, 3, 32, 32, d.to_vec()).unwrap();
            read(&net.forward(&t, None, &ctx).unwrap())
        });
        acc.add(res);
        let pgrads: Vec<Vec<f64>> = net.params_mut().iter().map(|p| p.grad.clone()).collect();
        let k = rng.random_range(0..pgrads.len());
        let mut v = net.params_mut()[k].value.clone();
        let res = fd_compare_smooth(rng, &mut v, &pgrads[k], |d| {
            net.params_mut()[k].value.copy_from_slice(d);
            read(&net.forward(&x, None, &ctx).unwrap())
        });
        acc.add(res);
        acc.instances += 1;
    }
    out.push(acc.done());
    out
}

/// Runs every check with `instances` random instances each.
pub fn run_suite(instances: usize, seed: u64) -> Vec<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = check_losses(instances, &mut rng);
    out.extend(check_warp(instances, &mut rng));
    out.extend(check_layers(instances, &mut rng));
    out.extend(check_networks(instances, &mut rng));
    out
}
