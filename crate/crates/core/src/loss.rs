//! Training objectives on UV position maps and decoded meshes, each
//! returning its value together with the analytic gradient with respect to
//! the prediction.
//!
//! Maps are channel-planar `[3][H][W]` slices; the mask selects the pixels
//! that count. The L1 subgradient at 0 is 0.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Point3, TriMesh};
use crate::uv::{Mask, NormalizationCube, SampleStencil, UvPositionMap};

/// How the per-vertex distance in the vertex loss is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexNorm {
    /// Sum of absolute coordinate differences.
    #[default]
    L1,
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub uv: f64,
    pub grad: f64,
    pub verts: f64,
    /// One weight per supervised scale, coarse to fine.
    pub scales: Vec<f64>,
    pub vertex_norm: VertexNorm,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            uv: 1.0,
            grad: 1.0,
            verts: 1.0,
            scales: vec![1.0; 4],
            vertex_norm: VertexNorm::L1,
        }
    }
}

impl LossWeights {
    pub fn with_scales(mut self, n: usize) -> Self {
        self.scales = vec![1.0; n];
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub components: BTreeMap<String, f64>,
    /// Gradient of `total` with respect to each prediction input, in input
    /// order and with the input's shape.
    #[serde(skip)]
    pub grads: Vec<Vec<f64>>,
}

impl LossReport {
    fn single(name: &str, total: f64, grad: Vec<f64>) -> Self {
        LossReport {
            total,
            components: BTreeMap::from([(name.to_string(), total)]),
            grads: vec![grad],
        }
    }

    pub fn component(&self, name: &str) -> f64 {
        self.components.get(name).copied().unwrap_or(0.0)
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_len(what: &'static str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::CountMismatch {
            what,
            expected: a,
            got: b,
        });
    }
    Ok(())
}

fn check_planar(pred: &[f64], gt: &[f64], mask: &Mask) -> Result<usize> {
    let plane = mask.width * mask.height;
    if pred.len() != 3 * plane || gt.len() != 3 * plane {
        return Err(Error::Shape(format!(
            "maps of length {} and {} do not match a 3x{}x{} mask",
            pred.len(),
            gt.len(),
            mask.height,
            mask.width
        )));
    }
    Ok(plane)
}

/// Mean absolute difference over masked pixels and channels.
pub fn uv_l1(pred: &[f64], gt: &[f64], mask: &Mask) -> Result<LossReport> {
    let plane = check_planar(pred, gt, mask)?;
    let n = 3 * mask.count();
    let mut grad = vec![0.0; pred.len()];
    if n == 0 {
        return Ok(LossReport::single("uv", 0.0, grad));
    }
    let inv = 1.0 / n as f64;
    let mut sum = 0.0;
    for c in 0..3 {
        for p in (0..plane).filter(|&p| mask.bits[p]) {
            let i = c * plane + p;
            let d = pred[i] - gt[i];
            sum += d.abs();
            grad[i] = sign(d) * inv;
        }
    }
    Ok(LossReport::single("uv", sum * inv, grad))
}

/// L1 alignment of forward differences along u (columns) and v (rows).
/// Only differences whose two pixels are both in the mask count; the result
/// is the mean over u-pairs plus the mean over v-pairs.
pub fn grad_l1(pred: &[f64], gt: &[f64], mask: &Mask) -> Result<LossReport> {
    let plane = check_planar(pred, gt, mask)?;
    let (w, h) = (mask.width, mask.height);
    let mut grad = vec![0.0; pred.len()];
    let mut total = 0.0;
    for (dc, dr) in [(1usize, 0usize), (0, 1)] {
        let pairs: Vec<(usize, usize)> = (0..h.saturating_sub(dr))
            .flat_map(|r| (0..w.saturating_sub(dc)).map(move |c| (r * w + c, (r + dr) * w + c + dc)))
            .filter(|&(a, b)| mask.bits[a] && mask.bits[b])
            .collect();
        if pairs.is_empty() {
            continue;
        }
        let inv = 1.0 / (3 * pairs.len()) as f64;
        let mut sum = 0.0;
        for c in 0..3 {
            let o = c * plane;
            for &(a, b) in &pairs {
                let d = (pred[o + b] - pred[o + a]) - (gt[o + b] - gt[o + a]);
                sum += d.abs();
                let s = sign(d) * inv;
                grad[o + b] += s;
                grad[o + a] -= s;
            }
        }
        total += sum * inv;
    }
    Ok(LossReport::single("grad", total, grad))
}

/// Mean per-vertex distance in meters; gradient with respect to the
/// flattened predicted coordinates.
pub fn verts_l1(pred: &[Point3], gt: &[Point3], norm: VertexNorm) -> Result<LossReport> {
    check_len("predicted vs ground-truth vertices", gt.len(), pred.len())?;
    let n = pred.len().max(1) as f64;
    let mut grad = vec![0.0; 3 * pred.len()];
    let mut sum = 0.0;
    for (i, (p, g)) in pred.iter().zip(gt).enumerate() {
        let d = [p[0] - g[0], p[1] - g[1], p[2] - g[2]];
        match norm {
            VertexNorm::L1 => {
                for k in 0..3 {
                    sum += d[k].abs();
                    grad[3 * i + k] = sign(d[k]) / n;
                }
            }
            VertexNorm::Euclidean => {
                let len = crate::mesh::norm(d);
                sum += len;
                if len > 0.0 {
                    for k in 0..3 {
                        grad[3 * i + k] = d[k] / len / n;
                    }
                }
            }
        }
    }
    Ok(LossReport::single("verts", sum / n, grad))
}

/// Everything needed to supervise one predicted map.
#[derive(Debug, Clone, Copy)]
pub struct ScaleTarget<'a> {
    /// Ground-truth map, channel-planar.
    pub gt: &'a [f64],
    pub mask: &'a Mask,
    /// Decoding stencil at this map's resolution.
    pub stencil: &'a SampleStencil,
    pub cube: &'a NormalizationCube,
    /// Ground-truth mesh vertices in meters.
    pub verts: &'a [Point3],
}

/// Vertex loss of the mesh decoded from `pred`, with the gradient chained
/// through bilinear sampling and denormalization back to map pixels.
pub fn verts_l1_sampled(pred: &[f64], target: &ScaleTarget, norm: VertexNorm) -> Result<LossReport> {
    let plane = check_planar(pred, target.gt, target.mask)?;
    let q = target.stencil.apply(pred, plane);
    let verts = target.cube.denormalize(&q);
    let r = verts_l1(&verts, target.verts, norm)?;
    let ext = target.cube.extent();
    let gq: Vec<Point3> = r.grads[0]
        .chunks_exact(3)
        .map(|g| [g[0] * ext[0], g[1] * ext[1], g[2] * ext[2]])
        .collect();
    let mut grad = vec![0.0; pred.len()];
    target.stencil.apply_transpose(&gq, plane, &mut grad);
    Ok(LossReport::single("verts", r.total, grad))
}

/// Weighted UV, UV-gradient and vertex terms for one scale.
fn scale_loss(pred: &[f64], t: &ScaleTarget, w: &LossWeights) -> Result<(f64, [f64; 3], Vec<f64>)> {
    let uv = uv_l1(pred, t.gt, t.mask)?;
    let gr = grad_l1(pred, t.gt, t.mask)?;
    let vs = verts_l1_sampled(pred, t, w.vertex_norm)?;
    let mut grad = vec![0.0; pred.len()];
    for (i, g) in grad.iter_mut().enumerate() {
        *g = w.uv * uv.grads[0][i] + w.grad * gr.grads[0][i] + w.verts * vs.grads[0][i];
    }
    let total = w.uv * uv.total + w.grad * gr.total + w.verts * vs.total;
    Ok((total, [uv.total, gr.total, vs.total], grad))
}

/// Multi-scale objective: `sum_s scale_s * (uv_s*E_uv + grad_s*E_grad + verts_s*E_verts)`.
/// Components `uv`, `grad`, `verts` hold the scale-weighted sums, so
/// `total = w.uv*uv + w.grad*grad + w.verts*verts`; per-scale terms are
/// reported as `uv@<width>` etc.
pub fn affine_loss(preds: &[&[f64]], targets: &[ScaleTarget], w: &LossWeights) -> Result<LossReport> {
    if preds.is_empty() {
        return Err(Error::Shape("affine loss needs at least one scale".into()));
    }
    check_len("prediction scales vs targets", targets.len(), preds.len())?;
    check_len("scale weights vs predictions", preds.len(), w.scales.len())?;
    let mut report = LossReport {
        total: 0.0,
        components: BTreeMap::new(),
        grads: Vec::with_capacity(preds.len()),
    };
    let mut sums = [0.0; 3];
    for ((pred, t), &sw) in preds.iter().zip(targets).zip(&w.scales) {
        let (total, parts, mut grad) = scale_loss(pred, t, w)?;
        report.total += sw * total;
        for (k, name) in ["uv", "grad", "verts"].iter().enumerate() {
            sums[k] += sw * parts[k];
            report.components.insert(format!("{name}@{}", t.mask.width), parts[k]);
        }
        grad.iter_mut().for_each(|g| *g *= sw);
        report.grads.push(grad);
    }
    for (k, name) in ["uv", "grad", "verts"].iter().enumerate() {
        report.components.insert(name.to_string(), sums[k]);
    }
    Ok(report)
}

/// Super-resolution objective: UV term plus vertex term on the
/// high-resolution map, unit weights.
pub fn sr_loss(pred: &[f64], target: &ScaleTarget, norm: VertexNorm) -> Result<LossReport> {
    let uv = uv_l1(pred, target.gt, target.mask)?;
    let vs = verts_l1_sampled(pred, target, norm)?;
    let grad = uv.grads[0].iter().zip(&vs.grads[0]).map(|(a, b)| a + b).collect();
    Ok(LossReport {
        total: uv.total + vs.total,
        components: BTreeMap::from([("uv".to_string(), uv.total), ("verts".to_string(), vs.total)]),
        grads: vec![grad],
    })
}

fn check_maps(pred: &UvPositionMap, gt: &UvPositionMap) -> Result<()> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(Error::Shape(format!(
            "prediction is {}x{}, ground truth {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    Ok(())
}

pub fn loss_uv(pred: &UvPositionMap, gt: &UvPositionMap, mask: &Mask) -> Result<LossReport> {
    check_maps(pred, gt)?;
    uv_l1(&pred.data, &gt.data, mask)
}

pub fn loss_grad(pred: &UvPositionMap, gt: &UvPositionMap, mask: &Mask) -> Result<LossReport> {
    check_maps(pred, gt)?;
    grad_l1(&pred.data, &gt.data, mask)
}

pub fn loss_verts(pred: &TriMesh, gt: &TriMesh) -> Result<LossReport> {
    verts_l1(&pred.vertices, &gt.vertices, VertexNorm::L1)
}

/// Sum of `values` that does not depend on their order.
pub fn order_free_sum(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    pairwise(&v)
}

fn pairwise(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise(&v[..n / 2]) + pairwise(&v[n / 2..]),
    }
}

/// Averages per-sample reports. Values are independent of sample order;
/// gradients are scaled by `1/B` and kept per sample.
pub fn batch_mean(reports: Vec<LossReport>) -> LossReport {
    let b = reports.len().max(1) as f64;
    let totals: Vec<f64> = reports.iter().map(|r| r.total).collect();
    let mut names: Vec<&String> = reports.iter().flat_map(|r| r.components.keys()).collect();
    names.sort();
    names.dedup();
    let components = names
        .iter()
        .map(|&n| {
            let vals: Vec<f64> = reports.iter().map(|r| r.component(n)).collect();
            (n.clone(), order_free_sum(&vals) / b)
        })
        .collect();
    let total = order_free_sum(&totals) / b;
    let grads = reports
        .into_iter()
        .flat_map(|r| r.grads)
        .map(|g| g.into_iter().map(|x| x / b).collect())
        .collect();
    LossReport {
        total,
        components,
        grads,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask4() -> Mask {
        Mask::new(4, 4, (0..16).map(|i| i != 0 && i != 7).collect())
    }

    #[test]
    fn identical_maps_give_zero() {
        let m = mask4();
        let gt: Vec<f64> = (0..48).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let r = uv_l1(&gt, &gt, &m).unwrap();
        assert_eq!(r.total, 0.0);
        assert!(r.grads[0].iter().all(|&g| g == 0.0));
        assert_eq!(grad_l1(&gt, &gt, &m).unwrap().total, 0.0);
    }

    #[test]
    fn offset_in_mask() {
        let m = mask4();
        let gt: Vec<f64> = (0..48).map(|i| (i as f64 * 0.37).sin().abs() * 0.5).collect();
        let pred: Vec<f64> = gt
            .iter()
            .enumerate()
            .map(|(i, v)| if m.bits[i % 16] { v + 0.1 } else { *v })
            .collect();
        assert!((uv_l1(&pred, &gt, &m).unwrap().total - 0.1).abs() < 1e-12);
        assert!(grad_l1(&pred, &gt, &m).unwrap().total.abs() < 1e-12);
    }

    #[test]
    fn millimetre_shift() {
        let gt = vec![[0.0, 0.0, 0.0], [0.1, 0.2, 0.3]];
        let pred: Vec<Point3> = gt.iter().map(|p| [p[0] + 0.001, p[1], p[2]]).collect();
        let r = verts_l1(&pred, &gt, VertexNorm::L1).unwrap();
        assert!((r.total - 0.001).abs() < 1e-15);
    }

    #[test]
    fn batch_order_does_not_matter() {
        let mk = |t: f64| LossReport::single("uv", t, vec![t]);
        let vals = [0.1, 1e-9, 3.0, 0.7, 1e6];
        let a = batch_mean(vals.iter().map(|&v| mk(v)).collect());
        let b = batch_mean(vals.iter().rev().map(|&v| mk(v)).collect());
        assert_eq!(a.total, b.total);
        assert_eq!(a.components, b.components);
    }
}
