//! Evaluation: joint and vertex errors, Procrustes alignment, PCK/PCV
//! curves with AUC, F-score, and depth-map RMSE/PSNR.
//!
//! Coordinates are meters; errors are reported in millimeters unless a
//! field name says otherwise.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{check_spread, fit_similarity};
use crate::error::{Error, Result};
use crate::mesh::{Point3, TriMesh};
use crate::srdata::NearestIndex;
use crate::warp::Camera;

/// Display cap for PSNR of identical maps.
pub const PSNR_CAP_DB: f64 = 99.0;
pub const PCK_MAX_MM: f64 = 50.0;
pub const PCK_STEP_MM: f64 = 1.0;

fn same_len(a: usize, b: usize, what: &'static str) -> Result<()> {
    if a != b {
        return Err(Error::CountMismatch {
            what,
            expected: b,
            got: a,
        });
    }
    Ok(())
}

fn dist(a: Point3, b: Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Per-point Euclidean distances in millimeters.
pub fn point_errors_mm(pred: &[Point3], gt: &[Point3]) -> Result<Vec<f64>> {
    same_len(pred.len(), gt.len(), "points")?;
    Ok(pred.iter().zip(gt).map(|(&a, &b)| 1000.0 * dist(a, b)).collect())
}

/// Mean per-point Euclidean distance in millimeters.
pub fn mean_euclidean_error(pred: &[Point3], gt: &[Point3]) -> Result<f64> {
    let e = point_errors_mm(pred, gt)?;
    if e.is_empty() {
        return Err(Error::Degenerate("mean error of an empty point set".into()));
    }
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

/// Best similarity transform of `pred` onto `gt`, applied to `pred`.
pub fn procrustes_align(pred: &[Point3], gt: &[Point3]) -> Result<Vec<Point3>> {
    same_len(pred.len(), gt.len(), "points")?;
    check_spread(gt, "Procrustes target")?;
    Ok(fit_similarity(pred, gt, true)?.apply_all(pred))
}

/// Fraction of errors at or below each threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PckCurve {
    pub thresholds_mm: Vec<f64>,
    pub fractions: Vec<f64>,
}

impl PckCurve {
    /// Area under the curve by the trapezoid rule, divided by the
    /// threshold range.
    pub fn auc(&self) -> f64 {
        let t = &self.thresholds_mm;
        let range = t[t.len() - 1] - t[0];
        if range <= 0.0 {
            return self.fractions[0];
        }
        let area: f64 = (1..t.len())
            .map(|i| 0.5 * (self.fractions[i] + self.fractions[i - 1]) * (t[i] - t[i - 1]))
            .sum();
        area / range
    }
}

/// PCK curve over `0..=max_mm` in steps of `step_mm`.
pub fn pck_curve(errors_mm: &[f64], max_mm: f64, step_mm: f64) -> Result<PckCurve> {
    if errors_mm.is_empty() {
        return Err(Error::Degenerate("PCK of no errors".into()));
    }
    if let Some(e) = errors_mm.iter().find(|e| !(**e >= 0.0)) {
        return Err(Error::Config(format!("PCK errors must be non-negative, got {e}")));
    }
    if !(step_mm > 0.0) || !(max_mm > 0.0) {
        return Err(Error::Config("PCK range and step must be positive".into()));
    }
    let mut sorted = errors_mm.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = (max_mm / step_mm).round() as usize;
    let thresholds_mm: Vec<f64> = (0..=n).map(|i| i as f64 * step_mm).collect();
    let fractions = thresholds_mm
        .iter()
        .map(|&t| sorted.partition_point(|&e| e <= t) as f64 / sorted.len() as f64)
        .collect();
    Ok(PckCurve { thresholds_mm, fractions })
}

/// Pooled PCK over 0-50 mm in 1 mm steps and its normalized AUC.
pub fn pck_auc(errors_mm: &[f64]) -> Result<(PckCurve, f64)> {
    let c = pck_curve(errors_mm, PCK_MAX_MM, PCK_STEP_MM)?;
    let auc = c.auc();
    Ok((c, auc))
}

fn within_fraction(from: &[Point3], to: &NearestIndex, tau_m: f64) -> f64 {
    let hit = from.par_iter().filter(|&&p| to.nearest(p).1 <= tau_m).count();
    hit as f64 / from.len() as f64
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// F-score at `tau_mm`: harmonic mean of the fraction of predicted points
/// within `tau` of the ground truth (precision) and vice versa (recall).
pub fn f_score(pred: &[Point3], gt: &[Point3], tau_mm: f64) -> Result<f64> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::Degenerate("F-score of an empty point set".into()));
    }
    let tau = tau_mm / 1000.0;
    let p = within_fraction(pred, &NearestIndex::new(gt)?, tau);
    let r = within_fraction(gt, &NearestIndex::new(pred)?, tau);
    Ok(harmonic(p, r))
}

/// Validity-masked depth image in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DepthMap {
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Z-buffer rendering; pixels without a surface are invalid. The
/// weak-perspective scale is taken at the mesh's mean depth.
pub fn render_depth(mesh: &TriMesh, camera: &Camera, width: usize, height: usize) -> Result<DepthMap> {
    if mesh.faces.is_empty() || mesh.vertices.is_empty() {
        return Err(Error::InvalidMesh("cannot render an empty mesh".into()));
    }
    let ref_depth = mesh.vertices.iter().map(|p| p[2]).sum::<f64>() / mesh.vertex_count() as f64;
    let img = crate::render::render_depth(mesh, camera, width, height, ref_depth);
    let valid: Vec<bool> = (0..width * height).map(|p| img.valid(p)).collect();
    let depth = img
        .depth
        .iter()
        .zip(&valid)
        .map(|(&d, &v)| if v { d } else { 0.0 })
        .collect();
    Ok(DepthMap {
        width,
        height,
        depth,
        valid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthScore {
    pub rmse_mm: f64,
    /// `20 log10(peak / rmse)`, peak being the range of valid ground-truth
    /// depths; [`PSNR_CAP_DB`] when the maps agree exactly.
    pub psnr_db: f64,
    pub pixels: usize,
}

/// RMSE and PSNR over pixels valid in both maps.
pub fn depth_rmse_psnr(pred: &DepthMap, gt: &DepthMap) -> Result<DepthScore> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(Error::Shape(format!(
            "depth maps are {}x{} and {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    let both: Vec<usize> = (0..gt.depth.len()).filter(|&p| pred.valid[p] && gt.valid[p]).collect();
    if both.is_empty() {
        return Err(Error::Degenerate("depth maps have no common valid pixel".into()));
    }
    let sq: f64 = both.iter().map(|&p| (pred.depth[p] - gt.depth[p]).powi(2)).sum();
    let rmse_mm = 1000.0 * (sq / both.len() as f64).sqrt();
    let (lo, hi) = gt
        .depth
        .iter()
        .zip(&gt.valid)
        .filter(|(_, &v)| v)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&d, _)| (lo.min(d), hi.max(d)));
    let peak_mm = 1000.0 * (hi - lo);
    let psnr_db = if rmse_mm == 0.0 {
        PSNR_CAP_DB
    } else {
        (20.0 * (peak_mm / rmse_mm).log10()).min(PSNR_CAP_DB)
    };
    Ok(DepthScore {
        rmse_mm,
        psnr_db,
        pixels: both.len(),
    })
}

/// Summary written by `eval`. Absent inputs leave fields empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pose_error_cm: Option<f64>,
    pub pose_error_mm: Option<f64>,
    pub mesh_error_cm: Option<f64>,
    pub mesh_error_mm: Option<f64>,
    pub auc_pck: Option<f64>,
    pub auc_pcv: Option<f64>,
    pub f5: Option<f64>,
    pub f15: Option<f64>,
    pub depth_rmse_mm: Option<f64>,
    pub psnr_db: Option<f64>,
    #[serde(skip)]
    pub pck: Option<PckCurve>,
    #[serde(skip)]
    pub pcv: Option<PckCurve>,
}

/// Per-sample predictions and ground truth.
#[derive(Debug, Clone, Default)]
pub struct EvalSet {
    pub pred_joints: Vec<Vec<Point3>>,
    pub gt_joints: Vec<Vec<Point3>>,
    pub pred_verts: Vec<Vec<Point3>>,
    pub gt_verts: Vec<Vec<Point3>>,
}

/// Pooled errors of every sample, optionally after per-sample Procrustes
/// alignment, in sample order.
fn pooled_errors(pred: &[Vec<Point3>], gt: &[Vec<Point3>], procrustes: bool) -> Result<Vec<f64>> {
    same_len(pred.len(), gt.len(), "samples")?;
    let per: Vec<Vec<f64>> = pred
        .par_iter()
        .zip(gt)
        .map(|(p, g)| {
            let p = if procrustes { procrustes_align(p, g)? } else { p.clone() };
            point_errors_mm(&p, g)
        })
        .collect::<Result<_>>()?;
    Ok(per.concat())
}

fn mean(v: &[f64]) -> f64 {
    crate::loss::order_free_sum(v) / v.len() as f64
}

/// Joint/vertex errors, AUCs and F-scores; F-scores are averaged over
/// samples after optional alignment.
pub fn evaluate(set: &EvalSet, procrustes: bool) -> Result<MetricsReport> {
    let mut r = MetricsReport::default();
    if !set.gt_joints.is_empty() {
        let e = pooled_errors(&set.pred_joints, &set.gt_joints, procrustes)?;
        let (curve, auc) = pck_auc(&e)?;
        let m = mean(&e);
        r.pose_error_mm = Some(m);
        r.pose_error_cm = Some(m / 10.0);
        r.auc_pck = Some(auc);
        r.pck = Some(curve);
    }
    if !set.gt_verts.is_empty() {
        let e = pooled_errors(&set.pred_verts, &set.gt_verts, procrustes)?;
        let (curve, auc) = pck_auc(&e)?;
        let m = mean(&e);
        r.mesh_error_mm = Some(m);
        r.mesh_error_cm = Some(m / 10.0);
        r.auc_pcv = Some(auc);
        r.pcv = Some(curve);
        let fs: Vec<(f64, f64)> = set
            .pred_verts
            .par_iter()
            .zip(&set.gt_verts)
            .map(|(p, g)| {
                let p = if procrustes { procrustes_align(p, g)? } else { p.clone() };
                Ok((f_score(&p, g, 5.0)?, f_score(&p, g, 15.0)?))
            })
            .collect::<Result<_>>()?;
        r.f5 = Some(mean(&fs.iter().map(|f| f.0).collect::<Vec<_>>()));
        r.f15 = Some(mean(&fs.iter().map(|f| f.1).collect::<Vec<_>>()));
    }
    Ok(r)
}

/// CSV with columns `threshold_mm,pck,pcv`; a missing curve leaves its
/// column empty.
pub fn write_curve_csv(w: &mut impl Write, pck: Option<&PckCurve>, pcv: Option<&PckCurve>) -> Result<()> {
    let base = pck
        .or(pcv)
        .ok_or_else(|| Error::Config("no curve to export".into()))?;
    let io = |e| Error::io("<csv stream>", e);
    writeln!(w, "threshold_mm,pck,pcv").map_err(io)?;
    for (i, t) in base.thresholds_mm.iter().enumerate() {
        let cell = |c: Option<&PckCurve>| c.map(|c| format!("{:.6}", c.fractions[i])).unwrap_or_default();
        writeln!(w, "{t},{},{}", cell(pck), cell(pcv)).map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_offset() {
        let a = vec![[0.0; 3], [1.0, 2.0, 3.0]];
        let b: Vec<Point3> = a.iter().map(|p| [p[0] + 0.007, p[1], p[2]]).collect();
        assert!((mean_euclidean_error(&a, &b).unwrap() - 7.0).abs() < 1e-9);
    }

    #[test]
    fn auc_extremes() {
        assert_eq!(pck_auc(&[0.0; 5]).unwrap().1, 1.0);
        assert_eq!(pck_auc(&[51.0, 80.0]).unwrap().1, 0.0);
        assert!(pck_auc(&[]).is_err());
    }

    #[test]
    fn f_score_far_sets_is_zero() {
        let a = vec![[0.0; 3]];
        let b = vec![[1.0, 0.0, 0.0]];
        assert_eq!(f_score(&a, &b, 15.0).unwrap(), 0.0);
        assert_eq!(f_score(&a, &a, 5.0).unwrap(), 1.0);
    }
}
