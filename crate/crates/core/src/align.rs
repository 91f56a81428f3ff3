//! Closed-form least-squares similarity and rigid alignment of point sets.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Point3;

/// `p -> scale * R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub rotation: [[f64; 3]; 3],
    pub translation: Point3,
    pub scale: f64,
}

impl Default for Similarity {
    fn default() -> Self {
        Similarity {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
            scale: 1.0,
        }
    }
}

impl Similarity {
    pub fn translation(t: Point3) -> Self {
        Similarity {
            translation: t,
            ..Default::default()
        }
    }

    #[inline]
    pub fn apply(&self, p: Point3) -> Point3 {
        let r = crate::mesh::mat_vec(&self.rotation, p);
        [
            self.scale * r[0] + self.translation[0],
            self.scale * r[1] + self.translation[1],
            self.scale * r[2] + self.translation[2],
        ]
    }

    pub fn apply_all(&self, points: &[Point3]) -> Vec<Point3> {
        points.iter().map(|&p| self.apply(p)).collect()
    }

    /// Angle (radians) of the relative rotation `R_self R_other^T`.
    pub fn rotation_angle_to(&self, other: &Similarity) -> f64 {
        let a = to_matrix(&self.rotation);
        let b = to_matrix(&other.rotation);
        let rel = a * b.transpose();
        ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0).acos()
    }
}

fn to_matrix(r: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| r[i][j])
}

pub fn centroid(points: &[Point3]) -> Point3 {
    let n = points.len().max(1) as f64;
    let mut c = [0.0; 3];
    for p in points {
        for k in 0..3 {
            c[k] += p[k];
        }
    }
    c.map(|v| v / n)
}

/// Fails when the points are (numerically) collinear or coincident.
pub fn check_spread(points: &[Point3], what: &str) -> Result<()> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!("{what}: need at least 3 points, got {}", points.len())));
    }
    let c = centroid(points);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = Vector3::new(p[0] - c[0], p[1] - c[1], p[2] - c[2]);
        cov += d * d.transpose();
    }
    let mut s: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    if s[0] <= 0.0 || s[1] <= 1e-12 * s[0] {
        return Err(Error::Degenerate(format!("{what}: points are collinear")));
    }
    Ok(())
}

/// Least-squares `dst ~ s R src + t` (Umeyama). Without `with_scale`, `s = 1`.
/// Reflections are excluded; a rank-deficient cross-covariance (fewer than
/// two independent directions) is an error.
pub fn fit_similarity(src: &[Point3], dst: &[Point3], with_scale: bool) -> Result<Similarity> {
    fit_weighted(src, dst, None, with_scale)
}

pub(crate) fn fit_weighted(src: &[Point3], dst: &[Point3], weights: Option<&[f64]>, with_scale: bool) -> Result<Similarity> {
    if src.len() != dst.len() {
        return Err(Error::CountMismatch {
            what: "alignment points",
            expected: src.len(),
            got: dst.len(),
        });
    }
    if src.len() < 3 {
        return Err(Error::Degenerate(format!("alignment needs at least 3 pairs, got {}", src.len())));
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let wsum: f64 = (0..src.len()).map(w).sum();
    let mean = |pts: &[Point3]| {
        let mut c = Vector3::zeros();
        for (i, p) in pts.iter().enumerate() {
            c += w(i) * Vector3::new(p[0], p[1], p[2]);
        }
        c / wsum
    };
    let (mu_s, mu_d) = (mean(src), mean(dst));
    let mut cov = Matrix3::zeros();
    let mut var_s = 0.0;
    for i in 0..src.len() {
        let s = Vector3::new(src[i][0], src[i][1], src[i][2]) - mu_s;
        let d = Vector3::new(dst[i][0], dst[i][1], dst[i][2]) - mu_d;
        cov += w(i) * d * s.transpose();
        var_s += w(i) * s.norm_squared();
    }
    cov /= wsum;
    var_s /= wsum;
    let svd = cov.svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut sv: Vec<(usize, f64)> = svd.singular_values.iter().copied().enumerate().collect();
    sv.sort_by(|a, b| b.1.total_cmp(&a.1));
    if sv[0].1 <= 0.0 || sv[1].1 <= 1e-12 * sv[0].1 {
        return Err(Error::Degenerate("cross-covariance is rank deficient".into()));
    }
    let mut d = Matrix3::identity();
    if (u.determinant() * vt.determinant()) < 0.0 {
        // flip the axis of the smallest singular value
        d[(sv[2].0, sv[2].0)] = -1.0;
    }
    let r = u * d * vt;
    let scale = if with_scale {
        let tr: f64 = (0..3).map(|k| svd.singular_values[k] * d[(k, k)]).sum();
        tr / var_s
    } else {
        1.0
    };
    let t = mu_d - scale * r * mu_s;
    Ok(Similarity {
        rotation: [0, 1, 2].map(|i| [0, 1, 2].map(|j| r[(i, j)])),
        translation: [t[0], t[1], t[2]],
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::axis_angle;

    #[test]
    fn recovers_known_similarity() {
        let src: Vec<Point3> = (0..20)
            .map(|i| {
                let t = i as f64;
                [t.sin(), (1.3 * t).cos(), 0.1 * t]
            })
            .collect();
        let truth = Similarity {
            rotation: axis_angle([0.3, -1.0, 0.2], 0.8),
            translation: [0.1, -0.2, 0.5],
            scale: 1.7,
        };
        let dst = truth.apply_all(&src);
        let fit = fit_similarity(&src, &dst, true).unwrap();
        assert!(fit.rotation_angle_to(&truth) < 1e-10);
        assert!((fit.scale - 1.7).abs() < 1e-10);
    }

    #[test]
    fn collinear_is_degenerate() {
        let src: Vec<Point3> = (0..5).map(|i| [i as f64, 2.0 * i as f64, 0.0]).collect();
        assert!(matches!(fit_similarity(&src, &src, false), Err(Error::Degenerate(_))));
        assert!(check_spread(&src, "src").is_err());
    }
}
