use std::fmt::Write as _;
use std::path::Path;

use super::{Point3, TriMesh};
use crate::error::{Error, Result};

/// Joints defined as weighted vertex combinations.
pub const RULE_JOINTS: usize = 16;
/// Joints taken directly from fingertip vertices.
pub const TIP_COUNT: usize = 5;
pub const JOINT_COUNT: usize = RULE_JOINTS + TIP_COUNT;

/// Sparse joint regressor: 16 weighted vertex sets plus 5 fingertip vertices.
/// Output order is the 16 rule joints followed by the 5 tips.
#[derive(Debug, Clone, PartialEq)]
pub struct JointRules {
    pub n_verts: usize,
    pub rules: Vec<Vec<(usize, f64)>>,
    pub tips: [usize; TIP_COUNT],
}

/// Vertex/face counts together with the joint rules for a hand mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct HandTopology {
    pub n_verts: usize,
    pub n_faces: usize,
    pub joints: JointRules,
}

impl JointRules {
    pub fn new(n_verts: usize, rules: Vec<Vec<(usize, f64)>>, tips: [usize; TIP_COUNT]) -> Result<Self> {
        if rules.len() != RULE_JOINTS {
            return Err(Error::CountMismatch {
                what: "joint rules",
                expected: RULE_JOINTS,
                got: rules.len(),
            });
        }
        for (j, rule) in rules.iter().enumerate() {
            if rule.is_empty() {
                return Err(Error::Format(format!("joint {j} has no vertices")));
            }
            let sum: f64 = rule.iter().map(|&(_, w)| w).sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::Format(format!("joint {j} weights sum to {sum}, expected 1")));
            }
            if let Some(&(v, _)) = rule.iter().find(|&&(v, _)| v >= n_verts) {
                return Err(Error::Format(format!("joint {j} references vertex {v} >= {n_verts}")));
            }
        }
        if let Some(&t) = tips.iter().find(|&&t| t >= n_verts) {
            return Err(Error::Format(format!("fingertip vertex {t} >= {n_verts}")));
        }
        Ok(JointRules { n_verts, rules, tips })
    }

    /// Reads the plain-text rule format:
    ///
    /// ```text
    /// uvhand-joints 1
    /// verts <n>
    /// tips <t0> <t1> <t2> <t3> <t4>
    /// <joint_id> <vertex_id> <weight>
    /// ...
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut n_verts = None;
        let mut tips = None;
        let mut rules: Vec<Vec<(usize, f64)>> = vec![Vec::new(); RULE_JOINTS];
        let mut header_seen = false;
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let toks: Vec<&str> = content.split_whitespace().collect();
            let perr = |msg: &str| Error::Parse {
                line,
                msg: msg.to_string(),
            };
            match toks[0] {
                "uvhand-joints" => {
                    if toks.get(1) != Some(&"1") {
                        return Err(perr("unsupported joint-rule version"));
                    }
                    header_seen = true;
                }
                "verts" => {
                    n_verts = Some(toks.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| perr("bad vertex count"))?)
                }
                "tips" => {
                    if toks.len() != TIP_COUNT + 1 {
                        return Err(perr("expected 5 fingertip indices"));
                    }
                    let mut t = [0usize; TIP_COUNT];
                    for (k, s) in toks[1..].iter().enumerate() {
                        t[k] = s.parse().map_err(|_| perr("bad fingertip index"))?;
                    }
                    tips = Some(t);
                }
                _ => {
                    if toks.len() != 3 {
                        return Err(perr("expected 'joint vertex weight'"));
                    }
                    let j: usize = toks[0].parse().map_err(|_| perr("bad joint id"))?;
                    let v: usize = toks[1].parse().map_err(|_| perr("bad vertex id"))?;
                    let w: f64 = toks[2].parse().map_err(|_| perr("bad weight"))?;
                    if j >= RULE_JOINTS {
                        return Err(perr("joint id out of range"));
                    }
                    rules[j].push((v, w));
                }
            }
        }
        if !header_seen {
            return Err(Error::Format("missing 'uvhand-joints 1' header".into()));
        }
        let n_verts = n_verts.ok_or_else(|| Error::Format("missing 'verts' line".into()))?;
        let tips = tips.ok_or_else(|| Error::Format("missing 'tips' line".into()))?;
        JointRules::new(n_verts, rules, tips)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "uvhand-joints 1");
        let _ = writeln!(s, "verts {}", self.n_verts);
        let tips: Vec<String> = self.tips.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(s, "tips {}", tips.join(" "));
        for (j, rule) in self.rules.iter().enumerate() {
            for &(v, w) in rule {
                let _ = writeln!(s, "{j} {v} {w:.17e}");
            }
        }
        s
    }

    /// The 21 joints for one vertex set: 16 weighted combinations then 5 tips.
    pub fn regress(&self, vertices: &[Point3]) -> Result<Vec<Point3>> {
        regress(self, vertices)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

impl HandTopology {
    pub fn new(n_faces: usize, joints: JointRules) -> Self {
        HandTopology {
            n_verts: joints.n_verts,
            n_faces,
            joints,
        }
    }

    /// The 21 joints of `mesh`: 16 weighted combinations then 5 tips.
    pub fn regress_joints(&self, mesh: &TriMesh) -> Result<Vec<Point3>> {
        regress(&self.joints, &mesh.vertices)
    }
}

pub(crate) fn regress(rules: &JointRules, vertices: &[Point3]) -> Result<Vec<Point3>> {
    if vertices.len() != rules.n_verts {
        return Err(Error::CountMismatch {
            what: "mesh vertices vs joint rules",
            expected: rules.n_verts,
            got: vertices.len(),
        });
    }
    let mut out = Vec::with_capacity(JOINT_COUNT);
    for rule in &rules.rules {
        let mut p = [0.0; 3];
        for &(v, w) in rule {
            for k in 0..3 {
                p[k] += w * vertices[v][k];
            }
        }
        out.push(p);
    }
    out.extend(rules.tips.iter().map(|&t| vertices[t]));
    Ok(out)
}
