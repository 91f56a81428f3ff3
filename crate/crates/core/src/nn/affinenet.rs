use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uv::Mask;
use crate::warp::{AffineConnection, WarpContext};

use super::checkpoint::Checkpoint;
use super::layers::{concat, split, ConvBnRelu, Layer, Param, UpBlock, Upsample2x, UvHead};
use super::Tensor4;

pub const LEVELS: usize = 5;

/// Channel widths and input size of [`AffineNet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub resolution: usize,
    /// Encoder outputs E1..E5, each at half the previous resolution.
    pub encoder: [usize; LEVELS],
    /// Decoder features D4..D0, coarse to fine.
    pub decoder: [usize; LEVELS],
    pub seed: u64,
}

impl NetConfig {
    pub const FULL_ENCODER: [usize; LEVELS] = [64, 128, 256, 512, 1024];
    pub const FULL_DECODER: [usize; LEVELS] = [512, 256, 128, 64, 32];

    /// Full widths at 256x256 input.
    pub fn full() -> Self {
        NetConfig::scaled(1.0, 256)
    }

    /// Widths multiplied by `mult` (at least one channel each).
    pub fn scaled(mult: f64, resolution: usize) -> Self {
        let f = |c: usize| ((c as f64 * mult).round() as usize).max(1);
        NetConfig {
            resolution,
            encoder: NetConfig::FULL_ENCODER.map(f),
            decoder: NetConfig::FULL_DECODER.map(f),
            seed: 0,
        }
    }

    /// Toy default: 1/16 widths at 64x64, no layer narrower than 8.
    pub fn toy() -> Self {
        NetConfig::scaled(1.0 / 16.0, 64).with_min_width(8)
    }

    pub fn with_min_width(mut self, min: usize) -> Self {
        self.encoder = self.encoder.map(|c| c.max(min));
        self.decoder = self.decoder.map(|c| c.max(min));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution % 32 != 0 || self.resolution < 32 {
            return Err(Error::Config(format!(
                "resolution {} must be a positive multiple of 32 for five stride-2 stages",
                self.resolution
            )));
        }
        if self.encoder.iter().chain(&self.decoder).any(|&c| c == 0) {
            return Err(Error::Config("channel widths must be positive".into()));
        }
        Ok(())
    }

    /// Side lengths of the UV heads I4..I0.
    pub fn uv_sizes(&self) -> [usize; LEVELS] {
        [16, 8, 4, 2, 1].map(|d| self.resolution / d)
    }
}

/// Every intermediate of one forward pass; lists run coarse to fine.
#[derive(Debug, Clone)]
pub struct AffineOutputs {
    /// E1..E5.
    pub encoder: Vec<Tensor4>,
    /// D4..D0.
    pub decoder: Vec<Tensor4>,
    /// A3..A0.
    pub affine: Vec<Tensor4>,
    /// Upsampled previous UV maps feeding levels 3..0.
    pub uv_up: Vec<Tensor4>,
    /// Fused features D'3..D'0.
    pub fused: Vec<Tensor4>,
    /// UV heads I4..I0, values in (0, 1).
    pub uv: Vec<Tensor4>,
}

/// Image-to-UV encoder-decoder. Each decoder level concatenates warped
/// encoder features (projected through the UV map predicted one level
/// coarser), upsampled decoder features and the upsampled coarser UV map.
pub struct AffineNet {
    pub config: NetConfig,
    encoder: Vec<ConvBnRelu>,
    /// D4..D0.
    up: Vec<UpBlock>,
    /// D'3..D'0.
    fuse: Vec<ConvBnRelu>,
    /// I4..I0.
    heads: Vec<UvHead>,
    connect: Vec<AffineConnection>,
    uv_up: Vec<Upsample2x>,
}

impl AffineNet {
    pub fn new(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (e, d) = (config.encoder, config.decoder);
        let mut encoder = Vec::new();
        let mut cin = 3;
        for (k, &c) in e.iter().enumerate() {
            encoder.push(ConvBnRelu::new(&format!("enc{}", k + 1), cin, c, 2, &mut rng));
            cin = c;
        }
        let mut up = vec![UpBlock::new("dec4", e[4], d[0], &mut rng)];
        let mut fuse = Vec::new();
        let mut heads = vec![UvHead::new("uv4", d[0], &mut rng)];
        for k in 1..LEVELS {
            let level = 4 - k;
            up.push(UpBlock::new(&format!("dec{level}"), d[k - 1], d[k], &mut rng));
            // A has the channels of the encoder output one level up
            let a = e[level];
            fuse.push(ConvBnRelu::new(&format!("fuse{level}"), a + d[k] + 3, d[k], 1, &mut rng));
            heads.push(UvHead::new(&format!("uv{level}"), d[k], &mut rng));
        }
        Ok(AffineNet {
            config,
            encoder,
            up,
            fuse,
            heads,
            connect: vec![AffineConnection::default(); LEVELS - 1],
            uv_up: vec![Upsample2x::default(); LEVELS - 1],
        })
    }

    pub fn set_training(&mut self, training: bool) {
        for b in self.encoder.iter_mut().chain(self.fuse.iter_mut()) {
            b.bn.training = training;
        }
        for b in &mut self.up {
            b.block.bn.training = training;
        }
    }

    /// Parameters in a fixed order (used by the optimizer and checkpoints).
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = Vec::new();
        for b in &mut self.encoder {
            p.extend(b.params_mut());
        }
        for b in &mut self.up {
            p.extend(b.params_mut());
        }
        for b in &mut self.fuse {
            p.extend(b.params_mut());
        }
        for h in &mut self.heads {
            p.extend(h.params_mut());
        }
        p
    }

    /// Batch-norm running statistics as `(name, values)`.
    pub fn buffers_mut(&mut self) -> Vec<(String, &mut Vec<f64>)> {
        let mut out = Vec::new();
        let bns = self
            .encoder
            .iter_mut()
            .map(|b| &mut b.bn)
            .chain(self.up.iter_mut().map(|b| &mut b.block.bn))
            .chain(self.fuse.iter_mut().map(|b| &mut b.bn));
        for bn in bns {
            let base = bn.gamma.name.trim_end_matches(".gamma").to_string();
            out.push((format!("{base}.running_mean"), &mut bn.running_mean));
            out.push((format!("{base}.running_var"), &mut bn.running_var));
        }
        out
    }

    /// Parameters and batch-norm statistics with the config echoed.
    pub fn to_checkpoint(&mut self) -> Result<Checkpoint> {
        let config = serde_json::to_value(&self.config).map_err(|e| Error::Format(e.to_string()))?;
        let mut ck = Checkpoint::from_params(config, &self.params_mut(), &[]);
        ck.blobs
            .extend(Checkpoint::from_params(serde_json::Value::Null, &[], &self.buffers_mut()).blobs);
        Ok(ck)
    }

    /// Rebuilds a network from the checkpoint's config and blobs.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config: NetConfig =
            serde_json::from_value(ck.config.clone()).map_err(|e| Error::Format(e.to_string()))?;
        let mut net = AffineNet::new(config)?;
        ck.restore(&mut net.params_mut(), &mut [])?;
        ck.restore(&mut [], &mut net.buffers_mut())?;
        Ok(net)
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(|p| p.zero_grad());
    }

    /// `masks` are the template masks at the UV head resolutions I4..I0
    /// (`None` treats every pixel as valid).
    pub fn forward(&mut self, image: &Tensor4, masks: Option<&[Mask]>, ctx: &WarpContext) -> Result<AffineOutputs> {
        let r = self.config.resolution;
        if image.c != 3 || image.h != r || image.w != r {
            return Err(Error::Shape(format!(
                "AffineNet expects (N,3,{r},{r}), got {:?}",
                image.shape()
            )));
        }
        if let Some(m) = masks {
            if m.len() != LEVELS {
                return Err(Error::CountMismatch {
                    what: "UV level masks",
                    expected: LEVELS,
                    got: m.len(),
                });
            }
        }
        let mut encoder = Vec::with_capacity(LEVELS);
        let mut x = image.clone();
        for b in &mut self.encoder {
            x = b.forward(&x)?;
            encoder.push(x.clone());
        }
        let mut decoder = vec![self.up[0].forward(&encoder[4])?];
        let mut uv = vec![self.heads[0].forward(&decoder[0])?];
        let (mut affine, mut uv_up, mut fused) = (Vec::new(), Vec::new(), Vec::new());
        let mut prev_fused = decoder[0].clone();
        for k in 1..LEVELS {
            let level = 4 - k;
            let mask = masks.map(|m| &m[k - 1]);
            let a = self.connect[k - 1].forward(&uv[k - 1], &encoder[level], mask, ctx)?;
            let d = self.up[k].forward(&prev_fused)?;
            let iu = self.uv_up[k - 1].forward(&uv[k - 1])?;
            let f = self.fuse[k - 1].forward(&concat(&[&a, &d, &iu])?)?;
            uv.push(self.heads[k].forward(&f)?);
            prev_fused = f.clone();
            affine.push(a);
            decoder.push(d);
            uv_up.push(iu);
            fused.push(f);
        }
        Ok(AffineOutputs {
            encoder,
            decoder,
            affine,
            uv_up,
            fused,
            uv,
        })
    }

    /// Backpropagates gradients given for the UV heads I4..I0 (missing
    /// heads get zero gradient) and returns the image gradient. Parameter
    /// gradients accumulate.
    pub fn backward(&mut self, out: &AffineOutputs, grad_uv: &[Option<Tensor4>]) -> Tensor4 {
        let mut g_uv: Vec<Tensor4> = out
            .uv
            .iter()
            .enumerate()
            .map(|(k, t)| grad_uv.get(k).cloned().flatten().unwrap_or_else(|| t.zeros_like()))
            .collect();
        let mut g_enc: Vec<Tensor4> = out.encoder.iter().map(|t| t.zeros_like()).collect();
        let mut g_fused: Option<Tensor4> = None;
        for k in (1..LEVELS).rev() {
            let level = 4 - k;
            let mut gf = self.heads[k].backward(&g_uv[k]);
            if let Some(extra) = g_fused.take() {
                gf.add_assign(&extra);
            }
            let gcat = self.fuse[k - 1].backward(&gf);
            let cs = [out.affine[k - 1].c, out.decoder[k].c, 3];
            let mut parts = split(&gcat, &cs).into_iter();
            let (ga, gd, giu) = (parts.next().unwrap(), parts.next().unwrap(), parts.next().unwrap());
            g_uv[k - 1].add_assign(&self.uv_up[k - 1].backward(&giu));
            g_fused = Some(self.up[k].backward(&gd));
            let (gfeat, guv) = self.connect[k - 1].backward(&ga);
            g_enc[level].add_assign(&gfeat);
            g_uv[k - 1].add_assign(&guv);
        }
        let mut g0 = self.heads[0].backward(&g_uv[0]);
        if let Some(extra) = g_fused.take() {
            g0.add_assign(&extra);
        }
        g_enc[4].add_assign(&self.up[0].backward(&g0));
        let mut g = g_enc[4].clone();
        for s in (0..LEVELS).rev() {
            g = self.encoder[s].backward(&g);
            if s > 0 {
                g.add_assign(&g_enc[s - 1]);
            }
        }
        g
    }

    /// Named `(C, H, W)` of every intermediate, computed from layer shape
    /// rules alone.
    pub fn trace_shapes(&self) -> Result<Vec<(String, [usize; 3])>> {
        let r = self.config.resolution;
        let mut rows = vec![("input".to_string(), [3, r, r])];
        let mut s = [3, r, r];
        let mut enc = Vec::new();
        for (k, b) in self.encoder.iter().enumerate() {
            s = b.out_shape(s)?;
            rows.push((format!("E{}", k + 1), s));
            enc.push(s);
        }
        let mut d = self.up[0].out_shape(enc[4])?;
        rows.push(("D4".into(), d));
        let mut uv = self.heads[0].out_shape(d)?;
        rows.push(("I4".into(), uv));
        for k in 1..LEVELS {
            let level = 4 - k;
            let e = enc[level];
            if (e[1], e[2]) != (uv[1], uv[2]) {
                return Err(Error::Shape(format!("E{} and I{} differ in size", level + 1, level + 1)));
            }
            let a = [e[0], 2 * e[1], 2 * e[2]];
            rows.push((format!("A{level}"), a));
            let dn = self.up[k].out_shape(d)?;
            rows.push((format!("D{level}"), dn));
            let iu = [3, 2 * uv[1], 2 * uv[2]];
            rows.push((format!("I{level}_up"), iu));
            let f = self.fuse[k - 1].out_shape([a[0] + dn[0] + iu[0], dn[1], dn[2]])?;
            rows.push((format!("D'{level}"), f));
            uv = self.heads[k].out_shape(f)?;
            rows.push((format!("I{level}"), uv));
            d = f;
        }
        Ok(rows)
    }
}
