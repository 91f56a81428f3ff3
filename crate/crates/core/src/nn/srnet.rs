use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::checkpoint::Checkpoint;
use super::layers::{Conv2d, Layer, Param, Relu};
use super::Tensor4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrNetConfig {
    pub resolution: usize,
    /// Output channels of the 9x9 and first 5x5 convolutions.
    pub channels: [usize; 2],
    /// Predict a correction added to the input instead of the map itself.
    pub residual: bool,
    /// Start the last convolution at zero.
    pub zero_last: bool,
    pub seed: u64,
}

impl SrNetConfig {
    pub fn full() -> Self {
        SrNetConfig {
            resolution: 256,
            channels: [64, 32],
            residual: false,
            zero_last: false,
            seed: 0,
        }
    }

    pub fn toy() -> Self {
        SrNetConfig {
            resolution: 64,
            channels: [16, 8],
            residual: true,
            zero_last: true,
            seed: 0,
        }
    }
}

/// Three-layer convolutional refiner: 9x9 conv + ReLU, 5x5 conv + ReLU,
/// 5x5 conv to three channels; spatial size is preserved.
pub struct SrNet {
    pub config: SrNetConfig,
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub conv3: Conv2d,
    relu1: Relu,
    relu2: Relu,
}

impl SrNet {
    pub fn new(config: SrNetConfig) -> Result<Self> {
        if config.channels.contains(&0) {
            return Err(Error::Config("SRNet channel widths must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let [c1, c2] = config.channels;
        let mut conv3 = Conv2d::new("sr.conv3", c2, 3, 5, 1, 2, &mut rng);
        if config.zero_last {
            conv3.weight.value.iter_mut().for_each(|w| *w = 0.0);
        }
        Ok(SrNet {
            conv1: Conv2d::new("sr.conv1", 3, c1, 9, 1, 4, &mut rng),
            conv2: Conv2d::new("sr.conv2", c1, c2, 5, 1, 2, &mut rng),
            conv3,
            relu1: Relu::default(),
            relu2: Relu::default(),
            config,
        })
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.conv1.params_mut();
        p.extend(self.conv2.params_mut());
        p.extend(self.conv3.params_mut());
        p
    }

    pub fn to_checkpoint(&mut self) -> Result<Checkpoint> {
        let config = serde_json::to_value(&self.config).map_err(|e| Error::Format(e.to_string()))?;
        Ok(Checkpoint::from_params(config, &self.params_mut(), &[]))
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config: SrNetConfig =
            serde_json::from_value(ck.config.clone()).map_err(|e| Error::Format(e.to_string()))?;
        let mut net = SrNet::new(config)?;
        ck.restore(&mut net.params_mut(), &mut [])?;
        Ok(net)
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(|p| p.zero_grad());
    }

    pub fn forward(&mut self, x: &Tensor4) -> Result<Tensor4> {
        if x.c != 3 {
            return Err(Error::Shape(format!("SRNet expects 3 channels, got {:?}", x.shape())));
        }
        let h = self.conv1.forward(x)?;
        let h = self.relu1.forward(&h)?;
        let h = self.conv2.forward(&h)?;
        let h = self.relu2.forward(&h)?;
        let mut y = self.conv3.forward(&h)?;
        if self.config.residual {
            y.add_assign(x);
        }
        Ok(y)
    }

    pub fn backward(&mut self, gy: &Tensor4) -> Tensor4 {
        let g = self.conv3.backward(gy);
        let g = self.relu2.backward(&g);
        let g = self.conv2.backward(&g);
        let g = self.relu1.backward(&g);
        let mut gx = self.conv1.backward(&g);
        if self.config.residual {
            gx.add_assign(gy);
        }
        gx
    }

    pub fn trace_shapes(&self, input: [usize; 3]) -> Result<Vec<(String, [usize; 3])>> {
        let s1 = self.conv1.out_shape(input)?;
        let s2 = self.conv2.out_shape(s1)?;
        let s3 = self.conv3.out_shape(s2)?;
        Ok(vec![
            ("input".into(), input),
            ("conv9x9".into(), s1),
            ("conv5x5".into(), s2),
            ("output".into(), s3),
        ])
    }
}
