//! Small CPU tensor layers and the two UV networks built from them: the
//! encoder-decoder that regresses multi-scale UV position maps from an image
//! (with affine connections between the two halves) and the convolutional
//! super-resolution network that refines a UV map.

mod affinenet;
mod checkpoint;
mod layers;
mod optim;
mod srnet;
mod tensor;
pub mod train;

pub use affinenet::{AffineNet, AffineOutputs, NetConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use layers::{concat, split, BatchNorm2d, Conv2d, ConvBnRelu, Layer, Param, Relu, Sigmoid, UpBlock, Upsample2x, UvHead};
pub use optim::{cosine_lr, Adam};
pub use srnet::{SrNet, SrNetConfig};
pub use tensor::Tensor4;
