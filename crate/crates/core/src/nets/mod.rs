//! Networks on the autodiff tape. Each subnetwork owns one parameter store.

pub mod chanreduce;
pub mod compose;
pub mod disc;
pub mod embed;
pub mod encdec;
pub mod generator;
pub mod layers;
pub mod maskgen;
pub mod segnet;

pub use chanreduce::ChannelReducer;
pub use compose::{compose_intermediate, crop_and_resize};
pub use disc::{CellDiscriminator, ImageDiscriminator, CELL_CROP_SIZE};
pub use embed::{CellEmbedder, GraphEmbedder};
pub use encdec::{EncDecConfig, EncoderDecoder};
pub use generator::{Combine, Generator, GeneratorOutput, NetConfig, Variant};
pub use layers::Ctx;
pub use maskgen::MaskGenerator;
pub use segnet::{argmax_channels, SegNet};
