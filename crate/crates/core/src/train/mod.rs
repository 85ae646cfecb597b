//! Losses, configuration, checkpoints and the training loops.

pub mod checkpoint;
pub mod config;
pub mod losses;
mod segnet;
mod trainer;

pub use checkpoint::{
    checkpoint_id, load_bundle, load_segnet, read_manifest, save_bundle, save_segnet, BundleInfo, Manifest, Models,
};
pub use config::TrainConfig;
pub use losses::{
    discriminator_loss, generator_loss, loss_image, loss_mask, loss_seg, loss_total, weighted_total, LossComponents,
    LossTerm, LossWeights, TermMask,
};
pub use segnet::{pixel_accuracy, train_segnet, SegnetTraining};
pub use trainer::{generator_terms, palette_raster, tile, EpochMetrics, StepLosses, Trainer, METRICS_FILE};
